//! Galerkin bases for the structure displacement and the fluid velocity.

use nalgebra::{DMatrix, DVector};

use super::transforms::{lat_mode_eval, lat_mode_ksq, lat_mode_product, FieldTables, Grid, LatMode};
use super::trig::{self, Vert};
use crate::error::{Error, Result};

/// Enumerate lateral modes ordered by |k|^2, then lexicographically by the
/// per-axis codes (cosine before sine at equal wavenumber).
pub fn ordered_lat_modes(d_lat: usize, count: usize, kcap: usize) -> Vec<LatMode> {
    let codes_per_axis: Vec<usize> = (0..=2 * kcap).collect();
    let mut modes: Vec<LatMode> = Vec::new();
    if d_lat == 1 {
        for &c in &codes_per_axis {
            modes.push([c, trig::LAT_CONST]);
        }
    } else {
        for &c0 in &codes_per_axis {
            for &c1 in &codes_per_axis {
                modes.push([c0, c1]);
            }
        }
    }
    modes.sort_by(|a, b| {
        let ka = lat_mode_ksq(*a, d_lat);
        let kb = lat_mode_ksq(*b, d_lat);
        ka.partial_cmp(&kb).unwrap().then(a.cmp(b))
    });
    modes.truncate(count);
    modes
}

/// Real trigonometric basis for displacement fields on the lateral torus,
/// orthonormal in L2 and diagonalizing the Laplacian and bilaplacian.
#[derive(Debug, Clone)]
pub struct StructureBasis {
    pub d_lat: usize,
    pub n_modes: usize,
    pub modes: Vec<LatMode>,
    /// -Laplace eigenvalue per mode.
    pub lap_eig: Vec<f64>,
}

impl StructureBasis {
    pub fn new(d_lat: usize, n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Parameter("structure basis needs at least one mode".into()));
        }
        // a cap of n_modes wavenumbers is always enough to fill the list
        let modes = ordered_lat_modes(d_lat, n_modes, n_modes);
        let lap_eig = modes.iter().map(|&m| lat_mode_ksq(m, d_lat)).collect();
        Ok(StructureBasis { d_lat, n_modes, modes, lap_eig })
    }

    /// Largest per-axis wavenumber present in the basis.
    pub fn max_wavenumber(&self) -> usize {
        self.modes
            .iter()
            .map(|m| trig::lat_wavenumber(m[0]).max(trig::lat_wavenumber(m[1])))
            .max()
            .unwrap_or(0)
    }

    pub fn eval_mode(&self, i: usize, xy: [f64; 2]) -> f64 {
        lat_mode_eval(self.modes[i], xy, self.d_lat)
    }

    /// Evaluate a coefficient vector on the lateral grid.
    pub fn eval_grid(&self, coeffs: &DVector<f64>, grid: &Grid) -> Vec<f64> {
        let mut out = vec![0.0; grid.n_lat()];
        for flat in 0..grid.n_lat() {
            let xy = grid.lat_coord(flat);
            out[flat] = (0..self.n_modes).map(|i| coeffs[i] * self.eval_mode(i, xy)).sum();
        }
        out
    }

    /// L2-orthogonal projection of lateral grid samples by quadrature.
    pub fn project_grid(&self, field: &[f64], grid: &Grid) -> DVector<f64> {
        assert_eq!(field.len(), grid.n_lat());
        let w = grid.lat_weight();
        let mut coeffs = DVector::zeros(self.n_modes);
        for flat in 0..grid.n_lat() {
            let xy = grid.lat_coord(flat);
            for i in 0..self.n_modes {
                coeffs[i] += field[flat] * self.eval_mode(i, xy) * w;
            }
        }
        coeffs
    }

    /// Fractional Sobolev norm under the convention
    /// `(sum_k (1 + |2 pi k|^2)^s |c_k|^2)^(1/2)`.
    pub fn hs_norm(&self, coeffs: &DVector<f64>, s: f64) -> f64 {
        assert!(s >= 0.0, "hs_norm requires s >= 0");
        (0..self.n_modes)
            .map(|i| (1.0 + self.lap_eig[i]).powf(s) * coeffs[i] * coeffs[i])
            .sum::<f64>()
            .sqrt()
    }
}

/// One fluid velocity basis function: unit vector `e_comp` times a lateral
/// trig mode times a vertical sine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FluidMode {
    /// Velocity component this mode acts on; the last component is vertical.
    pub comp: usize,
    pub lat: LatMode,
    /// Vertical sine index (>= 1), so every mode vanishes at z = 0 and z = H.
    pub m: usize,
}

/// Tensor-product velocity basis on the maximal box, orthonormal in L2 with
/// zero trace on the top and bottom walls.
#[derive(Debug, Clone)]
pub struct FluidBasis {
    pub d_lat: usize,
    pub ncomp: usize,
    pub height: f64,
    pub kmax: usize,
    pub mmax: usize,
    pub lat_modes: Vec<LatMode>,
    pub modes: Vec<FluidMode>,
    /// Diagonal of the gradient stiffness: `int grad psi_i : grad psi_i`.
    pub lap_eig: Vec<f64>,
    /// Dense `int div psi_i div psi_j` table under grid quadrature.
    pub div_div: DMatrix<f64>,
}

impl FluidBasis {
    pub fn new(grid: &Grid, kmax: usize, mmax: usize) -> Result<Self> {
        let d_lat = grid.d_lat;
        let ncomp = d_lat + 1;
        if mmax < 1 {
            return Err(Error::Parameter("fluid basis needs mmax >= 1".into()));
        }
        // products of basis modes must stay below the grid Nyquist limit so
        // that separable assembly is exact
        if 2 * kmax >= grid.nx / 2 {
            return Err(Error::Parameter(format!(
                "fluid kmax {kmax} too large for lateral resolution {}",
                grid.nx
            )));
        }
        if 2 * mmax >= grid.nz {
            return Err(Error::Parameter(format!(
                "fluid mmax {mmax} too large for vertical resolution {}",
                grid.nz
            )));
        }
        let n_latmodes = (2 * kmax + 1).pow(d_lat as u32);
        let lat_modes = ordered_lat_modes(d_lat, n_latmodes, kmax);
        let mut modes = Vec::with_capacity(ncomp * lat_modes.len() * mmax);
        for comp in 0..ncomp {
            for &lat in &lat_modes {
                for m in 1..=mmax {
                    modes.push(FluidMode { comp, lat, m });
                }
            }
        }
        let h = grid.height;
        let lap_eig = modes
            .iter()
            .map(|md| lat_mode_ksq(md.lat, d_lat) + (md.m as f64 * std::f64::consts::PI / h).powi(2))
            .collect();
        let mut basis = FluidBasis {
            d_lat,
            ncomp,
            height: h,
            kmax,
            mmax,
            lat_modes,
            modes,
            lap_eig,
            div_div: DMatrix::zeros(0, 0),
        };
        let ones = vec![1.0; grid.n_cells()];
        let tables = basis.weight_tables(grid, &ones);
        basis.div_div = basis.assemble_divdiv(&tables);
        Ok(basis)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Build the quadrature tables of a weight field at the caps this basis
    /// needs for exact separable assembly.
    pub fn weight_tables(&self, grid: &Grid, weight: &[f64]) -> FieldTables {
        FieldTables::build(grid, weight, 2 * (2 * self.kmax), 2 * self.mmax, 2 * self.mmax)
    }

    /// Divergence of mode `i` as `(lateral mode, vertical mode, coefficient)`,
    /// or `None` when it vanishes identically.
    fn div_form(&self, i: usize) -> Option<(LatMode, Vert, f64)> {
        let md = self.modes[i];
        if md.comp + 1 == self.ncomp {
            // vertical component: d/dz of the sine
            let (v, w) = trig::vert_deriv(Vert::Sin(md.m), self.height).unwrap();
            Some((md.lat, v, w))
        } else {
            let axis = md.comp;
            let (img, w) = trig::lat_deriv(md.lat[axis])?;
            let mut lat = md.lat;
            lat[axis] = img;
            Some((lat, Vert::Sin(md.m), w))
        }
    }

    /// Weighted Gram matrix `int w psi_i . psi_j` by exact separable
    /// assembly against the weight tables.
    pub fn assemble_gram(&self, tables: &FieldTables) -> DMatrix<f64> {
        let n = self.n_modes();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (mi, mj) = (self.modes[i], self.modes[j]);
                if mi.comp != mj.comp {
                    continue;
                }
                let mut acc = 0.0;
                for (lat, wl) in lat_mode_product(mi.lat, mj.lat, self.d_lat) {
                    for &(v, wv) in &trig::vert_product(Vert::Sin(mi.m), Vert::Sin(mj.m), self.height) {
                        acc += wl * wv * tables.get(lat, v);
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    /// Weighted gradient stiffness `int w grad psi_i : grad psi_j`.
    pub fn assemble_grad(&self, tables: &FieldTables) -> DMatrix<f64> {
        let n = self.n_modes();
        let h = self.height;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (mi, mj) = (self.modes[i], self.modes[j]);
                if mi.comp != mj.comp {
                    continue;
                }
                let mut acc = 0.0;
                // lateral derivative parts
                for axis in 0..self.d_lat {
                    let (di, dj) = (trig::lat_deriv(mi.lat[axis]), trig::lat_deriv(mj.lat[axis]));
                    if let (Some((ci, wi)), Some((cj, wj))) = (di, dj) {
                        let (mut li, mut lj) = (mi.lat, mj.lat);
                        li[axis] = ci;
                        lj[axis] = cj;
                        for (lat, wl) in lat_mode_product(li, lj, self.d_lat) {
                            for &(v, wv) in &trig::vert_product(Vert::Sin(mi.m), Vert::Sin(mj.m), h) {
                                acc += wi * wj * wl * wv * tables.get(lat, v);
                            }
                        }
                    }
                }
                // vertical derivative part
                let (vi, wiz) = trig::vert_deriv(Vert::Sin(mi.m), h).unwrap();
                let (vj, wjz) = trig::vert_deriv(Vert::Sin(mj.m), h).unwrap();
                for (lat, wl) in lat_mode_product(mi.lat, mj.lat, self.d_lat) {
                    for &(v, wv) in &trig::vert_product(vi, vj, h) {
                        acc += wiz * wjz * wl * wv * tables.get(lat, v);
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    /// Weighted divergence stiffness `int w div psi_i div psi_j`.
    pub fn assemble_divdiv(&self, tables: &FieldTables) -> DMatrix<f64> {
        let n = self.n_modes();
        let forms: Vec<Option<(LatMode, Vert, f64)>> = (0..n).map(|i| self.div_form(i)).collect();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            let Some((lat_i, vert_i, wi)) = forms[i] else { continue };
            for j in i..n {
                let Some((lat_j, vert_j, wj)) = forms[j] else { continue };
                let mut acc = 0.0;
                for (lat, wl) in lat_mode_product(lat_i, lat_j, self.d_lat) {
                    for &(v, wv) in &trig::vert_product(vert_i, vert_j, self.height) {
                        acc += wi * wj * wl * wv * tables.get(lat, v);
                    }
                }
                out[(i, j)] += acc;
                if j != i {
                    out[(j, i)] += acc;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn structure_modes_ordered_and_orthonormal() {
        let basis = StructureBasis::new(1, 16).unwrap();
        assert_eq!(basis.modes[0], [trig::LAT_CONST, 0]);
        assert_eq!(basis.modes[1], [trig::lat_cos(1), 0]);
        assert_eq!(basis.modes[2], [trig::lat_sin(1), 0]);
        let grid = Grid::new(1, 64, 8, 3.0).unwrap();
        for i in 0..basis.n_modes {
            for j in 0..basis.n_modes {
                let mut ip = 0.0;
                for flat in 0..grid.n_lat() {
                    let xy = grid.lat_coord(flat);
                    ip += basis.eval_mode(i, xy) * basis.eval_mode(j, xy) * grid.lat_weight();
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(ip, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn structure_projection_is_idempotent() {
        let basis = StructureBasis::new(1, 6).unwrap();
        let grid = Grid::new(1, 64, 8, 3.0).unwrap();
        // f = xi_3 + 2 xi_5
        let field: Vec<f64> = (0..grid.n_lat())
            .map(|flat| {
                let xy = grid.lat_coord(flat);
                basis.eval_mode(3, xy) + 2.0 * basis.eval_mode(5, xy)
            })
            .collect();
        let coeffs = basis.project_grid(&field, &grid);
        for i in 0..6 {
            let expect = match i {
                3 => 1.0,
                5 => 2.0,
                _ => 0.0,
            };
            assert_relative_eq!(coeffs[i], expect, epsilon = 1e-12);
        }
        // truncation: projecting onto a 4-mode basis keeps only xi_3
        let small = StructureBasis::new(1, 4).unwrap();
        let c4 = small.project_grid(&field, &grid);
        assert_relative_eq!(c4[3], 1.0, epsilon = 1e-12);
        assert!(c4.iter().take(3).all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn hs_norm_convention() {
        let basis = StructureBasis::new(1, 4).unwrap();
        // eta = 1 -> norm 1 for every s
        let mut c = DVector::zeros(4);
        c[0] = 1.0;
        for s in [0.0, 0.5, 1.75] {
            assert_relative_eq!(basis.hs_norm(&c, s), 1.0, epsilon = 1e-14);
        }
        // eta = cos(2 pi x) = (1/sqrt2) xi_1
        let mut c = DVector::zeros(4);
        c[1] = 1.0 / 2.0_f64.sqrt();
        let s = 1.3;
        let tp = 2.0 * std::f64::consts::PI;
        let expect = ((1.0 + tp * tp).powf(s) / 2.0).sqrt();
        assert_relative_eq!(basis.hs_norm(&c, s), expect, epsilon = 1e-13);
    }

    #[test]
    fn fluid_basis_orthonormal_under_gram() {
        let grid = Grid::new(1, 32, 24, 3.0).unwrap();
        let basis = FluidBasis::new(&grid, 2, 3).unwrap();
        let ones = vec![1.0; grid.n_cells()];
        let tables = basis.weight_tables(&grid, &ones);
        let gram = basis.assemble_gram(&tables);
        for i in 0..basis.n_modes() {
            for j in 0..basis.n_modes() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(gram[(i, j)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_weight_grad_matches_eigenvalues() {
        let grid = Grid::new(1, 32, 24, 3.0).unwrap();
        let basis = FluidBasis::new(&grid, 2, 3).unwrap();
        let ones = vec![1.0; grid.n_cells()];
        let tables = basis.weight_tables(&grid, &ones);
        let grad = basis.assemble_grad(&tables);
        for i in 0..basis.n_modes() {
            assert_relative_eq!(grad[(i, i)], basis.lap_eig[i], epsilon = 1e-10, max_relative = 1e-10);
            for j in 0..i {
                assert!(grad[(i, j)].abs() < 1e-10);
            }
        }
    }
}
