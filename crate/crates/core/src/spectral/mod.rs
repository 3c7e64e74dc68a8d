//! Galerkin bases, projections, quadrature, and fractional Sobolev norms.

pub mod bases;
pub mod sobolev;
pub mod transforms;
pub mod trig;

pub use bases::{FluidBasis, FluidMode, StructureBasis};
pub use sobolev::{gagliardo_seminorm, l2_norm_sq};
pub use transforms::{lat_mode_eval, lat_mode_ksq, DensityBasis, FieldTables, Grid, GridResample, LatMode};

use nalgebra::DVector;

use crate::error::{Error, Result};
use trig::Vert;

/// Quadrature inner product of two grid fields, optionally weighted by a
/// third field (a mask cast to 0/1 works).
pub fn inner_product(grid: &Grid, f: &[f64], g: &[f64], weight: Option<&[f64]>) -> f64 {
    assert_eq!(f.len(), grid.n_cells());
    assert_eq!(g.len(), grid.n_cells());
    let vol = grid.cell_vol();
    match weight {
        None => f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * vol,
        Some(w) => {
            assert_eq!(w.len(), grid.n_cells());
            f.iter().zip(g).zip(w).map(|((a, b), c)| a * b * c).sum::<f64>() * vol
        }
    }
}

/// Evaluate a density-space coefficient field on its grid after applying a
/// spectral derivative. `deriv` holds per-axis derivative orders, lateral
/// axes first and the vertical axis last; total order at most 4.
pub fn eval_field(basis: &DensityBasis, coeffs: &[f64], deriv: &[usize]) -> Result<Vec<f64>> {
    let grid = &basis.grid;
    if deriv.len() != grid.d_lat + 1 {
        return Err(Error::Parameter(format!(
            "derivative multi-index must have {} entries",
            grid.d_lat + 1
        )));
    }
    if deriv.iter().sum::<usize>() > 4 {
        return Err(Error::Parameter("derivatives beyond total order 4 are not supported".into()));
    }
    let mut cur = coeffs.to_vec();
    for (axis, &ord) in deriv.iter().take(grid.d_lat).enumerate() {
        for _ in 0..ord {
            cur = basis.lat_deriv_coeffs(&cur, axis);
        }
    }
    let zord = deriv[grid.d_lat];
    // vertical derivatives: cosine series alternates with sine series
    let nz = grid.nz;
    let n_lat = grid.n_lat();
    let rate = std::f64::consts::PI / grid.height;
    if zord == 0 {
        return Ok(basis.to_grid(&cur));
    }
    // track the series family while differentiating
    let mut in_cos = true;
    let mut sin_coeffs: Vec<f64> = Vec::new();
    for _ in 0..zord {
        if in_cos {
            // C_m' = -(m pi / H) S_m
            let mut out = vec![0.0; n_lat * (nz - 1)];
            for flat in 0..n_lat {
                for m in 1..nz {
                    out[flat * (nz - 1) + (m - 1)] = -(m as f64) * rate * cur[flat * nz + m];
                }
            }
            sin_coeffs = out;
            in_cos = false;
        } else {
            // S_m' = (m pi / H) C_m
            let mut out = vec![0.0; n_lat * nz];
            for flat in 0..n_lat {
                for m in 1..nz {
                    out[flat * nz + m] = m as f64 * rate * sin_coeffs[flat * (nz - 1) + (m - 1)];
                }
            }
            cur = out;
            in_cos = true;
        }
    }
    if in_cos {
        Ok(basis.to_grid(&cur))
    } else {
        Ok(basis.sin_coeffs_to_grid(&sin_coeffs))
    }
}

/// Precomputed evaluation and projection machinery tying a [`FluidBasis`]
/// to one collocation grid.
#[derive(Debug, Clone)]
pub struct FluidEval {
    pub grid: Grid,
    n_latmodes: usize,
    mmax: usize,
    /// [lat_mode_idx * n_lat + flat]
    lat_vals: Vec<f64>,
    /// [(m-1) * nz + iz]
    sin_vals: Vec<f64>,
    /// [(m-1) * nz + iz], the normalized cosine at the same index
    cos_vals: Vec<f64>,
    /// per lateral mode and axis: (image mode index, factor)
    dlat: Vec<Vec<Option<(usize, f64)>>>,
}

impl FluidEval {
    pub fn new(basis: &FluidBasis, grid: &Grid) -> Self {
        assert_eq!(basis.d_lat, grid.d_lat);
        let n_lat = grid.n_lat();
        let n_latmodes = basis.lat_modes.len();
        let mut lat_vals = vec![0.0; n_latmodes * n_lat];
        for (li, &mode) in basis.lat_modes.iter().enumerate() {
            for flat in 0..n_lat {
                lat_vals[li * n_lat + flat] = lat_mode_eval(mode, grid.lat_coord(flat), grid.d_lat);
            }
        }
        let nz = grid.nz;
        let mut sin_vals = vec![0.0; basis.mmax * nz];
        let mut cos_vals = vec![0.0; basis.mmax * nz];
        for m in 1..=basis.mmax {
            for j in 0..nz {
                let z = grid.z1d(j);
                sin_vals[(m - 1) * nz + j] = trig::vert_eval(Vert::Sin(m), z, grid.height);
                cos_vals[(m - 1) * nz + j] = trig::vert_eval(Vert::Cos(m), z, grid.height);
            }
        }
        let dlat = basis
            .lat_modes
            .iter()
            .map(|mode| {
                (0..grid.d_lat)
                    .map(|axis| {
                        trig::lat_deriv(mode[axis]).map(|(img, w)| {
                            let mut target = *mode;
                            target[axis] = img;
                            let idx = basis
                                .lat_modes
                                .iter()
                                .position(|&m| m == target)
                                .expect("lateral mode set closed under derivatives");
                            (idx, w)
                        })
                    })
                    .collect()
            })
            .collect();
        FluidEval { grid: grid.clone(), n_latmodes, mmax: basis.mmax, lat_vals, sin_vals, cos_vals, dlat }
    }

    fn scatter(&self, basis: &FluidBasis, coeffs: &DVector<f64>, comp: usize) -> Vec<f64> {
        let mut spec = vec![0.0; self.n_latmodes * self.mmax];
        for (i, md) in basis.modes.iter().enumerate() {
            if md.comp != comp {
                continue;
            }
            let li = basis.lat_modes.iter().position(|&m| m == md.lat).unwrap();
            spec[li * self.mmax + (md.m - 1)] = coeffs[i];
        }
        spec
    }

    fn spec_to_grid(&self, spec: &[f64], vert_vals: &[f64], vert_scale: impl Fn(usize) -> f64) -> Vec<f64> {
        let n_lat = self.grid.n_lat();
        let nz = self.grid.nz;
        // T[flat][m] = sum_l spec[l][m] lat_vals[l][flat]
        let mut t = vec![0.0; n_lat * self.mmax];
        for l in 0..self.n_latmodes {
            let lv = &self.lat_vals[l * n_lat..(l + 1) * n_lat];
            let sp = &spec[l * self.mmax..(l + 1) * self.mmax];
            for (flat, &v) in lv.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let row = &mut t[flat * self.mmax..(flat + 1) * self.mmax];
                for (dst, &s) in row.iter_mut().zip(sp) {
                    *dst += v * s;
                }
            }
        }
        let mut out = vec![0.0; n_lat * nz];
        for flat in 0..n_lat {
            let row = &t[flat * self.mmax..(flat + 1) * self.mmax];
            let col = &mut out[flat * nz..(flat + 1) * nz];
            for (m_idx, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let scale = c * vert_scale(m_idx + 1);
                let vv = &vert_vals[m_idx * nz..(m_idx + 1) * nz];
                for (dst, &v) in col.iter_mut().zip(vv) {
                    *dst += scale * v;
                }
            }
        }
        out
    }

    /// Values of one velocity component on the grid.
    pub fn component(&self, basis: &FluidBasis, coeffs: &DVector<f64>, comp: usize) -> Vec<f64> {
        let spec = self.scatter(basis, coeffs, comp);
        self.spec_to_grid(&spec, &self.sin_vals, |_| 1.0)
    }

    /// Derivative of one component along `axis` (lateral axes first,
    /// `axis == d_lat` is the vertical derivative).
    pub fn component_deriv(
        &self,
        basis: &FluidBasis,
        coeffs: &DVector<f64>,
        comp: usize,
        axis: usize,
    ) -> Vec<f64> {
        let spec = self.scatter(basis, coeffs, comp);
        if axis == self.grid.d_lat {
            let rate = std::f64::consts::PI / self.grid.height;
            return self.spec_to_grid(&spec, &self.cos_vals, |m| m as f64 * rate);
        }
        let mut dspec = vec![0.0; spec.len()];
        for l in 0..self.n_latmodes {
            if let Some((img, w)) = self.dlat[l][axis] {
                for m in 0..self.mmax {
                    dspec[img * self.mmax + m] += w * spec[l * self.mmax + m];
                }
            }
        }
        self.spec_to_grid(&dspec, &self.sin_vals, |_| 1.0)
    }

    /// All components of a velocity coefficient vector.
    pub fn all_components(&self, basis: &FluidBasis, coeffs: &DVector<f64>) -> Vec<Vec<f64>> {
        (0..basis.ncomp).map(|c| self.component(basis, coeffs, c)).collect()
    }

    /// Divergence of a velocity coefficient vector on the grid.
    pub fn divergence(&self, basis: &FluidBasis, coeffs: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_cells()];
        for comp in 0..basis.ncomp {
            let axis = if comp + 1 == basis.ncomp { self.grid.d_lat } else { comp };
            let d = self.component_deriv(basis, coeffs, comp, axis);
            for (dst, v) in out.iter_mut().zip(d) {
                *dst += v;
            }
        }
        out
    }

    /// Quadrature sums of a scalar grid field against `lat_mode x Sin(m)`
    /// and `lat_mode x Cos(m)` for every lateral mode of the basis and
    /// `m = 1..=mmax`; the building block for projections against basis
    /// functions and their derivatives.
    pub fn scalar_tables(&self, field: &[f64]) -> ScalarTables {
        assert_eq!(field.len(), self.grid.n_cells());
        let n_lat = self.grid.n_lat();
        let nz = self.grid.nz;
        let dz = self.grid.dz();
        let lat_w = self.grid.lat_weight();
        let mmax = self.mmax;
        // contract vertically
        let mut bs_x = vec![0.0; n_lat * mmax];
        let mut bc_x = vec![0.0; n_lat * mmax];
        for flat in 0..n_lat {
            let col = &field[flat * nz..(flat + 1) * nz];
            for m_idx in 0..mmax {
                let sv = &self.sin_vals[m_idx * nz..(m_idx + 1) * nz];
                let cv = &self.cos_vals[m_idx * nz..(m_idx + 1) * nz];
                let mut acc_s = 0.0;
                let mut acc_c = 0.0;
                for j in 0..nz {
                    acc_s += col[j] * sv[j];
                    acc_c += col[j] * cv[j];
                }
                bs_x[flat * mmax + m_idx] = acc_s * dz;
                bc_x[flat * mmax + m_idx] = acc_c * dz;
            }
        }
        // contract laterally
        let mut bs = vec![0.0; self.n_latmodes * mmax];
        let mut bc = vec![0.0; self.n_latmodes * mmax];
        for l in 0..self.n_latmodes {
            let lv = &self.lat_vals[l * n_lat..(l + 1) * n_lat];
            for flat in 0..n_lat {
                let v = lv[flat] * lat_w;
                if v == 0.0 {
                    continue;
                }
                for m_idx in 0..mmax {
                    bs[l * mmax + m_idx] += v * bs_x[flat * mmax + m_idx];
                    bc[l * mmax + m_idx] += v * bc_x[flat * mmax + m_idx];
                }
            }
        }
        ScalarTables { mmax, bs, bc }
    }

    /// Index of a lateral mode within this basis' lateral mode list.
    pub fn lat_index(&self, basis: &FluidBasis, mode: LatMode) -> usize {
        basis.lat_modes.iter().position(|&m| m == mode).unwrap()
    }

    /// Value of lateral mode `l` at lateral cell `flat`.
    #[inline]
    pub fn lat_value(&self, l: usize, flat: usize) -> f64 {
        self.lat_vals[l * self.grid.n_lat() + flat]
    }

    #[inline]
    pub fn n_latmodes(&self) -> usize {
        self.n_latmodes
    }

    /// Derivative image of lateral mode `l` along `axis`.
    pub fn lat_deriv_image(&self, l: usize, axis: usize) -> Option<(usize, f64)> {
        self.dlat[l][axis]
    }

    /// L2 projection of a vector field (given per component on this grid)
    /// onto the fluid basis, by quadrature.
    pub fn project(&self, basis: &FluidBasis, fields: &[Vec<f64>]) -> DVector<f64> {
        assert_eq!(fields.len(), basis.ncomp);
        let n_lat = self.grid.n_lat();
        let nz = self.grid.nz;
        let dz = self.grid.dz();
        let lat_w = self.grid.lat_weight();
        let mut out = DVector::zeros(basis.n_modes());
        for comp in 0..basis.ncomp {
            let field = &fields[comp];
            assert_eq!(field.len(), self.grid.n_cells());
            // contract z against the sines
            let mut b = vec![0.0; n_lat * self.mmax];
            for flat in 0..n_lat {
                let col = &field[flat * nz..(flat + 1) * nz];
                for m_idx in 0..self.mmax {
                    let vv = &self.sin_vals[m_idx * nz..(m_idx + 1) * nz];
                    b[flat * self.mmax + m_idx] =
                        col.iter().zip(vv).map(|(a, c)| a * c).sum::<f64>() * dz;
                }
            }
            // contract laterally
            for (i, md) in basis.modes.iter().enumerate() {
                if md.comp != comp {
                    continue;
                }
                let li = basis.lat_modes.iter().position(|&m| m == md.lat).unwrap();
                let lv = &self.lat_vals[li * n_lat..(li + 1) * n_lat];
                let mut acc = 0.0;
                for flat in 0..n_lat {
                    acc += lv[flat] * b[flat * self.mmax + (md.m - 1)];
                }
                out[i] = acc * lat_w;
            }
        }
        out
    }
}

/// Sums of a scalar field against separable basis functions, indexed by
/// `(lateral mode, m - 1)`.
#[derive(Debug, Clone)]
pub struct ScalarTables {
    mmax: usize,
    bs: Vec<f64>,
    bc: Vec<f64>,
}

impl ScalarTables {
    #[inline]
    pub fn sin(&self, lat_idx: usize, m: usize) -> f64 {
        self.bs[lat_idx * self.mmax + (m - 1)]
    }

    #[inline]
    pub fn cos(&self, lat_idx: usize, m: usize) -> f64 {
        self.bc[lat_idx * self.mmax + (m - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_field_vertical_derivative() {
        let grid = Grid::new(1, 8, 64, 4.0).unwrap();
        let basis = DensityBasis::new(&grid);
        // f = cos(pi z / H); df/dz = -(pi/H) sin(pi z / H)
        let field: Vec<f64> = (0..grid.n_cells())
            .map(|c| {
                let z = grid.z1d(c % grid.nz);
                (std::f64::consts::PI * z / grid.height).cos()
            })
            .collect();
        let coeffs = basis.to_coeffs(&field);
        let d = eval_field(&basis, &coeffs, &[0, 1]).unwrap();
        for c in 0..grid.n_cells() {
            let z = grid.z1d(c % grid.nz);
            let expect =
                -(std::f64::consts::PI / grid.height) * (std::f64::consts::PI * z / grid.height).sin();
            assert_relative_eq!(d[c], expect, epsilon = 1e-12, max_relative = 1e-10);
        }
        assert!(eval_field(&basis, &coeffs, &[3, 2]).is_err());
    }

    #[test]
    fn fluid_eval_derivative_matches_finite_difference() {
        // fourth-order centered differences against the spectral derivative
        // on a resolved smooth field at grid 128
        let grid = Grid::new(1, 128, 128, 3.0).unwrap();
        let basis = FluidBasis::new(&grid, 3, 4).unwrap();
        let eval = FluidEval::new(&basis, &grid);
        let mut coeffs = DVector::zeros(basis.n_modes());
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = ((i * 37 + 11) % 17) as f64 / 17.0 - 0.5;
        }
        let stencil = |fm2: f64, fm1: f64, fp1: f64, fp2: f64, h: f64| {
            (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h)
        };
        for comp in 0..basis.ncomp {
            for axis in [0usize, 1] {
                let d = eval.component_deriv(&basis, &coeffs, comp, axis);
                let f = eval.component(&basis, &coeffs, comp);
                let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let nz = grid.nz;
                let nl = grid.n_lat();
                for flat in 0..nl {
                    for j in 2..nz - 2 {
                        let fd = if axis == 0 {
                            stencil(
                                f[((flat + nl - 2) % nl) * nz + j],
                                f[((flat + nl - 1) % nl) * nz + j],
                                f[((flat + 1) % nl) * nz + j],
                                f[((flat + 2) % nl) * nz + j],
                                grid.dx(),
                            )
                        } else {
                            stencil(
                                f[flat * nz + j - 2],
                                f[flat * nz + j - 1],
                                f[flat * nz + j + 1],
                                f[flat * nz + j + 2],
                                grid.dz(),
                            )
                        };
                        let err = (fd - d[flat * nz + j]).abs() / scale;
                        assert!(err <= 1e-4, "axis {axis} comp {comp} rel err {err}");
                    }
                }
            }
        }
    }

    #[test]
    fn fluid_projection_recovers_coefficients() {
        let grid = Grid::new(1, 48, 48, 3.0).unwrap();
        let basis = FluidBasis::new(&grid, 2, 3).unwrap();
        let eval = FluidEval::new(&basis, &grid);
        let mut coeffs = DVector::zeros(basis.n_modes());
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = (i as f64 * 0.7).sin();
        }
        let fields = eval.all_components(&basis, &coeffs);
        let back = eval.project(&basis, &fields);
        for i in 0..basis.n_modes() {
            assert_relative_eq!(back[i], coeffs[i], epsilon = 1e-10, max_relative = 1e-10);
        }
    }
}
