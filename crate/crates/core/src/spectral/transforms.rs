//! Collocation grids and the density-space transforms.
//!
//! All quadrature in the crate is midpoint quadrature on cell-centered
//! grids: it is exactly orthonormal for the trigonometric families below
//! the Nyquist limit, which is what makes the separable assembly in the
//! solvers agree with brute-force grid sums to rounding.
//!
//! Scalar fields are stored flattened as `data[lat_flat * nz + iz]` so a
//! vertical column is contiguous. The lateral flat index is `ix` for one
//! lateral axis and `ix0 * nx + ix1` for two.

use super::trig::{self, Vert};
use crate::error::{Error, Result};

/// Cell-centered collocation grid on the maximal box: unit torus in each
/// lateral axis, `(0, height)` vertically.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Number of lateral axes (1 for `dim = 2`, 2 for `dim = 3`).
    pub d_lat: usize,
    /// Points per lateral axis.
    pub nx: usize,
    /// Points in the vertical axis.
    pub nz: usize,
    /// Vertical extent of the maximal box.
    pub height: f64,
}

impl Grid {
    pub fn new(d_lat: usize, nx: usize, nz: usize, height: f64) -> Result<Self> {
        if !(d_lat == 1 || d_lat == 2) {
            return Err(Error::Parameter(format!("d_lat must be 1 or 2, got {d_lat}")));
        }
        if nx < 4 || nz < 4 {
            return Err(Error::Parameter("grid resolutions must be >= 4".into()));
        }
        if nx % 2 != 0 {
            return Err(Error::Parameter("lateral resolution must be even".into()));
        }
        if height <= 2.0 {
            return Err(Error::Parameter("maximal box height must exceed 2".into()));
        }
        Ok(Grid { d_lat, nx, nz, height })
    }

    #[inline]
    pub fn n_lat(&self) -> usize {
        self.nx.pow(self.d_lat as u32)
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_lat() * self.nz
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    #[inline]
    pub fn dz(&self) -> f64 {
        self.height / self.nz as f64
    }

    /// Quadrature weight of one lateral cell.
    #[inline]
    pub fn lat_weight(&self) -> f64 {
        self.dx().powi(self.d_lat as i32)
    }

    /// Quadrature weight of one 3D (or 2D) cell.
    #[inline]
    pub fn cell_vol(&self) -> f64 {
        self.lat_weight() * self.dz()
    }

    #[inline]
    pub fn x1d(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn z1d(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dz()
    }

    /// Lateral coordinates of a flattened lateral index.
    #[inline]
    pub fn lat_coord(&self, flat: usize) -> [f64; 2] {
        if self.d_lat == 1 {
            [self.x1d(flat), 0.0]
        } else {
            [self.x1d(flat / self.nx), self.x1d(flat % self.nx)]
        }
    }

    /// Largest distance from any lateral point to its nearest grid node.
    pub fn lat_cover_radius(&self) -> f64 {
        if self.d_lat == 1 {
            0.5 * self.dx()
        } else {
            0.5 * self.dx() * std::f64::consts::SQRT_2
        }
    }

    /// Grid with the same extent and `factor` times the resolution.
    pub fn refined(&self, factor: usize) -> Grid {
        Grid {
            d_lat: self.d_lat,
            nx: self.nx * factor,
            nz: self.nz * factor,
            height: self.height,
        }
    }
}

/// Multi-axis lateral mode: one 1D trig code per lateral axis
/// (the second entry is the constant mode when only one axis is present).
pub type LatMode = [usize; 2];

pub fn lat_mode_eval(mode: LatMode, xy: [f64; 2], d_lat: usize) -> f64 {
    let mut v = trig::lat_eval(mode[0], xy[0]);
    if d_lat == 2 {
        v *= trig::lat_eval(mode[1], xy[1]);
    }
    v
}

/// Squared modulus of the wavevector `2 pi k` of a lateral mode.
pub fn lat_mode_ksq(mode: LatMode, d_lat: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut s = (two_pi * trig::lat_wavenumber(mode[0]) as f64).powi(2);
    if d_lat == 2 {
        s += (two_pi * trig::lat_wavenumber(mode[1]) as f64).powi(2);
    }
    s
}

/// Product of two lateral modes, expanded exactly into at most
/// `2^d_lat` lateral modes.
pub fn lat_mode_product(a: LatMode, b: LatMode, d_lat: usize) -> Vec<(LatMode, f64)> {
    let t0 = trig::lat_product(a[0], b[0]);
    if d_lat == 1 {
        return t0.into_iter().map(|(c, w)| ([c, trig::LAT_CONST], w)).collect();
    }
    let t1 = trig::lat_product(a[1], b[1]);
    let mut out = Vec::with_capacity(t0.len() * t1.len());
    for &(c0, w0) in &t0 {
        for &(c1, w1) in &t1 {
            out.push(([c0, c1], w0 * w1));
        }
    }
    out
}

/// Apply a dense 1D transform along the middle axis of a
/// `[n_pre, n_in, n_post]` array: `out[p, c, q] = sum_j mat[c, j] in[p, j, q]`.
fn transform_axis(
    input: &[f64],
    n_pre: usize,
    n_in: usize,
    n_out: usize,
    n_post: usize,
    mat: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; n_pre * n_out * n_post];
    for p in 0..n_pre {
        for c in 0..n_out {
            let row = &mat[c * n_in..(c + 1) * n_in];
            let acc = &mut out[(p * n_out + c) * n_post..(p * n_out + c + 1) * n_post];
            for (j, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let src = &input[(p * n_in + j) * n_post..(p * n_in + j + 1) * n_post];
                for (a, &s) in acc.iter_mut().zip(src.iter()) {
                    *a += m * s;
                }
            }
        }
    }
    out
}

/// Bijective spectral transform for density-space fields: full lateral trig
/// basis (periodic) times the vertical Neumann (cosine) family, plus a
/// non-bijective vertical sine path used for z-derivatives of fields that
/// vanish on the walls.
#[derive(Debug, Clone)]
pub struct DensityBasis {
    pub grid: Grid,
    /// Lateral 1D codes, discrete-orthonormal on the cell-centered grid.
    pub lat_codes: Vec<usize>,
    /// Discrete normalization of each lateral code (the cell-centered
    /// Nyquist sine has quadrature norm sqrt(2)).
    lat_dnorm: Vec<f64>,
    lat_fwd: Vec<f64>,
    lat_bwd: Vec<f64>,
    cos_fwd: Vec<f64>,
    cos_bwd: Vec<f64>,
    sin_fwd: Vec<f64>,
    sin_bwd: Vec<f64>,
}

impl DensityBasis {
    pub fn new(grid: &Grid) -> Self {
        let nx = grid.nx;
        let nz = grid.nz;
        // codes 0..=nx-2 plus the Nyquist sine, bijective on cell centers
        let mut lat_codes: Vec<usize> = (0..nx - 1).collect();
        lat_codes.push(trig::lat_sin(nx / 2));
        let lat_dnorm: Vec<f64> = lat_codes
            .iter()
            .map(|&c| if c == trig::lat_sin(nx / 2) { std::f64::consts::SQRT_2 } else { 1.0 })
            .collect();

        let dx = grid.dx();
        let mut lat_fwd = vec![0.0; nx * nx];
        let mut lat_bwd = vec![0.0; nx * nx];
        for (ci, (&code, &dn)) in lat_codes.iter().zip(&lat_dnorm).enumerate() {
            for j in 0..nx {
                let v = trig::lat_eval(code, grid.x1d(j)) / dn;
                lat_fwd[ci * nx + j] = v * dx;
                lat_bwd[j * nx + ci] = v;
            }
        }

        let dz = grid.dz();
        let mut cos_fwd = vec![0.0; nz * nz];
        let mut cos_bwd = vec![0.0; nz * nz];
        for m in 0..nz {
            for j in 0..nz {
                let v = trig::vert_eval(Vert::Cos(m), grid.z1d(j), grid.height);
                cos_fwd[m * nz + j] = v * dz;
                cos_bwd[j * nz + m] = v;
            }
        }
        let n_sin = nz - 1;
        let mut sin_fwd = vec![0.0; n_sin * nz];
        let mut sin_bwd = vec![0.0; nz * n_sin];
        for m in 1..nz {
            for j in 0..nz {
                let v = trig::vert_eval(Vert::Sin(m), grid.z1d(j), grid.height);
                sin_fwd[(m - 1) * nz + j] = v * dz;
                sin_bwd[j * n_sin + (m - 1)] = v;
            }
        }

        DensityBasis {
            grid: grid.clone(),
            lat_codes,
            lat_dnorm,
            lat_fwd,
            lat_bwd,
            cos_fwd,
            cos_bwd,
            sin_fwd,
            sin_bwd,
        }
    }

    fn lat_to_coeffs(&self, data: Vec<f64>, n_post: usize) -> Vec<f64> {
        let nx = self.grid.nx;
        let mut cur = data;
        for axis in 0..self.grid.d_lat {
            let n_pre = nx.pow(axis as u32);
            let n_rest = cur.len() / (n_pre * nx);
            cur = transform_axis(&cur, n_pre, nx, nx, n_rest, &self.lat_fwd);
        }
        debug_assert_eq!(cur.len() % n_post, 0);
        cur
    }

    fn lat_to_grid(&self, data: Vec<f64>) -> Vec<f64> {
        let nx = self.grid.nx;
        let mut cur = data;
        for axis in 0..self.grid.d_lat {
            let n_pre = nx.pow(axis as u32);
            let n_rest = cur.len() / (n_pre * nx);
            cur = transform_axis(&cur, n_pre, nx, nx, n_rest, &self.lat_bwd);
        }
        cur
    }

    /// Grid samples -> coefficients against lateral codes x vertical cosines.
    /// Exact inverse of [`DensityBasis::to_grid`].
    pub fn to_coeffs(&self, field: &[f64]) -> Vec<f64> {
        let nz = self.grid.nz;
        let lat = self.lat_to_coeffs(field.to_vec(), nz);
        transform_axis(&lat, self.grid.n_lat(), nz, nz, 1, &self.cos_fwd)
    }

    pub fn to_grid(&self, coeffs: &[f64]) -> Vec<f64> {
        let nz = self.grid.nz;
        let vert = transform_axis(coeffs, self.grid.n_lat(), nz, nz, 1, &self.cos_bwd);
        self.lat_to_grid(vert)
    }

    /// Grid samples -> coefficients against lateral codes x vertical sines
    /// (projection; sine content only).
    pub fn to_sin_coeffs(&self, field: &[f64]) -> Vec<f64> {
        let nz = self.grid.nz;
        let lat = self.lat_to_coeffs(field.to_vec(), nz);
        transform_axis(&lat, self.grid.n_lat(), nz, nz - 1, 1, &self.sin_fwd)
    }

    /// Evaluate lateral-code x vertical-sine coefficients on the grid.
    pub fn sin_coeffs_to_grid(&self, sin_coeffs: &[f64]) -> Vec<f64> {
        let nz = self.grid.nz;
        let vert = transform_axis(sin_coeffs, self.grid.n_lat(), nz - 1, nz, 1, &self.sin_bwd);
        self.lat_to_grid(vert)
    }

    /// Lateral derivative along `axis`, in cosine-coefficient space.
    pub fn lat_deriv_coeffs(&self, coeffs: &[f64], axis: usize) -> Vec<f64> {
        let nx = self.grid.nx;
        let nz = self.grid.nz;
        let n_lat = self.grid.n_lat();
        let mut out = vec![0.0; coeffs.len()];
        // map lateral code index -> (image index, factor)
        let mut dmap: Vec<Option<(usize, f64)>> = Vec::with_capacity(nx);
        for &code in &self.lat_codes {
            dmap.push(trig::lat_deriv(code).and_then(|(img, w)| {
                self.lat_codes.iter().position(|&c| c == img).map(|idx| (idx, w))
            }));
        }
        for flat in 0..n_lat {
            let idx_axis = if self.grid.d_lat == 1 {
                flat
            } else if axis == 0 {
                flat / nx
            } else {
                flat % nx
            };
            if let Some((img, w)) = dmap[idx_axis] {
                let img_flat = if self.grid.d_lat == 1 {
                    img
                } else if axis == 0 {
                    img * nx + flat % nx
                } else {
                    (flat / nx) * nx + img
                };
                // the Nyquist sine maps to a cosine that vanishes on the
                // grid; its inverse image would double-count, so only write
                // forward images
                let dn_ratio = self.lat_dnorm[idx_axis] / self.lat_dnorm[img];
                for m in 0..nz {
                    out[img_flat * nz + m] += w * dn_ratio * coeffs[flat * nz + m];
                }
            }
        }
        out
    }

    /// d/dz applied to sine coefficients, producing cosine coefficients.
    pub fn sin_dz_to_cos_coeffs(&self, sin_coeffs: &[f64]) -> Vec<f64> {
        let nz = self.grid.nz;
        let n_lat = self.grid.n_lat();
        let mut out = vec![0.0; n_lat * nz];
        let rate = std::f64::consts::PI / self.grid.height;
        for flat in 0..n_lat {
            for m in 1..nz {
                out[flat * nz + m] = m as f64 * rate * sin_coeffs[flat * (nz - 1) + (m - 1)];
            }
        }
        out
    }

    /// Negative Laplacian eigenvalue of coefficient `(lat_flat, m)`.
    pub fn laplace_eig(&self, lat_flat: usize, m: usize) -> f64 {
        let nx = self.grid.nx;
        let mode: LatMode = if self.grid.d_lat == 1 {
            [self.lat_codes[lat_flat], trig::LAT_CONST]
        } else {
            [self.lat_codes[lat_flat / nx], self.lat_codes[lat_flat % nx]]
        };
        let vert = (m as f64 * std::f64::consts::PI / self.grid.height).powi(2);
        lat_mode_ksq(mode, self.grid.d_lat) + vert
    }

    /// Mean-mode coefficient index (total mass is this coefficient times
    /// the square root of the box volume).
    pub fn mean_index(&self) -> usize {
        0
    }
}

/// Evaluates density-space coefficients on a different (finer) grid with
/// the same extent, for de-aliased quadrature of nonlinear terms.
#[derive(Debug, Clone)]
pub struct GridResample {
    pub src: Grid,
    pub dst: Grid,
    lat_bwd: Vec<f64>,
    cos_bwd: Vec<f64>,
}

impl GridResample {
    pub fn new(basis: &DensityBasis, dst: &Grid) -> Self {
        let src = basis.grid.clone();
        assert_eq!(src.d_lat, dst.d_lat);
        assert_eq!(src.height, dst.height);
        let (nxs, nxd) = (src.nx, dst.nx);
        let mut lat_bwd = vec![0.0; nxd * nxs];
        for j in 0..nxd {
            for (ci, (&code, &dn)) in basis.lat_codes.iter().zip(&basis.lat_dnorm).enumerate() {
                lat_bwd[j * nxs + ci] = trig::lat_eval(code, dst.x1d(j)) / dn;
            }
        }
        let (nzs, nzd) = (src.nz, dst.nz);
        let mut cos_bwd = vec![0.0; nzd * nzs];
        for j in 0..nzd {
            for m in 0..nzs {
                cos_bwd[j * nzs + m] = trig::vert_eval(Vert::Cos(m), dst.z1d(j), dst.height);
            }
        }
        GridResample { src, dst: dst.clone(), lat_bwd, cos_bwd }
    }

    /// Coefficients (source-basis layout) -> values on the destination grid.
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut cur = coeffs.to_vec();
        let (nxs, nxd) = (self.src.nx, self.dst.nx);
        for axis in 0..self.src.d_lat {
            let n_pre = nxd.pow(axis as u32);
            let n_rest = cur.len() / (n_pre * nxs);
            cur = transform_axis(&cur, n_pre, nxs, nxd, n_rest, &self.lat_bwd);
        }
        let n_lat = self.dst.n_lat();
        transform_axis(&cur, n_lat, self.src.nz, self.dst.nz, 1, &self.cos_bwd)
    }
}

/// Quadrature sums of a grid field against separable basis functions, used
/// by the separable Galerkin assembly. `cos[lat][m]` is the grid sum of
/// `field * lat_mode * VertCos(m) * cell_vol`, `sin` likewise.
#[derive(Debug, Clone)]
pub struct FieldTables {
    pub d_lat: usize,
    /// Max per-axis lateral code, inclusive.
    pub lat_cap: usize,
    pub m_cos_cap: usize,
    pub m_sin_cap: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl FieldTables {
    pub fn build(grid: &Grid, field: &[f64], lat_cap: usize, m_cos_cap: usize, m_sin_cap: usize) -> Self {
        assert_eq!(field.len(), grid.n_cells());
        let nz = grid.nz;
        let n_lat = grid.n_lat();
        let h = grid.height;
        // contract vertically first
        let n_cos = m_cos_cap + 1;
        let n_sin = m_sin_cap;
        let dz = grid.dz();
        let mut fc = vec![0.0; n_lat * n_cos];
        let mut fs = vec![0.0; n_lat * n_sin];
        let mut cos_vals = vec![0.0; n_cos * nz];
        let mut sin_vals = vec![0.0; n_sin * nz];
        for j in 0..nz {
            let z = grid.z1d(j);
            for m in 0..n_cos {
                cos_vals[m * nz + j] = trig::vert_eval(Vert::Cos(m), z, h) * dz;
            }
            for m in 1..=n_sin {
                sin_vals[(m - 1) * nz + j] = trig::vert_eval(Vert::Sin(m), z, h) * dz;
            }
        }
        for flat in 0..n_lat {
            let col = &field[flat * nz..(flat + 1) * nz];
            for m in 0..n_cos {
                let row = &cos_vals[m * nz..(m + 1) * nz];
                fc[flat * n_cos + m] = col.iter().zip(row).map(|(a, b)| a * b).sum();
            }
            for m in 0..n_sin {
                let row = &sin_vals[m * nz..(m + 1) * nz];
                fs[flat * n_sin + m] = col.iter().zip(row).map(|(a, b)| a * b).sum();
            }
        }
        // contract laterally
        let n_codes = lat_cap + 1;
        let nx = grid.nx;
        let mut lat_vals = vec![0.0; n_codes * nx];
        for c in 0..n_codes {
            for i in 0..nx {
                lat_vals[c * nx + i] = trig::lat_eval(c, grid.x1d(i));
            }
        }
        let lat_w = grid.lat_weight();
        let n_lat_codes = n_codes.pow(grid.d_lat as u32);
        let mut cos = vec![0.0; n_lat_codes * n_cos];
        let mut sin = vec![0.0; n_lat_codes * n_sin];
        for flat in 0..n_lat {
            let (i0, i1) = if grid.d_lat == 1 { (flat, 0) } else { (flat / nx, flat % nx) };
            for c0 in 0..n_codes {
                let v0 = lat_vals[c0 * nx + i0];
                if grid.d_lat == 1 {
                    let w = v0 * lat_w;
                    let dst_c = &mut cos[c0 * n_cos..(c0 + 1) * n_cos];
                    let src_c = &fc[flat * n_cos..(flat + 1) * n_cos];
                    for (d, s) in dst_c.iter_mut().zip(src_c) {
                        *d += w * s;
                    }
                    let dst_s = &mut sin[c0 * n_sin..(c0 + 1) * n_sin];
                    let src_s = &fs[flat * n_sin..(flat + 1) * n_sin];
                    for (d, s) in dst_s.iter_mut().zip(src_s) {
                        *d += w * s;
                    }
                } else {
                    for c1 in 0..n_codes {
                        let w = v0 * lat_vals[c1 * nx + i1] * lat_w;
                        let code = c0 * n_codes + c1;
                        let dst_c = &mut cos[code * n_cos..(code + 1) * n_cos];
                        let src_c = &fc[flat * n_cos..(flat + 1) * n_cos];
                        for (d, s) in dst_c.iter_mut().zip(src_c) {
                            *d += w * s;
                        }
                        let dst_s = &mut sin[code * n_sin..(code + 1) * n_sin];
                        let src_s = &fs[flat * n_sin..(flat + 1) * n_sin];
                        for (d, s) in dst_s.iter_mut().zip(src_s) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
        FieldTables { d_lat: grid.d_lat, lat_cap, m_cos_cap, m_sin_cap, cos, sin }
    }

    #[inline]
    fn lat_index(&self, mode: LatMode) -> usize {
        let n = self.lat_cap + 1;
        if self.d_lat == 1 {
            mode[0]
        } else {
            mode[0] * n + mode[1]
        }
    }

    /// Quadrature sum against `lat_mode x VertCos(m)`.
    #[inline]
    pub fn get(&self, mode: LatMode, vert: Vert) -> f64 {
        match vert {
            Vert::Cos(m) => {
                debug_assert!(m <= self.m_cos_cap);
                self.cos[self.lat_index(mode) * (self.m_cos_cap + 1) + m]
            }
            Vert::Sin(m) => {
                debug_assert!((1..=self.m_sin_cap).contains(&m));
                self.sin[self.lat_index(mode) * self.m_sin_cap + (m - 1)]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_field(grid: &Grid, f: impl Fn([f64; 2], f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; grid.n_cells()];
        for flat in 0..grid.n_lat() {
            let xy = grid.lat_coord(flat);
            for j in 0..grid.nz {
                out[flat * grid.nz + j] = f(xy, grid.z1d(j));
            }
        }
        out
    }

    #[test]
    fn density_round_trip_is_exact() {
        let grid = Grid::new(1, 16, 12, 3.0).unwrap();
        let basis = DensityBasis::new(&grid);
        let field = sample_field(&grid, |xy, z| {
            (2.0 * std::f64::consts::PI * 3.0 * xy[0]).sin() * (z / 3.0).cos() + 0.3 * z * xy[0]
        });
        let coeffs = basis.to_coeffs(&field);
        let back = basis.to_grid(&coeffs);
        for (a, b) in field.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn density_round_trip_2d_lateral() {
        let grid = Grid::new(2, 8, 6, 4.0).unwrap();
        let basis = DensityBasis::new(&grid);
        let field = sample_field(&grid, |xy, z| {
            (2.0 * std::f64::consts::PI * (xy[0] + 2.0 * xy[1])).cos() + z * z
        });
        let coeffs = basis.to_coeffs(&field);
        let back = basis.to_grid(&coeffs);
        for (a, b) in field.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-11, max_relative = 1e-11);
        }
    }

    #[test]
    fn constant_maps_to_single_coefficient() {
        let grid = Grid::new(1, 16, 12, 3.0).unwrap();
        let basis = DensityBasis::new(&grid);
        let field = vec![2.5; grid.n_cells()];
        let coeffs = basis.to_coeffs(&field);
        // constant = 2.5 = coeff * C_0 => coeff = 2.5 sqrt(H)
        assert_relative_eq!(coeffs[0], 2.5 * 3.0f64.sqrt(), epsilon = 1e-12);
        let others: f64 = coeffs.iter().skip(1).map(|c| c.abs()).sum();
        assert!(others < 1e-12);
    }

    #[test]
    fn lateral_derivative_matches_analytic() {
        let grid = Grid::new(1, 32, 8, 3.0).unwrap();
        let basis = DensityBasis::new(&grid);
        let tp = 2.0 * std::f64::consts::PI;
        let field = sample_field(&grid, |xy, _| (tp * 2.0 * xy[0]).sin());
        let coeffs = basis.to_coeffs(&field);
        let dcoeffs = basis.lat_deriv_coeffs(&coeffs, 0);
        let deriv = basis.to_grid(&dcoeffs);
        let expect = sample_field(&grid, |xy, _| tp * 2.0 * (tp * 2.0 * xy[0]).cos());
        for (a, b) in deriv.iter().zip(&expect) {
            assert_relative_eq!(a, b, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn field_tables_match_direct_sums() {
        let grid = Grid::new(1, 16, 10, 2.5).unwrap();
        let field = sample_field(&grid, |xy, z| 0.3 + xy[0] * z + (z - 1.0).powi(2));
        let tables = FieldTables::build(&grid, &field, 6, 5, 5);
        // compare a handful of entries against direct grid sums
        for (mode, vert) in [
            ([trig::LAT_CONST, 0], Vert::Cos(0)),
            ([trig::lat_cos(2), 0], Vert::Cos(3)),
            ([trig::lat_sin(3), 0], Vert::Sin(2)),
        ] {
            let mut direct = 0.0;
            for flat in 0..grid.n_lat() {
                let xy = grid.lat_coord(flat);
                for j in 0..grid.nz {
                    direct += field[flat * grid.nz + j]
                        * lat_mode_eval(mode, xy, 1)
                        * trig::vert_eval(vert, grid.z1d(j), grid.height)
                        * grid.cell_vol();
                }
            }
            assert_relative_eq!(tables.get(mode, vert), direct, epsilon = 1e-12, max_relative = 1e-12);
        }
    }
}
