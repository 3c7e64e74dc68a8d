//! Maximal domain, bounding envelopes, viscosity extension, and the
//! indicator sets attached to a structure displacement.

use crate::error::{Error, Result};
use crate::spectral::Grid;

/// The fixed maximal box containing every admissible moving domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    /// Ambient dimension, 2 or 3; the interface torus has dimension `dim - 1`.
    pub dim: usize,
    /// Domain parameter: displacements are confined by `alpha_dom` from
    /// below and by `1/alpha_dom` in the fractional Sobolev norm.
    pub alpha_dom: f64,
    /// Vertical extent `2 + 1/alpha_dom`.
    pub height: f64,
    pub grid_nx: usize,
    pub grid_nz: usize,
}

impl DomainSpec {
    pub fn new(dim: usize, alpha_dom: f64, grid_nx: usize, grid_nz: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::Parameter(format!("dim must be 2 or 3, got {dim}")));
        }
        if !(alpha_dom > 0.0 && alpha_dom <= 1.0) {
            return Err(Error::Parameter(format!(
                "alpha_dom must lie in (0, 1], got {alpha_dom}"
            )));
        }
        if grid_nx < 4 || grid_nz < 4 {
            return Err(Error::Parameter("grid resolutions must be at least 4".into()));
        }
        Ok(DomainSpec { dim, alpha_dom, height: 2.0 + 1.0 / alpha_dom, grid_nx, grid_nz })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim - 1, self.grid_nx, self.grid_nz, self.height)
    }
}

/// Half-Hölder constant: every displacement with `H^s` norm at most
/// `1/alpha_dom` satisfies `|eta(w1) - eta(w2)| <= C |w1 - w2|^(1/2)`.
///
/// Computed from the Fourier embedding bound
/// `C = (1/alpha) sup_r r^(-1/2) (sum_k min(2, 2 pi |k| r)^2 (1 + |2 pi k|^2)^(-s))^(1/2)`
/// with the supremum taken over a logarithmic grid in `r` and the lattice
/// tail bounded analytically, so the result is a certified upper bound.
pub fn holder_bound(s: f64, alpha_dom: f64, dim: usize) -> Result<f64> {
    if !(1.5 < s && s < 2.0) {
        return Err(Error::Parameter(format!("s must lie in (3/2, 2), got {s}")));
    }
    if alpha_dom <= 0.0 {
        return Err(Error::Parameter("alpha_dom must be positive".into()));
    }
    if !(dim == 2 || dim == 3) {
        return Err(Error::Parameter(format!("dim must be 2 or 3, got {dim}")));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    // prefix sums over |k|^2 = n of  n (1+4 pi^2 n)^(-s)  and  (1+4 pi^2 n)^(-s)
    let kcap: usize = if dim == 2 { 200_000 } else { 1_500 };
    let (g1, g2, tail) = if dim == 2 {
        let mut g1 = vec![0.0f64; kcap + 1];
        let mut g2 = vec![0.0f64; kcap + 1];
        for k in 1..=kcap {
            let ksq = (k * k) as f64;
            let w = (1.0 + two_pi * two_pi * ksq).powf(-s);
            // two lattice points (+k, -k) share each |k|
            g1[k] = g1[k - 1] + 2.0 * ksq * w;
            g2[k] = g2[k - 1] + 2.0 * w;
        }
        // integral tail bound for sum_{|k| > kcap} (2 pi k)^(-2s), both signs
        let tail = 2.0 * two_pi.powf(-2.0 * s) * (kcap as f64).powf(1.0 - 2.0 * s)
            / (2.0 * s - 1.0);
        (g1, g2, tail)
    } else {
        // 2D lattice: histogram by squared radius
        let ncap = kcap * kcap;
        let mut h1 = vec![0.0f64; ncap + 1];
        let mut h2 = vec![0.0f64; ncap + 1];
        for kx in -(kcap as i64)..=kcap as i64 {
            for ky in -(kcap as i64)..=kcap as i64 {
                let n = (kx * kx + ky * ky) as usize;
                if n == 0 || n > ncap {
                    continue;
                }
                let w = (1.0 + two_pi * two_pi * n as f64).powf(-s);
                h1[n] += n as f64 * w;
                h2[n] += w;
            }
        }
        let mut g1 = vec![0.0f64; ncap + 1];
        let mut g2 = vec![0.0f64; ncap + 1];
        for n in 1..=ncap {
            g1[n] = g1[n - 1] + h1[n];
            g2[n] = g2[n - 1] + h2[n];
        }
        // 2D integral tail: sum_{|k|>K} (2 pi |k|)^(-2s) <= 2 pi (2 pi)^(-2s) K^(2-2s)/(2s-2)
        let tail = 2.0 * std::f64::consts::PI * two_pi.powf(-2.0 * s)
            * (kcap as f64).powf(2.0 - 2.0 * s)
            / (2.0 * s - 2.0);
        (g1, g2, tail)
    };
    let nmax = g1.len() - 1;
    let total2 = g2[nmax] + tail;
    let mut sup: f64 = 0.0;
    let r_lo: f64 = 1e-5;
    let r_hi: f64 = 1e2;
    let steps = 600;
    for i in 0..=steps {
        let r = r_lo * (r_hi / r_lo).powf(i as f64 / steps as f64);
        // split the k-sum at |k| = 1/(pi r): below, min = 2 pi |k| r; above, min = 2
        let kstar = 1.0 / (std::f64::consts::PI * r);
        let nstar = if kstar * kstar >= nmax as f64 { nmax } else { (kstar * kstar) as usize };
        let below = (two_pi * r).powi(2) * g1[nstar];
        let above = 4.0 * (total2 - g2[nstar]);
        let val = ((below + above) / r).sqrt();
        sup = sup.max(val);
    }
    Ok(sup / alpha_dom)
}

/// Smooth periodic bump kernel of radius `kappa`, sampled and renormalized
/// on the lateral grid so constants mollify to themselves exactly.
/// Returns per-lateral-cell weights summing to one.
fn mollifier_weights(grid: &Grid, kappa: f64) -> Vec<f64> {
    let bump = |t: f64| -> f64 {
        if t.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - t * t)).exp()
        }
    };
    let n_lat = grid.n_lat();
    let mut w = vec![0.0; n_lat];
    let mut total = 0.0;
    for flat in 0..n_lat {
        let p = grid.lat_coord(flat);
        let mut d2 = 0.0;
        for axis in 0..grid.d_lat {
            // offset of this cell from the origin cell, periodic
            let mut dx = p[axis] - grid.x1d(0);
            if dx > 0.5 {
                dx -= 1.0;
            }
            d2 += dx * dx;
        }
        let v = bump(d2.sqrt() / kappa);
        w[flat] = v;
        total += v;
    }
    if total == 0.0 {
        // radius below grid resolution: identity kernel
        w[0] = 1.0;
        return w;
    }
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Periodic lateral convolution by quadrature with the renormalized bump.
pub fn mollify_lateral(grid: &Grid, field: &[f64], kappa: f64) -> Vec<f64> {
    assert_eq!(field.len(), grid.n_lat());
    let w = mollifier_weights(grid, kappa);
    let nx = grid.nx;
    let n_lat = grid.n_lat();
    let mut out = vec![0.0; n_lat];
    // gather nonzero kernel offsets once
    let offsets: Vec<(usize, f64)> =
        w.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)).collect();
    for flat in 0..n_lat {
        let mut acc = 0.0;
        for &(off, wv) in &offsets {
            let src = if grid.d_lat == 1 {
                (flat + n_lat - off) % n_lat
            } else {
                let (i0, i1) = (flat / nx, flat % nx);
                let (o0, o1) = (off / nx, off % nx);
                ((i0 + nx - o0) % nx) * nx + ((i1 + nx - o1) % nx)
            };
            acc += wv * field[src];
        }
        out[flat] = acc;
    }
    out
}

/// Smooth bounding envelopes around `1 + eta`:
/// `a = 1 + (eta + 2 C kappa^(1/2)) * zeta_kappa`, `b` with the minus sign.
/// Verifies the two-sided envelope estimate after quadrature.
pub fn bounding_functions(
    grid: &Grid,
    eta: &[f64],
    kappa: f64,
    c_alpha: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if kappa <= 0.0 {
        return Err(Error::Parameter("mollification width kappa must be positive".into()));
    }
    assert_eq!(eta.len(), grid.n_lat());
    let shift = 2.0 * c_alpha * kappa.sqrt();
    let up: Vec<f64> = eta.iter().map(|v| v + shift).collect();
    let dn: Vec<f64> = eta.iter().map(|v| v - shift).collect();
    let a: Vec<f64> = mollify_lateral(grid, &up, kappa).iter().map(|v| 1.0 + v).collect();
    let b: Vec<f64> = mollify_lateral(grid, &dn, kappa).iter().map(|v| 1.0 + v).collect();
    // envelope estimate: C k^(1/2) <= a - (1 + eta) <= 3 C k^(1/2), same below
    let (lo, hi) = (c_alpha * kappa.sqrt(), 3.0 * c_alpha * kappa.sqrt());
    let tol = 1e-12 * (1.0 + c_alpha);
    for i in 0..eta.len() {
        let da = a[i] - (1.0 + eta[i]);
        let db = (1.0 + eta[i]) - b[i];
        if da < lo - tol || da > hi + tol || db < lo - tol || db > hi + tol {
            return Err(Error::Consistency(format!(
                "bounding envelope violated at lateral cell {i}: a-gap {da:.3e}, b-gap {db:.3e}, \
                 admissible [{lo:.3e}, {hi:.3e}]; displacement rougher than the certified \
                 Holder class or grid under-resolved"
            )));
        }
    }
    Ok((a, b))
}

/// Transition profile: 1 below 1/4, `kappa` above 3/4, quintic smoothstep
/// between (two continuous derivatives).
fn phi_kappa(w: f64, kappa: f64) -> f64 {
    if w <= 0.25 {
        1.0
    } else if w >= 0.75 {
        kappa
    } else {
        let t = (w - 0.25) * 2.0;
        let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        1.0 - (1.0 - kappa) * s
    }
}

/// Extension cutoff `chi(x, z) = phi_kappa((z - a(x)) / kappa^(1/2))`
/// on the whole box.
pub fn cutoff_chi(grid: &Grid, a_bound: &[f64], kappa: f64) -> Result<Vec<f64>> {
    if kappa <= 0.0 {
        return Err(Error::Parameter("kappa must be positive".into()));
    }
    assert_eq!(a_bound.len(), grid.n_lat());
    let scale = 1.0 / kappa.sqrt();
    let mut chi = vec![0.0; grid.n_cells()];
    for flat in 0..grid.n_lat() {
        for j in 0..grid.nz {
            let w = (grid.z1d(j) - a_bound[flat]) * scale;
            chi[flat * grid.nz + j] = phi_kappa(w, kappa);
        }
    }
    Ok(chi)
}

/// Point-wise indicator of the exterior tubular neighborhood
/// `0 < z - (1 + eta_star) < delta^(1/2 - 1/beta)`.
#[inline]
pub fn tube_indicator(eta_star_at: f64, delta: f64, beta: f64, z: f64) -> bool {
    let gap = z - (1.0 + eta_star_at);
    gap > 0.0 && gap < tube_width(delta, beta)
}

/// Width of the exterior tube.
#[inline]
pub fn tube_width(delta: f64, beta: f64) -> f64 {
    delta.powf(0.5 - 1.0 / beta)
}

/// Point-wise indicator of the moving domain `0 <= z <= 1 + eta`.
#[inline]
pub fn domain_indicator(eta_at: f64, z: f64) -> bool {
    z >= 0.0 && z <= 1.0 + eta_at
}

/// Point-wise indicator of the interior band `l < z < 1 + eta_star - l`.
#[inline]
pub fn band_indicator(eta_star_at: f64, l: f64, z: f64) -> bool {
    z > l && z < 1.0 + eta_star_at - l
}

/// Certified lower bound for `inf (1 + eta)` from grid samples: the grid
/// minimum minus the Holder safety margin over one cover radius.
pub fn min_height(grid: &Grid, eta: &[f64], c_alpha: f64) -> f64 {
    assert_eq!(eta.len(), grid.n_lat());
    let margin = c_alpha * grid.lat_cover_radius().sqrt();
    let min = eta.iter().cloned().fold(f64::INFINITY, f64::min);
    1.0 + min - margin
}

/// Vertical integration bounds per lateral cell for a graph-shaped region.
#[derive(Debug, Clone)]
pub struct ColumnRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ColumnRegion {
    /// Clamp to the box and make degenerate columns empty.
    fn clamped(lo: Vec<f64>, hi: Vec<f64>, height: f64) -> Self {
        let lo: Vec<f64> = lo.iter().map(|&v| v.clamp(0.0, height)).collect();
        let hi: Vec<f64> =
            hi.iter().zip(&lo).map(|(&h, &l)| h.clamp(0.0, height).max(l)).collect();
        ColumnRegion { lo, hi }
    }

    pub fn measure(&self, lat_weight: f64) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).sum::<f64>() * lat_weight
    }
}

/// Long-lived geometric configuration: everything needed to rebuild the
/// per-displacement fields.
#[derive(Debug, Clone)]
pub struct GeometrySpec {
    pub grid: Grid,
    pub c_alpha: f64,
    pub delta: f64,
    pub nu0: f64,
    pub beta: f64,
    pub mu: f64,
    pub lambda_visc: f64,
    /// Band margin for the interior set `A^l`.
    pub band_l: f64,
}

impl GeometrySpec {
    /// Mollification width used for the viscosity extension.
    pub fn kappa(&self) -> f64 {
        self.delta.powf(self.nu0)
    }

    pub fn tube_width(&self) -> f64 {
        tube_width(self.delta, self.beta)
    }

    /// The exterior tube must sit inside the collar where the extended
    /// viscosity is still exactly `mu`.
    pub fn check_collar(&self) -> Result<()> {
        let collar = (self.c_alpha + 0.25) * self.kappa().sqrt();
        if self.tube_width() > collar {
            return Err(Error::Config(format!(
                "tube exits constant-viscosity collar: tube width {:.3e} exceeds \
                 (C_alpha + 1/4) delta^(nu0/2) = {:.3e}; decrease delta or nu0",
                self.tube_width(),
                collar
            )));
        }
        Ok(())
    }

    /// Build every displacement-dependent field for the given lateral
    /// samples of the (stopped) displacement.
    pub fn build(&self, eta_star: &[f64]) -> Result<GeometryFields> {
        let grid = &self.grid;
        assert_eq!(eta_star.len(), grid.n_lat());
        self.check_collar()?;
        let kappa = self.kappa();
        let (a_bound, b_bound) = bounding_functions(grid, eta_star, kappa, self.c_alpha)?;
        let chi = cutoff_chi(grid, &a_bound, kappa)?;
        let mu_ext: Vec<f64> = chi.iter().map(|v| v * self.mu).collect();
        let lambda_ext: Vec<f64> = chi.iter().map(|v| v * self.lambda_visc).collect();

        let n = grid.n_cells();
        let mut tube_mask = vec![false; n];
        let mut domain_mask = vec![false; n];
        let mut band_mask = vec![false; n];
        for flat in 0..grid.n_lat() {
            let eta = eta_star[flat];
            for j in 0..grid.nz {
                let z = grid.z1d(j);
                let c = flat * grid.nz + j;
                tube_mask[c] = tube_indicator(eta, self.delta, self.beta, z);
                domain_mask[c] = domain_indicator(eta, z);
                band_mask[c] = band_indicator(eta, self.band_l, z);
            }
        }

        let w = self.tube_width();
        let tube_cols = ColumnRegion::clamped(
            eta_star.iter().map(|e| 1.0 + e).collect(),
            eta_star.iter().map(|e| 1.0 + e + w).collect(),
            grid.height,
        );
        let domain_cols = ColumnRegion::clamped(
            vec![0.0; grid.n_lat()],
            eta_star.iter().map(|e| 1.0 + e).collect(),
            grid.height,
        );

        Ok(GeometryFields {
            eta_star: eta_star.to_vec(),
            a_bound,
            b_bound,
            chi,
            mu_ext,
            lambda_ext,
            tube_mask,
            domain_mask,
            band_mask,
            band_l: self.band_l,
            tube_cols,
            domain_cols,
        })
    }
}

/// Sampled bounding functions, extended viscosities, and indicator sets for
/// one displacement. Immutable once built; safe to share across paths.
#[derive(Debug, Clone)]
pub struct GeometryFields {
    /// Lateral samples of the displacement these fields were built from.
    pub eta_star: Vec<f64>,
    pub a_bound: Vec<f64>,
    pub b_bound: Vec<f64>,
    pub chi: Vec<f64>,
    pub mu_ext: Vec<f64>,
    pub lambda_ext: Vec<f64>,
    pub tube_mask: Vec<bool>,
    pub domain_mask: Vec<bool>,
    pub band_mask: Vec<bool>,
    pub band_l: f64,
    /// Exact vertical bounds of the tube per lateral cell.
    pub tube_cols: ColumnRegion,
    /// Exact vertical bounds of the moving domain per lateral cell.
    pub domain_cols: ColumnRegion,
}
