//! Density substep (continuity equation with artificial viscosity) and the
//! Galerkin momentum substep with mass matrix, extended viscosity, penalty
//! coupling, and projected noise.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{ColumnRegion, GeometryFields};
use crate::noise::{projected_fluid_noise, NoiseSpec};
use crate::spectral::{DensityBasis, FluidBasis, FluidEval, Grid, GridResample};

/// Density samples plus velocity coefficients on the maximal box.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    /// Density on the collocation grid (mass / volume).
    pub rho: Vec<f64>,
    /// Velocity coefficients in the fluid basis.
    pub u_hat: DVector<f64>,
    /// Dual coordinates `M[rho] u`, kept for bookkeeping.
    pub momentum_hat: DVector<f64>,
}

/// Dense Galerkin Gram matrix weighted by the density, with cached
/// factorization and (on demand) its symmetric square root.
#[derive(Debug)]
pub struct MassMatrix {
    pub matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    sqrt_cache: OnceLock<DMatrix<f64>>,
}

impl Clone for MassMatrix {
    fn clone(&self) -> Self {
        MassMatrix {
            matrix: self.matrix.clone(),
            chol: self.chol.clone(),
            sqrt_cache: match self.sqrt_cache.get() {
                Some(s) => {
                    let cell = OnceLock::new();
                    let _ = cell.set(s.clone());
                    cell
                }
                None => OnceLock::new(),
            },
        }
    }
}

/// Symmetric square root through the eigendecomposition, eigenvalues
/// clamped at zero.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        col *= s;
    }
    let mut out = DMatrix::zeros(n, n);
    scaled.mul_to(&eig.eigenvectors.transpose(), &mut out);
    out
}

impl MassMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(matrix.clone()).ok_or_else(|| {
            Error::Vacuum(
                "mass matrix is not positive definite; density lost positivity or the \
                 quadrature is under-resolved"
                    .into(),
            )
        })?;
        Ok(MassMatrix { matrix, chol, sqrt_cache: OnceLock::new() })
    }

    /// Quadrature assembly of `int rho psi_i . psi_j`.
    pub fn assemble(basis: &FluidBasis, grid: &Grid, rho: &[f64]) -> Result<Self> {
        let min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::Vacuum(format!("mass matrix needs min rho > 0, got {min}")));
        }
        let tables = basis.weight_tables(grid, rho);
        Self::from_matrix(basis.assemble_gram(&tables))
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    /// The symmetric square root, computed once per matrix.
    pub fn sqrt(&self) -> &DMatrix<f64> {
        self.sqrt_cache.get_or_init(|| symmetric_sqrt(&self.matrix))
    }
}

/// Long-lived discretization context for the fluid substeps.
#[derive(Debug, Clone)]
pub struct FluidSolverCtx {
    /// State / geometry grid.
    pub grid: Grid,
    /// 3/2-oversampled quadrature grid for the nonlinear terms.
    pub os_grid: Grid,
    pub basis: FluidBasis,
    pub dbasis: DensityBasis,
    pub eval_state: FluidEval,
    pub eval_os: FluidEval,
    resample: GridResample,
    /// Laplace eigenvalue per density coefficient.
    lap_eig_density: Vec<f64>,
}

impl FluidSolverCtx {
    pub fn new(grid: Grid, basis: FluidBasis) -> Result<Self> {
        let os_grid = Grid::new(grid.d_lat, grid.nx * 3 / 2, grid.nz * 3 / 2, grid.height)?;
        let dbasis = DensityBasis::new(&grid);
        let eval_state = FluidEval::new(&basis, &grid);
        let eval_os = FluidEval::new(&basis, &os_grid);
        let resample = GridResample::new(&dbasis, &os_grid);
        let nz = grid.nz;
        let lap_eig_density = (0..grid.n_lat() * nz)
            .map(|i| dbasis.laplace_eig(i / nz, i % nz))
            .collect();
        Ok(FluidSolverCtx { grid, os_grid, basis, dbasis, eval_state, eval_os, resample, lap_eig_density })
    }

    /// Evaluate density coefficients on the oversampled grid.
    pub fn rho_on_os_grid(&self, rho: &[f64]) -> Vec<f64> {
        self.resample.apply(&self.dbasis.to_coeffs(rho))
    }
}

/// Parameters the fluid substeps need.
#[derive(Debug, Clone, Copy)]
pub struct FluidParams {
    pub dt: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub a_pressure: f64,
    pub gamma: f64,
    pub beta: f64,
    pub micro_steps: usize,
}

/// Relative slack allowed on the per-substep comparison bounds.
const COMPARISON_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ContinuityOutcome {
    pub rho: Vec<f64>,
    /// Grid sup of |div u| used for the comparison envelope.
    pub div_u_inf: f64,
}

/// Advance the density by `micro_steps` sub-iterations of explicit
/// conservative advection plus exactly integrated vertical-Neumann
/// diffusion, holding the velocity frozen. Total mass is conserved exactly
/// in coefficient space: neither operator touches the mean coefficient.
pub fn continuity_substep(
    ctx: &FluidSolverCtx,
    rho: &[f64],
    u_hat: &DVector<f64>,
    epsilon: f64,
    dt: f64,
    micro_steps: usize,
) -> Result<ContinuityOutcome> {
    if micro_steps == 0 {
        return Err(Error::Parameter("micro_steps must be at least 1".into()));
    }
    let grid = &ctx.grid;
    let u_fields = ctx.eval_state.all_components(&ctx.basis, u_hat);
    let div_u = ctx.eval_state.divergence(&ctx.basis, u_hat);
    let div_u_inf = div_u.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let dtm = dt / micro_steps as f64;
    let ncomp = ctx.basis.ncomp;
    let n = grid.n_cells();
    let mut rho_grid = rho.to_vec();
    for _ in 0..micro_steps {
        let min_before = rho_grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_before = rho_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // conservative advection: -div(rho u) in coefficient space
        let mut adv = vec![0.0; n];
        for axis in 0..grid.d_lat {
            let prod: Vec<f64> =
                rho_grid.iter().zip(&u_fields[axis]).map(|(r, u)| r * u).collect();
            let coeffs = ctx.dbasis.to_coeffs(&prod);
            let d = ctx.dbasis.lat_deriv_coeffs(&coeffs, axis);
            for (a, v) in adv.iter_mut().zip(d) {
                *a -= v;
            }
        }
        {
            let prod: Vec<f64> =
                rho_grid.iter().zip(&u_fields[ncomp - 1]).map(|(r, u)| r * u).collect();
            let sin_coeffs = ctx.dbasis.to_sin_coeffs(&prod);
            let d = ctx.dbasis.sin_dz_to_cos_coeffs(&sin_coeffs);
            for (a, v) in adv.iter_mut().zip(d) {
                *a -= v;
            }
        }
        let mut coeffs = ctx.dbasis.to_coeffs(&rho_grid);
        for i in 0..n {
            // diffusion integrated exactly on the coefficient
            let decay = (-epsilon * ctx.lap_eig_density[i] * dtm).exp();
            coeffs[i] = decay * (coeffs[i] + dtm * adv[i]);
        }
        rho_grid = ctx.dbasis.to_grid(&coeffs);
        let min_after = rho_grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_after = rho_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lower = min_before * (-dtm * div_u_inf).exp() * (1.0 - COMPARISON_SLACK);
        let upper = max_before * (dtm * div_u_inf).exp() * (1.0 + COMPARISON_SLACK);
        if min_after < lower || max_after > upper {
            return Err(Error::Stability(format!(
                "comparison bound violated in the continuity substep: density range \
                 [{min_after:.6e}, {max_after:.6e}] vs envelope [{lower:.6e}, {upper:.6e}]; \
                 reduce dt or increase micro_steps"
            )));
        }
    }
    Ok(ContinuityOutcome { rho: rho_grid, div_u_inf })
}

/// Analytic vertical integrals over a column interval.
#[inline]
fn int_cos(q: usize, lo: f64, hi: f64, h: f64) -> f64 {
    if q == 0 {
        hi - lo
    } else {
        let r = q as f64 * std::f64::consts::PI / h;
        ((r * hi).sin() - (r * lo).sin()) / r
    }
}

/// `int_lo^hi S_a S_b dz` with the normalized sine family.
#[inline]
fn int_ss(a: usize, b: usize, lo: f64, hi: f64, h: f64) -> f64 {
    (int_cos(a.abs_diff(b), lo, hi, h) - int_cos(a + b, lo, hi, h)) / h
}

/// `int_lo^hi S_a dz`.
#[inline]
fn int_s(a: usize, lo: f64, hi: f64, h: f64) -> f64 {
    let r = a as f64 * std::f64::consts::PI / h;
    (2.0 / h).sqrt() * ((r * lo).cos() - (r * hi).cos()) / r
}

/// Gram matrix of the fluid basis over a graph region, exact in z and by
/// lateral quadrature: `int_region psi_i . psi_j`.
pub fn region_gram(eval: &FluidEval, basis: &FluidBasis, region: &ColumnRegion) -> DMatrix<f64> {
    let n = basis.n_modes();
    let n_lat = eval.grid.n_lat();
    let h = eval.grid.height;
    let mmax = basis.mmax;
    let lat_w = eval.grid.lat_weight();
    // per-column vertical integrals
    let mut iss = vec![0.0; n_lat * mmax * mmax];
    for x in 0..n_lat {
        let (lo, hi) = (region.lo[x], region.hi[x]);
        if hi <= lo {
            continue;
        }
        for a in 1..=mmax {
            for b in a..=mmax {
                let v = int_ss(a, b, lo, hi, h);
                iss[(x * mmax + a - 1) * mmax + b - 1] = v;
                iss[(x * mmax + b - 1) * mmax + a - 1] = v;
            }
        }
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let mi = basis.modes[i];
        let li = eval.lat_index(basis, mi.lat);
        for j in i..n {
            let mj = basis.modes[j];
            if mi.comp != mj.comp {
                continue;
            }
            let lj = eval.lat_index(basis, mj.lat);
            let mut acc = 0.0;
            for x in 0..n_lat {
                let izz = iss[(x * mmax + mi.m - 1) * mmax + mj.m - 1];
                if izz != 0.0 {
                    acc += eval.lat_value(li, x) * eval.lat_value(lj, x) * izz;
                }
            }
            let v = acc * lat_w;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Load vector `int_region (v e_z) . psi_i` for a laterally sampled `v`.
pub fn region_vertical_load(
    eval: &FluidEval,
    basis: &FluidBasis,
    region: &ColumnRegion,
    v_lat: &[f64],
) -> DVector<f64> {
    let n_lat = eval.grid.n_lat();
    assert_eq!(v_lat.len(), n_lat);
    let h = eval.grid.height;
    let lat_w = eval.grid.lat_weight();
    let zcomp = basis.ncomp - 1;
    let mut out = DVector::zeros(basis.n_modes());
    // per-column integrals of each sine
    let mut is = vec![0.0; n_lat * basis.mmax];
    for x in 0..n_lat {
        let (lo, hi) = (region.lo[x], region.hi[x]);
        if hi <= lo {
            continue;
        }
        for m in 1..=basis.mmax {
            is[x * basis.mmax + m - 1] = int_s(m, lo, hi, h);
        }
    }
    for (i, md) in basis.modes.iter().enumerate() {
        if md.comp != zcomp {
            continue;
        }
        let li = eval.lat_index(basis, md.lat);
        let mut acc = 0.0;
        for x in 0..n_lat {
            acc += v_lat[x] * eval.lat_value(li, x) * is[x * basis.mmax + md.m - 1];
        }
        out[i] = acc * lat_w;
    }
    out
}

/// `int_region |u - v e_z|^2`, exact in z.
pub fn region_velocity_misfit(
    eval: &FluidEval,
    basis: &FluidBasis,
    region: &ColumnRegion,
    u_hat: &DVector<f64>,
    v_lat: &[f64],
) -> f64 {
    let n_lat = eval.grid.n_lat();
    let h = eval.grid.height;
    let mmax = basis.mmax;
    let lat_w = eval.grid.lat_weight();
    // lateral evaluation of the coefficients: U[comp][x][m]
    let mut u_cols = vec![0.0; basis.ncomp * n_lat * mmax];
    for (i, md) in basis.modes.iter().enumerate() {
        let c = u_hat[i];
        if c == 0.0 {
            continue;
        }
        let li = eval.lat_index(basis, md.lat);
        for x in 0..n_lat {
            u_cols[(md.comp * n_lat + x) * mmax + md.m - 1] += c * eval.lat_value(li, x);
        }
    }
    let zcomp = basis.ncomp - 1;
    let mut total = 0.0;
    for x in 0..n_lat {
        let (lo, hi) = (region.lo[x], region.hi[x]);
        if hi <= lo {
            continue;
        }
        let v = v_lat[x];
        let mut acc = v * v * (hi - lo);
        for comp in 0..basis.ncomp {
            let row = &u_cols[(comp * n_lat + x) * mmax..(comp * n_lat + x + 1) * mmax];
            for a in 1..=mmax {
                if row[a - 1] == 0.0 && comp != zcomp {
                    continue;
                }
                for b in 1..=mmax {
                    let w = row[a - 1] * row[b - 1];
                    if w != 0.0 {
                        acc += w * int_ss(a, b, lo, hi, h);
                    }
                }
            }
        }
        // cross term -2 v u_z
        let row = &u_cols[(zcomp * n_lat + x) * mmax..(zcomp * n_lat + x + 1) * mmax];
        for (a, &c) in row.iter().enumerate() {
            if c != 0.0 {
                acc -= 2.0 * v * c * int_s(a + 1, lo, hi, h);
            }
        }
        total += acc;
    }
    total * lat_w
}

/// Inputs of one momentum substep.
pub struct MomentumInput<'a> {
    pub rho_old: &'a [f64],
    pub rho_new: &'a [f64],
    pub u_old: &'a DVector<f64>,
    /// Structure velocity on the lateral grid (fresh from the structure
    /// substep of the same interval).
    pub v_lat: &'a [f64],
    pub geom: &'a GeometryFields,
    pub mass_old: &'a MassMatrix,
    /// Wiener increments for this step; `None` switches the noise off.
    pub dw1: Option<&'a [f64]>,
    pub noise: &'a NoiseSpec,
}

#[derive(Debug, Clone)]
pub struct MomentumOutcome {
    pub u_new: DVector<f64>,
    pub mass_new: MassMatrix,
}

/// One linearly implicit Euler-Maruyama step of the Galerkin momentum
/// equation in dual coordinates: advection, pressure and the parabolic
/// regularization explicit at the old state; extended viscosity and the
/// 1/delta tube penalty implicit; noise explicit and predictable.
pub fn momentum_substep(
    ctx: &FluidSolverCtx,
    input: &MomentumInput,
    p: &FluidParams,
) -> Result<MomentumOutcome> {
    let basis = &ctx.basis;
    let grid = &ctx.grid;

    let ncomp = basis.ncomp;

    // implicit side
    let mass_new = MassMatrix::assemble(basis, grid, input.rho_new)?;
    let mu_tables = basis.weight_tables(grid, &input.geom.mu_ext);
    let v_mu = basis.assemble_grad(&mu_tables);
    let lam_tables = basis.weight_tables(grid, &input.geom.lambda_ext);
    let v_lam = basis.assemble_divdiv(&lam_tables);
    let p_tube = region_gram(&ctx.eval_state, basis, &input.geom.tube_cols);

    let mut a = mass_new.matrix.clone();
    a += (&v_mu + &v_lam) * p.dt;
    a += &p_tube * (p.dt / p.delta);

    // explicit side on the oversampled grid
    let rho_os = ctx.rho_on_os_grid(input.rho_old);
    let u_os = ctx.eval_os.all_components(basis, input.u_old);
    let n_os = ctx.os_grid.n_cells();
    let mut rhs = input.mass_old.apply(input.u_old);

    // pressure work: int (a rho^gamma + delta rho^beta) div psi_i
    let mut pressure = vec![0.0; n_os];
    for (dst, &r) in pressure.iter_mut().zip(&rho_os) {
        let rpos = r.max(0.0);
        *dst = p.a_pressure * rpos.powf(p.gamma) + p.delta * rpos.powf(p.beta);
    }
    let pres_tab = ctx.eval_os.scalar_tables(&pressure);
    // momentum components rho u_c for the advection and epsilon terms
    let mut mom_tabs = Vec::with_capacity(ncomp);
    for comp in 0..ncomp {
        let f: Vec<f64> = rho_os.iter().zip(&u_os[comp]).map(|(r, u)| r * u).collect();
        mom_tabs.push(ctx.eval_os.scalar_tables(&f));
    }
    // advection fluxes rho u_c u_b (symmetric in c, b)
    let mut flux_tabs: Vec<Option<crate::spectral::ScalarTables>> = Vec::new();
    for c in 0..ncomp {
        for b in 0..ncomp {
            if b < c {
                flux_tabs.push(None);
                continue;
            }
            let f: Vec<f64> = (0..n_os).map(|i| rho_os[i] * u_os[c][i] * u_os[b][i]).collect();
            flux_tabs.push(Some(ctx.eval_os.scalar_tables(&f)));
        }
    }
    let flux = |c: usize, b: usize| -> &crate::spectral::ScalarTables {
        let (lo, hi) = if b < c { (b, c) } else { (c, b) };
        flux_tabs[lo * ncomp + hi].as_ref().unwrap()
    };

    let rate = std::f64::consts::PI / grid.height;
    for (i, md) in basis.modes.iter().enumerate() {
        let li = ctx.eval_os.lat_index(basis, md.lat);
        let mut explicit = 0.0;
        // advection: sum_b < rho u_comp u_b, d_b phi_i >
        for axis in 0..grid.d_lat {
            if let Some((img, w)) = ctx.eval_os.lat_deriv_image(li, axis) {
                explicit += w * flux(md.comp, axis).sin(img, md.m);
            }
        }
        explicit += md.m as f64 * rate * flux(md.comp, ncomp - 1).cos(li, md.m);
        // pressure against div psi_i
        if md.comp + 1 == ncomp {
            explicit += md.m as f64 * rate * pres_tab.cos(li, md.m);
        } else if let Some((img, w)) = ctx.eval_os.lat_deriv_image(li, md.comp) {
            explicit += w * pres_tab.sin(img, md.m);
        }
        // epsilon-regularization: eps < rho u, Lap psi_i > = -eps lam_i < rho u_comp, phi_i >
        explicit -= p.epsilon * basis.lap_eig[i] * mom_tabs[md.comp].sin(li, md.m);
        rhs[i] += p.dt * explicit;
    }

    // penalty drag toward the structure velocity
    let b_v = region_vertical_load(&ctx.eval_state, basis, &input.geom.tube_cols, input.v_lat);
    rhs += &b_v * (p.dt / p.delta);

    // projected noise, masked by the moving domain
    if let Some(dw) = input.dw1 {
        let cols = projected_fluid_noise(
            grid,
            &ctx.eval_state,
            basis,
            input.rho_old,
            input.u_old,
            input.noise,
            input.mass_old.sqrt(),
        )?;
        let b_dom = region_gram(&ctx.eval_state, basis, &input.geom.domain_cols);
        for (k, col) in cols.iter().enumerate() {
            rhs += &b_dom * col * dw[k];
        }
    }

    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::Vacuum("implicit momentum system lost positive definiteness".into())
    })?;
    let u_new = chol.solve(&rhs);
    if u_new.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stability(
            "momentum update produced non-finite coefficients; nonlinear terms unstable at \
             this dt"
                .into(),
        ));
    }
    Ok(MomentumOutcome { u_new, mass_new })
}
