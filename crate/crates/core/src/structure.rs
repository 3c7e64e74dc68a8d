//! One splitting substep of the viscoelastic plate equation with penalty
//! forcing, and the stopped-displacement bookkeeping.

use nalgebra::DVector;

use crate::error::Result;
use crate::geometry::{min_height, tube_width};
use crate::noise::{eval_g, NoiseSpec};
use crate::spectral::{FluidBasis, FluidEval, Grid, StructureBasis};

/// Displacement and velocity coefficients plus the stopped copy.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureState {
    pub eta_hat: DVector<f64>,
    pub v_hat: DVector<f64>,
    /// Stopped displacement; equals `eta_hat` until the stopping time and
    /// stays frozen afterwards.
    pub eta_star_hat: DVector<f64>,
    pub stopped: bool,
    /// Stopping time, once it fires.
    pub tau: Option<f64>,
}

impl StructureState {
    pub fn new(eta_hat: DVector<f64>, v_hat: DVector<f64>) -> Self {
        let eta_star_hat = eta_hat.clone();
        StructureState { eta_hat, v_hat, eta_star_hat, stopped: false, tau: None }
    }
}

/// Diagonal spectra of the plate operators in the structure basis.
#[derive(Debug, Clone)]
pub struct StructureOperators {
    /// -Laplace spectrum.
    pub lap: Vec<f64>,
    /// Bilaplacian spectrum (the square of the Laplace spectrum).
    pub bilap: Vec<f64>,
}

impl StructureOperators {
    pub fn new(basis: &StructureBasis) -> Self {
        let lap = basis.lap_eig.clone();
        let bilap = lap.iter().map(|l| l * l).collect();
        StructureOperators { lap, bilap }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StructureParams {
    pub dt: f64,
    pub delta: f64,
    pub beta: f64,
    /// Coefficient on the `grad(dt eta) . grad(psi)` viscoelastic term.
    pub visc_elast: f64,
    pub alpha_dom: f64,
    /// Sobolev exponent of the stopping threshold.
    pub s: f64,
}

/// Context shared by structure substeps of one run.
#[derive(Debug, Clone)]
pub struct StructureCtx {
    pub basis: StructureBasis,
    pub ops: StructureOperators,
    /// Lateral collocation grid (shared with the fluid state grid).
    pub grid: Grid,
}

impl StructureCtx {
    pub fn new(basis: StructureBasis, grid: Grid) -> Self {
        let ops = StructureOperators::new(&basis);
        StructureCtx { basis, ops, grid }
    }
}

/// Tube coupling load: `int_{T} u_z xi_i` with the shifted tube columns and
/// the frozen fluid velocity, exact in z, lateral by quadrature.
pub fn tube_velocity_load(
    ctx: &StructureCtx,
    fl_basis: &FluidBasis,
    fl_eval: &FluidEval,
    frozen_u: &DVector<f64>,
    eta_star_shifted: &[f64],
    width: f64,
) -> DVector<f64> {
    let grid = &ctx.grid;
    let n_lat = grid.n_lat();
    let h = grid.height;
    let mmax = fl_basis.mmax;
    let zcomp = fl_basis.ncomp - 1;
    // lateral evaluation of the vertical velocity coefficients
    let mut u_cols = vec![0.0; n_lat * mmax];
    for (i, md) in fl_basis.modes.iter().enumerate() {
        if md.comp != zcomp || frozen_u[i] == 0.0 {
            continue;
        }
        let li = fl_eval.lat_index(fl_basis, md.lat);
        for x in 0..n_lat {
            u_cols[x * mmax + md.m - 1] += frozen_u[i] * fl_eval.lat_value(li, x);
        }
    }
    // integrate u_z over each column of the tube
    let mut column_integral = vec![0.0; n_lat];
    for x in 0..n_lat {
        let lo = (1.0 + eta_star_shifted[x]).clamp(0.0, h);
        let hi = (lo + width).clamp(0.0, h);
        if hi <= lo {
            continue;
        }
        let mut acc = 0.0;
        for m in 1..=mmax {
            let c = u_cols[x * mmax + m - 1];
            if c != 0.0 {
                let r = m as f64 * std::f64::consts::PI / h;
                acc += c * (2.0 / h).sqrt() * ((r * lo).cos() - (r * hi).cos()) / r;
            }
        }
        column_integral[x] = acc;
    }
    ctx.basis.project_grid(&column_integral, grid)
}

/// One linearly implicit Euler-Maruyama step of the plate equation:
/// stiffness, viscoelastic damping and the tube penalty implicit, the noise
/// explicit, and the displacement updated with the fresh velocity so
/// `v = dt(eta)` holds exactly in the discrete sense.
#[allow(clippy::too_many_arguments)]
pub fn structure_substep(
    ctx: &StructureCtx,
    state: &StructureState,
    frozen_u: &DVector<f64>,
    fl_basis: &FluidBasis,
    fl_eval: &FluidEval,
    eta_star_shifted: &[f64],
    p: &StructureParams,
    dw2: Option<&[f64]>,
    noise: &NoiseSpec,
) -> Result<StructureState> {
    let n = ctx.basis.n_modes;
    let dt = p.dt;
    let width = tube_width(p.delta, p.beta);

    // penalty forcing from the frozen fluid velocity over the shifted tube
    let tube_load =
        tube_velocity_load(ctx, fl_basis, fl_eval, frozen_u, eta_star_shifted, width);

    // explicit noise at the old state
    let mut noise_proj = DVector::zeros(n);
    if let Some(dw) = dw2 {
        let eta_lat = ctx.basis.eval_grid(&state.eta_hat, &ctx.grid);
        let v_lat = ctx.basis.eval_grid(&state.v_hat, &ctx.grid);
        let mut g_field = vec![0.0; ctx.grid.n_lat()];
        for (k, &dwk) in dw.iter().enumerate().take(noise.k_modes) {
            for (x, g) in g_field.iter_mut().enumerate() {
                let w = ctx.grid.lat_coord(x);
                *g += eval_g(noise, k + 1, eta_lat[x], v_lat[x], w) * dwk;
            }
        }
        noise_proj = ctx.basis.project_grid(&g_field, &ctx.grid);
    }

    let mut v_new = DVector::zeros(n);
    let mut eta_new = DVector::zeros(n);
    for i in 0..n {
        let stiff = ctx.ops.lap[i] + ctx.ops.bilap[i];
        // v and the test functions are z-independent, so the tube mass of v
        // reduces to the exact width times the interface mass
        let lhs = 1.0
            + dt * p.visc_elast * ctx.ops.lap[i]
            + dt * dt * stiff
            + dt / p.delta * width;
        let rhs = state.v_hat[i] - dt * stiff * state.eta_hat[i]
            + dt / p.delta * tube_load[i]
            + noise_proj[i];
        v_new[i] = rhs / lhs;
        eta_new[i] = state.eta_hat[i] + dt * v_new[i];
    }
    Ok(StructureState {
        eta_hat: eta_new,
        v_hat: v_new,
        eta_star_hat: state.eta_star_hat.clone(),
        stopped: state.stopped,
        tau: state.tau,
    })
}

/// Check the stopping thresholds on the fresh displacement and update the
/// stopped copy: before the stopping time the copy tracks `eta`; at the
/// first threshold crossing it freezes at the last admissible value, and
/// `eta` itself keeps evolving.
pub fn update_stopping(
    ctx: &StructureCtx,
    state: &mut StructureState,
    p: &StructureParams,
    c_alpha: f64,
    t_next: f64,
) {
    if state.stopped {
        return;
    }
    let eta_lat = ctx.basis.eval_grid(&state.eta_hat, &ctx.grid);
    let gap = min_height(&ctx.grid, &eta_lat, c_alpha);
    let norm = ctx.basis.hs_norm(&state.eta_hat, p.s);
    if gap <= p.alpha_dom || norm >= 1.0 / p.alpha_dom {
        state.stopped = true;
        state.tau = Some(t_next);
        // eta_star_hat keeps its last admissible value
    } else {
        state.eta_star_hat = state.eta_hat.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::FluidBasis;
    use approx::assert_relative_eq;

    fn setup() -> (StructureCtx, FluidBasis, FluidEval) {
        let grid = Grid::new(1, 32, 48, 4.0).unwrap();
        let sbasis = StructureBasis::new(1, 8).unwrap();
        let fbasis = FluidBasis::new(&grid, 2, 4).unwrap();
        let feval = FluidEval::new(&fbasis, &grid);
        (StructureCtx::new(sbasis, grid), fbasis, feval)
    }

    fn params() -> StructureParams {
        StructureParams {
            dt: 1e-3,
            delta: 1e-3,
            beta: 5.0,
            visc_elast: 1.0,
            alpha_dom: 0.5,
            s: 1.75,
        }
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let (ctx, fbasis, feval) = setup();
        let n = ctx.basis.n_modes;
        let state = StructureState::new(DVector::zeros(n), DVector::zeros(n));
        let u = DVector::zeros(fbasis.n_modes());
        let eta_star = vec![0.0; ctx.grid.n_lat()];
        let noise = NoiseSpec::default_family(4, 1.0, 2);
        let mut s = state;
        for _ in 0..20 {
            s = structure_substep(&ctx, &s, &u, &fbasis, &feval, &eta_star, &params(), None, &noise)
                .unwrap();
        }
        assert!(s.eta_hat.norm() == 0.0 && s.v_hat.norm() == 0.0);
    }

    #[test]
    fn single_mode_matches_two_by_two_oracle() {
        let (ctx, fbasis, feval) = setup();
        let n = ctx.basis.n_modes;
        let mode = 3usize;
        let mut eta = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        eta[mode] = 0.3;
        v[mode] = -0.1;
        let state = StructureState::new(eta, v);
        // penalty off via enormous delta (1/delta -> 0 would change width;
        // instead compare against the oracle with the same penalty scalar)
        let p = params();
        let u = DVector::zeros(fbasis.n_modes());
        let eta_star = vec![0.0; ctx.grid.n_lat()];
        let noise = NoiseSpec::default_family(4, 1.0, 2);
        let out =
            structure_substep(&ctx, &state, &u, &fbasis, &feval, &eta_star, &p, None, &noise)
                .unwrap();
        // independent 2x2 linearly-implicit oracle:
        // solve [v'; eta'] from v' = v - dt K (eta + dt v') - dt c L v' - (dt/delta) w v'
        let l = ctx.ops.lap[mode];
        let k = l + l * l;
        let w = tube_width(p.delta, p.beta);
        let denom = 1.0 + p.dt * p.visc_elast * l + p.dt * p.dt * k + p.dt / p.delta * w;
        let v_exp = (-0.1 - p.dt * k * 0.3) / denom;
        let eta_exp = 0.3 + p.dt * v_exp;
        assert_relative_eq!(out.v_hat[mode], v_exp, max_relative = 1e-13);
        assert_relative_eq!(out.eta_hat[mode], eta_exp, max_relative = 1e-13);
        for i in 0..n {
            if i != mode {
                assert_eq!(out.v_hat[i], 0.0);
            }
        }
    }

    #[test]
    fn discrete_energy_decays_without_forcing() {
        let (ctx, fbasis, feval) = setup();
        let n = ctx.basis.n_modes;
        let mut eta = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        for i in 0..n {
            eta[i] = 0.1 * ((i + 1) as f64).recip();
            v[i] = 0.05 * ((i as f64) - 2.0);
        }
        // disable the penalty by delta -> infinity surrogate: huge delta makes
        // dt/delta negligible but also width > collar; instead emulate "penalty
        // off" with zero fluid and accounting for its dissipation, which only
        // strengthens the decay.
        let mut state = StructureState::new(eta, v);
        let p = params();
        let u = DVector::zeros(fbasis.n_modes());
        let eta_star = vec![0.0; ctx.grid.n_lat()];
        let noise = NoiseSpec::default_family(4, 1.0, 2);
        let energy = |s: &StructureState| -> f64 {
            let mut e = 0.0;
            for i in 0..n {
                e += 0.5 * s.v_hat[i] * s.v_hat[i]
                    + 0.5 * (ctx.ops.lap[i] + ctx.ops.bilap[i]) * s.eta_hat[i] * s.eta_hat[i];
            }
            e
        };
        let mut prev = energy(&state);
        let mut dissip = 0.0;
        for _ in 0..50 {
            state = structure_substep(
                &ctx, &state, &u, &fbasis, &feval, &eta_star, &p, None, &noise,
            )
            .unwrap();
            let e = energy(&state);
            for i in 0..n {
                dissip += p.dt * p.visc_elast * ctx.ops.lap[i] * state.v_hat[i] * state.v_hat[i];
            }
            assert!(
                e <= prev * (1.0 + 1e-10),
                "energy must not increase: {prev} -> {e}"
            );
            prev = e;
        }
        assert!(dissip > 0.0);
    }

    #[test]
    fn tube_load_matches_fine_quadrature() {
        let (ctx, fbasis, feval) = setup();
        let mut u = DVector::zeros(fbasis.n_modes());
        for (i, v) in u.iter_mut().enumerate() {
            *v = 0.1 * (((i * 13 + 5) % 11) as f64 / 11.0 - 0.5);
        }
        let eta_star: Vec<f64> = (0..ctx.grid.n_lat())
            .map(|x| 0.1 * (2.0 * std::f64::consts::PI * ctx.grid.x1d(x)).sin())
            .collect();
        let width = tube_width(1e-3, 5.0);
        let load = tube_velocity_load(&ctx, &fbasis, &feval, &u, &eta_star, width);
        // independent oracle: Simpson quadrature in z per column
        let zcomp = fbasis.ncomp - 1;
        let nq = 201;
        let mut oracle = DVector::zeros(ctx.basis.n_modes);
        for x in 0..ctx.grid.n_lat() {
            let lo = 1.0 + eta_star[x];
            let hi = lo + width;
            let mut col = 0.0;
            for q in 0..nq {
                let t = q as f64 / (nq - 1) as f64;
                let z = lo + t * (hi - lo);
                let mut uz = 0.0;
                for (i, md) in fbasis.modes.iter().enumerate() {
                    if md.comp != zcomp {
                        continue;
                    }
                    let li = feval.lat_index(&fbasis, md.lat);
                    uz += u[i]
                        * feval.lat_value(li, x)
                        * crate::spectral::trig::vert_eval(
                            crate::spectral::trig::Vert::Sin(md.m),
                            z,
                            ctx.grid.height,
                        );
                }
                let w = if q == 0 || q == nq - 1 {
                    1.0
                } else if q % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                col += w * uz;
            }
            col *= (hi - lo) / (3.0 * (nq - 1) as f64);
            for i in 0..ctx.basis.n_modes {
                oracle[i] += col
                    * ctx.basis.eval_mode(i, ctx.grid.lat_coord(x))
                    * ctx.grid.lat_weight();
            }
        }
        for i in 0..ctx.basis.n_modes {
            assert_relative_eq!(load[i], oracle[i], epsilon = 1e-9, max_relative = 1e-8);
        }
    }

    #[test]
    fn penalty_pulls_structure_toward_fluid() {
        let (ctx, fbasis, feval) = setup();
        let n = ctx.basis.n_modes;
        let state = StructureState::new(DVector::zeros(n), DVector::zeros(n));
        // u = e_z-ish: one laterally constant vertical mode, positive in the tube
        let mut u = DVector::zeros(fbasis.n_modes());
        let zcomp = fbasis.ncomp - 1;
        for (i, md) in fbasis.modes.iter().enumerate() {
            if md.comp == zcomp && md.lat == [0, 0] && md.m == 1 {
                u[i] = 1.0;
            }
        }
        let eta_star = vec![0.0; ctx.grid.n_lat()];
        let noise = NoiseSpec::default_family(4, 1.0, 2);
        let out =
            structure_substep(&ctx, &state, &u, &fbasis, &feval, &eta_star, &params(), None, &noise)
                .unwrap();
        // sin(pi z / H) is positive in the tube around z ~ 1, so the plate
        // must be dragged upward
        assert!(out.v_hat[0] > 0.0, "mean velocity must become positive");
    }

    #[test]
    fn stopping_semantics_on_scripted_trajectory() {
        let (ctx, _, _) = setup();
        let n = ctx.basis.n_modes;
        let p = params();
        let c_alpha = crate::geometry::holder_bound(p.s, p.alpha_dom, 2).unwrap();
        let mut state = StructureState::new(DVector::zeros(n), DVector::zeros(n));
        // drive one mode linearly until the H^s norm crosses 1/alpha = 2
        let mode = 4usize;
        let growth = 0.02;
        let mut crossed_at = None;
        for j in 0..600 {
            state.eta_hat[mode] += growth;
            let t_next = (j + 1) as f64 * p.dt;
            update_stopping(&ctx, &mut state, &p, c_alpha, t_next);
            let norm = ctx.basis.hs_norm(&state.eta_hat, p.s);
            if crossed_at.is_none() && norm >= 1.0 / p.alpha_dom {
                crossed_at = Some(t_next);
            }
            if let Some(tc) = crossed_at {
                assert!(state.stopped);
                assert_eq!(state.tau, Some(tc));
                // frozen strictly below the threshold
                assert!(
                    ctx.basis.hs_norm(&state.eta_star_hat, p.s) < 1.0 / p.alpha_dom,
                    "stopped copy must stay admissible"
                );
            } else {
                assert!(!state.stopped);
                assert_eq!(state.eta_star_hat, state.eta_hat, "tracks eta before tau");
            }
        }
        assert!(crossed_at.is_some(), "the scripted trajectory must cross");
        // eta keeps moving after tau while eta_star stays frozen
        let frozen = state.eta_star_hat.clone();
        state.eta_hat[mode] += growth;
        update_stopping(&ctx, &mut state, &p, c_alpha, 1.0);
        assert_eq!(state.eta_star_hat, frozen);
    }

    #[test]
    fn tame_trajectory_never_stops() {
        let (ctx, _, _) = setup();
        let n = ctx.basis.n_modes;
        let p = params();
        let c_alpha = crate::geometry::holder_bound(p.s, p.alpha_dom, 2).unwrap();
        let mut state = StructureState::new(DVector::zeros(n), DVector::zeros(n));
        for j in 0..100 {
            state.eta_hat[1] = 0.05 * (j as f64 * 0.1).sin();
            update_stopping(&ctx, &mut state, &p, c_alpha, (j + 1) as f64 * p.dt);
        }
        assert!(!state.stopped);
        assert_eq!(state.tau, None);
        assert_eq!(state.eta_star_hat, state.eta_hat);
    }
}
