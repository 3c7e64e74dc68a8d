//! Truncated cylindrical Wiener processes and the growth-bounded noise
//! coefficient families, including the Galerkin-projected fluid noise.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{FluidBasis, FluidEval, Grid};

/// Per-mode shape of the fluid noise coefficient
/// `f_k(rho, q, x) = c_k (lambda_rho rho + lambda_q . q) m_k(x) dir`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FluidShape {
    pub lambda_rho: f64,
    pub lambda_q: Vec<f64>,
    /// Unit output direction.
    pub dir: Vec<f64>,
    /// Spatial envelope `cos(2 pi kx x + phase) cos(mz pi z / H)`.
    pub env_kx: usize,
    pub env_mz: usize,
    pub phase: f64,
}

/// Per-mode shape of the structure noise coefficient
/// `g_k(eta, v, w) = c_k (a eta + b v) cos(2 pi k w + phase)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StructureShape {
    pub a_eta: f64,
    pub b_v: f64,
    pub env_k: usize,
    pub phase: f64,
}

/// Truncated noise description: mode count, amplitude sequence, and the
/// bilinear-in-state shape parameters of each mode.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NoiseSpec {
    /// Truncation level K.
    pub k_modes: usize,
    /// Amplitude prefactor: `c_k = c0 k^(-decay)`.
    pub c0: f64,
    pub decay: f64,
    pub fluid_shapes: Vec<FluidShape>,
    pub structure_shapes: Vec<StructureShape>,
}

impl NoiseSpec {
    /// Default family for `ncomp` velocity components: alternating output
    /// directions, rotating envelopes, weights strictly inside the growth
    /// budget.
    pub fn default_family(k_modes: usize, c0: f64, ncomp: usize) -> Self {
        let mut fluid_shapes = Vec::with_capacity(k_modes);
        let mut structure_shapes = Vec::with_capacity(k_modes);
        for k in 1..=k_modes {
            let mut dir = vec![0.0; ncomp];
            dir[k % ncomp] = 1.0;
            let mut lambda_q = vec![0.0; ncomp];
            lambda_q[(k + 1) % ncomp] = 0.5;
            fluid_shapes.push(FluidShape {
                lambda_rho: 0.4,
                lambda_q,
                dir,
                env_kx: (k - 1) % 3,
                env_mz: k % 3,
                phase: 0.61803398875 * k as f64,
            });
            structure_shapes.push(StructureShape {
                a_eta: 0.45,
                b_v: 0.45,
                env_k: (k - 1) % 3,
                phase: 0.38196601125 * k as f64,
            });
        }
        NoiseSpec { k_modes, c0, decay: 1.1, fluid_shapes, structure_shapes }
    }

    pub fn c_k(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        self.c0 * (k as f64).powf(-self.decay)
    }

    /// Retained variance `sum_{k <= K} c_k^2`.
    pub fn retained_variance(&self) -> f64 {
        (1..=self.k_modes).map(|k| self.c_k(k).powi(2)).sum()
    }

    /// Truncation error `sum_{k > K} c_k^2`, bounded by the integral tail.
    pub fn truncation_tail(&self) -> f64 {
        let p = 2.0 * self.decay;
        self.c0 * self.c0 * (self.k_modes as f64).powf(1.0 - p) / (p - 1.0)
    }

    pub fn validate_shape_counts(&self) -> Result<()> {
        if self.fluid_shapes.len() != self.k_modes || self.structure_shapes.len() != self.k_modes {
            return Err(Error::Config(format!(
                "noise spec has {} fluid and {} structure shapes for K = {}",
                self.fluid_shapes.len(),
                self.structure_shapes.len(),
                self.k_modes
            )));
        }
        Ok(())
    }
}

fn envelope_fluid(shape: &FluidShape, x: [f64; 2], z: f64, height: f64) -> f64 {
    let lat = (2.0 * std::f64::consts::PI * shape.env_kx as f64 * x[0] + shape.phase).cos();
    let vert = (shape.env_mz as f64 * std::f64::consts::PI * z / height).cos();
    lat * vert
}

/// Fluid noise coefficient `f_k(rho, q, x)`: one value per velocity
/// component. Vanishes when both the density and the momentum do.
pub fn eval_f(spec: &NoiseSpec, k: usize, rho: f64, q: &[f64], x: [f64; 2], z: f64, height: f64) -> Vec<f64> {
    let shape = &spec.fluid_shapes[k - 1];
    let lin = shape.lambda_rho * rho
        + shape.lambda_q.iter().zip(q).map(|(l, qv)| l * qv).sum::<f64>();
    let amp = spec.c_k(k) * lin * envelope_fluid(shape, x, z, height);
    shape.dir.iter().map(|d| amp * d).collect()
}

/// Structure noise coefficient `g_k(eta, v, w)`.
pub fn eval_g(spec: &NoiseSpec, k: usize, eta: f64, v: f64, w: [f64; 2]) -> f64 {
    let shape = &spec.structure_shapes[k - 1];
    let env = (2.0 * std::f64::consts::PI * shape.env_k as f64 * w[0] + shape.phase).cos();
    spec.c_k(k) * (shape.a_eta * eta + shape.b_v * v) * env
}

/// Outcome of the growth/gradient validation of a noise spec.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub pass: bool,
    /// Smallest slack of `c_k (rho + |q|) - |f_k|` over the samples.
    pub worst_fluid_margin: f64,
    pub worst_structure_margin: f64,
    /// Smallest slack of the gradient bounds (finite differences).
    pub worst_fluid_grad_margin: f64,
    pub worst_structure_grad_margin: f64,
    /// Modes that violated a bound, with the offending state.
    pub violations: Vec<(usize, String)>,
}

/// Sample random states and check the linear growth and gradient bounds
/// for every retained mode. Gradients are probed by central differences so
/// the check is independent of the built-in family's algebra.
pub fn validate_growth(spec: &NoiseSpec, samples: usize, seed: u64, height: f64) -> Result<GrowthReport> {
    spec.validate_shape_counts()?;
    let ncomp = spec.fluid_shapes.first().map_or(2, |s| s.dir.len());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut uniform = |lo: f64, hi: f64| {
        lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut report = GrowthReport {
        pass: true,
        worst_fluid_margin: f64::INFINITY,
        worst_structure_margin: f64::INFINITY,
        worst_fluid_grad_margin: f64::INFINITY,
        worst_structure_grad_margin: f64::INFINITY,
        violations: Vec::new(),
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let fd = 1e-5;
    for _ in 0..samples {
        let rho = uniform(0.0, 3.0);
        let q: Vec<f64> = (0..ncomp).map(|_| uniform(-2.0, 2.0)).collect();
        let x = [uniform(0.0, 1.0), uniform(0.0, 1.0)];
        let z = uniform(0.0, height);
        let eta = uniform(-1.0, 1.0);
        let v = uniform(-2.0, 2.0);
        for k in 1..=spec.k_modes {
            let ck = spec.c_k(k);
            let fk = eval_f(spec, k, rho, &q, x, z, height);
            let margin = ck * (rho + norm(&q)) - norm(&fk);
            report.worst_fluid_margin = report.worst_fluid_margin.min(margin);
            if margin < -1e-12 {
                report.pass = false;
                report.violations.push((k, format!("fluid growth at rho={rho:.3}, q={q:?}")));
            }
            // Frobenius norm of the (rho, q) Jacobian by central differences
            let mut grad_sq = 0.0;
            let fp = eval_f(spec, k, rho + fd, &q, x, z, height);
            let fm = eval_f(spec, k, (rho - fd).max(0.0), &q, x, z, height);
            let denom = if rho >= fd { 2.0 * fd } else { fd + rho };
            for c in 0..ncomp {
                grad_sq += ((fp[c] - fm[c]) / denom).powi(2);
            }
            for a in 0..ncomp {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[a] += fd;
                qm[a] -= fd;
                let fp = eval_f(spec, k, rho, &qp, x, z, height);
                let fm = eval_f(spec, k, rho, &qm, x, z, height);
                for c in 0..ncomp {
                    grad_sq += ((fp[c] - fm[c]) / (2.0 * fd)).powi(2);
                }
            }
            let gmargin = ck - grad_sq.sqrt();
            report.worst_fluid_grad_margin = report.worst_fluid_grad_margin.min(gmargin);
            if gmargin < -1e-6 {
                report.pass = false;
                report.violations.push((k, "fluid gradient".into()));
            }

            let gk = eval_g(spec, k, eta, v, x);
            let gmargin2 = ck * (eta.abs() + v.abs()) - gk.abs();
            report.worst_structure_margin = report.worst_structure_margin.min(gmargin2);
            if gmargin2 < -1e-12 {
                report.pass = false;
                report.violations.push((k, format!("structure growth at eta={eta:.3}, v={v:.3}")));
            }
            let ge = (eval_g(spec, k, eta + fd, v, x) - eval_g(spec, k, eta - fd, v, x)) / (2.0 * fd);
            let gv = (eval_g(spec, k, eta, v + fd, x) - eval_g(spec, k, eta, v - fd, x)) / (2.0 * fd);
            let gg = ck - (ge * ge + gv * gv).sqrt();
            report.worst_structure_grad_margin = report.worst_structure_grad_margin.min(gg);
            if gg < -1e-6 {
                report.pass = false;
                report.violations.push((k, "structure gradient".into()));
            }
        }
    }
    Ok(report)
}

/// Seeded per-mode Gaussian increments for the two independent Wiener
/// processes, pre-generated so replay is trivially bit-identical.
#[derive(Debug, Clone)]
pub struct WienerPath {
    pub seed: u64,
    pub dt: f64,
    pub n_steps: usize,
    pub k_modes: usize,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

/// Standard normals from a counter-based stream via Box-Muller on fixed
/// 53-bit uniforms (fixed word consumption, portable).
fn fill_normals(rng: &mut ChaCha12Rng, out: &mut [f64]) {
    let mut i = 0;
    while i < out.len() {
        let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
        let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        out[i] = r * th.cos();
        i += 1;
        if i < out.len() {
            out[i] = r * th.sin();
            i += 1;
        }
    }
}

impl WienerPath {
    pub fn generate(seed: u64, dt: f64, n_steps: usize, k_modes: usize) -> Self {
        let scale = dt.sqrt();
        let gen_stream = |stream: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut buf = vec![0.0; n_steps * k_modes];
            fill_normals(&mut rng, &mut buf);
            for v in &mut buf {
                *v *= scale;
            }
            buf
        };
        WienerPath { seed, dt, n_steps, k_modes, w1: gen_stream(1), w2: gen_stream(2) }
    }

    /// Increments of (W1, W2) over step `j`, each of variance `dt` per mode.
    pub fn increments(&self, j: usize) -> (&[f64], &[f64]) {
        assert!(j < self.n_steps, "step {j} outside horizon {}", self.n_steps);
        let r = j * self.k_modes..(j + 1) * self.k_modes;
        (&self.w1[r.clone()], &self.w2[r])
    }
}

/// Galerkin noise columns: column `k` is
/// `M^(1/2)[rho] P_n^f (f_k(rho, rho u) / sqrt(rho))` in fluid-basis
/// coordinates. The caller applies the moving-domain indicator weight when
/// forming the momentum forcing.
pub fn projected_fluid_noise(
    grid: &Grid,
    eval: &FluidEval,
    basis: &FluidBasis,
    rho: &[f64],
    u_coeffs: &DVector<f64>,
    spec: &NoiseSpec,
    m_half: &DMatrix<f64>,
) -> Result<Vec<DVector<f64>>> {
    let min_rho = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_rho > 0.0) {
        return Err(Error::Vacuum(format!(
            "projected noise needs strictly positive density, min rho = {min_rho}"
        )));
    }
    let u_fields = eval.all_components(basis, u_coeffs);
    let n_lat = grid.n_lat();
    let nz = grid.nz;
    let ncomp = basis.ncomp;
    let mut columns = Vec::with_capacity(spec.k_modes);
    let mut fields: Vec<Vec<f64>> = vec![vec![0.0; grid.n_cells()]; ncomp];
    for k in 1..=spec.k_modes {
        for f in &mut fields {
            f.iter_mut().for_each(|v| *v = 0.0);
        }
        let shape = &spec.fluid_shapes[k - 1];
        let ck = spec.c_k(k);
        for flat in 0..n_lat {
            let xy = grid.lat_coord(flat);
            for j in 0..nz {
                let c = flat * nz + j;
                let r = rho[c];
                let mut lin = shape.lambda_rho * r;
                for comp in 0..ncomp {
                    lin += shape.lambda_q[comp] * r * u_fields[comp][c];
                }
                let amp = ck * lin * envelope_fluid(shape, xy, grid.z1d(j), grid.height) / r.sqrt();
                for comp in 0..ncomp {
                    fields[comp][c] = amp * shape.dir[comp];
                }
            }
        }
        let proj = eval.project(basis, &fields);
        columns.push(m_half * proj);
    }
    Ok(columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn replay_is_bit_identical() {
        let a = WienerPath::generate(42, 1e-3, 50, 8);
        let b = WienerPath::generate(42, 1e-3, 50, 8);
        assert_eq!(a.increments(17).0, b.increments(17).0);
        assert_eq!(a.increments(17).1, b.increments(17).1);
        let c = WienerPath::generate(43, 1e-3, 50, 8);
        assert_ne!(a.increments(0).0, c.increments(0).0);
    }

    #[test]
    fn increment_moments_match() {
        let dt = 2e-3;
        let path = WienerPath::generate(7, dt, 12_500, 8);
        // 1e5 samples across steps and modes: variance within 3%
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let n = path.n_steps * path.k_modes;
        for j in 0..path.n_steps {
            for &v in path.increments(j).0 {
                sum += v;
                sum_sq += v * v;
            }
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((var - dt).abs() / dt < 0.03, "variance {var} vs dt {dt}");
        assert!(mean.abs() < 3.0 * (dt / n as f64).sqrt());
    }

    #[test]
    fn streams_are_uncorrelated() {
        let dt = 1.0;
        let path = WienerPath::generate(11, dt, 12_500, 8);
        let n = path.n_steps * path.k_modes;
        let mut cross = 0.0;
        for j in 0..path.n_steps {
            let (w1, w2) = path.increments(j);
            for (a, b) in w1.iter().zip(w2) {
                cross += a * b;
            }
        }
        // Var(sum of n products of independent unit normals) = n
        let sigma = (n as f64).sqrt();
        assert!(cross.abs() < 3.0 * sigma, "cross-covariance {cross} vs 3 sigma {}", 3.0 * sigma);
    }

    #[test]
    fn noise_family_basics() {
        let spec = NoiseSpec::default_family(8, 1.0, 2);
        // f_k(0, 0) = 0
        let f = eval_f(&spec, 3, 0.0, &[0.0, 0.0], [0.3, 0.0], 1.0, 4.0);
        assert!(f.iter().all(|v| v.abs() < 1e-15));
        // linearity
        let f1 = eval_f(&spec, 3, 0.7, &[0.2, -0.4], [0.3, 0.0], 1.0, 4.0);
        let f2 = eval_f(&spec, 3, 1.4, &[0.4, -0.8], [0.3, 0.0], 1.0, 4.0);
        for (a, b) in f1.iter().zip(&f2) {
            assert_relative_eq!(2.0 * a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn growth_validation_passes_default_and_fails_adversarial() {
        let spec = NoiseSpec::default_family(8, 1.0, 2);
        let report = validate_growth(&spec, 2000, 3, 4.0).unwrap();
        assert!(report.pass, "default spec must pass: {:?}", report.violations);
        assert!(report.worst_fluid_margin >= 0.0);
        assert!(report.worst_structure_margin >= 0.0);

        let mut bad = spec.clone();
        bad.fluid_shapes[4].lambda_q = vec![1.5, 0.0];
        let report = validate_growth(&bad, 2000, 3, 4.0).unwrap();
        assert!(!report.pass);
        assert!(report.violations.iter().any(|(k, _)| *k == 5), "must identify mode 5");
    }

    #[test]
    fn growth_margin_shrinks_as_weights_approach_budget() {
        let mut prev = f64::INFINITY;
        for lq in [0.3, 0.6, 0.9] {
            let mut spec = NoiseSpec::default_family(4, 1.0, 2);
            for s in &mut spec.fluid_shapes {
                s.lambda_rho = 0.0;
                s.lambda_q = vec![lq, 0.0];
            }
            let report = validate_growth(&spec, 1000, 9, 4.0).unwrap();
            assert!(report.worst_fluid_margin < prev);
            prev = report.worst_fluid_margin;
        }
    }
}
