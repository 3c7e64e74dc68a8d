//! The full parameter cascade and its validity constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::FluidParams;
use crate::geometry::{holder_bound, DomainSpec, GeometrySpec};
use crate::noise::NoiseSpec;
use crate::spectral::Grid;
use crate::structure::StructureParams;

/// Built-in initial data shapes: a constant density on the initial moving
/// domain, a single-mode displacement and velocity, and an optional vertical
/// momentum kick.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InitSpec {
    /// Initial density value inside the moving domain.
    pub rho0_const: f64,
    /// Lateral cosine wavenumber of the initial displacement.
    pub eta0_mode: usize,
    pub eta0_amp: f64,
    pub v0_mode: usize,
    pub v0_amp: f64,
    /// Vertical momentum amplitude inside the initial domain.
    pub p0_amp: f64,
    /// Mollification radius applied when extending the density by zero.
    pub mollify_radius: f64,
}

/// Every knob of the scheme.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SchemeParams {
    pub dim: usize,
    pub alpha_dom: f64,
    /// Sobolev exponent of the stopping threshold, in (3/2, 2).
    pub s: f64,
    pub gamma: f64,
    pub beta: f64,
    pub a_pressure: f64,
    pub mu: f64,
    pub lambda_visc: f64,
    pub visc_elast: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub nu0: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n_st: usize,
    pub fluid_kmax: usize,
    pub fluid_mmax: usize,
    pub grid_nx: usize,
    pub grid_nz: usize,
    pub noise_modes: usize,
    pub noise_c0: f64,
    pub noise_on: bool,
    pub micro_steps: usize,
    pub seed: u64,
    /// Interior band margin for the pressure diagnostics.
    pub band_l: f64,
    pub init: InitSpec,
}

impl Default for SchemeParams {
    /// Desk configuration: minutes-scale runs with every constraint
    /// satisfied.
    fn default() -> Self {
        SchemeParams {
            dim: 2,
            alpha_dom: 0.5,
            s: 1.75,
            gamma: 5.0 / 3.0,
            beta: 5.0,
            a_pressure: 1.0,
            mu: 1.0,
            lambda_visc: 1.0,
            visc_elast: 1.0,
            epsilon: 1e-3,
            delta: 1e-3,
            nu0: 0.05,
            dt: 1e-3,
            t_final: 0.5,
            n_st: 16,
            fluid_kmax: 4,
            fluid_mmax: 11,
            grid_nx: 64,
            grid_nz: 96,
            noise_modes: 8,
            noise_c0: 1.0,
            noise_on: true,
            micro_steps: 4,
            seed: 1,
            band_l: 0.2,
            init: InitSpec {
                rho0_const: 1.0,
                eta0_mode: 1,
                eta0_amp: 0.0,
                v0_mode: 1,
                v0_amp: 0.0,
                p0_amp: 0.0,
                mollify_radius: 0.09,
            },
        }
    }
}

impl SchemeParams {
    pub fn height(&self) -> f64 {
        2.0 + 1.0 / self.alpha_dom
    }

    /// Total number of fluid Galerkin modes implied by the caps.
    pub fn n_fluid_modes(&self) -> usize {
        self.dim * (2 * self.fluid_kmax + 1).pow((self.dim - 1) as u32) * self.fluid_mmax
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.dim, self.alpha_dom, self.grid_nx, self.grid_nz)
    }

    pub fn grid(&self) -> Result<Grid> {
        self.domain()?.grid()
    }

    pub fn holder_constant(&self) -> Result<f64> {
        holder_bound(self.s, self.alpha_dom, self.dim)
    }

    pub fn geometry_spec(&self) -> Result<GeometrySpec> {
        Ok(GeometrySpec {
            grid: self.grid()?,
            c_alpha: self.holder_constant()?,
            delta: self.delta,
            nu0: self.nu0,
            beta: self.beta,
            mu: self.mu,
            lambda_visc: self.lambda_visc,
            band_l: self.band_l,
        })
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec::default_family(self.noise_modes, self.noise_c0, self.dim)
    }

    pub fn fluid_params(&self) -> FluidParams {
        FluidParams {
            dt: self.dt,
            delta: self.delta,
            epsilon: self.epsilon,
            a_pressure: self.a_pressure,
            gamma: self.gamma,
            beta: self.beta,
            micro_steps: self.micro_steps,
        }
    }

    pub fn structure_params(&self) -> StructureParams {
        StructureParams {
            dt: self.dt,
            delta: self.delta,
            beta: self.beta,
            visc_elast: self.visc_elast,
            alpha_dom: self.alpha_dom,
            s: self.s,
        }
    }

    /// Check every admissibility constraint, naming the violated one.
    pub fn validate(&self) -> Result<()> {
        let bail = |msg: String| Err(Error::Config(msg));
        if !(self.dim == 2 || self.dim == 3) {
            return bail(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if !(self.alpha_dom > 0.0 && self.alpha_dom <= 1.0) {
            return bail(format!("alpha_dom must lie in (0, 1], got {}", self.alpha_dom));
        }
        if !(1.5 < self.s && self.s < 2.0) {
            return bail(format!("s must lie in (3/2, 2), got {}", self.s));
        }
        if self.gamma <= 1.5 {
            return bail(format!("gamma must exceed 3/2, got {}", self.gamma));
        }
        if self.beta <= self.gamma.max(4.0) {
            return bail(format!(
                "beta must exceed max{{4, gamma}} = {}, got {}",
                self.gamma.max(4.0),
                self.beta
            ));
        }
        let nu0_cap = (0.5 - 1.0 / self.beta).powi(2);
        if !(self.nu0 > 0.0 && self.nu0 < nu0_cap) {
            return bail(format!(
                "nu0 must lie in (0, (1/2 - 1/beta)^2) = (0, {nu0_cap:.4}), got {}",
                self.nu0
            ));
        }
        if self.a_pressure < 0.0 {
            return bail("a_pressure must be non-negative".into());
        }
        if self.mu <= 0.0 || self.lambda_visc <= 0.0 {
            return bail("viscosities mu and lambda_visc must be positive".into());
        }
        if self.visc_elast < 0.0 {
            return bail("visc_elast must be non-negative".into());
        }
        if !(self.epsilon > 0.0) {
            return bail("epsilon must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bail(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.dt > 0.0) {
            return bail("dt must be positive".into());
        }
        if self.t_final < self.dt {
            return bail("t_final must be at least one step".into());
        }
        if self.n_st == 0 || self.fluid_mmax == 0 {
            return bail("Galerkin sizes must be positive".into());
        }
        if self.noise_modes == 0 {
            return bail("noise truncation K must be at least 1".into());
        }
        if self.micro_steps == 0 {
            return bail("micro_steps must be at least 1".into());
        }
        if self.grid_nx < 4 || self.grid_nz < 4 || self.grid_nx % 2 != 0 {
            return bail("grid resolutions must be even and at least 4".into());
        }
        if 2 * self.fluid_kmax >= self.grid_nx / 2 {
            return bail(format!(
                "fluid_kmax {} too large for grid_nx {} (separable quadrature needs \
                 2 kmax < nx/2)",
                self.fluid_kmax, self.grid_nx
            ));
        }
        if 2 * self.fluid_mmax >= self.grid_nz {
            return bail(format!(
                "fluid_mmax {} too large for grid_nz {}",
                self.fluid_mmax, self.grid_nz
            ));
        }
        if !(self.band_l > 0.0 && 2.0 * self.band_l < 1.0) {
            return bail("band_l must lie in (0, 1/2)".into());
        }
        if self.init.rho0_const <= 0.0 {
            return bail("rho0_const must be positive".into());
        }
        if self.init.mollify_radius < 0.0 {
            return bail("mollify_radius must be non-negative".into());
        }
        // tube-inside-collar configuration check
        self.geometry_spec()?.check_collar()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SchemeParams::default().validate().unwrap();
    }

    #[test]
    fn constraint_messages_name_the_constraint() {
        let mut p = SchemeParams::default();
        p.gamma = 1.4;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("gamma must exceed 3/2"), "{err}");

        let mut p = SchemeParams::default();
        p.beta = 3.0;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("beta must exceed max{4, gamma}"), "{err}");

        let mut p = SchemeParams::default();
        p.nu0 = 0.2;
        assert!(p.validate().is_err());

        let mut p = SchemeParams::default();
        p.s = 2.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn default_mode_count_is_desk_scale() {
        let p = SchemeParams::default();
        assert_eq!(p.n_fluid_modes(), 198);
        assert_eq!(p.n_steps(), 500);
    }
}
