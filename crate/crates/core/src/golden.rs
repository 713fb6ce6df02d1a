//! Closed-form reference checks: the explicit compactly supported profile
//! for `p = 1` and the homogeneous limit `sigma = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::IntegrationConfig;
use crate::model::{derive_exponents_with, ode_residual, ExplicitSolution, ValidationFlags};
use crate::orbits::{default_k_grid, scan_family_with, OrbitOptions, TerminalClass};
use crate::shooting::{shoot_from_interface_with, ShootOptions};

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const SHOOT_TOL: f64 = 1e-6;
pub const HOMOGENEOUS_TOL: f64 = 1e-3;
/// Starter offset for the explicit-profile shot.
pub const EXPLICIT_DELTA: f64 = 1e-9;
/// Left end of the window on which the shot is compared to the explicit profile.
pub const SHOOT_WINDOW_LO: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitCheck {
    pub m: f64,
    pub sigma: f64,
    pub xi0: f64,
    /// Largest `|residual|` over 200 interior points.
    pub max_residual: f64,
    /// Sup-norm of `f_shot - f_exact` on `[0.1, xi0]`.
    pub shoot_error: f64,
    pub samples_compared: usize,
    pub passed: bool,
}

/// Residual and backward-shooting check against the explicit `p = 1` profile.
pub fn explicit_check(m: f64, cfg: &IntegrationConfig) -> Result<ExplicitCheck> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::Domain(format!("m must be > 1, got {m}")));
    }
    let sol = ExplicitSolution::new(m);
    let params = sol.params();
    let xi0 = sol.interface();
    let max_residual = (1..=200)
        .map(|i| {
            let xi = xi0 * i as f64 / 201.0;
            ode_residual(&params, &sol.sample(xi), sol.second_derivative_fm(xi)).abs()
        })
        .fold(0.0, f64::max);
    let opts = ShootOptions {
        delta: EXPLICIT_DELTA,
        ..ShootOptions::default()
    };
    let shot = shoot_from_interface_with(&params, xi0, cfg, &opts)?;
    let window: Vec<_> = shot
        .trace
        .profile
        .iter()
        .filter(|s| s.xi >= SHOOT_WINDOW_LO && s.xi <= xi0)
        .collect();
    let shoot_error = window
        .iter()
        .map(|s| (s.f - sol.sample(s.xi).f).abs())
        .fold(0.0, f64::max);
    let samples_compared = window.len();
    Ok(ExplicitCheck {
        m,
        sigma: sol.sigma,
        xi0,
        max_residual,
        shoot_error,
        samples_compared,
        passed: max_residual <= RESIDUAL_TOL && shoot_error <= SHOOT_TOL && samples_compared > 0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomogeneousCheck {
    pub m: f64,
    pub p: f64,
    pub members: usize,
    /// Members of the `P0` family that did not enter the tail attractor.
    pub misclassified: Vec<(f64, TerminalClass)>,
    /// Largest `|f - (1/(p-1))^{1/(p-1)}|` at the end of the traces.
    pub max_limit_error: f64,
    pub passed: bool,
}

/// For `sigma = 0` every member of the `P0` family must settle at the constant.
pub fn homogeneous_check(m: f64, p: f64, cfg: &IntegrationConfig) -> Result<HomogeneousCheck> {
    let flags = ValidationFlags {
        allow_p_one: false,
        allow_sigma_zero: true,
    };
    let params = derive_exponents_with(m, p, 0.0, flags)?;
    let limit = (1.0 / (p - 1.0)).powf(1.0 / (p - 1.0));
    let ks = default_k_grid();
    let opts = OrbitOptions::default();
    let mut misclassified = Vec::new();
    let mut max_limit_error: f64 = 0.0;
    for &k in &ks {
        let (t, tr) = crate::orbits::classify_from_p0_with(&params, k, cfg, &opts)?;
        if t.class != TerminalClass::EntersPgamma0 {
            misclassified.push((k, t.class));
        }
        if let Some(s) = tr.profile.last() {
            max_limit_error = max_limit_error.max((s.f - limit).abs());
        }
    }
    // the parallel scan has to agree with the serial loop
    let scan = scan_family_with(&params, &ks, cfg, &opts)?;
    let agrees = scan.classes.iter().all(|t| t.class == TerminalClass::EntersPgamma0) == misclassified.is_empty();
    Ok(HomogeneousCheck {
        m,
        p,
        members: ks.len(),
        passed: misclassified.is_empty() && max_limit_error <= HOMOGENEOUS_TOL && agrees,
        misclassified,
        max_limit_error,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenReport {
    pub explicit: Vec<ExplicitCheck>,
    pub homogeneous: HomogeneousCheck,
    pub passed: bool,
}

/// Tolerances for the golden suites: the explicit profile reaches the origin
/// along a non-generic connection, so shooting errors are strongly amplified.
pub fn golden_config() -> IntegrationConfig {
    IntegrationConfig::default().tightened(100.0)
}

/// `m in {2, 3, 5}` for the explicit profile, `m = 3, p = 2` for the homogeneous limit.
pub fn run_golden_suites(cfg: &IntegrationConfig) -> Result<GoldenReport> {
    let explicit = [2.0, 3.0, 5.0]
        .iter()
        .map(|&m| explicit_check(m, cfg))
        .collect::<Result<Vec<_>>>()?;
    let homogeneous = homogeneous_check(3.0, 2.0, cfg)?;
    let passed = explicit.iter().all(|c| c.passed) && homogeneous.passed;
    Ok(GoldenReport {
        explicit,
        homogeneous,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_profile_m2() {
        let c = explicit_check(2.0, &golden_config()).unwrap();
        assert!(c.passed, "{c:?}");
        assert!(c.max_residual <= RESIDUAL_TOL && c.shoot_error <= SHOOT_TOL);
    }

    #[test]
    fn explicit_check_rejects_bad_m() {
        assert!(explicit_check(1.0, &golden_config()).is_err());
    }
}
