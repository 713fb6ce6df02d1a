//! The critical weight exponents: `sigma*` where the orbit leaving `P2`
//! switches from the tail attractor to a sign change, and the regime map
//! over a grid of `sigma`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{Direction, EventKind, InterfaceBand, IntegrationConfig, OrbitTrace};
use crate::model::{chart_map, derive_exponents, Chart, Params};
use crate::orbits::{
    classify_from_p2_with, default_k_grid, interface_pass, scan_family, InterfacePass, OrbitOptions, Terminal,
    TerminalClass,
};
use crate::shooting::{bisect_eta, default_bracket, origin_fit, GoodProfile, ProfileKind, ShootOptions};

/// Default starting bracket for `sigma*`.
pub const DEFAULT_SIGMA_BRACKET: (f64, f64) = (0.5, 8.0);
/// Arc budget and step cap multiplier for the end certificates.
pub const CERTIFICATE_ARC_FACTOR: f64 = 1e8;
/// Largest factor by which either end of the bracket is moved outward.
pub const MAX_EXPANSION: f64 = 64.0;

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationResult {
    pub m: f64,
    pub p: f64,
    pub sigma_star: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// Classes at the bracket ends, re-checked with tolerances divided by 10
    /// and a longer arc budget.
    pub certificates: (Terminal, Terminal),
    /// Closest descending pass by the interface line among the two end orbits.
    pub pass: Option<InterfacePass>,
    /// Whether `pass` lies inside the full certification band (distance and `x`).
    pub certified: bool,
    pub critical_profile: Option<GoodProfile>,
}

fn p2_class(m: f64, p: f64, sigma: f64, cfg: &IntegrationConfig, opts: &OrbitOptions) -> Result<(Terminal, OrbitTrace)> {
    let params = derive_exponents(m, p, sigma)?;
    classify_from_p2_with(&params, cfg, opts)
}

/// Bisection on `sigma` between a tail-attractor end and a sign-change end of the `P2` orbit.
pub fn find_sigma_star(m: f64, p: f64, bracket0: (f64, f64), tol: f64, cfg: &IntegrationConfig) -> Result<BifurcationResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
    }
    let (mut lo, mut hi) = bracket0;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidInput(format!("bad sigma bracket ({lo}, {hi})")));
    }
    derive_exponents(m, p, lo)?;
    // plain classification; the band would stop orbits that are only nearly critical
    let opts = OrbitOptions {
        interface_band: None,
        ..OrbitOptions::default()
    };
    let classify = |s: f64| p2_class(m, p, s, cfg, &opts);

    let (lo0, hi0) = (lo, hi);
    let mut t_lo = classify(lo)?;
    while t_lo.0.class != TerminalClass::EntersPgamma0 {
        if lo / 2.0 < lo0 / MAX_EXPANSION {
            return Err(Error::Bracket(format!(
                "P2 orbit at sigma = {lo} is {:?}, not ENTERS_PGAMMA0",
                t_lo.0.class
            )));
        }
        lo /= 2.0;
        t_lo = classify(lo)?;
    }
    let mut t_hi = classify(hi)?;
    while t_hi.0.class != TerminalClass::EntersQ3 {
        if hi * 2.0 > hi0 * MAX_EXPANSION {
            return Err(Error::Bracket(format!(
                "P2 orbit at sigma = {hi} is {:?}, not ENTERS_Q3",
                t_hi.0.class
            )));
        }
        hi *= 2.0;
        t_hi = classify(hi)?;
    }

    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let t = classify(mid)?;
        // only a sign change is decisive; a stall in the slow tail counts with the tail side
        let tail_side = t.0.class == TerminalClass::EntersPgamma0
            || (t.0.class == TerminalClass::Unresolved && t.1.terminal == EventKind::ArcBudget);
        match t.0.class {
            _ if tail_side => {
                lo = mid;
                t_lo = t;
            }
            TerminalClass::EntersQ3 => {
                hi = mid;
                t_hi = t;
            }
            other => {
                return Err(Error::Certification(format!(
                    "P2 orbit at sigma = {mid} resolves to {other:?}; bracket ({lo}, {hi})"
                )))
            }
        }
    }

    let strict = IntegrationConfig {
        max_arc: cfg.max_arc * CERTIFICATE_ARC_FACTOR,
        max_step: cfg.max_step * CERTIFICATE_ARC_FACTOR,
        ..cfg.tightened(10.0)
    };
    let c_lo = p2_class(m, p, lo, &strict, &opts)?.0;
    let c_hi = p2_class(m, p, hi, &strict, &opts)?.0;
    if c_lo.class != TerminalClass::EntersPgamma0 || c_hi.class != TerminalClass::EntersQ3 {
        return Err(Error::Certification(format!(
            "end classes change under tighter tolerances: {:?} at {lo}, {:?} at {hi}",
            c_lo.class, c_hi.class
        )));
    }

    let band = InterfaceBand::default();
    let sigma_star = 0.5 * (lo + hi);
    let params = derive_exponents(m, p, sigma_star)?;
    let passes = [
        (interface_pass(&params, &t_lo.1, band.distance), &t_lo.1),
        (interface_pass(&params, &t_hi.1, band.distance), &t_hi.1),
    ];
    let best = passes
        .iter()
        .filter_map(|(ps, tr)| ps.map(|ps| (ps, *tr)))
        .min_by(|a, b| a.0.x.total_cmp(&b.0.x));
    let critical_profile = best.and_then(|(ps, tr)| critical_profile(&tr.params, tr, &ps));
    Ok(BifurcationResult {
        m,
        p,
        sigma_star,
        bracket: (lo, hi),
        iterations,
        certificates: (c_lo, c_hi),
        pass: best.map(|b| b.0),
        certified: best.is_some_and(|b| b.0.x <= band.x_max),
        critical_profile,
    })
}

/// Profile along a forward `P2` trace up to its interface pass.
fn critical_profile(params: &Params, trace: &OrbitTrace, pass: &InterfacePass) -> Option<GoodProfile> {
    let head = &trace.states[..=pass.index];
    let samples: Vec<_> = head.iter().filter_map(|s| crate::model::profile_of(params, s)).collect();
    let lower: Vec<_> = head.iter().filter_map(|s| chart_map(params, s, Chart::Lower).ok()).collect();
    let times = (0..lower.len()).map(|i| i as f64).collect();
    let lower_trace = OrbitTrace::from_states(
        params,
        Chart::Lower,
        Direction::Forward,
        times,
        lower,
        Vec::new(),
        EventKind::NearInterface,
    );
    let fit = origin_fit(params, &lower_trace, ShootOptions::default().case_band);
    (!samples.is_empty()).then(|| GoodProfile {
        params: *params,
        eta0: pass.eta,
        kind: ProfileKind::P2Case1,
        samples,
        a0: None,
        bracket: (pass.eta, pass.eta),
        origin_fit: fit,
        p0_approach: None,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeRow {
    pub sigma: f64,
    pub p2_class: TerminalClass,
    /// Some member of the `P0` family enters the tail attractor.
    pub has_a0: bool,
    /// First `B0` bracket on the default `k` grid.
    pub b0_bracket: Option<(f64, f64)>,
    pub profile_kind: Option<ProfileKind>,
    pub eta0: Option<f64>,
    pub a0: Option<f64>,
    /// Failure of any of the three runs.
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeMap {
    pub m: f64,
    pub p: f64,
    pub sigma_grid: Vec<f64>,
    pub rows: Vec<RegimeRow>,
    /// Smallest grid `sigma` with a `B0` bracket.
    pub sigma1: Option<f64>,
    /// Adjacent grid pairs where the good profile switches between types.
    pub kind_transitions: Vec<(f64, f64)>,
    /// Adjacent grid pairs where the class of the `P2` orbit changes.
    pub p2_transitions: Vec<(f64, f64)>,
}

impl RegimeMap {
    pub fn p2_classes(&self) -> Vec<TerminalClass> {
        self.rows.iter().map(|r| r.p2_class).collect()
    }

    pub fn good_profile_kinds(&self) -> Vec<Option<ProfileKind>> {
        self.rows.iter().map(|r| r.profile_kind).collect()
    }
}

/// Absolute `eta` tolerance used for the per-`sigma` shooting runs.
pub const REGIME_ETA_TOL: f64 = 1e-7;

fn regime_row(m: f64, p: f64, sigma: f64, cfg: &IntegrationConfig) -> RegimeRow {
    let mut row = RegimeRow {
        sigma,
        p2_class: TerminalClass::Unresolved,
        has_a0: false,
        b0_bracket: None,
        profile_kind: None,
        eta0: None,
        a0: None,
        note: None,
    };
    let mut notes = Vec::new();
    let params = match derive_exponents(m, p, sigma) {
        Ok(v) => v,
        Err(e) => {
            row.note = Some(e.to_string());
            return row;
        }
    };
    match classify_from_p2_with(&params, cfg, &OrbitOptions::default()) {
        Ok((t, _)) => row.p2_class = t.class,
        Err(e) => notes.push(format!("P2 orbit: {e}")),
    }
    match scan_family(&params, &default_k_grid(), cfg) {
        Ok(scan) => {
            row.has_a0 = scan.classes.iter().any(|t| t.class == TerminalClass::EntersPgamma0);
            row.b0_bracket = scan.b0_brackets.first().copied();
        }
        Err(e) => notes.push(format!("P0 family: {e}")),
    }
    let shot = default_bracket(&params, cfg, &ShootOptions::default())
        .and_then(|b| bisect_eta(&params, b, cfg, REGIME_ETA_TOL));
    match shot {
        Ok(g) => {
            row.profile_kind = Some(g.kind);
            row.eta0 = Some(g.eta0);
            row.a0 = g.a0;
        }
        Err(e) => notes.push(format!("shooting: {e}")),
    }
    if !notes.is_empty() {
        row.note = Some(notes.join("; "));
    }
    row
}

/// Runs the `P2` orbit, the `P0` family scan and the shooting search for each `sigma`.
pub fn regime_map(m: f64, p: f64, sigma_grid: &[f64], cfg: &IntegrationConfig) -> Result<RegimeMap> {
    if sigma_grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) || sigma_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("sigma grid must be positive and strictly increasing".into()));
    }
    cfg.validate()?;
    let rows: Vec<RegimeRow> = sigma_grid.par_iter().map(|&s| regime_row(m, p, s, cfg)).collect();
    let sigma1 = rows.iter().find(|r| r.b0_bracket.is_some()).map(|r| r.sigma);
    let p1 = |r: &RegimeRow| r.profile_kind.map(|k| k == ProfileKind::P1);
    let kind_transitions = rows
        .windows(2)
        .filter(|w| matches!((p1(&w[0]), p1(&w[1])), (Some(a), Some(b)) if a != b))
        .map(|w| (w[0].sigma, w[1].sigma))
        .collect();
    let p2_transitions = rows
        .windows(2)
        .filter(|w| w[0].p2_class != w[1].p2_class)
        .map(|w| (w[0].sigma, w[1].sigma))
        .collect();
    Ok(RegimeMap {
        m,
        p,
        sigma_grid: sigma_grid.to_vec(),
        rows,
        sigma1,
        kind_transitions,
        p2_transitions,
    })
}
