//! Forward orbits from `P2` and from the `P0` family, and where they end.
//!
//! Every such orbit ends in the tail attractor `P_gamma0`, on the interface
//! (the point `P1`, seen as a line in the lower chart) or at the node `Q3`
//! at infinity (a sign change). Interface endings are codimension one, so in
//! practice they show up as the boundary between the other two.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{
    descending, integrate_plane_z0, integrate_with, interface_distance, BallTarget, Direction, Event, EventKind, InterfaceBand,
    IntegrationConfig, OrbitTrace, PlaneId, Stops,
};
use crate::local_analysis::{make_starter, PointId};
use crate::model::{Chart, Params, PhaseState, ProfileSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TerminalClass {
    EntersPgamma0,
    EntersP1,
    EntersQ3,
    Q4Diagnostic,
    Unresolved,
}

/// A terminal class with its detail: `eta` for `ENTERS_P1`, the crossing `xi` for `ENTERS_Q3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub class: TerminalClass,
    pub detail: Option<f64>,
}

impl Terminal {
    fn new(class: TerminalClass, detail: Option<f64>) -> Self {
        Self { class, detail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    pub delta: f64,
    /// Stop band for interface entries; `None` lets orbits run past `P1`.
    pub interface_band: Option<InterfaceBand>,
    /// Re-run unresolved orbits once with tolerances divided by 10.
    pub retry_tightened: bool,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            delta: 1e-7,
            interface_band: Some(InterfaceBand::default()),
            retry_tightened: true,
        }
    }
}

/// Planes watched along every forward orbit.
pub const MONITORS: [PlaneId; 4] = [
    PlaneId::YMinusY0,
    PlaneId::Barrier1,
    PlaneId::Barrier2,
    PlaneId::YAlphaOverM,
];

fn terminal_of(params: &Params, trace: &OrbitTrace) -> Terminal {
    let last = trace.last();
    match trace.terminal {
        EventKind::EnterBall(BallTarget::Pgamma0) => Terminal::new(TerminalClass::EntersPgamma0, None),
        EventKind::NearInterface => Terminal::new(TerminalClass::EntersP1, Some(last.xi())),
        EventKind::DivergeYMinus => Terminal::new(TerminalClass::EntersQ3, Some(last.xi())),
        EventKind::DivergeZ => Terminal::new(TerminalClass::Q4Diagnostic, None),
        _ => {
            let _ = params;
            Terminal::new(TerminalClass::Unresolved, None)
        }
    }
}

fn run_forward(params: &Params, start: &PhaseState, cfg: &IntegrationConfig, opts: &OrbitOptions) -> Result<(Terminal, OrbitTrace)> {
    let stops = Stops {
        balls: vec![BallTarget::Pgamma0],
        near_interface: opts.interface_band,
        ..Stops::default()
    };
    let attempt = |cfg: &IntegrationConfig| -> Result<(Terminal, OrbitTrace)> {
        let trace = integrate_with(params, start, Direction::Forward, cfg, &MONITORS, &stops)?;
        Ok((terminal_of(params, &trace), trace))
    };
    let first = attempt(cfg);
    let unresolved = match &first {
        Ok((t, _)) => t.class == TerminalClass::Unresolved,
        Err(Error::StepSizeUnderflow { .. }) => true,
        Err(_) => false,
    };
    if unresolved && opts.retry_tightened {
        let retry = IntegrationConfig {
            max_arc: cfg.max_arc * ARC_RETRY_FACTOR,
            max_step: cfg.max_step * ARC_RETRY_FACTOR,
            ..cfg.tightened(10.0)
        };
        return attempt(&retry).or(first);
    }
    first
}

/// The tightened retry also scales the arc budget and step cap by this factor: the tail
/// attractor is approached only algebraically after a near-critical pass.
pub const ARC_RETRY_FACTOR: f64 = 1e4;

pub fn classify_from_p2(params: &Params, cfg: &IntegrationConfig) -> Result<(Terminal, OrbitTrace)> {
    classify_from_p2_with(params, cfg, &OrbitOptions::default())
}

/// Follows the unique orbit leaving `P2` into `Z > 0`.
pub fn classify_from_p2_with(params: &Params, cfg: &IntegrationConfig, opts: &OrbitOptions) -> Result<(Terminal, OrbitTrace)> {
    let st = make_starter(params, PointId::P2, None, opts.delta)?;
    run_forward(params, &st.state, cfg, opts)
}

pub fn classify_from_p0(params: &Params, k: f64, cfg: &IntegrationConfig) -> Result<(Terminal, OrbitTrace)> {
    classify_from_p0_with(params, k, cfg, &OrbitOptions::default())
}

/// Follows the member `Z ~ k X` of the family leaving `P0`.
pub fn classify_from_p0_with(params: &Params, k: f64, cfg: &IntegrationConfig, opts: &OrbitOptions) -> Result<(Terminal, OrbitTrace)> {
    let st = make_starter(params, PointId::P0, Some(k), opts.delta)?;
    run_forward(params, &st.state, cfg, opts)
}

/// 64 log-spaced values over `[1e-4, 1e4]`.
pub fn default_k_grid() -> Vec<f64> {
    log_grid(1e-4, 1e4, 64)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyScan {
    pub params: Params,
    pub ks: Vec<f64>,
    pub classes: Vec<Terminal>,
    /// Adjacent grid pairs with one end in `A0` and the other in `C0`.
    pub b0_brackets: Vec<(f64, f64)>,
}

impl FamilyScan {
    /// `{k, class, detail}` records.
    pub fn records(&self) -> Vec<ScanRecord> {
        self.ks
            .iter()
            .zip(&self.classes)
            .map(|(&k, t)| ScanRecord {
                param: k,
                class: t.class,
                detail: t.detail,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub param: f64,
    pub class: TerminalClass,
    pub detail: Option<f64>,
}

pub fn scan_family(params: &Params, k_grid: &[f64], cfg: &IntegrationConfig) -> Result<FamilyScan> {
    scan_family_with(params, k_grid, cfg, &OrbitOptions::default())
}

pub fn scan_family_with(params: &Params, k_grid: &[f64], cfg: &IntegrationConfig, opts: &OrbitOptions) -> Result<FamilyScan> {
    if k_grid.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidInput("k grid must be positive".into()));
    }
    let classes = k_grid
        .par_iter()
        .map(|&k| classify_from_p0_with(params, k, cfg, opts).map(|(t, _)| t))
        .collect::<Result<Vec<_>>>()?;
    let side = |c: TerminalClass| matches!(c, TerminalClass::EntersPgamma0 | TerminalClass::EntersQ3);
    let b0_brackets = k_grid
        .windows(2)
        .zip(classes.windows(2))
        .filter(|(_, c)| side(c[0].class) && side(c[1].class) && c[0].class != c[1].class)
        .map(|(k, _)| (k[0], k[1]))
        .collect();
    Ok(FamilyScan {
        params: *params,
        ks: k_grid.to_vec(),
        classes,
        b0_brackets,
    })
}

/// Closest pass of a trace to the interface line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfacePass {
    pub index: usize,
    /// Distance to the line `m y + beta z = 0` in lower coordinates.
    pub distance: f64,
    /// `x = f^{m-1}` there.
    pub x: f64,
    pub eta: f64,
}

/// State of smallest `x` among those within `max_distance` of the interface line
/// on a descending stretch of the profile.
pub fn interface_pass(params: &Params, trace: &OrbitTrace, max_distance: f64) -> Option<InterfacePass> {
    trace
        .states
        .iter()
        .enumerate()
        .filter(|(_, s)| s.chart == Chart::Upper && s.coords[0] > 0.0 && descending(s))
        .map(|(i, s)| {
            let (d, x) = interface_distance(params, s);
            (i, d, x, s.xi())
        })
        .filter(|&(_, d, _, _)| d <= max_distance)
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .map(|(index, distance, x, eta)| InterfacePass {
            index,
            distance,
            x,
            eta,
        })
}

/// Result of refining a `B0` bracket of the `P0` family.
#[derive(Debug, Clone, Serialize)]
pub struct B0Refinement {
    pub bracket: (f64, f64),
    pub k: f64,
    pub sides: (Terminal, Terminal),
    /// End of the profile: the first minimum of `f` on its way down, taken
    /// on the tail-attractor side of the bracket.
    pub pass: Option<InterfacePass>,
    /// Closest descending approach to the interface line by either end.
    pub line_pass: Option<InterfacePass>,
    /// Profile from the origin up to `pass`.
    pub profile: Vec<ProfileSample>,
    /// Least-squares slope of `ln f` against `ln xi` over `[xi0, ORIGIN_FIT_SPAN xi0]`.
    pub fitted_exponent: Option<f64>,
    #[serde(skip)]
    pub trace: OrbitTrace,
}

/// Width of the fitting window for the origin exponent, as a ratio `xi_hi / xi_lo`.
pub const ORIGIN_FIT_SPAN: f64 = 1.25;

/// Slope of `ln f` over `ln xi` on `[xi_start, ORIGIN_FIT_SPAN * xi_start]`.
pub fn fit_origin_exponent(profile: &[ProfileSample]) -> Option<f64> {
    let xi0 = profile.iter().map(|s| s.xi).find(|x| *x > 0.0)?;
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|s| s.xi <= ORIGIN_FIT_SPAN * xi0 && s.f > 0.0)
        .map(|s| (s.xi.ln(), s.f.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// First local minimum of `x` after the first local maximum: where a profile
/// rising from the origin comes back down closest to zero.
pub fn descent_minimum(params: &Params, trace: &OrbitTrace) -> Option<InterfacePass> {
    let xs: Vec<f64> = trace
        .states
        .iter()
        .map(|s| {
            if s.chart == Chart::Upper && s.coords[0] > 0.0 {
                interface_distance(params, s).1
            } else {
                f64::NAN
            }
        })
        .collect();
    let peak = (1..xs.len()).find(|&i| xs[i] < xs[i - 1])? - 1;
    let index = (peak + 1..xs.len())
        .find(|&i| i + 1 == xs.len() || !(xs[i + 1] < xs[i]))?;
    let (distance, x) = interface_distance(params, &trace.states[index]);
    Some(InterfacePass {
        index,
        distance,
        x,
        eta: trace.states[index].xi(),
    })
}

/// Bisection on `k` between an `A0` and a `C0` end until the width is `tol * k`.
pub fn refine_b0(params: &Params, bracket: (f64, f64), cfg: &IntegrationConfig, tol: f64) -> Result<B0Refinement> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
    }
    let opts = OrbitOptions {
        interface_band: None,
        ..OrbitOptions::default()
    };
    let classify = |k: f64| classify_from_p0_with(params, k, cfg, &opts);
    let (mut lo, mut hi) = bracket;
    let (mut t_lo, mut tr_lo) = classify(lo)?;
    let (mut t_hi, mut tr_hi) = classify(hi)?;
    let band = InterfaceBand::default();
    let side = |c: TerminalClass| matches!(c, TerminalClass::EntersPgamma0 | TerminalClass::EntersQ3);
    if !(side(t_lo.class) && side(t_hi.class) && t_lo.class != t_hi.class) {
        return Err(Error::Bracket(format!(
            "k = {lo} gives {:?} and k = {hi} gives {:?}; need one A0 and one C0 end",
            t_lo.class, t_hi.class
        )));
    }
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (t, tr) = classify(mid)?;
        if t.class == TerminalClass::Unresolved {
            // stalled on the interface: this member is critical at the working precision
            if interface_pass(params, &tr, band.distance).is_some_and(|p| p.x <= band.x_max) {
                return Ok(finish_b0(params, (lo, hi), mid, (t_lo, t_hi), tr, None));
            }
        }
        if t.class == t_lo.class {
            lo = mid;
            t_lo = t;
            tr_lo = tr;
        } else if t.class == t_hi.class {
            hi = mid;
            t_hi = t;
            tr_hi = tr;
        } else {
            return Err(Error::Certification(format!("k = {mid} resolves to {:?}", t.class)));
        }
    }
    let line_pass = [&tr_lo, &tr_hi]
        .into_iter()
        .filter_map(|tr| interface_pass(params, tr, band.distance))
        .min_by(|a, b| a.x.total_cmp(&b.x));
    // the profile comes from the tail side; a sign change reaches f = 0 for any k
    let (k, trace) = if t_lo.class == TerminalClass::EntersPgamma0 {
        (lo, tr_lo)
    } else {
        (hi, tr_hi)
    };
    Ok(finish_b0(params, (lo, hi), k, (t_lo, t_hi), trace, line_pass))
}

fn finish_b0(
    params: &Params,
    bracket: (f64, f64),
    k: f64,
    sides: (Terminal, Terminal),
    trace: OrbitTrace,
    line_pass: Option<InterfacePass>,
) -> B0Refinement {
    let pass = descent_minimum(params, &trace);
    let line_pass = line_pass.or_else(|| interface_pass(params, &trace, InterfaceBand::default().distance));
    let profile: Vec<ProfileSample> = match pass {
        Some(p) => trace
            .states
            .iter()
            .take(p.index + 1)
            .filter_map(|s| crate::model::profile_of(params, s))
            .collect(),
        None => trace.profile.clone(),
    };
    let fitted_exponent = fit_origin_exponent(&profile);
    B0Refinement {
        bracket,
        k,
        sides,
        pass,
        line_pass,
        profile,
        fitted_exponent,
        trace,
    }
}

/// The two indicators bounding the trapping region of the plane `Z = 0`.
///
/// Both are non-negative inside: `(m-1) Y - 2 X` and
/// `-m Y^2 - beta Y + alpha X - m X Y` (the curve where `dY/dX = 0`).
pub fn z0_trap_indicators(params: &Params, x: f64, y: f64) -> (f64, f64) {
    let m = params.m;
    (
        (m - 1.0) * y - 2.0 * x,
        -m * y * y - params.beta * y + params.alpha * x - m * x * y,
    )
}

/// Slack allowed on the trap indicators before a violation is reported.
pub const TRAP_SLACK: f64 = 1e-12;

/// Integrates the `P0 -> P2` connection inside the invariant plane `Z = 0`.
pub fn check_z0_connection(params: &Params, cfg: &IntegrationConfig) -> Result<OrbitTrace> {
    check_z0_connection_from(params, None, cfg)
}

/// As [`check_z0_connection`], optionally from a given `(X, Y, ln xi)`.
pub fn check_z0_connection_from(params: &Params, start: Option<[f64; 3]>, cfg: &IntegrationConfig) -> Result<OrbitTrace> {
    let Params { m, alpha, beta, .. } = *params;
    let v0 = start.unwrap_or_else(|| {
        // P0 starter with k = 0
        let x = 1e-7;
        let h = -(m * alpha * (alpha + beta + 1.0) / (beta * beta)) * x * x;
        [x, (alpha * x + h) / beta, 0.0]
    });
    let target = [params.x_p2(), params.y_p2()];
    let mut violation: Option<(usize, String)> = None;
    let mut inside = {
        let (a, b) = z0_trap_indicators(params, v0[0], v0[1]);
        a >= 0.0 && b >= 0.0
    };
    let mut count = 0usize;
    let (samples, entered) = integrate_plane_z0(params, [v0[0], v0[1]], v0[2], cfg, target, |v| {
        count += 1;
        let (a, b) = z0_trap_indicators(params, v[0], v[1]);
        if inside {
            let scale = v[0].abs().max(v[1].abs()).max(1e-300);
            if a < -TRAP_SLACK * scale.max(1.0) || b < -TRAP_SLACK * (scale * scale).max(1.0) {
                violation = Some((count, format!("indicators ({a:e}, {b:e}) at X = {}, Y = {}", v[0], v[1])));
                return false;
            }
        } else {
            inside = a >= 0.0 && b >= 0.0;
        }
        true
    })?;
    let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    if let Some((i, reason)) = violation {
        return Err(Error::TrapViolation {
            t: times.get(i).copied().unwrap_or(f64::NAN),
            reason,
        });
    }
    let states: Vec<PhaseState> = samples.iter().map(|(_, v)| PhaseState::upper(v[0], v[1], 0.0, v[2])).collect();
    let last = *states.last().expect("at least the start");
    let t_end = *times.last().expect("at least the start");
    let terminal = if entered {
        EventKind::EnterBall(BallTarget::P2)
    } else {
        EventKind::ArcBudget
    };
    let events = vec![Event {
        kind: terminal,
        time: t_end,
        bracket: (t_end, t_end),
        state: last,
        crossing_sign: 0.0,
    }];
    Ok(OrbitTrace::from_states(
        params,
        Chart::Upper,
        Direction::Forward,
        times,
        states,
        events,
        terminal,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_exponents;

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-2, 1e2, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-2).abs() < 1e-16 && (g[4] - 1e2).abs() < 1e-12);
        assert!((g[2] - 1.0).abs() < 1e-14);
        assert!(log_grid(1.0, 2.0, 0).is_empty());
        assert_eq!(log_grid(3.0, 9.0, 1), vec![3.0]);
    }

    #[test]
    fn origin_exponent_of_power_law() {
        let s: Vec<_> = (0..20)
            .map(|i| {
                let xi = 0.1 * (1.0 + 0.01 * i as f64);
                ProfileSample::new(xi, 4.0 * xi.powf(1.5), 6.0 * xi.sqrt(), 3.0)
            })
            .collect();
        assert!((fit_origin_exponent(&s).unwrap() - 1.5).abs() < 1e-10);
        assert!(fit_origin_exponent(&s[..2]).is_none());
    }

    #[test]
    fn trap_indicators_vanish_on_their_curves() {
        let p = derive_exponents(3.0, 2.0, 1.0).unwrap();
        let (a, b) = z0_trap_indicators(&p, p.x_p2(), p.y_p2());
        assert!(a.abs() < 1e-14 && b.abs() < 1e-14);
        let (a, _) = z0_trap_indicators(&p, 0.0, 0.1);
        assert!(a > 0.0);
    }

    #[test]
    fn p2_orbit_at_reference_point_enters_pgamma0() {
        let p = derive_exponents(3.0, 2.0, 1.0).unwrap();
        let (t, _) = classify_from_p2(&p, &IntegrationConfig::default()).unwrap();
        assert_eq!(t.class, TerminalClass::EntersPgamma0);
    }
}
