//! Backward shooting from an interface point.
//!
//! For every `eta > 0` there is exactly one profile vanishing at `eta` with
//! `(f^m)'(eta) = 0`. Following it toward `xi = 0` in reverse lower-chart
//! time ends in one of a few ways, and the value of `eta` where the outcome
//! switches from "positive at the origin with negative slope" to something
//! else carries a good profile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_with, Direction, EventKind, IntegrationConfig, OrbitTrace, Stops};
use crate::local_analysis::{make_starter, PointId};
use crate::model::{Params, ProfileSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShotClass {
    /// `f(0) = a > 0`, `f'(0) < 0`.
    AMinus,
    /// `f(0) = a > 0`, `f'(0) = 0` within `p1_tol`.
    GoodP1,
    GoodP2Case1,
    GoodP2Case2,
    /// `f(0) = a > 0`, `f'(0) > 0`. Sits between the two sets that matter.
    PositiveSlope,
    /// Sign change at some `theta` in `(0, eta)`.
    APlus,
    Unresolved,
}

impl ShotClass {
    pub fn is_good(self) -> bool {
        matches!(self, ShotClass::GoodP1 | ShotClass::GoodP2Case1 | ShotClass::GoodP2Case2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProfileKind {
    P1,
    P2Case1,
    P2Case2,
}

impl ProfileKind {
    pub fn of(class: ShotClass) -> Option<Self> {
        match class {
            ShotClass::GoodP1 => Some(ProfileKind::P1),
            ShotClass::GoodP2Case1 => Some(ProfileKind::P2Case1),
            ShotClass::GoodP2Case2 => Some(ProfileKind::P2Case2),
            _ => None,
        }
    }

    /// `f(0) = 0` kinds.
    pub fn vanishes_at_origin(self) -> bool {
        self != ProfileKind::P1
    }
}

/// Decade of `xi` on which a trace follows one of the two origin behaviours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginFit {
    pub case1: bool,
    pub xi_lo: f64,
    pub xi_hi: f64,
    /// Mean of `d ln f / d ln xi` over the window.
    pub exponent: f64,
    /// `X = xi^{-2} f^{m-1}` at the lower end.
    pub x_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    /// Offset of the interface starter.
    pub delta: f64,
    /// Band on `y(0) = f^{m-2} f'(0)` for a (P1) certificate.
    pub p1_tol: f64,
    /// Relative band for the origin exponents and the `X` limit.
    pub case_band: f64,
    /// Largest upper-chart distance to `P0` accepted as a pass through it.
    pub p0_band: f64,
    /// The reverse run stops at `xi = xi_floor_rel * eta`.
    pub xi_floor_rel: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            delta: 1e-7,
            p1_tol: 1e-4,
            case_band: 0.1,
            p0_band: 1e-2,
            xi_floor_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootOutcome {
    pub eta: f64,
    pub class: ShotClass,
    /// Raw class from the terminal event alone, used to keep brackets.
    pub endpoint: ShotClass,
    pub a0: Option<f64>,
    /// `f^{m-2} f'` at the origin.
    pub y0: Option<f64>,
    pub theta: Option<f64>,
    pub origin_fit: Option<OriginFit>,
    pub p0_approach: Option<P0Approach>,
    #[serde(skip)]
    pub trace: OrbitTrace,
}

impl ShootOutcome {
    fn record(&self) -> ShotRecord {
        ShotRecord {
            eta: self.eta,
            class: self.class,
            a0: self.a0,
            theta: self.theta,
        }
    }
}

/// Flat JSON form of an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub eta: f64,
    pub class: ShotClass,
    pub a0: Option<f64>,
    pub theta: Option<f64>,
}

/// Searches the trace for a decade of `xi` matching an origin behaviour.
pub fn origin_fit(params: &Params, trace: &OrbitTrace, band: f64) -> Option<OriginFit> {
    let m = params.m;
    let e1 = 2.0;
    let e2 = (m - 1.0) * params.decay_exponent();
    let xp2 = params.x_p2();
    // (xi, slope of ln x, X)
    let pts: Vec<(f64, f64, f64)> = trace
        .states
        .iter()
        .filter_map(|s| {
            let [x, y, z] = s.coords;
            (x > 0.0 && z > 0.0).then(|| (z, (m - 1.0) * y * z / x, x / (z * z)))
        })
        .collect();
    let mut best: Option<OriginFit> = None;
    for case1 in [true, false] {
        let target = if case1 { e1 } else { e2 };
        let ok = |&(_, s, xx): &(f64, f64, f64)| {
            (s / target - 1.0).abs() <= band && (!case1 || (xx / xp2 - 1.0).abs() <= band)
        };
        let mut i = 0;
        while i < pts.len() {
            if !ok(&pts[i]) {
                i += 1;
                continue;
            }
            let start = i;
            while i < pts.len() && ok(&pts[i]) {
                i += 1;
            }
            let run = &pts[start..i];
            let hi = run.iter().map(|p| p.0).fold(0.0, f64::max);
            let lo = run.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            if hi >= 10.0 * lo && best.map_or(true, |b| lo < b.xi_lo) {
                let last = run.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
                best = Some(OriginFit {
                    case1,
                    xi_lo: lo,
                    xi_hi: hi,
                    exponent: run.iter().map(|p| p.1).sum::<f64>() / (run.len() as f64 * (m - 1.0)),
                    x_upper: last.2,
                });
            }
        }
    }
    best
}

/// Closest pass of a backward trace to the upper-chart point `P0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P0Approach {
    pub xi: f64,
    /// Upper-chart `(X, Y, Z)` where `f` is smallest.
    pub upper: [f64; 3],
    /// Largest `d ln f / d ln xi` on the way in.
    pub exponent: f64,
}

/// Upper-chart state at the minimum of `f` along an `A_MINUS` trace.
pub fn p0_approach(params: &Params, trace: &OrbitTrace) -> Option<P0Approach> {
    // first local minimum of x after its first local maximum
    let xs: Vec<f64> = trace.states.iter().map(|s| s.coords[0]).collect();
    let top = (1..xs.len()).find(|&i| xs[i] < xs[i - 1])? - 1;
    let i = (top + 1..xs.len()).find(|&i| i + 1 < xs.len() && xs[i + 1] > xs[i])?;
    let s = &trace.states[i];
    let [x, y, z] = s.coords;
    if !(x > 0.0 && z > 0.0) {
        return None;
    }
    let exponent = trace.states[top..=i]
        .iter()
        .filter(|s| s.coords[0] > 0.0 && s.coords[2] > 0.0)
        .map(|s| s.coords[1] * s.coords[2] / s.coords[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Some(P0Approach {
        xi: z,
        upper: [x / (z * z), y / z, z.powf(params.sigma) * x.powf(params.q())],
        exponent: exponent.max(0.0),
    })
}

fn unresolved(eta: f64, trace: OrbitTrace) -> ShootOutcome {
    ShootOutcome {
        eta,
        class: ShotClass::Unresolved,
        endpoint: ShotClass::Unresolved,
        a0: None,
        y0: None,
        theta: None,
        origin_fit: None,
        p0_approach: None,
        trace,
    }
}

pub fn shoot_from_interface(params: &Params, eta: f64, cfg: &IntegrationConfig) -> Result<ShootOutcome> {
    shoot_from_interface_with(params, eta, cfg, &ShootOptions::default())
}

/// Traces the profile with interface at `eta` back toward `xi = 0` and classifies it.
pub fn shoot_from_interface_with(
    params: &Params,
    eta: f64,
    cfg: &IntegrationConfig,
    opts: &ShootOptions,
) -> Result<ShootOutcome> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta must be > 0, got {eta}")));
    }
    let starter = make_starter(params, PointId::InterfaceLine(eta), None, opts.delta)?;
    let stops = Stops {
        z_zero: true,
        xi_floor: Some(opts.xi_floor_rel * eta),
        ..Stops::default()
    };
    let trace = match integrate_with(params, &starter.state, Direction::Reverse, cfg, &[], &stops) {
        Ok(t) => t,
        Err(Error::StepSizeUnderflow { .. }) => {
            // keep a stub trace so callers still see the start
            let t = integrate_with(
                params,
                &starter.state,
                Direction::Reverse,
                &IntegrationConfig { max_steps: 1, ..*cfg },
                &[],
                &stops,
            )?;
            return Ok(unresolved(eta, t));
        }
        Err(e) => return Err(e),
    };

    let m = params.m;
    let [x, mut y, z] = trace.last().coords;
    if trace.terminal == EventKind::XiFloor {
        y = extrapolate_to_origin(&trace).unwrap_or(y);
    }
    let fit = origin_fit(params, &trace, opts.case_band);
    let from_x = |x: f64| x.max(0.0).powf(1.0 / (m - 1.0));
    let (endpoint, a0, y0, theta) = match trace.terminal {
        EventKind::ZZero | EventKind::XiFloor => {
            let class = if y < 0.0 { ShotClass::AMinus } else { ShotClass::PositiveSlope };
            (class, Some(from_x(x)), Some(y), None)
        }
        EventKind::DivergeYPlus => (ShotClass::APlus, None, None, Some(z)),
        _ => return Ok(unresolved(eta, trace)),
    };
    let class = match (endpoint, fit) {
        (_, Some(f)) if f.case1 => ShotClass::GoodP2Case1,
        (_, Some(_)) => ShotClass::GoodP2Case2,
        (ShotClass::AMinus | ShotClass::PositiveSlope, _) if y.abs() <= opts.p1_tol => ShotClass::GoodP1,
        (c, _) => c,
    };
    Ok(ShootOutcome {
        eta,
        class,
        endpoint,
        a0,
        y0,
        theta,
        origin_fit: fit,
        p0_approach: if endpoint == ShotClass::AMinus { p0_approach(params, &trace) } else { None },
        trace,
    })
}

/// Linear extrapolation of the lower-chart `y` to `z = 0` from the last two
/// stored states; `y` is smooth in `xi` at the origin when `f(0) > 0`.
fn extrapolate_to_origin(trace: &OrbitTrace) -> Option<f64> {
    let n = trace.states.len();
    let (a, b) = (trace.states.get(n.checked_sub(2)?)?, trace.states.get(n - 1)?);
    let ([_, ya, za], [_, yb, zb]) = (a.coords, b.coords);
    (za != zb).then(|| yb - zb * (ya - yb) / (za - zb))
}

/// Outcomes of a scan over `eta`, with the inferred bracket.
#[derive(Debug, Clone, Serialize)]
pub struct EtaScan {
    pub outcomes: Vec<ShootOutcome>,
    /// Largest `A_MINUS` eta and the first `A_PLUS` eta above it.
    pub bracket: Option<(f64, f64)>,
    /// Every adjacent pair of grid points whose endpoint classes differ.
    pub transitions: Vec<(f64, f64)>,
}

impl EtaScan {
    pub fn records(&self) -> Vec<ShotRecord> {
        self.outcomes.iter().map(ShootOutcome::record).collect()
    }
}

pub fn scan_eta(params: &Params, grid: &[f64], cfg: &IntegrationConfig) -> Result<EtaScan> {
    scan_eta_with(params, grid, cfg, &ShootOptions::default())
}

pub fn scan_eta_with(params: &Params, grid: &[f64], cfg: &IntegrationConfig, opts: &ShootOptions) -> Result<EtaScan> {
    if grid.iter().any(|&e| !(e > 0.0)) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("eta grid must be positive and sorted".into()));
    }
    let outcomes = grid
        .par_iter()
        .map(|&eta| shoot_from_interface_with(params, eta, cfg, opts))
        .collect::<Result<Vec<_>>>()?;
    let transitions = outcomes
        .windows(2)
        .filter(|w| w[0].endpoint != w[1].endpoint)
        .map(|w| (w[0].eta, w[1].eta))
        .collect();
    let bracket = outcomes
        .iter()
        .rposition(|o| o.endpoint == ShotClass::AMinus)
        .and_then(|i| {
            outcomes[i + 1..]
                .iter()
                .find(|o| o.endpoint == ShotClass::APlus)
                .map(|o| (outcomes[i].eta, o.eta))
        });
    Ok(EtaScan {
        outcomes,
        bracket,
        transitions,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodProfile {
    pub params: Params,
    pub eta0: f64,
    pub kind: ProfileKind,
    pub samples: Vec<ProfileSample>,
    pub a0: Option<f64>,
    pub bracket: (f64, f64),
    pub origin_fit: Option<OriginFit>,
    pub p0_approach: Option<P0Approach>,
}

impl GoodProfile {
    /// `xi, f, df, fm_prime` rows, increasing in `xi`.
    pub fn to_csv(&self) -> String {
        crate::model::profile_csv(&self.samples)
    }
}

/// Expands `(0.1, 20)` geometrically until the ends are `A_MINUS` and `A_PLUS`.
pub fn default_bracket(params: &Params, cfg: &IntegrationConfig, opts: &ShootOptions) -> Result<(f64, f64)> {
    let mut lo = 0.1;
    let mut hi = 20.0;
    for _ in 0..12 {
        if shoot_from_interface_with(params, lo, cfg, opts)?.endpoint == ShotClass::AMinus {
            break;
        }
        lo /= 2.0;
    }
    for _ in 0..12 {
        if shoot_from_interface_with(params, hi, cfg, opts)?.endpoint == ShotClass::APlus {
            break;
        }
        hi *= 2.0;
    }
    Ok((lo, hi))
}

pub fn bisect_eta(params: &Params, bracket: (f64, f64), cfg: &IntegrationConfig, tol_eta: f64) -> Result<GoodProfile> {
    bisect_eta_with(params, bracket, cfg, tol_eta, &ShootOptions::default())
}

/// Bisection on `eta` keeping an `A_MINUS` low end, down to width `tol_eta`.
pub fn bisect_eta_with(
    params: &Params,
    bracket: (f64, f64),
    cfg: &IntegrationConfig,
    tol_eta: f64,
    opts: &ShootOptions,
) -> Result<GoodProfile> {
    if !(tol_eta > 0.0) {
        return Err(Error::InvalidInput(format!("tol_eta must be > 0, got {tol_eta}")));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Bracket(format!("need 0 < eta_lo < eta_hi, got ({lo}, {hi})")));
    }
    let shoot = |eta: f64| -> Result<ShootOutcome> {
        let o = shoot_from_interface_with(params, eta, cfg, opts)?;
        if o.endpoint != ShotClass::Unresolved {
            return Ok(o);
        }
        shoot_from_interface_with(params, eta, &cfg.tightened(10.0), opts)
    };
    let mut out_lo = shoot(lo)?;
    let mut out_hi = shoot(hi)?;
    if out_lo.endpoint != ShotClass::AMinus || out_hi.endpoint != ShotClass::APlus {
        return Err(Error::Bracket(format!(
            "eta_lo = {lo} gives {:?} and eta_hi = {hi} gives {:?}; need A_MINUS and A_PLUS",
            out_lo.endpoint, out_hi.endpoint
        )));
    }
    // near the P1/P2 switch y(0) is steep in eta and the PositiveSlope window
    // is thin, so keep halving past tol_eta until the ends carry a certificate
    let certified = |lo: &ShootOutcome, hi: &ShootOutcome| {
        let in_band = |o: &ShootOutcome| o.y0.is_some_and(|y| y.abs() <= opts.p1_tol);
        let through_p0 = lo
            .p0_approach
            .is_some_and(|a| a.upper.iter().all(|c| c.abs() <= opts.p0_band));
        lo.origin_fit.is_some()
            || hi.origin_fit.is_some()
            || in_band(lo)
            || (hi.endpoint == ShotClass::PositiveSlope && in_band(hi))
            || (hi.endpoint == ShotClass::APlus && through_p0)
    };
    while hi - lo > tol_eta || !certified(&out_lo, &out_hi) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let o = shoot(mid)?;
        // sign of y(0) decides inside the GOOD_P1 tolerance window
        let below = o.endpoint == ShotClass::AMinus || (o.endpoint == ShotClass::GoodP1 && o.y0.is_some_and(|y| y < 0.0));
        if below {
            lo = mid;
            out_lo = o;
        } else {
            hi = mid;
            out_hi = o;
        }
    }
    let mid = 0.5 * (lo + hi);
    let out_mid = shoot(mid)?;

    let fit = [&out_mid, &out_lo, &out_hi]
        .iter()
        .filter_map(|o| o.origin_fit)
        .min_by(|a, b| a.xi_lo.total_cmp(&b.xi_lo));
    // the end closer to y(0) = 0 carries the P1 candidate
    let y_of = |o: &ShootOutcome| o.y0.map_or(f64::INFINITY, f64::abs);
    if out_hi.endpoint == ShotClass::PositiveSlope && y_of(&out_hi) <= opts.p1_tol && y_of(&out_hi) < y_of(&out_lo) {
        std::mem::swap(&mut out_lo, &mut out_hi);
    }
    let y_lo = out_lo.y0.unwrap_or(f64::INFINITY);
    let p1 = y_lo.abs() <= opts.p1_tol && out_lo.a0.is_some_and(|a| a > 0.0);
    let near_p0 = out_lo
        .p0_approach
        .filter(|a| a.upper.iter().all(|c| c.abs() <= opts.p0_band));
    let kind = match (fit, p1) {
        (Some(f), false) => {
            if f.case1 {
                ProfileKind::P2Case1
            } else {
                ProfileKind::P2Case2
            }
        }
        (None, true) => {
            // same call with half the starter offset
            let half = ShootOptions {
                delta: opts.delta / 2.0,
                ..*opts
            };
            let check = shoot_from_interface_with(params, out_lo.eta, cfg, &half)?;
            if check.y0.is_some_and(|y| y.abs() <= opts.p1_tol) {
                ProfileKind::P1
            } else {
                return Err(Error::AmbiguousLimit(format!(
                    "y(0) = {y_lo:e} at eta = {} but {:?} with half the starter offset",
                    out_lo.eta, check.y0
                )));
            }
        }
        (None, false) if out_hi.endpoint == ShotClass::APlus && near_p0.is_some() => ProfileKind::P2Case2,
        _ => {
            return Err(Error::AmbiguousLimit(format!(
                "bracket ({lo}, {hi}): low end y(0) = {y_lo:e}, a0 = {:?}, pass by P0 {:?}; high end {:?} theta = {:?}",
                out_lo.a0, out_lo.p0_approach, out_hi.endpoint, out_hi.theta
            )))
        }
    };

    // keep the part of the trace that follows the good profile
    let (samples, a0) = match (kind, fit, near_p0) {
        (ProfileKind::P1, _, _) => (out_lo.trace.profile.clone(), out_lo.a0),
        (_, Some(f), _) => {
            let src = [&out_mid, &out_lo, &out_hi]
                .into_iter()
                .find(|o| o.origin_fit == Some(f))
                .expect("fit came from one of the three traces");
            let s = src.trace.profile.iter().copied().filter(|s| s.xi >= f.xi_lo).collect();
            (s, Some(0.0))
        }
        (_, None, Some(a)) => {
            let s = out_lo.trace.profile.iter().copied().filter(|s| s.xi >= a.xi).collect();
            (s, Some(0.0))
        }
        _ => unreachable!("P2 kinds come with a fit or a pass by P0"),
    };
    Ok(GoodProfile {
        params: *params,
        eta0: mid,
        kind,
        samples,
        a0,
        bracket: (lo, hi),
        origin_fit: fit,
        p0_approach: near_p0,
    })
}

/// Maps a good-profile kind back to its shot class.
pub fn class_of(kind: ProfileKind) -> ShotClass {
    match kind {
        ProfileKind::P1 => ShotClass::GoodP1,
        ProfileKind::P2Case1 => ShotClass::GoodP2Case1,
        ProfileKind::P2Case2 => ShotClass::GoodP2Case2,
    }
}
