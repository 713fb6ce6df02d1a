//! Adaptive integration of the chart systems with dense output, passive
//! crossing monitors and terminal events.

pub mod stepper;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{profile_of, raw_field, raw_jacobian, Chart, Params, PhaseState, ProfileSample};
use stepper::{Control, RunEnd, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Budget of system time.
    pub max_arc: f64,
    pub attractor_radius: f64,
    pub divergence_cap: f64,
    /// Width (relative to `max(1, |t|)`) of the final bisection bracket.
    pub event_refine_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_step: 1e13,
            max_arc: 1e16,
            attractor_radius: 1e-4,
            divergence_cap: 1e6,
            event_refine_tol: 1e-12,
            max_steps: 400_000,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("max_arc", self.max_arc),
            ("attractor_radius", self.attractor_radius),
            ("event_refine_tol", self.event_refine_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.attractor_radius >= 1e-2 {
            return Err(Error::Config(format!(
                "attractor_radius must be < 1e-2, got {}",
                self.attractor_radius
            )));
        }
        if !(self.divergence_cap >= 1e3) {
            return Err(Error::Config(format!(
                "divergence_cap must be >= 1e3, got {}",
                self.divergence_cap
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Same config with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }
}

/// Upper-chart equilibria that can terminate an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallTarget {
    Pgamma0,
    P2,
    P0,
}

impl BallTarget {
    pub fn center(self, params: &Params) -> [f64; 3] {
        match self {
            BallTarget::Pgamma0 => [0.0, 0.0, params.gamma0()],
            BallTarget::P2 => [params.x_p2(), params.y_p2(), 0.0],
            BallTarget::P0 => [0.0; 3],
        }
    }
}

/// Upper-chart planes watched by passive monitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlaneId {
    /// `Z = E - D Y`.
    Barrier1,
    /// `X = B Y + C`.
    Barrier2,
    /// `Y = -Y0`.
    YMinusY0,
    /// `Y = alpha / m`.
    YAlphaOverM,
}

/// Coefficients `(D, E)` of the first barrier plane.
pub fn barrier1_coeffs(m: f64) -> (f64, f64) {
    (2.0 * m * (m + 1.0).powi(2) / (m - 1.0), 2.0 * (m + 1.0) / (m - 1.0))
}

/// Coefficients `(B, C)` of the second barrier plane.
pub fn barrier2_coeffs(m: f64) -> (f64, f64) {
    let den = 2.0 * m * m + 5.0 * m + 1.0;
    (m * (m - 1.0) / den, (2.0 * m + 1.0) * (m - 1.0) / (2.0 * m * den))
}

impl PlaneId {
    /// Signed indicator, positive on the side the normal points to.
    pub fn indicator(self, params: &Params, c: &[f64; 3]) -> f64 {
        let [x, y, z] = *c;
        match self {
            PlaneId::Barrier1 => {
                let (d, e) = barrier1_coeffs(params.m);
                z + d * y - e
            }
            PlaneId::Barrier2 => {
                let (b, cc) = barrier2_coeffs(params.m);
                x - b * y - cc
            }
            PlaneId::YMinusY0 => y + params.y0(),
            PlaneId::YAlphaOverM => y - params.alpha / params.m,
        }
    }

    /// Normal vector of the plane, matching [`PlaneId::indicator`].
    pub fn normal(self, params: &Params) -> [f64; 3] {
        match self {
            PlaneId::Barrier1 => [0.0, barrier1_coeffs(params.m).0, 1.0],
            PlaneId::Barrier2 => [1.0, -barrier2_coeffs(params.m).0, 0.0],
            PlaneId::YMinusY0 | PlaneId::YAlphaOverM => [0.0, 1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target")]
pub enum EventKind {
    XZero,
    YZero,
    ZZero,
    ZAttainsGamma0,
    EnterBall(BallTarget),
    /// `Y -> -inf`: the stable node Q3.
    DivergeYMinus,
    /// `Y -> +inf`: the node Q2 (or a backward sign change in the lower chart).
    DivergeYPlus,
    DivergeX,
    /// `Z` beyond the cap; orbits heading to Q4 carry no profiles.
    DivergeZ,
    PlaneCross(PlaneId),
    /// `xi` dropped below the requested floor.
    XiFloor,
    /// Within the band around the lower-chart interface line `m y + beta z = 0`.
    NearInterface,
    ArcBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    pub bracket: (f64, f64),
    pub state: PhaseState,
    /// Sign of the indicator's change across the event (0 for non-crossing events).
    pub crossing_sign: f64,
}

/// Band around the interface line used to stop forward orbits that enter P1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceBand {
    /// Distance to the line `m y + beta z = 0` in the `(y, z)` plane.
    pub distance: f64,
    /// Largest `x = f^{m-1}` accepted as "on the interface".
    pub x_max: f64,
}

impl Default for InterfaceBand {
    fn default() -> Self {
        Self {
            distance: 1e-3,
            x_max: 1e-8,
        }
    }
}

/// Terminal conditions beyond divergence and the arc budget.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stops {
    pub balls: Vec<BallTarget>,
    /// Stop when the third coordinate crosses zero.
    pub z_zero: bool,
    pub xi_floor: Option<f64>,
    pub near_interface: Option<InterfaceBand>,
}

impl Stops {
    /// Defaults for a chart: the tail attractor in the upper chart, `z = 0` in the lower one.
    pub fn for_chart(params: &Params, chart: Chart) -> Self {
        match chart {
            Chart::Upper if params.p > 1.0 => Self {
                balls: vec![BallTarget::Pgamma0],
                ..Self::default()
            },
            Chart::Lower => Self {
                z_zero: true,
                ..Self::default()
            },
            _ => Self::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitTrace {
    pub params: Params,
    pub chart: Chart,
    pub direction: Direction,
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub events: Vec<Event>,
    pub terminal: EventKind,
    pub profile: Vec<ProfileSample>,
    #[serde(skip)]
    segments: Vec<Segment<4>>,
}

impl OrbitTrace {
    /// A trace without dense output, built from already computed states.
    pub(crate) fn from_states(
        params: &Params,
        chart: Chart,
        direction: Direction,
        times: Vec<f64>,
        states: Vec<PhaseState>,
        events: Vec<Event>,
        terminal: EventKind,
    ) -> Self {
        let profile = states.iter().filter_map(|s| profile_of(params, s)).collect();
        Self {
            params: *params,
            chart,
            direction,
            times,
            states,
            events,
            terminal,
            profile,
            segments: Vec::new(),
        }
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("a trace holds at least its start")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("a trace holds at least its start")
    }

    pub fn terminal_event(&self) -> Option<&Event> {
        self.events.iter().rev().find(|e| e.kind == self.terminal)
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Dense-output state at integration time `t` (inside the traced range).
    pub fn state_at(&self, t: f64) -> Option<PhaseState> {
        let i = self.segments.partition_point(|s| s.t1() < t);
        let seg = self.segments.get(i)?;
        if t < seg.t0 {
            return None;
        }
        Some(make_state(self.chart, &seg.eval(t)))
    }

    /// Writes the trace as CSV: `t,chart,c1,c2,c3,logxi,xi,f,df`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let out = self.to_csv();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// `t, chart, c1, c2, c3, logxi, xi, f, df` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,chart,c1,c2,c3,logxi,xi,f,df\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            let prof = profile_of(&self.params, s);
            let (f, df) = prof.map(|p| (p.f, p.df)).unwrap_or((0.0, f64::NAN));
            out.push_str(&format!(
                "{t},{},{},{},{},{},{},{f},{df}\n",
                s.chart.name(),
                s.coords[0],
                s.coords[1],
                s.coords[2],
                s.logxi,
                s.xi()
            ));
        }
        out
    }
}

fn make_state(chart: Chart, v: &[f64; 4]) -> PhaseState {
    match chart {
        Chart::Lower => PhaseState {
            chart,
            coords: [v[0], v[1], v[2]],
            logxi: if v[2] > 0.0 { v[2].ln() } else { f64::NEG_INFINITY },
        },
        _ => PhaseState {
            chart,
            coords: [v[0], v[1], v[2]],
            logxi: v[3],
        },
    }
}

#[derive(Clone, Copy)]
enum Indicator {
    Coord(usize),
    Gamma0,
    Plane(PlaneId),
    LogXiBelow(f64),
}

impl Indicator {
    fn eval(self, params: &Params, chart: Chart, v: &[f64; 4]) -> f64 {
        match self {
            Indicator::Coord(i) => v[i],
            Indicator::Gamma0 => v[2] - params.gamma0(),
            Indicator::Plane(id) => id.indicator(params, &[v[0], v[1], v[2]]),
            Indicator::LogXiBelow(floor) => match chart {
                Chart::Lower => v[2] - floor,
                _ => v[3] - floor.ln(),
            },
        }
    }

    fn kind(self) -> EventKind {
        match self {
            Indicator::Coord(0) => EventKind::XZero,
            Indicator::Coord(1) => EventKind::YZero,
            Indicator::Coord(_) => EventKind::ZZero,
            Indicator::Gamma0 => EventKind::ZAttainsGamma0,
            Indicator::Plane(id) => EventKind::PlaneCross(id),
            Indicator::LogXiBelow(_) => EventKind::XiFloor,
        }
    }

    fn for_kind(kind: EventKind) -> Option<Self> {
        Some(match kind {
            EventKind::XZero => Indicator::Coord(0),
            EventKind::YZero => Indicator::Coord(1),
            EventKind::ZZero => Indicator::Coord(2),
            EventKind::ZAttainsGamma0 => Indicator::Gamma0,
            EventKind::PlaneCross(id) => Indicator::Plane(id),
            _ => return None,
        })
    }
}

/// Bisection on a segment's interpolant for a sign change of `g`.
fn bisect_segment<G: Fn(&[f64; 4]) -> f64>(seg: &Segment<4>, g: G, tol: f64) -> (f64, (f64, f64), [f64; 4]) {
    let (mut lo, mut hi) = (seg.t0, seg.t1());
    let g_lo0 = g(&seg.eval(lo));
    if g_lo0 == 0.0 {
        return (lo, (lo, lo), seg.eval(lo));
    }
    let width = tol * seg.t0.abs().max(1.0);
    let lo_positive = g_lo0 > 0.0;
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(&seg.eval(mid));
        if gm == 0.0 {
            return (mid, (mid, mid), seg.eval(mid));
        }
        if (gm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    (t, (lo, hi), seg.eval(t))
}

/// Refines the first sign change of `kind`'s indicator along the trace.
pub fn refine_event(trace: &OrbitTrace, kind: EventKind, tol: f64) -> Result<Event> {
    let ind = Indicator::for_kind(kind).ok_or_else(|| Error::NoSuchEvent(format!("{kind:?} has no indicator")))?;
    let params = &trace.params;
    let g = |v: &[f64; 4]| ind.eval(params, trace.chart, v);
    let to_vec = |s: &PhaseState| [s.coords[0], s.coords[1], s.coords[2], s.logxi];
    for (i, w) in trace.states.windows(2).enumerate() {
        let (a, b) = (g(&to_vec(&w[0])), g(&to_vec(&w[1])));
        if a == 0.0 {
            return Ok(Event {
                kind,
                time: trace.times[i],
                bracket: (trace.times[i], trace.times[i]),
                state: w[0],
                crossing_sign: 0.0,
            });
        }
        if b == 0.0 || (a > 0.0) != (b > 0.0) {
            let seg = trace
                .segments
                .get(i)
                .ok_or_else(|| Error::NoSuchEvent(format!("{kind:?}: trace lacks dense output")))?;
            let (t, bracket, v) = bisect_segment(seg, g, tol);
            return Ok(Event {
                kind,
                time: t,
                bracket,
                state: make_state(trace.chart, &v),
                crossing_sign: (b - a).signum(),
            });
        }
    }
    Err(Error::NoSuchEvent(format!("{kind:?}")))
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

/// Lower-chart `(x, y, z)` of a state in any chart (no domain checks).
fn lower_coords(s: &PhaseState) -> [f64; 3] {
    match s.chart {
        Chart::Lower => s.coords,
        _ => {
            let xi = s.logxi.exp();
            [s.coords[0] * xi * xi, s.coords[1] * xi, xi]
        }
    }
}

/// Whether the profile is decreasing at this state (`y < 0` in lower coordinates).
pub fn descending(s: &PhaseState) -> bool {
    lower_coords(s)[1] < 0.0
}

/// Distance of a state to the interface line, and its `x`.
pub fn interface_distance(params: &Params, s: &PhaseState) -> (f64, f64) {
    let [x, y, z] = lower_coords(s);
    let (m, b) = (params.m, params.beta);
    ((m * y + b * z).abs() / (m * m + b * b).sqrt(), x)
}

/// Integrates with the chart's default stops.
pub fn integrate(
    params: &Params,
    start: &PhaseState,
    dir: Direction,
    cfg: &IntegrationConfig,
    monitors: &[PlaneId],
) -> Result<OrbitTrace> {
    integrate_with(params, start, dir, cfg, monitors, &Stops::for_chart(params, start.chart))
}

/// Integrates `start` until a terminal event, the arc budget or the step budget.
pub fn integrate_with(
    params: &Params,
    start: &PhaseState,
    dir: Direction,
    cfg: &IntegrationConfig,
    monitors: &[PlaneId],
    stops: &Stops,
) -> Result<OrbitTrace> {
    cfg.validate()?;
    let chart = start.chart;
    if start.coords.iter().any(|v| !v.is_finite()) || start.coords[0] < 0.0 || start.coords[2] < 0.0 {
        return Err(Error::Chart {
            chart,
            reason: "start state outside the chart domain".into(),
        });
    }
    let sgn = dir.sign();
    let p = *params;
    let field = move |v: &[f64; 4]| -> [f64; 4] {
        let r = raw_field(&p, chart, &[v[0], v[1], v[2]]);
        let dl = if chart == Chart::Lower { 0.0 } else { r[3] };
        [sgn * r[0], sgn * r[1], sgn * r[2], sgn * dl]
    };
    let jacobian = move |v: &[f64; 4]| -> [[f64; 4]; 4] {
        let j = raw_jacobian(&p, chart, &[v[0], v[1], v[2]]);
        std::array::from_fn(|r| std::array::from_fn(|c| if chart == Chart::Lower && r == 3 { 0.0 } else { sgn * j[r][c] }))
    };

    let mut trace = OrbitTrace {
        params: *params,
        chart,
        direction: dir,
        times: vec![0.0],
        states: vec![*start],
        events: Vec::new(),
        terminal: EventKind::ArcBudget,
        profile: profile_of(params, start).into_iter().collect(),
        segments: Vec::new(),
    };

    let upper_like = chart != Chart::Lower;
    let ball_hit = |c: &[f64; 3], d: &[f64; 4]| -> Option<BallTarget> {
        if !upper_like || chart == Chart::BarZ {
            return None;
        }
        stops.balls.iter().copied().find(|b| {
            let ctr = b.center(params);
            if dist(c, &ctr) > cfg.attractor_radius {
                return false;
            }
            let inward: f64 = (0..3).map(|i| d[i] * (c[i] - ctr[i])).sum();
            inward <= 0.0
        })
    };

    let v0 = [start.coords[0], start.coords[1], start.coords[2], start.logxi];
    if let Some(b) = ball_hit(&start.coords, &field(&v0)) {
        trace.terminal = EventKind::EnterBall(b);
        trace.events.push(Event {
            kind: trace.terminal,
            time: 0.0,
            bracket: (0.0, 0.0),
            state: *start,
            crossing_sign: 0.0,
        });
        return Ok(trace);
    }

    let mut passive: Vec<Indicator> = vec![Indicator::Coord(1)];
    if chart == Chart::Upper && params.p > 1.0 {
        passive.push(Indicator::Gamma0);
    }
    if !stops.z_zero {
        passive.push(Indicator::Coord(2));
    }
    passive.push(Indicator::Coord(0));
    if chart == Chart::Upper {
        passive.extend(monitors.iter().map(|&id| Indicator::Plane(id)));
    }
    let mut terminal_crossings: Vec<Indicator> = Vec::new();
    if stops.z_zero {
        terminal_crossings.push(Indicator::Coord(2));
    }
    if let Some(floor) = stops.xi_floor {
        terminal_crossings.push(Indicator::LogXiBelow(floor));
    }

    let ctl = Control {
        rtol: cfg.rel_tol,
        atol: cfg.abs_tol,
        h_max: cfg.max_step,
        t_end: cfg.max_arc,
        max_steps: cfg.max_steps,
    };
    let cap = cfg.divergence_cap;
    let tol = cfg.event_refine_tol;
    let mut prev = v0;

    let outcome = stepper::run(&field, Some(&jacobian), v0, &ctl, |seg, v, d| {
        let t1 = seg.t1();
        let g = |ind: Indicator, v: &[f64; 4]| ind.eval(params, chart, v);

        for &ind in &passive {
            let (a, b) = (g(ind, &prev), g(ind, v));
            if a != 0.0 && (b == 0.0 || (a > 0.0) != (b > 0.0)) {
                let (t, bracket, sv) = bisect_segment(seg, |w| g(ind, w), tol);
                trace.events.push(Event {
                    kind: ind.kind(),
                    time: t,
                    bracket,
                    state: make_state(chart, &sv),
                    crossing_sign: (b - a).signum(),
                });
            }
        }
        trace.segments.push(*seg);

        for &ind in &terminal_crossings {
            let (a, b) = (g(ind, &prev), g(ind, v));
            if a > 0.0 && b <= 0.0 {
                let (t, bracket, sv) = bisect_segment(seg, |w| g(ind, w), tol);
                let st = make_state(chart, &sv);
                trace.terminal = ind.kind();
                trace.events.push(Event {
                    kind: ind.kind(),
                    time: t,
                    bracket,
                    state: st,
                    crossing_sign: -1.0,
                });
                trace.times.push(t);
                trace.states.push(st);
                trace.profile.extend(profile_of(params, &st));
                return true;
            }
        }
        prev = *v;

        let st = make_state(chart, v);
        trace.times.push(t1);
        trace.states.push(st);
        trace.profile.extend(profile_of(params, &st));

        let kind = if v[1].abs() > cap && d[1] * v[1] > 0.0 {
            Some(if v[1] < 0.0 {
                EventKind::DivergeYMinus
            } else {
                EventKind::DivergeYPlus
            })
        } else if v[0] > cap {
            Some(EventKind::DivergeX)
        } else if v[2] > cap {
            Some(EventKind::DivergeZ)
        } else if let Some(band) = stops.near_interface.filter(|_| upper_like) {
            let (dd, x) = interface_distance(params, &st);
            (dd <= band.distance && x <= band.x_max && descending(&st)).then_some(EventKind::NearInterface)
        } else {
            None
        };
        let kind = kind.or_else(|| ball_hit(&st.coords, d).map(EventKind::EnterBall));
        if let Some(kind) = kind {
            trace.terminal = kind;
            trace.events.push(Event {
                kind,
                time: t1,
                bracket: (t1, t1),
                state: st,
                crossing_sign: 0.0,
            });
            return true;
        }
        false
    });

    match outcome {
        Ok((RunEnd::Stopped, _, _)) => {}
        Ok((RunEnd::Budget | RunEnd::StepBudget, t, _)) => {
            trace.terminal = EventKind::ArcBudget;
            trace.events.push(Event {
                kind: EventKind::ArcBudget,
                time: t,
                bracket: (t, t),
                state: *trace.last(),
                crossing_sign: 0.0,
            });
        }
        Err(u) => {
            return Err(Error::StepSizeUnderflow {
                t: u.t,
                h: u.h,
                state: [u.y[0], u.y[1], u.y[2]],
            })
        }
    }
    Ok(trace)
}

/// Integrates the plane `{Z = 0}` of the upper system as a genuine 2D flow.
///
/// Returns `(t, [X, Y, ln xi])` samples and whether the ball around `target`
/// was entered before the budget ran out. `on_state` returning `false` aborts.
pub fn integrate_plane_z0(
    params: &Params,
    start: [f64; 2],
    logxi0: f64,
    cfg: &IntegrationConfig,
    target: [f64; 2],
    mut on_state: impl FnMut(&[f64; 3]) -> bool,
) -> Result<(Vec<(f64, [f64; 3])>, bool)> {
    cfg.validate()?;
    let p = *params;
    let field = move |v: &[f64; 3]| -> [f64; 3] {
        let (m, x, y) = (p.m, v[0], v[1]);
        [
            m * x * ((m - 1.0) * y - 2.0 * x),
            -m * y * y - p.beta * y + p.alpha * x - m * x * y,
            m * x,
        ]
    };
    let ctl = Control {
        rtol: cfg.rel_tol,
        atol: cfg.abs_tol,
        h_max: cfg.max_step,
        t_end: cfg.max_arc,
        max_steps: cfg.max_steps,
    };
    let v0 = [start[0], start[1], logxi0];
    let in_ball = |v: &[f64; 3]| ((v[0] - target[0]).powi(2) + (v[1] - target[1]).powi(2)).sqrt() <= cfg.attractor_radius;
    let mut out = vec![(0.0, v0)];
    if in_ball(&v0) {
        return Ok((out, true));
    }
    let mut entered = false;
    let mut aborted = false;
    let res = stepper::run_explicit(&field, v0, &ctl, |seg, v, _| {
        out.push((seg.t1(), *v));
        if !on_state(v) {
            aborted = true;
            return true;
        }
        if in_ball(v) {
            entered = true;
            return true;
        }
        false
    });
    if let Err(u) = res {
        return Err(Error::StepSizeUnderflow {
            t: u.t,
            h: u.h,
            state: [u.y[0], u.y[1], 0.0],
        });
    }
    Ok((out, entered && !aborted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_analysis::{make_starter, PointId};
    use crate::model::derive_exponents;

    #[test]
    fn equilibrium_start_terminates_immediately() {
        let p = derive_exponents(3.0, 2.0, 1.0).unwrap();
        let s = PhaseState::upper(0.0, 0.0, p.gamma0(), 0.0);
        let tr = integrate(&p, &s, Direction::Forward, &IntegrationConfig::default(), &[]).unwrap();
        assert_eq!(tr.terminal, EventKind::EnterBall(BallTarget::Pgamma0));
        assert_eq!(tr.states.len(), 1);
    }

    #[test]
    fn config_validation() {
        let mut c = IntegrationConfig::default();
        c.attractor_radius = 0.05;
        assert!(c.validate().is_err());
        let mut c = IntegrationConfig::default();
        c.divergence_cap = 10.0;
        assert!(c.validate().is_err());
        let mut c = IntegrationConfig::default();
        c.rel_tol = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn y_zero_refinement_halves_with_tolerance() {
        let p = derive_exponents(3.0, 2.0, 1.0).unwrap();
        let st = make_starter(&p, PointId::P2, None, 1e-6).unwrap();
        let tr = integrate(&p, &st.state, Direction::Forward, &IntegrationConfig::default(), &[]).unwrap();
        let e1 = refine_event(&tr, EventKind::YZero, 1e-6).unwrap();
        let e2 = refine_event(&tr, EventKind::YZero, 5e-7).unwrap();
        let w1 = e1.bracket.1 - e1.bracket.0;
        let w2 = e2.bracket.1 - e2.bracket.0;
        assert!((w2 / w1 - 0.5).abs() < 1e-9, "{w1} {w2}");
        assert!(e2.bracket.0 >= e1.bracket.0 && e2.bracket.1 <= e1.bracket.1);
        assert!(e2.state.coords[1].abs() < 1e-6);
        assert!(matches!(
            refine_event(&tr, EventKind::XiFloor, 1e-6),
            Err(Error::NoSuchEvent(_))
        ));
    }
}
