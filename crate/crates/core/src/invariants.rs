//! Monitors for the qualitative properties that orbits and profiles must obey.
//! Each check returns the list of offending samples; an empty list means no violation.

use serde::{Deserialize, Serialize};

use crate::integrator::{Direction, OrbitTrace};
use crate::model::{Chart, Params, PhaseState, ProfileSample};

/// Slack for the half-space trap and the non-reentry check.
pub const PLANE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Index into the samples or states checked.
    pub index: usize,
    pub value: f64,
    pub bound: f64,
}

/// Upper-chart coordinates of a state, when `X` is defined.
pub fn upper_coords(params: &Params, s: &PhaseState) -> Option<[f64; 3]> {
    let [a, b, c] = s.coords;
    match s.chart {
        Chart::Upper => Some(s.coords),
        Chart::Lower if c > 0.0 => Some([a / (c * c), b / c, a.max(0.0).powf(params.q()) * c.powf(params.sigma)]),
        Chart::BarZ if a > 0.0 => Some([a, b, c / a]),
        _ => None,
    }
}

/// `f(xi) <= [alpha (m-1) / (2m)]^{1/(m-1)} xi^{2/(m-1)}` for profiles vanishing at the origin.
pub fn upper_bound_violations(params: &Params, samples: &[ProfileSample], tol: f64) -> Vec<Violation> {
    let m = params.m;
    let c = (params.alpha * (m - 1.0) / (2.0 * m)).powf(1.0 / (m - 1.0));
    samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let bound = c * s.xi.powf(2.0 / (m - 1.0));
            (s.f > bound + tol).then_some(Violation {
                index: i,
                value: s.f,
                bound,
            })
        })
        .collect()
}

/// Indices of interior local maxima of `f` in a sample list sorted by `xi`.
pub fn local_maxima(samples: &[ProfileSample]) -> Vec<usize> {
    (1..samples.len().saturating_sub(1))
        .filter(|&i| samples[i].f >= samples[i - 1].f && samples[i].f > samples[i + 1].f)
        .collect()
}

/// At a local maximum `xi0`: `f(xi0) >= alpha^{1/(p-1)} xi0^{-sigma/(p-1)}`.
///
/// The bound is evaluated at the right neighbour of the discrete maximum;
/// `rel_tol` absorbs the sampling error in `f`.
pub fn maxima_bound_violations(params: &Params, samples: &[ProfileSample], rel_tol: f64) -> Vec<Violation> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    let e = 1.0 / (params.p - 1.0);
    let bound_at = |xi: f64| params.alpha.powf(e) * xi.powf(-params.sigma * e);
    local_maxima(&sorted)
        .into_iter()
        .filter_map(|i| {
            let s = &sorted[i];
            // the true maximum lies between the neighbours, where the bound is at most this
            let bound = bound_at(sorted[i + 1].xi);
            (s.f < bound * (1.0 - rel_tol)).then_some(Violation {
                index: i,
                value: s.f,
                bound,
            })
        })
        .collect()
}

/// The half-space `Y <= alpha/m` (with `X, Z >= 0`) is forward invariant.
///
/// Forward traces starting below the plane must stay below it; reverse traces
/// starting above it must stay above it.
pub fn half_space_violations(params: &Params, trace: &OrbitTrace) -> Vec<Violation> {
    let cap = params.alpha / params.m;
    // +1 when the trapped side is below the plane
    let side = match trace.direction {
        Direction::Forward => 1.0,
        Direction::Reverse => -1.0,
    };
    let coords: Vec<_> = trace.states.iter().map(|s| upper_coords(params, s)).collect();
    match coords.first() {
        Some(Some(c)) if side * (c[1] - cap) <= -1e-6 && c[0] >= 0.0 && c[2] >= 0.0 => {}
        _ => return Vec::new(),
    }
    coords
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let y = (*c)?[1];
            (side * (y - cap) > PLANE_SLACK).then_some(Violation {
                index: i,
                value: y,
                bound: cap,
            })
        })
        .collect()
}

/// Per-step slack of the monotonicity monitor.
pub const MONOTONE_STEP_TOL: f64 = 1e-9;

/// `X` never increases along an orbit leaving `P2` (by more than `step_tol`
/// per stored step), and `Y` never increases on the initial arc where `Y >= 0`.
pub fn p2_monotonicity_violations(params: &Params, trace: &OrbitTrace, step_tol: f64) -> Vec<Violation> {
    let coords: Vec<[f64; 3]> = trace.states.iter().filter_map(|s| upper_coords(params, s)).collect();
    let first_negative = coords.iter().position(|c| c[1] < 0.0).unwrap_or(coords.len());
    let mut out = Vec::new();
    for (i, w) in coords.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if b[0] > a[0] + step_tol {
            out.push(Violation {
                index: i + 1,
                value: b[0],
                bound: a[0],
            });
        } else if i + 1 < first_negative && b[1] > a[1] + step_tol {
            out.push(Violation {
                index: i + 1,
                value: b[1],
                bound: a[1],
            });
        }
    }
    out
}

/// Index (among states with upper coordinates) of the first return into
/// `Y > 0` after the orbit has left it, if any.
pub fn y_reentry_index(params: &Params, trace: &OrbitTrace) -> Option<usize> {
    let coords: Vec<[f64; 3]> = trace.states.iter().filter_map(|s| upper_coords(params, s)).collect();
    let first_negative = coords.iter().position(|c| c[1] < 0.0)?;
    coords[first_negative..]
        .iter()
        .position(|c| c[1] > 0.0)
        .map(|j| first_negative + j)
}

/// `X < X(P2) + tol` and `Y < Y(P2) + tol` along an orbit leaving `P2`.
pub fn p2_cap_violations(params: &Params, trace: &OrbitTrace, tol: f64) -> Vec<Violation> {
    let (xc, yc) = (params.x_p2(), params.y_p2());
    trace
        .states
        .iter()
        .filter_map(|s| upper_coords(params, s))
        .enumerate()
        .filter_map(|(i, c)| {
            if c[0] >= xc + tol {
                Some(Violation {
                    index: i,
                    value: c[0],
                    bound: xc,
                })
            } else if c[1] >= yc + tol {
                Some(Violation {
                    index: i,
                    value: c[1],
                    bound: yc,
                })
            } else {
                None
            }
        })
        .collect()
}

/// After crossing `Y = -Y0` with `X < X(P2)`, no state returns above `-Y0 + slack`.
/// Only forward traces are checked.
pub fn y0_reentry_violations(params: &Params, trace: &OrbitTrace) -> Vec<Violation> {
    if trace.direction == Direction::Reverse {
        return Vec::new();
    }
    let level = -params.y0();
    let coords: Vec<Option<[f64; 3]>> = trace.states.iter().map(|s| upper_coords(params, s)).collect();
    let crossing = coords.windows(2).position(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => a[1] > level && b[1] <= level && b[0] < params.x_p2(),
        _ => false,
    });
    let Some(c) = crossing else {
        return Vec::new();
    };
    coords
        .iter()
        .enumerate()
        .skip(c + 2)
        .filter_map(|(i, v)| {
            let y = (*v)?[1];
            (y > level + PLANE_SLACK).then_some(Violation {
                index: i,
                value: y,
                bound: level,
            })
        })
        .collect()
}

/// Largest `|coords[axis]|` over the trace, for orbits started in an invariant plane.
pub fn plane_drift(trace: &OrbitTrace, axis: usize) -> f64 {
    trace.states.iter().map(|s| s.coords[axis].abs()).fold(0.0, f64::max)
}
