use proptest::prelude::*;

use weighted_blowup::integrator::{integrate, Direction, IntegrationConfig, PlaneId};
use weighted_blowup::invariants::*;
use weighted_blowup::local_analysis::{classify_point, PointId};
use weighted_blowup::model::{chart_map, derive_exponents, vector_field, Chart, Params, PhaseState};
use weighted_blowup::orbits::{classify_from_p2, log_grid, scan_family, TerminalClass};
use weighted_blowup::shooting::{shoot_from_interface, ShotClass};

/// `(m, p, sigma)` with `p` a fraction of the way through `(1, m)`.
fn params() -> impl Strategy<Value = Params> {
    (1.1f64..6.0, 0.05f64..0.95, 0.1f64..10.0).prop_map(|(m, frac, sigma)| derive_exponents(m, 1.0 + frac * (m - 1.0), sigma).unwrap())
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exponents_positive_and_balanced(p in params()) {
        prop_assert!(p.alpha > 0.0 && p.beta > 0.0);
        let lhs = p.alpha * (p.m - p.p);
        let rhs = p.beta * (p.sigma + 2.0);
        prop_assert!((lhs - rhs).abs() <= 1e-14 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn exponents_closed_form(m in 1.1f64..6.0, frac in 0.05f64..0.95, sigma in 0.0f64..10.0) {
        let p = 1.0 + frac * (m - 1.0);
        let flags = weighted_blowup::model::ValidationFlags { allow_p_one: false, allow_sigma_zero: true };
        let e = weighted_blowup::model::derive_exponents_with(m, p, sigma, flags).unwrap();
        let den = 2.0 * (p - 1.0) + sigma * (m - 1.0);
        prop_assert!((e.alpha - (sigma + 2.0) / den).abs() <= 1e-14 * e.alpha);
        prop_assert!((e.beta - (m - p) / den).abs() <= 1e-14 * e.beta);
    }

    #[test]
    fn out_of_range_exponents_rejected(m in 1.1f64..6.0, sigma in 0.1f64..10.0, over in 0.0f64..3.0) {
        prop_assert!(derive_exponents(m, m + over, sigma).is_err());
        prop_assert!(derive_exponents(m, 1.0 - over, sigma).is_err());
        prop_assert!(derive_exponents(m, 0.5 * (1.0 + m), -1.0 - over).is_err());
    }

    #[test]
    fn field_vanishes_only_at_critical_points(
        p in params(),
        pts in prop::collection::vec((0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0), 40),
    ) {
        let critical = [[0.0, 0.0, 0.0], [0.0, -p.beta / p.m, 0.0], [p.x_p2(), p.y_p2(), 0.0]];
        for (x, y, z) in pts {
            let c = [x, y, z];
            let (f, _) = vector_field(&p, &PhaseState::upper(x, y, z, 0.0)).unwrap();
            let near = critical.iter().any(|k| dist(*k, c) <= 1e-6) || (x.abs() <= 1e-6 && y.abs() <= 1e-6);
            prop_assert!(near || norm(f) >= 1e-10, "|F| = {:e} at {:?}", norm(f), c);
        }
        for k in critical {
            prop_assert!(norm(vector_field(&p, &PhaseState::upper(k[0], k[1], k[2], 0.0)).unwrap().0) <= 1e-14);
        }
        let g = PhaseState::upper(0.0, 0.0, p.gamma0() * 1.7, 0.0);
        prop_assert!(norm(vector_field(&p, &g).unwrap().0) == 0.0);
    }

    /// The lower field pushed through the chart map is a positive multiple of the upper field.
    #[test]
    fn chart_map_conjugates_flows(p in params(), x in 1e-3f64..2.0, y in -2.0f64..2.0, z in 1e-2f64..3.0) {
        let lower = PhaseState::lower(x, y, z);
        let (fl, _) = vector_field(&p, &lower).unwrap();
        let up = chart_map(&p, &lower, Chart::Upper).unwrap();
        let (fu, _) = vector_field(&p, &up).unwrap();
        let q = p.q();
        let zz = up.coords[2];
        let push = [
            fl[0] / (z * z) - 2.0 * x * fl[2] / (z * z * z),
            fl[1] / z - y * fl[2] / (z * z),
            zz * (q * fl[0] / x + p.sigma * fl[2] / z),
        ];
        let dot: f64 = (0..3).map(|i| push[i] * fu[i]).sum();
        let r = dot / (norm(fu) * norm(fu));
        prop_assert!(r > 0.0);
        let resid = norm([push[0] - r * fu[0], push[1] - r * fu[1], push[2] - r * fu[2]]);
        prop_assert!(resid <= 1e-8 * norm(push), "resid {:e} vs |push| {:e}", resid, norm(push));
    }

    #[test]
    fn chart_map_round_trip(p in params(), x in 1e-3f64..2.0, y in -2.0f64..2.0, z in 1e-2f64..3.0) {
        let lower = PhaseState::lower(x, y, z);
        for target in [Chart::Upper, Chart::BarZ] {
            let there = chart_map(&p, &lower, target).unwrap();
            let back = chart_map(&p, &there, Chart::Lower).unwrap();
            for i in 0..3 {
                let a = lower.coords[i];
                prop_assert!((back.coords[i] - a).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn p1_eigenvalues(p in params()) {
        let mut got: Vec<f64> = classify_point(&p, PointId::P1).unwrap().eigenvalues.iter().map(|e| e.re).collect();
        let mut want = vec![-p.beta * (p.m - 1.0), p.beta, -(p.p - 1.0) * p.beta];
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10);
        }
    }

    #[test]
    fn p2_eigenvalues(p in params()) {
        let info = classify_point(&p, PointId::P2).unwrap();
        let ev = info.eigenvalues;
        let l3 = (2.0 * (p.p - 1.0) + p.sigma * (p.m - 1.0)) / (2.0 * (p.m + 1.0));
        let j = (0..3).find(|&i| (ev[i].re - l3).abs() <= 1e-10 && ev[i].im == 0.0);
        prop_assert!(j.is_some(), "{:?} vs {}", ev, l3);
        let j = j.unwrap();
        let o: Vec<_> = (0..3).filter(|&i| i != j).map(|i| ev[i]).collect();
        let prod = o[0].re * o[1].re - o[0].im * o[1].im;
        prop_assert!((prod - (p.m - 1.0) / (2.0 * (p.m + 1.0))).abs() <= 1e-10);
        prop_assert_eq!(info.stable_dim + info.unstable_dim + info.center_dim, 3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariant_planes_preserved(p in params(), a in -1.0f64..1.0, b in 0.01f64..2.0) {
        let cfg = IntegrationConfig::default();
        let tx = integrate(&p, &PhaseState::upper(0.0, a, b, 0.0), Direction::Forward, &cfg, &[]).unwrap();
        prop_assert!(plane_drift(&tx, 0) <= 1e-12);
        let tz = integrate(&p, &PhaseState::upper(b, a, 0.0, 0.0), Direction::Forward, &cfg, &[]).unwrap();
        prop_assert!(plane_drift(&tz, 2) <= 1e-12);
    }

    #[test]
    fn half_space_is_trapping(p in params(), x in 0.0f64..1.0, frac in 0.0f64..1.0, z in 0.0f64..2.0) {
        let cap = p.alpha / p.m;
        let y = -1.0 + frac * (cap - 1e-6 + 1.0);
        let mon = [PlaneId::YAlphaOverM];
        let cfg = IntegrationConfig { max_steps: 50_000, ..IntegrationConfig::default() };
        let trace = integrate(&p, &PhaseState::upper(x, y, z, 0.0), Direction::Forward, &cfg, &mon).unwrap();
        let v = half_space_violations(&p, &trace);
        prop_assert!(v.is_empty(), "{:?}", v.first());
    }

    /// `X` decreases up to the first return into `Y > 0`; `X`, `Y` stay below
    /// their values at `P2`; after crossing `Y = -Y0` there is no way back.
    #[test]
    fn p2_orbit_monitors(p in params()) {
        let cfg = IntegrationConfig::default();
        let (_, trace) = classify_from_p2(&p, &cfg).unwrap();
        let back_in = y_reentry_index(&p, &trace).unwrap_or(usize::MAX);
        let early: Vec<_> = p2_monotonicity_violations(&p, &trace, MONOTONE_STEP_TOL)
            .into_iter()
            .filter(|v| v.index < back_in)
            .collect();
        prop_assert!(early.is_empty(), "{:?}", early.first());
        prop_assert!(p2_cap_violations(&p, &trace, 1e-9).is_empty());
        prop_assert!(y0_reentry_violations(&p, &trace).is_empty());
        prop_assert!(half_space_violations(&p, &trace).is_empty());
        prop_assert!(upper_bound_violations(&p, &trace.profile, 1e-10).is_empty());
        prop_assert!(maxima_bound_violations(&p, &trace.profile, 1e-6).is_empty());
    }

    #[test]
    fn shots_obey_maxima_bound(p in params(), eta in 0.2f64..10.0) {
        let o = shoot_from_interface(&p, eta, &IntegrationConfig::default()).unwrap();
        prop_assert!(maxima_bound_violations(&p, &o.trace.profile, 1e-6).is_empty());
        prop_assert!(half_space_violations(&p, &o.trace).is_empty());
        if o.endpoint == ShotClass::APlus {
            let theta = o.theta.unwrap();
            prop_assert!(theta > 0.0 && theta < eta, "theta {} eta {}", theta, eta);
        }
        // near the interface f^{m-1} follows beta (m-1)(eta^2 - xi^2)/(2m)
        let c = p.beta * (p.m - 1.0) / (2.0 * p.m);
        if let Some(s) = o.trace.profile.iter().find(|s| s.xi < eta && eta - s.xi < 1e-3 * eta) {
            let want = c * (eta * eta - s.xi * s.xi);
            let got = s.f.powf(p.m - 1.0);
            prop_assert!((got - want).abs() <= 1e-2 * want, "{} vs {}", got, want);
        }
    }
}

#[test]
fn b0_brackets_are_adjacent_tail_and_sign_change() {
    let p = derive_exponents(3.0, 2.0, 5.0).unwrap();
    let grid = log_grid(1e-2, 1e3, 24);
    let scan = scan_family(&p, &grid, &IntegrationConfig::default()).unwrap();
    assert!(!scan.b0_brackets.is_empty());
    for &(a, b) in &scan.b0_brackets {
        let i = scan.ks.iter().position(|&k| k == a).unwrap();
        assert_eq!(scan.ks[i + 1], b);
        let pair = (scan.classes[i].class, scan.classes[i + 1].class);
        assert!(matches!(
            pair,
            (TerminalClass::EntersPgamma0, TerminalClass::EntersQ3) | (TerminalClass::EntersQ3, TerminalClass::EntersPgamma0)
        ));
    }
}

#[test]
fn p2_orbit_monotone_at_reference_point() {
    let p = derive_exponents(3.0, 2.0, 1.0).unwrap();
    let (_, trace) = classify_from_p2(&p, &IntegrationConfig::default()).unwrap();
    assert!(p2_monotonicity_violations(&p, &trace, MONOTONE_STEP_TOL).is_empty());
}
