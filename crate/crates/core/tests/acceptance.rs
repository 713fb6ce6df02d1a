//! End-to-end acceptance criteria. Each test writes one `ACn PASS|FAIL` line
//! to stderr (uncaptured) before asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use weighted_blowup::bifurcation::{find_sigma_star, regime_map, DEFAULT_SIGMA_BRACKET};
use weighted_blowup::golden::{explicit_check, golden_config, homogeneous_check};
use weighted_blowup::integrator::{integrate, Direction, IntegrationConfig};
use weighted_blowup::invariants::*;
use weighted_blowup::local_analysis::{classify_point, PointId};
use weighted_blowup::model::{derive_exponents, Params, PhaseState};
use weighted_blowup::orbits::{classify_from_p0, classify_from_p2, default_k_grid, refine_b0, scan_family, TerminalClass};
use weighted_blowup::shooting::{bisect_eta, default_bracket, shoot_from_interface, GoodProfile, ProfileKind, ShootOptions};

fn report(id: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{id} {verdict} ({:.2} s): {detail}", elapsed.as_secs_f64());
}

fn good_profile(m: f64, p: f64, sigma: f64, cfg: &IntegrationConfig) -> GoodProfile {
    let params = derive_exponents(m, p, sigma).unwrap();
    let bracket = default_bracket(&params, cfg, &ShootOptions::default()).unwrap();
    bisect_eta(&params, bracket, cfg, 1e-8).unwrap()
}

#[test]
fn ac1_explicit_solution_oracle() {
    let t = Instant::now();
    let cfg = golden_config();
    let checks: Vec<_> = [2.0, 3.0, 5.0].iter().map(|&m| explicit_check(m, &cfg).unwrap()).collect();
    let elapsed = t.elapsed();
    let pass = checks.iter().all(|c| c.passed) && elapsed <= Duration::from_secs(10);
    let detail: Vec<String> = checks
        .iter()
        .map(|c| format!("m={} residual {:.1e} shoot {:.1e}", c.m, c.max_residual, c.shoot_error))
        .collect();
    report("AC1", pass, elapsed, &detail.join("; "));
    assert!(pass);
}

#[test]
fn ac2_critical_sigma() {
    let t = Instant::now();
    let r = find_sigma_star(3.0, 1.5, DEFAULT_SIGMA_BRACKET, 1e-6, &IntegrationConfig::default()).unwrap();
    let elapsed = t.elapsed();
    let pass = (r.sigma_star - 2.3218).abs() <= 0.01 && elapsed <= Duration::from_secs(300);
    report(
        "AC2",
        pass,
        elapsed,
        &format!(
            "sigma* = {:.7} in ({:.7}, {:.7}), target 2.3218 +- 0.01, certified {}",
            r.sigma_star, r.bracket.0, r.bracket.1, r.certified
        ),
    );
    assert!(pass);
}

#[test]
fn ac3_regime_dichotomy() {
    let t = Instant::now();
    let cfg = IntegrationConfig::default();
    let small = good_profile(3.0, 2.0, 1.0, &cfg);
    let mid = good_profile(3.0, 2.0, 1.5, &cfg);
    let grid: Vec<f64> = (0..=20).map(|i| 1.0 + 0.05 * i as f64).collect();
    let map = regime_map(3.0, 2.0, &grid, &cfg).unwrap();
    let elapsed = t.elapsed();
    let boundary = map.kind_transitions.first().copied();
    let small_ok = small.kind == ProfileKind::P1;
    let mid_ok = mid.kind.vanishes_at_origin();
    let boundary_ok = boundary.is_some_and(|(lo, hi)| lo >= 1.0 && hi <= 1.5);
    let pass = small_ok && mid_ok && boundary_ok && elapsed <= Duration::from_secs(300);
    report(
        "AC3",
        pass,
        elapsed,
        &format!(
            "sigma=1: {:?} (a0 {:?}); sigma=1.5: {:?} (a0 {:?}); P1/P2 switch in {:?}, required inside (1, 1.5)",
            small.kind, small.a0, mid.kind, mid.a0, boundary
        ),
    );
    assert!(pass);
}

fn random_params(n: usize) -> Vec<Params> {
    let mut runner = TestRunner::deterministic();
    let strat = (1.1f64..6.0, 0.05f64..0.95, 0.1f64..10.0);
    (0..n)
        .map(|_| {
            let (m, frac, sigma) = strat.new_tree(&mut runner).unwrap().current();
            derive_exponents(m, 1.0 + frac * (m - 1.0), sigma).unwrap()
        })
        .collect()
}

#[test]
fn ac4_eigenstructure() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for params in random_params(100) {
        let (m, p, sigma, beta) = (params.m, params.p, params.sigma, params.beta);
        let mut got: Vec<f64> = classify_point(&params, PointId::P1)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|e| {
                worst = worst.max(e.im.abs());
                e.re
            })
            .collect();
        let mut want = vec![-beta * (m - 1.0), beta, -(p - 1.0) * beta];
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }

        let ev = classify_point(&params, PointId::P2).unwrap().eigenvalues;
        let l3 = (2.0 * (p - 1.0) + sigma * (m - 1.0)) / (2.0 * (m + 1.0));
        let j = (0..3)
            .min_by(|&a, &b| {
                let da = (ev[a].re - l3).hypot(ev[a].im);
                let db = (ev[b].re - l3).hypot(ev[b].im);
                da.total_cmp(&db)
            })
            .unwrap();
        worst = worst.max((ev[j].re - l3).hypot(ev[j].im));
        let others: Vec<_> = (0..3).filter(|&i| i != j).map(|i| ev[i]).collect();
        let prod_re = others[0].re * others[1].re - others[0].im * others[1].im;
        let prod_im = others[0].re * others[1].im + others[0].im * others[1].re;
        worst = worst.max((prod_re - (m - 1.0) / (2.0 * (m + 1.0))).abs()).max(prod_im.abs());
    }

    let cfg = IntegrationConfig::default();
    let mut gaps = Vec::new();
    for (m, p, sigma) in [(3.0, 2.0, 1.0), (3.0, 1.5, 0.5), (5.0, 2.0, 1.0)] {
        let params = derive_exponents(m, p, sigma).unwrap();
        let (term, trace) = classify_from_p2(&params, &cfg).unwrap();
        let z = upper_coords(&params, trace.last()).map_or(f64::INFINITY, |c| c[2]);
        gaps.push((term.class, (z - 1.0 / (p - 1.0)).abs()));
    }
    let elapsed = t.elapsed();
    let gamma_ok = gaps.iter().all(|&(c, g)| c == TerminalClass::EntersPgamma0 && g <= 1e-3);
    let pass = worst <= 1e-10 && gamma_ok && elapsed <= Duration::from_secs(30);
    report(
        "AC4",
        pass,
        elapsed,
        &format!("max eigenvalue error {worst:.1e} over 100 samples; |Z - 1/(p-1)| at trace end {gaps:?}"),
    );
    assert!(pass);
}

#[derive(Default, Debug)]
struct Tally {
    upper: usize,
    maxima: usize,
    half_space: usize,
    monotone: usize,
    monotone_before_return: usize,
    caps: usize,
    y0: usize,
    plane: usize,
    errors: Vec<String>,
    first_monotone: Option<(f64, f64, f64)>,
}

impl Tally {
    fn total(&self) -> usize {
        self.upper + self.maxima + self.half_space + self.monotone + self.caps + self.y0 + self.plane + self.errors.len()
    }
}

/// `m in {2, 3, 5}`, `p` at a quarter, half and three quarters of `(1, m)`, four values of `sigma`.
fn monitor_matrix() -> Vec<Params> {
    let mut out = Vec::new();
    for m in [2.0, 3.0, 5.0] {
        for frac in [0.25, 0.5, 0.75] {
            for sigma in [0.5, 1.0, 2.0, 5.0] {
                out.push(derive_exponents(m, 1.0 + frac * (m - 1.0), sigma).unwrap());
            }
        }
    }
    out
}

#[test]
fn ac5_invariant_monitors() {
    let t = Instant::now();
    let cfg = IntegrationConfig::default();
    let mut tally = Tally::default();
    for params in monitor_matrix() {
        match classify_from_p2(&params, &cfg) {
            Ok((_, trace)) => {
                tally.upper += upper_bound_violations(&params, &trace.profile, 1e-10).len();
                tally.maxima += maxima_bound_violations(&params, &trace.profile, 1e-6).len();
                tally.half_space += half_space_violations(&params, &trace).len();
                let violations = p2_monotonicity_violations(&params, &trace, MONOTONE_STEP_TOL);
                let back_in = y_reentry_index(&params, &trace).unwrap_or(usize::MAX);
                tally.monotone_before_return += violations.iter().filter(|v| v.index < back_in).count();
                let mono = violations.len();
                if mono > 0 && tally.first_monotone.is_none() {
                    tally.first_monotone = Some((params.m, params.p, params.sigma));
                }
                tally.monotone += mono;
                tally.caps += p2_cap_violations(&params, &trace, 1e-9).len();
                tally.y0 += y0_reentry_violations(&params, &trace).len();
            }
            Err(e) => tally.errors.push(format!("P2 orbit at {params:?}: {e}")),
        }
        for eta in [0.5, 1.0, 2.0, 5.0] {
            match shoot_from_interface(&params, eta, &cfg) {
                Ok(o) => {
                    tally.maxima += maxima_bound_violations(&params, &o.trace.profile, 1e-6).len();
                    tally.half_space += half_space_violations(&params, &o.trace).len();
                }
                Err(e) => tally.errors.push(format!("shot eta={eta}: {e}")),
            }
        }
        for k in [1e-2, 1.0, 1e2] {
            match classify_from_p0(&params, k, &cfg) {
                Ok((_, trace)) => {
                    tally.maxima += maxima_bound_violations(&params, &trace.profile, 1e-6).len();
                    tally.half_space += half_space_violations(&params, &trace).len();
                }
                Err(e) => tally.errors.push(format!("P0 member k={k}: {e}")),
            }
        }
        for (a, b) in [(0.1, 0.2), (-0.3, 1.0), (0.02, 0.05)] {
            let in_x0 = PhaseState::upper(0.0, a, b, 0.0);
            let in_z0 = PhaseState::upper(b, a, 0.0, 0.0);
            for (start, axis) in [(in_x0, 0), (in_z0, 2)] {
                match integrate(&params, &start, Direction::Forward, &cfg, &[]) {
                    Ok(trace) if plane_drift(&trace, axis) > 1e-12 => tally.plane += 1,
                    Ok(_) => {}
                    Err(e) => tally.errors.push(format!("plane start {start:?}: {e}")),
                }
            }
        }
    }
    let elapsed = t.elapsed();
    let pass = tally.total() == 0 && elapsed <= Duration::from_secs(120);
    report(
        "AC5",
        pass,
        elapsed,
        &format!(
            "violations over 36 parameter sets: upper {} maxima {} half-space {} X/Y monotone {} ({} before the orbit returns into Y > 0; first at (m,p,sigma)={:?}) caps {} Y0-reentry {} plane {} errors {:?}",
            tally.upper,
            tally.maxima,
            tally.half_space,
            tally.monotone,
            tally.monotone_before_return,
            tally.first_monotone,
            tally.caps,
            tally.y0,
            tally.plane,
            tally.errors
        ),
    );
    assert!(pass);
}

#[test]
fn ac6_homogeneous_limit() {
    let t = Instant::now();
    let h = homogeneous_check(3.0, 2.0, &IntegrationConfig::default()).unwrap();
    let elapsed = t.elapsed();
    let pass = h.misclassified.is_empty() && h.max_limit_error <= 1e-3 && elapsed <= Duration::from_secs(60);
    report(
        "AC6",
        pass,
        elapsed,
        &format!(
            "{} members, misclassified {:?}, max |f - 1| {:.1e}",
            h.members, h.misclassified, h.max_limit_error
        ),
    );
    assert!(pass);
}

#[test]
fn ac7_large_sigma_profile() {
    let t = Instant::now();
    let cfg = IntegrationConfig::default();
    let params = derive_exponents(3.0, 2.0, 5.0).unwrap();
    let scan = scan_family(&params, &default_k_grid(), &cfg).unwrap();
    let Some(&bracket) = scan.b0_brackets.first() else {
        report("AC7", false, t.elapsed(), "no B0 bracket on the default k-grid");
        panic!("no B0 bracket");
    };
    let r = refine_b0(&params, bracket, &cfg, 1e-8).unwrap();
    let elapsed = t.elapsed();
    let end = r.profile.last().copied().unwrap();
    let expo = r.fitted_exponent.unwrap_or(f64::NAN);
    let target = params.decay_exponent();
    let pass = end.f.abs() <= 1e-8
        && end.fm_prime.abs() <= 1e-6
        && (expo - target).abs() <= 0.05 * target
        && elapsed <= Duration::from_secs(300);
    report(
        "AC7",
        pass,
        elapsed,
        &format!(
            "k = {:.6}, f(eta) = {:.1e}, (f^m)'(eta) = {:.1e} at eta = {:.5}, origin exponent {expo:.4} vs {target}",
            r.k, end.f, end.fm_prime, end.xi
        ),
    );
    assert!(pass);
}

#[test]
fn ac8_determinism_and_convergence() {
    let t = Instant::now();
    let cfg = IntegrationConfig::default();
    let a = find_sigma_star(3.0, 1.5, DEFAULT_SIGMA_BRACKET, 1e-6, &cfg).unwrap();
    let b = find_sigma_star(3.0, 1.5, DEFAULT_SIGMA_BRACKET, 1e-6, &cfg).unwrap();
    let half = find_sigma_star(3.0, 1.5, DEFAULT_SIGMA_BRACKET, 1e-6, &cfg.tightened(2.0)).unwrap();
    let sigma_same = a.sigma_star.to_bits() == b.sigma_star.to_bits() && a.bracket == b.bracket;
    let sigma_shift = (a.sigma_star - half.sigma_star).abs();
    let sigma_width = a.bracket.1 - a.bracket.0;

    let g1 = good_profile(3.0, 2.0, 1.0, &cfg);
    let g2 = good_profile(3.0, 2.0, 1.0, &cfg);
    let gh = good_profile(3.0, 2.0, 1.0, &cfg.tightened(2.0));
    let profile_same = g1.to_csv() == g2.to_csv();
    let eta_shift = (g1.eta0 - gh.eta0).abs();
    let eta_width = g1.bracket.1 - g1.bracket.0;

    let elapsed = t.elapsed();
    let pass = sigma_same && profile_same && sigma_shift < sigma_width && eta_shift < eta_width;
    report(
        "AC8",
        pass,
        elapsed,
        &format!(
            "repeat identical: sigma* {sigma_same}, profile CSV {profile_same}; halved tolerances move sigma* by {sigma_shift:.1e} (bracket {sigma_width:.1e}), eta0 by {eta_shift:.1e} (bracket {eta_width:.1e})"
        ),
    );
    assert!(pass);
}
