use serde_json::{json, Value};

use super::report::{scan_csv, Writer};
use super::{Command, Failure, RunConfig, EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION};
use crate::bifurcation::{find_sigma_star, regime_map, DEFAULT_SIGMA_BRACKET};
use crate::golden::{golden_config, run_golden_suites};
use crate::integrator::InterfaceBand;
use crate::local_analysis::{classify_point, PointId};
use crate::model::{derive_exponents, profile_csv, Params};
use crate::orbits::{classify_from_p0, classify_from_p2, default_k_grid, interface_pass, refine_b0, scan_family};
use crate::shooting::{bisect_eta, class_of, default_bracket, scan_eta, ShootOptions};

/// `eta` tolerance of the `profile` command.
pub const DEFAULT_ETA_TOL: f64 = 1e-8;
/// Relative `k` width for refining a `B0` bracket.
pub const DEFAULT_K_TOL: f64 = 1e-8;
pub const DEFAULT_SIGMA_TOL: f64 = 1e-6;

pub(super) fn dispatch(cfg: &RunConfig) -> Result<i32, Failure> {
    let mut w = Writer::new(cfg)?;
    let outcome = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::config(format!("--jobs {n}: {e}")))?
            .install(|| execute(cfg, &mut w)),
        None => execute(cfg, &mut w),
    };
    match outcome {
        Ok(code) => {
            w.finish(code)?;
            Ok(code)
        }
        Err(f) if f.code == EXIT_NUMERIC => {
            w.json("diagnostics.json", &json!({ "error": f.message, "exit_code": f.code }))?;
            w.finish(f.code)?;
            Err(f)
        }
        Err(f) => Err(f),
    }
}

fn params(cfg: &RunConfig) -> Result<Params, Failure> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Failure::config(format!("--{name} is required")));
    Ok(derive_exponents(need(cfg.m, "m")?, need(cfg.p, "p")?, need(cfg.sigma, "sigma")?)?)
}

fn mp(cfg: &RunConfig) -> Result<(f64, f64), Failure> {
    match (cfg.m, cfg.p) {
        (Some(m), Some(p)) => Ok((m, p)),
        _ => Err(Failure::config("--m and --p are required")),
    }
}

fn execute(cfg: &RunConfig, w: &mut Writer) -> Result<i32, Failure> {
    let ic = cfg.integration();
    match cfg.command.expect("resolved config has a command") {
        Command::Profile => {
            let params = params(cfg)?;
            let bracket = default_bracket(&params, &ic, &ShootOptions::default())?;
            let g = bisect_eta(&params, bracket, &ic, cfg.tol.unwrap_or(DEFAULT_ETA_TOL))?;
            w.csv("profile.csv", profile_csv(&g.samples))?;
            w.json(
                "report.json",
                &json!({
                    "command": "profile",
                    "params": params,
                    "class": class_of(g.kind),
                    "kind": g.kind,
                    "eta0": g.eta0,
                    "bracket": g.bracket,
                    "a0": g.a0,
                    "origin_fit": g.origin_fit,
                    "p0_approach": g.p0_approach,
                    "samples": g.samples.len(),
                }),
            )?;
        }
        Command::ScanEta => {
            let params = params(cfg)?;
            let grid = cfg.grid.clone().unwrap_or_else(|| crate::orbits::log_grid(0.1, 20.0, 64));
            let scan = scan_eta(&params, &grid, &ic)?;
            let records = scan.records();
            w.csv(
                "scan.csv",
                scan_csv(records.iter().map(|r| (r.eta, r.class, r.a0.or(r.theta)))),
            )?;
            w.json(
                "report.json",
                &json!({
                    "command": "scan-eta",
                    "params": params,
                    "records": records,
                    "bracket": scan.bracket,
                    "transitions": scan.transitions,
                }),
            )?;
        }
        Command::Orbit => {
            let params = params(cfg)?;
            let (terminal, trace) = match cfg.k {
                Some(k) => classify_from_p0(&params, k, &ic)?,
                None => classify_from_p2(&params, &ic)?,
            };
            w.csv("trace.csv", trace.to_csv())?;
            w.json(
                "report.json",
                &json!({
                    "command": "orbit",
                    "params": params,
                    "start": if cfg.k.is_some() { "P0" } else { "P2" },
                    "k": cfg.k,
                    "terminal": terminal,
                    "terminal_event": trace.terminal_event(),
                    "events": trace.events,
                    "states": trace.states.len(),
                    "interface_pass": interface_pass(&params, &trace, InterfaceBand::default().distance),
                }),
            )?;
        }
        Command::FamilyScan => {
            let params = params(cfg)?;
            let grid = cfg.grid.clone().unwrap_or_else(default_k_grid);
            let scan = scan_family(&params, &grid, &ic)?;
            let records = scan.records();
            w.csv("scan.csv", scan_csv(records.iter().map(|r| (r.param, r.class, r.detail))))?;
            let mut report = json!({
                "command": "family-scan",
                "params": params,
                "records": records,
                "b0_brackets": scan.b0_brackets,
                "refinement": Value::Null,
            });
            if let Some(&bracket) = scan.b0_brackets.first() {
                let r = refine_b0(&params, bracket, &ic, cfg.tol.unwrap_or(DEFAULT_K_TOL))?;
                w.csv("profile.csv", profile_csv(&r.profile))?;
                let end = r.profile.last();
                report["refinement"] = json!({
                    "k": r.k,
                    "bracket": r.bracket,
                    "sides": r.sides,
                    "interface": r.pass,
                    "line_pass": r.line_pass,
                    "f_eta": end.map(|s| s.f),
                    "fm_prime_eta": end.map(|s| s.fm_prime),
                    "fitted_exponent": r.fitted_exponent,
                    "expected_exponent": params.decay_exponent(),
                });
            }
            w.json("report.json", &report)?;
        }
        Command::Bifurcate => {
            let (m, p) = mp(cfg)?;
            let bracket = (
                cfg.sigma_lo.unwrap_or(DEFAULT_SIGMA_BRACKET.0),
                cfg.sigma_hi.unwrap_or(DEFAULT_SIGMA_BRACKET.1),
            );
            let r = find_sigma_star(m, p, bracket, cfg.tol.unwrap_or(DEFAULT_SIGMA_TOL), &ic)?;
            if let Some(g) = &r.critical_profile {
                w.csv("profile.csv", profile_csv(&g.samples))?;
            }
            w.json(
                "report.json",
                &json!({
                    "m": m,
                    "p": p,
                    "sigma_star": r.sigma_star,
                    "bracket": r.bracket,
                    "iterations": r.iterations,
                    "certificates": r.certificates,
                    "interface_pass": r.pass,
                    "certified": r.certified,
                    "critical_profile": r.critical_profile.as_ref().map(|g| json!({
                        "kind": g.kind,
                        "eta0": g.eta0,
                        "origin_fit": g.origin_fit,
                    })),
                    "regime_table": [],
                }),
            )?;
        }
        Command::RegimeMap => {
            let (m, p) = mp(cfg)?;
            let grid = cfg
                .grid
                .clone()
                .ok_or_else(|| Failure::config("regime-map needs --grid"))?;
            let map = regime_map(m, p, &grid, &ic)?;
            let mut csv = String::from("sigma,p2_class,profile_kind,eta0,a0,has_a0,b0_lo,b0_hi\n");
            let tag = |v: Value| v.as_str().map(str::to_string).unwrap_or_default();
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in &map.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.sigma,
                    tag(json!(r.p2_class)),
                    tag(json!(r.profile_kind)),
                    opt(r.eta0),
                    opt(r.a0),
                    r.has_a0,
                    opt(r.b0_bracket.map(|b| b.0)),
                    opt(r.b0_bracket.map(|b| b.1)),
                ));
            }
            w.csv("regime.csv", csv)?;
            let table: Vec<Value> = map
                .rows
                .iter()
                .map(|r| json!({ "sigma": r.sigma, "p2_class": r.p2_class, "profile_kind": r.profile_kind }))
                .collect();
            w.json(
                "report.json",
                &json!({
                    "m": m,
                    "p": p,
                    "sigma_star": Value::Null,
                    "bracket": Value::Null,
                    "regime_table": table,
                    "rows": map.rows,
                    "sigma1": map.sigma1,
                    "kind_transitions": map.kind_transitions,
                    "p2_transitions": map.p2_transitions,
                }),
            )?;
        }
        Command::ClassifyPoints => {
            let params = params(cfg)?;
            let ids = [
                PointId::P0,
                PointId::P1,
                PointId::P2,
                PointId::Pgamma(params.gamma0()),
                PointId::Q1,
                PointId::Q2,
                PointId::Q3,
                PointId::Q4,
                PointId::Q5,
            ];
            let mut csv = String::from("point,chart,at_infinity,c1,c2,c3,re1,im1,re2,im2,re3,im3,stable,unstable,center\n");
            let mut points = Vec::new();
            for id in ids {
                match classify_point(&params, id) {
                    Ok(info) => {
                        let ev = info.eigenvalues;
                        csv.push_str(&format!(
                            "{id},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                            info.chart.name(),
                            info.at_infinity,
                            info.coords[0],
                            info.coords[1],
                            info.coords[2],
                            ev[0].re,
                            ev[0].im,
                            ev[1].re,
                            ev[1].im,
                            ev[2].re,
                            ev[2].im,
                            info.stable_dim,
                            info.unstable_dim,
                            info.center_dim
                        ));
                        points.push(json!({ "point": id.to_string(), "info": info }));
                    }
                    Err(e) => points.push(json!({ "point": id.to_string(), "error": e.to_string() })),
                }
            }
            w.csv("points.csv", csv)?;
            w.json("report.json", &json!({ "command": "classify-points", "params": params, "points": points }))?;
        }
        Command::Validate => {
            let report = run_golden_suites(&cfg.numeric.apply(golden_config()))?;
            w.json("report.json", &serde_json::to_value(&report).map_err(crate::Error::from)?)?;
            let code = if report.passed { EXIT_OK } else { EXIT_VALIDATION };
            if !report.passed {
                eprintln!("validation failed; see {}", w.dir().join("report.json").display());
            }
            return Ok(code);
        }
    }
    Ok(EXIT_OK)
}
