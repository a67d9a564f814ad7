//! Acceptance criteria 1–9, one PASS/FAIL line each.
//!
//! Failing criteria are reported, not hidden. The process exits 0 so the
//! rest of the workspace suite still runs; set `ACCEPTANCE_STRICT=1` to make
//! any FAIL exit 1.

use std::time::Instant;

use ecfm::experiments::beam::{run_beam_with, BeamSetup};
use ecfm::experiments::kpp::{run_kpp_with, KppSetup};
use ecfm::experiments::{run, ExperimentConfig, ExperimentKind, ExperimentReport};

const SEEDS: std::ops::Range<u64> = 0..5;
const BAND_SLACK: f64 = 1e-8;

struct Line {
    id: usize,
    passed: bool,
    detail: String,
}

fn metric(r: &ExperimentReport, name: &str) -> f64 {
    r.metric(name).unwrap_or(f64::NAN)
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn factor_of_two(v: f64, target: f64) -> bool {
    v >= target / 2.0 && v <= target * 2.0
}

fn burgers() -> (ecfm::Result<ExperimentReport>, ecfm::Result<ExperimentReport>) {
    std::thread::scope(|s| {
        let inv = s.spawn(|| run(&ExperimentConfig::defaults(ExperimentKind::BurgersInv)).map(|o| o.report));
        let ecfm = s.spawn(|| run(&ExperimentConfig::defaults(ExperimentKind::BurgersEcfm)).map(|o| o.report));
        (inv.join().expect("burgers_inv thread"), ecfm.join().expect("burgers_ecfm thread"))
    })
}

fn burgers_lines(inv: &ecfm::Result<ExperimentReport>, ec: &ecfm::Result<ExperimentReport>) -> Vec<Line> {
    let near_truth = |r: &ExperimentReport| within(r.recovered_params[0], 1.75, 0.005) && within(r.recovered_params[1], 1.0, 0.005);
    let show = |r: &ExperimentReport| {
        format!(
            "eps=({:.4}, {:.4}) z={:.3e} {:.0}s",
            r.recovered_params[0],
            r.recovered_params[1],
            metric(r, "final_objective"),
            r.wall_time
        )
    };
    let mut out = vec![];
    out.push(match inv {
        Ok(r) => Line {
            id: 1,
            passed: near_truth(r) && r.wall_time <= 300.0,
            detail: show(r),
        },
        Err(e) => Line { id: 1, passed: false, detail: format!("error: {e}") },
    });
    out.push(match ec {
        Ok(r) => Line {
            id: 2,
            passed: near_truth(r) && metric(r, "final_objective") <= 1e-8 && r.wall_time <= 300.0,
            detail: show(r),
        },
        Err(e) => Line { id: 2, passed: false, detail: format!("error: {e}") },
    });
    out.push(match (inv, ec) {
        (Ok(a), Ok(b)) => {
            let (ci, ce) = (a.hessian_condition.unwrap_or(f64::NAN), b.hessian_condition.unwrap_or(f64::NAN));
            Line {
                id: 3,
                passed: within(ci, 8.11, 0.25 * 8.11) && within(ce, 3.46, 0.25 * 3.46) && ce < ci,
                detail: format!("cond INV={ci:.3} ECFM={ce:.3}"),
            }
        }
        _ => Line { id: 3, passed: false, detail: "a Burgers run failed".into() },
    });
    out
}

fn kpp_lines() -> Vec<Line> {
    let mut rows = vec![];
    let mut first_err = None;
    for seed in SEEDS {
        let mut inv_cfg = ExperimentConfig::defaults(ExperimentKind::KppInv);
        inv_cfg.noise.seed = seed;
        let mut ec_cfg = ExperimentConfig::defaults(ExperimentKind::KppEcfm);
        ec_cfg.noise.seed = seed;
        let paired = KppSetup::with_data(&ec_cfg).and_then(|(setup, data)| {
            let a = run_kpp_with(&inv_cfg, &setup, &data)?.report;
            let b = run_kpp_with(&ec_cfg, &setup, &data)?.report;
            Ok((a, b))
        });
        match paired {
            Ok(p) => rows.push(p),
            Err(e) => {
                first_err.get_or_insert(format!("seed {seed}: {e}"));
            }
        }
    }
    if let Some(e) = first_err {
        return (4..=6).map(|id| Line { id, passed: false, detail: e.clone() }).collect();
    }

    let inv_err: Vec<f64> = rows.iter().map(|(a, _)| metric(a, "field_error")).collect();
    let ec_err: Vec<f64> = rows.iter().map(|(_, b)| metric(b, "field_error")).collect();
    let c4 = inv_err.iter().all(|e| factor_of_two(*e, 3.2e-2));

    let in_band = |r: &ExperimentReport| {
        let (m, v) = (metric(r, "discrepancy_mean"), metric(r, "discrepancy_variance"));
        m >= metric(r, "bound_l1") - BAND_SLACK
            && m <= metric(r, "bound_l2") + BAND_SLACK
            && v >= metric(r, "bound_p1") - BAND_SLACK
            && v <= metric(r, "bound_p2") + BAND_SLACK
    };
    let c5 = ec_err.iter().all(|e| factor_of_two(*e, 1.1e-2))
        && inv_err.iter().zip(&ec_err).all(|(a, b)| b < a)
        && rows.iter().all(|(_, b)| in_band(b));

    let proximity: Vec<f64> = rows
        .iter()
        .map(|(a, b)| {
            let d: f64 = a.recovered_params.iter().zip(&b.recovered_params).map(|(x, y)| (x - y).powi(2)).sum();
            let n: f64 = a.recovered_params.iter().map(|x| x * x).sum();
            (d / n).sqrt()
        })
        .collect();
    let source_gain: Vec<(f64, f64)> = rows
        .iter()
        .map(|(_, b)| (metric(b, "source_error"), metric(b, "source_plus_forces_error")))
        .collect();
    let c6 = proximity.iter().all(|p| *p <= 0.1) && source_gain.iter().all(|(s, sf)| sf < s);

    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
    vec![
        Line { id: 4, passed: c4, detail: format!("INV field error {}", fmt(&inv_err)) },
        Line {
            id: 5,
            passed: c5,
            detail: format!(
                "ECFM field error {}; in band {}",
                fmt(&ec_err),
                rows.iter().filter(|(_, b)| in_band(b)).count()
            ),
        },
        Line {
            id: 6,
            passed: c6,
            detail: format!(
                "eps proximity {}; source error {} -> {}",
                fmt(&proximity),
                fmt(&source_gain.iter().map(|p| p.0).collect::<Vec<_>>()),
                fmt(&source_gain.iter().map(|p| p.1).collect::<Vec<_>>())
            ),
        },
    ]
}

fn beam_lines() -> Vec<Line> {
    let config = ExperimentConfig::defaults(ExperimentKind::BeamEcfm);
    let setup = match BeamSetup::new(&config) {
        Ok(s) => s,
        Err(e) => return (7..=8).map(|id| Line { id, passed: false, detail: format!("error: {e}") }).collect(),
    };
    let mut reports = vec![];
    for seed in SEEDS {
        let r = setup
            .generate_data(seed, config.discretization.replicates)
            .and_then(|(data, omegas)| run_beam_with(&config, &setup, &data, &omegas));
        match r {
            Ok(o) => reports.push(o.report),
            Err(e) => {
                return vec![
                    Line { id: 7, passed: false, detail: format!("seed {seed}: {e}") },
                    Line { id: 8, passed: false, detail: format!("seed {seed}: {e}") },
                ]
            }
        }
    }
    let eps: Vec<f64> = reports.iter().map(|r| r.recovered_params[0]).collect();
    let err: Vec<f64> = reports.iter().map(|r| metric(r, "expected_error")).collect();
    let forces: Vec<f64> = reports.iter().map(|r| metric(r, "lambda_norm") / metric(r, "data_norm")).collect();
    let c7 = eps.iter().all(|e| (0.96..=1.02).contains(e)) && err.iter().all(|e| *e <= 1.5e-2) && forces.iter().all(|f| *f <= 1e-3);
    let load = metric(&reports[0], "critical_load");
    let fmt = |v: &[f64], p: usize| v.iter().map(|x| format!("{x:.p$e}")).collect::<Vec<_>>().join(" ");
    vec![
        Line {
            id: 7,
            passed: c7,
            detail: format!(
                "eps {}; expected error {}; |lambda|/|data| {}",
                eps.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" "),
                fmt(&err, 2),
                fmt(&forces, 1)
            ),
        },
        Line {
            id: 8,
            passed: within(load, 2.24, 0.05),
            detail: format!("critical load {load:.4} at H0 {:.4}", metric(&reports[0], "h0")),
        },
    ]
}

fn verify_line() -> Line {
    let checks = ecfm::verify::run_all();
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.name, c.detail)).collect();
    Line {
        id: 9,
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks", checks.len())
        } else {
            format!("failed: {}", failed.join("; "))
        },
    }
}

fn main() {
    let start = Instant::now();
    let (inv, ec) = burgers();
    let mut lines = burgers_lines(&inv, &ec);
    lines.extend(kpp_lines());
    lines.extend(beam_lines());
    lines.push(verify_line());
    lines.sort_by_key(|l| l.id);

    for l in &lines {
        println!("{} criterion {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.id, l.detail);
    }
    let passed = lines.iter().filter(|l| l.passed).count();
    println!("{passed}/{} criteria passed in {:.0}s", lines.len(), start.elapsed().as_secs_f64());

    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < lines.len() {
        std::process::exit(1);
    }
}
