//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p circular-ipw --test acceptance -- --nocapture`.
//! Criteria that compare against published simulation figures (3 and 4) are
//! reported but do not fail the test; every other criterion does.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::time::Instant;

use circular_ipw::estimators::{estimate_effects, estimate_omega};
use circular_ipw::io::{emit_report, parse_config, parse_report_csv, radians_to_minutes, run_analysis, ReportFormat};
use circular_ipw::propensity::{fit_logistic, DesignRow, FitOptions};
use circular_ipw::simulation::{draw_units, run_study, sample_wrapped_cauchy, Estimand, Scenario, ScenarioSpec};
use circular_ipw::variance::jacobian;
use circular_ipw::{Angle, CausalDataset, OmegaEstimate, Unit, WeightScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
    published_figures: bool,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn wrap(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

fn ht_hajek_direction_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(20..=500);
        let eta = [rng.random_range(-1.5..1.5), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let shift = rng.random_range(0.0..TAU);
        let mut units = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        for _ in 0..n {
            let x = vec![1.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let z: f64 = x.iter().zip(&eta).map(|(a, b)| a * b).sum();
            let pi = 1.0 / (1.0 + (-z).exp());
            let treated = rng.random::<f64>() < pi;
            let theta = shift + if treated { 0.8 } else { 0.0 } + rng.random_range(-1.2..1.2);
            units.push(Unit { treated, x, theta: Angle::new(theta).unwrap() });
            p.push(pi);
        }
        let Ok(d) = CausalDataset::new(units) else { continue };
        let ht = estimate_effects(&estimate_omega(&d, &p, WeightScheme::HorvitzThompson).unwrap()).unwrap();
        let hj = estimate_effects(&estimate_omega(&d, &p, WeightScheme::Hajek).unwrap()).unwrap();
        worst = worst.max(wrap(ht.tau - hj.tau).abs());
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        name: "HT/Hajek direction effect equivalence",
        pass: worst <= 1e-12 && secs < 10.0,
        detail: format!("max |diff| {worst:.2e} over 1000 datasets in {secs:.2}s"),
        published_figures: false,
    }
}

fn identification_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (units, t1, t0, p) = draw_units(Scenario::Two, 100_000, &mut rng).unwrap();
    let mut worst_z: f64 = 0.0;
    let mut parts = Vec::new();
    for (arm, name) in [(1, "treated"), (0, "control")] {
        for (f, fname) in [(f64::cos as fn(f64) -> f64, "cos"), (f64::sin, "sin")] {
            // Per-unit difference between the weighted observed term and the
            // unit's own counterfactual term; its mean estimates the gap.
            let d: Vec<f64> = units
                .iter()
                .zip(t1.iter().zip(&t0))
                .zip(&p)
                .map(|((u, (a1, a0)), &pi)| {
                    if arm == 1 {
                        let w = if u.treated { 1.0 / pi } else { 0.0 };
                        w * f(u.theta.radians()) - f(a1.radians())
                    } else {
                        let w = if u.treated { 0.0 } else { 1.0 / (1.0 - pi) };
                        w * f(u.theta.radians()) - f(a0.radians())
                    }
                })
                .collect();
            let (m, se) = mean_se(&d);
            let z = m.abs() / se;
            worst_z = worst_z.max(z);
            parts.push(format!("{name}-{fname} {z:.2}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 2,
        name: "Identification oracle with known propensity",
        pass: worst_z <= 3.0 && secs < 30.0,
        detail: format!("|gap|/SE: {} ({secs:.1}s)", parts.join(", ")),
        published_figures: false,
    }
}

fn table_replication() -> Outcome {
    let start = Instant::now();
    let spec = ScenarioSpec::new(Scenario::One, 1000, 300, 3).unwrap();
    let s = run_study(&spec).unwrap();
    let tau = s.row(Estimand::Tau, WeightScheme::HorvitzThompson);
    let xi = s.row(Estimand::Xi, WeightScheme::Hajek);
    let sd = tau.se.unwrap();
    let checks = [
        ("tau |BIAS|<=0.03", tau.bias.abs() <= 0.03),
        ("tau SD in [0.20,0.30]", (0.20..=0.30).contains(&sd)),
        ("tau CR in [0.91,0.98]", (0.91..=0.98).contains(&tau.cr.unwrap())),
        ("xi |BIAS|<=0.02", xi.bias.abs() <= 0.02),
        ("xi CR in [0.91,0.99]", (0.91..=0.99).contains(&xi.cr.unwrap())),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome {
        id: 3,
        name: "Scenario 1, n=1000, 300 reps",
        pass: failed.is_empty(),
        detail: format!(
            "tau BIAS {:.4} SD {:.4} CR {:.3}; xi(Hajek) BIAS {:.4} CR {:.3}; failed {}+{}; unmet: {:?} ({:.1}s)",
            tau.bias,
            sd,
            tau.cr.unwrap(),
            xi.bias,
            xi.cr.unwrap(),
            s.n_failed,
            s.n_variance_failed,
            failed,
            start.elapsed().as_secs_f64()
        ),
        published_figures: true,
    }
}

fn hajek_vs_ht_length() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, scenario) in Scenario::ALL.into_iter().enumerate() {
        let spec = ScenarioSpec::new(scenario, 250, 500, 40 + k as u64).unwrap();
        let s = run_study(&spec).unwrap();
        let ht = s.row(Estimand::Xi, WeightScheme::HorvitzThompson);
        let hj = s.row(Estimand::Xi, WeightScheme::Hajek);
        let sd_ok = hj.se.unwrap() <= ht.se.unwrap();
        let bias_ok = ht.bias.abs() <= hj.bias.abs() + 0.01;
        pass &= sd_ok && bias_ok;
        parts.push(format!(
            "S{}: SD {:.4}/{:.4} {} BIAS {:.4}/{:.4} {} failed {}+{}",
            scenario.id(),
            hj.se.unwrap(),
            ht.se.unwrap(),
            if sd_ok { "ok" } else { "X" },
            ht.bias,
            hj.bias,
            if bias_ok { "ok" } else { "X" },
            s.n_failed,
            s.n_variance_failed
        ));
    }
    Outcome {
        id: 4,
        name: "n=250: Hajek xi SD <= HT, HT xi bias not worse",
        pass,
        detail: format!("{} ({:.1}s)", parts.join("; "), start.elapsed().as_secs_f64()),
        published_figures: true,
    }
}

fn sandwich_calibration() -> Outcome {
    let start = Instant::now();
    let spec = ScenarioSpec::new(Scenario::Two, 1000, 500, 5).unwrap();
    let s = run_study(&spec).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &s.rows {
        let ratio = r.mean_est_se.unwrap() / r.se.unwrap();
        pass &= (0.85..=1.15).contains(&ratio);
        parts.push(format!("{}-{} {ratio:.3}", r.estimand.label(), r.scheme));
    }
    Outcome {
        id: 5,
        name: "Sandwich SE calibration, scenario 2, n=1000",
        pass,
        detail: format!(
            "mean SE / SD: {}; failed {}+{} ({:.1}s)",
            parts.join(", "),
            s.n_failed,
            s.n_variance_failed,
            start.elapsed().as_secs_f64()
        ),
        published_figures: false,
    }
}

fn effects_of(w: [f64; 4]) -> (f64, f64) {
    let mu1 = w[1].atan2(w[0]);
    let mu0 = w[3].atan2(w[2]);
    (wrap(mu1 - mu0), w[0].hypot(w[1]) - w[2].hypot(w[3]))
}

fn jacobian_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (r1, r0) = (rng.random_range(0.2..0.95), rng.random_range(0.2..0.95));
        let (m1, m0): (f64, f64) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
        let w = [r1 * m1.cos(), r1 * m1.sin(), r0 * m0.cos(), r0 * m0.sin()];
        let j = jacobian(&OmegaEstimate::from_array(w, WeightScheme::HorvitzThompson, 1)).unwrap();
        let mut scale: f64 = 0.0;
        let mut err: f64 = 0.0;
        for c in 0..4 {
            let (mut up, mut dn) = (w, w);
            up[c] += h;
            dn[c] -= h;
            let (tu, xu) = effects_of(up);
            let (td, xd) = effects_of(dn);
            let fd = [wrap(tu - td) / (2.0 * h), (xu - xd) / (2.0 * h)];
            for r in 0..2 {
                scale = scale.max(j[(r, c)].abs());
                err = err.max((j[(r, c)] - fd[r]).abs());
            }
        }
        worst = worst.max(err / scale);
    }
    Outcome {
        id: 6,
        name: "Jacobian vs central finite differences",
        pass: worst <= 1e-6,
        detail: format!("max relative error {worst:.2e} over 100 points"),
        published_figures: false,
    }
}

fn score_norm(rows: &[DesignRow], eta: &[f64]) -> f64 {
    let mut s = vec![0.0; eta.len()];
    for r in rows {
        let z: f64 = r.x.iter().zip(eta).map(|(a, b)| a * b).sum();
        let resid = f64::from(u8::from(r.treated)) - 1.0 / (1.0 + (-z).exp());
        for (sj, xj) in s.iter_mut().zip(&r.x) {
            *sj += resid * xj;
        }
    }
    s.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn log_lik(x: &[f64], a: &[bool], b0: f64, b1: f64) -> f64 {
    x.iter()
        .zip(a)
        .map(|(&xi, &ai)| {
            let z = b0 + b1 * xi;
            if ai {
                -(1.0 + (-z).exp()).ln()
            } else {
                -(1.0 + z.exp()).ln()
            }
        })
        .sum()
}

fn logistic_mle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_score: f64 = 0.0;
    let mut fitted = 0;
    while fitted < 50 {
        let n = rng.random_range(50..=500);
        let eta = [rng.random_range(-1.0..1.0), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
        let rows: Vec<DesignRow> = (0..n)
            .map(|_| {
                let x = vec![1.0, rng.random_range(-2.0..2.0), rng.random::<f64>()];
                let z: f64 = x.iter().zip(&eta).map(|(a, b)| a * b).sum();
                let a = rng.random::<f64>() < 1.0 / (1.0 + (-z).exp());
                DesignRow::new(x, a)
            })
            .collect();
        let Ok(fit) = fit_logistic(&rows, &FitOptions::default()) else { continue };
        worst_score = worst_score.max(score_norm(&rows, &fit.eta));
        fitted += 1;
    }

    let x = [-1.3, -0.7, -0.2, 0.1, 0.4, 0.9, 1.5, 2.2];
    let a = [false, true, false, false, true, false, true, true];
    let rows: Vec<DesignRow> = x.iter().zip(&a).map(|(&xi, &ai)| DesignRow::new(vec![1.0, xi], ai)).collect();
    let fit = fit_logistic(&rows, &FitOptions::default()).unwrap();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=400 {
        for j in 0..=400 {
            let (b0, b1) = (-10.0 + 0.05 * i as f64, -10.0 + 0.05 * j as f64);
            let ll = log_lik(&x, &a, b0, b1);
            if ll > best.0 {
                best = (ll, b0, b1);
            }
        }
    }
    let (mut ll, mut b0, mut b1) = best;
    let mut h = 0.05;
    while h > 1e-10 {
        let mut moved = false;
        for (d0, d1) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let cand = log_lik(&x, &a, b0 + d0, b1 + d1);
            if cand > ll {
                (ll, b0, b1) = (cand, b0 + d0, b1 + d1);
                moved = true;
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    let grid_err = (fit.eta[0] - b0).abs().max((fit.eta[1] - b1).abs());

    let mut closed_err: f64 = 0.0;
    for _ in 0..50 {
        let (t, c) = (rng.random_range(1..200usize), rng.random_range(1..200usize));
        let rows: Vec<DesignRow> = (0..t + c).map(|i| DesignRow::new(vec![1.0], i < t)).collect();
        let fit = fit_logistic(&rows, &FitOptions::default()).unwrap();
        closed_err = closed_err.max((fit.eta[0] - (t as f64 / c as f64).ln()).abs());
    }

    Outcome {
        id: 7,
        name: "Logistic MLE",
        pass: worst_score <= 1e-9 && grid_err <= 1e-5 && closed_err <= 1e-10,
        detail: format!(
            "max score {worst_score:.2e} (50 fits); grid oracle diff {grid_err:.2e}; intercept-only diff {closed_err:.2e}"
        ),
        published_figures: false,
    }
}

fn wrapped_cauchy_moments() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_z: f64 = 0.0;
    for (mu, rho) in [(1.0f64, 0.5), (0.0, 0.25), (2.0, 5.0 / 6.0)] {
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| sample_wrapped_cauchy(Angle::new(mu).unwrap(), rho, &mut rng).unwrap().radians())
            .collect();
        let c: Vec<f64> = draws.iter().map(|t| t.cos()).collect();
        let s: Vec<f64> = draws.iter().map(|t| t.sin()).collect();
        let (mc, sc) = mean_se(&c);
        let (ms, ss) = mean_se(&s);
        worst_z = worst_z.max((mc - rho * mu.cos()).abs() / sc).max((ms - rho * mu.sin()).abs() / ss);
    }
    Outcome {
        id: 8,
        name: "Wrapped Cauchy first moment",
        pass: worst_z <= 3.0,
        detail: format!("max |error|/SE {worst_z:.2} over 3 settings of 1e6 draws"),
        published_figures: false,
    }
}

fn minutes_conversion() -> Outcome {
    let m = radians_to_minutes(-0.243);
    Outcome {
        id: 9,
        name: "Radians to clock minutes",
        pass: (m + 55.691).abs() <= 0.01,
        detail: format!("-0.243 rad -> {m:.3} min"),
        published_figures: false,
    }
}

fn bundled_csv_round_trip() -> Outcome {
    let cfg = parse_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_sleep.toml")).unwrap();
    let report = run_analysis(&cfg).unwrap();
    let accounting = report.n_total == report.n_used + report.n_dropped
        && report.dropped.values().sum::<usize>() == report.n_dropped;
    let mut csv = Vec::new();
    emit_report(&report, ReportFormat::Csv, &mut csv).unwrap();
    let round_trip = parse_report_csv(csv.as_slice()).unwrap() == report.rows();
    let again = run_analysis(&cfg).unwrap();
    let mut csv2 = Vec::new();
    emit_report(&again, ReportFormat::Csv, &mut csv2).unwrap();
    let deterministic = csv == csv2;
    Outcome {
        id: 10,
        name: "Bundled CSV: accounting, round trip, determinism",
        pass: accounting && round_trip && deterministic,
        detail: format!(
            "n_total {} = used {} + dropped {} {:?}; round trip {round_trip}; deterministic {deterministic}",
            report.n_total, report.n_used, report.n_dropped, report.dropped
        ),
        published_figures: false,
    }
}

#[test]
fn acceptance() {
    let outcomes = [
        ht_hajek_direction_equivalence(),
        identification_oracle(),
        table_replication(),
        hajek_vs_ht_length(),
        sandwich_calibration(),
        jacobian_finite_differences(),
        logistic_mle(),
        wrapped_cauchy_moments(),
        minutes_conversion(),
        bundled_csv_round_trip(),
    ];
    for o in &outcomes {
        println!(
            "{} [{:>2}] {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail
        );
    }
    let hard: Vec<u8> = outcomes.iter().filter(|o| !o.pass && !o.published_figures).map(|o| o.id).collect();
    let soft: Vec<u8> = outcomes.iter().filter(|o| !o.pass && o.published_figures).map(|o| o.id).collect();
    println!(
        "{} of {} criteria pass; published-figure mismatches: {soft:?}",
        outcomes.iter().filter(|o| o.pass).count(),
        outcomes.len()
    );
    assert!(hard.is_empty(), "failing criteria: {hard:?}");
}
