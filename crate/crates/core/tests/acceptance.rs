//! Acceptance criteria, one line each.

use std::f64::consts::FRAC_PI_4;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qcur::figures::{bell_diagonal_curve, cptp_regression, oneway_scan, schmidt_curve, Region};
use qcur::incompat::{compatible_set, incompat_measure, smeared_xz_parent, IncompatConfig};
use qcur::infotheory::DephasingMap;
use qcur::qmat::{bures_fidelity, c};
use qcur::states::{fit_white_noise, phi_plus, phi_state, white_noise_mix};
use qcur::steering::MeasurementSet;
use qcur::suites::{run_suite, Suite};
use qcur::tomo::{mle_reconstruct, monte_carlo_sivp, pauli36_settings, simulate_counts};

/// Binary entropy written out independently of the library.
fn h2(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

type Criterion = (&'static str, Box<dyn Fn() -> Verdict>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn fig2b() -> Verdict {
    let start = Instant::now();
    let curve = schmidt_curve(0.0, 1.0, 100, 0.0).expect("curve");
    let elapsed = start.elapsed();
    let worst = curve.iter().map(|p| (p.sivp_ideal - h2(p.x)).abs()).fold(0.0, f64::max);
    verdict(
        curve.len() == 101 && worst <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("101 points, max |error| {worst:.2e}, {elapsed:.2?}"),
    )
}

fn fig2c() -> Verdict {
    let curve = bell_diagonal_curve(0.0, 1.0, 100, 0.009, 0.013).expect("curve");
    let worst = curve.iter().map(|p| (p.sivp_ideal - (1.0 - h2(p.x))).abs()).fold(0.0, f64::max);
    verdict(curve.len() == 101 && worst <= 1e-9, format!("101 points, max |error| {worst:.2e}"))
}

fn cptp() -> Verdict {
    let r = cptp_regression().expect("regression");
    let printed = [[c(0.506, 0.0), c(0.117, 0.026)], [c(0.117, -0.026), c(0.494, 0.0)]];
    let mut worst = 0.0f64;
    for (i, row) in printed.iter().enumerate() {
        for (j, want) in row.iter().enumerate() {
            worst = worst.max((r.image_of_mixed.get(i, j) - want).norm());
        }
    }
    let pass = (r.sivp_before - 0.061).abs() <= 0.01 && (r.sivp_after - 0.198).abs() <= 0.01 && worst <= 2e-3;
    verdict(
        pass,
        format!(
            "before {:.4}, after {:.4}, image of 1/2 off by {worst:.1e}",
            r.sivp_before, r.sivp_after
        ),
    )
}

fn suite(s: Suite, trials: usize, seed: u64, budget: Option<Duration>) -> Verdict {
    let start = Instant::now();
    let r = run_suite(s, trials, seed).expect("suite runs");
    let elapsed = start.elapsed();
    let in_time = budget.is_none_or(|b| elapsed < b);
    verdict(
        r.passed() && r.trials == trials && in_time,
        format!(
            "{} trials, {} failures, worst margin {:.2e}, {elapsed:.2?}{}",
            r.trials,
            r.failures,
            r.worst_margin,
            if r.details.as_object().is_some_and(|o| !o.is_empty()) {
                format!(", {}", r.details)
            } else {
                String::new()
            }
        ),
    )
}

fn incompatibility() -> Verdict {
    let pauli = incompat_measure(&MeasurementSet::pauli_xz(), &IncompatConfig::new(2, 1)).expect("pauli");
    let smeared = incompat_measure(
        &compatible_set(&smeared_xz_parent(0.6).expect("parent")),
        &IncompatConfig::new(2, 2),
    )
    .expect("smeared");
    let wirings = run_suite(Suite::Postprocess, 200, 3).expect("postprocess");
    let pass = (pauli.value - 1.0).abs() <= 1e-3 && smeared.value <= 1e-6 && wirings.passed();
    verdict(
        pass,
        format!(
            "pauli X/Z {:.6}, smeared {:.1e}, {} wirings with {} increases beyond 1e-3",
            pauli.value, smeared.value, wirings.trials, wirings.failures
        ),
    )
}

fn fig3() -> Verdict {
    let start = Instant::now();
    let scan = oneway_scan(50, 50).expect("scan");
    let elapsed = start.elapsed();
    let count = |r: Region| scan.iter().filter(|p| p.region == r).count();
    let corner = scan
        .iter()
        .find(|p| p.s == 1.0 && (p.theta - FRAC_PI_4).abs() < 1e-15)
        .map(|p| p.region);
    let pass = count(Region::II) > 0 && corner == Some(Region::I) && elapsed < Duration::from_secs(120);
    verdict(
        pass,
        format!(
            "regions I/II/III = {}/{}/{}, corner (1, π/4) {:?}, {elapsed:.2?}",
            count(Region::I),
            count(Region::II),
            count(Region::III),
            corner
        ),
    )
}

fn tomography() -> Verdict {
    let settings = pauli36_settings();
    let plan = MeasurementSet::pauli_xz();
    let z = DephasingMap::computational(2);
    // 10⁴ mean counts per setting over 36 settings
    let mean_total = 3.6e5;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, q) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let rho = phi_state(q, 0.0).expect("state");
        let rec = simulate_counts(&rho, &settings, mean_total, 100 + k as u64).expect("counts");
        let mc = monte_carlo_sivp(&rec, 1000, &plan, &z, 200 + k as u64).expect("monte carlo");
        let sigma = mc.sigma.expect("1000 reps");
        // the witness of the observed counts, with the resampling spread as its error bar
        let z_score = (mc.point_estimate - h2(q)) / sigma;
        pass &= z_score.abs() <= 2.0;
        parts.push(format!(
            "q={q}: {:.5}±{:.5} vs {:.5} ({z_score:+.2}σ, resampled mean {:.5})",
            mc.point_estimate,
            sigma,
            h2(q),
            mc.mean
        ));
    }
    let noisy = white_noise_mix(&phi_plus(), 0.026).expect("noisy");
    let rec = simulate_counts(&noisy, &settings, mean_total, 300).expect("counts");
    let rho_hat = mle_reconstruct(&rec).expect("mle").rho_hat;
    let fit = fit_white_noise(&rho_hat, &phi_plus()).expect("fit");
    pass &= (fit.p - 0.026).abs() <= 0.005;
    parts.push(format!(
        "noise fit p={:.4} (F={:.5}, fidelity to target {:.5})",
        fit.p,
        fit.fidelity,
        bures_fidelity(&rho_hat, &noisy).expect("fidelity")
    ));
    verdict(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("schmidt-family curve matches H_b(q)", Box::new(fig2b)),
        ("Bell-diagonal curve matches 1 - H_b(r)", Box::new(fig2c)),
        ("coherence-generating channel raises the witness", Box::new(cptp)),
        ("LHS soundness", Box::new(|| suite(Suite::Lhs, 1000, 11, None))),
        ("GIO monotonicity (componentwise)", Box::new(|| suite(Suite::Gio, 1000, 12, None))),
        (
            "ICO monotonicity",
            Box::new(|| suite(Suite::Ico, 10_000, 13, Some(Duration::from_secs(300)))),
        ),
        ("EUR violation implies witness violation", Box::new(|| suite(Suite::Eur, 1000, 14, None))),
        ("incompatibility monotone", Box::new(incompatibility)),
        ("one-way steering scan", Box::new(fig3)),
        ("tomography pipeline", Box::new(tomography)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        failed += usize::from(!v.pass);
        println!(
            "acceptance {:>2} {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
