//! Randomized property suites.
//!
//! Trial `i` of a suite draws from stream `i` of a generator seeded with the
//! master seed, so reports do not depend on how trials are scheduled.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::channels::{
    one_way_gio_apply, random_ico_with, random_simplex, wire_assemblage, OneWayGioProtocol, WiringMap,
};
use crate::error::{QcurError, Result};
use crate::figures;
use crate::incompat::{incompat_measure, post_process_measurements, IncompatConfig};
use crate::infotheory::{DephasingMap, ReferenceBasis};
use crate::io::{AssemblageJson, ChannelJson, MatrixJson};
use crate::states::{haar_random_pure_with, haar_random_state_env, haar_random_state_with, random_basis};
use crate::steering::{
    assemblage_from_lhs, assemblage_from_state, qcur_vs_eur, sivp, steering_report, Assemblage, LhsModel,
    MeasurementSet, VIOLATION_THRESHOLD,
};

/// Slack for monotonicity and convexity comparisons.
pub const MONOTONE_SLACK: f64 = 1e-10;
/// Slack for comparisons between two optimizer lower bounds.
pub const OPTIMIZER_SLACK: f64 = 1e-3;
/// At most this many counterexamples are kept in a report.
pub const MAX_COUNTEREXAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Lhs,
    Gio,
    Ico,
    Wiring,
    Convexity,
    Eur,
    CptpRegression,
    Postprocess,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Lhs,
        Suite::Gio,
        Suite::Ico,
        Suite::Wiring,
        Suite::Convexity,
        Suite::Eur,
        Suite::CptpRegression,
        Suite::Postprocess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lhs => "lhs",
            Suite::Gio => "gio",
            Suite::Ico => "ico",
            Suite::Wiring => "wiring",
            Suite::Convexity => "convexity",
            Suite::Eur => "eur",
            Suite::CptpRegression => "cptp-regression",
            Suite::Postprocess => "postprocess",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                format!("unknown suite {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    pub failures: usize,
    /// Largest value of the checked quantity that must stay non-positive
    /// (e.g. the witness increase), over all trials.
    pub worst_margin: f64,
    /// Suite-specific totals, such as how many trials violated the EUR.
    pub details: Value,
    pub counterexamples: Vec<Value>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Outcome {
    /// Must be `<= 0` for the trial to pass.
    margin: f64,
    failed: bool,
    tag: Option<&'static str>,
    dump: Option<Value>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn run_trials(
    suite: Suite,
    trials: usize,
    seed: u64,
    f: impl Fn(usize, &mut ChaCha8Rng) -> Result<Outcome> + Sync,
) -> Result<SuiteReport> {
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| f(i, &mut trial_rng(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut tags = serde_json::Map::new();
    for tag in outcomes.iter().filter_map(|o| o.tag) {
        let n = tags.get(tag).and_then(Value::as_u64).unwrap_or(0);
        tags.insert(tag.to_string(), json!(n + 1));
    }
    Ok(SuiteReport {
        suite: suite.name().to_string(),
        trials,
        seed,
        failures: outcomes.iter().filter(|o| o.failed).count(),
        worst_margin: outcomes.iter().map(|o| o.margin).fold(f64::NEG_INFINITY, f64::max),
        details: Value::Object(tags),
        counterexamples: outcomes
            .into_iter()
            .filter(|o| o.failed)
            .filter_map(|o| o.dump)
            .take(MAX_COUNTEREXAMPLES)
            .collect(),
    })
}

fn check(margin: f64, slack: f64, dump: impl FnOnce() -> Value) -> Outcome {
    let failed = margin > slack;
    Outcome {
        margin,
        failed,
        tag: None,
        dump: failed.then(dump),
    }
}

fn xz_assemblage(rho: &crate::qmat::DensityMatrix) -> Result<Assemblage> {
    assemblage_from_state(rho, &MeasurementSet::pauli_xz())
}

fn z2() -> DephasingMap {
    DephasingMap::computational(2)
}

fn asm_json(a: &Assemblage) -> Value {
    serde_json::to_value(AssemblageJson::from(a)).expect("serializable")
}

fn random_lhs(rng: &mut impl Rng) -> Result<LhsModel> {
    let n_settings = rng.random_range(2..=4);
    let n_lambda = rng.random_range(1..=4);
    let states = (0..n_lambda).map(|_| haar_random_state_with(2, rng)).collect();
    let weights = random_simplex(n_lambda, rng);
    let responses = (0..n_settings)
        .map(|_| {
            let n_out = rng.random_range(2..=4);
            (0..n_lambda)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        let mut v = vec![0.0; n_out];
                        v[rng.random_range(0..n_out)] = 1.0;
                        v
                    } else {
                        random_simplex(n_out, rng)
                    }
                })
                .collect()
        })
        .collect();
    LhsModel::new(states, weights, responses)
}

fn lhs_trial(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let model = random_lhs(rng)?;
    let asm = assemblage_from_lhs(&model);
    let basis = if rng.random_bool(0.5) {
        ReferenceBasis::computational(2)
    } else {
        random_basis(2, rng)
    };
    let v = sivp(&asm, &DephasingMap::new(basis.clone()))?;
    Ok(check(v, VIOLATION_THRESHOLD, || {
        json!({ "assemblage": asm_json(&asm), "basis": basis, "sivp": v })
    }))
}

fn gio_trial(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let rho = haar_random_pure_with(2, 2, rng);
    let asm = xz_assemblage(&rho)?;
    let proto = OneWayGioProtocol::random(2, &asm.outcome_counts(), rng.random())?;
    let out = one_way_gio_apply(&proto, &asm)?;
    let before = steering_report(&asm, &z2())?;
    let after = steering_report(&out, &z2())?;
    let margin = (after.sivp - before.sivp)
        .max(after.cd_star - before.cd_star)
        .max(before.h_star - after.h_star);
    Ok(check(margin, MONOTONE_SLACK, || {
        json!({
            "state": MatrixJson::from(rho.matrix()),
            "protocol_seed": proto.seed(),
            "before": before,
            "after": after,
        })
    }))
}

fn ico_trial(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let rho = haar_random_pure_with(2, 2, rng);
    let asm = xz_assemblage(&rho)?;
    let n_kraus = rng.random_range(1..=4);
    let ch = random_ico_with(2, n_kraus, rng)?;
    let before = sivp(&asm, &z2())?;
    let after = sivp(&ch.apply_to_assemblage(&asm)?, &z2())?;
    Ok(check(after - before, MONOTONE_SLACK, || {
        json!({
            "state": MatrixJson::from(rho.matrix()),
            "channel": ChannelJson::from(&ch),
            "before": before,
            "after": after,
        })
    }))
}

fn wiring_trial(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let rho = haar_random_pure_with(2, 2, rng);
    let asm = xz_assemblage(&rho)?;
    let n_out_settings = rng.random_range(1..=3);
    let out_shape: Vec<usize> = (0..n_out_settings).map(|_| rng.random_range(1..=3)).collect();
    let w = WiringMap::random_with(&asm.outcome_counts(), &out_shape, rng);
    let before = sivp(&asm, &z2())?;
    let wired = wire_assemblage(&w, &asm)?;
    let after = sivp(&wired, &z2())?;
    Ok(check(after - before, MONOTONE_SLACK, || {
        json!({
            "state": MatrixJson::from(rho.matrix()),
            "p_x": w.p_x(),
            "p_a": w.p_a(),
            "before": before,
            "after": after,
        })
    }))
}

fn random_two_qubit_state(rng: &mut impl Rng) -> crate::qmat::DensityMatrix {
    let d_env = [1, 2, 4][rng.random_range(0..3)];
    haar_random_state_env(4, d_env, rng)
}

fn convexity_trial(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let a = xz_assemblage(&random_two_qubit_state(rng))?;
    let b = xz_assemblage(&random_two_qubit_state(rng))?;
    let (va, vb) = (sivp(&a, &z2())?, sivp(&b, &z2())?);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_q = 0.0;
    for k in 1..=9 {
        let q = k as f64 / 10.0;
        let mixed = sivp(&a.mix(&b, q)?, &z2())?;
        let gap = mixed - (q * va + (1.0 - q) * vb);
        if gap > worst {
            worst = gap;
            worst_q = q;
        }
    }
    Ok(check(worst, MONOTONE_SLACK, || {
        json!({ "first": asm_json(&a), "second": asm_json(&b), "q": worst_q, "gap": worst })
    }))
}

fn eur_trial(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let rho = random_two_qubit_state(rng);
    let asm = xz_assemblage(&rho)?;
    let cmp = qcur_vs_eur(&asm, &z2(), &DephasingMap::new(ReferenceBasis::pauli_x()))?;
    let margin = if cmp.eur_violated { -cmp.eur_margin - cmp.sivp } else { f64::NEG_INFINITY };
    let mut out = check(margin, VIOLATION_THRESHOLD, || {
        json!({ "state": MatrixJson::from(rho.matrix()), "comparison": cmp })
    });
    out.failed |= !cmp.implication_holds;
    out.tag = cmp.eur_violated.then_some("eur_violations");
    Ok(out)
}

fn postprocess_trial(rng: &mut ChaCha8Rng, baseline: f64, cfg: &IncompatConfig) -> Result<Outcome> {
    let m = MeasurementSet::pauli_xz();
    let n_out_settings = rng.random_range(1..=3);
    let out_shape: Vec<usize> = (0..n_out_settings).map(|_| rng.random_range(2..=3)).collect();
    let w = WiringMap::random_with(&m.outcome_counts(), &out_shape, rng);
    let processed = post_process_measurements(&w, &m)?;
    let v = incompat_measure(&processed, cfg)?.value;
    Ok(check(v - baseline, OPTIMIZER_SLACK, || {
        json!({ "p_x": w.p_x(), "p_a": w.p_a(), "value": v, "baseline": baseline })
    }))
}

/// Reduced optimizer settings used inside the post-processing suite.
pub fn reduced_incompat_config(seed: u64) -> IncompatConfig {
    IncompatConfig {
        grid: 11,
        n_starts: 3,
        budget: 300,
        ..IncompatConfig::new(2, seed)
    }
}

pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Lhs => run_trials(suite, trials, seed, |_, rng| lhs_trial(rng)),
        Suite::Gio => run_trials(suite, trials, seed, |_, rng| gio_trial(rng)),
        Suite::Ico => run_trials(suite, trials, seed, |_, rng| ico_trial(rng)),
        Suite::Wiring => run_trials(suite, trials, seed, |_, rng| wiring_trial(rng)),
        Suite::Convexity => run_trials(suite, trials, seed, |_, rng| convexity_trial(rng)),
        Suite::Eur => run_trials(suite, trials, seed, |_, rng| eur_trial(rng)),
        Suite::Postprocess => {
            let baseline = incompat_measure(&MeasurementSet::pauli_xz(), &IncompatConfig::new(2, seed))?.value;
            run_trials(suite, trials, seed, |i, rng| {
                postprocess_trial(rng, baseline, &reduced_incompat_config(seed.wrapping_add(i as u64)))
            })
        }
        Suite::CptpRegression => {
            let r = figures::cptp_regression()?;
            let off = (r.sivp_before - CPTP_BEFORE).abs().max((r.sivp_after - CPTP_AFTER).abs());
            let margin = off - CPTP_TOLERANCE;
            Ok(SuiteReport {
                suite: suite.name().to_string(),
                trials: 1,
                seed,
                failures: usize::from(margin > 0.0),
                worst_margin: margin,
                details: json!({
                    "sivp_before": r.sivp_before,
                    "sivp_after": r.sivp_after,
                    "expected_before": CPTP_BEFORE,
                    "expected_after": CPTP_AFTER,
                    "tolerance": CPTP_TOLERANCE,
                }),
                counterexamples: Vec::new(),
            })
        }
    }
}

/// Witness values of [`crate::channels::coherence_generating_example`]
/// before and after the channel, to three decimals.
pub const CPTP_BEFORE: f64 = 0.061;
pub const CPTP_AFTER: f64 = 0.198;
pub const CPTP_TOLERANCE: f64 = 0.01;

/// Fails early on nonsensical trial counts.
pub fn validate_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(QcurError::invalid("trials must be at least 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_runs_pass_and_are_reproducible() {
        for s in [Suite::Lhs, Suite::Gio, Suite::Ico, Suite::Wiring, Suite::Convexity, Suite::Eur] {
            let r = run_suite(s, 20, 7).unwrap();
            assert!(r.passed(), "{s}: {:?}", r.counterexamples);
            let again = run_suite(s, 20, 7).unwrap();
            assert_eq!(r.worst_margin, again.worst_margin);
        }
        assert!(run_suite(Suite::CptpRegression, 1, 0).unwrap().passed());
    }
}
