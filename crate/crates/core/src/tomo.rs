//! Two-photon coincidence data, maximum-likelihood state reconstruction and
//! Poisson Monte Carlo error bars.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QcurError, Result};
use crate::infotheory::DephasingMap;
use crate::qmat::{self, c, ComplexMatrix, DensityMatrix, Ket};
use crate::steering::{self, MeasurementSet};

/// Polarization eigenstates of the three Pauli operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
        Polarization::R,
        Polarization::L,
    ];

    /// `H, V → |0>, |1>`; `D, A → |±>`; `R, L → |±i>`.
    pub fn ket(self) -> Ket {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            Polarization::H => vec![c(1.0, 0.0), c(0.0, 0.0)],
            Polarization::V => vec![c(0.0, 0.0), c(1.0, 0.0)],
            Polarization::D => vec![c(s, 0.0), c(s, 0.0)],
            Polarization::A => vec![c(s, 0.0), c(-s, 0.0)],
            Polarization::R => vec![c(s, 0.0), c(0.0, s)],
            Polarization::L => vec![c(s, 0.0), c(0.0, -s)],
        };
        Ket::new(amps).expect("unit vectors")
    }

    pub fn symbol(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
            Polarization::D => 'D',
            Polarization::A => 'A',
            Polarization::R => 'R',
            Polarization::L => 'L',
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for Polarization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "H" => Ok(Polarization::H),
            "V" => Ok(Polarization::V),
            "D" => Ok(Polarization::D),
            "A" => Ok(Polarization::A),
            "R" => Ok(Polarization::R),
            "L" => Ok(Polarization::L),
            other => Err(format!("unknown polarization setting {other:?} (expected one of H,V,D,A,R,L)")),
        }
    }
}

/// Product projector `|α><α| ⊗ |β><β|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingPair {
    pub alice: Ket,
    pub bob: Ket,
    pub labels: Option<(Polarization, Polarization)>,
}

impl SettingPair {
    pub fn labeled(a: Polarization, b: Polarization) -> Self {
        Self {
            alice: a.ket(),
            bob: b.ket(),
            labels: Some((a, b)),
        }
    }

    pub fn projector(&self) -> ComplexMatrix {
        self.alice.kron(&self.bob).projector()
    }
}

/// All 36 pairs of Pauli eigenstates, Alice's label varying slowest.
pub fn pauli36_settings() -> Vec<SettingPair> {
    Polarization::ALL
        .iter()
        .flat_map(|&a| Polarization::ALL.iter().map(move |&b| SettingPair::labeled(a, b)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceRecord {
    pub settings: Vec<SettingPair>,
    pub counts: Vec<u64>,
    pub metadata: String,
    /// Counts per unit Born probability, when known.
    pub flux: Option<f64>,
}

impl CoincidenceRecord {
    pub fn new(settings: Vec<SettingPair>, counts: Vec<u64>) -> Result<Self> {
        if settings.is_empty() {
            return Err(QcurError::invalid("record has no settings"));
        }
        if settings.len() != counts.len() {
            return Err(QcurError::invalid(format!(
                "{} settings but {} counts",
                settings.len(),
                counts.len()
            )));
        }
        let dim = settings[0].alice.dim() * settings[0].bob.dim();
        if settings.iter().any(|s| s.alice.dim() * s.bob.dim() != dim) {
            return Err(QcurError::invalid("settings act on different dimensions"));
        }
        Ok(Self {
            settings,
            counts,
            metadata: String::new(),
            flux: None,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.settings[0].alice.dim(), self.settings[0].bob.dim())
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Checks that the labeled settings are exactly the 36 Pauli pairs, each once.
    pub fn check_pauli36(&self) -> Result<()> {
        let mut seen: BTreeMap<(Polarization, Polarization), usize> = BTreeMap::new();
        for (i, s) in self.settings.iter().enumerate() {
            let Some(l) = s.labels else {
                return Err(QcurError::invalid(format!("setting {i} has no polarization labels")));
            };
            *seen.entry(l).or_default() += 1;
        }
        let missing: Vec<String> = pauli36_settings()
            .iter()
            .filter_map(|s| s.labels)
            .filter(|l| !seen.contains_key(l))
            .map(|(a, b)| format!("{a}{b}"))
            .collect();
        let duplicates: Vec<String> = seen
            .iter()
            .filter(|(_, &n)| n > 1)
            .map(|((a, b), n)| format!("{a}{b} (x{n})"))
            .collect();
        if missing.is_empty() && duplicates.is_empty() {
            return Ok(());
        }
        let mut msg = String::from("incomplete tomography settings:");
        if !missing.is_empty() {
            msg.push_str(&format!(" missing [{}]", missing.join(", ")));
        }
        if !duplicates.is_empty() {
            msg.push_str(&format!(" duplicated [{}]", duplicates.join(", ")));
        }
        Err(QcurError::invalid(msg))
    }

    /// Reads `alice_setting,bob_setting,counts` rows.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| QcurError::Parse { line: 1, message: e.to_string() })?
            .clone();
        let want = ["alice_setting", "bob_setting", "counts"];
        if headers.iter().collect::<Vec<_>>() != want {
            return Err(QcurError::Parse {
                line: 1,
                message: format!("expected header {:?}, found {:?}", want.join(","), headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut settings = Vec::new();
        let mut counts = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| QcurError::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let parse_err = |message: String| QcurError::Parse { line, message };
            if row.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, found {}", row.len())));
            }
            let a: Polarization = row[0].parse().map_err(parse_err)?;
            let b: Polarization = row[1].parse().map_err(parse_err)?;
            let n: u64 = row[2]
                .parse()
                .map_err(|_| parse_err(format!("counts must be a non-negative integer, found {:?}", &row[2])))?;
            settings.push(SettingPair::labeled(a, b));
            counts.push(n);
        }
        Self::new(settings, counts)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| QcurError::Io(std::io::Error::other(e));
        w.write_record(["alice_setting", "bob_setting", "counts"]).map_err(io)?;
        for (s, n) in self.settings.iter().zip(&self.counts) {
            let Some((a, b)) = s.labels else {
                return Err(QcurError::invalid("only labeled settings can be written as CSV"));
            };
            w.write_record([a.to_string(), b.to_string(), n.to_string()]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn born_probabilities(rho: &DensityMatrix, settings: &[SettingPair]) -> Result<Vec<f64>> {
    settings
        .iter()
        .map(|s| {
            let k = s.alice.kron(&s.bob);
            if k.dim() != rho.dim() {
                return Err(QcurError::Dimension {
                    expected: rho.dim(),
                    got: k.dim(),
                });
            }
            Ok(k.expectation(rho.matrix()).max(0.0))
        })
        .collect()
}

/// Per-setting flux `mean_total / Σ_k p_k`, so the expected total is `mean_total`.
fn flux_for(probs: &[f64], mean_total: f64) -> f64 {
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        mean_total / total
    } else {
        mean_total / probs.len() as f64
    }
}

/// Poisson counts with means `flux · <α β|ρ|α β>`.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[SettingPair],
    mean_total: f64,
    seed: u64,
) -> Result<CoincidenceRecord> {
    if !(mean_total > 0.0 && mean_total.is_finite()) {
        return Err(QcurError::invalid("mean_total must be positive"));
    }
    let probs = born_probabilities(rho, settings)?;
    let flux = flux_for(&probs, mean_total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = probs.iter().map(|&p| poisson(flux * p, &mut rng)).collect();
    let mut rec = CoincidenceRecord::new(settings.to_vec(), counts)?;
    rec.flux = Some(flux);
    rec.metadata = format!("simulated; mean_total={mean_total}; seed={seed}");
    Ok(rec)
}

/// Expected counts rounded to the nearest integer.
pub fn expected_counts(rho: &DensityMatrix, settings: &[SettingPair], mean_total: f64) -> Result<CoincidenceRecord> {
    let probs = born_probabilities(rho, settings)?;
    let flux = flux_for(&probs, mean_total);
    let counts = probs.iter().map(|&p| (flux * p).round() as u64).collect();
    let mut rec = CoincidenceRecord::new(settings.to_vec(), counts)?;
    rec.flux = Some(flux);
    Ok(rec)
}

fn poisson(mean: f64, rng: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleOptions {
    pub dilution: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub record_loglik: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            dilution: 0.5,
            max_iterations: 5000,
            tolerance: 1e-10,
            record_loglik: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TomoResult {
    pub rho_hat: DensityMatrix,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub informationally_complete: bool,
    /// Log-likelihood after every iteration, when requested.
    pub loglik_trace: Vec<f64>,
}

/// Linear maps between `vec(ρ)` (column-major) and the setting probabilities.
struct Design {
    dim: usize,
    /// Row `k` is `conj(vec(Π_k))`, so `p = A vec(ρ)`.
    a: DMatrix<C64>,
    /// `vec(Σ_k w_k Π_k) = A† w`.
    a_adj: DMatrix<C64>,
    /// `(Σ_k Π_k)^{-1/2}` on its support.
    h: DMatrix<C64>,
    rank: usize,
}

impl Design {
    fn new(settings: &[SettingPair]) -> Result<Self> {
        let projectors: Vec<ComplexMatrix> = settings.iter().map(SettingPair::projector).collect();
        let dim = projectors[0].rows();
        let n = dim * dim;
        let a = DMatrix::from_fn(projectors.len(), n, |k, idx| projectors[k].inner().as_slice()[idx].conj());
        let a_adj = a.adjoint();
        let g = qmat::sum_matrices(&projectors).expect("non-empty");
        let h = qmat::pinv_sqrt_matrix(&g)?.into_inner();
        let sv = a.clone().svd(false, false).singular_values;
        let cut = sv.max() * 1e-9;
        let rank = sv.iter().filter(|&&s| s > cut).count();
        Ok(Self { dim, a, a_adj, h, rank })
    }

    fn probabilities(&self, rho: &DMatrix<C64>) -> DVector<f64> {
        let v = DVector::from_column_slice(rho.as_slice());
        (&self.a * v).map(|z| z.re)
    }

    fn weighted_sum(&self, w: &DVector<f64>) -> DMatrix<C64> {
        let v = &self.a_adj * w.map(|x| c(x, 0.0));
        DMatrix::from_column_slice(self.dim, self.dim, v.as_slice())
    }
}

/// Rank of the map `ρ ↦ (Tr Π_k ρ)_k`; `d²` means informationally complete.
pub fn design_rank(settings: &[SettingPair]) -> Result<usize> {
    Ok(Design::new(settings)?.rank)
}

const PROB_FLOOR: f64 = 1e-300;

/// Profile Poisson log-likelihood with the flux set to its maximum-likelihood
/// value `N / Σ p_k`, constant terms dropped.
fn loglik(counts: &[f64], probs: &DVector<f64>) -> f64 {
    let n: f64 = counts.iter().sum();
    let total: f64 = probs.iter().sum();
    let mut l = 0.0;
    for (&nk, &pk) in counts.iter().zip(probs.iter()) {
        if nk > 0.0 {
            l += nk * (pk.max(PROB_FLOOR) / total).ln();
        }
    }
    l - n
        + if n > 0.0 { n * n.ln() } else { 0.0 }
}

pub fn mle_reconstruct(rec: &CoincidenceRecord) -> Result<TomoResult> {
    mle_reconstruct_with(rec, &MleOptions::default())
}

/// Diluted fixed-point ascent `ρ ← N[(1-ε)ρ + ε H R ρ R H]` with
/// `R = Σ_k n_k / (f p_k) Π_k` and `H = (Σ_k Π_k)^{-1/2}`.
pub fn mle_reconstruct_with(rec: &CoincidenceRecord, opts: &MleOptions) -> Result<TomoResult> {
    let design = Design::new(&rec.settings)?;
    mle_with_design(&design, &rec.counts, rec.flux, opts)
}

fn mle_with_design(design: &Design, counts: &[u64], flux: Option<f64>, opts: &MleOptions) -> Result<TomoResult> {
    if !(opts.dilution > 0.0 && opts.dilution <= 1.0) {
        return Err(QcurError::invalid("dilution must lie in (0, 1]"));
    }
    let d = design.dim;
    let counts: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let total_counts: f64 = counts.iter().sum();
    if total_counts <= 0.0 {
        return Err(QcurError::invalid("record has no counts"));
    }
    let eps = opts.dilution;
    let mut rho = DMatrix::<C64>::identity(d, d).map(|z| z / d as f64);
    let mut probs = design.probabilities(&rho);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let f = flux.unwrap_or(total_counts / probs.sum());
        let w = DVector::from_iterator(
            counts.len(),
            counts.iter().zip(probs.iter()).map(|(&n, &p)| if n > 0.0 { n / (f * p.max(PROB_FLOOR)) } else { 0.0 }),
        );
        let r = design.weighted_sum(&w);
        let hr = &design.h * &r;
        let step = &hr * &rho * hr.adjoint();
        let mut next = rho.scale(1.0 - eps) + step.scale(eps);
        next = (&next + next.adjoint()).scale(0.5);
        let t = next.trace().re;
        next.unscale_mut(t);
        let change = (&next - &rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
        rho = next;
        probs = design.probabilities(&rho);
        iterations += 1;
        if opts.record_loglik {
            trace.push(loglik(&counts, &probs));
        }
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }
    Ok(TomoResult {
        rho_hat: DensityMatrix::project_psd(&ComplexMatrix::from_inner(rho))?,
        loglik: loglik(&counts, &probs),
        iterations,
        converged,
        informationally_complete: design.rank == d * d,
        loglik_trace: trace,
    })
}

/// Summary of Poisson-resampled witness estimates.
#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two repetitions.
    pub sigma: Option<f64>,
    /// Witness value of the reconstruction from the observed counts.
    pub point_estimate: f64,
    pub samples: Vec<f64>,
    pub n_reps: usize,
    pub seed: u64,
}

/// Each repetition redraws every count from a Poisson law with the observed
/// count as mean, reconstructs the state and evaluates the witness of the
/// assemblage Alice's `plan` prepares for Bob. Repetition `i` uses stream `i`
/// of a generator seeded with `seed`, so results do not depend on scheduling.
pub fn monte_carlo_sivp(
    rec: &CoincidenceRecord,
    n_reps: usize,
    plan: &MeasurementSet,
    delta: &DephasingMap,
    seed: u64,
) -> Result<MonteCarloSummary> {
    let design = Design::new(&rec.settings)?;
    let (da, db) = rec.dims();
    if plan.dim() != da || delta.dim() != db {
        return Err(QcurError::invalid("measurement plan or basis does not match the record's dimensions"));
    }
    let opts = MleOptions::default();
    let witness = |counts: &[u64], flux: Option<f64>| -> Result<f64> {
        let res = mle_with_design(&design, counts, flux, &opts)?;
        steering::sivp(&steering::assemblage_from_state(&res.rho_hat, plan)?, delta)
    };
    let point_estimate = witness(&rec.counts, rec.flux)?;
    let samples = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let counts: Vec<u64> = rec.counts.iter().map(|&n| poisson(n as f64, &mut rng)).collect();
            witness(&counts, None)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = if samples.is_empty() { f64::NAN } else { samples.iter().sum::<f64>() / n };
    let sigma = (samples.len() >= 2)
        .then(|| (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Ok(MonteCarloSummary {
        mean,
        sigma,
        point_estimate,
        samples,
        n_reps,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{phi_plus, phi_state};
    use approx::assert_abs_diff_eq;

    #[test]
    fn pauli36_examples() {
        let s = pauli36_settings();
        assert_eq!(s.len(), 36);
        assert!(s.iter().any(|p| p.labels == Some((Polarization::H, Polarization::H))));
        assert!(s.iter().any(|p| p.labels == Some((Polarization::R, Polarization::A))));
        assert_eq!(design_rank(&s).unwrap(), 16);
        let zz: Vec<_> = s.into_iter().filter(|p| matches!(p.labels, Some((Polarization::H | Polarization::V, Polarization::H | Polarization::V)))).collect();
        assert_eq!(design_rank(&zz).unwrap(), 4);
    }

    #[test]
    fn simulation_examples() {
        let rho = phi_state(1.0, 0.0).unwrap();
        let s = vec![SettingPair::labeled(Polarization::V, Polarization::V)];
        assert_eq!(simulate_counts(&rho, &s, 1e4, 1).unwrap().counts, vec![0]);
        let all = pauli36_settings();
        let a = simulate_counts(&phi_plus(), &all, 3.6e5, 4).unwrap();
        assert_eq!(a, simulate_counts(&phi_plus(), &all, 3.6e5, 4).unwrap());
        assert_abs_diff_eq!(a.flux.unwrap(), 4e4, epsilon = 1e-6);
    }

    #[test]
    fn noiseless_reconstruction() {
        let rec = expected_counts(&phi_plus(), &pauli36_settings(), 3.6e5).unwrap();
        let res = mle_reconstruct(&rec).unwrap();
        assert!(res.informationally_complete);
        assert!(qmat::bures_fidelity(&res.rho_hat, &phi_plus()).unwrap() >= 0.9999);
    }

    #[test]
    fn loglik_is_monotone() {
        let rho = phi_state(0.3, 0.2).unwrap();
        let rec = simulate_counts(&rho, &pauli36_settings(), 3.6e4, 11).unwrap();
        let opts = MleOptions {
            record_loglik: true,
            max_iterations: 300,
            ..MleOptions::default()
        };
        let res = mle_reconstruct_with(&rec, &opts).unwrap();
        for w in res.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let rec = simulate_counts(&phi_plus(), &pauli36_settings(), 3.6e4, 2).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let back = CoincidenceRecord::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.counts, rec.counts);
        back.check_pauli36().unwrap();

        let bad = "alice_setting,bob_setting,counts\nH,H,10\nH,X,3\n";
        match CoincidenceRecord::read_csv(bad.as_bytes()) {
            Err(QcurError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let neg = "alice_setting,bob_setting,counts\nH,H,-1\n";
        assert!(matches!(CoincidenceRecord::read_csv(neg.as_bytes()), Err(QcurError::Parse { line: 2, .. })));
        let header = "a,b,c\nH,H,1\n";
        assert!(matches!(CoincidenceRecord::read_csv(header.as_bytes()), Err(QcurError::Parse { line: 1, .. })));

        let partial = "alice_setting,bob_setting,counts\nH,H,10\nH,H,3\n";
        let msg = CoincidenceRecord::read_csv(partial.as_bytes()).unwrap().check_pauli36().unwrap_err().to_string();
        assert!(msg.contains("HV") && msg.contains("HH (x2)"), "{msg}");
    }

    #[test]
    fn monte_carlo_degenerate_cases() {
        let rec = simulate_counts(&phi_plus(), &pauli36_settings(), 3.6e5, 3).unwrap();
        let z = DephasingMap::computational(2);
        let m = MeasurementSet::pauli_xz();
        let one = monte_carlo_sivp(&rec, 1, &m, &z, 5).unwrap();
        assert!(one.sigma.is_none());
        let few = monte_carlo_sivp(&rec, 4, &m, &z, 5).unwrap();
        assert_eq!(few.samples[0], one.samples[0]);
        assert!(few.sigma.unwrap() < 0.01);
    }
}
