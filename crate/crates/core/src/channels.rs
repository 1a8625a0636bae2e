//! Kraus channels, incoherence classes, wirings and one-way protocols acting
//! on assemblages.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{QcurError, Result};
use crate::infotheory::ReferenceBasis;
use crate::qmat::{c, ComplexMatrix, DensityMatrix};
use crate::steering::{check_distribution, Assemblage};

/// Completeness tolerance for generated or user-supplied channels.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Completeness tolerance for channels whose entries were rounded to three decimals.
pub const TRANSCRIBED_TOL: f64 = 5e-3;
/// Off-diagonal mass below this counts as zero when classifying Kraus operators.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// `Λ(ρ) = Σ_μ K_μ ρ K_μ†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
    completeness_error: f64,
}

impl KrausChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerance(kraus, COMPLETENESS_TOL)
    }

    /// Accepts `Σ K†K` up to [`TRANSCRIBED_TOL`] away from the identity;
    /// outputs are trace-renormalized.
    pub fn transcribed(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerance(kraus, TRANSCRIBED_TOL)
    }

    fn with_tolerance(kraus: Vec<ComplexMatrix>, tol: f64) -> Result<Self> {
        let Some(first) = kraus.first() else {
            return Err(QcurError::invalid("channel needs at least one Kraus operator"));
        };
        let (dim_out, dim_in) = (first.rows(), first.cols());
        if let Some(k) = kraus.iter().find(|k| k.rows() != dim_out || k.cols() != dim_in) {
            return Err(QcurError::invalid(format!(
                "Kraus operators must all be {dim_out}x{dim_in}, found {}x{}",
                k.rows(),
                k.cols()
            )));
        }
        let mut total = ComplexMatrix::zeros(dim_in, dim_in);
        for k in &kraus {
            total = &total + &(&k.adjoint() * k);
        }
        let completeness_error = total.max_abs_diff(&ComplexMatrix::identity(dim_in));
        if completeness_error > tol {
            return Err(QcurError::invalid(format!(
                "Kraus operators are not complete (deviation {completeness_error:.3e} > {tol:.1e})"
            )));
        }
        Ok(Self {
            dim_in,
            dim_out,
            kraus,
            completeness_error,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![ComplexMatrix::identity(dim)]).expect("complete")
    }

    /// Complete dephasing in the computational basis.
    pub fn dephasing(dim: usize) -> Self {
        let kraus = (0..dim)
            .map(|i| {
                let mut k = ComplexMatrix::zeros(dim, dim);
                k.set(i, i, c(1.0, 0.0));
                k
            })
            .collect();
        Self::new(kraus).expect("complete")
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// `max |Σ K†K - 1|`.
    pub fn completeness_error(&self) -> f64 {
        self.completeness_error
    }

    /// `Σ K m K†` without renormalization.
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out = &out + &(&(k * m) * &k.adjoint());
        }
        out.hermitian_part()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim_in {
            return Err(QcurError::Dimension {
                expected: self.dim_in,
                got: rho.dim(),
            });
        }
        let out = self.apply_matrix(rho.matrix());
        let t = out.trace().re;
        DensityMatrix::new(out.scale(1.0 / t))
    }

    /// Applies the channel to every member, rescaled by `1 / Tr Λ(ρ_B)` so
    /// the output stays normalized.
    pub fn apply_to_assemblage(&self, asm: &Assemblage) -> Result<Assemblage> {
        if asm.dim() != self.dim_in {
            return Err(QcurError::Dimension {
                expected: self.dim_in,
                got: asm.dim(),
            });
        }
        let norm = self.apply_matrix(&asm.marginal()).trace().re;
        Ok(asm.map_members(|s| self.apply_matrix(s).scale(1.0 / norm)))
    }

    fn in_basis(&self, basis: &ReferenceBasis) -> Result<Vec<ComplexMatrix>> {
        if basis.dim() != self.dim_in || self.dim_in != self.dim_out {
            return Err(QcurError::Dimension {
                expected: self.dim_in,
                got: basis.dim(),
            });
        }
        let u = basis.unitary();
        Ok(self.kraus.iter().map(|k| &(&u.adjoint() * k) * &u).collect())
    }

    /// Every Kraus operator is diagonal in the computational basis.
    pub fn is_gio(&self) -> bool {
        self.dim_in == self.dim_out && self.kraus.iter().all(is_diagonal)
    }

    pub fn is_gio_in(&self, basis: &ReferenceBasis) -> Result<bool> {
        Ok(self.in_basis(basis)?.iter().all(is_diagonal))
    }

    /// Every Kraus operator sends each basis ket to a multiple of a basis ket.
    pub fn is_ico(&self) -> bool {
        self.kraus.iter().all(is_column_monomial)
    }

    pub fn is_ico_in(&self, basis: &ReferenceBasis) -> Result<bool> {
        Ok(self.in_basis(basis)?.iter().all(is_column_monomial))
    }
}

fn is_diagonal(k: &ComplexMatrix) -> bool {
    let mut off = 0.0;
    for i in 0..k.rows() {
        for j in 0..k.cols() {
            if i != j {
                off += k.get(i, j).norm();
            }
        }
    }
    off <= STRUCTURE_TOL
}

fn is_column_monomial(k: &ComplexMatrix) -> bool {
    (0..k.cols()).all(|j| {
        let col: Vec<f64> = (0..k.rows()).map(|i| k.get(i, j).norm()).collect();
        let total: f64 = col.iter().sum();
        let largest = col.iter().copied().fold(0.0, f64::max);
        total - largest <= STRUCTURE_TOL
    })
}

/// Uniform sample from the probability simplex.
pub(crate) fn random_simplex(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

fn random_phase(rng: &mut impl Rng) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..TAU))
}

pub fn random_gio_with(dim: usize, n_kraus: usize, rng: &mut impl Rng) -> Result<KrausChannel> {
    if n_kraus == 0 || dim == 0 {
        return Err(QcurError::invalid("random_gio needs dim >= 1 and n_kraus >= 1"));
    }
    let mut kraus = vec![ComplexMatrix::zeros(dim, dim); n_kraus];
    for i in 0..dim {
        for (k, w) in kraus.iter_mut().zip(random_simplex(n_kraus, rng)) {
            k.set(i, i, random_phase(rng) * w.sqrt());
        }
    }
    KrausChannel::new(kraus)
}

pub fn random_gio(dim: usize, n_kraus: usize, seed: u64) -> Result<KrausChannel> {
    random_gio_with(dim, n_kraus, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random incoherent channel built from `n_kraus` column maps `f_μ`.
///
/// An injective `f_μ` contributes one Kraus operator. A non-injective one
/// would leave off-diagonal terms in `Σ K†K` that no diagonal rescaling can
/// remove, so it is split into `dim` copies `K D_ω / √dim` with
/// `D_ω = diag(e^{2πiωk/dim})`, whose sum of `K†K` is diagonal. All operators
/// are finally right-multiplied by `A^{-1/2}` for the diagonal `A = Σ K†K`.
pub fn random_ico_with(dim: usize, n_kraus: usize, rng: &mut impl Rng) -> Result<KrausChannel> {
    if n_kraus == 0 || dim == 0 {
        return Err(QcurError::invalid("random_ico needs dim >= 1 and n_kraus >= 1"));
    }
    let mut kraus = Vec::new();
    for _ in 0..n_kraus {
        let targets: Vec<usize> = (0..dim).map(|_| rng.random_range(0..dim)).collect();
        let mut k = ComplexMatrix::zeros(dim, dim);
        for (i, &f) in targets.iter().enumerate() {
            let amp = rng.random_range(0.05..1.0);
            k.set(f, i, random_phase(rng) * amp);
        }
        let mut seen = vec![false; dim];
        let injective = targets.iter().all(|&f| !std::mem::replace(&mut seen[f], true));
        if injective {
            kraus.push(k);
        } else {
            let scale = 1.0 / (dim as f64).sqrt();
            for w in 0..dim {
                let phases: Vec<C64> = (0..dim)
                    .map(|j| C64::from_polar(scale, TAU * (w * j) as f64 / dim as f64))
                    .collect();
                let d = ComplexMatrix::from_fn(dim, dim, |i, j| if i == j { phases[i] } else { c(0.0, 0.0) });
                kraus.push(&k * &d);
            }
        }
    }
    let mut a = vec![0.0; dim];
    for k in &kraus {
        for (j, aj) in a.iter_mut().enumerate() {
            *aj += (0..dim).map(|i| k.get(i, j).norm_sqr()).sum::<f64>();
        }
    }
    let fix = ComplexMatrix::from_diag(&a.iter().map(|x| 1.0 / x.sqrt()).collect::<Vec<_>>());
    KrausChannel::new(kraus.iter().map(|k| k * &fix).collect())
}

pub fn random_ico(dim: usize, n_kraus: usize, seed: u64) -> Result<KrausChannel> {
    random_ico_with(dim, n_kraus, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Classical post-processing of an assemblage:
/// `σ_{a'|x'} = Σ_{a,x} p(x|x') p(a'|a,x,x') σ_{a|x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WiringMap {
    /// `p_x[x'][x]`.
    p_x: Vec<Vec<f64>>,
    /// `p_a[x'][x][a][a']`.
    p_a: Vec<Vec<Vec<Vec<f64>>>>,
}

impl WiringMap {
    pub fn new(p_x: Vec<Vec<f64>>, p_a: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        if p_x.is_empty() || p_x.len() != p_a.len() {
            return Err(QcurError::invalid("p_x and p_a must cover the same output settings"));
        }
        let n_in = p_x[0].len();
        let n_out_a: Vec<usize> = p_a.iter().map(|r| r[0].first().map_or(0, Vec::len)).collect();
        let n_in_a: Vec<usize> = p_a[0].iter().map(Vec::len).collect();
        for (xp, (px, pa)) in p_x.iter().zip(&p_a).enumerate() {
            check_distribution(px, &format!("p(x|x'={xp})"))?;
            if px.len() != n_in || pa.len() != n_in {
                return Err(QcurError::invalid("wiring tables disagree on the number of input settings"));
            }
            for (x, per_a) in pa.iter().enumerate() {
                if per_a.len() != n_in_a[x] {
                    return Err(QcurError::invalid("wiring tables disagree on input outcome counts"));
                }
                for (a, dist) in per_a.iter().enumerate() {
                    if dist.len() != n_out_a[xp] {
                        return Err(QcurError::invalid("wiring tables disagree on output outcome counts"));
                    }
                    check_distribution(dist, &format!("p(a'|a={a},x={x},x'={xp})"))?;
                }
            }
        }
        Ok(Self { p_x, p_a })
    }

    pub fn identity(outcome_counts: &[usize]) -> Self {
        let n = outcome_counts.len();
        let p_x = (0..n).map(|xp| one_hot(n, xp)).collect();
        let p_a = (0..n)
            .map(|xp| {
                outcome_counts
                    .iter()
                    .enumerate()
                    .map(|(x, &k)| {
                        (0..k)
                            .map(|a| {
                                if x == xp {
                                    one_hot(k, a)
                                } else {
                                    vec![1.0 / outcome_counts[xp] as f64; outcome_counts[xp]]
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { p_x, p_a }
    }

    /// Every outcome relabeled to `a' = 0` of a single-outcome output.
    pub fn merge_outcomes(outcome_counts: &[usize]) -> Self {
        let n = outcome_counts.len();
        let p_x = (0..n).map(|xp| one_hot(n, xp)).collect();
        let p_a = (0..n)
            .map(|_| outcome_counts.iter().map(|&k| vec![vec![1.0]; k]).collect())
            .collect();
        Self { p_x, p_a }
    }

    /// Every conditional table drawn uniformly from its simplex.
    pub fn random_with(
        in_outcomes: &[usize],
        out_outcomes: &[usize],
        rng: &mut impl Rng,
    ) -> Self {
        let p_x = out_outcomes
            .iter()
            .map(|_| random_simplex(in_outcomes.len(), rng))
            .collect();
        let p_a = out_outcomes
            .iter()
            .map(|&ko| {
                in_outcomes
                    .iter()
                    .map(|&ki| (0..ki).map(|_| random_simplex(ko, rng)).collect())
                    .collect()
            })
            .collect();
        Self { p_x, p_a }
    }

    pub fn random(in_outcomes: &[usize], out_outcomes: &[usize], seed: u64) -> Self {
        Self::random_with(in_outcomes, out_outcomes, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn input_outcome_counts(&self) -> Vec<usize> {
        self.p_a[0].iter().map(Vec::len).collect()
    }

    pub fn output_outcome_counts(&self) -> Vec<usize> {
        self.p_a.iter().map(|r| r[0][0].len()).collect()
    }

    pub fn p_x(&self) -> &[Vec<f64>] {
        &self.p_x
    }

    pub fn p_a(&self) -> &[Vec<Vec<Vec<f64>>>] {
        &self.p_a
    }
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub fn wire_assemblage(w: &WiringMap, asm: &Assemblage) -> Result<Assemblage> {
    if w.input_outcome_counts() != asm.outcome_counts() {
        return Err(QcurError::invalid(format!(
            "wiring expects outcome counts {:?}, assemblage has {:?}",
            w.input_outcome_counts(),
            asm.outcome_counts()
        )));
    }
    let dim = asm.dim();
    let members = w
        .p_a
        .iter()
        .enumerate()
        .map(|(xp, per_x)| {
            let n_out = per_x[0][0].len();
            (0..n_out)
                .map(|ap| {
                    let mut acc = ComplexMatrix::zeros(dim, dim);
                    for (x, per_a) in per_x.iter().enumerate() {
                        let px = w.p_x[xp][x];
                        if px == 0.0 {
                            continue;
                        }
                        for (a, dist) in per_a.iter().enumerate() {
                            let weight = px * dist[ap];
                            if weight != 0.0 {
                                acc = &acc + &asm.member(x, a).scale(weight);
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok(Assemblage::from_trusted(members))
}

/// Shared randomness `ξ`, a local genuinely incoherent operation `Ξ_ξ` on
/// Bob's side and a classical wiring per branch.
#[derive(Clone, Debug)]
pub struct OneWayGioProtocol {
    branch_probs: Vec<f64>,
    branch_channels: Vec<KrausChannel>,
    branch_wirings: Vec<WiringMap>,
    seed: Option<u64>,
}

impl OneWayGioProtocol {
    pub fn new(
        branch_probs: Vec<f64>,
        branch_channels: Vec<KrausChannel>,
        branch_wirings: Vec<WiringMap>,
    ) -> Result<Self> {
        check_distribution(&branch_probs, "branch probabilities")?;
        if branch_channels.len() != branch_probs.len() || branch_wirings.len() != branch_probs.len() {
            return Err(QcurError::invalid("one channel and one wiring per branch required"));
        }
        if let Some(i) = branch_channels.iter().position(|ch| !ch.is_gio()) {
            return Err(QcurError::invalid(format!(
                "branch {i} channel is not genuinely incoherent"
            )));
        }
        let shape = branch_wirings[0].output_outcome_counts();
        if branch_wirings.iter().any(|w| w.output_outcome_counts() != shape) {
            return Err(QcurError::invalid("branch wirings produce different output shapes"));
        }
        Ok(Self {
            branch_probs,
            branch_channels,
            branch_wirings,
            seed: None,
        })
    }

    /// Up to three branches, each a random GIO with up to three Kraus
    /// operators and a random shape-preserving wiring.
    pub fn random(dim: usize, outcome_counts: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_branches = rng.random_range(1..=3);
        let probs = random_simplex(n_branches, &mut rng);
        let mut channels = Vec::with_capacity(n_branches);
        let mut wirings = Vec::with_capacity(n_branches);
        for _ in 0..n_branches {
            let n_kraus = rng.random_range(1..=3);
            channels.push(random_gio_with(dim, n_kraus, &mut rng)?);
            wirings.push(WiringMap::random_with(outcome_counts, outcome_counts, &mut rng));
        }
        let mut proto = Self::new(probs, channels, wirings)?;
        proto.seed = Some(seed);
        Ok(proto)
    }

    pub fn branch_probs(&self) -> &[f64] {
        &self.branch_probs
    }

    pub fn branch_channels(&self) -> &[KrausChannel] {
        &self.branch_channels
    }

    pub fn branch_wirings(&self) -> &[WiringMap] {
        &self.branch_wirings
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

pub fn one_way_gio_apply(proto: &OneWayGioProtocol, asm: &Assemblage) -> Result<Assemblage> {
    let mut out: Option<Assemblage> = None;
    let mut weight_so_far = 0.0;
    for ((&p, ch), w) in proto
        .branch_probs
        .iter()
        .zip(&proto.branch_channels)
        .zip(&proto.branch_wirings)
    {
        if p == 0.0 {
            continue;
        }
        let branch = wire_assemblage(w, &ch.apply_to_assemblage(asm)?)?;
        weight_so_far += p;
        out = Some(match out {
            None => branch,
            // running convex combination keeps the weights normalized
            Some(acc) => branch.mix(&acc, p / weight_so_far)?,
        });
    }
    out.ok_or_else(|| QcurError::invalid("protocol has no branch with positive probability"))
}

/// A two-qubit state and a channel on Bob's qubit for which the channel
/// raises the witness value. The channel creates coherence from incoherent
/// inputs, so it lies outside every incoherent class.
///
/// The state's entries are given to three decimals; the `(1,2)` and `(2,1)`
/// entries carry imaginary part `±0.260`, which the Hermitian, rank-one
/// structure of the remaining entries fixes. The rounded matrix is projected
/// onto the state space.
pub fn coherence_generating_example() -> (DensityMatrix, KrausChannel) {
    let rows: [[(f64, f64); 4]; 4] = [
        [(0.276, 0.0), (0.293, -0.062), (-0.027, 0.251), (0.073, -0.203)],
        [(0.293, 0.062), (0.325, 0.0), (-0.085, 0.260), (0.123, -0.199)],
        [(-0.027, -0.251), (-0.085, -0.260), (0.230, 0.0), (-0.191, -0.047)],
        [(0.073, 0.203), (0.123, 0.199), (-0.191, 0.047), (0.168, 0.0)],
    ];
    let m = ComplexMatrix::from_fn(4, 4, |i, j| c(rows[i][j].0, rows[i][j].1));
    let rho = DensityMatrix::project_psd(&m).expect("transcribed state is Hermitian");
    let k = |e: [(f64, f64); 4]| {
        ComplexMatrix::new(2, 2, e.iter().map(|&(re, im)| c(re, im)).collect()).expect("2x2")
    };
    let kraus = vec![
        k([(0.559, 0.351), (0.425, -0.487), (0.721, 0.0), (-0.024, 0.564)]),
        k([(0.004, 0.021), (0.388, 0.0), (-0.160, -0.030), (0.319, -0.091)]),
        k([(-0.050, -0.071), (0.032, 0.020), (0.097, 0.0), (0.005, -0.037)]),
        k([(0.021, 0.0), (0.006, 0.012), (0.001, -0.012), (-0.013, -0.016)]),
    ];
    let ch = KrausChannel::transcribed(kraus).expect("within transcription tolerance");
    (rho, ch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::DephasingMap;
    use crate::states::{phi_plus, phi_state};
    use crate::steering::{assemblage_from_state, sivp, MeasurementSet};
    use approx::assert_abs_diff_eq;

    fn completeness(ch: &KrausChannel) -> f64 {
        let mut t = ComplexMatrix::zeros(ch.dim_in(), ch.dim_in());
        for k in ch.kraus() {
            t = &t + &(&k.adjoint() * k);
        }
        t.max_abs_diff(&ComplexMatrix::identity(ch.dim_in()))
    }

    #[test]
    fn apply_examples() {
        let rho = phi_state(0.3, 0.4).unwrap().partial_trace((2, 2), crate::qmat::Keep::B).unwrap();
        assert!(KrausChannel::identity(2).apply(&rho).unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-15);
        let deph = KrausChannel::dephasing(2).apply(&rho).unwrap();
        let want = DephasingMap::computational(2).apply(&rho).unwrap();
        assert!(deph.matrix().max_abs_diff(want.matrix()) < 1e-15);
        assert!(KrausChannel::new(vec![ComplexMatrix::from_diag(&[1.0, 0.5])]).is_err());
    }

    #[test]
    fn classification_examples() {
        let deph = KrausChannel::dephasing(2);
        assert!(deph.is_gio() && deph.is_ico());
        let x = KrausChannel::new(vec![crate::qmat::pauli::x()]).unwrap();
        assert!(!x.is_gio());
        assert!(x.is_ico());
        let swap = KrausChannel::new(vec![
            ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap(),
            ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap(),
        ])
        .unwrap();
        assert!(swap.is_ico() && !swap.is_gio());
        // dephasing in X is diagonal there but not in Z
        let xb = ReferenceBasis::pauli_x();
        let xdeph = KrausChannel::new(xb.kets().iter().map(|k| k.projector()).collect()).unwrap();
        assert!(!xdeph.is_gio());
        assert!(xdeph.is_gio_in(&xb).unwrap());
    }

    #[test]
    fn random_generators() {
        for seed in 0..50 {
            let g = random_gio(3, 1 + seed as usize % 4, seed).unwrap();
            assert!(g.is_gio());
            assert!(completeness(&g) < 1e-12);
            let i = random_ico(3, 1 + seed as usize % 4, seed).unwrap();
            assert!(i.is_ico());
            assert!(completeness(&i) < 1e-12);
        }
        let u = random_gio(2, 1, 4).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(u.kraus()[0].get(j, j).norm(), 1.0, epsilon = 1e-15);
        }
        assert_eq!(random_gio(2, 3, 8).unwrap(), random_gio(2, 3, 8).unwrap());
        assert_eq!(random_ico(2, 3, 8).unwrap(), random_ico(2, 3, 8).unwrap());
    }

    #[test]
    fn wiring_examples() {
        let asm = assemblage_from_state(&phi_plus(), &MeasurementSet::pauli_xz()).unwrap();
        let z = DephasingMap::computational(2);
        let same = wire_assemblage(&WiringMap::identity(&[2, 2]), &asm).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                assert!(same.member(x, a).max_abs_diff(asm.member(x, a)) < 1e-15);
            }
        }
        let merged = wire_assemblage(&WiringMap::merge_outcomes(&[2, 2]), &asm).unwrap();
        assert_eq!(merged.outcome_counts(), vec![1, 1]);
        assert!(merged.member(1, 0).max_abs_diff(&asm.marginal()) < 1e-15);
        assert_eq!(sivp(&merged, &z).unwrap(), 0.0);

        let w = WiringMap::random(&[2, 2], &[3, 2, 2], 5);
        let out = wire_assemblage(&w, &asm).unwrap();
        for x in 0..3 {
            let total = crate::qmat::sum_matrices(&out.members()[x]).unwrap();
            assert!(total.max_abs_diff(&asm.marginal()) < 1e-14);
        }
        assert!(sivp(&out, &z).unwrap() <= sivp(&asm, &z).unwrap() + 1e-10);
    }

    #[test]
    fn protocol_examples() {
        let asm = assemblage_from_state(&phi_plus(), &MeasurementSet::pauli_xz()).unwrap();
        let z = DephasingMap::computational(2);
        let trivial = OneWayGioProtocol::new(
            vec![1.0],
            vec![KrausChannel::identity(2)],
            vec![WiringMap::identity(&[2, 2])],
        )
        .unwrap();
        let out = one_way_gio_apply(&trivial, &asm).unwrap();
        assert!(out.member(0, 0).max_abs_diff(asm.member(0, 0)) < 1e-15);

        let deph = OneWayGioProtocol::new(
            vec![1.0],
            vec![KrausChannel::dephasing(2)],
            vec![WiringMap::identity(&[2, 2])],
        )
        .unwrap();
        assert_eq!(sivp(&one_way_gio_apply(&deph, &asm).unwrap(), &z).unwrap(), 0.0);

        let not_gio = OneWayGioProtocol::new(
            vec![1.0],
            vec![KrausChannel::new(vec![crate::qmat::pauli::x()]).unwrap()],
            vec![WiringMap::identity(&[2, 2])],
        );
        assert!(not_gio.is_err());

        let p = OneWayGioProtocol::random(2, &[2, 2], 17).unwrap();
        assert_eq!(p.seed(), Some(17));
        let out = one_way_gio_apply(&p, &asm).unwrap();
        for x in 0..2 {
            let total = crate::qmat::sum_matrices(&out.members()[x]).unwrap();
            assert!(total.max_abs_diff(&asm.marginal()) < 1e-12);
        }
    }

    #[test]
    fn coherence_generating_example_values() {
        let (rho, ch) = coherence_generating_example();
        assert!(ch.completeness_error() > COMPLETENESS_TOL);
        assert!(!ch.is_ico());
        let out = ch.apply(&DensityMatrix::maximally_mixed(2)).unwrap();
        let want = [[c(0.506, 0.0), c(0.117, 0.026)], [c(0.117, -0.026), c(0.494, 0.0)]];
        for (i, row) in want.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                assert!((out.matrix().get(i, j) - w).norm() < 2e-3);
            }
        }
        let z = DephasingMap::computational(2);
        let asm = assemblage_from_state(&rho, &MeasurementSet::pauli_xz()).unwrap();
        let before = sivp(&asm, &z).unwrap();
        let after = sivp(&ch.apply_to_assemblage(&asm).unwrap(), &z).unwrap();
        assert_abs_diff_eq!(before, 0.061, epsilon = 0.01);
        assert_abs_diff_eq!(after, 0.198, epsilon = 0.01);
    }
}
