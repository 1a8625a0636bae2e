//! Steering scenario: measurements, assemblages, LHS models and the
//! coherence-based witness.
//!
//! Alice measures a [`MeasurementSet`] on her half of a bipartite state and
//! Bob is left with an [`Assemblage`] `{σ_{a|x}}`. For each setting `x` Bob
//! can either distill coherence from the conditional states or only estimate
//! it through the dephased entropy. In a local-hidden-state world the best
//! conditional distillable coherence never exceeds the smallest conditional
//! dephased entropy; the violation parameter measures by how much it does.

use serde::Serialize;

use crate::error::{QcurError, Result};
use crate::infotheory::{self, DephasingMap};
use crate::qmat::{self, kron, partial_trace, ComplexMatrix, DensityMatrix, Keep, CLIP_TOL};

/// Effects may sum to the identity (or support projector) within this.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Non-signaling tolerance on `Σ_a σ_{a|x}` across settings.
pub const NON_SIGNALING_TOL: f64 = 1e-9;
/// Conditional members with smaller trace are left out of conditional sums.
pub const ZERO_PROB_MEMBER: f64 = 1e-12;
/// A violation parameter above this counts as steering.
pub const VIOLATION_THRESHOLD: f64 = 1e-10;
/// Strictness margin for entropic-uncertainty violations.
pub const EUR_STRICTNESS: f64 = 1e-12;

fn check_psd(m: &ComplexMatrix, what: &str) -> Result<()> {
    if !m.is_hermitian(qmat::HERMITIAN_TOL) {
        return Err(QcurError::invalid(format!("{what} is not Hermitian")));
    }
    let min = qmat::eigvals_unchecked(m).into_iter().fold(f64::INFINITY, f64::min);
    if min < -CLIP_TOL {
        return Err(QcurError::invalid(format!(
            "{what} has negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Positive operator-valued measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    dim: usize,
    effects: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = effects.first().map(|e| e.rows()).unwrap_or(0);
        Self::with_completion(effects, &ComplexMatrix::identity(dim.max(1)))
    }

    /// A POVM on a subspace: the effects must sum to `completion` (a projector).
    pub fn with_completion(effects: Vec<ComplexMatrix>, completion: &ComplexMatrix) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(QcurError::invalid("POVM needs at least one effect"));
        };
        let dim = first.rows();
        for (a, e) in effects.iter().enumerate() {
            if !e.is_square() || e.rows() != dim {
                return Err(QcurError::Dimension {
                    expected: dim,
                    got: e.rows(),
                });
            }
            check_psd(e, &format!("effect {a}"))?;
        }
        if completion.rows() != dim {
            return Err(QcurError::Dimension {
                expected: dim,
                got: completion.rows(),
            });
        }
        let total = qmat::sum_matrices(&effects).expect("non-empty");
        let dev = total.max_abs_diff(completion);
        if dev > COMPLETENESS_TOL {
            return Err(QcurError::invalid(format!(
                "effects do not sum to the identity (deviation {dev:.3e})"
            )));
        }
        let effects = effects.into_iter().map(|e| e.hermitian_part()).collect();
        Ok(Self { dim, effects })
    }

    /// `[1 + (-1)^a σ] / 2` for a Pauli operator `σ`.
    pub fn pauli(sigma: &ComplexMatrix) -> Self {
        let id = ComplexMatrix::identity(2);
        Self {
            dim: 2,
            effects: vec![(&id + sigma).scale(0.5), (&id - sigma).scale(0.5)],
        }
    }

    /// Rank-one projective measurement onto a basis.
    pub fn projective(basis: &infotheory::ReferenceBasis) -> Self {
        Self {
            dim: basis.dim(),
            effects: basis.kets().iter().map(|k| k.projector()).collect(),
        }
    }

    /// The single-outcome measurement `{1}`.
    pub fn trivial(dim: usize) -> Self {
        Self {
            dim,
            effects: vec![ComplexMatrix::identity(dim)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn n_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn transpose(&self) -> Self {
        Self {
            dim: self.dim,
            effects: self.effects.iter().map(|e| e.transpose()).collect(),
        }
    }
}

/// Indexed family of POVMs `{M_{a|x}}` on one Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    settings: Vec<Povm>,
}

impl MeasurementSet {
    pub fn new(settings: Vec<Povm>) -> Result<Self> {
        let Some(first) = settings.first() else {
            return Err(QcurError::invalid("measurement set needs at least one setting"));
        };
        let dim = first.dim();
        if let Some(p) = settings.iter().find(|p| p.dim() != dim) {
            return Err(QcurError::Dimension {
                expected: dim,
                got: p.dim(),
            });
        }
        Ok(Self { settings })
    }

    /// Pauli X and Z: `M_{a|x} = [1 + (-1)^a σ_x]/2`, `x ∈ {1, 3}`.
    pub fn pauli_xz() -> Self {
        Self {
            settings: vec![Povm::pauli(&qmat::pauli::x()), Povm::pauli(&qmat::pauli::z())],
        }
    }

    pub fn pauli_xyz() -> Self {
        Self {
            settings: qmat::pauli::all().iter().map(Povm::pauli).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.settings[0].dim()
    }

    pub fn settings(&self) -> &[Povm] {
        &self.settings
    }

    pub fn n_settings(&self) -> usize {
        self.settings.len()
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.settings.iter().map(Povm::n_outcomes).collect()
    }

    pub fn effect(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.settings[x].effects[a]
    }

    pub fn transpose(&self) -> Self {
        Self {
            settings: self.settings.iter().map(Povm::transpose).collect(),
        }
    }

    /// `q M + (1 - q) M'` effect by effect.
    pub fn mix(&self, other: &MeasurementSet, q: f64) -> Result<MeasurementSet> {
        if self.outcome_counts() != other.outcome_counts() || self.dim() != other.dim() {
            return Err(QcurError::invalid("measurement sets have different shapes"));
        }
        let settings = self
            .settings
            .iter()
            .zip(&other.settings)
            .map(|(p, o)| Povm {
                dim: p.dim,
                effects: p
                    .effects
                    .iter()
                    .zip(&o.effects)
                    .map(|(e, f)| &e.scale(q) + &f.scale(1.0 - q))
                    .collect(),
            })
            .collect();
        Ok(Self { settings })
    }

    pub(crate) fn from_trusted(settings: Vec<Vec<ComplexMatrix>>) -> Self {
        let dim = settings[0][0].rows();
        Self {
            settings: settings
                .into_iter()
                .map(|effects| Povm { dim, effects })
                .collect(),
        }
    }
}

/// State assemblage `{σ_{a|x}}`, indexed `[x][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    dim: usize,
    members: Vec<Vec<ComplexMatrix>>,
}

impl Assemblage {
    pub fn new(members: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        if members.is_empty() || members.iter().any(|row| row.is_empty()) {
            return Err(QcurError::invalid("assemblage needs settings and outcomes"));
        }
        let dim = members[0][0].rows();
        for (x, row) in members.iter().enumerate() {
            for (a, s) in row.iter().enumerate() {
                if !s.is_square() || s.rows() != dim {
                    return Err(QcurError::Dimension {
                        expected: dim,
                        got: s.rows(),
                    });
                }
                check_psd(s, &format!("member ({x}, {a})"))?;
                let t = s.trace().re;
                if !(-CLIP_TOL..=1.0 + CLIP_TOL).contains(&t) {
                    return Err(QcurError::invalid(format!(
                        "member ({x}, {a}) has trace {t} outside [0, 1]"
                    )));
                }
            }
        }
        let asm = Self::from_trusted(members);
        let rho_b = asm.marginal_for(0);
        for x in 1..asm.n_settings() {
            let dev = asm.marginal_for(x).max_abs_diff(&rho_b);
            if dev > NON_SIGNALING_TOL {
                return Err(QcurError::invalid(format!(
                    "setting {x} violates non-signaling (deviation {dev:.3e})"
                )));
            }
        }
        Ok(asm)
    }

    pub(crate) fn from_trusted(members: Vec<Vec<ComplexMatrix>>) -> Self {
        let dim = members[0][0].rows();
        let members = members
            .into_iter()
            .map(|row| row.into_iter().map(|s| s.hermitian_part()).collect())
            .collect();
        Self { dim, members }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_settings(&self) -> usize {
        self.members.len()
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn members(&self) -> &[Vec<ComplexMatrix>] {
        &self.members
    }

    pub fn member(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.members[x][a]
    }

    /// `p(a|x) = Tr σ_{a|x}`.
    pub fn probability(&self, x: usize, a: usize) -> f64 {
        self.members[x][a].trace().re.max(0.0)
    }

    /// `ρ_{a|x} = σ_{a|x} / p(a|x)`, or `None` for a zero-probability member.
    pub fn conditional(&self, x: usize, a: usize) -> Option<ComplexMatrix> {
        let p = self.probability(x, a);
        (p >= ZERO_PROB_MEMBER).then(|| self.members[x][a].scale(1.0 / p))
    }

    fn marginal_for(&self, x: usize) -> ComplexMatrix {
        qmat::sum_matrices(&self.members[x]).expect("non-empty row")
    }

    /// Bob's reduced state `ρ_B = Σ_a σ_{a|x}` (taken from setting 0).
    pub fn marginal(&self) -> ComplexMatrix {
        self.marginal_for(0)
    }

    /// Applies `f` to every member.
    pub fn map_members(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Assemblage {
        Self::from_trusted(
            self.members
                .iter()
                .map(|row| row.iter().map(&f).collect())
                .collect(),
        )
    }

    /// `q A + (1 - q) A'`.
    pub fn mix(&self, other: &Assemblage, q: f64) -> Result<Assemblage> {
        if self.outcome_counts() != other.outcome_counts() || self.dim != other.dim {
            return Err(QcurError::invalid("assemblages have different shapes"));
        }
        let members = self
            .members
            .iter()
            .zip(&other.members)
            .map(|(r, s)| {
                r.iter()
                    .zip(s)
                    .map(|(a, b)| &a.scale(q) + &b.scale(1.0 - q))
                    .collect()
            })
            .collect();
        Ok(Self::from_trusted(members))
    }

    /// Reorders settings and, within each setting, outcomes.
    pub fn relabeled(&self, setting_order: &[usize], outcome_orders: &[Vec<usize>]) -> Assemblage {
        let members = setting_order
            .iter()
            .zip(outcome_orders)
            .map(|(&x, order)| order.iter().map(|&a| self.members[x][a].clone()).collect())
            .collect();
        Self::from_trusted(members)
    }
}

/// `σ_{a|x} = Tr_A[(M_{a|x} ⊗ 1) ρ_AB]`.
pub fn assemblage_from_state(rho_ab: &DensityMatrix, m: &MeasurementSet) -> Result<Assemblage> {
    let da = m.dim();
    let n = rho_ab.dim();
    if !n.is_multiple_of(da) {
        return Err(QcurError::Dimension {
            expected: da,
            got: n,
        });
    }
    let db = n / da;
    let id_b = ComplexMatrix::identity(db);
    let members = m
        .settings()
        .iter()
        .map(|povm| {
            povm.effects()
                .iter()
                .map(|e| {
                    let op = &kron(e, &id_b) * rho_ab.matrix();
                    partial_trace(&op, (da, db), Keep::B)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Assemblage::from_trusted(members))
}

/// Local-hidden-state model `σ_{a|x} = Σ_λ p(λ) p(a|x,λ) ρ_λ`.
#[derive(Clone, Debug)]
pub struct LhsModel {
    hidden_states: Vec<DensityMatrix>,
    weights: Vec<f64>,
    /// `responses[x][λ][a] = p(a|x,λ)`.
    responses: Vec<Vec<Vec<f64>>>,
}

const RESPONSE_TOL: f64 = 1e-12;

pub(crate) fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() || p.iter().any(|&v| v < -RESPONSE_TOL || !v.is_finite()) {
        return Err(QcurError::invalid(format!("{what} is not a probability vector")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > RESPONSE_TOL.max(1e-12 * p.len() as f64) {
        return Err(QcurError::invalid(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl LhsModel {
    pub fn new(
        hidden_states: Vec<DensityMatrix>,
        weights: Vec<f64>,
        responses: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if hidden_states.is_empty() || hidden_states.len() != weights.len() {
            return Err(QcurError::invalid("one weight per hidden state required"));
        }
        let dim = hidden_states[0].dim();
        if hidden_states.iter().any(|s| s.dim() != dim) {
            return Err(QcurError::invalid("hidden states differ in dimension"));
        }
        check_distribution(&weights, "hidden-state weights")?;
        if responses.is_empty() {
            return Err(QcurError::invalid("LHS model needs at least one setting"));
        }
        for (x, per_lambda) in responses.iter().enumerate() {
            if per_lambda.len() != hidden_states.len() {
                return Err(QcurError::invalid(format!(
                    "setting {x} has responses for {} hidden states, expected {}",
                    per_lambda.len(),
                    hidden_states.len()
                )));
            }
            let n_out = per_lambda[0].len();
            for (l, dist) in per_lambda.iter().enumerate() {
                if dist.len() != n_out {
                    return Err(QcurError::invalid("ragged response table"));
                }
                check_distribution(dist, &format!("response p(.|x={x}, λ={l})"))?;
            }
        }
        Ok(Self {
            hidden_states,
            weights,
            responses,
        })
    }

    pub fn hidden_states(&self) -> &[DensityMatrix] {
        &self.hidden_states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn responses(&self) -> &[Vec<Vec<f64>>] {
        &self.responses
    }

    pub fn n_settings(&self) -> usize {
        self.responses.len()
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.responses.iter().map(|r| r[0].len()).collect()
    }
}

pub fn assemblage_from_lhs(model: &LhsModel) -> Assemblage {
    let dim = model.hidden_states[0].dim();
    let members = model
        .responses
        .iter()
        .map(|per_lambda| {
            let n_out = per_lambda[0].len();
            (0..n_out)
                .map(|a| {
                    let mut acc = ComplexMatrix::zeros(dim, dim);
                    for (l, rho) in model.hidden_states.iter().enumerate() {
                        let w = model.weights[l] * per_lambda[l][a];
                        if w != 0.0 {
                            acc = &acc + &rho.matrix().scale(w);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Assemblage::from_trusted(members)
}

fn check_setting(asm: &Assemblage, x: usize) -> Result<()> {
    if x >= asm.n_settings() {
        return Err(QcurError::invalid(format!(
            "setting {x} out of range (assemblage has {})",
            asm.n_settings()
        )));
    }
    Ok(())
}

fn check_delta(asm: &Assemblage, delta: &DephasingMap) -> Result<()> {
    if asm.dim() != delta.dim() {
        return Err(QcurError::Dimension {
            expected: asm.dim(),
            got: delta.dim(),
        });
    }
    Ok(())
}

/// `(C_d^{B|A}, H_Δ^{B|A})` for one setting.
fn conditional_pair(asm: &Assemblage, x: usize, delta: &DephasingMap) -> (f64, f64) {
    let mut cd = 0.0;
    let mut h = 0.0;
    for a in 0..asm.members[x].len() {
        let p = asm.probability(x, a);
        if let Some(rho) = asm.conditional(x, a) {
            let (hd, c) = infotheory::coherence_pair(&rho, delta);
            cd += p * c;
            h += p * hd;
        }
    }
    (cd, h)
}

/// `Σ_a p(a|x) C_d(ρ_{a|x})`.
pub fn conditional_cd(asm: &Assemblage, x: usize, delta: &DephasingMap) -> Result<f64> {
    check_setting(asm, x)?;
    check_delta(asm, delta)?;
    Ok(conditional_pair(asm, x, delta).0)
}

/// `Σ_a p(a|x) H_Δ(ρ_{a|x})`.
pub fn conditional_h(asm: &Assemblage, x: usize, delta: &DephasingMap) -> Result<f64> {
    check_setting(asm, x)?;
    check_delta(asm, delta)?;
    Ok(conditional_pair(asm, x, delta).1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SettingSummary {
    pub cd: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteeringReport {
    /// `max_x C_d^{B|A}`.
    pub cd_star: f64,
    /// `min_x H_Δ^{B|A}`.
    pub h_star: f64,
    pub sivp: f64,
    pub per_setting: Vec<SettingSummary>,
}

impl SteeringReport {
    pub fn violated(&self) -> bool {
        self.sivp > VIOLATION_THRESHOLD
    }
}

pub fn steering_report(asm: &Assemblage, delta: &DephasingMap) -> Result<SteeringReport> {
    check_delta(asm, delta)?;
    let per_setting: Vec<SettingSummary> = (0..asm.n_settings())
        .map(|x| {
            let (cd, h) = conditional_pair(asm, x, delta);
            SettingSummary { cd, h }
        })
        .collect();
    let cd_star = per_setting.iter().map(|s| s.cd).fold(f64::NEG_INFINITY, f64::max);
    let h_star = per_setting.iter().map(|s| s.h).fold(f64::INFINITY, f64::min);
    Ok(SteeringReport {
        cd_star,
        h_star,
        sivp: (cd_star - h_star).max(0.0),
        per_setting,
    })
}

/// Shorthand for `steering_report(..).sivp`.
pub fn sivp(asm: &Assemblage, delta: &DephasingMap) -> Result<f64> {
    steering_report(asm, delta).map(|r| r.sivp)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EurReport {
    pub lhs_sum: f64,
    pub bound: f64,
    pub violated: bool,
}

/// Entropic uncertainty test `H_Δ^{B|A}(A_x) + H_Δ'^{B|A}(A_x') ≥ -log2 Ω`.
pub fn eur_report(
    asm: &Assemblage,
    delta: &DephasingMap,
    delta_prime: &DephasingMap,
    x: usize,
    x_prime: usize,
) -> Result<EurReport> {
    check_setting(asm, x)?;
    check_setting(asm, x_prime)?;
    check_delta(asm, delta)?;
    check_delta(asm, delta_prime)?;
    let omega = delta.basis().max_overlap(delta_prime.basis())?;
    let bound = -omega.log2();
    let lhs_sum = conditional_pair(asm, x, delta).1 + conditional_pair(asm, x_prime, delta_prime).1;
    let violated = bound > 0.0 && lhs_sum < bound - EUR_STRICTNESS;
    Ok(EurReport {
        lhs_sum,
        bound: bound.max(0.0),
        violated,
    })
}

/// Both witnesses side by side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessComparison {
    pub eur_violated: bool,
    pub qcur_violated: bool,
    /// `min over (x, x')` of `lhs_sum - bound`; negative means the EUR is violated.
    pub eur_margin: f64,
    pub sivp: f64,
    /// Every EUR violation of size `v` is matched by `sivp ≥ v` (up to 1e-10).
    pub implication_holds: bool,
}

pub fn qcur_vs_eur(
    asm: &Assemblage,
    delta: &DephasingMap,
    delta_prime: &DephasingMap,
) -> Result<WitnessComparison> {
    let sivp = steering_report(asm, delta)?.sivp;
    let mut eur_margin = f64::INFINITY;
    let mut eur_violated = false;
    let mut implication_holds = true;
    for x in 0..asm.n_settings() {
        for xp in 0..asm.n_settings() {
            let r = eur_report(asm, delta, delta_prime, x, xp)?;
            let margin = r.lhs_sum - r.bound;
            eur_margin = eur_margin.min(margin);
            if r.violated {
                eur_violated = true;
                if sivp < -margin - VIOLATION_THRESHOLD {
                    implication_holds = false;
                }
            }
        }
    }
    Ok(WitnessComparison {
        eur_violated,
        qcur_violated: sivp > VIOLATION_THRESHOLD,
        eur_margin,
        sivp,
        implication_holds,
    })
}

/// `(A→B, B→A)`: Alice measuring and Bob holding the assemblage, then the
/// roles exchanged on the swapped state.
pub fn sivp_both_directions(
    rho_ab: &DensityMatrix,
    dims: (usize, usize),
    m_alice: &MeasurementSet,
    m_bob: &MeasurementSet,
    delta_a: &DephasingMap,
    delta_b: &DephasingMap,
) -> Result<(f64, f64)> {
    let (da, db) = dims;
    if m_alice.dim() != da || m_bob.dim() != db || delta_a.dim() != da || delta_b.dim() != db {
        return Err(QcurError::invalid("measurement or basis dimensions do not match the state"));
    }
    let a_to_b = sivp(&assemblage_from_state(rho_ab, m_alice)?, delta_b)?;
    let swapped = DensityMatrix::from_trusted(qmat::swap_subsystems(rho_ab.matrix(), dims)?);
    let b_to_a = sivp(&assemblage_from_state(&swapped, m_bob)?, delta_a)?;
    Ok((a_to_b, b_to_a))
}

/// Entanglement entropy `S(ρ_B)` of `Σ_i √q_i |ii>`, the value the witness
/// reaches with an optimal measurement strategy.
pub fn pure_state_sivp_theory(schmidt: &[f64]) -> Result<f64> {
    infotheory::shannon(schmidt)
}
