//! Entropies and distillable coherence relative to a fixed reference basis.
//!
//! All logarithms are base 2. Probabilities below [`ZERO_PROB`] are treated
//! as exact zeros, so `0 log 0 = 0` and nothing propagates `-inf`.

use serde::{Deserialize, Serialize};

use crate::error::{QcurError, Result};
use crate::qmat::{self, ComplexMatrix, DensityMatrix, Ket, C64, RANK_CUTOFF};

/// Entries below this are exact zeros inside entropy sums.
pub const ZERO_PROB: f64 = 1e-15;
/// Negative probability entries down to this are clipped instead of rejected.
pub const NEG_PROB_TOL: f64 = 1e-12;
/// Allowed deviation of a probability vector's sum from one.
pub const NORM_TOL: f64 = 1e-9;
/// Allowed deviation of `<i|j>` from `delta_ij` for a reference basis.
pub const BASIS_TOL: f64 = 1e-10;

/// `-sum p log2 p` for a normalized probability vector.
pub fn shannon(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(QcurError::invalid("empty probability vector"));
    }
    if let Some(&bad) = p.iter().find(|&&x| x < -NEG_PROB_TOL || !x.is_finite()) {
        return Err(QcurError::invalid(format!("probability entry {bad} is negative")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(QcurError::invalid(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(entropy_bits(p))
}

/// Entropy of non-negative weights without normalization checks.
pub(crate) fn entropy_bits(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > ZERO_PROB)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        .max(0.0)
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(QcurError::invalid(format!("binary entropy argument {x} outside [0, 1]")));
    }
    Ok(entropy_bits(&[x, 1.0 - x]))
}

pub fn von_neumann(rho: &DensityMatrix) -> f64 {
    entropy_bits(&rho.eigenvalues())
}

/// Orthonormal basis `{|i>}` defining incoherent states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisRepr", into = "BasisRepr")]
pub struct ReferenceBasis {
    kets: Vec<Ket>,
    computational: bool,
}

impl ReferenceBasis {
    pub fn new(kets: Vec<Ket>) -> Result<Self> {
        let d = kets.len();
        if d == 0 {
            return Err(QcurError::invalid("empty basis"));
        }
        if let Some(k) = kets.iter().find(|k| k.dim() != d) {
            return Err(QcurError::Dimension {
                expected: d,
                got: k.dim(),
            });
        }
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                let dev = (kets[i].inner(&kets[j]) - C64::new(target, 0.0)).norm();
                if dev > BASIS_TOL {
                    return Err(QcurError::invalid(format!(
                        "basis vectors {i} and {j} are not orthonormal (deviation {dev:.3e})"
                    )));
                }
            }
        }
        let computational = (0..d).all(|i| {
            kets[i]
                .amplitudes()
                .iter()
                .enumerate()
                .all(|(j, z)| if i == j { (z - C64::new(1.0, 0.0)).norm() < 1e-15 } else { z.norm() < 1e-15 })
        });
        Ok(Self { kets, computational })
    }

    /// Pauli-Z eigenbasis and its qudit generalization.
    pub fn computational(dim: usize) -> Self {
        Self {
            kets: (0..dim).map(|i| Ket::basis(dim, i)).collect(),
            computational: true,
        }
    }

    /// Basis made of the columns of a unitary.
    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        let kets = (0..u.cols())
            .map(|j| Ket::new((0..u.rows()).map(|i| u.get(i, j)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kets)
    }

    /// `{|+>, |->}`.
    pub fn pauli_x() -> Self {
        let s = 1.0 / 2f64.sqrt();
        Self::new(vec![
            Ket::new(vec![C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap(),
            Ket::new(vec![C64::new(s, 0.0), C64::new(-s, 0.0)]).unwrap(),
        ])
        .unwrap()
    }

    /// `{|+i>, |-i>}`.
    pub fn pauli_y() -> Self {
        let s = 1.0 / 2f64.sqrt();
        Self::new(vec![
            Ket::new(vec![C64::new(s, 0.0), C64::new(0.0, s)]).unwrap(),
            Ket::new(vec![C64::new(s, 0.0), C64::new(0.0, -s)]).unwrap(),
        ])
        .unwrap()
    }

    pub fn dim(&self) -> usize {
        self.kets.len()
    }

    pub fn kets(&self) -> &[Ket] {
        &self.kets
    }

    pub fn is_computational(&self) -> bool {
        self.computational
    }

    /// Unitary with the basis kets as columns.
    pub fn unitary(&self) -> ComplexMatrix {
        let d = self.dim();
        ComplexMatrix::from_fn(d, d, |i, j| self.kets[j].amplitudes()[i])
    }

    /// `<i|m|i>` for each basis ket.
    pub fn diagonal(&self, m: &ComplexMatrix) -> Vec<f64> {
        if self.computational {
            m.diag_real()
        } else {
            self.kets.iter().map(|k| k.expectation(m)).collect()
        }
    }

    /// `max_{i,j} |<i|j'>|^2`.
    pub fn max_overlap(&self, other: &ReferenceBasis) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(QcurError::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .kets
            .iter()
            .flat_map(|a| other.kets.iter().map(move |b| a.inner(b).norm_sqr()))
            .fold(0.0, f64::max))
    }

    /// Rewrites `m` in this basis: `U† m U`.
    pub fn to_basis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        if self.computational {
            return m.clone();
        }
        let u = self.unitary();
        &(&u.adjoint() * m) * &u
    }
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    dim: usize,
    /// One row-major `[re, im]` list per ket.
    kets: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<BasisRepr> for ReferenceBasis {
    type Error = QcurError;
    fn try_from(r: BasisRepr) -> Result<Self> {
        let kets = r
            .kets
            .into_iter()
            .map(|k| Ket::new(k.into_iter().map(|[re, im]| C64::new(re, im)).collect()))
            .collect::<Result<Vec<_>>>()?;
        let b = ReferenceBasis::new(kets)?;
        if b.dim() != r.dim {
            return Err(QcurError::Dimension {
                expected: r.dim,
                got: b.dim(),
            });
        }
        Ok(b)
    }
}

impl From<ReferenceBasis> for BasisRepr {
    fn from(b: ReferenceBasis) -> Self {
        BasisRepr {
            dim: b.dim(),
            kets: b
                .kets
                .iter()
                .map(|k| k.amplitudes().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

/// Complete dephasing `Δ(ρ) = Σ_i |i><i| ρ |i><i|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DephasingMap {
    basis: ReferenceBasis,
}

impl DephasingMap {
    pub fn new(basis: ReferenceBasis) -> Self {
        Self { basis }
    }

    pub fn computational(dim: usize) -> Self {
        Self::new(ReferenceBasis::computational(dim))
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Probabilities `<i|m|i>`.
    pub fn probabilities(&self, m: &ComplexMatrix) -> Vec<f64> {
        self.basis.diagonal(m)
    }

    pub fn apply_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let p = self.probabilities(m);
        if self.basis.is_computational() {
            return ComplexMatrix::from_diag(&p);
        }
        let d = self.dim();
        let mut out = ComplexMatrix::zeros(d, d);
        for (k, w) in self.basis.kets().iter().zip(p) {
            out = &out + &k.projector().scale(w);
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        check_dim(rho, self.dim())?;
        DensityMatrix::new(self.apply_matrix(rho.matrix()))
    }
}

fn check_dim(rho: &DensityMatrix, d: usize) -> Result<()> {
    if rho.dim() != d {
        return Err(QcurError::Dimension {
            expected: d,
            got: rho.dim(),
        });
    }
    Ok(())
}

pub fn dephase(rho: &DensityMatrix, delta: &DephasingMap) -> Result<DensityMatrix> {
    delta.apply(rho)
}

/// `H_Δ(ρ)`: Shannon entropy of the reference-basis populations.
pub fn dephased_entropy(rho: &DensityMatrix, delta: &DephasingMap) -> Result<f64> {
    check_dim(rho, delta.dim())?;
    Ok(entropy_bits(&delta.probabilities(rho.matrix())))
}

/// `C_d(ρ) = H_Δ(ρ) - S(ρ)`.
pub fn distillable_coherence(rho: &DensityMatrix, delta: &DephasingMap) -> Result<f64> {
    Ok((dephased_entropy(rho, delta)? - von_neumann(rho)).max(0.0))
}

/// `H_Δ(ρ) - C_d(ρ)`, which equals `S(ρ)`.
pub fn local_bound_gap(rho: &DensityMatrix, delta: &DephasingMap) -> Result<f64> {
    Ok(dephased_entropy(rho, delta)? - distillable_coherence(rho, delta)?)
}

/// Entropic pair `(H_Δ, C_d)` of a unit-trace Hermitian PSD matrix, without
/// building a validated [`DensityMatrix`].
pub(crate) fn coherence_pair(m: &ComplexMatrix, delta: &DephasingMap) -> (f64, f64) {
    let h = entropy_bits(&delta.probabilities(m));
    let s = entropy_bits(&qmat::eigvals_unchecked(m));
    (h, (h - s).max(0.0))
}

/// `D(ρ‖σ) = Tr ρ (log2 ρ - log2 σ)`; `+inf` when `supp ρ ⊄ supp σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dim(sigma, rho.dim())?;
    let e = qmat::eigh(sigma.matrix())?;
    let thr = e.rank_threshold();
    let mut cross = 0.0;
    let mut kernel_weight = 0.0;
    for (k, &lam) in e.values.iter().enumerate() {
        let v = Ket::normalized(e.vectors.inner().column(k).iter().copied().collect())?;
        let w = v.expectation(rho.matrix());
        if lam <= thr {
            kernel_weight += w;
        } else {
            cross += w * lam.log2();
        }
    }
    if kernel_weight > RANK_CUTOFF {
        return Ok(f64::INFINITY);
    }
    Ok((-von_neumann(rho) - cross).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::c;
    use approx::assert_abs_diff_eq;

    fn plus() -> DensityMatrix {
        DensityMatrix::from_pure(&ReferenceBasis::pauli_x().kets()[0])
    }

    fn zero() -> DensityMatrix {
        DensityMatrix::from_pure(&Ket::basis(2, 0))
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon(&[1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(shannon(&[0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-15);
        // -(1/4)log(1/4) - (3/4)log(3/4) = 0.5 + 0.75*0.4150375 = 0.8112781
        assert_abs_diff_eq!(shannon(&[0.25, 0.75]).unwrap(), 0.811_278_124_459_132_8, epsilon = 1e-12);
        assert!(shannon(&[0.5, 0.6]).is_err());
        assert!(shannon(&[1.1, -0.1]).is_err());
        assert!(shannon(&[1.0 + 1e-13, -1e-13]).is_ok());
    }

    #[test]
    fn binary_entropy_examples() {
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.25).unwrap(), 0.811_278_124_459_132_8, epsilon = 1e-12);
        assert_abs_diff_eq!(binary_entropy(0.3).unwrap(), binary_entropy(0.7).unwrap(), epsilon = 1e-15);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn von_neumann_examples() {
        assert_abs_diff_eq!(von_neumann(&plus()), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(von_neumann(&DensityMatrix::maximally_mixed(2)), 1.0, epsilon = 1e-12);
        // r|Φ+><Φ+| + (1-r)|Φ-><Φ-| has spectrum {r, 1-r, 0, 0}
        let r = 0.2;
        let mut m = ComplexMatrix::zeros(4, 4);
        m.set(0, 0, c(0.5, 0.0));
        m.set(3, 3, c(0.5, 0.0));
        m.set(0, 3, c(r - 0.5, 0.0));
        m.set(3, 0, c(r - 0.5, 0.0));
        let rho = DensityMatrix::new(m).unwrap();
        assert_abs_diff_eq!(von_neumann(&rho), 0.721_928_094_887_362_4, epsilon = 1e-12);
    }

    #[test]
    fn dephase_examples() {
        let z = DephasingMap::computational(2);
        let d = dephase(&plus(), &z).unwrap();
        assert!(d.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
        let diag = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        assert_eq!(dephase(&diag, &z).unwrap(), diag);

        // dephasing in a rotated basis equals rotate -> dephase in Z -> rotate back
        let x = DephasingMap::new(ReferenceBasis::pauli_x());
        let d = dephase(&zero(), &x).unwrap();
        assert!(d.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
    }

    #[test]
    fn dephased_entropy_examples() {
        let z = DephasingMap::computational(2);
        assert_abs_diff_eq!(dephased_entropy(&plus(), &z).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dephased_entropy(&zero(), &z).unwrap(), 0.0, epsilon = 1e-12);
        let mix = plus().mix(&zero(), 0.5).unwrap();
        assert_abs_diff_eq!(dephased_entropy(&mix, &z).unwrap(), 0.811_278_124_459_132_8, epsilon = 1e-12);
    }

    #[test]
    fn distillable_coherence_examples() {
        let z = DephasingMap::computational(2);
        assert_abs_diff_eq!(distillable_coherence(&plus(), &z).unwrap(), 1.0, epsilon = 1e-12);
        let diag = DensityMatrix::diagonal(&[0.1, 0.9]).unwrap();
        assert_abs_diff_eq!(distillable_coherence(&diag, &z).unwrap(), 0.0, epsilon = 1e-15);

        // 0.5|+><+| + 0.5|0><0| = [[3/4, 1/4],[1/4, 1/4]], eigenvalues (2 ± √2)/4
        let mix = plus().mix(&zero(), 0.5).unwrap();
        let l1 = (2.0 + 2f64.sqrt()) / 4.0;
        let s = -(l1 * l1.log2() + (1.0 - l1) * (1.0 - l1).log2());
        assert_abs_diff_eq!(s, 0.600_876_0, epsilon = 1e-7);
        assert_abs_diff_eq!(
            distillable_coherence(&mix, &z).unwrap(),
            0.811_278_124_459_132_8 - s,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(distillable_coherence(&mix, &z).unwrap(), 0.210_402_1, epsilon = 1e-7);
    }

    #[test]
    fn relative_entropy_examples() {
        let r = plus().mix(&zero(), 0.3).unwrap();
        assert_abs_diff_eq!(relative_entropy(&r, &r).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            relative_entropy(&plus(), &DensityMatrix::maximally_mixed(2)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(relative_entropy(&plus(), &zero()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn local_bound_gap_examples() {
        let z = DephasingMap::computational(2);
        assert_abs_diff_eq!(local_bound_gap(&plus(), &z).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            local_bound_gap(&DensityMatrix::maximally_mixed(2), &z).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let r = plus().mix(&zero(), 0.37).unwrap();
        assert_abs_diff_eq!(local_bound_gap(&r, &z).unwrap(), von_neumann(&r), epsilon = 1e-12);
    }

    #[test]
    fn basis_overlap() {
        let z = ReferenceBasis::computational(2);
        let x = ReferenceBasis::pauli_x();
        assert_abs_diff_eq!(z.max_overlap(&x).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(z.max_overlap(&z).unwrap(), 1.0, epsilon = 1e-15);
        assert!(ReferenceBasis::new(vec![Ket::basis(2, 0), Ket::basis(2, 0)]).is_err());
    }

    #[test]
    fn basis_json_roundtrip() {
        let b = ReferenceBasis::pauli_y();
        let s = serde_json::to_string(&b).unwrap();
        let back: ReferenceBasis = serde_json::from_str(&s).unwrap();
        assert_eq!(b, back);
    }
}
