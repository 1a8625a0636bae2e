//! Parametric two-qubit families, the closed-form X/Z assemblage, random
//! sampling and white-noise fitting.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{QcurError, Result};
use crate::infotheory::{self, ReferenceBasis};
use crate::qmat::{self, c, kron, ComplexMatrix, DensityMatrix, Keep, Ket, CLIP_TOL};
use crate::steering::Assemblage;

const SCHMIDT_TOL: f64 = 1e-9;

/// Local Bloch vectors and correlation matrix of
/// `χ = ¼[1⊗1 + r·σ⊗1 + 1⊗s·σ + Σ t_ij σ_i⊗σ_j]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochParams {
    pub r: [f64; 3],
    pub s: [f64; 3],
    pub t: [[f64; 3]; 3],
}

impl BlochParams {
    pub fn new(r: [f64; 3], s: [f64; 3], t: [[f64; 3]; 3]) -> Self {
        Self { r, s, t }
    }

    /// Pauli decomposition of a two-qubit state.
    pub fn from_state(rho: &DensityMatrix) -> Result<Self> {
        if rho.dim() != 4 {
            return Err(QcurError::Dimension {
                expected: 4,
                got: rho.dim(),
            });
        }
        let p = qmat::pauli::all();
        let id = ComplexMatrix::identity(2);
        let expect = |a: &ComplexMatrix, b: &ComplexMatrix| kron(a, b).trace_product(rho.matrix()).re;
        let mut out = Self::new([0.0; 3], [0.0; 3], [[0.0; 3]; 3]);
        for i in 0..3 {
            out.r[i] = expect(&p[i], &id);
            out.s[i] = expect(&id, &p[i]);
            for j in 0..3 {
                out.t[i][j] = expect(&p[i], &p[j]);
            }
        }
        Ok(out)
    }

    fn matrix(&self) -> ComplexMatrix {
        let p = qmat::pauli::all();
        let id = ComplexMatrix::identity(2);
        let mut m = ComplexMatrix::identity(4);
        for i in 0..3 {
            m = &m + &kron(&p[i], &id).scale(self.r[i]);
            m = &m + &kron(&id, &p[i]).scale(self.s[i]);
            for j in 0..3 {
                m = &m + &kron(&p[i], &p[j]).scale(self.t[i][j]);
            }
        }
        m.scale(0.25)
    }
}

/// Schmidt weights `q_i` of `Σ_i √q_i |ii>`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtVector {
    q: Vec<f64>,
}

impl SchmidtVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() || q.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(QcurError::invalid("Schmidt weights must be non-negative"));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > SCHMIDT_TOL {
            return Err(QcurError::invalid(format!("Schmidt weights sum to {total}, not 1")));
        }
        Ok(Self { q })
    }

    /// `(cos²θ, sin²θ)`.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { q: vec![c * c, s * s] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

pub fn pure_schmidt(q: &SchmidtVector) -> DensityMatrix {
    let d = q.dim();
    let mut amps = vec![c(0.0, 0.0); d * d];
    for (i, &w) in q.weights().iter().enumerate() {
        amps[i * d + i] = c(w.sqrt(), 0.0);
    }
    DensityMatrix::from_pure(&Ket::normalized(amps).expect("unit norm by construction"))
}

/// `√q|HH> + e^{iφ}√(1-q)|VV>`.
pub fn phi_state(q: f64, phi: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&q) {
        return Err(QcurError::invalid(format!("q = {q} outside [0, 1]")));
    }
    let amps = vec![
        c(q.sqrt(), 0.0),
        c(0.0, 0.0),
        c(0.0, 0.0),
        C64::from_polar((1.0 - q).sqrt(), phi),
    ];
    Ok(DensityMatrix::from_pure(&Ket::normalized(amps)?))
}

pub fn phi_plus() -> DensityMatrix {
    phi_state(0.5, 0.0).expect("valid")
}

pub fn phi_minus() -> DensityMatrix {
    phi_state(0.5, PI).expect("valid")
}

/// `r|Φ+><Φ+| + (1-r)|Φ-><Φ-|`.
pub fn bell_diagonal(r: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&r) {
        return Err(QcurError::invalid(format!("r = {r} outside [0, 1]")));
    }
    phi_plus().mix(&phi_minus(), r)
}

pub fn chi_general(p: &BlochParams) -> Result<DensityMatrix> {
    let m = p.matrix();
    let min = qmat::eigvals_unchecked(&m).into_iter().fold(f64::INFINITY, f64::min);
    if min < -CLIP_TOL {
        return Err(QcurError::invalid(format!(
            "parameters are unphysical: most negative eigenvalue {min:.6e}"
        )));
    }
    DensityMatrix::new(m)
}

/// `s|ψ_q><ψ_q| + (1-s) ρ_A ⊗ 1/d`.
pub fn chi_oneway(s: f64, q: &SchmidtVector) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&s) {
        return Err(QcurError::invalid(format!("s = {s} outside [0, 1]")));
    }
    let d = q.dim();
    let psi = pure_schmidt(q);
    let rho_a = psi.partial_trace((d, d), Keep::A)?;
    let product = rho_a.tensor(&DensityMatrix::maximally_mixed(d));
    psi.mix(&product, s)
}

/// `(1-p) ρ + p 1/d`.
pub fn white_noise_mix(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QcurError::invalid(format!("noise weight {p} outside [0, 1]")));
    }
    DensityMatrix::maximally_mixed(rho.dim()).mix(rho, p)
}

/// Closed-form eigenvalues of the conditional states, indexed `[x][a]` with
/// `x = 0` for X and `x = 1` for Z. `None` marks a zero-probability outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenTable {
    pub values: Vec<Vec<Option<[f64; 2]>>>,
}

/// X and Z in the Bloch index convention.
const XZ_AXES: [usize; 2] = [0, 2];

/// Conditional states for X/Z measurements on `χ(r, s, t)` from the Bloch
/// parameters alone, along with the eigenvalues of each conditional state
/// and of its Z-dephased version.
pub fn analytic_assemblage_xz(p: &BlochParams) -> Result<(Assemblage, EigenTable, EigenTable)> {
    chi_general(p)?;
    let paulis = qmat::pauli::all();
    let mut members = Vec::with_capacity(2);
    let mut eig = Vec::with_capacity(2);
    let mut eig_deph = Vec::with_capacity(2);
    for &x in &XZ_AXES {
        let mut row = Vec::with_capacity(2);
        let mut e_row = Vec::with_capacity(2);
        let mut d_row = Vec::with_capacity(2);
        for a in 0..2 {
            let sign = if a == 0 { 1.0 } else { -1.0 };
            let v: Vec<f64> = (0..3).map(|j| p.s[j] + sign * p.t[x][j]).collect();
            let weight = 1.0 + sign * p.r[x];
            let mut m = ComplexMatrix::identity(2).scale(weight);
            for j in 0..3 {
                m = &m + &paulis[j].scale(v[j]);
            }
            row.push(m.scale(0.25));
            if weight / 2.0 < crate::steering::ZERO_PROB_MEMBER {
                e_row.push(None);
                d_row.push(None);
            } else {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt() / weight;
                let z = v[2] / weight;
                e_row.push(Some([0.5 * (1.0 + norm), 0.5 * (1.0 - norm)]));
                d_row.push(Some([0.5 * (1.0 + z), 0.5 * (1.0 - z)]));
            }
        }
        members.push(row);
        eig.push(e_row);
        eig_deph.push(d_row);
    }
    Ok((
        Assemblage::from_trusted(members),
        EigenTable { values: eig },
        EigenTable { values: eig_deph },
    ))
}

fn gaussian_ket(dim: usize, rng: &mut impl Rng) -> Ket {
    loop {
        let amps: Vec<C64> = (0..dim)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(k) = Ket::normalized(amps) {
            return k;
        }
    }
}

/// Haar-random pure state on `d_a ⊗ d_b`.
pub fn haar_random_pure_with(d_a: usize, d_b: usize, rng: &mut impl Rng) -> DensityMatrix {
    DensityMatrix::from_pure(&gaussian_ket(d_a * d_b, rng))
}

pub fn haar_random_pure(d_a: usize, d_b: usize, seed: u64) -> DensityMatrix {
    haar_random_pure_with(d_a, d_b, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Mixed state from tracing out a `d_env`-dimensional part of a Haar pure state.
pub fn haar_random_state_env(d: usize, d_env: usize, rng: &mut impl Rng) -> DensityMatrix {
    let ket = gaussian_ket(d * d_env, rng);
    let amps = ket.amplitudes();
    // ρ_ij = Σ_k ψ_{ik} ψ*_{jk}
    let m = ComplexMatrix::from_fn(d, d, |i, j| {
        (0..d_env)
            .map(|k| amps[i * d_env + k] * amps[j * d_env + k].conj())
            .sum()
    });
    DensityMatrix::from_trusted(m)
}

pub fn haar_random_state_with(d: usize, rng: &mut impl Rng) -> DensityMatrix {
    haar_random_state_env(d, d, rng)
}

pub fn haar_random_state(d: usize, seed: u64) -> DensityMatrix {
    haar_random_state_with(d, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Haar unitary from the QR decomposition of a Ginibre matrix, with the
/// phases of `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, d, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.into_inner().qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    ComplexMatrix::from_inner(q)
}

pub fn random_basis(d: usize, rng: &mut impl Rng) -> ReferenceBasis {
    ReferenceBasis::from_unitary(&haar_unitary(d, rng)).expect("unitary columns are orthonormal")
}

/// Uniform random point in the unit ball.
pub fn random_bloch_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return v;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseFit {
    pub p: f64,
    pub fidelity: f64,
}

const GOLDEN_TOL: f64 = 1e-5;

/// Finds `p ∈ [0, 1]` maximizing `F(white_noise_mix(ρ_th, p), ρ_exp)`.
pub fn fit_white_noise(rho_exp: &DensityMatrix, rho_th: &DensityMatrix) -> Result<NoiseFit> {
    if rho_exp.dim() != rho_th.dim() {
        return Err(QcurError::Dimension {
            expected: rho_th.dim(),
            got: rho_exp.dim(),
        });
    }
    let f = |p: f64| -> Result<f64> { qmat::bures_fidelity(&white_noise_mix(rho_th, p)?, rho_exp) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > GOLDEN_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let mut best = NoiseFit {
        p: 0.5 * (lo + hi),
        fidelity: f(0.5 * (lo + hi))?,
    };
    for edge in [0.0, 1.0] {
        let fe = f(edge)?;
        if fe >= best.fidelity {
            best = NoiseFit { p: edge, fidelity: fe };
        }
    }
    Ok(best)
}

/// `H_b(q)`: the witness value of `phi_state(q, 0)` with X/Z settings.
pub fn phi_state_sivp_theory(q: f64) -> Result<f64> {
    infotheory::binary_entropy(q)
}

/// `1 - H_b(r)`: the witness value of `bell_diagonal(r)` with X/Z settings.
pub fn bell_diagonal_sivp_theory(r: f64) -> Result<f64> {
    Ok(1.0 - infotheory::binary_entropy(r)?)
}
