//! Steering-equivalent observables, parent-POVM models and the
//! steering-assisted incompatibility measure `V_I`.

use std::cell::Cell;

use argmin::core::{CostFunction, Error as ArgminError, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channels::{wire_assemblage, WiringMap};
use crate::error::{QcurError, Result};
use crate::infotheory::{DephasingMap, ReferenceBasis};
use crate::qmat::{self, c, ComplexMatrix, DensityMatrix};
use crate::steering::{self, check_distribution, Assemblage, MeasurementSet, Povm};

/// SEO effects must sum to the support projector within this.
pub const SEO_TOL: f64 = 1e-8;

/// Steering-equivalent observables `B_{a|x} = ρ_B^{-1/2} σ_{a|x} ρ_B^{-1/2}`,
/// with the inverse taken on the support of `ρ_B`.
pub fn seo(asm: &Assemblage) -> Result<MeasurementSet> {
    let rho_b = asm.marginal();
    let inv = qmat::pinv_sqrt_matrix(&rho_b)?;
    let support = qmat::support_projector(&rho_b)?;
    let settings: Vec<Vec<ComplexMatrix>> = asm
        .members()
        .iter()
        .map(|row| row.iter().map(|s| (&(&inv * s) * &inv).hermitian_part()).collect())
        .collect();
    for (x, row) in settings.iter().enumerate() {
        let dev = qmat::sum_matrices(row).expect("non-empty").max_abs_diff(&support);
        if dev > SEO_TOL {
            return Err(QcurError::invalid(format!(
                "SEO setting {x} does not sum to the support projector (deviation {dev:.3e})"
            )));
        }
    }
    Ok(MeasurementSet::from_trusted(settings))
}

/// `√ρ M_{a|x} √ρ` for every effect.
pub fn embed_measurements(m: &MeasurementSet, rho_b: &DensityMatrix) -> Result<Assemblage> {
    if m.dim() != rho_b.dim() {
        return Err(QcurError::Dimension {
            expected: m.dim(),
            got: rho_b.dim(),
        });
    }
    let sr = qmat::sqrt_psd(rho_b.matrix())?;
    Ok(embed_with_root(m, &sr))
}

fn embed_with_root(m: &MeasurementSet, sr: &ComplexMatrix) -> Assemblage {
    let members = m
        .settings()
        .iter()
        .map(|p| p.effects().iter().map(|e| &(sr * e) * sr).collect())
        .collect();
    Assemblage::from_trusted(members)
}

/// Joint-measurability model `M_{a|x} = Σ_λ p(a|x,λ) G_λ`.
#[derive(Clone, Debug)]
pub struct ParentModel {
    parent: Povm,
    /// `responses[x][λ][a]`.
    responses: Vec<Vec<Vec<f64>>>,
}

impl ParentModel {
    pub fn new(parent: Povm, responses: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if responses.is_empty() {
            return Err(QcurError::invalid("parent model needs at least one setting"));
        }
        for (x, per_lambda) in responses.iter().enumerate() {
            if per_lambda.len() != parent.n_outcomes() {
                return Err(QcurError::invalid(format!(
                    "setting {x} has {} response rows, parent has {} outcomes",
                    per_lambda.len(),
                    parent.n_outcomes()
                )));
            }
            let n = per_lambda[0].len();
            for (l, dist) in per_lambda.iter().enumerate() {
                if dist.len() != n {
                    return Err(QcurError::invalid("ragged response table"));
                }
                check_distribution(dist, &format!("p(.|x={x}, λ={l})"))?;
            }
        }
        Ok(Self { parent, responses })
    }

    pub fn parent(&self) -> &Povm {
        &self.parent
    }

    pub fn responses(&self) -> &[Vec<Vec<f64>>] {
        &self.responses
    }
}

pub fn compatible_set(model: &ParentModel) -> MeasurementSet {
    let dim = model.parent.dim();
    let settings = model
        .responses
        .iter()
        .map(|per_lambda| {
            (0..per_lambda[0].len())
                .map(|a| {
                    let mut acc = ComplexMatrix::zeros(dim, dim);
                    for (g, dist) in model.parent.effects().iter().zip(per_lambda) {
                        acc = &acc + &g.scale(dist[a]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    MeasurementSet::from_trusted(settings)
}

/// Four-outcome parent `G_{ij} = [1 + (-1)^i η X + (-1)^j η Z] / 4` whose
/// marginals are the noisy X and Z measurements with visibility `η`.
pub fn smeared_xz_parent(eta: f64) -> Result<ParentModel> {
    if !(0.0..=std::f64::consts::FRAC_1_SQRT_2 + 1e-12).contains(&eta) {
        return Err(QcurError::Domain(format!(
            "visibility {eta} is outside [0, 1/√2], where the X/Z parent stops being positive"
        )));
    }
    let (x, z) = (qmat::pauli::x(), qmat::pauli::z());
    let id = ComplexMatrix::identity(2);
    let sign = |k: usize| if k == 0 { 1.0 } else { -1.0 };
    let mut effects = Vec::with_capacity(4);
    let mut resp_x = Vec::with_capacity(4);
    let mut resp_z = Vec::with_capacity(4);
    for i in 0..2 {
        for j in 0..2 {
            let g = &(&id + &x.scale(sign(i) * eta)) + &z.scale(sign(j) * eta);
            effects.push(g.scale(0.25));
            resp_x.push(if i == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] });
            resp_z.push(if j == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] });
        }
    }
    ParentModel::new(Povm::new(effects)?, vec![resp_x, resp_z])
}

/// Noisy Pauli X and Z with visibility `η`.
pub fn smeared_xz(eta: f64) -> Result<MeasurementSet> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(QcurError::Domain(format!("visibility {eta} outside [0, 1]")));
    }
    let sharp = MeasurementSet::pauli_xz();
    let trivial = MeasurementSet::from_trusted(vec![vec![ComplexMatrix::identity(2).scale(0.5); 2]; 2]);
    sharp.mix(&trivial, eta)
}

/// `M_{a'|x'} = Σ_{a,x} p(x|x') p(a'|a,x,x') M_{a|x}`.
pub fn post_process_measurements(w: &WiringMap, m: &MeasurementSet) -> Result<MeasurementSet> {
    let as_members = Assemblage::from_trusted(
        m.settings().iter().map(|p| p.effects().to_vec()).collect(),
    );
    let wired = wire_assemblage(w, &as_members)?;
    Ok(MeasurementSet::from_trusted(wired.members().to_vec()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncompatConfig {
    /// Points per axis of the qubit Bloch-ball scan.
    pub grid: usize,
    /// Number of local refinements.
    pub n_starts: usize,
    /// Objective evaluations available to the local refinements.
    pub budget: usize,
    /// States are kept at least this far inside the boundary.
    pub epsilon: f64,
    pub basis: ReferenceBasis,
    pub seed: u64,
}

impl IncompatConfig {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            grid: 21,
            n_starts: 5,
            budget: 2000,
            epsilon: 1e-3,
            basis: ReferenceBasis::computational(dim),
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TracePoint {
    pub evaluation: usize,
    pub value: f64,
}

/// Best value found; a lower bound on the supremum.
#[derive(Clone, Debug)]
pub struct IncompatReport {
    pub value: f64,
    pub argmax_state: DensityMatrix,
    /// Running best, recorded at each improvement.
    pub trace: Vec<TracePoint>,
    pub converged: bool,
    pub evaluations: usize,
    pub basis: ReferenceBasis,
}

struct Objective<'a> {
    m: &'a MeasurementSet,
    delta: DephasingMap,
    epsilon: f64,
    evaluations: Cell<usize>,
    best: Cell<f64>,
    best_params: std::cell::RefCell<Vec<f64>>,
    trace: std::cell::RefCell<Vec<TracePoint>>,
}

impl Objective<'_> {
    fn state(&self, params: &[f64]) -> DensityMatrix {
        let d = self.m.dim();
        if d == 2 {
            bloch_state(params, self.epsilon)
        } else {
            cholesky_state(d, params, self.epsilon)
        }
    }

    fn value(&self, params: &[f64]) -> f64 {
        let rho = self.state(params);
        let sr = qmat::sqrt_psd(rho.matrix()).expect("state is Hermitian");
        let v = steering::sivp(&embed_with_root(self.m, &sr), &self.delta).expect("dimensions checked");
        let n = self.evaluations.get() + 1;
        self.evaluations.set(n);
        if v > self.best.get() {
            self.best.set(v);
            *self.best_params.borrow_mut() = params.to_vec();
            self.trace.borrow_mut().push(TracePoint { evaluation: n, value: v });
        }
        v
    }
}

impl CostFunction for &Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, ArgminError> {
        Ok(-self.value(p))
    }
}

/// `(1 + r·σ)/2` with `r` pulled radially inside the ball of radius `1 - ε`.
fn bloch_state(r: &[f64], epsilon: f64) -> DensityMatrix {
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cap = 1.0 - epsilon;
    let k = if norm > cap { cap / norm } else { 1.0 };
    let mut m = ComplexMatrix::identity(2);
    for (p, &ri) in qmat::pauli::all().iter().zip(r) {
        m = &m + &p.scale(k * ri);
    }
    DensityMatrix::from_trusted(m.scale(0.5))
}

/// `(1 - ε) L L† / Tr(L L†) + ε 1/d` with `L` lower triangular; the first `d`
/// parameters are the diagonal, the rest the real and imaginary parts below it.
fn cholesky_state(d: usize, params: &[f64], epsilon: f64) -> DensityMatrix {
    let mut l = ComplexMatrix::zeros(d, d);
    let mut it = params[d..].chunks(2);
    for (i, &diag) in params[..d].iter().enumerate() {
        l.set(i, i, c(diag, 0.0));
        for j in 0..i {
            let p = it.next().expect("parameter count");
            l.set(i, j, c(p[0], p[1]));
        }
    }
    let ll = &l * &l.adjoint();
    let t = ll.trace().re.max(f64::MIN_POSITIVE);
    let m = &ll.scale((1.0 - epsilon) / t) + &ComplexMatrix::identity(d).scale(epsilon / d as f64);
    DensityMatrix::from_trusted(m)
}

fn initial_simplex(center: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![center.to_vec()];
    for i in 0..center.len() {
        let mut v = center.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    simplex
}

/// Maximizes `V_S(√ρ M √ρ)` over full-rank `ρ`.
///
/// Qubits: Bloch-ball grid scan, then Nelder–Mead from the best grid points.
/// Higher dimensions: Nelder–Mead over a Cholesky parametrization from the
/// maximally mixed state and seeded random starts.
pub fn incompat_measure(m: &MeasurementSet, config: &IncompatConfig) -> Result<IncompatReport> {
    let d = m.dim();
    if config.basis.dim() != d {
        return Err(QcurError::Dimension {
            expected: d,
            got: config.basis.dim(),
        });
    }
    if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
        return Err(QcurError::invalid("epsilon must lie in (0, 1)"));
    }
    let obj = Objective {
        m,
        delta: DephasingMap::new(config.basis.clone()),
        epsilon: config.epsilon,
        evaluations: Cell::new(0),
        best: Cell::new(f64::NEG_INFINITY),
        best_params: Default::default(),
        trace: Default::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let (starts, step): (Vec<Vec<f64>>, f64) = if d == 2 {
        let g = config.grid.max(2);
        let mut scored = Vec::new();
        for i in 0..g {
            for j in 0..g {
                for k in 0..g {
                    let r: Vec<f64> = [i, j, k]
                        .iter()
                        .map(|&n| -1.0 + 2.0 * n as f64 / (g - 1) as f64)
                        .collect();
                    if r.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-12 {
                        let v = obj.value(&r);
                        scored.push((v, r));
                    }
                }
            }
        }
        // stable order keeps ties deterministic
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let starts = scored.into_iter().take(config.n_starts).map(|(_, r)| r).collect();
        (starts, 1.0 / (g - 1) as f64)
    } else {
        let n = d * d;
        let mut identity = vec![0.0; n];
        identity[..d].iter_mut().for_each(|x| *x = 1.0);
        let mut starts = vec![identity];
        while starts.len() < config.n_starts.max(1) {
            starts.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        (starts, 0.2)
    };

    let per_start = config.budget / starts.len().max(1);
    let mut converged = true;
    for start in starts {
        if per_start < 2 {
            converged = false;
            break;
        }
        let before = obj.evaluations.get();
        let solver = NelderMead::new(initial_simplex(&start, step))
            .with_sd_tolerance(1e-12)
            .map_err(|e| QcurError::invalid(e.to_string()))?;
        // each iteration costs at least one evaluation; the counter enforces the cap
        let res = Executor::new(&obj, solver)
            .configure(|s| s.max_iters(per_start.saturating_sub(start.len() + 1) as u64 / 2))
            .run()
            .map_err(|e| QcurError::invalid(e.to_string()))?;
        if !matches!(
            res.state.get_termination_status(),
            TerminationStatus::Terminated(TerminationReason::SolverConverged)
        ) {
            converged = false;
        }
        debug_assert!(obj.evaluations.get() - before <= per_start + start.len() + 1);
    }

    let best = obj.best.get().max(0.0);
    let params = obj.best_params.borrow().clone();
    Ok(IncompatReport {
        value: best,
        argmax_state: obj.state(&params),
        trace: obj.trace.into_inner(),
        converged,
        evaluations: obj.evaluations.get(),
        basis: config.basis.clone(),
    })
}
