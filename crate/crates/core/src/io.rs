//! JSON interchange formats and number formatting.
//!
//! Matrices are written as `{"re": [[...]], "im": [[...]]}` with one inner
//! array per row.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channels::KrausChannel;
use crate::error::{QcurError, Result};
use crate::incompat::IncompatReport;
use crate::qmat::{c, ComplexMatrix};
use crate::steering::{Assemblage, MeasurementSet, Povm};
use crate::tomo::{MonteCarloSummary, TomoResult};

pub const SIGNIFICANT_DIGITS: usize = 9;

/// `x` rounded to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal form of `round_sig(x)`.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

/// Rounds every number in a JSON tree.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            serde_json::Number::from_f64(round_sig(n.as_f64().expect("f64"))).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Serializes with nine significant digits and a trailing newline.
pub fn to_json_string(v: &impl Serialize) -> Result<String> {
    let value = serde_json::to_value(v).map_err(|e| QcurError::invalid(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&round_json(value)).map_err(|e| QcurError::invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| QcurError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        let rows = |f: fn(num_complex::Complex64) -> f64| {
            (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| f(m.get(i, j))).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(QcurError::invalid("matrix is empty"));
        }
        if self.im.len() != rows
            || self.re.iter().any(|r| r.len() != cols)
            || self.im.iter().any(|r| r.len() != cols)
        {
            return Err(QcurError::invalid("real and imaginary parts must be rectangular and of equal shape"));
        }
        let entries = self
            .re
            .iter()
            .zip(&self.im)
            .flat_map(|(r, i)| r.iter().zip(i).map(|(&a, &b)| c(a, b)))
            .collect();
        ComplexMatrix::new(rows, cols, entries)
    }
}

fn check_dim(declared: usize, m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.rows() != declared {
        return Err(QcurError::invalid(format!(
            "{what} is {}x{} but dim is {declared}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblageJson {
    pub dim: usize,
    pub n_settings: usize,
    pub n_outcomes: Vec<usize>,
    /// `members[x][a]`.
    pub members: Vec<Vec<MatrixJson>>,
}

impl From<&Assemblage> for AssemblageJson {
    fn from(a: &Assemblage) -> Self {
        Self {
            dim: a.dim(),
            n_settings: a.n_settings(),
            n_outcomes: a.outcome_counts(),
            members: a.members().iter().map(|r| r.iter().map(MatrixJson::from).collect()).collect(),
        }
    }
}

impl AssemblageJson {
    pub fn to_assemblage(&self) -> Result<Assemblage> {
        let members = self
            .members
            .iter()
            .map(|r| {
                r.iter()
                    .map(|m| {
                        let m = m.to_matrix()?;
                        check_dim(self.dim, &m, "member")?;
                        Ok(m)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if members.len() != self.n_settings || members.iter().map(Vec::len).collect::<Vec<_>>() != self.n_outcomes {
            return Err(QcurError::invalid("member counts disagree with n_settings / n_outcomes"));
        }
        Assemblage::new(members)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_out: Option<usize>,
    pub kraus: Vec<MatrixJson>,
}

impl From<&KrausChannel> for ChannelJson {
    fn from(ch: &KrausChannel) -> Self {
        Self {
            dim: ch.dim_in(),
            dim_out: (ch.dim_out() != ch.dim_in()).then_some(ch.dim_out()),
            kraus: ch.kraus().iter().map(MatrixJson::from).collect(),
        }
    }
}

impl ChannelJson {
    pub fn to_channel(&self) -> Result<KrausChannel> {
        let dim_out = self.dim_out.unwrap_or(self.dim);
        let kraus = self
            .kraus
            .iter()
            .map(|k| {
                let m = k.to_matrix()?;
                if m.rows() != dim_out || m.cols() != self.dim {
                    return Err(QcurError::invalid(format!(
                        "Kraus operator is {}x{}, expected {dim_out}x{}",
                        m.rows(),
                        m.cols(),
                        self.dim
                    )));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        KrausChannel::new(kraus)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetJson {
    pub dim: usize,
    /// `settings[x][a]` is the effect `M_{a|x}`.
    pub settings: Vec<Vec<MatrixJson>>,
}

impl From<&MeasurementSet> for MeasurementSetJson {
    fn from(m: &MeasurementSet) -> Self {
        Self {
            dim: m.dim(),
            settings: m
                .settings()
                .iter()
                .map(|p| p.effects().iter().map(MatrixJson::from).collect())
                .collect(),
        }
    }
}

impl MeasurementSetJson {
    pub fn to_measurements(&self) -> Result<MeasurementSet> {
        let povms = self
            .settings
            .iter()
            .map(|effects| {
                let effects = effects
                    .iter()
                    .map(|e| {
                        let m = e.to_matrix()?;
                        check_dim(self.dim, &m, "effect")?;
                        Ok(m)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Povm::new(effects)
            })
            .collect::<Result<Vec<_>>>()?;
        MeasurementSet::new(povms)
    }
}

pub fn parse_assemblage(text: &str) -> Result<Assemblage> {
    parse_json::<AssemblageJson>(text)?.to_assemblage()
}

pub fn parse_channel(text: &str) -> Result<KrausChannel> {
    parse_json::<ChannelJson>(text)?.to_channel()
}

pub fn parse_measurement_set(text: &str) -> Result<MeasurementSet> {
    parse_json::<MeasurementSetJson>(text)?.to_measurements()
}

#[derive(Clone, Debug, Serialize)]
pub struct TomoResultJson {
    pub rho_hat: MatrixJson,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub informationally_complete: bool,
}

impl From<&TomoResult> for TomoResultJson {
    fn from(r: &TomoResult) -> Self {
        Self {
            rho_hat: MatrixJson::from(r.rho_hat.matrix()),
            loglik: r.loglik,
            iterations: r.iterations,
            converged: r.converged,
            informationally_complete: r.informationally_complete,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloJson {
    pub mean: f64,
    pub sigma: Option<f64>,
    pub point_estimate: f64,
    pub n_reps: usize,
    pub seed: u64,
}

impl From<&MonteCarloSummary> for MonteCarloJson {
    fn from(s: &MonteCarloSummary) -> Self {
        Self {
            mean: s.mean,
            sigma: s.sigma,
            point_estimate: s.point_estimate,
            n_reps: s.n_reps,
            seed: s.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IncompatReportJson {
    /// Best value found; a lower bound on the supremum.
    pub value_lower_bound: f64,
    pub argmax_state: MatrixJson,
    pub converged: bool,
    pub evaluations: usize,
    pub reference_basis: Vec<MatrixJson>,
    pub trace: Vec<crate::incompat::TracePoint>,
}

impl From<&IncompatReport> for IncompatReportJson {
    fn from(r: &IncompatReport) -> Self {
        Self {
            value_lower_bound: r.value,
            argmax_state: MatrixJson::from(r.argmax_state.matrix()),
            converged: r.converged,
            evaluations: r.evaluations,
            reference_basis: r.basis.kets().iter().map(|k| MatrixJson::from(&k.projector())).collect(),
            trace: r.trace.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::phi_plus;
    use crate::steering::assemblage_from_state;

    #[test]
    fn rounding() {
        assert_eq!(fmt_num(0.811_278_124_459_132_8), "0.811278124");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-1.234_567_890_123e-5), "-0.0000123456789");
        assert_eq!(round_sig(123_456_789_012.0), 123_456_789_000.0);
    }

    #[test]
    fn assemblage_round_trip() {
        let asm = assemblage_from_state(&phi_plus(), &MeasurementSet::pauli_xz()).unwrap();
        let text = serde_json::to_string(&AssemblageJson::from(&asm)).unwrap();
        let back = parse_assemblage(&text).unwrap();
        assert!(back.member(0, 1).max_abs_diff(asm.member(0, 1)) < 1e-15);
    }

    #[test]
    fn channel_and_measurement_round_trip() {
        let ch = KrausChannel::dephasing(2);
        let back = parse_channel(&serde_json::to_string(&ChannelJson::from(&ch)).unwrap()).unwrap();
        assert_eq!(back, ch);
        let m = MeasurementSet::pauli_xz();
        let back = parse_measurement_set(&serde_json::to_string(&MeasurementSetJson::from(&m)).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "{\n  \"dim\": 2,\n  \"kraus\": [\n    {\"re\": [[1, 0], [0, 1]], \"im\": oops}\n  ]\n}";
        match parse_channel(text) {
            Err(QcurError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let incomplete = r#"{"dim": 2, "kraus": [{"re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]}]}"#;
        assert!(matches!(parse_channel(incomplete), Err(QcurError::Validation(_))));
    }
}
