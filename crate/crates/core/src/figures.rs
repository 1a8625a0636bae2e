//! Witness curves and scans over the parametric state families.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::Serialize;

use crate::channels::coherence_generating_example;
use crate::error::{QcurError, Result};
use crate::infotheory::DephasingMap;
use crate::qmat::{ComplexMatrix, DensityMatrix};
use crate::states::{chi_oneway, phi_minus, phi_plus, phi_state, white_noise_mix, SchmidtVector};
use crate::steering::{assemblage_from_state, sivp, sivp_both_directions, MeasurementSet, VIOLATION_THRESHOLD};

/// Witness value with Alice measuring X and Z and Bob dephasing in Z.
pub fn xz_sivp(rho: &DensityMatrix) -> Result<f64> {
    sivp(
        &assemblage_from_state(rho, &MeasurementSet::pauli_xz())?,
        &DephasingMap::computational(2),
    )
}

/// `steps + 1` evenly spaced points from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![lo];
    }
    (0..=steps)
        .map(|i| if i == steps { hi } else { lo + (hi - lo) * i as f64 / steps as f64 })
        .collect()
}

fn check_range(lo: f64, hi: f64, name: &str) -> Result<()> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(QcurError::Domain(format!(
            "{name} range [{lo}, {hi}] must satisfy 0 <= min <= max <= 1"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub sivp_ideal: f64,
    pub sivp_noisy: f64,
}

/// Witness along `√q|00> + √(1-q)|11>`, ideal and with white noise `p`.
pub fn schmidt_curve(qmin: f64, qmax: f64, steps: usize, noise_p: f64) -> Result<Vec<CurvePoint>> {
    check_range(qmin, qmax, "q")?;
    check_range(noise_p, noise_p, "noise")?;
    linspace(qmin, qmax, steps)
        .into_par_iter()
        .map(|q| {
            let rho = phi_state(q, 0.0)?;
            Ok(CurvePoint {
                x: q,
                sivp_ideal: xz_sivp(&rho)?,
                sivp_noisy: xz_sivp(&white_noise_mix(&rho, noise_p)?)?,
            })
        })
        .collect()
}

/// Witness along `r Φ+ + (1-r) Φ-`; in the noisy variant each Bell
/// projector first receives its own white-noise weight.
pub fn bell_diagonal_curve(
    rmin: f64,
    rmax: f64,
    steps: usize,
    noise_plus: f64,
    noise_minus: f64,
) -> Result<Vec<CurvePoint>> {
    check_range(rmin, rmax, "r")?;
    check_range(noise_plus, noise_plus, "noise")?;
    check_range(noise_minus, noise_minus, "noise")?;
    let noisy_plus = white_noise_mix(&phi_plus(), noise_plus)?;
    let noisy_minus = white_noise_mix(&phi_minus(), noise_minus)?;
    linspace(rmin, rmax, steps)
        .into_par_iter()
        .map(|r| {
            Ok(CurvePoint {
                x: r,
                sivp_ideal: xz_sivp(&phi_plus().mix(&phi_minus(), r)?)?,
                sivp_noisy: xz_sivp(&noisy_plus.mix(&noisy_minus, r)?)?,
            })
        })
        .collect()
}

/// Which directions of steering the witness detects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Region {
    /// Both directions.
    I,
    /// Exactly one direction.
    II,
    /// Neither.
    III,
}

impl Region {
    pub fn classify(a_to_b: f64, b_to_a: f64) -> Self {
        match (a_to_b > VIOLATION_THRESHOLD, b_to_a > VIOLATION_THRESHOLD) {
            (true, true) => Region::I,
            (false, false) => Region::III,
            _ => Region::II,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OnewayPoint {
    pub s: f64,
    pub theta: f64,
    /// Alice measures, Bob holds the assemblage.
    pub sivp_a_to_b: f64,
    /// Bob measures, Alice holds the assemblage.
    pub sivp_b_to_a: f64,
    pub region: Region,
}

pub const ONEWAY_S_RANGE: (f64, f64) = (0.75, 1.0);
pub const ONEWAY_THETA_RANGE: (f64, f64) = (0.005, FRAC_PI_4);

/// Both witness directions for `s|ψ_θ><ψ_θ| + (1-s) ρ_A ⊗ 1/2`.
pub fn oneway_point(s: f64, theta: f64) -> Result<OnewayPoint> {
    let rho = chi_oneway(s, &SchmidtVector::from_angle(theta))?;
    let m = MeasurementSet::pauli_xz();
    let z = DephasingMap::computational(2);
    let (a_to_b, b_to_a) = sivp_both_directions(&rho, (2, 2), &m, &m, &z, &z)?;
    Ok(OnewayPoint {
        s,
        theta,
        sivp_a_to_b: a_to_b,
        sivp_b_to_a: b_to_a,
        region: Region::classify(a_to_b, b_to_a),
    })
}

/// Grid over `s ∈ [0.75, 1]` and `θ ∈ [0.005, π/4]`, `s` varying slowest.
pub fn oneway_scan(grid_s: usize, grid_theta: usize) -> Result<Vec<OnewayPoint>> {
    if grid_s < 2 || grid_theta < 2 {
        return Err(QcurError::Domain("scan grids need at least two points per axis".into()));
    }
    let ss = linspace(ONEWAY_S_RANGE.0, ONEWAY_S_RANGE.1, grid_s - 1);
    let ts = linspace(ONEWAY_THETA_RANGE.0, ONEWAY_THETA_RANGE.1, grid_theta - 1);
    let points: Vec<(f64, f64)> = ss.iter().flat_map(|&s| ts.iter().map(move |&t| (s, t))).collect();
    points.into_par_iter().map(|(s, t)| oneway_point(s, t)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CptpRegression {
    pub sivp_before: f64,
    pub sivp_after: f64,
    /// The channel applied to the maximally mixed qubit.
    pub image_of_mixed: ComplexMatrix,
}

pub fn cptp_regression() -> Result<CptpRegression> {
    let (rho, ch) = coherence_generating_example();
    let asm = assemblage_from_state(&rho, &MeasurementSet::pauli_xz())?;
    let z = DephasingMap::computational(2);
    Ok(CptpRegression {
        sivp_before: sivp(&asm, &z)?,
        sivp_after: sivp(&ch.apply_to_assemblage(&asm)?, &z)?,
        image_of_mixed: ch.apply(&DensityMatrix::maximally_mixed(2))?.into_matrix(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 1.0, 100);
        assert_eq!(v.len(), 101);
        assert_eq!(v[100], 1.0);
        assert_abs_diff_eq!(v[25], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn curve_spot_values() {
        let c = schmidt_curve(0.0, 1.0, 4, 0.0).unwrap();
        assert_abs_diff_eq!(c[0].sivp_ideal, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1].sivp_ideal, 0.811_278_124_459_132_8, epsilon = 1e-9);
        assert_abs_diff_eq!(c[2].sivp_ideal, 1.0, epsilon = 1e-9);
        assert!(schmidt_curve(0.6, 0.4, 4, 0.0).is_err());

        let b = bell_diagonal_curve(0.5, 1.0, 5, 0.009, 0.013).unwrap();
        assert_abs_diff_eq!(b[0].sivp_ideal, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[4].sivp_ideal, 0.531_004_406_410_719_5, epsilon = 1e-9);
        assert_abs_diff_eq!(b[5].sivp_ideal, 1.0, epsilon = 1e-9);
        assert!(b[5].sivp_noisy < 1.0);
    }

    #[test]
    fn oneway_spot_values() {
        assert_eq!(oneway_point(1.0, FRAC_PI_4).unwrap().region, Region::I);
        assert_eq!(oneway_point(0.75, 0.005).unwrap().region, Region::III);
        let p = oneway_point(0.85, 0.15).unwrap();
        assert_eq!(p.region, Region::II);
        assert_eq!(p.sivp_a_to_b, 0.0);
        assert!(p.sivp_b_to_a > 0.0);
    }
}
