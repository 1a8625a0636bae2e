use qcur::infotheory::DephasingMap;
use qcur::qmat::{ComplexMatrix, DensityMatrix};
use qcur::states::{haar_random_state_env, phi_plus, phi_state};
use qcur::steering::MeasurementSet;
use qcur::tomo::{
    mle_reconstruct, monte_carlo_sivp, pauli36_settings, simulate_counts, CoincidenceRecord,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let diff = a.matrix() - b.matrix();
    0.5 * qcur::qmat::eigh(&diff).unwrap().values.iter().map(|v| v.abs()).sum::<f64>()
}

#[test]
fn reconstruction_ignores_row_order() {
    let rec = simulate_counts(&phi_state(0.3, 0.4).unwrap(), &pauli36_settings(), 3.6e4, 5).unwrap();
    let base = mle_reconstruct(&rec).unwrap().rho_hat;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut order: Vec<usize> = (0..rec.counts.len()).collect();
    order.shuffle(&mut rng);
    let shuffled = CoincidenceRecord::new(
        order.iter().map(|&i| rec.settings[i].clone()).collect(),
        order.iter().map(|&i| rec.counts[i]).collect(),
    )
    .unwrap();
    let other = mle_reconstruct(&shuffled).unwrap().rho_hat;
    assert!(base.matrix().max_abs_diff(other.matrix()) < 1e-10);
}

#[test]
fn monte_carlo_is_reproducible() {
    let rec = simulate_counts(&phi_plus(), &pauli36_settings(), 3.6e4, 7).unwrap();
    let plan = MeasurementSet::pauli_xz();
    let z = DephasingMap::computational(2);
    let a = monte_carlo_sivp(&rec, 20, &plan, &z, 9).unwrap();
    let b = monte_carlo_sivp(&rec, 20, &plan, &z, 9).unwrap();
    assert_eq!(a.samples, b.samples);
    let c = monte_carlo_sivp(&rec, 20, &plan, &z, 10).unwrap();
    assert_ne!(a.samples, c.samples);
}

#[test]
fn maximally_mixed_counts() {
    let mixed = DensityMatrix::maximally_mixed(4);
    let rec = simulate_counts(&mixed, &pauli36_settings(), 3.6e5, 8).unwrap();
    let rho = mle_reconstruct(&rec).unwrap().rho_hat;
    let target = ComplexMatrix::identity(4).scale(0.25);
    assert!(rho.matrix().max_abs_diff(&target) <= 0.02);
}

#[test]
fn error_shrinks_with_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let states: Vec<DensityMatrix> = (0..5).map(|_| haar_random_state_env(4, 2, &mut rng)).collect();
    let mut errors = Vec::new();
    for total in [1e3, 1e4, 1e5] {
        let mut e = 0.0;
        for (k, rho) in states.iter().enumerate() {
            let rec = simulate_counts(rho, &pauli36_settings(), total, 30 + k as u64).unwrap();
            e += trace_distance(&mle_reconstruct(&rec).unwrap().rho_hat, rho);
        }
        errors.push(e / states.len() as f64);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn csv_round_trip() {
    let rec = simulate_counts(&phi_plus(), &pauli36_settings(), 3.6e3, 12).unwrap();
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).unwrap();
    let back = CoincidenceRecord::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.settings, rec.settings);
    assert_eq!(back.counts, rec.counts);
    back.check_pauli36().unwrap();
}

#[test]
fn csv_errors_name_the_line() {
    let text = "alice_setting,bob_setting,counts\nH,H,10\nH,Q,3\n";
    let err = CoincidenceRecord::read_csv(text.as_bytes()).unwrap_err();
    assert!(matches!(err, qcur::QcurError::Parse { line: 3, .. }), "{err}");
}
