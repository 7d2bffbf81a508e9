use hadaflow::hadamard::HadamardBasis;
use hadaflow::reduced::{integrate_with, LogitField, ReducedModel, Rk4};
use hadaflow::ufm::{self, ce_loss, charges, logit_gradient, logit_loss, mode_amplitudes, InitSpec};
use hadaflow::Schedule;

const SPECTRUM: [f64; 3] = [0.02, 0.05, 0.01];

#[test]
fn hadamard_descent_loss_is_non_increasing() {
    let state = ufm::init(&InitSpec::hadamard(SPECTRUM.to_vec()), 4, 2, 6).unwrap().into_state().unwrap();
    let schedule = Schedule::every(5_000, 50).unwrap();
    let records = ufm::descend(state.clone(), 0.05, 5_000, &schedule).unwrap();
    let mut prev = ce_loss(&state).unwrap();
    for r in &records {
        assert!(r.sample.loss <= prev + 1e-12, "loss rose at iteration {}", r.iter);
        prev = r.sample.loss;
    }
    assert!(prev < 0.5 * ce_loss(&state).unwrap());
}

#[test]
fn reduced_energy_matches_full_loss() {
    for (k, n) in [(4, 1), (4, 3), (8, 2)] {
        let spectrum: Vec<f64> = (1..k).map(|i| 0.3 * i as f64).collect();
        let state = ufm::init(&InitSpec::hadamard(spectrum.clone()), k, n, k + 1).unwrap().into_state().unwrap();
        let scale = k as f64 * (n as f64).sqrt();
        let a: Vec<f64> = spectrum.iter().map(|s| s / scale).collect();
        let reduced = (k * n) as f64 * ReducedModel::new(k).unwrap().energy(&a).unwrap();
        let full = ce_loss(&state).unwrap();
        assert!((reduced - full).abs() <= 1e-12 * full, "K={k} n={n}: {reduced} vs {full}");
    }
}

#[test]
fn charges_are_nearly_conserved_at_small_lr() {
    let basis = HadamardBasis::for_classes(4).unwrap();
    let state = ufm::init(&InitSpec::hadamard(SPECTRUM.to_vec()), 4, 1, 4).unwrap().into_state().unwrap();
    let start = charges(&state, &basis).unwrap();
    let records = ufm::descend(state, 1e-3, 20_000, &Schedule::geometric(20_000, 10).unwrap()).unwrap();
    let end = charges(&records.last().unwrap().state, &basis).unwrap();
    assert!(end.relative_drift(&start) < 1e-2);
}

#[test]
fn logit_flow_matches_logit_descent() {
    let (k, n) = (4, 2);
    let lr = 1e-3;
    let steps = 20_000;
    let mut z = ufm::init(&InitSpec::logit_hadamard(SPECTRUM.to_vec()), k, n, k).unwrap().logits();
    let loss0 = logit_loss(&z, k, n).unwrap();
    for _ in 0..steps {
        z += logit_gradient(&z, k, n).unwrap() * lr;
    }
    let basis = HadamardBasis::for_classes(k).unwrap();
    let scale = k as f64 * (n as f64).sqrt();
    let full: Vec<f64> = mode_amplitudes(&z, &basis, n).unwrap().iter().map(|s| s / scale).collect();

    let model = ReducedModel::new(k).unwrap();
    let a0: Vec<f64> = SPECTRUM.iter().map(|s| s / scale).collect();
    let traj = integrate_with(&model, &LogitField, &Rk4, &a0, lr / k as f64, steps, &Schedule::explicit(vec![steps]).unwrap())
        .unwrap();
    let reduced = &traj.last().unwrap().a;
    for (x, y) in full.iter().zip(reduced) {
        // logit descent is linear in the logits: only O(lr) drift separates the two
        assert!((x - y).abs() <= 1e-3 * y.abs(), "{x} vs {y}");
    }
    assert!(logit_loss(&z, k, n).unwrap() < loss0);
}
