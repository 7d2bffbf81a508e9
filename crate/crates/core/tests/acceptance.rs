//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N [PASS|FAIL]` line with the measured quantities.

use hadaflow::hadamard::HadamardBasis;
use hadaflow::harness::{self, ExperimentConfig, Sampling};
use hadaflow::metrics::{basin_check, metric_time_derivatives, nc_distances, Metric};
use hadaflow::reduced::{
    integrate, integrate_with, linearized_solution, CeField, LogitField, Method, ReducedModel, Rk4, SingularState,
};
use hadaflow::softmax::{diagonal_fit_residual, diagonalization_residual, random_orthogonal};
use hadaflow::ufm::{self, InitSpec, UfmState, VarianceConvention};
use hadaflow::Schedule;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} [{verdict}] {name}: {detail}");
    assert!(pass, "criterion {n} failed: {detail}");
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..=hi.log10()))
}

fn random_positive(rng: &mut ChaCha8Rng, dim: usize, norm: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| log_uniform(rng, 1e-3, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x * norm / total).collect()
}

/// Hadamard-spectral descent of criterion 2, started from the spectrum of
/// the default random initialization for seed 0.
fn hadamard_descent() -> (UfmState, Vec<ufm::DescentRecord>) {
    let cfg = ExperimentConfig::default();
    let spectrum = harness::paired_spectrum(&cfg, 0).unwrap();
    let state = ufm::init(&InitSpec::hadamard(spectrum), 4, 1, 4).unwrap().into_state().unwrap();
    let schedule = Schedule::geometric(100_000, 100).unwrap();
    let records = ufm::descend(state.clone(), 0.01, 100_000, &schedule).unwrap();
    (state, records)
}

#[test]
fn criterion_01_softmax_diagonalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut min_share = 1.0f64;
    for k in [2, 4, 8, 16, 32] {
        let basis = HadamardBasis::for_classes(k).unwrap();
        let mut separated = 0;
        for _ in 0..100 {
            let a: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..=3.0)).collect();
            worst = worst.max(diagonalization_residual(&basis, &a).unwrap());
            let q = random_orthogonal(k, &mut rng);
            if diagonal_fit_residual(&q, &a).unwrap() > 1e-3 {
                separated += 1;
            }
        }
        min_share = min_share.min(separated as f64 / 100.0);
    }
    report(
        1,
        "softmax diagonalization",
        worst <= 1e-12 && min_share >= 0.95,
        format!("max Hadamard residual {worst:.2e} (<= 1e-12); random-basis residual > 1e-3 in {:.0}% of draws at worst K (>= 95%)", 100.0 * min_share),
    );
}

#[test]
fn criterion_02_frozen_singular_vectors() {
    let (_, records) = hadamard_descent();
    let worst = records
        .iter()
        .map(|r| r.sample.residual_energy.unwrap())
        .fold(0.0f64, f64::max);
    report(
        2,
        "frozen singular vectors",
        records.len() == 100 && worst <= 1e-10,
        format!("{} logged points, max residual energy {worst:.2e} (<= 1e-10)", records.len()),
    );
}

#[test]
fn criterion_03_full_vs_reduced() {
    let cfg = ExperimentConfig {
        seeds: vec![0],
        ..ExperimentConfig::default()
    };
    let coarse = harness::compare_full_reduced(&cfg).unwrap().max_relative_deviation;
    let fine_cfg = ExperimentConfig {
        lr: cfg.lr / 10.0,
        iterations: cfg.iterations * 10,
        ..cfg
    };
    let fine = harness::compare_full_reduced(&fine_cfg).unwrap().max_relative_deviation;
    report(
        3,
        "full-vs-reduced equivalence",
        coarse <= 1e-3 && fine < coarse,
        format!("deviation {coarse:.3e} at lr=0.01 (<= 1e-3), {fine:.3e} at lr=0.001 (must shrink)"),
    );
}

#[test]
fn criterion_04_lyapunov() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst = f64::NEG_INFINITY;
    for k in [2, 4, 8, 16, 32] {
        let model = ReducedModel::new(k).unwrap();
        for _ in 0..10_000 {
            let norm = log_uniform(&mut rng, 1e-3, 1e2);
            let a = SingularState::new(random_positive(&mut rng, k - 1, norm)).unwrap();
            worst = worst.max(metric_time_derivatives(&model, &a).unwrap().kl_forward);
        }
    }
    let rows = harness::fig1_trajectory().unwrap();
    let worst_step = rows
        .windows(2)
        .map(|w| w[1].kl_forward - w[0].kl_forward)
        .fold(f64::NEG_INFINITY, f64::max);
    report(
        4,
        "Lyapunov",
        worst <= 1e-12 && worst_step <= 1e-10,
        format!("max dKL/dt over 5e4 probes {worst:.2e} (<= 1e-12); max KL increase along the K=8 trajectory {worst_step:.2e} (<= 1e-10)"),
    );
}

#[test]
fn criterion_05_counterexample_probes() {
    let r = harness::check_counterexamples().unwrap();
    let values: Vec<String> = r.probes.iter().map(|p| format!("{}={:.4e}", p.name, p.value)).collect();
    report(5, "counterexample probes", r.all_pass, format!("{}/4 pass; {}", r.passed, values.join(", ")));
}

#[test]
fn criterion_06_k_dependence() {
    let range = (0.1, 10f64.powf(1.5));
    let k4_uniform = harness::scan_monotonicity(4, Metric::M, 10_000, 1, range, Sampling::Uniform).unwrap();
    let k4_biased = harness::scan_monotonicity(4, Metric::M, 10_000, 2, range, Sampling::Biased).unwrap();
    let lr8_uniform = harness::scan_monotonicity(8, Metric::LogRatio, 10_000, 3, range, Sampling::Uniform).unwrap();
    let lr8_biased = harness::scan_monotonicity(8, Metric::LogRatio, 10_000, 4, range, Sampling::Biased).unwrap();
    let m8 = harness::scan_monotonicity(8, Metric::M, 100_000, 5, range, Sampling::Biased).unwrap();
    let m16 = harness::scan_monotonicity(16, Metric::M, 100_000, 6, range, Sampling::Biased).unwrap();
    let pass = k4_uniform.is_empty() && k4_biased.is_empty() && lr8_uniform.is_empty() && lr8_biased.is_empty() && !m8.is_empty() && !m16.is_empty();
    report(
        6,
        "K-dependence of monotonicity",
        pass,
        format!(
            "K=4 M violations {}+{} (0), K=8 log-ratio violations {}+{} (0), biased M violations K=8 {} and K=16 {} (>= 1)",
            k4_uniform.len(),
            k4_biased.len(),
            lr8_uniform.len(),
            lr8_biased.len(),
            m8.len(),
            m16.len()
        ),
    );
}

#[test]
fn criterion_07_basin() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    let ks = [4usize, 8, 16];
    while checked < 1000 {
        let k = ks[checked % ks.len()];
        let dim = k - 1;
        let model = ReducedModel::new(k).unwrap();
        let norm = log_uniform(&mut rng, 1e-2, 1e2);
        let kf = k as f64;
        let threshold = (1.0 / (8.0 * kf * kf)).min(1.0 / (18.0 * kf.powi(3) * norm * norm));
        // zero-sum perturbation of the uniform shares with M = u·threshold
        let mut w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = w.iter().sum::<f64>() / dim as f64;
        w.iter_mut().for_each(|x| *x -= mean);
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let target_m = rng.random_range(0.0..0.99) * threshold;
        let scale = (2.0 * target_m).sqrt() / wn;
        let a: Vec<f64> = w.iter().map(|x| norm * (1.0 / dim as f64 + scale * x)).collect();
        let state = SingularState::new(a).unwrap();
        let (inside, _) = basin_check(&model, &state).unwrap();
        if !inside {
            continue;
        }
        worst = worst.max(metric_time_derivatives(&model, &state).unwrap().m);
        checked += 1;
    }
    report(
        7,
        "basin",
        worst <= 0.0,
        format!("{checked} points inside the basin at norms 1e-2..1e2, max dM/dt {worst:.3e} (<= 0)"),
    );
}

#[test]
fn criterion_08_linearized_regime() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst = 0.0f64;
    let mut points = 0;
    for k in [4, 8, 16] {
        let model = ReducedModel::new(k).unwrap();
        let a0 = random_positive(&mut rng, k - 1, 1e-3);
        let dt = 1e-3;
        let steps = 4000;
        let schedule = Schedule::every(steps, 10).unwrap();
        let traj = integrate_with(&model, &CeField, &Rk4, &a0, dt, steps, &schedule).unwrap();
        for p in traj {
            if p.a.iter().sum::<f64>() > 1e-2 {
                break;
            }
            let lin = linearized_solution(&a0, p.t).unwrap();
            worst = worst.max(lin.iter().zip(&p.a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
            points += 1;
        }
    }
    report(
        8,
        "linearized regime",
        points > 100 && worst <= 1e-6,
        format!("{points} points with ‖a‖₁ <= 1e-2, max deviation from closed form {worst:.2e} (<= 1e-6)"),
    );
}

#[test]
fn criterion_09_logit_only_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut worst = f64::NEG_INFINITY;
    for run in 0..20 {
        let k = if run % 2 == 0 { 4 } else { 8 };
        let model = ReducedModel::new(k).unwrap();
        let norm = log_uniform(&mut rng, 1e-2, 10.0);
        let a0 = random_positive(&mut rng, k - 1, norm);
        let schedule = Schedule::every(20_000, 20).unwrap();
        let traj = integrate_with(&model, &LogitField, &Rk4, &a0, 0.01, 20_000, &schedule).unwrap();
        let ms: Vec<f64> = std::iter::once(a0)
            .chain(traj.into_iter().map(|p| p.a))
            .map(|a| nc_distances(&SingularState::new(a).unwrap()).m)
            .collect();
        worst = worst.max(ms.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max));
    }
    report(
        9,
        "logit-only monotonicity",
        worst <= 1e-10,
        format!("max increase of M between logged points over 20 trajectories {worst:.2e} (<= 1e-10)"),
    );
}

#[test]
fn criterion_10_random_init_bias() {
    let (k, n, eps, lr) = (4, 1, 1e-3, 0.01);
    let (t_star, _) = ufm::zeroth_order_prediction(k, n, eps).unwrap();
    let steps = (t_star / lr).ceil() as usize;
    let schedule = Schedule::explicit(vec![steps]).unwrap();
    let mut means = Vec::new();
    let mut min_at_1024 = f64::INFINITY;
    for d in [16, 64, 256, 1024] {
        let mut total = 0.0;
        for seed in 0..10 {
            let spec = InitSpec::random(eps, seed, VarianceConvention::Theorem8);
            let state = ufm::init(&spec, k, n, d).unwrap().into_state().unwrap();
            let rec = ufm::descend(state, lr, steps, &schedule).unwrap();
            let c = ufm::etf_correlation(&rec[0].state.logits(), k, n).unwrap();
            total += c;
            if d == 1024 {
                min_at_1024 = min_at_1024.min(c);
            }
        }
        means.push(total / 10.0);
    }
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    report(
        10,
        "random-init bias",
        min_at_1024 >= 0.99 && increasing,
        format!(
            "{steps} steps; mean correlation d=16,64,256,1024: {:.4}, {:.4}, {:.4}, {:.4} (increasing); min at d=1024 {min_at_1024:.4} (>= 0.99)",
            means[0], means[1], means[2], means[3]
        ),
    );
}

#[test]
fn criterion_11_conservation_and_structure() {
    let basis = HadamardBasis::for_classes(4).unwrap();
    let (init, records) = hadamard_descent();
    let c0 = ufm::charges(&init, &basis).unwrap();
    let drift = records
        .iter()
        .map(|r| ufm::charges(&r.state, &basis).unwrap().relative_drift(&c0))
        .fold(0.0f64, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut simplex = 0.0f64;
    for k in [4, 8, 16] {
        let model = ReducedModel::new(k).unwrap();
        for method in [Method::Euler, Method::Rk4, Method::Normalized] {
            let a0 = SingularState::new(random_positive(&mut rng, k - 1, 1.0)).unwrap();
            let schedule = Schedule::geometric(5_000, 50).unwrap();
            for r in integrate(&model, &a0, method, 0.01, 50.0, &schedule).unwrap() {
                let hat = r.state.a_hat();
                let margins = model.psi_mul(&hat).unwrap();
                simplex = simplex
                    .max((hat.iter().sum::<f64>() - 1.0).abs())
                    .max((margins.iter().sum::<f64>() - k as f64).abs());
            }
        }
    }
    for r in harness::fig1_trajectory().unwrap() {
        simplex = simplex.max((r.a_hat.iter().sum::<f64>() - 1.0).abs());
    }

    let mut doubling = 0.0f64;
    for k in [4, 8] {
        let model = ReducedModel::new(k).unwrap();
        for _ in 0..20 {
            let a: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.01..3.0)).collect();
            let (big, padded) = model.embed_zero_padded(&a).unwrap();
            let small = model.evaluate(&a).unwrap().b();
            let large = big.evaluate(&padded).unwrap().b();
            for i in 0..k - 1 {
                doubling = doubling.max((large[i] - 2.0 * small[i]).abs() / small[i]);
            }
        }
    }
    report(
        11,
        "conservation and structure",
        drift <= 1e-6 && simplex <= 1e-10 && doubling <= 1e-12,
        format!("charge drift {drift:.2e} (<= 1e-6); simplex identities {simplex:.2e} (<= 1e-10); doubling lemma {doubling:.2e} (<= 1e-12)"),
    );
}

fn fd_gradient(x: &DMatrix<f64>, h: f64, mut f: impl FnMut(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(x.nrows(), x.ncols());
    for idx in 0..x.len() {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[idx] += h;
        dn[idx] -= h;
        g[idx] = (f(&up) - f(&dn)) / (2.0 * h);
    }
    g
}

#[test]
fn criterion_12_gradient_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let (k, n, d) = (4, 2, 6);
    let h = 1e-6;
    let mut worst_ce = 0.0f64;
    let mut worst_logit = 0.0f64;
    for _ in 0..50 {
        let w = DMatrix::from_fn(k, d, |_, _| rng.random_range(-1.0..1.0));
        let hm = DMatrix::from_fn(d, k * n, |_, _| rng.random_range(-1.0..1.0));
        let state = UfmState::new(k, n, d, w.clone(), hm.clone()).unwrap();
        let (dw, dh) = ufm::ce_gradients(&state).unwrap();
        let loss_w = |m: &DMatrix<f64>| -ufm::logit_loss(&(m * &hm), k, n).unwrap();
        let loss_h = |m: &DMatrix<f64>| -ufm::logit_loss(&(&w * m), k, n).unwrap();
        let fw = fd_gradient(&w, h, loss_w);
        let fh = fd_gradient(&hm, h, loss_h);
        worst_ce = worst_ce.max((&fw - &dw).norm() / dw.norm()).max((&fh - &dh).norm() / dh.norm());

        let z = state.logits() * 3.0;
        let g = ufm::logit_gradient(&z, k, n).unwrap();
        let fz = fd_gradient(&z, h, |m| -ufm::logit_loss(m, k, n).unwrap());
        worst_logit = worst_logit.max((&fz - &g).norm() / g.norm());
    }
    report(
        12,
        "gradient correctness",
        worst_ce <= 1e-5 && worst_logit <= 1e-5,
        format!("max relative FD error over 50 states: ce_gradients {worst_ce:.2e}, logit_gradient {worst_logit:.2e} (<= 1e-5)"),
    );
}
