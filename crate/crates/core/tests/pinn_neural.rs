use gridpinn_core::grid::{build_ybus, builtin_case, AdmittanceMatrix};
use gridpinn_core::neural::{glorot_init, train, MlpModel, MseObjective, Objective, TrainConfig};
use gridpinn_core::pinn::{
    loss_data, loss_physics, to_complex_voltage, total_loss, CompositeLoss, ConstantEntry, ConstantsSpec, LossWeights,
    PhysicsContext, Quantity,
};
use gridpinn_core::powerflow::StateVector;
use gridpinn_core::scenario::{NormMeta, NormalizedData};
use gridpinn_core::Complex64;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_bus_y() -> AdmittanceMatrix {
    let c = Complex64::new;
    AdmittanceMatrix::from_dense(2, vec![c(0.0, -10.0), c(0.0, 10.0), c(0.0, 10.0), c(0.0, -10.0)])
}

/// Normalisation with random but well-conditioned ranges.
fn random_meta(n: usize, rng: &mut ChaCha8Rng) -> NormMeta {
    let w = 2 * n;
    NormMeta {
        n_buses: n,
        input_mean: vec![0.0; w],
        input_std: vec![1.0; w],
        input_min: vec![-1.0; w],
        input_max: vec![1.0; w],
        input_degenerate: vec![false; w],
        target_mid: (0..w).map(|j| if j < n { rng.gen_range(-0.05..0.05) } else { rng.gen_range(-0.3..0.0) }).collect(),
        target_half: (0..w).map(|_| rng.gen_range(0.02..0.2)).collect(),
        target_degenerate: vec![false; w],
    }
}

fn constants(n: usize) -> ConstantsSpec {
    ConstantsSpec {
        entries: vec![
            ConstantEntry { bus: 1, quantity: Quantity::Vm, value: 1.06 },
            ConstantEntry { bus: 1, quantity: Quantity::Va, value: 0.0 },
            ConstantEntry { bus: n, quantity: Quantity::Vm, value: 1.01 },
        ],
    }
}

fn weight_set() -> Vec<LossWeights> {
    vec![
        LossWeights::new(1.0, 0.0, 0.0).unwrap(),
        LossWeights::new(0.0, 1.0, 0.0).unwrap(),
        LossWeights::new(0.0, 0.0, 1.0).unwrap(),
        LossWeights::new(0.2, 0.5, 0.3).unwrap(),
    ]
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn loss_of(model: &MlpModel, x: &Array2<f64>, t: &Array2<f64>, obj: &dyn Objective) -> f64 {
    let out = model.forward(x.view()).unwrap();
    obj.evaluate(out.view(), t.view()).unwrap().0.total
}

/// Central-difference check of backward ∘ objective on all parameters.
fn param_gradient_error(model: &MlpModel, x: &Array2<f64>, t: &Array2<f64>, obj: &dyn Objective) -> f64 {
    let cache = model.forward_cached(x.view()).unwrap();
    let (_, g) = obj.evaluate(cache.output().view(), t.view()).unwrap();
    let analytic = model.backward(&cache, g.view()).unwrap().flatten();
    let h = 1e-5;
    let base = model.params();
    let mut probe = model.clone();
    let numeric: Vec<f64> = (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p);
            let up = loss_of(&probe, x, t, obj);
            p[i] -= 2.0 * h;
            probe.set_params(&p);
            let down = loss_of(&probe, x, t, obj);
            (up - down) / (2.0 * h)
        })
        .collect();
    rel_err(&analytic, &numeric)
}

#[test]
fn composite_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let y14 = build_ybus(&builtin_case("ieee14").unwrap()).unwrap();
    let setups: Vec<(AdmittanceMatrix, Vec<usize>)> = vec![(two_bus_y(), vec![4, 8, 4]), (y14, vec![8, 16, 28])];
    let mut checked = 0;
    for (y, dims) in &setups {
        let n = y.dim();
        for conjugate in [true, false] {
            for w in weight_set() {
                for _ in 0..3 {
                    let meta = random_meta(n, &mut rng);
                    let ctx = PhysicsContext::new(y, meta, conjugate).unwrap();
                    let obj = CompositeLoss::new(w, ctx, constants(n)).unwrap();
                    let model = glorot_init(dims, rng.gen()).unwrap();
                    let x = random_matrix(5, dims[0], &mut rng);
                    let t = random_matrix(5, 2 * n, &mut rng);
                    let err = param_gradient_error(&model, &x, &t, &obj);
                    assert!(err < 1e-5, "dims {dims:?} weights {w:?}: {err}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked >= 20);
}

#[test]
fn physics_gradient_matches_direct_formula() {
    // p-term gradient on the outputs: (2/N)·Aᴴ·A·e chained through V = vm·e^{j va}
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y = two_bus_y();
    let meta = random_meta(2, &mut rng);
    let ctx = PhysicsContext::new(&y, meta.clone(), true).unwrap();
    let obj = CompositeLoss::new(LossWeights::new(0.0, 1.0, 0.0).unwrap(), ctx, ConstantsSpec::default()).unwrap();
    let out = random_matrix(1, 4, &mut rng);
    let tgt = random_matrix(1, 4, &mut rng);
    let (_, grad) = obj.evaluate(out.view(), tgt.view()).unwrap();

    let est = meta.denormalize_targets(&out.row(0).to_vec());
    let tru = meta.denormalize_targets(&tgt.row(0).to_vec());
    let ve = to_complex_voltage(&est.vm, &est.va);
    let e: Vec<Complex64> = ve.iter().zip(to_complex_voltage(&tru.vm, &tru.va)).map(|(a, b)| a - b).collect();
    let a = |i: usize, j: usize| y.get(i, j).conj();
    let ae: Vec<Complex64> = (0..2).map(|i| (0..2).map(|j| a(i, j) * e[j]).sum()).collect();
    let g: Vec<Complex64> = (0..2).map(|j| (0..2).map(|i| a(i, j).conj() * ae[i]).sum::<Complex64>() * (2.0 / 2.0)).collect();
    for i in 0..2 {
        let dvm = (g[i].conj() * Complex64::from_polar(1.0, est.va[i])).re * meta.target_half[i];
        let dva = (g[i].conj() * Complex64::i() * ve[i]).re * meta.target_half[2 + i];
        assert!((grad[[0, i]] - dvm).abs() < 1e-12 * (1.0 + dvm.abs()));
        assert!((grad[[0, 2 + i]] - dva).abs() < 1e-12 * (1.0 + dva.abs()));
    }
}

#[test]
fn data_only_weights_give_complex_voltage_mse() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y = build_ybus(&builtin_case("ieee14").unwrap()).unwrap();
    let meta = random_meta(14, &mut rng);
    let ctx = PhysicsContext::new(&y, meta.clone(), true).unwrap();
    let obj = CompositeLoss::new(LossWeights::DATA_ONLY, ctx, constants(14)).unwrap();
    let out = random_matrix(6, 28, &mut rng);
    let tgt = random_matrix(6, 28, &mut rng);
    let (loss, _) = obj.evaluate(out.view(), tgt.view()).unwrap();
    assert_eq!(loss.total, loss.d);
    let mut mse = 0.0;
    for (o, t) in out.rows().into_iter().zip(tgt.rows()) {
        let e = meta.denormalize_targets(&o.to_vec());
        let r = meta.denormalize_targets(&t.to_vec());
        mse += loss_data(&to_complex_voltage(&e.vm, &e.va), &to_complex_voltage(&r.vm, &r.va)).unwrap();
    }
    mse /= 6.0;
    assert!((loss.total - mse).abs() <= 4.0 * f64::EPSILON * mse);
}

#[test]
fn zero_loss_and_zero_gradient_at_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let case = builtin_case("ieee14").unwrap();
    let y = build_ybus(&case).unwrap();
    let sol = gridpinn_core::powerflow::solve_nr(&case, 1e-12, 20).unwrap();
    let meta = random_meta(14, &mut rng);
    let spec = ConstantsSpec::from_case(&case, true);
    let ctx = PhysicsContext::new(&y, meta.clone(), true).unwrap();
    let l = total_loss(&[sol.state.clone()], &[sol.state.clone()], &LossWeights::new(0.3, 0.3, 0.4).unwrap(), &ctx, &spec)
        .unwrap();
    assert_eq!((l.d, l.p), (0.0, 0.0));
    assert!(l.c < 1e-24);
    let obj = CompositeLoss::new(LossWeights::DATA_ONLY, ctx, spec).unwrap();
    let row = Array2::from_shape_vec((1, 28), meta.normalize_targets(&sol.state)).unwrap();
    let model = glorot_init(&[28, 28], 1).unwrap();
    let x = random_matrix(1, 28, &mut rng);
    let out = model.forward(x.view()).unwrap();
    let cache = model.forward_cached(x.view()).unwrap();
    let (_, g) = obj.evaluate(out.view(), out.view()).unwrap();
    assert!(g.iter().all(|v| *v == 0.0));
    assert!(model.backward(&cache, g.view()).unwrap().flatten().iter().all(|v| *v == 0.0));
    let (l0, _) = obj.evaluate(row.view(), row.view()).unwrap();
    assert_eq!(l0.total, 0.0);
}

#[test]
fn total_is_affine_in_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let y = build_ybus(&builtin_case("ieee14").unwrap()).unwrap();
    let meta = random_meta(14, &mut rng);
    let out = random_matrix(4, 28, &mut rng);
    let tgt = random_matrix(4, 28, &mut rng);
    for _ in 0..20 {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen::<f64>() * (1.0 - a);
        let w = LossWeights::new(a, b, 1.0 - a - b).unwrap();
        let ctx = PhysicsContext::new(&y, meta.clone(), true).unwrap();
        let (l, _) = CompositeLoss::new(w, ctx, constants(14)).unwrap().evaluate(out.view(), tgt.view()).unwrap();
        assert_eq!(l.total, w.lambda_d * l.d + w.lambda_p * l.p + w.lambda_c * l.c);
    }
}

/// Largest singular value of `A` by power iteration on `AᴴA`.
fn spectral_norm(a: &AdmittanceMatrix) -> f64 {
    let n = a.dim();
    let ah = a.conj().transpose();
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = ah.mul_vec(&a.mul_vec(&v));
        let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda.sqrt()
}

#[test]
fn physics_term_bounded_by_operator_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let y = build_ybus(&builtin_case("ieee14").unwrap()).unwrap();
    let op = y.conj();
    let sigma = spectral_norm(&op);
    for _ in 0..50 {
        let vm: Vec<f64> = (0..14).map(|_| rng.gen_range(0.9..1.1)).collect();
        let va: Vec<f64> = (0..14).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let vm2: Vec<f64> = vm.iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
        let va2: Vec<f64> = va.iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
        let (a, b) = (to_complex_voltage(&vm, &va), to_complex_voltage(&vm2, &va2));
        let d = loss_data(&a, &b).unwrap();
        let p = loss_physics(&a, &b, &op).unwrap();
        assert!(p <= sigma * sigma * d * (1.0 + 1e-9), "{p} > {}", sigma * sigma * d);
    }
}

#[test]
fn data_term_ignores_common_phase() {
    let a = to_complex_voltage(&[1.0, 1.02], &[0.1, -0.2]);
    let b = to_complex_voltage(&[0.98, 1.0], &[0.05, -0.1]);
    let rot = Complex64::from_polar(1.0, 0.7);
    let ar: Vec<Complex64> = a.iter().map(|v| v * rot).collect();
    let br: Vec<Complex64> = b.iter().map(|v| v * rot).collect();
    assert!((loss_data(&a, &b).unwrap() - loss_data(&ar, &br).unwrap()).abs() < 1e-15);
}

fn linear_toy(n: usize, seed: u64) -> NormalizedData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = random_matrix(n, 3, &mut rng);
    let w = ndarray::array![[0.5, -0.2], [0.1, 0.3], [-0.4, 0.2]];
    let targets = inputs.dot(&w);
    NormalizedData { inputs, targets }
}

#[test]
fn training_loss_is_monotone_on_linear_toy() {
    let data = linear_toy(64, 1);
    let cfg = TrainConfig { learning_rate: 1e-3, batch_size: 64, max_epochs: 100, patience: 100, seed: 3 };
    let (_, report) = train(glorot_init(&[3, 2], 4).unwrap(), &data, &data, &cfg, &MseObjective).unwrap();
    assert_eq!(report.epochs_run(), 100);
    for w in report.epoch_losses.windows(2) {
        assert!(w[1].total <= w[0].total + 1e-9, "{} -> {}", w[0].total, w[1].total);
    }
}

#[test]
fn training_is_deterministic_and_returns_best_snapshot() {
    let data = linear_toy(100, 2);
    let val = linear_toy(30, 3);
    let cfg = TrainConfig { learning_rate: 5e-2, batch_size: 8, max_epochs: 60, patience: 10, seed: 1 };
    let run = || train(glorot_init(&[3, 16, 16, 2], 7).unwrap(), &data, &val, &cfg, &MseObjective).unwrap();
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(m1, m2);
    assert_eq!(r1.epoch_losses, r2.epoch_losses);
    assert_eq!(r1.epoch_val_mae, r2.epoch_val_mae);
    assert_eq!(r1.best_epoch, r2.best_epoch);
    let best = r1.best_val_mae();
    assert!(r1.epoch_val_mae.iter().all(|v| *v >= best));
    assert!(best <= *r1.epoch_val_mae.last().unwrap());
    let out = m1.forward(val.inputs.view()).unwrap();
    let mae = (&out - &val.targets).mapv(f64::abs).mean().unwrap();
    assert!((mae - best).abs() < 1e-15);
    assert!(r1.wall_time_s > 0.0 && r1.inference_time_s > 0.0);
}

#[test]
fn empty_training_set_is_rejected() {
    let empty = NormalizedData { inputs: Array2::zeros((0, 3)), targets: Array2::zeros((0, 2)) };
    let val = linear_toy(4, 0);
    let cfg = TrainConfig::default();
    assert!(train(glorot_init(&[3, 2], 0).unwrap(), &empty, &val, &cfg, &MseObjective).is_err());
}

#[test]
fn random_model_outputs_are_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = glorot_init(&[28, 64, 64, 28], 2).unwrap();
    let x = random_matrix(10, 28, &mut rng);
    assert!(m.forward(x.view()).unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn state_round_trip_through_meta() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let meta = random_meta(3, &mut rng);
    let s = StateVector { vm: vec![1.0, 0.98, 1.03], va: vec![0.0, -0.1, -0.2] };
    let back = meta.denormalize_targets(&meta.normalize_targets(&s));
    for (a, b) in back.vm.iter().chain(&back.va).zip(s.vm.iter().chain(&s.va)) {
        assert!((a - b).abs() < 1e-12);
    }
}
