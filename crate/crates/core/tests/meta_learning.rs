mod common;

use common::{central_diff, max_rel_err, rng, uniform};
use laml::artic::FeatureTable;
use laml::meta_learn::toy::{LinearToy, Quadratic};
use laml::meta_learn::{
    laml_step, maml_step, meta_gradient, meta_train, random_inventory, AcousticModel, MamlMode, MetaModelState,
    MetaObjective, MetaTrainConfig, Procedure, TaskBatch, TaskFamily,
};
use laml::optim::{Adam, AdamConfig};
use laml::Error;

/// Summed post-adaptation loss, by running the inner loop explicitly.
fn adapted_loss<O: MetaObjective>(obj: &O, params: &[f64], batches: &[O::Batch], d: usize, lr: f64) -> f64 {
    batches
        .iter()
        .map(|b| {
            let mut theta = params.to_vec();
            for _ in 0..d {
                let (_, g) = obj.gradient(&theta, b).unwrap();
                for (t, gv) in theta.iter_mut().zip(&g) {
                    *t -= lr * gv;
                }
            }
            obj.loss(&theta, b).unwrap()
        })
        .sum()
}

#[test]
fn quadratic_closed_form() {
    let a = vec![vec![1.0], vec![2.0]];
    let (_, g) = meta_gradient(&Quadratic, &[0.0], &a, &a, 1, 0.25, MamlMode::SecondOrder).unwrap();
    assert!((g[0] + 1.5).abs() < 1e-10);
    let numeric = central_diff(&[0.0], 1e-5, |p| adapted_loss(&Quadratic, p, &a, 1, 0.25));
    assert!((numeric[0] + 1.5).abs() < 1e-6);

    let sym = vec![vec![1.0], vec![-1.0]];
    for lr in [0.05, 0.2, 0.45] {
        let (_, g) = meta_gradient(&Quadratic, &[0.0], &sym, &sym, 1, lr, MamlMode::SecondOrder).unwrap();
        assert_eq!(g[0], 0.0);
    }
}

#[test]
fn quadratic_closed_form_deeper_inner_loops() {
    let mut r = rng(1);
    for d in 1..=3 {
        for _ in 0..10 {
            let theta = uniform(&mut r, 3, 2.0);
            let centres: Vec<Vec<f64>> = (0..3).map(|_| uniform(&mut r, 3, 2.0)).collect();
            let lr = 0.1 + 0.3 * uniform(&mut r, 1, 1.0)[0].abs();
            let (_, g) = meta_gradient(&Quadratic, &theta, &centres, &centres, d, lr, MamlMode::SecondOrder).unwrap();
            let factor = 2.0 * (1.0 - 2.0 * lr).powi(2 * d as i32);
            for j in 0..3 {
                let expected: f64 = centres.iter().map(|a| factor * (theta[j] - a[j])).sum();
                assert!((g[j] - expected).abs() < 1e-10, "d={d}: {} vs {expected}", g[j]);
            }
        }
    }
}

fn tiny_tasks(seed: u64) -> (AcousticModel, Vec<f64>, Vec<TaskBatch>) {
    let mut r = rng(seed);
    let model = AcousticModel::new(3, 3, 2);
    assert_eq!(model.num_params(), 20);
    let params = uniform(&mut r, 20, 0.8);
    let batches = (0..3)
        .map(|task| TaskBatch {
            task,
            inputs: (0..4).map(|_| uniform(&mut r, 3, 1.0)).collect(),
            targets: (0..4).map(|_| uniform(&mut r, 2, 1.0)).collect(),
        })
        .collect();
    (model, params, batches)
}

#[test]
fn second_order_matches_finite_differences() {
    for d in 1..=3 {
        for seed in 0..4 {
            let (model, params, batches) = tiny_tasks(10 * d as u64 + seed);
            let lr = 0.3;
            let (loss, g) = meta_gradient(&model, &params, &batches, &batches, d, lr, MamlMode::SecondOrder).unwrap();
            assert!((loss - adapted_loss(&model, &params, &batches, d, lr)).abs() < 1e-12);
            let numeric = central_diff(&params, 1e-5, |p| adapted_loss(&model, p, &batches, d, lr));
            let err = max_rel_err(&g, &numeric, 1e-6);
            assert!(err < 1e-4, "d={d} seed={seed}: {err:e}");
        }
    }
}

#[test]
fn first_order_differs_from_second_order_on_curved_losses() {
    let (model, params, batches) = tiny_tasks(99);
    let (_, so) = meta_gradient(&model, &params, &batches, &batches, 2, 0.3, MamlMode::SecondOrder).unwrap();
    let (_, fo) = meta_gradient(&model, &params, &batches, &batches, 2, 0.3, MamlMode::FirstOrder).unwrap();
    assert!(max_rel_err(&so, &fo, 1e-6) > 1e-3);
}

#[test]
fn modes_coincide_on_linear_losses() {
    let mut r = rng(5);
    for d in 0..4 {
        let theta = uniform(&mut r, 4, 1.0);
        let coeffs: Vec<Vec<f64>> = (0..3).map(|_| uniform(&mut r, 4, 1.0)).collect();
        let so = meta_gradient(&LinearToy, &theta, &coeffs, &coeffs, d, 0.1, MamlMode::SecondOrder).unwrap();
        let fo = meta_gradient(&LinearToy, &theta, &coeffs, &coeffs, d, 0.1, MamlMode::FirstOrder).unwrap();
        assert_eq!(so, fo);
    }
}

fn random_state(model: &AcousticModel, seed: u64) -> MetaModelState {
    let mut r = rng(seed);
    let params = uniform(&mut r, model.num_params(), 0.8);
    let mut state = MetaModelState::with_adam(params, AdamConfig::with_lr(0.01));
    // warm the moments up so the comparison is not only about step 1
    let (_, _, batches) = tiny_tasks(seed + 1000);
    for _ in 0..(seed % 4) {
        laml_step(model, &mut state, &batches).unwrap();
    }
    state
}

#[test]
fn zero_inner_steps_equal_laml_bitwise() {
    for seed in 0..50 {
        let (model, _, batches) = tiny_tasks(seed);
        let base = random_state(&model, seed);
        let mut laml = base.clone();
        let l0 = laml_step(&model, &mut laml, &batches).unwrap();
        for mode in [MamlMode::SecondOrder, MamlMode::FirstOrder] {
            let mut maml = base.clone();
            let l1 = maml_step(&model, &mut maml, &batches, &batches, 0, 0.1, mode).unwrap();
            assert_eq!(l0.to_bits(), l1.to_bits());
            assert_eq!(maml, laml);
        }
    }
}

#[test]
fn laml_is_one_adam_step_on_the_summed_loss() {
    for seed in 0..50 {
        let (model, _, batches) = tiny_tasks(seed);
        let mut state = random_state(&model, seed);
        let mut params = state.params.clone();
        let mut adam = match &state.optimizer {
            laml::meta_learn::OuterOptimizer::Adam(a) => a.clone(),
            other => panic!("{other:?}"),
        };
        let mut grad = vec![0.0; params.len()];
        for b in &batches {
            let (_, g) = model.gradient(&params, b).unwrap();
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += v;
            }
        }
        adam.step(&mut params, &grad).unwrap();
        laml_step(&model, &mut state, &batches).unwrap();
        assert_eq!(state.params, params);
    }
}

#[test]
fn single_task_laml_is_plain_supervised_adam() {
    let (model, params, batches) = tiny_tasks(3);
    let mut state = MetaModelState::with_adam(params.clone(), AdamConfig::default());
    laml_step(&model, &mut state, &batches[..1]).unwrap();
    let mut direct = params;
    let mut adam = Adam::new(AdamConfig::default(), direct.len());
    let (_, grad) = model.gradient(&direct, &batches[0]).unwrap();
    adam.step(&mut direct, &grad).unwrap();
    assert_eq!(state.params, direct);
}

#[test]
fn non_finite_gradient_names_the_task() {
    let (model, params, mut batches) = tiny_tasks(4);
    batches[2].targets[0][0] = f64::NAN;
    let mut state = MetaModelState::with_adam(params, AdamConfig::default());
    let before = state.clone();
    match maml_step(&model, &mut state, &batches, &batches, 2, 0.1, MamlMode::SecondOrder) {
        Err(Error::NonFiniteGradient { task: Some(2), inner_step: Some(0) }) => {}
        other => panic!("{other:?}"),
    }
    assert_eq!(state, before);
}

#[test]
fn two_task_laml_run_converges() {
    let table = FeatureTable::bundled();
    let family = TaskFamily::new(8, 0.05, 3);
    let mut r = rng(8);
    let pools: Vec<_> = (0..2)
        .map(|i| family.task(i, random_inventory(&table, 30, &[], &mut r), 0.0, 40 + i as u64).pool(&table).unwrap())
        .collect();
    let config =
        MetaTrainConfig { procedure: Procedure::Laml, seed: 2, outer: AdamConfig::with_lr(3e-3), ..Default::default() };
    let run = meta_train(&config, &pools, 2000).unwrap();
    let (first, last) = (run.losses[0], *run.losses.last().unwrap());
    assert!(last < 0.01 * first, "{first} -> {last}");
    assert_eq!(meta_train(&config, &pools, 2000).unwrap().losses, run.losses);
}
