mod common;

use common::{central_diff, max_rel_err, rng, uniform};
use laml::embedding::{training_loss_and_grad, EmbeddingParams, GoldEmbeddingSet};
use laml::meta_learn::{AcousticModel, MetaObjective, TaskBatch};
use laml::nn::Mlp;

fn output_jacobian_check(mlp: Mlp, seed: u64, tol: f64) {
    let mut r = rng(seed);
    let params = mlp.init(&mut r);
    let x = uniform(&mut r, mlp.input, 1.0);
    let trace = mlp.forward(&params, &x);
    for k in 0..mlp.output {
        let mut e = vec![0.0; mlp.output];
        e[k] = 1.0;
        let mut analytic = vec![0.0; params.len()];
        mlp.backward(&params, &x, &trace, &e, &mut analytic);
        let numeric = central_diff(&params, 1e-5, |p| mlp.forward(p, &x).output[k]);
        let err = max_rel_err(&analytic, &numeric, 1e-6);
        assert!(err < tol, "output {k}: relative error {err:e}");
    }
}

#[test]
fn embedding_jacobian_small_instance() {
    for seed in 0..5 {
        output_jacobian_check(Mlp::tanh(4, 3, 2), seed, 1e-6);
        output_jacobian_check(Mlp::linear(4, 2), seed, 1e-6);
    }
}

#[test]
fn acoustic_jacobian_full_input() {
    output_jacobian_check(Mlp::tanh(66, 3, 2), 11, 1e-6);
}

#[test]
fn embedding_training_loss_gradient() {
    for seed in 0..5 {
        let mut r = rng(100 + seed);
        let mlp = Mlp::tanh(4, 3, 2);
        let params = EmbeddingParams::from_weights(mlp, uniform(&mut r, mlp.num_params(), 1.0)).unwrap();
        let labels: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
        let inputs: Vec<Vec<f64>> = (0..6).map(|_| uniform(&mut r, 4, 1.0)).collect();
        let gold: Vec<Vec<f64>> = (0..6).map(|_| uniform(&mut r, 2, 2.0)).collect();
        let set = GoldEmbeddingSet::new(labels, inputs, gold, "toy").unwrap();
        let idx: Vec<usize> = (0..6).collect();
        let (_, analytic) = training_loss_and_grad(&params, &set, &idx).unwrap();
        let numeric = central_diff(&params.weights, 1e-6, |w| {
            let p = EmbeddingParams::from_weights(mlp, w.to_vec()).unwrap();
            training_loss_and_grad(&p, &set, &idx).unwrap().0
        });
        let err = max_rel_err(&analytic, &numeric, 1e-6);
        assert!(err < 1e-5, "seed {seed}: relative error {err:e}");
    }
}

fn acoustic_instance(seed: u64, input: usize, hidden: usize, output: usize) -> (AcousticModel, Vec<f64>, TaskBatch) {
    let mut r = rng(seed);
    let model = AcousticModel::new(input, hidden, output);
    let params = uniform(&mut r, model.num_params(), 0.8);
    let inputs = (0..5).map(|_| uniform(&mut r, input, 1.0)).collect();
    let targets = (0..5).map(|_| uniform(&mut r, output, 1.0)).collect();
    (model, params, TaskBatch { task: 0, inputs, targets })
}

#[test]
fn acoustic_loss_gradient() {
    for seed in 0..5 {
        let (model, params, batch) = acoustic_instance(200 + seed, 66, 3, 2);
        let (_, analytic) = model.gradient(&params, &batch).unwrap();
        let numeric = central_diff(&params, 1e-5, |p| model.loss(p, &batch).unwrap());
        let err = max_rel_err(&analytic, &numeric, 1e-6);
        assert!(err < 1e-5, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn hessian_vector_product_matches_gradient_differences() {
    for seed in 0..5 {
        let (model, params, batch) = acoustic_instance(300 + seed, 5, 4, 3);
        let v = uniform(&mut rng(400 + seed), params.len(), 1.0);
        let hv = model.hessian_vector(&params, &batch, &v).unwrap();
        let h = 1e-5;
        let shifted = |s: f64| -> Vec<f64> {
            let p: Vec<f64> = params.iter().zip(&v).map(|(p, d)| p + s * d).collect();
            model.gradient(&p, &batch).unwrap().1
        };
        let (up, down) = (shifted(h), shifted(-h));
        let numeric: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err = max_rel_err(&hv, &numeric, 1e-6);
        assert!(err < 1e-5, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn summed_gradient_is_sum_of_task_gradients() {
    let (model, params, a) = acoustic_instance(500, 6, 4, 2);
    let (_, _, b) = acoustic_instance(501, 6, 4, 2);
    let (_, ga) = model.gradient(&params, &a).unwrap();
    let (_, gb) = model.gradient(&params, &b).unwrap();
    let joint = |p: &[f64]| model.loss(p, &a).unwrap() + model.loss(p, &b).unwrap();
    let numeric = central_diff(&params, 1e-5, joint);
    let summed: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x + y).collect();
    assert!(max_rel_err(&summed, &numeric, 1e-6) < 1e-5);
}
