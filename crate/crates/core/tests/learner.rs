mod common;

use common::{gradient_check, instance};
use gridknot::learner::{
    backward, batch_gradient, encode_input, forward, loss, InputEncoding, LearnerParams, Normalization, Optimizer,
    OptimizerKind, ParamLayout,
};
use gridknot::GridDiagram;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradient_matches_finite_differences() {
    for (seed, t) in [(1, 1), (2, 3), (3, 7)] {
        let groups = gradient_check(seed, 4, t, 3);
        assert_eq!(groups.len(), 25);
        for (name, err) in groups {
            assert!(err <= 1e-4, "T={t} {name}: relative error {err:e}");
        }
    }
}

#[test]
fn forget_gate_bias_is_inert_for_one_step() {
    let (params, inputs, label) = instance(5, 4, 1, 3);
    let cache = forward(&params, &inputs).unwrap();
    let mut grad = vec![0.0; params.layout.len()];
    backward(&params, &cache, label, &mut grad).unwrap();
    for g in params.layout.groups() {
        if g.name.ends_with("b_f") || g.name.ends_with("W_f") || g.name.ends_with("U_f") {
            assert!(grad[g.range].iter().all(|&v| v == 0.0), "{}", g.name);
        }
    }
}

#[test]
fn activations_stay_in_range() {
    for seed in 0..20 {
        let (params, inputs, _) = instance(seed, 6, 9, 5);
        let cache = forward(&params, &inputs).unwrap();
        let total: f64 = cache.probs.iter().sum();
        assert!((total - 1.0).abs() <= 1e-9);
        assert!(cache.probs.iter().all(|&p| p >= 0.0));
        for dir in 0..2 {
            for k in 0..9 {
                let s = cache.step(dir, k);
                let d = s.h.len();
                assert!(s.gates[..3 * d].iter().all(|&v| v > 0.0 && v < 1.0));
                assert!(s.gates[3 * d..].iter().all(|&v| v > -1.0 && v < 1.0));
                assert!(s.h.iter().all(|&v| v > -1.0 && v < 1.0));
            }
        }
    }
}

#[test]
fn single_step_sequences_have_no_order() {
    let (params, inputs, _) = instance(9, 4, 1, 3);
    let a = forward(&params, &inputs).unwrap();
    let mut rev = inputs.clone();
    rev.reverse();
    assert_eq!(a.probs, forward(&params, &rev).unwrap().probs);
    let (params, inputs, _) = instance(9, 4, 5, 3);
    let mut rev = inputs.clone();
    rev.reverse();
    assert_ne!(forward(&params, &inputs).unwrap().pooled, forward(&params, &rev).unwrap().pooled);
}

#[test]
fn sgd_step_descends_on_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut params = LearnerParams::<f64>::uniform(ParamLayout::new(5, 2, 4), 0.5, &mut rng);
    let batch: Vec<(Vec<[f64; 2]>, usize)> = (0..16)
        .map(|_| {
            let t = rng.gen_range(2..9);
            let seq = (0..t).map(|_| [rng.gen(), rng.gen()]).collect();
            (seq, rng.gen_range(0..4))
        })
        .collect();
    let before = batch_gradient(&params, &batch).unwrap();
    let mut opt = Optimizer::new(OptimizerKind::Sgd, 1e-3, params.layout.len());
    opt.step(&mut params.data, &before.grad);
    let after = batch_gradient(&params, &batch).unwrap();
    assert!(after.loss < before.loss);
}

#[test]
fn batch_gradient_is_sum_of_sample_gradients() {
    let (params, _, _) = instance(4, 3, 1, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let batch: Vec<(Vec<[f64; 2]>, usize)> = (0..21)
        .map(|_| ((0..4).map(|_| [rng.gen(), rng.gen()]).collect(), rng.gen_range(0..3)))
        .collect();
    let total = batch_gradient(&params, &batch).unwrap();
    let mut manual = vec![0.0; params.layout.len()];
    let mut manual_loss = 0.0;
    for (seq, label) in &batch {
        let cache = forward(&params, seq).unwrap();
        manual_loss += loss(std::slice::from_ref(&cache.probs), &[*label]);
        backward(&params, &cache, *label, &mut manual).unwrap();
    }
    assert!((total.loss - manual_loss).abs() < 1e-10);
    for (a, b) in total.grad.iter().zip(&manual) {
        assert!((a - b).abs() < 1e-10);
    }
    let pair = loss(&[vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5]], &[2, 2]);
    assert!((pair - 2.0 * 0.5f64.ln().abs()).abs() < 1e-15);
}

#[test]
fn encodings() {
    let t = GridDiagram::trivial();
    assert_eq!(
        encode_input::<f64>(&t, InputEncoding::RowPairs, Normalization::DivideByN),
        vec![[0.5, 1.0], [1.0, 0.5]]
    );
    assert_eq!(
        encode_input::<f64>(&t, InputEncoding::RowPairs, Normalization::Raw),
        vec![[1.0, 2.0], [2.0, 1.0]]
    );
    let example9 = GridDiagram::new(vec![3, 8, 9, 1, 6, 2, 4, 5, 7], vec![1, 2, 6, 5, 3, 4, 7, 8, 9]).unwrap();
    let e = encode_input::<f64>(&example9, InputEncoding::RowPairs, Normalization::DivideByN);
    assert_eq!(e.len(), 9);
    assert_eq!(e[0], [3.0 / 9.0, 1.0 / 9.0]);
    assert_eq!(encode_input::<f32>(&example9, InputEncoding::Vertices, Normalization::Raw).len(), 18);
}

#[test]
fn f32_and_f64_agree() {
    let (p64, inputs, _) = instance(30, 8, 6, 5);
    let p32 = LearnerParams::<f32> {
        layout: p64.layout,
        data: p64.data.iter().map(|&v| v as f32).collect(),
    };
    let in32: Vec<[f32; 2]> = inputs.iter().map(|&[a, b]| [a as f32, b as f32]).collect();
    let a = forward(&p64, &inputs).unwrap().probs;
    let b = forward(&p32, &in32).unwrap().probs;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - *y as f64).abs() < 1e-5);
    }
}
