#![allow(dead_code)]

use gridknot::learner::{backward, forward, loss, LearnerParams, ParamLayout};
use gridknot::GridDiagram;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EXAMPLE9_X: [usize; 9] = [3, 8, 9, 1, 6, 2, 4, 5, 7];
pub const EXAMPLE9_O: [usize; 9] = [1, 2, 6, 5, 3, 4, 7, 8, 9];

pub fn example9() -> GridDiagram {
    GridDiagram::new(EXAMPLE9_X.to_vec(), EXAMPLE9_O.to_vec()).unwrap()
}

/// Uniform random knot diagram of size `n`: a random `x` and a random
/// n-cycle `s`, with `o[i] = x[s(i)]`.
pub fn random_diagram<R: Rng>(n: usize, rng: &mut R) -> GridDiagram {
    let mut x: Vec<usize> = (1..=n).collect();
    x.shuffle(rng);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut cycle = vec![0; n];
    for k in 0..n {
        cycle[order[k]] = order[(k + 1) % n];
    }
    let o = (0..n).map(|i| x[cycle[i]]).collect();
    GridDiagram::new(x, o).unwrap()
}

/// Dense picture: `cells[r][c]` is `Some('X')`, `Some('O')` or `None`.
pub fn cells(d: &GridDiagram) -> Vec<Vec<Option<char>>> {
    let n = d.n();
    let mut g = vec![vec![None; n]; n];
    for r in 0..n {
        g[r][d.x()[r] - 1] = Some('X');
        g[r][d.o()[r] - 1] = Some('O');
    }
    g
}

pub fn instance(seed: u64, d: usize, t: usize, c: usize) -> (LearnerParams<f64>, Vec<[f64; 2]>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = LearnerParams::uniform(ParamLayout::new(d, 2, c), 0.8, &mut rng);
    let inputs = (0..t).map(|_| [rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0)]).collect();
    (params, inputs, rng.gen_range(0..c))
}

pub fn sample_loss(params: &LearnerParams<f64>, inputs: &[[f64; 2]], label: usize) -> f64 {
    loss(&[forward(params, inputs).unwrap().probs], &[label])
}

/// Worst relative error of the analytic gradient against central
/// differences, per named parameter group.
pub fn gradient_check(seed: u64, d: usize, t: usize, c: usize) -> Vec<(String, f64)> {
    let (params, inputs, label) = instance(seed, d, t, c);
    let cache = forward(&params, &inputs).unwrap();
    let mut grad = vec![0.0; params.layout.len()];
    backward(&params, &cache, label, &mut grad).unwrap();
    let h = 1e-6;
    params
        .layout
        .groups()
        .into_iter()
        .map(|g| {
            let mut worst: f64 = 0.0;
            for i in g.range.clone() {
                let mut p = params.clone();
                p.data[i] += h;
                let up = sample_loss(&p, &inputs, label);
                p.data[i] -= 2.0 * h;
                let down = sample_loss(&p, &inputs, label);
                let numeric = (up - down) / (2.0 * h);
                let scale = grad[i].abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((grad[i] - numeric).abs() / scale);
            }
            (g.name, worst)
        })
        .collect()
}
