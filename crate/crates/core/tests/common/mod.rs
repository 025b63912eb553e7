//! Test-only oracles shared by the integration suites. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

use birads_ssdl::tensor::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::from_f64(shape, &values).unwrap()
}

/// Values whose magnitude is at least `gap`, keeping finite differences away
/// from the kink of piecewise-linear ops.
pub fn away_from_zero(rng: &mut impl Rng, shape: &[usize], gap: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.gen_range(gap..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_f64(shape, &values).unwrap()
}

/// Distinct values spaced by at least `gap`, in random order.
pub fn distinct_values(rng: &mut impl Rng, shape: &[usize], gap: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut values: Vec<f64> = (0..n).map(|i| i as f64 * gap).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
    Tensor::from_f64(shape, &values).unwrap()
}

/// Direct-sum cross-correlation with zero same-padding for one `[C,H,W]` sample.
pub fn conv_oracle(
    x: &[f64],
    (ci, h, w): (usize, usize, usize),
    k: &[f64],
    (co, kh, kw): (usize, usize, usize),
    b: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; co * h * w];
    let (ph, pw) = (kh as isize / 2, kw as isize / 2);
    for o in 0..co {
        for i in 0..h {
            for j in 0..w {
                let mut acc = b[o];
                for c in 0..ci {
                    for u in 0..kh {
                        for v in 0..kw {
                            let si = i as isize + u as isize - ph;
                            let sj = j as isize + v as isize - pw;
                            if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                                continue;
                            }
                            acc += k[((o * ci + c) * kh + u) * kw + v]
                                * x[(c * h + si as usize) * w + sj as usize];
                        }
                    }
                }
                out[(o * h + i) * w + j] = acc;
            }
        }
    }
    out
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Compares the tape gradient of a scalar-valued graph against central
/// finite differences for every element of every leaf.
///
/// `build` receives the leaves (in `leaves` order) already placed on a fresh
/// tape and must return a scalar loss.
pub fn grad_check(
    leaves: &[Tensor<f64>],
    h: f64,
    build: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
) -> GradCheck {
    let eval = |values: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.variable(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        tape.scalar(loss)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|t| tape.variable(t.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();

    let mut max_rel_err: f64 = 0.0;
    let mut checked = 0;
    for (li, leaf) in leaves.iter().enumerate() {
        let analytic = grads
            .wrt(vars[li])
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; leaf.len()]);
        for e in 0..leaf.len() {
            let mut plus = leaves.to_vec();
            plus[li].data_mut()[e] += h;
            let mut minus = leaves.to_vec();
            minus[li].data_mut()[e] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            max_rel_err = max_rel_err.max(rel);
            checked += 1;
        }
    }
    GradCheck {
        max_rel_err,
        checked,
    }
}

/// Squared-error reduction against a fixed random target, turning any
/// tensor-valued op into a scalar with non-uniform upstream gradients.
pub fn reduce(tape: &mut Tape<f64>, out: Var, seed: u64) -> Var {
    let shape = tape.value(out).shape().to_vec();
    let target = random_tensor(&mut rng(seed), &shape, -1.0, 1.0);
    tape.squared_error(out, &target).unwrap()
}
