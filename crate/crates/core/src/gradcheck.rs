//! Randomized central-difference checks of every differentiable op.
//!
//! Each trial draws random shapes and inputs, reduces the op output to a
//! scalar with fixed random weights `L = sum(w * op(x))`, and compares the
//! tape gradient of every input element with `(L(x + h) - L(x - h)) / 2h`.
//! The error of one element is `|analytic - numeric| / max(|analytic|,
//! |numeric|, 1e-3)`; the floor keeps near-zero gradients from dividing
//! round-off by round-off.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{Graph, OpKind, Var};
use crate::error::Result;
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-6;
pub const ERROR_FLOOR: f64 = 1e-3;

/// Every op except leaves.
pub const CHECKED_OPS: [OpKind; 16] = [
    OpKind::MatMul,
    OpKind::Add,
    OpKind::AddBias,
    OpKind::Relu,
    OpKind::Sigmoid,
    OpKind::Softmax,
    OpKind::Concat,
    OpKind::Mean,
    OpKind::MaskedMean,
    OpKind::EmbeddingLookup,
    OpKind::CrossEntropy,
    OpKind::BinaryCrossEntropy,
    OpKind::Mul,
    OpKind::Sum,
    OpKind::Scale,
    OpKind::Reshape,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpCheck {
    pub op: String,
    pub trials: usize,
    pub elements: usize,
    pub max_error: f64,
}

type Build = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>;

/// Inputs plus the function of them under test.
struct Case {
    inputs: Vec<Tensor>,
    build: Build,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// Values bounded away from 0 so that `h` never straddles the relu kink.
fn off_kink(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    uniform(rng, shape).map(|v| if v.abs() < 0.05 { v.signum() * 0.05 + v } else { v })
}

fn dim(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(1..=5)
}

fn case(op: OpKind, rng: &mut ChaCha8Rng) -> Case {
    let (r, c, k) = (dim(rng), dim(rng), dim(rng));
    match op {
        OpKind::MatMul => Case {
            inputs: vec![uniform(rng, &[r, k]), uniform(rng, &[k, c])],
            build: Box::new(|g, v| g.matmul(v[0], v[1])),
        },
        OpKind::Add => Case {
            inputs: vec![uniform(rng, &[r, c]), uniform(rng, &[r, c])],
            build: Box::new(|g, v| g.add(v[0], v[1])),
        },
        OpKind::AddBias => Case {
            inputs: vec![uniform(rng, &[r, c]), uniform(rng, &[c])],
            build: Box::new(|g, v| g.add_bias(v[0], v[1])),
        },
        OpKind::Relu => Case {
            inputs: vec![off_kink(rng, &[r, c])],
            build: Box::new(|g, v| Ok(g.relu(v[0]))),
        },
        OpKind::Sigmoid => Case {
            inputs: vec![uniform(rng, &[r, c]).map(|x| 3.0 * x)],
            build: Box::new(|g, v| Ok(g.sigmoid(v[0]))),
        },
        OpKind::Softmax => Case {
            inputs: vec![uniform(rng, &[r, c])],
            build: Box::new(|g, v| g.softmax(v[0])),
        },
        OpKind::Concat => {
            let axis = rng.random_range(0..2usize);
            let parts = rng.random_range(1..=3usize);
            let inputs = (0..parts)
                .map(|_| {
                    let extra = dim(rng);
                    if axis == 0 {
                        uniform(rng, &[extra, c])
                    } else {
                        uniform(rng, &[r, extra])
                    }
                })
                .collect();
            Case {
                inputs,
                build: Box::new(move |g, v| g.concat(v, axis)),
            }
        }
        OpKind::Mean => Case {
            inputs: vec![uniform(rng, &[r, c])],
            build: Box::new(|g, v| Ok(g.mean(v[0]))),
        },
        OpKind::MaskedMean => {
            let seq = k;
            let mask: Vec<f64> = (0..r * seq).map(|_| f64::from(rng.random_bool(0.7) as u8)).collect();
            Case {
                inputs: vec![uniform(rng, &[r * seq, c])],
                build: Box::new(move |g, v| g.masked_mean(v[0], &mask, seq)),
            }
        }
        OpKind::EmbeddingLookup => {
            let vocab = dim(rng) + 1;
            let ids: Vec<usize> = (0..r * k).map(|_| rng.random_range(0..vocab)).collect();
            Case {
                inputs: vec![uniform(rng, &[vocab, c])],
                build: Box::new(move |g, v| g.embedding_lookup(v[0], &ids)),
            }
        }
        OpKind::CrossEntropy => {
            let classes = dim(rng) + 1;
            let targets: Vec<usize> = (0..r).map(|_| rng.random_range(0..classes)).collect();
            Case {
                inputs: vec![uniform(rng, &[r, classes]).map(|x| 2.0 * x)],
                build: Box::new(move |g, v| g.cross_entropy(v[0], &targets)),
            }
        }
        OpKind::BinaryCrossEntropy => {
            let t = Tensor::new(
                vec![r, c],
                (0..r * c).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect(),
            )
            .expect("shape matches data");
            Case {
                inputs: vec![uniform(rng, &[r, c]).map(|x| 3.0 * x)],
                build: Box::new(move |g, v| g.binary_cross_entropy(v[0], &t)),
            }
        }
        OpKind::Mul => Case {
            inputs: vec![uniform(rng, &[r, c]), uniform(rng, &[r, c])],
            build: Box::new(|g, v| g.mul(v[0], v[1])),
        },
        OpKind::Sum => Case {
            inputs: vec![uniform(rng, &[r, c])],
            build: Box::new(|g, v| Ok(g.sum(v[0]))),
        },
        OpKind::Scale => {
            let f = rng.random_range(-3.0..3.0);
            Case {
                inputs: vec![uniform(rng, &[r, c])],
                build: Box::new(move |g, v| Ok(g.scale(v[0], f))),
            }
        }
        OpKind::Reshape => Case {
            inputs: vec![uniform(rng, &[r, c * k])],
            build: Box::new(move |g, v| g.reshape(v[0], vec![r * c, k])),
        },
        OpKind::Leaf => Case {
            inputs: vec![uniform(rng, &[r, c])],
            build: Box::new(|_, v| Ok(v[0])),
        },
    }
}

/// `sum(w * op(inputs))` and the tape gradients of every input.
fn evaluate(case: &Case, inputs: &[Tensor], weights: Option<&Tensor>, grads: bool) -> Result<(f64, Vec<Tensor>, Tensor)> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| if grads { g.variable(t.clone()) } else { g.constant(t.clone()) })
        .collect();
    let out = (case.build)(&mut g, &vars)?;
    let shape = g.value(out).shape().to_vec();
    let w = match weights {
        Some(w) => w.clone(),
        None => Tensor::filled(&shape, 1.0),
    };
    let wv = g.constant(w.clone());
    let weighted = g.mul(out, wv)?;
    let loss = g.sum(weighted);
    let value = g.value(loss).item();
    let mut gs = Vec::new();
    if grads {
        g.backward(loss)?;
        for (v, t) in vars.iter().zip(inputs) {
            gs.push(g.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())));
        }
    }
    Ok((value, gs, w))
}

/// Runs `trials` random cases of `op` from `seed`.
pub fn check_op(op: OpKind, trials: usize, seed: u64) -> Result<OpCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error: f64 = 0.0;
    let mut elements = 0;
    for _ in 0..trials {
        let case = case(op, &mut rng);
        // Random output weights make every output element matter.
        let (_, _, ones) = evaluate(&case, &case.inputs, None, false)?;
        let weights = uniform(&mut rng, ones.shape());
        let (_, analytic, _) = evaluate(&case, &case.inputs, Some(&weights), true)?;
        for (i, input) in case.inputs.iter().enumerate() {
            for j in 0..input.numel() {
                let mut plus = case.inputs.clone();
                plus[i].data_mut()[j] += STEP;
                let mut minus = case.inputs.clone();
                minus[i].data_mut()[j] -= STEP;
                let lp = evaluate(&case, &plus, Some(&weights), false)?.0;
                let lm = evaluate(&case, &minus, Some(&weights), false)?.0;
                let numeric = (lp - lm) / (2.0 * STEP);
                let a = analytic[i].data()[j];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(ERROR_FLOOR);
                max_error = max_error.max(err);
                elements += 1;
            }
        }
    }
    Ok(OpCheck {
        op: format!("{op:?}"),
        trials,
        elements,
        max_error,
    })
}
