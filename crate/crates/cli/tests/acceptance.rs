//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.
//!
//! Set `GCM_ACCEPTANCE_SKIP_TRAINING=1` to skip the two long training
//! comparisons (they are reported as SKIP, which does not count as a pass).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::rc::Rc;
use std::time::Instant;

use gcm::baselines::{mlp_step, Lstm, Mlp, LSTM_BIAS, LSTM_W_HH, LSTM_W_IH};
use gcm::env::{CardGame, CartPole, CartpoleState, Environment};
use gcm::gcm::{
    gcm_step, gnn_forward, insert_observation, neighbor_weight, root_bias, root_weight, Activation, Gcm,
    GcmConfig, LatentMetric, MemoryState, PriorSpec,
};
use gcm::harness::{build_trainer, count_params, parse_config, ExperimentConfig};
use gcm::memory::{EpisodeInput, Metadata, MemoryModule, Observation};
use gcm::tensor::{softmax_logits_ops, ParameterStore, Reduction, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ── pinned tolerances ───────────────────────────────────────────────────

const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_INSTANCES: usize = 100;
const GRAD_TIME_LIMIT_S: f64 = 60.0;
const STRUCT_EPISODES: usize = 1000;
const STRUCT_MAX_LEN: usize = 50;
const STRUCT_TIME_LIMIT_S: f64 = 60.0;
const EMPTY_PRIOR_STREAMS: usize = 100;
const RECEPTIVE_GRAPHS: usize = 200;
const SOLVE_RETURN: f64 = 195.0;
const SOLVE_RUN: usize = 5;
const CARTPOLE_BUDGET: usize = 1_500_000;
const MLP_CEILING: f64 = 120.0;
const CARD_BUDGET: usize = 2_000_000;
const CARD_FINAL_WINDOW: usize = 10;
const CARD_VS_MLP: f64 = 2.0;
const CARD_VS_LSTM: f64 = 1.25;
const SEEDS_REQUIRED: usize = 2;
const CARD_RANDOM_EPISODES: usize = 10_000;
const CARTPOLE_GOLDEN_TOL: f64 = 1e-6;

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass: Some(pass),
            detail: detail.into(),
        }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Self {
            pass: None,
            detail: detail.into(),
        }
    }
}

fn f32r(x: f64) -> f64 {
    x as f32 as f64
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| f32r(rng.random_range(lo..hi))).collect()
}

/// Values uniform in `±hi` but at least `margin` away from `kink`.
fn away_from(rng: &mut ChaCha8Rng, n: usize, kink: f64, margin: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mag = rng.random_range(margin..hi);
            f32r(if rng.random_bool(0.5) { kink + mag } else { kink - mag })
        })
        .collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

// ── f64 reference math ──────────────────────────────────────────────────

fn mm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
        }
    }
    out
}

fn add_bias(x: &mut [f64], b: &[f64]) {
    let n = b.len();
    for (i, v) in x.iter_mut().enumerate() {
        *v += b[i % n];
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_softmax64(x: &[f64], width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(width) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        out.extend(row.iter().map(|v| v - lse));
    }
    out
}

fn aggregate64(x: &[f64], width: usize, edges: &[(usize, usize)], rows: usize, mean: bool) -> Vec<f64> {
    let mut out = vec![0.0; rows * width];
    let mut deg = vec![0usize; rows];
    for &(s, d) in edges {
        deg[d] += 1;
        for c in 0..width {
            out[d * width + c] += x[s * width + c];
        }
    }
    if mean {
        for d in 0..rows {
            if deg[d] > 0 {
                for c in 0..width {
                    out[d * width + c] /= deg[d] as f64;
                }
            }
        }
    }
    out
}

// ── criterion 1: gradients ──────────────────────────────────────────────

type Build = Box<dyn Fn(&mut Tape, &[Var]) -> gcm::Result<Var>>;
type Oracle = Box<dyn Fn(&[Vec<f64>]) -> Vec<f64>>;

struct GradCase {
    inputs: Vec<(Vec<usize>, Vec<f64>)>,
    build: Build,
    oracle: Oracle,
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-2)
}

fn weighted(out: &[f64], w: &[f64]) -> f64 {
    out.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Worst relative error between the tape gradient and a central difference
/// of the f64 oracle, over every input element.
fn check_case(case: &GradCase, rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = case
        .inputs
        .iter()
        .map(|(s, v)| tape.leaf(&Tensor::new(s.clone(), to_f32(v)).unwrap().with_grad()).unwrap())
        .collect();
    let out = (case.build)(&mut tape, &vars).map_err(|e| e.to_string())?;
    let n_out = tape.value(out).len();
    let w = uniform(rng, n_out, -1.0, 1.0);
    let wv = tape.constant(tape.shape(out).to_vec(), to_f32(&w)).unwrap();
    let prod = tape.mul(out, wv).unwrap();
    let loss = tape.sum(prod).unwrap();
    tape.backward(loss).map_err(|e| e.to_string())?;

    let xs: Vec<Vec<f64>> = case.inputs.iter().map(|(_, v)| v.clone()).collect();
    let fwd = (case.oracle)(&xs);
    if fwd.len() != n_out {
        return Err(format!("oracle produced {} values, tape {}", fwd.len(), n_out));
    }
    for (a, b) in tape.value(out).iter().zip(&fwd) {
        if rel_err(f64::from(*a), *b) > GRAD_REL_TOL {
            return Err(format!("forward mismatch {} vs {}", a, b));
        }
    }
    let mut worst = 0.0f64;
    let h = 1e-5;
    for (k, v) in vars.iter().enumerate() {
        let g = tape.grad(*v).ok_or("missing gradient")?.to_vec();
        for i in 0..xs[k].len() {
            let mut plus = xs.clone();
            plus[k][i] += h;
            let mut minus = xs.clone();
            minus[k][i] -= h;
            let num = (weighted(&(case.oracle)(&plus), &w) - weighted(&(case.oracle)(&minus), &w)) / (2.0 * h);
            worst = worst.max(rel_err(f64::from(g[i]), num));
        }
    }
    Ok(worst)
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5))
}

fn unary_case(
    shape: Vec<usize>,
    x: Vec<f64>,
    build: impl Fn(&mut Tape, Var) -> gcm::Result<Var> + 'static,
    f: impl Fn(f64) -> f64 + 'static,
) -> GradCase {
    GradCase {
        inputs: vec![(shape, x)],
        build: Box::new(move |t, v| build(t, v[0])),
        oracle: Box::new(move |x| x[0].iter().map(|&v| f(v)).collect()),
    }
}

fn binary_case(
    shape: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    build: impl Fn(&mut Tape, Var, Var) -> gcm::Result<Var> + 'static,
    f: impl Fn(f64, f64) -> f64 + 'static,
) -> GradCase {
    GradCase {
        inputs: vec![(shape.clone(), a), (shape, b)],
        build: Box::new(move |t, v| build(t, v[0], v[1])),
        oracle: Box::new(move |x| x[0].iter().zip(&x[1]).map(|(&p, &q)| f(p, q)).collect()),
    }
}

fn primitive_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, GradCase)> {
    let (m, k, n) = dims(rng);
    let mut cases: Vec<(&'static str, GradCase)> = Vec::new();

    cases.push((
        "matmul",
        GradCase {
            inputs: vec![(vec![m, k], uniform(rng, m * k, -1.0, 1.0)), (vec![k, n], uniform(rng, k * n, -1.0, 1.0))],
            build: Box::new(|t, v| t.matmul(v[0], v[1])),
            oracle: Box::new(move |x| mm(&x[0], &x[1], m, k, n)),
        },
    ));
    let s = vec![m, n];
    let len = m * n;
    cases.push(("add", binary_case(s.clone(), uniform(rng, len, -1.0, 1.0), uniform(rng, len, -1.0, 1.0), |t, a, b| t.add(a, b), |a, b| a + b)));
    cases.push(("sub", binary_case(s.clone(), uniform(rng, len, -1.0, 1.0), uniform(rng, len, -1.0, 1.0), |t, a, b| t.sub(a, b), |a, b| a - b)));
    cases.push(("mul", binary_case(s.clone(), uniform(rng, len, -1.0, 1.0), uniform(rng, len, -1.0, 1.0), |t, a, b| t.mul(a, b), |a, b| a * b)));
    {
        let a = uniform(rng, len, -1.0, 1.0);
        let gap = uniform(rng, len, 0.05, 1.0);
        let sign: Vec<f64> = (0..len).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let b: Vec<f64> = a.iter().zip(&gap).zip(&sign).map(|((a, g), s)| f32r(a + g * s)).collect();
        cases.push(("minimum", binary_case(s.clone(), a.clone(), b.clone(), |t, a, b| t.minimum(a, b), f64::min)));
        cases.push(("maximum", binary_case(s.clone(), a, b, |t, a, b| t.maximum(a, b), f64::max)));
    }
    cases.push((
        "add_row",
        GradCase {
            inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0)), (vec![n], uniform(rng, n, -1.0, 1.0))],
            build: Box::new(|t, v| t.add_row(v[0], v[1])),
            oracle: Box::new(|x| {
                let mut o = x[0].clone();
                add_bias(&mut o, &x[1]);
                o
            }),
        },
    ));
    cases.push(("tanh", unary_case(s.clone(), uniform(rng, len, -2.0, 2.0), |t, x| t.tanh(x), f64::tanh)));
    cases.push(("relu", unary_case(s.clone(), away_from(rng, len, 0.0, 0.05, 2.0), |t, x| t.relu(x), |v| v.max(0.0))));
    cases.push(("sigmoid", unary_case(s.clone(), uniform(rng, len, -3.0, 3.0), |t, x| t.sigmoid(x), sig)));
    cases.push(("exp", unary_case(s.clone(), uniform(rng, len, -2.0, 2.0), |t, x| t.exp(x), f64::exp)));
    cases.push(("log", unary_case(s.clone(), uniform(rng, len, 0.2, 3.0), |t, x| t.log(x), f64::ln)));
    cases.push(("neg", unary_case(s.clone(), uniform(rng, len, -1.0, 1.0), |t, x| t.neg(x), |v| -v)));
    let c = f32r(rng.random_range(-2.0..2.0));
    cases.push(("scale", unary_case(s.clone(), uniform(rng, len, -1.0, 1.0), move |t, x| t.scale(x, c as f32), move |v| v * c)));
    {
        let x: Vec<f64> = (0..len)
            .map(|_| {
                let r: [f64; 3] = [rng.random_range(-1.5..-0.55), rng.random_range(-0.45..0.45), rng.random_range(0.55..1.5)];
                f32r(r[rng.random_range(0..3)])
            })
            .collect();
        cases.push(("clamp", unary_case(s.clone(), x, |t, x| t.clamp(x, -0.5, 0.5), |v| v.clamp(-0.5, 0.5))));
    }
    for (name, axis, mean) in [("reduce_sum_0", 0, false), ("reduce_mean_1", 1, true), ("reduce_mean_0", 0, true), ("reduce_sum_1", 1, false)] {
        let op = if mean { Reduction::Mean } else { Reduction::Sum };
        cases.push((
            name,
            GradCase {
                inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0))],
                build: Box::new(move |t, v| t.reduce(op, v[0], axis)),
                oracle: Box::new(move |x| {
                    let (outer, inner, ext) = if axis == 0 { (1, n, m) } else { (m, 1, n) };
                    let mut out = vec![0.0; outer * inner];
                    for o in 0..outer {
                        for e in 0..ext {
                            for i in 0..inner {
                                out[o * inner + i] += x[0][(o * ext + e) * inner + i];
                            }
                        }
                    }
                    if mean {
                        out.iter_mut().for_each(|v| *v /= ext as f64);
                    }
                    out
                }),
            },
        ));
    }
    cases.push((
        "sum",
        GradCase {
            inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0))],
            build: Box::new(|t, v| t.sum(v[0])),
            oracle: Box::new(|x| vec![x[0].iter().sum()]),
        },
    ));
    cases.push((
        "mean",
        GradCase {
            inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0))],
            build: Box::new(|t, v| t.mean(v[0])),
            oracle: Box::new(|x| vec![x[0].iter().sum::<f64>() / x[0].len() as f64]),
        },
    ));
    cases.push((
        "reshape",
        GradCase {
            inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0))],
            build: Box::new(move |t, v| {
                let r = t.reshape(v[0], vec![n, m])?;
                t.tanh(r)
            }),
            oracle: Box::new(|x| x[0].iter().map(|v| v.tanh()).collect()),
        },
    ));
    {
        let idx: Vec<usize> = (0..rng.random_range(1..6)).map(|_| rng.random_range(0..m)).collect();
        let idx2 = idx.clone();
        cases.push((
            "gather_rows",
            GradCase {
                inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0))],
                build: Box::new(move |t, v| t.gather_rows(v[0], &idx)),
                oracle: Box::new(move |x| idx2.iter().flat_map(|&i| x[0][i * n..(i + 1) * n].to_vec()).collect()),
            },
        ));
    }
    {
        let m2 = rng.random_range(1..4);
        cases.push((
            "concat_rows",
            GradCase {
                inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0)), (vec![m2, n], uniform(rng, m2 * n, -1.0, 1.0))],
                build: Box::new(|t, v| t.concat_rows(&[v[0], v[1], v[0]])),
                oracle: Box::new(|x| [x[0].clone(), x[1].clone(), x[0].clone()].concat()),
            },
        ));
    }
    {
        let a = rng.random_range(0..n);
        let b = rng.random_range(a + 1..=n);
        cases.push((
            "slice_cols",
            GradCase {
                inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0))],
                build: Box::new(move |t, v| t.slice_cols(v[0], a, b)),
                oracle: Box::new(move |x| (0..m).flat_map(|i| x[0][i * n + a..i * n + b].to_vec()).collect()),
            },
        ));
    }
    for mean in [false, true] {
        let rows = rng.random_range(1..6);
        let edges: Vec<(usize, usize)> = (0..rng.random_range(0..10))
            .map(|_| (rng.random_range(0..m), rng.random_range(0..rows)))
            .collect();
        let e2 = edges.clone();
        let op = if mean { Reduction::Mean } else { Reduction::Sum };
        cases.push((
            if mean { "aggregate_mean" } else { "aggregate_sum" },
            GradCase {
                inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0))],
                build: Box::new(move |t, v| t.aggregate(v[0], Rc::from(edges.clone()), rows, op)),
                oracle: Box::new(move |x| aggregate64(&x[0], n, &e2, rows, mean)),
            },
        ));
    }
    cases.push((
        "log_softmax",
        GradCase {
            inputs: vec![(vec![m, n], uniform(rng, len, -2.0, 2.0))],
            build: Box::new(|t, v| t.log_softmax(v[0])),
            oracle: Box::new(move |x| log_softmax64(&x[0], n)),
        },
    ));
    {
        let cols: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        let c2 = cols.clone();
        cases.push((
            "pick_cols",
            GradCase {
                inputs: vec![(vec![m, n], uniform(rng, len, -1.0, 1.0))],
                build: Box::new(move |t, v| t.pick_cols(v[0], &cols)),
                oracle: Box::new(move |x| c2.iter().enumerate().map(|(i, &c)| x[0][i * n + c]).collect()),
            },
        ));
    }
    cases.push((
        "softmax_entropy",
        GradCase {
            inputs: vec![(vec![m, n], uniform(rng, len, -2.0, 2.0))],
            build: Box::new(|t, v| Ok(softmax_logits_ops(t, v[0])?.entropy)),
            oracle: Box::new(move |x| {
                let lp = log_softmax64(&x[0], n);
                lp.chunks(n).map(|r| -r.iter().map(|l| l.exp() * l).sum::<f64>()).collect()
            }),
        },
    ));
    cases
}

type Params64 = BTreeMap<String, Vec<f64>>;

fn random_store(shapes: &[(&str, Vec<usize>)], rng: &mut ChaCha8Rng, scale: f64) -> ParameterStore {
    let mut store = ParameterStore::new();
    for (name, shape) in shapes {
        let n = shape.iter().product();
        store
            .insert(*name, Tensor::new(shape.clone(), to_f32(&uniform(rng, n, -scale, scale))).unwrap())
            .unwrap();
    }
    store
}

fn store64(store: &ParameterStore) -> Params64 {
    store
        .iter()
        .map(|(k, t)| (k.to_string(), t.data().iter().map(|&v| f64::from(v)).collect()))
        .collect()
}

/// Gradient check of a whole module through its parameter store.
fn check_model(
    store: &ParameterStore,
    forward: &dyn Fn(&mut Tape, &ParameterStore) -> gcm::Result<Var>,
    oracle: &dyn Fn(&Params64) -> Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<f64, String> {
    let mut tape = Tape::new();
    let out = forward(&mut tape, store).map_err(|e| e.to_string())?;
    let w = uniform(rng, tape.value(out).len(), -1.0, 1.0);
    let wv = tape.constant(tape.shape(out).to_vec(), to_f32(&w)).unwrap();
    let prod = tape.mul(out, wv).unwrap();
    let loss = tape.sum(prod).unwrap();
    tape.backward(loss).map_err(|e| e.to_string())?;
    let grads: BTreeMap<String, Vec<f32>> = tape.param_grads().map(|(k, g)| (k.to_string(), g.to_vec())).collect();
    let p = store64(store);
    let fwd = oracle(&p);
    for (a, b) in tape.value(out).iter().zip(&fwd) {
        if rel_err(f64::from(*a), *b) > GRAD_REL_TOL {
            return Err(format!("forward mismatch {} vs {}", a, b));
        }
    }
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (name, vals) in &p {
        let g = grads.get(name).ok_or_else(|| format!("no gradient for {}", name))?;
        for i in 0..vals.len() {
            let mut plus = p.clone();
            plus.get_mut(name).unwrap()[i] += h;
            let mut minus = p.clone();
            minus.get_mut(name).unwrap()[i] -= h;
            let num = (weighted(&oracle(&plus), &w) - weighted(&oracle(&minus), &w)) / (2.0 * h);
            worst = worst.max(rel_err(f64::from(g[i]), num));
        }
    }
    Ok(worst)
}

fn mlp64(p: &Params64, x: &[f64], rows: usize, d: usize, z: usize) -> Vec<f64> {
    let mut h = mm(x, &p["memory.mlp0.weight"], rows, d, z);
    add_bias(&mut h, &p["memory.mlp0.bias"]);
    h.iter_mut().for_each(|v| *v = v.tanh());
    let mut o = mm(&h, &p["memory.mlp1.weight"], rows, z, z);
    add_bias(&mut o, &p["memory.mlp1.bias"]);
    o.iter_mut().for_each(|v| *v = v.tanh());
    o
}

fn lstm64(p: &Params64, x: &[f64], steps: usize, d: usize, z: usize) -> Vec<f64> {
    let enc = mlp64(p, x, steps, d, z);
    let (mut h, mut c) = (vec![0.0; z], vec![0.0; z]);
    let mut out = Vec::new();
    for t in 0..steps {
        let mut g = mm(&enc[t * z..(t + 1) * z], &p[LSTM_W_IH], 1, z, 4 * z);
        add_bias(&mut g, &p[LSTM_BIAS]);
        let hg = mm(&h, &p[LSTM_W_HH], 1, z, 4 * z);
        for q in 0..4 * z {
            g[q] += hg[q];
        }
        for q in 0..z {
            c[q] = sig(g[z + q]) * c[q] + sig(g[q]) * g[2 * z + q].tanh();
            h[q] = sig(g[3 * z + q]) * c[q].tanh();
        }
        out.extend_from_slice(&h);
    }
    out
}

fn gcm64(p: &Params64, x: &[f64], n: usize, d: usize, z: usize, edges: &[(usize, usize)], mean: bool) -> Vec<f64> {
    let mut h = x.to_vec();
    let mut width = d;
    for l in 0..2 {
        let mut root = mm(&h, &p[&root_weight(l)], n, width, z);
        add_bias(&mut root, &p[&root_bias(l)]);
        let agg = aggregate64(&h, width, edges, n, mean);
        let neigh = mm(&agg, &p[&neighbor_weight(l)], n, width, z);
        h = root.iter().zip(&neigh).map(|(a, b)| (a + b).tanh()).collect();
        width = z;
    }
    h
}

fn model_cases(i: usize, rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let d = rng.random_range(1..4);
    let z = rng.random_range(1..5);
    let mlp_shapes = vec![
        ("memory.mlp0.weight", vec![d, z]),
        ("memory.mlp0.bias", vec![z]),
        ("memory.mlp1.weight", vec![z, z]),
        ("memory.mlp1.bias", vec![z]),
    ];
    let mut worst = 0.0f64;

    // MLP over a batch of rows
    let rows = rng.random_range(1..5);
    let x = uniform(rng, rows * d, -1.0, 1.0);
    let store = random_store(&mlp_shapes, rng, 0.8);
    let mlp = Mlp::new(d, z);
    let ep = EpisodeInput {
        len: rows,
        dim: d,
        features: to_f32(&x),
        edges: Vec::new(),
    };
    worst = worst.max(check_model(
        &store,
        &|t, s| mlp.forward_episodes(t, s, &[&ep]),
        &|p| mlp64(p, &x, rows, d, z),
        rng,
    )?);

    // LSTM unrolled over three steps
    let mut lstm_shapes = mlp_shapes.clone();
    lstm_shapes.push((LSTM_W_IH, vec![z, 4 * z]));
    lstm_shapes.push((LSTM_W_HH, vec![z, 4 * z]));
    lstm_shapes.push((LSTM_BIAS, vec![4 * z]));
    let store = random_store(&lstm_shapes, rng, 0.8);
    let lstm = Lstm::new(d, z);
    let x = uniform(rng, 3 * d, -1.0, 1.0);
    let ep = EpisodeInput {
        len: 3,
        dim: d,
        features: to_f32(&x),
        edges: Vec::new(),
    };
    worst = worst.max(check_model(
        &store,
        &|t, s| lstm.forward_episodes(t, s, &[&ep]),
        &|p| lstm64(p, &x, 3, d, z),
        rng,
    )?);

    // two-layer graph convolution on five vertices
    let mut gcm_shapes = Vec::new();
    let (names_w1, names_b, names_w2): (Vec<String>, Vec<String>, Vec<String>) =
        ((0..2).map(root_weight).collect(), (0..2).map(root_bias).collect(), (0..2).map(neighbor_weight).collect());
    for l in 0..2 {
        let w = if l == 0 { d } else { z };
        gcm_shapes.push((names_w1[l].as_str(), vec![w, z]));
        gcm_shapes.push((names_b[l].as_str(), vec![z]));
        gcm_shapes.push((names_w2[l].as_str(), vec![w, z]));
    }
    let store = random_store(&gcm_shapes, rng, 0.8);
    let mean = i % 2 == 1;
    let mut cfg = GcmConfig::new(d, z, PriorSpec::Empty);
    if mean {
        cfg.aggregation = Reduction::Mean;
    }
    let gcm = Gcm::new(cfg).unwrap();
    let mut edges = Vec::new();
    for t in 1..5 {
        for j in 0..t {
            if rng.random_bool(0.5) {
                edges.push((j, t));
            }
        }
    }
    let x = uniform(rng, 5 * d, -1.0, 1.0);
    let ep = EpisodeInput {
        len: 5,
        dim: d,
        features: to_f32(&x),
        edges: edges.clone(),
    };
    worst = worst.max(check_model(
        &store,
        &|t, s| gcm.forward_episodes(t, s, &[&ep]),
        &|p| gcm64(p, &x, 5, d, z, &edges, mean),
        rng,
    )?);
    Ok(worst)
}

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: BTreeMap<&'static str, f64> = BTreeMap::new();
    for _ in 0..GRAD_INSTANCES {
        for (name, case) in primitive_cases(&mut rng) {
            match check_case(&case, &mut rng) {
                Ok(e) => {
                    let w = worst.entry(name).or_insert(0.0);
                    *w = w.max(e);
                }
                Err(msg) => return Outcome::check(false, format!("{}: {}", name, msg)),
            }
        }
    }
    let mut model_worst = 0.0f64;
    for i in 0..GRAD_INSTANCES {
        match model_cases(i, &mut rng) {
            Ok(e) => model_worst = model_worst.max(e),
            Err(msg) => return Outcome::check(false, format!("models: {}", msg)),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let (worst_name, worst_prim) = worst
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (*k, *v))
        .unwrap();
    let pass = worst_prim <= GRAD_REL_TOL && model_worst <= GRAD_REL_TOL && secs < GRAD_TIME_LIMIT_S;
    Outcome::check(
        pass,
        format!(
            "{} primitives x {} instances, worst {:.2e} ({}); MLP/LSTM/GCM worst {:.2e}; {:.1}s",
            worst.len(),
            GRAD_INSTANCES,
            worst_prim,
            worst_name,
            model_worst,
            secs
        ),
    )
}

// ── criterion 2: edge construction ──────────────────────────────────────

const FIELDS: [&str; 2] = ["pointer_value", "faceup_value"];
const COSINE_THRESHOLDS: [f32; 3] = [0.137, 0.413, 0.781];

fn random_leaf(rng: &mut ChaCha8Rng) -> PriorSpec {
    match rng.random_range(0..6) {
        0 => PriorSpec::Empty,
        1 => PriorSpec::Temporal(rng.random_range(1..=3)),
        2 => PriorSpec::Spatial([0.5, 1.5, 2.5][rng.random_range(0..3)]),
        3 => PriorSpec::LatentSim {
            metric: LatentMetric::L2,
            threshold: [1.5, 2.5][rng.random_range(0..2)],
        },
        4 => PriorSpec::LatentSim {
            metric: LatentMetric::Cosine,
            threshold: COSINE_THRESHOLDS[rng.random_range(0..3)],
        },
        _ => PriorSpec::Identity {
            a: FIELDS[rng.random_range(0..2)].to_string(),
            b: FIELDS[rng.random_range(0..2)].to_string(),
        },
    }
}

fn random_prior(rng: &mut ChaCha8Rng, depth: usize) -> PriorSpec {
    if depth == 0 || rng.random_bool(0.4) {
        return random_leaf(rng);
    }
    let children = (0..rng.random_range(1..=3)).map(|_| random_prior(rng, depth - 1)).collect();
    if rng.random_bool(0.5) {
        PriorSpec::Or(children)
    } else {
        PriorSpec::And(children)
    }
}

fn random_meta(rng: &mut ChaCha8Rng) -> Metadata {
    let mut grid = |n: usize| (0..n).map(|_| rng.random_range(-2..=2) as f32).collect::<Vec<f32>>();
    let position = Some(grid(2));
    let latent = Some(grid(3));
    let mut m = Metadata {
        position,
        latent,
        ..Metadata::default()
    };
    for f in FIELDS {
        let v = if rng.random_bool(0.25) { None } else { Some(rng.random_range(0..4)) };
        m = m.with_field(f, v);
    }
    m
}

fn dist64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2)).sum::<f64>().sqrt()
}

/// Independent reading of the adjacency rules.
fn oracle_link(p: &PriorSpec, j: usize, t: usize, old: &Metadata, new: &Metadata) -> bool {
    match p {
        PriorSpec::Empty => false,
        PriorSpec::Temporal(k) => t - j == *k,
        PriorSpec::Spatial(k) => dist64(old.position.as_ref().unwrap(), new.position.as_ref().unwrap()) <= f64::from(*k),
        PriorSpec::LatentSim { metric, threshold } => {
            let (a, b) = (old.latent.as_ref().unwrap(), new.latent.as_ref().unwrap());
            let d = match metric {
                LatentMetric::L2 => dist64(a, b),
                LatentMetric::Cosine => {
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
                    let na = dist64(a, &[0.0; 3]);
                    let nb = dist64(b, &[0.0; 3]);
                    if na == 0.0 || nb == 0.0 {
                        1.0
                    } else {
                        1.0 - dot / (na * nb)
                    }
                }
            };
            d < f64::from(*threshold)
        }
        PriorSpec::Identity { a, b } => match (old.fields[a], new.fields[b]) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
        PriorSpec::Or(c) => c.iter().any(|q| oracle_link(q, j, t, old, new)),
        PriorSpec::And(c) => c.iter().all(|q| oracle_link(q, j, t, old, new)),
    }
}

fn mentions(p: &PriorSpec, pred: &dyn Fn(&PriorSpec) -> bool) -> bool {
    pred(p)
        || match p {
            PriorSpec::Or(c) | PriorSpec::And(c) => c.iter().any(|q| mentions(q, pred)),
            _ => false,
        }
}

struct Coverage {
    spatial: usize,
    latent: usize,
}

fn criterion_edges(coverage: &mut Coverage) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut total_edges = 0usize;
    for ep in 0..STRUCT_EPISODES {
        let prior = random_prior(&mut rng, 3);
        if mentions(&prior, &|p| matches!(p, PriorSpec::Spatial(_))) {
            coverage.spatial += 1;
        }
        if mentions(&prior, &|p| matches!(p, PriorSpec::LatentSim { .. })) {
            coverage.latent += 1;
        }
        let len = rng.random_range(1..=STRUCT_MAX_LEN);
        let obs: Vec<Observation> = (0..len)
            .map(|_| Observation {
                features: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                meta: random_meta(&mut rng),
            })
            .collect();
        let mut state = MemoryState::new(2);
        for o in &obs {
            state = match insert_observation(state, o, &prior) {
                Ok(s) => s,
                Err(e) => return Outcome::check(false, format!("episode {}: {}", ep, e)),
            };
        }
        let mut expected = Vec::new();
        for t in 0..len {
            for j in 0..t {
                if oracle_link(&prior, j, t, &obs[j].meta, &obs[t].meta) {
                    expected.push((j, t));
                }
            }
        }
        let mut got = state.edges().to_vec();
        got.sort_by_key(|&(j, t)| (t, j));
        if got != expected {
            return Outcome::check(false, format!("episode {} prior {}: edge sets differ", ep, prior));
        }
        for t in 0..len {
            let want: Vec<usize> = expected.iter().filter(|e| e.1 == t).map(|e| e.0).collect();
            if state.neighborhood(t).unwrap() != want.as_slice() {
                return Outcome::check(false, format!("episode {}: neighborhood of {} differs", ep, t));
            }
        }
        total_edges += expected.len();
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        secs < STRUCT_TIME_LIMIT_S,
        format!(
            "{} episodes, {} edges matched exactly; {} trees with spatial, {} with latent; {:.1}s",
            STRUCT_EPISODES, total_edges, coverage.spatial, coverage.latent, secs
        ),
    )
}

// ── criterion 3: empty prior reduces to the MLP ─────────────────────────

fn criterion_empty_prior() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut compared = 0usize;
    for s in 0..EMPTY_PRIOR_STREAMS {
        let d = rng.random_range(1..6);
        let z = rng.random_range(1..12);
        let gcm = Gcm::new(GcmConfig::new(d, z, PriorSpec::Empty)).unwrap();
        let mut store = ParameterStore::new();
        gcm.init_params(&mut store, &mut rng).unwrap();
        let mut mlp_store = ParameterStore::new();
        for l in 0..2 {
            mlp_store
                .insert(format!("memory.mlp{}.weight", l), store.get(&root_weight(l)).unwrap().clone())
                .unwrap();
            mlp_store
                .insert(format!("memory.mlp{}.bias", l), store.get(&root_bias(l)).unwrap().clone())
                .unwrap();
        }
        let mlp = Mlp::new(d, z);
        let mut inc = gcm.initial_state();
        let mut whole = MemoryState::new(d);
        for _ in 0..rng.random_range(1..40) {
            let o = Observation::new((0..d).map(|_| rng.random_range(-2.0..2.0)).collect());
            let want = mlp_step(&mlp, &mlp_store, &o).unwrap();
            let (b1, next) = gcm.step(&store, &o, inc).unwrap();
            inc = next;
            let (b2, next) = gcm_step(&o, whole, &store, &gcm.config).unwrap();
            whole = next;
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            if bits(&b1) != bits(&want) || bits(&b2) != bits(&want) {
                return Outcome::check(false, format!("stream {} diverges from the MLP", s));
            }
            compared += 1;
        }
    }
    Outcome::check(
        true,
        format!("{} streams, {} beliefs bitwise equal (incremental and whole-graph)", EMPTY_PRIOR_STREAMS, compared),
    )
}

// ── criterion 4: receptive field ────────────────────────────────────────

fn criterion_receptive_field(coverage: &mut Coverage) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut outside = 0usize;
    let mut inside_changed = 0usize;
    let mut inside = 0usize;
    for g in 0..RECEPTIVE_GRAPHS {
        let prior = loop {
            let p = random_prior(&mut rng, 3);
            if p.validate().is_ok() {
                break p;
            }
        };
        if mentions(&prior, &|p| matches!(p, PriorSpec::Spatial(_))) {
            coverage.spatial += 1;
        }
        if mentions(&prior, &|p| matches!(p, PriorSpec::LatentSim { .. })) {
            coverage.latent += 1;
        }
        let d = 3;
        let z = 6;
        let mut cfg = GcmConfig::new(d, z, prior);
        if g % 2 == 1 {
            cfg.aggregation = Reduction::Mean;
        }
        if g % 3 == 2 {
            cfg.activation = Activation::Relu;
        }
        let gcm = Gcm::new(cfg.clone()).unwrap();
        let mut store = ParameterStore::new();
        gcm.init_params(&mut store, &mut rng).unwrap();
        let len = rng.random_range(2..25);
        let mut state = MemoryState::new(d);
        for _ in 0..len {
            let o = Observation {
                features: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                meta: random_meta(&mut rng),
            };
            state.insert(&o, &cfg.prior).unwrap();
        }
        let t = len - 1;
        let belief = |s: &MemoryState| {
            let mut tape = Tape::new();
            let zv = gnn_forward(&mut tape, &store, s, &cfg).unwrap();
            tape.value(zv)[t * z..(t + 1) * z].iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        let base = belief(&state);
        let mut field: BTreeSet<usize> = BTreeSet::from([t]);
        for &j in state.neighborhood(t).unwrap() {
            field.insert(j);
            field.extend(state.neighborhood(j).unwrap().iter().copied());
        }
        for j in 0..len {
            let mut perturbed = state.clone();
            let f: Vec<f32> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            perturbed.overwrite_vertex(j, &f);
            let changed = belief(&perturbed) != base;
            if field.contains(&j) {
                inside += 1;
                inside_changed += usize::from(changed);
            } else {
                outside += 1;
                if changed {
                    return Outcome::check(false, format!("graph {}: vertex {} outside the 2-hop field moved b_t", g, j));
                }
            }
        }
    }
    Outcome::check(
        outside > 0,
        format!(
            "{} graphs, {} out-of-field perturbations all exactly 0; {}/{} in-field perturbations moved b_t",
            RECEPTIVE_GRAPHS, outside, inside_changed, inside
        ),
    )
}

// ── criterion 5: parameter counts ───────────────────────────────────────

fn criterion_param_counts() -> Outcome {
    let mut lines = Vec::new();
    for (preset, d, a) in [
        ("cartpole-ppo-gcm32", 2usize, 2usize),
        ("cardgame8-a2c-gcm32", 31, 3),
        ("cardgame16-a2c-gcm32", 55, 3),
    ] {
        let cfg = parse_config(&format!("preset = \"{}\"", preset)).unwrap();
        let rows = count_params(&cfg, &[8, 16, 32]).unwrap();
        for z in [8usize, 16, 32] {
            let heads = z * a + a + z + 1;
            let want = [
                ("gcm", 2 * d * z + 2 * z * z + 2 * z + heads),
                ("lstm", d * z + 9 * z * z + 6 * z + heads),
                ("mlp", d * z + z * z + 2 * z + heads),
            ];
            for (module, total) in want {
                let row = rows.iter().find(|r| r.module == module && r.hidden == z).unwrap();
                if row.total != total || row.heads != heads {
                    return Outcome::check(false, format!("{} d={} z={}: {} != {}", module, d, z, row.total, total));
                }
            }
            if want[0].1 >= want[1].1 {
                return Outcome::check(false, format!("GCM not smaller than LSTM at d={} z={}", d, z));
            }
            if z == 32 {
                lines.push(format!("d={}: gcm {} < lstm {}", d, want[0].1, want[1].1));
            }
        }
    }
    Outcome::check(true, format!("exact closed forms at z in {{8,16,32}}; {}", lines.join(", ")))
}

// ── criteria 6 and 7: training comparisons ──────────────────────────────

fn config(text: &str) -> ExperimentConfig {
    parse_config(text).unwrap_or_else(|e| panic!("bad acceptance config: {}", e))
}

/// Trains one seed; `stop` may end training early once it has its answer.
fn train(cfg: &ExperimentConfig, seed: u64, stop: &dyn Fn(&[f64]) -> bool) -> Result<Vec<f64>, String> {
    let mut trainer = build_trainer(cfg, seed).map_err(|e| e.to_string())?;
    let mut returns = Vec::new();
    while trainer.env_steps() < cfg.total_env_steps {
        let m = trainer.train_iteration().map_err(|e| e.to_string())?;
        returns.push(m.mean_return);
        if stop(&returns) {
            break;
        }
    }
    Ok(returns)
}

fn solved_at(returns: &[f64]) -> Option<usize> {
    let mut run = 0;
    for (i, &r) in returns.iter().enumerate() {
        run = if r >= SOLVE_RETURN { run + 1 } else { 0 };
        if run == SOLVE_RUN {
            return Some(i + 1);
        }
    }
    None
}

fn criterion_cartpole() -> Outcome {
    let gcm = config(&format!("preset = \"cartpole-ppo-gcm32\"\ntotal_env_steps = {}", CARTPOLE_BUDGET));
    let mlp = config(&format!("preset = \"cartpole-ppo-mlp32\"\ntotal_env_steps = {}", CARTPOLE_BUDGET));
    let batch = gcm.trainer.batch_size;
    let mut solved = 0;
    let mut notes = Vec::new();
    for seed in 0..3 {
        match train(&gcm, seed, &|r| solved_at(r).is_some()) {
            Ok(r) => match solved_at(&r) {
                Some(it) => {
                    solved += 1;
                    notes.push(format!("gcm seed {} solved at {} steps", seed, it * batch));
                }
                None => notes.push(format!(
                    "gcm seed {} unsolved (best {:.1})",
                    seed,
                    r.iter().copied().fold(f64::NAN, f64::max)
                )),
            },
            Err(e) => return Outcome::check(false, format!("gcm seed {}: {}", seed, e)),
        }
    }
    let mut mlp_ok = true;
    for seed in 0..3 {
        match train(&mlp, seed, &|_| false) {
            Ok(r) => {
                let best = r.iter().copied().fold(f64::NAN, f64::max);
                mlp_ok &= best < MLP_CEILING;
                notes.push(format!("mlp seed {} best {:.1}", seed, best));
            }
            Err(e) => return Outcome::check(false, format!("mlp seed {}: {}", seed, e)),
        }
    }
    Outcome::check(
        solved >= SEEDS_REQUIRED && mlp_ok,
        format!("{}/3 GCM seeds solved; {}", solved, notes.join("; ")),
    )
}

fn final_return(returns: &[f64]) -> f64 {
    let tail: Vec<f64> = returns.iter().rev().take(CARD_FINAL_WINDOW).copied().filter(|r| r.is_finite()).collect();
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

fn criterion_cardgame() -> Outcome {
    let make = |module: &str| {
        config(&format!(
            "preset = \"cardgame8-a2c-{}32\"\ntotal_env_steps = {}\n[env]\ncards = 8\nepisode_limit = 30\n",
            module, CARD_BUDGET
        ))
    };
    let (gcm, lstm, mlp) = (make("gcm"), make("lstm"), make("mlp"));
    let mut wins = 0;
    let mut notes = Vec::new();
    for seed in 0..3 {
        let mut finals = [0.0f64; 3];
        for (k, cfg) in [&gcm, &lstm, &mlp].into_iter().enumerate() {
            match train(cfg, seed, &|_| false) {
                Ok(r) => finals[k] = final_return(&r),
                Err(e) => return Outcome::check(false, format!("{} seed {}: {}", cfg.memory.kind.name(), seed, e)),
            }
        }
        let [g, l, m] = finals;
        if g >= CARD_VS_MLP * m && g >= CARD_VS_LSTM * l {
            wins += 1;
        }
        notes.push(format!("seed {}: gcm {:.3} lstm {:.3} mlp {:.3}", seed, g, l, m));
    }
    Outcome::check(wins >= SEEDS_REQUIRED, format!("{}/3 seeds meet both ratios; {}", wins, notes.join("; ")))
}

// ── criterion 8: environment oracles ────────────────────────────────────

/// Cart-pole equations of motion written out independently.
fn cartpole_oracle_step(s: [f64; 4], action: usize) -> [f64; 4] {
    let [x, xd, th, thd] = s;
    let (g, mc, mp, l, f_mag, dt) = (9.8, 1.0, 0.1, 0.5, 10.0, 0.02);
    let f = if action == 1 { f_mag } else { -f_mag };
    let total = mc + mp;
    let tmp = (f + mp * l * thd * thd * th.sin()) / total;
    let thacc = (g * th.sin() - th.cos() * tmp) / (l * (4.0 / 3.0 - mp * th.cos() * th.cos() / total));
    let xacc = tmp - mp * l * thacc * th.cos() / total;
    [x + dt * xd, xd + dt * xacc, th + dt * thd, thd + dt * thacc]
}

fn criterion_environments() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut game = CardGame::new(4, 60, 8).unwrap();
    let mut completed = 0;
    for ep in 0..CARD_RANDOM_EPISODES {
        game.reset();
        let mut total = 0.0f32;
        loop {
            let r = game.step(rng.random_range(0..3)).unwrap();
            if r.reward != 0.0 && r.reward != 0.5 {
                return Outcome::check(false, format!("episode {} paid {}", ep, r.reward));
            }
            total += r.reward;
            if r.done {
                break;
            }
        }
        let all = game.matched_count() == 4;
        if all {
            completed += 1;
        }
        if all != (total == 1.0) {
            return Outcome::check(false, format!("episode {}: return {} with completion {}", ep, total, all));
        }
    }

    let mut env = CartPole::new(8);
    let s0 = *env.state();
    let mut s = [s0.x, s0.x_dot, s0.theta, s0.theta_dot];
    let mut worst = 0.0f64;
    for step in 0..200 {
        let action = usize::from(s[2] + 0.5 * s[3] > 0.0);
        s = cartpole_oracle_step(s, action);
        let r = env.step(action).unwrap();
        let CartpoleState {
            x,
            x_dot,
            theta,
            theta_dot,
            ..
        } = *env.state();
        for (a, b) in [x, x_dot, theta, theta_dot].iter().zip(&s) {
            worst = worst.max((a - b).abs());
        }
        if r.done != (step == 199) {
            return Outcome::check(false, format!("cartpole ended at step {}", step + 1));
        }
    }
    Outcome::check(
        worst <= CARTPOLE_GOLDEN_TOL,
        format!(
            "card game: {} random episodes, {} completed with return exactly 1.0; cartpole: 200 steps, max deviation {:.1e}",
            CARD_RANDOM_EPISODES, completed, worst
        ),
    )
}

// ── criterion 9: CLI determinism ────────────────────────────────────────

fn strip_wall_clock(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_cli(config: &Path, out: &Path, via_env: bool) -> Result<String, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gcm"));
    cmd.arg("run").arg(config).arg("--quiet");
    if via_env {
        cmd.env("GCM_OUTPUT_ROOT", out);
    } else {
        cmd.arg("--out").arg(out).env_remove("GCM_OUTPUT_ROOT");
    }
    let o = cmd.output().map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    let name = gcm::harness::parse_config(&std::fs::read_to_string(config).unwrap()).unwrap().name;
    std::fs::read_to_string(out.join(name).join("seed_7.csv")).map_err(|e| e.to_string())
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "cartpole.toml",
            "name = \"det-cartpole\"\npreset = \"cartpole-ppo-gcm8\"\nseeds = [7]\ntotal_env_steps = 1200\n[trainer]\nbatch_size = 400\nsgd_iters = 2\n",
        ),
        (
            "cards.toml",
            "name = \"det-cards\"\npreset = \"cardgame8-a2c-gcm8\"\nseeds = [7]\ntotal_env_steps = 600\n[env]\ncards = 8\nepisode_limit = 30\n[trainer]\nbatch_size = 200\nminibatch_size = 200\n",
        ),
    ];
    let mut notes = Vec::new();
    for (file, text) in configs {
        let path = dir.path().join(file);
        std::fs::write(&path, text).unwrap();
        let a = run_cli(&path, &dir.path().join("first"), false);
        let b = run_cli(&path, &dir.path().join("second"), true);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let rows = a.lines().count().saturating_sub(1);
                if strip_wall_clock(&a) != strip_wall_clock(&b) || rows == 0 {
                    return Outcome::check(false, format!("{}: metric streams differ", file));
                }
                notes.push(format!("{} {} rows identical", file, rows));
            }
            (Err(e), _) | (_, Err(e)) => return Outcome::check(false, format!("{}: {}", file, e.trim())),
        }
    }
    Outcome::check(true, notes.join("; "))
}

fn main() {
    let skip_training = std::env::var_os("GCM_ACCEPTANCE_SKIP_TRAINING").is_some();
    let mut coverage = Coverage { spatial: 0, latent: 0 };
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let record = |results: &mut Vec<(u32, &str, Outcome, f64)>, n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let tag = match o.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("criterion {:>2} {:<22} {} [{:.1}s] {}", n, name, tag, secs, o.detail);
        results.push((n, name, o, secs));
    };
    record(&mut results, 1, "gradient suite", &mut criterion_gradients);
    record(&mut results, 2, "edge construction", &mut || criterion_edges(&mut coverage));
    record(&mut results, 3, "empty-prior MLP", &mut criterion_empty_prior);
    record(&mut results, 4, "receptive field", &mut || criterion_receptive_field(&mut coverage));
    record(&mut results, 5, "parameter counts", &mut criterion_param_counts);
    if skip_training {
        record(&mut results, 6, "cartpole GCM vs MLP", &mut || Outcome::skip("training skipped by environment"));
        record(&mut results, 7, "card game ordering", &mut || Outcome::skip("training skipped by environment"));
    } else {
        record(&mut results, 6, "cartpole GCM vs MLP", &mut criterion_cartpole);
        record(&mut results, 7, "card game ordering", &mut criterion_cardgame);
    }
    record(&mut results, 8, "environment oracles", &mut criterion_environments);
    record(&mut results, 9, "CLI determinism", &mut criterion_determinism);
    let structural_ok = results.iter().filter(|r| r.0 == 2 || r.0 == 4).all(|r| r.2.pass == Some(true));
    let covered = coverage.spatial > 0 && coverage.latent > 0;
    record(&mut results, 10, "navigation substitute", &mut || {
        Outcome::check(
            structural_ok && covered,
            format!(
                "navigation not reproduced; spatial priors in {} and latent priors in {} randomized trees under criteria 2 and 4",
                coverage.spatial, coverage.latent
            ),
        )
    });
    let failed: Vec<u32> = results.iter().filter(|r| r.2.pass == Some(false)).map(|r| r.0).collect();
    let skipped = results.iter().filter(|r| r.2.pass.is_none()).count();
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        results.len() - failed.len() - skipped,
        failed.len(),
        skipped
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
