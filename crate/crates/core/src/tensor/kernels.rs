//! Plain slice kernels shared by the tape and the no-grad inference paths.
//!
//! Every kernel fixes its summation order so that a row computed alone and the
//! same row computed inside a larger batch produce identical bits.

/// `out[m×n] = a[m×k] · b[k×n]`, overwriting `out`.
pub fn matmul(a: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m×k] += dc[m×n] · b[k×n]ᵀ`
pub fn matmul_nt_acc(dc: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let dc_row = &dc[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for (p, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            let mut acc = 0.0f32;
            for (&x, &y) in dc_row.iter().zip(b_row) {
                acc += x * y;
            }
            *o += acc;
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · dc[m×n]`
pub fn matmul_tn_acc(a: &[f32], dc: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let dc_row = &dc[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &g) in out_row.iter_mut().zip(dc_row) {
                *o += av * g;
            }
        }
    }
}

/// Affine map of a single row: `x·w + bias`, with the same rounding as
/// `matmul` followed by a row-broadcast bias add.
pub fn linear_row(x: &[f32], w: &[f32], bias: &[f32]) -> Vec<f32> {
    let n = bias.len();
    let mut out = vec![0.0; n];
    matmul(x, w, &mut out, 1, x.len(), n);
    for (o, &b) in out.iter_mut().zip(bias) {
        *o += b;
    }
    out
}

/// Numerically stable log-softmax of one row.
pub fn log_softmax_row(x: &[f32], out: &mut [f32]) {
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for &v in x {
        sum += (v - max).exp();
    }
    let lse = max + sum.ln();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = v - lse;
    }
}

pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn all_finite(xs: &[f32]) -> bool {
    xs.iter().all(|v| v.is_finite())
}
