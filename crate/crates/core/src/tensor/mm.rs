//! Dense f64 matrix kernels backing convolution and fully connected layers.
//!
//! All kernels accumulate row blocks of the output with a fixed inner
//! iteration order, so results are bit-identical for any rayon thread
//! count: each output element is always reduced in the same sequence.

use rayon::prelude::*;

/// Work threshold (multiply-adds) above which kernels parallelize.
const PAR_THRESHOLD: usize = 1 << 15;

/// `c[m x n] += a[m x k] * b[k x n]`, row-major.
pub fn matmul_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let body = |(block_idx, c_block): (usize, &mut [f64])| {
        let i0 = block_idx * 4;
        let rows = c_block.len() / n;
        match rows {
            4 => {
                let (c01, c23) = c_block.split_at_mut(2 * n);
                let (c0, c1) = c01.split_at_mut(n);
                let (c2, c3) = c23.split_at_mut(n);
                for l in 0..k {
                    let a0 = a[i0 * k + l];
                    let a1 = a[(i0 + 1) * k + l];
                    let a2 = a[(i0 + 2) * k + l];
                    let a3 = a[(i0 + 3) * k + l];
                    let br = &b[l * n..l * n + n];
                    for j in 0..n {
                        let bv = br[j];
                        c0[j] += a0 * bv;
                        c1[j] += a1 * bv;
                        c2[j] += a2 * bv;
                        c3[j] += a3 * bv;
                    }
                }
            }
            _ => {
                for (r, c_row) in c_block.chunks_exact_mut(n).enumerate() {
                    let i = i0 + r;
                    for l in 0..k {
                        let av = a[i * k + l];
                        if av == 0.0 {
                            continue;
                        }
                        let br = &b[l * n..l * n + n];
                        for j in 0..n {
                            c_row[j] += av * br[j];
                        }
                    }
                }
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD {
        c.par_chunks_mut(4 * n).enumerate().for_each(body);
    } else {
        c.chunks_mut(4 * n).enumerate().for_each(body);
    }
}

/// `c[m x n] += a^T * b` where `a` is `[ka x m]` and `b` is `[ka x n]`.
pub fn matmul_tn_acc(c: &mut [f64], a: &[f64], b: &[f64], ka: usize, m: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(a.len(), ka * m);
    debug_assert_eq!(b.len(), ka * n);
    let body = |(block_idx, c_block): (usize, &mut [f64])| {
        let i0 = block_idx * 4;
        let rows = c_block.len() / n;
        match rows {
            4 => {
                let (c01, c23) = c_block.split_at_mut(2 * n);
                let (c0, c1) = c01.split_at_mut(n);
                let (c2, c3) = c23.split_at_mut(n);
                for l in 0..ka {
                    let arow = &a[l * m + i0..l * m + i0 + 4];
                    let (a0, a1, a2, a3) = (arow[0], arow[1], arow[2], arow[3]);
                    let br = &b[l * n..l * n + n];
                    for j in 0..n {
                        let bv = br[j];
                        c0[j] += a0 * bv;
                        c1[j] += a1 * bv;
                        c2[j] += a2 * bv;
                        c3[j] += a3 * bv;
                    }
                }
            }
            _ => {
                for (r, c_row) in c_block.chunks_exact_mut(n).enumerate() {
                    let i = i0 + r;
                    for l in 0..ka {
                        let av = a[l * m + i];
                        if av == 0.0 {
                            continue;
                        }
                        let br = &b[l * n..l * n + n];
                        for j in 0..n {
                            c_row[j] += av * br[j];
                        }
                    }
                }
            }
        }
    };
    if ka * m * n >= PAR_THRESHOLD {
        c.par_chunks_mut(4 * n).enumerate().for_each(body);
    } else {
        c.chunks_mut(4 * n).enumerate().for_each(body);
    }
}

/// `c[m x n] += a * b^T` where `a` is `[m x kb]` and `b` is `[n x kb]`.
pub fn matmul_nt_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, kb: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(a.len(), m * kb);
    debug_assert_eq!(b.len(), n * kb);
    let body = |(i, c_row): (usize, &mut [f64])| {
        let ar = &a[i * kb..(i + 1) * kb];
        let mut j = 0;
        while j + 4 <= n {
            let b0 = &b[j * kb..(j + 1) * kb];
            let b1 = &b[(j + 1) * kb..(j + 2) * kb];
            let b2 = &b[(j + 2) * kb..(j + 3) * kb];
            let b3 = &b[(j + 3) * kb..(j + 4) * kb];
            let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
            for l in 0..kb {
                let av = ar[l];
                s0 += av * b0[l];
                s1 += av * b1[l];
                s2 += av * b2[l];
                s3 += av * b3[l];
            }
            c_row[j] += s0;
            c_row[j + 1] += s1;
            c_row[j + 2] += s2;
            c_row[j + 3] += s3;
            j += 4;
        }
        while j < n {
            let br = &b[j * kb..(j + 1) * kb];
            let mut s = 0.0;
            for l in 0..kb {
                s += ar[l] * br[l];
            }
            c_row[j] += s;
            j += 1;
        }
    };
    if m * kb * n >= PAR_THRESHOLD {
        c.par_chunks_mut(n).enumerate().for_each(body);
    } else {
        c.chunks_mut(n).enumerate().for_each(body);
    }
}
