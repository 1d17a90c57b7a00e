//! Row-major GEMM on top of `matrixmultiply`.

/// `C(m×n) = op(A)(m×k) · op(B)(k×n) + beta·C`.
///
/// `A` is stored row-major as `m×k`, or as `k×m` when `a_trans` is set; the
/// same convention applies to `B`. `C` is row-major `m×n`. With `beta == 0`
/// the previous contents of `C` are ignored.
const SMALL_ROWS: usize = 4;

fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (xc, xr) = x.split_at(x.len() / 4 * 4);
    let (yc, yr) = y.split_at(xc.len());
    for (p, q) in xc.chunks_exact(4).zip(yc.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += p[l] * q[l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (p, q) in xr.iter().zip(yr) {
        s += p * q;
    }
    s
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k, "gemm: A too short");
    assert!(b.len() >= k * n, "gemm: B too short");
    assert!(c.len() >= m * n, "gemm: C too short");
    if m <= SMALL_ROWS && !a_trans && b_trans {
        // Row-times-weights products for single samples and tiny batches:
        // packing overhead dominates in dgemm at this size.
        for i in 0..m {
            let row = &a[i * k..(i + 1) * k];
            for j in 0..n {
                let d = dot(row, &b[j * k..(j + 1) * k]);
                let out = &mut c[i * n + j];
                *out = if beta == 0.0 { d } else { beta * *out + d };
            }
        }
        return;
    }
    let (rsa, csa) = if a_trans { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_trans { (1, k) } else { (n, 1) };
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
