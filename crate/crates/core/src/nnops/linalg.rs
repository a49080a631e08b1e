// Row-major matrix products over raw slices. The loop orders keep the
// innermost loop a contiguous axpy or dot so the compiler can vectorize it.

/// `a (m, k) * b (k, n)`.
pub(crate) fn matmul(a: &[f32], m: usize, k: usize, b: &[f32], n: usize) -> Vec<f32> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0f32; m * n];
    for (a_row, o_row) in a.chunks_exact(k).zip(out.chunks_exact_mut(n)) {
        for (&av, b_row) in a_row.iter().zip(b.chunks_exact(n)) {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `aᵀ b` for `a (r, m)` and `b (r, n)`, giving `(m, n)`.
pub(crate) fn matmul_at_b(a: &[f32], r: usize, m: usize, b: &[f32], n: usize) -> Vec<f32> {
    debug_assert_eq!(a.len(), r * m);
    debug_assert_eq!(b.len(), r * n);
    let mut out = vec![0.0f32; m * n];
    for (a_row, b_row) in a.chunks_exact(m).zip(b.chunks_exact(n)) {
        for (&av, o_row) in a_row.iter().zip(out.chunks_exact_mut(n)) {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a bᵀ` for `a (m, k)` and `b (n, k)`, giving `(m, n)`.
pub(crate) fn matmul_a_bt(a: &[f32], m: usize, k: usize, b: &[f32], n: usize) -> Vec<f32> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut out = Vec::with_capacity(m * n);
    for a_row in a.chunks_exact(k) {
        for b_row in b.chunks_exact(k) {
            out.push(a_row.iter().zip(b_row).map(|(x, y)| x * y).sum());
        }
    }
    out
}
