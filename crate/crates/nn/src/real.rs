use firescope_core::Scalar;

/// Scalar type the engine computes in, with a matrix-multiply kernel and a
/// checkpoint dtype code.
pub trait Real: Scalar {
    /// Checkpoint dtype code.
    const DTYPE: u8;

    /// `c = alpha * a * b + beta * c` for row/column strided operands.
    ///
    /// # Safety
    /// Every index `i * rs + j * cs` reached by the `m x k`, `k x n` and
    /// `m x n` operands must lie inside the respective buffer. [`gemm`]
    /// checks this and is the safe entry point.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    const DTYPE: u8 = 1;

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    const DTYPE: u8 = 2;

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Strided matrix operand: `(data, row_stride, col_stride)`.
pub type MatRef<'a, T> = (&'a [T], usize, usize);

fn span(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

/// Safe `c = a * b + beta * c` with `a: m x k`, `b: k x n`, `c: m x n`.
pub fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: MatRef<'_, T>,
    b: MatRef<'_, T>,
    beta: T,
    c: (&mut [T], usize, usize),
) {
    assert!(span(m, k, a.1, a.2) <= a.0.len(), "gemm: lhs out of bounds");
    assert!(span(k, n, b.1, b.2) <= b.0.len(), "gemm: rhs out of bounds");
    assert!(span(m, n, c.1, c.2) <= c.0.len(), "gemm: output out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the extents were checked above; the output does not alias the
    // inputs because it is borrowed mutably.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            beta,
            c.0.as_mut_ptr(),
            c.1 as isize,
            c.2 as isize,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_triple_loop() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut c = vec![1.0; m * n];
        gemm(m, k, n, (&a, k, 1), (&b, n, 1), 0.5, (&mut c, n, 1));
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.5;
                for p in 0..k {
                    s += a[i * k + p] * b[p * n + j];
                }
                assert!((c[i * n + j] - s).abs() < 1e-12);
            }
        }
        // Transposed view of `a` as a k x m operand.
        let mut t = vec![0.0; k * k];
        gemm(k, m, k, (&a, 1, k), (&a, k, 1), 0.0, (&mut t, k, 1));
        let s: f64 = (0..m).map(|p| a[p * k] * a[p * k + 1]).sum();
        assert!((t[1] - s).abs() < 1e-12);
    }
}
