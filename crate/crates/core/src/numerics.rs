//! Small dense-free linear algebra and quadrature helpers.

/// Solves a tridiagonal system in place by forward elimination and back substitution.
///
/// `lower[0]` and `upper[n-1]` are ignored. Returns `None` on a zero pivot.
/// The matrices assembled by the obstacle solver are diagonally dominant, so
/// no pivoting is needed.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Option<()> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Some(());
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Some(())
}

/// Running trapezoid integral from each node to the last one: `out[i] = int_{x_i}^{x_last} f`.
pub fn tail_trapezoid(xs: &[f64], fs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + 0.5 * (fs[i] + fs[i + 1]) * (xs[i + 1] - xs[i]);
    }
    out
}

/// Index `i` with `xs[i] <= x < xs[i+1]` on a sorted grid, clamped to `[0, len-2]`.
pub fn bracket(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    debug_assert!(n >= 2);
    match xs.partition_point(|&v| v <= x) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    }
}

/// Least-squares projection onto nonincreasing sequences (pool adjacent violators).
pub fn isotonic_nonincreasing(values: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight).
    let mut blocks: Vec<(f64, f64)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1.0));
        while blocks.len() >= 2 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks present");
            *last = ((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, w) in blocks {
        out.extend(std::iter::repeat(m).take(w as usize));
    }
    out
}
