use std::f64::consts::PI;

use super::Matrix;

/// Orthonormal DCT-II matrix of size `n`:
/// `T[k][i] = s_k cos(pi (i + 1/2) k / n)` with `s_0 = sqrt(1/n)` and
/// `s_k = sqrt(2/n)` otherwise.
pub fn dct_matrix(n: usize) -> Matrix {
    let mut t = Matrix::zeros(n, n);
    let nf = n as f64;
    for k in 0..n {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            t.set(k, i, scale * (PI * (i as f64 + 0.5) * k as f64 / nf).cos());
        }
    }
    t
}

/// Orthonormal DCT-II of one sequence.
pub fn dct_ortho(x: &[f64]) -> Vec<f64> {
    let t = dct_matrix(x.len());
    (0..x.len())
        .map(|k| t.row(k).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Applies `t` to every column of `m` (the time sequence of each bin).
pub(super) fn transform_columns(t: &Matrix, m: &Matrix) -> Matrix {
    let n = m.rows();
    assert_eq!(t.rows(), n, "transform size must match the number of time steps");
    let mut out = Matrix::zeros(n, m.cols());
    for k in 0..n {
        let basis = t.row(k);
        for c in 0..m.cols() {
            let mut acc = 0.0;
            for (i, &b) in basis.iter().enumerate() {
                acc += b * m.get(i, c);
            }
            out.set(k, c, acc);
        }
    }
    out
}
