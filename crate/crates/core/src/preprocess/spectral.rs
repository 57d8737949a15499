use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::Fft;

use super::Matrix;

/// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / N)`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Windowed FFT magnitudes of every hop that fits inside `frame`.
pub(super) fn stft_magnitudes(frame: &[f64], fft: &dyn Fft<f64>, window: &[f64], stride: usize) -> Matrix {
    let n = window.len();
    let n_t = (frame.len() - n) / stride + 1;
    let half = n / 2 + 1;
    let mut out = Matrix::zeros(n_t, half);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for r in 0..n_t {
        let seg = &frame[r * stride..r * stride + n];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (o, c) in out.row_mut(r).iter_mut().zip(&buf[..half]) {
            *o = c.norm();
        }
    }
    out
}

/// Averages groups of `factor` adjacent columns (the last group takes what
/// remains) and applies `ln(mean + epsilon)`.
pub(super) fn compress_spectrum(spec: &Matrix, factor: usize, epsilon: f64) -> Matrix {
    let bins = spec.cols().div_ceil(factor);
    let mut out = Matrix::zeros(spec.rows(), bins);
    for r in 0..spec.rows() {
        let row = spec.row(r);
        for (j, chunk) in row.chunks(factor).enumerate() {
            let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
            out.set(r, j, (mean + epsilon).ln());
        }
    }
    out
}
