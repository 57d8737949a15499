//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use softfail::synth::rng;

/// Sequential draws from the crate's counter-based generator.
pub struct Draws {
    seed: u64,
    stream: u64,
    counter: u64,
}

impl Draws {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            counter: 0,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.counter += 1;
        rng::uniform(self.seed, self.stream, self.counter)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.range(lo, hi)).collect()
    }
}

/// |X_k| for k in 0..=n/2 by direct O(n^2) summation.
pub fn naive_dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                // reduce the phase index first so large products stay exact
                let phase = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * phase.cos();
                im -= v * phase.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Orthogonal DCT-II by direct summation:
/// X_0 = sum(x) / sqrt(n), X_k = sqrt(2/n) sum x_i cos(pi (i + 1/2) k / n).
pub fn direct_dct(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            if k == 0 {
                x.iter().sum::<f64>() / nf.sqrt()
            } else {
                let s: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * (i as f64 + 0.5) * k as f64 / nf).cos())
                    .sum();
                (2.0 / nf).sqrt() * s
            }
        })
        .collect()
}

/// Hann window with period n, written out independently of the crate.
pub fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = (PI * i as f64 / n as f64).sin();
            s * s
        })
        .collect()
}

pub struct QpReference {
    pub alpha: Vec<f64>,
    pub objective: f64,
}

/// Dual objective sum(alpha) - 1/2 alpha' Q alpha.
pub fn dual_objective(q: &[Vec<f64>], alpha: &[f64]) -> f64 {
    let mut quad = 0.0;
    for (i, row) in q.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            quad += alpha[i] * v * alpha[j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto {0 <= a <= c, y'a = 0}, by bisection on the
/// multiplier of the equality constraint.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(a, y)| a * y).sum::<f64>();
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * span {
            break;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient ascent on the C-SVC dual, iterated until
/// the projected-gradient step moves the point by less than `tol`.
pub fn projected_gradient_qp(q: &[Vec<f64>], y: &[f64], c: f64, tol: f64) -> QpReference {
    let n = y.len();
    // the trace bounds the largest eigenvalue of a PSD matrix
    let lipschitz = (0..n).map(|i| q[i][i]).sum::<f64>() + 1e-12;
    let step = 1.0 / lipschitz;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 1.0 - q[i].iter().zip(a).map(|(qij, aj)| qij * aj).sum::<f64>())
            .collect()
    };
    let mut alpha = vec![0.0; n];
    let mut z = alpha.clone();
    let mut t = 1.0f64;
    let mut restarted = false;
    for _ in 0..5_000_000 {
        let g = grad(&z);
        let moved: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + step * gi).collect();
        let next = project(&moved, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let change = next
            .iter()
            .zip(&alpha)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // restart the momentum whenever the objective decreases; a plain
        // step from the current point is always accepted so rounding noise
        // near the optimum cannot stall the loop
        if !restarted && dual_objective(q, &next) < dual_objective(q, &alpha) {
            t = 1.0;
            z = alpha.clone();
            restarted = true;
            continue;
        }
        restarted = false;
        z = next
            .iter()
            .zip(&alpha)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        alpha = next;
        t = t_next;
        if change < tol {
            let g = grad(&alpha);
            let stepped: Vec<f64> = alpha.iter().zip(&g).map(|(a, gi)| a + step * gi).collect();
            let fixed = project(&stepped, y, c);
            let residual = fixed
                .iter()
                .zip(&alpha)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if residual < tol {
                break;
            }
        }
    }
    let objective = dual_objective(q, &alpha);
    QpReference { alpha, objective }
}

/// Q_ij = y_i y_j K(x_i, x_j) from raw vectors.
pub fn signed_gram(x: &[Vec<f64>], y: &[f64], k: impl Fn(&[f64], &[f64]) -> f64) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|i| (0..x.len()).map(|j| y[i] * y[j] * k(&x[i], &x[j])).collect())
        .collect()
}
