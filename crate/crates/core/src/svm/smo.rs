//! Sequential minimal optimization for the C-SVC dual
//!
//! ```text
//! max  sum(alpha) - 1/2 alpha' Q alpha
//! s.t. y' alpha = 0,  0 <= alpha_i <= C,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Each step picks the maximal violating pair (i, j) from the first-order
//! optimality conditions and solves the two-variable subproblem in closed
//! form. The stopping rule is `max_{I_up} -y G - min_{I_low} -y G <= tol`,
//! where `G = Q alpha - 1` is the dual gradient.

use super::cache::KernelRows;

/// Curvature floor for pairs with a non-positive second derivative.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Upper bound on pair updates.
    pub max_iter: u64,
    /// Kernel row cache budget in bytes.
    pub cache_bytes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 10_000_000,
            cache_bytes: 256 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Final maximal violating-pair gap.
    pub gap: f64,
    /// Largest KKT complementarity violation over the training points,
    /// measured on `y_i f(x_i)` with the final bias.
    pub max_violation: f64,
    /// Dual objective `sum(alpha) - 1/2 alpha' Q alpha`.
    pub objective: f64,
}

/// Solves the dual for labels `y` in {-1, +1} with box constraint `c`.
///
/// Starts from `alpha = 0`; deterministic for a given kernel matrix and
/// label order.
pub fn solve_dual<K: KernelRows + ?Sized>(kernel: &mut K, y: &[f64], c: f64, opts: &SolverOptions) -> DualSolution {
    let n = y.len();
    assert_eq!(kernel.size(), n, "kernel and label sizes differ");
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut row_i = vec![0.0; n];
    let mut iterations = 0u64;
    let mut converged = false;
    let mut gap;

    loop {
        let (i, j, g) = select_pair(&alpha, &grad, y, c);
        gap = g;
        let (Some(i), Some(j)) = (i, j) else {
            converged = true;
            break;
        };
        if gap <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        row_i.copy_from_slice(kernel.row(i));
        let kii = kernel.diagonal(i);
        let kjj = kernel.diagonal(j);
        let row_j = kernel.row(j);
        let kij = row_i[j];

        // Second derivative along the feasible direction; the same for
        // both label combinations once written with the raw kernel.
        let quad = positive(kii + kjj - 2.0 * kij);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;

        // G_k += Q_ki d_i + Q_kj d_j with Q_kt = y_k y_t K_kt
        let di = (ai - old_i) * y[i];
        let dj = (aj - old_j) * y[j];
        for k in 0..n {
            grad[k] += y[k] * (row_i[k] * di + row_j[k] * dj);
        }
    }

    let bias = compute_bias(&alpha, &grad, y, c);
    let max_violation = kkt_violation(&alpha, &grad, y, c, bias);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>();
    DualSolution {
        alpha,
        bias,
        iterations,
        converged,
        gap,
        max_violation,
        objective,
    }
}

fn positive(q: f64) -> f64 {
    if q > 0.0 {
        q
    } else {
        TAU
    }
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    if y > 0.0 {
        a < c
    } else {
        a > 0.0
    }
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    if y > 0.0 {
        a > 0.0
    } else {
        a < c
    }
}

/// Maximal violating pair: `i = argmax_{I_up} -y G`, `j = argmin_{I_low} -y G`.
/// Ties resolve to the lowest index.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> (Option<usize>, Option<usize>, f64) {
    let mut up = (None, f64::NEG_INFINITY);
    let mut low = (None, f64::INFINITY);
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && v > up.1 {
            up = (Some(t), v);
        }
        if in_low(alpha[t], y[t], c) && v < low.1 {
            low = (Some(t), v);
        }
    }
    (up.0, low.0, up.1 - low.1)
}

/// Bias as the mean of `-y G` over free multipliers, or the midpoint of the
/// feasible interval when every multiplier sits at a bound.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free_count += 1;
        } else {
            if in_up(alpha[t], y[t], c) {
                lower = lower.max(v);
            }
            if in_low(alpha[t], y[t], c) {
                upper = upper.min(v);
            }
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        0.0
    }
}

/// Max over points of the complementarity violation on the functional
/// margin `y_i f(x_i) = G_i + 1 + y_i b`.
fn kkt_violation(alpha: &[f64], grad: &[f64], y: &[f64], c: f64, bias: f64) -> f64 {
    (0..y.len())
        .map(|t| {
            let margin = grad[t] + 1.0 + y[t] * bias;
            margin_violation(alpha[t], c, margin)
        })
        .fold(0.0, f64::max)
}

/// Complementarity violation for one point given its functional margin.
pub fn margin_violation(alpha: f64, c: f64, margin: f64) -> f64 {
    if alpha <= 0.0 {
        (1.0 - margin).max(0.0)
    } else if alpha >= c {
        (margin - 1.0).max(0.0)
    } else {
        (margin - 1.0).abs()
    }
}
