//! Soft-margin kernel SVM (C-SVC) trained by SMO, combined one-vs-rest into
//! a four-class frame classifier.
//!
//! Each class machine uses its own box constraint
//! `C_cls = factor * (N / N_cls) * C_hat`, which weights rare classes up.
//! Prediction takes the argmax of the raw decision values; ties go to the
//! earlier label in [`FailureLabel::ALL`] order.

mod cache;
mod kernel;
mod model_io;
mod smo;

use rayon::prelude::*;

use crate::dataset::{class_counts, FailureLabel};
use crate::error::{Error, Result};
use crate::preprocess::{FeatureVector, PreprocessConfig};

pub use cache::{CachedKernel, DenseGram, KernelRows};
pub use kernel::Kernel;
pub use model_io::{read_model, write_model, MODEL_FORMAT_TAG, MODEL_FORMAT_VERSION};
pub use smo::{margin_violation, solve_dual, DualSolution, SolverOptions};

/// Multipliers below this are dropped from the finished model.
pub const ALPHA_PRUNE: f64 = 1e-12;

/// Default class-weight factor in `C_cls = factor * (N / N_cls) * C_hat`.
pub const DEFAULT_CLASS_WEIGHT_FACTOR: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingStatus {
    pub converged: bool,
    pub iterations: u64,
    pub max_violation: f64,
}

/// A trained binary machine: `f(x) = sum_i coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub kernel: Kernel,
    pub c: f64,
    pub bias: f64,
    pub dim: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `y_i * alpha_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub status: TrainingStatus,
}

impl BinarySvm {
    /// Keeps the points whose multiplier is at least [`ALPHA_PRUNE`], in
    /// training order.
    pub fn from_solution(vectors: &[&[f64]], y: &[f64], sol: &DualSolution, kernel: Kernel, c: f64) -> Self {
        let dim = vectors.first().map_or(0, |v| v.len());
        let mut support_vectors = Vec::new();
        let mut dual_coefs = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a >= ALPHA_PRUNE {
                support_vectors.push(vectors[i].to_vec());
                dual_coefs.push(y[i] * a);
            }
        }
        Self {
            kernel,
            c,
            bias: sol.bias,
            dim,
            support_vectors,
            dual_coefs,
            status: TrainingStatus {
                converged: sol.converged,
                iterations: sol.iterations,
                max_violation: sol.max_violation,
            },
        }
    }

    /// Pre-sign decision value.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let mut acc = 0.0;
        for (coef, sv) in self.dual_coefs.iter().zip(&self.support_vectors) {
            acc += coef * self.kernel.eval(sv, x);
        }
        Ok(acc + self.bias)
    }

    pub fn n_support(&self) -> usize {
        self.support_vectors.len()
    }
}

/// Trains one binary C-SVC. Labels must be -1 or +1 with both present.
pub fn train_binary(
    x: &[&[f64]],
    y: &[f64],
    kernel: Kernel,
    c: f64,
    opts: &SolverOptions,
) -> Result<BinarySvm> {
    kernel.validate()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    if x.len() != y.len() {
        return Err(Error::Config(format!("{} vectors but {} labels", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Empty("binary training needs at least two points".into()));
    }
    if let Some(v) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
        return Err(Error::Config(format!("binary labels must be -1 or +1, got {v}")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        let only = if y[0] > 0.0 { "+1" } else { "-1" };
        return Err(Error::SingleClass(only.into()));
    }
    let dim = x[0].len();
    if let Some(v) = x.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    let mut rows = CachedKernel::new(x, kernel, opts.cache_bytes);
    let sol = solve_dual(&mut rows, y, c, opts);
    Ok(BinarySvm::from_solution(x, y, &sol, kernel, c))
}

/// Shared hyperparameters of the class machines.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c_hat: f64,
    pub class_weight_factor: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: Kernel::Rbf { gamma: 5.7e-4 },
            c_hat: 1.1,
            class_weight_factor: DEFAULT_CLASS_WEIGHT_FACTOR,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c_hat.is_finite() && self.c_hat > 0.0) {
            return Err(Error::Config(format!("C_hat must be positive, got {}", self.c_hat)));
        }
        if !(self.class_weight_factor.is_finite() && self.class_weight_factor > 0.0) {
            return Err(Error::Config(format!(
                "class weight factor must be positive, got {}",
                self.class_weight_factor
            )));
        }
        Ok(())
    }
}

/// `factor * (n_total / n_class) * c_hat`.
pub fn class_c(n_total: usize, n_class: usize, c_hat: f64, factor: f64) -> f64 {
    factor * (n_total as f64 / n_class as f64) * c_hat
}

/// One class machine's raw solver output.
#[derive(Debug, Clone)]
pub struct ClassSolution {
    pub label: FailureLabel,
    pub c: f64,
    pub y: Vec<f64>,
    pub solution: DualSolution,
}

/// Solves the one-vs-rest duals for every label present in `labels`, in
/// label order. `make_rows` supplies a kernel matrix over the same points
/// for each class; the classes are solved in parallel.
pub fn solve_one_vs_rest<K, F>(
    labels: &[FailureLabel],
    c_hat: f64,
    factor: f64,
    opts: &SolverOptions,
    make_rows: F,
) -> Result<Vec<ClassSolution>>
where
    K: KernelRows,
    F: Fn() -> K + Sync,
{
    let counts = class_counts(labels.iter().copied());
    let present: Vec<FailureLabel> = counts.iter().filter(|(_, &n)| n > 0).map(|(&l, _)| l).collect();
    match present.len() {
        0 => return Err(Error::Empty("no training frames".into())),
        1 => return Err(Error::SingleClass(present[0].to_string())),
        _ => {}
    }
    for (label, n) in &counts {
        if *n == 0 {
            log::warn!("class {label} has no training frames; no machine is trained for it");
        }
    }
    let n_total = labels.len();
    Ok(present
        .par_iter()
        .map(|&label| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == label { 1.0 } else { -1.0 }).collect();
            let c = class_c(n_total, counts[&label], c_hat, factor);
            let mut rows = make_rows();
            let solution = solve_dual(&mut rows, &y, c, opts);
            ClassSolution { label, c, y, solution }
        })
        .collect())
}

/// One binary machine per class plus the feature configuration it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassSvm {
    pub preprocess: PreprocessConfig,
    pub kernel: Kernel,
    pub c_hat: f64,
    pub class_weight_factor: f64,
    /// Class machines in label order.
    pub machines: Vec<(FailureLabel, BinarySvm)>,
}

impl MultiClassSvm {
    pub fn feature_len(&self) -> usize {
        self.preprocess.feature_len()
    }

    /// Decision value of every class machine, in label order.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<(FailureLabel, f64)>> {
        self.machines
            .iter()
            .map(|(l, m)| Ok((*l, m.decision_value(x)?)))
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<FailureLabel> {
        argmax_label(&self.decision_values(x)?)
            .ok_or_else(|| Error::Model("model has no class machines".into()))
    }

    pub fn converged(&self) -> bool {
        self.machines.iter().all(|(_, m)| m.status.converged)
    }
}

/// Label with the largest value; ties keep the earlier label.
pub fn argmax_label(values: &[(FailureLabel, f64)]) -> Option<FailureLabel> {
    let mut sorted: Vec<&(FailureLabel, f64)> = values.iter().collect();
    sorted.sort_by_key(|(l, _)| *l);
    let mut best: Option<&(FailureLabel, f64)> = None;
    for v in sorted {
        if best.is_none_or(|b| v.1 > b.1) {
            best = Some(v);
        }
    }
    best.map(|b| b.0)
}

/// Trains the one-vs-rest classifier on featurized frames.
pub fn train_multiclass(
    samples: &[FeatureVector],
    preprocess: &PreprocessConfig,
    params: &SvmParams,
    opts: &SolverOptions,
) -> Result<MultiClassSvm> {
    params.validate()?;
    preprocess.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("no training frames".into()));
    }
    let dim = preprocess.feature_len();
    if let Some(s) = samples.iter().find(|s| s.values.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: s.values.len(),
        });
    }
    let vectors: Vec<&[f64]> = samples.iter().map(|s| s.values.as_slice()).collect();
    let labels: Vec<FailureLabel> = samples.iter().map(|s| s.label).collect();
    let kernel = params.kernel;
    let solutions = solve_one_vs_rest(&labels, params.c_hat, params.class_weight_factor, opts, || {
        CachedKernel::new(&vectors, kernel, opts.cache_bytes)
    })?;
    let machines = solutions
        .iter()
        .map(|s| (s.label, BinarySvm::from_solution(&vectors, &s.y, &s.solution, kernel, s.c)))
        .collect();
    Ok(MultiClassSvm {
        preprocess: PreprocessConfig {
            allow_padding: true,
            ..preprocess.clone()
        },
        kernel,
        c_hat: params.c_hat,
        class_weight_factor: params.class_weight_factor,
        machines,
    })
}
