use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::EvaluationReport;
use crate::dataset::{Dataset, FailureLabel};
use crate::error::{Error, Result};
use crate::preprocess::{FeatureExtractor, FeatureVector, PreprocessConfig};
use crate::svm::{argmax_label, solve_one_vs_rest, DenseGram, Kernel, SolverOptions, ALPHA_PRUNE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// Cartesian grid over FFT stride, `C_hat` and (RBF only) gamma.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub kernel: KernelKind,
    pub fft_strides: Vec<usize>,
    pub c_hats: Vec<f64>,
    pub gammas: Vec<f64>,
}

/// `n` points spaced evenly in log10 between `10^lo` and `10^hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![10f64.powf(lo)],
        _ => (0..n)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

impl HyperGrid {
    pub fn default_for(kernel: KernelKind) -> Self {
        Self {
            kernel,
            fft_strides: vec![201, 401, 601, 834, 1200],
            c_hats: logspace(-2.0, 2.0, 9),
            gammas: match kernel {
                KernelKind::Linear => vec![],
                KernelKind::Rbf => logspace(-5.0, -1.0, 9),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_strides.is_empty() || self.c_hats.is_empty() {
            return Err(Error::Config("grid lists must be non-empty".into()));
        }
        if self.kernel == KernelKind::Rbf && self.gammas.is_empty() {
            return Err(Error::Config("RBF grid needs at least one gamma".into()));
        }
        if self.fft_strides.contains(&0) {
            return Err(Error::Config("FFT strides must be positive".into()));
        }
        if self.c_hats.iter().chain(&self.gammas).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("C_hat and gamma values must be positive".into()));
        }
        Ok(())
    }

    /// All combinations, stride-major, then `C_hat`, then gamma.
    pub fn points(&self) -> Vec<GridPoint> {
        let gammas: Vec<Option<f64>> = match self.kernel {
            KernelKind::Linear => vec![None],
            KernelKind::Rbf => self.gammas.iter().map(|&g| Some(g)).collect(),
        };
        let mut out = Vec::new();
        for &fft_stride in &self.fft_strides {
            for &c_hat in &self.c_hats {
                for &gamma in &gammas {
                    out.push(GridPoint {
                        index: out.len(),
                        fft_stride,
                        c_hat,
                        gamma,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub fft_stride: usize,
    pub c_hat: f64,
    pub gamma: Option<f64>,
}

impl GridPoint {
    pub fn kernel(&self) -> Kernel {
        match self.gamma {
            Some(gamma) => Kernel::Rbf { gamma },
            None => Kernel::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub point: GridPoint,
    pub report: EvaluationReport,
    /// False when any class machine hit the iteration cap.
    pub converged: bool,
}

pub const GRID_TSV_HEADER: &str = "index\tfft_stride\tc_hat\tgamma\tconverged\tsubset_accuracy\tfailure_detection_rate\tfn_ok\tfn_impact\tfn_highacc\tfn_oscillations\tfp_ok\tfp_impact\tfp_highacc\tfp_oscillations\tn_frames\tconfusion";

impl GridOutcome {
    /// One TSV row; the trailing field holds the 16 confusion counts
    /// (row-major, comma separated) so the report can be rebuilt exactly.
    pub fn to_tsv_row(&self) -> String {
        let r = &self.report;
        let mut s = format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.point.index,
            self.point.fft_stride,
            self.point.c_hat,
            self.point.gamma.map_or("-".to_string(), |g| g.to_string()),
            self.converged,
            r.subset_accuracy(),
            r.failure_detection_rate()
        );
        for l in FailureLabel::ALL {
            let _ = write!(s, "\t{}", r.per_class_fn(l));
        }
        for l in FailureLabel::ALL {
            let _ = write!(s, "\t{}", r.per_class_fp(l));
        }
        let counts: Vec<String> = r.confusion().iter().flatten().map(|c| c.to_string()).collect();
        let _ = write!(s, "\t{}\t{}", r.n_frames(), counts.join(","));
        s
    }

    pub fn from_tsv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split('\t').collect();
        let bad = || Error::Config(format!("malformed grid row `{line}`"));
        if f.len() != 17 {
            return Err(bad());
        }
        let gamma = match f[3] {
            "-" => None,
            g => Some(g.parse().map_err(|_| bad())?),
        };
        let point = GridPoint {
            index: f[0].parse().map_err(|_| bad())?,
            fft_stride: f[1].parse().map_err(|_| bad())?,
            c_hat: f[2].parse().map_err(|_| bad())?,
            gamma,
        };
        let converged = f[4].parse().map_err(|_| bad())?;
        let counts: Vec<usize> = f[16]
            .split(',')
            .map(|c| c.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if counts.len() != 16 {
            return Err(bad());
        }
        let mut confusion = [[0usize; 4]; 4];
        for (i, c) in counts.into_iter().enumerate() {
            confusion[i / 4][i % 4] = c;
        }
        Ok(Self {
            point,
            report: EvaluationReport::from_confusion(confusion),
            converged,
        })
    }
}

/// Settings shared by every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOptions {
    /// Preprocessing template; its `fft_stride` is replaced per point.
    pub preprocess: PreprocessConfig,
    pub class_weight_factor: f64,
    pub solver: SolverOptions,
}

impl Default for GridSearchOptions {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            class_weight_factor: crate::svm::DEFAULT_CLASS_WEIGHT_FACTOR,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    /// One outcome per grid point, in grid order.
    pub outcomes: Vec<GridOutcome>,
    /// Position of the selected outcome.
    pub best: usize,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridOutcome {
        &self.outcomes[self.best]
    }

    pub fn render_tsv(&self) -> String {
        let mut s = format!("{GRID_TSV_HEADER}\n");
        for o in &self.outcomes {
            s.push_str(&o.to_tsv_row());
            s.push('\n');
        }
        s
    }
}

/// Picks the outcome with the highest subset accuracy, then the highest
/// failure detection rate, then the smallest FFT stride, then the earliest
/// grid index.
pub fn select_best(outcomes: &[GridOutcome]) -> Option<usize> {
    (0..outcomes.len()).min_by(|&a, &b| {
        let (x, y) = (&outcomes[a], &outcomes[b]);
        y.report
            .subset_accuracy()
            .total_cmp(&x.report.subset_accuracy())
            .then(y.report.failure_detection_rate().total_cmp(&x.report.failure_detection_rate()))
            .then(x.point.fft_stride.cmp(&y.point.fft_stride))
            .then(x.point.index.cmp(&y.point.index))
    })
}

/// Pairwise [`Kernel::base`] values between `rows` and `cols`, row-major.
fn base_matrix(kernel: Kernel, rows: &[FeatureVector], cols: &[FeatureVector]) -> Vec<f64> {
    rows.par_iter()
        .flat_map_iter(|r| cols.iter().map(move |c| kernel.base(&r.values, &c.values)))
        .collect()
}

/// Trains and scores one model per grid point.
///
/// Points listed in `completed` are taken as already evaluated and skipped;
/// `on_done` is called for every newly evaluated point (possibly from
/// several threads). Results match training the full
/// [`crate::svm::MultiClassSvm`] for the point and running
/// [`super::evaluate`] on `val`.
pub fn grid_search(
    train: &Dataset,
    val: &Dataset,
    grid: &HyperGrid,
    options: &GridSearchOptions,
    completed: &BTreeMap<usize, GridOutcome>,
    on_done: &(dyn Fn(&GridOutcome) + Sync),
) -> Result<GridSearchResult> {
    grid.validate()?;
    let base = &options.preprocess;
    let class_weight_factor = options.class_weight_factor;
    let opts = &options.solver;
    let points = grid.points();
    let mut outcomes: Vec<GridOutcome> = Vec::with_capacity(points.len());

    for &stride in &grid.fft_strides {
        let todo: Vec<GridPoint> = points
            .iter()
            .filter(|p| p.fft_stride == stride && !completed.contains_key(&p.index))
            .copied()
            .collect();
        if todo.is_empty() {
            continue;
        }
        let cfg = PreprocessConfig {
            fft_stride: stride,
            ..base.clone()
        };
        let extractor = FeatureExtractor::new(cfg)?;
        let train_fv = extractor.featurize(train);
        let val_fv = extractor.featurize(val);
        if val_fv.is_empty() {
            return Err(Error::Empty("validation set produced no frames".into()));
        }
        let labels: Vec<FailureLabel> = train_fv.iter().map(|f| f.label).collect();
        let truth: Vec<FailureLabel> = val_fv.iter().map(|f| f.label).collect();
        let base_kernel = todo[0].kernel();
        let gram_base = base_matrix(base_kernel, &train_fv, &train_fv);
        // row i holds base(train_i, val_v) for every v: support vector first,
        // matching the argument order of BinarySvm::decision_value
        let cross_base = base_matrix(base_kernel, &train_fv, &val_fv);
        let m = train_fv.len();
        let nv = val_fv.len();

        let done: Vec<GridOutcome> = todo
            .par_iter()
            .map(|p| -> Result<GridOutcome> {
                let kernel = p.kernel();
                let gram: Vec<f64> = gram_base.iter().map(|&b| kernel.finish(b)).collect();
                let cross: Vec<f64> = cross_base.iter().map(|&b| kernel.finish(b)).collect();
                let classes = solve_one_vs_rest(&labels, p.c_hat, class_weight_factor, opts, || {
                    DenseGram::new(&gram, m)
                })?;
                let converged = classes.iter().all(|c| c.solution.converged);
                let predicted: Vec<FailureLabel> = (0..nv)
                    .map(|v| {
                        let values: Vec<(FailureLabel, f64)> = classes
                            .iter()
                            .map(|c| {
                                let mut acc = 0.0;
                                for (i, &a) in c.solution.alpha.iter().enumerate() {
                                    if a >= ALPHA_PRUNE {
                                        acc += (c.y[i] * a) * cross[i * nv + v];
                                    }
                                }
                                (c.label, acc + c.solution.bias)
                            })
                            .collect();
                        argmax_label(&values).expect("at least two classes")
                    })
                    .collect();
                let outcome = GridOutcome {
                    point: *p,
                    report: EvaluationReport::from_labels(&truth, &predicted)?,
                    converged,
                };
                if !converged {
                    log::warn!("grid point {} did not converge", p.index);
                }
                on_done(&outcome);
                Ok(outcome)
            })
            .collect::<Result<_>>()?;
        outcomes.extend(done);
    }
    for p in &points {
        if let Some(o) = completed.get(&p.index) {
            if o.point.fft_stride != p.fft_stride
                || o.point.c_hat != p.c_hat
                || o.point.gamma != p.gamma
            {
                return Err(Error::Config(format!(
                    "journal entry {} does not match the current grid",
                    p.index
                )));
            }
            outcomes.push(o.clone());
        }
    }
    outcomes.sort_by_key(|o| o.point.index);
    let best = select_best(&outcomes).ok_or_else(|| Error::Empty("empty grid".into()))?;
    Ok(GridSearchResult { outcomes, best })
}
