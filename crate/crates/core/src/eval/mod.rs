//! Detection metrics and hyperparameter search.
//!
//! False-negative and false-positive rates are fractions of all evaluated
//! frames; the failure detection rate is a fraction of the true failure
//! frames (any non-OK prediction counts as detected). Raw confusion counts
//! are always reported alongside so other conventions can be recomputed.

mod grid;

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::{Dataset, FailureLabel};
use crate::error::{Error, Result};
use crate::preprocess::FeatureExtractor;
use crate::svm::MultiClassSvm;

pub use grid::{
    grid_search, logspace, select_best, GridOutcome, GridPoint, GridSearchOptions, GridSearchResult, HyperGrid,
    KernelKind, GRID_TSV_HEADER,
};

const N: usize = 4;

/// Confusion counts (true x predicted) and the metrics derived from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationReport {
    confusion: [[usize; N]; N],
}

impl EvaluationReport {
    pub fn from_confusion(confusion: [[usize; N]; N]) -> Self {
        Self { confusion }
    }

    pub fn from_labels(truth: &[FailureLabel], predicted: &[FailureLabel]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::Empty("no frames to evaluate".into()));
        }
        if truth.len() != predicted.len() {
            return Err(Error::Config(format!(
                "{} true labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = [[0usize; N]; N];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.index()][p.index()] += 1;
        }
        Ok(Self { confusion })
    }

    pub fn confusion(&self) -> &[[usize; N]; N] {
        &self.confusion
    }

    pub fn n_frames(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..N).map(|i| self.confusion[i][i]).sum()
    }

    /// Frames of class `c` predicted as something else.
    pub fn fn_count(&self, c: FailureLabel) -> usize {
        let i = c.index();
        self.confusion[i].iter().sum::<usize>() - self.confusion[i][i]
    }

    /// Frames of another class predicted as `c`.
    pub fn fp_count(&self, c: FailureLabel) -> usize {
        let j = c.index();
        (0..N).map(|i| self.confusion[i][j]).sum::<usize>() - self.confusion[j][j]
    }

    fn fraction(&self, count: usize) -> f64 {
        count as f64 / self.n_frames() as f64
    }

    pub fn per_class_fn(&self, c: FailureLabel) -> f64 {
        self.fraction(self.fn_count(c))
    }

    pub fn per_class_fp(&self, c: FailureLabel) -> f64 {
        self.fraction(self.fp_count(c))
    }

    pub fn subset_accuracy(&self) -> f64 {
        self.fraction(self.correct())
    }

    pub fn failure_frames(&self) -> usize {
        self.confusion[1..].iter().flatten().sum()
    }

    pub fn detected_failures(&self) -> usize {
        self.confusion[1..].iter().map(|row| row[1..].iter().sum::<usize>()).sum()
    }

    /// Share of true failure frames predicted as any failure class; 1.0 when
    /// there are no failure frames.
    pub fn failure_detection_rate(&self) -> f64 {
        match self.failure_frames() {
            0 => 1.0,
            n => self.detected_failures() as f64 / n as f64,
        }
    }

    /// Fixed-width table for terminals.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24}{:>10}{:>10}{:>10}{:>14}", "", "OK", "Impact", "HighAcc", "Oscillations");
        let pct = |v: f64| format!("{:.1}%", 100.0 * v);
        let row = |name: &str, f: &dyn Fn(FailureLabel) -> f64| {
            let v: Vec<String> = FailureLabel::ALL.iter().map(|&l| pct(f(l))).collect();
            format!("{name:<24}{:>10}{:>10}{:>10}{:>14}\n", v[0], v[1], v[2], v[3])
        };
        s.push_str(&row("False negative errors", &|l| self.per_class_fn(l)));
        s.push_str(&row("False positive errors", &|l| self.per_class_fp(l)));
        let _ = writeln!(s, "{:<24}{:>10}", "Failure detection rate", pct(self.failure_detection_rate()));
        let _ = writeln!(s, "{:<24}{:>10}", "Subset accuracy", pct(self.subset_accuracy()));
        let _ = writeln!(s, "{:<24}{:>10}", "Frames", self.n_frames());
        let _ = writeln!(s, "\nConfusion (rows: true, columns: predicted)");
        for (i, l) in FailureLabel::ALL.iter().enumerate() {
            let c = &self.confusion[i];
            let _ = writeln!(s, "{:<24}{:>10}{:>10}{:>10}{:>14}", l.to_string(), c[0], c[1], c[2], c[3]);
        }
        s
    }

    /// Tab-separated metrics and confusion counts.
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("metric\tOK\tImpact\tHighAcc\tOscillations\n");
        let line = |name: &str, f: &dyn Fn(FailureLabel) -> String| {
            let v: Vec<String> = FailureLabel::ALL.iter().map(|&l| f(l)).collect();
            format!("{name}\t{}\n", v.join("\t"))
        };
        s.push_str(&line("false_negative", &|l| self.per_class_fn(l).to_string()));
        s.push_str(&line("false_positive", &|l| self.per_class_fp(l).to_string()));
        for (i, l) in FailureLabel::ALL.iter().enumerate() {
            let name = format!("confusion_true_{}", l.key());
            s.push_str(&line(&name, &|p| self.confusion[i][p.index()].to_string()));
        }
        let _ = writeln!(s, "failure_detection_rate\t{}", self.failure_detection_rate());
        let _ = writeln!(s, "subset_accuracy\t{}", self.subset_accuracy());
        let _ = writeln!(s, "n_frames\t{}", self.n_frames());
        s
    }
}

/// Featurizes `ds` with the model's preprocessing and scores every frame.
/// Validation datasets are framed without padding.
pub fn evaluate(model: &MultiClassSvm, ds: &Dataset) -> Result<EvaluationReport> {
    let extractor = FeatureExtractor::new(model.preprocess.clone())?;
    let features = extractor.featurize(ds);
    if features.is_empty() {
        return Err(Error::Empty("validation set produced no frames".into()));
    }
    let predicted = features
        .par_iter()
        .map(|f| model.predict(&f.values))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<FailureLabel> = features.iter().map(|f| f.label).collect();
    EvaluationReport::from_labels(&truth, &predicted)
}
