//! Scalar noise-pressure estimation from joint-velocity logs.
//!
//! The estimate for one time step is the Euclidean norm over all actual and
//! desired joint velocities, `sqrt(|qdot|^2 + |qdot_desired|^2)`. Physical
//! scaling constants are dropped, so the trace is in arbitrary units.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Relative tolerance on timestep uniformity.
pub const TIMESTEP_TOLERANCE: f64 = 1e-9;

/// Actual and desired joint velocities on a shared, uniformly spaced time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    timestamps: Vec<f64>,
    qdot: Vec<Vec<f64>>,
    qdot_desired: Vec<Vec<f64>>,
}

impl JointTrajectory {
    /// Builds a trajectory from per-row velocity vectors.
    ///
    /// Requires at least two rows (the sample rate is derived from the
    /// timestep), at least one actual-velocity column, consistent row widths
    /// and a uniform timestep.
    pub fn new(
        timestamps: Vec<f64>,
        qdot: Vec<Vec<f64>>,
        qdot_desired: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::Trajectory("trajectory has no rows".into()));
        }
        if timestamps.len() < 2 {
            return Err(Error::Trajectory(
                "at least two rows are needed to determine the sample rate".into(),
            ));
        }
        if qdot.len() != timestamps.len() || qdot_desired.len() != timestamps.len() {
            return Err(Error::Trajectory(format!(
                "row count mismatch: {} timestamps, {} actual rows, {} desired rows",
                timestamps.len(),
                qdot.len(),
                qdot_desired.len()
            )));
        }
        let n = qdot[0].len();
        if n == 0 {
            return Err(Error::Trajectory(
                "at least one actual-velocity column is required".into(),
            ));
        }
        let m = qdot_desired[0].len();
        for (i, (a, d)) in qdot.iter().zip(&qdot_desired).enumerate() {
            if a.len() != n || d.len() != m {
                return Err(Error::Trajectory(format!(
                    "row {i} has {} actual / {} desired columns, expected {n} / {m}",
                    a.len(),
                    d.len()
                )));
            }
        }
        if let Some(i) = timestamps.iter().position(|t| !t.is_finite()) {
            return Err(Error::Trajectory(format!("timestamp {i} is not finite")));
        }
        let step = timestamps[1] - timestamps[0];
        if step <= 0.0 {
            return Err(Error::Trajectory(
                "timestamps must be strictly increasing (first offending index 1)".into(),
            ));
        }
        for i in 1..timestamps.len() {
            let dt = timestamps[i] - timestamps[i - 1];
            if dt <= 0.0 {
                return Err(Error::Trajectory(format!(
                    "timestamps must be strictly increasing (first offending index {i})"
                )));
            }
            if (dt - step).abs() > TIMESTEP_TOLERANCE * step {
                return Err(Error::Trajectory(format!(
                    "non-uniform timestep at index {i}: {dt} s vs {step} s"
                )));
            }
        }
        Ok(Self {
            timestamps,
            qdot,
            qdot_desired,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn actual_columns(&self) -> usize {
        self.qdot[0].len()
    }

    pub fn desired_columns(&self) -> usize {
        self.qdot_desired[0].len()
    }

    /// Mean timestep over the whole trajectory.
    pub fn timestep(&self) -> f64 {
        let n = self.timestamps.len();
        (self.timestamps[n - 1] - self.timestamps[0]) / (n - 1) as f64
    }
}

/// Uniformly sampled, non-negative noise-pressure signal.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    sample_rate: f64,
    samples: Vec<f64>,
}

impl NoiseTrace {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::Empty("noise trace has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config(format!(
                "noise sample {i} is {} (must be finite and non-negative)",
                samples[i]
            )));
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Computes `sqrt(|qdot|^2 + |qdot_desired|^2)` for every row.
pub fn estimate_noise(traj: &JointTrajectory) -> NoiseTrace {
    let samples = traj
        .qdot
        .iter()
        .zip(&traj.qdot_desired)
        .map(|(actual, desired)| {
            let mut acc = CompensatedSum::default();
            for v in actual.iter().chain(desired) {
                acc.add(v * v);
            }
            acc.value().sqrt()
        })
        .collect();
    NoiseTrace {
        sample_rate: 1.0 / traj.timestep(),
        samples,
    }
}

/// One entry of a column selection: a header name or an inclusive range of
/// zero-based file column indices (column 0 is the timestamp).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Name(String),
    Range(usize, usize),
}

impl ColumnSelector {
    fn parse(token: &str) -> Self {
        let range = token.split_once('-').and_then(|(a, b)| {
            Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?))
        });
        if let Some((a, b)) = range {
            return ColumnSelector::Range(a, b);
        }
        match token.parse::<usize>() {
            Ok(i) => ColumnSelector::Range(i, i),
            Err(_) => ColumnSelector::Name(token.to_string()),
        }
    }
}

/// Which file columns hold actual and which hold desired velocities.
///
/// An empty `actual` list selects every non-timestamp column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnSpec {
    pub actual: Vec<ColumnSelector>,
    pub desired: Vec<ColumnSelector>,
}

impl ColumnSpec {
    /// Parses comma-separated selector lists such as `"qd0,qd1"` or `"1-30"`.
    pub fn parse(actual: &str, desired: &str) -> Self {
        let split = |s: &str| {
            s.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(ColumnSelector::parse)
                .collect::<Vec<_>>()
        };
        Self {
            actual: split(actual),
            desired: split(desired),
        }
    }

    fn resolve(selectors: &[ColumnSelector], header: &[String]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for sel in selectors {
            match sel {
                ColumnSelector::Name(name) => {
                    let idx = header
                        .iter()
                        .position(|h| h == name)
                        .ok_or_else(|| Error::MissingColumn(name.clone()))?;
                    if idx == 0 {
                        return Err(Error::Config(format!(
                            "column `{name}` is the timestamp column"
                        )));
                    }
                    out.push(idx);
                }
                ColumnSelector::Range(a, b) => {
                    if a > b || *a == 0 || *b >= header.len() {
                        return Err(Error::MissingColumn(format!(
                            "{a}-{b} (file has data columns 1-{})",
                            header.len() - 1
                        )));
                    }
                    out.extend(*a..=*b);
                }
            }
        }
        Ok(out)
    }
}

/// Reads a tab-separated trajectory log.
pub fn read_trajectory(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<JointTrajectory> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(file, &path.display().to_string(), spec)
}

/// Parses a trajectory log: a header line of column names, then one row per
/// time step with the timestamp in the first column.
pub fn parse_trajectory(reader: impl Read, origin: &str, spec: &ColumnSpec) -> Result<JointTrajectory> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let header: Vec<String> = loop {
        match lines.next() {
            Some((i, line)) => {
                let line = line.map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                break line.split('\t').map(|s| s.trim().to_string()).collect();
            }
            None => return Err(Error::Trajectory(format!("{origin}: file is empty"))),
        }
    };
    if header.len() < 2 {
        return Err(Error::parse(origin, 1, "header needs a timestamp and at least one velocity column"));
    }

    let actual_idx = if spec.actual.is_empty() {
        let mut all: Vec<usize> = (1..header.len()).collect();
        let desired = ColumnSpec::resolve(&spec.desired, &header)?;
        all.retain(|i| !desired.contains(i));
        all
    } else {
        ColumnSpec::resolve(&spec.actual, &header)?
    };
    let desired_idx = ColumnSpec::resolve(&spec.desired, &header)?;
    if actual_idx.is_empty() {
        return Err(Error::Config("no actual-velocity columns selected".into()));
    }

    let mut timestamps = Vec::new();
    let mut qdot = Vec::new();
    let mut qdot_desired = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {} cells, found {}", header.len(), cells.len()),
            ));
        }
        let cell = |c: usize| -> Result<f64> {
            cells[c].parse::<f64>().map_err(|_| {
                Error::parse(origin, lineno, format!("column `{}`: `{}` is not a number", header[c], cells[c]))
            })
        };
        let t = cell(0)?;
        if let Some(&prev) = timestamps.last() {
            if t <= prev {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("timestamp {t} does not increase (previous {prev})"),
                ));
            }
        }
        timestamps.push(t);
        qdot.push(actual_idx.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?);
        qdot_desired.push(desired_idx.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?);
    }
    JointTrajectory::new(timestamps, qdot, qdot_desired)
}
