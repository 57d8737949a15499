//! Annotated noise traces.
//!
//! Trace files hold `rate=<Hz>` on the first line followed by one sample per
//! line. Annotation files hold one `t_start t_end label` row per block, with
//! `#` starting a comment line. Intervals are half-open and map to sample
//! indices by rounding `t * rate`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::noise::NoiseTrace;

/// The closed set of frame labels, in persistence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailureLabel {
    Ok = 0,
    Impact = 1,
    HighAcc = 2,
    Oscillations = 3,
}

impl FailureLabel {
    pub const ALL: [FailureLabel; 4] = [
        FailureLabel::Ok,
        FailureLabel::Impact,
        FailureLabel::HighAcc,
        FailureLabel::Oscillations,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_failure(self) -> bool {
        self != FailureLabel::Ok
    }

    /// Lower-case form used in annotation files.
    pub fn key(self) -> &'static str {
        match self {
            FailureLabel::Ok => "ok",
            FailureLabel::Impact => "impact",
            FailureLabel::HighAcc => "highacc",
            FailureLabel::Oscillations => "oscillations",
        }
    }
}

impl fmt::Display for FailureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureLabel::Ok => "OK",
            FailureLabel::Impact => "Impact",
            FailureLabel::HighAcc => "HighAcc",
            FailureLabel::Oscillations => "Oscillations",
        })
    }
}

impl FromStr for FailureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        FailureLabel::ALL
            .into_iter()
            .find(|l| l.key() == lower)
            .ok_or_else(|| Error::Annotation(format!("unknown label `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetRole {
    Training,
    Validation,
}

/// One labelled time interval, as written in an annotation file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotation {
    pub t_start: f64,
    pub t_end: f64,
    pub label: FailureLabel,
}

/// A labelled block bound to a contiguous sample range of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotatedBlock {
    pub label: FailureLabel,
    pub t_start: f64,
    pub t_end: f64,
    /// First sample index in the owning trace.
    pub start: usize,
    /// Sample count, at least one.
    pub len: usize,
}

impl AnnotatedBlock {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// A noise trace together with its annotated blocks.
#[derive(Debug, Clone)]
pub struct Dataset {
    trace: NoiseTrace,
    blocks: Vec<AnnotatedBlock>,
    role: DatasetRole,
}

impl Dataset {
    /// Binds annotations to a trace. Overlapping intervals are accepted but
    /// logged as a warning.
    pub fn new(trace: NoiseTrace, annotations: &[Annotation], role: DatasetRole) -> Result<Self> {
        if annotations.is_empty() {
            return Err(Error::Empty("annotation list is empty".into()));
        }
        let rate = trace.sample_rate();
        let mut blocks = Vec::with_capacity(annotations.len());
        for (i, a) in annotations.iter().enumerate() {
            if !(a.t_start.is_finite() && a.t_end.is_finite()) || a.t_start < 0.0 {
                return Err(Error::Annotation(format!(
                    "block {i}: invalid interval [{}, {})",
                    a.t_start, a.t_end
                )));
            }
            if a.t_end <= a.t_start {
                return Err(Error::Annotation(format!(
                    "block {i}: end {} is not after start {}",
                    a.t_end, a.t_start
                )));
            }
            let start = (a.t_start * rate).round() as usize;
            let len = ((a.t_end - a.t_start) * rate).round() as usize;
            if len == 0 {
                return Err(Error::Annotation(format!(
                    "block {i}: interval [{}, {}) is shorter than one sample",
                    a.t_start, a.t_end
                )));
            }
            if start + len > trace.len() {
                return Err(Error::Annotation(format!(
                    "block {i}: interval [{}, {}) exceeds the trace ({} s)",
                    a.t_start,
                    a.t_end,
                    trace.duration()
                )));
            }
            blocks.push(AnnotatedBlock {
                label: a.label,
                t_start: a.t_start,
                t_end: a.t_end,
                start,
                len,
            });
        }
        let mut order: Vec<&AnnotatedBlock> = blocks.iter().collect();
        order.sort_by_key(|b| b.start);
        for pair in order.windows(2) {
            if pair[1].start < pair[0].end() {
                log::warn!(
                    "overlapping annotations [{}, {}) and [{}, {})",
                    pair[0].t_start,
                    pair[0].t_end,
                    pair[1].t_start,
                    pair[1].t_end
                );
            }
        }
        Ok(Self {
            trace,
            blocks,
            role,
        })
    }

    pub fn trace(&self) -> &NoiseTrace {
        &self.trace
    }

    pub fn blocks(&self) -> &[AnnotatedBlock] {
        &self.blocks
    }

    pub fn role(&self) -> DatasetRole {
        self.role
    }

    pub fn sample_rate(&self) -> f64 {
        self.trace.sample_rate()
    }

    pub fn block_samples(&self, block: &AnnotatedBlock) -> &[f64] {
        &self.trace.samples()[block.start..block.end()]
    }

    pub fn annotations(&self) -> Vec<Annotation> {
        self.blocks
            .iter()
            .map(|b| Annotation {
                t_start: b.t_start,
                t_end: b.t_end,
                label: b.label,
            })
            .collect()
    }

    /// Total annotated duration in seconds.
    pub fn annotated_seconds(&self) -> f64 {
        self.blocks.iter().map(|b| b.len).sum::<usize>() as f64 / self.sample_rate()
    }
}

/// Loads a trace and its annotations from disk.
pub fn load_dataset(
    noise_file: impl AsRef<Path>,
    annotation_file: impl AsRef<Path>,
    role: DatasetRole,
) -> Result<Dataset> {
    let trace = read_trace(noise_file)?;
    let annotations = read_annotations(annotation_file)?;
    Dataset::new(trace, &annotations, role)
}

/// Frame count per label over a sequence of frame labels. Every label is
/// present in the map, with zero for absent classes.
pub fn class_counts(labels: impl IntoIterator<Item = FailureLabel>) -> BTreeMap<FailureLabel, usize> {
    let mut counts: BTreeMap<FailureLabel, usize> = FailureLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<NoiseTrace> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(file, &path.display().to_string())
}

pub fn parse_trace(reader: impl Read, origin: &str) -> Result<NoiseTrace> {
    let mut rate = None;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match rate {
            None => {
                let value = line
                    .strip_prefix("rate=")
                    .ok_or_else(|| Error::parse(origin, lineno, "expected `rate=<Hz>` header"))?;
                let r: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(origin, lineno, format!("invalid rate `{value}`")))?;
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::parse(origin, lineno, "rate must be positive"));
                }
                rate = Some(r);
            }
            Some(_) => {
                let s: f64 = line
                    .parse()
                    .map_err(|_| Error::parse(origin, lineno, format!("`{line}` is not a number")))?;
                if !(s.is_finite() && s >= 0.0) {
                    return Err(Error::parse(origin, lineno, "samples must be finite and non-negative"));
                }
                samples.push(s);
            }
        }
    }
    let rate = rate.ok_or_else(|| Error::Empty(format!("{origin}: trace file is empty")))?;
    if samples.is_empty() {
        return Err(Error::Empty(format!("{origin}: trace has no samples")));
    }
    NoiseTrace::new(rate, samples)
}

pub fn write_trace(trace: &NoiseTrace, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "rate={}", trace.sample_rate())?;
    for s in trace.samples() {
        writeln!(out, "{s}")?;
    }
    Ok(())
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(file, &path.display().to_string())
}

pub fn parse_annotations(reader: impl Read, origin: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected `t_start t_end label`, found {} fields", fields.len()),
            ));
        }
        let time = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(origin, lineno, format!("`{s}` is not a time")))
        };
        let label = fields[2]
            .parse::<FailureLabel>()
            .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        out.push(Annotation {
            t_start: time(fields[0])?,
            t_end: time(fields[1])?,
            label,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("{origin}: no annotations")));
    }
    Ok(out)
}

pub fn write_annotations(annotations: &[Annotation], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "# t_start t_end label")?;
    for a in annotations {
        writeln!(out, "{} {} {}", a.t_start, a.t_end, a.label.key())?;
    }
    Ok(())
}
