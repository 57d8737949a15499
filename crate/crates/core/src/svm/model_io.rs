//! Text model format.
//!
//! ```text
//! softfail-svm-model
//! version 1
//! [preprocess]
//! frame_size 4000
//! ...
//! [classifier]
//! c_hat <float>
//! class_weight_factor <float>
//! feature_dim <n>
//! classes <k>
//! [class OK]
//! kernel rbf
//! gamma <float>
//! c <float>
//! bias <float>
//! converged true
//! iterations <n>
//! max_violation <float>
//! support_vectors <n>
//! <dual_coef> <v_1> ... <v_dim>
//! ...
//! [end]
//! ```
//!
//! Floats carry 17 significant digits so a save/load round trip is exact.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{BinarySvm, Kernel, MultiClassSvm, TrainingStatus};
use crate::dataset::FailureLabel;
use crate::error::{Error, Result};
use crate::numeric::fmt_exact;
use crate::preprocess::PreprocessConfig;

pub const MODEL_FORMAT_TAG: &str = "softfail-svm-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn write_model(model: &MultiClassSvm, mut out: impl Write) -> std::io::Result<()> {
    let p = &model.preprocess;
    writeln!(out, "{MODEL_FORMAT_TAG}")?;
    writeln!(out, "version {MODEL_FORMAT_VERSION}")?;
    writeln!(out, "[preprocess]")?;
    writeln!(out, "frame_size {}", p.frame_size)?;
    writeln!(out, "frame_stride {}", p.frame_stride)?;
    writeln!(out, "fft_size {}", p.fft_size)?;
    writeln!(out, "fft_stride {}", p.fft_stride)?;
    writeln!(out, "compression_factor {}", p.compression_factor)?;
    writeln!(out, "log_epsilon {}", fmt_exact(p.log_epsilon))?;
    writeln!(out, "[classifier]")?;
    writeln!(out, "c_hat {}", fmt_exact(model.c_hat))?;
    writeln!(out, "class_weight_factor {}", fmt_exact(model.class_weight_factor))?;
    writeln!(out, "feature_dim {}", p.feature_len())?;
    writeln!(out, "classes {}", model.machines.len())?;
    for (label, m) in &model.machines {
        writeln!(out, "[class {label}]")?;
        writeln!(out, "kernel {}", m.kernel.name())?;
        if let Some(g) = m.kernel.gamma() {
            writeln!(out, "gamma {}", fmt_exact(g))?;
        }
        writeln!(out, "c {}", fmt_exact(m.c))?;
        writeln!(out, "bias {}", fmt_exact(m.bias))?;
        writeln!(out, "converged {}", m.status.converged)?;
        writeln!(out, "iterations {}", m.status.iterations)?;
        writeln!(out, "max_violation {}", fmt_exact(m.status.max_violation))?;
        writeln!(out, "support_vectors {}", m.n_support())?;
        for (coef, sv) in m.dual_coefs.iter().zip(&m.support_vectors) {
            let mut line = fmt_exact(*coef);
            for v in sv {
                line.push(' ');
                line.push_str(&fmt_exact(*v));
            }
            writeln!(out, "{line}")?;
        }
    }
    writeln!(out, "[end]")
}

pub fn read_model(path: impl AsRef<Path>) -> Result<MultiClassSvm> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_model(file, &path.display().to_string())
}

struct Lines<'a> {
    origin: &'a str,
    inner: std::iter::Enumerate<std::io::Lines<BufReader<Box<dyn Read + 'a>>>>,
    lineno: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.origin, self.lineno, msg)
    }

    fn next_line(&mut self) -> Result<String> {
        loop {
            match self.inner.next() {
                Some((i, line)) => {
                    self.lineno = i + 1;
                    let line = line.map_err(|e| self.err(e.to_string()))?;
                    let line = line.trim();
                    if !line.is_empty() {
                        return Ok(line.to_string());
                    }
                }
                None => return Err(self.err("unexpected end of model file")),
            }
        }
    }

    fn expect(&mut self, exact: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != exact {
            return Err(self.err(format!("expected `{exact}`, found `{line}`")));
        }
        Ok(())
    }

    fn field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next_line()?;
        let value = line
            .strip_prefix(key)
            .filter(|rest| rest.starts_with(' '))
            .ok_or_else(|| self.err(format!("expected `{key} <value>`, found `{line}`")))?
            .trim();
        value
            .parse()
            .map_err(|_| self.err(format!("invalid value `{value}` for `{key}`")))
    }
}

pub fn parse_model<'a>(reader: impl Read + 'a, origin: &'a str) -> Result<MultiClassSvm> {
    let boxed: Box<dyn Read + 'a> = Box::new(reader);
    let mut lines = Lines {
        origin,
        inner: BufReader::new(boxed).lines().enumerate(),
        lineno: 0,
    };
    lines.expect(MODEL_FORMAT_TAG)?;
    let version: u32 = lines.field("version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(lines.err(format!("unsupported model version {version}")));
    }
    lines.expect("[preprocess]")?;
    let preprocess = PreprocessConfig {
        frame_size: lines.field("frame_size")?,
        frame_stride: lines.field("frame_stride")?,
        fft_size: lines.field("fft_size")?,
        fft_stride: lines.field("fft_stride")?,
        compression_factor: lines.field("compression_factor")?,
        log_epsilon: lines.field("log_epsilon")?,
        allow_padding: true,
    };
    preprocess
        .validate()
        .map_err(|e| lines.err(e.to_string()))?;
    lines.expect("[classifier]")?;
    let c_hat: f64 = lines.field("c_hat")?;
    let class_weight_factor: f64 = lines.field("class_weight_factor")?;
    let dim: usize = lines.field("feature_dim")?;
    if dim != preprocess.feature_len() {
        return Err(Error::Model(format!(
            "feature_dim {dim} does not match the {} features produced by the preprocessing section",
            preprocess.feature_len()
        )));
    }
    let n_classes: usize = lines.field("classes")?;
    let mut machines: Vec<(FailureLabel, BinarySvm)> = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let header = lines.next_line()?;
        let label: FailureLabel = header
            .strip_prefix("[class ")
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| lines.err(format!("expected `[class <label>]`, found `{header}`")))?
            .parse()
            .map_err(|e: Error| lines.err(e.to_string()))?;
        if machines.iter().any(|(l, _)| *l == label) {
            return Err(lines.err(format!("duplicate class {label}")));
        }
        let kernel_name: String = lines.field("kernel")?;
        let kernel = match kernel_name.as_str() {
            "linear" => Kernel::Linear,
            "rbf" => Kernel::rbf(lines.field("gamma")?).map_err(|e| lines.err(e.to_string()))?,
            other => return Err(lines.err(format!("unknown kernel `{other}`"))),
        };
        if let Some((_, first)) = machines.first() {
            if first.kernel != kernel {
                return Err(lines.err("class machines must share the kernel"));
            }
        }
        let c: f64 = lines.field("c")?;
        let bias: f64 = lines.field("bias")?;
        let converged: bool = lines.field("converged")?;
        let iterations: u64 = lines.field("iterations")?;
        let max_violation: f64 = lines.field("max_violation")?;
        let n_sv: usize = lines.field("support_vectors")?;
        let mut support_vectors = Vec::with_capacity(n_sv);
        let mut dual_coefs = Vec::with_capacity(n_sv);
        for _ in 0..n_sv {
            let line = lines.next_line()?;
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| lines.err("non-numeric support vector entry"))?;
            if values.len() != dim + 1 {
                return Err(lines.err(format!(
                    "support vector row has {} values, expected {}",
                    values.len(),
                    dim + 1
                )));
            }
            dual_coefs.push(values[0]);
            support_vectors.push(values[1..].to_vec());
        }
        machines.push((
            label,
            BinarySvm {
                kernel,
                c,
                bias,
                dim,
                support_vectors,
                dual_coefs,
                status: TrainingStatus {
                    converged,
                    iterations,
                    max_violation,
                },
            },
        ));
    }
    lines.expect("[end]")?;
    if machines.len() < 2 {
        return Err(Error::Model("a model needs at least two class machines".into()));
    }
    machines.sort_by_key(|(l, _)| *l);
    let kernel = machines[0].1.kernel;
    Ok(MultiClassSvm {
        preprocess,
        kernel,
        c_hat,
        class_weight_factor,
        machines,
    })
}
