//! Feature extraction: framing, odd-reflection padding, windowed short-time
//! FFT magnitudes, frequency binning with log scaling, and a per-bin DCT-II
//! over the time axis.
//!
//! Feature vectors are flattened frequency-major: the `n_t` DCT coefficients
//! of bin 0 come first, then those of bin 1, and so on.

mod dct;
mod spectral;

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotatedBlock, Dataset, DatasetRole, FailureLabel};
use crate::error::{Error, Result};

pub use dct::{dct_matrix, dct_ortho};
pub use spectral::hann_window;

/// Parameters of the feature pipeline. All sizes are in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub frame_size: usize,
    pub frame_stride: usize,
    pub fft_size: usize,
    pub fft_stride: usize,
    pub compression_factor: usize,
    pub log_epsilon: f64,
    /// Pad short blocks by odd reflection (training). When false, short
    /// blocks are extended with the trace samples that follow them.
    pub allow_padding: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            frame_size: 4000,
            frame_stride: 1000,
            fft_size: 1024,
            fft_stride: 834,
            compression_factor: 3,
            log_epsilon: 1e-10,
            allow_padding: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.fft_size < 2 {
            return bad(format!("fft_size must be at least 2, got {}", self.fft_size));
        }
        if self.fft_size > self.frame_size {
            return bad(format!(
                "fft_size {} exceeds frame_size {}",
                self.fft_size, self.frame_size
            ));
        }
        if self.frame_stride == 0 || self.fft_stride == 0 {
            return bad("strides must be at least 1".into());
        }
        if self.compression_factor == 0 || self.compression_factor > self.spectrum_len() {
            return bad(format!(
                "compression_factor must be in 1..={}, got {}",
                self.spectrum_len(),
                self.compression_factor
            ));
        }
        if !(self.log_epsilon.is_finite() && self.log_epsilon > 0.0) {
            return bad(format!("log_epsilon must be positive, got {}", self.log_epsilon));
        }
        Ok(())
    }

    /// Same configuration with padding set for the given dataset role.
    pub fn for_role(&self, role: DatasetRole) -> Self {
        Self {
            allow_padding: role == DatasetRole::Training,
            ..self.clone()
        }
    }

    /// One-sided spectrum length, `n_fft / 2 + 1`.
    pub fn spectrum_len(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of frequency bins after compression.
    pub fn n_bins(&self) -> usize {
        self.spectrum_len().div_ceil(self.compression_factor)
    }

    /// Number of short-time transforms per frame.
    pub fn n_transforms(&self) -> usize {
        (self.frame_size - self.fft_size) / self.fft_stride + 1
    }

    pub fn feature_len(&self) -> usize {
        self.n_bins() * self.n_transforms()
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Writes the matrix as tab-separated rows.
    pub fn write_tsv(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join("\t"))?;
        }
        Ok(())
    }
}

/// Where a frame came from: block index and sample offset within the block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameOrigin {
    pub block: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
    pub label: FailureLabel,
    pub origin: FrameOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: FailureLabel,
    pub origin: FrameOrigin,
}

/// Extends `samples` to `target` by odd reflection about the last sample:
/// `x[n-1+k] = 2 x[n-1] - x[n-1-k]`. When more than `n - 1` samples are
/// missing the reflection is repeated on the already extended signal.
pub fn pad_reflect(samples: &[f64], target: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Empty("cannot pad an empty block".into()));
    }
    let mut out = Vec::with_capacity(target.max(samples.len()));
    out.extend_from_slice(samples);
    if out.len() == 1 {
        out.resize(target.max(1), samples[0]);
        return Ok(out);
    }
    while out.len() < target {
        let last = out.len() - 1;
        let edge = out[last];
        let take = (target - out.len()).min(last);
        for k in 1..=take {
            let v = 2.0 * edge - out[last - k];
            out.push(v);
        }
    }
    Ok(out)
}

/// Cuts one block of `trace` into fixed-size frames.
///
/// Blocks at least one frame long yield every window that fits, at offsets
/// `0, s, 2s, ...`. Shorter blocks yield a single frame, padded by odd
/// reflection when `allow_padding` is set and otherwise extended with the
/// trace samples following the block (padding only what the trace lacks).
pub fn frame_block(
    trace: &[f64],
    block: &AnnotatedBlock,
    block_id: usize,
    cfg: &PreprocessConfig,
) -> Vec<Frame> {
    let n_f = cfg.frame_size;
    let data = &trace[block.start..block.end()];
    let make = |offset: usize, samples: Vec<f64>| Frame {
        samples,
        label: block.label,
        origin: FrameOrigin {
            block: block_id,
            offset,
        },
    };
    if data.len() >= n_f {
        return (0..=(data.len() - n_f) / cfg.frame_stride)
            .map(|i| {
                let off = i * cfg.frame_stride;
                make(off, data[off..off + n_f].to_vec())
            })
            .collect();
    }
    let source = if cfg.allow_padding {
        data
    } else {
        let end = (block.start + n_f).min(trace.len());
        &trace[block.start..end]
    };
    // non-empty by the AnnotatedBlock invariant
    let samples = pad_reflect(source, n_f).expect("block is non-empty");
    vec![make(0, samples)]
}

/// Frames an unannotated signal as a single block starting at sample 0.
pub fn frame_signal(samples: &[f64], cfg: &PreprocessConfig) -> Vec<Frame> {
    let block = AnnotatedBlock {
        label: FailureLabel::Ok,
        t_start: 0.0,
        t_end: 0.0,
        start: 0,
        len: samples.len(),
    };
    frame_block(samples, &block, 0, cfg)
}

/// Frames every block of a dataset, in block order.
pub fn frame_dataset(ds: &Dataset, cfg: &PreprocessConfig) -> Vec<Frame> {
    ds.blocks()
        .iter()
        .enumerate()
        .flat_map(|(i, b)| frame_block(ds.trace().samples(), b, i, cfg))
        .collect()
}

/// Reusable feature pipeline for one configuration.
#[derive(Clone)]
pub struct FeatureExtractor {
    cfg: PreprocessConfig,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    dct: Matrix,
}

impl std::fmt::Debug for FeatureExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureExtractor").field("cfg", &self.cfg).finish()
    }
}

impl FeatureExtractor {
    pub fn new(cfg: PreprocessConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
        let window = hann_window(cfg.fft_size);
        let dct = dct_matrix(cfg.n_transforms());
        Ok(Self {
            cfg,
            fft,
            window,
            dct,
        })
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.cfg
    }

    /// Magnitude spectrogram, `[n_t x (n_fft/2 + 1)]`.
    pub fn spectrogram(&self, frame: &[f64]) -> Result<Matrix> {
        if frame.len() < self.cfg.fft_size {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.frame_size,
                actual: frame.len(),
            });
        }
        Ok(spectral::stft_magnitudes(
            frame,
            self.fft.as_ref(),
            &self.window,
            self.cfg.fft_stride,
        ))
    }

    /// Binned, log-scaled spectrogram, `[n_t x n_bins]`.
    pub fn compress(&self, spec: &Matrix) -> Matrix {
        spectral::compress_spectrum(spec, self.cfg.compression_factor, self.cfg.log_epsilon)
    }

    /// DCT-II along the time axis of every frequency bin, `[n_t x n_bins]`.
    pub fn dct_rows(&self, compressed: &Matrix) -> Matrix {
        dct::transform_columns(&self.dct, compressed)
    }

    /// Full pipeline for one frame, flattened frequency-major.
    pub fn features(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() != self.cfg.frame_size {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.frame_size,
                actual: frame.len(),
            });
        }
        let coeffs = self.dct_rows(&self.compress(&self.spectrogram(frame)?));
        Ok(flatten_frequency_major(&coeffs))
    }

    /// Frames and featurizes a dataset using padding rules for its role.
    pub fn featurize(&self, ds: &Dataset) -> Vec<FeatureVector> {
        let cfg = self.cfg.for_role(ds.role());
        let frames = frame_dataset(ds, &cfg);
        self.featurize_frames(&frames)
    }

    pub fn featurize_frames(&self, frames: &[Frame]) -> Vec<FeatureVector> {
        frames
            .par_iter()
            .map(|f| FeatureVector {
                values: self.features(&f.samples).expect("frames have the configured size"),
                label: f.label,
                origin: f.origin,
            })
            .collect()
    }
}

/// Flattens a `[n_t x n_bins]` matrix so the time coefficients of each bin
/// are contiguous.
pub fn flatten_frequency_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for c in 0..m.cols() {
        for r in 0..m.rows() {
            out.push(m.get(r, c));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(start: usize, len: usize) -> AnnotatedBlock {
        AnnotatedBlock {
            label: FailureLabel::Impact,
            t_start: 0.0,
            t_end: 0.0,
            start,
            len,
        }
    }

    #[test]
    fn table_shapes() {
        let mut cfg = PreprocessConfig::default();
        assert_eq!(cfg.spectrum_len(), 513);
        assert_eq!(cfg.n_bins(), 171);
        cfg.fft_stride = 401;
        assert_eq!(cfg.n_transforms(), 8);
        assert_eq!(cfg.feature_len(), 1368);
        cfg.fft_stride = 834;
        assert_eq!(cfg.n_transforms(), 4);
        assert_eq!(cfg.feature_len(), 684);
    }

    #[test]
    fn ragged_bin_count() {
        let cfg = PreprocessConfig {
            compression_factor: 4,
            ..Default::default()
        };
        assert_eq!(cfg.n_bins(), 129);
    }

    #[test]
    fn config_validation() {
        let ok = PreprocessConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            PreprocessConfig { log_epsilon: 0.0, ..ok.clone() },
            PreprocessConfig { log_epsilon: -1.0, ..ok.clone() },
            PreprocessConfig { fft_size: 5000, ..ok.clone() },
            PreprocessConfig { fft_stride: 0, ..ok.clone() },
            PreprocessConfig { frame_stride: 0, ..ok.clone() },
            PreprocessConfig { compression_factor: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn reflect_ramp() {
        assert_eq!(pad_reflect(&[0.0, 1.0, 2.0], 5).unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn reflect_peak() {
        assert_eq!(
            pad_reflect(&[0.0, 1.0, 0.0], 5).unwrap(),
            vec![0.0, 1.0, 0.0, -1.0, 0.0]
        );
    }

    #[test]
    fn reflect_constant() {
        assert_eq!(pad_reflect(&[2.5; 3], 11).unwrap(), vec![2.5; 11]);
        assert_eq!(pad_reflect(&[2.5], 4).unwrap(), vec![2.5; 4]);
    }

    #[test]
    fn reflect_repeats_segments() {
        // ramp keeps extending as a line through several reflections
        let x: Vec<f64> = (0..3).map(f64::from).collect();
        let y = pad_reflect(&x, 20).unwrap();
        let expected: Vec<f64> = (0..20).map(f64::from).collect();
        assert_eq!(y, expected);
    }

    #[test]
    fn reflect_empty_is_error() {
        assert!(pad_reflect(&[], 4).is_err());
    }

    #[test]
    fn window_count() {
        let trace = vec![1.0; 6000];
        let cfg = PreprocessConfig::default();
        let frames = frame_block(&trace, &block(0, 6000), 0, &cfg);
        let offsets: Vec<usize> = frames.iter().map(|f| f.origin.offset).collect();
        assert_eq!(offsets, vec![0, 1000, 2000]);
        assert!(frames.iter().all(|f| f.samples.len() == 4000));
        assert_eq!(frame_block(&trace, &block(0, 4000), 0, &cfg).len(), 1);
        assert_eq!(frame_block(&trace, &block(0, 5999), 0, &cfg).len(), 2);
    }

    #[test]
    fn short_block_training_mode_pads() {
        let trace: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.01).sin() + 2.0).collect();
        let cfg = PreprocessConfig::default();
        let frames = frame_block(&trace, &block(100, 2000), 0, &cfg);
        assert_eq!(frames.len(), 1);
        let f = &frames[0].samples;
        assert_eq!(f.len(), 4000);
        assert_eq!(&f[..2000], &trace[100..2100]);
        assert_eq!(f[2000], 2.0 * trace[2099] - trace[2098]);
    }

    #[test]
    fn short_block_validation_mode_extends() {
        let trace: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        let cfg = PreprocessConfig {
            allow_padding: false,
            ..Default::default()
        };
        let frames = frame_block(&trace, &block(100, 2000), 0, &cfg);
        assert_eq!(frames[0].samples, trace[100..4100].to_vec());
    }

    #[test]
    fn validation_extension_falls_back_to_padding() {
        let trace: Vec<f64> = (0..5000).map(|i| i as f64).collect();
        let cfg = PreprocessConfig {
            allow_padding: false,
            ..Default::default()
        };
        let frames = frame_block(&trace, &block(3000, 1000), 0, &cfg);
        let f = &frames[0].samples;
        assert_eq!(f.len(), 4000);
        // 2000 real samples then the odd reflection continues the ramp
        let expected: Vec<f64> = (3000..7000).map(|i| i as f64).collect();
        assert_eq!(f, &expected);
    }

    #[test]
    fn flatten_order() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(flatten_frequency_major(&m), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn feature_length_matches_config() {
        let ex = FeatureExtractor::new(PreprocessConfig::default()).unwrap();
        let frame: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.3).sin().abs()).collect();
        assert_eq!(ex.features(&frame).unwrap().len(), 684);
        assert!(ex.features(&frame[..3999]).is_err());
    }

    #[test]
    fn silence_stays_finite() {
        let ex = FeatureExtractor::new(PreprocessConfig::default()).unwrap();
        let v = ex.features(&[0.0; 4000]).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
    }
}
