//! Run configuration: an optional TOML file, overridden by flags.
//!
//! ```toml
//! seed = 7
//!
//! [preprocess]
//! fft_stride = 834
//!
//! [svm]
//! kernel = "rbf"
//! gamma = 5.7e-4
//! c_hat = 1.1
//! class_weight_factor = 0.25
//!
//! [solver]
//! tol = 1e-3
//! max_iter = 10000000
//! cache_mb = 256
//!
//! [grid]
//! kernel = "rbf"
//! fft_strides = [401, 834]
//! c_hats = [0.5, 1.1, 2.0]
//! gammas = [1e-4, 5.7e-4]
//! ```

use std::path::Path;

use serde::Deserialize;
use softfail::eval::{HyperGrid, KernelKind};
use softfail::svm::{Kernel, SvmParams};
use softfail::{PreprocessConfig, SolverOptions};

use crate::CliError;

/// Seed used when neither the config file nor `--seed` sets one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Linear,
    Rbf,
}

impl From<KernelName> for KernelKind {
    fn from(k: KernelName) -> Self {
        match k {
            KernelName::Linear => KernelKind::Linear,
            KernelName::Rbf => KernelKind::Rbf,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSection {
    pub kernel: Option<KernelName>,
    pub gamma: Option<f64>,
    pub c_hat: Option<f64>,
    pub class_weight_factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<u64>,
    pub cache_mb: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kernel: Option<KernelName>,
    pub fft_strides: Option<Vec<usize>>,
    pub c_hats: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub svm: SvmSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub grid: GridSection,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    pub fn solver(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            tol: self.solver.tol.unwrap_or(d.tol),
            max_iter: self.solver.max_iter.unwrap_or(d.max_iter),
            cache_bytes: self.solver.cache_mb.map_or(d.cache_bytes, |mb| mb << 20),
        }
    }
}

/// Preprocessing overrides shared by several subcommands.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct PreprocessFlags {
    /// Hop between short-time transforms, in samples.
    #[arg(long)]
    pub fft_stride: Option<usize>,
    /// Hop between frames, in samples.
    #[arg(long)]
    pub frame_stride: Option<usize>,
}

impl PreprocessFlags {
    pub fn apply(&self, mut cfg: PreprocessConfig) -> Result<PreprocessConfig, CliError> {
        if let Some(s) = self.fft_stride {
            cfg.fft_stride = s;
        }
        if let Some(s) = self.frame_stride {
            cfg.frame_stride = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Default, Clone, clap::Args)]
pub struct SvmFlags {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelName>,
    /// RBF width; rejected with the linear kernel.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub c_hat: Option<f64>,
    /// Multiplier in C_class = factor * (N / N_class) * C_hat.
    #[arg(long)]
    pub class_weight_factor: Option<f64>,
}

impl SvmFlags {
    pub fn resolve(&self, file: &SvmSection) -> Result<SvmParams, CliError> {
        let d = SvmParams::default();
        let kernel_name = self.kernel.or(file.kernel).unwrap_or(KernelName::Rbf);
        if kernel_name == KernelName::Linear && self.gamma.is_some() {
            return Err(CliError::input("--gamma conflicts with the linear kernel"));
        }
        let kernel = match kernel_name {
            KernelName::Linear => Kernel::Linear,
            KernelName::Rbf => Kernel::rbf(self.gamma.or(file.gamma).unwrap_or(5.7e-4))?,
        };
        let params = SvmParams {
            kernel,
            c_hat: self.c_hat.or(file.c_hat).unwrap_or(d.c_hat),
            class_weight_factor: self
                .class_weight_factor
                .or(file.class_weight_factor)
                .unwrap_or(d.class_weight_factor),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Default, Clone, clap::Args)]
pub struct GridFlags {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelName>,
    /// Comma-separated FFT strides.
    #[arg(long, value_delimiter = ',')]
    pub fft_strides: Option<Vec<usize>>,
    /// Comma-separated C_hat values.
    #[arg(long, value_delimiter = ',')]
    pub c_hats: Option<Vec<f64>>,
    /// Comma-separated RBF widths; rejected with the linear kernel.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// Multiplier in C_class = factor * (N / N_class) * C_hat.
    #[arg(long)]
    pub class_weight_factor: Option<f64>,
}

impl GridFlags {
    pub fn resolve(&self, file: &GridSection) -> Result<HyperGrid, CliError> {
        let kind: KernelKind = self.kernel.or(file.kernel).unwrap_or(KernelName::Rbf).into();
        if kind == KernelKind::Linear && self.gammas.is_some() {
            return Err(CliError::input("--gammas conflicts with the linear kernel"));
        }
        let d = HyperGrid::default_for(kind);
        let grid = HyperGrid {
            kernel: kind,
            fft_strides: self.fft_strides.clone().or(file.fft_strides.clone()).unwrap_or(d.fft_strides),
            c_hats: self.c_hats.clone().or(file.c_hats.clone()).unwrap_or(d.c_hats),
            gammas: match kind {
                KernelKind::Linear => vec![],
                KernelKind::Rbf => self.gammas.clone().or(file.gammas.clone()).unwrap_or(d.gammas),
            },
        };
        grid.validate()?;
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str(
            "seed = 9\n[preprocess]\nfft_stride = 401\n[svm]\nkernel = \"rbf\"\ngamma = 0.1\nc_hat = 2.0\n",
        )
        .unwrap();
        assert_eq!(file.seed(None), 9);
        assert_eq!(file.seed(Some(3)), 3);
        let flags = SvmFlags {
            c_hat: Some(4.0),
            ..Default::default()
        };
        let params = flags.resolve(&file.svm).unwrap();
        assert_eq!(params.c_hat, 4.0);
        assert_eq!(params.kernel, Kernel::Rbf { gamma: 0.1 });
        let cfg = PreprocessFlags::default().apply(file.preprocess.clone()).unwrap();
        assert_eq!(cfg.fft_stride, 401);
        assert_eq!(cfg.frame_size, 4000);
    }

    #[test]
    fn conflicting_flags_rejected() {
        let flags = SvmFlags {
            kernel: Some(KernelName::Linear),
            gamma: Some(0.1),
            ..Default::default()
        };
        assert!(flags.resolve(&SvmSection::default()).is_err());
        assert!(toml::from_str::<FileConfig>("[svm]\nbogus = 1\n").is_err());
    }

    #[test]
    fn grid_defaults_per_kernel() {
        let linear = GridFlags {
            kernel: Some(KernelName::Linear),
            ..Default::default()
        }
        .resolve(&GridSection::default())
        .unwrap();
        assert!(linear.gammas.is_empty());
        let rbf = GridFlags::default().resolve(&GridSection::default()).unwrap();
        assert_eq!(rbf.points().len(), 5 * 9 * 9);
    }
}
