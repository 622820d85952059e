//! Wall-clock benchmark of reconstruction across array sizes and modes.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifact::CalibrationArtifact;
use crate::calibrate::{artifact_from_psf, CalibrationConfig};
use crate::error::{invalid, Result};
use crate::image::Image;
use crate::reconstruct::{reconstruct, Mode, ReconstructionConfig};
use crate::sim::{sample_image, SceneSpec};

pub const DEFAULT_TRIALS: usize = 50;
pub const WARMUP_TRIALS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub modes: Vec<Mode>,
    /// Side lengths of square site arrays.
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub warmup: usize,
    pub worker_count: usize,
    /// Scene geometry per size: pitch, kernel size, PSF sigma and frame margin.
    pub pitch: f64,
    pub kernel_size: usize,
    pub sigma: f64,
    pub margin: f64,
    pub seed: u64,
    /// Rebuild the artifact between trials, outside the timed region.
    pub recalibrate_between_trials: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            modes: Mode::ALL.to_vec(),
            sizes: vec![10, 20, 30, 40],
            trials: DEFAULT_TRIALS,
            warmup: WARMUP_TRIALS,
            worker_count: crate::reconstruct::max_workers(),
            pitch: 23.0,
            kernel_size: 31,
            sigma: 2.0,
            margin: 24.0,
            seed: 1,
            recalibrate_between_trials: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub mode: Mode,
    pub trials: usize,
    pub mean_us: f64,
    pub std_us: f64,
    /// Set when the statistics are degenerate (a single trial).
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEnvironment {
    pub cpus: usize,
    pub os: String,
    pub arch: String,
    pub worker_count: usize,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub environment: BenchEnvironment,
}

impl BenchReport {
    pub fn row(&self, size: usize, mode: Mode) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.size == size && r.mode == mode)
    }

    /// `size,mode,trials,mean_us,std_us`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,mode,trials,mean_us,std_us\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.3},{:.3}",
                r.size, r.mode, r.trials, r.mean_us, r.std_us
            );
        }
        out
    }
}

/// Mean and sample standard deviation; one sample has zero spread.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn scene_for(cfg: &BenchConfig, n: usize) -> Result<SceneSpec> {
    let mut spec = SceneSpec::square_array(n, cfg.pitch, cfg.kernel_size, cfg.sigma, cfg.margin)?;
    spec.seed = cfg.seed;
    Ok(spec)
}

fn artifact_for(spec: &SceneSpec) -> Result<CalibrationArtifact> {
    artifact_from_psf(
        spec.grid.clone(),
        spec.psf.clone(),
        spec.background,
        0.0,
        &CalibrationConfig::default(),
    )
}

/// Times one mode on one prepared frame. Only the reconstruction call is
/// inside the timed region.
pub fn time_mode(
    image: &Image,
    spec: &SceneSpec,
    mode: Mode,
    cfg: &BenchConfig,
) -> Result<Vec<f64>> {
    let rcfg = ReconstructionConfig {
        mode,
        worker_count: cfg.worker_count.max(1),
        ..ReconstructionConfig::default()
    };
    let mut artifact = artifact_for(spec)?;
    for _ in 0..cfg.warmup {
        reconstruct(image, &artifact, &rcfg)?;
    }
    let mut samples = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        if cfg.recalibrate_between_trials {
            artifact = artifact_for(spec)?;
        }
        let t0 = Instant::now();
        let out = reconstruct(image, &artifact, &rcfg)?;
        let dt = t0.elapsed();
        std::hint::black_box(out);
        samples.push(dt.as_secs_f64() * 1e6);
    }
    Ok(samples)
}

/// Runs every (size, mode) pair sequentially.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.trials == 0 {
        return Err(invalid("bench needs at least one trial"));
    }
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let spec = scene_for(cfg, n)?;
        let (image, _) = sample_image(&spec)?;
        for &mode in &cfg.modes {
            let samples = time_mode(&image, &spec, mode, cfg)?;
            let (mean_us, std_us) = mean_std(&samples);
            let warning = (cfg.trials < 2).then(|| {
                log::warn!("{n}x{n} {mode}: a single trial has no spread; std reported as 0");
                "single trial: std reported as 0".to_string()
            });
            log::info!("{n}x{n} {mode}: {mean_us:.1} us +- {std_us:.1}");
            rows.push(BenchRow {
                size: n,
                mode,
                trials: cfg.trials,
                mean_us,
                std_us,
                warning,
            });
        }
    }
    Ok(BenchReport {
        rows,
        environment: BenchEnvironment {
            cpus: crate::reconstruct::max_workers(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            worker_count: cfg.worker_count,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}
