//! Offline calibration: grid geometry, background, per-site PSFs, projection
//! kernels and the detection threshold, derived from a set of exemplary frames.

mod grid_fit;
mod projector;
mod psf;
mod threshold;

pub use grid_fit::fit_grid;
pub use projector::{build_projector, Neighbor, SVD_RCOND};
pub use psf::{estimate_background, estimate_psf, PsfEstimate};
pub use threshold::{calibrate_threshold, otsu, OtsuSplit, MIN_BIMODALITY, OTSU_BINS};

use serde::{Deserialize, Serialize};

use crate::artifact::{ArtifactMetadata, CalibrationArtifact, FORMAT_VERSION};
use crate::emission::EmissionChannel;
use crate::error::{invalid, Result};
use crate::grid::AtomGrid;
use crate::image::Image;
use crate::kernel::{check_size, Projector, PsfKernel};
use crate::reconstruct::{reconstruct_optimized, ReconstructionConfig};

/// Per-site kernels closer than this (max-abs) collapse to one shared kernel.
pub const SHARED_KERNEL_TOLERANCE: f64 = 1e-3;

/// Minimum number of emission samples for threshold calibration.
pub const MIN_THRESHOLD_SAMPLES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub kernel_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub min_images: usize,
    /// Quantile of per-site window sums above which a frame counts as bright.
    pub occupancy_prefilter: f64,
    pub threshold_channel: EmissionChannel,
    /// Subtract the calibrated background from windows before projecting.
    pub subtract_background: bool,
    /// Build projectors that also null overlapping neighbor PSFs.
    pub neighbor_aware: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            kernel_size: 31,
            rows: 10,
            cols: 10,
            min_images: 2,
            occupancy_prefilter: 0.5,
            threshold_channel: EmissionChannel::Normalized,
            subtract_background: true,
            neighbor_aware: false,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        check_size(self.kernel_size)?;
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("rows and cols must be >= 1"));
        }
        if self.min_images < 2 {
            return Err(invalid("min_images must be >= 2"));
        }
        if !(0.0..1.0).contains(&self.occupancy_prefilter) {
            return Err(invalid("occupancy_prefilter must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Projectors for every site of `grid` given per-site (or one shared) PSF.
fn projectors_for(
    grid: &AtomGrid,
    psfs: &[PsfKernel],
    neighbor_aware: bool,
) -> Result<Vec<Projector>> {
    let psf_at = |i: usize| if psfs.len() == 1 { &psfs[0] } else { &psfs[i] };
    if !neighbor_aware {
        return psfs.iter().map(|p| build_projector(p, &[])).collect();
    }
    let k = psfs[0].size() as i64;
    let centers = grid
        .sites()
        .map(|(r, c)| grid.site_pixel(r, c))
        .collect::<Result<Vec<_>>>()?;
    centers
        .iter()
        .enumerate()
        .map(|(i, &(cx, cy))| {
            let nbs: Vec<Neighbor> = centers
                .iter()
                .enumerate()
                .filter(|(j, &(x, y))| *j != i && (x - cx).abs() < k && (y - cy).abs() < k)
                .map(|(j, &(x, y))| Neighbor {
                    offset: (x - cx, y - cy),
                    psf: psf_at(j).clone(),
                })
                .collect();
            build_projector(psf_at(i), &nbs)
        })
        .collect()
}

/// Artifact for a scene whose PSF and background are already known, e.g. a
/// simulation. No frames are consulted.
pub fn artifact_from_psf(
    grid: AtomGrid,
    psf: PsfKernel,
    background: f64,
    threshold: f64,
    cfg: &CalibrationConfig,
) -> Result<CalibrationArtifact> {
    let cfg = CalibrationConfig {
        kernel_size: psf.size(),
        rows: grid.rows(),
        cols: grid.cols(),
        ..cfg.clone()
    };
    let psfs = vec![psf];
    let projectors = projectors_for(&grid, &psfs, cfg.neighbor_aware)?;
    let artifact = CalibrationArtifact {
        grid,
        projectors,
        psfs,
        background,
        threshold,
        metadata: ArtifactMetadata {
            format_version: FORMAT_VERSION,
            kernel_size: cfg.kernel_size,
            frames: 0,
            config: cfg,
        },
    };
    artifact.validate()?;
    Ok(artifact)
}

/// Full calibration: grid fit on the mean frame, background, per-site PSFs,
/// projectors, then Otsu's threshold over the emissions of every exemplary
/// frame reconstructed with the optimized path.
pub fn calibrate(images: &[Image], cfg: &CalibrationConfig) -> Result<CalibrationArtifact> {
    cfg.validate()?;
    if images.len() < cfg.min_images {
        return Err(invalid(format!(
            "calibration needs at least {} frames, got {}",
            cfg.min_images,
            images.len()
        )));
    }
    let mean = Image::mean_of(images)?;
    let grid = fit_grid(&mean, cfg)?;
    log::info!(
        "fitted grid: origin ({:.3}, {:.3}), pitch {:.4}, angle {:.4} deg",
        grid.origin().0,
        grid.origin().1,
        grid.pitch(),
        grid.angle().to_degrees()
    );
    grid.rois(mean.width(), mean.height(), cfg.kernel_size)?;
    let background = estimate_background(images, &grid, cfg.kernel_size)?;
    let estimate = estimate_psf(images, &grid, background, cfg)?;
    let spread = estimate.spread();
    let psfs = if !cfg.neighbor_aware && spread <= SHARED_KERNEL_TOLERANCE {
        vec![estimate.pooled.clone()]
    } else {
        estimate.per_site.clone()
    };
    log::info!(
        "background {background:.4}, psf spread {spread:.2e}, {} kernel(s)",
        psfs.len()
    );
    let projectors = projectors_for(&grid, &psfs, cfg.neighbor_aware)?;

    let mut artifact = CalibrationArtifact {
        grid,
        projectors,
        psfs,
        background,
        threshold: 0.0,
        metadata: ArtifactMetadata {
            format_version: FORMAT_VERSION,
            kernel_size: cfg.kernel_size,
            frames: images.len(),
            config: cfg.clone(),
        },
    };
    let rcfg = ReconstructionConfig {
        subtract_background: cfg.subtract_background,
        ..ReconstructionConfig::default()
    };
    let mut samples = Vec::with_capacity(images.len() * artifact.grid.len());
    for img in images {
        let em = reconstruct_optimized(img, &artifact, &rcfg)?;
        samples.extend_from_slice(em.channel(cfg.threshold_channel));
    }
    if samples.len() < MIN_THRESHOLD_SAMPLES {
        return Err(invalid(format!(
            "threshold calibration needs at least {MIN_THRESHOLD_SAMPLES} emission samples, got {}",
            samples.len()
        )));
    }
    artifact.threshold = calibrate_threshold(&samples)?;
    log::info!(
        "threshold {:.6} on {:?} channel",
        artifact.threshold,
        cfg.threshold_channel
    );
    artifact.validate()?;
    Ok(artifact)
}
