//! Per-frame reconstruction of site emissions.
//!
//! Three modes share one artifact:
//! - `baseline`: one global least-squares fit of every site's PSF plus a
//!   constant background, serial. Handles overlapping PSFs exactly.
//! - `optimized`: independent per-site projector dot products over a worker
//!   pool. Only window extraction and multiply-reduce happen per frame.
//! - `dataflow`: the per-site projector path with the accelerator's lane
//!   structure, adder-tree reduction order and 32-bit arithmetic, plus a
//!   per-stage cycle trace.

mod adder_tree;
mod baseline;
mod dataflow;
mod optimized;

pub use adder_tree::{tree_levels, tree_sum, TreeSum};
pub use baseline::{fit_baseline, reconstruct_baseline, BaselineFit};
pub use dataflow::{reconstruct_dataflow, LaneTrace, BUS_BITS, WORD_BITS};
pub use optimized::reconstruct_optimized;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::artifact::CalibrationArtifact;
use crate::emission::{EmissionChannel, EmissionMatrix, OccupancyMatrix};
use crate::error::{invalid, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    #[default]
    Optimized,
    Dataflow,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::Optimized, Mode::Dataflow];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Optimized => "optimized",
            Mode::Dataflow => "dataflow",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "optimized" => Ok(Mode::Optimized),
            "dataflow" => Ok(Mode::Dataflow),
            other => Err(format!(
                "unknown mode '{other}' (baseline|optimized|dataflow)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub mode: Mode,
    /// Subtract the artifact's background from each window (optimized and
    /// dataflow modes; the baseline fits its own background).
    pub subtract_background: bool,
    /// Channel to threshold; `None` uses the artifact's calibrated channel.
    pub emission_channel: Option<EmissionChannel>,
    pub worker_count: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Optimized,
            subtract_background: true,
            emission_channel: None,
            worker_count: 1,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.worker_count == 0 {
            return Err(invalid("worker_count must be >= 1"));
        }
        Ok(())
    }
}

/// Available hardware parallelism, at least 1.
pub fn max_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Runs the configured mode. Lane traces are only produced in dataflow mode.
pub fn reconstruct(
    image: &Image,
    artifact: &CalibrationArtifact,
    cfg: &ReconstructionConfig,
) -> Result<(EmissionMatrix, Option<Vec<LaneTrace>>)> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Baseline => Ok((reconstruct_baseline(image, artifact)?, None)),
        Mode::Optimized => Ok((reconstruct_optimized(image, artifact, cfg)?, None)),
        Mode::Dataflow => {
            let (em, traces) = reconstruct_dataflow(image, artifact, cfg.subtract_background)?;
            Ok((em, Some(traces)))
        }
    }
}

/// Occupied where the calibrated channel strictly exceeds the threshold.
pub fn threshold(emissions: &EmissionMatrix, artifact: &CalibrationArtifact) -> OccupancyMatrix {
    threshold_channel(emissions, artifact.threshold, artifact.channel())
}

pub fn threshold_channel(
    emissions: &EmissionMatrix,
    level: f64,
    channel: EmissionChannel,
) -> OccupancyMatrix {
    OccupancyMatrix {
        rows: emissions.rows,
        cols: emissions.cols,
        occupied: emissions
            .channel(channel)
            .iter()
            .map(|v| *v > level)
            .collect(),
    }
}

pub(crate) fn check_image_geometry(
    image: &Image,
    artifact: &CalibrationArtifact,
) -> Result<Vec<crate::grid::Roi>> {
    artifact
        .grid
        .rois(image.width(), image.height(), artifact.kernel_size())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_strict() {
        let em = EmissionMatrix::new(1, 3, vec![0.1, 0.9, 0.5], vec![0.1, 0.9, 0.5]).unwrap();
        let occ = threshold_channel(&em, 0.5, EmissionChannel::Raw);
        assert_eq!(occ.occupied, vec![false, true, false]);
    }

    #[test]
    fn mode_parsing() {
        for m in Mode::ALL {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
        assert!("fpga".parse::<Mode>().is_err());
    }
}
