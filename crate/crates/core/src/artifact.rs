//! The calibration bundle consumed by every reconstruction mode.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationConfig;
use crate::emission::EmissionChannel;
use crate::error::{invalid, Error, Result};
use crate::grid::AtomGrid;
use crate::kernel::{Projector, PsfKernel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub format_version: u32,
    pub kernel_size: usize,
    /// Number of exemplary frames the artifact was calibrated from (0 when built from a known scene).
    pub frames: usize,
    pub config: CalibrationConfig,
}

/// Grid, PSFs, projectors, background and threshold, as produced by calibration.
///
/// `projectors` and `psfs` hold either one shared kernel or one per site (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArtifactRepr", into = "ArtifactRepr")]
pub struct CalibrationArtifact {
    pub grid: AtomGrid,
    pub projectors: Vec<Projector>,
    pub psfs: Vec<PsfKernel>,
    pub background: f64,
    pub threshold: f64,
    pub metadata: ArtifactMetadata,
}

#[derive(Serialize, Deserialize)]
struct ArtifactRepr {
    grid: AtomGrid,
    projectors: Vec<Projector>,
    psfs: Vec<PsfKernel>,
    background: f64,
    threshold: f64,
    metadata: ArtifactMetadata,
}

impl TryFrom<ArtifactRepr> for CalibrationArtifact {
    type Error = Error;
    fn try_from(r: ArtifactRepr) -> Result<Self> {
        let a = CalibrationArtifact {
            grid: r.grid,
            projectors: r.projectors,
            psfs: r.psfs,
            background: r.background,
            threshold: r.threshold,
            metadata: r.metadata,
        };
        a.validate()?;
        Ok(a)
    }
}

impl From<CalibrationArtifact> for ArtifactRepr {
    fn from(a: CalibrationArtifact) -> Self {
        ArtifactRepr {
            grid: a.grid,
            projectors: a.projectors,
            psfs: a.psfs,
            background: a.background,
            threshold: a.threshold,
            metadata: a.metadata,
        }
    }
}

impl CalibrationArtifact {
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        for (what, len) in [
            ("projectors", self.projectors.len()),
            ("psfs", self.psfs.len()),
        ] {
            if len != 1 && len != n {
                return Err(invalid(format!("{what} count {len} must be 1 or {n}")));
            }
        }
        let k = self.metadata.kernel_size;
        if self.projectors.iter().any(|p| p.size() != k) || self.psfs.iter().any(|p| p.size() != k)
        {
            return Err(invalid(format!("all kernels must have size {k}")));
        }
        if !self.threshold.is_finite() {
            return Err(invalid("threshold must be finite"));
        }
        if !(self.background >= 0.0) || !self.background.is_finite() {
            return Err(invalid("background must be finite and >= 0"));
        }
        if self.metadata.format_version != FORMAT_VERSION {
            return Err(invalid(format!(
                "unsupported artifact format version {}",
                self.metadata.format_version
            )));
        }
        Ok(())
    }

    pub fn kernel_size(&self) -> usize {
        self.metadata.kernel_size
    }

    pub fn channel(&self) -> EmissionChannel {
        self.metadata.config.threshold_channel
    }

    pub fn projector(&self, site: usize) -> &Projector {
        if self.projectors.len() == 1 {
            &self.projectors[0]
        } else {
            &self.projectors[site]
        }
    }

    pub fn psf(&self, site: usize) -> &PsfKernel {
        if self.psfs.len() == 1 {
            &self.psfs[0]
        } else {
            &self.psfs[site]
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
