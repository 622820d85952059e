use std::thread;

use super::{check_image_geometry, ReconstructionConfig};
use crate::artifact::CalibrationArtifact;
use crate::emission::EmissionMatrix;
use crate::error::Result;
use crate::grid::Roi;
use crate::image::Image;

#[inline]
fn project(image: &Image, roi: &Roi, weights: &[f64], background: f64) -> f64 {
    let k = roi.size;
    let mut acc = 0.0;
    for dy in 0..k {
        let row = &image.row(roi.y0 + dy)[roi.x0..roi.x0 + k];
        let w = &weights[dy * k..(dy + 1) * k];
        for (p, q) in row.iter().zip(w) {
            acc += q * (p - background);
        }
    }
    acc
}

/// Σ(projector ⊙ (window − b)) per site, sites split into contiguous chunks
/// over `worker_count` scoped threads. Each site is computed by exactly one
/// worker with the same operation order, so the result does not depend on
/// the worker count.
pub fn reconstruct_optimized(
    image: &Image,
    artifact: &CalibrationArtifact,
    cfg: &ReconstructionConfig,
) -> Result<EmissionMatrix> {
    cfg.validate()?;
    let rois = check_image_geometry(image, artifact)?;
    let b = if cfg.subtract_background {
        artifact.background
    } else {
        0.0
    };
    let n = rois.len();
    let mut raw = vec![0.0; n];
    let workers = cfg.worker_count.min(n).max(1);

    let run = |start: usize, out: &mut [f64]| {
        for (i, slot) in out.iter_mut().enumerate() {
            let site = start + i;
            *slot = project(image, &rois[site], artifact.projector(site).weights(), b);
        }
    };
    if workers == 1 {
        run(0, &mut raw);
    } else {
        let chunk = n.div_ceil(workers);
        thread::scope(|s| {
            for (ci, out) in raw.chunks_mut(chunk).enumerate() {
                let run = &run;
                s.spawn(move || run(ci * chunk, out));
            }
        });
    }
    let normalized = raw
        .iter()
        .enumerate()
        .map(|(i, r)| r / artifact.projector(i).matrix_sum())
        .collect();
    EmissionMatrix::new(artifact.grid.rows(), artifact.grid.cols(), raw, normalized)
}
