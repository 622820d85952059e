//! Software model of the reconstruction accelerator's dataflow pipeline.
//!
//! Stages per site: boundary extraction (ROI), image extraction (fetch over
//! a 512-bit bus and decode to 32-bit floats), image convolution (one lane
//! per kernel row computing a product row-sum, lane results combined by an
//! adder tree, with a parallel path reducing the projector itself to the
//! matrix sum) and output aggregation (product sum ÷ matrix sum). Every
//! intermediate is an `f32`, and reduction order is fixed by the tree, so
//! results are bit-reproducible.

use serde::{Deserialize, Serialize};

use super::adder_tree::{tree_levels, tree_sum};
use super::check_image_geometry;
use crate::artifact::CalibrationArtifact;
use crate::emission::EmissionMatrix;
use crate::error::{Error, Result};
use crate::image::Image;

pub const BUS_BITS: usize = 512;
pub const WORD_BITS: usize = 32;
/// Placeholder: the decode stage has no documented cycle figure.
const DECODE_CYCLES: u64 = 1;
const AGGREGATE_CYCLES: u64 = 1;

/// Cycle counts of one site's trip through the pipeline stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneTrace {
    pub row: usize,
    pub col: usize,
    pub fetch: u64,
    pub decode: u64,
    pub row_mac: u64,
    pub tree_reduce: u64,
    pub aggregate: u64,
}

impl LaneTrace {
    pub fn for_kernel(row: usize, col: usize, k: usize) -> Self {
        let bits = k * k * WORD_BITS;
        Self {
            row,
            col,
            fetch: bits.div_ceil(BUS_BITS) as u64,
            decode: DECODE_CYCLES,
            row_mac: k as u64,
            tree_reduce: tree_levels(k) as u64,
            aggregate: AGGREGATE_CYCLES,
        }
    }

    pub fn stages(&self) -> [u64; 5] {
        [
            self.fetch,
            self.decode,
            self.row_mac,
            self.tree_reduce,
            self.aggregate,
        ]
    }

    pub fn total(&self) -> u64 {
        self.stages().iter().sum()
    }
}

/// Returns `(product_sum, matrix_sum)` for one window.
fn convolve(
    window: &[f32],
    weights: &[f32],
    k: usize,
    lanes: &mut [f32],
    products: &mut [f32],
    mlanes: &mut [f32],
) -> (f32, f32) {
    for r in 0..k {
        let w = &weights[r * k..(r + 1) * k];
        let d = &window[r * k..(r + 1) * k];
        for ((p, a), b) in products.iter_mut().zip(w).zip(d) {
            *p = a * b;
        }
        lanes[r] = tree_sum(products).value;
        mlanes[r] = tree_sum(w).value;
    }
    (tree_sum(lanes).value, tree_sum(mlanes).value)
}

/// Reconstructs every site through the emulated accelerator pipeline.
pub fn reconstruct_dataflow(
    image: &Image,
    artifact: &CalibrationArtifact,
    subtract_background: bool,
) -> Result<(EmissionMatrix, Vec<LaneTrace>)> {
    let rois = check_image_geometry(image, artifact)?;
    let k = artifact.kernel_size();
    let b32 = if subtract_background {
        artifact.background as f32
    } else {
        0.0
    };
    let decoded: Vec<Vec<f32>> = artifact
        .projectors
        .iter()
        .map(|p| p.weights().iter().map(|&w| w as f32).collect())
        .collect();

    let n = rois.len();
    let mut raw = Vec::with_capacity(n);
    let mut normalized = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    let mut window = vec![0f32; k * k];
    let mut lanes = vec![0f32; k];
    let mut mlanes = vec![0f32; k];
    let mut products = vec![0f32; k];
    for (i, roi) in rois.iter().enumerate() {
        for dy in 0..k {
            let src = &image.row(roi.y0 + dy)[roi.x0..roi.x0 + k];
            for (d, &p) in window[dy * k..(dy + 1) * k].iter_mut().zip(src) {
                *d = p as f32 - b32;
            }
        }
        let weights = if decoded.len() == 1 {
            &decoded[0]
        } else {
            &decoded[i]
        };
        let (product_sum, matrix_sum) =
            convolve(&window, weights, k, &mut lanes, &mut products, &mut mlanes);
        if matrix_sum == 0.0 {
            return Err(Error::ZeroMatrixSum { site: i });
        }
        raw.push(product_sum as f64);
        normalized.push((product_sum / matrix_sum) as f64);
        traces.push(LaneTrace::for_kernel(roi.row, roi.col, k));
    }
    let em = EmissionMatrix::new(artifact.grid.rows(), artifact.grid.cols(), raw, normalized)?;
    Ok((em, traces))
}
