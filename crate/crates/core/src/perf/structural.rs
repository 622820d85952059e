use serde::{Deserialize, Serialize};

use crate::reconstruct::LaneTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineOverlap {
    /// Sites pass through all stages one after another.
    None,
    /// Stages overlap across sites; throughput is set by the slowest stage.
    Full,
}

/// Cycle estimate from per-site stage traces.
///
/// With full overlap the first site fills the pipeline through its
/// non-bottleneck stages, then one site retires every bottleneck period:
/// `fill + n·max_stage`.
pub fn structural_cycles(traces: &[LaneTrace], overlap: PipelineOverlap) -> u64 {
    match overlap {
        PipelineOverlap::None => traces.iter().map(LaneTrace::total).sum(),
        PipelineOverlap::Full => {
            let Some(first) = traces.first() else {
                return 0;
            };
            let bottleneck = traces.iter().flat_map(|t| t.stages()).max().unwrap_or(0);
            let fill = first.total() - first.stages().into_iter().max().unwrap_or(0);
            fill + traces.len() as u64 * bottleneck
        }
    }
}
