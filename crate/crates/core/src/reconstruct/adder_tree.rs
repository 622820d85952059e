//! Fixed-order binary reduction in 32-bit floating point.

/// Number of pairwise levels needed to reduce `n` values: ⌈log₂ n⌉.
pub fn tree_levels(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Result of a tree reduction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeSum {
    pub value: f32,
    pub levels: usize,
}

/// Sums `values` through a balanced adder tree: the input is zero-padded to
/// the next power of two, and each level adds neighbors `(2i, 2i+1)`. The
/// operation order depends only on the input length.
pub fn tree_sum(values: &[f32]) -> TreeSum {
    let levels = tree_levels(values.len());
    let width = 1usize << levels;
    let mut buf = [0f32; 64];
    let mut heap;
    let lane: &mut [f32] = if width <= buf.len() {
        &mut buf[..width]
    } else {
        heap = vec![0f32; width];
        &mut heap[..]
    };
    lane[..values.len()].copy_from_slice(values);
    let mut live = width;
    while live > 1 {
        live /= 2;
        for i in 0..live {
            lane[i] = lane[2 * i] + lane[2 * i + 1];
        }
    }
    TreeSum {
        value: if values.is_empty() { 0.0 } else { lane[0] },
        levels,
    }
}
