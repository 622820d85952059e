use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::kernel::{Projector, PsfKernel};

/// Relative singular-value cutoff for the pseudoinverse.
pub const SVD_RCOND: f64 = 1e-10;

/// A neighboring site's kernel, displaced by `offset = (dx, dy)` pixels from
/// the center site.
#[derive(Clone, Debug)]
pub struct Neighbor {
    pub offset: (i64, i64),
    pub psf: PsfKernel,
}

/// `psf` shifted by `offset` and cropped to the k×k window of the center site.
fn shifted_column(psf: &PsfKernel, offset: (i64, i64), k: usize) -> Vec<f64> {
    let mut col = vec![0.0; k * k];
    let ks = k as i64;
    for y in 0..ks {
        let sy = y - offset.1;
        if !(0..ks).contains(&sy) {
            continue;
        }
        for x in 0..ks {
            let sx = x - offset.0;
            if (0..ks).contains(&sx) {
                col[(y * ks + x) as usize] = psf.at(sx as usize, sy as usize);
            }
        }
    }
    col
}

/// Moore-Penrose projection kernel for one site.
///
/// Without neighbors the map `γ ↦ γ·psf` has rank one and its pseudoinverse
/// is `psf / Σ psf²`. With neighbors, the window's design matrix holds one
/// column per kernel (center first) and the projector is the center row of
/// its SVD pseudoinverse, so it responds with 1 to the center PSF and 0 to
/// every included neighbor.
pub fn build_projector(psf: &PsfKernel, neighbors: &[Neighbor]) -> Result<Projector> {
    let k = psf.size();
    let energy = psf.energy();
    if !(energy > 0.0) {
        return Err(Error::DegeneratePsf);
    }
    if neighbors.is_empty() {
        let w = psf.weights().iter().map(|v| v / energy).collect();
        return Projector::new(k, w, energy);
    }
    if neighbors.iter().any(|n| n.psf.size() != k) {
        return Err(invalid(
            "neighbor kernels must match the center kernel size",
        ));
    }

    let n = neighbors.len() + 1;
    let mut design = DMatrix::<f64>::zeros(k * k, n);
    design.column_mut(0).copy_from_slice(psf.weights());
    for (j, nb) in neighbors.iter().enumerate() {
        let col = shifted_column(&nb.psf, nb.offset, k);
        design.column_mut(j + 1).copy_from_slice(&col);
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = SVD_RCOND * smax;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    // row 0 of V Σ⁺ Uᵀ
    let mut row = vec![0.0; k * k];
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let coef = vt[(i, 0)] / s;
        for (p, r) in row.iter_mut().enumerate() {
            *r += coef * u[(p, i)];
        }
    }
    Projector::new(k, row, energy)
}
