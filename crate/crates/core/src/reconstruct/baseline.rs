use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::check_image_geometry;
use crate::artifact::CalibrationArtifact;
use crate::emission::EmissionMatrix;
use crate::error::{Error, Result};
use crate::grid::Roi;
use crate::image::Image;
use crate::kernel::PsfKernel;

/// Pivots below this fraction of the largest flag a rank-deficient design.
const PIVOT_RCOND: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineFit {
    pub emissions: EmissionMatrix,
    /// Fitted constant background per pixel.
    pub background: f64,
    /// Pixels in the union of all site windows.
    pub support: usize,
}

fn overlap_dot(a: &Roi, pa: &PsfKernel, b: &Roi, pb: &PsfKernel) -> f64 {
    let k = a.size;
    let x_lo = a.x0.max(b.x0);
    let x_hi = (a.x0 + k).min(b.x0 + k);
    let y_lo = a.y0.max(b.y0);
    let y_hi = (a.y0 + k).min(b.y0 + k);
    let mut acc = 0.0;
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            acc += pa.at(x - a.x0, y - a.y0) * pb.at(x - b.x0, y - b.y0);
        }
    }
    acc
}

fn window_dot(image: &Image, roi: &Roi, psf: &PsfKernel) -> f64 {
    let k = roi.size;
    let mut acc = 0.0;
    for dy in 0..k {
        let row = &image.row(roi.y0 + dy)[roi.x0..roi.x0 + k];
        let w = &psf.weights()[dy * k..(dy + 1) * k];
        acc += row.iter().zip(w).map(|(p, q)| p * q).sum::<f64>();
    }
    acc
}

fn numerical_rank(gram: &DMatrix<f64>) -> usize {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    eig.eigenvalues
        .iter()
        .filter(|&&l| l > max * PIVOT_RCOND * PIVOT_RCOND)
        .count()
}

/// Global least-squares fit of the photoelectron model over the union of all
/// site windows: one column per site (its PSF stamped at the site) plus a
/// constant column for the background.
///
/// The design matrix is never materialized. Its Gram matrix is assembled
/// from window overlaps, column-equilibrated, and solved by Cholesky
/// factorization; tiny pivots trigger an eigenvalue rank check.
pub fn fit_baseline(image: &Image, artifact: &CalibrationArtifact) -> Result<BaselineFit> {
    let rois = check_image_geometry(image, artifact)?;
    let n = rois.len();
    let k = artifact.kernel_size();
    let w = image.width();

    let mut in_support = vec![false; w * image.height()];
    for roi in &rois {
        for y in roi.y0..roi.y0 + k {
            in_support[y * w + roi.x0..y * w + roi.x0 + k].fill(true);
        }
    }
    let support = in_support.iter().filter(|s| **s).count();

    let m = n + 1;
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (i, ri) in rois.iter().enumerate() {
        let pi = artifact.psf(i);
        gram[(i, i)] = pi.energy();
        for (j, rj) in rois.iter().enumerate().skip(i + 1) {
            if ri.x0.abs_diff(rj.x0) < k && ri.y0.abs_diff(rj.y0) < k {
                let v = overlap_dot(ri, pi, rj, artifact.psf(j));
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let s: f64 = pi.weights().iter().sum();
        gram[(i, n)] = s;
        gram[(n, i)] = s;
        rhs[i] = window_dot(image, ri, pi);
    }
    gram[(n, n)] = support as f64;
    rhs[n] = image
        .pixels()
        .iter()
        .zip(&in_support)
        .filter(|(_, s)| **s)
        .map(|(p, _)| p)
        .sum();

    let scale = DVector::from_iterator(m, gram.diagonal().iter().map(|d| 1.0 / d.sqrt()));
    for j in 0..m {
        for i in 0..m {
            gram[(i, j)] *= scale[i] * scale[j];
        }
    }
    let scaled_rhs = rhs.component_mul(&scale);

    let singular = |g: &DMatrix<f64>| Error::SingularDesign {
        rank: numerical_rank(g),
        columns: m,
    };
    let chol = match gram.clone().cholesky() {
        Some(c) => c,
        None => return Err(singular(&gram)),
    };
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
        (lo.min(d), hi.max(d))
    });
    if lo < PIVOT_RCOND * hi {
        let rank = numerical_rank(&gram);
        if rank < m {
            return Err(Error::SingularDesign { rank, columns: m });
        }
    }
    let sol = chol.solve(&scaled_rhs).component_mul(&scale);

    let raw: Vec<f64> = sol.iter().take(n).cloned().collect();
    let normalized = raw
        .iter()
        .enumerate()
        .map(|(i, r)| r / artifact.projector(i).matrix_sum())
        .collect();
    Ok(BaselineFit {
        emissions: EmissionMatrix::new(
            artifact.grid.rows(),
            artifact.grid.cols(),
            raw,
            normalized,
        )?,
        background: sol[n],
        support,
    })
}

/// Emission matrix of [`fit_baseline`].
pub fn reconstruct_baseline(
    image: &Image,
    artifact: &CalibrationArtifact,
) -> Result<EmissionMatrix> {
    fit_baseline(image, artifact).map(|f| f.emissions)
}
