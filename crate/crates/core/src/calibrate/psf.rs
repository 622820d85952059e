use super::CalibrationConfig;
use crate::error::{invalid, Error, Result};
use crate::grid::{AtomGrid, Roi};
use crate::image::Image;
use crate::kernel::PsfKernel;

/// Median of the pixels outside every site window, averaged over frames.
/// Windows may extend past the frame; only their in-frame part is masked.
pub fn estimate_background(images: &[Image], grid: &AtomGrid, k: usize) -> Result<f64> {
    let first = images
        .first()
        .ok_or_else(|| invalid("need at least one frame"))?;
    let (w, h) = (first.width(), first.height());
    let mut mask = vec![true; w * h];
    let half = (k / 2) as i64;
    for (r, c) in grid.sites() {
        let (cx, cy) = grid.site_pixel(r, c)?;
        let ys = (cy - half).max(0)..(cy + half + 1).min(h as i64);
        let xs = (cx - half).max(0)..(cx + half + 1).min(w as i64);
        for y in ys {
            for x in xs.clone() {
                mask[y as usize * w + x as usize] = false;
            }
        }
    }
    let count = mask.iter().filter(|m| **m).count();
    if count == 0 {
        return Err(Error::NoBackgroundPixels);
    }
    let mut buf = Vec::with_capacity(count);
    let mut acc = 0.0;
    for img in images {
        if img.width() != w || img.height() != h {
            return Err(invalid("frames must share dimensions"));
        }
        buf.clear();
        buf.extend(
            img.pixels()
                .iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|(p, _)| *p),
        );
        let mid = buf.len() / 2;
        let (_, upper, _) = buf.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        let upper = *upper;
        let med = if buf.len() % 2 == 1 {
            upper
        } else {
            let lower = buf[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lower + upper)
        };
        acc += med;
    }
    Ok(acc / images.len() as f64)
}

/// Per-site PSF estimates plus their normalized average.
#[derive(Clone, Debug)]
pub struct PsfEstimate {
    pub per_site: Vec<PsfKernel>,
    pub pooled: PsfKernel,
}

impl PsfEstimate {
    /// Largest element-wise spread between any two per-site kernels.
    pub fn spread(&self) -> f64 {
        let n = self.pooled.weights().len();
        (0..n)
            .map(|i| {
                let (lo, hi) =
                    self.per_site
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                            let v = k.weights()[i];
                            (lo.min(v), hi.max(v))
                        });
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// Linear-interpolation quantile of unsorted data.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn estimate_site(
    images: &[Image],
    roi: &Roi,
    background: f64,
    prefilter: f64,
) -> Result<PsfKernel> {
    let k = roi.size;
    let mut windows = vec![0.0; images.len() * k * k];
    let mut sums = Vec::with_capacity(images.len());
    for (img, win) in images.iter().zip(windows.chunks_exact_mut(k * k)) {
        roi.copy_from(img, win);
        win.iter_mut().for_each(|p| *p -= background);
        sums.push(win.iter().sum::<f64>());
    }
    let cut = quantile(&sums, prefilter);
    let darkest = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    // identical bright sums (noiseless frames) can sit exactly on the quantile;
    // those still count when the quantile is above the darkest window
    let ties_count = cut > darkest && sums.iter().filter(|s| **s > cut).count() < 2;
    let mut acc = vec![0.0; k * k];
    let mut used = 0usize;
    for (win, s) in windows.chunks_exact(k * k).zip(&sums) {
        if *s > cut || (ties_count && *s == cut) {
            used += 1;
            acc.iter_mut().zip(win).for_each(|(a, p)| *a += p);
        }
    }
    let insufficient = || Error::InsufficientBrightFrames {
        row: roi.row,
        col: roi.col,
        frames: used,
    };
    if used < 2 {
        return Err(insufficient());
    }
    acc.iter_mut()
        .for_each(|a| *a = (*a / used as f64).max(0.0));
    PsfKernel::new(k, acc).map_err(|_| insufficient())
}

/// Averages background-subtracted windows over each site's bright frames,
/// those whose window sum exceeds the `occupancy_prefilter` quantile.
pub fn estimate_psf(
    images: &[Image],
    grid: &AtomGrid,
    background: f64,
    cfg: &CalibrationConfig,
) -> Result<PsfEstimate> {
    let first = images
        .first()
        .ok_or_else(|| invalid("need at least one frame"))?;
    let rois = grid.rois(first.width(), first.height(), cfg.kernel_size)?;
    let per_site = rois
        .iter()
        .map(|roi| estimate_site(images, roi, background, cfg.occupancy_prefilter))
        .collect::<Result<Vec<_>>>()?;
    let k = cfg.kernel_size;
    let mut acc = vec![0.0; k * k];
    for psf in &per_site {
        acc.iter_mut().zip(psf.weights()).for_each(|(a, w)| *a += w);
    }
    let pooled = PsfKernel::new(k, acc)?;
    Ok(PsfEstimate { per_site, pooled })
}
