//! Lattice detection on a time-averaged frame.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{Matrix4, Vector4};

use super::threshold::otsu;
use super::CalibrationConfig;
use crate::error::{Error, Result};
use crate::grid::AtomGrid;
use crate::image::Image;

#[derive(Clone, Copy, Debug)]
struct Blob {
    pixels: usize,
    mass: f64,
    cx: f64,
    cy: f64,
}

/// 4-connected components of pixels strictly above `level`, with centroids
/// weighted by `value - level`.
fn bright_components(image: &Image, level: f64) -> Vec<Blob> {
    let (w, h) = (image.width(), image.height());
    let px = image.pixels();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut blobs = Vec::new();
    for start in 0..w * h {
        if seen[start] || px[start] <= level {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut b = Blob {
            pixels: 0,
            mass: 0.0,
            cx: 0.0,
            cy: 0.0,
        };
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let m = px[i] - level;
            b.pixels += 1;
            b.mass += m;
            b.cx += m * x as f64;
            b.cy += m * y as f64;
            let mut visit = |j: usize| {
                if !seen[j] && px[j] > level {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        b.cx /= b.mass;
        b.cy /= b.mass;
        blobs.push(b);
    }
    blobs
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Folds a direction into the lattice angle range (-pi/4, pi/4].
fn fold_angle(mut a: f64) -> f64 {
    while a > FRAC_PI_4 {
        a -= FRAC_PI_2;
    }
    while a <= -FRAC_PI_4 {
        a += FRAC_PI_2;
    }
    a
}

/// Fits origin, pitch and rotation of a `rows`×`cols` square lattice to the
/// bright spots of a mean image.
///
/// Spots are found by Otsu binarization and connected-component labeling; the
/// `rows·cols` largest are kept. A coarse angle from nearest-neighbor
/// directions orders the centroids into rows and columns, then the lattice
/// parameters come from a linear least-squares fit of
/// `p(r, c) = o + (a·c − b·r, b·c + a·r)` with `pitch = |(a, b)|`.
pub fn fit_grid(mean_image: &Image, cfg: &CalibrationConfig) -> Result<AtomGrid> {
    let expected = cfg.rows * cfg.cols;
    let fail = |reason: &str, components: usize| Error::GridDetectFailed {
        reason: reason.to_string(),
        components,
        expected,
    };
    let split = otsu(mean_image.pixels())?;
    if split.ratio == 0.0 {
        return Err(fail("image has no contrast", 0));
    }
    let mut blobs = bright_components(mean_image, split.threshold);
    log::debug!(
        "grid fit: otsu level {:.3}, {} components",
        split.threshold,
        blobs.len()
    );
    if blobs.len() < expected {
        return Err(fail("too few bright components", blobs.len()));
    }
    blobs.sort_by(|a, b| b.pixels.cmp(&a.pixels).then(b.mass.total_cmp(&a.mass)));
    blobs.truncate(expected);
    let pts: Vec<(f64, f64)> = blobs.iter().map(|b| (b.cx, b.cy)).collect();

    let (angle0, pitch0) = if expected == 1 {
        (0.0, 1.0)
    } else {
        let mut angles = Vec::with_capacity(pts.len());
        let mut dists = Vec::with_capacity(pts.len());
        for (i, p) in pts.iter().enumerate() {
            let nearest = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| (q.0 - p.0, q.1 - p.1))
                .min_by(|a, b| a.0.hypot(a.1).total_cmp(&b.0.hypot(b.1)))
                .expect("at least two points");
            angles.push(fold_angle(nearest.1.atan2(nearest.0)));
            dists.push(nearest.0.hypot(nearest.1));
        }
        (median(&mut angles), median(&mut dists))
    };

    // order into rows along the rotated vertical axis, then by column
    let (s, c) = angle0.sin_cos();
    let mut rotated: Vec<(f64, f64, usize)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| (c * p.0 + s * p.1, -s * p.0 + c * p.1, i))
        .collect();
    rotated.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut assigned = Vec::with_capacity(expected);
    for (r, row) in rotated.chunks_mut(cfg.cols).enumerate() {
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (col, entry) in row.iter().enumerate() {
            assigned.push((r, col, pts[entry.2]));
        }
    }

    if expected == 1 {
        let (x, y) = assigned[0].2;
        return AtomGrid::new(1, 1, (x, y), pitch0, 0.0);
    }

    // unknowns [ox, oy, a, b]
    let mut ata = Matrix4::<f64>::zeros();
    let mut atb = Vector4::<f64>::zeros();
    for &(r, col, (x, y)) in &assigned {
        let (r, col) = (r as f64, col as f64);
        let rx = Vector4::new(1.0, 0.0, col, -r);
        let ry = Vector4::new(0.0, 1.0, r, col);
        ata += rx * rx.transpose() + ry * ry.transpose();
        atb += rx * x + ry * y;
    }
    let sol = ata
        .cholesky()
        .ok_or_else(|| fail("degenerate site arrangement", expected))?
        .solve(&atb);
    let (ox, oy, a, b) = (sol[0], sol[1], sol[2], sol[3]);
    let pitch = a.hypot(b);
    let angle = fold_angle(b.atan2(a));
    let rms = (assigned
        .iter()
        .map(|&(r, col, (x, y))| {
            let (r, col) = (r as f64, col as f64);
            let mx = ox + a * col - b * r;
            let my = oy + b * col + a * r;
            (x - mx).powi(2) + (y - my).powi(2)
        })
        .sum::<f64>()
        / expected as f64)
        .sqrt();
    log::debug!("grid fit: pitch {pitch:.4}, angle {angle:.6} rad, rms {rms:.4}");
    if !(rms <= pitch / 4.0) {
        return Err(fail(
            &format!("fit residual rms {rms:.3} exceeds pitch/4"),
            expected,
        ));
    }
    AtomGrid::new(cfg.rows, cfg.cols, (ox, oy), pitch, angle)
}
