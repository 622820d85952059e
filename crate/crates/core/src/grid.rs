//! Square-lattice site geometry and per-site regions of interest.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::Image;

/// Fitted lattice of trap sites: `position(r, c) = origin + R(angle)·(c·pitch, r·pitch)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct AtomGrid {
    rows: usize,
    cols: usize,
    origin: (f64, f64),
    pitch: f64,
    angle: f64,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    rows: usize,
    cols: usize,
    origin: (f64, f64),
    pitch: f64,
    angle: f64,
}

impl TryFrom<GridRepr> for AtomGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        AtomGrid::new(r.rows, r.cols, r.origin, r.pitch, r.angle)
    }
}

impl From<AtomGrid> for GridRepr {
    fn from(g: AtomGrid) -> Self {
        GridRepr {
            rows: g.rows,
            cols: g.cols,
            origin: g.origin,
            pitch: g.pitch,
            angle: g.angle,
        }
    }
}

impl AtomGrid {
    pub fn new(
        rows: usize,
        cols: usize,
        origin: (f64, f64),
        pitch: f64,
        angle: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("grid needs at least one row and one column"));
        }
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(invalid(format!("pitch {pitch} must be positive")));
        }
        if !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(invalid("grid origin must be finite"));
        }
        if !(angle > -FRAC_PI_4 && angle <= FRAC_PI_4) {
            return Err(invalid(format!("angle {angle} outside (-pi/4, pi/4]")));
        }
        Ok(Self {
            rows,
            cols,
            origin,
            pitch,
            angle,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn site_position(&self, r: usize, c: usize) -> Result<(f64, f64)> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::IndexOutOfRange {
                row: r,
                col: c,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.position_unchecked(r, c))
    }

    pub(crate) fn position_unchecked(&self, r: usize, c: usize) -> (f64, f64) {
        let u = c as f64 * self.pitch;
        let v = r as f64 * self.pitch;
        if self.angle == 0.0 {
            return (self.origin.0 + u, self.origin.1 + v);
        }
        let (s, co) = self.angle.sin_cos();
        (
            self.origin.0 + co * u - s * v,
            self.origin.1 + s * u + co * v,
        )
    }

    /// Row-major `(row, col)` iteration over every site.
    pub fn sites(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
    }

    /// Nearest-pixel center of a site, rounding halves away from zero.
    pub fn site_pixel(&self, r: usize, c: usize) -> Result<(i64, i64)> {
        let (x, y) = self.site_position(r, c)?;
        Ok((x.round() as i64, y.round() as i64))
    }

    /// ROIs for every site, row-major; fails on the first window that leaves the image.
    pub fn rois(&self, width: usize, height: usize, k: usize) -> Result<Vec<Roi>> {
        self.sites()
            .map(|(r, c)| roi_for(self, width, height, r, c, k))
            .collect()
    }
}

/// A k×k window fully inside an image, anchored at its top-left pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub row: usize,
    pub col: usize,
    pub x0: usize,
    pub y0: usize,
    pub size: usize,
}

impl Roi {
    /// Copies the window's pixels into `out`, row-major.
    pub fn copy_from(&self, image: &Image, out: &mut [f64]) {
        let k = self.size;
        for dy in 0..k {
            let row = &image.row(self.y0 + dy)[self.x0..self.x0 + k];
            out[dy * k..(dy + 1) * k].copy_from_slice(row);
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && y >= self.y0 && x < self.x0 + self.size && y < self.y0 + self.size
    }
}

fn roi_for(
    grid: &AtomGrid,
    width: usize,
    height: usize,
    r: usize,
    c: usize,
    k: usize,
) -> Result<Roi> {
    if k.is_multiple_of(2) {
        return Err(invalid(format!("window size {k} must be odd")));
    }
    let (cx, cy) = grid.site_pixel(r, c)?;
    let half = (k / 2) as i64;
    let (x0, y0) = (cx - half, cy - half);
    if x0 < 0 || y0 < 0 || x0 + k as i64 > width as i64 || y0 + k as i64 > height as i64 {
        return Err(Error::WindowOutOfBounds {
            row: r,
            col: c,
            cx,
            cy,
            size: k,
            width,
            height,
        });
    }
    Ok(Roi {
        row: r,
        col: c,
        x0: x0 as usize,
        y0: y0 as usize,
        size: k,
    })
}

/// Region of interest of size `k` centered on the rounded site position.
pub fn extract_roi(grid: &AtomGrid, image: &Image, r: usize, c: usize, k: usize) -> Result<Roi> {
    roi_for(grid, image.width(), image.height(), r, c, k)
}
