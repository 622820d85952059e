//! Camera frames and their PGM encoding.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A single fluorescence frame in photoelectron units, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ImageRepr", into = "ImageRepr")]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    bit_depth: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct ImageRepr {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    #[serde(default)]
    bit_depth: Option<u32>,
}

impl TryFrom<ImageRepr> for Image {
    type Error = Error;
    fn try_from(r: ImageRepr) -> Result<Self> {
        let mut img = Image::new(r.width, r.height, r.pixels)?;
        img.bit_depth = r.bit_depth;
        Ok(img)
    }
}

impl From<Image> for ImageRepr {
    fn from(i: Image) -> Self {
        ImageRepr {
            width: i.width,
            height: i.height,
            pixels: i.pixels,
            bit_depth: i.bit_depth,
        }
    }
}

impl Image {
    /// Builds a float frame. Every pixel must be finite and non-negative.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("image dimensions must be non-zero"));
        }
        if pixels.len() != width * height {
            return Err(invalid(format!(
                "pixel buffer has {} values, expected {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid(format!(
                "pixel {} has invalid value {}",
                i, pixels[i]
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            bit_depth: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn with_bit_depth(mut self, bits: Option<u32>) -> Self {
        self.bit_depth = bits;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn bit_depth(&self) -> Option<u32> {
        self.bit_depth
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// Pixel-wise mean of a non-empty stack of equally sized frames.
    pub fn mean_of(frames: &[Image]) -> Result<Image> {
        let first = frames
            .first()
            .ok_or_else(|| invalid("cannot average an empty frame set"))?;
        let mut acc = vec![0.0; first.pixels.len()];
        for f in frames {
            if f.width != first.width || f.height != first.height {
                return Err(invalid(format!(
                    "frame size {}x{} differs from {}x{}",
                    f.width, f.height, first.width, first.height
                )));
            }
            for (a, p) in acc.iter_mut().zip(&f.pixels) {
                *a += p;
            }
        }
        let n = frames.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Image::new(first.width, first.height, acc)
    }

    /// Shifts the frame content by an integer offset, filling uncovered pixels with `fill`.
    pub fn translated(&self, dx: i64, dy: i64, fill: f64) -> Image {
        let mut out = vec![fill; self.pixels.len()];
        for y in 0..self.height as i64 {
            let sy = y - dy;
            if sy < 0 || sy >= self.height as i64 {
                continue;
            }
            for x in 0..self.width as i64 {
                let sx = x - dx;
                if sx < 0 || sx >= self.width as i64 {
                    continue;
                }
                out[(y as usize) * self.width + x as usize] =
                    self.pixels[(sy as usize) * self.width + sx as usize];
            }
        }
        Image {
            width: self.width,
            height: self.height,
            pixels: out,
            bit_depth: self.bit_depth,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Result<Image> {
        Image::new(
            self.width,
            self.height,
            self.pixels.iter().map(|p| p * alpha).collect(),
        )
        .map(|i| i.with_bit_depth(self.bit_depth))
    }

    /// Encodes as binary PGM (P5). Values are rounded and clipped to the
    /// maxval implied by `bit_depth` (16 bits when unset); 16-bit samples are
    /// big-endian. Returns the number of clipped pixels alongside the bytes.
    pub fn to_pgm(&self) -> (Vec<u8>, usize) {
        let bits = self.bit_depth.unwrap_or(16).clamp(1, 16);
        let maxval = (1u32 << bits) - 1;
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, maxval).into_bytes();
        let wide = maxval > 255;
        let mut clipped = 0usize;
        for &p in &self.pixels {
            let q = p.round();
            let v = if q > maxval as f64 {
                clipped += 1;
                maxval
            } else {
                q as u32
            };
            if wide {
                out.extend_from_slice(&(v as u16).to_be_bytes());
            } else {
                out.push(v as u8);
            }
        }
        (out, clipped)
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<usize> {
        let (bytes, clipped) = self.to_pgm();
        w.write_all(&bytes)?;
        Ok(clipped)
    }

    /// Decodes a binary PGM (P5) with maxval up to 65535.
    pub fn from_pgm(bytes: &[u8]) -> Result<Image> {
        let fmt = |reason: &str| Error::Format {
            format: "PGM",
            reason: reason.to_string(),
        };
        let mut pos = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments
            while pos < bytes.len() {
                match bytes[pos] {
                    b'#' => {
                        while pos < bytes.len() && bytes[pos] != b'\n' {
                            pos += 1;
                        }
                    }
                    c if c.is_ascii_whitespace() => pos += 1,
                    _ => break,
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(fmt("truncated header"));
            }
            fields.push(
                std::str::from_utf8(&bytes[start..pos]).map_err(|_| fmt("non-ascii header"))?,
            );
        }
        if fields[0] != "P5" {
            return Err(fmt("only binary P5 graymaps are supported"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| fmt("bad header number"));
        let width = parse(fields[1])?;
        let height = parse(fields[2])?;
        let maxval = parse(fields[3])?;
        if maxval == 0 || maxval > 65535 {
            return Err(fmt("maxval must be in 1..=65535"));
        }
        // exactly one whitespace byte separates header and raster
        pos += 1;
        let wide = maxval > 255;
        let need = width * height * if wide { 2 } else { 1 };
        let raster = bytes
            .get(pos..pos + need)
            .ok_or_else(|| fmt("raster shorter than header dimensions"))?;
        let pixels: Vec<f64> = if wide {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect()
        } else {
            raster.iter().map(|&b| b as f64).collect()
        };
        let bits = usize::BITS - maxval.leading_zeros();
        Ok(Image::new(width, height, pixels)?.with_bit_depth(Some(bits)))
    }

    pub fn read_pgm<R: Read>(mut r: R) -> Result<Image> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_pgm(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan() {
        assert!(Image::new(2, 1, vec![0.0, -1.0]).is_err());
        assert!(Image::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn pgm_16bit_layout() {
        let img = Image::new(3, 2, vec![0.0, 1.0, 256.0, 65535.0, 70000.0, 2.4])
            .unwrap()
            .with_bit_depth(Some(16));
        let (bytes, clipped) = img.to_pgm();
        let header = b"P5\n3 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 12);
        assert_eq!(&bytes[header.len() + 4..header.len() + 6], &[1, 0]);
        assert_eq!(clipped, 1);
        let back = Image::from_pgm(&bytes).unwrap();
        assert_eq!(back.pixels(), &[0.0, 1.0, 256.0, 65535.0, 65535.0, 2.0]);
        assert_eq!(back.bit_depth(), Some(16));
    }

    #[test]
    fn pgm_8bit_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 200]);
        let img = Image::from_pgm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[7.0, 200.0]);
        assert_eq!(img.bit_depth(), Some(8));
    }

    #[test]
    fn pgm_truncated() {
        assert!(Image::from_pgm(b"P5\n4 4\n255\n\x00\x01").is_err());
        assert!(Image::from_pgm(b"P2\n1 1\n255\n0").is_err());
    }

    #[test]
    fn translate_moves_content() {
        let img = Image::new(3, 3, (0..9).map(|v| v as f64).collect()).unwrap();
        let t = img.translated(1, 1, 0.0);
        assert_eq!(t.get(1, 1), 0.0);
        assert_eq!(t.get(2, 2), 4.0);
        assert_eq!(t.get(0, 0), 0.0);
    }
}
