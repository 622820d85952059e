//! Point-spread kernels, projection kernels and the raw projector blob format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A square, odd-sized point-spread kernel, always stored with unit sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PsfRepr", into = "PsfRepr")]
pub struct PsfKernel {
    size: usize,
    weights: Vec<f64>,
}

/// JSON form: either explicit weights or a Gaussian generator description.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PsfRepr {
    Explicit { size: usize, weights: Vec<f64> },
    Gaussian { gaussian: GaussianParams },
}

#[derive(Serialize, Deserialize)]
struct GaussianParams {
    size: usize,
    sigma: f64,
}

impl TryFrom<PsfRepr> for PsfKernel {
    type Error = Error;
    fn try_from(r: PsfRepr) -> Result<Self> {
        match r {
            PsfRepr::Explicit { size, weights } => PsfKernel::new(size, weights),
            PsfRepr::Gaussian { gaussian } => PsfKernel::gaussian(gaussian.size, gaussian.sigma),
        }
    }
}

impl From<PsfKernel> for PsfRepr {
    fn from(k: PsfKernel) -> Self {
        PsfRepr::Explicit {
            size: k.size,
            weights: k.weights,
        }
    }
}

pub(crate) fn check_size(size: usize) -> Result<()> {
    if size < 3 || size.is_multiple_of(2) {
        return Err(invalid(format!("kernel size {size} must be odd and >= 3")));
    }
    Ok(())
}

impl PsfKernel {
    /// Validates the weights and rescales them to unit sum.
    pub fn new(size: usize, mut weights: Vec<f64>) -> Result<Self> {
        check_size(size)?;
        if weights.len() != size * size {
            return Err(invalid(format!(
                "kernel of size {size} needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("kernel weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(invalid("kernel weights must have positive sum"));
        }
        // already-normalized input (e.g. a JSON round-trip) keeps its exact bits
        if (sum - 1.0).abs() > 1e-12 {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(Self { size, weights })
    }

    /// Unit impulse at the kernel center.
    pub fn delta(size: usize) -> Result<Self> {
        check_size(size)?;
        let mut w = vec![0.0; size * size];
        w[size * size / 2] = 1.0;
        Self::new(size, w)
    }

    /// Isotropic Gaussian sampled at pixel centers. A vanishing `sigma`
    /// (underflowing every off-center sample) degenerates to [`PsfKernel::delta`].
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        check_size(size)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("gaussian sigma {sigma} must be positive")));
        }
        let half = (size / 2) as f64;
        let inv = 1.0 / (2.0 * sigma * sigma);
        if !(inv.is_finite()) || (-inv).exp() == 0.0 {
            return Self::delta(size);
        }
        let mut w = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let dx = x as f64 - half;
                let dy = y as f64 - half;
                w.push((-(dx * dx + dy * dy) * inv).exp());
            }
        }
        Self::new(size, w)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn half(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.size + x]
    }

    pub fn energy(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn max_abs_diff(&self, other: &PsfKernel) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Reconstruction kernel derived from a PSF; its element-wise product with an
/// image window, summed, estimates the site brightness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProjectorRepr", into = "ProjectorRepr")]
pub struct Projector {
    size: usize,
    weights: Vec<f64>,
    matrix_sum: f64,
    energy: f64,
}

#[derive(Serialize, Deserialize)]
struct ProjectorRepr {
    size: usize,
    weights: Vec<f64>,
    matrix_sum: f64,
    energy: f64,
}

impl TryFrom<ProjectorRepr> for Projector {
    type Error = Error;
    fn try_from(r: ProjectorRepr) -> Result<Self> {
        let p = Projector::new(r.size, r.weights, r.energy)?;
        let tol = 1e-9 * p.matrix_sum.abs().max(1e-300);
        if (p.matrix_sum - r.matrix_sum).abs() > tol {
            return Err(invalid(format!(
                "stored matrix_sum {} disagrees with weights sum {}",
                r.matrix_sum, p.matrix_sum
            )));
        }
        Ok(p)
    }
}

impl From<Projector> for ProjectorRepr {
    fn from(p: Projector) -> Self {
        ProjectorRepr {
            size: p.size,
            weights: p.weights,
            matrix_sum: p.matrix_sum,
            energy: p.energy,
        }
    }
}

impl Projector {
    /// `energy` is the sum of squared weights of the PSF this projector was built from.
    pub fn new(size: usize, weights: Vec<f64>, energy: f64) -> Result<Self> {
        check_size(size)?;
        if weights.len() != size * size {
            return Err(invalid(format!(
                "projector of size {size} needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("projector weights must be finite"));
        }
        let matrix_sum = weights.iter().sum();
        Ok(Self {
            size,
            weights,
            matrix_sum,
            energy,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrix_sum(&self) -> f64 {
        self.matrix_sum
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Σ(projector ⊙ other) for a same-sized kernel.
    pub fn response(&self, other: &[f64]) -> f64 {
        debug_assert_eq!(other.len(), self.weights.len());
        self.weights.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

const BLOB_MAGIC: &[u8; 4] = b"ATPJ";

/// Writes projector weights as the raw binary channel: `"ATPJ"`, u16 k,
/// u16 count (little-endian), then every projector's weights as
/// little-endian f32, row-major, one after another.
pub fn write_projector_blob<W: Write>(mut w: W, projectors: &[Projector]) -> Result<()> {
    let k = projectors
        .first()
        .map(|p| p.size)
        .ok_or_else(|| invalid("no projectors to write"))?;
    if projectors.iter().any(|p| p.size != k) {
        return Err(invalid("projectors in one blob must share a size"));
    }
    let k16 = u16::try_from(k).map_err(|_| invalid("kernel size exceeds u16"))?;
    let n16 = u16::try_from(projectors.len())
        .map_err(|_| invalid("too many projectors for u16 count"))?;
    w.write_all(BLOB_MAGIC)?;
    w.write_all(&k16.to_le_bytes())?;
    w.write_all(&n16.to_le_bytes())?;
    for p in projectors {
        for &v in &p.weights {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads the raw binary projector channel. Returns `(k, weights per projector)`.
pub fn read_projector_blob<R: Read>(mut r: R) -> Result<(usize, Vec<Vec<f32>>)> {
    let fmt = |reason: &str| Error::Format {
        format: "projector blob",
        reason: reason.to_string(),
    };
    let mut header = [0u8; 8];
    r.read_exact(&mut header).map_err(|_| fmt("short header"))?;
    if &header[..4] != BLOB_MAGIC {
        return Err(fmt("bad magic"));
    }
    let k = u16::from_le_bytes([header[4], header[5]]) as usize;
    let count = u16::from_le_bytes([header[6], header[7]]) as usize;
    check_size(k).map_err(|_| fmt("kernel size must be odd and >= 3"))?;
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![0u8; k * k * 4];
    for _ in 0..count {
        r.read_exact(&mut buf)
            .map_err(|_| fmt("truncated weights"))?;
        out.push(
            buf.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        );
    }
    Ok((k, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_must_be_odd() {
        assert!(PsfKernel::new(4, vec![1.0; 16]).is_err());
        assert!(PsfKernel::new(1, vec![1.0]).is_err());
        assert!(PsfKernel::new(3, vec![0.0; 9]).is_err());
    }

    #[test]
    fn normalizes_on_construction() {
        let k = PsfKernel::new(3, vec![1.0; 9]).unwrap();
        let s: f64 = k.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_json_form() {
        let k: PsfKernel = serde_json::from_str(r#"{"gaussian":{"size":5,"sigma":1.0}}"#).unwrap();
        assert_eq!(k, PsfKernel::gaussian(5, 1.0).unwrap());
        let explicit = serde_json::to_string(&k).unwrap();
        let back: PsfKernel = serde_json::from_str(&explicit).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn projector_json_rejects_wrong_sum() {
        let p = Projector::new(3, vec![1.0; 9], 0.5).unwrap();
        let mut v = serde_json::to_value(&p).unwrap();
        v["matrix_sum"] = serde_json::json!(3.0);
        assert!(serde_json::from_value::<Projector>(v).is_err());
    }

    #[test]
    fn blob_header_and_layout() {
        let p = Projector::new(3, (0..9).map(|v| v as f64 * 0.5).collect(), 1.0).unwrap();
        let mut bytes = Vec::new();
        write_projector_blob(&mut bytes, &[p.clone(), p]).unwrap();
        assert_eq!(&bytes[..8], b"ATPJ\x03\x00\x02\x00");
        assert_eq!(bytes.len(), 8 + 2 * 9 * 4);
        assert_eq!(&bytes[12..16], &0.5f32.to_le_bytes());
        let (k, w) = read_projector_blob(&bytes[..]).unwrap();
        assert_eq!(k, 3);
        assert_eq!(w.len(), 2);
        assert_eq!(w[1][8], 4.0);
    }

    #[test]
    fn blob_rejects_bad_magic() {
        assert!(read_projector_blob(&b"XXXX\x03\x00\x01\x00"[..]).is_err());
    }
}
