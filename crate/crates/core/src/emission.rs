//! Per-site reconstruction output: emission and occupancy matrices.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which emission value a threshold is compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionChannel {
    Raw,
    #[default]
    Normalized,
}

impl std::str::FromStr for EmissionChannel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(Self::Raw),
            "normalized" => Ok(Self::Normalized),
            other => Err(format!("unknown emission channel '{other}'")),
        }
    }
}

/// Reconstructed brightness per site, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Σ(projector ⊙ window), or the least-squares brightness in baseline mode.
    pub raw: Vec<f64>,
    /// `raw` divided by the projector's matrix sum.
    pub normalized: Vec<f64>,
}

impl EmissionMatrix {
    pub fn new(rows: usize, cols: usize, raw: Vec<f64>, normalized: Vec<f64>) -> Result<Self> {
        if raw.len() != rows * cols || normalized.len() != rows * cols {
            return Err(invalid("emission vectors must have rows*cols entries"));
        }
        Ok(Self {
            rows,
            cols,
            raw,
            normalized,
        })
    }

    pub fn channel(&self, ch: EmissionChannel) -> &[f64] {
        match ch {
            EmissionChannel::Raw => &self.raw,
            EmissionChannel::Normalized => &self.normalized,
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// rows×cols CSV with 9 significant digits.
    pub fn to_csv(&self, ch: EmissionChannel) -> String {
        let values = self.channel(ch);
        let mut out = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = values[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(|v| format_sig(*v, 9))
                .collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// Formats `v` with `digits` significant digits, without exponent for ordinary magnitudes.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        return format!("{:.*e}", digits - 1, v);
    }
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Thresholded per-site occupancy, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyMatrix {
    pub rows: usize,
    pub cols: usize,
    pub occupied: Vec<bool>,
}

impl OccupancyMatrix {
    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|o| **o).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let line: Vec<&str> = self.occupied[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(|o| if *o { "1" } else { "0" })
                .collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// One pixel per site, 8-bit: occupied sites black (0), empty white (255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend(self.occupied.iter().map(|o| if *o { 0u8 } else { 255u8 }));
        out
    }

    pub fn mismatches(&self, truth: &[bool]) -> usize {
        self.occupied
            .iter()
            .zip(truth)
            .filter(|(a, b)| a != b)
            .count()
    }
}
