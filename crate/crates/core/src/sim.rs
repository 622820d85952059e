//! Synthetic fluorescence frames from the photoelectron model
//! `λ(x) = b + Σ_i PSF_i(x)·γ_i`.
//!
//! Each site's kernel is stamped at the nearest pixel to its lattice
//! position. With `subpixel` enabled the kernel is first shifted by the
//! fractional remainder using separable linear interpolation. Sampling draws per-atom
//! brightness from a zero-truncated normal, per-pixel counts from a Poisson
//! law and optional Gaussian read noise, then quantizes to the camera bit
//! depth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::AtomGrid;
use crate::image::Image;
use crate::kernel::PsfKernel;

/// Site occupancy: an explicit row-major pattern or an independent fill probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Occupancy {
    Pattern(Vec<bool>),
    Fill(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    None,
    #[default]
    Poisson,
}

fn default_bit_depth() -> Option<u32> {
    Some(16)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub grid: AtomGrid,
    pub psf: PsfKernel,
    pub background: f64,
    pub brightness_mean: f64,
    #[serde(default)]
    pub brightness_jitter: f64,
    pub occupancy: Occupancy,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub read_noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Camera quantization; `None` keeps float frames.
    #[serde(default = "default_bit_depth")]
    pub bit_depth: Option<u32>,
    /// Shift each stamped kernel to the exact sub-pixel site position.
    #[serde(default)]
    pub subpixel: bool,
}

/// Per-frame truth: which sites hold an atom and the brightness each one emitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rows: usize,
    pub cols: usize,
    pub occupancy: Vec<bool>,
    pub gammas: Vec<f64>,
}

impl SceneSpec {
    /// 10×10 sites on a 256×256 camera: pitch 23 px, 31×31 Gaussian PSF with
    /// σ = 2 px, 1000 photoelectrons per atom (10 % jitter), background 10,
    /// half filling, Poisson noise, 16-bit frames.
    pub fn default_10x10() -> Self {
        Self::square_array(10, 23.0, 31, 2.0, 24.0).expect("default scene geometry is valid")
    }

    /// `n`×`n` axis-aligned array with the default photometry. The frame is
    /// sized to leave `margin` pixels around the outermost sites.
    pub fn square_array(n: usize, pitch: f64, k: usize, sigma: f64, margin: f64) -> Result<Self> {
        let extent = (n.saturating_sub(1)) as f64 * pitch;
        let side = (2.0 * margin + extent).ceil() as usize + 1;
        Ok(Self {
            width: side,
            height: side,
            grid: AtomGrid::new(n, n, (margin, margin), pitch, 0.0)?,
            psf: make_gaussian_psf(k, sigma)?,
            background: 10.0,
            brightness_mean: 1000.0,
            brightness_jitter: 0.1,
            occupancy: Occupancy::Fill(0.5),
            noise: NoiseModel::Poisson,
            read_noise_sigma: 0.0,
            seed: 1,
            bit_depth: Some(16),
            subpixel: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("background", self.background),
            ("brightness_mean", self.brightness_mean),
            ("brightness_jitter", self.brightness_jitter),
            ("read_noise_sigma", self.read_noise_sigma),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        match &self.occupancy {
            Occupancy::Fill(p) if !(0.0..=1.0).contains(p) => {
                Err(invalid(format!("occupancy fill {p} outside [0, 1]")))
            }
            Occupancy::Pattern(v) if v.len() != self.grid.len() => Err(invalid(format!(
                "occupancy pattern has {} entries for {} sites",
                v.len(),
                self.grid.len()
            ))),
            _ => Ok(()),
        }?;
        if let Some(b) = self.bit_depth {
            if !(1..=16).contains(&b) {
                return Err(invalid(format!("bit_depth {b} outside 1..=16")));
            }
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid("image dimensions must be non-zero"));
        }
        Ok(())
    }
}

/// Normalized isotropic Gaussian kernel sampled at pixel centers.
pub fn make_gaussian_psf(k: usize, sigma: f64) -> Result<PsfKernel> {
    PsfKernel::gaussian(k, sigma)
}

/// Evaluates the photoelectron model for explicit per-site brightnesses,
/// stamping kernels at the nearest pixel. Sites with zero brightness are
/// skipped and need not fit in the frame.
pub fn render(
    grid: &AtomGrid,
    psf: &PsfKernel,
    background: f64,
    gammas: &[f64],
    width: usize,
    height: usize,
) -> Result<Image> {
    render_with(grid, psf, background, gammas, width, height, false)
}

/// Kernel shifted by a fractional offset in `[-0.5, 0.5]` along each axis.
fn shift_kernel(psf: &PsfKernel, fx: f64, fy: f64) -> Vec<f64> {
    let k = psf.size();
    let src = psf.weights();
    let lerp = |get: &dyn Fn(i64) -> f64, i: i64, f: f64| {
        if f >= 0.0 {
            (1.0 - f) * get(i) + f * get(i - 1)
        } else {
            (1.0 + f) * get(i) - f * get(i + 1)
        }
    };
    let ks = k as i64;
    let mut tmp = vec![0.0; k * k];
    for y in 0..k {
        let row = &src[y * k..(y + 1) * k];
        let get = |i: i64| {
            if (0..ks).contains(&i) {
                row[i as usize]
            } else {
                0.0
            }
        };
        for x in 0..k {
            tmp[y * k + x] = lerp(&get, x as i64, fx);
        }
    }
    let mut out = vec![0.0; k * k];
    for x in 0..k {
        let get = |j: i64| {
            if (0..ks).contains(&j) {
                tmp[j as usize * k + x]
            } else {
                0.0
            }
        };
        for y in 0..k {
            out[y * k + x] = lerp(&get, y as i64, fy);
        }
    }
    out
}

pub fn render_with(
    grid: &AtomGrid,
    psf: &PsfKernel,
    background: f64,
    gammas: &[f64],
    width: usize,
    height: usize,
    subpixel: bool,
) -> Result<Image> {
    if gammas.len() != grid.len() {
        return Err(invalid(format!(
            "{} brightness values for {} sites",
            gammas.len(),
            grid.len()
        )));
    }
    let mut pixels = vec![background; width * height];
    let k = psf.size();
    let half = psf.half() as i64;
    for ((r, c), &gamma) in grid.sites().zip(gammas) {
        if gamma == 0.0 {
            continue;
        }
        let (px, py) = grid.site_position(r, c)?;
        let (cx, cy) = (px.round() as i64, py.round() as i64);
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
        let shifted;
        let stamp: &[f64] = if subpixel {
            shifted = shift_kernel(psf, px - cx as f64, py - cy as f64);
            &shifted
        } else {
            psf.weights()
        };
        let (x0, y0) = (x0 as usize, y0 as usize);
        for dy in 0..k {
            let dst = &mut pixels[(y0 + dy) * width + x0..(y0 + dy) * width + x0 + k];
            let src = &stamp[dy * k..(dy + 1) * k];
            for (d, w) in dst.iter_mut().zip(src) {
                *d += w * gamma;
            }
        }
    }
    Image::new(width, height, pixels)
}

/// Noise-free expected frame. A fill probability contributes its expectation,
/// `p·brightness_mean`, at every site.
pub fn expected_image(spec: &SceneSpec) -> Result<Image> {
    spec.validate()?;
    let gammas: Vec<f64> = match &spec.occupancy {
        Occupancy::Pattern(p) => p
            .iter()
            .map(|&o| if o { spec.brightness_mean } else { 0.0 })
            .collect(),
        Occupancy::Fill(p) => vec![p * spec.brightness_mean; spec.grid.len()],
    };
    render_with(
        &spec.grid,
        &spec.psf,
        spec.background,
        &gammas,
        spec.width,
        spec.height,
        spec.subpixel,
    )
}

fn draw_truth(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<GroundTruth> {
    let occupancy: Vec<bool> = match &spec.occupancy {
        Occupancy::Pattern(p) => p.clone(),
        Occupancy::Fill(p) => (0..spec.grid.len())
            .map(|_| rng.random::<f64>() < *p)
            .collect(),
    };
    let sd = spec.brightness_jitter * spec.brightness_mean;
    let normal = if sd > 0.0 {
        Some(Normal::new(spec.brightness_mean, sd).map_err(|e| invalid(e.to_string()))?)
    } else {
        None
    };
    let gammas = occupancy
        .iter()
        .map(|&o| {
            if !o {
                return 0.0;
            }
            match &normal {
                None => spec.brightness_mean,
                Some(n) => {
                    // truncated at zero by rejection
                    for _ in 0..64 {
                        let g = n.sample(rng);
                        if g >= 0.0 {
                            return g;
                        }
                    }
                    0.0
                }
            }
        })
        .collect();
    Ok(GroundTruth {
        rows: spec.grid.rows(),
        cols: spec.grid.cols(),
        occupancy,
        gammas,
    })
}

/// Draws one frame with the scene's own seed.
pub fn sample_image(spec: &SceneSpec) -> Result<(Image, GroundTruth)> {
    sample_with_seed(spec, spec.seed)
}

/// Frame `index` of a sequence; its RNG stream is seeded with `seed + index`.
pub fn sample_frame(spec: &SceneSpec, index: u64) -> Result<(Image, GroundTruth)> {
    sample_with_seed(spec, spec.seed.wrapping_add(index))
}

fn sample_with_seed(spec: &SceneSpec, seed: u64) -> Result<(Image, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = draw_truth(spec, &mut rng)?;
    let lambda = render_with(
        &spec.grid,
        &spec.psf,
        spec.background,
        &truth.gammas,
        spec.width,
        spec.height,
        spec.subpixel,
    )?;
    let read = if spec.read_noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.read_noise_sigma).map_err(|e| invalid(e.to_string()))?)
    } else {
        None
    };
    let maxval = spec.bit_depth.map(|b| ((1u32 << b) - 1) as f64);
    let mut saturated = 0usize;
    let pixels: Vec<f64> = lambda
        .pixels()
        .iter()
        .map(|&l| {
            let mut v = match spec.noise {
                NoiseModel::None => l,
                NoiseModel::Poisson if l > 0.0 => {
                    Poisson::new(l).map(|p| p.sample(&mut rng)).unwrap_or(l)
                }
                NoiseModel::Poisson => 0.0,
            };
            if let Some(n) = &read {
                v += n.sample(&mut rng);
            }
            v = v.max(0.0);
            if let Some(m) = maxval {
                v = v.round();
                if v > m {
                    saturated += 1;
                    v = m;
                }
            }
            v
        })
        .collect();
    if saturated > 0 {
        log::warn!(
            "{saturated} pixels saturated at {}-bit depth",
            spec.bit_depth.unwrap_or(16)
        );
    }
    let image = Image::new(spec.width, spec.height, pixels)?.with_bit_depth(spec.bit_depth);
    Ok((image, truth))
}
