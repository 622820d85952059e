use crate::error::{invalid, Error, Result};

pub const OTSU_BINS: usize = 256;

/// Minimum inter-class to total variance ratio accepted as bimodal.
pub const MIN_BIMODALITY: f64 = 0.5;

/// Outcome of Otsu's method on a 256-bin histogram spanning `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OtsuSplit {
    pub threshold: f64,
    /// Between-class variance divided by total variance, in `[0, 1]`.
    pub ratio: f64,
    pub bin_width: f64,
}

/// Otsu's threshold over arbitrary real samples.
///
/// When several cut points reach the same between-class variance (an empty
/// gap between clusters) the threshold is placed in the middle of that
/// plateau. Degenerate input (all samples equal) yields `ratio = 0`.
pub fn otsu(samples: &[f64]) -> Result<OtsuSplit> {
    if samples.len() < 2 {
        return Err(invalid("Otsu needs at least two samples"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(invalid("Otsu samples must be finite"));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if hi <= lo {
        return Ok(OtsuSplit {
            threshold: lo,
            ratio: 0.0,
            bin_width: 0.0,
        });
    }
    let width = (hi - lo) / OTSU_BINS as f64;
    let mut hist = [0f64; OTSU_BINS];
    for &v in samples {
        let b = (((v - lo) / width) as usize).min(OTSU_BINS - 1);
        hist[b] += 1.0;
    }
    let center = |b: usize| lo + (b as f64 + 0.5) * width;
    let total = samples.len() as f64;
    let sum_total: f64 = hist.iter().enumerate().map(|(b, h)| h * center(b)).sum();
    let mean = sum_total / total;
    let var_total: f64 = hist
        .iter()
        .enumerate()
        .map(|(b, h)| h * (center(b) - mean).powi(2))
        .sum::<f64>()
        / total;

    let mut between = [f64::NEG_INFINITY; OTSU_BINS];
    let (mut w0, mut s0) = (0.0, 0.0);
    for t in 0..OTSU_BINS - 1 {
        w0 += hist[t];
        s0 += hist[t] * center(t);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = s0 / w0;
        let m1 = (sum_total - s0) / w1;
        between[t] = (w0 / total) * (w1 / total) * (m1 - m0).powi(2);
    }
    let best = between.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = best.abs() * 1e-12;
    let first = between.iter().position(|v| *v >= best - tol).unwrap_or(0);
    let last = between
        .iter()
        .rposition(|v| *v >= best - tol)
        .unwrap_or(first);
    // cut after bin t sits at the upper edge of bin t
    let edge = |t: usize| lo + (t as f64 + 1.0) * width;
    let threshold = 0.5 * (edge(first) + edge(last));
    let ratio = if var_total > 0.0 {
        (best / var_total).min(1.0)
    } else {
        0.0
    };
    Ok(OtsuSplit {
        threshold,
        ratio,
        bin_width: width,
    })
}

/// Detection threshold from emission samples: Otsu's split, rejected unless
/// the samples are clearly bimodal.
pub fn calibrate_threshold(emissions: &[f64]) -> Result<f64> {
    let split = otsu(emissions)?;
    if !(split.ratio > MIN_BIMODALITY) {
        return Err(Error::NotBimodal { ratio: split.ratio });
    }
    Ok(split.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn separated_clusters() {
        let s = [0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0];
        let t = calibrate_threshold(&s).unwrap();
        assert!(t > 0.0 && t < 10.0);
        assert_eq!(s.iter().filter(|v| **v > t).count(), 4);
        // plateau midpoint
        assert!((t - 5.0).abs() < 10.0 / 256.0);
    }

    #[test]
    fn constant_samples_are_not_bimodal() {
        assert!(matches!(
            calibrate_threshold(&[3.0; 20]),
            Err(Error::NotBimodal { .. })
        ));
    }

    #[test]
    fn single_gaussian_ratio_stays_below_clear_bimodality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = Normal::new(0.0, 1.0).unwrap();
        let s: Vec<f64> = (0..2000).map(|_| n.sample(&mut rng)).collect();
        // a single Gaussian reaches ratio 2/pi ~ 0.64 at best; a uniform reaches 0.75
        let split = otsu(&s).unwrap();
        assert!(split.ratio < 0.7);
    }

    #[test]
    fn labeled_gaussian_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dark = Normal::new(0.05, 0.02).unwrap();
        let bright = Normal::new(1.0, 0.05).unwrap();
        let mut s = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..500 {
            s.push(dark.sample(&mut rng));
            labels.push(false);
            s.push(bright.sample(&mut rng));
            labels.push(true);
        }
        let t = calibrate_threshold(&s).unwrap();
        let errors = s
            .iter()
            .zip(&labels)
            .filter(|(v, l)| (**v > t) != **l)
            .count();
        assert_eq!(errors, 0);
    }

    #[test]
    fn too_few_samples() {
        assert!(otsu(&[1.0]).is_err());
    }
}
