use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_CLOCK_HZ: f64 = 100e6;

/// Reported accelerator latencies: (sites, seconds) for 10×10 and 40×40 arrays.
pub const REPORTED_LATENCIES: [(f64, f64); 2] = [(100.0, 115e-6), (1600.0, 1.825e-3)];

/// Linear per-site latency in clock cycles: `cycles(n) = cycles_per_atom·n + fixed_cycles`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub cycles_per_atom: f64,
    pub fixed_cycles: f64,
    pub clock_hz: f64,
}

impl LatencyModel {
    pub fn new(cycles_per_atom: f64, fixed_cycles: f64, clock_hz: f64) -> Result<Self> {
        if !(cycles_per_atom > 0.0) || !(clock_hz > 0.0) || !(fixed_cycles >= 0.0) {
            return Err(invalid(
                "latency model needs cycles_per_atom > 0, clock_hz > 0 and fixed_cycles >= 0",
            ));
        }
        Ok(Self {
            cycles_per_atom,
            fixed_cycles,
            clock_hz,
        })
    }

    /// The two-point fit of the reported accelerator latencies at 100 MHz.
    pub fn reported() -> Self {
        fit_latency_model(&REPORTED_LATENCIES, DEFAULT_CLOCK_HZ)
            .expect("reported points are distinct")
    }
}

/// Least-squares line through `(n_atoms, seconds)` points in cycle space.
///
/// Seconds are converted to cycles and rounded to the nearest 1e-6 cycle
/// before fitting, which removes decimal-to-binary noise from inputs like
/// `115e-6` so that exact integer cycle counts fit exactly.
pub fn fit_latency_model(points: &[(f64, f64)], clock_hz: f64) -> Result<LatencyModel> {
    if points.len() < 2 {
        return Err(invalid("latency fit needs at least two points"));
    }
    let cyc: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, s)| (n, (s * clock_hz * 1e6).round() / 1e6))
        .collect();
    let m = cyc.len() as f64;
    let mean_n = cyc.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_c = cyc.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = cyc.iter().map(|p| (p.0 - mean_n).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let sxy: f64 = cyc.iter().map(|p| (p.0 - mean_n) * (p.1 - mean_c)).sum();
    let slope = sxy / sxx;
    let intercept = mean_c - slope * mean_n;
    LatencyModel::new(slope, intercept.max(0.0), clock_hz)
}

/// Predicted latency in seconds for `n_atoms` sites.
pub fn predict_latency(model: &LatencyModel, n_atoms: f64) -> f64 {
    (model.cycles_per_atom * n_atoms + model.fixed_cycles) / model.clock_hz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_points() {
        let m = LatencyModel::reported();
        assert_eq!(m.cycles_per_atom, 114.0);
        assert_eq!(m.fixed_cycles, 100.0);
        assert!((predict_latency(&m, 100.0) - 115e-6).abs() < 1e-15);
        assert!((predict_latency(&m, 1600.0) - 1.825e-3).abs() < 1e-15);
        // intercept: 100 cycles at 100 MHz
        assert!((predict_latency(&m, 0.0) - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn repeated_point_is_degenerate() {
        assert!(matches!(
            fit_latency_model(&[(10.0, 1e-6), (10.0, 1e-6)], 1e8),
            Err(Error::DegenerateFit)
        ));
    }

    #[test]
    fn exact_line() {
        let clock = 1e6;
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 30.0]
            .iter()
            .map(|&n| (n, (50.0 * n + 7.0) / clock))
            .collect();
        let m = fit_latency_model(&pts, clock).unwrap();
        assert!((m.cycles_per_atom - 50.0).abs() < 1e-9);
        assert!((m.fixed_cycles - 7.0).abs() < 1e-9);
    }
}
