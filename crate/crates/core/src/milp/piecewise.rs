use serde::{Deserialize, Serialize};

use crate::config::ItParams;

/// Dense-sampling resolution used to certify the chord error.
const ERROR_SAMPLES: usize = 20_000;

/// Breakpoints `(u, p)` of a piecewise-linear curve plus its certified error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCurve {
    pub breakpoints: Vec<(f64, f64)>,
    /// Largest |piecewise − exact| found by dense sampling, same unit as the ordinates.
    pub max_abs_error: f64,
}

impl PiecewiseCurve {
    /// Curve with no reference function; its error is zero by definition.
    pub fn from_breakpoints(breakpoints: Vec<(f64, f64)>) -> Self {
        Self {
            breakpoints,
            max_abs_error: 0.0,
        }
    }

    /// Samples `f` at the given abscissae and certifies the error against `f`.
    pub fn sample(f: impl Fn(f64) -> f64, xs: &[f64]) -> Self {
        let breakpoints: Vec<(f64, f64)> = xs.iter().map(|&x| (x, f(x))).collect();
        let mut curve = Self::from_breakpoints(breakpoints);
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        curve.max_abs_error = (0..=ERROR_SAMPLES)
            .map(|i| lo + (hi - lo) * i as f64 / ERROR_SAMPLES as f64)
            .map(|x| (curve.eval(x) - f(x)).abs())
            .fold(0.0, f64::max);
        curve
    }

    pub fn segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Linear interpolation, clamped to the end segments.
    pub fn eval(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        let i = bp[1..]
            .iter()
            .position(|p| x <= p.0)
            .unwrap_or(bp.len() - 2);
        let (x0, y0) = bp[i];
        let (x1, y1) = bp[i + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Linearisation of the server power law over `u ∈ [0, 1]`.
///
/// Breakpoints sit at `(i/n)^(2/r)` for exponent `r`, which spreads the chord
/// error evenly; the curvature of `u^r` is unbounded at zero, so equal widths
/// waste most of the budget on the upper segments.
pub fn linearize_power_curve(params: &ItParams, n_segments: usize) -> PiecewiseCurve {
    let n = n_segments.max(1);
    let grade = 2.0 / params.exponent;
    let xs: Vec<f64> = (0..=n).map(|i| (i as f64 / n as f64).powf(grade)).collect();
    let mut curve = PiecewiseCurve::sample(|u| params.power_kw(u), &xs);
    // Pin the endpoints to the parameters rather than to a recomputed power.
    curve.breakpoints[0] = (0.0, params.p_idle_kw);
    curve.breakpoints[n] = (1.0, params.p_max_kw);
    curve
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FacilityConfig;
    use approx::assert_abs_diff_eq;

    fn it() -> ItParams {
        FacilityConfig::reference().it
    }

    #[test]
    fn single_segment_is_the_chord() {
        let c = linearize_power_curve(&it(), 1);
        assert_eq!(c.breakpoints, vec![(0.0, 166.7), (1.0, 1000.0)]);
        let exact = 166.7 + 833.3 * 0.5f64.powf(1.32);
        assert_abs_diff_eq!(c.eval(0.5), 583.35, epsilon = 1e-9);
        assert_abs_diff_eq!(c.eval(0.5) - exact, 83.0, epsilon = 1.0);
    }

    #[test]
    fn sixteen_segments_stay_under_two_kw() {
        let c = linearize_power_curve(&it(), 16);
        assert!(c.max_abs_error < 2.0, "{}", c.max_abs_error);
        assert_eq!(c.breakpoints[0], (0.0, 166.7));
        assert_eq!(c.breakpoints[16], (1.0, 1000.0));
    }

    #[test]
    fn graded_breakpoints_beat_equal_widths() {
        let p = it();
        let xs: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let equal = PiecewiseCurve::sample(|u| p.power_kw(u), &xs);
        let graded = linearize_power_curve(&p, 16);
        assert!(equal.max_abs_error > 2.0);
        assert!(graded.max_abs_error < 0.5 * equal.max_abs_error);
    }

    #[test]
    fn chords_overestimate_the_convex_curve() {
        let p = it();
        let c = linearize_power_curve(&p, 5);
        for i in 0..=1000 {
            let u = i as f64 / 1000.0;
            assert!(c.eval(u) >= p.power_kw(u) - 1e-9);
        }
    }

    #[test]
    fn eval_hits_breakpoints_exactly() {
        let c = linearize_power_curve(&it(), 8);
        for &(u, p) in &c.breakpoints {
            assert_abs_diff_eq!(c.eval(u), p, epsilon = 1e-9);
        }
    }
}
