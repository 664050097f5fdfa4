//! One-sided finite differences with Richardson extrapolation.

/// Derivative of `f` at `x0` from forward differences at steps h, h/2, h/4,
/// extrapolated to remove the first two error terms.
pub fn forward_derivative(f: impl FnMut(f64) -> f64, x0: f64, h: f64) -> f64 {
    forward_derivative_levels(f, x0, h, 3)
}

/// Forward differences at `levels` halvings of h, with Richardson extrapolation
/// eliminating the first `levels - 1` error terms.
pub fn forward_derivative_levels(mut f: impl FnMut(f64) -> f64, x0: f64, h: f64, levels: usize) -> f64 {
    let f0 = f(x0);
    let mut d: Vec<f64> = (0..levels.max(1))
        .map(|t| {
            let step = h / f64::powi(2.0, t as i32);
            (f(x0 + step) - f0) / step
        })
        .collect();
    let mut factor = 2.0;
    while d.len() > 1 {
        d = d.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
        factor *= 2.0;
    }
    d[0]
}

/// Base step for a transform whose mean is of order `scale`.
pub fn step_for_scale(scale: f64) -> f64 {
    1e-3 * (1.0f64).min(1.0 / scale.abs().max(1e-300))
}

/// Mean of a nonnegative random variable from its LST, -d/dω at 0.
pub fn mean_from_lst(mut lst: impl FnMut(f64) -> f64) -> f64 {
    let crude = (1.0 - lst(1e-6)) / 1e-6;
    let h = step_for_scale(crude.max(1e-12));
    -forward_derivative(lst, 0.0, h)
}

/// Mean from a PGF, d/dz at 1, differentiating towards the interior. The base
/// step is 1e-2 scaled by the mean, since unrolled PGF values carry absolute errors near 1e-15.
pub fn mean_from_pgf(mut pgf: impl FnMut(f64) -> f64) -> f64 {
    let crude = (1.0 - pgf(1.0 - 1e-4)) / 1e-4;
    let h = PGF_STEP * (1.0f64).min(1.0 / crude.max(1e-12));
    -forward_derivative_levels(|d| pgf(1.0 - d), 0.0, h, 4)
}

pub const PGF_STEP: f64 = 1e-2;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_mean() {
        let m = mean_from_lst(|w| 1.0 / (1.0 + 5.0 * w));
        assert!((m - 5.0).abs() < 1e-7 * 5.0, "{m}");
    }

    #[test]
    fn geometric_pgf_mean() {
        let p = 0.3;
        let m = mean_from_pgf(|z| p / (1.0 - (1.0 - p) * z));
        let exact = (1.0 - p) / p;
        assert!((m - exact).abs() < 1e-7 * exact, "{m}");
    }
}
