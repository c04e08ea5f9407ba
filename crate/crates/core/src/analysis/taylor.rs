use super::AnalysisError;
use crate::error::Result;
use crate::field::ElectrodeBasis;
use crate::{Point, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorOptions {
    pub direction: Vec3,
    /// Base finite-difference step (µm); the stencil reaches 4 steps out.
    pub step: f64,
}

impl Default for TaylorOptions {
    fn default() -> Self {
        Self { direction: Vec3::z(), step: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorResult {
    /// c_n = φ⁽ⁿ⁾(s₀)/n! in V/µmⁿ, for n = 0..=order.
    pub coefficients: Vec<f64>,
    pub step: f64,
    /// Estimated round-off of each coefficient relative to its magnitude.
    pub conditioning: Vec<f64>,
    pub warnings: Vec<String>,
}

/// 1D Taylor coefficients of φ along `opts.direction` at `p`, from central
/// differences at h and 2h combined by Richardson extrapolation. Exact for
/// polynomials up to degree five.
pub fn axial_taylor<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    voltages: &[f64],
    p: &Point,
    order: usize,
    opts: &TaylorOptions,
) -> Result<TaylorResult> {
    if !(1..=4).contains(&order) {
        return Err(AnalysisError::BadOrder(order).into());
    }
    let h = opts.step;
    if !(h > 0.0) {
        return Err(AnalysisError::InvalidProfile(format!("Taylor step must be positive, got {h}")).into());
    }
    let dir = opts.direction.normalize();
    let mut f = [0.0; 9];
    for (i, k) in (-4i32..=4).enumerate() {
        f[i] = basis.potential(voltages, &(p + dir * (k as f64 * h)))?;
    }
    let at = |k: i32| f[(k + 4) as usize];
    // O(h²) central differences with spacing s·h
    let diffs = |s: i32| {
        let hs = s as f64 * h;
        [
            (at(s) - at(-s)) / (2.0 * hs),
            (at(s) - 2.0 * at(0) + at(-s)) / (hs * hs),
            (at(2 * s) - 2.0 * at(s) + 2.0 * at(-s) - at(-2 * s)) / (2.0 * hs.powi(3)),
            (at(2 * s) - 4.0 * at(s) + 6.0 * at(0) - 4.0 * at(-s) + at(-2 * s)) / hs.powi(4),
        ]
    };
    let d1 = diffs(1);
    let d2 = diffs(2);
    let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let stencil_sum = [1.0, 4.0, 6.0, 16.0];
    let mut coefficients = vec![at(0)];
    let mut conditioning = vec![0.0];
    let mut warnings = Vec::new();
    let mut factorial = 1.0;
    for n in 1..=order {
        factorial *= n as f64;
        let d = (4.0 * d1[n - 1] - d2[n - 1]) / 3.0;
        let c = d / factorial;
        let noise = 2.0 * f64::EPSILON * fmax * stencil_sum[n - 1] / h.powi(n as i32) / factorial;
        let cond = if c != 0.0 { noise / c.abs() } else { f64::INFINITY };
        coefficients.push(c);
        conditioning.push(cond);
        if n == order && cond > 1e-3 {
            warnings.push(format!(
                "order-{n} coefficient is within {:.1e} of the round-off floor at step {h} µm; increase the step",
                cond
            ));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(TaylorResult { coefficients, step: h, conditioning, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnBasis;

    #[test]
    fn quartic_is_exact() {
        let b = FnBasis::axial_polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let r = axial_taylor(&b, &[1.0], &Point::origin(), 4, &TaylorOptions::default()).unwrap();
        assert!((r.coefficients[4] - 1.0).abs() < 1e-9);
        for c in &r.coefficients[..4] {
            assert!(c.abs() < 1e-6);
        }
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn shifted_polynomial_coefficients() {
        // φ = (z - 1)³ expanded at z = 3: 8 + 12 u + 6 u² + u³
        let b = FnBasis::axial_polynomial(vec![-1.0, 3.0, -3.0, 1.0]);
        let r = axial_taylor(&b, &[1.0], &Point::new(0.0, 0.0, 3.0), 4, &TaylorOptions { step: 0.7, ..Default::default() }).unwrap();
        for (c, w) in r.coefficients.iter().zip([8.0, 12.0, 6.0, 1.0, 0.0]) {
            assert!((c - w).abs() < 1e-8, "{:?}", r.coefficients);
        }
    }

    #[test]
    fn tiny_steps_warn() {
        let b = FnBasis::axial_polynomial(vec![1.0, 0.0, 0.0, 0.0, 1e-6]);
        let r = axial_taylor(&b, &[1.0], &Point::origin(), 4, &TaylorOptions { step: 1e-3, ..Default::default() }).unwrap();
        assert!(!r.warnings.is_empty());
        assert!(axial_taylor(&b, &[1.0], &Point::origin(), 5, &TaylorOptions::default()).is_err());
    }
}
