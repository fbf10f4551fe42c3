//! Certified first-eigenvalue estimates and the Euler–Lagrange residual.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// Angular modes beyond the scanned range could undercut the result.
    pub under_resolved: bool,
    /// The metric has harmonic spinors, so `lambda1` is zero.
    pub kernel: bool,
    /// The minimisation stopped without meeting its residual tolerance.
    pub not_converged: bool,
}

impl EstimateFlags {
    pub fn any(&self) -> bool {
        self.under_resolved || self.kernel || self.not_converged
    }
}

/// `λ₁⁺ · Vol^{1/2}` together with how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaminEstimate<T> {
    pub lambda1: T,
    pub volume: T,
    /// `lambda1 · volume^{1/2}`.
    pub product: T,
    /// Relative defect of `Dφ = λ|φ|²φ` in the `L^{4/3}` norm.
    pub el_residual: T,
    pub iterations: usize,
    pub converged: bool,
    /// Number of grid samples of the discretisation.
    pub grid: usize,
    /// Largest angular index scanned, when the base is a surface of revolution.
    pub k_max: Option<f64>,
    pub flags: EstimateFlags,
}

impl<T: Real> LaminEstimate<T> {
    pub fn new(lambda1: T, volume: T) -> Self {
        Self {
            lambda1,
            volume,
            product: lambda1 * volume.sqrt(),
            el_residual: T::zero(),
            iterations: 0,
            converged: true,
            grid: 0,
            k_max: None,
            flags: EstimateFlags::default(),
        }
    }
}

/// Euler–Lagrange residual of a sampled eigenspinor.
///
/// The samples describe `D ψ = λ W ψ` in a flat reference metric: `weight`
/// is `W`, `density` is `|ψ|²`, `area` the reference area element of each
/// sample. With `ψ̂` scaled to `‖ψ̂‖₄ = 1` and `P = λ ‖W‖₂` the quantity
/// returned is `‖Dψ̂ - P|ψ̂|²ψ̂‖_{4/3} / ‖Dψ̂‖_{4/3}`. Both norms are
/// conformally invariant, so the value is that of the curved metric.
pub fn euler_lagrange_residual<T: Real>(weight: &[T], density: &[T], area: &[T], lambda: T) -> T {
    let four_thirds = T::lit(4.0 / 3.0);
    let two_thirds = T::lit(2.0 / 3.0);
    let vol: T = weight
        .iter()
        .zip(area)
        .fold(T::zero(), |acc, (&w, &a)| acc + a * w * w);
    let p = lambda * vol.sqrt();
    let rho2: T = density
        .iter()
        .zip(area)
        .fold(T::zero(), |acc, (&r, &a)| acc + a * r * r);
    let scale = rho2.sqrt();
    if !(scale > T::zero()) {
        return T::infinity();
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..weight.len() {
        let r = density[i] / scale;
        let g = r.powf(two_thirds);
        num = num + area[i] * (lambda * weight[i] - p * r).abs().powf(four_thirds) * g;
        den = den + area[i] * (lambda * weight[i]).abs().powf(four_thirds) * g;
    }
    (num / den).powf(T::lit(0.75))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_vanishes_when_weight_matches_density() {
        let w = [1.0, 2.0, 0.5, 3.0];
        let dens: Vec<f64> = w.iter().map(|x| 7.0 * x).collect();
        let area = [0.1, 0.2, 0.3, 0.4];
        assert!(euler_lagrange_residual(&w, &dens, &area, 2.5) < 1e-14);
        let dens2 = [1.0, 1.0, 1.0, 1.0];
        assert!(euler_lagrange_residual(&w, &dens2, &area, 2.5) > 0.1);
    }

    #[test]
    fn product_matches_definition() {
        let e = LaminEstimate::new(2.0f64, 9.0);
        assert_eq!(e.product, 6.0);
    }
}
