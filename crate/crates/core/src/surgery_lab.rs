//! Neck metrics for 0-dimensional surgery and the convergence experiment.
//!
//! Near a surgery point the flat metric is rescaled by `f_ε`: `1` outside
//! `B(3ε)`, `1/d` on the annulus `ε < d ≤ 2ε`, where `f² g` is the product
//! cylinder of length `log 2`, and a quintic transition in between. The
//! experiment replaces the general neck by rotationally symmetric profiles so
//! that the surface-of-revolution solver applies.

use serde::{Deserialize, Serialize};

use crate::conformal_opt::{minimize_lamin, MinimizeConfig, RevolutionBase};
use crate::error::{Error, Result};
use crate::revolution_dirac::{dumbbell, handle, RevolutionProfile};
use crate::scalar::Real;
use crate::z2_forms::{alpha, QuadraticForm};

/// Interpolation used on the transition annulus `2ε < d < 3ε`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Quintic Hermite matching value, slope and curvature at both ends.
    #[default]
    QuinticHermite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckSpec<T> {
    pub epsilon: T,
    /// Radius of the flat patch around the surgery point.
    pub rho: T,
    #[serde(default)]
    pub smoothing: Smoothing,
}

impl<T: Real> NeckSpec<T> {
    pub fn new(epsilon: T, rho: T) -> Result<Self> {
        let spec = Self {
            epsilon,
            rho,
            smoothing: Smoothing::QuinticHermite,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let three = T::lit(3.0);
        if !(self.epsilon > T::zero()) || !(three * self.epsilon < self.rho) || !self.rho.is_finite() {
            return Err(Error::InvalidNeck(format!(
                "need 0 < 3ε < ρ, got ε = {}, ρ = {}",
                self.epsilon, self.rho
            )));
        }
        Ok(())
    }

    /// The gradient bound `2/ε` stated for the transition.
    pub fn gradient_bound(&self) -> T {
        T::lit(2.0) / self.epsilon
    }

    /// The bound `1/ε²`, which the quintic meets for every `ε ≤ 1/2`.
    pub fn scaled_gradient_bound(&self) -> T {
        T::one() / (self.epsilon * self.epsilon)
    }

    /// Smallest `ε` for which any transition can satisfy `|f'| ≤ 2/ε`: the
    /// mean slope `|1 - 1/(2ε)| / ε` must not exceed it.
    pub fn literal_bound_threshold() -> T {
        T::one() / T::lit(6.0)
    }

    /// Quintic coefficients in `τ = (d - 2ε)/ε`.
    fn transition(&self, d: T) -> (T, T) {
        let e = self.epsilon;
        let a = e + e;
        let t = (d - a) / e;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let lit = T::lit;
        let y0 = T::one() / a;
        let y1 = -e / (a * a);
        let y2 = lit(2.0) * e * e / (a * a * a);
        let h0 = T::one() - lit(10.0) * t3 + lit(15.0) * t4 - lit(6.0) * t5;
        let h1 = t - lit(6.0) * t3 + lit(8.0) * t4 - lit(3.0) * t5;
        let h2 = lit(0.5) * t2 - lit(1.5) * t3 + lit(1.5) * t4 - lit(0.5) * t5;
        let g0 = lit(10.0) * t3 - lit(15.0) * t4 + lit(6.0) * t5;
        let dh0 = -lit(30.0) * t2 + lit(60.0) * t3 - lit(30.0) * t4;
        let dh1 = T::one() - lit(18.0) * t2 + lit(32.0) * t3 - lit(15.0) * t4;
        let dh2 = t - lit(4.5) * t2 + lit(6.0) * t3 - lit(2.5) * t4;
        let value = y0 * h0 + y1 * h1 + y2 * h2 + g0;
        let slope = (y0 * dh0 + y1 * dh1 + y2 * dh2 - dh0) / e;
        (value, slope)
    }
}

fn check_domain<T: Real>(spec: &NeckSpec<T>, d: T) -> Result<()> {
    spec.validate()?;
    if !(d > spec.epsilon) || !d.is_finite() {
        return Err(Error::OutOfDomain(format!(
            "distance {d} lies in the excised ball of radius {}",
            spec.epsilon
        )));
    }
    Ok(())
}

/// `f_ε(d)` for a distance `d > ε` from the surgery point.
pub fn neck_factor<T: Real>(spec: &NeckSpec<T>, d: T) -> Result<T> {
    check_domain(spec, d)?;
    let e = spec.epsilon;
    Ok(if d >= T::lit(3.0) * e {
        T::one()
    } else if d <= e + e {
        T::one() / d
    } else {
        spec.transition(d).0
    })
}

/// `f_ε'(d)`.
pub fn neck_factor_derivative<T: Real>(spec: &NeckSpec<T>, d: T) -> Result<T> {
    check_domain(spec, d)?;
    let e = spec.epsilon;
    Ok(if d >= T::lit(3.0) * e {
        T::zero()
    } else if d <= e + e {
        -T::one() / (d * d)
    } else {
        spec.transition(d).1
    })
}

/// Largest `|f_ε'|` over `samples` equispaced points of `[2ε, 3ε]`.
pub fn max_transition_gradient<T: Real>(spec: &NeckSpec<T>, samples: usize) -> Result<T> {
    let e = spec.epsilon;
    let n = samples.max(2);
    let mut worst = T::zero();
    for i in 0..n {
        let d = e + e + e * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1);
        worst = worst.max(neck_factor_derivative(spec, d)?.abs());
    }
    Ok(worst)
}

/// Panels and nodes of the composite Gauss–Legendre rule.
const PANELS: usize = 64;
const GL_NODES: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Deviation of `(C(ε, 2ε), f² g_flat)` from the cylinder
/// `[0, log 2) × S¹` for the built-in factor.
pub fn cylinder_check<T: Real>(spec: &NeckSpec<T>) -> Result<T> {
    spec.validate()?;
    cylinder_check_with(spec, |d| neck_factor(spec, d).expect("d inside the annulus"))
}

/// As `cylinder_check`, for an arbitrary factor on the annulus.
///
/// Returns the larger of the relative error of the radial length
/// `∫ f dd` against `log 2` and the worst relative error of the circle
/// length `2π d f(d)` against `2π`.
pub fn cylinder_check_with<T: Real>(spec: &NeckSpec<T>, factor: impl Fn(T) -> T) -> Result<T> {
    spec.validate()?;
    let e = spec.epsilon;
    let width = e / T::from_usize_lossy(PANELS);
    let half = T::lit(0.5);
    let mut length = T::zero();
    let mut circle = T::zero();
    for p in 0..PANELS {
        let mid = e + width * (T::from_usize_lossy(p) + half);
        for &(x, w) in &GL_NODES {
            let d = mid + half * width * T::lit(x);
            let f = factor(d);
            length = length + half * width * T::lit(w) * f;
            circle = circle.max((d * f - T::one()).abs());
        }
    }
    let ln2 = T::LN_2();
    Ok(((length - ln2) / ln2).abs().max(circle))
}

/// Geometry carrying the surgery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurgeryBase {
    /// Two unit spheres joined by a neck: a sphere again.
    TwoSpheres,
    /// One sphere with a handle attached at two points: a torus whose spin
    /// structure bounds around the neck.
    SphereWithTwoPoints,
}

/// Profile of the base with a neck of radius `neck_radius` and length
/// `neck_length`, sampled at `n` points.
pub fn build_handle_profile<T: Real>(
    base: SurgeryBase,
    neck_radius: T,
    neck_length: T,
    n: usize,
) -> Result<RevolutionProfile<T>> {
    match base {
        SurgeryBase::TwoSpheres => dumbbell(neck_radius, neck_length, n),
        SurgeryBase::SphereWithTwoPoints => handle(neck_radius, neck_length, n, -1),
    }
}

/// A family of necks on a common base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurgeryExperiment {
    pub base: SurgeryBase,
    /// Neck radii; rows are reported in decreasing order.
    pub necks: Vec<f64>,
    #[serde(default = "default_neck_length")]
    pub neck_length: f64,
    #[serde(default = "default_grid", alias = "N")]
    pub grid: usize,
    #[serde(default = "default_solver")]
    pub solver: MinimizeConfig,
}

fn default_neck_length() -> f64 {
    1.0
}

fn default_grid() -> usize {
    2048
}

fn default_solver() -> MinimizeConfig {
    MinimizeConfig {
        residual_tol: 1e-4,
        max_iters: 400,
        ..MinimizeConfig::default()
    }
}

impl SurgeryExperiment {
    pub fn new(base: SurgeryBase, necks: Vec<f64>) -> Self {
        Self {
            base,
            necks,
            neck_length: default_neck_length(),
            grid: default_grid(),
            solver: default_solver(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub neck_param: f64,
    pub lambda1: f64,
    pub area: f64,
    pub product: f64,
    pub residual: f64,
    pub converged: bool,
    /// `product - target`.
    pub gap: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub base: SurgeryBase,
    /// `2√π`, the value of the sphere.
    pub target: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Products never rise by more than `tol` as the neck shrinks.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].product <= w[0].product + tol)
    }

    /// Relative gap of the thinnest neck.
    pub fn final_relative_gap(&self) -> Option<f64> {
        self.rows.last().map(|r| r.gap.abs() / self.target)
    }

    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }

    /// Static line plot of product against neck radius.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (480.0, 320.0, 48.0);
        let xs: Vec<f64> = self.rows.iter().map(|r| r.neck_param.max(1e-12).log10()).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.product).collect();
        let span = |v: &[f64], extra: f64| -> (f64, f64) {
            let lo = v.iter().copied().fold(extra, f64::min);
            let hi = v.iter().copied().fold(extra, f64::max);
            if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&xs, xs.first().copied().unwrap_or(0.0));
        let (y0, y1) = span(&ys, self.target);
        let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let points: Vec<String> = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        svg += &format!(
            "<line x1=\"{pad}\" y1=\"{t:.2}\" x2=\"{e}\" y2=\"{t:.2}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
            t = py(self.target),
            e = w - pad
        );
        svg += &format!(
            "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        );
        for p in &points {
            let (x, y) = p.split_once(',').expect("formatted pair");
            svg += &format!("<circle cx=\"{x}\" cy=\"{y}\" r=\"3\"/>\n");
        }
        svg += &format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">log10 neck radius</text>\n",
            w / 2.0,
            h - 12.0
        );
        svg += &format!(
            "<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">lambda1 * area^(1/2)</text>\n",
            h / 2.0,
            h / 2.0
        );
        svg += "</svg>\n";
        svg
    }
}

/// Minimises `λ₁⁺ · Area^{1/2}` in the conformal class of each neck.
pub fn run_convergence(experiment: &SurgeryExperiment) -> Result<ConvergenceTable> {
    experiment.solver.validate()?;
    if experiment.necks.is_empty() {
        return Err(Error::InvalidNeck("no neck radii given".into()));
    }
    let mut necks = experiment.necks.clone();
    if let Some(bad) = necks.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::InvalidNeck(format!("neck radius {bad} must lie in (0, 1)")));
    }
    necks.sort_by(|a, b| b.partial_cmp(a).expect("finite radii"));
    let target = 2.0 * std::f64::consts::PI.sqrt();
    let mut rows = Vec::with_capacity(necks.len());
    for rho in necks {
        let profile = build_handle_profile::<f64>(experiment.base, rho, experiment.neck_length, experiment.grid)?;
        let base = RevolutionBase::new(&profile, experiment.solver.k_max)?;
        let run = minimize_lamin(&base, &experiment.solver)?;
        let e = &run.estimate;
        rows.push(ConvergenceRow {
            neck_param: rho,
            lambda1: e.lambda1,
            area: e.volume,
            product: e.product,
            residual: e.el_residual,
            converged: e.converged,
            gap: e.product - target,
            flagged: e.flags.any(),
        });
    }
    Ok(ConvergenceTable {
        base: experiment.base,
        target,
        rows,
    })
}

/// `τ`: zero when the form is odd, `2√π` otherwise.
pub fn tau_report(genus: usize, form: &QuadraticForm) -> Result<f64> {
    if form.genus() != genus {
        return Err(Error::Dimension {
            expected: genus,
            found: form.genus(),
        });
    }
    Ok(if alpha(form)?.is_one() {
        0.0
    } else {
        2.0 * std::f64::consts::PI.sqrt()
    })
}
