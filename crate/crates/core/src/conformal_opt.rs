//! Minimisation of `λ₁⁺ · Vol^{1/2}` over a conformal class.
//!
//! Every base metric is represented on a flat reference frame with area
//! elements `a_i`, in which the base metric reads `w₀² g_flat`. A conformal
//! factor `f` gives the weight `W = w₀ f`, the pencil `D_flat ψ = λ W ψ`,
//! the volume `Σ a W²` and the metric spinor `φ = W^{-1/2} ψ`. Spinor fields
//! are stored in the flat frame; `J` takes the same value there as on the
//! curved metric.
//!
//! The minimiser iterates `W ← (1 - s) W + s |ψ|²`, whose fixed points are
//! the critical metrics of `J` in two dimensions, and only accepts steps
//! that do not raise the product.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{euler_lagrange_residual, EstimateFlags, LaminEstimate};
use crate::lattice_spectra::{dual_lattice, Lattice2, SpinOffset};
use crate::revolution_dirac::{
    first_eigen, FlatFrame, FrameOptions, ModeSpinor, RevolutionProfile, Topology,
};
use crate::scalar::Real;
use crate::tridiag::TridiagonalPencil;

/// First positive eigenpair of a weighted pencil on a base.
#[derive(Clone, Debug)]
pub struct BaseEigen<T, S> {
    pub lambda: T,
    pub spinor: S,
    /// Modes outside the scanned range could undercut `lambda`.
    pub under_resolved: bool,
}

/// A metric together with its flat reference frame.
pub trait ConformalBase<T: Real> {
    type Spinor: Clone;

    /// `w₀` at each sample.
    fn base_weight(&self) -> &[T];

    /// Flat reference area carried by each sample.
    fn sample_area(&self) -> &[T];

    /// Grid size reported in estimates.
    fn grid(&self) -> usize;

    fn k_max(&self) -> Option<f64> {
        None
    }

    /// Smallest positive `λ` of `D_flat ψ = λ W ψ`.
    fn first_eigenpair(&self, weight: &[T]) -> Result<BaseEigen<T, Self::Spinor>>;

    /// `D_flat ψ`.
    fn dirac(&self, psi: &Self::Spinor) -> Self::Spinor;

    /// `|ψ|²` at each sample.
    fn density(&self, psi: &Self::Spinor) -> Vec<T>;

    /// `Re⟨a, b⟩` at each sample.
    fn pairing(&self, a: &Self::Spinor, b: &Self::Spinor) -> Vec<T>;

    /// Smooth functions on the samples used as search directions for `log f`.
    fn low_modes(&self) -> Vec<Vec<T>>;
}

fn integrate<T: Real>(area: &[T], values: &[T]) -> T {
    area.iter().zip(values).fold(T::zero(), |acc, (&a, &v)| acc + a * v)
}

/// `(∫|Dψ|^{4/3})^{3/2} / ∫⟨Dψ, ψ⟩`.
pub fn j_functional<T: Real, B: ConformalBase<T> + ?Sized>(base: &B, psi: &B::Spinor) -> Result<T> {
    let d = base.dirac(psi);
    let area = base.sample_area();
    let two_thirds = T::lit(2.0 / 3.0);
    let num: Vec<T> = base.density(&d).iter().map(|x| x.powf(two_thirds)).collect();
    let num = integrate(area, &num);
    let den = integrate(area, &base.pairing(&d, psi));
    if !(den > T::zero()) {
        return Err(Error::Domain(format!("∫⟨Dψ, ψ⟩ = {den} is not positive")));
    }
    Ok(num.powf(T::lit(1.5)) / den)
}

/// Solution of the weighted eigenproblem for a conformal factor.
#[derive(Clone, Debug)]
pub struct WeightedEigen<T, S> {
    pub lambda: T,
    /// `∫ f² dv_g`.
    pub volume: T,
    pub product: T,
    /// The flat-frame spinor `ψ`; the metric spinor is `W^{-1/2} ψ`.
    pub spinor: S,
    /// `W = w₀ f`.
    pub weight: Vec<T>,
    pub under_resolved: bool,
}

impl<T: Real, S> WeightedEigen<T, S> {
    /// `|φ|²` in the conformal metric, from the flat density `|ψ|²`.
    pub fn metric_density(&self, flat_density: &[T]) -> Vec<T> {
        flat_density.iter().zip(&self.weight).map(|(&d, &w)| d / w).collect()
    }
}

/// Smallest positive eigenvalue of the metric `f² g`.
pub fn weighted_eigenproblem<T: Real, B: ConformalBase<T> + ?Sized>(
    base: &B,
    factor: &[T],
) -> Result<WeightedEigen<T, B::Spinor>> {
    let w0 = base.base_weight();
    if factor.len() != w0.len() {
        return Err(Error::Dimension {
            expected: w0.len(),
            found: factor.len(),
        });
    }
    if let Some(f) = factor.iter().find(|f| !(**f > T::zero()) || !f.is_finite()) {
        return Err(Error::DegenerateMetric(format!("conformal factor sample {f} is not positive")));
    }
    let weight: Vec<T> = w0.iter().zip(factor).map(|(&w, &f)| w * f).collect();
    let eig = base.first_eigenpair(&weight)?;
    let sq: Vec<T> = weight.iter().map(|w| *w * *w).collect();
    let volume = integrate(base.sample_area(), &sq);
    Ok(WeightedEigen {
        lambda: eig.lambda,
        volume,
        product: eig.lambda * volume.sqrt(),
        spinor: eig.spinor,
        weight,
        under_resolved: eig.under_resolved,
    })
}

/// Settings of the fixed-point minimiser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    /// Initial step `s` of the update.
    pub damping: f64,
    /// Lower bound for `f` relative to its maximum.
    pub floor: f64,
    pub max_iters: usize,
    /// Stop once the Euler–Lagrange residual is below this.
    pub residual_tol: f64,
    /// Grid size used when a base is built from this configuration.
    #[serde(alias = "N")]
    pub grid: usize,
    /// Largest angular index for surfaces of revolution.
    pub k_max: f64,
    /// Seed of the Lanczos start vector and the initial perturbation.
    pub seed: u64,
    /// Relative amplitude of noise added to the first update.
    pub perturbation: f64,
    /// Steps below this count as a failed damping sweep.
    pub min_damping: f64,
    /// Relative increase of the product still accepted as a descent step.
    pub accept_tol: f64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            floor: 1e-3,
            max_iters: 200,
            residual_tol: 5e-3,
            grid: 32,
            k_max: 40.0,
            seed: 0,
            perturbation: 0.01,
            min_damping: 1.0 / 64.0,
            accept_tol: 1e-9,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parse(format!("invalid minimiser setting: {what}")));
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return bad("floor must lie in (0, 1)");
        }
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        if self.grid < 4 {
            return bad("grid must be at least 4");
        }
        if !(self.k_max >= 0.5) {
            return bad("k_max must be at least 1/2");
        }
        if !(self.perturbation >= 0.0 && self.perturbation < 1.0) {
            return bad("perturbation must lie in [0, 1)");
        }
        if !(self.min_damping > 0.0 && self.min_damping <= self.damping) {
            return bad("min_damping must lie in (0, damping]");
        }
        if !(self.accept_tol >= 0.0) {
            return bad("accept_tol must be nonnegative");
        }
        Ok(())
    }
}

/// Result of `minimize_lamin`.
#[derive(Clone, Debug, Serialize)]
pub struct LaminRun<T> {
    pub estimate: LaminEstimate<T>,
    /// Final conformal factor `f` at the base samples.
    pub factor: Vec<T>,
    /// Product after the start and after every accepted step.
    pub products: Vec<T>,
    /// Residual after the start and after every accepted step.
    pub residuals: Vec<T>,
    pub rejected_steps: usize,
    pub fallback_steps: usize,
}

/// One conformal factor per sample, for CSV output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorRow {
    pub index: usize,
    pub factor: f64,
}

impl<T: Real> LaminRun<T> {
    pub fn factor_rows(&self) -> Vec<FactorRow> {
        self.factor
            .iter()
            .enumerate()
            .map(|(index, f)| FactorRow {
                index,
                factor: f.to_f64_lossy(),
            })
            .collect()
    }
}

struct Iterate<T, S> {
    weight: Vec<T>,
    lambda: T,
    product: T,
    residual: T,
    density: Vec<T>,
    under_resolved: bool,
    _spinor: S,
}

fn evaluate<T: Real, B: ConformalBase<T> + ?Sized>(base: &B, weight: Vec<T>) -> Result<Iterate<T, B::Spinor>> {
    let eig = base.first_eigenpair(&weight)?;
    let area = base.sample_area();
    let sq: Vec<T> = weight.iter().map(|w| *w * *w).collect();
    let volume = integrate(area, &sq);
    let density = base.density(&eig.spinor);
    let residual = euler_lagrange_residual(&weight, &density, area, eig.lambda);
    Ok(Iterate {
        product: eig.lambda * volume.sqrt(),
        lambda: eig.lambda,
        residual,
        density,
        under_resolved: eig.under_resolved,
        _spinor: eig.spinor,
        weight,
    })
}

/// Applies the floor to `f = W / w₀` and rescales to `Σ a W² = volume`.
fn normalize_weight<T: Real>(w0: &[T], area: &[T], mut weight: Vec<T>, floor: T, volume: T) -> Vec<T> {
    let f_max = weight
        .iter()
        .zip(w0)
        .fold(T::zero(), |m, (&w, &b)| m.max(w / b));
    for (w, &b) in weight.iter_mut().zip(w0) {
        *w = w.max(floor * f_max * b);
    }
    let sq: Vec<T> = weight.iter().map(|w| *w * *w).collect();
    let c = (volume / integrate(area, &sq)).sqrt();
    weight.iter_mut().for_each(|w| *w = *w * c);
    weight
}

/// Fixed-point minimisation of `λ₁⁺ · Vol^{1/2}` over `f² g`.
///
/// The base must have no harmonic spinors. The returned estimate is the
/// best iterate found; `not_converged` is set when the residual tolerance
/// was not reached.
pub fn minimize_lamin<T: Real, B: ConformalBase<T> + ?Sized>(base: &B, config: &MinimizeConfig) -> Result<LaminRun<T>> {
    config.validate()?;
    let w0 = base.base_weight().to_vec();
    let area = base.sample_area().to_vec();
    let sq: Vec<T> = w0.iter().map(|w| *w * *w).collect();
    let volume = integrate(&area, &sq);
    let floor = T::lit(config.floor);
    let tol = T::lit(config.residual_tol);
    let accept = T::one() + T::lit(config.accept_tol);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut cur = evaluate(base, w0.clone())?;
    let mut products = vec![cur.product];
    let mut residuals = vec![cur.residual];
    let mut s = config.damping;
    let mut iterations = 0;
    let mut rejected_steps = 0;
    let mut fallback_steps = 0;
    let mut converged = cur.residual < tol;
    while !converged && iterations < config.max_iters {
        iterations += 1;
        let dens_sq: Vec<T> = cur.density.iter().map(|d| *d * *d).collect();
        let c = (volume / integrate(&area, &dens_sq)).sqrt();
        let mut target: Vec<T> = cur.density.iter().map(|d| *d * c).collect();
        if iterations == 1 && config.perturbation > 0.0 {
            for g in target.iter_mut() {
                let noise: f64 = rng.gen_range(-1.0..1.0);
                *g = *g * T::lit(1.0 + config.perturbation * noise);
            }
        }
        let mut next = None;
        while s >= config.min_damping {
            let st = T::lit(s);
            let blend: Vec<T> = cur
                .weight
                .iter()
                .zip(&target)
                .map(|(&w, &g)| (T::one() - st) * w + st * g)
                .collect();
            let trial = evaluate(base, normalize_weight(&w0, &area, blend, floor, volume))?;
            if trial.product <= cur.product * accept {
                next = Some(trial);
                s = (2.0 * s).min(config.damping);
                break;
            }
            rejected_steps += 1;
            s *= 0.5;
        }
        if next.is_none() {
            next = coordinate_search(base, &cur, &w0, &area, floor, volume)?;
            if next.is_some() {
                fallback_steps += 1;
                s = config.damping;
            }
        }
        let Some(trial) = next else { break };
        cur = trial;
        products.push(cur.product);
        residuals.push(cur.residual);
        converged = cur.residual < tol;
    }

    let mut estimate = LaminEstimate::new(cur.lambda, volume);
    estimate.product = cur.product;
    estimate.el_residual = cur.residual;
    estimate.iterations = iterations;
    estimate.converged = converged;
    estimate.grid = base.grid();
    estimate.k_max = base.k_max();
    estimate.flags = EstimateFlags {
        under_resolved: cur.under_resolved,
        kernel: false,
        not_converged: !converged,
    };
    let factor = cur.weight.iter().zip(&w0).map(|(&w, &b)| w / b).collect();
    Ok(LaminRun {
        estimate,
        factor,
        products,
        residuals,
        rejected_steps,
        fallback_steps,
    })
}

/// Tries `f ← f e^{±η φ}` along the low modes of the base, returning the
/// first strict improvement.
fn coordinate_search<T: Real, B: ConformalBase<T> + ?Sized>(
    base: &B,
    cur: &Iterate<T, B::Spinor>,
    w0: &[T],
    area: &[T],
    floor: T,
    volume: T,
) -> Result<Option<Iterate<T, B::Spinor>>> {
    let modes = base.low_modes();
    let mut eta = T::lit(0.25);
    for _ in 0..4 {
        for mode in &modes {
            for sign in [T::one(), -T::one()] {
                let w: Vec<T> = cur
                    .weight
                    .iter()
                    .zip(mode)
                    .map(|(&w, &m)| w * (sign * eta * m).exp())
                    .collect();
                let trial = evaluate(base, normalize_weight(w0, area, w, floor, volume))?;
                if trial.product < cur.product * (T::one() - T::lit(1e-12)) {
                    return Ok(Some(trial));
                }
            }
        }
        eta = eta * T::lit(0.5);
    }
    Ok(None)
}

/// `1 / cosh t`: the conformal factor of the Mercator map `R × S¹ → S²`.
pub fn mercator_factor<T: Real>(t: T) -> T {
    T::one() / t.cosh()
}

/// The Mercator map `(t, θ) ↦ (tanh t, cos θ / cosh t, sin θ / cosh t)`.
pub fn mercator_map<T: Real>(t: T, theta: T) -> [T; 3] {
    let sech = mercator_factor(t);
    [t.tanh(), theta.cos() * sech, theta.sin() * sech]
}

/// A surface of revolution in its Mercator frame. Factors are sampled at
/// the cell centres; face values are averages of neighbouring centres.
#[derive(Clone, Debug)]
pub struct RevolutionBase<T> {
    frame: FlatFrame<T>,
    k_max: f64,
    area: Vec<T>,
}

impl<T: Real> RevolutionBase<T> {
    pub fn new(profile: &RevolutionProfile<T>, k_max: f64) -> Result<Self> {
        Self::with_options(profile, k_max, FrameOptions::default())
    }

    pub fn with_options(profile: &RevolutionProfile<T>, k_max: f64, opts: FrameOptions) -> Result<Self> {
        let frame = FlatFrame::new(profile, opts)?;
        let area = vec![frame.cell_area(); frame.cells()];
        Ok(Self { frame, k_max, area })
    }

    pub fn frame(&self) -> &FlatFrame<T> {
        &self.frame
    }

    fn face_weight(&self, weight: &[T]) -> Vec<T> {
        let f: Vec<T> = weight
            .iter()
            .zip(self.frame.base_center())
            .map(|(&w, &b)| w / b)
            .collect();
        self.frame
            .faces_from_centers(&f)
            .into_iter()
            .zip(self.frame.base_face())
            .map(|(f, &b)| f * b)
            .collect()
    }
}

impl<T: Real> ConformalBase<T> for RevolutionBase<T> {
    type Spinor = ModeSpinor<T>;

    fn base_weight(&self) -> &[T] {
        self.frame.base_center()
    }

    fn sample_area(&self) -> &[T] {
        &self.area
    }

    fn grid(&self) -> usize {
        self.frame.cells()
    }

    fn k_max(&self) -> Option<f64> {
        Some(self.k_max)
    }

    fn first_eigenpair(&self, weight: &[T]) -> Result<BaseEigen<T, ModeSpinor<T>>> {
        if weight.len() != self.frame.cells() {
            return Err(Error::Dimension {
                expected: self.frame.cells(),
                found: weight.len(),
            });
        }
        let faces = self.face_weight(weight);
        let first = first_eigen(&self.frame, weight, &faces, self.k_max)?;
        if first.kernel > 0 {
            return Err(Error::Kernel);
        }
        Ok(BaseEigen {
            lambda: first.lambda,
            spinor: first.spinor,
            under_resolved: first.under_resolved,
        })
    }

    fn dirac(&self, psi: &ModeSpinor<T>) -> ModeSpinor<T> {
        self.frame
            .mode(psi.k)
            .expect("spinor mode belongs to the frame")
            .apply(psi)
    }

    fn density(&self, psi: &ModeSpinor<T>) -> Vec<T> {
        psi.center_density()
    }

    fn pairing(&self, a: &ModeSpinor<T>, b: &ModeSpinor<T>) -> Vec<T> {
        a.center_pairing(b)
    }

    fn low_modes(&self) -> Vec<Vec<T>> {
        let m = self.frame.cells();
        let x = |i: usize| (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(m);
        let tau = T::PI() + T::PI();
        let mut out = Vec::new();
        for j in 1..=3 {
            let jf = T::from_usize_lossy(j);
            match self.frame.topology() {
                Topology::Periodic => {
                    out.push((0..m).map(|i| (tau * jf * x(i)).cos()).collect());
                    out.push((0..m).map(|i| (tau * jf * x(i)).sin()).collect());
                }
                Topology::Caps => {
                    out.push((0..m).map(|i| (T::PI() * jf * x(i)).cos()).collect());
                }
            }
        }
        out
    }
}

/// A spinor on the `n × n` torus grid, components stored row-major in the
/// lattice coordinates `u ∈ [0, 1)²`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpinor<T> {
    pub n: usize,
    pub up: Vec<Complex<T>>,
    pub down: Vec<Complex<T>>,
}

impl<T: Real> GridSpinor<T> {
    pub fn scaled(&self, c: Complex<T>) -> Self {
        Self {
            n: self.n,
            up: self.up.iter().map(|x| *x * c).collect(),
            down: self.down.iter().map(|x| *x * c).collect(),
        }
    }
}

/// Relative residual at which a Lanczos Ritz pair is accepted.
const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_BLOCK: usize = 120;
const LANCZOS_RESTARTS: usize = 30;

/// A flat torus `R² / Γ` with spin offset `δ`, discretised spectrally on an
/// `n × n` grid. Spinors are `e^{2πi δ·u}` times periodic fields.
pub struct FlatTorusBase<T: Real> {
    n: usize,
    seed: u64,
    /// Symbol `p(ξ) = -ξ₁ + iξ₂`; `D` maps `(a, b) ↦ (p b, p̄ a)` in Fourier space.
    symbol: Vec<Complex<T>>,
    phase: Vec<Complex<T>>,
    w0: Vec<T>,
    area: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for FlatTorusBase<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlatTorusBase").field("n", &self.n).field("seed", &self.seed).finish()
    }
}

impl<T: Real> FlatTorusBase<T> {
    pub fn new(lattice: &Lattice2<T>, offset: SpinOffset, n: usize, seed: u64) -> Result<Self> {
        if n < 4 {
            return Err(Error::Resolution(format!("torus grid needs n ≥ 4, got {n}")));
        }
        if offset.is_trivial() {
            return Err(Error::Kernel);
        }
        let dual = dual_lattice(lattice)?;
        let delta = offset.delta::<T>();
        let tau = T::PI() + T::PI();
        let freq = |i: usize| -> T {
            if 2 * i < n {
                T::from_usize_lossy(i)
            } else {
                T::from_usize_lossy(i) - T::from_usize_lossy(n)
            }
        };
        let mut symbol = Vec::with_capacity(n * n);
        let mut phase = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let xi = dual.point([freq(i) + delta[0], freq(j) + delta[1]]);
                symbol.push(Complex::new(-tau * xi[0], tau * xi[1]));
                let u = [T::from_usize_lossy(i), T::from_usize_lossy(j)];
                let arg = tau * (delta[0] * u[0] + delta[1] * u[1]) / T::from_usize_lossy(n);
                phase.push(Complex::new(arg.cos(), arg.sin()));
            }
        }
        let mut planner = FftPlanner::new();
        let cell = lattice.covolume() / T::from_usize_lossy(n * n);
        Ok(Self {
            n,
            seed,
            symbol,
            phase,
            w0: vec![T::one(); n * n],
            area: vec![cell; n * n],
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 2D transform of row-major data, normalised on the inverse.
    fn fft2(&self, data: &mut [Complex<T>], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        plan.process(data);
        let mut col = vec![Complex::new(T::zero(), T::zero()); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
        if inverse {
            let s = T::one() / T::from_usize_lossy(n * n);
            data.iter_mut().for_each(|x| *x = *x * s);
        }
    }

    /// Fourier coefficients of the periodic parts of both components.
    fn to_fourier(&self, psi: &GridSpinor<T>) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let strip = |c: &[Complex<T>]| -> Vec<Complex<T>> {
            let mut out: Vec<Complex<T>> = c.iter().zip(&self.phase).map(|(x, p)| *x * p.conj()).collect();
            self.fft2(&mut out, false);
            out
        };
        (strip(&psi.up), strip(&psi.down))
    }

    fn to_grid(&self, mut a: Vec<Complex<T>>, mut b: Vec<Complex<T>>) -> GridSpinor<T> {
        self.fft2(&mut a, true);
        self.fft2(&mut b, true);
        for ((x, y), p) in a.iter_mut().zip(b.iter_mut()).zip(&self.phase) {
            *x = *x * p;
            *y = *y * p;
        }
        GridSpinor { n: self.n, up: a, down: b }
    }

    fn dirac_inverse(&self, psi: &GridSpinor<T>) -> GridSpinor<T> {
        let (a, b) = self.to_fourier(psi);
        let up = b.iter().zip(&self.symbol).map(|(x, p)| *x / p.conj()).collect();
        let down = a.iter().zip(&self.symbol).map(|(x, p)| *x / p).collect();
        self.to_grid(up, down)
    }

    /// `y ↦ W^{1/2} D^{-1} W^{1/2} y` on the flattened spinor.
    fn k_apply(&self, sqrt_w: &[T], y: &[Complex<T>]) -> Vec<Complex<T>> {
        let m = self.n * self.n;
        let mut psi = GridSpinor {
            n: self.n,
            up: y[..m].to_vec(),
            down: y[m..].to_vec(),
        };
        for i in 0..m {
            psi.up[i] = psi.up[i] * sqrt_w[i];
            psi.down[i] = psi.down[i] * sqrt_w[i];
        }
        let out = self.dirac_inverse(&psi);
        out.up
            .iter()
            .zip(sqrt_w)
            .chain(out.down.iter().zip(sqrt_w))
            .map(|(x, &s)| *x * s)
            .collect()
    }
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt()
}

/// Largest eigenpair of a Hermitian operator by Lanczos with full
/// reorthogonalisation and explicit restarts on the Ritz vector.
fn lanczos_top<T: Real>(
    apply: impl Fn(&[Complex<T>]) -> Vec<Complex<T>>,
    start: Vec<Complex<T>>,
) -> Result<(T, Vec<Complex<T>>)> {
    let dim = start.len();
    let block = LANCZOS_BLOCK.min(dim);
    let mut q0 = start;
    let tol = T::lit(LANCZOS_TOL);
    let mut last = T::nan();
    for _ in 0..LANCZOS_RESTARTS {
        let s = norm(&q0);
        q0.iter_mut().for_each(|x| *x = *x / s);
        let mut basis: Vec<Vec<Complex<T>>> = vec![q0.clone()];
        let mut alpha: Vec<T> = Vec::new();
        let mut beta: Vec<T> = Vec::new();
        let mut ritz = None;
        for j in 0..block {
            let mut w = apply(&basis[j]);
            alpha.push(dot(&basis[j], &w).re);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x = *x - *y * c);
                }
            }
            let b = norm(&w);
            let pencil = TridiagonalPencil {
                diag: alpha.clone(),
                off: beta.clone(),
                corner: T::zero(),
                weight: vec![T::one(); alpha.len()],
            };
            let theta = pencil.eigenvalue(alpha.len() - 1);
            let check = j + 1 == block || b <= T::epsilon() * theta.abs() || (j + 1) % 5 == 0;
            if check {
                let s = pencil.eigenvector(theta);
                let resid = b * s[s.len() - 1].abs();
                ritz = Some((theta, s));
                if resid <= tol * theta.abs() || b <= T::epsilon() * theta.abs() {
                    let (theta, s) = ritz.take().expect("ritz pair just computed");
                    return Ok((theta, combine(&basis, &s)));
                }
            }
            if j + 1 == block {
                break;
            }
            beta.push(b);
            basis.push(w.into_iter().map(|x| x / b).collect());
        }
        let (theta, s) = ritz.expect("ritz pair computed at block end");
        last = theta;
        q0 = combine(&basis, &s);
    }
    Err(Error::Resolution(format!(
        "Lanczos did not converge, last Ritz value {last}"
    )))
}

fn combine<T: Real>(basis: &[Vec<Complex<T>>], s: &[T]) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); basis[0].len()];
    for (q, &c) in basis.iter().zip(s) {
        out.iter_mut().zip(q).for_each(|(x, y)| *x = *x + *y * c);
    }
    let s = norm(&out);
    out.iter_mut().for_each(|x| *x = *x / s);
    out
}

impl<T: Real> ConformalBase<T> for FlatTorusBase<T> {
    type Spinor = GridSpinor<T>;

    fn base_weight(&self) -> &[T] {
        &self.w0
    }

    fn sample_area(&self) -> &[T] {
        &self.area
    }

    fn grid(&self) -> usize {
        self.n
    }

    fn first_eigenpair(&self, weight: &[T]) -> Result<BaseEigen<T, GridSpinor<T>>> {
        let m = self.n * self.n;
        if weight.len() != m {
            return Err(Error::Dimension {
                expected: m,
                found: weight.len(),
            });
        }
        let sqrt_w: Vec<T> = weight.iter().map(|w| w.sqrt()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let start: Vec<Complex<T>> = (0..2 * m)
            .map(|_| Complex::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0))))
            .collect();
        let (theta, y) = lanczos_top(|v| self.k_apply(&sqrt_w, v), start)?;
        if !(theta > T::zero()) {
            return Err(Error::Resolution("no positive eigenvalue found".into()));
        }
        let up = (0..m).map(|i| y[i] / sqrt_w[i]).collect();
        let down = (0..m).map(|i| y[m + i] / sqrt_w[i]).collect();
        Ok(BaseEigen {
            lambda: T::one() / theta,
            spinor: GridSpinor { n: self.n, up, down },
            under_resolved: false,
        })
    }

    fn dirac(&self, psi: &GridSpinor<T>) -> GridSpinor<T> {
        let (a, b) = self.to_fourier(psi);
        let up = b.iter().zip(&self.symbol).map(|(x, p)| *x * p).collect();
        let down = a.iter().zip(&self.symbol).map(|(x, p)| *x * p.conj()).collect();
        self.to_grid(up, down)
    }

    fn density(&self, psi: &GridSpinor<T>) -> Vec<T> {
        psi.up
            .iter()
            .zip(&psi.down)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    fn pairing(&self, a: &GridSpinor<T>, b: &GridSpinor<T>) -> Vec<T> {
        (0..a.up.len())
            .map(|i| (a.up[i].conj() * b.up[i] + a.down[i].conj() * b.down[i]).re)
            .collect()
    }

    fn low_modes(&self) -> Vec<Vec<T>> {
        let n = self.n;
        let tau = T::PI() + T::PI();
        let nf = T::from_usize_lossy(n);
        let mut out = Vec::new();
        for (p, q) in [(1i32, 0i32), (0, 1), (1, 1), (1, -1)] {
            let arg = |k: usize| {
                let (i, j) = (k / n, k % n);
                tau * (T::lit(p as f64) * T::from_usize_lossy(i) + T::lit(q as f64) * T::from_usize_lossy(j)) / nf
            };
            out.push((0..n * n).map(|k| arg(k).cos()).collect());
            out.push((0..n * n).map(|k| arg(k).sin()).collect());
        }
        out
    }
}
