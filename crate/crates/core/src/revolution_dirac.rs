//! Dirac eigenvalues on surfaces of revolution `dt² + r(t)² dθ²`.
//!
//! The surface is mapped conformally onto a flat cylinder by the Mercator
//! coordinate `s = ∫ dt / r`, in which the metric reads `r² (ds² + dθ²)`.
//! By conformal covariance, `D_g φ = λ φ` becomes the pencil
//! `D_flat ψ = λ w ψ` with `w = r(s)` and `φ = w^{-1/2} ψ`. A Fourier mode
//! `e^{ikθ}(U(s), V(s))` reduces `D_flat` to the 1D system
//!
//! ```text
//!   (d/ds + k) V = λ w U,     (-d/ds + k) U = λ w V.
//! ```
//!
//! `U` lives at cell centres and `V` at cell faces of a uniform `s`-grid. The
//! difference operator `A = d/ds + k` is exponentially fitted so that it
//! annihilates `e^{-ks}` exactly:
//!
//! ```text
//!   (A V)_i = (e^{kh/2} V_{i+1} - e^{-kh/2} V_i) / h.
//! ```
//!
//! With the unknowns interleaved, each mode becomes a tridiagonal pencil
//! with zero diagonal. For caps the poles sit at `s = ±∞`; the grid is
//! truncated a fixed distance beyond the sampled profile and the face value
//! that must vanish (`V` at the end where `e^{-ks}` blows up) is removed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{euler_lagrange_residual, EstimateFlags, LaminEstimate};
use crate::lattice_spectra::{Lattice2, SpectrumSlice, SpinOffset};
use crate::scalar::Real;
use crate::tridiag::TridiagonalPencil;

/// Distance in `s` by which cap profiles are continued past the last sample.
pub const DEFAULT_POLE_DEPTH: f64 = 12.0;

/// Relative tolerance for merging equal eigenvalues.
pub const BUCKET_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// `r → 0` at both ends: a topological sphere.
    Caps,
    /// `r` periodic in `t`: a torus.
    Periodic,
}

/// Spin structure along the `θ`-circles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSector {
    /// Bounding structure: `k ∈ Z + ½`.
    HalfInteger,
    /// Trivial structure: `k ∈ Z`.
    Integer,
}

/// Angular Fourier index `k`, stored as `2k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    twice: i32,
}

impl ModeIndex {
    pub const fn from_twice(twice: i32) -> Self {
        Self { twice }
    }

    pub fn twice(self) -> i32 {
        self.twice
    }

    pub fn value<T: Real>(self) -> T {
        T::lit(self.twice as f64 * 0.5)
    }

    pub fn as_f64(self) -> f64 {
        self.twice as f64 * 0.5
    }

    pub fn is_half_integer(self) -> bool {
        self.twice % 2 != 0
    }

    pub fn negated(self) -> Self {
        Self { twice: -self.twice }
    }

    pub fn fits(self, sector: ThetaSector) -> bool {
        self.is_half_integer() == (sector == ThetaSector::HalfInteger)
    }
}

impl Serialize for ModeIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

/// Modes with `|k| ≤ k_max` in the given sector, ordered by `|k|` with the
/// positive index first.
pub fn mode_indices(sector: ThetaSector, k_max: f64) -> Vec<ModeIndex> {
    let mut out = Vec::new();
    let start = match sector {
        ThetaSector::HalfInteger => 1,
        ThetaSector::Integer => 0,
    };
    let mut t = start;
    while (t as f64) * 0.5 <= k_max + 1e-12 {
        out.push(ModeIndex::from_twice(t));
        if t != 0 {
            out.push(ModeIndex::from_twice(-t));
        }
        t += 2;
    }
    out
}

/// A profile `r(t)` sampled at the cell centres `t₀ + (i + ½) Δt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevolutionProfile<T> {
    t0: T,
    dt: T,
    r: Vec<T>,
    topology: Topology,
    theta_sector: ThetaSector,
    t_holonomy: i8,
    label: String,
}

impl<T: Real> RevolutionProfile<T> {
    fn validate(self) -> Result<Self> {
        if self.r.len() < 4 {
            return Err(Error::DegenerateProfile(format!(
                "need at least 4 samples, got {}",
                self.r.len()
            )));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::DegenerateProfile(format!("grid spacing {} is not positive", self.dt)));
        }
        if let Some((i, r)) = self.r.iter().enumerate().find(|(_, r)| !(**r > T::zero()) || !r.is_finite()) {
            return Err(Error::DegenerateProfile(format!("r = {r} at sample {i}")));
        }
        if self.t_holonomy != 1 && self.t_holonomy != -1 {
            return Err(Error::DegenerateProfile(format!(
                "holonomy must be +1 or -1, got {}",
                self.t_holonomy
            )));
        }
        Ok(self)
    }

    /// Samples on `(t0, t1)` of a profile vanishing at both ends.
    pub fn caps(t0: T, t1: T, r: Vec<T>) -> Result<Self> {
        let dt = (t1 - t0) / T::from_usize_lossy(r.len().max(1));
        Self {
            t0,
            dt,
            r,
            topology: Topology::Caps,
            theta_sector: ThetaSector::HalfInteger,
            t_holonomy: 1,
            label: "caps".into(),
        }
        .validate()
    }

    /// Samples over one period `[t0, t0 + period)`.
    pub fn periodic(t0: T, period: T, r: Vec<T>, sector: ThetaSector, t_holonomy: i8) -> Result<Self> {
        let dt = period / T::from_usize_lossy(r.len().max(1));
        Self {
            t0,
            dt,
            r,
            topology: Topology::Periodic,
            theta_sector: sector,
            t_holonomy,
            label: "periodic".into(),
        }
        .validate()
    }

    pub fn caps_from_fn(t0: T, t1: T, n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let dt = (t1 - t0) / T::from_usize_lossy(n);
        let r = (0..n).map(|i| f(t0 + (T::from_usize_lossy(i) + T::lit(0.5)) * dt)).collect();
        Self::caps(t0, t1, r)
    }

    pub fn periodic_from_fn(
        t0: T,
        period: T,
        n: usize,
        sector: ThetaSector,
        t_holonomy: i8,
        f: impl Fn(T) -> T,
    ) -> Result<Self> {
        let dt = period / T::from_usize_lossy(n);
        let r = (0..n).map(|i| f(t0 + (T::from_usize_lossy(i) + T::lit(0.5)) * dt)).collect();
        Self::periodic(t0, period, r, sector, t_holonomy)
    }

    /// Builds a profile from `(t, r)` samples on a uniform grid. The samples
    /// are taken as cell centres.
    pub fn from_samples(
        t: &[T],
        r: &[T],
        topology: Topology,
        sector: ThetaSector,
        t_holonomy: i8,
    ) -> Result<Self> {
        if t.len() != r.len() || t.len() < 4 {
            return Err(Error::DegenerateProfile(format!(
                "need matching t and r columns with at least 4 rows, got {} and {}",
                t.len(),
                r.len()
            )));
        }
        let n = t.len();
        let dt = (t[n - 1] - t[0]) / T::from_usize_lossy(n - 1);
        for w in t.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > T::lit(1e-6) * dt.abs() {
                return Err(Error::DegenerateProfile("t samples are not uniformly spaced".into()));
            }
        }
        let half = dt * T::lit(0.5);
        let t0 = t[0] - half;
        let span = dt * T::from_usize_lossy(n);
        match topology {
            Topology::Caps => Self::caps(t0, t0 + span, r.to_vec()),
            Topology::Periodic => Self::periodic(t0, span, r.to_vec(), sector, t_holonomy),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_holonomy(mut self, t_holonomy: i8) -> Result<Self> {
        self.t_holonomy = t_holonomy;
        self.validate()
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r(&self) -> &[T] {
        &self.r
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn t1(&self) -> T {
        self.t0 + self.dt * T::from_usize_lossy(self.r.len())
    }

    pub fn t(&self, i: usize) -> T {
        self.t0 + (T::from_usize_lossy(i) + T::lit(0.5)) * self.dt
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn theta_sector(&self) -> ThetaSector {
        self.theta_sector
    }

    pub fn t_holonomy(&self) -> i8 {
        self.t_holonomy
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The profile of the homothetic metric `c² g`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        let mut out = self.clone();
        out.t0 = out.t0 * c;
        out.dt = out.dt * c;
        out.r.iter_mut().for_each(|r| *r = *r * c);
        out.validate()
    }

    pub fn modes(&self, k_max: f64) -> Vec<ModeIndex> {
        mode_indices(self.theta_sector, k_max)
    }

    pub fn max_radius(&self) -> T {
        self.r.iter().fold(T::zero(), |m, &r| m.max(r))
    }
}

/// `2π ∫ r dt`. Caps use the midpoint rule with its endpoint correction
/// `(Δt²/24)(r'(t₁) - r'(t₀))`; periodic profiles use the plain midpoint rule.
pub fn area<T: Real>(profile: &RevolutionProfile<T>) -> T {
    let two_pi = T::PI() + T::PI();
    let dt = profile.dt;
    let sum = profile.r.iter().fold(T::zero(), |a, &r| a + r);
    let mut integral = sum * dt;
    if profile.topology == Topology::Caps {
        let n = profile.r.len();
        let half = dt * T::lit(0.5);
        let slope0 = profile.r[0] / half;
        let slope1 = -profile.r[n - 1] / half;
        integral = integral + dt * dt / T::lit(24.0) * (slope1 - slope0);
    }
    two_pi * integral
}

/// `1 / logarithmic mean of a and b`, i.e. `∫ dt / r` per unit `t` for a
/// linear `r` between `a` and `b`.
fn inv_log_mean<T: Real>(a: T, b: T) -> T {
    let d = b - a;
    if d.abs() <= T::lit(1e-6) * a.abs().max(b.abs()) {
        // Second-order expansion around the arithmetic mean.
        let m = (a + b) * T::lit(0.5);
        let x = d / m;
        (T::one() + x * x / T::lit(12.0)) / m
    } else {
        (b.ln() - a.ln()) / d
    }
}

/// Discretisation choices for the flat frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameOptions {
    /// Number of `s`-cells; defaults to the number of profile samples.
    pub cells: Option<usize>,
    /// Extension past the sampled range for caps, in units of `s`.
    pub pole_depth: f64,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self {
            cells: None,
            pole_depth: DEFAULT_POLE_DEPTH,
        }
    }
}

/// The conformally flat cylinder picture of a profile: a uniform `s`-grid
/// carrying the weight `w = r(s)` at cell centres and faces.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatFrame<T> {
    topology: Topology,
    sector: ThetaSector,
    holonomy: i8,
    s0: T,
    h: T,
    w_center: Vec<T>,
    /// `M + 1` faces; for periodic frames the last face repeats the first.
    w_face: Vec<T>,
}

impl<T: Real> FlatFrame<T> {
    pub fn new(profile: &RevolutionProfile<T>, opts: FrameOptions) -> Result<Self> {
        let n = profile.len();
        let cells = opts.cells.unwrap_or(n);
        if cells < 2 {
            return Err(Error::Resolution(format!("need at least 2 cells, got {cells}")));
        }
        let r = &profile.r;
        let dt = profile.dt;
        let log_r: Vec<T> = r.iter().map(|x| x.ln()).collect();
        let mut s = Vec::with_capacity(n + 1);
        s.push(T::zero());
        for i in 1..n {
            let prev = s[i - 1];
            s.push(prev + dt * inv_log_mean(r[i - 1], r[i]));
        }

        let m = T::from_usize_lossy(cells);
        let half = T::lit(0.5);
        match profile.topology {
            Topology::Caps => {
                let depth = T::lit(opts.pole_depth);
                let slope_lo = r[0] / (dt * half);
                let slope_hi = r[n - 1] / (dt * half);
                let s_first = s[0];
                let s_last = s[n - 1];
                let lo = s_first - depth;
                let hi = s_last + depth;
                let h = (hi - lo) / m;
                let log_w = |x: T| -> T {
                    if x <= s_first {
                        log_r[0] + slope_lo * (x - s_first)
                    } else if x >= s_last {
                        log_r[n - 1] - slope_hi * (x - s_last)
                    } else {
                        interpolate(&s, &log_r, x)
                    }
                };
                let w_center = (0..cells)
                    .map(|i| log_w(lo + (T::from_usize_lossy(i) + half) * h).exp())
                    .collect();
                let w_face = (0..=cells)
                    .map(|j| log_w(lo + T::from_usize_lossy(j) * h).exp())
                    .collect();
                Ok(Self {
                    topology: Topology::Caps,
                    sector: ThetaSector::HalfInteger,
                    holonomy: 1,
                    s0: lo,
                    h,
                    w_center,
                    w_face,
                })
            }
            Topology::Periodic => {
                let period = s[n - 1] + dt * inv_log_mean(r[n - 1], r[0]);
                let mut knots = s.clone();
                knots.push(period);
                let mut vals = log_r.clone();
                vals.push(log_r[0]);
                let h = period / m;
                let log_w = |x: T| -> T {
                    let mut y = x % period;
                    if y < T::zero() {
                        y = y + period;
                    }
                    if y <= knots[0] {
                        // Only reachable for y == 0.
                        vals[0]
                    } else {
                        interpolate(&knots, &vals, y)
                    }
                };
                let w_center = (0..cells)
                    .map(|i| log_w((T::from_usize_lossy(i) + half) * h).exp())
                    .collect();
                let mut w_face: Vec<T> = (0..cells)
                    .map(|j| log_w(T::from_usize_lossy(j) * h).exp())
                    .collect();
                w_face.push(w_face[0]);
                Ok(Self {
                    topology: Topology::Periodic,
                    sector: profile.theta_sector,
                    holonomy: profile.t_holonomy,
                    s0: T::zero(),
                    h,
                    w_center,
                    w_face,
                })
            }
        }
    }

    pub fn cells(&self) -> usize {
        self.w_center.len()
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn sector(&self) -> ThetaSector {
        self.sector
    }

    pub fn holonomy(&self) -> i8 {
        self.holonomy
    }

    pub fn center(&self, i: usize) -> T {
        self.s0 + (T::from_usize_lossy(i) + T::lit(0.5)) * self.h
    }

    pub fn face(&self, j: usize) -> T {
        self.s0 + T::from_usize_lossy(j) * self.h
    }

    pub fn base_center(&self) -> &[T] {
        &self.w_center
    }

    pub fn base_face(&self) -> &[T] {
        &self.w_face
    }

    /// Flat area `2π h` carried by each cell.
    pub fn cell_area(&self) -> T {
        (T::PI() + T::PI()) * self.h
    }

    /// `2π h Σ W²` for centre weights `W`.
    pub fn weighted_area(&self, w_center: &[T]) -> T {
        self.cell_area() * w_center.iter().fold(T::zero(), |a, &w| a + w * w)
    }

    /// Face values of a centre-sampled function: averages of neighbours,
    /// wrapped for periodic frames and copied at the ends for caps.
    pub fn faces_from_centers(&self, c: &[T]) -> Vec<T> {
        let m = c.len();
        let half = T::lit(0.5);
        let mut out = Vec::with_capacity(m + 1);
        match self.topology {
            Topology::Caps => {
                out.push(c[0]);
                for j in 1..m {
                    out.push((c[j - 1] + c[j]) * half);
                }
                out.push(c[m - 1]);
            }
            Topology::Periodic => {
                out.push((c[m - 1] + c[0]) * half);
                for j in 1..m {
                    out.push((c[j - 1] + c[j]) * half);
                }
                out.push(out[0]);
            }
        }
        out
    }

    /// The mode operator for the base weight `w = r`.
    pub fn mode(&self, k: ModeIndex) -> Result<ModeOperator<T>> {
        self.weighted_mode(k, &self.w_center, &self.w_face)
    }

    /// The mode operator of `D_flat ψ = λ W ψ` for arbitrary positive weights.
    pub fn weighted_mode(&self, k: ModeIndex, w_center: &[T], w_face: &[T]) -> Result<ModeOperator<T>> {
        if !k.fits(self.sector) {
            return Err(Error::Domain(format!(
                "mode k = {} does not fit the {:?} sector",
                k.as_f64(),
                self.sector
            )));
        }
        let m = self.cells();
        if w_center.len() != m || w_face.len() != m + 1 {
            return Err(Error::DegenerateMetric(format!(
                "weight arrays have lengths {} and {}, expected {m} and {}",
                w_center.len(),
                w_face.len(),
                m + 1
            )));
        }
        if let Some(w) = w_center.iter().chain(w_face).find(|w| !(**w > T::zero()) || !w.is_finite()) {
            return Err(Error::DegenerateMetric(format!("non-positive weight {w}")));
        }
        let kv: T = k.value();
        let half = self.h * kv * T::lit(0.5);
        let a = half.exp() / self.h;
        let b = -(-half).exp() / self.h;
        let n = 2 * m;
        let mut off = Vec::with_capacity(n - 1);
        let mut weight = Vec::with_capacity(n);
        let center_first = self.topology == Topology::Caps && kv > T::zero();
        let layout = if center_first {
            // U0, V1, U1, V2, …, U_{M-1}, V_M
            for i in 0..m {
                weight.push(w_center[i]);
                weight.push(w_face[i + 1]);
                off.push(a);
                if i + 1 < m {
                    off.push(b);
                }
            }
            Layout::CenterFirst
        } else {
            // V0, U0, V1, U1, …, V_{M-1}, U_{M-1}
            for i in 0..m {
                weight.push(w_face[i]);
                weight.push(w_center[i]);
                off.push(b);
                if i + 1 < m {
                    off.push(a);
                }
            }
            Layout::FaceFirst
        };
        let corner = match self.topology {
            Topology::Caps => T::zero(),
            Topology::Periodic => a * T::lit(self.holonomy as f64),
        };
        Ok(ModeOperator {
            k,
            layout,
            cells: m,
            holonomy: self.holonomy,
            periodic: self.topology == Topology::Periodic,
            a,
            b,
            scale: T::one() / (self.h * weight.iter().fold(T::zero(), |m, &w| m.max(w))),
            pencil: TridiagonalPencil::off_diagonal(off, corner, weight),
        })
    }
}

/// Piecewise-linear interpolation on increasing knots.
fn interpolate<T: Real>(x: &[T], y: &[T], at: T) -> T {
    let j = x.partition_point(|&v| v < at).clamp(1, x.len() - 1);
    let (x0, x1) = (x[j - 1], x[j]);
    let t = (at - x0) / (x1 - x0);
    y[j - 1] + (y[j] - y[j - 1]) * t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    CenterFirst,
    FaceFirst,
}

/// The reduced operator of one angular mode, as a tridiagonal pencil of
/// size `2M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator<T> {
    k: ModeIndex,
    layout: Layout,
    cells: usize,
    holonomy: i8,
    periodic: bool,
    a: T,
    b: T,
    /// `1 / (h max W)`, the spectral scale of the top of the spectrum.
    scale: T,
    pencil: TridiagonalPencil<T>,
}

impl<T: Real> ModeOperator<T> {
    pub fn k(&self) -> ModeIndex {
        self.k
    }

    pub fn dim(&self) -> usize {
        2 * self.cells
    }

    pub fn pencil(&self) -> &TridiagonalPencil<T> {
        &self.pencil
    }

    /// The symmetric matrix `W^{-1/2} H W^{-1/2}`, dense.
    pub fn dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut out = vec![vec![T::zero(); n]; n];
        let w = &self.pencil.weight;
        for i in 0..n - 1 {
            let v = self.pencil.off[i] / (w[i] * w[i + 1]).sqrt();
            out[i][i + 1] = v;
            out[i + 1][i] = v;
        }
        if self.periodic {
            let v = self.pencil.corner / (w[0] * w[n - 1]).sqrt();
            out[0][n - 1] = out[0][n - 1] + v;
            out[n - 1][0] = out[n - 1][0] + v;
        }
        out
    }

    /// Values below this magnitude count as zero eigenvalues.
    pub fn zero_tolerance(&self) -> T {
        self.scale * T::lit(1e-9)
    }

    /// All eigenvalues with indices in `range` (ascending order).
    pub fn eigenvalues(&self, range: std::ops::Range<usize>) -> Vec<T> {
        self.pencil.eigenvalues(range)
    }

    /// The `count` smallest nonnegative eigenvalues.
    pub fn nonnegative(&self, count: usize) -> Vec<T> {
        self.nonnegative_below(count, T::infinity())
    }

    /// Up to `count` smallest nonnegative eigenvalues, stopping after the
    /// first one above `limit`.
    pub fn nonnegative_below(&self, count: usize, limit: T) -> Vec<T> {
        let mut out = Vec::with_capacity(count);
        let mut lo = -self.zero_tolerance();
        for j in self.cells..(self.cells + count).min(self.dim()) {
            let v = self.next_eigenvalue(j, lo);
            out.push(v);
            if v > limit {
                break;
            }
            lo = v - (v.abs() + T::one()) * T::lit(1e3) * T::epsilon();
        }
        out
    }

    /// Eigenvalue `j`, known to lie above `lo`; the upper end of the bracket
    /// is grown geometrically from `lo`.
    fn next_eigenvalue(&self, j: usize, lo: T) -> T {
        let mut hi = lo.abs().max(self.scale * T::lit(1e-3)) * T::lit(2.0);
        for _ in 0..200 {
            if self.pencil.count_below(hi) > j {
                return self.pencil.eigenvalue_in(j, lo, hi);
            }
            hi = hi * T::lit(2.0);
        }
        self.pencil.eigenvalue(j)
    }

    /// Smallest eigenvalue above the zero tolerance, with its index.
    pub fn first_positive(&self) -> Option<(usize, T)> {
        let tol = self.zero_tolerance();
        let j = self.cells.max(self.pencil.count_below(tol));
        (j < self.dim()).then(|| (j, self.next_eigenvalue(j, tol)))
    }

    /// Number of zero eigenvalues of the mode.
    pub fn kernel_dim(&self) -> usize {
        let tol = self.zero_tolerance();
        self.pencil.count_below(tol) - self.pencil.count_below(-tol)
    }

    /// Eigenpair at a given index, as a field on the grid.
    pub fn eigenpair(&self, index: usize) -> (T, ModeSpinor<T>) {
        let lambda = self.pencil.eigenvalue(index);
        let x = self.pencil.eigenvector(lambda);
        (lambda, self.split(&x))
    }

    /// Unpacks an interleaved vector into centre and face samples.
    pub fn split(&self, x: &[T]) -> ModeSpinor<T> {
        let m = self.cells;
        let mut u = vec![T::zero(); m];
        let mut v = vec![T::zero(); m + 1];
        match self.layout {
            Layout::CenterFirst => {
                for i in 0..m {
                    u[i] = x[2 * i];
                    v[i + 1] = x[2 * i + 1];
                }
            }
            Layout::FaceFirst => {
                for i in 0..m {
                    v[i] = x[2 * i];
                    u[i] = x[2 * i + 1];
                }
                if self.periodic {
                    v[m] = v[0] * T::lit(self.holonomy as f64);
                }
            }
        }
        ModeSpinor {
            k: self.k,
            u,
            v,
            periodic: self.periodic,
            holonomy: self.holonomy,
        }
    }

    /// `D_flat ψ` for a field of this mode.
    pub fn apply(&self, psi: &ModeSpinor<T>) -> ModeSpinor<T> {
        let m = self.cells;
        let (a, b) = (self.a, self.b);
        let u: Vec<T> = (0..m).map(|i| a * psi.v[i + 1] + b * psi.v[i]).collect();
        let hol = T::lit(self.holonomy as f64);
        let mut v = vec![T::zero(); m + 1];
        for (j, slot) in v.iter_mut().enumerate() {
            let left = if j > 0 {
                psi.u[j - 1]
            } else if self.periodic {
                hol * psi.u[m - 1]
            } else {
                T::zero()
            };
            let right = if j < m {
                psi.u[j]
            } else if self.periodic {
                hol * psi.u[0]
            } else {
                T::zero()
            };
            *slot = a * left + b * right;
        }
        // Faces removed from the system carry no equation.
        match self.layout {
            Layout::CenterFirst => v[0] = T::zero(),
            Layout::FaceFirst if !self.periodic => v[m] = T::zero(),
            _ => {}
        }
        ModeSpinor {
            k: self.k,
            u,
            v,
            periodic: self.periodic,
            holonomy: self.holonomy,
        }
    }
}

/// A single-mode spinor `e^{ikθ}(U, V)` on the flat frame: `U` at cell
/// centres, `V` at the `M + 1` faces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSpinor<T> {
    pub k: ModeIndex,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub periodic: bool,
    pub holonomy: i8,
}

impl<T: Real> ModeSpinor<T> {
    /// `|ψ|²` at cell centres, face values shared between neighbours.
    pub fn center_density(&self) -> Vec<T> {
        let half = T::lit(0.5);
        (0..self.u.len())
            .map(|i| self.u[i] * self.u[i] + half * (self.v[i] * self.v[i] + self.v[i + 1] * self.v[i + 1]))
            .collect()
    }

    /// `Re⟨self, other⟩` at cell centres.
    pub fn center_pairing(&self, other: &ModeSpinor<T>) -> Vec<T> {
        let half = T::lit(0.5);
        (0..self.u.len())
            .map(|i| {
                self.u[i] * other.u[i] + half * (self.v[i] * other.v[i] + self.v[i + 1] * other.v[i + 1])
            })
            .collect()
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.u.iter_mut().for_each(|x| *x = *x * c);
        out.v.iter_mut().for_each(|x| *x = *x * c);
        out
    }
}

/// `assemble_mode` on the default frame of a profile.
pub fn assemble_mode<T: Real>(profile: &RevolutionProfile<T>, k: ModeIndex) -> Result<ModeOperator<T>> {
    FlatFrame::new(profile, FrameOptions::default())?.mode(k)
}

/// Lowest eigenvalue any mode of index `|k|` can have: `|k| / max W`.
pub fn mode_lower_bound<T: Real>(k: ModeIndex, max_weight: T) -> T {
    k.value::<T>().abs() / max_weight
}

/// First positive eigenpair over the modes `|k| ≤ k_max` for weights `W`.
#[derive(Clone, Debug)]
pub struct FirstEigen<T> {
    pub lambda: T,
    pub spinor: ModeSpinor<T>,
    /// Total kernel dimension over the scanned modes.
    pub kernel: usize,
    /// A mode beyond `k_max` could have a smaller eigenvalue.
    pub under_resolved: bool,
}

pub fn first_eigen<T: Real>(
    frame: &FlatFrame<T>,
    w_center: &[T],
    w_face: &[T],
    k_max: f64,
) -> Result<FirstEigen<T>> {
    let modes = mode_indices(frame.sector(), k_max);
    let max_w = w_center.iter().chain(w_face).fold(T::zero(), |m, &w| m.max(w));
    let mut best: Option<(T, ModeOperator<T>)> = None;
    let mut kernel = 0;
    for k in &modes {
        if let Some((lam, _)) = &best {
            if mode_lower_bound(*k, max_w) > *lam * T::lit(1.0 + 1e-9) {
                continue;
            }
        }
        let op = frame.weighted_mode(*k, w_center, w_face)?;
        kernel += op.kernel_dim();
        let Some((_, lam)) = op.first_positive() else { continue };
        let better = match &best {
            None => true,
            // Ties keep the earlier mode, which is the positive `k`.
            Some((b, _)) => lam < *b * (T::one() - T::lit(1e-12)),
        };
        if better {
            best = Some((lam, op));
        }
    }
    let (lambda, op) = best.ok_or_else(|| {
        Error::Resolution("no positive eigenvalue among the scanned modes".into())
    })?;
    let x = op.pencil().eigenvector(lambda);
    let spinor = op.split(&x);
    let next = ModeIndex::from_twice(modes.iter().map(|m| m.twice().abs()).max().unwrap_or(0) + 2);
    let under_resolved = mode_lower_bound(next, max_w) < lambda;
    Ok(FirstEigen {
        lambda,
        spinor,
        kernel,
        under_resolved,
    })
}

/// The spectrum of a surface of revolution near zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RevolutionSpectrum<T> {
    pub slice: SpectrumSlice<T>,
    /// Nonnegative eigenvalues computed per mode.
    pub modes: Vec<(ModeIndex, Vec<T>)>,
    pub under_resolved: bool,
    pub cells: usize,
    pub k_max: f64,
}

/// The `count` smallest nonnegative eigenvalues (with multiplicity) over
/// all modes `|k| ≤ k_max`, mirrored to a symmetric slice.
pub fn dirac_spectrum<T: Real>(
    profile: &RevolutionProfile<T>,
    k_max: f64,
    count: usize,
) -> Result<RevolutionSpectrum<T>> {
    dirac_spectrum_with(profile, k_max, count, FrameOptions::default())
}

pub fn dirac_spectrum_with<T: Real>(
    profile: &RevolutionProfile<T>,
    k_max: f64,
    count: usize,
    opts: FrameOptions,
) -> Result<RevolutionSpectrum<T>> {
    let frame = FlatFrame::new(profile, opts)?;
    let modes = mode_indices(frame.sector(), k_max);
    if count == 0 {
        return Ok(RevolutionSpectrum {
            slice: SpectrumSlice::empty(T::zero()),
            modes: Vec::new(),
            under_resolved: false,
            cells: frame.cells(),
            k_max,
        });
    }
    let max_w = frame.base_center().iter().fold(T::zero(), |m, &w| m.max(w));
    let slack = T::one() + T::lit(BUCKET_TOL);
    let mut per_mode = Vec::with_capacity(modes.len());
    let mut all: Vec<T> = Vec::new();
    let mut kernel_values = 0usize;
    // Modes come in order of |k|, so once the lower bound of a mode passes
    // the current count-th value no later mode can contribute.
    let running_cutoff = |all: &[T], kernel: usize| -> T {
        let need = count.saturating_sub(kernel);
        if need == 0 {
            return T::zero();
        }
        if all.len() < need {
            return T::infinity();
        }
        let mut sorted = all.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        sorted[need - 1]
    };
    for &k in &modes {
        let limit = running_cutoff(&all, kernel_values) * slack;
        if mode_lower_bound(k, max_w) > limit {
            break;
        }
        let op = frame.mode(k)?;
        let tol = op.zero_tolerance();
        let vals = op.nonnegative_below(count, limit);
        for &v in &vals {
            if v > tol {
                all.push(v);
            } else {
                // The mirrored zero sits in the lower half.
                kernel_values += 2;
            }
        }
        per_mode.push((k, vals));
    }
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let tol = T::lit(BUCKET_TOL);
    let keep_positive = count.saturating_sub(kernel_values.min(count));
    let mut kept: Vec<T> = all.iter().copied().take(keep_positive).collect();
    // Do not split a degenerate bucket.
    if let Some(&last) = kept.last() {
        for &v in &all[kept.len()..] {
            if (v - last).abs() <= tol * T::one().max(last.abs()) {
                kept.push(v);
            } else {
                break;
            }
        }
    }
    let cutoff = kept.last().copied().unwrap_or(T::zero());
    let next = ModeIndex::from_twice(modes.iter().map(|m| m.twice().abs()).max().unwrap_or(0) + 2);
    let under_resolved = mode_lower_bound(next, max_w) < cutoff;
    let pairs: Vec<(T, usize)> = kept.into_iter().map(|v| (v, 1)).collect();
    Ok(RevolutionSpectrum {
        slice: SpectrumSlice::from_nonnegative(&pairs, kernel_values, cutoff, tol),
        modes: per_mode,
        under_resolved,
        cells: frame.cells(),
        k_max,
    })
}

/// `λ₁⁺ · Area^{1/2}` of the profile metric itself.
pub fn lambda1_area_product<T: Real>(profile: &RevolutionProfile<T>, k_max: f64) -> Result<LaminEstimate<T>> {
    lambda1_area_product_with(profile, k_max, FrameOptions::default())
}

pub fn lambda1_area_product_with<T: Real>(
    profile: &RevolutionProfile<T>,
    k_max: f64,
    opts: FrameOptions,
) -> Result<LaminEstimate<T>> {
    let frame = FlatFrame::new(profile, opts)?;
    let first = first_eigen(&frame, frame.base_center(), frame.base_face(), k_max)?;
    let volume = area(profile);
    let lambda1 = if first.kernel > 0 { T::zero() } else { first.lambda };
    let mut est = LaminEstimate::new(lambda1, volume);
    let density = first.spinor.center_density();
    let cell = vec![frame.cell_area(); frame.cells()];
    est.el_residual = euler_lagrange_residual(frame.base_center(), &density, &cell, first.lambda);
    est.grid = frame.cells();
    est.k_max = Some(k_max);
    est.flags = EstimateFlags {
        under_resolved: first.under_resolved,
        kernel: first.kernel > 0,
        not_converged: false,
    };
    Ok(est)
}

/// `r = cos t` on `(-π/2, π/2)`: the unit sphere.
pub fn sphere<T: Real>(n: usize) -> Result<RevolutionProfile<T>> {
    round_sphere(T::one(), n)
}

/// The round sphere of radius `radius`.
pub fn round_sphere<T: Real>(radius: T, n: usize) -> Result<RevolutionProfile<T>> {
    let q = T::FRAC_PI_2() * radius;
    Ok(RevolutionProfile::caps_from_fn(-q, q, n, |t| radius * (t / radius).cos())?.with_label("sphere"))
}

/// A flat cylinder of radius `radius` and length `length`, closed up into a
/// torus.
pub fn cylinder<T: Real>(
    radius: T,
    length: T,
    n: usize,
    sector: ThetaSector,
    t_holonomy: i8,
) -> Result<RevolutionProfile<T>> {
    Ok(RevolutionProfile::periodic_from_fn(T::zero(), length, n, sector, t_holonomy, |_| radius)?
        .with_label("cylinder"))
}

/// The flat torus `R²/Γ` for an axis-aligned rectangular lattice: `t` runs
/// along the first generator, `θ` along the second.
pub fn flat_torus<T: Real>(lat: &Lattice2<T>, delta: SpinOffset, n: usize) -> Result<RevolutionProfile<T>> {
    if !lat.is_axis_rectangular() {
        return Err(Error::Domain("flat torus profiles need an axis-aligned rectangular lattice".into()));
    }
    let l1 = lat.generator(0)[0].abs();
    let l2 = lat.generator(1)[1].abs();
    let radius = l2 / (T::PI() + T::PI());
    let sector = if delta.is_half(1) {
        ThetaSector::HalfInteger
    } else {
        ThetaSector::Integer
    };
    let hol = if delta.is_half(0) { -1 } else { 1 };
    Ok(cylinder(radius, l1, n, sector, hol)?.with_label("flat_torus"))
}

/// A torus of revolution: a circle of radius `a` whose centre runs on a
/// circle of radius `big_r > a`.
pub fn torus_of_revolution<T: Real>(
    big_r: T,
    a: T,
    n: usize,
    sector: ThetaSector,
    t_holonomy: i8,
) -> Result<RevolutionProfile<T>> {
    if !(big_r > a) || !(a > T::zero()) {
        return Err(Error::DegenerateProfile(format!("need 0 < a < R, got a = {a}, R = {big_r}")));
    }
    let period = (T::PI() + T::PI()) * a;
    Ok(
        RevolutionProfile::periodic_from_fn(T::zero(), period, n, sector, t_holonomy, |t| {
            big_r + a * (t / a).cos()
        })?
        .with_label("torus_of_revolution"),
    )
}

/// Exponent of the smooth maximum used to glue necks onto spheres.
const SOFT_MAX_POWER: i32 = 8;

fn smootherstep<T: Real>(x: T) -> T {
    let x = x.max(T::zero()).min(T::one());
    x * x * x * (x * (x * T::lit(6.0) - T::lit(15.0)) + T::lit(10.0))
}

fn soft_max<T: Real>(parts: &[T]) -> T {
    let p = SOFT_MAX_POWER;
    let m = parts.iter().fold(T::zero(), |m, &x| m.max(x));
    if m == T::zero() {
        return T::zero();
    }
    let s = parts.iter().fold(T::zero(), |acc, &x| acc + (x / m).powi(p));
    m * s.powf(T::one() / T::lit(p as f64))
}

fn check_neck<T: Real>(neck_radius: T, neck_length: T) -> Result<()> {
    if !(neck_radius > T::zero()) || !(neck_radius < T::one()) {
        return Err(Error::InvalidNeck(format!(
            "neck radius must lie in (0, 1) (the cap radius), got {neck_radius}"
        )));
    }
    if !(neck_length >= T::zero()) || !neck_length.is_finite() {
        return Err(Error::InvalidNeck(format!("neck length must be nonnegative, got {neck_length}")));
    }
    Ok(())
}

/// Two unit spheres joined by a tube of radius `neck_radius` and length
/// `neck_length`, glued with a smooth maximum. Topologically a sphere.
pub fn dumbbell<T: Real>(neck_radius: T, neck_length: T, n: usize) -> Result<RevolutionProfile<T>> {
    check_neck(neck_radius, neck_length)?;
    let pi = T::PI();
    let total = pi + pi + neck_length;
    let quarter = pi * T::lit(0.25);
    let f = move |t: T| {
        let a = if t > T::zero() && t < pi { t.sin() } else { T::zero() };
        let u = total - t;
        let b = if u > T::zero() && u < pi { u.sin() } else { T::zero() };
        let ramp = ((t - quarter) / quarter).min((total - quarter - t) / quarter);
        let m = smootherstep(ramp);
        soft_max(&[a, b, neck_radius * m])
    };
    Ok(RevolutionProfile::caps_from_fn(T::zero(), total, n, f)?.with_label("dumbbell"))
}

/// One unit sphere whose poles are joined by a tube of radius `neck_radius`
/// and length `neck_length`: a torus. The `θ`-circles carry the bounding
/// structure; `t_holonomy` selects the structure along the core.
pub fn handle<T: Real>(neck_radius: T, neck_length: T, n: usize, t_holonomy: i8) -> Result<RevolutionProfile<T>> {
    check_neck(neck_radius, neck_length)?;
    let pi = T::PI();
    let period = pi + neck_length;
    let f = move |t: T| {
        let a = if t > T::zero() && t < pi { t.sin() } else { T::zero() };
        soft_max(&[a, neck_radius])
    };
    Ok(
        RevolutionProfile::periodic_from_fn(T::zero(), period, n, ThetaSector::HalfInteger, t_holonomy, f)?
            .with_label("handle"),
    )
}

/// One CSV row `(k, eigenvalue)`.
#[derive(Clone, Debug, Serialize)]
pub struct ModeEigenRow {
    pub k: f64,
    pub eigenvalue: f64,
}

pub fn spectrum_rows<T: Real>(spec: &RevolutionSpectrum<T>) -> Vec<ModeEigenRow> {
    let mut rows = Vec::new();
    for (k, vals) in &spec.modes {
        for &v in vals {
            rows.push(ModeEigenRow {
                k: k.as_f64(),
                eigenvalue: v.to_f64_lossy(),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mode_enumeration() {
        let half = mode_indices(ThetaSector::HalfInteger, 1.5);
        let got: Vec<f64> = half.iter().map(|k| k.as_f64()).collect();
        assert_eq!(got, vec![0.5, -0.5, 1.5, -1.5]);
        let int = mode_indices(ThetaSector::Integer, 1.0);
        let got: Vec<f64> = int.iter().map(|k| k.as_f64()).collect();
        assert_eq!(got, vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn sphere_first_modes() {
        let p = sphere::<f64>(1024).unwrap();
        let frame = FlatFrame::new(&p, FrameOptions::default()).unwrap();
        let op = frame.mode(ModeIndex::from_twice(1)).unwrap();
        let vals = op.nonnegative(3);
        for (v, e) in vals.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - e).abs() < 1e-3, "{v} vs {e}");
        }
        let op = frame.mode(ModeIndex::from_twice(3)).unwrap();
        assert!((op.nonnegative(1)[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn sign_flip_mirrors_symmetric_profiles() {
        let p = sphere::<f64>(512).unwrap();
        let frame = FlatFrame::new(&p, FrameOptions::default()).unwrap();
        for t in [1, 3, 5] {
            let a = frame.mode(ModeIndex::from_twice(t)).unwrap().nonnegative(4);
            let b = frame.mode(ModeIndex::from_twice(-t)).unwrap().nonnegative(4);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9 * x.max(1.0));
            }
        }
    }

    #[test]
    fn mode_spectrum_is_symmetric() {
        let p = dumbbell::<f64>(0.3, 1.0, 256).unwrap();
        let frame = FlatFrame::new(&p, FrameOptions::default()).unwrap();
        let op = frame.mode(ModeIndex::from_twice(-3)).unwrap();
        let n = op.dim();
        let all = op.eigenvalues(0..n);
        for i in 0..n {
            assert!((all[i] + all[n - 1 - i]).abs() < 1e-8 * all[i].abs().max(1.0));
        }
    }

    #[test]
    fn constant_profile_matches_closed_form() {
        let c = 0.7;
        let l = 3.0;
        let p = cylinder::<f64>(c, l, 2048, ThetaSector::HalfInteger, -1).unwrap();
        let frame = FlatFrame::new(&p, FrameOptions::default()).unwrap();
        let op = frame.mode(ModeIndex::from_twice(1)).unwrap();
        let v = op.nonnegative(1)[0];
        let mu = PI / l;
        let expect = (mu * mu + (0.5 / c) * (0.5 / c)).sqrt();
        assert!((v - expect).abs() < 1e-5 * expect, "{v} vs {expect}");
    }

    #[test]
    fn kernel_of_trivial_torus() {
        let p = cylinder::<f64>(1.0 / (2.0 * PI), 1.0, 256, ThetaSector::Integer, 1).unwrap();
        let spec = dirac_spectrum(&p, 2.0, 4).unwrap();
        assert_eq!(spec.slice.kernel_multiplicity(), 2);
        let est = lambda1_area_product(&p, 2.0).unwrap();
        assert!(est.flags.kernel);
        assert_eq!(est.lambda1, 0.0);
    }

    #[test]
    fn areas() {
        let p = sphere::<f64>(2048).unwrap();
        assert!((area(&p) - 4.0 * PI).abs() < 1e-6);
        let c = cylinder::<f64>(0.5, 2.0, 64, ThetaSector::HalfInteger, -1).unwrap();
        assert!((area(&c) - 2.0 * PI * 0.5 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_profiles_rejected() {
        assert!(matches!(
            RevolutionProfile::caps(0.0, 1.0, vec![1.0, 0.0, 1.0, 1.0]),
            Err(Error::DegenerateProfile(_))
        ));
        assert!(matches!(dumbbell::<f64>(1.0, 1.0, 64), Err(Error::InvalidNeck(_))));
        let p = sphere::<f64>(64).unwrap();
        let frame = FlatFrame::new(&p, FrameOptions::default()).unwrap();
        assert!(frame.mode(ModeIndex::from_twice(2)).is_err());
    }

    #[test]
    fn empty_count_gives_empty_slice() {
        let p = sphere::<f64>(64).unwrap();
        let s = dirac_spectrum(&p, 2.0, 0).unwrap();
        assert!(s.slice.entries.is_empty());
    }

    #[test]
    fn csv_samples_round_trip() {
        let p = sphere::<f64>(64).unwrap();
        let t: Vec<f64> = (0..p.len()).map(|i| p.t(i)).collect();
        let q = RevolutionProfile::from_samples(&t, p.r(), Topology::Caps, ThetaSector::HalfInteger, 1).unwrap();
        assert!((q.t0() - p.t0()).abs() < 1e-12);
        assert!((q.dt() - p.dt()).abs() < 1e-12);
    }
}
