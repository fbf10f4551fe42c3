//! Closed-form Dirac spectra on flat tori `R²/Γ` for the four spin
//! structures, kernel dimensions, and the mod-2 index check.
//!
//! A spin structure is a homomorphism `γ: Γ → {±1}`. It is encoded by an
//! offset `δ ∈ {0, ½}²` in *dual-basis coordinates*: `δᵢ = ½` exactly when
//! `γ(vᵢ) = -1`. The Dirac eigenvalues are `±2π|ξ|` for `ξ = B*(m + δ)`,
//! `m ∈ Z²`, where `B*` is the dual basis. Each `ξ` contributes one
//! eigenspinor per sign; `ξ = 0` gives two parallel spinors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::z2_forms::{alpha, torus_form, Z2};

/// Default bound on the number of candidate lattice points examined by one
/// spectrum enumeration.
pub const DEFAULT_POINT_BUDGET: usize = 4_000_000;

/// Relative tolerance for merging equal `|ξ|` into one bucket.
pub const MERGE_TOL: f64 = 1e-9;

/// A rank-2 lattice in R², stored by its two generators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice2<T> {
    /// `basis[i]` is the generator `vᵢ` (a column of the basis matrix).
    basis: [[T; 2]; 2],
}

impl<T: Real> Lattice2<T> {
    pub fn new(v1: [T; 2], v2: [T; 2]) -> Result<Self> {
        let lat = Self { basis: [v1, v2] };
        let det = lat.det();
        let scale = norm(v1) * norm(v2);
        if !det.is_finite() || !(det.abs() > scale * T::lit(1e-12)) {
            return Err(Error::DegenerateLattice(det.to_f64_lossy()));
        }
        Ok(lat)
    }

    /// `Z²`.
    pub fn square() -> Self {
        Self::rectangular(T::one(), T::one()).expect("unit square is regular")
    }

    /// `diag(a, b)`.
    pub fn rectangular(a: T, b: T) -> Result<Self> {
        Self::new([a, T::zero()], [T::zero(), b])
    }

    /// The hexagonal lattice with unit generators at 60°.
    pub fn hexagonal() -> Self {
        let half = T::lit(0.5);
        let h = T::lit(3.0).sqrt() * half;
        Self::new([T::one(), T::zero()], [half, h]).expect("hexagonal is regular")
    }

    pub fn generator(&self, i: usize) -> [T; 2] {
        self.basis[i]
    }

    pub fn det(&self) -> T {
        let [a, b] = self.basis;
        a[0] * b[1] - a[1] * b[0]
    }

    pub fn covolume(&self) -> T {
        self.det().abs()
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        let [a, b] = self.basis;
        Self::new([a[0] * c, a[1] * c], [b[0] * c, b[1] * c])
    }

    /// True when the generators are orthogonal and axis-aligned.
    pub fn is_axis_rectangular(&self) -> bool {
        let [a, b] = self.basis;
        a[1] == T::zero() && b[0] == T::zero()
    }

    /// Maps coordinates in this basis to R².
    pub fn point(&self, c: [T; 2]) -> [T; 2] {
        let [a, b] = self.basis;
        [a[0] * c[0] + b[0] * c[1], a[1] * c[0] + b[1] * c[1]]
    }
}

fn norm<T: Real>(v: [T; 2]) -> T {
    v[0].hypot(v[1])
}

/// The dual lattice `Γ* = {ξ : ⟨ξ, v⟩ ∈ Z for all v ∈ Γ}`, basis `B^{-T}`.
pub fn dual_lattice<T: Real>(lat: &Lattice2<T>) -> Result<Lattice2<T>> {
    let det = lat.det();
    if det == T::zero() || !det.is_finite() {
        return Err(Error::DegenerateLattice(det.to_f64_lossy()));
    }
    let [a, b] = lat.basis;
    // B = [a b]; B^{-1} = [[b1, -b0], [-a1, a0]] / det; columns of B^{-T}
    // are the rows of B^{-1}.
    let d1 = [b[1] / det, -b[0] / det];
    let d2 = [-a[1] / det, a[0] / det];
    Lattice2::new(d1, d2)
}

/// The offset `δ` encoding a homomorphism `γ: Γ → {±1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct SpinOffset {
    half: [bool; 2],
}

impl SpinOffset {
    pub const fn from_halves(h1: bool, h2: bool) -> Self {
        Self { half: [h1, h2] }
    }

    /// Accepts exactly `0` or `0.5` in each slot.
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        let conv = |d: f64| {
            if d == 0.0 {
                Ok(false)
            } else if d == 0.5 {
                Ok(true)
            } else {
                Err(Error::Parse(format!("spin offset entries must be 0 or 0.5, got {d}")))
            }
        };
        Ok(Self::from_halves(conv(d1)?, conv(d2)?))
    }

    /// `γ` written additively (`1 ↔ -1`).
    pub fn from_gamma(g1: Z2, g2: Z2) -> Self {
        Self::from_halves(g1.is_one(), g2.is_one())
    }

    pub fn all() -> [SpinOffset; 4] {
        [
            Self::from_halves(false, false),
            Self::from_halves(true, false),
            Self::from_halves(false, true),
            Self::from_halves(true, true),
        ]
    }

    pub fn is_trivial(&self) -> bool {
        !self.half[0] && !self.half[1]
    }

    pub fn is_half(&self, i: usize) -> bool {
        self.half[i]
    }

    pub fn gamma(&self) -> (Z2, Z2) {
        (Z2::from(self.half[0]), Z2::from(self.half[1]))
    }

    pub fn delta<T: Real>(&self) -> [T; 2] {
        let v = |h: bool| if h { T::lit(0.5) } else { T::zero() };
        [v(self.half[0]), v(self.half[1])]
    }
}

impl Serialize for SpinOffset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.delta::<f64>().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpinOffset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b] = <[f64; 2]>::deserialize(d)?;
        SpinOffset::new(a, b).map_err(serde::de::Error::custom)
    }
}

/// A window of a symmetric spectrum: sorted `(eigenvalue, multiplicity)`
/// pairs with `|λ| ≤ cutoff`. Multiplicities are complex dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSlice<T> {
    pub entries: Vec<(T, usize)>,
    pub cutoff: T,
}

impl<T: Real> SpectrumSlice<T> {
    pub fn empty(cutoff: T) -> Self {
        Self {
            entries: Vec::new(),
            cutoff,
        }
    }

    /// Builds a symmetric slice from nonnegative eigenvalues. Each positive
    /// value is mirrored; zeros are listed once per kernel dimension.
    pub fn from_nonnegative(values: &[(T, usize)], kernel: usize, cutoff: T, tol: T) -> Self {
        let mut vals: Vec<(T, usize)> = values.iter().copied().filter(|v| v.0 > T::zero()).collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
        let mut merged: Vec<(T, usize)> = Vec::new();
        for (v, m) in vals {
            match merged.last_mut() {
                Some(last) if (v - last.0).abs() <= tol * T::one().max(v.abs()) => last.1 += m,
                _ => merged.push((v, m)),
            }
        }
        let mut entries: Vec<(T, usize)> = merged.iter().rev().map(|&(v, m)| (-v, m)).collect();
        if kernel > 0 {
            entries.push((T::zero(), kernel));
        }
        entries.extend(merged);
        Self { entries, cutoff }
    }

    pub fn kernel_multiplicity(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.0 == T::zero())
            .map(|e| e.1)
            .sum()
    }

    /// Smallest strictly positive eigenvalue in the window.
    pub fn first_positive(&self) -> Option<(T, usize)> {
        self.entries.iter().copied().find(|e| e.0 > T::zero())
    }

    /// The nonnegative part, ascending.
    pub fn nonnegative(&self) -> impl Iterator<Item = (T, usize)> + '_ {
        self.entries.iter().copied().filter(|e| e.0 >= T::zero())
    }

    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Invariance under `λ ↦ -λ` with multiplicities.
    pub fn is_symmetric(&self, tol: T) -> bool {
        let n = self.entries.len();
        (0..n).all(|i| {
            let (a, ma) = self.entries[i];
            let (b, mb) = self.entries[n - 1 - i];
            ma == mb && (a + b).abs() <= tol * T::one().max(a.abs())
        })
    }

    /// Every eigenvalue repeated by multiplicity.
    pub fn expanded(&self) -> Vec<T> {
        self.entries
            .iter()
            .flat_map(|&(v, m)| std::iter::repeat_n(v, m))
            .collect()
    }
}

/// Shifted dual points `ξ = B*(m + δ)` with `|ξ| ≤ radius`, as `|ξ|` values.
fn shifted_dual_norms<T: Real>(
    lat: &Lattice2<T>,
    delta: SpinOffset,
    radius: T,
    budget: usize,
) -> Result<Vec<T>> {
    let dual = dual_lattice(lat)?;
    let d = delta.delta::<T>();
    // The coordinate cᵢ = mᵢ + δᵢ equals ⟨vᵢ, ξ⟩, so |cᵢ| ≤ |vᵢ| radius.
    let reach = |i: usize| norm(lat.generator(i)) * radius;
    let range = |i: usize| {
        let r = reach(i);
        let lo = (-r - d[i]).ceil().to_f64_lossy();
        let hi = (r - d[i]).floor().to_f64_lossy();
        (lo, hi)
    };
    let (lo1, hi1) = range(0);
    let (lo2, hi2) = range(1);
    let count = ((hi1 - lo1 + 1.0).max(0.0)) * ((hi2 - lo2 + 1.0).max(0.0));
    if !count.is_finite() || count > budget as f64 {
        return Err(Error::Resource(format!(
            "spectrum enumeration needs {count:.3e} candidate points, budget is {budget}"
        )));
    }
    let mut out = Vec::new();
    let (lo1, hi1, lo2, hi2) = (lo1 as i64, hi1 as i64, lo2 as i64, hi2 as i64);
    for m1 in lo1..=hi1 {
        for m2 in lo2..=hi2 {
            let c = [T::lit(m1 as f64) + d[0], T::lit(m2 as f64) + d[1]];
            let xi = dual.point(c);
            let r = norm(xi);
            if r <= radius {
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// The Dirac spectrum of `R²/Γ` with spin offset `δ` in `[-cutoff, cutoff]`.
pub fn flat_spectrum<T: Real>(
    lat: &Lattice2<T>,
    delta: SpinOffset,
    cutoff: T,
) -> Result<SpectrumSlice<T>> {
    flat_spectrum_with_budget(lat, delta, cutoff, DEFAULT_POINT_BUDGET)
}

pub fn flat_spectrum_with_budget<T: Real>(
    lat: &Lattice2<T>,
    delta: SpinOffset,
    cutoff: T,
    budget: usize,
) -> Result<SpectrumSlice<T>> {
    if !(cutoff > T::zero()) || !cutoff.is_finite() {
        return Err(Error::Domain(format!("cutoff must be positive, got {cutoff}")));
    }
    let two_pi = T::PI() + T::PI();
    let norms = shifted_dual_norms(lat, delta, cutoff / two_pi, budget)?;
    let kernel = 2 * norms.iter().filter(|&&r| r == T::zero()).count();
    let positive: Vec<(T, usize)> = norms
        .into_iter()
        .filter(|&r| r > T::zero())
        .map(|r| (two_pi * r, 1))
        .collect();
    Ok(SpectrumSlice::from_nonnegative(
        &positive,
        kernel,
        cutoff,
        T::lit(MERGE_TOL),
    ))
}

/// Complex dimension of the space of harmonic spinors: 2 for the trivial
/// offset, 0 otherwise.
pub fn kernel_dim<T: Real>(lat: &Lattice2<T>, delta: SpinOffset) -> Result<usize> {
    let spec = flat_spectrum(lat, delta, smallest_positive_radius(lat)? * T::lit(0.5))?;
    Ok(spec.kernel_multiplicity())
}

/// `2π` times a radius guaranteed to contain a nonzero shifted dual point.
fn smallest_positive_radius<T: Real>(lat: &Lattice2<T>) -> Result<T> {
    let dual = dual_lattice(lat)?;
    let r = norm(dual.generator(0)).max(norm(dual.generator(1)));
    Ok((T::PI() + T::PI()) * r * T::lit(1.000001))
}

/// `dim ker D / 2 ≡ α(M, χ) mod 2` for the flat torus.
pub fn index_check<T: Real>(lat: &Lattice2<T>, delta: SpinOffset) -> Result<bool> {
    let k = kernel_dim(lat, delta)?;
    let (g1, g2) = delta.gamma();
    let a = alpha(&torus_form(g1, g2))?;
    Ok((k / 2) % 2 == a.as_u8() as usize)
}

/// First-eigenvalue data of the flat metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatBound<T> {
    /// First nonnegative eigenvalue (zero when there is a kernel).
    pub lambda1_plus: T,
    /// First strictly positive eigenvalue.
    pub first_positive: T,
    pub covolume: T,
    /// `lambda1_plus · covolume^{1/2}`.
    pub product: T,
    /// `first_positive · covolume^{1/2}`.
    pub positive_product: T,
    pub kernel: bool,
}

/// `λ₁⁺ · Vol^{1/2}` of the flat metric, an upper bound for the conformal
/// infimum of the class.
pub fn lamin_flat_upper<T: Real>(lat: &Lattice2<T>, delta: SpinOffset) -> Result<FlatBound<T>> {
    let spec = flat_spectrum(lat, delta, smallest_positive_radius(lat)?)?;
    let (first_positive, _) = spec
        .first_positive()
        .expect("radius contains a nonzero dual point");
    let kernel = spec.kernel_multiplicity() > 0;
    let covolume = lat.covolume();
    let root = covolume.sqrt();
    let lambda1_plus = if kernel { T::zero() } else { first_positive };
    Ok(FlatBound {
        lambda1_plus,
        first_positive,
        covolume,
        product: lambda1_plus * root,
        positive_product: first_positive * root,
        kernel,
    })
}

/// One CSV row of a flat spectrum.
#[derive(Clone, Debug, Serialize)]
pub struct FlatSpectrumRow {
    pub lattice_basis: String,
    pub delta: String,
    pub eigenvalue: f64,
    pub multiplicity: usize,
}

pub fn spectrum_rows<T: Real>(
    lat: &Lattice2<T>,
    delta: SpinOffset,
    slice: &SpectrumSlice<T>,
) -> Vec<FlatSpectrumRow> {
    let [a, b] = lat.basis;
    let basis = format!("{} {} {} {}", a[0], a[1], b[0], b[1]);
    let d = delta.delta::<f64>();
    let delta = format!("{} {}", d[0], d[1]);
    slice
        .entries
        .iter()
        .map(|&(v, m)| FlatSpectrumRow {
            lattice_basis: basis.clone(),
            delta: delta.clone(),
            eigenvalue: v.to_f64_lossy(),
            multiplicity: m,
        })
        .collect()
}
