//! Quadratic refinements of the Z₂ intersection form on H₁ of a closed
//! oriented surface, their Arf and α invariants, and the bookkeeping of
//! connected sums and 0-dimensional surgery.
//!
//! Homology classes are written in a fixed symplectic basis
//! `(a₁, b₁, …, a_g, b_g)` with `aᵢ ∩ bᵢ = 1` and all other basis
//! intersections zero.
//!
//! Convention warning: a class whose tangent frame *lifts* to the spin bundle
//! gets `q = 1`. Part of the literature uses the opposite convention, which
//! replaces `q` by `q + 1` on lifted loops. With the convention used here the
//! torus with the trivial homomorphism `γ` is the unique genus-one odd form.

use std::fmt;
use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest genus for which the exhaustive `2^{2g}` sums are run.
pub const MAX_EXHAUSTIVE_GENUS: usize = 12;

/// An element of the field with two elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Z2(bool);

impl Z2 {
    pub const ZERO: Z2 = Z2(false);
    pub const ONE: Z2 = Z2(true);

    pub fn new(bit: u8) -> Z2 {
        Z2(bit & 1 == 1)
    }

    pub fn is_one(self) -> bool {
        self.0
    }

    pub fn as_u8(self) -> u8 {
        self.0 as u8
    }
}

impl From<bool> for Z2 {
    fn from(b: bool) -> Self {
        Z2(b)
    }
}

impl Add for Z2 {
    type Output = Z2;
    fn add(self, rhs: Z2) -> Z2 {
        Z2(self.0 ^ rhs.0)
    }
}

impl AddAssign for Z2 {
    fn add_assign(&mut self, rhs: Z2) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Z2 {
    type Output = Z2;
    fn mul(self, rhs: Z2) -> Z2 {
        Z2(self.0 & rhs.0)
    }
}

impl fmt::Display for Z2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Z2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Z2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Z2, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(Z2::ZERO),
            1 => Ok(Z2::ONE),
            other => Err(serde::de::Error::custom(format!("expected bit 0 or 1, got {other}"))),
        }
    }
}

/// Parses a comma separated bit list such as `1,0,1,1`.
pub fn parse_bits(s: &str) -> Result<Vec<Z2>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| match tok.trim() {
            "0" => Ok(Z2::ZERO),
            "1" => Ok(Z2::ONE),
            other => Err(Error::Parse(format!("expected bit 0 or 1, got `{other}`"))),
        })
        .collect()
}

fn check_genus(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// A class in H₁(M, Z₂), coordinates ordered `(a₁, b₁, …, a_g, b_g)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Z2Class {
    genus: usize,
    coords: Vec<Z2>,
}

impl Z2Class {
    pub fn new(genus: usize, coords: Vec<Z2>) -> Result<Self> {
        if coords.len() != 2 * genus {
            return Err(Error::Dimension {
                expected: genus,
                found: coords.len() / 2,
            });
        }
        Ok(Self { genus, coords })
    }

    pub fn zero(genus: usize) -> Self {
        Self {
            genus,
            coords: vec![Z2::ZERO; 2 * genus],
        }
    }

    /// The `i`-th basis vector in the flat ordering `(a₁, b₁, a₂, …)`.
    pub fn basis(genus: usize, i: usize) -> Self {
        let mut c = Self::zero(genus);
        c.coords[i] = Z2::ONE;
        c
    }

    /// `a_{handle+1}` (handles are zero-based here).
    pub fn a(genus: usize, handle: usize) -> Self {
        Self::basis(genus, 2 * handle)
    }

    /// `b_{handle+1}`.
    pub fn b(genus: usize, handle: usize) -> Self {
        Self::basis(genus, 2 * handle + 1)
    }

    /// Builds the class whose coordinate `i` is bit `i` of `mask`.
    pub fn from_mask(genus: usize, mask: u64) -> Self {
        let coords = (0..2 * genus).map(|i| Z2::from(mask >> i & 1 == 1)).collect();
        Self { genus, coords }
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn coords(&self) -> &[Z2] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| !c.is_one())
    }

    pub fn checked_add(&self, other: &Z2Class) -> Result<Z2Class> {
        check_genus(self.genus, other.genus)?;
        Ok(self + other)
    }
}

impl Add for &Z2Class {
    type Output = Z2Class;
    /// Panics on genus mismatch; use [`Z2Class::checked_add`] for fallible input.
    fn add(self, rhs: &Z2Class) -> Z2Class {
        assert_eq!(self.genus, rhs.genus, "adding classes of different genus");
        Z2Class {
            genus: self.genus,
            coords: self.coords.iter().zip(&rhs.coords).map(|(&x, &y)| x + y).collect(),
        }
    }
}

/// The intersection pairing `x ∩ y = Σᵢ (x_{aᵢ} y_{bᵢ} + x_{bᵢ} y_{aᵢ})`.
pub fn intersection(x: &Z2Class, y: &Z2Class) -> Result<Z2> {
    check_genus(x.genus, y.genus)?;
    Ok(pair(&x.coords, &y.coords))
}

fn pair(x: &[Z2], y: &[Z2]) -> Z2 {
    x.chunks_exact(2)
        .zip(y.chunks_exact(2))
        .fold(Z2::ZERO, |acc, (p, q)| acc + p[0] * q[1] + p[1] * q[0])
}

/// A Z₂-valued quadratic refinement of the intersection form, stored by its
/// values on the symplectic basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawForm")]
pub struct QuadraticForm {
    genus: usize,
    basis_values: Vec<Z2>,
}

#[derive(Deserialize)]
struct RawForm {
    genus: usize,
    basis_values: Vec<Z2>,
}

impl TryFrom<RawForm> for QuadraticForm {
    type Error = Error;
    fn try_from(raw: RawForm) -> Result<Self> {
        QuadraticForm::new(raw.genus, raw.basis_values)
    }
}

impl QuadraticForm {
    pub fn new(genus: usize, basis_values: Vec<Z2>) -> Result<Self> {
        if basis_values.len() != 2 * genus {
            return Err(Error::Dimension {
                expected: genus,
                found: basis_values.len() / 2,
            });
        }
        Ok(Self { genus, basis_values })
    }

    /// Convenience constructor from raw bits, e.g. `from_bits(&[1, 1])`.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if !bits.len().is_multiple_of(2) {
            return Err(Error::Parse(format!(
                "a form needs an even number of basis values, got {}",
                bits.len()
            )));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Parse(format!("expected bit 0 or 1, got {b}")));
        }
        Self::new(bits.len() / 2, bits.iter().map(|&b| Z2::new(b)).collect())
    }

    /// The unique form on H₁(S²) = 0.
    pub fn sphere() -> Self {
        Self {
            genus: 0,
            basis_values: Vec::new(),
        }
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn basis_values(&self) -> &[Z2] {
        &self.basis_values
    }

    /// Basis values packed into a bit mask (bit `i` = value on basis vector `i`).
    fn value_mask(&self) -> u64 {
        self.basis_values
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, v)| m | (v.as_u8() as u64) << i)
    }

    pub fn eval(&self, x: &Z2Class) -> Result<Z2> {
        eval_form(self, x)
    }

    pub fn arf(&self) -> Result<ArfValue> {
        arf(self)
    }

    pub fn alpha(&self) -> Result<Z2> {
        alpha(self)
    }

    /// The bits formatted as `1,0,…` (the CLI / CSV representation).
    pub fn bits_string(&self) -> String {
        self.basis_values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// `q(x) = Σᵢ xᵢ q(eᵢ) + Σ_{i<j} xᵢ xⱼ (eᵢ ∩ eⱼ)`; in the symplectic basis the
/// cross terms reduce to `Σ_h x_{a_h} x_{b_h}`.
pub fn eval_form(q: &QuadraticForm, x: &Z2Class) -> Result<Z2> {
    check_genus(q.genus, x.genus)?;
    Ok(eval_raw(&q.basis_values, &x.coords))
}

fn eval_raw(values: &[Z2], x: &[Z2]) -> Z2 {
    let linear = values
        .iter()
        .zip(x)
        .fold(Z2::ZERO, |acc, (&v, &c)| acc + v * c);
    x.chunks_exact(2).fold(linear, |acc, h| acc + h[0] * h[1])
}

/// Mask of the `a` positions, i.e. even bits.
const A_BITS: u64 = 0x5555_5555_5555_5555;

#[inline]
fn eval_mask(values: u64, x: u64) -> u32 {
    ((x & values).count_ones() + (x & (x >> 1) & A_BITS).count_ones()) & 1
}

/// The Arf invariant as a sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArfValue {
    Plus,
    Minus,
}

impl ArfValue {
    pub fn sign(self) -> i8 {
        match self {
            ArfValue::Plus => 1,
            ArfValue::Minus => -1,
        }
    }

    pub fn from_alpha(alpha: Z2) -> Self {
        if alpha.is_one() {
            ArfValue::Minus
        } else {
            ArfValue::Plus
        }
    }
}

impl Mul for ArfValue {
    type Output = ArfValue;
    fn mul(self, rhs: ArfValue) -> ArfValue {
        if self == rhs {
            ArfValue::Plus
        } else {
            ArfValue::Minus
        }
    }
}

impl fmt::Display for ArfValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArfValue::Plus => "+1",
            ArfValue::Minus => "-1",
        })
    }
}

impl Serialize for ArfValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign())
    }
}

impl<'de> Deserialize<'de> for ArfValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(ArfValue::Plus),
            -1 => Ok(ArfValue::Minus),
            other => Err(serde::de::Error::custom(format!("expected +1 or -1, got {other}"))),
        }
    }
}

fn check_exhaustive_genus(genus: usize) -> Result<()> {
    if genus > MAX_EXHAUSTIVE_GENUS {
        Err(Error::Resource(format!(
            "exhaustive sum over 2^{} classes exceeds the genus cap {MAX_EXHAUSTIVE_GENUS}",
            2 * genus
        )))
    } else {
        Ok(())
    }
}

/// `Arf(q) = 2^{-g} Σ_{x ∈ H₁} (-1)^{q(x)}`, summed over every class.
pub fn arf(q: &QuadraticForm) -> Result<ArfValue> {
    check_exhaustive_genus(q.genus)?;
    let values = q.value_mask();
    let n = 1u64 << (2 * q.genus);
    let odd: u64 = (0..n).map(|x| eval_mask(values, x) as u64).sum();
    let sum = n as i64 - 2 * odd as i64;
    let scale = 1i64 << q.genus;
    debug_assert!(sum == scale || sum == -scale, "Arf sum {sum} is not ±2^g");
    Ok(if sum > 0 { ArfValue::Plus } else { ArfValue::Minus })
}

/// `(-1)^α = Arf(q)`.
pub fn alpha(q: &QuadraticForm) -> Result<Z2> {
    Ok(Z2::from(arf(q)? == ArfValue::Minus))
}

/// The orthogonal sum `q₁ ⊕ q₂` on `V₁ ⊕ V₂`.
pub fn direct_sum(q1: &QuadraticForm, q2: &QuadraticForm) -> QuadraticForm {
    let mut basis_values = q1.basis_values.clone();
    basis_values.extend_from_slice(&q2.basis_values);
    QuadraticForm {
        genus: q1.genus + q2.genus,
        basis_values,
    }
}

/// The form of a flat torus `R²/Γ` whose spin structure comes from
/// `γ: Γ → {±1}`, written additively (`0 ↔ +1`): `q(v) = γ(v) + 1` on the
/// generators.
pub fn torus_form(gamma_a: Z2, gamma_b: Z2) -> QuadraticForm {
    QuadraticForm {
        genus: 1,
        basis_values: vec![gamma_a + Z2::ONE, gamma_b + Z2::ONE],
    }
}

/// Lazily enumerates all `2^{2g}` quadratic forms of genus `g`.
pub fn enumerate_forms(genus: usize) -> Result<FormIter> {
    check_exhaustive_genus(genus)?;
    Ok(FormIter {
        genus,
        next: 0,
        end: 1u64 << (2 * genus),
    })
}

#[derive(Clone, Debug)]
pub struct FormIter {
    genus: usize,
    next: u64,
    end: u64,
}

impl Iterator for FormIter {
    type Item = QuadraticForm;

    fn next(&mut self) -> Option<QuadraticForm> {
        if self.next >= self.end {
            return None;
        }
        let mask = self.next;
        self.next += 1;
        Some(QuadraticForm {
            genus: self.genus,
            basis_values: Z2Class::from_mask(self.genus, mask).coords,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for FormIter {}

/// A change of basis over Z₂. Column `i` is the new `i`-th basis vector in
/// old coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisChange {
    genus: usize,
    columns: Vec<Z2Class>,
}

impl BasisChange {
    pub fn identity(genus: usize) -> Self {
        Self {
            genus,
            columns: (0..2 * genus).map(|i| Z2Class::basis(genus, i)).collect(),
        }
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn columns(&self) -> &[Z2Class] {
        &self.columns
    }

    /// Maps new coordinates to old coordinates.
    pub fn apply(&self, x: &Z2Class) -> Result<Z2Class> {
        check_genus(self.genus, x.genus)?;
        let mut out = Z2Class::zero(self.genus);
        for (c, col) in x.coords.iter().zip(&self.columns) {
            if c.is_one() {
                out = &out + col;
            }
        }
        Ok(out)
    }

    /// True iff the columns form a symplectic basis.
    pub fn is_symplectic(&self) -> bool {
        let n = 2 * self.genus;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let expected = Z2::from(i / 2 == j / 2 && i != j);
                pair(&self.columns[i].coords, &self.columns[j].coords) == expected
            })
        })
    }

    /// The form `q ∘ W` expressed in the new basis.
    pub fn pull_back(&self, q: &QuadraticForm) -> Result<QuadraticForm> {
        check_genus(self.genus, q.genus)?;
        let basis_values = self
            .columns
            .iter()
            .map(|c| eval_raw(&q.basis_values, &c.coords))
            .collect();
        QuadraticForm::new(self.genus, basis_values)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        let n = 2 * self.genus;
        (0..n)
            .map(|r| (0..n).map(|c| self.columns[c].coords[r].as_u8()).collect())
            .collect()
    }
}

/// The standard representative of a form together with the symplectic basis
/// change realising it.
#[derive(Clone, Debug)]
pub struct Normalization {
    pub standard: QuadraticForm,
    pub witness: BasisChange,
}

/// Splits `q` into hyperbolic handles: every handle carries `[0, 0]` except a
/// single trailing `[1, 1]` handle when `Arf(q) = -1`.
///
/// The construction is greedy: repeatedly pick a nonzero `x` with `q(x) = 0`,
/// a partner `y` with `x ∩ y = 1` and `q(y) = 0`, and pass to the symplectic
/// complement. It runs in `O(g³)` and needs no genus cap.
pub fn normalize_form(q: &QuadraticForm) -> Normalization {
    let g = q.genus;
    let vals = &q.basis_values;
    let qv = |x: &Z2Class| eval_raw(vals, &x.coords);
    let w = |x: &Z2Class, y: &Z2Class| pair(&x.coords, &y.coords);

    let mut remaining: Vec<(Z2Class, Z2Class)> =
        (0..g).map(|h| (Z2Class::a(g, h), Z2Class::b(g, h))).collect();
    let mut zero_pairs = Vec::with_capacity(g);
    let mut odd_pair = None;

    while !remaining.is_empty() {
        let x = remaining
            .iter()
            .flat_map(|(a, b)| [a, b])
            .find(|v| !qv(v).is_one())
            .cloned()
            .or_else(|| (remaining.len() >= 2).then(|| &remaining[0].0 + &remaining[1].0));

        let Some(x) = x else {
            // A single handle on which every nonzero class has q = 1.
            odd_pair = remaining.pop();
            break;
        };

        let y0 = remaining
            .iter()
            .flat_map(|(a, b)| [a, b])
            .find(|v| w(&x, v).is_one())
            .cloned()
            .expect("nondegenerate subspace pairs every nonzero vector");
        let y = if qv(&y0).is_one() { &y0 + &x } else { y0 };

        let project = |v: &Z2Class| {
            let mut out = v.clone();
            if w(v, &y).is_one() {
                out = &out + &x;
            }
            if w(v, &x).is_one() {
                out = &out + &y;
            }
            out
        };
        let pool: Vec<Z2Class> = remaining
            .iter()
            .flat_map(|(a, b)| [project(a), project(b)])
            .collect();
        remaining = symplectic_basis(pool);
        zero_pairs.push((x, y));
    }

    let mut columns = Vec::with_capacity(2 * g);
    for (x, y) in zero_pairs.into_iter().chain(odd_pair) {
        columns.push(x);
        columns.push(y);
    }
    let witness = BasisChange { genus: g, columns };
    let standard = witness.pull_back(q).expect("genus matches by construction");
    Normalization { standard, witness }
}

/// Symplectic Gram–Schmidt on a spanning list of a nondegenerate subspace.
fn symplectic_basis(mut pool: Vec<Z2Class>) -> Vec<(Z2Class, Z2Class)> {
    let mut pairs = Vec::new();
    loop {
        pool.retain(|v| !v.is_zero());
        let Some(v) = pool.pop() else { break };
        let Some(j) = pool.iter().position(|u| pair(&v.coords, &u.coords).is_one()) else {
            // v lies in the span of the vectors already split off.
            continue;
        };
        let u = pool.swap_remove(j);
        for p in pool.iter_mut() {
            let mut out = p.clone();
            if pair(&p.coords, &u.coords).is_one() {
                out = &out + &v;
            }
            if pair(&p.coords, &v.coords).is_one() {
                out = &out + &u;
            }
            *p = out;
        }
        pairs.push((v, u));
    }
    pairs
}

/// A closed oriented surface with spin structure, represented by its genus
/// and quadratic form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinSurface {
    genus: usize,
    form: QuadraticForm,
    label: String,
}

impl SpinSurface {
    pub fn new(form: QuadraticForm, label: impl Into<String>) -> Self {
        Self {
            genus: form.genus,
            form,
            label: label.into(),
        }
    }

    pub fn sphere() -> Self {
        Self::new(QuadraticForm::sphere(), "S2")
    }

    pub fn torus(gamma_a: Z2, gamma_b: Z2) -> Self {
        Self::new(
            torus_form(gamma_a, gamma_b),
            format!("T2(gamma={gamma_a}{gamma_b})"),
        )
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn form(&self) -> &QuadraticForm {
        &self.form
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn alpha(&self) -> Result<Z2> {
        alpha(&self.form)
    }
}

/// `(M₁ # M₂, χ₁ # χ₂)`: the forms add orthogonally.
pub fn connected_sum(m1: &SpinSurface, m2: &SpinSurface) -> SpinSurface {
    SpinSurface::new(
        direct_sum(&m1.form, &m2.form),
        format!("{}#{}", m1.label, m2.label),
    )
}

/// 0-dimensional surgery on a connected surface: attaches a handle whose belt
/// circle `b_{g+1}` carries the bounding spin structure (`q = 0`) and whose
/// core `a_{g+1}` takes the chosen value.
pub fn surgery_0d(m: &SpinSurface, core_value: Z2) -> SpinSurface {
    let handle = QuadraticForm {
        genus: 1,
        basis_values: vec![core_value, Z2::ZERO],
    };
    SpinSurface::new(
        direct_sum(&m.form, &handle),
        format!("{}+h{}", m.label, core_value),
    )
}
