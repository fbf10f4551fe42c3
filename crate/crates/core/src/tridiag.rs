//! Real symmetric tridiagonal pencils `H x = λ W x` with `W` positive
//! diagonal, optionally closed into a cycle by a corner entry `H[0][n-1]`.
//!
//! Eigenvalues are located by Sylvester inertia counts of `H - σW` and
//! bisection; eigenvectors by inverse iteration. Nothing is symmetrized, so
//! weights spanning many orders of magnitude are handled without loss.

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalPencil<T> {
    /// Main diagonal of `H`.
    pub diag: Vec<T>,
    /// Off-diagonal of `H`, length `n - 1`.
    pub off: Vec<T>,
    /// Entry `H[0][n-1] = H[n-1][0]`; zero for an open chain.
    pub corner: T,
    /// Positive diagonal of `W`.
    pub weight: Vec<T>,
}

impl<T: Real> TridiagonalPencil<T> {
    /// Zero diagonal, as for first-order operators.
    pub fn off_diagonal(off: Vec<T>, corner: T, weight: Vec<T>) -> Self {
        let n = weight.len();
        Self {
            diag: vec![T::zero(); n],
            off,
            corner,
            weight,
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    fn is_cyclic(&self) -> bool {
        self.corner != T::zero() && self.len() >= 3
    }

    /// `H x`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        let mut y: Vec<T> = (0..n).map(|i| self.diag[i] * x[i]).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] = y[i] + self.off[i] * x[i + 1];
            y[i + 1] = y[i + 1] + self.off[i] * x[i];
        }
        if n == 2 && self.corner != T::zero() {
            y[0] = y[0] + self.corner * x[1];
            y[1] = y[1] + self.corner * x[0];
        } else if self.is_cyclic() {
            y[0] = y[0] + self.corner * x[n - 1];
            y[n - 1] = y[n - 1] + self.corner * x[0];
        }
        y
    }

    /// Off-diagonal with a two-element cycle folded in.
    fn off_at(&self, i: usize) -> T {
        if self.len() == 2 && i == 0 {
            self.off[0] + self.corner
        } else {
            self.off[i]
        }
    }

    /// Number of pencil eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: T) -> usize {
        let n = self.len();
        if n == 0 {
            return 0;
        }
        let tiny = T::min_positive_value().sqrt();
        let guard = |d: T, scale: T| {
            if d == T::zero() {
                -(tiny * (scale + T::one()))
            } else {
                d
            }
        };
        let a = |i: usize| self.diag[i] - sigma * self.weight[i];
        // Sturm sequence of the leading `len` rows; also reports whether an
        // exact zero pivot was met.
        let sturm = |len: usize| {
            let mut count = 0;
            let mut singular = false;
            let mut d = a(0);
            if d == T::zero() {
                singular = true;
            }
            d = guard(d, self.weight[0].abs());
            if d < T::zero() {
                count += 1;
            }
            for i in 1..len {
                let e = self.off_at(i - 1);
                d = a(i) - e * e / d;
                if d == T::zero() {
                    singular = true;
                }
                d = guard(d, e.abs());
                if d < T::zero() {
                    count += 1;
                }
            }
            (count, singular)
        };
        if !self.is_cyclic() {
            return sturm(n).0;
        }

        // Inertia of the leading block plus the sign of the Schur complement
        // of the last row. The complement is formed from a pivoted solve:
        // summing it along the elimination cancels catastrophically.
        let m = n - 1;
        let (lead, singular) = sturm(m);
        if singular {
            // The leading block is singular at exactly this shift; counts are
            // locally constant, so step off it.
            let scale = self.bounds().1.abs() + sigma.abs();
            return self.count_below(sigma + scale * T::lit(16.0) * T::epsilon());
        }
        let diag: Vec<T> = (0..m).map(a).collect();
        let off = &self.off[..m - 1];
        let mut u = vec![T::zero(); m];
        u[0] = self.corner;
        u[m - 1] = u[m - 1] + self.off[m - 1];
        let y = solve_tridiagonal(off, &diag, off, &u);
        let coupling = u.iter().zip(&y).fold(T::zero(), |acc, (&p, &q)| acc + p * q);
        let schur = a(m) - coupling;
        lead + usize::from(schur < T::zero())
    }

    /// Gershgorin enclosure of the pencil spectrum.
    pub fn bounds(&self) -> (T, T) {
        let n = self.len();
        let mut lo = T::zero();
        let mut hi = T::zero();
        for i in 0..n {
            let mut rad = T::zero();
            if i > 0 {
                rad = rad + self.off_at(i - 1).abs();
            }
            if i + 1 < n {
                rad = rad + self.off_at(i).abs();
            }
            if self.is_cyclic() && (i == 0 || i == n - 1) {
                rad = rad + self.corner.abs();
            }
            let w = self.weight[i];
            lo = lo.min((self.diag[i] - rad) / w);
            hi = hi.max((self.diag[i] + rad) / w);
        }
        let pad = (hi - lo).abs() * T::lit(1e-12) + T::min_positive_value();
        (lo - pad, hi + pad)
    }

    /// The `index`-th smallest eigenvalue (zero-based).
    pub fn eigenvalue(&self, index: usize) -> T {
        assert!(index < self.len(), "eigenvalue index out of range");
        let (lo, hi) = self.bounds();
        self.bisect(index, lo, hi)
    }

    /// The `index`-th eigenvalue, bisecting from a caller-supplied bracket
    /// that is widened to the Gershgorin bounds when it does not enclose it.
    pub fn eigenvalue_in(&self, index: usize, lo: T, hi: T) -> T {
        assert!(index < self.len(), "eigenvalue index out of range");
        let (glo, ghi) = self.bounds();
        let lo = if self.count_below(lo) <= index { lo } else { glo };
        let hi = if self.count_below(hi) > index { hi } else { ghi };
        self.bisect(index, lo, hi)
    }

    fn bisect(&self, index: usize, mut lo: T, mut hi: T) -> T {
        let two = T::lit(2.0);
        let eps = T::epsilon();
        for _ in 0..400 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if hi - lo <= two * eps * lo.abs().max(hi.abs()) {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo + hi) / two
    }

    /// Eigenvalues with indices in `range`, ascending.
    pub fn eigenvalues(&self, range: std::ops::Range<usize>) -> Vec<T> {
        let (lo, hi) = self.bounds();
        let mut out = Vec::with_capacity(range.len());
        let mut floor = lo;
        for j in range {
            let v = self.bisect(j, floor, hi);
            out.push(v);
            floor = floor.max(v - (v.abs() + T::one()) * T::lit(1e3) * T::epsilon());
        }
        out
    }

    /// Eigenvector for an (accurately known) eigenvalue, normalised so that
    /// `xᵀ W x = 1`.
    pub fn eigenvector(&self, lambda: T) -> Vec<T> {
        let n = self.len();
        let shift = lambda + (lambda.abs() + T::one()) * T::lit(64.0) * T::epsilon();
        let mut x: Vec<T> = (0..n)
            .map(|i| T::one() + T::lit(0.3) * T::from_usize_lossy(i).sin())
            .collect();
        for _ in 0..3 {
            let rhs: Vec<T> = x.iter().zip(&self.weight).map(|(&a, &w)| a * w).collect();
            let y = self.solve_shifted(shift, &rhs);
            let norm = y
                .iter()
                .zip(&self.weight)
                .fold(T::zero(), |acc, (&a, &w)| acc + a * a * w)
                .sqrt();
            if !(norm > T::zero()) || !norm.is_finite() {
                break;
            }
            x = y.into_iter().map(|v| v / norm).collect();
        }
        // Fix the sign so that the largest entry is positive.
        let imax = (0..n)
            .max_by(|&i, &j| x[i].abs().partial_cmp(&x[j].abs()).unwrap())
            .unwrap_or(0);
        if n > 0 && x[imax] < T::zero() {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        x
    }

    /// Solves `(H - σW) y = b`.
    pub fn solve_shifted(&self, sigma: T, b: &[T]) -> Vec<T> {
        let n = self.len();
        let mut d: Vec<T> = (0..n).map(|i| self.diag[i] - sigma * self.weight[i]).collect();
        let sub: Vec<T> = (0..n.saturating_sub(1)).map(|i| self.off_at(i)).collect();
        if !self.is_cyclic() {
            return solve_tridiagonal(&sub, &d, &sub, b);
        }
        // Sherman–Morrison: A = T' + u vᵀ with u = (γ, 0, …, c), v = (1, 0, …, c/γ).
        let c = self.corner;
        let gamma = if d[0].abs() > c.abs() { -d[0] } else { c };
        d[0] = d[0] - gamma;
        d[n - 1] = d[n - 1] - c * c / gamma;
        let y = solve_tridiagonal(&sub, &d, &sub, b);
        let mut u = vec![T::zero(); n];
        u[0] = gamma;
        u[n - 1] = c;
        let z = solve_tridiagonal(&sub, &d, &sub, &u);
        let vy = y[0] + c / gamma * y[n - 1];
        let vz = z[0] + c / gamma * z[n - 1];
        let mut denom = T::one() + vz;
        if denom == T::zero() {
            denom = T::epsilon();
        }
        let fac = vy / denom;
        y.iter().zip(&z).map(|(&a, &b)| a - fac * b).collect()
    }
}

/// Gaussian elimination with partial pivoting for a general tridiagonal
/// system (`lower[i] = A[i+1][i]`, `upper[i] = A[i][i+1]`).
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], b: &[T]) -> Vec<T> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    let tiny = T::min_positive_value().sqrt();
    let mut d = diag.to_vec();
    let mut du: Vec<T> = upper.to_vec();
    let mut du2 = vec![T::zero(); n.saturating_sub(2)];
    let mut dl: Vec<T> = lower.to_vec();
    let mut x = b.to_vec();
    for i in 0..n.saturating_sub(1) {
        if dl[i].abs() > d[i].abs() {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let tmp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = tmp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            x.swap(i, i + 1);
            x[i + 1] = x[i + 1] - fact * x[i];
        } else {
            if d[i] == T::zero() {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] = d[i + 1] - fact * du[i];
            x[i + 1] = x[i + 1] - fact * x[i];
        }
    }
    if d[n - 1] == T::zero() {
        d[n - 1] = tiny;
    }
    x[n - 1] = x[n - 1] / d[n - 1];
    if n >= 2 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    x
}
