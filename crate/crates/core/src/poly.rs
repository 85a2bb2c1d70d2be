//! Real polynomials, their roots, and strict Hurwitz / Schur stability tests.
//!
//! Coefficients are stored in ascending powers: `coeffs[i]` multiplies `x^i`.
//! Every stability test here is *strict*: a root on the imaginary axis (or
//! the unit circle), a zero Routh pivot, or a degenerate Schur–Cohn step all
//! classify the polynomial as not stable.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficients with magnitude at or below this are treated as zero when
/// trimming the degree.
pub const LEADING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("polynomial is identically zero (all coefficients below {LEADING_TOL:e})")]
    ZeroPolynomial,
}

/// Which stability region the roots must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityKind {
    /// Open left half-plane (continuous time).
    Hurwitz,
    /// Open unit disk (discrete time).
    Schur,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients. An empty list is the
    /// zero polynomial.
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self { coeffs: vec![0.0] };
        }
        Self { coeffs }
    }

    /// Builds a polynomial from coefficients listed highest power first.
    pub fn from_descending(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().rev().copied().collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Highest index with `|coeff| > LEADING_TOL`, or `None` for the zero
    /// polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| c.abs() > LEADING_TOL)
    }

    /// Coefficients with negligible leading terms removed.
    pub fn trimmed(&self) -> Result<&[f64], PolyError> {
        let d = self.degree().ok_or(PolyError::ZeroPolynomial)?;
        Ok(&self.coeffs[..=d])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// All `degree` roots, with multiplicity, as eigenvalues of the companion
    /// matrix of the monic normalization.
    pub fn roots(&self) -> Result<Vec<Complex64>, PolyError> {
        let c = self.trimmed()?;
        let n = c.len() - 1;
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = c[n];
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -c[i] / lead;
        }
        let eig = companion.complex_eigenvalues();
        Ok(eig.iter().copied().collect())
    }

    /// Strict Hurwitz test by the Routh array.
    ///
    /// The leading coefficient is normalized positive; any first-column entry
    /// that is not strictly positive (including a zero pivot from a degenerate
    /// row) yields `false`.
    pub fn is_hurwitz(&self) -> Result<bool, PolyError> {
        let c = self.trimmed()?;
        Ok(routh_strict(c))
    }

    /// Strict Schur test by the Schur–Cohn reflection recursion.
    pub fn is_schur(&self) -> Result<bool, PolyError> {
        let c = self.trimmed()?;
        Ok(schur_cohn_strict(c))
    }

    pub fn is_stable(&self, kind: StabilityKind) -> Result<bool, PolyError> {
        match kind {
            StabilityKind::Hurwitz => self.is_hurwitz(),
            StabilityKind::Schur => self.is_schur(),
        }
    }

    /// Hurwitz: `-max Re(root)`; Schur: `1 - max |root|`. Positive iff stable.
    /// A nonzero constant has no roots and gets `+inf`.
    pub fn stability_margin(&self, kind: StabilityKind) -> Result<f64, PolyError> {
        let roots = self.roots()?;
        Ok(margin_of_roots(&roots, kind))
    }
}

pub(crate) fn margin_of_roots(roots: &[Complex64], kind: StabilityKind) -> f64 {
    match kind {
        StabilityKind::Hurwitz => -roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max),
        StabilityKind::Schur => 1.0 - roots.iter().map(|r| r.norm()).fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Routh test on trimmed ascending coefficients (nonzero leading term).
pub(crate) fn routh_strict(ascending: &[f64]) -> bool {
    let n = ascending.len() - 1;
    if n == 0 {
        return true;
    }
    let sign = ascending[n].signum();
    // descending, leading positive
    let desc: Vec<f64> = ascending.iter().rev().map(|c| c * sign).collect();
    let mut prev: Vec<f64> = desc.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = desc.iter().skip(1).step_by(2).copied().collect();
    if !(prev[0] > 0.0) {
        return false;
    }
    for _ in 1..=n {
        let pivot = cur.first().copied().unwrap_or(0.0);
        if !(pivot > 0.0) {
            return false;
        }
        let width = prev.len().saturating_sub(1).max(cur.len().saturating_sub(1));
        let mut next = Vec::with_capacity(width);
        for j in 0..width {
            let a = prev.get(j + 1).copied().unwrap_or(0.0);
            let b = cur.get(j + 1).copied().unwrap_or(0.0);
            next.push((pivot * a - prev[0] * b) / pivot);
        }
        prev = cur;
        cur = next;
    }
    true
}

/// Schur–Cohn recursion on trimmed ascending coefficients.
///
/// With `k = a_0 / a_n`, the polynomial is Schur iff `|k| < 1` and the
/// reduced polynomial `(a_n p(z) - a_0 p*(z)) / z` is Schur.
pub(crate) fn schur_cohn_strict(ascending: &[f64]) -> bool {
    let mut a: Vec<f64> = ascending.to_vec();
    loop {
        let n = a.len() - 1;
        if n == 0 {
            return true;
        }
        let lead = a[n];
        let konst = a[0];
        if !(konst.abs() < lead.abs()) {
            return false;
        }
        let mut b: Vec<f64> = (1..=n).map(|i| lead * a[i] - konst * a[n - i]).collect();
        let scale = b.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if !(scale > 0.0) || !scale.is_finite() {
            return false;
        }
        for c in &mut b {
            *c /= scale;
        }
        // leading term is (a_n^2 - a_0^2) / scale, strictly positive here
        if b[n - 1] <= LEADING_TOL {
            return false;
        }
        a = b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut r: Vec<Complex64>) -> Vec<Complex64> {
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        r
    }

    #[test]
    fn roots_of_factored_quadratics() {
        let r = sorted_re(Polynomial::new(vec![-1.0, 0.0, 1.0]).roots().unwrap());
        assert!((r[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        let r = sorted_re(Polynomial::new(vec![1.0, 0.0, 1.0]).roots().unwrap());
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn cubic_roots_in_left_half_plane() {
        let p = Polynomial::from_descending(&[1.0, 2.0, 2.0, 3.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|z| z.re < 0.0));
        for z in &r {
            assert!(p.eval_complex(*z).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_polynomial_is_an_error() {
        let p = Polynomial::new(vec![0.0, 1e-13]);
        assert_eq!(p.roots(), Err(PolyError::ZeroPolynomial));
        assert_eq!(p.is_hurwitz(), Err(PolyError::ZeroPolynomial));
        assert_eq!(p.is_schur(), Err(PolyError::ZeroPolynomial));
    }

    #[test]
    fn hurwitz_examples() {
        assert!(Polynomial::new(vec![1.0, 1.0]).is_hurwitz().unwrap());
        // |q - d| = 0.6 on the abs-coupled cubic: a2 = 1.4, 1.4 * 2 < 3
        assert!(!Polynomial::from_descending(&[1.0, 1.4, 2.0, 3.0]).is_hurwitz().unwrap());
        assert!(Polynomial::from_descending(&[1.0, 2.0, 2.0, 3.0]).is_hurwitz().unwrap());
        // negative leading coefficient is normalized
        assert!(Polynomial::new(vec![-1.0, -1.0]).is_hurwitz().unwrap());
    }

    #[test]
    fn marginal_polynomials_are_not_hurwitz() {
        // s^2 + 1: roots on the imaginary axis
        assert!(!Polynomial::new(vec![1.0, 0.0, 1.0]).is_hurwitz().unwrap());
        // s^3 + s^2 + s + 1: zero Routh pivot
        assert!(!Polynomial::new(vec![1.0, 1.0, 1.0, 1.0]).is_hurwitz().unwrap());
        // root at zero
        assert!(!Polynomial::new(vec![0.0, 1.0]).is_hurwitz().unwrap());
    }

    #[test]
    fn schur_examples() {
        assert!(Polynomial::new(vec![0.0, 1.0]).is_schur().unwrap());
        assert!(!Polynomial::new(vec![-2.0, 1.0]).is_schur().unwrap());
        // root on the unit circle
        assert!(!Polynomial::new(vec![-1.0, 1.0]).is_schur().unwrap());
        // (z - 0.5)(z + 0.25)
        assert!(Polynomial::new(vec![-0.125, -0.25, 1.0]).is_schur().unwrap());
        // z^2 + 1: both roots on the circle
        assert!(!Polynomial::new(vec![1.0, 0.0, 1.0]).is_schur().unwrap());
    }

    #[test]
    fn margins() {
        let m = Polynomial::new(vec![1.0, 1.0]).stability_margin(StabilityKind::Hurwitz).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        let m = Polynomial::new(vec![-2.0, 1.0]).stability_margin(StabilityKind::Schur).unwrap();
        assert!((m + 1.0).abs() < 1e-12);
        let p = Polynomial::from_descending(&[1.0, 2.0, 2.0, 3.0]);
        let m = p.stability_margin(StabilityKind::Hurwitz).unwrap();
        let max_re = p.roots().unwrap().iter().map(|z| z.re).fold(f64::MIN, f64::max);
        assert!(m > 0.0);
        assert_eq!(m, -max_re);
    }

    #[test]
    fn scale_invariance_of_routh() {
        let p = Polynomial::from_descending(&[2.0, 3.0, 1.0, 0.5]);
        for c in [1e-6, 0.3, 7.0, 1e5] {
            let q = Polynomial::new(p.coeffs().iter().map(|x| x * c).collect());
            assert_eq!(p.is_hurwitz(), q.is_hurwitz());
        }
    }
}
