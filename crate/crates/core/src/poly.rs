//! Univariate and bivariate complex polynomials.
//!
//! Both types are generic over the real scalar so the same code serves the
//! double-precision backend used on grids and the exact rational backend used
//! for certificate checks. Conversion between the two is always explicit.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type C64 = Complex<f64>;
pub type CRat = Complex<BigRational>;

/// Polynomial in one complex variable, constant term first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly<T: Clone> {
    coeffs: Vec<Complex<T>>,
}

pub type ComplexPoly = Poly<f64>;
pub type ExactPoly = Poly<BigRational>;

impl<T: Clone + Num> Poly<T> {
    pub fn new(mut coeffs: Vec<Complex<T>>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn monomial(c: Complex<T>, power: usize) -> Self {
        let mut coeffs = vec![Complex::zero(); power + 1];
        coeffs[power] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Coefficient of `z^k`, zero past the degree.
    pub fn coeff(&self, k: usize) -> Complex<T> {
        self.coeffs.get(k).cloned().unwrap_or_else(Complex::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Index of the leading nonzero coefficient; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex<T> {
        self.coeffs.last().cloned().unwrap_or_else(Complex::zero)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: &Complex<T>) -> Complex<T> {
        let mut acc = Complex::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * z.clone() + c.clone();
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.clone() * scalar_from_usize::<T>(k))
            .collect();
        Self::new(coeffs)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Complex::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: &Complex<T>) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.clone() * s.clone()).collect())
    }

    /// Subtract a constant, i.e. the polynomial whose roots solve `p(z) = target`.
    pub fn shifted(&self, target: &Complex<T>) -> Self {
        let mut coeffs = self.coeffs.clone();
        if coeffs.is_empty() {
            coeffs.push(Complex::zero());
        }
        coeffs[0] = coeffs[0].clone() - target.clone();
        Self::new(coeffs)
    }

    /// Polynomial with the given roots, leading coefficient one.
    pub fn from_roots(roots: &[Complex<T>]) -> Self {
        let mut p = Self::new(vec![Complex::new(T::one(), T::zero())]);
        for r in roots {
            let factor = Self::new(vec![Complex::<T>::zero() - r.clone(), Complex::new(T::one(), T::zero())]);
            p = p.mul(&factor);
        }
        p
    }
}

fn scalar_from_usize<T: Num>(k: usize) -> T {
    let mut acc = T::zero();
    for _ in 0..k {
        acc = acc + T::one();
    }
    acc
}

impl ComplexPoly {
    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    /// Sum of coefficient moduli.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn to_exact(&self) -> ExactPoly {
        ExactPoly::new(self.coeffs.iter().map(c64_to_exact).collect())
    }
}

impl ExactPoly {
    pub fn to_f64(&self) -> ComplexPoly {
        ComplexPoly::new(self.coeffs.iter().map(exact_to_c64).collect())
    }
}

/// Exact binary value of a finite double.
pub fn f64_to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
}

pub fn c64_to_exact(c: &C64) -> CRat {
    CRat::new(f64_to_rational(c.re), f64_to_rational(c.im))
}

pub fn exact_to_c64(c: &CRat) -> C64 {
    C64::new(
        c.re.to_f64().unwrap_or(f64::NAN),
        c.im.to_f64().unwrap_or(f64::NAN),
    )
}

/// Squared modulus, exact for rationals.
pub fn norm_sqr<T: Clone + Num>(c: &Complex<T>) -> T {
    c.re.clone() * c.re.clone() + c.im.clone() * c.im.clone()
}

/// One term `c z^j w^k` of a bivariate polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term<T: Clone> {
    pub j: u32,
    pub k: u32,
    pub c: Complex<T>,
}

/// Polynomial in `(z, w)`, stored sparsely by `(z-power, w-power)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bivar<T: Clone> {
    terms: BTreeMap<(u32, u32), Complex<T>>,
}

pub type BivarPoly = Bivar<f64>;
pub type ExactBivar = Bivar<BigRational>;

impl<T: Clone + Num> Bivar<T> {
    /// Builds from terms; repeated `(j, k)` pairs are summed and zeros dropped.
    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, Complex<T>)>) -> Self {
        let mut map: BTreeMap<(u32, u32), Complex<T>> = BTreeMap::new();
        for (j, k, c) in terms {
            let entry = map.entry((j, k)).or_insert_with(Complex::zero);
            *entry = entry.clone() + c;
        }
        map.retain(|_, c| !c.is_zero());
        Self { terms: map }
    }

    pub fn terms(&self) -> impl Iterator<Item = Term<T>> + '_ {
        self.terms.iter().map(|(&(j, k), c)| Term { j, k, c: c.clone() })
    }

    pub fn coeff(&self, j: u32, k: u32) -> Complex<T> {
        self.terms.get(&(j, k)).cloned().unwrap_or_else(Complex::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn z_degree(&self) -> u32 {
        self.terms.keys().map(|&(j, _)| j).max().unwrap_or(0)
    }

    pub fn w_degree(&self) -> u32 {
        self.terms.keys().map(|&(_, k)| k).max().unwrap_or(0)
    }

    pub fn eval(&self, z: &Complex<T>, w: &Complex<T>) -> Complex<T> {
        // terms are few and of low degree; this avoids building rows
        let mut acc = Complex::zero();
        for (&(j, k), c) in &self.terms {
            acc = acc + c.clone() * pow(z, j) * pow(w, k);
        }
        acc
    }

    /// `Q_j(w)`: the coefficient of `z^j`, as a polynomial in `w`.
    pub fn q_j(&self, j: u32) -> Poly<T> {
        let kmax = self.w_degree() as usize;
        let mut coeffs = vec![Complex::zero(); kmax + 1];
        for (&(jj, k), c) in &self.terms {
            if jj == j {
                coeffs[k as usize] = c.clone();
            }
        }
        Poly::new(coeffs)
    }

    /// Reassembles `Σ_j Q_j(w) z^j`.
    pub fn from_q_family(family: &[Poly<T>]) -> Self {
        Self::from_terms(family.iter().enumerate().flat_map(|(j, qj)| {
            qj.coeffs()
                .iter()
                .enumerate()
                .map(move |(k, c)| (j as u32, k as u32, c.clone()))
        }))
    }

    /// `Q(z, ·)` as a polynomial in `w`.
    pub fn fiber(&self, z: &Complex<T>) -> Poly<T> {
        Poly::new(self.rows_by_w().iter().map(|row| row.eval(z)).collect())
    }

    /// `Q(·, w)` as a polynomial in `z`.
    pub fn base_slice(&self, w: &Complex<T>) -> Poly<T> {
        let jmax = self.z_degree() as usize;
        let mut coeffs = vec![Complex::zero(); jmax + 1];
        for (&(j, k), c) in &self.terms {
            coeffs[j as usize] = coeffs[j as usize].clone() + c.clone() * pow(w, k);
        }
        Poly::new(coeffs)
    }

    /// Rows indexed by w-power, each a polynomial in z.
    pub fn rows_by_w(&self) -> Vec<Poly<T>> {
        let kmax = self.w_degree() as usize;
        let jmax = self.z_degree() as usize;
        let mut rows = vec![vec![Complex::zero(); jmax + 1]; kmax + 1];
        for (&(j, k), c) in &self.terms {
            rows[k as usize][j as usize] = c.clone();
        }
        rows.into_iter().map(Poly::new).collect()
    }

    pub fn partial_w(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(&(_, k), _)| k > 0)
                .map(|(&(j, k), c)| (j, k - 1, c.clone() * scalar_from_usize::<T>(k as usize))),
        )
    }

    pub fn partial_z(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(&(j, _), _)| j > 0)
                .map(|(&(j, k), c)| (j - 1, k, c.clone() * scalar_from_usize::<T>(j as usize))),
        )
    }
}

fn pow<T: Clone + Num>(x: &Complex<T>, n: u32) -> Complex<T> {
    let mut acc = Complex::new(T::one(), T::zero());
    for _ in 0..n {
        acc = acc * x.clone();
    }
    acc
}

impl BivarPoly {
    pub fn to_exact(&self) -> ExactBivar {
        ExactBivar::from_terms(self.terms().map(|t| (t.j, t.k, c64_to_exact(&t.c))))
    }
}

impl ExactBivar {
    pub fn to_f64(&self) -> BivarPoly {
        BivarPoly::from_terms(self.terms().map(|t| (t.j, t.k, exact_to_c64(&t.c))))
    }
}

impl fmt::Display for ComplexPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            match k {
                0 => {}
                1 => write!(f, "z")?,
                _ => write!(f, "z^{k}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for BivarPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for t in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", t.c)?;
            if t.j > 0 {
                write!(f, "z^{}", t.j)?;
            }
            if t.k > 0 {
                write!(f, "w^{}", t.k)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn horner_matches_hand_values() {
        let p = ComplexPoly::from_real(&[0.0, 0.25, 1.0]);
        assert_eq!(p.eval(&c(0.0)), c(0.0));
        assert_eq!(p.eval(&c(-0.25)), c(0.0));
        assert_eq!(p.eval(&c(2.0)), c(4.5));
    }

    #[test]
    fn trailing_zeros_are_stripped() {
        let p = ComplexPoly::from_real(&[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert_eq!(p.coeffs().len(), 2);
        assert!(ComplexPoly::from_real(&[0.0, 0.0]).is_zero());
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        assert!(ComplexPoly::from_real(&[3.0]).derivative().is_zero());
        let p = ComplexPoly::from_real(&[0.0, 0.25, 1.0]);
        assert_eq!(p.derivative(), ComplexPoly::from_real(&[0.25, 2.0]));
    }

    #[test]
    fn example_map_partials() {
        // w^2 + w/2 + 10 z^2
        let q = BivarPoly::from_terms([(0, 2, c(1.0)), (0, 1, c(0.5)), (2, 0, c(10.0))]);
        let qw = q.partial_w();
        assert_eq!(qw.fiber(&c(0.0)), ComplexPoly::from_real(&[0.5, 2.0]));
        // critical point w = -1/4
        assert_eq!(qw.eval(&c(0.3), &c(-0.25)), c(0.0));
        assert_eq!(q.partial_z().eval(&c(0.0), &c(0.0)), c(0.0));
    }

    #[test]
    fn bivar_dedups_and_drops_zeros() {
        let q = BivarPoly::from_terms([(1, 1, c(2.0)), (1, 1, c(-2.0)), (0, 2, c(1.0)), (3, 0, c(0.0))]);
        assert_eq!(q.terms().count(), 1);
        assert_eq!(q.coeff(0, 2), c(1.0));
    }

    #[test]
    fn q_family_round_trips() {
        let q = BivarPoly::from_terms([
            (0, 2, c(1.0)),
            (0, 1, c(0.5)),
            (1, 1, C64::new(0.0, 2.0)),
            (2, 0, c(10.0)),
        ]);
        let family: Vec<_> = (0..=q.z_degree()).map(|j| q.q_j(j)).collect();
        assert_eq!(BivarPoly::from_q_family(&family), q);
    }

    #[test]
    fn exact_round_trip_of_dyadic_coefficients() {
        let p = ComplexPoly::from_real(&[0.0, 0.25, 1.0]);
        let e = p.to_exact();
        assert_eq!(e.coeff(1).re, BigRational::new(1.into(), 4.into()));
        assert_eq!(e.to_f64(), p);
    }

    #[test]
    fn exact_eval_is_exact() {
        let e = ComplexPoly::from_real(&[0.0, 0.25, 1.0]).to_exact();
        let z = CRat::new(BigRational::new((-1).into(), 4.into()), BigRational::zero());
        assert!(e.eval(&z).is_zero());
    }
}
