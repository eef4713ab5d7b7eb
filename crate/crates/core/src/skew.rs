//! The skew product `F(z, w) = (P(z), Q(z, w))` and its escape certificate.

use num_complex::Complex;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{BivarPoly, ComplexPoly, ExactBivar, ExactPoly, C64};

/// Escape certificate data.
///
/// For `|z| > p_bound`, `|P(z)| > |z|` and the z-orbit escapes. For
/// `|z| <= p_bound` and `|w| > w_bound`, `|Q(z, w)| > |w|` and the w-orbit
/// escapes while z stays bounded. The escape radius is twice the larger of
/// the two, so any point with `max(|z|, |w|) > radius` escapes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeCertificate {
    pub p_bound: f64,
    pub w_bound: f64,
    pub radius: f64,
}

impl EscapeCertificate {
    /// Checks the certified inequality at one point outside the radius.
    pub fn holds_at(&self, f: &SkewProduct, z: C64, w: C64) -> bool {
        if z.norm() > self.p_bound {
            f.p.eval(&z).norm() > z.norm()
        } else if w.norm() > self.w_bound {
            f.eval_q(z, w).norm() > w.norm()
        } else {
            false
        }
    }
}

#[derive(Clone, Debug)]
pub struct SkewProduct {
    pub p: ComplexPoly,
    pub q: BivarPoly,
    /// `|P'(0)|`
    pub a: f64,
    /// `|Q_0'(0)|`
    pub b: f64,
    /// Degree of P.
    pub d: usize,
    pub escape: EscapeCertificate,
    /// Rows of Q by w-power, each a dense z-polynomial; used by `eval_q`.
    q_rows: Vec<Vec<C64>>,
    dq_rows: Vec<Vec<C64>>,
    dp: ComplexPoly,
}

impl SkewProduct {
    pub fn new(p: ComplexPoly, q: BivarPoly) -> Result<Self> {
        let escape = escape_certificate(&p, &q)?;
        let a = p.coeff(1).norm();
        let b = q.coeff(0, 1).norm();
        let d = p.degree();
        let dense = |q: &BivarPoly| -> Vec<Vec<C64>> {
            q.rows_by_w()
                .into_iter()
                .map(|row| row.coeffs().to_vec())
                .collect()
        };
        let q_rows = dense(&q);
        let dq_rows = dense(&q.partial_w());
        let dp = p.derivative();
        Ok(Self { p, q, a, b, d, escape, q_rows, dq_rows, dp })
    }

    pub fn escape_radius(&self) -> f64 {
        self.escape.radius
    }

    /// `F(z, w) = (z^2 + z/4, w^2 + w/2 + L z^2)`.
    pub fn example(l: f64) -> Self {
        let p = ComplexPoly::from_real(&[0.0, 0.25, 1.0]);
        let q = BivarPoly::from_terms([(0, 2, re(1.0)), (0, 1, re(0.5)), (2, 0, re(l))]);
        Self::new(p, q).expect("example map satisfies the degree hypotheses")
    }

    /// `(z^2, w^2)`.
    pub fn product() -> Self {
        let p = ComplexPoly::from_real(&[0.0, 0.0, 1.0]);
        let q = BivarPoly::from_terms([(0, 2, re(1.0))]);
        Self::new(p, q).expect("product map satisfies the degree hypotheses")
    }

    /// `(z^2, w^2 + a z)`.
    pub fn counterexample1(a: C64) -> Self {
        let p = ComplexPoly::from_real(&[0.0, 0.0, 1.0]);
        let q = BivarPoly::from_terms([(0, 2, re(1.0)), (1, 0, a)]);
        Self::new(p, q).expect("counterexample map satisfies the degree hypotheses")
    }

    /// `(a z + z^2, w^2 + c w + b z)`.
    pub fn counterexample2(a: C64, b: C64, c: C64) -> Self {
        let p = ComplexPoly::new(vec![re(0.0), a, re(1.0)]);
        let q = BivarPoly::from_terms([(0, 2, re(1.0)), (0, 1, c), (1, 0, b)]);
        Self::new(p, q).expect("counterexample map satisfies the degree hypotheses")
    }

    #[inline]
    pub fn eval_p(&self, z: C64) -> C64 {
        self.p.eval(&z)
    }

    #[inline]
    pub fn eval_dp(&self, z: C64) -> C64 {
        self.dp.eval(&z)
    }

    #[inline]
    pub fn eval_q(&self, z: C64, w: C64) -> C64 {
        horner2(&self.q_rows, z, w)
    }

    /// `∂Q/∂w (z, w)`.
    #[inline]
    pub fn eval_dq_dw(&self, z: C64, w: C64) -> C64 {
        horner2(&self.dq_rows, z, w)
    }

    #[inline]
    pub fn eval(&self, z: C64, w: C64) -> (C64, C64) {
        (self.p.eval(&z), self.eval_q(z, w))
    }

    /// `Q(z, ·)` as a polynomial in w.
    pub fn fiber(&self, z: C64) -> ComplexPoly {
        ComplexPoly::new(
            self.q_rows
                .iter()
                .map(|row| row.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c))
                .collect(),
        )
    }

    /// Degree of Q in w.
    pub fn w_degree(&self) -> usize {
        self.q_rows.len().saturating_sub(1)
    }

    /// `P'(0)` and `∂Q/∂w (0, 0)`, the linear multipliers at the fixed point.
    pub fn multipliers(&self) -> (C64, C64) {
        (self.p.coeff(1), self.q.coeff(0, 1))
    }

    /// Deterministic fingerprint of the coefficients.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: f64| {
            for byte in x.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for c in self.p.coeffs() {
            feed(c.re);
            feed(c.im);
        }
        feed(f64::NAN);
        for t in self.q.terms() {
            feed(t.j as f64);
            feed(t.k as f64);
            feed(t.c.re);
            feed(t.c.im);
        }
        format!("{h:016x}")
    }

    pub fn describe(&self) -> String {
        format!("P(z) = {}; Q(z,w) = {}", self.p, self.q)
    }
}

#[inline]
fn horner2(rows: &[Vec<C64>], z: C64, w: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for row in rows.iter().rev() {
        let mut r = C64::new(0.0, 0.0);
        for c in row.iter().rev() {
            r = r * z + c;
        }
        acc = acc * w + r;
    }
    acc
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Smallest `r >= 0` past which `lead r^n - Σ_{i<n} lower_i r^i - r > 0`.
///
/// Dividing by `r^n` gives a function increasing in r, so the crossing is
/// unique and bisection is safe.
fn majorant_root(lead: f64, lower: &[f64]) -> f64 {
    let n = lower.len();
    let h = |r: f64| -> f64 {
        let mut s = lead;
        for (i, &c) in lower.iter().enumerate() {
            s -= c * r.powi(i as i32 - n as i32);
        }
        s - r.powi(1 - n as i32)
    };
    let mut hi = 1.0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Escape radius for P alone (twice the tight majorant root).
pub fn escape_radius_1d(p: &ComplexPoly) -> Result<f64> {
    Ok(2.0 * p_bound(p)?)
}

fn p_bound(p: &ComplexPoly) -> Result<f64> {
    let d = p.degree();
    if d < 2 {
        return Err(Error::HypothesisViolation(format!("deg P = {d} < 2")));
    }
    let lower: Vec<f64> = p.coeffs()[..d].iter().map(|c| c.norm()).collect();
    Ok(majorant_root(p.leading().norm(), &lower))
}

pub fn escape_certificate(p: &ComplexPoly, q: &BivarPoly) -> Result<EscapeCertificate> {
    let p_bound = p_bound(p)?;
    let dw = q.q_j(0).degree();
    if dw < 2 {
        return Err(Error::HypothesisViolation(format!("deg Q_0 = {dw} < 2")));
    }
    let mut lower = vec![0.0; dw];
    for t in q.terms() {
        let k = t.k as usize;
        if t.j >= 1 && k >= dw {
            return Err(Error::HypothesisViolation(format!(
                "deg Q_{} >= deg Q_0 = {dw} (term z^{} w^{})",
                t.j, t.j, t.k
            )));
        }
        if (t.j, k) != (0, dw) {
            lower[k] += t.c.norm() * p_bound.powi(t.j as i32);
        }
    }
    let w_bound = majorant_root(q.coeff(0, dw as u32).norm(), &lower);
    Ok(EscapeCertificate { p_bound, w_bound, radius: 2.0 * p_bound.max(w_bound) })
}

/// Exact-coefficient counterpart of [`SkewProduct`], used for certificates.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSkewProduct {
    pub p: ExactPoly,
    pub q: ExactBivar,
}

impl ExactSkewProduct {
    pub fn from_float(f: &SkewProduct) -> Self {
        Self { p: f.p.to_exact(), q: f.q.to_exact() }
    }

    pub fn example(l: BigRational) -> Self {
        let r = |n: i64, d: i64| Complex::new(BigRational::new(n.into(), d.into()), BigRational::from_integer(0.into()));
        let zero = r(0, 1);
        let p = ExactPoly::new(vec![zero.clone(), r(1, 4), r(1, 1)]);
        let q = ExactBivar::from_terms([
            (0, 2, r(1, 1)),
            (0, 1, r(1, 2)),
            (2, 0, Complex::new(l, BigRational::from_integer(0.into()))),
        ]);
        Self { p, q }
    }

    pub fn eval(&self, z: &Complex<BigRational>, w: &Complex<BigRational>) -> (Complex<BigRational>, Complex<BigRational>) {
        (self.p.eval(z), self.q.eval(z, w))
    }

    pub fn to_f64(&self) -> Result<SkewProduct> {
        SkewProduct::new(self.p.to_f64(), self.q.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_map_values() {
        let f = SkewProduct::example(10.0);
        assert_eq!(f.eval(re(0.0), re(0.0)), (re(0.0), re(0.0)));
        assert_eq!(f.eval(re(0.0), re(-0.5)), (re(0.0), re(0.0)));
        assert_eq!(f.eval(re(1.0), re(0.0)), (re(1.25), re(10.0)));
    }

    #[test]
    fn p_bound_is_five_quarters_for_example() {
        let f = SkewProduct::example(10.0);
        assert!((f.escape.p_bound - 1.25).abs() < 1e-12);
        assert!(f.escape_radius() <= 10.0, "R = {}", f.escape_radius());
    }

    #[test]
    fn product_map_radius_is_one_plus_margin() {
        let f = SkewProduct::product();
        assert!((f.escape.p_bound - 1.0).abs() < 1e-12);
        assert!((f.escape.w_bound - 1.0).abs() < 1e-12);
        assert!((f.escape_radius() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn high_degree_z_coupling_is_rejected() {
        let p = ComplexPoly::from_real(&[0.0, 0.25, 1.0]);
        let q = BivarPoly::from_terms([(0, 2, re(1.0)), (1, 2, re(1.0))]);
        assert!(matches!(SkewProduct::new(p, q), Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn certificate_holds_on_sampled_shell() {
        for f in [SkewProduct::example(10.0), SkewProduct::product(), SkewProduct::counterexample1(re(0.3))] {
            let r = 1.01 * f.escape_radius();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..10_000 {
                let big = C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU));
                let small = C64::from_polar(rng.gen_range(0.0..r), rng.gen_range(0.0..std::f64::consts::TAU));
                let (z, w) = if rng.gen_bool(0.5) { (big, small) } else { (small, big) };
                assert!(f.escape.holds_at(&f, z, w), "certificate fails at ({z}, {w})");
            }
        }
    }

    #[test]
    fn fiber_and_partial_match_bivar() {
        let f = SkewProduct::example(10.0);
        let z = C64::new(0.3, -0.2);
        let w = C64::new(-0.7, 0.1);
        assert!((f.fiber(z).eval(&w) - f.q.eval(&z, &w)).norm() < 1e-14);
        assert!((f.eval_dq_dw(z, w) - f.q.partial_w().eval(&z, &w)).norm() < 1e-14);
    }
}
