//! Strong stable curve of the fixed point as a truncated power series `w = f0(z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::C64;
use crate::skew::SkewProduct;

/// Residual target used to choose the validity radius.
pub const SERIES_RESIDUAL_TOL: f64 = 1e-8;
const RESONANCE_TOL: f64 = 1e-12;
const RADIUS_SAMPLES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableSeries {
    /// `coeffs[k]` multiplies `z^k`; entries 0 and 1 are kept for clarity.
    pub coeffs: Vec<C64>,
    pub order: usize,
    pub epsilon: f64,
    /// `Q(z, 0) = 0` identically, so `w = 0` is invariant over all of `U`.
    pub exact_zero: bool,
}

impl StableSeries {
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `|Q(z, f(z)) - f(P(z))|`.
    pub fn residual(&self, f: &SkewProduct, z: C64) -> f64 {
        (f.eval_q(z, self.eval(z)) - self.eval(f.eval_p(z))).norm()
    }

    pub fn max_residual_on_circle(&self, f: &SkewProduct, radius: f64, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let z = C64::from_polar(radius, std::f64::consts::TAU * i as f64 / samples as f64);
                self.residual(f, z)
            })
            .fold(0.0, f64::max)
    }
}

fn mul_trunc(a: &[C64], b: &[C64], m: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m + 1];
    for (i, x) in a.iter().enumerate().take(m + 1) {
        if x.norm_sqr() == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(m + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn powers(base: &[C64], max_power: usize, m: usize) -> Vec<Vec<C64>> {
    let mut one = vec![C64::new(0.0, 0.0); m + 1];
    one[0] = C64::new(1.0, 0.0);
    let mut out = vec![one];
    for k in 1..=max_power {
        let next = mul_trunc(&out[k - 1], base, m);
        out.push(next);
    }
    out
}

/// Series of `Q(z, f(z)) - f(P(z))` truncated at order `m`.
fn invariance_defect(f: &SkewProduct, coeffs: &[C64], m: usize) -> Vec<C64> {
    let w_deg = f.q.w_degree() as usize;
    let f_pows = powers(coeffs, w_deg, m);
    let mut out = vec![C64::new(0.0, 0.0); m + 1];
    for t in f.q.terms() {
        let (j, k) = (t.j as usize, t.k as usize);
        if j > m {
            continue;
        }
        for (idx, c) in f_pows[k].iter().enumerate().take(m + 1 - j) {
            out[idx + j] += t.c * c;
        }
    }
    let mut p_series = vec![C64::new(0.0, 0.0); m + 1];
    for (k, c) in f.p.coeffs().iter().enumerate().take(m + 1) {
        p_series[k] = *c;
    }
    let p_pows = powers(&p_series, m, m);
    for (k, c) in coeffs.iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        for (idx, x) in p_pows[k].iter().enumerate() {
            out[idx] -= c * x;
        }
    }
    out
}

/// Solves `Q(z, f(z)) = f(P(z))` order by order up to `z^order`.
///
/// Each `c_k` comes from a linear equation with coefficient `b_lin - a_lin^k`,
/// `a_lin = P'(0)` and `b_lin = dQ/dw(0,0)`.
pub fn stable_manifold_series(f: &SkewProduct, order: usize) -> Result<StableSeries> {
    if order < 2 {
        return Err(Error::InvalidInput("series order must be at least 2".into()));
    }
    let exact_zero = f.q.terms().all(|t| t.k >= 1);
    if exact_zero {
        return Ok(StableSeries {
            coeffs: vec![C64::new(0.0, 0.0); order + 1],
            order,
            epsilon: f.escape.p_bound,
            exact_zero: true,
        });
    }
    let a_lin = f.p.coeff(1);
    let b_lin = f.q.coeff(0, 1);
    let mut coeffs = vec![C64::new(0.0, 0.0); order + 1];
    for k in 1..=order {
        let defect = invariance_defect(f, &coeffs, order);
        let gap = b_lin - a_lin.powu(k as u32);
        let rhs = defect[k];
        if gap.norm() < RESONANCE_TOL {
            if rhs.norm() < RESONANCE_TOL {
                continue;
            }
            return Err(Error::ResonanceDegeneracy { order: k, gap: gap.norm() });
        }
        coeffs[k] = -rhs / gap;
    }
    let mut series = StableSeries { coeffs, order, epsilon: 0.0, exact_zero: false };
    series.epsilon = validity_radius(f, &series)?;
    Ok(series)
}

/// Largest radius (shrinking from 0.5 by 10% steps) where the residual on the
/// circle is below tolerance.
fn validity_radius(f: &SkewProduct, series: &StableSeries) -> Result<f64> {
    let mut eps = 0.5;
    while eps > 1e-6 {
        if series.max_residual_on_circle(f, eps, RADIUS_SAMPLES) <= SERIES_RESIDUAL_TOL {
            return Ok(eps);
        }
        eps *= 0.9;
    }
    Err(Error::NonConvergence { iterations: 0, residual: series.max_residual_on_circle(f, eps, RADIUS_SAMPLES) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{BivarPoly, ComplexPoly};

    #[test]
    fn example_c2_matches_hand_computation() {
        let s = stable_manifold_series(&SkewProduct::example(10.0), 12).unwrap();
        assert!((s.coeffs[2] - C64::new(-160.0 / 7.0, 0.0)).norm() < 1e-9);
        assert_eq!(s.coeffs[0], C64::new(0.0, 0.0));
        assert_eq!(s.coeffs[1], C64::new(0.0, 0.0));
    }

    #[test]
    fn invariance_residual_inside_half_radius() {
        let f = SkewProduct::example(10.0);
        let s = stable_manifold_series(&f, 12).unwrap();
        for r in [s.epsilon / 2.0, s.epsilon / 4.0] {
            assert!(s.max_residual_on_circle(&f, r, 128) < 1e-8);
        }
        assert!(s.residual(&f, C64::new(0.0, 0.0)) == 0.0);
    }

    #[test]
    fn residual_scales_with_truncation_order() {
        let f = SkewProduct::example(10.0);
        let m = 8;
        let s = stable_manifold_series(&f, m).unwrap();
        // stay well above roundoff: compare radii where the residual is large
        let r = 4.0 * s.epsilon;
        let (hi, lo) = (
            s.max_residual_on_circle(&f, r, 64),
            s.max_residual_on_circle(&f, r / 2.0, 64),
        );
        assert!(hi / lo >= 2f64.powi(m as i32), "ratio {}", hi / lo);
    }

    #[test]
    fn z_independent_q_gives_zero_graph() {
        let f = SkewProduct::new(
            ComplexPoly::from_real(&[0.0, 0.25, 1.0]),
            BivarPoly::from_terms([(0, 2, C64::new(1.0, 0.0)), (0, 1, C64::new(0.5, 0.0))]),
        )
        .unwrap();
        let s = stable_manifold_series(&f, 10).unwrap();
        assert!(s.exact_zero);
        assert!(s.coeffs.iter().all(|c| c.norm() == 0.0));
        let s = stable_manifold_series(&SkewProduct::product(), 10).unwrap();
        assert!(s.exact_zero);
    }

    #[test]
    fn resonance_is_reported() {
        // b = a^2 with a forcing z^2 term in Q(z, 0)
        let f = SkewProduct::new(
            ComplexPoly::from_real(&[0.0, 0.5, 1.0]),
            BivarPoly::from_terms([
                (0, 2, C64::new(1.0, 0.0)),
                (0, 1, C64::new(0.25, 0.0)),
                (2, 0, C64::new(1.0, 0.0)),
            ]),
        )
        .unwrap();
        match stable_manifold_series(&f, 6) {
            Err(Error::ResonanceDegeneracy { order: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
