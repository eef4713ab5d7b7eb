//! Simultaneous root finding (Aberth–Ehrlich) with a verified residual.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::poly::{ComplexPoly, C64};

pub const MAX_ITERATIONS: usize = 500;

/// A root together with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootCluster {
    pub value: C64,
    pub multiplicity: usize,
}

/// All `degree` roots of `p`, repeated according to multiplicity.
///
/// Every returned root satisfies `|p(r)| <= tol * (1 + Σ|c_k|)`. Roots closer
/// than `100 * tol` are merged and reported at their mean.
pub fn roots(p: &ComplexPoly, tol: f64) -> Result<Vec<C64>> {
    Ok(roots_with_multiplicity(p, tol)?
        .into_iter()
        .flat_map(|c| std::iter::repeat(c.value).take(c.multiplicity))
        .collect())
}

pub fn roots_with_multiplicity(p: &ComplexPoly, tol: f64) -> Result<Vec<RootCluster>> {
    let raw = raw_roots(p, tol)?;
    Ok(merge_close(raw, 100.0 * tol))
}

/// Roots before clustering; exactly `degree` values.
pub fn raw_roots(p: &ComplexPoly, tol: f64) -> Result<Vec<C64>> {
    let n = p.degree();
    if p.is_zero() || n == 0 {
        return Err(Error::InvalidInput("root finding needs degree >= 1".into()));
    }
    let scale = 1.0 + p.coeff_norm();
    let target = tol * scale;
    let roots = match n {
        1 => vec![-p.coeff(0) / p.coeff(1)],
        2 => quadratic(p),
        _ => aberth(p, target)?,
    };
    let roots: Vec<C64> = roots.into_iter().map(|r| polish(p, r)).collect();
    let worst = roots.iter().map(|r| p.eval(r).norm()).fold(0.0, f64::max);
    if !(worst <= target) {
        // Closed forms can lose digits to cancellation; fall back to iteration.
        if n <= 2 {
            let roots = aberth(p, target)?;
            let worst = roots.iter().map(|r| p.eval(r).norm()).fold(0.0, f64::max);
            if worst <= target {
                return Ok(roots);
            }
            return Err(Error::NonConvergence { iterations: MAX_ITERATIONS, residual: worst });
        }
        return Err(Error::NonConvergence { iterations: MAX_ITERATIONS, residual: worst });
    }
    Ok(roots)
}

fn quadratic(p: &ComplexPoly) -> Vec<C64> {
    let (c, b, a) = (p.coeff(0), p.coeff(1), p.coeff(2));
    let disc = (b * b - a * c * 4.0).sqrt();
    // Pick the sign that avoids cancellation.
    let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) * 0.5 } else { -(b - disc) * 0.5 };
    if q.norm() == 0.0 {
        return vec![C64::new(0.0, 0.0); 2];
    }
    vec![q / a, c / q]
}

fn polish(p: &ComplexPoly, r: C64) -> C64 {
    let dp = p.derivative();
    let mut x = r;
    for _ in 0..3 {
        let fx = p.eval(&x);
        let dfx = dp.eval(&x);
        if dfx.norm() == 0.0 {
            break;
        }
        let next = x - fx / dfx;
        if !next.re.is_finite() || !next.im.is_finite() || p.eval(&next).norm() >= fx.norm() {
            break;
        }
        x = next;
    }
    x
}

fn aberth(p: &ComplexPoly, target: f64) -> Result<Vec<C64>> {
    let n = p.degree();
    let dp = p.derivative();
    let lead = p.leading().norm();
    let cauchy = 1.0
        + p.coeffs()[..n]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(0.5 * cauchy, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let fz = p.eval(&z[i]);
            if fz.norm() == 0.0 {
                continue;
            }
            let ratio = fz / dp.eval(&z[i]);
            let repulsion: C64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d.norm() == 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = C64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() == 0.0 || !ratio.re.is_finite() {
                // stuck on a critical point; nudge off it
                C64::new(1e-3 * cauchy, 1e-3 * cauchy)
            } else {
                ratio / denom
            };
            z[i] -= step;
            max_step = max_step.max(step.norm());
        }
        worst = z.iter().map(|r| p.eval(r).norm()).fold(0.0, f64::max);
        if worst <= target && max_step <= 1e-14 * cauchy {
            return Ok(z);
        }
        if worst <= target * 1e-3 {
            return Ok(z);
        }
    }
    if worst <= target {
        return Ok(z);
    }
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS, residual: worst })
}

fn merge_close(mut roots: Vec<C64>, merge_tol: f64) -> Vec<RootCluster> {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for r in roots {
        if let Some(cl) = clusters
            .iter_mut()
            .find(|(v, m)| (*v / *m as f64 - r).norm() < merge_tol)
        {
            cl.0 += r;
            cl.1 += 1;
        } else {
            clusters.push((r, 1));
        }
    }
    clusters
        .into_iter()
        .map(|(sum, m)| RootCluster { value: sum / m as f64, multiplicity: m })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    fn assert_close(got: Vec<C64>, want: Vec<C64>, tol: f64) {
        let got = sorted(got);
        let want = sorted(want);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < tol, "{g} vs {w}");
        }
    }

    #[test]
    fn factored_quadratics() {
        let tol = 1e-12;
        let p = ComplexPoly::from_real(&[0.0, 0.25, 1.0]);
        assert_close(roots(&p, tol).unwrap(), vec![C64::new(0.0, 0.0), C64::new(-0.25, 0.0)], 1e-12);
        let q = ComplexPoly::from_real(&[0.0, 0.5, 1.0]);
        assert_close(roots(&q, tol).unwrap(), vec![C64::new(0.0, 0.0), C64::new(-0.5, 0.0)], 1e-12);
        // discriminant 1/4 - 5/2 = -9/4
        let r = ComplexPoly::from_real(&[0.625, 0.5, 1.0]);
        assert_close(
            roots(&r, tol).unwrap(),
            vec![C64::new(-0.25, 0.75), C64::new(-0.25, -0.75)],
            1e-12,
        );
    }

    #[test]
    fn cubic_via_iteration() {
        let want = vec![C64::new(1.0, 0.0), C64::new(-0.5, 0.3), C64::new(0.2, -2.0)];
        let p = ComplexPoly::from_roots(&want);
        assert_close(roots(&p, 1e-12).unwrap(), want, 1e-9);
    }

    #[test]
    fn double_root_is_merged_with_multiplicity() {
        let p = ComplexPoly::from_roots(&[C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(-1.0, 0.0)]);
        let clusters = roots_with_multiplicity(&p, 1e-6).unwrap();
        let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
        assert_eq!(total, 3);
        assert!(clusters.iter().any(|c| c.multiplicity == 2 && (c.value - 0.5).norm() < 1e-6));
    }

    #[test]
    fn constant_is_rejected() {
        assert!(roots(&ComplexPoly::from_real(&[2.0]), 1e-12).is_err());
    }

    fn root_strategy() -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..=6)
            .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
    }

    proptest! {
        #[test]
        fn expand_then_solve_recovers_roots(want in root_strategy()) {
            // keep the roots separated so the Hausdorff check is well posed
            let min_gap = want.iter().enumerate()
                .flat_map(|(i, a)| want[i + 1..].iter().map(move |b| (a - b).norm()))
                .fold(f64::INFINITY, f64::min);
            prop_assume!(min_gap > 0.3);
            let tol = 1e-10;
            let p = ComplexPoly::from_roots(&want);
            let got = roots(&p, tol).unwrap();
            prop_assert_eq!(got.len(), want.len());
            let scale = 1.0 + p.coeff_norm();
            for r in &got {
                prop_assert!(p.eval(r).norm() <= tol * scale);
            }
            let hausdorff = |a: &[C64], b: &[C64]| a.iter()
                .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            let h = hausdorff(&got, &want).max(hausdorff(&want, &got));
            prop_assert!(h <= 10.0 * tol, "hausdorff {}", h);
        }
    }
}
