//! Membership checks for the class of skew products with bounded distance to
//! the backward orbit, plus the exact certificate inequalities of the worked
//! example `(z^2 + z/4, w^2 + w/2 + L z^2)`.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{classify_point, classify_point_1d, Classification, GridDomain};
use crate::par;
use crate::poly::{exact_to_c64, norm_sqr, CRat, ComplexPoly, ExactPoly, C64};
use crate::roots::roots;
use crate::skew::{ExactSkewProduct, SkewProduct};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// PASS iff all PASS, FAIL if any FAIL.
    pub fn combine(items: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Pass;
        for v in items {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        out
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    /// Concrete violating point or coefficient; always set on FAIL.
    pub witness: Option<String>,
    pub detail: String,
}

impl Check {
    fn new(name: &str, verdict: Verdict, witness: Option<String>, detail: String) -> Self {
        Self { name: name.to_string(), verdict, witness, detail }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Exact,
    /// Margins at or below `tol` are inconclusive; equalities hold within `tol`.
    Float { tol: f64 },
}

pub const FLOAT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub p_checks: Vec<Check>,
    pub q_checks: Vec<Check>,
    pub condition_c: Vec<Check>,
    pub overall: Verdict,
}

impl MembershipReport {
    pub fn new(p_checks: Vec<Check>, q_checks: Vec<Check>, condition_c: Vec<Check>) -> Self {
        let overall = Verdict::combine(p_checks.iter().chain(&q_checks).chain(&condition_c).map(|c| c.verdict));
        Self { p_checks, q_checks, condition_c, overall }
    }

    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.p_checks.iter().chain(&self.q_checks).chain(&self.condition_c)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks().find(|c| c.verdict == Verdict::Fail)
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for (title, list) in [("P", &self.p_checks), ("Q", &self.q_checks), ("condition C", &self.condition_c)] {
            if list.is_empty() {
                continue;
            }
            out.push_str(&format!("[{title}]\n"));
            for c in list {
                out.push_str(&format!("  {:<13} {}\n", c.verdict.to_string(), c.name));
                if !c.detail.is_empty() {
                    out.push_str(&format!("                {}\n", c.detail));
                }
                if let Some(w) = &c.witness {
                    out.push_str(&format!("                witness: {w}\n"));
                }
            }
        }
        out.push_str(&format!("overall: {}\n", self.overall));
        out
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Verdict of `x < y` for nonnegative reals given by their squares.
fn strict_lt(x2: &BigRational, y2: &BigRational, mode: Mode) -> Verdict {
    let holds = x2 < y2;
    if let Mode::Float { tol } = mode {
        if x2 != y2 && (to_f64(x2).sqrt() - to_f64(y2).sqrt()).abs() <= tol {
            return Verdict::Inconclusive;
        }
    }
    if holds {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn is_zero(c: &CRat, mode: Mode) -> bool {
    match mode {
        Mode::Exact => c.is_zero(),
        Mode::Float { tol } => to_f64(&norm_sqr(c)).sqrt() <= tol,
    }
}

fn effective_degree(p: &ExactPoly, mode: Mode) -> Option<usize> {
    (0..=p.degree()).rev().find(|&k| !is_zero(&p.coeff(k), mode))
}

fn fmt_c(c: &CRat) -> String {
    if c.im.is_zero() {
        c.re.to_string()
    } else {
        format!("{} + {}i", c.re, c.im)
    }
}

/// The hypotheses on P and Q, one verdict per bullet.
pub fn check_hypotheses_exact(f: &ExactSkewProduct, mode: Mode) -> (Vec<Check>, Vec<Check>) {
    let p = &f.p;
    let q = &f.q;
    let one = rat(1, 1);
    let mut pc = Vec::new();

    let p0 = p.coeff(0);
    let p0_ok = is_zero(&p0, mode);
    pc.push(Check::new(
        "P(0) = 0",
        if p0_ok { Verdict::Pass } else { Verdict::Fail },
        (!p0_ok).then(|| format!("P(0) = {}", fmt_c(&p0))),
        String::new(),
    ));

    let a2 = norm_sqr(&p.coeff(1));
    let a_pos = strict_lt(&BigRational::zero(), &a2, mode);
    pc.push(Check::new(
        "0 < |P'(0)|",
        a_pos,
        (a_pos == Verdict::Fail).then(|| format!("P'(0) = {}", fmt_c(&p.coeff(1)))),
        format!("a = {:.6}", to_f64(&a2).sqrt()),
    ));
    let a_lt = strict_lt(&a2, &one, mode);
    pc.push(Check::new(
        "|P'(0)| < 1",
        a_lt,
        (a_lt == Verdict::Fail).then(|| format!("|P'(0)|^2 = {a2}")),
        String::new(),
    ));

    let d = effective_degree(p, mode).unwrap_or(0);
    pc.push(Check::new(
        "deg P >= 2",
        if d >= 2 { Verdict::Pass } else { Verdict::Fail },
        (d < 2).then(|| format!("deg P = {d}")),
        format!("d = {d}"),
    ));

    let mut qc = Vec::new();
    // j >= 1; the literal j > 1 would leave Q_1 unconstrained and Ω unbounded
    let mut bad = None;
    for j in 1..=q.z_degree() {
        let qj = q.q_j(j);
        if let Some(deg) = effective_degree(&qj, mode) {
            if !qj.is_zero() && deg + 1 > d.max(1) {
                bad = Some(format!("Q_{j} has degree {deg} (term z^{j} w^{deg} = {})", fmt_c(&qj.coeff(deg))));
                break;
            }
        }
    }
    qc.push(Check::new(
        "deg Q_j <= d - 1 for j >= 1",
        if bad.is_some() { Verdict::Fail } else { Verdict::Pass },
        bad,
        String::new(),
    ));

    let q0 = q.q_j(0);
    let d0 = effective_degree(&q0, mode).unwrap_or(0);
    qc.push(Check::new(
        "deg Q_0 = d",
        if d0 == d { Verdict::Pass } else { Verdict::Fail },
        (d0 != d).then(|| format!("deg Q_0 = {d0}, d = {d}")),
        String::new(),
    ));

    let c00 = q0.coeff(0);
    let ok = is_zero(&c00, mode);
    qc.push(Check::new(
        "Q_0(0) = 0",
        if ok { Verdict::Pass } else { Verdict::Fail },
        (!ok).then(|| format!("Q_0(0) = {}", fmt_c(&c00))),
        String::new(),
    ));

    let b2 = norm_sqr(&q0.coeff(1));
    let v = strict_lt(&BigRational::zero(), &b2, mode);
    qc.push(Check::new(
        "0 < |Q_0'(0)|",
        v,
        (v == Verdict::Fail).then(|| format!("Q_0'(0) = {}", fmt_c(&q0.coeff(1)))),
        format!("b = {:.6}", to_f64(&b2).sqrt()),
    ));
    let v = strict_lt(&b2, &one, mode);
    qc.push(Check::new("|Q_0'(0)| < 1", v, (v == Verdict::Fail).then(|| format!("|Q_0'(0)|^2 = {b2}")), String::new()));
    let v = strict_lt(&a2, &b2, mode);
    qc.push(Check::new(
        "a < b",
        v,
        (v == Verdict::Fail).then(|| {
            format!("a = |P'(0)| = {:.6} >= b = |Q_0'(0)| = {:.6}", to_f64(&a2).sqrt(), to_f64(&b2).sqrt())
        }),
        String::new(),
    ));

    let dz = q.coeff(1, 0);
    let ok = is_zero(&dz, mode);
    qc.push(Check::new(
        "dQ/dz(0, 0) = 0",
        if ok { Verdict::Pass } else { Verdict::Fail },
        (!ok).then(|| format!("dQ/dz(0, 0) = {}", fmt_c(&dz))),
        String::new(),
    ));
    (pc, qc)
}

/// Float-mode hypothesis checks on the map's coefficients.
pub fn check_hypotheses(f: &SkewProduct) -> (Vec<Check>, Vec<Check>) {
    check_hypotheses_exact(&ExactSkewProduct::from_float(f), Mode::Float { tol: FLOAT_TOL })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionCOptions {
    /// Cell size of the slice raster used as the closure proxy.
    pub slice_cell: f64,
    /// Closure dilation in slice cells.
    pub dilation: usize,
    /// Boundary samples; all boundary cells are used when there are fewer.
    pub samples: usize,
    pub eps: f64,
    pub max_iter: u32,
    pub seed: u64,
}

impl Default for ConditionCOptions {
    fn default() -> Self {
        Self { slice_cell: 10.0 / 512.0, dilation: 2, samples: 10_000, eps: 0.02, max_iter: 500, seed: 0 }
    }
}

/// A critical point `(z, w)` of `Q(z, .)` over a boundary cell of U.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSample {
    pub z: C64,
    pub w: C64,
    /// `|Q(z, w)|`
    pub first_step: f64,
    pub escape_time: Option<u32>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionC {
    pub items: Vec<Check>,
    pub item1_samples: Vec<CriticalSample>,
}

/// Boundary cells of U, subsampled with a fixed seed when above the budget.
pub fn boundary_sample(u: &GridDomain, budget: usize, seed: u64) -> Vec<usize> {
    let all = u.boundary_cells();
    if all.len() <= budget {
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, all.len(), budget).into_iter().map(|i| all[i]).collect();
    picked.sort_unstable();
    picked
}

fn item1_sample(f: &SkewProduct, z: C64, opts: &ConditionCOptions) -> Vec<CriticalSample> {
    let crit = match roots(&f.fiber(z).derivative(), 1e-12) {
        Ok(r) => r,
        Err(_) => {
            return vec![CriticalSample { z, w: C64::new(f64::NAN, 0.0), first_step: f64::NAN, escape_time: None, verdict: Verdict::Inconclusive }]
        }
    };
    crit.into_iter()
        .map(|w| {
            let class = classify_point(f, z, w, opts.eps, opts.max_iter);
            let verdict = match class {
                Classification::Basin(_) => Verdict::Fail,
                Classification::Undecided => Verdict::Inconclusive,
                Classification::Escaped(_) => {
                    let h = opts.slice_cell;
                    let r = opts.dilation as i64;
                    let near = (-r..=r).any(|i| {
                        (-r..=r).any(|j| {
                            let p = w + C64::new(i as f64 * h, j as f64 * h);
                            classify_point(f, z, p, opts.eps, opts.max_iter).is_basin()
                        })
                    });
                    if near {
                        Verdict::Fail
                    } else {
                        Verdict::Pass
                    }
                }
            };
            let escape_time = match class {
                Classification::Escaped(n) => Some(n),
                _ => None,
            };
            CriticalSample { z, w, first_step: f.eval_q(z, w).norm(), escape_time, verdict }
        })
        .collect()
}

/// Radius r with `D(0, r)` mapped into itself injectively by a polynomial
/// fixing 0 with multiplier of modulus in (0, 1).
fn linearization_radius(p: &ComplexPoly) -> f64 {
    let b = p.coeff(1).norm();
    let budget = 0.5 * b.min(1.0 - b);
    if budget <= 0.0 {
        return 0.0;
    }
    let g = |r: f64| -> f64 { p.coeffs().iter().skip(2).enumerate().map(|(k, c)| c.norm() * r.powi(k as i32)).sum() };
    let mut r = 1.0;
    while r * g(r) >= budget && r > 1e-300 {
        r *= 0.5;
    }
    r
}

/// Best rational approximation with bounded denominator.
pub fn rationalize(x: f64, max_den: i64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i128, 1i128, 1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = v - a;
        if frac.abs() < 1e-15 || (h1 as f64 / k1 as f64 - x).abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
        v = 1.0 / frac;
    }
    (k1 != 0).then(|| BigRational::new(BigInt::from(h1), BigInt::from(k1)))
}

fn rationalize_c(z: C64) -> Option<CRat> {
    Some(Complex::new(rationalize(z.re, 1_000_000)?, rationalize(z.im, 1_000_000)?))
}

const EXACT_STEPS: usize = 64;
const EXACT_BITS: u64 = 200_000;

/// Decides whether the forward orbit of the critical point `c` of `p` ever
/// lands exactly on 0. `p` fixes 0 with an attracting multiplier.
///
/// Once the orbit is inside the linearization disc with a nonzero value it
/// can never reach 0, because `p` is injective there and `p(0) = 0`.
fn orbit_avoids_zero(p: &ComplexPoly, exact: &ExactPoly, c: C64, max_iter: u32) -> (Verdict, Option<String>, String) {
    let r = linearization_radius(p);
    let margin = 1e-9;
    let mut x = c;
    let mut hit = None;
    for n in 1..=max_iter {
        x = p.eval(&x);
        if !x.is_finite() {
            return (Verdict::Inconclusive, None, format!("orbit of {c} is not finite at step {n}"));
        }
        if x.norm() < r {
            if x.norm() > margin {
                return (
                    Verdict::Pass,
                    None,
                    format!("orbit of {c} enters |w| < {r:.3e} at step {n} with |w| = {:.3e} != 0", x.norm()),
                );
            }
            hit = Some(n);
            break;
        }
    }
    let Some(n) = hit else {
        return (Verdict::Inconclusive, None, format!("orbit of {c} did not reach |w| < {r:.3e} in {max_iter} steps"));
    };
    // numerically at 0: settle it in exact arithmetic when c is rational
    let Some(cq) = rationalize_c(c).filter(|cq| exact.derivative().eval(cq).is_zero()) else {
        return (Verdict::Inconclusive, None, format!("orbit of {c} is within {margin:e} of 0 at step {n}; critical point not rational"));
    };
    let mut xq = cq.clone();
    let mut orbit = vec![fmt_c(&xq)];
    let r2 = rationalize(r * r, 1_000_000_000).unwrap_or_else(|| rat(0, 1));
    for m in 1..=EXACT_STEPS.min(n as usize + 8) {
        xq = exact.eval(&xq);
        orbit.push(fmt_c(&xq));
        if xq.is_zero() {
            return (
                Verdict::Fail,
                Some(format!("exact orbit {}", orbit.join(" -> "))),
                format!("critical point {} reaches 0 at step {m}", fmt_c(&cq)),
            );
        }
        if norm_sqr(&xq) < r2 && r2.is_positive() {
            return (Verdict::Pass, None, format!("exact orbit of {} is nonzero inside the linearization disc at step {m}", fmt_c(&cq)));
        }
        if xq.re.numer().bits() + xq.re.denom().bits() + xq.im.numer().bits() + xq.im.denom().bits() > EXACT_BITS {
            break;
        }
    }
    (Verdict::Inconclusive, None, format!("exact orbit of {} undecided", fmt_c(&cq)))
}

/// The four critical-orbit conditions.
pub fn check_condition_c(f: &SkewProduct, u_grid: &GridDomain, opts: &ConditionCOptions) -> ConditionC {
    let exact = ExactSkewProduct::from_float(f);
    // item 1
    let cells = boundary_sample(u_grid, opts.samples, opts.seed);
    let zs: Vec<C64> = cells.iter().map(|&i| u_grid.spec.cell_center(i)).collect();
    let samples: Vec<CriticalSample> = par::map_slice(&zs, |&z| item1_sample(f, z, opts)).into_iter().flatten().collect();
    let v1 = if zs.is_empty() { Verdict::Inconclusive } else { Verdict::combine(samples.iter().map(|s| s.verdict)) };
    let w1 = samples
        .iter()
        .find(|s| s.verdict == Verdict::Fail)
        .or_else(|| samples.iter().find(|s| s.verdict == Verdict::Inconclusive))
        .filter(|_| v1 != Verdict::Pass)
        .map(|s| format!("(z, w) = ({:.6}, {:.6}) with dQ/dw = 0 in or near the basin closure", s.z, s.w));
    let item1 = Check::new(
        "no critical point of Q(z, .) in the basin closure over the boundary of U",
        v1,
        w1,
        format!(
            "{} boundary cells, {} critical points, dilation {} cells of {:.3e}",
            zs.len(),
            samples.len(),
            opts.dilation,
            opts.slice_cell
        ),
    );

    // items 2 and 3: critical points of Q_0
    let q0 = f.q.q_j(0);
    let q0_exact = exact.q.q_j(0);
    let crit_q = roots(&q0.derivative(), 1e-12).unwrap_or_default();
    let mut v2 = Vec::new();
    let mut v3 = Vec::new();
    let mut notes2 = Vec::new();
    let mut notes3 = Vec::new();
    let mut wit3 = None;
    for &w in &crit_q {
        match classify_point(f, C64::new(0.0, 0.0), w, opts.eps, opts.max_iter) {
            Classification::Escaped(n) => {
                v2.push(Verdict::Pass);
                notes2.push(format!("w = {w:.6} escapes at step {n}"));
            }
            Classification::Basin(_) => {
                let (v, wit, note) = orbit_avoids_zero(&q0, &q0_exact, w, opts.max_iter);
                v3.push(v);
                notes3.push(note);
                if v == Verdict::Fail && wit3.is_none() {
                    wit3 = wit;
                }
            }
            Classification::Undecided => {
                v2.push(Verdict::Inconclusive);
                v3.push(Verdict::Inconclusive);
                notes2.push(format!("w = {w:.6} undecided after {} steps", opts.max_iter));
            }
        }
    }
    let item2 = Check::new(
        "critical points of Q_0 outside the slice over 0 escape",
        Verdict::combine(v2),
        None,
        if notes2.is_empty() { "none outside".into() } else { notes2.join("; ") },
    );
    let item3 = Check::new(
        "critical points of Q_0 in the slice over 0 never land on (0, 0)",
        Verdict::combine(v3),
        wit3,
        if notes3.is_empty() { "none inside".into() } else { notes3.join("; ") },
    );

    // item 4: critical points of P in U
    let crit_p = roots(&f.p.derivative(), 1e-12).unwrap_or_default();
    let mut v4 = Vec::new();
    let mut notes4 = Vec::new();
    let mut wit4 = None;
    for &z in &crit_p {
        match classify_point_1d(&f.p, f.escape.radius, z, opts.eps, opts.max_iter) {
            Classification::Basin(_) => {
                let (v, wit, note) = orbit_avoids_zero(&f.p, &exact.p, z, opts.max_iter);
                v4.push(v);
                notes4.push(note);
                if v == Verdict::Fail && wit4.is_none() {
                    wit4 = wit;
                }
            }
            Classification::Escaped(_) => notes4.push(format!("z = {z:.6} not in U")),
            Classification::Undecided => {
                v4.push(Verdict::Inconclusive);
                notes4.push(format!("z = {z:.6} undecided"));
            }
        }
    }
    let item4 = Check::new(
        "critical points of P in U never land on 0",
        Verdict::combine(v4),
        wit4,
        notes4.join("; "),
    );
    ConditionC { items: vec![item1, item2, item3, item4], item1_samples: samples }
}

/// Full membership report.
pub fn membership(f: &SkewProduct, u_grid: &GridDomain, opts: &ConditionCOptions) -> (MembershipReport, ConditionC) {
    let (p, q) = check_hypotheses(f);
    let c = check_condition_c(f, u_grid, opts);
    (MembershipReport::new(p, q, c.items.clone()), c)
}

/// Exact values of the two certificate inequalities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleBounds {
    pub l: String,
    pub b: String,
    /// `B - 1/2 - 25L/(16B)`, required `>= 1`.
    pub star: String,
    pub star_value: f64,
    pub star_verdict: Verdict,
    /// `9L/16 - 1/16`, required `> B`. This is `min |Q(z, -1/4)|` over `|z| >= 3/4`.
    pub starstar: String,
    pub starstar_value: f64,
    pub starstar_verdict: Verdict,
}

impl ExampleBounds {
    pub fn overall(&self) -> Verdict {
        Verdict::combine([self.star_verdict, self.starstar_verdict])
    }
}

pub fn verify_example_bounds(l: &BigRational, b: &BigRational) -> crate::Result<ExampleBounds> {
    if !l.is_positive() || !b.is_positive() {
        return Err(crate::Error::InvalidInput("L and B must be positive".into()));
    }
    let star = b - rat(1, 2) - rat(25, 16) * l / b;
    let starstar = rat(9, 16) * l - rat(1, 16);
    let verdict = |ok: bool| if ok { Verdict::Pass } else { Verdict::Fail };
    Ok(ExampleBounds {
        l: l.to_string(),
        b: b.to_string(),
        star_value: to_f64(&star),
        star_verdict: verdict(star >= rat(1, 1)),
        star: star.to_string(),
        starstar_value: to_f64(&starstar),
        starstar_verdict: verdict(&starstar > b),
        starstar: starstar.to_string(),
    })
}

/// Exact `|Q(z, -1/4)|^2` for the worked example at a rational z.
pub fn example_critical_value_sq(l: &BigRational, z: &CRat) -> BigRational {
    let f = ExactSkewProduct::example(l.clone());
    let w = Complex::new(rat(-1, 4), rat(0, 1));
    norm_sqr(&f.q.eval(z, &w))
}

/// Float view of an exact complex number.
pub fn to_c64(z: &CRat) -> C64 {
    exact_to_c64(z)
}
