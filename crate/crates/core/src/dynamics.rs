//! Forward iteration, basin rasters, component labels and hole counts.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::poly::{ComplexPoly, C64};
use crate::skew::{escape_radius_1d, SkewProduct};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    /// First entry time into the attraction bidisc.
    Basin(u32),
    /// First step past the escape radius.
    Escaped(u32),
    Undecided,
}

impl Classification {
    pub fn is_basin(self) -> bool {
        matches!(self, Classification::Basin(_))
    }

    pub fn cell(self) -> CellClass {
        match self {
            Classification::Basin(_) => CellClass::Basin,
            Classification::Escaped(_) => CellClass::Escaped,
            Classification::Undecided => CellClass::Undecided,
        }
    }

    pub fn time(self) -> Option<u32> {
        match self {
            Classification::Basin(n) | Classification::Escaped(n) => Some(n),
            Classification::Undecided => None,
        }
    }
}

/// Orbit classification of `(z, w)` against the bidisc of radius `eps`.
pub fn classify_point(f: &SkewProduct, z: C64, w: C64, eps: f64, max_iter: u32) -> Classification {
    let eps2 = eps * eps;
    let r2 = f.escape_radius() * f.escape_radius();
    let (mut z, mut w) = (z, w);
    for n in 0..=max_iter {
        let (nz, nw) = (z.norm_sqr(), w.norm_sqr());
        if nz < eps2 && nw < eps2 {
            return Classification::Basin(n);
        }
        if nz > r2 || nw > r2 || nz.is_nan() || nw.is_nan() {
            return Classification::Escaped(n);
        }
        if n == max_iter {
            break;
        }
        let (a, b) = f.eval(z, w);
        z = a;
        w = b;
    }
    Classification::Undecided
}

/// One-variable version for `P` with its own escape radius.
pub fn classify_point_1d(p: &ComplexPoly, escape_radius: f64, z: C64, eps: f64, max_iter: u32) -> Classification {
    let eps2 = eps * eps;
    let r2 = escape_radius * escape_radius;
    let mut z = z;
    for n in 0..=max_iter {
        let nz = z.norm_sqr();
        if nz < eps2 {
            return Classification::Basin(n);
        }
        if nz > r2 || nz.is_nan() {
            return Classification::Escaped(n);
        }
        if n == max_iter {
            break;
        }
        z = p.eval(&z);
    }
    Classification::Undecided
}

const CERT_SAMPLES: usize = 50;
const CERT_STEPS: usize = 5;

/// Accepts `eps` when boundary samples of the bidisc shrink in max-modulus
/// for five consecutive steps.
pub fn certify_attraction_radius(f: &SkewProduct, eps: f64) -> bool {
    (0..CERT_SAMPLES).all(|i| {
        let theta = std::f64::consts::TAU * i as f64 / CERT_SAMPLES as f64;
        let phi = 2.399_963 * i as f64; // golden angle spreads the partner angle
        let t = (i % 5) as f64 / 4.0;
        let on = C64::from_polar(eps, theta);
        let inner = C64::from_polar(eps * t, phi);
        let (mut z, mut w) = if i % 2 == 0 { (on, inner) } else { (inner, on) };
        let mut m = eps;
        for _ in 0..CERT_STEPS {
            let (a, b) = f.eval(z, w);
            z = a;
            w = b;
            let next = z.norm().max(w.norm());
            if !(next < m) {
                return false;
            }
            m = next;
        }
        true
    })
}

pub fn certify_attraction_radius_1d(p: &ComplexPoly, eps: f64) -> bool {
    (0..CERT_SAMPLES).all(|i| {
        let mut z = C64::from_polar(eps, std::f64::consts::TAU * i as f64 / CERT_SAMPLES as f64);
        let mut m = eps;
        for _ in 0..CERT_STEPS {
            z = p.eval(&z);
            if !(z.norm() < m) {
                return false;
            }
            m = z.norm();
        }
        true
    })
}

/// Halves `start` until certified; errors below `1e-6`.
pub fn find_attraction_radius(f: &SkewProduct, start: f64) -> Result<f64> {
    let mut eps = start;
    while eps > 1e-6 {
        if certify_attraction_radius(f, eps) {
            return Ok(eps);
        }
        eps *= 0.5;
    }
    Err(Error::HypothesisViolation("(0,0) is not a certifiably attracting fixed point".into()))
}

/// Axis-aligned raster box. Row 0 is the top (largest imaginary part).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: C64,
    pub half_width: f64,
    pub half_height: f64,
    pub resolution: usize,
}

impl GridSpec {
    pub fn square(center: C64, half: f64, resolution: usize) -> Self {
        Self { center, half_width: half, half_height: half, resolution }
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * self.half_height / self.resolution as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.dx().hypot(self.dy())
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.resolution + col
    }

    #[inline]
    pub fn col_row(&self, idx: usize) -> (usize, usize) {
        (idx % self.resolution, idx / self.resolution)
    }

    #[inline]
    pub fn point(&self, col: usize, row: usize) -> C64 {
        C64::new(
            self.center.re - self.half_width + (col as f64 + 0.5) * self.dx(),
            self.center.im + self.half_height - (row as f64 + 0.5) * self.dy(),
        )
    }

    pub fn cell_center(&self, idx: usize) -> C64 {
        let (c, r) = self.col_row(idx);
        self.point(c, r)
    }

    /// Cell containing `p`, if inside the box.
    pub fn cell_of(&self, p: C64) -> Option<usize> {
        let x = (p.re - (self.center.re - self.half_width)) / self.dx();
        let y = ((self.center.im + self.half_height) - p.im) / self.dy();
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let (c, r) = (x.floor() as usize, y.floor() as usize);
        (c < self.resolution && r < self.resolution).then(|| self.index(c, r))
    }

    /// Cell nearest to `p`, clamped into the box.
    pub fn nearest_cell(&self, p: C64) -> usize {
        let x = (p.re - (self.center.re - self.half_width)) / self.dx();
        let y = ((self.center.im + self.half_height) - p.im) / self.dy();
        let clamp = |v: f64| (v.floor().max(0.0) as usize).min(self.resolution - 1);
        self.index(clamp(x), clamp(y))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellClass {
    Escaped = 0,
    Basin = 1,
    Undecided = 2,
}

pub const NO_LABEL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub size: usize,
    /// Bounded 8-connected components of the complement.
    pub holes: u32,
}

impl ComponentInfo {
    pub fn simply_connected(&self) -> bool {
        self.holes == 0
    }
}

/// Rasterized membership mask with per-cell times and component labels.
#[derive(Clone, Debug)]
pub struct GridDomain {
    pub spec: GridSpec,
    pub cells: Vec<CellClass>,
    /// Entry time for Basin cells, escape time for Escaped, 0 otherwise.
    pub times: Vec<u32>,
    pub labels: Vec<u32>,
    pub components: Vec<ComponentInfo>,
}

impl GridDomain {
    /// Builds a domain from classifications and labels it.
    pub fn from_classes(spec: GridSpec, classes: &[Classification]) -> Self {
        assert_eq!(classes.len(), spec.len());
        let cells = classes.iter().map(|c| c.cell()).collect();
        let times = classes.iter().map(|c| c.time().unwrap_or(0)).collect();
        let mut grid = Self { spec, cells, times, labels: Vec::new(), components: Vec::new() };
        grid.relabel();
        grid
    }

    /// Builds from a boolean mask (true = Basin); times are zero.
    pub fn from_mask(spec: GridSpec, mask: &[bool]) -> Self {
        let classes: Vec<_> = mask
            .iter()
            .map(|&b| if b { Classification::Basin(0) } else { Classification::Escaped(0) })
            .collect();
        Self::from_classes(spec, &classes)
    }

    pub fn relabel(&mut self) {
        let (labels, n) = label_components(&self.spec, &self.cells);
        let holes = hole_counts(&self.spec, &labels, n);
        let mut sizes = vec![0usize; n];
        for &l in &labels {
            if l != NO_LABEL {
                sizes[l as usize] += 1;
            }
        }
        self.components = sizes
            .into_iter()
            .zip(holes)
            .map(|(size, holes)| ComponentInfo { size, holes })
            .collect();
        self.labels = labels;
    }

    pub fn is_basin(&self, idx: usize) -> bool {
        self.cells[idx] == CellClass::Basin
    }

    pub fn basin_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == CellClass::Basin).count()
    }

    pub fn undecided_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|&&c| c == CellClass::Undecided).count() as f64 / self.cells.len() as f64
    }

    /// Fails when more than 1% of the cells are undecided.
    pub fn ensure_decided(&self) -> Result<()> {
        let frac = self.undecided_fraction();
        if frac > 0.01 {
            return Err(Error::TooManyUndecided { fraction: 100.0 * frac });
        }
        Ok(())
    }

    pub fn label_at(&self, p: C64) -> Option<u32> {
        let idx = self.spec.cell_of(p)?;
        let l = self.labels[idx];
        (l != NO_LABEL).then_some(l)
    }

    /// Basin cells with a non-Basin 4-neighbour (or on the box edge).
    pub fn boundary_cells(&self) -> Vec<usize> {
        let n = self.spec.resolution;
        (0..self.cells.len())
            .filter(|&i| {
                if !self.is_basin(i) {
                    return false;
                }
                let (c, r) = self.spec.col_row(i);
                if c == 0 || r == 0 || c + 1 == n || r + 1 == n {
                    return true;
                }
                [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
                    .iter()
                    .any(|&(cc, rr)| !self.is_basin(self.spec.index(cc, rr)))
            })
            .collect()
    }

    /// Boolean mask of one component.
    pub fn component_mask(&self, label: u32) -> Vec<bool> {
        self.labels.iter().map(|&l| l == label).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SliceDomain {
    pub z: C64,
    pub grid: GridDomain,
}

fn classify_grid<F>(spec: &GridSpec, f: F) -> Vec<Classification>
where
    F: Fn(C64) -> Classification + Sync + Send,
{
    // horizontal bands, one row per task
    let rows = par::map_range(spec.resolution, |r| {
        (0..spec.resolution).map(|c| f(spec.point(c, r))).collect::<Vec<_>>()
    });
    rows.into_iter().flatten().collect()
}

/// Basin of the attracting fixed point 0 of `P` on a grid.
pub fn basin_grid_1d(p: &ComplexPoly, spec: GridSpec, eps: f64, max_iter: u32) -> Result<GridDomain> {
    if p.coeff(0).norm() != 0.0 {
        return Err(Error::HypothesisViolation("P(0) != 0".into()));
    }
    if p.coeff(1).norm() >= 1.0 {
        return Err(Error::HypothesisViolation("|P'(0)| >= 1: 0 is not attracting".into()));
    }
    let radius = escape_radius_1d(p)?;
    let classes = classify_grid(&spec, |z| classify_point_1d(p, radius, z, eps, max_iter));
    Ok(GridDomain::from_classes(spec, &classes))
}

/// Classification of `(z, w)` over a w-grid.
pub fn basin_grid_slice(f: &SkewProduct, z: C64, spec: GridSpec, eps: f64, max_iter: u32) -> SliceDomain {
    // Off U every cell escapes; skip the per-cell work when the base escapes.
    let base = classify_point_1d(&f.p, f.escape_radius(), z, eps, max_iter);
    let classes = match base {
        Classification::Escaped(n) => vec![Classification::Escaped(n); spec.len()],
        _ => classify_grid(&spec, |w| classify_point(f, z, w, eps, max_iter)),
    };
    SliceDomain { z, grid: GridDomain::from_classes(spec, &classes) }
}

/// 4-connected labels in scanline order, with the component of the cell
/// nearest the origin (when Basin) moved to id 0.
pub fn label_components(spec: &GridSpec, cells: &[CellClass]) -> (Vec<u32>, usize) {
    let n = spec.resolution;
    let mut labels = vec![NO_LABEL; cells.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if cells[start] != CellClass::Basin || labels[start] != NO_LABEL {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (c, r) = spec.col_row(i);
            let mut visit = |j: usize| {
                if cells[j] == CellClass::Basin && labels[j] == NO_LABEL {
                    labels[j] = next;
                    queue.push_back(j);
                }
            };
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < n {
                visit(i + 1);
            }
            if r > 0 {
                visit(i - n);
            }
            if r + 1 < n {
                visit(i + n);
            }
        }
        next += 1;
    }
    let origin = spec.nearest_cell(C64::new(0.0, 0.0));
    let swap = labels[origin];
    if swap != NO_LABEL && swap != 0 {
        for l in labels.iter_mut() {
            if *l == swap {
                *l = 0;
            } else if *l != NO_LABEL && *l < swap {
                *l += 1;
            }
        }
    }
    (labels, next as usize)
}

/// Hole count per component from its 4-connected Euler number.
///
/// Each 2x2 window (the grid padded by one background cell) is scored per
/// label present in it; `E4 = (Q1 - Q3 + 2 QD) / 4` and `holes = 1 - E4`.
pub fn hole_counts(spec: &GridSpec, labels: &[u32], n_components: usize) -> Vec<u32> {
    let n = spec.resolution as isize;
    let mut score = vec![0i64; n_components];
    let at = |c: isize, r: isize| -> u32 {
        if c < 0 || r < 0 || c >= n || r >= n {
            NO_LABEL
        } else {
            labels[(r * n + c) as usize]
        }
    };
    for r in -1..n {
        for c in -1..n {
            let quad = [at(c, r), at(c + 1, r), at(c, r + 1), at(c + 1, r + 1)];
            let mut seen = [NO_LABEL; 4];
            for (slot, &l) in quad.iter().enumerate() {
                if l == NO_LABEL || seen[..slot].contains(&l) {
                    continue;
                }
                seen[slot] = l;
                let bits: Vec<bool> = quad.iter().map(|&x| x == l).collect();
                let count = bits.iter().filter(|&&b| b).count();
                let s = &mut score[l as usize];
                match count {
                    1 => *s += 1,
                    3 => *s -= 1,
                    // diagonal pair: top-left with bottom-right or top-right with bottom-left
                    2 if bits[0] == bits[3] => *s += 2,
                    _ => {}
                }
            }
        }
    }
    score.into_iter().map(|s| (1 - s / 4).max(0) as u32).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub a: f64,
    pub b: f64,
    pub a_positive: bool,
    pub a_lt_one: bool,
    pub b_positive: bool,
    pub b_lt_one: bool,
    pub a_lt_b: bool,
    /// `0 < a < 1` and `0 < b < 1`.
    pub attracting: bool,
}

pub fn check_multipliers(f: &SkewProduct) -> MultiplierReport {
    let (a, b) = (f.a, f.b);
    let (a_positive, a_lt_one, b_positive, b_lt_one) = (a > 0.0, a < 1.0, b > 0.0, b < 1.0);
    MultiplierReport {
        a,
        b,
        a_positive,
        a_lt_one,
        b_positive,
        b_lt_one,
        a_lt_b: a < b,
        attracting: a_positive && a_lt_one && b_positive && b_lt_one,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn example_p() -> ComplexPoly {
        ComplexPoly::from_real(&[0.0, 0.25, 1.0])
    }

    #[test]
    fn fixed_point_is_basin_zero() {
        let f = SkewProduct::example(10.0);
        assert_eq!(classify_point(&f, c(0.0, 0.0), c(0.0, 0.0), 0.02, 50), Classification::Basin(0));
    }

    #[test]
    fn point_two_zero_escapes_quickly() {
        let f = SkewProduct::example(10.0);
        match classify_point(&f, c(2.0, 0.0), c(0.0, 0.0), 0.02, 50) {
            Classification::Escaped(n) => assert!(n <= 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn product_map_entry_time_bound() {
        let f = SkewProduct::product();
        let eps: f64 = 0.1;
        let bound = ((eps.ln() / 0.5f64.ln()).log2()).ceil() as u32 + 1;
        match classify_point(&f, c(0.5, 0.0), c(0.5, 0.0), eps, 50) {
            Classification::Basin(n) => assert!(n <= bound, "{n} > {bound}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn raising_the_cap_only_resolves_undecided() {
        let f = SkewProduct::example(10.0);
        for k in 0..200 {
            let z = C64::from_polar(0.6 + 0.004 * k as f64, 0.37 * k as f64);
            let w = C64::from_polar(0.5, 1.1 * k as f64);
            let lo = classify_point(&f, z, w, 0.02, 5);
            let hi = classify_point(&f, z, w, 0.02, 60);
            if lo != Classification::Undecided {
                assert_eq!(lo, hi);
            }
        }
    }

    #[test]
    fn attraction_radius_certification() {
        let f = SkewProduct::example(10.0);
        assert!(certify_attraction_radius(&f, 0.02));
        assert!(!certify_attraction_radius(&f, 0.5));
        let eps = find_attraction_radius(&f, 0.5).unwrap();
        assert!(eps <= 1.0 / 22.0);
        assert!(certify_attraction_radius(&SkewProduct::product(), 0.5));
    }

    #[test]
    fn example_basin_contains_disc_and_is_bounded() {
        let spec = GridSpec::square(c(0.0, 0.0), 2.0, 512);
        let g = basin_grid_1d(&example_p(), spec, 0.02, 200).unwrap();
        let diag = spec.cell_diagonal();
        for i in 0..spec.len() {
            let z = spec.cell_center(i);
            if z.norm() <= 0.7 {
                assert!(g.is_basin(i), "cell at {z} not in basin");
            }
            if g.is_basin(i) {
                assert!(z.norm() <= 1.25 + diag);
            }
        }
        assert_eq!(g.labels[spec.nearest_cell(c(0.0, 0.0))], 0);
    }

    #[test]
    fn unit_disc_basin_of_z_squared() {
        let spec = GridSpec::square(c(0.0, 0.0), 1.5, 256);
        let g = basin_grid_1d(&ComplexPoly::from_real(&[0.0, 0.0, 1.0]), spec, 0.1, 100).unwrap();
        let h = spec.cell_diagonal();
        for i in 0..spec.len() {
            let r = spec.cell_center(i).norm();
            if r < 1.0 - h {
                assert!(g.is_basin(i));
            } else if r > 1.0 + h {
                assert!(!g.is_basin(i));
            }
        }
    }

    #[test]
    fn repelling_fixed_point_is_rejected() {
        let spec = GridSpec::square(c(0.0, 0.0), 1.0, 64);
        let p = ComplexPoly::from_real(&[0.0, 2.0, 1.0]);
        assert!(basin_grid_1d(&p, spec, 0.1, 10).is_err());
    }

    #[test]
    fn slice_off_u_is_empty() {
        let f = SkewProduct::example(10.0);
        let spec = GridSpec::square(c(0.0, 0.0), 2.0, 64);
        let s = basin_grid_slice(&f, C64::from_polar(2.0, 0.3), spec, 0.02, 100);
        assert_eq!(s.grid.basin_count(), 0);
    }

    #[test]
    fn product_slice_is_unit_disc() {
        let f = SkewProduct::product();
        let spec = GridSpec::square(c(0.0, 0.0), 1.5, 128);
        let s = basin_grid_slice(&f, c(0.5, 0.0), spec, 0.1, 100);
        let h = spec.cell_diagonal();
        for i in 0..spec.len() {
            let r = spec.cell_center(i).norm();
            if r < 1.0 - h {
                assert!(s.grid.is_basin(i));
            } else if r > 1.0 + h {
                assert!(!s.grid.is_basin(i));
            }
        }
    }

    #[test]
    fn example_slice_at_zero_contains_small_disc() {
        let f = SkewProduct::example(10.0);
        let spec = GridSpec::square(c(0.0, 0.0), 1.5, 128);
        let s = basin_grid_slice(&f, c(0.0, 0.0), spec, 0.02, 200);
        for i in 0..spec.len() {
            if spec.cell_center(i).norm() <= 0.2 {
                assert!(s.grid.is_basin(i));
            }
        }
        // orbit oracle at a few sample w
        for w in [c(0.1, 0.1), c(-0.4, 0.0), c(0.0, 0.3)] {
            let mut x = w;
            for _ in 0..200 {
                x = x * x + x * 0.5;
            }
            let inside = x.norm() < 1e-6;
            let idx = spec.cell_of(w).unwrap();
            assert_eq!(inside, s.grid.is_basin(idx));
        }
    }

    fn disc_mask(spec: &GridSpec, centers: &[(C64, f64)]) -> Vec<bool> {
        (0..spec.len())
            .map(|i| {
                let p = spec.cell_center(i);
                centers.iter().any(|&(c, r)| (p - c).norm() < r)
            })
            .collect()
    }

    #[test]
    fn disc_is_one_component_without_holes() {
        let spec = GridSpec::square(c(0.0, 0.0), 1.2, 96);
        let g = GridDomain::from_mask(spec, &disc_mask(&spec, &[(c(0.0, 0.0), 1.0)]));
        assert_eq!(g.components.len(), 1);
        assert_eq!(g.components[0].holes, 0);
    }

    #[test]
    fn two_discs_have_stable_ids() {
        let spec = GridSpec::square(c(0.0, 0.0), 2.0, 80);
        let mask = disc_mask(&spec, &[(c(-1.0, 0.0), 0.6), (c(1.0, 0.5), 0.4)]);
        let a = GridDomain::from_mask(spec, &mask);
        let b = GridDomain::from_mask(spec, &mask);
        assert_eq!(a.components.len(), 2);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn origin_component_gets_id_zero() {
        let spec = GridSpec::square(c(0.0, 0.0), 2.0, 80);
        // the upper-right disc comes first in scanline order
        let mask = disc_mask(&spec, &[(c(1.2, 1.2), 0.5), (c(0.0, 0.0), 0.5)]);
        let g = GridDomain::from_mask(spec, &mask);
        assert_eq!(g.labels[spec.nearest_cell(c(0.0, 0.0))], 0);
        assert_eq!(g.labels[spec.nearest_cell(c(1.2, 1.2))], 1);
    }

    /// Bounded 8-connected complement components, by direct flood fill.
    fn holes_by_flood_fill(spec: &GridSpec, inside: &[bool]) -> u32 {
        let n = spec.resolution;
        let mut seen = vec![false; inside.len()];
        let mut holes = 0;
        for s in 0..inside.len() {
            if inside[s] || seen[s] {
                continue;
            }
            let mut touches = false;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(i) = stack.pop() {
                let (c, r) = spec.col_row(i);
                if c == 0 || r == 0 || c + 1 == n || r + 1 == n {
                    touches = true;
                }
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (cc, rr) = (c as i64 + dc, r as i64 + dr);
                        if cc < 0 || rr < 0 || cc >= n as i64 || rr >= n as i64 {
                            continue;
                        }
                        let j = spec.index(cc as usize, rr as usize);
                        if !inside[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            if !touches {
                holes += 1;
            }
        }
        holes
    }

    #[test]
    fn annulus_and_multi_hole_masks() {
        let spec = GridSpec::square(c(0.0, 0.0), 1.2, 120);
        let mask: Vec<bool> = (0..spec.len())
            .map(|i| {
                let p = spec.cell_center(i);
                p.norm() < 1.0 && p.norm() > 0.4
            })
            .collect();
        let g = GridDomain::from_mask(spec, &mask);
        assert_eq!(g.components[0].holes, 1);
        assert_eq!(holes_by_flood_fill(&spec, &mask), 1);

        let swiss: Vec<bool> = (0..spec.len())
            .map(|i| {
                let p = spec.cell_center(i);
                p.norm() < 1.0
                    && (p - c(0.4, 0.0)).norm() > 0.15
                    && (p - c(-0.4, 0.2)).norm() > 0.2
                    && (p - c(0.0, -0.5)).norm() > 0.1
            })
            .collect();
        let g = GridDomain::from_mask(spec, &swiss);
        assert_eq!(g.components[0].holes, 3);
        assert_eq!(holes_by_flood_fill(&spec, &swiss), 3);
    }

    #[test]
    fn example_slice_at_zero_components_match_flood_fill() {
        let f = SkewProduct::example(10.0);
        let spec = GridSpec::square(c(0.0, 0.0), 1.5, 256);
        let s = basin_grid_slice(&f, c(0.0, 0.0), spec, 0.02, 300);
        // independent oracle: flood fill from sampled interior points
        let mut seen_labels = std::collections::BTreeSet::new();
        for i in (0..spec.len()).step_by(97) {
            if !s.grid.is_basin(i) {
                continue;
            }
            let mut reach = vec![false; spec.len()];
            let mut stack = vec![i];
            reach[i] = true;
            while let Some(k) = stack.pop() {
                let (cc, rr) = spec.col_row(k);
                for (dc, dr) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (x, y) = (cc as i64 + dc, rr as i64 + dr);
                    if x < 0 || y < 0 || x >= spec.resolution as i64 || y >= spec.resolution as i64 {
                        continue;
                    }
                    let j = spec.index(x as usize, y as usize);
                    if s.grid.is_basin(j) && !reach[j] {
                        reach[j] = true;
                        stack.push(j);
                    }
                }
            }
            let l = s.grid.labels[i];
            for j in 0..spec.len() {
                assert_eq!(reach[j], s.grid.labels[j] == l);
            }
            seen_labels.insert(l);
        }
        assert!(!seen_labels.is_empty());
        for comp in &s.grid.components {
            assert_eq!(comp.holes, 0);
        }
    }

    #[test]
    fn multiplier_reports() {
        let r = check_multipliers(&SkewProduct::example(10.0));
        assert!((r.a - 0.25).abs() < 1e-15 && (r.b - 0.5).abs() < 1e-15);
        assert!(r.a_lt_b && r.attracting);
        let r = check_multipliers(&SkewProduct::product());
        assert!(!r.a_positive && !r.attracting);
        let r = check_multipliers(&SkewProduct::counterexample2(c(0.1, 0.0), c(0.005, 0.0), c(0.01, 0.0)));
        assert!((r.a - 0.1).abs() < 1e-15 && (r.b - 0.01).abs() < 1e-15);
        assert!(!r.a_lt_b);
    }
}
