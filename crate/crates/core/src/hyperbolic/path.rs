use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{disc_distance_radius, DensityField, DistanceEstimate, Method};
use crate::dynamics::GridSpec;
use crate::error::{Error, Result};
use crate::poly::C64;
use crate::skew::SkewProduct;

/// Worst ratio of an 8-neighbour path to the straight segment, `1/cos(π/8)`.
/// Lower estimates are divided by it so raster paths never overshoot the
/// continuous infimum on that account.
pub const ANISOTROPY: f64 = 1.082_392_200_292_393_9;

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    cell: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source shortest paths with per-cell source tracking.
#[derive(Clone, Debug)]
pub struct PathResult {
    pub dist: Vec<f64>,
    /// Index into the source list of the cheapest source; `u32::MAX` if unreached.
    pub source: Vec<u32>,
}

/// 8-neighbour Dijkstra. Edge weight is the mean endpoint density times the
/// Euclidean step; a diagonal step needs one of its two orthogonal
/// intermediates inside. Stops early once `target` is settled.
pub fn dijkstra(
    spec: &GridSpec,
    inside: &[bool],
    density: &[f64],
    sources: &[(usize, f64)],
    target: Option<usize>,
) -> PathResult {
    let n = spec.resolution;
    let (dx, dy) = (spec.dx(), spec.dy());
    let diag = dx.hypot(dy);
    let mut dist = vec![f64::INFINITY; inside.len()];
    let mut source = vec![u32::MAX; inside.len()];
    let mut heap = BinaryHeap::new();
    for (k, &(cell, init)) in sources.iter().enumerate() {
        if inside[cell] && init < dist[cell] {
            dist[cell] = init;
            source[cell] = k as u32;
            heap.push(Entry { cost: init, cell });
        }
    }
    const STEPS: [(i64, i64); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)];
    while let Some(Entry { cost, cell }) = heap.pop() {
        if cost > dist[cell] {
            continue;
        }
        if Some(cell) == target {
            break;
        }
        let (c, r) = spec.col_row(cell);
        for (dc, dr) in STEPS {
            let (cc, rr) = (c as i64 + dc, r as i64 + dr);
            if cc < 0 || rr < 0 || cc >= n as i64 || rr >= n as i64 {
                continue;
            }
            let j = spec.index(cc as usize, rr as usize);
            if !inside[j] {
                continue;
            }
            let len = if dc != 0 && dr != 0 {
                let a = spec.index(cc as usize, r);
                let b = spec.index(c, rr as usize);
                if !inside[a] && !inside[b] {
                    continue;
                }
                diag
            } else if dc != 0 {
                dx
            } else {
                dy
            };
            let next = cost + 0.5 * (density[cell] + density[j]) * len;
            if next < dist[j] {
                dist[j] = next;
                source[j] = source[cell];
                heap.push(Entry { cost: next, cell: j });
            }
        }
    }
    PathResult { dist, source }
}

fn snap(field: &DensityField, p: C64) -> Result<(usize, f64)> {
    let cell = field
        .spec
        .cell_of(p)
        .filter(|&c| field.inside[c])
        .ok_or_else(|| Error::OutOfDomain(format!("{p} is not in the raster domain")))?;
    Ok((cell, (p - field.spec.cell_center(cell)).norm()))
}

/// Upper and lower raster estimates of the distance between `p` and `q`.
///
/// Both points snap to their cells; the snap offsets are charged at the cell
/// density (added for the upper bound, subtracted for the lower).
pub fn slice_distance(field: &DensityField, p: C64, q: C64) -> Result<DistanceEstimate> {
    let res = field.spec.resolution;
    if p == q {
        snap(field, p)?;
        return Ok(DistanceEstimate::zero(Method::SliceGraph, res));
    }
    let (pc, po) = snap(field, p)?;
    let (qc, qo) = snap(field, q)?;
    let up = dijkstra(&field.spec, &field.inside, &field.upper, &[(pc, 0.0)], Some(qc));
    let raw_up = up.dist[qc];
    if !raw_up.is_finite() {
        return Err(Error::Disconnected);
    }
    let upper = raw_up + po * field.upper[pc] + qo * field.upper[qc];
    let lower = if field.simply_connected {
        let lo = dijkstra(&field.spec, &field.inside, &field.lower, &[(pc, 0.0)], Some(qc));
        (lo.dist[qc] / ANISOTROPY - po * field.lower[pc] - qo * field.lower[qc]).max(0.0)
    } else {
        0.0
    };
    Ok(DistanceEstimate {
        lower,
        upper,
        method: Method::SliceGraph,
        resolution: res,
        note: format!(
            "8-neighbour raster paths; lower divided by {ANISOTROPY:.4} for anisotropy; lower density 1/({}δ)",
            field.lower_factor
        ),
    })
}

/// Lower bound on `d_Ω(p, q)` through the projection `(z, w) ↦ z`.
///
/// Takes the larger of the raster lower estimate in the U component (when
/// both base points lie in `u_field`) and the exact distance in the disc
/// `D(0, ρ)` that contains U.
pub fn projection_lower(f: &SkewProduct, p: (C64, C64), q: (C64, C64), u_field: Option<&DensityField>) -> Result<DistanceEstimate> {
    let (z, z2) = (p.0, q.0);
    let res = u_field.map_or(0, |u| u.spec.resolution);
    if z == z2 {
        return Ok(DistanceEstimate { upper: f64::INFINITY, ..DistanceEstimate::zero(Method::Projection, res) });
    }
    let rho = f.escape.p_bound * (1.0 + 1e-12);
    if !(z.norm() < rho && z2.norm() < rho) {
        return Err(Error::OutOfDomain(format!("{z} or {z2} lies outside the disc containing U")));
    }
    let closed = disc_distance_radius(z, z2, rho);
    let mut lower = closed;
    let mut note = format!("disc D(0, {rho:.6}) bound {closed:.6}");
    if let Some(field) = u_field {
        if snap(field, z).is_ok() && snap(field, z2).is_ok() {
            let est = slice_distance(field, z, z2)?;
            lower = lower.max(est.lower);
            note.push_str(&format!("; raster bound {:.6}", est.lower));
        }
    }
    Ok(DistanceEstimate { lower, upper: f64::INFINITY, method: Method::Projection, resolution: res, note })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::DensityField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disc_field(res: usize, radius: f64) -> DensityField {
        let spec = GridSpec::square(c(0.0, 0.0), 1.05, res);
        let inside = (0..spec.len()).map(|i| spec.cell_center(i).norm() < radius).collect();
        DensityField::from_mask(spec, Some(0), inside, true)
    }

    #[test]
    fn unit_disc_calibration() {
        let field = disc_field(1024, 1.0);
        let d = slice_distance(&field, c(0.0, 0.0), c(0.5, 0.0)).unwrap();
        assert!(d.upper >= 0.549 && d.upper <= 1.21, "{}", d.upper);
        assert!(d.lower >= 0.12 && d.lower <= 0.549 * 1.05, "{}", d.lower);
        assert!(d.lower <= d.upper);
    }

    #[test]
    fn calibration_decreases_with_resolution() {
        let mut prev = f64::INFINITY;
        for res in [128, 256, 512, 1024] {
            let d = slice_distance(&disc_field(res, 1.0), c(0.0, 0.0), c(0.5, 0.0)).unwrap().upper;
            assert!(d <= prev + 1e-9, "{res}: {d} > {prev}");
            assert!(d <= 2.0 * 0.5f64.atanh());
            prev = d;
        }
        // the 1/δ metric integrates to ln 2 along the radius of the unit disc
        assert!((prev - 2f64.ln()).abs() < 0.02 * 2f64.ln(), "{prev}");
    }

    #[test]
    fn identical_points_and_symmetry() {
        let field = disc_field(128, 1.0);
        let z = slice_distance(&field, c(0.1, 0.2), c(0.1, 0.2)).unwrap();
        assert_eq!((z.lower, z.upper), (0.0, 0.0));
        let a = slice_distance(&field, c(0.1, 0.2), c(-0.4, 0.3)).unwrap();
        let b = slice_distance(&field, c(-0.4, 0.3), c(0.1, 0.2)).unwrap();
        assert_eq!(a.upper, b.upper);
        assert_eq!(a.lower, b.lower);
    }

    #[test]
    fn nested_domains_shrink_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let r_small = rng.gen_range(0.6..0.8);
            let r_big = rng.gen_range(0.85..1.0);
            let small = disc_field(128, r_small);
            let big = disc_field(128, r_big);
            let p = C64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..6.28));
            let q = C64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..6.28));
            let a = slice_distance(&small, p, q).unwrap().upper;
            let b = slice_distance(&big, p, q).unwrap().upper;
            assert!(b <= a + 1e-12);
        }
    }

    #[test]
    fn triangle_inequality_for_upper() {
        let field = disc_field(128, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let max_edge = field.upper.iter().cloned().fold(0.0, f64::max) * field.spec.cell_diagonal();
        for _ in 0..20 {
            let pts: Vec<C64> = (0..3).map(|_| C64::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(0.0..6.28))).collect();
            let d = |a: C64, b: C64| slice_distance(&field, a, b).unwrap().upper;
            assert!(d(pts[0], pts[2]) <= d(pts[0], pts[1]) + d(pts[1], pts[2]) + 2.0 * max_edge);
        }
    }

    #[test]
    fn disconnected_components() {
        let spec = GridSpec::square(c(0.0, 0.0), 2.0, 64);
        let inside: Vec<bool> = (0..spec.len())
            .map(|i| {
                let p = spec.cell_center(i);
                (p - c(-1.0, 0.0)).norm() < 0.5 || (p - c(1.0, 0.0)).norm() < 0.5
            })
            .collect();
        let field = DensityField::from_mask(spec, None, inside, true);
        assert_eq!(slice_distance(&field, c(-1.0, 0.0), c(1.0, 0.0)), Err(Error::Disconnected));
    }

    #[test]
    fn projection_on_bidisc_is_exact_artanh() {
        let f = SkewProduct::product();
        for r in [0.3, 0.9, 0.999] {
            let d = projection_lower(&f, (c(r, 0.0), c(0.0, 0.0)), (c(0.0, 0.0), c(0.0, 0.0)), None).unwrap();
            assert!((d.lower - (r as f64).atanh()).abs() < 1e-9);
        }
        let d = projection_lower(&f, (c(0.4, 0.0), c(0.1, 0.0)), (c(0.4, 0.0), c(0.7, 0.0)), None).unwrap();
        assert_eq!(d.lower, 0.0);
    }

    #[test]
    fn projection_raster_is_below_truth() {
        let f = SkewProduct::product();
        let field = disc_field(256, 1.0).refined();
        assert_eq!(field.lower_factor, 2.0);
        let d = projection_lower(&f, (c(0.7, 0.0), c(0.0, 0.0)), (c(0.0, 0.0), c(0.0, 0.0)), Some(&field)).unwrap();
        assert!(d.lower <= 0.7f64.atanh() + 1e-9);
    }
}
