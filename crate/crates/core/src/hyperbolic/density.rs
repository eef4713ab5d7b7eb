use crate::dynamics::{GridDomain, GridSpec};

/// Euclidean distance from each inside cell center to the nearest outside
/// cell center; cells beyond the box count as outside. Zero on outside cells.
///
/// Exact squared transform (Felzenszwalb–Huttenlocher), separable in x then y.
pub fn distance_transform(spec: &GridSpec, inside: &[bool]) -> Vec<f64> {
    let n = spec.resolution;
    let m = n + 2; // one virtual outside ring
    let (dx, dy) = (spec.dx(), spec.dy());
    let mut g = vec![f64::INFINITY; m * m];
    for r in 0..m {
        for c in 0..m {
            let outside = r == 0 || c == 0 || r == m - 1 || c == m - 1 || !inside[spec.index(c - 1, r - 1)];
            if outside {
                g[r * m + c] = 0.0;
            }
        }
    }
    let mut f = vec![0.0; m];
    let mut out = vec![0.0; m];
    for r in 0..m {
        f.copy_from_slice(&g[r * m..(r + 1) * m]);
        edt_1d(&f, dx, &mut out);
        g[r * m..(r + 1) * m].copy_from_slice(&out);
    }
    for c in 0..m {
        for r in 0..m {
            f[r] = g[r * m + c];
        }
        edt_1d(&f, dy, &mut out);
        for r in 0..m {
            g[r * m + c] = out[r];
        }
    }
    (0..spec.len())
        .map(|i| {
            let (c, r) = spec.col_row(i);
            if inside[i] {
                g[(r + 1) * m + c + 1].sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// Lower envelope of parabolas `f(q) + h^2 (p - q)^2`.
fn edt_1d(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let h2 = h * h;
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inter = |q: usize, p: usize| -> f64 {
        ((f[q] + h2 * (q * q) as f64) - (f[p] + h2 * (p * p) as f64)) / (2.0 * h2 * (q as f64 - p as f64))
    };
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        while z[k + 1] < p as f64 {
            k += 1;
        }
        let d = p as f64 - v[k] as f64;
        *o = h2 * d * d + f[v[k]];
    }
}

/// Koebe-bracketed density on a raster domain.
///
/// `upper = 1/δ` holds on any domain. `lower = 1/(4δ)` needs simple
/// connectivity and is zero otherwise.
#[derive(Clone, Debug)]
pub struct DensityField {
    pub spec: GridSpec,
    /// Component id, or `None` when the field covers every Basin cell.
    pub label: Option<u32>,
    pub inside: Vec<bool>,
    pub delta: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub simply_connected: bool,
    /// Divisor used for the lower density (4, or 2 on a convex domain).
    pub lower_factor: f64,
}

impl DensityField {
    pub fn for_component(grid: &GridDomain, label: u32) -> Self {
        let inside = grid.component_mask(label);
        let simply = grid.components.get(label as usize).is_some_and(|c| c.holes == 0);
        Self::from_mask(grid.spec, Some(label), inside, simply)
    }

    /// One field over all Basin cells. On cell centers the distance to the
    /// complement of a component equals the distance to the nearest non-Basin
    /// cell, so this agrees with every per-component field.
    pub fn for_basin(grid: &GridDomain) -> Self {
        let inside: Vec<bool> = (0..grid.cells.len()).map(|i| grid.is_basin(i)).collect();
        let simply = grid.components.iter().all(|c| c.holes == 0);
        Self::from_mask(grid.spec, None, inside, simply)
    }

    pub fn from_mask(spec: GridSpec, label: Option<u32>, inside: Vec<bool>, simply_connected: bool) -> Self {
        let delta = distance_transform(&spec, &inside);
        let upper: Vec<f64> = delta.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
        let lower = if simply_connected { upper.iter().map(|u| u / 4.0).collect() } else { vec![0.0; upper.len()] };
        Self { spec, label, inside, delta, upper, lower, simply_connected, lower_factor: 4.0 }
    }

    /// Uses `1/(2δ)` as the lower density when the domain is digitally convex.
    pub fn refined(mut self) -> Self {
        if self.simply_connected && digitally_convex(&self.spec, &self.inside) {
            self.lower = self.upper.iter().map(|u| u / 2.0).collect();
            self.lower_factor = 2.0;
        }
        self
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.inside[cell]
    }
}

/// Every cell center inside the convex hull of the mask's centers is in the mask.
pub fn digitally_convex(spec: &GridSpec, inside: &[bool]) -> bool {
    let pts: Vec<(f64, f64)> = (0..inside.len())
        .filter(|&i| inside[i])
        .map(|i| {
            let (c, r) = spec.col_row(i);
            (c as f64, r as f64)
        })
        .collect();
    if pts.len() < 3 {
        return true;
    }
    let hull = convex_hull(pts);
    let n = spec.resolution;
    for r in 0..n {
        let y = r as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..hull.len() {
            let (a, b) = (hull[k], hull[(k + 1) % hull.len()]);
            if (a.1 - y) * (b.1 - y) > 0.0 {
                continue;
            }
            if a.1 == b.1 {
                lo = lo.min(a.0.min(b.0));
                hi = hi.max(a.0.max(b.0));
            } else {
                let x = a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo > hi {
            continue;
        }
        let c0 = (lo - 1e-9).ceil().max(0.0) as usize;
        let c1 = ((hi + 1e-9).floor() as usize).min(n - 1);
        if (c0..=c1).any(|c| !inside[spec.index(c, r)]) {
            return false;
        }
    }
    true
}

fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::C64;

    fn disc(res: usize, half: f64) -> (GridSpec, Vec<bool>) {
        let spec = GridSpec::square(C64::new(0.0, 0.0), half, res);
        let inside = (0..spec.len()).map(|i| spec.cell_center(i).norm() < 1.0).collect();
        (spec, inside)
    }

    #[test]
    fn transform_matches_brute_force() {
        let spec = GridSpec { center: C64::new(0.1, -0.2), half_width: 1.3, half_height: 0.9, resolution: 37 };
        let inside: Vec<bool> = (0..spec.len())
            .map(|i| {
                let p = spec.cell_center(i);
                (p - C64::new(0.3, 0.0)).norm() < 0.7 || (p.re < 0.0 && p.im.abs() < 0.3)
            })
            .collect();
        let d = distance_transform(&spec, &inside);
        let n = spec.resolution as i64;
        for i in 0..spec.len() {
            if !inside[i] {
                assert_eq!(d[i], 0.0);
                continue;
            }
            let (c, r) = spec.col_row(i);
            let mut best = f64::INFINITY;
            for rr in -1..=n {
                for cc in -1..=n {
                    let out = rr < 0 || cc < 0 || rr >= n || cc >= n || !inside[spec.index(cc as usize, rr as usize)];
                    if out {
                        let ddx = (cc - c as i64) as f64 * spec.dx();
                        let ddy = (rr - r as i64) as f64 * spec.dy();
                        best = best.min(ddx.hypot(ddy));
                    }
                }
            }
            assert!((d[i] - best).abs() < 1e-12, "{} vs {}", d[i], best);
        }
    }

    #[test]
    fn disc_density_bracket() {
        let (spec, inside) = disc(512, 1.1);
        let field = DensityField::from_mask(spec, Some(0), inside, true);
        let center = spec.nearest_cell(C64::new(0.0, 0.0));
        assert!((field.delta[center] - 1.0).abs() < 2.0 * spec.cell_diagonal());
        assert!((field.upper[center] - 1.0).abs() < 0.02);
        let i = spec.nearest_cell(C64::new(0.9, 0.0));
        let truth = 1.0 / (1.0 - 0.81);
        assert!(field.lower[i] <= truth && truth <= field.upper[i]);
        for k in 0..spec.len() {
            if field.inside[k] {
                assert!(field.lower[k] > 0.0 && (field.upper[k] / field.lower[k] - 4.0).abs() < 1e-12);
                assert!(field.delta[k] <= spec.half_width.hypot(spec.half_height));
            }
        }
    }

    #[test]
    fn annulus_has_no_lower_bound() {
        let spec = GridSpec::square(C64::new(0.0, 0.0), 1.2, 96);
        let mask: Vec<bool> = (0..spec.len())
            .map(|i| {
                let r = spec.cell_center(i).norm();
                r < 1.0 && r > 0.4
            })
            .collect();
        let grid = GridDomain::from_mask(spec, &mask);
        let field = DensityField::for_component(&grid, 0);
        assert!(!field.simply_connected);
        assert!(field.lower.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn convexity_detection() {
        let (spec, inside) = disc(128, 1.2);
        assert!(digitally_convex(&spec, &inside));
        let crescent: Vec<bool> = (0..spec.len())
            .map(|i| inside[i] && (spec.cell_center(i) - C64::new(0.5, 0.0)).norm() > 0.6)
            .collect();
        assert!(!digitally_convex(&spec, &crescent));
    }
}
