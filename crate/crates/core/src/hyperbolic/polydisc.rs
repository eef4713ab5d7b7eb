use std::collections::{BinaryHeap, VecDeque};

use super::{DistanceEstimate, Method};
use crate::dynamics::{classify_point, GridSpec};
use crate::error::{Error, Result};
use crate::par;
use crate::poly::C64;
use crate::skew::SkewProduct;

/// Product of a z-grid and a w-grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid4 {
    pub z: GridSpec,
    pub w: GridSpec,
}

impl Grid4 {
    pub fn len(&self) -> usize {
        self.z.len() * self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, zc: usize, wc: usize) -> usize {
        zc * self.w.len() + wc
    }

    fn coords(&self, i: usize) -> [usize; 4] {
        let (zc, wc) = (i / self.w.len(), i % self.w.len());
        let (a, b) = self.z.col_row(zc);
        let (c, d) = self.w.col_row(wc);
        [a, b, c, d]
    }

    fn from_coords(&self, x: [usize; 4]) -> usize {
        self.index(self.z.index(x[0], x[1]), self.w.index(x[2], x[3]))
    }
}

/// Coarse 4D membership mask of the basin.
#[derive(Clone, Debug)]
pub struct Mask4 {
    pub grid: Grid4,
    pub inside: Vec<bool>,
}

impl Mask4 {
    pub fn classify(f: &SkewProduct, grid: Grid4, eps: f64, max_iter: u32, max_nodes: usize) -> Result<Self> {
        if grid.len() > max_nodes {
            return Err(Error::ResourceCap { what: "4D grid nodes", requested: grid.len(), limit: max_nodes });
        }
        let rows = par::map_range(grid.z.len(), |zc| {
            let z = grid.z.cell_center(zc);
            (0..grid.w.len())
                .map(|wc| classify_point(f, z, grid.w.cell_center(wc), eps, max_iter).is_basin())
                .collect::<Vec<_>>()
        });
        Ok(Self { grid, inside: rows.into_iter().flatten().collect() })
    }

    pub fn from_fn(grid: Grid4, member: impl Fn(C64, C64) -> bool) -> Self {
        let inside = (0..grid.len())
            .map(|i| member(grid.z.cell_center(i / grid.w.len()), grid.w.cell_center(i % grid.w.len())))
            .collect();
        Self { grid, inside }
    }

    /// Chebyshev cell distance to the nearest outside cell (virtual cells
    /// past the box count as outside).
    pub fn chebyshev_depth(&self) -> Vec<u16> {
        let g = &self.grid;
        let (nz, nw) = (g.z.resolution, g.w.resolution);
        let mut depth = vec![u16::MAX; g.len()];
        let mut queue = VecDeque::new();
        for i in 0..g.len() {
            let x = g.coords(i);
            if !self.inside[i] {
                depth[i] = 0;
                queue.push_back(i);
            } else if x[0] == 0 || x[1] == 0 || x[0] + 1 == nz || x[1] + 1 == nz || x[2] == 0 || x[3] == 0 || x[2] + 1 == nw || x[3] + 1 == nw {
                depth[i] = 1;
                queue.push_back(i);
            }
        }
        // two-level BFS: all depth-0 cells come before depth-1 seeds, so
        // process in nondecreasing order with a sorted queue
        let mut items: Vec<usize> = queue.drain(..).collect();
        items.sort_by_key(|&i| depth[i]);
        let mut queue: VecDeque<usize> = items.into();
        while let Some(i) = queue.pop_front() {
            let d = depth[i];
            let x = g.coords(i);
            for_each_neighbour(x, [nz, nz, nw, nw], |y| {
                let j = g.from_coords(y);
                if depth[j] > d + 1 {
                    depth[j] = d + 1;
                    queue.push_back(j);
                }
            });
        }
        depth
    }
}

fn for_each_neighbour(x: [usize; 4], n: [usize; 4], mut visit: impl FnMut([usize; 4])) {
    for a in -1i64..=1 {
        for b in -1i64..=1 {
            for c in -1i64..=1 {
                for d in -1i64..=1 {
                    if a == 0 && b == 0 && c == 0 && d == 0 {
                        continue;
                    }
                    let y = [x[0] as i64 + a, x[1] as i64 + b, x[2] as i64 + c, x[3] as i64 + d];
                    if (0..4).all(|k| y[k] >= 0 && (y[k] as usize) < n[k]) {
                        visit([y[0] as usize, y[1] as usize, y[2] as usize, y[3] as usize]);
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);
impl Eq for Entry {}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

/// Upper bound from inscribed bidiscs on a 4D raster.
///
/// A cell at Chebyshev depth k carries the bidisc of radii `(k - 1/2) h_z`
/// and `(k - 1/2) h_w`, whose density for a step `(dz, dw)` is
/// `max(|dz|/r_z, |dw|/r_w)`. Dijkstra over the 80-neighbour graph.
pub fn polydisc_distance_4d(mask: &Mask4, p: (C64, C64), q: (C64, C64)) -> Result<DistanceEstimate> {
    let g = &mask.grid;
    let cell = |pt: (C64, C64)| -> Result<usize> {
        let zc = g.z.cell_of(pt.0);
        let wc = g.w.cell_of(pt.1);
        match (zc, wc) {
            (Some(a), Some(b)) if mask.inside[g.index(a, b)] => Ok(g.index(a, b)),
            _ => Err(Error::OutOfDomain(format!("({}, {}) not in the 4D mask", pt.0, pt.1))),
        }
    };
    let (pc, qc) = (cell(p)?, cell(q)?);
    let res = g.z.resolution.max(g.w.resolution);
    if p == q {
        return Ok(DistanceEstimate::zero(Method::Polydisc4d, res));
    }
    let depth = mask.chebyshev_depth();
    let inv_r = |i: usize, h: f64| 1.0 / ((depth[i] as f64 - 0.5) * h);
    let (hz, hw) = (g.z.dx().min(g.z.dy()), g.w.dx().min(g.w.dy()));
    let offset = |pt: (C64, C64), i: usize| {
        let (zc, wc) = (i / g.w.len(), i % g.w.len());
        let dz = (pt.0 - g.z.cell_center(zc)).norm();
        let dw = (pt.1 - g.w.cell_center(wc)).norm();
        (dz * inv_r(i, hz)).max(dw * inv_r(i, hw))
    };
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    dist[pc] = 0.0;
    heap.push(Entry(0.0, pc));
    let n = [g.z.resolution, g.z.resolution, g.w.resolution, g.w.resolution];
    let (zdx, zdy, wdx, wdy) = (g.z.dx(), g.z.dy(), g.w.dx(), g.w.dy());
    while let Some(Entry(cost, i)) = heap.pop() {
        if cost > dist[i] {
            continue;
        }
        if i == qc {
            break;
        }
        let x = g.coords(i);
        let (rz_i, rw_i) = (inv_r(i, hz), inv_r(i, hw));
        for_each_neighbour(x, n, |y| {
            let j = g.from_coords(y);
            if !mask.inside[j] {
                return;
            }
            let dz = ((y[0] as f64 - x[0] as f64) * zdx).hypot((y[1] as f64 - x[1] as f64) * zdy);
            let dw = ((y[2] as f64 - x[2] as f64) * wdx).hypot((y[3] as f64 - x[3] as f64) * wdy);
            let w = (dz * 0.5 * (rz_i + inv_r(j, hz))).max(dw * 0.5 * (rw_i + inv_r(j, hw)));
            let next = cost + w;
            if next < dist[j] {
                dist[j] = next;
                heap.push(Entry(next, j));
            }
        });
    }
    if !dist[qc].is_finite() {
        return Err(Error::Disconnected);
    }
    let upper = dist[qc] + offset(p, pc) + offset(q, qc);
    Ok(DistanceEstimate {
        lower: 0.0,
        upper,
        method: Method::Polydisc4d,
        resolution: res,
        note: "inscribed bidisc radii from Chebyshev depth; 80-neighbour paths".into(),
    })
}
