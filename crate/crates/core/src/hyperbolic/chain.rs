//! Two-leg chain bound on the distance from a basin point to the backward
//! orbit S of the fixed point.
//!
//! Leg 1 runs inside the slice `Ω_z` from `w` to a point `η` whose orbit lands
//! on a stable graph `w = f_j(z)` at some level i with `|z_i| < ε/2`. Leg 2
//! follows a path from `z_i` to `0` in the graph's base disc, lifted back to
//! level 0 through `F^i`; its far end is a point of S.
//!
//! Leg 2 is charged `∫ |ds| / r(s)`, where `r(s)` is the radius of a disc
//! around `s` on which the lift is a single-valued holomorphic map into Ω:
//! inside the graph's domain and away from the points where the followed
//! branch meets a critical point of P or of a fiber map. The domain distance
//! is exact; the branch distance is a first-order estimate.

use std::collections::HashMap;

use super::path::dijkstra;
use super::{DensityField, DistanceEstimate, Method};
use crate::dynamics::{classify_point, Classification, GridSpec, SliceDomain};
use crate::error::{Error, Result};
use crate::poly::{BivarPoly, ComplexPoly, C64};
use crate::roots::roots;
use crate::preimage::{forward_to_origin, GraphFamily, PreimageTree, StableGraph, MERGE_TOL};
use crate::skew::SkewProduct;

/// Upper distances to the origin over the U component, used as leg 2 for
/// the invariant line `w = 0` when `Q(z, 0) = 0`.
#[derive(Clone, Debug)]
pub struct OriginDistances {
    pub field: DensityField,
    pub dist: Vec<f64>,
    origin_cell: usize,
}

impl OriginDistances {
    pub fn new(field: DensityField) -> Option<Self> {
        let origin_cell = field.spec.cell_of(C64::new(0.0, 0.0)).filter(|&c| field.inside[c])?;
        let run = dijkstra(&field.spec, &field.inside, &field.upper, &[(origin_cell, 0.0)], None);
        Some(Self { field, dist: run.dist, origin_cell })
    }

    /// Upper bound on `d_U(z, 0)` including snap offsets.
    pub fn upper(&self, z: C64) -> Option<f64> {
        let cell = self.field.spec.cell_of(z).filter(|&c| self.field.inside[c])?;
        let d = self.dist[cell];
        if !d.is_finite() {
            return None;
        }
        let o = self.origin_cell;
        Some(
            d + (z - self.field.spec.cell_center(cell)).norm() * self.field.upper[cell]
                + self.field.spec.cell_center(o).norm() * self.field.upper[o],
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainOptions {
    pub eps_attract: f64,
    pub max_iter: u32,
    pub branch_tol: f64,
    /// Largest landing level considered.
    pub max_levels: usize,
    /// Minimum number of steps along a leg-2 path.
    pub lift_steps: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self { eps_attract: 0.02, max_iter: 500, branch_tol: 1e-4, max_levels: 40, lift_steps: 16 }
    }
}

/// Shared read-only data for chain estimates.
pub struct ChainContext<'a> {
    pub f: &'a SkewProduct,
    pub tree: &'a PreimageTree,
    pub graphs: &'a GraphFamily,
    pub origin: Option<&'a OriginDistances>,
    pub opts: ChainOptions,
    /// Per graph, centers of base cells inside the disc without a value.
    holes: Vec<Vec<C64>>,
    hole_margin: f64,
    q_ww: BivarPoly,
    q_wz: BivarPoly,
    dp: ComplexPoly,
    d2p: ComplexPoly,
}

impl<'a> ChainContext<'a> {
    pub fn new(
        f: &'a SkewProduct,
        tree: &'a PreimageTree,
        graphs: &'a GraphFamily,
        origin: Option<&'a OriginDistances>,
        opts: ChainOptions,
    ) -> Self {
        let holes = graphs
            .graphs
            .iter()
            .map(|g| {
                (0..g.base.len())
                    .filter(|&i| g.values[i].is_none() && g.base.cell_center(i).norm() < g.radius)
                    .map(|i| g.base.cell_center(i))
                    .collect()
            })
            .collect();
        let hole_margin = graphs.graphs.first().map_or(0.0, |g| g.base.cell_diagonal());
        let q_w = f.q.partial_w();
        Self {
            f,
            tree,
            graphs,
            origin,
            opts,
            holes,
            hole_margin,
            q_ww: q_w.partial_w(),
            q_wz: q_w.partial_z(),
            dp: f.p.derivative(),
            d2p: f.p.derivative().derivative(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainCandidate {
    pub eta: C64,
    pub cell: usize,
    /// Lower bound on leg 2 before the path is lifted; exact for the U-line leg.
    pub leg2_bound: f64,
    pub level: u32,
    /// Index into `GraphFamily::graphs`, or `None` for the U-line leg.
    pub graph: Option<usize>,
    pub anchor_depth: u32,
    /// Which sample produced it; the pulled-back chain is rebuilt from it.
    pub sample: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    pub upper: f64,
    pub leg1: f64,
    pub leg2: f64,
    pub level: u32,
    pub graph: Option<usize>,
    /// Point of S reached by leg 2.
    pub node: (C64, C64),
    /// Forward steps from `node` to `(0, 0)`.
    pub node_depth: u32,
    pub node_residual: f64,
}

impl ChainResult {
    pub fn estimate(&self, resolution: usize) -> DistanceEstimate {
        DistanceEstimate {
            lower: 0.0,
            upper: self.upper,
            method: Method::Chain,
            resolution,
            note: format!(
                "leg1 {:.6} in slice, leg2 {:.6} along graph {} at level {}",
                self.leg1,
                self.leg2,
                self.graph.map_or("w=0 over U".to_string(), |g| g.to_string()),
                self.level
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Lifted {
    node: (C64, C64),
    depth: u32,
    residual: f64,
    leg2: f64,
}

/// All chain data for one slice and its samples.
pub struct SliceChainBatch<'a, 'c> {
    ctx: &'c ChainContext<'a>,
    pub z: C64,
    z_orbit: Vec<C64>,
    fibers: Vec<ComplexPoly>,
    pub field: DensityField,
    samples: Vec<C64>,
    w_orbits: Vec<Vec<C64>>,
    pub candidates: Vec<ChainCandidate>,
    by_cell: HashMap<usize, Vec<usize>>,
    lifted: HashMap<usize, Option<Lifted>>,
}

impl<'a, 'c> SliceChainBatch<'a, 'c> {
    pub fn new(ctx: &'c ChainContext<'a>, slice: &SliceDomain, samples: &[C64]) -> Self {
        let f = ctx.f;
        let z = slice.z;
        let levels = ctx.opts.max_levels;
        let mut z_orbit = vec![z];
        for _ in 0..levels {
            let next = f.eval_p(*z_orbit.last().unwrap());
            z_orbit.push(next);
        }
        let fibers = z_orbit.iter().map(|&zm| f.fiber(zm)).collect();
        let mut batch = Self {
            ctx,
            z,
            z_orbit,
            fibers,
            field: DensityField::for_basin(&slice.grid),
            samples: samples.to_vec(),
            w_orbits: Vec::new(),
            candidates: Vec::new(),
            by_cell: HashMap::new(),
            lifted: HashMap::new(),
        };
        batch.build_candidates();
        batch
    }

    fn radius(&self) -> f64 {
        self.ctx.graphs.radius()
    }

    fn build_candidates(&mut self) {
        let ctx = self.ctx;
        let f = ctx.f;
        let eps = self.radius();
        // graph values at each landing level are shared by all samples
        let graph_values: Vec<Option<Vec<Option<C64>>>> = self
            .z_orbit
            .iter()
            .map(|&zi| (zi.norm() < 0.5 * eps).then(|| ctx.graphs.graphs.iter().map(|g| g.eval(f, zi)).collect()))
            .collect();
        if let (Some(u), true, false) = (ctx.origin, ctx.graphs.series.exact_zero, self.samples.is_empty()) {
            // the whole line w = 0 over U lies in Ω
            if let (Some(leg2), Some(cell)) = (u.upper(self.z), self.basin_cell(C64::new(0.0, 0.0))) {
                self.push(ChainCandidate {
                    eta: C64::new(0.0, 0.0),
                    cell,
                    leg2_bound: leg2,
                    level: 0,
                    graph: None,
                    anchor_depth: 0,
                    sample: 0,
                });
            }
        }
        for s in 0..self.samples.len() {
            let w = self.samples[s];
            let levels = self.levels_for(w);
            let orbit = self.w_orbit(w, levels);
            for i in 0..=levels.min(self.z_orbit.len() - 1) {
                let Some(values) = &graph_values[i] else { continue };
                // the disc D(0, ε) is the largest disc the lift could use
                let bound = (self.z_orbit[i].norm() / eps).atanh();
                for (j, t) in values.iter().enumerate() {
                    let Some(t) = *t else { continue };
                    let Some(chain) = self.pull_back(t, i, &orbit) else { continue };
                    let Some(cell) = self.basin_cell(chain[0]) else { continue };
                    self.push(ChainCandidate {
                        eta: chain[0],
                        cell,
                        leg2_bound: bound,
                        level: i as u32,
                        graph: Some(j),
                        anchor_depth: ctx.graphs.graphs[j].depth,
                        sample: s,
                    });
                }
            }
            self.w_orbits.push(orbit);
        }
    }

    fn push(&mut self, c: ChainCandidate) {
        let id = self.candidates.len();
        self.by_cell.entry(c.cell).or_default().push(id);
        self.candidates.push(c);
    }

    fn basin_cell(&self, w: C64) -> Option<usize> {
        self.field.spec.cell_of(w).filter(|&c| self.field.inside[c])
    }

    /// Highest landing level used for a sample: a little past its entry time
    /// and past the first level inside `D(0, ε/2)`.
    fn levels_for(&self, w: C64) -> usize {
        let o = &self.ctx.opts;
        let entry = match classify_point(self.ctx.f, self.z, w, o.eps_attract, o.max_iter) {
            Classification::Basin(n) => n as usize,
            _ => o.max_levels,
        };
        let eps = self.radius();
        let landing = self.z_orbit.iter().position(|z| z.norm() < 0.5 * eps).unwrap_or(o.max_levels);
        (entry.max(landing) + 2).min(o.max_levels)
    }

    fn w_orbit(&self, w: C64, levels: usize) -> Vec<C64> {
        let mut out = vec![w];
        for m in 0..levels {
            let next = self.ctx.f.eval_q(self.z_orbit[m], out[m]);
            out.push(next);
        }
        out
    }

    /// Pulls `target` on the fiber over `z_i` back to the fiber over `z_0`,
    /// choosing at each step the root nearest the sample's own w-orbit.
    /// Returns the chain `η_0, ..., η_i`.
    fn pull_back(&self, target: C64, level: usize, orbit: &[C64]) -> Option<Vec<C64>> {
        let mut chain = vec![C64::new(0.0, 0.0); level + 1];
        chain[level] = target;
        for m in (0..level).rev() {
            let roots = fiber_roots(&self.fibers[m], chain[m + 1])?;
            chain[m] = roots.into_iter().min_by(|a, b| (a - orbit[m]).norm().total_cmp(&(b - orbit[m]).norm()))?;
        }
        Some(chain)
    }

    fn lifted(&mut self, id: usize) -> Option<Lifted> {
        if let Some(v) = self.lifted.get(&id) {
            return *v;
        }
        let cand = self.candidates[id];
        let v = self.lift(&cand);
        self.lifted.insert(id, v);
        v
    }

    /// Cheapest valid leg 2 over a straight path and two bent ones.
    fn lift(&self, cand: &ChainCandidate) -> Option<Lifted> {
        let Some(gid) = cand.graph else {
            // the U-line leg ends at the fixed point itself
            let o = C64::new(0.0, 0.0);
            return Some(Lifted { node: (o, o), depth: 0, residual: 0.0, leg2: cand.leg2_bound });
        };
        let i = cand.level as usize;
        let zi = self.z_orbit[i];
        let orbit = &self.w_orbits[cand.sample];
        let top = self.ctx.graphs.graphs[gid].eval(self.ctx.f, zi)?;
        let chain = self.pull_back(top, i, orbit)?;
        let half = zi * 0.5;
        let bends = [None, Some(half + half * C64::new(0.0, 1.0)), Some(half - half * C64::new(0.0, 1.0))];
        bends
            .iter()
            .filter_map(|&bend| {
                let mut path = vec![zi];
                path.extend(bend);
                path.push(C64::new(0.0, 0.0));
                self.walk(cand, gid, &path, &chain)
            })
            .min_by(|a, b| a.leg2.total_cmp(&b.leg2))
    }

    /// Exact part of the lift radius at `s`: distance to the graph domain's
    /// edge and to its holes.
    fn exact_radius(&self, gid: usize, s: C64) -> f64 {
        let g = &self.ctx.graphs.graphs[gid];
        let mut r = g.radius - s.norm();
        for h in &self.ctx.holes[gid] {
            r = r.min((s - h).norm() - self.ctx.hole_margin);
        }
        r
    }

    /// Walks the polyline `path` (level-i coordinates, ending at 0) while
    /// continuing the lifted points, and integrates `|ds| / r`.
    fn walk(&self, cand: &ChainCandidate, gid: usize, path: &[C64], chain: &[C64]) -> Option<Lifted> {
        let f = self.ctx.f;
        let graph = &self.ctx.graphs.graphs[gid];
        let i = cand.level as usize;
        let tol = self.ctx.opts.branch_tol;
        let zi = path[0];
        let min_steps = self.ctx.opts.lift_steps.max(1) as f64;
        let mut zeta: Vec<C64> = self.z_orbit[..=i].to_vec();
        let mut omega = chain.to_vec();
        let mut s = zi;
        let mut r_w = f64::INFINITY;
        let mut cost = 0.0;
        let mut steps = 0usize;
        for seg in path.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = (b - a).norm();
            let dir = if len > 0.0 { (b - a) / len } else { C64::new(0.0, 0.0) };
            let mut done = 0.0;
            while done < len {
                let r = self.exact_radius(gid, s).min(0.5 * r_w);
                if !(r > 0.0) {
                    return None;
                }
                let mut h = (0.25 * r).min(zi.norm() / min_steps).min(len - done);
                loop {
                    if h < 1e-14 * (1.0 + zi.norm()) {
                        return None;
                    }
                    let next = if done + h >= len { b } else { a + dir * (done + h) };
                    match self.lift_step(graph, next, i, &zeta, &omega, tol) {
                        Some((zn, wn)) => {
                            r_w = self.branch_radius(i, &zeta, &omega, &zn, &wn, h);
                            // r is 1-Lipschitz in s, so r - h bounds it over the step
                            let r_step = (r.min(0.5 * r_w) - h).min(self.exact_radius(gid, next));
                            if !(r_step > 0.0) {
                                return None;
                            }
                            cost += h / r_step;
                            zeta = zn;
                            omega = wn;
                            s = next;
                            done += h;
                            break;
                        }
                        None => h *= 0.5,
                    }
                }
                steps += 1;
                if steps > 200_000 {
                    return None;
                }
            }
        }
        let depth = cand.level + cand.anchor_depth;
        let node = (zeta[0], omega[0]);
        let residual = forward_to_origin(f, node.0, node.1, depth);
        (residual <= 1e-6 * depth.max(1) as f64).then_some(Lifted { node, depth, residual, leg2: cost })
    }

    /// First-order distance, in the level-i coordinate, to the nearest point
    /// where the branch followed hits a critical point: some `P'(ζ_m)` or
    /// `∂Q/∂w(ζ_m, ω_m)` vanishes. Critical values of `P^i` that this branch
    /// never reaches do not count.
    fn branch_radius(&self, i: usize, z0: &[C64], w0: &[C64], z1: &[C64], w1: &[C64], h: f64) -> f64 {
        let f = self.ctx.f;
        let mut r = f64::INFINITY;
        for m in 0..i {
            let g0 = f.eval_dq_dw(z0[m], w0[m]);
            let dz = (z1[m] - z0[m]) / h;
            let dw = (w1[m] - w0[m]) / h;
            let rate = (self.ctx.q_wz.eval(&z1[m], &w1[m]) * dz + self.ctx.q_ww.eval(&z1[m], &w1[m]) * dw).norm();
            let g1 = f.eval_dq_dw(z1[m], w1[m]).norm().min(g0.norm());
            if rate > 0.0 {
                r = r.min(g1 / rate);
            }
            let zrate = (self.ctx.d2p.eval(&z1[m]) * dz).norm();
            let p1 = self.ctx.dp.eval(&z1[m]).norm().min(self.ctx.dp.eval(&z0[m]).norm());
            if zrate > 0.0 {
                r = r.min(p1 / zrate);
            }
        }
        r
    }

    /// One continuation step of the lift; rejects steps that move a root
    /// more than a quarter of its distance to the nearest critical point.
    fn lift_step(
        &self,
        graph: &StableGraph,
        top_z: C64,
        i: usize,
        zeta: &[C64],
        omega: &[C64],
        tol: f64,
    ) -> Option<(Vec<C64>, Vec<C64>)> {
        let f = self.ctx.f;
        let mut zn = zeta.to_vec();
        let mut wn = omega.to_vec();
        zn[i] = top_z;
        wn[i] = graph.eval(f, top_z)?;
        for m in (0..i).rev() {
            // z-coordinate: P(ζ) = ζ_{m+1}
            let seed = zeta[m];
            let dp0 = f.eval_dp(seed);
            if dp0.norm() < tol {
                return None;
            }
            let reach = 0.25 * dp0.norm() / self.ctx.d2p.eval(&seed).norm().max(1e-300);
            let z = newton(|x| f.eval_p(x) - zn[m + 1], |x| f.eval_dp(x), seed)?;
            if (z - seed).norm() > reach || f.eval_dp(z).norm() < tol {
                return None;
            }
            zn[m] = z;
            // w-coordinate: Q(ζ_m, ω) = ω_{m+1}
            let seed = omega[m];
            let dq0 = f.eval_dq_dw(z, seed);
            if dq0.norm() < tol {
                return None;
            }
            let reach = 0.25 * dq0.norm() / self.ctx.q_ww.eval(&z, &seed).norm().max(1e-300);
            let w = newton(|x| f.eval_q(z, x) - wn[m + 1], |x| f.eval_dq_dw(z, x), seed)?;
            if (w - seed).norm() > reach || f.eval_dq_dw(z, w).norm() < tol {
                return None;
            }
            wn[m] = w;
        }
        Some((zn, wn))
    }

    /// Cost of entering the slice graph at the candidate's cell, given a
    /// leg-2 value.
    fn entry_cost(&self, k: usize, leg2: f64) -> f64 {
        let c = &self.candidates[k];
        leg2 + (c.eta - self.field.spec.cell_center(c.cell)).norm() * self.field.upper[c.cell]
    }

    /// Lifts candidates of one cell in order of their lower bounds until the
    /// best lifted cost is no larger than the next bound.
    fn settle(&mut self, q: &mut CellQueue) {
        while let Some(&k) = q.order.get(q.next) {
            let bound = self.entry_cost(k, self.candidates[k].leg2_bound);
            if q.best.is_some_and(|(cost, _)| cost <= bound) {
                break;
            }
            if let Some(l) = self.lifted(k) {
                let cost = self.entry_cost(k, l.leg2);
                if q.best.is_none_or(|(b, _)| cost < b) {
                    q.best = Some((cost, k));
                }
            }
            q.next += 1;
        }
        q.settled = true;
    }

    /// Chain upper bounds for every sample, restricted to anchors of depth
    /// at most `k_max`.
    ///
    /// Each cell enters the slice Dijkstra with its best lifted cost once
    /// settled, and with the smallest lower bound among its candidates
    /// before that. Cells whose bound is actually used get settled and the
    /// run repeats, so the answer is the minimum over lifted candidates.
    pub fn solve(&mut self, k_max: u32) -> Vec<Result<ChainResult>> {
        let spec: GridSpec = self.field.spec;
        let sample_cells: Vec<Option<usize>> = self.samples.iter().map(|&w| self.basin_cell(w)).collect();
        let mut cells: Vec<usize> = self.by_cell.keys().copied().collect();
        cells.sort_unstable();
        let mut queues: Vec<CellQueue> = cells
            .iter()
            .map(|cell| {
                let mut order: Vec<(f64, usize)> = self.by_cell[cell]
                    .iter()
                    .copied()
                    .filter(|&k| self.candidates[k].anchor_depth <= k_max)
                    .map(|k| (self.entry_cost(k, self.candidates[k].leg2_bound), k))
                    .collect();
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                CellQueue { order: order.into_iter().map(|p| p.1).collect(), next: 0, best: None, settled: false }
            })
            .collect();
        loop {
            let mut sources = Vec::new();
            let mut source_queue = Vec::new();
            for (qi, q) in queues.iter().enumerate() {
                let init = if q.settled {
                    q.best.map(|b| b.0)
                } else {
                    q.order.first().map(|&k| self.entry_cost(k, self.candidates[k].leg2_bound))
                };
                if let Some(init) = init {
                    sources.push((cells[qi], init));
                    source_queue.push(qi);
                }
            }
            let run = dijkstra(&spec, &self.field.inside, &self.field.upper, &sources, None);
            let mut again = false;
            let mut out = Vec::with_capacity(self.samples.len());
            for s in 0..self.samples.len() {
                let w = self.samples[s];
                let tree = self.ctx.tree;
                if let Some(node) = tree.find(self.z, w, MERGE_TOL).filter(|&n| tree.nodes[n].depth <= k_max) {
                    let n = &tree.nodes[node];
                    out.push(Ok(ChainResult {
                        upper: 0.0,
                        leg1: 0.0,
                        leg2: 0.0,
                        level: 0,
                        graph: None,
                        node: (n.z, n.w),
                        node_depth: n.depth,
                        node_residual: tree.forward_residual(self.ctx.f, node),
                    }));
                    continue;
                }
                let Some(cell) = sample_cells[s] else {
                    out.push(Err(Error::OutOfDomain(format!("w = {w} is not a Basin cell of the slice"))));
                    continue;
                };
                let src = run.source[cell];
                if src == u32::MAX {
                    out.push(Err(Error::NoGraphReachable(format!(
                        "no stable-graph point reachable in the slice component of w = {w}"
                    ))));
                    continue;
                }
                let q = &mut queues[source_queue[src as usize]];
                if !q.settled {
                    let mut taken = std::mem::take(q);
                    self.settle(&mut taken);
                    queues[source_queue[src as usize]] = taken;
                    again = true;
                    continue;
                }
                let (_, k) = q.best.expect("settled sources have a lifted candidate");
                let l = self.lifted(k).expect("best candidate was lifted");
                let c = self.candidates[k];
                let total = run.dist[cell] + (w - spec.cell_center(cell)).norm() * self.field.upper[cell];
                out.push(Ok(ChainResult {
                    upper: total,
                    leg1: total - l.leg2,
                    leg2: l.leg2,
                    level: c.level,
                    graph: c.graph,
                    node: l.node,
                    node_depth: l.depth,
                    node_residual: l.residual,
                }));
            }
            if !again {
                return out;
            }
        }
    }
}

/// Candidates of one cell sorted by lower bound, with the lifting progress.
#[derive(Default)]
struct CellQueue {
    order: Vec<usize>,
    next: usize,
    best: Option<(f64, usize)>,
    settled: bool,
}

fn newton(g: impl Fn(C64) -> C64, dg: impl Fn(C64) -> C64, seed: C64) -> Option<C64> {
    let mut x = seed;
    for _ in 0..12 {
        let d = dg(x);
        if d.norm() == 0.0 {
            return None;
        }
        let step = g(x) / d;
        x -= step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            return Some(x);
        }
    }
    (g(x).norm() < 1e-10 * (1.0 + x.norm())).then_some(x)
}

/// Roots of `fiber(w) = target`; closed form for quadratics.
fn fiber_roots(fiber: &ComplexPoly, target: C64) -> Option<Vec<C64>> {
    if fiber.degree() == 2 {
        let (a, b, c) = (fiber.coeff(2), fiber.coeff(1), fiber.coeff(0) - target);
        let disc = (b * b - a * c * 4.0).sqrt();
        let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) * 0.5 } else { -(b - disc) * 0.5 };
        if q.norm() == 0.0 {
            return Some(vec![C64::new(0.0, 0.0); 2]);
        }
        return Some(vec![q / a, c / q]);
    }
    roots(&fiber.shifted(&target), 1e-12).ok()
}

/// Chain estimate for a single point; builds its own batch.
pub fn chain_distance_to_s(ctx: &ChainContext<'_>, slice: &SliceDomain, w: C64) -> Result<(DistanceEstimate, ChainResult)> {
    let mut batch = SliceChainBatch::new(ctx, slice, &[w]);
    let r = batch.solve(ctx.tree.depth).pop().expect("one sample")?;
    Ok((r.estimate(slice.grid.spec.resolution), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{basin_grid_1d, basin_grid_slice, GridSpec};
    use crate::hyperbolic::{disc_distance_radius, slice_distance};
    use crate::preimage::{preimage_tree, TreeOptions};
    use crate::stable::stable_manifold_series;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    struct Fixture {
        f: SkewProduct,
        tree: PreimageTree,
        graphs: GraphFamily,
        origin: Option<OriginDistances>,
    }

    fn fixture(f: SkewProduct, k: u32) -> Fixture {
        let tree = preimage_tree(&f, k, TreeOptions::default()).unwrap();
        let series = stable_manifold_series(&f, 12).unwrap();
        let graphs = GraphFamily::build(&f, series, &tree, 33, 1e-4);
        let u = basin_grid_1d(&f.p, GridSpec::square(c(0.0, 0.0), 1.3, 256), 0.02, 300).unwrap();
        let origin = OriginDistances::new(DensityField::for_component(&u, 0));
        Fixture { f, tree, graphs, origin }
    }

    fn ctx(fx: &Fixture, eps: f64) -> ChainContext<'_> {
        let opts = ChainOptions { eps_attract: eps, max_iter: 300, max_levels: 30, ..Default::default() };
        ChainContext::new(&fx.f, &fx.tree, &fx.graphs, fx.origin.as_ref(), opts)
    }

    #[test]
    fn tree_node_has_zero_distance() {
        let fx = fixture(SkewProduct::example(10.0), 3);
        let cx = ctx(&fx, 0.02);
        let slice = basin_grid_slice(&fx.f, c(0.0, 0.0), GridSpec::square(c(-0.25, 0.0), 1.0, 128), 0.02, 300);
        let (d, r) = chain_distance_to_s(&cx, &slice, c(-0.5, 0.0)).unwrap();
        assert_eq!(d.upper, 0.0);
        assert_eq!(r.node_depth, 1);
    }

    #[test]
    fn zero_fiber_reduces_to_leg_one() {
        let fx = fixture(SkewProduct::example(10.0), 4);
        let cx = ctx(&fx, 0.02);
        let slice = basin_grid_slice(&fx.f, c(0.0, 0.0), GridSpec::square(c(-0.25, 0.0), 1.0, 128), 0.02, 300);
        let spec = slice.grid.spec;
        let field = DensityField::for_basin(&slice.grid);
        for w in [c(0.3, 0.1), c(-0.7, 0.2), c(-0.2, -0.5)] {
            let w = spec.cell_center(spec.cell_of(w).unwrap());
            let (d, _) = chain_distance_to_s(&cx, &slice, w).unwrap();
            let nearest = fx
                .graphs
                .graphs
                .iter()
                .filter_map(|g| slice_distance(&field, w, g.anchor).ok())
                .map(|e| e.upper)
                .fold(f64::INFINITY, f64::min);
            assert!(d.upper <= nearest + 1e-9, "{} > {}", d.upper, nearest);
        }
    }

    #[test]
    fn product_map_bound_dominates_projection() {
        let fx = fixture(SkewProduct::product(), 3);
        let cx = ctx(&fx, 0.5);
        for r in [0.3, 0.6, 0.9] {
            let slice = basin_grid_slice(&fx.f, c(r, 0.0), GridSpec::square(c(0.0, 0.0), 1.05, 128), 0.5, 100);
            let w = slice.grid.spec.cell_center(slice.grid.spec.nearest_cell(c(0.0, 0.0)));
            let (d, res) = chain_distance_to_s(&cx, &slice, w).unwrap();
            assert!(d.upper >= (r as f64).atanh() - 1e-9, "{} < artanh {r}", d.upper);
            assert_eq!(res.node, (c(0.0, 0.0), c(0.0, 0.0)));
        }
    }

    #[test]
    fn chains_respect_projection_and_depth() {
        let fx = fixture(SkewProduct::example(10.0), 4);
        let cx = ctx(&fx, 0.02);
        let rho = fx.f.escape.p_bound;
        for z in [c(0.3, 0.2), c(-0.14085841256608433, 0.04799439355415149), c(-0.45, 0.1)] {
            let slice = basin_grid_slice(&fx.f, z, GridSpec::square(c(-0.25, 0.0), 1.3, 128), 0.02, 300);
            let samples: Vec<C64> = (0..slice.grid.spec.len())
                .step_by(31)
                .filter(|&i| slice.grid.is_basin(i))
                .map(|i| slice.grid.spec.cell_center(i))
                .collect();
            assert!(!samples.is_empty());
            let mut batch = SliceChainBatch::new(&cx, &slice, &samples);
            let k4 = batch.solve(4);
            let k2 = batch.solve(2);
            for (a, b) in k4.iter().zip(&k2) {
                let a = a.as_ref().unwrap();
                assert!(forward_to_origin(&fx.f, a.node.0, a.node.1, a.node_depth) < 1e-6 * a.node_depth.max(1) as f64);
                // the z-projection of any path is a path in U ⊂ D(0, ρ)
                assert!(a.upper + 1e-9 >= disc_distance_radius(z, a.node.0, rho), "{a:?}");
                if let Ok(b) = b {
                    assert!(a.upper <= b.upper + 1e-12);
                }
            }
        }
    }
}
