//! Backward orbits of the fixed point and continuation of stable graphs.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{classify_point, GridSpec};
use crate::error::{Error, Result};
use crate::par;
use crate::poly::{BivarPoly, C64};
use crate::roots;
use crate::skew::SkewProduct;
use crate::stable::StableSeries;

pub const MERGE_TOL: f64 = 1e-9;

/// All roots (with multiplicity) of `Q(z, w) = w_target` in w.
pub fn fiber_preimages_w(q: &BivarPoly, z: C64, w_target: C64, tol: f64) -> Result<Vec<C64>> {
    let fiber = q.fiber(&z);
    if fiber.degree() < q.w_degree() as usize {
        return Err(Error::DegreeDrop { z });
    }
    roots::roots(&fiber.shifted(&w_target), tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub z: C64,
    pub w: C64,
    pub depth: u32,
    pub parent: Option<usize>,
    /// `|F(node) - parent|` at creation.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreimageTree {
    pub nodes: Vec<TreeNode>,
    pub depth: u32,
    /// Nodes removed because they did not classify as Basin.
    pub dropped: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct TreeOptions {
    pub root_tol: f64,
    pub merge_tol: f64,
    /// Keep only nodes that classify as Basin with these settings.
    pub filter_basin: Option<(f64, u32)>,
    /// Upper bound on the node count.
    pub max_nodes: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self { root_tol: 1e-12, merge_tol: MERGE_TOL, filter_basin: None, max_nodes: 2_000_000 }
    }
}

/// Spatial hash for duplicate detection at `merge_tol`.
struct PointIndex {
    cell: f64,
    buckets: HashMap<[i64; 4], Vec<usize>>,
}

impl PointIndex {
    fn new(cell: f64) -> Self {
        Self { cell, buckets: HashMap::new() }
    }

    fn key(&self, z: C64, w: C64) -> [i64; 4] {
        let q = |x: f64| (x / self.cell).floor() as i64;
        [q(z.re), q(z.im), q(w.re), q(w.im)]
    }

    fn find(&self, nodes: &[TreeNode], z: C64, w: C64, tol: f64) -> Option<usize> {
        let k = self.key(z, w);
        for a in -1..=1 {
            for b in -1..=1 {
                for c in -1..=1 {
                    for d in -1..=1 {
                        let kk = [k[0] + a, k[1] + b, k[2] + c, k[3] + d];
                        if let Some(ids) = self.buckets.get(&kk) {
                            for &i in ids {
                                let n = &nodes[i];
                                if (n.z - z).norm() < tol && (n.w - w).norm() < tol {
                                    return Some(i);
                                }
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, z: C64, w: C64, id: usize) {
        let k = self.key(z, w);
        self.buckets.entry(k).or_default().push(id);
    }
}

/// Breadth-first backward orbit of `(0, 0)` to depth `k_max`.
///
/// Duplicates are merged across the whole tree keeping the lowest depth, so
/// the fixed point is not re-added as its own preimage.
pub fn preimage_tree(f: &SkewProduct, k_max: u32, opts: TreeOptions) -> Result<PreimageTree> {
    let origin = C64::new(0.0, 0.0);
    let mut nodes = vec![TreeNode { z: origin, w: origin, depth: 0, parent: None, residual: 0.0 }];
    let mut index = PointIndex::new(opts.merge_tol.max(1e-300));
    index.insert(origin, origin, 0);
    let mut frontier = vec![0usize];
    let mut dropped = 0;
    for depth in 1..=k_max {
        let children = par::map_slice(&frontier, |&id| {
            let parent = nodes[id];
            children_of(f, &parent, opts.root_tol).map_err(|e| Error::InvalidInput(format!(
                "preimage solve failed at node {id} ({}, {}): {e}",
                parent.z, parent.w
            )))
        });
        let mut next = Vec::new();
        for (&pid, kids) in frontier.iter().zip(children) {
            for (z, w, residual) in kids? {
                if index.find(&nodes, z, w, opts.merge_tol).is_some() {
                    continue;
                }
                if let Some((eps, max_iter)) = opts.filter_basin {
                    if !classify_point(f, z, w, eps, max_iter).is_basin() {
                        dropped += 1;
                        continue;
                    }
                }
                let id = nodes.len();
                if id >= opts.max_nodes {
                    return Err(Error::ResourceCap { what: "preimage tree nodes", requested: id + 1, limit: opts.max_nodes });
                }
                nodes.push(TreeNode { z, w, depth, parent: Some(pid), residual });
                index.insert(z, w, id);
                next.push(id);
            }
        }
        frontier = next;
    }
    Ok(PreimageTree { nodes, depth: k_max, dropped })
}

fn children_of(f: &SkewProduct, parent: &TreeNode, tol: f64) -> Result<Vec<(C64, C64, f64)>> {
    let mut out = Vec::new();
    for z in roots::roots(&f.p.shifted(&parent.z), tol)? {
        for w in fiber_preimages_w(&f.q, z, parent.w, tol)? {
            let (pz, qw) = f.eval(z, w);
            let residual = (pz - parent.z).norm().max((qw - parent.w).norm());
            out.push((z, w, residual));
        }
    }
    Ok(out)
}

impl PreimageTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn count_at_depth(&self, k: u32) -> usize {
        self.nodes.iter().filter(|n| n.depth == k).count()
    }

    /// Nodes on the fiber `z = 0`, i.e. the points `(0, w_n)`.
    pub fn fiber_anchors(&self, tol: f64) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].z.norm() < tol).collect()
    }

    /// Node within `tol` of `(z, w)`, if any.
    pub fn find(&self, z: C64, w: C64, tol: f64) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| (n.z - z).norm() < tol && (n.w - w).norm() < tol)
    }

    /// Max-modulus distance of `F^depth(node)` from the origin.
    pub fn forward_residual(&self, f: &SkewProduct, id: usize) -> f64 {
        let n = &self.nodes[id];
        forward_to_origin(f, n.z, n.w, n.depth)
    }
}

pub fn forward_to_origin(f: &SkewProduct, z: C64, w: C64, steps: u32) -> f64 {
    let (mut z, mut w) = (z, w);
    for _ in 0..steps {
        let (a, b) = f.eval(z, w);
        z = a;
        w = b;
    }
    z.norm().max(w.norm())
}

/// What a stable graph continues: the series curve or another graph.
#[derive(Clone, Debug)]
pub enum GraphSource {
    Series(Arc<StableSeries>),
    Graph(Arc<StableGraph>),
}

impl GraphSource {
    pub fn eval(&self, f: &SkewProduct, z: C64) -> Option<C64> {
        match self {
            GraphSource::Series(s) => Some(s.eval(z)),
            GraphSource::Graph(g) => g.eval(f, z),
        }
    }
}

const NEWTON_STEPS: usize = 30;

/// Solves `Q(z, w) = target` for w by Newton from `seed`.
fn newton_w(f: &SkewProduct, z: C64, target: C64, seed: C64, branch_tol: f64) -> std::result::Result<C64, NewtonFail> {
    let mut w = seed;
    let scale = 1.0 + target.norm();
    for _ in 0..NEWTON_STEPS {
        let g = f.eval_q(z, w) - target;
        let dg = f.eval_dq_dw(z, w);
        if dg.norm() < branch_tol {
            return Err(NewtonFail::Branch);
        }
        let step = g / dg;
        w -= step;
        if step.norm() <= 1e-15 * (1.0 + w.norm()) {
            break;
        }
    }
    let res = (f.eval_q(z, w) - target).norm();
    if !(res <= 1e-11 * scale) {
        return Err(NewtonFail::NoConvergence);
    }
    if f.eval_dq_dw(z, w).norm() < branch_tol {
        return Err(NewtonFail::Branch);
    }
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NewtonFail {
    Branch,
    NoConvergence,
}

/// Raster graph `w = f_n(z)` over a disc of z-cells.
#[derive(Clone, Debug)]
pub struct StableGraph {
    pub n: usize,
    pub depth: u32,
    /// Anchor fiber point `w_n = f_n(0)`.
    pub anchor: C64,
    pub parent: GraphSource,
    pub base: GridSpec,
    pub radius: f64,
    /// Per-cell values; `None` outside the base or where continuation failed.
    pub values: Vec<Option<C64>>,
    /// Cells rejected by the branch-proximity guard.
    pub branch_cells: Vec<usize>,
    /// Cells rejected by the jump or convergence guards.
    pub rejected_cells: Vec<usize>,
    pub branch_tol: f64,
}

impl StableGraph {
    /// Graph of the series curve itself, sampled on the base.
    pub fn from_series(series: Arc<StableSeries>, base: GridSpec, radius: f64) -> Self {
        let values = (0..base.len())
            .map(|i| {
                let z = base.cell_center(i);
                (z.norm() < radius).then(|| series.eval(z))
            })
            .collect();
        Self {
            n: 0,
            depth: 0,
            anchor: C64::new(0.0, 0.0),
            parent: GraphSource::Series(series),
            base,
            radius,
            values,
            branch_cells: Vec::new(),
            rejected_cells: Vec::new(),
            branch_tol: 0.0,
        }
    }

    pub fn covered(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn cell_value(&self, z: C64) -> Option<C64> {
        self.base.cell_of(z).and_then(|i| self.values[i])
    }

    /// `f_n(z)` off the raster: Newton seeded from the nearest cell value.
    pub fn eval(&self, f: &SkewProduct, z: C64) -> Option<C64> {
        if z.norm() >= self.radius {
            return None;
        }
        if let GraphSource::Series(s) = &self.parent {
            if self.depth == 0 {
                return Some(s.eval(z));
            }
        }
        let seed = self.cell_value(z)?;
        let target = self.parent.eval(f, f.eval_p(z))?;
        newton_w(f, z, target, seed, self.branch_tol).ok()
    }

    /// `|Q(z, f_n(z)) - f_{n-1}(P(z))|` at a base cell.
    pub fn invariance_residual(&self, f: &SkewProduct, cell: usize) -> Option<f64> {
        let z = self.base.cell_center(cell);
        let w = self.values[cell]?;
        let target = self.parent.eval(f, f.eval_p(z))?;
        Some((f.eval_q(z, w) - target).norm())
    }
}

/// Disc base grid of odd resolution so the center cell sits on `z = 0`.
pub fn disc_base(radius: f64, resolution: usize) -> GridSpec {
    let res = resolution | 1;
    GridSpec::square(C64::new(0.0, 0.0), radius, res)
}

/// Continues `prev` through `F^{-1}` from the anchor `(0, anchor)`.
///
/// Breadth-first flood from the center cell; each new cell is seeded from a
/// solved neighbour. Cells within `branch_tol` of a critical point or with a
/// solution jump beyond `10 * cell * lipschitz` are excluded and reported.
pub fn continue_stable_graph(
    f: &SkewProduct,
    prev: GraphSource,
    n: usize,
    depth: u32,
    anchor: C64,
    base: GridSpec,
    radius: f64,
    branch_tol: f64,
) -> Result<StableGraph> {
    let len = base.len();
    let mut values: Vec<Option<C64>> = vec![None; len];
    let mut targets: Vec<Option<C64>> = vec![None; len];
    let mut visited = vec![false; len];
    let mut branch_cells = Vec::new();
    let mut rejected_cells = Vec::new();
    let start = base.nearest_cell(C64::new(0.0, 0.0));
    let in_base = |i: usize| base.cell_center(i).norm() < radius;

    let z0 = base.cell_center(start);
    let t0 = prev
        .eval(f, f.eval_p(z0))
        .ok_or_else(|| Error::NoGraphReachable("parent graph undefined at the anchor".into()))?;
    match newton_w(f, z0, t0, anchor, branch_tol) {
        Ok(w) => {
            values[start] = Some(w);
            targets[start] = Some(t0);
        }
        Err(NewtonFail::Branch) => return Err(Error::BranchPointProximity { z: z0 }),
        Err(NewtonFail::NoConvergence) => {
            return Err(Error::NoGraphReachable(format!("anchor solve failed near w = {anchor}")))
        }
    }
    visited[start] = true;
    let h = base.dx();
    let res = base.resolution;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let (c, r) = base.col_row(i);
        let (wi, ti) = (values[i].unwrap(), targets[i].unwrap());
        let zi = base.cell_center(i);
        let neighbours = [
            (c.wrapping_sub(1), r),
            (c + 1, r),
            (c, r.wrapping_sub(1)),
            (c, r + 1),
        ];
        for (cc, rr) in neighbours {
            if cc >= res || rr >= res {
                continue;
            }
            let j = base.index(cc, rr);
            if visited[j] || !in_base(j) {
                continue;
            }
            visited[j] = true;
            let zj = base.cell_center(j);
            let Some(tj) = prev.eval(f, f.eval_p(zj)) else {
                rejected_cells.push(j);
                continue;
            };
            match newton_w(f, zj, tj, wi, branch_tol) {
                Ok(wj) => {
                    // implicit-function slope from the two solved points
                    let dq = f.eval_dq_dw(zi, wi);
                    let dt = (tj - ti) / (zj - zi);
                    let dz = (f.eval_q(zj, wi) - f.eval_q(zi, wi)) / (zj - zi);
                    let lipschitz = ((dt - dz) / dq).norm().max(1.0);
                    if (wj - wi).norm() > 10.0 * h * lipschitz {
                        rejected_cells.push(j);
                        continue;
                    }
                    values[j] = Some(wj);
                    targets[j] = Some(tj);
                    queue.push_back(j);
                }
                Err(NewtonFail::Branch) => branch_cells.push(j),
                Err(NewtonFail::NoConvergence) => rejected_cells.push(j),
            }
        }
    }
    Ok(StableGraph {
        n,
        depth,
        anchor,
        parent: prev,
        base,
        radius,
        values,
        branch_cells,
        rejected_cells,
        branch_tol,
    })
}

/// The series curve and its preimage graphs anchored at the fiber points
/// `(0, w_n)` of a preimage tree.
#[derive(Clone, Debug)]
pub struct GraphFamily {
    pub series: Arc<StableSeries>,
    pub graphs: Vec<Arc<StableGraph>>,
    /// Tree node id of each graph's anchor.
    pub anchor_nodes: Vec<usize>,
    /// Anchors whose continuation failed, with the reason.
    pub failures: Vec<(usize, String)>,
}

impl GraphFamily {
    /// Builds graphs for every fiber anchor of `tree`, parents before children.
    pub fn build(
        f: &SkewProduct,
        series: StableSeries,
        tree: &PreimageTree,
        resolution: usize,
        branch_tol: f64,
    ) -> Self {
        let series = Arc::new(series);
        let radius = if series.exact_zero { series.epsilon.min(0.5) } else { series.epsilon };
        let base = disc_base(radius, resolution);
        let anchors = tree.fiber_anchors(MERGE_TOL);
        let mut by_node: HashMap<usize, Arc<StableGraph>> = HashMap::new();
        let mut graphs = Vec::new();
        let mut anchor_nodes = Vec::new();
        let mut failures = Vec::new();
        let mut order = anchors.clone();
        order.sort_by_key(|&i| (tree.nodes[i].depth, i));
        for id in order {
            let node = &tree.nodes[id];
            let graph = if node.depth == 0 {
                Ok(StableGraph::from_series(series.clone(), base, radius))
            } else {
                let parent_id = node.parent.expect("non-root node has a parent");
                match by_node.get(&parent_id) {
                    Some(pg) => continue_stable_graph(
                        f,
                        GraphSource::Graph(pg.clone()),
                        graphs.len(),
                        node.depth,
                        node.w,
                        base,
                        radius,
                        branch_tol,
                    ),
                    None => Err(Error::NoGraphReachable("parent graph missing".into())),
                }
            };
            match graph {
                Ok(mut g) => {
                    g.n = graphs.len();
                    let g = Arc::new(g);
                    by_node.insert(id, g.clone());
                    graphs.push(g);
                    anchor_nodes.push(id);
                }
                Err(e) => failures.push((id, e.to_string())),
            }
        }
        Self { series, graphs, anchor_nodes, failures }
    }

    pub fn radius(&self) -> f64 {
        self.graphs.first().map_or(self.series.epsilon, |g| g.radius)
    }

    /// Smallest distance between values of distinct graphs over shared cells.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        let Some(first) = self.graphs.first() else { return best };
        for cell in 0..first.base.len() {
            let vals: Vec<C64> = self.graphs.iter().filter_map(|g| g.values[cell]).collect();
            for a in 0..vals.len() {
                for b in a + 1..vals.len() {
                    best = best.min((vals[a] - vals[b]).norm());
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::stable_manifold_series;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn fiber_preimages_of_example() {
        let f = SkewProduct::example(10.0);
        let r = sorted(fiber_preimages_w(&f.q, c(0.0, 0.0), c(0.0, 0.0), 1e-12).unwrap());
        assert!((r[0] - c(-0.5, 0.0)).norm() < 1e-12 && r[1].norm() < 1e-12);
        let r = sorted(fiber_preimages_w(&f.q, c(-0.25, 0.0), c(0.0, 0.0), 1e-12).unwrap());
        assert!((r[0] - c(-0.25, -0.75)).norm() < 1e-12);
        assert!((r[1] - c(-0.25, 0.75)).norm() < 1e-12);
    }

    #[test]
    fn constructed_preimage_is_found() {
        let f = SkewProduct::example(10.0);
        for k in 0..20 {
            let z = C64::from_polar(0.3 + 0.02 * k as f64, 0.7 * k as f64);
            let w_star = C64::from_polar(0.8, 1.3 * k as f64);
            let got = fiber_preimages_w(&f.q, z, f.eval_q(z, w_star), 1e-12).unwrap();
            assert!(got.iter().any(|w| (w - w_star).norm() < 1e-9));
        }
    }

    #[test]
    fn degree_drop_is_reported() {
        let q = BivarPoly::from_terms([(0, 2, c(1.0, 0.0)), (1, 2, c(-1.0, 0.0))]);
        assert!(matches!(fiber_preimages_w(&q, c(1.0, 0.0), c(0.0, 0.0), 1e-12), Err(Error::DegreeDrop { .. })));
    }

    #[test]
    fn depth_one_tree_of_example() {
        let f = SkewProduct::example(10.0);
        let t = preimage_tree(&f, 1, TreeOptions::default()).unwrap();
        assert_eq!(t.count_at_depth(1), 3);
        let want = [c(0.0, 0.0), c(-0.5, 0.0), c(-0.25, 0.75), c(-0.25, -0.75)];
        let zs = [c(0.0, 0.0), c(0.0, 0.0), c(-0.25, 0.0), c(-0.25, 0.0)];
        for (z, w) in zs.iter().zip(want.iter()).skip(1) {
            assert!(t.find(*z, *w, 1e-9).is_some(), "missing ({z}, {w})");
        }
    }

    #[test]
    fn tree_nodes_map_home_and_counts_are_bounded() {
        let f = SkewProduct::example(10.0);
        let t = preimage_tree(&f, 5, TreeOptions { filter_basin: Some((0.02, 500)), ..Default::default() }).unwrap();
        assert_eq!(t.dropped, 0);
        for k in 0..=5 {
            assert!(t.count_at_depth(k) <= 4usize.pow(k));
        }
        for (i, n) in t.nodes.iter().enumerate() {
            assert!(t.forward_residual(&f, i) < 1e-6 * (n.depth.max(1) as f64));
            if let Some(p) = n.parent {
                let (a, b) = f.eval(n.z, n.w);
                let q = &t.nodes[p];
                assert!((a - q.z).norm() < 1e-9 && (b - q.w).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn product_tree_is_just_the_origin() {
        let t = preimage_tree(&SkewProduct::product(), 6, TreeOptions::default()).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn tighter_tolerance_moves_nodes_little() {
        let f = SkewProduct::example(10.0);
        let a = preimage_tree(&f, 3, TreeOptions { root_tol: 1e-10, ..Default::default() }).unwrap();
        let b = preimage_tree(&f, 3, TreeOptions { root_tol: 1e-12, ..Default::default() }).unwrap();
        assert_eq!(a.len(), b.len());
        for n in &a.nodes {
            assert!(b.find(n.z, n.w, 1e-9).is_some());
        }
    }

    #[test]
    fn first_graph_is_invariant_and_disjoint() {
        let f = SkewProduct::example(10.0);
        let series = stable_manifold_series(&f, 12).unwrap();
        let tree = preimage_tree(&f, 3, TreeOptions::default()).unwrap();
        let fam = GraphFamily::build(&f, series, &tree, 33, 1e-4);
        assert!(fam.failures.is_empty(), "{:?}", fam.failures);
        assert_eq!(fam.graphs.len(), 8);
        let g1 = fam.graphs.iter().find(|g| (g.anchor - c(-0.5, 0.0)).norm() < 1e-12).unwrap();
        assert!(g1.covered() > 500);
        for cell in 0..g1.base.len() {
            if let Some(r) = g1.invariance_residual(&f, cell) {
                assert!(r < 1e-6);
            }
        }
        assert!(fam.min_separation() > MERGE_TOL);
    }

    #[test]
    fn product_graphs_are_constant() {
        let f = SkewProduct::counterexample1(c(0.0, 0.0));
        let series = stable_manifold_series(&f, 8).unwrap();
        let tree = preimage_tree(&f, 3, TreeOptions::default()).unwrap();
        let fam = GraphFamily::build(&f, series, &tree, 17, 1e-6);
        for g in &fam.graphs {
            for v in g.values.iter().flatten() {
                assert!((v - g.anchor).norm() < 1e-12);
            }
        }
    }
}
