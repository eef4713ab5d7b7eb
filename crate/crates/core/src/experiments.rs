//! Empirical estimate of the uniform distance bound from basin points to the
//! backward orbit S, stratified by entry-time shell.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{basin_grid_1d, basin_grid_slice, classify_point_1d, Classification, GridDomain, GridSpec, SliceDomain};
use crate::error::{Error, Result};
use crate::hyperbolic::{
    dijkstra, disc_distance_radius, ChainContext, ChainOptions, DensityField, OriginDistances, SliceChainBatch, ANISOTROPY,
};
use crate::par;
use crate::poly::{ComplexPoly, C64};
use crate::preimage::{forward_to_origin, preimage_tree, GraphFamily, TreeOptions};
use crate::roots::roots;
use crate::skew::{escape_radius_1d, SkewProduct};
use crate::stable::stable_manifold_series;

/// Least-squares slope below which the shell maxima count as bounded.
pub const BOUNDED_SLOPE: f64 = 0.05;
/// Slope above which they count as growing.
pub const GROWING_SLOPE: f64 = 0.3;
pub const PLATEAU_WINDOW: usize = 6;
pub const MAX_UNRESOLVED: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub eps_attract: f64,
    pub max_iter: u32,
    /// Preimage depths to evaluate; the largest builds the tree.
    pub depths: Vec<u32>,
    pub series_order: usize,
    pub graph_resolution: usize,
    pub branch_tol: f64,
    pub root_tol: f64,
    pub u_resolution: usize,
    pub slice_resolution: usize,
    pub coarse_resolution: usize,
    pub samples_per_shell: usize,
    pub max_shell: u32,
    pub slices_per_shell: usize,
    pub seed: u64,
    pub max_levels: usize,
    pub lift_steps: usize,
    pub max_nodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eps_attract: 0.02,
            max_iter: 500,
            depths: vec![4, 6, 8],
            series_order: 12,
            graph_resolution: 33,
            branch_tol: 1e-4,
            root_tol: 1e-12,
            u_resolution: 512,
            slice_resolution: 512,
            coarse_resolution: 128,
            samples_per_shell: 100,
            max_shell: 12,
            slices_per_shell: 4,
            seed: 1,
            max_levels: 40,
            lift_steps: 16,
            max_nodes: 2_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn k_max(&self) -> u32 {
        self.depths.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.eps_attract > 0.0 && self.branch_tol > 0.0 && self.root_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.depths.is_empty() {
            return bad("depths must not be empty");
        }
        for r in [self.u_resolution, self.slice_resolution, self.coarse_resolution] {
            if !r.is_power_of_two() || !(64..=4096).contains(&r) {
                return bad("resolutions must be powers of two between 64 and 4096");
            }
        }
        if self.graph_resolution < 3 || self.slices_per_shell == 0 || self.lift_steps == 0 {
            return bad("graph_resolution >= 3, slices_per_shell >= 1 and lift_steps >= 1 required");
        }
        Ok(())
    }
}

/// Per-shell RNG stream so shells stay independent of each other's sizes.
fn shell_rng(seed: u64, stream: u64, shell: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_mul(1 << 32) + shell as u64);
    rng
}

/// Square box around U from the escape bound of P.
pub fn u_spec(f: &SkewProduct, resolution: usize) -> GridSpec {
    GridSpec::square(C64::new(0.0, 0.0), f.escape.p_bound * 1.02, resolution)
}

pub fn u_grid(f: &SkewProduct, cfg: &ExperimentConfig) -> Result<GridDomain> {
    basin_grid_1d(&f.p, u_spec(f, cfg.u_resolution), cfg.eps_attract, cfg.max_iter)
}

#[derive(Clone, Debug)]
pub struct Slice {
    pub z_shell: u32,
    pub domain: SliceDomain,
}

/// Base points per z-shell, chosen among U cells with that entry time and
/// jittered inside the cell when the jittered point keeps the same time.
pub fn choose_slices(f: &SkewProduct, u: &GridDomain, cfg: &ExperimentConfig) -> Vec<(C64, u32)> {
    let mut out = Vec::new();
    let radius = escape_radius_1d(&f.p).unwrap_or(f.escape.radius);
    for s in 0..=cfg.max_shell {
        let cells: Vec<usize> = (0..u.cells.len()).filter(|&i| u.is_basin(i) && u.times[i] == s).collect();
        if cells.is_empty() {
            continue;
        }
        let mut rng = shell_rng(cfg.seed, 1, s);
        let k = cfg.slices_per_shell.min(cells.len());
        let mut picked: Vec<usize> = sample(&mut rng, cells.len(), k).into_iter().map(|i| cells[i]).collect();
        picked.sort_unstable();
        for cell in picked {
            let center = u.spec.cell_center(cell);
            let mut z = center;
            for _ in 0..8 {
                let cand = center
                    + C64::new((rng.gen::<f64>() - 0.5) * u.spec.dx(), (rng.gen::<f64>() - 0.5) * u.spec.dy());
                if classify_point_1d(&f.p, radius, cand, cfg.eps_attract, cfg.max_iter) == Classification::Basin(s) {
                    z = cand;
                    break;
                }
            }
            out.push((z, s));
        }
    }
    out
}

/// Fits a square box to the slice's Basin support with a coarse pass, then
/// rasterizes it at full resolution.
pub fn fit_slice(f: &SkewProduct, z: C64, cfg: &ExperimentConfig) -> SliceDomain {
    let half = f.escape.p_bound.max(f.escape.w_bound) * 1.02;
    let coarse_spec = GridSpec::square(C64::new(0.0, 0.0), half, cfg.coarse_resolution);
    let coarse = basin_grid_slice(f, z, coarse_spec, cfg.eps_attract, cfg.max_iter);
    let spec = match bounding_square(&coarse.grid) {
        Some((center, h)) => GridSpec::square(center, (h + 2.0 * coarse_spec.dx()).min(half), cfg.slice_resolution),
        None => GridSpec::square(C64::new(0.0, 0.0), half, cfg.slice_resolution),
    };
    basin_grid_slice(f, z, spec, cfg.eps_attract, cfg.max_iter)
}

fn bounding_square(grid: &GridDomain) -> Option<(C64, f64)> {
    let mut lo = C64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for i in 0..grid.cells.len() {
        if grid.is_basin(i) {
            let p = grid.spec.cell_center(i);
            lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
            any = true;
        }
    }
    any.then(|| ((lo + hi) * 0.5, 0.5 * (hi.re - lo.re).max(hi.im - lo.im)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub shell: u32,
    pub slice: usize,
    pub z: C64,
    pub w: C64,
}

/// Samples stratified by joint entry time. Each shell's pool is drawn
/// round-robin over the slices that support it so every base point is
/// represented.
pub fn sample_basin(f: &SkewProduct, cfg: &ExperimentConfig) -> Result<(Vec<Slice>, Vec<Sample>)> {
    if cfg.samples_per_shell == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let u = u_grid(f, cfg)?;
    let bases = choose_slices(f, &u, cfg);
    let slices: Vec<Slice> =
        par::map_slice(&bases, |&(z, s)| Slice { z_shell: s, domain: fit_slice(f, z, cfg) });
    let samples = draw_samples(&slices, cfg)?;
    Ok((slices, samples))
}

fn draw_samples(slices: &[Slice], cfg: &ExperimentConfig) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for n in 0..=cfg.max_shell {
        let mut rng = shell_rng(cfg.seed, 2, n);
        let mut pools: Vec<(usize, Vec<usize>)> = slices
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let g = &s.domain.grid;
                (k, (0..g.cells.len()).filter(|&i| g.is_basin(i) && g.times[i] == n).collect::<Vec<_>>())
            })
            .filter(|(_, cells)| !cells.is_empty())
            .collect();
        if pools.is_empty() {
            return Err(Error::ShellEmpty(n));
        }
        for (_, cells) in pools.iter_mut() {
            cells.shuffle(&mut rng);
        }
        let mut taken = 0;
        let mut round = 0;
        while taken < cfg.samples_per_shell {
            let mut progressed = false;
            for (k, cells) in &pools {
                if taken == cfg.samples_per_shell {
                    break;
                }
                if let Some(&cell) = cells.get(round) {
                    let s = &slices[*k];
                    samples.push(Sample {
                        id: samples.len(),
                        shell: n,
                        slice: *k,
                        z: s.domain.z,
                        w: s.domain.grid.spec.cell_center(cell),
                    });
                    taken += 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
            round += 1;
        }
    }
    Ok(samples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: usize,
    pub shell: u32,
    pub z: C64,
    pub w: C64,
    pub node: Option<(C64, C64)>,
    pub preimage_depth: Option<u32>,
    pub node_residual: f64,
    /// Chain bound at the largest depth; NaN when unresolved.
    pub chain_upper: f64,
    pub upper_by_depth: Vec<f64>,
    pub proj_lower: f64,
    pub method: String,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSummary {
    pub shell: u32,
    pub count: usize,
    pub resolved: usize,
    pub max_upper: f64,
    pub max_lower: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Bounded,
    Growing,
    Indeterminate,
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trend::Bounded => "bounded",
            Trend::Growing => "growing",
            Trend::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub slope: f64,
    pub trend: Trend,
    /// Max over shells divided by the median shell max.
    pub max_over_median: f64,
}

/// Least-squares slope over the last shells, classified by the disclosed
/// thresholds.
pub fn plateau(maxima: &[(u32, f64)]) -> Plateau {
    let finite: Vec<(f64, f64)> = maxima.iter().filter(|(_, v)| v.is_finite()).map(|&(n, v)| (n as f64, v)).collect();
    let window = &finite[finite.len().saturating_sub(PLATEAU_WINDOW)..];
    let slope = if window.len() < 2 {
        f64::NAN
    } else {
        let m = window.len() as f64;
        let (sx, sy) = window.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let (num, den) = window
            .iter()
            .fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
        num / den
    };
    let trend = if slope < BOUNDED_SLOPE {
        Trend::Bounded
    } else if slope > GROWING_SLOPE {
        Trend::Growing
    } else {
        Trend::Indeterminate
    };
    let mut vals: Vec<f64> = finite.iter().map(|p| p.1).collect();
    vals.sort_by(f64::total_cmp);
    let max_over_median = match vals.len() {
        0 => f64::NAN,
        k => {
            let med = if k % 2 == 1 { vals[k / 2] } else { 0.5 * (vals[k / 2 - 1] + vals[k / 2]) };
            vals[k - 1] / med
        }
    };
    Plateau { slope, trend, max_over_median }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub map: String,
    pub map_hash: String,
    pub mode: String,
    pub seed: u64,
    pub depths: Vec<u32>,
    pub depth_used: u32,
    pub tree_nodes: usize,
    pub graphs: usize,
    pub graph_failures: usize,
    pub slices: usize,
    pub shells: Vec<ShellSummary>,
    /// Max chain bound over resolved samples at the largest depth.
    pub c_empirical: f64,
    /// Per depth, max over samples resolved at every depth.
    pub c_by_depth: Vec<(u32, f64)>,
    pub upper_plateau: Plateau,
    pub lower_plateau: Plateau,
    /// Growing when the certified lower bounds grow, else the upper trend.
    pub trend: Trend,
    pub unresolved: usize,
    pub unresolved_fraction: f64,
    pub samples: Vec<SampleRecord>,
}

impl ExperimentReport {
    /// The run fails when more than 5% of samples are unresolved.
    pub fn ensure_resolved(&self) -> Result<()> {
        if self.unresolved_fraction > MAX_UNRESOLVED {
            return Err(Error::TooManyUnresolved { fraction: 100.0 * self.unresolved_fraction });
        }
        Ok(())
    }

    pub fn is_monotone_in_depth(&self) -> bool {
        self.c_by_depth.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12)
    }

    /// CSV with a leading comment line carrying `tag` (e.g. a config hash).
    pub fn to_csv(&self, tag: &str) -> String {
        let mut out = String::new();
        if !tag.is_empty() {
            let _ = writeln!(out, "# {tag}");
        }
        out.push_str("sample_id,shell_n,z_re,z_im,w_re,w_im,preimage_depth,chain_upper,proj_lower,method,status\n");
        for r in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.9e},{:.9e},{},{}",
                r.id,
                r.shell,
                r.z.re,
                r.z.im,
                r.w.re,
                r.w.im,
                r.preimage_depth.map_or(String::new(), |d| d.to_string()),
                r.chain_upper,
                r.proj_lower,
                r.method,
                r.status
            );
        }
        out
    }

    /// Short human summary.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "map: {} [{}]", self.map, self.map_hash);
        let _ = writeln!(s, "mode: {}  seed: {}  depth: {}  tree nodes: {}  graphs: {} ({} failed)", self.mode, self.seed, self.depth_used, self.tree_nodes, self.graphs, self.graph_failures);
        let _ = writeln!(s, "shell  count  resolved  max_upper    max_lower");
        for sh in &self.shells {
            let _ = writeln!(s, "{:>5}  {:>5}  {:>8}  {:>10.6}  {:>10.6}", sh.shell, sh.count, sh.resolved, sh.max_upper, sh.max_lower);
        }
        let _ = writeln!(s, "C_empirical = {:.6}", self.c_empirical);
        for (k, c) in &self.c_by_depth {
            let _ = writeln!(s, "  depth {k}: {c:.6}");
        }
        let _ = writeln!(
            s,
            "upper trend: {} (slope {:.4}, max/median {:.3}); lower trend: {} (slope {:.4})",
            self.upper_plateau.trend, self.upper_plateau.slope, self.upper_plateau.max_over_median, self.lower_plateau.trend, self.lower_plateau.slope
        );
        let _ = writeln!(s, "trend: {}", self.trend);
        let _ = writeln!(s, "unresolved: {} ({:.2}%)", self.unresolved, 100.0 * self.unresolved_fraction);
        s
    }
}

/// Lower bounds on `d_U(z, z*)` through the U raster, cached per target cell.
struct ProjectionOracle {
    field: DensityField,
    rho: f64,
    runs: BTreeMap<usize, Vec<f64>>,
}

impl ProjectionOracle {
    fn new(f: &SkewProduct, u: &GridDomain, targets: &[C64]) -> Self {
        let field = DensityField::for_basin(u).refined();
        let cells: BTreeSet<usize> = targets
            .iter()
            .filter_map(|&t| field.spec.cell_of(t).filter(|&c| field.inside[c]))
            .collect();
        let cells: Vec<usize> = cells.into_iter().collect();
        let runs = if field.simply_connected {
            let dists = par::map_slice(&cells, |&c| dijkstra(&field.spec, &field.inside, &field.lower, &[(c, 0.0)], None).dist);
            cells.into_iter().zip(dists).collect()
        } else {
            BTreeMap::new()
        };
        Self { field, rho: f.escape.p_bound * (1.0 + 1e-12), runs }
    }

    fn lower(&self, z: C64, target: C64) -> f64 {
        if z == target {
            return 0.0;
        }
        let mut best = if z.norm() < self.rho && target.norm() < self.rho { disc_distance_radius(z, target, self.rho) } else { 0.0 };
        let spec = &self.field.spec;
        if let (Some(zc), Some(tc)) = (spec.cell_of(z), spec.cell_of(target)) {
            if let Some(d) = self.runs.get(&tc) {
                if self.field.inside[zc] && d[zc].is_finite() {
                    let lo = self.field.lower[zc];
                    let lt = self.field.lower[tc];
                    let off = (z - spec.cell_center(zc)).norm() * lo + (target - spec.cell_center(tc)).norm() * lt;
                    best = best.max(d[zc] / ANISOTROPY - off);
                }
            }
        }
        best.max(0.0)
    }
}

/// The two-dimensional harness: samples, chain bounds at every depth,
/// projection lower bounds, shell maxima and the plateau trend.
pub fn estimate_c(f: &SkewProduct, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let k_max = cfg.k_max();
    let mut depths = cfg.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let u = u_grid(f, cfg)?;
    let tree = preimage_tree(
        f,
        k_max,
        TreeOptions { root_tol: cfg.root_tol, max_nodes: cfg.max_nodes, ..Default::default() },
    )?;
    let series = stable_manifold_series(f, cfg.series_order)?;
    let graphs = GraphFamily::build(f, series, &tree, cfg.graph_resolution, cfg.branch_tol);
    let origin = if graphs.series.exact_zero {
        u.label_at(C64::new(0.0, 0.0)).and_then(|l| OriginDistances::new(DensityField::for_component(&u, l)))
    } else {
        None
    };
    let opts = ChainOptions {
        eps_attract: cfg.eps_attract,
        max_iter: cfg.max_iter,
        branch_tol: cfg.branch_tol,
        max_levels: cfg.max_levels,
        lift_steps: cfg.lift_steps,
    };
    let ctx = ChainContext::new(f, &tree, &graphs, origin.as_ref(), opts);
    let (slices, samples) = if cfg.samples_per_shell == 0 {
        (Vec::new(), Vec::new())
    } else {
        let bases = choose_slices(f, &u, cfg);
        let slices: Vec<Slice> = par::map_slice(&bases, |&(z, s)| Slice { z_shell: s, domain: fit_slice(f, z, cfg) });
        let samples = draw_samples(&slices, cfg)?;
        (slices, samples)
    };

    let mut by_slice: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in &samples {
        by_slice.entry(s.slice).or_default().push(s.id);
    }
    let jobs: Vec<(usize, Vec<usize>)> = by_slice.into_iter().collect();
    let solved = par::map_slice(&jobs, |(k, ids)| {
        let ws: Vec<C64> = ids.iter().map(|&i| samples[i].w).collect();
        let mut batch = SliceChainBatch::new(&ctx, &slices[*k].domain, &ws);
        depths.iter().map(|&d| batch.solve(d)).collect::<Vec<_>>()
    });
    // results[sample][depth index]
    let mut results: Vec<Vec<Option<std::result::Result<crate::hyperbolic::ChainResult, Error>>>> =
        vec![vec![None; depths.len()]; samples.len()];
    for ((_, ids), per_depth) in jobs.iter().zip(solved) {
        for (di, rs) in per_depth.into_iter().enumerate() {
            for (&id, r) in ids.iter().zip(rs) {
                results[id][di] = Some(r);
            }
        }
    }

    let targets: Vec<C64> = results
        .iter()
        .filter_map(|r| r.last().and_then(|x| x.as_ref()).and_then(|x| x.as_ref().ok()).map(|c| c.node.0))
        .collect();
    let oracle = ProjectionOracle::new(f, &u, &targets);

    let last = depths.len() - 1;
    let records: Vec<SampleRecord> = samples
        .iter()
        .map(|s| {
            let rs = &results[s.id];
            let upper_by_depth: Vec<f64> = rs
                .iter()
                .map(|r| match r {
                    Some(Ok(c)) => c.upper,
                    _ => f64::NAN,
                })
                .collect();
            match rs[last].as_ref() {
                Some(Ok(c)) => {
                    let residual = forward_to_origin(f, c.node.0, c.node.1, c.node_depth);
                    let ok = residual <= 1e-6 * c.node_depth.max(1) as f64;
                    SampleRecord {
                        id: s.id,
                        shell: s.shell,
                        z: s.z,
                        w: s.w,
                        node: Some(c.node),
                        preimage_depth: Some(c.node_depth),
                        node_residual: residual,
                        chain_upper: if ok { c.upper } else { f64::NAN },
                        upper_by_depth,
                        proj_lower: oracle.lower(s.z, c.node.0),
                        method: "chain".into(),
                        status: if !ok {
                            "node-residual".into()
                        } else if c.upper == 0.0 {
                            "tree-node".into()
                        } else {
                            "ok".into()
                        },
                    }
                }
                other => SampleRecord {
                    id: s.id,
                    shell: s.shell,
                    z: s.z,
                    w: s.w,
                    node: None,
                    preimage_depth: None,
                    node_residual: f64::NAN,
                    chain_upper: f64::NAN,
                    upper_by_depth,
                    proj_lower: f64::NAN,
                    method: "chain".into(),
                    status: match other {
                        Some(Err(Error::NoGraphReachable(_))) => "no-graph".into(),
                        Some(Err(Error::OutOfDomain(_))) => "out-of-domain".into(),
                        _ => "error".into(),
                    },
                },
            }
        })
        .collect();

    let mut report = assemble(f, cfg, "skew", records, &depths);
    report.tree_nodes = tree.len();
    report.graphs = graphs.graphs.len();
    report.graph_failures = graphs.failures.len();
    report.slices = slices.len();
    Ok(report)
}

fn assemble(f: &SkewProduct, cfg: &ExperimentConfig, mode: &str, samples: Vec<SampleRecord>, depths: &[u32]) -> ExperimentReport {
    let resolved = |r: &SampleRecord| r.chain_upper.is_finite();
    let mut shells = Vec::new();
    for n in 0..=cfg.max_shell {
        let rs: Vec<&SampleRecord> = samples.iter().filter(|r| r.shell == n).collect();
        if rs.is_empty() {
            continue;
        }
        let ok: Vec<&&SampleRecord> = rs.iter().filter(|r| resolved(r)).collect();
        shells.push(ShellSummary {
            shell: n,
            count: rs.len(),
            resolved: ok.len(),
            max_upper: ok.iter().map(|r| r.chain_upper).fold(f64::NAN, f64::max),
            max_lower: rs.iter().map(|r| r.proj_lower).filter(|v| v.is_finite()).fold(f64::NAN, f64::max),
        });
    }
    let c_empirical = samples.iter().filter(|r| resolved(r)).map(|r| r.chain_upper).fold(f64::NAN, f64::max);
    let common: Vec<&SampleRecord> = samples.iter().filter(|r| r.upper_by_depth.iter().all(|v| v.is_finite())).collect();
    let c_by_depth = depths
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, common.iter().map(|r| r.upper_by_depth[i]).fold(f64::NAN, f64::max)))
        .collect();
    let upper_plateau = plateau(&shells.iter().map(|s| (s.shell, s.max_upper)).collect::<Vec<_>>());
    let lower_plateau = plateau(&shells.iter().map(|s| (s.shell, s.max_lower)).collect::<Vec<_>>());
    let trend = if lower_plateau.trend == Trend::Growing { Trend::Growing } else { upper_plateau.trend };
    let unresolved = samples.iter().filter(|r| !resolved(r)).count();
    let unresolved_fraction = if samples.is_empty() { 0.0 } else { unresolved as f64 / samples.len() as f64 };
    ExperimentReport {
        map: f.describe(),
        map_hash: f.hash_hex(),
        mode: mode.into(),
        seed: cfg.seed,
        depths: depths.to_vec(),
        depth_used: depths.last().copied().unwrap_or(0),
        tree_nodes: 0,
        graphs: 0,
        graph_failures: 0,
        slices: 0,
        shells,
        c_empirical,
        c_by_depth,
        upper_plateau,
        lower_plateau,
        trend,
        unresolved,
        unresolved_fraction,
        samples,
    }
}

/// Preimages of 0 under P up to depth `k`, deduplicated, with their depths.
pub fn p_preimages(p: &ComplexPoly, k: u32, tol: f64) -> Result<Vec<(C64, u32)>> {
    let mut out = vec![(C64::new(0.0, 0.0), 0u32)];
    let mut frontier = vec![C64::new(0.0, 0.0)];
    for depth in 1..=k {
        let mut next = Vec::new();
        for t in &frontier {
            for z in roots(&p.shifted(t), tol)? {
                if out.iter().all(|(q, _)| (q - z).norm() >= 1e-9) {
                    out.push((z, depth));
                    next.push(z);
                }
            }
        }
        frontier = next;
    }
    Ok(out)
}

/// One-variable harness for P alone: raster distances in U from shell
/// samples to the preimage set of 0.
pub fn estimate_c_1d(f: &SkewProduct, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut depths = cfg.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let u = u_grid(f, cfg)?;
    let field = DensityField::for_basin(&u);
    let pre = p_preimages(&f.p, cfg.k_max(), cfg.root_tol)?;
    let runs: Vec<_> = depths
        .iter()
        .map(|&d| {
            let sources: Vec<(usize, f64)> = pre
                .iter()
                .filter(|(_, k)| *k <= d)
                .filter_map(|&(z, _)| {
                    let c = field.spec.cell_of(z).filter(|&c| field.inside[c])?;
                    Some((c, (z - field.spec.cell_center(c)).norm() * field.upper[c]))
                })
                .collect();
            let run = dijkstra(&field.spec, &field.inside, &field.upper, &sources, None);
            (sources, run)
        })
        .collect();
    let mut records = Vec::new();
    for n in 0..=cfg.max_shell {
        let mut cells: Vec<usize> = (0..u.cells.len()).filter(|&i| u.is_basin(i) && u.times[i] == n).collect();
        if cells.is_empty() {
            return Err(Error::ShellEmpty(n));
        }
        let mut rng = shell_rng(cfg.seed, 3, n);
        cells.shuffle(&mut rng);
        for &cell in cells.iter().take(cfg.samples_per_shell) {
            let z = u.spec.cell_center(cell);
            let upper_by_depth: Vec<f64> = runs.iter().map(|(_, r)| r.dist[cell]).collect();
            let (sources, run) = runs.last().expect("at least one depth");
            let src = run.source[cell];
            let (node, depth) = if src == u32::MAX {
                (None, None)
            } else {
                let cell_src = sources[src as usize].0;
                let found = pre.iter().find(|(p, k)| *k <= cfg.k_max() && field.spec.cell_of(*p) == Some(cell_src));
                (found.map(|&(p, _)| (p, C64::new(0.0, 0.0))), found.map(|&(_, k)| k))
            };
            let upper = run.dist[cell];
            let rho = f.escape.p_bound * (1.0 + 1e-12);
            let lower = node.map_or(f64::NAN, |(p, _)| disc_distance_radius(z, p, rho));
            records.push(SampleRecord {
                id: records.len(),
                shell: n,
                z,
                w: C64::new(0.0, 0.0),
                node,
                preimage_depth: depth,
                node_residual: node.map_or(f64::NAN, |(p, _)| {
                    let mut x = p;
                    for _ in 0..depth.unwrap_or(0) {
                        x = f.eval_p(x);
                    }
                    x.norm()
                }),
                chain_upper: if upper.is_finite() { upper } else { f64::NAN },
                upper_by_depth,
                proj_lower: lower,
                method: "slice-graph".into(),
                status: if upper.is_finite() { "ok".into() } else { "no-preimage".into() },
            });
        }
    }
    let mut report = assemble(f, cfg, "1d", records, &depths);
    report.tree_nodes = pre.len();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            depths: vec![2, 3],
            u_resolution: 128,
            slice_resolution: 128,
            coarse_resolution: 64,
            samples_per_shell: 6,
            max_shell: 4,
            slices_per_shell: 2,
            ..Default::default()
        }
    }

    #[test]
    fn plateau_thresholds() {
        let flat: Vec<(u32, f64)> = (0..10).map(|n| (n, 2.0 + 0.01 * (n % 2) as f64)).collect();
        assert_eq!(plateau(&flat).trend, Trend::Bounded);
        let up: Vec<(u32, f64)> = (0..10).map(|n| (n, 0.5 * n as f64)).collect();
        let p = plateau(&up);
        assert_eq!(p.trend, Trend::Growing);
        assert!((p.slope - 0.5).abs() < 1e-12);
        let mid: Vec<(u32, f64)> = (0..10).map(|n| (n, 0.1 * n as f64)).collect();
        assert_eq!(plateau(&mid).trend, Trend::Indeterminate);
    }

    #[test]
    fn zero_samples_is_empty() {
        let cfg = ExperimentConfig { samples_per_shell: 0, ..small_cfg() };
        let (slices, samples) = sample_basin(&SkewProduct::example(10.0), &cfg).unwrap();
        assert!(slices.is_empty() && samples.is_empty());
    }

    #[test]
    fn samples_match_their_shell() {
        let f = SkewProduct::example(10.0);
        let cfg = small_cfg();
        let (_, samples) = sample_basin(&f, &cfg).unwrap();
        assert!(!samples.is_empty());
        for s in &samples {
            let c = crate::dynamics::classify_point(&f, s.z, s.w, cfg.eps_attract, cfg.max_iter);
            assert_eq!(c, Classification::Basin(s.shell));
        }
    }

    #[test]
    fn product_map_shells_are_annuli() {
        // joint shell n: max(|z|, |w|)^(2^n) < 1/2 first at step n
        let f = SkewProduct::product();
        let cfg = ExperimentConfig { eps_attract: 0.5, max_iter: 100, ..small_cfg() };
        let (_, samples) = sample_basin(&f, &cfg).unwrap();
        for s in &samples {
            let r = s.z.norm().max(s.w.norm());
            let n = s.shell as i32;
            assert!(r.powf(2f64.powi(n)) < 0.5);
            if n > 0 {
                assert!(r.powf(2f64.powi(n - 1)) >= 0.5);
            }
        }
        let counts: Vec<usize> = (0..=cfg.max_shell).map(|n| samples.iter().filter(|s| s.shell == n).count()).collect();
        assert!(counts.iter().all(|&c| c >= cfg.samples_per_shell * 4 / 5), "{counts:?}");
    }

    #[test]
    fn small_experiment_is_deterministic_and_monotone() {
        let f = SkewProduct::example(10.0);
        let cfg = small_cfg();
        let a = estimate_c(&f, &cfg).unwrap();
        let b = estimate_c(&f, &cfg).unwrap();
        assert_eq!(a.to_csv("x"), b.to_csv("x"));
        assert!(a.is_monotone_in_depth(), "{:?}", a.c_by_depth);
        for r in &a.samples {
            if r.chain_upper.is_finite() {
                assert!(r.chain_upper + 1e-9 >= r.proj_lower, "{r:?}");
            }
        }
        a.ensure_resolved().unwrap();
    }

    #[test]
    fn one_dimensional_mode_runs() {
        let f = SkewProduct::example(10.0);
        let r = estimate_c_1d(&f, &small_cfg()).unwrap();
        assert!(r.c_empirical.is_finite());
        assert!(r.is_monotone_in_depth());
        assert_eq!(r.unresolved, 0);
    }

    #[test]
    fn p_preimages_counts() {
        let p = ComplexPoly::from_real(&[0.0, 0.25, 1.0]);
        let pre = p_preimages(&p, 3, 1e-12).unwrap();
        assert_eq!(pre.len(), 1 + 1 + 2 + 4);
        assert!(pre.iter().any(|(z, k)| *k == 1 && (z - C64::new(-0.25, 0.0)).norm() < 1e-12));
    }
}
