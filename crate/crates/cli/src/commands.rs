//! One function per subcommand. Each writes its artifacts plus `report.txt`
//! into the output directory and returns the process exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use skewlab::class_a::{membership, verify_example_bounds, Verdict};
use skewlab::dynamics::{basin_grid_slice, Classification, GridDomain, GridSpec};
use skewlab::experiments::{estimate_c, estimate_c_1d, fit_slice, p_preimages, u_grid, u_spec};
use skewlab::hyperbolic::{
    chain_distance_to_s, polydisc_distance_4d, projection_lower, slice_distance, ChainContext, ChainOptions, DensityField,
    DistanceEstimate, Grid4, Mask4, OriginDistances,
};
use skewlab::preimage::{preimage_tree, GraphFamily, PreimageTree, TreeOptions};
use skewlab::render::{grid_pgm, markers_outside, parse_pgm, render_ppm, Overlay, RED};
use skewlab::stable::stable_manifold_series;
use skewlab::{SkewProduct, C64};

use crate::config::{ConfigError, RunConfig};
use crate::{exit, Command};

struct Run<'a> {
    cfg: &'a RunConfig,
    f: SkewProduct,
    hash: String,
    command: &'static str,
}

impl Run<'_> {
    fn path(&self, name: &str) -> std::path::PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    }

    /// JSON artifact with the config hash as its first field.
    fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<()> {
        let mut v = serde_json::json!({ "config_hash": self.hash, "map_hash": self.f.hash_hex() });
        if let (Some(obj), serde_json::Value::Object(extra)) = (v.as_object_mut(), serde_json::to_value(body)?) {
            obj.extend(extra);
        }
        self.write(name, format!("{}\n", serde_json::to_string_pretty(&v)?))
    }

    fn comment(&self) -> String {
        format!("skewlab {}\nconfig {}\nmap {}", self.command, self.hash, self.f.hash_hex())
    }

    fn report(&self, body: &str) -> Result<()> {
        let text = format!(
            "skewlab {}\nconfig hash: {}\nmap: {} [{}]\n\n{body}",
            self.command,
            self.hash,
            self.f.describe(),
            self.f.hash_hex()
        );
        print!("{body}");
        self.write("report.txt", text)
    }
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<u8> {
    let f = cfg.map.build()?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let run = Run { cfg, f, hash: cfg.hash(), command: command.name() };
    let config_text = format!("# config {}\n{}", run.hash, toml::to_string(cfg)?);
    run.write("config.toml", config_text)?;
    match command {
        Command::Check { u_grid } => check(&run, u_grid.as_deref()),
        Command::Basin => basin(&run),
        Command::Slice => slice(&run),
        Command::Preimages => preimages(&run),
        Command::Stable => stable(&run),
        Command::Distance { u_grid } => distance(&run, u_grid.as_deref()),
        Command::Experiment => experiment(&run),
        Command::VerifyExample => verify_example(&run),
    }
}

#[derive(Serialize, Deserialize)]
struct GridSidecar {
    config_hash: String,
    map_hash: String,
    spec: GridSpec,
    eps: f64,
    max_iter: u32,
    basin_cells: usize,
    components: usize,
    undecided_fraction: f64,
}

fn write_grid(run: &Run, stem: &str, grid: &GridDomain, overlays: &[Overlay]) -> Result<()> {
    let e = &run.cfg.experiment;
    run.write(&format!("{stem}.pgm"), grid_pgm(grid, Some(&run.comment())))?;
    run.write(&format!("{stem}.ppm"), render_ppm(grid, overlays, Some(&run.comment())))?;
    let side = GridSidecar {
        config_hash: run.hash.clone(),
        map_hash: run.f.hash_hex(),
        spec: grid.spec,
        eps: e.eps_attract,
        max_iter: e.max_iter,
        basin_cells: grid.basin_count(),
        components: grid.components.len(),
        undecided_fraction: grid.undecided_fraction(),
    };
    run.write(&format!("{stem}.json"), format!("{}\n", serde_json::to_string_pretty(&side)?))
}

/// Loads a raster written by `basin`, refusing one made under another config.
fn read_grid(run: &Run, path: &Path) -> Result<GridDomain> {
    let side_path = path.with_extension("json");
    let side: GridSidecar = serde_json::from_str(
        &fs::read_to_string(&side_path).with_context(|| format!("reading {}", side_path.display()))?,
    )?;
    if side.config_hash != run.hash {
        return Err(anyhow!(ConfigError(format!(
            "{} was written with config {} but this run uses {}",
            path.display(),
            side.config_hash,
            run.hash
        ))));
    }
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (res, data) = parse_pgm(&bytes).ok_or_else(|| anyhow!("{} is not a grid raster", path.display()))?;
    if res != side.spec.resolution {
        return Err(anyhow!("{}: raster size {res} does not match its sidecar", path.display()));
    }
    let classes: Vec<Classification> = data
        .iter()
        .map(|b| match b {
            255 => Classification::Basin(0),
            0 => Classification::Escaped(0),
            _ => Classification::Undecided,
        })
        .collect();
    Ok(GridDomain::from_classes(side.spec, &classes))
}

fn load_u(run: &Run, path: Option<&Path>) -> Result<GridDomain> {
    match path {
        Some(p) => read_grid(run, p),
        None => Ok(u_grid(&run.f, &run.cfg.experiment)?),
    }
}

fn tree(run: &Run) -> Result<PreimageTree> {
    let e = &run.cfg.experiment;
    Ok(preimage_tree(
        &run.f,
        e.k_max(),
        TreeOptions { root_tol: e.root_tol, merge_tol: run.cfg.merge_tol, max_nodes: e.max_nodes, ..Default::default() },
    )?)
}

fn check(run: &Run, u_path: Option<&Path>) -> Result<u8> {
    let u = load_u(run, u_path)?;
    let (report, cond) = membership(&run.f, &u, &run.cfg.check);
    run.write_json("membership.json", &serde_json::json!({ "report": report, "critical_samples": cond.item1_samples }))?;
    let mut body = report.table();
    if let Some(fail) = report.first_failure() {
        let _ = writeln!(body, "first failure: {}{}", fail.name, fail.witness.as_ref().map_or(String::new(), |w| format!(" ({w})")));
    }
    run.report(&body)?;
    Ok(if report.overall == Verdict::Fail { exit::FAIL_VERDICT } else { exit::OK })
}

fn basin(run: &Run) -> Result<u8> {
    let u = u_grid(&run.f, &run.cfg.experiment)?;
    let pre = p_preimages(&run.f.p, 6, run.cfg.experiment.root_tol)?;
    let points: Vec<C64> = pre.iter().map(|p| p.0).collect();
    write_grid(run, "u_grid", &u, &[Overlay::Markers { points: points.clone(), color: RED }])?;
    let mut body = String::new();
    let _ = writeln!(body, "box: center {} half {} resolution {}", u.spec.center, u.spec.half_width, u.spec.resolution);
    let _ = writeln!(body, "basin cells: {} of {}", u.basin_count(), u.spec.len());
    let _ = writeln!(body, "undecided: {:.4}%", 100.0 * u.undecided_fraction());
    for (i, c) in u.components.iter().enumerate() {
        let _ = writeln!(body, "component {i}: {} cells, {} holes", c.size, c.holes);
    }
    let _ = writeln!(body, "preimages of 0 up to depth 6: {} ({} off the basin raster)", points.len(), markers_outside(&u, &points).len());
    run.report(&body)?;
    Ok(exit::OK)
}

fn slice(run: &Run) -> Result<u8> {
    let s = &run.cfg.slice;
    let e = &run.cfg.experiment;
    let z = C64::new(s.z[0], s.z[1]);
    let domain = if s.half > 0.0 {
        basin_grid_slice(&run.f, z, GridSpec::square(C64::new(s.center[0], s.center[1]), s.half, e.slice_resolution), e.eps_attract, e.max_iter)
    } else {
        fit_slice(&run.f, z, e)
    };
    let t = tree(run)?;
    let points: Vec<C64> = t.nodes.iter().filter(|n| (n.z - z).norm() < run.cfg.merge_tol).map(|n| n.w).collect();
    write_grid(run, "slice", &domain.grid, &[Overlay::Markers { points: points.clone(), color: RED }])?;
    let g = &domain.grid;
    let mut body = String::new();
    let _ = writeln!(body, "slice z = {z}");
    let _ = writeln!(body, "box: center {} half {} resolution {}", g.spec.center, g.spec.half_width, g.spec.resolution);
    let _ = writeln!(body, "basin cells: {}  components: {}  undecided: {:.4}%", g.basin_count(), g.components.len(), 100.0 * g.undecided_fraction());
    let _ = writeln!(body, "backward-orbit points on this slice (depth <= {}): {}", t.depth, points.len());
    let _ = writeln!(body, "of which outside the basin raster: {}", markers_outside(g, &points).len());
    run.report(&body)?;
    Ok(exit::OK)
}

fn preimages(run: &Run) -> Result<u8> {
    let t = tree(run)?;
    let nodes: Vec<_> = t
        .nodes
        .iter()
        .map(|n| {
            serde_json::json!({
                "depth": n.depth, "parent": n.parent,
                "z_re": n.z.re, "z_im": n.z.im, "w_re": n.w.re, "w_im": n.w.im,
                "residual": n.residual,
            })
        })
        .collect();
    run.write_json("preimages.json", &serde_json::json!({ "depth": t.depth, "dropped": t.dropped, "nodes": nodes }))?;
    let mut body = String::new();
    for k in 0..=t.depth {
        let worst = (0..t.len()).filter(|&i| t.nodes[i].depth == k).map(|i| t.forward_residual(&run.f, i)).fold(0.0, f64::max);
        let _ = writeln!(body, "depth {k}: {} nodes, max |F^k(node)| = {worst:.3e}", t.count_at_depth(k));
    }
    let _ = writeln!(body, "total: {} nodes", t.len());
    run.report(&body)?;
    Ok(exit::OK)
}

fn stable(run: &Run) -> Result<u8> {
    let e = &run.cfg.experiment;
    let series = stable_manifold_series(&run.f, e.series_order)?;
    let t = tree(run)?;
    let eps = series.epsilon;
    let inner = series.max_residual_on_circle(&run.f, 0.5 * eps, 256);
    let graphs = GraphFamily::build(&run.f, series.clone(), &t, e.graph_resolution, e.branch_tol);
    let per_graph: Vec<_> = graphs
        .graphs
        .iter()
        .map(|g| {
            serde_json::json!({
                "depth": g.depth, "anchor_re": g.anchor.re, "anchor_im": g.anchor.im,
                "covered": g.covered(), "branch_cells": g.branch_cells.len(),
                "max_residual": (0..g.base.len()).filter_map(|i| g.invariance_residual(&run.f, i)).fold(0.0, f64::max),
            })
        })
        .collect();
    let failures: Vec<_> = graphs.failures.iter().map(|(id, why)| serde_json::json!({ "node": id, "reason": why })).collect();
    run.write_json(
        "stable.json",
        &serde_json::json!({
            "series": series, "residual_half_radius": inner,
            "graphs": per_graph, "failures": failures, "min_separation": graphs.min_separation(),
        }),
    )?;
    let mut body = String::new();
    let _ = writeln!(body, "series order {} radius {eps:.6} (w = 0 invariant: {})", series.order, series.exact_zero);
    for (k, c) in series.coeffs.iter().enumerate().take(6) {
        let _ = writeln!(body, "  c_{k} = {c:.10}");
    }
    let _ = writeln!(body, "max residual on |z| = radius/2: {inner:.3e}");
    let _ = writeln!(body, "graphs continued: {}  failed: {}", graphs.graphs.len(), graphs.failures.len());
    let _ = writeln!(body, "min separation between graphs: {:.3e}", graphs.min_separation());
    run.report(&body)?;
    Ok(exit::OK)
}

fn distance_row(out: &mut String, d: &DistanceEstimate, from: (C64, C64), to: &str) {
    let _ = writeln!(
        out,
        "{},{},{:.9e},{:.9e},{:.12e},{:.12e},{:.12e},{:.12e},{to},\"{}\"",
        d.method, d.resolution, d.lower, d.upper, from.0.re, from.0.im, from.1.re, from.1.im, d.note.replace('"', "'")
    );
}

fn distance(run: &Run, u_path: Option<&Path>) -> Result<u8> {
    let f = &run.f;
    let e = &run.cfg.experiment;
    let dc = &run.cfg.distance;
    let p = (C64::new(dc.from[0], dc.from[1]), C64::new(dc.from[2], dc.from[3]));
    let q = (C64::new(dc.to[0], dc.to[1]), C64::new(dc.to[2], dc.to[3]));
    let target = format!("{:.12e} {:.12e} {:.12e} {:.12e}", q.0.re, q.0.im, q.1.re, q.1.im);
    let mut csv = format!("# config {}\nmethod,resolution,lower,upper,from_z_re,from_z_im,from_w_re,from_w_im,to,note\n", run.hash);
    let mut body = String::new();
    let record = |csv: &mut String, body: &mut String, d: Result<DistanceEstimate, skewlab::Error>, from, to: &str| match d {
        Ok(d) => {
            distance_row(csv, &d, from, to);
            let _ = writeln!(body, "{:<12} to {to}: lower {:.6} upper {:.6}", d.method.to_string(), d.lower, d.upper);
        }
        Err(err) => {
            let _ = writeln!(body, "unavailable ({to}): {err}");
        }
    };

    let u = load_u(run, u_path)?;
    let u_field = DensityField::for_basin(&u);
    record(&mut csv, &mut body, projection_lower(f, p, q, Some(&u_field)), p, &target);
    if p.0 == q.0 {
        let domain = fit_slice(f, p.0, e);
        let field = DensityField::for_basin(&domain.grid);
        record(&mut csv, &mut body, slice_distance(&field, p.1, q.1), p, &target);
    }
    if dc.grid4_resolution > 0 {
        let r = dc.grid4_resolution;
        let half = f.escape.w_bound * 1.02;
        let grid = Grid4 { z: u_spec(f, r), w: GridSpec::square(C64::new(0.0, 0.0), half, r) };
        let mask = Mask4::classify(f, grid, e.eps_attract, e.max_iter, e.max_nodes)?;
        record(&mut csv, &mut body, polydisc_distance_4d(&mask, p, q), p, &target);
    }

    // distance from each endpoint to the backward orbit S
    let t = tree(run)?;
    let series = stable_manifold_series(f, e.series_order)?;
    let graphs = GraphFamily::build(f, series, &t, e.graph_resolution, e.branch_tol);
    let origin = if graphs.series.exact_zero {
        u.label_at(C64::new(0.0, 0.0)).and_then(|l| OriginDistances::new(DensityField::for_component(&u, l)))
    } else {
        None
    };
    let opts = ChainOptions {
        eps_attract: e.eps_attract,
        max_iter: e.max_iter,
        branch_tol: e.branch_tol,
        max_levels: e.max_levels,
        lift_steps: e.lift_steps,
    };
    let ctx = ChainContext::new(f, &t, &graphs, origin.as_ref(), opts);
    for pt in [p, q] {
        let domain = fit_slice(f, pt.0, e);
        let est = chain_distance_to_s(&ctx, &domain, pt.1).map(|(d, _)| d);
        record(&mut csv, &mut body, est, pt, "S");
    }
    run.write("distance.csv", csv)?;
    run.report(&body)?;
    Ok(exit::OK)
}

fn experiment(run: &Run) -> Result<u8> {
    let e = &run.cfg.experiment;
    let report = if run.cfg.mode == "1d" { estimate_c_1d(&run.f, e)? } else { estimate_c(&run.f, e)? };
    // the base raster the samples were drawn against
    let u = u_grid(&run.f, e)?;
    write_grid(run, "u_grid", &u, &[])?;
    run.write("samples.csv", report.to_csv(&format!("config {}", run.hash)))?;
    let mut summary = report.clone();
    summary.samples.clear();
    run.write_json("summary.json", &serde_json::json!({ "summary": summary, "monotone_in_depth": report.is_monotone_in_depth() }))?;
    let mut body = report.summary_text();
    let _ = writeln!(body, "monotone in depth: {}", report.is_monotone_in_depth());
    run.report(&body)?;
    report.ensure_resolved()?;
    Ok(exit::OK)
}

fn parse_rational(key: &str, s: &str) -> Result<BigRational> {
    s.trim().parse().map_err(|_| anyhow!(ConfigError(format!("{key} = {s:?} is not an exact rational"))))
}

fn verify_example(run: &Run) -> Result<u8> {
    let l = parse_rational("verify.l", &run.cfg.verify.l)?;
    let b = parse_rational("verify.b", &run.cfg.verify.b)?;
    let r = verify_example_bounds(&l, &b)?;
    run.write_json("example.json", &r)?;
    let mut body = String::new();
    let _ = writeln!(body, "L = {}, B = {}", r.l, r.b);
    let _ = writeln!(body, "(*)  B - 1/2 - 25L/(16B) = {} >= 1 : {}", r.star, r.star_verdict);
    let _ = writeln!(body, "(**) 9L/16 - 1/16 = {} > B : {}", r.starstar, r.starstar_verdict);
    let _ = writeln!(body, "overall: {}", r.overall());
    run.report(&body)?;
    Ok(if r.overall() == Verdict::Fail { exit::FAIL_VERDICT } else { exit::OK })
}
