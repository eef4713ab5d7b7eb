use skewlab::dynamics::{basin_grid_1d, basin_grid_slice, CellClass, GridSpec};
use skewlab::experiments::{estimate_c, ExperimentConfig};
use skewlab::hyperbolic::{chain_distance_to_s, disc_distance_radius, ChainContext, ChainOptions, DensityField, OriginDistances};
use skewlab::preimage::{forward_to_origin, preimage_tree, GraphFamily, TreeOptions};
use skewlab::render::{grid_pgm, parse_pgm};
use skewlab::stable::stable_manifold_series;
use skewlab::{SkewProduct, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn chain_bounds_sit_above_the_projection_and_land_on_s() {
    let f = SkewProduct::example(10.0);
    let tree = preimage_tree(&f, 4, TreeOptions::default()).unwrap();
    let graphs = GraphFamily::build(&f, stable_manifold_series(&f, 12).unwrap(), &tree, 33, 1e-4);
    let u = basin_grid_1d(&f.p, GridSpec::square(c(0.0, 0.0), 1.3, 256), 0.02, 300).unwrap();
    let origin = OriginDistances::new(DensityField::for_component(&u, u.label_at(c(0.0, 0.0)).unwrap()));
    let ctx = ChainContext::new(&f, &tree, &graphs, origin.as_ref(), ChainOptions::default());
    let z = c(0.35, 0.1);
    let slice = basin_grid_slice(&f, z, GridSpec::square(c(-0.25, 0.0), 2.5, 128), 0.02, 500);
    let mut checked = 0;
    for cell in (0..slice.grid.spec.len()).step_by(37).filter(|&i| slice.grid.cells[i] == CellClass::Basin) {
        let w = slice.grid.spec.cell_center(cell);
        let Ok((est, res)) = chain_distance_to_s(&ctx, &slice, w) else { continue };
        assert!(forward_to_origin(&f, res.node.0, res.node.1, res.node_depth) < 1e-6 * res.node_depth.max(1) as f64);
        assert!(est.upper + 1e-9 >= disc_distance_radius(z, res.node.0, f.escape.p_bound));
        assert!((est.upper - res.leg1 - res.leg2).abs() < 1e-9);
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} points resolved");
}

#[test]
fn experiment_rasters_round_trip() {
    let f = SkewProduct::example(10.0);
    let cfg = ExperimentConfig { u_resolution: 128, ..Default::default() };
    let u = skewlab::experiments::u_grid(&f, &cfg).unwrap();
    let bytes = grid_pgm(&u, Some("round trip"));
    let (res, data) = parse_pgm(&bytes).unwrap();
    assert_eq!(res, 128);
    for (i, v) in data.iter().enumerate() {
        assert_eq!(*v == 255, u.cells[i] == CellClass::Basin);
    }
}

#[test]
fn product_map_distances_grow_with_the_shell() {
    let f = SkewProduct::product();
    let cfg = ExperimentConfig {
        eps_attract: 0.5,
        depths: vec![2],
        u_resolution: 256,
        slice_resolution: 128,
        coarse_resolution: 64,
        samples_per_shell: 20,
        max_shell: 6,
        slices_per_shell: 2,
        ..Default::default()
    };
    let r = estimate_c(&f, &cfg).unwrap();
    assert_eq!(r.tree_nodes, 1);
    let lowers: Vec<f64> = r.shells.iter().filter(|s| s.shell >= 3).map(|s| s.max_lower).collect();
    assert!(lowers.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{lowers:?}");
    for s in &r.samples {
        if s.chain_upper.is_finite() {
            assert!(s.chain_upper + 1e-9 >= s.proj_lower);
        }
    }
}
