//! Browser bindings: slice pictures, hyperbolic distance heat maps and the
//! exact check of the worked example.

use num_rational::BigRational;
use skewlab::class_a::verify_example_bounds;
use skewlab::dynamics::{CellClass, SliceDomain};
use skewlab::experiments::{fit_slice, ExperimentConfig};
use skewlab::hyperbolic::{dijkstra, DensityField};
use skewlab::{SkewProduct, C64};
use wasm_bindgen::prelude::*;

/// The map `(z^2 + z/4, w^2 + w/2 + L z^2)` and the slice last drawn.
#[wasm_bindgen]
pub struct Demo {
    f: SkewProduct,
    slice: Option<SliceDomain>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(l: f64) -> Demo {
        Demo { f: SkewProduct::example(l), slice: None }
    }

    /// RGBA picture of the slice over `z`, shaded by entry time.
    pub fn slice_image(&mut self, z_re: f64, z_im: f64, resolution: usize) -> Vec<u8> {
        let cfg = ExperimentConfig {
            slice_resolution: resolution.next_power_of_two().clamp(64, 512),
            coarse_resolution: 64,
            max_iter: 300,
            ..Default::default()
        };
        let slice = fit_slice(&self.f, C64::new(z_re, z_im), &cfg);
        let g = &slice.grid;
        let max_t = (0..g.cells.len()).filter(|&i| g.is_basin(i)).map(|i| g.times[i]).max().unwrap_or(1).max(1) as f64;
        let mut rgba = Vec::with_capacity(4 * g.cells.len());
        for (i, c) in g.cells.iter().enumerate() {
            let px = match c {
                CellClass::Basin => {
                    let t = g.times[i] as f64 / max_t;
                    [(20.0 + 200.0 * t) as u8, (40.0 + 120.0 * (1.0 - t)) as u8, 160, 255]
                }
                CellClass::Escaped => [250, 250, 250, 255],
                CellClass::Undecided => [128, 128, 128, 255],
            };
            rgba.extend_from_slice(&px);
        }
        self.slice = Some(slice);
        rgba
    }

    /// `[center_re, center_im, half_width, resolution]` of the slice last drawn.
    pub fn slice_box(&self) -> Vec<f64> {
        self.slice.as_ref().map_or_else(Vec::new, |s| {
            let sp = s.grid.spec;
            vec![sp.center.re, sp.center.im, sp.half_width, sp.resolution as f64]
        })
    }

    /// Heat map of the upper hyperbolic distance from `w` within its slice
    /// component. Empty when no slice is drawn or `w` is outside it.
    pub fn distance_image(&self, w_re: f64, w_im: f64) -> Vec<u8> {
        let Some(slice) = &self.slice else { return Vec::new() };
        distance_heat(slice, C64::new(w_re, w_im)).unwrap_or_default()
    }
}

fn distance_heat(slice: &SliceDomain, w: C64) -> Option<Vec<u8>> {
    let field = DensityField::for_basin(&slice.grid);
    let cell = field.spec.cell_of(w).filter(|&c| field.inside[c])?;
    let run = dijkstra(&field.spec, &field.inside, &field.upper, &[(cell, 0.0)], None);
    let mut rgba = Vec::with_capacity(4 * run.dist.len());
    for (i, d) in run.dist.iter().enumerate() {
        let px = if d.is_finite() {
            // bands one nat wide, fading with distance
            let band = (d.fract() * 255.0) as u8;
            let fade = (255.0 * (-d / 4.0).exp()) as u8;
            [fade, band / 2 + 60, 255 - fade / 2, 255]
        } else if slice.grid.is_basin(i) {
            [60, 60, 60, 255]
        } else {
            [250, 250, 250, 255]
        };
        rgba.extend_from_slice(&px);
    }
    Some(rgba)
}

/// Exact check of the two inequalities for rational `L`, `B`, as JSON.
#[wasm_bindgen]
pub fn verify_example(l: &str, b: &str) -> String {
    let parse = |s: &str| s.trim().parse::<BigRational>().map_err(|_| format!("{s:?} is not a rational"));
    let out = parse(l)
        .and_then(|l| parse(b).map(|b| (l, b)))
        .and_then(|(l, b)| verify_example_bounds(&l, &b).map_err(|e| e.to_string()));
    match out {
        Ok(r) => serde_json::json!({
            "l": r.l, "b": r.b,
            "star": r.star, "star_verdict": r.star_verdict,
            "starstar": r.starstar, "starstar_verdict": r.starstar_verdict,
            "overall": r.overall(),
        })
        .to_string(),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}
