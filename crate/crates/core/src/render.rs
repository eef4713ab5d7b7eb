//! Raster output: grayscale data grids and overlay pictures.
//!
//! Both are binary netpbm files with an optional header comment, so the
//! bytes depend only on the inputs.

use crate::dynamics::{CellClass, GridDomain, GridSpec};
use crate::poly::C64;

pub type Rgb = [u8; 3];

pub const RED: Rgb = [220, 30, 30];
pub const BLUE: Rgb = [30, 80, 220];
pub const GREEN: Rgb = [20, 160, 60];

/// Points or a polyline drawn over a mask.
#[derive(Clone, Debug, PartialEq)]
pub enum Overlay {
    /// Small crosses at each point.
    Markers { points: Vec<C64>, color: Rgb },
    /// Connected line through the points.
    Path { points: Vec<C64>, color: Rgb },
}

fn header(magic: &str, comment: Option<&str>, res: usize, maxval: bool) -> Vec<u8> {
    let mut out = format!("{magic}\n");
    for line in comment.into_iter().flat_map(str::lines) {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&format!("{res} {res}\n"));
    if maxval {
        out.push_str("255\n");
    }
    out.into_bytes()
}

/// Data raster: one byte per cell, 0 escaped, 255 basin, 128 undecided.
pub fn grid_pgm(grid: &GridDomain, comment: Option<&str>) -> Vec<u8> {
    let mut out = header("P5", comment, grid.spec.resolution, true);
    out.extend(grid.cells.iter().map(|c| match c {
        CellClass::Escaped => 0u8,
        CellClass::Basin => 255,
        CellClass::Undecided => 128,
    }));
    out
}

/// Reads back a raster written by [`grid_pgm`]: resolution and cell bytes.
pub fn parse_pgm(bytes: &[u8]) -> Option<(usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        if bytes[pos] == b'#' {
            while *bytes.get(pos)? != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while !bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?.to_string());
    }
    let (w, h): (usize, usize) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
    if fields[0] != "P5" || w != h {
        return None;
    }
    let data = bytes.get(pos + 1..pos + 1 + w * h)?;
    Some((w, data.to_vec()))
}

/// Picture of the mask (basin black, escaped white, undecided grey) with
/// overlays on top.
pub fn render_ppm(grid: &GridDomain, overlays: &[Overlay], comment: Option<&str>) -> Vec<u8> {
    let spec = grid.spec;
    let mut pixels: Vec<Rgb> = grid
        .cells
        .iter()
        .map(|c| match c {
            CellClass::Basin => [0, 0, 0],
            CellClass::Escaped => [255, 255, 255],
            CellClass::Undecided => [128, 128, 128],
        })
        .collect();
    for overlay in overlays {
        match overlay {
            Overlay::Markers { points, color } => {
                for &p in points {
                    if let Some(pix) = pixel(&spec, p) {
                        draw_cross(&mut pixels, spec.resolution, pix, *color);
                    }
                }
            }
            Overlay::Path { points, color } => {
                for seg in points.windows(2) {
                    draw_segment(&mut pixels, &spec, seg[0], seg[1], *color);
                }
            }
        }
    }
    let mut out = header("P6", comment, spec.resolution, true);
    out.extend(pixels.iter().flatten());
    out
}

fn pixel(spec: &GridSpec, p: C64) -> Option<(i64, i64)> {
    spec.cell_of(p).map(|i| {
        let (c, r) = spec.col_row(i);
        (c as i64, r as i64)
    })
}

fn put(pixels: &mut [Rgb], res: usize, (c, r): (i64, i64), color: Rgb) {
    if c >= 0 && r >= 0 && (c as usize) < res && (r as usize) < res {
        pixels[r as usize * res + c as usize] = color;
    }
}

fn draw_cross(pixels: &mut [Rgb], res: usize, (c, r): (i64, i64), color: Rgb) {
    let arm = (res / 256).max(1) as i64;
    for d in -arm..=arm {
        put(pixels, res, (c + d, r), color);
        put(pixels, res, (c, r + d), color);
    }
}

fn draw_segment(pixels: &mut [Rgb], spec: &GridSpec, a: C64, b: C64, color: Rgb) {
    let steps = (((b - a).norm() / spec.dx().min(spec.dy())).ceil() as usize).max(1) * 2;
    for s in 0..=steps {
        let p = a + (b - a) * (s as f64 / steps as f64);
        if let Some(pix) = pixel(spec, p) {
            put(pixels, spec.resolution, pix, color);
        }
    }
}

/// Overlay points whose cell is not Basin.
pub fn markers_outside(grid: &GridDomain, points: &[C64]) -> Vec<C64> {
    points
        .iter()
        .copied()
        .filter(|&p| !grid.spec.cell_of(p).is_some_and(|i| grid.is_basin(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::basin_grid_slice;
    use crate::preimage::{preimage_tree, TreeOptions};
    use crate::SkewProduct;

    fn unit_disc(res: usize) -> GridDomain {
        let spec = GridSpec::square(C64::new(0.0, 0.0), 1.25, res);
        let mask: Vec<bool> = (0..spec.len()).map(|i| spec.cell_center(i).norm() < 1.0).collect();
        GridDomain::from_mask(spec, &mask)
    }

    #[test]
    fn disc_renders_black_on_white_deterministically() {
        let g = unit_disc(64);
        let a = render_ppm(&g, &[], Some("hash abc"));
        let b = render_ppm(&g, &[], Some("hash abc"));
        assert_eq!(a, b);
        let body = &a[a.len() - 64 * 64 * 3..];
        let center = (32 * 64 + 32) * 3;
        assert_eq!(&body[center..center + 3], &[0, 0, 0]);
        assert_eq!(&body[0..3], &[255, 255, 255]);
    }

    #[test]
    fn empty_overlay_is_plain_mask() {
        let g = unit_disc(64);
        let plain = render_ppm(&g, &[], None);
        let empty = render_ppm(&g, &[Overlay::Markers { points: vec![], color: RED }], None);
        assert_eq!(plain, empty);
    }

    #[test]
    fn pgm_round_trips() {
        let g = unit_disc(64);
        let bytes = grid_pgm(&g, Some("config abc\nsecond line"));
        let (res, data) = parse_pgm(&bytes).unwrap();
        assert_eq!(res, 64);
        assert_eq!(data[32 * 64 + 32], 255);
        assert_eq!(data[0], 0);
    }

    #[test]
    fn fiber_preimages_sit_inside_the_slice() {
        let f = SkewProduct::example(10.0);
        let tree = preimage_tree(&f, 6, TreeOptions::default()).unwrap();
        let slice = basin_grid_slice(&f, C64::new(0.0, 0.0), GridSpec::square(C64::new(-0.25, 0.0), 1.2, 256), 0.02, 500);
        let pts: Vec<C64> = tree.fiber_anchors(1e-12).iter().map(|&i| tree.nodes[i].w).collect();
        assert!(pts.len() > 6);
        assert!(markers_outside(&slice.grid, &pts).is_empty());
        let overlay = [Overlay::Markers { points: pts, color: RED }];
        assert_eq!(render_ppm(&slice.grid, &overlay, None), render_ppm(&slice.grid, &overlay, None));
    }
}
