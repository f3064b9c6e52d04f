//! Explored-fraction-versus-distance plots as PNG.

use std::path::Path;

use anyhow::Result;
use image::{Rgb, RgbImage};
use imageproc::drawing::draw_line_segment_mut;

const W: u32 = 800;
const H: u32 = 500;
const MARGIN: f32 = 40.0;
const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
];

/// One series per group; each group may hold several curves of `(distance, explored)`.
pub fn render(groups: &[Vec<&[(f64, f64)]>]) -> RgbImage {
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let max_d = groups
        .iter()
        .flatten()
        .flat_map(|c| c.iter().map(|p| p.0))
        .fold(1.0, f64::max);
    let (x0, y0) = (MARGIN, H as f32 - MARGIN);
    let (x1, y1) = (W as f32 - MARGIN, MARGIN);
    let axis = Rgb([0, 0, 0]);
    draw_line_segment_mut(&mut img, (x0, y0), (x1, y0), axis);
    draw_line_segment_mut(&mut img, (x0, y0), (x0, y1), axis);
    let grid = Rgb([225, 225, 225]);
    for k in 1..=4 {
        let y = y0 - (y0 - y1) * k as f32 / 4.0;
        draw_line_segment_mut(&mut img, (x0 + 1.0, y), (x1, y), grid);
    }
    let map = |p: (f64, f64)| {
        (
            x0 + (x1 - x0) * (p.0 / max_d) as f32,
            y0 - (y0 - y1) * p.1.clamp(0.0, 1.0) as f32,
        )
    };
    for (g, curves) in groups.iter().enumerate() {
        let color = Rgb(PALETTE[g % PALETTE.len()]);
        for c in curves {
            for w in c.windows(2) {
                draw_line_segment_mut(&mut img, map(w[0]), map(w[1]), color);
            }
        }
    }
    img
}

pub fn save(groups: &[Vec<&[(f64, f64)]>], path: &Path) -> Result<()> {
    render(groups).save(path)?;
    Ok(())
}
