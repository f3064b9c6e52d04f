//! Occupancy grids as binary PGM images plus a JSON sidecar.
//!
//! Pixel values: 0 obstacle, 127 unknown, 255 free. Row 0 of the image is the
//! top of the map (highest y). The sidecar carries resolution and origin.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use explore_core::grid::{Cell, OccupancyGrid, Pose2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

fn pixel(c: Cell) -> u8 {
    match c {
        Cell::Obstacle => 0,
        Cell::Unknown => 127,
        Cell::Free => 255,
    }
}

fn cell(p: u8) -> Cell {
    match p {
        0..=63 => Cell::Obstacle,
        192..=255 => Cell::Free,
        _ => Cell::Unknown,
    }
}

pub fn write_pgm(grid: &OccupancyGrid, mut out: impl Write) -> Result<()> {
    let (w, h) = (grid.width(), grid.height());
    write!(out, "P5\n{w} {h}\n255\n")?;
    let mut row = vec![0u8; w];
    for y in (0..h).rev() {
        for (x, px) in row.iter_mut().enumerate() {
            *px = pixel(grid.cells()[y * w + x]);
        }
        out.write_all(&row)?;
    }
    Ok(())
}

fn header_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = Vec::new();
    loop {
        let mut b = [0u8];
        if r.read(&mut b)? == 0 {
            bail!("truncated PGM header");
        }
        match b[0] {
            b'#' => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            c if c.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    return Ok(String::from_utf8(tok)?);
                }
            }
            c => tok.push(c),
        }
    }
}

/// Reads a binary (P5) PGM into cells, row 0 of the image at the top.
pub fn read_pgm(input: impl Read, resolution: f64, origin: Pose2) -> Result<OccupancyGrid> {
    let mut r = BufReader::new(input);
    ensure!(header_token(&mut r)? == "P5", "only binary P5 PGM is supported");
    let w: usize = header_token(&mut r)?.parse().context("PGM width")?;
    let h: usize = header_token(&mut r)?.parse().context("PGM height")?;
    let maxval: u32 = header_token(&mut r)?.parse().context("PGM maxval")?;
    ensure!(maxval == 255, "PGM maxval must be 255");
    let mut data = vec![0u8; w * h];
    r.read_exact(&mut data).context("PGM pixel data")?;
    let mut cells = vec![Cell::Unknown; w * h];
    for y in 0..h {
        for x in 0..w {
            cells[y * w + x] = cell(data[(h - 1 - y) * w + x]);
        }
    }
    OccupancyGrid::from_cells(w, h, resolution, origin, cells).map_err(anyhow::Error::from)
}

/// Writes `path` (PGM) and its JSON sidecar.
pub fn save_grid(grid: &OccupancyGrid, path: &Path, seed: Option<u64>) -> Result<()> {
    let mut buf = Vec::new();
    write_pgm(grid, &mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    let header = GridHeader {
        width: grid.width(),
        height: grid.height(),
        resolution: grid.resolution(),
        origin: grid.origin(),
        seed,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn load_grid(path: &Path) -> Result<(OccupancyGrid, GridHeader)> {
    let side = sidecar_path(path);
    let header: GridHeader = serde_json::from_slice(
        &fs::read(&side).with_context(|| format!("reading {}", side.display()))?,
    )?;
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let grid = read_pgm(file, header.resolution, header.origin)?;
    ensure!(
        grid.width() == header.width && grid.height() == header.height,
        "sidecar size does not match the image"
    );
    Ok((grid, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_states() {
        let mut g = OccupancyGrid::new(3, 2, 0.4, Pose2 { x: 1.0, y: -2.0 }, Cell::Unknown);
        g.set(explore_core::grid::CellIndex::new(0, 0), Cell::Free);
        g.set(explore_core::grid::CellIndex::new(2, 1), Cell::Obstacle);
        let mut buf = Vec::new();
        write_pgm(&g, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n255\n"));
        // top row first: (2,1) is obstacle
        assert_eq!(&buf[buf.len() - 6..], &[127, 127, 0, 255, 127, 127]);
        let back = read_pgm(&buf[..], 0.4, g.origin()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn comments_in_header() {
        let data = b"P5\n# made by hand\n2 1\n255\n\xff\x00";
        let g = read_pgm(&data[..], 1.0, Pose2::default()).unwrap();
        assert_eq!(g.cells(), &[Cell::Free, Cell::Obstacle]);
        assert!(read_pgm(&b"P2\n1 1\n255\n0"[..], 1.0, Pose2::default()).is_err());
        assert!(read_pgm(&b"P5\n2 2\n255\n\x00"[..], 1.0, Pose2::default()).is_err());
    }
}
