//! Binary PPM (P6) snapshots.

use std::path::Path;

use cali_core::planner::{Pose2, SedfImage};
use cali_core::sim::World;

use crate::{io_err, Result};

/// An 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Rgb {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u8>,
}

impl Rgb {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols * 3] }
    }

    pub fn put(&mut self, r: usize, c: usize, px: [u8; 3]) {
        if r < self.rows && c < self.cols {
            let i = (r * self.cols + c) * 3;
            self.data[i..i + 3].copy_from_slice(&px);
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ppm()).map_err(io_err(path))
    }
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// SEDF as a red-on-black heat map.
pub fn sedf_image(field: &SedfImage) -> Rgb {
    let mut img = Rgb::new(field.rows, field.cols);
    for r in 0..field.rows {
        for c in 0..field.cols {
            let v = field.get(r, c);
            img.put(r, c, [to_byte(v), to_byte(v * 0.3), 0]);
        }
    }
    img
}

/// Class map with a fixed colour per class.
pub fn class_image(seg: &[u8], rows: usize, cols: usize) -> Rgb {
    const COLOURS: [[u8; 3]; 9] = [
        [90, 160, 70],
        [230, 190, 120],
        [40, 40, 110],
        [200, 80, 60],
        [120, 120, 120],
        [160, 60, 170],
        [60, 170, 180],
        [220, 220, 60],
        [150, 200, 255],
    ];
    let mut img = Rgb::new(rows, cols);
    for (i, &c) in seg.iter().enumerate() {
        img.put(i / cols, i % cols, COLOURS[c as usize % COLOURS.len()]);
    }
    img
}

/// Top-down view of a world with the driven path, start (blue) and goal
/// (green). North (+y) is up.
pub fn trajectory_image(world: &World, path: &[Pose2]) -> Rgb {
    let (rows, cols) = (world.rows, world.cols);
    let mut img = Rgb::new(rows, cols);
    for gy in 0..rows {
        for gx in 0..cols {
            let x = (gx as f64 + 0.5) * world.resolution;
            let y = (gy as f64 + 0.5) * world.resolution;
            let px = if world.free(x, y) { [235, 235, 235] } else { [60, 60, 60] };
            img.put(rows - 1 - gy, gx, px);
        }
    }
    let mut mark = |p: &Pose2, px: [u8; 3], radius: i64| {
        let gx = (p.x / world.resolution).floor() as i64;
        let gy = (p.y / world.resolution).floor() as i64;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let (x, y) = (gx + dx, gy + dy);
                if x >= 0 && y >= 0 && (x as usize) < cols && (y as usize) < rows {
                    img.put(rows - 1 - y as usize, x as usize, px);
                }
            }
        }
    };
    for p in path {
        mark(p, [220, 30, 30], 0);
    }
    mark(&world.start, [30, 60, 220], 1);
    mark(&world.goal, [30, 180, 30], 1);
    img
}
