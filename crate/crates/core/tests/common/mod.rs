//! Fixtures and process helpers shared by the integration tests.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use deep_energy::dataset::{save_trimap, Mask, Trimap, TRIMAP_BG, TRIMAP_FG, TRIMAP_UNKNOWN};
use deep_energy::image::save_image;
use deep_energy::{Image, Rng};

pub const BIN: &str = env!("CARGO_BIN_EXE_deep-energy");

pub const SCENE_SIZE: usize = 40;

/// Runs the binary and returns its output whatever the exit status.
pub fn invoke(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ENERGY_SEG_THREADS")
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics unless it succeeds.
pub fn run(args: &[&str]) -> Output {
    let out = invoke(args);
    if !out.status.success() {
        panic!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

pub fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Signed distance to the edge of the scene's disc, negative inside.
pub fn disc_distance(r: usize, c: usize) -> f64 {
    ((r as f64 - 19.5).powi(2) + (c as f64 - 21.0).powi(2)).sqrt() - 11.0
}

/// Writes `image.png` (a 40x40 RGB disc over a darker background),
/// `mask.png` (the disc) and `trimap.png` (a band around its edge).
pub fn write_scene(dir: &Path) {
    let mut rng = Rng::new(808);
    let size = SCENE_SIZE;
    let noise: Vec<f64> = (0..size * size * 3).map(|_| rng.uniform_range(0.0, 0.05)).collect();
    let img = Image::from_fn(size, size, 3, |r, c, k| {
        let base = if disc_distance(r, c) < 0.0 { 0.7 } else { 0.2 };
        base + 0.1 * k as f64 + noise[(r * size + c) * 3 + k]
    })
    .unwrap();
    save_image(&dir.join("image.png"), &img).unwrap();
    let mask = Mask::from_fn(size, size, |r, c| disc_distance(r, c) < 0.0);
    save_image(&dir.join("mask.png"), &mask.to_image()).unwrap();
    let codes = (0..size * size)
        .map(|i| {
            let d = disc_distance(i / size, i % size);
            if d < -3.0 {
                TRIMAP_FG
            } else if d > 3.0 {
                TRIMAP_BG
            } else {
                TRIMAP_UNKNOWN
            }
        })
        .collect();
    save_trimap(&dir.join("trimap.png"), &Trimap::new(size, size, codes).unwrap()).unwrap();
}
