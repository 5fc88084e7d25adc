//! Closed-form matting energy.
//!
//! Every fully interior pixel `n` hosts a 3x3 window `p_n`. With the window
//! color mean `mu_n` and population covariance `S_n`, the pairwise weights
//! are
//!
//! ```text
//! w_ij^n = (1 + (I_i - mu_n)^T (S_n + eps/9 Id)^-1 (I_j - mu_n)) / 9
//! ```
//!
//! and the matting Laplacian is `L_ij = sum_{n : i,j in p_n} (delta_ij - w_ij^n)`.
//! The energy of a matte `a` with foreground/background seeds `xF`, `xB` is
//!
//! ```text
//! E(a) = 1/2 sum_n sum_{i,j in p_n} w_ij^n (a_i - a_j)^2
//!      + lambda * sum_i (xF_i + xB_i) (a_i - xF_i)^2
//! ```
//!
//! where the pairwise half equals `a^T L a`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{AlphaMatte, SeedMap, BACKGROUND, FOREGROUND};
use crate::image::Image;
use crate::numeric::sum_by;
use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-7;
pub const DEFAULT_LAMBDA: f64 = 1.0;

pub const WINDOW_SIZE: usize = 9;
pub const PAIRS_PER_WINDOW: usize = WINDOW_SIZE * WINDOW_SIZE;

/// Row/column offset of window slot `k` from the window center.
#[inline]
pub fn window_offset(k: usize) -> (isize, isize) {
    ((k / 3) as isize - 1, (k % 3) as isize - 1)
}

/// Window slots `(i, j)` of pair index `k`: `i` is the slow index.
#[inline]
pub fn pair_slots(k: usize) -> (usize, usize) {
    (k / WINDOW_SIZE, k % WINDOW_SIZE)
}

/// Color statistics of one 3x3 window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    /// Linear index of the center pixel.
    pub center: usize,
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchStats {
    height: usize,
    width: usize,
    windows: Vec<WindowStats>,
}

impl PatchStats {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Windows in row-major order of their centers.
    pub fn windows(&self) -> &[WindowStats] {
        &self.windows
    }
}

fn check_image(img: &Image) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::Invalid(format!(
            "matting needs an RGB image, got {} channels",
            img.channels()
        )));
    }
    if img.height() < 3 || img.width() < 3 {
        return Err(Error::Invalid(format!(
            "matting needs at least a 3x3 image, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("epsilon must be positive, got {epsilon}")))
    }
}

#[inline]
fn window_pixel(width: usize, center: usize, k: usize) -> usize {
    let (dr, dc) = window_offset(k);
    (center as isize + dr * width as isize + dc) as usize
}

fn window_stats(img: &Image, center: usize) -> WindowStats {
    let w = img.width();
    let mut mean = [0.0; 3];
    for k in 0..WINDOW_SIZE {
        let p = img.pixel(window_pixel(w, center, k));
        for ch in 0..3 {
            mean[ch] += p[ch];
        }
    }
    for m in &mut mean {
        *m /= WINDOW_SIZE as f64;
    }
    let mut covariance = [[0.0; 3]; 3];
    for k in 0..WINDOW_SIZE {
        let p = img.pixel(window_pixel(w, center, k));
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for a in 0..3 {
            for b in 0..3 {
                covariance[a][b] += d[a] * d[b];
            }
        }
    }
    for row in &mut covariance {
        for v in row {
            *v /= WINDOW_SIZE as f64;
        }
    }
    WindowStats {
        center,
        mean,
        covariance,
    }
}

fn interior_centers(height: usize, width: usize) -> impl Iterator<Item = usize> {
    (1..height - 1).flat_map(move |r| (1..width - 1).map(move |c| r * width + c))
}

/// Mean and population covariance of every interior 3x3 window.
pub fn patch_stats(img: &Image) -> Result<PatchStats> {
    check_image(img)?;
    let centers: Vec<usize> = interior_centers(img.height(), img.width()).collect();
    let windows = centers.par_iter().map(|&c| window_stats(img, c)).collect();
    Ok(PatchStats {
        height: img.height(),
        width: img.width(),
        windows,
    })
}

/// Inverse of a symmetric positive definite 3x3 matrix via cofactors.
pub(crate) fn invert_spd3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    let c12 = m[0][1] * m[2][0] - m[0][0] * m[2][1];
    let c22 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv = 1.0 / det;
    // cofactor matrix of a symmetric matrix is symmetric
    [
        [c00 * inv, c01 * inv, c02 * inv],
        [c01 * inv, c11 * inv, c12 * inv],
        [c02 * inv, c12 * inv, c22 * inv],
    ]
}

/// Per-window quantities needed to evaluate any weight of the window.
#[derive(Debug, Clone, Copy)]
struct WindowKernel {
    center: usize,
    residuals: [[f64; 3]; WINDOW_SIZE],
    precision: [[f64; 3]; 3],
}

impl WindowKernel {
    fn new(img: &Image, stats: &WindowStats, epsilon: f64) -> Self {
        let mut reg = stats.covariance;
        for (d, row) in reg.iter_mut().enumerate() {
            row[d] += epsilon / WINDOW_SIZE as f64;
        }
        let mut residuals = [[0.0; 3]; WINDOW_SIZE];
        for (k, r) in residuals.iter_mut().enumerate() {
            let p = img.pixel(window_pixel(img.width(), stats.center, k));
            *r = [
                p[0] - stats.mean[0],
                p[1] - stats.mean[1],
                p[2] - stats.mean[2],
            ];
        }
        WindowKernel {
            center: stats.center,
            residuals,
            precision: invert_spd3(&reg),
        }
    }

    #[inline]
    fn weight(&self, i: usize, j: usize) -> f64 {
        // evaluate in one fixed order so that w_ij and w_ji agree bitwise
        let (i, j) = (i.min(j), i.max(j));
        let ri = &self.residuals[i];
        let rj = &self.residuals[j];
        let m = &self.precision;
        let mut q = 0.0;
        for a in 0..3 {
            q += ri[a] * (m[a][0] * rj[0] + m[a][1] * rj[1] + m[a][2] * rj[2]);
        }
        (1.0 + q) / WINDOW_SIZE as f64
    }

    fn weights(&self) -> [f64; PAIRS_PER_WINDOW] {
        let mut out = [0.0; PAIRS_PER_WINDOW];
        for (k, v) in out.iter_mut().enumerate() {
            let (i, j) = pair_slots(k);
            *v = self.weight(i, j);
        }
        out
    }
}

fn kernels(img: &Image, epsilon: f64) -> Result<Vec<WindowKernel>> {
    check_epsilon(epsilon)?;
    let stats = patch_stats(img)?;
    Ok(stats
        .windows
        .par_iter()
        .map(|s| WindowKernel::new(img, s, epsilon))
        .collect())
}

/// The 81 pairwise weights of one window, pair `k` at index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowWeights {
    pub center: usize,
    pub weights: [f64; PAIRS_PER_WINDOW],
}

impl WindowWeights {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * WINDOW_SIZE + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MattingWeights {
    height: usize,
    width: usize,
    windows: Vec<WindowWeights>,
}

impl MattingWeights {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn windows(&self) -> &[WindowWeights] {
        &self.windows
    }

    /// Linear pixel index of slot `k` in the window centered at `center`.
    pub fn pixel(&self, center: usize, k: usize) -> usize {
        window_pixel(self.width, center, k)
    }

    /// `[height * width, 81]` f32 tensor; row `i` holds the weights of the
    /// window centered at pixel `i`, zeros for border pixels.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = vec![0f32; self.height * self.width * PAIRS_PER_WINDOW];
        for win in &self.windows {
            let row = &mut data[win.center * PAIRS_PER_WINDOW..(win.center + 1) * PAIRS_PER_WINDOW];
            for (dst, &src) in row.iter_mut().zip(&win.weights) {
                *dst = src as f32;
            }
        }
        Tensor::f32(vec![self.height * self.width, PAIRS_PER_WINDOW], data)
            .expect("weight tensor shape is consistent")
    }
}

pub fn matting_weights(img: &Image, epsilon: f64) -> Result<MattingWeights> {
    let windows = kernels(img, epsilon)?
        .par_iter()
        .map(|k| WindowWeights {
            center: k.center,
            weights: k.weights(),
        })
        .collect();
    Ok(MattingWeights {
        height: img.height(),
        width: img.width(),
        windows,
    })
}

/// Sparse matting Laplacian. Each row couples a pixel with the pixels at
/// most two rows and columns away.
pub fn assemble_matting_laplacian(img: &Image, epsilon: f64) -> Result<CsrMatrix> {
    let kernels = kernels(img, epsilon)?;
    let (h, w) = (img.height(), img.width());
    let interior_w = w - 2;
    // kernels are in row-major center order over the interior
    let kernel_at = |r: usize, c: usize| -> Option<&WindowKernel> {
        if r >= 1 && r + 1 < h && c >= 1 && c + 1 < w {
            Some(&kernels[(r - 1) * interior_w + (c - 1)])
        } else {
            None
        }
    };
    let rows: Vec<Vec<(usize, f64)>> = (0..h * w)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / w, i % w);
            let mut band = [0.0f64; 25];
            let mut touched = [false; 25];
            // windows containing pixel i are centered within one step of it
            for cr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    let Some(kernel) = kernel_at(cr, cc) else {
                        continue;
                    };
                    let si = (r + 1 - cr) * 3 + (c + 1 - cc);
                    for sj in 0..WINDOW_SIZE {
                        let (dr, dc) = window_offset(sj);
                        let jr = (cr as isize + dr) as usize;
                        let jc = (cc as isize + dc) as usize;
                        let slot = (jr + 2 - r) * 5 + (jc + 2 - c);
                        let delta = if si == sj { 1.0 } else { 0.0 };
                        band[slot] += delta - kernel.weight(si, sj);
                        touched[slot] = true;
                    }
                }
            }
            let mut row = Vec::with_capacity(25);
            for slot in 0..25 {
                let jr = r as isize + (slot / 5) as isize - 2;
                let jc = c as isize + (slot % 5) as isize - 2;
                if touched[slot] || (jr == r as isize && jc == c as isize) {
                    row.push((jr as usize * w + jc as usize, band[slot]));
                }
            }
            row
        })
        .collect();
    Ok(CsrMatrix::from_sorted_rows(h * w, rows))
}

/// Builds a binary matting seed map from separate foreground and
/// background indicator planes.
pub fn matting_seeds(height: usize, width: usize, fg: &[u8], bg: &[u8]) -> Result<SeedMap> {
    let n = height * width;
    if fg.len() != n || bg.len() != n {
        return Err(Error::Shape(format!(
            "seed planes of {} and {} pixels for a {height}x{width} image",
            fg.len(),
            bg.len()
        )));
    }
    if let Some(i) = (0..n).find(|&i| fg[i] != 0 && bg[i] != 0) {
        return Err(Error::Invalid(format!(
            "pixel ({}, {}) is seeded both foreground and background",
            i / width,
            i % width
        )));
    }
    let mut data = vec![0u8; 2 * n];
    data[BACKGROUND * n..(BACKGROUND + 1) * n].copy_from_slice(bg);
    data[FOREGROUND * n..(FOREGROUND + 1) * n].copy_from_slice(fg);
    SeedMap::new(height, width, 2, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MattingTerms {
    pub pairwise: f64,
    pub data: f64,
}

impl MattingTerms {
    pub fn total(&self) -> f64 {
        self.pairwise + self.data
    }
}

pub fn matting_energy_terms(
    seeds: &SeedMap,
    alpha: &AlphaMatte,
    w: &MattingWeights,
    lambda: f64,
) -> Result<MattingTerms> {
    if seeds.classes() != 2 {
        return Err(Error::Shape(format!(
            "matting seeds need 2 classes, got {}",
            seeds.classes()
        )));
    }
    if seeds.height() != alpha.height()
        || seeds.width() != alpha.width()
        || w.height() != alpha.height()
        || w.width() != alpha.width()
    {
        return Err(Error::Shape(format!(
            "matte {}x{}, seeds {}x{}, weights {}x{}",
            alpha.height(),
            alpha.width(),
            seeds.height(),
            seeds.width(),
            w.height(),
            w.width()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let a = alpha.data();
    let pairwise = 0.5
        * sum_by(w.windows.len(), |n| {
            let win = &w.windows[n];
            let px: [usize; WINDOW_SIZE] = std::array::from_fn(|k| w.pixel(win.center, k));
            let mut acc = 0.0;
            for k in 0..PAIRS_PER_WINDOW {
                let (i, j) = pair_slots(k);
                let d = a[px[i]] - a[px[j]];
                acc += win.weights[k] * d * d;
            }
            acc
        });
    let fg = seeds.plane(FOREGROUND);
    let bg = seeds.plane(BACKGROUND);
    let data = lambda
        * sum_by(a.len(), |i| {
            let q = (fg[i] + bg[i]) as f64;
            let d = a[i] - fg[i] as f64;
            q * d * d
        });
    Ok(MattingTerms { pairwise, data })
}

pub fn matting_energy(seeds: &SeedMap, alpha: &AlphaMatte, w: &MattingWeights, lambda: f64) -> Result<f64> {
    matting_energy_terms(seeds, alpha, w, lambda).map(|t| t.total())
}
