//! Dense brute-force reference implementations. They are written from the
//! definitions with plain loops and share no code with the library beyond
//! reading pixel values.

#![allow(dead_code)]

use deep_energy::{Image, Rng, SeedMap};

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(n: usize) -> Dense {
    vec![vec![0.0; n]; n]
}

pub fn gray(img: &Image, r: usize, c: usize) -> f64 {
    if img.channels() == 1 {
        img.get(r, c, 0)
    } else {
        0.299 * img.get(r, c, 0) + 0.587 * img.get(r, c, 1) + 0.114 * img.get(r, c, 2)
    }
}

/// `D - W` over the 4-connected grid with `w = exp(-beta (g_i - g_j)^2)`.
pub fn rw_laplacian(img: &Image, beta: f64) -> Dense {
    let (h, w) = (img.height(), img.width());
    let mut l = zeros(h * w);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut link = |rr: usize, cc: usize| {
                let j = rr * w + cc;
                let d = gray(img, r, c) - gray(img, rr, cc);
                let wt = (-beta * d * d).exp();
                l[i][j] -= wt;
                l[j][i] -= wt;
                l[i][i] += wt;
                l[j][j] += wt;
            };
            if c + 1 < w {
                link(r, c + 1);
            }
            if r + 1 < h {
                link(r + 1, c);
            }
        }
    }
    l
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &Dense) -> Dense {
    let n = m.len();
    let mut a: Dense = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut ext = row.clone();
            ext.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            ext
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    a.into_iter().map(|row| row[n..].to_vec()).collect()
}

pub fn solve(m: &Dense, b: &[f64]) -> Vec<f64> {
    let inv = invert(m);
    inv.iter().map(|row| row.iter().zip(b).map(|(a, x)| a * x).sum()).collect()
}

/// Per-window weights `(1 + (I_i - mu)^T (Sigma + eps/9 Id)^-1 (I_j - mu)) / 9`
/// with the window pixels listed row by row. One entry per interior pixel.
pub fn window_weights(img: &Image, eps: f64) -> Vec<(Vec<usize>, Dense)> {
    let (h, w) = (img.height(), img.width());
    let mut out = Vec::new();
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let mut px = Vec::new();
            for rr in r - 1..=r + 1 {
                for cc in c - 1..=c + 1 {
                    px.push((rr, cc));
                }
            }
            let colors: Vec<Vec<f64>> = px.iter().map(|&(rr, cc)| (0..3).map(|k| img.get(rr, cc, k)).collect()).collect();
            let mean: Vec<f64> = (0..3).map(|k| colors.iter().map(|v| v[k]).sum::<f64>() / 9.0).collect();
            let mut cov = zeros(3);
            for v in &colors {
                for a in 0..3 {
                    for b in 0..3 {
                        cov[a][b] += (v[a] - mean[a]) * (v[b] - mean[b]) / 9.0;
                    }
                }
            }
            for (a, row) in cov.iter_mut().enumerate() {
                row[a] += eps / 9.0;
            }
            let prec = invert(&cov);
            let mut wts = zeros(9);
            for i in 0..9 {
                for j in 0..9 {
                    let mut q = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            q += (colors[i][a] - mean[a]) * prec[a][b] * (colors[j][b] - mean[b]);
                        }
                    }
                    wts[i][j] = (1.0 + q) / 9.0;
                }
            }
            out.push((px.iter().map(|&(rr, cc)| rr * w + cc).collect(), wts));
        }
    }
    out
}

/// `L_ij = sum over windows holding both pixels of (delta_ij - w_ij)`.
pub fn matting_laplacian(img: &Image, eps: f64) -> Dense {
    let n = img.height() * img.width();
    let mut l = zeros(n);
    for (px, wts) in window_weights(img, eps) {
        for i in 0..9 {
            for j in 0..9 {
                let delta = if i == j { 1.0 } else { 0.0 };
                l[px[i]][px[j]] += delta - wts[i][j];
            }
        }
    }
    l
}

pub fn quad(m: &Dense, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            s += v[i] * a * v[j];
        }
    }
    s
}

pub fn matvec(m: &Dense, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum()).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn seeded(seeds: &SeedMap) -> Vec<f64> {
    let n = seeds.num_pixels();
    (0..n)
        .map(|i| if (0..seeds.classes()).any(|l| seeds.plane(l)[i] == 1) { 1.0 } else { 0.0 })
        .collect()
}

/// `sum_l y_l^T L y_l + lambda sum_l (y_l - x_l)^T Q (y_l - x_l)`.
pub fn rw_energy(l: &Dense, seeds: &SeedMap, planes: &[Vec<f64>], lambda: f64) -> f64 {
    let q = seeded(seeds);
    planes
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let x = seeds.plane(k);
            let fid: f64 = (0..y.len()).map(|i| q[i] * (y[i] - x[i] as f64).powi(2)).sum();
            quad(l, y) + lambda * fid
        })
        .sum()
}

/// `alpha^T L alpha + lambda (alpha - x_F)^T Q (alpha - x_F)`, class 1 = foreground.
pub fn matting_energy(l: &Dense, seeds: &SeedMap, alpha: &[f64], lambda: f64) -> f64 {
    let q = seeded(seeds);
    let fg = seeds.plane(1);
    let fid: f64 = (0..alpha.len()).map(|i| q[i] * (alpha[i] - fg[i] as f64).powi(2)).sum();
    quad(l, alpha) + lambda * fid
}

pub fn random_image(h: usize, w: usize, channels: usize, rng: &mut Rng) -> Image {
    Image::from_fn(h, w, channels, |_, _, _| rng.uniform()).unwrap()
}

/// Linear color ramp plus small noise: neighbor contrasts stay below a few
/// percent, so every edge weight is well away from underflow.
pub fn smooth_image(h: usize, w: usize, rng: &mut Rng) -> Image {
    let base: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.uniform_range(0.45, 0.55), rng.uniform_range(-0.2, 0.2), rng.uniform_range(-0.2, 0.2)))
        .collect();
    let noise: Vec<f64> = (0..h * w * 3).map(|_| rng.uniform_range(0.0, 0.03)).collect();
    Image::from_fn(h, w, 3, |r, c, k| {
        let (a, b, d) = base[k];
        a + b * r as f64 / h as f64 + d * c as f64 / w as f64 + noise[(r * w + c) * 3 + k]
    })
    .unwrap()
}

/// Seeds at roughly `density` of the pixels with random classes, every
/// class seeded at least once.
pub fn random_seeds(h: usize, w: usize, classes: usize, density: f64, rng: &mut Rng) -> SeedMap {
    let n = h * w;
    let mut labels: Vec<u8> = (0..n)
        .map(|_| if rng.uniform() < density { 1 + rng.below(classes) as u8 } else { 0 })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        order.swap(k, rng.below(k + 1));
    }
    for (l, &i) in order.iter().take(classes).enumerate() {
        labels[i] = l as u8 + 1;
    }
    SeedMap::from_labels(h, w, classes, &labels).unwrap()
}
