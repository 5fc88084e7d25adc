//! Random-walker energy on the 4-connected pixel graph.
//!
//! For probability planes `y^l` and seed indicators `x^l` the energy is
//!
//! ```text
//! E(y) = sum_l sum_{edges ij} w_ij (y_i^l - y_j^l)^2
//!      + lambda * sum_i q_i * sum_l (y_i^l - x_i^l)^2,     q_i = sum_l x_i^l
//! ```
//!
//! with `w_ij = exp(-beta (I_i - I_j)^2)`. Each undirected edge is counted
//! once, so the smoothness term equals `sum_l (y^l)^T L y^l` for the graph
//! Laplacian `L = D - W`.

use crate::error::{Error, Result};
use crate::field::{ProbabilityField, SeedMap};
use crate::image::Image;
use crate::numeric::sum_by;
use crate::sparse::CsrMatrix;

pub const DEFAULT_BETA: f64 = 1000.0;
pub const DEFAULT_LAMBDA: f64 = 10.0;

/// Neighbor slot order.
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

/// Per-pixel edge weights to the four neighbors; slots that point outside
/// the image are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborWeights {
    height: usize,
    width: usize,
    data: Vec<[f64; 4]>,
}

impl NeighborWeights {
    /// Builds weights from a symmetric edge function `f(p, q)` evaluated on
    /// each undirected edge once.
    pub fn from_edge_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![[0.0; 4]; height * width];
        for r in 0..height {
            for c in 0..width {
                let i = r * width + c;
                if c + 1 < width {
                    let v = f(i, i + 1);
                    data[i][RIGHT] = v;
                    data[i + 1][LEFT] = v;
                }
                if r + 1 < height {
                    let v = f(i, i + width);
                    data[i][DOWN] = v;
                    data[i + width][UP] = v;
                }
            }
        }
        NeighborWeights {
            height,
            width,
            data,
        }
    }

    pub fn uniform(height: usize, width: usize, value: f64) -> Self {
        NeighborWeights::from_edge_fn(height, width, |_, _| value)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn slots(&self, idx: usize) -> &[f64; 4] {
        &self.data[idx]
    }

    /// Linear index of the neighbor in `slot`, if inside the image.
    pub fn neighbor(&self, idx: usize, slot: usize) -> Option<usize> {
        let (r, c) = (idx / self.width, idx % self.width);
        match slot {
            UP if r > 0 => Some(idx - self.width),
            DOWN if r + 1 < self.height => Some(idx + self.width),
            LEFT if c > 0 => Some(idx - 1),
            RIGHT if c + 1 < self.width => Some(idx + 1),
            _ => None,
        }
    }

    /// Undirected edges `(i, j, w_ij)` with `i < j`, each listed once.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_pixels()).flat_map(move |i| {
            [RIGHT, DOWN]
                .into_iter()
                .filter_map(move |s| self.neighbor(i, s).map(|j| (i, j, self.data[i][s])))
        })
    }
}

pub fn edge_weights(gray: &Image, beta: f64) -> Result<NeighborWeights> {
    if gray.channels() != 1 {
        return Err(Error::Invalid(format!(
            "edge weights need a 1-channel image, got {} channels",
            gray.channels()
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    let px = gray.data();
    Ok(NeighborWeights::from_edge_fn(gray.height(), gray.width(), |p, q| {
        let d = px[p] - px[q];
        (-beta * d * d).exp()
    }))
}

/// `L = D - W` for the 4-neighbor graph.
pub fn assemble_laplacian(w: &NeighborWeights) -> CsrMatrix {
    let n = w.num_pixels();
    let rows = (0..n)
        .map(|i| {
            let s = w.slots(i);
            let mut row = Vec::with_capacity(5);
            let mut degree = 0.0;
            for slot in [UP, LEFT] {
                if let Some(j) = w.neighbor(i, slot) {
                    row.push((j, -s[slot]));
                    degree += s[slot];
                }
            }
            let diag_at = row.len();
            row.push((i, 0.0));
            for slot in [RIGHT, DOWN] {
                if let Some(j) = w.neighbor(i, slot) {
                    row.push((j, -s[slot]));
                    degree += s[slot];
                }
            }
            row[diag_at].1 = degree;
            row
        })
        .collect();
    CsrMatrix::from_sorted_rows(n, rows)
}

fn check_shapes(seeds: &SeedMap, y: &ProbabilityField, h: usize, w: usize) -> Result<()> {
    if seeds.height() != y.height() || seeds.width() != y.width() || seeds.classes() != y.classes() {
        return Err(Error::Shape(format!(
            "seeds {}x{}x{} vs field {}x{}x{}",
            seeds.classes(),
            seeds.height(),
            seeds.width(),
            y.classes(),
            y.height(),
            y.width()
        )));
    }
    if y.height() != h || y.width() != w {
        return Err(Error::Shape(format!(
            "field {}x{} vs graph {h}x{w}",
            y.height(),
            y.width()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("lambda must be finite and >= 0, got {lambda}")))
    }
}

/// Smoothness and fidelity parts of the energy, kept apart for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    pub smoothness: f64,
    pub fidelity: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.smoothness + self.fidelity
    }
}

/// How many times each undirected edge enters the smoothness sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeCounting {
    /// Each edge once; the quadratic form of the Laplacian.
    #[default]
    Once,
    /// All four shifted neighbor images summed, so each edge twice.
    Twice,
}

pub fn rw_energy_terms(
    seeds: &SeedMap,
    y: &ProbabilityField,
    w: &NeighborWeights,
    lambda: f64,
    counting: EdgeCounting,
) -> Result<EnergyTerms> {
    check_shapes(seeds, y, w.height(), w.width())?;
    check_lambda(lambda)?;
    let n = y.num_pixels();
    let slots: &[usize] = match counting {
        EdgeCounting::Once => &[DOWN, RIGHT],
        EdgeCounting::Twice => &[UP, DOWN, LEFT, RIGHT],
    };
    let mut smoothness = 0.0;
    for l in 0..y.classes() {
        let plane = y.plane(l);
        for &slot in slots {
            // one shifted "neighbor image" per slot
            smoothness += sum_by(n, |i| match w.neighbor(i, slot) {
                Some(j) => {
                    let d = plane[i] - plane[j];
                    w.slots(i)[slot] * d * d
                }
                None => 0.0,
            });
        }
    }
    let q = seeds.seeded_mask();
    let fidelity = lambda
        * sum_by(n, |i| {
            if q[i] == 0.0 {
                return 0.0;
            }
            let mismatch: f64 = (0..y.classes())
                .map(|l| {
                    let d = y.plane(l)[i] - seeds.plane(l)[i] as f64;
                    d * d
                })
                .sum();
            q[i] * mismatch
        });
    Ok(EnergyTerms {
        smoothness,
        fidelity,
    })
}

/// Random-walker energy with each edge counted once.
pub fn rw_energy(seeds: &SeedMap, y: &ProbabilityField, w: &NeighborWeights, lambda: f64) -> Result<f64> {
    rw_energy_terms(seeds, y, w, lambda, EdgeCounting::Once).map(|t| t.total())
}

/// Gradient of [`rw_energy`] with respect to every `y_i^l`:
/// `2 L y^l + 2 lambda Q (y^l - x^l)`, returned as class-major planes.
pub fn rw_energy_gradient(
    seeds: &SeedMap,
    y: &ProbabilityField,
    laplacian: &CsrMatrix,
    lambda: f64,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(seeds, y, y.height(), y.width())?;
    check_lambda(lambda)?;
    let n = y.num_pixels();
    if laplacian.order() != n {
        return Err(Error::Shape(format!(
            "Laplacian order {} vs {n} pixels",
            laplacian.order()
        )));
    }
    let q = seeds.seeded_mask();
    Ok((0..y.classes())
        .map(|l| {
            let plane = y.plane(l);
            let x = seeds.plane(l);
            let ly = laplacian.mul_vec(plane);
            (0..n)
                .map(|i| 2.0 * ly[i] + 2.0 * lambda * q[i] * (plane[i] - x[i] as f64))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BACKGROUND, FOREGROUND};

    fn pair_instance() -> (SeedMap, NeighborWeights) {
        let mut seeds = SeedMap::empty(1, 2, 2).unwrap();
        seeds.set(FOREGROUND, 0);
        (seeds, NeighborWeights::uniform(1, 2, 1.0))
    }

    fn field(fg: &[f64], bg: &[f64]) -> ProbabilityField {
        let mut planes = vec![Vec::new(); 2];
        planes[FOREGROUND] = fg.to_vec();
        planes[BACKGROUND] = bg.to_vec();
        ProbabilityField::from_planes(1, fg.len(), planes).unwrap()
    }

    #[test]
    fn weights_on_simple_images() {
        let flat = Image::constant(3, 4, &[0.3]).unwrap();
        for beta in [0.0, 1.0, 1000.0] {
            let w = edge_weights(&flat, beta).unwrap();
            assert!(w.edges().all(|(_, _, v)| v == 1.0));
        }
        let ramp = Image::from_fn(3, 3, 1, |r, c, _| (r * 3 + c) as f64 / 8.0).unwrap();
        let w = edge_weights(&ramp, 0.0).unwrap();
        assert!(w.edges().all(|(_, _, v)| v == 1.0));

        let step = Image::new(1, 2, 1, vec![0.5, 0.55]).unwrap();
        let w = edge_weights(&step, 1000.0).unwrap();
        assert!((w.slots(0)[RIGHT] - (-2.5f64).exp()).abs() < 1e-12);
        assert!((w.slots(0)[RIGHT] - 0.082085).abs() < 1e-6);
        assert_eq!(w.slots(0)[RIGHT], w.slots(1)[LEFT]);

        let rgb = Image::constant(2, 2, &[0.1, 0.2, 0.3]).unwrap();
        assert!(edge_weights(&rgb, 1.0).is_err());
        assert!(edge_weights(&flat, -1.0).is_err());
    }

    #[test]
    fn boundary_slots_are_zero() {
        let img = Image::from_fn(3, 4, 1, |r, c, _| ((r * 5 + c * 3) % 7) as f64 / 7.0).unwrap();
        let w = edge_weights(&img, 10.0).unwrap();
        for i in 0..w.num_pixels() {
            for slot in 0..4 {
                match w.neighbor(i, slot) {
                    None => assert_eq!(w.slots(i)[slot], 0.0),
                    Some(j) => {
                        let back = [DOWN, UP, RIGHT, LEFT][slot];
                        assert_eq!(w.slots(i)[slot], w.slots(j)[back]);
                        assert!((0.0..=1.0).contains(&w.slots(i)[slot]));
                    }
                }
            }
        }
        assert_eq!(w.edges().count(), 3 * 3 + 2 * 4);
    }

    #[test]
    fn laplacian_small_cases() {
        let l = assemble_laplacian(&NeighborWeights::uniform(1, 2, 1.0));
        assert_eq!(l.to_dense(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let zero = assemble_laplacian(&NeighborWeights::uniform(3, 3, 0.0));
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_examples() {
        let (seeds, w) = pair_instance();
        let exact = field(&[1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(rw_energy(&seeds, &exact, &w, 10.0).unwrap(), 0.0);

        let half = field(&[1.0, 0.5], &[0.0, 0.5]);
        assert!((rw_energy(&seeds, &half, &w, 10.0).unwrap() - 0.5).abs() < 1e-15);
        let twice = rw_energy_terms(&seeds, &half, &w, 10.0, EdgeCounting::Twice).unwrap();
        assert!((twice.smoothness - 1.0).abs() < 1e-15);

        let flat = field(&[0.3, 0.3], &[0.7, 0.7]);
        assert_eq!(rw_energy(&seeds, &flat, &w, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn energy_rejects_bad_inputs() {
        let (seeds, w) = pair_instance();
        let y3 = ProbabilityField::uniform(1, 3, 2);
        assert!(matches!(rw_energy(&seeds, &y3, &w, 1.0), Err(Error::Shape(_))));
        let y = ProbabilityField::uniform(1, 2, 2);
        assert!(rw_energy(&seeds, &y, &w, -1.0).is_err());
        let w3 = NeighborWeights::uniform(1, 3, 1.0);
        assert!(rw_energy(&seeds, &y, &w3, 1.0).is_err());
    }

    #[test]
    fn gradient_vanishes_on_constants_without_fidelity() {
        let img = Image::from_fn(4, 5, 1, |r, c, _| ((r * 3 + c * 7) % 10) as f64 / 10.0).unwrap();
        let l = assemble_laplacian(&edge_weights(&img, 5.0).unwrap());
        let seeds = SeedMap::from_labels(4, 5, 2, &[1; 20]).unwrap();
        let y = ProbabilityField::from_planes(4, 5, vec![vec![0.25; 20], vec![0.75; 20]]).unwrap();
        let g = rw_energy_gradient(&seeds, &y, &l, 0.0).unwrap();
        assert!(g.iter().flatten().all(|v| v.abs() < 1e-14));
    }
}
