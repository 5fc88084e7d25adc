//! Seed maps and solution fields over an image grid.
//!
//! Per-class data is stored plane by plane (class-major), each plane in
//! row-major pixel order. The interchange layout is `[classes, height, width]`
//! for seed maps and probability fields and `[height, width]` for mattes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{read_png, write_png, Raster};
use crate::tensor::{Tensor, TensorData};

/// Class index of the background in binary problems.
pub const BACKGROUND: usize = 0;
/// Class index of the foreground in binary problems.
pub const FOREGROUND: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedMap {
    height: usize,
    width: usize,
    classes: usize,
    data: Vec<u8>,
}

impl SeedMap {
    pub fn new(height: usize, width: usize, classes: usize, data: Vec<u8>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Invalid(format!("seed map needs at least 2 classes, got {classes}")));
        }
        let n = height * width;
        if data.len() != n * classes {
            return Err(Error::Shape(format!(
                "seed map {classes}x{height}x{width} needs {} values, got {}",
                n * classes,
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Invalid("seed values must be 0 or 1".into()));
        }
        for i in 0..n {
            let count: u32 = (0..classes).map(|l| data[l * n + i] as u32).sum();
            if count > 1 {
                return Err(Error::Invalid(format!(
                    "pixel ({}, {}) seeds {count} classes",
                    i / width,
                    i % width
                )));
            }
        }
        Ok(SeedMap {
            height,
            width,
            classes,
            data,
        })
    }

    pub fn empty(height: usize, width: usize, classes: usize) -> Result<Self> {
        SeedMap::new(height, width, classes, vec![0; height * width * classes])
    }

    /// From per-pixel labels: `0` = unseeded, `k` = seed of class `k - 1`.
    pub fn from_labels(height: usize, width: usize, classes: usize, labels: &[u8]) -> Result<Self> {
        let n = height * width;
        if labels.len() != n {
            return Err(Error::Shape(format!(
                "label image has {} pixels, expected {n}",
                labels.len()
            )));
        }
        let mut data = vec![0u8; n * classes];
        for (i, &code) in labels.iter().enumerate() {
            if code as usize > classes {
                return Err(Error::Invalid(format!(
                    "seed code {code} exceeds class count {classes}"
                )));
            }
            if code > 0 {
                data[(code as usize - 1) * n + i] = 1;
            }
        }
        SeedMap::new(height, width, classes, data)
    }

    pub fn labels(&self) -> Vec<u8> {
        let n = self.num_pixels();
        (0..n)
            .map(|i| {
                (0..self.classes)
                    .find(|&l| self.data[l * n + i] == 1)
                    .map_or(0, |l| (l + 1) as u8)
            })
            .collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn plane(&self, class: usize) -> &[u8] {
        let n = self.num_pixels();
        &self.data[class * n..(class + 1) * n]
    }

    pub fn set(&mut self, class: usize, idx: usize) {
        let n = self.num_pixels();
        for l in 0..self.classes {
            self.data[l * n + idx] = 0;
        }
        self.data[class * n + idx] = 1;
    }

    /// Diagonal of the fidelity operator: 1 where any class is seeded.
    pub fn seeded_mask(&self) -> Vec<f64> {
        let n = self.num_pixels();
        (0..n)
            .map(|i| (0..self.classes).map(|l| self.data[l * n + i] as f64).sum())
            .collect()
    }

    pub fn count(&self, class: usize) -> usize {
        self.plane(class).iter().filter(|&&v| v == 1).count()
    }

    pub fn total_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::u8(vec![self.classes, self.height, self.width], self.data.clone())
            .expect("seed map shape is consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match (t.shape(), t.data()) {
            ([l, h, w], TensorData::U8(v)) => SeedMap::new(*h, *w, *l, v.clone()),
            _ => Err(Error::Shape(format!(
                "seed tensor must be u8 [classes, height, width], got {:?} {:?}",
                t.dtype(),
                t.shape()
            ))),
        }
    }
}

/// Reads a seed PNG (0 = none, k = class k). The class count is at least 2.
pub fn load_seed_png(path: &Path) -> Result<SeedMap> {
    let raster = read_png(path)?;
    if raster.channels != 1 {
        return Err(Error::Invalid(format!(
            "{}: seed images must be 8-bit gray",
            path.display()
        )));
    }
    let classes = raster.bytes.iter().copied().max().unwrap_or(0).max(2) as usize;
    SeedMap::from_labels(raster.height, raster.width, classes, &raster.bytes)
}

pub fn save_seed_png(path: &Path, seeds: &SeedMap) -> Result<()> {
    write_png(
        path,
        &Raster {
            height: seeds.height,
            width: seeds.width,
            channels: 1,
            bytes: seeds.labels(),
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    height: usize,
    width: usize,
    classes: usize,
    data: Vec<f64>,
}

impl ProbabilityField {
    pub fn new(height: usize, width: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * classes {
            return Err(Error::Shape(format!(
                "field {classes}x{height}x{width} needs {} values, got {}",
                height * width * classes,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("probability field has non-finite values".into()));
        }
        Ok(ProbabilityField {
            height,
            width,
            classes,
            data,
        })
    }

    pub fn from_planes(height: usize, width: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        let classes = planes.len();
        ProbabilityField::new(height, width, classes, planes.concat())
    }

    pub fn uniform(height: usize, width: usize, classes: usize) -> Self {
        ProbabilityField {
            height,
            width,
            classes,
            data: vec![1.0 / classes as f64; height * width * classes],
        }
    }

    /// The seed indicators themselves as a candidate field.
    pub fn from_seeds(seeds: &SeedMap) -> Self {
        ProbabilityField {
            height: seeds.height,
            width: seeds.width,
            classes: seeds.classes,
            data: seeds.data.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        let n = self.num_pixels();
        &self.data[class * n..(class + 1) * n]
    }

    /// Per-pixel hard labels; ties go to the lower class index.
    pub fn argmax(&self) -> Vec<usize> {
        let n = self.num_pixels();
        (0..n)
            .map(|i| {
                let mut best = 0;
                for l in 1..self.classes {
                    if self.data[l * n + i] > self.data[best * n + i] {
                        best = l;
                    }
                }
                best
            })
            .collect()
    }

    /// Checks values lie in `[-tol, 1 + tol]` and, if `check_sums`, that
    /// every pixel's class sum is within `tol` of one.
    pub fn check(&self, tol: f64, check_sums: bool) -> Result<()> {
        if let Some(v) = self.data.iter().find(|&&v| v < -tol || v > 1.0 + tol) {
            return Err(Error::Invalid(format!("probability {v} outside [0, 1]")));
        }
        if check_sums {
            let n = self.num_pixels();
            for i in 0..n {
                let s: f64 = (0..self.classes).map(|l| self.data[l * n + i]).sum();
                if (s - 1.0).abs() > tol {
                    return Err(Error::Invalid(format!(
                        "class sum {s} at pixel ({}, {})",
                        i / self.width,
                        i % self.width
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::f32(
            vec![self.classes, self.height, self.width],
            self.data.iter().map(|&v| v as f32).collect(),
        )
        .expect("field shape is consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match (t.shape(), t.data()) {
            ([l, h, w], TensorData::F32(_)) => ProbabilityField::new(*h, *w, *l, t.to_f64()),
            _ => Err(Error::Shape(format!(
                "probability tensor must be f32 [classes, height, width], got {:?} {:?}",
                t.dtype(),
                t.shape()
            ))),
        }
    }

    /// Round-trips through `f32`, giving exactly the values a reader of
    /// [`Self::to_tensor`] sees.
    pub fn quantized(&self) -> Self {
        ProbabilityField {
            data: self.data.iter().map(|&v| v as f32 as f64).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl AlphaMatte {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "matte {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("alpha matte has non-finite values".into()));
        }
        Ok(AlphaMatte {
            height,
            width,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        AlphaMatte {
            height,
            width,
            data: vec![value; height * width],
        }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn clamped(&self) -> Self {
        AlphaMatte {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn quantized(&self) -> Self {
        AlphaMatte {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v as f32 as f64).collect(),
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::f32(
            vec![self.height, self.width],
            self.data.iter().map(|&v| v as f32).collect(),
        )
        .expect("matte shape is consistent")
    }

    /// Accepts `[height, width]` or `[1, height, width]` f32 tensors.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match (t.shape(), t.data()) {
            ([h, w], TensorData::F32(_)) | ([1, h, w], TensorData::F32(_)) => {
                AlphaMatte::new(*h, *w, t.to_f64())
            }
            _ => Err(Error::Shape(format!(
                "matte tensor must be f32 [height, width], got {:?} {:?}",
                t.dtype(),
                t.shape()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_map_invariants() {
        assert!(SeedMap::new(1, 2, 2, vec![1, 0, 1, 0]).is_err());
        assert!(SeedMap::new(1, 2, 2, vec![2, 0, 0, 0]).is_err());
        assert!(SeedMap::new(1, 2, 1, vec![1, 0]).is_err());
        let s = SeedMap::new(1, 2, 2, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(s.labels(), vec![1, 2]);
        assert_eq!(s.seeded_mask(), vec![1.0, 1.0]);
    }

    #[test]
    fn labels_round_trip() {
        let labels = [0, 1, 2, 3, 0, 2];
        let s = SeedMap::from_labels(2, 3, 3, &labels).unwrap();
        assert_eq!(s.labels(), labels);
        assert_eq!(s.count(1), 2);
        assert!(SeedMap::from_labels(2, 3, 2, &labels).is_err());
    }

    #[test]
    fn seed_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        let s = SeedMap::from_labels(2, 2, 2, &[0, 1, 2, 0]).unwrap();
        save_seed_png(&path, &s).unwrap();
        assert_eq!(load_seed_png(&path).unwrap(), s);
    }

    #[test]
    fn argmax_ties_go_low() {
        let y = ProbabilityField::from_planes(1, 3, vec![vec![0.5, 0.2, 0.9], vec![0.5, 0.8, 0.1]])
            .unwrap();
        assert_eq!(y.argmax(), vec![0, 1, 0]);
    }

    #[test]
    fn field_checks() {
        let y = ProbabilityField::from_planes(1, 2, vec![vec![0.3, 1.0], vec![0.7, 0.0]]).unwrap();
        assert!(y.check(1e-6, true).is_ok());
        let bad = ProbabilityField::from_planes(1, 1, vec![vec![0.3], vec![0.3]]).unwrap();
        assert!(bad.check(1e-6, true).is_err());
        assert!(bad.check(1e-6, false).is_ok());
        let t = y.to_tensor();
        assert_eq!(t.shape(), &[2, 1, 2]);
        assert_eq!(ProbabilityField::from_tensor(&t).unwrap(), y.quantized());
    }

    #[test]
    fn matte_tensor_shapes() {
        let a = AlphaMatte::new(2, 2, vec![0.0, 0.5, 1.0, -0.2]).unwrap();
        assert_eq!(a.clamped().data(), &[0.0, 0.5, 1.0, 0.0]);
        let t = a.to_tensor();
        assert_eq!(AlphaMatte::from_tensor(&t).unwrap(), a.quantized());
        let t3 = Tensor::f32(vec![1, 2, 2], vec![0.0; 4]).unwrap();
        assert!(AlphaMatte::from_tensor(&t3).is_ok());
        let t_bad = Tensor::f32(vec![2, 2, 1], vec![0.0; 4]).unwrap();
        assert!(AlphaMatte::from_tensor(&t_bad).is_err());
    }
}
