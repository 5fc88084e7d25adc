//! Turning annotations into seeded training and evaluation instances.
//!
//! Annotation masks are only used to place seed markers; they never act
//! as labels. Every object gets a foreground marker and its complement a
//! background marker of the same shape, both planted at the region's
//! center of mass when the marker fits there and at a random region pixel
//! otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{SeedMap, BACKGROUND, FOREGROUND};
use crate::image::{read_png, sample_bilinear_clamped, write_png, Image, Raster};
use crate::rng::Rng;

pub const TRIMAP_BG: u8 = 0;
pub const TRIMAP_UNKNOWN: u8 = 128;
pub const TRIMAP_FG: u8 = 255;

/// Random placement attempts before giving up on a region.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    height: usize,
    width: usize,
    codes: Vec<u8>,
}

impl Trimap {
    pub fn new(height: usize, width: usize, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != height * width {
            return Err(Error::Shape(format!(
                "trimap {height}x{width} needs {} codes, got {}",
                height * width,
                codes.len()
            )));
        }
        if let Some(bad) = codes
            .iter()
            .find(|&&c| c != TRIMAP_BG && c != TRIMAP_UNKNOWN && c != TRIMAP_FG)
        {
            return Err(Error::Invalid(format!(
                "trimap code {bad}, expected 0, 128 or 255"
            )));
        }
        Ok(Trimap {
            height,
            width,
            codes,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn unknown(&self) -> impl Iterator<Item = bool> + '_ {
        self.codes.iter().map(|&c| c == TRIMAP_UNKNOWN)
    }
}

pub fn load_trimap(path: &Path) -> Result<Trimap> {
    let raster = read_png(path)?;
    if raster.channels != 1 {
        return Err(Error::Invalid(format!("{}: trimaps must be 8-bit gray", path.display())));
    }
    Trimap::new(raster.height, raster.width, raster.bytes).map_err(|e| match e {
        Error::Invalid(msg) => Error::Invalid(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_trimap(path: &Path, t: &Trimap) -> Result<()> {
    write_png(
        path,
        &Raster {
            height: t.height,
            width: t.width,
            channels: 1,
            bytes: t.codes.clone(),
        },
    )
}

/// Known foreground and background become seeds; unknown pixels stay free.
pub fn trimap_to_seeds(t: &Trimap) -> SeedMap {
    let mut seeds = SeedMap::empty(t.height, t.width, 2).expect("two classes");
    for (i, &code) in t.codes.iter().enumerate() {
        match code {
            TRIMAP_FG => seeds.set(FOREGROUND, i),
            TRIMAP_BG => seeds.set(BACKGROUND, i),
            _ => {}
        }
    }
    seeds
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "mask {height}x{width} needs {} pixels, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Mask {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let data = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Mask {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.width + c]
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn complement(&self) -> Mask {
        Mask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    /// Centroid of the set pixels, in (row, column) coordinates.
    pub fn center_of_mass(&self) -> Option<(f64, f64)> {
        let mut sum = (0.0, 0.0);
        let mut count = 0usize;
        for (i, _) in self.data.iter().enumerate().filter(|(_, &v)| v) {
            sum.0 += (i / self.width) as f64;
            sum.1 += (i % self.width) as f64;
            count += 1;
        }
        (count > 0).then(|| (sum.0 / count as f64, sum.1 / count as f64))
    }

    pub fn to_image(&self) -> Image {
        Image::new(
            self.height,
            self.width,
            1,
            self.data.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        )
        .expect("binary values are in range")
    }
}

/// Object-id annotation: `0` is background, every other value an object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub height: usize,
    pub width: usize,
    pub ids: Vec<u32>,
}

impl Annotation {
    pub fn new(height: usize, width: usize, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != height * width {
            return Err(Error::Shape(format!(
                "annotation {height}x{width} needs {} ids, got {}",
                height * width,
                ids.len()
            )));
        }
        Ok(Annotation { height, width, ids })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raster = read_png(path)?;
        if raster.channels != 1 {
            return Err(Error::Invalid(format!(
                "{}: annotation masks must be 8-bit gray",
                path.display()
            )));
        }
        Annotation::new(
            raster.height,
            raster.width,
            raster.bytes.iter().map(|&b| b as u32).collect(),
        )
    }

    /// Pixels with a nonzero id.
    pub fn foreground(&self) -> Mask {
        Mask {
            height: self.height,
            width: self.width,
            data: self.ids.iter().map(|&id| id != 0).collect(),
        }
    }
}

/// One mask per object id, in increasing id order, keeping objects whose
/// area is at least `min_area_fraction` of the image.
pub fn split_objects(annotation: &Annotation, min_area_fraction: f64) -> Vec<(u32, Mask)> {
    let mut ids: Vec<u32> = annotation.ids.iter().copied().filter(|&id| id != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    let n = annotation.ids.len() as f64;
    ids.into_iter()
        .map(|id| {
            let mask = Mask {
                height: annotation.height,
                width: annotation.width,
                data: annotation.ids.iter().map(|&v| v == id).collect(),
            };
            (id, mask)
        })
        .filter(|(_, m)| m.area() as f64 >= min_area_fraction * n)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerKind {
    /// Horizontal segment of half-length `radius`.
    Line,
    /// Disc of pixels within Euclidean distance `radius`.
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerSpec {
    pub kind: MarkerKind,
    pub radius: usize,
}

impl MarkerSpec {
    /// Radius `max(2, round(min(h, w) / 21))`, i.e. 3 pixels at 64x64.
    pub fn for_image(kind: MarkerKind, height: usize, width: usize) -> Self {
        let radius = ((height.min(width) as f64 / 21.0).round() as usize).max(2);
        MarkerSpec { kind, radius }
    }

    /// Offsets `(dr, dc)` covered by the marker, in row-major order.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius as isize;
        match self.kind {
            MarkerKind::Line => (-r..=r).map(|dc| (0, dc)).collect(),
            MarkerKind::Circle => (-r..=r)
                .flat_map(|dr| (-r..=r).map(move |dc| (dr, dc)))
                .filter(|(dr, dc)| dr * dr + dc * dc <= r * r)
                .collect(),
        }
    }
}

/// Pixel indices of the marker at `(r, c)` if every one lies in `region`.
fn marker_fit(region: &Mask, offsets: &[(isize, isize)], r: usize, c: usize) -> Option<Vec<usize>> {
    let mut out = Vec::with_capacity(offsets.len());
    for &(dr, dc) in offsets {
        let rr = r as isize + dr;
        let cc = c as isize + dc;
        if rr < 0 || cc < 0 || rr >= region.height as isize || cc >= region.width as isize {
            return None;
        }
        let (rr, cc) = (rr as usize, cc as usize);
        if !region.get(rr, cc) {
            return None;
        }
        out.push(rr * region.width + cc);
    }
    Some(out)
}

/// Marker pixels inside `region`: at the center of mass if the marker fits
/// there, else at uniformly drawn region pixels.
pub fn place_marker(region: &Mask, spec: MarkerSpec, rng: &mut Rng, name: &str) -> Result<Vec<usize>> {
    let (cr, cc) = region
        .center_of_mass()
        .ok_or_else(|| Error::Placement(format!("{name} region is empty")))?;
    let offsets = spec.offsets();
    let (r, c) = (cr.round() as usize, cc.round() as usize);
    if let Some(px) = marker_fit(region, &offsets, r, c) {
        return Ok(px);
    }
    let candidates: Vec<usize> = (0..region.data.len()).filter(|&i| region.data[i]).collect();
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let i = candidates[rng.below(candidates.len())];
        if let Some(px) = marker_fit(region, &offsets, i / region.width, i % region.width) {
            return Ok(px);
        }
    }
    Err(Error::Placement(format!(
        "no {:?} marker of radius {} fits in the {name} region after {MAX_PLACEMENT_ATTEMPTS} attempts",
        spec.kind, spec.radius
    )))
}

/// Binary seed map for one object: a foreground marker inside the object
/// and a background marker inside its complement.
pub fn generate_seeds(object: &Mask, spec: MarkerSpec, rng: &mut Rng) -> Result<SeedMap> {
    if object.area() == 0 {
        return Err(Error::Placement("object mask is empty".into()));
    }
    let fg = place_marker(object, spec, rng, "object")?;
    let bg = place_marker(&object.complement(), spec, rng, "background")?;
    let mut seeds = SeedMap::empty(object.height, object.width, 2)?;
    for i in fg {
        seeds.set(FOREGROUND, i);
    }
    for i in bg {
        seeds.set(BACKGROUND, i);
    }
    Ok(seeds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augmentation {
    Identity,
    FlipHorizontal,
    Rotate45,
    Rotate135,
}

pub const AUGMENTATIONS: [Augmentation; 4] = [
    Augmentation::Identity,
    Augmentation::FlipHorizontal,
    Augmentation::Rotate45,
    Augmentation::Rotate135,
];

impl Augmentation {
    /// Source coordinates `(row, col)` sampled by output pixel `(r, c)`.
    fn source(self, r: usize, c: usize, h: usize, w: usize) -> (f64, f64) {
        let angle = match self {
            Augmentation::Identity => return (r as f64, c as f64),
            Augmentation::FlipHorizontal => return (r as f64, (w - 1 - c) as f64),
            Augmentation::Rotate45 => 45f64.to_radians(),
            Augmentation::Rotate135 => 135f64.to_radians(),
        };
        let cy = (h as f64 - 1.0) / 2.0;
        let cx = (w as f64 - 1.0) / 2.0;
        let (dy, dx) = (r as f64 - cy, c as f64 - cx);
        let (s, co) = angle.sin_cos();
        (cy + co * dy - s * dx, cx + s * dy + co * dx)
    }

    /// Output pixels whose source lies inside the input image.
    pub fn valid_region(self, h: usize, w: usize) -> Mask {
        Mask::from_fn(h, w, |r, c| {
            let (sy, sx) = self.source(r, c, h, w);
            inside(sy, sx, h, w)
        })
    }
}

// tolerance absorbs rounding in the rotation of exact border coordinates
fn inside(sy: f64, sx: f64, h: usize, w: usize) -> bool {
    const SLACK: f64 = 1e-9;
    sy >= -SLACK && sx >= -SLACK && sy <= (h - 1) as f64 + SLACK && sx <= (w - 1) as f64 + SLACK
}

pub fn transform_image(img: &Image, aug: Augmentation) -> Image {
    let (h, w) = (img.height(), img.width());
    let ch = img.channels();
    Image::from_fn(h, w, ch, |r, c, k| {
        let (sy, sx) = aug.source(r, c, h, w);
        if inside(sy, sx, h, w) {
            sample_bilinear_clamped(img, sy, sx, k)
        } else {
            0.0
        }
    })
    .expect("resampled values stay in range")
}

pub fn transform_seeds(seeds: &SeedMap, aug: Augmentation) -> SeedMap {
    let (h, w) = (seeds.height(), seeds.width());
    let labels = seeds.labels();
    let out: Vec<u8> = (0..h * w)
        .map(|i| {
            let (sy, sx) = aug.source(i / w, i % w, h, w);
            let (ry, rx) = (sy.round(), sx.round());
            if ry >= 0.0 && rx >= 0.0 && ry < h as f64 && rx < w as f64 {
                labels[ry as usize * w + rx as usize]
            } else {
                0
            }
        })
        .collect();
    SeedMap::from_labels(h, w, seeds.classes(), &out).expect("labels come from a valid map")
}

/// The four training variants of an instance.
pub fn augment(img: &Image, seeds: &SeedMap) -> Result<Vec<(Image, SeedMap)>> {
    if img.height() != img.width() {
        return Err(Error::Invalid(format!(
            "augmentation needs square inputs, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    if seeds.height() != img.height() || seeds.width() != img.width() {
        return Err(Error::Shape("seed map and image sizes differ".into()));
    }
    Ok(AUGMENTATIONS
        .iter()
        .map(|&aug| (transform_image(img, aug), transform_seeds(seeds, aug)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub seeds: PathBuf,
    pub ground_truth: Option<PathBuf>,
}

/// Reads a tab-separated manifest. Relative paths are resolved against the
/// manifest's directory; blank lines and `#` comments are skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &str| -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [image, seeds] => out.push(ManifestEntry {
                image: resolve(image),
                seeds: resolve(seeds),
                ground_truth: None,
            }),
            [image, seeds, gt] => out.push(ManifestEntry {
                image: resolve(image),
                seeds: resolve(seeds),
                ground_truth: (!gt.is_empty()).then(|| resolve(gt)),
            }),
            _ => {
                return Err(Error::Invalid(format!(
                    "{}:{}: expected 2 or 3 tab-separated fields, got {}",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )))
            }
        }
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = String::new();
    for e in entries {
        text.push_str(&e.image.to_string_lossy());
        text.push('\t');
        text.push_str(&e.seeds.to_string_lossy());
        if let Some(gt) = &e.ground_truth {
            text.push('\t');
            text.push_str(&gt.to_string_lossy());
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(h: usize, w: usize, cy: f64, cx: f64, r: f64) -> Mask {
        Mask::from_fn(h, w, |y, x| {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            dy * dy + dx * dx <= r * r
        })
    }

    #[test]
    fn trimap_recoding() {
        let all_fg = Trimap::new(2, 2, vec![255; 4]).unwrap();
        let s = trimap_to_seeds(&all_fg);
        assert_eq!(s.plane(FOREGROUND), &[1; 4]);
        assert_eq!(s.plane(BACKGROUND), &[0; 4]);

        let unknown = trimap_to_seeds(&Trimap::new(2, 2, vec![128; 4]).unwrap());
        assert_eq!(unknown.total_count(), 0);

        let codes: Vec<u8> = (0..16).map(|i| if (i / 4 + i % 4) % 2 == 0 { 255 } else { 0 }).collect();
        let s = trimap_to_seeds(&Trimap::new(4, 4, codes.clone()).unwrap());
        for i in 0..16 {
            assert_eq!(s.plane(FOREGROUND)[i], (codes[i] == 255) as u8);
            assert_eq!(s.plane(BACKGROUND)[i], 1 - s.plane(FOREGROUND)[i]);
        }
        assert!(Trimap::new(1, 1, vec![7]).is_err());
    }

    #[test]
    fn splitting_objects() {
        let single = Annotation::new(2, 2, vec![0, 3, 3, 0]).unwrap();
        let objs = split_objects(&single, 0.0);
        assert_eq!(objs.len(), 1);
        assert_eq!(objs[0].1.data(), &[false, true, true, false]);

        let mut ids = vec![0u32; 64 * 64];
        for r in 10..30 {
            for c in 10..30 {
                ids[r * 64 + c] = 1;
            }
        }
        ids[60 * 64 + 60] = 2;
        let objs = split_objects(&Annotation::new(64, 64, ids).unwrap(), 0.01);
        assert_eq!(objs.len(), 1);
        assert_eq!(objs[0].0, 1);

        assert!(split_objects(&Annotation::new(3, 3, vec![0; 9]).unwrap(), 0.0).is_empty());
    }

    #[test]
    fn marker_geometry() {
        assert_eq!(MarkerSpec::for_image(MarkerKind::Circle, 64, 64).radius, 3);
        assert_eq!(MarkerSpec::for_image(MarkerKind::Circle, 16, 40).radius, 2);
        assert_eq!(MarkerSpec::for_image(MarkerKind::Line, 128, 128).radius, 6);
        assert_eq!(MarkerSpec { kind: MarkerKind::Line, radius: 3 }.offsets().len(), 7);
        assert_eq!(MarkerSpec { kind: MarkerKind::Circle, radius: 3 }.offsets().len(), 29);
    }

    #[test]
    fn full_image_object_seeds_at_center() {
        // complement is empty, so only the foreground marker can be placed
        let full = Mask::from_fn(21, 21, |_, _| true);
        let spec = MarkerSpec { kind: MarkerKind::Circle, radius: 3 };
        let px = place_marker(&full, spec, &mut Rng::new(0), "object").unwrap();
        let center = 10 * 21 + 10;
        assert!(px.contains(&center));
        assert_eq!(px.len(), 29);
        assert!(generate_seeds(&full, spec, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn centered_disc_seeds() {
        let obj = disc(64, 64, 31.5, 31.5, 12.0);
        let spec = MarkerSpec::for_image(MarkerKind::Circle, 64, 64);
        let seeds = generate_seeds(&obj, spec, &mut Rng::new(1)).unwrap();
        assert_eq!(seeds.count(FOREGROUND), 29);
        assert_eq!(seeds.count(BACKGROUND), 29);
        // foreground marker sits on the rounded center of mass
        assert_eq!(seeds.plane(FOREGROUND)[32 * 64 + 32], 1);
    }

    #[test]
    fn fallback_placement_is_deterministic() {
        // an L-shaped object whose center of mass falls outside it
        let obj = Mask::from_fn(40, 40, |r, c| (r < 8 && c < 36) || (c < 8 && r < 36));
        let (cr, cc) = obj.center_of_mass().unwrap();
        assert!(!obj.get(cr.round() as usize, cc.round() as usize));
        let spec = MarkerSpec { kind: MarkerKind::Circle, radius: 2 };
        let a = generate_seeds(&obj, spec, &mut Rng::new(5)).unwrap();
        let b = generate_seeds(&obj, spec, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        for (i, &v) in a.plane(FOREGROUND).iter().enumerate() {
            if v == 1 {
                assert!(obj.data()[i]);
            }
        }
    }

    #[test]
    fn thin_diagonal_fails_deterministically() {
        let obj = Mask::from_fn(32, 32, |r, c| r == c);
        let spec = MarkerSpec { kind: MarkerKind::Circle, radius: 2 };
        let e1 = generate_seeds(&obj, spec, &mut Rng::new(9)).unwrap_err().to_string();
        let e2 = generate_seeds(&obj, spec, &mut Rng::new(9)).unwrap_err().to_string();
        assert_eq!(e1, e2);
        assert!(e1.contains("object"), "{e1}");
    }

    #[test]
    fn seeds_stay_inside_their_regions() {
        let mut rng = Rng::new(2024);
        for trial in 0..100 {
            let cy = rng.uniform_range(16.0, 48.0);
            let cx = rng.uniform_range(16.0, 48.0);
            let rad = rng.uniform_range(5.0, 14.0);
            let obj = disc(64, 64, cy, cx, rad);
            let kind = if trial % 2 == 0 { MarkerKind::Circle } else { MarkerKind::Line };
            let seeds = generate_seeds(&obj, MarkerSpec::for_image(kind, 64, 64), &mut rng).unwrap();
            for i in 0..64 * 64 {
                if seeds.plane(FOREGROUND)[i] == 1 {
                    assert!(obj.data()[i]);
                }
                if seeds.plane(BACKGROUND)[i] == 1 {
                    assert!(!obj.data()[i]);
                }
            }
            assert!(seeds.count(FOREGROUND) > 0 && seeds.count(BACKGROUND) > 0);
        }
    }

    #[test]
    fn flip_twice_is_identity() {
        let mut rng = Rng::new(3);
        let img = Image::from_fn(9, 9, 3, |_, _, _| rng.uniform()).unwrap();
        let once = transform_image(&img, Augmentation::FlipHorizontal);
        assert_ne!(once, img);
        assert_eq!(transform_image(&once, Augmentation::FlipHorizontal), img);
        let seeds = SeedMap::from_labels(9, 9, 2, &(0..81).map(|i| (i % 3) as u8).collect::<Vec<_>>()).unwrap();
        let s1 = transform_seeds(&seeds, Augmentation::FlipHorizontal);
        assert_eq!(transform_seeds(&s1, Augmentation::FlipHorizontal), seeds);
    }

    #[test]
    fn constant_image_variants() {
        let img = Image::constant(16, 16, &[0.6]).unwrap();
        let seeds = SeedMap::empty(16, 16, 2).unwrap();
        let variants = augment(&img, &seeds).unwrap();
        assert_eq!(variants.len(), 4);
        for (aug, (out, _)) in AUGMENTATIONS.iter().zip(&variants) {
            let valid = aug.valid_region(16, 16);
            for i in 0..256 {
                if valid.data()[i] {
                    assert!((out.data()[i] - 0.6).abs() < 1e-12);
                } else {
                    assert_eq!(out.data()[i], 0.0);
                }
            }
        }
        let wide = Image::constant(4, 5, &[0.0]).unwrap();
        assert!(augment(&wide, &SeedMap::empty(4, 5, 2).unwrap()).is_err());
    }

    #[test]
    fn rotation_roughly_preserves_seed_count() {
        let mut rng = Rng::new(77);
        let spec = MarkerSpec::for_image(MarkerKind::Circle, 64, 64);
        for _ in 0..100 {
            let mut seeds = SeedMap::empty(64, 64, 2).unwrap();
            for class in [FOREGROUND, BACKGROUND] {
                // markers inside the disc that every rotation keeps in view
                let ang = rng.uniform() * std::f64::consts::TAU;
                let rad = rng.uniform() * 20.0;
                let r = (31.5 + rad * ang.sin()).round() as isize;
                let c = (31.5 + rad * ang.cos()).round() as isize;
                for (dr, dc) in spec.offsets() {
                    seeds.set(class, ((r + dr) * 64 + c + dc) as usize);
                }
            }
            let before = seeds.total_count() as f64;
            for aug in [Augmentation::Rotate45, Augmentation::Rotate135] {
                let after = transform_seeds(&seeds, aug).total_count() as f64;
                assert!((after - before).abs() <= 0.2 * before, "{before} -> {after}");
            }
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        fs::write(&path, "# comment\na.png\ts.png\tg.png\n\nb.png\tt.png\n/abs/c.png\tu.png\t\n").unwrap();
        let entries = read_manifest(&path).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0].image, dir.path().join("a.png"));
        assert_eq!(entries[0].ground_truth, Some(dir.path().join("g.png")));
        assert_eq!(entries[1].ground_truth, None);
        assert_eq!(entries[2].image, PathBuf::from("/abs/c.png"));
        assert_eq!(entries[2].ground_truth, None);

        let out = dir.path().join("out.tsv");
        write_manifest(&out, &entries).unwrap();
        assert_eq!(read_manifest(&out).unwrap(), entries);

        fs::write(&path, "only-one-field\n").unwrap();
        assert!(read_manifest(&path).is_err());
    }
}
