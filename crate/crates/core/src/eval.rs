//! Metrics, energy scoring of candidate solutions, and solve timing.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::dataset::{generate_seeds, load_trimap, ManifestEntry, Mask, MarkerKind, MarkerSpec, Trimap, TRIMAP_BG, TRIMAP_FG, TRIMAP_UNKNOWN};
use crate::error::{Error, Result};
use crate::field::{load_seed_png, AlphaMatte, ProbabilityField, SeedMap, FOREGROUND};
use crate::image::{load_image, read_png, resize, to_grayscale, Image, ResizeMode};
use crate::matting_energy::{self, assemble_matting_laplacian, matting_weights};
use crate::rng::Rng;
use crate::seg_energy::{self, assemble_laplacian, edge_weights, rw_energy_terms, EdgeCounting};
use crate::solver::{analytic_matting, analytic_rw, SolveOptions, SolveReport};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Seg,
    Matting,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Seg => "seg",
            Task::Matting => "matting",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seg" => Ok(Task::Seg),
            "matting" => Ok(Task::Matting),
            other => Err(Error::Invalid(format!("unknown task {other:?}, expected seg or matting"))),
        }
    }
}

/// Energy parameters. `lambda` applies to whichever task is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub beta: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub counting: EdgeCounting,
}

impl EnergyParams {
    pub fn defaults(task: Task) -> Self {
        EnergyParams {
            beta: seg_energy::DEFAULT_BETA,
            lambda: match task {
                Task::Seg => seg_energy::DEFAULT_LAMBDA,
                Task::Matting => matting_energy::DEFAULT_LAMBDA,
            },
            epsilon: matting_energy::DEFAULT_EPSILON,
            counting: EdgeCounting::Once,
        }
    }
}

/// Mean intersection-over-union of the argmax labeling against a binary
/// ground truth (set pixels = foreground). A class absent from both
/// counts as a perfect match.
pub fn miou(pred: &ProbabilityField, gt: &Mask) -> Result<f64> {
    if pred.classes() != 2 {
        return Err(Error::Shape(format!("mIOU needs 2 classes, got {}", pred.classes())));
    }
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let labels = pred.argmax();
    let gt_labels: Vec<usize> = gt.data().iter().map(|&v| v as usize).collect();
    Ok(miou_labels(&labels, &gt_labels, 2))
}

/// Mean IOU between two hard labelings with classes `0..classes`.
pub fn miou_labels(pred: &[usize], gt: &[usize], classes: usize) -> f64 {
    let total: f64 = (0..classes)
        .map(|l| {
            let mut inter = 0usize;
            let mut union = 0usize;
            for (&p, &g) in pred.iter().zip(gt) {
                let (a, b) = (p == l, g == l);
                inter += (a && b) as usize;
                union += (a || b) as usize;
            }
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    total / classes as f64
}

/// Mean squared alpha error over the trimap's unknown pixels, or over the
/// whole image when no trimap is given.
pub fn mse_alpha(pred: &AlphaMatte, gt: &AlphaMatte, region: Option<&Trimap>) -> Result<f64> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let include: Vec<bool> = match region {
        Some(t) => {
            if t.height() != pred.height() || t.width() != pred.width() {
                return Err(Error::Shape("trimap size differs from the matte".into()));
            }
            t.unknown().collect()
        }
        None => vec![true; pred.num_pixels()],
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((p, g), keep) in pred.data().iter().zip(gt.data()).zip(include) {
        if keep {
            sum += (p - g) * (p - g);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Invalid("trimap has no unknown pixels".into()));
    }
    Ok(sum / count as f64)
}

/// A loaded problem instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub image: Image,
    pub seeds: SeedMap,
    pub ground_truth: Option<GroundTruth>,
}

#[derive(Debug, Clone)]
pub enum GroundTruth {
    Mask(Mask),
    Alpha(AlphaMatte),
}

/// Binary mask PNG: nonzero pixels are foreground.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let raster = read_png(path)?;
    if raster.channels != 1 {
        return Err(Error::Invalid(format!("{}: masks must be 8-bit gray", path.display())));
    }
    Mask::new(raster.height, raster.width, raster.bytes.iter().map(|&b| b != 0).collect())
}

/// Alpha PNG: gray value / 255.
pub fn load_alpha(path: &Path) -> Result<AlphaMatte> {
    let img = to_grayscale(&load_image(path)?);
    AlphaMatte::new(img.height(), img.width(), img.data().to_vec())
}

impl Instance {
    pub fn load(entry: &ManifestEntry, task: Task) -> Result<Self> {
        let image = load_image(&entry.image)?;
        let seeds = load_seed_png(&entry.seeds)?;
        let ground_truth = match (&entry.ground_truth, task) {
            (None, _) => None,
            (Some(p), Task::Seg) => Some(GroundTruth::Mask(load_mask(p)?)),
            (Some(p), Task::Matting) => Some(GroundTruth::Alpha(load_alpha(p)?)),
        };
        let inst = Instance {
            id: entry
                .image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            image,
            seeds,
            ground_truth,
        };
        inst.check(task)?;
        Ok(inst)
    }

    pub fn check(&self, task: Task) -> Result<()> {
        let (h, w) = (self.image.height(), self.image.width());
        if self.seeds.height() != h || self.seeds.width() != w {
            return Err(Error::Shape(format!(
                "seeds {}x{} vs image {h}x{w}",
                self.seeds.height(),
                self.seeds.width()
            )));
        }
        if task == Task::Matting && self.seeds.classes() != 2 {
            return Err(Error::Invalid("matting seeds must use codes 0, 1, 2 only".into()));
        }
        let gt_dims = match &self.ground_truth {
            Some(GroundTruth::Mask(m)) => Some((m.height(), m.width())),
            Some(GroundTruth::Alpha(a)) => Some((a.height(), a.width())),
            None => None,
        };
        if let Some((gh, gw)) = gt_dims {
            if (gh, gw) != (h, w) {
                return Err(Error::Shape(format!("ground truth {gh}x{gw} vs image {h}x{w}")));
            }
        }
        Ok(())
    }

    /// Resamples image (bilinear), seeds and ground truth (nearest).
    pub fn resized(&self, size: usize) -> Result<Self> {
        let image = resize(&self.image, size, size, ResizeMode::Bilinear)?;
        let label_img = Image::new(
            self.seeds.height(),
            self.seeds.width(),
            1,
            self.seeds.labels().iter().map(|&l| l as f64 / 255.0).collect(),
        )?;
        let labels: Vec<u8> = resize(&label_img, size, size, ResizeMode::Nearest)?
            .data()
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        let seeds = SeedMap::from_labels(size, size, self.seeds.classes(), &labels)?;
        let ground_truth = match &self.ground_truth {
            None => None,
            Some(GroundTruth::Mask(m)) => {
                let r = resize(&m.to_image(), size, size, ResizeMode::Nearest)?;
                Some(GroundTruth::Mask(Mask::new(
                    size,
                    size,
                    r.data().iter().map(|&v| v > 0.5).collect(),
                )?))
            }
            Some(GroundTruth::Alpha(a)) => {
                let img = Image::new(a.height(), a.width(), 1, a.data().to_vec())?;
                let r = resize(&img, size, size, ResizeMode::Bilinear)?;
                Some(GroundTruth::Alpha(AlphaMatte::new(size, size, r.data().to_vec())?))
            }
        };
        Ok(Instance {
            id: self.id.clone(),
            image,
            seeds,
            ground_truth,
        })
    }
}

/// Random-walker energy of `y`, with weights from the grayscale image.
pub fn seg_energy(image: &Image, seeds: &SeedMap, y: &ProbabilityField, params: &EnergyParams) -> Result<f64> {
    let w = edge_weights(&to_grayscale(image), params.beta)?;
    rw_energy_terms(seeds, y, &w, params.lambda, params.counting).map(|t| t.total())
}

pub fn matting_energy(image: &Image, seeds: &SeedMap, alpha: &AlphaMatte, params: &EnergyParams) -> Result<f64> {
    let w = matting_weights(&rgb(image), params.epsilon)?;
    matting_energy::matting_energy(seeds, alpha, &w, params.lambda)
}

/// Gray images are replicated into three channels for matting.
fn rgb(image: &Image) -> Image {
    if image.channels() == 3 {
        return image.clone();
    }
    Image::from_fn(image.height(), image.width(), 3, |r, c, _| image.get(r, c, 0))
        .expect("values come from a valid image")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Seg(ProbabilityField),
    Matting(AlphaMatte),
}

impl Solution {
    pub fn to_tensor(&self) -> Tensor {
        match self {
            Solution::Seg(y) => y.to_tensor(),
            Solution::Matting(a) => a.to_tensor(),
        }
    }

    pub fn from_tensor(t: &Tensor, task: Task) -> Result<Self> {
        match task {
            Task::Seg => ProbabilityField::from_tensor(t).map(Solution::Seg),
            Task::Matting => AlphaMatte::from_tensor(t).map(Solution::Matting),
        }
    }
}

/// Outcome of an analytic solve. `solution` is already rounded to `f32`,
/// so `energy` is exactly what scoring the written tensor reproduces.
#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: Solution,
    pub energy: f64,
    pub reports: Vec<SolveReport>,
    pub clamped_pixels: usize,
    pub seconds: f64,
}

/// Builds the task's operator from the image and solves for its minimizer.
pub fn solve_task(image: &Image, seeds: &SeedMap, task: Task, params: &EnergyParams, opts: SolveOptions) -> Result<Solved> {
    let start = Instant::now();
    let (solution, reports, clamped_pixels) = match task {
        Task::Seg => {
            let w = edge_weights(&to_grayscale(image), params.beta)?;
            let l = assemble_laplacian(&w);
            let (y, reports) = analytic_rw(seeds, &l, params.lambda, opts)?;
            (Solution::Seg(y.quantized()), reports, 0)
        }
        Task::Matting => {
            let l = assemble_matting_laplacian(&rgb(image), params.epsilon)?;
            let sol = analytic_matting(seeds, &l, params.lambda, opts)?;
            (Solution::Matting(sol.alpha.quantized()), vec![sol.report], sol.clamped_pixels)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let energy = solution_energy(image, seeds, &solution, params)?;
    Ok(Solved {
        solution,
        energy,
        reports,
        clamped_pixels,
        seconds,
    })
}

pub fn solution_energy(image: &Image, seeds: &SeedMap, solution: &Solution, params: &EnergyParams) -> Result<f64> {
    match solution {
        Solution::Seg(y) => seg_energy(image, seeds, y, params),
        Solution::Matting(a) => matting_energy(image, seeds, a, params),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub instance_id: String,
    pub task: Task,
    pub energy: f64,
    pub metric: Option<f64>,
    pub seconds: f64,
}

impl ScoreRecord {
    pub const CSV_HEADER: &'static str = "instance_id,task,energy,metric,seconds";

    /// CSV row; floats use shortest round-trip formatting.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:?},{},{:?}",
            self.instance_id,
            self.task,
            self.energy,
            self.metric.map(|m| format!("{m:?}")).unwrap_or_default(),
            self.seconds
        )
    }
}

/// Scores a candidate: the task energy plus mIOU (seg) or MSE (matting)
/// when ground truth is available. `region` restricts MSE to the trimap's
/// unknown pixels.
pub fn score_solution(
    instance: &Instance,
    candidate: &Tensor,
    task: Task,
    params: &EnergyParams,
    region: Option<&Trimap>,
) -> Result<ScoreRecord> {
    let start = Instant::now();
    instance.check(task)?;
    let solution = Solution::from_tensor(candidate, task)?;
    let (h, w) = (instance.image.height(), instance.image.width());
    let dims = match &solution {
        Solution::Seg(y) => (y.height(), y.width()),
        Solution::Matting(a) => (a.height(), a.width()),
    };
    if dims != (h, w) {
        return Err(Error::Shape(format!(
            "candidate {}x{} vs image {h}x{w}",
            dims.0, dims.1
        )));
    }
    let energy = solution_energy(&instance.image, &instance.seeds, &solution, params)?;
    let metric = match (&solution, &instance.ground_truth) {
        (Solution::Seg(y), Some(GroundTruth::Mask(m))) => Some(miou(y, m)?),
        (Solution::Matting(a), Some(GroundTruth::Alpha(g))) => Some(mse_alpha(a, g, region)?),
        (_, None) => None,
        _ => return Err(Error::Invalid("ground truth kind does not match the task".into())),
    };
    Ok(ScoreRecord {
        instance_id: instance.id.clone(),
        task,
        energy,
        metric,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn load_region(path: Option<&Path>) -> Result<Option<Trimap>> {
    path.map(load_trimap).transpose()
}

/// Smooth random field in `[0, 1]`: a sum of bilinearly upsampled noise
/// octaves, rescaled to the full range.
pub fn band_limited_noise(size: usize, rng: &mut Rng) -> Vec<f64> {
    let mut acc = vec![0.0; size * size];
    let mut amplitude = 1.0;
    for grid in [4usize, 8, 16] {
        let coarse = Image::from_fn(grid, grid, 1, |_, _, _| rng.uniform()).expect("uniform in range");
        let fine = resize(&coarse, size, size, ResizeMode::Bilinear).expect("nonzero size");
        for (a, v) in acc.iter_mut().zip(fine.data()) {
            *a += amplitude * v;
        }
        amplitude *= 0.5;
    }
    let lo = acc.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    acc.iter().map(|v| (v - lo) / span).collect()
}

/// Synthetic instance: a soft-edged disc composited over a smooth
/// background. Segmentation gets one marker per region, matting a trimap
/// with an unknown band around the edge.
pub fn synthetic_instance(size: usize, task: Task, rng: &mut Rng) -> Result<Instance> {
    let radius = size as f64 * rng.uniform_range(0.22, 0.32);
    let cy = size as f64 / 2.0 + rng.uniform_range(-0.1, 0.1) * size as f64;
    let cx = size as f64 / 2.0 + rng.uniform_range(-0.1, 0.1) * size as f64;
    let edge = (size as f64 / 64.0).max(1.0);
    let alpha: Vec<f64> = (0..size * size)
        .map(|i| {
            let (dy, dx) = ((i / size) as f64 - cy, (i % size) as f64 - cx);
            let d = (dy * dy + dx * dx).sqrt() - radius;
            (0.5 - d / (2.0 * edge)).clamp(0.0, 1.0)
        })
        .collect();
    let fg: Vec<Vec<f64>> = (0..3).map(|_| band_limited_noise(size, rng)).collect();
    let bg: Vec<Vec<f64>> = (0..3).map(|_| band_limited_noise(size, rng)).collect();
    // foreground and background occupy different halves of the color range
    let image = Image::from_fn(size, size, 3, |r, c, k| {
        let i = r * size + c;
        let f = 0.55 + 0.45 * fg[k][i];
        let b = 0.45 * bg[k][i];
        alpha[i] * f + (1.0 - alpha[i]) * b
    })?;
    let object = Mask::new(size, size, alpha.iter().map(|&a| a >= 0.5).collect())?;
    let (seeds, ground_truth) = match task {
        Task::Seg => {
            let spec = MarkerSpec::for_image(MarkerKind::Circle, size, size);
            (generate_seeds(&object, spec, rng)?, GroundTruth::Mask(object))
        }
        Task::Matting => {
            let band = size as f64 / 16.0;
            let codes: Vec<u8> = (0..size * size)
                .map(|i| {
                    let (dy, dx) = ((i / size) as f64 - cy, (i % size) as f64 - cx);
                    let d = (dy * dy + dx * dx).sqrt() - radius;
                    if d < -band {
                        TRIMAP_FG
                    } else if d > band {
                        TRIMAP_BG
                    } else {
                        TRIMAP_UNKNOWN
                    }
                })
                .collect();
            let trimap = Trimap::new(size, size, codes)?;
            (
                crate::dataset::trimap_to_seeds(&trimap),
                GroundTruth::Alpha(AlphaMatte::new(size, size, alpha)?),
            )
        }
    };
    debug_assert_eq!(seeds.classes(), 2);
    debug_assert!(seeds.count(FOREGROUND) > 0);
    Ok(Instance {
        id: format!("synthetic-{task}-{size}"),
        image,
        seeds,
        ground_truth: Some(ground_truth),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub task: Task,
    pub size: usize,
    pub instances: usize,
    pub mean_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub mean_iterations: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str =
        "task,size,instances,mean_seconds,min_seconds,max_seconds,mean_iterations";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.1}",
            self.task,
            self.size,
            self.instances,
            self.mean_seconds,
            self.min_seconds,
            self.max_seconds,
            self.mean_iterations
        )
    }
}

/// Seconds and solver iterations of one bench instance.
type Timing = (f64, usize);

pub const BENCH_SIZES: [usize; 3] = [128, 256, 512];
pub const BENCH_BATCH: usize = 32;

/// Mean wall time of the analytic pipeline (operator assembly plus solve)
/// over `reps * batch` synthetic instances per size (`batch` is normally
/// [`BENCH_BATCH`]). Each solve runs on a single thread; up to `workers`
/// solves run side by side.
#[allow(clippy::too_many_arguments)]
pub fn bench(
    sizes: &[usize],
    reps: usize,
    batch: usize,
    task: Task,
    params: &EnergyParams,
    opts: SolveOptions,
    seed: u64,
    workers: usize,
) -> Result<Vec<BenchRow>> {
    if reps == 0 || batch == 0 {
        return Err(Error::Invalid("reps and batch must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let count = reps * batch;
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<(usize, Result<Timing>)>> = Mutex::new(Vec::with_capacity(count));
        std::thread::scope(|scope| {
            for _ in 0..workers.clamp(1, count) {
                scope.spawn(|| {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(1)
                        .build()
                        .expect("single-thread pool");
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        if k >= count {
                            break;
                        }
                        let outcome = pool.install(|| -> Result<Timing> {
                            let mut rng = Rng::split(seed ^ size as u64, k as u64);
                            let inst = synthetic_instance(size, task, &mut rng)?;
                            let solved = solve_task(&inst.image, &inst.seeds, task, params, opts)?;
                            let iters = solved.reports.iter().map(|r| r.iterations).sum();
                            Ok((solved.seconds, iters))
                        });
                        results.lock().unwrap().push((k, outcome));
                    }
                });
            }
        });
        let mut results = results.into_inner().unwrap();
        results.sort_by_key(|(k, _)| *k);
        let mut times = Vec::with_capacity(count);
        let mut iters = 0usize;
        for (_, r) in results {
            let (t, it) = r?;
            times.push(t);
            iters += it;
        }
        rows.push(BenchRow {
            task,
            size,
            instances: count,
            mean_seconds: times.iter().sum::<f64>() / count as f64,
            min_seconds: times.iter().copied().fold(f64::INFINITY, f64::min),
            max_seconds: times.iter().copied().fold(0.0, f64::max),
            mean_iterations: iters as f64 / count as f64,
        });
    }
    Ok(rows)
}
