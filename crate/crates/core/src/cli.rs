//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver
//! non-convergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::dataset::{self, load_trimap, trimap_to_seeds, Annotation, MarkerKind, MarkerSpec};
use crate::error::{Error, Result};
use crate::eval::{self, load_alpha, load_mask, score_solution, Instance, Task};
use crate::field::{load_seed_png, save_seed_png, AlphaMatte, ProbabilityField};
use crate::image::{load_image, nearest_source};
use crate::matting_energy::matting_weights;
use crate::rng::Rng;
use crate::seg_energy::EdgeCounting;
use crate::tensor::{read_tensor, write_tensor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "deep-energy", version, about = "Random-walker segmentation and closed-form matting energies")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file of `key = value` lines; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (fallback: ENERGY_SEG_THREADS, then all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct EnergyArgs {
    /// Edge weight scale for segmentation
    #[arg(long)]
    pub beta: Option<f64>,

    /// Seed fidelity weight (defaults: 10 seg, 1 matting)
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Covariance regularizer for matting
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SolverArgs {
    /// Relative residual tolerance of the linear solver
    #[arg(long)]
    pub tol: Option<f64>,

    /// Iteration cap of the linear solver (default 10 x pixels)
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarkerArg {
    Circle,
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Seg,
    Matting,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Seg => Task::Seg,
            TaskArg::Matting => Task::Matting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchTask {
    Seg,
    Matting,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place foreground and background markers for an object mask
    Seeds {
        /// Object mask PNG (nonzero = object, or object ids with --object)
        #[arg(long)]
        mask: PathBuf,
        /// Output seed PNG (0 none, 1 background, 2 foreground)
        #[arg(long)]
        out: PathBuf,
        /// Random seed for fallback placement
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "circle")]
        marker: MarkerArg,
        /// Use only pixels with this object id
        #[arg(long)]
        object: Option<u32>,
        /// Reject objects covering less than this fraction of the image
        #[arg(long, default_value_t = 0.0)]
        min_area: f64,
        /// Resample the mask to SIZE x SIZE (nearest) first
        #[arg(long)]
        size: Option<usize>,
    },
    /// Compute the analytic minimizer of an energy
    Solve {
        #[arg(value_enum)]
        task: TaskArg,
        /// Input PNG (gray or RGB)
        #[arg(long)]
        image: PathBuf,
        /// Seed PNG; matting also accepts --trimap instead
        #[arg(long, required_unless_present = "trimap")]
        seeds: Option<PathBuf>,
        /// Trimap PNG (0 bg, 128 unknown, 255 fg)
        #[arg(long, conflicts_with = "seeds")]
        trimap: Option<PathBuf>,
        /// Output tensor (.detf)
        #[arg(long)]
        out: PathBuf,
        /// Resample inputs to SIZE x SIZE first
        #[arg(long)]
        size: Option<usize>,
        /// Also append the score record to this CSV file
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        energy: EnergyArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Convert a trimap into a seed PNG
    #[command(name = "trimap2seeds")]
    TrimapToSeeds {
        #[arg(long)]
        trimap: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the energy (and metric) of a candidate solution
    Score {
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Candidate tensor (.detf)
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long, required_unless_present = "manifest")]
        image: Option<PathBuf>,
        #[arg(long, required_unless_present = "manifest")]
        seeds: Option<PathBuf>,
        /// Ground truth: binary mask (seg) or alpha PNG (matting)
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Restrict matting MSE to this trimap's unknown pixels
        #[arg(long)]
        trimap: Option<PathBuf>,
        /// Take image, seeds and ground truth from a manifest
        #[arg(long, conflicts_with_all = ["image", "seeds", "gt"])]
        manifest: Option<PathBuf>,
        /// Manifest line (0-based, comments and blanks skipped)
        #[arg(long, default_value_t = 0, requires = "manifest")]
        entry: usize,
        /// Count every edge twice, as the sum over four neighbor images does
        #[arg(long)]
        double_count: bool,
        #[command(flatten)]
        energy: EnergyArgs,
    },
    /// Mean IOU of a probability field against a binary mask
    Miou {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Mean squared error of an alpha matte
    Mse {
        /// Predicted matte (.detf or PNG)
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Restrict to the trimap's unknown pixels
        #[arg(long)]
        trimap: Option<PathBuf>,
    },
    /// Time the analytic pipeline on synthetic instances
    Bench {
        #[arg(long, value_enum, default_value = "both")]
        task: BenchTask,
        /// Image sizes in pixels per side
        #[arg(long = "size", value_delimiter = ',', default_values_t = eval::BENCH_SIZES.to_vec())]
        sizes: Vec<usize>,
        /// Batches of 32 instances per size
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Instances per batch
        #[arg(long, default_value_t = eval::BENCH_BATCH)]
        batch: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the table here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        energy: EnergyArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Export matting pairwise weights as a [pixels, 81] f32 tensor
    ExportWeights {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => EXIT_SOLVER,
        _ => EXIT_DATA,
    }
}

fn load_config(global: &GlobalArgs) -> Result<Config> {
    let mut cfg = match &global.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if global.threads.is_some() {
        cfg.threads = global.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_energy(cfg: &mut Config, args: &EnergyArgs, task: Task) -> Result<()> {
    if let Some(b) = args.beta {
        cfg.beta = b;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(l) = args.lambda {
        match task {
            Task::Seg => cfg.lambda_seg = l,
            Task::Matting => cfg.lambda_matting = l,
        }
    }
    cfg.validate()
}

fn apply_solver(cfg: &mut Config, args: &SolverArgs) -> Result<()> {
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    if args.max_iter.is_some() {
        cfg.max_iter = args.max_iter;
    }
    cfg.validate()
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.global)?;
    let threads = cfg.resolved_threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| dispatch(cli.command, &mut cfg, threads))
}

fn dispatch(command: Command, cfg: &mut Config, threads: usize) -> Result<()> {
    match command {
        Command::Seeds {
            mask,
            out,
            seed,
            marker,
            object,
            min_area,
            size,
        } => {
            let mut annotation = Annotation::load(&mask)?;
            if let Some(s) = size {
                annotation = resize_annotation(&annotation, s)?;
            }
            let object_mask = match object {
                Some(id) => dataset::split_objects(&annotation, min_area)
                    .into_iter()
                    .find(|(oid, _)| *oid == id)
                    .map(|(_, m)| m)
                    .ok_or_else(|| {
                        Error::Invalid(format!("object {id} missing or smaller than the area threshold"))
                    })?,
                None => {
                    let m = annotation.foreground();
                    if (m.area() as f64) < min_area * annotation.ids.len() as f64 {
                        return Err(Error::Invalid("object smaller than the area threshold".into()));
                    }
                    m
                }
            };
            let kind = match marker {
                MarkerArg::Circle => MarkerKind::Circle,
                MarkerArg::Line => MarkerKind::Line,
            };
            let spec = MarkerSpec::for_image(kind, annotation.height, annotation.width);
            let mut rng = Rng::new(seed.unwrap_or(cfg.seed));
            let seeds = dataset::generate_seeds(&object_mask, spec, &mut rng)
                .map_err(|e| Error::Placement(format!("{}: {e}", mask.display())))?;
            save_seed_png(&out, &seeds)?;
            eprintln!(
                "seeds: {} foreground, {} background pixels -> {}",
                seeds.count(1),
                seeds.count(0),
                out.display()
            );
            Ok(())
        }
        Command::Solve {
            task,
            image,
            seeds,
            trimap,
            out,
            size,
            log,
            energy,
            solver,
        } => {
            let task = Task::from(task);
            apply_energy(cfg, &energy, task)?;
            apply_solver(cfg, &solver)?;
            let seeds = match (&seeds, &trimap) {
                (Some(p), _) => load_seed_png(p)?,
                (None, Some(t)) => trimap_to_seeds(&load_trimap(t)?),
                (None, None) => unreachable!("clap requires one of --seeds/--trimap"),
            };
            let mut inst = Instance {
                id: image
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                image: load_image(&image)?,
                seeds,
                ground_truth: None,
            };
            inst.check(task)?;
            if let Some(s) = size {
                inst = inst.resized(s)?;
            }
            let params = cfg.energy_params(task, EdgeCounting::Once);
            let solved = eval::solve_task(&inst.image, &inst.seeds, task, &params, cfg.solve_options())?;
            write_tensor(&out, &solved.solution.to_tensor())?;
            let record = eval::ScoreRecord {
                instance_id: inst.id.clone(),
                task,
                energy: solved.energy,
                metric: None,
                seconds: solved.seconds,
            };
            let iterations: Vec<String> = solved.reports.iter().map(|r| r.iterations.to_string()).collect();
            let residual = solved
                .reports
                .iter()
                .map(|r| r.relative_residual)
                .fold(0.0, f64::max);
            eprintln!(
                "solve {task}: energy {:.9e}, iterations [{}], max relative residual {residual:.2e}, {} clamped, {:.3}s -> {}",
                solved.energy,
                iterations.join(", "),
                solved.clamped_pixels,
                solved.seconds,
                out.display()
            );
            print_records(std::slice::from_ref(&record))?;
            if let Some(path) = log {
                append_record(&path, &record)?;
            }
            Ok(())
        }
        Command::TrimapToSeeds { trimap, out } => {
            let seeds = trimap_to_seeds(&load_trimap(&trimap)?);
            save_seed_png(&out, &seeds)
        }
        Command::Score {
            task,
            candidate,
            image,
            seeds,
            gt,
            trimap,
            manifest,
            entry,
            double_count,
            energy,
        } => {
            let task = Task::from(task);
            apply_energy(cfg, &energy, task)?;
            let entry = match manifest {
                Some(m) => {
                    let entries = dataset::read_manifest(&m)?;
                    let n = entries.len();
                    entries.into_iter().nth(entry).ok_or_else(|| {
                        Error::Invalid(format!("manifest has {n} entries, asked for {entry}"))
                    })?
                }
                None => dataset::ManifestEntry {
                    image: image.expect("clap requires --image"),
                    seeds: seeds.expect("clap requires --seeds"),
                    ground_truth: gt,
                },
            };
            let inst = Instance::load(&entry, task)?;
            let region = eval::load_region(trimap.as_deref())?;
            let counting = if double_count { EdgeCounting::Twice } else { EdgeCounting::Once };
            let params = cfg.energy_params(task, counting);
            let record = score_solution(&inst, &read_tensor(&candidate)?, task, &params, region.as_ref())?;
            print_records(&[record])
        }
        Command::Miou { pred, gt } => {
            let y = ProbabilityField::from_tensor(&read_tensor(&pred)?)?;
            let v = eval::miou(&y, &load_mask(&gt)?)?;
            println!("{v:?}");
            Ok(())
        }
        Command::Mse { pred, gt, trimap } => {
            let a = load_matte(&pred)?;
            let region = eval::load_region(trimap.as_deref())?;
            let v = eval::mse_alpha(&a, &load_alpha(&gt)?, region.as_ref())?;
            println!("{v:?}");
            Ok(())
        }
        Command::Bench {
            task,
            sizes,
            reps,
            batch,
            seed,
            out,
            energy,
            solver,
        } => {
            apply_solver(cfg, &solver)?;
            let tasks: &[Task] = match task {
                BenchTask::Seg => &[Task::Seg],
                BenchTask::Matting => &[Task::Matting],
                BenchTask::Both => &[Task::Seg, Task::Matting],
            };
            let mut text = String::from(eval::BenchRow::CSV_HEADER);
            text.push('\n');
            for &t in tasks {
                let mut task_cfg = cfg.clone();
                apply_energy(&mut task_cfg, &energy, t)?;
                let params = task_cfg.energy_params(t, EdgeCounting::Once);
                let rows = eval::bench(
                    &sizes,
                    reps,
                    batch,
                    t,
                    &params,
                    task_cfg.solve_options(),
                    seed.unwrap_or(cfg.seed),
                    threads,
                )?;
                for row in rows {
                    eprintln!("bench {} {}: mean {:.4}s over {} instances", row.task, row.size, row.mean_seconds, row.instances);
                    text.push_str(&row.csv_row());
                    text.push('\n');
                }
            }
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| Error::io(&p, e)),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::ExportWeights { image, out, epsilon } => {
            if let Some(e) = epsilon {
                cfg.epsilon = e;
                cfg.validate()?;
            }
            let img = load_image(&image)?;
            if img.channels() != 3 {
                return Err(Error::Invalid(format!("{}: matting weights need an RGB image", image.display())));
            }
            let w = matting_weights(&img, cfg.epsilon)?;
            write_tensor(&out, &w.to_tensor())
        }
    }
}

fn resize_annotation(a: &Annotation, size: usize) -> Result<Annotation> {
    if size == 0 {
        return Err(Error::Invalid("--size must be positive".into()));
    }
    let ids = (0..size * size)
        .map(|i| {
            let r = nearest_source(i / size, size, a.height);
            let c = nearest_source(i % size, size, a.width);
            a.ids[r * a.width + c]
        })
        .collect();
    Annotation::new(size, size, ids)
}

fn load_matte(path: &Path) -> Result<AlphaMatte> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        load_alpha(path)
    } else {
        AlphaMatte::from_tensor(&read_tensor(path)?)
    }
}

fn print_records(records: &[eval::ScoreRecord]) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "{}", eval::ScoreRecord::CSV_HEADER).map_err(io)?;
    for r in records {
        writeln!(out, "{}", r.csv_row()).map_err(io)?;
    }
    Ok(())
}

fn append_record(path: &Path, record: &eval::ScoreRecord) -> Result<()> {
    let exists = path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    if !exists {
        text.push_str(eval::ScoreRecord::CSV_HEADER);
        text.push('\n');
    }
    text.push_str(&record.csv_row());
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
