//! Engine configuration: `key = value` lines with `#` comments.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{EnergyParams, Task};
use crate::seg_energy::EdgeCounting;
use crate::solver::{SolveOptions, DEFAULT_TOL};
use crate::{matting_energy, seg_energy};

/// Environment fallback for the thread count.
pub const THREADS_ENV: &str = "ENERGY_SEG_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub beta: f64,
    pub lambda_seg: f64,
    pub lambda_matting: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            beta: seg_energy::DEFAULT_BETA,
            lambda_seg: seg_energy::DEFAULT_LAMBDA,
            lambda_matting: matting_energy::DEFAULT_LAMBDA,
            epsilon: matting_energy::DEFAULT_EPSILON,
            tol: DEFAULT_TOL,
            max_iter: None,
            seed: 0,
            threads: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Invalid(format!("config line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let float = || -> Result<f64> {
                value.parse::<f64>().map_err(|_| err(format!("{key}: not a number: {value:?}")))
            };
            let int = || -> Result<u64> {
                value.parse::<u64>().map_err(|_| err(format!("{key}: not an integer: {value:?}")))
            };
            match key {
                "beta" => cfg.beta = float()?,
                "lambda_seg" => cfg.lambda_seg = float()?,
                "lambda_matting" => cfg.lambda_matting = float()?,
                "epsilon" => cfg.epsilon = float()?,
                "tol" => cfg.tol = float()?,
                "max_iter" => cfg.max_iter = Some(int()? as usize),
                "seed" => cfg.seed = int()?,
                "threads" => cfg.threads = Some(int()? as usize),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text).map_err(|e| match e {
            Error::Invalid(msg) => Error::Invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_seg", self.lambda_seg),
            ("lambda_matting", self.lambda_matting),
            ("epsilon", self.epsilon),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::Invalid("max_iter must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Invalid("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn energy_params(&self, task: Task, counting: EdgeCounting) -> EnergyParams {
        EnergyParams {
            beta: self.beta,
            lambda: match task {
                Task::Seg => self.lambda_seg,
                Task::Matting => self.lambda_matting,
            },
            epsilon: self.epsilon,
            counting,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    /// Explicit setting, else the environment fallback, else all cores.
    pub fn resolved_threads(&self) -> Result<usize> {
        if let Some(t) = self.threads {
            return Ok(t);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(t) if t > 0 => Ok(t),
                _ => Err(Error::Invalid(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
            },
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}
