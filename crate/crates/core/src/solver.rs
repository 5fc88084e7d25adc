//! Jacobi-preconditioned conjugate gradients and the closed-form
//! minimizers `(L + lambda Q) y = lambda Q x` of both energies.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{AlphaMatte, ProbabilityField, SeedMap, BACKGROUND, FOREGROUND};
use crate::numeric::norm;
use crate::sparse::CsrMatrix;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target `||b - A x|| / ||b||`.
    pub tol: f64,
    /// Iteration cap; `None` means ten times the system order.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub seconds: f64,
}

/// Entries per block of the fused CG kernels. Partial sums are formed per
/// block and added in block order, so iterates do not depend on the
/// thread count.
const BLOCK: usize = 8192;

/// Solves `A x = b` for symmetric positive definite `A`.
///
/// The returned residual is recomputed from scratch, not taken from the CG
/// recurrence; if the two disagree the iteration restarts from the current
/// iterate.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], opts: SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.order();
    if b.len() != n {
        return Err(Error::Shape(format!("right-hand side of length {} for order {n}", b.len())));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::Invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n).max(1);
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }
    // zero diagonal entries fall back to the identity
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
        .collect();
    let threshold = opts.tol * b_norm;
    let op = Operator::new(a);

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    let (mut rz, mut rr) = precondition(&inv_diag, &r, &mut z);
    p.copy_from_slice(&z);
    loop {
        if rr.sqrt() <= threshold {
            let true_r = residual_vec(a, &x, b);
            let true_res = norm(&true_r);
            if true_res <= threshold {
                return Ok((
                    x,
                    SolveReport {
                        iterations,
                        relative_residual: true_res / b_norm,
                        seconds: start.elapsed().as_secs_f64(),
                    },
                ));
            }
            // recurrence drifted; restart from the true residual
            r = true_r;
            (rz, _) = precondition(&inv_diag, &r, &mut z);
            p.copy_from_slice(&z);
        }
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: residual(a, &x, b) / b_norm,
                hint: String::new(),
            });
        }
        let pap = apply_and_dot(&op, &p, &mut ap);
        if pap.is_nan() || pap <= 0.0 {
            return Err(Error::NonConvergence {
                iterations,
                residual: residual(a, &x, b) / b_norm,
                hint: format!(" (matrix not positive definite: p^T A p = {pap:e})"),
            });
        }
        let step = rz / pap;
        let (rz_next, rr_next) = update(step, &p, &ap, &inv_diag, &mut x, &mut r, &mut z);
        let beta = rz_next / rz;
        rz = rz_next;
        rr = rr_next;
        p.par_chunks_mut(BLOCK)
            .zip(z.par_chunks(BLOCK))
            .for_each(|(pc, zc)| {
                for (pi, zi) in pc.iter_mut().zip(zc) {
                    *pi = zi + beta * *pi;
                }
            });
        iterations += 1;
    }
}

/// Storage used inside the iteration. Grid operators have few distinct
/// diagonals, so they are copied into diagonal (DIA) form, which needs no
/// column indices; anything else stays in CSR.
enum Operator<'a> {
    Csr(&'a CsrMatrix),
    Dia(DiaMatrix),
}

/// Diagonal storage: `data[k][i] = A[i, i + offsets[k]]` for the
/// nonnegative offsets, ascending. Subdiagonals are read from the matching
/// superdiagonal, `A[i, i - o] = A[i - o, i]`, which halves the storage
/// of a symmetric matrix.
struct DiaMatrix {
    offsets: Vec<isize>,
    data: Vec<Vec<f64>>,
}

/// DIA is used when the matrix has at most this many distinct diagonals.
const MAX_DIAGONALS: usize = 32;

impl DiaMatrix {
    /// Returns `None` unless `a` is exactly symmetric with few diagonals.
    fn from_csr(a: &CsrMatrix) -> Option<Self> {
        let n = a.order();
        let mut offsets: Vec<isize> = Vec::new();
        for r in 0..n {
            for (c, v) in a.row(r) {
                if c < r {
                    continue;
                }
                if a.get(c, r) != v {
                    return None;
                }
                let off = (c - r) as isize;
                if let Err(pos) = offsets.binary_search(&off) {
                    if offsets.len() == MAX_DIAGONALS {
                        return None;
                    }
                    offsets.insert(pos, off);
                }
            }
        }
        // padding must not outweigh the missing index arrays
        if offsets.is_empty() || (2 * offsets.len() - 1) * n > 2 * a.nnz() {
            return None;
        }
        let mut data = vec![vec![0.0; n]; offsets.len()];
        for r in 0..n {
            for (c, v) in a.row(r) {
                if c >= r {
                    let k = offsets.binary_search(&((c - r) as isize)).unwrap();
                    data[k][r] = v;
                }
            }
        }
        Some(DiaMatrix { offsets, data })
    }
}

impl<'a> Operator<'a> {
    fn new(a: &'a CsrMatrix) -> Self {
        match DiaMatrix::from_csr(a) {
            Some(d) => Operator::Dia(d),
            None => Operator::Csr(a),
        }
    }

    /// `out = A[rows, :] x` for the rows `base..base + out.len()`.
    fn apply_rows(&self, x: &[f64], base: usize, out: &mut [f64]) {
        match self {
            Operator::Csr(a) => {
                let (row_ptr, col_idx, values) = (a.row_ptr(), a.col_idx(), a.values());
                for (k, o) in out.iter_mut().enumerate() {
                    let row = base + k;
                    let span = row_ptr[row]..row_ptr[row + 1];
                    *o = values[span.clone()]
                        .iter()
                        .zip(&col_idx[span])
                        .map(|(w, &c)| w * x[c as usize])
                        .sum();
                }
            }
            Operator::Dia(d) => {
                let n = x.len() as isize;
                let end = base + out.len();
                out.fill(0.0);
                let lower = d.offsets.iter().zip(&d.data).rev().filter(|(o, _)| **o > 0).map(|(o, v)| (-o, v));
                let upper = d.offsets.iter().zip(&d.data).map(|(o, v)| (*o, v));
                for (off, diag) in lower.chain(upper) {
                    let lo = (base as isize).max(-off) as usize;
                    let hi = (end as isize).min(n - off);
                    if hi <= lo as isize {
                        continue;
                    }
                    let hi = hi as usize;
                    // the stored entry of A[i, i + off] sits at row min(i, i + off)
                    let shift = off.min(0);
                    let vals = &diag[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                    let src = &x[(lo as isize + off) as usize..(hi as isize + off) as usize];
                    for ((o, w), xv) in out[lo - base..hi - base].iter_mut().zip(vals).zip(src) {
                        *o += w * xv;
                    }
                }
            }
        }
    }
}

/// `ap = A p`, returning `p . ap`.
fn apply_and_dot(a: &Operator<'_>, p: &[f64], ap: &mut [f64]) -> f64 {
    let partials: Vec<f64> = ap
        .par_chunks_mut(BLOCK)
        .enumerate()
        .map(|(blk, out)| {
            let base = blk * BLOCK;
            a.apply_rows(p, base, out);
            out.iter().zip(&p[base..]).map(|(v, pi)| v * pi).sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

/// `x += step p`, `r -= step ap`, `z = D^-1 r`; returns `(r . z, r . r)`.
fn update(
    step: f64,
    p: &[f64],
    ap: &[f64],
    inv_diag: &[f64],
    x: &mut [f64],
    r: &mut [f64],
    z: &mut [f64],
) -> (f64, f64) {
    let partials: Vec<(f64, f64)> = x
        .par_chunks_mut(BLOCK)
        .zip(r.par_chunks_mut(BLOCK))
        .zip(z.par_chunks_mut(BLOCK))
        .enumerate()
        .map(|(blk, ((xc, rc), zc))| {
            let base = blk * BLOCK;
            let (mut rz, mut rr) = (0.0, 0.0);
            for k in 0..xc.len() {
                let i = base + k;
                xc[k] += step * p[i];
                let ri = rc[k] - step * ap[i];
                rc[k] = ri;
                let zi = ri * inv_diag[i];
                zc[k] = zi;
                rz += ri * zi;
                rr += ri * ri;
            }
            (rz, rr)
        })
        .collect();
    partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
}

/// `z = D^-1 r`; returns `(r . z, r . r)`.
fn precondition(inv_diag: &[f64], r: &[f64], z: &mut [f64]) -> (f64, f64) {
    let partials: Vec<(f64, f64)> = z
        .par_chunks_mut(BLOCK)
        .enumerate()
        .map(|(blk, zc)| {
            let base = blk * BLOCK;
            let (mut rz, mut rr) = (0.0, 0.0);
            for (k, zi) in zc.iter_mut().enumerate() {
                let ri = r[base + k];
                *zi = ri * inv_diag[base + k];
                rz += ri * *zi;
                rr += ri * ri;
            }
            (rz, rr)
        })
        .collect();
    partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
}

fn residual_vec(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut ax = a.mul_vec(x);
    for (v, bi) in ax.iter_mut().zip(b) {
        *v = bi - *v;
    }
    ax
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    norm(&residual_vec(a, x, b))
}

/// First pixel of each connected component of the matrix graph that holds
/// no seed. Empty when every component is anchored.
pub fn unseeded_components(a: &CsrMatrix, seeded: &[f64]) -> Vec<usize> {
    let n = a.order();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for r in 0..n {
        for (c, v) in a.row(r) {
            if c != r && v != 0.0 {
                let (ra, rb) = (find(&mut parent, r), find(&mut parent, c));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut anchored = vec![false; n];
    for i in 0..n {
        if seeded[i] != 0.0 {
            let root = find(&mut parent, i);
            anchored[root] = true;
        }
    }
    let mut out = Vec::new();
    let mut reported = vec![false; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if !anchored[root] && !reported[root] {
            reported[root] = true;
            out.push(i);
        }
    }
    out
}

fn coverage_check(a: &CsrMatrix, seeded: &[f64], width: usize) -> Result<()> {
    let missing = unseeded_components(a, seeded);
    if let Some(&first) = missing.first() {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: f64::NAN,
            hint: format!(
                ": {} connected component(s) carry no seed, first contains pixel ({}, {})",
                missing.len(),
                first / width,
                first % width
            ),
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("lambda must be positive, got {lambda}")))
    }
}

/// Random-walker probabilities for every class.
pub fn analytic_rw(
    seeds: &SeedMap,
    laplacian: &CsrMatrix,
    lambda: f64,
    opts: SolveOptions,
) -> Result<(ProbabilityField, Vec<SolveReport>)> {
    check_lambda(lambda)?;
    let n = seeds.num_pixels();
    if laplacian.order() != n {
        return Err(Error::Shape(format!(
            "Laplacian order {} for {n} pixels",
            laplacian.order()
        )));
    }
    let q = seeds.seeded_mask();
    let shift: Vec<f64> = q.iter().map(|v| lambda * v).collect();
    let system = laplacian.add_diagonal(&shift)?;
    coverage_check(&system, &q, seeds.width())?;
    let results: Vec<Result<(Vec<f64>, SolveReport)>> = (0..seeds.classes())
        .into_par_iter()
        .map(|l| {
            let rhs: Vec<f64> = seeds
                .plane(l)
                .iter()
                .zip(&shift)
                .map(|(&x, s)| s * x as f64)
                .collect();
            solve_spd(&system, &rhs, opts).map_err(|e| match e {
                Error::NonConvergence {
                    iterations,
                    residual,
                    hint,
                } => Error::NonConvergence {
                    iterations,
                    residual,
                    hint: format!("{hint} (class {l})"),
                },
                other => other,
            })
        })
        .collect();
    let mut planes = Vec::with_capacity(seeds.classes());
    let mut reports = Vec::with_capacity(seeds.classes());
    for res in results {
        let (plane, report) = res?;
        planes.push(plane);
        reports.push(report);
    }
    Ok((
        ProbabilityField::from_planes(seeds.height(), seeds.width(), planes)?,
        reports,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MattingSolution {
    /// Solution clamped to `[0, 1]`.
    pub alpha: AlphaMatte,
    /// Raw linear-system solution.
    pub unclamped: AlphaMatte,
    /// Pixels moved by the clamp.
    pub clamped_pixels: usize,
    pub report: SolveReport,
}

/// Closed-form alpha matte from binary seeds (foreground = class 1).
pub fn analytic_matting(
    seeds: &SeedMap,
    laplacian: &CsrMatrix,
    lambda: f64,
    opts: SolveOptions,
) -> Result<MattingSolution> {
    check_lambda(lambda)?;
    if seeds.classes() != 2 {
        return Err(Error::Shape(format!(
            "matting seeds need 2 classes, got {}",
            seeds.classes()
        )));
    }
    let n = seeds.num_pixels();
    if laplacian.order() != n {
        return Err(Error::Shape(format!(
            "Laplacian order {} for {n} pixels",
            laplacian.order()
        )));
    }
    if seeds.count(FOREGROUND) + seeds.count(BACKGROUND) == 0 {
        return Err(Error::Invalid("matting needs at least one seed".into()));
    }
    let q = seeds.seeded_mask();
    let shift: Vec<f64> = q.iter().map(|v| lambda * v).collect();
    let system = laplacian.add_diagonal(&shift)?;
    coverage_check(&system, &q, seeds.width())?;
    let rhs: Vec<f64> = seeds
        .plane(FOREGROUND)
        .iter()
        .map(|&x| lambda * x as f64)
        .collect();
    let (raw, report) = solve_spd(&system, &rhs, opts)?;
    let unclamped = AlphaMatte::new(seeds.height(), seeds.width(), raw)?;
    let alpha = unclamped.clamped();
    let clamped_pixels = unclamped
        .data()
        .iter()
        .zip(alpha.data())
        .filter(|(a, b)| a != b)
        .count();
    Ok(MattingSolution {
        alpha,
        unclamped,
        clamped_pixels,
        report,
    })
}
