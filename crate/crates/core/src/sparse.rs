//! Compressed-row sparse matrices for Laplacian-type operators.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows per parallel task in matrix-vector products.
const ROW_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    order: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed in
    /// input order; every row gets an explicit diagonal slot so diagonal
    /// shifts never change the sparsity pattern.
    pub fn from_triplets(order: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if order > u32::MAX as usize {
            return Err(Error::Shape(format!("matrix order {order} exceeds the u32 index range")));
        }
        let mut counts = vec![1usize; order];
        for &(r, c, _) in triplets {
            if r >= order || c >= order {
                return Err(Error::Shape(format!(
                    "entry ({r}, {c}) outside {order}x{order} matrix"
                )));
            }
            counts[r] += 1;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = counts.iter().map(|&c| Vec::with_capacity(c)).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            row.push((r, 0.0));
        }
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(order + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            // stable sort keeps duplicate accumulation order fixed
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() as usize == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c as u32);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            order,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds directly from sorted per-row entries. Each row must be sorted
    /// by column without duplicates.
    pub(crate) fn from_sorted_rows(order: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert_eq!(rows.len(), order);
        assert!(order <= u32::MAX as usize, "matrix order exceeds the u32 index range");
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(order + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|p| p[0].0 < p[1].0));
            for (c, v) in row {
                col_idx.push(c as u32);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            order,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(order: usize) -> Self {
        CsrMatrix {
            order,
            row_ptr: (0..=order).collect(),
            col_idx: (0..order as u32).collect(),
            values: vec![1.0; order],
        }
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let n = dense.len();
        let mut triplets = Vec::new();
        for (r, row) in dense.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape("dense matrix is not square".into()));
            }
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        CsrMatrix::from_triplets(n, &triplets)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .map(|&c| c as usize)
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&(c as u32)) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|r| self.get(r, r)).collect()
    }

    /// `self + diag(shift)`.
    pub fn add_diagonal(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.order {
            return Err(Error::Shape(format!(
                "diagonal shift of length {} for order {}",
                shift.len(),
                self.order
            )));
        }
        let mut out = self.clone();
        let mut missing = Vec::new();
        for (r, &s) in shift.iter().enumerate() {
            let span = out.row_ptr[r]..out.row_ptr[r + 1];
            match out.col_idx[span.clone()].binary_search(&(r as u32)) {
                Ok(k) => out.values[span.start + k] += s,
                Err(_) if s != 0.0 => missing.push((r, r, s)),
                Err(_) => {}
            }
        }
        if missing.is_empty() {
            return Ok(out);
        }
        let mut triplets = out.triplets();
        triplets.extend(missing);
        CsrMatrix::from_triplets(self.order, &triplets)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.order)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    /// `y = A x`. Rows are independent, so the result does not depend on
    /// how they are scheduled across threads.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.order);
        assert_eq!(y.len(), self.order);
        let row = |r: usize| -> f64 {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            self.values[span.clone()]
                .iter()
                .zip(&self.col_idx[span])
                .map(|(v, &c)| v * x[c as usize])
                .sum::<f64>()
        };
        if self.order <= ROW_CHUNK {
            for (r, out) in y.iter_mut().enumerate() {
                *out = row(r);
            }
        } else {
            y.par_chunks_mut(ROW_CHUNK)
                .enumerate()
                .for_each(|(chunk, ys)| {
                    let base = chunk * ROW_CHUNK;
                    for (k, out) in ys.iter_mut().enumerate() {
                        *out = row(base + k);
                    }
                });
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.order];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        crate::numeric::dot(x, &self.mul_vec(x))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.order]; self.order];
        for (r, row) in dense.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        dense
    }

    /// Largest `|A_ij - A_ji|`, or infinity when the patterns differ.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.order {
            for (c, v) in self.row(r) {
                let span = self.row_ptr[c]..self.row_ptr[c + 1];
                match self.col_idx[span.clone()].binary_search(&(r as u32)) {
                    Ok(k) => worst = worst.max((v - self.values[span.start + k]).abs()),
                    Err(_) => return f64::INFINITY,
                }
            }
        }
        worst
    }

    /// Row sums, i.e. `A 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.order).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }
}
