//! Regressor assembly. Each sample `x` becomes the row
//! `[a·vecf(x xᵀ) + c·[1…1, 0…0], b·xᵀ]` so that the network output is
//! linear in the weight vector.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadcore::{vecf_into, ActivationParams, ConvSpec};

/// `N` feature rows of length `n` with one scalar label each. Rows are
/// stored contiguously, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, labels: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDataset("feature count must be >= 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidDataset("dataset has no samples".into()));
        }
        if inputs.len() != labels.len() * n {
            return Err(Error::dims("dataset inputs", labels.len() * n, inputs.len()));
        }
        if inputs.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("dataset"));
        }
        Ok(Self { inputs, labels, n })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::dims("dataset labels", rows.len(), labels.len()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::dims("dataset row", n, bad.len()));
        }
        Self::new(rows.concat(), labels, n)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.inputs.chunks_exact(self.n)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    /// Rows `range` as a new dataset. Panics if the range is empty or out of bounds.
    pub(crate) fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        assert!(!range.is_empty() && range.end <= self.len());
        Dataset {
            inputs: self.inputs[range.start * self.n..range.end * self.n].to_vec(),
            labels: self.labels[range].to_vec(),
            n: self.n,
        }
    }
}

/// Dense `N×(q+n)` regressor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorMatrix {
    h: DMatrix<f64>,
    spec: ConvSpec,
    params: ActivationParams,
}

impl RegressorMatrix {
    /// Wraps an arbitrary matrix as a regressor for `spec`; only the column
    /// count is checked.
    pub fn from_matrix(h: DMatrix<f64>, spec: ConvSpec, params: ActivationParams) -> Result<Self> {
        if h.ncols() != spec.weight_len() {
            return Err(Error::dims("regressor columns", spec.weight_len(), h.ncols()));
        }
        Ok(Self { h, spec, params })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn spec(&self) -> ConvSpec {
        self.spec
    }

    pub fn params(&self) -> ActivationParams {
        self.params
    }

    pub fn nrows(&self) -> usize {
        self.h.nrows()
    }
}

/// Single regressor row for sample `x`.
pub fn regressor_row(x: &[f64], spec: &ConvSpec, params: &ActivationParams) -> Result<Vec<f64>> {
    if x.len() != spec.n() {
        return Err(Error::dims("regressor input", spec.n(), x.len()));
    }
    let mut row = Vec::with_capacity(spec.weight_len());
    fill_row(x, spec, params, &mut row);
    Ok(row)
}

fn fill_row(x: &[f64], spec: &ConvSpec, params: &ActivationParams, row: &mut Vec<f64>) {
    let n = spec.n();
    vecf_into(x, spec.f(), row);
    let (a, b, c) = (params.a(), params.b(), params.c());
    for (i, v) in row.iter_mut().enumerate() {
        *v *= a;
        if i < n {
            *v += c;
        }
    }
    row.extend(x.iter().map(|&xi| b * xi));
}

pub fn build_regressor(
    data: &Dataset,
    spec: &ConvSpec,
    params: &ActivationParams,
) -> Result<RegressorMatrix> {
    if data.n_features() != spec.n() {
        return Err(Error::dims("dataset features", spec.n(), data.n_features()));
    }
    let width = spec.weight_len();
    let mut buf = vec![0.0; data.len() * width];
    buf.par_chunks_exact_mut(width)
        .zip(data.inputs().par_chunks_exact(spec.n()))
        .for_each_init(
            || Vec::with_capacity(width),
            |scratch, (dst, x)| {
                scratch.clear();
                fill_row(x, spec, params, scratch);
                dst.copy_from_slice(scratch);
            },
        );
    Ok(RegressorMatrix {
        h: DMatrix::from_row_slice(data.len(), width, &buf),
        spec: *spec,
        params: *params,
    })
}
