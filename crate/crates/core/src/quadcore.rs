//! Core domain types: activation parameters, convolution geometry and the
//! banded index bookkeeping shared by the regressor and the model.
//!
//! Band entries are always enumerated diagonal-major: the main diagonal
//! `(0,0)..(n-1,n-1)` first, then the first superdiagonal `(0,1)..(n-2,n-1)`,
//! and so on up to diagonal `f-1`. Indices are 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the quadratic activation `σ(z) = a·z² + b·z + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationParams {
    a: f64,
    b: f64,
    c: f64,
}

impl ActivationParams {
    /// Activation that approximates a ReLU on roughly `[-5, 5]`.
    pub const RELU_LIKE: ActivationParams = ActivationParams {
        a: 0.0937,
        b: 0.5,
        c: 0.4688,
    };

    /// Validates `a > 0`, `c > 0` and `b² − 4ac ≥ 0`. Under these conditions a
    /// least-squares solution is also a solution of the convex training problem.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidActivation(format!(
                "coefficients must be finite (a={a}, b={b}, c={c})"
            )));
        }
        if a <= 0.0 {
            return Err(Error::InvalidActivation(format!("a must be > 0, got {a}")));
        }
        if c <= 0.0 {
            return Err(Error::InvalidActivation(format!("c must be > 0, got {c}")));
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(Error::InvalidActivation(format!(
                "b^2 - 4ac must be >= 0, got {disc}"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Builds parameters without the convexity conditions. Only the oracles and
    /// tests use this, e.g. for the pure square `σ(z) = z²`.
    pub fn unchecked(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.a * z * z + self.b * z + self.c
    }
}

/// Free-function form of [`ActivationParams::new`].
pub fn validate_activation(a: f64, b: f64, c: f64) -> Result<ActivationParams> {
    ActivationParams::new(a, b, c)
}

/// Free-function form of [`ActivationParams::eval`].
pub fn activation_eval(p: &ActivationParams, z: f64) -> f64 {
    p.eval(z)
}

/// Input length `n` and filter length `f` of a 1-D convolution with stride 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvSpec {
    n: usize,
    f: usize,
}

impl ConvSpec {
    pub fn new(n: usize, f: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("input length n must be >= 1".into()));
        }
        if f == 0 || f > n {
            return Err(Error::InvalidSpec(format!(
                "filter length f must satisfy 1 <= f <= n (n={n}, f={f})"
            )));
        }
        Ok(Self { n, f })
    }

    /// Fully connected case `f = n`: a plain quadratic network.
    pub fn dense(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    /// Number of patches `K = n − f + 1`.
    pub fn patches(&self) -> usize {
        self.n - self.f + 1
    }

    /// Number of band entries `q = (2n − f + 1)·f / 2`.
    pub fn band_len(&self) -> usize {
        (2 * self.n - self.f + 1) * self.f / 2
    }

    /// Length of the weight vector, `q + n`.
    pub fn weight_len(&self) -> usize {
        self.band_len() + self.n
    }

    /// Offset of diagonal `d` inside the band vector.
    pub fn diagonal_offset(&self, d: usize) -> usize {
        debug_assert!(d <= self.f);
        d * self.n - d * d.saturating_sub(1) / 2
    }

    /// Band position of entry `(row, col)` (either triangle), or `None` when
    /// the entry lies outside the band.
    pub fn band_index(&self, row: usize, col: usize) -> Option<usize> {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        if c >= self.n {
            return None;
        }
        let d = c - r;
        (d < self.f).then(|| self.diagonal_offset(d) + r)
    }
}

/// Ordered `(row, col)` pairs covering diagonals `0..f` of an `n×n` matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandIndexMap {
    spec: ConvSpec,
    pairs: Vec<(usize, usize)>,
}

impl BandIndexMap {
    pub fn new(spec: ConvSpec) -> Self {
        let n = spec.n();
        let pairs = (0..spec.f())
            .flat_map(|d| (0..n - d).map(move |r| (r, r + d)))
            .collect();
        Self { spec, pairs }
    }

    pub fn spec(&self) -> ConvSpec {
        self.spec
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Entries `x_r·x_c` of the first `f` diagonals of `x xᵀ`, diagonal-major.
pub fn vecf(x: &[f64], spec: &ConvSpec) -> Result<Vec<f64>> {
    if x.len() != spec.n() {
        return Err(Error::dims("vecf input", spec.n(), x.len()));
    }
    let mut out = Vec::with_capacity(spec.band_len());
    vecf_into(x, spec.f(), &mut out);
    Ok(out)
}

/// Appends the band products of `x` to `out`; `x.len()` must be the spec's `n`.
pub(crate) fn vecf_into(x: &[f64], f: usize, out: &mut Vec<f64>) {
    let n = x.len();
    for d in 0..f {
        out.extend((0..n - d).map(|r| x[r] * x[r + d]));
    }
}

/// Unique weight counts of the per-patch CQNN problem and of the banded
/// formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandCounts {
    pub cqnn_weights: usize,
    pub banded_weights: usize,
}

pub fn band_counts(spec: &ConvSpec) -> BandCounts {
    let (n, f) = (spec.n(), spec.f());
    BandCounts {
        cqnn_weights: (f + 3) * (n - f + 1) * f / 2,
        banded_weights: spec.band_len() + n,
    }
}
