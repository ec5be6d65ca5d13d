//! The banded quadratic input-output model
//! `ŷ(x) = a·xᵀZ̄¹x + b·Z̄²ᵀx + c·Z̄⁴` with `Z̄⁴ = trace(Z̄¹)` and
//! `Z̄¹[r,c] = 0` whenever `|r − c| ≥ f`.
//!
//! `Z̄¹` is kept as its band coefficients only (diagonal-major, true values),
//! so entries outside the band cannot be represented at all.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::quadcore::{ActivationParams, ConvSpec};
use crate::solver::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    band: Vec<f64>,
    zbar2: Vec<f64>,
    zbar4: f64,
    spec: ConvSpec,
    params: ActivationParams,
}

impl QuadraticModel {
    /// Builds a model from band coefficients of `Z̄¹` and the linear block `Z̄²`.
    pub fn from_parts(
        band: Vec<f64>,
        zbar2: Vec<f64>,
        spec: ConvSpec,
        params: ActivationParams,
    ) -> Result<Self> {
        if band.len() != spec.band_len() {
            return Err(Error::dims("Z̄¹ band", spec.band_len(), band.len()));
        }
        if zbar2.len() != spec.n() {
            return Err(Error::dims("Z̄²", spec.n(), zbar2.len()));
        }
        if band.iter().chain(&zbar2).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("model coefficients"));
        }
        let zbar4 = band[..spec.n()].iter().sum();
        Ok(Self {
            band,
            zbar2,
            zbar4,
            spec,
            params,
        })
    }

    /// Builds a model from a dense symmetric `Z̄¹`. Fails if the matrix is not
    /// symmetric or has nonzero entries outside the band of width `f`.
    pub fn from_dense(
        zbar1: &DMatrix<f64>,
        zbar2: Vec<f64>,
        f: usize,
        params: ActivationParams,
    ) -> Result<Self> {
        let n = zbar1.nrows();
        if zbar1.ncols() != n {
            return Err(Error::dims("Z̄¹ columns", n, zbar1.ncols()));
        }
        let spec = ConvSpec::new(n, f)?;
        for r in 0..n {
            for c in 0..n {
                let v = zbar1[(r, c)];
                if r.abs_diff(c) >= f && v != 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "Z̄¹[{r},{c}] = {v} lies outside the band of width {f}"
                    )));
                }
                if v != zbar1[(c, r)] {
                    return Err(Error::InvalidSpec(format!("Z̄¹ is not symmetric at ({r},{c})")));
                }
            }
        }
        let band = (0..f)
            .flat_map(|d| (0..n - d).map(move |r| (r, r + d)))
            .map(|(r, c)| zbar1[(r, c)])
            .collect();
        Self::from_parts(band, zbar2, spec, params)
    }

    pub fn spec(&self) -> ConvSpec {
        self.spec
    }

    pub fn params(&self) -> ActivationParams {
        self.params
    }

    /// Band coefficients of `Z̄¹`, diagonal-major.
    pub fn band(&self) -> &[f64] {
        &self.band
    }

    pub fn zbar2(&self) -> &[f64] {
        &self.zbar2
    }

    pub fn zbar4(&self) -> f64 {
        self.zbar4
    }

    pub fn zbar1(&self, row: usize, col: usize) -> f64 {
        self.spec.band_index(row, col).map_or(0.0, |i| self.band[i])
    }

    pub fn zbar1_dense(&self) -> DMatrix<f64> {
        let n = self.spec.n();
        DMatrix::from_fn(n, n, |r, c| self.zbar1(r, c))
    }

    /// Inverse of [`reconstruct`]: off-diagonal band entries are doubled.
    pub fn to_weights(&self) -> WeightVector {
        let n = self.spec.n();
        let mut theta: Vec<f64> = self
            .band
            .iter()
            .enumerate()
            .map(|(i, &z)| if i < n { z } else { 2.0 * z })
            .collect();
        theta.extend_from_slice(&self.zbar2);
        WeightVector::new(theta, self.spec).expect("band and Z̄² lengths are consistent")
    }

    /// `Z̄¹ x` using only the band entries.
    pub fn zbar1_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let n = self.spec.n();
        let mut out: Vec<f64> = (0..n).map(|i| self.band[i] * x[i]).collect();
        for d in 1..self.spec.f() {
            let off = self.spec.diagonal_offset(d);
            for r in 0..n - d {
                let z = self.band[off + r];
                out[r] += z * x[r + d];
                out[r + d] += z * x[r];
            }
        }
        Ok(out)
    }

    /// `xᵀZ̄¹x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let n = self.spec.n();
        let mut acc: f64 = (0..n).map(|i| self.band[i] * x[i] * x[i]).sum();
        for d in 1..self.spec.f() {
            let off = self.spec.diagonal_offset(d);
            acc += 2.0
                * (0..n - d)
                    .map(|r| self.band[off + r] * x[r] * x[r + d])
                    .sum::<f64>();
        }
        Ok(acc)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let quad = self.quadratic_form(x)?;
        let lin: f64 = self.zbar2.iter().zip(x).map(|(z, v)| z * v).sum();
        let p = self.params;
        Ok(p.a() * quad + p.b() * lin + p.c() * self.zbar4)
    }

    /// Gradient of the output with respect to the input at `x0`:
    /// `2a·Z̄¹x0 + b·Z̄²`.
    pub fn sensitivity(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let zx = self.zbar1_mul(x0)?;
        let (a, b) = (self.params.a(), self.params.b());
        Ok(zx
            .iter()
            .zip(&self.zbar2)
            .map(|(z, l)| 2.0 * a * z + b * l)
            .collect())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.n() {
            return Err(Error::dims("model input", self.spec.n(), x.len()));
        }
        Ok(())
    }

    /// JSON model file. Numbers are written with 17 significant digits, which
    /// round-trips every finite `f64` exactly. `Z̄⁴` is not stored.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let p = self.params;
        s.push_str("{\n");
        let _ = writeln!(s, "  \"n\": {},", self.spec.n());
        let _ = writeln!(s, "  \"f\": {},", self.spec.f());
        let _ = writeln!(s, "  \"a\": {},", num(p.a()));
        let _ = writeln!(s, "  \"b\": {},", num(p.b()));
        let _ = writeln!(s, "  \"c\": {},", num(p.c()));
        let _ = writeln!(s, "  \"zbar1_band\": {},", num_list(&self.band));
        let _ = writeln!(s, "  \"zbar2\": {}", num_list(&self.zbar2));
        s.push_str("}\n");
        s
    }

    pub fn deserialize(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::MalformedModelFile {
            line: Some(e.line()),
            field: "json".into(),
            message: e.to_string(),
        })?;
        let malformed = |field: &str, message: String| Error::MalformedModelFile {
            line: line_of(text, field),
            field: field.into(),
            message,
        };

        let spec = ConvSpec::new(file.n, file.f).map_err(|e| malformed("f", e.to_string()))?;
        let params = ActivationParams::new(file.a, file.b, file.c)
            .map_err(|e| malformed("a", e.to_string()))?;
        let q = spec.band_len();
        if file.zbar1_band.len() > q {
            return Err(malformed(
                "zbar1_band",
                format!(
                    "{} entries given but a band of width f={} holds {q}; Z̄¹ must vanish where |r-c| >= f",
                    file.zbar1_band.len(),
                    spec.f()
                ),
            ));
        }
        if file.zbar1_band.len() < q {
            return Err(malformed(
                "zbar1_band",
                format!("expected {q} entries, found {}", file.zbar1_band.len()),
            ));
        }
        if file.zbar2.len() != spec.n() {
            return Err(malformed(
                "zbar2",
                format!("expected {} entries, found {}", spec.n(), file.zbar2.len()),
            ));
        }
        let model = Self::from_parts(file.zbar1_band, file.zbar2, spec, params)
            .map_err(|e| malformed("zbar1_band", e.to_string()))?;
        if let Some(z4) = file.zbar4 {
            let tr = model.zbar4;
            if (z4 - tr).abs() > 1e-9 * tr.abs().max(z4.abs()).max(1.0) {
                return Err(malformed(
                    "zbar4",
                    format!("{z4} does not match trace(Z̄¹) = {tr}"),
                ));
            }
        }
        Ok(model)
    }
}

/// Builds the banded model encoded by a weight vector. Off-diagonal entries of
/// the weight vector hold `2·Z̄¹[r,c]` and are halved here.
pub fn reconstruct(theta: &WeightVector, params: ActivationParams) -> Result<QuadraticModel> {
    let spec = theta.spec();
    let (n, q) = (spec.n(), spec.band_len());
    let t = theta.as_slice();
    if t.len() != q + n {
        return Err(Error::dims("weight vector", q + n, t.len()));
    }
    let band = t[..q]
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < n { v } else { 0.5 * v })
        .collect();
    QuadraticModel::from_parts(band, t[q..].to_vec(), spec, params)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    f: usize,
    a: f64,
    b: f64,
    c: f64,
    zbar1_band: Vec<f64>,
    zbar2: Vec<f64>,
    #[serde(default)]
    zbar4: Option<f64>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn num_list(vs: &[f64]) -> String {
    let items: Vec<String> = vs.iter().map(|&v| num(v)).collect();
    format!("[{}]", items.join(", "))
}

fn line_of(text: &str, field: &str) -> Option<usize> {
    let key = format!("\"{field}\"");
    text.lines().position(|l| l.contains(&key)).map(|i| i + 1)
}
