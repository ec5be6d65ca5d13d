//! Brute-force reference implementations used to cross-check the banded
//! pipeline. Everything here uses plain nested `Vec`s and explicit loops and
//! shares no index bookkeeping with [`crate::quadcore`] or the regressor.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::QuadraticModel;
use crate::quadcore::{ActivationParams, ConvSpec};
use crate::regressor::Dataset;

type Dense = Vec<Vec<f64>>;

/// Per-patch quadratic blocks `(Z^{k,1}, Z^{k,2}, Z^{k,4})` for `k = 1..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchModelSet {
    pub n: usize,
    pub f: usize,
    pub z1: Vec<Dense>,
    pub z2: Vec<Vec<f64>>,
    pub z4: Vec<f64>,
    pub params: ActivationParams,
}

/// Filters `w_j` (length `f`) with second-layer weights `α_j` (length `K`).
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronSet {
    pub filters: Vec<Vec<f64>>,
    pub alphas: Vec<Vec<f64>>,
}

impl PatchModelSet {
    fn check(&self) -> Result<usize> {
        let spec = ConvSpec::new(self.n, self.f)?;
        let k = spec.patches();
        if self.z1.len() != k || self.z2.len() != k || self.z4.len() != k {
            return Err(Error::dims("patch model count", k, self.z1.len()));
        }
        for (m, v) in self.z1.iter().zip(&self.z2) {
            if m.len() != self.f || m.iter().any(|r| r.len() != self.f) {
                return Err(Error::dims("Z^{k,1} size", self.f, m.len()));
            }
            if v.len() != self.f {
                return Err(Error::dims("Z^{k,2} size", self.f, v.len()));
            }
        }
        Ok(k)
    }
}

/// Patches `χ_k = (x_k, …, x_{k+f−1})`, `k = 1..n−f+1`.
pub fn extract_patches(x: &[f64], spec: &ConvSpec) -> Result<Vec<Vec<f64>>> {
    if x.len() != spec.n() {
        return Err(Error::dims("patch input", spec.n(), x.len()));
    }
    let f = spec.f();
    let mut out = Vec::new();
    let mut k = 0;
    while k + f <= x.len() {
        out.push(x[k..k + f].to_vec());
        k += 1;
    }
    Ok(out)
}

/// `Σ_k [χ_k;1]ᵀ [[aZ^{k,1}, (b/2)Z^{k,2}], [(b/2)Z^{k,2}ᵀ, cZ^{k,4}]] [χ_k;1]`,
/// evaluated by forming each `(f+1)×(f+1)` block explicitly.
pub fn eval_patch_model(s: &PatchModelSet, x: &[f64]) -> Result<f64> {
    let k_count = s.check()?;
    let spec = ConvSpec::new(s.n, s.f)?;
    let patches = extract_patches(x, &spec)?;
    let (a, b, c) = (s.params.a(), s.params.b(), s.params.c());
    let f = s.f;
    let mut total = 0.0;
    for k in 0..k_count {
        let mut block = vec![vec![0.0; f + 1]; f + 1];
        for r in 0..f {
            for col in 0..f {
                block[r][col] = a * s.z1[k][r][col];
            }
            block[r][f] = 0.5 * b * s.z2[k][r];
            block[f][r] = 0.5 * b * s.z2[k][r];
        }
        block[f][f] = c * s.z4[k];
        let mut v = patches[k].clone();
        v.push(1.0);
        for r in 0..=f {
            for col in 0..=f {
                total += v[r] * block[r][col] * v[col];
            }
        }
    }
    Ok(total)
}

/// Zero-padded sums of the per-patch blocks, placed at offset `k − 1`.
pub fn aggregate_dense(s: &PatchModelSet) -> Result<(Dense, Vec<f64>, f64)> {
    let k_count = s.check()?;
    let (n, f) = (s.n, s.f);
    let mut zbar1 = vec![vec![0.0; n]; n];
    let mut zbar2 = vec![0.0; n];
    let mut zbar4 = 0.0;
    for k in 0..k_count {
        for r in 0..f {
            for c in 0..f {
                zbar1[k + r][k + c] += s.z1[k][r][c];
            }
            zbar2[k + r] += s.z2[k][r];
        }
        zbar4 += s.z4[k];
    }
    Ok((zbar1, zbar2, zbar4))
}

pub fn aggregate(s: &PatchModelSet) -> Result<QuadraticModel> {
    let (zbar1, zbar2, _) = aggregate_dense(s)?;
    let n = s.n;
    let dense = DMatrix::from_fn(n, n, |r, c| zbar1[r][c]);
    QuadraticModel::from_dense(&dense, zbar2, s.f, s.params)
}

/// `Σ_j Σ_k α_{jk} σ(w_jᵀ χ_k)`.
pub fn eval_neuron_sum(
    ns: &NeuronSet,
    params: &ActivationParams,
    spec: &ConvSpec,
    x: &[f64],
) -> Result<f64> {
    let patches = extract_patches(x, spec)?;
    check_neurons(ns, spec)?;
    let mut total = 0.0;
    for (w, alpha) in ns.filters.iter().zip(&ns.alphas) {
        for (chi, &al) in patches.iter().zip(alpha) {
            let z: f64 = w.iter().zip(chi).map(|(a, b)| a * b).sum();
            total += al * params.eval(z);
        }
    }
    Ok(total)
}

/// Per-patch blocks induced by a neuron set:
/// `Z^{k,1} = Σ_j α_{jk} w_j w_jᵀ`, `Z^{k,2} = Σ_j α_{jk} w_j`, `Z^{k,4} = Σ_j α_{jk}`.
/// The last matches `trace(Z^{k,1})` only for unit-norm filters.
pub fn induced_patch_models(
    ns: &NeuronSet,
    spec: &ConvSpec,
    params: ActivationParams,
) -> Result<PatchModelSet> {
    check_neurons(ns, spec)?;
    let (f, k_count) = (spec.f(), spec.patches());
    let mut z1 = vec![vec![vec![0.0; f]; f]; k_count];
    let mut z2 = vec![vec![0.0; f]; k_count];
    let mut z4 = vec![0.0; k_count];
    for (w, alpha) in ns.filters.iter().zip(&ns.alphas) {
        for k in 0..k_count {
            let al = alpha[k];
            for r in 0..f {
                for c in 0..f {
                    z1[k][r][c] += al * (w[r] * w[c]);
                }
                z2[k][r] += al * w[r];
            }
            z4[k] += al;
        }
    }
    Ok(PatchModelSet {
        n: spec.n(),
        f,
        z1,
        z2,
        z4,
        params,
    })
}

fn check_neurons(ns: &NeuronSet, spec: &ConvSpec) -> Result<()> {
    if ns.filters.len() != ns.alphas.len() {
        return Err(Error::dims("neuron count", ns.filters.len(), ns.alphas.len()));
    }
    for (w, al) in ns.filters.iter().zip(&ns.alphas) {
        if w.len() != spec.f() {
            return Err(Error::dims("filter length", spec.f(), w.len()));
        }
        if al.len() != spec.patches() {
            return Err(Error::dims("second-layer weights", spec.patches(), al.len()));
        }
    }
    Ok(())
}

/// Fits the fully connected quadratic model (`f = n`) with its own feature
/// layout (upper triangle, row by row, undoubled) and a Householder QR solve.
/// The regressor must have full column rank, or full row rank when there are
/// fewer samples than unknowns (minimum-norm answer).
pub fn dense_qnn_fit(data: &Dataset, params: ActivationParams) -> Result<QuadraticModel> {
    let n = data.n_features();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|r| (r..n).map(move |c| (r, c))).collect();
    let p = pairs.len() + n;
    let (a, b, c) = (params.a(), params.b(), params.c());
    let rows: Dense = data
        .rows()
        .map(|x| {
            let mut row = Vec::with_capacity(p);
            for &(r, col) in &pairs {
                row.push(if r == col {
                    a * x[r] * x[r] + c
                } else {
                    2.0 * a * x[r] * x[col]
                });
            }
            row.extend(x.iter().map(|v| b * v));
            row
        })
        .collect();
    let coef = householder_lstsq(rows, data.labels().to_vec())?;
    let mut zbar1 = DMatrix::zeros(n, n);
    for (&(r, col), &v) in pairs.iter().zip(&coef) {
        zbar1[(r, col)] = v;
        zbar1[(col, r)] = v;
    }
    QuadraticModel::from_dense(&zbar1, coef[pairs.len()..].to_vec(), n, params)
}

/// Least squares by Householder QR on a row-major `m×p` matrix. When
/// `m < p` the minimum-norm solution is returned via a QR factorization of the
/// transpose. Columns (or rows, when `m < p`) must be independent.
pub fn householder_lstsq(a: Dense, y: Vec<f64>) -> Result<Vec<f64>> {
    let m = a.len();
    let p = a.first().map_or(0, Vec::len);
    if y.len() != m {
        return Err(Error::dims("labels", m, y.len()));
    }
    if m >= p {
        let qr = Householder::factor(a)?;
        let qty = qr.apply_qt(y);
        Ok(qr.solve_upper(&qty[..p]))
    } else {
        let at: Dense = (0..p).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
        let qr = Householder::factor(at)?;
        let mut z = qr.solve_lower_transposed(&y);
        z.resize(p, 0.0);
        Ok(qr.apply_q(z))
    }
}

/// Householder QR of a tall matrix. `r` holds the reduced matrix; each
/// reflector `v` acts on rows `j..`.
struct Householder {
    r: Dense,
    reflectors: Vec<Vec<f64>>,
}

impl Householder {
    fn factor(mut a: Dense) -> Result<Self> {
        let m = a.len();
        let p = a.first().map_or(0, Vec::len);
        let scale = a
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut reflectors = Vec::with_capacity(p);
        for j in 0..p {
            let norm: f64 = (j..m).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
            if norm <= scale * 1e-12 * (m as f64) {
                return Err(Error::RankDeficient(format!("column {j} is dependent")));
            }
            let alpha = if a[j][j] > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = (j..m).map(|i| a[i][j]).collect();
            v[0] -= alpha;
            let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            v.iter_mut().for_each(|t| *t /= vnorm);
            for col in j..p {
                let dot: f64 = (j..m).map(|i| v[i - j] * a[i][col]).sum();
                for i in j..m {
                    a[i][col] -= 2.0 * dot * v[i - j];
                }
            }
            reflectors.push(v);
        }
        Ok(Self { r: a, reflectors })
    }

    fn reflect(v: &[f64], j: usize, y: &mut [f64]) {
        let dot: f64 = v.iter().zip(&y[j..]).map(|(a, b)| a * b).sum();
        for (yi, vi) in y[j..].iter_mut().zip(v) {
            *yi -= 2.0 * dot * vi;
        }
    }

    fn apply_qt(&self, mut y: Vec<f64>) -> Vec<f64> {
        for (j, v) in self.reflectors.iter().enumerate() {
            Self::reflect(v, j, &mut y);
        }
        y
    }

    fn apply_q(&self, mut y: Vec<f64>) -> Vec<f64> {
        for (j, v) in self.reflectors.iter().enumerate().rev() {
            Self::reflect(v, j, &mut y);
        }
        y
    }

    /// Solves `R x = b` for the leading square block of `R`.
    fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let p = b.len();
        let mut x = vec![0.0; p];
        for j in (0..p).rev() {
            let tail: f64 = (j + 1..p).map(|c| self.r[j][c] * x[c]).sum();
            x[j] = (b[j] - tail) / self.r[j][j];
        }
        x
    }

    /// Solves `Rᵀ z = b`.
    fn solve_lower_transposed(&self, b: &[f64]) -> Vec<f64> {
        let p = b.len();
        let mut z = vec![0.0; p];
        for j in 0..p {
            let head: f64 = (0..j).map(|i| self.r[i][j] * z[i]).sum();
            z[j] = (b[j] - head) / self.r[j][j];
        }
        z
    }
}

fn uniform(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

/// Random symmetric `f×f` matrix, entries `U[−1,1]` symmetrized as `(M+Mᵀ)/2`.
pub fn random_symmetric(rng: &mut impl Rng, f: usize) -> Dense {
    let m: Dense = (0..f).map(|_| (0..f).map(|_| uniform(rng)).collect()).collect();
    (0..f)
        .map(|r| (0..f).map(|c| 0.5 * (m[r][c] + m[c][r])).collect())
        .collect()
}

pub fn random_vector(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| uniform(rng)).collect()
}

/// Random per-patch set obeying `Z^{k,4} = trace(Z^{k,1})`.
pub fn random_patch_model_set(
    rng: &mut impl Rng,
    spec: &ConvSpec,
    params: ActivationParams,
) -> PatchModelSet {
    let k_count = spec.patches();
    let f = spec.f();
    let z1: Vec<Dense> = (0..k_count).map(|_| random_symmetric(rng, f)).collect();
    let z4 = z1.iter().map(|m| (0..f).map(|i| m[i][i]).sum()).collect();
    let z2 = (0..k_count).map(|_| random_vector(rng, f)).collect();
    PatchModelSet {
        n: spec.n(),
        f,
        z1,
        z2,
        z4,
        params,
    }
}

/// Random neuron set; filters are scaled to unit norm when `unit_norm` is set.
pub fn random_neuron_set(
    rng: &mut impl Rng,
    spec: &ConvSpec,
    neurons: usize,
    unit_norm: bool,
) -> NeuronSet {
    let filters = (0..neurons)
        .map(|_| {
            let mut w = random_vector(rng, spec.f());
            if unit_norm {
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    w.iter_mut().for_each(|v| *v /= norm);
                } else {
                    w[0] = 1.0;
                }
            }
            w
        })
        .collect();
    let alphas = (0..neurons)
        .map(|_| random_vector(rng, spec.patches()))
        .collect();
    NeuronSet { filters, alphas }
}

/// Relative error `|got − want| / max(1, |want|)`.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn patches_examples() {
        let spec = ConvSpec::new(4, 2).unwrap();
        let p = extract_patches(&[1.0, 2.0, 3.0, 4.0], &spec).unwrap();
        assert_eq!(p, vec![vec![1.0, 2.0], vec![2.0, 3.0], vec![3.0, 4.0]]);
        let spec = ConvSpec::new(3, 3).unwrap();
        assert_eq!(
            extract_patches(&[1.0, 2.0, 3.0], &spec).unwrap(),
            vec![vec![1.0, 2.0, 3.0]]
        );
        let spec = ConvSpec::new(12, 5).unwrap();
        assert_eq!(extract_patches(&[0.0; 12], &spec).unwrap().len(), 8);
        assert!(extract_patches(&[0.0; 11], &spec).is_err());
    }

    #[test]
    fn zero_patch_models_evaluate_to_zero() {
        let spec = ConvSpec::new(5, 2).unwrap();
        let s = PatchModelSet {
            n: 5,
            f: 2,
            z1: vec![vec![vec![0.0; 2]; 2]; 4],
            z2: vec![vec![0.0; 2]; 4],
            z4: vec![0.0; 4],
            params: ActivationParams::RELU_LIKE,
        };
        assert_eq!(eval_patch_model(&s, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 0.0);
        assert_eq!(spec.patches(), 4);
    }

    #[test]
    fn single_patch_aggregate_is_identity_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ConvSpec::new(4, 4).unwrap();
        let s = random_patch_model_set(&mut rng, &spec, ActivationParams::RELU_LIKE);
        let (z1, z2, z4) = aggregate_dense(&s).unwrap();
        assert_eq!(z1, s.z1[0]);
        assert_eq!(z2, s.z2[0]);
        assert_eq!(z4, s.z4[0]);
        let x = random_vector(&mut rng, 4);
        let m = aggregate(&s).unwrap();
        let want = eval_patch_model(&s, &x).unwrap();
        assert!(rel_err(m.predict(&x).unwrap(), want) < 1e-12);
    }

    #[test]
    fn overlap_counts_on_diagonal() {
        // identity filters on n=12, f=5: diagonal counts rise 1..5 then fall back
        let spec = ConvSpec::new(12, 5).unwrap();
        let k = spec.patches();
        let eye: Dense = (0..5)
            .map(|r| (0..5).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
            .collect();
        let s = PatchModelSet {
            n: 12,
            f: 5,
            z1: vec![eye; k],
            z2: vec![vec![1.0; 5]; k],
            z4: vec![5.0; k],
            params: ActivationParams::RELU_LIKE,
        };
        let (z1, z2, z4) = aggregate_dense(&s).unwrap();
        let diag: Vec<f64> = (0..12).map(|i| z1[i][i]).collect();
        let expect = [1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0, 5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(diag, expect);
        assert_eq!(z2, expect);
        assert_eq!(z4, diag.iter().sum::<f64>());

        let spec = ConvSpec::new(3, 2).unwrap();
        let eye2 = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = PatchModelSet {
            n: 3,
            f: 2,
            z1: vec![eye2.clone(), eye2],
            z2: vec![vec![0.0; 2]; 2],
            z4: vec![2.0; 2],
            params: ActivationParams::RELU_LIKE,
        };
        let m = aggregate(&s).unwrap();
        assert_eq!(m.band()[..3], [1.0, 2.0, 1.0]);
        assert_eq!(m.spec(), spec);
    }

    #[test]
    fn aggregate_trace_is_sum_of_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (n, f) in [(6, 3), (9, 2), (16, 7)] {
            let spec = ConvSpec::new(n, f).unwrap();
            let s = random_patch_model_set(&mut rng, &spec, ActivationParams::RELU_LIKE);
            let m = aggregate(&s).unwrap();
            let traces: f64 = s.z1.iter().map(|z| (0..f).map(|i| z[i][i]).sum::<f64>()).sum();
            assert!((m.zbar4() - traces).abs() < 1e-12);
        }
    }

    #[test]
    fn single_neuron_is_activation_of_first_input() {
        let spec = ConvSpec::new(3, 3).unwrap();
        let ns = NeuronSet {
            filters: vec![vec![1.0, 0.0, 0.0]],
            alphas: vec![vec![1.0]],
        };
        let p = ActivationParams::RELU_LIKE;
        let x = [0.7, -3.0, 2.0];
        assert_eq!(eval_neuron_sum(&ns, &p, &spec, &x).unwrap(), p.eval(0.7));
        let zero = NeuronSet {
            filters: vec![vec![1.0, 2.0, 0.0]],
            alphas: vec![vec![0.0]],
        };
        assert_eq!(eval_neuron_sum(&zero, &p, &spec, &x).unwrap(), 0.0);
    }

    #[test]
    fn householder_matches_exact_solution() {
        let a = vec![
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 3.0],
        ];
        // y = 2 + 3t exactly
        let y = vec![2.0, 5.0, 8.0, 11.0];
        let x = householder_lstsq(a, y).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
        let dep = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(householder_lstsq(dep, vec![1.0, 2.0, 3.0]).is_err());
        // one equation x0 + x1 = 2 -> minimum norm (1, 1)
        let x = householder_lstsq(vec![vec![1.0, 1.0]], vec![2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
