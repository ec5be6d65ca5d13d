//! Randomized self-checks comparing the banded pipeline against the oracles.
//! Each suite reports the largest error it observed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{reconstruct, QuadraticModel};
use crate::oracle::{
    aggregate, dense_qnn_fit, eval_neuron_sum, eval_patch_model, induced_patch_models,
    random_neuron_set, random_patch_model_set, random_vector, rel_err,
};
use crate::pipeline::fit;
use crate::quadcore::{ActivationParams, ConvSpec};
use crate::regressor::{build_regressor, Dataset};
use crate::solver::{norm, solve_ls, WeightVector};

pub const AGGREGATION_TOL: f64 = 1e-10;
pub const NEURON_TOL: f64 = 1e-10;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const NORMAL_EQ_TOL: f64 = 1e-8;
pub const DENSE_TOL: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteReport {
    fn new(name: &'static str, instances: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name,
            instances,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }
}

/// Random `(n, f)` with `1 ≤ f ≤ n ≤ max_n`.
pub fn random_spec(rng: &mut impl Rng, max_n: usize) -> ConvSpec {
    let n = rng.gen_range(1..=max_n);
    let f = rng.gen_range(1..=n);
    ConvSpec::new(n, f).expect("1 <= f <= n")
}

/// Model with uniformly random weights in `[−1, 1]`.
pub fn random_model(rng: &mut impl Rng, spec: ConvSpec, params: ActivationParams) -> QuadraticModel {
    let theta = WeightVector::new(random_vector(rng, spec.weight_len()), spec)
        .expect("length matches spec");
    reconstruct(&theta, params).expect("finite weights")
}

pub fn random_dataset(rng: &mut impl Rng, n: usize, samples: usize) -> Dataset {
    let inputs = random_vector(rng, n * samples);
    let labels = random_vector(rng, samples);
    Dataset::new(inputs, labels, n).expect("finite random data")
}

/// Central-difference gradient of `model.predict` at `x0`.
pub fn finite_difference_gradient(model: &QuadraticModel, x0: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    (0..x0.len())
        .map(|i| {
            x[i] = x0[i] + step;
            let hi = model.predict(&x)?;
            x[i] = x0[i] - step;
            let lo = model.predict(&x)?;
            x[i] = x0[i];
            Ok((hi - lo) / (2.0 * step))
        })
        .collect()
}

/// Per-patch evaluation vs banded prediction of the aggregated model.
pub fn aggregation_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let spec = random_spec(&mut rng, 16);
        let set = random_patch_model_set(&mut rng, &spec, ActivationParams::RELU_LIKE);
        let x = random_vector(&mut rng, spec.n());
        let want = eval_patch_model(&set, &x)?;
        let got = aggregate(&set)?.predict(&x)?;
        worst = worst.max(rel_err(got, want));
    }
    Ok(SuiteReport::new("patch-aggregation", instances, worst, AGGREGATION_TOL))
}

/// Explicit neuron sum vs the induced per-patch and banded models, with
/// unit-norm filters.
pub fn neuron_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let params = ActivationParams::RELU_LIKE;
    for _ in 0..instances {
        let spec = random_spec(&mut rng, 16);
        let neurons = rng.gen_range(1..=6);
        let ns = random_neuron_set(&mut rng, &spec, neurons, true);
        let x = random_vector(&mut rng, spec.n());
        let want = eval_neuron_sum(&ns, &params, &spec, &x)?;
        let set = induced_patch_models(&ns, &spec, params)?;
        worst = worst.max(rel_err(eval_patch_model(&set, &x)?, want));
        worst = worst.max(rel_err(aggregate(&set)?.predict(&x)?, want));
    }
    Ok(SuiteReport::new("neuron-sum-consistency", instances, worst, NEURON_TOL))
}

/// Closed-form sensitivity vs central differences; error relative to
/// `max(1, ‖g‖∞)`.
pub fn gradient_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let spec = random_spec(&mut rng, 16);
        let model = random_model(&mut rng, spec, ActivationParams::RELU_LIKE);
        let x0 = random_vector(&mut rng, spec.n());
        let g = model.sensitivity(&x0)?;
        let fd = finite_difference_gradient(&model, &x0, FD_STEP)?;
        worst = worst.max(gradient_error(&g, &fd));
    }
    Ok(SuiteReport::new("sensitivity-gradient", instances, worst, GRADIENT_TOL))
}

pub fn gradient_error(g: &[f64], fd: &[f64]) -> f64 {
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    g.iter()
        .zip(fd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Normal-equation residual `‖Hᵀ(y − Hθ)‖ / max(1, ‖Hᵀy‖)` on random
/// overdetermined systems with `N ≥ 2(q+n)`.
pub fn ls_optimality_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let spec = random_spec(&mut rng, 10);
        let samples = 2 * spec.weight_len() + rng.gen_range(0..20);
        let data = random_dataset(&mut rng, spec.n(), samples);
        let h = build_regressor(&data, &spec, &ActivationParams::RELU_LIKE)?;
        let rep = solve_ls(&h, data.labels())?;
        let hty = h.matrix().tr_mul(&nalgebra::DVector::from_column_slice(data.labels()));
        worst = worst.max(rep.normal_residual_norm / hty.norm().max(1.0));
    }
    Ok(SuiteReport::new("ls-optimality", instances, worst, NORMAL_EQ_TOL))
}

/// Banded pipeline at `f = n` vs the dense QR oracle; relative difference of
/// the model coefficients.
pub fn dense_reduction_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let params = ActivationParams::RELU_LIKE;
    for _ in 0..instances {
        let n = rng.gen_range(1..=8);
        let spec = ConvSpec::dense(n)?;
        let samples = 2 * spec.weight_len() + rng.gen_range(0..20);
        let data = random_dataset(&mut rng, n, samples);
        let main = fit(&data, &spec, params, 0.0)?.model;
        let oracle = dense_qnn_fit(&data, params)?;
        worst = worst.max(model_distance(&main, &oracle));
    }
    Ok(SuiteReport::new("dense-reduction", instances, worst, DENSE_TOL))
}

/// `‖w₁ − w₂‖ / max(1, ‖w₂‖)` over the weight vectors of two models.
pub fn model_distance(a: &QuadraticModel, b: &QuadraticModel) -> f64 {
    let wa = a.to_weights();
    let wb = b.to_weights();
    let diff: Vec<f64> = wa
        .as_slice()
        .iter()
        .zip(wb.as_slice())
        .map(|(x, y)| x - y)
        .collect();
    norm(&diff) / wb.norm().max(1.0)
}

pub fn run_all(seed: u64, instances: usize) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        aggregation_suite(seed, instances)?,
        neuron_suite(seed.wrapping_add(1), instances)?,
        gradient_suite(seed.wrapping_add(2), instances)?,
        ls_optimality_suite(seed.wrapping_add(3), instances)?,
        dense_reduction_suite(seed.wrapping_add(4), instances)?,
    ])
}
