use std::time::{Duration, Instant};

use crate::dataio::mse;
use crate::error::{Error, Result};
use crate::model::{reconstruct, QuadraticModel};
use crate::quadcore::{ActivationParams, ConvSpec};
use crate::regressor::{build_regressor, Dataset};
use crate::solver::{solve_ridge, SolveReport};

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: QuadraticModel,
    pub report: SolveReport,
    /// Regressor assembly plus solve; model reconstruction and I/O excluded.
    pub train_time: Duration,
}

/// Trains the banded model on `data` with ridge weight `beta` (0 for plain
/// least squares).
pub fn fit(data: &Dataset, spec: &ConvSpec, params: ActivationParams, beta: f64) -> Result<Fit> {
    let start = Instant::now();
    let h = build_regressor(data, spec, &params)?;
    let report = solve_ridge(&h, data.labels(), beta)?;
    let train_time = start.elapsed();
    let model = reconstruct(&report.theta, params)?;
    Ok(Fit {
        model,
        report,
        train_time,
    })
}

pub fn predict_all(model: &QuadraticModel, data: &Dataset) -> Result<Vec<f64>> {
    if data.n_features() != model.spec().n() {
        return Err(Error::dims(
            "dataset features",
            model.spec().n(),
            data.n_features(),
        ));
    }
    data.rows().map(|x| model.predict(x)).collect()
}

pub fn evaluate_mse(model: &QuadraticModel, data: &Dataset) -> Result<f64> {
    Ok(mse(&predict_all(model, data)?, data.labels()))
}
