//! Traffic forecasting: ARIMA and LSTM regressors with MAE/RMSE evaluation.

pub mod arima;
pub mod lstm;
pub mod optim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arima::{
    anchors, ar_is_stationary, auto_arima, difference, fit_arima, undifference, ArimaModel,
    ArimaModelDoc, ArimaState, AutoArima,
};
pub use lstm::{
    gradient_check_against, lstm_from_parts, lstm_gradient_check, lstm_gradients, lstm_train,
    LossKind, LstmHyper, LstmModel, LstmModelDoc, LstmTraining,
};

/// Forecast accuracy metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

/// One-step-ahead predicted series per region: an ARIMA(1,1,1) fit on the
/// first `train_slots` values, then rolling forecasts with the state
/// advancing on actuals. Warm-up slots (and fit failures) fall back to the
/// actual value, so the output aligns slot-for-slot with the input.
pub fn forecast_series(
    series: &[crate::workload::TrafficSeries],
    train_slots: usize,
) -> Result<Vec<crate::workload::TrafficSeries>> {
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        let train = &s.values[..train_slots.min(s.values.len())];
        let predicted = match arima::fit_arima(train, 1, 1, 1) {
            Ok(model) => {
                let mut state = arima::ArimaState::new(&model);
                let mut vals = Vec::with_capacity(s.values.len());
                for (t, &y) in s.values.iter().enumerate() {
                    let pred = if t < train.len() {
                        y
                    } else {
                        state.forecast_one().unwrap_or(y).max(0.0)
                    };
                    vals.push(pred);
                    state.observe(y);
                }
                vals
            }
            Err(_) => s.values.clone(),
        };
        out.push(crate::workload::TrafficSeries {
            region_id: s.region_id,
            start_time_ms: s.start_time_ms,
            interval_s: s.interval_s,
            values: predicted,
        });
    }
    Ok(out)
}

/// MAE and RMSE of predictions against actuals.
///
/// MAE = (1/N) * sum |y_hat - y|; RMSE = sqrt((1/N) * sum (y_hat - y)^2).
pub fn evaluate(predictions: &[f64], actuals: &[f64]) -> Result<ForecastMetrics> {
    if predictions.len() != actuals.len() || predictions.is_empty() {
        return Err(Error::InvalidInput(format!(
            "prediction/actual lengths {} vs {}",
            predictions.len(),
            actuals.len()
        )));
    }
    let n = predictions.len() as f64;
    let mae = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).abs())
        .sum::<f64>()
        / n;
    let rmse = (predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ForecastMetrics {
        mae,
        rmse,
        n: predictions.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_forecast_is_zero() {
        let m = evaluate(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((m.mae, m.rmse), (0.0, 0.0));
    }

    #[test]
    fn hand_arithmetic() {
        let m = evaluate(&[2.0, 4.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.mae, 2.0);
        assert!((m.rmse - 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rmse_at_least_mae() {
        use crate::rng::{rng_from_seed, sample_normal};
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            let preds: Vec<f64> = (0..40).map(|_| sample_normal(&mut rng)).collect();
            let actuals: Vec<f64> = (0..40).map(|_| sample_normal(&mut rng)).collect();
            let m = evaluate(&preds, &actuals).unwrap();
            assert!(m.rmse >= m.mae - 1e-12);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(evaluate(&[1.0], &[1.0, 2.0]).is_err());
        assert!(evaluate(&[], &[]).is_err());
    }
}
