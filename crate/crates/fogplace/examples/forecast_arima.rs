//! Fit ARIMA models to traffic: order selection, forecasting, and accuracy.
//!
//! ```bash
//! cargo run --example forecast_arima
//! ```

use fogplace::forecast::{auto_arima, evaluate, fit_arima};
use fogplace::workload::{synth_workload, SynthConfig};

fn main() -> fogplace::Result<()> {
    let config = SynthConfig {
        regions: 1,
        days: 7,
        interval_s: 3_600,
        ..SynthConfig::default()
    };
    let series = &synth_workload(&config, 3)?[0];
    let split = series.len() - 24; // hold out the final day
    let (train, holdout) = series.values.split_at(split);

    let fixed = fit_arima(train, 1, 1, 1)?;
    println!(
        "ARIMA(1,1,1): alpha {:.4}, phi {:?}, theta {:?}, stationary: {}",
        fixed.alpha, fixed.phi, fixed.theta, fixed.stationary
    );
    let forecast = fixed.predict(holdout.len());
    let metrics = evaluate(&forecast, holdout)?;
    println!(
        "  holdout MAE {:.3}, RMSE {:.3} over {} steps",
        metrics.mae, metrics.rmse, metrics.n
    );

    let pick = auto_arima(&series.values, 2, 2, 1, 0.2, 2)?;
    println!(
        "\nauto order search picked ({},{},{}) with one-step holdout MAE {:.3}, RMSE {:.3}",
        pick.p, pick.d, pick.q, pick.holdout_mae, pick.holdout_rmse
    );
    println!(
        "next 6 slots: {:?}",
        pick.model
            .predict(6)
            .iter()
            .map(|v| (v * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );
    Ok(())
}
