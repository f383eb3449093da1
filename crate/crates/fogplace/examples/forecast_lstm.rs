//! Train the from-scratch LSTM regressor and verify its gradients against
//! finite differences.
//!
//! ```bash
//! cargo run --release --example forecast_lstm
//! ```

use fogplace::forecast::{evaluate, lstm_gradient_check, lstm_train, LossKind, LstmHyper};
use fogplace::workload::{synth_workload, SynthConfig};

fn main() -> fogplace::Result<()> {
    // Hourly diurnal traffic, 6 days train + 1 day holdout.
    let config = SynthConfig {
        regions: 1,
        days: 7,
        interval_s: 3_600,
        noise_sd: 1.0,
        ..SynthConfig::default()
    };
    let series = &synth_workload(&config, 11)?[0];
    let split = series.len() - 24;
    let (train, holdout) = series.values.split_at(split);

    let hyper = LstmHyper::default(); // window 24, hidden 16, 300 epochs
    let trained = lstm_train(train, &hyper, 5)?;
    println!(
        "training loss: epoch 1 = {:.5}, final = {:.5}",
        trained.epoch_losses[0],
        trained.epoch_losses.last().unwrap()
    );

    let mut preds = Vec::new();
    let mut actuals = Vec::new();
    let mut window: Vec<f64> = train[train.len() - hyper.window..].to_vec();
    for &actual in holdout {
        let p = trained.model.forward(&window)?;
        preds.push(p);
        actuals.push(actual);
        window.remove(0);
        window.push(actual); // one-step-ahead: observe the true value
    }
    let metrics = evaluate(&preds, &actuals)?;
    println!(
        "one-step holdout: MAE {:.3}, RMSE {:.3}",
        metrics.mae, metrics.rmse
    );

    // Gradient check on a small model (finite differences over every weight).
    let tiny = lstm_train(
        &train[..60],
        &LstmHyper {
            epochs: 5,
            hidden_dim: 6,
            window: 8,
            ..hyper
        },
        9,
    )?;
    let sample: Vec<f64> = train[..8].to_vec();
    let err = lstm_gradient_check(&tiny.model, &sample, train[8], LossKind::Mse)?;
    println!(
        "gradient check: max relative error {err:.2e} over {} parameters",
        tiny.model.parameter_count()
    );
    Ok(())
}
