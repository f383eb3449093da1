//! Generate the seeded synthetic diurnal workload and classify traffic
//! intensity into low / medium / high groups.
//!
//! ```bash
//! cargo run --example synth_workload
//! ```

use fogplace::workload::{
    autocorrelation, classify_intensity, synth_workload, IntensityClass, SynthConfig,
};

fn main() -> fogplace::Result<()> {
    let config = SynthConfig {
        regions: 6,
        days: 7,
        ..SynthConfig::default()
    };
    let series = synth_workload(&config, 7)?;
    let slots_per_day = config.slots_per_day();

    for s in series.iter().take(2) {
        let weekday: f64 =
            s.values[..5 * slots_per_day].iter().sum::<f64>() / (5 * slots_per_day) as f64;
        let weekend: f64 =
            s.values[5 * slots_per_day..].iter().sum::<f64>() / (2 * slots_per_day) as f64;
        println!(
            "region {}: weekday mean {:.2}, weekend mean {:.2}, daily autocorrelation {:.3}",
            s.region_id,
            weekday,
            weekend,
            autocorrelation(&s.values, slots_per_day)
        );
    }

    let classes = classify_intensity(&series, 3, 7)?;
    let mut counts = [0usize; 3];
    for class in classes.values() {
        match class {
            IntensityClass::Low => counts[0] += 1,
            IntensityClass::Medium => counts[1] += 1,
            IntensityClass::High => counts[2] += 1,
            IntensityClass::Group(_) => {}
        }
    }
    println!(
        "\nintensity groups over {} points: low {}, medium {}, high {}",
        classes.len(),
        counts[0],
        counts[1],
        counts[2]
    );
    Ok(())
}
