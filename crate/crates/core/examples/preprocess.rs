//! Anomalies from raw fields: remove the annual cycle and its first two
//! harmonics, subtract the trailing 120-day mean, mask SST over land.

use dkstn::dkpm::{anomalies, fit_harmonics, MAX_WAVE};
use dkstn::grid::{synth_generate, GridSpec, SynthParams};

fn main() -> dkstn::Result<()> {
    let spec = GridSpec::desk();
    let raw = synth_generate(&spec, 900, 5, &SynthParams::for_spec(&spec))?;
    let fit = fit_harmonics(&raw, MAX_WAVE)?;
    let anom = anomalies(&raw, &fit, true)?;

    println!("raw {} days -> anomalies {} days starting {}", raw.days(), anom.days(), anom.start_date);
    for (c, var) in spec.variables.iter().enumerate() {
        let values: Vec<f64> = (0..anom.days())
            .flat_map(|t| {
                let a = &anom;
                (0..spec.lat_count).flat_map(move |i| (0..spec.lon_count).map(move |j| a.values.data()[a.offset(t, i, j, c)]))
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
        println!("{:>5}: mean {mean:+.4}  std {std:.4}", var.name);
    }
    let at = raw.offset(0, spec.lat_count / 2, 0, spec.channel("OLR").unwrap());
    let day = |m| chrono::NaiveDate::from_ymd_opt(1992, m, 1).unwrap();
    println!(
        "OLR climatology at the equator, 0E: Jan 1 {:.2}, Jul 1 {:.2}",
        fit.climatology(day(1))[at],
        fit.climatology(day(7))[at],
    );
    Ok(())
}
