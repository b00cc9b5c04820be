//! Verification metrics on constructed forecasts and the skill-day rule.

use dkstn::metrics::{amp_error, cor, phase_error, rmse, skill_days, PhaseMode, SkillReport};
use dkstn::tensor::Tensor;

fn main() -> dkstn::Result<()> {
    // Truth rotates through the phase space; forecasts lag in phase and
    // lose amplitude with lead.
    let (m, n) = (200, 10);
    let mut truth = Vec::with_capacity(m * n * 2);
    let mut pred = Vec::with_capacity(m * n * 2);
    for i in 0..m {
        for j in 0..n {
            let angle = 0.1 * (i + j) as f64 + 0.3;
            let lag = 0.04 * j as f64;
            let damp = 1.0 - 0.05 * j as f64;
            truth.extend([1.5 * angle.cos(), 1.5 * angle.sin()]);
            pred.extend([1.5 * damp * (angle - lag).cos(), 1.5 * damp * (angle - lag).sin()]);
        }
    }
    let truth = Tensor::new(&[m, n, 2], truth)?;
    let pred = Tensor::new(&[m, n, 2], pred)?;

    let report = SkillReport::compute(&pred, &truth, PhaseMode::Wrapped)?;
    print!("{}", report.to_csv());
    println!("literal-mode PE at lead 1: {:+.4}", phase_error(&pred, &truth, PhaseMode::Literal)?[0]);
    println!("check: COR {:.4} RMSE {:.4} AE {:+.4}", cor(&pred, &truth)?[n - 1], rmse(&pred, &truth)?[n - 1], amp_error(&pred, &truth)?[n - 1]);

    // Curves crossing COR 0.5 after lead 28 and RMSE 1.4 after lead 51.
    let cor_curve: Vec<f64> = (1..=60).map(|j| 0.95 - 0.45 * (j as f64 - 0.5) / 28.0).collect();
    let rmse_curve: Vec<f64> = (1..=60).map(|j| 0.4 + 1.0 * (j as f64 - 0.5) / 51.0).collect();
    let s = skill_days(&cor_curve, &rmse_curve, 0.5, 1.4);
    println!("skill days: cor {} rmse {} combined {}", s.cor, s.rmse, s.combined);
    Ok(())
}
