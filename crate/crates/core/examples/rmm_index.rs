//! Combined EOF basis from OLR, U200 and U850 anomalies and the resulting
//! RMM index: amplitude, phase occupancy and the leading patterns.

use dkstn::dkpm::{anomalies, fit_harmonics, MAX_WAVE};
use dkstn::grid::{synth_generate, GridSpec, SynthParams};
use dkstn::rmm::{compute_eof_basis, mjo_active, project_rmm, rmm_phase};

fn main() -> dkstn::Result<()> {
    let spec = GridSpec::desk();
    let raw = synth_generate(&spec, 1000, 3, &SynthParams::for_spec(&spec))?;
    let anom = anomalies(&raw, &fit_harmonics(&raw, MAX_WAVE)?, true)?;
    let basis = compute_eof_basis(&anom)?;
    let rmm = project_rmm(&anom, &basis)?;

    println!("eigenvalues {:.3?}", &basis.eigenvalues[..4]);
    println!("two leading EOFs explain {:.1}%", 100.0 * (basis.explained_variance(0) + basis.explained_variance(1)));
    let w = spec.lon_count;
    let row = |v: &[f64]| v.iter().map(|x| format!("{x:+.2}")).collect::<Vec<_>>().join(" ");
    println!("EOF1 OLR  {}", row(&basis.patterns[0][..w]));
    println!("EOF2 OLR  {}", row(&basis.patterns[1][..w]));

    let mut counts = [0usize; 8];
    let mut active = 0;
    for i in 0..rmm.len() {
        if mjo_active(rmm.rmm1[i], rmm.rmm2[i]) {
            active += 1;
            counts[rmm_phase(rmm.rmm1[i], rmm.rmm2[i])? as usize - 1] += 1;
        }
    }
    println!("{active} of {} days active; days per phase {counts:?}", rmm.len());
    for i in (0..10).map(|d| d * 4) {
        println!("{}  rmm1 {:+.2}  rmm2 {:+.2}  amp {:.2}", rmm.dates[i], rmm.rmm1[i], rmm.rmm2[i], rmm.amplitude(i));
    }
    Ok(())
}
