//! Generate a synthetic gridded series, write it as a grid file and read it
//! back.

use dkstn::grid::{read_grid_file, synth_generate, write_grid_file, GridSpec, SynthParams};

fn main() -> dkstn::Result<()> {
    let spec = GridSpec::desk();
    let series = synth_generate(&spec, 400, 11, &SynthParams::for_spec(&spec))?;
    println!(
        "{} days from {} on a {}x{} grid, variables {:?}",
        series.days(),
        series.start_date,
        spec.lat_count,
        spec.lon_count,
        spec.variables.iter().map(|v| &v.name).collect::<Vec<_>>()
    );

    let path = std::env::temp_dir().join("dkstn_synthetic.dkg");
    write_grid_file(&path, &series)?;
    let back = read_grid_file(&path)?;
    // The file stores float32, so values round-trip to single precision.
    let worst = series
        .values
        .data()
        .iter()
        .zip(back.values.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("wrote {} ({} bytes), max round-trip error {worst:.2e}", path.display(), std::fs::metadata(&path)?.len());
    Ok(())
}
