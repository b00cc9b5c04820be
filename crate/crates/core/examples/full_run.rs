//! Every stage from a configuration file, as `dkstn all` runs it.
//!
//! `cargo run --release --example full_run -- configs/smoke.toml /tmp/run`

use std::path::PathBuf;

use dkstn::cli::run_all;
use dkstn::config::RunConfig;

fn main() -> dkstn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse(include_str!("../../../configs/smoke.toml"))?,
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("dkstn_full_run"));
    let summary = run_all(&cfg, &out)?;
    for (name, path) in &summary.artifacts {
        println!("{name:<12} {}", path.display());
    }
    println!(
        "skill days {} / {} / {}",
        summary.report.skill.cor, summary.report.skill.rmse, summary.report.skill.combined
    );
    Ok(())
}
