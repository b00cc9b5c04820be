//! Command-line front end behind the `dkstn` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::config::RunConfig;
use crate::dkpm::{anomalies, fit_harmonics, HarmonicFit, MAX_WAVE};
use crate::error::{Error, Result};
use crate::grid::{
    read_grid_file, read_labels_csv, synth_generate, write_grid_file, write_labels_csv, GriddedSeries,
    SourceTag,
};
use crate::metrics::{seasonal_split, PhaseMode, SkillReport};
use crate::pipeline::{build_samples, forecast_series, prepare, split_date, Forecasts};
use crate::rmm::{compute_eof_basis, project_rmm, EofBasis};
use crate::tensor::{read_checkpoint, write_checkpoint, Tensor};
use crate::training::{predict, train, DkstnModel};

#[derive(Debug, Parser)]
#[command(name = "dkstn", version, about = "MJO forecasting: preprocessing, RMM labels, training and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic gridded series.
    Synth(SynthArgs),
    /// Remove seasonal cycles and the running mean.
    Preprocess(PreprocessArgs),
    /// Fit or apply the EOF basis and write RMM labels.
    Labels(LabelsArgs),
    /// Train a model on anomalies and labels.
    Train(TrainArgs),
    /// Forecast from a checkpoint.
    Predict(PredictArgs),
    /// Lengthen the forecast horizon of a trained checkpoint.
    Extend(ExtendArgs),
    /// Verify forecasts against labels.
    Eval(EvalArgs),
    /// Summarize a checkpoint.
    Inspect(InspectArgs),
    /// Run every stage from one configuration file.
    All(AllArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Emulate a model archive instead of reanalysis.
    #[arg(long)]
    pub model: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub fit_out: Option<PathBuf>,
    /// Reuse a stored climatology instead of fitting one.
    #[arg(long, conflicts_with = "fit_days")]
    pub fit_in: Option<PathBuf>,
    /// Fit the climatology on the first N days only.
    #[arg(long)]
    pub fit_days: Option<usize>,
    #[arg(long)]
    pub skip_sst_mask: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("basis").required(true).args(["basis_out", "basis_in"])))]
pub struct LabelsArgs {
    #[arg(long)]
    pub anomalies: PathBuf,
    #[arg(long)]
    pub basis_out: Option<PathBuf>,
    #[arg(long)]
    pub basis_in: Option<PathBuf>,
    /// Fit the basis on days before this date only.
    #[arg(long, requires = "basis_out")]
    pub basis_until: Option<NaiveDate>,
    #[arg(long)]
    pub labels_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Reanalysis anomalies.
    #[arg(long)]
    pub data: PathBuf,
    /// Model anomalies merged with the reanalysis windows.
    #[arg(long)]
    pub model_data: Vec<PathBuf>,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_out: PathBuf,
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Climatology stored in the checkpoint for raw-field forecasts.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long)]
    pub basis: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Anomalies, or raw fields with `--raw`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// First anchor date.
    #[arg(long, conflicts_with = "raw")]
    pub from: Option<NaiveDate>,
    /// Forecast once from raw fields using the stored climatology.
    #[arg(long)]
    pub raw: bool,
    /// Anchor for `--raw`; defaults to the last day.
    #[arg(long, requires = "raw")]
    pub anchor: Option<NaiveDate>,
}

#[derive(Debug, Args)]
pub struct ExtendArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub extra_days: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PhaseArg {
    Literal,
    Wrapped,
}

impl From<PhaseArg> for PhaseMode {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Literal => PhaseMode::Literal,
            PhaseArg::Wrapped => PhaseMode::Wrapped,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Labels CSV.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    /// Also write one file per season next to `--out-csv`.
    #[arg(long)]
    pub seasonal: bool,
    #[arg(long, value_enum, default_value = "literal")]
    pub phase_mode: PhaseArg,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct AllArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "dkstn-run")]
    pub out_dir: PathBuf,
}

/// Caps the global worker pool from `DKSTN_THREADS`.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DKSTN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("DKSTN_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth_cmd(&a),
        Command::Preprocess(a) => preprocess_cmd(&a),
        Command::Labels(a) => labels_cmd(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Predict(a) => predict_cmd(&a),
        Command::Extend(a) => extend_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Inspect(a) => {
            print!("{}", inspect_text(&DkstnModel::load(&a.checkpoint)?));
            Ok(())
        }
        Command::All(a) => {
            let cfg = RunConfig::load(&a.config)?;
            let summary = run_all(&cfg, &a.out_dir)?;
            println!(
                "skill days: cor {} rmse {} combined {}",
                summary.report.skill.cor, summary.report.skill.rmse, summary.report.skill.combined
            );
            println!("manifest: {}", summary.manifest.display());
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let spec = cfg.grid.spec()?;
    let params = cfg.synth.params(&spec);
    let series = if a.model {
        let days = a.days.unwrap_or(cfg.synth.model_days);
        synth_generate(&spec, days, a.seed.unwrap_or(cfg.synth.seed + 1), &params.model_emulation())?
    } else {
        let days = a.days.unwrap_or(cfg.synth.reanalysis_days);
        synth_generate(&spec, days, a.seed.unwrap_or(cfg.synth.seed), &params)?
            .with_source(SourceTag::Reanalysis)
    };
    write_grid_file(&a.out, &series)
}

fn load_fit(path: &Path, series: &GriddedSeries) -> Result<HarmonicFit> {
    HarmonicFit::from_entries(&read_checkpoint(path)?, &series.spec)
}

fn preprocess_cmd(a: &PreprocessArgs) -> Result<()> {
    let raw = read_grid_file(&a.input)?;
    let fit = match (&a.fit_in, a.fit_days) {
        (Some(p), _) => load_fit(p, &raw)?,
        (None, Some(d)) => fit_harmonics(&raw.slice_days(0, d.min(raw.days()))?, MAX_WAVE)?,
        (None, None) => fit_harmonics(&raw, MAX_WAVE)?,
    };
    let anom = anomalies(&raw, &fit, !a.skip_sst_mask)?;
    write_grid_file(&a.output, &anom)?;
    if let Some(p) = &a.fit_out {
        write_checkpoint(p, &fit.to_entries())?;
    }
    Ok(())
}

fn labels_cmd(a: &LabelsArgs) -> Result<()> {
    let anom = read_grid_file(&a.anomalies)?;
    let basis = match (&a.basis_in, &a.basis_out) {
        (Some(p), _) => EofBasis::from_entries(&read_checkpoint(p)?)?,
        (None, Some(out)) => {
            let fit_on = match a.basis_until {
                Some(d) => {
                    let len = (d - anom.start_date).num_days().clamp(0, anom.days() as i64) as usize;
                    anom.slice_days(0, len)?
                }
                None => anom.clone(),
            };
            let b = compute_eof_basis(&fit_on)?;
            write_checkpoint(out, &b.to_entries())?;
            b
        }
        (None, None) => unreachable!("clap requires one basis flag"),
    };
    write_labels_csv(&a.labels_out, &project_rmm(&anom, &basis)?)
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let re = read_grid_file(&a.data)?;
    let model_series = a
        .model_data
        .iter()
        .map(read_grid_file)
        .collect::<Result<Vec<_>>>()?;
    let labels = read_labels_csv(&a.labels)?;
    let split = split_date(&re, cfg.data.valid_days)?;
    let (train_set, valid_set) =
        build_samples(&re, &model_series, &labels, split, cfg.taam.k, cfg.taam.n, &cfg.data)?;
    let mut model = DkstnModel::new(&re.spec, cfg.srcm.clone(), cfg.taam.clone(), cfg.training.seed)?;
    let report = train(&mut model, &train_set, &valid_set, &cfg.training)?;
    if let Some(p) = &a.fit {
        model.harmonic = Some(load_fit(p, &re)?);
    }
    if let Some(p) = &a.basis {
        model.basis = Some(EofBasis::from_entries(&read_checkpoint(p)?)?);
    }
    model.save(&a.checkpoint_out)?;
    if let Some(p) = &a.log {
        report.write_log(p)?;
    }
    info!("best epoch {}", report.best_epoch);
    Ok(())
}

fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let model = DkstnModel::load(&a.checkpoint)?;
    let data = read_grid_file(&a.data)?;
    let forecasts = if a.raw {
        let anchor = a.anchor.unwrap_or_else(|| data.end_date());
        let r = predict(&model, &data, anchor)?;
        let values: Vec<f64> = r.rmm1.iter().zip(&r.rmm2).flat_map(|(x, y)| [*x, *y]).collect();
        Forecasts {
            anchors: vec![anchor],
            values: Tensor::new(&[1, r.len(), 2], values)?,
        }
    } else {
        forecast_series(&model, &data, a.from)?
    };
    forecasts.write_csv(&a.out)
}

fn extend_cmd(a: &ExtendArgs) -> Result<()> {
    let mut model = DkstnModel::load(&a.checkpoint)?;
    model.extend(a.extra_days)?;
    model.save(&a.out)
}

fn season_path(base: &Path, label: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("skill");
    base.with_file_name(format!("{stem}_{label}.csv"))
}

/// Writes the skill CSV and, when asked, one CSV per populated season.
pub fn evaluate_forecasts(
    forecasts: &Forecasts,
    labels: &crate::rmm::RmmSeries,
    mode: PhaseMode,
    seasonal: bool,
    out_csv: &Path,
) -> Result<(SkillReport, Vec<PathBuf>)> {
    let (pred, truth, anchors) = forecasts.align(labels)?;
    let mut report = SkillReport::compute(&pred, &truth, mode)?;
    report.write_csv(out_csv)?;
    let mut written = vec![out_csv.to_path_buf()];
    if seasonal {
        report.seasons = seasonal_split(&pred, &truth, &anchors, mode)?;
        for (season, r) in &report.seasons {
            let p = season_path(out_csv, season.label());
            r.write_csv(&p)?;
            written.push(p);
        }
    }
    Ok((report, written))
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let forecasts = Forecasts::read_csv(&a.pred)?;
    let labels = read_labels_csv(&a.truth)?;
    let (report, _) = evaluate_forecasts(&forecasts, &labels, a.phase_mode.into(), a.seasonal, &a.out_csv)?;
    println!(
        "{} forecasts, skill days: cor {} rmse {} combined {}",
        report.samples, report.skill.cor, report.skill.rmse, report.skill.combined
    );
    Ok(())
}

/// Parameter listing, totals and configuration of a model.
pub fn inspect_text(model: &DkstnModel) -> String {
    let mut s = String::new();
    let mut total = 0;
    for p in model.params.params() {
        let count = p.value.len();
        total += count;
        let _ = writeln!(s, "{:<24} {:?} {count}", p.name, p.value.shape());
    }
    let _ = writeln!(s, "total_parameters = {total}");
    let vars: Vec<&str> = model.grid.variables.iter().map(|v| v.name.as_str()).collect();
    let _ = writeln!(
        s,
        "grid = {}x{} [{}]",
        model.grid.lat_count,
        model.grid.lon_count,
        vars.join(",")
    );
    let _ = writeln!(s, "srcm = {:?}", model.srcm);
    let _ = writeln!(s, "taam = {:?}", model.taam);
    let _ = writeln!(s, "n_trained = {}", model.n_trained);
    if model.horizon() > model.n_trained {
        let _ = writeln!(
            s,
            "n_extended = {} ({} copied steps)",
            model.horizon(),
            model.horizon() - model.n_trained
        );
    }
    let _ = writeln!(s, "seed = {}", model.seed);
    let _ = writeln!(s, "best_epoch = {}", model.best_epoch);
    let _ = writeln!(s, "epochs_logged = {}", model.history.len());
    let _ = writeln!(s, "climatology = {}", model.harmonic.is_some());
    let _ = writeln!(s, "eof_basis = {}", model.basis.is_some());
    s
}

/// Artifacts of a full run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub artifacts: Vec<(String, PathBuf)>,
    pub manifest: PathBuf,
    pub report: SkillReport,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    info!("stage {name}");
    f().map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// synth → preprocess → labels → train → predict → eval, writing every
/// intermediate artifact and a manifest into `out_dir`.
pub fn run_all(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    let path = |name: &str| out_dir.join(name);
    let mut artifacts: Vec<(String, PathBuf)> = Vec::new();
    let spec = cfg.grid.spec()?;

    let (re_raw, model_raw) = stage("synth", || {
        let params = cfg.synth.params(&spec);
        let re = synth_generate(&spec, cfg.synth.reanalysis_days, cfg.synth.seed, &params)?
            .with_source(SourceTag::Reanalysis);
        let models = (0..cfg.synth.model_series)
            .map(|i| {
                synth_generate(
                    &spec,
                    cfg.synth.model_days,
                    cfg.synth.seed + 1 + i as u64,
                    &params.model_emulation(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        write_grid_file(path("reanalysis.dkg"), &re)?;
        artifacts.push(("reanalysis".into(), path("reanalysis.dkg")));
        for (i, m) in models.iter().enumerate() {
            let name = format!("model_{i}.dkg");
            write_grid_file(path(&name), m)?;
            artifacts.push((format!("model_{i}"), path(&name)));
        }
        Ok((re, models))
    })?;

    let prep = stage("preprocess", || {
        let prep = prepare(
            &re_raw,
            &model_raw,
            cfg.taam.k,
            cfg.taam.n,
            cfg.dkpm.mask_sst,
            &cfg.data,
        )?;
        write_grid_file(path("anomalies.dkg"), &prep.reanalysis)?;
        write_checkpoint(path("fit.dkw"), &prep.fit.to_entries())?;
        artifacts.push(("anomalies".into(), path("anomalies.dkg")));
        artifacts.push(("fit".into(), path("fit.dkw")));
        Ok(prep)
    })?;

    stage("labels", || {
        write_checkpoint(path("basis.dkw"), &prep.basis.to_entries())?;
        write_labels_csv(path("labels.csv"), &prep.labels)?;
        artifacts.push(("basis".into(), path("basis.dkw")));
        artifacts.push(("labels".into(), path("labels.csv")));
        Ok(())
    })?;

    let (model, train_report) = stage("train", || {
        let mut model = DkstnModel::new(&spec, cfg.srcm.clone(), cfg.taam.clone(), cfg.training.seed)?;
        let report = train(&mut model, &prep.train, &prep.valid, &cfg.training)?;
        model.harmonic = Some(prep.fit.clone());
        model.basis = Some(prep.basis.clone());
        model.save(path("model.dkw"))?;
        report.write_log(path("train_log.csv"))?;
        artifacts.push(("checkpoint".into(), path("model.dkw")));
        artifacts.push(("train_log".into(), path("train_log.csv")));
        Ok((model, report))
    })?;

    let forecasts = stage("predict", || {
        let f = forecast_series(&model, &prep.reanalysis, Some(prep.split))?;
        f.write_csv(path("forecasts.csv"))?;
        artifacts.push(("forecasts".into(), path("forecasts.csv")));
        Ok(f)
    })?;

    let report = stage("eval", || {
        let (report, written) = evaluate_forecasts(
            &forecasts,
            &prep.labels,
            cfg.eval.phase_mode,
            cfg.eval.seasonal,
            &path("skill.csv"),
        )?;
        for p in written {
            let key = p.file_stem().and_then(|s| s.to_str()).unwrap_or("skill").to_string();
            artifacts.push((key, p));
        }
        Ok(report)
    })?;

    let manifest = path("manifest.txt");
    std::fs::write(&manifest, manifest_text(cfg, &artifacts))?;
    Ok(RunSummary {
        artifacts,
        manifest,
        report,
        initial_train_loss: train_report.initial_train_loss,
        final_train_loss: train_report.history.last().map_or(f64::NAN, |e| e.train_loss),
    })
}

/// Plain `key = value` lines; only `created` varies between identical runs.
pub fn manifest_text(cfg: &RunConfig, artifacts: &[(String, PathBuf)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dkstn_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "config_hash = {}", cfg.hash());
    let _ = writeln!(s, "synth_seed = {}", cfg.synth.seed);
    let _ = writeln!(s, "data_seed = {}", cfg.data.seed);
    let _ = writeln!(s, "training_seed = {}", cfg.training.seed);
    let _ = writeln!(s, "created = {}", chrono::Utc::now().to_rfc3339());
    for (k, p) in artifacts {
        let _ = writeln!(s, "artifact.{k} = {}", p.display());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn missing_config_is_usage_error() {
        let err = Cli::try_parse_from(["dkstn", "all"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(Cli::try_parse_from(["dkstn", "labels", "--anomalies", "a", "--labels-out", "b"]).is_err());
    }

    #[test]
    fn season_paths() {
        assert_eq!(season_path(Path::new("/x/skill.csv"), "DJF"), Path::new("/x/skill_DJF.csv"));
    }
}
