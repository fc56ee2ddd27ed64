//! Batch command-line front end. Every command reads a flat `key = value`
//! config (optional), applies flag overrides, and writes JSON/CSV reports
//! into the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attribute::AttributionMethod;
use crate::dataset::{
    aggregate_companies, join_weekly, load_company_csv, load_csv, load_indicator_rows, load_macro_csv, write_csv,
    SplitSpec, DEFAULT_SPLIT_SEED,
};
use crate::diagnose::{qq_csv, residual_csv, residual_diagnostics};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pipeline::{fit_pipeline, rank_pipeline, validate_pipeline, FitConfig, StageError, StageResult};
use crate::refmodel::published_spec;
use crate::regress::{FittedModel, ModelDocument};
use crate::select::{EliminationOptions, DEFAULT_ALPHA};
use crate::validate::{price_metrics, CvConfig, DEFAULT_FOLDS, DEFAULT_REPEATS};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const OUT_ENV: &str = "SECTORCAST_OUT";
const DEFAULT_OUT: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "sectorcast", version, about = "Weekly closing price model for a sector index")]
pub struct Cli {
    /// Flat `key = value` config file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the train/test split (and CV unless `cv-seed` is given).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (falls back to the config, then $SECTORCAST_OUT, then `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Average company-level records into an index-level dataset.
    Ingest,
    /// Fit the transform and the eliminated interaction model.
    Fit,
    /// Predict WCP^T and WCP for indicator rows.
    Predict,
    /// Residual diagnostics and plot data for a fitted model.
    Diagnose,
    /// Test-set metrics and cross-validation.
    Validate,
    /// Rank the model terms by contribution.
    Rank,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Diagnose => "diagnose",
            Command::Validate => "validate",
            Command::Rank => "rank",
        }
    }
}

/// One flag per config key.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// Index-level dataset CSV.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Company-level CSV for `ingest`.
    #[arg(long, global = true)]
    pub companies: Option<PathBuf>,
    /// Weekly macro CSV (X7..X10) for `ingest`.
    #[arg(long = "macro", global = true)]
    pub macro_csv: Option<PathBuf>,
    /// Model JSON written by `fit`.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Indicator rows for `predict`.
    #[arg(long, global = true)]
    pub rows: Option<PathBuf>,
    /// observed,predicted pairs for `validate` (metrics only).
    #[arg(long, global = true)]
    pub pairs: Option<PathBuf>,
    #[arg(long = "train-fraction", alias = "train_fraction", global = true)]
    pub train_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub heredity: Option<bool>,
    #[arg(long = "cv-k", alias = "cv_k", global = true)]
    pub cv_k: Option<usize>,
    #[arg(long = "cv-repeats", alias = "cv_repeats", global = true)]
    pub cv_repeats: Option<usize>,
    #[arg(long = "cv-seed", alias = "cv_seed", global = true)]
    pub cv_seed: Option<u64>,
    /// `partial_ss` or `coef_share`.
    #[arg(long, global = true)]
    pub attribution: Option<AttributionMethod>,
    /// Use the published reference model instead of `--model`.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub published: Option<bool>,
    /// Disable the data-parallel loops.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
}

/// Fully resolved settings; echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub companies: Option<PathBuf>,
    #[serde(rename = "macro")]
    pub macro_csv: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub rows: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub train_fraction: f64,
    pub seed: u64,
    pub alpha: f64,
    pub heredity: bool,
    pub cv_k: usize,
    pub cv_repeats: usize,
    pub cv_seed: u64,
    pub attribution: AttributionMethod,
    pub published: bool,
    pub sequential: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            companies: None,
            macro_csv: None,
            model: None,
            rows: None,
            pairs: None,
            train_fraction: SplitSpec::default().train_fraction,
            seed: DEFAULT_SPLIT_SEED,
            alpha: DEFAULT_ALPHA,
            heredity: true,
            cv_k: DEFAULT_FOLDS,
            cv_repeats: DEFAULT_REPEATS,
            cv_seed: DEFAULT_SPLIT_SEED,
            attribution: AttributionMethod::default(),
            published: false,
            sequential: false,
            out: PathBuf::from(DEFAULT_OUT),
        }
    }
}

/// Parses the flat config format: one `key = value` per line, `#` starts a
/// comment, keys accept `-` or `_`. Later duplicates win.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Config {
                line: line_no,
                message: "empty key".into(),
            });
        }
        out.insert(key, (line_no, value.trim().to_string()));
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Config {
        line,
        message: format!("{key}: {e}"),
    })
}

impl RunConfig {
    /// Defaults, then the config file, then flags; the output directory
    /// additionally falls back to `$SECTORCAST_OUT`.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => parse_config(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?,
            None => BTreeMap::new(),
        };
        let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
        Self::from_parts(&file, cli.seed, cli.out.clone(), env_out, &cli.overrides)
    }

    pub fn from_parts(
        file: &BTreeMap<String, (usize, String)>,
        seed: Option<u64>,
        out: Option<PathBuf>,
        env_out: Option<PathBuf>,
        o: &Overrides,
    ) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut cv_seed = None;
        let mut file_out = None;
        for (key, (line, value)) in file {
            let line = *line;
            let path = || Some(PathBuf::from(value));
            match key.as_str() {
                "input" => cfg.input = path(),
                "companies" => cfg.companies = path(),
                "macro" => cfg.macro_csv = path(),
                "model" => cfg.model = path(),
                "rows" => cfg.rows = path(),
                "pairs" => cfg.pairs = path(),
                "out" => file_out = path(),
                "train_fraction" => cfg.train_fraction = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "alpha" => cfg.alpha = parse_value(line, key, value)?,
                "heredity" => cfg.heredity = parse_value(line, key, value)?,
                "cv_k" => cfg.cv_k = parse_value(line, key, value)?,
                "cv_repeats" => cfg.cv_repeats = parse_value(line, key, value)?,
                "cv_seed" => cv_seed = Some(parse_value(line, key, value)?),
                "attribution" => cfg.attribution = parse_value(line, key, value)?,
                "published" => cfg.published = parse_value(line, key, value)?,
                "sequential" => cfg.sequential = parse_value(line, key, value)?,
                other => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }

        macro_rules! flag {
            ($field:ident) => {
                if let Some(v) = &o.$field {
                    cfg.$field = v.clone().into();
                }
            };
        }
        flag!(input);
        flag!(companies);
        flag!(macro_csv);
        flag!(model);
        flag!(rows);
        flag!(pairs);
        flag!(train_fraction);
        flag!(alpha);
        flag!(heredity);
        flag!(cv_k);
        flag!(cv_repeats);
        flag!(attribution);
        flag!(published);
        flag!(sequential);
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.cv_seed = o.cv_seed.or(cv_seed).unwrap_or(cfg.seed);
        cfg.out = out
            .or(file_out)
            .or(env_out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.cv_k < 2 {
            return bad(format!("cv_k must be at least 2, got {}", self.cv_k));
        }
        if self.cv_repeats < 1 {
            return bad("cv_repeats must be at least 1".into());
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            split: self.split_spec(),
            elimination: EliminationOptions {
                alpha: self.alpha,
                heredity: self.heredity,
            },
            execution: self.execution(),
        }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            k: self.cv_k,
            repeats: self.cv_repeats,
            seed: self.cv_seed,
            execution: self.execution(),
        }
    }
}

/// Envelope shared by every JSON report.
#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub result: T,
}

trait AtStage<T> {
    fn at(self, stage: &'static str) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// 2 for input and validation problems, 3 for numerical failures.
pub fn exit_code(err: &StageError) -> i32 {
    if err.source.is_numerical() {
        3
    } else {
        2
    }
}

struct Ctx {
    cfg: RunConfig,
    command: Command,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            // A closed pipe (e.g. `| head`) is not an error for a batch tool.
            let _ = writeln!(std::io::stdout(), "{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> StageResult<()> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e)).at("write")
    }

    fn write_report<T: Serialize>(&self, name: &str, result: T) -> StageResult<()> {
        let report = Report {
            schema_version: REPORT_SCHEMA_VERSION,
            command: self.command.name(),
            config: &self.cfg,
            result,
        };
        self.write(name, &to_json(&report).at("write")?)
    }

    fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> StageResult<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter(format!("`{key}` is required for `{}`", self.command.name())))
            .at("config")
    }

    fn load_model(&self) -> StageResult<FittedModel> {
        if self.cfg.published {
            return Ok(published_spec().to_fitted());
        }
        let path = self.require(&self.cfg.model, "model")?;
        read_model(path).at("load-model")
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_model(path: &Path) -> Result<FittedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelDocument = serde_json::from_str(&text)?;
    FittedModel::from_document(&doc)
}

pub fn run(cli: &Cli) -> StageResult<()> {
    let cfg = RunConfig::resolve(cli).at("config")?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e)).at("config")?;
    let ctx = Ctx {
        cfg,
        command: cli.command,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Ingest => ingest(&ctx),
        Command::Fit => fit(&ctx),
        Command::Predict => predict(&ctx),
        Command::Diagnose => diagnose(&ctx),
        Command::Validate => validate(&ctx),
        Command::Rank => rank(&ctx),
    }
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {} failed: {}", cli.command.name(), e);
            exit_code(&e)
        }
    }
}

fn ingest(ctx: &Ctx) -> StageResult<()> {
    let cfg = &ctx.cfg;
    let dataset = match (&cfg.companies, &cfg.macro_csv, &cfg.input) {
        (Some(companies), Some(macro_csv), _) => {
            let records = load_company_csv(companies).at("ingest")?;
            let averages = aggregate_companies(&records).at("ingest")?;
            let macro_rows = load_macro_csv(macro_csv).at("ingest")?;
            join_weekly(&averages, &macro_rows, companies.display().to_string()).at("ingest")?
        }
        (None, None, Some(input)) => load_csv(input).at("ingest")?,
        _ => {
            return Err(Error::InvalidParameter(
                "ingest needs `companies` and `macro`, or an index-level `input`".into(),
            ))
            .at("config")
        }
    };
    let mut buf = Vec::new();
    write_csv(&dataset, &mut buf).at("write")?;
    ctx.write("dataset.csv", &String::from_utf8_lossy(&buf))?;
    ctx.say(format!("{} weekly rows -> {}", dataset.len(), ctx.path("dataset.csv").display()));
    Ok(())
}

#[derive(Serialize)]
struct ScreeningResult<'a> {
    n_train: usize,
    n_test: usize,
    #[serde(flatten)]
    screening: &'a crate::pipeline::Screening,
}

fn fit(ctx: &Ctx) -> StageResult<()> {
    let config_json = serde_json::to_value(&ctx.cfg).map_err(Error::from).at("write")?;
    if ctx.cfg.published {
        let model = published_spec().to_fitted();
        ctx.write("model.json", &to_json(&model.to_document("published", Some(config_json))).at("write")?)?;
        ctx.say(format!("published model -> {}", ctx.path("model.json").display()));
        return Ok(());
    }
    let input = ctx.require(&ctx.cfg.input, "input")?;
    let data = load_csv(input).at("load")?;
    let outcome = fit_pipeline(&data, &ctx.cfg.fit_config())?;

    let doc = outcome.model.to_document("fitted", Some(config_json));
    ctx.write("model.json", &to_json(&doc).at("write")?)?;
    ctx.write_report("elimination.json", &outcome.trace)?;
    ctx.write_report("diagnostics.json", &outcome.diagnostics)?;
    ctx.write_report(
        "screening.json",
        ScreeningResult {
            n_train: outcome.n_train,
            n_test: outcome.n_test,
            screening: &outcome.screening,
        },
    )?;
    ctx.write("qq_residuals.csv", &qq_csv(&outcome.diagnostics.qq_points))?;
    ctx.write("residuals_vs_fitted.csv", &residual_csv(&outcome.diagnostics.residual_vs_fitted))?;
    ctx.write("qq_wcp.csv", &qq_csv(&outcome.screening.qq_wcp))?;
    ctx.write("qq_wcp_transformed.csv", &qq_csv(&outcome.screening.qq_transformed))?;

    ctx.say(outcome.trace.table());
    let est = outcome.model.estimate.as_ref().expect("fitted model carries its estimate");
    ctx.say(format!(
        "{} terms, R2 = {:.4}, adj. R2 = {:.4}, n_train = {}, n_test = {}",
        outcome.model.spec.len(),
        est.r_squared,
        est.adj_r_squared,
        outcome.n_train,
        outcome.n_test
    ));
    Ok(())
}

fn predict(ctx: &Ctx) -> StageResult<()> {
    let model = ctx.load_model()?;
    let rows_path = ctx.require(&ctx.cfg.rows, "rows")?;
    let rows = load_indicator_rows(rows_path).at("load")?;
    let mut out = String::from("row,week_start,wcp_t,wcp,observed_wcp\n");
    for (i, row) in rows.iter().enumerate() {
        let t = model.predict_transformed(&row.indicators).at("predict")?;
        let price = model.transform.inverse(t);
        let week = row.week_start.map(|w| w.to_string()).unwrap_or_default();
        let observed = row.wcp.map(|w| w.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{week},{t},{price},{observed}\n", i + 1));
    }
    ctx.write("predictions.csv", &out)?;
    ctx.say(format!("{} predictions -> {}", rows.len(), ctx.path("predictions.csv").display()));
    Ok(())
}

fn diagnose(ctx: &Ctx) -> StageResult<()> {
    let model = ctx.load_model()?;
    let estimate = model
        .estimate
        .as_ref()
        .filter(|e| !e.residuals.is_empty())
        .ok_or_else(|| Error::InvalidParameter("model carries no residuals to diagnose".into()))
        .at("load-model")?;
    let report = residual_diagnostics(estimate).at("diagnose")?;
    ctx.write_report("diagnostics.json", &report)?;
    ctx.write("qq_residuals.csv", &qq_csv(&report.qq_points))?;
    ctx.write("residuals_vs_fitted.csv", &residual_csv(&report.residual_vs_fitted))?;
    ctx.say(format!(
        "residual mean {:.3e}; Shapiro-Wilk p = {:.4}; Anderson-Darling p = {:.4}",
        report.mean_residual, report.shapiro.p_value, report.anderson.p_value
    ));
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PairRow {
    observed: f64,
    predicted: f64,
}

fn validate(ctx: &Ctx) -> StageResult<()> {
    if let Some(pairs) = &ctx.cfg.pairs {
        let mut rdr = csv::Reader::from_path(pairs).map_err(Error::from).at("load")?;
        let rows = rdr
            .deserialize::<PairRow>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(Error::from)
            .at("load")?;
        let observed: Vec<f64> = rows.iter().map(|r| r.observed).collect();
        let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
        let metrics = price_metrics(&observed, &predicted).at("metrics")?;
        ctx.write_report("pair_metrics.json", &metrics)?;
        ctx.say(format!(
            "n = {}, RMSE = {:.4}, MAPE = {:.4}%, RRMSE = {:.4}%",
            metrics.n, metrics.rmse, metrics.mape_percent, metrics.rrmse_percent
        ));
        return Ok(());
    }
    let model = ctx.load_model()?;
    let input = ctx.require(&ctx.cfg.input, "input")?;
    let data = load_csv(input).at("load")?;
    let report = validate_pipeline(&model, &data, &ctx.cfg.split_spec(), &ctx.cfg.cv_config())?;
    ctx.write_report("validation.json", &report)?;
    ctx.say(report.table());
    Ok(())
}

fn rank(ctx: &Ctx) -> StageResult<()> {
    let model = ctx.load_model()?;
    let data = match &ctx.cfg.input {
        Some(path) => Some(load_csv(path).at("load")?),
        None => None,
    };
    let split = ctx.cfg.split_spec();
    let ranking = rank_pipeline(
        &model,
        data.as_ref().map(|d| (d, &split)),
        ctx.cfg.attribution,
        ctx.cfg.execution(),
    )?;
    ctx.write_report("ranking.json", &ranking)?;
    ctx.say(ranking.table());
    Ok(())
}
