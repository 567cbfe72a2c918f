use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lti_ident::environments::{load_dataset, save_dataset, variability_matrix};
use lti_ident::estimator::{predict_controls, DecoderDocument, LinearDecoder};
use lti_ident::lti::{markov_params, StateSpace};
use lti_ident::metrics::{circle_samples, mcc, transfer_equivalence};
use lti_ident::sysid::ho_kalman;
use serde_json::json;

use crate::config::{DesignKind, ExperimentConfig, ExperimentKind};
use crate::experiment::{build_dataset, build_design, evaluate, fit_dataset, run_experiment};
use crate::io::SystemDocument;
use crate::table::emit_table;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "LTI_IDENT_OUTPUT_DIR";
const FALLBACK_OUTPUT_DIR: &str = "lti-ident-out";

#[derive(Debug, Parser)]
#[command(name = "lti-ident", version, about = "Identify linear time-invariant systems from multi-environment data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a system and its multi-environment dataset for the first seed.
    Simulate(SimulateArgs),
    /// Print an environment design and its variability diagnostics.
    Design(ConfigArgs),
    /// Fit a decoder to a stored dataset.
    Fit(FitArgs),
    /// Recover a system from its Markov parameters with Ho-Kalman.
    Sysid(SysidArgs),
    /// Score a decoder against the controls recorded in a dataset.
    Mcc(MccArgs),
    /// Run every seed of an experiment cell and write the result tables.
    Experiment(ConfigArgs),
}

/// Experiment settings: an optional flat TOML file plus per-field overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat TOML config; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<ExperimentKind>,
    #[arg(long = "d_u")]
    pub d_u: Option<usize>,
    #[arg(long = "d_x")]
    pub d_x: Option<usize>,
    #[arg(long = "d_y")]
    pub d_y: Option<usize>,
    #[arg(long)]
    pub design: Option<DesignKind>,
    #[arg(long = "num_envs")]
    pub num_envs: Option<usize>,
    #[arg(long = "variance_low")]
    pub variance_low: Option<f64>,
    #[arg(long = "variance_high")]
    pub variance_high: Option<f64>,
    #[arg(long = "b_identity")]
    pub b_identity: Option<bool>,
    #[arg(long = "c_identity")]
    pub c_identity: Option<bool>,
    #[arg(long = "control_mean_nonzero")]
    pub control_mean_nonzero: Option<bool>,
    #[arg(long = "mean_scale")]
    pub mean_scale: Option<f64>,
    #[arg(long = "obs_noise_var")]
    pub obs_noise_var: Option<f64>,
    #[arg(long = "steps_per_env")]
    pub steps_per_env: Option<usize>,
    #[arg(long = "validation_fraction")]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "learning_rate")]
    pub learning_rate: Option<f64>,
    #[arg(long = "batch_size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "grad_clip_norm")]
    pub grad_clip_norm: Option<f64>,
    /// `orthogonal` or `scaled_gaussian`.
    #[arg(long)]
    pub init: Option<String>,
    /// Offset added to every derived fit seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "include_log_det")]
    pub include_log_det: Option<bool>,
    /// `precision` or `covariance`.
    #[arg(long)]
    pub weighting: Option<String>,
    /// `whiten` or `none`.
    #[arg(long)]
    pub preconditioning: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long = "persist_datasets")]
    pub persist_datasets: Option<bool>,
    #[arg(long = "output_dir")]
    pub output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn overrides(&self) -> Result<toml::Table> {
        let mut t = toml::Table::new();
        let mut put = |key: &str, value: Option<toml::Value>| {
            if let Some(v) = value {
                t.insert(key.to_string(), v);
            }
        };
        let int = |v: Option<usize>| v.map(|v| toml::Value::Integer(v as i64));
        let float = |v: Option<f64>| v.map(toml::Value::Float);
        let boolean = |v: Option<bool>| v.map(toml::Value::Boolean);
        let string = |v: &Option<String>| v.clone().map(toml::Value::String);
        put("kind", self.kind.map(toml::Value::try_from).transpose()?);
        put("d_u", int(self.d_u));
        put("d_x", int(self.d_x));
        put("d_y", int(self.d_y));
        put("design", self.design.map(toml::Value::try_from).transpose()?);
        put("num_envs", int(self.num_envs));
        put("variance_low", float(self.variance_low));
        put("variance_high", float(self.variance_high));
        put("b_identity", boolean(self.b_identity));
        put("c_identity", boolean(self.c_identity));
        put("control_mean_nonzero", boolean(self.control_mean_nonzero));
        put("mean_scale", float(self.mean_scale));
        put("obs_noise_var", float(self.obs_noise_var));
        put("steps_per_env", int(self.steps_per_env));
        put("validation_fraction", float(self.validation_fraction));
        put("dt", float(self.dt));
        put("learning_rate", float(self.learning_rate));
        put("batch_size", int(self.batch_size));
        put("epochs", int(self.epochs));
        put("grad_clip_norm", float(self.grad_clip_norm));
        put("init", string(&self.init));
        put("seed", self.seed.map(|s| toml::Value::Integer(s as i64)));
        put("include_log_det", boolean(self.include_log_det));
        put("weighting", string(&self.weighting));
        put("preconditioning", string(&self.preconditioning));
        put(
            "seeds",
            self.seeds
                .as_ref()
                .map(|s| toml::Value::Array(s.iter().map(|&v| toml::Value::Integer(v as i64)).collect())),
        );
        put("persist_datasets", boolean(self.persist_datasets));
        put(
            "output_dir",
            self.output_dir.as_ref().map(|p| toml::Value::String(p.display().to_string())),
        );
        Ok(t)
    }

    /// File values, then flag overrides, then validation.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut table: toml::Table = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?
                .parse()
                .with_context(|| format!("parsing {}", path.display()))?,
            None => toml::Table::new(),
        };
        table.extend(self.overrides()?);
        let cfg = ExperimentConfig::from_toml_str(&toml::to_string(&table)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Destination directory; defaults to the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Decoder destination; defaults to `decoder.json` in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SysidArgs {
    /// System document (`system.json`) providing the Markov parameters.
    #[arg(long)]
    pub system: PathBuf,
    /// Realization order; defaults to the state dimension of the input.
    #[arg(long = "d_x")]
    pub d_x: Option<usize>,
    #[arg(long)]
    pub t1: Option<usize>,
    #[arg(long)]
    pub t2: Option<usize>,
    /// Where to write the recovered system.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MccArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub decoder: PathBuf,
    #[arg(long = "validation_fraction", default_value_t = 0.1)]
    pub validation_fraction: f64,
}

/// Output directory: explicit value, else the environment variable, else a
/// fixed relative directory.
pub fn default_output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Design(args) => design(&args),
        Command::Fit(args) => fit(&args),
        Command::Sysid(args) => sysid(&args),
        Command::Mcc(args) => score(&args),
        Command::Experiment(args) => experiment(&args),
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let seed = cfg.seeds[0];
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_output_dir(cfg.output_dir.as_deref()));
    let (sys, set) = build_dataset(&cfg, seed)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    SystemDocument::from_system(&sys).save(&out.join("system.json"))?;
    save_dataset(&set, &out.join("dataset"))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    print_json(&json!({
        "output": out,
        "seed": seed,
        "system_fingerprint": sys.fingerprint(),
        "dataset_fingerprint": set.fingerprint(),
        "environments": set.specs.len(),
        "steps_per_env": set.horizon,
    }))
}

fn design(args: &ConfigArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let specs = build_design(&cfg, cfg.seeds[0])?;
    let diag = variability_matrix(&specs)?;
    let envs: Vec<_> = specs
        .iter()
        .map(|s| {
            json!({
                "index": s.index(),
                "variances": s.variances().as_slice(),
                "mean": s.mean().as_slice(),
            })
        })
        .collect();
    let delta: Vec<Vec<f64>> = diag.delta.row_iter().map(|r| r.iter().copied().collect()).collect();
    print_json(&json!({
        "environments": envs,
        "delta": delta,
        "column_rank": diag.column_rank,
        "condition_number": if diag.condition_number.is_finite() { json!(diag.condition_number) } else { json!(null) },
        "satisfies_variability": diag.satisfies_variability,
    }))
}

fn fit(args: &FitArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let set = load_dataset(&args.dataset)?;
    let (decoder, report) = fit_dataset(&cfg, &set, cfg.seeds[0])?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_output_dir(cfg.output_dir.as_deref()).join("decoder.json"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    decoder
        .to_document(Some(&cfg.fit), Some(&set.fingerprint()))
        .save(&out)?;
    print_json(&json!({ "decoder": out, "report": report }))
}

fn sysid(args: &SysidArgs) -> Result<()> {
    let sys = SystemDocument::load(&args.system)?.to_system()?;
    let d_x = args.d_x.unwrap_or(sys.state_dim());
    let t1 = args.t1.unwrap_or(d_x);
    let t2 = args.t2.unwrap_or(d_x);
    let mp = markov_params(&sys, t1 + t2 + 1)?;
    let result = ho_kalman(&mp, d_x, t1, t2)?;
    let eq = transfer_equivalence(&sys, &result.sys, &circle_samples(1.5, 32), 1e-7)?;
    if let Some(out) = &args.out {
        SystemDocument::from_system(&result.sys).save(out)?;
    }
    print_json(&json!({
        "singular_values": result.singular_values,
        "effective_rank": result.effective_rank,
        "t1": t1,
        "t2": t2,
        "rank_gap_warning": result.rank_gap_warning,
        "transfer_max_rel_error": eq.max_rel_error,
        "recovered_fingerprint": result.sys.fingerprint(),
    }))
}

fn score(args: &MccArgs) -> Result<()> {
    let set = load_dataset(&args.dataset)?;
    let doc = DecoderDocument::load(&args.decoder)?;
    if let Some(fp) = &doc.dataset_fingerprint {
        if fp != &set.fingerprint() {
            log::warn!("decoder was fitted on a different dataset ({fp})");
        }
    }
    let decoder = LinearDecoder::from_document(&doc)?;
    let (train, val) = evaluate(&decoder, &set, args.validation_fraction)?;
    let (mut u, mut u_hat) = (Vec::new(), Vec::new());
    for tr in &set.trajectories {
        u.extend_from_slice(&tr.u);
        u_hat.extend(predict_controls(&decoder, &tr.y)?);
    }
    let all = mcc(&u, &u_hat)?;
    print_json(&json!({ "train_mcc": train, "val_mcc": val, "all": all }))
}

fn experiment(args: &ConfigArgs) -> Result<()> {
    let mut cfg = args.resolve()?;
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(default_output_dir(None));
    }
    let rows = run_experiment(&cfg)?;
    if rows.is_empty() {
        bail!("experiment produced no rows");
    }
    print!("{}", emit_table(&rows, crate::config::FACTORS)?);
    eprintln!("results written to {}", cfg.output_dir.as_ref().expect("set above").display());
    Ok(())
}

/// Loads the system stored next to a dataset by `simulate`.
pub fn load_system(dir: &Path) -> Result<StateSpace> {
    SystemDocument::load(&dir.join("system.json"))?.to_system()
}
