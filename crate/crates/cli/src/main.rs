use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resbench::bench::{emit_anova, emit_reports, emit_tuning, run_benchmark, BenchConfig, BenchContext, TuneMode};
use resbench::data::{load_csv, synthetic, write_csv, FeatureTable};
use resbench::select::anova_f_scores;
use resbench::{Error, Result};

#[derive(Parser)]
#[command(name = "bench", version, about = "Repeated-split benchmark of an echo state network against classical classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of every method and write the report files.
    Run(Options),
    /// Rank features by ANOVA F-value on the full table.
    Anova(Options),
    /// Tune one method on trial 0's training split and write its tuning curve.
    Tune(Options),
    /// Write a synthetic table with the voice-measurement schema.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Every option is optional so that a config file can supply it; flags win.
#[derive(Args, Default)]
struct Options {
    /// key = value file with any of the options below
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    /// comma-separated subset of esn,rf,knn,svc,xgb,dt or `all`
    #[arg(long, visible_alias = "method")]
    methods: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    #[arg(long)]
    k_features: Option<String>,
    /// per-trial | global
    #[arg(long)]
    selection: Option<String>,
    /// per-trial | once | fixed
    #[arg(long)]
    tune_mode: Option<String>,
    #[arg(long)]
    tune_budget: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    /// bayesian | random
    #[arg(long)]
    search: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    stratified: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// per-trial | fixed
    #[arg(long)]
    reservoir_seed: Option<String>,
    /// feed samples to the ESN as one sequence
    #[arg(long)]
    sequence: bool,
    #[arg(long)]
    washout: Option<String>,
    #[arg(long)]
    esn_bias: bool,
    /// 20 trials, tuning budget 10, tune once
    #[arg(long)]
    quick: bool,
    /// search-space override, e.g. `svc.C=log:0.1:100`
    #[arg(long = "space", value_name = "METHOD.DIM=SPEC")]
    space: Vec<String>,
}

impl Options {
    fn resolve(&self) -> Result<BenchConfig> {
        let mut cfg = BenchConfig::default();
        if let Some(path) = &self.config {
            for (k, v) in BenchConfig::read_file(path)? {
                cfg.apply(&k, &v)?;
            }
        }
        if self.quick {
            cfg = cfg.quick();
        }
        let flags = [
            ("data", &self.data),
            ("methods", &self.methods),
            ("trials", &self.trials),
            ("test-fraction", &self.test_fraction),
            ("k-features", &self.k_features),
            ("selection", &self.selection),
            ("tune-mode", &self.tune_mode),
            ("tune-budget", &self.tune_budget),
            ("folds", &self.folds),
            ("search", &self.search),
            ("seed", &self.seed),
            ("stratified", &self.stratified),
            ("out", &self.out),
            ("reservoir-seed", &self.reservoir_seed),
            ("washout", &self.washout),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.apply(key, v)?;
            }
        }
        if self.sequence {
            cfg.sequence = true;
        }
        if self.esn_bias {
            cfg.esn_bias = true;
        }
        for s in &self.space {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Argument(format!("--space `{s}`: expected METHOD.DIM=SPEC")))?;
            cfg.apply(&format!("space.{k}"), v)?;
        }
        Ok(cfg)
    }
}

fn load(cfg: &BenchConfig) -> Result<FeatureTable> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Argument("no input table; pass --data <path>".into()))?;
    log::info!("loading {}", path.display());
    load_csv(path)
}

fn print_manifest(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(opts) => {
            let cfg = opts.resolve()?;
            let table = load(&cfg)?;
            let bundle = run_benchmark(&cfg, &table)?;
            for r in &bundle.methods {
                let s = &r.summary;
                log::info!(
                    "{}: accuracy {:.3}% fn rate {}",
                    r.method,
                    100.0 * s.accuracy.mean.unwrap_or(f64::NAN),
                    s.fn_rate.mean.map_or("NA".into(), |v| format!("{:.3}%", 100.0 * v))
                );
            }
            print_manifest(&emit_reports(&bundle, &cfg.out)?);
        }
        Command::Anova(opts) => {
            let cfg = opts.resolve()?;
            let table = load(&cfg)?;
            cfg.validate(table.n_features())?;
            let report = anova_f_scores(&table)?;
            print_manifest(&emit_anova(&report, cfg.k_features, &cfg.out)?);
        }
        Command::Tune(opts) => {
            let mut cfg = opts.resolve()?;
            if cfg.methods.len() != 1 {
                return Err(Error::Argument("tune takes exactly one --method".into()));
            }
            if cfg.tune_mode != TuneMode::Fixed {
                cfg.tune_mode = TuneMode::Once;
            }
            let method = cfg.methods[0];
            let table = load(&cfg)?;
            let ctx = BenchContext::new(cfg.clone(), table)?;
            let resolved = &ctx.resolved[&method];
            let history = resolved.history.as_ref().expect("tuning history for once/fixed modes");
            if let Some(best) = history.best_evaluation() {
                let point: Vec<String> = best.point.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
                log::info!("{method}: best CV accuracy {:.4} at {}", best.objective, point.join(" "));
            }
            print_manifest(&emit_tuning(method, &cfg.space(method), history, &cfg.out)?);
        }
        Command::Synth { seed, out } => write_synth(seed, &out)?,
    }
    Ok(())
}

fn write_synth(seed: u64, out: &Path) -> Result<()> {
    let file = std::fs::File::create(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    write_csv(&synthetic::voice_like_table(seed), file)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("error ({cat:?}): {e}");
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}
