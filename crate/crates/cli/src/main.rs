use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cocoa_core::bench::config::{AlgorithmChoice, RunConfig, SolverKind};
use cocoa_core::bench::experiment::{build_instance, run_experiment};
use cocoa_core::bench::rates::{fit_rate, tail_window};
use cocoa_core::bench::reference::{reference_solution, ReferenceOptions};
use cocoa_core::metrics::load_csv;

/// Overrides the configured output directory.
const OUTPUT_ENV: &str = "COCOA_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "cocoa", version, about = "Accelerated and plain CoCoA+ on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm(s) and write metrics CSVs.
    Run(ConfigArgs),
    /// Solve the configured problem on one machine to high accuracy.
    Reference(ConfigArgs),
    /// Fit the log-log tail slope of a metrics CSV column.
    Rates {
        csv: PathBuf,
        #[arg(long, default_value = "suboptimality")]
        column: String,
        /// First round of the window (default T/4).
        #[arg(long)]
        from: Option<usize>,
        /// Last round of the window (default T).
        #[arg(long)]
        to: Option<usize>,
    },
    /// Exact-solve accelerated run with the convex-combination and bound
    /// audits; exits nonzero if either fails.
    Audit(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (beats the environment and the config).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        for s in &self.set {
            cfg.apply_override(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| cfg.output.clone())
    }
}

fn run(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    let out = args.out_dir(&cfg);
    let report = run_experiment(&cfg, &out)?;
    print!("{report}");
    Ok(())
}

fn reference(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    let inst = build_instance(&cfg)?;
    let opts = ReferenceOptions {
        tol: cfg.reference_tol,
        ..ReferenceOptions::default()
    };
    let sol = reference_solution(&inst.problem, &inst.matrix, opts)?;
    let nnz = sol.alpha.iter().filter(|v| **v != 0.0).count();
    println!("optimum      {:.16e}", sol.opt_value);
    println!("sweeps       {}", sol.sweeps);
    println!("residual     {:.3e}", sol.residual);
    println!("nonzeros     {nnz} / {}", sol.alpha.len());
    let out = args.out_dir(&cfg);
    std::fs::create_dir_all(&out)?;
    let path = out.join("reference.json");
    let body = serde_json::json!({ "opt_value": sol.opt_value, "alpha": sol.alpha });
    std::fs::write(&path, serde_json::to_string_pretty(&body)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn rates(csv: &Path, column: &str, from: Option<usize>, to: Option<usize>) -> Result<()> {
    let rows = load_csv(csv).with_context(|| format!("reading {}", csv.display()))?;
    let t_max = rows.last().map_or(0, |r| r.t);
    let (lo, hi) = tail_window(t_max);
    let window = (from.unwrap_or(lo), to.unwrap_or(hi));
    let fit = fit_rate(&rows, column, window)?;
    println!(
        "{column} over t in [{}, {}]: slope {:.4} (rms residual {:.3e}, {} points)",
        window.0, window.1, fit.slope, fit.residual, fit.points
    );
    Ok(())
}

fn audit(args: &ConfigArgs) -> Result<()> {
    let mut cfg = args.load()?;
    cfg.algorithm = AlgorithmChoice::Acc;
    cfg.local_solver = SolverKind::Exact;
    cfg.reference = true;
    cfg.audit_lemma2 = true;
    cfg.audit_theorem1 = true;
    let out = args.out_dir(&cfg);
    let report = run_experiment(&cfg, &out)?;
    let run = &report.runs[0];
    let recon = run.lemma2_max_error.unwrap_or(f64::INFINITY);
    let excess = run.theorem1_max_excess.unwrap_or(f64::INFINITY);
    let recon_ok = recon <= 1e-8;
    let bound_ok = excess <= 1e-8;
    println!(
        "convex combination: max reconstruction error {recon:.3e} [{}]",
        if recon_ok { "pass" } else { "FAIL" }
    );
    println!(
        "exact-case bound:   max(lhs - rhs) {excess:.3e} [{}]",
        if bound_ok { "pass" } else { "FAIL" }
    );
    if !(recon_ok && bound_ok) {
        bail!("audit failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(a) => run(a),
        Command::Reference(a) => reference(a),
        Command::Rates { csv, column, from, to } => rates(csv, column, *from, *to),
        Command::Audit(a) => audit(a),
    }
}
