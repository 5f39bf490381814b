use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ppes_core::harness::{check_audit, run_case, run_convergence, CaseConfig, CaseId, RunOptions};

#[derive(Parser)]
#[command(name = "ppes", version, about = "Positivity-preserving entropy-stable spectral collocation solver")]
struct Cli {
    /// Log every step (same as RUST_LOG=info).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML case file.
    config: PathBuf,
    /// Override the seed of the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write D, P and Q as CSV next to the other outputs.
    #[arg(long)]
    dump_operators: bool,
    /// Write per-element sensor, viscosity and limiter values.
    #[arg(long)]
    dump_av: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one case and write outputs.
    Run(Common),
    /// Run the grid-refinement study of a case.
    Convergence(Common),
    /// Run a case and report the conservation and positivity audits.
    Audit(Common),
    /// Print the fully resolved preset of a case as TOML.
    Preset {
        #[arg(value_parser = parse_case)]
        case: CaseId,
    },
}

fn parse_case(s: &str) -> std::result::Result<CaseId, String> {
    CaseConfig::from_toml_str(&format!("case = \"{s}\"")).map(|c| c.case).map_err(|e| e.to_string())
}

fn load(c: &Common) -> Result<(CaseConfig, RunOptions)> {
    let mut cfg = CaseConfig::load(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let ro = RunOptions { out_dir: c.out_dir.clone(), dump_av: c.dump_av, dump_operators: c.dump_operators };
    Ok((cfg, ro))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Preset { case } => {
            print!("{}", CaseConfig::preset(case).to_toml_string()?);
            Ok(true)
        }
        Cmd::Run(c) => {
            let (cfg, ro) = load(&c)?;
            let out = run_case(&cfg, &ro)?;
            println!("case={} steps={} t={:.9e}", out.config.case.name(), out.steps, out.t);
            if let Some(e) = out.errors {
                println!("l2={:.6e} linf={:.6e}", e.l2, e.linf);
            }
            report(&out)
        }
        Cmd::Audit(c) => {
            let (mut cfg, ro) = load(&c)?;
            cfg.vtk = ro.out_dir.is_some() && cfg.vtk;
            let out = run_case(&cfg, &ro)?;
            report(&out)
        }
        Cmd::Convergence(c) => {
            let (cfg, ro) = load(&c)?;
            let rows = run_convergence(&cfg, &ro)?;
            println!("scheme,p,k,l2,l2_rate,linf,linf_rate");
            for r in &rows {
                let rate = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
                println!("{},{},{},{:.3e},{},{:.3e},{}", r.scheme, r.p, r.k, r.l2, rate(r.l2_rate), r.linf, rate(r.linf_rate));
            }
            Ok(rows.iter().all(|r| r.completed))
        }
    }
}

fn report(out: &ppes_core::harness::RunOutcome) -> Result<bool> {
    let a = &out.audit;
    println!(
        "audit positivity={} min_rho={:.6e} min_T={:.6e} conservation={} mass_drift={:.3e} energy_drift={:.3e} completed={}",
        a.positivity, a.min_rho, a.min_t, a.conservation, a.mass_drift, a.energy_drift, a.completed
    );
    match check_audit(out) {
        Ok(()) => Ok(true),
        Err(e) => {
            eprintln!("{e}");
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
