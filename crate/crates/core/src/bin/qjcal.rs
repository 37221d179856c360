use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qjcal::commands::{self, RunContext};
use qjcal::config::{Overrides, RunConfig};
use qjcal::output::to_json_string;
use qjcal::trajectory::Scheme;
use qjcal::Result;

/// Quantum-jump trajectories of a qubit in a resistive bath and the
/// nanocalorimeter that detects its photons.
#[derive(Parser)]
#[command(name = "qjcal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transition rates and the detailed-balance residual.
    Rates(Common),
    /// Trajectory ensemble compared against the master equation.
    Ensemble(Common),
    /// First-photon click statistics and energy moments.
    Guardian(Common),
    /// Calorimeter detection traces and signal-to-noise ratio.
    Calorimeter {
        #[command(flatten)]
        common: Common,
        /// Event table (`trajectory,time,direction`) to detect instead of
        /// simulating new trajectories.
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trajectories or traces.
    #[arg(long)]
    n: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    /// Switch off the equilibrium heat-current noise.
    #[arg(long)]
    no_noise: bool,
    /// Comma-separated thermometer ratios τ/τ_th.
    #[arg(long, value_delimiter = ',')]
    tau_ratio: Option<Vec<f64>>,
    /// βħω_Q; `inf` for zero temperature.
    #[arg(long, value_parser = parse_beta)]
    beta_hw: Option<f64>,
    /// Initial excited population.
    #[arg(long)]
    prob_e: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Fixed-step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Worker threads (0 = all cores); never changes the results.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: qjcal::Error| e.to_string())
}

fn parse_beta(s: &str) -> std::result::Result<f64, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => other.parse().map_err(|_| format!("not a number: {s}")),
    }
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, RunContext)> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            n: self.n,
            out: self.out.clone(),
            scheme: self.scheme,
            no_noise: self.no_noise,
            tau_ratios: self.tau_ratio.clone(),
            beta_hw: self.beta_hw,
            prob_e: self.prob_e,
            t_max: self.t_max,
            dt: self.dt,
        });
        cfg.validate()?;
        let ctx = RunContext::new(cfg.out.clone(), self.workers);
        Ok((cfg, ctx))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rates(common) => {
            let (cfg, ctx) = common.resolve()?;
            let report = commands::cmd_rates(&cfg, &ctx)?;
            print!("{}", to_json_string(&report)?);
        }
        Command::Ensemble(common) => {
            let (cfg, ctx) = common.resolve()?;
            let out = commands::cmd_ensemble(&cfg, &ctx)?;
            let c = &out.report.comparison;
            println!(
                "N={} max|J_ee-rho_ee|={:.3e} max|z|={:.2} -> {}",
                c.n,
                c.max_abs_dev_ee,
                c.max_abs_z,
                ctx.out.display()
            );
        }
        Command::Guardian(common) => {
            let (cfg, ctx) = common.resolve()?;
            let out = commands::cmd_guardian(&cfg, &ctx)?;
            let r = &out.report;
            println!(
                "N={} N_e={} N_g={} silent={} p_hat={:.4} (|b0|^2={:.4}) -> {}",
                r.n,
                r.n_e,
                r.n_g,
                r.n_silent,
                r.p_hat,
                r.p_analytic,
                ctx.out.display()
            );
        }
        Command::Calorimeter { common, events } => {
            let (cfg, ctx) = common.resolve()?;
            let table = events.as_deref().map(commands::load_events).transpose()?;
            let out = commands::cmd_calorimeter(&cfg, &ctx, table.as_ref())?;
            let s = &out.report.snr;
            let mean = s.mean_snr.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            println!(
                "traces={} with_absorption={} mean SNR={} (analytic {:.3}) -> {}",
                s.per_trace_snr.len(),
                s.traces_with_absorption,
                mean,
                s.analytic_snr,
                ctx.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
