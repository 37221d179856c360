//! Subcommand drivers. Each has a pure `run_*` part returning the in-memory
//! results and a `cmd_*` part that also writes the artifacts under
//! [`RunContext::out`].
//!
//! Output trees depend only on the resolved configuration: file contents
//! never include paths, timestamps or the worker count.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calorimeter::{
    simulate_coupled_detection, simulate_detection, snr_summary, SnrSummary, TemperatureTrace,
};
use crate::config::RunConfig;
use crate::ensemble::{compare_to_me, EnsembleAccumulator, EnsembleStats, MeComparison};
use crate::error::Result;
use crate::measurement::{
    energy_moments_analytic, energy_moments_empirical, guardian_click_probability, ClickTally,
    EnergyMoments, GuardianProbability, Histogram,
};
use crate::model::{compute_rates, Rates};
use crate::output::{fmt_f64, write_json, write_provenance, write_row};
use crate::runner::{at_index, map_chunks};
use crate::trajectory::{
    no_jump_evolve, read_event_table, survival_probability, Direction, JumpEvent, TrajectoryRecord,
};

/// Where and how to run; neither field affects the results.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    /// Worker threads; `0` uses all available cores.
    pub workers: usize,
}

impl RunContext {
    pub fn new(out: impl Into<PathBuf>, workers: usize) -> Self {
        RunContext {
            out: out.into(),
            workers,
        }
    }

    fn prepare(&self, cfg: &RunConfig) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        write_json(&self.out.join("config.json"), cfg)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(BufWriter::new(File::create(path)?))
    }
}

fn provenance(command: &str, cfg: &RunConfig) -> Result<Vec<String>> {
    Ok(vec![
        format!("command={command}"),
        format!("config={}", serde_json::to_string(cfg)?),
    ])
}

// ---------------------------------------------------------------------------
// rates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    #[serde(with = "crate::model::beta_serde")]
    pub beta_hw: f64,
    /// Rates in units of `ω_Q/Q`.
    pub gamma_down: f64,
    pub gamma_up: f64,
    pub gamma_sigma: f64,
    pub delta_gamma: f64,
    /// `|Γ↑/Γ↓ − e^{−βħω_Q}|`.
    pub detailed_balance_residual: f64,
    /// Rates in units of `ω_Q`.
    pub gamma_down_per_omega: f64,
    pub gamma_up_per_omega: f64,
    /// `Γ↓/Γ_Σ`.
    pub stationary_prob_g: f64,
}

pub fn run_rates(cfg: &RunConfig) -> Result<RatesReport> {
    let cfg = cfg.resolved()?;
    let q = cfg.qubit_params();
    let r = compute_rates(&q)?;
    Ok(RatesReport {
        beta_hw: q.beta_hw,
        gamma_down: r.gamma_down,
        gamma_up: r.gamma_up,
        gamma_sigma: r.gamma_sigma,
        delta_gamma: r.delta_gamma,
        detailed_balance_residual: (r.gamma_up / r.gamma_down - (-q.beta_hw).exp()).abs(),
        gamma_down_per_omega: r.gamma_down / q.quality_factor,
        gamma_up_per_omega: r.gamma_up / q.quality_factor,
        stationary_prob_g: r.stationary_ground(),
    })
}

/// Writes `config.json` and `rates.json`.
pub fn cmd_rates(cfg: &RunConfig, ctx: &RunContext) -> Result<RatesReport> {
    let report = run_rates(cfg)?;
    ctx.prepare(&cfg.resolved()?)?;
    write_json(&ctx.out.join("rates.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// ensemble

/// Jump-free fraction against the survival probability at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCheckpoint {
    pub t: f64,
    pub analytic: f64,
    pub empirical: f64,
    /// Binomial standard error `√(P(1−P)/N)`.
    pub se: f64,
    pub z: f64,
}

/// Number of equally spaced survival checkpoints in `(0, t_max]`.
pub const SURVIVAL_CHECKPOINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub comparison: MeComparison,
    pub survival: Vec<SurvivalCheckpoint>,
    pub max_abs_survival_z: f64,
    pub total_jumps: u64,
    pub trajectories_without_jump: u64,
}

#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub records: Vec<TrajectoryRecord>,
    pub stats: EnsembleStats,
    pub report: EnsembleReport,
    /// Per-bin jump-free fraction at the bin centers.
    pub no_jump_empirical: Vec<f64>,
}

struct EnsembleChunk {
    acc: EnsembleAccumulator,
    records: Vec<TrajectoryRecord>,
}

pub fn run_ensemble(cfg: &RunConfig, workers: usize) -> Result<EnsembleOutput> {
    let cfg = cfg.resolved()?;
    let params = cfg.qubit_params();
    let initial = cfg.initial_state()?;
    let grid = cfg.grid()?;
    let sim = cfg.simulator(cfg.t_max)?;
    let chunks = map_chunks(cfg.n, workers, |range| {
        let mut acc = EnsembleAccumulator::new(params, initial, grid);
        let mut records = Vec::with_capacity((range.end - range.start) as usize);
        for i in range {
            let record = at_index(i, sim.run(cfg.seed, i))?;
            at_index(i, acc.push(&record))?;
            records.push(record);
        }
        Ok(EnsembleChunk { acc, records })
    })?;
    let mut acc = EnsembleAccumulator::new(params, initial, grid);
    let mut records = Vec::with_capacity(cfg.n as usize);
    for chunk in chunks {
        acc.merge(&chunk.acc)?;
        records.extend(chunk.records);
    }
    let stats = acc.finish()?;
    let comparison = compare_to_me(&stats)?;

    let rates = *sim.rates();
    let mut first_jumps: Vec<f64> = records
        .iter()
        .map(|r| r.first_event().map_or(f64::INFINITY, |e| e.time))
        .collect();
    first_jumps.sort_by(f64::total_cmp);
    let surviving = |t: f64| (first_jumps.len() - first_jumps.partition_point(|&x| x <= t)) as f64;
    let n = records.len() as f64;
    let no_jump_empirical = stats.t.iter().map(|&t| surviving(t) / n).collect();
    let survival: Vec<SurvivalCheckpoint> = (1..=SURVIVAL_CHECKPOINTS)
        .map(|k| {
            let t = cfg.t_max * k as f64 / SURVIVAL_CHECKPOINTS as f64;
            let analytic = survival_probability(&initial, &rates, t);
            let empirical = surviving(t) / n;
            let se = (analytic * (1.0 - analytic) / n).sqrt();
            let z = if se > 0.0 {
                (empirical - analytic) / se
            } else if empirical == analytic {
                0.0
            } else {
                f64::INFINITY
            };
            SurvivalCheckpoint {
                t,
                analytic,
                empirical,
                se,
                z,
            }
        })
        .collect();
    let report = EnsembleReport {
        max_abs_survival_z: survival.iter().map(|c| c.z.abs()).fold(0.0, f64::max),
        survival,
        total_jumps: records.iter().map(|r| r.events.len() as u64).sum(),
        trajectories_without_jump: records.iter().filter(|r| r.events.is_empty()).count() as u64,
        comparison,
    };
    Ok(EnsembleOutput {
        records,
        stats,
        report,
        no_jump_empirical,
    })
}

/// Writes `config.json`, `events.csv`, `ensemble.csv`, `no_jump.csv`,
/// `me_report.json` and, if requested, `samples/trajectory_NNNNN.csv`.
pub fn cmd_ensemble(cfg: &RunConfig, ctx: &RunContext) -> Result<EnsembleOutput> {
    let output = run_ensemble(cfg, ctx.workers)?;
    let cfg = cfg.resolved()?;
    ctx.prepare(&cfg)?;
    let header = provenance("ensemble", &cfg)?;

    let mut w = ctx.create("events.csv")?;
    write_provenance(&mut w, &header)?;
    writeln!(w, "trajectory,time,direction")?;
    for r in &output.records {
        for e in &r.events {
            writeln!(w, "{},{},{}", r.stream, fmt_f64(e.time), e.direction.as_str())?;
        }
    }
    w.flush()?;

    let mut w = ctx.create("ensemble.csv")?;
    output.stats.write_csv(&mut w, &header)?;
    w.flush()?;

    let rates = compute_rates(&cfg.qubit_params())?;
    let initial = cfg.initial_state()?;
    let mut w = ctx.create("no_jump.csv")?;
    write_provenance(&mut w, &header)?;
    writeln!(w, "t,prob_e_no_jump,p_no_jump,p_no_jump_empirical")?;
    for (&t, &emp) in output.stats.t.iter().zip(&output.no_jump_empirical) {
        write_row(
            &mut w,
            &[
                t,
                no_jump_evolve(&initial, &rates, t).prob_e(),
                survival_probability(&initial, &rates, t),
                emp,
            ],
        )?;
    }
    w.flush()?;

    let times = output.stats.t.clone();
    for r in output.records.iter().take(cfg.save_samples) {
        let mut w = ctx.create(&format!("samples/trajectory_{:05}.csv", r.stream))?;
        r.write_samples(&mut w, &times)?;
        w.flush()?;
    }

    write_json(&ctx.out.join("me_report.json"), &output.report)?;
    Ok(output)
}

// ---------------------------------------------------------------------------
// guardian

/// How runs without any jump inside the window enter the energy moments.
pub const SILENT_RUN_CONVENTION: &str = "runs without a jump inside the window are counted as \
click-down equivalents (qubit ends in |g>, detector never fires); click-up = detector absorbs \
(qubit -> |g>), click-down = detector emits (qubit -> |e>)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardianReport {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "N_g")]
    pub n_g: u64,
    #[serde(rename = "N_e")]
    pub n_e: u64,
    pub n_silent: u64,
    pub p_hat: f64,
    pub p_analytic: f64,
    /// `√(p(1−p)/N)` with the analytic `p`.
    pub p_se: f64,
    pub quadrature: GuardianProbability,
    #[serde(rename = "mean_E")]
    pub mean_e: f64,
    #[serde(rename = "var_E")]
    pub var_e: f64,
    #[serde(rename = "mean_E_analytic")]
    pub mean_e_analytic: f64,
    #[serde(rename = "var_E_analytic")]
    pub var_e_analytic: f64,
    pub empirical: EnergyMoments,
    pub analytic: EnergyMoments,
    /// Window `[0, horizon]` searched for the first click.
    pub horizon: f64,
    pub first_click_time_histogram: Histogram,
    pub convention: String,
}

#[derive(Debug, Clone)]
pub struct GuardianOutput {
    pub tally: ClickTally,
    /// First event of each preparation, `None` for silent runs.
    pub first_events: Vec<Option<JumpEvent>>,
    pub report: GuardianReport,
}

/// Window long enough that a run without a jump is practically impossible
/// except at zero temperature from a partly-ground state.
pub fn guardian_horizon(rates: &Rates, t_max: f64) -> f64 {
    let natural = if rates.gamma_up == 0.0 {
        20.0 / rates.gamma_down
    } else {
        40.0 / rates.slowest()
    };
    natural.max(t_max)
}

pub fn run_guardian(cfg: &RunConfig, workers: usize) -> Result<GuardianOutput> {
    let cfg = cfg.resolved()?;
    let rates = compute_rates(&cfg.qubit_params())?;
    let initial = cfg.initial_state()?;
    let horizon = guardian_horizon(&rates, cfg.t_max);
    let sim = cfg.simulator(horizon)?.with_max_events(1);
    let chunks = map_chunks(cfg.n, workers, |range| {
        let mut tally = ClickTally::default();
        let mut firsts = Vec::with_capacity((range.end - range.start) as usize);
        for i in range {
            let record = at_index(i, sim.run(cfg.seed, i))?;
            tally.push(&record);
            firsts.push(record.first_event().copied());
        }
        Ok((tally, firsts))
    })?;
    let mut tally = ClickTally::default();
    let mut first_events = Vec::with_capacity(cfg.n as usize);
    for (t, f) in chunks {
        tally.merge(&t);
        first_events.extend(f);
    }
    let quadrature = guardian_click_probability(&initial, &rates)?;
    let empirical = energy_moments_empirical(&tally, cfg.e_q_kelvin)?;
    let analytic = energy_moments_analytic(&initial, cfg.e_q_kelvin);
    let p = initial.prob_e();
    let report = GuardianReport {
        n: tally.n,
        n_g: tally.n_g,
        n_e: tally.n_e,
        n_silent: tally.n_silent,
        p_hat: tally.p_hat(),
        p_analytic: p,
        p_se: (p * (1.0 - p) / tally.n as f64).sqrt(),
        quadrature,
        mean_e: empirical.mean,
        var_e: empirical.variance,
        mean_e_analytic: analytic.mean,
        var_e_analytic: analytic.variance,
        empirical,
        analytic,
        horizon,
        first_click_time_histogram: Histogram::of(&tally.first_click_times, 50),
        convention: SILENT_RUN_CONVENTION.to_string(),
    };
    Ok(GuardianOutput {
        tally,
        first_events,
        report,
    })
}

/// Writes `config.json`, `clicks.csv` and `guardian.json`.
pub fn cmd_guardian(cfg: &RunConfig, ctx: &RunContext) -> Result<GuardianOutput> {
    let output = run_guardian(cfg, ctx.workers)?;
    let cfg = cfg.resolved()?;
    ctx.prepare(&cfg)?;
    let mut w = ctx.create("clicks.csv")?;
    write_provenance(&mut w, &provenance("guardian", &cfg)?)?;
    writeln!(w, "trajectory,first_click_time,click")?;
    for (i, e) in output.first_events.iter().enumerate() {
        match e {
            Some(e) => {
                let click = match e.direction {
                    Direction::Down => "up",
                    Direction::Up => "down",
                };
                writeln!(w, "{i},{},{click}", fmt_f64(e.time))?;
            }
            None => writeln!(w, "{i},,none")?,
        }
    }
    w.flush()?;
    write_json(&ctx.out.join("guardian.json"), &output.report)?;
    Ok(output)
}

// ---------------------------------------------------------------------------
// calorimeter

/// Thermometer-tracking figures for one `τ/τ_th`, worst case over the traces
/// that contain a photon absorption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermometerSummary {
    pub tau_ratio: f64,
    /// Grid points excluded after each injection, `⌈5τ_th/Δu⌉` (at least 1).
    pub settle_steps: usize,
    /// `max |θ − δT|` outside the settling windows over the trace range.
    pub max_deviation_over_range: f64,
    /// Same without settling windows.
    pub max_deviation_over_range_unsettled: f64,
    /// `(max θ − min θ)` over the photon step.
    pub max_excursion_over_step: f64,
    pub traces_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalorimeterReport {
    pub snr: SnrSummary,
    pub thermometers: Vec<ThermometerSummary>,
    pub window_u: f64,
    pub temperature_feedback: bool,
}

#[derive(Debug, Clone)]
pub struct CalorimeterOutput {
    pub traces: Vec<TemperatureTrace>,
    pub report: CalorimeterReport,
}

/// Settling window after an injection for a thermometer of ratio `τ/τ_th`.
pub fn settle_steps(tau_ratio: f64, du: f64) -> usize {
    ((5.0 / (tau_ratio * du)).ceil() as usize).max(1)
}

pub fn thermometer_summaries(traces: &[TemperatureTrace], ratios: &[f64], du: f64) -> Vec<ThermometerSummary> {
    let with_photon: Vec<&TemperatureTrace> = traces
        .iter()
        .filter(|t| t.events.iter().any(|e| e.sign > 0.0))
        .collect();
    ratios
        .iter()
        .enumerate()
        .map(|(k, &ratio)| {
            let settle = settle_steps(ratio, du);
            let mut s = ThermometerSummary {
                tau_ratio: ratio,
                settle_steps: settle,
                max_deviation_over_range: 0.0,
                max_deviation_over_range_unsettled: 0.0,
                max_excursion_over_step: 0.0,
                traces_evaluated: with_photon.len(),
            };
            for t in &with_photon {
                let range = t.dynamic_range();
                s.max_deviation_over_range =
                    s.max_deviation_over_range.max(t.theta_max_deviation(k, settle) / range);
                s.max_deviation_over_range_unsettled =
                    s.max_deviation_over_range_unsettled.max(t.theta_max_deviation(k, 0) / range);
                s.max_excursion_over_step =
                    s.max_excursion_over_step.max(t.theta_excursion(k) / t.photon_step);
            }
            s
        })
        .collect()
}

/// Loads an event table; trajectories absent from the file have no events.
pub fn load_events(path: &Path) -> Result<HashMap<u64, Vec<JumpEvent>>> {
    let file = File::open(path)?;
    Ok(read_event_table(BufReader::new(file))?.into_iter().collect())
}

pub fn run_calorimeter(
    cfg: &RunConfig,
    workers: usize,
    events: Option<&HashMap<u64, Vec<JumpEvent>>>,
) -> Result<CalorimeterOutput> {
    let cfg = cfg.resolved()?;
    let qubit = cfg.qubit_params();
    let cal = cfg.calorimeter_params();
    let initial = cfg.initial_state()?;
    let window = cal.grid_steps() as f64 * cal.du;
    let sim = cfg.simulator(qubit.u_to_qubit_time(window))?;
    let none = Vec::new();
    let chunks = map_chunks(cfg.n, workers, |range| {
        let mut traces = Vec::with_capacity((range.end - range.start) as usize);
        for i in range {
            let trace = if cfg.temperature_feedback {
                at_index(i, simulate_coupled_detection(&qubit, initial, &cal, cfg.seed, i))?.1
            } else {
                let generated;
                let jumps = match events {
                    Some(table) => table.get(&i).unwrap_or(&none),
                    None => {
                        generated = at_index(i, sim.run(cfg.seed, i))?;
                        &generated.events
                    }
                };
                at_index(i, simulate_detection(jumps, &qubit, &cal, cfg.seed, i))?
            };
            traces.push(trace);
        }
        Ok(traces)
    })?;
    let traces: Vec<TemperatureTrace> = chunks.into_iter().flatten().collect();
    let report = CalorimeterReport {
        snr: snr_summary(&traces, &cal),
        thermometers: thermometer_summaries(&traces, &cal.tau_ratios, cal.du),
        window_u: window,
        temperature_feedback: cfg.temperature_feedback,
    };
    Ok(CalorimeterOutput { traces, report })
}

/// Writes `config.json`, `snr.json` and, for the leading `max_trace_files`
/// traces, `traces/trace_NNNNN.csv` with its `_events.csv` sidecar.
pub fn cmd_calorimeter(
    cfg: &RunConfig,
    ctx: &RunContext,
    events: Option<&HashMap<u64, Vec<JumpEvent>>>,
) -> Result<CalorimeterOutput> {
    let output = run_calorimeter(cfg, ctx.workers, events)?;
    let cfg = cfg.resolved()?;
    ctx.prepare(&cfg)?;
    let mut header = provenance("calorimeter", &cfg)?;
    header.push("time unit: tau (absorber relaxation time); temperatures in kelvin".to_string());
    for (i, trace) in output.traces.iter().enumerate().take(cfg.max_trace_files) {
        let mut lines = header.clone();
        lines.push(format!("trace={i}"));
        let mut w = ctx.create(&format!("traces/trace_{i:05}.csv"))?;
        trace.write_csv(&mut w, &lines)?;
        w.flush()?;
        let mut w = ctx.create(&format!("traces/trace_{i:05}_events.csv"))?;
        trace.write_events_csv(&mut w, &lines)?;
        w.flush()?;
    }
    write_json(&ctx.out.join("snr.json"), &output.report)?;
    Ok(output)
}
