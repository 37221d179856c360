//! Absorber temperature under equilibrium heat-current noise and photon
//! injections, and its readout through a finite-bandwidth thermometer.
//!
//! Time is `u = t/τ` with `τ = C/G_th`. On a grid of step `Δu` the excess
//! temperature follows
//!
//! ```text
//! δT(u+Δu) = (1−Δu) δT(u) + √(2k_B T₀²/C) ξ √Δu,    ξ ~ N(0, 1)
//! θ(u+Δu)  = θ(u) − (τ/τ_th)(θ(u) − δT(u)) Δu
//! ```
//!
//! and each qubit jump adds `±ħω_Q/C` at the first grid point at or after it.
//! Temperatures are in kelvin.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{positive, QubitBathParams, Rates, ZERO_TEMPERATURE};
use crate::output::{write_provenance, write_row};
use crate::rng::{Namespace, RngStreamSpec, TrajectoryStreams};
use crate::trajectory::{
    Direction, JumpEvent, PureState, Scheme, TrajectoryRecord, MAX_STEP_GAMMA_SIGMA,
};

/// Jump times are matched to grid points with this slack, in units of `Δu`.
const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalorimeterParams {
    /// `C/k_B`.
    pub c_over_kb: f64,
    /// Superbath temperature `T₀`.
    pub t0_kelvin: f64,
    /// Grid step `Δu = Δt/τ`.
    pub du: f64,
    /// `τ/τ_th` of each simulated thermometer.
    pub tau_ratios: Vec<f64>,
    /// Photon energy `ħω_Q/k_B`.
    pub e_q_kelvin: f64,
    /// End of the simulated window in units of `τ`.
    pub u_max: f64,
    /// Equilibrium heat-current noise on or off.
    pub noise: bool,
}

impl Default for CalorimeterParams {
    fn default() -> Self {
        CalorimeterParams {
            c_over_kb: 100.0,
            t0_kelvin: 0.01,
            du: 0.01,
            tau_ratios: vec![100.0, 10.0, 1.0],
            e_q_kelvin: 1.0,
            u_max: 10.0,
            noise: true,
        }
    }
}

impl CalorimeterParams {
    pub fn validate(&self) -> Result<()> {
        positive("c_over_kb", self.c_over_kb)?;
        positive("t0_kelvin", self.t0_kelvin)?;
        positive("u_max", self.u_max)?;
        if !(self.du > 0.0 && self.du <= 0.1) {
            return Err(Error::invalid("du", format!("must satisfy 0 < du <= 0.1, got {}", self.du)));
        }
        if !(self.e_q_kelvin.is_finite() && self.e_q_kelvin >= 0.0) {
            return Err(Error::invalid("e_q_kelvin", "must be finite and >= 0"));
        }
        for &r in &self.tau_ratios {
            Thermometer::new(r, self.du)?;
        }
        if self.u_max / self.du > 1e8 {
            return Err(Error::invalid("u_max", "window holds more than 1e8 grid steps"));
        }
        Ok(())
    }

    /// Per-step noise amplitude `T₀√(2Δu/(C/k_B))`.
    pub fn noise_amplitude(&self) -> f64 {
        self.t0_kelvin * (2.0 * self.du / self.c_over_kb).sqrt()
    }

    /// Temperature step `ħω_Q/C` of one photon.
    pub fn photon_step(&self) -> f64 {
        self.e_q_kelvin / self.c_over_kb
    }

    /// Stationary variance of the discrete recursion,
    /// `σ²/(1−(1−Δu)²) = (k_B T₀²/C)·2/(2−Δu)`.
    pub fn stationary_variance(&self) -> f64 {
        let decay = 1.0 - self.du;
        self.noise_amplitude().powi(2) / (1.0 - decay * decay)
    }

    /// Continuum equilibrium variance `k_B T₀²/C`.
    pub fn continuum_variance(&self) -> f64 {
        self.t0_kelvin * self.t0_kelvin / self.c_over_kb
    }

    /// `(ħω_Q/C)/√(k_B T₀²/C)`.
    pub fn analytic_snr(&self) -> f64 {
        self.photon_step() / self.continuum_variance().sqrt()
    }

    pub fn grid_steps(&self) -> usize {
        (self.u_max / self.du).round() as usize
    }
}

pub fn step_temperature(delta_t: f64, params: &CalorimeterParams, xi: f64) -> f64 {
    (1.0 - params.du) * delta_t + params.noise_amplitude() * xi
}

pub fn inject_photon(delta_t: f64, direction: Direction, params: &CalorimeterParams) -> f64 {
    delta_t + direction.heat_sign() * params.photon_step()
}

/// First-order lag thermometer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thermometer {
    tau_ratio: f64,
    du: f64,
}

impl Thermometer {
    pub fn new(tau_ratio: f64, du: f64) -> Result<Thermometer> {
        positive("tau_ratio", tau_ratio)?;
        if tau_ratio * du >= 2.0 {
            return Err(Error::invalid(
                "tau_ratio",
                format!("tau_ratio * du must be < 2 for a stable update, got {}", tau_ratio * du),
            ));
        }
        Ok(Thermometer { tau_ratio, du })
    }

    pub fn tau_ratio(&self) -> f64 {
        self.tau_ratio
    }

    pub fn step(&self, theta: f64, delta_t: f64) -> f64 {
        thermometer_step(theta, delta_t, self.tau_ratio, self.du)
    }
}

pub fn thermometer_step(theta: f64, delta_t: f64, tau_ratio: f64, du: f64) -> f64 {
    theta - tau_ratio * (theta - delta_t) * du
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectedEvent {
    /// Jump time converted to `u`.
    pub u_jump: f64,
    /// Grid index the injection was applied at.
    pub grid_index: usize,
    /// `u` of that grid point.
    pub u_injected: f64,
    /// `+1` for absorption, `−1` for emission.
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSeries {
    pub tau_ratio: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureTrace {
    pub du: f64,
    pub photon_step: f64,
    pub u: Vec<f64>,
    /// `δT = T − T₀`.
    pub delta_t: Vec<f64>,
    pub thetas: Vec<ThetaSeries>,
    pub events: Vec<InjectedEvent>,
}

impl TemperatureTrace {
    /// Noise-free response to the injected photons alone.
    pub fn photon_response(&self) -> Vec<f64> {
        let mut response = vec![0.0; self.u.len()];
        let mut level = 0.0;
        let mut next = self.events.iter().peekable();
        for (n, slot) in response.iter_mut().enumerate() {
            if n > 0 {
                level *= 1.0 - self.du;
            }
            while let Some(e) = next.next_if(|e| e.grid_index == n) {
                level += e.sign * self.photon_step;
            }
            *slot = level;
        }
        response
    }

    /// `δT` with the photon response removed: the pure noise component.
    pub fn noise_component(&self) -> Vec<f64> {
        self.delta_t
            .iter()
            .zip(self.photon_response())
            .map(|(t, r)| t - r)
            .collect()
    }

    /// Jump of `δT` across the grid point of the first absorption.
    pub fn first_absorption_step(&self) -> Option<f64> {
        let e = self.events.iter().find(|e| e.sign > 0.0 && e.grid_index > 0)?;
        Some(self.delta_t[e.grid_index] - self.delta_t[e.grid_index - 1])
    }

    pub fn dynamic_range(&self) -> f64 {
        let (lo, hi) = min_max(&self.delta_t);
        hi - lo
    }

    /// `max |θ − δT|` for thermometer `k`, skipping `settle` grid points
    /// starting at each injection.
    pub fn theta_max_deviation(&self, k: usize, settle: usize) -> f64 {
        let theta = &self.thetas[k].theta;
        (0..self.u.len())
            .filter(|&n| {
                !self
                    .events
                    .iter()
                    .any(|e| n >= e.grid_index && n < e.grid_index + settle)
            })
            .map(|n| (theta[n] - self.delta_t[n]).abs())
            .fold(0.0, f64::max)
    }

    /// `max θ − min θ` for thermometer `k`.
    pub fn theta_excursion(&self, k: usize) -> f64 {
        let (lo, hi) = min_max(&self.thetas[k].theta);
        hi - lo
    }

    /// CSV `u,delta_T_kelvin,theta_<tau_ratio>...`.
    pub fn write_csv<W: Write>(&self, w: &mut W, provenance: &[String]) -> Result<()> {
        write_provenance(w, provenance)?;
        write!(w, "u,delta_T_kelvin")?;
        for s in &self.thetas {
            write!(w, ",theta_{}", s.tau_ratio)?;
        }
        writeln!(w)?;
        let mut row = Vec::with_capacity(2 + self.thetas.len());
        for n in 0..self.u.len() {
            row.clear();
            row.push(self.u[n]);
            row.push(self.delta_t[n]);
            row.extend(self.thetas.iter().map(|s| s.theta[n]));
            write_row(w, &row)?;
        }
        Ok(())
    }

    /// Sidecar `u_injected,sign`.
    pub fn write_events_csv<W: Write>(&self, w: &mut W, provenance: &[String]) -> Result<()> {
        write_provenance(w, provenance)?;
        writeln!(w, "u_injected,sign")?;
        for e in &self.events {
            write_row(w, &[e.u_injected, e.sign])?;
        }
        Ok(())
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn grid_index_for(u: f64, du: f64) -> usize {
    (u / du - GRID_SLACK).ceil().max(0.0) as usize
}

/// Runs the absorber and thermometers over `[0, u_max]` driven by the given
/// qubit jumps. The trace starts from a draw of the stationary distribution
/// (or from zero with noise off) and every thermometer starts at `δT(0)`.
pub fn simulate_detection(
    events: &[JumpEvent],
    qubit: &QubitBathParams,
    params: &CalorimeterParams,
    seed: u64,
    index: u64,
) -> Result<TemperatureTrace> {
    params.validate()?;
    let steps = params.grid_steps();
    let u_max = steps as f64 * params.du;
    let mut injections = Vec::with_capacity(events.len());
    for e in events {
        let u = qubit.qubit_time_to_u(e.time);
        let n = grid_index_for(u, params.du);
        if u.is_nan() || u < 0.0 || n > steps {
            return Err(Error::EventOutsideWindow { u, u_max });
        }
        injections.push(InjectedEvent {
            u_jump: u,
            grid_index: n,
            u_injected: n as f64 * params.du,
            sign: e.direction.heat_sign(),
        });
    }
    let directions: Vec<Direction> = events.iter().map(|e| e.direction).collect();
    let mut integrator = TraceIntegrator::new(params, seed, index)?;
    let mut pending = injections.iter().zip(&directions).peekable();
    for n in 0..=steps {
        while let Some((_, dir)) = pending.next_if(|(e, _)| e.grid_index == n) {
            integrator.inject(*dir);
        }
        integrator.record();
        if n < steps {
            integrator.advance();
        }
    }
    Ok(integrator.finish(injections))
}

/// Grid-by-grid state of one detection trace.
struct TraceIntegrator<'a> {
    params: &'a CalorimeterParams,
    thermometers: Vec<Thermometer>,
    noise: Option<crate::rng::StreamRng>,
    delta_t: f64,
    theta: Vec<f64>,
    trace: TemperatureTrace,
}

impl<'a> TraceIntegrator<'a> {
    fn new(params: &'a CalorimeterParams, seed: u64, index: u64) -> Result<Self> {
        let thermometers = params
            .tau_ratios
            .iter()
            .map(|&r| Thermometer::new(r, params.du))
            .collect::<Result<Vec<_>>>()?;
        let mut noise = if params.noise {
            Some(RngStreamSpec::new(seed, Namespace::CalorimeterNoise, index)?.rng())
        } else {
            None
        };
        let delta_t = match noise.as_mut() {
            Some(rng) => {
                let xi: f64 = rng.sample(StandardNormal);
                params.stationary_variance().sqrt() * xi
            }
            None => 0.0,
        };
        let capacity = params.grid_steps() + 1;
        Ok(TraceIntegrator {
            params,
            theta: vec![delta_t; thermometers.len()],
            trace: TemperatureTrace {
                du: params.du,
                photon_step: params.photon_step(),
                u: Vec::with_capacity(capacity),
                delta_t: Vec::with_capacity(capacity),
                thetas: thermometers
                    .iter()
                    .map(|t| ThetaSeries {
                        tau_ratio: t.tau_ratio(),
                        theta: Vec::with_capacity(capacity),
                    })
                    .collect(),
                events: Vec::new(),
            },
            thermometers,
            noise,
            delta_t,
        })
    }

    fn inject(&mut self, direction: Direction) {
        self.delta_t = inject_photon(self.delta_t, direction, self.params);
    }

    fn record(&mut self) {
        let n = self.trace.u.len();
        self.trace.u.push(n as f64 * self.params.du);
        self.trace.delta_t.push(self.delta_t);
        for (series, &theta) in self.trace.thetas.iter_mut().zip(&self.theta) {
            series.theta.push(theta);
        }
    }

    fn advance(&mut self) {
        for (theta, thermometer) in self.theta.iter_mut().zip(&self.thermometers) {
            *theta = thermometer.step(*theta, self.delta_t);
        }
        let xi = match self.noise.as_mut() {
            Some(rng) => rng.sample(StandardNormal),
            None => 0.0,
        };
        self.delta_t = step_temperature(self.delta_t, self.params, xi);
    }

    fn finish(mut self, events: Vec<InjectedEvent>) -> TemperatureTrace {
        self.trace.events = events;
        self.trace
    }
}

/// Convenience wrapper taking the events of a record.
pub fn simulate_record_detection(
    record: &TrajectoryRecord,
    params: &CalorimeterParams,
) -> Result<TemperatureTrace> {
    simulate_detection(&record.events, &record.params, params, record.seed, record.stream)
}

/// Optional extension: the qubit rates follow the instantaneous absorber
/// temperature `T₀ + δT` instead of `T₀`.
///
/// The qubit is advanced with the fixed-step scheme inside each calorimeter
/// step, using enough sub-steps to keep `dt ≤ 0.01/Γ_Σ(T)`. The returned
/// record carries the `T₀` rates of `qubit`, so states reconstructed from it
/// ignore the feedback; its events are exact.
pub fn simulate_coupled_detection(
    qubit: &QubitBathParams,
    initial: PureState,
    params: &CalorimeterParams,
    seed: u64,
    index: u64,
) -> Result<(TrajectoryRecord, TemperatureTrace)> {
    params.validate()?;
    qubit.validate()?;
    let initial = PureState::new(initial.a, initial.b)?;
    let steps = params.grid_steps();
    let span = qubit.u_to_qubit_time(params.du);
    let mut streams = TrajectoryStreams::new(seed, index)?;
    let mut integrator = TraceIntegrator::new(params, seed, index)?;
    let mut state = initial;
    let mut events = Vec::new();
    let mut injections = Vec::new();
    let mut due: Vec<Direction> = Vec::new();
    for n in 0..=steps {
        for dir in due.drain(..) {
            integrator.inject(dir);
        }
        integrator.record();
        if n == steps {
            break;
        }
        let temperature = params.t0_kelvin + integrator.delta_t;
        let beta = if temperature > 0.0 {
            params.e_q_kelvin / temperature
        } else {
            ZERO_TEMPERATURE
        };
        let rates = Rates::from_beta_hw(beta)?;
        let sub = (span * rates.gamma_sigma / MAX_STEP_GAMMA_SIGMA).ceil().max(1.0) as usize;
        let h = span / sub as f64;
        let t_start = qubit.u_to_qubit_time(n as f64 * params.du);
        for k in 0..sub {
            let dp_down = rates.gamma_down * state.prob_e() * h;
            let dp_up = rates.gamma_up * state.prob_g() * h;
            let dp = dp_down + dp_up;
            let u: f64 = streams.jumps.random();
            if u < dp {
                let v: f64 = streams.direction.random();
                let direction = if v * dp < dp_down {
                    Direction::Down
                } else {
                    Direction::Up
                };
                let time = t_start + (k as f64 + u / dp) * h;
                events.push(JumpEvent { time, direction });
                injections.push(InjectedEvent {
                    u_jump: qubit.qubit_time_to_u(time),
                    grid_index: n + 1,
                    u_injected: (n + 1) as f64 * params.du,
                    sign: direction.heat_sign(),
                });
                due.push(direction);
                state = direction.target();
            } else {
                state = crate::trajectory::no_jump_evolve(&state, &rates, h);
            }
        }
        integrator.advance();
    }
    let base_rates = Rates::from_beta_hw(qubit.beta_hw)?;
    let record = TrajectoryRecord {
        params: *qubit,
        rates: base_rates,
        initial,
        seed,
        stream: index,
        scheme: Scheme::FixedStep,
        dt: None,
        t_max: qubit.u_to_qubit_time(steps as f64 * params.du),
        events,
        complete: true,
    };
    Ok((record, integrator.finish(injections)))
}

/// Signal-to-noise summary over a set of traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrSummary {
    pub analytic_snr: f64,
    pub photon_step_kelvin: f64,
    /// `√(k_B T₀²/C)`.
    pub continuum_noise_rms_kelvin: f64,
    /// Square root of the stationary variance of the discrete recursion.
    pub stationary_noise_rms_kelvin: f64,
    /// RMS of the noise component pooled over all traces.
    pub pooled_noise_rms_kelvin: f64,
    /// Measured first-absorption step over the pooled noise RMS, per trace;
    /// `None` for traces without an absorption.
    pub per_trace_snr: Vec<Option<f64>>,
    pub traces_with_absorption: usize,
    pub mean_snr: Option<f64>,
}

pub fn snr_summary(traces: &[TemperatureTrace], params: &CalorimeterParams) -> SnrSummary {
    let (mut sum, mut sumsq, mut count) = (0.0, 0.0, 0usize);
    for trace in traces {
        for v in trace.noise_component() {
            sum += v;
            sumsq += v * v;
            count += 1;
        }
    }
    let pooled = if count > 1 {
        let mean = sum / count as f64;
        ((sumsq / count as f64) - mean * mean).max(0.0).sqrt()
    } else {
        0.0
    };
    let per_trace_snr: Vec<Option<f64>> = traces
        .iter()
        .map(|t| {
            t.first_absorption_step()
                .filter(|_| pooled > 0.0)
                .map(|step| step / pooled)
        })
        .collect();
    let measured: Vec<f64> = per_trace_snr.iter().flatten().copied().collect();
    SnrSummary {
        analytic_snr: params.analytic_snr(),
        photon_step_kelvin: params.photon_step(),
        continuum_noise_rms_kelvin: params.continuum_variance().sqrt(),
        stationary_noise_rms_kelvin: params.stationary_variance().sqrt(),
        pooled_noise_rms_kelvin: pooled,
        traces_with_absorption: measured.len(),
        mean_snr: (!measured.is_empty()).then(|| measured.iter().sum::<f64>() / measured.len() as f64),
        per_trace_snr,
    }
}
