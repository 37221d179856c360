//! Run configuration: a single JSON document, overridable from the command
//! line, validated against every module's invariants before any work starts.
//!
//! The output directory and the worker count are deliberately not part of the
//! echoed configuration: neither may influence the results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calorimeter::CalorimeterParams;
use crate::ensemble::{TimeGrid, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::model::{beta_serde, compute_rates, QubitBathParams, ZERO_TEMPERATURE};
use crate::trajectory::{default_dt, PureState, Scheme, TrajectorySimulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `βħω_Q`; `"inf"` for zero temperature.
    #[serde(with = "beta_serde")]
    pub beta_hw: f64,
    pub quality_factor: f64,
    pub e_q_kelvin: f64,
    pub gamma_down_tau: f64,

    pub c_over_kb: f64,
    pub t0_kelvin: f64,
    pub du: f64,
    pub tau_ratios: Vec<f64>,
    /// Calorimeter window in units of `τ`.
    pub u_max: f64,

    /// Initial excited population `|b(0)|²`.
    pub prob_e: f64,
    /// Relative phase of `b(0)` with respect to `a(0)`.
    pub phase: f64,

    /// Ensemble size.
    pub n: u64,
    /// Trajectory window in units of `1/Γ↓(T=0)`.
    pub t_max: f64,
    pub scheme: Scheme,
    /// Fixed step; defaults to `0.01/Γ_Σ`.
    pub dt: Option<f64>,
    pub bins: usize,
    pub seed: u64,

    /// Equilibrium heat-current noise in the calorimeter.
    pub noise: bool,
    /// Recompute qubit rates from the instantaneous absorber temperature.
    pub temperature_feedback: bool,
    /// Number of leading trajectories whose sample series are written.
    pub save_samples: usize,
    /// Number of leading detection traces written to disk.
    pub max_trace_files: usize,

    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let qubit = QubitBathParams::default();
        let cal = CalorimeterParams::default();
        RunConfig {
            beta_hw: ZERO_TEMPERATURE,
            quality_factor: qubit.quality_factor,
            e_q_kelvin: qubit.e_q_kelvin,
            gamma_down_tau: qubit.gamma_down_tau,
            c_over_kb: cal.c_over_kb,
            t0_kelvin: cal.t0_kelvin,
            du: cal.du,
            tau_ratios: cal.tau_ratios,
            u_max: cal.u_max,
            prob_e: 0.9,
            phase: 0.0,
            n: 100,
            t_max: 5.0,
            scheme: Scheme::FixedStep,
            dt: None,
            bins: DEFAULT_BINS,
            seed: 1,
            noise: true,
            temperature_feedback: false,
            save_samples: 0,
            max_trace_files: 100,
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub out: Option<PathBuf>,
    pub scheme: Option<Scheme>,
    pub no_noise: bool,
    pub tau_ratios: Option<Vec<f64>>,
    pub beta_hw: Option<f64>,
    pub prob_e: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.n {
            self.n = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.scheme {
            self.scheme = v;
        }
        if o.no_noise {
            self.noise = false;
        }
        if let Some(v) = &o.tau_ratios {
            self.tau_ratios = v.clone();
        }
        if let Some(v) = o.beta_hw {
            self.beta_hw = v;
        }
        if let Some(v) = o.prob_e {
            self.prob_e = v;
        }
        if let Some(v) = o.t_max {
            self.t_max = v;
        }
        if let Some(v) = o.dt {
            self.dt = Some(v);
        }
    }

    pub fn qubit_params(&self) -> QubitBathParams {
        QubitBathParams {
            beta_hw: self.beta_hw,
            quality_factor: self.quality_factor,
            e_q_kelvin: self.e_q_kelvin,
            gamma_down_tau: self.gamma_down_tau,
        }
    }

    pub fn calorimeter_params(&self) -> CalorimeterParams {
        CalorimeterParams {
            c_over_kb: self.c_over_kb,
            t0_kelvin: self.t0_kelvin,
            du: self.du,
            tau_ratios: self.tau_ratios.clone(),
            e_q_kelvin: self.e_q_kelvin,
            u_max: self.u_max,
            noise: self.noise,
        }
    }

    pub fn initial_state(&self) -> Result<PureState> {
        PureState::from_excited_population(self.prob_e, self.phase)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_max, self.bins)
    }

    /// Trajectory sampler over `[0, t_max]` with the configured scheme.
    pub fn simulator(&self, t_max: f64) -> Result<TrajectorySimulator> {
        TrajectorySimulator::new(&self.qubit_params(), self.initial_state()?, t_max)?
            .with_scheme(self.scheme, self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        self.qubit_params().validate()?;
        self.calorimeter_params().validate()?;
        self.initial_state()?;
        if self.n == 0 {
            return Err(Error::invalid("n", "must be >= 1"));
        }
        self.grid()?;
        self.simulator(self.t_max)?;
        if self.tau_ratios.is_empty() {
            return Err(Error::invalid("tau_ratios", "at least one thermometer is required"));
        }
        Ok(())
    }

    /// Validated copy with every default made explicit.
    pub fn resolved(&self) -> Result<RunConfig> {
        self.validate()?;
        let mut resolved = self.clone();
        resolved.dt = match self.scheme {
            Scheme::FixedStep => Some(
                self.dt
                    .unwrap_or_else(|| default_dt(&compute_rates(&self.qubit_params()).unwrap())),
            ),
            Scheme::WaitingTime => None,
        };
        Ok(resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig {
            beta_hw: 0.5,
            prob_e: 0.7,
            ..RunConfig::default()
        }
        .resolved()
        .unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(!text.contains("\"out\""));
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.dt, Some(default_dt(&crate::model::Rates::from_beta_hw(0.5).unwrap())));
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::from_json(r#"{"beta_hw": "inf", "n": 7}"#).unwrap();
        assert_eq!(cfg.n, 7);
        assert!(cfg.beta_hw.is_infinite());
        assert_eq!(cfg.tau_ratios, RunConfig::default().tau_ratios);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"n_trajectories": 7}"#).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let cases = [
            (RunConfig { n: 0, ..RunConfig::default() }, "n"),
            (RunConfig { prob_e: 1.5, ..RunConfig::default() }, "prob_e"),
            (RunConfig { beta_hw: -1.0, ..RunConfig::default() }, "beta_hw"),
            (RunConfig { du: 0.2, ..RunConfig::default() }, "du"),
            (RunConfig { dt: Some(1.0), ..RunConfig::default() }, "dt"),
            (RunConfig { tau_ratios: vec![300.0], ..RunConfig::default() }, "tau_ratio"),
        ];
        for (cfg, field) in cases {
            match cfg.validate() {
                Err(Error::InvalidParameter { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected failure on {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seed: Some(9),
            no_noise: true,
            scheme: Some(Scheme::WaitingTime),
            tau_ratios: Some(vec![1.0]),
            ..Overrides::default()
        });
        assert_eq!(cfg.seed, 9);
        assert!(!cfg.noise);
        assert_eq!(cfg.scheme, Scheme::WaitingTime);
        assert_eq!(cfg.resolved().unwrap().dt, None);
    }
}
