//! Quantum-jump trajectories of the qubit.
//!
//! Between jumps the state follows the renormalized non-Hermitian evolution,
//! which only reweights the magnitudes of the two amplitudes:
//! `|a(t)|² = |a(0)|² e^{−Γ↑t}/P(t)` and `|b(t)|² = |b(0)|² e^{−Γ↓t}/P(t)`
//! with the survival probability `P(t) = |a(0)|² e^{−Γ↑t} + |b(0)|² e^{−Γ↓t}`.
//! A jump projects onto `|g⟩` (down) or `|e⟩` (up). The global dynamical
//! phase is not tracked; the relative phase of `a` and `b` is preserved.
//!
//! Two samplers are provided. The fixed-step scheme draws one uniform per
//! step and jumps when it falls below `dp = (Γ↓|b|² + Γ↑|a|²)dt`; the same
//! draw locates the jump inside the step. The waiting-time scheme inverts `P(t)`
//! directly. Both draw the jump direction from a separate stream, and only
//! when a jump happens.

use std::io::{self, BufRead, Write};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compute_rates, DensityMatrix, QubitBathParams, Rates};
use crate::output::{fmt_f64, write_provenance, write_row};
use crate::rng::TrajectoryStreams;

/// Tolerance on `|a|² + |b|²` accepted by [`PureState::new`].
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Largest allowed fixed step, in units of `1/Γ_Σ`.
pub const MAX_STEP_GAMMA_SIGMA: f64 = 0.01;

/// Target precision of the waiting-time root, in units of `1/Γ_Σ`.
const ROOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    /// Amplitude on `|g⟩`.
    pub a: Complex64,
    /// Amplitude on `|e⟩`.
    pub b: Complex64,
}

impl PureState {
    pub fn new(a: Complex64, b: Complex64) -> Result<PureState> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(
                "state",
                format!("|a|^2 + |b|^2 must be 1, got {norm}"),
            ));
        }
        Ok(PureState { a, b })
    }

    pub fn ground() -> PureState {
        PureState {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    pub fn excited() -> PureState {
        PureState {
            a: Complex64::new(0.0, 0.0),
            b: Complex64::new(1.0, 0.0),
        }
    }

    /// `√(1−p)|g⟩ + e^{iφ}√p|e⟩`.
    pub fn from_excited_population(prob_e: f64, phase: f64) -> Result<PureState> {
        if !(0.0..=1.0).contains(&prob_e) {
            return Err(Error::invalid("prob_e", format!("must lie in [0, 1], got {prob_e}")));
        }
        if !phase.is_finite() {
            return Err(Error::invalid("phase", "must be finite"));
        }
        Ok(PureState {
            a: Complex64::new((1.0 - prob_e).sqrt(), 0.0),
            b: Complex64::from_polar(prob_e.sqrt(), phase),
        })
    }

    pub fn prob_g(&self) -> f64 {
        self.a.norm_sqr()
    }

    pub fn prob_e(&self) -> f64 {
        self.b.norm_sqr()
    }

    /// `a·b̄`, the `ge` element of `|ψ⟩⟨ψ|`.
    pub fn coherence(&self) -> Complex64 {
        self.a * self.b.conj()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            rho_gg: self.prob_g(),
            rho_ge: self.coherence(),
        }
    }

    fn is_eigenstate(&self) -> bool {
        self.a.norm_sqr() == 0.0 || self.b.norm_sqr() == 0.0
    }

    /// Scales `b` by `factor` relative to `a` and renormalizes.
    fn reweight(&self, factor: f64) -> PureState {
        if self.is_eigenstate() {
            return *self;
        }
        let b = self.b * factor;
        let norm = (self.a.norm_sqr() + b.norm_sqr()).sqrt();
        PureState {
            a: self.a / norm,
            b: b / norm,
        }
    }
}

/// Renormalized no-jump evolution over a time `t`.
pub fn no_jump_evolve(state: &PureState, rates: &Rates, t: f64) -> PureState {
    // Only the ratio e^{−ΔΓ t/2} of the two amplitude decays matters.
    state.reweight((-0.5 * rates.delta_gamma * t).exp())
}

/// Probability that no jump occurs during `[0, t]`.
pub fn survival_probability(state: &PureState, rates: &Rates, t: f64) -> f64 {
    state.prob_g() * (-rates.gamma_up * t).exp() + state.prob_e() * (-rates.gamma_down * t).exp()
}

/// `lim_{t→∞} P(t)`: nonzero only at zero temperature, where a ground-state
/// component never jumps.
pub fn survival_at_infinity(state: &PureState, rates: &Rates) -> f64 {
    if rates.gamma_up == 0.0 {
        state.prob_g()
    } else {
        0.0
    }
}

/// Solves `P(s) = u` for the waiting time `s` until the next jump, or returns
/// `None` when `u ≤ P(∞)` and no jump ever happens.
pub fn waiting_time(state: &PureState, rates: &Rates, u: f64) -> Result<Option<f64>> {
    let (pg, pe) = (state.prob_g(), state.prob_e());
    if u <= survival_at_infinity(state, rates) || u <= 0.0 {
        return Ok(None);
    }
    if pe == 0.0 {
        return Ok(Some(-u.ln() / rates.gamma_up));
    }
    if pg == 0.0 {
        return Ok(Some(-u.ln() / rates.gamma_down));
    }
    if rates.gamma_up == 0.0 {
        return Ok(Some(-((u - pg) / pe).ln() / rates.gamma_down));
    }

    // Work with ln P(s) − ln u, which is smooth and strictly decreasing.
    let ln_u = u.ln();
    let g = |s: f64| {
        let x = (-rates.delta_gamma * s).exp();
        let mix = pg + pe * x;
        let value = -rates.gamma_up * s + mix.ln() - ln_u;
        let slope = -(rates.gamma_up * pg + rates.gamma_down * pe * x) / mix;
        (value, slope)
    };
    // e^{−Γ↓s} ≤ P(s) ≤ e^{−Γ↑s} brackets the root.
    let mut lo = -ln_u / rates.gamma_down;
    let mut hi = -ln_u / rates.gamma_up;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (value, slope) = g(s);
        if value == 0.0 {
            return Ok(Some(s));
        }
        if value > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - value / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - s).abs();
        s = next;
        if step * rates.gamma_sigma < ROOT_TOLERANCE || (hi - lo) * rates.gamma_sigma < ROOT_TOLERANCE
        {
            return Ok(Some(s));
        }
    }
    Err(Error::RootFinding(format!(
        "waiting time for u = {u} not bracketed below {}",
        ROOT_TOLERANCE
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Relaxation `|e⟩ → |g⟩`; the bath absorbs a photon.
    Down,
    /// Excitation `|g⟩ → |e⟩`; the bath emits a photon.
    Up,
}

impl Direction {
    pub fn target(self) -> PureState {
        match self {
            Direction::Down => PureState::ground(),
            Direction::Up => PureState::excited(),
        }
    }

    /// `+1` when the absorber gains the photon energy, `−1` when it loses it.
    pub fn heat_sign(self) -> f64 {
        match self {
            Direction::Down => 1.0,
            Direction::Up => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Up => "up",
        }
    }

    pub fn parse(text: &str) -> Result<Direction> {
        match text.trim() {
            "down" => Ok(Direction::Down),
            "up" => Ok(Direction::Up),
            other => Err(Error::Parse(format!("unknown jump direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Scheme {
    #[default]
    #[serde(rename = "fixed")]
    FixedStep,
    #[serde(rename = "waiting")]
    WaitingTime,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::FixedStep => "fixed",
            Scheme::WaitingTime => "waiting",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scheme> {
        match s {
            "fixed" => Ok(Scheme::FixedStep),
            "waiting" => Ok(Scheme::WaitingTime),
            other => Err(Error::invalid("scheme", format!("expected fixed|waiting, got `{other}`"))),
        }
    }
}

/// State of a trajectory at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub prob_g: f64,
    pub prob_e: f64,
    pub coherence: Complex64,
}

/// One stochastic realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub params: QubitBathParams,
    pub rates: Rates,
    pub initial: PureState,
    pub seed: u64,
    pub stream: u64,
    pub scheme: Scheme,
    /// Step size of the fixed-step scheme.
    pub dt: Option<f64>,
    pub t_max: f64,
    pub events: Vec<JumpEvent>,
    /// False when the run stopped at an event limit before `t_max`; the state
    /// after the last event is then unknown.
    pub complete: bool,
}

impl TrajectoryRecord {
    pub fn first_event(&self) -> Option<&JumpEvent> {
        self.events.first()
    }

    /// The state at time `t`, reconstructed from the last event at or before
    /// `t` and the closed-form no-jump evolution since then.
    pub fn state_at(&self, t: f64) -> PureState {
        let idx = self.events.partition_point(|e| e.time <= t);
        match idx {
            0 => no_jump_evolve(&self.initial, &self.rates, t),
            _ => {
                let last = self.events[idx - 1];
                no_jump_evolve(&last.direction.target(), &self.rates, t - last.time)
            }
        }
    }

    pub fn samples(&self, times: &[f64]) -> Result<Vec<Sample>> {
        if !self.complete {
            return Err(Error::invalid("record", "cannot sample a truncated trajectory"));
        }
        Ok(times
            .iter()
            .map(|&t| {
                let s = self.state_at(t);
                Sample {
                    t,
                    prob_g: s.prob_g(),
                    prob_e: s.prob_e(),
                    coherence: s.coherence(),
                }
            })
            .collect())
    }

    pub(crate) fn header_lines(&self) -> Vec<String> {
        let params = serde_json::to_string(&self.params).unwrap_or_default();
        let dt = self.dt.map(fmt_f64).unwrap_or_else(|| "none".to_string());
        vec![
            format!("params={params}"),
            format!(
                "initial prob_e={} coherence_re={} coherence_im={}",
                fmt_f64(self.initial.prob_e()),
                fmt_f64(self.initial.coherence().re),
                fmt_f64(self.initial.coherence().im)
            ),
            format!("scheme={} dt={dt} t_max={}", self.scheme.as_str(), fmt_f64(self.t_max)),
            format!("seed={} stream={}", self.seed, self.stream),
            "time unit: 1/gamma_down(T=0)".to_string(),
        ]
    }

    /// Line-oriented event file: provenance header, then `time,direction`.
    pub fn write_events<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_provenance(w, &self.header_lines())?;
        writeln!(w, "time,direction")?;
        for e in &self.events {
            writeln!(w, "{},{}", fmt_f64(e.time), e.direction.as_str())?;
        }
        Ok(())
    }

    /// Sample series `t,prob_g,prob_e`.
    pub fn write_samples<W: Write>(&self, w: &mut W, times: &[f64]) -> Result<()> {
        write_provenance(w, &self.header_lines())?;
        writeln!(w, "t,prob_g,prob_e")?;
        for s in self.samples(times)? {
            write_row(w, &[s.t, s.prob_g, s.prob_e])?;
        }
        Ok(())
    }
}

/// Parses an event table with columns `trajectory,time,direction` (as
/// written by the ensemble runner) or `time,direction` (a single record).
/// Returns events grouped by trajectory index in file order.
pub fn read_event_table<R: BufRead>(reader: R) -> Result<Vec<(u64, Vec<JumpEvent>)>> {
    let mut table: Vec<(u64, Vec<JumpEvent>)> = Vec::new();
    let mut indexed = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
        if indexed.is_none() {
            indexed = Some(match line {
                "trajectory,time,direction" => true,
                "time,direction" => false,
                _ => return Err(bad("expected a `time,direction` column header")),
            });
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let (index, time, dir) = match (indexed, fields.as_slice()) {
            (Some(true), [i, t, d]) => (
                i.trim().parse::<u64>().map_err(|_| bad("bad trajectory index"))?,
                *t,
                *d,
            ),
            (Some(false), [t, d]) => (0, *t, *d),
            _ => return Err(bad("wrong number of columns")),
        };
        let event = JumpEvent {
            time: time.trim().parse().map_err(|_| bad("bad time"))?,
            direction: Direction::parse(dir)?,
        };
        match table.last_mut() {
            Some((last, events)) if *last == index => events.push(event),
            _ => {
                if table.iter().any(|(i, _)| *i == index) {
                    return Err(bad("rows of one trajectory must be contiguous"));
                }
                table.push((index, vec![event]));
            }
        }
    }
    for (index, events) in &table {
        if events.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Parse(format!(
                "event times of trajectory {index} are not strictly increasing"
            )));
        }
    }
    Ok(table)
}

/// Default fixed step, `0.01/Γ_Σ`.
pub fn default_dt(rates: &Rates) -> f64 {
    MAX_STEP_GAMMA_SIGMA / rates.gamma_sigma
}

/// Configured sampler for one kind of trajectory; `run` produces the
/// realization for a given seed and stream index.
#[derive(Debug, Clone)]
pub struct TrajectorySimulator {
    params: QubitBathParams,
    rates: Rates,
    initial: PureState,
    t_max: f64,
    scheme: Scheme,
    dt: f64,
    max_events: Option<usize>,
}

impl TrajectorySimulator {
    /// A fixed-step simulator with the default step.
    pub fn new(params: &QubitBathParams, initial: PureState, t_max: f64) -> Result<Self> {
        let rates = compute_rates(params)?;
        let initial = PureState::new(initial.a, initial.b)?;
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::invalid("t_max", format!("must be finite and > 0, got {t_max}")));
        }
        Ok(TrajectorySimulator {
            params: *params,
            rates,
            initial,
            t_max,
            scheme: Scheme::FixedStep,
            dt: default_dt(&rates),
            max_events: None,
        })
    }

    pub fn fixed_step(mut self, dt: f64) -> Result<Self> {
        let limit = default_dt(&self.rates);
        if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::invalid(
                "dt",
                format!("must satisfy 0 < dt <= 0.01/gamma_sigma = {limit}, got {dt}"),
            ));
        }
        self.scheme = Scheme::FixedStep;
        self.dt = dt;
        Ok(self)
    }

    pub fn waiting_time(mut self) -> Self {
        self.scheme = Scheme::WaitingTime;
        self
    }

    pub fn with_scheme(self, scheme: Scheme, dt: Option<f64>) -> Result<Self> {
        match scheme {
            Scheme::FixedStep => {
                let dt = dt.unwrap_or(self.dt);
                self.fixed_step(dt)
            }
            Scheme::WaitingTime => Ok(self.waiting_time()),
        }
    }

    /// Stops each run after `n` events.
    pub fn with_max_events(mut self, n: usize) -> Self {
        self.max_events = Some(n);
        self
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dt(&self) -> Option<f64> {
        (self.scheme == Scheme::FixedStep).then_some(self.dt)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn run(&self, seed: u64, index: u64) -> Result<TrajectoryRecord> {
        let mut streams = TrajectoryStreams::new(seed, index)?;
        let (events, complete) = match self.scheme {
            Scheme::FixedStep => self.run_fixed(&mut streams),
            Scheme::WaitingTime => self.run_waiting(&mut streams)?,
        };
        Ok(TrajectoryRecord {
            params: self.params,
            rates: self.rates,
            initial: self.initial,
            seed,
            stream: index,
            scheme: self.scheme,
            dt: self.dt(),
            t_max: self.t_max,
            events,
            complete,
        })
    }

    fn limit_reached(&self, events: &[JumpEvent]) -> bool {
        self.max_events.is_some_and(|n| events.len() >= n)
    }

    /// Steps of `dt` (the last one shortened to end at `t_max`). A jump is
    /// accepted when `u < dp`; since `u/dp` is then uniform, it also places
    /// the jump inside the step at `t + (u/dp)·h`, which removes the O(dt)
    /// delay of stamping events at the step end. Stepping resumes from the
    /// jump time.
    fn run_fixed(&self, streams: &mut TrajectoryStreams) -> (Vec<JumpEvent>, bool) {
        let rates = &self.rates;
        let dt = self.dt;
        let full_factor = (-0.5 * rates.delta_gamma * dt).exp();
        let mut state = self.initial;
        let mut events = Vec::new();
        let mut t = 0.0;
        while t < self.t_max {
            if rates.gamma_up == 0.0 && state.prob_e() == 0.0 {
                // |g⟩ at zero temperature: nothing can happen any more.
                break;
            }
            let remaining = self.t_max - t;
            let last = remaining <= dt * (1.0 + 1e-9);
            let h = if last { remaining } else { dt };
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
                t += (u / dp) * h;
                events.push(JumpEvent { time: t, direction });
                state = direction.target();
                if self.limit_reached(&events) {
                    return (events, false);
                }
                continue;
            }
            if last {
                state = no_jump_evolve(&state, rates, h);
                t = self.t_max;
            } else {
                state = state.reweight(full_factor);
                t += dt;
            }
        }
        (events, true)
    }

    fn run_waiting(&self, streams: &mut TrajectoryStreams) -> Result<(Vec<JumpEvent>, bool)> {
        let rates = &self.rates;
        let mut state = self.initial;
        let mut t = 0.0;
        let mut events = Vec::new();
        loop {
            let u: f64 = streams.jumps.random();
            let Some(wait) = waiting_time(&state, rates, u)? else {
                break;
            };
            let time = t + wait;
            if time > self.t_max {
                break;
            }
            let before = no_jump_evolve(&state, rates, wait);
            let w_down = rates.gamma_down * before.prob_e();
            let w_up = rates.gamma_up * before.prob_g();
            let v: f64 = streams.direction.random();
            let direction = if v * (w_down + w_up) < w_down {
                Direction::Down
            } else {
                Direction::Up
            };
            events.push(JumpEvent { time, direction });
            state = direction.target();
            t = time;
            if self.limit_reached(&events) {
                return Ok((events, false));
            }
        }
        Ok((events, true))
    }
}

/// Fixed-step trajectory over `[0, t_max]`.
pub fn simulate_trajectory(
    params: &QubitBathParams,
    state0: PureState,
    t_max: f64,
    dt: f64,
    seed: u64,
    index: u64,
) -> Result<TrajectoryRecord> {
    TrajectorySimulator::new(params, state0, t_max)?
        .fixed_step(dt)?
        .run(seed, index)
}

/// Exact waiting-time trajectory over `[0, t_max]`.
pub fn simulate_trajectory_waiting_time(
    params: &QubitBathParams,
    state0: PureState,
    t_max: f64,
    seed: u64,
    index: u64,
) -> Result<TrajectoryRecord> {
    TrajectorySimulator::new(params, state0, t_max)?
        .waiting_time()
        .run(seed, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ZERO_TEMPERATURE;
    use crate::rng::{Namespace, RngStreamSpec};

    fn params(beta_hw: f64) -> QubitBathParams {
        QubitBathParams {
            beta_hw,
            ..QubitBathParams::default()
        }
    }

    fn zero_t() -> Rates {
        Rates::zero_temperature()
    }

    #[test]
    fn no_jump_identity_at_zero_time() {
        let s = PureState::from_excited_population(0.3, 0.7).unwrap();
        assert_eq!(no_jump_evolve(&s, &Rates::from_beta_hw(0.5).unwrap(), 0.0), s);
    }

    #[test]
    fn no_jump_closed_form_value() {
        let s = PureState::from_excited_population(0.9, 0.0).unwrap();
        let evolved = no_jump_evolve(&s, &zero_t(), 1.0);
        // 0.9e^-1/(0.1 + 0.9e^-1) at 30 digits.
        assert!((evolved.prob_e() - 0.768030683315926).abs() < 1e-12);
    }

    #[test]
    fn no_jump_matches_euler_integration() {
        // ḃ = −½ΔΓ b|a|², ȧ = ½ΔΓ a|b|², explicit Euler at step 1e-5.
        for &beta in &[ZERO_TEMPERATURE, 0.5] {
            let rates = Rates::from_beta_hw(beta).unwrap();
            let s0 = PureState::from_excited_population(0.9, 0.4).unwrap();
            let (mut a, mut b) = (s0.a, s0.b);
            let h = 1e-5;
            for _ in 0..100_000 {
                let (pa, pb) = (a.norm_sqr(), b.norm_sqr());
                let da = a * (0.5 * rates.delta_gamma * pb);
                let db = b * (-0.5 * rates.delta_gamma * pa);
                a += da * h;
                b += db * h;
            }
            let exact = no_jump_evolve(&s0, &rates, 1.0);
            assert!((exact.prob_e() - b.norm_sqr()).abs() < 1e-5, "beta {beta}");
            assert!((exact.b.arg() - b.arg()).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenstates_are_fixed_points() {
        for t in [0.5, 10.0, 1e4] {
            assert_eq!(no_jump_evolve(&PureState::excited(), &zero_t(), t).prob_e(), 1.0);
            assert_eq!(no_jump_evolve(&PureState::ground(), &zero_t(), t).prob_g(), 1.0);
        }
    }

    #[test]
    fn survival_values() {
        let rates = zero_t();
        let s = PureState::from_excited_population(0.9, 0.0).unwrap();
        assert!((survival_probability(&s, &rates, 0.0) - 1.0).abs() < 1e-15);
        assert!((survival_probability(&s, &rates, 1.0) - 0.4310914970542981).abs() < 1e-12);
        assert!((survival_probability(&s, &rates, 1e3) - 0.1).abs() < 1e-12);
        let warm = Rates::from_beta_hw(0.5).unwrap();
        assert!(survival_probability(&s, &warm, 100.0) < 1e-60);
        assert_eq!(survival_at_infinity(&s, &warm), 0.0);
    }

    #[test]
    fn ground_state_never_jumps_at_zero_temperature() {
        for scheme in [Scheme::FixedStep, Scheme::WaitingTime] {
            let sim = TrajectorySimulator::new(&params(ZERO_TEMPERATURE), PureState::ground(), 50.0)
                .unwrap()
                .with_scheme(scheme, None)
                .unwrap();
            for i in 0..50 {
                assert!(sim.run(3, i).unwrap().events.is_empty());
            }
        }
    }

    #[test]
    fn step_size_is_enforced() {
        let sim = TrajectorySimulator::new(&params(0.5), PureState::excited(), 1.0).unwrap();
        let limit = 0.01 / sim.rates().gamma_sigma;
        assert!(sim.clone().fixed_step(limit).is_ok());
        assert!(matches!(
            sim.clone().fixed_step(limit * 1.01),
            Err(Error::InvalidParameter { ref field, .. }) if field == "dt"
        ));
        assert!(sim.fixed_step(0.0).is_err());
    }

    #[test]
    fn mean_first_jump_time_from_excited_state() {
        let sim = TrajectorySimulator::new(&params(ZERO_TEMPERATURE), PureState::excited(), 40.0)
            .unwrap()
            .with_max_events(1);
        let n = 10_000;
        let times: Vec<f64> = (0..n)
            .map(|i| sim.run(11, i).unwrap().events[0].time)
            .collect();
        let mean = times.iter().sum::<f64>() / n as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn waiting_time_from_excited_state_is_exponential() {
        let p = params(ZERO_TEMPERATURE);
        for i in 0..20 {
            let rec = simulate_trajectory_waiting_time(&p, PureState::excited(), 1e3, 5, i).unwrap();
            let u: f64 = RngStreamSpec::new(5, Namespace::Trajectory, i)
                .unwrap()
                .rng()
                .random();
            assert_eq!(rec.events.len(), 1);
            assert_eq!(rec.events[0].time, -u.ln());
            assert_eq!(rec.events[0].direction, Direction::Down);
        }
    }

    #[test]
    fn never_jumping_fraction_at_zero_temperature() {
        let s = PureState::from_excited_population(0.9, 0.0).unwrap();
        let sim = TrajectorySimulator::new(&params(ZERO_TEMPERATURE), s, 100.0)
            .unwrap()
            .waiting_time();
        let n = 10_000;
        let silent = (0..n).filter(|&i| sim.run(8, i).unwrap().events.is_empty()).count();
        let frac = silent as f64 / n as f64;
        let sigma = (0.1f64 * 0.9 / n as f64).sqrt();
        assert!((frac - 0.1).abs() < 3.0 * sigma, "fraction {frac}");
    }

    #[test]
    fn records_are_reproducible() {
        let s = PureState::from_excited_population(0.6, 1.0).unwrap();
        for scheme in [Scheme::FixedStep, Scheme::WaitingTime] {
            let sim = TrajectorySimulator::new(&params(0.5), s, 5.0)
                .unwrap()
                .with_scheme(scheme, None)
                .unwrap();
            let a = sim.run(99, 4).unwrap();
            let b = sim.run(99, 4).unwrap();
            assert_eq!(a, b);
            assert!(!a.events.is_empty());
            assert_ne!(a.events, sim.run(99, 5).unwrap().events);
        }
    }

    #[test]
    fn jumps_land_in_eigenstates_and_times_increase() {
        let s = PureState::from_excited_population(0.6, 0.0).unwrap();
        let rec = simulate_trajectory(&params(0.5), s, 20.0, 0.002, 1, 0).unwrap();
        assert!(rec.events.len() > 5);
        assert!(rec.events.windows(2).all(|w| w[1].time > w[0].time));
        for e in &rec.events {
            let after = rec.state_at(e.time);
            match e.direction {
                Direction::Down => assert_eq!(after.prob_g(), 1.0),
                Direction::Up => assert_eq!(after.prob_e(), 1.0),
            }
        }
    }

    #[test]
    fn samples_follow_closed_form_between_jumps() {
        let s = PureState::from_excited_population(0.9, 0.0).unwrap();
        let p = params(ZERO_TEMPERATURE);
        let rec = simulate_trajectory(&p, s, 5.0, 0.01, 2, 3).unwrap();
        let times: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) * 0.025).collect();
        let first = rec.first_event().map_or(f64::INFINITY, |e| e.time);
        for sample in rec.samples(&times).unwrap() {
            let expected = if sample.t < first {
                no_jump_evolve(&s, &zero_t(), sample.t).prob_e()
            } else {
                0.0
            };
            assert!((sample.prob_e - expected).abs() < 1e-8);
            assert!((sample.prob_g + sample.prob_e - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn event_file_round_trips() {
        let s = PureState::from_excited_population(0.5, 0.0).unwrap();
        let rec = simulate_trajectory_waiting_time(&params(1.0), s, 10.0, 4, 0).unwrap();
        let mut buf = Vec::new();
        rec.write_events(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# qjcal"));
        let table = read_event_table(text.as_bytes()).unwrap();
        assert_eq!(table.len(), usize::from(!rec.events.is_empty()));
        if let Some((_, events)) = table.first() {
            assert_eq!(events, &rec.events);
        }
    }

    #[test]
    fn event_table_rejects_garbage() {
        assert!(read_event_table("time,direction\n1.0,sideways\n".as_bytes()).is_err());
        assert!(read_event_table("nonsense\n".as_bytes()).is_err());
        assert!(read_event_table("time,direction\n2.0,down\n1.0,up\n".as_bytes()).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalization_preserved(p in 0.0f64..=1.0, phase in -3.0f64..3.0,
                                       beta in 0.05f64..30.0, t in 0.0f64..200.0) {
                let rates = Rates::from_beta_hw(beta).unwrap();
                let s = PureState::from_excited_population(p, phase).unwrap();
                let e = no_jump_evolve(&s, &rates, t);
                prop_assert!((e.prob_g() + e.prob_e() - 1.0).abs() < 1e-10);
                if p > 0.0 && p < 1.0 && e.prob_g() > 0.0 && e.prob_e() > 0.0 {
                    prop_assert!((e.coherence().arg() - s.coherence().arg()).abs() < 1e-9);
                }
            }

            #[test]
            fn no_jump_semigroup(p in 0.0f64..=1.0, beta in 0.05f64..10.0,
                                 t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
                let rates = Rates::from_beta_hw(beta).unwrap();
                let s = PureState::from_excited_population(p, 0.3).unwrap();
                let once = no_jump_evolve(&s, &rates, t1 + t2);
                let twice = no_jump_evolve(&no_jump_evolve(&s, &rates, t1), &rates, t2);
                prop_assert!((once.prob_e() - twice.prob_e()).abs() < 1e-12);
            }

            #[test]
            fn survival_is_monotone(p in 0.0f64..=1.0, beta in 0.05f64..10.0,
                                    t in 0.0f64..20.0, dt in 0.0f64..1.0) {
                let rates = Rates::from_beta_hw(beta).unwrap();
                let s = PureState::from_excited_population(p, 0.0).unwrap();
                let p1 = survival_probability(&s, &rates, t);
                let p2 = survival_probability(&s, &rates, t + dt);
                prop_assert!(p2 <= p1);
                prop_assert!(p1 <= 1.0);
            }

            #[test]
            fn waiting_time_inverts_survival(p in 0.001f64..0.999, beta in 0.05f64..20.0,
                                             u in 1e-12f64..1.0) {
                let rates = Rates::from_beta_hw(beta).unwrap();
                let s = PureState::from_excited_population(p, 0.0).unwrap();
                let wait = waiting_time(&s, &rates, u).unwrap().unwrap();
                // Survival density is bounded by Γ_Σ, so a root accurate to
                // 1e-12/Γ_Σ reproduces u to about 1e-12.
                let back = survival_probability(&s, &rates, wait);
                prop_assert!((back - u).abs() < 1e-11 * u.max(1e-3), "{} vs {}", back, u);
            }
        }
    }
}
