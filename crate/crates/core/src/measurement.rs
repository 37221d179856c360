//! Statistics of the first ("guardian") photon exchanged with the absorber
//! after the qubit is prepared, and the energy moments they imply.
//!
//! Naming follows the calorimeter's point of view: a *click-up* is a photon
//! absorbed by the detector (the qubit relaxes to `|g⟩`), a *click-down* is a
//! photon emitted by the detector (the qubit is excited to `|e⟩`). This is the
//! reverse of the qubit-centric up/down used for [`Direction`].
//!
//! At zero temperature a run that starts with a ground-state component may
//! never jump. Such silent runs are counted separately in [`ClickTally`] and
//! are booked as click-down equivalents by [`energy_moments_empirical`]: the
//! qubit ends in `|g⟩` without the detector ever firing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Rates;
use crate::quadrature::adaptive_simpson;
use crate::trajectory::{no_jump_evolve, survival_probability, Direction, PureState, TrajectoryRecord};

/// Absolute tolerance of the guardian-photon quadrature.
pub const GUARDIAN_QUADRATURE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardianProbability {
    /// `∫₀^∞ P_no-jump(t) Γ↓|b(t)|² dt` by quadrature.
    pub quadrature: f64,
    /// `|b(0)|²`.
    pub analytic: f64,
    pub difference: f64,
}

/// Probability that the first photon is absorbed by the detector.
///
/// The integrand is evaluated from the closed-form survival probability and
/// no-jump population on `[0, 40/Γ_min]`; the remaining tail of the
/// exponential is added analytically.
pub fn guardian_click_probability(state0: &PureState, rates: &Rates) -> Result<GuardianProbability> {
    let state0 = PureState::new(state0.a, state0.b)?;
    let integrand = |t: f64| {
        survival_probability(&state0, rates, t)
            * rates.gamma_down
            * no_jump_evolve(&state0, rates, t).prob_e()
    };
    let end = 40.0 / rates.slowest();
    let body = adaptive_simpson(integrand, 0.0, end, GUARDIAN_QUADRATURE_TOLERANCE)?;
    // Along a no-jump branch the relaxation flux decays as e^{−Γ↓t}.
    let tail = integrand(end) / rates.gamma_down;
    let quadrature = body + tail;
    let analytic = state0.prob_e();
    Ok(GuardianProbability {
        quadrature,
        analytic,
        difference: quadrature - analytic,
    })
}

/// First-click bookkeeping over repeated preparations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClickTally {
    pub n: u64,
    /// Click-downs: the first jump excited the qubit.
    pub n_g: u64,
    /// Click-ups: the first jump relaxed the qubit.
    pub n_e: u64,
    /// Runs with no jump inside the simulated window.
    pub n_silent: u64,
    /// Times of the first click, in record order.
    pub first_click_times: Vec<f64>,
}

impl ClickTally {
    pub fn push(&mut self, record: &TrajectoryRecord) {
        self.n += 1;
        match record.first_event() {
            Some(e) => {
                match e.direction {
                    Direction::Down => self.n_e += 1,
                    Direction::Up => self.n_g += 1,
                }
                self.first_click_times.push(e.time);
            }
            None => self.n_silent += 1,
        }
    }

    pub fn merge(&mut self, other: &ClickTally) {
        self.n += other.n;
        self.n_g += other.n_g;
        self.n_e += other.n_e;
        self.n_silent += other.n_silent;
        self.first_click_times.extend_from_slice(&other.first_click_times);
    }

    /// `N_e/N`, the estimator of `|b(0)|²`.
    pub fn p_hat(&self) -> f64 {
        self.n_e as f64 / self.n as f64
    }

    /// Click-downs plus silent runs.
    pub fn n_g_equivalent(&self) -> u64 {
        self.n_g + self.n_silent
    }
}

pub fn tally_guardian_clicks<'a, I>(records: I) -> ClickTally
where
    I: IntoIterator<Item = &'a TrajectoryRecord>,
{
    let mut tally = ClickTally::default();
    for r in records {
        tally.push(r);
    }
    tally
}

/// Mean and variance of the qubit energy with `E_e = +ħω_Q/2` and
/// `E_g = −ħω_Q/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyMoments {
    /// In units of `ħω_Q`.
    pub mean: f64,
    /// In units of `(ħω_Q)²`.
    pub variance: f64,
    pub mean_kelvin: f64,
    pub variance_kelvin2: f64,
}

impl EnergyMoments {
    fn new(mean: f64, variance: f64, e_q_kelvin: f64) -> Self {
        EnergyMoments {
            mean,
            variance,
            mean_kelvin: mean * e_q_kelvin,
            variance_kelvin2: variance * e_q_kelvin * e_q_kelvin,
        }
    }
}

pub fn energy_moments_analytic(state0: &PureState, e_q_kelvin: f64) -> EnergyMoments {
    let pg = state0.prob_g();
    EnergyMoments::new(0.5 * (1.0 - 2.0 * pg), pg * (1.0 - pg), e_q_kelvin)
}

/// Plug-in estimates from click counts, with silent runs booked as
/// click-downs.
pub fn energy_moments_empirical(tally: &ClickTally, e_q_kelvin: f64) -> Result<EnergyMoments> {
    if tally.n == 0 {
        return Err(Error::EmptyTally);
    }
    let n = tally.n as f64;
    let frac_g = tally.n_g_equivalent() as f64 / n;
    let frac_e = tally.n_e as f64 / n;
    let (e_g, e_e) = (-0.5, 0.5);
    let mean = frac_g * e_g + frac_e * e_e;
    let variance = frac_g * e_g * e_g + frac_e * e_e * e_e - mean * mean;
    Ok(EnergyMoments::new(mean, variance, e_q_kelvin))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over `[0, max(values)]`.
    pub fn of(values: &[f64], bins: usize) -> Histogram {
        let top = values.iter().copied().fold(0.0, f64::max);
        let bins = bins.max(1);
        let width = if top > 0.0 { top / bins as f64 } else { 1.0 };
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = ((v / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram {
            edges: (0..=bins).map(|i| i as f64 * width).collect(),
            counts,
        }
    }
}
