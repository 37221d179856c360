//! Physical configuration of the qubit and its resistive bath, the
//! golden-rule transition rates that follow from it, and the closed-form
//! solution of the two-level master equation.
//!
//! Rates are dimensionless: they are measured in units of `ω_Q/Q`, so the
//! zero-temperature relaxation rate is exactly one and qubit time is measured
//! in units of `Q/ω_Q`. Zero bath temperature is represented by
//! `beta_hw = f64::INFINITY` and is handled as a separate branch so that the
//! excitation rate is exactly zero rather than merely tiny.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value of `beta_hw` that flags a bath at zero temperature.
pub const ZERO_TEMPERATURE: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitBathParams {
    /// Inverse temperature times level splitting, `βħω_Q`.
    #[serde(with = "beta_serde")]
    pub beta_hw: f64,
    /// `Q = Z₀/R`.
    pub quality_factor: f64,
    /// Photon energy `ħω_Q/k_B` in kelvin.
    pub e_q_kelvin: f64,
    /// Zero-temperature relaxation rate in units of the absorber thermal
    /// time constant, `Γ↓(T=0)·τ`.
    pub gamma_down_tau: f64,
}

impl Default for QubitBathParams {
    fn default() -> Self {
        QubitBathParams {
            beta_hw: ZERO_TEMPERATURE,
            quality_factor: 1.0e4,
            e_q_kelvin: 1.0,
            gamma_down_tau: 1.0,
        }
    }
}

impl QubitBathParams {
    pub fn validate(&self) -> Result<()> {
        validate_beta_hw(self.beta_hw)?;
        positive("quality_factor", self.quality_factor)?;
        positive("e_q_kelvin", self.e_q_kelvin)?;
        positive("gamma_down_tau", self.gamma_down_tau)?;
        Ok(())
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta_hw == ZERO_TEMPERATURE
    }

    /// Converts a qubit time (units of `1/Γ↓(T=0)`) to calorimeter time
    /// `u = t/τ`.
    pub fn qubit_time_to_u(&self, t: f64) -> f64 {
        t / self.gamma_down_tau
    }

    pub fn u_to_qubit_time(&self, u: f64) -> f64 {
        u * self.gamma_down_tau
    }
}

pub(crate) fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn validate_beta_hw(beta_hw: f64) -> Result<()> {
    if beta_hw > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "beta_hw",
            format!("must be > 0 (or infinite for zero temperature), got {beta_hw}"),
        ))
    }
}

/// Transition rates in units of `ω_Q/Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub gamma_down: f64,
    pub gamma_up: f64,
    pub gamma_sigma: f64,
    pub delta_gamma: f64,
}

impl Rates {
    /// Rates for a bath with the given `βħω_Q`.
    pub fn from_beta_hw(beta_hw: f64) -> Result<Rates> {
        validate_beta_hw(beta_hw)?;
        let (gamma_down, gamma_up) = if beta_hw == ZERO_TEMPERATURE {
            (1.0, 0.0)
        } else {
            // expm1 keeps both Bose factors accurate for small βħω_Q.
            (1.0 / -(-beta_hw).exp_m1(), 1.0 / beta_hw.exp_m1())
        };
        Ok(Rates {
            gamma_down,
            gamma_up,
            gamma_sigma: gamma_down + gamma_up,
            delta_gamma: gamma_down - gamma_up,
        })
    }

    /// Relaxation with `Γ↑ = 0`.
    pub fn zero_temperature() -> Rates {
        Rates {
            gamma_down: 1.0,
            gamma_up: 0.0,
            gamma_sigma: 1.0,
            delta_gamma: 1.0,
        }
    }

    /// `Γ↓/Γ_Σ`, the stationary ground-state population.
    pub fn stationary_ground(&self) -> f64 {
        self.gamma_down / self.gamma_sigma
    }

    /// The slowest nonzero rate.
    pub fn slowest(&self) -> f64 {
        if self.gamma_up > 0.0 {
            self.gamma_up.min(self.gamma_down)
        } else {
            self.gamma_down
        }
    }
}

pub fn compute_rates(params: &QubitBathParams) -> Result<Rates> {
    params.validate()?;
    Rates::from_beta_hw(params.beta_hw)
}

/// Sign of the frequency argument of the current-noise spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaSign {
    /// `+ω_Q`: the bath absorbs energy from the qubit.
    Positive,
    /// `−ω_Q`: the bath gives energy to the qubit.
    Negative,
}

/// Current-noise spectral density `S_i(±ω_Q)` normalized by `2ħω_Q/R`.
///
/// At `+ω_Q` this is `1/(1−e^{−βħω_Q})`, at `−ω_Q` it is `1/(e^{βħω_Q}−1)`;
/// the ratio of the two is `e^{βħω_Q}`.
pub fn spectral_density(sign: OmegaSign, beta_hw: f64) -> Result<f64> {
    let rates = Rates::from_beta_hw(beta_hw)?;
    Ok(match sign {
        OmegaSign::Positive => rates.gamma_down,
        OmegaSign::Negative => rates.gamma_up,
    })
}

/// The populations and coherence of the qubit density matrix in the
/// `{|g⟩, |e⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub rho_gg: f64,
    pub rho_ge: Complex64,
}

impl DensityMatrix {
    pub fn new(rho_gg: f64, rho_ge: Complex64) -> Result<DensityMatrix> {
        if !(0.0..=1.0).contains(&rho_gg) {
            return Err(Error::invalid("rho_gg", format!("must lie in [0, 1], got {rho_gg}")));
        }
        let bound = rho_gg * (1.0 - rho_gg);
        if !rho_ge.is_finite() || rho_ge.norm_sqr() > bound + 1e-12 {
            return Err(Error::invalid(
                "rho_ge",
                format!("|rho_ge|^2 = {} exceeds rho_gg(1-rho_gg) = {bound}", rho_ge.norm_sqr()),
            ));
        }
        Ok(DensityMatrix { rho_gg, rho_ge })
    }

    pub fn rho_ee(&self) -> f64 {
        1.0 - self.rho_gg
    }
}

/// Closed-form solution of `ρ̇_gg = −Γ_Σ ρ_gg + Γ↓`, `ρ̇_ge = −½Γ_Σ ρ_ge`.
pub fn evolve_density(rates: &Rates, rho0: &DensityMatrix, t: f64) -> DensityMatrix {
    let fixed = rates.stationary_ground();
    let decay = (-rates.gamma_sigma * t).exp();
    DensityMatrix {
        rho_gg: fixed + (rho0.rho_gg - fixed) * decay,
        rho_ge: rho0.rho_ge * (-0.5 * rates.gamma_sigma * t).exp(),
    }
}

pub fn me_solution(
    params: &QubitBathParams,
    rho_gg0: f64,
    rho_ge0: Complex64,
    t: f64,
) -> Result<DensityMatrix> {
    let rates = compute_rates(params)?;
    let rho0 = DensityMatrix::new(rho_gg0, rho_ge0)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::invalid("t", format!("must be >= 0, got {t}")));
    }
    Ok(evolve_density(&rates, &rho0, t))
}

/// JSON has no infinity, so the zero-temperature flag is written as `"inf"`.
pub(crate) mod beta_serde {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() && *value > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct BetaVisitor;

        impl Visitor<'_> for BetaVisitor {
            type Value = f64;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" | "infinity" | "zero-temperature" => Ok(f64::INFINITY),
                    other => other.parse().map_err(E::custom),
                }
            }
        }

        d.deserialize_any(BetaVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta_hw: f64) -> QubitBathParams {
        QubitBathParams {
            beta_hw,
            ..QubitBathParams::default()
        }
    }

    #[test]
    fn zero_temperature_rates_are_exact() {
        let r = compute_rates(&params(ZERO_TEMPERATURE)).unwrap();
        assert_eq!(r.gamma_down, 1.0);
        assert_eq!(r.gamma_up, 0.0);
        assert_eq!(r.gamma_sigma, 1.0);
        assert_eq!(r, Rates::zero_temperature());
    }

    #[test]
    fn rates_at_half() {
        // 1/(1 - e^-0.5) and 1/(e^0.5 - 1), evaluated with mpmath at 30 digits.
        let r = compute_rates(&params(0.5)).unwrap();
        assert!((r.gamma_down - 2.541494082536798).abs() < 1e-12);
        assert!((r.gamma_up - 1.541494082536798).abs() < 1e-12);
        assert_eq!(r.gamma_sigma, r.gamma_down + r.gamma_up);
        assert_eq!(r.delta_gamma, r.gamma_down - r.gamma_up);
    }

    #[test]
    fn detailed_balance_sweep() {
        for &b in &[1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0] {
            let r = Rates::from_beta_hw(b).unwrap();
            let ratio = r.gamma_up / r.gamma_down;
            assert!((ratio / (-b).exp() - 1.0).abs() < 1e-12, "beta_hw = {b}");
        }
    }

    #[test]
    fn rejects_bad_params() {
        for b in [0.0, -1.0, f64::NAN, f64::NEG_INFINITY] {
            assert!(compute_rates(&params(b)).is_err(), "beta_hw = {b}");
        }
        let mut p = params(1.0);
        p.quality_factor = 0.0;
        assert!(matches!(
            compute_rates(&p),
            Err(Error::InvalidParameter { ref field, .. }) if field == "quality_factor"
        ));
    }

    #[test]
    fn spectral_density_values() {
        assert_eq!(spectral_density(OmegaSign::Negative, ZERO_TEMPERATURE).unwrap(), 0.0);
        assert_eq!(spectral_density(OmegaSign::Positive, ZERO_TEMPERATURE).unwrap(), 1.0);
        let s = spectral_density(OmegaSign::Positive, 0.5).unwrap();
        assert!((s - 2.541494082536798).abs() < 1e-12);
        for &b in &[0.1, 0.5, 1.0, 3.0] {
            let plus = spectral_density(OmegaSign::Positive, b).unwrap();
            let minus = spectral_density(OmegaSign::Negative, b).unwrap();
            assert!((plus / minus / b.exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn me_identity_at_zero_time() {
        let rho_ge = Complex64::new(0.2, -0.1);
        let rho = me_solution(&params(0.5), 0.3, rho_ge, 0.0).unwrap();
        assert_eq!(rho.rho_gg, 0.3);
        assert_eq!(rho.rho_ge, rho_ge);
    }

    #[test]
    fn me_long_time_limits() {
        let rho = me_solution(&params(0.5), 0.1, Complex64::new(0.3, 0.0), 200.0).unwrap();
        assert!((rho.rho_ee() - 1.0 / (0.5f64.exp() + 1.0)).abs() < 1e-12);
        assert!((rho.rho_ee() - 0.37754066879814544).abs() < 1e-12);
        assert!(rho.rho_ge.norm() < 1e-100);

        let rho = me_solution(&params(ZERO_TEMPERATURE), 0.1, Complex64::new(0.0, 0.0), 100.0)
            .unwrap();
        assert!((rho.rho_gg - 1.0).abs() < 1e-15);
    }

    /// Fourth-order Runge-Kutta on the master equation, independent of the
    /// closed form.
    fn rk4(rates: &Rates, rho0: DensityMatrix, t: f64, steps: usize) -> DensityMatrix {
        let h = t / steps as f64;
        let f = |gg: f64, ge: Complex64| {
            (
                -rates.gamma_sigma * gg + rates.gamma_down,
                -0.5 * rates.gamma_sigma * ge,
            )
        };
        let (mut gg, mut ge) = (rho0.rho_gg, rho0.rho_ge);
        for _ in 0..steps {
            let k1 = f(gg, ge);
            let k2 = f(gg + 0.5 * h * k1.0, ge + 0.5 * h * k1.1);
            let k3 = f(gg + 0.5 * h * k2.0, ge + 0.5 * h * k2.1);
            let k4 = f(gg + h * k3.0, ge + h * k3.1);
            gg += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            ge += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0);
        }
        DensityMatrix { rho_gg: gg, rho_ge: ge }
    }

    #[test]
    fn closed_form_matches_rk4() {
        for &b in &[0.5, 2.0, ZERO_TEMPERATURE] {
            let rates = Rates::from_beta_hw(b).unwrap();
            let rho0 = DensityMatrix::new(0.1, Complex64::new(0.2, 0.1)).unwrap();
            for &t in &[0.1, 1.0, 3.0, 20.0] {
                let exact = evolve_density(&rates, &rho0, t);
                let numeric = rk4(&rates, rho0, t, 20_000);
                assert!((exact.rho_gg - numeric.rho_gg).abs() < 1e-10);
                assert!((exact.rho_ge - numeric.rho_ge).norm() < 1e-10);
            }
        }
        // Stationary point of the ODE at βħω_Q = 0.5.
        let rates = Rates::from_beta_hw(0.5).unwrap();
        let rho0 = DensityMatrix::new(0.1, Complex64::new(0.0, 0.0)).unwrap();
        let late = rk4(&rates, rho0, 30.0, 50_000);
        assert!((late.rho_ee() - 0.37754066879814544).abs() < 1e-10);
    }

    #[test]
    fn rejects_unphysical_density_matrix() {
        let p = params(1.0);
        assert!(me_solution(&p, 1.1, Complex64::new(0.0, 0.0), 1.0).is_err());
        assert!(me_solution(&p, 0.5, Complex64::new(0.6, 0.0), 1.0).is_err());
        assert!(me_solution(&p, 0.5, Complex64::new(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn beta_round_trips_through_json() {
        let p = params(ZERO_TEMPERATURE);
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"beta_hw\":\"inf\""));
        let back: QubitBathParams = serde_json::from_str(&text).unwrap();
        assert!(back.is_zero_temperature());
        let finite: QubitBathParams =
            serde_json::from_str(&serde_json::to_string(&params(0.5)).unwrap()).unwrap();
        assert_eq!(finite.beta_hw, 0.5);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn semigroup(beta in 0.05f64..20.0, gg in 0.0f64..=1.0, frac in 0.0f64..=1.0,
                         phase in 0.0f64..std::f64::consts::TAU, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
                let rates = Rates::from_beta_hw(beta).unwrap();
                let rho0 = DensityMatrix::new(gg, Complex64::from_polar(
                    frac * (gg * (1.0 - gg)).sqrt(), phase)).unwrap();
                let once = evolve_density(&rates, &rho0, t1 + t2);
                let twice = evolve_density(&rates, &evolve_density(&rates, &rho0, t1), t2);
                prop_assert!((once.rho_gg - twice.rho_gg).abs() < 1e-12);
                prop_assert!((once.rho_ge - twice.rho_ge).norm() < 1e-12);
            }

            #[test]
            fn positivity_preserved(beta in 0.05f64..20.0, gg in 0.0f64..=1.0,
                                    frac in 0.0f64..=1.0, t in 0.0f64..50.0) {
                let rates = Rates::from_beta_hw(beta).unwrap();
                let rho0 = DensityMatrix::new(gg, Complex64::new(
                    frac * (gg * (1.0 - gg)).sqrt(), 0.0)).unwrap();
                let rho = evolve_density(&rates, &rho0, t);
                prop_assert!((0.0..=1.0).contains(&rho.rho_gg));
                prop_assert!(rho.rho_ge.norm_sqr() <= rho.rho_gg * (1.0 - rho.rho_gg) + 1e-12);
            }
        }
    }
}
