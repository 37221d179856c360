//! Trajectory averages `J(t)` and their comparison with the master equation.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{evolve_density, QubitBathParams, Rates};
use crate::output::{write_provenance, write_row};
use crate::trajectory::{no_jump_evolve, survival_probability, PureState, TrajectoryRecord};

pub const DEFAULT_BINS: usize = 200;

/// Uniform bins over `[0, t_max]`; trajectories are sampled at bin centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub bins: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, bins: usize) -> Result<TimeGrid> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::invalid("t_max", format!("must be finite and > 0, got {t_max}")));
        }
        if bins == 0 {
            return Err(Error::invalid("bins", "must be >= 1"));
        }
        Ok(TimeGrid { t_max, bins })
    }

    pub fn centers(&self) -> Vec<f64> {
        let width = self.t_max / self.bins as f64;
        (0..self.bins).map(|i| (i as f64 + 0.5) * width).collect()
    }
}

/// Running sums for the per-bin means. Partial accumulators built over
/// disjoint index ranges merge associatively; merging them in index order
/// gives a result independent of how the work was split among workers
/// provided the split points are fixed.
#[derive(Debug, Clone)]
pub struct EnsembleAccumulator {
    params: QubitBathParams,
    initial: PureState,
    grid: TimeGrid,
    times: Vec<f64>,
    n: u64,
    sum_g: Vec<f64>,
    sum_e: Vec<f64>,
    sumsq_g: Vec<f64>,
    sumsq_e: Vec<f64>,
    sum_ge: Vec<Complex64>,
}

impl EnsembleAccumulator {
    pub fn new(params: QubitBathParams, initial: PureState, grid: TimeGrid) -> Self {
        let bins = grid.bins;
        EnsembleAccumulator {
            params,
            initial,
            grid,
            times: grid.centers(),
            n: 0,
            sum_g: vec![0.0; bins],
            sum_e: vec![0.0; bins],
            sumsq_g: vec![0.0; bins],
            sumsq_e: vec![0.0; bins],
            sum_ge: vec![Complex64::new(0.0, 0.0); bins],
        }
    }

    pub fn push(&mut self, record: &TrajectoryRecord) -> Result<()> {
        if record.params != self.params || record.initial != self.initial {
            return Err(Error::MixedRecords(format!(
                "record with stream {} has different parameters or initial state",
                record.stream
            )));
        }
        if record.t_max < self.grid.t_max {
            return Err(Error::MixedRecords(format!(
                "record with stream {} ends at t = {} before the grid end {}",
                record.stream, record.t_max, self.grid.t_max
            )));
        }
        for (i, s) in record.samples(&self.times)?.into_iter().enumerate() {
            self.sum_g[i] += s.prob_g;
            self.sum_e[i] += s.prob_e;
            self.sumsq_g[i] += s.prob_g * s.prob_g;
            self.sumsq_e[i] += s.prob_e * s.prob_e;
            self.sum_ge[i] += s.coherence;
        }
        self.n += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<()> {
        if other.params != self.params || other.initial != self.initial || other.grid != self.grid
        {
            return Err(Error::MixedRecords("partial aggregates disagree".into()));
        }
        for i in 0..self.grid.bins {
            self.sum_g[i] += other.sum_g[i];
            self.sum_e[i] += other.sum_e[i];
            self.sumsq_g[i] += other.sumsq_g[i];
            self.sumsq_e[i] += other.sumsq_e[i];
            self.sum_ge[i] += other.sum_ge[i];
        }
        self.n += other.n;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn finish(&self) -> Result<EnsembleStats> {
        if self.n == 0 {
            return Err(Error::invalid("records", "at least one trajectory is required"));
        }
        let n = self.n as f64;
        let se = |sum: f64, sumsq: f64| {
            if self.n < 2 {
                return 0.0;
            }
            let var = ((sumsq - sum * sum / n) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        };
        let bins = self.grid.bins;
        Ok(EnsembleStats {
            params: self.params,
            initial: self.initial,
            grid: self.grid,
            t: self.times.clone(),
            n: self.n,
            j_gg: self.sum_g.iter().map(|s| s / n).collect(),
            j_ee: self.sum_e.iter().map(|s| s / n).collect(),
            j_ge: self.sum_ge.iter().map(|s| s / n).collect(),
            se_gg: (0..bins).map(|i| se(self.sum_g[i], self.sumsq_g[i])).collect(),
            se_ee: (0..bins).map(|i| se(self.sum_e[i], self.sumsq_e[i])).collect(),
        })
    }
}

/// Per-bin trajectory averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub params: QubitBathParams,
    pub initial: PureState,
    pub grid: TimeGrid,
    pub t: Vec<f64>,
    pub n: u64,
    pub j_gg: Vec<f64>,
    pub j_ee: Vec<f64>,
    pub j_ge: Vec<Complex64>,
    pub se_gg: Vec<f64>,
    pub se_ee: Vec<f64>,
}

impl EnsembleStats {
    pub fn max_se_ee(&self) -> f64 {
        self.se_ee.iter().copied().fold(0.0, f64::max)
    }

    /// CSV `t,J_gg,J_ee,Re_Jge,Im_Jge,se_gg,se_ee,rho_gg,rho_ee`.
    pub fn write_csv<W: Write>(&self, w: &mut W, provenance: &[String]) -> Result<()> {
        let rates = Rates::from_beta_hw(self.params.beta_hw)?;
        write_provenance(w, provenance)?;
        writeln!(w, "t,J_gg,J_ee,Re_Jge,Im_Jge,se_gg,se_ee,rho_gg,rho_ee")?;
        let rho0 = self.initial.density();
        for i in 0..self.t.len() {
            let rho = evolve_density(&rates, &rho0, self.t[i]);
            write_row(
                w,
                &[
                    self.t[i],
                    self.j_gg[i],
                    self.j_ee[i],
                    self.j_ge[i].re,
                    self.j_ge[i].im,
                    self.se_gg[i],
                    self.se_ee[i],
                    rho.rho_gg,
                    rho.rho_ee(),
                ],
            )?;
        }
        Ok(())
    }
}

/// Per-bin means and standard errors of the given records. Records must share
/// parameters and initial state.
pub fn aggregate(records: &[TrajectoryRecord], grid: TimeGrid) -> Result<EnsembleStats> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("records", "at least one trajectory is required"))?;
    let mut acc = EnsembleAccumulator::new(first.params, first.initial, grid);
    for r in records {
        acc.push(r)?;
    }
    acc.finish()
}

/// Standard error of the excited population predicted by the model for an
/// ensemble of `n` trajectories.
///
/// Before the first jump `|b|²` follows the no-jump curve; afterwards the
/// state is an eigenstate, so `|b|⁴ = |b|²`. Hence
/// `E|b|⁴ = P·b₀(t)⁴ + ρ_ee − P·b₀(t)²` with `b₀(t)²` the no-jump population.
/// Unlike the sample standard error this stays informative in bins where all
/// trajectories happen to carry the same value.
pub fn model_se_ee(rates: &Rates, initial: &PureState, t: f64, n: u64) -> f64 {
    let survival = survival_probability(initial, rates, t);
    let no_jump = no_jump_evolve(initial, rates, t).prob_e();
    let rho_ee = evolve_density(rates, &initial.density(), t).rho_ee();
    let fourth = survival * no_jump * no_jump + (rho_ee - survival * no_jump).max(0.0);
    ((fourth - rho_ee * rho_ee).max(0.0) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeComparison {
    pub n: u64,
    pub max_abs_dev_ee: f64,
    pub max_abs_dev_gg: f64,
    pub max_abs_dev_ge: f64,
    pub max_sample_se_ee: f64,
    pub max_model_se_ee: f64,
    /// `max_t |J_ee − ρ_ee| / SE_model(t)`.
    pub max_abs_z: f64,
    pub fraction_abs_z_above_3: f64,
    /// Per-bin `(J_ee − ρ_ee)/SE`, with the model standard error.
    pub z_scores: Vec<f64>,
    /// Decay rate of `|J_ge|` from a log-linear fit, when there is coherence.
    pub coherence_decay_fit: Option<f64>,
    /// `Γ_Σ/2`.
    pub coherence_decay_expected: f64,
}

pub fn compare_to_me(stats: &EnsembleStats) -> Result<MeComparison> {
    let rates = Rates::from_beta_hw(stats.params.beta_hw)?;
    let rho0 = stats.initial.density();
    let mut cmp = MeComparison {
        n: stats.n,
        max_abs_dev_ee: 0.0,
        max_abs_dev_gg: 0.0,
        max_abs_dev_ge: 0.0,
        max_sample_se_ee: stats.max_se_ee(),
        max_model_se_ee: 0.0,
        max_abs_z: 0.0,
        fraction_abs_z_above_3: 0.0,
        z_scores: Vec::with_capacity(stats.t.len()),
        coherence_decay_fit: None,
        coherence_decay_expected: 0.5 * rates.gamma_sigma,
    };
    let mut above = 0usize;
    let mut fit_points = Vec::new();
    for (i, &t) in stats.t.iter().enumerate() {
        let rho = evolve_density(&rates, &rho0, t);
        let dev_ee = stats.j_ee[i] - rho.rho_ee();
        cmp.max_abs_dev_ee = cmp.max_abs_dev_ee.max(dev_ee.abs());
        cmp.max_abs_dev_gg = cmp.max_abs_dev_gg.max((stats.j_gg[i] - rho.rho_gg).abs());
        cmp.max_abs_dev_ge = cmp.max_abs_dev_ge.max((stats.j_ge[i] - rho.rho_ge).norm());
        let se = model_se_ee(&rates, &stats.initial, t, stats.n);
        cmp.max_model_se_ee = cmp.max_model_se_ee.max(se);
        let z = if se > 0.0 {
            dev_ee / se
        } else if dev_ee.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY.copysign(dev_ee)
        };
        if z.abs() > 3.0 {
            above += 1;
        }
        cmp.max_abs_z = cmp.max_abs_z.max(z.abs());
        cmp.z_scores.push(z);
        if rho0.rho_ge.norm() > 0.0 && stats.j_ge[i].norm() > 0.1 * rho0.rho_ge.norm() {
            fit_points.push((t, stats.j_ge[i].norm().ln()));
        }
    }
    cmp.fraction_abs_z_above_3 = above as f64 / stats.t.len() as f64;
    if fit_points.len() >= 3 {
        cmp.coherence_decay_fit = Some(-least_squares_slope(&fit_points));
    }
    Ok(cmp)
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ZERO_TEMPERATURE;
    use crate::trajectory::TrajectorySimulator;

    fn params(beta_hw: f64) -> QubitBathParams {
        QubitBathParams {
            beta_hw,
            ..QubitBathParams::default()
        }
    }

    fn run(beta: f64, prob_e: f64, n: u64, t_max: f64) -> Vec<TrajectoryRecord> {
        let s = PureState::from_excited_population(prob_e, 0.0).unwrap();
        let sim = TrajectorySimulator::new(&params(beta), s, t_max).unwrap();
        (0..n).map(|i| sim.run(21, i).unwrap()).collect()
    }

    #[test]
    fn single_record_reproduces_its_samples() {
        let records = run(0.5, 0.7, 1, 4.0);
        let grid = TimeGrid::new(4.0, 50).unwrap();
        let stats = aggregate(&records, grid).unwrap();
        let samples = records[0].samples(&grid.centers()).unwrap();
        for (i, s) in samples.iter().enumerate() {
            assert_eq!(stats.j_ee[i], s.prob_e);
            assert_eq!(stats.j_gg[i], s.prob_g);
            assert_eq!(stats.j_ge[i], s.coherence);
            assert_eq!(stats.se_ee[i], 0.0);
        }
    }

    #[test]
    fn trace_is_preserved_per_bin() {
        let stats = aggregate(&run(0.5, 0.9, 300, 3.0), TimeGrid::new(3.0, 200).unwrap()).unwrap();
        for i in 0..200 {
            assert!((stats.j_gg[i] + stats.j_ee[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mixed_records_are_rejected() {
        let mut records = run(0.5, 0.9, 2, 3.0);
        records.extend(run(1.0, 0.9, 1, 3.0));
        assert!(matches!(
            aggregate(&records, TimeGrid::new(3.0, 10).unwrap()),
            Err(Error::MixedRecords(_))
        ));
        assert!(aggregate(&[], TimeGrid::new(3.0, 10).unwrap()).is_err());
    }

    #[test]
    fn merging_matches_sequential_push() {
        let records = run(0.5, 0.9, 64, 3.0);
        let grid = TimeGrid::new(3.0, 40).unwrap();
        let whole = aggregate(&records, grid).unwrap();
        let left = {
            let mut a = EnsembleAccumulator::new(records[0].params, records[0].initial, grid);
            records[..20].iter().for_each(|r| a.push(r).unwrap());
            a
        };
        let mut right = EnsembleAccumulator::new(records[0].params, records[0].initial, grid);
        records[20..].iter().for_each(|r| right.push(r).unwrap());
        let mut merged = left;
        merged.merge(&right).unwrap();
        let merged = merged.finish().unwrap();
        for i in 0..grid.bins {
            assert!((merged.j_ee[i] - whole.j_ee[i]).abs() < 1e-14);
            assert!((merged.se_ee[i] - whole.se_ee[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_me_stats_have_zero_deviation() {
        let grid = TimeGrid::new(4.0, 100).unwrap();
        let initial = PureState::from_excited_population(0.9, 0.5).unwrap();
        let p = params(0.5);
        let rates = Rates::from_beta_hw(0.5).unwrap();
        let t = grid.centers();
        let rho: Vec<_> = t.iter().map(|&t| evolve_density(&rates, &initial.density(), t)).collect();
        let stats = EnsembleStats {
            params: p,
            initial,
            grid,
            n: 1000,
            j_gg: rho.iter().map(|r| r.rho_gg).collect(),
            j_ee: rho.iter().map(|r| r.rho_ee()).collect(),
            j_ge: rho.iter().map(|r| r.rho_ge).collect(),
            se_gg: vec![0.01; 100],
            se_ee: vec![0.01; 100],
            t,
        };
        let cmp = compare_to_me(&stats).unwrap();
        assert_eq!(cmp.max_abs_dev_ee, 0.0);
        assert_eq!(cmp.max_abs_dev_ge, 0.0);
        assert_eq!(cmp.fraction_abs_z_above_3, 0.0);
        let fit = cmp.coherence_decay_fit.unwrap();
        assert!((fit / cmp.coherence_decay_expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn model_se_matches_brute_force_variance() {
        // Empirical variance of |b(t)|² across many trajectories against the
        // closed-form prediction.
        let records = run(0.5, 0.9, 20_000, 2.0);
        let rates = Rates::from_beta_hw(0.5).unwrap();
        let initial = records[0].initial;
        for &t in &[0.1, 0.5, 1.5] {
            let values: Vec<f64> = records.iter().map(|r| r.state_at(t).prob_e()).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let predicted = model_se_ee(&rates, &initial, t, 1).powi(2);
            assert!((var / predicted - 1.0).abs() < 0.05, "t {t}: {var} vs {predicted}");
        }
    }

    #[test]
    fn zero_temperature_ensemble_tracks_me() {
        let stats =
            aggregate(&run(ZERO_TEMPERATURE, 0.9, 10_000, 5.0), TimeGrid::new(5.0, 200).unwrap())
                .unwrap();
        let cmp = compare_to_me(&stats).unwrap();
        assert!(cmp.fraction_abs_z_above_3 <= 0.02, "{}", cmp.fraction_abs_z_above_3);
    }

    #[test]
    fn standard_error_scales_with_ensemble_size() {
        let grid = TimeGrid::new(3.0, 100).unwrap();
        let small = aggregate(&run(0.5, 0.9, 2_000, 3.0), grid).unwrap();
        let large = aggregate(&run(0.5, 0.9, 4_000, 3.0), grid).unwrap();
        let ratio = small.max_se_ee() / large.max_se_ee();
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
        // Across bins the SE varies, but stays within a factor of two of the
        // 1/sqrt(N) scaling.
        for i in 5..100 {
            let r = small.se_ee[i] / large.se_ee[i];
            assert!(r > 2f64.sqrt() / 2.0 && r < 2f64.sqrt() * 2.0);
        }
    }
}
