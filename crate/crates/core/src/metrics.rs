//! SINR bookkeeping: per-(user, subcarrier) signal/interference/noise
//! decompositions, aggregation over Monte-Carlo trials, and empirical
//! CDFs.
//!
//! Conventions shared by the deterministic and symbol-level estimators:
//! real OQAM data symbols have unit power, the analysis filter has unit
//! energy, and the real-part operation halves the effective noise, so
//! the post-demodulation noise power is `σ_η²/2`. The OFDM baseline uses
//! QAM symbols of power 2 (one unit per real dimension) against full
//! complex noise `σ_η²`, which makes the two waveforms' SINRs directly
//! comparable.

use crate::error::{Error, Result};

/// Reporting caps for ratios that are exactly zero or unbounded.
pub const SINR_CAP_DB: f64 = 100.0;
pub const SINR_FLOOR_DB: f64 = -100.0;

/// Convert a linear power ratio to dB with the reporting caps applied.
pub fn ratio_db(ratio: f64) -> f64 {
    if ratio.is_nan() || ratio <= 0.0 {
        return SINR_FLOOR_DB;
    }
    if ratio.is_infinite() {
        return SINR_CAP_DB;
    }
    (10.0 * ratio.log10()).clamp(SINR_FLOOR_DB, SINR_CAP_DB)
}

/// One grid point's power decomposition (linear units).
#[derive(Debug, Clone, Copy, Default)]
pub struct SinrComponents {
    pub signal: f64,
    /// Total interference (own-stream ISI/ICI plus other users).
    pub interference: f64,
    /// Portion of `interference` caused by other users' streams, when
    /// the estimator can attribute it (deterministic path only).
    pub cross_user: Option<f64>,
    pub noise: f64,
}

impl SinrComponents {
    pub fn sinr_linear(&self) -> f64 {
        let denom = self.interference + self.noise;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            self.signal / denom
        }
    }

    pub fn sinr_db(&self) -> f64 {
        ratio_db(self.sinr_linear())
    }

    pub fn sir_linear(&self) -> f64 {
        if self.interference <= 0.0 {
            f64::INFINITY
        } else {
            self.signal / self.interference
        }
    }
}

/// Aggregated SINR over trials for one lane of one scenario.
#[derive(Debug, Clone)]
pub struct SinrReport {
    num_users: usize,
    num_subcarriers: usize,
    sums: Vec<SinrComponents>,
    /// Per-trial, per-user wideband SIR samples (linear), for CDFs.
    sir_samples: Vec<f64>,
    /// Per-trial mean serving-set size (antennas), cell-free only.
    service_sizes: Vec<f64>,
    trials: usize,
}

impl SinrReport {
    pub fn new(num_users: usize, num_subcarriers: usize) -> Self {
        Self {
            num_users,
            num_subcarriers,
            sums: vec![SinrComponents::default(); num_users * num_subcarriers],
            sir_samples: Vec::new(),
            service_sizes: Vec::new(),
            trials: 0,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    /// Fold in one trial's per-(user, subcarrier) components. Reductions
    /// are plain sums, so merging in trial order is reproducible no
    /// matter how the trials were scheduled.
    pub fn merge_trial(&mut self, components: &[SinrComponents], service_size: Option<f64>) -> Result<()> {
        if components.len() != self.sums.len() {
            return Err(Error::DimensionMismatch(format!(
                "trial delivered {} grid points, report holds {}",
                components.len(),
                self.sums.len()
            )));
        }
        for (acc, c) in self.sums.iter_mut().zip(components) {
            acc.signal += c.signal;
            acc.interference += c.interference;
            acc.noise += c.noise;
            acc.cross_user = match (acc.cross_user, c.cross_user) {
                (Some(a), Some(b)) => Some(a + b),
                (None, v) => v,
                (v, None) => v,
            };
        }
        for k in 0..self.num_users {
            let mut s = 0.0;
            let mut i = 0.0;
            for m in 0..self.num_subcarriers {
                let c = &components[k * self.num_subcarriers + m];
                s += c.signal;
                i += c.interference;
            }
            self.sir_samples.push(if i > 0.0 { s / i } else { f64::INFINITY });
        }
        if let Some(sz) = service_size {
            self.service_sizes.push(sz);
        }
        self.trials += 1;
        Ok(())
    }

    /// Trial-mean components at one grid point.
    pub fn components(&self, user: usize, m: usize) -> SinrComponents {
        let c = &self.sums[user * self.num_subcarriers + m];
        let n = self.trials.max(1) as f64;
        SinrComponents {
            signal: c.signal / n,
            interference: c.interference / n,
            cross_user: c.cross_user.map(|v| v / n),
            noise: c.noise / n,
        }
    }

    /// Per-user SINR: linear mean over subcarriers of the trial-mean
    /// per-subcarrier SINR.
    pub fn user_sinr_linear(&self, user: usize) -> f64 {
        let mut acc = 0.0;
        for m in 0..self.num_subcarriers {
            acc += self.components(user, m).sinr_linear();
        }
        acc / self.num_subcarriers as f64
    }

    /// Scenario figure of merit: arithmetic mean of per-user linear SINR,
    /// in dB.
    pub fn mean_sinr_db(&self) -> f64 {
        let mean: f64 =
            (0..self.num_users).map(|k| self.user_sinr_linear(k)).sum::<f64>() / self.num_users as f64;
        ratio_db(mean)
    }

    /// Mean of per-user linear SIR (noise excluded), in dB.
    pub fn mean_sir_db(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.num_users {
            let mut s = 0.0;
            let mut i = 0.0;
            for m in 0..self.num_subcarriers {
                let c = self.components(k, m);
                s += c.signal;
                i += c.interference;
            }
            acc += if i > 0.0 { s / i } else { 10f64.powf(SINR_CAP_DB / 10.0) };
        }
        ratio_db(acc / self.num_users as f64)
    }

    /// Cross-user interference relative to signal, maximized over grid
    /// points (deterministic path only).
    pub fn worst_cross_user_ratio(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for k in 0..self.num_users {
            for m in 0..self.num_subcarriers {
                let c = self.components(k, m);
                let cross = c.cross_user?;
                if c.signal > 0.0 {
                    let r = cross / c.signal;
                    worst = Some(worst.map_or(r, |w: f64| w.max(r)));
                }
            }
        }
        worst
    }

    /// Per-(trial, user) wideband SIR samples in dB.
    pub fn sir_samples_db(&self) -> Vec<f64> {
        self.sir_samples.iter().map(|&s| ratio_db(s)).collect()
    }

    /// Mean serving-set size over trials, if the scenario selected APs.
    pub fn mean_service_size(&self) -> Option<f64> {
        if self.service_sizes.is_empty() {
            None
        } else {
            Some(self.service_sizes.iter().sum::<f64>() / self.service_sizes.len() as f64)
        }
    }
}

/// Empirical CDF over a sample set.
#[derive(Debug, Clone)]
pub struct Cdf {
    sorted: Vec<f64>,
}

/// Sort samples into an empirical CDF. Rejects empty input.
pub fn sir_cdf(samples: &[f64]) -> Result<Cdf> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("CDF needs at least one sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Cdf { sorted })
}

impl Cdf {
    /// Fraction of samples ≤ x.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.sorted.partition_point(|&v| v <= x);
        idx as f64 / self.sorted.len() as f64
    }

    /// Quantile by linear interpolation, `q` in [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let n = self.sorted.len();
        if n == 1 {
            return self.sorted[0];
        }
        let pos = q * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        self.sorted[lo] * (1.0 - frac) + self.sorted[hi] * frac
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Interquartile range.
    pub fn iqr(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::analyze_all;
    use crate::proto::PrototypeFilter;
    use crate::C64;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_samples_make_a_step_cdf() {
        let cdf = sir_cdf(&[3.0; 10]).unwrap();
        assert_eq!(cdf.eval(2.999), 0.0);
        assert_eq!(cdf.eval(3.0), 1.0);
        assert_eq!(cdf.median(), 3.0);
        assert_eq!(cdf.iqr(), 0.0);
    }

    #[test]
    fn symmetric_sample_median_equals_mean() {
        let samples: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.1).collect();
        let cdf = sir_cdf(&samples).unwrap();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((cdf.median() - mean).abs() < 1e-12);
    }

    #[test]
    fn cdf_rejects_empty_input() {
        assert!(sir_cdf(&[]).is_err());
    }

    #[test]
    fn ratio_db_caps_degenerate_values() {
        assert_eq!(ratio_db(0.0), SINR_FLOOR_DB);
        assert_eq!(ratio_db(f64::INFINITY), SINR_CAP_DB);
        assert!((ratio_db(100.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn report_averages_components_over_trials() {
        let mut report = SinrReport::new(1, 2);
        let t1 = vec![
            SinrComponents { signal: 1.0, interference: 0.1, cross_user: Some(0.05), noise: 0.1 },
            SinrComponents { signal: 2.0, interference: 0.2, cross_user: Some(0.1), noise: 0.1 },
        ];
        let t2 = vec![
            SinrComponents { signal: 3.0, interference: 0.3, cross_user: Some(0.15), noise: 0.1 },
            SinrComponents { signal: 4.0, interference: 0.4, cross_user: Some(0.2), noise: 0.1 },
        ];
        report.merge_trial(&t1, None).unwrap();
        report.merge_trial(&t2, None).unwrap();
        let c = report.components(0, 0);
        assert!((c.signal - 2.0).abs() < 1e-12);
        assert!((c.interference - 0.2).abs() < 1e-12);
        assert_eq!(report.trials(), 2);
        assert_eq!(report.sir_samples_db().len(), 2);
    }

    #[test]
    fn merge_rejects_mismatched_grids() {
        let mut report = SinrReport::new(2, 4);
        assert!(report.merge_trial(&[SinrComponents::default(); 3], None).is_err());
    }

    /// The real-part operation halves the noise: demodulating pure
    /// CN(0, σ²) noise yields real values of variance σ²/2 for the
    /// unit-energy prototype.
    #[test]
    fn demodulated_noise_variance_is_half_sigma() {
        let proto = PrototypeFilter::design(16, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let sigma_sq: f64 = 0.8;
        let scale = (sigma_sq / 2.0).sqrt();
        let slots = 800;
        let len = crate::filterbank::frame_len(&proto, slots);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..10 {
            let noise: Vec<C64> = (0..len)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re * scale, im * scale)
                })
                .collect();
            let grid = analyze_all(&noise, &proto, slots).unwrap();
            for m in 0..16 {
                for n in 0..slots {
                    acc += grid.get(m, n).re.powi(2);
                    count += 1;
                }
            }
        }
        let var = acc / count as f64;
        let expect = sigma_sq / 2.0;
        assert!(
            (var - expect).abs() / expect < 0.02,
            "demodulated noise variance {var} vs {expect}"
        );
    }
}
