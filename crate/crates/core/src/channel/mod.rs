//! Statistical channel generation: sampled power-delay profiles,
//! Rayleigh tap realizations, COST-Hata large-scale fading with
//! shadowing, and thermal noise.

pub mod geometry;
pub mod tdlc;

pub use geometry::{place_cellfree, torus_distance, CellFreeGeometry, MIN_LINK_DISTANCE_KM};
pub use tdlc::{parse_table, tdlc_pdp, tdlc_table};

use crate::error::{Error, Result};
use crate::C64;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Boltzmann constant as used in the link budget (J/K).
pub const BOLTZMANN: f64 = 1.3e-23;

/// Average tap powers per sample delay. `total_gain()` is 1 for a
/// normalized profile and β for a denormalized per-link profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    taps: Vec<f64>,
}

impl PowerDelayProfile {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("PDP needs at least one tap".into()));
        }
        if taps.iter().any(|&t| t < 0.0 || !t.is_finite()) {
            return Err(Error::InvalidParameter("PDP taps must be finite and >= 0".into()));
        }
        Ok(Self { taps })
    }

    pub fn single_tap() -> Self {
        Self { taps: vec![1.0] }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn total_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Profile scaled by a nonnegative factor (e.g. β or a correction).
    pub fn scaled(&self, factor: f64) -> Self {
        Self { taps: self.taps.iter().map(|t| t * factor).collect() }
    }
}

/// Per-link second-order statistics for one drop: a PDP and a large-scale
/// gain β for every (user, antenna) pair.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pdps: Vec<PowerDelayProfile>,
    betas: DMatrix<f64>,
    num_users: usize,
    num_antennas: usize,
}

impl ChannelModel {
    /// One PDP per (user, antenna), row-major in the user index.
    pub fn new(pdps: Vec<PowerDelayProfile>, betas: DMatrix<f64>) -> Result<Self> {
        let (num_users, num_antennas) = betas.shape();
        if pdps.len() != num_users * num_antennas {
            return Err(Error::DimensionMismatch(format!(
                "{} PDPs for a {num_users}×{num_antennas} link grid",
                pdps.len()
            )));
        }
        Ok(Self { pdps, betas, num_users, num_antennas })
    }

    /// Co-located model: all antennas of a user share one PDP and β.
    pub fn colocated(per_user: Vec<PowerDelayProfile>, betas: Vec<f64>, num_antennas: usize) -> Result<Self> {
        let num_users = per_user.len();
        if betas.len() != num_users {
            return Err(Error::DimensionMismatch("one β per user expected".into()));
        }
        let mut pdps = Vec::with_capacity(num_users * num_antennas);
        for pdp in &per_user {
            for _ in 0..num_antennas {
                pdps.push(pdp.clone());
            }
        }
        let betas = DMatrix::from_fn(num_users, num_antennas, |k, _| betas[k]);
        Self::new(pdps, betas)
    }

    #[inline]
    pub fn pdp(&self, user: usize, antenna: usize) -> &PowerDelayProfile {
        &self.pdps[user * self.num_antennas + antenna]
    }

    pub fn betas(&self) -> &DMatrix<f64> {
        &self.betas
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn max_len(&self) -> usize {
        self.pdps.iter().map(|p| p.len()).max().unwrap_or(1)
    }
}

/// One drawn set of impulse responses `h[k][i][l]`, zero-padded to a
/// common length.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    taps: Vec<C64>,
    num_users: usize,
    num_antennas: usize,
    len: usize,
}

impl ChannelRealization {
    pub fn zeros(num_users: usize, num_antennas: usize, len: usize) -> Self {
        Self {
            taps: vec![C64::new(0.0, 0.0); num_users * num_antennas * len],
            num_users,
            num_antennas,
            len,
        }
    }

    #[inline]
    pub fn link(&self, user: usize, antenna: usize) -> &[C64] {
        let base = (user * self.num_antennas + antenna) * self.len;
        &self.taps[base..base + self.len]
    }

    #[inline]
    pub fn link_mut(&mut self, user: usize, antenna: usize) -> &mut [C64] {
        let base = (user * self.num_antennas + antenna) * self.len;
        &mut self.taps[base..base + self.len]
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Draw i.i.d. circular complex Gaussian taps with per-tap variance
/// `β_{k,i} · p_{k,i}[l]`. Deterministic under a fixed RNG state.
pub fn draw_channel(model: &ChannelModel, rng: &mut impl Rng) -> ChannelRealization {
    let len = model.max_len();
    let mut h = ChannelRealization::zeros(model.num_users(), model.num_antennas(), len);
    for k in 0..model.num_users() {
        for i in 0..model.num_antennas() {
            let beta = model.betas()[(k, i)];
            let pdp = model.pdp(k, i);
            let link = h.link_mut(k, i);
            for (l, &p) in pdp.taps().iter().enumerate() {
                let sigma = (beta * p / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                link[l] = C64::new(re * sigma, im * sigma);
            }
        }
    }
    h
}

/// Channel gain at the center of subcarrier `m`: the DFT sample
/// `Σ_l h[l] e^{-j2πml/M}`.
pub fn freq_response(h: &[C64], m: usize, num_subcarriers: usize) -> Result<C64> {
    if h.len() > num_subcarriers {
        return Err(Error::InvalidParameter(format!(
            "impulse response of length {} exceeds DFT size {num_subcarriers}",
            h.len()
        )));
    }
    let step = -2.0 * std::f64::consts::PI * m as f64 / num_subcarriers as f64;
    let mut acc = C64::new(0.0, 0.0);
    for (l, &tap) in h.iter().enumerate() {
        acc += tap * C64::from_polar(1.0, step * l as f64);
    }
    Ok(acc)
}

/// COST-Hata large-scale gain: `10 log10 β = -135 - 35 log10(d) - X` with
/// `d` in km and `X` the shadowing term in dB. Distances below the 10 m
/// floor are clamped to it.
pub fn cost_hata_beta(distance_km: f64, shadow_db: f64) -> f64 {
    let d = distance_km.max(MIN_LINK_DISTANCE_KM);
    let beta_db = -135.0 - 35.0 * d.log10() - shadow_db;
    10f64.powf(beta_db / 10.0)
}

/// Thermal noise power `σ² = T · k_B · B · NF` in watts.
pub fn noise_variance(bandwidth_hz: f64, noise_figure_db: f64, temperature_k: f64) -> f64 {
    temperature_k * BOLTZMANN * bandwidth_hz * 10f64.powf(noise_figure_db / 10.0)
}

/// Per-user RMS delay spread drawn uniformly from `[lo, hi]` ns.
pub fn draw_rms_delay(range_ns: (f64, f64), rng: &mut impl Rng) -> f64 {
    let (lo, hi) = range_ns;
    if hi <= lo {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rustfft::FftPlanner;

    #[test]
    fn tap_variances_match_beta_times_pdp() {
        let pdp = PowerDelayProfile::new(vec![0.5, 0.3, 0.2]).unwrap();
        let beta = 1.7;
        let model = ChannelModel::colocated(vec![pdp.clone()], vec![beta], 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let draws = 100_000;
        let mut acc = [0.0; 3];
        for _ in 0..draws {
            let h = draw_channel(&model, &mut rng);
            for (l, a) in acc.iter_mut().enumerate() {
                *a += h.link(0, 0)[l].norm_sqr();
            }
        }
        for (l, a) in acc.iter().enumerate() {
            let sample = a / draws as f64;
            let expect = beta * pdp.taps()[l];
            assert!(
                (sample - expect).abs() / expect < 0.03,
                "tap {l}: sample {sample} vs {expect}"
            );
        }
    }

    #[test]
    fn zero_beta_gives_zero_channel() {
        let pdp = PowerDelayProfile::new(vec![0.6, 0.4]).unwrap();
        let model = ChannelModel::colocated(vec![pdp], vec![0.0], 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let h = draw_channel(&model, &mut rng);
        for i in 0..2 {
            assert!(h.link(0, i).iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn distinct_links_are_uncorrelated() {
        let pdp = PowerDelayProfile::single_tap();
        let model = ChannelModel::colocated(vec![pdp.clone(), pdp], vec![1.0, 1.0], 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut cross = C64::new(0.0, 0.0);
        let mut pow_a = 0.0;
        let mut pow_b = 0.0;
        for _ in 0..draws {
            let h = draw_channel(&model, &mut rng);
            let a = h.link(0, 0)[0];
            let b = h.link(1, 0)[0];
            cross += a * b.conj();
            pow_a += a.norm_sqr();
            pow_b += b.norm_sqr();
        }
        let corr = cross.norm() / (pow_a * pow_b).sqrt();
        assert!(corr <= 0.02, "cross-correlation {corr}");
    }

    #[test]
    fn draws_are_deterministic_under_seed() {
        let pdp = PowerDelayProfile::new(vec![0.7, 0.3]).unwrap();
        let model = ChannelModel::colocated(vec![pdp], vec![1.0], 3).unwrap();
        let a = draw_channel(&model, &mut ChaCha12Rng::seed_from_u64(9));
        let b = draw_channel(&model, &mut ChaCha12Rng::seed_from_u64(9));
        for i in 0..3 {
            assert_eq!(a.link(0, i), b.link(0, i));
        }
    }

    #[test]
    fn freq_response_of_impulse_is_flat() {
        let h = [C64::new(1.0, 0.0)];
        for m in 0..8 {
            assert!((freq_response(&h, m, 8).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn freq_response_of_delayed_impulse() {
        let h = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let got = freq_response(&h, 1, 4).unwrap();
        assert!((got - C64::new(0.0, -1.0)).norm() < 1e-15, "expected -j, got {got}");
    }

    #[test]
    fn freq_response_matches_fft_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let m_total = 64;
        let h: Vec<C64> = (0..14)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut buf = vec![C64::new(0.0, 0.0); m_total];
        buf[..h.len()].copy_from_slice(&h);
        FftPlanner::new().plan_fft_forward(m_total).process(&mut buf);
        for m in 0..m_total {
            let direct = freq_response(&h, m, m_total).unwrap();
            assert!((direct - buf[m]).norm() < 1e-12, "bin {m}");
        }
    }

    #[test]
    fn freq_response_rejects_long_responses() {
        let h = vec![C64::new(1.0, 0.0); 65];
        assert!(freq_response(&h, 0, 64).is_err());
    }

    #[test]
    fn cost_hata_reference_points() {
        let b = cost_hata_beta(1.0, 0.0);
        assert!((10.0 * b.log10() + 135.0).abs() < 1e-9);
        let b = cost_hata_beta(0.1, 0.0);
        assert!((10.0 * b.log10() + 100.0).abs() < 1e-9);
        let b = cost_hata_beta(1.0, 8.0);
        assert!((10.0 * b.log10() + 143.0).abs() < 1e-9);
        // Distances below the floor clamp to 10 m.
        assert_eq!(cost_hata_beta(0.001, 0.0), cost_hata_beta(0.01, 0.0));
    }

    #[test]
    fn noise_variance_reference_point() {
        // 290 K · 1.3e-23 · 20 MHz · 10^{0.9}
        let v = noise_variance(20e6, 9.0, 290.0);
        assert!((v - 5.98924e-13).abs() / 5.98924e-13 < 1e-4, "{v:e}");
        // NF = 0 dB leaves the bare thermal floor.
        let floor = noise_variance(20e6, 0.0, 290.0);
        assert!((floor - 290.0 * BOLTZMANN * 20e6).abs() < 1e-25);
        // Linear in bandwidth.
        assert!((noise_variance(40e6, 9.0, 290.0) - 2.0 * v).abs() / v < 1e-12);
    }

    #[test]
    fn rms_delay_draws_stay_in_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let d = draw_rms_delay((90.0, 110.0), &mut rng);
            assert!((90.0..=110.0).contains(&d));
        }
        assert_eq!(draw_rms_delay((100.0, 100.0), &mut rng), 100.0);
    }
}
