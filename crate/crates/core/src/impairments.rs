//! Channel-estimation error and reciprocity-calibration error models.
//!
//! Calibration errors are independent per antenna, per subcarrier, and
//! per direction: a magnitude `ξ` uniform in a band around 1 and a phase
//! `φ` uniform in a symmetric interval. Transformed to the time domain
//! they become per-chain impulse responses `c_t[l]`, `c_r[l]` that
//! convolve the propagation channel (uplink through the receive chain,
//! downlink through the transmit chain). In the large-antenna limit the
//! expected impulse collapses to `λ·δ[l]` with `λ = E{ξ}·E{e^{jφ}}`.
//!
//! Channel-estimation error is i.i.d. complex Gaussian per tap with
//! variance `σ_et²`; per subcarrier it accumulates to `σ_ef² = L·σ_et²`.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

/// Per-tap estimation-error statistics.
#[derive(Debug, Clone, Copy)]
pub struct EstimationErrorModel {
    sigma_et_sq: f64,
}

impl EstimationErrorModel {
    pub fn new(sigma_et_sq: f64) -> Result<Self> {
        if sigma_et_sq < 0.0 || !sigma_et_sq.is_finite() {
            return Err(Error::InvalidParameter("σ_et² must be finite and >= 0".into()));
        }
        Ok(Self { sigma_et_sq })
    }

    /// Convention for deriving σ_et² from a pilot budget:
    /// `σ_et² = σ_noise² / (K · L · pilot_boost)`.
    pub fn from_pilot_snr(noise_var: f64, num_users: usize, channel_len: usize, pilot_boost: f64) -> Result<Self> {
        if num_users == 0 || channel_len == 0 || pilot_boost <= 0.0 {
            return Err(Error::InvalidParameter("pilot convention needs K, L >= 1 and boost > 0".into()));
        }
        Self::new(noise_var / (num_users as f64 * channel_len as f64 * pilot_boost))
    }

    pub fn sigma_et_sq(&self) -> f64 {
        self.sigma_et_sq
    }

    /// Per-subcarrier error variance for a length-`len` channel.
    pub fn sigma_ef_sq(&self, len: usize) -> f64 {
        len as f64 * self.sigma_et_sq
    }
}

/// Uniform draw ranges of the calibration error.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationRanges {
    pub xi_lo: f64,
    pub xi_hi: f64,
    /// Phase bound `a`: φ uniform in [-a, a] (radians).
    pub phi_max: f64,
}

impl CalibrationRanges {
    /// The measurement-backed defaults: ξ ∈ [0.98, 1.02], φ ∈ [-2π/9, 2π/9].
    pub fn standard() -> Self {
        Self { xi_lo: 0.98, xi_hi: 1.02, phi_max: 2.0 * std::f64::consts::PI / 9.0 }
    }

    /// Degenerate ranges that produce an exact identity calibration.
    pub fn identity() -> Self {
        Self { xi_lo: 1.0, xi_hi: 1.0, phi_max: 0.0 }
    }
}

/// Mean complex gain of the calibration error, `λ = E{ξ}·E{e^{jφ}}`.
#[derive(Debug, Clone, Copy)]
pub struct LambdaStat {
    pub lambda: f64,
}

/// Closed form of λ for uniform draws: `mean(ξ) · sin(a)/a`.
pub fn lambda_stat(ranges: &CalibrationRanges) -> Result<LambdaStat> {
    if ranges.phi_max < 0.0 {
        return Err(Error::InvalidParameter("phase bound must be >= 0".into()));
    }
    let mean_xi = 0.5 * (ranges.xi_lo + ranges.xi_hi);
    let a = ranges.phi_max;
    let sinc = if a == 0.0 { 1.0 } else { a.sin() / a };
    Ok(LambdaStat { lambda: mean_xi * sinc })
}

/// Which radio chain the calibration error sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uplink,
    Downlink,
}

/// Drawn calibration state: per-antenna, per-subcarrier complex gains for
/// both chains and their time-domain impulse responses.
#[derive(Debug, Clone)]
pub struct CalibrationProfile {
    tx_gains: Vec<C64>,
    rx_gains: Vec<C64>,
    tx_impulse: Vec<C64>,
    rx_impulse: Vec<C64>,
    num_antennas: usize,
    num_subcarriers: usize,
}

impl CalibrationProfile {
    /// Exact identity profile (`ξ ≡ 1`, `φ ≡ 0`, `c[l] = δ[l]`).
    pub fn identity(num_subcarriers: usize, num_antennas: usize) -> Self {
        let gains = vec![C64::new(1.0, 0.0); num_antennas * num_subcarriers];
        let mut impulse = vec![C64::new(0.0, 0.0); num_antennas * num_subcarriers];
        for i in 0..num_antennas {
            impulse[i * num_subcarriers] = C64::new(1.0, 0.0);
        }
        Self {
            tx_gains: gains.clone(),
            rx_gains: gains,
            tx_impulse: impulse.clone(),
            rx_impulse: impulse,
            num_antennas,
            num_subcarriers,
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    /// Subcarrier gain `ξ e^{jφ}` of one chain.
    #[inline]
    pub fn gain(&self, direction: Direction, antenna: usize, m: usize) -> C64 {
        let idx = antenna * self.num_subcarriers + m;
        match direction {
            Direction::Downlink => self.tx_gains[idx],
            Direction::Uplink => self.rx_gains[idx],
        }
    }

    /// Length-M impulse response of one chain.
    #[inline]
    pub fn impulse(&self, direction: Direction, antenna: usize) -> &[C64] {
        let base = antenna * self.num_subcarriers;
        match direction {
            Direction::Downlink => &self.tx_impulse[base..base + self.num_subcarriers],
            Direction::Uplink => &self.rx_impulse[base..base + self.num_subcarriers],
        }
    }
}

/// Draw independent calibration errors for every (antenna, subcarrier,
/// chain) and derive the impulse responses by inverse DFT.
pub fn draw_calibration(
    num_subcarriers: usize,
    num_antennas: usize,
    ranges: &CalibrationRanges,
    rng: &mut impl Rng,
) -> Result<CalibrationProfile> {
    if ranges.xi_hi < ranges.xi_lo || ranges.xi_lo < 0.0 {
        return Err(Error::InvalidParameter("bad magnitude range for calibration error".into()));
    }
    if ranges.phi_max < 0.0 {
        return Err(Error::InvalidParameter("phase bound must be >= 0".into()));
    }
    let m = num_subcarriers;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(m);

    let draw_chain = |rng: &mut dyn rand::RngCore| {
        let mut gains = Vec::with_capacity(num_antennas * m);
        let mut impulse = Vec::with_capacity(num_antennas * m);
        for _ in 0..num_antennas {
            let start = gains.len();
            for _ in 0..m {
                let xi = ranges.xi_lo + (ranges.xi_hi - ranges.xi_lo) * rng.random::<f64>();
                let phi = ranges.phi_max * (2.0 * rng.random::<f64>() - 1.0);
                gains.push(C64::from_polar(xi, phi));
            }
            let mut c = gains[start..start + m].to_vec();
            ifft.process(&mut c);
            let scale = 1.0 / m as f64;
            impulse.extend(c.into_iter().map(|v| v * scale));
        }
        (gains, impulse)
    };

    let (tx_gains, tx_impulse) = draw_chain(rng);
    let (rx_gains, rx_impulse) = draw_chain(rng);
    Ok(CalibrationProfile {
        tx_gains,
        rx_gains,
        tx_impulse,
        rx_impulse,
        num_antennas,
        num_subcarriers: m,
    })
}

/// Convolve each link with the calibration impulse response of its
/// antenna chain: `h ⋆ c_r` for the uplink, `c_t ⋆ h` for the downlink.
/// The output keeps the full length `L + M - 1`, which preserves the
/// per-subcarrier identity `H^{u/d}_m = ξ^m e^{jφ^m} H_m` exactly.
pub fn apply_reciprocity(
    h: &ChannelRealization,
    cal: &CalibrationProfile,
    direction: Direction,
) -> Result<ChannelRealization> {
    if cal.num_antennas() != h.num_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "calibration for {} antennas, channel has {}",
            cal.num_antennas(),
            h.num_antennas()
        )));
    }
    let out_len = h.len() + cal.num_subcarriers() - 1;
    let mut out = ChannelRealization::zeros(h.num_users(), h.num_antennas(), out_len);
    for k in 0..h.num_users() {
        for i in 0..h.num_antennas() {
            let c = cal.impulse(direction, i);
            let src = h.link(k, i);
            let dst = out.link_mut(k, i);
            for (l, &a) in src.iter().enumerate() {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for (s, &b) in c.iter().enumerate() {
                    dst[l + s] += a * b;
                }
            }
        }
    }
    Ok(out)
}

/// Add i.i.d. CN(0, σ_et²) estimation error to the first `error_taps`
/// taps of every link (the span the uplink estimator resolves).
pub fn add_estimation_error(
    h: &ChannelRealization,
    model: &EstimationErrorModel,
    error_taps: usize,
    rng: &mut impl Rng,
) -> ChannelRealization {
    let mut out = h.clone();
    if model.sigma_et_sq() == 0.0 {
        return out;
    }
    let sigma = (model.sigma_et_sq() / 2.0).sqrt();
    let span = error_taps.min(h.len());
    for k in 0..h.num_users() {
        for i in 0..h.num_antennas() {
            let link = out.link_mut(k, i);
            for tap in link.iter_mut().take(span) {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                *tap += C64::new(re * sigma, im * sigma);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, ChannelModel, PowerDelayProfile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// DTFT at a subcarrier bin, valid for any response length.
    fn dtft_bin(h: &[C64], m: usize, num_subcarriers: usize) -> C64 {
        let step = -2.0 * std::f64::consts::PI * m as f64 / num_subcarriers as f64;
        h.iter()
            .enumerate()
            .map(|(l, &t)| t * C64::from_polar(1.0, step * l as f64))
            .sum()
    }

    #[test]
    fn flat_spectrum_gives_delta_impulse() {
        let cal = draw_calibration(16, 2, &CalibrationRanges::identity(), &mut ChaCha12Rng::seed_from_u64(1)).unwrap();
        for i in 0..2 {
            let c = cal.impulse(Direction::Downlink, i);
            assert!((c[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
            for &tap in &c[1..] {
                assert!(tap.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn impulse_dft_reproduces_drawn_gains() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let m = 32;
        let cal = draw_calibration(m, 3, &CalibrationRanges::standard(), &mut rng).unwrap();
        for i in 0..3 {
            for sub in 0..m {
                let from_impulse = dtft_bin(cal.impulse(Direction::Uplink, i), sub, m);
                let drawn = cal.gain(Direction::Uplink, i, sub);
                assert!((from_impulse - drawn).norm() < 1e-12, "antenna {i} subcarrier {sub}");
            }
        }
    }

    #[test]
    fn mean_leading_tap_converges_to_lambda() {
        // Closed form: λ = 1.0 · sin(2π/9)/(2π/9) = 0.9207254289585293.
        let ranges = CalibrationRanges::standard();
        let lambda = lambda_stat(&ranges).unwrap().lambda;
        assert!((lambda - 0.9207254289585293).abs() < 1e-12);

        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let draws = 10_000;
        let mut mean0 = C64::new(0.0, 0.0);
        let mut mean1 = C64::new(0.0, 0.0);
        for _ in 0..draws {
            let cal = draw_calibration(64, 1, &ranges, &mut rng).unwrap();
            let c = cal.impulse(Direction::Downlink, 0);
            mean0 += c[0];
            mean1 += c[1];
        }
        mean0 /= draws as f64;
        mean1 /= draws as f64;
        assert!((mean0.re - lambda).abs() <= 0.01, "E{{c[0]}} = {mean0}");
        assert!(mean0.im.abs() <= 0.01);
        assert!(mean1.norm() <= 0.01, "E{{c[1]}} should vanish, got {mean1}");
    }

    #[test]
    fn lambda_limits() {
        let no_error = CalibrationRanges { xi_lo: 1.0, xi_hi: 1.0, phi_max: 0.0 };
        assert_eq!(lambda_stat(&no_error).unwrap().lambda, 1.0);
        let full_circle = CalibrationRanges { xi_lo: 1.0, xi_hi: 1.0, phi_max: std::f64::consts::PI };
        assert!(lambda_stat(&full_circle).unwrap().lambda.abs() < 1e-15);
    }

    #[test]
    fn identity_calibration_leaves_channel_unchanged() {
        let pdp = PowerDelayProfile::new(vec![0.5, 0.5]).unwrap();
        let model = ChannelModel::colocated(vec![pdp], vec![1.0], 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let h = draw_channel(&model, &mut rng);
        let cal = CalibrationProfile::identity(8, 2);
        let hd = apply_reciprocity(&h, &cal, Direction::Downlink).unwrap();
        for i in 0..2 {
            let src = h.link(0, i);
            let dst = hd.link(0, i);
            for l in 0..src.len() {
                assert!((src[l] - dst[l]).norm() < 1e-14);
            }
            for &tap in &dst[src.len()..] {
                assert!(tap.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn single_tap_channel_returns_the_impulse() {
        let mut h = ChannelRealization::zeros(1, 1, 1);
        h.link_mut(0, 0)[0] = C64::new(1.0, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let cal = draw_calibration(16, 1, &CalibrationRanges::standard(), &mut rng).unwrap();
        let hd = apply_reciprocity(&h, &cal, Direction::Downlink).unwrap();
        let c = cal.impulse(Direction::Downlink, 0);
        for (l, &tap) in c.iter().enumerate() {
            assert!((hd.link(0, 0)[l] - tap).norm() < 1e-14);
        }
    }

    #[test]
    fn frequency_domain_identity_is_exact() {
        let m = 16;
        let pdp = PowerDelayProfile::new(vec![0.4, 0.3, 0.3]).unwrap();
        let model = ChannelModel::colocated(vec![pdp], vec![1.0], 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let h = draw_channel(&model, &mut rng);
        let cal = draw_calibration(m, 2, &CalibrationRanges::standard(), &mut rng).unwrap();
        for (direction, chain) in [(Direction::Downlink, Direction::Downlink), (Direction::Uplink, Direction::Uplink)] {
            let hx = apply_reciprocity(&h, &cal, direction).unwrap();
            for i in 0..2 {
                for sub in 0..m {
                    let lhs = dtft_bin(hx.link(0, i), sub, m);
                    let rhs = cal.gain(chain, i, sub) * dtft_bin(h.link(0, i), sub, m);
                    assert!((lhs - rhs).norm() < 1e-12, "antenna {i} subcarrier {sub}");
                }
            }
        }
    }

    #[test]
    fn zero_sigma_estimation_error_is_identity() {
        let pdp = PowerDelayProfile::new(vec![1.0]).unwrap();
        let model = ChannelModel::colocated(vec![pdp], vec![1.0], 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let h = draw_channel(&model, &mut rng);
        let est = EstimationErrorModel::new(0.0).unwrap();
        let hh = add_estimation_error(&h, &est, 1, &mut rng);
        assert_eq!(h.link(0, 0), hh.link(0, 0));
    }

    #[test]
    fn subcarrier_error_variance_is_len_times_sigma_et() {
        let len = 6;
        let sigma_et_sq = 0.02;
        let est = EstimationErrorModel::new(sigma_et_sq).unwrap();
        assert!((est.sigma_ef_sq(len) - len as f64 * sigma_et_sq).abs() < 1e-15);

        let h = ChannelRealization::zeros(1, 1, len);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let draws = 100_000;
        let m = 64;
        let mut acc = 0.0;
        for _ in 0..draws {
            let hh = add_estimation_error(&h, &est, len, &mut rng);
            acc += dtft_bin(hh.link(0, 0), 5, m).norm_sqr();
        }
        let sample = acc / draws as f64;
        let expect = est.sigma_ef_sq(len);
        assert!(
            (sample - expect).abs() / expect < 0.03,
            "ΔH variance {sample} vs {expect}"
        );
    }

    #[test]
    fn estimation_error_is_uncorrelated_with_channel() {
        let pdp = PowerDelayProfile::new(vec![1.0]).unwrap();
        let model = ChannelModel::colocated(vec![pdp], vec![1.0], 1).unwrap();
        let est = EstimationErrorModel::new(0.5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let draws = 100_000;
        let mut cross = C64::new(0.0, 0.0);
        let mut pow_h = 0.0;
        let mut pow_e = 0.0;
        for _ in 0..draws {
            let h = draw_channel(&model, &mut rng);
            let hh = add_estimation_error(&h, &est, 1, &mut rng);
            let err = hh.link(0, 0)[0] - h.link(0, 0)[0];
            cross += h.link(0, 0)[0] * err.conj();
            pow_h += h.link(0, 0)[0].norm_sqr();
            pow_e += err.norm_sqr();
        }
        let corr = cross.norm() / (pow_h * pow_e).sqrt();
        assert!(corr <= 0.02, "correlation {corr}");
    }

    #[test]
    fn pilot_snr_convention() {
        let est = EstimationErrorModel::from_pilot_snr(0.01, 8, 14, 10.0).unwrap();
        assert!((est.sigma_et_sq() - 0.01 / (8.0 * 14.0 * 10.0)).abs() < 1e-18);
        assert!(EstimationErrorModel::from_pilot_snr(0.01, 0, 14, 10.0).is_err());
    }
}
