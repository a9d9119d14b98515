//! Fractionally spaced prefilter (FSP) design.
//!
//! Stage one of the two-stage precoder: a short filter with half-symbol
//! (M/2-sample) tap spacing per user and subcarrier, designed to flatten
//! the equivalent channel across the subcarrier band including the
//! overlap with the adjacent bands. The design is a weighted
//! least-squares fit on a frequency grid spanning `[m-1, m+1]` subcarrier
//! spacings with the prototype power spectrum as weight:
//!
//! ```text
//! min_a Σ_g w_g |A(ω_g) H(ω_g) - T(ω_g)|² + μ·tr/L · Σ|a|²
//! ```
//!
//! where `T` is a pure delay of ⌊L/2⌋ half-symbols referenced to the
//! subcarrier center, so the designed taps for subcarrier `m` are exactly
//! the baseband taps rotated by `e^{jπmn}`. The regularizer `μ` is the
//! noise-to-signal ratio in MMSE mode and 0 in ZF mode; the trace scaling
//! keeps the design equivariant under target scaling, which is what lets
//! a statistical correction factor be absorbed as a pure tap rescale.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::filterbank::jpow;
use crate::proto::PrototypeFilter;
use crate::C64;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// ZF (unregularized) or MMSE (regularized) least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FspMode {
    Zf,
    Mmse,
}

/// Prefilter design parameters.
#[derive(Debug, Clone, Copy)]
pub struct FspDesignSpec {
    pub mode: FspMode,
    pub length: usize,
    /// Noise-to-signal ratio used as the MMSE regularizer.
    pub noise_weight: f64,
    /// Frequency-grid density per subcarrier spacing.
    pub grid_per_spacing: usize,
}

impl FspDesignSpec {
    pub fn zf(length: usize) -> Self {
        Self { mode: FspMode::Zf, length, noise_weight: 0.0, grid_per_spacing: 8 }
    }

    pub fn mmse(length: usize, noise_weight: f64) -> Self {
        Self { mode: FspMode::Mmse, length, noise_weight, grid_per_spacing: 8 }
    }
}

/// Group delay of a length-`len` prefilter, in half-symbols.
pub fn fsp_delay(len: usize) -> usize {
    len / 2
}

/// Receiver phase rotation compensating the ⌊L/2⌋ half-symbol latency of
/// the prefilter (a delay of D half-symbols advances the OQAM phase
/// pattern by `j^D`).
pub fn latency_rotation(len: usize) -> C64 {
    jpow(fsp_delay(len) as i64)
}

/// Reusable design state: the frequency grid, prototype weights, basis
/// and target are the same for every user and subcarrier.
#[derive(Debug, Clone)]
pub struct FspDesigner {
    spec: FspDesignSpec,
    num_subcarriers: usize,
    /// Offsets from the subcarrier center, rad/sample.
    nu_grid: Vec<f64>,
    weights: Vec<f64>,
    /// `E[g][n] = e^{-j ν_g n M/2}`.
    basis: DMatrix<C64>,
    /// `T[g] = e^{-j ν_g D M/2}`.
    target: DVector<C64>,
}

impl FspDesigner {
    pub fn new(proto: &PrototypeFilter, spec: FspDesignSpec) -> Result<Self> {
        if spec.length == 0 {
            return Err(Error::InvalidParameter("prefilter needs at least one tap".into()));
        }
        if spec.noise_weight < 0.0 {
            return Err(Error::InvalidParameter("noise weight must be >= 0".into()));
        }
        if spec.grid_per_spacing < 2 {
            return Err(Error::InvalidParameter("grid density must be >= 2 points per spacing".into()));
        }
        let points = 2 * spec.grid_per_spacing + 1;
        if spec.length > points {
            return Err(Error::InvalidParameter(format!(
                "prefilter length {} exceeds the {} design grid points; raise grid_per_spacing",
                spec.length, points
            )));
        }
        let m_sub = proto.num_subcarriers();
        let spacing = 2.0 * PI / m_sub as f64;
        let half_sym = m_sub as f64 / 2.0;
        let delay = fsp_delay(spec.length) as f64;

        let nu_grid: Vec<f64> = (0..points)
            .map(|g| -spacing + 2.0 * spacing * g as f64 / (points - 1) as f64)
            .collect();
        let weights: Vec<f64> = nu_grid.iter().map(|&nu| proto.spectrum_at(nu).norm_sqr()).collect();
        let basis = DMatrix::from_fn(points, spec.length, |g, n| {
            C64::from_polar(1.0, -nu_grid[g] * n as f64 * half_sym)
        });
        let target = DVector::from_fn(points, |g, _| C64::from_polar(1.0, -nu_grid[g] * delay * half_sym));

        Ok(Self { spec, num_subcarriers: m_sub, nu_grid, weights, basis, target })
    }

    pub fn spec(&self) -> &FspDesignSpec {
        &self.spec
    }

    /// Channel frequency response on the design grid of subcarrier `m`.
    fn channel_on_grid(&self, target_taps: &[C64], m: usize) -> Vec<C64> {
        let omega_m = 2.0 * PI * m as f64 / self.num_subcarriers as f64;
        self.nu_grid
            .iter()
            .map(|&nu| {
                let omega = omega_m + nu;
                target_taps
                    .iter()
                    .enumerate()
                    .map(|(l, &t)| t * C64::from_polar(1.0, -omega * l as f64))
                    .sum()
            })
            .collect()
    }

    /// Design the prefilter taps for subcarrier `m` against an equivalent
    /// channel (or frequency-shifted PDP) given as full-rate taps.
    pub fn design(&self, target_taps: &[C64], m: usize) -> Result<Vec<C64>> {
        if target_taps.is_empty() || target_taps.iter().all(|t| t.norm_sqr() == 0.0) {
            return Err(Error::InvalidParameter("prefilter target channel is zero".into()));
        }
        let h_grid = self.channel_on_grid(target_taps, m);
        let len = self.spec.length;
        let points = self.nu_grid.len();

        // Normal equations of the weighted LS fit in baseband coordinates.
        let mut gram: DMatrix<C64> = DMatrix::zeros(len, len);
        let mut rhs: DVector<C64> = DVector::zeros(len);
        for g in 0..points {
            let w = self.weights[g];
            let row: Vec<C64> = (0..len).map(|n| h_grid[g] * self.basis[(g, n)]).collect();
            for a in 0..len {
                rhs[a] += row[a].conj() * self.target[g] * w;
                for b in 0..len {
                    gram[(a, b)] += row[a].conj() * row[b] * w;
                }
            }
        }
        let mu = match self.spec.mode {
            FspMode::Zf => 0.0,
            FspMode::Mmse => self.spec.noise_weight,
        };
        if mu > 0.0 {
            let trace_scale = (0..len).map(|a| gram[(a, a)].re).sum::<f64>() / len as f64;
            for a in 0..len {
                gram[(a, a)] += C64::new(mu * trace_scale, 0.0);
            }
        }
        let chol = nalgebra::linalg::Cholesky::new(gram).ok_or_else(|| {
            Error::Numerical("singular prefilter normal equations; increase noise_weight".into())
        })?;
        let baseband = chol.solve(&rhs);

        // Rotate to subcarrier m: a_m[n] = b[n] e^{jπmn}.
        Ok(baseband
            .iter()
            .enumerate()
            .map(|(n, &b)| b * jpow(2 * (m as i64) * (n as i64)))
            .collect())
    }

    /// In-band flatness of the cascade `|A(ω)H(ω)|`: max/min over the
    /// grid points inside the subcarrier band proper (|ν| ≤ π/M).
    pub fn band_ripple(&self, fsp_taps: &[C64], target_taps: &[C64], m: usize) -> f64 {
        let h_grid = self.channel_on_grid(target_taps, m);
        let half_sym = self.num_subcarriers as f64 / 2.0;
        let omega_m = 2.0 * PI * m as f64 / self.num_subcarriers as f64;
        let in_band = PI / self.num_subcarriers as f64 + 1e-12;
        let mut lo = f64::MAX;
        let mut hi: f64 = 0.0;
        for (g, &nu) in self.nu_grid.iter().enumerate() {
            if nu.abs() > in_band {
                continue;
            }
            let omega = omega_m + nu;
            let a: C64 = fsp_taps
                .iter()
                .enumerate()
                .map(|(n, &t)| t * C64::from_polar(1.0, -omega * n as f64 * half_sym))
                .sum();
            let mag = (a * h_grid[g]).norm();
            lo = lo.min(mag);
            hi = hi.max(mag);
        }
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Weighted least-squares residual of a designed prefilter (the
    /// quantity the design minimizes, reported for diagnostics). Taps are
    /// rotated back to baseband coordinates, where the target lives.
    pub fn weighted_residual(&self, fsp_taps: &[C64], target_taps: &[C64], m: usize) -> f64 {
        let h_grid = self.channel_on_grid(target_taps, m);
        let half_sym = self.num_subcarriers as f64 / 2.0;
        let mut acc = 0.0;
        for (g, &nu) in self.nu_grid.iter().enumerate() {
            let a_base: C64 = fsp_taps
                .iter()
                .enumerate()
                .map(|(n, &t)| {
                    t * jpow(-2 * (m as i64) * (n as i64))
                        * C64::from_polar(1.0, -nu * n as f64 * half_sym)
                })
                .sum();
            acc += self.weights[g] * (a_base * h_grid[g] - self.target[g]).norm_sqr();
        }
        acc
    }
}

/// Shift baseband prefilter taps to subcarrier `m`:
/// `a_m[n] = a_0[n] e^{jπmn}`.
pub fn baseband_shift_fsp(baseband: &[C64], m: usize) -> Vec<C64> {
    baseband
        .iter()
        .enumerate()
        .map(|(n, &b)| b * jpow(2 * (m as i64) * (n as i64)))
        .collect()
}

/// Symbol-domain coefficients that realize the signal-domain taps when
/// convolved with the OQAM symbol stream of subcarrier `m`:
/// `c[p] = a[p] e^{-jπmp} (-j)^p`.
pub fn symbol_taps(fsp_taps: &[C64], m: usize) -> Vec<C64> {
    fsp_taps
        .iter()
        .enumerate()
        .map(|(p, &a)| a * jpow(-2 * (m as i64) * (p as i64) - p as i64))
        .collect()
}

/// Prefilter taps upsampled to full rate (spacing M/2 samples).
pub fn upsampled_taps(fsp_taps: &[C64], num_subcarriers: usize) -> Vec<C64> {
    let half = num_subcarriers / 2;
    let mut out = vec![C64::new(0.0, 0.0); (fsp_taps.len() - 1) * half + 1];
    for (p, &a) in fsp_taps.iter().enumerate() {
        out[p * half] = a;
    }
    out
}

/// Per-(user, subcarrier) prefilter storage.
#[derive(Debug, Clone)]
pub struct FspBank {
    taps: Vec<C64>,
    num_users: usize,
    num_subcarriers: usize,
    len: usize,
}

impl FspBank {
    pub fn from_fn(
        num_users: usize,
        num_subcarriers: usize,
        len: usize,
        mut f: impl FnMut(usize, usize) -> Result<Vec<C64>>,
    ) -> Result<Self> {
        let mut taps = Vec::with_capacity(num_users * num_subcarriers * len);
        for k in 0..num_users {
            for m in 0..num_subcarriers {
                let t = f(k, m)?;
                if t.len() != len {
                    return Err(Error::DimensionMismatch(format!(
                        "prefilter for ({k},{m}) has {} taps, expected {len}",
                        t.len()
                    )));
                }
                taps.extend(t);
            }
        }
        Ok(Self { taps, num_users, num_subcarriers, len })
    }

    /// Pass-through bank (single-tap transmission, no prefiltering).
    pub fn identity(num_users: usize, num_subcarriers: usize) -> Self {
        Self {
            taps: vec![C64::new(1.0, 0.0); num_users * num_subcarriers],
            num_users,
            num_subcarriers,
            len: 1,
        }
    }

    #[inline]
    pub fn taps(&self, user: usize, m: usize) -> &[C64] {
        let base = (user * self.num_subcarriers + m) * self.len;
        &self.taps[base..base + self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn delay(&self) -> usize {
        fsp_delay(self.len)
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }
}

/// Co-located statistical correction: scale the design PDP by
/// `√q_k λ² / (β_k + σ_ef²)` so the prefilter absorbs the mean gain of
/// estimation and calibration errors.
pub fn corrected_pdp_colocated(
    pdp: &[f64],
    q_k: f64,
    beta_k: f64,
    lambda: f64,
    sigma_ef_sq: f64,
) -> Result<Vec<f64>> {
    let denom = beta_k + sigma_ef_sq;
    if denom <= 0.0 {
        return Err(Error::InvalidParameter("correction factor needs β + σ_ef² > 0".into()));
    }
    let scale = q_k.sqrt() * lambda * lambda / denom;
    Ok(pdp.iter().map(|&p| p * scale).collect())
}

/// Cell-free correction term: remove the estimation-error bias from the
/// estimated self equivalent channel,
///
/// ```text
/// h ≈ ĥ − [N λ σ_et² · mean_i √q_{k,i} / (Σ_i β_{k,i} + N σ_ef²)] e^{j2πlm/M}
/// ```
///
/// applied on the taps the uplink estimator resolves and only for the
/// intended user (`same_user`). `sqrt_q_sum` is `Σ_i √q_{k,i}` over the
/// serving antennas, so `N · mean_i √q = sqrt_q_sum`.
#[allow(clippy::too_many_arguments)]
pub fn corrected_eqch_cellfree(
    h_hat: &[C64],
    m: usize,
    num_subcarriers: usize,
    lambda: f64,
    sigma_et_sq: f64,
    sqrt_q_sum: f64,
    beta_sum: f64,
    num_antennas: usize,
    sigma_ef_sq: f64,
    error_taps: usize,
    same_user: bool,
) -> Vec<C64> {
    let mut out = h_hat.to_vec();
    if !same_user || sigma_et_sq == 0.0 {
        return out;
    }
    let coeff = lambda * sigma_et_sq * sqrt_q_sum / (beta_sum + num_antennas as f64 * sigma_ef_sq);
    let step = 2.0 * PI * m as f64 / num_subcarriers as f64;
    for (l, tap) in out.iter_mut().enumerate().take(error_taps) {
        *tap -= coeff * C64::from_polar(1.0, step * l as f64);
    }
    out
}

/// PDP estimate from channel estimates: `p̂[l] = (1/N) Σ_i |ĥ_{k,i}[l]|²`.
pub fn estimate_pdp(h_hat: &ChannelRealization, user: usize) -> Vec<f64> {
    let n = h_hat.num_antennas();
    let mut pdp = vec![0.0; h_hat.len()];
    for i in 0..n {
        for (l, &tap) in h_hat.link(user, i).iter().enumerate() {
            pdp[l] += tap.norm_sqr();
        }
    }
    for p in &mut pdp {
        *p /= n as f64;
    }
    pdp
}

/// Remove the per-tap estimation-error bias `σ_et²` from a PDP estimate
/// (clamped at zero) on the taps the estimator resolves.
pub fn debias_pdp(pdp: &mut [f64], sigma_et_sq: f64, error_taps: usize) {
    for p in pdp.iter_mut().take(error_taps) {
        *p = (*p - sigma_et_sq).max(0.0);
    }
}

/// Least-squares scalar gain from downlink pilots:
/// `ĝ = Σ r·s / Σ s²`. The receiver divides demodulated data by ĝ.
pub fn estimate_downlink_gain(received: &[f64], sent: &[f64]) -> Result<f64> {
    if received.len() != sent.len() || sent.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} received vs {} sent pilots",
            received.len(),
            sent.len()
        )));
    }
    let energy: f64 = sent.iter().map(|s| s * s).sum();
    if energy <= 0.0 {
        return Err(Error::InvalidParameter("pilot sequence has zero energy".into()));
    }
    let cross: f64 = received.iter().zip(sent).map(|(r, s)| r * s).sum();
    Ok(cross / energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, ChannelModel, PowerDelayProfile};
    use crate::impairments::{add_estimation_error, EstimationErrorModel};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn designer(m: usize, spec: FspDesignSpec) -> FspDesigner {
        let proto = PrototypeFilter::design(m, 4).unwrap();
        FspDesigner::new(&proto, spec).unwrap()
    }

    fn random_taps(rng: &mut impl Rng, len: usize) -> Vec<C64> {
        (0..len)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn flat_channel_designs_to_centered_delta() {
        for len in [1usize, 3, 5, 7] {
            let d = designer(16, FspDesignSpec::zf(len));
            let taps = d.design(&[C64::new(1.0, 0.0)], 0).unwrap();
            let delay = fsp_delay(len);
            for (n, &t) in taps.iter().enumerate() {
                let expect = if n == delay { 1.0 } else { 0.0 };
                assert!(
                    (t - C64::new(expect, 0.0)).norm() < 1e-10,
                    "len {len} tap {n}: {t}"
                );
            }
        }
    }

    #[test]
    fn scalar_channel_designs_to_its_inverse() {
        let d = designer(16, FspDesignSpec::zf(5));
        let taps = d.design(&[C64::new(2.0, 0.0)], 0).unwrap();
        assert!((taps[2] - C64::new(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn longer_prefilters_fit_no_worse() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..5 {
            let target = random_taps(&mut rng, 4);
            let d1 = designer(16, FspDesignSpec::zf(1));
            let d5 = designer(16, FspDesignSpec::zf(5));
            let a1 = d1.design(&target, 0).unwrap();
            let a5 = d5.design(&target, 0).unwrap();
            let r1 = d1.weighted_residual(&a1, &target, 0);
            let r5 = d5.weighted_residual(&a5, &target, 0);
            assert!(r5 < r1, "LS residual should shrink: {r1} -> {r5}");
            let rip1 = d1.band_ripple(&a1, &target, 0);
            let rip5 = d5.band_ripple(&a5, &target, 0);
            assert!(rip5 <= rip1 + 1e-9, "ripple should not grow: {rip1} -> {rip5}");
        }
    }

    #[test]
    fn ripple_non_increasing_over_length_ladder() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for _ in 0..4 {
            let target = random_taps(&mut rng, 5);
            let mut last = f64::MAX;
            for len in [1usize, 3, 5, 7] {
                let d = designer(16, FspDesignSpec::zf(len));
                let a = d.design(&target, 0).unwrap();
                let rip = d.band_ripple(&a, &target, 0);
                assert!(rip <= last + 1e-9, "len {len}: ripple {rip} grew from {last}");
                last = rip;
            }
        }
    }

    #[test]
    fn designing_from_shifted_target_commutes_with_tap_shift() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let base_target = random_taps(&mut rng, 4);
        let d = designer(16, FspDesignSpec::zf(5));
        let base = d.design(&base_target, 0).unwrap();
        for m in [0usize, 1, 2, 7, 15] {
            let shifted_target: Vec<C64> = base_target
                .iter()
                .enumerate()
                .map(|(l, &t)| {
                    t * C64::from_polar(1.0, 2.0 * PI * l as f64 * m as f64 / 16.0)
                })
                .collect();
            let designed = d.design(&shifted_target, m).unwrap();
            let shifted = baseband_shift_fsp(&base, m);
            for n in 0..5 {
                assert!(
                    (designed[n] - shifted[n]).norm() < 1e-10,
                    "m={m} tap {n}: {} vs {}",
                    designed[n],
                    shifted[n]
                );
            }
        }
    }

    #[test]
    fn shift_is_identity_for_even_subcarriers() {
        let taps = vec![C64::new(0.3, -0.1), C64::new(0.8, 0.2), C64::new(-0.4, 0.0)];
        assert_eq!(baseband_shift_fsp(&taps, 0), taps);
        let shifted = baseband_shift_fsp(&taps, 2);
        for n in 0..3 {
            assert!((shifted[n] - taps[n]).norm() < 1e-15);
        }
        // Odd m alternates tap signs.
        let odd = baseband_shift_fsp(&taps, 1);
        assert!((odd[1] + taps[1]).norm() < 1e-15);
        assert!((odd[2] - taps[2]).norm() < 1e-15);
    }

    #[test]
    fn design_is_scale_equivariant_in_both_modes() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let target = random_taps(&mut rng, 4);
        let scaled: Vec<C64> = target.iter().map(|&t| t * 2.5).collect();
        for spec in [FspDesignSpec::zf(5), FspDesignSpec::mmse(5, 0.05)] {
            let d = designer(16, spec);
            let a = d.design(&target, 3).unwrap();
            let b = d.design(&scaled, 3).unwrap();
            for n in 0..5 {
                assert!(
                    (b[n] * 2.5 - a[n]).norm() < 1e-10,
                    "mode {:?} tap {n}",
                    spec.mode
                );
            }
        }
    }

    #[test]
    fn zero_target_is_rejected() {
        let d = designer(16, FspDesignSpec::zf(3));
        assert!(d.design(&[C64::new(0.0, 0.0); 4], 0).is_err());
        assert!(d.design(&[], 0).is_err());
    }

    #[test]
    fn correction_factor_reference_values() {
        let pdp = vec![0.5, 0.3, 0.2];
        let same = corrected_pdp_colocated(&pdp, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(same, pdp);

        // λ from the standard ranges, σ_ef² = 0.1: scale = λ²/1.1.
        let lambda = 0.9207254289585293;
        let scaled = corrected_pdp_colocated(&pdp, 1.0, 1.0, lambda, 0.1).unwrap();
        let scale = scaled[0] / pdp[0];
        assert!((scale - 0.770668).abs() < 1e-6, "scale {scale}");

        // Positive scaling never moves the argmax.
        let argmax = |v: &[f64]| {
            v.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
        };
        assert_eq!(argmax(&scaled), argmax(&pdp));
    }

    #[test]
    fn correction_term_trivial_cases() {
        let h = vec![C64::new(1.0, 0.0), C64::new(0.5, 0.5)];
        let unchanged = corrected_eqch_cellfree(&h, 3, 16, 0.9, 0.0, 8.0, 8.0, 8, 0.0, 2, true);
        assert_eq!(unchanged, h);
        let cross = corrected_eqch_cellfree(&h, 3, 16, 0.9, 0.1, 8.0, 8.0, 8, 0.2, 2, false);
        assert_eq!(cross, h);
    }

    /// MC oracle for the bias-removal claim: the corrected estimate of the
    /// self equivalent channel is closer (mean-square) to the true one.
    #[test]
    fn correction_term_removes_estimation_bias() {
        let n = 64usize;
        let m = 3usize;
        let m_total = 16usize;
        let pdp = PowerDelayProfile::new(vec![0.5, 0.3, 0.2]).unwrap();
        let model = ChannelModel::colocated(vec![pdp.clone()], vec![1.0], n).unwrap();
        let sigma_et_sq = 0.1;
        let est = EstimationErrorModel::new(sigma_et_sq).unwrap();
        let sigma_ef_sq = est.sigma_ef_sq(3);
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let draws = 1000;
        let mut mse_raw = 0.0;
        let mut mse_corr = 0.0;
        for _ in 0..draws {
            let h = draw_channel(&model, &mut rng);
            let h_hat = add_estimation_error(&h, &est, 3, &mut rng);
            // Asymptotic precoder built from the estimates; β_k = 1 per
            // antenna so Σβ = N and the denominator gains Nσ_ef².
            let denom = n as f64 * (1.0 + sigma_ef_sq);
            let mut e_true = [C64::new(0.0, 0.0); 3];
            let mut e_hat = vec![C64::new(0.0, 0.0); 3];
            for i in 0..n {
                let g = crate::channel::freq_response(h_hat.link(0, i), m, m_total).unwrap();
                let w = g.conj() / denom;
                for l in 0..3 {
                    e_true[l] += w * h.link(0, i)[l];
                    e_hat[l] += w * h_hat.link(0, i)[l];
                }
            }
            let corrected = corrected_eqch_cellfree(
                &e_hat, m, m_total, 1.0, sigma_et_sq, n as f64, n as f64, n, sigma_ef_sq, 3, true,
            );
            for l in 0..3 {
                mse_raw += (e_hat[l] - e_true[l]).norm_sqr();
                mse_corr += (corrected[l] - e_true[l]).norm_sqr();
            }
        }
        assert!(
            mse_corr < 0.5 * mse_raw,
            "correction should remove most of the bias: raw {mse_raw:.4}, corrected {mse_corr:.4}"
        );
    }

    #[test]
    fn pdp_estimate_reference_cases() {
        // All antennas identical: p̂ = |ĥ|².
        let mut h = ChannelRealization::zeros(1, 3, 2);
        for i in 0..3 {
            h.link_mut(0, i).copy_from_slice(&[C64::new(0.6, 0.8), C64::new(0.0, 0.5)]);
        }
        let p = estimate_pdp(&h, 0);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);

        let zero = ChannelRealization::zeros(1, 2, 4);
        assert!(estimate_pdp(&zero, 0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pdp_estimate_converges_with_bias() {
        let pdp = PowerDelayProfile::new(vec![0.6, 0.4]).unwrap();
        let n = 10_000;
        let model = ChannelModel::colocated(vec![pdp.clone()], vec![1.0], n).unwrap();
        let sigma_et_sq = 0.05;
        let est = EstimationErrorModel::new(sigma_et_sq).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let h = draw_channel(&model, &mut rng);
        let h_hat = add_estimation_error(&h, &est, 2, &mut rng);
        let p_hat = estimate_pdp(&h_hat, 0);
        for l in 0..2 {
            let expect = pdp.taps()[l] + sigma_et_sq;
            assert!(
                (p_hat[l] - expect).abs() / expect < 0.03,
                "tap {l}: {} vs {expect}",
                p_hat[l]
            );
        }
        let mut debiased = p_hat.clone();
        debias_pdp(&mut debiased, sigma_et_sq, 2);
        for l in 0..2 {
            assert!((debiased[l] - pdp.taps()[l]).abs() / pdp.taps()[l] < 0.05);
        }
    }

    #[test]
    fn pilot_gain_estimator_is_exact_without_noise() {
        let sent = vec![1.0, -1.0, 1.0, 1.0];
        let received: Vec<f64> = sent.iter().map(|s| 0.7706 * s).collect();
        let g = estimate_downlink_gain(&received, &sent).unwrap();
        assert!((g - 0.7706).abs() < 1e-12);
        assert!(estimate_downlink_gain(&[], &[]).is_err());
        assert!(estimate_downlink_gain(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn pilot_gain_variance_follows_ls_scaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let truth = 0.9;
        let noise = 0.5;
        let var_for = |n_pilots: usize, boost: f64, rng: &mut ChaCha12Rng| {
            let reps = 4000;
            let mut acc = 0.0;
            for _ in 0..reps {
                let sent: Vec<f64> = (0..n_pilots)
                    .map(|_| if rng.random::<bool>() { boost } else { -boost })
                    .collect();
                let received: Vec<f64> = sent
                    .iter()
                    .map(|s| {
                        let e: f64 = rand_distr::StandardNormal.sample(rng);
                        truth * s + noise * e
                    })
                    .collect();
                let g = estimate_downlink_gain(&received, &sent).unwrap();
                acc += (g - truth) * (g - truth);
            }
            acc / reps as f64
        };
        let v8 = var_for(8, 1.0, &mut rng);
        let v32 = var_for(32, 1.0, &mut rng);
        let ratio = v8 / v32;
        assert!((2.5..=6.0).contains(&ratio), "4× pilots should quarter the variance: {ratio}");

        // +10 dB pilot boost cuts the error std by √10 (variance by 10).
        let v_boost = var_for(8, 10f64.sqrt(), &mut rng);
        let boost_ratio = v8 / v_boost;
        assert!((6.0..=16.0).contains(&boost_ratio), "boost ratio {boost_ratio}");
    }

    #[test]
    fn identity_bank_is_single_tap_passthrough() {
        let bank = FspBank::identity(2, 4);
        assert_eq!(bank.len(), 1);
        assert_eq!(bank.delay(), 0);
        assert_eq!(bank.taps(1, 3), &[C64::new(1.0, 0.0)]);
        assert_eq!(latency_rotation(1), C64::new(1.0, 0.0));
        assert_eq!(latency_rotation(5), C64::new(-1.0, 0.0));
    }
}
