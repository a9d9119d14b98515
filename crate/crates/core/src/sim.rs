//! Per-trial assembly of the downlink pipeline: draw channels and
//! impairments, build precoders and prefilters, and evaluate SINR with
//! the deterministic (transmultiplexer-coefficient) estimator, the
//! symbol-level Monte-Carlo estimator, and the OFDM closed-form
//! baseline — all on the same drawn state so lanes are comparable.

use crate::channel::{
    cost_hata_beta, draw_channel, draw_rms_delay, place_cellfree, tdlc_pdp, ChannelModel,
    ChannelRealization, PowerDelayProfile,
};
use crate::error::{Error, Result};
use crate::filterbank::{analyze_all, frame_len, synthesize, transmux_response, SymbolGrid};
use crate::fsp::{
    baseband_shift_fsp, corrected_eqch_cellfree, corrected_pdp_colocated, debias_pdp,
    estimate_downlink_gain, estimate_pdp, latency_rotation, symbol_taps, FspBank, FspDesignSpec,
    FspDesigner,
};
use crate::impairments::{
    add_estimation_error, apply_reciprocity, draw_calibration, lambda_stat, CalibrationProfile,
    CalibrationRanges, Direction, EstimationErrorModel,
};
use crate::metrics::SinrComponents;
use crate::precoding::{self, ap_select, equivalent_channel, PowerAllocation, ServiceSets};
use crate::proto::PrototypeFilter;
use crate::C64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

/// Antenna deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeploymentMode {
    Colocated,
    Cellfree,
}

/// How estimation/calibration imperfections are compensated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compensation {
    /// No compensation.
    None,
    /// Co-located statistical correction factor folded into the prefilter.
    Statistical,
    /// UE-side scalar gain estimated from downlink pilots.
    DownlinkPilot,
    /// Cell-free estimation-bias correction term on the equivalent channel.
    CorrectionTerm,
}

/// Waveform lanes evaluated per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    FbmcFsp,
    Fbmc1Tap,
    Ofdm,
}

impl Lane {
    pub fn label(&self) -> &'static str {
        match self {
            Lane::FbmcFsp => "fbmc_fsp",
            Lane::Fbmc1Tap => "fbmc_1tap",
            Lane::Ofdm => "ofdm",
        }
    }
}

/// Power-allocation strategy selection.
#[derive(Debug, Clone)]
pub struct PowerConfig {
    pub strategy: String,
    pub nu: f64,
    pub gamma: f64,
}

/// Resolved scenario parameters the engine runs on.
#[derive(Debug, Clone)]
pub struct SystemParams {
    pub mode: DeploymentMode,
    pub num_subcarriers: usize,
    pub overlap: usize,
    pub num_users: usize,
    /// Co-located: antenna count with `antennas_per_ap = 1`.
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub area_km: f64,
    pub shadow_std_db: f64,
    pub sample_rate_hz: f64,
    pub rms_delay_range_ns: (f64, f64),
    /// Receiver noise power σ_η² (linear; 0 = noiseless).
    pub noise_var: f64,
    /// Per-antenna transmit budget (cell-free).
    pub p_max_w: f64,
    pub precoder: String,
    pub power: PowerConfig,
    pub ap_threshold_db: Option<f64>,
    pub fsp_spec: FspDesignSpec,
    /// None = perfect CSI.
    pub sigma_et_sq: Option<f64>,
    /// None = perfect reciprocity.
    pub calibration: Option<CalibrationRanges>,
    pub compensation: Compensation,
    pub debias_pdp: bool,
    /// Design basis for the co-located prefilter: the hardened PDP
    /// (designed once per user, shifted per subcarrier) or the
    /// per-realization equivalent channel (moderate antenna counts).
    /// Cell-free always designs from the equivalent channel.
    pub fsp_from_equivalent: bool,
    /// QAM slots per trial in the Monte-Carlo estimator.
    pub qam_frames: usize,
    pub ofdm_cp_len: usize,
}

impl SystemParams {
    pub fn num_antennas(&self) -> usize {
        self.num_aps * self.antennas_per_ap
    }
}

/// SplitMix64 step, used to derive independent seeds from (master, index).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x243F_6A88_85A3_08D3);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Subcarrier-center gains of an impulse response of any length: the
/// DTFT at bins `2πm/M`, computed by time-aliasing into one M-point FFT.
pub fn subcarrier_gains(link: &[C64], num_subcarriers: usize) -> Vec<C64> {
    let mut folded = vec![C64::new(0.0, 0.0); num_subcarriers];
    for (l, &tap) in link.iter().enumerate() {
        folded[l % num_subcarriers] += tap;
    }
    FftPlanner::new().plan_fft_forward(num_subcarriers).process(&mut folded);
    folded
}

/// Transmit-side and receive-side state drawn for one Monte-Carlo trial.
pub struct TrialDraw {
    pub model: ChannelModel,
    /// True propagation channel.
    pub h: ChannelRealization,
    pub cal: Option<CalibrationProfile>,
    /// Downlink-affected channel `c_t ⋆ h` (or a copy of `h`).
    pub h_dl: ChannelRealization,
    /// BS-side uplink estimate `(h ⋆ c_r) + Δh`.
    pub h_ul_est: ChannelRealization,
    /// Taps the uplink estimator resolves (physical channel length).
    pub error_taps: usize,
    pub sigma_ef_sq: f64,
    pub lambda: f64,
    pub q: PowerAllocation,
    pub sets: Option<ServiceSets>,
    /// Per-subcarrier N×K precoding matrices from the uplink estimates.
    pub precoders: Vec<DMatrix<C64>>,
}

impl TrialDraw {
    pub fn mean_service_size(&self) -> Option<f64> {
        self.sets.as_ref().map(|s| s.mean_size())
    }
}

/// Draw one trial: channels, impairments, power allocation, AP
/// selection, and per-subcarrier precoders.
pub fn draw_trial(params: &SystemParams, seed: u64) -> Result<TrialDraw> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let m_sub = params.num_subcarriers;
    let k_users = params.num_users;
    let n_antennas = params.num_antennas();

    let model = match params.mode {
        DeploymentMode::Colocated => {
            let mut pdps = Vec::with_capacity(k_users);
            for _ in 0..k_users {
                let rms = draw_rms_delay(params.rms_delay_range_ns, &mut rng);
                pdps.push(tdlc_pdp(rms, params.sample_rate_hz)?);
            }
            ChannelModel::colocated(pdps, vec![1.0; k_users], n_antennas)?
        }
        DeploymentMode::Cellfree => {
            let geo = place_cellfree(
                params.num_aps,
                params.area_km,
                params.antennas_per_ap,
                k_users,
                &mut rng,
            )?;
            let mut per_ap_pdps = Vec::with_capacity(k_users * params.num_aps);
            let mut per_ap_betas = vec![0.0; k_users * params.num_aps];
            for k in 0..k_users {
                for ap in 0..params.num_aps {
                    let rms = draw_rms_delay(params.rms_delay_range_ns, &mut rng);
                    per_ap_pdps.push(tdlc_pdp(rms, params.sample_rate_hz)?);
                    let shadow: f64 = StandardNormal.sample(&mut rng);
                    per_ap_betas[k * params.num_aps + ap] =
                        cost_hata_beta(geo.distance_km(k, ap), shadow * params.shadow_std_db);
                }
            }
            let max_len = per_ap_pdps.iter().map(|p| p.len()).max().unwrap_or(1);
            let mut pdps = Vec::with_capacity(k_users * n_antennas);
            let mut betas = DMatrix::zeros(k_users, n_antennas);
            for k in 0..k_users {
                for i in 0..n_antennas {
                    let ap = geo.ap_of_antenna(i);
                    // Pad every link to a common length so draws line up.
                    let mut taps = per_ap_pdps[k * params.num_aps + ap].taps().to_vec();
                    taps.resize(max_len, 0.0);
                    pdps.push(PowerDelayProfile::new(taps)?);
                    betas[(k, i)] = per_ap_betas[k * params.num_aps + ap];
                }
            }
            ChannelModel::new(pdps, betas)?
        }
    };

    let h = draw_channel(&model, &mut rng);
    let error_taps = h.len();

    let cal = match &params.calibration {
        Some(ranges) => Some(draw_calibration(m_sub, n_antennas, ranges, &mut rng)?),
        None => None,
    };
    let h_dl = match &cal {
        Some(c) => apply_reciprocity(&h, c, Direction::Downlink)?,
        None => h.clone(),
    };
    let h_ul = match &cal {
        Some(c) => apply_reciprocity(&h, c, Direction::Uplink)?,
        None => h.clone(),
    };
    let (h_ul_est, sigma_ef_sq) = match params.sigma_et_sq {
        Some(s) => {
            let est = EstimationErrorModel::new(s)?;
            (
                add_estimation_error(&h_ul, &est, error_taps, &mut rng),
                est.sigma_ef_sq(error_taps),
            )
        }
        None => (h_ul, 0.0),
    };
    let lambda = match &params.calibration {
        Some(r) => lambda_stat(r)?.lambda,
        None => 1.0,
    };

    let q = match params.mode {
        DeploymentMode::Colocated => PowerAllocation::uniform(k_users, n_antennas, 1.0),
        DeploymentMode::Cellfree => {
            let alloc =
                precoding::allocator(&params.power.strategy, params.power.nu, params.power.gamma)?;
            alloc.allocate(model.betas(), params.p_max_w)?
        }
    };

    let sets = match (params.mode, params.ap_threshold_db) {
        (DeploymentMode::Cellfree, Some(threshold)) => {
            if params.noise_var <= 0.0 {
                return Err(Error::Config("AP selection needs a positive noise power".into()));
            }
            // Uplink SNR measured per AP from the large-scale gain at the
            // per-antenna budget.
            let snr_db = DMatrix::from_fn(k_users, params.num_aps, |k, ap| {
                let beta = model.betas()[(k, ap * params.antennas_per_ap)];
                10.0 * (params.p_max_w * beta / params.noise_var).log10()
            });
            Some(ap_select(&snr_db, threshold, params.antennas_per_ap))
        }
        _ => None,
    };

    // Per-subcarrier channel estimates and precoders.
    let strategy = precoding::create(&params.precoder)?;
    let mut gains = vec![C64::new(0.0, 0.0); k_users * n_antennas * m_sub];
    for k in 0..k_users {
        for i in 0..n_antennas {
            let g = subcarrier_gains(h_ul_est.link(k, i), m_sub);
            let base = (k * n_antennas + i) * m_sub;
            gains[base..base + m_sub].copy_from_slice(&g);
        }
    }
    // Pipeline convention: unit-norm precoder columns, so each user's
    // per-subcarrier stream radiates exactly its allocated power and the
    // received signal keeps the array gain.
    let mut precoders = Vec::with_capacity(m_sub);
    for m in 0..m_sub {
        let hm = DMatrix::from_fn(k_users, n_antennas, |k, i| gains[(k * n_antennas + i) * m_sub + m]);
        let mut p = strategy.matrix(&hm, model.betas())?;
        for k in 0..k_users {
            let norm = p.column(k).norm();
            if norm > 0.0 {
                p.column_mut(k).iter_mut().for_each(|c| *c /= norm);
            }
        }
        precoders.push(p);
    }

    Ok(TrialDraw {
        model,
        h,
        cal,
        h_dl,
        h_ul_est,
        error_taps,
        sigma_ef_sq,
        lambda,
        q,
        sets,
        precoders,
    })
}

/// Build the prefilter bank for the FSP lane of one trial. The
/// co-located path designs one baseband prefilter per user from the
/// (estimated, optionally corrected) PDP and shifts it per subcarrier;
/// the cell-free path designs per (user, subcarrier) from the estimated
/// equivalent channel, optionally bias-corrected.
///
/// Designed taps are rescaled to unit energy before use: the prefilter
/// reshapes the stream but radiates the same power as single-tap
/// transmission, so lanes stay power-comparable. The absolute cascade
/// level is what the downlink pilot estimator measures.
pub fn build_fsp_bank(params: &SystemParams, proto: &PrototypeFilter, draw: &TrialDraw) -> Result<FspBank> {
    let designer = FspDesigner::new(proto, params.fsp_spec)?;
    let m_sub = params.num_subcarriers;
    let k_users = params.num_users;
    let len = params.fsp_spec.length;

    let normalized = |taps: Vec<C64>| -> Result<Vec<C64>> {
        let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        if energy <= 0.0 {
            return Err(Error::Numerical("designed prefilter has zero energy".into()));
        }
        let scale = 1.0 / energy.sqrt();
        Ok(taps.into_iter().map(|t| t * scale).collect())
    };

    match params.mode {
        DeploymentMode::Colocated if params.fsp_from_equivalent => {
            FspBank::from_fn(k_users, m_sub, len, |k, m| {
                let e_hat =
                    equivalent_channel(&draw.precoders[m], &draw.q, &draw.h_ul_est, k, k, None)?;
                normalized(designer.design(&e_hat, m)?)
            })
        }
        DeploymentMode::Colocated => {
            let mut per_user: Vec<Vec<C64>> = Vec::with_capacity(k_users);
            for k in 0..k_users {
                let beta_k = draw.model.betas()[(k, 0)];
                let q_k = draw.q.get(k, 0);
                let mut pdp: Vec<f64> = match params.sigma_et_sq {
                    Some(s) => {
                        // The uplink estimator resolves the physical channel
                        // span; the design target keeps that length.
                        let mut est = estimate_pdp(&draw.h_ul_est, k);
                        est.truncate(draw.error_taps);
                        if params.debias_pdp {
                            debias_pdp(&mut est, s, draw.error_taps);
                        }
                        est
                    }
                    None => draw.model.pdp(k, 0).taps().to_vec(),
                };
                // Asymptotic self-channel scale √q/β.
                let base_scale = q_k.sqrt() / beta_k;
                for p in &mut pdp {
                    *p *= base_scale;
                }
                if params.compensation == Compensation::Statistical {
                    pdp = corrected_pdp_colocated(&pdp, q_k, beta_k, draw.lambda, draw.sigma_ef_sq)?;
                }
                let target: Vec<C64> = pdp.iter().map(|&p| C64::new(p, 0.0)).collect();
                per_user.push(normalized(designer.design(&target, 0)?)?);
            }
            FspBank::from_fn(k_users, m_sub, len, |k, m| Ok(baseband_shift_fsp(&per_user[k], m)))
        }
        DeploymentMode::Cellfree => {
            let n_antennas = params.num_antennas();
            FspBank::from_fn(k_users, m_sub, len, |k, m| {
                let mut e_hat = equivalent_channel(
                    &draw.precoders[m],
                    &draw.q,
                    &draw.h_ul_est,
                    k,
                    k,
                    draw.sets.as_ref(),
                )?;
                if params.compensation == Compensation::CorrectionTerm {
                    let sqrt_q_sum: f64 = match &draw.sets {
                        Some(sets) => sets.antennas(k).iter().map(|&i| draw.q.get(k, i).sqrt()).sum(),
                        None => (0..n_antennas).map(|i| draw.q.get(k, i).sqrt()).sum(),
                    };
                    let beta_sum: f64 = draw.model.betas().row(k).iter().sum();
                    e_hat = corrected_eqch_cellfree(
                        &e_hat,
                        m,
                        m_sub,
                        draw.lambda,
                        params.sigma_et_sq.unwrap_or(0.0),
                        sqrt_q_sum,
                        beta_sum,
                        n_antennas,
                        draw.sigma_ef_sq,
                        draw.error_taps,
                        true,
                    );
                }
                normalized(designer.design(&e_hat, m)?)
            })
        }
    }
}

/// The adjacent bands that couple into subcarrier `m` (indices wrap).
fn neighbor_bands(m: usize, m_sub: usize) -> Vec<usize> {
    let mut out = vec![(m + m_sub - 1) % m_sub, m, (m + 1) % m_sub];
    out.sort_unstable();
    out.dedup();
    out
}

/// Sparse convolution of half-symbol-spaced prefilter taps with a
/// full-rate response.
fn fsp_convolve(fsp_taps: &[C64], half: usize, e: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); (fsp_taps.len() - 1) * half + e.len()];
    for (p, &a) in fsp_taps.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let base = p * half;
        for (l, &t) in e.iter().enumerate() {
            out[base + l] += a * t;
        }
    }
    out
}

/// Deterministic SINR from transmultiplexer coefficients: for every
/// (user, subcarrier) the cascade prefilter → precoder → downlink
/// channel → analysis bank is collapsed into end-to-end coefficients and
/// the desired/interference split is read off them.
pub fn evaluate_lane_analytic(
    params: &SystemParams,
    proto: &PrototypeFilter,
    draw: &TrialDraw,
    bank: &FspBank,
) -> Result<Vec<SinrComponents>> {
    let m_sub = params.num_subcarriers;
    let k_users = params.num_users;
    let half = m_sub / 2;
    let rotation = latency_rotation(bank.len());
    let delay = bank.delay() as i64;
    let noise = params.noise_var / 2.0;

    // Cascades indexed ((k·K + k′)·M + m′).
    let mut cascades: Vec<Vec<C64>> = Vec::with_capacity(k_users * k_users * m_sub);
    for k in 0..k_users {
        for kp in 0..k_users {
            for mp in 0..m_sub {
                let e = equivalent_channel(
                    &draw.precoders[mp],
                    &draw.q,
                    &draw.h_dl,
                    k,
                    kp,
                    draw.sets.as_ref(),
                )?;
                cascades.push(fsp_convolve(bank.taps(kp, mp), half, &e));
            }
        }
    }

    let mut out = Vec::with_capacity(k_users * m_sub);
    for k in 0..k_users {
        for m in 0..m_sub {
            let mut signal = 0.0;
            let mut interference = 0.0;
            let mut cross = 0.0;
            for &mp in &neighbor_bands(m, m_sub) {
                for kp in 0..k_users {
                    let cascade = &cascades[(k * k_users + kp) * m_sub + mp];
                    let g = transmux_response(proto, cascade, m, mp)?;
                    for (delta, coeff) in g.iter() {
                        let power = (rotation * coeff).re.powi(2);
                        if kp == k && mp == m && delta == delay {
                            signal += power;
                        } else {
                            interference += power;
                            if kp != k {
                                cross += power;
                            }
                        }
                    }
                }
            }
            out.push(SinrComponents {
                signal,
                interference,
                cross_user: Some(cross),
                noise,
            });
        }
    }
    Ok(out)
}

/// Symbol-level Monte-Carlo SINR: transmit random OQAM frames through
/// the full pipeline, demodulate, fit the per-(user, subcarrier) scalar
/// gain by least squares, and split the residual into interference and
/// (known) noise.
pub fn evaluate_lane_mc(
    params: &SystemParams,
    proto: &PrototypeFilter,
    draw: &TrialDraw,
    bank: &FspBank,
    data_seed: u64,
    noise_seed: u64,
) -> Result<Vec<SinrComponents>> {
    let m_sub = params.num_subcarriers;
    let half = m_sub / 2;
    let k_users = params.num_users;
    let n_antennas = params.num_antennas();
    let kappa = params.overlap;
    let len_h = draw.h_dl.len();
    let fsp_len = bank.len();
    let delay = bank.delay();
    let rotation = latency_rotation(fsp_len);

    let spread = (len_h + (fsp_len - 1) * half).div_ceil(half);
    let edge = 2 * kappa + spread + 1;
    let n_data = 2 * params.qam_frames;
    let pilot_slots: usize = if params.compensation == Compensation::DownlinkPilot { 2 } else { 0 };
    let first_data = edge + pilot_slots;
    let last_data = n_data.saturating_sub(edge);
    if last_data <= first_data + 2 {
        return Err(Error::Config(format!(
            "qam_frames = {} leaves no measurable slots after {} edge and {} pilot half-symbols",
            params.qam_frames, edge, pilot_slots
        )));
    }

    let mut data_rng = ChaCha12Rng::seed_from_u64(data_seed);

    // User data: ±1 half-symbols. The leading block doubles as the known
    // gain pilots when downlink-pilot compensation is on; it is sent at
    // data power so it does not distort the interference seen by the
    // measured slots.
    let mut data = vec![0.0f64; k_users * m_sub * n_data];
    let didx = |k: usize, m: usize, n: usize| (k * m_sub + m) * n_data + n;
    for k in 0..k_users {
        for m in 0..m_sub {
            for n in 0..n_data {
                let bit: bool = data_rng.random();
                data[didx(k, m, n)] = if bit { 1.0 } else { -1.0 };
            }
        }
    }

    // Prefilter in the symbol domain, then mix users per antenna.
    let n_total = n_data + fsp_len - 1;
    let mut filtered = vec![C64::new(0.0, 0.0); k_users * m_sub * n_total];
    let fidx = |k: usize, m: usize, n: usize| (k * m_sub + m) * n_total + n;
    for k in 0..k_users {
        for m in 0..m_sub {
            let c = symbol_taps(bank.taps(k, m), m);
            for n in 0..n_total {
                let mut acc = C64::new(0.0, 0.0);
                for (p, &cp) in c.iter().enumerate() {
                    if n >= p && n - p < n_data {
                        acc += cp * data[didx(k, m, n - p)];
                    }
                }
                filtered[fidx(k, m, n)] = acc;
            }
        }
    }

    // Receive: r_k = Σ_i x_i ⋆ h_dl[k,i] + noise.
    let len_x = frame_len(proto, n_total);
    let mut received = vec![C64::new(0.0, 0.0); k_users * (len_x + len_h - 1)];
    let r_len = len_x + len_h - 1;
    for i in 0..n_antennas {
        let mut grid = SymbolGrid::zeros(m_sub, n_total);
        for m in 0..m_sub {
            for kp in 0..k_users {
                let served = draw.sets.as_ref().is_none_or(|s| s.serves(kp, i));
                if !served {
                    continue;
                }
                let w = draw.precoders[m][(i, kp)] * draw.q.get(kp, i).sqrt();
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                for n in 0..n_total {
                    let v = grid.get(m, n) + w * filtered[fidx(kp, m, n)];
                    grid.set(m, n, v);
                }
            }
        }
        let x = synthesize(&grid, proto)?;
        for k in 0..k_users {
            let link = draw.h_dl.link(k, i);
            let r = &mut received[k * r_len..(k + 1) * r_len];
            for (l, &tap) in link.iter().enumerate() {
                if tap.norm_sqr() == 0.0 {
                    continue;
                }
                for (s, &xs) in x.iter().enumerate() {
                    r[l + s] += tap * xs;
                }
            }
        }
    }
    if params.noise_var > 0.0 {
        let mut noise_rng = ChaCha12Rng::seed_from_u64(noise_seed);
        let sigma = (params.noise_var / 2.0).sqrt();
        for v in received.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut noise_rng);
            let im: f64 = StandardNormal.sample(&mut noise_rng);
            *v += C64::new(re * sigma, im * sigma);
        }
    }

    // Demodulate and fit per-(user, subcarrier) gains.
    let analyze_slots = n_data + delay;
    let mut out = Vec::with_capacity(k_users * m_sub);
    for k in 0..k_users {
        let r = &received[k * r_len..(k + 1) * r_len];
        let grid = analyze_all(r, proto, analyze_slots)?;

        let gain = if pilot_slots > 0 {
            let mut sent = Vec::with_capacity(m_sub * pilot_slots);
            let mut got = Vec::with_capacity(m_sub * pilot_slots);
            for m in 0..m_sub {
                for n in edge..edge + pilot_slots {
                    sent.push(data[didx(k, m, n)]);
                    got.push((rotation * grid.get(m, n + delay)).re);
                }
            }
            let g = estimate_downlink_gain(&got, &sent)?;
            if !g.is_finite() || g.abs() < 1e-9 {
                return Err(Error::Numerical(format!("degenerate pilot gain estimate {g} for user {k}")));
            }
            g
        } else {
            1.0
        };

        let noise = params.noise_var / 2.0 / (gain * gain);
        for m in 0..m_sub {
            let mut sum_dd = 0.0;
            let mut sum_d2 = 0.0;
            let mut sum_r2 = 0.0;
            let mut count = 0usize;
            for n in first_data..last_data {
                let d = data[didx(k, m, n)];
                let r_hat = (rotation * grid.get(m, n + delay)).re / gain;
                sum_dd += r_hat * d;
                sum_d2 += d * d;
                sum_r2 += r_hat * r_hat;
                count += 1;
            }
            let alpha = sum_dd / sum_d2;
            let signal = alpha * alpha;
            let resid = (sum_r2 - 2.0 * alpha * sum_dd + alpha * alpha * sum_d2) / count as f64;
            out.push(SinrComponents {
                signal,
                interference: (resid - noise).max(0.0),
                cross_user: None,
                noise,
            });
        }
    }
    Ok(out)
}

/// Closed-form OFDM baseline on the same draw: per-subcarrier flat
/// channels (CP at least as long as the propagation channel), the same
/// precoders, power allocation, AP selection, and per-subcarrier
/// calibration gains. QAM symbols carry power 2 (one unit per real
/// dimension) against complex noise σ_η², matching the OQAM convention.
pub fn evaluate_ofdm(params: &SystemParams, draw: &TrialDraw) -> Result<Vec<SinrComponents>> {
    let m_sub = params.num_subcarriers;
    let k_users = params.num_users;
    let n_antennas = params.num_antennas();
    if params.ofdm_cp_len < draw.h.len() {
        return Err(Error::Config(format!(
            "OFDM cyclic prefix {} shorter than the {}-tap channel",
            params.ofdm_cp_len,
            draw.h.len()
        )));
    }
    let symbol_power = 2.0;

    // True downlink subcarrier gains: physical channel times the
    // transmit-chain calibration gain.
    let mut gains = vec![C64::new(0.0, 0.0); k_users * n_antennas * m_sub];
    for k in 0..k_users {
        for i in 0..n_antennas {
            let mut g = subcarrier_gains(draw.h.link(k, i), m_sub);
            if let Some(cal) = &draw.cal {
                for (m, v) in g.iter_mut().enumerate() {
                    *v *= cal.gain(Direction::Downlink, i, m);
                }
            }
            let base = (k * n_antennas + i) * m_sub;
            gains[base..base + m_sub].copy_from_slice(&g);
        }
    }

    let mut out = Vec::with_capacity(k_users * m_sub);
    for k in 0..k_users {
        for m in 0..m_sub {
            let mut signal = 0.0;
            let mut cross = 0.0;
            for kp in 0..k_users {
                let mut cascade = C64::new(0.0, 0.0);
                match &draw.sets {
                    Some(sets) => {
                        for &i in sets.antennas(kp) {
                            cascade += draw.q.get(kp, i).sqrt()
                                * draw.precoders[m][(i, kp)]
                                * gains[(k * n_antennas + i) * m_sub + m];
                        }
                    }
                    None => {
                        for i in 0..n_antennas {
                            cascade += draw.q.get(kp, i).sqrt()
                                * draw.precoders[m][(i, kp)]
                                * gains[(k * n_antennas + i) * m_sub + m];
                        }
                    }
                }
                let power = cascade.norm_sqr() * symbol_power;
                if kp == k {
                    signal = power;
                } else {
                    cross += power;
                }
            }
            out.push(SinrComponents {
                signal,
                interference: cross,
                cross_user: Some(cross),
                noise: params.noise_var,
            });
        }
    }
    Ok(out)
}

/// Build the lane's prefilter bank: designed for the FSP lane, identity
/// for single-tap transmission.
pub fn lane_bank(params: &SystemParams, proto: &PrototypeFilter, draw: &TrialDraw, lane: Lane) -> Result<FspBank> {
    match lane {
        Lane::FbmcFsp => build_fsp_bank(params, proto, draw),
        Lane::Fbmc1Tap => Ok(FspBank::identity(params.num_users, params.num_subcarriers)),
        Lane::Ofdm => Err(Error::InvalidParameter("the OFDM lane has no prefilter bank".into())),
    }
}
