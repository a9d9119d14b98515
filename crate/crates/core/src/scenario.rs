//! Experiment configuration and Monte-Carlo orchestration.
//!
//! A [`ScenarioConfig`] is the JSON-facing description of one experiment:
//! deployment, impairments, compensation, power allocation, waveform
//! lanes, and trial budget. [`run_scenario`] executes the trials in
//! parallel (per-trial seeds derived from the master seed, reductions in
//! trial order, so aggregates are bit-reproducible for any worker
//! count), and writes per-trial and aggregate CSV files plus a JSON run
//! manifest. [`sweep`] repeats a scenario along one numeric axis and
//! merges the aggregates.

use crate::channel::{noise_variance, tdlc_pdp};
use crate::error::{Error, Result};
use crate::fsp::{FspDesignSpec, FspMode};
use crate::impairments::CalibrationRanges;
use crate::metrics::SinrReport;
use crate::proto::PrototypeFilter;
use crate::sim::{
    self, derive_seed, evaluate_lane_analytic, evaluate_lane_mc, evaluate_ofdm, lane_bank,
    Compensation, DeploymentMode, Lane, PowerConfig, SystemParams,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// JSON-facing scenario description. Every field has a default, so a
/// config file only spells out what it changes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// "colocated" or "cellfree".
    pub mode: String,
    pub num_subcarriers: usize,
    pub overlap: usize,
    pub num_users: usize,
    /// Co-located antenna count.
    pub num_antennas: usize,
    /// Cell-free: AP grid size (perfect square) and antennas per AP.
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub area_km: f64,
    pub shadow_std_db: f64,
    /// Co-located operating SNR; `null` = noiseless.
    pub snr_db: Option<f64>,
    /// Cell-free link budget.
    pub p_max_w: f64,
    pub noise_bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    pub sample_rate_hz: f64,
    pub rms_delay_range_ns: [f64; 2],
    pub fsp_enabled: bool,
    pub fsp_length: usize,
    /// "zf" or "mmse".
    pub fsp_mode: String,
    pub fsp_noise_weight: f64,
    /// Co-located design basis: "pdp" (hardened profile, shifted per
    /// subcarrier) or "equivalent" (per-realization equivalent channel,
    /// for moderate antenna counts). Cell-free always uses the latter.
    pub fsp_design: String,
    pub estimation_error: bool,
    /// Explicit per-tap error variance; `null` derives it from the pilot
    /// convention σ_noise²/(K·L·boost).
    pub sigma_et_sq: Option<f64>,
    pub reciprocity_error: bool,
    pub xi_range: [f64; 2],
    pub phi_max_rad: f64,
    /// "none", "statistical", "downlink_pilot" (co-located only), or
    /// "correction_term" (cell-free only).
    pub compensation: String,
    /// "max" or "fractional".
    pub power_allocation: String,
    pub power_nu: f64,
    pub power_gamma: f64,
    pub ap_threshold_db: Option<f64>,
    pub precoder: String,
    /// Any of "fbmc_fsp", "fbmc_1tap", "ofdm".
    pub lanes: Vec<String>,
    /// "mc" (symbol-level) or "analytic" for the FBMC lanes.
    pub estimator: String,
    pub trials: usize,
    pub seed: u64,
    pub qam_frames: usize,
    pub pilot_boost_db: f64,
    /// `null` = M/4.
    pub ofdm_cp_len: Option<usize>,
    pub debias_pdp_estimate: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: "colocated".into(),
            num_subcarriers: 64,
            overlap: 4,
            num_users: 8,
            num_antennas: 64,
            num_aps: 36,
            antennas_per_ap: 4,
            area_km: 2.0,
            shadow_std_db: 8.0,
            snr_db: Some(20.0),
            p_max_w: 0.25,
            noise_bandwidth_hz: 20e6,
            noise_figure_db: 9.0,
            temperature_k: 290.0,
            sample_rate_hz: 15.36e6,
            rms_delay_range_ns: [90.0, 110.0],
            fsp_enabled: true,
            fsp_length: 5,
            fsp_mode: "zf".into(),
            fsp_noise_weight: 0.0,
            fsp_design: "pdp".into(),
            estimation_error: false,
            sigma_et_sq: None,
            reciprocity_error: false,
            xi_range: [0.98, 1.02],
            phi_max_rad: 2.0 * std::f64::consts::PI / 9.0,
            compensation: "none".into(),
            power_allocation: "fractional".into(),
            power_nu: 0.6,
            power_gamma: 1.2,
            ap_threshold_db: None,
            precoder: "zf".into(),
            lanes: vec!["fbmc_fsp".into(), "fbmc_1tap".into(), "ofdm".into()],
            estimator: "mc".into(),
            trials: 100,
            seed: 1,
            qam_frames: 24,
            pilot_boost_db: 10.0,
            ofdm_cp_len: None,
            debias_pdp_estimate: true,
        }
    }
}

/// The five imperfection/compensation study cases used in the figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyCase {
    /// FSP on, perfect CSI, uncompensated reciprocity errors.
    I,
    /// FSP on, estimated CSI, no reciprocity error.
    II,
    /// FSP on, estimated CSI, reciprocity errors statistically compensated.
    III,
    /// FSP on, estimated CSI, compensation via downlink pilots.
    IV,
    /// No FSP, estimated CSI, uncompensated reciprocity errors.
    V,
}

impl StudyCase {
    pub fn all() -> [StudyCase; 5] {
        [StudyCase::I, StudyCase::II, StudyCase::III, StudyCase::IV, StudyCase::V]
    }

    /// The (estimation, reciprocity, compensation, fsp) quadruple of the
    /// case, applied onto a base configuration.
    pub fn apply(self, cfg: &mut ScenarioConfig) {
        let cellfree = cfg.mode == "cellfree";
        let (est, recip, comp, fsp) = match self {
            StudyCase::I => (false, true, "none", true),
            StudyCase::II => (true, false, "none", true),
            StudyCase::III => (true, true, if cellfree { "correction_term" } else { "statistical" }, true),
            StudyCase::IV => (true, true, "downlink_pilot", true),
            StudyCase::V => (true, true, "none", false),
        };
        cfg.estimation_error = est;
        cfg.reciprocity_error = recip;
        cfg.compensation = comp.into();
        cfg.fsp_enabled = fsp;
    }
}

/// A validated scenario: resolved engine parameters plus run controls.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub params: SystemParams,
    pub lanes: Vec<Lane>,
    pub use_mc: bool,
    pub trials: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Check cross-field consistency and resolve into engine parameters.
    pub fn validate(&self) -> Result<ResolvedScenario> {
        let mode = match self.mode.as_str() {
            "colocated" => DeploymentMode::Colocated,
            "cellfree" => DeploymentMode::Cellfree,
            other => return Err(Error::Config(format!("unknown mode '{other}'"))),
        };
        if self.trials == 0 {
            return Err(Error::Config("at least one trial required".into()));
        }
        if self.num_users == 0 {
            return Err(Error::Config("at least one user required".into()));
        }
        if self.rms_delay_range_ns[0] <= 0.0 || self.rms_delay_range_ns[1] < self.rms_delay_range_ns[0] {
            return Err(Error::Config("RMS delay range must be positive and ordered".into()));
        }

        let lanes = self
            .lanes
            .iter()
            .map(|l| match l.as_str() {
                "fbmc_fsp" => Ok(Lane::FbmcFsp),
                "fbmc_1tap" => Ok(Lane::Fbmc1Tap),
                "ofdm" => Ok(Lane::Ofdm),
                other => Err(Error::Config(format!("unknown lane '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if lanes.is_empty() {
            return Err(Error::Config("at least one lane required".into()));
        }
        let use_mc = match self.estimator.as_str() {
            "mc" => true,
            "analytic" => false,
            other => return Err(Error::Config(format!("unknown estimator '{other}'"))),
        };

        // Strategy names must resolve.
        crate::precoding::create(&self.precoder)?;
        crate::precoding::allocator(&self.power_allocation, self.power_nu, self.power_gamma)?;

        let compensation = match (self.compensation.as_str(), mode) {
            ("none", _) => Compensation::None,
            ("statistical", DeploymentMode::Colocated) => Compensation::Statistical,
            ("downlink_pilot", DeploymentMode::Colocated) => Compensation::DownlinkPilot,
            ("correction_term", DeploymentMode::Cellfree) => Compensation::CorrectionTerm,
            ("downlink_pilot", DeploymentMode::Cellfree) => {
                return Err(Error::Config(
                    "downlink-pilot compensation relies on a single hardened scaling factor and is not applicable to the cell-free mode".into(),
                ))
            }
            ("statistical", DeploymentMode::Cellfree) => {
                return Err(Error::Config(
                    "the scalar statistical correction is co-located-only; use 'correction_term' in cell-free mode".into(),
                ))
            }
            ("correction_term", DeploymentMode::Colocated) => {
                return Err(Error::Config(
                    "the correction term applies to the cell-free equivalent channel; use 'statistical' in co-located mode".into(),
                ))
            }
            (other, _) => return Err(Error::Config(format!("unknown compensation '{other}'"))),
        };

        let (num_aps, antennas_per_ap) = match mode {
            DeploymentMode::Colocated => {
                if self.num_antennas == 0 {
                    return Err(Error::Config("co-located mode needs num_antennas >= 1".into()));
                }
                (self.num_antennas, 1)
            }
            DeploymentMode::Cellfree => {
                let side = (self.num_aps as f64).sqrt().round() as usize;
                if side * side != self.num_aps || self.num_aps == 0 {
                    return Err(Error::Config(format!(
                        "num_aps = {} must be a positive perfect square for grid placement",
                        self.num_aps
                    )));
                }
                if self.antennas_per_ap == 0 {
                    return Err(Error::Config("antennas_per_ap must be >= 1".into()));
                }
                if self.snr_db.is_some() {
                    return Err(Error::Config(
                        "cell-free noise comes from the link budget; leave snr_db null".into(),
                    ));
                }
                (self.num_aps, self.antennas_per_ap)
            }
        };
        let num_antennas = num_aps * antennas_per_ap;
        if self.precoder == "zf" && num_antennas < self.num_users {
            return Err(Error::Config(format!(
                "ZF needs at least as many antennas as users ({num_antennas} < {})",
                self.num_users
            )));
        }
        if self.ap_threshold_db.is_some() && mode == DeploymentMode::Colocated {
            return Err(Error::Config("AP selection applies to cell-free mode only".into()));
        }

        let noise_var = match mode {
            DeploymentMode::Colocated => match self.snr_db {
                Some(snr) => 10f64.powf(-snr / 10.0),
                None => 0.0,
            },
            DeploymentMode::Cellfree => {
                noise_variance(self.noise_bandwidth_hz, self.noise_figure_db, self.temperature_k)
            }
        };

        // Nominal channel length at the midpoint delay spread, used for
        // derived defaults and early feasibility checks.
        let rms_mid = 0.5 * (self.rms_delay_range_ns[0] + self.rms_delay_range_ns[1]);
        let nominal_len = tdlc_pdp(rms_mid, self.sample_rate_hz)?.len();
        let rms_max_len = tdlc_pdp(self.rms_delay_range_ns[1], self.sample_rate_hz)?.len();

        let sigma_et_sq = if self.estimation_error {
            match self.sigma_et_sq {
                Some(s) => {
                    if s < 0.0 {
                        return Err(Error::Config("sigma_et_sq must be >= 0".into()));
                    }
                    Some(s)
                }
                None => {
                    if noise_var <= 0.0 {
                        return Err(Error::Config(
                            "estimation error without noise needs an explicit sigma_et_sq".into(),
                        ));
                    }
                    let boost = 10f64.powf(self.pilot_boost_db / 10.0);
                    Some(noise_var / (self.num_users as f64 * nominal_len as f64 * boost))
                }
            }
        } else {
            None
        };

        let calibration = if self.reciprocity_error {
            if self.xi_range[1] < self.xi_range[0] || self.xi_range[0] < 0.0 {
                return Err(Error::Config("calibration magnitude range must be ordered and >= 0".into()));
            }
            Some(CalibrationRanges {
                xi_lo: self.xi_range[0],
                xi_hi: self.xi_range[1],
                phi_max: self.phi_max_rad,
            })
        } else {
            None
        };

        let fsp_mode = match self.fsp_mode.as_str() {
            "zf" => FspMode::Zf,
            "mmse" => FspMode::Mmse,
            other => return Err(Error::Config(format!("unknown FSP design mode '{other}'"))),
        };
        let fsp_from_equivalent = match (self.fsp_design.as_str(), mode) {
            (_, DeploymentMode::Cellfree) => true,
            ("pdp", _) => false,
            ("equivalent", _) => {
                if compensation == Compensation::Statistical {
                    return Err(Error::Config(
                        "the statistical correction factor scales the PDP design; use fsp_design = 'pdp' with it".into(),
                    ));
                }
                true
            }
            (other, _) => return Err(Error::Config(format!("unknown fsp_design '{other}'"))),
        };
        let fsp_spec = FspDesignSpec {
            mode: fsp_mode,
            length: self.fsp_length,
            noise_weight: self.fsp_noise_weight,
            grid_per_spacing: 8,
        };
        // Fail configuration early rather than mid-run.
        let proto = PrototypeFilter::design(self.num_subcarriers, self.overlap)?;
        crate::fsp::FspDesigner::new(&proto, fsp_spec)?;

        let ofdm_cp = self.ofdm_cp_len.unwrap_or(self.num_subcarriers / 4);
        if lanes.contains(&Lane::Ofdm) && ofdm_cp < rms_max_len {
            return Err(Error::Config(format!(
                "OFDM cyclic prefix {ofdm_cp} cannot cover channels up to {rms_max_len} taps"
            )));
        }

        // Monte-Carlo frames must leave measurable half-symbols between
        // the edge guards (and the pilot block, when used).
        if use_mc && (lanes.contains(&Lane::FbmcFsp) || lanes.contains(&Lane::Fbmc1Tap)) {
            let half = self.num_subcarriers / 2;
            let len_h = match calibration {
                Some(_) => rms_max_len + self.num_subcarriers - 1,
                None => rms_max_len,
            };
            let fsp_len = if self.fsp_enabled && lanes.contains(&Lane::FbmcFsp) { self.fsp_length } else { 1 };
            let spread = (len_h + (fsp_len - 1) * half).div_ceil(half);
            let edge = 2 * self.overlap + spread + 1;
            let pilots = if compensation == Compensation::DownlinkPilot { 2 } else { 0 };
            let needed = 2 * edge + pilots + 3;
            if 2 * self.qam_frames < needed {
                return Err(Error::Config(format!(
                    "qam_frames = {} too small: this scenario needs at least {} half-symbols ({} frames)",
                    self.qam_frames,
                    needed,
                    needed.div_ceil(2)
                )));
            }
        }

        let params = SystemParams {
            mode,
            num_subcarriers: self.num_subcarriers,
            overlap: self.overlap,
            num_users: self.num_users,
            num_aps,
            antennas_per_ap,
            area_km: self.area_km,
            shadow_std_db: self.shadow_std_db,
            sample_rate_hz: self.sample_rate_hz,
            rms_delay_range_ns: (self.rms_delay_range_ns[0], self.rms_delay_range_ns[1]),
            noise_var,
            p_max_w: self.p_max_w,
            precoder: self.precoder.clone(),
            power: PowerConfig {
                strategy: self.power_allocation.clone(),
                nu: self.power_nu,
                gamma: self.power_gamma,
            },
            ap_threshold_db: self.ap_threshold_db,
            fsp_spec,
            sigma_et_sq,
            calibration,
            compensation,
            debias_pdp: self.debias_pdp_estimate,
            fsp_from_equivalent,
            qam_frames: self.qam_frames,
            ofdm_cp_len: ofdm_cp,
        };
        let lanes = if self.fsp_enabled {
            lanes
        } else {
            // With the prefilter disabled the FSP lane degrades to
            // single-tap transmission; drop duplicates.
            let mut l: Vec<Lane> =
                lanes.into_iter().map(|l| if l == Lane::FbmcFsp { Lane::Fbmc1Tap } else { l }).collect();
            l.dedup();
            l
        };

        Ok(ResolvedScenario { params, lanes, use_mc, trials: self.trials, seed: self.seed })
    }
}

/// Aggregated results of one scenario run.
#[derive(Debug)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub lanes: Vec<(Lane, SinrReport)>,
}

impl RunSummary {
    pub fn lane(&self, lane: Lane) -> Option<&SinrReport> {
        self.lanes.iter().find(|(l, _)| *l == lane).map(|(_, r)| r)
    }
}

/// Execute a scenario: all trials, all lanes, deterministic under the
/// configured seed. When `out_dir` is given, CSV results and the run
/// manifest are written there.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunSummary> {
    let resolved = cfg.validate()?;
    let proto = PrototypeFilter::design(cfg.num_subcarriers, cfg.overlap)?;
    let params = &resolved.params;

    struct TrialOutput {
        lanes: Vec<Vec<crate::metrics::SinrComponents>>,
        service: Option<f64>,
    }

    let trial_results: Vec<Result<TrialOutput>> = (0..resolved.trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(resolved.seed, t as u64);
            let draw = sim::draw_trial(params, trial_seed)?;
            let data_seed = derive_seed(trial_seed, 101);
            let noise_seed = derive_seed(trial_seed, 102);
            let mut lanes = Vec::with_capacity(resolved.lanes.len());
            for &lane in &resolved.lanes {
                let comps = match lane {
                    Lane::Ofdm => evaluate_ofdm(params, &draw)?,
                    _ => {
                        let bank = lane_bank(params, &proto, &draw, lane)?;
                        if resolved.use_mc {
                            evaluate_lane_mc(params, &proto, &draw, &bank, data_seed, noise_seed)?
                        } else {
                            evaluate_lane_analytic(params, &proto, &draw, &bank)?
                        }
                    }
                };
                lanes.push(comps);
            }
            Ok(TrialOutput { lanes, service: draw.mean_service_size() })
        })
        .collect();

    let mut reports: Vec<(Lane, SinrReport)> = resolved
        .lanes
        .iter()
        .map(|&l| (l, SinrReport::new(params.num_users, params.num_subcarriers)))
        .collect();
    for result in trial_results {
        let output = result?;
        for (slot, comps) in reports.iter_mut().zip(&output.lanes) {
            slot.1.merge_trial(comps, output.service)?;
        }
    }

    let summary = RunSummary { config: cfg.clone(), lanes: reports };
    if let Some(dir) = out_dir {
        write_run_files(&summary, dir)?;
    }
    Ok(summary)
}

fn write_run_files(summary: &RunSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut aggregate = String::from("lane,mean_sinr_db,mean_sir_db,mean_service_set,trials,users,subcarriers\n");
    for (lane, report) in &summary.lanes {
        aggregate.push_str(&format!(
            "{},{:.6},{:.6},{},{},{},{}\n",
            lane.label(),
            report.mean_sinr_db(),
            report.mean_sir_db(),
            report
                .mean_service_size()
                .map_or(String::from(""), |v| format!("{v:.3}")),
            report.trials(),
            report.num_users(),
            report.num_subcarriers(),
        ));
    }
    fs::write(dir.join("aggregate.csv"), aggregate)?;

    let mut users = String::from("lane,user,sinr_db,sir_db\n");
    for (lane, report) in &summary.lanes {
        for k in 0..report.num_users() {
            let mut s = 0.0;
            let mut i = 0.0;
            for m in 0..report.num_subcarriers() {
                let c = report.components(k, m);
                s += c.signal;
                i += c.interference;
            }
            users.push_str(&format!(
                "{},{},{:.6},{:.6}\n",
                lane.label(),
                k,
                crate::metrics::ratio_db(report.user_sinr_linear(k)),
                crate::metrics::ratio_db(if i > 0.0 { s / i } else { f64::INFINITY }),
            ));
        }
    }
    fs::write(dir.join("aggregate_users.csv"), users)?;

    let mut trials = String::from("lane,trial,user,sir_db\n");
    for (lane, report) in &summary.lanes {
        let samples = report.sir_samples_db();
        let k_users = report.num_users();
        for (idx, sir) in samples.iter().enumerate() {
            trials.push_str(&format!(
                "{},{},{},{:.6}\n",
                lane.label(),
                idx / k_users,
                idx % k_users,
                sir
            ));
        }
    }
    fs::write(dir.join("trials.csv"), trials)?;

    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": summary.config.seed,
        "trials": summary.config.trials,
        "lanes": summary.lanes.iter().map(|(l, _)| l.label()).collect::<Vec<_>>(),
        "config": summary.config,
    });
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

/// Set one numeric axis field on a config copy.
pub fn apply_axis(cfg: &ScenarioConfig, axis: &str, value: f64) -> Result<ScenarioConfig> {
    let mut out = cfg.clone();
    match axis {
        "num_antennas" => out.num_antennas = value as usize,
        "num_aps" => out.num_aps = value as usize,
        "num_users" => out.num_users = value as usize,
        "snr_db" => out.snr_db = Some(value),
        "ap_threshold_db" => out.ap_threshold_db = Some(value),
        "fsp_length" => out.fsp_length = value as usize,
        "trials" => out.trials = value as usize,
        "qam_frames" => out.qam_frames = value as usize,
        "p_max_w" => out.p_max_w = value,
        "power_nu" => out.power_nu = value,
        "power_gamma" => out.power_gamma = value,
        other => return Err(Error::Config(format!("unknown sweep axis '{other}'"))),
    }
    Ok(out)
}

/// Results of a sweep: one summary per axis value.
#[derive(Debug)]
pub struct SweepSummary {
    pub axis: String,
    pub values: Vec<f64>,
    pub runs: Vec<RunSummary>,
}

/// Run the scenario once per axis value and merge the per-lane mean
/// SINRs into one CSV.
pub fn sweep(cfg: &ScenarioConfig, axis: &str, values: &[f64], out_dir: Option<&Path>) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one axis value".into()));
    }
    let mut runs = Vec::with_capacity(values.len());
    for &v in values {
        let sub_cfg = apply_axis(cfg, axis, v)?;
        let sub_dir = out_dir.map(|d| d.join(format!("{axis}_{v}")));
        runs.push(run_scenario(&sub_cfg, sub_dir.as_deref())?);
    }
    let summary = SweepSummary { axis: axis.to_string(), values: values.to_vec(), runs };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), sweep_csv(&summary))?;
    }
    Ok(summary)
}

/// Merged sweep CSV: one row per axis value, one SINR column per lane,
/// plus the mean serving-set size when AP selection ran.
pub fn sweep_csv(summary: &SweepSummary) -> String {
    let lanes: Vec<Lane> = summary
        .runs
        .first()
        .map(|r| r.lanes.iter().map(|(l, _)| *l).collect())
        .unwrap_or_default();
    let mut header = summary.axis.clone();
    for lane in &lanes {
        header.push_str(&format!(",sinr_db_{}", lane.label()));
    }
    header.push_str(",mean_service_set\n");
    let mut out = header;
    for (v, run) in summary.values.iter().zip(&summary.runs) {
        out.push_str(&format!("{v}"));
        for lane in &lanes {
            let db = run.lane(*lane).map(|r| r.mean_sinr_db()).unwrap_or(f64::NAN);
            out.push_str(&format!(",{db:.6}"));
        }
        let service = run
            .lanes
            .first()
            .and_then(|(_, r)| r.mean_service_size())
            .map_or(String::from(""), |v| format!("{v:.3}"));
        out.push_str(&format!(",{service}\n"));
    }
    out
}
