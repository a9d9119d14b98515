//! Link-level simulator for the downlink of FBMC-OQAM massive MIMO.
//!
//! The library models a multi-user downlink in which real-valued OQAM
//! symbols are shaped by a PHYDYAS prototype filter, pre-equalized by a
//! short fractionally spaced prefilter (FSP) per user and subcarrier,
//! precoded by a conventional per-subcarrier linear precoder (ZF, MRT or
//! the large-antenna limit), and sent over statistically generated
//! multipath channels. Both co-located arrays and cell-free deployments
//! (distributed access points with power allocation and AP selection)
//! are covered, along with models of channel-estimation error and
//! uplink/downlink reciprocity-calibration error and their compensation.
//!
//! Main building blocks:
//!
//! - [`proto`]: prototype filter design and Nyquist checks
//! - [`oqam`]: QAM ↔ OQAM staggering and the real-valued symbol grid
//! - [`filterbank`]: synthesis/analysis filter banks and the end-to-end
//!   transmultiplexer response
//! - [`channel`]: TDL-C power-delay profiles, Rayleigh taps, COST-Hata
//!   path loss, thermal noise, and cell-free geometry with wrap-around
//! - [`impairments`]: estimation-error and calibration-error models
//! - [`precoding`]: linear precoders (strategy registry), power
//!   allocation, AP selection, and equivalent channels
//! - [`fsp`]: fractionally spaced prefilter design with imperfection
//!   correction and downlink pilot gain estimation
//! - [`metrics`]: SINR reports, empirical CDFs, and the OFDM baseline
//! - [`sim`]: per-trial assembly of the full transmit/receive pipeline
//! - [`scenario`]: experiment configuration, Monte-Carlo orchestration,
//!   and CSV/manifest emission
//!
//! Everything is deterministic under a fixed seed: randomness is drawn
//! from caller-supplied RNG streams, one per Monte-Carlo trial.
//!
//! # Example
//!
//! Run a small co-located scenario and compare the prefiltered FBMC lane
//! against the OFDM baseline:
//!
//! ```
//! use fbmc_mimo::scenario::{run_scenario, ScenarioConfig};
//! use fbmc_mimo::sim::Lane;
//!
//! let cfg = ScenarioConfig {
//!     num_subcarriers: 16,
//!     num_users: 2,
//!     num_antennas: 8,
//!     snr_db: Some(10.0),
//!     trials: 2,
//!     qam_frames: 20,
//!     ofdm_cp_len: Some(16),
//!     ..ScenarioConfig::default()
//! };
//! let summary = run_scenario(&cfg, None).unwrap();
//! let fbmc = summary.lane(Lane::FbmcFsp).unwrap().mean_sinr_db();
//! let ofdm = summary.lane(Lane::Ofdm).unwrap().mean_sinr_db();
//! assert!(ofdm >= fbmc - 1.0);
//! ```

// Index loops here tend to use the index for phase math as well as
// lookups; iterator rewrites obscure that.
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod error;
pub mod filterbank;
pub mod fsp;
pub mod impairments;
pub mod metrics;
pub mod oqam;
pub mod precoding;
pub mod proto;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
