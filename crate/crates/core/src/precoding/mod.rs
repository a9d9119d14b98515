//! Per-subcarrier linear precoders, power allocation, AP selection, and
//! equivalent-channel computation.
//!
//! Precoders are interchangeable strategies behind the [`Precoder`]
//! trait and are selected by name at runtime ([`create`]); the same
//! pattern covers power allocation in [`power`].

pub mod equivalent;
pub mod power;
pub mod selection;

pub use equivalent::{equivalent_channel, EquivalentChannel};
pub use power::{allocator, PowerAllocation, PowerAllocator};
pub use selection::{ap_select, ServiceSets};

use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{DMatrix, DVector};

/// A per-subcarrier linear precoding strategy. Input is the K×N channel
/// estimate at one subcarrier (plus per-link large-scale gains for
/// strategies that use them); output is the N×K precoding matrix whose
/// column k carries user k's stream.
pub trait Precoder: Send + Sync {
    fn name(&self) -> &'static str;

    fn matrix(&self, h: &DMatrix<C64>, betas: &DMatrix<f64>) -> Result<DMatrix<C64>>;
}

/// Maximum ratio transmission: `P = H^H D^{-1}` with
/// `D_kk = Σ_i |H(k,i)|²`.
pub struct Mrt;

/// Zero forcing: `P = H^H (H H^H)^{-1}`; removes multiuser interference
/// at the subcarrier center for any N ≥ K.
pub struct Zf;

/// Large-antenna limit of both: column k is the conjugated channel row
/// scaled by `1 / Σ_i β_{k,i}` (which is `1/(Nβ_k)` for co-located
/// arrays, where all antennas share β_k).
pub struct Asymptotic;

impl Precoder for Mrt {
    fn name(&self) -> &'static str {
        "mrt"
    }

    fn matrix(&self, h: &DMatrix<C64>, _betas: &DMatrix<f64>) -> Result<DMatrix<C64>> {
        mrt(h)
    }
}

impl Precoder for Zf {
    fn name(&self) -> &'static str {
        "zf"
    }

    fn matrix(&self, h: &DMatrix<C64>, _betas: &DMatrix<f64>) -> Result<DMatrix<C64>> {
        zf(h)
    }
}

impl Precoder for Asymptotic {
    fn name(&self) -> &'static str {
        "asymptotic"
    }

    fn matrix(&self, h: &DMatrix<C64>, betas: &DMatrix<f64>) -> Result<DMatrix<C64>> {
        asymptotic(h, betas)
    }
}

/// Registered precoder names.
pub fn names() -> &'static [&'static str] {
    &["zf", "mrt", "asymptotic"]
}

/// Look up a precoder strategy by name.
pub fn create(name: &str) -> Result<Box<dyn Precoder>> {
    match name {
        "zf" => Ok(Box::new(Zf)),
        "mrt" => Ok(Box::new(Mrt)),
        "asymptotic" => Ok(Box::new(Asymptotic)),
        other => Err(Error::Config(format!(
            "unknown precoder '{other}' (available: {})",
            names().join(", ")
        ))),
    }
}

/// MRT precoding matrix.
pub fn mrt(h: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (k_users, _) = h.shape();
    let mut d_inv = DVector::zeros(k_users);
    for k in 0..k_users {
        let norm_sq: f64 = h.row(k).iter().map(|c| c.norm_sqr()).sum();
        if norm_sq == 0.0 {
            return Err(Error::InvalidParameter(format!("user {k} has a zero-gain channel row")));
        }
        d_inv[k] = 1.0 / norm_sq;
    }
    let mut p = h.adjoint();
    for k in 0..k_users {
        let scale = d_inv[k];
        p.column_mut(k).iter_mut().for_each(|c| *c *= scale);
    }
    Ok(p)
}

/// ZF precoding matrix. Fails with a condition-number diagnostic when
/// `H H^H` is numerically rank deficient.
pub fn zf(h: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (k_users, n_antennas) = h.shape();
    if n_antennas < k_users {
        return Err(Error::InvalidParameter(format!(
            "ZF needs N >= K, got K={k_users}, N={n_antennas}"
        )));
    }
    let gram = h * h.adjoint();
    match nalgebra::linalg::Cholesky::new(gram.clone()) {
        Some(chol) => {
            let inv = chol.inverse();
            // Guard against barely-positive-definite Grams slipping through.
            let eig = gram.symmetric_eigenvalues();
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            if min <= 0.0 || max / min > 1e12 {
                return Err(Error::RankDeficient { cond: max / min.max(f64::MIN_POSITIVE) });
            }
            Ok(h.adjoint() * inv)
        }
        None => {
            let eig = gram.symmetric_eigenvalues();
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min).max(f64::MIN_POSITIVE);
            Err(Error::RankDeficient { cond: max / min })
        }
    }
}

/// Large-antenna limit precoder.
pub fn asymptotic(h: &DMatrix<C64>, betas: &DMatrix<f64>) -> Result<DMatrix<C64>> {
    let (k_users, n_antennas) = h.shape();
    if betas.shape() != (k_users, n_antennas) {
        return Err(Error::DimensionMismatch("β grid must match the channel matrix".into()));
    }
    let mut p = DMatrix::zeros(n_antennas, k_users);
    for k in 0..k_users {
        let beta_sum: f64 = betas.row(k).iter().sum();
        if beta_sum <= 0.0 {
            return Err(Error::InvalidParameter(format!("user {k} has no positive large-scale gain")));
        }
        for i in 0..n_antennas {
            p[(i, k)] = h[(k, i)].conj() / beta_sum;
        }
    }
    Ok(p)
}
