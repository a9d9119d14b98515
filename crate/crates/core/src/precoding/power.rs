//! Downlink power allocation strategies for distributed antennas.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Allocated transmit power per (user, antenna) pair, in watts.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    q: DMatrix<f64>,
}

impl PowerAllocation {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter("allocated powers must be finite and >= 0".into()));
        }
        Ok(Self { q })
    }

    /// Uniform per-user allocation used by the co-located setup, where
    /// the channel model is normalized and the SNR knob lives in the
    /// noise variance.
    pub fn uniform(num_users: usize, num_antennas: usize, q_per_user: f64) -> Self {
        Self { q: DMatrix::from_element(num_users, num_antennas, q_per_user) }
    }

    #[inline]
    pub fn get(&self, user: usize, antenna: usize) -> f64 {
        self.q[(user, antenna)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Total power radiated by one antenna.
    pub fn antenna_total(&self, antenna: usize) -> f64 {
        self.q.column(antenna).iter().sum()
    }

    pub fn num_users(&self) -> usize {
        self.q.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.q.ncols()
    }
}

/// A power allocation strategy over the large-scale gains.
pub trait PowerAllocator: Send + Sync {
    fn name(&self) -> &'static str;

    fn allocate(&self, betas: &DMatrix<f64>, p_max_w: f64) -> Result<PowerAllocation>;
}

/// Every antenna transmits at its full budget, split over users in
/// proportion to their large-scale gain at that antenna (the ν=0, γ=1
/// corner of the fractional rule): `q_{k,i} = p_max β_{k,i} / Σ_k' β_{k',i}`.
/// No fairness shaping — cell-edge users get little from everywhere.
pub struct MaxPower;

impl PowerAllocator for MaxPower {
    fn name(&self) -> &'static str {
        "max"
    }

    fn allocate(&self, betas: &DMatrix<f64>, p_max_w: f64) -> Result<PowerAllocation> {
        let (k_users, n_antennas) = betas.shape();
        if betas.iter().any(|&b| b < 0.0) {
            return Err(Error::InvalidParameter("large-scale gains must be >= 0".into()));
        }
        let mut q = DMatrix::zeros(k_users, n_antennas);
        for i in 0..n_antennas {
            let total: f64 = betas.column(i).iter().sum();
            if total <= 0.0 {
                return Err(Error::InvalidParameter(format!("antenna {i} has no positive gains")));
            }
            for k in 0..k_users {
                q[(k, i)] = p_max_w * betas[(k, i)] / total;
            }
        }
        PowerAllocation::new(q)
    }
}

/// Fractional allocation with fairness exponents ν and γ:
///
/// ```text
/// q_{k,i} ∝ β_{k,i} / [ (Σ_{i'} β_{k,i'})^ν · (Σ_{k'} β_{k',i} / (Σ_{i'} β_{k',i'})^ν)^γ ]
/// ```
///
/// scaled by one global constant so the busiest antenna's total is
/// exactly `p_max_w`.
pub struct Fractional {
    pub nu: f64,
    pub gamma: f64,
}

impl PowerAllocator for Fractional {
    fn name(&self) -> &'static str {
        "fractional"
    }

    fn allocate(&self, betas: &DMatrix<f64>, p_max_w: f64) -> Result<PowerAllocation> {
        let (k_users, n_antennas) = betas.shape();
        if betas.iter().any(|&b| b <= 0.0) {
            return Err(Error::InvalidParameter("fractional allocation needs positive β".into()));
        }
        let row_sums: Vec<f64> = (0..k_users).map(|k| betas.row(k).iter().sum()).collect();
        let mut weights = DMatrix::zeros(k_users, n_antennas);
        for i in 0..n_antennas {
            let t: f64 = (0..k_users)
                .map(|k| betas[(k, i)] / row_sums[k].powf(self.nu))
                .sum();
            for k in 0..k_users {
                weights[(k, i)] = betas[(k, i)] / (row_sums[k].powf(self.nu) * t.powf(self.gamma));
            }
        }
        let busiest: f64 = (0..n_antennas)
            .map(|i| weights.column(i).iter().sum::<f64>())
            .fold(0.0, f64::max);
        if busiest <= 0.0 {
            return Err(Error::Numerical("degenerate fractional power weights".into()));
        }
        let scale = p_max_w / busiest;
        PowerAllocation::new(weights * scale)
    }
}

/// Registered allocator names.
pub fn names() -> &'static [&'static str] {
    &["max", "fractional"]
}

/// Look up an allocation strategy by name; `nu`/`gamma` apply to the
/// fractional rule.
pub fn allocator(name: &str, nu: f64, gamma: f64) -> Result<Box<dyn PowerAllocator>> {
    match name {
        "max" => Ok(Box::new(MaxPower)),
        "fractional" => Ok(Box::new(Fractional { nu, gamma })),
        other => Err(Error::Config(format!(
            "unknown power allocation '{other}' (available: {})",
            names().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn equal_betas_allocate_equally() {
        let betas = DMatrix::from_element(4, 6, 1e-10);
        let q = Fractional { nu: 0.6, gamma: 1.2 }.allocate(&betas, 0.25).unwrap();
        let first = q.get(0, 0);
        for k in 0..4 {
            for i in 0..6 {
                assert!((q.get(k, i) - first).abs() < 1e-18);
            }
        }
        // Per-antenna budgets at the cap.
        for i in 0..6 {
            assert!((q.antenna_total(i) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_exponents_follow_beta() {
        let betas = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let q = Fractional { nu: 0.0, gamma: 0.0 }.allocate(&betas, 1.0).unwrap();
        // q ∝ β: ratios must match.
        let r = q.get(0, 0) / betas[(0, 0)];
        for k in 0..2 {
            for i in 0..2 {
                assert!((q.get(k, i) / betas[(k, i)] - r).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn per_antenna_cap_binds_at_the_busiest_antenna() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let betas = DMatrix::from_fn(8, 16, |_, _| 10f64.powf(-13.5 + 2.0 * rng.random::<f64>()));
        let p_max = 0.25;
        let q = Fractional { nu: 0.6, gamma: 1.2 }.allocate(&betas, p_max).unwrap();
        let mut max_total: f64 = 0.0;
        for i in 0..16 {
            let total = q.antenna_total(i);
            assert!(total <= p_max + 1e-12, "antenna {i} over budget: {total}");
            max_total = max_total.max(total);
        }
        assert!((max_total - p_max).abs() < 1e-12, "cap should bind: {max_total}");
    }

    #[test]
    fn max_power_saturates_every_antenna() {
        let betas = DMatrix::from_element(5, 3, 1.0);
        let q = MaxPower.allocate(&betas, 0.25).unwrap();
        for i in 0..3 {
            assert!((q.antenna_total(i) - 0.25).abs() < 1e-15);
        }
        // Equal gains split evenly.
        assert!((q.get(0, 0) - 0.05).abs() < 1e-15);
        // Unequal gains split proportionally, still at full budget.
        let betas = DMatrix::from_row_slice(2, 1, &[3.0, 1.0]);
        let q = MaxPower.allocate(&betas, 0.25).unwrap();
        assert!((q.antenna_total(0) - 0.25).abs() < 1e-15);
        assert!((q.get(0, 0) / q.get(1, 0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn registry_resolves_strategies() {
        assert_eq!(allocator("max", 0.0, 0.0).unwrap().name(), "max");
        assert_eq!(allocator("fractional", 0.6, 1.2).unwrap().name(), "fractional");
        assert!(allocator("waterfill", 0.0, 0.0).is_err());
    }
}
