//! User-centric AP selection from uplink SNR measurements.

use nalgebra::DMatrix;

/// Per-user serving antenna sets after thresholding.
#[derive(Debug, Clone)]
pub struct ServiceSets {
    antennas: Vec<Vec<usize>>,
    threshold_db: f64,
}

impl ServiceSets {
    /// Every antenna serves every user (canonical cell-free).
    pub fn all(num_users: usize, num_antennas: usize) -> Self {
        Self {
            antennas: vec![(0..num_antennas).collect(); num_users],
            threshold_db: f64::NEG_INFINITY,
        }
    }

    pub fn threshold_db(&self) -> f64 {
        self.threshold_db
    }

    /// Serving antenna indices of user `k`, ascending.
    pub fn antennas(&self, user: usize) -> &[usize] {
        &self.antennas[user]
    }

    #[inline]
    pub fn serves(&self, user: usize, antenna: usize) -> bool {
        self.antennas[user].binary_search(&antenna).is_ok()
    }

    pub fn num_users(&self) -> usize {
        self.antennas.len()
    }

    /// Mean serving-set size over users, in antennas.
    pub fn mean_size(&self) -> f64 {
        if self.antennas.is_empty() {
            return 0.0;
        }
        self.antennas.iter().map(|a| a.len()).sum::<usize>() as f64 / self.antennas.len() as f64
    }
}

/// Keep the APs whose uplink SNR for a user clears `threshold_db`; a user
/// whose every AP falls below the threshold keeps its single best AP.
/// `uplink_snr_db` is K×N_AP; selected APs expand to their antennas.
pub fn ap_select(uplink_snr_db: &DMatrix<f64>, threshold_db: f64, antennas_per_ap: usize) -> ServiceSets {
    let (k_users, n_aps) = uplink_snr_db.shape();
    let mut antennas = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut aps: Vec<usize> = (0..n_aps)
            .filter(|&ap| uplink_snr_db[(k, ap)] >= threshold_db)
            .collect();
        if aps.is_empty() {
            let best = (0..n_aps)
                .max_by(|&a, &b| {
                    uplink_snr_db[(k, a)]
                        .partial_cmp(&uplink_snr_db[(k, b)])
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(0);
            aps.push(best);
        }
        let mut ants = Vec::with_capacity(aps.len() * antennas_per_ap);
        for ap in aps {
            for a in 0..antennas_per_ap {
                ants.push(ap * antennas_per_ap + a);
            }
        }
        antennas.push(ants);
    }
    ServiceSets { antennas, threshold_db }
}
