//! Cell-free network geometry: access points on a regular grid, users
//! dropped uniformly, distances under the wrap-around (torus) metric.

use crate::error::{Error, Result};
use rand::Rng;

/// Minimum UE–antenna distance in km (10 m floor).
pub const MIN_LINK_DISTANCE_KM: f64 = 0.01;

/// Positions of APs and users in a square service area. Every AP carries
/// `antennas_per_ap` antennas at its own position; antenna indices are
/// grouped by AP, so antenna `i` belongs to AP `i / antennas_per_ap`.
#[derive(Debug, Clone)]
pub struct CellFreeGeometry {
    ap_positions: Vec<(f64, f64)>,
    user_positions: Vec<(f64, f64)>,
    area_km: f64,
    antennas_per_ap: usize,
}

/// Distance between two points in a square of side `area_km` with
/// wrap-around at the edges.
pub fn torus_distance(a: (f64, f64), b: (f64, f64), area_km: f64) -> f64 {
    let dx = (a.0 - b.0).abs();
    let dy = (a.1 - b.1).abs();
    let dx = dx.min(area_km - dx);
    let dy = dy.min(area_km - dy);
    (dx * dx + dy * dy).sqrt()
}

impl CellFreeGeometry {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn antennas_per_ap(&self) -> usize {
        self.antennas_per_ap
    }

    pub fn num_antennas(&self) -> usize {
        self.ap_positions.len() * self.antennas_per_ap
    }

    pub fn area_km(&self) -> f64 {
        self.area_km
    }

    pub fn ap_positions(&self) -> &[(f64, f64)] {
        &self.ap_positions
    }

    pub fn user_positions(&self) -> &[(f64, f64)] {
        &self.user_positions
    }

    #[inline]
    pub fn ap_of_antenna(&self, antenna: usize) -> usize {
        antenna / self.antennas_per_ap
    }

    /// Wrap-around distance between user `k` and AP `ap`, floored at 10 m.
    pub fn distance_km(&self, user: usize, ap: usize) -> f64 {
        torus_distance(self.user_positions[user], self.ap_positions[ap], self.area_km)
            .max(MIN_LINK_DISTANCE_KM)
    }
}

/// Place `n_ap` access points on a regular √n×√n grid over a square of
/// side `area_km` and drop `n_users` users uniformly, re-drawing any user
/// that lands within 10 m of an AP.
pub fn place_cellfree(
    n_ap: usize,
    area_km: f64,
    antennas_per_ap: usize,
    n_users: usize,
    rng: &mut impl Rng,
) -> Result<CellFreeGeometry> {
    if area_km <= 0.0 {
        return Err(Error::InvalidParameter("service area must be positive".into()));
    }
    if antennas_per_ap == 0 {
        return Err(Error::InvalidParameter("antennas per AP must be >= 1".into()));
    }
    let side = (n_ap as f64).sqrt().round() as usize;
    if side * side != n_ap || side == 0 {
        return Err(Error::InvalidParameter(format!(
            "AP count {n_ap} is not a perfect square; grid placement needs one"
        )));
    }
    let spacing = area_km / side as f64;
    let mut ap_positions = Vec::with_capacity(n_ap);
    for gy in 0..side {
        for gx in 0..side {
            ap_positions.push((
                (gx as f64 + 0.5) * spacing,
                (gy as f64 + 0.5) * spacing,
            ));
        }
    }

    let mut user_positions = Vec::with_capacity(n_users);
    while user_positions.len() < n_users {
        let p = (rng.random::<f64>() * area_km, rng.random::<f64>() * area_km);
        let ok = ap_positions
            .iter()
            .all(|&ap| torus_distance(p, ap, area_km) >= MIN_LINK_DISTANCE_KM);
        if ok {
            user_positions.push(p);
        }
    }

    Ok(CellFreeGeometry { ap_positions, user_positions, area_km, antennas_per_ap })
}
