//! OQAM staggering: QAM symbols split into real-valued halves on a
//! half-symbol-spaced grid.
//!
//! A QAM symbol at slot `t` occupies two consecutive half-symbol slots:
//! the real part at `2t`, the imaginary part at `2t + 1`. Orthogonality
//! across the grid is restored by the `j^(m+n)` phase pattern applied in
//! the synthesis filter bank, not here.

use crate::error::{Error, Result};
use crate::C64;

/// Real-valued data symbols indexed by (user, subcarrier, half-symbol slot).
#[derive(Debug, Clone)]
pub struct OqamGrid {
    data: Vec<f64>,
    num_users: usize,
    num_subcarriers: usize,
    num_slots: usize,
}

impl OqamGrid {
    pub fn zeros(num_users: usize, num_subcarriers: usize, num_slots: usize) -> Self {
        Self {
            data: vec![0.0; num_users * num_subcarriers * num_slots],
            num_users,
            num_subcarriers,
            num_slots,
        }
    }

    #[inline]
    fn idx(&self, user: usize, m: usize, n: usize) -> usize {
        (user * self.num_subcarriers + m) * self.num_slots + n
    }

    #[inline]
    pub fn get(&self, user: usize, m: usize, n: usize) -> f64 {
        self.data[self.idx(user, m, n)]
    }

    #[inline]
    pub fn set(&mut self, user: usize, m: usize, n: usize, value: f64) {
        let i = self.idx(user, m, n);
        self.data[i] = value;
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }
}

/// QAM symbols indexed by (user, subcarrier, slot).
#[derive(Debug, Clone)]
pub struct QamGrid {
    data: Vec<C64>,
    num_users: usize,
    num_subcarriers: usize,
    num_slots: usize,
}

impl QamGrid {
    pub fn zeros(num_users: usize, num_subcarriers: usize, num_slots: usize) -> Self {
        Self {
            data: vec![C64::new(0.0, 0.0); num_users * num_subcarriers * num_slots],
            num_users,
            num_subcarriers,
            num_slots,
        }
    }

    #[inline]
    fn idx(&self, user: usize, m: usize, t: usize) -> usize {
        (user * self.num_subcarriers + m) * self.num_slots + t
    }

    #[inline]
    pub fn get(&self, user: usize, m: usize, t: usize) -> C64 {
        self.data[self.idx(user, m, t)]
    }

    #[inline]
    pub fn set(&mut self, user: usize, m: usize, t: usize, value: C64) {
        let i = self.idx(user, m, t);
        self.data[i] = value;
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }
}

/// Stagger QAM symbols into real half-symbol pairs. The output grid has
/// twice the time slots of the input.
pub fn oqam_map(qam: &QamGrid) -> OqamGrid {
    let mut grid = OqamGrid::zeros(qam.num_users(), qam.num_subcarriers(), 2 * qam.num_slots());
    for k in 0..qam.num_users() {
        for m in 0..qam.num_subcarriers() {
            for t in 0..qam.num_slots() {
                let s = qam.get(k, m, t);
                grid.set(k, m, 2 * t, s.re);
                grid.set(k, m, 2 * t + 1, s.im);
            }
        }
    }
    grid
}

/// Reassemble QAM symbols from consecutive half-symbol pairs.
pub fn oqam_demap(grid: &OqamGrid) -> Result<QamGrid> {
    if !grid.num_slots().is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!(
            "OQAM grid with {} slots cannot pair into QAM symbols",
            grid.num_slots()
        )));
    }
    let mut qam = QamGrid::zeros(grid.num_users(), grid.num_subcarriers(), grid.num_slots() / 2);
    for k in 0..grid.num_users() {
        for m in 0..grid.num_subcarriers() {
            for t in 0..qam.num_slots() {
                let value = C64::new(grid.get(k, m, 2 * t), grid.get(k, m, 2 * t + 1));
                qam.set(k, m, t, value);
            }
        }
    }
    Ok(qam)
}
