//! Synthesis/analysis filter banks and the end-to-end transmultiplexer
//! response.
//!
//! Basis convention: the pulse carrying symbol `s_{m,n}` is
//!
//! ```text
//! f_{m,n}[l] = f[l - nM/2] · e^{j2πml/M} · j^{m+n}
//! ```
//!
//! Analysis correlates the received signal with the conjugate basis and
//! takes the real part. Cross terms between neighbouring grid points are
//! then (near-)imaginary — the intrinsic interference of OQAM — and the
//! desired coefficient for an ideal channel is real 1.

use crate::error::{Error, Result};
use crate::proto::PrototypeFilter;
use crate::C64;
use rustfft::FftPlanner;

/// Exact power of j (avoids trig round-off in phase bookkeeping).
#[inline]
pub(crate) fn jpow(e: i64) -> C64 {
    match e.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Complex symbols for one antenna, indexed by (subcarrier, half-symbol
/// slot). Entries are real user data only before precoding; after the
/// prefilter and precoder they are general complex values.
#[derive(Debug, Clone)]
pub struct SymbolGrid {
    data: Vec<C64>,
    num_subcarriers: usize,
    num_slots: usize,
}

impl SymbolGrid {
    pub fn zeros(num_subcarriers: usize, num_slots: usize) -> Self {
        Self {
            data: vec![C64::new(0.0, 0.0); num_subcarriers * num_slots],
            num_subcarriers,
            num_slots,
        }
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.data[m * self.num_slots + n]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, value: C64) {
        self.data[m * self.num_slots + n] = value;
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }
}

/// Full-rate signal length of a frame of `num_slots` half-symbols.
pub fn frame_len(proto: &PrototypeFilter, num_slots: usize) -> usize {
    (num_slots.saturating_sub(1)) * proto.num_subcarriers() / 2 + proto.len()
}

/// Run the synthesis filter bank over one antenna's symbol grid:
/// `x[l] = Σ_{m,n} s_{m,n} f[l - nM/2] e^{j2πml/M} j^{m+n}`.
pub fn synthesize(grid: &SymbolGrid, proto: &PrototypeFilter) -> Result<Vec<C64>> {
    let m_sub = proto.num_subcarriers();
    if grid.num_subcarriers() != m_sub {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} subcarriers, prototype was designed for {}",
            grid.num_subcarriers(),
            m_sub
        )));
    }
    let half = m_sub / 2;
    let n_slots = grid.num_slots();
    let mut x = vec![C64::new(0.0, 0.0); frame_len(proto, n_slots)];

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(m_sub);
    let mut spectrum = vec![C64::new(0.0, 0.0); m_sub];

    for n in 0..n_slots {
        // Per-slot IDFT of the phase-adjusted symbols; rustfft is
        // unnormalized, which matches Σ_m w_m e^{j2πmr/M} exactly.
        for (m, w) in spectrum.iter_mut().enumerate() {
            let phase = jpow(m as i64 + 2 * (m as i64) * (n as i64));
            *w = grid.get(m, n) * phase;
        }
        ifft.process(&mut spectrum);
        let slot_phase = jpow(n as i64);
        let base = n * half;
        for (u, &f) in proto.taps().iter().enumerate() {
            x[base + u] += spectrum[u % m_sub] * (f * slot_phase);
        }
    }
    Ok(x)
}

/// Correlate `r` with the conjugate basis of grid point `(m, n)`.
pub fn analyze_complex(r: &[C64], proto: &PrototypeFilter, m: usize, n: usize) -> Result<C64> {
    let m_sub = proto.num_subcarriers();
    let start = n * m_sub / 2;
    if start + proto.len() > r.len() {
        return Err(Error::InvalidParameter(format!(
            "slot {n} not covered by signal of length {}",
            r.len()
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    let step = -2.0 * std::f64::consts::PI * m as f64 / m_sub as f64;
    for (u, &f) in proto.taps().iter().enumerate() {
        acc += r[start + u] * f * C64::from_polar(1.0, step * u as f64);
    }
    let phase = jpow(-2 * (m as i64) * (n as i64) - (m as i64 + n as i64));
    Ok(acc * phase)
}

/// Real part of the matched-basis correlation — the demodulated OQAM value.
pub fn analyze(r: &[C64], proto: &PrototypeFilter, m: usize, n: usize) -> Result<f64> {
    Ok(analyze_complex(r, proto, m, n)?.re)
}

/// Analysis filter bank over all subcarriers for `num_slots` slots.
/// Equivalent to calling [`analyze_complex`] on every grid point, but
/// folds each slot into one M-point FFT.
pub fn analyze_all(r: &[C64], proto: &PrototypeFilter, num_slots: usize) -> Result<SymbolGrid> {
    let m_sub = proto.num_subcarriers();
    let half = m_sub / 2;
    if num_slots == 0 || (num_slots - 1) * half + proto.len() > r.len() {
        return Err(Error::InvalidParameter(format!(
            "{} slots not covered by signal of length {}",
            num_slots,
            r.len()
        )));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m_sub);
    let mut grid = SymbolGrid::zeros(m_sub, num_slots);
    let mut folded = vec![C64::new(0.0, 0.0); m_sub];

    for n in 0..num_slots {
        let base = n * half;
        folded.fill(C64::new(0.0, 0.0));
        for (u, &f) in proto.taps().iter().enumerate() {
            folded[u % m_sub] += r[base + u] * f;
        }
        fft.process(&mut folded);
        for m in 0..m_sub {
            let phase = jpow(-2 * (m as i64) * (n as i64) - (m as i64 + n as i64));
            grid.set(m, n, folded[m] * phase);
        }
    }
    Ok(grid)
}

/// End-to-end coefficient slice `g[Δ]` from a transmitted symbol on
/// subcarrier `m_tx` to the analyzed value on subcarrier `m_rx`, through
/// an equivalent channel impulse response.
///
/// The contribution of symbol `(m_tx, n')` to the analyzed `(m_rx, n)` is
/// `g[n - n'] · (-1)^{(m_rx - m_tx) n'}`; the parity sign drops out of
/// all power computations.
#[derive(Debug, Clone)]
pub struct TransmuxResponse {
    coeffs: Vec<C64>,
    half_width: usize,
}

impl TransmuxResponse {
    /// Coefficient at half-symbol offset `delta`; zero outside the window.
    #[inline]
    pub fn get(&self, delta: i64) -> C64 {
        let idx = delta + self.half_width as i64;
        if idx < 0 || idx >= self.coeffs.len() as i64 {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Iterate `(delta, g[delta])` over the window.
    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        let hw = self.half_width as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - hw, c))
    }
}

/// Compute the transmultiplexer response through `channel` (an equivalent
/// channel impulse response at full rate) between transmit subcarrier
/// `m_tx` and receive subcarrier `m_rx`.
pub fn transmux_response(
    proto: &PrototypeFilter,
    channel: &[C64],
    m_rx: usize,
    m_tx: usize,
) -> Result<TransmuxResponse> {
    if channel.is_empty() {
        return Err(Error::InvalidParameter("empty channel response".into()));
    }
    let m_sub = proto.num_subcarriers();
    let half = m_sub / 2;
    let kappa = proto.overlap();
    let half_width = 2 * kappa + channel.len().div_ceil(half) + 1;

    // f_mtx ⋆ channel at full rate
    let len_f = proto.len();
    let step_tx = 2.0 * std::f64::consts::PI * m_tx as f64 / m_sub as f64;
    let f_tx: Vec<C64> = proto
        .taps()
        .iter()
        .enumerate()
        .map(|(l, &f)| f * C64::from_polar(1.0, step_tx * l as f64))
        .collect();
    let mut conv = vec![C64::new(0.0, 0.0); len_f + channel.len() - 1];
    for (l, &a) in f_tx.iter().enumerate() {
        for (s, &c) in channel.iter().enumerate() {
            conv[l + s] += a * c;
        }
    }

    let step_rx = 2.0 * std::f64::consts::PI * m_rx as f64 / m_sub as f64;
    let f_rx: Vec<C64> = proto
        .taps()
        .iter()
        .enumerate()
        .map(|(l, &f)| f * C64::from_polar(1.0, step_rx * l as f64))
        .collect();

    let mut coeffs = vec![C64::new(0.0, 0.0); 2 * half_width + 1];
    for (slot, coeff) in coeffs.iter_mut().enumerate() {
        let delta = slot as i64 - half_width as i64;
        let shift = delta * half as i64;
        let mut acc = C64::new(0.0, 0.0);
        for (v, &c) in conv.iter().enumerate() {
            let fi = v as i64 - shift;
            if fi >= 0 && (fi as usize) < len_f {
                acc += c * f_rx[fi as usize].conj();
            }
        }
        let phase = jpow(-2 * (m_rx as i64) * delta - (m_rx as i64 - m_tx as i64) - delta);
        *coeff = acc * phase;
    }
    Ok(TransmuxResponse { coeffs, half_width })
}
