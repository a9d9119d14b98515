//! Equivalent channel seen by a user: the cascade of power weights,
//! precoder column, and physical impulse responses.

use super::power::PowerAllocation;
use super::selection::ServiceSets;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::C64;
use nalgebra::DMatrix;

/// `h^(eqvlt)[l] = Σ_i √q_{k',i} P(i,k') h_{k,i}[l]` — the response from
/// the precoder input intended for user `k'` to receiving user `k`.
pub type EquivalentChannel = Vec<C64>;

/// Compute the equivalent channel for one (receiving user, intended user)
/// pair through the given per-subcarrier precoder. Antennas outside the
/// intended user's service set contribute zero.
pub fn equivalent_channel(
    precoder: &DMatrix<C64>,
    q: &PowerAllocation,
    h: &ChannelRealization,
    rx_user: usize,
    tx_user: usize,
    sets: Option<&ServiceSets>,
) -> Result<EquivalentChannel> {
    let (n_antennas, k_users) = precoder.shape();
    if h.num_antennas() != n_antennas || rx_user >= h.num_users() || tx_user >= k_users {
        return Err(Error::DimensionMismatch(format!(
            "precoder {n_antennas}×{k_users} vs channel {}×{} (users {rx_user}/{tx_user})",
            h.num_users(),
            h.num_antennas()
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); h.len()];
    match sets {
        Some(sets) => {
            for &i in sets.antennas(tx_user) {
                accumulate(&mut out, h.link(rx_user, i), precoder[(i, tx_user)], q.get(tx_user, i));
            }
        }
        None => {
            for i in 0..n_antennas {
                accumulate(&mut out, h.link(rx_user, i), precoder[(i, tx_user)], q.get(tx_user, i));
            }
        }
    }
    Ok(out)
}

#[inline]
fn accumulate(out: &mut [C64], link: &[C64], weight: C64, power: f64) {
    let w = weight * power.sqrt();
    for (o, &tap) in out.iter_mut().zip(link) {
        *o += w * tap;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, freq_response, ChannelModel, PowerDelayProfile};
    use crate::precoding::{asymptotic, zf};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn flat_channels(k: usize, n: usize, rng: &mut impl Rng) -> ChannelRealization {
        let model =
            ChannelModel::colocated(vec![PowerDelayProfile::single_tap(); k], vec![1.0; k], n).unwrap();
        draw_channel(&model, rng)
    }

    fn channel_matrix(h: &ChannelRealization, m: usize, m_total: usize) -> DMatrix<C64> {
        DMatrix::from_fn(h.num_users(), h.num_antennas(), |k, i| {
            freq_response(h.link(k, i), m, m_total).unwrap()
        })
    }

    #[test]
    fn scalar_inverse_flattens_single_link() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let h = flat_channels(1, 1, &mut rng);
        let h0 = h.link(0, 0)[0];
        let p = DMatrix::from_row_slice(1, 1, &[h0.inv()]);
        let q = PowerAllocation::uniform(1, 1, 1.0);
        let eq = equivalent_channel(&p, &q, &h, 0, 0, None).unwrap();
        assert!((eq[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zf_on_flat_channels_yields_kronecker_delta() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let h = flat_channels(4, 16, &mut rng);
        let hm = channel_matrix(&h, 0, 64);
        let p = zf(&hm).unwrap();
        let q = PowerAllocation::uniform(4, 16, 1.0);
        for k in 0..4 {
            for kp in 0..4 {
                let eq = equivalent_channel(&p, &q, &h, k, kp, None).unwrap();
                let expect = if k == kp { 1.0 } else { 0.0 };
                assert!(
                    (eq[0] - C64::new(expect, 0.0)).norm() < 1e-10,
                    "pair ({k},{kp}): {}",
                    eq[0]
                );
            }
        }
    }

    #[test]
    fn service_set_masks_unselected_antennas() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let h = flat_channels(1, 4, &mut rng);
        let p = DMatrix::from_element(4, 1, C64::new(1.0, 0.0));
        let q = PowerAllocation::uniform(1, 4, 1.0);
        let snr = DMatrix::from_row_slice(1, 4, &[10.0, -30.0, 10.0, -30.0]);
        let sets = crate::precoding::ap_select(&snr, 0.0, 1);
        let eq = equivalent_channel(&p, &q, &h, 0, 0, Some(&sets)).unwrap();
        let expect = h.link(0, 0)[0] + h.link(0, 2)[0];
        assert!((eq[0] - expect).norm() < 1e-14);
    }

    /// Law-of-large-numbers check: with the asymptotic precoder the self
    /// equivalent channel approaches the frequency-shifted PDP at rate
    /// 1/√N, and the cross channel vanishes.
    #[test]
    fn equivalent_channel_hardens_toward_shifted_pdp() {
        let pdp = PowerDelayProfile::new(vec![0.5, 0.3, 0.2]).unwrap();
        let m = 3usize;
        let m_total = 16usize;
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let err_at = |n: usize, rng: &mut ChaCha12Rng| {
            let model =
                ChannelModel::colocated(vec![pdp.clone(); 2], vec![1.0; 2], n).unwrap();
            let draws = 60;
            let mut self_err = 0.0;
            let mut cross = 0.0;
            for _ in 0..draws {
                let h = draw_channel(&model, rng);
                let hm = channel_matrix(&h, m, m_total);
                let p = asymptotic(&hm, model.betas()).unwrap();
                let q = PowerAllocation::uniform(2, n, 1.0);
                let eq = equivalent_channel(&p, &q, &h, 0, 0, None).unwrap();
                let mut acc = 0.0;
                for (l, &tap) in eq.iter().enumerate() {
                    let target = pdp.taps()[l]
                        * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * l as f64 * m as f64 / m_total as f64);
                    acc += (tap - target).norm_sqr();
                }
                self_err += acc.sqrt();
                let eq_cross = equivalent_channel(&p, &q, &h, 0, 1, None).unwrap();
                cross += eq_cross.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            }
            (self_err / draws as f64, cross / draws as f64)
        };
        let (self64, cross64) = err_at(64, &mut rng);
        let (self256, cross256) = err_at(256, &mut rng);
        let ratio_self = self256 / self64;
        let ratio_cross = cross256 / cross64;
        assert!(
            (0.25..=0.75).contains(&ratio_self),
            "self-channel error ratio {ratio_self} (expect ≈ 0.5)"
        );
        assert!(
            (0.25..=0.75).contains(&ratio_cross),
            "cross-channel ratio {ratio_cross} (expect ≈ 0.5)"
        );
    }
}
