//! Benchmark schemes.
//!
//! * ignoring CSI errors: solve the design problem as if `σ²_{e,k} = 0`, then
//!   score the result under the true error variances;
//! * full power: every device transmits at `√P_k` with its phase aligned to
//!   the effective channel;
//! * channel inversion: magnitudes equalise `|b_k|·‖ĥ_k‖`, with the weakest
//!   device at full power.
//!
//! The two fixed-power rules pair with a receive design built the same way as
//! the optimised scheme: a closed-form denoising factor for one antenna, and
//! alternating sum-MMSE updates with phase re-alignment for several.

use num_complex::Complex;

use crate::linalg::norm_sqr;
use crate::model::SystemConfig;
use crate::mse::{breakdown_unchecked, TransceiverDesign};
use crate::simo::{align_phases, matched_sum, solve_simo_with, AoTrace, Profile, Reduced, SimoSettings, TxRule};
use crate::siso::solve_siso;
use crate::{CVector, Error, Result, Scalar};

/// Design under the perfect-CSI assumption. Callers evaluate it with the
/// true configuration.
pub fn solve_ignoring_csi_errors<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    settings: &SimoSettings<T>,
) -> Result<TransceiverDesign<T>> {
    let assumed = config.without_est_errors();
    if config.num_rx_antennas == 1 {
        Ok(solve_siso(est_channels, &assumed)?.design())
    } else {
        Ok(solve_simo_with(est_channels, &assumed, settings)?.final_design)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPowerRule {
    FullPower,
    ChannelInversion,
}

/// Transmit magnitudes prescribed by `rule`; independent of the beamformer.
pub fn rule_amplitudes<T: Scalar>(
    rule: FixedPowerRule,
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<Vec<T>> {
    config.validate()?;
    config.check_channels(est_channels)?;
    let caps = config.power_budget.iter().map(|p| p.sqrt());
    match rule {
        FixedPowerRule::FullPower => Ok(caps.collect()),
        FixedPowerRule::ChannelInversion => {
            let norms: Vec<T> = est_channels.iter().map(|h| norm_sqr(h).sqrt()).collect();
            if let Some(wd) = norms.iter().position(|&n| n == T::zero()) {
                return Err(Error::DegenerateChannel { wd });
            }
            // received magnitude every device can reach; with a common budget
            // this is √P · min_i ‖ĥ_i‖
            let level = caps.zip(&norms).map(|(c, &n)| c * n).fold(T::infinity(), T::min);
            Ok(norms.iter().map(|&n| level / n).collect())
        }
    }
}

/// Receive design for a fixed-magnitude rule: alternate sum-MMSE beamformer
/// updates with phase re-alignment, accelerated like
/// [`solve_simo`](crate::simo::solve_simo). The recorded objective is that of
/// the re-aligned pair.
pub fn fixed_rule_alternation<T: Scalar>(
    rule: FixedPowerRule,
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    tol: T,
    max_iter: usize,
) -> Result<AoTrace<T>> {
    let amplitudes = rule_amplitudes(rule, est_channels, config)?;
    let n = config.num_rx_antennas;

    if n == 1 {
        // closed-form minimiser of Σ(w|ĥ|b̃ − 1)² + w²Σσ²_e b̃² + w²σ²_z over w ≥ 0
        let (mut num, mut den) = (T::zero(), config.noise_var);
        for ((h, &a), &var_e) in est_channels.iter().zip(&amplitudes).zip(&config.est_error_var) {
            let g = h[0].norm();
            num += g * a;
            den += a * a * (g * g + var_e);
        }
        let w = vec![Complex::new(num / den, T::zero())];
        let tx = align_phases(&amplitudes, &w, est_channels);
        let obj = breakdown_unchecked(&tx, &w, est_channels, config).objective();
        return Ok(AoTrace {
            iterations: 1,
            objective_history: vec![obj],
            converged: true,
            final_design: TransceiverDesign {
                tx_coeff: tx,
                rx_beamformer: w,
            },
        });
    }

    let reduced = Reduced::new(est_channels, config);
    let profile = Profile::new(
        reduced.channels(est_channels),
        &reduced.config,
        TxRule::Fixed(&amplitudes),
        false,
    );
    let w0 = reduced.project(&matched_sum(est_channels, n));
    Ok(reduced.lift(profile.run(w0, tol, max_iter, true)?))
}

pub fn receive_design_for_fixed_rule<T: Scalar>(
    rule: FixedPowerRule,
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<CVector<T>> {
    Ok(fixed_rule_alternation(
        rule,
        est_channels,
        config,
        T::lit(crate::simo::DEFAULT_TOL),
        crate::simo::DEFAULT_MAX_ITER,
    )?
    .final_design
    .rx_beamformer)
}

pub fn full_power_design<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<TransceiverDesign<T>> {
    fixed_rule_design(FixedPowerRule::FullPower, est_channels, config)
}

pub fn channel_inversion_design<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<TransceiverDesign<T>> {
    fixed_rule_design(FixedPowerRule::ChannelInversion, est_channels, config)
}

fn fixed_rule_design<T: Scalar>(
    rule: FixedPowerRule,
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<TransceiverDesign<T>> {
    let w = receive_design_for_fixed_rule(rule, est_channels, config)?;
    let amplitudes = rule_amplitudes(rule, est_channels, config)?;
    Ok(TransceiverDesign {
        tx_coeff: align_phases(&amplitudes, &w, est_channels),
        rx_beamformer: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_channel_instance;
    use crate::mse::analytic_mse;
    use crate::rng::seeded;
    use crate::simo::optimal_w_given_b;
    use crate::siso::{candidate_w, compute_quality_indicators};
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn ignoring_errors_coincides_when_errors_absent() {
        for n in [1, 3] {
            let cfg = SystemConfig::uniform(5, n, 3.0, 0.0, 1.0, 1.0);
            let inst = generate_channel_instance(&cfg, &mut seeded(n as u64)).unwrap();
            let h = &inst.est_channel;
            let ign = solve_ignoring_csi_errors(h, &cfg, &SimoSettings::default()).unwrap();
            let prop = if n == 1 {
                solve_siso(h, &cfg).unwrap().design()
            } else {
                solve_simo_with(h, &cfg, &SimoSettings::default()).unwrap().final_design
            };
            assert_eq!(ign, prop);
        }
    }

    #[test]
    fn ignoring_errors_is_worse_at_high_power() {
        let cfg = SystemConfig::uniform(6, 1, 1e6, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(2)).unwrap();
        let h = &inst.est_channel;
        let ign = solve_ignoring_csi_errors(h, &cfg, &SimoSettings::default()).unwrap();
        let prop = solve_siso(h, &cfg).unwrap().design();
        let m_ign = analytic_mse(&ign, h, &cfg).unwrap().total;
        let m_prop = analytic_mse(&prop, h, &cfg).unwrap().total;
        assert!(m_ign > m_prop, "{m_ign} <= {m_prop}");
    }

    #[test]
    fn ignoring_errors_single_device_closed_form() {
        // without errors the optimum is full power with w = √P/(P + σ²_z);
        // scoring it under σ²_e adds w²σ²_e P
        let p = 1e6;
        let cfg = SystemConfig::uniform(1, 1, p, 0.1, 1.0, 1.0);
        let h = vec![vec![c(1.0, 0.0)]];
        let ign = solve_ignoring_csi_errors(&h, &cfg, &SimoSettings::default()).unwrap();
        let w = p.sqrt() / (p + 1.0);
        assert!((ign.rx_beamformer[0].re - w).abs() < 1e-15);
        assert!((ign.tx_coeff[0].re - p.sqrt()).abs() < 1e-9);
        let m = analytic_mse(&ign, &h, &cfg).unwrap();
        assert!((m.csi_related - w * w * 0.1 * p).abs() < 1e-12);
        assert!(m.total > solve_siso(&h, &cfg).unwrap().objective_value);
    }

    #[test]
    fn full_power_magnitudes() {
        let cfg = SystemConfig::uniform(4, 3, 2.5, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(4)).unwrap();
        let d = full_power_design(&inst.est_channel, &cfg).unwrap();
        for b in &d.tx_coeff {
            assert!((b.norm() - 2.5f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn full_power_single_antenna_matches_stationary_point() {
        let cfg = SystemConfig::uniform(5, 1, 2.0, 0.2, 0.7, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(17)).unwrap();
        let h = &inst.est_channel;
        let d = full_power_design(h, &cfg).unwrap();
        // w̃_K from dF_K/dw = 0
        let (num, den) = h.iter().fold((0.0, 0.7), |(n, d), hk| {
            let g = hk[0].norm();
            (n + 2f64.sqrt() * g, d + 2.0 * (g * g + 0.2))
        });
        assert!((d.rx_beamformer[0].re - num / den).abs() < 1e-15);
        // the all-full-power candidate is the same point, clamped to its interval
        let q = compute_quality_indicators(h, &cfg).unwrap();
        let (w_k, _) = candidate_w(5, &q, h, &cfg).unwrap();
        assert!((w_k - (num / den).min(1.0 / q[4].rho)).abs() < 1e-15);
    }

    #[test]
    fn full_power_worked_instance() {
        let cfg = SystemConfig::uniform(1, 1, 1.0, 0.0, 1.0, 1.0);
        let w = receive_design_for_fixed_rule(FixedPowerRule::FullPower, &[vec![c(1.0, 0.0)]], &cfg).unwrap();
        assert!((w[0] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_device_keeps_zero_phase() {
        let h = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]];
        let tx = align_phases(&[2.0, 2.0], &[c(1.0, 0.0), c(0.0, 0.0)], &h);
        assert_eq!(tx[1], c(2.0, 0.0));
    }

    #[test]
    fn channel_inversion_properties() {
        let cfg = SystemConfig::uniform(5, 4, 3.0, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(21)).unwrap();
        let h = &inst.est_channel;
        let d = channel_inversion_design(h, &cfg).unwrap();
        let prods: Vec<f64> = d
            .tx_coeff
            .iter()
            .zip(h)
            .map(|(b, hk)| b.norm() * norm_sqr::<f64>(hk).sqrt())
            .collect();
        for p in &prods {
            assert!((p - prods[0]).abs() < 1e-12 * prods[0]);
        }
        let weakest = (0..5)
            .min_by(|&a, &b| norm_sqr(&h[a]).partial_cmp(&norm_sqr(&h[b])).unwrap())
            .unwrap();
        assert!((d.tx_coeff[weakest].norm() - 3f64.sqrt()).abs() < 1e-14);
        assert!(d.is_feasible(&cfg));
    }

    #[test]
    fn channel_inversion_with_equal_norms_is_full_power() {
        let cfg = SystemConfig::uniform(3, 2, 2.0, 0.1, 1.0, 1.0);
        let h = vec![
            vec![c(1.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 1.0), c(1.0, 0.0)],
            vec![c(-1.0, 0.0), c(1.0, 0.0)],
        ];
        let inv = channel_inversion_design(&h, &cfg).unwrap();
        let full = full_power_design(&h, &cfg).unwrap();
        for (a, b) in inv.tx_coeff.iter().zip(&full.tx_coeff) {
            assert!((a - b).norm() < 1e-12);
        }
        for (a, b) in inv.rx_beamformer.iter().zip(&full.rx_beamformer) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn channel_inversion_rejects_zero_channel() {
        let cfg = SystemConfig::uniform(2, 1, 1.0, 0.1, 1.0, 1.0);
        assert_eq!(
            channel_inversion_design(&[vec![c(1.0, 0.0)], vec![c(0.0, 0.0)]], &cfg),
            Err(Error::DegenerateChannel { wd: 1 })
        );
    }

    #[test]
    fn single_w_update_is_shared_code_path() {
        let cfg = SystemConfig::uniform(3, 3, 2.0, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(3)).unwrap();
        let h = &inst.est_channel;
        let t = fixed_rule_alternation(FixedPowerRule::FullPower, h, &cfg, 1e-9, 1).unwrap();
        let w0 = matched_sum(h, 3);
        let b0 = align_phases(&rule_amplitudes(FixedPowerRule::FullPower, h, &cfg).unwrap(), &w0, h);
        assert_eq!(t.final_design.rx_beamformer, optimal_w_given_b(&b0, h, &cfg).unwrap());
    }

    #[test]
    fn alternation_is_monotone() {
        let mut rng = seeded(44);
        for i in 0..100 {
            let k = rng.random_range(2..15);
            let n = rng.random_range(2..10);
            let cfg = SystemConfig::uniform(k, n, rng.random_range(0.1..100.0), 0.1, 1.0, 1.0);
            let inst = generate_channel_instance(&cfg, &mut rng).unwrap();
            let rule = if i % 2 == 0 {
                FixedPowerRule::FullPower
            } else {
                FixedPowerRule::ChannelInversion
            };
            let t = fixed_rule_alternation(rule, &inst.est_channel, &cfg, 1e-9, 1000).unwrap();
            for pair in t.objective_history.windows(2) {
                assert!(pair[1] - pair[0] <= 1e-12, "{pair:?}");
            }
        }
    }
}
