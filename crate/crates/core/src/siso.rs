//! Globally optimal single-antenna design.
//!
//! With one receive antenna the beamformer reduces to a nonnegative
//! denoising factor `w`, and each device aligns its phase with `ĥ_k*`. For a
//! fixed `w` the best amplitude is the capped regularised inversion
//! `min(√P_k, |ĥ_k| / (w(|ĥ_k|² + σ²_{e,k})))`. Substituting it back leaves a
//! one-dimensional problem in `w` that is piecewise quadratic: sorting the
//! devices by their quality indicator `ρ_k = √P_k (|ĥ_k|² + σ²_{e,k}) / |ĥ_k|`
//! splits `w ≥ 0` into `K + 1` intervals, and on interval `k` exactly the `k`
//! worst devices transmit at full power. Minimising each piece in closed form
//! and keeping the best gives the global optimum.

use std::cmp::Ordering;

use num_complex::Complex;

use crate::model::SystemConfig;
use crate::mse::TransceiverDesign;
use crate::{CVector, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdQuality<T> {
    pub wd_index: usize,
    /// `+∞` when the estimated channel is zero.
    pub rho: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SisoSolution<T> {
    pub tx_coeff: CVector<T>,
    pub denoise_factor: T,
    /// Number of full-power devices in the sorted order.
    pub threshold_index: usize,
    /// Unscaled objective `K² · MSE` at the solution.
    pub objective_value: T,
    /// Device indices in ascending-`ρ` order.
    pub sorted_order: Vec<usize>,
}

impl<T: Scalar> SisoSolution<T> {
    pub fn design(&self) -> TransceiverDesign<T> {
        TransceiverDesign {
            tx_coeff: self.tx_coeff.clone(),
            rx_beamformer: vec![Complex::new(self.denoise_factor, T::zero())],
        }
    }
}

fn check_siso<T: Scalar>(est_channels: &[CVector<T>], config: &SystemConfig<T>) -> Result<()> {
    config.validate()?;
    if config.num_rx_antennas != 1 {
        return Err(Error::WrongAntennaCount {
            expected: 1,
            found: config.num_rx_antennas,
        });
    }
    config.check_channels(est_channels)
}

/// Best transmit amplitude for a fixed denoising factor.
///
/// `w = 0` returns `√P` and `ĥ = 0` returns `0`.
pub fn optimal_amplitude_given_w<T: Scalar>(w: T, h_est: Complex<T>, power: T, est_error_var: T) -> Result<T> {
    for (field, v) in [("w", w), ("power", power), ("est_error_var", est_error_var)] {
        if v.is_nan() {
            return Err(Error::NonFinite { field });
        }
        if v < T::zero() {
            return Err(Error::NegativeValue { field });
        }
    }
    let gain = h_est.norm();
    if gain == T::zero() {
        return Ok(T::zero());
    }
    let cap = power.sqrt();
    if w == T::zero() {
        return Ok(cap);
    }
    Ok(cap.min(gain / (w * (gain * gain + est_error_var))))
}

/// Quality indicators `ρ_k`, stably sorted ascending.
pub fn compute_quality_indicators<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<Vec<WdQuality<T>>> {
    check_siso(est_channels, config)?;
    let mut q: Vec<WdQuality<T>> = est_channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let gain = h[0].norm();
            let rho = if gain == T::zero() {
                T::infinity()
            } else {
                config.power_budget[k].sqrt() * (gain * gain + config.est_error_var[k]) / gain
            };
            WdQuality { wd_index: k, rho }
        })
        .collect();
    // stable: equal ρ keep index order
    q.sort_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap_or(Ordering::Equal));
    Ok(q)
}

/// `1/ρ` at 1-based sorted position `pos`, with `1/ρ_0 = ∞` and `1/ρ_{K+1} = 0`.
fn inv_rho<T: Scalar>(sorted: &[WdQuality<T>], pos: usize) -> T {
    if pos == 0 {
        T::infinity()
    } else if pos > sorted.len() {
        T::zero()
    } else {
        T::one() / sorted[pos - 1].rho
    }
}

/// Residual error of a device on regularised inversion: `σ²_e / (|ĥ|² + σ²_e)`,
/// or `1` for an unreachable device with `ĥ = 0` and `σ²_e = 0`.
pub(crate) fn inversion_residual<T: Scalar>(gain_sq: T, est_error_var: T) -> T {
    let den = gain_sq + est_error_var;
    if den == T::zero() {
        T::one()
    } else {
        est_error_var / den
    }
}

/// Piecewise objective `F_k(w)`: full power for the first `k` sorted devices,
/// regularised inversion for the rest.
pub fn interval_objective<T: Scalar>(
    k: usize,
    w: T,
    sorted: &[WdQuality<T>],
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> T {
    if w.is_infinite() {
        return T::infinity();
    }
    let mut f = w * w * config.noise_var;
    for (pos, q) in sorted.iter().enumerate() {
        let i = q.wd_index;
        let gain = est_channels[i][0].norm();
        let var_e = config.est_error_var[i];
        if pos < k {
            let p = config.power_budget[i];
            let m = w * p.sqrt() * gain - T::one();
            f += m * m + w * w * p * var_e;
        } else {
            f += inversion_residual(gain * gain, var_e);
        }
    }
    f
}

/// Stationary point of `F_k` projected onto interval `k`; returns `(w_k*, F_k(w_k*))`.
pub fn candidate_w<T: Scalar>(
    k: usize,
    sorted: &[WdQuality<T>],
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<(T, T)> {
    if k > sorted.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            max: sorted.len(),
        });
    }
    let (mut num, mut den) = (T::zero(), config.noise_var);
    for q in &sorted[..k] {
        let i = q.wd_index;
        let gain = est_channels[i][0].norm();
        let p = config.power_budget[i];
        num += p.sqrt() * gain;
        den += p * (gain * gain + config.est_error_var[i]);
    }
    let stationary = num / den;
    let hi = inv_rho(sorted, k);
    let lo = inv_rho(sorted, k + 1);
    let w = stationary.min(hi).max(lo);
    Ok((w, interval_objective(k, w, sorted, est_channels, config)))
}

pub fn solve_siso<T: Scalar>(est_channels: &[CVector<T>], config: &SystemConfig<T>) -> Result<SisoSolution<T>> {
    let sorted = compute_quality_indicators(est_channels, config)?;
    let mut best: Option<(usize, T, T)> = None;
    for k in 0..=sorted.len() {
        let (w, f) = candidate_w(k, &sorted, est_channels, config)?;
        match best {
            Some((_, _, bf)) if !(f < bf) => {}
            _ => best = Some((k, w, f)),
        }
    }
    let (k_star, w, objective_value) = best.expect("K + 1 >= 1 candidates");

    let zero = Complex::new(T::zero(), T::zero());
    let mut tx_coeff = vec![zero; config.num_wds];
    for (pos, q) in sorted.iter().enumerate() {
        let i = q.wd_index;
        let h = est_channels[i][0];
        let gain = h.norm();
        if gain == T::zero() {
            continue;
        }
        let cap = config.power_budget[i].sqrt();
        let amplitude = if pos < k_star {
            cap
        } else {
            optimal_amplitude_given_w(w, h, config.power_budget[i], config.est_error_var[i])?
        };
        tx_coeff[i] = h.conj().unscale(gain).scale(amplitude.min(cap));
    }

    Ok(SisoSolution {
        tx_coeff,
        denoise_factor: w,
        threshold_index: k_star,
        objective_value,
        sorted_order: sorted.iter().map(|q| q.wd_index).collect(),
    })
}
