//! Limiting MSE values for unbounded transmit power and for many receive
//! antennas.

use num_complex::Complex;

use crate::linalg::{inner, is_zero, norm_sqr};
use crate::model::SystemConfig;
use crate::siso::inversion_residual;
use crate::{CVector, Error, Result, Scalar};

fn k_sq<T: Scalar>(config: &SystemConfig<T>) -> T {
    let k = T::from_usize(config.num_wds).unwrap();
    k * k
}

/// Single-antenna MSE floor as all budgets grow without bound:
/// `(1/K²) Σ_k σ²_{e,k} / (|ĥ_k|² + σ²_{e,k})`.
pub fn prop1_limit<T: Scalar>(est_channels: &[CVector<T>], config: &SystemConfig<T>) -> Result<T> {
    config.validate()?;
    if config.num_rx_antennas != 1 {
        return Err(Error::WrongAntennaCount {
            expected: 1,
            found: config.num_rx_antennas,
        });
    }
    config.check_channels(est_channels)?;
    let sum: T = est_channels
        .iter()
        .zip(&config.est_error_var)
        .map(|(h, &v)| inversion_residual(h[0].norm_sqr(), v))
        .sum();
    Ok(sum / k_sq(config))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop2Limit<T> {
    /// MSE floor for the given beamformer as all budgets grow.
    pub limit: T,
    /// Beamformer-independent bound from Cauchy–Schwarz.
    pub lower_bound: T,
}

pub fn prop2_limit<T: Scalar>(
    w: &[Complex<T>],
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<Prop2Limit<T>> {
    config.validate()?;
    config.check_channels(est_channels)?;
    if w.len() != config.num_rx_antennas {
        return Err(Error::DimensionMismatch {
            field: "rx_beamformer",
            expected: config.num_rx_antennas,
            found: w.len(),
        });
    }
    if is_zero(w) {
        return Err(Error::DegenerateBeamformer);
    }
    let w_sq = norm_sqr(w);
    let (mut limit, mut lower) = (T::zero(), T::zero());
    for (h, &v) in est_channels.iter().zip(&config.est_error_var) {
        let eff = inner(w, h).norm_sqr();
        limit += inversion_residual(eff, w_sq * v);
        lower += inversion_residual(norm_sqr(h), v);
    }
    let ksq = k_sq(config);
    let out = Prop2Limit {
        limit: limit / ksq,
        lower_bound: lower / ksq,
    };
    debug_assert!(out.limit >= out.lower_bound - T::lit(1e-12));
    Ok(out)
}

/// Aggregate powers from the massive-antenna argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassiveMimoTerms<T> {
    /// `Σ_k |b_k|² N_r σ²_h`
    pub alpha: T,
    /// `Σ_k |b_k|² σ²_{e,k}`
    pub beta: T,
    /// `σ²_z`
    pub gamma: T,
}

impl<T: Scalar> MassiveMimoTerms<T> {
    pub fn new(
        tx_coeff: &[Complex<T>],
        num_rx_antennas: usize,
        channel_var: T,
        config: &SystemConfig<T>,
    ) -> Result<Self> {
        config.validate()?;
        if tx_coeff.len() != config.num_wds {
            return Err(Error::DimensionMismatch {
                field: "tx_coeff",
                expected: config.num_wds,
                found: tx_coeff.len(),
            });
        }
        if num_rx_antennas == 0 {
            return Err(Error::InvalidDimension {
                field: "num_rx_antennas",
            });
        }
        if !(channel_var >= T::zero()) || !channel_var.is_finite() {
            return Err(Error::NegativeValue { field: "channel_var" });
        }
        let nr = T::from_usize(num_rx_antennas).unwrap();
        let power: T = tx_coeff.iter().map(|b| b.norm_sqr()).sum();
        let beta = tx_coeff
            .iter()
            .zip(&config.est_error_var)
            .map(|(b, &v)| b.norm_sqr() * v)
            .sum();
        Ok(Self {
            alpha: power * nr * channel_var,
            beta,
            gamma: config.noise_var,
        })
    }
}

/// Massive-antenna MSE with pairwise-orthogonal channels:
/// `((β+γ)² + αβ + αγ) / (K² (α+β+γ)²)`.
///
/// `channel_var` is the per-component variance of the estimated channels,
/// assumed common to all devices. All-zero `b` is outside the regime of the
/// expression and is rejected.
pub fn prop3_asymptotic_mse<T: Scalar>(
    tx_coeff: &[Complex<T>],
    num_rx_antennas: usize,
    channel_var: T,
    config: &SystemConfig<T>,
) -> Result<T> {
    if is_zero(tx_coeff) {
        return Err(Error::ZeroCoefficients);
    }
    let MassiveMimoTerms { alpha, beta, gamma } =
        MassiveMimoTerms::new(tx_coeff, num_rx_antennas, channel_var, config)?;
    let bg = beta + gamma;
    let s = alpha + bg;
    Ok((bg * bg + alpha * beta + alpha * gamma) / (k_sq(config) * s * s))
}

/// Orthogonal-channel MSE that keeps each device's own received power:
/// `(1/K²) Σ_k (β+γ) / (|b_k|² N_r σ²_h + β + γ)`.
///
/// Same assumptions as [`prop3_asymptotic_mse`], but `Σ_k |b_k|² ĥ_k ĥ_kᴴ` is
/// treated as a sum of rank-one terms on orthogonal directions instead of a
/// multiple of the identity. This tracks the exact MSE at finite `N_r`
/// closely, while the pooled expression underestimates it by roughly a factor
/// `K` once `α` dominates.
pub fn orthogonal_channel_mse<T: Scalar>(
    tx_coeff: &[Complex<T>],
    num_rx_antennas: usize,
    channel_var: T,
    config: &SystemConfig<T>,
) -> Result<T> {
    if is_zero(tx_coeff) {
        return Err(Error::ZeroCoefficients);
    }
    let MassiveMimoTerms { beta, gamma, .. } = MassiveMimoTerms::new(tx_coeff, num_rx_antennas, channel_var, config)?;
    let bg = beta + gamma;
    let per_device = T::from_usize(num_rx_antennas).unwrap() * channel_var;
    let sum: T = tx_coeff.iter().map(|b| bg / (b.norm_sqr() * per_device + bg)).sum();
    Ok(sum / k_sq(config))
}
