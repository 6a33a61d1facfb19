//! Scenario configuration and random channel realisations.
//!
//! True channels are `h_k ~ CN(0, σ²_{h,k} I)`, estimation errors are
//! `e_k ~ CN(0, σ²_{e,k} I)`, and the access point sees `ĥ_k = h_k + e_k`.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{CVector, Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig<T> {
    pub num_wds: usize,
    pub num_rx_antennas: usize,
    /// Per-device transmit power budget `P_k`, linear units.
    pub power_budget: Vec<T>,
    /// Per-device estimation error variance `σ²_{e,k}`.
    pub est_error_var: Vec<T>,
    /// Receiver noise variance `σ²_z`, strictly positive.
    pub noise_var: T,
    /// Per-device large-scale channel variance `σ²_{h,k}`.
    pub channel_var: Vec<T>,
}

impl<T: Scalar> SystemConfig<T> {
    /// Configuration with the same budget and variances at every device.
    pub fn uniform(
        num_wds: usize,
        num_rx_antennas: usize,
        power: T,
        est_error_var: T,
        noise_var: T,
        channel_var: T,
    ) -> Self {
        Self {
            num_wds,
            num_rx_antennas,
            power_budget: vec![power; num_wds],
            est_error_var: vec![est_error_var; num_wds],
            noise_var,
            channel_var: vec![channel_var; num_wds],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_wds == 0 {
            return Err(Error::InvalidDimension { field: "num_wds" });
        }
        if self.num_rx_antennas == 0 {
            return Err(Error::InvalidDimension {
                field: "num_rx_antennas",
            });
        }
        for (field, values) in [
            ("power_budget", &self.power_budget),
            ("est_error_var", &self.est_error_var),
            ("channel_var", &self.channel_var),
        ] {
            if values.len() != self.num_wds {
                return Err(Error::DimensionMismatch {
                    field,
                    expected: self.num_wds,
                    found: values.len(),
                });
            }
            check_nonnegative(field, values)?;
        }
        if !self.noise_var.is_finite() {
            return Err(Error::NonFinite { field: "noise_var" });
        }
        if !(self.noise_var > T::zero()) {
            return Err(Error::NonPositiveNoise);
        }
        Ok(())
    }

    pub fn with_power(&self, power: T) -> Self {
        Self {
            power_budget: vec![power; self.num_wds],
            ..self.clone()
        }
    }

    pub fn with_est_error_var(&self, var: T) -> Self {
        Self {
            est_error_var: vec![var; self.num_wds],
            ..self.clone()
        }
    }

    pub fn with_num_rx_antennas(&self, n: usize) -> Self {
        Self {
            num_rx_antennas: n,
            ..self.clone()
        }
    }

    /// Same scenario with perfect CSI assumed (`σ²_{e,k} = 0`).
    pub fn without_est_errors(&self) -> Self {
        self.with_est_error_var(T::zero())
    }

    /// Checks that `channels` has `K` entries of length `N_r`.
    pub fn check_channels(&self, channels: &[CVector<T>]) -> Result<()> {
        if channels.len() != self.num_wds {
            return Err(Error::DimensionMismatch {
                field: "est_channels",
                expected: self.num_wds,
                found: channels.len(),
            });
        }
        for h in channels {
            if h.len() != self.num_rx_antennas {
                return Err(Error::DimensionMismatch {
                    field: "est_channels[k]",
                    expected: self.num_rx_antennas,
                    found: h.len(),
                });
            }
            if !crate::linalg::all_finite(h) {
                return Err(Error::NonFinite { field: "est_channels" });
            }
        }
        Ok(())
    }
}

fn check_nonnegative<T: Scalar>(field: &'static str, values: &[T]) -> Result<()> {
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite { field });
        }
        if v < T::zero() {
            return Err(Error::NegativeValue { field });
        }
    }
    Ok(())
}

/// Channel realisation: truth, estimate and the error linking them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInstance<T> {
    pub true_channel: Vec<CVector<T>>,
    pub est_channel: Vec<CVector<T>>,
    pub error: Vec<CVector<T>>,
}

/// Draws a length-`dim` vector with i.i.d. `CN(0, variance)` entries.
pub fn sample_cscg_vector<T: Scalar, R: Rng + ?Sized>(dim: usize, variance: T, rng: &mut R) -> Result<CVector<T>> {
    if dim == 0 {
        return Err(Error::InvalidDimension { field: "dim" });
    }
    if !variance.is_finite() {
        return Err(Error::NonFinite { field: "variance" });
    }
    if variance < T::zero() {
        return Err(Error::NegativeValue { field: "variance" });
    }
    Ok(fill_cscg(dim, variance, rng))
}

pub(crate) fn fill_cscg<T: Scalar, R: Rng + ?Sized>(dim: usize, variance: T, rng: &mut R) -> CVector<T> {
    let scale = (variance / T::lit(2.0)).sqrt();
    (0..dim)
        .map(|_| {
            let re = T::standard_normal(rng);
            let im = T::standard_normal(rng);
            Complex::new(re * scale, im * scale)
        })
        .collect()
}

/// Draws `h_k` then `e_k` for each device in index order.
pub fn generate_channel_instance<T: Scalar, R: Rng + ?Sized>(
    config: &SystemConfig<T>,
    rng: &mut R,
) -> Result<ChannelInstance<T>> {
    config.validate()?;
    let n = config.num_rx_antennas;
    let mut true_channel = Vec::with_capacity(config.num_wds);
    let mut est_channel = Vec::with_capacity(config.num_wds);
    let mut error = Vec::with_capacity(config.num_wds);
    for k in 0..config.num_wds {
        let h = fill_cscg(n, config.channel_var[k], rng);
        let e = fill_cscg(n, config.est_error_var[k], rng);
        est_channel.push(h.iter().zip(&e).map(|(a, b)| a + b).collect());
        true_channel.push(h);
        error.push(e);
    }
    Ok(ChannelInstance {
        true_channel,
        est_channel,
        error,
    })
}
