//! Computation MSE of the average function.
//!
//! For a design `(b, w)` and estimated channels `ĥ_k` the MSE, averaged over
//! the messages and the estimation errors, is
//!
//! ```text
//! MSE = (1/K²) [ Σ_k |wᴴĥ_k b_k − 1|² + Σ_k ‖w‖² σ²_{e,k} |b_k|² + ‖w‖² σ²_z ]
//! ```
//!
//! The bracket is the unscaled objective returned by [`objective_p1`].

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{inner, norm_sqr};
use crate::model::{fill_cscg, SystemConfig};
use crate::rng::stream;
use crate::{CVector, Error, Result, Scalar};

/// Relative slack allowed on the power constraint `|b_k|² ≤ P_k`.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransceiverDesign<T> {
    pub tx_coeff: CVector<T>,
    pub rx_beamformer: CVector<T>,
}

impl<T: Scalar> TransceiverDesign<T> {
    pub fn check_dims(&self, config: &SystemConfig<T>) -> Result<()> {
        if self.tx_coeff.len() != config.num_wds {
            return Err(Error::DimensionMismatch {
                field: "tx_coeff",
                expected: config.num_wds,
                found: self.tx_coeff.len(),
            });
        }
        if self.rx_beamformer.len() != config.num_rx_antennas {
            return Err(Error::DimensionMismatch {
                field: "rx_beamformer",
                expected: config.num_rx_antennas,
                found: self.rx_beamformer.len(),
            });
        }
        Ok(())
    }

    pub fn is_feasible(&self, config: &SystemConfig<T>) -> bool {
        let slack = T::one() + T::lit(FEASIBILITY_SLACK);
        self.tx_coeff
            .iter()
            .zip(&config.power_budget)
            .all(|(b, &p)| b.norm_sqr() <= p * slack)
    }
}

/// The three error terms of the unscaled objective and the resulting MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseBreakdown<T> {
    pub misalignment: T,
    pub csi_related: T,
    pub noise: T,
    /// `(misalignment + csi_related + noise) / K²`.
    pub total: T,
}

impl<T: Scalar> MseBreakdown<T> {
    pub fn objective(&self) -> T {
        self.misalignment + self.csi_related + self.noise
    }
}

pub fn analytic_mse<T: Scalar>(
    design: &TransceiverDesign<T>,
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<MseBreakdown<T>> {
    config.validate()?;
    config.check_channels(est_channels)?;
    design.check_dims(config)?;
    Ok(breakdown_unchecked(
        &design.tx_coeff,
        &design.rx_beamformer,
        est_channels,
        config,
    ))
}

pub(crate) fn breakdown_unchecked<T: Scalar>(
    tx: &[Complex<T>],
    w: &[Complex<T>],
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> MseBreakdown<T> {
    let w_sq = norm_sqr(w);
    let one = Complex::new(T::one(), T::zero());
    let mut misalignment = T::zero();
    let mut csi_weight = T::zero();
    for ((h, b), &var_e) in est_channels.iter().zip(tx).zip(&config.est_error_var) {
        misalignment += (inner(w, h) * b - one).norm_sqr();
        csi_weight += var_e * b.norm_sqr();
    }
    let csi_related = w_sq * csi_weight;
    let noise = w_sq * config.noise_var;
    let k = T::from_usize(config.num_wds).expect("K fits scalar");
    MseBreakdown {
        misalignment,
        csi_related,
        noise,
        total: (misalignment + csi_related + noise) / (k * k),
    }
}

/// Unscaled objective: `K² · MSE`.
pub fn objective_p1<T: Scalar>(
    design: &TransceiverDesign<T>,
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<T> {
    analytic_mse(design, est_channels, config).map(|m| m.objective())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMse<T> {
    pub mean: T,
    pub std_error: T,
    pub samples: usize,
}

/// Samples per independently seeded Monte Carlo chunk.
const CHUNK: usize = 4096;

#[derive(Clone, Copy)]
struct Moments<T> {
    n: usize,
    mean: T,
    m2: T,
}

impl<T: Scalar> Moments<T> {
    fn empty() -> Self {
        Self {
            n: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    fn push(&mut self, x: T) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / T::from_usize(self.n).unwrap();
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let (na, nb, nt) = (
            T::from_usize(self.n).unwrap(),
            T::from_usize(other.n).unwrap(),
            T::from_usize(n).unwrap(),
        );
        let d = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + d * nb / nt,
            m2: self.m2 + other.m2 + d * d * na * nb / nt,
        }
    }
}

/// Monte Carlo estimate of the MSE with `ĥ` held fixed.
///
/// Each sample draws unit-variance CSCG messages, fresh estimation errors
/// `e_k` and noise `z`, forms `h_k = ĥ_k − e_k`, and scores `|f̂ − f|²`.
/// Samples are split into chunks with their own derived streams, so the
/// result depends only on `seed` and `n_samples`.
pub fn empirical_mse<T: Scalar>(
    design: &TransceiverDesign<T>,
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    n_samples: usize,
    seed: u64,
) -> Result<EmpiricalMse<T>> {
    if n_samples == 0 {
        return Err(Error::InvalidDimension { field: "n_samples" });
    }
    config.validate()?;
    config.check_channels(est_channels)?;
    design.check_dims(config)?;

    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<Moments<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n_samples - c * CHUNK);
            sample_chunk(design, est_channels, config, len, seed, c as u64)
        })
        .collect();
    let m = parts.into_iter().fold(Moments::empty(), Moments::merge);
    let std_error = if m.n > 1 {
        (m.m2 / T::from_usize((m.n - 1) * m.n).unwrap()).sqrt()
    } else {
        T::zero()
    };
    Ok(EmpiricalMse {
        mean: m.mean,
        std_error,
        samples: m.n,
    })
}

fn sample_chunk<T: Scalar>(
    design: &TransceiverDesign<T>,
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    len: usize,
    seed: u64,
    chunk: u64,
) -> Moments<T> {
    let mut rng = stream(seed, &[chunk]);
    let k = T::from_usize(config.num_wds).unwrap();
    let w = &design.rx_beamformer;
    let zero = Complex::new(T::zero(), T::zero());
    let mut m = Moments::empty();
    let mut y = vec![zero; config.num_rx_antennas];
    for _ in 0..len {
        let s = fill_cscg(config.num_wds, T::one(), &mut rng);
        y.copy_from_slice(&fill_cscg(config.num_rx_antennas, config.noise_var, &mut rng));
        for (idx, h_est) in est_channels.iter().enumerate() {
            let e = fill_cscg(config.num_rx_antennas, config.est_error_var[idx], &mut rng);
            let tx = design.tx_coeff[idx] * s[idx];
            for ((yi, hi), ei) in y.iter_mut().zip(h_est).zip(&e) {
                *yi += (hi - ei) * tx;
            }
        }
        let f_hat = inner(w, &y) / k;
        let f = s.iter().fold(zero, |a, x| a + x) / k;
        m.push((f_hat - f).norm_sqr());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_channel_instance;
    use crate::rng::seeded;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn zero_beamformer_gives_one_over_k() {
        let cfg = SystemConfig::<f64>::uniform(4, 3, 2.0, 0.2, 0.5, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(3)).unwrap();
        let design = TransceiverDesign {
            tx_coeff: vec![c(1.0, 0.5); 4],
            rx_beamformer: vec![c(0.0, 0.0); 3],
        };
        let m = analytic_mse(&design, &inst.est_channel, &cfg).unwrap();
        assert_eq!(m.misalignment, 4.0);
        assert_eq!(m.csi_related, 0.0);
        assert_eq!(m.noise, 0.0);
        assert!((m.total - 0.25).abs() < 1e-15);
        assert_eq!(objective_p1(&design, &inst.est_channel, &cfg).unwrap(), 4.0);
    }

    #[test]
    fn noise_only_scalar_case() {
        let cfg = SystemConfig::<f64>::uniform(1, 1, 1.0, 0.0, 0.25, 1.0);
        let design = TransceiverDesign {
            tx_coeff: vec![c(1.0, 0.0)],
            rx_beamformer: vec![c(1.0, 0.0)],
        };
        let m = analytic_mse(&design, &[vec![c(1.0, 0.0)]], &cfg).unwrap();
        assert_eq!(m.total, 0.25);
        assert_eq!(m.misalignment, 0.0);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let cfg = SystemConfig::<f64>::uniform(2, 2, 1.0, 0.0, 1.0, 1.0);
        let design = TransceiverDesign {
            tx_coeff: vec![c(1.0, 0.0); 2],
            rx_beamformer: vec![c(1.0, 0.0); 3],
        };
        let h = vec![vec![c(1.0, 0.0); 2]; 2];
        assert!(matches!(
            analytic_mse(&design, &h, &cfg),
            Err(Error::DimensionMismatch {
                field: "rx_beamformer",
                ..
            })
        ));
    }

    #[test]
    fn empirical_exact_recovery() {
        let cfg = SystemConfig::<f64>::uniform(3, 2, 10.0, 0.0, 1e-12, 1.0);
        let h = vec![
            vec![c(1.0, 0.5), c(-0.3, 0.2)],
            vec![c(0.2, -1.0), c(0.7, 0.1)],
            vec![c(-0.4, 0.4), c(1.1, -0.6)],
        ];
        let w = vec![c(0.6, -0.1), c(0.3, 0.4)];
        let tx = h.iter().map(|hk| Complex::new(1.0, 0.0) / inner(&w, hk)).collect();
        let design = TransceiverDesign {
            tx_coeff: tx,
            rx_beamformer: w,
        };
        let e = empirical_mse(&design, &h, &cfg, 10_000, 1).unwrap();
        assert!(e.mean <= 1e-9, "mean {}", e.mean);
    }

    #[test]
    fn empirical_zero_beamformer() {
        let cfg = SystemConfig::<f64>::uniform(5, 2, 1.0, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(8)).unwrap();
        let design = TransceiverDesign {
            tx_coeff: vec![c(1.0, 0.0); 5],
            rx_beamformer: vec![c(0.0, 0.0); 2],
        };
        let e = empirical_mse(&design, &inst.est_channel, &cfg, 100_000, 2).unwrap();
        assert!((e.mean - 0.2).abs() <= 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn empirical_matches_analytic_small_instance() {
        let cfg = SystemConfig::<f64>::uniform(3, 2, 1.0, 0.3, 0.5, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(21)).unwrap();
        let design = TransceiverDesign {
            tx_coeff: vec![c(0.6, 0.2), c(-0.5, 0.5), c(0.1, -0.9)],
            rx_beamformer: vec![c(0.4, 0.3), c(-0.2, 0.5)],
        };
        let a = analytic_mse(&design, &inst.est_channel, &cfg).unwrap();
        let e = empirical_mse(&design, &inst.est_channel, &cfg, 100_000, 4).unwrap();
        assert_eq!(e.samples, 100_000);
        assert!((e.mean - a.total).abs() <= 3.0 * e.std_error, "{e:?} vs {}", a.total);
    }

    #[test]
    fn empirical_is_deterministic() {
        let cfg = SystemConfig::<f64>::uniform(2, 2, 1.0, 0.3, 0.5, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(2)).unwrap();
        let design = TransceiverDesign {
            tx_coeff: vec![c(0.6, 0.2), c(-0.5, 0.5)],
            rx_beamformer: vec![c(0.4, 0.3), c(-0.2, 0.5)],
        };
        let a = empirical_mse(&design, &inst.est_channel, &cfg, 9000, 4).unwrap();
        let b = empirical_mse(&design, &inst.est_channel, &cfg, 9000, 4).unwrap();
        assert_eq!(a, b);
        assert!(empirical_mse(&design, &inst.est_channel, &cfg, 0, 4).is_err());
    }
}
