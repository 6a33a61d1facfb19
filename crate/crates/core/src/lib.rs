//! Over-the-air computation (AirComp) transceiver design under imperfect CSI.
//!
//! The access point only knows channel estimates `ĥ_k = h_k + e_k`, where the
//! estimation error `e_k` is circularly symmetric complex Gaussian with
//! per-device variance `σ²_{e,k}`. This crate computes transmit coefficients
//! `b_k` and a receive beamformer `w` that minimise the computation MSE of the
//! average `(1/K) Σ s_k`, evaluates that MSE both analytically and by Monte
//! Carlo, and runs the benchmark sweeps comparing the optimised design with
//! three fixed-rule baselines.
//!
//! All numerical routines are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root pin the common `f64` instantiations. The sweep
//! harness and the verification suite work in `f64` only.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod baselines;
mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod mse;
pub mod oracle;
pub mod rng;
mod scalar;
pub mod scenario;
pub mod simo;
pub mod siso;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use num_complex::Complex;

/// Complex column vector, one entry per receive antenna.
pub type CVector<T> = Vec<Complex<T>>;

pub type SystemConfig64 = model::SystemConfig<f64>;
pub type SystemConfig32 = model::SystemConfig<f32>;
pub type ChannelInstance64 = model::ChannelInstance<f64>;
pub type ChannelInstance32 = model::ChannelInstance<f32>;
pub type TransceiverDesign64 = mse::TransceiverDesign<f64>;
pub type TransceiverDesign32 = mse::TransceiverDesign<f32>;
pub type MseBreakdown64 = mse::MseBreakdown<f64>;
pub type SisoSolution64 = siso::SisoSolution<f64>;
pub type AoTrace64 = simo::AoTrace<f64>;
pub type Complex64 = Complex<f64>;
pub type Complex32 = Complex<f32>;
