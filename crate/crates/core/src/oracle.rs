//! Brute-force reference solutions for small instances.
//!
//! These routines never call the closed-form interval machinery of
//! [`crate::siso`] or the alternating loop of [`crate::simo`] (except where
//! the multistart probe deliberately exercises it); they scan the design
//! space directly and polish the best grid points locally.

use num_complex::Complex;

use crate::linalg::{inner, norm_sqr};
use crate::model::SystemConfig;
use crate::simo::{optimal_b_given_w, solve_simo, InitStrategy, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::siso::optimal_amplitude_given_w;
use crate::{CVector, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint<T> {
    pub w: T,
    /// Unscaled objective `K² · MSE`.
    pub objective: T,
}

fn require_siso<T: Scalar>(est_channels: &[CVector<T>], config: &SystemConfig<T>) -> Result<()> {
    config.validate()?;
    if config.num_rx_antennas != 1 {
        return Err(Error::WrongAntennaCount {
            expected: 1,
            found: config.num_rx_antennas,
        });
    }
    config.check_channels(est_channels)
}

/// Objective at denoising factor `w` with every amplitude at its per-device
/// optimum and phases aligned.
pub fn siso_objective_at<T: Scalar>(w: T, est_channels: &[CVector<T>], config: &SystemConfig<T>) -> T {
    let mut f = w * w * config.noise_var;
    for (k, h) in est_channels.iter().enumerate() {
        let gain = h[0].norm();
        let var_e = config.est_error_var[k];
        let b = optimal_amplitude_given_w(w, h[0], config.power_budget[k], var_e).expect("validated inputs");
        let m = w * gain * b - T::one();
        f += m * m + w * w * var_e * b * b;
    }
    f
}

/// Upper end of the scan: `4 · max_k 1/ρ_k + 4 · w̃_K` over devices with
/// finite nonzero `1/ρ_k`, where `w̃_K` is the all-full-power stationary point.
pub fn default_w_max<T: Scalar>(est_channels: &[CVector<T>], config: &SystemConfig<T>) -> T {
    let mut max_inv_rho = T::zero();
    let (mut num, mut den) = (T::zero(), config.noise_var);
    for (k, h) in est_channels.iter().enumerate() {
        let gain = h[0].norm();
        let p = config.power_budget[k];
        let total = gain * gain + config.est_error_var[k];
        if gain > T::zero() && p > T::zero() {
            max_inv_rho = max_inv_rho.max(gain / (p.sqrt() * total));
        }
        num += p.sqrt() * gain;
        den += p * total;
    }
    let four = T::lit(4.0);
    let w_max = four * max_inv_rho + four * num / den;
    if w_max > T::zero() {
        w_max
    } else {
        T::one()
    }
}

fn grid_values<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    w_max: T,
    steps: usize,
) -> Vec<(T, T)> {
    let last = T::from_usize(steps.saturating_sub(1).max(1)).unwrap();
    (0..steps)
        .map(|i| {
            let w = w_max * T::from_usize(i).unwrap() / last;
            (w, siso_objective_at(w, est_channels, config))
        })
        .collect()
}

/// Scans `steps` evenly spaced points of `[0, w_max]`.
pub fn grid_search_siso<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    w_max: Option<T>,
    steps: usize,
) -> Result<GridPoint<T>> {
    require_siso(est_channels, config)?;
    if steps == 0 {
        return Err(Error::InvalidDimension { field: "steps" });
    }
    let w_max = w_max.unwrap_or_else(|| default_w_max(est_channels, config));
    if !(w_max > T::zero()) || !w_max.is_finite() {
        return Err(Error::InvalidArgument("w_max must be positive and finite".into()));
    }
    let (w, objective) =
        grid_values(est_channels, config, w_max, steps)
            .into_iter()
            .fold(
                (T::zero(), T::infinity()),
                |best, p| if p.1 < best.1 { p } else { best },
            );
    Ok(GridPoint { w, objective })
}

fn golden_section<T: Scalar>(mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= T::epsilon() * (T::one() + hi.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid scan followed by golden-section refinement of the best discrete
/// local minima (up to `max_basins` of them).
pub fn polished_search_siso<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    w_max: Option<T>,
    steps: usize,
    max_basins: usize,
) -> Result<GridPoint<T>> {
    require_siso(est_channels, config)?;
    if steps < 3 {
        return Err(Error::InvalidArgument("polishing needs at least 3 grid points".into()));
    }
    let w_max = w_max.unwrap_or_else(|| default_w_max(est_channels, config));
    let vals = grid_values(est_channels, config, w_max, steps);
    let mut basins: Vec<usize> = (0..steps)
        .filter(|&i| {
            let left = i == 0 || vals[i].1 <= vals[i - 1].1;
            let right = i + 1 == steps || vals[i].1 <= vals[i + 1].1;
            left && right
        })
        .collect();
    basins.sort_by(|&a, &b| vals[a].1.partial_cmp(&vals[b].1).unwrap());
    basins.truncate(max_basins.max(1));

    let f = |w: T| siso_objective_at(w, est_channels, config);
    let mut best = GridPoint {
        w: vals[basins[0]].0,
        objective: vals[basins[0]].1,
    };
    for &i in &basins {
        let lo = vals[i.saturating_sub(1)].0;
        let hi = vals[(i + 1).min(steps - 1)].0;
        let (w, obj) = golden_section(lo, hi, f);
        if obj < best.objective {
            best = GridPoint { w, objective: obj };
        }
    }
    Ok(best)
}

/// Best final objective over `n_starts` alternating runs; start 0 uses the
/// default matched-sum initialisation, the others random unit vectors.
pub fn multistart_probe_simo<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    n_starts: usize,
    seed: u64,
) -> Result<T> {
    let t = solve_simo(
        est_channels,
        config,
        &InitStrategy::Multistart { starts: n_starts, seed },
        T::lit(DEFAULT_TOL),
        DEFAULT_MAX_ITER,
    )?;
    Ok(t.final_objective())
}

/// Objective minimised over `b` for a fixed beamformer; `K` at `w = 0`.
pub fn profile_objective<T: Scalar>(w: &[Complex<T>], est_channels: &[CVector<T>], config: &SystemConfig<T>) -> T {
    let k = T::from_usize(config.num_wds).unwrap();
    let Ok(b) = optimal_b_given_w(w, est_channels, config) else {
        return k;
    };
    let w_sq = norm_sqr(w);
    let one = Complex::new(T::one(), T::zero());
    let mut f = w_sq * config.noise_var;
    for ((h, bk), &v) in est_channels.iter().zip(&b).zip(&config.est_error_var) {
        f += (inner(w, h) * bk - one).norm_sqr() + w_sq * v * bk.norm_sqr();
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimoGridResult<T> {
    pub rx_beamformer: CVector<T>,
    pub objective: T,
    /// Grid spacing along each of the three axes.
    pub spacing: T,
}

/// Dense gauge-fixed search for `N_r = 2`: `w = (a, c + i d)` with `a ≥ 0`,
/// each axis sampled at `per_axis` points. The box radius `√(K / σ²_z)` bounds
/// every optimum because `‖w‖² σ²_z` alone would exceed the `w = 0` objective
/// `K` outside it. The best grid point is then refined by compass search.
pub fn simo_grid_search<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    per_axis: usize,
) -> Result<SimoGridResult<T>> {
    config.validate()?;
    if config.num_rx_antennas != 2 {
        return Err(Error::WrongAntennaCount {
            expected: 2,
            found: config.num_rx_antennas,
        });
    }
    config.check_channels(est_channels)?;
    if per_axis < 2 {
        return Err(Error::InvalidArgument("per_axis must be at least 2".into()));
    }
    let radius = (T::from_usize(config.num_wds).unwrap() / config.noise_var).sqrt();
    let steps = T::from_usize(per_axis - 1).unwrap();
    let two = T::lit(2.0);
    let spacing = two * radius / steps;
    let point = |p: [T; 3]| vec![Complex::new(p[0], T::zero()), Complex::new(p[1], p[2])];

    let mut best = ([T::zero(); 3], T::infinity());
    for i in 0..per_axis {
        let a = radius * T::from_usize(i).unwrap() / steps;
        for j in 0..per_axis {
            let c = -radius + two * radius * T::from_usize(j).unwrap() / steps;
            for l in 0..per_axis {
                let d = -radius + two * radius * T::from_usize(l).unwrap() / steps;
                let p = [a, c, d];
                let f = profile_objective(&point(p), est_channels, config);
                if f < best.1 {
                    best = (p, f);
                }
            }
        }
    }

    // compass search
    let (mut p, mut f) = best;
    let mut step = spacing;
    let floor = T::epsilon().sqrt() * T::lit(1e-4) * radius;
    while step > floor {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [T::one(), -T::one()] {
                let mut q = p;
                q[axis] += sign * step;
                if axis == 0 && q[0] < T::zero() {
                    continue;
                }
                let fq = profile_objective(&point(q), est_channels, config);
                if fq < f {
                    p = q;
                    f = fq;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= two;
        }
    }
    Ok(SimoGridResult {
        rx_beamformer: point(p),
        objective: f,
        spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_channel_instance;
    use crate::rng::seeded;
    use crate::simo::solve_simo;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn worked_instance() {
        let cfg = SystemConfig::uniform(1, 1, 1.0, 0.0, 1.0, 1.0);
        let h = vec![vec![c(1.0)]];
        let g = grid_search_siso(&h, &cfg, None, 100_001).unwrap();
        assert!((g.w - 0.5).abs() < 1e-4);
        assert!((g.objective - 0.5).abs() < 1e-8);
        let p = polished_search_siso(&h, &cfg, None, 1001, 4).unwrap();
        assert!((p.objective - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unreachable_single_device() {
        let cfg = SystemConfig::uniform(1, 1, 1.0, 0.1, 1.0, 1.0);
        let h = vec![vec![c(0.0)]];
        let g = grid_search_siso(&h, &cfg, None, 1000).unwrap();
        assert_eq!(g.w, 0.0);
        assert_eq!(g.objective, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = SystemConfig::uniform(1, 2, 1.0, 0.1, 1.0, 1.0);
        assert!(grid_search_siso(&[vec![c(1.0); 2]], &cfg, None, 10).is_err());
        let cfg = SystemConfig::uniform(1, 1, 1.0, 0.1, 1.0, 1.0);
        assert!(grid_search_siso(&[vec![c(1.0)]], &cfg, None, 0).is_err());
        assert!(grid_search_siso(&[vec![c(1.0)]], &cfg, Some(-1.0), 10).is_err());
    }

    #[test]
    fn single_start_probe_equals_default() {
        let cfg = SystemConfig::uniform(3, 3, 2.0, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(1)).unwrap();
        let h = &inst.est_channel;
        let d = solve_simo(h, &cfg, &InitStrategy::MatchedSum, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(multistart_probe_simo(h, &cfg, 1, 9).unwrap(), d.final_objective());
    }

    #[test]
    fn probe_is_reproducible() {
        let cfg = SystemConfig::uniform(3, 2, 2.0, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(2)).unwrap();
        let a = multistart_probe_simo(&inst.est_channel, &cfg, 6, 4).unwrap();
        let b = multistart_probe_simo(&inst.est_channel, &cfg, 6, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn profile_objective_at_zero() {
        let cfg = SystemConfig::uniform(3, 2, 2.0, 0.1, 1.0, 1.0);
        let h = vec![vec![c(1.0); 2]; 3];
        assert_eq!(profile_objective(&[c(0.0); 2], &h, &cfg), 3.0);
    }
}
