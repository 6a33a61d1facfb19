//! Self-checks that compare the solvers against brute-force oracles, the
//! Monte Carlo estimator and the limiting expressions.
//!
//! Every check draws its instances from fixed seeds, so a run is exactly
//! reproducible. Each check is a public function parameterised by its size;
//! [`run`] picks sizes from a [`VerifyLevel`].

use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::asymptotics::{prop1_limit, prop2_limit};
use crate::harness::{run_sweep, Scheme, SweepSpec, SweptVariable};
use crate::linalg::norm_sqr;
use crate::model::{fill_cscg, generate_channel_instance, SystemConfig};
use crate::mse::{analytic_mse, empirical_mse, objective_p1, TransceiverDesign};
use crate::oracle::{grid_search_siso, multistart_probe_simo, polished_search_siso, simo_grid_search};
use crate::rng::{derive_seed, stream};
use crate::simo::{
    optimal_b_given_w, optimal_w_given_b, solve_simo, solve_simo_with, AoMethod, InitStrategy, SimoSettings,
    DEFAULT_MAX_ITER, DEFAULT_TOL, HARNESS_STARTS,
};
use crate::siso::solve_siso;
use crate::{CVector, Result};

const VERIFY_SEED: u64 = 0x5EED_A1C0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    /// Reduced instance counts; finishes in well under a minute.
    Quick,
    /// The full instance counts.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckOutcome {
    fn from_result(name: &'static str, started: Instant, r: Result<(bool, String)>) -> Self {
        let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
        Self {
            name,
            passed,
            detail,
            elapsed: started.elapsed(),
        }
    }
}

/// Runs every check at `level`, reporting each outcome as it completes.
pub fn run_with(level: VerifyLevel, mut on_done: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let full = level == VerifyLevel::Full;
    let pick = |quick: usize, full_size: usize| if full { full_size } else { quick };
    let checks: Vec<Box<dyn Fn() -> CheckOutcome>> = vec![
        Box::new(move || siso_against_grid(pick(200, 1000), 100_000)),
        Box::new(move || mse_against_monte_carlo(pick(20, 100), 100_000)),
        Box::new(move || high_power_limit_siso(pick(50, 100))),
        Box::new(move || high_power_limit_simo(pick(50, 100))),
        Box::new(move || update_optimality(pick(100, 500))),
        Box::new(move || alternation_monotonicity(pick(100, 500))),
        Box::new(move || single_antenna_reduction(pick(100, 500))),
        Box::new(move || simo_against_grid(pick(5, 20), pick(60, 120))),
        Box::new(move || multistart_gap(pick(50, 200))),
        Box::new(move || antenna_scaling(pick(20, 200))),
    ];
    checks
        .iter()
        .map(|check| {
            let outcome = check();
            on_done(&outcome);
            outcome
        })
        .collect()
}

pub fn run(level: VerifyLevel) -> Vec<CheckOutcome> {
    run_with(level, |_| {})
}

/// Ranges for random instances.
#[derive(Debug, Clone, Copy)]
pub struct InstanceRanges {
    pub num_wds: (usize, usize),
    pub num_rx_antennas: (usize, usize),
    /// Sampled log-uniformly.
    pub power: (f64, f64),
    pub est_error_var: (f64, f64),
    /// Sampled log-uniformly.
    pub noise_var: (f64, f64),
    pub channel_var: (f64, f64),
}

impl Default for InstanceRanges {
    fn default() -> Self {
        Self {
            num_wds: (1, 8),
            num_rx_antennas: (1, 1),
            power: (0.1, 100.0),
            est_error_var: (0.0, 0.5),
            noise_var: (0.1, 4.0),
            channel_var: (0.5, 1.5),
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    uniform(rng, (lo.ln(), hi.ln())).exp()
}

/// Random configuration with per-device parameters and one channel estimate
/// drawn from it. Integer ranges are inclusive.
pub fn random_instance(ranges: &InstanceRanges, seed: u64) -> Result<(SystemConfig<f64>, Vec<CVector<f64>>)> {
    let mut rng = stream(seed, &[0]);
    let k = rng.random_range(ranges.num_wds.0..=ranges.num_wds.1);
    let (lo, hi) = ranges.num_rx_antennas;
    let n = rng.random_range(lo..=hi);
    let config = SystemConfig {
        num_wds: k,
        num_rx_antennas: n,
        power_budget: (0..k).map(|_| log_uniform(&mut rng, ranges.power)).collect(),
        est_error_var: (0..k).map(|_| uniform(&mut rng, ranges.est_error_var)).collect(),
        noise_var: log_uniform(&mut rng, ranges.noise_var),
        channel_var: (0..k).map(|_| uniform(&mut rng, ranges.channel_var)).collect(),
    };
    let inst = generate_channel_instance(&config, &mut rng)?;
    Ok((config, inst.est_channel))
}

fn seeds(check: u64, count: usize) -> impl IndexedParallelIterator<Item = u64> {
    (0..count)
        .into_par_iter()
        .map(move |i| derive_seed(VERIFY_SEED, &[check, i as u64]))
}

fn relative(x: f64, scale: f64) -> f64 {
    x / scale.abs().max(1.0)
}

/// Worst-case comparison of the closed-form SISO solution with the plain grid
/// scan and with the polished (grid plus golden-section) scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SisoGridMargins {
    /// Largest `solver − grid`; positive means the grid found something better.
    pub excess_over_grid: f64,
    /// Largest `grid − solver`: how far the solver lies below the grid minimum.
    pub below_grid: f64,
    /// Largest `solver − polished`.
    pub gain_over_polished: f64,
}

/// Margins of [`solve_siso`] against the grid and polished oracles over
/// `instances` random problems scanned with `steps` points each.
pub fn siso_grid_margins(instances: usize, steps: usize) -> Result<SisoGridMargins> {
    let pairs = seeds(1, instances)
        .map(|seed| {
            let (config, h) = random_instance(&InstanceRanges::default(), seed)?;
            let sol = solve_siso(&h, &config)?;
            let grid = grid_search_siso(&h, &config, None, steps)?;
            let polished = polished_search_siso(&h, &config, None, steps, 8)?;
            Ok((
                sol.objective_value - grid.objective,
                sol.objective_value - polished.objective,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&(f64, f64)) -> f64| pairs.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Ok(SisoGridMargins {
        excess_over_grid: max(|p| p.0),
        below_grid: max(|p| -p.0),
        gain_over_polished: max(|p| -p.1),
    })
}

/// The closed-form solver is never beaten by the grid by more than `1e-4`
/// and never beats the polished oracle by more than `1e-9`. How far it lies
/// below the raw grid is reported but not judged: with the default scan range
/// that gap is discretisation error of the grid, not of the solver.
pub fn siso_against_grid(instances: usize, steps: usize) -> CheckOutcome {
    let started = Instant::now();
    let r = siso_grid_margins(instances, steps).map(|m| {
        (
            m.excess_over_grid <= 1e-4 && m.gain_over_polished <= 1e-9,
            format!(
                "{instances} instances; max excess over grid {:.3e}; max margin below grid {:.3e}; \
                 max gain over polished oracle {:.3e}",
                m.excess_over_grid, m.below_grid, m.gain_over_polished
            ),
        )
    });
    CheckOutcome::from_result("siso_vs_grid", started, r)
}

fn random_design<R: Rng + ?Sized>(config: &SystemConfig<f64>, rng: &mut R) -> TransceiverDesign<f64> {
    let tx_coeff = config
        .power_budget
        .iter()
        .map(|&p| {
            let r = (p * rng.random::<f64>()).sqrt();
            Complex::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    TransceiverDesign {
        tx_coeff,
        rx_beamformer: fill_cscg(config.num_rx_antennas, 0.2, rng),
    }
}

/// Analytic MSE of random feasible designs against Monte Carlo estimates:
/// at least 95% must fall within three standard errors.
pub fn mse_against_monte_carlo(designs: usize, samples: usize) -> CheckOutcome {
    let started = Instant::now();
    let ranges = InstanceRanges {
        num_rx_antennas: (1, 4),
        ..InstanceRanges::default()
    };
    let r = seeds(2, designs)
        .map(|seed| {
            let (config, h) = random_instance(&ranges, seed)?;
            let design = random_design(&config, &mut stream(seed, &[1]));
            let analytic = analytic_mse(&design, &h, &config)?.total;
            let mc = empirical_mse(&design, &h, &config, samples, derive_seed(seed, &[2]))?;
            Ok((mc.mean - analytic).abs() / mc.std_error)
        })
        .collect::<Result<Vec<_>>>()
        .map(|z| {
            let inside = z.iter().filter(|&&z| z <= 3.0).count();
            let needed = (designs * 95).div_ceil(100);
            let worst = z.iter().copied().fold(0.0, f64::max);
            (
                inside >= needed,
                format!("{inside}/{designs} within 3 SE at {samples} samples (need {needed}); largest |z| {worst:.2}"),
            )
        });
    CheckOutcome::from_result("mse_monte_carlo", started, r)
}

const LIMIT_POWER: f64 = 1e16;
const LIMIT_TOL: f64 = 1e-6;

/// Single-antenna optimum at budget `1e16` against its limiting value, for
/// `K = 20` and `σ²_e = 0.1`.
pub fn high_power_limit_siso(instances: usize) -> CheckOutcome {
    let started = Instant::now();
    let ranges = InstanceRanges {
        num_wds: (20, 20),
        power: (LIMIT_POWER, LIMIT_POWER),
        est_error_var: (0.1, 0.1),
        ..InstanceRanges::default()
    };
    let r = seeds(3, instances)
        .map(|seed| {
            let (config, h) = random_instance(&ranges, seed)?;
            let k = config.num_wds as f64;
            let mse = solve_siso(&h, &config)?.objective_value / (k * k);
            Ok((mse - prop1_limit(&h, &config)?).abs())
        })
        .collect::<Result<Vec<_>>>()
        .map(|d| {
            let worst = d.iter().copied().fold(0.0, f64::max);
            (
                worst <= LIMIT_TOL,
                format!("{instances} instances; max |MSE − limit| {worst:.3e}"),
            )
        });
    CheckOutcome::from_result("high_power_limit_siso", started, r)
}

/// Multi-antenna MSE at budget `1e16` with `b` optimised for a random fixed
/// beamformer, against the limit, and the limit against its lower bound.
///
/// The noise term `‖w‖² σ²_z` does not depend on the budget, so the
/// beamformer is drawn with norm `P^(-1/4)`: the noise term is then of order
/// `1e-8` while `|b_k|²` stays far below the budget.
pub fn high_power_limit_simo(instances: usize) -> CheckOutcome {
    let started = Instant::now();
    let ranges = InstanceRanges {
        num_wds: (1, 20),
        num_rx_antennas: (2, 8),
        power: (LIMIT_POWER, LIMIT_POWER),
        est_error_var: (0.01, 0.5),
        ..InstanceRanges::default()
    };
    let r = seeds(4, instances)
        .map(|seed| {
            let (config, h) = random_instance(&ranges, seed)?;
            let mut w: CVector<f64> = fill_cscg(config.num_rx_antennas, 1.0, &mut stream(seed, &[1]));
            let scale = LIMIT_POWER.powf(-0.25) / norm_sqr(&w).sqrt();
            w.iter_mut().for_each(|x| *x *= scale);
            let design = TransceiverDesign {
                tx_coeff: optimal_b_given_w(&w, &h, &config)?,
                rx_beamformer: w,
            };
            let mse = analytic_mse(&design, &h, &config)?.total;
            let lim = prop2_limit(&design.rx_beamformer, &h, &config)?;
            Ok(((mse - lim.limit).abs(), lim.lower_bound - lim.limit))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| {
            let worst = v.iter().map(|x| x.0).fold(0.0, f64::max);
            let bound = v.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            (
                worst <= LIMIT_TOL && bound <= 1e-12,
                format!("{instances} instances, random direction, ‖w‖ = P^(-1/4); max |MSE − limit| {worst:.3e}; max bound violation {bound:.3e}"),
            )
        });
    CheckOutcome::from_result("high_power_limit_simo", started, r)
}

/// Each block update must beat random feasible perturbations of its output.
pub fn update_optimality(instances: usize) -> CheckOutcome {
    let started = Instant::now();
    let ranges = InstanceRanges {
        num_rx_antennas: (1, 6),
        ..InstanceRanges::default()
    };
    let r = seeds(5, instances)
        .map(|seed| {
            let (config, h) = random_instance(&ranges, seed)?;
            let mut rng = stream(seed, &[1]);
            let start = random_design(&config, &mut rng);
            let w = optimal_w_given_b(&start.tx_coeff, &h, &config)?;
            let b = optimal_b_given_w(&start.rx_beamformer, &h, &config)?;
            let eval = |tx: &CVector<f64>, rx: &CVector<f64>| {
                objective_p1(
                    &TransceiverDesign {
                        tx_coeff: tx.clone(),
                        rx_beamformer: rx.clone(),
                    },
                    &h,
                    &config,
                )
            };
            let f_w = eval(&start.tx_coeff, &w)?;
            let f_b = eval(&b, &start.rx_beamformer)?;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..8 {
                let scale = 1e-3 * (norm_sqr(&w).sqrt() + 1e-3);
                let dw = fill_cscg(w.len(), scale * scale, &mut rng);
                let w2: CVector<f64> = w.iter().zip(&dw).map(|(a, d)| a + d).collect();
                worst = worst.max(relative(f_w - eval(&start.tx_coeff, &w2)?, f_w));

                let b2: CVector<f64> = b
                    .iter()
                    .zip(&config.power_budget)
                    .map(|(bk, &p)| {
                        let mut x = bk + fill_cscg(1, 1e-6 * p, &mut rng)[0];
                        if x.norm_sqr() > p {
                            x *= p.sqrt() / x.norm();
                        }
                        x
                    })
                    .collect();
                worst = worst.max(relative(f_b - eval(&b2, &start.rx_beamformer)?, f_b));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| {
            let worst = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (
                worst <= 1e-12,
                format!("{instances} instances; largest improvement by a perturbation {worst:.3e}"),
            )
        });
    CheckOutcome::from_result("update_optimality", started, r)
}

/// Objective histories of both alternation variants never increase.
pub fn alternation_monotonicity(instances: usize) -> CheckOutcome {
    let started = Instant::now();
    let ranges = InstanceRanges {
        num_wds: (1, 20),
        num_rx_antennas: (2, 16),
        ..InstanceRanges::default()
    };
    let r = seeds(6, instances)
        .map(|seed| {
            let (config, h) = random_instance(&ranges, seed)?;
            let mut worst = f64::NEG_INFINITY;
            for method in [AoMethod::Plain, AoMethod::Accelerated] {
                let settings = SimoSettings {
                    method,
                    ..SimoSettings::default()
                };
                let trace = solve_simo_with(&h, &config, &settings)?;
                for pair in trace.objective_history.windows(2) {
                    worst = worst.max(pair[1] - pair[0]);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| {
            let worst = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (
                worst <= 1e-12,
                format!("{instances} instances; largest increase {worst:.3e}"),
            )
        });
    CheckOutcome::from_result("alternation_monotonicity", started, r)
}

/// The multi-antenna solver with one antenna against the closed form:
/// 95% within `1e-6` relative, and never better by more than `1e-9`.
pub fn single_antenna_reduction(instances: usize) -> CheckOutcome {
    let started = Instant::now();
    let ranges = InstanceRanges {
        num_wds: (1, 20),
        ..InstanceRanges::default()
    };
    let r = seeds(7, instances)
        .map(|seed| {
            let (config, h) = random_instance(&ranges, seed)?;
            let siso = solve_siso(&h, &config)?.objective_value;
            let trace = solve_simo(&h, &config, &InitStrategy::MatchedSum, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            Ok((trace.final_objective() - siso) / siso)
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| {
            let close = v.iter().filter(|d| d.abs() <= 1e-6).count();
            let needed = (instances * 95).div_ceil(100);
            let better = v.iter().map(|d| -d).fold(f64::NEG_INFINITY, f64::max);
            (
                close >= needed && better <= 1e-9,
                format!("{close}/{instances} within 1e-6 (need {needed}); max gain over closed form {better:.3e}"),
            )
        });
    CheckOutcome::from_result("single_antenna_reduction", started, r)
}

/// Two-antenna multistart against a dense gauge-fixed grid refined by
/// compass search. Both must agree to `1e-6` relative.
pub fn simo_against_grid(instances: usize, per_axis: usize) -> CheckOutcome {
    let started = Instant::now();
    let ranges = InstanceRanges {
        num_wds: (2, 3),
        num_rx_antennas: (2, 2),
        ..InstanceRanges::default()
    };
    let r = seeds(8, instances)
        .map(|seed| {
            let (config, h) = random_instance(&ranges, seed)?;
            let ms = multistart_probe_simo(&h, &config, 16, derive_seed(seed, &[1]))?;
            let grid = simo_grid_search(&h, &config, per_axis)?.objective;
            Ok((relative(ms - grid, grid), relative(grid - ms, ms)))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| {
            let ms_worse = v.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
            let grid_worse = v.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            (
                ms_worse <= 1e-6 && grid_worse <= 1e-6,
                format!(
                    "{instances} instances at {per_axis}/axis; multistart above grid by ≤ {ms_worse:.3e}, grid above multistart by ≤ {grid_worse:.3e}"
                ),
            )
        });
    CheckOutcome::from_result("simo_vs_grid", started, r)
}

/// Relative gap between the default initialisation and the best of
/// [`HARNESS_STARTS`] starts; the median must stay below 0.1%.
pub fn multistart_gap(instances: usize) -> CheckOutcome {
    let started = Instant::now();
    let ranges = InstanceRanges {
        num_wds: (2, 10),
        num_rx_antennas: (2, 8),
        ..InstanceRanges::default()
    };
    let r = seeds(9, instances)
        .map(|seed| {
            let (config, h) = random_instance(&ranges, seed)?;
            let single = solve_simo(&h, &config, &InitStrategy::MatchedSum, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let best = multistart_probe_simo(&h, &config, HARNESS_STARTS, derive_seed(seed, &[1]))?;
            Ok((single.final_objective() - best) / best)
        })
        .collect::<Result<Vec<f64>>>()
        .map(|mut gaps| {
            gaps.sort_by(f64::total_cmp);
            let median = gaps[gaps.len() / 2];
            let p90 = gaps[gaps.len() * 9 / 10];
            let max = gaps[gaps.len() - 1];
            (
                median < 1e-3,
                format!("{instances} instances; gap median {median:.3e}, 90th percentile {p90:.3e}, max {max:.3e}"),
            )
        });
    CheckOutcome::from_result("multistart_gap", started, r)
}

/// Optimised MSE over `N_r ∈ {2, 8, 32, 128}` for `K = 20`, `P = 10 dB`,
/// `σ²_e = 0.1` and unit channel variance: strictly decreasing, and at
/// least ten times smaller at 128 antennas than at 2.
pub fn antenna_scaling(trials: usize) -> CheckOutcome {
    let started = Instant::now();
    let base = SystemConfig::uniform(20, 2, 10.0, 0.1, 1.0, 1.0);
    let mut spec = SweepSpec::new(SweptVariable::NumRxAntennas, vec![2.0, 8.0, 32.0, 128.0], base);
    spec.trials = trials;
    spec.schemes = vec![Scheme::Proposed];
    spec.master_seed = derive_seed(VERIFY_SEED, &[10]);
    let r = run_sweep(&spec).map_err(|e| e.source).map(|res| {
        let curve = res.curve(Scheme::Proposed).expect("scheme was swept");
        let decreasing = curve.windows(2).all(|w| w[1] < w[0]);
        let ratio = curve[3] / curve[0];
        (
            decreasing && ratio < 0.1,
            format!(
                "{trials} trials; mean MSE {} ; MSE(128)/MSE(2) = {ratio:.4}",
                curve.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(" → ")
            ),
        )
    });
    CheckOutcome::from_result("antenna_scaling", started, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_respect_ranges() {
        let ranges = InstanceRanges {
            num_rx_antennas: (2, 3),
            ..InstanceRanges::default()
        };
        for i in 0..50 {
            let (c, h) = random_instance(&ranges, i).unwrap();
            assert!((1..=8).contains(&c.num_wds));
            assert!((0.1..=4.0).contains(&c.noise_var));
            assert!((2..=3).contains(&c.num_rx_antennas));
            assert!(c.power_budget.iter().all(|p| (0.1..=100.0).contains(p)));
            assert!(c.est_error_var.iter().all(|v| (0.0..=0.5).contains(v)));
            c.check_channels(&h).unwrap();
        }
        assert_eq!(
            random_instance(&ranges, 3).unwrap(),
            random_instance(&ranges, 3).unwrap()
        );
    }

    #[test]
    fn small_checks_pass() {
        for outcome in [
            siso_against_grid(10, 10_000),
            high_power_limit_siso(5),
            high_power_limit_simo(5),
            update_optimality(10),
            single_antenna_reduction(10),
        ] {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }
}
