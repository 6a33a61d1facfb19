//! Alternating optimisation for a multi-antenna access point.
//!
//! Given `w`, each device solves a scalar problem whose answer is the capped
//! regularised inversion of its effective channel `wᴴĥ_k`. Given `b`, the
//! beamformer is the sum-MMSE solution
//! `w = (Σ_k |b_k|² (ĥ_k ĥ_kᴴ + σ²_{e,k} I) + σ²_z I)⁻¹ Σ_k ĥ_k b_k`.
//! Both steps are exact minimisations, so the objective never increases.
//!
//! Plain alternation crawls once most devices invert their channels: the
//! objective then barely depends on the length of `w`, and thousands of
//! sweeps may be needed. The default method therefore treats the problem as
//! minimising the profile `f(w) = min_b P(b, w)`, whose gradient is
//! `(Σ_k |b_k|² (ĥ_k ĥ_kᴴ + σ²_{e,k} I) + σ²_z I) w − Σ_k ĥ_k b_k` at the
//! optimal `b`. Exact alternating steps seed a limited-memory quasi-Newton
//! model, quasi-Newton steps are taken only when they pass a sufficient
//! decrease test, and convergence is only declared after an alternating step.

use std::collections::VecDeque;

use num_complex::Complex;
use rayon::prelude::*;

use crate::linalg::{inner, is_zero, norm_sqr, ChannelSpan, HermitianMatrix};
use crate::model::{fill_cscg, SystemConfig};
use crate::mse::{breakdown_unchecked, TransceiverDesign};
use crate::rng::stream;
use crate::siso::solve_siso;
use crate::{CVector, Error, Result, Scalar};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Starts used by the sweep harness.
pub const HARNESS_STARTS: usize = 8;

/// Pairs kept by the quasi-Newton model.
const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy<T> {
    /// Unit vector along `Σ_k ĥ_k`; first basis vector if that sum is zero.
    MatchedSum,
    RandomUnit {
        seed: u64,
    },
    Given(CVector<T>),
    /// Best of `starts` runs: start 0 is [`InitStrategy::MatchedSum`], the
    /// rest are random unit vectors seeded from `seed`.
    Multistart {
        starts: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AoMethod {
    /// Only the two exact block updates.
    Plain,
    /// Exact updates interleaved with safeguarded quasi-Newton steps; the
    /// `b`-step also optimises the length of `w`.
    #[default]
    Accelerated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimoSettings<T> {
    pub init: InitStrategy<T>,
    pub tol: T,
    pub max_iter: usize,
    pub method: AoMethod,
}

impl<T: Scalar> Default for SimoSettings<T> {
    fn default() -> Self {
        Self {
            init: InitStrategy::MatchedSum,
            tol: T::lit(DEFAULT_TOL),
            max_iter: DEFAULT_MAX_ITER,
            method: AoMethod::default(),
        }
    }
}

impl<T: Scalar> SimoSettings<T> {
    pub fn multistart(starts: usize, seed: u64) -> Self {
        Self {
            init: InitStrategy::Multistart { starts, seed },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace<T> {
    pub iterations: usize,
    /// Unscaled objective `min_b P(b, w)` after each step.
    pub objective_history: Vec<T>,
    pub converged: bool,
    pub final_design: TransceiverDesign<T>,
}

impl<T: Scalar> AoTrace<T> {
    pub fn final_objective(&self) -> T {
        self.objective_history.last().copied().unwrap_or_else(T::infinity)
    }
}

/// Per-device exact minimiser given the beamformer.
pub fn optimal_b_given_w<T: Scalar>(
    w: &[Complex<T>],
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<CVector<T>> {
    config.check_channels(est_channels)?;
    check_beamformer(w, config)?;
    Ok(b_update(w, est_channels, config))
}

fn check_beamformer<T: Scalar>(w: &[Complex<T>], config: &SystemConfig<T>) -> Result<()> {
    if w.len() != config.num_rx_antennas {
        return Err(Error::DimensionMismatch {
            field: "rx_beamformer",
            expected: config.num_rx_antennas,
            found: w.len(),
        });
    }
    if !crate::linalg::all_finite(w) {
        return Err(Error::NonFinite { field: "rx_beamformer" });
    }
    if is_zero(w) {
        return Err(Error::DegenerateBeamformer);
    }
    Ok(())
}

fn b_update<T: Scalar>(w: &[Complex<T>], est_channels: &[CVector<T>], config: &SystemConfig<T>) -> CVector<T> {
    let w_sq = norm_sqr(w);
    est_channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let g = inner(w, h);
            let gain = g.norm();
            if gain == T::zero() {
                return Complex::new(T::zero(), T::zero());
            }
            let amp = config.power_budget[k]
                .sqrt()
                .min(gain / (gain * gain + w_sq * config.est_error_var[k]));
            g.conj().unscale(gain).scale(amp)
        })
        .collect()
}

/// Prescribed magnitudes with phases `(ĥ_kᴴ w)/|wᴴ ĥ_k|`; devices with a
/// vanishing effective channel keep zero phase.
pub(crate) fn align_phases<T: Scalar>(amplitudes: &[T], w: &[Complex<T>], est_channels: &[CVector<T>]) -> CVector<T> {
    amplitudes
        .iter()
        .zip(est_channels)
        .map(|(&a, h)| {
            let g = inner(w, h);
            let gain = g.norm();
            if gain == T::zero() {
                Complex::new(a, T::zero())
            } else {
                g.conj().unscale(gain).scale(a)
            }
        })
        .collect()
}

/// Sum-MMSE beamformer for fixed transmit coefficients.
pub fn optimal_w_given_b<T: Scalar>(
    tx_coeff: &[Complex<T>],
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<CVector<T>> {
    config.validate()?;
    config.check_channels(est_channels)?;
    if tx_coeff.len() != config.num_wds {
        return Err(Error::DimensionMismatch {
            field: "tx_coeff",
            expected: config.num_wds,
            found: tx_coeff.len(),
        });
    }
    if !crate::linalg::all_finite(tx_coeff) {
        return Err(Error::NonFinite { field: "tx_coeff" });
    }
    w_update(tx_coeff, est_channels, config)
}

fn w_update<T: Scalar>(
    tx_coeff: &[Complex<T>],
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
) -> Result<CVector<T>> {
    let n = config.num_rx_antennas;
    let mut a = HermitianMatrix::scaled_identity(n, config.noise_var);
    let mut r = vec![Complex::new(T::zero(), T::zero()); n];
    for (k, (h, b)) in est_channels.iter().zip(tx_coeff).enumerate() {
        let p = b.norm_sqr();
        if p == T::zero() {
            continue;
        }
        a.add_outer(h, p);
        a.add_to_diagonal(p * config.est_error_var[k]);
        for (ri, hi) in r.iter_mut().zip(h) {
            *ri += hi * b;
        }
    }
    if is_zero(&r) {
        return Ok(r);
    }
    a.solve_pd(&r)
}

pub(crate) fn matched_sum<T: Scalar>(est_channels: &[CVector<T>], n: usize) -> CVector<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut s = vec![zero; n];
    for h in est_channels {
        for (si, hi) in s.iter_mut().zip(h) {
            *si += hi;
        }
    }
    let norm = norm_sqr(&s).sqrt();
    if norm > T::zero() && norm.is_finite() {
        s.iter_mut().for_each(|x| *x = x.unscale(norm));
    } else {
        s = vec![zero; n];
        s[0] = Complex::new(T::one(), T::zero());
    }
    s
}

fn random_unit<T: Scalar>(n: usize, seed: u64) -> CVector<T> {
    let mut rng = stream(seed, &[]);
    loop {
        let v = fill_cscg(n, T::one(), &mut rng);
        let norm = norm_sqr(&v).sqrt();
        if norm > T::zero() {
            return v.into_iter().map(|x| x.unscale(norm)).collect();
        }
    }
}

/// Runs the alternating optimisation from the given initialisation.
///
/// With [`AoMethod::Accelerated`] (used here) each `b`-step is taken jointly
/// with the length of `w`: for the direction `u = w/‖w‖` fixed, minimising
/// over `‖w‖` and `b` is the single-antenna problem on the scalar channels
/// `uᴴĥ_k`, solved in closed form. Between exact steps the method takes
/// quasi-Newton steps on the profile objective; see the module docs.
/// The run stops once an exact step lowers the objective by at most `tol`
/// relative, or after `max_iter` steps.
pub fn solve_simo<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    init: &InitStrategy<T>,
    tol: T,
    max_iter: usize,
) -> Result<AoTrace<T>> {
    let settings = SimoSettings {
        init: init.clone(),
        tol,
        max_iter,
        method: AoMethod::Accelerated,
    };
    solve_simo_with(est_channels, config, &settings)
}

pub fn solve_simo_with<T: Scalar>(
    est_channels: &[CVector<T>],
    config: &SystemConfig<T>,
    settings: &SimoSettings<T>,
) -> Result<AoTrace<T>> {
    config.validate()?;
    config.check_channels(est_channels)?;
    let SimoSettings {
        init,
        tol,
        max_iter,
        method,
    } = settings;
    let (tol, max_iter) = (*tol, *max_iter);
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidDimension { field: "max_iter" });
    }
    let accelerate = *method == AoMethod::Accelerated;
    let n = config.num_rx_antennas;
    let reduced = Reduced::new(est_channels, config);
    let profile = Profile::new(
        reduced.channels(est_channels),
        &reduced.config,
        TxRule::Optimal,
        accelerate,
    );
    let run = |w0: CVector<T>| -> Result<AoTrace<T>> {
        let trace = profile.run(reduced.project(&w0), tol, max_iter, accelerate)?;
        Ok(reduced.lift(trace))
    };
    match init {
        InitStrategy::MatchedSum => run(matched_sum(est_channels, n)),
        InitStrategy::RandomUnit { seed } => run(random_unit(n, *seed)),
        InitStrategy::Given(w0) => {
            check_beamformer(w0, config)?;
            run(w0.clone())
        }
        InitStrategy::Multistart { starts, seed } => {
            if *starts == 0 {
                return Err(Error::InvalidDimension { field: "starts" });
            }
            let traces = (0..*starts)
                .into_par_iter()
                .map(|i| {
                    run(if i == 0 {
                        matched_sum(est_channels, n)
                    } else {
                        random_unit(n, crate::rng::derive_seed(*seed, &[i as u64]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut best = 0;
            for (i, t) in traces.iter().enumerate() {
                if t.final_objective() < traces[best].final_objective() {
                    best = i;
                }
            }
            Ok(traces.into_iter().nth(best).expect("starts >= 1"))
        }
    }
}

/// The problem restricted to the span of the estimated channels when there
/// are more antennas than devices. Any beamformer component orthogonal to
/// every `ĥ_k` only adds noise, and inside the span the objective is
/// unchanged by the change of coordinates, so both problems share their
/// stationary points.
pub(crate) struct Reduced<T> {
    span: Option<ChannelSpan<T>>,
    pub(crate) config: SystemConfig<T>,
}

impl<T: Scalar> Reduced<T> {
    pub(crate) fn new(est_channels: &[CVector<T>], config: &SystemConfig<T>) -> Self {
        let span = if config.num_wds < config.num_rx_antennas {
            ChannelSpan::new(est_channels)
        } else {
            None
        };
        let config = match span {
            Some(_) => config.with_num_rx_antennas(config.num_wds),
            None => config.clone(),
        };
        Self { span, config }
    }

    pub(crate) fn channels<'a>(&'a self, est_channels: &'a [CVector<T>]) -> &'a [CVector<T>] {
        self.span.as_ref().map_or(est_channels, ChannelSpan::coords)
    }

    pub(crate) fn project(&self, w: &[Complex<T>]) -> CVector<T> {
        self.span.as_ref().map_or_else(|| w.to_vec(), |s| s.project(w))
    }

    pub(crate) fn lift(&self, mut trace: AoTrace<T>) -> AoTrace<T> {
        if let Some(s) = &self.span {
            trace.final_design.rx_beamformer = s.lift(&trace.final_design.rx_beamformer);
        }
        trace
    }
}

/// How the transmit coefficients follow the beamformer.
#[derive(Debug, Clone, Copy)]
pub(crate) enum TxRule<'a, T> {
    /// Per-device optimum.
    Optimal,
    /// Fixed magnitudes, phases aligned to the effective channels.
    Fixed(&'a [T]),
}

/// Minimisation of `w ↦ min_b P(b, w)` over `b` allowed by a [`TxRule`].
pub(crate) struct Profile<'a, T> {
    channels: &'a [CVector<T>],
    config: &'a SystemConfig<T>,
    rule: TxRule<'a, T>,
    /// Set when exact `b`-steps also optimise `‖w‖`.
    siso_config: Option<SystemConfig<T>>,
}

type Step<T> = (CVector<T>, CVector<T>, T);

impl<'a, T: Scalar> Profile<'a, T> {
    pub(crate) fn new(
        channels: &'a [CVector<T>],
        config: &'a SystemConfig<T>,
        rule: TxRule<'a, T>,
        scale_step: bool,
    ) -> Self {
        let siso_config = (scale_step && matches!(rule, TxRule::Optimal)).then(|| config.with_num_rx_antennas(1));
        Self {
            channels,
            config,
            rule,
            siso_config,
        }
    }

    fn tx(&self, w: &[Complex<T>]) -> CVector<T> {
        match self.rule {
            TxRule::Optimal => b_update(w, self.channels, self.config),
            TxRule::Fixed(a) => align_phases(a, w, self.channels),
        }
    }

    fn objective(&self, tx: &[Complex<T>], w: &[Complex<T>]) -> T {
        breakdown_unchecked(tx, w, self.channels, self.config).objective()
    }

    /// `∂P/∂w*` at `(tx, w)`; equals the profile gradient when `tx = tx(w)`.
    fn gradient(&self, tx: &[Complex<T>], w: &[Complex<T>]) -> CVector<T> {
        let c = tx
            .iter()
            .zip(&self.config.est_error_var)
            .fold(self.config.noise_var, |acc, (b, &v)| acc + b.norm_sqr() * v);
        let mut g: CVector<T> = w.iter().map(|x| x.scale(c)).collect();
        for (h, b) in self.channels.iter().zip(tx) {
            let e = (inner(w, h) * b - T::one()).conj() * b;
            for (gi, hi) in g.iter_mut().zip(h) {
                *gi += hi * e;
            }
        }
        g
    }

    /// One exact `b`-step followed by the exact `w`-step.
    fn exact_step(&self, w: &[Complex<T>]) -> Result<Step<T>> {
        let tx = match &self.siso_config {
            Some(siso) => {
                let norm = norm_sqr(w).sqrt();
                let u: CVector<T> = w.iter().map(|x| x.unscale(norm)).collect();
                let scalar: Vec<CVector<T>> = self.channels.iter().map(|h| vec![inner(&u, h)]).collect();
                solve_siso(&scalar, siso)?.tx_coeff
            }
            None => self.tx(w),
        };
        let w_next = w_update(&tx, self.channels, self.config)?;
        let tx_next = self.tx(&w_next);
        let f = self.objective(&tx_next, &w_next);
        Ok((w_next, tx_next, f))
    }

    fn line_search(&self, w: &[Complex<T>], f: T, grad: &[Complex<T>], dir: &[Complex<T>]) -> Option<Step<T>> {
        // directional derivative of a real function of w: 2 Re(∇ᴴ d)
        let slope = T::lit(2.0) * inner(grad, dir).re;
        if !(slope < T::zero()) {
            return None;
        }
        let mut t = T::one();
        for _ in 0..MAX_BACKTRACK {
            let w_try: CVector<T> = w.iter().zip(dir).map(|(x, d)| x + d.scale(t)).collect();
            let tx = self.tx(&w_try);
            let f_try = self.objective(&tx, &w_try);
            if f_try <= f + T::lit(ARMIJO) * t * slope {
                return Some((w_try, tx, f_try));
            }
            t *= T::lit(0.5);
        }
        None
    }

    pub(crate) fn run(&self, w0: CVector<T>, tol: T, max_iter: usize, accelerate: bool) -> Result<AoTrace<T>> {
        let mut w = w0;
        let mut tx = self.tx(&w);
        let mut f = self.objective(&tx, &w);
        let mut grad = self.gradient(&tx, &w);
        let mut model = QuasiNewton::default();
        let mut history = Vec::new();
        let mut converged = false;
        let mut try_model = false;
        while history.len() < max_iter {
            if is_zero(&w) {
                // no device reaches the receiver: nothing left to update
                converged = true;
                break;
            }
            let model_step = if try_model {
                let step = model.direction(&grad).and_then(|d| self.line_search(&w, f, &grad, &d));
                if step.is_none() {
                    model.clear();
                }
                step
            } else {
                None
            };
            let exact = model_step.is_none();
            let (w_next, tx_next, f_next) = match model_step {
                Some(step) => step,
                None => self.exact_step(&w)?,
            };
            let grad_next = self.gradient(&tx_next, &w_next);
            if accelerate {
                model.push(difference(&w_next, &w), difference(&grad_next, &grad));
            }
            let decrease = f - f_next;
            history.push(f_next);
            let small = !(decrease > tol * f);
            (w, tx, f, grad) = (w_next, tx_next, f_next, grad_next);
            if small && exact {
                converged = true;
                break;
            }
            // a stalled model step is confirmed by an exact one
            try_model = accelerate && !small;
        }
        if history.is_empty() {
            history.push(f);
        }
        Ok(AoTrace {
            iterations: history.len(),
            objective_history: history,
            converged,
            final_design: TransceiverDesign {
                tx_coeff: tx,
                rx_beamformer: w,
            },
        })
    }
}

fn difference<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> CVector<T> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Limited-memory BFGS model in the real geometry `⟨a, b⟩ = Re(aᴴb)`.
#[derive(Debug)]
struct QuasiNewton<T> {
    pairs: VecDeque<(CVector<T>, CVector<T>, T)>,
}

impl<T> Default for QuasiNewton<T> {
    fn default() -> Self {
        Self {
            pairs: VecDeque::with_capacity(MEMORY),
        }
    }
}

impl<T: Scalar> QuasiNewton<T> {
    fn clear(&mut self) {
        self.pairs.clear();
    }

    fn push(&mut self, s: CVector<T>, y: CVector<T>) {
        let sy = inner(&s, &y).re;
        // curvature condition; skipping keeps the model positive definite
        if !(sy > T::epsilon().sqrt() * (norm_sqr(&s) * norm_sqr(&y)).sqrt()) {
            return;
        }
        if self.pairs.len() == MEMORY {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, T::one() / sy));
    }

    /// `−H g` by the two-loop recursion.
    fn direction(&self, g: &[Complex<T>]) -> Option<CVector<T>> {
        let (s_last, y_last, _) = self.pairs.back()?;
        let mut q = g.to_vec();
        let mut alpha = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = *rho * inner(s, &q).re;
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= yi.scale(a));
            alpha.push(a);
        }
        let gamma = inner(s_last, y_last).re / norm_sqr(y_last);
        q.iter_mut().for_each(|qi| *qi = qi.scale(gamma));
        for ((s, y, rho), a) in self.pairs.iter().zip(alpha.into_iter().rev()) {
            let beta = *rho * inner(y, &q).re;
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += si.scale(a - beta));
        }
        Some(q.into_iter().map(|x| -x).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_channel_instance;
    use crate::mse::objective_p1;
    use crate::rng::seeded;
    use crate::siso::optimal_amplitude_given_w;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn pure_inversion_without_errors() {
        let cfg = SystemConfig::uniform(2, 2, 100.0, 0.0, 1.0, 1.0);
        let h = vec![vec![c(3.0, 1.0), c(2.0, 0.0)], vec![c(-1.0, 4.0), c(0.5, 2.0)]];
        let w = vec![c(1.0, 0.2), c(0.4, -0.3)];
        let b = optimal_b_given_w(&w, &h, &cfg).unwrap();
        for k in 0..2 {
            let g = inner(&w, &h[k]);
            assert!((b[k].norm() - 1.0 / g.norm()).abs() < 1e-14);
            assert!((g * b[k] - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn single_antenna_reduces_to_scalar_rule() {
        let cfg = SystemConfig::uniform(3, 1, 2.0, 0.3, 1.0, 1.0);
        let h = vec![vec![c(0.5, 0.5)], vec![c(-1.2, 0.1)], vec![c(0.1, 0.05)]];
        let w = 0.8;
        let b = optimal_b_given_w(&[c(w, 0.0)], &h, &cfg).unwrap();
        for k in 0..3 {
            let a = optimal_amplitude_given_w(w, h[k][0], 2.0, 0.3).unwrap();
            assert!((b[k].norm() - a).abs() < 1e-15);
        }
    }

    #[test]
    fn b_update_matches_scan() {
        let cfg = SystemConfig::uniform(4, 3, 1.0, 0.1, 1.0, 1.0);
        let mut rng = seeded(31);
        for _ in 0..20 {
            let inst = generate_channel_instance(&cfg, &mut rng).unwrap();
            let w = fill_cscg(3, 1.0, &mut rng);
            let b = optimal_b_given_w(&w, &inst.est_channel, &cfg).unwrap();
            let w_sq = norm_sqr(&w);
            for k in 0..4 {
                let g = inner(&w, &inst.est_channel[k]).norm();
                let f = |a: f64| (g * a - 1.0).powi(2) + w_sq * 0.1 * a * a;
                let steps = 100_000;
                let best = (0..=steps)
                    .map(|i| i as f64 / steps as f64)
                    .min_by(|x, y| f(*x).partial_cmp(&f(*y)).unwrap())
                    .unwrap();
                assert!((b[k].norm() - best).abs() <= 1.0 / steps as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn zero_beamformer_rejected() {
        let cfg = SystemConfig::uniform(1, 2, 1.0, 0.1, 1.0, 1.0);
        assert_eq!(
            optimal_b_given_w(&[c(0.0, 0.0); 2], &[vec![c(1.0, 0.0); 2]], &cfg),
            Err(Error::DegenerateBeamformer)
        );
    }

    #[test]
    fn w_update_examples() {
        let cfg = SystemConfig::uniform(2, 3, 1.0, 0.1, 1.0, 1.0);
        let h = vec![vec![c(1.0, 0.0); 3]; 2];
        let w = optimal_w_given_b(&[c(0.0, 0.0); 2], &h, &cfg).unwrap();
        assert!(is_zero(&w));

        let cfg = SystemConfig::uniform(1, 1, 1.0, 0.0, 1.0, 1.0);
        let w = optimal_w_given_b(&[c(1.0, 0.0)], &[vec![c(1.0, 0.0)]], &cfg).unwrap();
        assert!((w[0] - c(0.5, 0.0)).norm() < 1e-15);

        assert!(matches!(
            optimal_w_given_b(&[c(f64::NAN, 0.0)], &[vec![c(1.0, 0.0)]], &cfg),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn w_update_residual_and_local_optimality() {
        let cfg = SystemConfig::uniform(3, 4, 1.0, 0.2, 0.5, 1.0);
        let mut rng = seeded(12);
        let inst = generate_channel_instance(&cfg, &mut rng).unwrap();
        let h = &inst.est_channel;
        let b: CVector<f64> = fill_cscg(3, 0.5, &mut rng);
        let w = optimal_w_given_b(&b, h, &cfg).unwrap();

        let mut a = HermitianMatrix::scaled_identity(4, cfg.noise_var);
        let mut r = vec![c(0.0, 0.0); 4];
        for k in 0..3 {
            a.add_outer(&h[k], b[k].norm_sqr());
            a.add_to_diagonal(b[k].norm_sqr() * cfg.est_error_var[k]);
            for i in 0..4 {
                r[i] += h[k][i] * b[k];
            }
        }
        let aw = a.mul_vec(&w);
        let res: f64 = aw.iter().zip(&r).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-8 * norm_sqr(&r).sqrt());

        let base = objective_p1(
            &TransceiverDesign {
                tx_coeff: b.clone(),
                rx_beamformer: w.clone(),
            },
            h,
            &cfg,
        )
        .unwrap();
        for _ in 0..1000 {
            let d = fill_cscg(4, 1.0, &mut rng);
            let scale = rng.random_range(0.0..1e-2) / norm_sqr::<f64>(&d).sqrt();
            let wp: CVector<f64> = w.iter().zip(&d).map(|(x, y)| x + y * scale).collect();
            let obj = objective_p1(
                &TransceiverDesign {
                    tx_coeff: b.clone(),
                    rx_beamformer: wp,
                },
                h,
                &cfg,
            )
            .unwrap();
            assert!(obj >= base - 1e-12);
        }
    }

    #[test]
    fn span_reduction_preserves_updates_and_objective() {
        let mut rng = seeded(12);
        for _ in 0..50 {
            let k = rng.random_range(1..6);
            let n = rng.random_range(k + 1..k + 12);
            let cfg = SystemConfig::uniform(k, n, 2.0, 0.2, 0.7, 1.0);
            let inst = generate_channel_instance(&cfg, &mut rng).unwrap();
            let h = &inst.est_channel;
            let reduced = Reduced::new(h, &cfg);
            let coords = reduced.channels(h);
            assert_eq!(coords[0].len(), k);

            let mut b = fill_cscg(k, 1.0, &mut rng);
            if k > 1 {
                b[0] = c(0.0, 0.0);
            }
            let full = w_update(&b, h, &cfg).unwrap();
            let y = w_update(&b, coords, &reduced.config).unwrap();
            let trace = AoTrace {
                iterations: 0,
                objective_history: vec![],
                converged: false,
                final_design: TransceiverDesign {
                    tx_coeff: b.clone(),
                    rx_beamformer: y.clone(),
                },
            };
            let lifted = reduced.lift(trace).final_design.rx_beamformer;
            let scale = norm_sqr(&full).sqrt();
            for (x, z) in full.iter().zip(&lifted) {
                assert!((x - z).norm() < 1e-10 * scale);
            }
            let o_full = breakdown_unchecked(&b, &full, h, &cfg).objective();
            let o_red = breakdown_unchecked(&b, &y, coords, &reduced.config).objective();
            assert!((o_full - o_red).abs() < 1e-10 * o_full);
        }
    }

    #[test]
    fn profile_gradient_matches_finite_differences() {
        let cfg = SystemConfig::uniform(4, 3, 1.5, 0.2, 0.9, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(8)).unwrap();
        let h = &inst.est_channel;
        let p = Profile::new(h, &cfg, TxRule::Optimal, false);
        let w = vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.1, -0.1)];
        let g = p.gradient(&p.tx(&w), &w);
        let f = |w: &[Complex<f64>]| p.objective(&p.tx(w), w);
        let eps = 1e-6;
        for i in 0..3 {
            for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                let mut up = w.clone();
                let mut dn = w.clone();
                up[i] += dir * eps;
                dn[i] -= dir * eps;
                let fd = (f(&up) - f(&dn)) / (2.0 * eps);
                let analytic = 2.0 * (g[i].conj() * dir).re;
                assert!((fd - analytic).abs() < 1e-6, "{fd} vs {analytic}");
            }
        }
    }

    #[test]
    fn accelerated_and_plain_reach_stationary_points() {
        let mut rng = seeded(31);
        for _ in 0..20 {
            let cfg = SystemConfig::uniform(6, 4, 10.0, 0.1, 1.0, 1.0);
            let inst = generate_channel_instance(&cfg, &mut rng).unwrap();
            let h = &inst.est_channel;
            let fast = solve_simo(h, &cfg, &InitStrategy::MatchedSum, 1e-12, 5000).unwrap();
            assert!(fast.converged);
            let plain = SimoSettings {
                tol: 1e-13,
                max_iter: 200_000,
                method: AoMethod::Plain,
                ..SimoSettings::default()
            };
            let slow = solve_simo_with(h, &cfg, &plain).unwrap();
            // both end at AO fixed points; from the same start they agree
            // unless they fall into different basins
            let d = &fast.final_design;
            let w2 = optimal_w_given_b(&d.tx_coeff, h, &cfg).unwrap();
            let o_w = breakdown_unchecked(&d.tx_coeff, &w2, h, &cfg).objective();
            assert!(fast.final_objective() - o_w < 1e-9 * fast.final_objective());
            assert!(
                fast.final_objective() <= slow.final_objective() * (1.0 + 1e-6) || fast.iterations < slow.iterations
            );
        }
    }

    #[test]
    fn monotone_and_feasible() {
        let mut rng = seeded(99);
        for _ in 0..30 {
            let k = rng.random_range(1..12);
            let n = rng.random_range(2..8);
            let cfg = SystemConfig::uniform(k, n, rng.random_range(0.1..50.0), 0.1, 1.0, 1.0);
            let inst = generate_channel_instance(&cfg, &mut rng).unwrap();
            let t = solve_simo(&inst.est_channel, &cfg, &InitStrategy::MatchedSum, 1e-9, 1000).unwrap();
            for pair in t.objective_history.windows(2) {
                assert!(pair[1] - pair[0] <= 1e-12);
            }
            assert!(t.final_design.is_feasible(&cfg));
            assert_eq!(t.iterations, t.objective_history.len());
        }
    }

    #[test]
    fn fixed_point_at_convergence() {
        let cfg = SystemConfig::uniform(5, 4, 5.0, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(5)).unwrap();
        let h = &inst.est_channel;
        let tol = 1e-9;
        let t = solve_simo(h, &cfg, &InitStrategy::MatchedSum, tol, 10_000).unwrap();
        assert!(t.converged);
        let obj: f64 = t.final_objective();
        let b2 = optimal_b_given_w(&t.final_design.rx_beamformer, h, &cfg).unwrap();
        let o_b = breakdown_unchecked(&b2, &t.final_design.rx_beamformer, h, &cfg).objective();
        let w2 = optimal_w_given_b(&t.final_design.tx_coeff, h, &cfg).unwrap();
        let o_w = breakdown_unchecked(&t.final_design.tx_coeff, &w2, h, &cfg).objective();
        assert!((obj - o_b).abs() < 10.0 * tol * obj);
        assert!((obj - o_w).abs() < 10.0 * tol * obj);
    }

    #[test]
    fn phase_gauge_of_init() {
        let cfg = SystemConfig::uniform(4, 3, 2.0, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(15)).unwrap();
        let h = &inst.est_channel;
        let w0 = random_unit::<f64>(3, 4);
        let rot = Complex::from_polar(1.0, 1.234);
        let w1: CVector<f64> = w0.iter().map(|x| x * rot).collect();
        let a = solve_simo(h, &cfg, &InitStrategy::Given(w0), 1e-12, 5000).unwrap();
        let b = solve_simo(h, &cfg, &InitStrategy::Given(w1), 1e-12, 5000).unwrap();
        assert!((a.final_objective() - b.final_objective()).abs() <= 1e-9 * a.final_objective());
    }

    #[test]
    fn scalar_perfect_csi_reaches_scalar_optimum() {
        // K = 1, σ²_e = 0: with b = 1/(w ĥ) ∧ √P the best objective is
        // min over w of (w√P|ĥ| − 1)²₊ + w²σ²_z, solved here by a dense scan.
        let cfg = SystemConfig::uniform(1, 3, 2.0, 0.0, 0.5, 1.0);
        let h = vec![vec![c(0.3, 0.4), c(-0.2, 0.1), c(0.5, 0.0)]];
        let t = solve_simo(&h, &cfg, &InitStrategy::MatchedSum, 1e-12, 10_000).unwrap();
        let gp = norm_sqr(&h[0]).sqrt() * 2f64.sqrt();
        let best = (0..=2_000_000)
            .map(|i| {
                let u = i as f64 * 1e-6;
                let m = if u * gp < 1.0 { u * gp - 1.0 } else { 0.0 };
                m * m + u * u * 0.5
            })
            .fold(f64::INFINITY, f64::min);
        assert!(
            (t.final_objective() - best).abs() < 1e-9,
            "{} vs {best}",
            t.final_objective()
        );
    }

    #[test]
    fn multistart_is_no_worse_than_default() {
        let cfg = SystemConfig::uniform(6, 3, 10.0, 0.1, 1.0, 1.0);
        let inst = generate_channel_instance(&cfg, &mut seeded(8)).unwrap();
        let h = &inst.est_channel;
        let d = solve_simo(h, &cfg, &InitStrategy::MatchedSum, 1e-9, 1000).unwrap();
        let m = solve_simo(h, &cfg, &InitStrategy::Multistart { starts: 8, seed: 3 }, 1e-9, 1000).unwrap();
        assert!(m.final_objective() <= d.final_objective());
        let one = solve_simo(h, &cfg, &InitStrategy::Multistart { starts: 1, seed: 3 }, 1e-9, 1000).unwrap();
        assert_eq!(one, d);
    }

    #[test]
    fn orthogonal_init_stalls_at_zero() {
        // init orthogonal to every channel: first pass has b = 0 and w = 0
        let cfg = SystemConfig::uniform(1, 2, 1.0, 0.1, 1.0, 1.0);
        let h = vec![vec![c(1.0, 0.0), c(0.0, 0.0)]];
        let t = solve_simo(
            &h,
            &cfg,
            &InitStrategy::Given(vec![c(0.0, 0.0), c(1.0, 0.0)]),
            1e-9,
            100,
        )
        .unwrap();
        assert!(t.converged);
        assert_eq!(t.final_objective(), 1.0);
    }
}
