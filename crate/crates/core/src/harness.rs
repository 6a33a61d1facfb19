//! Seeded Monte Carlo sweeps comparing the optimised design with the
//! baselines.
//!
//! Trial `t` at grid point `g` draws one channel realisation from the stream
//! `derive_seed(master_seed, [g, t])` and evaluates every scheme on it, so
//! scheme comparisons are paired. Results do not depend on the number of
//! worker threads.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{channel_inversion_design, full_power_design, solve_ignoring_csi_errors};
use crate::model::{generate_channel_instance, SystemConfig};
use crate::mse::{analytic_mse, TransceiverDesign};
use crate::rng::{derive_seed, seeded};
use crate::scenario::{PerDevice, Scenario};
use crate::simo::{solve_simo_with, InitStrategy, SimoSettings, HARNESS_STARTS};
use crate::siso::solve_siso;
use crate::{CVector, Error};

pub const DEFAULT_TRIALS: usize = 200;
pub const CSV_HEADER: [&str; 6] = ["variable", "grid_value", "scheme", "mean_mse", "std_error", "trials"];

/// Sub-stream of a trial seed used for multistart initialisations.
const INIT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptVariable {
    /// Common power budget in dB; grid values convert as `P = 10^(dB/10)`.
    PowerDb,
    EstErrorVar,
    NumRxAntennas,
}

impl SweptVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::PowerDb => "power_db",
            Self::EstErrorVar => "est_error_var",
            Self::NumRxAntennas => "num_rx_antennas",
        }
    }

    /// `base` with the swept quantity set to `value` for every device.
    pub fn apply(self, base: &SystemConfig<f64>, value: f64) -> Result<SystemConfig<f64>, Error> {
        let config = match self {
            Self::PowerDb => base.with_power(10f64.powf(value / 10.0)),
            Self::EstErrorVar => base.with_est_error_var(value),
            Self::NumRxAntennas => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::InvalidArgument(format!(
                        "num_rx_antennas grid value {value} is not a positive integer"
                    )));
                }
                base.with_num_rx_antennas(value as usize)
            }
        };
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for SweptVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweptVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "power_db" | "power" | "p" => Ok(Self::PowerDb),
            "est_error_var" | "sigma_e" | "error_var" => Ok(Self::EstErrorVar),
            "num_rx_antennas" | "nr" | "antennas" => Ok(Self::NumRxAntennas),
            _ => Err(format!(
                "unknown variable `{s}` (expected power_db, est_error_var or num_rx_antennas)"
            )),
        }
    }
}

/// Declared in alphabetical order of [`Scheme::name`], which is also the
/// row order of the summary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ChannelInversion,
    FullPower,
    IgnoreCsi,
    Proposed,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::ChannelInversion,
        Scheme::FullPower,
        Scheme::IgnoreCsi,
        Scheme::Proposed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ChannelInversion => "channel_inversion",
            Self::FullPower => "full_power",
            Self::IgnoreCsi => "ignore_csi",
            Self::Proposed => "proposed",
        }
    }

    /// Solves one realisation. `seed` feeds the random starts of the
    /// multi-antenna solvers.
    ///
    /// With several antennas the proposed design also runs from the
    /// beamformer of the design that ignores estimation errors, and keeps the
    /// better result. Because the alternation never increases the objective,
    /// the proposed MSE is then never above the ignore-CSI MSE on the same
    /// realisation.
    pub fn design(
        self,
        est_channels: &[CVector<f64>],
        config: &SystemConfig<f64>,
        starts: usize,
        seed: u64,
    ) -> Result<TransceiverDesign<f64>, Error> {
        let settings = SimoSettings::multistart(starts, derive_seed(seed, &[INIT_STREAM]));
        match self {
            Self::Proposed if config.num_rx_antennas == 1 => Ok(solve_siso(est_channels, config)?.design()),
            Self::Proposed => {
                let warm = SimoSettings {
                    init: InitStrategy::Given(
                        solve_ignoring_csi_errors(est_channels, config, &settings)?.rx_beamformer,
                    ),
                    ..SimoSettings::default()
                };
                let best = solve_simo_with(est_channels, config, &settings)?;
                let alt = solve_simo_with(est_channels, config, &warm)?;
                Ok(if alt.final_objective() < best.final_objective() {
                    alt
                } else {
                    best
                }
                .final_design)
            }
            Self::IgnoreCsi => solve_ignoring_csi_errors(est_channels, config, &settings),
            Self::FullPower => full_power_design(est_channels, config),
            Self::ChannelInversion => channel_inversion_design(est_channels, config),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            format!("unknown scheme `{s}` (expected proposed, ignore_csi, full_power or channel_inversion)")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub swept: SweptVariable,
    pub grid: Vec<f64>,
    /// Channel draws per grid point.
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub master_seed: u64,
    pub base_config: SystemConfig<f64>,
    /// Initialisations per multi-antenna solve.
    pub starts: usize,
}

impl SweepSpec {
    /// All schemes, [`DEFAULT_TRIALS`] trials, [`HARNESS_STARTS`] starts, seed 0.
    pub fn new(swept: SweptVariable, grid: Vec<f64>, base_config: SystemConfig<f64>) -> Self {
        Self {
            swept,
            grid,
            trials: DEFAULT_TRIALS,
            schemes: Scheme::ALL.to_vec(),
            master_seed: 0,
            base_config,
            starts: HARNESS_STARTS,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.base_config.validate()?;
        if self.grid.is_empty() {
            return Err(Error::InvalidDimension { field: "grid" });
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { field: "grid" });
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidDimension { field: "trials" });
        }
        if self.starts == 0 {
            return Err(Error::InvalidDimension { field: "starts" });
        }
        for &v in &self.grid {
            self.swept.apply(&self.base_config, v)?;
        }
        Ok(())
    }

    fn sorted_schemes(&self) -> Vec<Scheme> {
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        s
    }
}

/// Devices in the benchmark figures.
pub const FIGURE_WDS: usize = 20;

/// Sweep for one of the five benchmark figures (`1..=5`), or `None` for any
/// other number.
///
/// All use `K = 20` and unit noise variance, with per-device channel
/// variances drawn once from `[0.5, 1.5]` using `master_seed`, exactly as a
/// scenario file without `channel_var` would. Figures 1–2 sweep the power
/// from −10 to 30 dB at `σ²_e = 0.1`; figures 3–4 sweep `σ²_e` over
/// `0, 0.05, …, 0.5` at 10 dB; the odd-even pairs differ in using one or ten
/// receive antennas. Figure 5 sweeps `N_r ∈ {1, 2, 4, …, 64}` at 10 dB and
/// `σ²_e = 0.1`.
pub fn figure_sweep(figure: usize, master_seed: u64) -> Option<SweepSpec> {
    let (swept, grid, num_rx_antennas): (_, Vec<f64>, _) = match figure {
        1 | 2 => (
            SweptVariable::PowerDb,
            (-2..=6).map(|i| f64::from(i) * 5.0).collect(),
            if figure == 1 { 1 } else { 10 },
        ),
        3 | 4 => (
            SweptVariable::EstErrorVar,
            (0..=10).map(|i| f64::from(i) / 20.0).collect(),
            if figure == 3 { 1 } else { 10 },
        ),
        5 => (
            SweptVariable::NumRxAntennas,
            (0..=6).map(|i| f64::from(1 << i)).collect(),
            1,
        ),
        _ => return None,
    };
    let scenario = Scenario {
        num_wds: FIGURE_WDS,
        num_rx_antennas,
        power_budget: PerDevice::Scalar(10.0),
        est_error_var: PerDevice::Scalar(0.1),
        noise_var: 1.0,
        channel_var: None,
        channel_var_range: None,
        master_seed,
        est_channel: None,
    };
    let base = scenario.resolve().expect("figure scenario is valid");
    let mut spec = SweepSpec::new(swept, grid, base);
    spec.master_seed = master_seed;
    Some(spec)
}

#[derive(Debug, Error)]
#[error("grid point {grid_index} ({grid_value}), trial {trial}{}: {source}",
    scheme.map(|s| format!(", scheme {s}")).unwrap_or_default())]
pub struct SweepError {
    pub grid_index: usize,
    pub grid_value: f64,
    pub trial: usize,
    pub scheme: Option<Scheme>,
    pub source: Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub grid_index: usize,
    pub grid_value: f64,
    pub scheme: Scheme,
    pub mean_mse: f64,
    pub std_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub base_config: SystemConfig<f64>,
    pub master_seed: u64,
    pub starts: usize,
    /// Seconds since the Unix epoch when the sweep finished.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub swept: SweptVariable,
    pub grid: Vec<f64>,
    /// Sorted and deduplicated.
    pub schemes: Vec<Scheme>,
    /// Grid-major, schemes in [`SweepResult::schemes`] order.
    pub points: Vec<SweepPoint>,
    /// `samples[g][s][t]`: MSE of scheme `s` on trial `t` at grid point `g`.
    pub samples: Vec<Vec<Vec<f64>>>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn point(&self, grid_index: usize, scheme: Scheme) -> Option<&SweepPoint> {
        let s = self.schemes.iter().position(|&x| x == scheme)?;
        self.points.get(grid_index * self.schemes.len() + s)
    }

    pub fn samples(&self, grid_index: usize, scheme: Scheme) -> Option<&[f64]> {
        let s = self.schemes.iter().position(|&x| x == scheme)?;
        Some(&self.samples.get(grid_index)?[s])
    }

    /// Mean MSE of `scheme` along the grid.
    pub fn curve(&self, scheme: Scheme) -> Option<Vec<f64>> {
        (0..self.grid.len())
            .map(|g| self.point(g, scheme).map(|p| p.mean_mse))
            .collect()
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    let spec_error = |source| SweepError {
        grid_index: 0,
        grid_value: spec.grid.first().copied().unwrap_or(f64::NAN),
        trial: 0,
        scheme: None,
        source,
    };
    spec.validate().map_err(spec_error)?;
    let schemes = spec.sorted_schemes();
    let configs: Vec<SystemConfig<f64>> = spec
        .grid
        .iter()
        .map(|&v| spec.swept.apply(&spec.base_config, v))
        .collect::<Result<_, _>>()
        .map_err(spec_error)?;

    let jobs: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|g| (0..spec.trials).map(move |t| (g, t)))
        .collect();
    let per_trial: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let fail = |scheme, source| SweepError {
                grid_index: g,
                grid_value: spec.grid[g],
                trial: t,
                scheme,
                source,
            };
            let config = &configs[g];
            let seed = derive_seed(spec.master_seed, &[g as u64, t as u64]);
            let inst = generate_channel_instance(config, &mut seeded(seed)).map_err(|e| fail(None, e))?;
            schemes
                .iter()
                .map(|&s| {
                    let design = s
                        .design(&inst.est_channel, config, spec.starts, seed)
                        .map_err(|e| fail(Some(s), e))?;
                    let mse = analytic_mse(&design, &inst.est_channel, config).map_err(|e| fail(Some(s), e))?;
                    Ok(mse.total)
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut samples = vec![vec![Vec::with_capacity(spec.trials); schemes.len()]; spec.grid.len()];
    for (&(g, _), row) in jobs.iter().zip(&per_trial) {
        for (s, &v) in row.iter().enumerate() {
            samples[g][s].push(v);
        }
    }
    let mut points = Vec::with_capacity(spec.grid.len() * schemes.len());
    for (g, per_scheme) in samples.iter().enumerate() {
        for (&scheme, values) in schemes.iter().zip(per_scheme) {
            let (mean_mse, std_error) = mean_and_std_error(values);
            points.push(SweepPoint {
                grid_index: g,
                grid_value: spec.grid[g],
                scheme,
                mean_mse,
                std_error,
                trials: values.len(),
            });
        }
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Ok(SweepResult {
        swept: spec.swept,
        grid: spec.grid.clone(),
        schemes,
        points,
        samples,
        metadata: SweepMetadata {
            base_config: spec.base_config.clone(),
            master_seed: spec.master_seed,
            starts: spec.starts,
            timestamp,
        },
    })
}

/// Sample mean and its standard error (zero for a single sample).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variable: String,
    pub grid_value: f64,
    pub scheme: String,
    pub mean_mse: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Rows ordered by grid point, then scheme name.
pub fn summarize(result: &SweepResult) -> Vec<SummaryRow> {
    result
        .points
        .iter()
        .map(|p| SummaryRow {
            variable: result.swept.name().to_owned(),
            grid_value: p.grid_value,
            scheme: p.scheme.name().to_owned(),
            mean_mse: p.mean_mse,
            std_error: p.std_error,
            trials: p.trials,
        })
        .collect()
}

/// Writes the header and rows; floats use the shortest representation that
/// parses back to the same value.
pub fn write_csv<W: Write>(rows: &[SummaryRow], writer: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> csv::Result<Vec<SummaryRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// Whitespace-separated blocks, one per scheme, separated by two blank lines
/// so each is a gnuplot `index`. Columns: grid value, mean MSE, standard
/// error.
pub fn write_plot_data<W: Write>(result: &SweepResult, mut writer: W) -> std::io::Result<()> {
    for (i, &scheme) in result.schemes.iter().enumerate() {
        if i > 0 {
            writeln!(writer)?;
            writeln!(writer)?;
        }
        writeln!(writer, "# {scheme}")?;
        writeln!(writer, "# {} mean_mse std_error", result.swept)?;
        for g in 0..result.grid.len() {
            let p = result.point(g, scheme).expect("aligned grid");
            writeln!(writer, "{} {} {}", p.grid_value, p.mean_mse, p.std_error)?;
        }
    }
    Ok(())
}
