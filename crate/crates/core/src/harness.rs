//! Risk measurement: `L_r` losses, Monte-Carlo sweeps over `(n, b)` and
//! log-log rate fits.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{make_test_density, plateau_density, BesovParams, BumpFamily, BumpVariant, DensityModel, TestDensity};
use crate::distsim::SimMode;
use crate::estimators::{
    centralized_linear, centralized_threshold, default_kappa, plan_multi, plan_single, run_multi, run_single,
    ChannelOptions, CoefficientTree, Estimate, LevelPlan, MultiConstants,
};
use crate::grid::DensityGrid;
use crate::rng::{derived_stream, stream, RandomStream};
use crate::wavelet::{build_table, reconstruct, WaveletFamily, WaveletSpec, WaveletTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorId {
    Single,
    Multi,
    CentralLinear,
    CentralThresh,
}

impl EstimatorId {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorId::Single => "single",
            EstimatorId::Multi => "multi",
            EstimatorId::CentralLinear => "central-linear",
            EstimatorId::CentralThresh => "central-thresh",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [EstimatorId::Single, EstimatorId::Multi, EstimatorId::CentralLinear, EstimatorId::CentralThresh]
            .into_iter()
            .find(|e| e.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// A test density name, `g0`, or a bump draw such as `p1:j=5:seed=7`.
    pub density: String,
    pub wavelet: String,
    pub estimator: EstimatorId,
    pub n: Vec<u64>,
    pub bits: Vec<u32>,
    pub r: f64,
    pub trials: usize,
    pub seed: u64,
    /// Risk quadrature level `G` (step `2^-G`).
    pub grid: u32,
    pub table_resolution: u32,
    /// Smoothness used to plan the single-level and central-linear levels.
    pub smoothness: Option<f64>,
    /// Explicit level, overriding planning for single and central-linear.
    pub level: Option<u32>,
    pub kappa: Option<f64>,
    pub c: f64,
    pub c_prime: f64,
    pub sim_mode: SimMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            density: "beta_like".into(),
            wavelet: "db3".into(),
            estimator: EstimatorId::Single,
            n: vec![1 << 12],
            bits: vec![3],
            r: 2.0,
            trials: 32,
            seed: 0,
            grid: 14,
            table_resolution: 12,
            smoothness: Some(1.5),
            level: None,
            kappa: None,
            c: 1.0,
            c_prime: 0.25,
            sim_mode: SimMode::Sequential,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::Config("every n must be at least 1".into()));
        }
        if self.bits.is_empty() || self.bits.contains(&0) {
            return Err(Error::Config("every bit budget must be at least 1".into()));
        }
        if !(self.r >= 1.0) {
            return Err(Error::Config(format!("loss exponent r = {} must be at least 1", self.r)));
        }
        if self.grid > 20 {
            return Err(Error::Config(format!("risk grid level {} exceeds 20", self.grid)));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Parses `p1:j=5:seed=7[:p=2:q=2:s=1]` or `p2:...`.
fn bump_density(label: &str, table: &WaveletTable, grid: u32) -> Result<DensityModel> {
    let mut parts = label.split(':');
    let variant: BumpVariant = parts.next().unwrap_or_default().parse()?;
    let (mut j, mut seed, mut p, mut q, mut s) = (5u32, 0u64, 2.0, 2.0, 1.0);
    for item in parts {
        let (key, value) =
            item.split_once('=').ok_or_else(|| Error::Parse(format!("bad density option '{item}'")))?;
        let bad = || Error::Parse(format!("bad value in density option '{item}'"));
        match key {
            "j" => j = value.parse().map_err(|_| bad())?,
            "seed" => seed = value.parse().map_err(|_| bad())?,
            "p" => p = value.parse().map_err(|_| bad())?,
            "q" => q = value.parse().map_err(|_| bad())?,
            "s" => s = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::Parse(format!("unknown density option '{key}'"))),
        }
    }
    let family = BumpFamily::calibrated(variant, BesovParams::new(p, q, s)?, table, j, grid, 200, &mut stream(seed))?;
    let z = family.draw_prior(&mut derived_stream(seed, &[1]));
    family.density(table, &z)
}

pub fn resolve_density(label: &str, table: &WaveletTable, grid: u32) -> Result<DensityModel> {
    let key = label.trim().to_ascii_lowercase();
    if key.starts_with("p1") || key.starts_with("p2") {
        return bump_density(&key, table, grid);
    }
    if key == "g0" || key == "plateau" {
        return Ok(plateau_density(grid));
    }
    Ok(make_test_density(key.parse::<TestDensity>()?, grid))
}

pub fn resolve_table(wavelet: &str, resolution: u32) -> Result<WaveletTable> {
    let family: WaveletFamily = wavelet.parse()?;
    build_table(WaveletSpec::new(family)?, resolution)
}

/// `∫_0^1 |f̂ − f|^r` by the trapezoid rule at step `2^-G`.
pub fn lr_loss(estimate: &CoefficientTree, truth: &DensityModel, table: &WaveletTable, r: f64, grid: u32) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::Config(format!("loss exponent r = {r} must be at least 1")));
    }
    let fitted = reconstruct(estimate, table, grid);
    let diff = DensityGrid::from_fn(grid, |x| (fitted.eval(x) - truth.eval(x)).abs().powf(r));
    Ok(diff.integral())
}

/// What the estimator was run with, echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "kebab-case")]
pub enum PlanEcho {
    Single { level: u32 },
    Multi { plan: LevelPlan },
    CentralLinear { level: u32 },
    CentralThresh { base_level: u32, top_level: u32, kappa: f64 },
}

/// A configuration with its wavelet table and true density resolved.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub table: WaveletTable,
    pub density: DensityModel,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let table = resolve_table(&config.wavelet, config.table_resolution)?;
        let density = resolve_density(&config.density, &table, config.grid)?;
        Ok(Self { config, table, density })
    }

    fn kappa(&self) -> f64 {
        self.config.kappa.unwrap_or_else(|| {
            default_kappa(self.config.r, self.table.spec.regularity, self.table.support_radius())
        })
    }

    fn constants(&self) -> MultiConstants {
        MultiConstants { c: self.config.c, c_prime: self.config.c_prime, kappa: self.kappa() }
    }

    fn smoothness(&self) -> Result<f64> {
        self.config
            .smoothness
            .ok_or_else(|| Error::Config("planning this estimator needs a smoothness or an explicit level".into()))
    }

    pub fn plan(&self, n: u64, bits: u32) -> Result<PlanEcho> {
        Ok(match self.config.estimator {
            EstimatorId::Single => PlanEcho::Single {
                level: match self.config.level {
                    Some(level) => level,
                    None => plan_single(n, bits, self.smoothness()?)?,
                },
            },
            EstimatorId::Multi => {
                PlanEcho::Multi { plan: plan_multi(n, bits, &self.table, &self.constants(), self.config.sim_mode)? }
            }
            EstimatorId::CentralLinear => PlanEcho::CentralLinear {
                level: match self.config.level {
                    Some(level) => level,
                    None => {
                        let log_n = (n.max(1) as f64).log2();
                        (log_n / (2.0 * self.smoothness()? + 1.0)).round().clamp(0.0, log_n.floor()) as u32
                    }
                },
            },
            EstimatorId::CentralThresh => {
                let plan = plan_multi(n, bits, &self.table, &self.constants(), SimMode::Ideal)?;
                PlanEcho::CentralThresh { base_level: plan.base_level, top_level: plan.top_level, kappa: self.kappa() }
            }
        })
    }

    pub fn estimate(&self, plan: &PlanEcho, samples: &[f64], bits: u32, rng: &mut RandomStream) -> Result<Estimate> {
        let options = ChannelOptions::simulated(self.config.sim_mode);
        let central = |tree: CoefficientTree| {
            let levels = tree.base_level..=tree.top_level;
            Estimate {
                players: levels.clone().map(|j| (j, samples.len())).collect(),
                yields: levels.map(|j| (j, samples.len())).collect(),
                tree,
            }
        };
        match plan {
            PlanEcho::Single { level } => run_single(samples, bits, &self.table, *level, options, rng),
            PlanEcho::Multi { plan } => run_multi(samples, bits, &self.table, plan, options, rng),
            PlanEcho::CentralLinear { level } => Ok(central(centralized_linear(samples, &self.table, *level)?)),
            PlanEcho::CentralThresh { base_level, top_level, kappa } => {
                Ok(central(centralized_threshold(samples, &self.table, *base_level, *top_level, *kappa)?))
            }
        }
    }

    /// One replication: fresh samples, estimate, loss. Returns loss and total yield.
    pub fn trial(&self, plan: &PlanEcho, n: u64, bits: u32, trial: u64) -> Result<(f64, usize)> {
        let mut rng = derived_stream(self.config.seed, &[n, bits as u64, trial]);
        let samples = self.density.sample(n as usize, &mut rng);
        let estimate = self.estimate(plan, &samples, bits, &mut rng)?;
        let loss = lr_loss(&estimate.tree, &self.density, &self.table, self.config.r, self.config.grid)?;
        Ok((loss, estimate.yields.values().sum()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub loss: Option<f64>,
    pub total_yield: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    pub n: u64,
    pub bits: u32,
    pub plan: Option<PlanEcho>,
    pub plan_error: Option<String>,
    /// Mean over successful trials; `None` when every trial failed.
    pub mean_risk: Option<f64>,
    pub standard_error: Option<f64>,
    pub mean_yield: Option<f64>,
    pub trials: Vec<TrialOutcome>,
}

impl RiskPoint {
    pub fn losses(&self) -> Vec<f64> {
        self.trials.iter().filter_map(|t| t.loss).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log2 residuals.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub config: ExperimentConfig,
    pub points: Vec<RiskPoint>,
    /// Rate fit per bit budget when enough `n` values succeeded.
    pub fits: Vec<(u32, RateFit)>,
}

/// Sample mean and `std / √count` (zero spread for a single value).
pub fn mean_and_se(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Some((mean, (var / count).sqrt()))
}

pub fn run_point(experiment: &Experiment, n: u64, bits: u32) -> RiskPoint {
    let plan = match experiment.plan(n, bits) {
        Ok(plan) => plan,
        Err(e) => {
            return RiskPoint {
                n,
                bits,
                plan: None,
                plan_error: Some(e.to_string()),
                mean_risk: None,
                standard_error: None,
                mean_yield: None,
                trials: Vec::new(),
            }
        }
    };
    let trials: Vec<TrialOutcome> = (0..experiment.config.trials)
        .into_par_iter()
        .map(|t| match experiment.trial(&plan, n, bits, t as u64) {
            Ok((loss, total_yield)) => TrialOutcome { trial: t, loss: Some(loss), total_yield: Some(total_yield), error: None },
            Err(e) => TrialOutcome { trial: t, loss: None, total_yield: None, error: Some(e.to_string()) },
        })
        .collect();
    let losses: Vec<f64> = trials.iter().filter_map(|t| t.loss).collect();
    let yields: Vec<f64> = trials.iter().filter_map(|t| t.total_yield.map(|y| y as f64)).collect();
    let stats = mean_and_se(&losses);
    RiskPoint {
        n,
        bits,
        plan: Some(plan),
        plan_error: None,
        mean_risk: stats.map(|s| s.0),
        standard_error: stats.map(|s| s.1),
        mean_yield: mean_and_se(&yields).map(|s| s.0),
        trials,
    }
}

/// Every `(n, b)` of the configuration; trial seeds are keyed by
/// `(seed, n, b, trial)`, so results do not depend on scheduling.
pub fn run_trials(config: &ExperimentConfig) -> Result<RiskReport> {
    let experiment = Experiment::new(config.clone())?;
    let mut points = Vec::new();
    for &bits in &config.bits {
        for &n in &config.n {
            points.push(run_point(&experiment, n, bits));
        }
    }
    let mut fits = Vec::new();
    for &bits in &config.bits {
        let data: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.bits == bits)
            .filter_map(|p| p.mean_risk.map(|r| (p.n as f64, r)))
            .collect();
        if let Ok(fit) = fit_rate(&data) {
            fits.push((bits, fit));
        }
    }
    Ok(RiskReport { config: config.clone(), points, fits })
}

/// Least-squares line through `(log2 n, log2 risk)`. Needs at least 4 points
/// spanning at least 3 octaves.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", points.len())));
    }
    if let Some((n, r)) = points.iter().find(|(n, r)| !(*n > 0.0 && *r > 0.0)) {
        return Err(Error::Fit(format!("nonpositive point (n = {n}, risk = {r})")));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, r)| r.log2()).collect();
    let span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 3.0 {
        return Err(Error::Fit(format!("points span {span:.2} octaves, need 3")));
    }
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual =
        (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / count).sqrt();
    Ok(RateFit { slope, intercept, residual })
}

impl RiskReport {
    /// One row per `(n, b, trial)`.
    pub fn write_trials_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,bits,trial,loss,yield,error")?;
        for p in &self.points {
            if let Some(e) = &p.plan_error {
                writeln!(out, "{},{},,,,\"plan: {}\"", p.n, p.bits, e.replace('"', "'"))?;
            }
            for t in &p.trials {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    p.n,
                    p.bits,
                    t.trial,
                    t.loss.map(|v| v.to_string()).unwrap_or_default(),
                    t.total_yield.map(|v| v.to_string()).unwrap_or_default(),
                    t.error.as_ref().map(|e| format!("\"{}\"", e.replace('"', "'"))).unwrap_or_default()
                )?;
            }
        }
        Ok(())
    }

    /// Plot columns: `bits, log2_n, log2_risk, se` (se of the mean risk).
    pub fn write_plot_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bits,log2_n,log2_risk,se")?;
        for p in &self.points {
            if let (Some(risk), Some(se)) = (p.mean_risk, p.standard_error) {
                writeln!(out, "{},{},{},{}", p.bits, (p.n as f64).log2(), risk.log2(), se)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
