//! Density estimators: the centralized linear and thresholded baselines, the
//! single-level estimator from quantized `b`-bit messages, and the adaptive
//! multi-level estimator that splits players into one group per level.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::distsim::{expected_yield, transmit, SimMode};
use crate::quantize::{alphabet_size, decode_sample, encode_sample, player_vector, unpack, GroupKind, QuantizedSample};
use crate::rng::RandomStream;
use crate::wavelet::{level_scale, WaveletKind, WaveletTable};
use crate::{Error, Result};

/// A finite wavelet expansion: father coefficients at `base_level` and mother
/// coefficients for levels `base_level..=top_level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTree {
    pub base_level: u32,
    pub top_level: u32,
    pub alpha: BTreeMap<i64, f64>,
    pub beta: BTreeMap<(u32, i64), f64>,
    pub kappa: Option<f64>,
    pub thresholded: bool,
}

impl CoefficientTree {
    pub fn linear(level: u32, alpha: BTreeMap<i64, f64>) -> Self {
        Self { base_level: level, top_level: level, alpha, beta: BTreeMap::new(), kappa: None, thresholded: false }
    }

    /// Coefficient for `(kind, j, k)`; anything not stored is zero.
    pub fn coefficient(&self, kind: WaveletKind, j: u32, k: i64) -> f64 {
        match kind {
            WaveletKind::Father if j == self.base_level => self.alpha.get(&k).copied().unwrap_or(0.0),
            WaveletKind::Father => 0.0,
            WaveletKind::Mother => self.beta.get(&(j, k)).copied().unwrap_or(0.0),
        }
    }

    pub fn surviving_details(&self) -> usize {
        self.beta.values().filter(|b| **b != 0.0).count()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "L": self.base_level,
            "H": self.top_level,
            "alpha": self.alpha.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
            "beta": self.beta.iter().map(|((j, k), v)| json!([j, k, v])).collect::<Vec<_>>(),
            "kappa": self.kappa,
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("coefficient tree: bad or missing '{what}'"));
        let level = |key: &str| -> Result<u32> {
            value.get(key).and_then(Value::as_u64).and_then(|v| u32::try_from(v).ok()).ok_or_else(|| bad(key))
        };
        let base_level = level("L")?;
        let top_level = level("H")?;
        let mut alpha = BTreeMap::new();
        for item in value.get("alpha").and_then(Value::as_array).ok_or_else(|| bad("alpha"))? {
            let pair = item.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad("alpha"))?;
            let k = pair[0].as_i64().ok_or_else(|| bad("alpha"))?;
            let v = pair[1].as_f64().ok_or_else(|| bad("alpha"))?;
            alpha.insert(k, v);
        }
        let mut beta = BTreeMap::new();
        for item in value.get("beta").and_then(Value::as_array).ok_or_else(|| bad("beta"))? {
            let triple = item.as_array().filter(|a| a.len() == 3).ok_or_else(|| bad("beta"))?;
            let j = triple[0].as_u64().and_then(|j| u32::try_from(j).ok()).ok_or_else(|| bad("beta"))?;
            let k = triple[1].as_i64().ok_or_else(|| bad("beta"))?;
            let v = triple[2].as_f64().ok_or_else(|| bad("beta"))?;
            beta.insert((j, k), v);
        }
        let kappa = match value.get("kappa") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| bad("kappa"))?),
        };
        let thresholded = kappa.is_some_and(|k| k > 0.0);
        Ok(Self { base_level, top_level, alpha, beta, kappa, thresholded })
    }
}

/// Per-level sums of unscaled wavelet values over the translation range.
struct LevelSums {
    level: u32,
    offset: i64,
    father: Vec<f64>,
    mother: Vec<f64>,
}

impl LevelSums {
    fn new(table: &WaveletTable, level: u32) -> Self {
        let range = table.translation_range(level);
        let len = (range.end() - range.start() + 1) as usize;
        Self { level, offset: -range.start(), father: vec![0.0; len], mother: vec![0.0; len] }
    }

    fn add(&mut self, kind: WaveletKind, k: i64, value: f64) {
        let slot = (k + self.offset) as usize;
        match kind {
            WaveletKind::Father => self.father[slot] += value,
            WaveletKind::Mother => self.mother[slot] += value,
        }
    }

    /// `2^{J/2} · sum / m` for every translation.
    fn averages(&self, kind: WaveletKind, count: usize) -> BTreeMap<i64, f64> {
        let sums = match kind {
            WaveletKind::Father => &self.father,
            WaveletKind::Mother => &self.mother,
        };
        let scale = level_scale(self.level);
        sums.iter().enumerate().map(|(i, s)| (i as i64 - self.offset, s / count as f64 * scale)).collect()
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Estimation("no samples".into()));
    }
    Ok(())
}

/// Sums exact (unquantized) wavelet values of `samples` at `level`.
fn direct_sums(samples: &[f64], level: u32, kind: GroupKind, table: &WaveletTable) -> Result<LevelSums> {
    let mut sums = LevelSums::new(table, level);
    for &x in samples {
        let (bin, v) = player_vector(x, level, kind, table)?;
        for (wk, k, value) in unpack(bin, level, kind, &v, table) {
            sums.add(wk, k, value);
        }
    }
    Ok(sums)
}

/// `α̂_{H,k} = (1/n) Σ φ_{H,k}(X_i)` for `k ∈ K_H`.
pub fn centralized_linear(samples: &[f64], table: &WaveletTable, level: u32) -> Result<CoefficientTree> {
    check_samples(samples)?;
    let sums = direct_sums(samples, level, GroupKind::Single, table)?;
    Ok(CoefficientTree::linear(level, sums.averages(WaveletKind::Father, samples.len())))
}

fn hard_threshold(beta: &mut BTreeMap<(u32, i64), f64>, level: u32, threshold: f64) {
    for ((j, _), b) in beta.iter_mut() {
        if *j == level && b.abs() < threshold {
            *b = 0.0;
        }
    }
}

/// `α̂` at `L` and hard-thresholded `β̂_{j,k}` for `j ∈ [L, H]` with
/// threshold `κ √(j / n)`.
pub fn centralized_threshold(
    samples: &[f64],
    table: &WaveletTable,
    base: u32,
    top: u32,
    kappa: f64,
) -> Result<CoefficientTree> {
    check_samples(samples)?;
    if base > top {
        return Err(Error::Config(format!("base level {base} above top level {top}")));
    }
    if !(kappa >= 0.0) {
        return Err(Error::Config(format!("threshold constant {kappa} must be nonnegative")));
    }
    let n = samples.len();
    let base_sums = direct_sums(samples, base, GroupKind::Base, table)?;
    let alpha = base_sums.averages(WaveletKind::Father, n);
    let mut beta = BTreeMap::new();
    for j in base..=top {
        let sums = if j == base { None } else { Some(direct_sums(samples, j, GroupKind::Detail, table)?) };
        let sums = sums.as_ref().unwrap_or(&base_sums);
        for (k, v) in sums.averages(WaveletKind::Mother, n) {
            beta.insert((j, k), v);
        }
        hard_threshold(&mut beta, j, kappa * (j as f64 / n as f64).sqrt());
    }
    Ok(CoefficientTree { base_level: base, top_level: top, alpha, beta, kappa: Some(kappa), thresholded: kappa > 0.0 })
}

/// How player data reaches the referee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelOptions {
    pub mode: SimMode,
    /// Send the exact wavelet vectors instead of quantized vertices. Only
    /// meaningful with an ideal channel.
    pub bypass_quantizer: bool,
}

impl ChannelOptions {
    pub fn simulated(mode: SimMode) -> Self {
        Self { mode, bypass_quantizer: false }
    }

    pub fn coupling() -> Self {
        Self { mode: SimMode::Ideal, bypass_quantizer: true }
    }
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self::simulated(SimMode::Sequential)
    }
}

/// Estimator output with the number of samples the referee reconstituted per
/// level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub tree: CoefficientTree,
    pub players: BTreeMap<u32, usize>,
    pub yields: BTreeMap<u32, usize>,
}

/// Runs one group of players at `level`: returns the referee's sums and yield.
fn run_group(
    samples: &[f64],
    bits: u32,
    table: &WaveletTable,
    level: u32,
    kind: GroupKind,
    options: ChannelOptions,
    rng: &mut RandomStream,
) -> Result<(LevelSums, usize)> {
    if options.bypass_quantizer {
        if options.mode != SimMode::Ideal {
            return Err(Error::Config("the quantizer can only be bypassed over an ideal channel".into()));
        }
        return Ok((direct_sums(samples, level, kind, table)?, samples.len()));
    }
    let size = alphabet_size(table, level, kind);
    let symbols = samples
        .iter()
        .map(|&x| encode_sample(x, level, kind, table, rng).map(|q| q.symbol(table)))
        .collect::<Result<Vec<u64>>>()?;
    let report = transmit(&symbols, size, bits, options.mode, rng)?;
    let mut sums = LevelSums::new(table, level);
    for &symbol in &report.symbols {
        let q = QuantizedSample::from_symbol(symbol, table, level, kind)?;
        if let Some((wk, k, value)) = decode_sample(&q, table) {
            sums.add(wk, k, value);
        }
    }
    Ok((sums, report.yield_count()))
}

/// `2^H ≍ min{(n 2^b)^{1/(2s+2)}, n^{1/(2s+1)}}`, rounded and clamped to
/// `[0, log2 n]`.
pub fn plan_single(n: u64, bits: u32, s: f64) -> Result<u32> {
    if n < 2 {
        return Err(Error::Planning(format!("need at least 2 samples, got {n}")));
    }
    if bits == 0 {
        return Err(Error::Planning("bit budget must be at least 1".into()));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Planning(format!("smoothness {s} must be positive")));
    }
    let log_n = (n as f64).log2();
    let target = ((log_n + bits as f64) / (2.0 * s + 2.0)).min(log_n / (2.0 * s + 1.0));
    Ok(target.round().clamp(0.0, log_n.floor()) as u32)
}

/// Single-level estimator: every player quantizes its father vector at level
/// `H`; the referee averages the rescaled decoded vertices of the simulated
/// samples.
pub fn run_single(
    samples: &[f64],
    bits: u32,
    table: &WaveletTable,
    level: u32,
    options: ChannelOptions,
    rng: &mut RandomStream,
) -> Result<Estimate> {
    check_samples(samples)?;
    let (sums, m) = run_group(samples, bits, table, level, GroupKind::Single, options, rng)?;
    if m == 0 {
        return Err(Error::Estimation(format!(
            "no samples survived simulation at level {level} from {} players",
            samples.len()
        )));
    }
    let tree = CoefficientTree::linear(level, sums.averages(WaveletKind::Father, m));
    Ok(Estimate { tree, players: BTreeMap::from([(level, samples.len())]), yields: BTreeMap::from([(level, m)]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiConstants {
    /// Multiplier on the `2^L` target.
    pub c: f64,
    /// Multiplier on the `2^H` target.
    pub c_prime: f64,
    pub kappa: f64,
}

impl MultiConstants {
    pub fn with_default_kappa(r: f64, regularity: u32, support_radius: u32) -> Self {
        Self { c: 1.0, c_prime: 0.25, kappa: default_kappa(r, regularity, support_radius) }
    }
}

/// `max(2r + 1, r(N + 1), 6 A · 2)`.
pub fn default_kappa(r: f64, regularity: u32, support_radius: u32) -> f64 {
    (2.0 * r + 1.0).max(r * (regularity as f64 + 1.0)).max(12.0 * support_radius as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub n: u64,
    pub bits: u32,
    pub base_level: u32,
    pub top_level: u32,
    /// Players per group, `⌊n / (H − L + 1)⌋`.
    pub group_size: u64,
    pub yields: BTreeMap<u32, u64>,
    pub thresholds: BTreeMap<u32, f64>,
    pub kappa: f64,
    pub mode: SimMode,
}

impl LevelPlan {
    pub fn groups(&self) -> u64 {
        (self.top_level - self.base_level + 1) as u64
    }

    pub fn kind(&self, level: u32) -> GroupKind {
        if level == self.base_level {
            GroupKind::Base
        } else {
            GroupKind::Detail
        }
    }
}

fn level_targets(n: u64, bits: u32, regularity: u32, constants: &MultiConstants) -> (i64, i64) {
    let log_n = (n as f64).log2();
    let log_nb = log_n + bits as f64;
    let s = regularity as f64 + 1.0;
    let low = constants.c.log2() + (log_nb / (2.0 * s + 2.0)).min(log_n / (2.0 * s + 1.0));
    let high = constants.c_prime.log2() + (0.5 * log_nb - log_nb.log2()).min(log_n - 2.0 * log_n.log2());
    (low.round().max(0.0) as i64, high.round() as i64)
}

/// Chooses `L, H` from `(n, b, N)` only, then lowers `H` (and if needed `L`)
/// until every level has `m_J ≥ max(1, J 2^J)` expected samples.
pub fn plan_multi(
    n: u64,
    bits: u32,
    table: &WaveletTable,
    constants: &MultiConstants,
    mode: SimMode,
) -> Result<LevelPlan> {
    if n < 2 {
        return Err(Error::Planning(format!("need at least 2 samples, got {n}")));
    }
    if !(constants.c > 0.0 && constants.c_prime > 0.0) {
        return Err(Error::Planning("level constants must be positive".into()));
    }
    if !(constants.kappa >= 0.0) {
        return Err(Error::Planning(format!("threshold constant {} must be nonnegative", constants.kappa)));
    }
    let (low, high) = level_targets(n, bits, table.spec.regularity, constants);
    let mut base = low as u32;
    let mut top = high.max(low) as u32;
    loop {
        let groups = (top - base + 1) as u64;
        let group_size = n / groups;
        let mut yields = BTreeMap::new();
        let mut ok = group_size > 0;
        for j in base..=top {
            let kind = if j == base { GroupKind::Base } else { GroupKind::Detail };
            let m = expected_yield(group_size, alphabet_size(table, j, kind), bits, mode)?;
            ok &= m >= 1 && m >= (j as u64) << j;
            yields.insert(j, m);
        }
        if ok {
            let thresholds = yields
                .iter()
                .map(|(&j, &m)| (j, constants.kappa * (j as f64 / m as f64).sqrt()))
                .collect();
            return Ok(LevelPlan {
                n,
                bits,
                base_level: base,
                top_level: top,
                group_size,
                yields,
                thresholds,
                kappa: constants.kappa,
                mode,
            });
        }
        if top > base {
            top -= 1;
        } else if base > 0 {
            base -= 1;
            top = base;
        } else {
            return Err(Error::Planning(format!("{n} players at {bits} bits cannot support even level 0")));
        }
    }
}

/// Player index ranges per level; the remainder of `n mod (H − L + 1)` joins
/// group `L`.
pub fn group_ranges(n: usize, base: u32, top: u32) -> Vec<(u32, std::ops::Range<usize>)> {
    let groups = (top - base + 1) as usize;
    let size = n / groups;
    let first = size + n % groups;
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for (i, j) in (base..=top).enumerate() {
        let len = if i == 0 { first } else { size };
        out.push((j, start..start + len));
        start += len;
    }
    out
}

/// Multi-level estimator. Group `L` sends father and mother values at `L`,
/// group `J > L` mother values at `J`; details are hard-thresholded at
/// `κ √(J / m_J)` using the realized yields.
pub fn run_multi(
    samples: &[f64],
    bits: u32,
    table: &WaveletTable,
    plan: &LevelPlan,
    options: ChannelOptions,
    rng: &mut RandomStream,
) -> Result<Estimate> {
    check_samples(samples)?;
    if plan.base_level > plan.top_level {
        return Err(Error::Config("plan has L above H".into()));
    }
    if (samples.len() as u64) < plan.groups() {
        return Err(Error::Estimation(format!(
            "{} players cannot fill {} groups",
            samples.len(),
            plan.groups()
        )));
    }
    let mut alpha = BTreeMap::new();
    let mut beta = BTreeMap::new();
    let mut players = BTreeMap::new();
    let mut yields = BTreeMap::new();
    for (j, range) in group_ranges(samples.len(), plan.base_level, plan.top_level) {
        let group = &samples[range];
        let kind = plan.kind(j);
        let (sums, m) = run_group(group, bits, table, j, kind, options, rng)?;
        if m == 0 {
            return Err(Error::Estimation(format!(
                "group for level {j} produced no samples from {} players",
                group.len()
            )));
        }
        if kind == GroupKind::Base {
            alpha = sums.averages(WaveletKind::Father, m);
        }
        for (k, v) in sums.averages(WaveletKind::Mother, m) {
            beta.insert((j, k), v);
        }
        if plan.kappa > 0.0 {
            hard_threshold(&mut beta, j, plan.kappa * (j as f64 / m as f64).sqrt());
        }
        players.insert(j, group.len());
        yields.insert(j, m);
    }
    let tree = CoefficientTree {
        base_level: plan.base_level,
        top_level: plan.top_level,
        alpha,
        beta,
        kappa: Some(plan.kappa),
        thresholded: plan.kappa > 0.0,
    };
    Ok(Estimate { tree, players, yields })
}
