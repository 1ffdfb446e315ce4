//! The `b`-bit channel: part assignment, player messages, transcripts and the
//! referee-side simulation of i.i.d. symbols over a `D`-ary alphabet.
//!
//! When `2^b ≥ D` a player just sends its symbol. Otherwise the alphabet is cut
//! into `g = ⌈D / (2^b − 1)⌉` parts, player `i` watches part `i mod g` and sends
//! `0` if its symbol falls outside that part and `1 +` the local index otherwise.
//! Players never see other messages; the referee uses private randomness only.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::RandomStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBudget {
    pub bits: u32,
    pub alphabet_size: u64,
}

impl ChannelBudget {
    pub fn new(bits: u32, alphabet_size: u64) -> Result<Self> {
        if bits == 0 || bits > 63 {
            return Err(Error::Config(format!("bit budget {bits} must be in 1..=63")));
        }
        if alphabet_size == 0 {
            return Err(Error::Config("alphabet size must be at least 1".into()));
        }
        Ok(Self { bits, alphabet_size })
    }

    pub fn message_limit(&self) -> u64 {
        1u64 << self.bits
    }
}

/// How the referee turns messages into symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// No channel at all: the referee holds every symbol (coupling oracle).
    Ideal,
    /// One uniform pick per batch of `g` consecutive players. Exact.
    Exact,
    /// Each attempt picks a uniform part and consumes that part's next unused
    /// player, stopping at the first empty queue. Yield about `n / g`; exact up
    /// to the stopping rule.
    Sequential,
}

impl SimMode {
    pub fn name(&self) -> &'static str {
        match self {
            SimMode::Ideal => "ideal",
            SimMode::Exact => "exact",
            SimMode::Sequential => "sequential",
        }
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ideal" => Ok(SimMode::Ideal),
            "exact" | "exact_rejection" => Ok(SimMode::Exact),
            "sequential" => Ok(SimMode::Sequential),
            other => Err(Error::Parse(format!("unknown simulation mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub budget: ChannelBudget,
    /// `None` when `2^b ≥ D` and symbols pass through unchanged.
    pub parts: Option<u64>,
}

impl Assignment {
    pub fn is_passthrough(&self) -> bool {
        self.parts.is_none()
    }

    /// Batch size `g` (1 for passthrough).
    pub fn groups(&self) -> u64 {
        self.parts.unwrap_or(1)
    }

    pub fn part_width(&self) -> u64 {
        self.budget.message_limit() - 1
    }

    pub fn part_of_player(&self, player: u64) -> u64 {
        player % self.groups()
    }

    /// Symbol range `[start, end)` of part `p`.
    pub fn part_range(&self, part: u64) -> (u64, u64) {
        let w = self.part_width();
        let d = self.budget.alphabet_size;
        ((part * w).min(d), ((part + 1) * w).min(d))
    }

    pub fn part_sizes(&self) -> Vec<u64> {
        (0..self.groups()).map(|p| {
            let (a, b) = self.part_range(p);
            b - a
        }).collect()
    }

    pub fn part_of_symbol(&self, symbol: u64) -> u64 {
        match self.parts {
            None => 0,
            Some(_) => symbol / self.part_width(),
        }
    }

    fn decode(&self, player: u64, message: u64) -> Option<u64> {
        match self.parts {
            None => Some(message),
            Some(_) if message == 0 => None,
            Some(_) => Some(self.part_range(self.part_of_player(player)).0 + message - 1),
        }
    }
}

pub fn assign_parts(alphabet_size: u64, bits: u32) -> Result<Assignment> {
    let budget = ChannelBudget::new(bits, alphabet_size)?;
    let limit = budget.message_limit();
    let parts = if limit >= alphabet_size { None } else { Some(alphabet_size.div_ceil(limit - 1)) };
    Ok(Assignment { budget, parts })
}

/// The deterministic message of `player` holding `symbol`.
pub fn player_message(symbol: u64, player: u64, assignment: &Assignment) -> Result<u64> {
    let d = assignment.budget.alphabet_size;
    if symbol >= d {
        return Err(Error::Domain(format!("symbol {symbol} outside alphabet of size {d}")));
    }
    Ok(match assignment.parts {
        None => symbol,
        Some(_) => {
            let (start, end) = assignment.part_range(assignment.part_of_player(player));
            if (start..end).contains(&symbol) {
                1 + symbol - start
            } else {
                0
            }
        }
    })
}

/// Ordered player messages, each checked against the budget on append.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub assignment: Assignment,
    pub mode: SimMode,
    messages: Vec<u64>,
}

impl Transcript {
    pub fn new(assignment: Assignment, mode: SimMode) -> Self {
        Self { assignment, mode, messages: Vec::new() }
    }

    /// Encodes every symbol with its player index.
    pub fn from_symbols(symbols: &[u64], assignment: Assignment, mode: SimMode) -> Result<Self> {
        let mut t = Self::new(assignment, mode);
        t.messages.reserve(symbols.len());
        for (i, &s) in symbols.iter().enumerate() {
            t.push(player_message(s, i as u64, &assignment)?)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, message: u64) -> Result<()> {
        let limit = self.assignment.budget.message_limit();
        if message >= limit {
            return Err(Error::Protocol(format!(
                "message {message} exceeds the {}-bit budget",
                self.assignment.budget.bits
            )));
        }
        self.messages.push(message);
        Ok(())
    }

    pub fn messages(&self) -> &[u64] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "n={} b={} D={} g={} mode={}",
            self.len(),
            self.assignment.budget.bits,
            self.assignment.budget.alphabet_size,
            self.assignment.groups(),
            self.mode
        )?;
        for m in &self.messages {
            writeln!(out, "{m}")?;
        }
        Ok(())
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty transcript".into()))??;
        let mut fields = std::collections::HashMap::new();
        for item in header.split_whitespace() {
            let (key, value) =
                item.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field '{item}'")))?;
            fields.insert(key.to_string(), value.to_string());
        }
        let get = |key: &str| -> Result<&String> {
            fields.get(key).ok_or_else(|| Error::Parse(format!("header lacks '{key}'")))
        };
        let num = |key: &str| -> Result<u64> {
            get(key)?.parse().map_err(|_| Error::Parse(format!("header field '{key}' is not an integer")))
        };
        let n = num("n")?;
        let bits = u32::try_from(num("b")?).map_err(|_| Error::Parse("bit budget too large".into()))?;
        let assignment = assign_parts(num("D")?, bits)?;
        if assignment.groups() != num("g")? {
            return Err(Error::Protocol("header g does not match (D, b)".into()));
        }
        let mode: SimMode = get("mode")?.parse()?;
        let mut t = Self::new(assignment, mode);
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let m: u64 = line.parse().map_err(|_| Error::Parse(format!("bad message line '{line}'")))?;
            t.push(m)?;
        }
        if t.len() as u64 != n {
            return Err(Error::Parse(format!("header says {n} messages, found {}", t.len())));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub symbols: Vec<u64>,
    pub players: usize,
    pub mode: SimMode,
    pub passthrough: bool,
}

impl SimReport {
    pub fn yield_count(&self) -> usize {
        self.symbols.len()
    }
}

/// Reconstitutes i.i.d. symbols from a transcript.
pub fn referee_simulate(transcript: &Transcript, assignment: &Assignment, rng: &mut RandomStream) -> Result<SimReport> {
    if transcript.assignment != *assignment {
        return Err(Error::Protocol("transcript was produced under a different assignment".into()));
    }
    let messages = transcript.messages();
    let n = messages.len();
    let report = |symbols| SimReport { symbols, players: n, mode: transcript.mode, passthrough: assignment.is_passthrough() };
    if assignment.is_passthrough() || transcript.mode == SimMode::Ideal {
        if !assignment.is_passthrough() {
            return Err(Error::Protocol("ideal mode carries no transcript below the alphabet size".into()));
        }
        return Ok(report(messages.to_vec()));
    }
    let g = assignment.groups() as usize;
    let mut symbols = Vec::new();
    match transcript.mode {
        SimMode::Exact => {
            for batch in 0..n / g {
                let player = batch * g + rng.random_range(0..g);
                if let Some(s) = assignment.decode(player as u64, messages[player]) {
                    symbols.push(s);
                }
            }
        }
        SimMode::Sequential => {
            // Queue cursor per part; player i belongs to part i mod g.
            let mut next: Vec<usize> = (0..g).collect();
            loop {
                let part = rng.random_range(0..g);
                let player = next[part];
                if player >= n {
                    break;
                }
                next[part] += g;
                if let Some(s) = assignment.decode(player as u64, messages[player]) {
                    symbols.push(s);
                }
            }
        }
        SimMode::Ideal => unreachable!(),
    }
    Ok(report(symbols))
}

/// Planning yield for `n` players over a `D`-ary alphabet.
///
/// Sequential mode returns `⌊n/g⌋`, an upper bound on its mean.
pub fn expected_yield(n: u64, alphabet_size: u64, bits: u32, mode: SimMode) -> Result<u64> {
    let assignment = assign_parts(alphabet_size, bits)?;
    let g = assignment.groups();
    Ok(match (mode, assignment.is_passthrough()) {
        (SimMode::Ideal, _) | (_, true) => n,
        (SimMode::Exact, false) => (n / g) / g,
        (SimMode::Sequential, false) => n / g,
    })
}

/// Encodes `symbols` and simulates in one step. `Ideal` skips the channel.
pub fn transmit(symbols: &[u64], alphabet_size: u64, bits: u32, mode: SimMode, rng: &mut RandomStream) -> Result<SimReport> {
    if let Some(&s) = symbols.iter().find(|&&s| s >= alphabet_size) {
        return Err(Error::Domain(format!("symbol {s} outside alphabet of size {alphabet_size}")));
    }
    if mode == SimMode::Ideal {
        return Ok(SimReport { symbols: symbols.to_vec(), players: symbols.len(), mode, passthrough: true });
    }
    let assignment = assign_parts(alphabet_size, bits)?;
    let transcript = Transcript::from_symbols(symbols, assignment, mode)?;
    referee_simulate(&transcript, &assignment, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub total_variation: f64,
}

/// Pearson chi-square test of `symbols` against `probabilities`.
///
/// Cells with expected count below 5 are pooled into one cell. An observed
/// symbol of probability zero gives `p = 0`.
pub fn chi_square_gof(symbols: &[u64], probabilities: &[f64]) -> Result<GoodnessOfFit> {
    let m = symbols.len();
    if m == 0 {
        return Err(Error::Estimation("no symbols to test".into()));
    }
    let mut counts = vec![0u64; probabilities.len()];
    for &s in symbols {
        let slot = counts
            .get_mut(s as usize)
            .ok_or_else(|| Error::Domain(format!("symbol {s} outside the tested alphabet")))?;
        *slot += 1;
    }
    let total_variation = 0.5
        * counts
            .iter()
            .zip(probabilities)
            .map(|(&c, &p)| (c as f64 / m as f64 - p).abs())
            .sum::<f64>();
    if counts.iter().zip(probabilities).any(|(&c, &p)| c > 0 && p <= 0.0) {
        return Ok(GoodnessOfFit { statistic: f64::INFINITY, degrees_of_freedom: 0, p_value: 0.0, total_variation });
    }
    let mut statistic = 0.0;
    let mut cells = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probabilities) {
        let e = p * m as f64;
        if e <= 0.0 {
            continue;
        }
        if e < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += e;
        } else {
            statistic += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        statistic += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    if cells < 2 {
        return Ok(GoodnessOfFit { statistic: 0.0, degrees_of_freedom: 0, p_value: 1.0, total_variation });
    }
    let df = cells - 1;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(GoodnessOfFit { statistic, degrees_of_freedom: df, p_value: 1.0 - dist.cdf(statistic), total_variation })
}

/// Lag-1 serial correlation of a symbol sequence (0 when degenerate).
pub fn lag1_correlation(symbols: &[u64]) -> f64 {
    let m = symbols.len();
    if m < 3 {
        return 0.0;
    }
    let xs: Vec<f64> = symbols.iter().map(|&s| s as f64).collect();
    let mean = xs.iter().sum::<f64>() / m as f64;
    let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn part_assignment_examples() {
        assert!(assign_parts(4, 3).unwrap().is_passthrough());
        assert_eq!(assign_parts(64, 3).unwrap().groups(), 10);
        assert_eq!(assign_parts(7, 2).unwrap().part_sizes(), vec![3, 3, 1]);
        assert!(assign_parts(8, 0).is_err());
        assert!(assign_parts(0, 2).is_err());
    }

    #[test]
    fn message_examples() {
        let pass = assign_parts(4, 3).unwrap();
        assert_eq!(player_message(3, 9, &pass).unwrap(), 3);
        let a = assign_parts(64, 3).unwrap();
        // Player 1 watches part {7, ..., 13}.
        assert_eq!(player_message(8, 1, &a).unwrap(), 2);
        assert_eq!(player_message(3, 1, &a).unwrap(), 0);
        assert!(matches!(player_message(64, 0, &a), Err(Error::Domain(_))));
    }

    #[test]
    fn passthrough_returns_inputs() {
        let symbols: Vec<u64> = (0..100).map(|i| i % 5).collect();
        let r = transmit(&symbols, 5, 3, SimMode::Exact, &mut stream(1)).unwrap();
        assert_eq!(r.symbols, symbols);
        assert!(r.passthrough);
    }

    #[test]
    fn budget_is_enforced() {
        let mut t = Transcript::new(assign_parts(64, 3).unwrap(), SimMode::Exact);
        assert!(t.push(7).is_ok());
        assert!(matches!(t.push(8), Err(Error::Protocol(_))));
    }

    #[test]
    fn mismatched_assignment_is_rejected() {
        let t = Transcript::from_symbols(&[1, 2, 3], assign_parts(64, 3).unwrap(), SimMode::Exact).unwrap();
        let other = assign_parts(64, 2).unwrap();
        assert!(matches!(referee_simulate(&t, &other, &mut stream(0)), Err(Error::Protocol(_))));
    }

    #[test]
    fn yield_examples() {
        assert_eq!(expected_yield(50, 4, 3, SimMode::Exact).unwrap(), 50);
        assert_eq!(expected_yield(10_000, 64, 3, SimMode::Exact).unwrap(), 100);
        let mut last = 0;
        for b in 1..8 {
            let y = expected_yield(10_000, 64, b, SimMode::Exact).unwrap();
            assert!(y >= last);
            last = y;
        }
    }

    #[test]
    fn point_mass_acceptance_rate() {
        let symbols = vec![0u64; 60_000];
        let r = transmit(&symbols, 16, 2, SimMode::Exact, &mut stream(4)).unwrap();
        assert!(r.symbols.iter().all(|&s| s == 0));
        let rate = r.yield_count() as f64 / 10_000.0;
        assert!((rate - 1.0 / 6.0).abs() < 0.02, "{rate}");
    }

    #[test]
    fn transcript_round_trip() {
        let a = assign_parts(64, 3).unwrap();
        let t = Transcript::from_symbols(&[0, 8, 63, 20], a, SimMode::Sequential).unwrap();
        let mut buf = Vec::new();
        t.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n=4 b=3 D=64 g=10 mode=sequential\n"));
        assert_eq!(Transcript::parse(&buf[..]).unwrap(), t);
        assert!(Transcript::parse(&b"n=1 b=3 D=64 g=10 mode=exact\n9\n"[..]).is_err());
    }

    #[test]
    fn gof_flags_impossible_symbols() {
        let r = chi_square_gof(&[0, 1, 1], &[1.0, 0.0]).unwrap();
        assert_eq!(r.p_value, 0.0);
    }
}
