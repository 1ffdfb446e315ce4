//! Density fixtures on `[0, 1]`, inverse-CDF sampling, Besov norms, and the
//! sign-vector bump families `f_z = g0 + γ Σ c_k(z) ψ_{j,k}`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::DensityGrid;
use crate::rng::RandomStream;
use crate::wavelet::{analyze, WaveletKind, WaveletTable};
use crate::{Error, Result};

pub const DEFAULT_GRID: u32 = 14;
const INTEGRAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub p: f64,
    /// `f64::INFINITY` selects the sup over levels.
    pub q: f64,
    pub s: f64,
}

impl BesovParams {
    pub fn new(p: f64, q: f64, s: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("Besov p = {p} must be a finite real >= 1")));
        }
        if !(q >= 1.0) {
            return Err(Error::Config(format!("Besov q = {q} must be >= 1")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("Besov s = {s} must be positive")));
        }
        Ok(Self { p, q, s })
    }

    /// Level weight `2^{j(s + 1/2 - 1/p)}`.
    pub fn level_weight(&self, j: u32) -> f64 {
        (j as f64 * (self.s + 0.5 - 1.0 / self.p)).exp2()
    }
}

/// A density on `[0, 1]` represented by its grid interpolant, with the
/// cumulative table used for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    grid: DensityGrid,
    cdf: Vec<f64>,
    pub label: String,
}

impl DensityModel {
    /// Requires nonnegative values integrating to one within `1e-6`.
    pub fn new(grid: DensityGrid, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if let Some(v) = grid.values().iter().find(|v| **v < 0.0) {
            return Err(Error::Construction(format!("density `{label}` takes negative value {v}")));
        }
        let integral = grid.integral();
        if (integral - 1.0).abs() > INTEGRAL_TOLERANCE {
            return Err(Error::Construction(format!("density `{label}` integrates to {integral}")));
        }
        let h = grid.step();
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in grid.values().windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        Ok(Self { grid, cdf, label })
    }

    /// Scales a nonnegative grid to unit mass.
    pub fn normalized(grid: DensityGrid, label: impl Into<String>) -> Result<Self> {
        let mass = grid.integral();
        if !(mass > 0.0) {
            return Err(Error::Construction("cannot normalise a grid with no mass".into()));
        }
        Self::new(grid.map(|v| v / mass), label)
    }

    pub fn grid(&self) -> &DensityGrid {
        &self.grid
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.grid.eval(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.total_mass();
        }
        let n = (self.grid.len() - 1) as f64;
        let h = self.grid.step();
        let i = ((x * n).floor() as usize).min(self.grid.len() - 2);
        let d = x - i as f64 * h;
        let v = self.grid.values();
        let slope = (v[i + 1] - v[i]) / h;
        self.cdf[i] + v[i] * d + 0.5 * slope * d * d
    }

    fn total_mass(&self) -> f64 {
        *self.cdf.last().expect("grid has at least two points")
    }

    pub fn sup_norm(&self) -> f64 {
        self.grid.sup_norm()
    }

    /// Inverse-CDF draws from the piecewise-linear density.
    pub fn sample(&self, count: usize, rng: &mut RandomStream) -> Vec<f64> {
        (0..count).map(|_| self.draw(rng)).collect()
    }

    pub fn draw(&self, rng: &mut RandomStream) -> f64 {
        let target = rng.random::<f64>() * self.total_mass();
        let cell = match self.cdf.partition_point(|c| *c <= target) {
            0 => 0,
            i => (i - 1).min(self.cdf.len() - 2),
        };
        let v = self.grid.values();
        let h = self.grid.step();
        let (a, b) = (v[cell], v[cell + 1]);
        let rem = (target - self.cdf[cell]).max(0.0);
        // Solve a d + (b - a) d^2 / (2h) = rem for d in [0, h].
        let slope = (b - a) / h;
        let d = if slope.abs() < 1e-300 {
            if a > 0.0 {
                rem / a
            } else {
                0.0
            }
        } else {
            let disc = (a * a + 2.0 * slope * rem).max(0.0);
            let denom = a + disc.sqrt();
            if denom > 0.0 {
                2.0 * rem / denom
            } else {
                h
            }
        };
        (cell as f64 * h + d.clamp(0.0, h)).clamp(0.0, 1.0)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.grid.write_csv(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestDensity {
    Uniform,
    /// `1 - cos(2πx)`.
    RaisedCosine,
    /// `6x(1 - x)`; the kinks at the endpoints cap its smoothness at `s = 3/2` for `p = 2`.
    BetaLike,
    /// Three narrow trapezoidal plateaus.
    SpikyMix,
}

impl TestDensity {
    pub const ALL: [TestDensity; 4] =
        [TestDensity::Uniform, TestDensity::RaisedCosine, TestDensity::BetaLike, TestDensity::SpikyMix];

    pub fn name(&self) -> &'static str {
        match self {
            TestDensity::Uniform => "uniform",
            TestDensity::RaisedCosine => "raised_cosine",
            TestDensity::BetaLike => "beta_like",
            TestDensity::SpikyMix => "spiky_mix",
        }
    }
}

impl fmt::Display for TestDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestDensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        TestDensity::ALL
            .into_iter()
            .find(|d| d.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown test density `{s}`")))
    }
}

pub fn make_test_density(kind: TestDensity, grid_level: u32) -> DensityModel {
    use std::f64::consts::PI;
    let grid = match kind {
        TestDensity::Uniform => DensityGrid::constant(grid_level, 1.0),
        TestDensity::RaisedCosine => DensityGrid::from_fn(grid_level, |x| 1.0 - (2.0 * PI * x).cos()),
        TestDensity::BetaLike => DensityGrid::from_fn(grid_level, |x| 6.0 * x * (1.0 - x)),
        TestDensity::SpikyMix => DensityGrid::from_fn(grid_level, |x| {
            [(0.12, 0.03, 1.0), (0.47, 0.02, 2.0), (0.81, 0.04, 1.5)]
                .iter()
                .map(|&(centre, half, weight)| weight * trapezoid_bump(x, centre, half, 0.01))
                .sum()
        }),
    };
    DensityModel::normalized(grid, kind.name()).expect("fixtures have positive mass")
}

/// Height-one plateau on `[c - w, c + w]` with linear ramps of width `ramp`.
fn trapezoid_bump(x: f64, centre: f64, half_width: f64, ramp: f64) -> f64 {
    let d = (x - centre).abs();
    if d <= half_width {
        1.0
    } else if d < half_width + ramp {
        1.0 - (d - half_width) / ramp
    } else {
        0.0
    }
}

/// Truncated Besov norm with its per-level terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovNorm {
    pub value: f64,
    /// `‖α_{0·}‖_p`.
    pub alpha_part: f64,
    /// `2^{j(s+1/2-1/p)} ‖β_{j·}‖_p` for `j = 0..=j_max`.
    pub level_terms: Vec<f64>,
    pub j_max: u32,
    /// Geometric extrapolation of the omitted levels `j > j_max` (`∞` when the
    /// last terms are not decaying).
    pub tail_estimate: f64,
}

pub fn lp_norm(values: impl IntoIterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        values.into_iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

pub fn detail_coefficients(table: &WaveletTable, f: &DensityGrid, j: u32) -> Result<Vec<f64>> {
    table
        .translation_range(j)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| analyze(table, f, j, k, WaveletKind::Mother))
        .collect()
}

pub fn base_coefficients(table: &WaveletTable, f: &DensityGrid, j: u32) -> Result<Vec<f64>> {
    table
        .translation_range(j)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| analyze(table, f, j, k, WaveletKind::Father))
        .collect()
}

/// Combines `‖α_0‖_p` and per-level `‖β_j‖_p` into the Besov norm.
pub fn besov_from_parts(alpha_part: f64, detail_norms: &[f64], params: &BesovParams) -> BesovNorm {
    let level_terms: Vec<f64> =
        detail_norms.iter().enumerate().map(|(j, n)| params.level_weight(j as u32) * n).collect();
    let detail = lp_norm(level_terms.iter().copied(), params.q);
    let tail_estimate = match level_terms.as_slice() {
        [.., prev, last] if *prev > 0.0 && last < prev => {
            let ratio = last / prev;
            if params.q.is_infinite() {
                last * ratio
            } else {
                (last.powf(params.q) * ratio.powf(params.q) / (1.0 - ratio.powf(params.q))).powf(1.0 / params.q)
            }
        }
        _ => f64::INFINITY,
    };
    BesovNorm {
        value: alpha_part + detail,
        alpha_part,
        j_max: level_terms.len().saturating_sub(1) as u32,
        level_terms,
        tail_estimate,
    }
}

/// `‖α_{0·}‖_p + (Σ_{j ≤ j_max} (2^{j(s+1/2-1/p)} ‖β_{j·}‖_p)^q)^{1/q}`.
pub fn besov_norm(f: &DensityGrid, table: &WaveletTable, params: &BesovParams, j_max: u32) -> Result<BesovNorm> {
    if j_max + 2 > f.level() {
        return Err(Error::Resolution { grid: f.level(), level: j_max, needed: j_max + 2 });
    }
    let alpha_part = lp_norm(base_coefficients(table, f, 0)?, params.p);
    let detail_norms = (0..=j_max)
        .map(|j| detail_coefficients(table, f, j).map(|c| lp_norm(c, params.p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(besov_from_parts(alpha_part, &detail_norms, params))
}

/// `(j, ‖β_{j·}‖_p)` for each level in the range, for smoothness diagnostics.
pub fn coefficient_decay(
    f: &DensityGrid,
    table: &WaveletTable,
    p: f64,
    levels: std::ops::RangeInclusive<u32>,
) -> Result<Vec<(u32, f64)>> {
    levels.map(|j| detail_coefficients(table, f, j).map(|c| (j, lp_norm(c, p)))).collect()
}

/// Smoothness implied by the decay `‖β_j‖_p ≍ 2^{-j(s+1/2-1/p)}`, from a
/// least-squares slope over the given levels.
pub fn effective_smoothness(decay: &[(u32, f64)], p: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = decay.iter().map(|&(j, n)| (j as f64, n.log2())).collect();
    if pts.len() < 2 || pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::Fit("need at least two levels with nonzero detail norm".into()));
    }
    let (slope, _) = least_squares(&pts);
    Ok(-slope - 0.5 + 1.0 / p)
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

// ---------------------------------------------------------------------------
// Bump families

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BumpVariant {
    /// `f_z = g0 + γ Σ z_k ψ_{j,k}` under a uniform sign prior.
    P1,
    /// `f_z = g0 + γ Σ (1 + z_k) ψ_{j,k}` under the sparse prior `P(z_k = 1) = 1/d`.
    P2,
}

impl FromStr for BumpVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p1" => Ok(BumpVariant::P1),
            "p2" => Ok(BumpVariant::P2),
            _ => Err(Error::Config(format!("unknown bump variant `{s}`"))),
        }
    }
}

pub const PLATEAU: (f64, f64) = (0.25, 0.75);

/// Smooth plateau density: flat on `[0.25, 0.75]`, with `C^∞` shoulders on
/// `[0, 0.25]` and `[0.75, 1]`. Normalisation puts the plateau at `c0 = 4/3`.
pub fn plateau_density(grid_level: u32) -> DensityModel {
    let (a, b) = PLATEAU;
    let grid = DensityGrid::from_fn(grid_level, |x| smoothstep(x / a) * smoothstep((1.0 - x) / (1.0 - b)));
    DensityModel::normalized(grid, "g0").expect("plateau has mass")
}

fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let up = (-1.0 / t).exp();
    let down = (-1.0 / (1.0 - t)).exp();
    up / (up + down)
}

/// Levels between the grid and the finest level of a family's Besov norm.
pub const NORM_LEVEL_MARGIN: u32 = 6;

/// Geometry and scale of a bump family. The ball radius is twice the Besov norm
/// of `g0`, so that `g0` sits at half the radius.
#[derive(Debug, Clone)]
pub struct BumpFamily {
    pub variant: BumpVariant,
    pub params: BesovParams,
    pub g0: DensityModel,
    pub c0: f64,
    pub interval: (f64, f64),
    pub j: u32,
    pub constant: f64,
    pub gamma: f64,
    /// Translation indices of the disjoint bumps inside `[a, b]`.
    pub indices: Vec<i64>,
    /// Prior parameter: `1/2` for P1, `1/d` for P2. Metadata only.
    pub tau: f64,
    pub radius: f64,
    /// Finest level in the truncated Besov norm behind `radius`.
    pub norm_j_max: u32,
    g0_alpha_part: f64,
    g0_detail_norms: Vec<f64>,
    g0_level_j: Vec<f64>,
    /// `A`; level-`j` coefficient vectors are indexed from `k = -A`.
    support_radius: i64,
}

impl BumpFamily {
    /// `γ / C` for the variant.
    pub fn gamma_factor(variant: BumpVariant, params: &BesovParams, j: u32) -> f64 {
        let j_f = j as f64;
        match variant {
            BumpVariant::P1 => (-j_f * (params.s + 0.5)).exp2(),
            BumpVariant::P2 => (-j_f * (params.s + 0.5 - 1.0 / params.p)).exp2() * j_f.powf(-1.0 / params.p),
        }
    }

    pub fn new(
        variant: BumpVariant,
        params: BesovParams,
        table: &WaveletTable,
        j: u32,
        constant: f64,
        grid_level: u32,
    ) -> Result<Self> {
        if j == 0 || j + 2 > grid_level {
            return Err(Error::Construction(format!("bump level j = {j} unusable on grid {grid_level}")));
        }
        let g0 = plateau_density(grid_level);
        let (a, b) = PLATEAU;
        let c0 = g0.eval(0.5 * (a + b));
        let indices = bump_indices(table, j, a, b);
        if indices.is_empty() {
            return Err(Error::Construction(format!("no disjoint level-{j} bumps fit inside [{a}, {b}]")));
        }
        // The nodal grid smears each bump edge over one cell, which inflates the
        // finest details, so the truncated norm stops a few levels short.
        let j_max = grid_level.saturating_sub(NORM_LEVEL_MARGIN).max(j);
        let g0_alpha_part = lp_norm(base_coefficients(table, g0.grid(), 0)?, params.p);
        let mut g0_detail_norms = Vec::with_capacity(j_max as usize + 1);
        let mut g0_level_j = Vec::new();
        for level in 0..=j_max {
            let c = detail_coefficients(table, g0.grid(), level)?;
            if level == j {
                g0_level_j = c.clone();
            }
            g0_detail_norms.push(lp_norm(c, params.p));
        }
        let radius = 2.0 * besov_from_parts(g0_alpha_part, &g0_detail_norms, &params).value;
        let d = indices.len();
        let mut family = Self {
            variant,
            params,
            g0,
            c0,
            interval: (a, b),
            j,
            constant,
            gamma: constant * Self::gamma_factor(variant, &params, j),
            indices,
            tau: match variant {
                BumpVariant::P1 => 0.5,
                BumpVariant::P2 => 1.0 / d as f64,
            },
            radius,
            norm_j_max: j_max,
            g0_alpha_part,
            g0_detail_norms,
            g0_level_j,
            support_radius: table.support_radius() as i64,
        };
        if family.constant > family.max_positive_constant(table) * (1.0 + 1e-12) {
            return Err(Error::Construction(format!(
                "γ = {} breaks f_z >= c0/2 at j = {j}; j is too small for this constant",
                family.gamma
            )));
        }
        family.gamma = family.constant * Self::gamma_factor(variant, &params, j);
        Ok(family)
    }

    /// Family whose constant is the largest keeping every prior draw inside the
    /// Besov ball (and `f_z ≥ c0/2`), found by bisection.
    pub fn calibrated(
        variant: BumpVariant,
        params: BesovParams,
        table: &WaveletTable,
        j: u32,
        grid_level: u32,
        draws: usize,
        rng: &mut RandomStream,
    ) -> Result<Self> {
        let mut family = Self::new(variant, params, table, j, 0.0, grid_level)?;
        let mut signs: Vec<Vec<i8>> = (0..draws).map(|_| family.draw_prior(rng)).collect();
        if variant == BumpVariant::P2 {
            // Worst admissible configuration: the first min(2j, d) bumps active.
            let d = family.dimension();
            let active = (2 * j as usize).min(d);
            signs.push((0..d).map(|i| if i < active { 1 } else { -1 }).collect());
        }
        let cap = family.max_positive_constant(table);
        let target = 0.99 * family.radius;
        let fits = |c: f64, fam: &BumpFamily| signs.iter().all(|z| fam.predicted_norm(c, z) <= target);
        let constant = if fits(cap, &family) {
            cap
        } else {
            let (mut lo, mut hi) = (0.0, cap);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if fits(mid, &family) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        family.constant = constant;
        family.gamma = constant * Self::gamma_factor(variant, &params, j);
        Ok(family)
    }

    pub fn dimension(&self) -> usize {
        self.indices.len()
    }

    /// Per-bump multipliers `c_k(z)`: `z_k` for P1, `1 + z_k` for P2.
    pub fn multipliers(&self, z: &[i8]) -> Vec<f64> {
        z.iter()
            .map(|&zk| match self.variant {
                BumpVariant::P1 => zk as f64,
                BumpVariant::P2 => 1.0 + zk as f64,
            })
            .collect()
    }

    fn max_multiplier(&self) -> f64 {
        match self.variant {
            BumpVariant::P1 => 1.0,
            BumpVariant::P2 => 2.0,
        }
    }

    /// Largest constant with `c0 - m γ 2^{j/2} ‖ψ‖_∞ ≥ c0/2`.
    fn max_positive_constant(&self, table: &WaveletTable) -> f64 {
        let factor = Self::gamma_factor(self.variant, &self.params, self.j);
        self.c0 / (2.0 * self.max_multiplier() * table.sup_psi * (self.j as f64 * 0.5).exp2() * factor)
    }

    /// Besov norm of `f_z` from the coefficients of `g0`: the bumps are basis
    /// functions, so only level `j` changes.
    fn predicted_norm(&self, constant: f64, z: &[i8]) -> f64 {
        let gamma = constant * Self::gamma_factor(self.variant, &self.params, self.j);
        let mut level = self.g0_level_j.clone();
        for (&k, c) in self.indices.iter().zip(self.multipliers(z)) {
            level[(k + self.support_radius) as usize] += gamma * c;
        }
        let mut norms = self.g0_detail_norms.clone();
        norms[self.j as usize] = lp_norm(level, self.params.p);
        besov_from_parts(self.g0_alpha_part, &norms, &self.params).value
    }

    pub fn draw_prior(&self, rng: &mut RandomStream) -> Vec<i8> {
        let p_plus = match self.variant {
            BumpVariant::P1 => 0.5,
            BumpVariant::P2 => 1.0 / self.dimension() as f64,
        };
        (0..self.dimension()).map(|_| if rng.random::<f64>() < p_plus { 1 } else { -1 }).collect()
    }

    /// Membership in `G = {z : #{k : z_k = 1} ≤ 2j}`.
    pub fn in_good_set(&self, z: &[i8]) -> bool {
        z.iter().filter(|&&v| v == 1).count() <= 2 * self.j as usize
    }

    pub fn density(&self, table: &WaveletTable, z: &[i8]) -> Result<DensityModel> {
        if z.len() != self.dimension() || z.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Config(format!("sign vector must have {} entries in {{-1, 1}}", self.dimension())));
        }
        let level = self.g0.grid().level();
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let mut values = self.g0.grid().values().to_vec();
        let (lo, hi) = table.support();
        let scale = (self.j as f64 * 0.5).exp2();
        for (&k, c) in self.indices.iter().zip(self.multipliers(z)) {
            if c == 0.0 {
                continue;
            }
            let per_unit = 1i64 << (level - self.j);
            let first = ((k + lo) * per_unit).max(0) as usize;
            let last = (((k + hi) * per_unit) as usize).min(n);
            for (i, v) in values.iter_mut().enumerate().take(last + 1).skip(first) {
                let u = i as f64 * h * (1u64 << self.j) as f64 - k as f64;
                *v += self.gamma * c * scale * table.value_balanced(WaveletKind::Mother, u);
            }
        }
        let label = format!("{:?}:j={}", self.variant, self.j).to_lowercase();
        DensityModel::new(DensityGrid::new(level, values)?, label)
    }

    pub fn g0_norm(&self) -> f64 {
        self.radius / 2.0
    }
}

/// Indices `k` with `supp ψ_{j,k} ⊆ [a, b]`, spaced so the supports are disjoint.
pub fn bump_indices(table: &WaveletTable, j: u32, a: f64, b: f64) -> Vec<i64> {
    let (lo, hi) = table.support();
    let width = hi - lo;
    let scale = (1u64 << j) as f64;
    let mut k = (a * scale).ceil() as i64 - lo;
    let mut out = Vec::new();
    while ((k + hi) as f64) <= b * scale {
        out.push(k);
        k += width;
    }
    out
}

/// `‖f_z − f_{z'}‖_r^r` by quadrature and by the closed form
/// `|2γ|^r ‖ψ‖_r^r 2^{j(r/2−1)} · Hamming(z, z')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDistance {
    pub quadrature: f64,
    pub closed_form: f64,
    pub hamming: usize,
}

pub fn pairwise_distance(
    family: &BumpFamily,
    table: &WaveletTable,
    z: &[i8],
    z_prime: &[i8],
    r: f64,
) -> Result<PairwiseDistance> {
    let fz = family.density(table, z)?;
    let fzp = family.density(table, z_prime)?;
    let quadrature = fz.grid().lr_distance(fzp.grid(), r);
    let hamming = z.iter().zip(z_prime).filter(|(a, b)| a != b).count();
    let psi_r = mother_lr_norm(table, r);
    let closed_form =
        (2.0 * family.gamma).abs().powf(r) * psi_r * (family.j as f64 * (r / 2.0 - 1.0)).exp2() * hamming as f64;
    Ok(PairwiseDistance { quadrature, closed_form, hamming })
}

/// `∫ |ψ|^r` over the table grid.
pub fn mother_lr_norm(table: &WaveletTable, r: f64) -> f64 {
    let powered: Vec<f64> = table.values(WaveletKind::Mother).iter().map(|v| v.abs().powf(r)).collect();
    match table.interpolation {
        crate::wavelet::Interpolation::Step => powered[..powered.len() - 1].iter().sum::<f64>() * table.step(),
        crate::wavelet::Interpolation::Linear => crate::grid::trapezoid(&powered, table.step()),
    }
}
