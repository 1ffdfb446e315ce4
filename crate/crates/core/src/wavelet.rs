//! Compactly supported orthonormal wavelets on the real line, tabulated on a
//! dyadic grid.
//!
//! Daubechies scaling functions have no closed form, so they are built by the
//! cascade construction: the values at the integers are the eigenvector of the
//! refinement matrix for eigenvalue one (normalised to sum one), and dyadic
//! subdivision then fills in every point of step `2^-R`. The mother wavelet
//! follows from the two-scale relation with the quadrature-mirror filter.
//!
//! The Daubechies-`k` scaling function natively lives on `[0, 2k - 1]`; the
//! table shifts it left by `k - 1` so the stored support is `[1 - k, k]`, which
//! sits inside `[-A, A]` with `A = 2k - 1`. The shift is an integer
//! translation, so orthonormality and the generated spaces are unchanged.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::estimators::CoefficientTree;
use crate::grid::{trapezoid, DensityGrid};
use crate::{Error, Result};

pub const DEFAULT_RESOLUTION: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFamily {
    Haar,
    Daubechies(u8),
}

impl WaveletFamily {
    pub fn filter(&self) -> Result<&'static [f64]> {
        match *self {
            WaveletFamily::Haar => Ok(&HAAR),
            WaveletFamily::Daubechies(k) => daubechies_filter(k)
                .ok_or_else(|| Error::Config(format!("unsupported Daubechies order {k} (use 2..=10)"))),
        }
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveletFamily::Haar => write!(f, "haar"),
            WaveletFamily::Daubechies(k) => write!(f, "db{k}"),
        }
    }
}

impl FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "haar" || s == "db1" {
            return Ok(WaveletFamily::Haar);
        }
        let k = s
            .strip_prefix("db")
            .and_then(|rest| rest.parse::<u8>().ok())
            .ok_or_else(|| Error::Config(format!("unknown wavelet family `{s}`")))?;
        let family = WaveletFamily::Daubechies(k);
        family.filter()?;
        Ok(family)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletKind {
    Father,
    Mother,
}

/// Family together with its regularity `N` and support radius `A`.
///
/// `N` is the polynomial-reproduction order: `0` for Haar and `k - 1` for
/// Daubechies-`k` (which has `k` vanishing moments).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub regularity: u32,
    pub support_radius: u32,
}

impl WaveletSpec {
    pub fn new(family: WaveletFamily) -> Result<Self> {
        let taps = family.filter()?.len() as u32;
        let (regularity, support_radius) = match family {
            WaveletFamily::Haar => (0, 1),
            WaveletFamily::Daubechies(k) => (k as u32 - 1, taps - 1),
        };
        Ok(Self { family, regularity, support_radius })
    }

    pub fn haar() -> Self {
        Self::new(WaveletFamily::Haar).expect("haar is always supported")
    }

    pub fn daubechies(k: u8) -> Result<Self> {
        Self::new(WaveletFamily::Daubechies(k))
    }

    /// Integer support `[lo, hi]` of the stored (shifted) father and mother.
    pub fn support(&self) -> (i64, i64) {
        match self.family {
            WaveletFamily::Haar => (0, 1),
            WaveletFamily::Daubechies(k) => (1 - k as i64, k as i64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Piecewise constant, left-continuous grid value (exact for Haar).
    Step,
    Linear,
}

/// Father and mother wavelets sampled at step `2^-resolution` over their
/// support. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletTable {
    pub spec: WaveletSpec,
    pub resolution: u32,
    pub interpolation: Interpolation,
    support_lo: i64,
    support_hi: i64,
    phi: Vec<f64>,
    psi: Vec<f64>,
    pub sup_phi: f64,
    pub sup_psi: f64,
    pub integral_phi: f64,
}

pub fn build_table(spec: WaveletSpec, resolution: u32) -> Result<WaveletTable> {
    if !(6..=20).contains(&resolution) {
        return Err(Error::Config(format!("resolution {resolution} outside [6, 20]")));
    }
    let filter = spec.family.filter()?;
    let (lo, hi) = spec.support();
    let (phi, psi, interpolation) = match spec.family {
        WaveletFamily::Haar => {
            let n = 1usize << resolution;
            let half = n / 2;
            let mut phi = vec![1.0; n + 1];
            phi[n] = 0.0;
            let mut psi: Vec<f64> = (0..=n).map(|i| if i < half { 1.0 } else { -1.0 }).collect();
            psi[n] = 0.0;
            (phi, psi, Interpolation::Step)
        }
        WaveletFamily::Daubechies(_) => {
            let phi = cascade_father(filter, resolution)?;
            let psi = two_scale_mother(filter, &phi, resolution);
            (phi, psi, Interpolation::Linear)
        }
    };
    debug_assert_eq!(phi.len() as i64, (hi - lo) * (1 << resolution) + 1);
    let mut table = WaveletTable {
        spec,
        resolution,
        interpolation,
        support_lo: lo,
        support_hi: hi,
        sup_phi: sup(&phi),
        sup_psi: sup(&psi),
        integral_phi: 0.0,
        phi,
        psi,
    };
    table.integral_phi = table.integrate(WaveletKind::Father);
    table.validate()?;
    Ok(table)
}

/// Father values on the native support `[0, taps - 1]` at step `2^-resolution`.
fn cascade_father(filter: &[f64], resolution: u32) -> Result<Vec<f64>> {
    let taps = filter.len();
    let scale = 1usize << resolution;
    let last = (taps - 1) * scale;
    let mut values = vec![0.0; last + 1];

    // Interior integers 1..=taps-2; the endpoints vanish.
    let m = taps - 2;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut refine = DMatrix::<f64>::zeros(m, m);
    for row in 0..m {
        let n = row + 1;
        for col in 0..m {
            let mm = col + 1;
            let tap = 2 * n as i64 - mm as i64;
            if (0..taps as i64).contains(&tap) {
                refine[(row, col)] = sqrt2 * filter[tap as usize];
            }
        }
    }
    let mut system = refine.clone() - DMatrix::<f64>::identity(m, m);
    for col in 0..m {
        system[(m - 1, col)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(m);
    rhs[m - 1] = 1.0;
    let integer_values = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("refinement eigen-system is singular".into()))?;
    let residual = (&refine * &integer_values - &integer_values).amax();
    if !residual.is_finite() || residual > 1e-9 {
        return Err(Error::Numeric(format!(
            "refinement eigen-system has no unit eigenvector (residual {residual:e})"
        )));
    }
    for (row, v) in integer_values.iter().enumerate() {
        values[(row + 1) * scale] = *v;
    }

    for level in 1..=resolution {
        let stride = 1usize << (resolution - level);
        let mut i = stride;
        while i < last {
            let mut acc = 0.0;
            for (tap, h) in filter.iter().enumerate() {
                let src = 2 * i as i64 - (tap * scale) as i64;
                if (0..=last as i64).contains(&src) {
                    acc += h * values[src as usize];
                }
            }
            values[i] = sqrt2 * acc;
            i += 2 * stride;
        }
    }
    Ok(values)
}

/// `ψ(x) = √2 Σ_m g_m φ(2x − m)` with `g_m = (−1)^m h_{L−1−m}`.
fn two_scale_mother(filter: &[f64], phi: &[f64], resolution: u32) -> Vec<f64> {
    let taps = filter.len();
    let scale = 1usize << resolution;
    let last = phi.len() - 1;
    let sqrt2 = std::f64::consts::SQRT_2;
    (0..=last)
        .map(|i| {
            let mut acc = 0.0;
            for tap in 0..taps {
                let g = if tap % 2 == 0 { filter[taps - 1 - tap] } else { -filter[taps - 1 - tap] };
                let src = 2 * i as i64 - (tap * scale) as i64;
                if (0..=last as i64).contains(&src) {
                    acc += g * phi[src as usize];
                }
            }
            sqrt2 * acc
        })
        .collect()
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

impl WaveletTable {
    pub fn support(&self) -> (i64, i64) {
        (self.support_lo, self.support_hi)
    }

    pub fn support_radius(&self) -> u32 {
        self.spec.support_radius
    }

    pub fn values(&self, kind: WaveletKind) -> &[f64] {
        match kind {
            WaveletKind::Father => &self.phi,
            WaveletKind::Mother => &self.psi,
        }
    }

    pub fn step(&self) -> f64 {
        (-(self.resolution as f64)).exp2()
    }

    /// `max(sup |φ|, sup |ψ|)`, the quantizer box bound.
    pub fn sup_bound(&self) -> f64 {
        self.sup_phi.max(self.sup_psi)
    }

    /// Translation indices `{-A, ..., 2^j + A}` covering every `k` whose
    /// level-`j` support meets `[0, 1]`.
    pub fn translation_range(&self, j: u32) -> RangeInclusive<i64> {
        let a = self.spec.support_radius as i64;
        -a..=(1i64 << j) + a
    }

    /// Unscaled table function `g(u)`, zero outside the support.
    pub fn value(&self, kind: WaveletKind, u: f64) -> f64 {
        if !(u >= self.support_lo as f64 && u <= self.support_hi as f64) {
            return 0.0;
        }
        let values = self.values(kind);
        let last = values.len() - 1;
        let pos = (u - self.support_lo as f64) * (1u64 << self.resolution) as f64;
        let i = pos.floor() as usize;
        if i >= last {
            return values[last];
        }
        match self.interpolation {
            Interpolation::Step => values[i],
            Interpolation::Linear => {
                let w = pos - i as f64;
                if w == 0.0 {
                    values[i]
                } else {
                    (1.0 - w) * values[i] + w * values[i + 1]
                }
            }
        }
    }

    /// Like [`value`](Self::value), but at a jump of a step table returns the
    /// mean of the one-sided limits, so the linear interpolant of samples taken
    /// on a dyadic grid integrates exactly.
    pub fn value_balanced(&self, kind: WaveletKind, u: f64) -> f64 {
        if self.interpolation == Interpolation::Linear {
            return self.value(kind, u);
        }
        let pos = (u - self.support_lo as f64) * (1u64 << self.resolution) as f64;
        if pos.fract() != 0.0 {
            return self.value(kind, u);
        }
        let left = self.value(kind, u - self.step() * 0.5);
        0.5 * (left + self.value(kind, u))
    }

    /// `g_{j,k}(x) = 2^{j/2} g(2^j x − k)`.
    pub fn eval(&self, kind: WaveletKind, j: u32, k: i64, x: f64) -> f64 {
        let u = x * (1u64 << j) as f64 - k as f64;
        let g = self.value(kind, u);
        if g == 0.0 {
            0.0
        } else {
            level_scale(j) * g
        }
    }

    fn integrate(&self, kind: WaveletKind) -> f64 {
        let values = self.values(kind);
        match self.interpolation {
            Interpolation::Step => values[..values.len() - 1].iter().sum::<f64>() * self.step(),
            Interpolation::Linear => trapezoid(values, self.step()),
        }
    }

    /// Largest deviation of `∫ φ(x) φ(x − m) dx` from `δ_{m0}` over all shifts.
    pub fn gram_deviation(&self) -> f64 {
        let scale = 1usize << self.resolution;
        let width = (self.support_hi - self.support_lo) as usize;
        let h = self.step();
        let mut worst = 0.0_f64;
        for m in 0..=width {
            let offset = m * scale;
            let products: Vec<f64> = (0..self.phi.len())
                .map(|i| if i >= offset { self.phi[i] * self.phi[i - offset] } else { 0.0 })
                .collect();
            let g = match self.interpolation {
                Interpolation::Step => products[..products.len() - 1].iter().sum::<f64>() * h,
                Interpolation::Linear => trapezoid(&products, h),
            };
            let target = if m == 0 { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
        worst
    }

    /// Largest deviation of `Σ_k φ(u − k)` from one over a unit period.
    pub fn partition_of_unity_deviation(&self) -> f64 {
        let scale = 1usize << self.resolution;
        (0..scale)
            .map(|t| {
                let s: f64 = (0..)
                    .map(|m| t + m * scale)
                    .take_while(|&i| i < self.phi.len())
                    .map(|i| self.phi[i])
                    .sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Re-checks the table invariants (used after import).
    pub fn validate(&self) -> Result<()> {
        let expected = ((self.support_hi - self.support_lo) as usize) * (1usize << self.resolution) + 1;
        if self.phi.len() != expected || self.psi.len() != expected {
            return Err(Error::Config("table length does not match support and resolution".into()));
        }
        if (self.support_lo, self.support_hi) != self.spec.support() {
            return Err(Error::Config("table support does not match its family".into()));
        }
        if self.phi.iter().chain(&self.psi).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite wavelet value".into()));
        }
        if (self.integrate(WaveletKind::Father) - 1.0).abs() > 1e-3 {
            return Err(Error::Numeric(format!("∫φ = {} is not 1", self.integral_phi)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: WaveletTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }
}

pub(crate) fn level_scale(j: u32) -> f64 {
    (j as f64 * 0.5).exp2()
}

/// Quadrature approximation of `∫ f g_{j,k}` on the union of the density grid
/// and the scaled wavelet grid.
pub fn analyze(table: &WaveletTable, f: &DensityGrid, j: u32, k: i64, kind: WaveletKind) -> Result<f64> {
    if f.level() < j + 2 {
        return Err(Error::Resolution { grid: f.level(), level: j, needed: j + 2 });
    }
    let union = f.level().max(j + table.resolution);
    if union > 40 {
        return Err(Error::Config(format!("union grid level {union} too fine")));
    }
    let (lo, hi) = table.support();
    let per_unit = 1i64 << (union - j);
    let start = ((k + lo) * per_unit).max(0);
    let end = ((k + hi) * per_unit).min(1i64 << union);
    if start >= end {
        return Ok(0.0);
    }
    let h = (-(union as f64)).exp2();
    let point = |i: i64| -> (f64, f64) {
        let x = i as f64 * h;
        (f.eval(x), table.eval(kind, j, k, x))
    };
    let mut acc = 0.0;
    match table.interpolation {
        Interpolation::Step => {
            // g is constant on each union cell; f is linear there.
            let (mut f_prev, mut g_prev) = point(start);
            for i in start + 1..=end {
                let (f_next, g_next) = point(i);
                acc += g_prev * 0.5 * (f_prev + f_next);
                f_prev = f_next;
                g_prev = g_next;
            }
        }
        Interpolation::Linear => {
            let (f0, g0) = point(start);
            let (f1, g1) = point(end);
            acc = 0.5 * (f0 * g0 + f1 * g1);
            for i in start + 1..end {
                let (fi, gi) = point(i);
                acc += fi * gi;
            }
        }
    }
    Ok(acc * h)
}

/// Father coefficients at level `j` for every `k` in the translation range.
pub fn analyze_level(
    table: &WaveletTable,
    f: &DensityGrid,
    j: u32,
    kind: WaveletKind,
) -> Result<Vec<(i64, f64)>> {
    table
        .translation_range(j)
        .map(|k| analyze(table, f, j, k, kind).map(|c| (k, c)))
        .collect()
}

/// Pointwise synthesis of a finite expansion on the grid of step `2^-grid_resolution`.
pub fn reconstruct(tree: &CoefficientTree, table: &WaveletTable, grid_resolution: u32) -> DensityGrid {
    let n = 1usize << grid_resolution;
    let mut values = vec![0.0; n + 1];
    let l = tree.base_level;
    for (&k, &a) in &tree.alpha {
        accumulate(&mut values, table, WaveletKind::Father, l, k, a, grid_resolution);
    }
    for (&(j, k), &b) in &tree.beta {
        accumulate(&mut values, table, WaveletKind::Mother, j, k, b, grid_resolution);
    }
    DensityGrid::new(grid_resolution, values).expect("synthesis keeps the grid shape")
}

fn accumulate(
    values: &mut [f64],
    table: &WaveletTable,
    kind: WaveletKind,
    j: u32,
    k: i64,
    coefficient: f64,
    grid: u32,
) {
    if coefficient == 0.0 {
        return;
    }
    let (lo, hi) = table.support();
    let n = values.len() - 1;
    let points_per_unit = (grid as f64 - j as f64).exp2();
    let first = (((k + lo) as f64) * points_per_unit).ceil().max(0.0) as usize;
    let last = ((((k + hi) as f64) * points_per_unit).floor().min(n as f64)).max(-1.0);
    if last < 0.0 {
        return;
    }
    let last = last as usize;
    let h = 1.0 / n as f64;
    for (i, v) in values.iter_mut().enumerate().take(last + 1).skip(first) {
        *v += coefficient * table.eval(kind, j, k, i as f64 * h);
    }
}

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

/// Orthonormal Daubechies low-pass filters (sum `√2`), `k` vanishing moments.
pub fn daubechies_filter(k: u8) -> Option<&'static [f64]> {
    Some(match k {
        2 => &DB2,
        3 => &DB3,
        4 => &DB4,
        5 => &DB5,
        6 => &DB6,
        7 => &DB7,
        8 => &DB8,
        9 => &DB9,
        10 => &DB10,
        _ => return None,
    })
}

const DB2: [f64; 4] = [0.48296291314453416, 0.8365163037378079, 0.2241438680420134, -0.12940952255126037];
const DB3: [f64; 6] = [
    0.33267055295008263,
    0.8068915093110925,
    0.45987750211849154,
    -0.13501102001025458,
    -0.08544127388202666,
    0.03522629188570953,
];
const DB4: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];
const DB5: [f64; 10] = [
    0.16010239797419293,
    0.6038292697971896,
    0.7243085284377729,
    0.13842814590132074,
    -0.24229488706638203,
    -0.032244869584638375,
    0.07757149384004572,
    -0.006241490212798274,
    -0.012580751999081999,
    0.0033357252854737712,
];
const DB6: [f64; 12] = [
    0.11154074335010947,
    0.49462389039845306,
    0.7511339080210954,
    0.31525035170919763,
    -0.22626469396543983,
    -0.12976686756726194,
    0.09750160558732304,
    0.027522865530305727,
    -0.03158203931748603,
    0.0005538422011614961,
    0.004777257510945511,
    -0.0010773010853084796,
];
const DB7: [f64; 14] = [
    0.07785205408500918,
    0.3965393194819173,
    0.7291320908462351,
    0.4697822874051931,
    -0.14390600392856498,
    -0.22403618499387498,
    0.07130921926683026,
    0.08061260915108308,
    -0.03802993693501441,
    -0.01657454163066688,
    0.01255099855609984,
    0.0004295779729213665,
    -0.0018016407040474908,
    0.00035371379997452024,
];
const DB8: [f64; 16] = [
    0.05441584224310401,
    0.31287159091429995,
    0.6756307362972898,
    0.5853546836542067,
    -0.015829105256349306,
    -0.2840155429615469,
    0.0004724845739132828,
    0.12874742662047847,
    -0.017369301001807547,
    -0.044088253930794755,
    0.013981027917398282,
    0.008746094047405777,
    -0.004870352993451574,
    -0.00039174037337694705,
    0.0006754494064505693,
    -0.00011747678412476953,
];
const DB9: [f64; 18] = [
    0.038077947363878345,
    0.24383467461259034,
    0.6048231236901112,
    0.6572880780513005,
    0.13319738582500756,
    -0.2932737832791749,
    -0.09684078322297646,
    0.14854074933810638,
    0.03072568147933338,
    -0.06763282906132997,
    0.00025094711483145197,
    0.022361662123679096,
    -0.004723204757751397,
    -0.00428150368246343,
    0.0018476468830562265,
    0.00023038576352319597,
    -0.0002519631889427101,
    3.93473203162716e-05,
];
const DB10: [f64; 20] = [
    0.026670057900555554,
    0.1881768000776915,
    0.5272011889317256,
    0.6884590394536035,
    0.2811723436605775,
    -0.24984642432731538,
    -0.19594627437737705,
    0.12736934033579325,
    0.09305736460357235,
    -0.07139414716639708,
    -0.029457536821875813,
    0.033212674059341,
    0.0036065535669561697,
    -0.010733175483330575,
    0.001395351747052901,
    0.001992405295185056,
    -0.0006858566949597116,
    -0.00011646685512928545,
    9.358867032006959e-05,
    -1.3264202894521244e-05,
];
