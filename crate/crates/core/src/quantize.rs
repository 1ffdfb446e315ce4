//! Dyadic binning, per-bin wavelet index sets and the unbiased ℓ1-polytope
//! vertex quantizer.
//!
//! A player holding `x ∈ [0, 1]` at level `J` sends its bin `t` together with a
//! random vertex `±(B d) e_i` of the ℓ1 ball of radius `B d` whose mean is the
//! vector of wavelet values `(g(2^J x − k))_k` over the bin's index set. The
//! pair is a symbol of a finite alphabet with bin-major layout:
//! `index = bin · 2d + vertex`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;
use crate::wavelet::{WaveletKind, WaveletTable};
use crate::{Error, Result};

/// Bin `t` with `x ∈ [t 2^-J, (t+1) 2^-J)`; the last bin is closed so `x = 1`
/// maps to `2^J − 1`.
pub fn bin_of(x: f64, level: u32) -> Result<u64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("sample {x} outside [0, 1]")));
    }
    let bins = 1u64 << level;
    Ok(((x * bins as f64).floor() as u64).min(bins - 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSets {
    pub level: u32,
    pub bin: u64,
    /// Father translations whose support meets the bin, ascending.
    pub a_set: Vec<i64>,
    /// Mother translations whose support meets the bin, ascending.
    pub b_set: Vec<i64>,
}

/// Translations `k` with `E_t ∩ supp g_{J,k} ≠ ∅`, supports taken as the open
/// interval `(k + lo, k + hi)` in units of `2^-J` (the functions vanish at the
/// endpoints).
pub fn index_sets(table: &WaveletTable, level: u32, bin: u64) -> IndexSets {
    let (lo, hi) = table.support();
    let t = bin as i64;
    // k + lo < t + 1 and k + hi > t.
    let ks: Vec<i64> = (t - hi + 1..=t - lo).collect();
    IndexSets { level, bin, a_set: ks.clone(), b_set: ks }
}

/// Claim-style bound `2(A + 2)` on either index set.
pub fn sparsity_bound(table: &WaveletTable) -> usize {
    2 * (table.support_radius() as usize + 2)
}

/// One vertex `±(B d) e_{i+1}` of the ℓ1 ball: code `2i` is `+`, `2i + 1` is `−`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexCode(pub u32);

impl VertexCode {
    pub fn coordinate(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn sign(self) -> f64 {
        if self.0 % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Randomised rounding of `x` (with `‖x‖_∞ ≤ B`) to a vertex of the ℓ1 ball of
/// radius `B d`, unbiased: vertex `sign(x_i) B d e_i` gets mass `|x_i| / (B d)`,
/// and the leftover `1 − ‖x‖_1 / (B d)` is split evenly over `±B d e_1`.
pub fn vertex_quantize(x: &[f64], bound: f64, rng: &mut RandomStream) -> Result<VertexCode> {
    let d = x.len();
    if d == 0 {
        return Err(Error::Domain("cannot quantize an empty vector".into()));
    }
    if !(bound > 0.0) {
        return Err(Error::Domain(format!("quantizer bound {bound} must be positive")));
    }
    if let Some(v) = x.iter().find(|v| !(v.abs() <= bound)) {
        return Err(Error::Domain(format!("entry {v} exceeds the quantizer bound {bound}")));
    }
    let radius = bound * d as f64;
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    let leftover = (1.0 - l1 / radius).max(0.0);
    let mut u = rng.random::<f64>();

    // Leftover pair first, then the coordinates in order.
    let half = 0.5 * leftover;
    if u < half {
        return Ok(VertexCode(0));
    }
    u -= half;
    if u < half {
        return Ok(VertexCode(1));
    }
    u -= half;
    let mut last_nonzero = None;
    for (i, &v) in x.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let code = VertexCode(2 * i as u32 + if v > 0.0 { 0 } else { 1 });
        let mass = v.abs() / radius;
        if u < mass {
            return Ok(code);
        }
        u -= mass;
        last_nonzero = Some(code);
    }
    // Rounding slack: fall back to the last vertex with positive mass.
    Ok(last_nonzero.unwrap_or(VertexCode(0)))
}

pub fn decode(code: VertexCode, bound: f64, d: usize) -> Result<Vec<f64>> {
    if code.coordinate() >= d {
        return Err(Error::Domain(format!("vertex code {} out of range for d = {d}", code.0)));
    }
    let mut v = vec![0.0; d];
    v[code.coordinate()] = code.sign() * bound * d as f64;
    Ok(v)
}

/// Which coefficients a player's vector carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    /// Father values at the level (single-level estimator).
    Single,
    /// Mother values at the level (multi-level groups above the base).
    Detail,
    /// Father values followed by mother values (multi-level base group).
    Base,
}

impl GroupKind {
    /// Fixed vector length: `2(A+2)` per kind of value carried.
    pub fn dimension(self, table: &WaveletTable) -> usize {
        match self {
            GroupKind::Single | GroupKind::Detail => sparsity_bound(table),
            GroupKind::Base => 2 * sparsity_bound(table),
        }
    }
}

/// `2^J · 2 d_kind`.
pub fn alphabet_size(table: &WaveletTable, level: u32, kind: GroupKind) -> u64 {
    (1u64 << level) * 2 * kind.dimension(table) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedSample {
    pub level: u32,
    pub bin: u64,
    pub vertex: VertexCode,
    pub kind: GroupKind,
}

impl QuantizedSample {
    pub fn symbol(&self, table: &WaveletTable) -> u64 {
        self.bin * 2 * self.kind.dimension(table) as u64 + self.vertex.0 as u64
    }

    pub fn from_symbol(symbol: u64, table: &WaveletTable, level: u32, kind: GroupKind) -> Result<Self> {
        let size = alphabet_size(table, level, kind);
        if symbol >= size {
            return Err(Error::Domain(format!("symbol {symbol} outside alphabet of size {size}")));
        }
        let per_bin = 2 * kind.dimension(table) as u64;
        Ok(Self { level, bin: symbol / per_bin, vertex: VertexCode((symbol % per_bin) as u32), kind })
    }
}

/// The unquantized, zero-padded vector `V` a player at `x` would send.
///
/// Entries are the unscaled table values `g(2^J x − k)`, i.e. `2^{-J/2} g_{J,k}(x)`.
pub fn player_vector(x: f64, level: u32, kind: GroupKind, table: &WaveletTable) -> Result<(u64, Vec<f64>)> {
    let bin = bin_of(x, level)?;
    let sets = index_sets(table, level, bin);
    let half = sparsity_bound(table);
    let mut v = vec![0.0; kind.dimension(table)];
    let fill = |v: &mut [f64], ks: &[i64], wk: WaveletKind| {
        for (slot, &k) in v.iter_mut().zip(ks) {
            *slot = table.value(wk, x * (1u64 << level) as f64 - k as f64);
        }
    };
    match kind {
        GroupKind::Single => fill(&mut v, &sets.a_set, WaveletKind::Father),
        GroupKind::Detail => fill(&mut v, &sets.b_set, WaveletKind::Mother),
        GroupKind::Base => {
            let (father, mother) = v.split_at_mut(half);
            fill(father, &sets.a_set, WaveletKind::Father);
            fill(mother, &sets.b_set, WaveletKind::Mother);
        }
    }
    Ok((bin, v))
}

/// Bin plus quantized vertex for a sample, with `B = max(sup|φ|, sup|ψ|)`.
pub fn encode_sample(
    x: f64,
    level: u32,
    kind: GroupKind,
    table: &WaveletTable,
    rng: &mut RandomStream,
) -> Result<QuantizedSample> {
    let (bin, v) = player_vector(x, level, kind, table)?;
    let vertex = vertex_quantize(&v, table.sup_bound(), rng)?;
    Ok(QuantizedSample { level, bin, vertex, kind })
}

/// Coefficient contributions `(wavelet kind, k, value)` carried by a vector for
/// a bin; padded slots are dropped. Values are still in the unscaled units of
/// [`player_vector`].
pub fn unpack(
    bin: u64,
    level: u32,
    kind: GroupKind,
    v: &[f64],
    table: &WaveletTable,
) -> Vec<(WaveletKind, i64, f64)> {
    let sets = index_sets(table, level, bin);
    let half = sparsity_bound(table);
    let mut out = Vec::new();
    let mut take = |slice: &[f64], ks: &[i64], wk: WaveletKind| {
        for (&value, &k) in slice.iter().zip(ks) {
            if value != 0.0 {
                out.push((wk, k, value));
            }
        }
    };
    match kind {
        GroupKind::Single => take(v, &sets.a_set, WaveletKind::Father),
        GroupKind::Detail => take(v, &sets.b_set, WaveletKind::Mother),
        GroupKind::Base => {
            take(&v[..half], &sets.a_set, WaveletKind::Father);
            take(&v[half..], &sets.b_set, WaveletKind::Mother);
        }
    }
    out
}

/// The single nonzero coefficient a quantized sample contributes, if it lands on
/// a real (non-padded) slot.
pub fn decode_sample(sample: &QuantizedSample, table: &WaveletTable) -> Option<(WaveletKind, i64, f64)> {
    let d = sample.kind.dimension(table);
    let half = sparsity_bound(table);
    let coordinate = sample.vertex.coordinate();
    let value = sample.vertex.sign() * table.sup_bound() * d as f64;
    let sets = index_sets(table, sample.level, sample.bin);
    let (wk, ks, slot) = match sample.kind {
        GroupKind::Single => (WaveletKind::Father, &sets.a_set, coordinate),
        GroupKind::Detail => (WaveletKind::Mother, &sets.b_set, coordinate),
        GroupKind::Base if coordinate < half => (WaveletKind::Father, &sets.a_set, coordinate),
        GroupKind::Base => (WaveletKind::Mother, &sets.b_set, coordinate - half),
    };
    ks.get(slot).map(|&k| (wk, k, value))
}
