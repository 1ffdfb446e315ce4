use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A function on `[0, 1]` sampled at the dyadic points `i * 2^-level`,
/// `i = 0..=2^level`, read back by linear interpolation and taken to be zero
/// outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    level: u32,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(level: u32, values: Vec<f64>) -> Result<Self> {
        if level > 26 {
            return Err(Error::Config(format!("grid level {level} exceeds 26")));
        }
        let expected = (1usize << level) + 1;
        if values.len() != expected {
            return Err(Error::Config(format!(
                "grid level {level} needs {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("grid values must be finite".into()));
        }
        Ok(Self { level, values })
    }

    pub fn from_fn(level: u32, f: impl Fn(f64) -> f64) -> Self {
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let values = (0..=n).map(|i| f(i as f64 * h)).collect();
        Self { level, values }
    }

    pub fn constant(level: u32, c: f64) -> Self {
        Self::from_fn(level, |_| c)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn abscissa(&self, i: usize) -> f64 {
        i as f64 * self.step()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let n = (1usize << self.level) as f64;
        let pos = x * n;
        let i = pos.floor() as usize;
        if i >= self.values.len() - 1 {
            return self.values[self.values.len() - 1];
        }
        let w = pos - i as f64;
        if w == 0.0 {
            self.values[i]
        } else {
            (1.0 - w) * self.values[i] + w * self.values[i + 1]
        }
    }

    /// Composite trapezoid rule over `[0, 1]`.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    /// `∫_0^1 |self - other|^r` by the trapezoid rule on the finer of the two grids.
    pub fn lr_distance(&self, other: &DensityGrid, r: f64) -> f64 {
        let level = self.level.max(other.level);
        let diff = DensityGrid::from_fn(level, |x| (self.eval(x) - other.eval(x)).abs().powf(r));
        diff.integral()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DensityGrid) -> f64 {
        let level = self.level.max(other.level);
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        (0..=n)
            .map(|i| {
                let x = i as f64 * h;
                (self.eval(x) - other.eval(x)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { level: self.level, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,f")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.abscissa(i), v)?;
        }
        Ok(())
    }
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}
