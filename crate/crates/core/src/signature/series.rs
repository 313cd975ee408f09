//! Elements of the truncated tensor algebra `T^{(n)}(ℝ^d)`.

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;
/// Largest supported truncation level.
pub const MAX_LEVEL: usize = 5;

/// A truncated tensor series `(a_0, a_1, …, a_n)` with `a_k ∈ (ℝ^d)^{⊗k}`
/// stored row-major, levels concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSeries {
    dim: usize,
    level: usize,
    data: Vec<f64>,
}

fn offset(dim: usize, k: usize) -> usize {
    (0..k).map(|i| dim.pow(i as u32)).sum()
}

pub(crate) fn check_caps(dim: usize, level: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "tensor dimension must lie in 1..={MAX_DIM}, got {dim}"
        )));
    }
    if level == 0 || level > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "truncation level must lie in 1..={MAX_LEVEL}, got {level}"
        )));
    }
    Ok(())
}

impl TensorSeries {
    pub fn zero(dim: usize, level: usize) -> Self {
        Self {
            dim,
            level,
            data: vec![0.0; offset(dim, level + 1)],
        }
    }

    /// `(1, 0, …, 0)`.
    pub fn unit(dim: usize, level: usize) -> Self {
        let mut s = Self::zero(dim, level);
        s.data[0] = 1.0;
        s
    }

    /// Builds a series from per-level flat arrays, level 0 first.
    pub fn from_levels(dim: usize, levels: &[Vec<f64>]) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Shape("a tensor series needs level 0".into()));
        }
        let level = levels.len() - 1;
        let mut data = Vec::with_capacity(offset(dim, level + 1));
        for (k, l) in levels.iter().enumerate() {
            let expected = dim.pow(k as u32);
            if l.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    got: l.len(),
                });
            }
            data.extend_from_slice(l);
        }
        Ok(Self { dim, level, data })
    }

    /// `exp(v) = Σ_k v^{⊗k} / k!`, the signature of a straight segment.
    pub fn exp_vector(v: &[f64], level: usize) -> Self {
        let dim = v.len();
        let mut s = Self::unit(dim, level);
        for k in 1..=level {
            let (prev, cur) = s.data.split_at_mut(offset(dim, k));
            let prev = &prev[offset(dim, k - 1)..];
            let cur = &mut cur[..dim.pow(k as u32)];
            for (a, p) in prev.iter().enumerate() {
                for (b, x) in v.iter().enumerate() {
                    cur[a * dim + b] = p * x / k as f64;
                }
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.data[offset(self.dim, k)..offset(self.dim, k + 1)]
    }

    pub fn get_mut(&mut self, k: usize) -> &mut [f64] {
        let (a, b) = (offset(self.dim, k), offset(self.dim, k + 1));
        &mut self.data[a..b]
    }

    pub fn levels(&self) -> Vec<Vec<f64>> {
        (0..=self.level).map(|k| self.get(k).to_vec()).collect()
    }

    /// Drops levels above `level`, or pads with zeros.
    pub fn truncated(&self, level: usize) -> Self {
        let mut s = Self::zero(self.dim, level);
        let n = offset(self.dim, level.min(self.level) + 1);
        s.data[..n].copy_from_slice(&self.data[..n]);
        s
    }

    /// Largest absolute difference over levels `1..=n`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .skip(1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry over levels `1..=n`.
    pub fn magnitude(&self) -> f64 {
        self.data
            .iter()
            .skip(1)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.level != other.level {
            return Err(Error::Shape(format!(
                "tensor series (d={}, n={}) and (d={}, n={}) do not match",
                self.dim, self.level, other.dim, other.level
            )));
        }
        Ok(())
    }

    /// Truncated logarithm `Σ_{j≥1} (-1)^{j+1} (a - 1)^j / j`; needs `a_0 = 1`.
    pub fn log(&self) -> Self {
        let mut x = self.clone();
        x.data[0] = 0.0;
        let mut out = Self::zero(self.dim, self.level);
        let mut power = x.clone();
        for j in 1..=self.level {
            let c = if j % 2 == 1 { 1.0 } else { -1.0 } / j as f64;
            for (o, p) in out.data.iter_mut().zip(&power.data) {
                *o += c * p;
            }
            power = mul_unchecked(&power, &x);
        }
        out
    }

    /// Truncated exponential of a series with `a_0 = 0`.
    pub fn exp(&self) -> Self {
        let mut out = Self::unit(self.dim, self.level);
        let mut term = Self::unit(self.dim, self.level);
        for j in 1..=self.level {
            term = mul_unchecked(&term, self);
            let inv = 1.0 / j as f64;
            term.data.iter_mut().for_each(|v| *v *= inv);
            for (o, t) in out.data.iter_mut().zip(&term.data) {
                *o += t;
            }
        }
        out
    }
}

pub(crate) fn mul_into(a: &TensorSeries, b: &TensorSeries, out: &mut TensorSeries) {
    let d = a.dim;
    out.data.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..=a.level {
        let dst = offset(d, k);
        for i in 0..=k {
            let j = k - i;
            let (ai, bj) = (a.get(i), b.get(j));
            let bw = bj.len();
            for (p, x) in ai.iter().enumerate() {
                if *x == 0.0 {
                    continue;
                }
                let row = &mut out.data[dst + p * bw..dst + (p + 1) * bw];
                for (o, y) in row.iter_mut().zip(bj) {
                    *o += x * y;
                }
            }
        }
    }
}

fn mul_unchecked(a: &TensorSeries, b: &TensorSeries) -> TensorSeries {
    let mut out = TensorSeries::zero(a.dim, a.level);
    mul_into(a, b, &mut out);
    out
}

/// Truncated tensor product: level `k` is `Σ_{i+j=k} a_i ⊗ b_j`.
pub fn chen_mul(a: &TensorSeries, b: &TensorSeries) -> Result<TensorSeries> {
    a.check_same(b)?;
    Ok(mul_unchecked(a, b))
}
