use crate::error::{Error, Result};
use crate::mechanism::NoiseDistribution;

/// Largest support the convolution routines will build.
pub const MAX_SUPPORT: usize = 1_000_000;

/// Tolerance on total mass after convolution.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// A pmf on the consecutive integers `offset, offset + 1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf {
    pub offset: i64,
    pub masses: Vec<f64>,
}

impl Pmf {
    pub fn point(x: i64) -> Self {
        Self {
            offset: x,
            masses: vec![1.0],
        }
    }

    pub fn uniform(r: u32) -> Self {
        let w = 2 * r as usize + 1;
        Self {
            offset: -i64::from(r),
            masses: vec![1.0 / w as f64; w],
        }
    }

    /// Dense form of a noise distribution (gaps filled with zeros).
    pub fn from_distribution(d: &NoiseDistribution) -> Self {
        let lo = d.support()[0];
        let hi = *d.support().last().unwrap();
        let mut masses = vec![0.0; (hi - lo + 1) as usize];
        for (&e, &p) in d.support().iter().zip(d.pmf()) {
            masses[(e - lo) as usize] = p;
        }
        Self { offset: lo, masses }
    }

    pub fn min(&self) -> i64 {
        self.offset
    }

    pub fn max(&self) -> i64 {
        self.offset + self.masses.len() as i64 - 1
    }

    pub fn prob(&self, x: i64) -> f64 {
        if x < self.offset {
            return 0.0;
        }
        self.masses
            .get((x - self.offset) as usize)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, p)| (self.offset + i as i64) as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.masses
            .iter()
            .enumerate()
            .map(|(i, p)| ((self.offset + i as i64) as f64 - m).powi(2) * p)
            .sum()
    }

    /// `Pr(|X| < bound)`, strict.
    pub fn mass_strictly_within(&self, bound: f64) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .filter(|(i, _)| (((self.offset + *i as i64) as f64).abs()) < bound)
            .map(|(_, p)| p)
            .sum()
    }

    /// Direct convolution: the pmf of `X + Y` for independent `X`, `Y`.
    pub fn convolve(&self, other: &Pmf) -> Result<Pmf> {
        let len = self.masses.len() + other.masses.len() - 1;
        if len > MAX_SUPPORT {
            return Err(Error::param(format!(
                "convolution support {len} exceeds {MAX_SUPPORT}"
            )));
        }
        let mut out = vec![0.0; len];
        for (i, &a) in self.masses.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &b) in out[i..].iter_mut().zip(&other.masses) {
                *o += a * b;
            }
        }
        let pmf = Pmf {
            offset: self.offset + other.offset,
            masses: out,
        };
        pmf.check_mass()?;
        Ok(pmf)
    }

    /// Distribution of the sum of `count` independent copies.
    pub fn convolution_power(&self, count: usize) -> Result<Pmf> {
        if count == 0 {
            return Err(Error::param("convolution power needs count >= 1"));
        }
        let mut acc = self.clone();
        for _ in 1..count {
            acc = acc.convolve(self)?;
        }
        Ok(acc)
    }

    fn check_mass(&self) -> Result<()> {
        let t = self.total();
        if (t - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Invariant(format!("pmf mass drifted to {t}")));
        }
        Ok(())
    }
}

/// Pmfs of `X_1, X_2, ...` where `X_n` is a sum of `n` independent uniforms on
/// `-r..=r`. Each step is a sliding-window sum, O(support).
///
/// `X_n` is symmetric and unimodal, so only the left half is computed, left
/// to right: the window sum then grows monotonically and small tail masses
/// keep their relative accuracy.
#[derive(Clone, Debug)]
pub struct UniformSumSeries {
    r: usize,
    count: usize,
    masses: Vec<f64>,
}

impl UniformSumSeries {
    pub fn new(r: u32) -> Self {
        Self {
            r: r as usize,
            count: 0,
            masses: vec![1.0],
        }
    }

    /// Number of summands in the current pmf.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn step(&mut self) -> Result<()> {
        let r = self.r;
        let old = &self.masses;
        let len = old.len() + 2 * r;
        if len > MAX_SUPPORT {
            return Err(Error::param(format!(
                "convolution support {len} exceeds {MAX_SUPPORT}"
            )));
        }
        let w = 1.0 / (2 * r + 1) as f64;
        let mid = len / 2;
        let mut out = vec![0.0; len];
        // out[i] = w * sum_{j = i - 2r}^{i} old[j]
        let mut window = 0.0;
        for i in 0..=mid {
            if i < old.len() {
                window += old[i];
            }
            if i > 2 * r {
                window -= old[i - 2 * r - 1];
            }
            out[i] = window.max(0.0) * w;
        }
        for i in mid + 1..len {
            out[i] = out[len - 1 - i];
        }
        self.masses = out;
        self.count += 1;
        Ok(())
    }

    pub fn pmf(&self) -> Pmf {
        Pmf {
            offset: -((self.count * self.r) as i64),
            masses: self.masses.clone(),
        }
    }

    /// `Pr(|X_n| < bound)` without materialising a `Pmf`.
    pub fn mass_strictly_within(&self, bound: f64) -> f64 {
        let c = (self.count * self.r) as i64;
        let mid = c as usize;
        // Integers x with |x| < bound.
        let reach = if bound.fract() == 0.0 {
            bound as i64 - 1
        } else {
            bound.floor() as i64
        };
        if reach < 0 {
            return 0.0;
        }
        let reach = reach.min(c) as usize;
        self.masses[mid - reach..=mid + reach].iter().sum()
    }
}

/// Pmf of the sum of `count` independent uniforms on `-r..=r`.
pub fn convolve_uniform_sum(r: u32, count: usize) -> Result<Pmf> {
    if r == 0 || count == 0 {
        return Err(Error::param(
            "convolve_uniform_sum needs r >= 1 and count >= 1",
        ));
    }
    let len = count
        .checked_mul(2 * r as usize)
        .and_then(|v| v.checked_add(1))
        .unwrap_or(usize::MAX);
    if len > MAX_SUPPORT {
        return Err(Error::param(format!(
            "support of {len} points exceeds {MAX_SUPPORT}"
        )));
    }
    let mut s = UniformSumSeries::new(r);
    for _ in 0..count {
        s.step()?;
    }
    let pmf = s.pmf();
    pmf.check_mass()?;
    Ok(pmf)
}
