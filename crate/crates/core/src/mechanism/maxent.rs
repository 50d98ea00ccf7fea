//! Maximum-entropy zero-mean noise on a finite integer support.
//!
//! The optimum has the exponential-family form `p(e) ∝ exp(λ₁e − λ₂e²)` with
//! `λ₂ ≥ 0` and `λ₂ > 0` only when the variance constraint is active. We solve
//! the convex dual by Newton's method.

use crate::error::{Error, Result};
use crate::mechanism::distribution::NoiseDistribution;

/// Convergence target on the KKT residuals (mean and, when active, variance).
pub const KKT_TOLERANCE: f64 = 1e-9;

const NEWTON_TOL: f64 = 1e-13;
const MAX_ITER: usize = 500;

struct Moments {
    pmf: Vec<f64>,
    /// log of the normaliser
    log_z: f64,
    m1: f64,
    m2: f64,
    var1: f64,
    cov12: f64,
    var2: f64,
}

fn moments(xs: &[f64], l1: f64, l2: f64) -> Moments {
    let w: Vec<f64> = xs.iter().map(|&x| l1 * x - l2 * x * x).collect();
    let top = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pmf: Vec<f64> = w.iter().map(|&v| (v - top).exp()).collect();
    let z: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= z);
    let (mut m1, mut m2) = (0.0, 0.0);
    for (&p, &x) in pmf.iter().zip(xs) {
        m1 += p * x;
        m2 += p * x * x;
    }
    let (mut var1, mut cov12, mut var2) = (0.0, 0.0, 0.0);
    for (&p, &x) in pmf.iter().zip(xs) {
        let d1 = x - m1;
        let d2 = x * x - m2;
        var1 += p * d1 * d1;
        cov12 += p * d1 * d2;
        var2 += p * d2 * d2;
    }
    Moments {
        pmf,
        log_z: top + z.ln(),
        m1,
        m2,
        var1,
        cov12,
        var2,
    }
}

fn point_mass(support: &[i64], at: i64) -> Result<NoiseDistribution> {
    let pmf = support
        .iter()
        .map(|&e| if e == at { 1.0 } else { 0.0 })
        .collect();
    NoiseDistribution::from_pmf(support.to_vec(), pmf)
}

/// Entropy-maximising pmf on `support` with mean 0 and variance at most
/// `variance_bound`.
pub fn solve_max_entropy(support: &[i64], variance_bound: f64) -> Result<NoiseDistribution> {
    let v = variance_bound;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Infeasible(format!(
            "variance bound {v} must be finite and >= 0"
        )));
    }
    if support.is_empty() {
        return Err(Error::Infeasible("empty support".into()));
    }
    let mut pts = support.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() != support.len() {
        return Err(Error::param("support points must be distinct"));
    }

    let has_zero = pts.binary_search(&0).is_ok();
    let nearest_neg = pts.iter().rev().find(|&&e| e < 0).copied();
    let nearest_pos = pts.iter().find(|&&e| e > 0).copied();
    let (a, b) = match (nearest_neg, nearest_pos) {
        (Some(a), Some(b)) => (-a, b),
        _ if has_zero => return point_mass(&pts, 0),
        _ => {
            return Err(Error::Infeasible(
                "mean 0 needs a point of each sign or 0 in the support".into(),
            ))
        }
    };
    if has_zero && v == 0.0 {
        return point_mass(&pts, 0);
    }
    // Without 0, E[(X+a)(X-b)] >= 0 gives Var >= ab, attained by {-a, b}.
    if !has_zero {
        let floor = (a * b) as f64;
        if v < floor * (1.0 - 1e-12) {
            return Err(Error::Infeasible(format!(
                "variance {v} below the minimum {floor} achievable with mean 0 on this support"
            )));
        }
        if v <= floor * (1.0 + 1e-12) {
            let total = (a + b) as f64;
            let pmf = pts
                .iter()
                .map(|&e| match e {
                    e if e == -a => b as f64 / total,
                    e if e == b => a as f64 / total,
                    _ => 0.0,
                })
                .collect();
            return NoiseDistribution::from_pmf(pts, pmf);
        }
    }

    let xs: Vec<f64> = pts.iter().map(|&e| e as f64).collect();
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    // Stage 1: variance constraint inactive, λ₂ = 0. The dual is
    // log Σ exp(λ₁x), strictly convex in λ₁; Newton with a bisection guard.
    let (mut lo, mut hi) = (-50.0 / scale.max(1.0), 50.0 / scale.max(1.0));
    while moments(&xs, lo, 0.0).m1 > 0.0 {
        lo *= 2.0;
    }
    while moments(&xs, hi, 0.0).m1 < 0.0 {
        hi *= 2.0;
    }
    let mut l1 = 0.0;
    for _ in 0..MAX_ITER {
        let m = moments(&xs, l1, 0.0);
        if m.m1.abs() < NEWTON_TOL * scale {
            break;
        }
        if m.m1 > 0.0 {
            hi = l1;
        } else {
            lo = l1;
        }
        let step = l1 - m.m1 / m.var1;
        l1 = if step > lo && step < hi && m.var1 > 0.0 {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    let m = moments(&xs, l1, 0.0);
    if m.m2 - m.m1 * m.m1 <= v * (1.0 + 1e-12) {
        return finish(pts, m.pmf, v);
    }

    // Stage 2: variance active. Minimise g(λ) = log Z(λ₁, λ₂) + λ₂v, whose
    // gradient is (E[x], v − E[x²]) and Hessian the covariance of (x, −x²).
    let mut l2 = 0.0f64;
    let g = |l1: f64, l2: f64| moments(&xs, l1, l2).log_z + l2 * v;
    for _ in 0..MAX_ITER {
        let m = moments(&xs, l1, l2);
        let g1 = m.m1;
        let g2 = v - m.m2;
        if g1.abs() < NEWTON_TOL * scale && g2.abs() < NEWTON_TOL * v.max(1.0) {
            break;
        }
        let (h11, h12, h22) = (m.var1, -m.cov12, m.var2);
        let det = h11 * h22 - h12 * h12;
        let (mut d1, mut d2) = if det > 1e-300 {
            ((-h22 * g1 + h12 * g2) / det, (h12 * g1 - h11 * g2) / det)
        } else {
            (-g1, -g2)
        };
        let slope = g1 * d1 + g2 * d2;
        if slope >= 0.0 {
            d1 = -g1;
            d2 = -g2;
        }
        let slope = g1 * d1 + g2 * d2;
        let here = m.log_z + l2 * v;
        let mut t = 1.0;
        while t > 1e-20 && g(l1 + t * d1, l2 + t * d2) > here + 1e-4 * t * slope {
            t *= 0.5;
        }
        l1 += t * d1;
        l2 += t * d2;
    }
    if l2 < -1e-9 {
        return Err(Error::Invariant(format!(
            "variance multiplier {l2} came out negative"
        )));
    }
    finish(pts, moments(&xs, l1, l2).pmf, v)
}

fn finish(support: Vec<i64>, mut pmf: Vec<f64>, v: f64) -> Result<NoiseDistribution> {
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    let mean: f64 = support.iter().zip(&pmf).map(|(&e, p)| e as f64 * p).sum();
    let m2: f64 = support
        .iter()
        .zip(&pmf)
        .map(|(&e, p)| (e as f64).powi(2) * p)
        .sum();
    if mean.abs() > KKT_TOLERANCE || m2 - mean * mean > v + KKT_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "solver did not converge (mean {mean:e}, variance {} vs bound {v})",
            m2 - mean * mean
        )));
    }
    // Remove the last rounding residue of the mean so the strict pmf check
    // passes; the shift is far below the KKT tolerance.
    if mean.abs() > 1e-14 {
        let (neg, pos): (f64, f64) = support.iter().zip(&pmf).fold((0.0, 0.0), |acc, (&e, p)| {
            if e < 0 {
                (acc.0 - e as f64 * p, acc.1)
            } else {
                (acc.0, acc.1 + e as f64 * p)
            }
        });
        let f = if mean > 0.0 { neg / pos } else { pos / neg };
        for (&e, p) in support.iter().zip(pmf.iter_mut()) {
            if (mean > 0.0 && e > 0) || (mean < 0.0 && e < 0) {
                *p *= f;
            }
        }
        let total: f64 = pmf.iter().sum();
        let zero = support.binary_search(&0).ok();
        match zero {
            Some(i) => pmf[i] += 1.0 - total,
            None => pmf.iter_mut().for_each(|p| *p /= total),
        }
    }
    NoiseDistribution::from_pmf(support, pmf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(r: i64) -> Vec<i64> {
        (-r..=r).collect()
    }

    #[test]
    fn uniform_when_variance_is_loose() {
        for r in 1..=10 {
            let v = (r * (r + 1)) as f64 / 3.0;
            let d = solve_max_entropy(&sym(r), v).unwrap();
            let u = 1.0 / (2 * r + 1) as f64;
            assert!(d.pmf().iter().all(|p| (p - u).abs() < 1e-9), "r={r}");
            let d = solve_max_entropy(&sym(r), 10.0 * v).unwrap();
            assert!(d.pmf().iter().all(|p| (p - u).abs() < 1e-9));
        }
    }

    #[test]
    fn three_point_half_variance() {
        let d = solve_max_entropy(&[-1, 0, 1], 0.5).unwrap();
        for (p, want) in d.pmf().iter().zip([0.25, 0.5, 0.25]) {
            assert!((p - want).abs() < 1e-9);
        }
    }

    #[test]
    fn active_variance_is_tight_and_symmetric() {
        let d = solve_max_entropy(&sym(5), 2.0).unwrap();
        assert!((d.variance() - 2.0).abs() < 1e-9);
        for e in 1..=5 {
            assert!((d.prob(e) - d.prob(-e)).abs() < 1e-9);
        }
        // Gibbs form: log-probabilities are quadratic in e.
        let lp: Vec<f64> = (0..=3).map(|e| d.prob(e).ln()).collect();
        let second = lp[2] - 2.0 * lp[1] + lp[0];
        assert!((lp[3] - 2.0 * lp[2] + lp[1] - second).abs() < 1e-6);
        assert!(d.entropy() < NoiseDistribution::uniform(5).entropy());
    }

    #[test]
    fn asymmetric_support() {
        let d = solve_max_entropy(&[-3, -1, 0, 2, 5], 2.5).unwrap();
        assert!(d.mean().abs() < 1e-9);
        assert!(d.variance() <= 2.5 + 1e-9);
        let d = solve_max_entropy(&[-2, 3], 6.0).unwrap();
        assert!((d.prob(-2) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_infeasible() {
        let d = solve_max_entropy(&sym(4), 0.0).unwrap();
        assert_eq!(d.prob(0), 1.0);
        assert_eq!(solve_max_entropy(&[0], 3.0).unwrap().prob(0), 1.0);
        assert!(matches!(
            solve_max_entropy(&sym(2), -1.0),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            solve_max_entropy(&[1, 2], 1.0),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            solve_max_entropy(&[-2, 3], 5.0),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            solve_max_entropy(&[-1, 1], 0.0),
            Err(Error::Infeasible(_))
        ));
    }
}
