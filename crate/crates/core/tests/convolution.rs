use bounded_noise::analysis::{
    chebyshev_lower_bound, convolve_uniform_sum, noise_remover_exact_success,
    noise_remover_success_curve, noise_remover_success_for, Pmf,
};
use bounded_noise::mechanism::{solve_max_entropy, NoiseDistribution};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// Number of ways `count` draws from `-r..=r` sum to each value, exactly.
fn ways(r: u32, count: usize) -> Vec<BigUint> {
    let width = 2 * r as usize + 1;
    let mut cur = vec![BigUint::from(1u32)];
    for _ in 0..count {
        let mut next = vec![BigUint::zero(); cur.len() + width - 1];
        for (i, c) in cur.iter().enumerate() {
            for slot in &mut next[i..i + width] {
                *slot += c;
            }
        }
        cur = next;
    }
    cur
}

/// `Pr(|X_2k| < k/2)` as an exact ratio, converted at the end.
fn exact_success(r: u32, k: usize) -> f64 {
    let w = ways(r, 2 * k);
    let offset = (2 * k * r as usize) as i64;
    let hit: BigUint = w
        .iter()
        .enumerate()
        .filter(|(i, _)| 2 * (*i as i64 - offset).abs() < k as i64)
        .map(|(_, c)| c.clone())
        .sum();
    let total = BigUint::from(2 * r + 1).pow(2 * k as u32);
    // scale before dividing so the ratio keeps ~60 significant bits
    let scale = BigUint::from(1u64) << 60u32;
    (hit * scale / total).to_f64().unwrap() / 2f64.powi(60)
}

#[test]
fn convolution_matches_exact_rational_counts() {
    for r in [1u32, 2, 3, 5] {
        for k in [1usize, 2, 3, 7, 16, 33, 64] {
            let got = noise_remover_exact_success(r, k as u64).unwrap();
            let want = exact_success(r, k);
            assert!((got - want).abs() < 1e-12, "r={r} k={k}: {got} vs {want}");
        }
    }
}

#[test]
fn full_pmf_matches_exact_counts() {
    let (r, count) = (2u32, 24usize);
    let pmf = convolve_uniform_sum(r, count).unwrap();
    let w = ways(r, count);
    let total = BigUint::from(2 * r + 1).pow(count as u32).to_f64().unwrap();
    for (i, c) in w.iter().enumerate() {
        let x = i as i64 - (count as i64 * r as i64);
        let want = c.to_f64().unwrap() / total;
        assert!((pmf.prob(x) - want).abs() < 1e-15, "x={x}");
    }
}

#[test]
fn chebyshev_never_exceeds_exact() {
    for r in 1..=10u32 {
        let curve = noise_remover_success_curve(r, 600).unwrap();
        for (i, &p) in curve.iter().enumerate() {
            let k = i as u64 + 1;
            assert!(chebyshev_lower_bound(r, k) <= p + 1e-12, "r={r} k={k}");
        }
    }
}

#[test]
fn sum_has_zero_mean_and_additive_variance() {
    for r in [1u32, 2, 5, 10] {
        for count in [1usize, 2, 10, 100, 400] {
            let pmf = convolve_uniform_sum(r, count).unwrap();
            let var = count as f64 * f64::from(r) * f64::from(r + 1) / 3.0;
            assert!(pmf.mean().abs() < 1e-9);
            assert!(
                (pmf.variance() - var).abs() < 1e-8 * var.max(1.0),
                "r={r} count={count}"
            );
            assert!((pmf.total() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn curve_agrees_with_pointwise_values() {
    let curve = noise_remover_success_curve(3, 200).unwrap();
    for k in [1u64, 50, 127, 200] {
        let p = noise_remover_exact_success(3, k).unwrap();
        assert!((curve[k as usize - 1] - p).abs() < 1e-12);
    }
}

#[test]
fn generic_convolution_agrees_with_uniform_fast_path() {
    let d = NoiseDistribution::uniform(2);
    for k in [1u64, 10, 100] {
        let a = noise_remover_success_for(&d, k).unwrap();
        let b = noise_remover_exact_success(2, k).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
    // max-entropy with the uniform variance is the uniform law again
    let support: Vec<i64> = (-2..=2).collect();
    let me = solve_max_entropy(&support, 2.0).unwrap();
    let p = Pmf::from_distribution(&me);
    for x in -2..=2 {
        assert!((p.prob(x) - 0.2).abs() < 1e-9);
    }
}

#[test]
fn tighter_variance_means_better_attack_odds() {
    let support: Vec<i64> = (-3..=3).collect();
    let wide = solve_max_entropy(&support, 4.0).unwrap();
    let narrow = solve_max_entropy(&support, 1.0).unwrap();
    let k = 20;
    assert!(
        noise_remover_success_for(&narrow, k).unwrap()
            > noise_remover_success_for(&wide, k).unwrap()
    );
}

#[test]
fn success_grows_within_each_parity_of_k() {
    for r in 1..=5u32 {
        let curve = noise_remover_success_curve(r, 400).unwrap();
        for k in 0..curve.len() - 2 {
            assert!(curve[k + 2] >= curve[k] - 1e-12, "r={r} k={}", k + 1);
        }
    }
    // but not from one k to the next
    let curve = noise_remover_success_curve(2, 10).unwrap();
    assert!(curve[1] < curve[0]);
}
