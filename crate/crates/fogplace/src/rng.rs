//! Seeded randomness helpers.
//!
//! Every random draw in the crate flows from a single 64-bit master seed that
//! is split deterministically per stage and per index, so reruns with the same
//! seed are bitwise reproducible regardless of call order elsewhere.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 mixing step; a well-distributed 64-bit permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a 64-bit hash of a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a stage seed from the master seed and a stage label.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    splitmix64(master ^ fnv1a(stage.as_bytes()))
}

/// Derive a per-index seed within a stage (e.g. per region, per slot).
pub fn indexed_seed(master: u64, stage: &str, index: u64) -> u64 {
    splitmix64(stage_seed(master, stage) ^ splitmix64(index))
}

/// Deterministic RNG for a seed. ChaCha8 keeps the stream identical across
/// platforms and rand versions.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw via Box-Muller from two uniform draws.
pub fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Natural log of n! via Stirling's series for large n, exact summation below 16.
fn ln_factorial(n: u64) -> f64 {
    if n < 16 {
        let mut acc = 0.0;
        for k in 2..=n {
            acc += (k as f64).ln();
        }
        return acc;
    }
    let x = n as f64 + 1.0;
    // Stirling series for ln Gamma(x)
    (x - 0.5) * x.ln() - x + 0.5 * (std::f64::consts::TAU).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Quantile of the Binomial(n, p) distribution evaluated at `u` in [0, 1].
///
/// Walks the CDF outward from the mode so probabilities never underflow.
/// Because the binomial CDF is pointwise decreasing in `p`, the returned
/// quantile is non-decreasing in `p` for a fixed `u`; sampling with a shared
/// uniform therefore couples draws monotonically across reliability levels.
pub fn binomial_quantile(u: f64, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let pmf_at =
        |k: u64| -> f64 { (ln_choose(n, k) + k as f64 * ln_p + (n - k) as f64 * ln_q).exp() };
    let mode = ((n as f64 + 1.0) * p).floor().min(n as f64) as u64;

    // Total mass at or below k, accumulated by expanding [lo, hi] around the mode.
    let mut lo = mode;
    let mut hi = mode;
    let mut pmf_lo = pmf_at(mode);
    let mut pmf_hi = pmf_lo;
    let mut inside = pmf_lo; // mass of [lo, hi]
    let mut below = {
        // CDF(mode - 1) computed by walking down; cheap because the tail decays fast.
        let mut acc = 0.0;
        let mut k = mode;
        let mut pmf = pmf_lo;
        while k > 0 {
            pmf *= (k as f64) * (1.0 - p) / ((n - k + 1) as f64 * p);
            if pmf <= 0.0 {
                break;
            }
            acc += pmf;
            k -= 1;
        }
        acc
    };

    // below + inside = CDF(hi). Expand until it covers u.
    loop {
        let cdf_hi = below + inside;
        if cdf_hi >= u || (lo == 0 && hi == n) {
            break;
        }
        // Prefer expanding the side with more remaining mass nearby.
        let next_hi = if hi < n {
            pmf_hi * ((n - hi) as f64) * p / ((hi + 1) as f64 * (1.0 - p))
        } else {
            0.0
        };
        if hi < n && (lo == 0 || next_hi >= pmf_lo) {
            hi += 1;
            pmf_hi = next_hi;
            inside += pmf_hi;
        } else if lo > 0 {
            pmf_lo *= (lo as f64) * (1.0 - p) / ((n - lo + 1) as f64 * p);
            lo -= 1;
            inside += pmf_lo;
            below -= pmf_lo;
        }
    }

    // Quantile: smallest k with CDF(k) >= u.
    if u > below {
        // It lies at or above lo; walk upward.
        let mut cdf = below;
        let mut k = lo;
        let mut pmf = pmf_lo;
        loop {
            cdf += pmf;
            if cdf >= u || k >= n {
                return k;
            }
            pmf *= ((n - k) as f64) * p / ((k + 1) as f64 * (1.0 - p));
            k += 1;
        }
    }
    // It lies below lo (so lo >= 1 since below >= u > 0); walk downward
    // maintaining cdf = CDF(k).
    if u <= 0.0 || lo == 0 {
        return 0;
    }
    let mut k = lo - 1;
    let mut pmf = pmf_lo * (lo as f64) * (1.0 - p) / ((n - lo + 1) as f64 * p);
    let mut cdf = below;
    while k > 0 {
        let lower = cdf - pmf;
        if lower < u {
            break;
        }
        cdf = lower;
        pmf *= (k as f64) * (1.0 - p) / ((n - k + 1) as f64 * p);
        k -= 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ_and_repeat() {
        assert_eq!(stage_seed(7, "topology"), stage_seed(7, "topology"));
        assert_ne!(stage_seed(7, "topology"), stage_seed(7, "workload"));
        assert_ne!(stage_seed(7, "topology"), stage_seed(8, "topology"));
    }

    #[test]
    fn normal_moments_reasonable() {
        let mut rng = rng_from_seed(42);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn binomial_quantile_edges() {
        assert_eq!(binomial_quantile(0.5, 0, 0.7), 0);
        assert_eq!(binomial_quantile(0.5, 10, 0.0), 0);
        assert_eq!(binomial_quantile(0.5, 10, 1.0), 10);
        // u = 1 returns n (all mass covered at n)
        assert_eq!(binomial_quantile(1.0, 5, 0.5), 5);
    }

    #[test]
    fn binomial_quantile_matches_direct_cdf_small() {
        // Exhaustive check against a directly computed CDF for small n.
        for &(n, p) in &[(5u64, 0.3f64), (12, 0.9), (8, 0.02)] {
            let mut pmf = vec![0.0; (n + 1) as usize];
            for (k, slot) in pmf.iter_mut().enumerate() {
                *slot = (ln_choose(n, k as u64)
                    + (k as f64) * p.ln()
                    + ((n - k as u64) as f64) * (1.0 - p).ln())
                .exp();
            }
            for i in 0..100 {
                let u = (i as f64 + 0.5) / 100.0;
                let mut cdf = 0.0;
                let mut expect = n;
                for k in 0..=n {
                    cdf += pmf[k as usize];
                    if cdf >= u {
                        expect = k;
                        break;
                    }
                }
                assert_eq!(binomial_quantile(u, n, p), expect, "n={n} p={p} u={u}");
            }
        }
    }

    #[test]
    fn binomial_quantile_monotone_in_p() {
        for i in 0..50 {
            let u = (i as f64 + 0.5) / 50.0;
            let mut prev = 0;
            for j in 0..=20 {
                let p = j as f64 / 20.0;
                let q = binomial_quantile(u, 1000, p);
                assert!(q >= prev, "u={u} p={p}: {q} < {prev}");
                prev = q;
            }
        }
    }

    #[test]
    fn binomial_quantile_large_n_high_p_no_underflow() {
        // Regime where pmf(0) underflows; the mode-anchored walk must survive.
        let q = binomial_quantile(0.5, 100_000, 0.999);
        assert!(q > 99_800 && q <= 100_000, "q={q}");
    }
}
