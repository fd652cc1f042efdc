use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    StableIn,
    Unstable,
    StableOut,
}

/// A threshold π held as an exact fraction num/den so that `count / K ≥ π` can be
/// decided in integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Threshold {
    num: u128,
    den: u128,
}

impl Threshold {
    /// Best rational approximation with denominator ≤ 1e6 when it is within 1e-12 of
    /// `pi`, otherwise the exact binary value of `pi`.
    pub(crate) fn new(pi: f64) -> Result<Self> {
        if !(pi > 0.5 && pi < 1.0) {
            return invalid(format!("threshold must lie in (0.5, 1), got {pi}"));
        }
        let (mut h0, mut h1) = (0u128, 1u128);
        let (mut k0, mut k1) = (1u128, 0u128);
        let mut x = pi;
        for _ in 0..64 {
            let a = x.floor();
            let (h2, k2) = (a as u128 * h1 + h0, a as u128 * k1 + k0);
            if k2 > 1_000_000 {
                break;
            }
            (h0, h1, k0, k1) = (h1, h2, k1, k2);
            if (h1 as f64 / k1 as f64 - pi).abs() <= 1e-12 {
                return Ok(Self { num: h1, den: k1 });
            }
            let frac = x - a;
            if frac == 0.0 {
                break;
            }
            x = 1.0 / frac;
        }
        // pi ∈ (0.5, 1) is m · 2⁻⁵³ for an integer m
        let scale = (1u64 << 53) as f64;
        Ok(Self { num: (pi * scale) as u128, den: 1u128 << 53 })
    }

    /// Smallest count classified stable-in: ⌈Kπ⌉.
    pub(crate) fn in_min(&self, k: usize) -> usize {
        (self.num * k as u128).div_ceil(self.den) as usize
    }

    /// Largest count classified stable-out: ⌊K(1 − π)⌋.
    pub(crate) fn out_max(&self, k: usize) -> usize {
        ((self.den - self.num) * k as u128 / self.den) as usize
    }

    pub(crate) fn category(&self, count: usize, k: usize) -> Category {
        if count >= self.in_min(k) {
            Category::StableIn
        } else if count <= self.out_max(k) {
            Category::StableOut
        } else {
            Category::Unstable
        }
    }
}

/// Log masses of Binomial(k, prob), with the degenerate cases exact.
pub(crate) fn binomial_log_pmf(k: usize, prob: f64) -> Vec<f64> {
    if prob <= 0.0 {
        return (0..=k).map(|h| if h == 0 { 0.0 } else { f64::NEG_INFINITY }).collect();
    }
    if prob >= 1.0 {
        return (0..=k).map(|h| if h == k { 0.0 } else { f64::NEG_INFINITY }).collect();
    }
    let (lp, lq) = (prob.ln(), (-prob).ln_1p());
    let lc = log_binomial_coefficients(k);
    (0..=k).map(|h| lc[h] + h as f64 * lp + (k - h) as f64 * lq).collect()
}

/// ln C(k, h) for h = 0..=k; exact integers up to k = 130 (C(130, 65) < 2¹²⁸).
fn log_binomial_coefficients(k: usize) -> Vec<f64> {
    if k <= 130 {
        let mut c: u128 = 1;
        let mut out = Vec::with_capacity(k + 1);
        for h in 0..=k {
            out.push((c as f64).ln());
            // C(k, h+1) = C(k, h)·(k−h)/(h+1) is exact in integers; split to avoid overflow
            let g = gcd(c, (h + 1) as u128);
            c = (c / g) * ((k - h) as u128 / ((h + 1) as u128 / g));
        }
        return out;
    }
    let lk = ln_gamma(k as f64 + 1.0);
    (0..=k).map(|h| lk - ln_gamma(h as f64 + 1.0) - ln_gamma((k - h) as f64 + 1.0)).collect()
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// log Σ exp over a slice (−∞ when empty).
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log null probabilities of (stable-in, unstable, stable-out) for one threshold.
pub(crate) fn category_log_probs(log_pmf: &[f64], t: &Threshold) -> [f64; 3] {
    let k = log_pmf.len() - 1;
    let (lo, hi) = (t.out_max(k), t.in_min(k));
    [log_sum_exp(&log_pmf[hi..]), log_sum_exp(&log_pmf[lo + 1..hi]), log_sum_exp(&log_pmf[..=lo])]
}

/// Score from category sizes; −∞ when an occupied category is impossible under the null.
pub(crate) fn score_from_counts(sizes: [usize; 3], log_probs: [f64; 3]) -> f64 {
    let mut total = 0.0;
    for (&n, &lp) in sizes.iter().zip(&log_probs) {
        if n > 0 {
            if lp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total -= n as f64 * lp;
        }
    }
    total
}

/// Category sizes from a histogram of counts (index = count, 0..=K).
pub(crate) fn category_sizes(hist: &[usize], t: &Threshold) -> [usize; 3] {
    let k = hist.len() - 1;
    let (lo, hi) = (t.out_max(k), t.in_min(k));
    let out: usize = hist[..=lo].iter().sum();
    let inn: usize = hist[hi..].iter().sum();
    let total: usize = hist.iter().sum();
    [inn, total - inn - out, out]
}

/// Stability score: minus the log-likelihood of the stable-in / unstable /
/// stable-out classification of the `counts` (out of `k`) at threshold `pi`, when every
/// one of the `counts.len()` features is selected with probability `q / N` in each draw.
/// Returns −∞ when some feature falls in a category of null probability zero.
pub fn stability_score(counts: &[u32], k: usize, q: f64, pi: f64) -> Result<f64> {
    let n = counts.len();
    if n == 0 {
        return invalid("no features");
    }
    if k == 0 {
        return invalid("K must be positive");
    }
    if !(q >= 0.0 && q <= n as f64) {
        return invalid(format!("average selection count {q} outside [0, {n}]"));
    }
    let t = Threshold::new(pi)?;
    let mut hist = vec![0usize; k + 1];
    for &c in counts {
        let c = c as usize;
        if c > k {
            return invalid(format!("count {c} exceeds K = {k}"));
        }
        hist[c] += 1;
    }
    let lp = binomial_log_pmf(k, q / n as f64);
    Ok(score_from_counts(category_sizes(&hist, &t), category_log_probs(&lp, &t)))
}

/// Category of every feature at threshold `pi`.
pub fn categorize(counts: &[u32], k: usize, pi: f64) -> Result<Vec<Category>> {
    let t = Threshold::new(pi)?;
    Ok(counts.iter().map(|&c| t.category(c as usize, k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_binomial_coefficients() {
        let lc = log_binomial_coefficients(10);
        assert_eq!(lc[3].exp().round(), 120.0);
        for k in [20, 60, 130, 131, 400] {
            let lc = log_binomial_coefficients(k);
            let lk = ln_gamma(k as f64 + 1.0);
            for h in [0, 1, k / 3, k / 2, k] {
                let reference = lk - ln_gamma(h as f64 + 1.0) - ln_gamma((k - h) as f64 + 1.0);
                assert!((lc[h] - reference).abs() <= 1e-10 * reference.abs().max(1.0), "k={k} h={h}");
            }
        }
    }
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rational_thresholds() {
        assert_eq!(Threshold::new(0.75).unwrap(), Threshold { num: 3, den: 4 });
        assert_eq!(Threshold::new(0.61).unwrap(), Threshold { num: 61, den: 100 });
        let t = Threshold::new(0.9).unwrap();
        assert_eq!((t.in_min(10), t.out_max(10)), (9, 1));
        assert_eq!((t.in_min(100), t.out_max(100)), (90, 10));
        let t = Threshold::new(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert_eq!(t.in_min(1000), 708);
        assert!(Threshold::new(0.5).is_err());
        assert!(Threshold::new(1.0).is_err());
    }

    #[test]
    fn single_stable_feature() {
        // Bin(10, 1/2) ≥ 9 has mass 11/1024
        let s = stability_score(&[10], 10, 0.5, 0.9).unwrap();
        assert_abs_diff_eq!(s, -(11.0f64 / 1024.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s, 4.53358, epsilon = 1e-5);
        assert!(stability_score(&[10], 10, 5.0, 0.9).is_err());
    }

    #[test]
    fn empty_model_under_empty_null() {
        assert_eq!(stability_score(&[0; 20], 50, 0.0, 0.8).unwrap(), 0.0);
        // a low count is still stable-out, a high one is impossible under the null
        assert_eq!(stability_score(&[0, 3], 50, 0.0, 0.8).unwrap(), 0.0);
        assert_eq!(stability_score(&[0, 45], 50, 0.0, 0.8).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn two_features_four_draws() {
        let s = stability_score(&[4, 0], 4, 1.0, 0.75).unwrap();
        assert_abs_diff_eq!(s, -2.0 * (5.0f64 / 16.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s, 2.3263, epsilon = 1e-4);
    }

    #[test]
    fn everything_selected_under_full_null() {
        assert_eq!(stability_score(&[7; 5], 7, 5.0, 0.7).unwrap(), 0.0);
        assert_eq!(stability_score(&[7, 3], 7, 2.0, 0.7).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn large_k_is_finite() {
        let counts: Vec<u32> = (0..200).map(|j| (j * 37 % 5001) as u32).collect();
        let s = stability_score(&counts, 5000, 30.0, 0.8).unwrap();
        assert!(s.is_finite() && s > 0.0);
    }

    proptest! {
        #[test]
        fn scaling_counts_keeps_categories(counts in prop::collection::vec(0u32..=10, 1..20), f in 1u32..5, pi in 0.51f64..0.99) {
            let scaled: Vec<u32> = counts.iter().map(|c| c * f).collect();
            prop_assert_eq!(categorize(&counts, 10, pi).unwrap(), categorize(&scaled, 10 * f as usize, pi).unwrap());
        }

        #[test]
        fn finite_scores_are_nonnegative(counts in prop::collection::vec(0u32..=30, 1..15), qf in 0.0f64..=1.0, pi in 0.51f64..0.99) {
            let q = qf * counts.len() as f64;
            let s = stability_score(&counts, 30, q, pi).unwrap();
            prop_assert!(s == f64::NEG_INFINITY || s >= 0.0);
        }
    }
}
