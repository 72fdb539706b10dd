//! Optimal stopping threshold for selecting `R` of `N` sequentially
//! arriving candidates.
//!
//! With `x = α/N` the fraction of candidates observed and rejected up front,
//! the probability of picking the best candidates when the number of
//! prefix-maximum improvements after the observation phase lies in
//! `[r1, r2]` is approximately
//!
//! ```text
//! P(x) = x · Σ_{R=r1..r2} (−ln x)^R / R!
//! ```
//!
//! Its derivative telescopes to `(−ln x)^r2/r2! − (−ln x)^(r1−1)/(r1−1)!`,
//! which vanishes at `−ln x* = (r2!/(r1−1)!)^(1/(r2−r1+1))`. All logarithms
//! are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest argument for which factorials are computed (exactly, in `u64`).
pub const MAX_FACTORIAL_ARG: u32 = 20;

/// Caps for [`k_sum_exact`]; the recursion is exponential in `R` without
/// memoization and the oracle is only meant for small instances.
pub const K_SUM_MAX_R: u32 = 6;
pub const K_SUM_MAX_N: u64 = 200;

pub fn factorial(n: u32) -> Result<u64> {
    if n > MAX_FACTORIAL_ARG {
        return Err(Error::Overflow(format!(
            "{n}! exceeds the exact factorial range (max {MAX_FACTORIAL_ARG})"
        )));
    }
    Ok((1..=u64::from(n)).product())
}

/// `r2! / (r1 − 1)!`, exact.
fn factorial_ratio(r1: u32, r2: u32) -> Result<u64> {
    Ok(factorial(r2)? / factorial(r1 - 1)?)
}

fn check_range(r1: u32, r2: u32) -> Result<()> {
    if r1 < 1 {
        return Err(Error::domain(format!("r1 must be at least 1, got {r1}")));
    }
    if r2 < r1 {
        return Err(Error::domain(format!("r2 ({r2}) must not be below r1 ({r1})")));
    }
    Ok(())
}

/// Which closed form to use for the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaFormula {
    /// `N·exp(−(r2!/(r1−1)!)^(1/(r2−r1+1)))`, the stationary point of `P`.
    #[default]
    Root,
    /// `N·exp(−(r2!/(r1−1)!)/(r2−r1+1))`. Reproduces the published table of
    /// thresholds for N = 1000, including the rows with `r1 < r2` that do
    /// not maximize `P`.
    PaperTable,
}

/// How the real-valued threshold becomes a candidate count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexRounding {
    /// Truncate toward zero (400 candidates with `r2 = 4` gives 43).
    #[default]
    Floor,
    HalfUp,
}

/// Optimal threshold `α*` for `n` candidates.
pub fn alpha_star(n: u64, r1: u32, r2: u32) -> Result<f64> {
    alpha_star_with(n, r1, r2, AlphaFormula::Root)
}

/// Threshold using the division-form exponent found in the published table.
pub fn alpha_star_paper_table(n: u64, r1: u32, r2: u32) -> Result<f64> {
    alpha_star_with(n, r1, r2, AlphaFormula::PaperTable)
}

pub fn alpha_star_with(n: u64, r1: u32, r2: u32, formula: AlphaFormula) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("n must be positive"));
    }
    check_range(r1, r2)?;
    let ratio = factorial_ratio(r1, r2)? as f64;
    let width = f64::from(r2 - r1 + 1);
    let exponent = match formula {
        AlphaFormula::Root => ratio.powf(1.0 / width),
        AlphaFormula::PaperTable => ratio / width,
    };
    Ok(n as f64 * (-exponent).exp())
}

/// A probability, either closed-form (`trials == 0`) or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl ProbabilityEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value: value.clamp(0.0, 1.0), std_error: 0.0, trials: 0 }
    }

    /// Binomial estimate from `successes` out of `trials`.
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self::exact(0.0);
        }
        let p = successes as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        // keep std_error > 0 whenever trials > 0
        Self { value: p, std_error: se.max(f64::MIN_POSITIVE), trials }
    }
}

/// `Σ_{R=r1..r2} t^R / R!` for `t ≥ 0`.
fn poisson_partial_sum(t: f64, r1: u32, r2: u32) -> Result<f64> {
    let mut sum = 0.0;
    for r in r1..=r2 {
        sum += t.powi(r as i32) / factorial(r)? as f64;
    }
    Ok(sum)
}

/// Approximate probability of selecting the best candidates with threshold
/// `alpha`, summed over `R ∈ [r1, r2]`.
pub fn selection_probability(n: u64, alpha: f64, r1: u32, r2: u32) -> Result<ProbabilityEstimate> {
    check_range(r1, r2)?;
    let nf = n as f64;
    if !(alpha > 0.0 && alpha < nf) {
        return Err(Error::domain(format!("alpha must lie in (0, {n}), got {alpha}")));
    }
    let x = alpha / nf;
    let p = x * poisson_partial_sum(-x.ln(), r1, r2)?;
    Ok(ProbabilityEstimate::exact(p))
}

/// `dP/dx` at `x ∈ (0, 1)`.
pub fn selection_probability_slope(x: f64, r1: u32, r2: u32) -> Result<f64> {
    check_range(r1, r2)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("x must lie in (0, 1), got {x}")));
    }
    let t = -x.ln();
    let hi = t.powi(r2 as i32) / factorial(r2)? as f64;
    let lo = t.powi(r1 as i32 - 1) / factorial(r1 - 1)? as f64;
    Ok(hi - lo)
}

/// The exact nested harmonic sum
///
/// ```text
/// K(R, α) = Σ_{i_R=α+1..N−R+1} 1/(i_R−1) Σ_{i_{R−1}=i_R+1..N−R+2} 1/(i_{R−1}−1) … Σ_{i_1=i_2+1..N} 1/(i_1−1)
/// ```
///
/// evaluated by memoized recursion over (depth, start index).
pub fn k_sum_exact(big_r: u32, alpha: u64, n: u64) -> Result<f64> {
    if big_r < 1 || alpha < 1 {
        return Err(Error::domain("R and alpha must be positive"));
    }
    if big_r > K_SUM_MAX_R || n > K_SUM_MAX_N {
        return Err(Error::Limit(format!(
            "R = {big_r}, n = {n} (caps: R ≤ {K_SUM_MAX_R}, n ≤ {K_SUM_MAX_N})"
        )));
    }
    if alpha + u64::from(big_r) > n {
        return Err(Error::domain(format!("alpha + R must not exceed n ({alpha} + {big_r} > {n})")));
    }
    let n = n as usize;
    let depth_max = big_r as usize;
    // level[s] = value of the depth-d sum whose outermost index starts at s.
    // Depth d's outermost index runs up to n − d + 1.
    let mut level = vec![1.0_f64; n + 3];
    for d in 1..=depth_max {
        let upper = n - d + 1;
        let mut next = vec![0.0_f64; n + 3];
        let mut acc = 0.0;
        for s in (2..=upper).rev() {
            acc += level[s + 1] / (s - 1) as f64;
            next[s] = acc;
        }
        level = next;
    }
    Ok(level[alpha as usize + 1])
}

/// `(ln(n/α))^R / R!`, the continuous approximation of [`k_sum_exact`].
pub fn k_sum_approx(big_r: u32, alpha: f64, n: u64) -> Result<f64> {
    let nf = n as f64;
    if !(alpha > 0.0 && alpha < nf) {
        return Err(Error::domain(format!("alpha must lie in (0, {n}), got {alpha}")));
    }
    Ok((nf / alpha).ln().powi(big_r as i32) / factorial(big_r)? as f64)
}

/// Numerical maximizer of [`selection_probability`] over `α ∈ (0, n)`:
/// a uniform scan of `grid` points in `x = α/n`, then golden-section search
/// on the bracket around the best grid point. Independent of the closed form.
pub fn alpha_star_numeric(n: u64, r1: u32, r2: u32, grid: u32) -> Result<f64> {
    check_range(r1, r2)?;
    if grid < 1000 {
        return Err(Error::domain(format!("grid must be at least 1000, got {grid}")));
    }
    let p = |x: f64| -> Result<f64> {
        Ok(x * poisson_partial_sum(-x.ln(), r1, r2)?)
    };
    let step = 1.0 / f64::from(grid);
    let mut best_k = 1;
    let mut best_val = f64::NEG_INFINITY;
    for k in 1..grid {
        let v = p(f64::from(k) * step)?;
        if v > best_val {
            best_val = v;
            best_k = k;
        }
    }
    let mut lo = f64::from(best_k - 1).max(1e-12) * step;
    let mut hi = (f64::from(best_k + 1) * step).min(1.0 - 1e-12);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (p(a)?, p(b)?);
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = p(b)?;
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = p(a)?;
        }
    }
    Ok(n as f64 * 0.5 * (lo + hi))
}

/// Worst-case per-candidate selection probability `R / (N − α)`: when the
/// best candidate falls inside the observation phase, every later
/// candidate is equally likely to end up selected.
pub fn worst_case_ratio(n: u64, budget: u64, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    if !(alpha > 0.0 && alpha < nf) {
        return Err(Error::domain(format!("alpha must lie in (0, {n}), got {alpha}")));
    }
    let rest = nf - alpha;
    if budget as f64 > rest {
        return Err(Error::domain(format!("budget {budget} exceeds the {rest} candidates after alpha")));
    }
    Ok(budget as f64 / rest)
}

/// One instance of the budgeted selection problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub n_candidates: usize,
    pub budget: usize,
    pub r_min: u32,
    pub r_max: u32,
    pub alpha_star_real: f64,
    /// Number of candidates observed and rejected before acceptance starts.
    pub alpha_star_index: usize,
}

impl BudgetSpec {
    /// Validated instance; requires `r_max ≤ n/10`.
    pub fn new(n: usize, budget: usize, r_min: u32, r_max: u32) -> Result<Self> {
        Self::builder(n, budget, r_min, r_max).build()
    }

    pub fn builder(n: usize, budget: usize, r_min: u32, r_max: u32) -> BudgetSpecBuilder {
        BudgetSpecBuilder {
            n,
            budget,
            r_min,
            r_max,
            formula: AlphaFormula::Root,
            rounding: IndexRounding::Floor,
            small_n: false,
        }
    }

    /// Remaining arrivals (this one included) at 1-based `arrival_index`.
    pub fn remaining_at(&self, arrival_index: usize) -> usize {
        self.n_candidates + 1 - arrival_index
    }
}

#[derive(Debug, Clone)]
pub struct BudgetSpecBuilder {
    n: usize,
    budget: usize,
    r_min: u32,
    r_max: u32,
    formula: AlphaFormula,
    rounding: IndexRounding,
    small_n: bool,
}

impl BudgetSpecBuilder {
    pub fn formula(mut self, formula: AlphaFormula) -> Self {
        self.formula = formula;
        self
    }

    pub fn rounding(mut self, rounding: IndexRounding) -> Self {
        self.rounding = rounding;
        self
    }

    /// Skip the `r_max ≤ n/10` check, e.g. for ten-candidate toy streams.
    pub fn allow_small_n(mut self) -> Self {
        self.small_n = true;
        self
    }

    pub fn build(self) -> Result<BudgetSpec> {
        let Self { n, budget, r_min, r_max, formula, rounding, small_n } = self;
        if n < 1 {
            return Err(Error::domain("n_candidates must be positive"));
        }
        check_range(r_min, r_max)?;
        if !small_n && r_max as usize > n / 10 {
            return Err(Error::domain(format!(
                "r_max ({r_max}) must not exceed n/10 ({})",
                n / 10
            )));
        }
        if budget < 1 || budget > n {
            return Err(Error::domain(format!("budget must lie in [1, {n}], got {budget}")));
        }
        let alpha = alpha_star_with(n as u64, r_min, r_max, formula)?;
        let rounded = match rounding {
            IndexRounding::Floor => alpha.floor(),
            IndexRounding::HalfUp => (alpha + 0.5).floor(),
        } as usize;
        let alpha_star_index = rounded.max(1).min(n - budget);
        Ok(BudgetSpec {
            n_candidates: n,
            budget,
            r_min,
            r_max,
            alpha_star_real: alpha,
            alpha_star_index,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alpha_star_table_rows() {
        assert!(close(alpha_star(1000, 2, 2).unwrap(), 135.3353, 1e-3));
        assert!(close(alpha_star(1000, 3, 3).unwrap(), 49.7871, 1e-3));
        assert!(close(alpha_star(1000, 1, 1).unwrap(), 367.8794, 1e-3));
        let a = alpha_star(1000, 2, 3).unwrap();
        assert!(close(a, 1000.0 * (-(6f64).sqrt()).exp(), 1e-9));
        assert!(close(a, 86.3376, 1e-4));
    }

    #[test]
    fn paper_table_variant_rows() {
        let rows = [
            (2, 2, 135.3353),
            (2, 3, 49.7871),
            (2, 4, 0.3355),
            (3, 3, 49.7871),
            (3, 4, 2.4788),
        ];
        for (r1, r2, want) in rows {
            let got = alpha_star_paper_table(1000, r1, r2).unwrap();
            assert!(close(got, want, 5e-5), "({r1},{r2}): {got}");
        }
    }

    #[test]
    fn alpha_star_errors() {
        assert!(matches!(alpha_star(10, 0, 1), Err(Error::Domain(_))));
        assert!(matches!(alpha_star(10, 3, 2), Err(Error::Domain(_))));
        assert!(matches!(alpha_star(10, 1, 21), Err(Error::Overflow(_))));
        assert!(alpha_star(10, 1, 20).is_ok());
    }

    #[test]
    fn selection_probability_examples() {
        let p = selection_probability(1000, 135.3353, 2, 2).unwrap();
        assert!(close(p.value, 0.2707, 5e-5));
        assert_eq!((p.std_error, p.trials), (0.0, 0));
        let p = selection_probability(1000, 49.7871, 3, 3).unwrap();
        assert!(close(p.value, 0.2240, 5e-5));
        let p = selection_probability(1000, 367.8794, 1, 1).unwrap();
        assert!(close(p.value, (-1f64).exp(), 1e-6));
        assert!(selection_probability(1000, 0.0, 1, 1).is_err());
        assert!(selection_probability(1000, 1000.0, 1, 1).is_err());
    }

    #[test]
    fn k_sum_exact_examples() {
        let want: f64 = (3..=9).map(|j| 1.0 / j as f64).sum();
        assert!(close(k_sum_exact(1, 3, 10).unwrap(), want, 1e-12));
        assert!(close(want, 1.3290, 1e-4));
        assert_eq!(k_sum_exact(1, 1, 2).unwrap(), 1.0);
        assert!(matches!(k_sum_exact(7, 1, 100), Err(Error::Limit(_))));
        assert!(matches!(k_sum_exact(2, 1, 201), Err(Error::Limit(_))));
        assert!(matches!(k_sum_exact(2, 9, 10), Err(Error::Domain(_))));
    }

    /// Brute-force enumeration of strictly increasing index tuples.
    fn k_sum_brute(big_r: usize, alpha: usize, n: usize) -> f64 {
        fn go(depth: usize, start: usize, n: usize) -> f64 {
            if depth == 0 {
                return 1.0;
            }
            (start..=n - depth + 1).map(|i| go(depth - 1, i + 1, n) / (i - 1) as f64).sum()
        }
        go(big_r, alpha + 1, n)
    }

    #[test]
    fn k_sum_exact_matches_brute_force() {
        for (r, a, n) in [(1, 3, 10), (2, 2, 12), (3, 4, 15), (4, 1, 11), (2, 10, 40)] {
            let fast = k_sum_exact(r as u32, a as u64, n as u64).unwrap();
            let slow = k_sum_brute(r, a, n);
            assert!(close(fast, slow, 1e-12 * slow.max(1.0)), "({r},{a},{n})");
        }
    }

    #[test]
    fn k_sum_exact_golden_and_approx() {
        // frozen from the brute-force enumeration above
        let exact = k_sum_exact(2, 10, 100).unwrap();
        assert!(close(exact, 2.709_954_950_339_568_6, 1e-12));
        let approx = k_sum_approx(2, 10.0, 100).unwrap();
        assert!((exact - approx).abs() / exact < 0.05);
    }

    #[test]
    fn k_sum_approx_examples() {
        assert!(close(k_sum_approx(1, 3.0, 10).unwrap(), (10.0f64 / 3.0).ln(), 1e-12));
        assert!(close(k_sum_approx(1, 3.0, 10).unwrap(), 1.2040, 1e-4));
        let a = 1000.0 * (-2f64).exp();
        assert!(close(k_sum_approx(2, a, 1000).unwrap(), 2.0, 1e-12));
        let a = 1000.0 * (-1f64).exp();
        assert!(close(k_sum_approx(1, a, 1000).unwrap(), 1.0, 1e-12));
        assert!(k_sum_approx(1, 0.0, 10).is_err());
    }

    #[test]
    fn numeric_optimizer_examples() {
        let a = alpha_star_numeric(1000, 2, 2, 100_000).unwrap();
        assert!(close(a, 135.34, 0.01), "{a}");
        let a = alpha_star_numeric(1000, 1, 1, 100_000).unwrap();
        assert!(close(a, 367.88, 0.01), "{a}");
        let a = alpha_star_numeric(1000, 2, 3, 100_000).unwrap();
        assert!(close(a, 86.3376, 0.01), "{a}");
        assert!(alpha_star_numeric(1000, 1, 1, 999).is_err());
    }

    #[test]
    fn worst_case_ratio_examples() {
        assert!(close(worst_case_ratio(100, 10, 37.0).unwrap(), 10.0 / 63.0, 1e-12));
        assert!(close(worst_case_ratio(1000, 50, 135.3353).unwrap(), 0.0578, 1e-4));
        assert_eq!(worst_case_ratio(100, 63, 37.0).unwrap(), 1.0);
        assert!(worst_case_ratio(100, 64, 37.0).is_err());
    }

    #[test]
    fn budget_spec_index() {
        let s = BudgetSpec::new(400, 20, 1, 4).unwrap();
        assert!(close(s.alpha_star_real, 43.7329, 1e-4));
        assert_eq!(s.alpha_star_index, 43);
        let s = BudgetSpec::builder(400, 20, 1, 4).rounding(IndexRounding::HalfUp).build().unwrap();
        assert_eq!(s.alpha_star_index, 44);
        let s = BudgetSpec::builder(10, 2, 1, 2).allow_small_n().build().unwrap();
        assert_eq!(s.alpha_star_index, 2);
        assert!(BudgetSpec::new(10, 2, 1, 2).is_err());
        // clamp to n − budget
        let s = BudgetSpec::new(100, 95, 1, 1).unwrap();
        assert_eq!(s.alpha_star_index, 5);
        // tiny alpha clamps up to 1
        let s = BudgetSpec::new(100, 10, 1, 10).unwrap();
        assert_eq!(s.alpha_star_index, 1);
        assert!(BudgetSpec::new(100, 0, 1, 1).is_err());
        assert!(BudgetSpec::new(100, 101, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn numeric_optimizer_agrees_with_closed_form(n in 100u64..5000, r1 in 1u32..5, extra in 0u32..3) {
            let r2 = r1 + extra;
            let closed = alpha_star(n, r1, r2).unwrap();
            let numeric = alpha_star_numeric(n, r1, r2, 20_000).unwrap();
            prop_assert!((closed - numeric).abs() <= (0.5f64).max(n as f64 * 1e-3));
            let slope = selection_probability_slope(closed / n as f64, r1, r2).unwrap();
            prop_assert!(slope.abs() < 1e-6);
        }

        #[test]
        fn probability_increases_with_r2(n in 50u64..5000, frac in 0.01f64..0.9, r1 in 1u32..4, r2 in 1u32..8) {
            let r2 = r1.max(r2);
            let alpha = frac * n as f64;
            let lo = selection_probability(n, alpha, r1, r2).unwrap().value;
            let hi = selection_probability(n, alpha, r1, r2 + 1).unwrap().value;
            prop_assert!(hi > lo);
        }

        #[test]
        fn probability_is_additive_over_r(n in 50u64..5000, frac in 0.01f64..0.99, r1 in 1u32..4, extra in 0u32..4) {
            let r2 = r1 + extra;
            let alpha = frac * n as f64;
            let whole = selection_probability(n, alpha, r1, r2).unwrap().value;
            let parts: f64 = (r1..=r2)
                .map(|r| selection_probability(n, alpha, r, r).unwrap().value)
                .sum();
            prop_assert!((whole - parts).abs() < 1e-12);
        }

        #[test]
        fn single_r_threshold_has_power_one(n in 10u64..100_000, r in 1u32..8) {
            let ratio = (factorial(r).unwrap() / factorial(r - 1).unwrap()) as f64;
            let want = n as f64 * (-ratio).exp();
            prop_assert!((alpha_star(n, r, r).unwrap() - want).abs() <= 1e-9 * want.max(1.0));
        }

        // The continuous approximation is within 10% of the exact sum when
        // α is well below n; close to n at R = 3 the N − R + 1 ≈ N step
        // breaks down (n = 100, α = 74 is about 10.8% off).
        #[test]
        fn approximation_is_tight(n in 100u64..=200, alpha_frac in 0.1f64..0.5, r in 1u32..=3) {
            let alpha = ((alpha_frac * n as f64) as u64).max(10);
            let exact = k_sum_exact(r, alpha, n).unwrap();
            let approx = k_sum_approx(r, alpha as f64, n).unwrap();
            prop_assert!((exact - approx).abs() / exact <= 0.10);
        }
    }
}
