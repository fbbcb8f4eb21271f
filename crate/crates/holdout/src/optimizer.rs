//! Hold-out size optimization: minimize negative utility over m, sweep a
//! sigma^2 grid for the Pareto frontier, locate the sigma^2 upper bound, and
//! invert the frontier to recover the implicit sigma^2 of a conventional K.

use rayon::prelude::*;

use crate::curve::{eval_loss, BoundMode, LossCurve};
use crate::error::{Error, Result};

/// Floor of the default sigma^2 sweep; treated as "sigma^2 -> 0+".
pub const SIGMA2_GRID_MIN: f64 = 1e-3;
/// Points in the default log-spaced sigma^2 grid.
pub const SIGMA2_GRID_POINTS: usize = 60;

/// Result of minimizing `E(m) + V(m)` over integer m.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimalSplit {
    /// Minimizer; meaningful only when `feasible`.
    pub m_star: usize,
    /// N / m_star as a real number.
    pub implied_k: f64,
    /// N / m_star rounded to the nearest integer.
    pub implied_k_nearest: usize,
    pub utility_at_min: f64,
    /// False when no m has nonnegative estimated loss at this sigma^2.
    pub feasible: bool,
    pub sigma2: f64,
}

/// One point of a Pareto frontier sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParetoPoint {
    pub sigma2: f64,
    pub m_star: usize,
    pub implied_k: f64,
    pub feasible: bool,
}

/// Exhaustive integer scan of `m` in `[m_min, m_max]`, restricted to m with
/// `E(m; sigma2) >= 0`; ties break toward smaller m. Infeasibility is a
/// result, not an error.
pub fn optimal_m(curve: &LossCurve, sigma2: f64, mode: &BoundMode) -> OptimalSplit {
    let mode = mode.with_sigma2(sigma2);
    let c_eff = mode.constant() * mode.sigma2_eff();
    let mut best: Option<(usize, f64)> = None;
    for m in curve.m_min()..=curve.m_max() {
        // Domain is checked by the loop bounds; eval only fails outside them.
        let loss = eval_loss(curve, m, sigma2).expect("m within curve domain");
        if loss < 0.0 {
            continue;
        }
        let utility = loss + c_eff * loss / m as f64;
        match best {
            Some((_, u)) if utility >= u => {}
            _ => best = Some((m, utility)),
        }
    }
    match best {
        Some((m_star, utility_at_min)) => {
            let implied_k = curve.n() as f64 / m_star as f64;
            OptimalSplit {
                m_star,
                implied_k,
                implied_k_nearest: implied_k.round() as usize,
                utility_at_min,
                feasible: true,
                sigma2,
            }
        }
        None => OptimalSplit {
            m_star: 0,
            implied_k: f64::NAN,
            implied_k_nearest: 0,
            utility_at_min: f64::NAN,
            feasible: false,
            sigma2,
        },
    }
}

/// One `optimal_m` per grid value, in grid order.
pub fn pareto_frontier(curve: &LossCurve, sigma2_grid: &[f64], mode: &BoundMode) -> Vec<ParetoPoint> {
    sigma2_grid
        .par_iter()
        .map(|&sigma2| {
            let opt = optimal_m(curve, sigma2, mode);
            ParetoPoint {
                sigma2,
                m_star: opt.m_star,
                implied_k: opt.implied_k,
                feasible: opt.feasible,
            }
        })
        .collect()
}

/// Log-spaced sigma^2 grid of `points` values spanning `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![hi];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// The sigma^2 where the Pareto frontier "maxes out": the smallest sigma^2
/// whose optimal m reaches the frontier's maximum m*. Past the maximum the
/// estimated loss shrinks toward zero and the optimum retreats, so the value
/// doubles as the loose upper bound on plausible sigma^2. On [grid floor,
/// upper bound] the frontier is on its rising branch, hence nondecreasing.
pub fn sigma2_upper_bound(curve: &LossCurve, mode: &BoundMode, tolerance: f64) -> Result<f64> {
    // Feasibility ends where even the largest-m loss hits zero.
    let sigma2_feasible_max = (curve.m_min()..=curve.m_max())
        .map(|m| eval_loss(curve, m, 0.0).expect("m within curve domain"))
        .fold(f64::NEG_INFINITY, f64::max);
    // NaN-rejecting comparison: treat any non-positive or NaN max as infeasible.
    let feasible_max_positive = sigma2_feasible_max.partial_cmp(&0.0) == Some(std::cmp::Ordering::Greater);
    if !feasible_max_positive || !optimal_m(curve, SIGMA2_GRID_MIN.min(sigma2_feasible_max / 2.0), mode).feasible {
        return Err(Error::CurveInfeasible);
    }

    // Coarse scan for the first peak of m*(sigma2). Past the feasibility
    // edge's shadow, m* can rise again (only large m remain feasible), so the
    // scan stops at the first decline rather than taking a global max.
    let grid = log_grid(
        SIGMA2_GRID_MIN.min(sigma2_feasible_max / 2.0),
        sigma2_feasible_max,
        128,
    );
    let mut peak_m = 0usize;
    let mut first_at_peak = 0usize;
    let mut declined = false;
    for (i, &s) in grid.iter().enumerate() {
        let opt = optimal_m(curve, s, mode);
        if opt.feasible && opt.m_star > peak_m {
            peak_m = opt.m_star;
            first_at_peak = i;
        } else if !opt.feasible || opt.m_star < peak_m {
            declined = true;
            break;
        }
    }
    if !declined {
        // m* never declines: the frontier runs to the feasibility edge.
        return Ok(sigma2_feasible_max);
    }
    if first_at_peak == 0 {
        return Ok(grid[0]);
    }

    // Bisect for the first attainment of peak_m. Below the smooth maximum,
    // m*(sigma2) is increasing, so the predicate "m* >= peak_m" has a single
    // clean crossing here (unlike the falling edge, where the integer steps
    // near the flat maximum become arbitrarily narrow).
    let mut lo = grid[first_at_peak - 1];
    let mut hi = grid[first_at_peak];
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        let opt = optimal_m(curve, mid, mode);
        if opt.feasible && opt.m_star >= peak_m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Return the attained end so m*(upper bound) equals the peak.
    Ok(hi)
}

/// Invert the frontier: a sigma^2 at which `optimal_m` returns exactly
/// `m_K = floor(N/K)`. Returns `Ok(None)` (infeasible) when no sigma^2 at or
/// below the upper bound reaches m_K — the Table-3 "-" case.
pub fn implicit_sigma2(
    curve: &LossCurve,
    k: usize,
    mode: &BoundMode,
    tolerance: f64,
) -> Result<Option<f64>> {
    if k < 2 {
        return Err(Error::FoldCountOutOfRange {
            k,
            max: curve.n() / 2,
        });
    }
    let m_k = curve.n() / k;
    if m_k < curve.m_min() || m_k > curve.m_max() {
        return Err(Error::HoldOutSizeOutOfRange {
            m: m_k,
            max: curve.m_max(),
        });
    }
    let upper = sigma2_upper_bound(curve, mode, tolerance)?;
    let mut lo = SIGMA2_GRID_MIN.min(upper / 2.0);
    let mut hi = upper;
    // m*(sigma2) is nondecreasing on [lo, upper]; bisect the first crossing
    // of m_k, then check the step lands exactly on m_k.
    if optimal_m(curve, lo, mode).m_star > m_k {
        return Ok(None);
    }
    if optimal_m(curve, hi, mode).m_star < m_k {
        return Ok(None);
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if optimal_m(curve, mid, mode).m_star >= m_k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if optimal_m(curve, hi, mode).m_star == m_k {
        Ok(Some(hi))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{fit_interpolating_curve, fit_power_curve, negative_utility, FitKind};
    use crate::cv::LossAnchors;
    use proptest::prelude::*;

    fn abalone_lm_curve() -> LossCurve {
        fit_power_curve(&LossAnchors::new(4.9394, 4.9426, 4.9594, 5, 4177).unwrap()).unwrap()
    }

    fn abalone_rf_curve() -> LossCurve {
        fit_power_curve(&LossAnchors::new(4.6379, 4.6692, 5.0571, 5, 4177).unwrap()).unwrap()
    }

    /// Literal brute force over every integer m via the public curve API.
    fn brute_force(curve: &LossCurve, sigma2: f64, mode: &BoundMode) -> Option<(usize, f64)> {
        let mode = mode.with_sigma2(sigma2);
        let mut best: Option<(usize, f64)> = None;
        for m in curve.m_min()..=curve.m_max() {
            if let Ok(u) = negative_utility(curve, m, &mode) {
                if best.is_none_or(|(_, bu)| u < bu) {
                    best = Some((m, u));
                }
            }
        }
        best
    }

    #[test]
    fn flat_curve_optimum_at_m_max() {
        let points = [(1usize, 2.0), (50, 2.0), (100, 2.0)];
        let curve = fit_interpolating_curve(&points, FitKind::Pchip).unwrap();
        let opt = optimal_m(&curve, 1.0, &BoundMode::symmetric(1.0));
        assert!(opt.feasible);
        assert_eq!(opt.m_star, 100);
    }

    #[test]
    fn zero_sigma2_optimum_at_m_min() {
        // With sigma2 = 0 the utility is the increasing loss curve itself.
        let curve = abalone_lm_curve();
        let opt = optimal_m(&curve, 0.0, &BoundMode::symmetric(0.0));
        assert_eq!(opt.m_star, 1);
    }

    #[test]
    fn infeasible_sigma2_flagged_not_error() {
        let curve = abalone_lm_curve();
        let opt = optimal_m(&curve, 10.0, &BoundMode::symmetric(10.0));
        assert!(!opt.feasible);
        assert_eq!(opt.m_star, 0);
    }

    #[test]
    fn matches_brute_force_on_abalone() {
        let mode = BoundMode::symmetric(1.0);
        for curve in [abalone_lm_curve(), abalone_rf_curve()] {
            for sigma2 in [0.01, 0.1, 1.0, 2.0] {
                let opt = optimal_m(&curve, sigma2, &mode);
                let (m, u) = brute_force(&curve, sigma2, &mode).unwrap();
                assert_eq!(opt.m_star, m);
                assert_eq!(opt.utility_at_min, u);
            }
        }
    }

    #[test]
    fn table_pattern_m_star_increases_with_sigma2() {
        let curve = abalone_lm_curve();
        let mode = BoundMode::symmetric(1.0);
        let m1 = optimal_m(&curve, 0.01, &mode).m_star;
        let m2 = optimal_m(&curve, 0.1, &mode).m_star;
        let m3 = optimal_m(&curve, 1.0, &mode).m_star;
        assert!(m1 <= m2 && m2 <= m3, "{m1} <= {m2} <= {m3} violated");
        assert!(m1 >= 2 && m3 <= curve.m_max());
    }

    #[test]
    fn implied_k_consistent_with_m_star() {
        let curve = abalone_lm_curve();
        let opt = optimal_m(&curve, 1.0, &BoundMode::symmetric(1.0));
        assert_eq!(opt.implied_k, 4177.0 / opt.m_star as f64);
        assert_eq!(opt.implied_k_nearest, opt.implied_k.round() as usize);
    }

    #[test]
    fn frontier_one_point_reduces_to_optimal_m() {
        let curve = abalone_lm_curve();
        let mode = BoundMode::symmetric(1.0);
        let frontier = pareto_frontier(&curve, &[0.5], &mode);
        assert_eq!(frontier.len(), 1);
        assert_eq!(frontier[0].m_star, optimal_m(&curve, 0.5, &mode).m_star);
    }

    #[test]
    fn frontier_monotone_up_to_upper_bound() {
        let mode = BoundMode::symmetric(1.0);
        for curve in [abalone_lm_curve(), abalone_rf_curve()] {
            let ub = sigma2_upper_bound(&curve, &mode, 1e-6).unwrap();
            let grid = log_grid(SIGMA2_GRID_MIN, ub, SIGMA2_GRID_POINTS);
            let frontier = pareto_frontier(&curve, &grid, &mode);
            let mut last = 0usize;
            for p in &frontier {
                assert!(p.feasible);
                assert!(p.m_star >= last, "frontier dipped at sigma2 = {}", p.sigma2);
                last = p.m_star;
            }
        }
    }

    #[test]
    fn abalone_upper_bound_in_reference_band() {
        let mode = BoundMode::symmetric(1.0);
        for curve in [abalone_lm_curve(), abalone_rf_curve()] {
            let ub = sigma2_upper_bound(&curve, &mode, 1e-6).unwrap();
            assert!((2.0..=3.0).contains(&ub), "upper bound {ub} outside [2, 3]");
        }
    }

    #[test]
    fn upper_bound_below_feasibility_algebra_cap() {
        // Loss must stay nonnegative somewhere: ub <= l_loo + scale = l_lmo.
        let curve = abalone_lm_curve();
        let ub = sigma2_upper_bound(&curve, &BoundMode::symmetric(1.0), 1e-6).unwrap();
        assert!(ub <= 4.9594 + 1e-9);
    }

    #[test]
    fn upper_bound_matches_dense_grid_scan() {
        let curve = abalone_lm_curve();
        let mode = BoundMode::symmetric(1.0);
        let ub = sigma2_upper_bound(&curve, &mode, 1e-7).unwrap();
        // Dense-grid oracle: the first sigma2 whose m* reaches the value the
        // bound reports. The rising branch has a single clean crossing.
        let target = optimal_m(&curve, ub, &mode).m_star;
        let grid = log_grid(1e-3, 4.9594, 20_000);
        let first_attained = grid
            .iter()
            .find(|&&s| optimal_m(&curve, s, &mode).m_star >= target)
            .copied()
            .unwrap();
        assert!(
            (ub - first_attained).abs() < 2e-3,
            "bisection {ub} vs grid {first_attained}"
        );
    }

    #[test]
    fn implicit_sigma2_roundtrip_exact() {
        let mode = BoundMode::symmetric(1.0);
        for curve in [abalone_lm_curve(), abalone_rf_curve()] {
            for k in [4usize, 5, 10, 20, 50] {
                if let Ok(Some(sigma2)) = implicit_sigma2(&curve, k, &mode, 1e-9) {
                    let opt = optimal_m(&curve, sigma2, &mode);
                    assert_eq!(
                        opt.m_star,
                        curve.n() / k,
                        "roundtrip failed for K={k} at sigma2={sigma2}"
                    );
                }
            }
        }
    }

    #[test]
    fn implicit_sigma2_decreasing_in_k() {
        let curve = abalone_lm_curve();
        let mode = BoundMode::symmetric(1.0);
        let mut last = f64::INFINITY;
        for k in [4usize, 5, 10, 20] {
            if let Some(s) = implicit_sigma2(&curve, k, &mode, 1e-9).unwrap() {
                assert!(s < last, "implicit sigma2 should decrease in K");
                last = s;
            }
        }
    }

    #[test]
    fn implicit_sigma2_rejects_k_out_of_domain() {
        let curve = abalone_lm_curve();
        let mode = BoundMode::symmetric(1.0);
        assert!(implicit_sigma2(&curve, 1, &mode, 1e-9).is_err());
    }

    #[test]
    fn k2_boundary_behaves() {
        // m_K = m_lmo is the scan boundary: either reachable or infeasible,
        // never an error.
        let curve = abalone_lm_curve();
        let mode = BoundMode::symmetric(1.0);
        let result = implicit_sigma2(&curve, 2, &mode, 1e-9).unwrap();
        if let Some(s) = result {
            assert_eq!(optimal_m(&curve, s, &mode).m_star, 2088);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_m_matches_brute_force_on_random_triples(
            l_loo in 0.1f64..5.0,
            d1 in 1e-3f64..2.0,
            d2 in 1e-3f64..2.0,
            n in 50usize..2000,
            sigma2 in 1e-3f64..3.0,
        ) {
            let anchors = LossAnchors::new(l_loo, l_loo + d1, l_loo + d1 + d2, 5, n).unwrap();
            let curve = fit_power_curve(&anchors).unwrap();
            let mode = BoundMode::symmetric(sigma2);
            let opt = optimal_m(&curve, sigma2, &mode);
            match brute_force(&curve, sigma2, &mode) {
                Some((m, u)) => {
                    prop_assert!(opt.feasible);
                    prop_assert_eq!(opt.m_star, m);
                    prop_assert_eq!(opt.utility_at_min, u);
                }
                None => prop_assert!(!opt.feasible),
            }
        }

        #[test]
        fn m_star_nondecreasing_below_upper_bound(
            l_loo in 0.1f64..5.0,
            exponent in 1.0f64..4.0,
            span in 0.01f64..2.0,
            n in 50usize..2000,
        ) {
            // Convex curves (exponent >= 1), the regime seen in practice:
            // concave anchors make m*(sigma2) spike at the feasibility edge
            // of m = 1 and then decline, so monotonicity holds only here.
            let m_kref = n / 5;
            let m_lmo = n / 2;
            let alpha = (m_kref - 1) as f64 / (m_lmo - 1) as f64;
            let beta = alpha.powf(exponent);
            let d1 = beta * span;
            let anchors = LossAnchors::new(l_loo, l_loo + d1, l_loo + span, 5, n).unwrap();
            let curve = fit_power_curve(&anchors).unwrap();
            let mode = BoundMode::symmetric(1.0);
            let ub = sigma2_upper_bound(&curve, &mode, 1e-6).unwrap();
            let grid = log_grid(SIGMA2_GRID_MIN.min(ub / 2.0), ub, SIGMA2_GRID_POINTS);
            let mut last = 0usize;
            for &s in &grid {
                let opt = optimal_m(&curve, s, &mode);
                prop_assert!(opt.feasible);
                prop_assert!(opt.m_star >= last);
                last = opt.m_star;
            }
        }
    }
}
