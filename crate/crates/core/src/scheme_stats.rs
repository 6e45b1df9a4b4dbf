//! Rate-scaled power sums of observation interval lengths.
//!
//! For a pair `(i, j)` of overlapping intervals write `|I¹|`, `|I²|` for their
//! lengths, `|I¹∩I²|` for the overlap and `|I¹\I²|`, `|I²\I¹|` for the set
//! differences. With rate `r`:
//!
//! ```text
//! G^{(l)}_p(t)    = r^{p/2-1}       Σ_{t^{(l)}_i <= t} |I^{(l)}_i|^{p/2}
//! G_{p1,p2}(t)    = r^{(p1+p2)/2-1} Σ_{t¹_i ∨ t²_j <= t} |I¹|^{p1/2} |I²|^{p2/2}
//! H_{k,m,p}(t)    = r^{p/2-1}       Σ_{t¹_i ∨ t²_j <= t} |I¹\I²|^{k/2} |I²\I¹|^{m/2} |I¹∩I²|^{(p-k-m)/2}
//! G_{k,m,p}(t)    = r^{p/2-1}       Σ_{t¹_i ∨ t²_j <= t} |I¹|^{k/2} |I²|^{m/2} |I¹∩I²|^{(p-k-m)/2}
//! ```
//!
//! All powers use `0^0 = 1`.

use crate::error::{Error, Result};
use crate::model::Component;
use crate::schemes::{for_each_overlap, ObservationScheme, OverlapPair, TimeGrid};
use crate::step::{StepBuilder, StepFunction};
use crate::sum::NeumaierSum;

/// `x^e` with `0^0 = 1`, memoizing the last argument.
///
/// Regular grids produce long runs of equal lengths, so the memo turns most
/// `powf` calls into a comparison.
#[derive(Debug, Clone, Copy)]
struct Pow {
    e: f64,
    last_x: f64,
    last_y: f64,
}

impl Pow {
    fn new(e: f64) -> Self {
        Self {
            e,
            last_x: 0.0,
            last_y: if e == 0.0 { 1.0 } else { 0.0 },
        }
    }

    #[inline]
    fn at(&mut self, x: f64) -> f64 {
        if x == self.last_x {
            return self.last_y;
        }
        let y = if self.e == 0.0 {
            1.0
        } else if self.e == 1.0 {
            x
        } else if self.e == 0.5 {
            x.sqrt()
        } else {
            x.powf(self.e)
        };
        self.last_x = x;
        self.last_y = y;
        y
    }
}

/// One of the pair statistics, identified by its exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairStatistic {
    /// `G_{p1,p2}`
    Cross { p1: f64, p2: f64 },
    /// `H_{k,m,p}`
    H { k: u32, m: u32, p: f64 },
    /// `G_{k,m,p}`
    Gkmp { k: u32, m: u32, p: f64 },
    /// Summand `|I¹|^{p1/2 ∧ 1} |I²|^{p2/2 ∧ 1}`, no rate factor.
    OverlapPower { p1: f64, p2: f64 },
}

#[derive(Clone, Copy)]
enum Lengths {
    Full,
    Difference,
}

impl PairStatistic {
    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        match *self {
            PairStatistic::Cross { p1, p2 } if !(ok(p1) && ok(p2)) => {
                Err(Error::param("exponents must be nonnegative"))
            }
            PairStatistic::OverlapPower { p1, p2 }
                if !(p1 > 0.0 && p2 > 0.0 && ok(p1) && ok(p2)) =>
            {
                Err(Error::param("exponents must be positive"))
            }
            PairStatistic::H { k, m, p } | PairStatistic::Gkmp { k, m, p } => {
                if !ok(p) {
                    Err(Error::param("p must be nonnegative"))
                } else if (k + m) as f64 > p {
                    Err(Error::param(format!("k + m = {} exceeds p = {p}", k + m)))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Total degree in interval length, times two.
    fn degree(&self) -> f64 {
        match *self {
            PairStatistic::Cross { p1, p2 } => p1 + p2,
            PairStatistic::H { p, .. } | PairStatistic::Gkmp { p, .. } => p,
            PairStatistic::OverlapPower { .. } => 2.0,
        }
    }

    /// Exponents applied to (first, second, overlap) lengths.
    fn exponents(&self) -> (Lengths, [f64; 3]) {
        match *self {
            PairStatistic::Cross { p1, p2 } => (Lengths::Full, [p1 / 2.0, p2 / 2.0, 0.0]),
            PairStatistic::OverlapPower { p1, p2 } => (
                Lengths::Full,
                [(p1 / 2.0).min(1.0), (p2 / 2.0).min(1.0), 0.0],
            ),
            PairStatistic::H { k, m, p } => (
                Lengths::Difference,
                [k as f64 / 2.0, m as f64 / 2.0, (p - (k + m) as f64) / 2.0],
            ),
            PairStatistic::Gkmp { k, m, p } => (
                Lengths::Full,
                [k as f64 / 2.0, m as f64 / 2.0, (p - (k + m) as f64) / 2.0],
            ),
        }
    }

    fn rate_factor(&self, rate: f64) -> f64 {
        match self {
            PairStatistic::OverlapPower { .. } => 1.0,
            _ => rate.powf(self.degree() / 2.0 - 1.0),
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("rate must be positive, got {rate}")))
    }
}

/// Common spacing of a regular grid; every interval of it has this length.
fn regular_spacing(grid: &TimeGrid) -> Option<f64> {
    match grid {
        TimeGrid::Regular { denom, .. } => Some(1.0 / denom),
        TimeGrid::Explicit(_) => None,
    }
}

/// Visit `(t¹_i ∨ t²_j, unscaled summand)` for every pair entering the sum at `T`.
fn visit_pairs<F: FnMut(f64, f64)>(scheme: &ObservationScheme, stat: PairStatistic, mut visit: F) {
    let (kind, [e1, e2, e3]) = stat.exponents();
    let (mut w1, mut w2, mut w3) = (Pow::new(e1), Pow::new(e2), Pow::new(e3));
    let h1 = regular_spacing(scheme.grid(Component::One));
    let h2 = regular_spacing(scheme.grid(Component::Two));
    let len1 = |p: &OverlapPair| h1.unwrap_or_else(|| p.len1());
    let len2 = |p: &OverlapPair| h2.unwrap_or_else(|| p.len2());
    let uses_overlap = e3 != 0.0 || matches!(kind, Lengths::Difference);
    for_each_overlap(scheme, Some(scheme.horizon()), |p| {
        let (a, b, c) = if uses_overlap {
            let c = p.overlap().max(0.0);
            match kind {
                Lengths::Full => (len1(p), len2(p), c),
                // exact endpoint arithmetic so that coinciding intervals give 0
                Lengths::Difference => ((p.len1() - c).max(0.0), (p.len2() - c).max(0.0), c),
            }
        } else {
            (len1(p), len2(p), 0.0)
        };
        visit(p.right(), w1.at(a) * w2.at(b) * w3.at(c));
    });
}

/// A pair statistic as a step function of `t ∈ [0, T]`.
pub fn pair_statistic(
    scheme: &ObservationScheme,
    stat: PairStatistic,
    rate: f64,
) -> Result<StepFunction> {
    check_rate(rate)?;
    stat.validate()?;
    let scale = stat.rate_factor(rate);
    let mut builder = StepBuilder::new();
    visit_pairs(scheme, stat, |t, v| builder.push(t, scale * v));
    Ok(builder.finish())
}

/// A pair statistic at `t = T` only, without materializing breakpoints.
pub fn pair_statistic_total(
    scheme: &ObservationScheme,
    stat: PairStatistic,
    rate: f64,
) -> Result<f64> {
    check_rate(rate)?;
    stat.validate()?;
    let (kind, [e1, e2, e3]) = stat.exponents();
    let h1 = regular_spacing(scheme.grid(Component::One));
    let h2 = regular_spacing(scheme.grid(Component::Two));
    if let (Lengths::Full, 0.0, Some(h1), Some(h2)) = (kind, e3, h1, h2) {
        // every summand is the same; only the number of pairs is needed
        let mut count = 0u64;
        for_each_overlap(scheme, Some(scheme.horizon()), |_| count += 1);
        let each = Pow::new(e1).at(h1) * Pow::new(e2).at(h2);
        return Ok(stat.rate_factor(rate) * each * count as f64);
    }
    let mut acc = NeumaierSum::new();
    visit_pairs(scheme, stat, |_, v| acc += v);
    Ok(stat.rate_factor(rate) * acc.value())
}

/// `G^{(l)}_p`.
pub fn g_onedim(
    scheme: &ObservationScheme,
    l: Component,
    p: f64,
    rate: f64,
) -> Result<StepFunction> {
    check_rate(rate)?;
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::param("p must be nonnegative"));
    }
    let scale = rate.powf(p / 2.0 - 1.0);
    let mut w = Pow::new(p / 2.0);
    let t_end = scheme.horizon();
    let h = regular_spacing(scheme.grid(l));
    let mut builder = StepBuilder::new();
    let mut prev = 0.0;
    for t in scheme.grid(l).iter().skip(1).take_while(|&t| t <= t_end) {
        builder.push(t, scale * w.at(h.unwrap_or(t - prev)));
        prev = t;
    }
    Ok(builder.finish())
}

/// `G^{(l)}_p(T)`.
pub fn g_onedim_total(scheme: &ObservationScheme, l: Component, p: f64, rate: f64) -> Result<f64> {
    Ok(g_onedim(scheme, l, p, rate)?.last_value())
}

/// `G_{p1,p2}`.
pub fn g_cross(scheme: &ObservationScheme, p1: f64, p2: f64, rate: f64) -> Result<StepFunction> {
    pair_statistic(scheme, PairStatistic::Cross { p1, p2 }, rate)
}

/// `G_{p1,p2}(T)`.
pub fn g_cross_total(scheme: &ObservationScheme, p1: f64, p2: f64, rate: f64) -> Result<f64> {
    pair_statistic_total(scheme, PairStatistic::Cross { p1, p2 }, rate)
}

/// `H_{k,m,p}`. Fails when `k + m > p`.
pub fn h_stat(
    scheme: &ObservationScheme,
    k: u32,
    m: u32,
    p: f64,
    rate: f64,
) -> Result<StepFunction> {
    pair_statistic(scheme, PairStatistic::H { k, m, p }, rate)
}

/// `H_{k,m,p}(T)`.
pub fn h_stat_total(scheme: &ObservationScheme, k: u32, m: u32, p: f64, rate: f64) -> Result<f64> {
    pair_statistic_total(scheme, PairStatistic::H { k, m, p }, rate)
}

/// `G_{k,m,p}`. Fails when `k + m > p`.
pub fn g_kmp(
    scheme: &ObservationScheme,
    k: u32,
    m: u32,
    p: f64,
    rate: f64,
) -> Result<StepFunction> {
    pair_statistic(scheme, PairStatistic::Gkmp { k, m, p }, rate)
}

/// `G_{k,m,p}(T)`.
pub fn g_kmp_total(scheme: &ObservationScheme, k: u32, m: u32, p: f64, rate: f64) -> Result<f64> {
    pair_statistic_total(scheme, PairStatistic::Gkmp { k, m, p }, rate)
}

/// `Σ |I¹_i|^{p1/2 ∧ 1} |I²_j|^{p2/2 ∧ 1}` over overlapping pairs with
/// `t¹_i ∨ t²_j <= T`. Its boundedness in `n` is the scheme condition for non-normalized limits with power-type `f`.
pub fn overlap_power_sum(scheme: &ObservationScheme, p1: f64, p2: f64) -> Result<f64> {
    pair_statistic_total(scheme, PairStatistic::OverlapPower { p1, p2 }, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{generate_scheme, mesh, SchemeSpec};
    use proptest::prelude::*;

    fn pw(x: f64, e: f64) -> f64 {
        if e == 0.0 {
            1.0
        } else {
            x.powf(e)
        }
    }

    /// Double loop over all interval pairs.
    fn brute(scheme: &ObservationScheme, stat: PairStatistic, rate: f64, t: f64) -> f64 {
        let a = scheme.times(Component::One);
        let b = scheme.times(Component::Two);
        let t_end = scheme.horizon();
        let (kind, [e1, e2, e3]) = stat.exponents();
        let mut s = 0.0;
        for i in 1..a.len() {
            for j in 1..b.len() {
                let right = a[i].max(b[j]);
                if right > t_end || right > t {
                    continue;
                }
                let ov = a[i].min(b[j]) - a[i - 1].max(b[j - 1]);
                if ov <= 0.0 {
                    continue;
                }
                let (l1, l2) = (a[i] - a[i - 1], b[j] - b[j - 1]);
                let (x, y) = match kind {
                    Lengths::Full => (l1, l2),
                    Lengths::Difference => ((l1 - ov).max(0.0), (l2 - ov).max(0.0)),
                };
                s += pw(x, e1) * pw(y, e2) * pw(ov, e3);
            }
        }
        stat.rate_factor(rate) * s
    }

    fn assert_nondecreasing_from_zero(f: &StepFunction) {
        assert_eq!(f.breakpoints()[0], 0.0);
        assert_eq!(f.values()[0], 0.0);
        assert!(f.is_nondecreasing());
    }

    #[test]
    fn onedim_equidistant() {
        let s = generate_scheme(&SchemeSpec::EquidistantSync { n: 50 }, 1.0, 0).unwrap();
        for p in [0.5, 1.0, 2.0, 4.0] {
            let g = g_onedim(&s, Component::One, p, 50.0).unwrap();
            assert_nondecreasing_from_zero(&g);
            assert!((g.last_value() - 1.0).abs() < 1e-12, "{p}");
            assert!((g.eval(0.5) - 0.5).abs() < 1e-12);
        }
        // p = 2 telescopes whatever the rate
        let g = g_onedim(&s, Component::Two, 2.0, 7.0).unwrap();
        assert!((g.eval(0.33) - 0.32).abs() < 1e-12);
    }

    #[test]
    fn synchronous_pair_statistics() {
        let n = 40;
        let s = generate_scheme(&SchemeSpec::EquidistantSync { n }, 1.0, 0).unwrap();
        let r = n as f64;
        assert!((g_cross_total(&s, 2.0, 2.0, r).unwrap() - 1.0).abs() < 1e-12);
        assert!((g_cross_total(&s, 1.0, 1.0, r).unwrap() - 1.0).abs() < 1e-12);
        assert!((g_kmp_total(&s, 2, 2, 4.0, r).unwrap() - 1.0).abs() < 1e-12);
        let h = h_stat(&s, 0, 0, 2.0, r).unwrap();
        assert!((h.eval(0.5) - 0.5).abs() < 1e-12);
        for (k, m) in [(2, 0), (0, 2), (2, 2)] {
            assert_eq!(h_stat_total(&s, k, m, 4.0, r).unwrap(), 0.0);
        }
        let p = generate_scheme(&SchemeSpec::PoissonSync { n: 40, lambda: 1.0 }, 1.0, 3).unwrap();
        let h = h_stat_total(&p, 0, 0, 3.0, r).unwrap();
        let g = g_onedim_total(&p, Component::One, 3.0, r).unwrap();
        assert!((h - g).abs() < 1e-12 * g);
    }

    #[test]
    fn parameter_errors() {
        let s = generate_scheme(&SchemeSpec::EquidistantSync { n: 4 }, 1.0, 0).unwrap();
        assert!(matches!(
            h_stat(&s, 2, 2, 3.0, 4.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            g_kmp(&s, 4, 0, 2.0, 4.0),
            Err(Error::Parameter(_))
        ));
        assert!(g_cross(&s, 1.0, 1.0, 0.0).is_err());
        assert!(overlap_power_sum(&s, 0.0, 1.0).is_err());
    }

    #[test]
    fn hand_computed_h() {
        // I¹ = (0, .5], (.5, 1]; I² = (0, .3], (.3, .8], (.8, 1.2]
        let s = ObservationScheme::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.3, 0.8, 1.2], 1.0).unwrap();
        // pairs entering by T=1: (1,1) at .5, (1,2) at .8, (2,2) at 1; (2,3) at 1.2 is cut
        let h = h_stat(&s, 2, 0, 2.0, 1.0).unwrap();
        assert_eq!(h.breakpoints(), &[0.0, 0.5, 0.8, 1.0]);
        // |I¹\I²| for the three pairs: .2, .3, .2
        assert!((h.eval(0.5) - 0.2).abs() < 1e-15);
        assert!((h.eval(0.9) - 0.5).abs() < 1e-15);
        assert!((h.last_value() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn condition_bounds() {
        for (n, seed) in [(50u64, 1u64), (400, 2)] {
            let s = generate_scheme(
                &SchemeSpec::Poisson {
                    n,
                    lambda1: 1.0,
                    lambda2: 2.0,
                },
                1.0,
                seed,
            )
            .unwrap();
            let v = overlap_power_sum(&s, 2.5, 2.5).unwrap();
            assert!(v <= 3.0 * mesh(&s) * 1.0);
        }
        let s = generate_scheme(&SchemeSpec::EquidistantSync { n: 1000 }, 1.0, 0).unwrap();
        let v = overlap_power_sum(&s, 0.9, 0.9).unwrap();
        assert!((v - 1000f64.powf(0.1)).abs() < 1e-9);
    }

    #[test]
    fn regular_total_matches_explicit() {
        let reg =
            generate_scheme(&SchemeSpec::EquidistantAsync { n: 20, gamma: 0.5 }, 1.0, 0).unwrap();
        let exp = ObservationScheme::new(reg.times(Component::One), reg.times(Component::Two), 1.0)
            .unwrap();
        for stat in [
            PairStatistic::Cross { p1: 1.5, p2: 1.5 },
            PairStatistic::H { k: 2, m: 0, p: 3.0 },
            PairStatistic::Gkmp { k: 2, m: 2, p: 6.0 },
        ] {
            let a = pair_statistic_total(&reg, stat, 20.0).unwrap();
            let b = pair_statistic_total(&exp, stat, 20.0).unwrap();
            assert!((a - b).abs() <= 1e-9 * b.abs(), "{stat:?}: {a} vs {b}");
        }
    }

    fn explicit_scheme() -> impl Strategy<Value = ObservationScheme> {
        let grid = || {
            proptest::collection::vec(0.001f64..1.0, 1..100).prop_map(|mut v| {
                v.push(0.0);
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            })
        };
        (grid(), grid(), 0.2f64..1.2).prop_map(|(a, b, t)| ObservationScheme::new(a, b, t).unwrap())
    }

    #[test]
    fn poisson_square_root_sum_is_stable_and_linear() {
        let mean = |n: u64| -> (f64, f64) {
            let (mut total, mut half) = (0.0, 0.0);
            for seed in 0..8 {
                let spec = SchemeSpec::Poisson {
                    n,
                    lambda1: 1.0,
                    lambda2: 2.0,
                };
                let s = generate_scheme(&spec, 1.0, seed).unwrap();
                let g = g_cross(&s, 1.0, 1.0, 1.0).unwrap();
                total += g.last_value();
                half += g.eval(0.5);
            }
            (total / 8.0, half / 8.0)
        };
        let (a, _) = mean(1000);
        let (b, b_half) = mean(16_000);
        assert!((a / b - 1.0).abs() < 0.03, "{a} vs {b}");
        assert!((b_half / b - 0.5).abs() < 0.01);
    }

    fn stats() -> impl Strategy<Value = PairStatistic> {
        prop_oneof![
            (0.0f64..4.0, 0.0f64..4.0).prop_map(|(p1, p2)| PairStatistic::Cross { p1, p2 }),
            (0u32..3, 0u32..3, 0.0f64..3.0).prop_map(|(k, m, extra)| PairStatistic::H {
                k: 2 * k,
                m: 2 * m,
                p: (2 * (k + m)) as f64 + extra
            }),
            (0u32..3, 0u32..3, 0.0f64..3.0).prop_map(|(k, m, extra)| PairStatistic::Gkmp {
                k: 2 * k,
                m: 2 * m,
                p: (2 * (k + m)) as f64 + extra
            }),
            (0.1f64..4.0, 0.1f64..4.0).prop_map(|(p1, p2)| PairStatistic::OverlapPower { p1, p2 }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn sweep_matches_double_loop(s in explicit_scheme(), stat in stats(), rate in 1.0f64..500.0) {
            let f = pair_statistic(&s, stat, rate).unwrap();
            prop_assert!(f.is_nondecreasing());
            for &t in f.breakpoints() {
                let b = brute(&s, stat, rate, t);
                prop_assert!((f.eval(t) - b).abs() <= 1e-12 * b.abs().max(1e-300), "{t}: {} vs {b}", f.eval(t));
            }
            let total = pair_statistic_total(&s, stat, rate).unwrap();
            prop_assert!((total - f.last_value()).abs() <= 1e-12 * total.abs());
        }

        #[test]
        fn g22_decomposes_into_h(s in explicit_scheme(), extra in 0.0f64..3.0, rate in 1.0f64..500.0) {
            let p = 4.0 + extra;
            let g = g_kmp(&s, 2, 2, p, rate).unwrap();
            let parts: Vec<StepFunction> = [(0, 0), (0, 2), (2, 0), (2, 2)]
                .iter()
                .map(|&(k, m)| h_stat(&s, k, m, p, rate).unwrap())
                .collect();
            for &t in g.breakpoints() {
                let sum: f64 = parts.iter().map(|h| h.eval(t)).sum();
                prop_assert!((g.eval(t) - sum).abs() <= 1e-12 * sum.abs().max(1e-300));
            }
        }

        #[test]
        fn cross_dominates_full_overlap(s in explicit_scheme(), p1 in 0.0f64..3.0, p2 in 0.0f64..3.0) {
            let g = g_cross(&s, p1, p2, 10.0).unwrap();
            let h = h_stat(&s, 0, 0, p1 + p2, 10.0).unwrap();
            for &t in g.breakpoints() {
                prop_assert!(g.eval(t) >= h.eval(t) * (1.0 - 1e-12));
            }
        }

        #[test]
        fn onedim_decreasing_in_p(s in explicit_scheme(), p in 0.0f64..4.0, dp in 0.01f64..2.0) {
            let a = g_onedim(&s, Component::One, p, 1.0).unwrap();
            let b = g_onedim(&s, Component::One, p + dp, 1.0).unwrap();
            for &t in a.breakpoints() {
                prop_assert!(b.eval(t) <= a.eval(t) * (1.0 + 1e-12));
            }
        }
    }
}
