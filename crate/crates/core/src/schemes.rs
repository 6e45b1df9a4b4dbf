//! Observation schemes: two increasing sequences of observation times starting
//! at 0, the interval-overlap sweep and scheme diagnostics.
//!
//! Observation intervals are half-open, `I_i = (t_{i-1}, t_i]`, so intervals that
//! only share an endpoint do not overlap. Generated sequences always reach or
//! pass the horizon; the `t_i ∨ t_j <= T` cut is applied by the consumers.

use std::fmt::Write as _;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Component;
use crate::rng::{substream, Stream};

/// One component's observation times.
///
/// Regular grids `t_i = i / denom` are kept implicit so that very fine grids
/// (billions of points) can be swept without being materialised.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeGrid {
    Regular { denom: f64, len: usize },
    Explicit(Vec<f64>),
}

impl TimeGrid {
    /// Regular grid with spacing `1/denom` covering `[0, horizon]`.
    pub fn regular(denom: f64, horizon: f64) -> Self {
        let mut last = (horizon * denom).ceil() as usize;
        if (last as f64) / denom < horizon {
            last += 1;
        }
        TimeGrid::Regular {
            denom,
            len: last + 1,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        match self {
            TimeGrid::Regular { len, .. } => *len,
            TimeGrid::Explicit(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            TimeGrid::Regular { denom, .. } => i as f64 / denom,
            TimeGrid::Explicit(v) => v[i],
        }
    }

    pub fn last(&self) -> f64 {
        self.get(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
    }

    /// Number of observation times `<= t`.
    pub fn count_le(&self, t: f64) -> usize {
        match self {
            TimeGrid::Explicit(v) => v.partition_point(|&u| u <= t),
            TimeGrid::Regular { denom, len } => {
                if t < 0.0 {
                    return 0;
                }
                let mut k = ((t * denom).floor() as usize).min(len - 1) + 1;
                while k > 0 && self.get(k - 1) > t {
                    k -= 1;
                }
                while k < *len && self.get(k) <= t {
                    k += 1;
                }
                k
            }
        }
    }

    /// Smallest observation time strictly greater than `t`.
    pub fn first_after(&self, t: f64) -> Option<f64> {
        let k = self.count_le(t);
        (k < self.len()).then(|| self.get(k))
    }
}

/// A pair of observation sequences with `t_0 = 0` for both components.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationScheme {
    grids: [TimeGrid; 2],
    horizon: f64,
}

impl ObservationScheme {
    pub fn new(times1: Vec<f64>, times2: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::from_grids(
            TimeGrid::Explicit(times1),
            TimeGrid::Explicit(times2),
            horizon,
        )
    }

    pub fn from_grids(g1: TimeGrid, g2: TimeGrid, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::input("horizon must be positive and finite"));
        }
        for (l, g) in [&g1, &g2].into_iter().enumerate() {
            match g {
                TimeGrid::Regular { denom, len } => {
                    if !(*denom > 0.0 && denom.is_finite()) || *len == 0 {
                        return Err(Error::input("regular grid needs a positive spacing"));
                    }
                }
                TimeGrid::Explicit(v) => {
                    if v.first() != Some(&0.0) {
                        return Err(Error::input(format!(
                            "component {} must start with an observation at 0",
                            l + 1
                        )));
                    }
                    if v.windows(2).any(|w| !(w[0] < w[1])) || v.iter().any(|t| !t.is_finite()) {
                        return Err(Error::input(format!(
                            "component {} times must be finite and strictly increasing",
                            l + 1
                        )));
                    }
                }
            }
        }
        Ok(Self {
            grids: [g1, g2],
            horizon,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid(&self, l: Component) -> &TimeGrid {
        &self.grids[l.index()]
    }

    pub fn times(&self, l: Component) -> Vec<f64> {
        self.grid(l).to_vec()
    }

    /// Whether both components reach the horizon.
    pub fn covers_horizon(&self) -> bool {
        self.grids.iter().all(|g| g.last() >= self.horizon)
    }

    pub fn is_synchronous(&self) -> bool {
        let [a, b] = &self.grids;
        a == b || (a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x == y))
    }

    /// Components exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            grids: [self.grids[1].clone(), self.grids[0].clone()],
            horizon: self.horizon,
        }
    }

    /// All observation times `<= T` of both components, sorted and deduplicated.
    pub fn times_up_to_horizon(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.grids {
            out.extend(g.iter().take_while(|&t| t <= self.horizon));
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Number of observation times `<= T` of both components.
    pub fn observations_up_to_horizon(&self) -> usize {
        self.grids.iter().map(|g| g.count_le(self.horizon)).sum()
    }

    /// Two-column text form: one `component time` line per observation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (l, g) in self.grids.iter().enumerate() {
            for t in g.iter() {
                writeln!(s, "{} {}", l + 1, t).expect("writing to a String");
            }
        }
        s
    }

    /// Parse the two-column text form. Blank lines and `#` comments are ignored.
    pub fn from_text(text: &str, horizon: f64) -> Result<Self> {
        let mut times: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(c), Some(t), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::input(format!(
                    "line {}: expected `component time`",
                    lineno + 1
                )));
            };
            let l: u8 = c
                .parse()
                .map_err(|_| Error::input(format!("line {}: bad component {c:?}", lineno + 1)))?;
            let l = Component::try_from(l)?;
            let t: f64 = t
                .parse()
                .map_err(|_| Error::input(format!("line {}: bad time {t:?}", lineno + 1)))?;
            times[l.index()].push(t);
        }
        let [t1, t2] = times;
        Self::new(t1, t2, horizon)
    }
}

/// Parametrised observation scheme families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    /// `t_i = i/n` for both components.
    EquidistantSync {
        n: u64,
    },
    /// `t¹_i = i/n`, `t²_i = i/n^{1+γ}`.
    EquidistantAsync {
        n: u64,
        gamma: f64,
    },
    /// `t¹_i = i/n`; `t²_i = i/n` for even `n` and `i/(2n)` for odd `n`.
    Oscillating {
        n: u64,
    },
    /// Jump times of independent Poisson processes with rates `nλ₁`, `nλ₂`.
    Poisson {
        n: u64,
        lambda1: f64,
        lambda2: f64,
    },
    /// Both components observed at the jump times of one Poisson process of rate `nλ`.
    PoissonSync {
        n: u64,
        lambda: f64,
    },
    Explicit {
        times1: Vec<f64>,
        times2: Vec<f64>,
    },
}

impl SchemeSpec {
    fn validate(&self) -> Result<()> {
        let n = match self {
            SchemeSpec::EquidistantSync { n }
            | SchemeSpec::EquidistantAsync { n, .. }
            | SchemeSpec::Oscillating { n }
            | SchemeSpec::Poisson { n, .. }
            | SchemeSpec::PoissonSync { n, .. } => *n,
            SchemeSpec::Explicit { .. } => 1,
        };
        if n == 0 {
            return Err(Error::param("scheme parameter n must be at least 1"));
        }
        match *self {
            SchemeSpec::EquidistantAsync { gamma, .. } if !(gamma >= 0.0 && gamma.is_finite()) => {
                Err(Error::param("gamma must be nonnegative"))
            }
            SchemeSpec::Poisson {
                lambda1, lambda2, ..
            } if !(lambda1 > 0.0
                && lambda2 > 0.0
                && lambda1.is_finite()
                && lambda2.is_finite()) =>
            {
                Err(Error::param("Poisson intensities must be positive"))
            }
            SchemeSpec::PoissonSync { lambda, .. } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::param("Poisson intensity must be positive"))
            }
            _ => Ok(()),
        }
    }
}

fn poisson_times(rate: f64, horizon: f64, seed: u64, stream: Stream) -> Vec<f64> {
    let mut rng = substream(seed, stream);
    let gap = Exp::new(rate).expect("validated rate");
    let mut times = vec![0.0];
    let mut t = 0.0;
    while t < horizon {
        let next = t + gap.sample(&mut rng);
        // a zero gap would break strict monotonicity
        if next > t {
            t = next;
            times.push(t);
        }
    }
    times
}

/// Build the observation scheme described by `spec` on `[0, horizon]`.
/// Deterministic families ignore `seed`.
pub fn generate_scheme(spec: &SchemeSpec, horizon: f64, seed: u64) -> Result<ObservationScheme> {
    spec.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::input("horizon must be positive and finite"));
    }
    let (g1, g2) = match spec {
        SchemeSpec::EquidistantSync { n } => {
            let g = TimeGrid::regular(*n as f64, horizon);
            (g.clone(), g)
        }
        SchemeSpec::EquidistantAsync { n, gamma } => {
            let n = *n as f64;
            (
                TimeGrid::regular(n, horizon),
                TimeGrid::regular(n.powf(1.0 + gamma), horizon),
            )
        }
        SchemeSpec::Oscillating { n } => {
            let d2 = if n % 2 == 0 { *n } else { 2 * n };
            (
                TimeGrid::regular(*n as f64, horizon),
                TimeGrid::regular(d2 as f64, horizon),
            )
        }
        SchemeSpec::Poisson {
            n,
            lambda1,
            lambda2,
        } => {
            let n = *n as f64;
            (
                TimeGrid::Explicit(poisson_times(
                    n * lambda1,
                    horizon,
                    seed,
                    Stream::SchemeComponent1,
                )),
                TimeGrid::Explicit(poisson_times(
                    n * lambda2,
                    horizon,
                    seed,
                    Stream::SchemeComponent2,
                )),
            )
        }
        SchemeSpec::PoissonSync { n, lambda } => {
            let g = TimeGrid::Explicit(poisson_times(
                *n as f64 * lambda,
                horizon,
                seed,
                Stream::SchemeComponent1,
            ));
            (g.clone(), g)
        }
        SchemeSpec::Explicit { times1, times2 } => (
            TimeGrid::Explicit(times1.clone()),
            TimeGrid::Explicit(times2.clone()),
        ),
    };
    ObservationScheme::from_grids(g1, g2, horizon)
}

/// Largest gap `t_i ∧ T - t_{i-1} ∧ T` over both components.
pub fn mesh(scheme: &ObservationScheme) -> f64 {
    let t_end = scheme.horizon;
    scheme
        .grids
        .iter()
        .map(|g| match g {
            // every gap of a regular grid is 1/denom up to rounding
            TimeGrid::Regular { .. } => g.get(1.min(g.len() - 1)).min(t_end),
            TimeGrid::Explicit(v) => v
                .windows(2)
                .map(|w| w[1].min(t_end) - w[0].min(t_end))
                .fold(0.0, f64::max),
        })
        .fold(0.0, f64::max)
}

/// A pair of overlapping observation intervals `I¹_i = (start1, end1]` and
/// `I²_j = (start2, end2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapPair {
    pub i: usize,
    pub j: usize,
    pub start1: f64,
    pub end1: f64,
    pub start2: f64,
    pub end2: f64,
}

impl OverlapPair {
    #[inline]
    pub fn len1(&self) -> f64 {
        self.end1 - self.start1
    }

    #[inline]
    pub fn len2(&self) -> f64 {
        self.end2 - self.start2
    }

    /// `|I¹_i ∩ I²_j|`
    #[inline]
    pub fn overlap(&self) -> f64 {
        self.end1.min(self.end2) - self.start1.max(self.start2)
    }

    /// `|I¹_i \ I²_j|`
    #[inline]
    pub fn only1(&self) -> f64 {
        (self.len1() - self.overlap()).max(0.0)
    }

    /// `|I²_j \ I¹_i|`
    #[inline]
    pub fn only2(&self) -> f64 {
        (self.len2() - self.overlap()).max(0.0)
    }

    /// `t¹_i ∨ t²_j`, the time at which the pair enters the summation.
    #[inline]
    pub fn right(&self) -> f64 {
        self.end1.max(self.end2)
    }
}

trait GridAccess {
    fn size(&self) -> usize;
    fn at(&self, i: usize) -> f64;
}

struct RegularAccess {
    denom: f64,
    len: usize,
}

impl GridAccess for RegularAccess {
    #[inline(always)]
    fn size(&self) -> usize {
        self.len
    }
    #[inline(always)]
    fn at(&self, i: usize) -> f64 {
        i as f64 / self.denom
    }
}

impl GridAccess for &[f64] {
    #[inline(always)]
    fn size(&self) -> usize {
        self.len()
    }
    #[inline(always)]
    fn at(&self, i: usize) -> f64 {
        self[i]
    }
}

#[inline(always)]
fn sweep<A: GridAccess, B: GridAccess, F: FnMut(&OverlapPair)>(
    g1: A,
    g2: B,
    cut: Option<f64>,
    visit: &mut F,
) {
    let (n1, n2) = (g1.size(), g2.size());
    if n1 < 2 || n2 < 2 {
        return;
    }
    let limit = cut.unwrap_or(f64::INFINITY);
    let mut pair = OverlapPair {
        i: 1,
        j: 1,
        start1: g1.at(0),
        end1: g1.at(1),
        start2: g2.at(0),
        end2: g2.at(1),
    };
    loop {
        // t_i ∨ t_j is nondecreasing along the sweep
        if pair.right() > limit {
            break;
        }
        visit(&pair);
        let (a, b) = (pair.end1, pair.end2);
        if a <= b {
            pair.i += 1;
            if pair.i >= n1 {
                break;
            }
            pair.start1 = a;
            pair.end1 = g1.at(pair.i);
        }
        if b <= a {
            pair.j += 1;
            if pair.j >= n2 {
                break;
            }
            pair.start2 = b;
            pair.end2 = g2.at(pair.j);
        }
    }
}

/// Visit every pair `(i, j)`, `i, j >= 1`, with `I¹_i ∩ I²_j ≠ ∅`, in sweep
/// order (nondecreasing `t_i ∨ t_j`). With `cut = Some(T)` only pairs with
/// `t_i ∨ t_j <= T` are visited. Linear in the number of intervals plus pairs.
pub fn for_each_overlap<F: FnMut(&OverlapPair)>(
    scheme: &ObservationScheme,
    cut: Option<f64>,
    mut visit: F,
) {
    use TimeGrid::*;
    match (&scheme.grids[0], &scheme.grids[1]) {
        (Regular { denom: d1, len: l1 }, Regular { denom: d2, len: l2 }) => sweep(
            RegularAccess {
                denom: *d1,
                len: *l1,
            },
            RegularAccess {
                denom: *d2,
                len: *l2,
            },
            cut,
            &mut visit,
        ),
        (Regular { denom, len }, Explicit(v)) => sweep(
            RegularAccess {
                denom: *denom,
                len: *len,
            },
            v.as_slice(),
            cut,
            &mut visit,
        ),
        (Explicit(v), Regular { denom, len }) => sweep(
            v.as_slice(),
            RegularAccess {
                denom: *denom,
                len: *len,
            },
            cut,
            &mut visit,
        ),
        (Explicit(a), Explicit(b)) => sweep(a.as_slice(), b.as_slice(), cut, &mut visit),
    }
}

/// Index pairs `(i, j)` of overlapping intervals with `t¹_i ∨ t²_j <= T`.
pub fn overlap_pairs(scheme: &ObservationScheme) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for_each_overlap(scheme, Some(scheme.horizon), |p| out.push((p.i, p.j)));
    out
}

/// `max_l sup_{i: t^{(l)}_i <= T} #{j : I^{(l)}_i ∩ I^{(3-l)}_j ≠ ∅}`.
pub fn max_overlap_count(scheme: &ObservationScheme) -> usize {
    let t_end = scheme.horizon;
    // pairs sharing an i (or a j) are contiguous in sweep order
    let mut run = [(0usize, 0usize, 0.0f64); 2];
    let mut best = 0usize;
    let close = |r: &(usize, usize, f64), best: &mut usize| {
        if r.0 > 0 && r.2 <= t_end {
            *best = (*best).max(r.1);
        }
    };
    let mut done = false;
    for_each_overlap(scheme, None, |p| {
        if done {
            return;
        }
        if p.start1 >= t_end && p.start2 >= t_end {
            done = true;
            return;
        }
        for (slot, idx, end) in [(0, p.i, p.end1), (1, p.j, p.end2)] {
            if run[slot].0 == idx {
                run[slot].1 += 1;
            } else {
                close(&run[slot], &mut best);
                run[slot] = (idx, 1, end);
            }
        }
    });
    close(&run[0], &mut best);
    close(&run[1], &mut best);
    best
}

/// Result of [`alternating_subsample`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingSubsample {
    pub scheme: ObservationScheme,
    /// One component ran out of observations before the horizon was covered.
    pub truncated: bool,
}

/// Thin a scheme so that the two components are observed alternately.
///
/// Starts with the first strictly positive observation of component 1, then
/// repeatedly takes the first observation of the other component strictly after
/// the last selected time, until both components reach the horizon.
pub fn alternating_subsample(scheme: &ObservationScheme) -> AlternatingSubsample {
    let t_end = scheme.horizon;
    let mut out: [Vec<f64>; 2] = [vec![0.0], vec![0.0]];
    let mut truncated = false;
    match scheme.grids[0].first_after(0.0) {
        None => truncated = true,
        Some(first) => {
            out[0].push(first);
            let mut current = first;
            let mut turn = 1;
            while !(out[0].last().unwrap() >= &t_end && out[1].last().unwrap() >= &t_end) {
                match scheme.grids[turn].first_after(current) {
                    Some(t) => {
                        out[turn].push(t);
                        current = t;
                        turn = 1 - turn;
                    }
                    None => {
                        truncated = true;
                        break;
                    }
                }
            }
        }
    }
    let [t1, t2] = out;
    AlternatingSubsample {
        scheme: ObservationScheme::new(t1, t2, t_end).expect("subsequence of a valid scheme"),
        truncated,
    }
}
