//! Bivariate Itô semimartingales with deterministic piecewise-constant
//! coefficients and finite-activity jumps, sampled exactly.
//!
//! The continuous part is
//!
//! ```text
//! dX¹ = b¹ ds + σ¹ dW¹
//! dX² = b² ds + σ² (ρ dW¹ + √(1-ρ²) dW²)
//! ```
//!
//! with `b`, `σ`, `ρ` right-continuous step functions of time. Between two
//! consecutive sampled times no coefficient changes, so every increment is an
//! exact bivariate Gaussian draw plus the exact drift integral. Jumps come from
//! a deterministic list and an optional compound Poisson component.

use rand::RngExt;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Symmetric 2×2 matrix stored row-major.
pub type Matrix2 = [[f64; 2]; 2];

/// Component selector for the bivariate process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Component {
    One,
    Two,
}

impl Component {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Component::One => 0,
            Component::Two => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Component::One => Component::Two,
            Component::Two => Component::One,
        }
    }
}

impl TryFrom<u8> for Component {
    type Error = Error;

    fn try_from(l: u8) -> Result<Self> {
        match l {
            1 => Ok(Component::One),
            2 => Ok(Component::Two),
            other => Err(Error::input(format!(
                "component must be 1 or 2, got {other}"
            ))),
        }
    }
}

impl From<Component> for u8 {
    fn from(c: Component) -> u8 {
        c.index() as u8 + 1
    }
}

/// Right-continuous piecewise-constant function of time. Piece `k` covers
/// `[breakpoints[k], breakpoints[k+1])`, the last piece extends to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct Schedule {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScheduleRepr {
    Constant(f64),
    Pieces {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl TryFrom<ScheduleRepr> for Schedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        match r {
            ScheduleRepr::Constant(v) => Schedule::new(vec![0.0], vec![v]),
            ScheduleRepr::Pieces {
                breakpoints,
                values,
            } => Schedule::new(breakpoints, values),
        }
    }
}

impl From<Schedule> for ScheduleRepr {
    fn from(s: Schedule) -> Self {
        if s.values.len() == 1 {
            ScheduleRepr::Constant(s.values[0])
        } else {
            ScheduleRepr::Pieces {
                breakpoints: s.breakpoints,
                values: s.values,
            }
        }
    }
}

impl Schedule {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::input(
                "schedule needs one value per breakpoint and at least one piece",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::input("schedule must start at time 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::input(
                "schedule breakpoints must be strictly increasing",
            ));
        }
        if values.iter().chain(&breakpoints).any(|v| !v.is_finite()) {
            return Err(Error::input("schedule contains a non-finite number"));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    /// Value of the piece containing `t`.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.values[k.saturating_sub(1)]
    }
}

/// A jump `ΔX_s` at time `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub size: [f64; 2],
}

impl JumpEvent {
    pub fn new(time: f64, size: [f64; 2]) -> Self {
        Self { time, size }
    }

    /// Both components jump.
    pub fn is_common(&self) -> bool {
        self.size[0] * self.size[1] != 0.0
    }
}

/// Distribution of a single component's jump size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpSizeLaw {
    Constant { value: f64 },
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl JumpSizeLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpSizeLaw::Constant { value } => value != 0.0 && value.is_finite(),
            JumpSizeLaw::Normal { mean, std } => {
                mean.is_finite() && std.is_finite() && std >= 0.0 && (std > 0.0 || mean != 0.0)
            }
            JumpSizeLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("degenerate jump size law {self:?}")))
        }
    }

    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpSizeLaw::Constant { value } => value,
            JumpSizeLaw::Normal { mean, std } => Normal::new(mean, std)
                .expect("validated normal law")
                .sample(rng),
            JumpSizeLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

/// Compound Poisson jump component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonJumps {
    pub intensity: f64,
    pub size1: JumpSizeLaw,
    pub size2: JumpSizeLaw,
    /// Probability that an event moves both components.
    #[serde(default)]
    pub common_prob: f64,
}

fn zero_drift() -> [Schedule; 2] {
    [Schedule::constant(0.0), Schedule::constant(0.0)]
}

fn unit_vol() -> Schedule {
    Schedule::constant(1.0)
}

fn zero_corr() -> Schedule {
    Schedule::constant(0.0)
}

/// Parametric description of the bivariate process on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct SemimartingaleSpec {
    pub x0: [f64; 2],
    pub drift: [Schedule; 2],
    pub vol1: Schedule,
    pub vol2: Schedule,
    pub corr: Schedule,
    pub scheduled_jumps: Vec<JumpEvent>,
    pub poisson_jumps: Option<PoissonJumps>,
    pub horizon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    x0: [f64; 2],
    #[serde(default = "zero_drift")]
    drift: [Schedule; 2],
    #[serde(default = "unit_vol")]
    vol1: Schedule,
    #[serde(default = "unit_vol")]
    vol2: Schedule,
    #[serde(default = "zero_corr")]
    corr: Schedule,
    #[serde(default)]
    scheduled_jumps: Vec<JumpEvent>,
    #[serde(default)]
    poisson_jumps: Option<PoissonJumps>,
    horizon: f64,
}

impl TryFrom<RawSpec> for SemimartingaleSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        let spec = SemimartingaleSpec {
            x0: r.x0,
            drift: r.drift,
            vol1: r.vol1,
            vol2: r.vol2,
            corr: r.corr,
            scheduled_jumps: r.scheduled_jumps,
            poisson_jumps: r.poisson_jumps,
            horizon: r.horizon,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl SemimartingaleSpec {
    /// Driftless correlated Brownian motion with constant coefficients.
    pub fn brownian(horizon: f64, vol1: f64, vol2: f64, corr: f64) -> Self {
        Self {
            x0: [0.0; 2],
            drift: zero_drift(),
            vol1: Schedule::constant(vol1),
            vol2: Schedule::constant(vol2),
            corr: Schedule::constant(corr),
            scheduled_jumps: Vec::new(),
            poisson_jumps: None,
            horizon,
        }
    }

    /// Pure scheduled-jump process (no diffusion, no drift).
    pub fn pure_jump(horizon: f64, jumps: Vec<JumpEvent>) -> Self {
        Self {
            scheduled_jumps: jumps,
            ..Self::brownian(horizon, 0.0, 0.0, 0.0)
        }
    }

    pub fn with_drift(mut self, b1: Schedule, b2: Schedule) -> Self {
        self.drift = [b1, b2];
        self
    }

    pub fn with_vols(mut self, vol1: Schedule, vol2: Schedule) -> Self {
        self.vol1 = vol1;
        self.vol2 = vol2;
        self
    }

    pub fn with_corr(mut self, corr: Schedule) -> Self {
        self.corr = corr;
        self
    }

    pub fn with_jumps(mut self, jumps: Vec<JumpEvent>) -> Self {
        self.scheduled_jumps = jumps;
        self
    }

    pub fn with_poisson_jumps(mut self, p: PoissonJumps) -> Self {
        self.poisson_jumps = Some(p);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let t_end = self.horizon;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::input("horizon must be positive and finite"));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("x0 must be finite"));
        }
        for s in self.schedules() {
            if s.breakpoints.iter().any(|&b| b > t_end) {
                return Err(Error::input("schedule breakpoint beyond the horizon"));
            }
        }
        if self
            .vol1
            .values
            .iter()
            .chain(&self.vol2.values)
            .any(|&v| v < 0.0)
        {
            return Err(Error::input("volatilities must be nonnegative"));
        }
        if self.corr.values.iter().any(|&r| !(-1.0..=1.0).contains(&r)) {
            return Err(Error::input("correlation must lie in [-1, 1]"));
        }
        for w in self.scheduled_jumps.windows(2) {
            if !(w[0].time < w[1].time) {
                return Err(Error::input(
                    "scheduled jump times must be strictly increasing",
                ));
            }
        }
        for j in &self.scheduled_jumps {
            if !(j.time > 0.0 && j.time <= t_end) {
                return Err(Error::input(format!("jump time {} outside (0, T]", j.time)));
            }
            if j.size == [0.0, 0.0] || j.size.iter().any(|v| !v.is_finite()) {
                return Err(Error::input("jump size must be finite and nonzero"));
            }
        }
        if let Some(p) = &self.poisson_jumps {
            if !(p.intensity >= 0.0 && p.intensity.is_finite()) {
                return Err(Error::input("jump intensity must be nonnegative"));
            }
            if !(0.0..=1.0).contains(&p.common_prob) {
                return Err(Error::input("common-jump probability must lie in [0, 1]"));
            }
            p.size1.validate()?;
            p.size2.validate()?;
        }
        Ok(())
    }

    fn schedules(&self) -> [&Schedule; 5] {
        [
            &self.drift[0],
            &self.drift[1],
            &self.vol1,
            &self.vol2,
            &self.corr,
        ]
    }

    /// Sorted union of all coefficient breakpoints in `[0, T]`.
    pub fn coefficient_breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .schedules()
            .iter()
            .flat_map(|s| s.breakpoints.iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    /// Diffusion coefficients `(σ¹, σ², ρ)` at time `t`.
    #[inline]
    pub fn coefficients_at(&self, t: f64) -> (f64, f64, f64) {
        (
            self.vol1.value_at(t),
            self.vol2.value_at(t),
            self.corr.value_at(t),
        )
    }

    /// Instantaneous covariance `c_t = σ_t σ_t*`.
    pub fn spot_covariance(&self, t: f64) -> Matrix2 {
        let (s1, s2, rho) = self.coefficients_at(t);
        let c = rho * s1 * s2;
        [[s1 * s1, c], [c, s2 * s2]]
    }

    fn check_interval(&self, s: f64, t: f64) -> Result<()> {
        if !(0.0 <= s && s <= t && t <= self.horizon) {
            return Err(Error::Range(format!(
                "need 0 <= s <= t <= T, got s={s}, t={t}, T={}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Pieces of `[s, t]` on which every coefficient is constant.
    fn constant_pieces(&self, s: f64, t: f64) -> impl Iterator<Item = (f64, f64)> {
        let mut cuts = vec![s];
        cuts.extend(
            self.coefficient_breakpoints()
                .into_iter()
                .filter(|&b| s < b && b < t),
        );
        cuts.push(t);
        (0..cuts.len() - 1).map(move |k| (cuts[k], cuts[k + 1]))
    }

    /// `∫_s^t b_u du` for both components.
    pub fn drift_integral(&self, s: f64, t: f64) -> Result<[f64; 2]> {
        self.check_interval(s, t)?;
        let mut out = [0.0; 2];
        for (a, b) in self.constant_pieces(s, t) {
            out[0] += self.drift[0].value_at(a) * (b - a);
            out[1] += self.drift[1].value_at(a) * (b - a);
        }
        Ok(out)
    }
}

/// Covariance of the continuous martingale increment `C_t - C_s`.
pub fn covariance_on(spec: &SemimartingaleSpec, s: f64, t: f64) -> Result<Matrix2> {
    spec.check_interval(s, t)?;
    let (mut v1, mut v2, mut c) = (0.0, 0.0, 0.0);
    for (a, b) in spec.constant_pieces(s, t) {
        let (s1, s2, rho) = spec.coefficients_at(a);
        let dt = b - a;
        v1 += s1 * s1 * dt;
        v2 += s2 * s2 * dt;
        c += rho * s1 * s2 * dt;
    }
    Ok([[v1, c], [c, v2]])
}

/// Exact values of `X` at a finite set of times together with the realised jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub values: Vec<[f64; 2]>,
    pub jumps: Vec<JumpEvent>,
}

impl PathRecord {
    /// Position of `t` among the sampled times. Exact match only.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = self.times.partition_point(|&u| u < t);
        if k < self.times.len() && self.times[k] == t {
            Ok(k)
        } else {
            Err(Error::Lookup(t))
        }
    }

    pub fn value_at(&self, t: f64) -> Result<[f64; 2]> {
        Ok(self.values[self.index_of(t)?])
    }

    /// `X^{(l)}_t - X^{(l)}_s` for two sampled times.
    pub fn increment(&self, s: f64, t: f64, component: Component) -> Result<f64> {
        if s > t {
            return Err(Error::Range(format!(
                "increment needs s <= t, got s={s}, t={t}"
            )));
        }
        let l = component.index();
        Ok(self.values[self.index_of(t)?][l] - self.values[self.index_of(s)?][l])
    }

    /// Multiply the whole path (including `x0` and the jump ledger) by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self
                .values
                .iter()
                .map(|v| [v[0] * lambda, v[1] * lambda])
                .collect(),
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpEvent::new(j.time, [j.size[0] * lambda, j.size[1] * lambda]))
                .collect(),
        }
    }

    /// Path with the two components exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| [v[1], v[0]]).collect(),
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpEvent::new(j.time, [j.size[1], j.size[0]]))
                .collect(),
        }
    }
}

/// `free` function form of [`PathRecord::increment`].
pub fn increment(path: &PathRecord, s: f64, t: f64, component: Component) -> Result<f64> {
    path.increment(s, t, component)
}

fn poisson_events(spec: &SemimartingaleSpec, seed: u64) -> Vec<JumpEvent> {
    let Some(p) = &spec.poisson_jumps else {
        return Vec::new();
    };
    if p.intensity == 0.0 {
        return Vec::new();
    }
    let mut times_rng = substream(seed, Stream::JumpTimes);
    let gap = Exp::new(p.intensity).expect("validated intensity");
    let mut times = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut times_rng);
        if t > spec.horizon {
            break;
        }
        if t > 0.0 {
            times.push(t);
        }
    }

    let mut size_rng = substream(seed, Stream::JumpSizes);
    times
        .into_iter()
        .map(|time| {
            let common = size_rng.random::<f64>() < p.common_prob;
            let size = if common {
                [p.size1.sample(&mut size_rng), p.size2.sample(&mut size_rng)]
            } else if size_rng.random::<bool>() {
                [p.size1.sample(&mut size_rng), 0.0]
            } else {
                [0.0, p.size2.sample(&mut size_rng)]
            };
            JumpEvent::new(time, size)
        })
        .filter(|j| j.size != [0.0, 0.0])
        .collect()
}

/// Sample `X` exactly at `request_times` (plus 0, T, all coefficient breakpoints
/// and all jump times).
///
/// The seed fixes everything. Jump times, jump sizes and Gaussian increments use
/// separate sub-streams, so refining the request set leaves the jump ledger
/// untouched.
pub fn sample_path(
    spec: &SemimartingaleSpec,
    request_times: &[f64],
    seed: u64,
) -> Result<PathRecord> {
    spec.validate()?;
    let t_end = spec.horizon;
    if request_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::input("request times must be sorted"));
    }
    if let (Some(&first), Some(&last)) = (request_times.first(), request_times.last()) {
        if !(first >= 0.0 && last <= t_end) {
            return Err(Error::input(format!(
                "request times must lie in [0, {t_end}], got [{first}, {last}]"
            )));
        }
    }

    let mut jumps = spec.scheduled_jumps.clone();
    jumps.extend(poisson_events(spec, seed));
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut times = Vec::with_capacity(request_times.len() + jumps.len() + 8);
    times.extend_from_slice(request_times);
    times.push(0.0);
    times.push(t_end);
    times.extend(spec.coefficient_breakpoints());
    times.extend(jumps.iter().map(|j| j.time));
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut gauss = substream(seed, Stream::Gaussian);
    let mut values = Vec::with_capacity(times.len());
    let mut x = spec.x0;
    values.push(x);
    let mut next_jump = 0;
    for w in times.windows(2) {
        let (s, t) = (w[0], w[1]);
        let dt = t - s;
        // no coefficient changes inside (s, t)
        let (s1, s2, rho) = spec.coefficients_at(s);
        let z1: f64 = StandardNormal.sample(&mut gauss);
        let z2: f64 = StandardNormal.sample(&mut gauss);
        let sd = dt.sqrt();
        let w1 = sd * z1;
        let w2 = sd * (rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2);
        x[0] += spec.drift[0].value_at(s) * dt + s1 * w1;
        x[1] += spec.drift[1].value_at(s) * dt + s2 * w2;
        while next_jump < jumps.len() && jumps[next_jump].time <= t {
            x[0] += jumps[next_jump].size[0];
            x[1] += jumps[next_jump].size[1];
            next_jump += 1;
        }
        values.push(x);
    }

    Ok(PathRecord {
        times,
        values,
        jumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn covariance_constant_coefficients() {
        let spec = SemimartingaleSpec::brownian(2.0, 1.0, 1.0, 0.5);
        assert_eq!(
            covariance_on(&spec, 0.0, 2.0).unwrap(),
            [[2.0, 1.0], [1.0, 2.0]]
        );
        assert_eq!(covariance_on(&spec, 0.7, 0.7).unwrap(), [[0.0; 2]; 2]);
    }

    #[test]
    fn covariance_splits_at_breakpoints() {
        let vol1 = Schedule::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let spec = SemimartingaleSpec::brownian(2.0, 1.0, 1.0, 0.0)
            .with_vols(vol1, Schedule::constant(1.0));
        let c = covariance_on(&spec, 0.5, 1.5).unwrap();
        // fine Riemann sum of σ¹² over [0.5, 1.5]
        let n = 100_000;
        let h = 1.0 / n as f64;
        let riemann: f64 = (0..n)
            .map(|k| spec.vol1.value_at(0.5 + (k as f64 + 0.5) * h).powi(2) * h)
            .sum();
        // 0.5·1² + 0.5·2²
        assert!(close(riemann, 2.5, 1e-9));
        assert!(close(c[0][0], 2.5, 1e-15));
        assert!(close(c[1][1], 1.0, 1e-15));
        assert_eq!(c[0][1], 0.0);
    }

    #[test]
    fn covariance_rejects_bad_ranges() {
        let spec = SemimartingaleSpec::brownian(1.0, 1.0, 1.0, 0.0);
        assert!(matches!(
            covariance_on(&spec, -0.1, 0.5),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            covariance_on(&spec, 0.6, 0.5),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            covariance_on(&spec, 0.0, 1.5),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn pure_jump_path() {
        let spec = SemimartingaleSpec::pure_jump(1.0, vec![JumpEvent::new(0.4, [1.0, 2.0])]);
        let p = sample_path(&spec, &[0.0, 0.5, 1.0], 3).unwrap();
        assert_eq!(p.value_at(0.0).unwrap(), [0.0, 0.0]);
        assert_eq!(p.value_at(0.5).unwrap(), [1.0, 2.0]);
        assert_eq!(p.value_at(1.0).unwrap(), [1.0, 2.0]);
        assert_eq!(p.value_at(0.4).unwrap(), [1.0, 2.0]);
        assert_eq!(p.increment(0.0, 0.5, Component::Two).unwrap(), 2.0);
        assert_eq!(p.increment(0.5, 0.5, Component::One).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_drift_path() {
        let spec = SemimartingaleSpec::brownian(1.0, 0.0, 0.0, 0.0)
            .with_drift(Schedule::constant(1.0), Schedule::constant(0.0));
        let p = sample_path(&spec, &[0.0, 1.0], 0).unwrap();
        assert_eq!(p.values, vec![[0.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn increment_requires_sampled_times() {
        let spec = SemimartingaleSpec::brownian(1.0, 1.0, 1.0, 0.0);
        let p = sample_path(&spec, &[0.0, 0.5, 1.0], 1).unwrap();
        assert_eq!(
            p.increment(0.0, 0.25, Component::One),
            Err(Error::Lookup(0.25))
        );
    }

    #[test]
    fn increments_telescope() {
        let spec = SemimartingaleSpec::brownian(1.0, 1.3, 0.7, -0.2)
            .with_jumps(vec![JumpEvent::new(0.33, [0.5, -1.0])]);
        let req: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
        let p = sample_path(&spec, &req, 9).unwrap();
        for l in [Component::One, Component::Two] {
            let sum: f64 = req
                .windows(2)
                .map(|w| p.increment(w[0], w[1], l).unwrap())
                .sum();
            let total = p.increment(0.0, 1.0, l).unwrap();
            assert!(close(sum, total, 1e-12));
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let spec = SemimartingaleSpec::brownian(1.0, 1.0, 1.0, 0.0);
        assert!(matches!(
            sample_path(&spec, &[0.5, 0.2], 0),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            sample_path(&spec, &[0.0, 1.5], 0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn path_is_reproducible_and_jumps_stable_under_refinement() {
        let spec =
            SemimartingaleSpec::brownian(1.0, 1.0, 1.0, 0.3).with_poisson_jumps(PoissonJumps {
                intensity: 20.0,
                size1: JumpSizeLaw::Normal {
                    mean: 0.0,
                    std: 1.0,
                },
                size2: JumpSizeLaw::Uniform {
                    low: -1.0,
                    high: 2.0,
                },
                common_prob: 0.5,
            });
        let coarse = sample_path(&spec, &[0.0, 0.5, 1.0], 77).unwrap();
        let again = sample_path(&spec, &[0.0, 0.5, 1.0], 77).unwrap();
        assert_eq!(coarse, again);
        let fine: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let refined = sample_path(&spec, &fine, 77).unwrap();
        assert_eq!(coarse.jumps, refined.jumps);
        assert!(!coarse.jumps.is_empty());
        for j in &coarse.jumps {
            assert!(coarse.index_of(j.time).is_ok());
        }
    }

    #[test]
    fn common_jumps_move_both_components() {
        let spec = SemimartingaleSpec::pure_jump(1.0, vec![]).with_poisson_jumps(PoissonJumps {
            intensity: 30.0,
            size1: JumpSizeLaw::Constant { value: 1.0 },
            size2: JumpSizeLaw::Constant { value: -2.0 },
            common_prob: 0.4,
        });
        let p = sample_path(&spec, &[], 5).unwrap();
        for j in &p.jumps {
            let k = p.index_of(j.time).unwrap();
            let d = [
                p.values[k][0] - p.values[k - 1][0],
                p.values[k][1] - p.values[k - 1][1],
            ];
            assert_eq!(d, j.size);
        }
        assert!(p.jumps.iter().any(JumpEvent::is_common));
        assert!(p.jumps.iter().any(|j| !j.is_common()));
    }

    #[test]
    fn spec_validation() {
        let bad_corr = SemimartingaleSpec::brownian(1.0, 1.0, 1.0, 1.5);
        assert!(bad_corr.validate().is_err());
        let bad_vol = SemimartingaleSpec::brownian(1.0, -1.0, 1.0, 0.0);
        assert!(bad_vol.validate().is_err());
        let unsorted = SemimartingaleSpec::pure_jump(
            1.0,
            vec![
                JumpEvent::new(0.5, [1.0, 0.0]),
                JumpEvent::new(0.2, [1.0, 0.0]),
            ],
        );
        assert!(unsorted.validate().is_err());
        let late = SemimartingaleSpec::pure_jump(1.0, vec![JumpEvent::new(1.5, [1.0, 0.0])]);
        assert!(late.validate().is_err());
        assert!(Schedule::new(vec![0.1], vec![1.0]).is_err());
        assert!(Schedule::new(vec![0.0, 0.5, 0.5], vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn spec_from_toml() {
        let text = r#"
            horizon = 1.0
            vol1 = { breakpoints = [0.0, 0.5], values = [1.0, 2.0] }
            corr = 0.5
            scheduled_jumps = [{ time = 0.4, size = [1.0, 2.0] }]
            [poisson_jumps]
            intensity = 3.0
            common_prob = 0.5
            size1 = { law = "normal", mean = 0.0, std = 1.0 }
            size2 = { law = "constant", value = 0.5 }
        "#;
        let spec: SemimartingaleSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.vol1.value_at(0.75), 2.0);
        assert_eq!(spec.vol2.value_at(0.75), 1.0);
        assert_eq!(spec.corr.value_at(0.1), 0.5);
        assert_eq!(spec.scheduled_jumps.len(), 1);
        assert!(toml::from_str::<SemimartingaleSpec>("horizon = 1.0\ncorr = 2.0").is_err());
    }
}
