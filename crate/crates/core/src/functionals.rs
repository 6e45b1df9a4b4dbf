//! Non-normalized and normalized functionals of asynchronously observed
//! increments.
//!
//! ```text
//! V(f)_T        = Σ_{(i,j): I¹_i ∩ I²_j ≠ ∅, t¹_i ∨ t²_j <= T} f(Δ¹_i X¹, Δ²_j X²)
//! V^{(l)}(g)_T  = Σ_{i: t^{(l)}_i <= T} g(Δ^{(l)}_i X^{(l)})
//! V̄(p, f)_T     = r^{p/2-1} V(f)_T
//! ```
//!
//! With `f(x, y) = xy` the first sum is the Hayashi–Yoshida covariance estimator.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Component, PathRecord};
use crate::schemes::{for_each_overlap, ObservationScheme};
use crate::sum::NeumaierSum;

/// Shared handle to a user-supplied bivariate function.
pub type BivariateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Shared handle to a user-supplied univariate function.
pub type UnivariateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Test function of a functional.
///
/// One-dimensional variants can be used where a bivariate `f` is expected; they
/// then act on the first argument only, `f(x, y) = g(x)`.
#[derive(Clone)]
pub enum FunctionalSpec {
    /// `x^{p1} y^{p2}`
    SignedProductPower { p1: u32, p2: u32 },
    /// `|x|^{p1} |y|^{p2}`
    AbsProductPower { p1: f64, p2: f64 },
    /// `g(x) = x^p` (integer `p`) or `|x|^p`.
    OneDimPower { p: f64, signed: bool },
    /// `(1 + ‖(x, y)‖) · base(x, y)`
    Perturbed(Box<FunctionalSpec>),
    Custom {
        name: String,
        func: BivariateFn,
        /// Homogeneity degree in each argument, if known.
        degrees: Option<(f64, f64)>,
    },
    CustomOneDim {
        name: String,
        func: UnivariateFn,
        degree: Option<f64>,
    },
}

impl fmt::Debug for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FunctionalSpec({self})")
    }
}

#[inline]
fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        x.abs()
    } else if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

impl FunctionalSpec {
    /// `f(x, y) = xy`
    pub fn hayashi_yoshida() -> Self {
        FunctionalSpec::SignedProductPower { p1: 1, p2: 1 }
    }

    pub fn custom(
        name: impl Into<String>,
        degrees: Option<(f64, f64)>,
        func: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FunctionalSpec::Custom {
            name: name.into(),
            func: Arc::new(func),
            degrees,
        }
    }

    pub fn custom_onedim(
        name: impl Into<String>,
        degree: Option<f64>,
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FunctionalSpec::CustomOneDim {
            name: name.into(),
            func: Arc::new(func),
            degree,
        }
    }

    pub fn perturbed(base: FunctionalSpec) -> Self {
        FunctionalSpec::Perturbed(Box::new(base))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionalSpec::AbsProductPower { p1, p2 } => {
                if !(*p1 >= 0.0 && *p2 >= 0.0 && p1.is_finite() && p2.is_finite()) {
                    return Err(Error::param("powers must be nonnegative"));
                }
            }
            FunctionalSpec::OneDimPower { p, signed } => {
                if !(*p >= 0.0 && p.is_finite()) {
                    return Err(Error::param("power must be nonnegative"));
                }
                if *signed && p.fract() != 0.0 {
                    return Err(Error::param("signed power needs an integer exponent"));
                }
            }
            FunctionalSpec::Perturbed(base) => base.validate()?,
            _ => {}
        }
        Ok(())
    }

    pub fn is_onedim(&self) -> bool {
        match self {
            FunctionalSpec::OneDimPower { .. } | FunctionalSpec::CustomOneDim { .. } => true,
            FunctionalSpec::Perturbed(b) => b.is_onedim(),
            _ => false,
        }
    }

    /// Homogeneity degrees `(p1, p2)` in the two arguments, when known.
    pub fn degrees(&self) -> Option<(f64, f64)> {
        match self {
            FunctionalSpec::SignedProductPower { p1, p2 } => Some((*p1 as f64, *p2 as f64)),
            FunctionalSpec::AbsProductPower { p1, p2 } => Some((*p1, *p2)),
            FunctionalSpec::OneDimPower { p, .. } => Some((*p, 0.0)),
            FunctionalSpec::Perturbed(base) => base.degrees(),
            FunctionalSpec::Custom { degrees, .. } => *degrees,
            FunctionalSpec::CustomOneDim { degree, .. } => degree.map(|d| (d, 0.0)),
        }
    }

    /// Total homogeneity degree `p1 + p2`.
    pub fn degree(&self) -> Option<f64> {
        self.degrees().map(|(a, b)| a + b)
    }

    /// Evaluate as a function of two increments.
    #[inline]
    pub fn eval2(&self, x: f64, y: f64) -> f64 {
        match self {
            FunctionalSpec::SignedProductPower { p1, p2 } => {
                x.powi(*p1 as i32) * y.powi(*p2 as i32)
            }
            FunctionalSpec::AbsProductPower { p1, p2 } => abs_pow(x, *p1) * abs_pow(y, *p2),
            FunctionalSpec::Perturbed(base) => (1.0 + x.hypot(y)) * base.eval2(x, y),
            FunctionalSpec::Custom { func, .. } => func(x, y),
            FunctionalSpec::OneDimPower { .. } | FunctionalSpec::CustomOneDim { .. } => {
                self.eval1(x)
            }
        }
    }

    /// Evaluate as a function of one increment. Bivariate variants see `(x, 0)`.
    #[inline]
    pub fn eval1(&self, x: f64) -> f64 {
        match self {
            FunctionalSpec::OneDimPower { p, signed: true } => x.powi(*p as i32),
            FunctionalSpec::OneDimPower { p, signed: false } => abs_pow(x, *p),
            FunctionalSpec::CustomOneDim { func, .. } => func(x),
            FunctionalSpec::Perturbed(base) if base.is_onedim() => (1.0 + x.abs()) * base.eval1(x),
            other => other.eval2(x, 0.0),
        }
    }
}

impl fmt::Display for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalSpec::SignedProductPower { p1: 1, p2: 1 } => write!(f, "hy"),
            FunctionalSpec::SignedProductPower { p1, p2 } => write!(f, "spp:{p1},{p2}"),
            FunctionalSpec::AbsProductPower { p1, p2 } => write!(f, "app:{p1},{p2}"),
            FunctionalSpec::OneDimPower { p, signed: true } => write!(f, "pow:{p}"),
            FunctionalSpec::OneDimPower { p, signed: false } => write!(f, "abs:{p}"),
            FunctionalSpec::Perturbed(base) => write!(f, "pert:{base}"),
            FunctionalSpec::Custom { name, .. } | FunctionalSpec::CustomOneDim { name, .. } => {
                write!(f, "custom:{name}")
            }
        }
    }
}

fn parse_pair<T: FromStr>(s: &str, whole: &str) -> Result<(T, T)> {
    let bad = || Error::input(format!("cannot parse functional {whole:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

impl FromStr for FunctionalSpec {
    type Err = Error;

    /// Compact forms: `hy`, `spp:p1,p2`, `app:p1,p2`, `pow:p`, `abs:p`, `pert:<inner>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::input(format!("cannot parse functional {s:?}"));
        let spec = if s == "hy" {
            FunctionalSpec::hayashi_yoshida()
        } else if let Some(inner) = s.strip_prefix("pert:") {
            FunctionalSpec::perturbed(inner.parse()?)
        } else if let Some(rest) = s.strip_prefix("spp:") {
            let (p1, p2) = parse_pair(rest, s)?;
            FunctionalSpec::SignedProductPower { p1, p2 }
        } else if let Some(rest) = s.strip_prefix("app:") {
            let (p1, p2) = parse_pair(rest, s)?;
            FunctionalSpec::AbsProductPower { p1, p2 }
        } else if let Some(rest) = s.strip_prefix("pow:") {
            FunctionalSpec::OneDimPower {
                p: rest.parse().map_err(|_| bad())?,
                signed: true,
            }
        } else if let Some(rest) = s.strip_prefix("abs:") {
            FunctionalSpec::OneDimPower {
                p: rest.parse().map_err(|_| bad())?,
                signed: false,
            }
        } else {
            return Err(bad());
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Path values at the observation times `<= T` of one component.
fn observed_values(
    scheme: &ObservationScheme,
    path: &PathRecord,
    l: Component,
) -> Result<Vec<f64>> {
    let grid = scheme.grid(l);
    let t_end = scheme.horizon();
    let mut out = Vec::with_capacity(grid.count_le(t_end));
    let mut k = 0;
    for t in grid.iter().take_while(|&t| t <= t_end) {
        while k < path.times.len() && path.times[k] < t {
            k += 1;
        }
        if k == path.times.len() || path.times[k] != t {
            return Err(Error::Lookup(t));
        }
        out.push(path.values[k][l.index()]);
    }
    Ok(out)
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("rate must be positive, got {rate}")))
    }
}

/// `V(f, π)_T`.
pub fn eval_v(f: &FunctionalSpec, scheme: &ObservationScheme, path: &PathRecord) -> Result<f64> {
    f.validate()?;
    let x1 = observed_values(scheme, path, Component::One)?;
    let x2 = observed_values(scheme, path, Component::Two)?;
    let mut acc = NeumaierSum::new();
    for_each_overlap(scheme, Some(scheme.horizon()), |p| {
        acc += f.eval2(x1[p.i] - x1[p.i - 1], x2[p.j] - x2[p.j - 1]);
    });
    Ok(acc.value())
}

/// `V^{(l)}(g, π)_T`.
pub fn eval_v_onedim(
    g: &FunctionalSpec,
    scheme: &ObservationScheme,
    path: &PathRecord,
    l: Component,
) -> Result<f64> {
    g.validate()?;
    let x = observed_values(scheme, path, l)?;
    Ok(x.windows(2)
        .map(|w| g.eval1(w[1] - w[0]))
        .sum::<NeumaierSum>()
        .value())
}

/// `V̄(p, f, π)_T = rate^{p/2-1} V(f, π)_T`.
pub fn eval_vbar(
    p: f64,
    f: &FunctionalSpec,
    scheme: &ObservationScheme,
    path: &PathRecord,
    rate: f64,
) -> Result<f64> {
    check_rate(rate)?;
    Ok(rate.powf(p / 2.0 - 1.0) * eval_v(f, scheme, path)?)
}

/// `V̄^{(l)}(p, g, π)_T = rate^{p/2-1} V^{(l)}(g, π)_T`.
pub fn eval_vbar_onedim(
    p: f64,
    g: &FunctionalSpec,
    scheme: &ObservationScheme,
    path: &PathRecord,
    l: Component,
    rate: f64,
) -> Result<f64> {
    check_rate(rate)?;
    Ok(rate.powf(p / 2.0 - 1.0) * eval_v_onedim(g, scheme, path, l)?)
}
