//! Limit targets: jump sums, Gaussian moments and Stieltjes integrals of
//! spot-covariance functionals against scheme statistics.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussHermite;

use crate::error::{Error, Result};
use crate::functionals::FunctionalSpec;
use crate::model::{Component, JumpEvent, Matrix2, SemimartingaleSpec};
use crate::step::StepFunction;
use crate::sum::NeumaierSum;

/// Nodes per axis of the Gauss–Hermite rule used by [`m_sigma`].
pub const QUADRATURE_ORDER: usize = 40;

/// `Σ_{s <= T} f(ΔX¹_s, ΔX²_s)`; with `common_only` only jumps with
/// `ΔX¹_s ΔX²_s ≠ 0` count.
pub fn b_sum(jumps: &[JumpEvent], f: &FunctionalSpec, t_end: f64, common_only: bool) -> f64 {
    jumps
        .iter()
        .filter(|j| j.time <= t_end && (!common_only || j.is_common()))
        .map(|j| f.eval2(j.size[0], j.size[1]))
        .sum::<NeumaierSum>()
        .value()
}

/// `Σ_{s <= T} g(ΔX^{(l)}_s)`.
pub fn b_onedim(jumps: &[JumpEvent], g: &FunctionalSpec, t_end: f64, l: Component) -> f64 {
    jumps
        .iter()
        .filter(|j| j.time <= t_end)
        .map(|j| g.eval1(j.size[l.index()]))
        .sum::<NeumaierSum>()
        .value()
}

/// `E[Z^k]` for standard normal `Z`: `(k-1)!!` for even `k`, 0 for odd `k`.
pub fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(f64::from).product()
}

/// `E|Z|^p = 2^{p/2} Γ((p+1)/2) / √π` for standard normal `Z`.
pub fn abs_moment(p: f64) -> f64 {
    if p == 0.0 {
        return 1.0;
    }
    2f64.powf(p / 2.0) * libm::tgamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn multinomial(n: u32, l: u32, m: u32) -> f64 {
    binomial(n, l) * binomial(n - l, m)
}

/// Standard-normal rule: `E g(Z) ≈ Σ w g(x)`.
fn normal_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let order = NonZeroUsize::new(QUADRATURE_ORDER).expect("positive order");
        let sqrt_pi = std::f64::consts::PI.sqrt();
        GaussHermite::new(order)
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / sqrt_pi))
            .collect()
    })
}

fn expect_normal(g: impl Fn(f64) -> f64) -> f64 {
    normal_rule()
        .iter()
        .map(|&(x, w)| w * g(x))
        .sum::<NeumaierSum>()
        .value()
}

fn expect_normal2(g: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = normal_rule();
    let mut acc = NeumaierSum::new();
    for &(u, wu) in rule {
        for &(v, wv) in rule {
            acc += wu * wv * g(u, v);
        }
    }
    acc.value()
}

/// Lower-triangular factor `L` with `L Lᵀ = Σ`; fails unless `Σ` is symmetric PSD.
fn cholesky(sigma: &Matrix2) -> Result<Matrix2> {
    let [[a, b], [c, d]] = *sigma;
    let scale = a.abs().max(d.abs()).max(1e-300);
    let tol = 1e-12 * scale;
    if ![a, b, c, d].iter().all(|x| x.is_finite()) {
        return Err(Error::input("covariance matrix has non-finite entries"));
    }
    if (b - c).abs() > tol {
        return Err(Error::input("covariance matrix is not symmetric"));
    }
    if a < 0.0 || d < 0.0 || a * d - b * c < -tol * scale {
        return Err(Error::input(
            "covariance matrix is not positive semidefinite",
        ));
    }
    if a == 0.0 {
        if b.abs() > tol {
            return Err(Error::input(
                "covariance matrix is not positive semidefinite",
            ));
        }
        return Ok([[0.0, 0.0], [0.0, d.sqrt()]]);
    }
    let l11 = a.sqrt();
    let l21 = b / l11;
    Ok([[l11, 0.0], [l21, (d - l21 * l21).max(0.0).sqrt()]])
}

/// `E f(Z)`, `Z ~ N(0, Σ)`.
///
/// Closed forms cover signed product powers, one-dimensional powers and
/// uncorrelated absolute product powers. Other functionals use a tensor
/// Gauss–Hermite rule of order [`QUADRATURE_ORDER`], which is accurate to about
/// `1e-8` for smooth polynomially bounded `f` of degree up to 8.
pub fn m_sigma(f: &FunctionalSpec, sigma: &Matrix2) -> Result<f64> {
    let l = cholesky(sigma)?;
    let (s1, s2) = (sigma[0][0].max(0.0).sqrt(), sigma[1][1].max(0.0).sqrt());
    match f {
        FunctionalSpec::SignedProductPower { p1, p2 } => {
            let rho = if s1 == 0.0 || s2 == 0.0 {
                0.0
            } else {
                (sigma[0][1] / (s1 * s2)).clamp(-1.0, 1.0)
            };
            Ok(s1.powi(*p1 as i32) * s2.powi(*p2 as i32) * product_moment(*p1, *p2, rho))
        }
        FunctionalSpec::AbsProductPower { p1, p2 } if sigma[0][1] == 0.0 => {
            Ok(s1.powf(*p1) * s2.powf(*p2) * abs_moment(*p1) * abs_moment(*p2))
        }
        FunctionalSpec::OneDimPower { p, .. } => Ok(s1.powf(*p) * m_one(f)),
        _ => Ok(expect_normal2(|u, v| {
            f.eval2(l[0][0] * u, l[1][0] * u + l[1][1] * v)
        })),
    }
}

/// `E[U^{p1} (ρU + √(1-ρ²) V)^{p2}]` for independent standard normals `U, V`.
fn product_moment(p1: u32, p2: u32, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    (0..=p2)
        .step_by(2)
        .map(|l| {
            binomial(p2, l)
                * gaussian_moment(p1 + p2 - l)
                * gaussian_moment(l)
                * s.powi(l as i32)
                * rho.powi((p2 - l) as i32)
        })
        .sum::<NeumaierSum>()
        .value()
}

/// `m_1(g) = E g(Z)`, `Z ~ N(0, 1)`, for the one-dimensional reading of `g`.
pub fn m_one(g: &FunctionalSpec) -> f64 {
    match g {
        FunctionalSpec::OneDimPower { p, signed: true } => gaussian_moment(*p as u32),
        FunctionalSpec::OneDimPower { p, signed: false } => abs_moment(*p),
        _ => expect_normal(|x| g.eval1(x)),
    }
}

/// Triples `(k, l, m)` of even integers with `k <= p1`, `l + m <= p2` and
/// `p1 + p2 - (k + l + m)` even and nonnegative.
pub fn enumerate_l(p1: u32, p2: u32) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    if (p1 + p2) % 2 == 1 {
        return out;
    }
    for k in (0..=p1).step_by(2) {
        for l in (0..=p2).step_by(2) {
            for m in (0..=p2 - l).step_by(2) {
                out.push((k, l, m));
            }
        }
    }
    out
}

/// `∫_0^T h(s) dF(s)` for a piecewise-constant integrand `h`.
///
/// The partition is the union of `F`'s breakpoints, `h`'s breakpoints and `T`;
/// `h` is evaluated at left endpoints and `F` between its breakpoints by linear
/// interpolation. The result is exact whenever `h` is constant between the
/// listed breakpoints and `F` is linear between its own.
pub fn stieltjes(
    integrand: impl Fn(f64) -> f64,
    integrand_breakpoints: &[f64],
    f: &StepFunction,
    t_end: f64,
) -> f64 {
    let fb = f.breakpoints();
    let mut points: Vec<f64> = fb
        .iter()
        .chain(integrand_breakpoints)
        .copied()
        .filter(|&s| (0.0..t_end).contains(&s))
        .collect();
    points.push(t_end);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut acc = NeumaierSum::new();
    let mut prev_s = 0.0;
    let mut prev_f = f.eval_interpolated(0.0);
    for &s in points.iter().skip_while(|&&s| s == 0.0) {
        let fs = f.eval_interpolated(s);
        if fs != prev_f {
            acc += integrand(prev_s) * (fs - prev_f);
        }
        prev_s = s;
        prev_f = fs;
    }
    acc.value()
}

/// Values of `h(σ¹, σ², ρ)` on the constant pieces of the coefficients,
/// as `(piece starts, values)`.
fn coefficient_pieces(
    spec: &SemimartingaleSpec,
    mut h: impl FnMut(f64, f64, f64) -> Result<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let starts = spec.coefficient_breakpoints();
    let values = starts
        .iter()
        .map(|&s| {
            let (s1, s2, rho) = spec.coefficients_at(s);
            h(s1, s2, rho)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((starts, values))
}

fn integrate_pieces(pieces: &(Vec<f64>, Vec<f64>), f: &StepFunction, t_end: f64) -> f64 {
    let (starts, values) = pieces;
    let at = |s: f64| values[starts.partition_point(|&b| b <= s).max(1) - 1];
    stieltjes(at, starts, f, t_end)
}

fn declared_degrees(f: &FunctionalSpec) -> Result<(f64, f64)> {
    f.degrees()
        .ok_or_else(|| Error::contract(format!("functional {f} has no declared degree")))
}

fn check_degree(f: &FunctionalSpec, p: f64) -> Result<()> {
    let (a, b) = declared_degrees(f)?;
    if (a + b - p).abs() > 1e-12 {
        return Err(Error::contract(format!(
            "functional {f} has degree {}, normalization uses p = {p}",
            a + b
        )));
    }
    Ok(())
}

/// `∫_0^T m_{c_s}(f) dG_p(s)` with `c_s` the spot covariance.
pub fn limit_sync(
    p: f64,
    f: &FunctionalSpec,
    spec: &SemimartingaleSpec,
    gp: &StepFunction,
) -> Result<f64> {
    check_degree(f, p)?;
    let pieces = coefficient_pieces(spec, |s1, s2, rho| {
        let c = rho * s1 * s2;
        m_sigma(f, &[[s1 * s1, c], [c, s2 * s2]])
    })?;
    Ok(integrate_pieces(&pieces, gp, spec.horizon))
}

/// `m_1(g) ∫_0^T (σ^{(l)}_s)^p dG^{(l)}_p(s)`.
pub fn limit_onedim(
    p: f64,
    g: &FunctionalSpec,
    spec: &SemimartingaleSpec,
    l: Component,
    gp: &StepFunction,
) -> Result<f64> {
    check_degree(g, p)?;
    let m1 = m_one(g);
    let pieces = coefficient_pieces(spec, |s1, s2, _| {
        let s = if l == Component::One { s1 } else { s2 };
        Ok(s.powf(p))
    })?;
    Ok(m1 * integrate_pieces(&pieces, gp, spec.horizon))
}

/// `m_{I₂}(f) ∫_0^T (σ¹_s)^{p1} (σ²_s)^{p2} dG_{p1,p2}(s)` for uncorrelated
/// Brownian drivers.
pub fn limit_uncorrelated(
    p1: f64,
    p2: f64,
    f: &FunctionalSpec,
    spec: &SemimartingaleSpec,
    gcross: &StepFunction,
) -> Result<f64> {
    if spec.corr.values().iter().any(|&r| r != 0.0) {
        return Err(Error::contract("correlation must vanish identically"));
    }
    let (d1, d2) = declared_degrees(f)?;
    if (d1 - p1).abs() > 1e-12 || (d2 - p2).abs() > 1e-12 {
        return Err(Error::contract(format!(
            "functional {f} has degrees ({d1}, {d2}), expected ({p1}, {p2})"
        )));
    }
    let m = m_sigma(f, &[[1.0, 0.0], [0.0, 1.0]])?;
    let pieces = coefficient_pieces(spec, |s1, s2, _| Ok(s1.powf(p1) * s2.powf(p2)))?;
    Ok(m * integrate_pieces(&pieces, gcross, spec.horizon))
}

/// `H_{k,m,p1+p2}` step functions keyed by `(k, m)`.
pub type HTable = BTreeMap<(u32, u32), StepFunction>;

/// Pairs `(k, m)` whose `H_{k,m,p1+p2}` enters [`limit_integer`].
pub fn required_h(p1: u32, p2: u32) -> Vec<(u32, u32)> {
    let mut keys: Vec<(u32, u32)> = enumerate_l(p1, p2)
        .into_iter()
        .map(|(k, _, m)| (k, m))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

/// Limit of `V̄(p1+p2, x^{p1} y^{p2})` for continuous `X`:
///
/// ```text
/// ∫ (σ¹)^{p1} (σ²)^{p2} Σ_{(k,l,m) ∈ L(p1,p2)} C(p1,k) C(p2;l,m) m(k) m(l) m(m) m(p1+p2-k-l-m)
///                        · (1-ρ²)^{l/2} ρ^{p2-l-m} dH_{k,m,p1+p2}
/// ```
pub fn limit_integer(p1: u32, p2: u32, spec: &SemimartingaleSpec, h: &HTable) -> Result<f64> {
    let triples = enumerate_l(p1, p2);
    let mut total = NeumaierSum::new();
    for (k, m) in required_h(p1, p2) {
        let hkm = h
            .get(&(k, m))
            .ok_or_else(|| Error::input(format!("missing H_{{{k},{m},{}}}", p1 + p2)))?;
        let ls: Vec<u32> = triples
            .iter()
            .filter(|t| t.0 == k && t.2 == m)
            .map(|t| t.1)
            .collect();
        let pieces = coefficient_pieces(spec, |s1, s2, rho| {
            let inner: NeumaierSum = ls
                .iter()
                .map(|&l| {
                    binomial(p1, k)
                        * multinomial(p2, l, m)
                        * gaussian_moment(k)
                        * gaussian_moment(l)
                        * gaussian_moment(m)
                        * gaussian_moment(p1 + p2 - k - l - m)
                        * (1.0 - rho * rho).max(0.0).powi((l / 2) as i32)
                        * rho.powi((p2 - l - m) as i32)
                })
                .sum();
            Ok(s1.powi(p1 as i32) * s2.powi(p2 as i32) * inner.value())
        })?;
        total += integrate_pieces(&pieces, hkm, spec.horizon);
    }
    Ok(total.value())
}

/// The four simplified product-power limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductPreset {
    F11,
    F22,
    F33,
    F44,
}

impl ProductPreset {
    pub fn power(self) -> u32 {
        match self {
            ProductPreset::F11 => 1,
            ProductPreset::F22 => 2,
            ProductPreset::F33 => 3,
            ProductPreset::F44 => 4,
        }
    }
}

impl std::str::FromStr for ProductPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f11" => Ok(ProductPreset::F11),
            "f22" => Ok(ProductPreset::F22),
            "f33" => Ok(ProductPreset::F33),
            "f44" => Ok(ProductPreset::F44),
            _ => Err(Error::input(format!("unknown preset {s:?}"))),
        }
    }
}

/// Scheme statistics at `p = 2 * power` consumed by [`limit_preset`].
#[derive(Debug, Clone, Default)]
pub struct PresetStats {
    /// `H_{0,0,p}`
    pub h00: Option<StepFunction>,
    /// `G_{2,2,p}`
    pub g22: Option<StepFunction>,
    /// `G_{4,4,p}`
    pub g44: Option<StepFunction>,
}

/// Simplified limits of `V̄(2q, x^q y^q)`, `q = 1..4`:
///
/// ```text
/// f11: ∫ ρ σ¹σ² dH_{0,0,2}
/// f22: ∫ (σ¹σ²)² (2ρ² dH_{0,0,4} + dG_{2,2,4})
/// f33: ∫ (σ¹σ²)³ (6ρ³ dH_{0,0,6} + 9ρ dG_{2,2,6})
/// f44: ∫ (σ¹σ²)⁴ (24ρ⁴ dH_{0,0,8} + 72ρ² dG_{2,2,8} + 9 dG_{4,4,8})
/// ```
pub fn limit_preset(
    preset: ProductPreset,
    spec: &SemimartingaleSpec,
    stats: &PresetStats,
) -> Result<f64> {
    let need = |f: &Option<StepFunction>, name: &str| {
        f.clone()
            .ok_or_else(|| Error::input(format!("missing {name} for preset {preset:?}")))
    };
    let q = preset.power() as i32;
    // (statistic, coefficient, power of ρ)
    let terms: Vec<(StepFunction, f64, i32)> = match preset {
        ProductPreset::F11 => vec![(need(&stats.h00, "H00")?, 1.0, 1)],
        ProductPreset::F22 => vec![
            (need(&stats.h00, "H00")?, 2.0, 2),
            (need(&stats.g22, "G22")?, 1.0, 0),
        ],
        ProductPreset::F33 => vec![
            (need(&stats.h00, "H00")?, 6.0, 3),
            (need(&stats.g22, "G22")?, 9.0, 1),
        ],
        ProductPreset::F44 => vec![
            (need(&stats.h00, "H00")?, 24.0, 4),
            (need(&stats.g22, "G22")?, 72.0, 2),
            (need(&stats.g44, "G44")?, 9.0, 0),
        ],
    };
    let mut total = NeumaierSum::new();
    for (stat, coef, rho_pow) in &terms {
        let pieces = coefficient_pieces(spec, |s1, s2, rho| {
            Ok((s1 * s2).powi(q) * coef * rho.powi(*rho_pow))
        })?;
        total += integrate_pieces(&pieces, stat, spec.horizon);
    }
    Ok(total.value())
}
