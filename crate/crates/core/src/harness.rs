//! Replicated Monte Carlo convergence experiments and scheme diagnostics.
//!
//! An experiment evaluates one functional on `R` independent (scheme, path)
//! draws for every `n` of a ladder and compares the sample mean with a limit
//! target. Per replication the scheme and the path use disjoint seed labels,
//! so observation times are independent of the process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::functionals::{eval_v, eval_v_onedim, FunctionalSpec};
use crate::limits::{
    b_onedim, b_sum, limit_integer, limit_onedim, limit_preset, limit_sync, limit_uncorrelated,
    required_h, HTable, PresetStats, ProductPreset,
};
use crate::model::{sample_path, Component, PathRecord, SemimartingaleSpec};
use crate::rng::{derive_seed, Purpose};
use crate::scheme_stats::{g_cross, g_kmp, g_onedim, h_stat, overlap_power_sum};
use crate::schemes::{
    alternating_subsample, generate_scheme, max_overlap_count, mesh, ObservationScheme, SchemeSpec,
};
use crate::sum::NeumaierSum;

/// Default cap on the number of sampled path times per replication.
pub const DEFAULT_MAX_PATH_POINTS: u64 = 50_000_000;

/// Absolute slack added to the verdict band so exact targets survive rounding.
pub const VERDICT_SLACK: f64 = 1e-12;

/// Standard errors allowed between mean and limit.
pub const VERDICT_SIGMAS: f64 = 4.0;

/// Scheme family with `n` left open, plus optional alternating thinning.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeTemplate {
    table: toml::Table,
    pub alternate: bool,
}

impl SchemeTemplate {
    /// Template from a scheme table without `n` (`kind = "poisson"`, ...).
    pub fn from_table(mut table: toml::Table) -> Result<Self> {
        let alternate = match table.remove("alternate") {
            None => false,
            Some(toml::Value::Boolean(b)) => b,
            Some(other) => {
                return Err(Error::input(format!(
                    "scheme.alternate must be a boolean, got {other}"
                )))
            }
        };
        if table.contains_key("n") {
            return Err(Error::input("scheme.n is taken from n_ladder"));
        }
        let template = Self { table, alternate };
        template.instantiate(1)?;
        Ok(template)
    }

    /// Template that reproduces `spec` for every `n` it is instantiated with.
    pub fn from_spec(spec: &SchemeSpec) -> Result<Self> {
        let value = toml::Value::try_from(spec).map_err(|e| Error::input(e.to_string()))?;
        let mut table = match value {
            toml::Value::Table(t) => t,
            _ => unreachable!("scheme specs serialize to tables"),
        };
        table.remove("n");
        Self::from_table(table)
    }

    pub fn alternating(mut self) -> Self {
        self.alternate = true;
        self
    }

    pub fn instantiate(&self, n: u64) -> Result<SchemeSpec> {
        let mut table = self.table.clone();
        if table.get("kind").and_then(|k| k.as_str()) != Some("explicit") {
            let n = i64::try_from(n).map_err(|_| Error::input("n too large"))?;
            table.insert("n".into(), toml::Value::Integer(n));
        }
        SchemeSpec::deserialize(toml::Value::Table(table))
            .map_err(|e| Error::input(format!("scheme: {e}")))
    }

    /// Draw the scheme for one replication.
    pub fn generate(&self, n: u64, horizon: f64, seed: u64) -> Result<ObservationScheme> {
        let scheme = generate_scheme(&self.instantiate(n)?, horizon, seed)?;
        Ok(if self.alternate {
            alternating_subsample(&scheme).scheme
        } else {
            scheme
        })
    }
}

/// `V̄(p, ·) = r(n)^{p/2-1} V(·)` with `r(n) = scale · n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub p: f64,
    #[serde(default = "one")]
    pub rate_scale: f64,
    #[serde(default = "one")]
    pub rate_exponent: f64,
}

fn one() -> f64 {
    1.0
}

impl Normalization {
    /// Rate `r(n) = n`.
    pub fn with_p(p: f64) -> Self {
        Self {
            p,
            rate_scale: 1.0,
            rate_exponent: 1.0,
        }
    }

    pub fn rate(&self, n: u64) -> f64 {
        self.rate_scale * (n as f64).powf(self.rate_exponent)
    }
}

/// What the replicated values are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// `B(f)_T` from the realized jumps.
    B,
    /// `B*(f)_T`, common jumps only.
    BStar,
    /// `B^{(l)}(g)_T`.
    BOnedim,
    /// `∫ m_{c_s}(f) dG_p` on a synchronous scheme.
    Sync,
    /// `m_1(g) ∫ (σ^{(l)})^p dG^{(l)}_p`.
    Onedim,
    /// `m_{I₂}(f) ∫ (σ¹)^{p1} (σ²)^{p2} dG_{p1,p2}` for uncorrelated drivers.
    Uncorrelated,
    /// General integer-power expansion against `H_{k,m,p}`.
    Integer,
    /// One of the simplified product-power forms.
    Preset { preset: ProductPreset },
    /// A fixed number.
    Value { value: f64 },
}

/// Exponents for [`run_scheme_diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub p1: f64,
    pub p2: f64,
}

/// A complete experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: SemimartingaleSpec,
    pub scheme: SchemeTemplate,
    pub functional: FunctionalSpec,
    /// Evaluate the one-dimensional functional of this component instead of the pair sum.
    pub component: Option<Component>,
    pub normalization: Option<Normalization>,
    pub n_ladder: Vec<u64>,
    pub replications: u64,
    pub base_seed: u64,
    pub target: Target,
    pub output: Option<PathBuf>,
    pub diagnostics: Option<DiagnosticsConfig>,
    pub max_path_points: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: SemimartingaleSpec,
    scheme: toml::Table,
    functional: String,
    #[serde(default)]
    component: Option<Component>,
    #[serde(default)]
    normalization: Option<Normalization>,
    n_ladder: Vec<u64>,
    replications: u64,
    #[serde(default)]
    base_seed: u64,
    target: Target,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    diagnostics: Option<DiagnosticsConfig>,
    #[serde(default)]
    max_path_points: Option<u64>,
}

impl ExperimentConfig {
    /// A configuration with `R = 1`, seed 0, no normalization and no output file.
    pub fn new(
        model: SemimartingaleSpec,
        scheme: SchemeTemplate,
        functional: FunctionalSpec,
        n_ladder: Vec<u64>,
        target: Target,
    ) -> Self {
        Self {
            model,
            scheme,
            functional,
            component: None,
            normalization: None,
            n_ladder,
            replications: 1,
            base_seed: 0,
            target,
            output: None,
            diagnostics: None,
            max_path_points: DEFAULT_MAX_PATH_POINTS,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::input(format!("config: {e}")))?;
        let config = Self {
            model: raw.model,
            scheme: SchemeTemplate::from_table(raw.scheme)?,
            functional: raw.functional.parse()?,
            component: raw.component,
            normalization: raw.normalization,
            n_ladder: raw.n_ladder,
            replications: raw.replications,
            base_seed: raw.base_seed,
            target: raw.target,
            output: raw.output,
            diagnostics: raw.diagnostics,
            max_path_points: raw.max_path_points.unwrap_or(DEFAULT_MAX_PATH_POINTS),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn normalization_for(&self, target: &str) -> Result<Normalization> {
        self.normalization
            .ok_or_else(|| Error::contract(format!("target {target} needs a normalization")))
    }

    fn component_for(&self, target: &str) -> Result<Component> {
        self.component
            .ok_or_else(|| Error::contract(format!("target {target} needs a component")))
    }

    /// Check the configuration and the compatibility of target and functional.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.functional.validate()?;
        if self.n_ladder.is_empty() || self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input(
                "n_ladder must be nonempty and strictly increasing",
            ));
        }
        if self.n_ladder[0] == 0 {
            return Err(Error::input("n_ladder entries must be positive"));
        }
        if self.replications == 0 {
            return Err(Error::input("replications must be at least 1"));
        }
        if let Some(norm) = self.normalization {
            if !(norm.p >= 0.0 && norm.rate_scale > 0.0 && norm.rate_scale.is_finite()) {
                return Err(Error::input(
                    "normalization needs p >= 0 and a positive rate scale",
                ));
            }
        }
        let degree_matches = |p: f64| -> Result<()> {
            match self.functional.degree() {
                Some(d) if (d - p).abs() < 1e-12 => Ok(()),
                Some(d) => Err(Error::contract(format!(
                    "functional {} has degree {d}, normalization uses p = {p}",
                    self.functional
                ))),
                None => Err(Error::contract(format!(
                    "functional {} has no declared degree",
                    self.functional
                ))),
            }
        };
        let spp = match self.functional {
            FunctionalSpec::SignedProductPower { p1, p2 } => Some((p1, p2)),
            _ => None,
        };
        match self.target {
            Target::B | Target::BStar => {
                if self.component.is_some() {
                    return Err(Error::contract("jump targets B and B* are bivariate"));
                }
            }
            Target::BOnedim => {
                self.component_for("b_onedim")?;
            }
            Target::Sync | Target::Uncorrelated => {
                degree_matches(self.normalization_for("sync/uncorrelated")?.p)?;
                if self.component.is_some() {
                    return Err(Error::contract("bivariate target with a component set"));
                }
            }
            Target::Onedim => {
                self.component_for("onedim")?;
                degree_matches(self.normalization_for("onedim")?.p)?;
            }
            Target::Integer => {
                degree_matches(self.normalization_for("integer")?.p)?;
                if spp.is_none() || self.component.is_some() {
                    return Err(Error::contract(
                        "integer target needs a signed product power",
                    ));
                }
            }
            Target::Preset { preset } => {
                degree_matches(self.normalization_for("preset")?.p)?;
                let q = preset.power();
                if spp != Some((q, q)) || self.component.is_some() {
                    return Err(Error::contract(format!(
                        "preset {preset:?} needs functional spp:{q},{q}"
                    )));
                }
            }
            Target::Value { value } => {
                if !value.is_finite() {
                    return Err(Error::input("target value must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub limit: f64,
}

/// Limit target of `config` for one realized scheme and jump ledger at rung `n`.
pub fn target_limit(
    config: &ExperimentConfig,
    scheme: &ObservationScheme,
    jumps: &[crate::model::JumpEvent],
    n: u64,
) -> Result<f64> {
    let f = &config.functional;
    let t_end = config.model.horizon;
    let model = &config.model;
    let rate = config.normalization.map(|nm| nm.rate(n));
    let p = config.normalization.map(|nm| nm.p);
    Ok(match config.target {
        Target::Value { value } => value,
        Target::B => b_sum(jumps, f, t_end, false),
        Target::BStar => b_sum(jumps, f, t_end, true),
        Target::BOnedim => b_onedim(jumps, f, t_end, config.component_for("b_onedim")?),
        Target::Sync => {
            if !scheme.is_synchronous() {
                return Err(Error::contract("sync target on an asynchronous scheme"));
            }
            let (p, rate) = (p.expect("validated"), rate.expect("validated"));
            let gp = g_onedim(scheme, Component::One, p, rate)?;
            limit_sync(p, f, model, &gp)?
        }
        Target::Onedim => {
            let l = config.component_for("onedim")?;
            let (p, rate) = (p.expect("validated"), rate.expect("validated"));
            let gp = g_onedim(scheme, l, p, rate)?;
            limit_onedim(p, f, model, l, &gp)?
        }
        Target::Uncorrelated => {
            let (p1, p2) = f
                .degrees()
                .ok_or_else(|| Error::contract("functional has no declared degrees"))?;
            let g = g_cross(scheme, p1, p2, rate.expect("validated"))?;
            limit_uncorrelated(p1, p2, f, model, &g)?
        }
        Target::Integer => {
            let FunctionalSpec::SignedProductPower { p1, p2 } = *f else {
                return Err(Error::contract(
                    "integer target needs a signed product power",
                ));
            };
            let rate = rate.expect("validated");
            let table = required_h(p1, p2)
                .into_iter()
                .map(|(k, m)| Ok(((k, m), h_stat(scheme, k, m, f64::from(p1 + p2), rate)?)))
                .collect::<Result<HTable>>()?;
            limit_integer(p1, p2, model, &table)?
        }
        Target::Preset { preset } => {
            let rate = rate.expect("validated");
            let q = preset.power();
            let p = f64::from(2 * q);
            let stats = PresetStats {
                h00: Some(h_stat(scheme, 0, 0, p, rate)?),
                g22: if q >= 2 {
                    Some(g_kmp(scheme, 2, 2, p, rate)?)
                } else {
                    None
                },
                g44: if q >= 4 {
                    Some(g_kmp(scheme, 4, 4, p, rate)?)
                } else {
                    None
                },
            };
            limit_preset(preset, model, &stats)?
        }
    })
}

/// Observation scheme of replication `r` at rung `n`, with the path-size guard applied.
pub fn draw_scheme(config: &ExperimentConfig, n: u64, r: u64) -> Result<ObservationScheme> {
    let scheme = config.scheme.generate(
        n,
        config.model.horizon,
        derive_seed(config.base_seed, n, r, Purpose::Scheme),
    )?;
    let points = scheme.observations_up_to_horizon() as u64;
    if points > config.max_path_points {
        return Err(Error::input(format!(
            "scheme too large: {points} observation times up to T exceed the limit of {}",
            config.max_path_points
        )));
    }
    Ok(scheme)
}

/// Path of replication `r` at rung `n`, sampled at the observation times of `scheme`.
pub fn draw_path(
    config: &ExperimentConfig,
    scheme: &ObservationScheme,
    n: u64,
    r: u64,
) -> Result<PathRecord> {
    sample_path(
        &config.model,
        &scheme.times_up_to_horizon(),
        derive_seed(config.base_seed, n, r, Purpose::Path),
    )
}

/// Run replication `r` at rung `n`.
pub fn run_replication(config: &ExperimentConfig, n: u64, r: u64) -> Result<Sample> {
    let scheme = draw_scheme(config, n, r)?;
    let path = draw_path(config, &scheme, n, r)?;
    let raw = match config.component {
        Some(l) => eval_v_onedim(&config.functional, &scheme, &path, l)?,
        None => eval_v(&config.functional, &scheme, &path)?,
    };
    let value = match config.normalization {
        Some(nm) => nm.rate(n).powf(nm.p / 2.0 - 1.0) * raw,
        None => raw,
    };
    let limit = target_limit(config, &scheme, &path.jumps, n)?;
    Ok(Sample { value, limit })
}

/// One ladder rung of a [`ConvergenceReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: u64,
    pub replications: u64,
    pub mean: f64,
    /// Sample standard deviation of the values over `√R`.
    pub std_error: f64,
    pub median: f64,
    /// Mean of the per-replication limits.
    pub limit: f64,
    /// Standard error of `value - limit`; equals `std_error` for a fixed limit.
    pub diff_std_error: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub pass: bool,
    pub runtime_secs: f64,
}

impl ReportRow {
    /// `|mean - limit| <= 4 · diff_std_error + 1e-12`.
    pub fn verdict(mean: f64, limit: f64, diff_std_error: f64) -> bool {
        (mean - limit).abs() <= VERDICT_SIGMAS * diff_std_error + VERDICT_SLACK
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
}

/// Column order of [`ConvergenceReport::to_csv`].
pub const CSV_HEADER: &str =
    "n,replications,mean,std_error,median,limit,diff_std_error,abs_error,rel_error,verdict";

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, n: u64) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Fixed-column CSV. Runtimes are left out so reruns are byte-identical.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.n,
                r.replications,
                r.mean,
                r.std_error,
                r.median,
                r.limit,
                r.diff_std_error,
                r.abs_error,
                r.rel_error,
                if r.pass { "pass" } else { "fail" }
            )
            .expect("writing to a String");
        }
        s
    }

    /// Aligned human-readable table including runtimes.
    pub fn to_rows(&self) -> String {
        let mut s = format!(
            "{:>8} {:>6} {:>14} {:>11} {:>14} {:>14} {:>11} {:>9} {:>7} {:>9}\n",
            "n", "R", "mean", "se", "median", "limit", "abs_err", "rel_err", "verdict", "secs"
        );
        for r in &self.rows {
            writeln!(
                s,
                "{:>8} {:>6} {:>14.6e} {:>11.3e} {:>14.6e} {:>14.6e} {:>11.3e} {:>9.2e} {:>7} {:>9.2}",
                r.n,
                r.replications,
                r.mean,
                r.std_error,
                r.median,
                r.limit,
                r.abs_error,
                r.rel_error,
                if r.pass { "pass" } else { "fail" },
                r.runtime_secs
            )
            .expect("writing to a String");
        }
        s
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().copied().sum::<NeumaierSum>().value() / r;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs
        .iter()
        .map(|x| (x - mean).powi(2))
        .sum::<NeumaierSum>()
        .value();
    (mean, (ss / (r - 1.0)).sqrt() / r.sqrt())
}

/// Median with the midpoint convention for even counts.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::input(format!("thread pool: {e}")))
}

/// All replications at rung `n`, in replication order.
pub fn run_rung(config: &ExperimentConfig, n: u64, jobs: usize) -> Result<Vec<Sample>> {
    let results: Vec<Result<Sample>> = pool(jobs)?.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| run_replication(config, n, r))
            .collect()
    });
    results
        .into_iter()
        .enumerate()
        .map(|(r, res)| {
            res.map_err(|e| Error::Replication {
                n,
                replication: r as u64,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Run every rung of the ladder. The report does not depend on `jobs`.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ConvergenceReport> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.n_ladder.len());
    for &n in &config.n_ladder {
        let start = Instant::now();
        let samples = run_rung(config, n, jobs)?;
        let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
        let limits: Vec<f64> = samples.iter().map(|s| s.limit).collect();
        let diffs: Vec<f64> = samples.iter().map(|s| s.value - s.limit).collect();
        let (mean, std_error) = mean_and_se(&values);
        let (limit, _) = mean_and_se(&limits);
        let (_, diff_std_error) = mean_and_se(&diffs);
        let abs_error = (mean - limit).abs();
        rows.push(ReportRow {
            n,
            replications: config.replications,
            mean,
            std_error,
            median: median(&values),
            limit,
            diff_std_error,
            abs_error,
            rel_error: abs_error / limit.abs(),
            pass: ReportRow::verdict(mean, limit, diff_std_error),
            runtime_secs: start.elapsed().as_secs_f64(),
        });
    }
    Ok(ConvergenceReport { rows })
}

/// Run the experiment and write its CSV to `config.output`, if set.
pub fn run_and_write(config: &ExperimentConfig, jobs: usize) -> Result<ConvergenceReport> {
    let report = run_experiment(config, jobs)?;
    if let Some(path) = &config.output {
        std::fs::write(path, report.to_csv())
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    }
    Ok(report)
}

/// Scheme diagnostics at one ladder rung.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub n: u64,
    /// Median over replications of `Σ |I¹|^{p1/2 ∧ 1} |I²|^{p2/2 ∧ 1}`.
    pub condition: f64,
    /// Largest number of intervals of one component meeting a single interval of the other.
    pub max_overlap: usize,
    pub mesh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub rows: Vec<DiagnosticsRow>,
    /// Least-squares slope of `ln condition` against `ln n`.
    pub slope: f64,
    pub divergent: bool,
}

/// Minimal log-log slope for the divergence flag.
pub const DIVERGENCE_SLOPE: f64 = 0.05;

/// Divergent when the values increase strictly along the whole ladder and
/// grow at least like `n^0.05`.
pub fn divergence_flag(ns: &[u64], values: &[f64]) -> (f64, bool) {
    if ns.len() < 2 || values.iter().any(|v| !(*v > 0.0)) {
        return (f64::NAN, false);
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let monotone = values.windows(2).all(|w| w[1] > w[0]);
    (slope, monotone && slope >= DIVERGENCE_SLOPE)
}

/// Overlap-power sums, overlap counts and meshes across the ladder.
pub fn run_scheme_diagnostics(config: &ExperimentConfig, jobs: usize) -> Result<DiagnosticsReport> {
    let d = config
        .diagnostics
        .ok_or_else(|| Error::input("diagnostics needs p1 and p2"))?;
    let horizon = config.model.horizon;
    let pool = pool(jobs)?;
    let mut rows = Vec::new();
    for &n in &config.n_ladder {
        let per_rep: Vec<Result<(f64, usize, f64)>> = pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|r| {
                    let seed = derive_seed(config.base_seed, n, r, Purpose::Scheme);
                    let scheme = config.scheme.generate(n, horizon, seed)?;
                    Ok((
                        overlap_power_sum(&scheme, d.p1, d.p2)?,
                        max_overlap_count(&scheme),
                        mesh(&scheme),
                    ))
                })
                .collect()
        });
        let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
        let conds: Vec<f64> = per_rep.iter().map(|x| x.0).collect();
        let meshes: Vec<f64> = per_rep.iter().map(|x| x.2).collect();
        rows.push(DiagnosticsRow {
            n,
            condition: median(&conds),
            max_overlap: per_rep.iter().map(|x| x.1).max().unwrap_or(0),
            mesh: median(&meshes),
        });
    }
    let ns: Vec<u64> = rows.iter().map(|r| r.n).collect();
    let conds: Vec<f64> = rows.iter().map(|r| r.condition).collect();
    let (slope, divergent) = divergence_flag(&ns, &conds);
    Ok(DiagnosticsReport {
        rows,
        slope,
        divergent,
    })
}

impl DiagnosticsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,condition,max_overlap,mesh\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{:e},{},{:e}",
                r.n, r.condition, r.max_overlap, r.mesh
            )
            .expect("writing to a String");
        }
        writeln!(
            s,
            "# slope={:e} {}",
            self.slope,
            if self.divergent {
                "divergent"
            } else {
                "stable"
            }
        )
        .expect("writing to a String");
        s
    }
}
