//! Command-line surface of the `mbinom` binary: single-point fits, grid
//! sweeps written as CSV or JSON, and named verification suites.
//!
//! Exit codes: 0 when every assertion passes, 1 when one fails, 2 for usage
//! errors (bad flags, parameters outside their domain, unwritable output).

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bounds::{bound_binomial, bound_constants, bound_nb};
use crate::chain::{exact_pmf, moments_closed_form, ChainParams, Start, MAX_EXACT_N};
use crate::coupling::{
    block_moments, marginal_fidelity, sample_blocks, sample_meeting_times, tau_tail_check,
    varsigma_tail_check, verify_lemma21,
};
use crate::error::{Error, Result};
use crate::fit::{exact_tv_to_fit, fit_binomial, fit_negative_binomial, BinFit, NbFit, Regime};
use crate::pmf::moments_from_pmf;
use crate::rng::derive_seed;
use crate::stein::{binomial_subset_run, nb_subset_run, verify_lemma24_indices, NbSteinSetup};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const SCHEMA_VERSION: u32 = 1;

/// Random sets per row for the `stein` sweep check.
pub const SWEEP_STEIN_SUBSETS: usize = 20;
/// Meeting-time samples per row for the `coupling` sweep check.
pub const SWEEP_COUPLING_SAMPLES: usize = 20_000;
/// Slack allowed when comparing exact distances with bounds.
const TV_SLACK: f64 = 1e-12;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Bounds,
    Stein,
    Coupling,
    Lemma21,
    Lemma24,
}

impl Check {
    pub fn as_str(&self) -> &'static str {
        match self {
            Check::Bounds => "bounds",
            Check::Stein => "stein",
            Check::Coupling => "coupling",
            Check::Lemma21 => "lemma21",
            Check::Lemma24 => "lemma24",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub n_list: Vec<usize>,
    pub checks: BTreeSet<Check>,
    pub seed: u64,
    /// `None` writes to standard output.
    pub output: Option<PathBuf>,
    pub format: Format,
    /// Compute the exact distance to the fitted law for every row.
    pub exact: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [
            ("alpha_grid", &self.alpha_grid),
            ("beta_grid", &self.beta_grid),
        ] {
            if grid.is_empty() {
                return Err(Error::InvalidParameter {
                    name,
                    value: f64::NAN,
                    reason: "grid is empty",
                });
            }
            for &v in grid {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::InvalidParameter {
                        name,
                        value: v,
                        reason: "must lie strictly between 0 and 1",
                    });
                }
            }
        }
        if self.n_list.is_empty() {
            return Err(Error::ZeroLength);
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n == 0 || n > MAX_EXACT_N) {
            return Err(Error::InvalidParameter {
                name: "n_list",
                value: n as f64,
                reason: "values must lie in 1..=100000",
            });
        }
        Ok(())
    }

    fn needs_exact(&self) -> bool {
        self.exact || self.checks.contains(&Check::Bounds)
    }
}

/// Regime, fitted law, moments and bound at one `(alpha, beta, n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub regime: Regime,
    pub mean: f64,
    pub variance: f64,
    pub nb: Option<NbFit>,
    pub binomial: Option<BinFit>,
    /// `"ok"`, or `"degenerate"` when the binomial match has no usable index.
    pub fit_status: &'static str,
    pub bound: Option<f64>,
    pub clipped_bound: Option<f64>,
    pub exact_tv: Option<f64>,
    pub truncation_tail: Option<f64>,
}

pub fn fit_record(params: &ChainParams, n: usize, exact: bool) -> Result<FitRecord> {
    let moments = moments_closed_form(params, n)?;
    let regime = crate::fit::classify_regime(params, n)?;
    let mut record = FitRecord {
        alpha: params.alpha(),
        beta: params.beta(),
        n,
        regime,
        mean: moments.mean,
        variance: moments.variance,
        nb: None,
        binomial: None,
        fit_status: "ok",
        bound: None,
        clipped_bound: None,
        exact_tv: None,
        truncation_tail: None,
    };
    let report = if regime == Regime::Underdispersed {
        match fit_binomial(params, n) {
            Ok(fit) => {
                record.binomial = Some(fit);
                bound_binomial(params, n, &fit)?
            }
            Err(Error::DegenerateFit { .. }) => {
                record.fit_status = "degenerate";
                return Ok(record);
            }
            Err(e) => return Err(e),
        }
    } else {
        record.nb = Some(fit_negative_binomial(params, n)?);
        bound_nb(params, n)?
    };
    record.bound = Some(report.bound_value);
    record.clipped_bound = Some(report.clipped_value);
    if exact {
        let d = exact_tv_to_fit(params, n)?;
        record.exact_tv = Some(d.tv);
        record.truncation_tail = Some(d.tail);
    }
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skipped => "skipped",
        }
    }

    fn of(pass: bool) -> Self {
        if pass {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub status: CheckStatus,
    /// Smallest `bound - observed` over the assertions of the check, when
    /// the check has a numeric margin.
    pub slack: Option<f64>,
}

impl CheckOutcome {
    fn skipped() -> Self {
        Self {
            status: CheckStatus::Skipped,
            slack: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub fit: FitRecord,
    pub checks: BTreeMap<Check, CheckOutcome>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.checks.values().any(|c| c.status == CheckStatus::Fail)
    }
}

/// Indices used for the per-index conditional-law checks.
pub fn lemma24_indices(n: usize) -> Vec<usize> {
    if n <= 100 {
        (1..=n).collect()
    } else {
        let mut v: Vec<usize> = (0..16).map(|k| 1 + k * (n - 1) / 15).collect();
        v.dedup();
        v
    }
}

fn run_check(
    check: Check,
    params: &ChainParams,
    record: &FitRecord,
    seed: u64,
) -> Result<CheckOutcome> {
    let n = record.n;
    Ok(match check {
        Check::Bounds => match (
            record.exact_tv,
            record.clipped_bound,
            record.truncation_tail,
        ) {
            (Some(tv), Some(clipped), Some(tail)) => {
                let slack = clipped + tail - tv;
                CheckOutcome {
                    status: CheckStatus::of(slack >= -TV_SLACK),
                    slack: Some(slack),
                }
            }
            _ => CheckOutcome::skipped(),
        },
        Check::Stein => {
            let summary = if let Some(fit) = record.binomial {
                binomial_subset_run(fit.m, fit.theta, SWEEP_STEIN_SUBSETS, seed)?
            } else if record.nb.is_some() {
                nb_subset_run(
                    &NbSteinSetup::from_fit(params, n)?,
                    SWEEP_STEIN_SUBSETS,
                    seed,
                )?
            } else {
                return Ok(CheckOutcome::skipped());
            };
            CheckOutcome {
                status: CheckStatus::of(summary.pass()),
                slack: Some(summary.delta_bound - summary.max_delta),
            }
        }
        Check::Coupling => {
            let samples = sample_meeting_times(params, SWEEP_COUPLING_SAMPLES, seed)?;
            let rows = varsigma_tail_check(params, &samples, 6)
                .into_iter()
                .chain(tau_tail_check(params, &samples, 8));
            let mut pass = samples.iter().all(|s| s.diagonal_held);
            for r in rows {
                pass &= r.pass;
            }
            CheckOutcome {
                status: CheckStatus::of(pass),
                slack: None,
            }
        }
        Check::Lemma21 => {
            let r = verify_lemma21(params, n)?;
            CheckOutcome {
                status: CheckStatus::of(r.pass),
                slack: Some(r.gamma - r.shift_tv),
            }
        }
        Check::Lemma24 => {
            let reports = verify_lemma24_indices(params, n, lemma24_indices(n))?;
            let slack = reports
                .iter()
                .map(|r| (r.rhs_sup - r.lhs_sup).min(r.rhs_probe - r.probe_lhs_max))
                .fold(f64::INFINITY, f64::min);
            CheckOutcome {
                status: CheckStatus::of(reports.iter().all(|r| r.pass)),
                slack: Some(slack),
            }
        }
    })
}

/// Computes every row of a sweep, `alpha` outermost and `n` innermost.
pub fn sweep_rows(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &alpha in &config.alpha_grid {
        for &beta in &config.beta_grid {
            let params = ChainParams::new(alpha, beta)?;
            for &n in &config.n_list {
                let seed = derive_seed(config.seed, rows.len() as u64);
                let fit = fit_record(&params, n, config.needs_exact())?;
                let mut checks = BTreeMap::new();
                for &check in &config.checks {
                    checks.insert(check, run_check(check, &params, &fit, seed)?);
                }
                rows.push(SweepRow { fit, checks });
            }
        }
    }
    Ok(rows)
}

/// 17 significant digits, enough to round-trip any `f64`; non-finite and
/// missing values are empty fields.
fn csv_float(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        _ => String::new(),
    }
}

fn json_float(x: Option<f64>) -> Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        _ => Value::Null,
    }
}

const FIT_COLUMNS: [&str; 17] = [
    "alpha",
    "beta",
    "n",
    "regime",
    "fit_status",
    "mean",
    "variance",
    "r",
    "q",
    "m_tilde",
    "m",
    "theta",
    "epsilon",
    "bound",
    "clipped_bound",
    "exact_tv",
    "truncation_tail",
];

fn fit_floats(f: &FitRecord) -> [(usize, Option<f64>); 13] {
    let nb = f.nb.filter(|x| !x.poisson_limit);
    let bin = f.binomial;
    [
        (0, Some(f.alpha)),
        (1, Some(f.beta)),
        (5, Some(f.mean)),
        (6, Some(f.variance)),
        (7, nb.map(|x| x.r)),
        (8, nb.map(|x| x.q)),
        (9, bin.map(|x| x.m_tilde)),
        (11, bin.map(|x| x.theta)),
        (12, bin.map(|x| x.epsilon)),
        (13, f.bound),
        (14, f.clipped_bound),
        (15, f.exact_tv),
        (16, f.truncation_tail),
    ]
}

pub fn write_csv<W: Write>(config: &SweepConfig, rows: &[SweepRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIT_COLUMNS.iter().map(|s| s.to_string()).collect();
    for check in &config.checks {
        header.push(format!("{}_status", check.as_str()));
        header.push(format!("{}_slack", check.as_str()));
    }
    writer.write_record(&header)?;
    for row in rows {
        let f = &row.fit;
        let mut fields = vec![String::new(); FIT_COLUMNS.len()];
        for (i, v) in fit_floats(f) {
            fields[i] = csv_float(v);
        }
        fields[2] = f.n.to_string();
        fields[3] = f.regime.as_str().to_string();
        fields[4] = f.fit_status.to_string();
        fields[10] = f.binomial.map(|b| b.m.to_string()).unwrap_or_default();
        for check in &config.checks {
            let c = &row.checks[check];
            fields.push(c.status.as_str().to_string());
            fields.push(csv_float(c.slack));
        }
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

fn row_json(config: &SweepConfig, row: &SweepRow) -> Value {
    let f = &row.fit;
    let mut obj = Map::new();
    for (i, v) in fit_floats(f) {
        obj.insert(FIT_COLUMNS[i].to_string(), json_float(v));
    }
    obj.insert("n".into(), json!(f.n));
    obj.insert("regime".into(), json!(f.regime.as_str()));
    obj.insert("fit_status".into(), json!(f.fit_status));
    obj.insert("m".into(), f.binomial.map_or(Value::Null, |b| json!(b.m)));
    let mut checks = Map::new();
    for check in &config.checks {
        let c = &row.checks[check];
        checks.insert(
            check.as_str().to_string(),
            json!({ "status": c.status.as_str(), "slack": json_float(c.slack) }),
        );
    }
    obj.insert("checks".into(), Value::Object(checks));
    Value::Object(obj)
}

pub fn sweep_json(config: &SweepConfig, rows: &[SweepRow]) -> Value {
    let failures = rows.iter().filter(|r| r.failed()).count();
    let skipped = rows
        .iter()
        .flat_map(|r| r.checks.values())
        .filter(|c| c.status == CheckStatus::Skipped)
        .count();
    json!({
        "schema_version": SCHEMA_VERSION,
        "config": {
            "alpha_grid": config.alpha_grid,
            "beta_grid": config.beta_grid,
            "n_list": config.n_list,
            "checks": config.checks.iter().map(Check::as_str).collect::<Vec<_>>(),
            "seed": config.seed,
            "exact": config.needs_exact(),
        },
        "rows": rows.iter().map(|r| row_json(config, r)).collect::<Vec<_>>(),
        "summary": {
            "rows": rows.len(),
            "failed_rows": failures,
            "skipped_checks": skipped,
            "status": if failures == 0 { "pass" } else { "fail" },
        },
    })
}

/// Runs a sweep and writes it to `config.output` (or `stdout` when unset).
/// Returns the computed rows.
pub fn cmd_sweep(config: &SweepConfig, stdout: &mut dyn Write) -> Result<Vec<SweepRow>> {
    let rows = sweep_rows(config)?;
    let mut sink: Box<dyn Write + '_> = match &config.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(&mut *stdout),
    };
    match config.format {
        Format::Csv => write_csv(config, &rows, &mut sink)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, &sweep_json(config, &rows))?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Moments,
    Bounds,
    Lemma21,
    Lemma22,
    Lemma24,
    SteinNb,
    SteinBin,
    Coupling,
    Blocks,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Moments => "moments",
            Suite::Bounds => "bounds",
            Suite::Lemma21 => "lemma21",
            Suite::Lemma22 => "lemma22",
            Suite::Lemma24 => "lemma24",
            Suite::SteinNb => "stein-nb",
            Suite::SteinBin => "stein-bin",
            Suite::Coupling => "coupling",
            Suite::Blocks => "blocks",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub subsets: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Outcome of a verification suite with the statistics it printed.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suite: Suite,
    pub pass: bool,
    pub stats: Vec<(String, String)>,
}

impl VerifyReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            pass: true,
            stats: Vec::new(),
        }
    }

    fn stat(&mut self, key: impl Into<String>, value: impl ToString) {
        self.stats.push((key.into(), value.to_string()));
    }

    fn assert(&mut self, key: &str, ok: bool) {
        self.pass &= ok;
        self.stat(key, if ok { "pass" } else { "fail" });
    }
}

pub fn cmd_verify(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    let params = ChainParams::new(opts.alpha, opts.beta)?;
    let n = opts.n;
    let mut rep = VerifyReport::new(suite);
    match suite {
        Suite::Moments => {
            let closed = moments_closed_form(&params, n)?;
            let (mean, var) = moments_from_pmf(&exact_pmf(&params, n, Start::Stationary)?);
            let rel_mean = (mean - closed.mean).abs() / closed.mean;
            let rel_var = (var - closed.variance).abs() / closed.variance;
            rep.stat("mean_closed", closed.mean);
            rep.stat("mean_pmf", mean);
            rep.stat("variance_closed", closed.variance);
            rep.stat("variance_pmf", var);
            rep.assert(
                "relative_error_le_1e-10",
                rel_mean <= 1e-10 && rel_var <= 1e-10,
            );
        }
        Suite::Bounds => {
            let record = fit_record(&params, n, true)?;
            rep.stat("regime", record.regime);
            match (
                record.exact_tv,
                record.clipped_bound,
                record.truncation_tail,
            ) {
                (Some(tv), Some(clipped), Some(tail)) => {
                    rep.stat("exact_tv", tv);
                    rep.stat("bound", record.bound.unwrap_or(f64::NAN));
                    rep.stat("truncation_tail", tail);
                    rep.stat("slack", clipped + tail - tv);
                    rep.assert("tv_le_bound", tv <= clipped + tail + TV_SLACK);
                }
                _ => rep.stat("fit_status", record.fit_status),
            }
        }
        Suite::Lemma21 => {
            let r = verify_lemma21(&params, n)?;
            rep.stat("shift_tv", r.shift_tv);
            rep.stat("gamma_n", r.gamma);
            rep.stat("sqrt_n_shift_tv", r.scaled);
            rep.stat("two_k1", 2.0 * r.k1);
            rep.assert("shift_tv_le_gamma", r.pass);
        }
        Suite::Lemma22 => {
            let mut over = 0;
            let mut violations = 0;
            for k in 1..=n {
                let m = moments_closed_form(&params, k)?;
                if m.variance >= m.mean {
                    over += 1;
                    violations += usize::from(params.beta() <= params.alpha());
                }
            }
            rep.stat("lengths_checked", n);
            rep.stat("overdispersed", over);
            rep.stat("violations", violations);
            rep.assert("overdispersion_implies_beta_gt_alpha", violations == 0);
        }
        Suite::Lemma24 => {
            let reports = verify_lemma24_indices(&params, n, lemma24_indices(n))?;
            let worst_sup = reports
                .iter()
                .map(|r| r.rhs_sup - r.lhs_sup)
                .fold(f64::INFINITY, f64::min);
            let worst_probe = reports
                .iter()
                .map(|r| r.rhs_probe - r.probe_lhs_max)
                .fold(f64::INFINITY, f64::min);
            rep.stat("indices", reports.len());
            rep.stat("rhs_sup", reports[0].rhs_sup);
            rep.stat("min_slack_sup", worst_sup);
            rep.stat("rhs_probe", reports[0].rhs_probe);
            rep.stat("min_slack_threshold_probes", worst_probe);
            rep.stat(
                "probe_note",
                "threshold indicators only; necessary condition",
            );
            rep.assert("all_indices", reports.iter().all(|r| r.pass));
        }
        Suite::SteinNb => {
            let setup = NbSteinSetup::from_fit(&params, n)?;
            let run = nb_subset_run(&setup, opts.subsets, opts.seed)?;
            rep.stat("a", setup.a);
            rep.stat("b", setup.b);
            rep.stat("truncation", setup.truncation());
            rep.stat("subsets", run.subsets);
            rep.stat("max_residual", run.max_residual);
            rep.stat("max_delta", run.max_delta);
            rep.stat("delta_bound", run.delta_bound);
            rep.assert("all_subsets", run.pass());
        }
        Suite::SteinBin => {
            let fit = fit_binomial(&params, n)?;
            let run = binomial_subset_run(fit.m, fit.theta, opts.subsets, opts.seed)?;
            rep.stat("m", fit.m);
            rep.stat("theta", fit.theta);
            rep.stat("subsets", run.subsets);
            rep.stat("max_residual", run.max_residual);
            rep.stat("max_delta", run.max_delta);
            rep.stat("delta_bound", run.delta_bound);
            rep.stat("min_inequality_slack", run.min_inequality_slack);
            rep.assert("all_subsets", run.pass());
        }
        Suite::Coupling => {
            let samples = sample_meeting_times(&params, opts.samples, opts.seed)?;
            for r in varsigma_tail_check(&params, &samples, 6) {
                rep.stat(
                    format!("varsigma_ge_{}", r.m),
                    format!("{} ref {} sd {}", r.empirical, r.reference, r.sd),
                );
                rep.pass &= r.pass;
            }
            for r in tau_tail_check(&params, &samples, 8) {
                rep.stat(
                    format!("tau_ge_{}", r.m),
                    format!("{} bound {} sd {}", r.empirical, r.reference, r.sd),
                );
                rep.pass &= r.pass;
            }
            rep.stat("censored", samples.iter().filter(|s| s.censored).count());
            rep.assert(
                "diagonal_absorbing",
                samples.iter().all(|s| s.diagonal_held),
            );
            let fidelity = marginal_fidelity(&params, opts.samples, derive_seed(opts.seed, 1))?;
            rep.stat("chi2_z1", fidelity.chi2_z1);
            rep.stat("chi2_z0", fidelity.chi2_z0);
            rep.stat("chi2_threshold", fidelity.threshold);
            rep.assert("marginal_fidelity", fidelity.pass);
        }
        Suite::Blocks => {
            let samples = sample_blocks(&params, opts.samples, opts.seed)?;
            let m = block_moments(&params, &samples);
            let consts = bound_constants(&params);
            rep.stat("mean_odd", format!("{} vs {}", m.mean_odd, consts.mu1));
            rep.stat("var_odd", format!("{} vs {}", m.var_odd, consts.sigma1_sq));
            rep.stat("mean_even", format!("{} vs {}", m.mean_even, consts.mu2));
            rep.stat(
                "var_even",
                format!("{} vs {}", m.var_even, consts.sigma2_sq),
            );
            rep.assert("within_5_standard_errors", m.within(samples.len(), 5.0));
        }
    }
    Ok(rep)
}

fn probability(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn length(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if (1..=MAX_EXACT_N).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in 1..={MAX_EXACT_N}"))
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{e}")),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mbinom",
    version,
    about = "Markov binomial laws: fits, error bounds and numerical checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one parameter point and report its bound.
    Fit(FitArgs),
    /// Evaluate a grid of parameter points.
    Sweep(SweepArgs),
    /// Run a named verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = probability)]
    pub alpha: f64,
    #[arg(long, value_parser = probability)]
    pub beta: f64,
    #[arg(long, value_parser = length)]
    pub n: usize,
    /// Also compute the exact distance to the fitted law (O(n^2)).
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated values of P(0 -> 1)
    #[arg(long, value_delimiter = ',', required = true, value_parser = probability)]
    pub alpha_grid: Vec<f64>,
    /// Comma-separated values of P(1 -> 1)
    #[arg(long, value_delimiter = ',', required = true, value_parser = probability)]
    pub beta_grid: Vec<f64>,
    /// Comma-separated chain lengths
    #[arg(long, value_delimiter = ',', required = true, value_parser = length)]
    pub n_list: Vec<usize>,
    /// Comma-separated checks to run on every point
    #[arg(long, value_delimiter = ',')]
    pub checks: Vec<Check>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also compute the exact distance to the fitted law
    #[arg(long)]
    pub exact: bool,
}

impl SweepArgs {
    pub fn into_config(self) -> SweepConfig {
        SweepConfig {
            alpha_grid: self.alpha_grid,
            beta_grid: self.beta_grid,
            n_list: self.n_list,
            checks: self.checks.into_iter().collect(),
            seed: self.seed,
            output: self.output,
            format: self.format,
            exact: self.exact,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long, value_parser = probability, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, value_parser = probability, default_value_t = 0.6)]
    pub beta: f64,
    #[arg(long, value_parser = length, default_value_t = 100)]
    pub n: usize,
    /// Random sets for the Stein suites.
    #[arg(long, value_parser = positive, default_value_t = 200)]
    pub subsets: usize,
    /// Monte-Carlo samples for the coupling and block suites.
    #[arg(long, value_parser = positive, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn print_fit(record: &FitRecord, json: bool, out: &mut dyn Write) -> io::Result<()> {
    if json {
        let mut v = serde_json::to_value(record).unwrap_or(Value::Null);
        if let Value::Object(obj) = &mut v {
            obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
            obj.insert("regime".into(), json!(record.regime.as_str()));
            if let Some(nb) = obj.get_mut("nb").and_then(Value::as_object_mut) {
                // NB(∞, 1): r is infinite and not representable in JSON.
                if record.nb.is_some_and(|f| f.poisson_limit) {
                    nb.insert("r".into(), Value::Null);
                }
            }
        }
        return writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&v).unwrap_or_default()
        );
    }
    writeln!(out, "regime={}", record.regime)?;
    writeln!(out, "mean={}", record.mean)?;
    writeln!(out, "variance={}", record.variance)?;
    if let Some(nb) = record.nb {
        if nb.poisson_limit {
            writeln!(out, "law=poisson")?;
            writeln!(out, "lambda={}", nb.lambda)?;
        } else {
            writeln!(out, "law=negative-binomial")?;
            writeln!(out, "r={}", nb.r)?;
            writeln!(out, "q={}", nb.q)?;
        }
    }
    if let Some(b) = record.binomial {
        writeln!(out, "law=binomial")?;
        writeln!(out, "m_tilde={}", b.m_tilde)?;
        writeln!(out, "m={}", b.m)?;
        writeln!(out, "theta={}", b.theta)?;
        writeln!(out, "epsilon={}", b.epsilon)?;
    }
    writeln!(out, "fit_status={}", record.fit_status)?;
    if let (Some(b), Some(c)) = (record.bound, record.clipped_bound) {
        writeln!(out, "bound={b}")?;
        writeln!(out, "clipped_bound={c}")?;
    }
    if let (Some(tv), Some(tail)) = (record.exact_tv, record.truncation_tail) {
        writeln!(out, "exact_tv={tv}")?;
        writeln!(out, "truncation_tail={tail}")?;
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_PASS;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        // The reader went away (e.g. `| head`); nothing left to report.
        Err(e) if is_broken_pipe(&e) => EXIT_PASS,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn is_broken_pipe(e: &Error) -> bool {
    let io = match e {
        Error::Io(io) => Some(io),
        Error::Csv(c) => match c.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        },
        Error::Json(j) => return j.io_error_kind() == Some(io::ErrorKind::BrokenPipe),
        _ => None,
    };
    io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Fit(args) => {
            let params = ChainParams::new(args.alpha, args.beta)?;
            let record = fit_record(&params, args.n, args.exact)?;
            print_fit(&record, args.json, stdout)?;
            Ok(EXIT_PASS)
        }
        Command::Sweep(args) => {
            let rows = cmd_sweep(&args.into_config(), stdout)?;
            Ok(if rows.iter().any(SweepRow::failed) {
                EXIT_FAIL
            } else {
                EXIT_PASS
            })
        }
        Command::Verify(args) => {
            let opts = VerifyOptions {
                alpha: args.alpha,
                beta: args.beta,
                n: args.n,
                subsets: args.subsets,
                samples: args.samples,
                seed: args.seed,
            };
            let report = cmd_verify(args.suite, &opts)?;
            writeln!(stdout, "suite={}", report.suite.name())?;
            for (k, v) in &report.stats {
                writeln!(stdout, "{k}={v}")?;
            }
            writeln!(
                stdout,
                "result={}",
                if report.pass { "pass" } else { "fail" }
            )?;
            Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
        }
    }
}
