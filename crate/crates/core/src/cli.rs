//! The `wavespec` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::benchmark::{run_benchmark, standard_grid, BenchmarkConfig, BenchmarkReport};
use crate::diagnostics::{overlay, qq_ratios};
use crate::error::{Error, Result};
use crate::estimation::{fit_from, FitResult, Method, MethodKind, OptimizerConfig, SpectrumForm, DEFAULT_ML_MAX_N};
use crate::model::WaveParams;
use crate::nonparam::{periodogram, select_frequencies, Band};
use crate::sampling::{QuadratureConfig, QuadratureOverrides, SamplingScheme, TimeSeries};
use crate::simulation::simulate_gaussian;
use crate::uncertainty::{correlation_matrix, estimator_variance_and_ci};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "WAVESPEC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "wavespec", version, about = "Fit, simulate and diagnose parametric wave spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate Gaussian records with a JONSWAP spectrum.
    Simulate(SimulateArgs),
    /// Fit a spectral model to a record.
    Fit(FitArgs),
    /// Sandwich confidence intervals for a de-biased Whittle fit.
    Ci(CiArgs),
    /// Q-Q, correlation or periodogram overlay tables for a fit.
    Diagnose(DiagnoseArgs),
    /// Monte Carlo comparison of estimators.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ThetaArgs {
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.7)]
    pub omega_p: f64,
    #[arg(long, default_value_t = 3.3)]
    pub gamma: f64,
    #[arg(long, default_value_t = 4.0)]
    pub r: f64,
}

#[derive(Args, Debug, Clone, Default)]
pub struct QuadArgs {
    /// Riemann grid size M.
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Number of aliasing folds K on each side.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Tail density below which folds stop.
    #[arg(long)]
    pub tail_threshold: Option<f64>,
}

impl QuadArgs {
    fn overrides(&self) -> QuadratureOverrides {
        QuadratureOverrides {
            m: self.grid_size,
            k_folds: self.folds,
            tail_threshold: self.tail_threshold,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct LengthArgs {
    /// Record length in samples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Record length in seconds (rounded to whole samples).
    #[arg(long)]
    pub duration: Option<f64>,
}

impl LengthArgs {
    fn scheme(&self, delta: f64) -> Result<SamplingScheme> {
        match (self.n, self.duration) {
            (Some(n), None) => SamplingScheme::new(delta, n),
            (None, Some(d)) => SamplingScheme::from_duration(delta, d),
            _ => Err(Error::config("give exactly one of --n and --duration")),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct BandArgs {
    #[arg(long, default_value_t = 0.0)]
    pub omega_min: f64,
    /// Upper band edge; defaults to Nyquist.
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// Keep the zero and Nyquist frequencies if they fall in the band.
    #[arg(long)]
    pub keep_zero_nyquist: bool,
}

impl BandArgs {
    fn band(&self) -> Band {
        Band {
            omega_min: self.omega_min,
            omega_max: self.omega_max.unwrap_or(f64::INFINITY),
            drop_zero_nyquist: !self.keep_zero_nyquist,
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[arg(long, default_value_t = 0.78125)]
    pub delta: f64,
    #[command(flatten)]
    pub length: LengthArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Output CSV; with several reps, files are numbered `<stem>_0001.csv`, ...
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ls,
    Bls,
    Whittle,
    AliasedWhittle,
    #[value(alias = "dw")]
    DebiasedWhittle,
    #[value(alias = "ml")]
    GaussianMl,
}

impl From<MethodArg> for MethodKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ls => MethodKind::Ls,
            MethodArg::Bls => MethodKind::Bls,
            MethodArg::Whittle => MethodKind::Whittle,
            MethodArg::AliasedWhittle => MethodKind::AliasedWhittle,
            MethodArg::DebiasedWhittle => MethodKind::DebiasedWhittle,
            MethodArg::GaussianMl => MethodKind::GaussianMl,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct MethodOptions {
    /// Fit the first-differenced record.
    #[arg(long)]
    pub difference: bool,
    /// Bartlett segment length in samples (BLS).
    #[arg(long)]
    pub segment_len: Option<usize>,
    /// Largest record accepted by the exact likelihood.
    #[arg(long, default_value_t = DEFAULT_ML_MAX_N)]
    pub ml_max_n: usize,
    /// Compare LS/BLS estimates with the aliased density.
    #[arg(long)]
    pub ls_aliased: bool,
}

impl MethodOptions {
    fn method(&self, kind: MethodKind) -> Method {
        Method {
            kind,
            differenced: self.difference,
            bartlett_segment_len: self.segment_len,
            ls_form: if self.ls_aliased {
                SpectrumForm::Aliased
            } else {
                SpectrumForm::Continuous
            },
            ml_max_n: self.ml_max_n,
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Record CSV: one elevation per line, optional `elevation` header.
    pub input: PathBuf,
    /// Sampling interval in seconds; read from the sidecar JSON if omitted.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value = "debiased-whittle")]
    pub method: MethodArg,
    #[command(flatten)]
    pub band: BandArgs,
    #[command(flatten)]
    pub options: MethodOptions,
    /// Seed recorded in the output (taken from the sidecar if omitted).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Starting values: a JSON parameter object or an earlier fit.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Args, Debug)]
pub struct CiArgs {
    /// Fit JSON written by `wavespec fit`.
    pub fit: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DiagnoseKind {
    Qq,
    Corr,
    Overlay,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Record CSV the fit was computed from.
    pub input: PathBuf,
    /// Fit JSON written by `wavespec fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, value_enum, default_value = "qq")]
    pub kind: DiagnoseKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    /// The single canonical sea state.
    Canonical,
    /// 24 combinations of peak frequency, peak enhancement and tail.
    Standard,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Comma-separated methods.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ls,bls,debiased-whittle")]
    pub methods: Vec<MethodArg>,
    #[arg(long, value_enum, default_value = "canonical")]
    pub grid: GridArg,
    #[arg(long, default_value_t = 0.78125)]
    pub delta: f64,
    #[command(flatten)]
    pub length: LengthArgs,
    #[command(flatten)]
    pub band: BandArgs,
    #[command(flatten)]
    pub options: MethodOptions,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report CSV; a JSON copy is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub quad: QuadArgs,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match configure_threads().and_then(|_| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    // A second initialisation (library callers) is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Ci(a) => cmd_ci(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
    }
}

fn theta_from(a: &ThetaArgs) -> Result<WaveParams> {
    WaveParams::new(a.alpha, a.omega_p, a.gamma, a.r).map_err(|e| Error::config(e.to_string()))
}

/// Sidecar path: the input path with a `.json` extension.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn numbered(out: &Path, rep: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}_{:04}.{ext}", rep + 1))
}

/// Writes one elevation per line under an `elevation` header, 17
/// significant digits.
pub fn write_series(path: &Path, x: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["elevation"])?;
    for v in x.values() {
        w.write_record([format!("{v:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a record written by [`write_series`] or any single-column file.
pub fn read_series(path: &Path, delta: f64) -> Result<TimeSeries> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0) else { continue };
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 && field.eq_ignore_ascii_case("elevation") => {}
            Err(_) => {
                return Err(Error::Parse(format!(
                    "{}: line {}: '{field}' is not a number",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(Error::config(format!("{} holds no samples", path.display())));
    }
    TimeSeries::new(values, delta).map_err(|e| Error::config(e.to_string()))
}

fn write_json(path: Option<&Path>, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match path {
        Some(p) => fs::write(p, text + "\n")?,
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn quad_json(q: &QuadratureConfig) -> Value {
    json!({ "M": q.m, "K": q.k_folds, "threshold": q.tail_threshold })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let theta = theta_from(&a.theta)?;
    let scheme = a.length.scheme(a.delta)?;
    if a.reps == 0 {
        return Err(Error::config("--reps must be at least 1"));
    }
    let quad = a.quad.overrides().resolve(&theta, &scheme)?;
    let sim = simulate_gaussian(&theta, &scheme, &quad, a.seed, a.reps)?;
    for (rep, x) in sim.records.iter().enumerate() {
        let path = if a.reps == 1 { a.out.clone() } else { numbered(&a.out, rep) };
        write_series(&path, x)?;
        let side = json!({
            "theta": theta,
            "delta": scheme.delta,
            "n": scheme.n,
            "seed": a.seed,
            "rep": rep,
            "reps": a.reps,
            "quadrature": quad_json(&quad),
            "embedding": sim.report,
        });
        write_json(Some(&sidecar_path(&path)), &side)?;
    }
    Ok(())
}

/// The `selection` block of a fit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub omega_min: f64,
    pub omega_max: f64,
    #[serde(default = "yes")]
    pub drop_zero_nyquist: bool,
    /// Fourier indices of the fitted grid left out of the objective.
    pub dropped: Vec<i64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadRecord {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub alpha: f64,
    pub omega_p: f64,
    pub gamma: f64,
    pub r: f64,
}

impl From<&WaveParams> for ThetaRecord {
    fn from(t: &WaveParams) -> Self {
        ThetaRecord {
            alpha: t.alpha,
            omega_p: t.omega_p,
            gamma: t.gamma,
            r: t.r,
        }
    }
}

/// JSON form of a fit, sufficient to rebuild the [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: MethodKind,
    pub theta_hat: ThetaRecord,
    pub init: ThetaRecord,
    pub objective: f64,
    pub objective_at_init: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub selection: SelectionRecord,
    pub differenced: bool,
    pub quadrature: QuadRecord,
    pub seed: Option<u64>,
    pub delta: f64,
    /// Length of the input record (before differencing).
    pub n: usize,
    pub segment_len: Option<usize>,
    pub ml_max_n: usize,
    pub ls_form: SpectrumForm,
    pub tail_fallback: bool,
    /// Shape constants and smoothing of the fitted model.
    pub model: WaveParams,
}

impl FitRecord {
    pub fn from_fit(r: &FitResult, n: usize, band: &Band, seed: Option<u64>) -> Self {
        let scheme = r.selection.scheme();
        FitRecord {
            method: r.method.kind,
            theta_hat: (&r.theta_hat).into(),
            init: (&r.init).into(),
            objective: r.objective_at_opt,
            objective_at_init: r.objective_at_init,
            converged: r.converged,
            iterations: r.iterations,
            evaluations: r.evaluations,
            selection: SelectionRecord {
                omega_min: band.omega_min,
                omega_max: band.omega_max.min(scheme.nyquist()),
                drop_zero_nyquist: band.drop_zero_nyquist,
                dropped: r.selection.dropped(),
            },
            differenced: r.method.differenced,
            quadrature: QuadRecord {
                m: r.quadrature.m,
                k: r.quadrature.k_folds,
                threshold: r.quadrature.tail_threshold,
            },
            seed,
            delta: scheme.delta,
            n,
            segment_len: r.method.bartlett_segment_len,
            ml_max_n: r.method.ml_max_n,
            ls_form: r.method.ls_form,
            tail_fallback: r.tail_fallback,
            model: r.theta_hat,
        }
    }

    pub fn method(&self) -> Method {
        Method {
            kind: self.method,
            differenced: self.differenced,
            bartlett_segment_len: self.segment_len,
            ls_form: self.ls_form,
            ml_max_n: self.ml_max_n,
        }
    }

    fn theta(&self, t: &ThetaRecord) -> Result<WaveParams> {
        let v = self.model.with_free([t.alpha, t.omega_p, t.gamma, t.r]);
        v.validate().map_err(|e| Error::config(e.to_string()))?;
        Ok(v)
    }

    /// Sampling scheme of the fitted record (after differencing).
    pub fn fitted_scheme(&self) -> Result<SamplingScheme> {
        let n = if self.differenced { self.n.saturating_sub(1) } else { self.n };
        SamplingScheme::new(self.delta, n).map_err(|e| Error::config(e.to_string()))
    }

    /// Rebuilds the fit; the selection is recomputed from the band.
    pub fn to_fit(&self) -> Result<FitResult> {
        let scheme = self.fitted_scheme()?;
        let selection = select_frequencies(
            &scheme,
            self.selection.omega_min,
            self.selection.omega_max,
            self.selection.drop_zero_nyquist,
        )?;
        Ok(FitResult {
            theta_hat: self.theta(&self.theta_hat)?,
            method: self.method(),
            objective_at_opt: self.objective,
            objective_at_init: self.objective_at_init,
            selection,
            converged: self.converged,
            iterations: self.iterations,
            evaluations: self.evaluations,
            init: self.theta(&self.init)?,
            tail_fallback: self.tail_fallback,
            quadrature: QuadratureConfig::new(self.quadrature.m, self.quadrature.k, self.quadrature.threshold),
        })
    }
}

fn load_fit(path: &Path) -> Result<FitRecord> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_init(path: &Path) -> Result<WaveParams> {
    let v = read_json(path)?;
    let t = v.get("theta_hat").or_else(|| v.get("theta")).unwrap_or(&v);
    let theta: WaveParams = serde_json::from_value(t.clone())?;
    theta.validate().map_err(|e| Error::config(e.to_string()))?;
    Ok(theta)
}

fn resolve_delta(flag: Option<f64>, input: &Path) -> Result<(f64, Option<Value>)> {
    let side = sidecar_path(input);
    let sidecar = if side.exists() { Some(read_json(&side)?) } else { None };
    let delta = match (flag, sidecar.as_ref().and_then(|s| s.get("delta")).and_then(Value::as_f64)) {
        (Some(d), _) => d,
        (None, Some(d)) => d,
        (None, None) => {
            return Err(Error::config(format!(
                "no --delta given and no sidecar {} with a delta",
                side.display()
            )))
        }
    };
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::config("--delta must be positive"));
    }
    Ok((delta, sidecar))
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let (delta, sidecar) = resolve_delta(a.delta, &a.input)?;
    let seed = a
        .seed
        .or_else(|| sidecar.as_ref().and_then(|s| s.get("seed")).and_then(Value::as_u64));
    let x = read_series(&a.input, delta)?;
    let band = a.band.band();
    let selection = select_frequencies(&x.scheme(), band.omega_min, band.omega_max, band.drop_zero_nyquist)?;
    let method = a.options.method(a.method.into());
    let init = a.init.as_deref().map(load_init).transpose()?;
    let r = fit_from(
        &x,
        &method,
        &selection,
        &a.quad.overrides(),
        &OptimizerConfig::default(),
        init,
    )?;
    let record = FitRecord::from_fit(&r, x.len(), &band, seed);
    write_json(a.out.as_deref(), &serde_json::to_value(&record)?)
}

fn cmd_ci(a: &CiArgs) -> Result<()> {
    let record = load_fit(&a.fit)?;
    let fit = record.to_fit()?;
    let report = estimator_variance_and_ci(&fit, a.level)?;
    let clipped: Vec<&str> = report
        .intervals
        .iter()
        .filter(|c| c.clipped)
        .map(|c| c.parameter.as_str())
        .collect();
    let out = json!({
        "method": record.method,
        "theta_hat": record.theta_hat,
        "level": report.level,
        "z": report.z,
        "var_theta": report.variance.var_theta,
        "hessian_expect": report.variance.hessian_expect,
        "score_var": report.variance.score_var,
        "pseudo_inverse": report.variance.pseudo_inverse,
        "intervals": report.intervals,
        "clipped": clipped,
    });
    write_json(a.out.as_deref(), &out)
}

fn csv_sink(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let w: Box<dyn Write> = match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(w))
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<()> {
    let record = load_fit(&a.fit)?;
    let fit = record.to_fit()?;
    let x = read_series(&a.input, record.delta)?;
    if x.len() != record.n {
        return Err(Error::config(format!(
            "record has {} samples but the fit was computed from {}",
            x.len(),
            record.n
        )));
    }
    let data = if record.differenced {
        crate::sampling::difference_series(&x)?
    } else {
        x
    };
    let p = periodogram(&data)?;
    let theta = fit.theta_hat;
    let mut w = csv_sink(a.out.as_deref())?;
    match a.kind {
        DiagnoseKind::Qq => {
            let t = qq_ratios(&p, &theta, &fit.selection, &fit.quadrature, record.differenced)?;
            w.write_record(["empirical", "exponential", "ks_statistic"])?;
            for row in &t.rows {
                w.write_record([
                    format!("{:.16e}", row.empirical),
                    format!("{:.16e}", row.exponential),
                    format!("{:.16e}", t.ks_statistic),
                ])?;
            }
        }
        DiagnoseKind::Corr => {
            let scheme = data.scheme();
            let c = correlation_matrix(&theta, &scheme, &fit.quadrature, record.differenced)?;
            let pos: Vec<i64> = fit.selection.positive().collect();
            w.write_record(["omega_j", "omega_k", "correlation"])?;
            for &j in &pos {
                for &k in &pos {
                    w.write_record([
                        format!("{:.16e}", scheme.omega(j)),
                        format!("{:.16e}", scheme.omega(k)),
                        format!("{:.16e}", c[scheme.position(j)][scheme.position(k)]),
                    ])?;
                }
            }
        }
        DiagnoseKind::Overlay => {
            let rows = overlay(&p, &theta, &fit.quadrature, record.differenced)?;
            w.write_record(["omega", "periodogram", "expected", "periodogram_db", "expected_db"])?;
            for r in rows {
                w.write_record(
                    [r.omega, r.periodogram, r.expected, r.periodogram_db, r.expected_db].map(|v| format!("{v:.16e}")),
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<()> {
    let scheme = a.length.scheme(a.delta)?;
    let grid = match a.grid {
        GridArg::Canonical => vec![WaveParams::canonical()],
        GridArg::Standard => standard_grid(),
    };
    let mut methods: Vec<Method> = Vec::new();
    for m in &a.methods {
        let method = a.options.method((*m).into());
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    let config = BenchmarkConfig {
        grid,
        methods,
        scheme,
        band: a.band.band(),
        reps: a.reps,
        seed: a.seed,
        quadrature: a.quad.overrides(),
        optimizer: OptimizerConfig::default(),
    };
    let report = run_benchmark(&config)?;
    write_benchmark(a.out.as_deref(), &report)?;
    if let Some(out) = &a.out {
        write_json(Some(&sidecar_path(out)), &serde_json::to_value(&report)?)?;
    }
    Ok(())
}

fn write_benchmark(path: Option<&Path>, report: &BenchmarkReport) -> Result<()> {
    let mut w = csv_sink(path)?;
    w.write_record(["method", "parameter", "bias_pct", "sd_pct", "rmse_pct", "reps", "failures"])?;
    for m in &report.methods {
        let rows = m
            .parameters
            .iter()
            .map(|p| (p.parameter.as_str(), p.stats))
            .chain(std::iter::once(("average", m.average)));
        for (name, s) in rows {
            w.write_record([
                m.method.kind.name().to_string(),
                name.to_string(),
                format!("{:.6}", s.bias),
                format!("{:.6}", s.sd),
                format!("{:.6}", s.rmse),
                report.reps.to_string(),
                m.failures.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
