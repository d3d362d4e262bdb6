//! Command-line front end.
//!
//! Every subcommand writes one CSV, to `--out` or standard output. With
//! `--out`, a run manifest is written next to the CSV as `<out>.manifest`.
//! Errors are reported on standard error as a single line
//! `error kind=<Kind> message="<text>"` with a kind-specific exit code.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analytic::{self, cross_correlation_window};
use crate::compare::{self, AfcParams, RatioGridSpec, SweepMode};
use crate::config::{self, ConfigDocument};
use crate::feasibility::{self, GridSpec};
use crate::model::{derive_timing, Direction, TimingSequence};
use crate::numeric::linspace;
use crate::oracle::{self, VerifySettings};
use crate::selection::{self, OverlapSet};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_OUTPUT: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;
pub const EXIT_COMPUTE: i32 = 6;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ECHOPAIR_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    OutputIo(String),
    #[error("failing checks: {}", .0.join(", "))]
    VerificationFailure(Vec<String>),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Config(_) => "ConfigError",
            CliError::OutputIo(_) => "OutputIOError",
            CliError::VerificationFailure(_) => "VerificationFailure",
            CliError::Compute(_) => "ComputeError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::OutputIo(_) => EXIT_OUTPUT,
            CliError::VerificationFailure(_) => EXIT_VERIFICATION,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }

    /// The single machine-readable line written to standard error.
    pub fn error_line(&self) -> String {
        format!("error kind={} message={:?}", self.kind(), self.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "echopair",
    version,
    about = "Photon-echo DLCZ pair-source model"
)]
struct Cli {
    /// Parameter file (flat TOML); defaults to the built-in reference set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct TimingArgs {
    /// Stokes emission time, µs.
    #[arg(long, default_value_t = 0.0)]
    t_s_us: f64,
    /// Stokes window T, µs.
    #[arg(long)]
    window_us: Option<f64>,
    /// First rephasing pulse, µs (default T).
    #[arg(long)]
    t_1_us: Option<f64>,
    /// Read pulse, µs.
    #[arg(long)]
    t_r_us: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CompareMode {
    Depth,
    Modes,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stokes rate, closed form against the ensemble sum.
    Stokes {
        #[arg(long, default_value_t = 100_000)]
        atoms: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Read-out efficiency against optical depth.
    Efficiency {
        #[arg(long, default_value_t = 0.0)]
        d_min: f64,
        #[arg(long, default_value_t = 5.0)]
        d_max: f64,
        #[arg(long, default_value_t = 501)]
        steps: usize,
        /// Loss factor; taken from the configured timing when omitted, else 1.
        #[arg(long)]
        loss: Option<f64>,
    },
    /// Cross-correlation trace around the anti-Stokes peak.
    Correlation {
        #[command(flatten)]
        timing: TimingArgs,
        /// Half width of the trace in units of τ.
        #[arg(long, default_value_t = 5.0)]
        half_width: f64,
        #[arg(long, default_value_t = 16)]
        points_per_tau: usize,
    },
    /// Worst-case intrinsic noise rate.
    Noise,
    /// Nonclassical region in the (t_r, T/τ) plane.
    Region {
        #[arg(long)]
        dd: bool,
        /// Grid size as `<t_r points>x<T points>`.
        #[arg(long, default_value = "200x200")]
        grid: String,
        /// Upper end of the t_r axis, µs (default 1.25× the closed-form maximum).
        #[arg(long)]
        t_r_max_us: Option<f64>,
        /// Upper end of the T/τ axis (default 1.25× the closed-form maximum).
        #[arg(long)]
        modes_max: Option<f64>,
    },
    /// Efficiency ratio against an AFC source.
    Compare {
        #[arg(long, value_enum, default_value = "depth")]
        mode: CompareMode,
        /// Grid size as `<F points>x<y points>`.
        #[arg(long, default_value = "200x200")]
        grid: String,
    },
    /// Transition-forbidding check on hyperfine overlaps.
    Selection {
        #[arg(long)]
        su: Option<f64>,
        #[arg(long)]
        ge: Option<f64>,
        #[arg(long)]
        gu: Option<f64>,
        #[arg(long)]
        se: Option<f64>,
        #[arg(long)]
        eps_forbid: Option<f64>,
        #[arg(long)]
        eps_allow: Option<f64>,
    },
    /// Closed forms against the discrete-atom oracle.
    Verify {
        #[arg(long, default_value_t = 100_000)]
        atoms: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Stokes { .. } => "stokes",
            Command::Efficiency { .. } => "efficiency",
            Command::Correlation { .. } => "correlation",
            Command::Noise => "noise",
            Command::Region { .. } => "region",
            Command::Compare { .. } => "compare",
            Command::Selection { .. } => "selection",
            Command::Verify { .. } => "verify",
        }
    }
}

/// Provenance written alongside every CSV. Everything except the final
/// `timestamp` line is a function of the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<String>,
    pub version: String,
    pub timestamp: u64,
    pub extra: Vec<(String, String)>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into())
        };
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "config = {}", path(&self.config));
        let _ = writeln!(s, "output = {}", path(&self.output));
        let _ = writeln!(
            s,
            "seed = {}",
            self.seed
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into())
        );
        let _ = writeln!(s, "grid = {}", self.grid.as_deref().unwrap_or("-"));
        let _ = writeln!(s, "version = {}", self.version);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "timestamp = {}", self.timestamp);
        s
    }
}

/// Manifest path for a CSV path.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn parse_grid(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("grid must look like 200x200, got `{text}`"));
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let n: usize = a.trim().parse().map_err(|_| bad())?;
    let m: usize = b.trim().parse().map_err(|_| bad())?;
    if n < 2 || m < 2 {
        return Err(CliError::Usage(
            "grid needs at least 2 points per axis".into(),
        ));
    }
    Ok((n, m))
}

fn load_document(path: Option<&Path>) -> Result<ConfigDocument, CliError> {
    match path {
        None => Ok(config::reference_document()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            ConfigDocument::parse(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn compute_err(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn timing_from(args: &TimingArgs, doc: &ConfigDocument) -> Result<TimingSequence, CliError> {
    if args.window_us.is_none() && args.t_r_us.is_none() {
        if let Some(t) = config::timing_from_config(doc).map_err(config_err)? {
            return Ok(t);
        }
    }
    let big_t = args.window_us.unwrap_or(50.0) * 1e-6;
    let t_1 = args.t_1_us.map(|v| v * 1e-6).unwrap_or(big_t);
    let t_r = args.t_r_us.map(|v| v * 1e-6).unwrap_or(t_1 + big_t);
    derive_timing(args.t_s_us * 1e-6, big_t, t_1, t_r).map_err(|e| CliError::Usage(e.to_string()))
}

fn csv_f(v: f64) -> String {
    format!("{v:.8e}")
}

struct Output {
    csv: String,
    seed: Option<u64>,
    grid: Option<String>,
    extra: Vec<(String, String)>,
    side_files: Vec<(String, String)>,
    failure: Option<CliError>,
}

impl Output {
    fn csv(csv: String) -> Self {
        Self {
            csv,
            seed: None,
            grid: None,
            extra: Vec::new(),
            side_files: Vec::new(),
            failure: None,
        }
    }
}

fn execute(command: &Command, doc: &ConfigDocument) -> Result<Output, CliError> {
    let params = || config::build_params(doc).map_err(config_err);
    match command {
        Command::Stokes { atoms, seed } => {
            let p = params()?;
            let exact = p.stokes_rate();
            let ens = oracle::sample_ensemble(&p, (*atoms).max(1), *seed);
            let mut csv = String::from("direction,analytic,oracle,std_err,rel_err\n");
            for dir in [Direction::Backward, Direction::Forward] {
                let est = oracle::stokes_rate_mc(&ens, dir);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    dir.as_str(),
                    csv_f(exact),
                    csv_f(est.value),
                    csv_f(est.std_err),
                    csv_f((est.value - exact).abs() / exact)
                );
            }
            let mut out = Output::csv(csv);
            out.seed = Some(*seed);
            out.extra.push(("atoms".into(), atoms.to_string()));
            Ok(out)
        }
        Command::Efficiency {
            d_min,
            d_max,
            steps,
            loss,
        } => {
            if !(*d_min >= 0.0 && d_max > d_min && *steps >= 2) {
                return Err(CliError::Usage(
                    "need 0 <= d_min < d_max and steps >= 2".into(),
                ));
            }
            let loss = match loss {
                Some(l) => *l,
                None => match config::timing_from_config(doc).map_err(config_err)? {
                    Some(t) => {
                        let p = params()?;
                        analytic::loss_factor(&t, &p.broadening, &p.rates, p.rates.dd_enabled)
                    }
                    None => 1.0,
                },
            };
            let mut csv = String::from("d_ge,eta_forward,eta_backward\n");
            for d in linspace(*d_min, *d_max, *steps) {
                let f = analytic::readout_efficiency(d, loss, Direction::Forward);
                let b = analytic::readout_efficiency(d, loss, Direction::Backward);
                let _ = writeln!(csv, "{},{},{}", csv_f(d), csv_f(f.eta), csv_f(b.eta));
            }
            let mut out = Output::csv(csv);
            out.extra.push(("loss".into(), csv_f(loss)));
            Ok(out)
        }
        Command::Correlation {
            timing,
            half_width,
            points_per_tau,
        } => {
            let p = params()?;
            let t = timing_from(timing, doc)?;
            if !(*half_width > 0.0 && *points_per_tau >= 1) {
                return Err(CliError::Usage(
                    "half width and sampling must be positive".into(),
                ));
            }
            let trace = cross_correlation_window(&p, &t, *half_width, *points_per_tau);
            let mut csv = String::from("t_us,p_s_as,g2\n");
            for ((time, rate), g2) in trace.times.iter().zip(&trace.p_s_as).zip(&trace.g2) {
                let _ = writeln!(csv, "{},{},{}", csv_f(time * 1e6), csv_f(*rate), csv_f(*g2));
            }
            let mut out = Output::csv(csv);
            out.extra.push(("t_as_us".into(), csv_f(trace.t_as * 1e6)));
            out.extra.push(("peak_g2".into(), csv_f(trace.peak_g2)));
            out.extra.push((
                "g2_note".into(),
                "lower bound: worst-case noise floor".into(),
            ));
            Ok(out)
        }
        Command::Noise => {
            let p = params()?;
            let n = analytic::intrinsic_noise_rate(p.theta0(), p.depths.d_ge(), p.tau());
            let csv = format!(
                "theta0,d_ge,tau_s,p_n,p_n_tau,bound_ratio\n{},{},{},{},{},{}\n",
                csv_f(p.theta0()),
                csv_f(p.depths.d_ge()),
                csv_f(p.tau()),
                csv_f(n.rate),
                csv_f(n.rate * p.tau()),
                csv_f(n.bound_ratio)
            );
            Ok(Output::csv(csv))
        }
        Command::Region {
            dd,
            grid,
            t_r_max_us,
            modes_max,
        } => {
            let p = params()?;
            let (n, m) = parse_grid(grid)?;
            let maxima = feasibility::feasibility_maxima(&p, *dd).map_err(compute_err)?;
            let spec = GridSpec {
                t_r_range: (
                    0.0,
                    t_r_max_us
                        .map(|v| v * 1e-6)
                        .unwrap_or(1.25 * maxima.t_r_max),
                ),
                big_t_range: (0.0, modes_max.unwrap_or(1.25 * maxima.modes_max) * p.tau()),
                n_t_r: n,
                n_big_t: m,
            };
            let region = feasibility::rasterize_region(&p, *dd, &spec).map_err(compute_err)?;
            let mut csv = String::from("t_r_us,T_over_tau,g2_peak,nonclassical\n");
            for i in 0..region.rows() {
                for j in 0..region.cols() {
                    let k = region.index(i, j);
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        csv_f(region.t_r_axis[i] * 1e6),
                        csv_f(region.big_t_axis[j] / region.tau),
                        csv_f(region.g2_worst[k]),
                        u8::from(region.membership[k])
                    );
                }
            }
            let scan = region.scan_maxima();
            let mut maxima_csv = String::from("quantity,closed_form,scan\n");
            let scan_or_nan = |f: fn(&feasibility::FeasibilityMaxima) -> f64| {
                scan.as_ref().map(f).unwrap_or(f64::NAN)
            };
            let _ = writeln!(
                maxima_csv,
                "t_r_max_us,{},{}",
                csv_f(maxima.t_r_max * 1e6),
                csv_f(scan_or_nan(|m| m.t_r_max) * 1e6)
            );
            let _ = writeln!(
                maxima_csv,
                "modes_max,{},{}",
                csv_f(maxima.modes_max),
                csv_f(scan_or_nan(|m| m.modes_max))
            );
            let mut out = Output::csv(csv);
            out.grid = Some(format!("{n}x{m}"));
            out.extra.push(("dd".into(), dd.to_string()));
            out.side_files.push(("maxima.csv".into(), maxima_csv));
            Ok(out)
        }
        Command::Compare { mode, grid } => {
            let p = params()?;
            let (n, m) = parse_grid(grid)?;
            let mode = match mode {
                CompareMode::Depth => SweepMode::Depth,
                CompareMode::Modes => SweepMode::Modes,
            };
            let spec = RatioGridSpec::default_for(mode, n, m);
            let g = compare::rasterize_ratio(mode, &p, &spec).map_err(compute_err)?;
            let mut csv = format!("F,{},ratio\n", mode.y_label());
            for (i, f) in g.x_axis.iter().enumerate() {
                for (j, y) in g.y_axis.iter().enumerate() {
                    let _ = writeln!(csv, "{},{},{}", csv_f(*f), csv_f(*y), csv_f(g.at(i, j)));
                }
            }
            let mut out = Output::csv(csv);
            out.grid = Some(format!("{n}x{m}"));
            out.extra.push(("mode".into(), mode.y_label().into()));
            if mode == SweepMode::Modes {
                let crossing = AfcParams::new(spec.finesse_range.0)
                    .ok()
                    .and_then(|afc| compare::unity_crossing(&afc, &p, 1e3));
                if let Some(c) = crossing {
                    out.extra
                        .push(("unity_crossing_modes_at_min_F".into(), csv_f(c)));
                }
            }
            if let Some(w) =
                compare::efficiency_ratio(&AfcParams::new(5.0).unwrap(), 0.0, &p).warning
            {
                out.extra.push(("warning".into(), w.to_string()));
            }
            Ok(out)
        }
        Command::Selection {
            su,
            ge,
            gu,
            se,
            eps_forbid,
            eps_allow,
        } => {
            let base = config::overlaps_from_config(doc)
                .map_err(config_err)?
                .unwrap_or_else(OverlapSet::europium_reference);
            let overlaps = OverlapSet::new(
                su.unwrap_or(base.su()),
                ge.unwrap_or(base.ge()),
                gu.unwrap_or(base.gu()),
                se.unwrap_or(base.se()),
            )
            .map_err(|e| CliError::Usage(e.to_string()))?;
            let (cf, ca) = config::thresholds_from_config(doc).map_err(config_err)?;
            let forbid = eps_forbid.or(cf).unwrap_or(selection::DEFAULT_EPS_FORBID);
            let allow = eps_allow.or(ca).unwrap_or(selection::DEFAULT_EPS_ALLOW);
            let report = selection::check_forbidding(&overlaps, forbid, allow)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let mut csv = String::from("transition,overlap,threshold,margin,holds\n");
            for c in &report.conditions {
                let threshold = if c.transition == "su" { forbid } else { allow };
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    c.transition,
                    csv_f(c.overlap),
                    csv_f(threshold),
                    csv_f(c.margin),
                    c.holds
                );
            }
            let mut out = Output::csv(csv);
            out.extra.push(("pass".into(), report.pass.to_string()));
            out.extra.push(("eps_forbid".into(), csv_f(forbid)));
            out.extra.push(("eps_allow".into(), csv_f(allow)));
            Ok(out)
        }
        Command::Verify { atoms, seed } => {
            let p = params()?;
            if *atoms < 2 {
                return Err(CliError::Usage("verify needs at least 2 atoms".into()));
            }
            let settings = VerifySettings {
                atoms: *atoms,
                seed: *seed,
                ..VerifySettings::default()
            };
            let rows = oracle::verify_suite(&p, &settings).map_err(compute_err)?;
            let mut buf = Vec::new();
            oracle::write_verify_csv(&rows, &mut buf)
                .map_err(|e| CliError::OutputIo(e.to_string()))?;
            let mut out = Output::csv(String::from_utf8(buf).expect("csv is ascii"));
            out.seed = Some(*seed);
            out.extra.push(("atoms".into(), atoms.to_string()));
            let failing: Vec<String> = rows
                .iter()
                .filter(|r| !r.pass)
                .map(|r| r.quantity.to_string())
                .collect();
            if !failing.is_empty() {
                out.failure = Some(CliError::VerificationFailure(failing));
            }
            Ok(out)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::OutputIo(format!("{}: {e}", path.display())))
}

fn side_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn run_inner(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    configure_threads()?;
    let doc = load_document(cli.config.as_deref())?;
    let out = execute(&cli.command, &doc)?;
    match &cli.out {
        Some(path) => {
            write_file(path, &out.csv)?;
            for (suffix, contents) in &out.side_files {
                write_file(&side_path(path, suffix), contents)?;
            }
            let manifest = RunManifest {
                command: cli.command.name().into(),
                config: cli.config.clone(),
                output: Some(path.clone()),
                seed: out.seed,
                grid: out.grid.clone(),
                version: env!("CARGO_PKG_VERSION").into(),
                timestamp: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                extra: out.extra.clone(),
            };
            write_file(&manifest_path(path), &manifest.render())?;
        }
        None => {
            stdout
                .write_all(out.csv.as_bytes())
                .map_err(|e| CliError::OutputIo(e.to_string()))?;
        }
    }
    match out.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run_inner(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("{}", e.error_line());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("200x300").unwrap(), (200, 300));
        assert_eq!(parse_grid("2X2").unwrap(), (2, 2));
        assert!(parse_grid("1x5").is_err());
        assert!(parse_grid("abc").is_err());
    }

    #[test]
    fn error_line_is_single_line() {
        let e = CliError::Config("bad\nvalue".into());
        let line = e.error_line();
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error kind=ConfigError"));
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn manifest_ends_with_timestamp() {
        let m = RunManifest {
            command: "noise".into(),
            config: None,
            output: Some("a.csv".into()),
            seed: None,
            grid: None,
            version: "0".into(),
            timestamp: 12,
            extra: vec![],
        };
        assert!(m.render().ends_with("timestamp = 12\n"));
        assert_eq!(
            manifest_path(Path::new("x/a.csv")),
            PathBuf::from("x/a.csv.manifest")
        );
    }
}
