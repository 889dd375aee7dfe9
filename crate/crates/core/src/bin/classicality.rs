//! Command-line front end for the tessellation, POVM, threshold and Monge
//! computations. Every table goes to `--output`, to a file in
//! `$CLASSICALITY_OUT_DIR` when that is set, or to stdout.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use classicality::config::{parse_angle, Experiment, ExperimentConfig, KeyValues, MongeConfig};
use classicality::gcs::{write_boson_grid, Epsilon, HusimiGrid, Spin};
use classicality::geometry::{SpherePoint, Tessellation};
use classicality::monge::monge_su2;
use classicality::povm::{probability_table, Mode, Outcome, OutcomeWeights};
use classicality::threshold::{delta_for_nt, nt_boson, nt_su11, nt_su2, Threshold};
use classicality::{Error, ErrorKind};

const OUT_DIR_VAR: &str = "CLASSICALITY_OUT_DIR";

#[derive(Parser)]
#[command(name = "classicality", version, about = "Coherent-state discrimination and classical-like thresholds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Threshold size N_t(ε, δ), or δ for a given N_t.
    Threshold(ThresholdArgs),
    /// Tessellation T(k) as a JSON document.
    Tessellate(TessellateArgs),
    /// Outcome probability table as CSV.
    Povm(PovmArgs),
    /// Monge distance d_M(J; θ) over a range of J as CSV.
    Monge(MongeArgs),
    /// Husimi surface sampled on a grid, as CSV.
    HusimiGrid(HusimiArgs),
    /// Seeded single-shot outcomes.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgebraArg {
    Su2,
    Su11,
    Boson,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, value_enum, default_value = "su2")]
    algebra: AlgebraArg,
    #[arg(long)]
    epsilon: f64,
    /// Resolution in radians, or a multiple of pi such as `pi/18`.
    #[arg(long, conflicts_with_all = ["delta_from_tessellation", "nt"])]
    delta: Option<String>,
    /// Take δ from the tessellation T(K).
    #[arg(long, value_name = "K", conflicts_with = "nt")]
    delta_from_tessellation: Option<u32>,
    /// Use the tessellation's strict resolution instead of the inscribed radius.
    #[arg(long, requires = "delta_from_tessellation")]
    strict: bool,
    /// Inverse mode: report δ for this real threshold (su2 only).
    #[arg(long)]
    nt: Option<f64>,
    #[arg(long, default_value_t = 0)]
    n: u64,
    /// Bargmann index for su11.
    #[arg(long)]
    k_bargmann: Option<f64>,
}

#[derive(Args)]
struct TessellateArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Flags mirroring the experiment config keys.
#[derive(Args, Default)]
struct ExperimentOverrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long = "N")]
    size: Option<u64>,
    #[arg(long = "n")]
    reduction: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// `lambda<i>`, `sampled:<i>` or `theta,phi`.
    #[arg(long)]
    sigma: Option<String>,
    /// `exact` or `truncated`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
}

impl ExperimentOverrides {
    fn load(&self) -> Result<Experiment, Error> {
        let mut kv = match &self.config {
            Some(path) => KeyValues::parse(&read_text(path)?)?,
            None => KeyValues::default(),
        };
        let pairs: [(&str, Option<String>); 10] = [
            ("k", self.k.map(|v| v.to_string())),
            ("N", self.size.map(|v| v.to_string())),
            ("n", self.reduction.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("sigma", self.sigma.clone()),
            ("mode", self.mode.clone()),
            ("tol", self.tol.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("rows", self.rows.map(|v| v.to_string())),
            ("shots", self.shots.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(value) = value {
                kv.set(key, value);
            }
        }
        Ok(ExperimentConfig::from_key_values(&kv)?.resolve()?)
    }

    fn stem(&self) -> String {
        self.config
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "default".into())
    }
}

#[derive(Args)]
struct PovmArgs {
    #[command(flatten)]
    experiment: ExperimentOverrides,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MongeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    j_min: Option<u32>,
    #[arg(long)]
    j_max: Option<u32>,
    /// Radians, or a multiple of pi such as `pi/3`.
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HusimiArgs {
    #[command(flatten)]
    experiment: ExperimentOverrides,
    /// Extra coherent-state centres `theta,phi`; the config's sigma is always included.
    #[arg(long = "center")]
    centers: Vec<String>,
    #[arg(long, default_value_t = 91)]
    n_theta: usize,
    #[arg(long, default_value_t = 180)]
    n_phi: usize,
    /// Heisenberg–Weyl surface on the complex plane instead of the sphere.
    #[arg(long)]
    boson: bool,
    /// Bosonic centres `re,im`.
    #[arg(long = "boson-center", requires = "boson", allow_hyphen_values = true)]
    boson_centers: Vec<String>,
    #[arg(long, default_value_t = 1.0, requires = "boson")]
    half_width: f64,
    #[arg(long, default_value_t = 101, requires = "boson")]
    points: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    experiment: ExperimentOverrides,
    /// Sample from a table written by `povm` instead of computing one.
    #[arg(long, conflicts_with_all = ["config", "k", "size", "reduction", "epsilon", "sigma", "mode", "tol", "rows"])]
    table: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn usage(message: impl Into<String>) -> Error {
    Error::Config(classicality::config::ConfigError::Usage(message.into()))
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("cannot read {}", path.display()), e))
}

/// Writes `bytes` to the explicit path, to `$CLASSICALITY_OUT_DIR/default_name`, or to stdout.
fn emit(explicit: Option<&Path>, default_name: &str, bytes: &[u8]) -> Result<(), Error> {
    let target = explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_VAR).filter(|d| !d.is_empty()).map(|d: OsString| PathBuf::from(d).join(default_name)));
    match target {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(format!("cannot create {}", dir.display()), e))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
        }
        None => {
            let mut out = io::stdout().lock();
            match out.write_all(bytes).and_then(|_| out.flush()) {
                // A closed reader (`| head`) is not a failure of ours.
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|e| Error::io("cannot write to stdout", e)),
            }
        }
    }
}

#[derive(Serialize)]
struct ThresholdRecord {
    algebra: &'static str,
    epsilon: f64,
    delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_bargmann: Option<f64>,
    real: f64,
    integer: u64,
}

#[derive(Serialize)]
struct InverseRecord {
    algebra: &'static str,
    epsilon: f64,
    nt: f64,
    n: u64,
    delta: f64,
}

fn json_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec(value).expect("records serialise");
    bytes.push(b'\n');
    bytes
}

fn run_threshold(args: &ThresholdArgs) -> Result<(), Error> {
    let epsilon = Epsilon::new(args.epsilon)?;
    if let Some(nt) = args.nt {
        if !matches!(args.algebra, AlgebraArg::Su2) {
            return Err(usage("--nt is only available for su2"));
        }
        let delta = delta_for_nt(epsilon, nt, args.n)?;
        let record = InverseRecord { algebra: "su2", epsilon: args.epsilon, nt, n: args.n, delta };
        return emit(None, "threshold.json", &json_line(&record));
    }
    let delta = match (&args.delta, args.delta_from_tessellation) {
        (Some(d), None) => parse_angle(d).map_err(usage)?,
        (None, Some(k)) => {
            let tess = Tessellation::new(k)?;
            if args.strict {
                tess.strict_delta()
            } else {
                tess.inscribed_delta()
            }
        }
        _ => return Err(usage("give exactly one of --delta, --delta-from-tessellation or --nt")),
    };
    let (name, threshold, n, k_bargmann): (_, Threshold, _, _) = match args.algebra {
        AlgebraArg::Su2 => ("su2", nt_su2(epsilon, delta, args.n)?, Some(args.n), None),
        AlgebraArg::Su11 => {
            let k = args.k_bargmann.ok_or_else(|| usage("su11 needs --k-bargmann"))?;
            ("su11", nt_su11(epsilon, delta, k)?, None, Some(k))
        }
        AlgebraArg::Boson => {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(classicality::gcs::GcsError::InvalidDelta(delta).into());
            }
            ("boson", nt_boson(epsilon, delta), None, None)
        }
    };
    let record = ThresholdRecord {
        algebra: name,
        epsilon: args.epsilon,
        delta,
        n,
        k_bargmann,
        real: threshold.real,
        integer: threshold.integer,
    };
    emit(None, "threshold.json", &json_line(&record))
}

fn run_tessellate(args: &TessellateArgs) -> Result<(), Error> {
    let doc = Tessellation::new(args.k)?.to_document();
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("documents serialise");
    bytes.push(b'\n');
    emit(args.output.as_deref(), &format!("tessellation_k{}.json", args.k), &bytes)
}

fn run_povm(args: &PovmArgs) -> Result<(), Error> {
    let exp = args.experiment.load()?;
    let table = probability_table(&exp.ensemble, &exp.sigma, &exp.tessellation, exp.mode, exp.tol)?;
    let mut bytes = Vec::new();
    table.write_csv(&mut bytes, Some(exp.seed), exp.rows).expect("writing to memory");
    emit(args.output.as_deref(), &format!("povm_{}.csv", args.experiment.stem()), &bytes)
}

fn run_monge(args: &MongeArgs) -> Result<(), Error> {
    let mut kv = match &args.config {
        Some(path) => KeyValues::parse(&read_text(path)?)?,
        None => KeyValues::default(),
    };
    if let Some(v) = args.j_min {
        kv.set("j_min", v);
    }
    if let Some(v) = args.j_max {
        kv.set("j_max", v);
    }
    if let Some(v) = &args.theta {
        kv.set("theta", v);
    }
    if let Some(v) = args.tol {
        kv.set("tol", v);
    }
    let cfg = MongeConfig::from_key_values(&kv)?;
    if cfg.j_min > cfg.j_max {
        return Err(usage("--j-min exceeds --j-max"));
    }
    let mut bytes = Vec::new();
    writeln!(bytes, "# monge distance between coherent states at (0,0) and (theta,0)").unwrap();
    writeln!(bytes, "# theta={}", cfg.theta).unwrap();
    writeln!(bytes, "# series_tol={:e}", cfg.tol).unwrap();
    writeln!(bytes, "J,theta,d_monge,d_geodesic").unwrap();
    for j in cfg.j_min..=cfg.j_max {
        let eval = monge_su2(Spin::integer(j), cfg.theta, cfg.tol)?;
        writeln!(bytes, "{},{},{:e},{}", j, cfg.theta, eval.value, cfg.theta).unwrap();
    }
    emit(args.output.as_deref(), "monge.csv", &bytes)
}

fn parse_pair(s: &str) -> Result<(f64, f64), Error> {
    let bad = || usage(format!("expected two comma-separated numbers, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn run_husimi(args: &HusimiArgs) -> Result<(), Error> {
    let exp = args.experiment.load()?;
    let mut bytes = Vec::new();
    if args.boson {
        let centers = args
            .boson_centers
            .iter()
            .map(|s| parse_pair(s).map(|(re, im)| Complex64::new(re, im)))
            .collect::<Result<Vec<_>, _>>()?;
        if centers.is_empty() {
            return Err(usage("--boson needs at least one --boson-center"));
        }
        write_boson_grid(&mut bytes, exp.ensemble.size() as f64, &centers, args.half_width, args.points)
            .map_err(|e| usage(e.to_string()))?;
        return emit(args.output.as_deref(), "husimi_boson.csv", &bytes);
    }
    let mut centers = vec![exp.sigma];
    for s in &args.centers {
        let (theta, phi) = parse_pair(s)?;
        centers.push(SpherePoint::new(theta, phi)?);
    }
    let grid = HusimiGrid { spin: exp.ensemble.spin(), centers, n_theta: args.n_theta, n_phi: args.n_phi };
    grid.nodes()?;
    grid.write_csv(&mut bytes).expect("writing to memory");
    emit(args.output.as_deref(), &format!("husimi_{}.csv", args.experiment.stem()), &bytes)
}

fn run_experiment(args: &ExperimentArgs) -> Result<(), Error> {
    let mut bytes = Vec::new();
    writeln!(bytes, "# experiment outcomes").unwrap();
    let (weights, seed, shots) = match &args.table {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::io(format!("cannot read {}", path.display()), e))?;
            let weights = OutcomeWeights::read_csv(BufReader::new(file))?;
            writeln!(bytes, "# table={}", path.display()).unwrap();
            (weights, args.experiment.seed.unwrap_or(0), args.experiment.shots.unwrap_or(1))
        }
        None => {
            let exp = args.experiment.load()?;
            let table = probability_table(&exp.ensemble, &exp.sigma, &exp.tessellation, exp.mode, exp.tol)?;
            writeln!(bytes, "# J={}", exp.ensemble.spin()).unwrap();
            writeln!(bytes, "# N={}", exp.ensemble.size()).unwrap();
            writeln!(bytes, "# n={}", exp.ensemble.reduction()).unwrap();
            match exp.mode {
                Mode::Exact => writeln!(bytes, "# epsilon=none").unwrap(),
                Mode::Truncated(e) => writeln!(bytes, "# epsilon={}", e.value()).unwrap(),
            }
            writeln!(bytes, "# mode={}", exp.mode).unwrap();
            writeln!(bytes, "# quadrature_tol={:e}", exp.tol).unwrap();
            writeln!(bytes, "# k={}", exp.tessellation.k()).unwrap();
            writeln!(bytes, "# sigma={},{}", exp.sigma.theta(), exp.sigma.phi()).unwrap();
            (table.weights(), exp.seed, exp.shots)
        }
    };
    writeln!(bytes, "# seed={seed}").unwrap();
    writeln!(bytes, "# shots={shots}").unwrap();
    writeln!(bytes, "shot,outcome").unwrap();
    let outcomes = weights.sample_many(seed, shots);
    for (i, outcome) in outcomes.iter().enumerate() {
        writeln!(bytes, "{},{}", i + 1, outcome).unwrap();
    }
    let nulls = outcomes.iter().filter(|o| **o == Outcome::Null).count();
    writeln!(bytes, "# null_outcomes={nulls}").unwrap();
    emit(args.output.as_deref(), &format!("experiment_{}.csv", args.experiment.stem()), &bytes)
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Quadrature => 3,
        ErrorKind::Io => 4,
        ErrorKind::Domain => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Threshold(a) => run_threshold(a),
        Command::Tessellate(a) => run_tessellate(a),
        Command::Povm(a) => run_povm(a),
        Command::Monge(a) => run_monge(a),
        Command::HusimiGrid(a) => run_husimi(a),
        Command::Experiment(a) => run_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("classicality: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
