use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use ppsmeter::config::{Format, Model, RunConfig};
use ppsmeter::optimize::Tolerances;
use ppsmeter::oracle::{
    oracle_readout, readout_discrepancy, readouts_agree, sweep_case, READOUT_FIELDS,
};
use ppsmeter::pps::{
    no_postselect_shift, postselect_readout, strong_limit_shift, weak_limit_readout, weak_value,
};
use ppsmeter::qubit::qubit_readout;
use ppsmeter::scan::{
    refine_extremum, refine_from_grid, scan_angles, scan_g, scan_qubit_extremes, ColumnGroup,
    Objective, ObjectiveContext, ScanTable,
};
use ppsmeter::stern_gerlach::{sg_readout, SgConfig};
use ppsmeter::Error;

/// Relative tolerance for analytic vs oracle agreement.
const ORACLE_TOLERANCE: f64 = 1e-8;
const ORACLE_ABS_FLOOR: f64 = 1e-12;

#[derive(Parser)]
#[command(
    name = "ppsmeter",
    version,
    about = "Pointer statistics for measurements with pre- and postselection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coupling strength (momentum units).
    #[arg(long)]
    g: Option<f64>,
    /// Pointer position spread.
    #[arg(long)]
    delta: Option<f64>,
    /// θ nodes over [0, π], both ends included.
    #[arg(long)]
    theta_steps: Option<usize>,
    /// φ nodes over [0, 2π), endpoint excluded.
    #[arg(long)]
    phi_steps: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Also write a gnuplot script next to the CSV output.
    #[arg(long)]
    emit_plot_script: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Postselected readout for the configured system.
    Readout(Common),
    /// Stern–Gerlach shifts, probability and spreads over the (θ, φ) grid.
    SgScan(Common),
    /// Stern–Gerlach maximal shifts and probability versus g.
    SgMaxVsG(Common),
    /// Closed-form qubit extremal shifts versus g.
    QubitExtrema(Common),
    /// Stern–Gerlach SNR and sensitivity figures over the (θ, φ) grid.
    MetricsScan(Common),
    /// Compare analytic readouts with direct wavefunction integration.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Random instances to check when no system is configured.
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Grid search plus simplex refinement of one objective.
    Refine {
        #[command(flatten)]
        common: Common,
        /// dp, dz, ip1, iz1, ip2, iz2, ep1, ez1, ep2, ez2, qubit-dp, qubit-dq, qubit-ip1, qubit-ip2
        #[arg(long)]
        objective: String,
        /// Comma-separated start angles; skips the grid search.
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<f64>>,
        /// Number of best grid points to refine from.
        #[arg(long, default_value_t = 4)]
        seeds: usize,
        /// Objective evaluation budget; exceeding it exits with code 4.
        #[arg(long, default_value_t = Tolerances::default().max_evaluations)]
        max_evaluations: usize,
    },
}

enum Failure {
    Compute(Error),
    Io(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Compute(e) => match e {
                Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::DegenerateObservable
                | Error::GridTooCoarse { .. }
                | Error::OutOfRegime { .. } => 2,
                Error::NoConvergence { .. } => 4,
                _ => 3,
            },
            Failure::Io(_) => 2,
            Failure::Check(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Compute(e) => format!("{}: {e}", e.kind()),
            Failure::Io(m) | Failure::Check(m) => m.clone(),
        }
    }
}

fn load(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(g) = c.g {
        cfg.g = Some(g);
        cfg.g_range = None;
    }
    if let Some(d) = c.delta {
        cfg.delta = d;
    }
    if let Some(t) = c.theta_steps {
        cfg.scan.theta_steps = t;
    }
    if let Some(p) = c.phi_steps {
        cfg.scan.phi_steps = p;
    }
    if let Some(o) = &c.out {
        cfg.output.path = Some(o.clone());
    }
    if let Some(f) = &c.format {
        cfg.output.format = if f == "json" {
            Format::Json
        } else {
            Format::Csv
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

fn write_bytes(cfg: &RunConfig, bytes: &[u8]) -> Result<(), Failure> {
    match &cfg.output.path {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn emit_table(cfg: &RunConfig, c: &Common, table: &ScanTable) -> Result<(), Failure> {
    let bytes = match cfg.output.format {
        Format::Csv => table.to_csv().into_bytes(),
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(&table.to_json(Some(timestamp()))).expect("JSON");
            s.push('\n');
            s.into_bytes()
        }
    };
    write_bytes(cfg, &bytes)?;
    if c.emit_plot_script {
        let path = match (&cfg.output.path, cfg.output.format) {
            (Some(p), Format::Csv) => p,
            _ => {
                return Err(Failure::Io(
                    "--emit-plot-script needs --out with CSV output".into(),
                ))
            }
        };
        let script = path.with_extension("gp");
        fs::write(&script, table.plot_script(&path.display().to_string()))
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", script.display())))?;
    }
    for col in &table.columns {
        if let Some(m) = table.argmax(col) {
            eprintln!("max {col} = {:.10e} at {:?}", m.value, m.coords);
        }
    }
    if table.error_rows() > 0 {
        eprintln!("{} row(s) flagged with errors", table.error_rows());
    }
    Ok(())
}

fn emit_json(cfg: &RunConfig, v: &Value) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON");
    s.push('\n');
    write_bytes(cfg, s.as_bytes())
}

fn readout(cfg: &RunConfig) -> Result<Value, Failure> {
    let g = cfg.coupling()?;
    let sys = cfg.system()?;
    let r = postselect_readout(&sys.obs, &sys.pps, &sys.pointer, g)?;
    let mut out = json!({
        "model": cfg.model,
        "delta": cfg.delta,
        "g": g,
        "readout": r,
        "no_postselect_dp": no_postselect_shift(&sys.obs, sys.pps.alpha(), g)?,
        "strong_limit_dp": strong_limit_shift(&sys.obs, &sys.pps, g).ok(),
    });
    if let Ok(aw) = weak_value(&sys.obs, &sys.pps) {
        let (dp, dq) = weak_limit_readout(&sys.obs, &sys.pps, &sys.pointer, g)?;
        out["weak_value"] = json!([aw.re, aw.im]);
        out["weak_limit"] = json!({ "dp": dp, "dq": dq });
    }
    match cfg.model {
        Model::SternGerlach if g > 0.0 => {
            let s = cfg.sg_state()?;
            out["closed_form"] = json!(sg_readout(&SgConfig::new(s.theta, s.phi, cfg.delta, g)?)?);
        }
        Model::Qubit => {
            if let Some((pre, post)) = cfg.bloch_pair() {
                let (a1, a2) = cfg.qubit_eigenvalues()?;
                out["closed_form"] = json!(qubit_readout(a1, a2, pre, post, cfg.delta, g)?);
            }
        }
        _ => {}
    }
    Ok(out)
}

fn oracle_check(cfg: &RunConfig, cases: usize, seed: u64) -> Result<Value, Failure> {
    let mut worst = [0.0f64; 5];
    let mut failures = Vec::new();
    let mut check = |label: Value, analytic, oracle| {
        for (w, x) in worst
            .iter_mut()
            .zip(readout_discrepancy(&analytic, &oracle))
        {
            *w = w.max(x);
        }
        if !readouts_agree(&analytic, &oracle, ORACLE_TOLERANCE, ORACLE_ABS_FLOOR) {
            failures.push(json!({ "case": label, "analytic": analytic, "oracle": oracle }));
        }
    };
    let checked = if cfg.pps.is_some() {
        let g = cfg.coupling()?;
        let sys = cfg.system()?;
        let a = postselect_readout(&sys.obs, &sys.pps, &sys.pointer, g)?;
        let o = oracle_readout(&sys.obs, &sys.pps, &sys.pointer, g, &cfg.grid)?;
        check(json!("configured"), a, o);
        1
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n = 0;
        for i in 0..cases {
            let case = sweep_case(&mut rng);
            let a = postselect_readout(&case.obs, &case.pps, &case.pointer, case.g);
            let o = oracle_readout(&case.obs, &case.pps, &case.pointer, case.g, &cfg.grid);
            match (a, o) {
                (Ok(a), Ok(o)) => {
                    check(json!(i), a, o);
                    n += 1;
                }
                (Err(Error::VanishingPostselection { .. }), _)
                | (_, Err(Error::VanishingPostselection { .. })) => {}
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            }
        }
        n
    };
    let worst: serde_json::Map<String, Value> = READOUT_FIELDS
        .iter()
        .zip(worst)
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect();
    Ok(json!({
        "checked": checked,
        "tolerance": ORACLE_TOLERANCE,
        "max_relative_discrepancy": worst,
        "failures": failures,
    }))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Readout(c) => {
            let cfg = load(&c)?;
            emit_json(&cfg, &readout(&cfg)?)
        }
        Command::SgScan(c) => {
            let cfg = load(&c)?;
            emit_table(&cfg, &c, &scan_angles(&cfg, ColumnGroup::Readout)?)
        }
        Command::MetricsScan(c) => {
            let cfg = load(&c)?;
            emit_table(&cfg, &c, &scan_angles(&cfg, ColumnGroup::Metrics)?)
        }
        Command::SgMaxVsG(c) => {
            let mut cfg = load(&c)?;
            if cfg.g_range.is_none() && c.g.is_none() && c.config.is_none() {
                cfg.g = None;
                cfg.g_range = Some(ppsmeter::config::GRange {
                    min: 1e-3,
                    max: 10.0,
                    steps: 200,
                    spacing: ppsmeter::config::Spacing::Log,
                });
            }
            emit_table(&cfg, &c, &scan_g(&cfg)?)
        }
        Command::QubitExtrema(c) => {
            let cfg = load(&c)?;
            emit_table(&cfg, &c, &scan_qubit_extremes(&cfg)?)
        }
        Command::OracleCheck {
            common,
            cases,
            seed,
        } => {
            let cfg = load(&common)?;
            let report = oracle_check(&cfg, cases, seed)?;
            emit_json(&cfg, &report)?;
            let failed = report["failures"].as_array().map_or(0, Vec::len);
            if failed > 0 {
                return Err(Failure::Check(format!(
                    "{failed} case(s) outside tolerance"
                )));
            }
            Ok(())
        }
        Command::Refine {
            common,
            objective,
            start,
            seeds,
            max_evaluations,
        } => {
            let cfg = load(&common)?;
            let objective: Objective = objective.parse()?;
            let ctx = ObjectiveContext::from_config(&cfg)?;
            let tol = Tolerances {
                max_evaluations,
                ..Tolerances::default()
            };
            let out = match start {
                Some(x) => {
                    let r = refine_extremum(objective, &ctx, &x, tol)?;
                    json!({ "objective": objective, "start": x, "refined": r, "closed_form": objective.closed_form(&ctx) })
                }
                None => json!(refine_from_grid(objective, &ctx, &cfg.scan, seeds, tol)?),
            };
            emit_json(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
