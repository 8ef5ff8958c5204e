//! Parameter scans, extremum refinement and table output.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{GRange, RunConfig, ScanSpec};
use crate::error::{Error, Result};
use crate::metrics::{sg_ms_enhancements, sg_snr_improvements, snr_report};
use crate::optimize::{maximize, Refined, Tolerances};
use crate::par;
use crate::pps::{GaussianPointer, Observable};
use crate::qubit::{qubit_extremes, qubit_pps, qubit_readout, BlochAngles};
use crate::stern_gerlach::{sg_momentum_max, sg_position_max, sg_readout, SgConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Parallel,
    Sequential,
}

fn run<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Exec::Parallel => par::map(items, f),
        Exec::Sequential => par::map_sequential(items, f),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
    /// Error kind when the point could not be evaluated; values are NaN then.
    pub error: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub model: String,
    pub delta: f64,
    pub g: Option<f64>,
    pub g_range: Option<GRange>,
    pub tool_version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub row: usize,
    pub coords: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTable {
    pub axes: Vec<Axis>,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub metadata: Metadata,
}

impl ScanTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Largest finite value of a column; the first row wins ties.
    pub fn argmax(&self, name: &str) -> Option<Extremum> {
        let c = self.column(name)?;
        let mut best: Option<Extremum> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let v = row.values[c];
            if v.is_nan() {
                continue;
            }
            if best.as_ref().is_none_or(|b| v > b.value) {
                best = Some(Extremum {
                    row: i,
                    coords: row.coords.clone(),
                    value: v,
                });
            }
        }
        best
    }

    pub fn error_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<&str> = self
            .axes
            .iter()
            .map(|a| a.name.as_str())
            .chain(self.columns.iter().map(String::as_str))
            .chain(std::iter::once("error"))
            .collect();
        let mut line = header.join(",");
        line.push('\n');
        w.write_all(line.as_bytes())?;
        for row in &self.rows {
            line.clear();
            for v in row.coords.iter().chain(&row.values) {
                write!(line, "{v:.16e},").expect("writing to a String");
            }
            line.push_str(row.error.unwrap_or(""));
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Table plus metadata and per-column maxima. NaN cells become `null`.
    pub fn to_json(&self, timestamp_unix: Option<u64>) -> Value {
        let argmax: Map<String, Value> = self
            .columns
            .iter()
            .filter_map(|c| Some((c.clone(), serde_json::to_value(self.argmax(c)?).ok()?)))
            .collect();
        let mut meta = serde_json::to_value(&self.metadata).expect("metadata serializes");
        if let Some(ts) = timestamp_unix {
            meta["timestamp_unix"] = json!(ts);
        }
        json!({
            "metadata": meta,
            "axes": self.axes,
            "columns": self.columns,
            "rows": self.rows,
            "argmax": argmax,
        })
    }

    /// Gnuplot script plotting every column of `csv_path`.
    pub fn plot_script(&self, csv_path: &str) -> String {
        let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        let k = self.axes.len();
        if k == 1 {
            s.push_str("set logscale x\n");
            s.push_str(&format!("set xlabel '{}'\n", self.axes[0].name));
        } else {
            s.push_str("set pm3d map\n");
            s.push_str(&format!(
                "set xlabel '{}'\nset ylabel '{}'\n",
                self.axes[0].name, self.axes[1].name
            ));
        }
        for (i, col) in self.columns.iter().enumerate() {
            let c = k + i + 1;
            s.push_str(&format!("set title '{col}'\n"));
            if k == 1 {
                s.push_str(&format!(
                    "plot '{csv_path}' using 1:{c} with lines\npause -1\n"
                ));
            } else {
                s.push_str(&format!("splot '{csv_path}' using 1:2:{c}\npause -1\n"));
            }
        }
        s
    }
}

/// Which Stern–Gerlach quantities an angle scan tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnGroup {
    Readout,
    Metrics,
}

impl ColumnGroup {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ColumnGroup::Readout => &["dp", "dz", "probability", "sd_p", "sd_z"],
            ColumnGroup::Metrics => &[
                "ip_1",
                "iz_1",
                "ip_2",
                "iz_2",
                "ep_1",
                "ez_1",
                "ep_2",
                "ez_2",
                "probability",
            ],
        }
    }

    fn evaluate(self, cfg: &SgConfig) -> Result<Vec<f64>> {
        match self {
            ColumnGroup::Readout => {
                let r = sg_readout(cfg)?;
                Ok(vec![r.dp, r.dz, r.probability, r.sd_p, r.sd_z])
            }
            ColumnGroup::Metrics => {
                let s = sg_snr_improvements(cfg)?;
                let m = sg_ms_enhancements(cfg)?;
                Ok(vec![
                    s.ip_1,
                    s.iz_1,
                    s.ip_2,
                    s.iz_2,
                    m.ep_1,
                    m.ez_1,
                    m.ep_2,
                    m.ez_2,
                    cfg.k() / 2.0,
                ])
            }
        }
    }
}

fn positive_coupling(cfg: &RunConfig) -> Result<f64> {
    let g = cfg.coupling()?;
    if !(g > 0.0) {
        return Err(Error::invalid(format!(
            "config field `g`: scans need g > 0, got {g}"
        )));
    }
    Ok(g)
}

fn metadata(cfg: &RunConfig, model: &str, g: Option<f64>, g_range: Option<GRange>) -> Metadata {
    Metadata {
        model: model.into(),
        delta: cfg.delta,
        g,
        g_range,
        tool_version: TOOL_VERSION,
    }
}

fn angle_axes(scan: &ScanSpec) -> Vec<Axis> {
    let phis = scan.phis();
    vec![
        Axis {
            name: "theta".into(),
            min: 0.0,
            max: std::f64::consts::PI,
            steps: scan.theta_steps,
        },
        Axis {
            name: "phi".into(),
            min: 0.0,
            max: *phis.last().expect("phi_steps >= 1"),
            steps: scan.phi_steps,
        },
    ]
}

fn angle_grid(scan: &ScanSpec) -> Vec<(f64, f64)> {
    let phis = scan.phis();
    scan.thetas()
        .into_iter()
        .flat_map(|t| phis.iter().map(move |&p| (t, p)))
        .collect()
}

fn row_from(coords: Vec<f64>, result: Result<Vec<f64>>, width: usize) -> Row {
    match result {
        Ok(values) => Row {
            coords,
            values,
            error: None,
        },
        Err(e) => Row {
            coords,
            values: vec![f64::NAN; width],
            error: Some(e.kind()),
        },
    }
}

/// Stern–Gerlach quantities over the (θ, φ) grid, θ-major.
pub fn scan_angles(cfg: &RunConfig, group: ColumnGroup) -> Result<ScanTable> {
    scan_angles_with(cfg, group, Exec::Parallel)
}

pub fn scan_angles_with(cfg: &RunConfig, group: ColumnGroup, exec: Exec) -> Result<ScanTable> {
    cfg.validate()?;
    let g = positive_coupling(cfg)?;
    let delta = cfg.delta;
    let width = group.columns().len();
    let rows = run(exec, &angle_grid(&cfg.scan), |&(t, p)| {
        let result = SgConfig::new(t, p, delta, g).and_then(|c| group.evaluate(&c));
        row_from(vec![t, p], result, width)
    });
    Ok(ScanTable {
        axes: angle_axes(&cfg.scan),
        columns: group.columns().iter().map(|s| s.to_string()).collect(),
        rows,
        metadata: metadata(cfg, "stern-gerlach", Some(g), None),
    })
}

fn g_axis(values: &[f64]) -> Axis {
    Axis {
        name: "g".into(),
        min: values[0],
        max: *values.last().expect("nonempty"),
        steps: values.len(),
    }
}

/// Closed-form Stern–Gerlach optima as functions of `g`.
pub fn scan_g(cfg: &RunConfig) -> Result<ScanTable> {
    cfg.validate()?;
    let gs = cfg.couplings()?;
    let delta = cfg.delta;
    let columns = [
        "dp_max",
        "dp_max_over_g",
        "dz_max",
        "p_max",
        "theta_opt_p",
        "phi_opt_z",
    ];
    let rows = par::map(&gs, |&g| {
        let result = sg_momentum_max(delta, g).and_then(|p| {
            let z = sg_position_max(delta, g)?;
            Ok(vec![
                p.dp_max,
                p.dp_max / g,
                z.dz_max,
                p.p_max,
                p.theta_opt,
                z.phi_opt,
            ])
        });
        row_from(vec![g], result, columns.len())
    });
    Ok(ScanTable {
        axes: vec![g_axis(&gs)],
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows,
        metadata: metadata(
            cfg,
            "stern-gerlach",
            cfg.g.filter(|_| cfg.g_range.is_none()),
            cfg.g_range,
        ),
    })
}

/// Closed-form qubit extremes as functions of `g`.
pub fn scan_qubit_extremes(cfg: &RunConfig) -> Result<ScanTable> {
    cfg.validate()?;
    let gs = cfg.couplings()?;
    let (a1, a2) = cfg.qubit_eigenvalues()?;
    let delta = cfg.delta;
    let columns = [
        "dp_min",
        "dp_max",
        "dq_min",
        "dq_max",
        "t_opt_max",
        "phi0_for_p",
        "phi0_for_q_max",
    ];
    let rows = par::map(&gs, |&g| {
        let result = qubit_extremes(a1, a2, delta, g).map(|x| {
            vec![
                x.momentum.dp_min,
                x.momentum.dp_max,
                x.position.dq_min,
                x.position.dq_max,
                x.momentum.t_opt_max,
                x.momentum.phi0_for_p,
                x.position.phi0_for_q_max,
            ]
        });
        row_from(vec![g], result, columns.len())
    });
    Ok(ScanTable {
        axes: vec![g_axis(&gs)],
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows,
        metadata: metadata(
            cfg,
            "qubit",
            cfg.g.filter(|_| cfg.g_range.is_none()),
            cfg.g_range,
        ),
    })
}

/// Scalar Stern–Gerlach fields over `(θ, φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgField {
    Dp,
    Dz,
    Ip1,
    Iz1,
    Ip2,
    Iz2,
    Ep1,
    Ez1,
    Ep2,
    Ez2,
}

/// Scalar qubit fields over all pre/post pairs `(θ1, φ1, θ2, φ2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitField {
    Dp,
    Dq,
    Ip1,
    Ip2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Sg(SgField),
    Qubit(QubitField),
}

const OBJECTIVE_NAMES: [(&str, Objective); 14] = [
    ("dp", Objective::Sg(SgField::Dp)),
    ("dz", Objective::Sg(SgField::Dz)),
    ("ip1", Objective::Sg(SgField::Ip1)),
    ("iz1", Objective::Sg(SgField::Iz1)),
    ("ip2", Objective::Sg(SgField::Ip2)),
    ("iz2", Objective::Sg(SgField::Iz2)),
    ("ep1", Objective::Sg(SgField::Ep1)),
    ("ez1", Objective::Sg(SgField::Ez1)),
    ("ep2", Objective::Sg(SgField::Ep2)),
    ("ez2", Objective::Sg(SgField::Ez2)),
    ("qubit-dp", Objective::Qubit(QubitField::Dp)),
    ("qubit-dq", Objective::Qubit(QubitField::Dq)),
    ("qubit-ip1", Objective::Qubit(QubitField::Ip1)),
    ("qubit-ip2", Objective::Qubit(QubitField::Ip2)),
];

impl Objective {
    /// Command-line name, e.g. `ip1` or `qubit-dp`.
    pub fn name(self) -> &'static str {
        OBJECTIVE_NAMES
            .iter()
            .find(|(_, o)| *o == self)
            .map(|(n, _)| *n)
            .unwrap()
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OBJECTIVE_NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, o)| *o)
            .ok_or_else(|| Error::invalid(format!("unknown objective `{s}`")))
    }
}

impl Serialize for Objective {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Fixed parameters an objective is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveContext {
    pub delta: f64,
    pub g: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ObjectiveContext {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let (a1, a2) = cfg.qubit_eigenvalues()?;
        Ok(Self {
            delta: cfg.delta,
            g: positive_coupling(cfg)?,
            a1,
            a2,
        })
    }
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const ANGLE_BOUNDS: [(f64, f64); 4] = [
    (0.0, std::f64::consts::PI),
    (0.0, TWO_PI),
    (0.0, std::f64::consts::PI),
    (0.0, TWO_PI),
];

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Sg(_) => 2,
            Objective::Qubit(_) => 4,
        }
    }

    pub fn bounds(&self) -> &'static [(f64, f64)] {
        &ANGLE_BOUNDS[..self.dim()]
    }

    /// Objective value, NaN where it is undefined.
    pub fn evaluate(&self, ctx: &ObjectiveContext, x: &[f64]) -> f64 {
        self.try_evaluate(ctx, x).unwrap_or(f64::NAN)
    }

    fn try_evaluate(&self, ctx: &ObjectiveContext, x: &[f64]) -> Result<f64> {
        match *self {
            Objective::Sg(field) => {
                let cfg = SgConfig::new(x[0], x[1], ctx.delta, ctx.g)?;
                use SgField::*;
                Ok(match field {
                    Dp => sg_readout(&cfg)?.dp,
                    Dz => sg_readout(&cfg)?.dz,
                    Ip1 => sg_snr_improvements(&cfg)?.ip_1,
                    Iz1 => sg_snr_improvements(&cfg)?.iz_1,
                    Ip2 => sg_snr_improvements(&cfg)?.ip_2,
                    Iz2 => sg_snr_improvements(&cfg)?.iz_2,
                    Ep1 => sg_ms_enhancements(&cfg)?.ep_1,
                    Ez1 => sg_ms_enhancements(&cfg)?.ez_1,
                    Ep2 => sg_ms_enhancements(&cfg)?.ep_2,
                    Ez2 => sg_ms_enhancements(&cfg)?.ez_2,
                })
            }
            Objective::Qubit(field) => {
                let pre = BlochAngles::wrapped(x[0], x[1])?;
                let post = BlochAngles::wrapped(x[2], x[3])?;
                match field {
                    QubitField::Dp => {
                        Ok(qubit_readout(ctx.a1, ctx.a2, pre, post, ctx.delta, ctx.g)?.dp)
                    }
                    QubitField::Dq => {
                        Ok(qubit_readout(ctx.a1, ctx.a2, pre, post, ctx.delta, ctx.g)?.dq)
                    }
                    QubitField::Ip1 | QubitField::Ip2 => {
                        let obs = Observable::new(vec![ctx.a1, ctx.a2])?;
                        let ptr = GaussianPointer::new(ctx.delta)?;
                        let r = snr_report(&obs, &qubit_pps(pre, post), &ptr, ctx.g, 1)?;
                        Ok(if field == QubitField::Ip1 {
                            r.ip_1
                        } else {
                            r.ip_2
                        })
                    }
                }
            }
        }
    }

    /// Closed-form maximum where one is known.
    pub fn closed_form(&self, ctx: &ObjectiveContext) -> Option<f64> {
        match self {
            Objective::Sg(SgField::Dp) => sg_momentum_max(ctx.delta, ctx.g).ok().map(|m| m.dp_max),
            Objective::Sg(SgField::Dz) => sg_position_max(ctx.delta, ctx.g).ok().map(|m| m.dz_max),
            Objective::Qubit(QubitField::Dp) => qubit_extremes(ctx.a1, ctx.a2, ctx.delta, ctx.g)
                .ok()
                .map(|x| x.momentum.dp_max),
            Objective::Qubit(QubitField::Dq) => qubit_extremes(ctx.a1, ctx.a2, ctx.delta, ctx.g)
                .ok()
                .map(|x| x.position.dq_max),
            _ => None,
        }
    }
}

/// Derivative-free refinement from `start`, clamped to the angle domain.
pub fn refine_extremum(
    objective: Objective,
    ctx: &ObjectiveContext,
    start: &[f64],
    tol: Tolerances,
) -> Result<Refined> {
    if start.len() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            got: start.len(),
        });
    }
    maximize(
        |x| objective.evaluate(ctx, x),
        start,
        objective.bounds(),
        tol,
    )
}

/// The `count` best grid points of an objective, best first. For 4-angle
/// objectives both states range over the same `(θ, φ)` grid.
pub fn grid_seeds(
    objective: Objective,
    ctx: &ObjectiveContext,
    scan: &ScanSpec,
    count: usize,
) -> Vec<(Vec<f64>, f64)> {
    let angles = angle_grid(scan);
    let points: Vec<Vec<f64>> = match objective.dim() {
        2 => angles.iter().map(|&(t, p)| vec![t, p]).collect(),
        _ => angles
            .iter()
            .flat_map(|&(t1, p1)| angles.iter().map(move |&(t2, p2)| vec![t1, p1, t2, p2]))
            .collect(),
    };
    let values = par::map(&points, |x| objective.evaluate(ctx, x));
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| !values[i].is_nan()).collect();
    // stable sort keeps the first-found point ahead on ties
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    order
        .into_iter()
        .take(count)
        .map(|i| (points[i].clone(), values[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineOutcome {
    pub objective: Objective,
    pub grid_point: Vec<f64>,
    pub grid_value: f64,
    pub refined: Refined,
    pub closed_form: Option<f64>,
}

/// Grid search followed by refinement from each of the `seeds` best points.
pub fn refine_from_grid(
    objective: Objective,
    ctx: &ObjectiveContext,
    scan: &ScanSpec,
    seeds: usize,
    tol: Tolerances,
) -> Result<RefineOutcome> {
    let starts = grid_seeds(objective, ctx, scan, seeds.max(1));
    let (grid_point, grid_value) = starts
        .first()
        .cloned()
        .ok_or_else(|| Error::NumericalFailure("objective undefined on the whole grid".into()))?;
    let results = par::map(&starts, |(x, _)| refine_extremum(objective, ctx, x, tol));
    let mut best: Option<Refined> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    Ok(RefineOutcome {
        objective,
        grid_point,
        grid_value,
        refined: best.expect("at least one seed"),
        closed_form: objective.closed_form(ctx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::RefineStatus;
    use std::f64::consts::PI;

    fn sg_cfg(g: f64, step_deg: f64) -> RunConfig {
        RunConfig {
            g: Some(g),
            scan: ScanSpec::with_resolution_deg(step_deg),
            ..RunConfig::default()
        }
    }

    #[test]
    fn row_count_and_order() {
        let t = scan_angles(&sg_cfg(0.01, 10.0), ColumnGroup::Readout).unwrap();
        assert_eq!(t.rows.len(), 19 * 36);
        assert_eq!(t.rows[1].coords, vec![0.0, 10f64.to_radians()]);
        assert_eq!(t.rows[36].coords[0], 10f64.to_radians());
        assert_eq!(t.rows.last().unwrap().coords[0], PI);
    }

    #[test]
    fn vanishing_rows_are_flagged() {
        let t = scan_angles(&sg_cfg(1e-8, 90.0), ColumnGroup::Readout).unwrap();
        let bad: Vec<&Row> = t.rows.iter().filter(|r| r.error.is_some()).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].coords, vec![PI / 2.0, PI]);
        assert_eq!(bad[0].error, Some("VanishingPostselection"));
        assert!(bad[0].values.iter().all(|v| v.is_nan()));
        let csv = t.to_csv();
        assert!(csv.contains("NaN,VanishingPostselection\n"));
        for row in &t.rows {
            assert!(row.error.is_some() || row.values.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn momentum_argmax_near_equator() {
        let t = scan_angles(&sg_cfg(0.01, 1.0), ColumnGroup::Readout).unwrap();
        let m = t.argmax("dp").unwrap();
        assert!((m.coords[0] - PI / 2.0).abs() < 0.05);
        assert!((m.coords[1] - PI).abs() < 1e-12);
        assert!(m.value / 0.01 > 45.0 && m.value / 0.01 < 50.005);
    }

    #[test]
    fn argmax_takes_first_of_ties() {
        let t = ScanTable {
            axes: vec![],
            columns: vec!["x".into()],
            rows: [1.0, 3.0, f64::NAN, 3.0]
                .iter()
                .enumerate()
                .map(|(i, &v)| Row {
                    coords: vec![i as f64],
                    values: vec![v],
                    error: None,
                })
                .collect(),
            metadata: metadata(&RunConfig::default(), "test", None, None),
        };
        assert_eq!(t.argmax("x").unwrap().row, 1);
    }

    #[test]
    fn csv_formatting() {
        let t = scan_angles(&sg_cfg(0.01, 90.0), ColumnGroup::Readout).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "theta,phi,dp,dz,probability,sd_p,sd_z,error"
        );
        let first = lines.next().unwrap();
        assert!(
            first.starts_with("0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e-2,")
        );
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let cfg = sg_cfg(0.01, 5.0);
        let a = scan_angles_with(&cfg, ColumnGroup::Metrics, Exec::Parallel).unwrap();
        let b = scan_angles_with(&cfg, ColumnGroup::Metrics, Exec::Sequential).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn g_scan_limits() {
        let cfg = RunConfig {
            g: None,
            g_range: Some(GRange {
                min: 1e-3,
                max: 10.0,
                steps: 41,
                spacing: crate::config::Spacing::Log,
            }),
            ..RunConfig::default()
        };
        let t = scan_g(&cfg).unwrap();
        let first = &t.rows[0].values;
        let last = &t.rows[40].values;
        assert!((first[1] * 2.0 * 1e-3 - 1.0).abs() < 1e-3);
        assert!((last[1] - 1.0).abs() < 1e-12);
        assert!((first[2] - 1.0).abs() < 1e-3 && last[2] < 1e-80);
        assert!((first[3] / 2e-6 - 1.0).abs() < 0.01);
    }

    #[test]
    fn refine_hits_closed_form() {
        let ctx = ObjectiveContext {
            delta: 1.0,
            g: 0.01,
            a1: 1.0,
            a2: -1.0,
        };
        let out = refine_from_grid(
            Objective::Sg(SgField::Dp),
            &ctx,
            &ScanSpec::with_resolution_deg(1.0),
            1,
            Tolerances::default(),
        )
        .unwrap();
        let cf = out.closed_form.unwrap();
        assert!(out.grid_value <= out.refined.value);
        assert!(out.refined.value <= cf + 1e-9);
        assert!((out.refined.value / cf - 1.0).abs() < 1e-6);
    }

    #[test]
    fn eigenstate_slice_is_flat() {
        // degenerate spectrum: dp = g for every state pair
        let ctx = ObjectiveContext {
            delta: 1.0,
            g: 0.01,
            a1: 1.0,
            a2: 1.0,
        };
        let r = refine_extremum(
            Objective::Qubit(QubitField::Dp),
            &ctx,
            &[0.3, 1.0, 2.0, 4.0],
            Tolerances::default(),
        )
        .unwrap();
        assert_eq!(r.status, RefineStatus::FlatObjective);
        assert_eq!(r.point, vec![0.3, 1.0, 2.0, 4.0]);
    }

    #[test]
    fn objective_names() {
        assert_eq!(
            "ep2".parse::<Objective>().unwrap(),
            Objective::Sg(SgField::Ep2)
        );
        assert!("nope".parse::<Objective>().is_err());
        for (name, obj) in OBJECTIVE_NAMES {
            assert_eq!(obj.name().parse::<Objective>().unwrap(), obj);
            assert_eq!(serde_json::to_value(obj).unwrap(), name);
        }
    }
}
