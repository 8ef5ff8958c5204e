use std::f64::consts::PI;

use ppsmeter::config::{RunConfig, ScanSpec};
use ppsmeter::metrics::{sg_ms_enhancements, sg_ms_prefactors, sg_snr_improvements};
use ppsmeter::optimize::Tolerances;
use ppsmeter::oracle::{oracle_g_derivative, GridSpec};
use ppsmeter::pps::{GaussianPointer, Observable};
use ppsmeter::qubit::{qubit_pps, BlochAngles};
use ppsmeter::scan::{
    refine_from_grid, scan_angles, ColumnGroup, Objective, ObjectiveContext, SgField,
};
use ppsmeter::stern_gerlach::{sg_momentum_max, sg_position_max, sg_shift_derivatives, SgConfig};

fn grid_cfg(delta: f64, g: f64, step_deg: f64) -> RunConfig {
    RunConfig {
        delta,
        g: Some(g),
        scan: ScanSpec::with_resolution_deg(step_deg),
        ..RunConfig::default()
    }
}

#[test]
fn one_degree_scan_never_beats_closed_forms() {
    for &(delta, g) in &[
        (1.0, 0.01),
        (1.0, 0.1),
        (0.5, 1.0),
        (2.0, 0.003),
        (1.0, 5.0),
    ] {
        let t = scan_angles(&grid_cfg(delta, g, 1.0), ColumnGroup::Readout).unwrap();
        let dp = t.argmax("dp").unwrap().value;
        let dz = t.argmax("dz").unwrap().value;
        assert!(dp <= sg_momentum_max(delta, g).unwrap().dp_max + 1e-9);
        assert!(dz <= sg_position_max(delta, g).unwrap().dz_max + 1e-9);
    }
}

/// `dp_max / g` sits at `1/(2gΔ)` up to a relative `(gΔ)²` excess.
#[test]
fn amplification_saturates_at_inverse_coupling() {
    for gd in [1e-4, 1e-3, 5e-3] {
        let m = sg_momentum_max(1.0, gd).unwrap();
        let ratio = m.dp_max / gd * (2.0 * gd);
        assert!(ratio >= 0.99 && ratio <= 1.0 + 2.0 * gd * gd, "{ratio}");
        assert!(ratio > 1.0);
    }
}

#[test]
fn half_degree_metric_ceilings() {
    for gd in [0.005, 0.01, 0.02] {
        let t = scan_angles(&grid_cfg(1.0, gd, 0.5), ColumnGroup::Metrics).unwrap();
        let ip1 = t.argmax("ip_1").unwrap().value;
        let ep1 = t.argmax("ep_1").unwrap().value;
        assert!(ip1 <= 1.04, "gΔ = {gd}: ip_1 = {ip1}");
        assert!(ep1 <= 1.0 + 1e-6, "gΔ = {gd}: ep_1 = {ep1}");
    }
}

#[test]
fn square_root_probability_relations() {
    let t = scan_angles(&grid_cfg(1.0, 0.01, 2.0), ColumnGroup::Metrics).unwrap();
    let col = |n: &str| t.column(n).unwrap();
    let p = col("probability");
    let rel = |a: f64, b: f64| {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    };
    for row in t.rows.iter().filter(|r| r.error.is_none()) {
        let sp = row.values[p].sqrt();
        for (one, two) in [
            ("ip_1", "ip_2"),
            ("iz_1", "iz_2"),
            ("ep_1", "ep_2"),
            ("ez_1", "ez_2"),
        ] {
            let (a, b) = (row.values[col(one)], sp * row.values[col(two)]);
            assert!(rel(a, b) <= 1e-12, "{one} at {:?}: {a} vs {b}", row.coords);
        }
    }
}

/// The sensitivity prefactors stay within `1 + 4Δ²g²`; they do exceed 1
/// slightly next to the near-orthogonal configuration.
#[test]
fn prefactors_are_bounded_by_one_plus_x() {
    for gd in [0.001, 0.01, 0.05] {
        let x = 4.0 * gd * gd;
        let mut worst: f64 = 0.0;
        for i in 0..=360 {
            for j in 0..720 {
                let cfg =
                    SgConfig::new(PI * i as f64 / 360.0, PI * j as f64 / 360.0, 1.0, gd).unwrap();
                if let Ok((fp, fz)) = sg_ms_prefactors(&cfg) {
                    worst = worst.max(fp).max(fz);
                    let s = sg_snr_improvements(&cfg).unwrap();
                    let m = sg_ms_enhancements(&cfg).unwrap();
                    assert!(m.ep_1 <= s.ip_1 * (1.0 + x) + 1e-15);
                    assert!(m.ez_1 <= s.iz_1 * (1.0 + x) + 1e-15);
                }
            }
        }
        assert!(worst <= 1.0 + x, "gΔ = {gd}: {worst}");
        assert!(worst > 1.0, "gΔ = {gd}: {worst}");
    }
}

#[test]
fn analytic_derivatives_match_the_oracle() {
    let obs = Observable::new(vec![1.0, -1.0]).unwrap();
    let ptr = GaussianPointer::new(1.0).unwrap();
    let post = BlochAngles::new(PI / 2.0, 0.0).unwrap();
    for &(theta, phi, g) in &[
        (1.2, 2.9, 0.01),
        (0.4, 1.0, 0.2),
        (2.0, 4.0, 0.7),
        (1.5, 3.0, 0.05),
    ] {
        let cfg = SgConfig::new(theta, phi, 1.0, g).unwrap();
        let (dp, dz) = sg_shift_derivatives(&cfg).unwrap();
        let pps = qubit_pps(BlochAngles::new(theta, phi).unwrap(), post);
        let (odp, odz) = oracle_g_derivative(&obs, &pps, &ptr, g, &GridSpec::default()).unwrap();
        assert!((odp - dp).abs() <= 1e-6 * dp.abs(), "{odp} vs {dp}");
        assert!((odz - dz).abs() <= 1e-6 * dz.abs(), "{odz} vs {dz}");
    }
}

#[test]
fn grid_then_refine_then_closed_form() {
    for g in [0.003, 0.01, 0.2, 1.0] {
        let ctx = ObjectiveContext {
            delta: 1.0,
            g,
            a1: 1.0,
            a2: -1.0,
        };
        for field in [SgField::Dp, SgField::Dz] {
            let out = refine_from_grid(
                Objective::Sg(field),
                &ctx,
                &ScanSpec::with_resolution_deg(1.0),
                2,
                Tolerances::default(),
            )
            .unwrap();
            let cf = out.closed_form.unwrap();
            assert!(out.grid_value <= out.refined.value, "{out:?}");
            assert!(out.refined.value <= cf + 1e-9, "{out:?}");
            assert!(
                (out.refined.value - cf).abs() <= 1e-6 * cf,
                "{field:?} g={g}: {} vs {cf}",
                out.refined.value
            );
        }
    }
}
