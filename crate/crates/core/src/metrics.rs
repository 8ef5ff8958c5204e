//! Signal-to-noise ratio improvements and measurement-sensitivity
//! enhancements from postselection.
//!
//! Type-I figures charge the postselection loss (`√P` on the repetition
//! count); type-II figures assume the repetition count is fixed by detector
//! saturation and ignore it. For both, `X_I = √P · X_II`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimize::{maximize, Tolerances};
use crate::pps::{no_postselect_shift, postselect_readout, GaussianPointer, Observable, PpsPair};
use crate::stern_gerlach::SgConfig;

/// Upper end of `gΔ` for the small-coupling type-II maximum.
pub const SMALL_COUPLING_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrReport {
    /// SNR without postselection for the given preselected state.
    pub r0: f64,
    /// Best SNR without postselection over all input states.
    pub r0_max: f64,
    pub rp: f64,
    pub rq: f64,
    pub ip_1: f64,
    pub iq_1: f64,
    pub ip_2: f64,
    pub iq_2: f64,
    pub n: u32,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MsReport {
    pub dg_opt: f64,
    pub dg_p: f64,
    pub dg_q: f64,
    pub ep_1: f64,
    pub eq_1: f64,
    pub ep_2: f64,
    pub eq_2: f64,
    pub n: u32,
    pub probability: f64,
}

fn check_repetitions(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("repetition count must be at least 1"));
    }
    Ok(n as f64)
}

fn a_max_abs(obs: &Observable) -> Result<f64> {
    let a = obs.a_max().abs();
    if a == 0.0 {
        return Err(Error::DegenerateObservable);
    }
    Ok(a)
}

pub fn snr_report(
    obs: &Observable,
    pps: &PpsPair,
    pointer: &GaussianPointer,
    g: f64,
    n: u32,
) -> Result<SnrReport> {
    let nf = check_repetitions(n)?;
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::invalid(format!(
            "coupling must be positive, got {g}"
        )));
    }
    let r = postselect_readout(obs, pps, pointer, g)?;
    if r.sd_q == 0.0 {
        return Err(Error::DegenerateSpread);
    }
    let a_max = a_max_abs(obs)?;
    let dp0 = pointer.sd_p();
    let shift0 = no_postselect_shift(obs, pps.alpha(), g)?;

    let r0 = nf.sqrt() * shift0.abs() / dp0;
    let r0_max = nf.sqrt() * a_max * g / dp0;
    let kept = (nf * r.probability).sqrt();
    let rp = kept * r.dp.abs() / r.sd_p;
    let rq = kept * r.dq.abs() / r.sd_q;
    Ok(SnrReport {
        r0,
        r0_max,
        rp,
        rq,
        ip_1: rp / r0_max,
        iq_1: rq / r0_max,
        ip_2: dp0 * r.dp.abs() / (r.sd_p * a_max * g),
        iq_2: dp0 * r.dq.abs() / (r.sd_q * a_max * g),
        n,
        probability: r.probability,
    })
}

/// Sensitivity report given the pointer-shift derivatives `(∂δp'/∂g, ∂δq'/∂g)`.
///
/// A channel whose derivative vanishes gets `Δg = ∞` and zero enhancement;
/// when both vanish the pointer carries no information about `g`.
pub fn ms_report(
    obs: &Observable,
    pps: &PpsPair,
    pointer: &GaussianPointer,
    g: f64,
    n: u32,
    dshift_dg: (f64, f64),
) -> Result<MsReport> {
    let nf = check_repetitions(n)?;
    let (dpdg, dqdg) = dshift_dg;
    if !(dpdg.is_finite() && dqdg.is_finite()) {
        return Err(Error::NumericalFailure(
            "shift derivative is not finite".into(),
        ));
    }
    if dpdg == 0.0 && dqdg == 0.0 {
        return Err(Error::InsensitivePointer);
    }
    let r = postselect_readout(obs, pps, pointer, g)?;
    let a_max = a_max_abs(obs)?;
    let dp0 = pointer.sd_p();
    let kept = (nf * r.probability).sqrt();

    let dg_opt = dp0 / (a_max * nf.sqrt());
    let dg_p = r.sd_p / (dpdg.abs() * kept);
    if dqdg != 0.0 && r.sd_q == 0.0 {
        return Err(Error::DegenerateSpread);
    }
    let dg_q = if dqdg == 0.0 {
        f64::INFINITY
    } else {
        r.sd_q / (dqdg.abs() * kept)
    };
    let type_two = |deriv: f64, spread: f64| {
        if deriv == 0.0 {
            0.0
        } else {
            dp0 * deriv.abs() / (a_max * spread)
        }
    };
    Ok(MsReport {
        dg_opt,
        dg_p,
        dg_q,
        ep_1: dg_opt / dg_p,
        eq_1: dg_opt / dg_q,
        ep_2: type_two(dpdg, r.sd_p),
        eq_2: type_two(dqdg, r.sd_q),
        n,
        probability: r.probability,
    })
}

/// Finite-difference step for `∂/∂g`.
pub fn derivative_step(g: f64) -> f64 {
    1e-6f64.max(1e-4 * g.abs())
}

/// Derivative of a pair of shifts with respect to `g`: central differences
/// with one Richardson step, or a forward difference at `g = 0`.
pub fn g_derivative<F>(mut shifts: F, g: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let h = derivative_step(g);
    if g == 0.0 {
        let (p0, q0) = shifts(0.0)?;
        let (p1, q1) = shifts(h)?;
        return Ok(((p1 - p0) / h, (q1 - q0) / h));
    }
    let mut central = |h: f64| -> Result<(f64, f64)> {
        let (pp, qp) = shifts(g + h)?;
        let (pm, qm) = shifts(g - h)?;
        Ok(((pp - pm) / (2.0 * h), (qp - qm) / (2.0 * h)))
    };
    let (p_h, q_h) = central(h)?;
    let (p_h2, q_h2) = central(h / 2.0)?;
    Ok(((4.0 * p_h2 - p_h) / 3.0, (4.0 * q_h2 - q_h) / 3.0))
}

/// `(∂δp'/∂g, ∂δq'/∂g)` of the exact readout, by finite differences.
pub fn readout_g_derivative(
    obs: &Observable,
    pps: &PpsPair,
    pointer: &GaussianPointer,
    g: f64,
) -> Result<(f64, f64)> {
    g_derivative(
        |g| postselect_readout(obs, pps, pointer, g).map(|r| (r.dp, r.dq)),
        g,
    )
}

/// [`ms_report`] with derivatives taken numerically from the exact readout.
pub fn ms_report_numeric(
    obs: &Observable,
    pps: &PpsPair,
    pointer: &GaussianPointer,
    g: f64,
    n: u32,
) -> Result<MsReport> {
    let d = readout_g_derivative(obs, pps, pointer, g)?;
    ms_report(obs, pps, pointer, g, n, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgSnr {
    pub ip_1: f64,
    pub iz_1: f64,
    pub ip_2: f64,
    pub iz_2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgMs {
    pub ep_1: f64,
    pub ez_1: f64,
    pub ep_2: f64,
    pub ez_2: f64,
}

struct SgTerms {
    k: f64,
    x: f64,
    /// `|cos θ|`
    p_signal: f64,
    /// `|sin θ sin φ e^{-2Δ²g²}|`
    z_signal: f64,
    /// `sin²θ + sinθ cosφ e^{-2Δ²g²}`
    p_noise: f64,
    /// `sinθ cosφ e^{-2Δ²g²} + sin²θ e^{-4Δ²g²}`
    z_noise: f64,
}

fn sg_terms(cfg: &SgConfig) -> Result<SgTerms> {
    let k = cfg.checked_k()?;
    let e = cfg.coherence();
    let (s, c) = (cfg.theta.sin(), cfg.theta.cos());
    let (sf, cf) = (cfg.phi.sin(), cfg.phi.cos());
    Ok(SgTerms {
        k,
        x: cfg.four_d2g2(),
        p_signal: c.abs(),
        z_signal: (s * sf * e).abs(),
        p_noise: s * s + s * cf * e,
        z_noise: s * cf * e + s * s * e * e,
    })
}

pub fn sg_snr_improvements(cfg: &SgConfig) -> Result<SgSnr> {
    let t = sg_terms(cfg)?;
    let (k, x) = (t.k, t.x);
    Ok(SgSnr {
        ip_1: t.p_signal * k.sqrt() / (2.0 * k * k + 2.0 * x * t.p_noise).sqrt(),
        iz_1: t.z_signal * k.sqrt() / (2.0 * k * k - 2.0 * x * t.z_noise).sqrt(),
        ip_2: t.p_signal / (k * k + x * t.p_noise).sqrt(),
        iz_2: t.z_signal / (k * k - x * t.z_noise).sqrt(),
    })
}

/// `(|1 + 4Δ²g² - 4Δ²g²/K|, |1 - 4Δ²g²/K|)`: the factors by which the
/// sensitivity enhancements differ from the SNR improvements.
pub fn sg_ms_prefactors(cfg: &SgConfig) -> Result<(f64, f64)> {
    let k = cfg.checked_k()?;
    let x = cfg.four_d2g2();
    Ok(((1.0 + x - x / k).abs(), (1.0 - x / k).abs()))
}

pub fn sg_ms_enhancements(cfg: &SgConfig) -> Result<SgMs> {
    let t = sg_terms(cfg)?;
    let (k, x) = (t.k, t.x);
    let (fp, fz) = sg_ms_prefactors(cfg)?;
    Ok(SgMs {
        ep_1: t.p_signal * fp * k.sqrt() / (2.0 * k * k + 2.0 * x * t.p_noise).sqrt(),
        ez_1: fz * t.z_signal * k.sqrt() / (2.0 * k * k - 2.0 * x * t.z_noise).sqrt(),
        ep_2: t.p_signal * fp / (k * k + x * t.p_noise).sqrt(),
        ez_2: fz * t.z_signal / (k * k - x * t.z_noise).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeIiMax {
    /// Small-coupling estimate `√(√3/6) / (gΔ)`.
    pub i_max: f64,
    /// `arcsin(1 - 2√3 Δ²g²)`.
    pub theta_star: f64,
    pub phi_star: f64,
    /// Numerically refined maximum of the exact type-II momentum improvement.
    pub exact_max: f64,
    pub exact_theta: f64,
    pub exact_phi: f64,
}

/// Small-coupling maximum of the type-II momentum SNR improvement, alongside
/// the refined maximum of the exact expression.
pub fn sg_snr_type_ii_max(delta: f64, g: f64) -> Result<TypeIiMax> {
    if !(delta > 0.0 && g > 0.0) || !(delta * g).is_finite() {
        return Err(Error::invalid("delta and g must be positive"));
    }
    let gd = g * delta;
    if gd > SMALL_COUPLING_LIMIT {
        return Err(Error::OutOfRegime {
            g_delta: gd,
            limit: SMALL_COUPLING_LIMIT,
        });
    }
    let i_max = (3f64.sqrt() / 6.0).sqrt() / gd;
    let theta_star = (1.0 - 2.0 * 3f64.sqrt() * gd * gd).asin();

    let objective = |x: &[f64]| {
        SgConfig::new(x[0], x[1], delta, g)
            .and_then(|c| sg_snr_improvements(&c))
            .map(|s| s.ip_2)
            .unwrap_or(f64::NAN)
    };
    let tol = Tolerances {
        initial_step: gd.min(0.01),
        ..Tolerances::default()
    };
    let refined = maximize(
        objective,
        &[theta_star, PI],
        &[(0.0, PI), (0.0, 2.0 * PI)],
        tol,
    )?;
    Ok(TypeIiMax {
        i_max,
        theta_star,
        phi_star: PI,
        exact_max: refined.value,
        exact_theta: refined.point[0],
        exact_phi: refined.point[1],
    })
}

/// Relative systematic error `Δ_sys / |X|` for a pointer shift `X`.
pub fn relative_system_error(shift: f64, delta_sys: f64) -> Result<f64> {
    if shift == 0.0 {
        return Err(Error::InsensitivePointer);
    }
    Ok(delta_sys / shift.abs())
}
