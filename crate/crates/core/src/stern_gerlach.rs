//! Stern–Gerlach configuration: spin-1/2 prepared along `n(θ, φ)`, coupled
//! through `σ_z ⊗ z`, postselected along `+x`.
//!
//! All quantities are in terms of `K = 1 + sinθ cosφ e^{-2Δ²g²}`; the
//! postselection probability is `K/2`. The transverse beam profile factors out
//! of every `z`/`p_z` moment and is not modelled.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::PROBABILITY_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgConfig {
    pub theta: f64,
    pub phi: f64,
    /// Beam spread along `z`.
    pub delta: f64,
    /// Coupling `μ ∂B_z/∂z`.
    pub g: f64,
}

impl SgConfig {
    pub fn new(theta: f64, phi: f64, delta: f64, g: f64) -> Result<Self> {
        if ![theta, phi, delta, g].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("Stern–Gerlach parameters must be finite"));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid(format!("theta = {theta} outside [0, π]")));
        }
        if !(0.0..=2.0 * PI).contains(&phi) {
            return Err(Error::invalid(format!("phi = {phi} outside [0, 2π]")));
        }
        check_positive(delta, g)?;
        Ok(Self {
            theta,
            phi,
            delta,
            g,
        })
    }

    /// `e^{-2Δ²g²}`.
    pub fn coherence(&self) -> f64 {
        (-2.0 * self.delta * self.delta * self.g * self.g).exp()
    }

    /// `K = 1 + sinθ cosφ e^{-2Δ²g²}`.
    pub fn k(&self) -> f64 {
        1.0 + self.theta.sin() * self.phi.cos() * self.coherence()
    }

    /// `4Δ²g²`.
    pub(crate) fn four_d2g2(&self) -> f64 {
        4.0 * self.delta * self.delta * self.g * self.g
    }

    pub(crate) fn checked_k(&self) -> Result<f64> {
        let k = self.k();
        if !(k / 2.0 > PROBABILITY_FLOOR) {
            return Err(Error::VanishingPostselection {
                probability: k / 2.0,
            });
        }
        Ok(k)
    }
}

fn check_positive(delta: f64, g: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::invalid(format!("g must be positive, got {g}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgReadout {
    pub dp: f64,
    pub dz: f64,
    pub probability: f64,
    pub sd_p: f64,
    pub sd_z: f64,
}

pub fn sg_readout(cfg: &SgConfig) -> Result<SgReadout> {
    let k = cfg.checked_k()?;
    let (s, c) = (cfg.theta.sin(), cfg.theta.cos());
    let (sf, cf) = (cfg.phi.sin(), cfg.phi.cos());
    let e = cfg.coherence();
    let (g, d2) = (cfg.g, cfg.delta * cfg.delta);
    let var_p = 0.25 / d2 + g * g * (s * s + s * cf * e) / (k * k);
    let var_z = d2 - 4.0 * g * g * d2 * d2 * (s * cf + s * s * e) * e / (k * k);
    Ok(SgReadout {
        dp: g * c / k,
        dz: 2.0 * g * d2 * s * sf * e / k,
        probability: k / 2.0,
        sd_p: crate::pps::spread(var_p, 0.0, "momentum")?,
        sd_z: crate::pps::spread(var_z, 0.0, "position")?,
    })
}

/// Analytic `(∂δp'_z/∂g, ∂δz'/∂g)` at fixed angles.
pub fn sg_shift_derivatives(cfg: &SgConfig) -> Result<(f64, f64)> {
    let k = cfg.checked_k()?;
    let x = cfg.four_d2g2();
    let e = cfg.coherence();
    let d2 = cfg.delta * cfg.delta;
    let dpdg = cfg.theta.cos() / k * (1.0 + x - x / k);
    let dzdg = 2.0 * d2 * cfg.theta.sin() * cfg.phi.sin() * e / k * (1.0 - x / k);
    Ok((dpdg, dzdg))
}

/// Maximal shifts and the state that attains one of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgMax {
    pub dp_max: f64,
    pub dz_max: f64,
    pub theta_opt: f64,
    pub phi_opt: f64,
    /// Postselection probability at the optimum, `(1 - e^{-4Δ²g²})/2`.
    pub p_max: f64,
}

struct Closed {
    e: f64,
    /// `1 - e^{-4Δ²g²}`.
    w: f64,
    dp_max: f64,
    dz_max: f64,
}

fn closed_forms(delta: f64, g: f64) -> Result<Closed> {
    check_positive(delta, g)?;
    let x = 2.0 * delta * delta * g * g;
    let e = (-x).exp();
    let w = -(-2.0 * x).exp_m1();
    Ok(Closed {
        e,
        w,
        dp_max: g / w.sqrt(),
        dz_max: 2.0 * g * delta * delta * e / w.sqrt(),
    })
}

/// Momentum optimum at `θ = arcsin e^{-2Δ²g²}`, `φ = π`.
pub fn sg_momentum_max(delta: f64, g: f64) -> Result<SgMax> {
    let c = closed_forms(delta, g)?;
    Ok(SgMax {
        dp_max: c.dp_max,
        dz_max: c.dz_max,
        theta_opt: c.e.atan2(c.w.sqrt()),
        phi_opt: PI,
        p_max: c.w / 2.0,
    })
}

/// Position optimum at `θ = π/2`, `φ = π - arccos e^{-2Δ²g²}`.
pub fn sg_position_max(delta: f64, g: f64) -> Result<SgMax> {
    let c = closed_forms(delta, g)?;
    Ok(SgMax {
        dp_max: c.dp_max,
        dz_max: c.dz_max,
        theta_opt: PI / 2.0,
        phi_opt: PI - c.w.sqrt().atan2(c.e),
        p_max: c.w / 2.0,
    })
}
