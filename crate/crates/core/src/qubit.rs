//! Two-level systems in Bloch-angle form, with the closed-form extremal
//! pointer shifts over all pre/post state pairs.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pps::{postselect_readout, GaussianPointer, Observable, PpsPair, Readout};
use crate::PROBABILITY_FLOOR;

/// Polar angle `theta ∈ [0, π]` and azimuth `phi ∈ [0, 2π)` of a qubit state
/// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::invalid("Bloch angles must be finite"));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid(format!("theta = {theta} outside [0, π]")));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::invalid(format!("phi = {phi} outside [0, 2π)")));
        }
        Ok(Self { theta, phi })
    }

    /// Builds angles with `phi` wrapped into `[0, 2π)`.
    pub fn wrapped(theta: f64, phi: f64) -> Result<Self> {
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Self::new(theta, phi)
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        vec![
            Complex64::new((self.theta / 2.0).cos(), 0.0),
            Complex64::from_polar((self.theta / 2.0).sin(), self.phi),
        ]
    }
}

/// Amplitude vectors for a qubit pre/post pair.
pub fn qubit_pps(pre: BlochAngles, post: BlochAngles) -> PpsPair {
    PpsPair::normalized(pre.amplitudes(), post.amplitudes())
        .expect("Bloch amplitudes are normalized by construction")
}

/// `exp(-g²Δ²(a1 - a2)²/2)`, the pointer-overlap factor between the two branches.
pub fn coherence(a1: f64, a2: f64, delta: f64, g: f64) -> f64 {
    let x = g * delta * (a1 - a2);
    (-0.5 * x * x).exp()
}

/// Closed-form qubit readout. Shifts and probability come from the Bloch-angle
/// formulas; spreads are taken from the general double-sum evaluation.
pub fn qubit_readout(
    a1: f64,
    a2: f64,
    pre: BlochAngles,
    post: BlochAngles,
    delta: f64,
    g: f64,
) -> Result<Readout> {
    if !(a1.is_finite() && a2.is_finite() && g.is_finite()) {
        return Err(Error::invalid("eigenvalues and coupling must be finite"));
    }
    let pointer = GaussianPointer::new(delta)?;
    let e = coherence(a1, a2, delta, g);
    let (c1, c2) = (pre.theta.cos(), post.theta.cos());
    let (s1, s2) = (pre.theta.sin(), post.theta.sin());
    let phi0 = pre.phi - post.phi;
    let n = 1.0 + c1 * c2 + s1 * s2 * phi0.cos() * e;
    let probability = n / 2.0;
    if probability <= PROBABILITY_FLOOR {
        return Err(Error::VanishingPostselection { probability });
    }
    let dp = 0.5 * (a1 + a2) * g + g * (a1 - a2) * (c1 + c2) / (2.0 * n);
    let dq = g * delta * delta * (a1 - a2) * s1 * s2 * phi0.sin() * e / n;

    let obs = Observable::new(vec![a1, a2])?;
    let full = postselect_readout(&obs, &qubit_pps(pre, post), &pointer, g)?;
    Ok(Readout {
        probability: probability.min(1.0),
        dp,
        dq,
        sd_p: full.sd_p,
        sd_q: full.sd_q,
    })
}

/// Extremal momentum shifts over all pre/post pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumExtremes {
    pub dp_min: f64,
    pub dp_max: f64,
    /// `t = -√(W/M)` at the minimum.
    pub t_opt_min: f64,
    /// `t = +√(W/M)` at the maximum.
    pub t_opt_max: f64,
    /// Relative phase `φ1 - φ2` at both extrema.
    pub phi0_for_p: f64,
    pub m: f64,
    pub w: f64,
}

/// Extremal position shifts over all pre/post pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionExtremes {
    pub dq_min: f64,
    pub dq_max: f64,
    /// `φ1 - φ2 = π + arccos e^{-g²Δ²(a1-a2)²/2}`, with `θ1 + θ2 = π`.
    pub phi0_for_q_min: f64,
    /// `φ1 - φ2 = π - arccos e^{-g²Δ²(a1-a2)²/2}`, with `θ1 + θ2 = π`.
    pub phi0_for_q_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitExtremes {
    #[serde(flatten)]
    pub momentum: MomentumExtremes,
    #[serde(flatten)]
    pub position: PositionExtremes,
}

fn check_extreme_args(a1: f64, a2: f64, delta: f64, g: f64) -> Result<()> {
    if !(a1.is_finite() && a2.is_finite()) {
        return Err(Error::invalid("eigenvalues must be finite"));
    }
    if a1 == a2 {
        return Err(Error::DegenerateObservable);
    }
    if a1 < a2 {
        return Err(Error::invalid("extremes expect a1 > a2"));
    }
    GaussianPointer::new(delta)?;
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::invalid(format!(
            "coupling must be positive, got {g}"
        )));
    }
    Ok(())
}

/// `1 - e^{-g²Δ²(a1-a2)²}` computed without cancellation at small coupling.
fn one_minus_coherence_sq(a1: f64, a2: f64, delta: f64, g: f64) -> f64 {
    let x = g * delta * (a1 - a2);
    -(-x * x).exp_m1()
}

pub fn momentum_shift_extremes(a1: f64, a2: f64, delta: f64, g: f64) -> Result<MomentumExtremes> {
    check_extreme_args(a1, a2, delta, g)?;
    let e = coherence(a1, a2, delta, g);
    let x = g * delta * (a1 - a2);
    let w = -(-0.5 * x * x).exp_m1();
    let m = 1.0 + e;
    let mid = 0.5 * (a1 + a2) * g;
    let half = (a1 - a2) * g / (2.0 * one_minus_coherence_sq(a1, a2, delta, g).sqrt());
    let t = (w / m).sqrt();
    Ok(MomentumExtremes {
        dp_min: mid - half,
        dp_max: mid + half,
        t_opt_min: -t,
        t_opt_max: t,
        phi0_for_p: PI,
        m,
        w,
    })
}

pub fn position_shift_extremes(a1: f64, a2: f64, delta: f64, g: f64) -> Result<PositionExtremes> {
    check_extreme_args(a1, a2, delta, g)?;
    let e = coherence(a1, a2, delta, g);
    let dq_max =
        g * delta * delta * (a1 - a2) * e / one_minus_coherence_sq(a1, a2, delta, g).sqrt();
    Ok(PositionExtremes {
        dq_min: -dq_max,
        dq_max,
        phi0_for_q_min: PI + e.acos(),
        phi0_for_q_max: PI - e.acos(),
    })
}

pub fn qubit_extremes(a1: f64, a2: f64, delta: f64, g: f64) -> Result<QubitExtremes> {
    Ok(QubitExtremes {
        momentum: momentum_shift_extremes(a1, a2, delta, g)?,
        position: position_shift_extremes(a1, a2, delta, g)?,
    })
}

impl MomentumExtremes {
    /// A pre/post pair attaining `dp_max` (`θ1 = θ2 = arccos t`, `φ1 - φ2 = π`).
    pub fn argmax(&self) -> (BlochAngles, BlochAngles) {
        let theta = self.t_opt_max.acos();
        (
            BlochAngles::new(theta, PI).unwrap(),
            BlochAngles::new(theta, 0.0).unwrap(),
        )
    }

    pub fn argmin(&self) -> (BlochAngles, BlochAngles) {
        let theta = self.t_opt_min.acos();
        (
            BlochAngles::new(theta, PI).unwrap(),
            BlochAngles::new(theta, 0.0).unwrap(),
        )
    }
}

impl PositionExtremes {
    /// A pair attaining `dq_max`, taking `θ1 = θ2 = π/2`.
    pub fn argmax(&self) -> (BlochAngles, BlochAngles) {
        (
            BlochAngles::wrapped(PI / 2.0, self.phi0_for_q_max).unwrap(),
            BlochAngles::new(PI / 2.0, 0.0).unwrap(),
        )
    }

    pub fn argmin(&self) -> (BlochAngles, BlochAngles) {
        (
            BlochAngles::wrapped(PI / 2.0, self.phi0_for_q_min).unwrap(),
            BlochAngles::new(PI / 2.0, 0.0).unwrap(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pps::weak_value;
    use std::f64::consts::FRAC_PI_2;

    fn ang(t: f64, p: f64) -> BlochAngles {
        BlochAngles::new(t, p).unwrap()
    }

    #[test]
    fn angle_domain() {
        assert!(BlochAngles::new(PI, 0.0).is_ok());
        assert!(BlochAngles::new(PI + 1e-9, 0.0).is_err());
        assert!(BlochAngles::new(1.0, 2.0 * PI).is_err());
        assert!(BlochAngles::new(-0.1, 0.0).is_err());
        let w = BlochAngles::wrapped(1.0, -0.5).unwrap();
        assert!((w.phi - (2.0 * PI - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_pair_gives_midpoint() {
        for g in [0.01, 0.5, 3.0] {
            let r =
                qubit_readout(1.0, -1.0, ang(FRAC_PI_2, 0.0), ang(FRAC_PI_2, PI), 1.0, g).unwrap();
            assert!(r.dp.abs() < 1e-12);
            assert!(r.dq.abs() < 1e-12);
            let r =
                qubit_readout(1.0, 0.2, ang(FRAC_PI_2, 0.0), ang(FRAC_PI_2, PI), 0.8, g).unwrap();
            assert!((r.dp - 0.6 * g).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenstate_pair_ignores_phases() {
        for (p1, p2) in [(0.0, 0.0), (1.0, 4.0), (3.0, 0.2)] {
            let r = qubit_readout(1.0, -1.0, ang(0.0, p1), ang(0.0, p2), 1.0, 0.7).unwrap();
            assert!((r.dp - 0.7).abs() < 1e-15);
            assert_eq!(r.dq, 0.0);
        }
    }

    #[test]
    fn imaginary_weak_value_example() {
        let r = qubit_readout(
            1.0,
            -1.0,
            ang(FRAC_PI_2, FRAC_PI_2),
            ang(FRAC_PI_2, 0.0),
            1.0,
            0.01,
        )
        .unwrap();
        assert!((r.dq - 0.02 * (-2e-4f64).exp()).abs() < 1e-15);
        assert!(r.dp.abs() < 1e-17);
    }

    #[test]
    fn momentum_extremes_examples() {
        let m = momentum_shift_extremes(1.0, -1.0, 1.0, 0.01).unwrap();
        let expected = 0.01 / (1.0 - (-4e-4f64).exp()).sqrt();
        assert!((m.dp_max - expected).abs() < 1e-12);
        assert!((m.dp_max - 0.50005).abs() < 1e-5);
        assert_eq!(m.dp_min, -m.dp_max);
        assert!((m.m + m.w - 2.0).abs() < 1e-15);
        assert!(m.w > 0.0 && m.w < 1.0);

        let m = momentum_shift_extremes(1.0, -1.0, 1.0, 100.0).unwrap();
        assert_eq!(m.dp_max, 100.0);
        assert_eq!(m.dp_min, -100.0);

        let m = momentum_shift_extremes(1.0, 0.0, 1.0, 0.01).unwrap();
        let half = 0.01 / (2.0 * (1.0 - (-1e-4f64).exp()).sqrt());
        assert!((m.dp_max - (0.005 + half)).abs() < 1e-12);
        assert!((m.dp_min - (0.005 - half)).abs() < 1e-12);

        assert_eq!(
            momentum_shift_extremes(0.5, 0.5, 1.0, 0.1),
            Err(Error::DegenerateObservable)
        );
        assert!(momentum_shift_extremes(-1.0, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn extremes_are_attained_at_returned_angles() {
        for &(a1, a2, d, g) in &[
            (1.0, -1.0, 1.0, 0.01),
            (1.0, 0.0, 2.0, 0.3),
            (0.7, -0.2, 0.5, 4.0),
        ] {
            let ex = qubit_extremes(a1, a2, d, g).unwrap();
            let (pre, post) = ex.momentum.argmax();
            let r = qubit_readout(a1, a2, pre, post, d, g).unwrap();
            assert!((r.dp - ex.momentum.dp_max).abs() < 1e-10 * ex.momentum.dp_max.abs().max(1.0));
            let (pre, post) = ex.momentum.argmin();
            let r = qubit_readout(a1, a2, pre, post, d, g).unwrap();
            assert!((r.dp - ex.momentum.dp_min).abs() < 1e-10 * ex.momentum.dp_min.abs().max(1.0));
            let (pre, post) = ex.position.argmax();
            let r = qubit_readout(a1, a2, pre, post, d, g).unwrap();
            assert!(
                (r.dq - ex.position.dq_max).abs() < 1e-10 * ex.position.dq_max.abs().max(1e-300)
            );
            let (pre, post) = ex.position.argmin();
            let r = qubit_readout(a1, a2, pre, post, d, g).unwrap();
            assert!(
                (r.dq - ex.position.dq_min).abs() < 1e-10 * ex.position.dq_max.abs().max(1e-300)
            );
        }
    }

    #[test]
    fn position_extremes_examples() {
        let p = position_shift_extremes(1.0, -1.0, 1.0, 0.01).unwrap();
        let expected = 0.02 * (-2e-4f64).exp() / (1.0 - (-4e-4f64).exp()).sqrt();
        assert!((p.dq_max - expected).abs() < 1e-12);
        assert!((p.dq_max - 0.99995).abs() < 1e-4);
        assert_eq!(p.dq_min, -p.dq_max);
        let (pre, post) = p.argmax();
        let overlap = qubit_pps(pre, post).overlap().norm();
        assert!(overlap < 0.02, "{overlap}");

        let p = position_shift_extremes(1.0, -1.0, 1.0, 100.0).unwrap();
        assert!(p.dq_max < 1e-300);
    }

    #[test]
    fn amplification_factor_at_weak_coupling() {
        for g in [1e-4, 1e-3, 0.01] {
            let m = momentum_shift_extremes(1.0, -1.0, 1.0, g).unwrap();
            let (pre, post) = m.argmax();
            let r = qubit_readout(1.0, -1.0, pre, post, 1.0, g).unwrap();
            assert!(r.dp >= 0.99 / (2.0 * g) * g);
            // the optimum sits at a nearly orthogonal but not exactly orthogonal pair
            assert!(weak_value(
                &Observable::new(vec![1.0, -1.0]).unwrap(),
                &qubit_pps(pre, post)
            )
            .is_ok());
        }
    }

    #[test]
    fn swapping_states_negates_position_shift() {
        let (pre, post) = (ang(1.1, 0.3), ang(2.0, 4.1));
        let a = qubit_readout(1.0, -0.4, pre, post, 0.9, 0.6).unwrap();
        let b = qubit_readout(1.0, -0.4, post, pre, 0.9, 0.6).unwrap();
        assert!((a.dq + b.dq).abs() < 1e-15);
        assert!((a.dp - b.dp).abs() < 1e-15);
        assert!((a.probability - b.probability).abs() < 1e-15);
    }
}
