//! Exact readout for an arbitrary finite-dimensional observable.
//!
//! With `γ_m = α_m β_m*` and `E_mn = exp(-Δ² g² (a_m - a_n)² / 2)` every
//! pointer moment after postselection is a double sum over `γ_m γ_n* E_mn`
//! with a polynomial weight in `a_m ± a_n`. The sums are evaluated in full
//! (no symmetry folding), so their imaginary residues are a direct check on
//! the arithmetic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{csum, CompensatedSum};
use crate::{DEGENERACY_TOLERANCE, PROBABILITY_FLOOR};

/// Allowed deviation of `Σ|α|²` and `Σ|β|²` from one.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Variances in `[-VARIANCE_CLAMP, 0)` are floating-point cancellation and are
/// clamped to zero; anything more negative is a failure.
pub const VARIANCE_CLAMP: f64 = 1e-12;

/// Real spectrum of the measured observable, one entry per basis state.
/// Repeated values denote degeneracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    eigenvalues: Vec<f64>,
}

impl Observable {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("observable needs at least one eigenvalue"));
        }
        if eigenvalues.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("eigenvalues must be finite"));
        }
        Ok(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Spectral norm, `max_m |a_m|`.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc, a| acc.max(a.abs()))
    }

    /// Eigenvalue of largest magnitude; on a tie the positive one wins.
    pub fn a_max(&self) -> f64 {
        let (lo, hi) = (self.min(), self.max());
        if hi.abs() >= lo.abs() {
            hi
        } else {
            lo
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            eigenvalues: self.eigenvalues.iter().map(|a| -a).collect(),
        }
    }

    /// Groups basis indices into degenerate classes, ordered by eigenvalue.
    /// Neighbouring sorted values within [`DEGENERACY_TOLERANCE`] share a class.
    pub fn degenerate_classes(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&i, &j| self.eigenvalues[i].total_cmp(&self.eigenvalues[j]));
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for idx in order {
            match classes.last_mut() {
                Some(class)
                    if (self.eigenvalues[idx] - self.eigenvalues[*class.last().unwrap()]).abs()
                        <= DEGENERACY_TOLERANCE =>
                {
                    class.push(idx)
                }
                _ => classes.push(vec![idx]),
            }
        }
        classes
    }
}

/// Rescales the spectrum to unit norm and absorbs the scale into `g`, so that
/// every product `a_m g` is unchanged.
pub fn normalize_observable(raw_eigenvalues: &[f64], g_raw: f64) -> Result<(Observable, f64)> {
    let raw = Observable::new(raw_eigenvalues.to_vec())?;
    if !g_raw.is_finite() {
        return Err(Error::invalid("coupling g must be finite"));
    }
    let scale = raw.norm();
    if scale == 0.0 {
        return Err(Error::DegenerateObservable);
    }
    let eigenvalues = raw.eigenvalues.iter().map(|a| a / scale).collect();
    Ok((Observable { eigenvalues }, g_raw * scale))
}

/// Pre- and postselected amplitudes in the eigenbasis of the observable.
#[derive(Debug, Clone, PartialEq)]
pub struct PpsPair {
    alpha: Vec<Complex64>,
    beta: Vec<Complex64>,
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    crate::sum::rsum(v.iter().map(|z| z.norm_sqr()))
}

impl PpsPair {
    /// Both vectors must already be normalized to within [`NORM_TOLERANCE`].
    pub fn new(alpha: Vec<Complex64>, beta: Vec<Complex64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::invalid("state vectors must be nonempty"));
        }
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: beta.len(),
            });
        }
        if alpha.iter().chain(&beta).any(|z| !z.is_finite()) {
            return Err(Error::invalid("amplitudes must be finite"));
        }
        for (name, v) in [("preselected", &alpha), ("postselected", &beta)] {
            let n = norm_sqr(v);
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::invalid(format!(
                    "{name} state has squared norm {n}, expected 1"
                )));
            }
        }
        Ok(Self { alpha, beta })
    }

    /// Normalizes both vectors before validating.
    pub fn normalized(alpha: Vec<Complex64>, beta: Vec<Complex64>) -> Result<Self> {
        let scale = |v: Vec<Complex64>| -> Result<Vec<Complex64>> {
            let n = norm_sqr(&v).sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::invalid(
                    "cannot normalize a zero or non-finite vector",
                ));
            }
            Ok(v.into_iter().map(|z| z / n).collect())
        };
        Self::new(scale(alpha)?, scale(beta)?)
    }

    pub fn alpha(&self) -> &[Complex64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[Complex64] {
        &self.beta
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `⟨ψ_f|ψ_i⟩` by direct inner product.
    pub fn overlap(&self) -> Complex64 {
        csum(self.beta.iter().zip(&self.alpha).map(|(b, a)| b.conj() * a))
    }

    /// Exchanges the roles of the pre- and postselected states.
    pub fn swapped(&self) -> Self {
        Self {
            alpha: self.beta.clone(),
            beta: self.alpha.clone(),
        }
    }

    /// Multiplies the pre- and postselected states by global phases.
    pub fn with_phases(&self, pre: f64, post: f64) -> Self {
        let (ui, uf) = (Complex64::cis(pre), Complex64::cis(post));
        Self {
            alpha: self.alpha.iter().map(|z| z * ui).collect(),
            beta: self.beta.iter().map(|z| z * uf).collect(),
        }
    }
}

/// Initial Gaussian pointer centred at `q = p = 0` with position spread `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPointer {
    delta: f64,
}

impl GaussianPointer {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!(
                "pointer spread must be positive, got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `Δq = Δ`.
    pub fn sd_q(&self) -> f64 {
        self.delta
    }

    /// `Δp = 1 / (2Δ)`.
    pub fn sd_p(&self) -> f64 {
        0.5 / self.delta
    }
}

/// Postselection probability and conditional pointer statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub probability: f64,
    /// Momentum shift `δp'`.
    pub dp: f64,
    /// Position shift `δq'`.
    pub dq: f64,
    /// Postselected momentum spread `Δp'`.
    pub sd_p: f64,
    /// Postselected position spread `Δq'`.
    pub sd_q: f64,
}

/// Unnormalized numerators of the postselected moments, before dividing by `P`.
/// Each is real in exact arithmetic; the imaginary parts are rounding residue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSums {
    /// `P = Σ γ_m γ_n* E_mn`.
    pub probability: Complex64,
    /// `P ⟨p'⟩`.
    pub p_mean: Complex64,
    /// `P ⟨q'⟩`.
    pub q_mean: Complex64,
    /// `P (⟨p'²⟩ - 1/(4Δ²))`.
    pub p_square: Complex64,
    /// `P (⟨q'²⟩ - Δ²)`.
    pub q_square: Complex64,
}

impl MomentSums {
    pub fn max_imaginary_residue(&self) -> f64 {
        [
            self.probability,
            self.p_mean,
            self.q_mean,
            self.p_square,
            self.q_square,
        ]
        .iter()
        .fold(0.0, |acc, z| acc.max(z.im.abs()))
    }
}

/// `γ_m = α_m β_m*`.
pub fn gamma_weights(pps: &PpsPair) -> Vec<Complex64> {
    pps.alpha
        .iter()
        .zip(&pps.beta)
        .map(|(a, b)| a * b.conj())
        .collect()
}

fn check_dims(obs: &Observable, pps: &PpsPair) -> Result<()> {
    if obs.dim() != pps.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            got: pps.dim(),
        });
    }
    Ok(())
}

/// Folds a negative coupling into the observable sign.
fn canonical_coupling(obs: &Observable, g: f64) -> Result<(std::borrow::Cow<'_, Observable>, f64)> {
    if !g.is_finite() {
        return Err(Error::invalid("coupling g must be finite"));
    }
    if g < 0.0 {
        Ok((std::borrow::Cow::Owned(obs.negated()), -g))
    } else {
        Ok((std::borrow::Cow::Borrowed(obs), g))
    }
}

/// Full double sums for `P` and the four pointer moments.
pub fn moment_sums(
    obs: &Observable,
    pps: &PpsPair,
    pointer: &GaussianPointer,
    g: f64,
) -> Result<MomentSums> {
    check_dims(obs, pps)?;
    let (obs, g) = canonical_coupling(obs, g)?;
    let a = obs.eigenvalues();
    let gamma = gamma_weights(pps);
    let d2 = pointer.delta() * pointer.delta();

    let mut norm = CompensatedSum::default();
    let mut p1 = CompensatedSum::default();
    let mut q1 = CompensatedSum::default();
    let mut p2 = CompensatedSum::default();
    let mut q2 = CompensatedSum::default();
    for (m, gm) in gamma.iter().enumerate() {
        for (n, gn) in gamma.iter().enumerate() {
            let diff = a[m] - a[n];
            let plus = a[m] + a[n];
            let w = gm * gn.conj() * (-0.5 * d2 * g * g * diff * diff).exp();
            norm.add(w);
            p1.add(w * plus);
            q1.add(w * diff);
            p2.add(w * (plus * plus));
            q2.add(w * (diff * diff));
        }
    }
    let i = Complex64::i();
    Ok(MomentSums {
        probability: norm.value(),
        p_mean: p1.value() * (0.5 * g),
        q_mean: q1.value() * (i * g * d2),
        p_square: p2.value() * (0.25 * g * g),
        q_square: q2.value() * (-g * g * d2 * d2),
    })
}

pub(crate) fn spread(second_moment: f64, mean: f64, what: &str) -> Result<f64> {
    let var = second_moment - mean * mean;
    if !var.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "{what} variance is not finite"
        )));
    }
    if var < -VARIANCE_CLAMP {
        return Err(Error::NumericalFailure(format!(
            "{what} variance {var:e} is negative"
        )));
    }
    Ok(var.max(0.0).sqrt())
}

/// Exact postselected readout at coupling `g`.
pub fn postselect_readout(
    obs: &Observable,
    pps: &PpsPair,
    pointer: &GaussianPointer,
    g: f64,
) -> Result<Readout> {
    let sums = moment_sums(obs, pps, pointer, g)?;
    let p = sums.probability.re;
    if !p.is_finite() {
        return Err(Error::NumericalFailure(
            "postselection probability is not finite".into(),
        ));
    }
    if p <= PROBABILITY_FLOOR {
        return Err(Error::VanishingPostselection { probability: p });
    }
    let dp = sums.p_mean.re / p;
    let dq = sums.q_mean.re / p;
    let d = pointer.delta();
    let sd_p = spread(sums.p_square.re / p + 0.25 / (d * d), dp, "momentum")?;
    let sd_q = spread(sums.q_square.re / p + d * d, dq, "position")?;
    if !(dp.is_finite() && dq.is_finite()) {
        return Err(Error::NumericalFailure(
            "pointer shift is not finite".into(),
        ));
    }
    Ok(Readout {
        probability: p.min(1.0),
        dp,
        dq,
        sd_p,
        sd_q,
    })
}

/// `A_w = ⟨ψ_f|A|ψ_i⟩ / ⟨ψ_f|ψ_i⟩`.
pub fn weak_value(obs: &Observable, pps: &PpsPair) -> Result<Complex64> {
    check_dims(obs, pps)?;
    let gamma = gamma_weights(pps);
    let overlap = csum(gamma.iter().copied());
    if overlap.norm() <= PROBABILITY_FLOOR {
        return Err(Error::OrthogonalPps);
    }
    let numerator = csum(gamma.iter().zip(obs.eigenvalues()).map(|(gm, a)| gm * a));
    Ok(numerator / overlap)
}

/// First-order (AAV/Jozsa) shifts `(g Re A_w, -2 g Δ² Im A_w)`.
pub fn weak_limit_readout(
    obs: &Observable,
    pps: &PpsPair,
    pointer: &GaussianPointer,
    g: f64,
) -> Result<(f64, f64)> {
    let aw = weak_value(obs, pps)?;
    let d = pointer.delta();
    Ok((g * aw.re, -2.0 * g * d * d * aw.im))
}

/// Size of the dropped higher-order terms of the weak expansion,
/// `|(gΔ)^n ⟨ψ_f|A^n|ψ_i⟩| / |⟨ψ_f|ψ_i⟩|` for `n = 2..=n_max`.
///
/// The pointer coordinate is evaluated at one standard deviation, `q = Δ`.
pub fn weak_validity_margin(
    obs: &Observable,
    pps: &PpsPair,
    pointer: &GaussianPointer,
    g: f64,
    n_max: u32,
) -> Result<Vec<f64>> {
    check_dims(obs, pps)?;
    if n_max < 2 {
        return Err(Error::invalid("n_max must be at least 2"));
    }
    if !g.is_finite() {
        return Err(Error::invalid("coupling g must be finite"));
    }
    let gamma = gamma_weights(pps);
    let overlap = csum(gamma.iter().copied()).norm();
    if overlap <= PROBABILITY_FLOOR {
        return Err(Error::OrthogonalPps);
    }
    let x = (g * pointer.delta()).abs();
    Ok((2..=n_max)
        .map(|n| {
            let moment = csum(
                gamma
                    .iter()
                    .zip(obs.eigenvalues())
                    .map(|(gm, a)| gm * a.powi(n as i32)),
            );
            x.powi(n as i32) * moment.norm() / overlap
        })
        .collect())
}

/// Strong-coupling limit of `δp'`: interference between distinct eigenvalues
/// is suppressed and only degenerate classes add coherently.
pub fn strong_limit_shift(obs: &Observable, pps: &PpsPair, g: f64) -> Result<f64> {
    check_dims(obs, pps)?;
    let gamma = gamma_weights(pps);
    let a = obs.eigenvalues();
    let mut num = 0.0;
    let mut den = 0.0;
    for class in obs.degenerate_classes() {
        let weight = csum(class.iter().map(|&k| gamma[k])).norm_sqr();
        let value = class.iter().map(|&k| a[k]).sum::<f64>() / class.len() as f64;
        num += weight * value;
        den += weight;
    }
    if den <= PROBABILITY_FLOOR {
        return Err(Error::VanishingPostselection { probability: den });
    }
    Ok(g * num / den)
}

/// Momentum shift without postselection, `g Σ |α_m|² a_m`.
pub fn no_postselect_shift(obs: &Observable, psi_i: &[Complex64], g: f64) -> Result<f64> {
    if psi_i.len() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            got: psi_i.len(),
        });
    }
    let n = norm_sqr(psi_i);
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::invalid(format!(
            "preselected state has squared norm {n}"
        )));
    }
    Ok(g * crate::sum::rsum(
        psi_i
            .iter()
            .zip(obs.eigenvalues())
            .map(|(z, a)| z.norm_sqr() * a),
    ))
}
