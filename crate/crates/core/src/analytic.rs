//! Closed-form photon-number noise model of the SPDC + attenuated-laser
//! three-photon source.
//!
//! Every rate is a per-pulse probability multiplied by [`SourceParams::scale`];
//! the model only fixes rates up to that constant. Only the magnitudes of the
//! complex amplitudes enter the formulas.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optimize::{bisect, minimize_scan};

/// |κ| above which the perturbative pair-source expansion is no longer trusted.
pub const KAPPA_VALIDITY_LIMIT: f64 = 0.3;
/// |α| above which the truncated coherent expansion is no longer trusted.
pub const ALPHA_VALIDITY_LIMIT: f64 = 0.5;

/// Physical knobs of the source and interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// SPDC gain.
    pub kappa: Complex64,
    /// Coherent amplitude of the attenuated laser mode, all losses included.
    pub alpha: Complex64,
    /// Amplitude transmissivity of the idler coupling.
    pub t1: f64,
    /// Amplitude transmissivity of the signal coupling.
    pub t2: f64,
    /// Highest Fock term kept in the coherent-state expansion (N ≥ 2).
    pub n_terms: u32,
    /// Maps per-pulse probabilities onto rates.
    pub scale: f64,
    /// Per-mode Fock cutoff used by the oracle.
    pub cutoff: usize,
}

impl SourceParams {
    pub const DEFAULT_N_TERMS: u32 = 3;
    pub const DEFAULT_CUTOFF: usize = 4;

    pub fn new(kappa: Complex64, alpha: Complex64, t1: f64, t2: f64) -> Self {
        Self {
            kappa,
            alpha,
            t1,
            t2,
            n_terms: Self::DEFAULT_N_TERMS,
            scale: 1.0,
            cutoff: Self::DEFAULT_CUTOFF,
        }
    }

    /// Real, non-negative amplitudes.
    pub fn real(kappa: f64, alpha: f64, t1: f64, t2: f64) -> Self {
        Self::new(
            Complex64::new(kappa, 0.0),
            Complex64::new(alpha, 0.0),
            t1,
            t2,
        )
    }

    pub fn with_n_terms(mut self, n_terms: u32) -> Self {
        self.n_terms = n_terms;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// Replaces |α| and keeps its phase.
    pub fn with_alpha_abs(mut self, alpha_abs: f64) -> Self {
        let phase = self.alpha.arg();
        self.alpha = Complex64::from_polar(alpha_abs, phase);
        self
    }

    pub fn with_kappa_abs(mut self, kappa_abs: f64) -> Self {
        let phase = self.kappa.arg();
        self.kappa = Complex64::from_polar(kappa_abs, phase);
        self
    }

    pub fn kappa_abs(&self) -> f64 {
        self.kappa.norm()
    }

    pub fn alpha_abs(&self) -> f64 {
        self.alpha.norm()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t1", self.t1), ("t2", self.t2)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid(format!("{name} = {t} outside [0, 1]")));
            }
        }
        if self.n_terms < 2 {
            return Err(invalid(format!("n_terms = {} < 2", self.n_terms)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid(format!("scale = {} must be positive", self.scale)));
        }
        if self.cutoff < 2 {
            return Err(invalid(format!("cutoff = {} < 2", self.cutoff)));
        }
        if !(self.kappa.norm().is_finite() && self.alpha.norm().is_finite()) {
            return Err(invalid("non-finite amplitude"));
        }
        Ok(())
    }

    /// False once |κ| or |α| leave the perturbative regime.
    pub fn is_perturbative(&self) -> bool {
        self.kappa_abs() <= KAPPA_VALIDITY_LIMIT && self.alpha_abs() <= ALPHA_VALIDITY_LIMIT
    }
}

/// Genuine and parasitic threefold coincidence rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRates {
    pub cc_g: f64,
    pub cc_s: f64,
    pub cc_f: f64,
    /// Total with both shutters open, `cc_g + cc_s + cc_f`.
    pub cc_a: f64,
}

impl CoincidenceRates {
    pub fn new(cc_g: f64, cc_s: f64, cc_f: f64) -> Self {
        Self {
            cc_g,
            cc_s,
            cc_f,
            cc_a: cc_g + cc_s + cc_f,
        }
    }

    pub fn from_params(p: &SourceParams) -> Result<Self> {
        p.validate()?;
        Ok(Self::new(
            cc_genuine(p),
            cc_signal_parasitic(p),
            cc_fundamental_parasitic(p),
        ))
    }

    pub fn noise(&self) -> f64 {
        self.cc_s + self.cc_f
    }

    /// Linear SNR `cc_g / (cc_s + cc_f)`.
    pub fn snr(&self) -> Result<f64> {
        let noise = self.noise();
        if noise <= 0.0 {
            return Err(Error::UndefinedSnr("no parasitic coincidences".into()));
        }
        Ok(self.cc_g / noise)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.cc_g * factor, self.cc_s * factor, self.cc_f * factor)
    }
}

/// `Σ_{n=2}^{N} x^n / n!` with `x = |α|²`.
pub fn fundamental_series(alpha_sq: f64, n_terms: u32) -> f64 {
    let mut term = alpha_sq; // x^1 / 1!
    let mut sum = 0.0;
    for n in 2..=n_terms {
        term *= alpha_sq / n as f64;
        sum += term;
    }
    sum
}

/// Genuine coincidences, `scale·|κ|²|α|²t1²t2²`.
pub fn cc_genuine(p: &SourceParams) -> f64 {
    p.scale * p.kappa.norm_sqr() * p.alpha.norm_sqr() * p.t1.powi(2) * p.t2.powi(2)
}

/// Double-pair signal-mode parasitics, `scale·t1²t2⁴|κ|⁴/4`.
pub fn cc_signal_parasitic(p: &SourceParams) -> f64 {
    p.scale * p.t1.powi(2) * p.t2.powi(4) * p.kappa.norm_sqr().powi(2) / 4.0
}

/// Multi-photon laser-mode parasitics, `scale·|κ|²t1²Σ_{n=2}^{N}|α|^{2n}/n!`.
pub fn cc_fundamental_parasitic(p: &SourceParams) -> f64 {
    p.scale * p.kappa.norm_sqr() * p.t1.powi(2) * fundamental_series(p.alpha.norm_sqr(), p.n_terms)
}

/// Linear signal-to-noise ratio `CC_g / (CC_s + CC_f)`.
pub fn snr(p: &SourceParams) -> Result<f64> {
    let noise = cc_signal_parasitic(p) + cc_fundamental_parasitic(p);
    if !(noise > 0.0) {
        return Err(Error::UndefinedSnr(
            "CC_s + CC_f vanishes (κ = 0 or t1 = 0)".into(),
        ));
    }
    Ok(cc_genuine(p) / noise)
}

/// Ratio `R = CC_f / CC_s`.
pub fn ratio_r(p: &SourceParams) -> Result<f64> {
    let cc_s = cc_signal_parasitic(p);
    if !(cc_s > 0.0) {
        return Err(Error::UndefinedRatio("CC_s vanishes".into()));
    }
    Ok(cc_fundamental_parasitic(p) / cc_s)
}

fn check_ratio_inputs(target_r: f64, kappa: Complex64, t2: f64) -> Result<()> {
    if !(target_r > 0.0 && target_r.is_finite()) {
        return Err(invalid(format!("target R = {target_r} must be positive")));
    }
    if !(0.0..=1.0).contains(&t2) {
        return Err(invalid(format!("t2 = {t2} outside [0, 1]")));
    }
    if kappa.norm() == 0.0 || t2 == 0.0 {
        return Err(Error::UndefinedRatio("κ = 0 or t2 = 0".into()));
    }
    Ok(())
}

/// The unique |α| at which `ratio_r` equals `target_r`.
///
/// Solves `Σ_{n=2}^{N} xⁿ/n! = R|κ|²t2⁴/4` for `x = |α|²`. The leading term
/// alone gives the upper bracket `x ≤ √(2·rhs)`.
pub fn alpha_from_r(target_r: f64, kappa: Complex64, t2: f64, n_terms: u32) -> Result<f64> {
    check_ratio_inputs(target_r, kappa, t2)?;
    if n_terms < 2 {
        return Err(invalid(format!("n_terms = {n_terms} < 2")));
    }
    let rhs = target_r * kappa.norm_sqr() * t2.powi(4) / 4.0;
    let leading = (2.0 * rhs).sqrt();
    if n_terms == 2 {
        return Ok(leading.sqrt());
    }
    // The series is convex and increasing, so Newton steps taken from the
    // upper bracket decrease monotonically onto the root.
    let mut x = leading;
    for _ in 0..100 {
        let excess = fundamental_series(x, n_terms) - rhs;
        if excess <= 0.0 {
            return Ok(x.sqrt());
        }
        let slope = x + fundamental_series(x, n_terms - 1);
        let step = excess / slope;
        x -= step;
        if step <= 1e-16 * x {
            return Ok(x.sqrt());
        }
    }
    let hi = leading * (1.0 + 1e-9);
    let x = bisect(|x| fundamental_series(x, n_terms) - rhs, 0.0, hi, 1e-16)?;
    Ok(x.sqrt())
}

/// SNR as a function of the ratio R.
///
/// Evaluated exactly for the truncated model: |α| is solved from R and the
/// rates are recomputed. For `n_terms = 2` this reproduces
/// `2√(2R) / (|κ|(R+1))`.
pub fn snr_of_r(target_r: f64, kappa: Complex64, t2: f64, n_terms: u32) -> Result<f64> {
    let alpha = alpha_from_r(target_r, kappa, t2, n_terms)?;
    let p = SourceParams::new(kappa, Complex64::new(alpha, 0.0), 1.0, t2).with_n_terms(n_terms);
    snr(&p)
}

/// Leading-order closed form `2√(2R) / (|κ|(R+1))`.
pub fn snr_of_r_leading(target_r: f64, kappa_abs: f64) -> f64 {
    2.0 * (2.0 * target_r).sqrt() / (kappa_abs * (target_r + 1.0))
}

/// Lower edge of the optimal-R search, in log10 R.
pub const LOG10_R_MIN: f64 = -4.0;
/// Upper edge of the optimal-R search, in log10 R (R = 100).
pub const LOG10_R_MAX: f64 = 2.0;

/// Ratio R that maximizes the SNR, with the maximum SNR.
pub fn optimal_r(kappa: Complex64, t2: f64, n_terms: u32) -> Result<(f64, f64)> {
    check_ratio_inputs(1.0, kappa, t2)?;
    if n_terms < 2 {
        return Err(invalid(format!("n_terms = {n_terms} < 2")));
    }
    let objective = |log_r: f64| match snr_of_r(10f64.powf(log_r), kappa, t2, n_terms) {
        Ok(v) => -v,
        Err(_) => f64::INFINITY,
    };
    let m = minimize_scan(objective, LOG10_R_MIN, LOG10_R_MAX, 61, 1e-10, 500);
    let r_opt = 10f64.powf(m.x);
    Ok((r_opt, -m.value))
}

/// Cube-root law `SNR = (16·t1²·t2⁴ / CC_g)^(1/3)` at R = 1.
///
/// `cc_g` must be in the same per-pulse units as [`cc_genuine`] with unit scale.
pub fn snr_from_ccg(cc_g: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(cc_g > 0.0 && cc_g.is_finite()) {
        return Err(invalid(format!("CC_g = {cc_g} must be positive")));
    }
    for (name, t) in [("t1", t1), ("t2", t2)] {
        if !(t > 0.0 && t <= 1.0) {
            return Err(invalid(format!("{name} = {t} outside (0, 1]")));
        }
    }
    Ok((16.0 * t1.powi(2) * t2.powi(4) / cc_g).cbrt())
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
