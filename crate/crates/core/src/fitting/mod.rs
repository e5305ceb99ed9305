//! Weighted least-squares fits of the noise model to the measured tables.
//!
//! SNR fits work in dB, rate fits in natural-log space with
//! `σ_ln = σ_y / y`. Abscissa errors are not used in the weights.
//! Residuals are always `data − model` in the fit space.

mod datasets;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use datasets::{
    load_dataset, DataPoint, Dataset, FidelityRow, DATASET_NAMES, FIDELITY_TABLE, MIN_POINTS,
    PUMP_SERIES,
};

use crate::analytic::{snr_of_r, to_db};
use crate::error::{invalid, Result};
use crate::fidelity::fidelity_from_snr;
use crate::optimize::{minimize_scan, weighted_line, weighted_mean};

/// Pump-power exponent of CC_g when R is held fixed: |κ|² ∝ P and |α|² ∝ |κ|.
pub const PUMP_EXPONENT: f64 = 1.5;

/// Smallest signal transmissivity considered by the SNR-vs-R fit.
pub const T2_EFF_MIN: f64 = 0.02;
const LN_KAPPA_RANGE: (f64, f64) = (-6.907_755_278_982_137, 6.907_755_278_982_137); // ln 1e∓3

/// Space in which residuals and model values of a fit are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitSpace {
    /// Data as given, e.g. SNR in dB or fidelity.
    Linear,
    /// Natural log of the data, errors `σ_y / y`.
    Ln,
}

impl FitSpace {
    /// Maps a fit-space value back to data units.
    pub fn to_data(self, v: f64) -> f64 {
        match self {
            FitSpace::Linear => v,
            FitSpace::Ln => v.exp(),
        }
    }

    /// Error bars of `data` in this space.
    pub fn errors(self, data: &Dataset) -> Vec<f64> {
        match self {
            FitSpace::Linear => data.y_errs(),
            FitSpace::Ln => data.points.iter().map(|p| p.y_err / p.y).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub dataset: String,
    pub model: String,
    pub params: BTreeMap<String, f64>,
    /// One-sigma spread per parameter (curvature or regression based).
    pub param_errors: BTreeMap<String, f64>,
    pub residuals: Vec<f64>,
    /// Model evaluated at each data abscissa, in the fit space.
    pub model_values: Vec<f64>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub n_expansion: Option<u32>,
    pub converged: bool,
    pub fit_space: FitSpace,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Residuals divided by their error bars.
    pub fn pulls(&self, y_errs: &[f64]) -> Vec<f64> {
        self.residuals
            .iter()
            .zip(y_errs)
            .map(|(r, s)| r / s)
            .collect()
    }
}

/// `Σ (rᵢ / σᵢ)²`.
pub fn chi2(residuals: &[f64], y_errs: &[f64]) -> Result<f64> {
    if residuals.len() != y_errs.len() {
        return Err(invalid("residuals and errors differ in length"));
    }
    let mut sum = 0.0;
    for (r, s) in residuals.iter().zip(y_errs) {
        if !(*s > 0.0) {
            return Err(invalid(format!("error bar {s} must be positive")));
        }
        sum += (r / s).powi(2);
    }
    Ok(sum)
}

fn reduced(chi2: f64, n: usize, n_params: usize) -> f64 {
    let dof = n.saturating_sub(n_params).max(1);
    chi2 / dof as f64
}

/// SNR in dB predicted at ratio `r` by the truncated model.
pub fn snr_db_at_r(r: f64, kappa_eff: f64, t2_eff: f64, n_terms: u32) -> Result<f64> {
    Ok(to_db(snr_of_r(
        r,
        Complex64::new(kappa_eff, 0.0),
        t2_eff,
        n_terms,
    )?))
}

/// SNR-vs-R fit for expansion order `n_terms`.
///
/// For N = 2 the model is `2√(2R)/(κ(R+1))` with the single free `kappa_eff`.
/// For N ≥ 3 the higher coherent terms make the shape depend on |κ|t2², so
/// `t2_eff` is fitted as well, restricted to the physical range
/// `[T2_EFF_MIN, 1]`; `kappa_eff` is profiled out for every trial `t2_eff`.
pub fn fit_snr_vs_r(data: &Dataset, n_terms: u32) -> Result<FitResult> {
    if !(2..=5).contains(&n_terms) {
        return Err(invalid(format!("n_terms = {n_terms} not in 2..=5")));
    }
    data.validate()?;
    if data.points.iter().any(|p| !(p.x > 0.0)) {
        return Err(invalid("R values must be positive"));
    }
    let sig = data.y_errs();
    let chi2_at = |ln_kappa: f64, t2: f64| -> f64 {
        let mut sum = 0.0;
        for (p, s) in data.points.iter().zip(&sig) {
            match snr_db_at_r(p.x, ln_kappa.exp(), t2, n_terms) {
                Ok(m) if m.is_finite() => sum += ((p.y - m) / s).powi(2),
                _ => return f64::INFINITY,
            }
        }
        sum
    };
    let profile = |t2: f64| {
        minimize_scan(
            |lk| chi2_at(lk, t2),
            LN_KAPPA_RANGE.0,
            LN_KAPPA_RANGE.1,
            121,
            1e-11,
            400,
        )
    };

    let (t2, inner, outer_converged) = if n_terms == 2 {
        (1.0, profile(1.0), true)
    } else {
        let outer = minimize_scan(|t2| profile(t2).value, T2_EFF_MIN, 1.0, 25, 1e-9, 200);
        (outer.x, profile(outer.x), outer.converged || outer.x == 1.0)
    };

    let kappa = inner.x.exp();
    let h = 1e-4;
    let curv = (chi2_at(inner.x + h, t2) - 2.0 * inner.value + chi2_at(inner.x - h, t2)) / (h * h);
    let kappa_err = if curv > 0.0 {
        kappa * (2.0 / curv).sqrt()
    } else {
        f64::NAN
    };

    let model_values = data
        .points
        .iter()
        .map(|p| snr_db_at_r(p.x, kappa, t2, n_terms))
        .collect::<Result<Vec<_>>>()?;
    let residuals: Vec<f64> = data
        .points
        .iter()
        .zip(&model_values)
        .map(|(p, m)| p.y - m)
        .collect();
    let chi = chi2(&residuals, &sig)?;
    let n_params = if n_terms == 2 { 1 } else { 2 };

    let mut params = BTreeMap::from([("kappa_eff".to_string(), kappa)]);
    let param_errors = BTreeMap::from([("kappa_eff".to_string(), kappa_err)]);
    if n_terms > 2 {
        params.insert("t2_eff".into(), t2);
    }
    Ok(FitResult {
        dataset: data.name.clone(),
        model: format!("snr_db(R) truncated coherent expansion N={n_terms}"),
        params,
        param_errors,
        residuals,
        model_values,
        chi2: chi,
        reduced_chi2: reduced(chi, data.len(), n_params),
        n_expansion: Some(n_terms),
        converged: inner.converged && outer_converged && chi.is_finite(),
        fit_space: FitSpace::Linear,
    })
}

/// SNR in dB from the cube-root law, `(10/3)·log10(C / CC_g)`.
pub fn snr_db_from_ccg(c: f64, cc_g: f64) -> f64 {
    10.0 / 3.0 * (c / cc_g).log10()
}

/// Fits the constant `C` of the cube-root law to (CC_g, SNR dB) data.
/// The log-log slope is fixed at −1/3; only the offset is free.
pub fn fit_snr_vs_ccg(data: &Dataset) -> Result<FitResult> {
    data.validate()?;
    if data.points.iter().any(|p| !(p.x > 0.0)) {
        return Err(invalid("CC_g values must be positive"));
    }
    let sig = data.y_errs();
    let shifted: Vec<f64> = data
        .points
        .iter()
        .map(|p| p.y + 10.0 / 3.0 * p.x.log10())
        .collect();
    let (offset, offset_err) = weighted_mean(&shifted, &sig)?;
    let c = 10f64.powf(0.3 * offset);
    let model_values: Vec<f64> = data
        .points
        .iter()
        .map(|p| snr_db_from_ccg(c, p.x))
        .collect();
    let residuals: Vec<f64> = data
        .points
        .iter()
        .zip(&model_values)
        .map(|(p, m)| p.y - m)
        .collect();
    let chi = chi2(&residuals, &sig)?;
    Ok(FitResult {
        dataset: data.name.clone(),
        model: "snr_db = (10/3) log10(C / CC_g)".into(),
        params: BTreeMap::from([("c".into(), c), ("offset_db".into(), offset)]),
        param_errors: BTreeMap::from([
            ("c".into(), c * 0.3 * std::f64::consts::LN_10 * offset_err),
            ("offset_db".into(), offset_err),
        ]),
        residuals,
        model_values,
        chi2: chi,
        reduced_chi2: reduced(chi, data.len(), 1),
        n_expansion: None,
        converged: chi.is_finite(),
        fit_space: FitSpace::Linear,
    })
}

/// Exponent handling for power-law rate fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    Free,
    Fixed(f64),
}

struct PowerLaw {
    ln_coef: f64,
    ln_coef_err: f64,
    exponent: f64,
    exponent_err: f64,
    residuals: Vec<f64>,
    model_values: Vec<f64>,
    chi2: f64,
    reduced_chi2: f64,
}

/// `y = c · x^k` fitted as a line in log-log space.
fn power_law(data: &Dataset, exponent: Exponent) -> Result<PowerLaw> {
    data.validate()?;
    if data.points.iter().any(|p| !(p.x > 0.0 && p.y > 0.0)) {
        return Err(invalid("power-law fits need positive x and y"));
    }
    let lx: Vec<f64> = data.points.iter().map(|p| p.x.ln()).collect();
    let ly: Vec<f64> = data.points.iter().map(|p| p.y.ln()).collect();
    let sig: Vec<f64> = data.points.iter().map(|p| p.y_err / p.y).collect();
    let (ln_coef, ln_coef_err, k, k_err, n_params) = match exponent {
        Exponent::Free => {
            let line = weighted_line(&lx, &ly, &sig)?;
            (
                line.intercept,
                line.intercept_err,
                line.slope,
                line.slope_err,
                2,
            )
        }
        Exponent::Fixed(k) => {
            let shifted: Vec<f64> = ly.iter().zip(&lx).map(|(y, x)| y - k * x).collect();
            let (m, e) = weighted_mean(&shifted, &sig)?;
            (m, e, k, 0.0, 1)
        }
    };
    let model_values: Vec<f64> = lx.iter().map(|x| ln_coef + k * x).collect();
    let residuals: Vec<f64> = ly.iter().zip(&model_values).map(|(y, m)| y - m).collect();
    let chi = chi2(&residuals, &sig)?;
    let red = reduced(chi, data.len(), n_params);
    // Residual-based spread: formal errors scaled by the observed scatter.
    let scatter = red.sqrt();
    Ok(PowerLaw {
        ln_coef,
        ln_coef_err: ln_coef_err * scatter,
        exponent: k,
        exponent_err: k_err * scatter,
        residuals,
        model_values,
        chi2: chi,
        reduced_chi2: red,
    })
}

/// CC_g against pump power as `c · P^k`.
pub fn fit_ccg_vs_pump(data: &Dataset, exponent: Exponent) -> Result<FitResult> {
    let fit = power_law(data, exponent)?;
    let coef = fit.ln_coef.exp();
    Ok(FitResult {
        dataset: data.name.clone(),
        model: match exponent {
            Exponent::Free => "ln CC_g = ln c + k ln P_p (k free)".into(),
            Exponent::Fixed(k) => format!("ln CC_g = ln c + {k} ln P_p"),
        },
        params: BTreeMap::from([
            ("coefficient".into(), coef),
            ("exponent".into(), fit.exponent),
        ]),
        param_errors: BTreeMap::from([
            ("coefficient".into(), coef * fit.ln_coef_err),
            ("exponent".into(), fit.exponent_err),
        ]),
        residuals: fit.residuals,
        model_values: fit.model_values,
        chi2: fit.chi2,
        reduced_chi2: fit.reduced_chi2,
        n_expansion: None,
        converged: fit.chi2.is_finite(),
        fit_space: FitSpace::Ln,
    })
}

/// Which coupling the attenuation factor acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttenuatedMode {
    /// CC_g ∝ 1/A1.
    Idler,
    /// CC_g ∝ 1/A2² at constant R.
    Signal,
}

impl AttenuatedMode {
    pub fn model_exponent(self) -> f64 {
        match self {
            AttenuatedMode::Idler => -1.0,
            AttenuatedMode::Signal => -2.0,
        }
    }
}

/// CC_g against an attenuation factor with the model exponent (−1 or −2);
/// the free-exponent variant is reported alongside as `free_exponent` and
/// `free_coefficient`.
pub fn fit_ccg_vs_attenuation(data: &Dataset, mode: AttenuatedMode) -> Result<FitResult> {
    if data.points.iter().any(|p| p.x < 1.0) {
        return Err(invalid("attenuation factors must be >= 1"));
    }
    let fixed = power_law(data, Exponent::Fixed(mode.model_exponent()))?;
    let free = power_law(data, Exponent::Free)?;
    let c = fixed.ln_coef.exp();
    let free_c = free.ln_coef.exp();
    Ok(FitResult {
        dataset: data.name.clone(),
        model: format!("CC_g = c · A^{}", mode.model_exponent()),
        params: BTreeMap::from([
            ("c".into(), c),
            ("exponent".into(), mode.model_exponent()),
            ("free_coefficient".into(), free_c),
            ("free_exponent".into(), free.exponent),
            ("free_reduced_chi2".into(), free.reduced_chi2),
        ]),
        param_errors: BTreeMap::from([
            ("c".into(), c * fixed.ln_coef_err),
            ("free_coefficient".into(), free_c * free.ln_coef_err),
            ("free_exponent".into(), free.exponent_err),
        ]),
        residuals: fixed.residuals,
        model_values: fixed.model_values,
        chi2: fixed.chi2,
        reduced_chi2: fixed.reduced_chi2,
        n_expansion: None,
        converged: fixed.chi2.is_finite() && free.chi2.is_finite(),
        fit_space: FitSpace::Ln,
    })
}

/// Compares tabulated fidelities with `(SNR+½)/(SNR+1)`; no free parameters.
pub fn evaluate_fidelity_table(data: &Dataset) -> Result<FitResult> {
    data.validate()?;
    let model_values: Vec<f64> = data
        .points
        .iter()
        .map(|p| fidelity_from_snr(crate::analytic::from_db(p.x)))
        .collect();
    let residuals: Vec<f64> = data
        .points
        .iter()
        .zip(&model_values)
        .map(|(p, m)| p.y - m)
        .collect();
    let chi = chi2(&residuals, &data.y_errs())?;
    Ok(FitResult {
        dataset: data.name.clone(),
        model: "F = (SNR + 1/2) / (SNR + 1)".into(),
        params: BTreeMap::new(),
        param_errors: BTreeMap::new(),
        residuals,
        model_values,
        chi2: chi,
        reduced_chi2: reduced(chi, data.len(), 0),
        n_expansion: None,
        converged: chi.is_finite(),
        fit_space: FitSpace::Linear,
    })
}

/// Options for [`fit_named`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub n_terms: u32,
    /// Pump fit: free exponent instead of 3/2.
    pub free_exponent: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_terms: 3,
            free_exponent: false,
        }
    }
}

/// Loads an embedded table and runs its matching fit.
pub fn fit_named(name: &str, opts: FitOptions) -> Result<(Dataset, FitResult)> {
    let data = load_dataset(name)?;
    let fit = fit_dataset(&data, name, opts)?;
    Ok((data, fit))
}

/// Runs the fit that belongs to a dataset kind on arbitrary data.
pub fn fit_dataset(data: &Dataset, kind: &str, opts: FitOptions) -> Result<FitResult> {
    match kind {
        "snr_vs_r" => fit_snr_vs_r(data, opts.n_terms),
        "snr_vs_ccg" => fit_snr_vs_ccg(data),
        "ccg_vs_pump" => fit_ccg_vs_pump(
            data,
            if opts.free_exponent {
                Exponent::Free
            } else {
                Exponent::Fixed(PUMP_EXPONENT)
            },
        ),
        "ccg_vs_a1" => fit_ccg_vs_attenuation(data, AttenuatedMode::Idler),
        "ccg_vs_a2" => fit_ccg_vs_attenuation(data, AttenuatedMode::Signal),
        "fidelity_vs_snr" => evaluate_fidelity_table(data),
        other => Err(crate::error::Error::NotFound(format!(
            "no fit for dataset kind '{other}'"
        ))),
    }
}
