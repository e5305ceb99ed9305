//! Three-step shutter measurement and attenuation-factor experiments.
//!
//! Step (i) both shutters open gives `CC_a`; step (ii) with the laser shutter
//! S3 closed gives `CC_s`; step (iii) with the signal shutter S2 closed and S3
//! open gives `CC_f`. `CC_g` is what remains after subtracting the two
//! parasitic rates. The idler herald is implicit in every step and dark counts
//! are not modeled, so a configuration without real photons yields exactly
//! zero coincidences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::analytic::{
    alpha_from_r, cc_fundamental_parasitic, cc_genuine, cc_signal_parasitic, ratio_r, to_db,
    CoincidenceRates, SourceParams,
};
use crate::error::{invalid, Result};
use crate::fock::{simulate_configuration, threefold_coincidence_prob, ShutterConfig};

/// Laser repetition rate (12.5 ns period).
pub const DEFAULT_REP_RATE_HZ: f64 = 80e6;
/// Duration of one acquisition step.
pub const DEFAULT_DURATION_S: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Analytic,
    Oracle,
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::Analytic => "analytic",
            Engine::Oracle => "oracle",
        })
    }
}

/// Timing of one acquisition step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub rep_rate_hz: f64,
    pub duration_s: f64,
}

impl Default for Acquisition {
    fn default() -> Self {
        Self {
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            duration_s: DEFAULT_DURATION_S,
        }
    }
}

impl Acquisition {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite()) {
            return Err(invalid(format!(
                "repetition rate {} must be positive",
                self.rep_rate_hz
            )));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid(format!(
                "duration {} must be positive",
                self.duration_s
            )));
        }
        Ok(())
    }

    pub fn pulses(&self) -> f64 {
        self.rep_rate_hz * self.duration_s
    }
}

/// Outcome of the three-step procedure.
///
/// In exact mode the rates are per-pulse probabilities times the source
/// `scale`; in sampled mode they are Poisson-drawn counts per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeStepResult {
    pub cc_a: f64,
    pub cc_s: f64,
    pub cc_f: f64,
    pub cc_g: f64,
    pub engine: Engine,
    pub duration_s: f64,
    pub laser_rep_rate_hz: f64,
    pub sampled: bool,
    /// Set when subtraction of sampled counts produced `cc_g < 0`.
    pub negative_genuine: bool,
}

/// Flat JSON record emitted per three-step run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeStepRecord {
    pub cc_a: f64,
    pub cc_s: f64,
    pub cc_f: f64,
    pub cc_g: f64,
    pub engine: Engine,
    pub snr_db: Option<f64>,
}

impl ThreeStepResult {
    pub fn rates(&self) -> CoincidenceRates {
        CoincidenceRates {
            cc_g: self.cc_g,
            cc_s: self.cc_s,
            cc_f: self.cc_f,
            cc_a: self.cc_a,
        }
    }

    pub fn snr(&self) -> Option<f64> {
        let noise = self.cc_s + self.cc_f;
        (noise > 0.0).then(|| self.cc_g / noise)
    }

    pub fn snr_db(&self) -> Option<f64> {
        self.snr().filter(|s| *s > 0.0).map(to_db)
    }

    /// Ratio `cc_f / cc_s`, if defined.
    pub fn ratio_r(&self) -> Option<f64> {
        (self.cc_s > 0.0).then(|| self.cc_f / self.cc_s)
    }

    pub fn record(&self) -> ThreeStepRecord {
        ThreeStepRecord {
            cc_a: self.cc_a,
            cc_s: self.cc_s,
            cc_f: self.cc_f,
            cc_g: self.cc_g,
            engine: self.engine,
            snr_db: self.snr_db(),
        }
    }
}

/// Per-pulse (scaled) rates of steps (i) to (iii): `(cc_a, cc_s, cc_f)`.
fn step_rates(p: &SourceParams, engine: Engine) -> Result<(f64, f64, f64)> {
    p.validate()?;
    match engine {
        Engine::Analytic => {
            let g = cc_genuine(p);
            let s = cc_signal_parasitic(p);
            let f = cc_fundamental_parasitic(p);
            Ok((g + s + f, s, f))
        }
        Engine::Oracle => {
            let step = |cfg| -> Result<f64> {
                Ok(p.scale * threefold_coincidence_prob(&simulate_configuration(p, cfg)?))
            };
            Ok((
                step(ShutterConfig::BOTH_OPEN)?,
                step(ShutterConfig::LASER_BLOCKED)?,
                step(ShutterConfig::SIGNAL_BLOCKED)?,
            ))
        }
    }
}

/// Exact three-step run with default acquisition metadata.
pub fn run_three_step(p: &SourceParams, engine: Engine) -> Result<ThreeStepResult> {
    run_three_step_with(p, engine, Acquisition::default())
}

pub fn run_three_step_with(
    p: &SourceParams,
    engine: Engine,
    acq: Acquisition,
) -> Result<ThreeStepResult> {
    acq.validate()?;
    let (cc_a, cc_s, cc_f) = step_rates(p, engine)?;
    let cc_g = match engine {
        // keeps cc_a == cc_g + cc_s + cc_f bit-exact
        Engine::Analytic => cc_genuine(p),
        Engine::Oracle => cc_a - cc_s - cc_f,
    };
    Ok(ThreeStepResult {
        cc_a,
        cc_s,
        cc_f,
        cc_g,
        engine,
        duration_s: acq.duration_s,
        laser_rep_rate_hz: acq.rep_rate_hz,
        sampled: false,
        negative_genuine: false,
    })
}

/// Three-step run with Poisson-distributed counts per step.
///
/// Expected counts are `rate · rep_rate · duration`; the draws come from a
/// ChaCha stream seeded by `seed`, so equal inputs give equal counts.
pub fn run_three_step_sampled(
    p: &SourceParams,
    engine: Engine,
    acq: Acquisition,
    seed: u64,
) -> Result<ThreeStepResult> {
    acq.validate()?;
    let (a, s, f) = step_rates(p, engine)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rate: f64| -> Result<f64> {
        let mean = counts_from_probability(rate, acq.rep_rate_hz, acq.duration_s)?;
        poisson_draw(mean, &mut rng)
    };
    let cc_a = draw(a)?;
    let cc_s = draw(s)?;
    let cc_f = draw(f)?;
    let cc_g = cc_a - cc_s - cc_f;
    Ok(ThreeStepResult {
        cc_a,
        cc_s,
        cc_f,
        cc_g,
        engine,
        duration_s: acq.duration_s,
        laser_rep_rate_hz: acq.rep_rate_hz,
        sampled: true,
        negative_genuine: cc_g < 0.0,
    })
}

pub(crate) fn poisson_draw(mean: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if mean == 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(mean).map_err(|e| invalid(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Expected counts `prob · rep_rate · duration`.
pub fn counts_from_probability(
    prob_per_pulse: f64,
    rep_rate_hz: f64,
    duration_s: f64,
) -> Result<f64> {
    if !(prob_per_pulse >= 0.0 && rep_rate_hz >= 0.0 && duration_s >= 0.0) {
        return Err(invalid(
            "counts need non-negative probability, rate and duration",
        ));
    }
    Ok(prob_per_pulse * rep_rate_hz * duration_s)
}

/// Intensity attenuation factors: `t_j² → t_j² / A_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationSetting {
    /// Idler mode factor.
    pub a1: f64,
    /// Signal mode factor.
    pub a2: f64,
}

impl AttenuationSetting {
    pub const NONE: Self = Self { a1: 1.0, a2: 1.0 };

    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        let a = Self { a1, a2 };
        a.validate()?;
        Ok(a)
    }

    pub fn idler(a1: f64) -> Result<Self> {
        Self::new(a1, 1.0)
    }

    pub fn signal(a2: f64) -> Result<Self> {
        Self::new(1.0, a2)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("A1", self.a1), ("A2", self.a2)] {
            if !(a >= 1.0 && a.is_finite()) {
                return Err(invalid(format!("{name} = {a} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Applies attenuation to the coupling transmissivities.
///
/// With `hold_r`, |α| is re-solved so the ratio R is unchanged, as done by
/// readjusting the laser-mode filter when the signal mode is attenuated.
pub fn apply_attenuation(
    p: &SourceParams,
    a: AttenuationSetting,
    hold_r: bool,
) -> Result<SourceParams> {
    a.validate()?;
    p.validate()?;
    let mut out = *p;
    out.t1 = p.t1 / a.a1.sqrt();
    out.t2 = p.t2 / a.a2.sqrt();
    if hold_r && p.alpha_abs() > 0.0 {
        let r = ratio_r(p)?;
        let alpha = alpha_from_r(r, p.kappa, out.t2, p.n_terms)?;
        out = out.with_alpha_abs(alpha);
    }
    Ok(out)
}
