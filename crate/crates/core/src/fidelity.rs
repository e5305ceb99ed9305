//! Average teleportation fidelity under photon-number noise.
//!
//! A genuine event teleports perfectly (F = 1). Either kind of parasitic
//! event leaves the output uncorrelated with the input (F = 1/2). The average
//! is the event-probability weighted mean, which reduces to
//! `(SNR + 1/2) / (SNR + 1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{to_db, CoincidenceRates};
use crate::error::{invalid, Error, Result};
use crate::protocol::poisson_draw;

pub const F_GENUINE: f64 = 1.0;
pub const F_PARASITIC: f64 = 0.5;
/// Best fidelity reachable by measure-and-prepare.
pub const CLASSICAL_LIMIT: f64 = 2.0 / 3.0;
/// Optimal cloning threshold for secure teleportation.
pub const SECURE_THRESHOLD: f64 = 5.0 / 6.0;

/// Per-pulse probabilities of the three coincidence kinds, each `CC / (4f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventProbabilities {
    pub p_g: f64,
    pub p_s: f64,
    pub p_f: f64,
}

impl EventProbabilities {
    pub fn total(&self) -> f64 {
        self.p_g + self.p_s + self.p_f
    }

    pub fn snr(&self) -> Option<f64> {
        let noise = self.p_s + self.p_f;
        (noise > 0.0).then(|| self.p_g / noise)
    }
}

/// Converts rates in counts per second into event probabilities.
///
/// The factor 4 cancels in [`average_fidelity`].
pub fn event_probabilities(
    rates: &CoincidenceRates,
    rep_rate_hz: f64,
) -> Result<EventProbabilities> {
    if !(rep_rate_hz > 0.0 && rep_rate_hz.is_finite()) {
        return Err(invalid(format!(
            "repetition rate {rep_rate_hz} must be positive"
        )));
    }
    let norm = 4.0 * rep_rate_hz;
    Ok(EventProbabilities {
        p_g: rates.cc_g / norm,
        p_s: rates.cc_s / norm,
        p_f: rates.cc_f / norm,
    })
}

pub fn average_fidelity(p: &EventProbabilities) -> Result<f64> {
    let total = p.total();
    if !(total > 0.0) {
        return Err(Error::UndefinedFidelity("no coincidence events".into()));
    }
    Ok((p.p_g * F_GENUINE + p.p_s * F_PARASITIC + p.p_f * F_PARASITIC) / total)
}

/// `(SNR + 1/2) / (SNR + 1)` for a linear SNR.
pub fn fidelity_from_snr(snr: f64) -> f64 {
    (snr + 0.5) / (snr + 1.0)
}

/// `(classical, secure)` fidelity thresholds.
pub fn thresholds() -> (f64, f64) {
    (CLASSICAL_LIMIT, SECURE_THRESHOLD)
}

pub fn beats_classical(f: f64) -> bool {
    f > CLASSICAL_LIMIT
}

pub fn is_secure(f: f64) -> bool {
    f > SECURE_THRESHOLD
}

/// How the Monte-Carlo spread is summarized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    /// Smallest and largest fidelity over all trials.
    Envelope,
    /// Central interval holding the given fraction of trials.
    Central(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_trials: usize,
    pub seed: u64,
    pub interval: IntervalKind,
}

impl McConfig {
    pub const MIN_TRIALS: usize = 100;

    pub fn new(n_trials: usize, seed: u64) -> Self {
        Self {
            n_trials,
            seed,
            interval: IntervalKind::Envelope,
        }
    }

    pub fn central(mut self, fraction: f64) -> Self {
        self.interval = IntervalKind::Central(fraction);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    /// Mean fidelity over trials with at least one event.
    pub mean: f64,
    pub interval_low: f64,
    pub interval_high: f64,
    /// SNR of the expected counts.
    pub snr_db: f64,
    pub n_trials: usize,
    pub seed: u64,
    /// Trials with zero drawn events, where the fidelity is undefined.
    pub n_empty: usize,
    /// Fidelity of the expected counts themselves.
    pub expected: f64,
}

impl FidelityEstimate {
    /// CSV row `snr_db,f_mean,f_low,f_high`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.snr_db, self.mean, self.interval_low, self.interval_high
        )
    }
}

pub const CSV_HEADER: &str = "snr_db,f_mean,f_low,f_high";

/// splitmix64 finalizer, used to derive independent per-trial seeds.
fn sub_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fidelity spread from Poisson fluctuations of the detected coincidences.
///
/// `expected_counts` holds the mean number of each coincidence kind in one
/// acquisition. Each trial draws the three counts independently from its own
/// seeded stream, so results do not depend on thread scheduling.
pub fn mc_uncertainty(
    expected_counts: &CoincidenceRates,
    cfg: McConfig,
) -> Result<FidelityEstimate> {
    if cfg.n_trials < McConfig::MIN_TRIALS {
        return Err(invalid(format!(
            "n_trials = {} below the minimum of {}",
            cfg.n_trials,
            McConfig::MIN_TRIALS
        )));
    }
    if let IntervalKind::Central(frac) = cfg.interval {
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(invalid(format!("interval fraction {frac} outside (0, 1]")));
        }
    }
    let c = expected_counts;
    if !(c.cc_g >= 0.0 && c.cc_s >= 0.0 && c.cc_f >= 0.0) {
        return Err(invalid("expected counts must be non-negative"));
    }
    let expected = average_fidelity(&EventProbabilities {
        p_g: c.cc_g,
        p_s: c.cc_s,
        p_f: c.cc_f,
    })?;

    let draws: Vec<Option<f64>> = (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Option<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, trial));
            let p = EventProbabilities {
                p_g: poisson_draw(c.cc_g, &mut rng)?,
                p_s: poisson_draw(c.cc_s, &mut rng)?,
                p_f: poisson_draw(c.cc_f, &mut rng)?,
            };
            Ok(average_fidelity(&p).ok())
        })
        .collect::<Result<_>>()?;

    let mut values: Vec<f64> = draws.iter().flatten().copied().collect();
    let n_empty = cfg.n_trials - values.len();
    if values.is_empty() {
        return Err(Error::UndefinedFidelity(
            "every trial drew zero events".into(),
        ));
    }
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (low, high) = match cfg.interval {
        IntervalKind::Envelope => (values[0], values[values.len() - 1]),
        IntervalKind::Central(frac) => {
            let tail = (1.0 - frac) / 2.0;
            (quantile(&values, tail), quantile(&values, 1.0 - tail))
        }
    };
    let noise = c.cc_s + c.cc_f;
    let snr_db = if noise > 0.0 {
        to_db(c.cc_g / noise)
    } else {
        f64::INFINITY
    };
    Ok(FidelityEstimate {
        mean,
        interval_low: low.min(mean),
        interval_high: high.max(mean),
        snr_db,
        n_trials: cfg.n_trials,
        seed: cfg.seed,
        n_empty,
        expected,
    })
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Expected counts at a given linear SNR, splitting the noise as
/// `cc_f = R · cc_s`.
pub fn counts_at_snr(cc_g: f64, snr: f64, ratio_r: f64) -> Result<CoincidenceRates> {
    if !(cc_g >= 0.0 && snr > 0.0 && ratio_r >= 0.0) {
        return Err(invalid("counts need cc_g >= 0, snr > 0, R >= 0"));
    }
    let noise = cc_g / snr;
    let cc_s = noise / (1.0 + ratio_r);
    Ok(CoincidenceRates::new(cc_g, cc_s, noise - cc_s))
}
