//! Truncated Fock-space oracle for the three-mode source.
//!
//! Modes: 1 = idler (herald, detector D1), 2 = signal, 3 = attenuated laser.
//! Modes 2 and 3 meet on a 50:50 coupler whose outputs feed D2 and D3. The
//! photons are temporally displaced so they never interfere; each one is routed
//! to either output with probability 1/2.
//!
//! After loss the state is mixed, so everything downstream of state
//! preparation works on photon-number distributions (the diagonal of the
//! density matrix in the Fock basis). That is exact here because loss, routing
//! and threshold detection are all diagonal in the number basis.

use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::SourceParams;
use crate::error::{invalid, Error, Result};

/// Normalization slack allowed on truncated states.
pub const NORM_SLACK: f64 = 1e-9;

/// Single-mode pure state truncated at `cutoff` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeState {
    amplitudes: Array1<Complex64>,
    raw_norm: f64,
    leakage: f64,
}

impl SingleModeState {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(invalid("a single-mode state needs cutoff >= 1"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm > 1.0 + NORM_SLACK {
            return Err(invalid(format!("squared norm {norm} exceeds 1")));
        }
        Ok(Self {
            amplitudes: Array1::from(amplitudes),
            raw_norm: 1.0,
            leakage: 0.0,
        })
    }

    /// Single photon-number state |n⟩.
    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(invalid(format!("n = {n} above cutoff {cutoff}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); cutoff + 1];
        amps[n] = Complex64::new(1.0, 0.0);
        Self::from_amplitudes(amps)
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    /// Amplitude before renormalization over the truncated space.
    pub fn unnormalized(&self, n: usize) -> Complex64 {
        self.amplitudes[n] * self.raw_norm
    }

    /// Probability weight of the untruncated state lying above the cutoff.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn distribution(&self) -> NumberDistribution {
        NumberDistribution {
            probs: self.amplitudes.mapv(|a| a.norm_sqr()),
            leakage: self.leakage,
        }
    }
}

/// Two-mode pure state, amplitudes indexed by `(n1, n2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    amplitudes: Array2<Complex64>,
    raw_norm: f64,
    leakage: f64,
}

impl TwoModeState {
    pub fn cutoff(&self) -> usize {
        self.amplitudes.nrows() - 1
    }

    pub fn amplitudes(&self) -> &Array2<Complex64> {
        &self.amplitudes
    }

    pub fn unnormalized(&self, n1: usize, n2: usize) -> Complex64 {
        self.amplitudes[[n1, n2]] * self.raw_norm
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn distribution(&self) -> PairDistribution {
        PairDistribution {
            probs: self.amplitudes.mapv(|a| a.norm_sqr()),
            leakage: self.leakage,
        }
    }
}

/// Pair state with amplitude κⁿ/n! on |n,n⟩ for n ≤ cutoff, renormalized.
pub fn make_spdc_state(kappa: Complex64, cutoff: usize) -> Result<TwoModeState> {
    if cutoff < 2 {
        return Err(invalid(format!("SPDC cutoff {cutoff} < 2")));
    }
    let k = kappa.norm();
    if !(k < 1.0) {
        return Err(Error::ModelDomain(format!("|kappa| = {k} must be < 1")));
    }
    let mut amps = Array2::<Complex64>::zeros((cutoff + 1, cutoff + 1));
    let mut term = Complex64::new(1.0, 0.0);
    let mut kept = 0.0;
    for n in 0..=cutoff {
        if n > 0 {
            term = term * kappa / n as f64;
        }
        amps[[n, n]] = term;
        kept += term.norm_sqr();
    }
    // Tail of Σ |κ|^{2n} / (n!)² above the cutoff.
    let mut tail = 0.0;
    let mut t = term.norm_sqr();
    for n in cutoff + 1..cutoff + 200 {
        t *= k * k / (n as f64 * n as f64);
        tail += t;
        if t <= tail * 1e-18 || t == 0.0 {
            break;
        }
    }
    let raw_norm = kept.sqrt();
    amps.mapv_inplace(|a| a / raw_norm);
    Ok(TwoModeState {
        amplitudes: amps,
        raw_norm,
        leakage: tail / (kept + tail),
    })
}

/// Coherent state with amplitude αⁿ/√(n!) for n ≤ cutoff, renormalized.
pub fn make_coherent_state(alpha: Complex64, cutoff: usize) -> Result<SingleModeState> {
    if cutoff < 1 {
        return Err(invalid(format!("coherent cutoff {cutoff} < 1")));
    }
    if !alpha.norm().is_finite() {
        return Err(invalid("non-finite alpha"));
    }
    let x = alpha.norm_sqr();
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut term = Complex64::new(1.0, 0.0);
    let mut kept = 0.0;
    for n in 0..=cutoff {
        if n > 0 {
            term = term * alpha / (n as f64).sqrt();
        }
        amps.push(term);
        kept += term.norm_sqr();
    }
    let mut tail = 0.0;
    let mut t = term.norm_sqr();
    for n in cutoff + 1..cutoff + 500 {
        t *= x / n as f64;
        tail += t;
        if t <= tail * 1e-18 || t == 0.0 {
            break;
        }
    }
    let raw_norm = kept.sqrt();
    let amplitudes = Array1::from(amps).mapv(|a| a / raw_norm);
    Ok(SingleModeState {
        amplitudes,
        raw_norm,
        leakage: tail / (kept + tail),
    })
}

/// Photon-number distribution of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberDistribution {
    pub probs: Array1<f64>,
    /// Truncation leakage inherited from state preparation.
    pub leakage: f64,
}

impl NumberDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probabilities(probs.iter().copied())?;
        Ok(Self {
            probs: Array1::from(probs),
            leakage: 0.0,
        })
    }

    pub fn vacuum(cutoff: usize) -> Self {
        let mut probs = Array1::zeros(cutoff + 1);
        probs[0] = 1.0;
        Self {
            probs,
            leakage: 0.0,
        }
    }

    pub fn fock(n: usize) -> Self {
        let mut probs = Array1::zeros(n + 1);
        probs[n] = 1.0;
        Self {
            probs,
            leakage: 0.0,
        }
    }

    pub fn max_photons(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.probs.sum()
    }
}

/// Joint photon-number distribution of modes 1 and 2, indexed `(n1, n2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution {
    pub probs: Array2<f64>,
    pub leakage: f64,
}

impl PairDistribution {
    pub fn total(&self) -> f64 {
        self.probs.sum()
    }

    /// Binomial loss on one mode.
    pub fn apply_loss(&self, mode: PairMode, t: f64) -> Result<Self> {
        let (rows, cols) = self.probs.dim();
        let n_max = rows.max(cols) - 1;
        let k = loss_kernel(n_max, t)?;
        let mut out = Array2::zeros((rows, cols));
        for ((n1, n2), &p) in self.probs.indexed_iter() {
            if p == 0.0 {
                continue;
            }
            match mode {
                PairMode::Idler => {
                    for m in 0..=n1 {
                        out[[m, n2]] += p * k[[n1, m]];
                    }
                }
                PairMode::Signal => {
                    for m in 0..=n2 {
                        out[[n1, m]] += p * k[[n2, m]];
                    }
                }
            }
        }
        Ok(Self {
            probs: out,
            leakage: self.leakage,
        })
    }

    /// Marginal of mode 1 with mode 2 forced to vacuum (shutter S2 closed).
    fn block_signal(&self) -> Self {
        let mut out = Array2::zeros(self.probs.dim());
        for ((n1, _), &p) in self.probs.indexed_iter() {
            out[[n1, 0]] += p;
        }
        Self {
            probs: out,
            leakage: self.leakage,
        }
    }
}

/// Selects a mode of a [`PairDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    Idler,
    Signal,
}

fn check_probabilities(it: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in it {
        if !(p >= 0.0) {
            return Err(invalid(format!("negative or NaN probability {p}")));
        }
        total += p;
    }
    if total > 1.0 + NORM_SLACK {
        return Err(invalid(format!("probabilities sum to {total} > 1")));
    }
    Ok(())
}

/// `K[n, m] = C(n, m) η^m (1 − η)^{n − m}` with η = t².
fn loss_kernel(n_max: usize, t: f64) -> Result<Array2<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("transmissivity t = {t} outside [0, 1]")));
    }
    let eta = t * t;
    Ok(binomial_kernel(n_max, eta))
}

fn binomial_kernel(n_max: usize, p: f64) -> Array2<f64> {
    let mut k = Array2::zeros((n_max + 1, n_max + 1));
    for n in 0..=n_max {
        let mut binom = 1.0;
        for m in 0..=n {
            if m > 0 {
                binom = binom * (n - m + 1) as f64 / m as f64;
            }
            k[[n, m]] = binom * p.powi(m as i32) * (1.0 - p).powi((n - m) as i32);
        }
    }
    k
}

/// Binomial loss with amplitude transmissivity `t`.
pub fn apply_loss(dist: &NumberDistribution, t: f64) -> Result<NumberDistribution> {
    let n_max = dist.max_photons();
    let k = loss_kernel(n_max, t)?;
    let mut out = Array1::zeros(n_max + 1);
    for (n, &p) in dist.probs.iter().enumerate() {
        for m in 0..=n {
            out[m] += p * k[[n, m]];
        }
    }
    Ok(NumberDistribution {
        probs: out,
        leakage: dist.leakage,
    })
}

/// Joint photon counts at the two coupler outputs, indexed `(n_out_a, n_out_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitterOutput {
    pub probs: Array2<f64>,
}

impl SplitterOutput {
    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.probs.get([a, b]).copied().unwrap_or(0.0)
    }
}

/// Route two mutually distinguishable inputs through a 50:50 coupler.
///
/// Every photon independently exits either port with probability 1/2, so a
/// total of `n` photons leaves as Binomial(n, 1/2); there is no bunching.
pub fn route_noninterfering_splitter(
    dist2: &NumberDistribution,
    dist3: &NumberDistribution,
) -> SplitterOutput {
    let n_max = dist2.max_photons() + dist3.max_photons();
    let half = binomial_kernel(n_max, 0.5);
    let mut out = Array2::zeros((n_max + 1, n_max + 1));
    for (n2, &p2) in dist2.probs.iter().enumerate() {
        for (n3, &p3) in dist3.probs.iter().enumerate() {
            let p = p2 * p3;
            if p == 0.0 {
                continue;
            }
            let n = n2 + n3;
            for k in 0..=n {
                out[[k, n - k]] += p * half[[n, k]];
            }
        }
    }
    SplitterOutput { probs: out }
}

/// Which shutters are open during an acquisition step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShutterConfig {
    /// Shutter S2 on the signal mode.
    pub s2_open: bool,
    /// Shutter S3 on the attenuated laser mode.
    pub s3_open: bool,
}

impl ShutterConfig {
    pub const BOTH_OPEN: Self = Self {
        s2_open: true,
        s3_open: true,
    };
    /// Step (ii): laser blocked, signal parasitics only.
    pub const LASER_BLOCKED: Self = Self {
        s2_open: true,
        s3_open: false,
    };
    /// Step (iii): signal blocked, laser parasitics only.
    pub const SIGNAL_BLOCKED: Self = Self {
        s2_open: false,
        s3_open: true,
    };
    pub const BOTH_CLOSED: Self = Self {
        s2_open: false,
        s3_open: false,
    };
}

/// Photon-count distribution at D1 (idler), D2 and D3 (coupler outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct JointPhotonDistribution {
    probs: Array3<f64>,
    cutoff: usize,
    leakage: f64,
}

#[derive(Serialize, Deserialize)]
struct JointPhotonDistributionJson {
    cutoff: usize,
    probs: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    leakage: f64,
}

impl JointPhotonDistribution {
    /// Builds a distribution from sparse `(n1, n2, n3) -> p` outcomes.
    pub fn from_outcomes(cutoff: usize, outcomes: &[((usize, usize, usize), f64)]) -> Result<Self> {
        let dim2 = 2 * cutoff + 1;
        let mut probs = Array3::zeros((cutoff + 1, dim2, dim2));
        for &((a, b, c), p) in outcomes {
            if a > cutoff || b >= dim2 || c >= dim2 {
                return Err(invalid(format!("outcome ({a},{b},{c}) outside table")));
            }
            probs[[a, b, c]] += p;
        }
        check_probabilities(probs.iter().copied())?;
        Ok(Self {
            probs,
            cutoff,
            leakage: 0.0,
        })
    }

    pub fn probs(&self) -> &Array3<f64> {
        &self.probs
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn total(&self) -> f64 {
        self.probs.sum()
    }

    pub fn prob(&self, n1: usize, n2: usize, n3: usize) -> f64 {
        self.probs.get([n1, n2, n3]).copied().unwrap_or(0.0)
    }

    /// Exchanges the two coupler outputs.
    pub fn swap_outputs(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.swap_axes(1, 2);
        Self {
            probs: probs.as_standard_layout().to_owned(),
            cutoff: self.cutoff,
            leakage: self.leakage,
        }
    }

    pub fn to_json(&self) -> String {
        let probs = self
            .probs
            .outer_iter()
            .map(|plane| plane.outer_iter().map(|row| row.to_vec()).collect())
            .collect();
        serde_json::to_string(&JointPhotonDistributionJson {
            cutoff: self.cutoff,
            probs,
            leakage: self.leakage,
        })
        .expect("plain numeric data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: JointPhotonDistributionJson =
            serde_json::from_str(s).map_err(|e| invalid(e.to_string()))?;
        let d0 = raw.probs.len();
        let d1 = raw.probs.first().map_or(0, |p| p.len());
        let d2 = raw
            .probs
            .first()
            .and_then(|p| p.first())
            .map_or(0, |r| r.len());
        let flat: Vec<f64> = raw.probs.into_iter().flatten().flatten().collect();
        let probs = Array3::from_shape_vec((d0, d1, d2), flat)
            .map_err(|_| invalid("ragged probability table"))?;
        check_probabilities(probs.iter().copied())?;
        Ok(Self {
            probs,
            cutoff: raw.cutoff,
            leakage: raw.leakage,
        })
    }
}

/// Full source → loss → shutters → coupler → detectors pipeline.
///
/// The laser amplitude already includes its losses; only the SPDC modes are
/// attenuated (t1 on the idler, t2 on the signal).
pub fn simulate_configuration(
    params: &SourceParams,
    shutters: ShutterConfig,
) -> Result<JointPhotonDistribution> {
    params.validate()?;
    let cutoff = params.cutoff;
    let pair = make_spdc_state(params.kappa, cutoff)?
        .distribution()
        .apply_loss(PairMode::Idler, params.t1)?
        .apply_loss(PairMode::Signal, params.t2)?;
    let pair = if shutters.s2_open {
        pair
    } else {
        pair.block_signal()
    };
    let laser = if shutters.s3_open {
        make_coherent_state(params.alpha, cutoff)?.distribution()
    } else {
        NumberDistribution::vacuum(cutoff)
    };

    let dim2 = 2 * cutoff + 1;
    let half = binomial_kernel(2 * cutoff, 0.5);
    let mut probs = Array3::zeros((cutoff + 1, dim2, dim2));
    for ((n1, n2), &p12) in pair.probs.indexed_iter() {
        if p12 == 0.0 {
            continue;
        }
        for (n3, &p3) in laser.probs.iter().enumerate() {
            let p = p12 * p3;
            if p == 0.0 {
                continue;
            }
            let n = n2 + n3;
            for k in 0..=n {
                probs[[n1, k, n - k]] += p * half[[n, k]];
            }
        }
    }
    let leakage = 1.0 - (1.0 - pair.leakage) * (1.0 - laser.leakage);
    Ok(JointPhotonDistribution {
        probs,
        cutoff,
        leakage,
    })
}

/// Probability that all three threshold detectors click.
pub fn threefold_coincidence_prob(dist: &JointPhotonDistribution) -> f64 {
    dist.probs
        .indexed_iter()
        .filter(|((a, b, c), _)| *a >= 1 && *b >= 1 && *c >= 1)
        .map(|(_, &p)| p)
        .sum()
}
