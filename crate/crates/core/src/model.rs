//! Domain types shared by every module: system configuration, sensor
//! ensembles, count laws and the Gaussian tail function.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const PMF_TOLERANCE: f64 = 1e-12;

/// Largest network for which the full joint law over `{-1,+1}^K` is
/// enumerated.
pub const MAX_JOINT_SENSORS: usize = 20;

/// Which hypothesis is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H0, Hypothesis::H1];

    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        }
    }
}

/// Power constraint on the sensor network.
///
/// Under [`PowerMode::Ipc`] the per-sensor SNR is held fixed, under
/// [`PowerMode::Tpc`] the total network SNR is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    Ipc,
    Tpc,
}

/// Network size, antenna count and SNR (linear scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    sensors: usize,
    antennas: usize,
    power_mode: PowerMode,
    snr: f64,
}

impl SystemConfig {
    /// `snr` is the per-sensor SNR under IPC and the total SNR under TPC.
    pub fn new(sensors: usize, antennas: usize, power_mode: PowerMode, snr: f64) -> Result<Self> {
        if sensors == 0 {
            return Err(Error::Domain("K must be at least 1".into()));
        }
        if antennas == 0 {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::Domain(format!("snr must be positive and finite, got {snr}")));
        }
        Ok(Self {
            sensors,
            antennas,
            power_mode,
            snr,
        })
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn power_mode(&self) -> PowerMode {
        self.power_mode
    }

    /// The SNR as configured (per-sensor under IPC, total under TPC).
    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Total network SNR `K / sigma_w^2`.
    pub fn total_snr(&self) -> f64 {
        match self.power_mode {
            PowerMode::Ipc => self.snr * self.sensors as f64,
            PowerMode::Tpc => self.snr,
        }
    }

    /// Noise power `sigma_w^2` at each receive antenna.
    pub fn noise_power(&self) -> f64 {
        match self.power_mode {
            PowerMode::Ipc => 1.0 / self.snr,
            PowerMode::Tpc => self.sensors as f64 / self.snr,
        }
    }

    pub fn with_sensors(&self, sensors: usize) -> Result<Self> {
        Self::new(sensors, self.antennas, self.power_mode, self.snr)
    }

    pub fn with_antennas(&self, antennas: usize) -> Result<Self> {
        Self::new(self.sensors, antennas, self.power_mode, self.snr)
    }
}

/// Law of the number of sensors deciding H1 under one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct CountLaw {
    probs: Vec<f64>,
    hypothesis: Hypothesis,
}

impl CountLaw {
    pub fn new(probs: Vec<f64>, hypothesis: Hypothesis) -> Result<Self> {
        validate_pmf(&probs, "count law")?;
        if probs.len() < 2 {
            return Err(Error::Domain("count law needs K >= 1 (length K+1)".into()));
        }
        Ok(Self { probs, hypothesis })
    }

    /// Number of sensors `K`.
    pub fn sensors(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn hypothesis(&self) -> Hypothesis {
        self.hypothesis
    }

    /// Counts carrying nonzero mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
    }

    pub fn with_hypothesis(mut self, hypothesis: Hypothesis) -> Self {
        self.hypothesis = hypothesis;
        self
    }
}

fn validate_pmf(probs: &[f64], what: &str) -> Result<()> {
    if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("{what}: entry {bad} outside [0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::Domain(format!("{what}: mass {total} differs from 1")));
    }
    Ok(())
}

fn validate_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("{what} = {p} outside [0, 1]")));
    }
    Ok(())
}

/// How the sensors' decisions are distributed under each hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleKind {
    /// Conditionally independent, identical sensors.
    Iid { pd: f64, pf: f64 },
    /// Only the count law is known; decision vectors are completed
    /// exchangeably.
    CountPmf { h0: Vec<f64>, h1: Vec<f64> },
    /// Full law over `{-1,+1}^K`, indexed by bit mask (bit `k` set means
    /// sensor `k` decided H1).
    JointPmf { h0: Vec<f64>, h1: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorEnsemble {
    sensors: usize,
    kind: EnsembleKind,
    joint_cdf: Option<[Vec<f64>; 2]>,
}

impl SensorEnsemble {
    /// Identical conditionally independent sensors. Both rates must be in
    /// the open unit interval, except for the perfect-sensor pair `(1, 0)`.
    pub fn iid(sensors: usize, pd: f64, pf: f64) -> Result<Self> {
        if sensors == 0 {
            return Err(Error::Domain("K must be at least 1".into()));
        }
        let interior = |p: f64| p > 0.0 && p < 1.0;
        let perfect = pd == 1.0 && pf == 0.0;
        if !perfect && !(interior(pd) && interior(pf)) {
            return Err(Error::Domain(format!(
                "iid sensors need 0 < pd, pf < 1 or (pd, pf) = (1, 0); got ({pd}, {pf})"
            )));
        }
        Ok(Self {
            sensors,
            kind: EnsembleKind::Iid { pd, pf },
            joint_cdf: None,
        })
    }

    pub fn perfect(sensors: usize) -> Result<Self> {
        Self::iid(sensors, 1.0, 0.0)
    }

    pub fn count_pmf(h0: Vec<f64>, h1: Vec<f64>) -> Result<Self> {
        if h0.len() != h1.len() {
            return Err(Error::DimensionMismatch {
                expected: h0.len(),
                got: h1.len(),
            });
        }
        if h0.len() < 2 {
            return Err(Error::Domain("count pmf needs K >= 1 (length K+1)".into()));
        }
        validate_pmf(&h0, "count pmf under H0")?;
        validate_pmf(&h1, "count pmf under H1")?;
        Ok(Self {
            sensors: h0.len() - 1,
            kind: EnsembleKind::CountPmf { h0, h1 },
            joint_cdf: None,
        })
    }

    pub fn joint_pmf(sensors: usize, h0: Vec<f64>, h1: Vec<f64>) -> Result<Self> {
        if sensors == 0 || sensors > MAX_JOINT_SENSORS {
            return Err(Error::Capability(format!(
                "joint pmf supports 1 <= K <= {MAX_JOINT_SENSORS}, got {sensors}"
            )));
        }
        let len = 1usize << sensors;
        for v in [&h0, &h1] {
            if v.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    got: v.len(),
                });
            }
        }
        validate_pmf(&h0, "joint pmf under H0")?;
        validate_pmf(&h1, "joint pmf under H1")?;
        let cdf = |v: &[f64]| {
            let mut acc = 0.0;
            v.iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<_>>()
        };
        let joint_cdf = Some([cdf(&h0), cdf(&h1)]);
        Ok(Self {
            sensors,
            kind: EnsembleKind::JointPmf { h0, h1 },
            joint_cdf,
        })
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn kind(&self) -> &EnsembleKind {
        &self.kind
    }

    pub(crate) fn joint_cdf(&self, h: Hypothesis) -> Option<&[f64]> {
        self.joint_cdf.as_ref().map(|c| c[h.index()].as_slice())
    }

    /// Law of the count of sensors deciding H1.
    pub fn count_law(&self, h: Hypothesis) -> CountLaw {
        let probs = match &self.kind {
            EnsembleKind::Iid { pd, pf } => {
                let p = match h {
                    Hypothesis::H0 => *pf,
                    Hypothesis::H1 => *pd,
                };
                binomial_probs(self.sensors, p)
            }
            EnsembleKind::CountPmf { h0, h1 } => match h {
                Hypothesis::H0 => h0.clone(),
                Hypothesis::H1 => h1.clone(),
            },
            EnsembleKind::JointPmf { h0, h1 } => {
                let joint = match h {
                    Hypothesis::H0 => h0,
                    Hypothesis::H1 => h1,
                };
                let mut probs = vec![0.0; self.sensors + 1];
                for (mask, p) in joint.iter().enumerate() {
                    probs[mask.count_ones() as usize] += p;
                }
                probs
            }
        };
        CountLaw { probs, hypothesis: h }
    }

    /// Probability of the decision vector encoded by `mask` (bit `k` set
    /// means `x_k = +1`). Only defined for `K <= 20`.
    pub fn joint_prob(&self, mask: usize, h: Hypothesis) -> Result<f64> {
        if self.sensors > MAX_JOINT_SENSORS {
            return Err(Error::Capability(format!(
                "joint probabilities need K <= {MAX_JOINT_SENSORS}, got {}",
                self.sensors
            )));
        }
        if mask >> self.sensors != 0 {
            return Err(Error::Domain(format!("mask {mask:#x} has bits beyond K")));
        }
        let ell = mask.count_ones() as usize;
        Ok(match &self.kind {
            EnsembleKind::Iid { pd, pf } => {
                let p = match h {
                    Hypothesis::H0 => *pf,
                    Hypothesis::H1 => *pd,
                };
                p.powi(ell as i32) * (1.0 - p).powi((self.sensors - ell) as i32)
            }
            EnsembleKind::CountPmf { h0, h1 } => {
                let law = match h {
                    Hypothesis::H0 => h0,
                    Hypothesis::H1 => h1,
                };
                law[ell] / binomial_coefficient(self.sensors, ell)
            }
            EnsembleKind::JointPmf { h0, h1 } => match h {
                Hypothesis::H0 => h0[mask],
                Hypothesis::H1 => h1[mask],
            },
        })
    }

    /// Probability that an individual sensor decides H1, if every sensor
    /// shares the same marginal.
    pub fn local_rates(&self) -> Option<(f64, f64)> {
        match &self.kind {
            EnsembleKind::Iid { pd, pf } => Some((*pd, *pf)),
            _ => {
                let k = self.sensors as f64;
                let pd = count_moments(&self.count_law(Hypothesis::H1)).mean / k;
                let pf = count_moments(&self.count_law(Hypothesis::H0)).mean / k;
                Some((pd, pf))
            }
        }
    }
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Binomial count law `B(K, p)`.
pub fn binomial_count_law(sensors: usize, p: f64, h: Hypothesis) -> Result<CountLaw> {
    if sensors == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    validate_probability(p, "p")?;
    Ok(CountLaw {
        probs: binomial_probs(sensors, p),
        hypothesis: h,
    })
}

const DIRECT_BINOMIAL_LIMIT: usize = 60;

fn binomial_probs(n: usize, p: f64) -> Vec<f64> {
    let mut probs = vec![0.0; n + 1];
    if p == 0.0 {
        probs[0] = 1.0;
        return probs;
    }
    if p == 1.0 {
        probs[n] = 1.0;
        return probs;
    }
    if n <= DIRECT_BINOMIAL_LIMIT {
        for (ell, slot) in probs.iter_mut().enumerate() {
            *slot = binomial_coefficient(n, ell) * p.powi(ell as i32) * (1.0 - p).powi((n - ell) as i32);
        }
        return probs;
    }
    // Log-domain recurrence on successive ratios, normalized at the end.
    let log_odds = p.ln() - (1.0 - p).ln();
    let mut log_probs = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    log_probs.push(acc);
    for ell in 0..n {
        acc += ((n - ell) as f64).ln() - ((ell + 1) as f64).ln() + log_odds;
        log_probs.push(acc);
    }
    let peak = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (slot, lp) in probs.iter_mut().zip(&log_probs) {
        *slot = (lp - peak).exp();
        total += *slot;
    }
    for slot in probs.iter_mut() {
        *slot /= total;
    }
    probs
}

/// First two moments and variance of a count law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

pub fn count_moments(law: &CountLaw) -> CountMoments {
    let mean: f64 = law.support().map(|(l, p)| l as f64 * p).sum();
    let second_moment: f64 = law.support().map(|(l, p)| (l * l) as f64 * p).sum();
    let variance: f64 = law
        .support()
        .map(|(l, p)| {
            let d = l as f64 - mean;
            d * d * p
        })
        .sum();
    CountMoments {
        mean,
        second_moment,
        variance,
    }
}

/// Standard normal tail probability `P(Z > x)`.
pub fn q_function(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("q_function of NaN".into()));
    }
    Ok(gaussian_tail(x))
}

#[inline]
pub(crate) fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

fn gaussian_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`q_function`] on the open unit interval.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("q_inverse needs 0 < p < 1, got {p}")));
    }
    let mut x = std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let density = gaussian_density(x);
        if density == 0.0 {
            break;
        }
        let step = (gaussian_tail(x) - p) / density;
        if !step.is_finite() {
            break;
        }
        x += step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}
