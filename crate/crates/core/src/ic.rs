//! Performance conditioned on the channel realization: the exact Gaussian
//! mixture, the low-SNR large-system threshold and the large-array
//! counting-rule approximation.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::model::{gaussian_tail, q_inverse, CountLaw, Hypothesis, SensorEnsemble, MAX_JOINT_SENSORS};

const CLAMP_GUARD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcOperatingPoint {
    pub gamma: f64,
    pub pf0: f64,
    pub pd0: f64,
}

fn clamp_probability(p: f64) -> f64 {
    debug_assert!(p > -CLAMP_GUARD && p < 1.0 + CLAMP_GUARD, "probability {p}");
    p.clamp(0.0, 1.0)
}

/// `P(m + s Z > gamma)`, degenerating to an indicator when `s = 0`.
#[inline]
fn component_tail(gamma: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        gaussian_tail((gamma - mean) / sd)
    } else if mean > gamma {
        1.0
    } else {
        0.0
    }
}

/// The statistic given `H` and `H_i`: a mixture over decision vectors of
/// normals with common variance `sigma_w^2 ||z||^2 / 2`.
#[derive(Debug, Clone)]
pub struct IcMixture {
    // (component mean, P(x|H0), P(x|H1))
    components: Vec<(f64, f64, f64)>,
    sd: f64,
}

impl IcMixture {
    pub fn new(channel: &ChannelRealization, ensemble: &SensorEnsemble, noise_power: f64) -> Result<Self> {
        let k = channel.sensors();
        if k > MAX_JOINT_SENSORS {
            return Err(Error::Capability(format!(
                "exact mixture enumerates 2^K terms; K <= {MAX_JOINT_SENSORS}, got {k}"
            )));
        }
        if ensemble.sensors() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: ensemble.sensors(),
            });
        }
        if channel.z_norm_sq() == 0.0 {
            return Err(Error::DegenerateChannel);
        }
        if !(noise_power >= 0.0) {
            return Err(Error::Domain(format!("noise power {noise_power} must be non-negative")));
        }
        let proj = channel.column_projections();
        let all_minus: f64 = -proj.iter().sum::<f64>();
        let mut components = Vec::new();
        for mask in 0..(1usize << k) {
            let p0 = ensemble.joint_prob(mask, Hypothesis::H0)?;
            let p1 = ensemble.joint_prob(mask, Hypothesis::H1)?;
            if p0 == 0.0 && p1 == 0.0 {
                continue;
            }
            let mean = all_minus
                + 2.0
                    * proj
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, p)| p)
                        .sum::<f64>();
            components.push((mean, p0, p1));
        }
        let sd = (0.5 * noise_power * channel.z_norm_sq()).sqrt();
        Ok(Self { components, sd })
    }

    /// `P(Lambda > gamma | H, h)`.
    pub fn tail(&self, h: Hypothesis, gamma: f64) -> f64 {
        let raw: f64 = self
            .components
            .iter()
            .map(|&(m, p0, p1)| {
                let w = if h == Hypothesis::H0 { p0 } else { p1 };
                w * component_tail(gamma, m, self.sd)
            })
            .sum();
        clamp_probability(raw)
    }

    pub fn operating_point(&self, gamma: f64) -> IcOperatingPoint {
        IcOperatingPoint {
            gamma,
            pf0: self.tail(Hypothesis::H0, gamma),
            pd0: self.tail(Hypothesis::H1, gamma),
        }
    }

    /// Mean and variance of the mixture (law of total variance).
    pub fn moments(&self, h: Hypothesis) -> (f64, f64) {
        let weight = |&(_, p0, p1): &(f64, f64, f64)| if h == Hypothesis::H0 { p0 } else { p1 };
        let mean: f64 = self.components.iter().map(|c| weight(c) * c.0).sum();
        let spread: f64 = self
            .components
            .iter()
            .map(|c| weight(c) * (c.0 - mean).powi(2))
            .sum();
        (mean, spread + self.sd * self.sd)
    }

    /// Exact Neyman-Pearson threshold by bisection on the mixture tail.
    pub fn invert_false_alarm(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::Domain(format!("target {target} must be in (0, 1)")));
        }
        let (lo_mean, hi_mean) = self
            .components
            .iter()
            .filter(|c| c.1 > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c.0), b.max(c.0)));
        let span = 40.0 * self.sd.max(1e-300);
        let (mut lo, mut hi) = (lo_mean - span, hi_mean + span);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if self.tail(Hypothesis::H0, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * mid.abs().max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Exact instantaneous false-alarm and detection probabilities.
pub fn ic_probabilities(
    channel: &ChannelRealization,
    gamma: f64,
    ensemble: &SensorEnsemble,
    noise_power: f64,
) -> Result<IcOperatingPoint> {
    Ok(IcMixture::new(channel, ensemble, noise_power)?.operating_point(gamma))
}

/// Low-SNR large-system threshold approaching a target false-alarm rate.
///
/// Depends on the channel only through `||H 1_K||^2`. Its accuracy claim
/// assumes uncorrelated decisions with a common local false-alarm rate
/// `pf` under H0; for other ensembles it is still evaluated but carries no
/// guarantee.
pub fn approx_threshold(z_norm_sq: f64, sensors: usize, noise_power: f64, pf: f64, target: f64) -> Result<f64> {
    if !(pf > 0.0 && pf < 1.0) {
        return Err(Error::Domain(format!("local pf {pf} must be in (0, 1)")));
    }
    if !(z_norm_sq >= 0.0) {
        return Err(Error::Domain(format!("||z||^2 = {z_norm_sq} must be non-negative")));
    }
    let delta = 2.0 * pf - 1.0;
    let spread = (((1.0 - delta * delta) * sensors as f64 + noise_power) / 2.0).sqrt();
    let z_norm = z_norm_sq.sqrt();
    Ok(q_inverse(target)? * spread * z_norm + delta * z_norm_sq)
}

/// Large-array approximation, where `H^H H ~ N I_K` turns the statistic
/// into a noisy counting rule.
pub fn large_array_probabilities(
    law_h0: &CountLaw,
    law_h1: &CountLaw,
    sensors: usize,
    antennas: usize,
    noise_power: f64,
    gamma: f64,
) -> Result<IcOperatingPoint> {
    for law in [law_h0, law_h1] {
        if law.sensors() != sensors {
            return Err(Error::DimensionMismatch {
                expected: sensors,
                got: law.sensors(),
            });
        }
    }
    let (k, n) = (sensors as f64, antennas as f64);
    let sd = (noise_power * n * k / 2.0).sqrt();
    let tail = |law: &CountLaw| {
        clamp_probability(
            law.support()
                .map(|(ell, p)| p * component_tail(gamma, (2.0 * ell as f64 - k) * n, sd))
                .sum(),
        )
    };
    Ok(IcOperatingPoint {
        gamma,
        pf0: tail(law_h0),
        pd0: tail(law_h1),
    })
}
