//! Seeded Monte Carlo estimators for every analytic quantity.
//!
//! Replication `r` draws from its own ChaCha8 stream `(seed, r)`, so an
//! estimate depends only on the seed and the replication count, never on how
//! rayon schedules the work.

use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{mrc_statistic, sample_channel, sample_decisions, sample_observation, ChannelRealization};
use crate::error::{Error, Result};
use crate::gc::pairwise_sum;
use crate::ic::{approx_threshold, IcMixture};
use crate::model::{EnsembleKind, Hypothesis, SensorEnsemble, SystemConfig};

/// Per-channel exceedance counts under H0 and H1, one entry per threshold.
type ChannelCounts = (Vec<usize>, Vec<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub runs: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Binomial proportion with `sqrt(p (1 - p) / runs)` standard error.
    pub fn proportion(hits: usize, runs: usize, seed: u64) -> Self {
        let p = hits as f64 / runs as f64;
        Self {
            value: p,
            stderr: (p * (1.0 - p) / runs as f64).sqrt(),
            runs,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McPoint {
    pub gamma: f64,
    pub pf0: McEstimate,
    pub pd0: McEstimate,
}

/// Generator for replication `replication` under `seed`.
pub fn substream(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

fn check_ensemble(config: &SystemConfig, ensemble: &SensorEnsemble) -> Result<()> {
    if config.sensors() != ensemble.sensors() {
        return Err(Error::DimensionMismatch {
            expected: config.sensors(),
            got: ensemble.sensors(),
        });
    }
    Ok(())
}

fn check_runs(runs: usize, minimum: usize, what: &str) -> Result<()> {
    if runs < minimum {
        return Err(Error::Domain(format!("{what} needs at least {minimum} runs, got {runs}")));
    }
    Ok(())
}

/// One draw of the statistic with a fresh channel, decisions and noise.
fn draw_statistic<R: Rng>(rng: &mut R, config: &SystemConfig, ensemble: &SensorEnsemble, h: Hypothesis) -> f64 {
    let channel = sample_channel(rng, config.antennas(), config.sensors());
    let x = sample_decisions(rng, ensemble, h);
    let y = sample_observation(rng, &channel, &x, config.noise_power()).expect("dimensions checked");
    mrc_statistic(&channel, &y)
}

/// `(Lambda | H0, Lambda | H1)` for each replication, in replication order.
pub fn mc_statistic_pairs(config: &SystemConfig, ensemble: &SensorEnsemble, runs: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    check_ensemble(config, ensemble)?;
    Ok((0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let l0 = draw_statistic(&mut rng, config, ensemble, Hypothesis::H0);
            let l1 = draw_statistic(&mut rng, config, ensemble, Hypothesis::H1);
            (l0, l1)
        })
        .collect())
}

/// Fraction of `samples` strictly above each threshold.
fn exceedances(samples: &mut [f64], gammas: &[f64]) -> Vec<usize> {
    samples.sort_by(f64::total_cmp);
    gammas
        .iter()
        .map(|&g| samples.len() - samples.partition_point(|&v| v <= g))
        .collect()
}

/// Channel-averaged false-alarm and detection rates; every replication
/// serves the whole threshold grid.
pub fn mc_ca_probabilities(
    config: &SystemConfig,
    ensemble: &SensorEnsemble,
    gammas: &[f64],
    runs: usize,
    seed: u64,
) -> Result<Vec<McPoint>> {
    check_runs(runs, 100, "mc_ca_probabilities")?;
    let pairs = mc_statistic_pairs(config, ensemble, runs, seed)?;
    let (mut s0, mut s1): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let e0 = exceedances(&mut s0, gammas);
    let e1 = exceedances(&mut s1, gammas);
    Ok(gammas
        .iter()
        .zip(e0.into_iter().zip(e1))
        .map(|(&gamma, (h0, h1))| McPoint {
            gamma,
            pf0: McEstimate::proportion(h0, runs, seed),
            pd0: McEstimate::proportion(h1, runs, seed),
        })
        .collect())
}

/// Two-stage estimate: `channels` channel draws, each with
/// `draws_per_channel` decision and noise draws. Standard errors come from
/// the spread of the per-channel rates.
pub fn mc_clustered_ca_probabilities(
    config: &SystemConfig,
    ensemble: &SensorEnsemble,
    gammas: &[f64],
    channels: usize,
    draws_per_channel: usize,
    seed: u64,
) -> Result<Vec<McPoint>> {
    check_ensemble(config, ensemble)?;
    check_runs(channels, 2, "mc_clustered_ca_probabilities")?;
    check_runs(draws_per_channel, 1, "mc_clustered_ca_probabilities")?;
    let per_channel: Vec<(Vec<usize>, Vec<usize>)> = (0..channels as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c);
            let channel = sample_channel(&mut rng, config.antennas(), config.sensors());
            let mut count = |h| {
                let mut s: Vec<f64> = (0..draws_per_channel)
                    .map(|_| {
                        let x = sample_decisions(&mut rng, ensemble, h);
                        let y = sample_observation(&mut rng, &channel, &x, config.noise_power()).expect("dimensions checked");
                        mrc_statistic(&channel, &y)
                    })
                    .collect();
                exceedances(&mut s, gammas)
            };
            let h0 = count(Hypothesis::H0);
            let h1 = count(Hypothesis::H1);
            (h0, h1)
        })
        .collect();
    let estimate = |pick: &dyn Fn(&ChannelCounts) -> usize| {
        let rates: Vec<f64> = per_channel.iter().map(|c| pick(c) as f64 / draws_per_channel as f64).collect();
        let (mean, var) = mean_variance(&rates);
        McEstimate {
            value: mean,
            stderr: (var / channels as f64).sqrt(),
            runs: channels * draws_per_channel,
            seed,
        }
    };
    Ok(gammas
        .iter()
        .enumerate()
        .map(|(i, &gamma)| McPoint {
            gamma,
            pf0: estimate(&|c| c.0[i]),
            pd0: estimate(&|c| c.1[i]),
        })
        .collect())
}

/// Sample mean and unbiased sample variance with pairwise sums.
pub(crate) fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = if values.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Mann-Whitney estimate of `P(Lambda_1 > Lambda_0)` from independent
/// samples under each hypothesis, ties counted one half, with the
/// Hanley-McNeil standard error.
pub fn mc_auc(config: &SystemConfig, ensemble: &SensorEnsemble, runs: usize, seed: u64) -> Result<McEstimate> {
    check_runs(runs, 1000, "mc_auc")?;
    let pairs = mc_statistic_pairs(config, ensemble, runs, seed)?;
    let (mut s0, s1): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(mann_whitney(&mut s0, &s1, seed))
}

pub(crate) fn mann_whitney(h0: &mut [f64], h1: &[f64], seed: u64) -> McEstimate {
    h0.sort_by(f64::total_cmp);
    let wins: Vec<f64> = h1
        .iter()
        .map(|&v| {
            let below = h0.partition_point(|&u| u < v);
            let not_above = h0.partition_point(|&u| u <= v);
            below as f64 + 0.5 * (not_above - below) as f64
        })
        .collect();
    let (n0, n1) = (h0.len() as f64, h1.len() as f64);
    let a = pairwise_sum(&wins) / (n0 * n1);
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let var = (a * (1.0 - a) + (n1 - 1.0) * (q1 - a * a) + (n0 - 1.0) * (q2 - a * a)) / (n0 * n1);
    McEstimate {
        value: a,
        stderr: var.max(0.0).sqrt(),
        runs: h1.len(),
        seed,
    }
}

/// How the per-channel threshold is chosen in the histogram experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    /// Low-SNR large-system approximation from `||H 1_K||^2` only.
    Approximate,
    /// Exact inversion of the instantaneous Gaussian mixture (small K).
    ExactMixture,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcHistogram {
    /// `(lo, hi, count)`; values beyond the last edge land in the last bin.
    pub bins: Vec<(f64, f64, usize)>,
    pub mean: f64,
    pub variance: f64,
    /// Realized false-alarm rate for each channel draw, in draw order.
    pub values: Vec<f64>,
}

impl IcHistogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.2).sum()
    }

    /// Standard error of `mean` over channel draws.
    pub fn mean_stderr(&self) -> f64 {
        (self.variance / self.values.len() as f64).sqrt()
    }
}

pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

/// Builds a histogram of `values` on `[0, upper]` with `bins` equal bins.
pub fn histogram(values: &[f64], upper: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let width = upper / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = ((v / width).floor().max(0.0) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * width, (i + 1) as f64 * width, c))
        .collect()
}

/// Draws the set of sensors deciding H1 and returns `sum_k x_k c_k`.
fn decision_projection<R: Rng>(rng: &mut R, ensemble: &SensorEnsemble, projections: &[f64], total: f64, h: Hypothesis) -> f64 {
    let k = projections.len();
    let plus_sum = |rng: &mut R, ell: usize| -> f64 { index::sample(rng, k, ell).into_iter().map(|i| projections[i]).sum() };
    match ensemble.kind() {
        EnsembleKind::Iid { pd, pf } => {
            let p = if h == Hypothesis::H0 { *pf } else { *pd };
            let ell = Binomial::new(k as u64, p).expect("valid rate").sample(rng) as usize;
            2.0 * plus_sum(rng, ell) - total
        }
        _ => {
            let x = sample_decisions(rng, ensemble, h);
            x.iter().zip(projections).map(|(&s, c)| s as f64 * c).sum()
        }
    }
}

/// Per-channel realized false-alarm rate at a threshold chosen for each
/// channel, over `channel_draws` channels and `noise_draws` decision and
/// noise draws per channel. Given the channel, `Re(z^H w)` is drawn directly
/// from its `N(0, noise_power ||z||^2 / 2)` law.
pub fn mc_ic_false_alarm_histogram(
    config: &SystemConfig,
    ensemble: &SensorEnsemble,
    target_pf0: f64,
    channel_draws: usize,
    noise_draws: usize,
    seed: u64,
    rule: ThresholdRule,
) -> Result<IcHistogram> {
    check_ensemble(config, ensemble)?;
    check_runs(channel_draws, 100, "histogram channel draws")?;
    check_runs(noise_draws, 100, "histogram noise draws")?;
    if !(target_pf0 > 0.0 && target_pf0 < 1.0) {
        return Err(Error::Domain(format!("target {target_pf0} must be in (0, 1)")));
    }
    let local_pf = match (rule, ensemble.local_rates()) {
        (ThresholdRule::Approximate, Some((_, pf))) => pf,
        (ThresholdRule::Approximate, None) => {
            return Err(Error::Capability("the approximate threshold needs i.i.d. sensors".into()))
        }
        (ThresholdRule::ExactMixture, _) => f64::NAN,
    };
    let noise_power = config.noise_power();
    let values: Vec<f64> = (0..channel_draws as u64)
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let mut rng = substream(seed, c);
            let channel: ChannelRealization = sample_channel(&mut rng, config.antennas(), config.sensors());
            let gamma = match rule {
                ThresholdRule::Approximate => {
                    approx_threshold(channel.z_norm_sq(), config.sensors(), noise_power, local_pf, target_pf0)?
                }
                ThresholdRule::ExactMixture => IcMixture::new(&channel, ensemble, noise_power)?.invert_false_alarm(target_pf0)?,
            };
            let projections = channel.column_projections();
            let total: f64 = projections.iter().sum();
            let noise_sd = (0.5 * noise_power * channel.z_norm_sq()).sqrt();
            let mut hits = 0usize;
            for _ in 0..noise_draws {
                let signal = decision_projection(&mut rng, ensemble, &projections, total, Hypothesis::H0);
                let z: f64 = rng.sample(StandardNormal);
                if signal + noise_sd * z > gamma {
                    hits += 1;
                }
            }
            Ok(hits as f64 / noise_draws as f64)
        })
        .collect::<Result<_>>()?;
    let (mean, variance) = mean_variance(&values);
    Ok(IcHistogram {
        bins: histogram(&values, 4.0 * target_pf0, DEFAULT_HISTOGRAM_BINS),
        mean,
        variance,
        values,
    })
}
