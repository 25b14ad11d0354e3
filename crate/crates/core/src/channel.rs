//! Physical layer of the simulator: Rayleigh channel matrices, sensor
//! decisions, received vectors and the two fusion statistics.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{EnsembleKind, Hypothesis, SensorEnsemble, MAX_JOINT_SENSORS};

/// One draw of the `N x K` fading matrix, with the MRC combining vector
/// `z = H 1_K` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    antennas: usize,
    sensors: usize,
    // row-major: entry (n, k) at n * sensors + k
    entries: Vec<Complex64>,
    z: Vec<Complex64>,
    z_norm_sq: f64,
}

impl ChannelRealization {
    pub fn from_entries(antennas: usize, sensors: usize, entries: Vec<Complex64>) -> Result<Self> {
        if antennas == 0 || sensors == 0 {
            return Err(Error::Domain("channel needs N, K >= 1".into()));
        }
        if entries.len() != antennas * sensors {
            return Err(Error::DimensionMismatch {
                expected: antennas * sensors,
                got: entries.len(),
            });
        }
        let z: Vec<Complex64> = entries
            .chunks_exact(sensors)
            .map(|row| row.iter().sum())
            .collect();
        let z_norm_sq = z.iter().map(|v| v.norm_sqr()).sum();
        Ok(Self {
            antennas,
            sensors,
            entries,
            z,
            z_norm_sq,
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn entry(&self, n: usize, k: usize) -> Complex64 {
        self.entries[n * self.sensors + k]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// The combining vector `H 1_K`.
    pub fn z_mrc(&self) -> &[Complex64] {
        &self.z
    }

    pub fn z_norm_sq(&self) -> f64 {
        self.z_norm_sq
    }

    /// `H x` for a decision vector.
    pub fn apply(&self, x: &[i8]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.sensors, "decision vector length");
        self.entries
            .chunks_exact(self.sensors)
            .map(|row| {
                row.iter()
                    .zip(x)
                    .map(|(h, &s)| if s > 0 { *h } else { -*h })
                    .sum()
            })
            .collect()
    }

    /// `Re(z^H h_k)` for every column; the noiseless MRC statistic is
    /// `sum_k x_k * projections[k]`.
    pub fn column_projections(&self) -> Vec<f64> {
        let mut proj = vec![0.0; self.sensors];
        for (row, zn) in self.entries.chunks_exact(self.sensors).zip(&self.z) {
            for (p, h) in proj.iter_mut().zip(row) {
                *p += (zn.conj() * h).re;
            }
        }
        proj
    }
}

/// Received signal `y = H x + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedVector(pub Vec<Complex64>);

#[inline]
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Draws `H` with i.i.d. `CN(0, 1)` entries.
pub fn sample_channel<R: Rng + ?Sized>(rng: &mut R, antennas: usize, sensors: usize) -> ChannelRealization {
    assert!(antennas >= 1 && sensors >= 1, "channel needs N, K >= 1");
    let entries = (0..antennas * sensors)
        .map(|_| complex_normal(rng, 1.0))
        .collect();
    ChannelRealization::from_entries(antennas, sensors, entries).expect("dimensions are consistent")
}

fn sample_index(cdf_or_pmf: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in cdf_or_pmf.enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draws the sensors' BPSK symbols (`+1` for a H1 decision).
pub fn sample_decisions<R: Rng + ?Sized>(rng: &mut R, ensemble: &SensorEnsemble, h: Hypothesis) -> Vec<i8> {
    let k = ensemble.sensors();
    match ensemble.kind() {
        EnsembleKind::Iid { pd, pf } => {
            let p = match h {
                Hypothesis::H0 => *pf,
                Hypothesis::H1 => *pd,
            };
            (0..k)
                .map(|_| if rng.random::<f64>() < p { 1 } else { -1 })
                .collect()
        }
        EnsembleKind::CountPmf { h0, h1 } => {
            let law = match h {
                Hypothesis::H0 => h0,
                Hypothesis::H1 => h1,
            };
            let ell = sample_index(law.iter().copied(), rng.random::<f64>());
            let mut x = vec![-1i8; k];
            for idx in rand::seq::index::sample(rng, k, ell) {
                x[idx] = 1;
            }
            x
        }
        EnsembleKind::JointPmf { .. } => {
            let cdf = ensemble.joint_cdf(h).expect("joint ensembles carry their cdf");
            let u = rng.random::<f64>();
            let mut mask = cdf.partition_point(|&c| c <= u);
            if mask >= cdf.len() {
                mask = cdf.len() - 1;
            }
            decisions_from_mask(mask, k)
        }
    }
}

pub(crate) fn decisions_from_mask(mask: usize, sensors: usize) -> Vec<i8> {
    (0..sensors)
        .map(|k| if mask >> k & 1 == 1 { 1 } else { -1 })
        .collect()
}

/// `y = H x + w` with `w ~ CN(0, noise_power I_N)`.
pub fn sample_observation<R: Rng + ?Sized>(
    rng: &mut R,
    channel: &ChannelRealization,
    x: &[i8],
    noise_power: f64,
) -> Result<ReceivedVector> {
    if x.len() != channel.sensors() {
        return Err(Error::DimensionMismatch {
            expected: channel.sensors(),
            got: x.len(),
        });
    }
    if !(noise_power >= 0.0) {
        return Err(Error::Domain(format!("noise power {noise_power} must be non-negative")));
    }
    let mut y = channel.apply(x);
    if noise_power > 0.0 {
        for v in y.iter_mut() {
            *v += complex_normal(rng, noise_power);
        }
    }
    Ok(ReceivedVector(y))
}

/// MRC statistic `Re(z^H y)`.
pub fn mrc_statistic(channel: &ChannelRealization, y: &ReceivedVector) -> f64 {
    assert_eq!(y.0.len(), channel.antennas(), "received vector length");
    channel
        .z_mrc()
        .iter()
        .zip(&y.0)
        .map(|(z, v)| (z.conj() * v).re)
        .sum()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln()
}

/// Optimal log-likelihood ratio, enumerating all `2^K` decision vectors.
pub fn llr_statistic(
    channel: &ChannelRealization,
    y: &ReceivedVector,
    ensemble: &SensorEnsemble,
    noise_power: f64,
) -> Result<f64> {
    let k = channel.sensors();
    if k > MAX_JOINT_SENSORS {
        return Err(Error::Capability(format!(
            "LLR enumeration supports K <= {MAX_JOINT_SENSORS}, got {k}"
        )));
    }
    if ensemble.sensors() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: ensemble.sensors(),
        });
    }
    if y.0.len() != channel.antennas() {
        return Err(Error::DimensionMismatch {
            expected: channel.antennas(),
            got: y.0.len(),
        });
    }
    if !(noise_power > 0.0) {
        return Err(Error::Domain("LLR needs positive noise power".into()));
    }
    let mut num = Vec::with_capacity(1 << k);
    let mut den = Vec::with_capacity(1 << k);
    for mask in 0..(1usize << k) {
        let p1 = ensemble.joint_prob(mask, Hypothesis::H1)?;
        let p0 = ensemble.joint_prob(mask, Hypothesis::H0)?;
        if p1 == 0.0 && p0 == 0.0 {
            continue;
        }
        let hx = channel.apply(&decisions_from_mask(mask, k));
        let dist: f64 = y.0.iter().zip(&hx).map(|(a, b)| (a - b).norm_sqr()).sum();
        let exponent = -dist / noise_power;
        if p1 > 0.0 {
            num.push(exponent + p1.ln());
        }
        if p0 > 0.0 {
            den.push(exponent + p0.ln());
        }
    }
    if num.is_empty() || den.is_empty() {
        return Err(Error::Domain("both hypotheses need some decision vector with positive mass".into()));
    }
    Ok(log_sum_exp(&num) - log_sum_exp(&den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn channel_is_deterministic_and_cached() {
        let a = sample_channel(&mut rng(7), 3, 5);
        let b = sample_channel(&mut rng(7), 3, 5);
        assert_eq!(a, b);
        for n in 0..3 {
            let row: Complex64 = (0..5).map(|k| a.entry(n, k)).sum();
            assert!((row - a.z_mrc()[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn channel_entry_statistics() {
        let mut r = rng(1);
        let draws = 1_000_000;
        let mut power = 0.0;
        let mut mean = Complex64::new(0.0, 0.0);
        let mut re_sq = 0.0;
        for _ in 0..draws / 100 {
            let ch = sample_channel(&mut r, 10, 10);
            for h in ch.entries() {
                power += h.norm_sqr();
                mean += h;
                re_sq += h.re * h.re;
            }
        }
        let n = draws as f64;
        assert!((power / n - 1.0).abs() < 0.01);
        assert!((mean / n).norm() < 0.01);
        assert!((re_sq / n - 0.5).abs() < 0.01);
    }

    #[test]
    fn perfect_sensor_decisions() {
        let ens = SensorEnsemble::perfect(6).unwrap();
        let mut r = rng(3);
        for _ in 0..100 {
            assert!(sample_decisions(&mut r, &ens, Hypothesis::H1).iter().all(|&x| x == 1));
            assert!(sample_decisions(&mut r, &ens, Hypothesis::H0).iter().all(|&x| x == -1));
        }
    }

    #[test]
    fn iid_decision_rate() {
        let k = 10;
        let ens = SensorEnsemble::iid(k, 0.5, 0.05).unwrap();
        let mut r = rng(4);
        let draws = 1_000_000;
        let mut total = 0usize;
        for _ in 0..draws {
            total += sample_decisions(&mut r, &ens, Hypothesis::H0)
                .iter()
                .filter(|&&x| x == 1)
                .count();
        }
        let mean = total as f64 / draws as f64;
        let sd = (k as f64 * 0.05 * 0.95 / draws as f64).sqrt();
        assert!((mean - 0.05 * k as f64).abs() < 3.0 * sd, "{mean}");
    }

    #[test]
    fn count_pmf_and_joint_sampling_follow_their_laws() {
        let count = SensorEnsemble::count_pmf(vec![0.2, 0.0, 0.3, 0.5], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut joint_h0 = vec![0.0; 8];
        joint_h0[0b000] = 0.5;
        joint_h0[0b101] = 0.5;
        let joint = SensorEnsemble::joint_pmf(3, joint_h0, vec![0.125; 8]).unwrap();
        let mut r = rng(5);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        let mut masks = [0usize; 8];
        for _ in 0..draws {
            let x = sample_decisions(&mut r, &count, Hypothesis::H0);
            counts[x.iter().filter(|&&v| v == 1).count()] += 1;
            let x = sample_decisions(&mut r, &joint, Hypothesis::H0);
            let mask = x.iter().enumerate().fold(0, |m, (k, &v)| if v == 1 { m | 1 << k } else { m });
            masks[mask] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.0, 0.3, 0.5]) {
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((*c as f64 / draws as f64 - p).abs() <= 4.0 * se + 1e-12);
        }
        assert_eq!(masks[0] + masks[5], draws);
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let mut r = rng(6);
        let ch = sample_channel(&mut r, 3, 4);
        let x = vec![1, -1, -1, 1];
        let y = sample_observation(&mut r, &ch, &x, 0.0).unwrap();
        assert_eq!(y.0, ch.apply(&x));
        assert!(matches!(
            sample_observation(&mut r, &ch, &[1, 1], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn observation_noise_variance() {
        let mut r = rng(8);
        let ch = sample_channel(&mut r, 4, 3);
        let x = vec![1, -1, 1];
        let hx = ch.apply(&x);
        let sigma2 = 0.7;
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..250_000 {
            let y = sample_observation(&mut r, &ch, &x, sigma2).unwrap();
            for (a, b) in y.0.iter().zip(&hx) {
                acc += (a - b).norm_sqr();
                count += 1;
            }
        }
        assert!((acc / count as f64 / sigma2 - 1.0).abs() < 0.01);
        let a = sample_observation(&mut rng(9), &ch, &x, sigma2).unwrap();
        let b = sample_observation(&mut rng(9), &ch, &x, sigma2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mrc_statistic_properties() {
        let mut r = rng(10);
        let ch = sample_channel(&mut r, 3, 4);
        let z = ReceivedVector(ch.z_mrc().to_vec());
        assert!((mrc_statistic(&ch, &z) - ch.z_norm_sq()).abs() < 1e-12);
        let y = sample_observation(&mut r, &ch, &[1, 1, -1, 1], 1.0).unwrap();
        let neg = ReceivedVector(y.0.iter().map(|v| -v).collect());
        assert_eq!(mrc_statistic(&ch, &neg), -mrc_statistic(&ch, &y));
        let jz = ReceivedVector(ch.z_mrc().iter().map(|v| v * Complex64::i()).collect());
        assert!(mrc_statistic(&ch, &jz).abs() < 1e-12);
    }

    #[test]
    fn mrc_matches_uncached_recomputation() {
        let mut r = rng(11);
        let ens = SensorEnsemble::iid(5, 0.5, 0.05).unwrap();
        for _ in 0..1000 {
            let ch = sample_channel(&mut r, 2, 5);
            let x = sample_decisions(&mut r, &ens, Hypothesis::H1);
            let y = sample_observation(&mut r, &ch, &x, 0.5).unwrap();
            let mut direct = 0.0;
            for n in 0..2 {
                let zn: Complex64 = (0..5).map(|k| ch.entry(n, k)).sum();
                direct += (zn.conj() * y.0[n]).re;
            }
            assert!((direct - mrc_statistic(&ch, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn mrc_conditional_mean_and_variance() {
        let mut r = rng(12);
        let ch = sample_channel(&mut r, 2, 4);
        let x = vec![1, -1, 1, 1];
        let sigma2 = 0.8;
        let hx = ReceivedVector(ch.apply(&x));
        let mean = mrc_statistic(&ch, &hx);
        let var = 0.5 * sigma2 * ch.z_norm_sq();
        let draws = 100_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| mrc_statistic(&ch, &sample_observation(&mut r, &ch, &x, sigma2).unwrap()))
            .collect();
        let m = samples.iter().sum::<f64>() / draws as f64;
        let v = samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!((m - mean).abs() < 4.0 * (var / draws as f64).sqrt());
        // stderr of the sample variance of a Gaussian
        assert!((v - var).abs() < 4.0 * var * (2.0 / draws as f64).sqrt());
    }

    #[test]
    fn llr_identical_hypotheses_is_zero() {
        let mut r = rng(13);
        let ens = SensorEnsemble::iid(4, 0.3, 0.3).unwrap();
        let ch = sample_channel(&mut r, 2, 4);
        let y = sample_observation(&mut r, &ch, &[1, -1, 1, -1], 1.0).unwrap();
        assert!(llr_statistic(&ch, &y, &ens, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn llr_perfect_sensors_reduces_to_scaled_mrc() {
        let mut r = rng(14);
        let ens = SensorEnsemble::perfect(5).unwrap();
        for _ in 0..50 {
            let ch = sample_channel(&mut r, 3, 5);
            let x = sample_decisions(&mut r, &ens, Hypothesis::H1);
            let sigma2 = 2.5;
            let y = sample_observation(&mut r, &ch, &x, sigma2).unwrap();
            let llr = llr_statistic(&ch, &y, &ens, sigma2).unwrap();
            let scaled = 4.0 / sigma2 * mrc_statistic(&ch, &y);
            assert!((llr - scaled).abs() < 1e-9 * scaled.abs().max(1.0));
        }
    }

    #[test]
    fn llr_matches_direct_exponential_sums() {
        // Direct evaluation without the log-sum-exp guard, at an SNR where
        // the plain sums neither overflow nor underflow.
        let mut r = rng(15);
        let k = 6;
        let ens = SensorEnsemble::iid(k, 0.7, 0.1).unwrap();
        let sigma2 = k as f64;
        for _ in 0..10 {
            let ch = sample_channel(&mut r, 2, k);
            let x = sample_decisions(&mut r, &ens, Hypothesis::H1);
            let y = sample_observation(&mut r, &ch, &x, sigma2).unwrap();
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for mask in 0..(1usize << k) {
                let hx = ch.apply(&decisions_from_mask(mask, k));
                let d: f64 = y.0.iter().zip(&hx).map(|(a, b)| (a - b).norm_sqr()).sum();
                let e = (-d / sigma2).exp();
                num += e * ens.joint_prob(mask, Hypothesis::H1).unwrap();
                den += e * ens.joint_prob(mask, Hypothesis::H0).unwrap();
            }
            let direct = (num / den).ln();
            let llr = llr_statistic(&ch, &y, &ens, sigma2).unwrap();
            assert!((llr - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn llr_capability_limit() {
        let mut r = rng(16);
        let ens = SensorEnsemble::iid(21, 0.5, 0.05).unwrap();
        let ch = sample_channel(&mut r, 1, 21);
        let y = ReceivedVector(vec![Complex64::new(0.0, 0.0)]);
        assert!(matches!(llr_statistic(&ch, &y, &ens, 1.0), Err(Error::Capability(_))));
    }
}
