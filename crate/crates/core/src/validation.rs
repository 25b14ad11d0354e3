//! Built-in analytic-versus-simulation sanity suite, sized to finish in
//! seconds.

use num_complex::Complex64;

use crate::channel::{mrc_statistic, sample_channel, sample_decisions, sample_observation};
use crate::deflection::deflection_large_system;
use crate::error::Result;
use crate::experiment::{gamma_grid, ROC_PF_RANGE};
use crate::gc::{auc, ca_operating_point, GcParams};
use crate::ic::ic_probabilities;
use crate::mgf::MgfModel;
use crate::model::{Hypothesis, PowerMode, SensorEnsemble, SystemConfig};
use crate::montecarlo::{mc_ca_probabilities, mc_ic_false_alarm_histogram, substream, ThresholdRule};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn scenario() -> Result<(SystemConfig, SensorEnsemble)> {
    Ok((
        SystemConfig::new(8, 2, PowerMode::Tpc, 10.0)?,
        SensorEnsemble::iid(8, 0.5, 0.05)?,
    ))
}

/// Largest `|analytic - mc| / stderr` over a set of comparisons, with the
/// standard error evaluated at the analytic rate.
fn worst_z(pairs: impl IntoIterator<Item = (f64, f64)>, runs: usize) -> f64 {
    pairs
        .into_iter()
        .map(|(exact, mc)| {
            let se = (exact * (1.0 - exact) / runs as f64).sqrt().max(1e-12);
            (exact - mc).abs() / se
        })
        .fold(0.0, f64::max)
}

pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        check("mgf normalization", || {
            let (config, ens) = scenario()?;
            let model = MgfModel::finite_k(config, &ens)?;
            let mut worst = 0.0f64;
            for h in Hypothesis::BOTH {
                worst = worst.max((model.mgf(Complex64::new(0.0, 0.0), h)? - 1.0).norm());
            }
            Ok((worst <= 1e-14, format!("max |Phi(0) - 1| = {worst:.2e}")))
        }),
        check("ideal large-system auc", || {
            let model = MgfModel::large_system_ipc(1.0, 0.0, 2)?;
            let a = auc(&model, &GcParams::auc_default())?.auc;
            Ok((a >= 1.0 - 1e-6, format!("auc = {a:.9}")))
        }),
        check("ideal large-system deflection", || {
            let d = deflection_large_system(1.0, 0.0, 3, PowerMode::Ipc, 1.0)?.d0;
            Ok(((d - 12.0).abs() <= 1e-12, format!("D0 = {d} for N = 3")))
        }),
        check("roc quadrature vs simulation", || {
            let (config, ens) = scenario()?;
            let gc = GcParams::default();
            let model = MgfModel::finite_k(config, &ens)?;
            let gammas = gamma_grid(&model, ROC_PF_RANGE, 8, &gc)?;
            let runs = 20_000;
            let mc = mc_ca_probabilities(&config, &ens, &gammas, runs, seed)?;
            let mut pairs = Vec::new();
            for m in &mc {
                let p = ca_operating_point(&model, m.gamma, &gc)?;
                pairs.push((p.pf0, m.pf0.value));
                pairs.push((p.pd0, m.pd0.value));
            }
            let z = worst_z(pairs, runs);
            Ok((z <= 4.0, format!("worst deviation {z:.2} stderr over 16 rates")))
        }),
        check("instantaneous mixture vs simulation", || {
            let (k, draws) = (3, 50_000);
            let config = SystemConfig::new(k, 1, PowerMode::Ipc, 2.0)?;
            let ens = SensorEnsemble::iid(k, 0.7, 0.1)?;
            let mut rng = substream(seed, u64::MAX);
            let channel = sample_channel(&mut rng, 1, k);
            let mut samples = [Vec::new(), Vec::new()];
            for _ in 0..draws {
                for h in Hypothesis::BOTH {
                    let x = sample_decisions(&mut rng, &ens, h);
                    let y = sample_observation(&mut rng, &channel, &x, config.noise_power())?;
                    samples[h.index()].push(mrc_statistic(&channel, &y));
                }
            }
            let mut pairs = Vec::new();
            for i in -2..=2 {
                let gamma = i as f64 * 0.5 * channel.z_norm_sq().sqrt();
                let exact = ic_probabilities(&channel, gamma, &ens, config.noise_power())?;
                for (h, p) in [(0, exact.pf0), (1, exact.pd0)] {
                    let hits = samples[h].iter().filter(|&&v| v > gamma).count();
                    pairs.push((p, hits as f64 / draws as f64));
                }
            }
            let z = worst_z(pairs, draws);
            Ok((z <= 4.0, format!("worst deviation {z:.2} stderr over 10 rates")))
        }),
        check("low-snr threshold rule", || {
            let config = SystemConfig::new(100, 1, PowerMode::Tpc, 10f64.powf(-0.5))?;
            let ens = SensorEnsemble::iid(100, 0.5, 0.05)?;
            let h = mc_ic_false_alarm_histogram(&config, &ens, 0.01, 200, 2000, seed, ThresholdRule::Approximate)?;
            Ok(((0.005..=0.02).contains(&h.mean), format!("mean realized pf0 = {:.5}", h.mean)))
        }),
        check("simulation determinism across workers", || {
            let (config, ens) = scenario()?;
            let run = |threads| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| crate::Error::Numerical(e.to_string()))?
                    .install(|| mc_ca_probabilities(&config, &ens, &[0.0, 5.0], 3000, seed))
            };
            let same = run(1)? == run(3)?;
            Ok((same, if same { "bit-exact".into() } else { "results differ".into() }))
        }),
    ]
}
