//! Acceptance suite. Prints one verdict line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mrc_fusion::channel::{mrc_statistic, sample_channel, sample_decisions, sample_observation};
use mrc_fusion::deflection::{change_in_variance_curve, deflection, deflection_iid, deflection_large_system, optimize_local_pf, DeflectionKind};
use mrc_fusion::experiment::{db_to_linear, gamma_grid, pd_for_local_pf};
use mrc_fusion::gc::{auc, ca_operating_point, invert_threshold, GcParams, CChoice};
use mrc_fusion::ic::{ic_probabilities, IcMixture};
use mrc_fusion::mgf::{eigenvalues, MgfModel};
use mrc_fusion::model::{binomial_count_law, Hypothesis, PowerMode, SensorEnsemble, SystemConfig};
use mrc_fusion::montecarlo::{
    mc_auc, mc_ca_probabilities, mc_clustered_ca_probabilities, mc_ic_false_alarm_histogram, substream, ThresholdRule,
};

type Outcome = mrc_fusion::Result<(bool, String)>;

const SEED: u64 = 20_240_601;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Standard error of a proportion estimated from `runs` draws, evaluated at
/// the analytic rate.
fn binomial_se(p: f64, runs: usize) -> f64 {
    (p * (1.0 - p) / runs as f64).sqrt()
}

fn roc_agreement() -> Outcome {
    const RUNS: usize = 100_000;
    const POINTS: usize = 20;
    const SIGMAS: f64 = 3.0;
    let gc = GcParams::default();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut slowest = 0.0f64;
    for pd in [0.5, 0.7] {
        for snr_db in [5.0, 10.0, 15.0] {
            let start = Instant::now();
            let config = SystemConfig::new(8, 2, PowerMode::Tpc, db_to_linear(snr_db))?;
            let ens = SensorEnsemble::iid(8, pd, 0.05)?;
            let model = MgfModel::finite_k(config, &ens)?;
            let gammas = gamma_grid(&model, (1e-3, 0.999), POINTS, &gc)?;
            let mc = mc_ca_probabilities(&config, &ens, &gammas, RUNS, SEED)?;
            for m in &mc {
                let exact = ca_operating_point(&model, m.gamma, &gc)?;
                for (label, p, est) in [("pf0", exact.pf0, m.pf0.value), ("pd0", exact.pd0, m.pd0.value)] {
                    let z = (p - est).abs() / binomial_se(p, RUNS);
                    worst = worst.max(z);
                    if z > SIGMAS {
                        failures.push(format!("pd={pd} {snr_db} dB gamma={:.3} {label}: {z:.2}", m.gamma));
                    }
                }
            }
            slowest = slowest.max(start.elapsed().as_secs_f64());
        }
    }
    Ok((
        failures.is_empty() && slowest < 120.0,
        format!(
            "worst |GC - MC| = {worst:.2} stderr over 240 rates, slowest scenario {slowest:.1} s{}",
            if failures.is_empty() { String::new() } else { format!("; over {SIGMAS}: {}", failures.join(", ")) }
        ),
    ))
}

fn threshold_approximation() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [1, 2] {
        let mut variances = Vec::new();
        for k in [50, 100] {
            let config = SystemConfig::new(k, n, PowerMode::Tpc, db_to_linear(-5.0))?;
            let ens = SensorEnsemble::iid(k, 0.5, 0.05)?;
            let h = mc_ic_false_alarm_histogram(&config, &ens, 0.01, 2000, 10_000, SEED, ThresholdRule::Approximate)?;
            if k == 100 {
                ok &= (0.005..=0.02).contains(&h.mean);
                notes.push(format!("N={n} K=100 mean {:.5}", h.mean));
            }
            variances.push(h.variance);
        }
        ok &= variances[1] < variances[0];
        notes.push(format!("var K=50 {:.3e} > K=100 {:.3e}", variances[0], variances[1]));
    }
    Ok((ok, notes.join("; ")))
}

fn large_system_saturation() -> Outcome {
    const RUNS: usize = 100_000;
    let gc = GcParams::default();
    let config = SystemConfig::new(10, 2, PowerMode::Tpc, 10.0)?;
    let limit = MgfModel::large_system(PowerMode::Tpc, 0.5, 0.05, 2, 10.0)?;
    let gamma_limit = invert_threshold(&limit, 0.01, &gc)?;
    let pd_limit = ca_operating_point(&limit, gamma_limit, &gc)?.pd0;
    let mut points = Vec::new();
    for k in [10, 50, 200, 800] {
        let sys = config.with_sensors(k)?;
        let ens = SensorEnsemble::iid(k, 0.5, 0.05)?;
        let gamma = invert_threshold(&MgfModel::finite_k(sys, &ens)?, 0.01, &gc)?;
        let m = mc_ca_probabilities(&sys, &ens, &[gamma], RUNS, SEED)?[0];
        points.push((k, m.pd0.value, m.pd0.stderr));
    }
    let monotone = points
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - 3.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let last = points[3].1;
    let close = (last - pd_limit).abs() <= 0.02;
    let listed: Vec<String> = points.iter().map(|(k, p, s)| format!("K={k} {p:.4}+-{s:.4}")).collect();
    Ok((
        monotone && close,
        format!("{}; large-system GC {pd_limit:.4}, gap {:.4}", listed.join(", "), (last - pd_limit).abs()),
    ))
}

fn ideal_performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    let mut worst_auc = 1.0f64;
    for n in [1, 2, 4, 8] {
        let model = MgfModel::large_system_ipc(1.0, 0.0, n)?;
        worst_auc = worst_auc.min(auc(&model, &GcParams::auc_default())?.auc);
        for _ in 0..100 {
            let s = c(rng.random_range(-0.98..0.98), rng.random_range(-20.0..20.0));
            let one = c(1.0, 0.0);
            for (h, reference) in [(Hypothesis::H1, (one - s).powi(-(n as i32))), (Hypothesis::H0, (one + s).powi(-(n as i32)))] {
                let err = (model.mgf(s, h)? - reference).norm() / reference.norm().max(1.0);
                worst = worst.max(err);
            }
        }
    }
    Ok((
        worst_auc >= 1.0 - 1e-6 && worst <= 1e-12,
        format!("min AUC {worst_auc:.9}, max MGF deviation {worst:.2e}"),
    ))
}

fn deflection_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(1..=200);
        let n = rng.random_range(1..=16);
        let mode = if rng.random_bool(0.5) { PowerMode::Tpc } else { PowerMode::Ipc };
        let snr = 10f64.powf(rng.random_range(-2.0..3.0));
        let pf = rng.random_range(0.01..0.5);
        let pd = rng.random_range(pf + 0.01..0.99);
        let config = SystemConfig::new(k, n, mode, snr)?;
        let generic = deflection(
            &binomial_count_law(k, pf, Hypothesis::H0)?,
            &binomial_count_law(k, pd, Hypothesis::H1)?,
            config,
        )?;
        let closed = deflection_iid(config, pd, pf)?;
        for which in [DeflectionKind::D0, DeflectionKind::D1] {
            let rel = (generic.get(which) - closed.get(which)).abs() / closed.get(which);
            worst = worst.max(rel);
        }
    }
    let mut exact = true;
    for n in 1..=8 {
        let d = deflection_large_system(1.0, 0.0, n, PowerMode::Ipc, 10.0)?;
        exact &= d.d0 == 4.0 * n as f64 && d.d1 == 4.0 * n as f64;
    }
    Ok((
        worst <= 1e-10 && exact,
        format!("max relative gap {worst:.2e}; ideal large-system deflection equals 4N: {exact}"),
    ))
}

fn deflection_design() -> Outcome {
    let gc = GcParams::default();
    let system = SystemConfig::new(50, 4, PowerMode::Tpc, db_to_linear(5.0))?;
    let curve = change_in_variance_curve(db_to_linear(5.0))?;
    let (pf_star, _) = optimize_local_pf(&curve, system, DeflectionKind::D1)?;
    let optimized = pd_for_local_pf(system, &curve, pf_star, 0.01, &gc)?;
    let fixed = pd_for_local_pf(system, &curve, 0.05, 0.01, &gc)?;
    let gap = optimized - fixed;
    Ok((
        gap >= 0.05,
        format!("pf* = {pf_star:.4}: pd0 {optimized:.4} vs {fixed:.4} at pf = 0.05, gap {gap:.4}"),
    ))
}

/// Informative sensors, `pd >= pf`, as the AUC range assumes.
fn random_model(rng: &mut ChaCha8Rng) -> mrc_fusion::Result<MgfModel> {
    let k = rng.random_range(1..=40);
    let n = rng.random_range(1..=6);
    let snr = 10f64.powf(rng.random_range(-1.0..2.0));
    let pf = rng.random_range(0.01..0.9);
    let pd = rng.random_range(pf..0.99);
    let mode = if rng.random_bool(0.5) { PowerMode::Tpc } else { PowerMode::Ipc };
    if rng.random_bool(0.3) {
        MgfModel::large_system(mode, pd, pf, n, snr)
    } else {
        MgfModel::finite_k(SystemConfig::new(k, n, mode, snr)?, &SensorEnsemble::iid(k, pd, pf)?)
    }
}

fn property_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut lines = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, passed: bool, detail: String| {
        ok &= passed;
        lines.push(format!("{name} {}: {detail}", if passed { "ok" } else { "FAILED" }));
    };

    let (mut norm, mut conj, mut fd_var, mut auc_range) = (0.0f64, 0.0f64, 0.0f64, (1.0f64, 0.0f64));
    for _ in 0..100 {
        let model = random_model(&mut rng)?;
        for h in Hypothesis::BOTH {
            norm = norm.max((model.mgf(c(0.0, 0.0), h)? - 1.0).norm());
            let strip = model.strip(h);
            let (lo, hi) = (strip.lo.max(-10.0), strip.hi.min(10.0));
            let s = c(lo + (hi - lo) * rng.random_range(0.02..0.98), rng.random_range(-50.0..50.0));
            let a = model.mgf(s.conj(), h)?;
            conj = conj.max((a - model.mgf(s, h)?.conj()).norm() / a.norm().max(1e-300));
            let (_, var) = model.moments(h);
            let step = 1e-5 / var.sqrt();
            let up = model.mgf(c(step, 0.0), h)?.re;
            let down = model.mgf(c(-step, 0.0), h)?.re;
            let fd_mean = (up - down) / (2.0 * step);
            let fd = (up - 2.0 + down) / (step * step) - fd_mean * fd_mean;
            fd_var = fd_var.max((fd - var).abs() / var);
        }
        let a = auc(&model, &GcParams::auc_default())?.auc;
        auc_range = (auc_range.0.min(a), auc_range.1.max(a));
    }
    record("normalization", norm <= 1e-14, format!("{norm:.1e}"));
    record("conjugate symmetry", conj <= 1e-12, format!("{conj:.1e}"));
    record("finite-difference variance", fd_var <= 1e-4, format!("{fd_var:.1e}"));
    record(
        "auc range",
        auc_range.0 >= 0.5 && auc_range.1 <= 1.0,
        format!("[{:.4}, {:.4}]", auc_range.0, auc_range.1),
    );

    let mut eig = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(1..=200);
        let ell = rng.random_range(0..=k);
        let snr = 10f64.powf(rng.random_range(-2.0..3.0));
        let (kf, lf) = (k as f64, ell as f64);
        // second moments of [y_n, (H 1_K)_n] given x, times [[0, -1/2], [-1/2, 0]]
        let r = [[kf + kf / snr, 2.0 * lf - kf], [2.0 * lf - kf, kf]];
        let m = [[-0.5 * r[0][1], -0.5 * r[0][0]], [-0.5 * r[1][1], -0.5 * r[1][0]]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let (a, b) = eigenvalues(k, ell, snr);
        eig = eig.max((a * b - det).abs() / det.abs().max(1e-300));
    }
    record("eigenvalue identity", eig <= 1e-9, format!("{eig:.1e}"));

    let config = SystemConfig::new(8, 2, PowerMode::Tpc, 10.0)?;
    let ens = SensorEnsemble::iid(8, 0.5, 0.05)?;
    let model = MgfModel::finite_k(config, &ens)?;
    let coarse = GcParams::new(1000, CChoice::Auto)?;
    let fine = GcParams::new(4000, CChoice::Auto)?;
    let mut nu_gap = 0.0f64;
    for gamma in gamma_grid(&model, (1e-3, 0.999), 20, &fine)? {
        let a = ca_operating_point(&model, gamma, &coarse)?;
        let b = ca_operating_point(&model, gamma, &fine)?;
        nu_gap = nu_gap.max((a.pf0 - b.pf0).abs()).max((a.pd0 - b.pd0).abs());
    }
    record("quadrature nodes 1000 vs 4000", nu_gap < 1e-6, format!("{nu_gap:.2e}"));

    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            Ok::<_, mrc_fusion::Error>((
                mc_ca_probabilities(&config, &ens, &[-5.0, 0.0, 5.0], 10_000, SEED)?,
                mc_clustered_ca_probabilities(&config, &ens, &[0.0], 50, 50, SEED)?,
                mc_auc(&config, &ens, 10_000, SEED)?,
                mc_ic_false_alarm_histogram(&config, &ens, 0.05, 100, 500, SEED, ThresholdRule::Approximate)?,
            ))
        })
    };
    let (one, four) = (run(1)?, run(4)?);
    let same = one.0 == four.0
        && one.1 == four.1
        && one.2.value.to_bits() == four.2.value.to_bits()
        && one.3 == four.3;
    record("simulation determinism 1 vs 4 workers", same, if same { "bit-exact".into() } else { "differs".into() });

    Ok((ok, lines.join("; ")))
}

fn small_network_oracle() -> Outcome {
    const DRAWS: usize = 1_000_000;
    const SIGMAS: f64 = 4.0;
    let gc = GcParams::default();
    let cases = [(2, 0.8, 0.1), (3, 0.7, 0.05), (4, 0.6, 0.2)];
    let mut worst_ic = 0.0f64;
    let mut worst_ca = 0.0f64;
    for (i, &(k, pd, pf)) in cases.iter().enumerate() {
        let config = SystemConfig::new(k, 1, PowerMode::Tpc, db_to_linear(5.0))?;
        let ens = SensorEnsemble::iid(k, pd, pf)?;
        let sigma2 = config.noise_power();

        let mut rng = substream(SEED, 1_000 + i as u64);
        let channel = sample_channel(&mut rng, 1, k);
        let mixture = IcMixture::new(&channel, &ens, sigma2)?;
        let (mean0, var0) = mixture.moments(Hypothesis::H0);
        let gammas: Vec<f64> = (-2..=2).map(|j| mean0 + j as f64 * var0.sqrt()).collect();
        let mut hits = [vec![0usize; 5], vec![0usize; 5]];
        for _ in 0..DRAWS {
            for h in Hypothesis::BOTH {
                let x = sample_decisions(&mut rng, &ens, h);
                let v = mrc_statistic(&channel, &sample_observation(&mut rng, &channel, &x, sigma2)?);
                for (j, g) in gammas.iter().enumerate() {
                    hits[h.index()][j] += (v > *g) as usize;
                }
            }
        }
        for (j, &g) in gammas.iter().enumerate() {
            let exact = ic_probabilities(&channel, g, &ens, sigma2)?;
            for (h, p) in [(0, exact.pf0), (1, exact.pd0)] {
                let est = hits[h][j] as f64 / DRAWS as f64;
                worst_ic = worst_ic.max((est - p).abs() / binomial_se(p, DRAWS).max(1e-12));
            }
        }

        let model = MgfModel::finite_k(config, &ens)?;
        let grid = gamma_grid(&model, (0.05, 0.95), 5, &gc)?;
        let mc = mc_clustered_ca_probabilities(&config, &ens, &grid, 1000, 1000, SEED + i as u64)?;
        for m in &mc {
            let exact = ca_operating_point(&model, m.gamma, &gc)?;
            worst_ca = worst_ca
                .max((exact.pf0 - m.pf0.value).abs() / m.pf0.stderr)
                .max((exact.pd0 - m.pd0.value).abs() / m.pd0.stderr);
        }
    }
    Ok((
        worst_ic <= SIGMAS && worst_ca <= SIGMAS,
        format!("instantaneous worst {worst_ic:.2} stderr; channel-averaged worst {worst_ca:.2} stderr"),
    ))
}

fn main() -> ExitCode {
    #[allow(clippy::type_complexity)]
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("quadrature vs simulated ROC", roc_agreement),
        ("low-SNR threshold histogram", threshold_approximation),
        ("large-system saturation", large_system_saturation),
        ("ideal large-system performance", ideal_performance),
        ("deflection closed form", deflection_closed_form),
        ("deflection-based sensor design", deflection_design),
        ("property suite", property_suite),
        ("small-network exact oracle", small_network_oracle),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += !passed as usize;
        println!(
            "criterion {} {} [{name}] ({:.1} s): {detail}",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
