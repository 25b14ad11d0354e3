//! Run descriptions and the drivers behind each command-line experiment.
//!
//! A run description is JSON. SNRs are given in dB and converted to linear
//! scale here and nowhere else.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::deflection::{change_in_variance_curve, coarse_objective, optimize_local_pf, DeflectionKind, LocalDetectorCurve};
use crate::error::{Error, Result};
use crate::gc::{auc, ca_operating_point, ca_roc, invert_threshold, resolve_c, CChoice, GcParams, RocGrid, DEFAULT_AUC_NODES, DEFAULT_TAIL_NODES};
use crate::mgf::MgfModel;
use crate::model::{Hypothesis, PowerMode, SensorEnsemble, SystemConfig};
use crate::montecarlo::{mc_auc, mc_ca_probabilities, mc_ic_false_alarm_histogram, ThresholdRule};
use crate::table::Table;

pub const DEFAULT_MC_RUNS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TARGET_PF0: f64 = 0.01;
pub const DEFAULT_ROC_POINTS: usize = 20;
pub const DEFAULT_CHANNEL_DRAWS: usize = 2000;
pub const DEFAULT_NOISE_DRAWS: usize = 10_000;
pub const DEFAULT_FIXED_PF: f64 = 0.05;
/// False-alarm range covered by the default threshold grid.
pub const ROC_PF_RANGE: (f64, f64) = (1e-3, 0.999);

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub sensors: SensorSpec,
    #[serde(default)]
    pub gc: GcSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub sensors: usize,
    pub antennas: usize,
    pub power_mode: PowerMode,
    /// Per-sensor SNR under IPC, total SNR under TPC.
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SensorSpec {
    Iid { pd: f64, pf: f64 },
    Perfect,
    /// Count law under each hypothesis, `K + 1` entries.
    CountPmf { h0: Vec<f64>, h1: Vec<f64> },
    /// Probability of each decision vector, bit `k` of the index for sensor `k`.
    JointPmf { h0: Vec<f64>, h1: Vec<f64> },
    /// Energy detectors on a change in variance, operated at local rate `pf`.
    ChangeInVariance { pf: f64, snr_obs_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CRule {
    Auto,
    HalfStrip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CSetting {
    Rule(CRule),
    Fixed(f64),
}

impl CSetting {
    fn choice(self) -> CChoice {
        match self {
            CSetting::Rule(CRule::Auto) => CChoice::Auto,
            CSetting::Rule(CRule::HalfStrip) => CChoice::HalfStrip,
            CSetting::Fixed(c) => CChoice::Fixed(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GcSpec {
    pub nu: usize,
    /// Node count for the area under the curve.
    pub auc_nu: usize,
    pub c: CSetting,
}

impl Default for GcSpec {
    fn default() -> Self {
        Self {
            nu: DEFAULT_TAIL_NODES,
            auc_nu: DEFAULT_AUC_NODES,
            c: CSetting::Rule(CRule::Auto),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSpec {
    /// Zero skips simulation; simulated columns are then NaN.
    pub runs: usize,
    pub seed: u64,
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            runs: DEFAULT_MC_RUNS,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pf_targets: Option<Vec<f64>>,
    /// Size of the default threshold grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_pf0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_rule: Option<ThresholdRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensors_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antennas_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pf_fixed: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Builds every derived object once so a bad description fails before
    /// any computation.
    pub fn check(&self) -> Result<()> {
        let system = self.system_config()?;
        self.ensemble(system.sensors())?;
        self.gc_params()?;
        self.auc_params()?;
        for k in self.sensors_list() {
            system.with_sensors(k)?;
            self.ensemble(k)?;
        }
        for n in self.antennas_list() {
            system.with_antennas(n)?;
        }
        let target = self.target_pf0();
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::Domain(format!("target_pf0 = {target} must be in (0, 1)")));
        }
        if let Some(targets) = &self.sweep.pf_targets {
            if let Some(bad) = targets.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
                return Err(Error::Domain(format!("pf target {bad} must be in (0, 1)")));
            }
        }
        if let Some(bad) = self.sweep.gammas.iter().flatten().find(|g| !g.is_finite()) {
            return Err(Error::Domain(format!("threshold {bad} must be finite")));
        }
        if self.roc_points() < 2 {
            return Err(Error::Domain("points must be at least 2".into()));
        }
        let pf = self.sweep.pf_fixed.unwrap_or(DEFAULT_FIXED_PF);
        if !(pf > 0.0 && pf < 1.0) {
            return Err(Error::Domain(format!("pf_fixed = {pf} must be in (0, 1)")));
        }
        Ok(())
    }

    pub fn system_config(&self) -> Result<SystemConfig> {
        let s = &self.system;
        if !s.snr_db.is_finite() {
            return Err(Error::Domain(format!("snr_db = {} must be finite", s.snr_db)));
        }
        SystemConfig::new(s.sensors, s.antennas, s.power_mode, db_to_linear(s.snr_db))
    }

    /// Sensor ensemble for a network of `sensors`. Tabulated laws fix the
    /// network size.
    pub fn ensemble(&self, sensors: usize) -> Result<SensorEnsemble> {
        let fixed = |ens: SensorEnsemble| {
            if ens.sensors() != sensors {
                return Err(Error::DimensionMismatch {
                    expected: sensors,
                    got: ens.sensors(),
                });
            }
            Ok(ens)
        };
        match &self.sensors {
            SensorSpec::Iid { pd, pf } => SensorEnsemble::iid(sensors, *pd, *pf),
            SensorSpec::Perfect => SensorEnsemble::perfect(sensors),
            SensorSpec::CountPmf { h0, h1 } => fixed(SensorEnsemble::count_pmf(h0.clone(), h1.clone())?),
            SensorSpec::JointPmf { h0, h1 } => {
                let k = h0.len().trailing_zeros() as usize;
                fixed(SensorEnsemble::joint_pmf(k, h0.clone(), h1.clone())?)
            }
            SensorSpec::ChangeInVariance { pf, .. } => {
                let pd = self.local_curve()?.pd(*pf)?;
                SensorEnsemble::iid(sensors, pd, *pf)
            }
        }
    }

    pub fn local_curve(&self) -> Result<LocalDetectorCurve> {
        match self.sensors {
            SensorSpec::ChangeInVariance { snr_obs_db, .. } => change_in_variance_curve(db_to_linear(snr_obs_db)),
            _ => Err(Error::Capability("needs change-in-variance sensors".into())),
        }
    }

    pub fn gc_params(&self) -> Result<GcParams> {
        GcParams::new(self.gc.nu, self.gc.c.choice())
    }

    pub fn auc_params(&self) -> Result<GcParams> {
        GcParams::new(self.gc.auc_nu, self.gc.c.choice())
    }

    pub fn target_pf0(&self) -> f64 {
        self.sweep.target_pf0.unwrap_or(DEFAULT_TARGET_PF0)
    }

    fn roc_points(&self) -> usize {
        self.sweep.points.unwrap_or(DEFAULT_ROC_POINTS)
    }

    fn sensors_list(&self) -> Vec<usize> {
        self.sweep.sensors_list.clone().unwrap_or_else(|| vec![self.system.sensors])
    }

    fn antennas_list(&self) -> Vec<usize> {
        self.sweep.antennas_list.clone().unwrap_or_else(|| vec![self.system.antennas])
    }
}

/// Tables and scalar results of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// `(file stem, table)`.
    pub tables: Vec<(String, Table)>,
    pub summary: Value,
}

impl Outcome {
    fn single(stem: &str, table: Table, summary: Value) -> Self {
        Self {
            tables: vec![(stem.to_string(), table)],
            summary,
        }
    }
}

/// `points` thresholds evenly spaced between those giving false-alarm
/// rates `pf_range.1` and `pf_range.0`.
pub fn gamma_grid(model: &MgfModel, pf_range: (f64, f64), points: usize, gc: &GcParams) -> Result<Vec<f64>> {
    let hi = invert_threshold(model, pf_range.0, gc)?;
    let lo = invert_threshold(model, pf_range.1, gc)?;
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

fn simulate(cfg: &ExperimentConfig) -> bool {
    cfg.mc.runs > 0
}

pub fn run_roc(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.system_config()?;
    let ensemble = cfg.ensemble(system.sensors())?;
    let gc = cfg.gc_params()?;
    let model = MgfModel::finite_k(system, &ensemble)?;
    let grid = match (&cfg.sweep.gammas, &cfg.sweep.pf_targets) {
        (Some(g), _) => RocGrid::Gammas(g.clone()),
        (None, Some(p)) => RocGrid::PfTargets(p.clone()),
        (None, None) => RocGrid::Gammas(gamma_grid(&model, ROC_PF_RANGE, cfg.roc_points(), &gc)?),
    };
    let curve = ca_roc(&model, &grid, &gc)?;
    let gammas: Vec<f64> = curve.points.iter().map(|p| p.gamma).collect();
    let mc = if simulate(cfg) {
        Some(mc_ca_probabilities(&system, &ensemble, &gammas, cfg.mc.runs, cfg.mc.seed)?)
    } else {
        None
    };
    let mut table = Table::new(&["gamma", "pf0_gc", "pd0_gc", "pf0_mc", "pd0_mc", "mc_stderr_pf", "mc_stderr_pd"]);
    let mut abscissas = Vec::with_capacity(gammas.len());
    for (i, p) in curve.points.iter().enumerate() {
        let (pf, pd, sf, sd) = match &mc {
            Some(m) => (m[i].pf0.value, m[i].pd0.value, m[i].pf0.stderr, m[i].pd0.stderr),
            None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        table.push(vec![p.gamma.into(), p.pf0.into(), p.pd0.into(), pf.into(), pd.into(), sf.into(), sd.into()]);
        abscissas.push(json!({
            "gamma": p.gamma,
            "c_h0": resolve_c(&model.conditional(Hypothesis::H0), p.gamma, &gc)?,
            "c_h1": resolve_c(&model.conditional(Hypothesis::H1), p.gamma, &gc)?,
        }));
    }
    Ok(Outcome::single("roc", table, json!({ "abscissas": abscissas })))
}

pub fn run_threshold_hist(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.system_config()?;
    let ensemble = cfg.ensemble(system.sensors())?;
    let target = cfg.target_pf0();
    let rule = cfg.sweep.threshold_rule.unwrap_or(ThresholdRule::Approximate);
    let hist = mc_ic_false_alarm_histogram(
        &system,
        &ensemble,
        target,
        cfg.sweep.channel_draws.unwrap_or(DEFAULT_CHANNEL_DRAWS),
        cfg.sweep.noise_draws.unwrap_or(DEFAULT_NOISE_DRAWS),
        cfg.mc.seed,
        rule,
    )?;
    let mut table = Table::new(&["bin_lo", "bin_hi", "count"]);
    for &(lo, hi, count) in &hist.bins {
        table.push(vec![lo.into(), hi.into(), count.into()]);
    }
    let summary = json!({
        "target_pf0": target,
        "threshold_rule": rule,
        "mean": hist.mean,
        "variance": hist.variance,
        "mean_stderr": hist.mean_stderr(),
        "channel_draws": hist.values.len(),
    });
    Ok(Outcome::single("threshold-hist", table, summary))
}

/// Detection rate at the threshold meeting the target false-alarm rate.
fn pd_at_target(model: &MgfModel, target: f64, gc: &GcParams) -> Result<(f64, f64, f64)> {
    let gamma = invert_threshold(model, target, gc)?;
    let p = ca_operating_point(model, gamma, gc)?;
    Ok((gamma, p.pf0, p.pd0))
}

pub fn run_pd_vs_k(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.system_config()?;
    let gc = cfg.gc_params()?;
    let target = cfg.target_pf0();
    let asymptote = match cfg.ensemble(system.sensors())?.local_rates() {
        Some((pd, pf)) => {
            let model = MgfModel::large_system(system.power_mode(), pd, pf, system.antennas(), system.snr())?;
            pd_at_target(&model, target, &gc)?.2
        }
        None => f64::NAN,
    };
    let mut table = Table::new(&[
        "sensors",
        "gamma",
        "pf0_gc",
        "pd0_gc",
        "pf0_mc",
        "pd0_mc",
        "mc_stderr_pf",
        "mc_stderr_pd",
        "pd0_large_system",
    ]);
    for k in cfg.sensors_list() {
        let sys = system.with_sensors(k)?;
        let ens = cfg.ensemble(k)?;
        let (gamma, pf0, pd0) = pd_at_target(&MgfModel::finite_k(sys, &ens)?, target, &gc)?;
        let (pf, pd, sf, sd) = if simulate(cfg) {
            let m = mc_ca_probabilities(&sys, &ens, &[gamma], cfg.mc.runs, cfg.mc.seed)?[0];
            (m.pf0.value, m.pd0.value, m.pf0.stderr, m.pd0.stderr)
        } else {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        };
        table.push(vec![
            k.into(),
            gamma.into(),
            pf0.into(),
            pd0.into(),
            pf.into(),
            pd.into(),
            sf.into(),
            sd.into(),
            asymptote.into(),
        ]);
    }
    Ok(Outcome::single(
        "pd-vs-k",
        table,
        json!({ "target_pf0": target, "pd0_large_system": asymptote }),
    ))
}

pub fn run_auc(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.system_config()?;
    let ensemble = cfg.ensemble(system.sensors())?;
    let result = auc(&MgfModel::finite_k(system, &ensemble)?, &cfg.auc_params()?)?;
    let (mc, se) = if simulate(cfg) {
        let m = mc_auc(&system, &ensemble, cfg.mc.runs, cfg.mc.seed)?;
        (m.value, m.stderr)
    } else {
        (f64::NAN, f64::NAN)
    };
    let mut table = Table::new(&["sensors", "antennas", "auc", "gini", "auc_raw", "c", "auc_mc", "mc_stderr_auc"]);
    table.push(vec![
        system.sensors().into(),
        system.antennas().into(),
        result.auc.into(),
        result.gini.into(),
        result.raw.into(),
        result.c.into(),
        mc.into(),
        se.into(),
    ]);
    Ok(Outcome::single("auc", table, json!({ "auc": result })))
}

pub fn run_gini_surface(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.system_config()?;
    let gc = cfg.auc_params()?;
    let mut table = Table::new(&["sensors", "antennas", "auc", "gini", "auc_mc", "mc_stderr_auc"]);
    for k in cfg.sensors_list() {
        let ens = cfg.ensemble(k)?;
        for n in cfg.antennas_list() {
            let sys = system.with_sensors(k)?.with_antennas(n)?;
            let result = auc(&MgfModel::finite_k(sys, &ens)?, &gc)?;
            let (mc, se) = if simulate(cfg) {
                let m = mc_auc(&sys, &ens, cfg.mc.runs, cfg.mc.seed)?;
                (m.value, m.stderr)
            } else {
                (f64::NAN, f64::NAN)
            };
            table.push(vec![k.into(), n.into(), result.auc.into(), result.gini.into(), mc.into(), se.into()]);
        }
    }
    Ok(Outcome::single("gini-surface", table, json!({})))
}

/// Detection rate at the target false-alarm rate when every sensor runs
/// at local false-alarm rate `pf` on `curve`.
pub fn pd_for_local_pf(system: SystemConfig, curve: &LocalDetectorCurve, pf: f64, target: f64, gc: &GcParams) -> Result<f64> {
    let ens = SensorEnsemble::iid(system.sensors(), curve.pd(pf)?, pf)?;
    Ok(pd_at_target(&MgfModel::finite_k(system, &ens)?, target, gc)?.2)
}

pub fn run_deflection_opt(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.system_config()?;
    let curve = cfg.local_curve()?;
    let gc = cfg.gc_params()?;
    let target = cfg.target_pf0();
    let pf_fixed = cfg.sweep.pf_fixed.unwrap_or(DEFAULT_FIXED_PF);
    let mut curves = Table::new(&["antennas", "pf", "d0", "d1"]);
    let mut design = Table::new(&[
        "antennas",
        "pf_fixed",
        "pd0_fixed",
        "pf_star0",
        "d0_star",
        "pd0_star0",
        "pf_star1",
        "d1_star",
        "pd0_star1",
    ]);
    for n in cfg.antennas_list() {
        let sys = system.with_antennas(n)?;
        let d0 = coarse_objective(&curve, sys, DeflectionKind::D0)?;
        let d1 = coarse_objective(&curve, sys, DeflectionKind::D1)?;
        for (a, b) in d0.iter().zip(&d1) {
            curves.push(vec![n.into(), a.0.into(), a.1.into(), b.1.into()]);
        }
        let (pf0_star, d0_star) = optimize_local_pf(&curve, sys, DeflectionKind::D0)?;
        let (pf1_star, d1_star) = optimize_local_pf(&curve, sys, DeflectionKind::D1)?;
        design.push(vec![
            n.into(),
            pf_fixed.into(),
            pd_for_local_pf(sys, &curve, pf_fixed, target, &gc)?.into(),
            pf0_star.into(),
            d0_star.into(),
            pd_for_local_pf(sys, &curve, pf0_star, target, &gc)?.into(),
            pf1_star.into(),
            d1_star.into(),
            pd_for_local_pf(sys, &curve, pf1_star, target, &gc)?.into(),
        ]);
    }
    Ok(Outcome {
        tables: vec![
            ("deflection-opt".to_string(), design),
            ("deflection-opt-curves".to_string(), curves),
        ],
        summary: json!({ "target_pf0": target }),
    })
}
