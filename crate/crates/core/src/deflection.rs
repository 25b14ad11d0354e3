//! Deflection coefficients of the MRC statistic and deflection-driven
//! design of the local sensor threshold.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mgf::{statistic_moments, MgfModel};
use crate::model::{CountLaw, Hypothesis, PowerMode, SystemConfig};

pub const PF_SEARCH_MIN: f64 = 1e-4;
pub const PF_SEARCH_MAX: f64 = 1.0 - 1e-4;
pub const COARSE_GRID_POINTS: usize = 64;
const GOLDEN_TOLERANCE: f64 = 1e-9;
const FLAT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeflectionReport {
    /// Normalized by the H0 variance.
    pub d0: f64,
    /// Normalized by the H1 variance ("modified" deflection).
    pub d1: f64,
    pub mean_gap: f64,
    pub var_h0: f64,
    pub var_h1: f64,
}

impl DeflectionReport {
    fn from_moments(mean_gap: f64, var_h0: f64, var_h1: f64) -> Result<Self> {
        if !(var_h0 > 0.0) {
            return Err(Error::ZeroVariance("H0"));
        }
        if !(var_h1 > 0.0) {
            return Err(Error::ZeroVariance("H1"));
        }
        let sq = mean_gap * mean_gap;
        Ok(Self {
            d0: sq / var_h0,
            d1: sq / var_h1,
            mean_gap,
            var_h0,
            var_h1,
        })
    }

    pub fn get(&self, which: DeflectionKind) -> f64 {
        match which {
            DeflectionKind::D0 => self.d0,
            DeflectionKind::D1 => self.d1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum DeflectionKind {
    D0,
    D1,
}

/// Deflections from the exact conditional moments of the statistic.
pub fn deflection(law_h0: &CountLaw, law_h1: &CountLaw, config: SystemConfig) -> Result<DeflectionReport> {
    let model = MgfModel::from_count_laws(config, law_h0.clone(), law_h1.clone())?;
    let (m0, v0) = statistic_moments(&model, Hypothesis::H0);
    let (m1, v1) = statistic_moments(&model, Hypothesis::H1);
    DeflectionReport::from_moments(m1 - m0, v0, v1)
}

/// Closed form for i.i.d. sensors:
/// `D_i = 4 N K (pd - pf)^2 / (K (1 + 1/(2 SNR)) + 2 (2N + 1 - K) rho_i)`
/// with `rho_0 = pf (1 - pf)`, `rho_1 = pd (1 - pd)` and SNR the total SNR.
pub fn deflection_iid(config: SystemConfig, pd: f64, pf: f64) -> Result<DeflectionReport> {
    check_rates(pd, pf)?;
    let (k, n) = (config.sensors() as f64, config.antennas() as f64);
    let snr = config.total_snr();
    let delta = pd - pf;
    let mean_gap = 2.0 * n * k * delta;
    let var = |rho: f64| n * k * (k * (1.0 + 1.0 / (2.0 * snr)) + 2.0 * (2.0 * n + 1.0 - k) * rho);
    DeflectionReport::from_moments(mean_gap, var(pf * (1.0 - pf)), var(pd * (1.0 - pd)))
}

/// `K -> infinity` limits, from the moments of the statistic scaled by
/// `1/K`: `4 N (pd - pf)^2 / (beta - 2 rho_i)` with `beta = 1` under IPC and
/// `1 + 1/(2 SNR)` under TPC. `snr` is the total SNR and is ignored under IPC.
pub fn deflection_large_system(pd: f64, pf: f64, antennas: usize, mode: PowerMode, snr: f64) -> Result<DeflectionReport> {
    let model = MgfModel::large_system(mode, pd, pf, antennas, snr)?;
    let (m0, v0) = statistic_moments(&model, Hypothesis::H0);
    let (m1, v1) = statistic_moments(&model, Hypothesis::H1);
    DeflectionReport::from_moments(m1 - m0, v0, v1)
}

fn check_rates(pd: f64, pf: f64) -> Result<()> {
    for (p, what) in [(pd, "pd"), (pf, "pf")] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("{what} = {p} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Local detector operating characteristic `pf -> pd`.
#[derive(Clone)]
pub enum LocalDetectorCurve {
    /// Energy detector for a change in variance: `pd = pf^{1/(1 + snr_obs)}`.
    ChangeInVariance { snr_obs: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for LocalDetectorCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ChangeInVariance { snr_obs } => f.debug_struct("ChangeInVariance").field("snr_obs", snr_obs).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

pub fn change_in_variance_curve(snr_obs: f64) -> Result<LocalDetectorCurve> {
    if !(snr_obs > 0.0 && snr_obs.is_finite()) {
        return Err(Error::Domain(format!("snr_obs = {snr_obs} must be positive")));
    }
    Ok(LocalDetectorCurve::ChangeInVariance { snr_obs })
}

impl LocalDetectorCurve {
    pub fn pd(&self, pf: f64) -> Result<f64> {
        if !(pf > 0.0 && pf < 1.0) {
            return Err(Error::Domain(format!("pf = {pf} outside (0, 1)")));
        }
        let pd = match self {
            Self::ChangeInVariance { snr_obs } => pf.powf(1.0 / (1.0 + snr_obs)),
            Self::Custom(f) => f(pf),
        };
        if !(0.0..=1.0).contains(&pd) {
            return Err(Error::Domain(format!("curve returned pd = {pd} at pf = {pf}")));
        }
        Ok(pd)
    }
}

/// Result of a bracketed scalar maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
}

/// Maximize a quasi-concave `f` on `[lo, hi]`: the best point of a uniform
/// coarse grid brackets the peak, then golden-section search refines it.
pub fn maximize_bracketed<F>(f: F, lo: f64, hi: f64, grid_points: usize) -> Result<Maximum>
where
    F: Fn(f64) -> Result<f64>,
{
    if grid_points < 3 || !(lo < hi) {
        return Err(Error::Domain("need lo < hi and at least 3 grid points".into()));
    }
    let step = (hi - lo) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|i| lo + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let (best, &best_value) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
    if best_value - worst <= FLAT_TOLERANCE * best_value.abs().max(1.0) {
        return Err(Error::DegenerateObjective("objective is flat over the search grid".into()));
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid_points - 1)];
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > GOLDEN_TOLERANCE {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = f(x2)?;
        }
    }
    let argmax = 0.5 * (a + b);
    let value = f(argmax)?;
    Ok(if value >= best_value {
        Maximum { argmax, value }
    } else {
        Maximum {
            argmax: grid[best],
            value: best_value,
        }
    })
}

/// Local false-alarm rate maximizing the chosen i.i.d. deflection along a
/// local detector curve. Returns `(pf_star, d_star)`.
pub fn optimize_local_pf(curve: &LocalDetectorCurve, config: SystemConfig, which: DeflectionKind) -> Result<(f64, f64)> {
    let objective = |pf: f64| Ok(deflection_iid(config, curve.pd(pf)?, pf)?.get(which));
    let best = maximize_bracketed(objective, PF_SEARCH_MIN, PF_SEARCH_MAX, COARSE_GRID_POINTS)?;
    Ok((best.argmax, best.value))
}

/// Values of the deflection objective on the coarse search grid.
pub fn coarse_objective(curve: &LocalDetectorCurve, config: SystemConfig, which: DeflectionKind) -> Result<Vec<(f64, f64)>> {
    let step = (PF_SEARCH_MAX - PF_SEARCH_MIN) / (COARSE_GRID_POINTS - 1) as f64;
    (0..COARSE_GRID_POINTS)
        .map(|i| {
            let pf = PF_SEARCH_MIN + step * i as f64;
            Ok((pf, deflection_iid(config, curve.pd(pf)?, pf)?.get(which)))
        })
        .collect()
}
