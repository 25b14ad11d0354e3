//! Gauss-Chebyshev inversion of the channel-averaged MGFs: tail
//! probabilities, ROC curves, threshold inversion and the AUC.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mgf::{ConvergenceStrip, Mgf, MgfModel};
use crate::model::Hypothesis;

pub const DEFAULT_TAIL_NODES: usize = 1000;
pub const DEFAULT_AUC_NODES: usize = 64;

/// Quadrature error at one antenna reaches about 2e-3 in the far tails.
const SOFT_GUARD: f64 = 1e-2;
const EDGE_FRACTION: f64 = 0.9;
const SADDLE_ITERATIONS: usize = 80;
/// Search range, in units of `1 / sd`, on a side with no finite edge.
const OPEN_SIDE_REACH: f64 = 1e3;
const BISECTION_TOLERANCE: f64 = 1e-6;
const BISECTION_ITERATIONS: usize = 200;
const BRACKET_SIGMAS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CChoice {
    /// Saddle point of the real-axis integrand, capped at 0.9 of the way to
    /// the strip edge.
    Auto,
    /// Halfway to the edge, same side rule.
    HalfStrip,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcParams {
    pub nu: usize,
    pub c: CChoice,
}

impl GcParams {
    pub fn new(nu: usize, c: CChoice) -> Result<Self> {
        if nu == 0 || !nu.is_multiple_of(2) {
            return Err(Error::Domain(format!("node count {nu} must be even and positive")));
        }
        if let CChoice::Fixed(c) = c {
            if !c.is_finite() || c == 0.0 {
                return Err(Error::Domain(format!("abscissa c = {c} must be finite and nonzero")));
            }
        }
        Ok(Self { nu, c })
    }

    pub fn tail_default() -> Self {
        Self {
            nu: DEFAULT_TAIL_NODES,
            c: CChoice::Auto,
        }
    }

    pub fn auc_default() -> Self {
        Self {
            nu: DEFAULT_AUC_NODES,
            c: CChoice::Auto,
        }
    }
}

impl Default for GcParams {
    fn default() -> Self {
        Self::tail_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub gamma: f64,
    pub pf0: f64,
    pub pd0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// Sorted by increasing `gamma`.
    pub points: Vec<OperatingPoint>,
    pub gc: GcParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RocGrid {
    Gammas(Vec<f64>),
    PfTargets(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AucResult {
    pub auc: f64,
    pub gini: f64,
    /// Quadrature value before clamping.
    pub raw: f64,
    pub c: f64,
}

/// Left-to-right pairwise summation; the order depends only on the length.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub(crate) fn clamp_probability(raw: f64) -> Result<f64> {
    if !raw.is_finite() || !(-SOFT_GUARD..=1.0 + SOFT_GUARD).contains(&raw) {
        return Err(Error::Numerical(format!("quadrature returned probability {raw}")));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Abscissa used for a tail at `gamma`. The automatic rules put the contour
/// right of the origin when `gamma` is at or above the mean and left of it
/// otherwise. `Auto` then minimizes `ln Phi(c) - gamma c - ln|c|`, which is
/// convex on each side, so the integrand is as small and as slowly
/// oscillating as the strip allows.
pub fn resolve_c<M: Mgf + ?Sized>(mgf: &M, gamma: f64, gc: &GcParams) -> Result<f64> {
    let strip = mgf.strip();
    let (mean, var) = mgf.moments();
    let scale = 1.0 / var.sqrt().max(f64::MIN_POSITIVE);
    // Work on the positive half-line; `sign` maps back.
    let (sign, edge) = if gamma >= mean { (1.0, strip.hi) } else { (-1.0, -strip.lo) };
    match gc.c {
        CChoice::Fixed(c) => {
            if !strip.contains(c) {
                return Err(Error::Domain(format!(
                    "abscissa c = {c} outside the convergence strip ({}, {})",
                    strip.lo, strip.hi
                )));
            }
            Ok(c)
        }
        CChoice::HalfStrip => Ok(sign * if edge.is_finite() { 0.5 * edge } else { scale }),
        CChoice::Auto => {
            let cap = if edge.is_finite() { EDGE_FRACTION * edge } else { OPEN_SIDE_REACH * scale };
            let objective = |t: f64| -> f64 {
                match mgf.eval(Complex64::new(sign * t, 0.0)) {
                    Ok(v) if v.re > 0.0 => v.re.ln() - gamma * sign * t - t.ln(),
                    _ => f64::INFINITY,
                }
            };
            let (mut a, mut b) = (cap * 1e-9, cap);
            let golden = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = b - golden * (b - a);
            let mut x2 = a + golden * (b - a);
            let (mut f1, mut f2) = (objective(x1), objective(x2));
            for _ in 0..SADDLE_ITERATIONS {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - golden * (b - a);
                    f1 = objective(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + golden * (b - a);
                    f2 = objective(x2);
                }
            }
            Ok(sign * (0.5 * (a + b)).min(cap))
        }
    }
}

/// Sum over the `nu/2` Chebyshev nodes at abscissa `c` of
/// `Re(phi) + tau Im(phi)`, divided by `nu`.
fn gc_sum<M: Mgf + ?Sized>(mgf: &M, gamma: f64, c: f64, nu: usize) -> Result<f64> {
    let damping = (-gamma * c).exp();
    let mut terms = Vec::with_capacity(nu / 2);
    for r in 1..=nu / 2 {
        let tau = ((2 * r - 1) as f64 * PI / (2 * nu) as f64).tan();
        let mu = Complex64::new(c, c * tau);
        let phase = -gamma * c * tau;
        let kernel = Complex64::new(damping * phase.cos(), damping * phase.sin());
        let phi = mgf.eval(mu)? * kernel;
        let term = phi.re + tau * phi.im;
        if !term.is_finite() {
            return Err(Error::Numerical(format!("non-finite quadrature node r = {r}")));
        }
        terms.push(term);
    }
    Ok(pairwise_sum(&terms) / nu as f64)
}

/// Raw (unclamped) `P(Lambda > gamma)` and the abscissa used.
pub fn gc_tail_raw<M: Mgf + ?Sized>(mgf: &M, gamma: f64, gc: &GcParams) -> Result<(f64, f64)> {
    if gamma.is_nan() {
        return Err(Error::Domain("gamma is NaN".into()));
    }
    let c = resolve_c(mgf, gamma, gc)?;
    let g = gc_sum(mgf, gamma, c, gc.nu)?;
    // A left contour picks up the residue at the origin.
    Ok((if c > 0.0 { g } else { 1.0 - g }, c))
}

/// `P(-Lambda < -gamma)`, i.e. the probability that the statistic exceeds
/// `gamma`, by Gauss-Chebyshev quadrature of the inverse Laplace integral.
pub fn gc_tail_probability<M: Mgf + ?Sized>(mgf: &M, gamma: f64, gc: &GcParams) -> Result<f64> {
    clamp_probability(gc_tail_raw(mgf, gamma, gc)?.0)
}

pub fn ca_operating_point(model: &MgfModel, gamma: f64, gc: &GcParams) -> Result<OperatingPoint> {
    if !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma = {gamma} must be finite")));
    }
    Ok(OperatingPoint {
        gamma,
        pf0: gc_tail_probability(&model.conditional(Hypothesis::H0), gamma, gc)?,
        pd0: gc_tail_probability(&model.conditional(Hypothesis::H1), gamma, gc)?,
    })
}

/// Threshold whose channel-averaged false-alarm rate equals `target`.
pub fn invert_threshold(model: &MgfModel, target: f64, gc: &GcParams) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("target {target} must be in (0, 1)")));
    }
    let h0 = model.conditional(Hypothesis::H0);
    let (mean, var) = h0.moments();
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("H0"));
    }
    // Raw values keep the bisection well defined where quadrature error makes
    // a far tail slightly negative.
    let pf = |g: f64| -> Result<f64> {
        let raw = gc_tail_raw(&h0, g, gc)?.0;
        if !raw.is_finite() {
            return Err(Error::Numerical(format!("tail at gamma = {g} is {raw}")));
        }
        Ok(raw)
    };
    let (mut lo, mut hi) = (mean - BRACKET_SIGMAS * sd, mean + BRACKET_SIGMAS * sd);
    let (pf_lo, pf_hi) = (pf(lo)?, pf(hi)?);
    if !(pf_hi <= target && target <= pf_lo) {
        return Err(Error::Bracket {
            target,
            low: pf_hi,
            high: pf_lo,
        });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..BISECTION_ITERATIONS {
        mid = 0.5 * (lo + hi);
        let value = pf(mid)?;
        if (value - target).abs() < BISECTION_TOLERANCE {
            break;
        }
        if value > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// `AUC = P(Lambda_1 > Lambda_0)` for independent draws under each
/// hypothesis, from the MGF `Phi(s | H1) Phi(-s | H0)` of the difference.
pub fn auc(model: &MgfModel, gc: &GcParams) -> Result<AucResult> {
    let diff = Difference {
        h1: model.conditional(Hypothesis::H1),
        h0: model.conditional(Hypothesis::H0),
    };
    let (raw, c) = gc_tail_raw(&diff, 0.0, gc)?;
    if !raw.is_finite() || !(0.5 - SOFT_GUARD..=1.0 + SOFT_GUARD).contains(&raw) {
        return Err(Error::Numerical(format!("AUC quadrature returned {raw}")));
    }
    let value = raw.clamp(0.5 - 1e-6, 1.0);
    Ok(AucResult {
        auc: value,
        gini: 2.0 * value - 1.0,
        raw,
        c,
    })
}

/// Operating points over a threshold grid or a list of false-alarm targets.
/// Quadrature ripple far out in the tails can break monotonicity at the
/// 1e-8 level; a running minimum along increasing `gamma` removes it.
pub fn ca_roc(model: &MgfModel, grid: &RocGrid, gc: &GcParams) -> Result<RocCurve> {
    let gammas: Vec<f64> = match grid {
        RocGrid::Gammas(g) => g.clone(),
        RocGrid::PfTargets(t) => t
            .par_iter()
            .map(|&target| invert_threshold(model, target, gc))
            .collect::<Result<_>>()?,
    };
    if gammas.is_empty() {
        return Err(Error::Domain("empty ROC grid".into()));
    }
    let mut points: Vec<OperatingPoint> = gammas
        .par_iter()
        .map(|&g| ca_operating_point(model, g, gc))
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    for i in 1..points.len() {
        points[i].pf0 = points[i].pf0.min(points[i - 1].pf0);
        points[i].pd0 = points[i].pd0.min(points[i - 1].pd0);
    }
    Ok(RocCurve { points, gc: *gc })
}

struct Difference<'a> {
    h1: crate::mgf::ConditionalMgf<'a>,
    h0: crate::mgf::ConditionalMgf<'a>,
}

impl Mgf for Difference<'_> {
    fn eval(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.h1.eval(s)? * self.h0.eval(-s)?)
    }

    fn strip(&self) -> ConvergenceStrip {
        let s0 = self.h0.strip();
        self.h1.strip().intersect(ConvergenceStrip { lo: -s0.hi, hi: -s0.lo })
    }

    fn moments(&self) -> (f64, f64) {
        let (m1, v1) = self.h1.moments();
        let (m0, v0) = self.h0.moments();
        (m1 - m0, v1 + v0)
    }
}
