//! Channel-averaged conditional moment generating functions of the MRC
//! statistic, their regions of convergence and closed-form moments.
//!
//! Throughout, `Phi(s | H_i) = E[exp(s * Lambda) | H_i]`, i.e. the two-sided
//! Laplace transform of the density of `-Lambda`. Every kernel has the form
//! `{(1 + a s)(1 + b s)}^{-N}` for a pair of real coefficients `(a, b)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{count_moments, CountLaw, Hypothesis, PowerMode, SensorEnsemble, SystemConfig};

const POLE_GUARD: f64 = 1e-14;

/// Open vertical strip `lo < Re(s) < hi`. Either side may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceStrip {
    pub lo: f64,
    pub hi: f64,
}

impl ConvergenceStrip {
    pub const ALL: ConvergenceStrip = ConvergenceStrip {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn contains(&self, re: f64) -> bool {
        re > self.lo && re < self.hi
    }

    pub fn intersect(self, other: ConvergenceStrip) -> ConvergenceStrip {
        ConvergenceStrip {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    fn check(&self, s: Complex64) -> Result<()> {
        if s.re <= self.lo {
            return Err(Error::Domain(format!(
                "Re(s) = {} at or left of the strip boundary lo = {}",
                s.re, self.lo
            )));
        }
        if s.re >= self.hi {
            return Err(Error::Domain(format!(
                "Re(s) = {} at or right of the strip boundary hi = {}",
                s.re, self.hi
            )));
        }
        Ok(())
    }
}

/// `xi^{+-} = 1 +- sqrt(1 + 1/SNR)`; an infinite SNR gives `(2, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xi {
    pub plus: f64,
    pub minus: f64,
}

impl Xi {
    pub fn new(snr: f64) -> Self {
        let root = (1.0 + 1.0 / snr).sqrt();
        Self {
            plus: 1.0 + root,
            minus: 1.0 - root,
        }
    }
}

/// `{(1 + a s)(1 + b s)}^{-N}` through the principal logarithm of each
/// bracket; both brackets have positive real part inside the strip.
fn bracket_kernel(s: Complex64, a: f64, b: f64, antennas: usize) -> Result<Complex64> {
    let first = Complex64::new(1.0, 0.0) + s * a;
    let second = Complex64::new(1.0, 0.0) + s * b;
    if first.norm() < POLE_GUARD || second.norm() < POLE_GUARD {
        return Err(Error::Singularity { re: s.re, im: s.im });
    }
    Ok((-(antennas as f64) * (first.ln() + second.ln())).exp())
}

fn bracket_strip(a: f64, b: f64) -> ConvergenceStrip {
    let mut strip = ConvergenceStrip::ALL;
    for coef in [a, b] {
        if coef > 0.0 {
            strip.lo = strip.lo.max(-1.0 / coef);
        } else if coef < 0.0 {
            strip.hi = strip.hi.min(-1.0 / coef);
        }
    }
    strip
}

/// Mean and variance of a statistic whose MGF is the bracket kernel.
fn bracket_moments(a: f64, b: f64, antennas: usize) -> (f64, f64) {
    let n = antennas as f64;
    (-n * (a + b), n * (a * a + b * b))
}

/// Eigenvalues `(lambda_1, lambda_2)` of the 2x2 quadratic-form matrix for
/// `ell` sensors deciding H1 out of `K`, at total SNR `snr`.
pub fn eigenvalues(sensors: usize, ell: usize, snr: f64) -> (f64, f64) {
    let k = sensors as f64;
    let root = k * (1.0 + 1.0 / snr).sqrt();
    let base = k - 2.0 * ell as f64;
    (0.5 * (base + root), 0.5 * (base - root))
}

/// MGF of the statistic given that `ell` of the `K` sensors decided H1.
pub fn mgf_given_count(s: Complex64, ell: usize, sensors: usize, antennas: usize, snr_total: f64) -> Result<Complex64> {
    if ell > sensors {
        return Err(Error::Domain(format!("count {ell} exceeds K = {sensors}")));
    }
    let (a, b) = eigenvalues(sensors, ell, snr_total);
    bracket_kernel(s, a, b, antennas)
}

/// Strip of `mgf_given_count` for a single count.
pub fn count_strip(ell: usize, sensors: usize, snr_total: f64) -> ConvergenceStrip {
    let (a, b) = eigenvalues(sensors, ell, snr_total);
    bracket_strip(a, b)
}

/// Something that can be inverted by contour quadrature.
pub trait Mgf {
    fn eval(&self, s: Complex64) -> Result<Complex64>;
    fn strip(&self) -> ConvergenceStrip;
    /// Mean and variance of the underlying statistic.
    fn moments(&self) -> (f64, f64);
}

#[derive(Debug, Clone, PartialEq)]
pub enum MgfModel {
    /// Exact channel-averaged MGF for `K` sensors, a sum over counts.
    FiniteK {
        config: SystemConfig,
        laws: [CountLaw; 2],
        xi: Xi,
    },
    /// `K -> infinity` limit of the statistic scaled by `1/K`, for
    /// i.i.d. sensors.
    LargeSystem {
        mode: PowerMode,
        pd: f64,
        pf: f64,
        antennas: usize,
        snr: f64,
        xi: Xi,
    },
}

impl MgfModel {
    pub fn finite_k(config: SystemConfig, ensemble: &SensorEnsemble) -> Result<Self> {
        if ensemble.sensors() != config.sensors() {
            return Err(Error::DimensionMismatch {
                expected: config.sensors(),
                got: ensemble.sensors(),
            });
        }
        Self::from_count_laws(config, ensemble.count_law(Hypothesis::H0), ensemble.count_law(Hypothesis::H1))
    }

    pub fn from_count_laws(config: SystemConfig, law_h0: CountLaw, law_h1: CountLaw) -> Result<Self> {
        for law in [&law_h0, &law_h1] {
            if law.sensors() != config.sensors() {
                return Err(Error::DimensionMismatch {
                    expected: config.sensors(),
                    got: law.sensors(),
                });
            }
        }
        Ok(MgfModel::FiniteK {
            xi: Xi::new(config.total_snr()),
            config,
            laws: [law_h0.with_hypothesis(Hypothesis::H0), law_h1.with_hypothesis(Hypothesis::H1)],
        })
    }

    /// Large-system limit. `snr` is the total SNR and is ignored under IPC.
    pub fn large_system(mode: PowerMode, pd: f64, pf: f64, antennas: usize, snr: f64) -> Result<Self> {
        for (p, what) in [(pd, "pd"), (pf, "pf")] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{what} = {p} outside [0, 1]")));
            }
        }
        if antennas == 0 {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        let snr = match mode {
            PowerMode::Ipc => f64::INFINITY,
            PowerMode::Tpc => {
                if !(snr > 0.0) {
                    return Err(Error::Domain(format!("snr {snr} must be positive")));
                }
                snr
            }
        };
        Ok(MgfModel::LargeSystem {
            mode,
            pd,
            pf,
            antennas,
            snr,
            xi: Xi::new(snr),
        })
    }

    pub fn large_system_ipc(pd: f64, pf: f64, antennas: usize) -> Result<Self> {
        Self::large_system(PowerMode::Ipc, pd, pf, antennas, f64::INFINITY)
    }

    pub fn large_system_tpc(pd: f64, pf: f64, antennas: usize, snr: f64) -> Result<Self> {
        Self::large_system(PowerMode::Tpc, pd, pf, antennas, snr)
    }

    pub fn antennas(&self) -> usize {
        match self {
            MgfModel::FiniteK { config, .. } => config.antennas(),
            MgfModel::LargeSystem { antennas, .. } => *antennas,
        }
    }

    /// Bracket coefficients of the large-system kernel.
    fn large_system_pair(&self, h: Hypothesis) -> Option<(f64, f64)> {
        match self {
            MgfModel::LargeSystem { pd, pf, xi, .. } => {
                let p = if h == Hypothesis::H0 { *pf } else { *pd };
                Some((0.5 * (xi.plus - 2.0 * p), 0.5 * (xi.minus - 2.0 * p)))
            }
            MgfModel::FiniteK { .. } => None,
        }
    }

    pub fn count_law(&self, h: Hypothesis) -> Option<&CountLaw> {
        match self {
            MgfModel::FiniteK { laws, .. } => Some(&laws[h.index()]),
            MgfModel::LargeSystem { .. } => None,
        }
    }

    pub fn strip(&self, h: Hypothesis) -> ConvergenceStrip {
        convergence_strip(self, h)
    }

    pub fn mgf(&self, s: Complex64, h: Hypothesis) -> Result<Complex64> {
        match self {
            MgfModel::FiniteK { .. } => mgf_conditional(s, self, h),
            MgfModel::LargeSystem { .. } => mgf_large_system(s, self, h),
        }
    }

    pub fn moments(&self, h: Hypothesis) -> (f64, f64) {
        statistic_moments(self, h)
    }

    pub fn conditional(&self, h: Hypothesis) -> ConditionalMgf<'_> {
        ConditionalMgf { model: self, h }
    }
}

/// Channel-averaged MGF under one hypothesis: a `(K+1)`-term sum over the
/// count law. Fails outside the convergence strip.
pub fn mgf_conditional(s: Complex64, model: &MgfModel, h: Hypothesis) -> Result<Complex64> {
    let MgfModel::FiniteK { config, laws, .. } = model else {
        return Err(Error::Capability("mgf_conditional needs a finite-K model".into()));
    };
    convergence_strip(model, h).check(s)?;
    let (k, n, snr) = (config.sensors(), config.antennas(), config.total_snr());
    let mut acc = Complex64::new(0.0, 0.0);
    for (ell, p) in laws[h.index()].support() {
        acc += p * mgf_given_count(s, ell, k, n, snr)?;
    }
    Ok(acc)
}

/// Large-system MGF of the scaled statistic `Lambda / K`.
pub fn mgf_large_system(s: Complex64, model: &MgfModel, h: Hypothesis) -> Result<Complex64> {
    let Some((a, b)) = model.large_system_pair(h) else {
        return Err(Error::Capability("mgf_large_system needs a large-system model".into()));
    };
    bracket_kernel(s, a, b, model.antennas())
}

/// Region of convergence from pole enumeration over the counts carrying
/// mass. For a finite-K model it always contains the symmetric strip
/// `|Re(s)| < 2 / (K xi^+)`.
pub fn convergence_strip(model: &MgfModel, h: Hypothesis) -> ConvergenceStrip {
    match model {
        MgfModel::FiniteK { config, laws, .. } => laws[h.index()]
            .support()
            .map(|(ell, _)| count_strip(ell, config.sensors(), config.total_snr()))
            .fold(ConvergenceStrip::ALL, ConvergenceStrip::intersect),
        MgfModel::LargeSystem { .. } => {
            let (a, b) = model.large_system_pair(h).expect("large-system model");
            bracket_strip(a, b)
        }
    }
}

/// Mean and variance of the statistic under `h`. For large-system models
/// these refer to `Lambda / K`.
pub fn statistic_moments(model: &MgfModel, h: Hypothesis) -> (f64, f64) {
    match model {
        MgfModel::FiniteK { config, laws, .. } => {
            let m = count_moments(&laws[h.index()]);
            let k = config.sensors() as f64;
            let n = config.antennas() as f64;
            let snr = config.total_snr();
            let mean = 2.0 * n * m.mean - k * n;
            let var = k * k * n * (1.0 + 1.0 / (2.0 * snr)) - 2.0 * k * n * m.mean
                + 2.0 * n * m.second_moment
                + 4.0 * n * n * m.variance;
            (mean, var)
        }
        MgfModel::LargeSystem { antennas, .. } => {
            let (a, b) = model.large_system_pair(h).expect("large-system model");
            bracket_moments(a, b, *antennas)
        }
    }
}

/// The MGF of the statistic given a fixed count `ell`, as an invertible
/// MGF on its own (wider) strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountKernel {
    a: f64,
    b: f64,
    antennas: usize,
}

impl CountKernel {
    pub fn new(ell: usize, sensors: usize, antennas: usize, snr_total: f64) -> Self {
        let (a, b) = eigenvalues(sensors, ell, snr_total);
        Self { a, b, antennas }
    }

    /// Kernel of the large-system scaled statistic itself.
    pub fn from_pair(a: f64, b: f64, antennas: usize) -> Self {
        Self { a, b, antennas }
    }
}

impl Mgf for CountKernel {
    fn eval(&self, s: Complex64) -> Result<Complex64> {
        bracket_kernel(s, self.a, self.b, self.antennas)
    }

    fn strip(&self) -> ConvergenceStrip {
        bracket_strip(self.a, self.b)
    }

    fn moments(&self) -> (f64, f64) {
        bracket_moments(self.a, self.b, self.antennas)
    }
}

/// One hypothesis of a model, as an invertible MGF.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalMgf<'a> {
    model: &'a MgfModel,
    h: Hypothesis,
}

impl Mgf for ConditionalMgf<'_> {
    fn eval(&self, s: Complex64) -> Result<Complex64> {
        self.model.mgf(s, self.h)
    }

    fn strip(&self) -> ConvergenceStrip {
        self.model.strip(self.h)
    }

    fn moments(&self) -> (f64, f64) {
        self.model.moments(self.h)
    }
}

/// MGF of `factor * Lambda`, obtained by the substitution `s -> factor * s`.
/// With `factor = 1/K` this turns a finite-K model into the scaling of the
/// large-system limit.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M: Mgf> Mgf for Scaled<M> {
    fn eval(&self, s: Complex64) -> Result<Complex64> {
        self.inner.eval(s * self.factor)
    }

    fn strip(&self) -> ConvergenceStrip {
        let s = self.inner.strip();
        ConvergenceStrip {
            lo: s.lo / self.factor,
            hi: s.hi / self.factor,
        }
    }

    fn moments(&self) -> (f64, f64) {
        let (m, v) = self.inner.moments();
        (m * self.factor, v * self.factor * self.factor)
    }
}
