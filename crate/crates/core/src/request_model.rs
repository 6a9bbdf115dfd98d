//! Inter-request time distributions and their discretized request statistics.
//!
//! Every file is requested according to a renewal process whose inter-arrival
//! law is an [`InterArrival`]. A caching policy only changes value on a grid of
//! width `T` for `K` steps, so everything the optimizers need is captured by
//! two arrays per file (see [`DiscretizedModel`]):
//!
//! * the *arrival mass* `F_k`, the probability that the next request lands in
//!   bin `k`, and
//! * the *dwell time* `A_k`, the expected time the age of the last request
//!   spends in bin `k` before the next request.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance for the per-bin survival integrals.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;

/// Remaining tail mass below which `A_K` is integrated directly instead of
/// being taken from the mean identity.
const TAIL_DIRECT_THRESHOLD: f64 = 1e-10;

/// Weibull inter-arrival law `F(t) = 1 - exp(-(t/scale)^shape)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weibull {
    shape: f64,
    scale: f64,
}

impl Weibull {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::invalid(format!("Weibull shape must be positive, got {shape}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("Weibull scale must be positive, got {scale}")));
        }
        if shape > 1.0 {
            log::warn!("Weibull shape {shape} > 1 gives an increasing hazard");
        }
        Ok(Self { shape, scale })
    }

    /// Weibull law with the given shape whose mean inter-arrival time is `1/rate`.
    pub fn from_rate(shape: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("request rate must be positive, got {rate}")));
        }
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::invalid(format!("Weibull shape must be positive, got {shape}")));
        }
        Self::new(shape, 1.0 / (rate * gamma(1.0 + 1.0 / shape)))
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn log_survival(&self, t: f64) -> f64 {
        -(t / self.scale).powf(self.shape)
    }

    /// Point beyond which the survival function underflows.
    fn negligible_tail(&self) -> f64 {
        self.scale * 745.0f64.powf(1.0 / self.shape)
    }
}

/// Inter-arrival law given as a dense CDF table with linear interpolation.
///
/// The table starts at `t = 0` with `F = 0` and ends with `F = 1`, so the
/// support is bounded by the last abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    t: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
}

impl CdfTable {
    pub fn new(t: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if t.len() != cdf.len() || t.len() < 2 {
            return Err(Error::invalid("CDF table needs at least two matching (t, F) points"));
        }
        if t[0] != 0.0 || cdf[0] != 0.0 {
            return Err(Error::invalid("CDF table must start at t = 0 with F = 0"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::invalid("CDF table abscissae must be finite and strictly increasing"));
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) || cdf.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
            return Err(Error::invalid("CDF table values must be non-decreasing within [0, 1]"));
        }
        if (cdf[cdf.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("CDF table must end with F = 1"));
        }
        let mut cdf = cdf;
        *cdf.last_mut().unwrap() = 1.0;
        let mean = t
            .windows(2)
            .zip(cdf.windows(2))
            .map(|(tw, fw)| 0.5 * (tw[1] - tw[0]) * ((1.0 - fw[0]) + (1.0 - fw[1])))
            .sum();
        if !(mean > 0.0) {
            return Err(Error::invalid("CDF table has zero mean"));
        }
        Ok(Self { t, cdf, mean })
    }

    fn segment(&self, t: f64) -> Option<usize> {
        if t >= self.t[self.t.len() - 1] {
            None
        } else {
            Some(self.t.partition_point(|&x| x <= t) - 1)
        }
    }

    fn cdf_at(&self, t: f64) -> f64 {
        match self.segment(t) {
            None => 1.0,
            Some(i) => {
                let w = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
                self.cdf[i] + w * (self.cdf[i + 1] - self.cdf[i])
            }
        }
    }

    /// Exact integral of the piecewise linear survival function over `[x, y]`.
    fn survival_integral(&self, x: f64, y: f64) -> f64 {
        let end = self.t[self.t.len() - 1];
        let (x, y) = (x.min(end), y.min(end));
        if y <= x {
            return 0.0;
        }
        let mut total = 0.0;
        let mut lo = x;
        while lo < y {
            let i = self.segment(lo).expect("lo is inside the support");
            let hi = self.t[i + 1].min(y);
            let s_lo = 1.0 - self.cdf_at(lo);
            let s_hi = 1.0 - self.cdf_at(hi);
            total += 0.5 * (hi - lo) * (s_lo + s_hi);
            lo = hi;
        }
        total
    }
}

/// Law of the time between two consecutive requests for one file.
#[derive(Debug, Clone, PartialEq)]
pub enum InterArrival {
    Weibull(Weibull),
    Table(CdfTable),
}

impl InterArrival {
    /// Weibull law parameterized by its shape and request rate.
    pub fn weibull(shape: f64, rate: f64) -> Result<Self> {
        Weibull::from_rate(shape, rate).map(Self::Weibull)
    }

    /// Memoryless arrivals. This is exactly the Weibull law with shape 1.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::weibull(1.0, rate)
    }

    pub fn cdf_table(t: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        CdfTable::new(t, cdf).map(Self::Table)
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Weibull(w) => w.scale * gamma(1.0 + 1.0 / w.shape),
            Self::Table(tab) => tab.mean,
        }
    }

    /// Request rate `1 / mean`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self {
            Self::Weibull(w) => -f64::exp_m1(w.log_survival(t)),
            Self::Table(tab) => tab.cdf_at(t),
        })
    }

    /// `1 - F(t)`, evaluated without cancellation for the Weibull law.
    pub fn survival(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.survival_unchecked(t))
    }

    fn survival_unchecked(&self, t: f64) -> f64 {
        match self {
            Self::Weibull(w) => w.log_survival(t).exp(),
            Self::Table(tab) => 1.0 - tab.cdf_at(t),
        }
    }

    /// Hazard `h(t) = F'(t) / (1 - F(t))`.
    ///
    /// The Weibull hazard `a b^{-a} t^{a-1}` diverges at `t = 0` when the
    /// shape is below one, so `t = 0` is rejected in that case. A table's hazard
    /// uses the right derivative and is infinite once the survival reaches zero.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        match self {
            Self::Weibull(w) => {
                if t == 0.0 {
                    return match w.shape {
                        a if a < 1.0 => Err(Error::Domain {
                            name: "t",
                            value: t,
                            domain: "(0, inf): hazard diverges at 0 for shape < 1",
                        }),
                        1.0 => Ok(1.0 / w.scale),
                        _ => Ok(0.0),
                    };
                }
                Ok(w.shape / w.scale * (t / w.scale).powf(w.shape - 1.0))
            }
            Self::Table(tab) => match tab.segment(t) {
                None => Ok(f64::INFINITY),
                Some(i) => {
                    let slope = (tab.cdf[i + 1] - tab.cdf[i]) / (tab.t[i + 1] - tab.t[i]);
                    let surv = 1.0 - tab.cdf_at(t);
                    Ok(if surv > 0.0 { slope / surv } else { f64::INFINITY })
                }
            },
        }
    }

    /// Inverse-CDF transform of a uniform variate `u` in `[0, 1)`.
    pub fn sample_interarrival(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain { name: "u", value: u, domain: "[0, 1)" });
        }
        Ok(self.quantile(u))
    }

    fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Weibull(w) => w.scale * (-f64::ln_1p(-u)).powf(1.0 / w.shape),
            Self::Table(tab) => {
                let j = tab.cdf.partition_point(|&f| f <= u);
                let j = j.clamp(1, tab.cdf.len() - 1);
                let (f0, f1) = (tab.cdf[j - 1], tab.cdf[j]);
                let w = if f1 > f0 { (u - f0) / (f1 - f0) } else { 0.0 };
                tab.t[j - 1] + w * (tab.t[j] - tab.t[j - 1])
            }
        }
    }

    /// Draws one inter-arrival time from the caller's generator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `∫_x^y (1 - F(t)) dt` for `0 <= x <= y < ∞`.
    pub fn survival_integral(&self, x: f64, y: f64) -> Result<f64> {
        check_time(x)?;
        if !(y >= x && y.is_finite()) {
            return Err(Error::invalid(format!("survival integral bounds [{x}, {y}]")));
        }
        match self {
            Self::Weibull(w) => {
                let cut = w.negligible_tail();
                if x >= cut {
                    return Ok(0.0);
                }
                let r = quadrature::integrate(|t| self.survival_unchecked(t), x, y.min(cut), QUADRATURE_TOLERANCE)?;
                Ok(r.value.max(0.0))
            }
            Self::Table(tab) => Ok(tab.survival_integral(x, y)),
        }
    }

    /// `∫_x^∞ (1 - F(t)) dt`, integrated directly.
    pub fn tail_integral(&self, x: f64) -> Result<f64> {
        check_time(x)?;
        match self {
            Self::Weibull(w) => self.survival_integral(x, x.max(w.negligible_tail())),
            Self::Table(tab) => Ok(tab.survival_integral(x, f64::INFINITY)),
        }
    }

    /// Computes the per-bin arrival masses and dwell times for a policy grid of
    /// `bins` steps of width `step`.
    ///
    /// The last bin collects everything from `bins * step` onwards; its dwell
    /// time is the mean minus the finite bins, so the dwell times add up to the
    /// mean inter-arrival time.
    pub fn discretize(&self, step: f64, bins: usize) -> Result<DiscretizedModel> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("step T must be positive, got {step}")));
        }
        if bins < 1 {
            return Err(Error::invalid("number of steps K must be at least 1"));
        }
        let survival: Vec<f64> = (0..=bins).map(|k| self.survival_unchecked(k as f64 * step)).collect();
        let mut mass: Vec<f64> = survival.windows(2).map(|w| (w[0] - w[1]).max(0.0)).collect();
        mass.push(survival[bins]);

        let mut dwell = Vec::with_capacity(bins + 1);
        for k in 0..bins {
            dwell.push(self.survival_integral(k as f64 * step, (k + 1) as f64 * step)?);
        }
        let mean = self.mean();
        let finite: f64 = dwell.iter().sum();
        let rest = mean - finite;
        let tail = if rest > TAIL_DIRECT_THRESHOLD { rest } else { self.tail_integral(bins as f64 * step)? };
        if rest < -1e-8 {
            return Err(Error::numerical(format!("binned survival integrals exceed the mean by {:e}", -rest)));
        }
        dwell.push(tail);

        Ok(DiscretizedModel { step, mass, dwell, rate: 1.0 / mean })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain { name: "t", value: t, domain: "[0, inf)" })
    }
}

/// Per-bin request statistics of one file on a policy grid.
///
/// For `k < K`, `mass[k] = F((k+1)T) - F(kT)` and
/// `dwell[k] = ∫_{kT}^{(k+1)T} (1 - F)`; index `K` holds the tail from `KT`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedModel {
    step: f64,
    mass: Vec<f64>,
    dwell: Vec<f64>,
    rate: f64,
}

impl DiscretizedModel {
    /// Builds a model from raw arrays, checking the probability and mean identities.
    pub fn from_parts(step: f64, mass: Vec<f64>, dwell: Vec<f64>, rate: f64) -> Result<Self> {
        if mass.len() != dwell.len() || mass.len() < 2 {
            return Err(Error::Shape(format!(
                "mass ({}) and dwell ({}) must have the same length K+1 >= 2",
                mass.len(),
                dwell.len()
            )));
        }
        if !(step > 0.0) || !(rate > 0.0) {
            return Err(Error::invalid("step and rate must be positive"));
        }
        if mass.iter().chain(&dwell).any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("mass and dwell entries must be finite and non-negative"));
        }
        let total: f64 = mass.iter().sum();
        let time: f64 = dwell.iter().sum();
        if (total - 1.0).abs() > 1e-9 || (time * rate - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "masses must sum to 1 (got {total}) and dwell times to 1/rate (got {time})"
            )));
        }
        Ok(Self { step, mass, dwell, rate })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of steps `K`; the arrays have `K + 1` entries.
    pub fn bins(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn arrival_mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn dwell_time(&self) -> &[f64] {
        &self.dwell
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `A_k / F_k` per bin, `+∞` where the arrival mass vanishes.
    ///
    /// As `T → 0` the ratio at bin `k` tends to `1 / h(kT)`.
    pub fn hazard_ratio_profile(&self) -> Vec<f64> {
        self.mass.iter().zip(&self.dwell).map(|(&f, &a)| if f > 0.0 { a / f } else { f64::INFINITY }).collect()
    }
}

/// Rough shape of a hazard-ratio profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Hazard collapses right after a request; plain TTL is close to optimal.
    Bursty,
    /// Constant hazard; a constant fraction is optimal.
    Memoryless,
    Intermediate,
}

/// Bins over which a bursty profile must show its rise.
pub const BURSTY_WINDOW: usize = 3;
/// Minimum rise of `A_k/F_k` over the first [`BURSTY_WINDOW`] bins for a bursty profile.
pub const BURSTY_RISE_FACTOR: f64 = 10.0;

/// Advisory classification of the arrival regime from its ratio profile.
///
/// Memoryless when the finite ratios vary by less than `tolerance` relative to
/// the smallest; bursty when the ratio grows by more than
/// [`BURSTY_RISE_FACTOR`] within the first [`BURSTY_WINDOW`] bins.
pub fn classify_regime(model: &DiscretizedModel, tolerance: f64) -> Regime {
    let ratios: Vec<f64> = model.hazard_ratio_profile().into_iter().filter(|r| r.is_finite()).collect();
    if ratios.is_empty() {
        return Regime::Intermediate;
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min > 0.0 && (max - min) / min < tolerance {
        return Regime::Memoryless;
    }
    let window = BURSTY_WINDOW.min(ratios.len() - 1);
    if ratios[0] > 0.0 && ratios[window] / ratios[0] > BURSTY_RISE_FACTOR {
        Regime::Bursty
    } else {
        Regime::Intermediate
    }
}

/// Distribution description used in configuration files.
///
/// ```json
/// { "kind": "weibull", "shape": 0.7, "rate": 1.0 }
/// { "kind": "cdf_table", "t": [0, 1, 2], "F": [0, 0.5, 1] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Weibull {
        shape: f64,
        rate: f64,
    },
    Exponential {
        rate: f64,
    },
    CdfTable {
        t: Vec<f64>,
        #[serde(rename = "F")]
        cdf: Vec<f64>,
    },
}

impl TryFrom<&DistributionSpec> for InterArrival {
    type Error = Error;

    fn try_from(spec: &DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Weibull { shape, rate } => InterArrival::weibull(*shape, *rate),
            DistributionSpec::Exponential { rate } => InterArrival::exponential(*rate),
            DistributionSpec::CdfTable { t, cdf } => InterArrival::cdf_table(t.clone(), cdf.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weibull_scale_from_rate() {
        let w = Weibull::from_rate(1.0, 1.0).unwrap();
        assert_relative_eq!(w.scale(), 1.0, epsilon = 1e-14);
        let w = Weibull::from_rate(0.5, 1.0).unwrap();
        assert_relative_eq!(w.scale(), 0.5, epsilon = 1e-13);
        assert!(Weibull::from_rate(0.0, 1.0).is_err());
        assert!(Weibull::from_rate(0.7, -1.0).is_err());
    }

    #[test]
    fn mean_times_rate_is_one() {
        for &(a, rate) in &[(0.1, 1.0), (0.7, 3.0), (1.0, 0.5), (2.5, 4.0)] {
            let d = InterArrival::weibull(a, rate).unwrap();
            assert_relative_eq!(d.mean() * rate, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn exponential_is_unit_shape_weibull() {
        let e = InterArrival::exponential(2.0).unwrap();
        assert_eq!(e, InterArrival::weibull(1.0, 2.0).unwrap());
        assert_relative_eq!(e.hazard(0.0).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(e.hazard(7.3).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cdf_values_and_domain() {
        let e = InterArrival::exponential(1.0).unwrap();
        assert_eq!(e.cdf(0.0).unwrap(), 0.0);
        assert_relative_eq!(e.cdf(1.0).unwrap(), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert!(e.cdf(-0.1).is_err());
        assert!(e.survival(f64::NAN).is_err());
    }

    #[test]
    fn hazard_examples() {
        let d = InterArrival::Weibull(Weibull::new(1.0, 2.0).unwrap());
        assert_relative_eq!(d.hazard(3.0).unwrap(), 0.5, epsilon = 1e-15);
        let d = InterArrival::Weibull(Weibull::new(0.7, 1.0).unwrap());
        assert_relative_eq!(d.hazard(1.0).unwrap(), 0.7, epsilon = 1e-15);
        assert!(d.hazard(0.0).is_err());
        let hs: Vec<f64> = (1..20).map(|i| d.hazard(i as f64 * 0.25).unwrap()).collect();
        assert!(hs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn sampling_inverts_cdf() {
        let e = InterArrival::exponential(1.0).unwrap();
        let u = 1.0 - (-1.0f64).exp();
        assert_relative_eq!(e.sample_interarrival(u).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(e.sample_interarrival(0.0).unwrap(), 0.0);
        assert!(e.sample_interarrival(1.0).is_err());
        assert!(e.sample_interarrival(-1e-3).is_err());
    }

    #[test]
    fn exponential_discretization_closed_form() {
        let m = InterArrival::exponential(1.0).unwrap().discretize(std::f64::consts::LN_2, 2).unwrap();
        for (got, want) in m.arrival_mass().iter().zip([0.5, 0.25, 0.25]) {
            assert_relative_eq!(*got, want, epsilon = 1e-15);
        }
        for (got, want) in m.dwell_time().iter().zip([0.5, 0.25, 0.25]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        let ratios = m.hazard_ratio_profile();
        assert!(ratios.iter().all(|r| (r - 1.0).abs() < 1e-10));
    }

    #[test]
    fn discretize_rejects_bad_grid() {
        let e = InterArrival::exponential(1.0).unwrap();
        assert!(e.discretize(0.0, 4).is_err());
        assert!(e.discretize(0.1, 0).is_err());
    }

    #[test]
    fn thin_tail_uses_direct_integral() {
        let e = InterArrival::exponential(5.0).unwrap();
        let m = e.discretize(1.0, 200).unwrap();
        let tail = m.dwell_time()[200];
        assert!((0.0..1e-10).contains(&tail));
        let total: f64 = m.dwell_time().iter().sum();
        assert!((total - 0.2).abs() < 1e-9);
    }

    #[test]
    fn cdf_table_roundtrip() {
        // Uniform on [0, 2]: mean 1, F_k = 1/4 on a grid of width 0.5.
        let d = InterArrival::cdf_table(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.0]).unwrap();
        assert_relative_eq!(d.mean(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.cdf(0.5).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(d.sample_interarrival(0.25).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(d.hazard(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(d.hazard(2.0).unwrap(), f64::INFINITY);
        let m = d.discretize(0.5, 6).unwrap();
        assert_eq!(m.arrival_mass()[5], 0.0);
        assert_eq!(m.hazard_ratio_profile()[6], f64::INFINITY);
        let total: f64 = m.dwell_time().iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cdf_table_validation() {
        assert!(InterArrival::cdf_table(vec![0.0, 1.0], vec![0.0, 0.9]).is_err());
        assert!(InterArrival::cdf_table(vec![0.5, 1.0], vec![0.0, 1.0]).is_err());
        assert!(InterArrival::cdf_table(vec![0.0, 1.0, 1.0], vec![0.0, 0.5, 1.0]).is_err());
        assert!(InterArrival::cdf_table(vec![0.0, 1.0, 2.0], vec![0.0, 0.6, 0.5]).is_err());
    }

    #[test]
    fn regimes() {
        let model = |a: f64| InterArrival::weibull(a, 1.0).unwrap().discretize(0.03, 100).unwrap();
        assert_eq!(classify_regime(&model(1.0), 1e-6), Regime::Memoryless);
        assert_eq!(classify_regime(&model(0.1), 1e-6), Regime::Bursty);
        assert_eq!(classify_regime(&model(0.7), 1e-6), Regime::Intermediate);
    }

    #[test]
    fn spec_deserializes() {
        let s: DistributionSpec = serde_json::from_str(r#"{ "kind": "weibull", "shape": 0.7, "rate": 1.0 }"#).unwrap();
        let d = InterArrival::try_from(&s).unwrap();
        assert_relative_eq!(d.rate(), 1.0, epsilon = 1e-12);
        let s: DistributionSpec =
            serde_json::from_str(r#"{ "kind": "cdf_table", "t": [0, 1, 2], "F": [0, 0.5, 1] }"#).unwrap();
        assert!(matches!(InterArrival::try_from(&s).unwrap(), InterArrival::Table(_)));
    }
}
