//! Caching policies, utility functions and their renewal-reward evaluation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::request_model::{DiscretizedModel, InterArrival};

/// Monotonicity violations up to this size are treated as rounding noise.
pub const SNAP_TOLERANCE: f64 = 1e-12;

/// Cached fraction as a step function of the time since the last request.
///
/// `fractions[k]` applies on `[kT, (k+1)T)` for `k < K` and `fractions[K]`
/// from `KT` onwards. Fractions are non-increasing and lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyRepr", into = "PolicyRepr")]
pub struct Policy {
    step: f64,
    fractions: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyRepr {
    #[serde(rename = "T")]
    step: f64,
    #[serde(rename = "K")]
    bins: usize,
    mu: Vec<f64>,
}

impl From<Policy> for PolicyRepr {
    fn from(p: Policy) -> Self {
        PolicyRepr { step: p.step, bins: p.bins(), mu: p.fractions }
    }
}

impl TryFrom<PolicyRepr> for Policy {
    type Error = Error;

    fn try_from(r: PolicyRepr) -> Result<Self> {
        if r.mu.len() != r.bins + 1 {
            return Err(Error::Shape(format!("K = {} but {} fractions", r.bins, r.mu.len())));
        }
        Policy::new(r.mu, r.step)
    }
}

impl Policy {
    /// Validates a fraction vector, snapping violations of at most
    /// [`SNAP_TOLERANCE`] back onto the constraint set.
    pub fn new(mut fractions: Vec<f64>, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("policy step must be positive, got {step}")));
        }
        if fractions.is_empty() {
            return Err(Error::invalid("policy needs at least one fraction"));
        }
        let mut prev = 1.0;
        for (k, mu) in fractions.iter_mut().enumerate() {
            if mu.is_nan() || *mu < -SNAP_TOLERANCE || *mu > prev + SNAP_TOLERANCE {
                return Err(Error::invalid(format!(
                    "fraction {mu} at k = {k} violates 1 >= mu_0 >= ... >= mu_K >= 0 (previous {prev})"
                )));
            }
            *mu = mu.clamp(0.0, prev);
            prev = *mu;
        }
        Ok(Self { step, fractions })
    }

    pub fn full(bins: usize, step: f64) -> Result<Self> {
        Self::new(vec![1.0; bins + 1], step)
    }

    pub fn empty(bins: usize, step: f64) -> Result<Self> {
        Self::new(vec![0.0; bins + 1], step)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn bins(&self) -> usize {
        self.fractions.len() - 1
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    /// Fraction cached `t` seconds after the last request.
    pub fn at(&self, t: f64) -> f64 {
        let k = (t / self.step).floor();
        if k >= self.bins() as f64 {
            self.fractions[self.bins()]
        } else {
            self.fractions[k.max(0.0) as usize]
        }
    }

    /// Serializes as CSV with header `k,t_start,mu`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t_start,mu\n");
        for (k, mu) in self.fractions.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", k, k as f64 * self.step, mu));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("k,t_start,mu") {
            return Err(Error::Parse("expected header `k,t_start,mu`".into()));
        }
        let mut starts = Vec::new();
        let mut fractions = Vec::new();
        for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {e}")));
            if cols.len() != 3 || cols[0] != row.to_string() {
                return Err(Error::Parse(format!("row {row}: expected `{row},t_start,mu`")));
            }
            starts.push(parse(cols[1])?);
            fractions.push(parse(cols[2])?);
        }
        let step = match starts.get(1) {
            Some(&s) => s,
            None => return Err(Error::Parse("policy CSV needs at least two rows".into())),
        };
        Policy::new(fractions, step)
    }
}

/// Fraction `nu` cached for bins `0..=cutoff`, nothing afterwards. A `None`
/// cutoff is the empty policy.
pub fn make_fractional(nu: f64, cutoff: Option<usize>, bins: usize, step: f64) -> Result<Policy> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::Domain { name: "nu", value: nu, domain: "[0, 1]" });
    }
    if let Some(l) = cutoff {
        if l > bins {
            return Err(Error::invalid(format!("cutoff {l} exceeds K = {bins}")));
        }
    }
    let fractions = (0..=bins)
        .map(|k| match cutoff {
            Some(l) if k <= l => nu,
            _ => 0.0,
        })
        .collect();
    Policy::new(fractions, step)
}

/// Whole-file TTL policy: cache everything for bins `0..=cutoff`.
pub fn make_ttl(cutoff: Option<usize>, bins: usize, step: f64) -> Result<Policy> {
    make_fractional(1.0, cutoff, bins, step)
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied strictly concave, increasing utility.
pub struct CustomUtility {
    value: ScalarFn,
    derivative: ScalarFn,
    inverse_derivative: ScalarFn,
    slope_at_one: f64,
    slope_at_zero: f64,
}

/// Per-request utility `w(mu)` of finding a fraction `mu` of the file cached.
#[derive(Clone)]
pub enum Utility {
    /// `w(mu) = mu^exponent` with `0 < exponent < 1`.
    Power {
        exponent: f64,
    },
    Custom(Arc<CustomUtility>),
}

impl fmt::Debug for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::Power { exponent } => write!(f, "Power({exponent})"),
            Utility::Custom(c) => write!(f, "Custom(w'(1) = {}, w'(0) = {})", c.slope_at_one, c.slope_at_zero),
        }
    }
}

impl Utility {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::invalid(format!("power utility needs 0 < p < 1 for strict concavity, got {exponent}")));
        }
        Ok(Utility::Power { exponent })
    }

    /// `w(mu) = sqrt(mu)`.
    pub fn sqrt() -> Self {
        Utility::Power { exponent: 0.5 }
    }

    /// Wraps a user-supplied utility.
    ///
    /// `inverse_derivative` must invert `derivative` on the open range
    /// `(w'(1), w'(0))`; `w'(0)` may be infinite. `w(0)` is whatever `value`
    /// returns at zero.
    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse_derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let slope_at_one = derivative(1.0);
        let slope_at_zero = derivative(0.0);
        if !(slope_at_one >= 0.0 && slope_at_zero > slope_at_one) || !value(0.0).is_finite() {
            return Err(Error::invalid("custom utility must be increasing and strictly concave with finite w(0)"));
        }
        for mu in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let y = derivative(mu);
            let back = derivative(inverse_derivative(y));
            if (back - y).abs() > 1e-10 * y.abs().max(1.0) {
                return Err(Error::invalid(format!("inverse derivative is inconsistent at mu = {mu}")));
            }
        }
        Ok(Utility::Custom(Arc::new(CustomUtility {
            value: Box::new(value),
            derivative: Box::new(derivative),
            inverse_derivative: Box::new(inverse_derivative),
            slope_at_one,
            slope_at_zero,
        })))
    }

    pub fn value(&self, mu: f64) -> f64 {
        match self {
            Utility::Power { exponent } => {
                if mu <= 0.0 {
                    0.0
                } else {
                    mu.powf(*exponent)
                }
            }
            Utility::Custom(c) => (c.value)(mu),
        }
    }

    /// `w'(mu)`; infinite at zero for the power family.
    pub fn derivative(&self, mu: f64) -> f64 {
        match self {
            Utility::Power { exponent } => {
                if mu <= 0.0 {
                    f64::INFINITY
                } else {
                    exponent * mu.powf(exponent - 1.0)
                }
            }
            Utility::Custom(c) => (c.derivative)(mu),
        }
    }

    /// The fraction at which the marginal utility equals `marginal`, clamped to
    /// `[0, 1]`: one when `marginal <= w'(1)`, zero when `marginal >= w'(0)`.
    pub fn fraction_for_marginal(&self, marginal: f64) -> f64 {
        match self {
            Utility::Power { exponent } => {
                if marginal <= *exponent {
                    1.0
                } else if marginal.is_infinite() {
                    0.0
                } else {
                    (marginal / exponent).powf(1.0 / (exponent - 1.0)).min(1.0)
                }
            }
            Utility::Custom(c) => {
                if marginal <= c.slope_at_one {
                    1.0
                } else if marginal >= c.slope_at_zero {
                    0.0
                } else {
                    (c.inverse_derivative)(marginal).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// The fraction whose utility is `target`, clamped to `[0, 1]`.
    pub fn inverse_value(&self, target: f64) -> f64 {
        match self {
            Utility::Power { exponent } => {
                if target <= 0.0 {
                    0.0
                } else {
                    target.powf(1.0 / exponent).min(1.0)
                }
            }
            Utility::Custom(_) => {
                if target <= self.value(0.0) {
                    return 0.0;
                }
                if target >= self.value(1.0) {
                    return 1.0;
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.value(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= f64::EPSILON {
                        break;
                    }
                }
                hi
            }
        }
    }
}

/// One file of the content library.
#[derive(Debug, Clone)]
pub struct FileSpec {
    pub size: f64,
    pub distribution: InterArrival,
    pub utility: Utility,
}

impl FileSpec {
    pub fn new(size: f64, distribution: InterArrival, utility: Utility) -> Result<Self> {
        if !(size > 0.0 && size.is_finite()) {
            return Err(Error::invalid(format!("file size must be positive, got {size}")));
        }
        Ok(Self { size, distribution, utility })
    }

    /// Weibull-requested file of unit exponent-`1/2` utility.
    pub fn weibull(shape: f64, rate: f64, size: f64) -> Result<Self> {
        Self::new(size, InterArrival::weibull(shape, rate)?, Utility::sqrt())
    }

    pub fn rate(&self) -> f64 {
        self.distribution.rate()
    }
}

/// How per-file utilities are combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FairnessRepr", into = "FairnessRepr")]
pub enum Fairness {
    /// `(1 - alpha)^{-1} sum_i W_i^{1 - alpha}` with `alpha >= 0`, `alpha != 1`.
    Alpha(f64),
    /// Lexicographic max-min, the `alpha -> ∞` limit.
    MaxMin,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FairnessRepr {
    Alpha(f64),
    Name(String),
}

impl From<Fairness> for FairnessRepr {
    fn from(f: Fairness) -> Self {
        match f {
            Fairness::Alpha(a) => FairnessRepr::Alpha(a),
            Fairness::MaxMin => FairnessRepr::Name("max-min".into()),
        }
    }
}

impl TryFrom<FairnessRepr> for Fairness {
    type Error = Error;

    fn try_from(r: FairnessRepr) -> Result<Self> {
        match r {
            FairnessRepr::Alpha(a) => Fairness::alpha(a),
            FairnessRepr::Name(s) => s.parse(),
        }
    }
}

impl std::str::FromStr for Fairness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max-min" | "maxmin" | "inf" | "infinity" => Ok(Fairness::MaxMin),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("fairness `{s}` is neither a number nor `max-min`")))
                .and_then(Fairness::alpha),
        }
    }
}

impl fmt::Display for Fairness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fairness::Alpha(a) => write!(f, "{a}"),
            Fairness::MaxMin => f.write_str("max-min"),
        }
    }
}

impl Fairness {
    pub fn alpha(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("fairness alpha must be finite and >= 0, got {alpha}")));
        }
        if (alpha - 1.0).abs() < 1e-12 {
            return Err(Error::UnsupportedFairness);
        }
        Ok(Fairness::Alpha(alpha))
    }

    /// Per-file term `W^{1-alpha} / (1 - alpha)`; `-∞` at `W = 0` when `alpha > 1`.
    pub(crate) fn term(alpha: f64, w: f64) -> f64 {
        if alpha == 0.0 {
            w
        } else if w <= 0.0 {
            if alpha > 1.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        } else {
            w.powf(1.0 - alpha) / (1.0 - alpha)
        }
    }
}

/// Alpha-fair aggregate of per-file utilities. Max-min fairness reports the
/// smallest utility.
pub fn aggregate_utility(utilities: &[f64], fairness: Fairness) -> Result<f64> {
    match fairness {
        Fairness::MaxMin => Ok(utilities.iter().copied().fold(f64::INFINITY, f64::min)),
        Fairness::Alpha(alpha) => {
            if (alpha - 1.0).abs() < 1e-12 {
                return Err(Error::UnsupportedFairness);
            }
            if alpha > 1.0 && utilities.iter().any(|&w| w <= 0.0) {
                return Err(Error::Divergence(format!(
                    "a file with zero utility sends the alpha = {alpha} objective to -inf"
                )));
            }
            Ok(utilities.iter().map(|&w| Fairness::term(alpha, w)).sum())
        }
    }
}

/// Long-run utility rate and average occupancy of one file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FileEval {
    /// Utility per unit time, `W = λ Σ w(mu_k) F_k`.
    pub utility: f64,
    /// Average cached size, `C = λ s Σ mu_k A_k`.
    pub occupancy: f64,
}

pub(crate) fn raw_utility(fractions: &[f64], mass: &[f64], utility: &Utility) -> f64 {
    fractions.iter().zip(mass).map(|(&mu, &f)| if f > 0.0 { utility.value(mu) * f } else { 0.0 }).sum()
}

pub(crate) fn raw_occupancy(fractions: &[f64], dwell: &[f64]) -> f64 {
    fractions.iter().zip(dwell).map(|(mu, a)| mu * a).sum()
}

/// Renewal-reward evaluation of a policy against a discretized file model.
pub fn evaluate_file(policy: &Policy, model: &DiscretizedModel, utility: &Utility, size: f64) -> Result<FileEval> {
    if policy.bins() != model.bins() || (policy.step() - model.step()).abs() > 1e-12 * model.step() {
        return Err(Error::Shape(format!(
            "policy grid (T = {}, K = {}) does not match model grid (T = {}, K = {})",
            policy.step(),
            policy.bins(),
            model.step(),
            model.bins()
        )));
    }
    let rate = model.rate();
    Ok(FileEval {
        utility: rate * raw_utility(policy.fractions(), model.arrival_mass(), utility),
        occupancy: rate * size * raw_occupancy(policy.fractions(), model.dwell_time()),
    })
}

/// A multi-file caching problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub files: Vec<FileSpec>,
    /// Average cache capacity shared by all files.
    pub capacity: f64,
    pub fairness: Fairness,
    /// Policy step `T`.
    pub step: f64,
    /// Number of steps `K`.
    pub bins: usize,
}

impl Instance {
    /// A capacity of zero is accepted and yields empty policies.
    pub fn new(files: Vec<FileSpec>, capacity: f64, fairness: Fairness, step: f64, bins: usize) -> Result<Self> {
        if files.is_empty() {
            return Err(Error::invalid("instance needs at least one file"));
        }
        if !(capacity >= 0.0 && capacity.is_finite()) {
            return Err(Error::invalid(format!("capacity must be finite and >= 0, got {capacity}")));
        }
        if let Fairness::Alpha(a) = fairness {
            Fairness::alpha(a)?;
        }
        if !(step > 0.0 && step.is_finite()) || bins < 1 {
            return Err(Error::invalid(format!("invalid grid T = {step}, K = {bins}")));
        }
        Ok(Self { files, capacity, fairness, step, bins })
    }

    pub fn with_fairness(&self, fairness: Fairness) -> Result<Self> {
        Self::new(self.files.clone(), self.capacity, fairness, self.step, self.bins)
    }

    pub fn with_capacity(&self, capacity: f64) -> Result<Self> {
        Self::new(self.files.clone(), capacity, self.fairness, self.step, self.bins)
    }

    /// Discretizes every file on the instance grid.
    pub fn models(&self) -> Result<Vec<DiscretizedModel>> {
        self.files.iter().map(|f| f.distribution.discretize(self.step, self.bins)).collect()
    }

    /// Capacity needed to cache every file in full.
    pub fn total_size(&self) -> f64 {
        self.files.iter().map(|f| f.size).sum()
    }
}
