//! Monte-Carlo check of the renewal-reward formulas.
//!
//! Requests arrive at `τ(0) = 0 < τ(1) < …`. Each request at `τ(n)` earns
//! `w(μ(τ(n) − τ(n−1)))`, and between requests the cache holds
//! `s · μ(t − τ(n−1))`. Both long-run averages are computed exactly for a
//! given trace; only the trace itself is random.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{evaluate_file, FileEval, FileSpec, Policy, Utility};
use crate::request_model::InterArrival;

/// Request times of one file on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    times: Vec<f64>,
    horizon: f64,
}

impl Trace {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("trace horizon must be positive, got {horizon}")));
        }
        if times.first() != Some(&0.0) {
            return Err(Error::invalid("a trace starts with a request at time 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("request times must be strictly increasing"));
        }
        if times[times.len() - 1] > horizon {
            return Err(Error::invalid("request after the trace horizon"));
        }
        Ok(Self { times, horizon })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Requests after time zero.
    pub fn arrivals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,tau\n");
        for (n, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{n},{t}\n"));
        }
        out
    }
}

/// Generator for replication `stream` of a run seeded with `seed`.
///
/// Every replication gets its own ChaCha stream of the same key, so workers
/// never share a generator and results do not depend on scheduling.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn next_gap(dist: &InterArrival, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x = dist.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

/// Renewal trace on `[0, horizon]`; the first arrival after the horizon is
/// dropped.
///
/// ```
/// use softttl::InterArrival;
/// use softttl::simulator::generate_trace;
///
/// let d = InterArrival::exponential(1.0)?;
/// let a = generate_trace(&d, 100.0, 7)?;
/// assert_eq!(a, generate_trace(&d, 100.0, 7)?);
/// assert_eq!(a.times()[0], 0.0);
/// # Ok::<(), softttl::Error>(())
/// ```
pub fn generate_trace(dist: &InterArrival, horizon: f64, seed: u64) -> Result<Trace> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("trace horizon must be positive, got {horizon}")));
    }
    let mut rng = replication_rng(seed, 0);
    let mut times = vec![0.0];
    let mut t = 0.0;
    loop {
        let next = t + next_gap(dist, &mut rng);
        if next > horizon {
            break;
        }
        if next > t {
            times.push(next);
        }
        t = next;
    }
    Trace::new(times, horizon)
}

/// `∫_0^x μ(t) dt` for a piecewise-constant policy.
pub fn occupied_time(policy: &Policy, x: f64) -> f64 {
    Lookup::new(policy, None).held(x)
}

/// Per-bin rewards and cumulative holding times of one policy.
struct Lookup<'a> {
    policy: &'a Policy,
    rewards: Vec<f64>,
    /// `prefix[k] = T Σ_{j<k} μ_j`.
    prefix: Vec<f64>,
}

impl<'a> Lookup<'a> {
    fn new(policy: &'a Policy, utility: Option<&Utility>) -> Self {
        let step = policy.step();
        let mut prefix = Vec::with_capacity(policy.bins() + 1);
        let mut acc = 0.0;
        for &mu in policy.fractions() {
            prefix.push(acc);
            acc += mu * step;
        }
        let rewards = utility.map_or_else(Vec::new, |u| policy.fractions().iter().map(|&mu| u.value(mu)).collect());
        Self { policy, rewards, prefix }
    }

    fn bin(&self, x: f64) -> usize {
        let k = (x / self.policy.step()).floor();
        if k >= self.policy.bins() as f64 {
            self.policy.bins()
        } else {
            k as usize
        }
    }

    fn reward(&self, gap: f64) -> f64 {
        self.rewards[self.bin(gap)]
    }

    fn held(&self, x: f64) -> f64 {
        let k = self.bin(x);
        self.prefix[k] + self.policy.fractions()[k] * (x - k as f64 * self.policy.step())
    }
}

/// Long-run averages measured on one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResult {
    /// Utility per unit time.
    pub utility: f64,
    /// Average cached size.
    pub occupancy: f64,
    pub arrivals: usize,
    /// Regenerative (ratio-estimator) standard errors.
    pub utility_se: f64,
    pub occupancy_se: f64,
}

/// Per-cycle sums for the regenerative estimators.
#[derive(Default)]
struct Cycles {
    n: usize,
    length: f64,
    length_sq: f64,
    reward: f64,
    reward_sq: f64,
    reward_length: f64,
    held: f64,
    held_sq: f64,
    held_length: f64,
}

impl Cycles {
    fn push(&mut self, x: f64, reward: f64, held: f64) {
        self.n += 1;
        self.length += x;
        self.length_sq += x * x;
        self.reward += reward;
        self.reward_sq += reward * reward;
        self.reward_length += reward * x;
        self.held += held;
        self.held_sq += held * held;
        self.held_length += held * x;
    }

    /// Standard error of `Σ y / Σ x` from the per-cycle residuals `y − r x`.
    fn ratio_se(&self, ratio: f64, sum_sq: f64, cross: f64) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let residual = (sum_sq - 2.0 * ratio * cross + ratio * ratio * self.length_sq).max(0.0) / (n - 1.0);
        residual.sqrt() / (self.length / n) / n.sqrt()
    }

    fn finish(&self, horizon: f64, tail_held: f64, size: f64) -> EmpiricalResult {
        if self.n == 0 {
            warn!("trace has no request after time zero; utility reported as zero");
        }
        let utility = self.reward / horizon;
        let occupancy = size * (self.held + tail_held) / horizon;
        let (r_w, r_c) =
            if self.length > 0.0 { (self.reward / self.length, self.held / self.length) } else { (0.0, 0.0) };
        EmpiricalResult {
            utility,
            occupancy,
            arrivals: self.n,
            utility_se: self.ratio_se(r_w, self.reward_sq, self.reward_length),
            occupancy_se: size * self.ratio_se(r_c, self.held_sq, self.held_length),
        }
    }
}

/// `(1/t_end) Σ_n w(μ(τ(n) − τ(n−1)))`.
pub fn empirical_utility(policy: &Policy, trace: &Trace, utility: &Utility) -> f64 {
    empirical(policy, trace, utility, 1.0).utility
}

/// `(s/t_end) ∫_0^{t_end} μ(t − τ(N(t))) dt`, integrated exactly.
pub fn empirical_occupancy(policy: &Policy, trace: &Trace, size: f64) -> f64 {
    let lookup = Lookup::new(policy, None);
    let times = trace.times();
    let held: f64 = times.windows(2).map(|w| lookup.held(w[1] - w[0])).sum();
    let tail = lookup.held(trace.horizon() - times[times.len() - 1]);
    size * (held + tail) / trace.horizon()
}

/// Utility and occupancy of one trace with standard errors.
pub fn empirical(policy: &Policy, trace: &Trace, utility: &Utility, size: f64) -> EmpiricalResult {
    let lookup = Lookup::new(policy, Some(utility));
    let mut cycles = Cycles::default();
    for w in trace.times().windows(2) {
        let gap = w[1] - w[0];
        cycles.push(gap, lookup.reward(gap), lookup.held(gap));
    }
    let times = trace.times();
    let tail = lookup.held(trace.horizon() - times[times.len() - 1]);
    cycles.finish(trace.horizon(), tail, size)
}

/// Simulates one replication without storing the trace.
pub fn simulate(
    dist: &InterArrival,
    policy: &Policy,
    utility: &Utility,
    size: f64,
    horizon: f64,
    rng: &mut ChaCha8Rng,
) -> EmpiricalResult {
    let lookup = Lookup::new(policy, Some(utility));
    let mut cycles = Cycles::default();
    let mut t = 0.0;
    loop {
        let gap = next_gap(dist, rng);
        if t + gap > horizon {
            break;
        }
        cycles.push(gap, lookup.reward(gap), lookup.held(gap));
        t += gap;
    }
    cycles.finish(horizon, lookup.held(horizon - t), size)
}

/// Replicated estimate compared against the analytic value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub analytic: f64,
    pub mean: f64,
    /// Standard error of the mean across replications.
    pub standard_error: f64,
    /// `(mean − analytic) / standard_error`, zero when both agree to
    /// rounding and the estimate has no spread.
    pub z: f64,
    pub relative_error: f64,
}

impl Estimate {
    fn new(analytic: f64, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var =
            if samples.len() > 1 { samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let standard_error = (var / n).sqrt();
        let diff = mean - analytic;
        let floor = 1e-12 * analytic.abs().max(mean.abs());
        let z = if diff.abs() <= floor { 0.0 } else { diff / standard_error.max(floor) };
        let relative_error = if analytic != 0.0 { diff / analytic } else { diff };
        Self { analytic, mean, standard_error, z, relative_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub replications: usize,
    pub horizon: f64,
    pub seed: u64,
    pub analytic: FileEval,
    pub utility: Estimate,
    pub occupancy: Estimate,
    pub mean_arrivals: f64,
    pub runs: Vec<EmpiricalResult>,
}

impl ValidationReport {
    pub fn max_abs_z(&self) -> f64 {
        self.utility.z.abs().max(self.occupancy.z.abs())
    }
}

/// Compares the analytic utility and occupancy of `policy` with independent
/// simulated replications.
pub fn validate_lemma1(
    file: &FileSpec,
    policy: &Policy,
    replications: usize,
    horizon: f64,
    seed: u64,
) -> Result<ValidationReport> {
    if replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("trace horizon must be positive, got {horizon}")));
    }
    let model = file.distribution.discretize(policy.step(), policy.bins())?;
    let analytic = evaluate_file(policy, &model, &file.utility, file.size)?;
    let runs: Vec<EmpiricalResult> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r);
            simulate(&file.distribution, policy, &file.utility, file.size, horizon, &mut rng)
        })
        .collect();
    let utilities: Vec<f64> = runs.iter().map(|r| r.utility).collect();
    let occupancies: Vec<f64> = runs.iter().map(|r| r.occupancy).collect();
    Ok(ValidationReport {
        replications,
        horizon,
        seed,
        analytic,
        utility: Estimate::new(analytic.utility, &utilities),
        occupancy: Estimate::new(analytic.occupancy, &occupancies),
        mean_arrivals: runs.iter().map(|r| r.arrivals as f64).sum::<f64>() / replications as f64,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::make_fractional;
    use approx::assert_relative_eq;

    #[test]
    fn short_horizon_gives_origin_only() {
        let d = InterArrival::exponential(1.0).unwrap();
        let tr = generate_trace(&d, 1e-12, 3).unwrap();
        assert_eq!(tr.times(), &[0.0]);
        assert!(generate_trace(&d, 0.0, 3).is_err());
    }

    #[test]
    fn poisson_count_concentrates() {
        let d = InterArrival::exponential(1.0).unwrap();
        let tr = generate_trace(&d, 1e6, 11).unwrap();
        assert!((tr.arrivals() as f64 - 1e6).abs() < 3e3);
    }

    #[test]
    fn deterministic_gaps_by_hand() {
        // Gaps of 0.25 with T = 0.1: each request lands in bin 2.
        let p = Policy::new(vec![1.0, 0.64, 0.36, 0.16], 0.1).unwrap();
        let tr = Trace::new(vec![0.0, 0.25, 0.5, 0.75], 0.75).unwrap();
        let w = empirical_utility(&p, &tr, &Utility::sqrt());
        assert_relative_eq!(w, 0.6 / 0.25, max_relative = 1e-12);
        // Each gap holds 0.1 + 0.064 + 0.05 * 0.36.
        let c = empirical_occupancy(&p, &tr, 2.0);
        assert_relative_eq!(c, 2.0 * 3.0 * (0.1 + 0.064 + 0.018) / 0.75, max_relative = 1e-12);
    }

    #[test]
    fn full_and_empty_policies() {
        let d = InterArrival::weibull(0.7, 2.0).unwrap();
        let tr = generate_trace(&d, 1000.0, 5).unwrap();
        let full = Policy::full(10, 0.1).unwrap();
        assert_relative_eq!(empirical_utility(&full, &tr, &Utility::sqrt()), tr.arrivals() as f64 / 1000.0);
        assert_relative_eq!(empirical_occupancy(&full, &tr, 3.0), 3.0, max_relative = 1e-12);
        let empty = Policy::empty(10, 0.1).unwrap();
        assert_eq!(empirical_occupancy(&empty, &tr, 3.0), 0.0);
        assert_eq!(empirical_utility(&empty, &tr, &Utility::sqrt()), 0.0);
    }

    #[test]
    fn occupied_time_matches_fine_sum() {
        let p = Policy::new(vec![0.9, 0.7, 0.4, 0.2], 0.3).unwrap();
        for x in [0.0f64, 0.05, 0.3, 0.61, 0.9, 1.7] {
            let h: f64 = 0.3 / 1000.0;
            let n = (x / h).floor() as usize;
            let rest = x - n as f64 * h;
            let fine: f64 =
                (0..n).map(|i| p.at((i as f64 + 0.5) * h) * h).sum::<f64>() + p.at(n as f64 * h + 0.5 * rest) * rest;
            assert!((occupied_time(&p, x) - fine).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn streaming_matches_trace() {
        let d = InterArrival::weibull(0.7, 1.0).unwrap();
        let p = make_fractional(0.5, Some(20), 50, 0.03).unwrap();
        let tr = generate_trace(&d, 500.0, 9).unwrap();
        let from_trace = empirical(&p, &tr, &Utility::sqrt(), 1.0);
        let streamed = simulate(&d, &p, &Utility::sqrt(), 1.0, 500.0, &mut replication_rng(9, 0));
        assert_eq!(from_trace.arrivals, streamed.arrivals);
        assert_relative_eq!(from_trace.utility, streamed.utility, max_relative = 1e-9);
        assert_relative_eq!(from_trace.occupancy, streamed.occupancy, max_relative = 1e-9);
    }

    #[test]
    fn empty_policy_validates_exactly() {
        let file = FileSpec::weibull(0.7, 1.0, 1.0).unwrap();
        let p = Policy::empty(100, 0.03).unwrap();
        let r = validate_lemma1(&file, &p, 4, 1e3, 1).unwrap();
        assert_eq!(r.utility.mean, 0.0);
        assert_eq!(r.occupancy.mean, 0.0);
        assert_eq!(r.max_abs_z(), 0.0);
    }

    #[test]
    fn memoryless_constant_fraction() {
        let file = FileSpec::new(1.0, InterArrival::exponential(1.0).unwrap(), Utility::sqrt()).unwrap();
        let p = make_fractional(0.3, Some(50), 50, 0.05).unwrap();
        let r = validate_lemma1(&file, &p, 8, 2e4, 21).unwrap();
        assert_relative_eq!(r.analytic.utility, 0.3f64.sqrt(), max_relative = 1e-9);
        assert!(r.max_abs_z() < 4.0, "{r:?}");
    }
}
