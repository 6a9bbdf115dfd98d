//! Soft-TTL optimization.
//!
//! For one file and a capacity price `γ`, the best monotone policy maximizes
//! `Σ_k w(μ_k) F_k − γ Σ_k μ_k A_k`. The unconstrained per-bin optimum solves
//! `w'(μ_k) = γ A_k / F_k`, clamped to `[0, 1]`. When the ratio profile
//! `A_k / F_k` is non-decreasing (non-increasing hazard) these values already
//! form a non-increasing chain. Otherwise adjacent bins are pooled first,
//! replacing their ratio by `ΣA / ΣF`; the pooled profile is independent of
//! `γ`, so it is computed once per file.
//!
//! Several files share the cache through a common price `γ` found by
//! bisection on the total occupancy, which is non-increasing in `γ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{
    aggregate_utility, evaluate_file, raw_occupancy, raw_utility, Fairness, FileEval, Instance, Policy, Utility,
};
use crate::request_model::DiscretizedModel;

/// Relative capacity tolerance of the dual bisections.
pub const CAPACITY_TOLERANCE: f64 = 1e-10;
/// Relative rounding slack accepted when every file is cached in full.
pub const FULL_CACHE_SLACK: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 60;

/// Which family of policies a solution was restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyClass {
    Soft,
    Fractional,
    Ttl,
}

impl std::str::FromStr for PolicyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(PolicyClass::Soft),
            "fractional" => Ok(PolicyClass::Fractional),
            "ttl" => Ok(PolicyClass::Ttl),
            _ => Err(Error::Parse(format!("unknown policy class `{s}`"))),
        }
    }
}

/// Largest KKT violations over all files of a soft solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktSummary {
    pub stationarity: f64,
    pub dual_infeasibility: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub capacity: f64,
    pub capacity_used: f64,
    /// `capacity_used - capacity`; never meaningfully positive.
    pub capacity_residual: f64,
    /// Price actually applied to each file's occupancy (includes size and
    /// fairness scaling).
    pub file_multipliers: Vec<f64>,
    pub kkt: Option<KktSummary>,
    /// Best Lagrangian dual bound on the objective (discrete classes).
    pub dual_bound: Option<f64>,
    /// `dual_bound - objective`.
    pub duality_gap: Option<f64>,
}

/// Optimized policies with their evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub class: PolicyClass,
    pub fairness: Fairness,
    pub policies: Vec<Policy>,
    /// Shared capacity price `γ*`; absent in max-min mode.
    pub multiplier: Option<f64>,
    pub files: Vec<FileEval>,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

impl SolveResult {
    pub(crate) fn assemble(
        class: PolicyClass,
        inst: &Instance,
        models: &[DiscretizedModel],
        fractions: Vec<Vec<f64>>,
        multiplier: Option<f64>,
        mut diagnostics: Diagnostics,
    ) -> Result<Self> {
        let policies = fractions.into_iter().map(|f| Policy::new(f, inst.step)).collect::<Result<Vec<_>>>()?;
        let files = policies
            .iter()
            .zip(models)
            .zip(&inst.files)
            .map(|((p, m), f)| evaluate_file(p, m, &f.utility, f.size))
            .collect::<Result<Vec<_>>>()?;
        let utilities: Vec<f64> = files.iter().map(|e| e.utility).collect();
        let objective = aggregate_utility(&utilities, inst.fairness)?;
        let used: f64 = files.iter().map(|e| e.occupancy).sum();
        diagnostics.capacity = inst.capacity;
        diagnostics.capacity_used = used;
        diagnostics.capacity_residual = used - inst.capacity;
        if let Some(bound) = diagnostics.dual_bound {
            diagnostics.duality_gap = Some(bound - objective);
        }
        Ok(Self { class, fairness: inst.fairness, policies, multiplier, files, objective, diagnostics })
    }

    pub fn utilities(&self) -> Vec<f64> {
        self.files.iter().map(|e| e.utility).collect()
    }

    pub fn capacity_used(&self) -> f64 {
        self.diagnostics.capacity_used
    }
}

/// Single-file water-filling with a precomputed pooled ratio profile.
pub(crate) struct WaterFill<'a> {
    pub(crate) model: &'a DiscretizedModel,
    pub(crate) utility: &'a Utility,
    ratio: Vec<f64>,
}

impl<'a> WaterFill<'a> {
    pub(crate) fn new(model: &'a DiscretizedModel, utility: &'a Utility) -> Self {
        Self { model, utility, ratio: pooled_ratio_profile(model) }
    }

    /// Optimal fractions against the per-bin price `multiplier · A_k`.
    pub(crate) fn fractions(&self, multiplier: f64) -> Vec<f64> {
        let mut prev = 1.0f64;
        self.ratio
            .iter()
            .map(|&r| {
                let mu = if r.is_infinite() {
                    0.0
                } else if multiplier == 0.0 {
                    1.0
                } else {
                    self.utility.fraction_for_marginal(multiplier * r)
                };
                prev = prev.min(mu);
                prev
            })
            .collect()
    }

    /// `Σ w(μ_k) F_k`, without the rate factor.
    pub(crate) fn raw_utility(&self, fractions: &[f64]) -> f64 {
        raw_utility(fractions, self.model.arrival_mass(), self.utility)
    }

    /// `Σ μ_k A_k`, without rate and size.
    pub(crate) fn raw_occupancy(&self, fractions: &[f64]) -> f64 {
        raw_occupancy(fractions, self.model.dwell_time())
    }
}

/// `A_k / F_k` after pooling adjacent bins until the profile is
/// non-decreasing. Bins with no arrival mass that cannot be pooled with a
/// later bin keep an infinite ratio.
pub fn pooled_ratio_profile(model: &DiscretizedModel) -> Vec<f64> {
    // (dwell, mass, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(model.bins() + 1);
    for (&a, &f) in model.dwell_time().iter().zip(model.arrival_mass()) {
        let mut cur = (a, f, 1);
        while let Some(&prev) = blocks.last() {
            // prev.a / prev.f > cur.a / cur.f, cross-multiplied so zero masses compare as +inf
            if prev.0 * cur.1 > cur.0 * prev.1 {
                blocks.pop();
                cur = (prev.0 + cur.0, prev.1 + cur.1, prev.2 + cur.2);
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    blocks
        .into_iter()
        .flat_map(|(a, f, n)| std::iter::repeat_n(if f > 0.0 { a / f } else { f64::INFINITY }, n))
        .collect()
}

/// Optimal single-file policy at capacity price `gamma` (unit rate and size).
///
/// ```
/// use softttl::{InterArrival, Utility};
/// use softttl::solver_soft::solve_single_file_gamma;
///
/// let model = InterArrival::exponential(1.0)?.discretize(0.1, 10)?;
/// let policy = solve_single_file_gamma(&model, &Utility::sqrt(), 2.0)?;
/// // Memoryless arrivals: w'(μ) = γ everywhere, so μ = 1 / (4γ²).
/// assert!(policy.fractions().iter().all(|&mu| (mu - 1.0 / 16.0).abs() < 1e-9));
/// # Ok::<(), softttl::Error>(())
/// ```
pub fn solve_single_file_gamma(model: &DiscretizedModel, utility: &Utility, gamma: f64) -> Result<Policy> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain { name: "gamma", value: gamma, domain: "[0, inf)" });
    }
    Policy::new(WaterFill::new(model, utility).fractions(gamma), model.step())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleFileSolution {
    pub policy: Policy,
    /// Capacity price `γ*` in utility per unit of occupancy.
    pub multiplier: f64,
    pub eval: FileEval,
}

/// Bisection for the smallest price whose (non-increasing) `usage` fits
/// `capacity`. Returns the price and the number of iterations.
pub(crate) fn price_for_capacity(usage: impl Fn(f64) -> f64, capacity: f64) -> Result<(f64, usize)> {
    // Full caching occupies exactly the total size; allow for rounding in
    // the discretized dwell times.
    if usage(0.0) <= capacity * (1.0 + FULL_CACHE_SLACK) {
        return Ok((0.0, 0));
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while usage(hi) > capacity {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::numerical(format!("no price up to {hi:e} brings occupancy below {capacity}")));
        }
    }
    let mut lo = if doublings == 0 { 0.0 } else { hi / 2.0 };
    for it in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if usage(mid) > capacity {
            lo = mid;
        } else {
            hi = mid;
        }
        if capacity - usage(hi) <= CAPACITY_TOLERANCE * capacity || hi - lo <= f64::EPSILON * hi {
            return Ok((hi, doublings + it));
        }
    }
    let slack = capacity - usage(hi);
    if slack <= 1e-6 * capacity {
        Ok((hi, doublings + MAX_BISECTIONS))
    } else {
        Err(Error::numerical(format!(
            "price bisection stalled after {MAX_BISECTIONS} steps with relative slack {:e}",
            slack / capacity
        )))
    }
}

/// Optimal single-file policy under average capacity `capacity`.
pub fn solve_single_file(
    model: &DiscretizedModel,
    utility: &Utility,
    capacity: f64,
    size: f64,
) -> Result<SingleFileSolution> {
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(Error::invalid(format!("capacity must be positive, got {capacity}")));
    }
    if !(size > 0.0) {
        return Err(Error::invalid(format!("file size must be positive, got {size}")));
    }
    let wf = WaterFill::new(model, utility);
    let scale = model.rate() * size;
    let (gamma, _) = price_for_capacity(|g| scale * wf.raw_occupancy(&wf.fractions(g * size)), capacity)?;
    let policy = Policy::new(wf.fractions(gamma * size), model.step())?;
    let eval = evaluate_file(&policy, model, utility, size)?;
    Ok(SingleFileSolution { policy, multiplier: gamma, eval })
}

/// One file's best response to the shared price under alpha-fairness.
pub(crate) struct FileResponse {
    pub fractions: Vec<f64>,
    /// Effective per-bin price multiplier applied in the water-filling.
    pub multiplier: f64,
}

/// Maximizes `g(W) − γ C` for one file, `g(x) = x^{1-α} / (1-α)`.
///
/// Stationarity reads `w'(μ_k) F_k = γ s W^α A_k`, so the per-file problem is
/// the single-file water-filling at price `γ s W^α` with `W` consistent with
/// the resulting policy. `W ↦ W − W(policy(γ s W^α))` is increasing, and its
/// root is found by bisection.
pub(crate) fn respond(wf: &WaterFill<'_>, size: f64, alpha: f64, gamma: f64) -> FileResponse {
    if alpha == 0.0 || gamma == 0.0 {
        let multiplier = gamma * size;
        return FileResponse { fractions: wf.fractions(multiplier), multiplier };
    }
    let rate = wf.model.rate();
    let utility_at = |w: f64| {
        let m = gamma * size * w.powf(alpha);
        (m, rate * wf.raw_utility(&wf.fractions(m)))
    };
    let (mut lo, mut hi) = (0.0, rate * wf.raw_utility(&wf.fractions(0.0)));
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid - utility_at(mid).1 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let (multiplier, _) = utility_at(0.5 * (lo + hi));
    FileResponse { fractions: wf.fractions(multiplier), multiplier }
}

/// Soft-TTL optimum of a multi-file instance. Max-min instances are delegated
/// to [`solve_maxmin`].
pub fn solve_multi_file(inst: &Instance) -> Result<SolveResult> {
    match inst.fairness {
        Fairness::MaxMin => solve_maxmin(inst),
        Fairness::Alpha(alpha) => solve_alpha(inst, alpha),
    }
}

/// Total occupancy when every file plays its soft best response to the
/// capacity price `gamma`. Non-increasing in `gamma`.
pub fn occupancy_at_price(inst: &Instance, gamma: f64) -> Result<f64> {
    let Fairness::Alpha(alpha) = inst.fairness else {
        return Err(Error::invalid("max-min fairness has no single capacity price"));
    };
    if !(gamma >= 0.0) {
        return Err(Error::Domain { name: "gamma", value: gamma, domain: "[0, inf)" });
    }
    let models = inst.models()?;
    Ok(models
        .iter()
        .zip(&inst.files)
        .map(|(m, f)| {
            let wf = WaterFill::new(m, &f.utility);
            m.rate() * f.size * wf.raw_occupancy(&respond(&wf, f.size, alpha, gamma).fractions)
        })
        .sum())
}

fn empty_solution(class: PolicyClass, inst: &Instance, models: &[DiscretizedModel]) -> Result<SolveResult> {
    if let Fairness::Alpha(a) = inst.fairness {
        if a > 1.0 {
            return Err(Error::Divergence(format!(
                "zero capacity leaves every file with zero utility and alpha = {a} > 1"
            )));
        }
    }
    let fractions = vec![vec![0.0; inst.bins + 1]; inst.files.len()];
    SolveResult::assemble(class, inst, models, fractions, Some(0.0), Diagnostics::default())
}

fn solve_alpha(inst: &Instance, alpha: f64) -> Result<SolveResult> {
    let models = inst.models()?;
    if inst.capacity == 0.0 {
        return empty_solution(PolicyClass::Soft, inst, &models);
    }
    let fills: Vec<WaterFill<'_>> =
        models.iter().zip(&inst.files).map(|(m, f)| WaterFill::new(m, &f.utility)).collect();
    let usage = |gamma: f64| -> f64 {
        fills
            .iter()
            .zip(&inst.files)
            .map(|(wf, f)| {
                let r = respond(wf, f.size, alpha, gamma);
                wf.model.rate() * f.size * wf.raw_occupancy(&r.fractions)
            })
            .sum()
    };
    let (gamma, iterations) = price_for_capacity(usage, inst.capacity)?;

    let responses: Vec<FileResponse> =
        fills.iter().zip(&inst.files).map(|(wf, f)| respond(wf, f.size, alpha, gamma)).collect();
    let kkt = summarize_kkt(
        fills.iter().zip(&responses).map(|(wf, r)| kkt_residual(wf.model, wf.utility, &r.fractions, r.multiplier)),
    );
    let diagnostics = Diagnostics {
        iterations,
        file_multipliers: responses.iter().map(|r| r.multiplier).collect(),
        kkt: Some(kkt),
        ..Diagnostics::default()
    };
    let fractions = responses.into_iter().map(|r| r.fractions).collect();
    SolveResult::assemble(PolicyClass::Soft, inst, &models, fractions, Some(gamma), diagnostics)
}

/// Cheapest way to reach a utility level, used by max-min fairness.
#[derive(Debug, Clone)]
pub(crate) struct Allocation {
    pub fractions: Vec<f64>,
    pub utility: f64,
    pub cost: f64,
    pub multiplier: Option<f64>,
}

/// A file's cost-versus-utility trade-off within one policy class.
pub(crate) trait LevelCost {
    /// Largest attainable utility.
    fn cap(&self) -> f64;
    /// Cheapest allocation whose utility is at least `level` (`level <= cap`).
    fn cheapest(&self, level: f64) -> Result<Allocation>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinCostSolution {
    pub policy: Policy,
    pub occupancy: f64,
    pub utility: f64,
    /// Price at which the water-filling policy reaches the target.
    pub multiplier: f64,
}

/// Smallest-occupancy soft policy with utility at least `target`.
pub fn min_cost_for_utility(
    model: &DiscretizedModel,
    utility: &Utility,
    size: f64,
    target: f64,
) -> Result<MinCostSolution> {
    let level = SoftLevel { wf: WaterFill::new(model, utility), size };
    if target > level.cap() * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "target utility {target} exceeds the full-caching utility {}",
            level.cap()
        )));
    }
    let a = level.cheapest(target.min(level.cap()))?;
    Ok(MinCostSolution {
        policy: Policy::new(a.fractions, model.step())?,
        occupancy: a.cost,
        utility: a.utility,
        multiplier: a.multiplier.unwrap_or(f64::INFINITY),
    })
}

struct SoftLevel<'a> {
    wf: WaterFill<'a>,
    size: f64,
}

impl SoftLevel<'_> {
    fn at_price(&self, gamma: f64) -> Allocation {
        let fractions = self.wf.fractions(gamma * self.size);
        let rate = self.wf.model.rate();
        Allocation {
            utility: rate * self.wf.raw_utility(&fractions),
            cost: rate * self.size * self.wf.raw_occupancy(&fractions),
            fractions,
            multiplier: Some(gamma),
        }
    }
}

impl LevelCost for SoftLevel<'_> {
    fn cap(&self) -> f64 {
        self.wf.model.rate() * self.wf.raw_utility(&self.wf.fractions(0.0))
    }

    fn cheapest(&self, target: f64) -> Result<Allocation> {
        let bins = self.wf.model.bins();
        if target <= 0.0 {
            return Ok(Allocation {
                fractions: vec![0.0; bins + 1],
                utility: self.wf.model.rate() * self.wf.raw_utility(&vec![0.0; bins + 1]),
                cost: 0.0,
                multiplier: None,
            });
        }
        let full = self.at_price(0.0);
        if full.utility <= target * (1.0 + 1e-13) {
            return Ok(full);
        }
        let mut hi = 1.0;
        let mut doublings = 0;
        while self.at_price(hi).utility >= target {
            hi *= 2.0;
            doublings += 1;
            if doublings > 2 * MAX_DOUBLINGS {
                // Utility bounded away from zero at any price; the empty
                // policy is the cheapest way to exceed the target.
                return self.cheapest(0.0);
            }
        }
        let mut lo = if doublings == 0 { 0.0 } else { hi / 2.0 };
        let mut best = self.at_price(lo);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let a = self.at_price(mid);
            if a.utility >= target {
                lo = mid;
                best = a;
            } else {
                hi = mid;
            }
            if best.utility - target <= 1e-13 * target || hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Ok(best)
    }
}

/// Lexicographic max-min water-filling over utility levels.
///
/// Repeatedly raises a common level for the files that are still active until
/// capacity runs out, then freezes files that are capped at their full-caching
/// utility or cannot be raised alone. Capacity left over (possible for
/// discrete classes) goes greedily to the files with the lowest utility.
pub(crate) fn lexicographic_maxmin(files: &[&dyn LevelCost], capacity: f64) -> Result<(Vec<Allocation>, usize)> {
    let n = files.len();
    let mut assigned: Vec<Option<Allocation>> = vec![None; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut remaining = capacity;
    let mut floor = 0.0f64;
    let mut iterations = 0;
    let caps: Vec<f64> = files.iter().map(|f| f.cap()).collect();

    let allocate = |active: &[usize], level: f64| -> Result<Vec<Allocation>> {
        active.iter().map(|&i| files[i].cheapest(level.min(caps[i]))).collect()
    };
    let total = |a: &[Allocation]| a.iter().map(|x| x.cost).sum::<f64>();

    while !active.is_empty() {
        iterations += 1;
        let top = active.iter().map(|&i| caps[i]).fold(0.0, f64::max);
        let at_top = allocate(&active, top)?;
        if total(&at_top) <= remaining {
            for (&i, a) in active.iter().zip(at_top) {
                remaining -= a.cost;
                assigned[i] = Some(a);
            }
            break;
        }
        let (mut lo, mut hi) = (floor, top);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if total(&allocate(&active, mid)?) <= remaining {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * top {
                break;
            }
        }
        let level = lo;
        let allocs = allocate(&active, level)?;
        let spent = total(&allocs);
        let bump = level * (1.0 + 1e-8) + 1e-12;
        let mut freeze = Vec::new();
        for (j, &i) in active.iter().enumerate() {
            if caps[i] <= level * (1.0 + 1e-12) {
                freeze.push(j);
                continue;
            }
            let raised = files[i].cheapest(bump.min(caps[i]))?;
            if spent - allocs[j].cost + raised.cost > remaining {
                freeze.push(j);
            }
        }
        if freeze.is_empty() {
            freeze = (0..active.len()).collect();
        }
        let mut still = Vec::new();
        for (j, (a, &i)) in allocs.into_iter().zip(&active).enumerate() {
            if freeze.contains(&j) {
                remaining -= a.cost;
                assigned[i] = Some(a);
            } else {
                still.push(i);
            }
        }
        active = still;
        floor = level;
    }

    let mut assigned: Vec<Allocation> = assigned.into_iter().map(|a| a.expect("every file assigned")).collect();
    // Spend leftovers on the poorest files first.
    loop {
        let mut order: Vec<usize> = (0..n).filter(|&i| assigned[i].utility < caps[i] * (1.0 - 1e-12)).collect();
        order.sort_by(|&a, &b| assigned[a].utility.total_cmp(&assigned[b].utility).then(a.cmp(&b)));
        let mut improved = false;
        for i in order {
            let next = files[i].cheapest((assigned[i].utility * (1.0 + 1e-8) + 1e-12).min(caps[i]))?;
            let extra = next.cost - assigned[i].cost;
            if next.utility > assigned[i].utility && extra <= remaining {
                remaining -= extra;
                assigned[i] = next;
                improved = true;
                break;
            }
        }
        if !improved {
            break;
        }
    }
    Ok((assigned, iterations))
}

/// Lexicographic max-min fair soft-TTL policies.
pub fn solve_maxmin(inst: &Instance) -> Result<SolveResult> {
    let models = inst.models()?;
    let levels: Vec<SoftLevel<'_>> = models
        .iter()
        .zip(&inst.files)
        .map(|(m, f)| SoftLevel { wf: WaterFill::new(m, &f.utility), size: f.size })
        .collect();
    let refs: Vec<&dyn LevelCost> = levels.iter().map(|l| l as &dyn LevelCost).collect();
    let (allocs, iterations) = lexicographic_maxmin(&refs, inst.capacity)?;
    let kkt =
        summarize_kkt(levels.iter().zip(&allocs).filter_map(|(l, a)| {
            a.multiplier.map(|g| kkt_residual(l.wf.model, l.wf.utility, &a.fractions, g * l.size))
        }));
    let diagnostics = Diagnostics {
        iterations,
        file_multipliers: allocs
            .iter()
            .zip(&inst.files)
            .map(|(a, f)| a.multiplier.map_or(f64::NAN, |g| g * f.size))
            .collect(),
        kkt: Some(kkt),
        ..Diagnostics::default()
    };
    let fractions = allocs.into_iter().map(|a| a.fractions).collect();
    SolveResult::assemble(PolicyClass::Soft, inst, &models, fractions, None, diagnostics)
}

/// Euclidean projection onto `{1 >= x_0 >= x_1 >= ... >= x_K >= 0}`.
///
/// ```
/// use softttl::solver_soft::isotonic_project;
/// assert_eq!(isotonic_project(&[0.2, 0.8]), vec![0.5, 0.5]);
/// assert_eq!(isotonic_project(&[1.4, 0.3, -0.2]), vec![1.0, 0.3, 0.0]);
/// ```
pub fn isotonic_project(values: &[f64]) -> Vec<f64> {
    isotonic_project_weighted(values, &vec![1.0; values.len()])
}

/// Weighted projection minimizing `Σ weight_k (x_k − v_k)²` over the same set.
/// Pool-adjacent-violators followed by clipping to `[0, 1]`.
pub fn isotonic_project_weighted(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "values and weights must align");
    // (weighted sum, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v * w, w, 1);
        while let Some(&prev) = blocks.last() {
            if prev.0 * cur.1 < cur.0 * prev.1 {
                blocks.pop();
                cur = (prev.0 + cur.0, prev.1 + cur.1, prev.2 + cur.2);
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    blocks.into_iter().flat_map(|(s, w, n)| std::iter::repeat_n((s / w).clamp(0.0, 1.0), n)).collect()
}

/// KKT check of a single-file policy at a given per-bin price multiplier.
///
/// `order_multipliers[k]` prices `μ_k <= μ_{k-1}` and `floor_multipliers[k]`
/// prices `μ_k >= 0`. For each maximal run of equal fractions, stationarity
/// requires the gradient `w'(μ_k) F_k − m A_k` to sum to zero over runs strictly
/// inside `(0, 1)`; dual feasibility constrains its partial sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub dual_infeasibility: f64,
    pub order_multipliers: Vec<f64>,
    pub floor_multipliers: Vec<f64>,
}

pub fn kkt_residual(model: &DiscretizedModel, utility: &Utility, fractions: &[f64], multiplier: f64) -> KktReport {
    let n = fractions.len();
    let grad: Vec<f64> = fractions
        .iter()
        .zip(model.arrival_mass().iter().zip(model.dwell_time()))
        .map(|(&mu, (&f, &a))| {
            let gain = if f > 0.0 { utility.derivative(mu) * f } else { 0.0 };
            gain - multiplier * a
        })
        .collect();
    let mut phi = vec![0.0; n];
    let mut theta = vec![0.0; n];
    let mut stationarity = 0.0f64;
    let mut infeasible = 0.0f64;
    let mut start = 0;
    while start < n {
        let value = fractions[start];
        let mut end = start;
        while end + 1 < n && (fractions[end + 1] - value).abs() <= 1e-12 {
            end += 1;
        }
        let run = &grad[start..=end];
        let total: f64 = run.iter().sum();
        if value <= 1e-15 {
            // Floor run: prefix sums must be non-positive.
            let mut prefix = 0.0;
            for (j, &g) in run.iter().enumerate() {
                phi[start + j] = if j == 0 { 0.0 } else { -prefix };
                prefix += g;
                infeasible = infeasible.max(prefix);
            }
            theta[end] = -prefix;
        } else if start == 0 && value >= 1.0 - 1e-15 {
            // Run pinned at one: suffix sums must be non-negative.
            let mut suffix = total;
            for (j, &g) in run.iter().enumerate() {
                phi[start + j] = suffix;
                infeasible = infeasible.max(-suffix);
                suffix -= g;
            }
        } else {
            stationarity = stationarity.max(total.abs());
            let mut prefix = 0.0;
            for (j, &g) in run.iter().enumerate() {
                phi[start + j] = if j == 0 { 0.0 } else { -prefix };
                if j > 0 {
                    infeasible = infeasible.max(prefix);
                }
                prefix += g;
            }
        }
        start = end + 1;
    }
    KktReport { stationarity, dual_infeasibility: infeasible, order_multipliers: phi, floor_multipliers: theta }
}

pub(crate) fn summarize_kkt(reports: impl Iterator<Item = KktReport>) -> KktSummary {
    reports.fold(KktSummary { stationarity: 0.0, dual_infeasibility: 0.0 }, |acc, r| KktSummary {
        stationarity: acc.stationarity.max(r.stationarity),
        dual_infeasibility: acc.dual_infeasibility.max(r.dual_infeasibility),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::FileSpec;
    use crate::request_model::InterArrival;
    use approx::assert_relative_eq;

    fn weibull_model(a: f64, step: f64, bins: usize) -> DiscretizedModel {
        InterArrival::weibull(a, 1.0).unwrap().discretize(step, bins).unwrap()
    }

    #[test]
    fn zero_price_caches_everything() {
        let m = weibull_model(0.7, 0.03, 100);
        let p = solve_single_file_gamma(&m, &Utility::sqrt(), 0.0).unwrap();
        assert!(p.fractions().iter().all(|&mu| mu == 1.0));
        assert!(solve_single_file_gamma(&m, &Utility::sqrt(), -1.0).is_err());
    }

    #[test]
    fn memoryless_constant_policy() {
        let m = InterArrival::exponential(1.0).unwrap().discretize(0.05, 40).unwrap();
        for gamma in [0.3, 0.5, 1.0, 3.0] {
            let p = solve_single_file_gamma(&m, &Utility::sqrt(), gamma).unwrap();
            let want = (1.0 / (4.0 * gamma * gamma)).min(1.0);
            for &mu in p.fractions() {
                assert_relative_eq!(mu, want, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn single_file_exponential_quarter_capacity() {
        let m = InterArrival::exponential(1.0).unwrap().discretize(0.05, 40).unwrap();
        let s = solve_single_file(&m, &Utility::sqrt(), 0.25, 1.0).unwrap();
        assert_relative_eq!(s.multiplier, 1.0, max_relative = 1e-8);
        for &mu in s.policy.fractions() {
            assert_relative_eq!(mu, 0.25, max_relative = 1e-8);
        }
        let k = kkt_residual(&m, &Utility::sqrt(), s.policy.fractions(), s.multiplier);
        assert!(k.stationarity < 1e-8 && k.dual_infeasibility < 1e-8, "{k:?}");
    }

    #[test]
    fn single_file_large_capacity() {
        let m = weibull_model(0.7, 0.03, 100);
        let s = solve_single_file(&m, &Utility::sqrt(), 1.0, 1.0).unwrap();
        assert_eq!(s.multiplier, 0.0);
        assert!(s.policy.fractions().iter().all(|&mu| mu == 1.0));
        assert!(solve_single_file(&m, &Utility::sqrt(), 0.0, 1.0).is_err());
    }

    #[test]
    fn single_file_weibull_is_decreasing_and_tight() {
        let m = weibull_model(0.7, 0.03, 100);
        let s = solve_single_file(&m, &Utility::sqrt(), 0.5, 1.0).unwrap();
        let f = s.policy.fractions();
        assert!(f[0] > f[100]);
        assert_relative_eq!(s.eval.occupancy, 0.5, max_relative = 1e-9);
        let k = kkt_residual(&m, &Utility::sqrt(), f, s.multiplier);
        assert!(k.stationarity < 1e-9 && k.dual_infeasibility < 1e-9, "{k:?}");
    }

    #[test]
    fn pooling_handles_increasing_hazard() {
        // Shape 3 makes A_k / F_k decrease, so the naive chain is not optimal.
        let m = InterArrival::weibull(3.0, 1.0).unwrap().discretize(0.25, 8).unwrap();
        let raw = m.hazard_ratio_profile();
        assert!(raw.windows(2).any(|w| w[1] < w[0]));
        let pooled = pooled_ratio_profile(&m);
        assert!(pooled.windows(2).all(|w| w[1] >= w[0]));
        let s = solve_single_file(&m, &Utility::sqrt(), 0.4, 1.0).unwrap();
        let k = kkt_residual(&m, &Utility::sqrt(), s.policy.fractions(), s.multiplier);
        assert!(k.stationarity < 1e-9 && k.dual_infeasibility < 1e-9, "{k:?}");
    }

    #[test]
    fn zero_mass_bins_follow_later_bins() {
        // Uniform on [0,1] then nothing until [2,3]: bins on (1, 2) carry no mass.
        let d = InterArrival::cdf_table(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.5, 0.5, 1.0]).unwrap();
        let m = d.discretize(0.5, 8).unwrap();
        let s = solve_single_file(&m, &Utility::sqrt(), 0.5, 1.0).unwrap();
        let f = s.policy.fractions();
        assert!(f[2] > 0.0 && f[2] == f[3] && f[3] == f[4], "{f:?}");
        assert_eq!(f[6], 0.0);
        let k = kkt_residual(&m, &Utility::sqrt(), f, s.multiplier);
        assert!(k.stationarity < 1e-9 && k.dual_infeasibility < 1e-9, "{k:?}");
    }

    #[test]
    fn min_cost_examples() {
        let m = InterArrival::exponential(1.0).unwrap().discretize(0.05, 40).unwrap();
        let u = Utility::sqrt();
        let s = min_cost_for_utility(&m, &u, 1.0, 0.5).unwrap();
        assert_relative_eq!(s.occupancy, 0.25, max_relative = 1e-9);
        let full = min_cost_for_utility(&m, &u, 1.0, 1.0).unwrap();
        assert_relative_eq!(full.occupancy, 1.0, max_relative = 1e-12);
        let none = min_cost_for_utility(&m, &u, 1.0, 0.0).unwrap();
        assert_eq!(none.occupancy, 0.0);
        assert!(matches!(min_cost_for_utility(&m, &u, 1.0, 1.1), Err(Error::Infeasible(_))));
    }

    #[test]
    fn symmetric_files_share_equally() {
        let files = vec![FileSpec::weibull(0.7, 1.0, 1.0).unwrap(); 3];
        let inst = Instance::new(files, 1.5, Fairness::Alpha(0.0), 0.03, 100).unwrap();
        let r = solve_multi_file(&inst).unwrap();
        for p in &r.policies[1..] {
            assert_eq!(p, &r.policies[0]);
        }
        assert_relative_eq!(r.capacity_used(), 1.5, max_relative = 1e-9);
    }

    #[test]
    fn memoryless_three_files() {
        let files = vec![FileSpec::new(1.0, InterArrival::exponential(1.0).unwrap(), Utility::sqrt()).unwrap(); 3];
        let inst = Instance::new(files, 1.5, Fairness::Alpha(0.0), 0.03, 100).unwrap();
        let r = solve_multi_file(&inst).unwrap();
        assert_relative_eq!(r.objective, 3.0 * 0.5f64.sqrt(), max_relative = 1e-9);
        for p in &r.policies {
            assert!(p.fractions().iter().all(|&mu| (mu - 0.5).abs() < 1e-8));
        }
    }

    #[test]
    fn alpha_fair_kkt_and_capacity() {
        let files: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&l| FileSpec::weibull(0.7, l, 1.0).unwrap()).collect();
        for alpha in [0.5, 2.0, 4.0] {
            let inst = Instance::new(files.clone(), 1.5, Fairness::Alpha(alpha), 0.03, 100).unwrap();
            let r = solve_multi_file(&inst).unwrap();
            assert!((r.capacity_used() - 1.5).abs() < 1e-6 * 1.5);
            let k = r.diagnostics.kkt.unwrap();
            assert!(k.stationarity < 1e-8 && k.dual_infeasibility < 1e-8, "alpha {alpha}: {k:?}");
        }
    }

    #[test]
    fn zero_capacity() {
        let files = vec![FileSpec::weibull(0.7, 1.0, 1.0).unwrap(); 2];
        let inst = Instance::new(files.clone(), 0.0, Fairness::Alpha(0.0), 0.03, 10).unwrap();
        let r = solve_multi_file(&inst).unwrap();
        assert_eq!(r.objective, 0.0);
        let inst = Instance::new(files, 0.0, Fairness::Alpha(2.0), 0.03, 10).unwrap();
        assert!(matches!(solve_multi_file(&inst), Err(Error::Divergence(_))));
    }

    #[test]
    fn maxmin_two_identical_files() {
        let files = vec![FileSpec::weibull(0.7, 1.0, 1.0).unwrap(); 2];
        let inst = Instance::new(files, 1.0, Fairness::MaxMin, 0.03, 100).unwrap();
        let r = solve_maxmin(&inst).unwrap();
        assert_relative_eq!(r.files[0].utility, r.files[1].utility, max_relative = 1e-9);
        assert!(r.capacity_used() <= 1.0 + 1e-9);
        assert!(r.capacity_used() > 1.0 - 1e-6);
    }

    #[test]
    fn maxmin_single_file_matches_capacity_solver() {
        let files = vec![FileSpec::weibull(0.7, 1.0, 1.0).unwrap()];
        let inst = Instance::new(files, 0.4, Fairness::MaxMin, 0.03, 100).unwrap();
        let r = solve_maxmin(&inst).unwrap();
        let m = inst.models().unwrap();
        let s = solve_single_file(&m[0], &Utility::sqrt(), 0.4, 1.0).unwrap();
        for (a, b) in r.policies[0].fractions().iter().zip(s.policy.fractions()) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(isotonic_project(&[0.9, 0.5, 0.1]), vec![0.9, 0.5, 0.1]);
        assert_eq!(isotonic_project(&[0.2, 0.8]), vec![0.5, 0.5]);
        let w = isotonic_project_weighted(&[0.2, 0.8], &[3.0, 1.0]);
        assert_relative_eq!(w[0], 0.35, epsilon = 1e-15);
        assert_eq!(w[0], w[1]);
    }
}
