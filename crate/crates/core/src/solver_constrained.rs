//! TTL and fractional-TTL optimization.
//!
//! Both classes cache a constant fraction `ν` (one for TTL) of a file up to a
//! cutoff bin and nothing afterwards. The cutoff is discrete, so the problem
//! is solved through its Lagrangian: for a capacity price `γ`, each file
//! enumerates every cutoff and keeps the one maximizing its own
//! `g(W) − γ C`. Bisection on `γ` meets the capacity, after which a repair
//! step re-optimizes fractions for the chosen cutoffs and a local search tries
//! single-file and pairwise cutoff changes. The best dual value seen bounds the
//! remaining duality gap.
//!
//! [`brute_force_oracle`] searches a fraction grid exhaustively and is meant
//! for verification on small instances.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{make_fractional, raw_occupancy, raw_utility, Fairness, Instance, Policy, Utility};
use crate::request_model::DiscretizedModel;
use crate::solver_soft::{
    lexicographic_maxmin, price_for_capacity, Allocation, Diagnostics, LevelCost, PolicyClass, SolveResult,
    FULL_CACHE_SLACK,
};

/// Largest number of candidates or labels the oracle may generate.
pub const ORACLE_LIMIT: u128 = 10_000_000;

/// Relative safety margin kept below the capacity when fractions are
/// re-optimized, so that rounding never makes a solution infeasible.
const CAPACITY_MARGIN: f64 = 1e-12;
const MAX_LOCAL_ROUNDS: usize = 100;

/// Cutoff and fraction of one file's TTL-type policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedChoice {
    /// Last cached bin; `None` caches nothing.
    pub cutoff: Option<usize>,
    pub fraction: f64,
}

impl ConstrainedChoice {
    pub fn policy(&self, bins: usize, step: f64) -> Result<Policy> {
        make_fractional(self.fraction, self.cutoff, bins, step)
    }
}

/// Cumulative statistics of one file for every cutoff. Option `0` is the
/// empty policy and option `l + 1` caches bins `0..=l`.
struct CutoffTable<'a> {
    utility: &'a Utility,
    rate: f64,
    size: f64,
    bins: usize,
    mass: Vec<f64>,
    dwell: Vec<f64>,
    total_mass: f64,
    floor_value: f64,
}

impl<'a> CutoffTable<'a> {
    fn new(model: &DiscretizedModel, utility: &'a Utility, size: f64) -> Self {
        let mut mass = vec![0.0];
        let mut dwell = vec![0.0];
        for (&f, &a) in model.arrival_mass().iter().zip(model.dwell_time()) {
            mass.push(mass.last().unwrap() + f);
            dwell.push(dwell.last().unwrap() + a);
        }
        Self {
            utility,
            rate: model.rate(),
            size,
            bins: model.bins(),
            total_mass: *mass.last().unwrap(),
            mass,
            dwell,
            floor_value: utility.value(0.0),
        }
    }

    fn options(&self) -> usize {
        self.mass.len()
    }

    fn utility_at(&self, opt: usize, nu: f64) -> f64 {
        let nu = if opt == 0 { 0.0 } else { nu };
        let cached = self.mass[opt];
        self.rate * (self.utility.value(nu) * cached + self.floor_value * (self.total_mass - cached))
    }

    fn occupancy_at(&self, opt: usize, nu: f64) -> f64 {
        if opt == 0 {
            0.0
        } else {
            self.rate * self.size * nu * self.dwell[opt]
        }
    }

    fn fractions(&self, opt: usize, nu: f64) -> Vec<f64> {
        (0..=self.bins).map(|k| if k < opt { nu } else { 0.0 }).collect()
    }

    /// Fraction maximizing `g(W) − γ C` for a fixed cutoff.
    fn best_fraction(&self, opt: usize, alpha: f64, gamma: f64) -> f64 {
        let (cached, dwell) = (self.mass[opt], self.dwell[opt]);
        if opt == 0 || cached <= 0.0 {
            return 0.0;
        }
        if gamma == 0.0 || dwell <= 0.0 {
            return 1.0;
        }
        if alpha == 0.0 {
            return self.utility.fraction_for_marginal(gamma * self.size * dwell / cached);
        }
        let slope = |nu: f64| {
            let w = self.utility_at(opt, nu);
            let gain = if w > 0.0 { w.powf(-alpha) * self.utility.derivative(nu) * cached } else { f64::INFINITY };
            gain - gamma * self.size * dwell
        };
        if slope(1.0) >= 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Best `(option, fraction, Lagrangian value)` at price `gamma`.
    fn respond(&self, class: PolicyClass, alpha: f64, gamma: f64) -> (usize, f64, f64) {
        let mut best = (0, 0.0, f64::NEG_INFINITY);
        for opt in 0..self.options() {
            let nu = match class {
                PolicyClass::Fractional => self.best_fraction(opt, alpha, gamma),
                _ => 1.0,
            };
            let value = Fairness::term(alpha, self.utility_at(opt, nu)) - gamma * self.occupancy_at(opt, nu);
            if value > best.2 {
                best = (opt, nu, value);
            }
        }
        best
    }

    /// Smallest occupancy among policies with positive utility.
    fn cheapest_useful(&self, class: PolicyClass) -> f64 {
        match class {
            PolicyClass::Ttl => (1..self.options())
                .filter(|&o| self.mass[o] > 0.0)
                .map(|o| self.occupancy_at(o, 1.0))
                .fold(f64::INFINITY, f64::min),
            _ => 0.0,
        }
    }
}

fn class_name(class: PolicyClass) -> &'static str {
    match class {
        PolicyClass::Soft => "soft",
        PolicyClass::Fractional => "fractional",
        PolicyClass::Ttl => "ttl",
    }
}

/// Best fractional-TTL policies for the instance.
///
/// ```
/// use softttl::{Fairness, FileSpec, Instance, InterArrival, Utility};
/// use softttl::solver_constrained::solve_fractional;
///
/// let file = FileSpec::new(1.0, InterArrival::exponential(1.0)?, Utility::sqrt())?;
/// let inst = Instance::new(vec![file], 0.25, Fairness::Alpha(0.0), 0.05, 20)?;
/// let result = solve_fractional(&inst)?;
/// // Memoryless requests: cache a quarter of the file for the whole horizon.
/// assert!(result.policies[0].fractions().iter().all(|&mu| (mu - 0.25).abs() < 1e-8));
/// # Ok::<(), softttl::Error>(())
/// ```
pub fn solve_fractional(inst: &Instance) -> Result<SolveResult> {
    solve_class(inst, PolicyClass::Fractional)
}

/// Best whole-file TTL policies for the instance.
pub fn solve_ttl(inst: &Instance) -> Result<SolveResult> {
    solve_class(inst, PolicyClass::Ttl)
}

fn solve_class(inst: &Instance, class: PolicyClass) -> Result<SolveResult> {
    let models = inst.models()?;
    let tables: Vec<CutoffTable<'_>> =
        models.iter().zip(&inst.files).map(|(m, f)| CutoffTable::new(m, &f.utility, f.size)).collect();
    match inst.fairness {
        Fairness::MaxMin => solve_class_maxmin(inst, &models, &tables, class),
        Fairness::Alpha(alpha) => solve_class_alpha(inst, &models, &tables, class, alpha),
    }
}

fn score(tables: &[CutoffTable<'_>], picks: &[(usize, f64)], alpha: f64) -> f64 {
    tables.iter().zip(picks).map(|(t, &(o, nu))| Fairness::term(alpha, t.utility_at(o, nu))).sum()
}

fn used(tables: &[CutoffTable<'_>], picks: &[(usize, f64)]) -> f64 {
    tables.iter().zip(picks).map(|(t, &(o, nu))| t.occupancy_at(o, nu)).sum()
}

fn solve_class_alpha(
    inst: &Instance,
    models: &[DiscretizedModel],
    tables: &[CutoffTable<'_>],
    class: PolicyClass,
    alpha: f64,
) -> Result<SolveResult> {
    let capacity = inst.capacity;
    if alpha > 1.0 {
        let needed: f64 = tables.iter().map(|t| t.cheapest_useful(class)).sum();
        if capacity == 0.0 || needed > capacity {
            return Err(Error::Infeasible(format!(
                "capacity {capacity} cannot give every file positive utility under {} policies, \
                 so the alpha = {alpha} objective is -inf",
                class_name(class)
            )));
        }
    }
    if capacity == 0.0 {
        let fractions = vec![vec![0.0; inst.bins + 1]; tables.len()];
        return SolveResult::assemble(class, inst, models, fractions, Some(0.0), Diagnostics::default());
    }

    let start = dual_start(tables, class, alpha, capacity)?;
    let (gamma, iterations, bound) = (start.gamma, start.iterations, start.bound);
    let mut picks = start.picks;
    match class {
        PolicyClass::Fractional => {
            improve_fractional(tables, &mut picks, alpha, capacity)?;
            // Whole-file TTL policies are fractional too, and the TTL search
            // often ends in a different basin. Polish from there as well,
            // unless no TTL configuration serves every file.
            let ttl_needed: f64 = tables.iter().map(|t| t.cheapest_useful(PolicyClass::Ttl)).sum();
            if alpha <= 1.0 || ttl_needed <= capacity {
                let mut whole = dual_start(tables, PolicyClass::Ttl, alpha, capacity)?.picks;
                improve_ttl(tables, &mut whole, alpha, capacity);
                if score(tables, &whole, alpha) > f64::NEG_INFINITY && used(tables, &whole) <= capacity {
                    improve_fractional(tables, &mut whole, alpha, capacity)?;
                    if score(tables, &whole, alpha) > score(tables, &picks, alpha) {
                        picks = whole;
                    }
                }
            }
        }
        _ => improve_ttl(tables, &mut picks, alpha, capacity),
    }

    let fractions = tables.iter().zip(&picks).map(|(t, &(o, nu))| t.fractions(o, nu)).collect();
    let diagnostics = Diagnostics {
        iterations,
        file_multipliers: vec![gamma; tables.len()],
        dual_bound: Some(bound),
        ..Diagnostics::default()
    };
    SolveResult::assemble(class, inst, models, fractions, Some(gamma), diagnostics)
}

/// Per-file `(option, fraction)`.
type Picks = Vec<(usize, f64)>;

struct DualStart {
    picks: Vec<(usize, f64)>,
    gamma: f64,
    iterations: usize,
    bound: f64,
}

/// Per-file best responses at the price that fills the capacity, plus the
/// smallest Lagrangian dual value seen during the search.
fn dual_start(tables: &[CutoffTable<'_>], class: PolicyClass, alpha: f64, capacity: f64) -> Result<DualStart> {
    let bound = Cell::new(f64::INFINITY);
    let usage = |gamma: f64| {
        let (mut total, mut dual) = (0.0, gamma * capacity);
        for t in tables {
            let (o, nu, value) = t.respond(class, alpha, gamma);
            total += t.occupancy_at(o, nu);
            dual += value;
        }
        bound.set(bound.get().min(dual));
        total
    };
    let (gamma, iterations) = price_for_capacity(usage, capacity)?;
    let picks = tables
        .iter()
        .map(|t| {
            let (o, nu, _) = t.respond(class, alpha, gamma);
            (o, nu)
        })
        .collect();
    Ok(DualStart { picks, gamma, iterations, bound: bound.get() })
}

/// Re-optimizes the fractions for fixed cutoffs; a continuous concave
/// problem with one shared price. Returns the fractions and that price.
fn polish(
    tables: &[CutoffTable<'_>],
    picks: &[(usize, f64)],
    alpha: f64,
    capacity: f64,
) -> Result<(Vec<(usize, f64)>, f64)> {
    let target = capacity * (1.0 - CAPACITY_MARGIN);
    let respond = |gamma: f64| -> Vec<(usize, f64)> {
        tables.iter().zip(picks).map(|(t, &(o, _))| (o, t.best_fraction(o, alpha, gamma))).collect()
    };
    let (gamma, _) = price_for_capacity(|g| used(tables, &respond(g)), target)?;
    Ok((respond(gamma), gamma))
}

/// Cutoff changes for one file at a time, each followed by a re-polish.
///
/// For fixed cutoffs the polished objective is bounded by the Lagrangian at
/// any price, so a change can only help if it raises that file's Lagrangian
/// value at the current price. Other candidates are skipped.
fn improve_fractional(
    tables: &[CutoffTable<'_>],
    picks: &mut Vec<(usize, f64)>,
    alpha: f64,
    capacity: f64,
) -> Result<()> {
    let (polished, mut gamma) = polish(tables, picks, alpha, capacity)?;
    *picks = polished;
    let mut current = score(tables, picks, alpha);
    let lagrangian = |t: &CutoffTable<'_>, o: usize, gamma: f64| {
        let nu = t.best_fraction(o, alpha, gamma);
        Fairness::term(alpha, t.utility_at(o, nu)) - gamma * t.occupancy_at(o, nu)
    };
    for _ in 0..MAX_LOCAL_ROUNDS {
        // (objective, picks, price)
        let mut best: Option<(f64, Picks, f64)> = None;
        for (i, t) in tables.iter().enumerate() {
            let here = lagrangian(t, picks[i].0, gamma);
            for opt in 0..t.options() {
                if opt == picks[i].0 || !improves(lagrangian(t, opt, gamma), here) {
                    continue;
                }
                let mut trial = picks.clone();
                trial[i].0 = opt;
                let (trial, price) = polish(tables, &trial, alpha, capacity)?;
                let s = score(tables, &trial, alpha);
                if s > best.as_ref().map_or(current, |b| b.0) && improves(s, current) {
                    best = Some((s, trial, price));
                }
            }
        }
        match best {
            Some((s, trial, price)) => {
                current = s;
                *picks = trial;
                gamma = price;
            }
            None => break,
        }
    }
    Ok(())
}

fn improves(candidate: f64, current: f64) -> bool {
    if current == f64::NEG_INFINITY {
        candidate > current
    } else {
        candidate > current + 1e-14 * current.abs().max(1e-300)
    }
}

/// Single-file and pairwise cutoff changes that stay within capacity.
fn improve_ttl(tables: &[CutoffTable<'_>], picks: &mut [(usize, f64)], alpha: f64, capacity: f64) {
    let nu = |o: usize| if o == 0 { 0.0 } else { 1.0 };
    let mut current = score(tables, picks, alpha);
    for _ in 0..MAX_LOCAL_ROUNDS {
        let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
        let mut consider = |trial: Vec<(usize, f64)>| {
            if used(tables, &trial) > capacity {
                return;
            }
            let s = score(tables, &trial, alpha);
            if s > best.as_ref().map_or(current, |b| b.0) && improves(s, current) {
                best = Some((s, trial));
            }
        };
        for i in 0..tables.len() {
            for oi in 0..tables[i].options() {
                let mut trial = picks.to_vec();
                trial[i] = (oi, nu(oi));
                consider(trial.clone());
                for j in i + 1..tables.len() {
                    for oj in 0..tables[j].options() {
                        let mut pair = trial.clone();
                        pair[j] = (oj, nu(oj));
                        consider(pair);
                    }
                }
            }
        }
        match best {
            Some((s, trial)) => {
                current = s;
                picks.copy_from_slice(&trial);
            }
            None => break,
        }
    }
}

struct ClassLevel<'a, 'b> {
    table: &'a CutoffTable<'b>,
    class: PolicyClass,
}

impl ClassLevel<'_, '_> {
    fn allocation(&self, opt: usize, nu: f64) -> Allocation {
        Allocation {
            fractions: self.table.fractions(opt, nu),
            utility: self.table.utility_at(opt, nu),
            cost: self.table.occupancy_at(opt, nu),
            multiplier: None,
        }
    }
}

impl LevelCost for ClassLevel<'_, '_> {
    fn cap(&self) -> f64 {
        (0..self.table.options()).map(|o| self.table.utility_at(o, 1.0)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn cheapest(&self, level: f64) -> Result<Allocation> {
        let t = self.table;
        let mut best: Option<(usize, f64, f64)> = None;
        for opt in 0..t.options() {
            if t.utility_at(opt, 1.0) < level {
                continue;
            }
            let nu = match self.class {
                PolicyClass::Fractional if opt > 0 && t.utility_at(opt, 0.0) < level => {
                    let cached = t.mass[opt];
                    let needed = (level / t.rate - t.floor_value * (t.total_mass - cached)) / cached;
                    t.utility.inverse_value(needed).clamp(0.0, 1.0)
                }
                PolicyClass::Fractional => 0.0,
                _ => 1.0,
            };
            let cost = t.occupancy_at(opt, nu);
            if best.is_none_or(|b| cost < b.2) {
                best = Some((opt, nu, cost));
            }
        }
        let (opt, nu, _) = best.ok_or_else(|| Error::numerical(format!("utility level {level} is above the cap")))?;
        Ok(self.allocation(opt, nu))
    }
}

fn solve_class_maxmin(
    inst: &Instance,
    models: &[DiscretizedModel],
    tables: &[CutoffTable<'_>],
    class: PolicyClass,
) -> Result<SolveResult> {
    let levels: Vec<ClassLevel<'_, '_>> = tables.iter().map(|table| ClassLevel { table, class }).collect();
    let refs: Vec<&dyn LevelCost> = levels.iter().map(|l| l as &dyn LevelCost).collect();
    let (allocs, iterations) = lexicographic_maxmin(&refs, inst.capacity)?;
    let fractions = allocs.into_iter().map(|a| a.fractions).collect();
    let diagnostics = Diagnostics { iterations, ..Diagnostics::default() };
    SolveResult::assemble(class, inst, models, fractions, None, diagnostics)
}

/// A point on a per-file cost/utility front, in raw (unscaled) units.
#[derive(Debug, Clone, Copy)]
struct Label {
    cost: f64,
    value: f64,
    node: u32,
}

const ROOT: u32 = u32::MAX;

/// Keeps the points that no cheaper-or-equal point beats in value.
fn pareto(mut labels: Vec<Label>) -> Vec<Label> {
    labels.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(b.value.total_cmp(&a.value)));
    let mut out: Vec<Label> = Vec::with_capacity(labels.len());
    for l in labels {
        if out.last().is_none_or(|p| l.value > p.value) {
            out.push(l);
        }
    }
    out
}

fn merge_fronts(a: &[Label], b: &[Label]) -> Vec<Label> {
    let mut out: Vec<Label> = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len()
            || (i < a.len() && (a[i].cost < b[j].cost || (a[i].cost == b[j].cost && a[i].value >= b[j].value)));
        let l = if take_a {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        if out.last().is_none_or(|p| l.value > p.value) {
            out.push(l);
        }
    }
    out
}

struct Budget {
    used: u128,
}

impl Budget {
    fn spend(&mut self, n: usize) -> Result<()> {
        self.used += n as u128;
        if self.used > ORACLE_LIMIT {
            Err(Error::SearchSpaceTooLarge { size: self.used, limit: ORACLE_LIMIT })
        } else {
            Ok(())
        }
    }
}

/// A per-file front with materialized fractions: `(raw cost, raw utility, fractions)`.
type FileFront = Vec<(f64, f64, Vec<f64>)>;

/// Exact front of monotone policies with fractions on the grid `j / steps`.
///
/// Dynamic programming over bins: the front of policies whose fraction at bin
/// `k` is `j / steps` extends the merged front of all prefixes ending at a
/// level `>= j`. Dominated prefixes cannot complete to a better policy, so the
/// search is exhaustive.
fn soft_front(
    model: &DiscretizedModel,
    utility: &Utility,
    raw_budget: f64,
    steps: usize,
    budget: &mut Budget,
) -> Result<FileFront> {
    let levels: Vec<f64> = (0..=steps).map(|j| j as f64 / steps as f64).collect();
    let mass = model.arrival_mass();
    let dwell = model.dwell_time();
    // nodes[i] = (parent, level index)
    let mut nodes: Vec<(u32, u16)> = Vec::new();
    let mut fronts: Vec<Vec<Label>> = vec![vec![Label { cost: 0.0, value: 0.0, node: ROOT }]; steps + 1];
    for k in 0..=model.bins() {
        let mut merged: Vec<Label> = Vec::new();
        let mut next: Vec<Vec<Label>> = vec![Vec::new(); steps + 1];
        for j in (0..=steps).rev() {
            merged = if k == 0 && j < steps { merged } else { merge_fronts(&merged, &fronts[j]) };
            let mu = levels[j];
            let gain = if mass[k] > 0.0 { utility.value(mu) * mass[k] } else { 0.0 };
            let extended: Vec<Label> = merged
                .iter()
                .filter_map(|l| {
                    let cost = l.cost + mu * dwell[k];
                    (cost <= raw_budget).then(|| {
                        nodes.push((l.node, j as u16));
                        Label { cost, value: l.value + gain, node: (nodes.len() - 1) as u32 }
                    })
                })
                .collect();
            budget.spend(extended.len())?;
            next[j] = extended;
        }
        fronts = next;
    }
    let all = fronts.iter().rev().fold(Vec::new(), |acc, f| merge_fronts(&acc, f));
    Ok(all
        .into_iter()
        .map(|l| {
            let mut fractions = vec![0.0; model.bins() + 1];
            let (mut node, mut k) = (l.node, model.bins() as isize);
            while node != ROOT {
                let (parent, j) = nodes[node as usize];
                fractions[k as usize] = levels[j as usize];
                node = parent;
                k -= 1;
            }
            (raw_occupancy(&fractions, dwell), raw_utility(&fractions, mass, utility), fractions)
        })
        .collect())
}

fn cutoff_front(model: &DiscretizedModel, utility: &Utility, raw_budget: f64, fractions_grid: &[f64]) -> FileFront {
    let bins = model.bins();
    let mut points: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    for opt in 0..=bins + 1 {
        for &nu in if opt == 0 { &[0.0][..] } else { fractions_grid } {
            let fractions: Vec<f64> = (0..=bins).map(|k| if k < opt { nu } else { 0.0 }).collect();
            let cost = raw_occupancy(&fractions, model.dwell_time());
            if cost <= raw_budget {
                points.push((cost, raw_utility(&fractions, model.arrival_mass(), utility), fractions));
            }
        }
    }
    let labels = points.iter().enumerate().map(|(i, p)| Label { cost: p.0, value: p.1, node: i as u32 }).collect();
    pareto(labels).into_iter().map(|l| points[l.node as usize].clone()).collect()
}

/// Exhaustive grid optimum of one policy class.
///
/// Soft policies range over every non-increasing sequence with values in
/// `{0, 1/steps, …, 1}`; fractional policies over every cutoff and grid
/// fraction; TTL policies over every cutoff. Per-file cost/utility fronts are
/// combined across files with the same dominance pruning. The number of
/// generated candidates is limited to [`ORACLE_LIMIT`]. In max-min mode the
/// oracle maximizes the smallest utility only.
pub fn brute_force_oracle(inst: &Instance, class: PolicyClass, steps: usize) -> Result<SolveResult> {
    if steps == 0 {
        return Err(Error::invalid("the oracle needs at least one grid step"));
    }
    if steps > u16::MAX as usize {
        return Err(Error::SearchSpaceTooLarge { size: steps as u128, limit: u16::MAX as u128 });
    }
    let models = inst.models()?;
    let per_file = match class {
        PolicyClass::Soft => 0,
        PolicyClass::Fractional => (inst.bins as u128 + 2) * (steps as u128 + 1),
        PolicyClass::Ttl => inst.bins as u128 + 2,
    };
    let upfront = per_file * inst.files.len() as u128;
    if upfront > ORACLE_LIMIT {
        return Err(Error::SearchSpaceTooLarge { size: upfront, limit: ORACLE_LIMIT });
    }
    let grid: Vec<f64> = match class {
        PolicyClass::Ttl => vec![1.0],
        _ => (0..=steps).map(|j| j as f64 / steps as f64).collect(),
    };
    // Grid points that fill the cache exactly may overshoot by rounding.
    let limit = inst.capacity * (1.0 + FULL_CACHE_SLACK);
    let fronts: Vec<FileFront> = models
        .par_iter()
        .zip(&inst.files)
        .map(|(m, f)| {
            let raw_budget = limit / (m.rate() * f.size);
            match class {
                PolicyClass::Soft => soft_front(m, &f.utility, raw_budget, steps, &mut Budget { used: 0 }),
                _ => Ok(cutoff_front(m, &f.utility, raw_budget, &grid)),
            }
        })
        .collect::<Result<_>>()?;

    // Combine files: labels carry (total cost, objective) and point into the arena.
    let mut budget = Budget { used: upfront };
    let identity = match inst.fairness {
        Fairness::MaxMin => f64::INFINITY,
        Fairness::Alpha(_) => 0.0,
    };
    let mut arena: Vec<(u32, u32)> = Vec::new();
    let mut combined = vec![Label { cost: 0.0, value: identity, node: ROOT }];
    for ((front, model), file) in fronts.iter().zip(&models).zip(&inst.files) {
        let (rate, size) = (model.rate(), file.size);
        let mut next = Vec::with_capacity(combined.len() * front.len());
        for l in &combined {
            for (p, &(raw_cost, raw_value, _)) in front.iter().enumerate() {
                let cost = l.cost + rate * size * raw_cost;
                if cost > limit {
                    continue;
                }
                let w = rate * raw_value;
                let value = match inst.fairness {
                    Fairness::MaxMin => l.value.min(w),
                    Fairness::Alpha(alpha) => l.value + Fairness::term(alpha, w),
                };
                arena.push((l.node, p as u32));
                next.push(Label { cost, value, node: (arena.len() - 1) as u32 });
            }
        }
        budget.spend(next.len())?;
        combined = pareto(next);
    }
    let best = combined
        .iter()
        .copied()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .ok_or_else(|| Error::Infeasible("no grid policy fits the capacity".into()))?;
    if best.value == f64::NEG_INFINITY {
        return Err(Error::Infeasible(format!(
            "no {} grid policy gives every file positive utility",
            class_name(class)
        )));
    }
    let mut fractions = vec![Vec::new(); fronts.len()];
    let mut node = best.node;
    for i in (0..fronts.len()).rev() {
        let (parent, p) = arena[node as usize];
        fractions[i] = fronts[i][p as usize].2.clone();
        node = parent;
    }
    let diagnostics = Diagnostics { iterations: budget.used as usize, ..Diagnostics::default() };
    SolveResult::assemble(class, inst, &models, fractions, None, diagnostics)
}
