//! Reproducible experiment runners: a single solved instance, a sweep over
//! the Weibull shape, the fairness table and Monte-Carlo validation.
//!
//! Every runner is a pure function of its [`ExperimentConfig`], so repeated
//! runs produce identical output.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Fairness, FileSpec, Instance, Utility};
use crate::request_model::{DistributionSpec, InterArrival};
use crate::simulator::{validate_lemma1, ValidationReport};
use crate::solve;
use crate::solver_soft::{PolicyClass, SolveResult};

/// One file of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Weibull shape `a`; ignored when `distribution` is given.
    pub shape: f64,
    /// Request rate `λ`; ignored when `distribution` is given.
    pub rate: f64,
    pub size: f64,
    pub distribution: Option<DistributionSpec>,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self { shape: 0.7, rate: 1.0, size: 1.0, distribution: None }
    }
}

/// Full description of an experiment. Missing JSON fields take the defaults
/// below: three unit files with Weibull shape 0.7, `w(μ) = √μ`, capacity 1.5,
/// sum utility, `K = 100`, `T = 0.03`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub files: Vec<FileConfig>,
    /// Exponent `p` of the utility `w(μ) = μ^p`.
    pub utility_exponent: f64,
    pub capacity: f64,
    pub fairness: Fairness,
    #[serde(rename = "T")]
    pub step: f64,
    #[serde(rename = "K")]
    pub bins: usize,
    /// Simulated time per replication.
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
    /// Shapes visited by the sweep.
    pub shape_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            files: vec![FileConfig::default(); 3],
            utility_exponent: 0.5,
            capacity: 1.5,
            fairness: Fairness::Alpha(0.0),
            step: 0.03,
            bins: 100,
            horizon: 1e5,
            replications: 20,
            seed: 1,
            shape_grid: default_shape_grid(),
        }
    }
}

/// `0.05, 0.10, …, 1.00`.
pub fn default_shape_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

impl ExperimentConfig {
    /// Defaults with request rates 1, 2 and 3, as used by the fairness table.
    pub fn table_defaults() -> Self {
        let mut cfg = Self::default();
        for (f, rate) in cfg.files.iter_mut().zip([1.0, 2.0, 3.0]) {
            f.rate = rate;
        }
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        self.instance().map(|_| ())
    }

    /// Same configuration with every Weibull file set to `shape`.
    pub fn with_shape(&self, shape: f64) -> Self {
        let mut cfg = self.clone();
        for f in &mut cfg.files {
            f.shape = shape;
        }
        cfg
    }

    pub fn file_specs(&self) -> Result<Vec<FileSpec>> {
        let utility = Utility::power(self.utility_exponent)?;
        self.files
            .iter()
            .map(|f| {
                let dist = match &f.distribution {
                    Some(spec) => InterArrival::try_from(spec)?,
                    None => InterArrival::weibull(f.shape, f.rate)?,
                };
                FileSpec::new(f.size, dist, utility.clone())
            })
            .collect()
    }

    pub fn instance(&self) -> Result<Instance> {
        Instance::new(self.file_specs()?, self.capacity, self.fairness, self.step, self.bins)
    }
}

/// Soft, fractional and TTL solutions of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleRun {
    pub soft: SolveResult,
    pub fractional: SolveResult,
    pub ttl: SolveResult,
}

impl SingleRun {
    /// Policies of file `file` at every bin edge, columns `t,soft,fractional,ttl`.
    pub fn to_csv(&self, file: usize) -> String {
        let soft = &self.soft.policies[file];
        let frac = self.fractional.policies[file].fractions();
        let ttl = self.ttl.policies[file].fractions();
        let mut out = String::from("t,soft,fractional,ttl\n");
        for (k, mu) in soft.fractions().iter().enumerate() {
            let t = k as f64 * soft.step();
            writeln!(out, "{t},{mu},{},{}", frac[k], ttl[k]).unwrap();
        }
        out
    }
}

pub fn run_singlerun(cfg: &ExperimentConfig) -> Result<SingleRun> {
    let inst = cfg.instance()?;
    Ok(SingleRun {
        soft: solve(&inst, PolicyClass::Soft)?,
        fractional: solve(&inst, PolicyClass::Fractional)?,
        ttl: solve(&inst, PolicyClass::Ttl)?,
    })
}

/// Optimal objective of each policy class at one shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub shape: f64,
    pub soft: f64,
    pub fractional: f64,
    pub ttl: f64,
}

pub fn run_shape_sweep(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if let Some(&a) = grid.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::Domain { name: "shape", value: a, domain: "(0, 1]" });
    }
    grid.par_iter()
        .map(|&shape| {
            let run = run_singlerun(&cfg.with_shape(shape))?;
            Ok(SweepPoint {
                shape,
                soft: run.soft.objective,
                fractional: run.fractional.objective,
                ttl: run.ttl.objective,
            })
        })
        .collect()
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("a,soft,fractional,ttl\n");
    for p in points {
        writeln!(out, "{},{},{},{}", p.shape, p.soft, p.fractional, p.ttl).unwrap();
    }
    out
}

/// Fairness settings of the table rows.
pub const TABLE_FAIRNESS: [Fairness; 4] =
    [Fairness::Alpha(0.0), Fairness::Alpha(0.5), Fairness::Alpha(2.0), Fairness::MaxMin];

/// Published per-file utilities: rows follow [`TABLE_FAIRNESS`], columns are
/// `(W_1, W_3)` for TTL, fractional and soft.
pub const REFERENCE_FAIRNESS_TABLE: [[f64; 6]; 4] = [
    [0.1963, 2.8335, 0.4712, 2.7913, 0.3322, 2.9262],
    [0.4741, 2.3872, 0.5667, 2.4602, 0.6522, 2.5391],
    [0.8204, 1.6057, 0.8436, 1.7578, 0.8695, 1.9709],
    [0.9215, 1.3150, 0.9999, 0.9999, 1.0000, 1.1475],
];

pub const TABLE_COLUMNS: [&str; 6] = ["ttl_w1", "ttl_w3", "frac_w1", "frac_w3", "soft_w1", "soft_w3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub fairness: Fairness,
    /// Utilities of the first and last file, ordered as [`TABLE_COLUMNS`].
    pub values: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessTable {
    pub rows: Vec<FairnessRow>,
}

impl FairnessTable {
    /// Four-decimal CSV, one row per fairness setting.
    pub fn to_csv(&self) -> String {
        let mut out = format!("alpha,{}\n", TABLE_COLUMNS.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.values.iter().map(|v| format!("{v:.4}")).collect();
            writeln!(out, "{},{}", row.fairness, cells.join(",")).unwrap();
        }
        out
    }
}

/// First- and last-file utilities for every class and fairness row.
pub fn run_fairness_table(cfg: &ExperimentConfig) -> Result<FairnessTable> {
    let base = cfg.instance()?;
    let last = base.files.len() - 1;
    let rows = TABLE_FAIRNESS
        .par_iter()
        .map(|&fairness| {
            let inst = base.with_fairness(fairness)?;
            let mut values = [0.0; 6];
            for (c, class) in [PolicyClass::Ttl, PolicyClass::Fractional, PolicyClass::Soft].into_iter().enumerate() {
                let r = solve(&inst, class)?;
                values[2 * c] = r.files[0].utility;
                values[2 * c + 1] = r.files[last].utility;
            }
            Ok(FairnessRow { fairness, values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FairnessTable { rows })
}

/// Cell-by-cell distance from [`REFERENCE_FAIRNESS_TABLE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableComparison {
    pub tolerance: f64,
    /// `computed − reference`, same layout as the reference.
    pub differences: [[f64; 6]; 4],
    pub matching_cells: usize,
    pub max_abs_difference: f64,
}

impl TableComparison {
    pub fn all_match(&self) -> bool {
        self.matching_cells == 24
    }

    /// `(row fairness, column name, difference)` for every cell off by more
    /// than the tolerance.
    pub fn mismatches(&self) -> Vec<(Fairness, &'static str, f64)> {
        let mut out = Vec::new();
        for (r, row) in self.differences.iter().enumerate() {
            for (c, &d) in row.iter().enumerate() {
                if d.abs() > self.tolerance {
                    out.push((TABLE_FAIRNESS[r], TABLE_COLUMNS[c], d));
                }
            }
        }
        out
    }
}

pub fn compare_with_reference(table: &FairnessTable, tolerance: f64) -> TableComparison {
    let mut differences = [[0.0; 6]; 4];
    let mut matching_cells = 0;
    let mut max_abs_difference = 0.0f64;
    for (r, row) in table.rows.iter().enumerate().take(4) {
        for c in 0..6 {
            let d = row.values[c] - REFERENCE_FAIRNESS_TABLE[r][c];
            differences[r][c] = d;
            max_abs_difference = max_abs_difference.max(d.abs());
            if d.abs() <= tolerance {
                matching_cells += 1;
            }
        }
    }
    TableComparison { tolerance, differences, matching_cells, max_abs_difference }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeMatch {
    pub shape: f64,
    pub table: FairnessTable,
    pub comparison: TableComparison,
}

/// Shape whose fairness table is closest to the published one: most cells
/// within `tolerance`, then smallest worst-case difference.
pub fn best_matching_shape(cfg: &ExperimentConfig, grid: &[f64], tolerance: f64) -> Result<ShapeMatch> {
    let candidates = grid
        .iter()
        .map(|&shape| {
            let table = run_fairness_table(&cfg.with_shape(shape))?;
            let comparison = compare_with_reference(&table, tolerance);
            Ok(ShapeMatch { shape, table, comparison })
        })
        .collect::<Result<Vec<_>>>()?;
    candidates
        .into_iter()
        .reduce(|best, m| {
            let better = m.comparison.matching_cells > best.comparison.matching_cells
                || (m.comparison.matching_cells == best.comparison.matching_cells
                    && m.comparison.max_abs_difference < best.comparison.max_abs_difference);
            if better {
                m
            } else {
                best
            }
        })
        .ok_or_else(|| Error::invalid("empty shape grid"))
}

/// Monte-Carlo validation of the soft policies of every file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub solution: SolveResult,
    pub files: Vec<ValidationReport>,
}

impl ValidateReport {
    pub fn max_abs_z(&self) -> f64 {
        self.files.iter().map(|f| f.max_abs_z()).fold(0.0, f64::max)
    }
}

pub fn run_validate(cfg: &ExperimentConfig) -> Result<ValidateReport> {
    let inst = cfg.instance()?;
    let solution = solve(&inst, PolicyClass::Soft)?;
    let files = inst
        .files
        .iter()
        .zip(&solution.policies)
        .enumerate()
        .map(|(i, (file, policy))| {
            validate_lemma1(file, policy, cfg.replications, cfg.horizon, cfg.seed.wrapping_add(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidateReport { solution, files })
}
