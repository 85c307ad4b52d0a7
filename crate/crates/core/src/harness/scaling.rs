//! Competitive-ratio sweep over instance sizes, with CSV output and a frozen
//! per-point baseline.
//!
//! CSV columns (schema version 1):
//! `schema_version,family,m,instances,max_ratio,mean_ratio,normalized_max_ratio,max_ratio_exact`
//! where `normalized_max_ratio = max_ratio / (sqrt(m) * ln(m+2)^2)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gen::{derive_seed, generate, Family, GenSpec};
use super::report::ratio;
use crate::engine::{run_with, EngineError, EngineOptions};
use crate::instance::solution_cost;
use crate::netcost::Gamma;
use crate::num::Q;
use crate::oracles::opt_hungarian;

pub const SCALING_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("empty m grid")]
    Empty,
    #[error("bad grid entry {0:?}")]
    Entry(String),
    #[error("'...' needs two leading values and a final value, as in 4,8,...,1024")]
    Ellipsis,
}

/// Parses `4,8,16` or the doubling shorthand `4,8,...,1024`.
pub fn parse_m_grid(text: &str) -> Result<Vec<usize>, GridError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    let num = |p: &str| p.parse::<usize>().ok().filter(|&m| m >= 1).ok_or_else(|| GridError::Entry(p.into()));
    match parts.iter().position(|p| *p == "...") {
        None => {
            let grid: Vec<usize> = parts.iter().map(|p| num(p)).collect::<Result<_, _>>()?;
            if grid.is_empty() {
                return Err(GridError::Empty);
            }
            Ok(grid)
        }
        Some(i) if i == 2 && parts.len() == 4 => {
            let (a, b, last) = (num(parts[0])?, num(parts[1])?, num(parts[3])?);
            if b <= a || b % a != 0 || last < b {
                return Err(GridError::Ellipsis);
            }
            let factor = b / a;
            let mut grid = vec![a];
            let mut m = b;
            while m <= last {
                grid.push(m);
                m *= factor;
            }
            Ok(grid)
        }
        Some(_) => Err(GridError::Ellipsis),
    }
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub grid: Vec<usize>,
    pub per_point: usize,
    pub seed: u64,
    pub families: Vec<Family>,
    pub gamma: Gamma,
}

impl ScalingConfig {
    pub fn new(grid: Vec<usize>, per_point: usize, seed: u64) -> Self {
        ScalingConfig { grid, per_point, seed, families: Family::ALL.to_vec(), gamma: Gamma::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub family: Family,
    pub m: usize,
    pub instances: usize,
    /// Instances whose optimum is zero while the online cost is not; they
    /// have no finite ratio and are left out of the statistics.
    pub unbounded: usize,
    pub max_ratio: Q,
    pub mean_ratio: Q,
    pub normalized_max_ratio: f64,
}

pub fn normalizer(m: usize) -> f64 {
    let m = m as f64;
    m.sqrt() * (m + 2.0).ln().powi(2)
}

/// Runs every (family, m, instance) job and folds the ratios per point.
/// Jobs run in parallel; results are merged in job order, so the output does
/// not depend on scheduling.
pub fn run_scaling(config: &ScalingConfig) -> Result<Vec<ScalingPoint>, EngineError> {
    let jobs: Vec<(Family, usize, usize)> = config
        .families
        .iter()
        .flat_map(|&f| config.grid.iter().flat_map(move |&m| (0..config.per_point).map(move |i| (f, m, i))))
        .collect();
    let ratios: Vec<Option<Q>> = jobs
        .par_iter()
        .map(|&(family, m, i)| {
            let spec = GenSpec::new(family, m, derive_seed(config.seed, family, m, i));
            let inst = generate(&spec).expect("default family parameters are valid");
            let options = EngineOptions { gamma: config.gamma.clone(), audit: false, snapshots: false, ..Default::default() };
            let (solution, _) = run_with(&inst, options, &mut ())?;
            let cost = solution_cost(&inst, &solution).expect("engine output is valid").total;
            Ok(ratio(&cost, &opt_hungarian(&inst).cost))
        })
        .collect::<Result<_, EngineError>>()?;

    let mut points = Vec::new();
    for (chunk, job) in ratios.chunks(config.per_point.max(1)).zip(jobs.iter().step_by(config.per_point.max(1))) {
        let (family, m, _) = *job;
        let finite: Vec<&Q> = chunk.iter().flatten().collect();
        let max_ratio = finite.iter().copied().max().cloned().unwrap_or_else(Q::zero);
        let mean_ratio = if finite.is_empty() {
            Q::zero()
        } else {
            finite.iter().copied().sum::<Q>() / Q::from_int(finite.len() as i64)
        };
        points.push(ScalingPoint {
            family,
            m,
            instances: chunk.len(),
            unbounded: chunk.len() - finite.len(),
            normalized_max_ratio: max_ratio.to_f64() / normalizer(m),
            max_ratio,
            mean_ratio,
        });
    }
    Ok(points)
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    schema_version: u32,
    family: &'a str,
    m: usize,
    instances: usize,
    max_ratio: String,
    mean_ratio: String,
    normalized_max_ratio: String,
    max_ratio_exact: String,
}

pub fn write_csv(points: &[ScalingPoint], digits: usize, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(CsvRow {
            schema_version: SCALING_SCHEMA_VERSION,
            family: p.family.name(),
            m: p.m,
            instances: p.instances,
            max_ratio: p.max_ratio.to_decimal_string(digits),
            mean_ratio: p.mean_ratio.to_decimal_string(digits),
            normalized_max_ratio: format!("{:.*}", digits, p.normalized_max_ratio),
            max_ratio_exact: p.max_ratio.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Whether each family's normalized ratio trends down over its three largest
/// sizes: with three points evenly spaced in `log m`, the least-squares slope
/// has the sign of `last - first`.
pub fn top_trend_non_increasing(points: &[ScalingPoint]) -> Vec<(Family, bool)> {
    let mut families: Vec<Family> = points.iter().map(|p| p.family).collect();
    families.dedup();
    families
        .into_iter()
        .map(|f| {
            let mut series: Vec<&ScalingPoint> = points.iter().filter(|p| p.family == f).collect();
            series.sort_by_key(|p| p.m);
            let top = &series[series.len().saturating_sub(3)..];
            let ok = match (top.first(), top.last()) {
                (Some(a), Some(b)) => b.normalized_max_ratio <= a.normalized_max_ratio,
                _ => true,
            };
            (f, ok)
        })
        .collect()
}

/// Recorded maximum ratios of an accepted sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub schema_version: u32,
    pub seed: u64,
    pub per_point: usize,
    pub points: Vec<BaselinePoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselinePoint {
    pub family: String,
    pub m: usize,
    /// Exact rational as `p/q`.
    pub max_ratio: String,
}

impl Baseline {
    pub fn record(config: &ScalingConfig, points: &[ScalingPoint]) -> Self {
        Baseline {
            schema_version: SCALING_SCHEMA_VERSION,
            seed: config.seed,
            per_point: config.per_point,
            points: points
                .iter()
                .map(|p| BaselinePoint { family: p.family.name().into(), m: p.m, max_ratio: p.max_ratio.to_string() })
                .collect(),
        }
    }

    /// Points whose maximum ratio exceeds the recorded one, or that have no
    /// recorded counterpart.
    pub fn regressions(&self, points: &[ScalingPoint]) -> Vec<String> {
        points
            .iter()
            .filter_map(|p| {
                let recorded = self.points.iter().find(|b| b.family == p.family.name() && b.m == p.m);
                let Some(b) = recorded else {
                    return Some(format!("{} m={}: no recorded baseline", p.family, p.m));
                };
                match Q::parse_exact(&b.max_ratio) {
                    Ok(limit) if p.max_ratio <= limit => None,
                    Ok(limit) => Some(format!("{} m={}: max ratio {} exceeds {}", p.family, p.m, p.max_ratio, limit)),
                    Err(e) => Some(format!("{} m={}: bad baseline value: {e}", p.family, p.m)),
                }
            })
            .collect()
    }
}
