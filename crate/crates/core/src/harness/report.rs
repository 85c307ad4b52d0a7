//! Per-instance comparison of the online algorithm against the offline
//! optimum and the greedy baseline.

use std::time::Instant;

use serde::Serialize;

use crate::engine::{run_with, EngineError, EngineOptions, Trace};
use crate::instance::{matching_ta_cost, solution_cost, Instance, Solution};
use crate::netcost::Gamma;
use crate::num::Q;
use crate::oracles::{greedy_baseline, opt_hungarian, OptMatching};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AuditResult {
    /// Every augmentation was followed by a clean invariant audit.
    Passed { augmentations: usize },
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub m: usize,
    pub gamma: Q,
    pub cost_vrm: Q,
    pub cost_opt: Q,
    pub cost_greedy: Q,
    /// `cost_vrm / cost_opt`; absent when the optimum is free.
    pub ratio: Option<Q>,
    /// `Σ Φ_i`.
    pub phi_total: Q,
    /// TA distance of the online matching.
    pub distance_vrm: Q,
    pub audit: AuditResult,
    pub wall_time_ms: f64,
}

/// Everything a report is built from, kept for callers that need more.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub solution: Solution,
    pub trace: Trace,
    pub opt: OptMatching,
    pub greedy: Solution,
}

pub fn ratio(cost: &Q, opt: &Q) -> Option<Q> {
    if opt.is_zero() {
        return cost.is_zero().then(Q::one);
    }
    Some(cost / opt)
}

/// Runs the engine (timed), then the offline optimum and the greedy baseline.
pub fn run_report(inst: &Instance, options: EngineOptions) -> Result<RunOutcome, EngineError> {
    let gamma: Gamma = options.gamma.clone();
    let audit = options.audit;
    let start = Instant::now();
    let (solution, trace) = run_with(inst, options, &mut ())?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;

    let cost_vrm = solution_cost(inst, &solution).expect("engine output is a valid solution").total;
    let opt = opt_hungarian(inst);
    let greedy = greedy_baseline(inst);
    let cost_greedy = solution_cost(inst, &greedy).expect("greedy output is a valid solution").total;
    let distance_vrm = matching_ta_cost(inst, &solution.as_pairs()).expect("valid pairs");
    let report = RunReport {
        m: inst.m(),
        gamma: gamma.value().clone(),
        ratio: ratio(&cost_vrm, &opt.cost),
        cost_vrm,
        cost_opt: opt.cost.clone(),
        cost_greedy,
        phi_total: trace.phi_total(),
        distance_vrm,
        audit: if audit { AuditResult::Passed { augmentations: trace.augmentations().count() } } else { AuditResult::Skipped },
        wall_time_ms,
    };
    Ok(RunOutcome { report, solution, trace, opt, greedy })
}

/// One row of the algorithm comparison table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompareRow {
    pub algorithm: &'static str,
    pub cost: Q,
    pub distance: Q,
    pub delay: Q,
    pub ratio: Option<Q>,
}

/// Online algorithm, offline optimum and greedy, costed the same way. The
/// optimum is an offline matching, so it pays distance only.
pub fn compare(inst: &Instance, gamma: Gamma) -> Result<Vec<CompareRow>, EngineError> {
    let out = run_report(inst, EngineOptions { gamma, audit: true, snapshots: false, ..Default::default() })?;
    let vrm = solution_cost(inst, &out.solution).expect("valid");
    let greedy = solution_cost(inst, &out.greedy).expect("valid");
    let opt = &out.opt.cost;
    Ok(vec![
        CompareRow {
            algorithm: "vrm",
            ratio: ratio(&vrm.total, opt),
            cost: vrm.total,
            distance: vrm.distance_total,
            delay: vrm.delay_total,
        },
        CompareRow { algorithm: "opt", cost: opt.clone(), distance: opt.clone(), delay: Q::zero(), ratio: ratio(opt, opt) },
        CompareRow {
            algorithm: "greedy",
            ratio: ratio(&greedy.total, opt),
            cost: greedy.total,
            distance: greedy.distance_total,
            delay: greedy.delay_total,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_report() {
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 0)]).unwrap();
        let out = run_report(&inst, EngineOptions::default()).unwrap();
        assert_eq!(out.report.cost_vrm, Q::from_int(12));
        assert_eq!(out.report.cost_opt, Q::from_int(4));
        assert_eq!(out.report.ratio, Some(Q::from_int(3)));
        assert_eq!(out.report.audit, AuditResult::Passed { augmentations: 1 });
    }

    #[test]
    fn two_by_two_comparison() {
        let inst = Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap();
        let rows = compare(&inst, Gamma::default()).unwrap();
        let costs: Vec<(&str, Q)> = rows.iter().map(|r| (r.algorithm, r.cost.clone())).collect();
        assert_eq!(costs, vec![("vrm", Q::from_int(33)), ("opt", Q::from_int(11)), ("greedy", Q::from_int(22))]);
    }
}
