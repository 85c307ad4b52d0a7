//! Property suite: runs the engine on seeded instances and checks it against
//! the reference oracles and the algorithm's analytical guarantees.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::gen::{derive_seed, generate, Family, GenSpec};
use crate::engine::{run_with, EngineOptions, EngineView, EventKind, Observer, Trace, TraceEvent};
use crate::instance::{matching_ta_cost, solution_cost, Instance, RequestId, ServerId, Solution};
use crate::netcost::Gamma;
use crate::num::Q;
use crate::oracles::{
    enumerate_aug_paths, min_cost_matching, opt_bruteforce, opt_hungarian, vrm_with_mv_servers, OracleConfig,
};
use crate::slack::{check_invariants, CostTable, SlackGraph};

/// The property a failed or passed check belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Engine and explicit virtual-server algorithm agree on pairs and times.
    Differential,
    /// Search minimum equals the exhaustive minimum, real and virtual.
    ShortestPath,
    /// Dual invariants after every dual update.
    Invariants,
    /// Every enumerated augmenting path has `φ >= 0`.
    Nonnegativity,
    /// `mt - a(r) = Φ_r / γ`.
    MatchTime,
    /// No free request's `φ` drops across an augmentation.
    Monotonicity,
    /// `D(M) <= 2/(γ-1)·ΣΦ`, `cost <= D(M) + 2/γ·ΣΦ`, `Φ_i <= γ·D(OPT)`.
    Aggregate,
    /// `D(M_off) <= γ·D(min matching on the saturated set)` at every augmentation.
    SaturatedSet,
    /// Brute-force optimum equals the Hungarian optimum.
    Opt,
    /// The engine itself failed.
    Engine,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::Differential,
        Check::ShortestPath,
        Check::Invariants,
        Check::Nonnegativity,
        Check::MatchTime,
        Check::Monotonicity,
        Check::Aggregate,
        Check::SaturatedSet,
        Check::Opt,
        Check::Engine,
    ];
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub check: Check,
    pub message: String,
}

/// Which checks to run on an instance.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub gamma: Gamma,
    /// Compare with the explicit virtual-server algorithm.
    pub differential: bool,
    /// Largest `m` for exhaustive path enumeration at every step (0 disables).
    pub enumerate_up_to: usize,
    /// Largest `m` for the brute-force optimum cross-check (0 disables).
    pub bruteforce_up_to: usize,
    /// Check the saturated-set bound at every augmentation.
    pub saturated_set: bool,
    pub oracle: OracleConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            gamma: Gamma::default(),
            differential: true,
            enumerate_up_to: 8,
            bruteforce_up_to: 7,
            saturated_set: true,
            oracle: OracleConfig::default(),
        }
    }
}

/// Outcome for one instance: how many times each check ran, and what failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub counts: BTreeMap<Check, u64>,
    pub failures: Vec<Failure>,
}

impl Verdict {
    fn pass(&mut self, check: Check) {
        *self.counts.entry(check).or_default() += 1;
    }

    fn expect(&mut self, check: Check, ok: bool, message: impl FnOnce() -> String) {
        self.pass(check);
        if !ok {
            self.failures.push(Failure { check, message: message() });
        }
    }

    pub fn count(&self, check: Check) -> u64 {
        self.counts.get(&check).copied().unwrap_or(0)
    }

    pub fn failed(&self, check: Check) -> usize {
        self.failures.iter().filter(|f| f.check == check).count()
    }
}

/// Per-event checks run from inside the engine.
struct StepAudit<'a> {
    costs: CostTable<'a>,
    options: &'a VerifyOptions,
    enumerate: bool,
    verdict: Verdict,
}

impl StepAudit<'_> {
    fn paths(&mut self, view: &dyn EngineView, event: &TraceEvent) {
        let inst = view.inst();
        let duals = view.duals();
        let now = view.now();
        let gamma = view.gamma();
        let at = format!("{} {} at {}", event.kind.label(), describe(event.kind), now);
        for (r, cached) in view.free_phis() {
            let g = match SlackGraph::new(&self.costs, r, now.clone(), view.m_off(), &duals, view.arrived_servers(), true)
            {
                Ok(g) => g,
                Err(e) => {
                    self.verdict.expect(Check::ShortestPath, false, || format!("{at}: {e}"));
                    continue;
                }
            };
            let real = g.min_real_aug_path();
            let virt = g.min_virtual_aug_path();
            let (real, virt) = match (real, virt) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    self.verdict.expect(Check::ShortestPath, false, || format!("{at}: search for {r} failed: {e}"));
                    continue;
                }
            };
            let real_phi = real.as_ref().map(|p| p.phi.clone());
            self.verdict.expect(Check::ShortestPath, real_phi == cached, || {
                format!("{at}: engine holds φ({r}) = {cached:?}, search gives {real_phi:?}")
            });
            if !self.enumerate {
                continue;
            }
            let cfg = &self.options.oracle;
            let arrived = view.arrived_servers();
            for (virtual_t, found) in [(None, real.map(|p| (p.path, p.phi))), (Some(now), Some((virt.path, virt.phi)))] {
                let kind = if virtual_t.is_some() { "virtual" } else { "real" };
                let all = match enumerate_aug_paths(inst, view.m_off(), r, arrived, gamma, virtual_t, cfg) {
                    Ok(all) => all,
                    Err(e) => {
                        self.verdict.expect(Check::ShortestPath, false, || format!("{at}: enumeration failed: {e}"));
                        continue;
                    }
                };
                for (path, phi) in &all {
                    self.verdict.expect(Check::Nonnegativity, !phi.is_negative(), || {
                        format!("{at}: {kind} path {path} has φ = {phi}")
                    });
                }
                let best = all.into_iter().min_by(|a, b| (&a.1, &a.0).cmp(&(&b.1, &b.0)));
                self.verdict.expect(Check::ShortestPath, best == found, || {
                    format!("{at}: {kind} minimum from {r}: search {found:?}, enumeration {best:?}")
                });
            }
        }
    }

    fn augmentation(&mut self, view: &dyn EngineView, event: &TraceEvent) {
        let now = view.now();
        let duals = view.duals();
        let report = check_invariants(&self.costs, &duals, view.m_off(), view.arrived_requests(), now);
        self.verdict.expect(Check::Invariants, report.passed(), || format!("at {now}: {:?}", report.violations));

        if let (Some(before), Some(after)) = (&event.phi_before, &event.phi_after) {
            for a in after {
                if let Some(b) = before.iter().find(|b| b.request == a.request) {
                    self.verdict.expect(Check::Monotonicity, a.phi >= b.phi, || {
                        format!("at {now}: φ({}) fell from {} to {}", a.request, b.phi, a.phi)
                    });
                }
            }
        }

        if self.options.saturated_set {
            let inst = view.inst();
            let pairs = view.m_off().pairs();
            let requests: Vec<RequestId> = pairs.iter().map(|p| p.0).collect();
            let mut servers: Vec<ServerId> = pairs.iter().map(|p| p.1).collect();
            servers.sort();
            let d_off = matching_ta_cost(inst, &pairs).expect("offline matching is valid");
            let d_min = min_cost_matching(inst, &requests, &servers).cost;
            let bound = view.gamma().value() * &d_min;
            self.verdict.expect(Check::SaturatedSet, d_off <= bound, || {
                format!("at {now}: D(M_off) = {d_off} exceeds γ·{d_min}")
            });
        }
    }
}

fn describe(kind: EventKind) -> String {
    match kind {
        EventKind::Sa(s) => s.to_string(),
        EventKind::Ra(r) | EventKind::Au(r) => r.to_string(),
    }
}

impl Observer for StepAudit<'_> {
    fn on_event(&mut self, view: &dyn EngineView, event: &TraceEvent) -> Result<(), String> {
        self.paths(view, event);
        if matches!(event.kind, EventKind::Au(_)) {
            self.augmentation(view, event);
        }
        Ok(())
    }
}

/// Runs every enabled check on one instance.
pub fn verify_instance(inst: &Instance, options: &VerifyOptions) -> Verdict {
    let m = inst.m();
    let mut audit = StepAudit {
        costs: CostTable::new(inst, options.gamma.clone()),
        options,
        enumerate: m <= options.enumerate_up_to,
        verdict: Verdict::default(),
    };
    let engine_options = EngineOptions { gamma: options.gamma.clone(), audit: true, snapshots: true, ..Default::default() };
    let run = run_with(inst, engine_options, &mut audit);
    let mut verdict = audit.verdict;
    let (solution, trace) = match run {
        Ok(x) => x,
        Err(e) => {
            verdict.expect(Check::Engine, false, || e.to_string());
            return verdict;
        }
    };
    verdict.pass(Check::Engine);

    if options.differential {
        match vrm_with_mv_servers(inst, &options.gamma) {
            Ok(mv) => {
                verdict.expect(Check::Differential, mv.solution == solution && mv.final_phi == trace.final_phi, || {
                    format!("engine {:?} vs virtual-server run {:?}", solution.pairs, mv.solution.pairs)
                });
            }
            Err(e) => verdict.expect(Check::Differential, false, || format!("virtual-server run failed: {e}")),
        }
    }

    for rec in &solution.pairs {
        let wait = &rec.time - &inst.request(rec.request).arrival;
        let expected = trace.phi(rec.request) / options.gamma.value();
        verdict.expect(Check::MatchTime, wait == expected, || {
            format!("{} waited {wait}, Φ/γ = {expected}", rec.request)
        });
    }

    let opt = opt_hungarian(inst);
    aggregate_bounds(inst, &options.gamma, &solution, &trace, &opt.cost, &mut verdict);

    if m <= options.bruteforce_up_to {
        match opt_bruteforce(inst, &options.oracle) {
            Ok(brute) => verdict.expect(Check::Opt, brute.cost == opt.cost, || {
                format!("brute force {} vs Hungarian {}", brute.cost, opt.cost)
            }),
            Err(e) => verdict.expect(Check::Opt, false, || e.to_string()),
        }
    }
    verdict
}

fn aggregate_bounds(inst: &Instance, gamma: &Gamma, solution: &Solution, trace: &Trace, d_opt: &Q, verdict: &mut Verdict) {
    let g = gamma.value();
    let phi_total = trace.phi_total();
    let d_vrm = matching_ta_cost(inst, &solution.as_pairs()).expect("valid");
    let cost = solution_cost(inst, solution).expect("valid").total;
    let d_bound = Q::from_int(2) / (g - Q::one()) * &phi_total;
    verdict.expect(Check::Aggregate, d_vrm <= d_bound, || format!("D(M) = {d_vrm} exceeds 2/(γ-1)·ΣΦ = {d_bound}"));
    let cost_bound = &d_vrm + Q::from_int(2) / g * &phi_total;
    verdict.expect(Check::Aggregate, cost <= cost_bound, || format!("cost {cost} exceeds D(M) + 2/γ·ΣΦ = {cost_bound}"));
    let phi_bound = g * d_opt;
    for (i, phi) in trace.final_phi.iter().enumerate() {
        verdict.expect(Check::Aggregate, phi <= &phi_bound, || {
            format!("Φ of {} is {phi}, above γ·D(OPT) = {phi_bound}", RequestId::from_index(i))
        });
    }
}

/// Named instance sets for `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// `m` cycles through 1..=8; every check at every step.
    Small,
    /// `m` cycles through 1..=16; exhaustive enumeration only up to 8.
    Full,
}

impl Suite {
    pub fn max_m(&self) -> usize {
        match self {
            Suite::Small => 8,
            Suite::Full => 16,
        }
    }
}

/// Instance `index` of a suite: families rotate fastest, then `m`.
pub fn suite_spec(suite: Suite, seed: u64, index: usize) -> GenSpec {
    let family = Family::ALL[index % Family::ALL.len()];
    let m = 1 + (index / Family::ALL.len()) % suite.max_m();
    GenSpec::new(family, m, derive_seed(seed, family, m, index))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceFailure {
    pub index: usize,
    pub family: Family,
    pub m: usize,
    pub seed: u64,
    pub failure: Failure,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub instances: usize,
    pub counts: BTreeMap<Check, u64>,
    pub failures: Vec<InstanceFailure>,
    /// Instances per family and size.
    #[serde(skip)]
    pub coverage: BTreeMap<(Family, usize), usize>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn count(&self, check: Check) -> u64 {
        self.counts.get(&check).copied().unwrap_or(0)
    }

    pub fn failed(&self, check: Check) -> usize {
        self.failures.iter().filter(|f| f.failure.check == check).count()
    }
}

/// Verifies `count` suite instances in parallel; results merge by index.
pub fn verify_suite(suite: Suite, seed: u64, count: usize, options: &VerifyOptions) -> SuiteReport {
    let verdicts: Vec<(GenSpec, Verdict)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let spec = suite_spec(suite, seed, i);
            let inst = generate(&spec).expect("suite specs are valid");
            (spec, verify_instance(&inst, options))
        })
        .collect();
    let mut report = SuiteReport { instances: count, ..Default::default() };
    for (index, (spec, verdict)) in verdicts.into_iter().enumerate() {
        *report.coverage.entry((spec.family, spec.m)).or_default() += 1;
        for (check, n) in verdict.counts {
            *report.counts.entry(check).or_default() += n;
        }
        report.failures.extend(verdict.failures.into_iter().map(|failure| InstanceFailure {
            index,
            family: spec.family,
            m: spec.m,
            seed: spec.seed,
            failure,
        }));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_passes_everything() {
        let inst = Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap();
        let v = verify_instance(&inst, &VerifyOptions::default());
        assert!(v.failures.is_empty(), "{:?}", v.failures);
        for check in Check::ALL {
            assert!(v.count(check) > 0, "{check} never ran");
        }
    }

    #[test]
    fn small_suite_is_clean() {
        let report = verify_suite(Suite::Small, 5, 40, &VerifyOptions::default());
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.coverage.values().sum::<usize>(), 40);
    }

    #[test]
    fn suite_rotates_families_then_sizes() {
        let specs: Vec<(Family, usize)> = (0..9).map(|i| suite_spec(Suite::Small, 0, i)).map(|s| (s.family, s.m)).collect();
        assert_eq!(specs[0], (Family::Uniform, 1));
        assert_eq!(specs[3], (Family::Poisson, 1));
        assert_eq!(specs[4], (Family::Uniform, 2));
        assert_eq!(specs[8], (Family::Uniform, 3));
    }
}
