//! The algorithm with explicit moving virtual servers: every free request
//! tracks both its cheapest real augmenting path `P_i` and its cheapest
//! virtual augmenting path `P̃_i`, and becomes ready once
//! `φ_t(P̃_i) >= φ(P_i)`. This loop shares nothing with the engine beyond the
//! slack graphs and the dual update, so agreement between the two is a
//! meaningful check.

use thiserror::Error;

use crate::engine::EventKind;
use crate::instance::{Instance, MatchRecord, RequestId, ServerId, Solution};
use crate::netcost::{AugPath, AugmentError, Gamma, Matching};
use crate::num::{Extended, Q};
use crate::slack::{dual_update, CostTable, DualStore, SlackError, SlackGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MvError {
    #[error(transparent)]
    Slack(#[from] SlackError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("at {time}: virtual path of {request} costs {phi}, expected γ times its wait {expected}")]
    VirtualCost { time: Q, request: RequestId, phi: Q, expected: Q },
    #[error("run stalled at {time} with {matched} of {m} requests matched")]
    Stalled { time: Q, matched: usize, m: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MvRun {
    pub solution: Solution,
    /// γ-net-cost of the path each request augmented along, by request index.
    pub final_phi: Vec<Q>,
    /// Arrivals and augmentations in processing order.
    pub events: Vec<(Q, EventKind)>,
    /// Number of `φ_t(P̃_i) = γ(t - a_i)` checks performed.
    pub checks: u64,
}

struct Tracked {
    /// `φ(P_i)`; infinite while no free server has arrived.
    real: Extended,
    virtual_path: AugPath,
    /// `φ_{anchor}(P̃_i)`.
    virtual_phi: Q,
    anchor: Q,
}

struct Loop<'a> {
    inst: &'a Instance,
    costs: CostTable<'a>,
    gamma: Gamma,
    now: Q,
    arrived_requests: Vec<bool>,
    arrived_servers: Vec<bool>,
    m_off: Matching,
    duals: DualStore,
    tracked: Vec<Option<Tracked>>,
    records: Vec<Option<MatchRecord>>,
    final_phi: Vec<Option<Q>>,
    events: Vec<(Q, EventKind)>,
    checks: u64,
}

/// Runs the explicit virtual-server algorithm to completion.
pub fn vrm_with_mv_servers(inst: &Instance, gamma: &Gamma) -> Result<MvRun, MvError> {
    let m = inst.m();
    let mut lp = Loop {
        inst,
        costs: CostTable::new(inst, gamma.clone()),
        gamma: gamma.clone(),
        now: Q::zero(),
        arrived_requests: vec![false; m],
        arrived_servers: vec![false; m],
        m_off: Matching::empty(m),
        duals: DualStore::zeros(m),
        tracked: (0..m).map(|_| None).collect(),
        records: vec![None; m],
        final_phi: vec![None; m],
        events: Vec::new(),
        checks: 0,
    };
    let mut arrivals: Vec<(Q, EventKind)> = inst
        .server_ids()
        .map(|s| (inst.server(s).arrival.clone(), EventKind::Sa(s)))
        .chain(inst.request_ids().map(|r| (inst.request(r).arrival.clone(), EventKind::Ra(r))))
        .collect();
    arrivals.sort();
    let mut next = 0;
    loop {
        let arrival = arrivals.get(next).map(|(t, _)| t.clone());
        let ready = lp.earliest_ready();
        let t = match (arrival, ready) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => break,
        };
        lp.now = t;
        while next < arrivals.len() && arrivals[next].0 == lp.now {
            let kind = arrivals[next].1;
            next += 1;
            match kind {
                EventKind::Sa(s) => lp.server_arrives(s)?,
                EventKind::Ra(r) => lp.request_arrives(r)?,
                EventKind::Au(_) => unreachable!("arrivals only"),
            }
            lp.events.push((lp.now.clone(), kind));
            lp.check_virtual()?;
        }
        while let Some(r) = lp.lowest_ready() {
            lp.augment(r)?;
            lp.events.push((lp.now.clone(), EventKind::Au(r)));
            lp.check_virtual()?;
        }
    }
    if lp.m_off.len() < m {
        return Err(MvError::Stalled { time: lp.now, matched: lp.m_off.len(), m });
    }
    let records = lp.records.into_iter().map(|r| r.expect("all matched")).collect();
    let final_phi = lp.final_phi.into_iter().map(|p| p.expect("all matched")).collect();
    Ok(MvRun { solution: Solution::new(records), final_phi, events: lp.events, checks: lp.checks })
}

impl Loop<'_> {
    fn graph(&self, r: RequestId, include_virtual: bool) -> Result<SlackGraph<'_>, SlackError> {
        SlackGraph::new(&self.costs, r, self.now.clone(), &self.m_off, &self.duals, &self.arrived_servers, include_virtual)
    }

    fn real_phi(&self, r: RequestId) -> Result<Extended, MvError> {
        let best = self.graph(r, false)?.min_real_aug_path()?;
        Ok(Extended::from(best.map(|p| p.phi)))
    }

    fn track(&mut self, r: RequestId) -> Result<(), MvError> {
        let real = self.real_phi(r)?;
        let best = self.graph(r, true)?.min_virtual_aug_path()?;
        self.tracked[r.index()] =
            Some(Tracked { real, virtual_path: best.path, virtual_phi: best.phi, anchor: self.now.clone() });
        Ok(())
    }

    fn free(&self) -> Vec<RequestId> {
        self.tracked.iter().enumerate().filter(|(_, t)| t.is_some()).map(|(i, _)| RequestId::from_index(i)).collect()
    }

    /// `P_i` may change for everyone; `P̃_i` keeps its path and value.
    fn server_arrives(&mut self, s: ServerId) -> Result<(), MvError> {
        self.arrived_servers[s.index()] = true;
        for r in self.free() {
            let real = self.real_phi(r)?;
            self.tracked[r.index()].as_mut().expect("free").real = real;
        }
        Ok(())
    }

    fn request_arrives(&mut self, r: RequestId) -> Result<(), MvError> {
        self.arrived_requests[r.index()] = true;
        self.track(r)
    }

    fn virtual_now(&self, t: &Tracked) -> Q {
        &t.virtual_phi + self.gamma.value() * (&self.now - &t.anchor)
    }

    fn ready_time(&self, t: &Tracked) -> Option<Q> {
        let Extended::Finite(real) = &t.real else { return None };
        let when = &t.anchor + (real - &t.virtual_phi) / self.gamma.value();
        Some(when.max(self.now.clone()))
    }

    fn earliest_ready(&self) -> Option<Q> {
        self.tracked.iter().flatten().filter_map(|t| self.ready_time(t)).min()
    }

    fn lowest_ready(&self) -> Option<RequestId> {
        self.tracked.iter().enumerate().find_map(|(i, t)| {
            let t = t.as_ref()?;
            let Extended::Finite(real) = &t.real else { return None };
            (&self.virtual_now(t) >= real).then(|| RequestId::from_index(i))
        })
    }

    fn augment(&mut self, r: RequestId) -> Result<(), MvError> {
        let (path, phi, duals) = {
            let g = self.graph(r, false)?;
            let best = g.min_real_aug_path()?.expect("ready requests have a finite real path");
            let duals = dual_update(&self.duals, &g, &best.path)?;
            (best.path, best.phi, duals)
        };
        let server = path.terminal_server().expect("real path");
        self.m_off.augment_in_place(&path)?;
        self.duals = duals;
        self.records[r.index()] = Some(MatchRecord { request: r, server, time: self.now.clone() });
        self.final_phi[r.index()] = Some(phi);
        self.tracked[r.index()] = None;
        for u in self.free() {
            self.track(u)?;
        }
        Ok(())
    }

    /// Each free request's virtual path must cost exactly γ times its wait.
    fn check_virtual(&mut self) -> Result<(), MvError> {
        for (i, t) in self.tracked.iter().enumerate() {
            let Some(t) = t else { continue };
            let r = RequestId::from_index(i);
            let phi = self.virtual_now(t);
            let expected = self.gamma.value() * (&self.now - &self.inst.request(r).arrival);
            debug_assert_eq!(t.virtual_path.origin(), r);
            if phi != expected {
                return Err(MvError::VirtualCost { time: self.now.clone(), request: r, phi, expected });
            }
            self.checks += 1;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_matches_at_four() {
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 0)]).unwrap();
        let run = vrm_with_mv_servers(&inst, &Gamma::default()).unwrap();
        assert_eq!(run.solution.pairs[0].time, Q::from_int(4));
        assert_eq!(run.final_phi, vec![Q::from_int(12)]);
        assert!(run.checks > 0);
    }

    #[test]
    fn two_by_two_matches_engine_hand_trace() {
        let inst = Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap();
        let run = vrm_with_mv_servers(&inst, &Gamma::default()).unwrap();
        let got: Vec<(RequestId, ServerId, Q)> =
            run.solution.pairs.iter().map(|p| (p.request, p.server, p.time.clone())).collect();
        assert_eq!(
            got,
            vec![(RequestId(1), ServerId(1), Q::from_int(1)), (RequestId(2), ServerId(2), Q::from_int(10))]
        );
    }
}
