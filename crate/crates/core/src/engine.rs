//! Event-driven simulation of the simplified algorithm.
//!
//! A free request `r_i` is ready once `γ·(t - a(r_i)) >= φ(P_i)`, where
//! `P_i` is its minimum real augmenting path. When it becomes ready the
//! offline matching is augmented along `P_i`, the online matching records
//! `(r_i, ter(P_i))` at the current time, and the duals are updated.
//!
//! Simultaneous events run in a fixed order: server arrivals by id, request
//! arrivals by id, then the lowest-id ready request augments, repeatedly,
//! with every free request re-evaluated after each augmentation.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::arith::{Arith, Exact, Lattice, Weight};
use crate::instance::{Instance, MatchRecord, RequestId, ServerId, Solution};
use crate::netcost::{AugPath, AugmentError, Gamma, Matching, Vertex};
use crate::num::{Extended, Q};
use crate::slack::{
    check_invariants, dual_update_with, CostTable, DualStore, InvariantReport, Reach, SearchWorkspace, ServerScan, SinkKind,
    SlackError, SlackGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    /// A server arrives.
    Sa(ServerId),
    /// A request arrives.
    Ra(RequestId),
    /// A ready request augments.
    Au(RequestId),
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Sa(_) => "SA",
            EventKind::Ra(_) => "RA",
            EventKind::Au(_) => "AU",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time: Q,
    pub kind: EventKind,
}

/// φ of one free request at some instant, with its waiting time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhiEntry {
    pub request: RequestId,
    pub phi: Extended,
    pub waiting: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Augmentation {
    pub path: AugPath,
    pub server: ServerId,
    /// γ-net-cost of the path at the moment it was used.
    pub phi: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Q,
    pub kind: EventKind,
    pub augmentation: Option<Augmentation>,
    /// Free requests just before an augmentation (AU only, when snapshots are on).
    pub phi_before: Option<Vec<PhiEntry>>,
    /// Free requests once the event has been fully handled (when snapshots are on).
    pub phi_after: Option<Vec<PhiEntry>>,
}

impl TraceEvent {
    pub fn to_json(&self) -> Value {
        let mut v = json!({"time": self.time.to_string(), "kind": self.kind.label()});
        let obj = v.as_object_mut().expect("object literal");
        match self.kind {
            EventKind::Sa(s) => {
                obj.insert("server".into(), json!(s.to_string()));
            }
            EventKind::Ra(r) | EventKind::Au(r) => {
                obj.insert("request".into(), json!(r.to_string()));
            }
        }
        if let Some(a) = &self.augmentation {
            obj.insert("server".into(), json!(a.server.to_string()));
            obj.insert("path".into(), json!(a.path.to_string()));
            obj.insert("phi".into(), json!(a.phi.to_string()));
        }
        let snapshot = |entries: &Vec<PhiEntry>| -> Value {
            entries
                .iter()
                .map(|e| json!({"request": e.request.to_string(), "phi": e.phi.to_string(), "waiting": e.waiting.to_string()}))
                .collect()
        };
        if let Some(b) = &self.phi_before {
            obj.insert("phi_before".into(), snapshot(b));
        }
        if let Some(a) = &self.phi_after {
            obj.insert("phi_after".into(), snapshot(a));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub gamma: Gamma,
    pub events: Vec<TraceEvent>,
    /// `Φ_i`, the γ-net-cost of the path each request augmented along, by request index.
    pub final_phi: Vec<Q>,
    pub solution: Solution,
}

impl Trace {
    pub fn phi(&self, r: RequestId) -> &Q {
        &self.final_phi[r.index()]
    }

    pub fn phi_total(&self) -> Q {
        self.final_phi.iter().sum()
    }

    pub fn augmentations(&self) -> impl Iterator<Item = (&TraceEvent, &Augmentation)> {
        self.events.iter().filter_map(|e| e.augmentation.as_ref().map(|a| (e, a)))
    }

    /// One JSON object per line, in event order.
    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, &e.to_json())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Slack(#[from] SlackError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("event at {time} is earlier than the current time {now}")]
    EventInPast { time: Q, now: Q },
    #[error("{kind:?} at {time} does not match the instance: {reason}")]
    BadEvent { time: Q, kind: EventKind, reason: String },
    #[error("dual invariants violated at {time}: {violations:?}")]
    Invariants { time: Q, violations: InvariantReport },
    #[error("internal error at {time}: {reason}")]
    Internal { time: Q, reason: String },
    #[error("observer aborted the run at {time}: {reason}")]
    Observer { time: Q, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadyTimingError {
    #[error("time {now} precedes the request's arrival {arrival}")]
    BeforeArrival { arrival: Q, now: Q },
    #[error("request is already ready at {now}; it must augment now")]
    AlreadyReady { now: Q },
}

/// The time at which `γ·(t - a_r)` reaches `φ`, or `None` when `φ` is infinite.
pub fn ready_timing(a_r: &Q, now: &Q, phi: &Extended, gamma: &Gamma) -> Result<Option<Q>, ReadyTimingError> {
    if now < a_r {
        return Err(ReadyTimingError::BeforeArrival { arrival: a_r.clone(), now: now.clone() });
    }
    let Extended::Finite(phi) = phi else { return Ok(None) };
    let progress = gamma.value() * (now - a_r);
    if &progress >= phi {
        return Err(ReadyTimingError::AlreadyReady { now: now.clone() });
    }
    Ok(Some(now + (phi - progress) / gamma.value()))
}

/// Number representation used for weights and duals inside a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arithmetic {
    /// Integer lattice when the instance allows it, rationals otherwise.
    #[default]
    Auto,
    /// Always rationals.
    Exact,
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub gamma: Gamma,
    /// Audit the dual invariants after every augmentation.
    pub audit: bool,
    /// Record per-request φ snapshots in the trace.
    pub snapshots: bool,
    pub arithmetic: Arithmetic,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { gamma: Gamma::default(), audit: true, snapshots: true, arithmetic: Arithmetic::Auto }
    }
}

/// Read-only view of a running engine, in exact rationals.
pub trait EngineView {
    fn inst(&self) -> &Instance;
    fn gamma(&self) -> &Gamma;
    fn now(&self) -> &Q;
    fn m_off(&self) -> &Matching;
    fn duals(&self) -> DualStore;
    fn arrived_requests(&self) -> &[bool];
    fn arrived_servers(&self) -> &[bool];
    /// Free arrived requests with their current `φ(P_i)` (`None` for `+∞`).
    fn free_phis(&self) -> Vec<(RequestId, Option<Q>)>;
    fn match_record(&self, r: RequestId) -> Option<&MatchRecord>;
}

/// Hook called after every handled event (arrivals and augmentations).
pub trait Observer {
    fn on_event(&mut self, view: &dyn EngineView, event: &TraceEvent) -> Result<(), String>;
}

impl Observer for () {
    fn on_event(&mut self, _: &dyn EngineView, _: &TraceEvent) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct FreeState<W> {
    /// `φ(P_i)`; `None` while no free server is reachable.
    phi: Option<W>,
    t_rdy: Option<Q>,
    version: u64,
    /// Requests of the slack graph strictly closer than `φ`, with distances.
    /// Only a new server can shorten `φ` between augmentations, and only
    /// through an edge leaving one of these.
    ball: Vec<(RequestId, W)>,
}

#[derive(Debug, Clone)]
pub struct EngineState<'a, A: Arith = Exact> {
    costs: &'a CostTable<'a, A>,
    options: EngineOptions,
    now: Q,
    arrived_requests: Vec<bool>,
    arrived_servers: Vec<bool>,
    m_off: Matching,
    m_vrm: Vec<Option<MatchRecord>>,
    duals: DualStore<A::W>,
    free: Vec<Option<FreeState<A::W>>>,
    phi_final: Vec<Option<Q>>,
    /// Arrivals sorted by (time, SA before RA, id); consumed from `cursor`.
    arrivals: Vec<Event>,
    cursor: usize,
    ready: BinaryHeap<Reverse<(Q, RequestId, u64)>>,
    next_version: u64,
    /// Server scan for the current duals, matching and arrivals.
    scan: Option<ServerScan<A::W>>,
    workspace: SearchWorkspace<A::W>,
    events: Vec<TraceEvent>,
}

impl<A: Arith> EngineView for EngineState<'_, A> {
    fn inst(&self) -> &Instance {
        self.costs.inst()
    }
    fn gamma(&self) -> &Gamma {
        &self.options.gamma
    }
    fn now(&self) -> &Q {
        &self.now
    }
    fn m_off(&self) -> &Matching {
        &self.m_off
    }
    fn duals(&self) -> DualStore {
        self.duals.lower(self.costs.arith())
    }
    fn arrived_requests(&self) -> &[bool] {
        &self.arrived_requests
    }
    fn arrived_servers(&self) -> &[bool] {
        &self.arrived_servers
    }
    fn free_phis(&self) -> Vec<(RequestId, Option<Q>)> {
        self.free_requests().map(|(r, f)| (r, f.phi.as_ref().map(|w| self.lower(w)))).collect()
    }
    fn match_record(&self, r: RequestId) -> Option<&MatchRecord> {
        self.m_vrm[r.index()].as_ref()
    }
}

impl<'a, A: Arith> EngineState<'a, A> {
    pub fn new(costs: &'a CostTable<'a, A>, options: EngineOptions) -> Self {
        assert_eq!(costs.gamma(), &options.gamma, "cost table and options disagree on gamma");
        let inst = costs.inst();
        let m = inst.m();
        let mut arrivals: Vec<Event> = inst
            .servers()
            .iter()
            .map(|a| Event { time: a.arrival.clone(), kind: EventKind::Sa(ServerId(a.id)) })
            .chain(
                inst.requests().iter().map(|a| Event { time: a.arrival.clone(), kind: EventKind::Ra(RequestId(a.id)) }),
            )
            .collect();
        arrivals.sort_by(|x, y| (&x.time, x.kind).cmp(&(&y.time, y.kind)));
        EngineState {
            costs,
            options,
            now: Q::zero(),
            arrived_requests: vec![false; m],
            arrived_servers: vec![false; m],
            m_off: Matching::empty(m),
            m_vrm: vec![None; m],
            duals: DualStore::zeros(m),
            free: vec![None; m],
            phi_final: vec![None; m],
            arrivals,
            cursor: 0,
            ready: BinaryHeap::new(),
            next_version: 0,
            scan: None,
            workspace: SearchWorkspace::new(m),
            events: Vec::new(),
        }
    }

    fn lower(&self, w: &A::W) -> Q {
        self.costs.arith().lower(w)
    }

    fn free_requests(&self) -> impl Iterator<Item = (RequestId, &FreeState<A::W>)> + '_ {
        self.free.iter().enumerate().filter_map(|(i, f)| f.as_ref().map(|f| (RequestId::from_index(i), f)))
    }

    /// The cached ready timing of a free request (`None` while `φ` is infinite).
    pub fn ready_time(&self, r: RequestId) -> Option<&Q> {
        self.free[r.index()].as_ref()?.t_rdy.as_ref()
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn is_finished(&self) -> bool {
        self.m_off.len() == self.costs.inst().m()
    }

    /// Earliest pending arrival or live ready timing.
    pub fn next_event_time(&mut self) -> Option<Q> {
        self.skip_consumed_arrivals();
        while let Some(Reverse((_, r, version))) = self.ready.peek() {
            let live = self.free[r.index()].as_ref().is_some_and(|f| f.version == *version);
            if live {
                break;
            }
            self.ready.pop();
        }
        let arrival = self.arrivals.get(self.cursor).map(|e| &e.time);
        let ready = self.ready.peek().map(|Reverse((t, _, _))| t);
        match (arrival, ready) {
            (Some(a), Some(b)) => Some(a.min(b).clone()),
            (a, b) => a.or(b).cloned(),
        }
    }

    fn skip_consumed_arrivals(&mut self) {
        while let Some(e) = self.arrivals.get(self.cursor) {
            let done = match e.kind {
                EventKind::Sa(s) => self.arrived_servers[s.index()],
                EventKind::Ra(r) => self.arrived_requests[r.index()],
                EventKind::Au(_) => true,
            };
            if !done {
                break;
            }
            self.cursor += 1;
        }
    }

    /// Handles the next timestamp. Returns `false` once nothing is pending.
    pub fn step(&mut self, observer: &mut dyn Observer) -> Result<bool, EngineError> {
        let Some(t) = self.next_event_time() else { return Ok(false) };
        let batch: Vec<EventKind> =
            self.arrivals[self.cursor..].iter().take_while(|e| e.time == t).map(|e| e.kind).collect();
        self.process_tick(t, &batch, observer)?;
        Ok(true)
    }

    /// Processes a batch of arrivals sharing timestamp `time`, then fires
    /// every request that is ready at `time`.
    pub fn process_tick(
        &mut self,
        time: Q,
        batch: &[EventKind],
        observer: &mut dyn Observer,
    ) -> Result<(), EngineError> {
        if time < self.now {
            return Err(EngineError::EventInPast { time, now: self.now.clone() });
        }
        if let Some(next) = self.next_event_time() {
            if next < time {
                return Err(EngineError::EventInPast { time: next, now: time });
            }
        }
        let mut sorted = batch.to_vec();
        sorted.sort();
        for kind in &sorted {
            self.validate_arrival(&time, *kind)?;
        }
        self.now = time;

        for kind in sorted {
            match kind {
                EventKind::Sa(s) => {
                    self.arrived_servers[s.index()] = true;
                    self.scan = None;
                    self.absorb_server(s)?;
                }
                EventKind::Ra(r) => {
                    self.arrived_requests[r.index()] = true;
                    self.refresh(r)?;
                }
                EventKind::Au(_) => unreachable!("rejected by validate_arrival"),
            }
            let event = TraceEvent {
                time: self.now.clone(),
                kind,
                augmentation: None,
                phi_before: None,
                phi_after: self.snapshot(),
            };
            self.emit(event, observer)?;
        }

        while let Some(r) = self.lowest_ready() {
            self.augment(r, observer)?;
        }
        Ok(())
    }

    fn validate_arrival(&self, time: &Q, kind: EventKind) -> Result<(), EngineError> {
        let bad = |reason: &str| EngineError::BadEvent { time: time.clone(), kind, reason: reason.into() };
        let inst = self.costs.inst();
        let (arrival, already) = match kind {
            EventKind::Sa(s) if s.index() < inst.m() => (&inst.server(s).arrival, self.arrived_servers[s.index()]),
            EventKind::Ra(r) if r.index() < inst.m() => (&inst.request(r).arrival, self.arrived_requests[r.index()]),
            EventKind::Au(_) => return Err(bad("augmentations are generated, not supplied")),
            _ => return Err(bad("unknown agent")),
        };
        if already {
            return Err(bad("agent has already arrived"));
        }
        if arrival != time {
            return Err(bad(&format!("agent arrives at {arrival}")));
        }
        Ok(())
    }

    fn graph(&self, r: RequestId) -> Result<SlackGraph<'_, A>, SlackError> {
        SlackGraph::new(self.costs, r, self.now.clone(), &self.m_off, &self.duals, &self.arrived_servers, false)
    }

    /// Stores `φ` for a free request and schedules its ready timing.
    fn store(&mut self, r: RequestId, phi: Option<A::W>, ball: Vec<(RequestId, A::W)>) -> Result<(), EngineError> {
        self.next_version += 1;
        let version = self.next_version;
        let exact = Extended::from(phi.as_ref().map(|w| self.lower(w)));
        let timing = ready_timing(&self.costs.inst().request(r).arrival, &self.now, &exact, self.gamma());
        let t_rdy = match timing {
            Ok(t) => t,
            Err(ReadyTimingError::AlreadyReady { .. }) => Some(self.now.clone()),
            Err(e) => return Err(EngineError::Internal { time: self.now.clone(), reason: e.to_string() }),
        };
        if let Some(t) = &t_rdy {
            self.ready.push(Reverse((t.clone(), r, version)));
        }
        self.free[r.index()] = Some(FreeState { phi, t_rdy, version, ball });
        Ok(())
    }

    /// Recomputes `φ(P_r)` from scratch.
    fn refresh(&mut self, r: RequestId) -> Result<(), EngineError> {
        if self.scan.is_none() {
            self.scan = Some(ServerScan::new(self.costs, &self.m_off, &self.duals, &self.arrived_servers));
        }
        let mut ws = std::mem::replace(&mut self.workspace, SearchWorkspace::new(0));
        let found = {
            let scan = self.scan.as_ref().expect("built above");
            self.graph(r).and_then(|g| g.nearest_real_sink(scan, &mut ws))
        };
        self.workspace = ws;
        let (phi, ball) = found?;
        self.store(r, phi, ball)
    }

    fn refresh_all(&mut self) -> Result<(), EngineError> {
        let free: Vec<RequestId> = self.free_requests().map(|(r, _)| r).collect();
        for r in free {
            self.refresh(r)?;
        }
        Ok(())
    }

    /// Updates every free request for the arrival of server `s`. Distances to
    /// existing vertices are unchanged because `s` has no out-edges, so `φ`
    /// can only drop to `d(u) + slack(u, s)` for some `u` in the ball.
    fn absorb_server(&mut self, s: ServerId) -> Result<(), EngineError> {
        let free: Vec<RequestId> = self.free_requests().map(|(r, _)| r).collect();
        for r in free {
            let state = self.free[r.index()].as_ref().expect("listed as free");
            let mut best: Option<A::W> = None;
            for (u, d) in &state.ball {
                let w = self.costs.gamma_dist(*u, s).minus(self.duals.request(*u)).minus(self.duals.server(s));
                if w.is_neg() {
                    return Err(SlackError::NegativeSlack {
                        from: Vertex::Request(*u),
                        to: Vertex::Server(s),
                        weight: self.lower(&w),
                    }
                    .into());
                }
                let cand = d.plus(&w);
                if best.as_ref().is_none_or(|b| &cand < b) {
                    best = Some(cand);
                }
            }
            let improved = match (&best, &state.phi) {
                (Some(b), Some(old)) => b < old,
                (Some(_), None) => true,
                (None, _) => false,
            };
            if improved {
                let phi = best.expect("improved implies a candidate");
                let ball = state.ball.iter().filter(|(_, d)| d < &phi).cloned().collect();
                self.store(r, Some(phi), ball)?;
            }
            #[cfg(debug_assertions)]
            if self.costs.m() <= 8 {
                let full = self.graph(r)?.search(SinkKind::Real, Reach::NearestSink)?;
                let kept = self.free[r.index()].as_ref().and_then(|f| f.phi.as_ref());
                assert_eq!(full.nearest_sink(), kept, "incremental φ of {r} after {s} arrived");
            }
        }
        Ok(())
    }

    fn lowest_ready(&self) -> Option<RequestId> {
        self.free_requests().find(|(_, f)| f.t_rdy.as_ref().is_some_and(|t| t <= &self.now)).map(|(r, _)| r)
    }

    fn snapshot(&self) -> Option<Vec<PhiEntry>> {
        if !self.options.snapshots {
            return None;
        }
        Some(
            self.free_requests()
                .map(|(r, f)| PhiEntry {
                    request: r,
                    phi: Extended::from(f.phi.as_ref().map(|w| self.lower(w))),
                    waiting: &self.now - &self.costs.inst().request(r).arrival,
                })
                .collect(),
        )
    }

    fn augment(&mut self, r: RequestId, observer: &mut dyn Observer) -> Result<(), EngineError> {
        let phi_before = self.snapshot();
        let cached = self.free[r.index()].as_ref().and_then(|f| f.phi.as_ref()).map(|w| self.lower(w));
        let (path, phi, duals) = {
            let g = self.graph(r)?;
            let sp = g.search(SinkKind::Real, Reach::NearestSink)?;
            let best = g.extract_min_path(&sp).ok_or_else(|| EngineError::Internal {
                time: self.now.clone(),
                reason: format!("{r} is ready but has no augmenting path"),
            })?;
            let duals = dual_update_with(&self.duals, &g, &sp, &best.path)?;
            (best.path, best.phi, duals)
        };
        if cached.as_ref() != Some(&phi) {
            return Err(EngineError::Internal {
                time: self.now.clone(),
                reason: format!("cached φ {cached:?} of {r} differs from recomputed {phi}"),
            });
        }
        let server = path.terminal_server().expect("real path ends at a server");
        self.m_off.augment_in_place(&path)?;
        self.duals = duals;
        self.scan = None;
        self.m_vrm[r.index()] = Some(MatchRecord { request: r, server, time: self.now.clone() });
        self.phi_final[r.index()] = Some(phi.clone());
        self.free[r.index()] = None;

        if self.options.audit {
            let report = check_invariants(self.costs, &self.duals, &self.m_off, &self.arrived_requests, &self.now);
            if !report.passed() {
                return Err(EngineError::Invariants { time: self.now.clone(), violations: report });
            }
        }
        self.refresh_all()?;
        let event = TraceEvent {
            time: self.now.clone(),
            kind: EventKind::Au(r),
            augmentation: Some(Augmentation { path, server, phi }),
            phi_before,
            phi_after: self.snapshot(),
        };
        self.emit(event, observer)
    }

    fn emit(&mut self, event: TraceEvent, observer: &mut dyn Observer) -> Result<(), EngineError> {
        observer
            .on_event(self, &event)
            .map_err(|reason| EngineError::Observer { time: self.now.clone(), reason })?;
        self.events.push(event);
        Ok(())
    }

    /// Runs to completion and returns the online matching and its trace.
    pub fn finish(mut self, observer: &mut dyn Observer) -> Result<(Solution, Trace), EngineError> {
        while self.step(observer)? {}
        let time = self.now.clone();
        let internal = |reason: String| EngineError::Internal { time: time.clone(), reason };
        if !self.is_finished() {
            let m = self.costs.inst().m();
            return Err(internal(format!("run ended with {} of {m} requests matched", self.m_off.len())));
        }
        let records: Vec<MatchRecord> = self.m_vrm.into_iter().map(|x| x.expect("every request matched")).collect();
        for rec in &records {
            if self.m_off.server_of(rec.request).is_none() {
                return Err(internal(format!("{} is matched online but not offline", rec.request)));
            }
        }
        let solution = Solution::new(records);
        solution.validate(self.costs.inst()).map_err(|e| internal(e.to_string()))?;
        let final_phi = self.phi_final.into_iter().map(|p| p.expect("every request augmented")).collect();
        let trace = Trace { gamma: self.options.gamma.clone(), events: self.events, final_phi, solution: solution.clone() };
        Ok((solution, trace))
    }
}

/// Runs the engine with default options (invariant audits and φ snapshots on).
pub fn run(inst: &Instance, gamma: Gamma) -> Result<(Solution, Trace), EngineError> {
    let options = EngineOptions { gamma, ..EngineOptions::default() };
    run_with(inst, options, &mut ())
}

pub fn run_with(
    inst: &Instance,
    options: EngineOptions,
    observer: &mut dyn Observer,
) -> Result<(Solution, Trace), EngineError> {
    let gamma = options.gamma.clone();
    if options.arithmetic == Arithmetic::Auto {
        if let Some(lattice) = Lattice::for_instance(inst, &gamma) {
            if let Some(costs) = CostTable::with_arith(inst, gamma.clone(), lattice) {
                return EngineState::new(&costs, options).finish(observer);
            }
        }
    }
    let costs = CostTable::new(inst, gamma);
    EngineState::new(&costs, options).finish(observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::solution_cost;

    fn q(n: i64) -> Q {
        Q::from_int(n)
    }

    fn record(sol: &Solution, r: u32) -> (u32, Q) {
        let rec = sol.server_of(RequestId(r)).unwrap();
        (rec.server.0, rec.time.clone())
    }

    #[test]
    fn ready_timing_examples() {
        let g = Gamma::default();
        assert_eq!(ready_timing(&q(0), &q(0), &Extended::Finite(q(12)), &g), Ok(Some(q(4))));
        assert_eq!(ready_timing(&q(0), &q(2), &Extended::Finite(q(9)), &g), Ok(Some(q(3))));
        assert!(matches!(
            ready_timing(&q(0), &q(5), &Extended::Finite(q(9)), &g),
            Err(ReadyTimingError::AlreadyReady { .. })
        ));
        assert_eq!(ready_timing(&q(0), &q(2), &Extended::Infinite, &g), Ok(None));
    }

    #[test]
    fn single_pair_waits_for_its_net_cost() {
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 0)]).unwrap();
        let (sol, trace) = run(&inst, Gamma::default()).unwrap();
        assert_eq!(record(&sol, 1), (1, q(4)));
        assert_eq!(solution_cost(&inst, &sol).unwrap().total, q(12));
        assert_eq!(trace.phi(RequestId(1)), &q(12));
    }

    #[test]
    fn co_located_pair_matches_on_arrival() {
        let inst = Instance::from_ints(&[(0, 0)], &[(0, 0)]).unwrap();
        let (sol, _) = run(&inst, Gamma::default()).unwrap();
        assert_eq!(record(&sol, 1), (1, q(0)));
        assert_eq!(solution_cost(&inst, &sol).unwrap().total, q(0));
    }

    #[test]
    fn two_by_two_hand_trace() {
        let inst = Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap();
        let (sol, trace) = run(&inst, Gamma::default()).unwrap();
        assert_eq!(record(&sol, 1), (1, q(1)));
        assert_eq!(record(&sol, 2), (2, q(10)));
        assert_eq!(trace.phi_total(), q(33));
        assert_eq!(solution_cost(&inst, &sol).unwrap().total, q(33));

        // After the first augmentation r2 is re-evaluated against the new matching.
        let (first, _) = trace.augmentations().next().unwrap();
        let before = first.phi_before.as_ref().unwrap();
        let after = first.phi_after.as_ref().unwrap();
        assert_eq!(before.iter().find(|e| e.request == RequestId(2)).unwrap().phi, Extended::Finite(q(3)));
        assert_eq!(after, &vec![PhiEntry { request: RequestId(2), phi: Extended::Finite(q(30)), waiting: q(1) }]);
    }

    #[test]
    fn new_server_is_seen_before_readiness_is_tested() {
        // r1's only path at t<4 goes to s2 with φ = 12, ready at t = 4. s1
        // arrives at 4 with the same φ and wins the tie by vertex order.
        // r2 arrives much later and only serves to balance the instance.
        let inst = Instance::from_ints(&[(0, 0), (100, 50)], &[(0, 4), (4, 0)]).unwrap();
        let (sol, trace) = run(&inst, Gamma::default()).unwrap();
        assert_eq!(record(&sol, 1), (1, q(4)));
        let kinds: Vec<&str> = trace.events.iter().take(4).map(|e| e.kind.label()).collect();
        assert_eq!(kinds, ["SA", "RA", "SA", "AU"]);
    }

    #[test]
    fn empty_batch_changes_nothing() {
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 0)]).unwrap();
        let costs = CostTable::new(&inst, Gamma::default());
        let mut state = EngineState::new(&costs, EngineOptions::default());
        state.step(&mut ()).unwrap();
        let before = (state.now().clone(), state.m_off().clone(), state.duals().clone(), state.events.len());
        state.process_tick(q(1), &[], &mut ()).unwrap();
        assert_eq!(state.m_off(), &before.1);
        assert_eq!(state.duals(), before.2);
        assert_eq!(state.events.len(), before.3);
    }

    #[test]
    fn past_and_foreign_events_are_rejected() {
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 2)]).unwrap();
        let costs = CostTable::new(&inst, Gamma::default());
        let mut state = EngineState::new(&costs, EngineOptions::default());
        state.step(&mut ()).unwrap();
        assert!(matches!(
            state.process_tick(q(5), &[EventKind::Sa(ServerId(1))], &mut ()),
            Err(EngineError::EventInPast { .. })
        ));
        assert!(matches!(
            state.process_tick(q(2), &[EventKind::Au(RequestId(1))], &mut ()),
            Err(EngineError::BadEvent { .. })
        ));
        assert!(matches!(
            state.process_tick(q(1), &[EventKind::Sa(ServerId(1))], &mut ()),
            Err(EngineError::BadEvent { .. })
        ));
    }

    #[test]
    fn symmetric_requests_fire_in_id_order() {
        // Both requests are ready at t = 1; r1 goes first and takes s1.
        let inst = Instance::from_ints(&[(0, 0), (2, 0)], &[(1, 0), (1, 1)]).unwrap();
        let (sol, trace) = run(&inst, Gamma::default()).unwrap();
        let aus: Vec<EventKind> = trace.augmentations().map(|(e, _)| e.kind).collect();
        assert_eq!(aus[0], EventKind::Au(RequestId(1)));
        assert_eq!(record(&sol, 1).0, 1);
        let (first, _) = trace.augmentations().next().unwrap();
        let r2_before = &first.phi_before.as_ref().unwrap()[1];
        let r2_after = &first.phi_after.as_ref().unwrap()[0];
        assert_eq!(r2_before.request, RequestId(2));
        assert!(r2_after.phi > r2_before.phi);
    }

    #[test]
    fn jsonl_has_one_event_per_line() {
        let inst = Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap();
        let (_, trace) = run(&inst, Gamma::new(Q::new(5, 2)).unwrap()).unwrap();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), trace.events.len());
        for line in text.lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            assert!(v["time"].is_string() && v["kind"].is_string());
        }
    }
}
