//! Dual variables, slack graphs and minimum γ-net-cost augmenting paths.
//!
//! For a free request `r_i` at time `t` the slack graph has:
//!
//! * `s -> r` with weight 0 for every offline pair `(r, s)`;
//! * `r -> s` with weight `γ·D(r,s) - z(r) - z(s)` for every saturated
//!   request or `r_i`, and every arrived server not matched to it;
//! * optionally `r -> ~s_r` with weight `γ·(t - a(r)) - z(r)`.
//!
//! With the duals feasible every weight is non-negative and the weight of a
//! path from `r_i` to a free server (or virtual server) equals its γ-net-cost,
//! so Dijkstra finds minimum augmenting paths. Ties between equally cheap
//! paths go to the lexicographically smallest vertex sequence.
//!
//! Edges are produced on demand from the duals; nothing is materialized, so
//! a search only pays for the part of the graph it settles. Weights live in
//! the representation chosen by an [`Arith`]; errors and reports are always
//! given as exact rationals.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::arith::{Arith, Exact, Weight};
use crate::instance::{Instance, RequestId, ServerId};
use crate::kdtree::KdTree;
use crate::netcost::{AugPath, Gamma, Matching, Vertex};
use crate::num::Q;

/// Instance plus γ with `γ·D` and `D` precomputed in the chosen
/// representation; shared by every slack graph of a run.
#[derive(Debug, Clone)]
pub struct CostTable<'a, A: Arith = Exact> {
    inst: &'a Instance,
    gamma: Gamma,
    arith: A,
    gamma_dist: Vec<A::W>,
    dist: Vec<A::W>,
    /// Servers by `(γ·pos, γ·arrival)`; ranks index the tree's permutation.
    tree: KdTree<A::W>,
    /// `(γ·pos, γ·arrival)` of each request.
    request_point: Vec<(A::W, A::W)>,
    /// `gamma_dist` with each row permuted into rank order.
    gamma_dist_by_rank: Vec<A::W>,
    /// Rank of each server.
    server_rank: Vec<usize>,
}

impl<'a> CostTable<'a, Exact> {
    pub fn new(inst: &'a Instance, gamma: Gamma) -> Self {
        CostTable::with_arith(inst, gamma, Exact).expect("exact arithmetic represents every value")
    }
}

impl<'a, A: Arith> CostTable<'a, A> {
    /// `None` when some distance is not representable in `arith`.
    pub fn with_arith(inst: &'a Instance, gamma: Gamma, arith: A) -> Option<Self> {
        let m = inst.m();
        // Every value below is a sum of differences of lifted coordinates,
        // so it is exact in any representation that holds the coordinates.
        let lift_agent = |pos: &Q, arrival: &Q| -> Option<[A::W; 4]> {
            let g = gamma.value();
            Some([arith.lift(pos)?, arith.lift(arrival)?, arith.lift(&(g * pos))?, arith.lift(&(g * arrival))?])
        };
        let requests =
            inst.requests().iter().map(|r| lift_agent(&r.pos, &r.arrival)).collect::<Option<Vec<_>>>()?;
        let servers = inst.servers().iter().map(|s| lift_agent(&s.pos, &s.arrival)).collect::<Option<Vec<_>>>()?;
        let abs_diff = |x: &A::W, y: &A::W| if x >= y { x.minus(y) } else { y.minus(x) };
        let l1 = |r: &[A::W; 4], s: &[A::W; 4], i: usize| abs_diff(&r[i], &s[i]).plus(&abs_diff(&r[i + 1], &s[i + 1]));
        let mut gamma_dist = Vec::with_capacity(m * m);
        let mut dist = Vec::with_capacity(m * m);
        for r in &requests {
            for s in &servers {
                dist.push(l1(r, s, 0));
                gamma_dist.push(l1(r, s, 2));
            }
        }
        let points: Vec<(A::W, A::W)> = servers.iter().map(|s| (s[2].clone(), s[3].clone())).collect();
        let tree = KdTree::build(&points);
        let request_point = requests.iter().map(|r| (r[2].clone(), r[3].clone())).collect();
        let mut server_rank = vec![0; m];
        for (k, j) in tree.order.iter().enumerate() {
            server_rank[*j] = k;
        }
        let mut gamma_dist_by_rank = Vec::with_capacity(m * m);
        for ri in 0..m {
            gamma_dist_by_rank.extend(tree.order.iter().map(|j| gamma_dist[ri * m + j].clone()));
        }
        Some(CostTable { inst, gamma, arith, gamma_dist, dist, tree, request_point, gamma_dist_by_rank, server_rank })
    }

    pub fn inst(&self) -> &'a Instance {
        self.inst
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn arith(&self) -> &A {
        &self.arith
    }

    pub fn m(&self) -> usize {
        self.inst.m()
    }

    pub fn gamma_dist(&self, r: RequestId, s: ServerId) -> &A::W {
        &self.gamma_dist[r.index() * self.m() + s.index()]
    }

    pub fn dist(&self, r: RequestId, s: ServerId) -> &A::W {
        &self.dist[r.index() * self.m() + s.index()]
    }
}

/// Dual values `z(·)`; virtual servers are implicitly zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DualStore<W = Q> {
    request: Vec<W>,
    server: Vec<W>,
}

impl<W: Weight> DualStore<W> {
    pub fn zeros(m: usize) -> Self {
        DualStore { request: vec![W::zero(); m], server: vec![W::zero(); m] }
    }

    pub fn request(&self, r: RequestId) -> &W {
        &self.request[r.index()]
    }

    pub fn server(&self, s: ServerId) -> &W {
        &self.server[s.index()]
    }

    pub fn set_request(&mut self, r: RequestId, value: W) {
        self.request[r.index()] = value;
    }

    pub fn set_server(&mut self, s: ServerId, value: W) {
        self.server[s.index()] = value;
    }

    /// The same duals as exact rationals.
    pub fn lower<A: Arith<W = W>>(&self, arith: &A) -> DualStore<Q> {
        DualStore {
            request: self.request.iter().map(|w| arith.lower(w)).collect(),
            server: self.server.iter().map(|w| arith.lower(w)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SlackError {
    #[error("source {0} is saturated; only free requests own a slack graph")]
    SourceSaturated(RequestId),
    #[error("slack graph time {t} precedes the arrival of source {source_id}")]
    BeforeArrival { source_id: RequestId, t: Q },
    #[error("negative slack {weight} on edge {from} -> {to}; duals are infeasible")]
    NegativeSlack { from: Vertex, to: Vertex, weight: Q },
    #[error("virtual servers were not included in this slack graph")]
    NoVirtualServers,
    #[error("virtual slack of {request} at time {t} is not representable in the chosen arithmetic")]
    Unrepresentable { request: RequestId, t: Q },
    #[error("path {path} is inconsistent with the slack graph: {reason}")]
    InconsistentPath { path: String, reason: String },
    #[error("Dijkstra and Bellman-Ford disagree at {vertex}: {dijkstra:?} vs {bellman_ford:?}")]
    CrossCheck { vertex: Vertex, dijkstra: Option<Q>, bellman_ford: Option<Q> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkKind {
    /// Arrived servers not saturated by the offline matching.
    Real,
    /// Virtual servers of the graph's requests.
    Virtual,
}

/// Stop rule for a single-source search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reach {
    /// Settle every vertex no farther than the nearest sink.
    NearestSink,
    /// Settle everything reachable.
    All,
}

/// The slack graph `G_{i,t}` of one free request, viewed over borrowed state.
#[derive(Debug, Clone)]
pub struct SlackGraph<'a, A: Arith = Exact> {
    costs: &'a CostTable<'a, A>,
    source: RequestId,
    t: Q,
    matching: &'a Matching,
    duals: &'a DualStore<A::W>,
    arrived_servers: &'a [bool],
    /// `γ·(t - a(r))` for members of the graph when virtual servers are included.
    virtual_base: Option<Vec<Option<A::W>>>,
}

/// A minimum augmenting path and its γ-net-cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MinPath {
    pub path: AugPath,
    pub phi: Q,
}

/// Distances produced by one search over a slack graph.
#[derive(Debug, Clone)]
pub struct ShortestPaths<W> {
    sinks: SinkKind,
    m: usize,
    dist: Vec<Option<W>>,
    settled: Vec<bool>,
    /// Distance of the nearest sink, if any sink is reachable.
    nearest: Option<W>,
}

impl<W: Weight> ShortestPaths<W> {
    /// Shortest distance from the source, for settled vertices.
    pub fn dist(&self, v: Vertex) -> Option<&W> {
        let i = vertex_index(self.m, v);
        if i < self.settled.len() && self.settled[i] {
            self.dist[i].as_ref()
        } else {
            None
        }
    }

    pub fn nearest_sink(&self) -> Option<&W> {
        self.nearest.as_ref()
    }

    pub fn sinks(&self) -> SinkKind {
        self.sinks
    }

    /// Settled requests strictly closer than the nearest sink (all settled
    /// requests when no sink was reached), in id order.
    pub fn inner_requests(&self) -> impl Iterator<Item = (RequestId, &W)> + '_ {
        (0..self.m).filter_map(move |i| {
            if !self.settled[i] {
                return None;
            }
            let d = self.dist[i].as_ref()?;
            let inside = self.nearest.as_ref().is_none_or(|b| d < b);
            inside.then_some((RequestId::from_index(i), d))
        })
    }
}

/// Server state in rank order, shared by every search over the same duals,
/// matching and arrivals.
#[derive(Debug, Clone)]
pub struct ServerScan<W> {
    /// Dual of the server at each rank; `None` until it arrives.
    zs: Vec<Option<W>>,
    /// Request matched to the server at each rank.
    mate: Vec<Option<usize>>,
    /// Largest arrived server dual under each tree node.
    node_zs_max: Vec<Option<W>>,
}

impl<W: Weight> ServerScan<W> {
    pub fn new<A: Arith<W = W>>(
        costs: &CostTable<'_, A>,
        matching: &Matching,
        duals: &DualStore<W>,
        arrived_servers: &[bool],
    ) -> Self {
        let order = &costs.tree.order;
        let zs: Vec<Option<W>> =
            order.iter().map(|&j| arrived_servers[j].then(|| duals.server(ServerId::from_index(j)).clone())).collect();
        let mate = order.iter().map(|&j| matching.request_of(ServerId::from_index(j)).map(|r| r.index())).collect();
        let node_zs_max = costs.tree.node_max(&zs);
        ServerScan { zs, mate, node_zs_max }
    }
}

/// Reusable buffers for repeated searches. Only entries touched by a search
/// are reset afterwards, so a search costs what it explores.
#[derive(Debug, Clone)]
pub struct SearchWorkspace<W> {
    dist: Vec<Option<W>>,
    settled: Vec<bool>,
    touched: Vec<usize>,
    /// Requests in the order they were settled.
    settled_requests: Vec<usize>,
    heap: BinaryHeap<Reverse<(W, usize)>>,
    /// Tree nodes pending a visit, with their lower bounds.
    nodes: Vec<(usize, W)>,
    nearest: Option<W>,
}

impl<W: Weight> SearchWorkspace<W> {
    pub fn new(m: usize) -> Self {
        SearchWorkspace {
            dist: vec![None; 3 * m],
            settled: vec![false; 3 * m],
            touched: Vec::new(),
            settled_requests: Vec::new(),
            heap: BinaryHeap::new(),
            nodes: Vec::new(),
            nearest: None,
        }
    }

    fn set(&mut self, i: usize, d: W) {
        if self.dist[i].is_none() {
            self.touched.push(i);
        }
        self.dist[i] = Some(d);
    }

    fn reset(&mut self) {
        for &i in &self.touched {
            self.dist[i] = None;
            self.settled[i] = false;
        }
        self.touched.clear();
        self.settled_requests.clear();
        self.heap.clear();
        self.nearest = None;
    }
}

fn vertex_index(m: usize, v: Vertex) -> usize {
    match v {
        Vertex::Request(r) => r.index(),
        Vertex::Server(s) => m + s.index(),
        Vertex::Mv(r) => 2 * m + r.index(),
    }
}

fn index_vertex(m: usize, i: usize) -> Vertex {
    if i < m {
        Vertex::Request(RequestId::from_index(i))
    } else if i < 2 * m {
        Vertex::Server(ServerId::from_index(i - m))
    } else {
        Vertex::Mv(RequestId::from_index(i - 2 * m))
    }
}

/// Builds and fully validates `G_{i,t}`: the source must be free and arrived,
/// and every edge weight must be non-negative.
pub fn build_slack_graph<'a, A: Arith>(
    costs: &'a CostTable<'a, A>,
    source: RequestId,
    t: Q,
    matching: &'a Matching,
    duals: &'a DualStore<A::W>,
    arrived_servers: &'a [bool],
    include_virtual: bool,
) -> Result<SlackGraph<'a, A>, SlackError> {
    let g = SlackGraph::new(costs, source, t, matching, duals, arrived_servers, include_virtual)?;
    for (from, to, weight) in g.edges() {
        if weight.is_neg() {
            return Err(SlackError::NegativeSlack { from, to, weight: costs.arith().lower(&weight) });
        }
    }
    Ok(g)
}

impl<'a, A: Arith> SlackGraph<'a, A> {
    /// Lazily checked view: edge weights are verified as a search touches them.
    pub fn new(
        costs: &'a CostTable<'a, A>,
        source: RequestId,
        t: Q,
        matching: &'a Matching,
        duals: &'a DualStore<A::W>,
        arrived_servers: &'a [bool],
        include_virtual: bool,
    ) -> Result<Self, SlackError> {
        if matching.server_of(source).is_some() {
            return Err(SlackError::SourceSaturated(source));
        }
        let inst = costs.inst();
        if t < inst.request(source).arrival {
            return Err(SlackError::BeforeArrival { source_id: source, t });
        }
        let virtual_base = if include_virtual {
            let mut base = vec![None; costs.m()];
            for r in inst.request_ids() {
                if r == source || matching.server_of(r).is_some() {
                    let value = costs.gamma().value() * (&t - &inst.request(r).arrival);
                    let lifted = costs.arith().lift(&value);
                    if lifted.is_none() {
                        return Err(SlackError::Unrepresentable { request: r, t });
                    }
                    base[r.index()] = lifted;
                }
            }
            Some(base)
        } else {
            None
        };
        Ok(SlackGraph { costs, source, t, matching, duals, arrived_servers, virtual_base })
    }

    pub fn source(&self) -> RequestId {
        self.source
    }

    pub fn time(&self) -> &Q {
        &self.t
    }

    pub fn includes_virtual(&self) -> bool {
        self.virtual_base.is_some()
    }

    pub fn costs(&self) -> &'a CostTable<'a, A> {
        self.costs
    }

    fn m(&self) -> usize {
        self.costs.m()
    }

    fn lower(&self, w: &A::W) -> Q {
        self.costs.arith().lower(w)
    }

    pub fn contains(&self, v: Vertex) -> bool {
        match v {
            Vertex::Request(r) => r == self.source || self.matching.server_of(r).is_some(),
            Vertex::Mv(r) => {
                self.includes_virtual() && (r == self.source || self.matching.server_of(r).is_some())
            }
            Vertex::Server(s) => self.arrived_servers[s.index()],
        }
    }

    fn is_sink(&self, kind: SinkKind, v: Vertex) -> bool {
        match (kind, v) {
            (SinkKind::Real, Vertex::Server(s)) => {
                self.arrived_servers[s.index()] && self.matching.request_of(s).is_none()
            }
            (SinkKind::Virtual, Vertex::Mv(_)) => true,
            _ => false,
        }
    }

    /// Slack of `r -> s`.
    pub fn request_server_slack(&self, r: RequestId, s: ServerId) -> A::W {
        self.costs.gamma_dist(r, s).minus(self.duals.request(r)).minus(self.duals.server(s))
    }

    /// Slack of `r -> ~s_r` at the graph's time, for members of a graph
    /// that includes virtual servers.
    pub fn virtual_slack(&self, r: RequestId) -> Option<A::W> {
        let base = self.virtual_base.as_ref()?[r.index()].as_ref()?;
        Some(base.minus(self.duals.request(r)))
    }

    /// Out-edges of `u` in vertex order.
    fn for_each_edge(&self, u: Vertex, mut f: impl FnMut(Vertex, A::W)) {
        match u {
            Vertex::Request(r) => {
                let mate = self.matching.server_of(r);
                let gd = &self.costs.gamma_dist[r.index() * self.m()..(r.index() + 1) * self.m()];
                let zr = self.duals.request(r);
                for (j, &arrived) in self.arrived_servers.iter().enumerate() {
                    let s = ServerId::from_index(j);
                    if arrived && mate != Some(s) {
                        f(Vertex::Server(s), gd[j].minus(zr).minus(self.duals.server(s)));
                    }
                }
                if let Some(w) = self.virtual_slack(r) {
                    f(Vertex::Mv(r), w);
                }
            }
            Vertex::Server(s) => {
                if let Some(r) = self.matching.request_of(s) {
                    f(Vertex::Request(r), A::W::zero());
                }
            }
            Vertex::Mv(_) => {}
        }
    }

    /// Every edge of the graph, in vertex order.
    pub fn edges(&self) -> Vec<(Vertex, Vertex, A::W)> {
        let mut out = Vec::new();
        for u in self.vertices() {
            self.for_each_edge(u, |v, w| out.push((u, v, w)));
        }
        out
    }

    pub fn vertices(&self) -> Vec<Vertex> {
        let m = self.m();
        (0..3 * m).map(|i| index_vertex(m, i)).filter(|&v| self.contains(v)).collect()
    }

    /// Single-source Dijkstra from the source over the lazily generated edges.
    ///
    /// A matched server's only out-edge goes to its partner at weight 0, so
    /// the heap holds requests only and a server takes the distance of the
    /// edge that reaches it. Servers are visited through a 2-d tree over
    /// `(γ·pos, γ·arrival)`; since `γ·D(u,s)` is the L1 distance there, a
    /// subtree is skipped once its box lies beyond the nearest sink found.
    pub fn search(&self, sinks: SinkKind, reach: Reach) -> Result<ShortestPaths<A::W>, SlackError> {
        if sinks == SinkKind::Virtual && !self.includes_virtual() {
            return Err(SlackError::NoVirtualServers);
        }
        let m = self.m();
        let scan = self.server_scan();
        let mut ws = SearchWorkspace::new(m);
        self.search_in(&scan, &mut ws, sinks, reach)?;
        let n = if self.includes_virtual() { 3 * m } else { 2 * m };
        let nearest = ws.nearest.take();
        let mut dist = ws.dist;
        let mut settled = ws.settled;
        dist.truncate(n);
        settled.truncate(n);
        // Servers and virtual servers are final once no farther than the
        // nearest sink; beyond it their tentative distances may be stale.
        let bounded = reach == Reach::NearestSink;
        for i in m..n {
            settled[i] = match (&dist[i], &nearest) {
                (Some(d), Some(b)) if bounded => d <= b,
                (Some(_), _) => true,
                (None, _) => false,
            };
        }
        let sp = ShortestPaths { sinks, m, dist, settled, nearest };
        #[cfg(debug_assertions)]
        if m <= 4 {
            self.cross_check(&sp)?;
        }
        Ok(sp)
    }

    /// Position-ordered server state for [`SlackGraph::nearest_real_sink`].
    pub fn server_scan(&self) -> ServerScan<A::W> {
        ServerScan::new(self.costs, self.matching, self.duals, self.arrived_servers)
    }

    /// Distance to the nearest free server, with the requests strictly
    /// closer than it (all reached requests when none is reachable) in id
    /// order. `scan` must describe this graph's duals, matching and arrivals.
    pub fn nearest_real_sink(
        &self,
        scan: &ServerScan<A::W>,
        ws: &mut SearchWorkspace<A::W>,
    ) -> Result<(Option<A::W>, Vec<(RequestId, A::W)>), SlackError> {
        let found = self.search_in(scan, ws, SinkKind::Real, Reach::NearestSink);
        let nearest = ws.nearest.clone();
        let mut ball: Vec<(RequestId, A::W)> = ws
            .settled_requests
            .iter()
            .filter_map(|&i| {
                let d = ws.dist[i].as_ref()?;
                nearest.as_ref().is_none_or(|b| d < b).then(|| (RequestId::from_index(i), d.clone()))
            })
            .collect();
        ball.sort_by_key(|(r, _)| *r);
        ws.reset();
        found?;
        #[cfg(debug_assertions)]
        if self.m() <= 16 {
            let full = self.search(SinkKind::Real, Reach::NearestSink)?;
            assert_eq!(full.nearest_sink(), nearest.as_ref(), "nearest sink from {}", self.source);
            let expected: Vec<(RequestId, A::W)> = full.inner_requests().map(|(r, d)| (r, d.clone())).collect();
            assert_eq!(expected, ball, "ball of {}", self.source);
        }
        Ok((nearest, ball))
    }

    fn search_in(
        &self,
        scan: &ServerScan<A::W>,
        ws: &mut SearchWorkspace<A::W>,
        sinks: SinkKind,
        reach: Reach,
    ) -> Result<(), SlackError> {
        let m = self.m();
        let bounded = reach == Reach::NearestSink;
        let src = self.source.index();
        ws.set(src, A::W::zero());
        ws.heap.push(Reverse((A::W::zero(), src)));

        while let Some(Reverse((d, ui))) = ws.heap.pop() {
            if ws.settled[ui] {
                continue;
            }
            if bounded && ws.nearest.as_ref().is_some_and(|b| &d > b) {
                break;
            }
            ws.settled[ui] = true;
            ws.settled_requests.push(ui);
            let u = RequestId::from_index(ui);
            if let Some(w) = self.virtual_slack(u) {
                if w.is_neg() {
                    return Err(self.negative(Vertex::Request(u), Vertex::Mv(u), &w));
                }
                let cand = d.plus(&w);
                if sinks == SinkKind::Virtual && ws.nearest.as_ref().is_none_or(|b| &cand < b) {
                    ws.nearest = Some(cand.clone());
                }
                ws.set(2 * m + ui, cand);
            }

            let mate_rank = self.matching.server_of(u).map(|s| self.costs.server_rank[s.index()]);
            let zu = self.duals.request(u);
            let dz = d.minus(zu);
            let gd_row = &self.costs.gamma_dist_by_rank[ui * m..(ui + 1) * m];
            let (gp, ga) = &self.costs.request_point[ui];
            let tree = &self.costs.tree;
            // Lower bound of any candidate under a node:
            // d - z(u) - max z(s) + γ·(L1 gap to the node's box).
            let bound = |node: usize| {
                scan.node_zs_max[node].as_ref().map(|zmax| dz.minus(zmax).plus(&tree.gap(node, gp, ga)))
            };
            let mut negative = None;
            ws.nodes.clear();
            if let Some(lb) = (m > 0).then(|| bound(0)).flatten() {
                ws.nodes.push((0, lb));
            }
            'nodes: while let Some((ni, lb)) = ws.nodes.pop() {
                if bounded && ws.nearest.as_ref().is_some_and(|b| &lb > b) {
                    continue;
                }
                let node = &tree.nodes[ni];
                if let Some((l, r)) = node.children {
                    // Nearer child on top of the stack.
                    match (bound(l), bound(r)) {
                        (Some(bl), Some(br)) if bl <= br => ws.nodes.extend([(r, br), (l, bl)]),
                        (Some(bl), Some(br)) => ws.nodes.extend([(l, bl), (r, br)]),
                        (Some(bl), None) => ws.nodes.push((l, bl)),
                        (None, Some(br)) => ws.nodes.push((r, br)),
                        (None, None) => {}
                    }
                    continue;
                }
                for k in node.lo..node.hi {
                    let Some(zs) = &scan.zs[k] else { continue };
                    if Some(k) == mate_rank {
                        continue;
                    }
                    let cand = dz.plus(&gd_row[k]).minus(zs);
                    if cand < d {
                        negative = Some(k);
                        break 'nodes;
                    }
                    if bounded && ws.nearest.as_ref().is_some_and(|b| &cand > b) {
                        continue;
                    }
                    let si = m + tree.order[k];
                    if ws.dist[si].as_ref().is_some_and(|old| &cand >= old) {
                        continue;
                    }
                    ws.set(si, cand.clone());
                    match scan.mate[k] {
                        Some(ri) => {
                            if !ws.settled[ri] && ws.dist[ri].as_ref().is_none_or(|old| &cand < old) {
                                ws.set(ri, cand.clone());
                                ws.heap.push(Reverse((cand, ri)));
                            }
                        }
                        None if sinks == SinkKind::Real => {
                            if ws.nearest.as_ref().is_none_or(|b| &cand < b) {
                                ws.nearest = Some(cand);
                            }
                        }
                        None => {}
                    }
                }
            }
            if let Some(k) = negative {
                let s = ServerId::from_index(tree.order[k]);
                let w = self.costs.gamma_dist(u, s).minus(zu).minus(self.duals.server(s));
                return Err(self.negative(Vertex::Request(u), Vertex::Server(s), &w));
            }
        }
        Ok(())
    }

    fn negative(&self, from: Vertex, to: Vertex, w: &A::W) -> SlackError {
        SlackError::NegativeSlack { from, to, weight: self.lower(w) }
    }

    /// Bellman-Ford distances from the source over the full edge list.
    pub fn bellman_ford(&self) -> Vec<(Vertex, Option<A::W>)> {
        let m = self.m();
        let edges = self.edges();
        let mut dist: Vec<Option<A::W>> = vec![None; 3 * m];
        dist[vertex_index(m, Vertex::Request(self.source))] = Some(A::W::zero());
        for _ in 0..3 * m {
            let mut changed = false;
            for (u, v, w) in &edges {
                if let Some(du) = dist[vertex_index(m, *u)].clone() {
                    let cand = du.plus(w);
                    let slot = &mut dist[vertex_index(m, *v)];
                    if slot.as_ref().is_none_or(|old| &cand < old) {
                        *slot = Some(cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.vertices().into_iter().map(|v| (v, dist[vertex_index(m, v)].clone())).collect()
    }

    /// Compares every settled Dijkstra distance against Bellman-Ford.
    pub fn cross_check(&self, sp: &ShortestPaths<A::W>) -> Result<(), SlackError> {
        for (v, bf) in self.bellman_ford() {
            if let Some(d) = sp.dist(v) {
                if Some(d) != bf.as_ref() {
                    return Err(SlackError::CrossCheck {
                        vertex: v,
                        dijkstra: Some(self.lower(d)),
                        bellman_ford: bf.map(|w| self.lower(&w)),
                    });
                }
            }
        }
        Ok(())
    }

    /// Lexicographically smallest simple path among all minimum-weight paths
    /// from the source to a sink. `None` when no sink is reachable.
    ///
    /// `sp` must come from [`SlackGraph::search`] on this graph; it settles
    /// every vertex at distance at most the nearest sink, which is all that
    /// the tight subgraph needs.
    pub fn extract_min_path(&self, sp: &ShortestPaths<A::W>) -> Option<MinPath> {
        let phi = sp.nearest.clone()?;
        let m = self.m();
        let n = sp.dist.len();
        let mut visited = vec![false; n];
        let mut dead = vec![false; n];
        let mut cur = Vertex::Request(self.source);
        visited[vertex_index(m, cur)] = true;
        let mut seq = vec![cur];

        while !self.is_target(sp, &phi, cur) {
            let mut next = None;
            let mut candidates = Vec::new();
            self.for_each_tight(sp, cur, |v| candidates.push(v));
            for v in candidates {
                let vi = vertex_index(m, v);
                if visited[vi] || dead[vi] {
                    continue;
                }
                if self.reaches_target(sp, &phi, v, &visited, &mut dead) {
                    next = Some(v);
                    break;
                }
            }
            let v = next.expect("a settled tight path to the nearest sink exists");
            visited[vertex_index(m, v)] = true;
            seq.push(v);
            cur = v;
        }
        let path = AugPath::new(seq).expect("slack graph paths alternate");
        Some(MinPath { path, phi: self.lower(&phi) })
    }

    fn is_target(&self, sp: &ShortestPaths<A::W>, phi: &A::W, v: Vertex) -> bool {
        self.is_sink(sp.sinks, v) && sp.dist(v) == Some(phi)
    }

    /// Successors `v` of `u` on tight edges (`d(u) + w = d(v)`), in vertex order.
    fn for_each_tight(&self, sp: &ShortestPaths<A::W>, u: Vertex, mut f: impl FnMut(Vertex)) {
        let Some(du) = sp.dist(u) else { return };
        self.for_each_edge(u, |v, w| {
            if let Some(dv) = sp.dist(v) {
                if &du.plus(&w) == dv {
                    f(v);
                }
            }
        });
    }

    /// Whether a target is reachable from `start` over tight edges while
    /// avoiding `visited`. Vertices proven unable to reach one are marked
    /// dead; `visited` only grows, so that verdict is permanent.
    fn reaches_target(
        &self,
        sp: &ShortestPaths<A::W>,
        phi: &A::W,
        start: Vertex,
        visited: &[bool],
        dead: &mut [bool],
    ) -> bool {
        let m = self.m();
        let mut seen = vec![false; visited.len()];
        let mut stack = vec![start];
        seen[vertex_index(m, start)] = true;
        let mut explored = Vec::new();
        while let Some(u) = stack.pop() {
            if self.is_target(sp, phi, u) {
                return true;
            }
            explored.push(vertex_index(m, u));
            self.for_each_tight(sp, u, |v| {
                let vi = vertex_index(m, v);
                if !visited[vi] && !dead[vi] && !seen[vi] {
                    seen[vi] = true;
                    stack.push(v);
                }
            });
        }
        for i in explored {
            dead[i] = true;
        }
        false
    }

    /// Minimum-cost real augmenting path, or `None` when no free server has
    /// arrived (its cost is then taken as `+∞`).
    pub fn min_real_aug_path(&self) -> Result<Option<MinPath>, SlackError> {
        let sp = self.search(SinkKind::Real, Reach::NearestSink)?;
        Ok(self.extract_min_path(&sp))
    }

    /// Minimum-cost virtual augmenting path at the graph's time.
    pub fn min_virtual_aug_path(&self) -> Result<MinPath, SlackError> {
        let sp = self.search(SinkKind::Virtual, Reach::NearestSink)?;
        Ok(self.extract_min_path(&sp).expect("the source's own virtual server is always reachable"))
    }

    /// Adjacency-list dump with rationals written as `p/q`.
    pub fn to_json(&self) -> Value {
        let vertices: Vec<Value> = self
            .vertices()
            .into_iter()
            .map(|u| {
                let mut edges = Vec::new();
                self.for_each_edge(u, |v, w| {
                    edges.push(json!({"to": v.to_string(), "weight": self.lower(&w).to_string()}))
                });
                json!({"id": u.to_string(), "edges": edges})
            })
            .collect();
        json!({
            "source": Vertex::Request(self.source).to_string(),
            "t": self.t.to_string(),
            "include_virtual": self.includes_virtual(),
            "vertices": vertices,
        })
    }
}

/// Sum of slack-graph weights along `path`, or an error naming the first edge
/// the graph does not contain.
pub fn path_slack<A: Arith>(g: &SlackGraph<'_, A>, path: &AugPath) -> Result<A::W, SlackError> {
    let bad = |reason: String| SlackError::InconsistentPath { path: path.to_string(), reason };
    if path.origin() != g.source() {
        return Err(bad(format!("origin is not the source {}", g.source())));
    }
    let mut total = A::W::zero();
    for w in path.vertices().windows(2) {
        let (u, v) = (w[0], w[1]);
        if !g.contains(u) || !g.contains(v) {
            return Err(bad(format!("edge {u} -> {v} leaves the graph")));
        }
        let mut weight = None;
        g.for_each_edge(u, |x, wt| {
            if x == v {
                weight = Some(wt);
            }
        });
        total = total.plus(&weight.ok_or_else(|| bad(format!("no edge {u} -> {v}")))?);
    }
    Ok(total)
}

/// Applies both dual-update steps for augmenting along `p_star`, re-running
/// the single-source search on `g_pre`.
pub fn dual_update<A: Arith>(
    duals: &DualStore<A::W>,
    g_pre: &SlackGraph<'_, A>,
    p_star: &AugPath,
) -> Result<DualStore<A::W>, SlackError> {
    let sp = g_pre.search(SinkKind::Real, Reach::NearestSink)?;
    dual_update_with(duals, g_pre, &sp, p_star)
}

/// Dual update using the distances `sp` of the search that produced `p_star`.
///
/// Step 1 raises `z(r)` by `φ - sl(r_i, r)` for requests and lowers `z(s)`
/// by `φ - sl(r_i, s)` for real servers whose distance is below `φ`; Step 2
/// lowers `z(r)` by `(γ-1)·D(r,s)` on every forward edge of `p_star`.
pub fn dual_update_with<A: Arith>(
    duals: &DualStore<A::W>,
    g_pre: &SlackGraph<'_, A>,
    sp: &ShortestPaths<A::W>,
    p_star: &AugPath,
) -> Result<DualStore<A::W>, SlackError> {
    let bad = |reason: &str| SlackError::InconsistentPath { path: p_star.to_string(), reason: reason.into() };
    if sp.sinks != SinkKind::Real {
        return Err(bad("distances were computed towards virtual servers"));
    }
    let phi = sp.nearest_sink().ok_or_else(|| bad("the graph has no reachable free server"))?.clone();
    let terminal = p_star.terminal_server().ok_or_else(|| bad("terminal is not a real server"))?;
    if !g_pre.is_sink(SinkKind::Real, Vertex::Server(terminal)) {
        return Err(bad("terminal is not a free arrived server"));
    }
    if path_slack(g_pre, p_star)? != phi {
        return Err(bad("slack does not equal the shortest distance to a free server"));
    }

    let costs = g_pre.costs;
    let m = costs.m();
    let mut out = duals.clone();
    for (i, d) in sp.dist.iter().enumerate() {
        let Some(d) = d else { continue };
        if !sp.settled[i] || d >= &phi {
            continue;
        }
        let gap = phi.minus(d);
        match index_vertex(m, i) {
            Vertex::Request(r) => out.request[r.index()] = out.request[r.index()].plus(&gap),
            Vertex::Server(s) => out.server[s.index()] = out.server[s.index()].minus(&gap),
            Vertex::Mv(_) => {}
        }
    }
    for (r, v) in p_star.forward_edges() {
        if let Vertex::Server(s) = v {
            let excess = costs.gamma_dist(r, s).minus(costs.dist(r, s));
            out.request[r.index()] = out.request[r.index()].minus(&excess);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "invariant")]
pub enum Violation {
    /// `z(r) + z(s) <= γ·D(r,s)` fails.
    I1 { request: RequestId, server: ServerId, lhs: Q, bound: Q },
    /// `z(r) + z(~s_r) <= γ·(t - a(r))` fails.
    I2 { request: RequestId, lhs: Q, bound: Q },
    /// An unsaturated agent has a non-zero dual.
    I3 { vertex: Vertex, value: Q },
    /// A matched pair is not tight: `z(r) + z(s) != D(r,s)`.
    I4 { request: RequestId, server: ServerId, lhs: Q, dist: Q },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub violations: Vec<Violation>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits the four dual invariants at time `t`. Feasibility is checked on
/// every request/server pair, arrived or not, which is the strongest form.
pub fn check_invariants<A: Arith>(
    costs: &CostTable<'_, A>,
    duals: &DualStore<A::W>,
    m_off: &Matching,
    arrived_requests: &[bool],
    t: &Q,
) -> InvariantReport {
    let inst = costs.inst();
    let ar = costs.arith();
    let mut violations = Vec::new();
    for r in inst.request_ids() {
        let zr = duals.request(r);
        for s in inst.server_ids() {
            let lhs = zr.plus(duals.server(s));
            let bound = costs.gamma_dist(r, s);
            if &lhs > bound {
                violations.push(Violation::I1 { request: r, server: s, lhs: ar.lower(&lhs), bound: ar.lower(bound) });
            }
        }
        if arrived_requests[r.index()] {
            let bound = costs.gamma().value() * (t - &inst.request(r).arrival);
            let lhs = ar.lower(zr);
            if lhs > bound {
                violations.push(Violation::I2 { request: r, lhs, bound });
            }
        }
        if m_off.server_of(r).is_none() && zr != &A::W::zero() {
            violations.push(Violation::I3 { vertex: Vertex::Request(r), value: ar.lower(zr) });
        }
    }
    for s in inst.server_ids() {
        let zs = duals.server(s);
        if m_off.request_of(s).is_none() && zs != &A::W::zero() {
            violations.push(Violation::I3 { vertex: Vertex::Server(s), value: ar.lower(zs) });
        }
    }
    for (r, s) in m_off.pairs() {
        let lhs = duals.request(r).plus(duals.server(s));
        let dist = costs.dist(r, s);
        if &lhs != dist {
            violations.push(Violation::I4 { request: r, server: s, lhs: ar.lower(&lhs), dist: ar.lower(dist) });
        }
    }
    InvariantReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Q {
        Q::from_int(n)
    }
    fn r(i: u32) -> Vertex {
        Vertex::Request(RequestId(i))
    }
    fn s(i: u32) -> Vertex {
        Vertex::Server(ServerId(i))
    }

    /// r1(0,0), r2(0,0), s1(1,0), s2(10,0) after r1 has been matched to s1.
    fn two_by_two() -> (Instance, Matching, DualStore) {
        let inst = Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap();
        let matching = Matching::from_pairs(2, &[(RequestId(1), ServerId(1))]).unwrap();
        let mut duals = DualStore::zeros(2);
        duals.set_request(RequestId(1), q(1));
        (inst, matching, duals)
    }

    #[test]
    fn initial_graph_edges() {
        let inst = Instance::from_ints(&[(0, 0)], &[(1, 0)]).unwrap();
        let costs = CostTable::new(&inst, Gamma::default());
        let m = Matching::empty(1);
        let z = DualStore::zeros(1);
        let arrived = [true];
        let g = build_slack_graph(&costs, RequestId(1), q(2), &m, &z, &arrived, false).unwrap();
        assert_eq!(g.edges(), vec![(r(1), s(1), q(3))]);
        let g = build_slack_graph(&costs, RequestId(1), q(2), &m, &z, &arrived, true).unwrap();
        assert_eq!(g.edges(), vec![(r(1), s(1), q(3)), (r(1), Vertex::Mv(RequestId(1)), q(6))]);
    }

    #[test]
    fn post_match_graph_edges() {
        let (inst, matching, duals) = two_by_two();
        let costs = CostTable::new(&inst, Gamma::default());
        let arrived = [true, true];
        let g = build_slack_graph(&costs, RequestId(2), q(1), &matching, &duals, &arrived, false).unwrap();
        let mut edges = g.edges();
        edges.sort();
        let mut expected = vec![(r(2), s(1), q(3)), (s(1), r(1), q(0)), (r(1), s(2), q(29)), (r(2), s(2), q(30))];
        expected.sort();
        assert_eq!(edges, expected);

        let best = g.min_real_aug_path().unwrap().unwrap();
        assert_eq!(best.path.vertices(), &[r(2), s(2)]);
        assert_eq!(best.phi, q(30));
    }

    #[test]
    fn no_arrived_server_means_no_real_path() {
        let inst = Instance::from_ints(&[(0, 0)], &[(1, 5)]).unwrap();
        let costs = CostTable::new(&inst, Gamma::default());
        let m = Matching::empty(1);
        let z = DualStore::zeros(1);
        let g = SlackGraph::new(&costs, RequestId(1), q(0), &m, &z, &[false], false).unwrap();
        assert_eq!(g.min_real_aug_path().unwrap(), None);
        assert!(matches!(g.min_virtual_aug_path(), Err(SlackError::NoVirtualServers)));
    }

    #[test]
    fn virtual_paths_grow_with_waiting_time() {
        let inst = Instance::from_ints(&[(0, 3)], &[(100, 0)]).unwrap();
        let costs = CostTable::new(&inst, Gamma::default());
        let m = Matching::empty(1);
        let z = DualStore::zeros(1);
        let arrived = [true];
        let at = |t: i64| {
            let g = SlackGraph::new(&costs, RequestId(1), q(t), &m, &z, &arrived, true).unwrap();
            g.min_virtual_aug_path().unwrap()
        };
        assert_eq!(at(3).phi, q(0));
        assert_eq!(at(5).phi, q(6));
        assert_eq!(at(5).path.vertices(), &[r(1), Vertex::Mv(RequestId(1))]);
    }

    #[test]
    fn saturated_source_and_negative_slack_are_rejected() {
        let (inst, matching, duals) = two_by_two();
        let costs = CostTable::new(&inst, Gamma::default());
        let arrived = [true, true];
        assert!(matches!(
            SlackGraph::new(&costs, RequestId(1), q(1), &matching, &duals, &arrived, false),
            Err(SlackError::SourceSaturated(_))
        ));
        let mut broken = duals.clone();
        broken.set_request(RequestId(1), q(100));
        assert!(matches!(
            build_slack_graph(&costs, RequestId(2), q(1), &matching, &broken, &arrived, false),
            Err(SlackError::NegativeSlack { .. })
        ));
        let g = SlackGraph::new(&costs, RequestId(2), q(1), &matching, &broken, &arrived, false).unwrap();
        assert!(matches!(g.min_real_aug_path(), Err(SlackError::NegativeSlack { .. })));
    }

    #[test]
    fn first_dual_update_trace() {
        let inst = Instance::from_ints(&[(0, 0)], &[(1, 0)]).unwrap();
        let costs = CostTable::new(&inst, Gamma::default());
        let m = Matching::empty(1);
        let z = DualStore::zeros(1);
        let arrived = [true];
        let g = SlackGraph::new(&costs, RequestId(1), q(1), &m, &z, &arrived, false).unwrap();
        let best = g.min_real_aug_path().unwrap().unwrap();
        assert_eq!(best.phi, q(3));
        let z1 = dual_update(&z, &g, &best.path).unwrap();
        assert_eq!(z1.request(RequestId(1)), &q(1));
        assert_eq!(z1.server(ServerId(1)), &q(0));
        let m1 = m.augment(&best.path).unwrap();
        assert!(check_invariants(&costs, &z1, &m1, &[true], &q(1)).passed());
    }

    #[test]
    fn dual_update_rejects_a_foreign_path() {
        let (inst, matching, duals) = two_by_two();
        let costs = CostTable::new(&inst, Gamma::default());
        let arrived = [true, true];
        let g = SlackGraph::new(&costs, RequestId(2), q(1), &matching, &duals, &arrived, false).unwrap();
        // Valid augmenting path, but not a shortest one (32 > 30).
        let longer = AugPath::new(vec![r(2), s(1), r(1), s(2)]).unwrap();
        assert!(matches!(dual_update(&duals, &g, &longer), Err(SlackError::InconsistentPath { .. })));
    }

    #[test]
    fn invariant_audit() {
        let inst = Instance::from_ints(&[(0, 0)], &[(1, 0)]).unwrap();
        let costs = CostTable::new(&inst, Gamma::default());
        let empty = Matching::empty(1);
        assert!(check_invariants(&costs, &DualStore::zeros(1), &empty, &[true], &q(0)).passed());

        let matched = Matching::from_pairs(1, &[(RequestId(1), ServerId(1))]).unwrap();
        let mut z = DualStore::zeros(1);
        z.set_request(RequestId(1), q(1));
        assert!(check_invariants(&costs, &z, &matched, &[true], &q(1)).passed());

        z.set_request(RequestId(1), q(100));
        let report = check_invariants(&costs, &z, &matched, &[true], &q(1));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::I1 { request: RequestId(1), server: ServerId(1), .. })));
    }

    #[test]
    fn ties_go_to_the_smallest_vertex_sequence() {
        // Two free servers at the same TA distance from r1.
        let inst = Instance::from_ints(&[(0, 0), (50, 9)], &[(2, 0), (-2, 0)]).unwrap();
        let costs = CostTable::new(&inst, Gamma::default());
        let m = Matching::empty(2);
        let z = DualStore::zeros(2);
        let arrived = [true, true];
        let g = SlackGraph::new(&costs, RequestId(1), q(0), &m, &z, &arrived, false).unwrap();
        let best = g.min_real_aug_path().unwrap().unwrap();
        assert_eq!(best.path.vertices(), &[r(1), s(1)]);
    }

    #[test]
    fn json_dump_lists_weights_as_rationals() {
        let (inst, matching, duals) = two_by_two();
        let costs = CostTable::new(&inst, Gamma::new(Q::new(5, 2)).unwrap());
        let arrived = [true, true];
        let g = SlackGraph::new(&costs, RequestId(2), q(1), &matching, &duals, &arrived, false).unwrap();
        let text = g.to_json().to_string();
        assert!(text.contains("\"5/2\""), "{text}");
        assert!(text.contains("\"source\":\"r2\""));
    }
}
