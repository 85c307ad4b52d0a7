//! Waiting-time greedy: a pair is matched once the two agents have together
//! waited as long as their distance on the line. Adapted to the bipartite
//! setting; used as a comparison point only.

use crate::instance::{Instance, MatchRecord, RequestId, ServerId, Solution};
use crate::num::Q;

/// Earliest `t >= max(a(r), a(s))` with `(t - a(r)) + (t - a(s)) >= |pos(r) - pos(s)|`.
pub fn trigger_time(inst: &Instance, r: RequestId, s: ServerId) -> Q {
    let (req, srv) = (inst.request(r), inst.server(s));
    let balance = (req.pos.dist(&srv.pos) + &req.arrival + &srv.arrival) / Q::from_int(2);
    req.arrival.max_of(&srv.arrival).max_of(&balance).clone()
}

/// Fires pairs in order of trigger time, ties by (request id, server id),
/// skipping pairs with an already matched endpoint. A pair's trigger never
/// depends on other matches, so one sorted pass is the whole simulation.
pub fn greedy_baseline(inst: &Instance) -> Solution {
    let mut candidates: Vec<(Q, RequestId, ServerId)> = inst
        .request_ids()
        .flat_map(|r| inst.server_ids().map(move |s| (r, s)))
        .map(|(r, s)| (trigger_time(inst, r, s), r, s))
        .collect();
    candidates.sort();
    let m = inst.m();
    let mut req_done = vec![false; m];
    let mut srv_done = vec![false; m];
    let mut pairs = Vec::with_capacity(m);
    for (time, r, s) in candidates {
        if req_done[r.index()] || srv_done[s.index()] {
            continue;
        }
        req_done[r.index()] = true;
        srv_done[s.index()] = true;
        pairs.push(MatchRecord { request: r, server: s, time });
        if pairs.len() == m {
            break;
        }
    }
    Solution::new(pairs)
}
