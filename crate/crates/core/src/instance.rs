//! Agents, instances, solutions and their cost in the time-augmented plane.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Q;

/// 1-based request identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u32);

/// 1-based server identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServerId(pub u32);

impl RequestId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        RequestId(i as u32 + 1)
    }
}

impl ServerId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        ServerId(i as u32 + 1)
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Request,
    Server,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Request => f.write_str("request"),
            Role::Server => f.write_str("server"),
        }
    }
}

/// A request or server: a point on the line that appears at `arrival`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Agent {
    pub id: u32,
    pub role: Role,
    pub pos: Q,
    pub arrival: Q,
}

impl Agent {
    pub fn request(id: u32, pos: Q, arrival: Q) -> Self {
        Agent { id, role: Role::Request, pos, arrival }
    }

    pub fn server(id: u32, pos: Q, arrival: Q) -> Self {
        Agent { id, role: Role::Server, pos, arrival }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("cardinality mismatch: {requests} requests vs {servers} servers")]
    CardinalityMismatch { requests: usize, servers: usize },
    #[error("an instance needs at least one request and one server")]
    Empty,
    #[error("{role} list contains an agent with role {found}")]
    WrongRole { role: Role, found: Role },
    #[error("{role} ids must be exactly 1..={m}; offending id {id}")]
    BadId { role: Role, id: u32, m: usize },
    #[error("{role} {id} has negative arrival {arrival}")]
    NegativeArrival { role: Role, id: u32, arrival: Q },
}

/// `m` requests and `m` servers, stored by id so that index `i` holds id `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    requests: Vec<Agent>,
    servers: Vec<Agent>,
}

impl Instance {
    pub fn new(requests: Vec<Agent>, servers: Vec<Agent>) -> Result<Self, InstanceError> {
        if requests.len() != servers.len() {
            return Err(InstanceError::CardinalityMismatch {
                requests: requests.len(),
                servers: servers.len(),
            });
        }
        if requests.is_empty() {
            return Err(InstanceError::Empty);
        }
        let requests = Self::normalize(requests, Role::Request)?;
        let servers = Self::normalize(servers, Role::Server)?;
        Ok(Instance { requests, servers })
    }

    fn normalize(mut agents: Vec<Agent>, role: Role) -> Result<Vec<Agent>, InstanceError> {
        let m = agents.len();
        let mut seen = vec![false; m];
        for a in &agents {
            if a.role != role {
                return Err(InstanceError::WrongRole { role, found: a.role });
            }
            if a.id == 0 || a.id as usize > m || seen[a.id as usize - 1] {
                return Err(InstanceError::BadId { role, id: a.id, m });
            }
            seen[a.id as usize - 1] = true;
            if a.arrival.is_negative() {
                return Err(InstanceError::NegativeArrival {
                    role,
                    id: a.id,
                    arrival: a.arrival.clone(),
                });
            }
        }
        agents.sort_by_key(|a| a.id);
        Ok(agents)
    }

    /// Builds an instance from `(pos, arrival)` points, numbering ids in order.
    pub fn from_points(requests: &[(Q, Q)], servers: &[(Q, Q)]) -> Result<Self, InstanceError> {
        let mk = |pts: &[(Q, Q)], role| {
            pts.iter()
                .enumerate()
                .map(|(i, (p, a))| Agent { id: i as u32 + 1, role, pos: p.clone(), arrival: a.clone() })
                .collect::<Vec<_>>()
        };
        Instance::new(mk(requests, Role::Request), mk(servers, Role::Server))
    }

    /// Same as [`Instance::from_points`] with integer coordinates.
    pub fn from_ints(requests: &[(i64, i64)], servers: &[(i64, i64)]) -> Result<Self, InstanceError> {
        let conv = |pts: &[(i64, i64)]| {
            pts.iter().map(|&(p, a)| (Q::from_int(p), Q::from_int(a))).collect::<Vec<_>>()
        };
        Instance::from_points(&conv(requests), &conv(servers))
    }

    pub fn m(&self) -> usize {
        self.requests.len()
    }

    pub fn requests(&self) -> &[Agent] {
        &self.requests
    }

    pub fn servers(&self) -> &[Agent] {
        &self.servers
    }

    pub fn request(&self, id: RequestId) -> &Agent {
        &self.requests[id.index()]
    }

    pub fn server(&self, id: ServerId) -> &Agent {
        &self.servers[id.index()]
    }

    pub fn request_ids(&self) -> impl Iterator<Item = RequestId> + '_ {
        (0..self.m()).map(RequestId::from_index)
    }

    pub fn server_ids(&self) -> impl Iterator<Item = ServerId> + '_ {
        (0..self.m()).map(ServerId::from_index)
    }

    /// TA-plane distance between a request and a server.
    pub fn dist(&self, r: RequestId, s: ServerId) -> Q {
        ta_distance(self.request(r), self.server(s))
    }
}

/// Manhattan distance in the time-augmented plane.
pub fn ta_distance(u: &Agent, v: &Agent) -> Q {
    u.pos.dist(&v.pos) + u.arrival.dist(&v.arrival)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("time {t} precedes the arrival {arrival} of request {request}")]
pub struct BeforeArrival {
    pub request: u32,
    pub arrival: Q,
    pub t: Q,
}

/// Distance at time `t` between a request and its moving virtual server,
/// i.e. the request's waiting time.
pub fn mv_distance(r: &Agent, t: &Q) -> Result<Q, BeforeArrival> {
    if t < &r.arrival {
        return Err(BeforeArrival { request: r.id, arrival: r.arrival.clone(), t: t.clone() });
    }
    Ok(t - &r.arrival)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchRecord {
    pub request: RequestId,
    pub server: ServerId,
    pub time: Q,
}

/// A perfect matching together with the time each pair was committed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Solution {
    pub pairs: Vec<MatchRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolutionError {
    #[error("pair ({request}, {server}) references an agent outside the instance")]
    UnknownAgent { request: RequestId, server: ServerId },
    #[error("request {0} appears in more than one pair")]
    RepeatedRequest(RequestId),
    #[error("server {0} appears in more than one pair")]
    RepeatedServer(ServerId),
    #[error("pair ({request}, {server}) matched at {time}, before arrival {arrival}")]
    MatchedBeforeArrival { request: RequestId, server: ServerId, time: Q, arrival: Q },
    #[error("not a perfect matching: {matched} of {m} pairs")]
    NotPerfect { matched: usize, m: usize },
}

/// Cost contributions of one matched pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairCost {
    pub request: RequestId,
    pub server: ServerId,
    pub match_time: Q,
    pub distance: Q,
    pub delay_request: Q,
    pub delay_server: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostBreakdown {
    pub distance_total: Q,
    pub delay_total: Q,
    pub total: Q,
    pub pairs: Vec<PairCost>,
}

impl Solution {
    pub fn new(mut pairs: Vec<MatchRecord>) -> Self {
        pairs.sort_by_key(|p| p.request);
        Solution { pairs }
    }

    /// Checks that the pairs form a perfect matching with feasible match times.
    pub fn validate(&self, inst: &Instance) -> Result<(), SolutionError> {
        let m = inst.m();
        let mut req_seen = vec![false; m];
        let mut srv_seen = vec![false; m];
        for p in &self.pairs {
            let (r, s) = (p.request, p.server);
            if r.0 == 0 || r.index() >= m || s.0 == 0 || s.index() >= m {
                return Err(SolutionError::UnknownAgent { request: r, server: s });
            }
            if std::mem::replace(&mut req_seen[r.index()], true) {
                return Err(SolutionError::RepeatedRequest(r));
            }
            if std::mem::replace(&mut srv_seen[s.index()], true) {
                return Err(SolutionError::RepeatedServer(s));
            }
            let latest = inst.request(r).arrival.max_of(&inst.server(s).arrival);
            if &p.time < latest {
                return Err(SolutionError::MatchedBeforeArrival {
                    request: r,
                    server: s,
                    time: p.time.clone(),
                    arrival: latest.clone(),
                });
            }
        }
        if self.pairs.len() != m {
            return Err(SolutionError::NotPerfect { matched: self.pairs.len(), m });
        }
        Ok(())
    }

    pub fn server_of(&self, r: RequestId) -> Option<&MatchRecord> {
        self.pairs.iter().find(|p| p.request == r)
    }

    pub fn as_pairs(&self) -> Vec<(RequestId, ServerId)> {
        self.pairs.iter().map(|p| (p.request, p.server)).collect()
    }
}

/// Distance plus both agents' waiting time, summed over all pairs.
pub fn solution_cost(inst: &Instance, sol: &Solution) -> Result<CostBreakdown, SolutionError> {
    sol.validate(inst)?;
    let mut distance_total = Q::zero();
    let mut delay_total = Q::zero();
    let mut pairs = Vec::with_capacity(sol.pairs.len());
    for p in &sol.pairs {
        let r = inst.request(p.request);
        let s = inst.server(p.server);
        let distance = r.pos.dist(&s.pos);
        let delay_request = &p.time - &r.arrival;
        let delay_server = &p.time - &s.arrival;
        distance_total += &distance;
        delay_total += &delay_request;
        delay_total += &delay_server;
        pairs.push(PairCost {
            request: p.request,
            server: p.server,
            match_time: p.time.clone(),
            distance,
            delay_request,
            delay_server,
        });
    }
    let total = &distance_total + &delay_total;
    Ok(CostBreakdown { distance_total, delay_total, total, pairs })
}

/// Sum of TA distances over a (not necessarily perfect) matching.
pub fn matching_ta_cost(inst: &Instance, pairs: &[(RequestId, ServerId)]) -> Result<Q, SolutionError> {
    let m = inst.m();
    let mut req_seen = vec![false; m];
    let mut srv_seen = vec![false; m];
    let mut total = Q::zero();
    for &(r, s) in pairs {
        if r.0 == 0 || r.index() >= m || s.0 == 0 || s.index() >= m {
            return Err(SolutionError::UnknownAgent { request: r, server: s });
        }
        if std::mem::replace(&mut req_seen[r.index()], true) {
            return Err(SolutionError::RepeatedRequest(r));
        }
        if std::mem::replace(&mut srv_seen[s.index()], true) {
            return Err(SolutionError::RepeatedServer(s));
        }
        total += inst.dist(r, s);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Q {
        Q::from_int(n)
    }

    #[test]
    fn ta_distance_examples() {
        let r = Agent::request(1, q(0), q(0));
        let s = Agent::server(1, q(2), q(1));
        assert_eq!(ta_distance(&r, &s), q(3));
        let u = Agent::request(1, q(7), q(3));
        assert_eq!(ta_distance(&u, &u), q(0));
        let r = Agent::request(1, q(-5), q(2));
        let s = Agent::server(1, q(1), q(0));
        assert_eq!(ta_distance(&r, &s), q(8));
    }

    #[test]
    fn mv_distance_examples() {
        assert_eq!(mv_distance(&Agent::request(1, q(0), q(2)), &q(5)).unwrap(), q(3));
        assert_eq!(mv_distance(&Agent::request(1, q(0), q(0)), &q(0)).unwrap(), q(0));
        let r = Agent::request(1, q(0), Q::new(1, 3));
        assert_eq!(mv_distance(&r, &Q::new(4, 3)).unwrap(), q(1));
        assert!(mv_distance(&Agent::request(1, q(0), q(2)), &q(1)).is_err());
    }

    #[test]
    fn single_pair_costs() {
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 0)]).unwrap();
        let late = Solution::new(vec![MatchRecord { request: RequestId(1), server: ServerId(1), time: q(4) }]);
        let c = solution_cost(&inst, &late).unwrap();
        assert_eq!((c.distance_total, c.delay_total, c.total), (q(4), q(8), q(12)));
        let now = Solution::new(vec![MatchRecord { request: RequestId(1), server: ServerId(1), time: q(0) }]);
        assert_eq!(solution_cost(&inst, &now).unwrap().total, q(4));
    }

    #[test]
    fn two_pair_cost_matches_per_term_accumulator() {
        let inst = Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap();
        let sol = Solution::new(vec![
            MatchRecord { request: RequestId(1), server: ServerId(1), time: q(1) },
            MatchRecord { request: RequestId(2), server: ServerId(2), time: q(10) },
        ]);
        // Independent accumulator: |Δpos| + (t - a_r) + (t - a_s) per pair, as integers.
        let terms: [(i64, i64, i64, i64, i64); 2] = [(0, 1, 1, 0, 0), (0, 10, 10, 0, 0)];
        let expected: i64 = terms
            .iter()
            .map(|&(pr, ps, t, ar, as_)| (pr - ps).abs() + (t - ar) + (t - as_))
            .sum();
        assert_eq!(expected, 33);
        assert_eq!(solution_cost(&inst, &sol).unwrap().total, q(expected));
    }

    #[test]
    fn invalid_solutions_name_the_pair() {
        let inst = Instance::from_ints(&[(0, 5)], &[(4, 0)]).unwrap();
        let early = Solution::new(vec![MatchRecord { request: RequestId(1), server: ServerId(1), time: q(3) }]);
        assert!(matches!(
            solution_cost(&inst, &early),
            Err(SolutionError::MatchedBeforeArrival { request: RequestId(1), .. })
        ));
        assert!(matches!(
            solution_cost(&inst, &Solution::default()),
            Err(SolutionError::NotPerfect { matched: 0, m: 1 })
        ));
    }

    #[test]
    fn ta_cost_of_matchings() {
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 0)]).unwrap();
        assert_eq!(matching_ta_cost(&inst, &[(RequestId(1), ServerId(1))]).unwrap(), q(4));
        let inst = Instance::from_ints(&[(0, 0)], &[(2, 1)]).unwrap();
        assert_eq!(matching_ta_cost(&inst, &[(RequestId(1), ServerId(1))]).unwrap(), q(3));
        let inst = Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap();
        let pairs = [(RequestId(1), ServerId(1)), (RequestId(2), ServerId(2))];
        assert_eq!(matching_ta_cost(&inst, &pairs).unwrap(), q(11));
        let repeated = [(RequestId(1), ServerId(1)), (RequestId(1), ServerId(2))];
        assert_eq!(
            matching_ta_cost(&inst, &repeated),
            Err(SolutionError::RepeatedRequest(RequestId(1)))
        );
    }

    #[test]
    fn instance_validation() {
        assert!(matches!(
            Instance::from_ints(&[(0, 0), (1, 1)], &[(0, 0)]),
            Err(InstanceError::CardinalityMismatch { requests: 2, servers: 1 })
        ));
        assert!(matches!(
            Instance::from_ints(&[(0, -1)], &[(0, 0)]),
            Err(InstanceError::NegativeArrival { role: Role::Request, .. })
        ));
        let dup = vec![Agent::request(1, q(0), q(0)), Agent::request(1, q(1), q(0))];
        let srv = vec![Agent::server(1, q(0), q(0)), Agent::server(2, q(1), q(0))];
        assert!(matches!(Instance::new(dup, srv), Err(InstanceError::BadId { id: 1, .. })));
    }

    #[test]
    fn instance_sorts_by_id() {
        let reqs = vec![Agent::request(2, q(5), q(0)), Agent::request(1, q(3), q(0))];
        let srvs = vec![Agent::server(1, q(0), q(0)), Agent::server(2, q(1), q(0))];
        let inst = Instance::new(reqs, srvs).unwrap();
        assert_eq!(inst.request(RequestId(1)).pos, q(3));
        assert_eq!(inst.request(RequestId(2)).pos, q(5));
    }
}
