//! Matchings, directed augmenting paths and their γ-net-cost.
//!
//! A path is stored as its vertex sequence `r s r s ...`; edge direction is
//! implied by position. Request-to-server edges are charged `γ·D`,
//! server-to-request edges are credited `D`. A virtual path ends in the
//! moving virtual server of its last request, whose distance at time `t` is
//! that request's waiting time.

use std::collections::HashSet;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::instance::{Instance, RequestId, ServerId};
use crate::num::Q;

/// A vertex of an augmenting path. The derived order (requests, then real
/// servers, then virtual servers, each by id) is the tie-break order used
/// for lexicographic path comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Request(RequestId),
    Server(ServerId),
    /// Moving virtual server owned by the given request.
    Mv(RequestId),
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Request(r) => write!(f, "{r}"),
            Vertex::Server(s) => write!(f, "{s}"),
            Vertex::Mv(r) => write!(f, "~s{}", r.0),
        }
    }
}

impl Serialize for Vertex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Real,
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("a path needs an even number (>= 2) of vertices, got {0}")]
    BadLength(usize),
    #[error("vertex {vertex} at position {position} breaks request/server alternation")]
    BadAlternation { position: usize, vertex: Vertex },
    #[error("vertex {0} repeats")]
    Repeated(Vertex),
    #[error("virtual server {0} may only terminate a path right after its owner")]
    MisplacedVirtual(Vertex),
    #[error("expected a {expected:?} path")]
    WrongKind { expected: PathKind },
    #[error("time {t} precedes the arrival of {owner}")]
    BeforeArrival { owner: RequestId, t: Q },
}

/// A directed alternating path from a free request to a free (real or
/// virtual) server.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AugPath {
    vertices: Vec<Vertex>,
}

impl AugPath {
    pub fn new(vertices: Vec<Vertex>) -> Result<Self, PathError> {
        let n = vertices.len();
        if n < 2 || n % 2 != 0 {
            return Err(PathError::BadLength(n));
        }
        let mut seen = HashSet::with_capacity(n);
        for (i, &v) in vertices.iter().enumerate() {
            let ok = match v {
                Vertex::Request(_) => i % 2 == 0,
                Vertex::Server(_) => i % 2 == 1,
                Vertex::Mv(owner) => {
                    if i != n - 1 || vertices[i - 1] != Vertex::Request(owner) {
                        return Err(PathError::MisplacedVirtual(v));
                    }
                    true
                }
            };
            if !ok {
                return Err(PathError::BadAlternation { position: i, vertex: v });
            }
            if !seen.insert(v) {
                return Err(PathError::Repeated(v));
            }
        }
        Ok(AugPath { vertices })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn kind(&self) -> PathKind {
        match self.terminal() {
            Vertex::Mv(_) => PathKind::Virtual,
            _ => PathKind::Real,
        }
    }

    pub fn origin(&self) -> RequestId {
        match self.vertices[0] {
            Vertex::Request(r) => r,
            _ => unreachable!("validated on construction"),
        }
    }

    pub fn terminal(&self) -> Vertex {
        *self.vertices.last().expect("non-empty")
    }

    /// Terminal real server; `None` for virtual paths.
    pub fn terminal_server(&self) -> Option<ServerId> {
        match self.terminal() {
            Vertex::Server(s) => Some(s),
            _ => None,
        }
    }

    /// Request-to-server edges, in path order.
    pub fn forward_edges(&self) -> impl Iterator<Item = (RequestId, Vertex)> + '_ {
        self.vertices.chunks(2).map(|c| match c[0] {
            Vertex::Request(r) => (r, c[1]),
            _ => unreachable!("validated on construction"),
        })
    }

    /// Server-to-request edges, in path order.
    pub fn backward_edges(&self) -> impl Iterator<Item = (ServerId, RequestId)> + '_ {
        self.vertices[1..].chunks(2).filter(|c| c.len() == 2).map(|c| match (c[0], c[1]) {
            (Vertex::Server(s), Vertex::Request(r)) => (s, r),
            _ => unreachable!("validated on construction"),
        })
    }

    pub fn len_edges(&self) -> usize {
        self.vertices.len() - 1
    }
}

impl fmt::Display for AugPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl Serialize for AugPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.vertices.iter())
    }
}

/// The net-cost multiplier γ > 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gamma(Q);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("gamma must be greater than 1, got {0}")]
pub struct GammaError(pub Q);

impl Gamma {
    pub fn new(value: Q) -> Result<Self, GammaError> {
        if value <= Q::one() {
            return Err(GammaError(value));
        }
        Ok(Gamma(value))
    }

    pub fn value(&self) -> &Q {
        &self.0
    }

    pub fn is_three(&self) -> bool {
        self.0 == Q::from_int(3)
    }
}

impl Default for Gamma {
    fn default() -> Self {
        Gamma(Q::from_int(3))
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// γ-net-cost of any alternating run of real vertices; edges are charged by
/// direction. Empty and single-vertex runs cost zero, so the value is
/// additive over splits at a shared vertex.
pub fn segment_net_cost(inst: &Instance, vertices: &[Vertex], gamma: &Gamma) -> Result<Q, PathError> {
    let mut forward = Q::zero();
    let mut backward = Q::zero();
    for (i, w) in vertices.windows(2).enumerate() {
        match (w[0], w[1]) {
            (Vertex::Request(r), Vertex::Server(s)) => forward += inst.dist(r, s),
            (Vertex::Server(s), Vertex::Request(r)) => backward += inst.dist(r, s),
            (_, v) => return Err(PathError::BadAlternation { position: i + 1, vertex: v }),
        }
    }
    Ok(gamma.value() * forward - backward)
}

/// γ-net-cost of a real augmenting path.
pub fn net_cost(inst: &Instance, path: &AugPath, gamma: &Gamma) -> Result<Q, PathError> {
    if path.kind() != PathKind::Real {
        return Err(PathError::WrongKind { expected: PathKind::Real });
    }
    segment_net_cost(inst, path.vertices(), gamma)
}

/// γ-net-cost at time `t` of a virtual augmenting path.
pub fn virtual_net_cost(inst: &Instance, path: &AugPath, t: &Q, gamma: &Gamma) -> Result<Q, PathError> {
    let owner = match path.terminal() {
        Vertex::Mv(owner) => owner,
        _ => return Err(PathError::WrongKind { expected: PathKind::Virtual }),
    };
    let arrival = &inst.request(owner).arrival;
    if t < arrival {
        return Err(PathError::BeforeArrival { owner, t: t.clone() });
    }
    let n = path.vertices().len();
    let body = segment_net_cost(inst, &path.vertices()[..n - 1], gamma)?;
    Ok(body + gamma.value() * (t - arrival))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AugmentError {
    #[error("only real paths can augment a matching")]
    NotReal,
    #[error("origin {0} is already saturated")]
    OriginSaturated(RequestId),
    #[error("terminal {0} is already saturated")]
    TerminalSaturated(ServerId),
    #[error("forward edge ({0}, {1}) is already matched")]
    ForwardEdgeMatched(RequestId, ServerId),
    #[error("backward edge ({0}, {1}) is not matched")]
    BackwardEdgeUnmatched(ServerId, RequestId),
}

/// A set of vertex-disjoint request/server pairs over an instance of size `m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    of_request: Vec<Option<ServerId>>,
    of_server: Vec<Option<RequestId>>,
    len: usize,
}

impl Matching {
    pub fn empty(m: usize) -> Self {
        Matching { of_request: vec![None; m], of_server: vec![None; m], len: 0 }
    }

    /// Builds a matching from pairs; `None` if an agent repeats.
    pub fn from_pairs(m: usize, pairs: &[(RequestId, ServerId)]) -> Option<Self> {
        let mut out = Matching::empty(m);
        for &(r, s) in pairs {
            if out.of_request[r.index()].is_some() || out.of_server[s.index()].is_some() {
                return None;
            }
            out.link(r, s);
        }
        Some(out)
    }

    fn link(&mut self, r: RequestId, s: ServerId) {
        self.of_request[r.index()] = Some(s);
        self.of_server[s.index()] = Some(r);
        self.len += 1;
    }

    pub fn m(&self) -> usize {
        self.of_request.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn server_of(&self, r: RequestId) -> Option<ServerId> {
        self.of_request[r.index()]
    }

    pub fn request_of(&self, s: ServerId) -> Option<RequestId> {
        self.of_server[s.index()]
    }

    pub fn contains(&self, r: RequestId, s: ServerId) -> bool {
        self.of_request[r.index()] == Some(s)
    }

    pub fn is_saturated(&self, v: Vertex) -> bool {
        match v {
            Vertex::Request(r) => self.server_of(r).is_some(),
            Vertex::Server(s) => self.request_of(s).is_some(),
            Vertex::Mv(_) => false,
        }
    }

    /// Pairs ordered by request id.
    pub fn pairs(&self) -> Vec<(RequestId, ServerId)> {
        self.of_request
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (RequestId::from_index(i), s)))
            .collect()
    }

    /// Sum of TA distances of the matched pairs.
    pub fn ta_cost(&self, inst: &Instance) -> Q {
        self.pairs().into_iter().map(|(r, s)| inst.dist(r, s)).sum()
    }

    fn check_augmenting(&self, path: &AugPath) -> Result<ServerId, AugmentError> {
        let terminal = path.terminal_server().ok_or(AugmentError::NotReal)?;
        let origin = path.origin();
        if self.server_of(origin).is_some() {
            return Err(AugmentError::OriginSaturated(origin));
        }
        if self.request_of(terminal).is_some() {
            return Err(AugmentError::TerminalSaturated(terminal));
        }
        for w in path.vertices().windows(2) {
            match (w[0], w[1]) {
                (Vertex::Request(r), Vertex::Server(s)) if self.contains(r, s) => {
                    return Err(AugmentError::ForwardEdgeMatched(r, s));
                }
                (Vertex::Server(s), Vertex::Request(r)) if !self.contains(r, s) => {
                    return Err(AugmentError::BackwardEdgeUnmatched(s, r));
                }
                _ => {}
            }
        }
        Ok(terminal)
    }

    /// `M ⊕ E(P)`: forward edges join the matching, backward edges leave it.
    pub fn augment(&self, path: &AugPath) -> Result<Matching, AugmentError> {
        let mut out = self.clone();
        out.augment_in_place(path)?;
        Ok(out)
    }

    /// In-place variant of [`Matching::augment`] for the single-threaded engines.
    /// The matching is left untouched when the path is rejected.
    pub fn augment_in_place(&mut self, path: &AugPath) -> Result<(), AugmentError> {
        self.check_augmenting(path)?;
        for (s, r) in path.backward_edges() {
            self.of_request[r.index()] = None;
            self.of_server[s.index()] = None;
            self.len -= 1;
        }
        for (r, v) in path.forward_edges() {
            if let Vertex::Server(s) = v {
                self.link(r, s);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(i: u32) -> Vertex {
        Vertex::Request(RequestId(i))
    }
    fn s(i: u32) -> Vertex {
        Vertex::Server(ServerId(i))
    }
    fn mv(i: u32) -> Vertex {
        Vertex::Mv(RequestId(i))
    }

    #[test]
    fn path_validation() {
        assert!(AugPath::new(vec![r(1), s(1)]).is_ok());
        assert!(matches!(AugPath::new(vec![]), Err(PathError::BadLength(0))));
        assert!(matches!(AugPath::new(vec![r(1)]), Err(PathError::BadLength(1))));
        assert!(matches!(AugPath::new(vec![s(1), r(1)]), Err(PathError::BadAlternation { position: 0, .. })));
        assert!(matches!(AugPath::new(vec![r(1), s(1), r(1), s(2)]), Err(PathError::Repeated(_))));
        assert!(matches!(AugPath::new(vec![r(1), mv(2)]), Err(PathError::MisplacedVirtual(_))));
        assert!(matches!(
            AugPath::new(vec![r(1), mv(1), r(2), s(2)]),
            Err(PathError::MisplacedVirtual(_))
        ));
        assert_eq!(AugPath::new(vec![r(2), s(1), r(1), mv(1)]).unwrap().kind(), PathKind::Virtual);
    }

    #[test]
    fn net_cost_examples() {
        let g = Gamma::default();
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 0)]).unwrap();
        let p = AugPath::new(vec![r(1), s(1)]).unwrap();
        assert_eq!(net_cost(&inst, &p, &g).unwrap(), Q::from_int(12));
        assert_eq!(segment_net_cost(&inst, &[], &g).unwrap(), Q::zero());

        // D(r1,s1)=2, D(s1,r2)=1, D(r2,s2)=4
        let inst = Instance::from_ints(&[(0, 0), (3, 0)], &[(2, 0), (7, 0)]).unwrap();
        let p = AugPath::new(vec![r(1), s(1), r(2), s(2)]).unwrap();
        assert_eq!(net_cost(&inst, &p, &g).unwrap(), Q::from_int(17));
    }

    #[test]
    fn virtual_net_cost_examples() {
        let g = Gamma::default();
        let inst = Instance::from_ints(&[(0, 0)], &[(9, 0)]).unwrap();
        let p = AugPath::new(vec![r(1), mv(1)]).unwrap();
        assert_eq!(virtual_net_cost(&inst, &p, &Q::zero(), &g).unwrap(), Q::zero());
        assert_eq!(virtual_net_cost(&inst, &p, &Q::from_int(2), &g).unwrap(), Q::from_int(6));
        assert!(net_cost(&inst, &p, &g).is_err());

        // D(r2,s1)=1, D(s1,r1)=1, waiting time of r1 is 2
        let inst = Instance::from_ints(&[(0, 0), (2, 0)], &[(1, 0), (50, 0)]).unwrap();
        let p = AugPath::new(vec![r(2), s(1), r(1), mv(1)]).unwrap();
        assert_eq!(virtual_net_cost(&inst, &p, &Q::from_int(2), &g).unwrap(), Q::from_int(8));
        assert!(matches!(
            virtual_net_cost(&inst, &AugPath::new(vec![r(1), s(1)]).unwrap(), &Q::zero(), &g),
            Err(PathError::WrongKind { .. })
        ));
    }

    #[test]
    fn augment_examples() {
        let m0 = Matching::empty(2);
        let m1 = m0.augment(&AugPath::new(vec![r(1), s(1)]).unwrap()).unwrap();
        assert_eq!(m1.pairs(), vec![(RequestId(1), ServerId(1))]);

        let m = Matching::from_pairs(2, &[(RequestId(2), ServerId(1))]).unwrap();
        let out = m.augment(&AugPath::new(vec![r(1), s(1), r(2), s(2)]).unwrap()).unwrap();
        assert_eq!(out.pairs(), vec![(RequestId(1), ServerId(1)), (RequestId(2), ServerId(2))]);

        let m = Matching::from_pairs(2, &[(RequestId(1), ServerId(1))]).unwrap();
        assert_eq!(
            m.augment(&AugPath::new(vec![r(1), s(1)]).unwrap()),
            Err(AugmentError::OriginSaturated(RequestId(1)))
        );
        let mut m2 = Matching::from_pairs(3, &[(RequestId(2), ServerId(2))]).unwrap();
        let before = m2.clone();
        assert_eq!(
            m2.augment_in_place(&AugPath::new(vec![r(1), s(1), r(3), s(3)]).unwrap()),
            Err(AugmentError::BackwardEdgeUnmatched(ServerId(1), RequestId(3)))
        );
        assert_eq!(m2, before);
    }

    #[test]
    fn gamma_must_exceed_one() {
        assert!(Gamma::new(Q::one()).is_err());
        assert!(Gamma::new(Q::new(3, 2)).is_ok());
        assert!(Gamma::default().is_three());
    }
}
