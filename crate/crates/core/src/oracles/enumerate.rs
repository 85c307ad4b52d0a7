//! Exhaustive enumeration of alternating paths, used to check the
//! shortest-path search on small instances.

use thiserror::Error;

use super::OracleConfig;
use crate::instance::{Instance, RequestId, ServerId};
use crate::netcost::{net_cost, virtual_net_cost, AugPath, Gamma, Matching, PathError, Vertex};
use crate::num::Q;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumError {
    #[error("m = {m} exceeds the enumeration limit {limit}")]
    TooLarge { m: usize, limit: usize },
    #[error("more than {0} paths; raise the enumeration cap")]
    TooManyPaths(u64),
    #[error("no free server has arrived")]
    NoFreeServer,
    #[error("request {0} is already matched")]
    SourceMatched(RequestId),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Every augmenting path from `source` in the current matching, with its
/// γ-net-cost. Real paths end at a free arrived server; virtual paths end at
/// the virtual server of any request on the path, priced at time `t`.
pub fn enumerate_aug_paths(
    inst: &Instance,
    matching: &Matching,
    source: RequestId,
    arrived_servers: &[bool],
    gamma: &Gamma,
    virtual_t: Option<&Q>,
    config: &OracleConfig,
) -> Result<Vec<(AugPath, Q)>, EnumError> {
    let m = inst.m();
    if m > config.max_m_bruteforce {
        return Err(EnumError::TooLarge { m, limit: config.max_m_bruteforce });
    }
    if matching.server_of(source).is_some() {
        return Err(EnumError::SourceMatched(source));
    }
    let mut walk = Walk { matching, arrived_servers, virtual_mode: virtual_t.is_some(), cap: config.max_paths, found: Vec::new() };
    let mut used = vec![false; m];
    walk.extend(&mut vec![Vertex::Request(source)], &mut used)?;
    walk.found
        .into_iter()
        .map(|vertices| {
            let path = AugPath::new(vertices)?;
            let phi = match virtual_t {
                Some(t) => virtual_net_cost(inst, &path, t, gamma)?,
                None => net_cost(inst, &path, gamma)?,
            };
            Ok((path, phi))
        })
        .collect()
}

struct Walk<'a> {
    matching: &'a Matching,
    arrived_servers: &'a [bool],
    virtual_mode: bool,
    cap: u64,
    found: Vec<Vec<Vertex>>,
}

impl Walk<'_> {
    /// `seq` ends at a request; `used` marks servers already on it.
    fn extend(&mut self, seq: &mut Vec<Vertex>, used: &mut [bool]) -> Result<(), EnumError> {
        let Some(&Vertex::Request(r)) = seq.last() else { unreachable!("walks extend from requests") };
        if self.virtual_mode {
            seq.push(Vertex::Mv(r));
            self.record(seq)?;
            seq.pop();
        }
        let mate = self.matching.server_of(r);
        for j in 0..used.len() {
            let s = ServerId::from_index(j);
            if used[j] || !self.arrived_servers[j] || mate == Some(s) {
                continue;
            }
            seq.push(Vertex::Server(s));
            used[j] = true;
            match self.matching.request_of(s) {
                None if !self.virtual_mode => self.record(seq)?,
                None => {}
                Some(next) => {
                    seq.push(Vertex::Request(next));
                    self.extend(seq, used)?;
                    seq.pop();
                }
            }
            used[j] = false;
            seq.pop();
        }
        Ok(())
    }

    fn record(&mut self, seq: &[Vertex]) -> Result<(), EnumError> {
        if self.found.len() as u64 >= self.cap {
            return Err(EnumError::TooManyPaths(self.cap));
        }
        self.found.push(seq.to_vec());
        Ok(())
    }
}

/// The cheapest augmenting path from `source`, ties broken by the
/// lexicographically smallest vertex sequence.
pub fn enumerate_min_aug_path(
    inst: &Instance,
    matching: &Matching,
    source: RequestId,
    arrived_servers: &[bool],
    gamma: &Gamma,
    virtual_t: Option<&Q>,
    config: &OracleConfig,
) -> Result<(AugPath, Q), EnumError> {
    let paths = enumerate_aug_paths(inst, matching, source, arrived_servers, gamma, virtual_t, config)?;
    paths.into_iter().min_by(|a, b| (&a.1, &a.0).cmp(&(&b.1, &b.0))).ok_or(EnumError::NoFreeServer)
}
