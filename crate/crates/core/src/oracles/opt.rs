//! Offline minimum-cost perfect matchings under the TA distance.

use serde::Serialize;

use super::{OracleConfig, TooLarge};
use crate::arith::{Arith, Lattice, Weight};
use crate::instance::{Instance, RequestId, ServerId};
use crate::netcost::Gamma;
use crate::num::Q;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptMatching {
    /// Pairs sorted by request.
    pub pairs: Vec<(RequestId, ServerId)>,
    pub cost: Q,
}

/// Tries every one of the `m!` assignments.
pub fn opt_bruteforce(inst: &Instance, config: &OracleConfig) -> Result<OptMatching, TooLarge> {
    let m = inst.m();
    if m > config.max_m_bruteforce {
        return Err(TooLarge { m, limit: config.max_m_bruteforce });
    }
    let cost: Vec<Vec<Q>> = inst.request_ids().map(|r| inst.server_ids().map(|s| inst.dist(r, s)).collect()).collect();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best: Option<(Q, Vec<usize>)> = None;
    permute(&mut perm, 0, &mut |p| {
        let total: Q = p.iter().enumerate().map(|(i, &j)| &cost[i][j]).sum();
        if best.as_ref().is_none_or(|(b, _)| &total < b) {
            best = Some((total, p.to_vec()));
        }
    });
    let (cost, perm) = best.expect("m >= 1 has at least one assignment");
    Ok(OptMatching { pairs: pairs_of(&perm), cost })
}

fn permute(p: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

fn pairs_of(assignment: &[usize]) -> Vec<(RequestId, ServerId)> {
    assignment.iter().enumerate().map(|(i, &j)| (RequestId::from_index(i), ServerId::from_index(j))).collect()
}

/// Minimum-cost assignment of a square matrix: `assignment[row] = column`.
/// Shortest augmenting paths with potentials, `O(n³)`.
pub fn hungarian<W: Weight>(cost: &[Vec<W>]) -> (Vec<usize>, W) {
    let n = cost.len();
    // 1-based columns; column 0 is the virtual start of each augmentation.
    let mut u = vec![W::zero(); n + 1];
    let mut v = vec![W::zero(); n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv: Vec<Option<W>> = vec![None; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[i0 - 1];
            let mut delta: Option<W> = None;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1].minus(&u[i0]).minus(&v[j]);
                if minv[j].as_ref().is_none_or(|mv| &cur < mv) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].as_ref().expect("set above");
                if delta.as_ref().is_none_or(|d| mj < d) {
                    delta = Some(mj.clone());
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column remains while row i is unassigned");
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] = u[row_of[j]].plus(&delta);
                    v[j] = v[j].minus(&delta);
                } else if let Some(mv) = &mut minv[j] {
                    *mv = mv.minus(&delta);
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().fold(W::zero(), |acc, (i, &j)| acc.plus(&cost[i][j]));
    (assignment, total)
}

/// Minimum TA cost of a perfect matching between `requests` and `servers`
/// (equal lengths), with the pairs realizing it.
pub fn min_cost_matching(inst: &Instance, requests: &[RequestId], servers: &[ServerId]) -> OptMatching {
    assert_eq!(requests.len(), servers.len(), "both sides need the same size");
    let lattice = Lattice::for_instance(inst, &Gamma::default());
    let assignment = match &lattice {
        Some(lat) => {
            let cost: Option<Vec<Vec<i128>>> =
                requests.iter().map(|&r| servers.iter().map(|&s| lat.lift(&inst.dist(r, s))).collect()).collect();
            match cost {
                Some(c) => hungarian(&c).0,
                None => exact_assignment(inst, requests, servers),
            }
        }
        None => exact_assignment(inst, requests, servers),
    };
    let mut pairs: Vec<(RequestId, ServerId)> =
        assignment.iter().enumerate().map(|(i, &j)| (requests[i], servers[j])).collect();
    pairs.sort();
    let cost = pairs.iter().map(|&(r, s)| inst.dist(r, s)).sum();
    OptMatching { pairs, cost }
}

fn exact_assignment(inst: &Instance, requests: &[RequestId], servers: &[ServerId]) -> Vec<usize> {
    let cost: Vec<Vec<Q>> = requests.iter().map(|&r| servers.iter().map(|&s| inst.dist(r, s)).collect()).collect();
    hungarian(&cost).0
}

/// Offline optimum. Runs on scaled integers when every distance sits on a
/// common lattice (still exact), otherwise on rationals.
pub fn opt_hungarian(inst: &Instance) -> OptMatching {
    let requests: Vec<RequestId> = inst.request_ids().collect();
    let servers: Vec<ServerId> = inst.server_ids().collect();
    min_cost_matching(inst, &requests, &servers)
}

/// Offline optimum computed on rationals throughout.
pub fn opt_hungarian_exact(inst: &Instance) -> OptMatching {
    let requests: Vec<RequestId> = inst.request_ids().collect();
    let servers: Vec<ServerId> = inst.server_ids().collect();
    let assignment = exact_assignment(inst, &requests, &servers);
    let pairs = pairs_of(&assignment);
    let cost = pairs.iter().map(|&(r, s)| inst.dist(r, s)).sum();
    OptMatching { pairs, cost }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> Instance {
        Instance::from_ints(&[(0, 0), (0, 0)], &[(1, 0), (10, 0)]).unwrap()
    }

    #[test]
    fn single_pair_costs_its_distance() {
        let inst = Instance::from_ints(&[(0, 0)], &[(4, 0)]).unwrap();
        assert_eq!(opt_bruteforce(&inst, &OracleConfig::default()).unwrap().cost, Q::from_int(4));
        assert_eq!(opt_hungarian(&inst).cost, Q::from_int(4));
    }

    #[test]
    fn two_by_two_optimum() {
        let inst = two_by_two();
        let brute = opt_bruteforce(&inst, &OracleConfig::default()).unwrap();
        assert_eq!(brute.cost, Q::from_int(11));
        assert_eq!(opt_hungarian(&inst).cost, Q::from_int(11));
        assert_eq!(opt_hungarian_exact(&inst).cost, Q::from_int(11));
    }

    #[test]
    fn hungarian_matches_hand_solved_matrix() {
        let cost = vec![vec![4i128, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let (assignment, total) = hungarian(&cost);
        assert_eq!(total, 5);
        assert_eq!(assignment, vec![1, 0, 2]);
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let pts: Vec<(i64, i64)> = (0..9).map(|i| (i, 0)).collect();
        let inst = Instance::from_ints(&pts, &pts).unwrap();
        assert_eq!(opt_bruteforce(&inst, &OracleConfig::default()), Err(TooLarge { m: 9, limit: 8 }));
    }
}
