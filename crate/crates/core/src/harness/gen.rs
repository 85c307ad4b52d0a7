//! Seeded instance generators.
//!
//! Every coordinate is drawn as an integer count of `1/1000` units, so the
//! output is a terminating decimal and byte-identical for a fixed seed.
//!
//! Families:
//!
//! * `uniform`: positions in `[0, width]`, arrivals in `[0, horizon]`.
//! * `clustered`: positions around `clusters` random centres (spread
//!   `spread`), arrivals uniform.
//! * `escalating_line`: group `k` arrives at time `k·gap`; its server sits at
//!   `P_k` and its request at `P_k + u·jitter·(P_{k+1} - P_k)` with `u`
//!   uniform in `[0, 1)`. `P_0 = 0`, `P_k = factor^(k-1)` up to exponent
//!   `max_exp`, continuing linearly in steps of `factor^max_exp` after that.
//! * `poisson`: requests and servers arrive as two independent Poisson
//!   processes of rate `rate`; positions uniform. Interarrival gaps use the
//!   inverse CDF of the exponential, truncated to a multiple of `10^-6`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;
use crate::num::Q;

const UNIT: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    Clustered,
    EscalatingLine,
    Poisson,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Uniform, Family::Clustered, Family::EscalatingLine, Family::Poisson];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Clustered => "clustered",
            Family::EscalatingLine => "escalating_line",
            Family::Poisson => "poisson",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = GenError;
    fn from_str(s: &str) -> Result<Self, GenError> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| GenError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("unknown family {0:?}; expected uniform, clustered, escalating_line or poisson")]
    UnknownFamily(String),
    #[error("m must be at least 1")]
    EmptyInstance,
    #[error("invalid parameter {name}: {reason}")]
    Param { name: &'static str, reason: String },
}

/// Family parameters; fields that a family does not use are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FamilyParams {
    /// Positions are drawn from `[0, width]`.
    pub width: Q,
    /// Arrivals are drawn from `[0, horizon]` (uniform and clustered).
    pub horizon: Q,
    pub clusters: u32,
    pub spread: Q,
    /// Arrivals per unit time of each Poisson stream.
    pub rate: Q,
    pub factor: Q,
    pub max_exp: u32,
    pub gap: Q,
    pub jitter: Q,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            width: Q::from_int(1000),
            horizon: Q::from_int(1000),
            clusters: 4,
            spread: Q::from_int(20),
            rate: Q::one(),
            factor: Q::from_int(10),
            max_exp: 9,
            gap: Q::one(),
            jitter: Q::new(1, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenSpec {
    pub family: Family,
    pub m: usize,
    pub seed: u64,
    pub params: FamilyParams,
}

impl GenSpec {
    pub fn new(family: Family, m: usize, seed: u64) -> Self {
        GenSpec { family, m, seed, params: FamilyParams::default() }
    }

    fn validate(&self) -> Result<(), GenError> {
        let p = &self.params;
        let param = |name, reason: &str| Err(GenError::Param { name, reason: reason.to_string() });
        if self.m == 0 {
            return Err(GenError::EmptyInstance);
        }
        if p.width.is_negative() {
            return param("width", "must be non-negative");
        }
        if p.horizon.is_negative() {
            return param("horizon", "must be non-negative");
        }
        match self.family {
            Family::Clustered if p.clusters == 0 => param("clusters", "need at least one cluster"),
            Family::Clustered if p.spread.is_negative() => param("spread", "must be non-negative"),
            Family::Poisson if !p.rate.is_positive() => param("rate", "must be positive"),
            Family::EscalatingLine if p.factor <= Q::one() => param("factor", "must exceed 1"),
            Family::EscalatingLine if p.gap.is_negative() => param("gap", "must be non-negative"),
            Family::EscalatingLine if p.jitter.is_negative() || p.jitter > Q::one() => {
                param("jitter", "must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// Uniform draw from `[lo, hi]` in steps of `1/1000`.
fn draw(rng: &mut ChaCha8Rng, lo: &Q, hi: &Q) -> Q {
    let steps = ((hi - lo) * Q::from_int(UNIT)).to_f64().floor() as i64;
    let k = if steps > 0 { rng.gen_range(0..=steps) } else { 0 };
    lo + Q::new(k, UNIT)
}

pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = &spec.params;
    let m = spec.m;
    let zero = Q::zero();
    let (requests, servers): (Vec<(Q, Q)>, Vec<(Q, Q)>) = match spec.family {
        Family::Uniform => {
            let pt = |rng: &mut ChaCha8Rng| (draw(rng, &zero, &p.width), draw(rng, &zero, &p.horizon));
            let requests = (0..m).map(|_| pt(&mut rng)).collect();
            let servers = (0..m).map(|_| pt(&mut rng)).collect();
            (requests, servers)
        }
        Family::Clustered => {
            let centres: Vec<Q> = (0..p.clusters).map(|_| draw(&mut rng, &zero, &p.width)).collect();
            let pt = |rng: &mut ChaCha8Rng| {
                let c = &centres[rng.gen_range(0..centres.len())];
                let pos = draw(rng, &(c - &p.spread), &(c + &p.spread));
                (pos, draw(rng, &zero, &p.horizon))
            };
            let requests = (0..m).map(|_| pt(&mut rng)).collect();
            let servers = (0..m).map(|_| pt(&mut rng)).collect();
            (requests, servers)
        }
        Family::EscalatingLine => {
            let marks = escalation_marks(m + 1, &p.factor, p.max_exp);
            let mut requests = Vec::with_capacity(m);
            let mut servers = Vec::with_capacity(m);
            for k in 0..m {
                let time = Q::from_int(k as i64) * &p.gap;
                let u = Q::new(rng.gen_range(0..UNIT), UNIT);
                let offset = u * &p.jitter * (&marks[k + 1] - &marks[k]);
                servers.push((marks[k].clone(), time.clone()));
                requests.push((&marks[k] + offset, time));
            }
            (requests, servers)
        }
        Family::Poisson => {
            let stream = |rng: &mut ChaCha8Rng| {
                let mut t = Q::zero();
                (0..m)
                    .map(|_| {
                        t += exponential_gap(rng, &p.rate);
                        (draw(rng, &zero, &p.width), t.clone())
                    })
                    .collect::<Vec<_>>()
            };
            let requests = stream(&mut rng);
            let servers = stream(&mut rng);
            (requests, servers)
        }
    };
    Ok(Instance::from_points(&requests, &servers).expect("generated agents are valid"))
}

/// `P_0 .. P_{n-1}` for the escalating line.
pub fn escalation_marks(n: usize, factor: &Q, max_exp: u32) -> Vec<Q> {
    let mut marks = Vec::with_capacity(n);
    let mut power = Q::one();
    let mut exp = 0u32;
    for k in 0..n {
        if k == 0 {
            marks.push(Q::zero());
            continue;
        }
        if k == 1 {
            marks.push(Q::one());
            continue;
        }
        let prev = marks[k - 1].clone();
        if exp < max_exp {
            power = power * factor;
            exp += 1;
            marks.push(power.clone());
        } else {
            marks.push(prev + &power);
        }
    }
    marks
}

/// Exponential interarrival time with the given rate, truncated down to a
/// multiple of `10^-6`.
fn exponential_gap(rng: &mut ChaCha8Rng, rate: &Q) -> Q {
    const DEN: i64 = 1_000_000;
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let x = -u.ln() / rate.to_f64();
    Q::new((x * DEN as f64).floor() as i64, DEN)
}

/// Independent per-instance seed for the `index`-th instance of a suite.
pub fn derive_seed(base: u64, family: Family, m: usize, index: usize) -> u64 {
    let mut x = base ^ (family as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = x.wrapping_add((m as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    x = x.wrapping_add((index as u64).wrapping_mul(0x94D0_49BB_1331_11EB));
    // splitmix64 finalizer
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
