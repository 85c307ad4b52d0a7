//! Number representations for slack-graph weights and duals.
//!
//! [`Exact`] works directly on rationals. [`Lattice`] maps every value to an
//! integer multiple of `1/scale`, where `scale` is the common denominator of
//! the instance times the denominator of γ. Every slack, dual and net-cost the
//! algorithm produces stays on that lattice, so integer arithmetic is exact
//! there and far cheaper than rational arithmetic.

use std::fmt;

use crate::instance::Instance;
use crate::netcost::Gamma;
use crate::num::Q;

pub trait Weight: Clone + Ord + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn is_neg(&self) -> bool;
}

impl Weight for Q {
    fn zero() -> Self {
        Q::zero()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
}

impl Weight for i128 {
    fn zero() -> Self {
        0
    }
    fn plus(&self, other: &Self) -> Self {
        self.checked_add(*other).expect("lattice arithmetic overflow")
    }
    fn minus(&self, other: &Self) -> Self {
        self.checked_sub(*other).expect("lattice arithmetic overflow")
    }
    fn is_neg(&self) -> bool {
        *self < 0
    }
}

pub trait Arith: Clone + fmt::Debug + Send + Sync {
    type W: Weight;
    /// The representation of `q`, or `None` if `q` is not representable.
    fn lift(&self, q: &Q) -> Option<Self::W>;
    fn lower(&self, w: &Self::W) -> Q;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Exact;

impl Arith for Exact {
    type W = Q;
    fn lift(&self, q: &Q) -> Option<Q> {
        Some(q.clone())
    }
    fn lower(&self, w: &Q) -> Q {
        w.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    scale: Q,
}

impl Lattice {
    /// Magnitude budget: scaled inputs times `64·(m+1)²` must stay below `2^100`,
    /// which leaves `i128` ample headroom for sums along paths and dual drift.
    const BUDGET_BITS: u32 = 100;

    /// A lattice for running `inst` under `gamma`, or `None` when the scaled
    /// values could approach the `i128` range.
    pub fn for_instance(inst: &Instance, gamma: &Gamma) -> Option<Lattice> {
        let agents = inst.requests().iter().chain(inst.servers());
        let values: Vec<&Q> = agents.flat_map(|a| [&a.pos, &a.arrival]).collect();
        let common = Q::common_denominator(values.iter().copied());
        let g = gamma.value();
        let scale = &common * g.denominator();
        let numer = g * g.denominator();
        let magnitude = values.iter().map(|v| v.abs()).max().unwrap_or_else(Q::zero);
        let m = inst.m() as i64 + 1;
        let bound = &scale * numer * (magnitude + Q::one()) * Q::from_int(4 * 64 * m * m);
        let limit = Q::from_i128(1i128 << Self::BUDGET_BITS);
        (bound < limit).then_some(Lattice { scale })
    }

    pub fn scale(&self) -> &Q {
        &self.scale
    }
}

impl Arith for Lattice {
    type W = i128;
    fn lift(&self, q: &Q) -> Option<i128> {
        (q * &self.scale).to_i128()
    }
    fn lower(&self, w: &i128) -> Q {
        Q::from_i128(*w) / &self.scale
    }
}
