//! Static 2-d tree over server points `(γ·pos, γ·arrival)`.
//!
//! Servers are permuted so that every node covers a contiguous range of
//! ranks. Nodes are stored in preorder, so children follow their parent.

use crate::arith::Weight;

const LEAF: usize = 8;

#[derive(Debug, Clone)]
pub(crate) struct KdNode<W> {
    pub lo: usize,
    pub hi: usize,
    pub children: Option<(usize, usize)>,
    pos: (W, W),
    arrival: (W, W),
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree<W> {
    /// Server index at each rank.
    pub order: Vec<usize>,
    pub nodes: Vec<KdNode<W>>,
}

impl<W: Weight> KdTree<W> {
    pub fn build(points: &[(W, W)]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            split(points, &mut order, 0, &mut nodes);
        }
        KdTree { order, nodes }
    }

    /// L1 distance from `(p, a)` to the bounding box of `node`.
    pub fn gap(&self, node: usize, p: &W, a: &W) -> W {
        let n = &self.nodes[node];
        axis_gap(&n.pos, p).plus(&axis_gap(&n.arrival, a))
    }

    /// Per-node maximum of `values` (indexed by rank), skipping `None`.
    pub fn node_max(&self, values: &[Option<W>]) -> Vec<Option<W>> {
        let mut out: Vec<Option<W>> = vec![None; self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            let n = &self.nodes[i];
            out[i] = match n.children {
                Some((l, r)) => max_opt(out[l].clone(), out[r].clone()),
                None => values[n.lo..n.hi].iter().flatten().max().cloned(),
            };
        }
        out
    }
}

fn max_opt<W: Ord>(x: Option<W>, y: Option<W>) -> Option<W> {
    match (x, y) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    }
}

fn axis_gap<W: Weight>(range: &(W, W), x: &W) -> W {
    if x < &range.0 {
        range.0.minus(x)
    } else if x > &range.1 {
        x.minus(&range.1)
    } else {
        W::zero()
    }
}

fn bounds<W: Weight>(values: impl Iterator<Item = W>) -> (W, W) {
    let mut it = values;
    let first = it.next().expect("non-empty node");
    it.fold((first.clone(), first), |(lo, hi), v| (lo.min(v.clone()), hi.max(v)))
}

/// Builds the subtree over `order[..]` (ranks starting at `base`) and
/// returns its node index.
fn split<W: Weight>(points: &[(W, W)], order: &mut [usize], base: usize, nodes: &mut Vec<KdNode<W>>) -> usize {
    let pos = bounds(order.iter().map(|&j| points[j].0.clone()));
    let arrival = bounds(order.iter().map(|&j| points[j].1.clone()));
    let index = nodes.len();
    nodes.push(KdNode { lo: base, hi: base + order.len(), children: None, pos, arrival });
    if order.len() <= LEAF {
        return index;
    }
    let n = &nodes[index];
    let by_pos = n.pos.1.minus(&n.pos.0) >= n.arrival.1.minus(&n.arrival.0);
    if by_pos {
        order.sort_by(|&x, &y| (&points[x].0, &points[x].1, x).cmp(&(&points[y].0, &points[y].1, y)));
    } else {
        order.sort_by(|&x, &y| (&points[x].1, &points[x].0, x).cmp(&(&points[y].1, &points[y].0, y)));
    }
    let mid = order.len() / 2;
    let (left, right) = order.split_at_mut(mid);
    let l = split(points, left, base, nodes);
    let r = split(points, right, base + mid, nodes);
    nodes[index].children = Some((l, r));
    index
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_partition_and_bound_their_points() {
        let points: Vec<(i128, i128)> = (0..37).map(|i| ((i * 7919) % 101, (i * 31) % 17)).collect();
        let tree = KdTree::build(&points);
        let mut sorted = tree.order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..37).collect::<Vec<_>>());
        for (i, n) in tree.nodes.iter().enumerate() {
            for k in n.lo..n.hi {
                let (p, a) = &points[tree.order[k]];
                assert_eq!(tree.gap(i, p, a), 0);
            }
            if let Some((l, r)) = n.children {
                assert!(l > i && r > l);
                assert_eq!((tree.nodes[l].lo, tree.nodes[l].hi, tree.nodes[r].hi), (n.lo, tree.nodes[r].lo, n.hi));
            }
        }
    }

    #[test]
    fn node_max_skips_missing_values() {
        let points: Vec<(i128, i128)> = (0..20).map(|i| (i, 0)).collect();
        let tree = KdTree::build(&points);
        let mut values = vec![None; 20];
        values[3] = Some(-5);
        values[17] = Some(-2);
        let agg = tree.node_max(&values);
        assert_eq!(agg[0], Some(-2));
        assert!(agg.iter().any(|v| v.is_none()));
    }
}
