//! First-passage sampling on an implicitly indexed truncated tree.
//!
//! Transmission along an edge depends only on the transmitter's infection
//! time, so the infection time of the centre is the minimum over vertices
//! `v` of `start_v + Σ d` along the path from `v` inward, where `start_v` is
//! 0 for initially infected vertices and the self-infection time otherwise,
//! and each edge delay `d` counts only if it precedes the transmitter's
//! recovery. The search pops vertices in order of path delay from the
//! centre and stops as soon as no unexplored path can beat the best
//! candidate, so only vertices within the current infection time are ever
//! visited.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::rng::{ReplicaRng, VertexDraws};
use super::Boundary;
use crate::discrete::DiscreteModelSpec;

/// Vertex numbering: the centre is 0 and child `j` of `v` is
/// `v·(n+1) + 1 + j`, which is injective for at most `n+1` children.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape {
    pub n: u32,
    pub depth: u32,
    /// Children of the centre: `n + 1` on the homogeneous tree, `n` on the
    /// rooted tree.
    pub centre_children: u32,
}

impl Shape {
    /// Largest id used, if it fits in `u64`.
    pub(crate) fn max_id(&self) -> Option<u64> {
        let base = self.n as u64 + 1;
        let mut id: u64 = 0;
        for _ in 0..self.depth {
            id = id.checked_mul(base)?.checked_add(base)?;
        }
        id.checked_mul(16)?;
        Some(id)
    }

    fn child(&self, v: u64, j: u32) -> u64 {
        v * (self.n as u64 + 1) + 1 + j as u64
    }

    fn children(&self, v: u64) -> u32 {
        if v == 0 {
            self.centre_children
        } else {
            self.n
        }
    }
}

/// Time-to-infection of the centre in one replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaOutcome {
    /// `∞` when the centre is not infected before the horizon.
    pub tau: f64,
    /// Index of the centre's neighbour whose subtree delivered the
    /// infection; `None` for initial or self-infection, or no infection.
    pub via: Option<u32>,
}

pub(crate) struct Entry {
    dist: f64,
    id: u64,
    depth: u32,
    via: Option<u32>,
    draws: VertexDraws,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.id.cmp(&self.id))
    }
}

pub(crate) struct Sampler<'a> {
    pub spec: &'a DiscreteModelSpec,
    pub shape: Shape,
    pub horizon: f64,
}

impl Sampler<'_> {
    fn start_time(&self, draws: &VertexDraws, depth: u32, boundary: Boundary) -> f64 {
        if depth == self.shape.depth && boundary == Boundary::Pessimistic {
            return 0.0;
        }
        if draws.initial < self.spec.p() {
            return 0.0;
        }
        self.spec
            .lambda()
            .inverse_cumulative(draws.self_infection)
            .unwrap_or(f64::INFINITY)
    }

    /// Delay until `v` infects its parent, or `∞` if it recovers first.
    fn transmission_delay(&self, draws: &VertexDraws) -> f64 {
        let d = self
            .spec
            .eps()
            .inverse_cumulative(draws.transmission)
            .unwrap_or(f64::INFINITY);
        let h = self
            .spec
            .recovery()
            .quantile_tail(draws.recovery)
            .unwrap_or(f64::INFINITY);
        if d < h {
            d
        } else {
            f64::INFINITY
        }
    }

    pub(crate) fn sample(
        &self,
        rng: &mut ReplicaRng,
        boundary: Boundary,
        heap: &mut BinaryHeap<Entry>,
    ) -> ReplicaOutcome {
        heap.clear();
        let mut best = self.horizon;
        let mut best_via = None;
        let mut found = false;
        heap.push(Entry {
            dist: 0.0,
            id: 0,
            depth: 0,
            via: None,
            draws: rng.vertex(0),
        });
        while let Some(e) = heap.pop() {
            if e.dist >= best {
                break;
            }
            let candidate = e.dist + self.start_time(&e.draws, e.depth, boundary);
            if candidate < best {
                best = candidate;
                best_via = e.via;
                found = true;
            }
            if e.depth == self.shape.depth {
                continue;
            }
            for j in 0..self.shape.children(e.id) {
                let id = self.shape.child(e.id, j);
                let draws = rng.vertex(id);
                let dist = e.dist + self.transmission_delay(&draws);
                if dist < best {
                    heap.push(Entry {
                        dist,
                        id,
                        depth: e.depth + 1,
                        via: if e.id == 0 { Some(j) } else { e.via },
                        draws,
                    });
                }
            }
        }
        if found {
            ReplicaOutcome {
                tau: best,
                via: best_via,
            }
        } else {
            ReplicaOutcome {
                tau: f64::INFINITY,
                via: None,
            }
        }
    }
}

pub(crate) fn new_heap() -> BinaryHeap<Entry> {
    BinaryHeap::new()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_distinct_within_the_truncation() {
        let shape = Shape {
            n: 2,
            depth: 4,
            centre_children: 3,
        };
        let mut ids = vec![0u64];
        let mut frontier = vec![0u64];
        for _ in 0..shape.depth {
            let mut next = Vec::new();
            for &v in &frontier {
                for j in 0..shape.children(v) {
                    next.push(shape.child(v, j));
                }
            }
            ids.extend(&next);
            frontier = next;
        }
        let total = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), total);
        assert!(*ids.last().unwrap() <= shape.max_id().unwrap());
    }

    #[test]
    fn overflow_is_detected() {
        let shape = Shape {
            n: 255,
            depth: 9,
            centre_children: 256,
        };
        assert!(shape.max_id().is_none());
    }
}
