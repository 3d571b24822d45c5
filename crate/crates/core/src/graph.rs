//! Spillover graphs: unordered label pairs mapped to the lowest elevation at
//! which the two watersheds were seen to meet.

use rustc_hash::FxHashMap;

use crate::raster::Level;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpilloverGraph {
    edges: FxHashMap<(u32, u32), Level>,
}

#[inline]
fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SpilloverGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a meeting of `a` and `b` at `level`, keeping the lowest seen.
    /// Self-pairs are ignored. Returns true if the stored value changed.
    #[inline]
    pub fn observe(&mut self, a: u32, b: u32, level: Level) -> bool {
        if a == b {
            return false;
        }
        match self.edges.entry(key(a, b)) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                if level < *e.get() {
                    e.insert(level);
                    true
                } else {
                    false
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(level);
                true
            }
        }
    }

    pub fn get(&self, a: u32, b: u32) -> Option<Level> {
        self.edges.get(&key(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edges as `((low, high), level)` in arbitrary order.
    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), Level)> + '_ {
        self.edges.iter().map(|(&k, &v)| (k, v))
    }

    /// Edges sorted by label pair.
    pub fn sorted_edges(&self) -> Vec<((u32, u32), Level)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    /// Union `other` into `self`, keeping minima.
    pub fn absorb(&mut self, other: &SpilloverGraph) {
        for ((a, b), level) in other.iter() {
            self.observe(a, b, level);
        }
    }

    /// Distinct labels that appear in at least one edge.
    pub fn labels(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.edges.keys().flat_map(|&(a, b)| [a, b]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keeps_minimum_and_ignores_self_pairs() {
        let mut g = SpilloverGraph::new();
        assert!(g.observe(3, 2, Level::Data(7.0)));
        assert!(g.observe(2, 3, Level::Data(5.0)));
        assert!(!g.observe(3, 2, Level::Data(6.0)));
        assert!(!g.observe(4, 4, Level::Data(0.0)));
        assert_eq!(g.get(2, 3), Some(Level::Data(5.0)));
        assert_eq!(g.len(), 1);
        assert_eq!(g.sorted_edges(), vec![((2, 3), Level::Data(5.0))]);
    }

    proptest! {
        #[test]
        fn lookup_is_symmetric(ops in prop::collection::vec((1u32..8, 1u32..8, -50i32..50), 0..40)) {
            let mut g = SpilloverGraph::new();
            for &(a, b, z) in &ops {
                g.observe(a, b, Level::Data(z as f64));
            }
            for a in 1..8 {
                prop_assert_eq!(g.get(a, a), None);
                for b in 1..8 {
                    prop_assert_eq!(g.get(a, b), g.get(b, a));
                    let expect = ops.iter()
                        .filter(|&&(x, y, _)| x != y && ((x, y) == (a, b) || (y, x) == (a, b)))
                        .map(|&(_, _, z)| z)
                        .min();
                    prop_assert_eq!(g.get(a, b), expect.map(|z| Level::Data(z as f64)));
                }
            }
        }
    }
}
