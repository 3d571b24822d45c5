//! Producer-side global solution: make tile labels globally unique, union the
//! tile graphs, stitch adjoining edges and corners, and flood the resulting
//! spillover graph outward from the DEM edge.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::graph::SpilloverGraph;
use crate::message::TileSummary;
use crate::raster::{Level, Side, EDGE_LABEL, FIRST_LABEL};

/// Per-tile label offsets: tile-local label `l ≥ 2` becomes `offset + l`.
pub type LabelOffsets = Vec<u32>;

#[inline]
pub fn globalize(label: u32, offset: u32) -> u32 {
    if label == EDGE_LABEL {
        EDGE_LABEL
    } else {
        label + offset
    }
}

/// Assign disjoint global label ranges to the tiles and rewrite their edge
/// vectors and graphs in place. Returns each tile's offset.
pub fn uniquify_labels(summaries: &mut [TileSummary]) -> Result<LabelOffsets> {
    let mut offsets = Vec::with_capacity(summaries.len());
    let mut next: u32 = 0;
    for s in summaries.iter() {
        let used = s.max_label.saturating_sub(FIRST_LABEL - 1);
        if next.checked_add(s.max_label).is_none() {
            return Err(Error::LabelOverflow);
        }
        offsets.push(next);
        next = next.checked_add(used).ok_or(Error::LabelOverflow)?;
    }
    for (s, &offset) in summaries.iter_mut().zip(&offsets) {
        if offset == 0 {
            continue;
        }
        for side in s.edges.sides_mut() {
            for l in &mut side.labels {
                *l = globalize(*l, offset);
            }
        }
        let mut g = SpilloverGraph::new();
        for ((a, b), z) in s.graph.iter() {
            g.observe(globalize(a, offset), globalize(b, offset), z);
        }
        s.graph = g;
    }
    Ok(offsets)
}

/// Join two adjoining sides, A and B, cell by cell. Each cell of A meets the
/// up-to-three cells of B at the same or an adjacent position.
pub fn handle_edge(a: &Side, b: &Side, graph: &mut SpilloverGraph) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!(
            "adjoining edges differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let len = a.len();
    for i in 0..len {
        for ni in i.saturating_sub(1)..(i + 2).min(len) {
            let (la, lb) = (a.labels[i], b.labels[ni]);
            if la == lb {
                continue;
            }
            graph.observe(la, lb, a.levels[i].max(b.levels[ni]));
        }
    }
    Ok(())
}

/// Join the facing corner cells of two diagonally adjacent tiles.
pub fn handle_corner(a: (Level, u32), b: (Level, u32), graph: &mut SpilloverGraph) {
    if a.1 != b.1 {
        graph.observe(a.1, b.1, a.0.max(b.0));
    }
}

/// Final drainage level of every global label.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelElevations {
    levels: FxHashMap<u32, Level>,
}

impl LabelElevations {
    pub fn get(&self, label: u32) -> Option<Level> {
        self.levels.get(&label).copied()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Level)> + '_ {
        self.levels.iter().map(|(&k, &v)| (k, v))
    }

    /// Levels of one tile's local labels `2..=max_label`, in order.
    pub fn tile_slice(&self, offset: u32, max_label: u32) -> Result<Vec<Level>> {
        (FIRST_LABEL..=max_label)
            .map(|l| {
                let g = globalize(l, offset);
                self.get(g).ok_or(Error::UnreachableLabel(g))
            })
            .collect()
    }
}

#[derive(Clone, Copy)]
struct Node {
    level: Level,
    seq: u64,
    idx: usize,
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .level
            .cmp(&self.level)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

/// Priority-Flood over the spillover graph: every label's level is the lowest
/// bottleneck over all paths to label 1, which sits at −∞.
pub fn flood_graph(graph: &SpilloverGraph) -> Result<LabelElevations> {
    flood_graph_ordered(graph, false)
}

fn flood_graph_ordered(graph: &SpilloverGraph, lifo_ties: bool) -> Result<LabelElevations> {
    let mut labels = graph.labels();
    if labels.binary_search(&EDGE_LABEL).is_err() {
        labels.insert(0, EDGE_LABEL);
    }
    let index: FxHashMap<u32, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut adjacency: Vec<Vec<(usize, Level)>> = vec![Vec::new(); labels.len()];
    for ((a, b), z) in graph.iter() {
        let (ia, ib) = (index[&a], index[&b]);
        adjacency[ia].push((ib, z));
        adjacency[ib].push((ia, z));
    }

    let mut best: Vec<Option<Level>> = vec![None; labels.len()];
    let mut done = vec![false; labels.len()];
    let mut heap = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut push = |heap: &mut BinaryHeap<Node>, idx: usize, level: Level| {
        let s = if lifo_ties { u64::MAX - seq } else { seq };
        seq += 1;
        heap.push(Node { level, seq: s, idx });
    };

    let root = index[&EDGE_LABEL];
    best[root] = Some(Level::Edge);
    push(&mut heap, root, Level::Edge);
    while let Some(Node { level, idx, .. }) = heap.pop() {
        if done[idx] {
            continue;
        }
        done[idx] = true;
        for &(next, spill) in &adjacency[idx] {
            if done[next] {
                continue;
            }
            let cand = level.max(spill);
            if best[next].is_none_or(|b| cand < b) {
                best[next] = Some(cand);
                push(&mut heap, next, cand);
            }
        }
    }

    let mut levels = FxHashMap::default();
    for (i, &l) in labels.iter().enumerate() {
        match best[i] {
            Some(z) => {
                levels.insert(l, z);
            }
            None => return Err(Error::UnreachableLabel(l)),
        }
    }
    Ok(LabelElevations { levels })
}
