//! Per-tile Priority-Flood with watershed labelling, and the whole-DEM
//! reference filler.
//!
//! NoData cells are treated as outlets: they are seeded into the priority
//! queue alongside the border, never modified, and every watershed that
//! contains one is tied to the DEM-edge label.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::graph::SpilloverGraph;
use crate::raster::{
    neighbors, EdgeFlags, Grid, LabelGrid, Level, EDGE_LABEL, FIRST_LABEL, UNLABELED,
};

/// Min-first queue entry; ties go to the earlier push.
#[derive(Clone, Copy, Debug)]
struct Entry {
    level: Level,
    seq: u64,
    idx: usize,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .level
            .cmp(&self.level)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

#[derive(Default)]
struct Open {
    heap: BinaryHeap<Entry>,
    seq: u64,
}

impl Open {
    fn with_capacity(n: usize) -> Self {
        Open {
            heap: BinaryHeap::with_capacity(n),
            seq: 0,
        }
    }

    #[inline]
    fn push(&mut self, idx: usize, level: Level) {
        self.heap.push(Entry {
            level,
            seq: self.seq,
            idx,
        });
        self.seq += 1;
    }

    #[inline]
    fn pop(&mut self) -> Option<usize> {
        self.heap.pop().map(|e| e.idx)
    }
}

/// Result of filling one tile in isolation.
#[derive(Clone, Debug)]
pub struct FilledTile {
    pub filled: Grid,
    pub labels: LabelGrid,
    pub graph: SpilloverGraph,
    /// Highest label handed out; tile labels are `2..=max_label`.
    pub max_label: u32,
}

/// Fill every depression internal to `dem`, label each cell with the
/// watershed (border outlet) it drains to, and record the lowest spillover
/// elevation between each pair of touching watersheds. Sides flagged in
/// `edges` lie on the DEM boundary and are tied to label 1.
pub fn fill_tile(mut dem: Grid, edges: EdgeFlags) -> FilledTile {
    let (w, h) = dem.dims();
    let n = w * h;
    let mut labels = LabelGrid::new(w, h);
    let mut graph = SpilloverGraph::new();
    let mut open = Open::with_capacity(2 * (w + h));
    let mut pit: VecDeque<(usize, Level)> = VecDeque::new();
    let mut next_label = FIRST_LABEL;

    for idx in 0..n {
        if dem.is_border(idx) || dem.is_nodata(idx) {
            open.push(idx, dem.level(idx));
        }
    }

    loop {
        let (c, cz) = if let Some(p) = pit.pop_front() {
            p
        } else if let Some(c) = open.pop() {
            (c, dem.level(c))
        } else {
            break;
        };
        let (row, col) = (c / w, c % w);

        if labels.at(c) == UNLABELED {
            let inherited = neighbors(row, col, w, h)
                .map(|(r, q)| r * w + q)
                .find(|&ni| labels.at(ni) != UNLABELED && dem.level(ni) <= cz);
            let label = match inherited {
                Some(ni) => labels.at(ni),
                None => {
                    let l = next_label;
                    next_label = next_label
                        .checked_add(1)
                        .expect("tile label space exhausted");
                    l
                }
            };
            labels.set_at(c, label);
        }

        let clabel = labels.at(c);
        for (r, q) in neighbors(row, col, w, h) {
            let ni = r * w + q;
            let nlabel = labels.at(ni);
            if nlabel != UNLABELED {
                if nlabel != clabel {
                    graph.observe(clabel, nlabel, cz.max(dem.level(ni)));
                }
                continue;
            }
            labels.set_at(ni, clabel);
            let nz = dem.level(ni);
            if nz == Level::NoData {
                open.push(ni, nz);
            } else if nz <= cz {
                dem.put(ni, dem.value(c));
                pit.push_back((ni, cz));
            } else {
                open.push(ni, nz);
            }
        }
    }

    for idx in 0..n {
        if dem.is_nodata(idx) {
            graph.observe(labels.at(idx), EDGE_LABEL, Level::Edge);
        }
    }
    let mut tie_to_edge = |idx: usize| {
        let z = match dem.level(idx) {
            Level::Data(v) => Level::Data(v),
            _ => Level::Edge,
        };
        graph.observe(labels.at(idx), EDGE_LABEL, z);
    };
    if edges.north {
        (0..w).for_each(&mut tie_to_edge);
    }
    if edges.south {
        ((h - 1) * w..n).for_each(&mut tie_to_edge);
    }
    if edges.west {
        (0..h).map(|r| r * w).for_each(&mut tie_to_edge);
    }
    if edges.east {
        (0..h).map(|r| r * w + w - 1).for_each(&mut tie_to_edge);
    }

    FilledTile {
        filled: dem,
        labels,
        graph,
        max_label: next_label - 1,
    }
}

/// Plain Priority-Flood over a whole DEM: seed the border and every NoData
/// cell, then raise each newly reached cell to at least the level it was
/// reached from.
pub fn serial_priority_flood(dem: &Grid) -> Grid {
    let mut out = dem.clone();
    let (w, h) = out.dims();
    let n = w * h;
    let mut closed = vec![false; n];
    let mut open = Open::with_capacity(2 * (w + h));

    for (idx, seen) in closed.iter_mut().enumerate() {
        if out.is_border(idx) || out.is_nodata(idx) {
            *seen = true;
            open.push(idx, out.level(idx));
        }
    }
    while let Some(c) = open.pop() {
        let cz = out.level(c);
        for (r, q) in neighbors(c / w, c % w, w, h) {
            let ni = r * w + q;
            if closed[ni] {
                continue;
            }
            closed[ni] = true;
            if out.level(ni) < cz {
                out.put(ni, out.value(c));
            }
            open.push(ni, out.level(ni));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fixpoint_fill_oracle;
    use crate::raster::DType;

    fn grid(w: usize, h: usize, data: &[f64]) -> Grid {
        Grid::new(w, h, DType::F64, -9999.0, data.to_vec()).unwrap()
    }

    #[test]
    fn monotone_slope_is_already_filled() {
        let data: Vec<f64> = (1..=9).map(f64::from).collect();
        let g = grid(3, 3, &data);
        let t = fill_tile(g.clone(), EdgeFlags::ALL);
        assert!(t.filled.bitwise_eq(&g));
        assert!(serial_priority_flood(&g).bitwise_eq(&g));
    }

    #[test]
    fn two_watersheds_meet_at_five() {
        #[rustfmt::skip]
        let g = grid(7, 5, &[
            9., 9., 9., 9., 9., 9., 9.,
            9., 2., 3., 5., 3., 2., 9.,
            1., 2., 3., 6., 3., 2., 1.,
            9., 2., 3., 5., 3., 2., 9.,
            9., 9., 9., 9., 9., 9., 9.,
        ]);
        let t = fill_tile(g, EdgeFlags::default());
        let west = t.labels.get(2, 0);
        let east = t.labels.get(2, 6);
        assert_ne!(west, east);
        assert_eq!(t.graph.get(west, east), Some(Level::Data(5.0)));
        // Every cell drains to one of the two outlets.
        assert!(t.labels.labels().iter().all(|&l| l == west || l == east));
    }

    #[test]
    fn ringed_pit_fills_to_ring() {
        #[rustfmt::skip]
        let g = grid(5, 5, &[
            1., 1., 1., 1., 1.,
            1., 5., 5., 5., 1.,
            1., 5., 0., 5., 1.,
            1., 5., 5., 5., 1.,
            1., 1., 1., 1., 1.,
        ]);
        let oracle = fixpoint_fill_oracle(&g);
        assert_eq!(oracle.get(2, 2), 5.0);
        let t = fill_tile(g.clone(), EdgeFlags::ALL);
        assert_eq!(t.filled.get(2, 2), 5.0);
        assert!(t.filled.bitwise_eq(&oracle));
        assert!(serial_priority_flood(&g).bitwise_eq(&oracle));
    }

    #[test]
    fn every_cell_gets_a_real_label() {
        #[rustfmt::skip]
        let g = grid(4, 4, &[
            3., -9999., 4., 2.,
            1., 8., -9999., 5.,
            2., 0., 7., 1.,
            6., 3., 2., 9.,
        ]);
        let t = fill_tile(g, EdgeFlags::default());
        assert!(t
            .labels
            .labels()
            .iter()
            .all(|&l| l >= FIRST_LABEL && l <= t.max_label));
        // NoData watersheds drain off the DEM.
        let l = t.labels.get(0, 1);
        assert_eq!(t.graph.get(l, EDGE_LABEL), Some(Level::Edge));
    }

    #[test]
    fn nodata_hole_acts_as_outlet() {
        #[rustfmt::skip]
        let g = grid(5, 5, &[
            9., 9., 9., 9., 9.,
            9., 1., 1., 1., 9.,
            9., 1., -9999., 1., 9.,
            9., 1., 1., 1., 9.,
            9., 9., 9., 9., 9.,
        ]);
        let serial = serial_priority_flood(&g);
        assert!(serial.bitwise_eq(&g));
        assert!(fixpoint_fill_oracle(&g).bitwise_eq(&g));
        let t = fill_tile(g.clone(), EdgeFlags::ALL);
        assert!(t.filled.bitwise_eq(&g));
    }

    #[test]
    fn all_nodata_is_identity() {
        let g = grid(3, 2, &[-9999.0; 6]);
        assert!(serial_priority_flood(&g).bitwise_eq(&g));
        let t = fill_tile(g.clone(), EdgeFlags::ALL);
        assert!(t.filled.bitwise_eq(&g));
    }

    #[test]
    fn edge_sides_tie_to_label_one() {
        let g = grid(3, 1, &[4.0, 2.0, 3.0]);
        let t = fill_tile(
            g.clone(),
            EdgeFlags {
                west: true,
                ..Default::default()
            },
        );
        let l = t.labels.get(0, 0);
        assert_eq!(t.graph.get(l, EDGE_LABEL), Some(Level::Data(4.0)));
        let none = fill_tile(g, EdgeFlags::default());
        assert!(none.graph.iter().all(|((a, _), _)| a != EDGE_LABEL));
    }

    #[test]
    fn refill_is_deterministic() {
        let g = crate::synth::SyntheticDem::new(31, 17, DType::F32, 4).render();
        let a = fill_tile(g.clone(), EdgeFlags::default());
        let b = fill_tile(g, EdgeFlags::default());
        assert_eq!(a.labels, b.labels);
        assert!(a.filled.bitwise_eq(&b.filled));
        assert_eq!(a.graph, b.graph);
    }
}
