//! Brute-force reference for depression filling.
//!
//! Starts every interior data cell at +∞ and relaxes
//! `W(c) = max(Z(c), min_n W(n))` until nothing changes. Border and NoData
//! cells are pinned to their input value. Quadratic in the worst case; meant
//! for grids of a few thousand cells.

use crate::raster::{neighbors, Grid, Level};

pub fn fixpoint_fill_oracle(dem: &Grid) -> Grid {
    let (w, h) = dem.dims();
    let n = w * h;
    let pinned: Vec<bool> = (0..n)
        .map(|i| dem.is_border(i) || dem.is_nodata(i))
        .collect();
    let mut water: Vec<Level> = (0..n)
        .map(|i| {
            if pinned[i] {
                dem.level(i)
            } else {
                Level::Data(f64::INFINITY)
            }
        })
        .collect();

    let relax = |water: &mut Vec<Level>, i: usize| -> bool {
        if pinned[i] {
            return false;
        }
        let lowest = neighbors(i / w, i % w, w, h)
            .map(|(r, c)| water[r * w + c])
            .min()
            .expect("interior cells have neighbours");
        let next = dem.level(i).max(lowest);
        if next != water[i] {
            water[i] = next;
            true
        } else {
            false
        }
    };

    loop {
        let mut changed = false;
        for i in 0..n {
            changed |= relax(&mut water, i);
        }
        for i in (0..n).rev() {
            changed |= relax(&mut water, i);
        }
        if !changed {
            break;
        }
    }

    let mut out = dem.clone();
    for (i, level) in water.into_iter().enumerate() {
        if let Level::Data(v) = level {
            out.put(i, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::DType;

    #[test]
    fn single_row_is_identity() {
        let g = Grid::new(5, 1, DType::I32, -1.0, vec![5.0, 1.0, 9.0, 0.0, 3.0]).unwrap();
        assert!(fixpoint_fill_oracle(&g).bitwise_eq(&g));
    }

    #[test]
    fn output_never_below_input() {
        let g = crate::synth::SyntheticDem::new(20, 20, DType::F32, 11).render();
        let f = fixpoint_fill_oracle(&g);
        for i in 0..g.len() {
            assert!(f.level(i) >= g.level(i));
        }
    }

    #[test]
    fn nested_pits_fill_to_outer_rim() {
        #[rustfmt::skip]
        let g = Grid::new(7, 7, DType::I16, -32768.0, vec![
            0., 0., 0., 0., 0., 0., 0.,
            0., 8., 8., 8., 8., 8., 0.,
            0., 8., 2., 2., 2., 8., 0.,
            0., 8., 2., 1., 2., 8., 0.,
            0., 8., 2., 2., 2., 8., 0.,
            0., 8., 8., 8., 8., 8., 0.,
            0., 0., 0., 0., 0., 0., 0.,
        ]).unwrap();
        let f = fixpoint_fill_oracle(&g);
        assert_eq!(f.get(3, 3), 8.0);
        assert_eq!(f.get(2, 2), 8.0);
        assert_eq!(f.get(1, 1), 8.0);
    }
}
