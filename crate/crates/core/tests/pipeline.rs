use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tileflood::orchestrator::{
    communication_check, io_counters_check, run, Dispatch, RunOptions, Strategy,
};
use tileflood::raster::{EdgeFlags, FIRST_LABEL};
use tileflood::store::{MemorySink, MemorySource, TileSource};
use tileflood::synth::SyntheticDem;
use tileflood::verify::surface_check;
use tileflood::{fill_tile, fixpoint_fill_oracle, serial_priority_flood, DType, Grid};

/// Small-range integer terrain with frequent flats and scattered NoData.
fn terraced(w: usize, h: usize, dtype: DType, seed: u64) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodata = -9999.0;
    let data = (0..w * h)
        .map(|_| {
            if rng.gen_bool(0.06) {
                nodata
            } else {
                rng.gen_range(0..6) as f64
            }
        })
        .collect();
    Grid::new(w, h, dtype, nodata, data).unwrap()
}

fn tiled(dem: &Grid, tw: usize, th: usize, opts: &RunOptions) -> Grid {
    let src = MemorySource::uniform(dem.clone(), tw, th).unwrap();
    let sink = MemorySink::new();
    let stats = run(&src, &sink, opts).unwrap();
    assert!(io_counters_check(&stats).is_empty());
    assert!(
        communication_check(&stats).is_empty(),
        "{:?}",
        communication_check(&stats)
    );
    sink.mosaic(src.layout()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn any_tiling_matches_serial(
        w in 1usize..40, h in 1usize..40,
        tw in 1usize..16, th in 1usize..16,
        seed in any::<u64>(), terr in any::<bool>(), dt in 0usize..4,
        strat in 0usize..4, workers in 1usize..4, shuffle in any::<bool>(),
    ) {
        let dtype = DType::ALL[dt];
        let dem = if terr { terraced(w, h, dtype, seed) } else { SyntheticDem::new(w, h, dtype, seed).render() };
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            strategy: Strategy::parse(Strategy::NAMES[strat], Some(dir.path())).unwrap(),
            workers,
            dispatch: if shuffle { Dispatch::Shuffled(seed) } else { Dispatch::RowMajor },
        };
        let out = tiled(&dem, tw.min(w), th.min(h), &opts);
        let serial = serial_priority_flood(&dem);
        prop_assert!(out.bitwise_eq(&serial));
        prop_assert!(surface_check(&dem, &out).is_empty());
    }

    #[test]
    fn serial_matches_fixpoint(w in 1usize..24, h in 1usize..24, seed in any::<u64>(), dt in 0usize..4) {
        let dem = terraced(w, h, DType::ALL[dt], seed);
        prop_assert!(serial_priority_flood(&dem).bitwise_eq(&fixpoint_fill_oracle(&dem)));
    }

    #[test]
    fn tile_fill_invariants(w in 1usize..30, h in 1usize..30, seed in any::<u64>(), flags in 0u8..16) {
        let dem = terraced(w, h, DType::I32, seed);
        let edges = EdgeFlags { north: flags & 1 != 0, south: flags & 2 != 0, west: flags & 4 != 0, east: flags & 8 != 0 };
        let t = fill_tile(dem.clone(), edges);
        for i in 0..dem.len() {
            // Every cell belongs to some watershed and is never lowered.
            prop_assert!(t.labels.at(i) >= FIRST_LABEL && t.labels.at(i) <= t.max_label);
            prop_assert!(t.filled.level(i) >= dem.level(i));
        }
        // Filling a tile on its own is the serial fill of that tile.
        prop_assert!(t.filled.bitwise_eq(&serial_priority_flood(&dem)));
        // Graph edges are canonical pairs of known labels.
        for ((a, b), _) in t.graph.iter() {
            prop_assert!(a < b && b <= t.max_label);
        }
    }
}

#[test]
fn strategy_worker_grid_is_bitwise_identical() {
    let dem = SyntheticDem::new(120, 96, DType::F32, 42).render();
    let serial = serial_priority_flood(&dem);
    let dir = tempfile::tempdir().unwrap();
    for name in Strategy::NAMES {
        for p in [1, 2, 4, 8] {
            let s = Strategy::parse(name, Some(&dir.path().join(format!("{name}{p}")))).unwrap();
            let out = tiled(&dem, 40, 32, &RunOptions::new(s, p));
            assert!(out.bitwise_eq(&serial), "{name} x{p}");
        }
    }
}

#[test]
fn cache_files_are_inspectable() {
    let dir = tempfile::tempdir().unwrap();
    let dem = SyntheticDem::new(30, 30, DType::I16, 2).render();
    let src = MemorySource::uniform(dem, 15, 15).unwrap();
    run(
        &src,
        &MemorySink::new(),
        &RunOptions::new(Strategy::Cache(dir.path().to_path_buf()), 2),
    )
    .unwrap();
    for t in src.layout().tiles() {
        for ext in ["fill", "lbl"] {
            assert!(dir
                .path()
                .join(format!("{}_{}.{ext}", t.row, t.col))
                .exists());
        }
    }
}
