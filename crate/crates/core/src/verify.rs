//! Correctness harness: surface checks on a filled DEM and a sweep of tile
//! layouts and strategies compared against the serial fill.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fill::serial_priority_flood;
use crate::oracle::fixpoint_fill_oracle;
use crate::orchestrator::{run, RunOptions, Strategy};
use crate::raster::{neighbors, Grid};
use crate::store::{MemorySink, MemorySource};

/// Largest grid the fixpoint oracle is asked to cross-check.
pub const FIXPOINT_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mismatch {
    pub row: usize,
    pub col: usize,
    pub expected: f64,
    pub actual: f64,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cell (row {}, col {}): expected {}, got {}",
            self.row, self.col, self.expected, self.actual
        )
    }
}

/// First cell (row-major) whose bits differ, plus the number of differing
/// cells. Grids of different shape or type report a mismatch at (0,0).
pub fn compare(expected: &Grid, actual: &Grid) -> Option<(Mismatch, usize)> {
    if expected.dims() != actual.dims()
        || expected.dtype() != actual.dtype()
        || expected.nodata().to_bits() != actual.nodata().to_bits()
    {
        return Some((
            Mismatch {
                row: 0,
                col: 0,
                expected: f64::NAN,
                actual: f64::NAN,
            },
            expected.len().max(actual.len()),
        ));
    }
    let w = expected.width();
    let mut first = None;
    let mut count = 0;
    for (i, (a, b)) in expected.data().iter().zip(actual.data()).enumerate() {
        if a.to_bits() != b.to_bits() {
            count += 1;
            first.get_or_insert(Mismatch {
                row: i / w,
                col: i % w,
                expected: *a,
                actual: *b,
            });
        }
    }
    first.map(|m| (m, count))
}

/// Surface checks that need no reference answer:
/// no cell lowered, NoData left alone, and every data cell drains to the DEM
/// border or a NoData cell along a path that never rises.
pub fn surface_check(dem: &Grid, filled: &Grid) -> Vec<String> {
    let mut findings = Vec::new();
    if dem.dims() != filled.dims() {
        findings.push(format!("shape {:?} != {:?}", filled.dims(), dem.dims()));
        return findings;
    }
    let (w, h) = dem.dims();
    for i in 0..dem.len() {
        if dem.is_nodata(i) != filled.is_nodata(i) {
            findings.push(format!("cell ({},{}): NoData status changed", i / w, i % w));
        } else if filled.level(i) < dem.level(i) {
            findings.push(format!(
                "cell ({},{}): lowered from {} to {}",
                i / w,
                i % w,
                dem.value(i),
                filled.value(i)
            ));
        }
    }

    // Walk uphill from the outlets; a cell is reached iff it has a
    // non-ascending path down to one.
    let mut reached = vec![false; dem.len()];
    let mut queue = VecDeque::new();
    for (i, seen) in reached.iter_mut().enumerate() {
        if filled.is_border(i) || filled.is_nodata(i) {
            *seen = true;
            queue.push_back(i);
        }
    }
    while let Some(c) = queue.pop_front() {
        for (r, q) in neighbors(c / w, c % w, w, h) {
            let n = r * w + q;
            if !reached[n] && filled.level(n) >= filled.level(c) {
                reached[n] = true;
                queue.push_back(n);
            }
        }
    }
    let stuck: Vec<usize> = (0..dem.len()).filter(|&i| !reached[i]).collect();
    if let Some(&i) = stuck.first() {
        findings.push(format!(
            "{} cells cannot drain; first at ({},{})",
            stuck.len(),
            i / w,
            i % w
        ));
    }
    findings
}

/// Tile sizes exercised for a `width`×`height` DEM: the whole DEM as one
/// tile, single-cell tiles, square, ragged and small rectangular tiles, one
/// row of tiles, one column of tiles, one-cell-thick strips both ways, and a
/// seeded random size. Duplicates are removed.
pub fn sweep_dims(width: usize, height: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7117_f100d);
    let square = (width.min(height) / 4).max(1);
    let mut dims = vec![
        (width, height),
        (1, 1),
        (square, square),
        (7, 5),
        (2, 3),
        (width.div_ceil(3), height),
        (width, height.div_ceil(3)),
        (width, 1),
        (1, height),
        (rng.gen_range(1..=width), rng.gen_range(1..=height)),
    ];
    let mut seen = std::collections::HashSet::new();
    dims.retain(|&(tw, th)| seen.insert((tw.min(width), th.min(height))));
    dims
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub tile_width: usize,
    pub tile_height: usize,
    pub strategy: &'static str,
    pub workers: usize,
    pub mismatch: Option<(Mismatch, usize)>,
    pub surface: Vec<String>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none() && self.surface.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub width: usize,
    pub height: usize,
    /// `Some(ok)` when the fixpoint oracle was small enough to run.
    pub oracle_agrees: Option<bool>,
    pub serial_surface: Vec<String>,
    pub cases: Vec<CaseResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.oracle_agrees != Some(false)
            && self.serial_surface.is_empty()
            && self.cases.iter().all(CaseResult::passed)
    }

    pub fn render(&self) -> String {
        let mut s = format!("verify width={} height={} ", self.width, self.height);
        s += &match self.oracle_agrees {
            Some(true) => "fixpoint=agree".to_string(),
            Some(false) => "fixpoint=DISAGREE".to_string(),
            None => "fixpoint=skipped".to_string(),
        };
        s.push('\n');
        for f in &self.serial_surface {
            s += &format!("serial-surface {f}\n");
        }
        for c in &self.cases {
            s += &format!(
                "case tile={}x{} strategy={} workers={} result={}",
                c.tile_width,
                c.tile_height,
                c.strategy,
                c.workers,
                if c.passed() { "pass" } else { "FAIL" }
            );
            if let Some((m, n)) = &c.mismatch {
                s += &format!(
                    " mismatches={n} first=({},{}) expected={} actual={}",
                    m.row, m.col, m.expected, m.actual
                );
            }
            for f in &c.surface {
                s += &format!(" surface=\"{f}\"");
            }
            s.push('\n');
        }
        s += if self.passed() {
            "verify result=pass\n"
        } else {
            "verify result=FAIL\n"
        };
        s
    }
}

/// Run every tile size in `dims` under every strategy and compare each
/// mosaic against the serial fill.
pub fn verify_sweep(
    dem: &Grid,
    dims: &[(usize, usize)],
    workers: usize,
    cache_root: &Path,
) -> Result<VerifyReport> {
    let reference = serial_priority_flood(dem);
    let oracle_agrees =
        (dem.len() <= FIXPOINT_LIMIT).then(|| fixpoint_fill_oracle(dem).bitwise_eq(&reference));
    let serial_surface = surface_check(dem, &reference);
    let mut cases = Vec::new();
    for &(tw, th) in dims {
        for name in Strategy::NAMES {
            let strategy =
                Strategy::parse(name, Some(&cache_root.join(format!("{tw}x{th}-{name}"))))?;
            let out = fill_tiled(dem, tw, th, &RunOptions::new(strategy, workers))?;
            cases.push(CaseResult {
                tile_width: tw,
                tile_height: th,
                strategy: name,
                workers,
                mismatch: compare(&reference, &out),
                surface: surface_check(dem, &out),
            });
        }
    }
    Ok(VerifyReport {
        width: dem.width(),
        height: dem.height(),
        oracle_agrees,
        serial_surface,
        cases,
    })
}

/// Tiled fill of an in-memory DEM, reassembled.
pub fn fill_tiled(dem: &Grid, tile_w: usize, tile_h: usize, opts: &RunOptions) -> Result<Grid> {
    let src = MemorySource::uniform(
        dem.clone(),
        tile_w.min(dem.width()),
        tile_h.min(dem.height()),
    )?;
    let sink = MemorySink::new();
    run(&src, &sink, opts)?;
    sink.mosaic(crate::store::TileSource::layout(&src))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::DType;
    use crate::synth::SyntheticDem;

    #[test]
    fn corrupted_output_is_reported_at_first_cell() {
        let dem = SyntheticDem::new(30, 20, DType::I16, 3).render();
        let good = serial_priority_flood(&dem);
        let mut bad = good.clone();
        bad.set(4, 7, good.get(4, 7) + 1.0).unwrap();
        bad.set(9, 2, good.get(9, 2) + 1.0).unwrap();
        let (m, n) = compare(&good, &bad).unwrap();
        assert_eq!((m.row, m.col, n), (4, 7, 2));
        assert!(compare(&good, &good).is_none());
    }

    #[test]
    fn surface_check_catches_lowered_and_trapped_cells() {
        let dem = Grid::new(
            3,
            3,
            DType::I16,
            -1.0,
            vec![5., 5., 5., 5., 2., 5., 5., 5., 5.],
        )
        .unwrap();
        assert_eq!(surface_check(&dem, &dem).len(), 1);
        let filled = serial_priority_flood(&dem);
        assert!(surface_check(&dem, &filled).is_empty());
        let mut low = filled.clone();
        low.set(0, 0, 4.0).unwrap();
        assert!(surface_check(&dem, &low)[0].contains("lowered"));
    }

    #[test]
    fn sweep_dims_cover_required_shapes() {
        let d = sweep_dims(200, 200, 1);
        assert!(d.len() >= 8);
        for want in [(200, 200), (1, 1), (7, 5), (67, 200), (200, 67)] {
            assert!(d.contains(&want), "{want:?}");
        }
        assert!(sweep_dims(10, 10, 0).len() >= 8);
    }

    #[test]
    fn already_filled_dem_passes() {
        let dir = tempfile::tempdir().unwrap();
        let dem = serial_priority_flood(&SyntheticDem::new(24, 18, DType::F32, 5).render());
        let r = verify_sweep(&dem, &sweep_dims(24, 18, 5), 2, dir.path()).unwrap();
        assert!(r.passed(), "{}", r.render());
        assert_eq!(r.oracle_agrees, Some(true));
    }
}
