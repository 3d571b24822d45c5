//! One producer, P consumer threads, two phases.
//!
//! Phase 1: every tile is filled by some consumer, which returns its edge
//! vectors and spillover graph as an encoded [`TileSummary`]. The producer
//! stitches those into one graph and floods it. Phase 2: each tile receives
//! the final level of its labels and is raised and written out. How a
//! consumer gets its phase-1 intermediates back for phase 2 is the
//! [`Strategy`].
//!
//! Consumers and producer share nothing but channels. Every message is an
//! owned byte buffer in the wire encoding, so the sizes counted in
//! [`RunStats`] are the sizes that would cross a network.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fill::{fill_tile, FilledTile};
use crate::graph::SpilloverGraph;
use crate::io::{read_binary, read_labels, write_binary, write_labels, IoCounter};
use crate::merge::{flood_graph, handle_corner, handle_edge, uniquify_labels};
use crate::message::{LabelLevels, TileSummary};
use crate::raster::{extract_edges, Grid, LabelGrid, Level, TileGeom, TileLayout, FIRST_LABEL};
use crate::store::{TileSink, TileSource};

/// What a consumer does with a filled tile and its labels between phases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Drop them; phase 2 re-reads the tile and fills it again.
    Evict,
    /// Write them to `<dir>/<row>_<col>.fill` and `.lbl`.
    Cache(PathBuf),
    /// As `Cache`, gzip-compressed.
    CacheCompressed(PathBuf),
    /// Keep them in the consumer's memory.
    Retain,
}

impl Strategy {
    pub const NAMES: [&'static str; 4] = ["evict", "cache", "cachec", "retain"];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Evict => "evict",
            Strategy::Cache(_) => "cache",
            Strategy::CacheCompressed(_) => "cachec",
            Strategy::Retain => "retain",
        }
    }

    pub fn parse(name: &str, cache_dir: Option<&Path>) -> Result<Self> {
        let dir = || {
            cache_dir
                .map(Path::to_path_buf)
                .ok_or_else(|| Error::Invalid(format!("strategy {name} needs a cache directory")))
        };
        match name.to_ascii_lowercase().as_str() {
            "evict" => Ok(Strategy::Evict),
            "cache" => Ok(Strategy::Cache(dir()?)),
            "cachec" => Ok(Strategy::CacheCompressed(dir()?)),
            "retain" => Ok(Strategy::Retain),
            other => Err(Error::Invalid(format!(
                "unknown strategy {other:?}; expected one of {}",
                Strategy::NAMES.join(", ")
            ))),
        }
    }

    fn cache(&self) -> Option<(&Path, bool)> {
        match self {
            Strategy::Cache(d) => Some((d, false)),
            Strategy::CacheCompressed(d) => Some((d, true)),
            _ => None,
        }
    }

    /// Cell reads and writes per DEM cell this strategy performs.
    pub fn io_per_cell(&self) -> (u64, u64) {
        match self {
            Strategy::Retain => (1, 1),
            Strategy::Evict => (2, 1),
            Strategy::Cache(_) | Strategy::CacheCompressed(_) => (3, 3),
        }
    }
}

/// Order in which tiles are handed out within each phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Dispatch {
    #[default]
    RowMajor,
    /// A seeded permutation of the tiles.
    Shuffled(u64),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub strategy: Strategy,
    pub workers: usize,
    pub dispatch: Dispatch,
}

impl RunOptions {
    pub fn new(strategy: Strategy, workers: usize) -> Self {
        RunOptions {
            strategy,
            workers,
            dispatch: Dispatch::RowMajor,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Phase {
    Fill,
    /// Encoded [`LabelLevels`] for the tile.
    Finalize(Vec<u8>),
}

#[derive(Clone, Debug)]
pub struct TileJob {
    pub geom: TileGeom,
    pub locator: String,
    pub phase: Phase,
}

struct Reply {
    index: usize,
    worker: usize,
    phase: u8,
    outcome: std::result::Result<Vec<u8>, String>,
    reads: u64,
    writes: u64,
    ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TileStats {
    pub row: usize,
    pub col: usize,
    pub width: usize,
    pub height: usize,
    pub worker_phase1: usize,
    pub worker_phase2: usize,
    pub reads: u64,
    pub writes: u64,
    /// Producer → consumer payload (the phase-2 label levels).
    pub bytes_sent: u64,
    /// Consumer → producer payload (the tile summary).
    pub bytes_received: u64,
    pub graph_edges: usize,
    pub labels: u32,
    pub ms_phase1: f64,
    pub ms_phase2: f64,
}

impl TileStats {
    pub fn cells(&self) -> u64 {
        (self.width * self.height) as u64
    }

    pub fn bytes_tx(&self) -> u64 {
        self.bytes_sent + self.bytes_received
    }
}

#[derive(Clone, Debug)]
pub struct RunStats {
    pub strategy: Strategy,
    pub workers: usize,
    pub dtype_width: usize,
    pub tiles: Vec<TileStats>,
    pub ms_total: f64,
    pub ms_phase1: f64,
    pub ms_producer: f64,
    pub ms_phase2: f64,
    pub global_labels: usize,
    pub global_edges: usize,
}

impl RunStats {
    pub fn cells(&self) -> u64 {
        self.tiles.iter().map(TileStats::cells).sum()
    }

    pub fn reads(&self) -> u64 {
        self.tiles.iter().map(|t| t.reads).sum()
    }

    pub fn writes(&self) -> u64 {
        self.tiles.iter().map(|t| t.writes).sum()
    }

    pub fn bytes_tx(&self) -> u64 {
        self.tiles.iter().map(TileStats::bytes_tx).sum()
    }

    /// Structured text: a `run` record, then one `tile` record per tile.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "run strategy={} workers={} tiles={} cells={} reads={} writes={} bytes_tx={} \
             ms_total={:.3} ms_phase1={:.3} ms_producer={:.3} ms_phase2={:.3} labels={} graph_edges={}",
            self.strategy.name(),
            self.workers,
            self.tiles.len(),
            self.cells(),
            self.reads(),
            self.writes(),
            self.bytes_tx(),
            self.ms_total,
            self.ms_phase1,
            self.ms_producer,
            self.ms_phase2,
            self.global_labels,
            self.global_edges,
        );
        for t in &self.tiles {
            let _ = writeln!(
                s,
                "tile row={} col={} width={} height={} reads={} writes={} bytes_tx={} \
                 bytes_sent={} bytes_received={} ms_phase1={:.3} ms_phase2={:.3}",
                t.row,
                t.col,
                t.width,
                t.height,
                t.reads,
                t.writes,
                t.bytes_tx(),
                t.bytes_sent,
                t.bytes_received,
                t.ms_phase1,
                t.ms_phase2,
            );
        }
        s
    }
}

/// Per-tile communication ceiling: every perimeter cell may carry one
/// summary entry (level + label), one spillover-graph edge (two labels +
/// level) and one phase-2 label level, plus a little framing. For a square
/// tile of `n` cells the perimeter is `4√n`.
pub fn communication_bound(width: usize, height: usize, dtype_width: usize) -> u64 {
    let perimeter = 2 * (width + height) as u64;
    perimeter * (3 * dtype_width as u64 + 17)
}

pub const FRAMING_ALLOWANCE: u64 = 256;

/// Exact read/write audit against the strategy's per-cell costs. Returns one
/// line per discrepancy; empty means the run matched.
pub fn io_counters_check(stats: &RunStats) -> Vec<String> {
    let (r, w) = stats.strategy.io_per_cell();
    let mut findings = Vec::new();
    for t in &stats.tiles {
        let n = t.cells();
        if t.reads != r * n || t.writes != w * n {
            findings.push(format!(
                "tile ({},{}): {} cells, expected {}R/{}W, counted {}R/{}W",
                t.row,
                t.col,
                n,
                r * n,
                w * n,
                t.reads,
                t.writes
            ));
        }
    }
    let n = stats.cells();
    if stats.reads() != r * n || stats.writes() != w * n {
        findings.push(format!(
            "run: {n} cells, expected {}R/{}W, counted {}R/{}W",
            r * n,
            w * n,
            stats.reads(),
            stats.writes()
        ));
    }
    findings
}

/// Tiles whose payload exceeds [`communication_bound`] plus the framing
/// allowance.
pub fn communication_check(stats: &RunStats) -> Vec<String> {
    stats
        .tiles
        .iter()
        .filter_map(|t| {
            let bound =
                communication_bound(t.width, t.height, stats.dtype_width) + FRAMING_ALLOWANCE;
            (t.bytes_tx() > bound).then(|| {
                format!(
                    "tile ({},{}) {}x{}: {} bytes > bound {} ({} labels, {} graph edges)",
                    t.row,
                    t.col,
                    t.width,
                    t.height,
                    t.bytes_tx(),
                    bound,
                    t.labels,
                    t.graph_edges
                )
            })
        })
        .collect()
}

fn cache_paths(dir: &Path, geom: &TileGeom) -> (PathBuf, PathBuf) {
    let stem = format!("{}_{}", geom.row, geom.col);
    (
        dir.join(format!("{stem}.fill")),
        dir.join(format!("{stem}.lbl")),
    )
}

struct Consumer<'a> {
    source: &'a dyn TileSource,
    sink: &'a dyn TileSink,
    strategy: &'a Strategy,
    retained: HashMap<(usize, usize), (Grid, LabelGrid)>,
}

impl Consumer<'_> {
    fn fill(&self, geom: &TileGeom, io: &IoCounter) -> Result<FilledTile> {
        let dem = self.source.read_tile(geom, io)?;
        if dem.dims() != (geom.width, geom.height) {
            return Err(Error::DimensionMismatch {
                expected: (geom.width, geom.height),
                actual: dem.dims(),
            });
        }
        Ok(fill_tile(dem, geom.edges))
    }

    fn phase1(&mut self, geom: &TileGeom, io: &IoCounter) -> Result<Vec<u8>> {
        let t = self.fill(geom, io)?;
        let summary = TileSummary {
            row: geom.row,
            col: geom.col,
            dtype: t.filled.dtype(),
            nodata: t.filled.nodata(),
            max_label: t.max_label,
            edges: extract_edges(&t.filled, &t.labels)?,
            graph: t.graph,
        };
        let bytes = summary.encode();
        match self.strategy {
            Strategy::Evict => {}
            Strategy::Cache(_) | Strategy::CacheCompressed(_) => {
                let (dir, compress) = self.strategy.cache().unwrap();
                let (fp, lp) = cache_paths(dir, geom);
                write_binary(&t.filled, &fp, compress, io)?;
                write_labels(&t.labels, &lp, compress, io)?;
            }
            Strategy::Retain => {
                self.retained
                    .insert((geom.row, geom.col), (t.filled, t.labels));
            }
        }
        Ok(bytes)
    }

    fn phase2(&mut self, geom: &TileGeom, payload: &[u8], io: &IoCounter) -> Result<Vec<u8>> {
        let msg = LabelLevels::decode(payload)?;
        let (mut filled, labels) = match self.strategy {
            Strategy::Evict => {
                let t = self.fill(geom, io)?;
                (t.filled, t.labels)
            }
            Strategy::Cache(_) | Strategy::CacheCompressed(_) => {
                let (dir, _) = self.strategy.cache().unwrap();
                let (fp, lp) = cache_paths(dir, geom);
                (read_binary(&fp, io)?, read_labels(&lp, io)?)
            }
            Strategy::Retain => self.retained.remove(&(geom.row, geom.col)).ok_or_else(|| {
                Error::Invalid(format!(
                    "tile ({},{}) was not retained by this consumer",
                    geom.row, geom.col
                ))
            })?,
        };
        raise_to_labels(&mut filled, &labels, &msg.levels)?;
        self.sink.write_tile(geom, &filled, io)?;
        Ok(Vec::new())
    }

    fn handle(&mut self, job: &TileJob, io: &IoCounter) -> Result<Vec<u8>> {
        match &job.phase {
            Phase::Fill => self.phase1(&job.geom, io),
            Phase::Finalize(p) => self.phase2(&job.geom, p, io),
        }
    }
}

/// Raise every data cell to the final level of its watershed. `levels[i]`
/// belongs to local label `i + 2`.
pub fn raise_to_labels(filled: &mut Grid, labels: &LabelGrid, levels: &[Level]) -> Result<()> {
    if labels.dims() != filled.dims() {
        return Err(Error::DimensionMismatch {
            expected: filled.dims(),
            actual: labels.dims(),
        });
    }
    for i in 0..filled.len() {
        if filled.is_nodata(i) {
            continue;
        }
        let l = labels.at(i);
        if l < FIRST_LABEL {
            return Err(Error::Invalid(format!(
                "data cell {i} has no watershed label"
            )));
        }
        let z = *levels
            .get((l - FIRST_LABEL) as usize)
            .ok_or_else(|| Error::Codec(format!("no level sent for label {l}")))?;
        if let Level::Data(v) = z {
            if z > filled.level(i) {
                filled.put(i, v);
            }
        }
    }
    Ok(())
}

fn worker_loop(
    id: usize,
    mut consumer: Consumer<'_>,
    jobs: Receiver<(usize, TileJob)>,
    replies: Sender<Reply>,
) {
    while let Ok((index, job)) = jobs.recv() {
        let io = IoCounter::new();
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| consumer.handle(&job, &io)));
        let outcome = match outcome {
            Ok(Ok(bytes)) => Ok(bytes),
            Ok(Err(e)) => Err(e.to_string()),
            Err(panic) => Err(panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "consumer panicked".into())),
        };
        let reply = Reply {
            index,
            worker: id,
            phase: if matches!(job.phase, Phase::Fill) {
                1
            } else {
                2
            },
            outcome,
            reads: io.reads(),
            writes: io.writes(),
            ms: start.elapsed().as_secs_f64() * 1e3,
        };
        if replies.send(reply).is_err() {
            break;
        }
    }
}

/// Join every adjoining pair of tiles in the (already uniquified) summaries.
fn stitch(
    layout: &TileLayout,
    summaries: &[TileSummary],
    graph: &mut SpilloverGraph,
) -> Result<()> {
    let (gw, gh) = (layout.grid_width(), layout.grid_height());
    let at = |r: usize, c: usize| &summaries[layout.tile_index(r, c)].edges;
    for r in 0..gh {
        for c in 0..gw {
            if c + 1 < gw {
                handle_edge(&at(r, c).east, &at(r, c + 1).west, graph)?;
            }
            if r + 1 < gh {
                handle_edge(&at(r, c).south, &at(r + 1, c).north, graph)?;
                if c + 1 < gw {
                    handle_corner(at(r, c).south.last(), at(r + 1, c + 1).north.first(), graph);
                    handle_corner(at(r, c + 1).south.first(), at(r + 1, c).north.last(), graph);
                }
            }
        }
    }
    Ok(())
}

/// Fill the DEM behind `source`, writing finished tiles to `sink`.
pub fn run(source: &dyn TileSource, sink: &dyn TileSink, opts: &RunOptions) -> Result<RunStats> {
    if opts.workers == 0 {
        return Err(Error::Invalid("at least one worker is required".into()));
    }
    if let Some((dir, _)) = opts.strategy.cache() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let layout = source.layout();
    let geoms: Vec<TileGeom> = layout.tiles().collect();
    let mut order: Vec<usize> = (0..geoms.len()).collect();
    if let Dispatch::Shuffled(seed) = opts.dispatch {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut stats: Vec<TileStats> = geoms
        .iter()
        .map(|g| TileStats {
            row: g.row,
            col: g.col,
            width: g.width,
            height: g.height,
            ..TileStats::default()
        })
        .collect();
    let started = Instant::now();

    let outcome = thread::scope(|scope| -> Result<(f64, f64, f64, usize, usize, usize)> {
        let (reply_tx, reply_rx) = channel::<Reply>();
        let mut job_txs = Vec::with_capacity(opts.workers);
        for id in 0..opts.workers {
            let (tx, rx) = channel();
            job_txs.push(tx);
            let consumer = Consumer {
                source,
                sink,
                strategy: &opts.strategy,
                retained: HashMap::new(),
            };
            let replies = reply_tx.clone();
            thread::Builder::new()
                .name(format!("tileflood-worker-{id}"))
                .spawn_scoped(scope, move || worker_loop(id, consumer, rx, replies))
                .map_err(|e| Error::Invalid(format!("cannot spawn worker: {e}")))?;
        }
        drop(reply_tx);

        let collect = |stats: &mut Vec<TileStats>, count: usize| -> Result<Vec<(usize, Vec<u8>)>> {
            let mut got = Vec::with_capacity(count);
            for _ in 0..count {
                let r = reply_rx
                    .recv()
                    .map_err(|_| Error::Invalid("all consumers exited early".into()))?;
                let t = &mut stats[r.index];
                t.reads += r.reads;
                t.writes += r.writes;
                if r.phase == 1 {
                    t.ms_phase1 = r.ms;
                    t.worker_phase1 = r.worker;
                } else {
                    t.ms_phase2 = r.ms;
                    t.worker_phase2 = r.worker;
                }
                let bytes = r.outcome.map_err(|message| Error::Worker {
                    row: t.row,
                    col: t.col,
                    message,
                })?;
                got.push((r.index, bytes));
            }
            Ok(got)
        };

        // Phase 1, round-robin.
        let mut owner = vec![0usize; geoms.len()];
        for (k, &i) in order.iter().enumerate() {
            let w = k % opts.workers;
            owner[i] = w;
            let job = TileJob {
                geom: geoms[i],
                locator: source.locator(&geoms[i]),
                phase: Phase::Fill,
            };
            job_txs[w]
                .send((i, job))
                .map_err(|_| Error::Invalid(format!("consumer {w} is gone")))?;
        }
        let mut summaries: Vec<Option<TileSummary>> = vec![None; geoms.len()];
        for (i, bytes) in collect(&mut stats, geoms.len())? {
            stats[i].bytes_received = bytes.len() as u64;
            let s = TileSummary::decode(&bytes)?;
            if (s.row, s.col, s.width(), s.height())
                != (geoms[i].row, geoms[i].col, geoms[i].width, geoms[i].height)
            {
                return Err(Error::Codec(format!(
                    "summary for tile ({},{}) describes another tile",
                    geoms[i].row, geoms[i].col
                )));
            }
            stats[i].graph_edges = s.graph.len();
            stats[i].labels = s.max_label.saturating_sub(FIRST_LABEL - 1);
            summaries[i] = Some(s);
        }
        let ms_phase1 = started.elapsed().as_secs_f64() * 1e3;

        // Producer: global solution from summaries alone.
        let producer_start = Instant::now();
        let mut summaries: Vec<TileSummary> = summaries.into_iter().map(Option::unwrap).collect();
        let offsets = uniquify_labels(&mut summaries)?;
        let mut graph = SpilloverGraph::new();
        for s in &summaries {
            graph.absorb(&s.graph);
        }
        stitch(layout, &summaries, &mut graph)?;
        let elevations = flood_graph(&graph)?;
        let mut payloads = Vec::with_capacity(summaries.len());
        for (s, &offset) in summaries.iter().zip(&offsets) {
            let msg = LabelLevels {
                row: s.row,
                col: s.col,
                dtype: s.dtype,
                nodata: s.nodata,
                levels: elevations.tile_slice(offset, s.max_label)?,
            };
            payloads.push(msg.encode());
        }
        let dtype_width = summaries.first().map_or(0, |s| s.dtype.byte_width());
        let ms_producer = producer_start.elapsed().as_secs_f64() * 1e3;

        // Phase 2, same consumer per tile so RETAIN finds its intermediates.
        let phase2_start = Instant::now();
        let mut payloads: Vec<Option<Vec<u8>>> = payloads.into_iter().map(Some).collect();
        for &i in &order {
            let payload = payloads[i].take().unwrap();
            stats[i].bytes_sent = payload.len() as u64;
            let job = TileJob {
                geom: geoms[i],
                locator: source.locator(&geoms[i]),
                phase: Phase::Finalize(payload),
            };
            job_txs[owner[i]]
                .send((i, job))
                .map_err(|_| Error::Invalid(format!("consumer {} is gone", owner[i])))?;
        }
        collect(&mut stats, geoms.len())?;
        drop(job_txs);
        let ms_phase2 = phase2_start.elapsed().as_secs_f64() * 1e3;
        Ok((
            ms_phase1,
            ms_producer,
            ms_phase2,
            elevations.len(),
            graph.len(),
            dtype_width,
        ))
    });

    let (ms_phase1, ms_producer, ms_phase2, global_labels, global_edges, dtype_width) = outcome?;
    sink.finish(layout)?;
    Ok(RunStats {
        strategy: opts.strategy.clone(),
        workers: opts.workers,
        dtype_width,
        tiles: stats,
        ms_total: started.elapsed().as_secs_f64() * 1e3,
        ms_phase1,
        ms_producer,
        ms_phase2,
        global_labels,
        global_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fill::serial_priority_flood;
    use crate::raster::DType;
    use crate::store::{MemorySink, MemorySource};
    use crate::synth::SyntheticDem;

    fn fill_tiled(dem: &Grid, tw: usize, th: usize, opts: &RunOptions) -> (Grid, RunStats) {
        let src = MemorySource::uniform(dem.clone(), tw, th).unwrap();
        let sink = MemorySink::new();
        let stats = run(&src, &sink, opts).unwrap();
        (sink.mosaic(src.layout()).unwrap(), stats)
    }

    #[test]
    fn single_tile_matches_serial() {
        let dem = SyntheticDem::new(37, 29, DType::F32, 4).render();
        let (out, stats) = fill_tiled(&dem, 37, 29, &RunOptions::new(Strategy::Retain, 1));
        assert!(out.bitwise_eq(&serial_priority_flood(&dem)));
        assert_eq!(stats.tiles.len(), 1);
    }

    #[test]
    fn three_by_three_central_tile_rises_to_global_spill() {
        // A 9x9 basin walled at 7 with an outlet at 3 on the west edge. Every
        // tile is 3x3; the centre tile alone cannot see the outlet.
        let mut v = vec![7.0; 81];
        for r in 1..8 {
            for c in 1..8 {
                v[r * 9 + c] = 1.0;
            }
        }
        v[4 * 9] = 3.0;
        let dem = Grid::new(9, 9, DType::I16, -32768.0, v).unwrap();
        let (out, _) = fill_tiled(&dem, 3, 3, &RunOptions::new(Strategy::Evict, 2));
        for r in 3..6 {
            for c in 3..6 {
                assert_eq!(out.get(r, c), 3.0);
            }
        }
        assert!(out.bitwise_eq(&serial_priority_flood(&dem)));
    }

    #[test]
    fn io_counts_per_strategy() {
        let dir = tempfile::tempdir().unwrap();
        let dem = SyntheticDem::new(50, 40, DType::I16, 8).render();
        for s in [
            Strategy::Evict,
            Strategy::Retain,
            Strategy::Cache(dir.path().join("c")),
            Strategy::CacheCompressed(dir.path().join("cc")),
        ] {
            let (_, stats) = fill_tiled(&dem, 16, 12, &RunOptions::new(s.clone(), 3));
            assert!(
                io_counters_check(&stats).is_empty(),
                "{}: {:?}",
                s.name(),
                io_counters_check(&stats)
            );
            let (r, w) = s.io_per_cell();
            assert_eq!((stats.reads(), stats.writes()), (r * 2000, w * 2000));
        }
    }

    #[test]
    fn retain_phase_two_stays_on_phase_one_worker() {
        let dem = SyntheticDem::new(40, 40, DType::F64, 1).render();
        let opts = RunOptions {
            strategy: Strategy::Retain,
            workers: 3,
            dispatch: Dispatch::Shuffled(5),
        };
        let (out, stats) = fill_tiled(&dem, 10, 10, &opts);
        assert!(stats
            .tiles
            .iter()
            .all(|t| t.worker_phase1 == t.worker_phase2));
        assert!(out.bitwise_eq(&serial_priority_flood(&dem)));
    }

    #[test]
    fn shuffled_dispatch_gives_identical_output() {
        let dem = SyntheticDem::new(45, 33, DType::I32, 12).render();
        let (a, _) = fill_tiled(&dem, 8, 7, &RunOptions::new(Strategy::Evict, 2));
        let opts = RunOptions {
            strategy: Strategy::Evict,
            workers: 4,
            dispatch: Dispatch::Shuffled(99),
        };
        let (b, _) = fill_tiled(&dem, 8, 7, &opts);
        assert!(a.bitwise_eq(&b));
    }

    #[test]
    fn report_has_one_record_per_tile() {
        let dem = SyntheticDem::new(20, 20, DType::I16, 2).render();
        let (_, stats) = fill_tiled(&dem, 10, 10, &RunOptions::new(Strategy::Retain, 1));
        let report = stats.report();
        assert_eq!(report.lines().filter(|l| l.starts_with("tile ")).count(), 4);
        assert!(report
            .starts_with("run strategy=retain workers=1 tiles=4 cells=400 reads=400 writes=400"));
    }

    struct Broken(TileLayout);

    impl TileSource for Broken {
        fn layout(&self) -> &TileLayout {
            &self.0
        }
        fn locator(&self, _: &TileGeom) -> String {
            "broken".into()
        }
        fn read_tile(&self, tile: &TileGeom, _: &IoCounter) -> Result<Grid> {
            if tile.row == 1 {
                panic!("disk on fire");
            }
            Grid::filled(tile.width, tile.height, DType::I16, -1.0, 5.0)
        }
    }

    #[test]
    fn worker_failure_aborts_with_diagnostic() {
        let src = Broken(TileLayout::uniform(6, 6, 3, 3).unwrap());
        let err = run(
            &src,
            &MemorySink::new(),
            &RunOptions::new(Strategy::Evict, 2),
        )
        .unwrap_err();
        match err {
            Error::Worker {
                row: 1, message, ..
            } => assert!(message.contains("disk on fire")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unwritable_cache_dir_fails() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("file");
        fs::write(&file, b"x").unwrap();
        let dem = SyntheticDem::new(10, 10, DType::I16, 2).render();
        let src = MemorySource::uniform(dem, 5, 5).unwrap();
        let s = Strategy::Cache(file.join("sub"));
        assert!(run(&src, &MemorySink::new(), &RunOptions::new(s, 1)).is_err());
        assert!(run(
            &src,
            &MemorySink::new(),
            &RunOptions::new(Strategy::Retain, 0)
        )
        .is_err());
    }

    #[test]
    fn strategy_names_parse() {
        let d = Path::new("/tmp/x");
        for n in Strategy::NAMES {
            assert_eq!(Strategy::parse(n, Some(d)).unwrap().name(), n);
        }
        assert!(Strategy::parse("cache", None).is_err());
        assert!(Strategy::parse("lru", Some(d)).is_err());
    }

    #[test]
    fn evict_recomputation_labels_identically() {
        let dem = SyntheticDem::new(31, 27, DType::F32, 21).render();
        let a = fill_tile(dem.clone(), Default::default());
        let b = fill_tile(dem, Default::default());
        assert_eq!(a.labels, b.labels);
        assert!(a.filled.bitwise_eq(&b.filled));
        assert_eq!(a.graph, b.graph);
    }
}
