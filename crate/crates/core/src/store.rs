//! Where tiles come from and where finished tiles go.
//!
//! Every read and write is tallied on the caller's [`IoCounter`], one count
//! per cell, so strategies can be audited.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::io::{
    read_binary_header, read_binary_window, read_raster, tile_file_name, write_binary,
    BinaryHeader, IoCounter, Manifest, MANIFEST_NAME,
};
use crate::raster::{Grid, TileGeom, TileLayout};
use crate::synth::SyntheticDem;

pub trait TileSource: Sync {
    fn layout(&self) -> &TileLayout;
    /// Human-readable location of a tile, for job descriptions and errors.
    fn locator(&self, tile: &TileGeom) -> String;
    fn read_tile(&self, tile: &TileGeom, io: &IoCounter) -> Result<Grid>;
}

pub trait TileSink: Sync {
    fn write_tile(&self, tile: &TileGeom, grid: &Grid, io: &IoCounter) -> Result<()>;
    /// Called once after every tile has been written.
    fn finish(&self, _layout: &TileLayout) -> Result<()> {
        Ok(())
    }
}

fn check_dims(tile: &TileGeom, grid: &Grid) -> Result<()> {
    if grid.dims() != (tile.width, tile.height) {
        return Err(Error::DimensionMismatch {
            expected: (tile.width, tile.height),
            actual: grid.dims(),
        });
    }
    Ok(())
}

/// Tiles cut from a DEM already in memory.
pub struct MemorySource {
    dem: Grid,
    layout: TileLayout,
}

impl MemorySource {
    pub fn new(dem: Grid, layout: TileLayout) -> Result<Self> {
        if dem.dims() != (layout.width(), layout.height()) {
            return Err(Error::DimensionMismatch {
                expected: (layout.width(), layout.height()),
                actual: dem.dims(),
            });
        }
        Ok(MemorySource { dem, layout })
    }

    pub fn uniform(dem: Grid, tile_w: usize, tile_h: usize) -> Result<Self> {
        let layout = TileLayout::uniform(dem.width(), dem.height(), tile_w, tile_h)?;
        Self::new(dem, layout)
    }

    pub fn dem(&self) -> &Grid {
        &self.dem
    }
}

impl TileSource for MemorySource {
    fn layout(&self) -> &TileLayout {
        &self.layout
    }

    fn locator(&self, tile: &TileGeom) -> String {
        format!(
            "memory[{}..{}, {}..{}]",
            tile.y0,
            tile.y0 + tile.height,
            tile.x0,
            tile.x0 + tile.width
        )
    }

    fn read_tile(&self, tile: &TileGeom, io: &IoCounter) -> Result<Grid> {
        let g = self.dem.window(tile.y0, tile.x0, tile.width, tile.height)?;
        io.add_reads(g.len());
        Ok(g)
    }
}

/// Pre-tiled rasters listed in a manifest.
pub struct ManifestSource {
    manifest: Manifest,
}

impl ManifestSource {
    pub fn new(manifest: Manifest) -> Self {
        ManifestSource { manifest }
    }

    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self::new(Manifest::read(path)?))
    }
}

impl TileSource for ManifestSource {
    fn layout(&self) -> &TileLayout {
        &self.manifest.layout
    }

    fn locator(&self, tile: &TileGeom) -> String {
        self.manifest.path(tile.row, tile.col).display().to_string()
    }

    fn read_tile(&self, tile: &TileGeom, io: &IoCounter) -> Result<Grid> {
        let g = read_raster(self.manifest.path(tile.row, tile.col), None, io)?;
        check_dims(tile, &g)?;
        Ok(g)
    }
}

/// Windows read straight out of one large binary raster.
pub struct MonolithicSource {
    path: PathBuf,
    header: BinaryHeader,
    layout: TileLayout,
}

impl MonolithicSource {
    pub fn open(path: &Path, tile_w: usize, tile_h: usize) -> Result<Self> {
        let header = read_binary_header(path)?;
        let layout = TileLayout::uniform(header.width, header.height, tile_w, tile_h)?;
        Ok(MonolithicSource {
            path: path.to_path_buf(),
            header,
            layout,
        })
    }

    pub fn header(&self) -> BinaryHeader {
        self.header
    }
}

impl TileSource for MonolithicSource {
    fn layout(&self) -> &TileLayout {
        &self.layout
    }

    fn locator(&self, tile: &TileGeom) -> String {
        format!(
            "{}@({},{})+{}x{}",
            self.path.display(),
            tile.y0,
            tile.x0,
            tile.width,
            tile.height
        )
    }

    fn read_tile(&self, tile: &TileGeom, io: &IoCounter) -> Result<Grid> {
        read_binary_window(&self.path, tile.y0, tile.x0, tile.width, tile.height, io)
    }
}

/// Tiles rendered on demand from the synthetic terrain generator.
pub struct SyntheticSource {
    dem: SyntheticDem,
    layout: TileLayout,
}

impl SyntheticSource {
    pub fn new(dem: SyntheticDem, tile_w: usize, tile_h: usize) -> Result<Self> {
        let layout = TileLayout::uniform(dem.width(), dem.height(), tile_w, tile_h)?;
        Ok(SyntheticSource { dem, layout })
    }
}

impl TileSource for SyntheticSource {
    fn layout(&self) -> &TileLayout {
        &self.layout
    }

    fn locator(&self, tile: &TileGeom) -> String {
        format!("synthetic({},{})", tile.row, tile.col)
    }

    fn read_tile(&self, tile: &TileGeom, io: &IoCounter) -> Result<Grid> {
        let g = self.dem.window(tile.y0, tile.x0, tile.width, tile.height);
        io.add_reads(g.len());
        Ok(g)
    }
}

/// Collects finished tiles in memory.
#[derive(Default)]
pub struct MemorySink {
    tiles: Mutex<BTreeMap<(usize, usize), Grid>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reassemble the collected tiles into one raster.
    pub fn mosaic(&self, layout: &TileLayout) -> Result<Grid> {
        let tiles = self.tiles.lock().unwrap();
        let mut out: Option<Grid> = None;
        for t in layout.tiles() {
            let Some(g) = tiles.get(&(t.row, t.col)) else {
                return Err(Error::Invalid(format!(
                    "tile ({},{}) was never written",
                    t.row, t.col
                )));
            };
            let o = match &mut out {
                Some(o) => o,
                None => out.insert(Grid::filled(
                    layout.width(),
                    layout.height(),
                    g.dtype(),
                    g.nodata(),
                    g.nodata(),
                )?),
            };
            o.paste(g, t.y0, t.x0)?;
        }
        out.ok_or_else(|| Error::InvalidLayout("no tiles".into()))
    }

    pub fn tile(&self, row: usize, col: usize) -> Option<Grid> {
        self.tiles.lock().unwrap().get(&(row, col)).cloned()
    }
}

impl TileSink for MemorySink {
    fn write_tile(&self, tile: &TileGeom, grid: &Grid, io: &IoCounter) -> Result<()> {
        check_dims(tile, grid)?;
        self.tiles
            .lock()
            .unwrap()
            .insert((tile.row, tile.col), grid.clone());
        io.add_writes(grid.len());
        Ok(())
    }
}

/// Writes `<dir>/<row>_<col>.rdtl` per tile and a `tiles.txt` manifest.
pub struct DirectorySink {
    dir: PathBuf,
}

impl DirectorySink {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(DirectorySink {
            dir: dir.to_path_buf(),
        })
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_NAME)
    }
}

impl TileSink for DirectorySink {
    fn write_tile(&self, tile: &TileGeom, grid: &Grid, io: &IoCounter) -> Result<()> {
        check_dims(tile, grid)?;
        write_binary(
            grid,
            &self.dir.join(tile_file_name(tile.row, tile.col)),
            false,
            io,
        )
    }

    fn finish(&self, layout: &TileLayout) -> Result<()> {
        let paths = layout
            .tiles()
            .map(|t| self.dir.join(tile_file_name(t.row, t.col)))
            .collect();
        Manifest {
            layout: layout.clone(),
            paths,
        }
        .write(&self.manifest_path())
    }
}

/// Counts writes and keeps nothing.
#[derive(Default)]
pub struct NullSink;

impl TileSink for NullSink {
    fn write_tile(&self, tile: &TileGeom, grid: &Grid, io: &IoCounter) -> Result<()> {
        check_dims(tile, grid)?;
        io.add_writes(grid.len());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{mosaic, tile_monolithic};
    use crate::raster::DType;

    #[test]
    fn sources_agree() {
        let dir = tempfile::tempdir().unwrap();
        let dem = SyntheticDem::new(53, 41, DType::I16, 2);
        let g = dem.render();
        let src = dir.path().join("dem.rdtl");
        write_binary(&g, &src, false, &IoCounter::new()).unwrap();
        let m = tile_monolithic(&src, 20, 15, &dir.path().join("t"), None).unwrap();

        let mem = MemorySource::uniform(g.clone(), 20, 15).unwrap();
        let mono = MonolithicSource::open(&src, 20, 15).unwrap();
        let man = ManifestSource::new(m);
        let syn = SyntheticSource::new(dem, 20, 15).unwrap();
        let io = IoCounter::new();
        for t in mem.layout().tiles() {
            let a = mem.read_tile(&t, &io).unwrap();
            for s in [&mono as &dyn TileSource, &man, &syn] {
                assert!(s.read_tile(&t, &io).unwrap().bitwise_eq(&a));
            }
        }
        assert_eq!(io.reads(), 4 * g.len() as u64);
    }

    #[test]
    fn sinks_reassemble() {
        let dir = tempfile::tempdir().unwrap();
        let g = SyntheticDem::new(30, 22, DType::F32, 6).render();
        let src = MemorySource::uniform(g.clone(), 7, 9).unwrap();
        let mem = MemorySink::new();
        let disk = DirectorySink::create(&dir.path().join("out")).unwrap();
        let io = IoCounter::new();
        let tiles: Vec<_> = src.layout().tiles().collect();
        for t in tiles.iter().rev() {
            let tile = src.read_tile(t, &io).unwrap();
            mem.write_tile(t, &tile, &io).unwrap();
            disk.write_tile(t, &tile, &io).unwrap();
        }
        disk.finish(src.layout()).unwrap();
        assert!(mem.mosaic(src.layout()).unwrap().bitwise_eq(&g));
        let m = Manifest::read(&disk.manifest_path()).unwrap();
        assert!(mosaic(&m).unwrap().bitwise_eq(&g));
        let bad = Grid::filled(2, 2, DType::F32, -1.0, 0.0).unwrap();
        assert!(mem.write_tile(&tiles[0], &bad, &io).is_err());
    }
}
