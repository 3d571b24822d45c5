//! Elevation and label grids, D8 addressing, tile geometry and edge extraction.
//!
//! Cell values are held as `f64` regardless of the on-disk [`DType`]; every
//! supported dtype embeds exactly in `f64`, and filling only ever copies
//! existing values, so nothing is lost on the way back out.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Storage type of an elevation raster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DType {
    I16,
    I32,
    F32,
    F64,
}

impl DType {
    pub const ALL: [DType; 4] = [DType::I16, DType::I32, DType::F32, DType::F64];

    pub fn code(self) -> u8 {
        match self {
            DType::I16 => 1,
            DType::I32 => 2,
            DType::F32 => 3,
            DType::F64 => 4,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(DType::I16),
            2 => Ok(DType::I32),
            3 => Ok(DType::F32),
            4 => Ok(DType::F64),
            other => Err(Error::UnknownDType(other)),
        }
    }

    /// Bytes per cell.
    pub fn byte_width(self) -> usize {
        match self {
            DType::I16 => 2,
            DType::I32 | DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::I16 => "int16",
            DType::I32 => "int32",
            DType::F32 => "float32",
            DType::F64 => "float64",
        }
    }

    /// Narrow `value` to this dtype and widen it back.
    fn narrow(self, value: f64) -> f64 {
        match self {
            DType::I16 => value as i16 as f64,
            DType::I32 => value as i32 as f64,
            DType::F32 => value as f32 as f64,
            DType::F64 => value,
        }
    }

    /// True if `value` survives a round trip through this dtype bit for bit.
    pub fn represents(self, value: f64) -> bool {
        if value.is_nan() {
            return matches!(self, DType::F32 | DType::F64);
        }
        self.narrow(value).to_bits() == value.to_bits()
    }

    pub fn check(self, value: f64) -> Result<()> {
        if self.represents(value) {
            Ok(())
        } else {
            Err(Error::Unrepresentable {
                value,
                dtype: self.name(),
            })
        }
    }

    /// Append the little-endian encoding of `value`. The caller guarantees
    /// representability.
    pub fn encode(self, value: f64, out: &mut Vec<u8>) {
        match self {
            DType::I16 => out.extend_from_slice(&(value as i16).to_le_bytes()),
            DType::I32 => out.extend_from_slice(&(value as i32).to_le_bytes()),
            DType::F32 => out.extend_from_slice(&(value as f32).to_le_bytes()),
            DType::F64 => out.extend_from_slice(&value.to_le_bytes()),
        }
    }

    /// Decode one value from the front of `bytes` (at least `byte_width` long).
    pub fn decode(self, bytes: &[u8]) -> f64 {
        match self {
            DType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            DType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            DType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            DType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Flood-ordering level of a cell or spillover.
///
/// `Edge < NoData < Data(_)`; data values are compared with `f64::total_cmp`.
/// `Edge` is the elevation of the virtual DEM-edge node and never appears in
/// a raster.
#[derive(Clone, Copy, Debug)]
pub enum Level {
    Edge,
    NoData,
    Data(f64),
}

impl Level {
    fn rank(&self) -> u8 {
        match self {
            Level::Edge => 0,
            Level::NoData => 1,
            Level::Data(_) => 2,
        }
    }

    pub fn data(self) -> Option<f64> {
        match self {
            Level::Data(v) => Some(v),
            _ => None,
        }
    }
}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Level::Data(a), Level::Data(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Level {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Level {}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Edge => f.write_str("-inf"),
            Level::NoData => f.write_str("nodata"),
            Level::Data(v) => write!(f, "{v}"),
        }
    }
}

pub(crate) fn same_value(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

/// Row-major elevation raster.
#[derive(Clone, Debug)]
pub struct Grid {
    width: usize,
    height: usize,
    dtype: DType,
    nodata: f64,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(
        width: usize,
        height: usize,
        dtype: DType,
        nodata: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid(format!("empty grid {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Invalid(format!(
                "grid {width}x{height} needs {} cells, got {}",
                width * height,
                data.len()
            )));
        }
        dtype.check(nodata)?;
        for &v in &data {
            dtype.check(v)?;
        }
        Ok(Grid {
            width,
            height,
            dtype,
            nodata,
            data,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        dtype: DType,
        nodata: f64,
        value: f64,
    ) -> Result<Self> {
        Grid::new(width, height, dtype, nodata, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        self.data[idx]
    }

    /// Set a cell. The value must be representable in the grid's dtype.
    pub fn set(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        self.dtype.check(value)?;
        let i = self.index(row, col);
        self.data[i] = value;
        Ok(())
    }

    /// Unchecked write used by the fillers, which only copy existing values.
    #[inline]
    pub(crate) fn put(&mut self, idx: usize, value: f64) {
        self.data[idx] = value;
    }

    #[inline]
    pub fn is_nodata(&self, idx: usize) -> bool {
        same_value(self.data[idx], self.nodata)
    }

    #[inline]
    pub fn level(&self, idx: usize) -> Level {
        let v = self.data[idx];
        if same_value(v, self.nodata) {
            Level::NoData
        } else {
            Level::Data(v)
        }
    }

    /// Map a level back to a cell value; sub-data levels become the sentinel.
    pub fn value_of(&self, level: Level) -> f64 {
        level.data().unwrap_or(self.nodata)
    }

    pub fn is_border(&self, idx: usize) -> bool {
        let (r, c) = (idx / self.width, idx % self.width);
        r == 0 || c == 0 || r + 1 == self.height || c + 1 == self.width
    }

    /// Copy out the `width`×`height` window whose top-left cell is (`row0`,`col0`).
    pub fn window(&self, row0: usize, col0: usize, width: usize, height: usize) -> Result<Grid> {
        if width == 0 || height == 0 || row0 + height > self.height || col0 + width > self.width {
            return Err(Error::Invalid(format!(
                "window {width}x{height} at ({row0},{col0}) outside {}x{} grid",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for r in row0..row0 + height {
            let start = r * self.width + col0;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(Grid {
            width,
            height,
            dtype: self.dtype,
            nodata: self.nodata,
            data,
        })
    }

    /// Paste `tile` with its top-left at (`row0`,`col0`).
    pub fn paste(&mut self, tile: &Grid, row0: usize, col0: usize) -> Result<()> {
        if row0 + tile.height > self.height || col0 + tile.width > self.width {
            return Err(Error::Invalid("pasted tile extends past the grid".into()));
        }
        if tile.dtype != self.dtype || !same_value(tile.nodata, self.nodata) {
            return Err(Error::Invalid(
                "pasted tile has a different dtype or nodata".into(),
            ));
        }
        for r in 0..tile.height {
            let dst = (row0 + r) * self.width + col0;
            self.data[dst..dst + tile.width]
                .copy_from_slice(&tile.data[r * tile.width..(r + 1) * tile.width]);
        }
        Ok(())
    }

    /// Bitwise comparison, including the nodata sentinel and dtype.
    pub fn bitwise_eq(&self, other: &Grid) -> bool {
        self.dims() == other.dims()
            && self.dtype == other.dtype
            && self.nodata.to_bits() == other.nodata.to_bits()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Watershed labels. 0 = unlabeled, 1 = the DEM edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelGrid {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

pub const UNLABELED: u32 = 0;
pub const EDGE_LABEL: u32 = 1;
pub const FIRST_LABEL: u32 = 2;

impl LabelGrid {
    pub fn new(width: usize, height: usize) -> Self {
        LabelGrid {
            width,
            height,
            labels: vec![UNLABELED; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Invalid(format!(
                "label grid {width}x{height} needs {} cells, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(LabelGrid {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    #[inline]
    pub fn at(&self, idx: usize) -> u32 {
        self.labels[idx]
    }

    #[inline]
    pub(crate) fn set_at(&mut self, idx: usize, label: u32) {
        self.labels[idx] = label;
    }
}

/// D8 offsets in row-major order of the 3×3 window, centre excluded.
pub const D8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Iterator over the in-bounds D8 neighbours of a cell.
#[derive(Clone, Debug)]
pub struct Neighbors {
    row: usize,
    col: usize,
    width: usize,
    height: usize,
    k: usize,
}

impl Iterator for Neighbors {
    type Item = (usize, usize);

    #[inline]
    fn next(&mut self) -> Option<(usize, usize)> {
        while self.k < D8.len() {
            let (dr, dc) = D8[self.k];
            self.k += 1;
            let r = self.row.wrapping_add_signed(dr);
            let c = self.col.wrapping_add_signed(dc);
            if r < self.height && c < self.width {
                return Some((r, c));
            }
        }
        None
    }
}

/// D8 neighbourhood of (`row`,`col`) clipped to a `width`×`height` grid.
pub fn neighbors(row: usize, col: usize, width: usize, height: usize) -> Neighbors {
    debug_assert!(row < height && col < width);
    Neighbors {
        row,
        col,
        width,
        height,
        k: 0,
    }
}

/// Which sides of a tile lie on the boundary of the whole DEM.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeFlags {
    pub north: bool,
    pub south: bool,
    pub east: bool,
    pub west: bool,
}

impl EdgeFlags {
    pub const ALL: EdgeFlags = EdgeFlags {
        north: true,
        south: true,
        east: true,
        west: true,
    };
}

/// Placement of one tile inside a layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileGeom {
    pub row: usize,
    pub col: usize,
    /// First DEM row covered by the tile.
    pub y0: usize,
    /// First DEM column covered by the tile.
    pub x0: usize,
    pub width: usize,
    pub height: usize,
    pub edges: EdgeFlags,
}

impl TileGeom {
    pub fn cells(&self) -> usize {
        self.width * self.height
    }
}

/// A rectangular tiling in which every tile in a row has the same height and
/// every tile in a column the same width, so adjacent tiles always share
/// whole edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileLayout {
    col_widths: Vec<usize>,
    row_heights: Vec<usize>,
    col_starts: Vec<usize>,
    row_starts: Vec<usize>,
}

impl TileLayout {
    pub fn new(col_widths: Vec<usize>, row_heights: Vec<usize>) -> Result<Self> {
        if col_widths.is_empty() || row_heights.is_empty() {
            return Err(Error::InvalidLayout("layout has no tiles".into()));
        }
        if col_widths.iter().chain(&row_heights).any(|&d| d == 0) {
            return Err(Error::InvalidLayout("tile with zero extent".into()));
        }
        let prefix = |v: &[usize]| {
            v.iter()
                .scan(0, |acc, &d| {
                    let s = *acc;
                    *acc += d;
                    Some(s)
                })
                .collect::<Vec<_>>()
        };
        Ok(TileLayout {
            col_starts: prefix(&col_widths),
            row_starts: prefix(&row_heights),
            col_widths,
            row_heights,
        })
    }

    /// Cut a `width`×`height` DEM into `tile_w`×`tile_h` tiles; the last row
    /// and column absorb the remainder.
    pub fn uniform(width: usize, height: usize, tile_w: usize, tile_h: usize) -> Result<Self> {
        if tile_w == 0 || tile_h == 0 {
            return Err(Error::InvalidLayout(
                "tile dimensions must be at least 1".into(),
            ));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidLayout("DEM is empty".into()));
        }
        let split = |total: usize, step: usize| {
            (0..total.div_ceil(step))
                .map(|i| step.min(total - i * step))
                .collect::<Vec<_>>()
        };
        TileLayout::new(split(width, tile_w), split(height, tile_h))
    }

    /// Build a layout from individually described tiles `(row, col, width, height)`,
    /// checking that they form a complete grid with shared edges.
    pub fn from_tiles(tiles: &[(usize, usize, usize, usize)]) -> Result<Self> {
        let gw = tiles.iter().map(|t| t.1 + 1).max().unwrap_or(0);
        let gh = tiles.iter().map(|t| t.0 + 1).max().unwrap_or(0);
        if gw * gh != tiles.len() {
            return Err(Error::InvalidLayout(format!(
                "{} tiles do not fill a {gw}x{gh} grid",
                tiles.len()
            )));
        }
        let mut widths = vec![None; gw];
        let mut heights = vec![None; gh];
        let mut seen = vec![false; gw * gh];
        for &(row, col, w, h) in tiles {
            let slot = &mut seen[row * gw + col];
            if *slot {
                return Err(Error::InvalidLayout(format!(
                    "tile ({row},{col}) listed twice"
                )));
            }
            *slot = true;
            match widths[col] {
                None => widths[col] = Some(w),
                Some(prev) if prev != w => {
                    return Err(Error::InvalidLayout(format!(
                        "column {col} mixes widths {prev} and {w}"
                    )))
                }
                _ => {}
            }
            match heights[row] {
                None => heights[row] = Some(h),
                Some(prev) if prev != h => {
                    return Err(Error::InvalidLayout(format!(
                        "row {row} mixes heights {prev} and {h}"
                    )))
                }
                _ => {}
            }
        }
        TileLayout::new(
            widths.into_iter().map(Option::unwrap).collect(),
            heights.into_iter().map(Option::unwrap).collect(),
        )
    }

    /// Number of tile columns.
    pub fn grid_width(&self) -> usize {
        self.col_widths.len()
    }

    /// Number of tile rows.
    pub fn grid_height(&self) -> usize {
        self.row_heights.len()
    }

    pub fn tile_count(&self) -> usize {
        self.grid_width() * self.grid_height()
    }

    /// DEM width in cells.
    pub fn width(&self) -> usize {
        self.col_widths.iter().sum()
    }

    /// DEM height in cells.
    pub fn height(&self) -> usize {
        self.row_heights.iter().sum()
    }

    pub fn cells(&self) -> usize {
        self.width() * self.height()
    }

    pub fn col_widths(&self) -> &[usize] {
        &self.col_widths
    }

    pub fn row_heights(&self) -> &[usize] {
        &self.row_heights
    }

    pub fn tile(&self, row: usize, col: usize) -> TileGeom {
        let (gw, gh) = (self.grid_width(), self.grid_height());
        TileGeom {
            row,
            col,
            y0: self.row_starts[row],
            x0: self.col_starts[col],
            width: self.col_widths[col],
            height: self.row_heights[row],
            edges: EdgeFlags {
                north: row == 0,
                south: row + 1 == gh,
                west: col == 0,
                east: col + 1 == gw,
            },
        }
    }

    /// Tiles in row-major order.
    pub fn tiles(&self) -> impl Iterator<Item = TileGeom> + '_ {
        (0..self.grid_height())
            .flat_map(move |r| (0..self.grid_width()).map(move |c| self.tile(r, c)))
    }

    pub fn tile_index(&self, row: usize, col: usize) -> usize {
        row * self.grid_width() + col
    }
}

/// One side of a tile: elevations and labels in order along the side.
#[derive(Clone, Debug, PartialEq)]
pub struct Side {
    pub levels: Vec<Level>,
    pub labels: Vec<u32>,
}

impl Side {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn first(&self) -> (Level, u32) {
        (self.levels[0], self.labels[0])
    }

    pub fn last(&self) -> (Level, u32) {
        let i = self.levels.len() - 1;
        (self.levels[i], self.labels[i])
    }
}

/// The four sides of a tile. North and south run west→east; west and east
/// run north→south. Corner cells appear in both adjoining sides.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeVectors {
    pub north: Side,
    pub south: Side,
    pub west: Side,
    pub east: Side,
}

impl EdgeVectors {
    pub fn sides(&self) -> [&Side; 4] {
        [&self.north, &self.south, &self.west, &self.east]
    }

    pub fn sides_mut(&mut self) -> [&mut Side; 4] {
        [
            &mut self.north,
            &mut self.south,
            &mut self.west,
            &mut self.east,
        ]
    }

    pub fn width(&self) -> usize {
        self.north.len()
    }

    pub fn height(&self) -> usize {
        self.west.len()
    }
}

pub fn extract_edges(dem: &Grid, labels: &LabelGrid) -> Result<EdgeVectors> {
    if dem.dims() != labels.dims() {
        return Err(Error::DimensionMismatch {
            expected: dem.dims(),
            actual: labels.dims(),
        });
    }
    let (w, h) = dem.dims();
    let side = |cells: &mut dyn Iterator<Item = usize>| {
        let mut s = Side {
            levels: Vec::new(),
            labels: Vec::new(),
        };
        for i in cells {
            s.levels.push(dem.level(i));
            s.labels.push(labels.at(i));
        }
        s
    };
    Ok(EdgeVectors {
        north: side(&mut (0..w)),
        south: side(&mut ((h - 1) * w..h * w)),
        west: side(&mut (0..h).map(|r| r * w)),
        east: side(&mut (0..h).map(|r| r * w + w - 1)),
    })
}
