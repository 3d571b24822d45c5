//! Raster file formats, cache files, layout manifests and counted cell I/O.
//!
//! Binary rasters (`RDTL`):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RDTL"
//! 4       1     version = 1
//! 5       1     dtype (1=int16, 2=int32, 3=float32, 4=float64)
//! 6       4     width  (u32 LE)
//! 10      4     height (u32 LE)
//! 14      E     nodata value
//! 14+E    E·w·h cells, row-major, little-endian
//! ```
//!
//! Label files (`RDLB`) share the layout with a 4-byte `u32` cell and no
//! dtype/nodata fields: magic, version, width, height, labels. Either file
//! may be wrapped in a gzip stream; readers detect the gzip magic.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::raster::{DType, Grid, LabelGrid, TileLayout};

pub const RASTER_MAGIC: &[u8; 4] = b"RDTL";
pub const LABEL_MAGIC: &[u8; 4] = b"RDLB";
pub const FORMAT_VERSION: u8 = 1;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Cell-granular read/write tally, shareable across threads.
#[derive(Debug, Default)]
pub struct IoCounter {
    reads: AtomicU64,
    writes: AtomicU64,
}

impl IoCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_reads(&self, cells: usize) {
        self.reads.fetch_add(cells as u64, Ordering::Relaxed);
    }

    pub fn add_writes(&self, cells: usize) {
        self.writes.fetch_add(cells as u64, Ordering::Relaxed);
    }

    pub fn reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn writes(&self) -> u64 {
        self.writes.load(Ordering::Relaxed)
    }
}

/// Size in bytes of an uncompressed binary raster.
pub fn binary_size(dtype: DType, width: usize, height: usize) -> usize {
    14 + dtype.byte_width() * (1 + width * height)
}

pub fn encode_binary(grid: &Grid) -> Vec<u8> {
    let dtype = grid.dtype();
    let mut out = Vec::with_capacity(binary_size(dtype, grid.width(), grid.height()));
    out.extend_from_slice(RASTER_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(dtype.code());
    out.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    dtype.encode(grid.nodata(), &mut out);
    for &v in grid.data() {
        dtype.encode(v, &mut out);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinaryHeader {
    pub dtype: DType,
    pub width: usize,
    pub height: usize,
    pub nodata: f64,
}

impl BinaryHeader {
    pub fn len(&self) -> usize {
        14 + self.dtype.byte_width()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<BinaryHeader> {
    if bytes.len() < 14 || &bytes[..4] != RASTER_MAGIC {
        return Err(Error::format(path, "missing RDTL magic"));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {}", bytes[4]),
        ));
    }
    let dtype = DType::from_code(bytes[5])?;
    let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "zero-sized raster"));
    }
    let e = dtype.byte_width();
    if bytes.len() < 14 + e {
        return Err(Error::format(path, "truncated header"));
    }
    Ok(BinaryHeader {
        dtype,
        width,
        height,
        nodata: dtype.decode(&bytes[14..14 + e]),
    })
}

pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<Grid> {
    let h = parse_header(bytes, path)?;
    let e = h.dtype.byte_width();
    let expect = binary_size(h.dtype, h.width, h.height);
    if bytes.len() != expect {
        return Err(Error::format(
            path,
            format!("expected {expect} bytes, found {}", bytes.len()),
        ));
    }
    let data = bytes[h.len()..]
        .chunks_exact(e)
        .map(|c| h.dtype.decode(c))
        .collect();
    Grid::new(h.width, h.height, h.dtype, h.nodata, data)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn write_all(path: &Path, bytes: &[u8], compress: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    if compress {
        let mut gz = GzEncoder::new(w, Compression::fast());
        gz.write_all(bytes).map_err(|e| Error::io(path, e))?;
        w = gz.finish().map_err(|e| Error::io(path, e))?;
    } else {
        w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_binary(grid: &Grid, path: &Path, compress: bool, counter: &IoCounter) -> Result<()> {
    write_all(path, &encode_binary(grid), compress)?;
    counter.add_writes(grid.len());
    Ok(())
}

pub fn read_binary(path: &Path, counter: &IoCounter) -> Result<Grid> {
    let g = decode_binary(&read_all(path)?, path)?;
    counter.add_reads(g.len());
    Ok(g)
}

pub fn read_binary_header(path: &Path) -> Result<BinaryHeader> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = [0u8; 22];
    let mut n = 0;
    while n < buf.len() {
        match f.read(&mut buf[n..]).map_err(|e| Error::io(path, e))? {
            0 => break,
            k => n += k,
        }
    }
    parse_header(&buf[..n], path)
}

/// Read a window of an uncompressed binary raster without loading the rest.
pub fn read_binary_window(
    path: &Path,
    row0: usize,
    col0: usize,
    width: usize,
    height: usize,
    counter: &IoCounter,
) -> Result<Grid> {
    let h = read_binary_header(path)?;
    if width == 0 || height == 0 || row0 + height > h.height || col0 + width > h.width {
        return Err(Error::format(path, "window outside raster"));
    }
    let expect = binary_size(h.dtype, h.width, h.height) as u64;
    let actual = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if actual != expect {
        return Err(Error::format(
            path,
            format!("expected {expect} bytes, found {actual}"),
        ));
    }
    let e = h.dtype.byte_width();
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut row = vec![0u8; width * e];
    let mut data = Vec::with_capacity(width * height);
    for r in row0..row0 + height {
        let at = h.len() + (r * h.width + col0) * e;
        f.seek(SeekFrom::Start(at as u64))
            .map_err(|e| Error::io(path, e))?;
        f.read_exact(&mut row).map_err(|e| Error::io(path, e))?;
        data.extend(row.chunks_exact(e).map(|c| h.dtype.decode(c)));
    }
    counter.add_reads(width * height);
    Grid::new(width, height, h.dtype, h.nodata, data)
}

pub fn encode_labels(labels: &LabelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 4 * labels.labels().len());
    out.extend_from_slice(LABEL_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(labels.width() as u32).to_le_bytes());
    out.extend_from_slice(&(labels.height() as u32).to_le_bytes());
    for &l in labels.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_labels(bytes: &[u8], path: &Path) -> Result<LabelGrid> {
    if bytes.len() < 13 || &bytes[..4] != LABEL_MAGIC {
        return Err(Error::format(path, "missing RDLB magic"));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {}", bytes[4]),
        ));
    }
    let w = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    if bytes.len() != 13 + 4 * w * h {
        return Err(Error::format(
            path,
            "label file size does not match its header",
        ));
    }
    let labels = bytes[13..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LabelGrid::from_vec(w, h, labels)
}

pub fn write_labels(
    labels: &LabelGrid,
    path: &Path,
    compress: bool,
    counter: &IoCounter,
) -> Result<()> {
    write_all(path, &encode_labels(labels), compress)?;
    counter.add_writes(labels.labels().len());
    Ok(())
}

pub fn read_labels(path: &Path, counter: &IoCounter) -> Result<LabelGrid> {
    let l = decode_labels(&read_all(path)?, path)?;
    counter.add_reads(l.labels().len());
    Ok(l)
}

fn format_value(dtype: DType, v: f64) -> String {
    match dtype {
        DType::I16 | DType::I32 => format!("{}", v as i64),
        DType::F32 => format!("{}", v as f32),
        DType::F64 => format!("{v}"),
    }
}

fn parse_value(token: &str, dtype: DType) -> Option<f64> {
    let v = match dtype {
        DType::F32 => token.parse::<f32>().ok()? as f64,
        _ => token.parse::<f64>().ok()?,
    };
    dtype.represents(v).then_some(v)
}

/// ESRI ASCII grid text for `grid`. Georeferencing fields are written as
/// placeholders; only the lattice matters here.
pub fn encode_ascii(grid: &Grid) -> String {
    let dtype = grid.dtype();
    let mut s = format!(
        "ncols {}\nnrows {}\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value {}\n",
        grid.width(),
        grid.height(),
        format_value(dtype, grid.nodata())
    );
    for row in grid.data().chunks(grid.width()) {
        let line: Vec<String> = row.iter().map(|&v| format_value(dtype, v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Parse an ESRI ASCII grid. Without a dtype hint, all-integer files load as
/// int32 and anything else as float64.
pub fn decode_ascii(text: &str, dtype: Option<DType>, path: &Path) -> Result<Grid> {
    let mut tokens = text.split_ascii_whitespace().peekable();
    let (mut ncols, mut nrows, mut nodata) = (None, None, None);
    while let Some(&key) = tokens.peek() {
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) || key.eq_ignore_ascii_case("nan") {
            break;
        }
        tokens.next();
        let value = tokens
            .next()
            .ok_or_else(|| Error::format(path, format!("header key {key} has no value")))?;
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = value.parse::<usize>().ok(),
            "nrows" => nrows = value.parse::<usize>().ok(),
            "nodata_value" => nodata = Some(value),
            "xllcorner" | "yllcorner" | "xllcenter" | "yllcenter" | "cellsize" | "dx" | "dy" => {}
            other => return Err(Error::format(path, format!("unknown header key {other}"))),
        }
    }
    let ncols = ncols.ok_or_else(|| Error::format(path, "missing or invalid ncols"))?;
    let nrows = nrows.ok_or_else(|| Error::format(path, "missing or invalid nrows"))?;
    let body: Vec<&str> = tokens.collect();
    if body.len() != ncols * nrows {
        return Err(Error::format(
            path,
            format!("expected {} cells, found {}", ncols * nrows, body.len()),
        ));
    }
    let nodata = nodata.unwrap_or("-9999");
    let dtype = dtype.unwrap_or_else(|| {
        let integral = |t: &str| {
            t.parse::<i64>()
                .is_ok_and(|v| (i32::MIN as i64..=i32::MAX as i64).contains(&v))
        };
        if integral(nodata) && body.iter().all(|t| integral(t)) {
            DType::I32
        } else {
            DType::F64
        }
    });
    let parse = |t: &str| {
        parse_value(t, dtype)
            .ok_or_else(|| Error::format(path, format!("value {t:?} is not a valid {dtype}")))
    };
    let nodata = parse(nodata)?;
    let data = body.into_iter().map(parse).collect::<Result<Vec<_>>>()?;
    Grid::new(ncols, nrows, dtype, nodata, data)
}

pub fn write_ascii(grid: &Grid, path: &Path, counter: &IoCounter) -> Result<()> {
    fs::write(path, encode_ascii(grid)).map_err(|e| Error::io(path, e))?;
    counter.add_writes(grid.len());
    Ok(())
}

pub fn read_ascii(path: &Path, dtype: Option<DType>, counter: &IoCounter) -> Result<Grid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let g = decode_ascii(&text, dtype, path)?;
    counter.add_reads(g.len());
    Ok(g)
}

fn is_ascii_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("asc"))
}

/// Read a raster, picking the format from its content.
pub fn read_raster(path: &Path, dtype_hint: Option<DType>, counter: &IoCounter) -> Result<Grid> {
    let bytes = read_all(path)?;
    if bytes.starts_with(RASTER_MAGIC) {
        let g = decode_binary(&bytes, path)?;
        counter.add_reads(g.len());
        Ok(g)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::format(path, "neither RDTL nor ASCII text"))?;
        let g = decode_ascii(&text, dtype_hint, path)?;
        counter.add_reads(g.len());
        Ok(g)
    }
}

/// Write a raster; `.asc` paths get ESRI ASCII, everything else binary.
pub fn write_raster(grid: &Grid, path: &Path, counter: &IoCounter) -> Result<()> {
    if is_ascii_path(path) {
        write_ascii(grid, path, counter)
    } else {
        write_binary(grid, path, false, counter)
    }
}

/// A tiled DEM on disk: layout plus one raster path per tile (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub layout: TileLayout,
    pub paths: Vec<PathBuf>,
}

impl Manifest {
    pub fn path(&self, row: usize, col: usize) -> &Path {
        &self.paths[self.layout.tile_index(row, col)]
    }

    /// Parse manifest text. Relative tile paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let bad = |why: String| Error::format(origin, why);
        let head = lines.next().ok_or_else(|| bad("empty manifest".into()))?;
        let mut it = head.split_ascii_whitespace();
        let (gw, gh) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some("tiles"), Some(a), Some(b), None) => (
                a.parse::<usize>()
                    .map_err(|_| bad(format!("bad tile count {a:?}")))?,
                b.parse::<usize>()
                    .map_err(|_| bad(format!("bad tile count {b:?}")))?,
            ),
            _ => return Err(bad(format!("expected `tiles <gw> <gh>`, got {head:?}"))),
        };
        let mut specs = Vec::new();
        let mut paths = vec![None; gw * gh];
        for line in lines {
            let mut parts = line.splitn(6, char::is_whitespace);
            let tag = parts.next();
            let nums: Vec<usize> = parts
                .by_ref()
                .take(4)
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(format!("bad tile line {line:?}")))?;
            let rel = parts.next().map(str::trim).filter(|p| !p.is_empty());
            let (Some("tile"), [row, col, w, h], Some(rel)) = (tag, nums.as_slice(), rel) else {
                return Err(bad(format!(
                    "expected `tile <row> <col> <width> <height> <path>`, got {line:?}"
                )));
            };
            if *row >= gh || *col >= gw {
                return Err(bad(format!(
                    "tile ({row},{col}) outside the {gw}x{gh} grid"
                )));
            }
            specs.push((*row, *col, *w, *h));
            let p = Path::new(rel);
            paths[row * gw + col] = Some(if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            });
        }
        let layout = TileLayout::from_tiles(&specs)?;
        if layout.grid_width() != gw || layout.grid_height() != gh {
            return Err(bad("tile lines do not match the declared grid".into()));
        }
        Ok(Manifest {
            layout,
            paths: paths.into_iter().map(Option::unwrap).collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Manifest::parse(&text, base, path)
    }

    /// Render as text, writing tile paths relative to `base` where possible.
    pub fn to_text(&self, base: &Path) -> String {
        let mut s = format!(
            "tiles {} {}\n",
            self.layout.grid_width(),
            self.layout.grid_height()
        );
        for t in self.layout.tiles() {
            let p = self.path(t.row, t.col);
            let shown = p.strip_prefix(base).unwrap_or(p);
            s.push_str(&format!(
                "tile {} {} {} {} {}\n",
                t.row,
                t.col,
                t.width,
                t.height,
                shown.display()
            ));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        fs::write(path, self.to_text(base)).map_err(|e| Error::io(path, e))
    }
}

pub fn tile_file_name(row: usize, col: usize) -> String {
    format!("{row}_{col}.rdtl")
}

pub const MANIFEST_NAME: &str = "tiles.txt";

/// Split a monolithic raster into `tile_w`×`tile_h` tiles under `out_dir`,
/// writing `tiles.txt` alongside. Binary inputs are read one band of tile
/// rows at a time.
pub fn tile_monolithic(
    input: &Path,
    tile_w: usize,
    tile_h: usize,
    out_dir: &Path,
    dtype_hint: Option<DType>,
) -> Result<Manifest> {
    if tile_w == 0 || tile_h == 0 {
        return Err(Error::Invalid("tile dimensions must be at least 1".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let counter = IoCounter::new();
    let whole = if read_binary_header(input).is_ok() && !read_all_is_gzip(input)? {
        None
    } else {
        Some(read_raster(input, dtype_hint, &counter)?)
    };
    let (width, height) = match &whole {
        Some(g) => g.dims(),
        None => {
            let h = read_binary_header(input)?;
            (h.width, h.height)
        }
    };
    let layout = TileLayout::uniform(width, height, tile_w, tile_h)?;
    let mut paths = Vec::with_capacity(layout.tile_count());
    for trow in 0..layout.grid_height() {
        let first = layout.tile(trow, 0);
        let band = match &whole {
            Some(g) => g.window(first.y0, 0, width, first.height)?,
            None => read_binary_window(input, first.y0, 0, width, first.height, &counter)?,
        };
        for tcol in 0..layout.grid_width() {
            let t = layout.tile(trow, tcol);
            let tile = band.window(0, t.x0, t.width, t.height)?;
            let p = out_dir.join(tile_file_name(trow, tcol));
            write_binary(&tile, &p, false, &counter)?;
            paths.push(p);
        }
    }
    let manifest = Manifest { layout, paths };
    manifest.write(&out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

fn read_all_is_gzip(path: &Path) -> Result<bool> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut b = [0u8; 2];
    Ok(f.read_exact(&mut b).is_ok() && b == GZIP_MAGIC)
}

/// Reassemble a tiled raster into one grid.
pub fn mosaic(manifest: &Manifest) -> Result<Grid> {
    let counter = IoCounter::new();
    let mut out: Option<Grid> = None;
    for t in manifest.layout.tiles() {
        let tile = read_raster(manifest.path(t.row, t.col), None, &counter)?;
        if tile.dims() != (t.width, t.height) {
            return Err(Error::DimensionMismatch {
                expected: (t.width, t.height),
                actual: tile.dims(),
            });
        }
        let g = match &mut out {
            Some(g) => g,
            None => out.insert(Grid::filled(
                manifest.layout.width(),
                manifest.layout.height(),
                tile.dtype(),
                tile.nodata(),
                tile.nodata(),
            )?),
        };
        g.paste(&tile, t.y0, t.x0)?;
    }
    out.ok_or_else(|| Error::InvalidLayout("empty manifest".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SyntheticDem;

    #[test]
    fn two_by_two_f32_is_34_bytes() {
        let g = Grid::new(2, 2, DType::F32, -9999.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(encode_binary(&g).len(), 34);
        assert_eq!(binary_size(DType::F32, 2, 2), 34);
    }

    #[test]
    fn binary_errors() {
        let p = Path::new("x.rdtl");
        let g = Grid::new(2, 2, DType::I16, -1.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode_binary(&g);
        assert!(decode_binary(&bytes[..bytes.len() - 1], p).is_err());
        let mut bad = bytes.clone();
        bad[5] = 9;
        assert!(matches!(
            decode_binary(&bad, p),
            Err(Error::UnknownDType(9))
        ));
        bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_binary(&bad, p).is_err());
    }

    #[test]
    fn ascii_header_variants() {
        let text = "NCOLS 3\nNROWS 2\nXLLCENTER 10.5\nYLLCENTER 3\nCELLSIZE 30\nNODATA_VALUE -1\n1 2 3\n4 -1 6\n";
        let g = decode_ascii(text, None, Path::new("t.asc")).unwrap();
        assert_eq!(g.dtype(), DType::I32);
        assert_eq!(g.dims(), (3, 2));
        assert!(g.is_nodata(4));
        let f = decode_ascii("ncols 1\nnrows 1\n2.5\n", None, Path::new("t.asc")).unwrap();
        assert_eq!(
            (f.dtype(), f.nodata(), f.get(0, 0)),
            (DType::F64, -9999.0, 2.5)
        );
        assert!(decode_ascii("ncols 2\nnrows 1\n1\n", None, Path::new("t.asc")).is_err());
        assert!(decode_ascii("ncols 1\nnrows 1\nbogus 3\n1\n", None, Path::new("t.asc")).is_err());
        assert!(decode_ascii(
            "ncols 1\nnrows 1\n1.5\n",
            Some(DType::I16),
            Path::new("t.asc")
        )
        .is_err());
    }

    #[test]
    fn ascii_and_binary_agree() {
        let dir = tempfile::tempdir().unwrap();
        let c = IoCounter::new();
        for dtype in DType::ALL {
            let g = SyntheticDem::new(17, 9, dtype, 3).render();
            let a = dir.path().join("g.asc");
            let b = dir.path().join("g.rdtl");
            write_raster(&g, &a, &c).unwrap();
            write_raster(&g, &b, &c).unwrap();
            let ga = read_raster(&a, Some(dtype), &c).unwrap();
            let gb = read_raster(&b, None, &c).unwrap();
            assert!(ga.bitwise_eq(&gb), "{dtype}");
            assert!(ga.bitwise_eq(&g), "{dtype}");
        }
    }

    #[test]
    fn window_read_matches_full_read() {
        let dir = tempfile::tempdir().unwrap();
        let c = IoCounter::new();
        let g = SyntheticDem::new(23, 19, DType::I16, 8).render();
        let p = dir.path().join("g.rdtl");
        write_binary(&g, &p, false, &c).unwrap();
        let w = read_binary_window(&p, 4, 7, 10, 12, &c).unwrap();
        assert!(w.bitwise_eq(&g.window(4, 7, 10, 12).unwrap()));
        assert_eq!(c.reads(), 120);
        assert_eq!(c.writes(), 23 * 19);
        assert!(read_binary_window(&p, 10, 0, 5, 10, &c).is_err());
    }

    #[test]
    fn compressed_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = IoCounter::new();
        let g = SyntheticDem::new(40, 30, DType::F64, 1).render();
        let p = dir.path().join("g.fill");
        write_binary(&g, &p, true, &c).unwrap();
        assert_eq!(&fs::read(&p).unwrap()[..2], &GZIP_MAGIC);
        assert!(read_binary(&p, &c).unwrap().bitwise_eq(&g));
        let l = LabelGrid::from_vec(3, 2, vec![2, 3, 4, 5, 6, 7]).unwrap();
        let lp = dir.path().join("g.lbl");
        write_labels(&l, &lp, true, &c).unwrap();
        assert_eq!(read_labels(&lp, &c).unwrap(), l);
    }

    #[test]
    fn hundred_by_hundred_in_thirty_tiles() {
        let dir = tempfile::tempdir().unwrap();
        let g = SyntheticDem::new(100, 100, DType::F32, 4).render();
        let src = dir.path().join("dem.rdtl");
        write_binary(&g, &src, false, &IoCounter::new()).unwrap();
        let m = tile_monolithic(&src, 30, 30, &dir.path().join("t"), None).unwrap();
        assert_eq!((m.layout.grid_width(), m.layout.grid_height()), (4, 4));
        assert_eq!(m.layout.tile(3, 3).width, 10);
        let back = Manifest::read(&dir.path().join("t").join(MANIFEST_NAME)).unwrap();
        assert_eq!(back, m);
        assert!(mosaic(&back).unwrap().bitwise_eq(&g));

        let one = tile_monolithic(&src, 100, 100, &dir.path().join("one"), None).unwrap();
        assert_eq!(one.layout.tile_count(), 1);
    }

    #[test]
    fn manifest_errors() {
        let p = Path::new("m.txt");
        assert!(Manifest::parse("", p, p).is_err());
        assert!(Manifest::parse("tiles 1 1\n", p, p).is_err());
        assert!(Manifest::parse("tiles 1 1\ntile 0 0 3 3 a.rdtl\n", p, p).is_ok());
        assert!(Manifest::parse("tiles 1 1\ntile 0 1 3 3 a.rdtl\n", p, p).is_err());
        assert!(Manifest::parse("tiles 2 1\ntile 0 0 3 3 a\ntile 0 1 3 4 b\n", p, p).is_err());
        let m =
            Manifest::parse("tiles 1 1\ntile 0 0 3 3 dir/a b.rdtl\n", Path::new("/x"), p).unwrap();
        assert_eq!(m.paths[0], PathBuf::from("/x/dir/a b.rdtl"));
    }
}
