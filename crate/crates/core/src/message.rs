//! Producer/consumer messages and their little-endian wire encodings.
//!
//! Elevations travel in the DEM's own dtype width; anything below the data
//! range (NoData, and the −∞ edge level) is sent as the NoData sentinel,
//! which compares identically in every later step.

use crate::error::{Error, Result};
use crate::graph::SpilloverGraph;
use crate::raster::{same_value, DType, EdgeVectors, Level, Side};

/// What a consumer reports for one filled tile.
#[derive(Clone, Debug, PartialEq)]
pub struct TileSummary {
    pub row: usize,
    pub col: usize,
    pub dtype: DType,
    pub nodata: f64,
    /// Tile labels are `2..=max_label`.
    pub max_label: u32,
    pub edges: EdgeVectors,
    pub graph: SpilloverGraph,
}

/// Fixed bytes in an encoded [`TileSummary`] besides per-cell and per-edge data.
pub fn summary_framing(dtype: DType) -> usize {
    4 * 4 + 1 + dtype.byte_width() + 4 + 4
}

/// Fixed bytes in an encoded [`LabelLevels`] besides the per-label values.
pub fn levels_framing(dtype: DType) -> usize {
    3 * 4 + 1 + dtype.byte_width()
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_level(out: &mut Vec<u8>, dtype: DType, nodata: f64, level: Level) {
    dtype.encode(level.data().unwrap_or(nodata), out);
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Codec(format!("truncated at byte {}", self.at)))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn value(&mut self, dtype: DType) -> Result<f64> {
        Ok(dtype.decode(self.take(dtype.byte_width())?))
    }

    fn level(&mut self, dtype: DType, nodata: f64) -> Result<Level> {
        let v = self.value(dtype)?;
        Ok(if same_value(v, nodata) {
            Level::NoData
        } else {
            Level::Data(v)
        })
    }

    fn finish(&self) -> Result<()> {
        if self.at == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Codec(format!(
                "{} trailing bytes",
                self.buf.len() - self.at
            )))
        }
    }
}

impl TileSummary {
    pub fn width(&self) -> usize {
        self.edges.width()
    }

    pub fn height(&self) -> usize {
        self.edges.height()
    }

    pub fn encode(&self) -> Vec<u8> {
        let (dtype, nodata) = (self.dtype, self.nodata);
        let (w, h) = (self.width(), self.height());
        let edges = self.graph.sorted_edges();
        let mut out = Vec::with_capacity(
            summary_framing(dtype)
                + 2 * (w + h) * (4 + dtype.byte_width())
                + edges.len() * (8 + dtype.byte_width()),
        );
        put_u32(&mut out, self.row);
        put_u32(&mut out, self.col);
        put_u32(&mut out, w);
        put_u32(&mut out, h);
        out.push(dtype.code());
        dtype.encode(nodata, &mut out);
        put_u32(&mut out, self.max_label as usize);
        put_u32(&mut out, edges.len());
        for side in self.edges.sides() {
            for &z in &side.levels {
                put_level(&mut out, dtype, nodata, z);
            }
            for &l in &side.labels {
                out.extend_from_slice(&l.to_le_bytes());
            }
        }
        for ((a, b), z) in edges {
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&b.to_le_bytes());
            put_level(&mut out, dtype, nodata, z);
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, at: 0 };
        let row = r.u32()? as usize;
        let col = r.u32()? as usize;
        let w = r.u32()? as usize;
        let h = r.u32()? as usize;
        if w == 0 || h == 0 {
            return Err(Error::Codec("empty tile".into()));
        }
        let dtype = DType::from_code(r.u8()?)?;
        let nodata = r.value(dtype)?;
        let max_label = r.u32()?;
        let n_edges = r.u32()? as usize;
        let mut side = |len: usize| -> Result<Side> {
            let levels = (0..len)
                .map(|_| r.level(dtype, nodata))
                .collect::<Result<Vec<_>>>()?;
            let labels = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            Ok(Side { levels, labels })
        };
        let edges = EdgeVectors {
            north: side(w)?,
            south: side(w)?,
            west: side(h)?,
            east: side(h)?,
        };
        let mut graph = SpilloverGraph::new();
        for _ in 0..n_edges {
            let a = r.u32()?;
            let b = r.u32()?;
            let z = r.level(dtype, nodata)?;
            graph.observe(a, b, z);
        }
        r.finish()?;
        Ok(TileSummary {
            row,
            col,
            dtype,
            nodata,
            max_label,
            edges,
            graph,
        })
    }
}

/// Producer → consumer: final level of each of a tile's labels, dense and
/// indexed by local label (`levels[0]` is label 2).
#[derive(Clone, Debug, PartialEq)]
pub struct LabelLevels {
    pub row: usize,
    pub col: usize,
    pub dtype: DType,
    pub nodata: f64,
    pub levels: Vec<Level>,
}

impl LabelLevels {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            levels_framing(self.dtype) + self.levels.len() * self.dtype.byte_width(),
        );
        put_u32(&mut out, self.row);
        put_u32(&mut out, self.col);
        put_u32(&mut out, self.levels.len());
        out.push(self.dtype.code());
        self.dtype.encode(self.nodata, &mut out);
        for &z in &self.levels {
            put_level(&mut out, self.dtype, self.nodata, z);
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, at: 0 };
        let row = r.u32()? as usize;
        let col = r.u32()? as usize;
        let n = r.u32()? as usize;
        let dtype = DType::from_code(r.u8()?)?;
        let nodata = r.value(dtype)?;
        let levels = (0..n)
            .map(|_| r.level(dtype, nodata))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ok(LabelLevels {
            row,
            col,
            dtype,
            nodata,
            levels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fill::fill_tile;
    use crate::raster::{extract_edges, EdgeFlags};
    use crate::synth::SyntheticDem;
    use proptest::prelude::*;

    fn summary_of(dtype: DType, w: usize, h: usize, seed: u64) -> TileSummary {
        let dem = SyntheticDem::new(w, h, dtype, seed).render();
        let (dtype, nodata) = (dem.dtype(), dem.nodata());
        let t = fill_tile(dem, EdgeFlags::default());
        TileSummary {
            row: 3,
            col: 5,
            dtype,
            nodata,
            max_label: t.max_label,
            edges: extract_edges(&t.filled, &t.labels).unwrap(),
            graph: t.graph,
        }
    }

    #[test]
    fn summary_size_is_exact() {
        let s = summary_of(DType::I16, 9, 4, 2);
        let bytes = s.encode();
        let e = 2;
        let expect = summary_framing(DType::I16) + 2 * (9 + 4) * (4 + e) + s.graph.len() * (8 + e);
        assert_eq!(bytes.len(), expect);
    }

    #[test]
    fn truncated_summary_is_rejected() {
        let bytes = summary_of(DType::F32, 6, 6, 1).encode();
        assert!(TileSummary::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(TileSummary::decode(&long).is_err());
    }

    #[test]
    fn edge_level_travels_as_nodata() {
        let m = LabelLevels {
            row: 0,
            col: 1,
            dtype: DType::I32,
            nodata: -9999.0,
            levels: vec![Level::Edge, Level::Data(4.0), Level::NoData],
        };
        let back = LabelLevels::decode(&m.encode()).unwrap();
        assert_eq!(
            back.levels,
            vec![Level::NoData, Level::Data(4.0), Level::NoData]
        );
        assert_eq!(m.encode().len(), levels_framing(DType::I32) + 3 * 4);
    }

    proptest! {
        #[test]
        fn summary_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>(), dt in 0usize..4) {
            let s = summary_of(DType::ALL[dt], w, h, seed);
            let back = TileSummary::decode(&s.encode()).unwrap();
            prop_assert_eq!(back.edges, s.edges);
            prop_assert_eq!((back.row, back.col, back.max_label), (3, 5, s.max_label));
            // −∞ edge spills come back as NoData; both sort below all data.
            for ((a, b), z) in s.graph.iter() {
                let got = back.graph.get(a, b).unwrap();
                match z {
                    Level::Data(_) => prop_assert_eq!(got, z),
                    _ => prop_assert_eq!(got, Level::NoData),
                }
            }
            prop_assert_eq!(back.graph.len(), s.graph.len());
        }
    }
}
