//! Seeded synthetic terrain for the verification and benchmark harnesses.
//!
//! Fractal Perlin relief plus per-cell jitter, with nested bowl-shaped
//! depressions and NoData blobs scattered over a coarse block lattice. Every
//! cell is a pure function of `(seed, row, col)`, so any window can be
//! rendered on its own and tiles of a huge DEM can be produced without ever
//! holding the whole raster.

use noise::{Fbm, MultiFractal, NoiseFn, Perlin};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{DType, Grid};

const BLOCK: i64 = 48;
const MAX_REACH: i64 = 24;

#[derive(Clone, Copy, Debug)]
struct Bowl {
    row: f64,
    col: f64,
    radius: f64,
    depth: f64,
}

#[derive(Clone, Copy, Debug)]
struct Blob {
    row: f64,
    col: f64,
    radius: f64,
}

#[derive(Clone, Debug)]
pub struct SyntheticDem {
    width: usize,
    height: usize,
    dtype: DType,
    seed: u64,
    nodata_blobs: bool,
    depressions: bool,
    feature_len: f64,
    relief: Fbm<Perlin>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cell_hash(seed: u64, a: i64, b: i64) -> u64 {
    splitmix(splitmix(seed ^ (a as u64).wrapping_mul(0x100_0000_01B3)) ^ (b as u64))
}

pub fn default_nodata(dtype: DType) -> f64 {
    match dtype {
        DType::I16 => i16::MIN as f64,
        _ => -9999.0,
    }
}

impl SyntheticDem {
    pub fn new(width: usize, height: usize, dtype: DType, seed: u64) -> Self {
        let relief = Fbm::<Perlin>::new(splitmix(seed) as u32)
            .set_octaves(5)
            .set_persistence(0.5);
        SyntheticDem {
            width,
            height,
            dtype,
            seed,
            nodata_blobs: true,
            depressions: true,
            feature_len: 40.0,
            relief,
        }
    }

    pub fn with_nodata(mut self, on: bool) -> Self {
        self.nodata_blobs = on;
        self
    }

    pub fn with_depressions(mut self, on: bool) -> Self {
        self.depressions = on;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn nodata(&self) -> f64 {
        default_nodata(self.dtype)
    }

    fn block_features(&self, by: i64, bx: i64) -> (Vec<Bowl>, Option<Blob>) {
        let mut rng = ChaCha8Rng::seed_from_u64(cell_hash(self.seed, by, bx));
        let origin = |rng: &mut ChaCha8Rng| {
            (
                (by * BLOCK) as f64 + rng.gen_range(0.0..BLOCK as f64),
                (bx * BLOCK) as f64 + rng.gen_range(0.0..BLOCK as f64),
            )
        };
        let mut bowls = Vec::new();
        if self.depressions {
            for _ in 0..rng.gen_range(1..=3) {
                let (row, col) = origin(&mut rng);
                let radius = rng.gen_range(4.0..MAX_REACH as f64);
                let depth = rng.gen_range(10.0..60.0);
                bowls.push(Bowl {
                    row,
                    col,
                    radius,
                    depth,
                });
                // A smaller, deeper bowl nested inside the first.
                if rng.gen_bool(0.5) {
                    bowls.push(Bowl {
                        row: row + rng.gen_range(-2.0..2.0),
                        col: col + rng.gen_range(-2.0..2.0),
                        radius: radius / 3.0,
                        depth: depth / 2.0,
                    });
                }
            }
        }
        let blob = (self.nodata_blobs && rng.gen_bool(0.35)).then(|| {
            let (row, col) = origin(&mut rng);
            Blob {
                row,
                col,
                radius: rng.gen_range(1.5..8.0),
            }
        });
        (bowls, blob)
    }

    fn quantize(&self, z: f64) -> f64 {
        match self.dtype {
            DType::I16 => z.round().clamp(i16::MIN as f64 + 1.0, i16::MAX as f64),
            DType::I32 => (z * 10.0).round(),
            DType::F32 => z as f32 as f64,
            DType::F64 => z,
        }
    }

    /// Render the `width`×`height` window whose top-left is (`row0`,`col0`).
    pub fn window(&self, row0: usize, col0: usize, width: usize, height: usize) -> Grid {
        let mut raw = vec![0.0f64; width * height];
        let mut hole = vec![false; width * height];
        for r in 0..height {
            for c in 0..width {
                let (gr, gc) = ((row0 + r) as f64, (col0 + c) as f64);
                let base = 400.0
                    + 250.0
                        * self
                            .relief
                            .get([gc / self.feature_len, gr / self.feature_len]);
                let jitter = (cell_hash(self.seed, (row0 + r) as i64, (col0 + c) as i64) >> 40)
                    as f64
                    / (1u64 << 24) as f64;
                raw[r * width + c] = base + 3.0 * jitter;
            }
        }

        let (r0, c0) = (row0 as i64, col0 as i64);
        let (r1, c1) = (r0 + height as i64, c0 + width as i64);
        let blocks = |lo: i64, hi: i64| {
            (lo - MAX_REACH).div_euclid(BLOCK)..=(hi + MAX_REACH).div_euclid(BLOCK)
        };
        for by in blocks(r0, r1) {
            for bx in blocks(c0, c1) {
                let (bowls, blob) = self.block_features(by, bx);
                for b in bowls {
                    let rr = (b.row - b.radius).floor().max(r0 as f64) as i64
                        ..=(b.row + b.radius).ceil().min((r1 - 1) as f64) as i64;
                    for gr in rr {
                        let cr = (b.col - b.radius).floor().max(c0 as f64) as i64
                            ..=(b.col + b.radius).ceil().min((c1 - 1) as f64) as i64;
                        for gc in cr {
                            let d =
                                ((gr as f64 - b.row).powi(2) + (gc as f64 - b.col).powi(2)).sqrt();
                            if d < b.radius {
                                let i = (gr - r0) as usize * width + (gc - c0) as usize;
                                raw[i] -= b.depth * (1.0 - d / b.radius);
                            }
                        }
                    }
                }
                if let Some(b) = blob {
                    for gr in r0.max((b.row - b.radius).floor() as i64)
                        ..r1.min((b.row + b.radius).ceil() as i64 + 1)
                    {
                        for gc in c0.max((b.col - b.radius).floor() as i64)
                            ..c1.min((b.col + b.radius).ceil() as i64 + 1)
                        {
                            if (gr as f64 - b.row).powi(2) + (gc as f64 - b.col).powi(2)
                                <= b.radius * b.radius
                            {
                                hole[(gr - r0) as usize * width + (gc - c0) as usize] = true;
                            }
                        }
                    }
                }
            }
        }

        let nodata = self.nodata();
        let data = raw
            .into_iter()
            .zip(hole)
            .map(|(z, h)| if h { nodata } else { self.quantize(z) })
            .collect();
        Grid::new(width, height, self.dtype, nodata, data)
            .expect("synthetic values fit their dtype")
    }

    pub fn render(&self) -> Grid {
        self.window(0, 0, self.width, self.height)
    }
}
