//! On-disk formats: the `PAQMAT01` binary matrix container, binary PGM (P5)
//! images, mask line lists and small text helpers.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use paq_core::rotator::RotatorEntry;
use paq_core::{Complex64, GridShape, Rotator, SamplingMask};

use crate::error::{CliError, CliResult};

pub const MATRIX_MAGIC: &[u8; 8] = b"PAQMAT01";
/// Only dtype: complex values stored as interleaved little-endian f64 pairs.
pub const DTYPE_COMPLEX_F64: u64 = 1;
pub const MATRIX_HEADER_LEN: usize = 32;

pub fn encode_matrix(m: &DMatrix<Complex64>) -> Vec<u8> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(MATRIX_HEADER_LEN + rows * cols * 16);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&DTYPE_COMPLEX_F64.to_le_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for r in 0..rows {
        for c in 0..cols {
            let z = m[(r, c)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn le_u64(bytes: &[u8]) -> u64 {
    u64::from_le_bytes(bytes.try_into().expect("8-byte slice"))
}

fn le_f64(bytes: &[u8]) -> f64 {
    f64::from_le_bytes(bytes.try_into().expect("8-byte slice"))
}

/// Parses a matrix file image; `origin` only labels errors.
pub fn decode_matrix(bytes: &[u8], origin: &Path) -> CliResult<DMatrix<Complex64>> {
    let bad = |msg: String| CliError::format(origin, msg);
    if bytes.len() < MATRIX_HEADER_LEN {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != MATRIX_MAGIC {
        return Err(bad("not a PAQMAT01 matrix file".into()));
    }
    let dtype = le_u64(&bytes[8..16]);
    if dtype != DTYPE_COMPLEX_F64 {
        return Err(bad(format!("unsupported dtype code {dtype}")));
    }
    let rows = le_u64(&bytes[16..24]);
    let cols = le_u64(&bytes[24..32]);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| bad(format!("dimensions {rows}x{cols} overflow")))?;
    let payload = &bytes[MATRIX_HEADER_LEN..];
    if payload.len() as u64 != expected {
        return Err(bad(format!(
            "payload is {} bytes, expected {expected} for {rows}x{cols}",
            payload.len()
        )));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut data = payload
        .chunks_exact(16)
        .map(|c| Complex64::new(le_f64(&c[..8]), le_f64(&c[8..])));
    // payload is row-major, nalgebra is column-major
    let row_major: Vec<Complex64> = data.by_ref().collect();
    Ok(DMatrix::from_fn(rows, cols, |r, c| row_major[r * cols + c]))
}

pub fn write_matrix(path: &Path, m: &DMatrix<Complex64>) -> CliResult<()> {
    write_bytes(path, &encode_matrix(m))
}

pub fn read_matrix(path: &Path) -> CliResult<DMatrix<Complex64>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_matrix(&bytes, path)
}

/// `Q` as a 3-column matrix: `(n, nnz_per_row, 0)`, `(ε, 0, 0)`,
/// `(seed_lo32, seed_hi32, 0)`, then one `(row, col, value)` per entry.
/// All values are exact in f64.
pub fn rotator_to_matrix(q: &Rotator) -> DMatrix<Complex64> {
    let re = |x: f64| Complex64::new(x, 0.0);
    let entries = q.entries();
    let mut m = DMatrix::from_element(3 + entries.len(), 3, re(0.0));
    m[(0, 0)] = re(q.dim() as f64);
    m[(0, 1)] = re(q.nnz_per_row() as f64);
    m[(1, 0)] = re(q.epsilon());
    m[(2, 0)] = re((q.seed() & 0xFFFF_FFFF) as f64);
    m[(2, 1)] = re((q.seed() >> 32) as f64);
    for (k, e) in entries.iter().enumerate() {
        m[(3 + k, 0)] = re(e.row as f64);
        m[(3 + k, 1)] = re(e.col as f64);
        m[(3 + k, 2)] = re(e.value);
    }
    m
}

pub fn rotator_from_matrix(m: &DMatrix<Complex64>, origin: &Path) -> CliResult<Rotator> {
    let bad = |msg: &str| CliError::format(origin, format!("not a rotator file: {msg}"));
    if m.ncols() != 3 || m.nrows() < 3 {
        return Err(bad("expected a (3 + nnz) x 3 matrix"));
    }
    let index = |v: Complex64| -> CliResult<usize> {
        if v.im != 0.0 || v.re < 0.0 || v.re.fract() != 0.0 || v.re > u32::MAX as f64 * 4.0 {
            return Err(bad("index field is not a small non-negative integer"));
        }
        Ok(v.re as usize)
    };
    let n = index(m[(0, 0)])?;
    let nnz = index(m[(0, 1)])?;
    let eps = m[(1, 0)].re;
    let seed = index(m[(2, 0)])? as u64 | ((index(m[(2, 1)])? as u64) << 32);
    let entries = (3..m.nrows())
        .map(|r| {
            Ok(RotatorEntry {
                row: index(m[(r, 0)])?,
                col: index(m[(r, 1)])?,
                value: m[(r, 2)].re,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Rotator::from_entries(n, eps, nnz, seed, entries)?)
}

pub fn write_rotator(path: &Path, q: &Rotator) -> CliResult<()> {
    write_matrix(path, &rotator_to_matrix(q))
}

pub fn read_rotator(path: &Path) -> CliResult<Rotator> {
    rotator_from_matrix(&read_matrix(path)?, path)
}

/// Grey image with samples in `0..=maxval`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl Pgm {
    /// Samples divided by `maxval`, i.e. in `[0, 1]`.
    pub fn normalized(&self) -> Vec<f64> {
        self.pixels
            .iter()
            .map(|&p| p as f64 / self.maxval as f64)
            .collect()
    }

    pub fn shape(&self) -> CliResult<GridShape> {
        GridShape::new(self.height, self.width)
            .map_err(|e| CliError::Config(format!("PGM image {}x{}: {e}", self.width, self.height)))
    }

    /// Min-max scales `values` into `0..=maxval`; returns the image with the
    /// `(min, max)` that map to `0` and `maxval`. A constant input maps to 0.
    pub fn from_scaled(
        width: usize,
        height: usize,
        values: &[f64],
        maxval: u16,
    ) -> (Self, f64, f64) {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let pixels = values
            .iter()
            .map(|&v| {
                if range > 0.0 {
                    ((v - lo) / range * maxval as f64).round() as u16
                } else {
                    0
                }
            })
            .collect();
        (
            Self {
                width,
                height,
                maxval,
                pixels,
            },
            lo,
            hi,
        )
    }

    /// Quantises values already in `[0, 1]` (clipped) without rescaling.
    pub fn from_unit(width: usize, height: usize, values: &[f64], maxval: u16) -> Self {
        let pixels = values
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * maxval as f64).round() as u16)
            .collect();
        Self {
            width,
            height,
            maxval,
            pixels,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.pixels.iter().map(|&p| p as u8));
        } else {
            for &p in &self.pixels {
                out.extend_from_slice(&p.to_be_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], origin: &Path) -> CliResult<Self> {
        let bad = |msg: String| CliError::format(origin, msg);
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(bad(format!(
                "expected binary PGM (P5), found {:?}",
                fields[0]
            )));
        }
        let num = |s: &str, what: &str| -> CliResult<usize> {
            s.parse().map_err(|_| bad(format!("bad {what} {s:?}")))
        };
        let width = num(&fields[1], "width")?;
        let height = num(&fields[2], "height")?;
        let maxval = num(&fields[3], "maxval")?;
        if maxval == 0 || maxval > 65535 {
            return Err(bad(format!("maxval {maxval} outside 1..=65535")));
        }
        pos += 1; // single whitespace byte before the raster
        let n = width * height;
        let raster = bytes.get(pos..).unwrap_or(&[]);
        let pixels: Vec<u16> = if maxval < 256 {
            if raster.len() < n {
                return Err(bad(format!(
                    "raster has {} bytes, expected {n}",
                    raster.len()
                )));
            }
            raster[..n].iter().map(|&b| b as u16).collect()
        } else {
            if raster.len() < 2 * n {
                return Err(bad(format!(
                    "raster has {} bytes, expected {}",
                    raster.len(),
                    2 * n
                )));
            }
            raster[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        };
        if pixels.iter().any(|&p| p as usize > maxval) {
            return Err(bad("sample exceeds maxval".into()));
        }
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            pixels,
        })
    }
}

pub fn write_pgm(path: &Path, img: &Pgm) -> CliResult<()> {
    write_bytes(path, &img.encode())
}

pub fn read_pgm(path: &Path) -> CliResult<Pgm> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Pgm::decode(&bytes, path)
}

/// Mask line list: two comment lines with the geometry, then one sampled
/// row index per line.
pub fn mask_to_text(mask: &SamplingMask) -> String {
    let shape = mask.shape();
    let mut s = format!(
        "# rows {} cols {}\n# fraction {} center_fraction {} seed {} lines {}\n",
        shape.rows(),
        shape.cols(),
        mask.fraction(),
        mask.center_fraction(),
        mask.seed(),
        mask.lines().len()
    );
    for l in mask.lines() {
        s.push_str(&format!("{l}\n"));
    }
    s
}

/// Reads the line list written by [`mask_to_text`] (only the line indices
/// and grid size are used).
pub fn mask_from_text(text: &str, origin: &Path) -> CliResult<SamplingMask> {
    let bad = |msg: String| CliError::format(origin, msg);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty mask file".into()))?;
    let words: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols) = match words.as_slice() {
        ["#", "rows", r, "cols", c] => (
            r.parse::<usize>()
                .map_err(|_| bad(format!("bad rows {r:?}")))?,
            c.parse::<usize>()
                .map_err(|_| bad(format!("bad cols {c:?}")))?,
        ),
        _ => return Err(bad("missing '# rows R cols C' header".into())),
    };
    let rows_idx = lines
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("bad line index {l:?}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let shape = GridShape::new(rows, cols).map_err(|e| bad(e.to_string()))?;
    SamplingMask::from_lines(shape, &rows_idx).map_err(|e| bad(e.to_string()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_bytes(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use paq_core::linalg::random_complex;

    #[test]
    fn matrix_layout_is_row_major_with_32_byte_header() {
        let m =
            DMatrix::from_row_slice(1, 2, &[Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]);
        let bytes = encode_matrix(&m);
        assert_eq!(bytes.len(), 32 + 2 * 16);
        assert_eq!(&bytes[..8], b"PAQMAT01");
        assert_eq!(le_u64(&bytes[16..24]), 1);
        assert_eq!(le_u64(&bytes[24..32]), 2);
        assert_eq!(le_f64(&bytes[32..40]), 1.0);
        assert_eq!(le_f64(&bytes[48..56]), 3.0);
    }

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let m = DMatrix::from_vec(5, 3, random_complex(15, 2));
        let back = decode_matrix(&encode_matrix(&m), Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn corrupt_matrices_are_rejected() {
        let bytes = encode_matrix(&DMatrix::from_vec(2, 2, random_complex(4, 0)));
        assert!(decode_matrix(&bytes[..40], Path::new("x")).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_matrix(&wrong, Path::new("x")).is_err());
        let mut dtype = bytes;
        dtype[8] = 2;
        assert!(decode_matrix(&dtype, Path::new("x")).is_err());
    }

    #[test]
    fn rotator_round_trip() {
        let q = Rotator::build(40, 0.01, 5, u64::MAX - 3).unwrap();
        let back = rotator_from_matrix(&rotator_to_matrix(&q), Path::new("q")).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn pgm_round_trips_8_and_16_bit() {
        for maxval in [255u16, 65535] {
            let img = Pgm {
                width: 3,
                height: 2,
                maxval,
                pixels: vec![0, 1, 2, maxval, 7, 9],
            };
            assert_eq!(Pgm::decode(&img.encode(), Path::new("p")).unwrap(), img);
        }
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([10, 20]);
        let img = Pgm::decode(&bytes, Path::new("p")).unwrap();
        assert_eq!(img.pixels, vec![10, 20]);
        assert!(Pgm::decode(b"P2\n1 1\n255\n0", Path::new("p")).is_err());
    }

    #[test]
    fn scaled_pgm_records_range() {
        let (img, lo, hi) = Pgm::from_scaled(2, 1, &[-1.0, 3.0], 255);
        assert_eq!((lo, hi), (-1.0, 3.0));
        assert_eq!(img.pixels, vec![0, 255]);
        let (flat, _, _) = Pgm::from_scaled(2, 1, &[0.5, 0.5], 255);
        assert_eq!(flat.pixels, vec![0, 0]);
    }

    #[test]
    fn mask_text_round_trip() {
        let mask =
            paq_core::transforms::make_mask(GridShape::new(32, 16).unwrap(), 0.25, 0.0625, 4)
                .unwrap();
        let back = mask_from_text(&mask_to_text(&mask), Path::new("m")).unwrap();
        assert_eq!(back.lines(), mask.lines());
        assert_eq!(back.shape(), mask.shape());
    }
}
