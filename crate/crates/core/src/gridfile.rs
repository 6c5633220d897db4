//! Real grid fields and their file format: a text header line
//! `GRID <rank> <d_1> .. <d_rank>` followed by the values in row-major
//! order as little-endian `f64`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &str = "GRID";

/// Dense real field on a rectangular grid, row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || len != data.len() {
            return Err(Error::Shape(format!("grid dims {:?} do not match {} values", dims, data.len())));
        }
        Ok(Grid { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Grid { dims: dims.to_vec(), data: vec![0.0; dims.iter().product()] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = format!("{MAGIC} {}", self.dims.len());
        for d in &self.dims {
            header.push_str(&format!(" {d}"));
        }
        header.push('\n');
        w.write_all(header.as_bytes())?;
        let mut bytes = Vec::with_capacity(8 * self.data.len());
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut words = header.split_whitespace();
        if words.next() != Some(MAGIC) {
            return Err(Error::Parse("grid file does not start with GRID".into()));
        }
        let parse = |w: Option<&str>| -> Result<usize> {
            w.and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse("bad grid header".into()))
        };
        let rank = parse(words.next())?;
        let dims = (0..rank).map(|_| parse(words.next())).collect::<Result<Vec<_>>>()?;
        if words.next().is_some() {
            return Err(Error::Parse("grid header has extra fields".into()));
        }
        let len: usize = dims.iter().product();
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * len {
            return Err(Error::Parse(format!("grid payload has {} bytes, expected {}", bytes.len(), 8 * len)));
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        Grid::new(dims, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_from(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(vec![2, 1], vec![1.0, -0.5]).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert!(buf.starts_with(b"GRID 2 2 1\n"));
        assert_eq!(buf.len(), 11 + 16);
        assert_eq!(&buf[11..19], &1.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_truncated() {
        let mut buf = b"GRID 1 3\n".to_vec();
        buf.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(Grid::read_from(&buf[..]).is_err());
        assert!(Grid::read_from(&b"GRIX 1 1\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(dims in prop::collection::vec(1usize..5, 1..4), seed in any::<u64>()) {
            let len: usize = dims.iter().product();
            let data: Vec<f64> = (0..len).map(|k| f64::from_bits(seed.wrapping_mul(k as u64 + 1) >> 2)).collect();
            let g = Grid::new(dims, data).unwrap();
            let mut buf = Vec::new();
            g.write_to(&mut buf).unwrap();
            let back = Grid::read_from(&buf[..]).unwrap();
            prop_assert_eq!(back.dims, g.dims);
            prop_assert!(back.data.iter().zip(&g.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
