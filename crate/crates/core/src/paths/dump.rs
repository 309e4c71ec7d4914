//! Binary dump of sampled paths for replay.
//!
//! Layout, all little-endian: the 8-byte magic `NLPATH01`, a `u32` format
//! version, `big_t: f64`, `n_steps: u64`, `seed: u64`, `n_paths: u64`, then
//! per path its `u64` index followed by `3·n_steps` increment components.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{BrownianPath, PathGrid};

const MAGIC: &[u8; 8] = b"NLPATH01";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a path dump (bad magic)")]
    BadMagic,
    #[error("unsupported dump version {0}")]
    Version(u32),
    #[error("inconsistent dump: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDump {
    pub grid: PathGrid,
    pub seed: u64,
    pub paths: Vec<(u64, BrownianPath)>,
}

pub fn write_paths<W: Write>(
    mut out: W,
    grid: &PathGrid,
    seed: u64,
    paths: &[(u64, BrownianPath)],
) -> Result<(), DumpError> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&grid.big_t().to_le_bytes())?;
    out.write_all(&(grid.n_steps() as u64).to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(&(paths.len() as u64).to_le_bytes())?;
    for (index, path) in paths {
        if path.grid() != grid {
            return Err(DumpError::Inconsistent(format!("path {index} has a different grid")));
        }
        out.write_all(&index.to_le_bytes())?;
        for d in path.increments() {
            for c in d {
                out.write_all(&c.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_paths<R: Read>(mut input: R) -> Result<PathDump, DumpError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DumpError::BadMagic);
    }
    let mut v = [0u8; 4];
    input.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(DumpError::Version(version));
    }
    let big_t = read_f64(&mut input)?;
    let n_steps = read_u64(&mut input)? as usize;
    let seed = read_u64(&mut input)?;
    let n_paths = read_u64(&mut input)?;
    let grid = PathGrid::new(big_t, n_steps).map_err(|e| DumpError::Inconsistent(e.to_string()))?;
    let mut paths = Vec::new();
    for _ in 0..n_paths {
        let index = read_u64(&mut input)?;
        let mut inc = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            inc.push([read_f64(&mut input)?, read_f64(&mut input)?, read_f64(&mut input)?]);
        }
        let path = BrownianPath::from_increments(grid, inc).map_err(|e| DumpError::Inconsistent(e.to_string()))?;
        paths.push((index, path));
    }
    Ok(PathDump { grid, seed, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::sample_path;
    use crate::rng::RandomStream;

    #[test]
    fn dump_replays_exactly() {
        let grid = PathGrid::new(1.5, 6).unwrap();
        let paths: Vec<_> = (0..3).map(|i| (i, sample_path(grid, RandomStream::new(42, i)))).collect();
        let mut buf = Vec::new();
        write_paths(&mut buf, &grid, 42, &paths).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 * 8 + 3 * (8 + 6 * 3 * 8));
        let back = read_paths(buf.as_slice()).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.paths, paths);
        buf[0] = b'X';
        assert!(matches!(read_paths(buf.as_slice()), Err(DumpError::BadMagic)));
    }
}
