//! Flat little-endian snapshot files.
//!
//! Layout: `n: u64`, `L: f64`, `eps: f64`, `t: f64`, then `rho` (`n*n`
//! values, row-major, `j*n + i`), then the x-momentum on vertical faces
//! (`n*(n+1)`, `j*(n+1) + i`), then the y-momentum on horizontal faces
//! (`(n+1)*n`, `j*n + i`). All values are `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::SolverState;
use crate::error::{Error, Result};
use crate::grid::{FaceField, Geometry, Grid2D, ScalarField};

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub half_width: f64,
    pub eps: f64,
    pub t: f64,
    pub rho: Vec<f64>,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(grid: &Grid2D, state: &SolverState) -> Self {
        Self {
            n: grid.n(),
            half_width: grid.domain.half_width,
            eps: grid.eps(),
            t: state.t,
            rho: state.rho.values.clone(),
            mx: state.m.u.clone(),
            my: state.m.v.clone(),
        }
    }

    pub fn into_state(self) -> SolverState {
        let geom = Geometry::new(self.n, self.half_width);
        SolverState {
            rho: ScalarField {
                geom,
                values: self.rho,
            },
            m: FaceField {
                geom,
                u: self.mx,
                v: self.my,
            },
            t: self.t,
        }
    }

    pub fn byte_len(n: usize) -> usize {
        8 * (4 + n * n + 2 * n * (n + 1))
    }
}

pub fn write_snapshot(path: &Path, grid: &Grid2D, state: &SolverState) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(&(grid.n() as u64).to_le_bytes())?;
    put(&grid.domain.half_width.to_le_bytes())?;
    put(&grid.eps().to_le_bytes())?;
    put(&state.t.to_le_bytes())?;
    for v in state.rho.values.iter().chain(&state.m.u).chain(&state.m.v) {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Io {
        path: path.display().to_string(),
        reason,
    };
    if bytes.len() < 32 {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().unwrap() };
    let n = u64::from_le_bytes(word(0)) as usize;
    if n == 0 || n > 1 << 16 {
        return Err(bad(format!("implausible grid size {n}")));
    }
    if bytes.len() != Snapshot::byte_len(n) {
        return Err(bad(format!(
            "expected {} bytes for n = {n}, found {}",
            Snapshot::byte_len(n),
            bytes.len()
        )));
    }
    let f = |k: usize| f64::from_le_bytes(word(k));
    let body = |start: usize, len: usize| (start..start + len).map(f).collect::<Vec<_>>();
    let nr = n * n;
    let nf = n * (n + 1);
    Ok(Snapshot {
        n,
        half_width: f(1),
        eps: f(2),
        t: f(3),
        rho: body(4, nr),
        mx: body(4 + nr, nf),
        my: body(4 + nr + nf, nf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, DomainSpec};
    use crate::solver::{InitialCondition, PhysParams, Solver};

    #[test]
    fn round_trip_is_bitwise() {
        let g = make_grid(DomainSpec::new(0.5, 0.06).unwrap(), 32).unwrap();
        let s = Solver::new(g.clone(), PhysParams::new(0.01, 0.0, 3.0).unwrap());
        let st = s.init_state(&InitialCondition::vortex()).unwrap();
        let (st, _, _) = s.advance(&st, 0.01, 0.4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        write_snapshot(&p, &g, &st).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, Snapshot::byte_len(32));
        let back = read_snapshot(&p).unwrap();
        assert_eq!(back.eps, 0.06);
        assert_eq!(back.into_state(), st);
    }

    #[test]
    fn rejects_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, [0u8; 40]).unwrap();
        assert!(read_snapshot(&p).is_err());
        assert!(read_snapshot(&dir.path().join("missing.bin")).is_err());
    }
}
