//! Minimum-Dirichlet-energy right inverse of the MAC divergence on a set of
//! active cells.
//!
//! Unknowns live on faces whose two neighbouring cells are both active; all
//! other faces are zero. With `K` the 5-point Laplacian on the face unknowns
//! (zero padding) and `D` the integer divergence, the minimiser of
//! `|grad v|^2` under `div v = f` is `v = -h K^{-1} D^T p` where
//! `D K^{-1} D^T p = -f`. The Schur system is independent of `h` and is solved
//! by conjugate gradients on the mean-zero subspace.

use std::collections::VecDeque;

use super::banded::{BandedCholesky, BandedMatrix};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
pub(crate) const MAX_ITERATIONS: usize = 5000;

/// Rectangular window of `nx * ny` cells with an activity mask (`j * nx + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct CellPattern {
    pub nx: usize,
    pub ny: usize,
    pub active: Vec<bool>,
}

impl CellPattern {
    pub fn full(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            active: vec![true; nx * ny],
        }
    }

    #[inline]
    fn is_active(&self, i: usize, j: usize) -> bool {
        self.active[j * self.nx + i]
    }
}

/// Factorised saddle-point operator for one [`CellPattern`].
#[derive(Debug)]
pub struct DivSolver {
    pattern: CellPattern,
    cells: Vec<usize>,
    cell_map: Vec<usize>,
    u_map: Vec<usize>,
    v_map: Vec<usize>,
    nu: usize,
    nv: usize,
    ku: Option<BandedCholesky>,
    kv: Option<BandedCholesky>,
}

/// Unit-spacing solution: multiply by the cell width to get velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitSolution {
    /// Values on all `(nx + 1) * ny` x-faces of the window.
    pub u: Vec<f64>,
    /// Values on all `nx * (ny + 1)` y-faces of the window.
    pub v: Vec<f64>,
    /// `sqrt(sum (D v - f)^2)` over active cells.
    pub residual: f64,
    pub iterations: usize,
}

fn laplacian(
    count: usize,
    map: &[usize],
    stride: usize,
    rows: usize,
) -> Result<Option<BandedCholesky>> {
    if count == 0 {
        return Ok(None);
    }
    let cols = stride;
    let mut bw = 0;
    for j in 0..rows {
        for i in 0..cols {
            let a = map[j * stride + i];
            if a == NONE {
                continue;
            }
            if i > 0 && map[j * stride + i - 1] != NONE {
                bw = bw.max(a - map[j * stride + i - 1]);
            }
            if j > 0 && map[(j - 1) * stride + i] != NONE {
                bw = bw.max(a - map[(j - 1) * stride + i]);
            }
        }
    }
    let mut k = BandedMatrix::zeros(count, bw);
    for j in 0..rows {
        for i in 0..cols {
            let a = map[j * stride + i];
            if a == NONE {
                continue;
            }
            k.add(a, a, 4.0);
            if i > 0 && map[j * stride + i - 1] != NONE {
                k.add(a, map[j * stride + i - 1], -1.0);
            }
            if j > 0 && map[(j - 1) * stride + i] != NONE {
                k.add(a, map[(j - 1) * stride + i], -1.0);
            }
        }
    }
    Ok(Some(k.cholesky()?))
}

impl DivSolver {
    pub fn new(pattern: CellPattern) -> Result<Self> {
        let (nx, ny) = (pattern.nx, pattern.ny);
        let mut cells = Vec::new();
        let mut cell_map = vec![NONE; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                if pattern.is_active(i, j) {
                    cell_map[j * nx + i] = cells.len();
                    cells.push(j * nx + i);
                }
            }
        }
        let mut u_map = vec![NONE; (nx + 1) * ny];
        let mut nu = 0;
        for j in 0..ny {
            for i in 1..nx {
                if pattern.is_active(i - 1, j) && pattern.is_active(i, j) {
                    u_map[j * (nx + 1) + i] = nu;
                    nu += 1;
                }
            }
        }
        let mut v_map = vec![NONE; nx * (ny + 1)];
        let mut nv = 0;
        for j in 1..ny {
            for i in 0..nx {
                if pattern.is_active(i, j - 1) && pattern.is_active(i, j) {
                    v_map[j * nx + i] = nv;
                    nv += 1;
                }
            }
        }
        let solver = Self {
            ku: laplacian(nu, &u_map, nx + 1, ny)?,
            kv: laplacian(nv, &v_map, nx, ny + 1)?,
            pattern,
            cells,
            cell_map,
            u_map,
            v_map,
            nu,
            nv,
        };
        let components = solver.components();
        if components != 1 {
            return Err(Error::Domain(format!(
                "active cells form {components} face-connected components; need exactly one"
            )));
        }
        Ok(solver)
    }

    pub fn pattern(&self) -> &CellPattern {
        &self.pattern
    }

    pub fn active_cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn unknowns(&self) -> usize {
        self.nu + self.nv
    }

    fn components(&self) -> usize {
        let nx = self.pattern.nx;
        let mut seen = vec![false; self.cells.len()];
        let mut count = 0;
        for start in 0..self.cells.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(k) = queue.pop_front() {
                let c = self.cells[k];
                let (i, j) = (c % nx, c / nx);
                let mut push = |face_open: bool, other: usize| {
                    if face_open && !seen[other] {
                        seen[other] = true;
                        queue.push_back(other);
                    }
                };
                if i > 0 {
                    push(self.u_map[j * (nx + 1) + i] != NONE, self.cell_map[c - 1]);
                }
                if i + 1 < nx {
                    push(self.u_map[j * (nx + 1) + i + 1] != NONE, self.cell_map[c + 1]);
                }
                if j > 0 {
                    push(self.v_map[j * nx + i] != NONE, self.cell_map[c - nx]);
                }
                if j + 1 < self.pattern.ny {
                    push(self.v_map[(j + 1) * nx + i] != NONE, self.cell_map[c + nx]);
                }
            }
        }
        count
    }

    /// `D^T p` split into the two face systems.
    fn grad_t(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nx = self.pattern.nx;
        let mut gu = vec![0.0; self.nu];
        let mut gv = vec![0.0; self.nv];
        for j in 0..self.pattern.ny {
            for i in 1..nx {
                let a = self.u_map[j * (nx + 1) + i];
                if a != NONE {
                    let left = self.cell_map[j * nx + i - 1];
                    let right = self.cell_map[j * nx + i];
                    gu[a] = p[left] - p[right];
                }
            }
        }
        for j in 1..self.pattern.ny {
            for i in 0..nx {
                let a = self.v_map[j * nx + i];
                if a != NONE {
                    let below = self.cell_map[(j - 1) * nx + i];
                    let above = self.cell_map[j * nx + i];
                    gv[a] = p[below] - p[above];
                }
            }
        }
        (gu, gv)
    }

    /// `D w` on active cells.
    fn div(&self, wu: &[f64], wv: &[f64]) -> Vec<f64> {
        let nx = self.pattern.nx;
        let at_u = |i: usize, j: usize| {
            let a = self.u_map[j * (nx + 1) + i];
            if a == NONE {
                0.0
            } else {
                wu[a]
            }
        };
        let at_v = |i: usize, j: usize| {
            let a = self.v_map[j * nx + i];
            if a == NONE {
                0.0
            } else {
                wv[a]
            }
        };
        self.cells
            .iter()
            .map(|&c| {
                let (i, j) = (c % nx, c / nx);
                at_u(i + 1, j) - at_u(i, j) + at_v(i, j + 1) - at_v(i, j)
            })
            .collect()
    }

    /// `K^{-1} D^T p`
    fn velocity(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut gu, mut gv) = self.grad_t(p);
        if let Some(k) = &self.ku {
            k.solve_in_place(&mut gu);
        }
        if let Some(k) = &self.kv {
            k.solve_in_place(&mut gv);
        }
        (gu, gv)
    }

    fn schur(&self, p: &[f64]) -> Vec<f64> {
        let (wu, wv) = self.velocity(p);
        self.div(&wu, &wv)
    }

    /// Solves `D w = f` for data on active cells (in [`Self::active_cells`]
    /// order), stopping once `sqrt(sum r^2) <= target`.
    pub fn solve_unit(&self, f: &[f64], target: f64) -> Result<UnitSolution> {
        assert_eq!(f.len(), self.cells.len());
        let m = self.cells.len() as f64;
        let project = |x: &mut [f64]| {
            let mean = x.iter().sum::<f64>() / m;
            x.iter_mut().for_each(|v| *v -= mean);
        };
        let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut p = vec![0.0; f.len()];
        let mut r: Vec<f64> = f.iter().map(|v| -v).collect();
        project(&mut r);
        let mut d = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let mut iterations = 0;
        while rr.sqrt() > target {
            if iterations >= MAX_ITERATIONS {
                return Err(Error::SolverStall {
                    iterations,
                    residual: rr.sqrt(),
                });
            }
            let mut sd = self.schur(&d);
            project(&mut sd);
            let dsd: f64 = d.iter().zip(&sd).map(|(a, b)| a * b).sum();
            if !(dsd > 0.0) {
                break;
            }
            let a = rr / dsd;
            for k in 0..p.len() {
                p[k] += a * d[k];
                r[k] -= a * sd[k];
            }
            // periodic true-residual refresh keeps the recursion honest
            if iterations % 50 == 49 {
                let sp = self.schur(&p);
                for k in 0..r.len() {
                    r[k] = -f[k] - sp[k];
                }
                project(&mut r);
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..d.len() {
                d[k] = r[k] + beta * d[k];
            }
            iterations += 1;
        }
        let (wu, wv) = self.velocity(&p);
        let dw = self.div(&wu, &wv);
        let residual = norm(&dw.iter().zip(f).map(|(a, b)| -a - b).collect::<Vec<_>>());
        let nx = self.pattern.nx;
        let mut u = vec![0.0; (nx + 1) * self.pattern.ny];
        let mut v = vec![0.0; nx * (self.pattern.ny + 1)];
        for (idx, a) in self.u_map.iter().enumerate() {
            if *a != NONE {
                u[idx] = -wu[*a];
            }
        }
        for (idx, a) in self.v_map.iter().enumerate() {
            if *a != NONE {
                v[idx] = -wv[*a];
            }
        }
        Ok(UnitSolution {
            u,
            v,
            residual,
            iterations,
        })
    }
}
