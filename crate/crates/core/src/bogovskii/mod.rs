//! Right inverses of the divergence with zero trace.
//!
//! * [`FullOperator`]: `B_Omega` on the whole square.
//! * [`AnnulusOperator`]: `B_eps` on the cells around the hole, solved in the
//!   reference coordinates `y = x / eps` and rescaled by
//!   `B_eps[f](x) = eps B_1[f(eps .)](x / eps)`.
//! * [`restriction`]: `R_eps F = eta_eps F + B_eps[div((1 - eta_eps) F) - mean]`.
//! * [`PerforatedOperator`]: `R_eps o B_Omega o E_eps` with `E_eps` the
//!   extension by zero into the hole.
//!
//! All velocities are staggered [`FaceField`]s.

mod banded;
mod saddle;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use banded::{BandedCholesky, BandedMatrix};
pub use saddle::{CellPattern, DivSolver, UnitSolution};

use crate::cutoff::{eta_smooth, mollifier_g, AlphaPolicy};
use crate::error::{Error, Result};
use crate::grid::{CellKind, FaceField, Geometry, Grid2D, Point, ScalarField};

/// Result of one divergence solve.
#[derive(Clone, Debug, PartialEq)]
pub struct DivSolve {
    pub v: FaceField,
    /// `L^2` norm of `div v - f` over the cells where the equation is posed.
    pub residual: f64,
    pub iterations: usize,
}

/// Rejects data whose mean over `cells` is not zero relative to its `L^2`
/// norm.
fn check_mean(values: &[f64], cells: &[usize], cell_area: f64) -> Result<()> {
    let sum: f64 = cells.iter().map(|&c| values[c]).sum();
    let norm = (cells.iter().map(|&c| values[c] * values[c]).sum::<f64>() * cell_area).sqrt();
    let mean = sum / cells.len().max(1) as f64;
    if mean.abs() > 1e-12 * norm.max(f64::MIN_POSITIVE) && mean != 0.0 {
        return Err(Error::NonzeroMean { mean, norm });
    }
    Ok(())
}

/// Absolute stopping level for the unit Schur residual: the `L^2` residual
/// ends below `tol * min(1, ||f||_2)`.
fn unit_target(f: &[f64], h: f64, tol: f64) -> f64 {
    let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt() * h;
    tol * norm.min(1.0) / h
}

/// `B_Omega` for the square of `geom`.
#[derive(Debug)]
pub struct FullOperator {
    pub geom: Geometry,
    solver: DivSolver,
}

impl FullOperator {
    pub fn new(geom: Geometry) -> Result<Self> {
        Ok(Self {
            geom,
            solver: DivSolver::new(CellPattern::full(geom.n, geom.n))?,
        })
    }

    pub fn apply(&self, f: &ScalarField, tol: f64) -> Result<DivSolve> {
        let cells = self.solver.active_cells();
        check_mean(&f.values, cells, self.geom.cell_area())?;
        let h = self.geom.h;
        let data: Vec<f64> = cells.iter().map(|&c| f.values[c]).collect();
        let sol = self.solver.solve_unit(&data, unit_target(&data, h, tol))?;
        let mut v = FaceField::zeros(self.geom);
        v.u = sol.u;
        v.v = sol.v;
        v.scale(h);
        Ok(DivSolve {
            v,
            residual: sol.residual * h,
            iterations: sol.iterations,
        })
    }
}

/// Cells of `grid` on which the annulus problem is posed: fluid cells with a
/// face midpoint inside `B_{2 eps}`.
pub fn annulus_cells(grid: &Grid2D) -> Vec<usize> {
    let eps = grid.eps();
    let g = grid.geom;
    let r2 = 4.0 * eps * eps;
    let inside = |p: Point| p[0] * p[0] + p[1] * p[1] < r2;
    (0..g.cells())
        .filter(|&c| {
            let (i, j) = g.coords(c);
            grid.mask[c] == CellKind::Fluid
                && (inside(g.u_face(i, j))
                    || inside(g.u_face(i + 1, j))
                    || inside(g.v_face(i, j))
                    || inside(g.v_face(i, j + 1)))
        })
        .collect()
}

/// `B_eps` on the discrete annulus around the hole of a grid.
#[derive(Debug)]
pub struct AnnulusOperator {
    pub eps: f64,
    pub geom: Geometry,
    /// Lower-left cell of the window.
    pub origin: (usize, usize),
    solver: DivSolver,
}

impl AnnulusOperator {
    pub fn new(grid: &Grid2D) -> Result<Self> {
        let eps = grid.eps();
        if !(eps > 0.0) {
            return Err(Error::param("eps", "annulus operator needs a hole"));
        }
        let cells = annulus_cells(grid);
        let g = grid.geom;
        let (mut i0, mut j0, mut i1, mut j1) = (usize::MAX, usize::MAX, 0, 0);
        for &c in &cells {
            let (i, j) = g.coords(c);
            i0 = i0.min(i);
            j0 = j0.min(j);
            i1 = i1.max(i);
            j1 = j1.max(j);
        }
        if cells.is_empty() || i0 == 0 || j0 == 0 || i1 + 1 >= g.n || j1 + 1 >= g.n {
            return Err(Error::Domain(format!(
                "annulus of radius {eps} does not fit strictly inside the grid"
            )));
        }
        let (nx, ny) = (i1 - i0 + 1, j1 - j0 + 1);
        let mut pattern = CellPattern {
            nx,
            ny,
            active: vec![false; nx * ny],
        };
        for &c in &cells {
            let (i, j) = g.coords(c);
            pattern.active[(j - j0) * nx + (i - i0)] = true;
        }
        Ok(Self {
            eps,
            geom: g,
            origin: (i0, j0),
            solver: DivSolver::new(pattern)?,
        })
    }

    /// Spacing of the reference lattice `y = x / eps`.
    pub fn reference_spacing(&self) -> f64 {
        self.geom.h / self.eps
    }

    /// Physical cell indices of the annulus, in solver order.
    pub fn cells(&self) -> Vec<usize> {
        let nx = self.solver.pattern().nx;
        let (i0, j0) = self.origin;
        self.solver
            .active_cells()
            .iter()
            .map(|&w| self.geom.index(i0 + w % nx, j0 + w / nx))
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.solver.active_cells().len() as f64 * self.geom.cell_area()
    }

    /// `B_1[g]` on the reference lattice, as face values of the window
    /// (x-faces, y-faces), together with the reference residual.
    pub fn apply_reference(&self, g: &[f64], tol: f64) -> Result<UnitSolution> {
        let hr = self.reference_spacing();
        let cells: Vec<usize> = (0..g.len()).collect();
        check_mean(g, &cells, hr * hr)?;
        let mut sol = self.solver.solve_unit(g, unit_target(g, hr, tol))?;
        sol.u.iter_mut().chain(sol.v.iter_mut()).for_each(|x| *x *= hr);
        sol.residual *= hr;
        Ok(sol)
    }

    /// `B_eps[f]` for `f` given on the physical grid (only annulus cells are
    /// read).
    pub fn apply(&self, f: &ScalarField, tol: f64) -> Result<DivSolve> {
        let cells = self.cells();
        let g: Vec<f64> = cells.iter().map(|&c| f.values[c]).collect();
        let sol = self.apply_reference(&g, tol)?;
        let mut v = FaceField::zeros(self.geom);
        let pat = self.solver.pattern();
        let (i0, j0) = self.origin;
        for jw in 0..pat.ny {
            for iw in 0..=pat.nx {
                let val = sol.u[jw * (pat.nx + 1) + iw];
                if val != 0.0 {
                    let k = v.ui(i0 + iw, j0 + jw);
                    v.u[k] = self.eps * val;
                }
            }
        }
        for jw in 0..=pat.ny {
            for iw in 0..pat.nx {
                let val = sol.v[jw * pat.nx + iw];
                if val != 0.0 {
                    let k = v.vi(i0 + iw, j0 + jw);
                    v.v[k] = self.eps * val;
                }
            }
        }
        Ok(DivSolve {
            v,
            residual: sol.residual * self.eps,
            iterations: sol.iterations,
        })
    }
}

/// The fixed profile of the restriction: 0 on `[0, 1]`, 1 on `[2, inf)`,
/// the mollifier step rescaled to `[1, 2]` in between.
pub fn restriction_profile(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        1.0 - mollifier_g(1.1 + 0.1 * (s - 1.0))
    }
}

fn touches_hole_u(grid: &Grid2D, i: usize, j: usize) -> bool {
    let n = grid.n();
    (i > 0 && grid.kind(i - 1, j) == CellKind::Hole) || (i < n && grid.kind(i, j) == CellKind::Hole)
}

fn touches_hole_v(grid: &Grid2D, i: usize, j: usize) -> bool {
    let n = grid.n();
    (j > 0 && grid.kind(i, j - 1) == CellKind::Hole) || (j < n && grid.kind(i, j) == CellKind::Hole)
}

/// `eta_eps` sampled on faces, forced to zero on faces touching the hole.
pub fn restriction_cutoff(grid: &Grid2D) -> FaceField {
    let eps = grid.eps();
    let g = grid.geom;
    let mut eta = FaceField::from_fn(g, |x| {
        let s = x[0].hypot(x[1]) / eps;
        let e = restriction_profile(s);
        [e, e]
    });
    let n = g.n;
    for j in 0..n {
        for i in 0..=n {
            if touches_hole_u(grid, i, j) {
                let k = eta.ui(i, j);
                eta.u[k] = 0.0;
            }
        }
    }
    for j in 0..=n {
        for i in 0..n {
            if touches_hole_v(grid, i, j) {
                let k = eta.vi(i, j);
                eta.v[k] = 0.0;
            }
        }
    }
    eta
}

/// `R_eps F = eta_eps F + B_eps[div((1 - eta_eps) F) - <<.>>]`, with `<<.>>`
/// the mean over the annulus cells. Returns the field and the annulus solve.
pub fn restriction(
    grid: &Grid2D,
    annulus: &AnnulusOperator,
    field: &FaceField,
    tol: f64,
) -> Result<(FaceField, DivSolve)> {
    let eta = restriction_cutoff(grid);
    let mut inner = field.clone();
    let mut out = field.clone();
    for k in 0..field.u.len() {
        inner.u[k] *= 1.0 - eta.u[k];
        out.u[k] *= eta.u[k];
    }
    for k in 0..field.v.len() {
        inner.v[k] *= 1.0 - eta.v[k];
        out.v[k] *= eta.v[k];
    }
    let mut datum = inner.divergence();
    let cells = annulus.cells();
    let mean = cells.iter().map(|&c| datum.values[c]).sum::<f64>() / cells.len() as f64;
    let mut masked = ScalarField::zeros(grid.geom);
    for &c in &cells {
        masked.values[c] = datum.values[c] - mean;
    }
    datum = masked;
    let corr = annulus.apply(&datum, tol)?;
    for k in 0..out.u.len() {
        out.u[k] += corr.v.u[k];
    }
    for k in 0..out.v.len() {
        out.v[k] += corr.v.v[k];
    }
    Ok((out, corr))
}

/// `B` on the perforated square.
#[derive(Debug)]
pub struct PerforatedOperator {
    pub grid: Grid2D,
    full: Arc<FullOperator>,
    annulus: Option<AnnulusOperator>,
}

impl PerforatedOperator {
    /// `full` must be built for the same geometry as `grid`.
    pub fn new(grid: Grid2D, full: Arc<FullOperator>) -> Result<Self> {
        if full.geom != grid.geom {
            return Err(Error::Domain("full operator built for another grid".into()));
        }
        let annulus = if grid.eps() > 0.0 {
            Some(AnnulusOperator::new(&grid)?)
        } else {
            None
        };
        Ok(Self {
            grid,
            full,
            annulus,
        })
    }

    pub fn annulus(&self) -> Option<&AnnulusOperator> {
        self.annulus.as_ref()
    }

    fn fluid_cells(&self) -> Vec<usize> {
        (0..self.grid.geom.cells())
            .filter(|&c| self.grid.mask[c] == CellKind::Fluid)
            .collect()
    }

    /// Divergence residual of `v` against `f` on fluid cells.
    pub fn residual(&self, v: &FaceField, f: &ScalarField) -> f64 {
        let div = v.divergence();
        let s: f64 = self
            .fluid_cells()
            .iter()
            .map(|&c| (div.values[c] - f.values[c]).powi(2))
            .sum();
        (s * self.grid.geom.cell_area()).sqrt()
    }

    pub fn apply(&self, f: &ScalarField, tol: f64) -> Result<DivSolve> {
        check_mean(&f.values, &self.fluid_cells(), self.grid.geom.cell_area())?;
        let extended = f.extend_by_zero(&self.grid);
        // split the budget between the two solves
        let outer = self.full.apply(&extended, 0.5 * tol)?;
        let (v, iterations) = match &self.annulus {
            Some(a) => {
                let (v, corr) = restriction(&self.grid, a, &outer.v, 0.5 * tol)?;
                (v, outer.iterations + corr.iterations)
            }
            None => (outer.v, outer.iterations),
        };
        let residual = self.residual(&v, f);
        Ok(DivSolve {
            v,
            residual,
            iterations,
        })
    }
}

/// Fluid-cell mean removed, hole cells zero.
pub fn mean_free_on_fluid(grid: &Grid2D, f: &ScalarField) -> ScalarField {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (v, k) in f.values.iter().zip(&grid.mask) {
        if *k == CellKind::Fluid {
            sum += v;
            count += 1;
        }
    }
    let mean = sum / count.max(1) as f64;
    let mut out = f.extend_by_zero(grid);
    for (v, k) in out.values.iter_mut().zip(&grid.mask) {
        if *k == CellKind::Fluid {
            *v -= mean;
        }
    }
    out
}

/// One row of the uniformity table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityRow {
    pub eps: f64,
    /// `||B f||_{W^{1,p}} / ||f||_{L^p}`
    pub w1p_ratio: f64,
    /// `||B[div F]||_{L^q} / ||F||_{L^q}`
    pub divform_ratio: f64,
    pub residual: f64,
    pub divform_residual: f64,
}

/// Operator norms of the perforated inverse for a fixed scalar datum `f`
/// (mean removed on the fluid part) and a fixed face field `F` (zeroed on
/// faces touching the hole), for each `eps`.
pub fn uniformity_probe(
    geom: Geometry,
    f: &dyn Fn(Point) -> f64,
    big_f: &dyn Fn(Point) -> [f64; 2],
    eps_list: &[f64],
    p: f64,
    q: f64,
    tol: f64,
) -> Result<Vec<UniformityRow>> {
    if !(p > 1.0) || !(q > 1.0) || !q.is_finite() {
        return Err(Error::param("p", format!("need p, q in (1, inf), got p={p}, q={q}")));
    }
    let full = Arc::new(FullOperator::new(geom)?);
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let domain = crate::grid::DomainSpec::new(geom.half_width, eps)?;
        let grid = crate::grid::make_grid(domain, geom.n)?;
        let op = PerforatedOperator::new(grid, full.clone())?;
        let g = &op.grid;

        let datum = mean_free_on_fluid(g, &ScalarField::from_fn(geom, f));
        let sol = op.apply(&datum, tol)?;
        let f_norm = crate::grid::lq_norm(g, &datum, p, crate::grid::Region::Fluid);

        let mut ff = FaceField::from_fn(geom, big_f);
        let n = geom.n;
        for j in 0..n {
            for i in 0..=n {
                if i == 0 || i == n || touches_hole_u(g, i, j) {
                    let k = ff.ui(i, j);
                    ff.u[k] = 0.0;
                }
            }
        }
        for j in 0..=n {
            for i in 0..n {
                if j == 0 || j == n || touches_hole_v(g, i, j) {
                    let k = ff.vi(i, j);
                    ff.v[k] = 0.0;
                }
            }
        }
        let divf = ff.divergence().extend_by_zero(g);
        let dsol = op.apply(&divf, tol)?;
        rows.push(UniformityRow {
            eps,
            w1p_ratio: sol.v.w1p_norm(p) / f_norm,
            divform_ratio: dsol.v.lp_norm(q) / ff.lp_norm(q),
            residual: sol.residual,
            divform_residual: dsol.residual,
        });
    }
    Ok(rows)
}

/// `psi_eps = (1 - eta_{eps, alpha_eps})^2` on cell centres.
pub fn pressure_weight(grid: &Grid2D, eps: f64) -> Result<ScalarField> {
    if eps == 0.0 {
        return Ok(ScalarField::constant(grid.geom, 1.0));
    }
    let spec = AlphaPolicy::new(grid.domain.half_width).spec(eps)?;
    Ok(ScalarField::from_fn(grid.geom, |x| {
        let t = 1.0 - eta_smooth(&spec, x);
        t * t
    }))
}

/// `phi(t) B[psi_eps rho^theta - <psi_eps rho^theta>]` on the perforated
/// square of `op`.
pub fn pressure_testfn(
    op: &PerforatedOperator,
    rho: &ScalarField,
    theta: f64,
    time_factor: f64,
    tol: f64,
) -> Result<DivSolve> {
    if !(theta > 0.0) {
        return Err(Error::param("theta", format!("must be positive, got {theta}")));
    }
    if let Some((c, v)) = rho
        .values
        .iter()
        .enumerate()
        .find(|(c, v)| op.grid.mask[*c] == CellKind::Fluid && **v < 0.0)
    {
        return Err(Error::NegativeDensity {
            cell: c,
            value: *v,
            t: f64::NAN,
        });
    }
    let psi = pressure_weight(&op.grid, op.grid.eps())?;
    let raw = ScalarField {
        geom: rho.geom,
        values: rho
            .values
            .iter()
            .zip(&psi.values)
            .map(|(r, w)| w * r.max(0.0).powf(theta))
            .collect(),
    };
    let datum = mean_free_on_fluid(&op.grid, &raw);
    let mut sol = op.apply(&datum, tol)?;
    sol.v.scale(time_factor);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, DomainSpec};

    fn grid(eps: f64, n: usize) -> Grid2D {
        make_grid(DomainSpec::new(0.5, eps).unwrap(), n).unwrap()
    }

    #[test]
    fn full_operator_examples() {
        let g = grid(0.0, 32);
        let op = FullOperator::new(g.geom).unwrap();
        let zero = op.apply(&ScalarField::zeros(g.geom), 1e-8).unwrap();
        assert_eq!(zero.v.max_abs(), 0.0);
        let f = ScalarField::from_fn(g.geom, |x| x[0]);
        let s = op.apply(&f, 1e-10).unwrap();
        assert!(s.residual <= 1e-10);
        let div = s.v.divergence();
        for (a, b) in div.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let g = grid(0.0, 16);
        let op = FullOperator::new(g.geom).unwrap();
        let f = ScalarField::constant(g.geom, 1.0);
        assert!(matches!(op.apply(&f, 1e-8), Err(Error::NonzeroMean { .. })));
    }

    #[test]
    fn restriction_profile_shape() {
        assert_eq!(restriction_profile(0.5), 0.0);
        assert_eq!(restriction_profile(1.0), 0.0);
        assert_eq!(restriction_profile(2.0), 1.0);
        assert!((restriction_profile(1.5) - 0.5).abs() < 1e-12);
        let mut prev = 0.0;
        for k in 0..=100 {
            let v = restriction_profile(1.0 + k as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn restriction_leaves_far_fields_alone() {
        let g = grid(0.05, 64);
        let a = AnnulusOperator::new(&g).unwrap();
        let f = FaceField::from_fn(g.geom, |x| {
            let d = (x[0] - 0.25).hypot(x[1] - 0.25);
            let b = (1.0 - (d / 0.15).powi(2)).max(0.0).powi(3);
            [b, -0.5 * b]
        });
        let (r, _) = restriction(&g, &a, &f, 1e-10).unwrap();
        assert_eq!(r, f);
        let (z, _) = restriction(&g, &a, &FaceField::zeros(g.geom), 1e-10).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn annulus_solution_vanishes_on_both_circles() {
        let g = grid(0.1, 64);
        let a = AnnulusOperator::new(&g).unwrap();
        let cells = a.cells();
        let mut f = ScalarField::zeros(g.geom);
        for &c in &cells {
            let (i, j) = g.geom.coords(c);
            f.values[c] = g.geom.center(i, j)[0];
        }
        let mean = cells.iter().map(|&c| f.values[c]).sum::<f64>() / cells.len() as f64;
        for &c in &cells {
            f.values[c] -= mean;
        }
        let s = a.apply(&f, 1e-10).unwrap();
        let n = g.n();
        for j in 0..n {
            for i in 0..=n {
                let x = g.geom.u_face(i, j);
                if touches_hole_u(&g, i, j) || x[0].hypot(x[1]) > 2.0 * 0.1 + g.h() {
                    assert_eq!(s.v.u[s.v.ui(i, j)], 0.0);
                }
            }
        }
        let div = s.v.divergence();
        for &c in &cells {
            assert!((div.values[c] - f.values[c]).abs() < 1e-8);
        }
    }

    #[test]
    fn perforated_zero_and_residual() {
        let g = grid(0.05, 64);
        let full = Arc::new(FullOperator::new(g.geom).unwrap());
        let op = PerforatedOperator::new(g.clone(), full).unwrap();
        let z = op.apply(&ScalarField::zeros(g.geom), 1e-8).unwrap();
        assert_eq!(z.v.max_abs(), 0.0);
        let f = mean_free_on_fluid(&g, &ScalarField::from_fn(g.geom, |x| (3.0 * x[0]).sin() + x[1] * x[1]));
        let s = op.apply(&f, 1e-9).unwrap();
        assert!(s.residual <= 1e-9, "{}", s.residual);
        // zero trace on the hole
        for j in 0..64 {
            for i in 0..=64 {
                if touches_hole_u(&g, i, j) {
                    assert_eq!(s.v.u[s.v.ui(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn pressure_testfn_zero_density() {
        let g = grid(0.04, 64);
        let full = Arc::new(FullOperator::new(g.geom).unwrap());
        let op = PerforatedOperator::new(g.clone(), full).unwrap();
        let s = pressure_testfn(&op, &ScalarField::zeros(g.geom), 1.9, 1.0, 1e-8).unwrap();
        assert_eq!(s.v.max_abs(), 0.0);
    }
}
