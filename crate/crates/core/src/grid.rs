//! Uniform Cartesian meshes of the square `(-L, L)^2` with a staircase hole
//! at the origin, cell-centred fields, midpoint quadrature and central
//! finite differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// The ambient square and the radius of the hole `B_eps(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub half_width: f64,
    pub hole_radius: f64,
}

impl DomainSpec {
    pub fn new(half_width: f64, hole_radius: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Domain(format!("half width must be positive, got {half_width}")));
        }
        if !(hole_radius >= 0.0) || hole_radius >= half_width {
            return Err(Error::Domain(format!(
                "hole radius must lie in [0, L) = [0, {half_width}), got {hole_radius}"
            )));
        }
        Ok(Self {
            half_width,
            hole_radius,
        })
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }
}

/// Index geometry shared by every field on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub n: usize,
    pub half_width: f64,
    pub h: f64,
}

impl Geometry {
    pub fn new(n: usize, half_width: f64) -> Self {
        Self {
            n,
            half_width,
            h: 2.0 * half_width / n as f64,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Point {
        [
            -self.half_width + (i as f64 + 0.5) * self.h,
            -self.half_width + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Midpoint of the x-normal face `(i, j)`, `i in 0..=n`, `j in 0..n`.
    #[inline]
    pub fn u_face(&self, i: usize, j: usize) -> Point {
        [
            -self.half_width + i as f64 * self.h,
            -self.half_width + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Midpoint of the y-normal face `(i, j)`, `i in 0..n`, `j in 0..=n`.
    #[inline]
    pub fn v_face(&self, i: usize, j: usize) -> Point {
        [
            -self.half_width + (i as f64 + 0.5) * self.h,
            -self.half_width + j as f64 * self.h,
        ]
    }

    /// Grid vertex `(i, j)`, `i, j in 0..=n`.
    #[inline]
    pub fn vertex(&self, i: usize, j: usize) -> Point {
        [
            -self.half_width + i as f64 * self.h,
            -self.half_width + j as f64 * self.h,
        ]
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Fluid,
    Hole,
    Exterior,
}

/// A square grid with a per-cell mask. Cells whose centres lie in the open
/// disk `B_eps(0)` are holes; everything else is fluid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub geom: Geometry,
    pub domain: DomainSpec,
    pub mask: Vec<CellKind>,
}

/// Builds the grid for `domain` with `n` cells per axis.
pub fn make_grid(domain: DomainSpec, n: usize) -> Result<Grid2D> {
    if n < 16 || !n.is_multiple_of(2) {
        return Err(Error::param("n", format!("need an even cell count >= 16, got {n}")));
    }
    if domain.hole_radius >= 0.5 * domain.half_width {
        return Err(Error::Domain(format!(
            "hole radius {} must be below L/2 = {}",
            domain.hole_radius,
            0.5 * domain.half_width
        )));
    }
    let geom = Geometry::new(n, domain.half_width);
    let eps2 = domain.hole_radius * domain.hole_radius;
    let mask = (0..geom.cells())
        .map(|idx| {
            let (i, j) = geom.coords(idx);
            let [x, y] = geom.center(i, j);
            if x * x + y * y < eps2 {
                CellKind::Hole
            } else {
                CellKind::Fluid
            }
        })
        .collect();
    Ok(Grid2D { geom, domain, mask })
}

impl Grid2D {
    pub fn n(&self) -> usize {
        self.geom.n
    }

    pub fn h(&self) -> f64 {
        self.geom.h
    }

    pub fn eps(&self) -> f64 {
        self.domain.hole_radius
    }

    #[inline]
    pub fn kind(&self, i: usize, j: usize) -> CellKind {
        self.mask[self.geom.index(i, j)]
    }

    #[inline]
    pub fn is_fluid(&self, i: usize, j: usize) -> bool {
        self.kind(i, j) == CellKind::Fluid
    }

    pub fn hole_cells(&self) -> usize {
        self.mask.iter().filter(|k| **k == CellKind::Hole).count()
    }

    pub fn fluid_area(&self) -> f64 {
        let fluid = self.mask.iter().filter(|k| **k == CellKind::Fluid).count();
        fluid as f64 * self.geom.cell_area()
    }

    /// True when both central stencils of cell `(i, j)` stay on fluid cells.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let n = self.geom.n;
        i > 0
            && j > 0
            && i + 1 < n
            && j + 1 < n
            && self.is_fluid(i, j)
            && self.is_fluid(i - 1, j)
            && self.is_fluid(i + 1, j)
            && self.is_fluid(i, j - 1)
            && self.is_fluid(i, j + 1)
    }

    pub fn region_contains(&self, region: Region, i: usize, j: usize) -> bool {
        let [x, y] = self.geom.center(i, j);
        let r = (x * x + y * y).sqrt();
        match region {
            Region::All => true,
            Region::Fluid => self.is_fluid(i, j),
            Region::Disk { radius } => r < radius,
            Region::FluidOutside { radius } => self.is_fluid(i, j) && r >= radius,
            Region::Annulus { inner, outer } => r >= inner && r < outer,
        }
    }
}

/// Cell selector for quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    All,
    Fluid,
    Disk { radius: f64 },
    FluidOutside { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

/// Cell-centred scalar samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub geom: Geometry,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(geom: Geometry) -> Self {
        Self {
            geom,
            values: vec![0.0; geom.cells()],
        }
    }

    pub fn constant(geom: Geometry, c: f64) -> Self {
        Self {
            geom,
            values: vec![c; geom.cells()],
        }
    }

    pub fn from_fn(geom: Geometry, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..geom.cells())
            .map(|idx| {
                let (i, j) = geom.coords(idx);
                f(geom.center(i, j))
            })
            .collect();
        Self { geom, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.geom.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            geom: self.geom,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Zero on every non-fluid cell of `grid`.
    pub fn extend_by_zero(&self, grid: &Grid2D) -> Self {
        let values = self
            .values
            .iter()
            .zip(&grid.mask)
            .map(|(v, k)| if *k == CellKind::Fluid { *v } else { 0.0 })
            .collect();
        Self {
            geom: self.geom,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Collocated two-component field at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub geom: Geometry,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(geom: Geometry) -> Self {
        Self {
            geom,
            x: vec![0.0; geom.cells()],
            y: vec![0.0; geom.cells()],
        }
    }

    pub fn from_fn(geom: Geometry, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(geom);
        for idx in 0..geom.cells() {
            let (i, j) = geom.coords(idx);
            let [a, b] = f(geom.center(i, j));
            out.x[idx] = a;
            out.y[idx] = b;
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        let idx = self.geom.index(i, j);
        [self.x[idx], self.y[idx]]
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            geom: self.geom,
            values: self
                .x
                .iter()
                .zip(&self.y)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        }
    }
}

/// Staggered (MAC) vector field: `u` on x-normal faces stored as
/// `j * (n + 1) + i`, `v` on y-normal faces stored as `j * n + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    pub geom: Geometry,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FaceField {
    pub fn zeros(geom: Geometry) -> Self {
        let n = geom.n;
        Self {
            geom,
            u: vec![0.0; (n + 1) * n],
            v: vec![0.0; n * (n + 1)],
        }
    }

    /// Samples the normal components of `f` at face midpoints.
    pub fn from_fn(geom: Geometry, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(geom);
        let n = geom.n;
        for j in 0..n {
            for i in 0..=n {
                out.u[j * (n + 1) + i] = f(geom.u_face(i, j))[0];
            }
        }
        for j in 0..=n {
            for i in 0..n {
                out.v[j * n + i] = f(geom.v_face(i, j))[1];
            }
        }
        out
    }

    #[inline]
    pub fn ui(&self, i: usize, j: usize) -> usize {
        j * (self.geom.n + 1) + i
    }

    #[inline]
    pub fn vi(&self, i: usize, j: usize) -> usize {
        j * self.geom.n + i
    }

    /// Flux divergence per cell.
    pub fn divergence(&self) -> ScalarField {
        let n = self.geom.n;
        let h = self.geom.h;
        let mut out = ScalarField::zeros(self.geom);
        for j in 0..n {
            for i in 0..n {
                out.values[j * n + i] = (self.u[self.ui(i + 1, j)] - self.u[self.ui(i, j)]
                    + self.v[self.vi(i, j + 1)]
                    - self.v[self.vi(i, j)])
                    / h;
            }
        }
        out
    }

    pub fn scale(&mut self, c: f64) {
        self.u.iter_mut().chain(self.v.iter_mut()).for_each(|x| *x *= c);
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `(sum_faces |w|^p h^2)^(1/p)` over both components.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let h2 = self.geom.cell_area();
        let s: f64 = self.u.iter().chain(&self.v).map(|x| x.abs().powf(p)).sum();
        (s * h2).powf(1.0 / p)
    }

    /// `L^p` norm of the difference quotients of both components along both
    /// axes, with zero padding outside the stored faces.
    pub fn grad_lp_norm(&self, p: f64) -> f64 {
        let n = self.geom.n;
        let h = self.geom.h;
        let mut s = 0.0;
        let mut acc = |values: &[f64], nx: usize, ny: usize| {
            let at = |i: isize, j: isize| {
                if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                    0.0
                } else {
                    values[j as usize * nx + i as usize]
                }
            };
            for j in -1..ny as isize {
                for i in -1..nx as isize {
                    let c = at(i, j);
                    s += ((at(i + 1, j) - c) / h).abs().powf(p);
                    s += ((at(i, j + 1) - c) / h).abs().powf(p);
                }
            }
        };
        acc(&self.u, n + 1, n);
        acc(&self.v, n, n + 1);
        (s * h * h).powf(1.0 / p)
    }

    pub fn w1p_norm(&self, p: f64) -> f64 {
        self.lp_norm(p) + self.grad_lp_norm(p)
    }

    /// Average of the two adjacent faces in each direction, per cell.
    pub fn to_centers(&self) -> VectorField {
        let n = self.geom.n;
        let mut out = VectorField::zeros(self.geom);
        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                out.x[idx] = 0.5 * (self.u[self.ui(i, j)] + self.u[self.ui(i + 1, j)]);
                out.y[idx] = 0.5 * (self.v[self.vi(i, j)] + self.v[self.vi(i, j + 1)]);
            }
        }
        out
    }
}

/// Midpoint-rule approximation of `int_region |f|^q`.
pub fn integrate_power(grid: &Grid2D, f: &ScalarField, q: f64, region: Region) -> f64 {
    debug_assert!(q >= 1.0);
    let n = grid.n();
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            if grid.region_contains(region, i, j) {
                sum += f.at(i, j).abs().powf(q);
            }
        }
    }
    sum * grid.geom.cell_area()
}

/// `(int_region |f|^q)^(1/q)`.
pub fn lq_norm(grid: &Grid2D, f: &ScalarField, q: f64, region: Region) -> f64 {
    integrate_power(grid, f, q, region).powf(1.0 / q)
}

/// Signed midpoint-rule integral of `f` over `region`.
pub fn integrate(grid: &Grid2D, f: &ScalarField, region: Region) -> f64 {
    let n = grid.n();
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            if grid.region_contains(region, i, j) {
                sum += f.at(i, j);
            }
        }
    }
    sum * grid.geom.cell_area()
}

fn available(grid: &Grid2D, i: isize, j: isize) -> bool {
    let n = grid.n() as isize;
    i >= 0 && j >= 0 && i < n && j < n && grid.kind(i as usize, j as usize) != CellKind::Hole
}

/// Derivative of `values` along axis 0 (x) or 1 (y) at cell `(i, j)`.
/// Central where both neighbours are available, one-sided otherwise.
fn derivative(grid: &Grid2D, values: &[f64], i: usize, j: usize, axis: usize) -> f64 {
    let (di, dj) = if axis == 0 { (1isize, 0isize) } else { (0, 1) };
    let (ii, jj) = (i as isize, j as isize);
    let fwd = available(grid, ii + di, jj + dj);
    let bwd = available(grid, ii - di, jj - dj);
    let h = grid.h();
    let g = &grid.geom;
    let at = |a: isize, b: isize| values[g.index(a as usize, b as usize)];
    match (bwd, fwd) {
        (true, true) => (at(ii + di, jj + dj) - at(ii - di, jj - dj)) / (2.0 * h),
        (false, true) => (at(ii + di, jj + dj) - at(ii, jj)) / h,
        (true, false) => (at(ii, jj) - at(ii - di, jj - dj)) / h,
        (false, false) => 0.0,
    }
}

/// Finite-difference gradient. Hole cells get zero.
pub fn fd_gradient(grid: &Grid2D, f: &ScalarField) -> VectorField {
    let mut out = VectorField::zeros(grid.geom);
    let n = grid.n();
    for j in 0..n {
        for i in 0..n {
            if grid.kind(i, j) == CellKind::Hole {
                continue;
            }
            let idx = grid.geom.index(i, j);
            out.x[idx] = derivative(grid, &f.values, i, j, 0);
            out.y[idx] = derivative(grid, &f.values, i, j, 1);
        }
    }
    out
}

/// Finite-difference divergence. Hole cells get zero.
pub fn fd_divergence(grid: &Grid2D, v: &VectorField) -> ScalarField {
    let mut out = ScalarField::zeros(grid.geom);
    let n = grid.n();
    for j in 0..n {
        for i in 0..n {
            if grid.kind(i, j) == CellKind::Hole {
                continue;
            }
            out.values[grid.geom.index(i, j)] =
                derivative(grid, &v.x, i, j, 0) + derivative(grid, &v.y, i, j, 1);
        }
    }
    out
}
