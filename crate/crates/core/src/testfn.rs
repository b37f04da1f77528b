//! Rotation-corrected test functions around a small hole.
//!
//! For a vector field `phi` and the complement cutoff `n = n_eps`,
//!
//! ```text
//! Phi [phi] = n phi + (x^perp . phi) grad^perp n
//! Phi0[phi] = (1 - n) <phi> - (x^perp . <phi>) grad^perp n
//! ```
//!
//! with `x^perp = (-x2, x1)` and `grad^perp = (-d2, d1)`. `Phi` vanishes on
//! `B_{2 eps}` and `Phi0` is exactly divergence free.
//!
//! Gradients follow the convention `G[i][j] = d_i v_j`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{log_profile, Complement};
use crate::error::{Error, Result};
use crate::grid::{fd_divergence, Geometry, Grid2D, Point, Region, ScalarField, VectorField};
use crate::quadrature::{gauss_legendre, PolarRule};

pub type Tensor = [[f64; 2]; 2];

/// Analytic vector fields used as `phi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestField {
    Constant { c: [f64; 2] },
    /// `phi(x) = x`
    Linear,
    /// `phi(x) = (x1^2, 0)`
    Quadratic,
    /// `phi(x) = (sin(pi x1), 0)`
    Sine,
    /// `grad^perp` of `amplitude * (1 - |x - center|^2 / radius^2)^5`.
    Stream {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
    /// `direction * (1 - |x - center|^2 / radius^2)^4`.
    Bump {
        center: [f64; 2],
        radius: f64,
        direction: [f64; 2],
    },
}

impl TestField {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(TestField::Linear),
            "quad" | "quadratic" => Some(TestField::Quadratic),
            "sine" => Some(TestField::Sine),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestField::Constant { .. } => "constant",
            TestField::Linear => "linear",
            TestField::Quadratic => "quad",
            TestField::Sine => "sine",
            TestField::Stream { .. } => "stream",
            TestField::Bump { .. } => "bump",
        }
    }

    pub fn value(&self, x: Point) -> [f64; 2] {
        match *self {
            TestField::Constant { c } => c,
            TestField::Linear => x,
            TestField::Quadratic => [x[0] * x[0], 0.0],
            TestField::Sine => [(PI * x[0]).sin(), 0.0],
            TestField::Stream {
                center,
                radius,
                amplitude,
            } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let s = (d[0] * d[0] + d[1] * d[1]) / (radius * radius);
                if s >= 1.0 {
                    return [0.0, 0.0];
                }
                let dchi = -10.0 * amplitude * (1.0 - s).powi(4) / (radius * radius);
                [-dchi * d[1], dchi * d[0]]
            }
            TestField::Bump {
                center,
                radius,
                direction,
            } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let s = (d[0] * d[0] + d[1] * d[1]) / (radius * radius);
                if s >= 1.0 {
                    return [0.0, 0.0];
                }
                let b = (1.0 - s).powi(4);
                [b * direction[0], b * direction[1]]
            }
        }
    }

    /// `G[i][j] = d_i phi_j`.
    pub fn gradient(&self, x: Point) -> Tensor {
        match *self {
            TestField::Constant { .. } => [[0.0; 2]; 2],
            TestField::Linear => [[1.0, 0.0], [0.0, 1.0]],
            TestField::Quadratic => [[2.0 * x[0], 0.0], [0.0, 0.0]],
            TestField::Sine => [[PI * (PI * x[0]).cos(), 0.0], [0.0, 0.0]],
            TestField::Stream {
                center,
                radius,
                amplitude,
            } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let r2 = radius * radius;
                let s = (d[0] * d[0] + d[1] * d[1]) / r2;
                if s >= 1.0 {
                    return [[0.0; 2]; 2];
                }
                // Hessian of chi
                let mut hc = [[0.0; 2]; 2];
                for (a, row) in hc.iter_mut().enumerate() {
                    for (b, v) in row.iter_mut().enumerate() {
                        let id = if a == b { 1.0 } else { 0.0 };
                        *v = amplitude
                            * (80.0 * (1.0 - s).powi(3) * d[a] * d[b] / (r2 * r2)
                                - 10.0 * (1.0 - s).powi(4) * id / r2);
                    }
                }
                // phi = (-d2 chi, d1 chi)
                [[-hc[0][1], hc[0][0]], [-hc[1][1], hc[1][0]]]
            }
            TestField::Bump {
                center,
                radius,
                direction,
            } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let r2 = radius * radius;
                let s = (d[0] * d[0] + d[1] * d[1]) / r2;
                if s >= 1.0 {
                    return [[0.0; 2]; 2];
                }
                let db = -8.0 * (1.0 - s).powi(3) / r2;
                [
                    [db * d[0] * direction[0], db * d[0] * direction[1]],
                    [db * d[1] * direction[0], db * d[1] * direction[1]],
                ]
            }
        }
    }

    pub fn divergence(&self, x: Point) -> f64 {
        let g = self.gradient(x);
        g[0][0] + g[1][1]
    }

    pub fn sample(&self, geom: Geometry) -> VectorField {
        VectorField::from_fn(geom, |x| self.value(x))
    }

    /// Mean over `B_radius(0)` by a polar Gauss rule (exact up to quadrature).
    pub fn exact_ball_mean(&self, radius: f64) -> [f64; 2] {
        if radius <= 0.0 {
            return self.value([0.0, 0.0]);
        }
        let rule = PolarRule::new(&[0.0, radius], 24, 64);
        let area = PI * radius * radius;
        [
            rule.integrate(|x| self.value(x)[0]) / area,
            rule.integrate(|x| self.value(x)[1]) / area,
        ]
    }

    /// `||phi||_{W^{1,q}((-L, L)^2)}` by tensor Gauss-Legendre.
    pub fn w1q_norm(&self, half_width: f64, q: f64) -> f64 {
        let (xs, ws) = gauss_legendre(12);
        let panels = 24;
        let pw = 2.0 * half_width / panels as f64;
        let mut nodes = Vec::with_capacity(panels * xs.len());
        for p in 0..panels {
            let c = -half_width + (p as f64 + 0.5) * pw;
            for (x, w) in xs.iter().zip(&ws) {
                nodes.push((c + 0.5 * pw * x, 0.5 * pw * w));
            }
        }
        let mut total = 0.0;
        for &(y, wy) in &nodes {
            for &(x, wx) in &nodes {
                let v = self.value([x, y]);
                let g = self.gradient([x, y]);
                let pointwise = v[0].hypot(v[1]).powf(q) + frobenius(&g).powf(q);
                total += wx * wy * pointwise;
            }
        }
        total.powf(1.0 / q)
    }
}

pub fn frobenius(t: &Tensor) -> f64 {
    (t[0][0] * t[0][0] + t[0][1] * t[0][1] + t[1][0] * t[1][0] + t[1][1] * t[1][1]).sqrt()
}

#[inline]
fn perp(x: Point) -> Point {
    [-x[1], x[0]]
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `d_i x^perp`
const D_XPERP: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];

/// Evaluation of `Phi` and `Phi0` for one analytic field and one cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdHoc {
    pub frak: Complement,
    pub field: TestField,
    /// `<phi>` used by `Phi0`.
    pub mean: [f64; 2],
}

impl AdHoc {
    /// Uses the exact mean of `field` over `B_{2 eps alpha_{2 eps}}`, the
    /// region where `n_eps` differs from one.
    pub fn new(field: TestField, eps: f64, half_width: f64) -> Result<Self> {
        let frak = Complement::new(eps, half_width)?;
        Ok(Self::with_complement(field, frak))
    }

    pub fn with_complement(field: TestField, frak: Complement) -> Self {
        let mean = field.exact_ball_mean(frak.support_radius());
        Self { frak, field, mean }
    }

    pub fn phi(&self, x: Point) -> [f64; 2] {
        let (n, g, _) = self.frak.derivatives(x);
        let p = self.field.value(x);
        let s = dot(perp(x), p);
        let gp = perp(g);
        [n * p[0] + s * gp[0], n * p[1] + s * gp[1]]
    }

    pub fn phi0(&self, x: Point) -> [f64; 2] {
        let (n, g, _) = self.frak.derivatives(x);
        let m = self.mean;
        let s = dot(perp(x), m);
        let gp = perp(g);
        [(1.0 - n) * m[0] - s * gp[0], (1.0 - n) * m[1] - s * gp[1]]
    }

    /// `d_i Phi_j`.
    pub fn phi_gradient(&self, x: Point) -> Tensor {
        let (n, g, h) = self.frak.derivatives(x);
        let p = self.field.value(x);
        let gphi = self.field.gradient(x);
        let xp = perp(x);
        let s = dot(xp, p);
        let gp = perp(g);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            let ds = dot(D_XPERP[i], p) + dot(xp, gphi[i]);
            let dgp = [-h[i][1], h[i][0]];
            for j in 0..2 {
                out[i][j] = n * gphi[i][j] + g[i] * p[j] + ds * gp[j] + s * dgp[j];
            }
        }
        out
    }

    pub fn div_phi(&self, x: Point) -> f64 {
        let g = self.phi_gradient(x);
        g[0][0] + g[1][1]
    }

    /// Chain-rule divergence of `Phi0`.
    pub fn div_phi0(&self, x: Point) -> f64 {
        let (_, g, h) = self.frak.derivatives(x);
        let m = self.mean;
        let xp = perp(x);
        let s = dot(xp, m);
        let gp = perp(g);
        let mut div = 0.0;
        for i in 0..2 {
            let ds = dot(D_XPERP[i], m);
            let dgp = [-h[i][1], h[i][0]];
            div += -g[i] * m[i] - ds * gp[i] - s * dgp[i];
        }
        div
    }

    /// `div Phi - n div phi` from the full chain rule.
    pub fn div_discrepancy(&self, x: Point) -> f64 {
        self.div_phi(x) - self.frak.value(x) * self.field.divergence(x)
    }

    /// The three-term form
    /// `grad n . (phi - <phi>) + grad^perp n (x) x^perp : grad phi
    ///  + grad^perp n (x) (phi - <phi>) : grad x^perp`.
    pub fn div_discrepancy_terms(&self, x: Point) -> [f64; 3] {
        let (_, g, _) = self.frak.derivatives(x);
        let p = self.field.value(x);
        let dp = [p[0] - self.mean[0], p[1] - self.mean[1]];
        let gphi = self.field.gradient(x);
        let gp = perp(g);
        let xp = perp(x);
        let mut t2 = 0.0;
        let mut t3 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                t2 += gp[i] * xp[j] * gphi[i][j];
                t3 += gp[i] * dp[j] * D_XPERP[i][j];
            }
        }
        [dot(g, dp), t2, t3]
    }

    /// `Phi - phi`
    pub fn value_discrepancy(&self, x: Point) -> [f64; 2] {
        let a = self.phi(x);
        let b = self.field.value(x);
        [a[0] - b[0], a[1] - b[1]]
    }

    /// `grad Phi - n grad phi`
    pub fn gradient_discrepancy(&self, x: Point) -> Tensor {
        let mut g = self.phi_gradient(x);
        let n = self.frak.value(x);
        let gphi = self.field.gradient(x);
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] -= n * gphi[i][j];
            }
        }
        g
    }
}

/// Componentwise mean of `phi` over the cells with centres in `B_radius(0)`.
pub fn ball_average(grid: &Grid2D, phi: &VectorField, radius: f64) -> [f64; 2] {
    let region = Region::Disk { radius };
    let mut sum = [0.0; 2];
    let mut count = 0usize;
    let n = grid.n();
    for j in 0..n {
        for i in 0..n {
            if grid.region_contains(region, i, j) {
                let v = phi.at(i, j);
                sum[0] += v[0];
                sum[1] += v[1];
                count += 1;
            }
        }
    }
    if count == 0 {
        return [0.0, 0.0];
    }
    [sum[0] / count as f64, sum[1] / count as f64]
}

/// `Phi` and `Phi0` sampled at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionPair {
    pub phi: VectorField,
    pub phi0: VectorField,
    pub adhoc: AdHoc,
}

/// Samples `Phi` and `Phi0` on `grid`; `<phi>` is the grid-quadrature mean
/// over the support of `1 - n_eps`.
pub fn build_pair(grid: &Grid2D, field: TestField, eps: f64) -> Result<TestFunctionPair> {
    let frak = Complement::new(eps, grid.domain.half_width)?;
    let sampled = field.sample(grid.geom);
    let mean = if frak.spec.is_some() {
        ball_average(grid, &sampled, frak.support_radius())
    } else {
        [0.0, 0.0]
    };
    let adhoc = AdHoc { frak, field, mean };
    Ok(TestFunctionPair {
        phi: VectorField::from_fn(grid.geom, |x| adhoc.phi(x)),
        phi0: VectorField::from_fn(grid.geom, |x| adhoc.phi0(x)),
        adhoc,
    })
}

/// Finite-difference divergence of sampled `Phi0` and its maximum.
pub fn div_phi0_residual(grid: &Grid2D, field: TestField, eps: f64) -> Result<(ScalarField, f64)> {
    let pair = build_pair(grid, field, eps)?;
    let div = fd_divergence(grid, &pair.phi0);
    let max = div.max_abs();
    Ok((div, max))
}

/// `div Phi - n div phi`, once by finite differences of the sampled fields
/// and once by the three-term formula evaluated analytically.
#[derive(Clone, Debug, PartialEq)]
pub struct DivDecomposition {
    pub direct: ScalarField,
    pub formula: ScalarField,
}

pub fn div_decomposition(grid: &Grid2D, field: TestField, eps: f64) -> Result<DivDecomposition> {
    let pair = build_pair(grid, field, eps)?;
    let div_big = fd_divergence(grid, &pair.phi);
    let div_small = fd_divergence(grid, &field.sample(grid.geom));
    let frak = pair.adhoc.frak;
    let mut direct = ScalarField::zeros(grid.geom);
    for idx in 0..grid.geom.cells() {
        let (i, j) = grid.geom.coords(idx);
        let n = frak.value(grid.geom.center(i, j));
        direct.values[idx] = div_big.values[idx] - n * div_small.values[idx];
    }
    let formula = ScalarField::from_fn(grid.geom, |x| pair.adhoc.div_discrepancy_terms(x).iter().sum());
    Ok(DivDecomposition { direct, formula })
}

/// One row of a [`RateTable`]: discrepancy norms divided by `||phi||_{W^{1,q}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub eps: f64,
    pub value: f64,
    /// Present only when `p <= 2 < q`.
    pub gradient: Option<f64>,
    pub divergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub field: TestField,
    pub p: f64,
    pub q: f64,
    pub phi_norm: f64,
    pub rows: Vec<RateRow>,
}

/// Measures `||Phi - phi||_p`, `||grad Phi - n grad phi||_p` and
/// `||div Phi - n div phi||_p` for each `eps`, relative to `||phi||_{W^{1,q}}`.
/// All three are supported in `B_{2 eps alpha_{2 eps}}` and are integrated
/// there with a polar Gauss rule split at the cutoff breakpoints.
pub fn rate_probe(
    field: TestField,
    p: f64,
    q: f64,
    eps_list: &[f64],
    half_width: f64,
) -> Result<RateTable> {
    if !(p >= 1.0) || !(p < q) || !q.is_finite() {
        return Err(Error::param("p", format!("need 1 <= p < q < inf, got p={p}, q={q}")));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("eps_list", "must be strictly decreasing"));
    }
    let with_gradient = p <= 2.0 && q > 2.0;
    let phi_norm = field.w1q_norm(half_width, q);
    let rows = eps_list
        .par_iter()
        .map(|&eps| -> Result<RateRow> {
            let frak = Complement::new(eps, half_width)?;
            let adhoc = AdHoc::with_complement(field, frak);
            let rule = PolarRule::new(&frak.radial_breaks(), 20, 128);
            let norm = |f: &dyn Fn(Point) -> f64| rule.integrate(|x| f(x).abs().powf(p)).powf(1.0 / p);
            let value = norm(&|x| {
                let d = adhoc.value_discrepancy(x);
                d[0].hypot(d[1])
            });
            let gradient = with_gradient.then(|| norm(&|x| frobenius(&adhoc.gradient_discrepancy(x))));
            let divergence = norm(&|x| adhoc.div_discrepancy(x));
            Ok(RateRow {
                eps,
                value: value / phi_norm,
                gradient: gradient.map(|g| g / phi_norm),
                divergence: divergence / phi_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateTable {
        field,
        p,
        q,
        phi_norm,
        rows,
    })
}

/// The three-dimensional corrector
/// `(1 - eta) c - M(x, grad eta, c)` with the matrix written row by row as
///
/// ```text
/// x2 d2 eta c1 - x2 d3 eta c3
/// x3 d3 eta c2 - x2 d1 eta c1
/// x1 d1 eta c3 - x3 d2 eta c2
/// ```
///
/// for the radial log cutoff `eta = f_{eps, eps alpha}(|x|)`.
pub fn corrector_3d(c: [f64; 3], eps: f64, alpha: f64, x: [f64; 3]) -> Result<[f64; 3]> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let outer = eps * alpha;
    let eta = log_profile(eps, outer, r)?;
    let dp = if r > eps && r < outer {
        1.0 / (r * (eps.ln() - outer.ln()))
    } else {
        0.0
    };
    let d = if r > 0.0 {
        [dp * x[0] / r, dp * x[1] / r, dp * x[2] / r]
    } else {
        [0.0; 3]
    };
    let m = [
        x[1] * d[1] * c[0] - x[1] * d[2] * c[2],
        x[2] * d[2] * c[1] - x[1] * d[0] * c[0],
        x[0] * d[0] * c[2] - x[2] * d[1] * c[1],
    ];
    Ok([
        (1.0 - eta) * c[0] - m[0],
        (1.0 - eta) * c[1] - m[1],
        (1.0 - eta) * c[2] - m[2],
    ])
}

/// Maximum central-difference divergence of [`corrector_3d`] over
/// `sample_points`. Diagnostic only.
pub fn div_phi0_3d_residual(
    c: [f64; 3],
    eps: f64,
    alpha: f64,
    sample_points: &[[f64; 3]],
) -> Result<f64> {
    let step = 1e-6 * eps;
    let mut worst: f64 = 0.0;
    for &x in sample_points {
        let mut div = 0.0;
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += step;
            xm[a] -= step;
            div += (corrector_3d(c, eps, alpha, xp)?[a] - corrector_3d(c, eps, alpha, xm)?[a])
                / (2.0 * step);
        }
        worst = worst.max(div.abs());
    }
    Ok(worst)
}

/// Deterministic points filling the shell `r_min < |x| < r_max` (a scrambled
/// Kronecker sequence mapped to spherical coordinates).
pub fn shell_samples(count: usize, r_min: f64, r_max: f64) -> Vec<[f64; 3]> {
    let g = [0.819_172_513_396_164_4, 0.671_043_606_703_789_2, 0.549_700_477_901_970_3];
    (0..count)
        .map(|k| {
            let u = [
                (0.5 + g[0] * k as f64).fract(),
                (0.5 + g[1] * k as f64).fract(),
                (0.5 + g[2] * k as f64).fract(),
            ];
            let r = r_min + (r_max - r_min) * (0.02 + 0.96 * u[0]);
            let z = 2.0 * u[1] - 1.0;
            let th = 2.0 * PI * u[2];
            let rho = (1.0 - z * z).sqrt();
            [r * rho * th.cos(), r * rho * th.sin(), r * z]
        })
        .collect()
}
