//! One-dimensional quadrature: adaptive Gauss-Kronrod (7/15) and fixed
//! Gauss-Legendre rules, plus the radial helpers built on them.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = hw * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kronrod * hw, ((kronrod - gauss) * hw).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

const MAX_SEGMENTS: usize = 4000;

/// Globally adaptive integration of `f` over `[a, b]` to relative tolerance
/// `rel_tol` (with a tiny absolute floor for integrands that vanish).
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    while total_err > (rel_tol * total.abs()).max(1e-300) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        // re-sum occasionally so cancellation in the running totals cannot stall us
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Adaptive integration split at the given interior breakpoints.
pub fn integrate_with_breaks(
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total += integrate_adaptive(&f, w[0], w[1], rel_tol)?;
        }
    }
    Ok(total)
}

/// `int_0^{2pi} int_{r_min}^{r_max} |profile(r)|^q r dr dtheta`, adaptive to
/// relative tolerance `1e-10`.
pub fn radial_quadrature(
    profile: impl Fn(f64) -> f64,
    q: f64,
    r_min: f64,
    r_max: f64,
) -> Result<f64> {
    if !(r_min < r_max) {
        return Err(Error::param("r_min", format!("need r_min < r_max, got [{r_min}, {r_max}]")));
    }
    let value = integrate_adaptive(|r| profile(r).abs().powf(q) * r, r_min, r_max, 1e-10)?;
    Ok(2.0 * PI * value)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for k in 0..m {
        let mut x = (PI * (k as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for l in 2..=order {
                let p2 = ((2 * l - 1) as f64 * x * p1 - (l - 1) as f64 * p0) / l as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = order as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = -x;
        nodes[order - 1 - k] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[k] = w;
        weights[order - 1 - k] = w;
    }
    (nodes, weights)
}

/// Tensor product rule on a disk in polar coordinates: Gauss-Legendre in `r`
/// on each sub-interval of `breaks`, trapezoid (spectral for periodic
/// integrands) in the angle. Returns `int f(x) dx` over the disk.
pub struct PolarRule {
    points: Vec<([f64; 2], f64)>,
}

impl PolarRule {
    pub fn new(breaks: &[f64], radial_order: usize, angles: usize) -> Self {
        let (xs, ws) = gauss_legendre(radial_order);
        let dtheta = 2.0 * PI / angles as f64;
        let mut points = Vec::with_capacity((breaks.len() - 1) * radial_order * angles);
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            for (x, wr) in xs.iter().zip(&ws) {
                let r = 0.5 * (a + b) + half * x;
                for k in 0..angles {
                    let th = (k as f64 + 0.5) * dtheta;
                    points.push(([r * th.cos(), r * th.sin()], wr * half * r * dtheta));
                }
            }
        }
        Self { points }
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().map(|(p, w)| w * f(*p)).sum()
    }

    pub fn points(&self) -> &[([f64; 2], f64)] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_oracles() {
        let eps: f64 = 0.01;
        let alpha: f64 = 10.0;
        let v = radial_quadrature(|r| 1.0 / r, 2.0, eps, eps * alpha).unwrap();
        assert!((v - 2.0 * PI * alpha.ln()).abs() < 1e-9 * v);
        let v = radial_quadrature(|_| 1.0, 1.0, 0.0, 0.7).unwrap();
        assert!((v - PI * 0.49).abs() < 1e-12);
        let v = radial_quadrature(|r| 1.0 / r, 1.0, eps, eps * alpha).unwrap();
        assert!((v - 2.0 * PI * eps * (alpha - 1.0)).abs() < 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(radial_quadrature(|r| r, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        // oscillation far beyond what 4000 segments can resolve
        let r = integrate_adaptive(|x| (1e9 * x).sin().signum(), 0.0, 1.0, 1e-14);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polar_rule_area_and_moment() {
        let rule = PolarRule::new(&[0.0, 0.3, 1.0], 12, 32);
        assert!((rule.integrate(|_| 1.0) - PI).abs() < 1e-13);
        let m = rule.integrate(|[x, _]| x * x);
        assert!((m - PI / 4.0).abs() < 1e-13);
    }
}
