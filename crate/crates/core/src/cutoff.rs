//! Logarithmic capacity cutoffs around the origin.
//!
//! `eta_tilde` interpolates between 1 on `B_eps` and 0 outside `B_{eps*alpha}`
//! like `log|x|`; it is the minimiser of the Dirichlet energy on the annulus
//! but only Lipschitz. `eta_smooth` glues it to the constants with the smooth
//! step [`mollifier_g`], which keeps it equal to `eta_tilde` on the bulk of
//! the annulus. [`Complement`] is `1 - eta_smooth` taken at radius `2 eps`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::jet::{radial_derivatives, Jet};
use crate::quadrature::integrate_with_breaks;

/// Below this ratio the inner and outer gluing shells of `eta_smooth` overlap.
pub const MIN_ALPHA: f64 = (12.0 / 10.0) * (13.0 / 11.0);

const PLATEAU: f64 = 1.1;
const SUPPORT: f64 = 1.2;

/// `f_{A,B}(z)`: 1 below `A`, `log(z/B)/log(A/B)` on `[A, B]`, 0 beyond `B`.
pub fn log_profile(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && a < b) {
        return Err(Error::param("A", format!("need 0 < A < B, got A={a}, B={b}")));
    }
    Ok(log_profile_unchecked(a, b, z))
}

fn log_profile_unchecked(a: f64, b: f64, z: f64) -> f64 {
    if z < a {
        1.0
    } else if z > b {
        0.0
    } else {
        (z.ln() - b.ln()) / (a.ln() - b.ln())
    }
}

fn log_profile_jet(a: f64, b: f64, z: Jet) -> Jet {
    if z.v < a {
        Jet::constant(1.0)
    } else if z.v > b {
        Jet::constant(0.0)
    } else {
        (z.ln() - b.ln()) * (1.0 / (a.ln() - b.ln()))
    }
}

fn bump_edge(t: Jet) -> Jet {
    if t.v <= 0.0 {
        Jet::constant(0.0)
    } else {
        (-(Jet::constant(1.0) / t)).exp()
    }
}

fn mollifier_jet(y: Jet) -> Jet {
    if y.v <= PLATEAU {
        Jet::constant(1.0)
    } else if y.v >= SUPPORT {
        Jet::constant(0.0)
    } else {
        let width = SUPPORT - PLATEAU;
        let a = bump_edge((Jet::constant(SUPPORT) - y) * (1.0 / width));
        let b = bump_edge((y - PLATEAU) * (1.0 / width));
        a / (a + b)
    }
}

/// Smooth non-increasing step: 1 on `[0, 1.1]`, 0 on `[1.2, inf)`, and
/// antisymmetric about 1.15 in between.
pub fn mollifier_g(y: f64) -> f64 {
    mollifier_jet(Jet::constant(y)).v
}

/// The pair `(eps, alpha)` selecting a member of the cutoff family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub eps: f64,
    pub alpha: f64,
}

impl CutoffSpec {
    pub fn new(eps: f64, alpha: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::param("eps", format!("must be positive, got {eps}")));
        }
        if !(alpha >= MIN_ALPHA) || !alpha.is_finite() {
            return Err(Error::param(
                "alpha",
                format!("must be at least {MIN_ALPHA:.4}, got {alpha}"),
            ));
        }
        Ok(Self { eps, alpha })
    }

    pub fn outer_radius(&self) -> f64 {
        self.eps * self.alpha
    }

    /// Radii where `eta_smooth` changes formula.
    pub fn breakpoints(&self) -> [f64; 4] {
        let ea = self.outer_radius();
        [
            PLATEAU * self.eps,
            SUPPORT * self.eps,
            ea * 11.0 / 13.0,
            ea * 12.0 / 13.0,
        ]
    }

    /// Radius beyond which `eta_smooth` vanishes.
    pub fn support_radius(&self) -> f64 {
        self.outer_radius() * 12.0 / 13.0
    }

    pub fn tilde_radial(&self, r: f64) -> f64 {
        log_profile_unchecked(self.eps, self.outer_radius(), r)
    }

    /// Jet of the smooth radial profile `r -> eta(r)`.
    pub fn smooth_radial(&self, r: Jet) -> Jet {
        let [plateau, _, _, support] = self.breakpoints();
        if r.v < plateau {
            return Jet::constant(1.0);
        }
        if r.v >= support {
            return Jet::constant(0.0);
        }
        let inner = 1.0 - mollifier_jet(r * (1.0 / self.eps));
        let outer = mollifier_jet(r * (13.0 / (10.0 * self.outer_radius())));
        let tilde = log_profile_jet(self.eps, self.outer_radius(), r);
        Jet::constant(1.0) + inner * (tilde * outer - 1.0)
    }
}

/// `eta_tilde(x) = f_{eps, eps*alpha}(|x|)`.
pub fn eta_tilde(spec: &CutoffSpec, x: Point) -> f64 {
    spec.tilde_radial(x[0].hypot(x[1]))
}

/// The smoothed cutoff `eta_{eps,alpha}(x)`.
pub fn eta_smooth(spec: &CutoffSpec, x: Point) -> f64 {
    spec.smooth_radial(Jet::constant(x[0].hypot(x[1]))).v
}

/// Value, gradient and Hessian of `eta_smooth` at `x`.
pub fn eta_smooth_derivatives(spec: &CutoffSpec, x: Point) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let r = x[0].hypot(x[1]);
    let p = spec.smooth_radial(Jet::variable(r));
    let (g, h) = radial_derivatives(x, p);
    (p.v, g, h)
}

/// Default `alpha` choice: `max(2, |ln delta|)`, clipped so the cutoff
/// support `delta * alpha` stays below `0.9 L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPolicy {
    pub half_width: f64,
}

impl AlphaPolicy {
    pub fn new(half_width: f64) -> Self {
        Self { half_width }
    }

    pub fn alpha(&self, delta: f64) -> f64 {
        let alpha = delta.ln().abs().max(2.0);
        alpha.min(0.9 * self.half_width / delta)
    }

    pub fn spec(&self, delta: f64) -> Result<CutoffSpec> {
        CutoffSpec::new(delta, self.alpha(delta))
    }
}

/// `n_eps = 1 - eta_{2 eps, alpha_{2 eps}}`: vanishes on `B_{2 eps}` and equals
/// one outside `B_{2 eps alpha_{2 eps}}`. With `eps = 0` it is identically one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complement {
    pub eps: f64,
    pub spec: Option<CutoffSpec>,
}

impl Complement {
    pub fn new(eps: f64, half_width: f64) -> Result<Self> {
        if eps == 0.0 {
            return Ok(Self::identity());
        }
        if !(eps > 0.0) {
            return Err(Error::param("eps", format!("must be nonnegative, got {eps}")));
        }
        let spec = AlphaPolicy::new(half_width).spec(2.0 * eps)?;
        Ok(Self {
            eps,
            spec: Some(spec),
        })
    }

    pub fn identity() -> Self {
        Self { eps: 0.0, spec: None }
    }

    pub fn with_spec(eps: f64, spec: CutoffSpec) -> Self {
        Self {
            eps,
            spec: Some(spec),
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        match &self.spec {
            Some(s) => 1.0 - eta_smooth(s, x),
            None => 1.0,
        }
    }

    /// Value, gradient and Hessian.
    pub fn derivatives(&self, x: Point) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        match &self.spec {
            Some(s) => {
                let (v, g, h) = eta_smooth_derivatives(s, x);
                (
                    1.0 - v,
                    [-g[0], -g[1]],
                    [[-h[0][0], -h[0][1]], [-h[1][0], -h[1][1]]],
                )
            }
            None => (1.0, [0.0; 2], [[0.0; 2]; 2]),
        }
    }

    /// Radius outside of which `n_eps = 1`; zero for the identity.
    pub fn support_radius(&self) -> f64 {
        self.spec.map_or(0.0, |s| s.outer_radius())
    }

    /// Radial breakpoints of `n_eps` including 0 and the outer radius.
    pub fn radial_breaks(&self) -> Vec<f64> {
        match &self.spec {
            Some(s) => {
                let [a, b, c, d] = s.breakpoints();
                vec![0.0, a, b, c, d, s.outer_radius()]
            }
            None => vec![0.0],
        }
    }
}

/// Scaling cutoff `x -> zeta(|x| / eps)` with `zeta = 0` on `[0, 1]` and
/// `zeta = 1` on `[2, inf)`: the plain truncation of a test function near a
/// hole of radius `eps`, with gradient of size `1 / eps` on `B_{2 eps}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCutoff {
    pub eps: f64,
}

impl ScalingCutoff {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::param("eps", format!("must be positive, got {eps}")));
        }
        Ok(Self { eps })
    }

    fn radial(&self, r: Jet) -> Jet {
        let s = r * (1.0 / self.eps);
        if s.v <= 1.0 {
            Jet::constant(0.0)
        } else if s.v >= 2.0 {
            Jet::constant(1.0)
        } else {
            1.0 - mollifier_jet(s * 0.1 + 1.0)
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        self.radial(Jet::constant(x[0].hypot(x[1]))).v
    }

    pub fn derivatives(&self, x: Point) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let p = self.radial(Jet::variable(x[0].hypot(x[1])));
        let (g, h) = radial_derivatives(x, p);
        (p.v, g, h)
    }
}

/// Which quantity a [`NormReport`] measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    /// `grad eta_tilde`
    GradTilde,
    /// `|x| D^2 eta_tilde` (Frobenius)
    XHessTilde,
    /// `grad eta`
    GradSmooth,
    /// `|x| grad eta`
    XGradSmooth,
    /// `|x| D^2 eta` (Frobenius)
    XHessSmooth,
    /// `eta`
    Smooth,
}

impl NormKind {
    pub const ALL: [NormKind; 6] = [
        NormKind::GradTilde,
        NormKind::XHessTilde,
        NormKind::GradSmooth,
        NormKind::XGradSmooth,
        NormKind::XHessSmooth,
        NormKind::Smooth,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            NormKind::GradTilde => "grad_eta_tilde",
            NormKind::XHessTilde => "x_hess_eta_tilde",
            NormKind::GradSmooth => "grad_eta",
            NormKind::XGradSmooth => "x_grad_eta",
            NormKind::XHessSmooth => "x_hess_eta",
            NormKind::Smooth => "eta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }
}

/// `||.||_{L^q}^q` of one cutoff quantity, by quadrature, alongside the
/// closed form where one exists and the shape of the known upper bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub eps: f64,
    pub alpha: f64,
    pub q: f64,
    pub kind: NormKind,
    pub numeric: f64,
    pub closed_form: Option<f64>,
    pub rel_err: Option<f64>,
    /// Parameter dependence of the upper bound, without its constant.
    pub bound_shape: Option<f64>,
    /// `numeric / bound_shape`: the measured constant.
    pub bound_ratio: Option<f64>,
}

/// Closed form of `||grad eta_tilde||_{L^q}^q`.
pub fn grad_tilde_closed_form(spec: &CutoffSpec, q: f64) -> f64 {
    let (eps, alpha) = (spec.eps, spec.alpha);
    let la = alpha.ln();
    if q == 2.0 {
        2.0 * PI / la
    } else if q < 2.0 {
        2.0 * PI / (2.0 - q) * (alpha.powf(2.0 - q) - 1.0) / la.powf(q) * eps.powf(2.0 - q)
    } else {
        2.0 * PI / (q - 2.0) / la.powf(q) * eps.powf(2.0 - q) * (1.0 - alpha.powf(2.0 - q))
    }
}

fn gradient_bound_shape(spec: &CutoffSpec, q: f64) -> f64 {
    let (eps, alpha) = (spec.eps, spec.alpha);
    let la = alpha.ln();
    if q == 2.0 {
        1.0 / la
    } else if q < 2.0 {
        (eps * alpha).powf(2.0 - q) / ((2.0 - q) * la.powf(q))
    } else {
        eps.powf(2.0 - q) / ((q - 2.0) * la.powf(q))
    }
}

const NORM_TOL: f64 = 1e-12;

pub fn cutoff_norm_report(spec: &CutoffSpec, q: f64, kind: NormKind) -> Result<NormReport> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param("q", format!("need 1 <= q < inf, got {q}")));
    }
    let (eps, ea) = (spec.eps, spec.outer_radius());
    let la = spec.alpha.ln();
    let smooth_breaks = {
        let [a, b, c, d] = spec.breakpoints();
        [0.0, a, b, c, d]
    };
    let radial = |profile: &dyn Fn(f64) -> f64, breaks: &[f64]| {
        integrate_with_breaks(|r| profile(r).abs().powf(q) * r, breaks, NORM_TOL)
            .map(|v| 2.0 * PI * v)
    };
    let smooth = |r: f64| spec.smooth_radial(Jet::variable(r));
    let numeric = match kind {
        NormKind::GradTilde => radial(&|r| 1.0 / (r * la), &[eps, ea])?,
        NormKind::XHessTilde => radial(&|r| 2f64.sqrt() / (r * la), &[eps, ea])?,
        NormKind::GradSmooth => radial(&|r| smooth(r).d1, &smooth_breaks)?,
        NormKind::XGradSmooth => radial(&|r| r * smooth(r).d1, &smooth_breaks)?,
        NormKind::XHessSmooth => radial(
            &|r| {
                let p = smooth(r);
                r * p.d2.hypot(p.d1 / r)
            },
            &smooth_breaks,
        )?,
        NormKind::Smooth => radial(&|r| smooth(r).v, &smooth_breaks)?,
    };
    let closed_form = match kind {
        NormKind::GradTilde => Some(grad_tilde_closed_form(spec, q)),
        _ => None,
    };
    let rel_err = closed_form.map(|c| ((numeric - c) / c).abs());
    let bound_shape = match kind {
        NormKind::GradTilde | NormKind::GradSmooth | NormKind::XHessTilde => {
            Some(gradient_bound_shape(spec, q))
        }
        NormKind::XHessSmooth if q <= 2.0 => Some(gradient_bound_shape(spec, q)),
        NormKind::XHessSmooth => None,
        NormKind::XGradSmooth | NormKind::Smooth => Some(ea * ea),
    };
    Ok(NormReport {
        eps,
        alpha: spec.alpha,
        q,
        kind,
        numeric,
        closed_form,
        rel_err,
        bound_shape,
        bound_ratio: bound_shape.map(|b| numeric / b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_profile_values() {
        assert_eq!(log_profile(1.0, 10.0, 0.5).unwrap(), 1.0);
        assert_eq!(log_profile(1.0, 10.0, 10.0).unwrap(), 0.0);
        assert!((log_profile(1.0, 10.0, 10f64.sqrt()).unwrap() - 0.5).abs() < 1e-15);
        assert!(log_profile(2.0, 2.0, 1.0).is_err());
        assert!(log_profile(3.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn scaling_cutoff_shape_and_gradient() {
        let c = ScalingCutoff::new(0.05).unwrap();
        assert_eq!(c.value([0.03, 0.03]), 0.0);
        assert_eq!(c.value([0.1, 0.01]), 1.0);
        assert!((c.value([0.075, 0.0]) - 0.5).abs() < 1e-12);
        let x = [0.05, 0.04];
        let (_, g, _) = c.derivatives(x);
        let d = 1e-7;
        let fx = (c.value([x[0] + d, x[1]]) - c.value([x[0] - d, x[1]])) / (2.0 * d);
        let fy = (c.value([x[0], x[1] + d]) - c.value([x[0], x[1] - d])) / (2.0 * d);
        assert!((g[0] - fx).abs() < 1e-5 && (g[1] - fy).abs() < 1e-5);
        assert!(ScalingCutoff::new(0.0).is_err());
    }

    #[test]
    fn eta_tilde_values() {
        let s = CutoffSpec::new(0.01, 10.0).unwrap();
        assert_eq!(eta_tilde(&s, [0.005, 0.0]), 1.0);
        assert!(eta_tilde(&s, [0.1, 0.0]).abs() < 1e-15);
        let r = (0.01f64 * 0.1).sqrt();
        assert!((eta_tilde(&s, [0.0, r]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mollifier_plateau_support_midpoint() {
        assert_eq!(mollifier_g(1.0), 1.0);
        assert_eq!(mollifier_g(1.1), 1.0);
        assert_eq!(mollifier_g(1.25), 0.0);
        assert!((mollifier_g(1.15) - 0.5).abs() < 1e-12);
        for k in 1..50 {
            let d = 0.05 * k as f64 / 50.0;
            assert!((mollifier_g(1.15 - d) + mollifier_g(1.15 + d) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eta_smooth_pieces() {
        let s = CutoffSpec::new(0.01, 10.0).unwrap();
        assert_eq!(eta_smooth(&s, [0.01, 0.0]), 1.0);
        assert_eq!(eta_smooth(&s, [0.0, 0.1]), 0.0);
        let x = [0.012 * 1.5, 0.0];
        assert!((eta_smooth(&s, x) - eta_tilde(&s, x)).abs() < 1e-15);
    }

    #[test]
    fn complement_values() {
        let n = Complement::new(1e-3, 0.5).unwrap();
        assert_eq!(n.value([0.0, 0.0]), 0.0);
        assert!(2e-3 * n.spec.unwrap().alpha < 0.25);
        assert_eq!(n.value([0.25, 0.0]), 1.0);
        let n = Complement::new(0.01, 0.5).unwrap();
        let s = AlphaPolicy::new(0.5).spec(0.02).unwrap();
        for r in [0.0, 0.021, 0.03, 0.05, 0.07, 0.2] {
            assert_eq!(n.value([r, 0.0]), 1.0 - eta_smooth(&s, [r, 0.0]));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let s = CutoffSpec::new(0.02, 4.0).unwrap();
        let h = 1e-7;
        for r in [0.0225, 0.023, 0.04, 0.0685, 0.0725] {
            let x = [r * 0.6, r * 0.8];
            let (_, g, hess) = eta_smooth_derivatives(&s, x);
            for a in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let fd = (eta_smooth(&s, xp) - eta_smooth(&s, xm)) / (2.0 * h);
                assert!((fd - g[a]).abs() < 1e-5 * (1.0 + g[a].abs()), "r={r} a={a}");
                let (_, gp, _) = eta_smooth_derivatives(&s, xp);
                let (_, gm, _) = eta_smooth_derivatives(&s, xm);
                for b in 0..2 {
                    let fd2 = (gp[b] - gm[b]) / (2.0 * h);
                    assert!((fd2 - hess[b][a]).abs() < 1e-4 * (1.0 + hess[b][a].abs()));
                }
            }
        }
    }

    #[test]
    fn closed_form_values() {
        let s = CutoffSpec::new(0.01, 10.0).unwrap();
        let l2 = cutoff_norm_report(&s, 2.0, NormKind::GradTilde).unwrap();
        assert!((l2.closed_form.unwrap() - 2.7288).abs() < 1e-4);
        assert!(l2.rel_err.unwrap() < 1e-8);
        let l1 = cutoff_norm_report(&s, 1.0, NormKind::GradTilde).unwrap();
        assert!((l1.closed_form.unwrap() - 0.24559).abs() < 1e-5);
        let l4 = cutoff_norm_report(&s, 4.0, NormKind::GradTilde).unwrap();
        assert!((l4.closed_form.unwrap() - 1106.4).abs() < 0.1);
        assert!(l4.rel_err.unwrap() < 1e-8);
    }

    #[test]
    fn rejects_bad_exponent() {
        let s = CutoffSpec::new(0.01, 10.0).unwrap();
        assert!(cutoff_norm_report(&s, 0.5, NormKind::GradTilde).is_err());
        assert!(CutoffSpec::new(0.01, 1.2).is_err());
        assert!(CutoffSpec::new(0.0, 3.0).is_err());
    }

    #[test]
    fn measured_l2_constant_is_stable() {
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps: &f64| {
                let s = CutoffSpec::new(eps, eps.ln().abs()).unwrap();
                cutoff_norm_report(&s, 2.0, NormKind::GradSmooth)
                    .unwrap()
                    .bound_ratio
                    .unwrap()
            })
            .collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 2.0, "{ratios:?}");
    }

    #[test]
    fn scaled_lq_norm_decreases_for_q_above_two() {
        let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps: &f64| {
                let alpha = eps.ln().abs();
                let s = CutoffSpec::new(eps, alpha).unwrap();
                let n = cutoff_norm_report(&s, 3.0, NormKind::GradSmooth).unwrap().numeric;
                eps * alpha * n.powf(1.0 / 3.0)
            })
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2], "{vals:?}");
    }

    proptest! {
        #[test]
        fn cutoffs_bounded_and_monotone(eps in 1e-4f64..0.05, alpha in 2.0f64..20.0, t in 0.0f64..1.0) {
            let s = CutoffSpec::new(eps, alpha).unwrap();
            let r1 = t * 1.2 * eps * alpha;
            let r2 = r1 + 0.01 * eps;
            for f in [eta_tilde as fn(&CutoffSpec, Point) -> f64, eta_smooth] {
                let (a, b) = (f(&s, [r1, 0.0]), f(&s, [0.0, r2]));
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert!(b <= a + 1e-15);
            }
            let g = mollifier_g(1.0 + 0.3 * t);
            prop_assert!((0.0..=1.0).contains(&g));
        }

        #[test]
        fn smooth_equals_tilde_on_middle_annulus(eps in 1e-4f64..0.05, alpha in 2.0f64..20.0, t in 0.0f64..1.0) {
            let s = CutoffSpec::new(eps, alpha).unwrap();
            let r = 1.2 * eps + t * (11.0 / 13.0 * eps * alpha - 1.2 * eps) * 0.999;
            prop_assert!((eta_smooth(&s, [r, 0.0]) - eta_tilde(&s, [r, 0.0])).abs() < 1e-14);
        }
    }
}
