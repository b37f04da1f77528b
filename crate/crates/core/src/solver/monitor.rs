//! Diagnostics along a run: conserved and dissipated quantities, the improved
//! pressure functional, the effective viscous flux and the residual of the
//! renormalized continuity equation.

use serde::{Deserialize, Serialize};

use super::{vertex_gradients, vertex_weight, Scratch, Solver, SolverState, Trajectory};
use crate::cutoff::Complement;
use crate::error::{Error, Result};
use crate::grid::{CellKind, Geometry, ScalarField};

/// `sum rho h^2` over fluid cells.
pub fn mass(solver: &Solver, state: &SolverState) -> f64 {
    let h2 = solver.grid.h() * solver.grid.h();
    fluid_sum(solver, |c| state.rho.values[c]) * h2
}

fn fluid_sum(solver: &Solver, f: impl Fn(usize) -> f64) -> f64 {
    solver
        .grid
        .mask
        .iter()
        .enumerate()
        .filter(|(_, k)| **k == CellKind::Fluid)
        .map(|(c, _)| f(c))
        .sum()
}

/// `sum (rho |u_c|^2 / 2 + rho^gamma / (gamma - 1)) h^2` with `u_c` the
/// average of the two face velocities in each direction.
pub fn energy(solver: &Solver, state: &SolverState) -> f64 {
    let n = solver.grid.n();
    let h2 = solver.grid.h() * solver.grid.h();
    let vel = solver.velocity(state);
    let g = solver.params.gamma;
    fluid_sum(solver, |c| {
        let (i, j) = (c % n, c / n);
        let uc = 0.5 * (vel.u[vel.ui(i, j)] + vel.u[vel.ui(i + 1, j)]);
        let vc = 0.5 * (vel.v[vel.vi(i, j)] + vel.v[vel.vi(i, j + 1)]);
        let r = state.rho.values[c];
        0.5 * r * (uc * uc + vc * vc) + r.powf(g) / (g - 1.0)
    }) * h2
}

/// `int mu |grad u|^2 + lambda |div u|^2`: normal derivatives at cell
/// centres, tangential ones at vertices (half weight on the outer wall).
/// This is exactly the rate at which the discrete viscous term removes face
/// kinetic energy.
pub fn dissipation(solver: &Solver, state: &SolverState) -> f64 {
    let n = solver.grid.n();
    let h = solver.grid.h();
    let vel = solver.velocity(state);
    let p = solver.params;
    let mut cells = 0.0;
    for j in 0..n {
        for i in 0..n {
            let dxu = (vel.u[vel.ui(i + 1, j)] - vel.u[vel.ui(i, j)]) / h;
            let dyv = (vel.v[vel.vi(i, j + 1)] - vel.v[vel.vi(i, j)]) / h;
            let div = dxu + dyv;
            cells += p.mu * (dxu * dxu + dyv * dyv) + p.lambda * div * div;
        }
    }
    let mut verts = 0.0;
    for j in 0..=n {
        for i in 0..=n {
            let ub = if j > 0 { vel.u[vel.ui(i, j - 1)] } else { 0.0 };
            let ua = if j < n { vel.u[vel.ui(i, j)] } else { 0.0 };
            let vl = if i > 0 { vel.v[vel.vi(i - 1, j)] } else { 0.0 };
            let vr = if i < n { vel.v[vel.vi(i, j)] } else { 0.0 };
            let (dyu, dxv) = vertex_gradients(n, h, i, j, ub, ua, vl, vr);
            verts += vertex_weight(n, i, j) * p.mu * (dyu * dyu + dxv * dxv);
        }
    }
    (cells + verts) * h * h
}

/// `int_{Omega \ B_{2 eps}} rho^power` over fluid cells whose centre lies
/// outside the ball.
pub fn pressure_integral(solver: &Solver, state: &SolverState, power: f64) -> f64 {
    let g = solver.grid.geom;
    let r2 = 2.0 * solver.grid.eps();
    let h2 = g.h * g.h;
    fluid_sum(solver, |c| {
        let (i, j) = g.coords(c);
        let x = g.center(i, j);
        if x[0].hypot(x[1]) >= r2 {
            state.rho.values[c].powf(power)
        } else {
            0.0
        }
    }) * h2
}

/// Parts of `int psi^2 n_eps (rho^gamma - (2 mu + lambda) div u) rho`.
/// The viscous coefficient is `2 mu + lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViscousFlux {
    pub pressure_part: f64,
    pub viscous_part: f64,
    pub total: f64,
    pub coefficient: f64,
}

/// `psi = (1 - |x|^2 / radius^2)^2` inside the disc, zero outside.
pub fn default_psi(geom: Geometry, radius: f64) -> ScalarField {
    ScalarField::from_fn(geom, |x| {
        let s = (x[0] * x[0] + x[1] * x[1]) / (radius * radius);
        if s < 1.0 {
            (1.0 - s).powi(2)
        } else {
            0.0
        }
    })
}

pub const DEFAULT_PSI_RADIUS: f64 = 0.4;

pub fn effective_viscous_flux(
    solver: &Solver,
    state: &SolverState,
    psi: &ScalarField,
    frak: &Complement,
) -> ViscousFlux {
    let g = solver.grid.geom;
    let n = g.n;
    let h2 = g.h * g.h;
    let vel = solver.velocity(state);
    let div = vel.divergence();
    let p = solver.params;
    let coefficient = 2.0 * p.mu + p.lambda;
    let (mut pp, mut vp) = (0.0, 0.0);
    for c in 0..n * n {
        if solver.grid.mask[c] != CellKind::Fluid || psi.values[c] == 0.0 {
            continue;
        }
        let (i, j) = g.coords(c);
        let w = psi.values[c].powi(2) * frak.value(g.center(i, j)) * h2;
        let r = state.rho.values[c];
        pp += w * r.powf(p.gamma) * r;
        vp += w * coefficient * div.values[c] * r;
    }
    ViscousFlux {
        pressure_part: pp,
        viscous_part: vp,
        total: pp - vp,
        coefficient,
    }
}

fn check_renorm_theta(solver: &Solver, theta: f64) -> Result<()> {
    let g = solver.params.gamma;
    if !(theta > 0.0 && theta < g - 0.5) {
        return Err(Error::param(
            "theta",
            format!("renormalization exponent must lie in (0, gamma - 1/2) = (0, {}), got {theta}", g - 0.5),
        ));
    }
    Ok(())
}

/// Exponent used for the residual column of [`MonitorSeries`].
pub fn default_renorm_theta(gamma: f64) -> f64 {
    1.5f64.min(0.5 * (gamma - 0.5))
}

/// L1 residual of
/// `d_t rho^theta + div(u rho^theta) + (theta - 1) div(u) rho^theta = 0`
/// for one step of the scheme from `state` at the largest stable step.
/// For `theta = 1` this is the mass update and vanishes to round-off.
pub fn renormalized_residual(solver: &Solver, state: &SolverState, theta: f64) -> Result<f64> {
    check_renorm_theta(solver, theta)?;
    let dt = solver.stable_dt(state, 0.4);
    let mut sc = Scratch::default();
    let next = solver.step_unchecked(state, dt, &mut sc)?;
    // step_unchecked leaves the velocities of `state` in the scratch
    let n = solver.grid.n();
    let h = solver.grid.h();
    let rho = &state.rho.values;
    let pw: Vec<f64> = rho.iter().map(|r| r.powf(theta)).collect();
    let (uu, vv) = (&sc.uu, &sc.vv);
    let flux_x = |i: usize, j: usize| {
        let u = uu[j * (n + 1) + i];
        if u > 0.0 {
            u * pw[j * n + i - 1]
        } else if u < 0.0 {
            u * pw[j * n + i]
        } else {
            0.0
        }
    };
    let flux_y = |i: usize, j: usize| {
        let v = vv[j * n + i];
        if v > 0.0 {
            v * pw[(j - 1) * n + i]
        } else if v < 0.0 {
            v * pw[j * n + i]
        } else {
            0.0
        }
    };
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            let c = j * n + i;
            if solver.grid.mask[c] != CellKind::Fluid {
                continue;
            }
            let dt_term = (next.rho.values[c].powf(theta) - pw[c]) / dt;
            let div_flux = (flux_x(i + 1, j) - flux_x(i, j) + flux_y(i, j + 1) - flux_y(i, j)) / h;
            let div_u = (uu[j * (n + 1) + i + 1] - uu[j * (n + 1) + i] + vv[(j + 1) * n + i] - vv[j * n + i]) / h;
            total += (dt_term + div_flux + (theta - 1.0) * div_u * pw[c]).abs();
        }
    }
    Ok(total * h * h)
}

/// Residual at every snapshot of a trajectory.
pub fn renormalized_residual_series(solver: &Solver, traj: &Trajectory, theta: f64) -> Result<Vec<f64>> {
    traj.snapshots
        .iter()
        .map(|s| renormalized_residual(solver, s, theta))
        .collect()
}

/// `int_0^T int_{Omega \ B_{2 eps}} rho^(gamma + theta)`, trapezoidal over the
/// snapshots.
pub fn pressure_functional(solver: &Solver, traj: &Trajectory, theta: f64) -> Result<f64> {
    let g = solver.params.gamma;
    if !(theta > 0.0 && theta < g - 1.0) {
        return Err(Error::param(
            "theta",
            format!("must lie in (0, gamma - 1) = (0, {}), got {theta}", g - 1.0),
        ));
    }
    let vals: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| (s.t, pressure_integral(solver, s, g + theta)))
        .collect();
    Ok(trapezoid(&vals))
}

/// Trapezoidal rule over `(t, value)` pairs.
pub fn trapezoid(vals: &[(f64, f64)]) -> f64 {
    vals.windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

/// One row per checkpoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub theta: f64,
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    /// `int_0^t D`, accumulated step by step.
    pub dissipation_integral: Vec<f64>,
    /// `int_{Omega \ B_{2 eps}} rho^gamma`.
    pub pressure: Vec<f64>,
    pub viscous_flux: Vec<f64>,
    pub renormalized: Vec<f64>,
}

impl MonitorSeries {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, solver: &Solver, state: &SolverState, diss_integral: f64) -> Result<()> {
        if let Some(&last) = self.t.last() {
            if !(state.t > last) {
                return Err(Error::param("t", format!("monitor times must increase: {} after {last}", state.t)));
            }
        }
        let geom = solver.grid.geom;
        let eps = solver.grid.eps();
        let frak = if eps > 0.0 {
            Complement::new(eps, solver.grid.domain.half_width)?
        } else {
            Complement::identity()
        };
        let psi = default_psi(geom, DEFAULT_PSI_RADIUS);
        self.t.push(state.t);
        self.mass.push(mass(solver, state));
        self.energy.push(energy(solver, state));
        self.dissipation.push(dissipation(solver, state));
        self.dissipation_integral.push(diss_integral);
        self.pressure.push(pressure_integral(solver, state, solver.params.gamma));
        self.viscous_flux
            .push(effective_viscous_flux(solver, state, &psi, &frak).total);
        self.renormalized
            .push(renormalized_residual(solver, state, self.theta)?);
        Ok(())
    }

    pub const COLUMNS: [&'static str; 8] = [
        "t",
        "mass",
        "energy",
        "dissipation",
        "dissipation_integral",
        "pressure",
        "viscous_flux",
        "renormalized_residual",
    ];

    pub fn row(&self, k: usize) -> [f64; 8] {
        [
            self.t[k],
            self.mass[k],
            self.energy[k],
            self.dissipation[k],
            self.dissipation_integral[k],
            self.pressure[k],
            self.viscous_flux[k],
            self.renormalized[k],
        ]
    }

    /// Largest relative mass drift against the first row.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        self.mass
            .iter()
            .fold(0.0f64, |d, m| d.max((m - m0).abs() / m0.abs().max(f64::MIN_POSITIVE)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `max_k (E(t_k) + int_0^{t_k} D - E(0)) / E(0)`.
    pub max_violation: f64,
    pub at_time: f64,
    pub tol: f64,
    pub passed: bool,
    /// `E` never increased between checkpoints.
    pub monotone: bool,
}

pub fn energy_inequality_check(series: &MonitorSeries, tol: f64) -> EnergyReport {
    let e0 = series.energy.first().copied().unwrap_or(0.0);
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    let mut max_violation = f64::NEG_INFINITY;
    let mut at_time = 0.0;
    for k in 0..series.len() {
        let v = (series.energy[k] + series.dissipation_integral[k] - e0) / scale;
        if v > max_violation {
            max_violation = v;
            at_time = series.t[k];
        }
    }
    if series.is_empty() {
        max_violation = 0.0;
    }
    let monotone = series
        .energy
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-14));
    EnergyReport {
        max_violation,
        at_time,
        tol,
        passed: max_violation <= tol,
        monotone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, DomainSpec, FaceField};
    use crate::solver::{InitialCondition, PhysParams, TimeConfig};

    fn solver(eps: f64, n: usize, mu: f64, lambda: f64) -> Solver {
        let g = make_grid(DomainSpec::new(0.5, eps).unwrap(), n).unwrap();
        Solver::new(g, PhysParams::new(mu, lambda, 3.0).unwrap())
    }

    fn with_velocity(s: &Solver, f: impl Fn([f64; 2]) -> [f64; 2]) -> SolverState {
        let mut st = s.init_state(&InitialCondition::Still { rho0: 1.0 }).unwrap();
        let mut m = FaceField::from_fn(s.grid.geom, f);
        for (k, a) in s.u_active().iter().enumerate() {
            if !a {
                m.u[k] = 0.0;
            }
        }
        for (k, a) in s.v_active().iter().enumerate() {
            if !a {
                m.v[k] = 0.0;
            }
        }
        st.m = m;
        st
    }

    #[test]
    fn still_energy_is_half_the_area() {
        let s = solver(0.05, 64, 0.01, 0.0);
        let st = s.init_state(&InitialCondition::Still { rho0: 1.0 }).unwrap();
        assert!((energy(&s, &st) - 0.5 * s.grid.fluid_area()).abs() < 1e-14);
        assert_eq!(dissipation(&s, &st), 0.0);
    }

    #[test]
    fn shear_patch_dissipation() {
        // u = (y psi(x), 0) with psi a plateau: |grad u|^2 is 1 on the plateau
        let s = solver(0.0, 256, 0.3, 0.0);
        let plateau = |t: f64| {
            let a = t.abs();
            if a < 0.2 {
                1.0
            } else if a < 0.3 {
                0.5 * (1.0 + (std::f64::consts::PI * (a - 0.2) / 0.1).cos())
            } else {
                0.0
            }
        };
        let st = with_velocity(&s, |x| [x[1] * plateau(x[0]) * plateau(x[1]), 0.0]);
        let d = dissipation(&s, &st);
        // oracle: midpoint-free integral of mu |grad u|^2 by a fine tensor rule
        let m = 2000;
        let hh = 1.0 / m as f64;
        let dp = |t: f64| {
            let a = t.abs();
            if a > 0.2 && a < 0.3 {
                -0.5 * std::f64::consts::PI / 0.1 * (std::f64::consts::PI * (a - 0.2) / 0.1).sin() * t.signum()
            } else {
                0.0
            }
        };
        let mut exact = 0.0;
        for a in 0..m {
            for b in 0..m {
                let x = -0.5 + (a as f64 + 0.5) * hh;
                let y = -0.5 + (b as f64 + 0.5) * hh;
                let ux = y * dp(x) * plateau(y);
                let uy = plateau(x) * (plateau(y) + y * dp(y));
                exact += (ux * ux + uy * uy) * hh * hh;
            }
        }
        exact *= 0.3;
        assert!((d - exact).abs() < 4e-3 * exact, "{d} vs {exact}");
    }

    #[test]
    fn rotation_has_no_divergence_part() {
        let s = solver(0.0, 128, 0.1, 1.0);
        let bump = |x: [f64; 2]| (-(x[0] * x[0] + x[1] * x[1]) / 0.01).exp();
        let st = with_velocity(&s, |x| [-x[1] * bump(x), x[0] * bump(x)]);
        let s0 = Solver::new(s.grid.clone(), PhysParams::new(0.1, 0.0, 3.0).unwrap());
        let d1 = dissipation(&s, &st);
        let d0 = dissipation(&s0, &st);
        assert!(d1 > 0.0);
        assert!((d1 - d0).abs() < 1e-3 * d0);
    }

    #[test]
    fn renormalized_theta_one_is_mass_update() {
        let s = solver(0.05, 64, 0.005, 0.0);
        let st = s.init_state(&InitialCondition::bump()).unwrap();
        let (st, _, _) = s.advance(&st, 0.02, 0.4).unwrap();
        assert!(renormalized_residual(&s, &st, 1.0).unwrap() < 1e-11);
        assert!(renormalized_residual(&s, &st, 1.5).unwrap() > 1e-6);
        assert!(renormalized_residual(&s, &st, 2.6).is_err());
    }

    #[test]
    fn still_run_monitors() {
        let s = solver(0.05, 32, 0.005, 0.0);
        let st = s.init_state(&InitialCondition::Still { rho0: 1.0 }).unwrap();
        let traj = s
            .run(st, &TimeConfig { t_end: 1.0, cfl: 0.4, checkpoints: 4 })
            .unwrap();
        let rep = energy_inequality_check(&traj.monitors, 1e-12);
        assert!(rep.passed && rep.monotone);
        assert!(rep.max_violation.abs() < 1e-14);
        // rho = 1: functional equals T times the area outside B_{2 eps}
        let pf = pressure_functional(&s, &traj, 1.0).unwrap();
        let area = pressure_integral(&s, &traj.snapshots[0], 1.0);
        assert!((pf - area).abs() < 1e-12);
        assert!(pressure_functional(&s, &traj, 2.0).is_err());
        assert_eq!(traj.monitors.mass_drift(), 0.0);
    }

    #[test]
    fn viscous_flux_is_linear_in_coefficient() {
        let s1 = solver(0.05, 64, 0.01, 0.02);
        let s2 = Solver::new(s1.grid.clone(), PhysParams::new(0.02, 0.04, 3.0).unwrap());
        let st = s1.init_state(&InitialCondition::bump()).unwrap();
        let (st, _, _) = s1.advance(&st, 0.01, 0.4).unwrap();
        let psi = default_psi(s1.grid.geom, 0.4);
        let frak = Complement::new(0.05, 0.5).unwrap();
        let a = effective_viscous_flux(&s1, &st, &psi, &frak);
        let b = effective_viscous_flux(&s2, &st, &psi, &frak);
        assert_eq!(a.pressure_part, b.pressure_part);
        assert!((b.viscous_part - 2.0 * a.viscous_part).abs() <= 1e-15 * a.viscous_part.abs());
        assert!(a.viscous_part != 0.0);
    }
}
