//! Explicit staggered finite-volume scheme for
//!
//! ```text
//! d_t rho + div(rho u) = 0
//! d_t(rho u) + div(rho u (x) u) + grad rho^gamma = div S(u)
//! S(u) = 2 mu D(u) + (lambda - mu) div(u) I
//! ```
//!
//! on the square minus the staircase hole, with no-slip walls. Density sits
//! at cell centres and momentum on faces. Mass fluxes are first-order upwind,
//! momentum convection is the conservative upwind scheme driven by the same
//! mass fluxes, and the pressure gradient uses the updated density (a
//! forward-backward step, which keeps the acoustic part stable).

mod monitor;
mod snapshot;

use serde::{Deserialize, Serialize};

pub use monitor::{
    default_psi, default_renorm_theta, dissipation, effective_viscous_flux, energy,
    energy_inequality_check, mass, pressure_functional, pressure_integral, renormalized_residual,
    renormalized_residual_series, trapezoid, EnergyReport, MonitorSeries, ViscousFlux, DEFAULT_PSI_RADIUS,
};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};

use crate::error::{Error, Result};
use crate::grid::{CellKind, FaceField, Grid2D, Point, ScalarField};

/// Viscosities and adiabatic exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub mu: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl PhysParams {
    pub fn new(mu: f64, lambda: f64, gamma: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::param("mu", format!("must be positive, got {mu}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param("lambda", format!("must be nonnegative, got {lambda}")));
        }
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", format!("must exceed 1, got {gamma}")));
        }
        Ok(Self { mu, lambda, gamma })
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        rho.powf(self.gamma)
    }

    #[inline]
    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.gamma * rho.powf(self.gamma - 1.0)).sqrt()
    }
}

/// Initial data. Densities stay above `0.5` in every shipped profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `rho = rho0`, `u = 0`.
    Still { rho0: f64 },
    /// `rho = 1 + amplitude exp(-|x - center|^2 / sigma^2)`, `u = 0`.
    Bump {
        amplitude: f64,
        sigma: f64,
        center: Point,
    },
    /// `rho = 1`, `u = grad^perp chi` with
    /// `chi = amplitude (1 - |x - center|^2 / radius^2)^3`, taken as a
    /// discrete curl of vertex values so that `div u = 0` exactly.
    Vortex {
        amplitude: f64,
        radius: f64,
        center: Point,
    },
}

pub const RHO_MIN: f64 = 0.5;

impl InitialCondition {
    pub fn bump() -> Self {
        InitialCondition::Bump {
            amplitude: 0.2,
            sigma: 0.1,
            center: [0.1, 0.0],
        }
    }

    pub fn vortex() -> Self {
        InitialCondition::Vortex {
            amplitude: 0.1,
            radius: 0.3,
            center: [0.05, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialCondition::Still { rho0 } => {
                if !(rho0 >= RHO_MIN) || !rho0.is_finite() {
                    return Err(Error::param("rho0", format!("must be at least {RHO_MIN}, got {rho0}")));
                }
            }
            InitialCondition::Bump {
                amplitude, sigma, ..
            } => {
                if !(1.0 + amplitude.min(0.0) >= RHO_MIN) || !amplitude.is_finite() {
                    return Err(Error::param(
                        "amplitude",
                        format!("density 1 + amplitude must stay above {RHO_MIN}, got {amplitude}"),
                    ));
                }
                if !(sigma > 0.0) {
                    return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
                }
            }
            InitialCondition::Vortex {
                amplitude, radius, ..
            } => {
                if !amplitude.is_finite() {
                    return Err(Error::param("amplitude", "must be finite"));
                }
                if !(radius > 0.0) {
                    return Err(Error::param("radius", format!("must be positive, got {radius}")));
                }
            }
        }
        Ok(())
    }

    pub fn density(&self, x: Point) -> f64 {
        match *self {
            InitialCondition::Still { rho0 } => rho0,
            InitialCondition::Bump {
                amplitude,
                sigma,
                center,
            } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                1.0 + amplitude * (-d2 / (sigma * sigma)).exp()
            }
            InitialCondition::Vortex { .. } => 1.0,
        }
    }
}

/// Density at cell centres, momentum on faces.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub rho: ScalarField,
    pub m: FaceField,
    pub t: f64,
}

/// Grid, parameters and face activity of one run.
#[derive(Clone, Debug)]
pub struct Solver {
    pub grid: Grid2D,
    pub params: PhysParams,
    u_active: Vec<bool>,
    v_active: Vec<bool>,
}

/// Work arrays reused across steps.
#[derive(Clone, Debug, Default)]
struct Scratch {
    uu: Vec<f64>,
    vv: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl Solver {
    pub fn new(grid: Grid2D, params: PhysParams) -> Self {
        let n = grid.n();
        let mut u_active = vec![false; (n + 1) * n];
        let mut v_active = vec![false; n * (n + 1)];
        for j in 0..n {
            for i in 1..n {
                u_active[j * (n + 1) + i] = grid.is_fluid(i - 1, j) && grid.is_fluid(i, j);
            }
        }
        for j in 1..n {
            for i in 0..n {
                v_active[j * n + i] = grid.is_fluid(i, j - 1) && grid.is_fluid(i, j);
            }
        }
        Self {
            grid,
            params,
            u_active,
            v_active,
        }
    }

    pub fn u_active(&self) -> &[bool] {
        &self.u_active
    }

    pub fn v_active(&self) -> &[bool] {
        &self.v_active
    }

    pub fn init_state(&self, ic: &InitialCondition) -> Result<SolverState> {
        ic.validate()?;
        let g = self.grid.geom;
        let n = g.n;
        let rho = ScalarField::from_fn(g, |x| ic.density(x)).extend_by_zero(&self.grid);
        let mut m = FaceField::zeros(g);
        if let InitialCondition::Vortex {
            amplitude,
            radius,
            center,
        } = *ic
        {
            // stream function at vertices, zero on vertices touching a wall
            let mut chi = vec![0.0; (n + 1) * (n + 1)];
            for j in 0..=n {
                for i in 0..=n {
                    if i == 0 || j == 0 || i == n || j == n {
                        continue;
                    }
                    let solid = [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)]
                        .iter()
                        .any(|&(a, b)| !self.grid.is_fluid(a, b));
                    if solid {
                        continue;
                    }
                    let x = g.vertex(i, j);
                    let s = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (radius * radius);
                    if s < 1.0 {
                        chi[j * (n + 1) + i] = amplitude * (1.0 - s).powi(3);
                    }
                }
            }
            let h = g.h;
            for j in 0..n {
                for i in 0..=n {
                    let k = m.ui(i, j);
                    if self.u_active[k] {
                        let u = -(chi[(j + 1) * (n + 1) + i] - chi[j * (n + 1) + i]) / h;
                        m.u[k] = u * 0.5 * (rho.at(i - 1, j) + rho.at(i, j));
                    }
                }
            }
            for j in 0..=n {
                for i in 0..n {
                    let k = m.vi(i, j);
                    if self.v_active[k] {
                        let v = (chi[j * (n + 1) + i + 1] - chi[j * (n + 1) + i]) / h;
                        m.v[k] = v * 0.5 * (rho.at(i, j - 1) + rho.at(i, j));
                    }
                }
            }
        }
        Ok(SolverState { rho, m, t: 0.0 })
    }

    /// Face velocities `m / rho_bar`, zero on inactive faces.
    pub fn velocity(&self, state: &SolverState) -> FaceField {
        let mut uu = Vec::new();
        let mut vv = Vec::new();
        self.velocity_into(state, &mut uu, &mut vv);
        FaceField {
            geom: self.grid.geom,
            u: uu,
            v: vv,
        }
    }

    fn velocity_into(&self, state: &SolverState, uu: &mut Vec<f64>, vv: &mut Vec<f64>) {
        let n = self.grid.n();
        let rho = &state.rho.values;
        uu.clear();
        uu.resize((n + 1) * n, 0.0);
        vv.clear();
        vv.resize(n * (n + 1), 0.0);
        for j in 0..n {
            for i in 1..n {
                let k = j * (n + 1) + i;
                if self.u_active[k] {
                    let rb = 0.5 * (rho[j * n + i - 1] + rho[j * n + i]);
                    uu[k] = state.m.u[k] / rb;
                }
            }
        }
        for j in 1..n {
            for i in 0..n {
                let k = j * n + i;
                if self.v_active[k] {
                    let rb = 0.5 * (rho[(j - 1) * n + i] + rho[j * n + i]);
                    vv[k] = state.m.v[k] / rb;
                }
            }
        }
    }

    fn fluid_min_density(&self, state: &SolverState) -> f64 {
        state
            .rho
            .values
            .iter()
            .zip(&self.grid.mask)
            .filter(|(_, k)| **k == CellKind::Fluid)
            .fold(f64::INFINITY, |m, (r, _)| m.min(*r))
    }

    /// Largest admissible step for the given CFL number.
    pub fn stable_dt(&self, state: &SolverState, cfl: f64) -> f64 {
        let vel = self.velocity(state);
        let umax = vel.max_abs();
        let cmax = state
            .rho
            .values
            .iter()
            .zip(&self.grid.mask)
            .filter(|(_, k)| **k == CellKind::Fluid)
            .fold(0.0f64, |m, (r, _)| m.max(self.params.sound_speed(*r)));
        let h = self.grid.h();
        let p = &self.params;
        let acoustic = cfl * h / (umax + cmax);
        let viscous = 0.25 * h * h * self.fluid_min_density(state) / (2.0 * p.mu + p.lambda);
        acoustic.min(viscous)
    }

    /// One explicit step of length `dt`.
    pub fn step(&self, state: &SolverState, dt: f64, cfl: f64) -> Result<SolverState> {
        let limit = self.stable_dt(state, cfl);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        let mut scratch = Scratch::default();
        self.step_unchecked(state, dt, &mut scratch)
    }

    /// Mass fluxes `u rho_upwind` on faces, given face velocities.
    fn mass_fluxes(&self, rho: &[f64], sc: &mut Scratch) {
        let n = self.grid.n();
        sc.fx.clear();
        sc.fx.resize((n + 1) * n, 0.0);
        sc.fy.clear();
        sc.fy.resize(n * (n + 1), 0.0);
        for j in 0..n {
            for i in 1..n {
                let k = j * (n + 1) + i;
                let u = sc.uu[k];
                if u != 0.0 {
                    let up = if u > 0.0 { rho[j * n + i - 1] } else { rho[j * n + i] };
                    sc.fx[k] = u * up;
                }
            }
        }
        for j in 1..n {
            for i in 0..n {
                let k = j * n + i;
                let v = sc.vv[k];
                if v != 0.0 {
                    let up = if v > 0.0 { rho[(j - 1) * n + i] } else { rho[j * n + i] };
                    sc.fy[k] = v * up;
                }
            }
        }
    }

    fn step_unchecked(&self, state: &SolverState, dt: f64, sc: &mut Scratch) -> Result<SolverState> {
        let g = self.grid.geom;
        let n = g.n;
        let h = g.h;
        let p = self.params;
        let rho = &state.rho.values;
        self.velocity_into(state, &mut sc.uu, &mut sc.vv);
        self.mass_fluxes(rho, sc);
        let (uu, vv, fx, fy) = (&sc.uu, &sc.vv, &sc.fx, &sc.fy);
        let ui = |i: usize, j: usize| j * (n + 1) + i;
        let vi = |i: usize, j: usize| j * n + i;

        // continuity
        let mut rho_new = rho.clone();
        let t_new = state.t + dt;
        for j in 0..n {
            for i in 0..n {
                let c = j * n + i;
                if self.grid.mask[c] != CellKind::Fluid {
                    continue;
                }
                let div = fx[ui(i + 1, j)] - fx[ui(i, j)] + fy[vi(i, j + 1)] - fy[vi(i, j)];
                let r = rho[c] - dt / h * div;
                if !(r > 0.0) {
                    return Err(Error::NegativeDensity {
                        cell: c,
                        value: r,
                        t: t_new,
                    });
                }
                rho_new[c] = r;
            }
        }
        let pr: Vec<f64> = rho_new.iter().map(|r| p.pressure(*r)).collect();

        // cell-centred quantities: convective fluxes and normal stresses
        let mut cx = vec![0.0; n * n];
        let mut cy = vec![0.0; n * n];
        let mut txx = vec![0.0; n * n];
        let mut tyy = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let c = j * n + i;
                let fc = 0.5 * (fx[ui(i, j)] + fx[ui(i + 1, j)]);
                cx[c] = fc * if fc >= 0.0 { uu[ui(i, j)] } else { uu[ui(i + 1, j)] };
                let gc = 0.5 * (fy[vi(i, j)] + fy[vi(i, j + 1)]);
                cy[c] = gc * if gc >= 0.0 { vv[vi(i, j)] } else { vv[vi(i, j + 1)] };
                let dxu = (uu[ui(i + 1, j)] - uu[ui(i, j)]) / h;
                let dyv = (vv[vi(i, j + 1)] - vv[vi(i, j)]) / h;
                let div = dxu + dyv;
                txx[c] = 2.0 * p.mu * dxu + (p.lambda - p.mu) * div;
                tyy[c] = 2.0 * p.mu * dyv + (p.lambda - p.mu) * div;
            }
        }
        // vertex quantities: cross convective fluxes and shear stress
        let nv = n + 1;
        let mut vxu = vec![0.0; nv * nv];
        let mut vyv = vec![0.0; nv * nv];
        let mut txy = vec![0.0; nv * nv];
        for j in 0..=n {
            for i in 0..=n {
                let k = j * nv + i;
                let u_below = if j > 0 { uu[ui(i, j - 1)] } else { 0.0 };
                let u_above = if j < n { uu[ui(i, j)] } else { 0.0 };
                let v_left = if i > 0 { vv[vi(i - 1, j)] } else { 0.0 };
                let v_right = if i < n { vv[vi(i, j)] } else { 0.0 };
                let gvert = 0.5
                    * ((if i > 0 { fy[vi(i - 1, j)] } else { 0.0 })
                        + (if i < n { fy[vi(i, j)] } else { 0.0 }));
                vxu[k] = gvert * if gvert >= 0.0 { u_below } else { u_above };
                let fvert = 0.5
                    * ((if j > 0 { fx[ui(i, j - 1)] } else { 0.0 })
                        + (if j < n { fx[ui(i, j)] } else { 0.0 }));
                vyv[k] = fvert * if fvert >= 0.0 { v_left } else { v_right };
                let (dyu, dxv) = vertex_gradients(n, h, i, j, u_below, u_above, v_left, v_right);
                txy[k] = p.mu * (dyu + dxv);
            }
        }

        let mut m_new = FaceField::zeros(g);
        for j in 0..n {
            for i in 1..n {
                let k = ui(i, j);
                if !self.u_active[k] {
                    continue;
                }
                let (l, r) = (j * n + i - 1, j * n + i);
                let conv = (cx[r] - cx[l] + vxu[(j + 1) * nv + i] - vxu[j * nv + i]) / h;
                let grad_p = (pr[r] - pr[l]) / h;
                let visc = (txx[r] - txx[l] + txy[(j + 1) * nv + i] - txy[j * nv + i]) / h;
                m_new.u[k] = state.m.u[k] - dt * (conv + grad_p - visc);
            }
        }
        for j in 1..n {
            for i in 0..n {
                let k = vi(i, j);
                if !self.v_active[k] {
                    continue;
                }
                let (b, a) = ((j - 1) * n + i, j * n + i);
                let conv = (cy[a] - cy[b] + vyv[j * nv + i + 1] - vyv[j * nv + i]) / h;
                let grad_p = (pr[a] - pr[b]) / h;
                let visc = (tyy[a] - tyy[b] + txy[j * nv + i + 1] - txy[j * nv + i]) / h;
                m_new.v[k] = state.m.v[k] - dt * (conv + grad_p - visc);
            }
        }
        Ok(SolverState {
            rho: ScalarField {
                geom: g,
                values: rho_new,
            },
            m: m_new,
            t: t_new,
        })
    }

    /// Advances to `t_end` with the largest stable steps, landing exactly on
    /// `t_end`. Returns the new state, the number of steps and
    /// `int D dt` over the interval (left endpoint rule, matching the
    /// explicit viscous term).
    pub fn advance(&self, state: &SolverState, t_end: f64, cfl: f64) -> Result<(SolverState, usize, f64)> {
        let mut s = state.clone();
        let mut steps = 0;
        let mut diss = 0.0;
        let mut sc = Scratch::default();
        while s.t < t_end {
            let mut dt = self.stable_dt(&s, cfl);
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::NonFinite(format!("solver time step {dt} at t = {}", s.t)));
            }
            let last = s.t + dt >= t_end * (1.0 - 1e-14);
            if last {
                dt = t_end - s.t;
            }
            diss += dt * dissipation(self, &s);
            s = self.step_unchecked(&s, dt, &mut sc)?;
            if last {
                s.t = t_end;
            }
            steps += 1;
        }
        Ok((s, steps, diss))
    }

    /// Advances to `t_end` in `steps` equal steps, rejecting any step that
    /// exceeds the stability limit. Used for refinement studies, where the
    /// step must shrink in proportion to `h` on every grid.
    pub fn advance_uniform(&self, state: &SolverState, t_end: f64, steps: usize, cfl: f64) -> Result<SolverState> {
        if steps == 0 || !(t_end > state.t) {
            return Err(Error::param("steps", "need at least one step to a later time"));
        }
        let dt = (t_end - state.t) / steps as f64;
        let mut s = state.clone();
        let mut sc = Scratch::default();
        for k in 0..steps {
            let limit = self.stable_dt(&s, cfl);
            if dt > limit * (1.0 + 1e-12) {
                return Err(Error::Cfl { dt, limit });
            }
            s = self.step_unchecked(&s, dt, &mut sc)?;
            if k + 1 == steps {
                s.t = t_end;
            }
        }
        Ok(s)
    }

    /// Runs to `time.t_end`, storing a snapshot and monitors at
    /// `time.checkpoints + 1` equally spaced times including 0.
    pub fn run(&self, init: SolverState, time: &TimeConfig) -> Result<Trajectory> {
        time.validate()?;
        let mut snapshots = vec![init.clone()];
        let mut monitors = MonitorSeries::new(default_renorm_theta(self.params.gamma));
        monitors.push(self, &init, 0.0)?;
        let mut state = init;
        let mut steps = 0;
        let mut diss_total = 0.0;
        for k in 1..=time.checkpoints {
            let t_k = time.t_end * k as f64 / time.checkpoints as f64;
            let (s, st, d) = self.advance(&state, t_k, time.cfl)?;
            steps += st;
            diss_total += d;
            monitors.push(self, &s, diss_total)?;
            snapshots.push(s.clone());
            state = s;
        }
        Ok(Trajectory {
            snapshots,
            monitors,
            steps,
        })
    }
}

/// `(d_y u, d_x v)` at vertex `(i, j)`; the outer wall uses the reflected
/// ghost value, the hole uses its stored zero faces.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn vertex_gradients(
    n: usize,
    h: f64,
    i: usize,
    j: usize,
    u_below: f64,
    u_above: f64,
    v_left: f64,
    v_right: f64,
) -> (f64, f64) {
    let (u_below, u_above) = if j == 0 {
        (-u_above, u_above)
    } else if j == n {
        (u_below, -u_below)
    } else {
        (u_below, u_above)
    };
    let (v_left, v_right) = if i == 0 {
        (-v_right, v_right)
    } else if i == n {
        (v_left, -v_left)
    } else {
        (v_left, v_right)
    };
    ((u_above - u_below) / h, (v_right - v_left) / h)
}

/// Quadrature weight of vertex `(i, j)`: halved on edges, quartered at
/// corners.
#[inline]
pub(crate) fn vertex_weight(n: usize, i: usize, j: usize) -> f64 {
    let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
    let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
    wi * wj
}

/// Final time, CFL number and number of checkpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_end: f64,
    pub cfl: f64,
    pub checkpoints: usize,
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::param("T", format!("must be positive, got {}", self.t_end)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.4) {
            return Err(Error::param("cfl", format!("must lie in (0, 0.4], got {}", self.cfl)));
        }
        if self.checkpoints == 0 {
            return Err(Error::param("checkpoints", "need at least one"));
        }
        Ok(())
    }
}

/// Snapshots at the checkpoints (first one is the initial state).
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<SolverState>,
    pub monitors: MonitorSeries,
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}
