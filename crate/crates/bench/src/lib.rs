//! Fixtures shared by the criterion benches.

use holeflow::grid::{make_grid, DomainSpec, Grid2D};
use holeflow::solver::Solver;
use holeflow::{InitialCondition, PhysParams, SolverState};

pub fn grid(eps: f64, n: usize) -> Grid2D {
    make_grid(DomainSpec::new(0.5, eps).expect("valid domain"), n).expect("valid grid")
}

/// A solver with the default physical parameters and the bump data.
pub fn bump_run(eps: f64, n: usize) -> (Solver, SolverState) {
    let s = Solver::new(grid(eps, n), PhysParams::new(0.005, 0.0, 3.0).expect("valid params"));
    let st = s.init_state(&InitialCondition::bump()).expect("valid data");
    (s, st)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_is_consistent() {
        let (s, st) = super::bump_run(0.05, 32);
        assert_eq!(st.rho.values.len(), s.grid.n() * s.grid.n());
    }
}
