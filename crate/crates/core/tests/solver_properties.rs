use holeflow::experiment::{weak_residual, WeakTest};
use holeflow::grid::{make_grid, DomainSpec, Grid2D};
use holeflow::solver::{mass, renormalized_residual, InitialCondition, PhysParams, Solver, TimeConfig};
use holeflow::testfn::TestField;
use proptest::prelude::*;

fn grid(eps: f64, n: usize) -> Grid2D {
    make_grid(DomainSpec::new(0.5, eps).unwrap(), n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_is_conserved(
        amp in 0.05f64..0.4,
        sigma in 0.05f64..0.2,
        cx in -0.2f64..0.2,
        cy in -0.2f64..0.2,
        eps in 0.0f64..0.1,
        mu in 0.002f64..0.05,
    ) {
        let s = Solver::new(grid(eps, 48), PhysParams::new(mu, 0.0, 2.5).unwrap());
        let mut st = s.init_state(&InitialCondition::Bump { amplitude: amp, sigma, center: [cx, cy] }).unwrap();
        let m0 = mass(&s, &st);
        for _ in 0..60 {
            let dt = s.stable_dt(&st, 0.4);
            st = s.step(&st, dt, 0.4).unwrap();
        }
        prop_assert!(((mass(&s, &st) - m0) / m0).abs() < 1e-13);
    }

    #[test]
    fn constant_state_is_fixed(rho0 in 0.6f64..3.0, eps in 0.0f64..0.12, gamma in 1.1f64..4.0) {
        let s = Solver::new(grid(eps, 32), PhysParams::new(0.01, 0.003, gamma).unwrap());
        let init = s.init_state(&InitialCondition::Still { rho0 }).unwrap();
        let (end, _, diss) = s.advance(&init, 0.05, 0.4).unwrap();
        prop_assert_eq!(&end.rho, &init.rho);
        prop_assert_eq!(&end.m, &init.m);
        prop_assert_eq!(diss, 0.0);
    }

    #[test]
    fn no_slip_faces_stay_zero(amp in 0.05f64..0.3, eps in 0.03f64..0.12) {
        let s = Solver::new(grid(eps, 40), PhysParams::new(0.01, 0.0, 3.0).unwrap());
        let init = s.init_state(&InitialCondition::Vortex { amplitude: amp, radius: 0.3, center: [0.05, 0.0] }).unwrap();
        let (end, _, _) = s.advance(&init, 0.02, 0.4).unwrap();
        for (m, active) in end.m.u.iter().zip(s.u_active()) {
            if !active { prop_assert_eq!(*m, 0.0); }
        }
        for (m, active) in end.m.v.iter().zip(s.v_active()) {
            if !active { prop_assert_eq!(*m, 0.0); }
        }
    }
}

/// Mirroring the data in `x1` mirrors the solution, with the hole in place.
#[test]
fn mirror_symmetry() {
    let n = 64;
    let s = Solver::new(grid(0.05, n), PhysParams::new(0.01, 0.002, 3.0).unwrap());
    let run = |cx: f64| {
        let init = s
            .init_state(&InitialCondition::Bump { amplitude: 0.3, sigma: 0.1, center: [cx, 0.07] })
            .unwrap();
        s.advance_uniform(&init, 0.05, 40, 0.4).unwrap()
    };
    let a = run(0.12);
    let b = run(-0.12);
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            worst = worst.max((a.rho.values[j * n + i] - b.rho.values[j * n + n - 1 - i]).abs());
        }
        for i in 0..=n {
            worst = worst.max((a.m.u[j * (n + 1) + i] + b.m.u[j * (n + 1) + n - i]).abs());
        }
    }
    for j in 0..=n {
        for i in 0..n {
            worst = worst.max((a.m.v[j * n + i] - b.m.v[j * n + n - 1 - i]).abs());
        }
    }
    assert!(worst < 1e-12, "mirror mismatch {worst}");
}

/// The renormalized residual is a consistency error and shrinks with h.
#[test]
fn renormalized_residual_refines() {
    let res = |n: usize| {
        let s = Solver::new(grid(0.0, n), PhysParams::new(0.005, 0.0, 3.0).unwrap());
        let init = s.init_state(&InitialCondition::bump()).unwrap();
        let (st, _, _) = s.advance(&init, 0.02, 0.4).unwrap();
        renormalized_residual(&s, &st, 1.5).unwrap()
    };
    let (r1, r2) = (res(64), res(128));
    assert!(r1 / r2 >= 1.8, "{r1} -> {r2}");
}

#[test]
fn weak_residual_shrinks_under_refinement() {
    let phi = TestField::Bump { center: [0.0, 0.0], radius: 0.35, direction: [1.0, 0.0] };
    let res = |n: usize| {
        let s = Solver::new(grid(0.0, n), PhysParams::new(0.005, 0.0, 3.0).unwrap());
        let time = TimeConfig { t_end: 0.1, cfl: 0.4, checkpoints: 20 };
        let tr = s.run(s.init_state(&InitialCondition::bump()).unwrap(), &time).unwrap();
        weak_residual(&s, &tr, &WeakTest::Plain(phi), 0.1).residual.abs()
    };
    let (r1, r2) = (res(64), res(128));
    assert!(r2 < r1, "{r1} -> {r2}");
}
