//! Acceptance suite: one PASS/FAIL line per criterion and a summary. Runs
//! without the libtest harness so the lines are always printed. The exit
//! status is non-zero on any failure only when `HOLEFLOW_ACCEPTANCE_STRICT=1`,
//! so that a plain `cargo test --workspace` still runs every other target.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use holeflow::bogovskii::{uniformity_probe, AnnulusOperator, FullOperator, PerforatedOperator};
use holeflow::cutoff::{cutoff_norm_report, CutoffSpec, NormKind};
use holeflow::experiment::{run_sweep, SweepConfig, SweepReport};
use holeflow::grid::{make_grid, CellKind, DomainSpec, Geometry, Grid2D, ScalarField};
use holeflow::solver::{
    energy_inequality_check, mass, InitialCondition, PhysParams, Solver, TimeConfig,
};
use holeflow::testfn::{div_phi0_residual, rate_probe, AdHoc, TestField};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid(eps: f64, n: usize) -> Grid2D {
    make_grid(DomainSpec::new(0.5, eps).unwrap(), n).unwrap()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// `||grad eta_tilde||_q^q` for the log cutoff on `B_{eps alpha} \ B_eps`,
/// integrated by hand: `int 2 pi r (r ln alpha)^{-q} dr`.
fn grad_tilde_oracle(eps: f64, alpha: f64, q: f64) -> f64 {
    let la = alpha.ln();
    if q == 2.0 {
        2.0 * PI / la
    } else {
        2.0 * PI / (2.0 - q) * (alpha.powf(2.0 - q) - 1.0) / la.powf(q) * eps.powf(2.0 - q)
    }
}

fn criterion_1() -> Outcome {
    let spec = CutoffSpec::new(0.01, 10.0).unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for q in [1.0, 1.5, 2.0, 3.0, 4.0] {
        let rep = cutoff_norm_report(&spec, q, NormKind::GradTilde).unwrap();
        let exact = grad_tilde_oracle(0.01, 10.0, q);
        let rel = (rep.numeric - exact).abs() / exact;
        worst = worst.max(rel);
        parts.push(format!("q={q}: {:.6e}", rep.numeric));
    }
    let l2 = cutoff_norm_report(&spec, 2.0, NormKind::GradTilde).unwrap().numeric;
    // printed value 2 pi / ln 10 = 2.7288 (the 4 pi variant would be 5.4576)
    let printed_ok = (l2 - 2.7288).abs() < 5e-5;
    outcome(
        worst <= 1e-8 && printed_ok,
        format!("max rel err {worst:.2e}, L2 value {l2:.8} [{}]", parts.join(", ")),
    )
}

/// Kronecker points in the disc of radius `r`.
fn disc_samples(count: usize, r: f64) -> Vec<[f64; 2]> {
    let a1 = 0.754_877_666_246_692_8;
    let a2 = 0.569_840_290_998_053_3;
    (0..count)
        .map(|k| {
            let u = (0.5 + a1 * k as f64).fract();
            let v = (0.5 + a2 * k as f64).fract();
            let rr = r * u.sqrt();
            [rr * (2.0 * PI * v).cos(), rr * (2.0 * PI * v).sin()]
        })
        .collect()
}

fn fd_l1(eps: f64, n: usize) -> (f64, f64) {
    let g = grid(eps, n);
    let (div, max) = div_phi0_residual(&g, TestField::Constant { c: [1.0, 0.5] }, eps).unwrap();
    let l1: f64 = div
        .values
        .iter()
        .zip(&g.mask)
        .filter(|(_, k)| **k == CellKind::Fluid)
        .map(|(v, _)| v.abs())
        .sum::<f64>()
        * g.h()
        * g.h();
    (l1, max)
}

fn criterion_2() -> Outcome {
    // analytic divergence at 10^4 points, relative to the size of the terms
    let eps = 0.05;
    let mut worst = 0.0f64;
    for field in [
        TestField::Constant { c: [1.0, -0.7] },
        TestField::Linear,
        TestField::Sine,
    ] {
        let adhoc = AdHoc::new(field, eps, 0.5).unwrap();
        let m = adhoc.mean;
        let mnorm = m[0].hypot(m[1]);
        for x in disc_samples(10_000, 1.05 * adhoc.frak.support_radius()) {
            let (_, g, h) = adhoc.frak.derivatives(x);
            let r = x[0].hypot(x[1]);
            let hn = (h[0][0].powi(2) + h[0][1].powi(2) + h[1][0].powi(2) + h[1][1].powi(2)).sqrt();
            let scale = mnorm * (1.0 + g[0].hypot(g[1]) * (1.0 + r) + r * hn);
            let d = adhoc.div_phi0(x).abs();
            if scale > 0.0 {
                worst = worst.max(d / scale);
            } else {
                worst = worst.max(d);
            }
        }
    }
    let analytic_ok = worst < 1e-14;

    // finite differences under refinement
    let eps = 0.15;
    let levels = [128usize, 256, 512];
    let res: Vec<(f64, f64)> = levels.iter().map(|&n| fd_l1(eps, n)).collect();
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0].0 / w[1].0).log2()).collect();
    let fd_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.3);
    let evidence = fd_l1(eps, 1024);
    outcome(
        analytic_ok && fd_ok,
        format!(
            "analytic rel {worst:.1e}; FD L1 {:.3e}, {:.3e}, {:.3e} (orders {:.2}, {:.2}); n=1024 L1 {:.3e} (order {:.2})",
            res[0].0,
            res[1].0,
            res[2].0,
            orders[0],
            orders[1],
            evidence.0,
            (res[2].0 / evidence.0).log2()
        ),
    )
}

fn criterion_3() -> Outcome {
    let t = rate_probe(TestField::Linear, 1.5, 4.0, &[0.04, 0.02, 0.01, 0.005], 0.5).unwrap();
    let value: Vec<f64> = t.rows.iter().map(|r| r.value).collect();
    let grad: Vec<f64> = t.rows.iter().map(|r| r.gradient.unwrap_or(f64::NAN)).collect();
    let div: Vec<f64> = t.rows.iter().map(|r| r.divergence).collect();
    let ok = strictly_decreasing(&value) && strictly_decreasing(&grad) && strictly_decreasing(&div);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
    outcome(ok, format!("value [{}] gradient [{}] divergence [{}]", fmt(&value), fmt(&grad), fmt(&div)))
}

fn lq(v: &holeflow::FaceField, q: f64) -> f64 {
    v.lp_norm(q)
}

fn criterion_4() -> Outcome {
    // divergence residual on the perforated square, three data
    let g = grid(0.05, 128);
    let full = Arc::new(FullOperator::new(g.geom).unwrap());
    let op = PerforatedOperator::new(g.clone(), full).unwrap();
    let data: [&dyn Fn([f64; 2]) -> f64; 3] = [
        &|x| (2.0 * PI * x[0]).sin() * (PI * x[1]).cos(),
        &|x| x[0] + 0.3 * x[1] * x[1],
        &|x| if x[0] > 0.1 { 1.0 } else { -0.4 },
    ];
    let mut max_res = 0.0f64;
    for f in data {
        let datum = holeflow::bogovskii::mean_free_on_fluid(&g, &ScalarField::from_fn(g.geom, f));
        let sol = op.apply(&datum, 1e-9).unwrap();
        let indep = op.residual(&sol.v, &datum);
        max_res = max_res.max(indep);
    }
    let res_ok = max_res <= 1e-8;

    // scaling: identical reference lattices at (n, eps) and (2n, eps / 2)
    let q = 3.0;
    let norm_for = |n: usize, eps: f64| {
        let g = grid(eps, n);
        let a = AnnulusOperator::new(&g).unwrap();
        // divergence-form data: f(x) = eps^{-1} g(x / eps), g odd in y1
        let f = ScalarField::from_fn(g.geom, |x| {
            let y = [x[0] / eps, x[1] / eps];
            y[0] * (1.0 + y[1] * y[1]) / eps
        });
        let sol = a.apply(&f, 1e-11).unwrap();
        lq(&sol.v, q) / eps.powf(2.0 / q)
    };
    let s1 = norm_for(128, 0.08);
    let s2 = norm_for(256, 0.04);
    let scale_err = (s1 - s2).abs() / s1;
    let scale_ok = scale_err < 1e-10;

    // uniformity of the composed operator
    let rows = uniformity_probe(
        Geometry::new(256, 0.5),
        &|x| (2.0 * PI * x[0]).cos() + 4.0 * x[0] * x[1],
        &|x| [(PI * x[1]).sin(), x[0] * x[0]],
        &[0.16, 0.08, 0.04, 0.02],
        1.5,
        3.0,
        1e-8,
    )
    .unwrap();
    let ratios: Vec<f64> = rows.iter().map(|r| r.w1p_ratio).collect();
    let mx = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let mn = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let unif_ok = mx / mn < 3.0;
    outcome(
        res_ok && scale_ok && unif_ok,
        format!(
            "max div residual {max_res:.2e}; scaling mismatch {scale_err:.1e}; W1,1.5 ratios [{}] max/min {:.3}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" "),
            mx / mn
        ),
    )
}

fn coarsen(r: &[f64], n: usize) -> Vec<f64> {
    let m = n / 2;
    let mut out = vec![0.0; m * m];
    for j in 0..m {
        for i in 0..m {
            out[j * m + i] = 0.25
                * (r[2 * j * n + 2 * i]
                    + r[2 * j * n + 2 * i + 1]
                    + r[(2 * j + 1) * n + 2 * i]
                    + r[(2 * j + 1) * n + 2 * i + 1]);
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let phys = PhysParams::new(0.005, 0.0, 3.0).unwrap();
    // mass over 1000 steps with the hole
    let s = Solver::new(grid(0.04, 128), phys);
    let mut st = s.init_state(&InitialCondition::bump()).unwrap();
    let m0 = mass(&s, &st);
    for _ in 0..1000 {
        let dt = s.stable_dt(&st, 0.4);
        st = s.step(&st, dt, 0.4).unwrap();
    }
    let drift = (mass(&s, &st) - m0).abs() / m0;

    // equilibrium
    let still = s.init_state(&InitialCondition::Still { rho0: 1.3 }).unwrap();
    let mut e = still.clone();
    for _ in 0..100 {
        let dt = s.stable_dt(&e, 0.4);
        e = s.step(&e, dt, 0.4).unwrap();
    }
    let eq_ok = e.rho == still.rho && e.m == still.m;

    // energy inequality, n = 256
    let s256 = Solver::new(grid(0.04, 256), phys);
    let tr = s256
        .run(
            s256.init_state(&InitialCondition::bump()).unwrap(),
            &TimeConfig { t_end: 0.25, cfl: 0.4, checkpoints: 25 },
        )
        .unwrap();
    let en = energy_inequality_check(&tr.monitors, 1e-3);

    // self-convergence, hole-free, dt proportional to h
    let mut sols = Vec::new();
    for n in [64usize, 128, 256] {
        let s = Solver::new(grid(0.0, n), phys);
        let init = s.init_state(&InitialCondition::bump()).unwrap();
        let end = s.advance_uniform(&init, 0.25, 800 * n / 256, 0.4).unwrap();
        sols.push((n, end.rho.values));
    }
    let err = |k: usize| {
        let (m, ref coarse) = sols[k];
        let fine = coarsen(&sols[k + 1].1, sols[k + 1].0);
        fine.iter().zip(coarse).map(|(a, b)| (a - b).abs()).sum::<f64>() / (m * m) as f64
    };
    let (e0, e1) = (err(0), err(1));
    let order = (e0 / e1).log2();
    outcome(
        drift <= 1e-12 && eq_ok && en.passed && order >= 0.9,
        format!(
            "mass drift {drift:.2e}; equilibrium exact {eq_ok}; energy violation {:.2e}; L1 self-convergence {e0:.3e} -> {e1:.3e}, order {order:.2}",
            en.max_violation
        ),
    )
}

fn criterion_6(r: &SweepReport) -> Outcome {
    let a: Vec<f64> = r.series(|m| m.density_weak).iter().map(|p| p.1).collect();
    let b: Vec<f64> = r.series(|m| m.velocity_l2l2).iter().map(|p| p.1).collect();
    let c: Vec<f64> = r.series(|m| m.momentum_weak).iter().map(|p| p.1).collect();
    let complete = a.len() == r.config.eps_list.len();
    let ratio = b.last().unwrap_or(&f64::NAN) / b.first().unwrap_or(&f64::NAN);
    let ok = complete
        && strictly_decreasing(&a)
        && strictly_decreasing(&b)
        && strictly_decreasing(&c)
        && ratio < 0.5;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
    outcome(
        ok,
        format!("(a) [{}] (b) [{}] (c) [{}] (b) final/first {ratio:.3}", fmt(&a), fmt(&b), fmt(&c)),
    )
}

fn criterion_7(r: &SweepReport) -> Outcome {
    let v: Vec<f64> = r.series(|m| m.pressure_functional).iter().map(|p| p.1).collect();
    let mx = v.iter().cloned().fold(f64::MIN, f64::max);
    let mn = v.iter().cloned().fold(f64::MAX, f64::min);
    outcome(
        v.len() == r.config.eps_list.len() && mx / mn < 2.0,
        format!(
            "theta {:.2}: [{}] max/min {:.3}",
            r.config.theta(),
            v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(" "),
            mx / mn
        ),
    )
}

fn criterion_8(r: &SweepReport) -> Outcome {
    let mut ok = r.hole_rows().count() == r.config.eps_list.len();
    let mut losses = Vec::new();
    let mut wins = 0;
    for (eps, m) in r.hole_rows() {
        for (k, (a, n)) in m.pressure_term_adhoc.iter().zip(&m.pressure_term_naive).enumerate() {
            if a < n {
                wins += 1;
            } else {
                ok = false;
                losses.push(format!("eps={eps} phi#{k}: {a:.3e} vs {n:.3e}"));
            }
        }
    }
    let detail = if losses.is_empty() {
        format!("corrected term smaller in all {wins} (eps, phi) pairs")
    } else {
        format!("corrected term smaller in {wins} pairs, not in: {}", losses.join("; "))
    };
    outcome(ok, detail)
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let mut report = |k: usize, f: &dyn Fn() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        if !o.pass {
            failed.push(k);
        }
        println!(
            "{} criterion {k} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            o.detail
        );
    };
    report(1, &criterion_1);
    report(2, &criterion_2);
    report(3, &criterion_3);
    report(4, &criterion_4);
    report(5, &criterion_5);
    let t0 = Instant::now();
    let sweep = run_sweep(&SweepConfig::standard()).expect("sweep configuration is valid");
    println!("sweep finished in {:.1}s", t0.elapsed().as_secs_f64());
    for row in &sweep.report.rows {
        if let Some(f) = &row.failure {
            println!("sweep row eps={} failed: {f}", row.eps);
        }
    }
    let r = &sweep.report;
    report(6, &|| criterion_6(r));
    report(7, &|| criterion_7(r));
    report(8, &|| criterion_8(r));
    println!("acceptance: {} of 8 criteria passed; failed: {failed:?}", 8 - failed.len());
    let strict = std::env::var("HOLEFLOW_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed.is_empty() || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
