use std::f64::consts::TAU;

use kahler_core::geodesic_envelope::{
    initial_guess, lower_barrier, solve_envelope, solve_envelope_from, symmetrize_check, uniqueness_probe,
    upper_barrier, Direction, EnvelopeProblem, Scheme, SweepMode,
};
use kahler_core::local_model::is_omega_psh;
use kahler_core::obstruction::{build_symmetric_potential, CutoffSpec};
use kahler_core::sharp_family::{sample_family, SharpFamilyParams};
use kahler_core::{Error, Grid, GridFunction, GridSlice, KahlerCoefficient};
use num_complex::Complex64;
use proptest::prelude::*;

fn omega(w: f64) -> KahlerCoefficient {
    KahlerCoefficient::new(w).unwrap()
}

/// Smooth torus potential with `|v_zz̄| ≤ 2π²(|a| + |b| + |s|)`.
fn smooth(n: usize, a: f64, b: f64, s: f64) -> GridSlice {
    let g = Grid::torus(n).unwrap();
    GridSlice::from_fn(g, |z| {
        a * (TAU * z.re).cos() * (TAU * z.im).cos() + b * (TAU * (z.re + z.im)).cos() + s * (TAU * z.re).sin()
    })
    .unwrap()
}

#[test]
fn constant_potential_gives_linear_solution() {
    for c in [1.0, -0.4] {
        let g = Grid::torus(16).unwrap();
        let v = GridSlice::from_fn(g, |_| c).unwrap();
        let p = EnvelopeProblem::torus(v, omega(1.0), 17).unwrap();
        let r = solve_envelope(&p).unwrap();
        let exact = GridFunction::from_fn(g, 17, true, |t, _| c * t).unwrap();
        assert!(r.u.max_abs_diff(&exact) <= 1e-12);
        assert!(r.max_abs_det <= 1e-9);
    }
}

#[test]
fn solution_sits_between_barriers() {
    let v = smooth(16, 0.02, -0.015, 0.0);
    for scheme in [Scheme::HessianProjection, Scheme::DirectionSweep] {
        let p = EnvelopeProblem::torus(v.clone(), omega(1.0), 17)
            .unwrap()
            .with_scheme(scheme);
        let r = solve_envelope(&p).unwrap();
        let upper = upper_barrier(&p);
        let (lower, c) = lower_barrier(&p).unwrap();
        assert!(c >= 0.0);
        let tol = 10.0 * p.tol_sweep;
        for ((&u, &hi), &lo) in r.u.values().iter().zip(upper.values()).zip(lower.values()) {
            assert!(u <= hi + tol && u >= lo - tol, "{scheme:?}: {lo} <= {u} <= {hi}");
        }
        assert!(r.barrier_violation <= tol);
    }
}

#[test]
fn builder_potentials_sit_between_barriers() {
    let g = Grid::torus(32).unwrap();
    for q in [Complex64::new(-0.5, 0.0), Complex64::new(3.0, 0.0)] {
        let p0 = if q.re < 0.0 { -0.5 } else { 0.0 };
        let sp = build_symmetric_potential(g, omega(1.0), p0, q, &CutoffSpec::default()).unwrap();
        let p = EnvelopeProblem::torus(sp.v, omega(1.0), 33).unwrap();
        let r = solve_envelope(&p).unwrap();
        assert!(
            r.barrier_violation <= 10.0 * p.tol_sweep,
            "q={q}: {}",
            r.barrier_violation
        );
        assert!(symmetrize_check(&r, &p) <= 10.0 * p.tol_sweep);
    }
}

#[test]
fn solution_is_omega_psh_with_vanishing_determinant() {
    let v = smooth(16, 0.02, 0.01, 0.01);
    let p = EnvelopeProblem::torus(v, omega(1.0), 17).unwrap();
    let r = solve_envelope(&p).unwrap();
    // centred Hessian is ⪰ 0 with det = 0 at interior slices by construction
    assert!(r.max_abs_det <= 1e-7, "{}", r.max_abs_det);
    let report = is_omega_psh(&r.u, omega(1.0), 1e-2).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn uniqueness_probe_agrees_within_tolerance() {
    let v = smooth(16, 0.015, -0.01, 0.02);
    let p = EnvelopeProblem::torus(v, omega(1.0), 17).unwrap();
    let probe = uniqueness_probe(&p).unwrap();
    assert!(probe.difference <= 10.0 * p.tol_sweep, "{}", probe.difference);
}

#[test]
fn solves_are_deterministic() {
    let v = smooth(8, 0.02, 0.01, -0.01);
    for mode in [SweepMode::GaussSeidel, SweepMode::Jacobi, SweepMode::TimeLines] {
        let p = EnvelopeProblem::torus(v.clone(), omega(1.0), 9)
            .unwrap()
            .with_mode(mode);
        let a = solve_envelope(&p).unwrap();
        let b = solve_envelope(&p).unwrap();
        assert_eq!(a.u, b.u, "{mode:?}");
        assert_eq!(a.sweeps_used, b.sweeps_used);
    }
}

#[test]
fn sweep_modes_reach_the_same_fixed_point() {
    let v = smooth(8, 0.02, 0.01, -0.01);
    let base = EnvelopeProblem::torus(v, omega(1.0), 9).unwrap();
    let gs = solve_envelope(&base).unwrap();
    for mode in [SweepMode::Jacobi, SweepMode::TimeLines] {
        let other = solve_envelope(&base.clone().with_mode(mode)).unwrap();
        assert!(gs.u.max_abs_diff(&other.u) <= 10.0 * base.tol_sweep, "{mode:?}");
    }
    let plain = solve_envelope(&base.clone().with_nested(false).with_relaxation(1.0)).unwrap();
    assert!(gs.u.max_abs_diff(&plain.u) <= 10.0 * base.tol_sweep);
}

#[test]
fn nested_start_reaches_the_same_fixed_point() {
    let v = smooth(32, 0.02, -0.01, 0.005);
    let p = EnvelopeProblem::torus(v, omega(1.0), 33).unwrap();
    let nested = solve_envelope(&p).unwrap();
    let direct = solve_envelope(&p.clone().with_nested(false)).unwrap();
    assert!(nested.u.max_abs_diff(&direct.u) <= 10.0 * p.tol_sweep);
}

#[test]
fn sharp_family_patch_is_reproduced() {
    let params = SharpFamilyParams::new(1.0).unwrap();
    let mut errs = Vec::new();
    for n in [8, 16] {
        let data = sample_family(params, n).unwrap();
        let p = EnvelopeProblem::patch(data.clone(), omega(1.0)).unwrap();
        let r = solve_envelope(&p).unwrap();
        errs.push(r.u.max_abs_diff(&data));
    }
    assert!(errs[1] < 5e-5, "{errs:?}");
    assert!((errs[0] / errs[1]).log2() >= 1.5, "{errs:?}");
}

#[test]
fn patch_boundary_values_are_kept() {
    let params = SharpFamilyParams::new(0.5).unwrap();
    let data = sample_family(params, 8).unwrap();
    let p = EnvelopeProblem::patch(data.clone(), omega(1.0)).unwrap();
    let r = solve_envelope(&p).unwrap();
    let n = data.grid.nodes();
    for k in 0..data.nt() {
        for i in 0..n {
            for j in 0..n {
                let edge = k == 0 || k + 1 == data.nt() || i == 0 || j == 0 || i + 1 == n || j + 1 == n;
                if edge {
                    assert_eq!(r.u.get(k, i, j), data.get(k, i, j));
                }
            }
        }
    }
}

#[test]
fn invalid_problems_are_rejected() {
    let g = Grid::torus(8).unwrap();
    // ω + v_zz̄ < 0 somewhere
    let bad = GridSlice::from_fn(g, |z| 0.2 * (TAU * z.re).cos()).unwrap();
    assert!(matches!(
        EnvelopeProblem::torus(bad, omega(1.0), 9),
        Err(Error::InvalidPotential(_))
    ));
    let v = smooth(8, 0.01, 0.0, 0.0);
    assert!(matches!(
        EnvelopeProblem::torus(v.clone(), omega(1.0), 2),
        Err(Error::InsufficientResolution(_))
    ));
    let p = EnvelopeProblem::torus(v.clone(), omega(1.0), 9).unwrap();
    assert!(p.clone().with_relaxation(2.0).validate().is_err());
    assert!(p.clone().with_tolerance(0.0).validate().is_err());
    assert!(p
        .clone()
        .with_scheme(Scheme::DirectionSweep)
        .with_mode(SweepMode::TimeLines)
        .validate()
        .is_err());
    let mut thin = p.clone().with_scheme(Scheme::DirectionSweep);
    thin.directions = vec![
        Direction {
            ds: Complex64::new(1.0, 0.0),
            dz: Complex64::new(0.0, 0.0),
        },
        Direction {
            ds: Complex64::new(0.0, 0.0),
            dz: Complex64::new(1.0, 0.0),
        },
    ];
    assert!(thin.validate().is_err());
    let other = Grid::torus(16).unwrap();
    let start = GridFunction::from_fn(other, 9, false, |_, _| 0.0).unwrap();
    assert!(solve_envelope_from(&p, start).is_err());
}

#[test]
fn sweep_budget_exhaustion_is_reported() {
    let v = smooth(16, 0.02, -0.01, 0.01);
    let mut p = EnvelopeProblem::torus(v, omega(1.0), 17).unwrap().with_nested(false);
    p.max_sweeps = 3;
    assert!(matches!(
        solve_envelope(&p),
        Err(Error::NonConvergence { sweeps: 3, .. })
    ));
}

#[test]
fn symmetric_potential_gives_symmetric_solution() {
    let v = smooth(16, 0.02, -0.01, 0.0);
    assert!(v.symmetry_defect() < 1e-17);
    let p = EnvelopeProblem::torus(v, omega(1.0), 17).unwrap();
    let r = solve_envelope(&p).unwrap();
    assert!(symmetrize_check(&r, &p) <= 10.0 * p.tol_sweep);
}

fn direction_problem(v: GridSlice) -> EnvelopeProblem {
    EnvelopeProblem::torus(v, omega(1.0), 9)
        .unwrap()
        .with_scheme(Scheme::DirectionSweep)
        .with_relaxation(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn direction_sweep_obeys_comparison(a in -0.02f64..0.02, b in -0.015f64..0.015, s in -0.01f64..0.01, d in 0.0f64..0.01) {
        let lo = smooth(8, a, b, s);
        let hi = GridSlice::from_fn(lo.grid, |z| {
            a * (TAU * z.re).cos() * (TAU * z.im).cos() + b * (TAU * (z.re + z.im)).cos() + s * (TAU * z.re).sin()
                + d * (1.0 + 0.3 * (TAU * z.im).cos())
        })
        .unwrap();
        let (p_lo, p_hi) = (direction_problem(lo), direction_problem(hi));
        let (u_lo, u_hi) = (solve_envelope(&p_lo).unwrap(), solve_envelope(&p_hi).unwrap());
        let tol = 10.0 * p_lo.tol_sweep.max(p_hi.tol_sweep);
        for (x, y) in u_lo.u.values().iter().zip(u_hi.u.values()) {
            prop_assert!(x <= &(y + tol));
        }
    }

    #[test]
    fn direction_sweep_descends_from_the_upper_barrier(a in -0.02f64..0.02, b in -0.015f64..0.015, s in -0.01f64..0.01) {
        let p = direction_problem(smooth(8, a, b, s));
        let start = initial_guess(&p);
        let r = solve_envelope_from(&p, start.clone()).unwrap();
        for (x, y) in r.u.values().iter().zip(start.values()) {
            prop_assert!(*x <= *y + 1e-15);
        }
    }

    #[test]
    fn projection_scheme_is_shift_covariant(a in -0.02f64..0.02, b in -0.015f64..0.015, c in -1.0f64..1.0) {
        let v = smooth(8, a, b, 0.0);
        let shifted = GridSlice::from_fn(v.grid, |z| {
            a * (TAU * z.re).cos() * (TAU * z.im).cos() + b * (TAU * (z.re + z.im)).cos() + c
        })
        .unwrap();
        let p = EnvelopeProblem::torus(v, omega(1.0), 9).unwrap();
        let q = EnvelopeProblem::torus(shifted, omega(1.0), 9).unwrap();
        let (u, w) = (solve_envelope(&p).unwrap(), solve_envelope(&q).unwrap());
        let tol = 10.0 * p.tol_sweep.max(q.tol_sweep);
        for k in 0..9 {
            let t = k as f64 / 8.0;
            for i in 0..8 {
                for j in 0..8 {
                    prop_assert!((w.u.get(k, i, j) - u.u.get(k, i, j) - c * t).abs() <= tol);
                }
            }
        }
    }
}
