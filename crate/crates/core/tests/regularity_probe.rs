use kahler_core::geodesic_envelope::{solve_envelope, EnvelopeProblem, Scheme};
use kahler_core::regularity_probe::{
    blowup_rows, blowup_scan, lambda_subharmonicity_probe, linear_trace_test, BlowupTemplate, PotentialTemplate,
};
use kahler_core::sharp_family::{sample_family, SharpFamilyParams};
use kahler_core::{Grid, GridSlice, KahlerCoefficient};
use num_complex::Complex64;

fn omega() -> KahlerCoefficient {
    KahlerCoefficient::new(1.0).unwrap()
}

#[test]
fn constant_potential_trace_is_linear_to_tolerance() {
    let g = Grid::torus(16).unwrap();
    let v = GridSlice::from_fn(g, |_| -0.3).unwrap();
    let p = EnvelopeProblem::torus(v, omega(), 17).unwrap();
    let r = solve_envelope(&p).unwrap();
    let d = linear_trace_test(&r, omega(), (0, 0)).unwrap();
    assert!(d.linear_residual <= 10.0 * p.tol_sweep);
    assert_eq!(d.a_fit, -0.3);
    assert!(d.lambda_trace.iter().all(|l| l.unwrap().abs() < 1e-12));
}

#[test]
fn sharp_family_lambda_matches_closed_form() {
    // ω₁₁ + u_zz̄ = ε/(ε+t) on the patch, so λ(t) = log ε − log(ε+t), λ'' = 1/(ε+t)²
    let eps = 1.0;
    let data = sample_family(SharpFamilyParams::new(eps).unwrap(), 16).unwrap();
    let p = EnvelopeProblem::patch(data, omega()).unwrap();
    let r = solve_envelope(&p).unwrap();
    let x0 = (8, 8);
    let report = lambda_subharmonicity_probe(&r, omega(), x0).unwrap();
    assert_eq!(report.flagged, 0);
    for (k, l) in report.lambda.iter().enumerate() {
        let t = r.u.t(k);
        assert!((l.unwrap() - (eps / (eps + t)).ln()).abs() < 2e-3, "k={k}");
    }
    assert!(report.min_second_difference > 0.0);
    let trace = linear_trace_test(&r, omega(), x0).unwrap();
    assert!(trace.linear_residual < 1e-4, "{}", trace.linear_residual);
}

#[test]
fn probes_reject_boundary_nodes() {
    let data = sample_family(SharpFamilyParams::new(1.0).unwrap(), 8).unwrap();
    let p = EnvelopeProblem::patch(data, omega()).unwrap();
    let r = solve_envelope(&p).unwrap();
    assert!(linear_trace_test(&r, omega(), (0, 4)).is_err());
    assert!(lambda_subharmonicity_probe(&r, omega(), (4, 9)).is_err());
}

#[test]
fn blowup_rows_grow_with_radius() {
    let template = BlowupTemplate {
        omega: omega(),
        potential: PotentialTemplate::Symmetric {
            p: 0.0,
            q: Complex64::new(3.0, 0.0),
            radius: 0.15,
            plateau: 0.35,
        },
        scheme: Scheme::HessianProjection,
    };
    let rows = blowup_scan(&template, &[32], &[0.0, 0.05, 0.1]).unwrap();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1].max_abs >= w[0].max_abs && w[1].oscillation >= w[0].oscillation);
    }
    assert!(rows.iter().all(|r| r.level == 32 && r.sweeps > 0));
}

#[test]
fn blowup_scan_validates_radii() {
    let template = BlowupTemplate {
        omega: omega(),
        potential: PotentialTemplate::Constant { value: 0.0 },
        scheme: Scheme::default(),
    };
    assert!(blowup_scan(&template, &[8], &[-0.1]).is_err());
    let g = Grid::torus(8).unwrap();
    let v = template.potential.sample(g, omega()).unwrap();
    let r = solve_envelope(&EnvelopeProblem::torus(v, omega(), 9).unwrap()).unwrap();
    assert!(blowup_rows(&r, &[]).is_empty());
}

#[test]
fn template_round_trips_through_json() {
    let template = BlowupTemplate {
        omega: omega(),
        potential: PotentialTemplate::Symmetric {
            p: -0.5,
            q: Complex64::new(-0.5, 0.0),
            radius: 0.15,
            plateau: 0.35,
        },
        scheme: Scheme::HessianProjection,
    };
    let text = serde_json::to_string(&template).unwrap();
    let back: BlowupTemplate = serde_json::from_str(&text).unwrap();
    assert_eq!(back, template);
    let extra = text.replacen('{', "{\"colour\":1,", 1);
    assert!(serde_json::from_str::<BlowupTemplate>(&extra).is_err());
}
