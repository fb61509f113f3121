use std::path::{Path, PathBuf};

use kahler_core::geodesic_envelope::{
    solve_envelope, symmetrize_check, uniqueness_probe, EnvelopeProblem, EnvelopeResult,
};
use kahler_core::io::{read_grid_slice, write_grid_function};
use kahler_core::obstruction::{
    build_symmetric_potential, check_obstruction, check_obstruction_sampled, CutoffSpec, ObstructionInstance,
    ObstructionVerdict,
};
use kahler_core::regularity_probe::{
    blowup_rows, lambda_subharmonicity_probe, linear_trace_test, LambdaReport, PotentialTemplate, TraceDiagnostics,
};
use kahler_core::sharp_family::{
    check_family_grid, sample_family, sharpness_limit, FamilyCheck, SharpFamilyParams, SharpnessRow,
};
use kahler_core::strip_harmonic::strip_asymptotics;
use kahler_core::{Grid, GridFunction, GridSlice, KahlerCoefficient, QuadratureSpec, Topology, VERSION};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{MatrixInput, PotentialSpec, SolveConfig};
use crate::output::{emit, to_csv, to_json, write_atomic, Format, Target};
use crate::CliError;

/// Output envelope shared by every JSON result.
#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    version: &'a str,
    command: &'a str,
    config: &'a C,
    #[serde(flatten)]
    result: R,
}

fn write_report<C: Serialize, R: Serialize>(
    target: &Target,
    command: &str,
    config: &C,
    result: R,
) -> Result<(), CliError> {
    emit(
        target,
        &to_json(&Report {
            version: VERSION,
            command,
            config,
            result,
        })?,
    )
}

fn write_table<C: Serialize, R: Serialize>(
    target: &Target,
    command: &str,
    config: &C,
    rows: &[R],
) -> Result<(), CliError> {
    let config = serde_json::to_string(config).map_err(|e| CliError::Internal(e.to_string()))?;
    let provenance = [
        ("version", VERSION.to_string()),
        ("command", command.to_string()),
        ("config", config),
    ];
    emit(target, &to_csv(&provenance, rows)?)
}

fn omega(value: f64) -> Result<KahlerCoefficient, CliError> {
    KahlerCoefficient::new(value).map_err(|e| CliError::Validation(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct StripConfig {
    pub lambdas: Vec<f64>,
    pub quadrature: QuadratureSpec,
}

#[derive(Serialize)]
struct StripRow {
    lambda: f64,
    i: f64,
    j: f64,
    k: f64,
    i_ratio: f64,
    j_ratio: f64,
    k_ratio: f64,
    i_rel_error: f64,
    j_rel_error: f64,
    k_rel_error: f64,
    k_bounded_by_j: bool,
    quad_error_i: f64,
    quad_error_j: f64,
    quad_error_k: f64,
}

pub fn strip(cfg: &StripConfig, target: &Target) -> Result<(), CliError> {
    if cfg.lambdas.is_empty() {
        return Err(CliError::Validation("--lambdas needs at least one value".into()));
    }
    let rows: Vec<StripRow> = strip_asymptotics(&cfg.lambdas, &cfg.quadrature)?
        .into_iter()
        .map(|r| StripRow {
            lambda: r.values.lambda,
            i: r.values.i,
            j: r.values.j,
            k: r.values.k,
            i_ratio: r.i_ratio,
            j_ratio: r.j_ratio,
            k_ratio: r.k_ratio,
            i_rel_error: (r.i_ratio - 1.0).abs(),
            j_rel_error: (r.j_ratio - 1.0).abs(),
            k_rel_error: (r.k_ratio - 1.0).abs(),
            k_bounded_by_j: r.values.k_bounded_by_j(),
            quad_error_i: r.values.error_i,
            quad_error_j: r.values.error_j,
            quad_error_k: r.values.error_k,
        })
        .collect();
    match target.format {
        Format::Csv => write_table(target, "strip-asymptotics", cfg, &rows),
        Format::Json => {
            #[derive(Serialize)]
            struct Rows<'a> {
                rows: &'a [StripRow],
            }
            write_report(target, "strip-asymptotics", cfg, Rows { rows: &rows })
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ObstructionConfig {
    pub omega: MatrixInput,
    pub p: MatrixInput,
    pub q: MatrixInput,
    pub sampled: bool,
    pub samples: usize,
    pub seed: u64,
}

pub fn obstruction(cfg: &ObstructionConfig, target: &Target) -> Result<(), CliError> {
    if target.format != Format::Json {
        return Err(CliError::Validation("check-obstruction writes JSON only".into()));
    }
    let inst = ObstructionInstance::new(
        cfg.omega.to_matrix("omega")?,
        cfg.p.to_matrix("p")?,
        cfg.q.to_matrix("q")?,
    )?;
    let verdict = check_obstruction(&inst)?;
    let sampled = if cfg.sampled {
        Some(check_obstruction_sampled(&inst, cfg.samples, cfg.seed)?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct Out {
        m: usize,
        #[serde(flatten)]
        verdict: ObstructionVerdict,
        #[serde(skip_serializing_if = "Option::is_none")]
        sampled: Option<ObstructionVerdict>,
    }
    write_report(
        target,
        "check-obstruction",
        cfg,
        Out {
            m: inst.m(),
            verdict,
            sampled,
        },
    )
}

#[derive(Debug, Serialize)]
pub struct FamilyConfig {
    pub epsilon: f64,
    pub grid: usize,
    pub eps_sequence: Vec<f64>,
}

pub fn family(cfg: &FamilyConfig, target: &Target) -> Result<(), CliError> {
    let params = SharpFamilyParams::new(cfg.epsilon)?;
    let check = check_family_grid(params, cfg.grid)?;
    let sharpness = sharpness_limit(&cfg.eps_sequence)?;
    match target.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out {
                check: FamilyCheck,
                sharpness: Vec<SharpnessRow>,
            }
            write_report(target, "verify-sharp-family", cfg, Out { check, sharpness })
        }
        Format::Csv => {
            // the grid check goes into the provenance block, the ε table into rows
            #[derive(Serialize)]
            struct Both<'a> {
                #[serde(flatten)]
                cfg: &'a FamilyConfig,
                check: FamilyCheck,
            }
            write_table(target, "verify-sharp-family", &Both { cfg, check }, &sharpness)
        }
    }
}

/// A solve-ready problem plus what the potential builder reported.
struct Built {
    problem: EnvelopeProblem,
    builder: Option<BuilderInfo>,
    exact: Option<GridFunction>,
}

#[derive(Debug, Clone, Serialize)]
struct BuilderInfo {
    radius: f64,
    plateau: f64,
    min_levi: f64,
    p_discrete: f64,
    q_discrete: Complex64,
}

fn read_slice(path: &Path) -> Result<GridSlice, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_grid_slice(file)?.0)
}

fn build(cfg: &SolveConfig, base: &Path) -> Result<Built, CliError> {
    let w = omega(cfg.omega11)?;
    let torus = || Grid::torus(cfg.n).map_err(|e| CliError::Validation(e.to_string()));
    let nt = cfg.nt.unwrap_or(cfg.n + 1);
    let mut builder = None;
    let mut exact = None;
    let mut problem = match &cfg.v {
        PotentialSpec::Constant { value } => EnvelopeProblem::torus(GridSlice::from_fn(torus()?, |_| *value)?, w, nt)?,
        PotentialSpec::Symmetric { p, q, radius, plateau } => {
            let template = PotentialTemplate::Symmetric {
                p: *p,
                q: q.value(),
                radius: *radius,
                plateau: *plateau,
            };
            EnvelopeProblem::torus(template.sample(torus()?, w)?, w, nt)?
        }
        PotentialSpec::Builder { p, q } => {
            let sp = build_symmetric_potential(torus()?, w, *p, q.value(), &CutoffSpec::default())?;
            builder = Some(BuilderInfo {
                radius: sp.radius,
                plateau: sp.plateau,
                min_levi: sp.min_levi,
                p_discrete: sp.p_discrete,
                q_discrete: sp.q_discrete,
            });
            EnvelopeProblem::torus(sp.v, w, nt)?
        }
        PotentialSpec::Csv { path } => {
            let v = read_slice(&base.join(path))?;
            if v.grid.topology() != Topology::Torus || v.grid.nodes() != cfg.n {
                return Err(CliError::Validation(format!(
                    "{} does not hold a slice on the {}-torus",
                    path.display(),
                    cfg.n
                )));
            }
            EnvelopeProblem::torus(v, w, nt)?
        }
        PotentialSpec::SharpFamily { epsilon } => {
            if cfg.nt.is_some_and(|nt| nt != cfg.n + 1) {
                return Err(CliError::Validation("sharp-family problems use nt = n + 1".into()));
            }
            let data = sample_family(SharpFamilyParams::new(*epsilon)?, cfg.n)?;
            exact = Some(data.clone());
            EnvelopeProblem::patch(data, w)?
        }
    };
    problem = problem.with_scheme(cfg.scheme).with_mode(cfg.mode);
    problem.directions = cfg.directions();
    if let Some(tol) = cfg.tol_sweep {
        problem = problem.with_tolerance(tol);
    }
    if let Some(max) = cfg.max_sweeps {
        problem.max_sweeps = max;
    }
    if let Some(r) = cfg.relaxation {
        problem = problem.with_relaxation(r);
    }
    if let Some(nested) = cfg.nested {
        problem = problem.with_nested(nested);
    }
    problem.validate()?;
    Ok(Built {
        problem,
        builder,
        exact,
    })
}

/// The config with every solver default filled in.
fn resolved(cfg: &SolveConfig, p: &EnvelopeProblem) -> SolveConfig {
    SolveConfig {
        nt: Some(p.nt),
        directions: Some(p.directions.clone()),
        tol_sweep: Some(p.tol_sweep),
        max_sweeps: Some(p.max_sweeps),
        relaxation: Some(p.relaxation),
        nested: Some(p.nested),
        ..cfg.clone()
    }
}

/// `x₀ = 0` on the torus, the centre of a patch.
fn probe_node(grid: &Grid) -> Result<(usize, usize), CliError> {
    grid.origin_node()
        .ok_or_else(|| CliError::Validation("grid has no node at the fixed point".into()))
}

#[derive(Serialize)]
struct SolveSummary {
    sweeps_used: usize,
    final_update: f64,
    relaxation_used: f64,
    barrier_violation: f64,
    barrier_constant: f64,
    hessian_min_eig: f64,
    max_abs_det: f64,
    symmetry_residual: f64,
    trace: TraceDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniqueness_difference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dirichlet_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    builder: Option<BuilderInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_out: Option<PathBuf>,
}

pub fn load_solve_config(path: &Path) -> Result<SolveConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn solve(config_path: &Path, target: &Target, grid_out: Option<&Path>) -> Result<(), CliError> {
    if target.format != Format::Json {
        return Err(CliError::Validation("solve-geodesic writes its summary as JSON".into()));
    }
    let cfg = load_solve_config(config_path)?;
    let built = build(&cfg, &base_dir(config_path))?;
    let problem = &built.problem;
    let (result, uniqueness_difference) = if cfg.uniqueness_probe {
        let probe = uniqueness_probe(problem)?;
        (probe.from_above, Some(probe.difference))
    } else {
        (solve_envelope(problem)?, None)
    };
    let resolved = resolved(&cfg, problem);
    if let Some(path) = grid_out {
        let config_line = serde_json::to_string(&resolved).map_err(|e| CliError::Internal(e.to_string()))?;
        let mut bytes = Vec::new();
        write_grid_function(
            &mut bytes,
            &result.u,
            Some(problem.omega),
            &[format!("version: {VERSION}"), format!("config: {config_line}")],
        )?;
        write_atomic(path, &bytes)?;
    }
    let trace = linear_trace_test(&result, problem.omega, probe_node(&problem.grid)?)?;
    let summary = SolveSummary {
        sweeps_used: result.sweeps_used,
        final_update: result.final_update,
        relaxation_used: result.relaxation_used,
        barrier_violation: result.barrier_violation,
        barrier_constant: result.barrier_constant,
        hessian_min_eig: result.hessian_min_eig,
        max_abs_det: result.max_abs_det,
        symmetry_residual: symmetrize_check(&result, problem),
        trace,
        uniqueness_difference,
        dirichlet_error: built.exact.as_ref().map(|d| result.u.max_abs_diff(d)),
        builder: built.builder,
        grid_out: grid_out.map(Path::to_path_buf),
    };
    write_report(target, "solve-geodesic", &resolved, summary)
}

#[derive(Debug, Serialize)]
pub struct ProbeConfig {
    pub solution: SolveConfig,
    pub levels: Vec<usize>,
    pub radii: Vec<f64>,
}

/// Accepts a `solve-geodesic` result (its `config` field) or a bare config.
pub fn load_probe_source(path: &Path) -> Result<SolveConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    #[derive(Deserialize)]
    struct WithConfig {
        config: SolveConfig,
    }
    if let Ok(w) = serde_json::from_str::<WithConfig>(&text) {
        return Ok(w.config);
    }
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct ProbeRow {
    level: usize,
    h: f64,
    radius: f64,
    max_abs: f64,
    oscillation: f64,
    sweeps: usize,
    linear_residual: f64,
    a_fit: f64,
    lambda_flagged: usize,
    lambda_min_second_difference: f64,
}

#[derive(Serialize)]
struct ProbeLevel {
    level: usize,
    trace: TraceDiagnostics,
    lambda: LambdaReport,
}

/// The config at another resolution; `nt` follows `n`.
fn at_level(cfg: &SolveConfig, level: usize) -> Result<SolveConfig, CliError> {
    if matches!(cfg.v, PotentialSpec::Csv { .. }) && level != cfg.n {
        return Err(CliError::Validation(format!(
            "a CSV potential is fixed to n = {}; it cannot be probed at level {level}",
            cfg.n
        )));
    }
    Ok(SolveConfig {
        n: level,
        nt: if level == cfg.n { cfg.nt } else { None },
        ..cfg.clone()
    })
}

pub fn probe(solution: &Path, levels: &[usize], radii: &[f64], target: &Target) -> Result<(), CliError> {
    if levels.is_empty() {
        return Err(CliError::Validation("--levels needs at least one value".into()));
    }
    if radii.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(CliError::Validation("--radii must be finite and non-negative".into()));
    }
    let cfg = load_probe_source(solution)?;
    let base = base_dir(solution);
    // validate every level before the first (possibly long) solve
    let configs = levels
        .iter()
        .map(|&l| at_level(&cfg, l))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut per_level = Vec::new();
    for level_cfg in &configs {
        let built = build(level_cfg, &base)?;
        let result: EnvelopeResult = solve_envelope(&built.problem)?;
        let x0 = probe_node(&built.problem.grid)?;
        let trace = linear_trace_test(&result, built.problem.omega, x0)?;
        let lambda = lambda_subharmonicity_probe(&result, built.problem.omega, x0)?;
        for b in blowup_rows(&result, radii) {
            rows.push(ProbeRow {
                level: b.level,
                h: b.h,
                radius: b.radius,
                max_abs: b.max_abs,
                oscillation: b.oscillation,
                sweeps: b.sweeps,
                linear_residual: trace.linear_residual,
                a_fit: trace.a_fit,
                lambda_flagged: lambda.flagged,
                lambda_min_second_difference: lambda.min_second_difference,
            });
        }
        per_level.push(ProbeLevel {
            level: level_cfg.n,
            trace,
            lambda,
        });
    }
    let config = ProbeConfig {
        solution: cfg,
        levels: levels.to_vec(),
        radii: radii.to_vec(),
    };
    match target.format {
        Format::Csv => write_table(target, "probe-regularity", &config, &rows),
        Format::Json => {
            #[derive(Serialize)]
            struct Out {
                rows: Vec<ProbeRow>,
                levels: Vec<ProbeLevel>,
            }
            write_report(
                target,
                "probe-regularity",
                &config,
                Out {
                    rows,
                    levels: per_level,
                },
            )
        }
    }
}
