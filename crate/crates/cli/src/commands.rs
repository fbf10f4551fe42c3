//! One function per subcommand. Each writes its files and returns the
//! terminal summary together with any flags raised by the numerics.

use serde::Serialize;
use serde_json::json;

use spintau_core::conformal_opt::{minimize_lamin, FlatTorusBase, MinimizeConfig, RevolutionBase};
use spintau_core::estimate::{EstimateFlags, LaminEstimate};
use spintau_core::lattice_spectra::{self, flat_spectrum, lamin_flat_upper};
use spintau_core::revolution_dirac::{self, area, dirac_spectrum, lambda1_area_product};
use spintau_core::surgery_lab::{run_convergence, tau_report, SurgeryBase, SurgeryExperiment};
use spintau_core::z2_forms::{
    alpha, arf, connected_sum, enumerate_forms, normalize_form, surgery_0d, QuadraticForm, SpinSurface, Z2,
};

use crate::output::{sig6, Output};
use crate::params::*;
use crate::CliError;

pub struct Report {
    pub summary: Vec<String>,
    /// Description of a flagged result, if any.
    pub flagged: Option<String>,
}

impl Report {
    fn ok(summary: Vec<String>) -> Self {
        Self { summary, flagged: None }
    }
}

pub struct Context<'a> {
    pub out: &'a mut Output,
    pub seed: Option<u64>,
}

pub fn dispatch(cmd: &Command, ctx: &mut Context) -> Result<Report, CliError> {
    match cmd {
        Command::Arf(a) => arf_cmd(a, ctx),
        Command::Enumerate(a) => enumerate_cmd(a, ctx),
        Command::SurgeryAlgebra(a) => surgery_algebra_cmd(a, ctx),
        Command::FlatSpectrum(a) => flat_spectrum_cmd(a, ctx),
        Command::RevolutionSpectrum(a) => revolution_spectrum_cmd(a, ctx),
        Command::MinimizeLamin(a) => minimize_cmd(a, ctx),
        Command::SurgeryDemo(a) => surgery_demo_cmd(a, ctx),
        Command::Tau(a) => tau_cmd(a),
    }
}

fn form_json(q: &QuadraticForm) -> Result<serde_json::Value, CliError> {
    Ok(json!({
        "genus": q.genus(),
        "basis_values": q.basis_values(),
        "arf": arf(q)?,
        "alpha": alpha(q)?,
    }))
}

fn arf_cmd(a: &FormArgs, ctx: &mut Context) -> Result<Report, CliError> {
    let q = a.parse()?;
    ctx.out.json("arf.json", &form_json(&q)?)?;
    Ok(Report::ok(vec![
        format!("arf {}", arf(&q)?),
        format!("alpha {}", alpha(&q)?),
    ]))
}

#[derive(Serialize)]
struct FormRow {
    genus: usize,
    basis_values: String,
    arf: i8,
    alpha: u8,
}

fn enumerate_cmd(a: &EnumerateArgs, ctx: &mut Context) -> Result<Report, CliError> {
    let g = *required(&a.genus, "genus")?;
    let mut rows = Vec::new();
    for q in enumerate_forms(g)? {
        rows.push(FormRow {
            genus: g,
            basis_values: q.bits_string(),
            arf: arf(&q)?.sign(),
            alpha: alpha(&q)?.as_u8(),
        });
    }
    let odd = rows.iter().filter(|r| r.alpha == 1).count();
    ctx.out.csv("forms.csv", &rows, &["genus", "basis_values", "arf", "alpha"])?;
    Ok(Report::ok(vec![format!("{} forms of genus {g}, {odd} with alpha 1", rows.len())]))
}

fn surgery_algebra_cmd(a: &SurgeryAlgebraArgs, ctx: &mut Context) -> Result<Report, CliError> {
    let q1 = parse_form(required(&a.form, "form")?, None)?;
    let m1 = SpinSurface::new(q1.clone(), "M1");
    let (operation, result, extra) = match &a.with {
        Some(other) => {
            let q2 = parse_form(other, None)?;
            let m2 = SpinSurface::new(q2.clone(), "M2");
            ("connected_sum", connected_sum(&m1, &m2), json!({ "with": form_json(&q2)? }))
        }
        None => {
            if a.core > 1 {
                return Err(CliError::Usage(format!("core value must be 0 or 1, got {}", a.core)));
            }
            ("surgery_0d", surgery_0d(&m1, Z2::new(a.core)), json!({ "core": a.core }))
        }
    };
    let norm = normalize_form(result.form());
    let report = json!({
        "operation": operation,
        "input": form_json(&q1)?,
        "operand": extra,
        "result": form_json(result.form())?,
        "standard": form_json(&norm.standard)?,
        "witness": norm.witness.to_rows(),
    });
    ctx.out.json("surgery.json", &report)?;
    Ok(Report::ok(vec![
        format!("{operation}: genus {} -> {}", q1.genus(), result.genus()),
        format!("alpha {} -> {}", alpha(&q1)?, result.alpha()?),
        format!("standard form {}", norm.standard.bits_string()),
    ]))
}

fn flat_spectrum_cmd(a: &FlatSpectrumArgs, ctx: &mut Context) -> Result<Report, CliError> {
    let lat = parse_lattice(&a.lattice)?;
    let delta = parse_offset(&a.delta)?;
    let slice = flat_spectrum(&lat, delta, a.cutoff)?;
    let bound = lamin_flat_upper(&lat, delta)?;
    let rows = lattice_spectra::spectrum_rows(&lat, delta, &slice);
    ctx.out.csv(
        "flat_spectrum.csv",
        &rows,
        &["lattice_basis", "delta", "eigenvalue", "multiplicity"],
    )?;
    let summary = json!({
        "lambda1_plus": bound.lambda1_plus,
        "first_positive": bound.first_positive,
        "covolume": bound.covolume,
        "product": bound.product,
        "positive_product": bound.positive_product,
        "kernel": slice.kernel_multiplicity(),
    });
    ctx.out.json("flat_summary.json", &summary)?;
    Ok(Report::ok(vec![
        format!("kernel dimension {}", slice.kernel_multiplicity()),
        format!("first positive eigenvalue {}", sig6(bound.first_positive)),
        format!("lambda1 * area^(1/2) = {}", sig6(bound.product)),
    ]))
}

fn estimate_json(e: &LaminEstimate<f64>) -> serde_json::Value {
    json!({
        "lambda1": e.lambda1,
        "area": e.volume,
        "product": e.product,
        "N": e.grid,
        "k_max": e.k_max,
        "el_residual": e.el_residual,
        "iterations": e.iterations,
        "converged": e.converged,
        "flags": e.flags,
    })
}

/// Flags that make a run fail. A kernel is a valid answer, not a failure.
fn failure_flags(f: &EstimateFlags) -> Option<String> {
    let mut names = Vec::new();
    if f.under_resolved {
        names.push("under_resolved");
    }
    if f.not_converged {
        names.push("not_converged");
    }
    (!names.is_empty()).then(|| names.join(", "))
}

fn revolution_spectrum_cmd(a: &RevolutionSpectrumArgs, ctx: &mut Context) -> Result<Report, CliError> {
    let profile = parse_profile(&a.profile, a.n)?;
    let spec = dirac_spectrum(&profile, a.k_max, a.count)?;
    let est = lambda1_area_product(&profile, a.k_max)?;
    ctx.out.csv("revolution_spectrum.csv", &revolution_dirac::spectrum_rows(&spec), &["k", "eigenvalue"])?;
    ctx.out.json("estimate.json", &estimate_json(&est))?;
    let mut flags = est.flags;
    flags.under_resolved |= spec.under_resolved;
    Ok(Report {
        summary: vec![
            format!("lambda1 {}", sig6(est.lambda1)),
            format!("area {}", sig6(area(&profile))),
            format!("lambda1 * area^(1/2) = {}", sig6(est.product)),
        ],
        flagged: failure_flags(&flags),
    })
}

#[derive(Serialize)]
struct TrajectoryRow {
    iteration: usize,
    product: f64,
    residual: f64,
}

fn minimize_cmd(a: &MinimizeArgs, ctx: &mut Context) -> Result<Report, CliError> {
    let mut config = match &a.solver {
        Some(s) => s.load()?,
        None => MinimizeConfig::default(),
    };
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    config.validate()?;
    let run = if a.base == "flat-torus" {
        let lat = parse_lattice(&a.lattice)?;
        let delta = parse_offset(&a.delta)?;
        let base = FlatTorusBase::new(&lat, delta, config.grid, config.seed)?;
        minimize_lamin(&base, &config)?
    } else {
        let profile = parse_profile(&a.base, config.grid)?;
        let base = RevolutionBase::new(&profile, config.k_max)?;
        minimize_lamin(&base, &config)?
    };
    let e = &run.estimate;
    let mut summary = estimate_json(e);
    summary["initial_product"] = json!(run.products[0]);
    summary["rejected_steps"] = json!(run.rejected_steps);
    summary["fallback_steps"] = json!(run.fallback_steps);
    summary["config"] = serde_json::to_value(&config).map_err(|e| CliError::Io(e.to_string()))?;
    ctx.out.json("lamin.json", &summary)?;
    ctx.out.csv("factor.csv", &run.factor_rows(), &["index", "factor"])?;
    let trajectory: Vec<TrajectoryRow> = run
        .products
        .iter()
        .zip(&run.residuals)
        .enumerate()
        .map(|(iteration, (&product, &residual))| TrajectoryRow {
            iteration,
            product,
            residual,
        })
        .collect();
    ctx.out.csv("trajectory.csv", &trajectory, &["iteration", "product", "residual"])?;
    Ok(Report {
        summary: vec![
            format!("initial product {}", sig6(run.products[0])),
            format!("final product {}", sig6(e.product)),
            format!("residual {} after {} iterations", sig6(e.el_residual), e.iterations),
        ],
        flagged: failure_flags(&e.flags),
    })
}

fn surgery_demo_cmd(a: &SurgeryDemoArgs, ctx: &mut Context) -> Result<Report, CliError> {
    let mut exp: SurgeryExperiment = match &a.experiment {
        Some(path) => load_json(path)?,
        None => {
            let base = match a.base.as_str() {
                "two-spheres" => SurgeryBase::TwoSpheres,
                "sphere-with-two-points" => SurgeryBase::SphereWithTwoPoints,
                other => return Err(CliError::Usage(format!("unknown surgery base `{other}`"))),
            };
            SurgeryExperiment::new(base, parse_necks(&a.necks)?)
        }
    };
    if let Some(seed) = ctx.seed {
        exp.solver.seed = seed;
    }
    let table = run_convergence(&exp)?;
    ctx.out.csv(
        "convergence.csv",
        &table.rows,
        &["neck_param", "lambda1", "area", "product", "residual", "converged", "gap", "flagged"],
    )?;
    ctx.out.json("convergence.json", &table)?;
    if a.svg {
        ctx.out.text("convergence.svg", table.to_svg())?;
    }
    let mut summary: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("neck {}: product {}, residual {}", r.neck_param, sig6(r.product), sig6(r.residual)))
        .collect();
    summary.push(format!("target 2*sqrt(pi) = {}", sig6(table.target)));
    let flagged = table.any_flagged().then(|| {
        let necks: Vec<String> = table
            .rows
            .iter()
            .filter(|r| r.flagged)
            .map(|r| r.neck_param.to_string())
            .collect();
        format!("flagged necks {}", necks.join(", "))
    });
    Ok(Report { summary, flagged })
}

fn tau_cmd(a: &FormArgs) -> Result<Report, CliError> {
    let q = a.parse()?;
    let t = tau_report(q.genus(), &q)?;
    Ok(Report::ok(vec![sig6(t)]))
}
