//! Command parameters. Each struct doubles as clap flags and as the `params`
//! object of a run config, so both entry points accept the same fields.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use spintau_core::conformal_opt::MinimizeConfig;
use spintau_core::lattice_spectra::{Lattice2, SpinOffset};
use spintau_core::revolution_dirac::{
    cylinder, dumbbell, handle, round_sphere, sphere, torus_of_revolution, RevolutionProfile, ThetaSector, Topology,
};
use spintau_core::z2_forms::{parse_bits, QuadraticForm};

use crate::CliError;

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Command {
    /// Arf invariant and α of a quadratic form.
    Arf(FormArgs),
    /// All forms of a genus with their Arf invariants, as CSV.
    Enumerate(EnumerateArgs),
    /// Connected sum or 0-dimensional surgery on forms, with normal forms.
    SurgeryAlgebra(SurgeryAlgebraArgs),
    /// Dirac spectrum of a flat torus.
    FlatSpectrum(FlatSpectrumArgs),
    /// Dirac spectrum and λ₁⁺·Area^{1/2} of a surface of revolution.
    RevolutionSpectrum(RevolutionSpectrumArgs),
    /// Minimises λ₁⁺·Vol^{1/2} over a conformal class.
    MinimizeLamin(MinimizeArgs),
    /// Neck-shrinking convergence experiment.
    SurgeryDemo(SurgeryDemoArgs),
    /// τ of a surface from its form: 0 when α = 1, 2√π otherwise.
    Tau(FormArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Arf(_) => "arf",
            Command::Enumerate(_) => "enumerate",
            Command::SurgeryAlgebra(_) => "surgery-algebra",
            Command::FlatSpectrum(_) => "flat-spectrum",
            Command::RevolutionSpectrum(_) => "revolution-spectrum",
            Command::MinimizeLamin(_) => "minimize-lamin",
            Command::SurgeryDemo(_) => "surgery-demo",
            Command::Tau(_) => "tau",
        }
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormArgs {
    /// Values on a₁, b₁, …, a_g, b_g, comma separated.
    #[arg(long, required = true)]
    pub form: Option<String>,
    /// Expected genus; checked against the form.
    #[arg(long)]
    pub genus: Option<usize>,
}

impl FormArgs {
    pub fn parse(&self) -> Result<QuadraticForm, CliError> {
        parse_form(required(&self.form, "form")?, self.genus)
    }
}

pub fn required<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("missing parameter `{name}`")))
}

pub fn parse_form(bits: &str, genus: Option<usize>) -> Result<QuadraticForm, CliError> {
    let values = parse_bits(bits)?;
    if values.len() % 2 != 0 {
        return Err(CliError::Usage(format!(
            "a form needs an even number of values, got {}",
            values.len()
        )));
    }
    let g = values.len() / 2;
    if let Some(expected) = genus {
        if expected != g {
            return Err(CliError::Usage(format!("--genus {expected} but the form has genus {g}")));
        }
    }
    Ok(QuadraticForm::new(g, values)?)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerateArgs {
    #[arg(long, required = true)]
    pub genus: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurgeryAlgebraArgs {
    /// The form of the first surface.
    #[arg(long, required = true)]
    pub form: Option<String>,
    /// Second form; when given the result is the connected sum.
    #[arg(long)]
    pub with: Option<String>,
    /// Value on the core of the new handle for 0-dimensional surgery.
    #[arg(long, default_value_t = 0)]
    pub core: u8,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatSpectrumArgs {
    /// `square`, `hexagonal` or four numbers `v1x,v1y,v2x,v2y`.
    #[arg(long, default_value = "square")]
    pub lattice: String,
    /// Spin offset, each entry 0 or 0.5.
    #[arg(long, default_value = "0.5,0.5")]
    pub delta: String,
    /// Largest |λ| reported.
    #[arg(long, default_value_t = 20.0)]
    pub cutoff: f64,
}

impl Default for FlatSpectrumArgs {
    fn default() -> Self {
        Self {
            lattice: "square".into(),
            delta: "0.5,0.5".into(),
            cutoff: 20.0,
        }
    }
}

pub fn parse_lattice(s: &str) -> Result<Lattice2<f64>, CliError> {
    match s.trim() {
        "square" => Ok(Lattice2::square()),
        "hexagonal" => Ok(Lattice2::hexagonal()),
        other => {
            let v = parse_numbers(other, 4, "lattice")?;
            Ok(Lattice2::new([v[0], v[1]], [v[2], v[3]])?)
        }
    }
}

pub fn parse_offset(s: &str) -> Result<SpinOffset, CliError> {
    let v = parse_numbers(s, 2, "delta")?;
    Ok(SpinOffset::new(v[0], v[1])?)
}

fn parse_numbers(s: &str, count: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("{what}: {e}")))?;
    if v.len() != count {
        return Err(CliError::Usage(format!("{what}: expected {count} numbers, got {}", v.len())));
    }
    Ok(v)
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RevolutionSpectrumArgs {
    /// Profile: `sphere`, `sphere:R`, `cylinder:radius,length`,
    /// `dumbbell:rho,length`, `torus:R,a`, `handle:rho,length`, or a CSV file
    /// of `t,r` samples as `file:path` or `file:path:periodic`.
    #[arg(long, default_value = "sphere")]
    pub profile: String,
    /// Number of profile samples.
    #[arg(long = "N", default_value_t = 2048)]
    #[serde(rename = "N")]
    pub n: usize,
    /// Largest angular index |k| scanned.
    #[arg(long, default_value_t = 40.0)]
    pub k_max: f64,
    /// Number of nonnegative eigenvalues listed.
    #[arg(long, default_value_t = 12)]
    pub count: usize,
}

impl Default for RevolutionSpectrumArgs {
    fn default() -> Self {
        Self {
            profile: "sphere".into(),
            n: 2048,
            k_max: 40.0,
            count: 12,
        }
    }
}

/// Builds a profile from its textual description.
pub fn parse_profile(spec: &str, n: usize) -> Result<RevolutionProfile<f64>, CliError> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let nums = |count: usize| parse_numbers(rest, count, name);
    let profile = match name {
        "sphere" if rest.is_empty() => sphere(n)?,
        "sphere" => round_sphere(nums(1)?[0], n)?,
        "cylinder" => {
            let v = nums(2)?;
            cylinder(v[0], v[1], n, ThetaSector::HalfInteger, -1)?
        }
        "dumbbell" => {
            let v = nums(2)?;
            dumbbell(v[0], v[1], n)?
        }
        "torus" => {
            let v = nums(2)?;
            torus_of_revolution(v[0], v[1], n, ThetaSector::HalfInteger, -1)?
        }
        "handle" => {
            let v = nums(2)?;
            handle(v[0], v[1], n, -1)?
        }
        "file" => {
            let (path, topology) = match rest.rsplit_once(':') {
                Some((p, "periodic")) => (p, Topology::Periodic),
                Some((p, "caps")) => (p, Topology::Caps),
                _ => (rest, Topology::Caps),
            };
            read_profile(&PathBuf::from(path), topology)?
        }
        other => return Err(CliError::Usage(format!("unknown profile `{other}`"))),
    };
    Ok(profile)
}

#[derive(Deserialize)]
struct Sample {
    t: f64,
    r: f64,
}

fn read_profile(path: &PathBuf, topology: Topology) -> Result<RevolutionProfile<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut t = Vec::new();
    let mut r = Vec::new();
    for row in reader.deserialize::<Sample>() {
        let s = row.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        t.push(s.t);
        r.push(s.r);
    }
    // Periodic profiles carry the bounding structure around the θ circle and
    // the nonbounding one along t.
    Ok(RevolutionProfile::from_samples(&t, &r, topology, ThetaSector::HalfInteger, -1)?)
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeArgs {
    /// `flat-torus` or a profile description as for `revolution-spectrum`.
    #[arg(long, default_value = "flat-torus")]
    pub base: String,
    /// Lattice of the flat torus.
    #[arg(long, default_value = "square")]
    pub lattice: String,
    /// Spin offset of the flat torus.
    #[arg(long, default_value = "0.5,0.5")]
    pub delta: String,
    /// Solver settings: a JSON file on the command line, a path or an
    /// inline object in a run config. The grid size `N` is also the sample
    /// count of profiles.
    #[arg(long, value_parser = parse_solver_path)]
    pub solver: Option<SolverSource>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SolverSource {
    Inline(MinimizeConfig),
    File(PathBuf),
}

fn parse_solver_path(s: &str) -> Result<SolverSource, String> {
    Ok(SolverSource::File(PathBuf::from(s)))
}

impl SolverSource {
    pub fn load(&self) -> Result<MinimizeConfig, CliError> {
        match self {
            SolverSource::Inline(c) => Ok(c.clone()),
            SolverSource::File(p) => load_json(p),
        }
    }
}

/// Reads a JSON file; unreadable or malformed input is a usage error.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

impl Default for MinimizeArgs {
    fn default() -> Self {
        Self {
            base: "flat-torus".into(),
            lattice: "square".into(),
            delta: "0.5,0.5".into(),
            solver: None,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurgeryDemoArgs {
    /// Experiment description as JSON; overrides the other flags.
    #[arg(long)]
    pub experiment: Option<PathBuf>,
    /// `two-spheres` or `sphere-with-two-points`.
    #[arg(long, default_value = "two-spheres")]
    pub base: String,
    /// Neck radii, comma separated.
    #[arg(long, default_value = "0.3,0.1,0.03")]
    pub necks: String,
    /// Also write an SVG plot.
    #[arg(long)]
    pub svg: bool,
}

impl Default for SurgeryDemoArgs {
    fn default() -> Self {
        Self {
            experiment: None,
            base: "two-spheres".into(),
            necks: "0.3,0.1,0.03".into(),
            svg: false,
        }
    }
}

pub fn parse_necks(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("necks: {e}")))
}
