use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use nalgebra::DMatrix;
use serde::Serialize;

use hypermode::degeneracy::{classify_modes, sample_box, verify_prop1, Classification, Thresholds};
use hypermode::reduction::{reduce_linear, reduce_quasisemilinear};
use hypermode::simulate::{
    characteristics_oracle, contrast_summary, evolve, initial_value_problem, ContrastSummary,
    EvolveError, EvolveOptions, Grid1D, Status,
};
use hypermode::spectral::{
    amplitude_space, check_hyperbolicity, dispersion_roots, first_order_modes,
    verify_lemma1_factorization, verify_lemma1_kernels, HyperbolicityReport, KernelReport, ModeSet,
    Root, Tolerances, KERNEL_ANGLE_TOL,
};
use hypermode::systems::sample_directions;
use hypermode::systems::specfile::{parse_system, print_system};
use hypermode::{builtin_model, Direction, FirstOrderSystem, SecondOrderSystem, System};

use crate::args::{
    CheckArgs, DegeneracyArgs, InputArgs, OutputArgs, ReduceArgs, SimulateArgs, SpectrumArgs,
    ThresholdArgs, VerifyArgs,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest relative residual accepted for the determinant factorization.
const FACTORIZATION_TOL: f64 = 1e-9;

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    /// Bad input: unknown model, malformed spec file, wrong shapes or flags.
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }
}

type Outcome = Result<u8, Failure>;

#[derive(Debug, Serialize)]
struct InputInfo {
    model: Option<String>,
    spec: Option<String>,
    overrides: Vec<String>,
    kind: &'static str,
    /// `n` for second-order systems, `m` for first-order ones.
    size: usize,
    d: usize,
}

#[derive(Debug, Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    input: InputInfo,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerances: Option<Tolerances>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thresholds: Option<Thresholds>,
    result: T,
}

struct Loaded {
    system: System,
    info: InputInfo,
}

fn load(input: &InputArgs) -> Result<Loaded, Failure> {
    let mut system = match (&input.source.model, &input.source.spec) {
        (Some(name), _) => builtin_model(name, input.seed).map_err(Failure::input)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(Failure::input)?;
            parse_system(&text)
                .with_context(|| format!("in {}", path.display()))
                .map_err(Failure::input)?
        }
        (None, None) => return Err(Failure::input(anyhow!("one of --model or --spec is required"))),
    };
    for spec in &input.overrides {
        let (name, value) = parse_override(spec).map_err(Failure::input)?;
        system
            .override_matrix(&name, &value)
            .with_context(|| format!("override `{spec}`"))
            .map_err(Failure::input)?;
    }
    let (kind, size) = match &system {
        System::SecondOrder(s) => ("second-order", s.n()),
        System::FirstOrder(f) => ("first-order", f.m()),
    };
    let info = InputInfo {
        model: input.source.model.clone(),
        spec: input.source.spec.as_ref().map(|p| p.display().to_string()),
        overrides: input.overrides.clone(),
        kind,
        size,
        d: system.d(),
    };
    Ok(Loaded { system, info })
}

/// `NAME=number` or `NAME=[[row], [row], ..]`.
pub fn parse_override(spec: &str) -> anyhow::Result<(String, DMatrix<f64>)> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form NAME=VALUE"))?;
    let value: serde_json::Value =
        serde_json::from_str(value.trim()).with_context(|| format!("override value `{value}`"))?;
    let number = |v: &serde_json::Value| {
        v.as_f64()
            .ok_or_else(|| anyhow!("override entries must be numbers, got `{v}`"))
    };
    let matrix = match &value {
        serde_json::Value::Array(rows) => {
            let rows: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| match r {
                    serde_json::Value::Array(entries) => entries.iter().map(number).collect(),
                    other => Err(anyhow!("override rows must be arrays, got `{other}`")),
                })
                .collect::<anyhow::Result<_>>()?;
            let cols = rows.first().map_or(0, Vec::len);
            if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
                return Err(anyhow!("override `{spec}` is not a rectangular matrix"));
            }
            DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
        }
        other => DMatrix::from_element(1, 1, number(other)?),
    };
    Ok((name.trim().to_string(), matrix))
}

fn state_or_zero(state: &Option<Vec<f64>>, len: usize) -> Result<Vec<f64>, Failure> {
    match state {
        None => Ok(vec![0.0; len]),
        Some(s) if s.len() == len => Ok(s.clone()),
        Some(s) => Err(Failure::input(anyhow!(
            "--state has {} components, expected {len}",
            s.len()
        ))),
    }
}

fn thresholds(args: &ThresholdArgs) -> Result<Thresholds, Failure> {
    Thresholds::new(args.theta_ld, args.theta_gnl).map_err(Failure::input)
}

fn emit<T: Serialize>(report: &T, output: &OutputArgs) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report).map_err(Failure::runtime)?;
    text.push('\n');
    match &output.report {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::runtime)
}

fn second_order_only(system: System, command: &str) -> Result<SecondOrderSystem, Failure> {
    match system {
        System::SecondOrder(s) => Ok(s),
        System::FirstOrder(_) => Err(Failure::input(anyhow!(
            "`{command}` needs a second-order system"
        ))),
    }
}

#[derive(Debug, Serialize)]
struct FirstOrderDirection {
    direction: Vec<f64>,
    speeds: Vec<(f64, usize)>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum CheckResult {
    SecondOrder {
        state: Vec<f64>,
        directions: usize,
        report: HyperbolicityReport,
        verdict: bool,
    },
    /// Real speeds and complete kernels at every sampled direction.
    FirstOrder {
        state: Vec<f64>,
        directions: Vec<FirstOrderDirection>,
        verdict: bool,
    },
}

pub fn check(args: &CheckArgs) -> Outcome {
    let Loaded { system, info } = load(&args.input)?;
    let tol = args.tol.tolerances();
    let dirs = sample_directions(system.d(), args.dirs);
    let result = match &system {
        System::SecondOrder(sos) => {
            let state = state_or_zero(&args.state, sos.n())?;
            let report = check_hyperbolicity(sos, &state, &dirs, &tol).map_err(Failure::input)?;
            CheckResult::SecondOrder {
                state,
                directions: dirs.len(),
                verdict: report.verdict,
                report,
            }
        }
        System::FirstOrder(fos) => {
            let state = state_or_zero(&args.state, fos.m())?;
            let directions: Vec<_> = dirs
                .iter()
                .map(|xi| {
                    let (speeds, error) = match first_order_modes(fos, &state, xi, &tol) {
                        Ok(set) => (set.all_modes().iter().map(|m| (m.speed, m.multiplicity)).collect(), None),
                        Err(e) => (Vec::new(), Some(e.to_string())),
                    };
                    FirstOrderDirection {
                        direction: xi.as_slice().to_vec(),
                        speeds,
                        error,
                    }
                })
                .collect();
            let verdict = directions.iter().all(|d| d.error.is_none());
            CheckResult::FirstOrder {
                state,
                directions,
                verdict,
            }
        }
    };
    let verdict = match &result {
        CheckResult::SecondOrder { verdict, .. } | CheckResult::FirstOrder { verdict, .. } => *verdict,
    };
    emit(
        &Report {
            schema_version: SCHEMA_VERSION,
            command: "check",
            input: info,
            seed: args.input.seed,
            tolerances: Some(tol),
            thresholds: None,
            result,
        },
        &args.output,
    )?;
    Ok(if verdict { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct RootEntry {
    #[serde(flatten)]
    root: Root,
    /// Orthonormal basis of the amplitude space, one column per entry.
    amplitude_space: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct SpectrumEntry {
    direction: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    roots: Option<Vec<RootEntry>>,
    modes: Option<ModeSet>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SpectrumResult {
    state: Vec<f64>,
    /// Modes are those of the constant-coefficient reduction for
    /// second-order input.
    entries: Vec<SpectrumEntry>,
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn second_order_spectrum(
    sos: &SecondOrderSystem,
    u: &[f64],
    xi: &Direction,
    tol: &Tolerances,
) -> hypermode::Result<(Vec<RootEntry>, ModeSet)> {
    let roots = dispersion_roots(sos, u, xi, tol)?
        .into_iter()
        .map(|root| {
            amplitude_space(sos, u, root.value, xi, tol).map(|x| RootEntry {
                root,
                amplitude_space: columns(&x),
            })
        })
        .collect::<hypermode::Result<Vec<_>>>()?;
    let fos = reduce_linear(sos, u)?;
    let modes = first_order_modes(&fos, &vec![0.0; fos.m()], xi, tol)?;
    Ok((roots, modes))
}

pub fn spectrum(args: &SpectrumArgs) -> Outcome {
    let Loaded { system, info } = load(&args.input)?;
    let tol = args.tol.tolerances();
    let d = system.d();
    let dirs = match &args.xi {
        Some(xi) => {
            if xi.len() != d {
                return Err(Failure::input(anyhow!("--xi has {} components, expected {d}", xi.len())));
            }
            vec![Direction::normalized(xi.clone()).map_err(Failure::input)?]
        }
        None => sample_directions(d, args.dirs),
    };
    let (state, entries): (Vec<f64>, Vec<SpectrumEntry>) = match &system {
        System::SecondOrder(sos) => {
            let u = state_or_zero(&args.state, sos.n())?;
            let entries = dirs
                .iter()
                .map(|xi| {
                    let direction = xi.as_slice().to_vec();
                    match second_order_spectrum(sos, &u, xi, &tol) {
                        Ok((roots, modes)) => SpectrumEntry {
                            direction,
                            roots: Some(roots),
                            modes: Some(modes),
                            error: None,
                        },
                        Err(e) => SpectrumEntry {
                            direction,
                            roots: Some(Vec::new()),
                            modes: None,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();
            (u, entries)
        }
        System::FirstOrder(fos) => {
            let v = state_or_zero(&args.state, fos.m())?;
            let entries = dirs
                .iter()
                .map(|xi| {
                    let (modes, error) = match first_order_modes(fos, &v, xi, &tol) {
                        Ok(m) => (Some(m), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    SpectrumEntry {
                        direction: xi.as_slice().to_vec(),
                        roots: None,
                        modes,
                        error,
                    }
                })
                .collect();
            (v, entries)
        }
    };
    let ok = entries.iter().all(|e| e.error.is_none());
    emit(
        &Report {
            schema_version: SCHEMA_VERSION,
            command: "spectrum",
            input: info,
            seed: args.input.seed,
            tolerances: Some(tol),
            thresholds: None,
            result: SpectrumResult { state, entries },
        },
        &args.output,
    )?;
    Ok(if ok { 0 } else { 1 })
}

pub fn reduce(args: &ReduceArgs) -> Outcome {
    let Loaded { system, .. } = load(&args.input)?;
    let sos = second_order_only(system, "reduce")?;
    let (n, d) = (sos.n(), sos.d());
    let q_labels = (1..=d).map(|j| format!("Q{j}"));
    let (fos, layout) = if args.linear {
        let u = state_or_zero(&args.state, n)?;
        let fos = reduce_linear(&sos, &u).map_err(Failure::input)?;
        (fos, std::iter::once("P".to_string()).chain(q_labels).collect::<Vec<_>>())
    } else {
        if args.state.is_some() {
            return Err(Failure::input(anyhow!("--state only applies with --linear")));
        }
        let (fos, map) = reduce_quasisemilinear(&sos).map_err(Failure::input)?;
        (fos, map.layout)
    };
    let text = format!(
        "# state blocks of size {n}: {}\n{}",
        layout.join(", "),
        print_system(&System::FirstOrder(fos))
    );
    match &args.out {
        Some(path) => write_file(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct ClassCounts {
    gnl: usize,
    ld: usize,
    inconclusive: usize,
}

#[derive(Debug, Serialize)]
struct DegeneracyResult {
    /// Block labels of the state vector that was sampled.
    layout: Vec<String>,
    states: usize,
    directions: usize,
    half_width: f64,
    counts: ClassCounts,
    /// Largest indicator over nonzero modes.
    max_indicator: f64,
    report: hypermode::degeneracy::DegeneracyReport,
}

fn first_order_of(system: System) -> Result<(FirstOrderSystem, Vec<String>), Failure> {
    match system {
        System::SecondOrder(sos) => {
            let (fos, map) = reduce_quasisemilinear(&sos).map_err(Failure::input)?;
            Ok((fos, map.layout))
        }
        System::FirstOrder(fos) => {
            let layout = (1..=fos.m()).map(|i| format!("V{i}")).collect();
            Ok((fos, layout))
        }
    }
}

pub fn degeneracy(args: &DegeneracyArgs) -> Outcome {
    let Loaded { system, info } = load(&args.input)?;
    let tol = args.tol.tolerances();
    let thr = thresholds(&args.thresholds)?;
    let s = &args.sampling;
    if !(s.half_width >= 0.0) {
        return Err(Failure::input(anyhow!("--box must be non-negative")));
    }
    let (fos, layout) = first_order_of(system)?;
    let states = sample_box(fos.m(), s.states, s.half_width, args.input.seed);
    let dirs = sample_directions(fos.d(), s.dirs);
    let report = classify_modes(&fos, &states, &dirs, &thr, &tol);
    let count = |c: Classification| report.rows.iter().filter(|r| r.classification == c).count();
    let counts = ClassCounts {
        gnl: count(Classification::Gnl),
        ld: count(Classification::Ld),
        inconclusive: count(Classification::Inconclusive),
    };
    let clean = report.errors.is_empty();
    emit(
        &Report {
            schema_version: SCHEMA_VERSION,
            command: "degeneracy",
            input: info,
            seed: args.input.seed,
            tolerances: Some(tol),
            thresholds: Some(thr),
            result: DegeneracyResult {
                layout,
                states: states.len(),
                directions: dirs.len(),
                half_width: s.half_width,
                counts,
                max_indicator: report.max_indicator(false),
                report,
            },
        },
        &args.output,
    )?;
    Ok(if clean { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct Check<T: Serialize> {
    passed: bool,
    value: Option<f64>,
    tolerance: f64,
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<T>,
}

impl<T: Serialize> Check<T> {
    fn failed(tolerance: f64, error: String) -> Self {
        Check {
            passed: false,
            value: None,
            tolerance,
            error: Some(error),
            details: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct VerifyResult {
    state: Vec<f64>,
    directions: usize,
    hyperbolicity: HyperbolicityReport,
    factorization: Check<Vec<f64>>,
    kernels: Check<Vec<KernelReport>>,
    linear_degeneracy: Check<hypermode::degeneracy::LinearDegeneracyReport>,
    passed: bool,
}

/// Ten Chebyshev nodes on `[-scale, scale]`, none of them zero.
fn chebyshev(scale: f64) -> Vec<f64> {
    (0..10)
        .map(|k| scale * ((2 * k + 1) as f64 * std::f64::consts::PI / 20.0).cos())
        .collect()
}

pub fn verify(args: &VerifyArgs) -> Outcome {
    let Loaded { system, info } = load(&args.input)?;
    let sos = second_order_only(system, "verify")?;
    let tol = args.tol.tolerances();
    let thr = thresholds(&args.thresholds)?;
    let s = &args.sampling;
    let u = state_or_zero(&args.state, sos.n())?;
    let dirs = sample_directions(sos.d(), s.dirs);
    let hyperbolicity = check_hyperbolicity(&sos, &u, &dirs, &tol).map_err(Failure::input)?;

    let factorization = (|| -> hypermode::Result<Vec<f64>> {
        dirs.iter()
            .map(|xi| {
                let roots = dispersion_roots(&sos, &u, xi, &tol)?;
                let scale = 2.0 * roots.iter().map(|r| r.value.abs()).fold(1.0, f64::max);
                verify_lemma1_factorization(&sos, &u, xi, &chebyshev(scale))
            })
            .collect()
    })();
    let factorization = match factorization {
        Ok(residuals) => {
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            Check {
                passed: worst <= FACTORIZATION_TOL,
                value: Some(worst),
                tolerance: FACTORIZATION_TOL,
                error: None,
                details: Some(residuals),
            }
        }
        Err(e) => Check::failed(FACTORIZATION_TOL, e.to_string()),
    };

    let kernels = match dirs
        .iter()
        .map(|xi| verify_lemma1_kernels(&sos, &u, xi, &tol))
        .collect::<hypermode::Result<Vec<_>>>()
    {
        Ok(reports) => {
            let worst = reports
                .iter()
                .flat_map(|r| r.modes.iter().map(|m| m.angle_sin.max(m.converse_residual)))
                .fold(0.0, f64::max);
            Check {
                passed: worst <= KERNEL_ANGLE_TOL,
                value: Some(worst),
                tolerance: KERNEL_ANGLE_TOL,
                error: None,
                details: Some(reports),
            }
        }
        Err(e) => Check::failed(KERNEL_ANGLE_TOL, e.to_string()),
    };

    let linear_degeneracy =
        match verify_prop1(&sos, s.states, s.dirs, args.input.seed, s.half_width, &thr, &tol) {
            Ok(report) => Check {
                passed: report.max_indicator <= thr.ld,
                value: Some(report.max_indicator),
                tolerance: thr.ld,
                error: None,
                details: Some(report),
            },
            Err(e) => Check::failed(thr.ld, e.to_string()),
        };

    let passed =
        hyperbolicity.verdict && factorization.passed && kernels.passed && linear_degeneracy.passed;
    emit(
        &Report {
            schema_version: SCHEMA_VERSION,
            command: "verify",
            input: info,
            seed: args.input.seed,
            tolerances: Some(tol),
            thresholds: Some(thr),
            result: VerifyResult {
                state: u,
                directions: dirs.len(),
                hyperbolicity,
                factorization,
                kernels,
                linear_degeneracy,
                passed,
            },
        },
        &args.output,
    )?;
    Ok(if passed { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct SimulateResult {
    grid: Grid1D,
    cfl: f64,
    layout: Vec<String>,
    /// Exact blowup time from characteristics, for scalar Burgers-type input.
    oracle_blowup_time: Option<f64>,
    abort_reason: Option<String>,
    summary: ContrastSummary,
}

pub fn simulate(args: &SimulateArgs) -> Outcome {
    let Loaded { system, info } = load(&args.input)?;
    if system.d() != 1 {
        return Err(Failure::input(anyhow!(
            "simulation needs d = 1, got d = {}",
            system.d()
        )));
    }
    let grid = Grid1D::new(args.cells, args.length).map_err(Failure::input)?;
    let opts = EvolveOptions {
        cfl: args.cfl,
        horizon: args.horizon,
        ..EvolveOptions::default()
    };
    let (fos, v0) = initial_value_problem(&system, &grid, args.amplitude).map_err(Failure::input)?;
    let layout = match &system {
        System::SecondOrder(sos) => {
            let mut l: Vec<String> = (1..=sos.n()).map(|i| format!("P{i}")).collect();
            l.extend((1..=sos.n()).map(|i| format!("Q{i}")));
            l.extend((1..=sos.n()).map(|i| format!("U{i}")));
            l
        }
        System::FirstOrder(f) => (1..=f.m()).map(|i| format!("V{i}")).collect(),
    };
    let (traj, abort_reason) = match evolve(&fos, grid, &v0, &opts) {
        Ok(t) => (t, None),
        Err(EvolveError::Setup(e)) => return Err(Failure::input(e)),
        Err(EvolveError::Aborted {
            reason,
            time,
            trajectory,
        }) => (*trajectory, Some(format!("at t = {time}: {reason}"))),
    };
    let slopes: Vec<f64> = {
        let k = std::f64::consts::TAU / args.length;
        grid.points().iter().map(|x| args.amplitude * k * (k * x).cos()).collect()
    };
    let oracle = characteristics_oracle(&fos, &slopes).ok().flatten();
    if let Some(path) = &args.out {
        let file = fs::File::create(path)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::runtime)?;
        let mut w = std::io::BufWriter::new(file);
        traj.write_csv(&mut w)
            .and_then(|_| w.flush())
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::runtime)?;
    }
    let summary = contrast_summary(&traj, args.amplitude, args.horizon);
    let code = match (&abort_reason, traj.status) {
        (Some(_), _) | (None, Status::CflCollapse) => 1,
        (None, Status::Completed | Status::BlowupDetected) => 0,
    };
    emit(
        &Report {
            schema_version: SCHEMA_VERSION,
            command: "simulate",
            input: info,
            seed: args.input.seed,
            tolerances: None,
            thresholds: None,
            result: SimulateResult {
                grid,
                cfl: args.cfl,
                layout,
                oracle_blowup_time: oracle,
                abort_reason,
                summary,
            },
        },
        &OutputArgs {
            report: args.summary.clone(),
        },
    )?;
    Ok(code)
}
