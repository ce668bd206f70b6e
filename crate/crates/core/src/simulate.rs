//! 1-D periodic evolution of `A0(V) V_t + A(V) V_x = G(V)` with gradient
//! blowup detection.
//!
//! Transport uses a first-order non-conservative local Lax-Friedrichs
//! scheme on the quasilinear form,
//!
//! ```text
//! V_i <- V_i - dt/(2dx) M(V_i) (V_{i+1} - V_{i-1})
//!            + dt/(2dx) alpha_i (V_{i+1} - 2 V_i + V_{i-1})
//! ```
//!
//! with `M = A0^{-1} A` and `alpha_i` the largest spectral radius of `M`
//! over the three-point stencil. The source `A0^{-1} G` is Strang-split
//! around each transport step with Heun half steps.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::reduction::reduce_quasisemilinear;
use crate::systems::{FirstOrderSystem, System};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub cells: usize,
    pub length: f64,
}

impl Grid1D {
    pub const MIN_CELLS: usize = 16;

    pub fn new(cells: usize, length: f64) -> Result<Self> {
        if cells < Self::MIN_CELLS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} cells, got {cells}",
                Self::MIN_CELLS
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid period {length}")));
        }
        Ok(Grid1D { cells, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Completed,
    BlowupDetected,
    CflCollapse,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub components: usize,
    pub times: Vec<f64>,
    /// One entry per stored time; component-major, `states[k][c * N + i]`.
    #[serde(skip)]
    pub states: Vec<Vec<f64>>,
    pub maxgrad: Vec<f64>,
    pub status: Status,
    /// Gradient level at which blowup is declared.
    pub threshold: f64,
}

impl Trajectory {
    pub fn initial_maxgrad(&self) -> f64 {
        self.maxgrad.first().copied().unwrap_or(0.0)
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn component(&self, frame: usize, c: usize) -> &[f64] {
        let n = self.grid.cells;
        &self.states[frame][c * n..(c + 1) * n]
    }

    /// Rows `t, x, V1, .., Vm` for every stored frame and cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t,x")?;
        for c in 0..self.components {
            write!(w, ",V{}", c + 1)?;
        }
        writeln!(w)?;
        let n = self.grid.cells;
        for (k, &t) in self.times.iter().enumerate() {
            for i in 0..n {
                write!(w, "{t:?},{:?}", self.grid.x(i))?;
                for c in 0..self.components {
                    write!(w, ",{:?}", self.states[k][c * n + i])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    pub cfl: f64,
    pub horizon: f64,
    pub max_frames: usize,
    /// Blowup is declared once the maximal gradient exceeds this multiple of
    /// its initial value...
    pub growth_factor: f64,
    /// ...or `resolution_fraction * osc(V0) / dx`, whichever is smaller: a
    /// first-order scheme cannot represent gradients much steeper than the
    /// data range over a few cells.
    pub resolution_fraction: f64,
    pub min_dt: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            cfl: 0.5,
            horizon: 2.0,
            max_frames: 512,
            growth_factor: 1e3,
            resolution_fraction: 0.05,
            min_dt: 1e-12,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("evolution aborted at t = {time}: {reason}")]
    Aborted {
        reason: Error,
        time: f64,
        /// Frames up to and including the last valid state.
        trajectory: Box<Trajectory>,
    },
}

/// Per-cell principal operator `A0^{-1} A` and its spectral radius.
struct CellOperator {
    m: usize,
    matrices: Vec<f64>,
    radius: Vec<f64>,
    /// Constant coefficients: evaluated once, at the first update.
    frozen: bool,
    ready: bool,
}

impl CellOperator {
    fn new(fos: &FirstOrderSystem, cells: usize) -> Self {
        let m = fos.m();
        CellOperator {
            m,
            matrices: vec![0.0; m * m * cells],
            radius: vec![0.0; cells],
            frozen: fos.is_constant_coefficient(),
            ready: false,
        }
    }

    fn update(&mut self, fos: &FirstOrderSystem, state: &[f64], cells: usize) -> Result<()> {
        if self.frozen && self.ready {
            return Ok(());
        }
        let m = self.m;
        let mut v = vec![0.0; m];
        let count = if self.frozen { 1 } else { cells };
        for i in 0..count {
            for (c, vc) in v.iter_mut().enumerate() {
                *vc = state[c * cells + i];
            }
            let (mat, radius) = cell_operator(fos, &v)?;
            self.radius[i] = radius;
            self.matrices[i * m * m..(i + 1) * m * m].copy_from_slice(&mat);
        }
        if self.frozen {
            let (head, radius) = (self.matrices[..m * m].to_vec(), self.radius[0]);
            for i in 1..cells {
                self.matrices[i * m * m..(i + 1) * m * m].copy_from_slice(&head);
                self.radius[i] = radius;
            }
            self.ready = true;
        }
        Ok(())
    }
}

/// Row-major `A0^{-1} A` at `v` and its spectral radius; complex speeds are
/// an error.
fn cell_operator(fos: &FirstOrderSystem, v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let singular = || Error::Conditioning {
        condition: f64::INFINITY,
    };
    let not_real = |im: f64, radius: f64| im.abs() > 1e-8 * radius.max(1e-300);
    if fos.m() == 1 {
        let a0 = fos.a0().entry(0, 0).eval(v);
        let a = fos.a()[0].entry(0, 0).eval(v);
        if a0 == 0.0 {
            return Err(singular());
        }
        return Ok((vec![a / a0], (a / a0).abs()));
    }
    let a0 = fos.a0().eval_unchecked(v);
    let a = fos.a()[0].eval_unchecked(v);
    let mat = a0.lu().solve(&a).ok_or_else(singular)?;
    let row_major: Vec<f64> = mat.transpose().iter().copied().collect();
    if fos.m() == 2 {
        // eigenvalues tr/2 +- sqrt(tr^2/4 - det)
        let half = 0.5 * (mat[(0, 0)] + mat[(1, 1)]);
        let disc = half * half - (mat[(0, 0)] * mat[(1, 1)] - mat[(0, 1)] * mat[(1, 0)]);
        let (re, im) = if disc >= 0.0 { (0.0, 0.0) } else { (half, (-disc).sqrt()) };
        let radius = if disc >= 0.0 {
            half.abs() + disc.sqrt()
        } else {
            (half * half - disc).sqrt()
        };
        if not_real(im, radius) {
            return Err(Error::NotHyperbolic { re, im });
        }
        return Ok((row_major, radius));
    }
    let eig = mat.complex_eigenvalues();
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = eig.iter().find(|z| not_real(z.im, radius)) {
        return Err(Error::NotHyperbolic { re: z.re, im: z.im });
    }
    Ok((row_major, radius))
}

fn max_gradient(state: &[f64], grid: &Grid1D, m: usize) -> f64 {
    let n = grid.cells;
    let scale = 1.0 / (2.0 * grid.dx());
    let mut worst = 0.0f64;
    for i in 0..n {
        let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
        let mut sq = 0.0;
        for c in 0..m {
            let g = (state[c * n + ip] - state[c * n + im]) * scale;
            sq += g * g;
        }
        worst = worst.max(sq.sqrt());
    }
    worst
}

/// `A0^{-1}` when `A0` is constant, so the source step can skip per-cell
/// factorizations.
fn constant_a0_inverse(fos: &FirstOrderSystem) -> Result<Option<DMatrix<f64>>> {
    if !fos.a0().is_constant() {
        return Ok(None);
    }
    let a0 = fos.a0().eval_unchecked(&vec![0.0; fos.m()]);
    a0.try_inverse().map(Some).ok_or(Error::Conditioning {
        condition: f64::INFINITY,
    })
}

fn source_rate(
    fos: &FirstOrderSystem,
    a0_inv: Option<&DMatrix<f64>>,
    state: &[f64],
    cells: usize,
    out: &mut [f64],
) -> Result<()> {
    let m = fos.m();
    let mut v = vec![0.0; m];
    for i in 0..cells {
        for (c, vc) in v.iter_mut().enumerate() {
            *vc = state[c * cells + i];
        }
        let g = fos.g().eval_unchecked(&v);
        let rate: DVector<f64> = match a0_inv {
            Some(inv) => (inv * g).column(0).into_owned(),
            None => fos
                .a0()
                .eval_unchecked(&v)
                .lu()
                .solve(&g)
                .ok_or(Error::Conditioning {
                    condition: f64::INFINITY,
                })?
                .column(0)
                .into_owned(),
        };
        for c in 0..m {
            out[c * cells + i] = rate[c];
        }
    }
    Ok(())
}

/// Heun step of `V' = A0^{-1} G(V)`.
fn source_step(
    fos: &FirstOrderSystem,
    a0_inv: Option<&DMatrix<f64>>,
    state: &mut [f64],
    cells: usize,
    dt: f64,
) -> Result<()> {
    let mut k1 = vec![0.0; state.len()];
    source_rate(fos, a0_inv, state, cells, &mut k1)?;
    let trial: Vec<f64> = state.iter().zip(&k1).map(|(v, k)| v + dt * k).collect();
    let mut k2 = vec![0.0; state.len()];
    source_rate(fos, a0_inv, &trial, cells, &mut k2)?;
    for ((v, a), b) in state.iter_mut().zip(&k1).zip(&k2) {
        *v += 0.5 * dt * (a + b);
    }
    Ok(())
}

fn transport_step(op: &CellOperator, state: &[f64], out: &mut [f64], cells: usize, ratio: f64) {
    let m = op.m;
    for i in 0..cells {
        let (ip, im) = ((i + 1) % cells, (i + cells - 1) % cells);
        let alpha = op.radius[im].max(op.radius[i]).max(op.radius[ip]);
        for r in 0..m {
            let mut adv = 0.0;
            for c in 0..m {
                let diff = state[c * cells + ip] - state[c * cells + im];
                adv += op.matrices[(i * m + r) * m + c] * diff;
            }
            let lap = state[r * cells + ip] - 2.0 * state[r * cells + i] + state[r * cells + im];
            out[r * cells + i] = state[r * cells + i] - 0.5 * ratio * adv + 0.5 * ratio * alpha * lap;
        }
    }
}

/// Evolves `v0` (one vector of cell values per component) up to
/// `opts.horizon`, storing at most `opts.max_frames` equally spaced frames.
pub fn evolve(
    fos: &FirstOrderSystem,
    grid: Grid1D,
    v0: &[Vec<f64>],
    opts: &EvolveOptions,
) -> std::result::Result<Trajectory, EvolveError> {
    let m = fos.m();
    let n = grid.cells;
    if fos.d() != 1 {
        return Err(Error::Unsupported(format!("simulation needs d = 1, got d = {}", fos.d())).into());
    }
    if !(opts.cfl > 0.0 && opts.cfl <= 0.9) {
        return Err(Error::InvalidArgument(format!("cfl {} not in (0, 0.9]", opts.cfl)).into());
    }
    if !(opts.horizon > 0.0) || opts.max_frames < 2 {
        return Err(Error::InvalidArgument("need a positive horizon and at least two frames".into()).into());
    }
    if v0.len() != m || v0.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension {
            expected: m * n,
            got: v0.iter().map(Vec::len).sum(),
        }
        .into());
    }
    let mut state: Vec<f64> = v0.concat();
    let g0 = max_gradient(&state, &grid, m);
    let osc = v0
        .iter()
        .map(|c| {
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            hi - lo
        })
        .fold(0.0, f64::max);
    let threshold = if g0 > 0.0 {
        (opts.growth_factor * g0).min(opts.resolution_fraction * osc / grid.dx())
    } else {
        f64::INFINITY
    };

    let frames = opts.max_frames;
    let output_times: Vec<f64> = (0..frames)
        .map(|k| opts.horizon * k as f64 / (frames - 1) as f64)
        .collect();
    let mut traj = Trajectory {
        grid,
        components: m,
        times: vec![0.0],
        states: vec![state.clone()],
        maxgrad: vec![g0],
        status: Status::Completed,
        threshold,
    };
    let has_source = fos.g().entries().iter().any(|p| !p.is_zero());
    let a0_inv = constant_a0_inverse(fos)?;
    let mut op = CellOperator::new(fos, n);
    let mut scratch = vec![0.0; state.len()];
    let mut t = 0.0;
    let mut next = 1;
    let dx = grid.dx();

    let abort = |reason: Error, t: f64, traj: &Trajectory| EvolveError::Aborted {
        reason,
        time: t,
        trajectory: Box::new(traj.clone()),
    };

    while next < frames {
        if let Err(e) = op.update(fos, &state, n) {
            return Err(abort(e, t, &traj));
        }
        let speed = op.radius.iter().copied().fold(0.0, f64::max);
        let target = output_times[next];
        let mut dt = if speed > 0.0 { opts.cfl * dx / speed } else { f64::INFINITY };
        if dt < opts.min_dt {
            traj.status = Status::CflCollapse;
            if traj.final_time() < t {
                traj.times.push(t);
                traj.states.push(state.clone());
                traj.maxgrad.push(max_gradient(&state, &grid, m));
            }
            return Ok(traj);
        }
        let reached = t + dt >= target;
        if reached {
            dt = target - t;
        }
        let ratio = dt / dx;
        if has_source {
            if let Err(e) = source_step(fos, a0_inv.as_ref(), &mut state, n, 0.5 * dt) {
                return Err(abort(e, t, &traj));
            }
            if let Err(e) = op.update(fos, &state, n) {
                return Err(abort(e, t, &traj));
            }
        }
        transport_step(&op, &state, &mut scratch, n, ratio);
        std::mem::swap(&mut state, &mut scratch);
        if has_source {
            if let Err(e) = source_step(fos, a0_inv.as_ref(), &mut state, n, 0.5 * dt) {
                return Err(abort(e, t, &traj));
            }
        }
        t = if reached { target } else { t + dt };
        if state.iter().any(|x| !x.is_finite()) {
            return Err(abort(
                Error::InvalidArgument("state became non-finite".into()),
                t,
                &traj,
            ));
        }
        let g = max_gradient(&state, &grid, m);
        if reached || g > threshold {
            traj.times.push(t);
            traj.states.push(state.clone());
            traj.maxgrad.push(g);
            if reached {
                next += 1;
            }
        }
        if g > threshold {
            traj.status = Status::BlowupDetected;
            return Ok(traj);
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    InverseGradientExtrapolation,
    ThresholdCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupEstimate {
    pub detected: bool,
    pub t_est: Option<f64>,
    pub method: Option<EstimateMethod>,
    pub threshold: f64,
    /// Time at which the threshold was first exceeded.
    pub threshold_crossing: Option<f64>,
}

/// Frames used for the inverse-gradient fit.
pub const EXTRAPOLATION_FRAMES: usize = 20;

/// Blowup time from a trajectory: linear extrapolation of `1 / maxgrad` to
/// zero over the last frames, falling back to the threshold-crossing time
/// when the gradient tail is not increasing.
pub fn blowup_estimate(traj: &Trajectory) -> BlowupEstimate {
    if traj.status != Status::BlowupDetected {
        return BlowupEstimate {
            detected: false,
            t_est: None,
            method: None,
            threshold: traj.threshold,
            threshold_crossing: None,
        };
    }
    let crossing = traj.final_time();
    let k = traj.times.len().min(EXTRAPOLATION_FRAMES);
    let start = traj.times.len() - k;
    let ts = &traj.times[start..];
    let gs = &traj.maxgrad[start..];
    let monotone = k >= 3 && gs.windows(2).all(|w| w[1] > w[0]);
    let extrapolated = monotone
        .then(|| {
            let ys: Vec<f64> = gs.iter().map(|g| 1.0 / g).collect();
            let tm = ts.iter().sum::<f64>() / k as f64;
            let ym = ys.iter().sum::<f64>() / k as f64;
            let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
            let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
            let slope = sxy / sxx;
            (slope < 0.0).then(|| tm - ym / slope)
        })
        .flatten()
        .filter(|t| t.is_finite() && *t >= ts[0]);
    match extrapolated {
        Some(t) => BlowupEstimate {
            detected: true,
            t_est: Some(t),
            method: Some(EstimateMethod::InverseGradientExtrapolation),
            threshold: traj.threshold,
            threshold_crossing: Some(crossing),
        },
        None => BlowupEstimate {
            detected: true,
            t_est: Some(crossing),
            method: Some(EstimateMethod::ThresholdCrossing),
            threshold: traj.threshold,
            threshold_crossing: Some(crossing),
        },
    }
}

/// Source term of a scalar Burgers-type equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SourceForm {
    Zero,
    /// `G(V) = -kappa V`.
    LinearDamping(f64),
}

/// Blowup time of `u_t + u u_x = -kappa u` for data whose steepest slope is
/// `min_slope`.
///
/// Along a characteristic `w = u_x` obeys `w' = -w^2 - kappa w`, so
/// `z = 1/w` solves `z' = 1 + kappa z` and reaches zero at
/// `T = -ln(1 + kappa / w0) / kappa` provided `w0 < -kappa`; the undamped
/// limit is `T = -1 / w0` for `w0 < 0`. The earliest characteristic to blow
/// up is the one with the most negative initial slope.
pub fn riccati_blowup_time(min_slope: f64, source: SourceForm) -> Option<f64> {
    match source {
        SourceForm::Zero => (min_slope < 0.0).then(|| -1.0 / min_slope),
        SourceForm::LinearDamping(kappa) if kappa == 0.0 => riccati_blowup_time(min_slope, SourceForm::Zero),
        SourceForm::LinearDamping(kappa) => {
            (min_slope < -kappa).then(|| -(kappa / min_slope).ln_1p() / kappa)
        }
    }
}

/// Characteristics blowup time for a scalar system with `A(V) = V`,
/// `A0 = 1` and a zero or linear damping source, given samples of `V0'`.
pub fn characteristics_oracle(fos: &FirstOrderSystem, v0_slopes: &[f64]) -> Result<Option<f64>> {
    let unsupported = || Error::Unsupported("characteristics oracle needs u_t + u u_x = -kappa u".into());
    if fos.m() != 1 || fos.d() != 1 {
        return Err(unsupported());
    }
    let probes = [-1.5, 0.0, 0.5, 2.0];
    for &p in &probes {
        let a0 = fos.a0().entry(0, 0).eval(&[p]);
        let a = fos.a()[0].entry(0, 0).eval(&[p]);
        if (a0 - 1.0).abs() > 1e-14 || (a - p).abs() > 1e-14 {
            return Err(unsupported());
        }
    }
    let kappa = -fos.g().entry(0, 0).eval(&[1.0]);
    for &p in &probes {
        if (fos.g().entry(0, 0).eval(&[p]) + kappa * p).abs() > 1e-14 {
            return Err(unsupported());
        }
    }
    let min_slope = v0_slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let source = if kappa == 0.0 {
        SourceForm::Zero
    } else {
        SourceForm::LinearDamping(kappa)
    };
    Ok(riccati_blowup_time(min_slope, source))
}

/// `amplitude * sin(2 pi x / L)` on the grid.
pub fn sine_profile(grid: &Grid1D, amplitude: f64) -> Vec<f64> {
    let k = std::f64::consts::TAU / grid.length;
    grid.points().iter().map(|x| amplitude * (k * x).sin()).collect()
}

/// First-order system and smooth periodic data for a 1-D model. Second-order
/// systems are reduced to `(P, Q, U)` with `U0 = a sin(2 pi x / L)`,
/// `P0 = 0` and `Q0 = U0'`; first-order systems get the sine profile in the
/// first component and zeros elsewhere.
pub fn initial_value_problem(
    system: &System,
    grid: &Grid1D,
    amplitude: f64,
) -> Result<(FirstOrderSystem, Vec<Vec<f64>>)> {
    if system.d() != 1 {
        return Err(Error::Unsupported(format!(
            "simulation needs d = 1, got d = {}",
            system.d()
        )));
    }
    let profile = sine_profile(grid, amplitude);
    match system {
        System::FirstOrder(fos) => {
            let mut v0 = vec![vec![0.0; grid.cells]; fos.m()];
            v0[0] = profile;
            Ok((fos.clone(), v0))
        }
        System::SecondOrder(sos) => {
            let (fos, _) = reduce_quasisemilinear(sos)?;
            let k = std::f64::consts::TAU / grid.length;
            let slope: Vec<f64> = grid
                .points()
                .iter()
                .map(|x| amplitude * k * (k * x).cos())
                .collect();
            let n = sos.n();
            let mut v0 = Vec::with_capacity(3 * n);
            v0.extend(std::iter::repeat_n(vec![0.0; grid.cells], n));
            v0.extend(std::iter::repeat_n(slope, n));
            v0.extend(std::iter::repeat_n(profile, n));
            Ok((fos, v0))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContrastSummary {
    pub label: &'static str,
    pub status: Status,
    pub amplitude: f64,
    pub horizon: f64,
    pub initial_maxgrad: f64,
    pub max_maxgrad: f64,
    /// `max maxgrad / initial maxgrad`.
    pub growth: f64,
    /// True when the run completed without crossing the blowup threshold.
    pub bounded: bool,
    pub blowup: BlowupEstimate,
    pub times: Vec<f64>,
    pub maxgrad: Vec<f64>,
}

/// Runs smooth periodic data through the model and summarizes gradient
/// growth. The outcome is observational only.
pub fn qsl_contrast_experiment(
    system: &System,
    amplitude: f64,
    grid: Grid1D,
    opts: &EvolveOptions,
) -> std::result::Result<(Trajectory, ContrastSummary), EvolveError> {
    let (fos, v0) = initial_value_problem(system, &grid, amplitude)?;
    let traj = evolve(&fos, grid, &v0, opts)?;
    let summary = contrast_summary(&traj, amplitude, opts.horizon);
    Ok((traj, summary))
}

pub fn contrast_summary(traj: &Trajectory, amplitude: f64, horizon: f64) -> ContrastSummary {
    let g0 = traj.initial_maxgrad();
    let max_g = traj.maxgrad.iter().copied().fold(0.0, f64::max);
    ContrastSummary {
        label: "EXPLORATORY",
        status: traj.status,
        amplitude,
        horizon,
        initial_maxgrad: g0,
        max_maxgrad: max_g,
        growth: if g0 > 0.0 { max_g / g0 } else { 1.0 },
        bounded: traj.status == Status::Completed,
        blowup: blowup_estimate(traj),
        times: traj.times.clone(),
        maxgrad: traj.maxgrad.clone(),
    }
}

/// Linear advection `V_t + c V_x = 0`.
pub fn linear_advection(speed: f64) -> FirstOrderSystem {
    use crate::systems::PolyMatrixFn;
    FirstOrderSystem::new(
        1,
        1,
        PolyMatrixFn::identity(1, 1),
        vec![PolyMatrixFn::from_constant(&DMatrix::from_element(1, 1, speed), 1)],
        None,
    )
    .expect("advection is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::builtin_model;

    fn first(name: &str) -> FirstOrderSystem {
        match builtin_model(name, 0).unwrap() {
            System::FirstOrder(f) => f,
            _ => panic!(),
        }
    }

    #[test]
    fn riccati_closed_forms() {
        assert_eq!(riccati_blowup_time(-1.0, SourceForm::Zero), Some(1.0));
        assert_eq!(riccati_blowup_time(0.5, SourceForm::Zero), None);
        assert_eq!(riccati_blowup_time(-0.5, SourceForm::LinearDamping(1.0)), None);
        let t = riccati_blowup_time(-4.0, SourceForm::LinearDamping(1.0)).unwrap();
        assert!((t - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        // kappa -> 0 recovers the undamped time
        let t = riccati_blowup_time(-2.0, SourceForm::LinearDamping(1e-9)).unwrap();
        assert!((t - 0.5).abs() < 1e-8);
    }

    #[test]
    fn riccati_time_solves_the_ode() {
        // integrate w' = -w^2 - kappa w with RK4 until |w| is huge
        let (w0, kappa) = (-3.0f64, 0.7);
        let exact = riccati_blowup_time(w0, SourceForm::LinearDamping(kappa)).unwrap();
        let f = |w: f64| -w * w - kappa * w;
        let (mut w, mut t, dt) = (w0, 0.0, 1e-6);
        while w.abs() < 1e6 {
            let k1 = f(w);
            let k2 = f(w + 0.5 * dt * k1);
            let k3 = f(w + 0.5 * dt * k2);
            let k4 = f(w + dt * k3);
            w += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += dt;
        }
        assert!((t - exact).abs() < 1e-5, "{t} vs {exact}");
    }

    #[test]
    fn oracle_rejects_systems() {
        assert!(characteristics_oracle(&first("p-system"), &[-1.0]).is_err());
        assert!(characteristics_oracle(&linear_advection(1.0), &[-1.0]).is_err());
        assert_eq!(characteristics_oracle(&first("burgers"), &[-1.0, 1.0]).unwrap(), Some(1.0));
        assert_eq!(characteristics_oracle(&first("burgers"), &[0.2, 1.0]).unwrap(), None);
        assert_eq!(characteristics_oracle(&first("burgers-damped"), &[-0.5]).unwrap(), None);
    }

    #[test]
    fn advection_translates() {
        let grid = Grid1D::new(256, 1.0).unwrap();
        let v0 = vec![sine_profile(&grid, 1.0)];
        let opts = EvolveOptions {
            horizon: 0.25,
            max_frames: 5,
            ..Default::default()
        };
        let traj = evolve(&linear_advection(1.0), grid, &v0, &opts).unwrap();
        assert_eq!(traj.status, Status::Completed);
        assert_eq!(traj.times.len(), 5);
        let last = traj.component(4, 0);
        let err = grid
            .points()
            .iter()
            .zip(last)
            .map(|(x, v)| (v - (std::f64::consts::TAU * (x - 0.25)).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.05, "{err}");
        assert!(!blowup_estimate(&traj).detected);
    }

    #[test]
    fn invalid_options() {
        let grid = Grid1D::new(32, 1.0).unwrap();
        let v0 = vec![vec![0.0; 32]];
        let bad = EvolveOptions {
            cfl: 1.5,
            ..Default::default()
        };
        assert!(evolve(&linear_advection(1.0), grid, &v0, &bad).is_err());
        assert!(Grid1D::new(8, 1.0).is_err());
    }

    #[test]
    fn times_strictly_increase() {
        let grid = Grid1D::new(512, std::f64::consts::TAU).unwrap();
        let v0 = vec![sine_profile(&grid, 1.0)];
        let traj = evolve(&first("burgers"), grid, &v0, &EvolveOptions::default()).unwrap();
        assert_eq!(traj.status, Status::BlowupDetected);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert!(traj.maxgrad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn csv_layout() {
        let grid = Grid1D::new(16, 1.0).unwrap();
        let v0 = vec![sine_profile(&grid, 1.0)];
        let opts = EvolveOptions {
            horizon: 0.1,
            max_frames: 2,
            ..Default::default()
        };
        let traj = evolve(&linear_advection(1.0), grid, &v0, &opts).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,V1\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 16);
    }
}
