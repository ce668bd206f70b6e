//! Genuine nonlinearity and linear degeneracy of modes.
//!
//! The indicator of a mode at `V` is `max_r |r . grad lambda(V)|` over an
//! orthonormal basis `r` of the mode's kernel, with `lambda` the tracked
//! speed and the derivative taken by central differences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{nullspace_below, pencil_kernel, pencil_scale};
use crate::reduction::reduce_quasisemilinear;
use crate::spectral::{first_order_modes, speed_clusters, Tolerances};
use crate::systems::{sample_directions, Direction, FirstOrderSystem, SecondOrderSystem};

/// Classification thresholds on the indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub ld: f64,
    pub gnl: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { ld: 1e-5, gnl: 1e-3 }
    }
}

impl Thresholds {
    pub fn new(ld: f64, gnl: f64) -> Result<Self> {
        if !(0.0 < ld && ld < gnl) {
            return Err(Error::InvalidArgument(format!(
                "thresholds must satisfy 0 < ld < gnl, got ld = {ld}, gnl = {gnl}"
            )));
        }
        Ok(Thresholds { ld, gnl })
    }

    pub fn classify(&self, g: f64) -> Classification {
        if g > self.gnl {
            Classification::Gnl
        } else if g < self.ld {
            Classification::Ld
        } else {
            Classification::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    #[serde(rename = "GNL")]
    Gnl,
    #[serde(rename = "LD")]
    Ld,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

/// Largest bound on a structural block that should vanish exactly.
pub const STRUCTURAL_TOL: f64 = 1e-8;

/// A mode of a first-order system followed smoothly near a reference state.
#[derive(Debug, Clone)]
pub struct ModeField<'a> {
    system: &'a FirstOrderSystem,
    xi: Direction,
    mode_index: usize,
    v_ref: Vec<f64>,
    radius: f64,
    /// Speeds and multiplicities of all clusters at `v_ref`, ascending.
    reference: Vec<(f64, usize)>,
    tol: Tolerances,
}

impl<'a> ModeField<'a> {
    /// `mode_index` counts clusters (zero mode included) in ascending speed
    /// order at `v_ref`.
    pub fn new(
        system: &'a FirstOrderSystem,
        xi: Direction,
        mode_index: usize,
        v_ref: Vec<f64>,
        radius: f64,
        tol: Tolerances,
    ) -> Result<Self> {
        let (reference, _) = speed_clusters(system, &v_ref, &xi, &tol)?;
        if mode_index >= reference.len() {
            return Err(Error::InvalidArgument(format!(
                "mode index {mode_index} out of range ({} modes)",
                reference.len()
            )));
        }
        Ok(ModeField {
            system,
            xi,
            mode_index,
            v_ref,
            radius,
            reference,
            tol,
        })
    }

    pub fn reference_speed(&self) -> f64 {
        self.reference[self.mode_index].0
    }

    pub fn multiplicity(&self) -> usize {
        self.reference[self.mode_index].1
    }

    pub fn direction(&self) -> &Direction {
        &self.xi
    }

    pub fn mode_count(&self) -> usize {
        self.reference.len()
    }
}

/// Speed of the tracked mode at `v`.
///
/// The clusters at `v` must have the same multiplicity pattern as at the
/// reference state, and matching them to the reference clusters by order
/// must be a stable matching under speed distance.
pub fn tracked_speed(field: &ModeField<'_>, v: &[f64]) -> Result<f64> {
    let dist = v
        .iter()
        .zip(&field.v_ref)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if dist > field.radius {
        return Err(Error::TrackingLoss(format!(
            "state at distance {dist:e} outside tracking radius {:e}",
            field.radius
        )));
    }
    let (clusters, _) = speed_clusters(field.system, v, &field.xi, &field.tol)?;
    let pattern: Vec<usize> = clusters.iter().map(|c| c.1).collect();
    let ref_pattern: Vec<usize> = field.reference.iter().map(|c| c.1).collect();
    if pattern != ref_pattern {
        return Err(Error::TrackingLoss(format!(
            "multiplicity pattern changed from {ref_pattern:?} to {pattern:?}"
        )));
    }
    let r = &field.reference;
    for i in 0..r.len() {
        let d_ii = (r[i].0 - clusters[i].0).abs();
        for j in 0..r.len() {
            if i == j {
                continue;
            }
            let d_ij = (r[i].0 - clusters[j].0).abs();
            let d_jj = (r[j].0 - clusters[j].0).abs();
            if d_ij < d_ii && d_ij < d_jj {
                return Err(Error::TrackingLoss(format!(
                    "speeds {} and {} swapped",
                    r[i].0, r[j].0
                )));
            }
        }
    }
    Ok(clusters[field.mode_index].0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Indicator {
    pub value: f64,
    /// `(low, high)` when central and one-sided differences disagree by
    /// more than 10%.
    pub interval: Option<(f64, f64)>,
    pub step: f64,
}

/// Default finite-difference step `eps^(1/3) (1 + |V|)`.
pub fn default_step(v: &[f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    f64::EPSILON.cbrt() * (1.0 + norm)
}

/// Kernel basis of the tracked mode at `v`.
fn mode_basis(field: &ModeField<'_>, v: &[f64]) -> Result<DMatrix<f64>> {
    let speed = tracked_speed(field, v)?;
    let a0 = field.system.a0_at(v)?;
    let a = field.system.a_of(v, &field.xi)?;
    let basis = pencil_kernel(&a0, &a, speed, field.tol.rank);
    if basis.ncols() != field.multiplicity() {
        return Err(Error::KernelDimension {
            root: -speed,
            multiplicity: field.multiplicity(),
            kernel_dim: basis.ncols(),
        });
    }
    Ok(basis)
}

/// Genuine-nonlinearity indicator of the tracked mode at `v`.
pub fn gnl_indicator(field: &ModeField<'_>, v: &[f64]) -> Result<Indicator> {
    gnl_indicator_with_step(field, v, default_step(v))
}

pub fn gnl_indicator_with_step(field: &ModeField<'_>, v: &[f64], h: f64) -> Result<Indicator> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let basis = mode_basis(field, v)?;
    let center = tracked_speed(field, v)?;
    let shifted = |r: &DVector<f64>, s: f64| -> Vec<f64> {
        v.iter().zip(r.iter()).map(|(x, ri)| x + s * ri).collect()
    };
    let mut value = 0.0f64;
    let mut interval: Option<(f64, f64)> = None;
    for r in basis.column_iter() {
        let r = r.into_owned();
        let plus = tracked_speed(field, &shifted(&r, h))?;
        let minus = tracked_speed(field, &shifted(&r, -h))?;
        let central = ((plus - minus) / (2.0 * h)).abs();
        let forward = ((plus - center) / h).abs();
        let gap = (central - forward).abs();
        if gap > 0.1 * central.max(forward) && gap > Thresholds::default().ld {
            let (lo, hi) = (central.min(forward), central.max(forward));
            interval = Some(interval.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
        }
        value = value.max(central);
    }
    Ok(Indicator {
        value,
        interval,
        step: h,
    })
}

/// `|r . grad lambda|` from `l (dA(xi) - lambda dA0) r / (l A0 r)` for a
/// simple eigenvalue; used to cross-check the finite-difference indicator.
pub fn analytic_indicator(field: &ModeField<'_>, v: &[f64]) -> Result<f64> {
    if field.multiplicity() != 1 {
        return Err(Error::Unsupported(
            "analytic indicator needs a simple eigenvalue".into(),
        ));
    }
    let fos = field.system;
    let speed = tracked_speed(field, v)?;
    let a0 = fos.a0_at(v)?;
    let a = fos.a_of(v, &field.xi)?;
    let pencil = &a - &a0 * speed;
    let cutoff = field.tol.rank * pencil_scale(&a0, &a, speed);
    let r = nullspace_below(&pencil, cutoff).column(0).into_owned();
    let l = nullspace_below(&pencil.transpose(), cutoff)
        .column(0)
        .into_owned();
    let denom = l.dot(&(&a0 * &r));
    let mut derivative = 0.0;
    for k in 0..fos.m() {
        if r[k] == 0.0 {
            continue;
        }
        let da0 = fos.a0().partial(k).eval(v)?;
        let mut da = DMatrix::zeros(fos.m(), fos.m());
        for (ak, &x) in fos.a().iter().zip(field.xi.as_slice()) {
            da += ak.partial(k).eval(v)? * x;
        }
        derivative += r[k] * l.dot(&((da - da0 * speed) * &r)) / denom;
    }
    Ok(derivative.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyRow {
    pub state_index: usize,
    pub state: Vec<f64>,
    pub direction: Vec<f64>,
    pub mode_index: usize,
    pub speed: f64,
    pub multiplicity: usize,
    pub zero_mode: bool,
    pub indicator: f64,
    pub interval: Option<(f64, f64)>,
    pub classification: Classification,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridError {
    pub state_index: usize,
    pub direction: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub thresholds: Thresholds,
    pub rows: Vec<DegeneracyRow>,
    pub errors: Vec<GridError>,
}

impl DegeneracyReport {
    pub fn max_indicator(&self, include_zero_mode: bool) -> f64 {
        self.rows
            .iter()
            .filter(|r| include_zero_mode || !r.zero_mode)
            .map(|r| r.indicator)
            .fold(0.0, f64::max)
    }

    pub fn all(&self, class: Classification) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.classification == class)
    }
}

fn tracking_radius(v: &[f64]) -> f64 {
    1e-2 * (1.0 + v.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Indicators and classifications for every mode over `states x directions`.
/// Failures at individual grid points are collected, not propagated.
pub fn classify_modes(
    fos: &FirstOrderSystem,
    states: &[Vec<f64>],
    directions: &[Direction],
    thresholds: &Thresholds,
    tol: &Tolerances,
) -> DegeneracyReport {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (state_index, v) in states.iter().enumerate() {
        for xi in directions {
            let mut record = |e: Error| {
                errors.push(GridError {
                    state_index,
                    direction: xi.as_slice().to_vec(),
                    message: e.to_string(),
                })
            };
            let modes = match first_order_modes(fos, v, xi, tol) {
                Ok(m) => m,
                Err(e) => {
                    record(e);
                    continue;
                }
            };
            for (mode_index, mode) in modes.all_modes().into_iter().enumerate() {
                let zero_mode = modes
                    .zero_mode
                    .as_ref()
                    .is_some_and(|z| z.speed == mode.speed);
                let result = ModeField::new(fos, xi.clone(), mode_index, v.clone(), tracking_radius(v), *tol)
                    .and_then(|field| gnl_indicator(&field, v));
                match result {
                    Ok(ind) => rows.push(DegeneracyRow {
                        state_index,
                        state: v.clone(),
                        direction: xi.as_slice().to_vec(),
                        mode_index,
                        speed: mode.speed,
                        multiplicity: mode.multiplicity,
                        zero_mode,
                        indicator: ind.value,
                        interval: ind.interval,
                        classification: thresholds.classify(ind.value),
                    }),
                    Err(e) => record(e),
                }
            }
        }
    }
    DegeneracyReport {
        thresholds: *thresholds,
        rows,
        errors,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearDegeneracyReport {
    pub states: usize,
    pub directions: usize,
    pub evaluations: usize,
    /// Largest indicator over all nonzero modes.
    pub max_indicator: f64,
    /// Largest trailing `U`-block norm of a nonzero-mode kernel vector
    /// (only for reductions with a `U` block).
    pub max_u_block_norm: Option<f64>,
    pub thresholds: Thresholds,
}

/// Requires every nonzero mode to be linearly degenerate at the given
/// states. With `u_block = Some(n)` the trailing `n` components of each
/// nonzero-mode kernel vector must also vanish.
pub fn verify_linear_degeneracy(
    fos: &FirstOrderSystem,
    states: &[Vec<f64>],
    directions: &[Direction],
    u_block: Option<usize>,
    thresholds: &Thresholds,
    tol: &Tolerances,
) -> Result<LinearDegeneracyReport> {
    let mut max_indicator = 0.0f64;
    let mut max_u = u_block.map(|_| 0.0f64);
    let mut evaluations = 0;
    for v in states {
        for xi in directions {
            let modes = first_order_modes(fos, v, xi, tol)?;
            for (mode_index, mode) in modes.all_modes().into_iter().enumerate() {
                if modes.zero_mode.as_ref().is_some_and(|z| z.speed == mode.speed) {
                    continue;
                }
                if let (Some(n), Some(worst)) = (u_block, max_u.as_mut()) {
                    let rows = mode.basis.nrows();
                    let norm = mode
                        .basis
                        .column_iter()
                        .map(|c| c.rows(rows - n, n).norm())
                        .fold(0.0, f64::max);
                    *worst = worst.max(norm);
                    if norm > STRUCTURAL_TOL {
                        return Err(Error::StructureViolation {
                            quantity: format!("U block of mode at speed {}", mode.speed),
                            value: norm,
                            tolerance: STRUCTURAL_TOL,
                        });
                    }
                }
                let field = ModeField::new(fos, xi.clone(), mode_index, v.clone(), tracking_radius(v), *tol)?;
                let g = gnl_indicator(&field, v)?.value;
                evaluations += 1;
                max_indicator = max_indicator.max(g);
                if g > thresholds.gnl {
                    return Err(Error::DegeneracyViolation {
                        indicator: g,
                        threshold: thresholds.gnl,
                    });
                }
            }
        }
    }
    Ok(LinearDegeneracyReport {
        states: states.len(),
        directions: directions.len(),
        evaluations,
        max_indicator,
        max_u_block_norm: max_u,
        thresholds: *thresholds,
    })
}

/// Seeded uniform samples from the box `[-half_width, half_width]^dim`.
pub fn sample_box(dim: usize, count: usize, half_width: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(-half_width..=half_width))
                .collect()
        })
        .collect()
}

/// Linear degeneracy of all modes of the quasisemilinear reduction of
/// `sos`, checked at `n_states` extended states `(P, Q, U)` drawn from the
/// box and `n_dirs` directions.
pub fn verify_prop1(
    sos: &SecondOrderSystem,
    n_states: usize,
    n_dirs: usize,
    seed: u64,
    half_width: f64,
    thresholds: &Thresholds,
    tol: &Tolerances,
) -> Result<LinearDegeneracyReport> {
    let (fos, map) = reduce_quasisemilinear(sos)?;
    let states = sample_box(map.m, n_states, half_width, seed);
    let directions = sample_directions(sos.d(), n_dirs);
    verify_linear_degeneracy(&fos, &states, &directions, Some(sos.n()), thresholds, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumCheck {
    pub holds: bool,
    pub source_norm: f64,
}

/// Whether `G(V*) = 0` up to `1e-12 (1 + |V*|)`.
pub fn check_equilibrium(fos: &FirstOrderSystem, v: &[f64]) -> Result<EquilibriumCheck> {
    let g = fos.source_at(v)?;
    let source_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(EquilibriumCheck {
        holds: source_norm <= 1e-12 * (1.0 + vnorm),
        source_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::reduce_linear;
    use crate::systems::{builtin_model, PolyMatrixFn, Polynomial, System, Term};

    fn first(name: &str) -> FirstOrderSystem {
        match builtin_model(name, 0).unwrap() {
            System::FirstOrder(f) => f,
            _ => panic!(),
        }
    }

    fn second(name: &str) -> SecondOrderSystem {
        match builtin_model(name, 7).unwrap() {
            System::SecondOrder(s) => s,
            _ => panic!(),
        }
    }

    fn x1() -> Direction {
        Direction::axis(1, 0)
    }

    fn field<'a>(fos: &'a FirstOrderSystem, idx: usize, v: &[f64]) -> ModeField<'a> {
        ModeField::new(fos, x1(), idx, v.to_vec(), 0.1, Tolerances::default()).unwrap()
    }

    #[test]
    fn burgers_speed_is_state() {
        let fos = first("burgers");
        let f = field(&fos, 0, &[0.4]);
        assert!((tracked_speed(&f, &[0.41]).unwrap() - 0.41).abs() < 1e-15);
    }

    #[test]
    fn burgers_indicator_is_one() {
        let fos = first("burgers");
        for v in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let f = ModeField::new(&fos, x1(), 0, vec![v], 0.1, Tolerances::default()).unwrap();
            let g = gnl_indicator(&f, &[v]).unwrap();
            assert!((g.value - 1.0).abs() < 1e-8, "{v}: {g:?}");
            assert!(g.interval.is_none());
        }
    }

    #[test]
    fn nlwave_speeds() {
        let (fos, _) = reduce_quasisemilinear(&second("nlwave-qsl")).unwrap();
        let v = [0.2, -0.1, 0.8];
        let f = field(&fos, 2, &v);
        let expected = (1.0f64 + 0.64).sqrt();
        assert!((tracked_speed(&f, &v).unwrap() - expected).abs() < 1e-14);
        let f0 = field(&fos, 0, &v);
        assert!((tracked_speed(&f0, &v).unwrap() + expected).abs() < 1e-14);
    }

    #[test]
    fn tracking_radius_enforced() {
        let fos = first("burgers");
        let f = field(&fos, 0, &[0.0]);
        assert!(matches!(tracked_speed(&f, &[1.0]), Err(Error::TrackingLoss(_))));
    }

    #[test]
    fn multiplicity_change_is_tracking_loss() {
        // diag(V1, 0): double eigenvalue at V1 = 0 splits away from it
        let a = PolyMatrixFn::new(
            2,
            2,
            2,
            vec![
                Polynomial::linear(1.0, 0, 2),
                Polynomial::zero(),
                Polynomial::zero(),
                Polynomial::zero(),
            ],
        )
        .unwrap();
        let fos = FirstOrderSystem::new(2, 1, PolyMatrixFn::identity(2, 2), vec![a], None).unwrap();
        let f = ModeField::new(&fos, x1(), 0, vec![0.0, 0.0], 1.0, Tolerances::default()).unwrap();
        assert_eq!(f.multiplicity(), 2);
        assert!(matches!(tracked_speed(&f, &[0.5, 0.0]), Err(Error::TrackingLoss(_))));
        assert!(matches!(gnl_indicator(&f, &[0.0, 0.0]), Err(Error::TrackingLoss(_))));
    }

    #[test]
    fn p_system_indicator_matches_closed_form() {
        let fos = first("p-system");
        for v in [-0.5, 0.0, 0.3, 1.2] {
            let state = [v, 0.1];
            let c: f64 = 1.0 - v / 2.0;
            let expected = 0.5 / (1.0 + c * c).sqrt();
            for idx in 0..2 {
                let f = field(&fos, idx, &state);
                let g = gnl_indicator(&f, &state).unwrap().value;
                assert!((g - expected).abs() < 1e-6, "v = {v}: {g} vs {expected}");
                let a = analytic_indicator(&f, &state).unwrap();
                assert!((a - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_coefficients_are_degenerate() {
        let fos = reduce_linear(&second("wave1d"), &[0.0]).unwrap();
        let states = sample_box(2, 20, 1.0, 1);
        let report = classify_modes(&fos, &states, &[x1()], &Thresholds::default(), &Tolerances::default());
        assert!(report.errors.is_empty());
        assert!(report.all(Classification::Ld));
        assert!(report.max_indicator(true) < 1e-9);
    }

    #[test]
    fn burgers_grid_is_gnl() {
        let fos = first("burgers");
        let states = sample_box(1, 10, 2.0, 5);
        let report = classify_modes(&fos, &states, &[x1()], &Thresholds::default(), &Tolerances::default());
        assert!(report.all(Classification::Gnl));
    }

    #[test]
    fn nlwave_reduction_is_linearly_degenerate() {
        let report =
            verify_prop1(&second("nlwave-qsl"), 100, 1, 3, 1.0, &Thresholds::default(), &Tolerances::default())
                .unwrap();
        assert!(report.max_indicator <= 1e-6, "{report:?}");
        assert!(report.max_u_block_norm.unwrap() <= 1e-8);
    }

    #[test]
    fn burgers_fed_directly_violates() {
        let fos = first("burgers");
        let err = verify_linear_degeneracy(
            &fos,
            &[vec![0.5]],
            &[x1()],
            None,
            &Thresholds::default(),
            &Tolerances::default(),
        )
        .unwrap_err();
        match err {
            Error::DegeneracyViolation { indicator, .. } => assert!((indicator - 1.0).abs() < 1e-8),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn classification_bands() {
        let t = Thresholds::default();
        assert_eq!(t.classify(1.0), Classification::Gnl);
        assert_eq!(t.classify(1e-7), Classification::Ld);
        assert_eq!(t.classify(1e-4), Classification::Inconclusive);
        assert!(Thresholds::new(1e-3, 1e-5).is_err());
    }

    #[test]
    fn equilibrium() {
        let damped = first("burgers-damped");
        assert!(check_equilibrium(&damped, &[0.0]).unwrap().holds);
        let off = check_equilibrium(&damped, &[1.0]).unwrap();
        assert!(!off.holds && (off.source_norm - 1.0).abs() < 1e-15);
        assert!(check_equilibrium(&first("burgers"), &[3.0]).unwrap().holds);
    }

    #[test]
    fn step_halving_is_consistent() {
        // scalar A(V) = V^2 + V^3: lambda''' = 6, truncation error ~ h^2
        let a = PolyMatrixFn::new(
            1,
            1,
            1,
            vec![Polynomial {
                terms: vec![
                    Term { coeff: 1.0, powers: vec![2] },
                    Term { coeff: 1.0, powers: vec![3] },
                ],
            }],
        )
        .unwrap();
        let fos = FirstOrderSystem::new(1, 1, PolyMatrixFn::identity(1, 1), vec![a], None).unwrap();
        let v = [0.7];
        let f = field(&fos, 0, &v);
        let h = 1e-3;
        let g1 = gnl_indicator_with_step(&f, &v, h).unwrap().value;
        let g2 = gnl_indicator_with_step(&f, &v, h / 2.0).unwrap().value;
        let truncation = h * h * 6.0 / 6.0;
        assert!((g1 - g2).abs() <= 4.0 * truncation);
        let exact = 2.0 * 0.7 + 3.0 * 0.49;
        assert!((gnl_indicator(&f, &v).unwrap().value - exact).abs() < 1e-8);
    }
}
