//! Symbol, dispersion roots, amplitude spaces and first-order modes.
//!
//! Speeds follow the convention `lambda = -xi0`: a zero `xi0` of
//! `p(xi0) = det B(xi0, xi)` corresponds to the first-order mode with speed
//! `-xi0`, i.e. `ker(xi0 A0 + A(xi))`.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    cluster_sorted, det, max_principal_angle_sin, nullspace_below, orthonormal_span,
    pencil_kernel, pencil_eigenvalues,
};
use crate::reduction::{lift_amplitude_space, LinearBlocks};
use crate::systems::{Direction, FirstOrderSystem, SecondOrderSystem};

/// Numerical thresholds. `imag` and `cluster` are relative to the spectral
/// radius of the pencil; `rank` is relative to the largest singular value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub imag: f64,
    pub cluster: f64,
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            imag: 1e-8,
            cluster: 1e-6,
            rank: 1e-10,
        }
    }
}

/// Subspace-comparison tolerance used by the kernel verifier.
pub const KERNEL_ANGLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SymbolMatrix {
    pub value: DMatrix<f64>,
    pub u: Vec<f64>,
    pub xi0: f64,
    pub xi: Direction,
    /// `xi0^2 |B00| + |xi0| |C(xi)| + |B(xi)|` in Frobenius norm; the size
    /// against which rank decisions on `value` are made.
    pub scale: f64,
}

impl SymbolMatrix {
    pub fn kernel(&self, rank_tol: f64) -> DMatrix<f64> {
        nullspace_below(&self.value, rank_tol * self.scale)
    }
}

/// `B(xi0, xi) = xi0^2 B00(U) + xi0 C(xi)(U) + B(xi)(U)`.
pub fn symbol_matrix(
    sos: &SecondOrderSystem,
    u: &[f64],
    xi0: f64,
    xi: &Direction,
) -> Result<SymbolMatrix> {
    check_dir(sos.d(), xi)?;
    let frozen = sos.freeze(u)?;
    let (c, b) = (frozen.c_of(xi), frozen.b_of(xi));
    let scale = xi0 * xi0 * frozen.b00.norm() + xi0.abs() * c.norm() + b.norm();
    let value = &frozen.b00 * (xi0 * xi0) + c * xi0 + b;
    Ok(SymbolMatrix {
        value,
        scale,
        u: u.to_vec(),
        xi0,
        xi: xi.clone(),
    })
}

fn check_dir(d: usize, xi: &Direction) -> Result<()> {
    if xi.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: xi.dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: f64,
    pub multiplicity: usize,
}

/// The `2n` candidate dispersion roots (complex, unclustered) after the
/// `(d - 1) n` structural zeros of the reduction have been dropped.
struct RawRoots {
    roots: Vec<Complex<f64>>,
    scale: f64,
}

fn raw_roots(sos: &SecondOrderSystem, u: &[f64], xi: &Direction) -> Result<RawRoots> {
    check_dir(sos.d(), xi)?;
    let blocks = LinearBlocks::assemble(&sos.freeze(u)?);
    let eig = pencil_eigenvalues(&blocks.a0, &blocks.a_of(xi))?;
    let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // xi0 = -lambda
    let mut roots: Vec<Complex<f64>> = eig.into_iter().map(|z| -z).collect();
    roots.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let structural = (sos.d() - 1) * sos.n();
    roots.drain(..structural);
    Ok(RawRoots { roots, scale })
}

/// Real zeros of `det B(., xi)` with multiplicities, ascending.
///
/// Computed as eigenvalues of the pencil of the constant-coefficient
/// reduction frozen at `u`, with the `(d - 1) n` structural zeros removed.
pub fn dispersion_roots(
    sos: &SecondOrderSystem,
    u: &[f64],
    xi: &Direction,
    tol: &Tolerances,
) -> Result<Vec<Root>> {
    let raw = raw_roots(sos, u, xi)?;
    let scale = raw.scale.max(f64::MIN_POSITIVE);
    if let Some(z) = raw
        .roots
        .iter()
        .filter(|z| z.im.abs() > tol.imag * scale)
        .max_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
    {
        return Err(Error::NotHyperbolic { re: z.re, im: z.im });
    }
    if let Some(z) = raw.roots.iter().find(|z| z.re.abs() < tol.cluster * scale) {
        return Err(Error::VanishingRoot { root: z.re });
    }
    let mut re: Vec<f64> = raw.roots.iter().map(|z| z.re).collect();
    Ok(cluster_sorted(&mut re, tol.cluster * scale)
        .into_iter()
        .map(|(value, multiplicity)| Root {
            value,
            multiplicity,
        })
        .collect())
}

/// Orthonormal basis of `X(xi0, xi) = ker B(xi0, xi)`; `xi0` must be one
/// of the computed dispersion roots, and the kernel dimension must equal its
/// multiplicity.
pub fn amplitude_space(
    sos: &SecondOrderSystem,
    u: &[f64],
    xi0: f64,
    xi: &Direction,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let roots = dispersion_roots(sos, u, xi, tol)?;
    let scale = roots.iter().map(|r| r.value.abs()).fold(0.0, f64::max);
    let root = roots
        .iter()
        .min_by(|a, b| (a.value - xi0).abs().total_cmp(&(b.value - xi0).abs()))
        .filter(|r| (r.value - xi0).abs() <= tol.cluster * scale.max(1.0))
        .ok_or_else(|| Error::InvalidArgument(format!("{xi0} is not a dispersion root")))?;
    kernel_of_symbol(sos, u, root, xi, tol)
}

fn kernel_of_symbol(
    sos: &SecondOrderSystem,
    u: &[f64],
    root: &Root,
    xi: &Direction,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let sym = symbol_matrix(sos, u, root.value, xi)?;
    let basis = sym.kernel(tol.rank);
    if basis.ncols() != root.multiplicity {
        return Err(Error::KernelDimension {
            root: root.value,
            multiplicity: root.multiplicity,
            kernel_dim: basis.ncols(),
        });
    }
    Ok(basis)
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionPattern {
    pub xi: Vec<f64>,
    pub roots: Vec<f64>,
    pub multiplicities: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityReport {
    pub b00_negdef: bool,
    /// Smallest eigenvalue of the symmetric part of `-B00`.
    pub b00_min_eig: f64,
    pub roots_real_nonzero: bool,
    pub worst_imag: f64,
    pub min_abs_root: f64,
    pub multiplicity_constant: bool,
    pub patterns: Vec<DirectionPattern>,
    pub kernel_dims_match: bool,
    /// Worst `(multiplicity, kernel dimension)` pair seen, if any mismatch.
    pub worst_kernel_mismatch: Option<(usize, usize)>,
    pub verdict: bool,
}

/// Evaluates the conditions of semi-strict definite hyperbolicity at `u`
/// over the sampled directions. Failures are reported as flags.
pub fn check_hyperbolicity(
    sos: &SecondOrderSystem,
    u: &[f64],
    directions: &[Direction],
    tol: &Tolerances,
) -> Result<HyperbolicityReport> {
    let frozen = sos.freeze(u)?;
    if sos.d() >= 2 && directions.len() < 8 {
        return Err(Error::InvalidArgument(format!(
            "need at least 8 directions for d = {}, got {}",
            sos.d(),
            directions.len()
        )));
    }
    if directions.is_empty() {
        return Err(Error::InvalidArgument("no directions given".into()));
    }
    let neg = -&frozen.b00;
    let sym = (&neg + neg.transpose()) * 0.5;
    let b00_min_eig = sym.symmetric_eigenvalues().min();
    let b00_negdef = b00_min_eig > 0.0;

    let mut roots_real_nonzero = true;
    let mut worst_imag = 0.0f64;
    let mut min_abs_root = f64::INFINITY;
    let mut kernel_dims_match = true;
    let mut worst_kernel_mismatch: Option<(usize, usize)> = None;
    let mut patterns = Vec::with_capacity(directions.len());

    for xi in directions {
        let raw = match raw_roots(sos, u, xi) {
            Ok(raw) => raw,
            Err(Error::Conditioning { .. }) => {
                roots_real_nonzero = false;
                kernel_dims_match = false;
                patterns.push(DirectionPattern {
                    xi: xi.as_slice().to_vec(),
                    roots: Vec::new(),
                    multiplicities: Vec::new(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let scale = raw.scale.max(f64::MIN_POSITIVE);
        let mut real_here = true;
        for z in &raw.roots {
            worst_imag = worst_imag.max(z.im.abs());
            min_abs_root = min_abs_root.min(z.norm());
            if z.im.abs() > tol.imag * scale || z.norm() < tol.cluster * scale {
                real_here = false;
            }
        }
        roots_real_nonzero &= real_here;
        let mut re: Vec<f64> = raw.roots.iter().map(|z| z.re).collect();
        let clusters = cluster_sorted(&mut re, tol.cluster * scale);
        if real_here {
            for &(value, multiplicity) in &clusters {
                let sym = symbol_matrix(sos, u, value, xi)?;
                let dim = sym.kernel(tol.rank).ncols();
                if dim != multiplicity {
                    kernel_dims_match = false;
                    let gap = multiplicity.abs_diff(dim);
                    if worst_kernel_mismatch.is_none_or(|(m, k)| m.abs_diff(k) < gap) {
                        worst_kernel_mismatch = Some((multiplicity, dim));
                    }
                }
            }
        } else {
            kernel_dims_match = false;
        }
        let mut mult: Vec<usize> = clusters.iter().map(|c| c.1).collect();
        mult.sort_unstable();
        patterns.push(DirectionPattern {
            xi: xi.as_slice().to_vec(),
            roots: clusters.iter().map(|c| c.0).collect(),
            multiplicities: mult,
        });
    }
    let multiplicity_constant = patterns
        .windows(2)
        .all(|w| w[0].multiplicities == w[1].multiplicities);
    let verdict = b00_negdef && roots_real_nonzero && multiplicity_constant && kernel_dims_match;
    Ok(HyperbolicityReport {
        b00_negdef,
        b00_min_eig,
        roots_real_nonzero,
        worst_imag,
        min_abs_root,
        multiplicity_constant,
        patterns,
        kernel_dims_match,
        worst_kernel_mismatch,
        verdict,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Mode {
    pub speed: f64,
    pub multiplicity: usize,
    /// Orthonormal kernel basis, `m x multiplicity`.
    #[serde(serialize_with = "serialize_columns")]
    pub basis: DMatrix<f64>,
}

fn serialize_columns<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let cols: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
    cols.serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeSet {
    pub direction: Vec<f64>,
    /// Nonzero modes in ascending speed order.
    pub modes: Vec<Mode>,
    pub zero_mode: Option<Mode>,
}

impl ModeSet {
    /// All modes including the zero mode, ascending by speed.
    pub fn all_modes(&self) -> Vec<&Mode> {
        let mut all: Vec<&Mode> = self.modes.iter().chain(self.zero_mode.as_ref()).collect();
        all.sort_by(|a, b| a.speed.total_cmp(&b.speed));
        all
    }
}

/// Clustered real speeds of the pencil `(A(xi)(V), A0(V))`, ascending, and
/// the spectral radius used as the tolerance scale.
pub(crate) fn speed_clusters(
    fos: &FirstOrderSystem,
    v: &[f64],
    xi: &Direction,
    tol: &Tolerances,
) -> Result<(Vec<(f64, usize)>, f64)> {
    let a0 = fos.a0_at(v)?;
    let a = fos.a_of(v, xi)?;
    let eig = pencil_eigenvalues(&a0, &a)?;
    let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = eig.iter().find(|z| z.im.abs() > tol.imag * scale) {
        return Err(Error::NotHyperbolic { re: z.re, im: z.im });
    }
    let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
    Ok((cluster_sorted(&mut re, tol.cluster * scale), scale))
}

/// Modes of a first-order system at `v`: speeds with multiplicities and
/// orthonormal bases of `ker(-lambda A0 + A(xi))`. The cluster at speed zero
/// (within `tol.cluster` of the spectral radius) is reported separately.
pub fn first_order_modes(
    fos: &FirstOrderSystem,
    v: &[f64],
    xi: &Direction,
    tol: &Tolerances,
) -> Result<ModeSet> {
    let (clusters, scale) = speed_clusters(fos, v, xi, tol)?;
    let a0 = fos.a0_at(v)?;
    let a = fos.a_of(v, xi)?;
    let mut modes = Vec::new();
    let mut zero_mode = None;
    for (speed, multiplicity) in clusters {
        let basis = pencil_kernel(&a0, &a, speed, tol.rank);
        if basis.ncols() != multiplicity {
            return Err(Error::KernelDimension {
                root: -speed,
                multiplicity,
                kernel_dim: basis.ncols(),
            });
        }
        let mode = Mode {
            speed,
            multiplicity,
            basis,
        };
        if speed.abs() <= tol.cluster * scale {
            zero_mode = Some(mode);
        } else {
            modes.push(mode);
        }
    }
    Ok(ModeSet {
        direction: xi.as_slice().to_vec(),
        modes,
        zero_mode,
    })
}

/// Largest `|q(xi0) - xi0^{(d-1)n} p(xi0)| / (1 + |q(xi0)|)` over the
/// samples, where `q(xi0) = det(xi0 A0 + A(xi))` of the reduction and
/// `p(xi0) = det B(xi0, xi)`.
pub fn verify_lemma1_factorization(
    sos: &SecondOrderSystem,
    u: &[f64],
    xi: &Direction,
    xi0_samples: &[f64],
) -> Result<f64> {
    check_dir(sos.d(), xi)?;
    let blocks = LinearBlocks::assemble(&sos.freeze(u)?);
    let a_xi = blocks.a_of(xi);
    let power = ((sos.d() - 1) * sos.n()) as i32;
    let mut worst = 0.0f64;
    for &xi0 in xi0_samples {
        if !xi0.is_finite() || xi0.abs() > 1e6 {
            return Err(Error::InvalidArgument(format!("xi0 sample {xi0} out of range")));
        }
        let q = det(&(&blocks.a0 * xi0 + &a_xi));
        let p = det(&symbol_matrix(sos, u, xi0, xi)?.value);
        worst = worst.max((q - xi0.powi(power) * p).abs() / (1.0 + q.abs()));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelModeCheck {
    pub root: f64,
    pub speed: f64,
    pub multiplicity: usize,
    /// Sine of the largest principal angle between the lifted amplitude
    /// space and the first-order kernel.
    pub angle_sin: f64,
    /// Worst relative deviation of a kernel vector from the form
    /// `(xi0 x, xi_1 x, .., xi_d x)` with `x` in the amplitude space.
    pub converse_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub direction: Vec<f64>,
    pub modes: Vec<KernelModeCheck>,
    pub nonzero_multiplicity: usize,
    pub zero_mode_dim: usize,
    pub expected_zero_mode_dim: usize,
    /// Largest `P`-block norm among zero-mode basis vectors.
    pub zero_mode_p_block: f64,
}

/// Checks the mode structure of the constant-coefficient reduction against
/// the second-order amplitude spaces: lifted amplitude spaces coincide with
/// the first-order kernels, every kernel vector has the proportional block
/// form, and the zero mode has dimension `(d - 1) n`.
pub fn verify_lemma1_kernels(
    sos: &SecondOrderSystem,
    u: &[f64],
    xi: &Direction,
    tol: &Tolerances,
) -> Result<KernelReport> {
    let (n, d) = (sos.n(), sos.d());
    let roots = dispersion_roots(sos, u, xi, tol)?;
    let fos = crate::reduction::reduce_linear(sos, u)?;
    let v0 = vec![0.0; fos.m()];
    let modes = first_order_modes(&fos, &v0, xi, tol)?;
    let scale = roots.iter().map(|r| r.value.abs()).fold(0.0, f64::max);

    let violation = |quantity: String, value: f64, tolerance: f64| Error::StructureViolation {
        quantity,
        value,
        tolerance,
    };

    let mut checks = Vec::new();
    for root in &roots {
        let x = kernel_of_symbol(sos, u, root, xi, tol)?;
        let lifted = orthonormal_span(&lift_amplitude_space(&x, root.value, xi.as_slice())?, 1e-12);
        let speed = -root.value;
        let mode = modes
            .modes
            .iter()
            .find(|m| (m.speed - speed).abs() <= tol.cluster * scale)
            .ok_or_else(|| violation(format!("first-order mode at speed {speed}"), 1.0, 0.0))?;
        if mode.multiplicity != root.multiplicity {
            return Err(violation(
                format!("multiplicity at speed {speed}"),
                mode.multiplicity as f64,
                root.multiplicity as f64,
            ));
        }
        let angle_sin = max_principal_angle_sin(&lifted, &mode.basis);
        if angle_sin > KERNEL_ANGLE_TOL {
            return Err(violation(format!("subspace angle at speed {speed}"), angle_sin, KERNEL_ANGLE_TOL));
        }

        // converse: each kernel vector is (xi_alpha x)_alpha with x in X
        let symbol = symbol_matrix(sos, u, root.value, xi)?;
        let sym = symbol.value;
        let sym_norm = symbol.scale.max(f64::MIN_POSITIVE);
        let covector: Vec<f64> = std::iter::once(root.value).chain(xi.as_slice().iter().copied()).collect();
        let cov_sq: f64 = covector.iter().map(|c| c * c).sum();
        let mut converse_residual = 0.0f64;
        for col in mode.basis.column_iter() {
            let mut x = nalgebra::DVector::zeros(n);
            for (alpha, &c) in covector.iter().enumerate() {
                x += col.rows(alpha * n, n) * c;
            }
            x /= cov_sq;
            let mut dev = 0.0f64;
            for (alpha, &c) in covector.iter().enumerate() {
                dev = dev.max((col.rows(alpha * n, n) - &x * c).norm());
            }
            let in_kernel = (&sym * &x).norm() / (sym_norm * x.norm().max(f64::MIN_POSITIVE));
            converse_residual = converse_residual.max(dev / col.norm()).max(in_kernel);
        }
        if converse_residual > KERNEL_ANGLE_TOL {
            return Err(violation(
                format!("block structure at speed {speed}"),
                converse_residual,
                KERNEL_ANGLE_TOL,
            ));
        }
        checks.push(KernelModeCheck {
            root: root.value,
            speed,
            multiplicity: root.multiplicity,
            angle_sin,
            converse_residual,
        });
    }

    let nonzero_multiplicity: usize = modes.modes.iter().map(|m| m.multiplicity).sum();
    if nonzero_multiplicity != 2 * n {
        return Err(violation(
            "nonzero mode count".into(),
            nonzero_multiplicity as f64,
            (2 * n) as f64,
        ));
    }
    let zero_mode_dim = modes.zero_mode.as_ref().map_or(0, |z| z.multiplicity);
    let expected_zero_mode_dim = (d - 1) * n;
    if zero_mode_dim != expected_zero_mode_dim {
        return Err(violation(
            "zero mode dimension".into(),
            zero_mode_dim as f64,
            expected_zero_mode_dim as f64,
        ));
    }
    let zero_mode_p_block = modes.zero_mode.as_ref().map_or(0.0, |z| z.basis.rows(0, n).norm());
    if zero_mode_p_block > KERNEL_ANGLE_TOL {
        return Err(violation("zero mode P block".into(), zero_mode_p_block, KERNEL_ANGLE_TOL));
    }
    Ok(KernelReport {
        direction: xi.as_slice().to_vec(),
        modes: checks,
        nonzero_multiplicity,
        zero_mode_dim,
        expected_zero_mode_dim,
        zero_mode_p_block,
    })
}
