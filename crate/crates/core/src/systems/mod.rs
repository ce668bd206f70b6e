//! System definitions, states and directions, built-in models and the
//! system-file format.

mod models;
mod poly;
pub mod specfile;

pub use models::{builtin_model, random_hyperbolic_constant, random_qsl, BUILTIN_MODELS, RANDOM_QSL_BOX};
pub use poly::{PolyMatrixFn, Polynomial, Term};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Second-order system
/// `B00(U) U_tt + C^j(U) U_{t x^j} + B^{jk}(U) U_{x^j x^k} = H(U, U_t, U_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderSystem {
    n: usize,
    d: usize,
    b00: PolyMatrixFn,
    c: Vec<PolyMatrixFn>,
    /// Row-major `d x d`; entry `j * d + k` is `B^{jk}`.
    b: Vec<PolyMatrixFn>,
    /// `n x 1` polynomial in `(U, P, Q_1, .., Q_d)`.
    h: PolyMatrixFn,
}

impl SecondOrderSystem {
    pub fn new(
        n: usize,
        d: usize,
        b00: PolyMatrixFn,
        c: Vec<PolyMatrixFn>,
        b: Vec<PolyMatrixFn>,
        h: Option<PolyMatrixFn>,
    ) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument("n and d must be positive".into()));
        }
        check_square("B00", &b00, n, n)?;
        if c.len() != d {
            return Err(Error::Validation {
                matrix: "C".into(),
                message: format!("expected {d} matrices C^j, found {}", c.len()),
            });
        }
        for (j, cj) in c.iter().enumerate() {
            check_square(&format!("C{}", j + 1), cj, n, n)?;
        }
        if b.len() != d * d {
            return Err(Error::Validation {
                matrix: "B".into(),
                message: format!("expected {} matrices B^jk, found {}", d * d, b.len()),
            });
        }
        for (idx, bjk) in b.iter().enumerate() {
            check_square(&format!("B{}{}", idx / d + 1, idx % d + 1), bjk, n, n)?;
        }
        let ext = (d + 2) * n;
        let h = h.unwrap_or_else(|| PolyMatrixFn::zeros(n, 1, ext));
        if h.rows() != n || h.cols() != 1 || h.nvars() != ext {
            return Err(Error::Validation {
                matrix: "H".into(),
                message: format!(
                    "expected {n}x1 over {ext} variables, found {}x{} over {}",
                    h.rows(),
                    h.cols(),
                    h.nvars()
                ),
            });
        }
        Ok(SecondOrderSystem {
            n,
            d,
            b00,
            c,
            b,
            h,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn b00(&self) -> &PolyMatrixFn {
        &self.b00
    }

    pub fn c(&self) -> &[PolyMatrixFn] {
        &self.c
    }

    pub fn b(&self) -> &[PolyMatrixFn] {
        &self.b
    }

    pub fn b_jk(&self, j: usize, k: usize) -> &PolyMatrixFn {
        &self.b[j * self.d + k]
    }

    pub fn h(&self) -> &PolyMatrixFn {
        &self.h
    }

    pub fn is_constant_coefficient(&self) -> bool {
        self.b00.is_constant()
            && self.c.iter().all(PolyMatrixFn::is_constant)
            && self.b.iter().all(PolyMatrixFn::is_constant)
    }

    /// Coefficients frozen at `u`.
    pub fn freeze(&self, u: &[f64]) -> Result<FrozenSecondOrder> {
        if u.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: u.len(),
            });
        }
        Ok(FrozenSecondOrder {
            n: self.n,
            d: self.d,
            b00: self.b00.eval_unchecked(u),
            c: self.c.iter().map(|m| m.eval_unchecked(u)).collect(),
            b: self.b.iter().map(|m| m.eval_unchecked(u)).collect(),
        })
    }

    pub(crate) fn matrices_mut(&mut self) -> impl Iterator<Item = (String, &mut PolyMatrixFn)> {
        let d = self.d;
        std::iter::once(("B00".to_string(), &mut self.b00))
            .chain(
                self.c
                    .iter_mut()
                    .enumerate()
                    .map(|(j, m)| (format!("C{}", j + 1), m)),
            )
            .chain(
                self.b
                    .iter_mut()
                    .enumerate()
                    .map(move |(i, m)| (format!("B{}{}", i / d + 1, i % d + 1), m)),
            )
    }
}

/// Constant coefficient matrices of a second-order system at a fixed state.
#[derive(Debug, Clone)]
pub struct FrozenSecondOrder {
    pub n: usize,
    pub d: usize,
    pub b00: DMatrix<f64>,
    pub c: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
}

impl FrozenSecondOrder {
    /// `C(xi) = C^j xi_j`.
    pub fn c_of(&self, xi: &Direction) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (cj, &x) in self.c.iter().zip(xi.as_slice()) {
            out += cj * x;
        }
        out
    }

    /// `B(xi) = B^{jk} xi_j xi_k`.
    pub fn b_of(&self, xi: &Direction) -> DMatrix<f64> {
        let xi = xi.as_slice();
        let mut out = DMatrix::zeros(self.n, self.n);
        for j in 0..self.d {
            for k in 0..self.d {
                out += &self.b[j * self.d + k] * (xi[j] * xi[k]);
            }
        }
        out
    }

    /// `B^{jk} xi_k` for fixed `j`.
    pub fn b_row_of(&self, j: usize, xi: &Direction) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (k, &x) in xi.as_slice().iter().enumerate() {
            out += &self.b[j * self.d + k] * x;
        }
        out
    }
}

/// First-order system `A0(V) V_t + A^k(V) V_{x^k} = G(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderSystem {
    m: usize,
    d: usize,
    a0: PolyMatrixFn,
    a: Vec<PolyMatrixFn>,
    /// `m x 1` source.
    g: PolyMatrixFn,
}

impl FirstOrderSystem {
    pub fn new(
        m: usize,
        d: usize,
        a0: PolyMatrixFn,
        a: Vec<PolyMatrixFn>,
        g: Option<PolyMatrixFn>,
    ) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::InvalidArgument("m and d must be positive".into()));
        }
        check_square("A0", &a0, m, m)?;
        if a.len() != d {
            return Err(Error::Validation {
                matrix: "A".into(),
                message: format!("expected {d} matrices A^k, found {}", a.len()),
            });
        }
        for (k, ak) in a.iter().enumerate() {
            check_square(&format!("A{}", k + 1), ak, m, m)?;
        }
        let g = g.unwrap_or_else(|| PolyMatrixFn::zeros(m, 1, m));
        if g.rows() != m || g.cols() != 1 || g.nvars() != m {
            return Err(Error::Validation {
                matrix: "G".into(),
                message: format!("expected {m}x1 over {m} variables"),
            });
        }
        Ok(FirstOrderSystem { m, d, a0, a, g })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn a0(&self) -> &PolyMatrixFn {
        &self.a0
    }

    pub fn a(&self) -> &[PolyMatrixFn] {
        &self.a
    }

    pub fn g(&self) -> &PolyMatrixFn {
        &self.g
    }

    pub fn is_constant_coefficient(&self) -> bool {
        self.a0.is_constant() && self.a.iter().all(PolyMatrixFn::is_constant)
    }

    fn check_state(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn a0_at(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        self.check_state(v)?;
        Ok(self.a0.eval_unchecked(v))
    }

    /// `A(xi)(V) = A^k(V) xi_k`.
    pub fn a_of(&self, v: &[f64], xi: &Direction) -> Result<DMatrix<f64>> {
        self.check_state(v)?;
        if xi.dim() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: xi.dim(),
            });
        }
        let mut out = DMatrix::zeros(self.m, self.m);
        for (ak, &x) in self.a.iter().zip(xi.as_slice()) {
            if x != 0.0 {
                out += ak.eval_unchecked(v) * x;
            }
        }
        Ok(out)
    }

    pub fn source_at(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_state(v)?;
        Ok(self.g.eval_unchecked(v).iter().copied().collect())
    }

    /// Multiplies all principal coefficients by `factor`; the source is left alone.
    pub fn scaled(&self, factor: f64) -> FirstOrderSystem {
        FirstOrderSystem {
            m: self.m,
            d: self.d,
            a0: self.a0.scaled(factor),
            a: self.a.iter().map(|m| m.scaled(factor)).collect(),
            g: self.g.clone(),
        }
    }

    pub(crate) fn matrices_mut(&mut self) -> impl Iterator<Item = (String, &mut PolyMatrixFn)> {
        std::iter::once(("A0".to_string(), &mut self.a0)).chain(
            self.a
                .iter_mut()
                .enumerate()
                .map(|(k, m)| (format!("A{}", k + 1), m)),
        )
    }
}

fn check_square(name: &str, m: &PolyMatrixFn, rows: usize, nvars: usize) -> Result<()> {
    if m.rows() != rows || m.cols() != rows {
        return Err(Error::Validation {
            matrix: name.to_string(),
            message: format!("expected {rows}x{rows}, found {}x{}", m.rows(), m.cols()),
        });
    }
    if m.nvars() != nvars {
        return Err(Error::Validation {
            matrix: name.to_string(),
            message: format!("expected polynomials in {nvars} variables, found {}", m.nvars()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum System {
    SecondOrder(SecondOrderSystem),
    FirstOrder(FirstOrderSystem),
}

impl System {
    pub fn d(&self) -> usize {
        match self {
            System::SecondOrder(s) => s.d(),
            System::FirstOrder(f) => f.d(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            System::SecondOrder(_) => "second-order",
            System::FirstOrder(_) => "first-order",
        }
    }

    /// Replaces a whole coefficient matrix by a constant one, addressing it
    /// by name (`B00`, `C1`, `B12`, `A0`, `A1`, ...).
    pub fn override_matrix(&mut self, name: &str, value: &DMatrix<f64>) -> Result<()> {
        let mut found = false;
        let mut apply = |it: &mut dyn Iterator<Item = (String, &mut PolyMatrixFn)>| -> Result<()> {
            for (label, m) in it {
                if label == name {
                    if m.rows() != value.nrows() || m.cols() != value.ncols() {
                        return Err(Error::Validation {
                            matrix: label,
                            message: format!(
                                "override must be {}x{}, got {}x{}",
                                m.rows(),
                                m.cols(),
                                value.nrows(),
                                value.ncols()
                            ),
                        });
                    }
                    *m = PolyMatrixFn::from_constant(value, m.nvars());
                    found = true;
                }
            }
            Ok(())
        };
        match self {
            System::SecondOrder(s) => apply(&mut s.matrices_mut())?,
            System::FirstOrder(f) => apply(&mut f.matrices_mut())?,
        }
        if found {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("no coefficient matrix named `{name}`")))
        }
    }
}

/// What a state vector represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateRole {
    /// `U`, length `n`.
    Primary,
    /// `(P, Q_1, .., Q_d, U)`, length `(d + 2) n`.
    Extended,
    /// State of a general first-order system.
    Generic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    components: Vec<f64>,
    role: StateRole,
}

impl StateVector {
    pub fn primary(u: Vec<f64>, n: usize) -> Result<Self> {
        Self::with_len(u, n, StateRole::Primary)
    }

    pub fn extended(v: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        Self::with_len(v, (d + 2) * n, StateRole::Extended)
    }

    pub fn generic(v: Vec<f64>) -> Self {
        StateVector {
            components: v,
            role: StateRole::Generic,
        }
    }

    fn with_len(components: Vec<f64>, len: usize, role: StateRole) -> Result<Self> {
        if components.len() != len {
            return Err(Error::Dimension {
                expected: len,
                got: components.len(),
            });
        }
        Ok(StateVector { components, role })
    }

    pub fn role(&self) -> StateRole {
        self.role
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.components
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.components
    }
}

impl std::ops::Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.components
    }
}

/// Unit vector in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    pub const UNIT_TOL: f64 = 1e-12;

    pub fn new(xi: Vec<f64>) -> Result<Self> {
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if xi.is_empty() || (norm - 1.0).abs() > Self::UNIT_TOL {
            return Err(Error::NonUnitDirection { norm });
        }
        Ok(Direction(xi))
    }

    pub fn normalized(xi: Vec<f64>) -> Result<Self> {
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NonUnitDirection { norm });
        }
        Ok(Direction(xi.into_iter().map(|x| x / norm).collect()))
    }

    pub fn axis(d: usize, k: usize) -> Self {
        let mut xi = vec![0.0; d];
        xi[k] = 1.0;
        Direction(xi)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn negated(&self) -> Direction {
        Direction(self.0.iter().map(|x| -x).collect())
    }
}

/// Deterministic direction samples on `S^{d-1}`: `+-1` for `d = 1`, equally
/// spaced angles (offset from the axes) for `d = 2`, and a Fibonacci lattice
/// for `d >= 3`.
pub fn sample_directions(d: usize, count: usize) -> Vec<Direction> {
    match d {
        0 => Vec::new(),
        1 => vec![Direction(vec![1.0]), Direction(vec![-1.0])],
        2 => (0..count)
            .map(|i| {
                let t = std::f64::consts::TAU * (i as f64 + 0.3) / count as f64;
                Direction(vec![t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    let mut xi = vec![0.0; d];
                    xi[0] = r * phi.cos();
                    xi[1] = r * phi.sin();
                    xi[2] = z;
                    Direction::normalized(xi).expect("lattice point is nonzero")
                })
                .collect()
        }
    }
}
