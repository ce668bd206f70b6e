//! First-order formulations of second-order systems.
//!
//! With `P = U_t` and `Q_j = U_{x^j}` the constant-coefficient system becomes
//! `A0 V_t + A^k V_{x^k} = 0` on `V = (P, Q_1, .., Q_d)` with
//!
//! ```text
//! A0  = diag(B00, I, .., I)
//! A^k = [ C^k       B^{1k} .. B^{dk} ]
//!       [ -delta_1^k I   0  ..   0   ]
//!       [     ..                     ]
//!       [ -delta_d^k I   0  ..   0   ]
//! ```
//!
//! The quasisemilinear reduction appends `U` (with `U_t = P`) as a trailing
//! block, giving `(d + 2) n` unknowns `(P, Q_1, .., Q_d, U)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::systems::{
    Direction, FirstOrderSystem, FrozenSecondOrder, PolyMatrixFn, Polynomial, SecondOrderSystem,
};

/// Numeric `A0` and `A^1..A^d` of the constant-coefficient reduction.
#[derive(Debug, Clone)]
pub struct LinearBlocks {
    pub a0: DMatrix<f64>,
    pub a: Vec<DMatrix<f64>>,
}

impl LinearBlocks {
    pub fn assemble(frozen: &FrozenSecondOrder) -> Self {
        let (n, d) = (frozen.n, frozen.d);
        let m = (d + 1) * n;
        let mut a0 = DMatrix::identity(m, m);
        a0.view_mut((0, 0), (n, n)).copy_from(&frozen.b00);
        let a = (0..d)
            .map(|k| {
                let mut ak = DMatrix::zeros(m, m);
                ak.view_mut((0, 0), (n, n)).copy_from(&frozen.c[k]);
                for j in 0..d {
                    ak.view_mut((0, (j + 1) * n), (n, n))
                        .copy_from(&frozen.b[j * d + k]);
                }
                // row block k+1 carries -I in the P column
                for i in 0..n {
                    ak[((k + 1) * n + i, i)] = -1.0;
                }
                ak
            })
            .collect();
        LinearBlocks { a0, a }
    }

    /// `A(xi) = A^k xi_k`.
    pub fn a_of(&self, xi: &Direction) -> DMatrix<f64> {
        let m = self.a0.nrows();
        let mut out = DMatrix::zeros(m, m);
        for (ak, &x) in self.a.iter().zip(xi.as_slice()) {
            out += ak * x;
        }
        out
    }
}

/// Constant-coefficient first-order formulation, with coefficients frozen
/// at `u`.
pub fn reduce_linear(sos: &SecondOrderSystem, u: &[f64]) -> Result<FirstOrderSystem> {
    let frozen = sos.freeze(u)?;
    let blocks = LinearBlocks::assemble(&frozen);
    let m = blocks.a0.nrows();
    FirstOrderSystem::new(
        m,
        sos.d(),
        PolyMatrixFn::from_constant(&blocks.a0, m),
        blocks
            .a
            .iter()
            .map(|ak| PolyMatrixFn::from_constant(ak, m))
            .collect(),
        None,
    )
}

/// Bookkeeping for a reduction: which block of the first-order state is
/// which.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionMap {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Block labels in order, e.g. `["P", "Q1", "Q2", "U"]`.
    pub layout: Vec<String>,
    #[serde(skip)]
    pub source: SecondOrderSystem,
    #[serde(skip)]
    pub target: FirstOrderSystem,
}

impl ReductionMap {
    pub fn has_u_block(&self) -> bool {
        self.layout.last().is_some_and(|l| l == "U")
    }

    pub fn block<'a>(&self, v: &'a [f64], label: &str) -> Option<&'a [f64]> {
        let idx = self.layout.iter().position(|l| l == label)?;
        v.get(idx * self.n..(idx + 1) * self.n)
    }

    /// Assembles the extended state `(P, Q_1, .., Q_d, U)`.
    pub fn extended_state(&self, p: &[f64], q: &[Vec<f64>], u: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if p.len() != n || u.len() != n || q.len() != self.d || q.iter().any(|qj| qj.len() != n) {
            return Err(Error::Dimension {
                expected: self.m,
                got: p.len() + u.len() + q.iter().map(Vec::len).sum::<usize>(),
            });
        }
        let mut v = p.to_vec();
        for qj in q {
            v.extend_from_slice(qj);
        }
        v.extend_from_slice(u);
        Ok(v)
    }
}

fn labels(d: usize, with_u: bool) -> Vec<String> {
    let mut out = vec!["P".to_string()];
    out.extend((1..=d).map(|j| format!("Q{j}")));
    if with_u {
        out.push("U".into());
    }
    out
}

/// First-order formulation of a quasisemilinear system on
/// `V = (P, Q_1, .., Q_d, U)`: coefficients depend on the trailing `U` block
/// and the source is `(H(U, P, Q), 0, .., 0, P)`.
pub fn reduce_quasisemilinear(sos: &SecondOrderSystem) -> Result<(FirstOrderSystem, ReductionMap)> {
    let (n, d) = (sos.n(), sos.d());
    let m = (d + 2) * n;
    let u_off = (d + 1) * n;
    let u_map: Vec<usize> = (0..n).map(|l| u_off + l).collect();
    let lift = |f: &PolyMatrixFn| f.embed(m, &u_map);

    let mut a0 = PolyMatrixFn::identity(m, m);
    a0.set_block(0, 0, &lift(sos.b00()));

    let a = (0..d)
        .map(|k| {
            let mut ak = PolyMatrixFn::zeros(m, m, m);
            ak.set_block(0, 0, &lift(&sos.c()[k]));
            for j in 0..d {
                ak.set_block(0, (j + 1) * n, &lift(sos.b_jk(j, k)));
            }
            for i in 0..n {
                *ak.entry_mut((k + 1) * n + i, i) = Polynomial::constant(-1.0, m);
            }
            ak
        })
        .collect();

    // H is written in (U, P, Q_1, .., Q_d); the extended state is (P, Q, U)
    let h_map: Vec<usize> = (0..(d + 2) * n)
        .map(|i| if i < n { u_off + i } else { i - n })
        .collect();
    let h = sos.h().embed(m, &h_map);
    let mut g = PolyMatrixFn::zeros(m, 1, m);
    g.set_block(0, 0, &h);
    for l in 0..n {
        *g.entry_mut(u_off + l, 0) = Polynomial::linear(1.0, l, m);
    }

    let target = FirstOrderSystem::new(m, d, a0, a, Some(g))?;
    let map = ReductionMap {
        n,
        d,
        m,
        layout: labels(d, true),
        source: sos.clone(),
        target: target.clone(),
    };
    Ok((target, map))
}

/// Lifts an amplitude-space basis `x` (`n x nu`) to the first-order state
/// space: column `j` becomes `(xi0 x_j, xi_1 x_j, .., xi_d x_j)`.
pub fn lift_amplitude_space(x: &DMatrix<f64>, xi0: f64, xi: &[f64]) -> Result<DMatrix<f64>> {
    if xi0 == 0.0 && xi.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateCovector);
    }
    let n = x.nrows();
    let mut out = DMatrix::zeros((xi.len() + 1) * n, x.ncols());
    for (alpha, &c) in std::iter::once(&xi0).chain(xi).enumerate() {
        out.view_mut((alpha * n, 0), (n, x.ncols()))
            .copy_from(&(x * c));
    }
    Ok(out)
}
