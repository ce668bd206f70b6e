//! Matrices whose entries are multivariate polynomials in the state.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single monomial `coeff * prod_k s_k^powers[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl Term {
    pub fn constant(coeff: f64, nvars: usize) -> Self {
        Term {
            coeff,
            powers: vec![0; nvars],
        }
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval(&self, s: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(s)
            .fold(self.coeff, |acc, (&p, &x)| acc * x.powi(p as i32))
    }
}

/// Polynomial kept as the literal list of terms; no simplification is done.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn constant(c: f64, nvars: usize) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        Polynomial {
            terms: vec![Term::constant(c, nvars)],
        }
    }

    /// `c * s_var`.
    pub fn linear(c: f64, var: usize, nvars: usize) -> Self {
        let mut powers = vec![0; nvars];
        powers[var] = 1;
        Polynomial {
            terms: vec![Term { coeff: c, powers }],
        }
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(s)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == 0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Term::degree).max().unwrap_or(0)
    }

    pub fn partial(&self, var: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[var] > 0 && t.coeff != 0.0)
            .map(|t| {
                let mut powers = t.powers.clone();
                let p = powers[var];
                powers[var] = p - 1;
                Term {
                    coeff: t.coeff * p as f64,
                    powers,
                }
            })
            .collect();
        Polynomial { terms }
    }

    /// Re-expresses the polynomial in a larger variable space; variable `k`
    /// becomes variable `map[k]`.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut powers = vec![0; nvars];
                for (k, &p) in t.powers.iter().enumerate() {
                    powers[map[k]] += p;
                }
                Term {
                    coeff: t.coeff,
                    powers,
                }
            })
            .collect();
        Polynomial { terms }
    }

    pub fn scaled(&self, factor: f64) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * factor,
                    powers: t.powers.clone(),
                })
                .collect(),
        }
    }
}

impl std::ops::Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        Polynomial { terms }
    }
}

/// A `rows x cols` matrix of polynomials in `nvars` state components.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrixFn {
    rows: usize,
    cols: usize,
    nvars: usize,
    /// Row-major.
    entries: Vec<Polynomial>,
}

impl PolyMatrixFn {
    pub fn new(rows: usize, cols: usize, nvars: usize, entries: Vec<Polynomial>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        for p in &entries {
            for t in &p.terms {
                if t.powers.len() != nvars {
                    return Err(Error::Dimension {
                        expected: nvars,
                        got: t.powers.len(),
                    });
                }
                if !t.coeff.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite coefficient {}",
                        t.coeff
                    )));
                }
            }
        }
        Ok(PolyMatrixFn {
            rows,
            cols,
            nvars,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrixFn {
            rows,
            cols,
            nvars,
            entries: vec![Polynomial::zero(); rows * cols],
        }
    }

    pub fn from_constant(m: &DMatrix<f64>, nvars: usize) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols(), nvars);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.entries[i * m.ncols() + j] = Polynomial::constant(m[(i, j)], nvars);
            }
        }
        out
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        Self::from_constant(&DMatrix::identity(n, n), nvars)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn entry(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut Polynomial {
        &mut self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn is_constant(&self) -> bool {
        self.entries
            .iter()
            .all(|p| p.terms.iter().all(|t| t.degree() == 0))
    }

    pub fn eval(&self, s: &[f64]) -> Result<DMatrix<f64>> {
        if s.len() != self.nvars {
            return Err(Error::Dimension {
                expected: self.nvars,
                got: s.len(),
            });
        }
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_iterator(
            self.rows,
            self.cols,
            self.entries.iter().map(|p| p.eval(s)),
        )
    }

    /// Entrywise partial derivative with respect to state component `var`.
    pub fn partial(&self, var: usize) -> PolyMatrixFn {
        PolyMatrixFn {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            entries: self.entries.iter().map(|p| p.partial(var)).collect(),
        }
    }

    pub fn embed(&self, nvars: usize, map: &[usize]) -> PolyMatrixFn {
        PolyMatrixFn {
            rows: self.rows,
            cols: self.cols,
            nvars,
            entries: self.entries.iter().map(|p| p.embed(nvars, map)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> PolyMatrixFn {
        PolyMatrixFn {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            entries: self.entries.iter().map(|p| p.scaled(factor)).collect(),
        }
    }

    /// Sum by concatenating term lists.
    pub fn add(&self, other: &PolyMatrixFn) -> Result<PolyMatrixFn> {
        if (self.rows, self.cols, self.nvars) != (other.rows, other.cols, other.nvars) {
            return Err(Error::InvalidArgument(
                "cannot add polynomial matrices of different shapes".into(),
            ));
        }
        Ok(PolyMatrixFn {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Writes `block` into the entries starting at (`row`, `col`).
    pub(crate) fn set_block(&mut self, row: usize, col: usize, block: &PolyMatrixFn) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                *self.entry_mut(row + i, col + j) = block.entry(i, j).clone();
            }
        }
    }
}
