//! TOML system files.
//!
//! ```toml
//! kind = "second-order"   # or "first-order"
//! n = 1                   # state dimension (m for first-order systems)
//! d = 1                   # space dimension
//! B00 = [[-1.0]]          # matrix = array of rows, row = array of entries
//! C = [[[0.0]]]           # d matrices
//! B = [[[[4.0]]]]         # d x d matrices, B[j][k] = B^{jk}
//! H = [[0.0]]             # optional n x 1 source in (U, P, Q_1, .., Q_d)
//! ```
//!
//! First-order files use `A0`, `A` (d matrices) and an optional `n x 1`
//! source `G` instead. An entry is either a number (a constant) or an array
//! of terms `{ coeff = 1.0, powers = [1, 0] }`, one power per state
//! component. Unknown keys are rejected.

use std::fmt::Write as _;

use serde::Deserialize;

use super::{FirstOrderSystem, PolyMatrixFn, Polynomial, SecondOrderSystem, System, Term};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Const(f64),
    Terms(Vec<RawTerm>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff: f64,
    powers: Vec<u32>,
}

type RawMatrix = Vec<Vec<RawEntry>>;

#[allow(non_snake_case)]
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    kind: String,
    n: usize,
    d: usize,
    B00: Option<RawMatrix>,
    C: Option<Vec<RawMatrix>>,
    B: Option<Vec<Vec<RawMatrix>>>,
    H: Option<RawMatrix>,
    A0: Option<RawMatrix>,
    A: Option<Vec<RawMatrix>>,
    G: Option<RawMatrix>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn convert(
    name: &str,
    raw: RawMatrix,
    rows: usize,
    cols: usize,
    nvars: usize,
) -> Result<PolyMatrixFn> {
    let invalid = |message: String| Error::Validation {
        matrix: name.to_string(),
        message,
    };
    if raw.len() != rows {
        return Err(invalid(format!("expected {rows} rows, found {}", raw.len())));
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for (i, row) in raw.into_iter().enumerate() {
        if row.len() != cols {
            return Err(invalid(format!(
                "row {} has {} entries, expected {cols}",
                i + 1,
                row.len()
            )));
        }
        for entry in row {
            let poly = match entry {
                RawEntry::Const(c) => Polynomial::constant(c, nvars),
                RawEntry::Terms(terms) => Polynomial {
                    terms: terms
                        .into_iter()
                        .map(|t| Term {
                            coeff: t.coeff,
                            powers: t.powers,
                        })
                        .collect(),
                },
            };
            for t in &poly.terms {
                if t.powers.len() != nvars {
                    return Err(invalid(format!(
                        "term has {} powers, expected {nvars}",
                        t.powers.len()
                    )));
                }
                if !t.coeff.is_finite() {
                    return Err(invalid(format!("non-finite coefficient {}", t.coeff)));
                }
            }
            entries.push(poly);
        }
    }
    PolyMatrixFn::new(rows, cols, nvars, entries).map_err(|e| invalid(e.to_string()))
}

fn require<T>(field: Option<T>, name: &str, kind: &str) -> Result<T> {
    field.ok_or_else(|| Error::Validation {
        matrix: name.to_string(),
        message: format!("required for kind `{kind}`"),
    })
}

fn forbid<T>(field: &Option<T>, name: &str, kind: &str) -> Result<()> {
    if field.is_some() {
        return Err(Error::Validation {
            matrix: name.to_string(),
            message: format!("not allowed for kind `{kind}`"),
        });
    }
    Ok(())
}

/// Parses a system file.
pub fn parse_system(text: &str) -> Result<System> {
    let raw: RawDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let (n, d) = (raw.n, raw.d);
    if n == 0 || d == 0 {
        return Err(Error::Validation {
            matrix: "n/d".into(),
            message: "dimensions must be positive".into(),
        });
    }
    match raw.kind.as_str() {
        "second-order" => {
            let kind = "second-order";
            forbid(&raw.A0, "A0", kind)?;
            forbid(&raw.A, "A", kind)?;
            forbid(&raw.G, "G", kind)?;
            let b00 = convert("B00", require(raw.B00, "B00", kind)?, n, n, n)?;
            let c_raw = require(raw.C, "C", kind)?;
            if c_raw.len() != d {
                return Err(Error::Validation {
                    matrix: "C".into(),
                    message: format!("expected {d} matrices C^j, found {}", c_raw.len()),
                });
            }
            let c = c_raw
                .into_iter()
                .enumerate()
                .map(|(j, m)| convert(&format!("C{}", j + 1), m, n, n, n))
                .collect::<Result<Vec<_>>>()?;
            let b_raw = require(raw.B, "B", kind)?;
            if b_raw.len() != d || b_raw.iter().any(|row| row.len() != d) {
                return Err(Error::Validation {
                    matrix: "B".into(),
                    message: format!("expected a {d}x{d} array of matrices B^jk"),
                });
            }
            let mut b = Vec::with_capacity(d * d);
            for (j, row) in b_raw.into_iter().enumerate() {
                for (k, m) in row.into_iter().enumerate() {
                    b.push(convert(&format!("B{}{}", j + 1, k + 1), m, n, n, n)?);
                }
            }
            let h = raw
                .H
                .map(|m| convert("H", m, n, 1, (d + 2) * n))
                .transpose()?;
            Ok(System::SecondOrder(SecondOrderSystem::new(n, d, b00, c, b, h)?))
        }
        "first-order" => {
            let kind = "first-order";
            forbid(&raw.B00, "B00", kind)?;
            forbid(&raw.C, "C", kind)?;
            forbid(&raw.B, "B", kind)?;
            forbid(&raw.H, "H", kind)?;
            let a0 = convert("A0", require(raw.A0, "A0", kind)?, n, n, n)?;
            let a_raw = require(raw.A, "A", kind)?;
            if a_raw.len() != d {
                return Err(Error::Validation {
                    matrix: "A".into(),
                    message: format!("expected {d} matrices A^k, found {}", a_raw.len()),
                });
            }
            let a = a_raw
                .into_iter()
                .enumerate()
                .map(|(k, m)| convert(&format!("A{}", k + 1), m, n, n, n))
                .collect::<Result<Vec<_>>>()?;
            let g = raw.G.map(|m| convert("G", m, n, 1, n)).transpose()?;
            Ok(System::FirstOrder(FirstOrderSystem::new(n, d, a0, a, g)?))
        }
        other => Err(Error::Validation {
            matrix: "kind".into(),
            message: format!("unknown kind `{other}`"),
        }),
    }
}

fn write_entry(out: &mut String, p: &Polynomial) {
    match p.terms.as_slice() {
        [] => out.push_str("0.0"),
        [t] if t.degree() == 0 && t.coeff != 0.0 => {
            let _ = write!(out, "{:?}", t.coeff);
        }
        terms => {
            out.push('[');
            for (i, t) in terms.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{{ coeff = {:?}, powers = {:?} }}", t.coeff, t.powers);
            }
            out.push(']');
        }
    }
}

fn write_matrix(out: &mut String, indent: usize, m: &PolyMatrixFn) {
    let pad = " ".repeat(indent);
    out.push_str("[\n");
    for i in 0..m.rows() {
        let _ = write!(out, "{pad}    [");
        for j in 0..m.cols() {
            if j > 0 {
                out.push_str(", ");
            }
            write_entry(out, m.entry(i, j));
        }
        out.push_str("],\n");
    }
    let _ = write!(out, "{pad}]");
}

fn write_list<'a>(out: &mut String, indent: usize, ms: impl Iterator<Item = &'a PolyMatrixFn>) {
    let pad = " ".repeat(indent);
    out.push_str("[\n");
    for m in ms {
        let _ = write!(out, "{pad}    ");
        write_matrix(out, indent + 4, m);
        out.push_str(",\n");
    }
    let _ = write!(out, "{pad}]");
}

/// Prints a system in the format read by [`parse_system`]. Coefficients are
/// written in shortest round-trip form, so parsing the output reproduces
/// every term exactly.
pub fn print_system(system: &System) -> String {
    let mut out = String::new();
    match system {
        System::SecondOrder(s) => {
            let _ = writeln!(out, "kind = \"second-order\"\nn = {}\nd = {}", s.n(), s.d());
            out.push_str("B00 = ");
            write_matrix(&mut out, 0, s.b00());
            out.push_str("\nC = ");
            write_list(&mut out, 0, s.c().iter());
            out.push_str("\nB = [\n");
            for j in 0..s.d() {
                out.push_str("    ");
                write_list(&mut out, 4, (0..s.d()).map(|k| s.b_jk(j, k)));
                out.push_str(",\n");
            }
            out.push_str("]\nH = ");
            write_matrix(&mut out, 0, s.h());
            out.push('\n');
        }
        System::FirstOrder(f) => {
            let _ = writeln!(out, "kind = \"first-order\"\nn = {}\nd = {}", f.m(), f.d());
            out.push_str("A0 = ");
            write_matrix(&mut out, 0, f.a0());
            out.push_str("\nA = ");
            write_list(&mut out, 0, f.a().iter());
            out.push_str("\nG = ");
            write_matrix(&mut out, 0, f.g());
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAVE: &str = r#"
kind = "second-order"
n = 1
d = 1
B00 = [[-1.0]]
C = [[[0.0]]]
B = [[[[4.0]]]]
"#;

    #[test]
    fn wave_document() {
        let System::SecondOrder(s) = parse_system(WAVE).unwrap() else {
            panic!("expected second-order")
        };
        assert_eq!((s.n(), s.d()), (1, 1));
        assert!(s.is_constant_coefficient());
        assert_eq!(s.b_jk(0, 0).eval(&[0.3]).unwrap()[(0, 0)], 4.0);
        assert_eq!(s.b00().eval(&[0.3]).unwrap()[(0, 0)], -1.0);
    }

    #[test]
    fn burgers_document() {
        let text = r#"
kind = "first-order"
n = 1
d = 1
A0 = [[1]]
A = [[[[{ coeff = 1.0, powers = [1] }]]]]
"#;
        let System::FirstOrder(f) = parse_system(text).unwrap() else {
            panic!("expected first-order")
        };
        assert_eq!(f.m(), 1);
        assert_eq!(f.a()[0].eval(&[2.5]).unwrap()[(0, 0)], 2.5);
        assert!(!f.is_constant_coefficient());
    }

    #[test]
    fn too_few_c_matrices() {
        let text = r#"
kind = "second-order"
n = 1
d = 2
B00 = [[-1.0]]
C = [[[0.0]]]
B = [[[[1.0]], [[0.0]]], [[[0.0]], [[1.0]]]]
"#;
        let err = parse_system(text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref matrix, .. } if matrix == "C"), "{err}");
    }

    #[test]
    fn wrong_matrix_size_names_matrix() {
        let text = WAVE.replace("B00 = [[-1.0]]", "B00 = [[-1.0, 0.0]]");
        let err = parse_system(&text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref matrix, .. } if matrix == "B00"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{WAVE}extra = 1\n");
        assert!(matches!(parse_system(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn syntax_error_has_position() {
        let text = "kind = \"second-order\"\nn = 1\nd = = 1\n";
        match parse_system(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn wrong_power_count() {
        let text = WAVE.replace("[[[[4.0]]]]", "[[[[[{ coeff = 1.0, powers = [1, 1] }]]]]]");
        let err = parse_system(&text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref matrix, .. } if matrix == "B11"), "{err}");
    }

    #[test]
    fn print_then_parse_is_identity() {
        for name in crate::systems::BUILTIN_MODELS {
            let sys = crate::systems::builtin_model(name, 3).unwrap();
            let text = print_system(&sys);
            assert_eq!(parse_system(&text).unwrap(), sys, "{name}\n{text}");
        }
    }
}
