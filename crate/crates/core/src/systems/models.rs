use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    sample_directions, FirstOrderSystem, PolyMatrixFn, Polynomial, SecondOrderSystem, System, Term,
};
use crate::error::{Error, Result};
use crate::spectral::{check_hyperbolicity, Tolerances};

pub const BUILTIN_MODELS: &[&str] = &[
    "wave1d",
    "wave2d-iso",
    "burgers",
    "burgers-damped",
    "p-system",
    "nlwave-qsl",
    "random-qsl",
];

/// Wave speed of `wave1d`.
const WAVE1D_SPEED: f64 = 2.0;

/// Looks up a built-in model. `seed` is only used by `random-qsl`.
pub fn builtin_model(name: &str, seed: u64) -> Result<System> {
    let sys = match name {
        "wave1d" => System::SecondOrder(wave(1, WAVE1D_SPEED)),
        "wave2d-iso" => System::SecondOrder(wave(2, 1.0)),
        "burgers" => System::FirstOrder(burgers(None)),
        "burgers-damped" => System::FirstOrder(burgers(Some(1.0))),
        "p-system" => System::FirstOrder(p_system()),
        "nlwave-qsl" => System::SecondOrder(nlwave_qsl()),
        "random-qsl" => System::SecondOrder(random_qsl(seed)?),
        _ => {
            return Err(Error::UnknownModel {
                name: name.to_string(),
                available: BUILTIN_MODELS.join(", "),
            })
        }
    };
    Ok(sys)
}

fn scalar(c: f64, nvars: usize) -> PolyMatrixFn {
    PolyMatrixFn::from_constant(&DMatrix::from_element(1, 1, c), nvars)
}

/// Isotropic scalar wave operator `-U_tt + c^2 Laplacian U`.
fn wave(d: usize, c: f64) -> SecondOrderSystem {
    let b = (0..d * d)
        .map(|i| scalar(if i / d == i % d { c * c } else { 0.0 }, 1))
        .collect();
    SecondOrderSystem::new(
        1,
        d,
        scalar(-1.0, 1),
        vec![scalar(0.0, 1); d],
        b,
        None,
    )
    .expect("wave model is well formed")
}

/// `V_t + V V_x = -kappa V` (or zero source).
fn burgers(damping: Option<f64>) -> FirstOrderSystem {
    let a1 = PolyMatrixFn::new(1, 1, 1, vec![Polynomial::linear(1.0, 0, 1)]).unwrap();
    let g = damping
        .map(|kappa| PolyMatrixFn::new(1, 1, 1, vec![Polynomial::linear(-kappa, 0, 1)]).unwrap());
    FirstOrderSystem::new(1, 1, scalar(1.0, 1), vec![a1], g).expect("burgers is well formed")
}

/// p-system `v_t - u_x = 0, u_t + p(v)_x = 0` in the state `(v, u)`, with
/// the polynomial pressure law `p'(v) = -(1 - v/2)^2`, so that the sound
/// speed is `1 - v/2` for `v < 2`.
fn p_system() -> FirstOrderSystem {
    let a1 = PolyMatrixFn::new(
        2,
        2,
        2,
        vec![
            Polynomial::zero(),
            Polynomial::constant(-1.0, 2),
            Polynomial {
                terms: vec![
                    Term {
                        coeff: -1.0,
                        powers: vec![0, 0],
                    },
                    Term {
                        coeff: 1.0,
                        powers: vec![1, 0],
                    },
                    Term {
                        coeff: -0.25,
                        powers: vec![2, 0],
                    },
                ],
            },
            Polynomial::zero(),
        ],
    )
    .unwrap();
    FirstOrderSystem::new(2, 1, PolyMatrixFn::identity(2, 2), vec![a1], None)
        .expect("p-system is well formed")
}

/// `U_tt = (1 + U^2) U_xx`.
fn nlwave_qsl() -> SecondOrderSystem {
    let b11 = PolyMatrixFn::new(
        1,
        1,
        1,
        vec![Polynomial {
            terms: vec![
                Term {
                    coeff: 1.0,
                    powers: vec![0],
                },
                Term {
                    coeff: 1.0,
                    powers: vec![2],
                },
            ],
        }],
    )
    .unwrap();
    SecondOrderSystem::new(1, 1, scalar(-1.0, 1), vec![scalar(0.0, 1)], vec![b11], None)
        .expect("nlwave is well formed")
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> DMatrix<f64> {
    let g = random_matrix(rng, n, n);
    DMatrix::identity(n, n) * rng.random_range(0.5..1.5) + (&g * g.transpose()) * (spread / n as f64)
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let g = random_matrix(rng, n, n);
    (&g + g.transpose()) * (0.5 * scale)
}

/// Candidate with `B00 < 0`, symmetric `C^j`, and `B^{jk}` whose symmetric
/// parts are the blocks of one positive definite `nd x nd` matrix, so that
/// `B(xi) > 0` for every `xi != 0`. For each `xi` the symbol is then a
/// hyperbolic quadratic pencil: its roots are real, nonzero and semisimple.
fn draw_constant_candidate(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<SecondOrderSystem> {
    let b00 = -random_spd(rng, n, 0.5);
    let c: Vec<_> = (0..d).map(|_| random_symmetric(rng, n, 0.3)).collect();
    let big = random_spd(rng, n * d, 0.3);
    let block = |j: usize, k: usize| big.view((j * n, k * n), (n, n)).into_owned();
    let mut b = vec![DMatrix::zeros(n, n); d * d];
    for j in 0..d {
        b[j * d + j] = block(j, j);
        for k in j + 1..d {
            // antisymmetric part cancels in B(xi) but exercises block placement
            let skew = random_matrix(rng, n, n) * 0.1;
            b[j * d + k] = block(j, k) + &skew;
            b[k * d + j] = block(k, j) - &skew;
        }
    }
    SecondOrderSystem::new(
        n,
        d,
        PolyMatrixFn::from_constant(&b00, n),
        c.iter().map(|m| PolyMatrixFn::from_constant(m, n)).collect(),
        b.iter().map(|m| PolyMatrixFn::from_constant(m, n)).collect(),
        None,
    )
}

const MAX_DRAWS: usize = 1000;

/// Seeded random constant-coefficient second-order system that passes the
/// hyperbolicity check, drawn by rejection sampling.
pub fn random_hyperbolic_constant(seed: u64, n: usize, d: usize) -> Result<SecondOrderSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = sample_directions(d, 16);
    let tol = Tolerances::default();
    for _ in 0..MAX_DRAWS {
        let sos = draw_constant_candidate(&mut rng, n, d)?;
        if check_hyperbolicity(&sos, &vec![0.0; n], &dirs, &tol)?.verdict {
            return Ok(sos);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no hyperbolic sample found for seed {seed}"
    )))
}

/// Half-width of the state box on which `random-qsl` is checked.
pub const RANDOM_QSL_BOX: f64 = 0.5;

/// Seeded random quasisemilinear system (`n = 2`, `d = 2`) whose
/// coefficients carry linear and quadratic terms in `U` and whose source is
/// linear in `(U, P, Q)`. Rejection-sampled until hyperbolic at `U = 0` and
/// at the corners of the box `[-0.5, 0.5]^n`.
pub fn random_qsl(seed: u64) -> Result<SecondOrderSystem> {
    const N: usize = 2;
    const D: usize = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_51);
    let dirs = sample_directions(D, 16);
    let tol = Tolerances::default();
    let mut probes = vec![vec![0.0; N]];
    for corner in 0..(1 << N) {
        probes.push(
            (0..N)
                .map(|l| if corner >> l & 1 == 1 { RANDOM_QSL_BOX } else { -RANDOM_QSL_BOX })
                .collect(),
        );
    }

    'draw: for _ in 0..MAX_DRAWS {
        let base = draw_constant_candidate(&mut rng, N, D)?;
        // Linear terms are mirrored so that B00(U), C(U) and the stacked
        // nd x nd matrix of the B^{jk}(U) stay symmetric. With |U_l| <= 0.5
        // every entry moves by at most 2 * 0.5 * scale, which keeps -B00 and
        // the stacked matrix (smallest eigenvalue >= 0.5 at U = 0) positive
        // definite; the quadratic terms only add to the B^{jj} diagonals.
        let linear = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<Vec<f64>> {
            (0..N * N)
                .map(|_| (0..N).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
                .collect()
        };
        let add_linear = |m: &mut PolyMatrixFn, coeffs: &[Vec<f64>], transpose: bool| {
            for i in 0..N {
                for j in 0..N {
                    let src = if transpose { j * N + i } else { i * N + j };
                    for (l, &coeff) in coeffs[src].iter().enumerate() {
                        let mut powers = vec![0; N];
                        powers[l] = 1;
                        m.entry_mut(i, j).terms.push(Term { coeff, powers });
                    }
                }
            }
        };
        let symmetric = |rng: &mut ChaCha8Rng, scale: f64| {
            let mut c = linear(rng, scale);
            for i in 0..N {
                for j in 0..i {
                    c[i * N + j] = c[j * N + i].clone();
                }
            }
            c
        };
        let mut b00 = base.b00().clone();
        add_linear(&mut b00, &symmetric(&mut rng, 0.1), false);
        let mut c = base.c().to_vec();
        for m in &mut c {
            add_linear(m, &symmetric(&mut rng, 0.05), false);
        }
        let mut b = base.b().to_vec();
        for j in 0..D {
            add_linear(&mut b[j * D + j], &symmetric(&mut rng, 0.06), false);
            for i in 0..N {
                let mut powers = vec![0; N];
                powers[i] = 2;
                let coeff = 0.1 * rng.random_range(0.0..1.0);
                b[j * D + j].entry_mut(i, i).terms.push(Term { coeff, powers });
            }
            for k in j + 1..D {
                let coeffs = linear(&mut rng, 0.06);
                add_linear(&mut b[j * D + k], &coeffs, false);
                add_linear(&mut b[k * D + j], &coeffs, true);
            }
        }
        let ext = (D + 2) * N;
        let h_entries = (0..N)
            .map(|_| Polynomial {
                terms: (0..ext)
                    .map(|v| {
                        let mut powers = vec![0; ext];
                        powers[v] = 1;
                        Term {
                            coeff: 0.1 * rng.random_range(-1.0..1.0),
                            powers,
                        }
                    })
                    .collect(),
            })
            .collect();
        let h = PolyMatrixFn::new(N, 1, ext, h_entries)?;
        let sos = SecondOrderSystem::new(N, D, b00, c, b, Some(h))?;
        for u in &probes {
            if !check_hyperbolicity(&sos, u, &dirs, &tol)?.verdict {
                continue 'draw;
            }
        }
        return Ok(sos);
    }
    Err(Error::InvalidArgument(format!(
        "no hyperbolic quasisemilinear sample found for seed {seed}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_model_lists_available() {
        let err = builtin_model("navier-stokes", 0).unwrap_err();
        match err {
            Error::UnknownModel { available, .. } => assert!(available.contains("p-system")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn second_order_builtins_are_hyperbolic_at_origin() {
        let tol = Tolerances::default();
        for name in BUILTIN_MODELS {
            if let System::SecondOrder(sos) = builtin_model(name, 42).unwrap() {
                let dirs = sample_directions(sos.d(), 8);
                let report = check_hyperbolicity(&sos, &vec![0.0; sos.n()], &dirs, &tol).unwrap();
                assert!(report.verdict, "{name}");
            }
        }
    }

    #[test]
    fn random_qsl_is_deterministic() {
        assert_eq!(random_qsl(7).unwrap(), random_qsl(7).unwrap());
        assert_ne!(random_qsl(7).unwrap(), random_qsl(8).unwrap());
    }

    #[test]
    fn random_qsl_seed_7_is_hyperbolic() {
        let sos = random_qsl(7).unwrap();
        assert!(!sos.is_constant_coefficient());
        let dirs = sample_directions(2, 8);
        let report =
            check_hyperbolicity(&sos, &[0.0, 0.0], &dirs, &Tolerances::default()).unwrap();
        assert!(report.verdict);
    }

    #[test]
    fn p_system_speed_is_polynomial() {
        let System::FirstOrder(f) = builtin_model("p-system", 0).unwrap() else {
            panic!()
        };
        let a = f.a()[0].eval(&[0.4, 0.0]).unwrap();
        assert!((a[(1, 0)] + 0.8f64.powi(2)).abs() < 1e-15);
    }
}
