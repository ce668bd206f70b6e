//! Checks against independent oracles: a Leibniz-expanded dispersion
//! polynomial with a scalar root finder, and entry-by-entry block formulas
//! for the reduction.

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;

use hypermode::reduction::{lift_amplitude_space, reduce_linear};
use hypermode::spectral::{
    amplitude_space, check_hyperbolicity, dispersion_roots, first_order_modes, verify_lemma1_kernels,
    Tolerances,
};
use hypermode::systems::{random_hyperbolic_constant, sample_directions};
use hypermode::{Direction, PolyMatrixFn, SecondOrderSystem};

type Poly = Vec<f64>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &mut Poly, b: &Poly, sign: f64) {
    if a.len() < b.len() {
        a.resize(b.len(), 0.0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += sign * y;
    }
}

fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    if n == 1 {
        return vec![(vec![0], 1.0)];
    }
    let mut out = Vec::new();
    for (perm, sign) in permutations(n - 1) {
        // insert n-1 at every position; each shift right is one transposition
        for pos in (0..n).rev() {
            let mut p = perm.clone();
            p.insert(pos, n - 1);
            let swaps = n - 1 - pos;
            out.push((p, if swaps % 2 == 0 { sign } else { -sign }));
        }
    }
    out
}

/// Coefficients (ascending) of `det(xi0^2 B00 + xi0 C(xi) + B(xi))`.
fn leibniz_dispersion(sos: &SecondOrderSystem, xi: &Direction) -> Poly {
    let n = sos.n();
    let u = vec![0.0; n];
    let b00 = sos.b00().eval(&u).unwrap();
    let (d, xs) = (sos.d(), xi.as_slice());
    let mut c = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for j in 0..d {
        c += sos.c()[j].eval(&u).unwrap() * xs[j];
        for k in 0..d {
            b += sos.b_jk(j, k).eval(&u).unwrap() * (xs[j] * xs[k]);
        }
    }
    let entry = |i: usize, j: usize| vec![b[(i, j)], c[(i, j)], b00[(i, j)]];
    let mut det = vec![0.0];
    for (perm, sign) in permutations(n) {
        let mut prod = vec![1.0];
        for (i, &j) in perm.iter().enumerate() {
            prod = poly_mul(&prod, &entry(i, j));
        }
        poly_add(&mut det, &prod, sign);
    }
    det
}

fn horner(p: &Poly, z: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Durand-Kerner iteration for all roots of `p`.
fn durand_kerner(p: &Poly) -> Vec<Complex64> {
    let deg = p.len() - 1;
    let lead = p[deg];
    let monic: Poly = p.iter().map(|c| c / lead).collect();
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..500 {
        let prev = z.clone();
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = horner(&monic, z[i]) / denom;
            z[i] -= step;
        }
        if z.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15 * (1.0 + a.norm())) {
            break;
        }
    }
    // one Newton polish against the original coefficients
    let dp: Poly = p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
    z.iter().map(|&r| r - horner(p, r) / horner(&dp, r)).collect()
}

#[test]
fn permutation_signs() {
    let perms = permutations(3);
    assert_eq!(perms.len(), 6);
    assert_eq!(perms.iter().map(|(_, s)| s).sum::<f64>(), 0.0);
    let identity = perms.iter().find(|(p, _)| p == &vec![0, 1, 2]).unwrap();
    assert_eq!(identity.1, 1.0);
}

#[test]
fn leibniz_wave1d() {
    // det(-xi0^2 + 4) with c = 2
    let sos = wave_block(1);
    let p = leibniz_dispersion(&sos, &Direction::axis(1, 0));
    assert_eq!(p, vec![4.0, 0.0, -1.0]);
}

#[test]
fn roots_match_scalar_root_finder() {
    let tol = Tolerances::default();
    for (seed, n) in [(11u64, 2usize), (12, 2), (13, 3), (14, 3)] {
        let sos = random_hyperbolic_constant(seed, n, 2).unwrap();
        for xi in sample_directions(2, 8) {
            let p = leibniz_dispersion(&sos, &xi);
            let mut oracle: Vec<f64> = durand_kerner(&p)
                .iter()
                .map(|z| {
                    assert!(z.im.abs() < 1e-8 * (1.0 + z.norm()), "oracle root {z}");
                    z.re
                })
                .collect();
            oracle.sort_by(f64::total_cmp);
            let roots: Vec<f64> = dispersion_roots(&sos, &vec![0.0; n], &xi, &tol)
                .unwrap()
                .iter()
                .flat_map(|r| std::iter::repeat_n(r.value, r.multiplicity))
                .collect();
            assert_eq!(roots.len(), 2 * n);
            for (a, b) in roots.iter().zip(&oracle) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn simple_roots_have_one_dimensional_amplitude_spaces() {
    // p'(root) != 0 means multiplicity one, hence a line as kernel
    let tol = Tolerances::default();
    let sos = random_hyperbolic_constant(21, 3, 2).unwrap();
    let xi = Direction::normalized(vec![0.3, 0.7]).unwrap();
    let p = leibniz_dispersion(&sos, &xi);
    let dp: Poly = p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
    for root in dispersion_roots(&sos, &[0.0; 3], &xi, &tol).unwrap() {
        let slope = horner(&dp, Complex64::new(root.value, 0.0)).norm();
        assert!(slope > 1e-6);
        assert_eq!(root.multiplicity, 1);
        let x = amplitude_space(&sos, &[0.0; 3], root.value, &xi, &tol).unwrap();
        assert_eq!(x.ncols(), 1);
    }
}

#[test]
fn reduction_blocks_match_their_formulas() {
    for seed in 0..20u64 {
        let n = 1 + (seed % 3) as usize;
        let d = 1 + ((seed / 3) % 3) as usize;
        let sos = random_hyperbolic_constant(500 + seed, n, d).unwrap();
        let u = vec![0.0; n];
        let fos = reduce_linear(&sos, &u).unwrap();
        let m = (d + 1) * n;
        assert_eq!(fos.m(), m);
        let v = vec![0.0; m];
        let block = |a: &DMatrix<f64>, r: usize, c: usize| a.view((r * n, c * n), (n, n)).into_owned();
        let a0 = fos.a0().eval(&v).unwrap();
        let b00 = sos.b00().eval(&u).unwrap();
        for r in 0..=d {
            for c in 0..=d {
                let expected = match (r, c) {
                    (0, 0) => b00.clone(),
                    _ if r == c => DMatrix::identity(n, n),
                    _ => DMatrix::zeros(n, n),
                };
                assert_eq!(block(&a0, r, c), expected, "seed {seed}: A0 block ({r}, {c})");
            }
        }
        for k in 0..d {
            let ak = fos.a()[k].eval(&v).unwrap();
            for r in 0..=d {
                for c in 0..=d {
                    let expected = match (r, c) {
                        (0, 0) => sos.c()[k].eval(&u).unwrap(),
                        (0, j) => sos.b_jk(j - 1, k).eval(&u).unwrap(),
                        (j, 0) if j - 1 == k => -DMatrix::identity(n, n),
                        _ => DMatrix::zeros(n, n),
                    };
                    assert_eq!(block(&ak, r, c), expected, "seed {seed}: A{} block ({r}, {c})", k + 1);
                }
            }
        }
    }
}

/// `copies` decoupled wave equations with the same speed 2.
fn wave_block(copies: usize) -> SecondOrderSystem {
    let n = copies;
    let constant = |m: DMatrix<f64>| PolyMatrixFn::from_constant(&m, n);
    SecondOrderSystem::new(
        n,
        1,
        constant(-DMatrix::identity(n, n)),
        vec![constant(DMatrix::zeros(n, n))],
        vec![constant(DMatrix::identity(n, n) * 4.0)],
        None,
    )
    .unwrap()
}

#[test]
fn double_root_has_two_dimensional_amplitude_space() {
    let sos = wave_block(2);
    let tol = Tolerances::default();
    let xi = Direction::axis(1, 0);
    let roots = dispersion_roots(&sos, &[0.0; 2], &xi, &tol).unwrap();
    assert_eq!(roots.len(), 2);
    assert!(roots.iter().all(|r| r.multiplicity == 2));
    let report = check_hyperbolicity(&sos, &[0.0; 2], &sample_directions(1, 2), &tol).unwrap();
    assert!(report.verdict);
    let x = amplitude_space(&sos, &[0.0; 2], 2.0, &xi, &tol).unwrap();
    assert_eq!(x.ncols(), 2);
    let lifted = lift_amplitude_space(&x, 2.0, xi.as_slice()).unwrap();
    assert_eq!(lifted.shape(), (4, 2));
    let kernels = verify_lemma1_kernels(&sos, &[0.0; 2], &xi, &tol).unwrap();
    assert!(kernels.modes.iter().all(|m| m.multiplicity == 2 && m.angle_sin < 1e-12));
}

#[test]
fn zero_mode_of_a_three_dimensional_pair() {
    let sos = random_hyperbolic_constant(3, 2, 3).unwrap();
    let fos = reduce_linear(&sos, &[0.0; 2]).unwrap();
    let tol = Tolerances::default();
    for xi in sample_directions(3, 8) {
        let modes = first_order_modes(&fos, &[0.0; 8], &xi, &tol).unwrap();
        assert_eq!(modes.zero_mode.map(|z| z.multiplicity), Some(4));
        assert_eq!(modes.modes.iter().map(|m| m.multiplicity).sum::<usize>(), 4);
    }
}
