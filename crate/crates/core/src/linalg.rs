//! Small dense helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Condition numbers above this make a leading matrix unusable.
pub const MAX_CONDITION: f64 = 1e12;

/// Singular values in descending order together with the matching right
/// singular vectors (as columns).
pub(crate) fn svd_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    // pad wide matrices so that V is square
    let a = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(cols, order.len(), |r, c| v_t[(order[c], r)]);
    (sv, v)
}

/// Orthonormal basis of the numerical nullspace: right singular vectors
/// whose singular value is at most `rel_tol * sigma_max`.
pub fn nullspace(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (sv, v) = svd_sorted(m);
    let cutoff = rel_tol * sv.first().copied().unwrap_or(0.0);
    truncate(&sv, &v, cutoff)
}

/// Nullspace with singular values at most `cutoff` treated as zero. Use
/// when the matrix is a combination of terms whose size sets the scale.
pub fn nullspace_below(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let (sv, v) = svd_sorted(m);
    truncate(&sv, &v, cutoff)
}

/// `|A| + |lambda| |A0|` in Frobenius norm.
pub fn pencil_scale(a0: &DMatrix<f64>, a: &DMatrix<f64>, lambda: f64) -> f64 {
    a.norm() + lambda.abs() * a0.norm()
}

/// Kernel of `A - lambda A0`, with rank decided relative to [`pencil_scale`].
pub fn pencil_kernel(a0: &DMatrix<f64>, a: &DMatrix<f64>, lambda: f64, rank_tol: f64) -> DMatrix<f64> {
    nullspace_below(&(a - a0 * lambda), rank_tol * pencil_scale(a0, a, lambda))
}

fn truncate(sv: &[f64], v: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let rank = sv.iter().take_while(|&&s| s > cutoff).count();
    v.columns(rank, v.ncols() - rank).into_owned()
}

/// Orthonormal basis for the column span of `m`.
pub fn orthonormal_span(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let cols: Vec<_> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .map(|i| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let (sv, _) = svd_sorted(m);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        sv[0] / smin
    }
}

pub fn det(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

/// Eigenvalues of the pencil `(a, a0)`, i.e. the `lambda` with
/// `det(a - lambda a0) = 0`, for invertible `a0`.
pub fn pencil_eigenvalues(a0: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let cond = condition_number(a0);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Conditioning { condition: cond });
    }
    let reduced = a0
        .clone()
        .lu()
        .solve(a)
        .ok_or(Error::Conditioning { condition: cond })?;
    Ok(reduced.complex_eigenvalues().iter().copied().collect())
}

/// Sine of the largest principal angle between the spans of two
/// orthonormal bases of equal dimension.
pub fn max_principal_angle_sin(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    if q1.ncols() != q2.ncols() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let r1 = q1 - q2 * (q2.transpose() * q1);
    let r2 = q2 - q1 * (q1.transpose() * q2);
    spectral_norm(&r1).max(spectral_norm(&r2))
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `max |Q^T Q - I|` entrywise.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let k = g.nrows();
    (g - DMatrix::identity(k, k)).amax()
}

/// Groups sorted-by-value reals into clusters whose consecutive gaps are at
/// most `tol`; returns `(mean, count)` pairs in ascending order.
pub fn cluster_sorted(values: &mut [f64], tol: f64) -> Vec<(f64, usize)> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            let chunk = &values[start..i];
            if !chunk.is_empty() {
                out.push((chunk.iter().sum::<f64>() / chunk.len() as f64, chunk.len()));
            }
            start = i;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let ns = nullspace(&m, 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * &ns).norm() < 1e-14);
        assert!(orthonormality_error(&ns) < 1e-14);
    }

    #[test]
    fn nullspace_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = nullspace(&m, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-14);
    }

    #[test]
    fn clusters_merge_close_values() {
        let mut v = vec![1.0, -2.0, 1.0 + 1e-9, 3.0];
        let c = cluster_sorted(&mut v, 1e-6);
        assert_eq!(c.len(), 3);
        assert_eq!(c[1].1, 2);
        assert!((c[1].0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pencil_of_swap() {
        let a0 = DMatrix::identity(2, 2);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let mut ev: Vec<f64> = pencil_eigenvalues(&a0, &a).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_leading_matrix() {
        let a0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = DMatrix::identity(2, 2);
        assert!(matches!(
            pencil_eigenvalues(&a0, &a),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn principal_angle_detects_rotation() {
        let q1 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let t: f64 = 1e-3;
        let q2 = DMatrix::from_row_slice(2, 1, &[t.cos(), t.sin()]);
        assert!((max_principal_angle_sin(&q1, &q2) - t.sin()).abs() < 1e-15);
    }
}
