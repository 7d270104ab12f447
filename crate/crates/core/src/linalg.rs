//! Small dense helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on `|R_kk| / |R_00|` below which a column counts as
/// linearly dependent on the ones already factored.
pub(crate) const RANK_TOLERANCE: f64 = 1e-10;

/// Least squares `min ||A x - b||` through Householder QR with column
/// pivoting by largest remaining norm.
///
/// Returns `Err(column)` with the original index of the first column found
/// to be numerically dependent.
pub(crate) fn pivoted_least_squares(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<DVector<f64>, usize> {
    let (n, k) = a.shape();
    if n < k {
        return Err(n);
    }
    let mut r = a.clone();
    let mut rhs = b.clone();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut lead = 0.0;

    for step in 0..k {
        let (best, best_norm) = (step..k).map(|j| (j, r.view_range(step.., j).norm())).fold(
            (step, -1.0),
            |acc, cur| if cur.1 > acc.1 { cur } else { acc },
        );
        if step == 0 {
            lead = best_norm;
        }
        if !(best_norm > RANK_TOLERANCE * lead) || lead == 0.0 {
            return Err(perm[best]);
        }
        r.swap_columns(step, best);
        perm.swap(step, best);

        // reflector v = x + sign(x0) |x| e0
        let mut v: DVector<f64> = r.view_range(step.., step).into_owned();
        let alpha = if v[0] >= 0.0 { -best_norm } else { best_norm };
        v[0] -= alpha;
        let vnorm_sq = v.norm_squared();
        if vnorm_sq > 0.0 {
            for j in step..k {
                let mut col = r.view_range_mut(step.., j);
                let proj = 2.0 * v.dot(&col) / vnorm_sq;
                col.axpy(-proj, &v, 1.0);
            }
            let mut tail = rhs.rows_range_mut(step..);
            let proj = 2.0 * v.dot(&tail) / vnorm_sq;
            tail.axpy(-proj, &v, 1.0);
        }
    }

    let mut z = DVector::zeros(k);
    for row in (0..k).rev() {
        let mut acc = rhs[row];
        for col in row + 1..k {
            acc -= r[(row, col)] * z[col];
        }
        z[row] = acc / r[(row, row)];
    }
    let mut x = DVector::zeros(k);
    for (pos, &orig) in perm.iter().enumerate() {
        x[orig] = z[pos];
    }
    Ok(x)
}

/// `log det` of a symmetric positive definite matrix, `None` if the Cholesky
/// factorization fails.
pub(crate) fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    Some((0..m.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
