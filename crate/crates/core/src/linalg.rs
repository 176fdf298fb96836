//! Small dense helpers shared by the span, isotropy and fitting code.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::poly::{ComplexPoly, MonomialKey, RealPolyModel};

/// Sorted union of the monomials used by `polys`.
pub fn key_union<'a>(polys: impl IntoIterator<Item = &'a ComplexPoly>) -> Vec<MonomialKey> {
    let set: BTreeSet<MonomialKey> = polys.into_iter().flat_map(|p| p.keys()).collect();
    set.into_iter().collect()
}

/// Real coordinates `(Re γ, Im γ)` of `poly` over `keys`.
pub fn complex_coords(poly: &ComplexPoly, keys: &[MonomialKey]) -> DVector<f64> {
    let mut v = DVector::zeros(2 * keys.len());
    for (i, key) in keys.iter().enumerate() {
        let c = poly.coeff(key.k(), key.l());
        v[2 * i] = c.re;
        v[2 * i + 1] = c.im;
    }
    v
}

/// Columns are the complex coordinates of each polynomial.
pub fn coord_matrix(polys: &[&ComplexPoly], keys: &[MonomialKey]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * keys.len(), polys.len());
    for (j, p) in polys.iter().enumerate() {
        m.set_column(j, &complex_coords(p, keys));
    }
    m
}

/// Flattened real-form entries over the listed degrees.
pub fn real_coords(real: &RealPolyModel, degrees: &[u32]) -> DVector<f64> {
    let len: usize = degrees.iter().map(|n| 2 * (*n as usize + 1)).sum();
    let mut v = DVector::zeros(len);
    let mut offset = 0;
    for &n in degrees {
        let cols = n as usize + 1;
        if let Some(block) = real.block(n) {
            for (i, x) in block.iter().enumerate() {
                v[offset + i] = *x;
            }
        }
        offset += 2 * cols;
    }
    v
}

/// `σ_min / σ_max` of the columns of `m`; 0 when there are more columns
/// than rows or the matrix vanishes. An empty column set gives 1.
pub fn singular_ratio(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Numerical rank with singular values below `rel_cut · σ_max` discarded.
pub fn rank(m: &DMatrix<f64>, rel_cut: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_cut * max).count()
}

/// Minimum-norm least-squares solution of `a x ≈ b` with singular values
/// below `rel_cut · σ_max` truncated.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_cut: f64) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let max = svd.singular_values.max();
    let mut x = DVector::zeros(a.ncols());
    if max == 0.0 {
        return x;
    }
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= rel_cut * max {
            continue;
        }
        let coef = u.column(i).dot(b) / s;
        x += vt.row(i).transpose() * coef;
    }
    x
}

/// Pseudo-inverse of a symmetric positive semi-definite matrix, truncating
/// eigenvalues below `rel_cut · λ_max`.
pub fn pinv_symmetric(m: &DMatrix<f64>, rel_cut: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut out = DMatrix::zeros(n, n);
    if max == 0.0 {
        return out;
    }
    for (i, lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() <= rel_cut * max {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        out += v * v.transpose() / *lam;
    }
    out
}

/// Residual norm of `b` after projection onto the column span of `a`.
pub fn span_residual(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    if a.ncols() == 0 {
        return b.norm();
    }
    let x = lstsq(a, b, 1e-12);
    (b - a * x).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let x = DVector::from_vec(vec![0.5, -1.5]);
        let b = &a * &x;
        let got = lstsq(&a, &b, 1e-12);
        assert!((got - x).norm() < 1e-12);
        assert!(span_residual(&a, &b) < 1e-12);
    }

    #[test]
    fn lstsq_truncates_dependent_columns() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![5.0, 5.0]);
        let x = lstsq(&a, &b, 1e-10);
        // minimum-norm solution lies along (1, 2)
        assert!((x[1] - 2.0 * x[0]).abs() < 1e-12);
        assert!((&a * &x - &b).norm() < 1e-12);
    }

    #[test]
    fn rank_and_ratio() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert_eq!(rank(&a, 1e-9), 1);
        assert!(singular_ratio(&a) < 1e-12);
        assert_eq!(singular_ratio(&DMatrix::<f64>::zeros(3, 0)), 1.0);
    }

    #[test]
    fn pinv_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0, 2.0]));
        let p = pinv_symmetric(&m, 1e-10);
        assert!((p[(0, 0)] - 0.25).abs() < 1e-15);
        assert_eq!(p[(1, 1)], 0.0);
        assert!((p[(2, 2)] - 0.5).abs() < 1e-15);
    }
}
