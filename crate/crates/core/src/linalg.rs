//! Small dense linear-algebra helpers on top of nalgebra.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// In-place `P <- (P + P')/2`.
pub fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// Returns `L` with `P = L L'` for a symmetric PSD `P`.
///
/// Cholesky first; semidefinite inputs fall back to `U diag(sqrt(max(d,0)))`
/// from the symmetric eigendecomposition.
pub fn psd_factor(p: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = p.clone().cholesky() {
        let l = ch.l();
        let diag_min = l
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let diag_max = l.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if diag_max == 0.0 || diag_min > 1e-10 * diag_max {
            return l;
        }
    }
    let eig = SymmetricEigen::new(p.clone());
    let mut l = eig.eigenvectors;
    for (j, &d) in eig.eigenvalues.iter().enumerate() {
        let s = d.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    l
}

/// Solves `A X = B` for symmetric PSD `A`, falling back to the eigen
/// pseudo-inverse when `A` is numerically singular.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = a.clone().cholesky() {
        let l = ch.l_dirty();
        let n = a.nrows();
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0_f64;
        for i in 0..n {
            let d = l[(i, i)].abs();
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        if dmax > 0.0 && dmin > 1e-7 * dmax {
            return ch.solve(b);
        }
    }
    sym_pinv(a) * b
}

/// Moore-Penrose inverse of a symmetric matrix via its eigendecomposition.
pub fn sym_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = scale * 1e-13 * a.nrows().max(1) as f64;
    let mut inv_d = DVector::zeros(a.nrows());
    for (i, &d) in eig.eigenvalues.iter().enumerate() {
        if d.abs() > cut {
            inv_d[i] = 1.0 / d;
        }
    }
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&inv_d) * v.transpose()
}

/// Inverse of a symmetric positive definite matrix, or `Singular(context)`.
pub fn spd_inverse(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let ch = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(context.to_string()))?;
    let inv = ch.inverse();
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::Singular(context.to_string()))
    }
}

/// Solves `G x = c` for a symmetric Gram matrix, erroring when it is not
/// positive definite.
pub fn gram_solve(g: &DMatrix<f64>, c: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let ch = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(context.to_string()))?;
    let x = ch.solve(c);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(context.to_string()))
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |m: f64, v| m.max(*v))
}

/// Largest eigenvalue modulus of a square (possibly non-symmetric) matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .fold(0.0, |m: f64, z| m.max(z.norm()))
}

/// Eigendecomposition of a symmetric matrix with eigenpairs sorted by
/// descending eigenvalue. Each eigenvector is sign-normalised so that its
/// first non-zero entry is positive; exact ties are broken by lexicographic
/// comparison of the normalised eigenvectors.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut vecs = eig.eigenvectors;
    for j in 0..n {
        let mut col = vecs.column_mut(j);
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-300) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let vals = &eig.eigenvalues;
    order.sort_by(
        |&i, &j| match vals[j].partial_cmp(&vals[i]).unwrap_or(Ordering::Equal) {
            Ordering::Equal => {
                for k in 0..n {
                    match vecs[(k, j)]
                        .partial_cmp(&vecs[(k, i)])
                        .unwrap_or(Ordering::Equal)
                    {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                Ordering::Equal
            }
            o => o,
        },
    );
    let values = DVector::from_iterator(n, order.iter().map(|&i| vals[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &vecs.column(src));
    }
    (values, vectors)
}

/// Solves `P = A P A' + Q` by inverting `I - A (x) A` on `vec(Q)`.
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = a.nrows();
    if a.ncols() != k || q.nrows() != k || q.ncols() != k {
        return Err(Error::Dimension(
            "lyapunov operands must be square and equal".into(),
        ));
    }
    let kron = a.kronecker(a);
    let lhs = DMatrix::<f64>::identity(k * k, k * k) - kron;
    let rhs = DVector::from_column_slice(q.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("discrete Lyapunov system".into()))?;
    let mut p = DMatrix::from_column_slice(k, k, sol.as_slice());
    symmetrize(&mut p);
    Ok(p)
}

/// Ordinary least squares of `y` (length T) on the columns of `x` (T x k).
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let sol = gram_solve(
        &xtx,
        &DMatrix::from_column_slice(xty.len(), 1, xty.as_slice()),
        context,
    )?;
    Ok(sol.column(0).into_owned())
}

pub fn trace(a: &DMatrix<f64>) -> f64 {
    a.diagonal().sum()
}
