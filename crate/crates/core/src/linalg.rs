//! Dense complex linear-algebra helpers: nalgebra storage, faer decompositions.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending with the
/// matching eigenvector columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = (m + m.adjoint()).scale(0.5);
    let eig = to_faer(&h).self_adjoint_eigen(faer::Side::Lower).expect("Hermitian eigensolver failed");
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let values = order.iter().map(|&i| s[i].re).collect();
    let vectors = CMat::from_fn(n, n, |r, col| u[(r, order[col])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let h = (m + m.adjoint()).scale(0.5);
    let mut v = to_faer(&h).self_adjoint_eigenvalues(faer::Side::Lower).expect("Hermitian eigensolver failed");
    v.sort_by(f64::total_cmp);
    v
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s = to_faer(m).singular_values().expect("SVD failed");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// SVD with singular triplets sorted by decreasing singular value; `u` and `v`
/// are the full square factors.
fn sorted_svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = to_faer(m).svd().expect("SVD failed");
    let s = svd.S().column_vector();
    let (u, v) = (svd.U(), svd.V());
    let k = s.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re));
    let values = order.iter().map(|&i| s[i].re).collect();
    let col_index = |col: usize, len: usize| if col < k { order[col] } else { col.min(len - 1) };
    let u_sorted = CMat::from_fn(u.nrows(), u.ncols(), |r, col| u[(r, col_index(col, u.ncols()))]);
    let v_sorted = CMat::from_fn(v.nrows(), v.ncols(), |r, col| v[(r, col_index(col, v.ncols()))]);
    (u_sorted, values, v_sorted)
}

/// The `k` right singular vectors with the smallest singular values.
pub fn smallest_right_singular(m: &CMat, k: usize) -> CMat {
    let n = m.ncols();
    let (_, _, v) = sorted_svd(m);
    v.columns(n - k.min(n), k.min(n)).into_owned()
}

/// The `k` left singular vectors with the largest singular values.
pub fn largest_left_singular(m: &CMat, k: usize) -> CMat {
    let (u, _, _) = sorted_svd(m);
    u.columns(0, k.min(u.ncols())).into_owned()
}

/// Orthonormal basis (as columns) of the kernel of a square matrix, using
/// singular values at most `tol`.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    assert_eq!(m.nrows(), n, "null_space expects a square matrix");
    let (_, s, v) = sorted_svd(m);
    let rank = s.iter().filter(|&&x| x > tol).count();
    v.columns(rank, n - rank).into_owned()
}

/// Orthonormal basis (as columns) of the range of a matrix, keeping singular
/// directions above `tol`.
pub fn range_basis(m: &CMat, tol: f64) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return CMat::zeros(m.nrows(), 0);
    }
    let (u, s, _) = sorted_svd(m);
    let rank = s.iter().filter(|&&x| x > tol).count();
    u.columns(0, rank).into_owned()
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    to_faer(m).eigenvalues().expect("eigenvalue iteration did not converge")
}

/// Eigenvalues and unit-norm right eigenvectors of a general complex matrix.
/// For defective matrices the returned vectors are (nearly) linearly dependent.
pub fn eigen_decomposition(m: &CMat) -> (Vec<C64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = to_faer(m).eigen().expect("eigenvalue iteration did not converge");
    let s = eig.S().column_vector();
    let u = eig.U();
    let values = (0..n).map(|i| s[i]).collect();
    let mut v = CMat::from_fn(n, n, |i, j| u[(i, j)]);
    for mut col in v.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= c(nrm, 0.0);
        }
    }
    (values, v)
}

/// Condition number σ_max/σ_min; infinite for singular input.
pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn is_normal(m: &CMat, tol: f64) -> bool {
    let a_star = m.adjoint();
    op_norm(&(m * &a_star - &a_star * m)) <= tol
}

/// Integer matrix power by repeated squaring.
pub fn mat_pow(m: &CMat, k: u32) -> CMat {
    let n = m.nrows();
    let mut result = CMat::identity(n, n);
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}
