//! Dense linear-algebra kernels for small matrices (dimension up to a few
//! dozen): symmetric eigendecomposition by cyclic Jacobi rotations, Cholesky,
//! LU solves with partial pivoting, and the continuous Lyapunov equation by
//! dense vectorization. All routines are pure functions; nothing here is
//! tuned for large problems.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is numerically singular (pivot {pivot} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("certificate inconclusive: Lyapunov operator singular")]
    Inconclusive,
    #[error("eigensolver failed to converge")]
    NoConvergence,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        if rows.is_empty() {
            return Err(LinalgError::InvalidInput("empty row list"));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::InvalidInput("ragged or empty rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Mat { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Allocation-free matvec for hot loops.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        assert_eq!(self.rows, y.len(), "matvec output length mismatch");
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix; construction averages the two triangles so the stored
/// form satisfies `get(i, j) == get(j, i)` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: Mat,
}

impl SymMatrix {
    pub fn new(m: &Mat) -> Result<Self, LinalgError> {
        if m.rows != m.cols {
            return Err(LinalgError::InvalidInput("symmetric matrix must be square"));
        }
        let n = m.rows;
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(SymMatrix { m: s })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        SymMatrix::new(&Mat::from_rows(rows)?)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { m: Mat::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix { m: Mat::identity(n) }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        SymMatrix { m }
    }

    pub fn dim(&self) -> usize {
        self.m.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_mat(&self) -> &Mat {
        &self.m
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m.add(&other.m) }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m.sub(&other.m) }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { m: self.m.scale(s) }
    }

    pub fn max_abs(&self) -> f64 {
        self.m.max_abs()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.m.matvec(x)
    }

    pub fn is_finite(&self) -> bool {
        self.m.is_finite()
    }
}

/// Definiteness of a symmetric matrix under a tolerance on its eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefinitenessClass {
    PositiveDefinite,
    PositiveSemiDefinite,
    Zero,
    NegativeSemiDefinite,
    NegativeDefinite,
    Indefinite,
}

/// Eigendecomposition of a symmetric matrix: `values` ascending, `vectors`
/// holding the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

const MAX_JACOBI_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Unconditionally
/// convergent for the small dimensions used here; eigenvalues returned in
/// ascending order with consistently permuted eigenvectors.
pub fn sym_eigen(q: &SymMatrix) -> Result<Eigen, LinalgError> {
    if !q.is_finite() {
        return Err(LinalgError::InvalidInput("non-finite entries"));
    }
    let n = q.dim();
    let mut a = q.m.clone();
    let mut v = Mat::identity(n);
    if n == 1 {
        return Ok(Eigen { values: vec![a[(0, 0)]], vectors: v });
    }

    for sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for r in (p + 1)..n {
                off += a[(p, r)].abs();
            }
        }
        if off == 0.0 {
            break;
        }
        // On early sweeps skip rotations for entries already tiny relative to
        // their diagonal, the classic threshold strategy.
        let thresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n - 1 {
            for r in (p + 1)..n {
                let apq = a[(p, r)];
                let small = 1e-14 * (a[(p, p)].abs() + a[(r, r)].abs());
                if sweep > 3 && apq.abs() <= small * 1e-2 {
                    a[(p, r)] = 0.0;
                    a[(r, p)] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let theta = 0.5 * (a[(r, r)] - a[(p, p)]) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let app = a[(p, p)];
                let arr = a[(r, r)];
                a[(p, p)] = app - t * apq;
                a[(r, r)] = arr + t * apq;
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != r {
                        let akp = a[(k, p)];
                        let akr = a[(k, r)];
                        a[(k, p)] = akp - s * (akr + tau * akp);
                        a[(p, k)] = a[(k, p)];
                        a[(k, r)] = akr + s * (akp - tau * akr);
                        a[(r, k)] = a[(k, r)];
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkr = v[(k, r)];
                    v[(k, p)] = vkp - s * (vkr + tau * vkp);
                    v[(k, r)] = vkr + s * (vkp - tau * vkr);
                }
            }
        }
        if sweep + 1 == MAX_JACOBI_SWEEPS {
            return Err(LinalgError::NoConvergence);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (newc, &oldc) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, newc)] = v[(k, oldc)];
        }
    }
    Ok(Eigen { values, vectors })
}

fn classify_from_values(values: &[f64], tol: f64) -> DefinitenessClass {
    let lmin = values.first().copied().unwrap_or(0.0);
    let lmax = values.last().copied().unwrap_or(0.0);
    if lmin.abs() <= tol && lmax.abs() <= tol {
        DefinitenessClass::Zero
    } else if lmin > tol {
        DefinitenessClass::PositiveDefinite
    } else if lmax < -tol {
        DefinitenessClass::NegativeDefinite
    } else if lmin >= -tol {
        DefinitenessClass::PositiveSemiDefinite
    } else if lmax <= tol {
        DefinitenessClass::NegativeSemiDefinite
    } else {
        DefinitenessClass::Indefinite
    }
}

/// Classify the definiteness of `q` with an absolute eigenvalue tolerance.
pub fn classify_definiteness(q: &SymMatrix, tol: f64) -> Result<DefinitenessClass, LinalgError> {
    let eig = sym_eigen(q)?;
    Ok(classify_from_values(&eig.values, tol))
}

/// Classification with the module default tolerance: relative 1e-10 against
/// the largest eigenvalue magnitude, with an absolute floor of 1e-12.
pub fn classify_definiteness_default(q: &SymMatrix) -> Result<DefinitenessClass, LinalgError> {
    let eig = sym_eigen(q)?;
    let scale = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = (1e-10 * scale).max(1e-12);
    Ok(classify_from_values(&eig.values, tol))
}

/// Cholesky factorization `Q = L·Lᵀ` with `L` lower triangular; a
/// non-positive pivot is reported as `NotPositiveDefinite` (the failed PD
/// test), not as a crash.
pub fn cholesky(q: &SymMatrix) -> Result<Mat, LinalgError> {
    if !q.is_finite() {
        return Err(LinalgError::InvalidInput("non-finite entries"));
    }
    let n = q.dim();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = q.get(i, j);
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite { index: i, pivot: sum });
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

struct LuFactors {
    lu: Mat,
    perm: Vec<usize>,
}

/// LU with partial pivoting; pivots at or below `1e-12 · max|entry|` are
/// treated as rank deficiency.
fn lu_factor(a: &Mat) -> Result<LuFactors, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::InvalidInput("solve requires a square matrix"));
    }
    if !a.is_finite() {
        return Err(LinalgError::InvalidInput("non-finite entries"));
    }
    let n = a.rows;
    let tol = 1e-12 * a.max_abs();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = lu[(col, col)].abs();
        for r in col + 1..n {
            let v = lu[(r, col)].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val <= tol {
            return Err(LinalgError::Singular { col, pivot: pivot_val });
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
            perm.swap(col, pivot_row);
        }
        let inv = 1.0 / lu[(col, col)];
        for r in col + 1..n {
            let f = lu[(r, col)] * inv;
            lu[(r, col)] = f;
            for j in col + 1..n {
                lu[(r, j)] -= f * lu[(col, j)];
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

fn lu_solve(f: &LuFactors, b: &[f64]) -> Vec<f64> {
    let n = f.perm.len();
    let mut y: Vec<f64> = f.perm.iter().map(|&p| b[p]).collect();
    for i in 1..n {
        for k in 0..i {
            y[i] -= f.lu[(i, k)] * y[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= f.lu[(i, k)] * y[k];
        }
        y[i] /= f.lu[(i, i)];
    }
    y
}

/// Solve `A·x = b` by LU with partial pivoting.
pub fn solve_linear(a: &Mat, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if a.rows != b.len() {
        return Err(LinalgError::InvalidInput("right-hand side length mismatch"));
    }
    let f = lu_factor(a)?;
    Ok(lu_solve(&f, b))
}

/// Solve the continuous Lyapunov equation `AᵀP + PA = −Q` for symmetric `P`
/// by vectorizing to the dense n²×n² system `(I⊗Aᵀ + Aᵀ⊗I)·vec(P) = vec(−Q)`.
/// Singularity of that operator (eigenvalues of A summing to zero in pairs)
/// is reported as `Singular`.
pub fn solve_lyapunov(a: &Mat, q: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let n = a.rows;
    if a.cols != n || q.dim() != n {
        return Err(LinalgError::InvalidInput("Lyapunov dimension mismatch"));
    }
    let nn = n * n;
    // Column-major vec: vec(P)[c*n + r] = P[r][c].
    let mut k = Mat::zeros(nn, nn);
    for c in 0..n {
        for r in 0..n {
            let row = c * n + r;
            // (I⊗Aᵀ)vec(P) = vec(AᵀP): couples entries within column c.
            for j in 0..n {
                k[(row, c * n + j)] += a[(j, r)];
            }
            // (Aᵀ⊗I)vec(P) = vec(PA): couples entry r across columns.
            for l in 0..n {
                k[(row, l * n + r)] += a[(l, c)];
            }
        }
    }
    let mut rhs = vec![0.0; nn];
    for c in 0..n {
        for r in 0..n {
            rhs[c * n + r] = -q.get(r, c);
        }
    }
    let f = lu_factor(&k)?;
    let x = lu_solve(&f, &rhs);
    let mut p = Mat::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            p[(r, c)] = x[c * n + r];
        }
    }
    // The exact solution is symmetric; averaging removes rounding skew.
    SymMatrix::new(&p)
}

/// Outcome of the certificate-based Hurwitz test.
#[derive(Debug, Clone)]
pub struct Hurwitz {
    pub hurwitz: bool,
    /// The Lyapunov certificate `P` solving `AᵀP + PA = −I`, present when the
    /// test succeeded.
    pub p: Option<SymMatrix>,
}

/// Certificate-based Hurwitz test: `A` is Hurwitz iff the Lyapunov solution
/// for `Q = I` exists and is positive definite (checked by Cholesky). A
/// singular Lyapunov operator (eigenvalues symmetric about the imaginary
/// axis) yields `Inconclusive` instead of a verdict.
pub fn is_hurwitz(a: &Mat) -> Result<Hurwitz, LinalgError> {
    let q = SymMatrix::identity(a.rows);
    match solve_lyapunov(a, &q) {
        Ok(p) => match cholesky(&p) {
            Ok(_) => Ok(Hurwitz { hurwitz: true, p: Some(p) }),
            Err(LinalgError::NotPositiveDefinite { .. }) => Ok(Hurwitz { hurwitz: false, p: None }),
            Err(e) => Err(e),
        },
        Err(LinalgError::Singular { .. }) => Err(LinalgError::Inconclusive),
        Err(e) => Err(e),
    }
}

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
