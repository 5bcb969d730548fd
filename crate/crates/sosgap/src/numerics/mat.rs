//! Dense matrices, cyclic Jacobi eigendecomposition, nullspace, least squares.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        let mut m = Mat::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged rows");
            m.data[i * cols..(i + 1) * cols].copy_from_slice(row);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// A^T A as a symmetric matrix.
    pub fn gram(&self) -> SymMatrix {
        let mut g = SymMatrix::zeros(self.cols);
        for j in 0..self.cols {
            for k in j..self.cols {
                let mut s = 0.0;
                for i in 0..self.rows {
                    s += self.get(i, j) * self.get(i, k);
                }
                g.set_sym(j, k, s);
            }
        }
        g
    }
}

/// Symmetric matrix with full storage; construction symmetrizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> SymMatrix {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Builds (A + A^T)/2 from an arbitrary square matrix.
    pub fn symmetrized(m: &Mat) -> SymMatrix {
        assert_eq!(m.rows(), m.cols(), "symmetrizing a non-square matrix");
        let dim = m.rows();
        let mut s = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                s.data[i * dim + j] = 0.5 * (m.get(i, j) + m.get(j, i));
            }
        }
        s
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> SymMatrix {
        let mut s = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = 0.5 * (f(i, j) + f(j, i));
                s.set_sym(i, j, v);
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets both (i, j) and (j, i).
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set_sym(i, j, cur + v);
    }

    pub fn scale(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.get(i, j) * x[j])
                    .sum::<f64>()
            })
            .collect()
    }

    /// x^T A x.
    pub fn quad(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn frob_inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn to_mat(&self) -> Mat {
        Mat {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }
}

/// Sorted eigendecomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as matrix columns, matching the order above.
    pub vectors: Mat,
    /// max_i ||A v_i - lambda_i v_i||.
    pub residual: f64,
}

impl SpectralResult {
    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        self.vectors.col(i)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.abs())
            .fold(0.0, f64::max)
    }
}

/// Cyclic Jacobi eigendecomposition.  Deterministic: fixed sweep order,
/// eigenvalues sorted ascending, each eigenvector's largest-magnitude
/// entry (lowest index on ties) made positive.
pub fn sym_eig(a: &SymMatrix) -> Result<SpectralResult> {
    let n = a.dim;
    if n == 0 {
        return Err(Error::Invalid("empty matrix".into()));
    }
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.frob_norm();
    let tol = 1e-15 * norm.max(f64::MIN_POSITIVE);
    let max_sweeps = 64;
    let mut converged = false;
    let mut off = 0.0;
    for _sweep in 0..max_sweeps {
        off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        off = (2.0 * off).sqrt();
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q of the working matrix.
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigNoConvergence {
            off,
            sweeps: max_sweeps,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = Mat::zeros(n, n);
    for (new_idx, &old_idx) in order.iter().enumerate() {
        eigenvalues.push(m[old_idx * n + old_idx]);
        let mut col: Vec<f64> = (0..n).map(|k| v[k * n + old_idx]).collect();
        // Deterministic sign: largest-magnitude entry positive.
        let mut dom = 0usize;
        for (k, val) in col.iter().enumerate() {
            if val.abs() > col[dom].abs() + col[dom].abs() * 1e-15 {
                dom = k;
            }
        }
        if col[dom] < 0.0 {
            for val in col.iter_mut() {
                *val = -*val;
            }
        }
        for k in 0..n {
            vectors.set(k, new_idx, col[k]);
        }
    }

    let mut residual = 0.0f64;
    for i in 0..n {
        let vi = vectors.col(i);
        let av = a.matvec(&vi);
        let r = av
            .iter()
            .zip(vi.iter())
            .map(|(a, b)| (a - eigenvalues[i] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        residual = residual.max(r);
    }

    Ok(SpectralResult {
        eigenvalues,
        vectors,
        residual,
    })
}

/// Largest singular value of a rectangular matrix.
pub fn spectral_norm(a: &Mat) -> f64 {
    let gram = a.gram();
    match sym_eig(&gram) {
        Ok(eig) => eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => a.frob_norm(),
    }
}

/// Orthonormal basis of { v : ||A v|| <= rtol * ||A|| * ||v|| }.
///
/// Candidate directions come from the eigendecomposition of A^T A, but
/// the acceptance test is the residual against A itself: squaring the
/// matrix floors the resolvable singular value near sqrt(machine eps),
/// while ||A v|| stays accurate to machine eps.  Without the re-test a
/// true null vector of a well-scaled 9 x 10 evaluation matrix can be
/// missed at rtol = 1e-8.
pub fn nullspace(a: &Mat, rtol: f64) -> Vec<Vec<f64>> {
    let gram = a.gram();
    let eig = match sym_eig(&gram) {
        Ok(e) => e,
        Err(_) => return Vec::new(),
    };
    let sigma_max = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    if sigma_max == 0.0 {
        // Zero matrix: everything is in the nullspace.
        return (0..a.cols())
            .map(|i| {
                let mut e = vec![0.0; a.cols()];
                e[i] = 1.0;
                e
            })
            .collect();
    }
    // Generous candidate band from the squared spectrum, exact test on A.
    let candidate_sigma = (rtol.max(1e-8) * 1e3) * sigma_max;
    let mut out = Vec::new();
    for i in 0..eig.eigenvalues.len() {
        let sigma_sq = eig.eigenvalues[i].max(0.0);
        if sigma_sq.sqrt() > candidate_sigma {
            break;
        }
        let v = eig.eigenvector(i);
        let av = a.matvec(&v);
        let res = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if res <= rtol * sigma_max * vn {
            out.push(v);
        }
    }
    out
}

/// Minimum-norm least-squares solution of A x = b via the
/// pseudoinverse from the eigendecomposition of A^T A.
pub fn lstsq_min_norm(a: &Mat, b: &[f64], rtol: f64) -> Vec<f64> {
    assert_eq!(b.len(), a.rows());
    let gram = a.gram();
    let eig = match sym_eig(&gram) {
        Ok(e) => e,
        Err(_) => return vec![0.0; a.cols()],
    };
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    if lambda_max == 0.0 {
        return vec![0.0; a.cols()];
    }
    let cutoff = (rtol * rtol) * lambda_max;
    let atb = a.transpose().matvec(b);
    let mut x = vec![0.0; a.cols()];
    for i in 0..eig.eigenvalues.len() {
        let lambda = eig.eigenvalues[i];
        if lambda <= cutoff {
            continue;
        }
        let v = eig.eigenvector(i);
        let coeff = v.iter().zip(&atb).map(|(a, b)| a * b).sum::<f64>() / lambda;
        for (xk, vk) in x.iter_mut().zip(&v) {
            *xk += coeff * vk;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::forms::{monomial_basis, HomogeneousForm};

    #[test]
    fn eig_identity_and_diagonal() {
        let eye = SymMatrix::from_fn(4, |i, j| if i == j { 1.0 } else { 0.0 });
        let r = sym_eig(&eye).unwrap();
        for l in &r.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
        assert!(r.residual < 1e-12);

        let diag = SymMatrix::from_fn(3, |i, j| if i == j { [3.0, -1.0, 2.0][i] } else { 0.0 });
        let r = sym_eig(&diag).unwrap();
        assert!((r.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 2.0).abs() < 1e-14);
        assert!((r.eigenvalues[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rank_one() {
        // v v^T with v = (1, 2, 2): eigenvalues (0, 0, 9).
        let v = [1.0, 2.0, 2.0];
        let m = SymMatrix::from_fn(3, |i, j| v[i] * v[j]);
        let r = sym_eig(&m).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-13);
        assert!(r.eigenvalues[1].abs() < 1e-13);
        assert!((r.eigenvalues[2] - 9.0).abs() < 1e-12);
        let top = r.eigenvector(2);
        let dot: f64 = top.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_symmetric_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &dim in &[2usize, 5, 10, 35] {
            let m = SymMatrix::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let r = sym_eig(&m).unwrap();
            // Reconstruction V diag(lambda) V^T must match.
            let mut recon = SymMatrix::zeros(dim);
            for k in 0..dim {
                let v = r.eigenvector(k);
                for i in 0..dim {
                    for j in i..dim {
                        recon.add_sym(i, j, r.eigenvalues[k] * v[i] * v[j]);
                    }
                }
            }
            let diff = recon.sub(&m).frob_norm();
            assert!(diff < 1e-11 * (1.0 + m.frob_norm()), "dim {dim}: diff {diff}");
            assert!(r.residual <= 1e-9 * (1.0 + m.frob_norm()));
            // Orthonormality.
            for a in 0..dim {
                for b in a..dim {
                    let va = r.eigenvector(a);
                    let vb = r.eigenvector(b);
                    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eig_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = SymMatrix::from_fn(10, |_, _| rng.gen_range(-1.0..1.0));
        let a = sym_eig(&m).unwrap();
        let b = sym_eig(&m).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn nullspace_edge_cases() {
        let zero = Mat::zeros(2, 3);
        let ns = nullspace(&zero, 1e-8);
        assert_eq!(ns.len(), 3);

        let mut full = Mat::zeros(3, 3);
        full.set(0, 0, 2.0);
        full.set(1, 1, 1.0);
        full.set(2, 2, 0.5);
        assert!(nullspace(&full, 1e-8).is_empty());
    }

    #[test]
    fn nullspace_of_grid_evaluation_matrix_is_one_dimensional() {
        // Rows: values of the 10 cubic monomials at the 9 affine grid
        // points (a, b, 1), a, b in {-1, 0, 1}.  The value relation on
        // the nine rows is the unique left-null vector; we test on the
        // transpose.  Expected relation: w(a) w(b) with w(+-1) = 1,
        // w(0) = -2, verified here against the tensor identities
        // sum_a w(a) = 0 and sum_a w(a) a = 0.
        let w = |t: f64| if t == 0.0 { -2.0 } else { 1.0 };
        assert_eq!(w(-1.0) + w(0.0) + w(1.0), 0.0);
        assert_eq!(-w(-1.0) + w(1.0), 0.0);

        let basis = monomial_basis(3, 3);
        let mut rows = Vec::new();
        let mut points = Vec::new();
        for a in [-1.0f64, 0.0, 1.0] {
            for b in [-1.0f64, 0.0, 1.0] {
                points.push((a, b));
                let row: Vec<f64> = basis
                    .iter()
                    .map(|e| {
                        let f = HomogeneousForm::monomial(3, e).unwrap();
                        f.evaluate_real(&[a, b, 1.0])
                    })
                    .collect();
                rows.push(row);
            }
        }
        let eval = Mat::from_rows(&rows);
        let left_null = nullspace(&eval.transpose(), 1e-8);
        assert_eq!(left_null.len(), 1);
        let u = &left_null[0];
        // Match against the tensor pattern up to one global scale.
        let (a0, b0) = points[0];
        let scale = u[0] / (w(a0) * w(b0));
        for (i, &(a, b)) in points.iter().enumerate() {
            assert!(
                (u[i] - scale * w(a) * w(b)).abs() < 1e-9,
                "entry {i}: {} vs {}",
                u[i],
                scale * w(a) * w(b)
            );
        }

        // Right nullspace: the two cubics through all nine points.
        let forms_null = nullspace(&eval, 1e-8);
        assert_eq!(forms_null.len(), 2);
    }

    #[test]
    fn lstsq_solves_consistent_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Mat::from_rows(&(0..6).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect::<Vec<_>>());
        let x_true: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x_true);
        let x = lstsq_min_norm(&a, &b, 1e-10);
        let res = a
            .matvec(&x)
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-10);
    }
}
