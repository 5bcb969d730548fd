//! Damped Newton iteration for square polynomial systems in a chart.
//!
//! A projective complete intersection is computed by dehomogenizing
//! n - 1 forms on the affine chart x = Q (y, 1) for a rotation Q and
//! running Newton from many seeded complex starts.  The residual used
//! for convergence is scale-free: |f_i(x)| / ||x||^deg_i, i.e. the
//! value at the sphere representative, so a root of a unit-norm form
//! is accepted exactly when the form vanishes there to 1e-11.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forms::{ComplexPoint, HomogeneousForm};
use crate::numerics::mat::{sym_eig, Mat, SymMatrix};
use crate::par;

/// Residual (relative, at the sphere representative) below which a
/// Newton iterate counts as converged.
pub const NEWTON_RESIDUAL: f64 = 1e-11;
/// Iteration cap per start.
pub const NEWTON_MAX_ITERS: usize = 100;
/// Projective distance under which two roots are considered equal.
pub const ROOT_DEDUP_DISTANCE: f64 = 1e-7;

/// A square polynomial system dehomogenized on the chart x = Q (y, 1).
#[derive(Clone, Debug)]
pub struct ChartSystem {
    forms: Vec<HomogeneousForm>,
    grads: Vec<Vec<HomogeneousForm>>,
    rotation: Mat,
}

impl ChartSystem {
    /// `forms` must be k forms in k + 1 variables; `rotation` is the
    /// (k+1) x (k+1) orthogonal chart matrix.
    pub fn new(forms: Vec<HomogeneousForm>, rotation: Mat) -> Result<ChartSystem> {
        if forms.is_empty() {
            return Err(Error::Invalid("empty system".into()));
        }
        let n = forms[0].n();
        if forms.len() + 1 != n {
            return Err(Error::Dimension(format!(
                "need n - 1 = {} forms in {} variables, got {}",
                n - 1,
                n,
                forms.len()
            )));
        }
        for f in &forms {
            if f.n() != n {
                return Err(Error::Dimension("forms disagree on variable count".into()));
            }
            if f.is_zero() {
                return Err(Error::Invalid("zero form in system".into()));
            }
        }
        if rotation.rows() != n || rotation.cols() != n {
            return Err(Error::Dimension("chart rotation has wrong shape".into()));
        }
        let grads = forms.iter().map(|f| f.gradient()).collect();
        Ok(ChartSystem {
            forms,
            grads,
            rotation,
        })
    }

    /// Chart with Q = I: plain dehomogenization at the last coordinate.
    pub fn identity_chart(forms: Vec<HomogeneousForm>) -> Result<ChartSystem> {
        let n = forms.first().map(|f| f.n()).unwrap_or(1);
        ChartSystem::new(forms, Mat::identity(n))
    }

    /// Number of unknowns (= number of equations).
    pub fn unknowns(&self) -> usize {
        self.forms.len()
    }

    pub fn forms(&self) -> &[HomogeneousForm] {
        &self.forms
    }

    /// Maps chart coordinates to the ambient point x = Q (y, 1).
    pub fn embed(&self, y: &[Complex64]) -> ComplexPoint {
        let n = self.unknowns() + 1;
        debug_assert_eq!(y.len(), n - 1);
        let mut coords = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = Complex64::new(self.rotation.get(i, n - 1), 0.0);
            for (j, yj) in y.iter().enumerate() {
                acc += yj * self.rotation.get(i, j);
            }
            coords[i] = acc;
        }
        ComplexPoint::new(coords).expect("chart image of a finite point")
    }

    fn eval(&self, x: &ComplexPoint) -> Vec<Complex64> {
        self.forms
            .iter()
            .map(|f| f.evaluate(x).expect("matching dimensions"))
            .collect()
    }

    /// Jacobian d f_i / d y_j of the dehomogenized system.
    fn jacobian(&self, x: &ComplexPoint) -> Vec<Vec<Complex64>> {
        let k = self.unknowns();
        let n = k + 1;
        let mut jac = vec![vec![Complex64::new(0.0, 0.0); k]; k];
        for (i, grad) in self.grads.iter().enumerate() {
            let partials: Vec<Complex64> = grad
                .iter()
                .map(|g| g.evaluate(x).expect("matching dimensions"))
                .collect();
            for j in 0..k {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..n {
                    acc += partials[l] * self.rotation.get(l, j);
                }
                jac[i][j] = acc;
            }
        }
        jac
    }

    /// Scale-free residual: max_i |f_i(x)| / ||x||^deg_i.
    pub fn residual(&self, y: &[Complex64]) -> f64 {
        let x = self.embed(y);
        self.residual_at(&x)
    }

    fn residual_at(&self, x: &ComplexPoint) -> f64 {
        let norm = x.norm();
        self.forms
            .iter()
            .map(|f| f.evaluate(x).expect("matching dimensions").norm() / norm.powi(f.degree() as i32))
            .fold(0.0, f64::max)
    }
}

/// Runs damped Newton from every start, keeps converged roots
/// (relative residual below 1e-11), and deduplicates at projective
/// distance 1e-7 keeping the first occurrence in start order.
///
/// Errors with `NoTransverseRoots` when no start converges.
pub fn newton_solve(sys: &ChartSystem, starts: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let outcomes = par::map_indexed(starts.len(), |i| newton_from(sys, starts[i].clone()));
    let mut roots: Vec<Vec<Complex64>> = Vec::new();
    for y in outcomes.into_iter().flatten() {
        let p = sys.embed(&y).sphere_normalize();
        let duplicate = roots.iter().any(|r| {
            sys.embed(r)
                .sphere_normalize()
                .projective_distance(&p)
                < ROOT_DEDUP_DISTANCE
        });
        if !duplicate {
            roots.push(y);
        }
    }
    if roots.is_empty() {
        return Err(Error::NoTransverseRoots);
    }
    Ok(roots)
}

/// One damped Newton run; None when it diverges or stalls.
pub fn newton_from(sys: &ChartSystem, mut y: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let mut x = sys.embed(&y);
    let mut fx = sys.eval(&x);
    let mut res = sys.residual_at(&x);
    for _ in 0..NEWTON_MAX_ITERS {
        if res < NEWTON_RESIDUAL {
            // Two undamped polish steps push the residual to the
            // rounding floor; keep them only if they helped.
            for _ in 0..2 {
                let jac = sys.jacobian(&x);
                let rhs: Vec<Complex64> = fx.iter().map(|v| -v).collect();
                let Some(delta) = solve_complex(jac, rhs) else { break };
                let cand: Vec<Complex64> = y.iter().zip(&delta).map(|(a, b)| a + b).collect();
                let cx = sys.embed(&cand);
                let cres = sys.residual_at(&cx);
                if cres < res {
                    y = cand;
                    x = cx;
                    fx = sys.eval(&x);
                    res = cres;
                } else {
                    break;
                }
            }
            return Some(y);
        }
        let jac = sys.jacobian(&x);
        let rhs: Vec<Complex64> = fx.iter().map(|v| -v).collect();
        let delta = solve_complex(jac, rhs)?;
        let fnorm = vec_norm(&fx);
        let mut lambda = 1.0f64;
        let mut accepted = false;
        while lambda >= 1e-12 {
            let cand: Vec<Complex64> = y
                .iter()
                .zip(&delta)
                .map(|(a, b)| a + b * lambda)
                .collect();
            let cx = sys.embed(&cand);
            let cfx = sys.eval(&cx);
            if vec_norm(&cfx) <= (1.0 - 0.25 * lambda) * fnorm {
                y = cand;
                x = cx;
                fx = cfx;
                res = sys.residual_at(&x);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
        if y.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e18 {
            return None;
        }
    }
    if res < NEWTON_RESIDUAL {
        Some(y)
    } else {
        None
    }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting over the complex field.
/// Returns None when the pivot collapses (singular Jacobian).
pub fn solve_complex(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row][col].norm() > a[pivot][col].norm() {
                pivot = row;
            }
        }
        if a[pivot][col].norm() < 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = Complex64::new(1.0, 0.0) / a[col][col];
        for row in (col + 1)..n {
            let factor = a[row][col] * inv;
            if factor.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let sub = factor * a[col][k];
                a[row][k] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Smallest singular value of a complex matrix via realification:
/// [[Re, -Im], [Im, Re]] has the same singular values, doubled.
pub fn complex_sigma_min(rows: &[Vec<Complex64>]) -> f64 {
    let k = rows.len();
    if k == 0 {
        return 0.0;
    }
    let cols = rows[0].len();
    let mut real = Mat::zeros(2 * k, 2 * cols);
    for (i, row) in rows.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            real.set(i, j, c.re);
            real.set(i, j + cols, -c.im);
            real.set(i + k, j, c.im);
            real.set(i + k, j + cols, c.re);
        }
    }
    let gram: SymMatrix = real.gram();
    match sym_eig(&gram) {
        Ok(eig) => eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::HomogeneousForm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cubic_root_system() -> ChartSystem {
        // x^3 - x z^2 in variables (x, z): chart roots {-1, 0, 1}.
        let f = HomogeneousForm::from_terms(2, 3, &[(&[3, 0], 1.0), (&[1, 2], -1.0)])
            .unwrap()
            .normalized()
            .unwrap();
        ChartSystem::identity_chart(vec![f]).unwrap()
    }

    #[test]
    fn start_at_root_is_a_fixed_point() {
        let sys = cubic_root_system();
        let root = vec![c(1.0, 0.0)];
        let out = newton_from(&sys, root.clone()).unwrap();
        assert!((out[0] - root[0]).norm() < 1e-11);
    }

    #[test]
    fn finds_all_real_roots_of_the_cubic() {
        let sys = cubic_root_system();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let starts: Vec<Vec<Complex64>> = (0..60)
            .map(|_| vec![c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))])
            .collect();
        let roots = newton_solve(&sys, &starts).unwrap();
        assert_eq!(roots.len(), 3);
        let mut values: Vec<f64> = roots.iter().map(|r| r[0].re).collect();
        values.sort_by(f64::total_cmp);
        for (got, want) in values.iter().zip(&[-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        for r in &roots {
            assert!(r[0].im.abs() < 1e-9);
        }
    }

    #[test]
    fn real_systems_return_conjugation_closed_root_sets() {
        // x^3 + x z^2: chart roots {0, i, -i}.
        let f = HomogeneousForm::from_terms(2, 3, &[(&[3, 0], 1.0), (&[1, 2], 1.0)])
            .unwrap()
            .normalized()
            .unwrap();
        let sys = ChartSystem::identity_chart(vec![f]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let starts: Vec<Vec<Complex64>> = (0..80)
            .map(|_| vec![c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))])
            .collect();
        let roots = newton_solve(&sys, &starts).unwrap();
        assert_eq!(roots.len(), 3);
        for r in &roots {
            let conj = vec![r[0].conj()];
            let found = roots.iter().any(|s| {
                sys.embed(s)
                    .sphere_normalize()
                    .projective_distance(&sys.embed(&conj).sphere_normalize())
                    < 1e-7
            });
            assert!(found, "conjugate of {:?} missing", r);
        }
    }

    #[test]
    fn grid_system_has_nine_roots() {
        let f1 = HomogeneousForm::from_terms(3, 3, &[(&[3, 0, 0], 1.0), (&[1, 0, 2], -1.0)])
            .unwrap()
            .normalized()
            .unwrap();
        let f2 = HomogeneousForm::from_terms(3, 3, &[(&[0, 3, 0], 1.0), (&[0, 1, 2], -1.0)])
            .unwrap()
            .normalized()
            .unwrap();
        let sys = ChartSystem::identity_chart(vec![f1, f2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let starts: Vec<Vec<Complex64>> = (0..540)
            .map(|_| {
                (0..2)
                    .map(|_| c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
                    .collect()
            })
            .collect();
        let roots = newton_solve(&sys, &starts).unwrap();
        assert_eq!(roots.len(), 9);
        for r in &roots {
            assert!(sys.residual(r) < 1e-11);
            for coord in r {
                assert!(coord.im.abs() < 1e-9);
                let re = coord.re;
                let nearest = [-1.0, 0.0, 1.0]
                    .iter()
                    .map(|t| (re - t).abs())
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest < 1e-9);
            }
        }
    }

    #[test]
    fn solve_complex_handles_pivoting() {
        let a = vec![
            vec![c(0.0, 0.0), c(2.0, 1.0)],
            vec![c(1.0, -1.0), c(0.5, 0.0)],
        ];
        let x_true = vec![c(1.0, 2.0), c(-0.5, 0.25)];
        let b: Vec<Complex64> = (0..2)
            .map(|i| a[i][0] * x_true[0] + a[i][1] * x_true[1])
            .collect();
        let x = solve_complex(a, b).unwrap();
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).norm() < 1e-12);
        }

        let singular = vec![
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ];
        assert!(solve_complex(singular, vec![c(1.0, 0.0), c(1.0, 0.0)]).is_none());
    }

    #[test]
    fn sigma_min_of_unitary_is_one() {
        let rows = vec![
            vec![c(0.0, 1.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0)],
        ];
        assert!((complex_sigma_min(&rows) - 1.0).abs() < 1e-12);
        let rank1 = vec![
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ];
        assert!(complex_sigma_min(&rank1) < 1e-12);
    }
}
