//! Extreme rays of the dual cone of sums of squares.
//!
//! A linear functional ell on H_{n,2d} is in the dual cone Sigma*
//! exactly when its moment matrix Q_ell(f) = ell(f^2) is positive
//! semidefinite.  On the extreme rays that separate nonnegative forms
//! from sums of squares, ell is supported on a Cayley-Bacharach
//! configuration and Q_ell has rank exactly dim H_{n,d} - n (7 in case
//! (3,6), 6 in case (4,4)); the only other extreme rays are the point
//! evaluations of rank 1.
//!
//! The constructions here follow the two weight recipes: for a fully
//! real configuration, free positive weights a_i at all points but one
//! and the forced negative weight a_k = -u_k^2 / sum_{i != k} u_i^2/a_i;
//! for a configuration with one conjugate pair (relation normalized so
//! the pair coefficient is 1), free positive weights at the real
//! points and the pair weight b = m + t i with m the more-negative
//! root of S m^2 + 2 m + S t^2 = 0, S = sum u_i^2/a_i.  Both make the
//! functional annihilate the kernel direction predicted by the
//! relation, which pins the rank at dim H_{n,d} - n.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::forms::{monomial_basis, sum_of_squares_power, Case, ComplexPoint, HomogeneousForm};
use crate::numerics::{lstsq_min_norm, min_on_sphere, nullspace, sym_eig, Mat, SymMatrix};
use crate::par;
use crate::varieties::{
    cb_relation, complete_intersection, CBRelation, Normalization, PointConfiguration,
};

/// Relative eigenvalue threshold for all rank decisions.
pub const RANK_RTOL: f64 = 1e-8;
/// A moment matrix counts as PSD when min eig >= -PSD_TOL * max |eig|.
pub const PSD_TOL: f64 = 1e-8;
/// Kernel forms must miss a common real zero by at least this much.
pub const KERNEL_COMMON_ZERO_MIN: f64 = 1e-6;
/// Internal seed for the deterministic sphere scans in certificates.
const SPHERE_SEED: u64 = 0x53505245;
const SPHERE_RESTARTS: usize = 8;
/// Re-draw budget for subsystem sampling from a kernel subspace.
const SUBSYSTEM_ATTEMPTS: usize = 40;

/// A linear functional on H_{n,2d}, stored as its values on the
/// degree-2d monomial basis, so applying it to a form is a dot
/// product with the form's dense coefficient vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DualFunctional {
    case: Case,
    values: Vec<f64>,
}

impl DualFunctional {
    pub fn new(case: Case, values: Vec<f64>) -> Result<DualFunctional> {
        if values.len() != case.dim_full() {
            return Err(Error::Dimension(format!(
                "functional needs {} values for case {}, got {}",
                case.dim_full(),
                case,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("functional value".into()));
        }
        Ok(DualFunctional { case, values })
    }

    pub fn case(&self) -> Case {
        self.case
    }

    /// Values on `monomial_basis(n, 2d)`, in basis order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, factor: f64) -> DualFunctional {
        DualFunctional {
            case: self.case,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// ell(f) for f in H_{n,2d}.
    pub fn apply(&self, f: &HomogeneousForm) -> Result<f64> {
        if f.n() != self.case.vars() || f.degree() != self.case.full_degree() {
            return Err(Error::CaseMismatch {
                expected: self.case.to_string(),
                got: format!("form in H_({}, {})", f.n(), f.degree()),
            });
        }
        let basis = monomial_basis(self.case.vars(), self.case.full_degree());
        let index: HashMap<&Vec<u32>, usize> =
            basis.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let mut acc = 0.0;
        for (exps, c) in f.terms() {
            let i = index[exps];
            acc += c * self.values[i];
        }
        Ok(acc)
    }

    /// ell((x_1^2 + ... + x_n^2)^d), the normalization mass.
    pub fn mass(&self) -> f64 {
        let r = sum_of_squares_power(self.case.vars(), self.case.half_degree());
        self.apply(&r).expect("shape by construction")
    }

    /// Scales so the mass is exactly 1; errors when the mass is not
    /// safely positive.
    pub fn normalize_mass(&self) -> Result<DualFunctional> {
        let mass = self.mass();
        if !(mass > 1e-12 * self.norm().max(1e-300)) {
            return Err(Error::ZeroFunctional);
        }
        Ok(self.scale(1.0 / mass))
    }

    /// Cosine similarity of the two coefficient vectors.
    pub fn cosine(&self, other: &DualFunctional) -> Result<f64> {
        if self.case != other.case {
            return Err(Error::CaseMismatch {
                expected: self.case.to_string(),
                got: other.case.to_string(),
            });
        }
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return Err(Error::ZeroFunctional);
        }
        Ok(dot / denom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DualRepr {
    case: Case,
    values: BTreeMap<String, f64>,
}

impl Serialize for DualFunctional {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let basis = monomial_basis(self.case.vars(), self.case.full_degree());
        let values = basis
            .iter()
            .zip(&self.values)
            .map(|(e, &v)| {
                let key = e
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                (key, v)
            })
            .collect();
        DualRepr {
            case: self.case,
            values,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DualFunctional {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<DualFunctional, D::Error> {
        let repr = DualRepr::deserialize(d)?;
        let basis = monomial_basis(repr.case.vars(), repr.case.full_degree());
        if repr.values.len() != basis.len() {
            return Err(D::Error::custom(format!(
                "functional needs all {} basis values, got {}",
                basis.len(),
                repr.values.len()
            )));
        }
        let mut values = Vec::with_capacity(basis.len());
        for exps in &basis {
            let key = exps
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            match repr.values.get(&key) {
                Some(&v) => values.push(v),
                None => return Err(D::Error::custom(format!("missing basis value {key}"))),
            }
        }
        DualFunctional::new(repr.case, values).map_err(D::Error::custom)
    }
}

/// The quadratic form Q_ell(f) = ell(f^2) on H_{n,d} in the monomial
/// basis.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    case: Case,
    matrix: SymMatrix,
}

/// Assembles the moment matrix: entry (alpha, beta) = ell(x^(alpha+beta)).
pub fn moment_matrix(l: &DualFunctional) -> MomentMatrix {
    let case = l.case();
    let half = monomial_basis(case.vars(), case.half_degree());
    let full = monomial_basis(case.vars(), case.full_degree());
    let index: HashMap<&Vec<u32>, usize> = full.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let dim = half.len();
    let mut m = SymMatrix::zeros(dim);
    let mut sum = vec![0u32; case.vars()];
    for i in 0..dim {
        for j in i..dim {
            for l_idx in 0..case.vars() {
                sum[l_idx] = half[i][l_idx] + half[j][l_idx];
            }
            m.set_sym(i, j, l.values()[index[&sum]]);
        }
    }
    MomentMatrix { case, matrix: m }
}

impl MomentMatrix {
    pub fn case(&self) -> Case {
        self.case
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    /// Q_ell(f) = f' M f on coefficient vectors.
    pub fn quad(&self, f: &HomogeneousForm) -> Result<f64> {
        if f.n() != self.case.vars() || f.degree() != self.case.half_degree() {
            return Err(Error::CaseMismatch {
                expected: self.case.to_string(),
                got: format!("form in H_({}, {})", f.n(), f.degree()),
            });
        }
        Ok(self.matrix.quad(&f.to_dense()))
    }

    pub fn spectrum(&self) -> Result<crate::numerics::SpectralResult> {
        sym_eig(&self.matrix)
    }
}

/// A point-supported functional ell(f) = sum_i mu_i f(z_i) with
/// conjugate-symmetric weights, together with its cached coefficient
/// vector on the degree-2d basis.
#[derive(Clone, Debug)]
pub struct MomentFunctional {
    support: PointConfiguration,
    weights: Vec<Complex64>,
    dual: DualFunctional,
}

impl MomentFunctional {
    pub fn new(support: PointConfiguration, weights: Vec<Complex64>) -> Result<MomentFunctional> {
        let s = support.len();
        if weights.len() != s {
            return Err(Error::Dimension(format!(
                "expected {} weights, got {}",
                s,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::NonFinite("weight".into()));
        }
        let wmax = weights.iter().map(|w| w.norm()).fold(0.0, f64::max);
        if wmax == 0.0 {
            return Err(Error::ZeroFunctional);
        }
        // Conjugate symmetry, then snap it exact: real weights at real
        // points, w_zbar = conj(w_z) at pairs.
        let mut weights = weights;
        let rc = support.real_count();
        for (i, w) in weights.iter_mut().enumerate().take(rc) {
            if w.im.abs() > 1e-9 * wmax {
                return Err(Error::Invalid(format!(
                    "weight {i} at a real point has imaginary part {}",
                    w.im
                )));
            }
            *w = Complex64::new(w.re, 0.0);
        }
        let mut p = rc;
        while p < s {
            if (weights[p + 1] - weights[p].conj()).norm() > 1e-9 * wmax {
                return Err(Error::Invalid(format!(
                    "pair weights at {p} are not conjugate"
                )));
            }
            weights[p + 1] = weights[p].conj();
            p += 2;
        }

        let case = support.case();
        let basis = monomial_basis(case.vars(), case.full_degree());
        let mut values = Vec::with_capacity(basis.len());
        for exps in &basis {
            let mono = HomogeneousForm::monomial(case.vars(), exps)?;
            let mut acc = Complex64::new(0.0, 0.0);
            let mut scale = 0.0f64;
            for (w, z) in weights.iter().zip(support.points()) {
                let v = mono.evaluate(z)?;
                scale += w.norm() * v.norm();
                acc += w * v;
            }
            if acc.im.abs() > 1e-9 * scale.max(1e-300) {
                return Err(Error::Invalid(format!(
                    "functional is not real on x^{exps:?}: imaginary part {}",
                    acc.im
                )));
            }
            values.push(acc.re);
        }
        let dual = DualFunctional::new(case, values)?;
        Ok(MomentFunctional {
            support,
            weights,
            dual,
        })
    }

    pub fn case(&self) -> Case {
        self.support.case()
    }

    pub fn support(&self) -> &PointConfiguration {
        &self.support
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn dual(&self) -> &DualFunctional {
        &self.dual
    }

    pub fn apply(&self, f: &HomogeneousForm) -> Result<f64> {
        self.dual.apply(f)
    }

    pub fn moment_matrix(&self) -> MomentMatrix {
        moment_matrix(&self.dual)
    }

    pub fn scale(&self, factor: f64) -> MomentFunctional {
        MomentFunctional {
            support: self.support.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            dual: self.dual.scale(factor),
        }
    }
}

/// Weight data of an extreme-ray certificate, before normalization.
#[derive(Clone, Debug)]
pub enum ExtremalVariant {
    /// Fully real support: all s weights, a_k < 0 at index k.
    RealWeights { a: Vec<f64>, k: usize },
    /// One conjugate pair: s - 2 positive weights at the real points
    /// and pair weight b = m + t i.
    ComplexPair { a: Vec<f64>, m: f64, t: f64 },
}

/// A verified extreme ray of the dual cone that is not a point
/// evaluation: PSD moment matrix of rank dim H_{n,d} - n with an
/// n-dimensional kernel containing the defining forms.
#[derive(Clone, Debug)]
pub struct ExtremeRayCertificate {
    support: PointConfiguration,
    relation: CBRelation,
    variant: ExtremalVariant,
    functional: MomentFunctional,
    rank: usize,
    kernel: Vec<HomogeneousForm>,
    min_eigenvalue: f64,
    kernel_direction_residual: f64,
    kernel_sphere_min: f64,
}

impl ExtremeRayCertificate {
    pub fn case(&self) -> Case {
        self.support.case()
    }

    pub fn support(&self) -> &PointConfiguration {
        &self.support
    }

    pub fn relation(&self) -> &CBRelation {
        &self.relation
    }

    pub fn variant(&self) -> &ExtremalVariant {
        &self.variant
    }

    /// The mass-normalized functional (ell((sum x_i^2)^d) = 1).
    pub fn functional(&self) -> &MomentFunctional {
        &self.functional
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Orthonormal basis of the moment-matrix kernel, as forms.
    pub fn kernel(&self) -> &[HomogeneousForm] {
        &self.kernel
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// ||Q f|| / (||f|| max|eig|) for the predicted kernel direction f.
    pub fn kernel_direction_residual(&self) -> f64 {
        self.kernel_direction_residual
    }

    /// Sphere minimum of the sum of squared kernel forms.
    pub fn kernel_sphere_min(&self) -> f64 {
        self.kernel_sphere_min
    }
}

/// Builds the fully real extreme ray: positive weights a_i at every
/// point except k, where a_k = -u_k^2 / sum_{i != k} u_i^2 / a_i makes
/// the values vector (u_1/a_1, ..., u_s/a_s) a kernel direction.
/// `a` lists the s - 1 free weights in point order, skipping index k.
pub fn build_extremal_real(
    config: &PointConfiguration,
    rel: &CBRelation,
    a: &[f64],
    k: usize,
) -> Result<ExtremeRayCertificate> {
    let s = config.len();
    if !config.is_fully_real() {
        return Err(Error::NotFullyReal {
            pairs: config.pair_count(),
        });
    }
    if rel.len() != s {
        return Err(Error::Dimension("relation length mismatch".into()));
    }
    if k >= s {
        return Err(Error::Invalid(format!("index k = {k} out of range")));
    }
    if a.len() != s - 1 {
        return Err(Error::Dimension(format!(
            "expected {} free weights, got {}",
            s - 1,
            a.len()
        )));
    }
    for (i, &w) in a.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { index: i, value: w });
        }
    }
    let u = real_relation(rel)?;

    let mut a_full = vec![0.0f64; s];
    let mut src = a.iter();
    for (i, slot) in a_full.iter_mut().enumerate() {
        if i != k {
            *slot = *src.next().expect("s - 1 weights");
        }
    }
    let big_s: f64 = (0..s)
        .filter(|&i| i != k)
        .map(|i| u[i] * u[i] / a_full[i])
        .sum();
    a_full[k] = -(u[k] * u[k]) / big_s;

    let target: Vec<f64> = (0..s).map(|i| u[i] / a_full[i]).collect();
    let weights: Vec<Complex64> = a_full.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    finish_certificate(
        config,
        rel,
        ExtremalVariant::RealWeights { a: a_full, k },
        weights,
        target,
    )
}

/// Builds the one-conjugate-pair extreme ray.  The relation must be
/// complex-pair normalized (pair coefficient exactly 1); `a` lists the
/// s - 2 positive weights at the real points and `t` the imaginary
/// part of the pair weight, feasible for |t| <= 1/S.
pub fn build_extremal_complex(
    config: &PointConfiguration,
    rel: &CBRelation,
    a: &[f64],
    t: f64,
) -> Result<ExtremeRayCertificate> {
    let s = config.len();
    if config.pair_count() != 1 {
        return Err(Error::NotOnePair {
            pairs: config.pair_count(),
        });
    }
    if rel.normalization() != Normalization::ComplexPairNormalized {
        return Err(Error::NotRescaled);
    }
    if rel.len() != s {
        return Err(Error::Dimension("relation length mismatch".into()));
    }
    let rc = config.real_count();
    if a.len() != rc {
        return Err(Error::Dimension(format!(
            "expected {} real-point weights, got {}",
            rc,
            a.len()
        )));
    }
    for (i, &w) in a.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { index: i, value: w });
        }
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("tilt t".into()));
    }
    let u = real_relation(rel)?;
    let big_s: f64 = (0..rc).map(|i| u[i] * u[i] / a[i]).sum();
    let bound = 1.0 / big_s;
    if t.abs() > bound * (1.0 + 1e-12) {
        return Err(Error::InfeasibleTilt { t, bound });
    }
    // More-negative root of S m^2 + 2 m + S t^2 = 0.
    let disc = (bound * bound - t * t).max(0.0);
    let m = -bound - disc.sqrt();
    let denom = m * m + t * t;

    let mut target: Vec<f64> = (0..rc).map(|i| u[i] / a[i]).collect();
    target.push(2.0 * m / denom);
    target.push(-2.0 * t / denom);

    let mut weights: Vec<Complex64> = a.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    weights.push(Complex64::new(m, t));
    weights.push(Complex64::new(m, -t));
    finish_certificate(
        config,
        rel,
        ExtremalVariant::ComplexPair {
            a: a.to_vec(),
            m,
            t,
        },
        weights,
        target,
    )
}

fn real_relation(rel: &CBRelation) -> Result<Vec<f64>> {
    let max = rel
        .coefficients()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    for c in rel.coefficients() {
        if c.im.abs() > 1e-9 * max {
            return Err(Error::Invalid(
                "relation coefficient has a nonzero imaginary part".into(),
            ));
        }
    }
    Ok(rel.coefficients().iter().map(|c| c.re).collect())
}

/// Shared tail of both constructions: normalize mass, eigendecompose,
/// check PSD-ness, rank, kernel dimension and contents, the predicted
/// kernel direction, and the no-common-real-zero condition.
fn finish_certificate(
    config: &PointConfiguration,
    rel: &CBRelation,
    variant: ExtremalVariant,
    weights: Vec<Complex64>,
    target: Vec<f64>,
) -> Result<ExtremeRayCertificate> {
    let case = config.case();
    let raw = MomentFunctional::new(config.clone(), weights)?;
    let mass = raw.dual().mass();
    if !(mass > 1e-12 * raw.dual().norm().max(1e-300)) {
        return Err(Error::ZeroFunctional);
    }
    let functional = raw.scale(1.0 / mass);

    let mm = functional.moment_matrix();
    let spec = mm.spectrum()?;
    let lam_max = spec.max_abs_eigenvalue();
    let min_eigenvalue = spec.eigenvalues[0];
    if min_eigenvalue < -PSD_TOL * lam_max {
        return Err(Error::NotPsd {
            min_eig: min_eigenvalue,
        });
    }
    let n = case.vars();
    let dim = case.dim_half();
    let threshold = RANK_RTOL * lam_max;
    let rank = spec.eigenvalues.iter().filter(|l| l.abs() > threshold).count();
    if rank != dim - n {
        return Err(Error::RankMismatch {
            rank,
            expected: dim - n,
        });
    }
    let kernel: Vec<HomogeneousForm> = (0..dim)
        .filter(|&i| spec.eigenvalues[i].abs() <= threshold)
        .map(|i| {
            HomogeneousForm::from_dense(n, case.half_degree(), &spec.eigenvector(i))
        })
        .collect::<Result<_>>()?;
    if kernel.len() != n {
        return Err(Error::KernelDimension {
            dim: kernel.len(),
            expected: n,
        });
    }

    // The defining forms vanish on the support, so they must sit
    // inside the kernel subspace.
    for f in config.defining_forms() {
        let residual = projection_residual(&f.normalized()?, &kernel);
        if residual > 1e-7 {
            return Err(Error::Invalid(format!(
                "defining form misses the moment kernel by {residual:.3e}"
            )));
        }
    }

    // Predicted kernel direction in evaluation coordinates.
    let eval = config.evaluation_matrix(case.half_degree());
    let f_dense = lstsq_min_norm(&eval, &target, 1e-10);
    let f_norm = f_dense.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target_norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ls_res = {
        let got = eval.matvec(&f_dense);
        got.iter()
            .zip(&target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    if ls_res > 1e-7 * (1.0 + target_norm) || f_norm == 0.0 {
        return Err(Error::LeastSquares {
            residual: ls_res,
            tol: 1e-7 * (1.0 + target_norm),
        });
    }
    let mv = mm.matrix().matvec(&f_dense);
    let kernel_direction_residual =
        mv.iter().map(|v| v * v).sum::<f64>().sqrt() / (f_norm * lam_max.max(1e-300));
    if kernel_direction_residual > 1e-7 {
        return Err(Error::NotAnnihilating {
            residual: kernel_direction_residual,
        });
    }

    // The kernel forms have no common real zero in exact arithmetic
    // (the support is cut out by the defining forms alone, where the
    // remaining kernel forms cannot vanish).  The observed sphere
    // minimum of the squared sum is recorded rather than gated: random
    // configurations routinely sit at 1e-7 and below, and only the
    // separation constructions need a usable floor.
    let mut q = HomogeneousForm::zero(n, case.full_degree());
    for w in &kernel {
        q = q.add(&w.multiply(w)?)?;
    }
    let sphere = min_on_sphere(&q, SPHERE_RESTARTS, SPHERE_SEED);

    debug_assert!(config.pair_count() <= 1);
    Ok(ExtremeRayCertificate {
        support: config.clone(),
        relation: rel.clone(),
        variant,
        functional,
        rank,
        kernel,
        min_eigenvalue,
        kernel_direction_residual,
        kernel_sphere_min: sphere.value,
    })
}

/// ||f - proj_span(basis) f|| on coefficient vectors; the basis must be
/// orthonormal.
fn projection_residual(f: &HomogeneousForm, basis: &[HomogeneousForm]) -> f64 {
    let dense = f.to_dense();
    let mut rest = dense.clone();
    for b in basis {
        let bd = b.to_dense();
        let dot: f64 = dense.iter().zip(&bd).map(|(a, c)| a * c).sum();
        for (r, c) in rest.iter_mut().zip(&bd) {
            *r -= dot * c;
        }
    }
    rest.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Kernel of the moment matrix as forms.  Requires a PSD matrix; each
/// returned form p satisfies ell(p q) = 0 within 1e-8 for basis q.
pub fn kernel_of(l: &DualFunctional) -> Result<Vec<HomogeneousForm>> {
    let case = l.case();
    let mm = moment_matrix(l);
    let spec = mm.spectrum()?;
    let lam_max = spec.max_abs_eigenvalue();
    if spec.eigenvalues[0] < -PSD_TOL * lam_max {
        return Err(Error::NotPsd {
            min_eig: spec.eigenvalues[0],
        });
    }
    let threshold = RANK_RTOL * lam_max;
    let dim = case.dim_half();
    let kernel: Vec<HomogeneousForm> = (0..dim)
        .filter(|&i| spec.eigenvalues[i].abs() <= threshold)
        .map(|i| HomogeneousForm::from_dense(case.vars(), case.half_degree(), &spec.eigenvector(i)))
        .collect::<Result<_>>()?;
    // |ell(p q)| = |(M p)_q| <= kernel eigenvalue <= threshold.
    for p in &kernel {
        let mv = mm.matrix().matvec(&p.to_dense());
        let worst = mv.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if worst > 1e-8 * (1.0 + lam_max) {
            return Err(Error::NotAnnihilating { residual: worst });
        }
    }
    Ok(kernel)
}

/// The point-supported functional mu_i = u_i / f_n(z_i) that
/// annihilates span{defining forms, f_n} * H_{n,d}; returned
/// unnormalized (its mass may legitimately be zero or negative for
/// configurations with more than one pair).
pub fn annihilating_functional(
    config: &PointConfiguration,
    rel: &CBRelation,
    f_n: &HomogeneousForm,
) -> Result<MomentFunctional> {
    let case = config.case();
    if f_n.n() != case.vars() || f_n.degree() != case.half_degree() {
        return Err(Error::CaseMismatch {
            expected: case.to_string(),
            got: format!("form in H_({}, {})", f_n.n(), f_n.degree()),
        });
    }
    if rel.len() != config.len() {
        return Err(Error::Dimension("relation length mismatch".into()));
    }
    let fnorm = f_n.coeff_norm();
    let mut weights = Vec::with_capacity(config.len());
    for (i, z) in config.points().iter().enumerate() {
        let y = f_n.evaluate(z)?;
        let scale = fnorm * z.norm().powi(case.half_degree() as i32);
        if y.norm() < 1e-8 * scale {
            return Err(Error::Invalid(format!(
                "completion form vanishes at support point {i} (value {:.3e})",
                y.norm()
            )));
        }
        weights.push(rel.coefficients()[i] / y);
    }
    MomentFunctional::new(config.clone(), weights)
}

/// Orthonormalizes forms by Gram-Schmidt on coefficient vectors.
pub fn orthonormalize_forms(forms: &[HomogeneousForm]) -> Result<Vec<HomogeneousForm>> {
    if forms.is_empty() {
        return Ok(Vec::new());
    }
    let n = forms[0].n();
    let degree = forms[0].degree();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(forms.len());
    for f in forms {
        if f.n() != n || f.degree() != degree {
            return Err(Error::Dimension("forms disagree on shape".into()));
        }
        let mut v = f.to_dense();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vl, bl) in v.iter_mut().zip(b) {
                *vl -= dot * bl;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::Invalid("forms are linearly dependent".into()));
        }
        for vl in v.iter_mut() {
            *vl /= norm;
        }
        basis.push(v);
    }
    basis
        .into_iter()
        .map(|v| HomogeneousForm::from_dense(n, degree, &v))
        .collect()
}

fn case_of_half_forms(forms: &[HomogeneousForm]) -> Result<Case> {
    let f = forms
        .first()
        .ok_or_else(|| Error::Invalid("empty form list".into()))?;
    match (f.n(), f.degree()) {
        (3, 3) => Ok(Case::TernarySextic),
        (4, 2) => Ok(Case::QuaternaryQuartic),
        (n, d) => Err(Error::CaseMismatch {
            expected: "(3, 3) or (4, 2) half forms".into(),
            got: format!("({n}, {d})"),
        }),
    }
}

/// Samples an (n-1)-subsystem of the n-dimensional subspace W by a
/// seeded Gaussian coefficient matrix; also returns the basis
/// completion direction (the subsystem rows' orthogonal complement in
/// coefficient space over the orthonormal basis of W).
fn sample_subsystem(
    ortho: &[HomogeneousForm],
    seed: u64,
    stream: u64,
) -> Result<(Vec<HomogeneousForm>, HomogeneousForm)> {
    let n = ortho.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut c = Mat::zeros(n - 1, n);
    for i in 0..n - 1 {
        for j in 0..n {
            c.set(i, j, crate::varieties::gaussian(&mut rng));
        }
    }
    let null = nullspace(&c, 1e-8);
    if null.len() != 1 {
        return Err(Error::Invalid("degenerate subsystem draw".into()));
    }
    let combine = |coeffs: &[f64]| -> Result<HomogeneousForm> {
        let mut f = HomogeneousForm::zero(ortho[0].n(), ortho[0].degree());
        for (w, &cf) in ortho.iter().zip(coeffs) {
            f = f.add_scaled(w, cf)?;
        }
        f.normalized()
    };
    let mut subsystem = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        subsystem.push(combine(c.row(i))?);
    }
    let completion = combine(&null[0])?;
    Ok((subsystem, completion))
}

/// Reconstructs the annihilating functional of an n-dimensional form
/// subspace W per the kernel recipe: intersect a random transverse
/// (n-1)-subsystem, complete the basis, take mu_i = u_i / f_n(z_i),
/// and normalize the mass to 1.  Re-draws on numerical rejection.
pub fn functional_from_kernel(w: &[HomogeneousForm], seed: u64) -> Result<MomentFunctional> {
    let case = case_of_half_forms(w)?;
    let n = case.vars();
    if w.len() != n {
        return Err(Error::KernelDimension {
            dim: w.len(),
            expected: n,
        });
    }
    let ortho = orthonormalize_forms(w)?;
    let mut last_err = Error::NoTransverseSubsystem {
        attempts: SUBSYSTEM_ATTEMPTS,
    };
    for attempt in 0..SUBSYSTEM_ATTEMPTS {
        let drawn = sample_subsystem(&ortho, seed, 0x4B46 + attempt as u64);
        let (subsystem, completion) = match drawn {
            Ok(pair) => pair,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let outcome = (|| -> Result<MomentFunctional> {
            let config = complete_intersection(
                case,
                &subsystem,
                seed.wrapping_add(0x1000 + attempt as u64),
            )?;
            let rel = cb_relation(&config)?;
            let raw = annihilating_functional(&config, &rel, &completion)?;
            let mass = raw.dual().mass();
            if mass.abs() <= 1e-9 * raw.dual().norm().max(1e-300) {
                return Err(Error::ZeroFunctional);
            }
            let normalized = raw.scale(1.0 / mass);
            // Annihilation of W * H_{n,d}.
            let half = monomial_basis(n, case.half_degree());
            let bound = 1e-7 * (1.0 + normalized.dual().norm());
            let mut worst = 0.0f64;
            for wf in &ortho {
                for exps in &half {
                    let q = HomogeneousForm::monomial(n, exps)?;
                    let val = normalized.apply(&wf.multiply(&q)?)?;
                    worst = worst.max(val.abs());
                }
            }
            if worst > bound {
                return Err(Error::NotAnnihilating { residual: worst });
            }
            Ok(normalized)
        })();
        match outcome {
            Ok(functional) => return Ok(functional),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// A real point recovered from a rank-1 moment matrix, with the mass
/// scale ell((sum x_i^2)^d) = ||v||^(2d).
#[derive(Clone, Debug)]
pub struct RecoveredPoint {
    pub point: ComplexPoint,
    pub scale: f64,
}

/// Inverts a rank-1 PSD moment matrix into the point evaluation it
/// represents: with s the square-root vector of values on H_{n,d} and
/// s_1 = s(x_i*^d) > 0 the largest diagonal pick, v_i* = s_1^(1/d) and
/// v_j = s(x_i*^(d-1) x_j) / s_1^((d-1)/d).
pub fn recover_point_evaluation(l: &DualFunctional) -> Result<RecoveredPoint> {
    let case = l.case();
    let n = case.vars();
    let d = case.half_degree();
    let mm = moment_matrix(l);
    let spec = mm.spectrum()?;
    let lam_max = spec.max_abs_eigenvalue();
    if spec.eigenvalues[0] < -PSD_TOL * lam_max {
        return Err(Error::NotPsd {
            min_eig: spec.eigenvalues[0],
        });
    }
    let threshold = RANK_RTOL * lam_max;
    let rank = spec.eigenvalues.iter().filter(|v| v.abs() > threshold).count();
    if rank != 1 {
        return Err(Error::RankMismatch { rank, expected: 1 });
    }
    let dim = case.dim_half();
    let top = spec.eigenvalues[dim - 1];
    let mut s_vec = spec.eigenvector(dim - 1);
    let scale_root = top.max(0.0).sqrt();
    for v in s_vec.iter_mut() {
        *v *= scale_root;
    }

    let half = monomial_basis(n, d);
    let index: HashMap<&Vec<u32>, usize> = half.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let pure = |i: usize| -> usize {
        let mut e = vec![0u32; n];
        e[i] = d as u32;
        index[&e]
    };
    let mut istar = 0usize;
    for i in 1..n {
        if s_vec[pure(i)].abs() > s_vec[pure(istar)].abs() {
            istar = i;
        }
    }
    let smax = s_vec.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if s_vec[pure(istar)].abs() < 1e-8 * smax.max(1e-300) || smax == 0.0 {
        return Err(Error::ZeroFunctional);
    }
    if s_vec[pure(istar)] < 0.0 {
        for v in s_vec.iter_mut() {
            *v = -*v;
        }
    }
    let s1 = s_vec[pure(istar)];
    let mut coords = vec![0.0f64; n];
    let denom = s1.powf((d as f64 - 1.0) / d as f64);
    for j in 0..n {
        if j == istar {
            coords[j] = s1.powf(1.0 / d as f64);
        } else {
            let mut e = vec![0u32; n];
            e[istar] = d as u32 - 1;
            e[j] = 1;
            coords[j] = s_vec[index[&e]] / denom;
        }
    }

    // The functional must be the evaluation at v on the whole basis.
    let point = ComplexPoint::from_real(&coords)?;
    let full = monomial_basis(n, case.full_degree());
    let vmax = l.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (exps, &val) in full.iter().zip(l.values()) {
        let mono = HomogeneousForm::monomial(n, exps)?;
        let got = mono.evaluate(&point)?.re;
        if (got - val).abs() > 1e-7 * vmax.max(1e-300) {
            return Err(Error::Invalid(format!(
                "rank-1 functional is not an evaluation: x^{exps:?} gives {got:.6e} vs {val:.6e}"
            )));
        }
    }
    let scale = l.mass();
    Ok(RecoveredPoint { point, scale })
}

/// Outcome of sampling subsystems of a kernel subspace and counting
/// how many intersection points stay real.
#[derive(Clone, Debug)]
pub struct ScanReport {
    pub trials: usize,
    /// Keyed by number of real points in the configuration.
    pub real_count_histogram: BTreeMap<usize, usize>,
    pub degenerate_draws: usize,
    pub fully_real_found: bool,
    pub first_fully_real_trial: Option<usize>,
    /// Subsystem forms of the first fully real draw.
    pub witness: Option<Vec<HomogeneousForm>>,
    pub max_pair_count: usize,
}

/// Samples `trials` random (n-1)-subsystems of W, intersects each, and
/// tabulates the real-point counts.  No assertion is made on the
/// outcome; degenerate draws are skipped and counted.
pub fn conjecture_scan(w: &[HomogeneousForm], trials: usize, seed: u64) -> Result<ScanReport> {
    let case = case_of_half_forms(w)?;
    let n = case.vars();
    if w.len() != n {
        return Err(Error::KernelDimension {
            dim: w.len(),
            expected: n,
        });
    }
    let ortho = orthonormalize_forms(w)?;
    let s = case.intersection_size();

    let outcomes = par::map_indexed(trials, |trial| -> Option<(usize, Vec<HomogeneousForm>)> {
        let (subsystem, _) = sample_subsystem(&ortho, seed, 0x5343 + trial as u64).ok()?;
        let config = complete_intersection(
            case,
            &subsystem,
            seed.wrapping_add(0x2000 + trial as u64),
        )
        .ok()?;
        Some((config.real_count(), subsystem))
    });

    let mut report = ScanReport {
        trials,
        real_count_histogram: BTreeMap::new(),
        degenerate_draws: 0,
        fully_real_found: false,
        first_fully_real_trial: None,
        witness: None,
        max_pair_count: 0,
    };
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            None => report.degenerate_draws += 1,
            Some((real_count, subsystem)) => {
                *report.real_count_histogram.entry(real_count).or_insert(0) += 1;
                let pairs = (s - real_count) / 2;
                report.max_pair_count = report.max_pair_count.max(pairs);
                if real_count == s && !report.fully_real_found {
                    report.fully_real_found = true;
                    report.first_fully_real_trial = Some(trial);
                    report.witness = Some(subsystem);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varieties::samples::{
        cube_config, grid_config, one_pair_config, random_fully_real_config, random_half_form,
        random_one_pair_config,
    };
    use crate::varieties::{normalize_complex_pair, rescale_unit_modulus};

    fn evaluation_functional(case: Case, coords: &[f64], lambda: f64) -> DualFunctional {
        let p = ComplexPoint::from_real(coords).unwrap();
        let values = monomial_basis(case.vars(), case.full_degree())
            .iter()
            .map(|e| {
                lambda
                    * HomogeneousForm::monomial(case.vars(), e)
                        .unwrap()
                        .evaluate(&p)
                        .unwrap()
                        .re
            })
            .collect();
        DualFunctional::new(case, values).unwrap()
    }

    fn rank_of(l: &DualFunctional) -> usize {
        let spec = moment_matrix(l).spectrum().unwrap();
        let threshold = RANK_RTOL * spec.max_abs_eigenvalue();
        spec.eigenvalues.iter().filter(|v| v.abs() > threshold).count()
    }

    #[test]
    fn cube_forced_weight_is_exactly_minus_one_seventh() {
        let config = cube_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let cert = build_extremal_real(&config, &rel, &[1.0; 7], 0).unwrap();
        match cert.variant() {
            ExtremalVariant::RealWeights { a, k } => {
                assert_eq!(*k, 0);
                assert!((a[0] + 1.0 / 7.0).abs() <= 1e-12, "a_k = {}", a[0]);
            }
            _ => panic!("expected real weights"),
        }
        assert_eq!(cert.rank(), 6);
        assert_eq!(cert.kernel().len(), 4);
        assert!(cert.min_eigenvalue() >= -1e-8);
        assert!(cert.min_eigenvalue() <= 1e-6);
        assert!(cert.kernel_sphere_min() >= KERNEL_COMMON_ZERO_MIN);
        // Mass normalization is exact.
        let r = sum_of_squares_power(4, 2);
        assert!((cert.functional().apply(&r).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn grid_center_forced_weight_is_exactly_minus_four_fifths() {
        let config = grid_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let u = rel.real_coefficients();
        let mut k = 0;
        for i in 1..u.len() {
            if u[i].abs() > u[k].abs() {
                k = i;
            }
        }
        let cert = build_extremal_real(&config, &rel, &[1.0; 8], k).unwrap();
        match cert.variant() {
            ExtremalVariant::RealWeights { a, k: kk } => {
                assert_eq!(*kk, k);
                assert!((a[k] + 0.8).abs() <= 1e-12, "a_k = {}", a[k]);
            }
            _ => panic!("expected real weights"),
        }
        assert_eq!(cert.rank(), 7);
        assert_eq!(cert.kernel().len(), 3);
        assert!(cert.kernel_sphere_min() >= KERNEL_COMMON_ZERO_MIN);
    }

    #[test]
    fn unit_relation_forces_uniform_weight() {
        // After unit-modulus rescaling every u_i^2 = 1, so unit free
        // weights force a_k = -1/(s-1) regardless of k.
        let config = grid_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let (rescaled, signs) = rescale_unit_modulus(&config, &rel).unwrap();
        for k in [0usize, 4, 8] {
            let cert = build_extremal_real(&rescaled, &signs, &[1.0; 8], k).unwrap();
            match cert.variant() {
                ExtremalVariant::RealWeights { a, .. } => {
                    assert!((a[k] + 1.0 / 8.0).abs() <= 1e-12);
                }
                _ => panic!("expected real weights"),
            }
            assert_eq!(cert.rank(), 7);
        }
    }

    #[test]
    fn free_weights_must_be_positive() {
        let config = cube_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let mut a = vec![1.0; 7];
        a[3] = 0.0;
        match build_extremal_real(&config, &rel, &a, 0) {
            Err(Error::NonPositiveWeight { index: 3, .. }) => {}
            other => panic!("expected NonPositiveWeight, got {other:?}"),
        }
    }

    #[test]
    fn random_real_configurations_certify_at_rank_dim_minus_n() {
        for (case, seed) in [
            (Case::TernarySextic, 21u64),
            (Case::TernarySextic, 22),
            (Case::QuaternaryQuartic, 23),
            (Case::QuaternaryQuartic, 24),
        ] {
            let config = random_fully_real_config(case, seed).unwrap();
            let rel = cb_relation(&config).unwrap();
            let s = config.len();
            // Varied positive free weights.
            let a: Vec<f64> = (0..s - 1).map(|i| 0.5 + 0.25 * i as f64).collect();
            let cert = build_extremal_real(&config, &rel, &a, s / 2).unwrap();
            assert_eq!(cert.rank(), case.dim_half() - case.vars());
            assert_eq!(cert.kernel().len(), case.vars());
            assert!(cert.kernel_direction_residual() <= 1e-7);
            assert!(cert.kernel_sphere_min() > 0.0);
        }
    }

    #[test]
    fn pair_weight_follows_the_tilt_formula() {
        let config = one_pair_config(Case::TernarySextic, 0.5, 7).unwrap();
        let rel0 = cb_relation(&config).unwrap();
        let (config, rel) = normalize_complex_pair(&config, &rel0).unwrap();
        let u = rel.real_coefficients();
        let rc = config.real_count();
        let big_s: f64 = u[..rc].iter().map(|v| v * v).sum();

        let cert = build_extremal_complex(&config, &rel, &vec![1.0; rc], 0.0).unwrap();
        match cert.variant() {
            ExtremalVariant::ComplexPair { m, t, .. } => {
                assert_eq!(*t, 0.0);
                assert!((m + 2.0 / big_s).abs() <= 1e-12, "m = {m}");
            }
            _ => panic!("expected complex pair"),
        }

        let at_bound = build_extremal_complex(&config, &rel, &vec![1.0; rc], 1.0 / big_s).unwrap();
        match at_bound.variant() {
            ExtremalVariant::ComplexPair { m, .. } => {
                assert!((m + 1.0 / big_s).abs() <= 1e-9, "m = {m}");
            }
            _ => panic!("expected complex pair"),
        }

        match build_extremal_complex(&config, &rel, &vec![1.0; rc], 1.01 / big_s) {
            Err(Error::InfeasibleTilt { .. }) => {}
            other => panic!("expected InfeasibleTilt, got {other:?}"),
        }

        let tilted = build_extremal_complex(&config, &rel, &vec![1.0; rc], -0.4 / big_s).unwrap();
        match tilted.variant() {
            ExtremalVariant::ComplexPair { m, t, .. } => {
                let expect = -1.0 / big_s - (1.0 / (big_s * big_s) - t * t).sqrt();
                assert!((m - expect).abs() <= 1e-12);
            }
            _ => panic!("expected complex pair"),
        }
    }

    #[test]
    fn one_pair_certificates_certify_in_both_cases() {
        for (case, tau, seed) in [
            (Case::TernarySextic, 0.45, 3u64),
            (Case::QuaternaryQuartic, 1.5, 11),
        ] {
            let config = one_pair_config(case, tau, seed).unwrap();
            let rel0 = cb_relation(&config).unwrap();
            let (config, rel) = normalize_complex_pair(&config, &rel0).unwrap();
            let rc = config.real_count();
            let cert = build_extremal_complex(&config, &rel, &vec![1.0; rc], 0.0).unwrap();
            assert_eq!(cert.rank(), case.dim_half() - case.vars());
            assert_eq!(cert.kernel().len(), case.vars());
        }
    }

    #[test]
    fn random_one_pair_instances_certify() {
        for (case, seed) in [(Case::TernarySextic, 31u64), (Case::QuaternaryQuartic, 32)] {
            let config = random_one_pair_config(case, seed).unwrap();
            let rel0 = cb_relation(&config).unwrap();
            let (config, rel) = normalize_complex_pair(&config, &rel0).unwrap();
            let rc = config.real_count();
            let cert = build_extremal_complex(&config, &rel, &vec![1.0; rc], 0.0).unwrap();
            assert_eq!(cert.rank(), case.dim_half() - case.vars());
            assert!(cert.min_eigenvalue() >= -1e-8);
        }
    }

    #[test]
    fn moment_matrix_agrees_with_squares() {
        let config = cube_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let cert = build_extremal_real(&config, &rel, &[1.0; 7], 0).unwrap();
        let mm = cert.functional().moment_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let f = random_half_form(Case::QuaternaryQuartic, &mut rng);
            let q = mm.quad(&f).unwrap();
            let direct = cert.functional().apply(&f.multiply(&f).unwrap()).unwrap();
            let scale = q.abs().max(direct.abs()).max(1e-12);
            assert!((q - direct).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn functional_values_match_pointwise_sums() {
        let config = one_pair_config(Case::TernarySextic, 0.5, 7).unwrap();
        let s = config.len();
        let rc = config.real_count();
        let mut weights: Vec<Complex64> = (0..rc)
            .map(|i| Complex64::new(0.3 + 0.1 * i as f64, 0.0))
            .collect();
        weights.push(Complex64::new(-0.7, 0.4));
        weights.push(Complex64::new(-0.7, -0.4));
        assert_eq!(weights.len(), s);
        let l = MomentFunctional::new(config.clone(), weights.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let f = {
                let g = random_half_form(Case::TernarySextic, &mut rng);
                let h = random_half_form(Case::TernarySextic, &mut rng);
                g.multiply(&h).unwrap()
            };
            let mut acc = Complex64::new(0.0, 0.0);
            let mut scale = 0.0;
            for (w, z) in weights.iter().zip(config.points()) {
                let v = f.evaluate(z).unwrap();
                scale += w.norm() * v.norm();
                acc += w * v;
            }
            let got = l.apply(&f).unwrap();
            assert!((got - acc.re).abs() <= 1e-9 * scale.max(1e-12));
        }
    }

    #[test]
    fn functional_rejects_asymmetric_weights() {
        let config = one_pair_config(Case::TernarySextic, 0.5, 7).unwrap();
        let rc = config.real_count();
        let mut weights = vec![Complex64::new(1.0, 0.0); rc];
        weights.push(Complex64::new(0.5, 0.3));
        weights.push(Complex64::new(0.5, 0.3));
        match MomentFunctional::new(config, weights) {
            Err(Error::Invalid(_)) => {}
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn point_evaluation_has_rank_one_and_full_vanishing_kernel() {
        let l = evaluation_functional(Case::TernarySextic, &[1.0, 2.0, 3.0], 1.0);
        assert_eq!(rank_of(&l), 1);
        let kernel = kernel_of(&l).unwrap();
        assert_eq!(kernel.len(), Case::TernarySextic.dim_half() - 1);
        let p = ComplexPoint::from_real(&[1.0, 2.0, 3.0]).unwrap();
        for w in &kernel {
            assert!(w.evaluate(&p).unwrap().norm() <= 1e-8 * p.norm().powi(3));
        }
    }

    #[test]
    fn cube_vertex_evaluation_sum_has_rank_seven() {
        // The three defining quadrics vanish at all 8 vertices, so the
        // evaluation vectors span a 7-dimensional space, matching the
        // unique linear relation among the vertex evaluations.
        let case = Case::QuaternaryQuartic;
        let config = cube_config().unwrap();
        let mut values = vec![0.0; case.dim_full()];
        for (idx, exps) in monomial_basis(4, 4).iter().enumerate() {
            let mono = HomogeneousForm::monomial(4, exps).unwrap();
            for z in config.points() {
                values[idx] += mono.evaluate(z).unwrap().re;
            }
        }
        let l = DualFunctional::new(case, values).unwrap();
        assert_eq!(rank_of(&l), 7);
        // Cross-check against the evaluation matrix of the support.
        let eval = config.evaluation_matrix(2);
        let gram = eval.gram();
        let spec = sym_eig(&gram).unwrap();
        let lam_max = spec.max_abs_eigenvalue();
        let rank = spec
            .eigenvalues
            .iter()
            .filter(|v| v.abs() > RANK_RTOL * lam_max)
            .count();
        assert_eq!(rank, 7);
    }

    #[test]
    fn zero_functional_gives_zero_matrix() {
        let case = Case::TernarySextic;
        let l = DualFunctional::new(case, vec![0.0; case.dim_full()]).unwrap();
        let mm = moment_matrix(&l);
        assert_eq!(mm.matrix().frob_norm(), 0.0);
    }

    #[test]
    fn recover_round_trips_raw_representatives() {
        let l = evaluation_functional(Case::TernarySextic, &[1.0, 2.0, 3.0], 1.0);
        let got = recover_point_evaluation(&l).unwrap();
        let coords = got.point.real_coords();
        for (g, e) in coords.iter().zip(&[1.0, 2.0, 3.0]) {
            assert!((g - e).abs() <= 1e-9, "{coords:?}");
        }

        // Dominant-coordinate reordering: x_1 plays no role at (2,0,0,1).
        let l = evaluation_functional(Case::QuaternaryQuartic, &[2.0, 0.0, 0.0, 1.0], 1.0);
        let got = recover_point_evaluation(&l).unwrap();
        let coords = got.point.real_coords();
        for (g, e) in coords.iter().zip(&[2.0, 0.0, 0.0, 1.0]) {
            assert!((g - e).abs() <= 1e-9, "{coords:?}");
        }
    }

    #[test]
    fn recover_reports_the_scale_of_a_unit_evaluation() {
        // lambda * evaluation at a unit vector is the evaluation at
        // lambda^(1/2d) v, and the mass reports lambda itself.
        let unit = [0.6, 0.0, 0.8];
        let lambda = 0.3;
        let l = evaluation_functional(Case::TernarySextic, &unit, lambda);
        let got = recover_point_evaluation(&l).unwrap();
        assert!((got.scale - lambda).abs() <= 1e-12);
        let coords = got.point.real_coords();
        let norm = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expect = lambda.powf(1.0 / 6.0);
        assert!((norm - expect).abs() <= 1e-9);
        for (g, e) in coords.iter().zip(&unit) {
            assert!((g / norm - e).abs() <= 1e-9);
        }
    }

    #[test]
    fn recover_rejects_higher_rank() {
        let config = cube_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let cert = build_extremal_real(&config, &rel, &[1.0; 7], 0).unwrap();
        match recover_point_evaluation(cert.functional().dual()) {
            Err(Error::RankMismatch { rank: 6, expected: 1 }) => {}
            other => panic!("expected RankMismatch, got {other:?}"),
        }
    }

    #[test]
    fn functional_from_kernel_round_trips_both_fixtures() {
        for (config, rel, free, k) in [
            (grid_config().unwrap(), (), 8usize, 4usize),
            (cube_config().unwrap(), (), 7, 0),
        ] {
            let _ = rel;
            let relation = cb_relation(&config).unwrap();
            let cert = build_extremal_real(&config, &relation, &vec![1.0; free], k).unwrap();
            let recovered = functional_from_kernel(cert.kernel(), 5).unwrap();
            let cosine = recovered
                .dual()
                .cosine(cert.functional().dual())
                .unwrap();
            assert!(cosine >= 1.0 - 1e-7, "cosine = {cosine}");
        }
    }

    #[test]
    fn functional_from_kernel_is_independent_of_the_draw() {
        let config = cube_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let cert = build_extremal_real(&config, &rel, &[1.0; 7], 0).unwrap();
        let a = functional_from_kernel(cert.kernel(), 41).unwrap();
        let b = functional_from_kernel(cert.kernel(), 42).unwrap();
        let cosine = a.dual().cosine(b.dual()).unwrap();
        assert!(cosine >= 1.0 - 1e-7, "cosine = {cosine}");
        // Both are mass-normalized, so the values agree directly.
        let scale = a.dual().norm();
        for (x, y) in a.dual().values().iter().zip(b.dual().values()) {
            assert!((x - y).abs() <= 1e-7 * scale);
        }
    }

    #[test]
    fn exchange_real_kernel_functional_is_consistent() {
        let config = grid_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let cert = build_extremal_real(&config, &rel, &[1.0; 8], 4).unwrap();
        let kernel = kernel_of(cert.functional().dual()).unwrap();
        assert_eq!(kernel.len(), 3);
        let recovered = functional_from_kernel(&kernel, 9).unwrap();
        let cosine = recovered.dual().cosine(cert.functional().dual()).unwrap();
        assert!(cosine >= 1.0 - 1e-6, "cosine = {cosine}");
    }

    #[test]
    fn kernel_annihilator_is_one_dimensional() {
        // Kernel maximality: the space of functionals killing W * H is
        // spanned by the certificate functional alone.
        for (config, free, k) in [
            (grid_config().unwrap(), 8usize, 4usize),
            (cube_config().unwrap(), 7, 0),
        ] {
            let case = config.case();
            let rel = cb_relation(&config).unwrap();
            let cert = build_extremal_real(&config, &rel, &vec![1.0; free], k).unwrap();
            let half = monomial_basis(case.vars(), case.half_degree());
            let mut rows = Vec::new();
            for w in cert.kernel() {
                for exps in &half {
                    let q = HomogeneousForm::monomial(case.vars(), exps).unwrap();
                    rows.push(w.multiply(&q).unwrap().to_dense());
                }
            }
            let a = Mat::from_rows(&rows);
            let null = nullspace(&a, 1e-8);
            assert_eq!(null.len(), 1);
            let values = cert.functional().dual().values();
            let dot: f64 = null[0].iter().zip(values).map(|(x, y)| x * y).sum();
            let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(dot.abs() / norm >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn two_pair_support_admits_no_psd_functional() {
        // x^3 - x z^2 and y^3 + y z^2 meet in 3 real points and 3
        // conjugate pairs; with at least 2 pairs a conjugate-symmetric
        // annihilating functional cannot be PSD, whatever the basis
        // completion.
        let f1 = HomogeneousForm::from_terms(3, 3, &[(&[3, 0, 0], 1.0), (&[1, 0, 2], -1.0)])
            .unwrap();
        let f2 = HomogeneousForm::from_terms(3, 3, &[(&[0, 3, 0], 1.0), (&[0, 1, 2], 1.0)])
            .unwrap();
        let config =
            complete_intersection(Case::TernarySextic, &[f1.clone(), f2.clone()], 2).unwrap();
        assert_eq!(config.real_count(), 3);
        assert_eq!(config.pair_count(), 3);
        let rel = cb_relation(&config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        while checked < 5 {
            let f_n = random_half_form(Case::TernarySextic, &mut rng);
            let raw = match annihilating_functional(&config, &rel, &f_n) {
                Ok(l) => l,
                Err(_) => continue,
            };
            let spec = raw.moment_matrix().spectrum().unwrap();
            let lam_max = spec.max_abs_eigenvalue();
            assert!(
                spec.eigenvalues[0] < -1e-6 * lam_max,
                "functional unexpectedly PSD: min eig {}",
                spec.eigenvalues[0]
            );
            checked += 1;
        }
    }

    #[test]
    fn scan_tabulates_real_counts() {
        let config = grid_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let cert = build_extremal_real(&config, &rel, &[1.0; 8], 4).unwrap();

        let empty = conjecture_scan(cert.kernel(), 0, 1).unwrap();
        assert_eq!(empty.trials, 0);
        assert!(empty.real_count_histogram.is_empty());
        assert!(!empty.fully_real_found);

        let report = conjecture_scan(cert.kernel(), 30, 1).unwrap();
        let counted: usize = report.real_count_histogram.values().sum();
        assert_eq!(counted + report.degenerate_draws, 30);
        // The Corollary bound: one relation allows at most one pair.
        assert!(report.max_pair_count <= 1, "{:?}", report.real_count_histogram);
        assert!(report.fully_real_found);
        assert!(report.witness.as_ref().is_some_and(|w| w.len() == 2));
    }

    #[test]
    fn dual_functional_json_round_trips_exactly() {
        let l = evaluation_functional(Case::TernarySextic, &[0.3, -1.7, 0.9], 1.0);
        let json = serde_json::to_string(&l).unwrap();
        let back: DualFunctional = serde_json::from_str(&json).unwrap();
        assert_eq!(l, back);
        // Missing entries are rejected.
        let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        let map = doc["values"].as_object_mut().unwrap();
        let key = map.keys().next().unwrap().clone();
        map.remove(&key);
        assert!(serde_json::from_value::<DualFunctional>(doc).is_err());
    }
}
