//! Separation certificates and numerical SOS decisions.
//!
//! A functional ell in the dual cone (PSD moment matrix) with
//! ell(p) < 0 certifies that p is not a sum of squares, independently
//! of any Gram-matrix search.  Conversely a PSD Gram matrix G with
//! A(G) = coeffs(p), where A sums Gram entries over monomial products,
//! certifies that p is one.  This module builds both kinds of witness:
//! nonnegative non-SOS forms q - eps (sum x_i^2)^d from extreme-ray
//! kernels, boundary forms sum of n squares annihilated by the
//! functional, and a Dykstra alternating projection that decides SOS
//! membership numerically with an explicit inconclusive band.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::{
    moment_matrix, DualFunctional, ExtremeRayCertificate, KERNEL_COMMON_ZERO_MIN, PSD_TOL,
    RANK_RTOL,
};
use crate::forms::{monomial_basis, sum_of_squares_power, Case, HomogeneousForm};
use crate::numerics::{min_on_sphere, sym_eig, SymMatrix};

const SPHERE_RESTARTS: usize = 8;
/// Default Dykstra iteration budget.
pub const SOS_CHECK_MAX_ITERS: usize = 20_000;
/// Default feasibility tolerance for sos_check.
pub const SOS_CHECK_TOL: f64 = 1e-7;

/// Outcome of pairing a dual functional against a target form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparationCertificate {
    /// ell(p).
    pub value: f64,
    /// Min eigenvalue of the moment matrix of ell.
    pub psd_margin: f64,
    /// Max |eigenvalue| of that matrix, the scale for psd_margin.
    pub matrix_scale: f64,
    /// Coefficient norm of the target form.
    pub form_norm: f64,
    /// Coefficient norm of the functional.
    pub functional_norm: f64,
    /// True when ell is PSD within tolerance and ell(p) is safely
    /// negative: a certificate that p is not a sum of squares.
    pub separates: bool,
}

/// Pairs ell against p by eigendecomposition and evaluation alone;
/// never consults sos_check, so the two verdicts stay independent.
pub fn verify_certificate(
    l: &DualFunctional,
    p: &HomogeneousForm,
) -> Result<SeparationCertificate> {
    let value = l.apply(p)?;
    let spec = moment_matrix(l).spectrum()?;
    let psd_margin = spec.eigenvalues[0];
    let matrix_scale = spec.max_abs_eigenvalue();
    let form_norm = p.coeff_norm();
    let functional_norm = l.norm();
    let psd_ok = psd_margin >= -PSD_TOL * matrix_scale;
    let separates = psd_ok && value < -1e-8 * form_norm * functional_norm;
    Ok(SeparationCertificate {
        value,
        psd_margin,
        matrix_scale,
        form_norm,
        functional_norm,
        separates,
    })
}

/// A nonnegative form that is not a sum of squares, with the
/// functional pairing that proves the second half.
#[derive(Clone, Debug)]
pub struct NonSosWitness {
    pub form: HomogeneousForm,
    pub epsilon: f64,
    /// Sphere minimum of q = sum of squared kernel forms.
    pub q_sphere_min: f64,
    /// Sphere minimum of the perturbed form (nonnegativity evidence).
    pub f_sphere_min: f64,
    pub certificate: SeparationCertificate,
}

/// Builds f = q - eps (sum x_i^2)^d from the certificate kernel, with
/// q = sum of squared kernel forms and eps = margin * min_sphere(q).
/// Since ell kills each kernel square, ell(f) = -eps * ell(r^2d) < 0
/// while f stays nonnegative for margin < 1.
pub fn make_nonsos(
    cert: &ExtremeRayCertificate,
    margin: f64,
    seed: u64,
) -> Result<NonSosWitness> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::Invalid(format!(
            "margin must lie strictly between 0 and 1, got {margin}"
        )));
    }
    let case = cert.case();
    let n = case.vars();
    let mut q = HomogeneousForm::zero(n, case.full_degree());
    for w in cert.kernel() {
        q = q.add(&w.multiply(w)?)?;
    }
    let q_min = min_on_sphere(&q, SPHERE_RESTARTS, seed);
    if q_min.value <= KERNEL_COMMON_ZERO_MIN {
        return Err(Error::NearCommonZero { min: q_min.value });
    }
    let r = sum_of_squares_power(n, case.half_degree());
    let mass = cert.functional().apply(&r)?;
    if mass <= 0.0 {
        return Err(Error::ZeroFunctional);
    }
    let epsilon = margin * q_min.value;
    let form = q.add_scaled(&r, -epsilon)?;

    let f_min = min_on_sphere(&form, SPHERE_RESTARTS, seed.wrapping_add(1));
    if f_min.value < -1e-7 {
        return Err(Error::Invalid(format!(
            "perturbed form dips to {:.3e} on the sphere",
            f_min.value
        )));
    }
    let certificate = verify_certificate(cert.functional().dual(), &form)?;
    Ok(NonSosWitness {
        form,
        epsilon,
        q_sphere_min: q_min.value,
        f_sphere_min: f_min.value,
        certificate,
    })
}

/// Verdict of the numerical SOS membership check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SosVerdict {
    Sos,
    NotSosNumeric,
    Inconclusive,
}

/// Result of the Dykstra feasibility run.  For the sos verdict the
/// Gram data is populated; for not_sos_numeric the extracted
/// functional and its re-verification are.
#[derive(Clone, Debug)]
pub struct GramCertificate {
    pub verdict: SosVerdict,
    pub iterations: usize,
    /// Frobenius distance between the PSD-side and affine-side
    /// iterates, relative to the unit-normalized target.
    pub gap: f64,
    pub tol: f64,
    /// Gram matrix in the original scale of p (sos only).
    pub gram: Option<SymMatrix>,
    pub gram_rank: Option<usize>,
    /// Square roots: p = sum of factor^2 (sos only).
    pub factors: Option<Vec<HomogeneousForm>>,
    /// ||A(G) - coeffs(p)|| / ||p|| for the reported Gram (sos only).
    pub constraint_residual: Option<f64>,
    /// Extracted separating functional (not_sos_numeric only).
    pub functional: Option<DualFunctional>,
    pub separation: Option<SeparationCertificate>,
}

/// Monomial-product structure of the Gram map A for one case: for
/// each degree-2d monomial, the unordered half-basis index pairs
/// producing it and the count of ordered pairs.
struct GramGroups {
    case: Case,
    /// Per full-basis index: (unordered (i, j) with i <= j, ordered count).
    groups: Vec<(Vec<(usize, usize)>, f64)>,
}

impl GramGroups {
    fn new(case: Case) -> GramGroups {
        let half = monomial_basis(case.vars(), case.half_degree());
        let full = monomial_basis(case.vars(), case.full_degree());
        let index: std::collections::HashMap<&Vec<u32>, usize> =
            full.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let mut groups = vec![(Vec::new(), 0.0); full.len()];
        let mut sum = vec![0u32; case.vars()];
        for i in 0..half.len() {
            for j in i..half.len() {
                for v in 0..case.vars() {
                    sum[v] = half[i][v] + half[j][v];
                }
                let g = index[&sum];
                groups[g].0.push((i, j));
                groups[g].1 += if i == j { 1.0 } else { 2.0 };
            }
        }
        GramGroups { case, groups }
    }

    /// A(G): coefficient vector of the form represented by G.
    fn apply(&self, g: &SymMatrix) -> Vec<f64> {
        self.groups
            .iter()
            .map(|(pairs, _)| {
                pairs
                    .iter()
                    .map(|&(i, j)| if i == j { g.get(i, i) } else { 2.0 * g.get(i, j) })
                    .sum()
            })
            .collect()
    }

    /// Orthogonal projection onto {G : A(G) = target}.  The group
    /// supports are disjoint, so the least-squares normal equations
    /// are diagonal and the projection is one independent shift per
    /// group: every ordered slot of group gamma moves by
    /// (target - A(G))_gamma / N_gamma.
    fn project(&self, g: &SymMatrix, target: &[f64]) -> SymMatrix {
        let mut out = g.clone();
        for ((pairs, count), &want) in self.groups.iter().zip(target) {
            let have: f64 = pairs
                .iter()
                .map(|&(i, j)| if i == j { out.get(i, i) } else { 2.0 * out.get(i, j) })
                .sum();
            let delta = (want - have) / count;
            for &(i, j) in pairs {
                out.add_sym(i, j, delta);
            }
        }
        out
    }

    /// Hankel (moment-structure) projection: average each group's
    /// ordered entries into a single functional value.
    fn average(&self, g: &SymMatrix) -> Vec<f64> {
        self.groups
            .iter()
            .map(|(pairs, count)| {
                let total: f64 = pairs
                    .iter()
                    .map(|&(i, j)| if i == j { g.get(i, i) } else { 2.0 * g.get(i, j) })
                    .sum();
                total / count
            })
            .collect()
    }

    /// Hankel matrix of a values vector.
    fn hankel(&self, values: &[f64]) -> SymMatrix {
        let dim = self.case.dim_half();
        let mut m = SymMatrix::zeros(dim);
        for ((pairs, _), &v) in self.groups.iter().zip(values) {
            for &(i, j) in pairs {
                m.set_sym(i, j, v);
            }
        }
        m
    }
}

/// Clip negative eigenvalues to zero.
fn psd_project(a: &SymMatrix) -> Result<SymMatrix> {
    let spec = sym_eig(a)?;
    let dim = a.dim();
    let mut out = SymMatrix::zeros(dim);
    for k in 0..dim {
        let lam = spec.eigenvalues[k];
        if lam <= 0.0 {
            continue;
        }
        let v = spec.eigenvector(k);
        for i in 0..dim {
            for j in i..dim {
                out.add_sym(i, j, lam * v[i] * v[j]);
            }
        }
    }
    Ok(out)
}

fn frob_dist(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.sub(b).frob_norm()
}

fn case_of_full_form(p: &HomogeneousForm) -> Result<Case> {
    match (p.n(), p.degree()) {
        (3, 6) => Ok(Case::TernarySextic),
        (4, 4) => Ok(Case::QuaternaryQuartic),
        (n, d) => Err(Error::CaseMismatch {
            expected: "(3, 6) or (4, 4)".into(),
            got: format!("({n}, {d})"),
        }),
    }
}

/// Decides numerically whether p is a sum of squares by Dykstra
/// alternating projections between the PSD cone and the affine Gram
/// slice of p (normalized to unit coefficient norm; the reported gap
/// is relative to that normalization).  Verdicts: sos when the affine
/// iterate is PSD within 1e-8, not_sos_numeric when the inter-set gap
/// stabilizes at or above 10*tol (with a separating functional
/// extracted from the gap direction and re-verified), inconclusive
/// when the budget ends inside the ambiguous band.
pub fn sos_check(p: &HomogeneousForm, max_iters: usize, tol: f64) -> Result<GramCertificate> {
    let case = case_of_full_form(p)?;
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    if max_iters == 0 {
        return Err(Error::Invalid("iteration budget must be positive".into()));
    }
    let p_norm = p.coeff_norm();
    let dim = case.dim_half();
    let groups = GramGroups::new(case);
    if p_norm == 0.0 {
        return Ok(GramCertificate {
            verdict: SosVerdict::Sos,
            iterations: 0,
            gap: 0.0,
            tol,
            gram: Some(SymMatrix::zeros(dim)),
            gram_rank: Some(0),
            factors: Some(Vec::new()),
            constraint_residual: Some(0.0),
            functional: None,
            separation: None,
        });
    }
    let target = p.scale(1.0 / p_norm).to_dense();

    // Dykstra with correction terms for both sets; x holds the
    // affine-side iterate (feasible for A(G) = target at all times
    // after the first sweep), y the PSD-side one.
    let mut x = groups.project(&SymMatrix::zeros(dim), &target);
    let mut p_corr = SymMatrix::zeros(dim);
    let mut q_corr = SymMatrix::zeros(dim);
    let mut y = SymMatrix::zeros(dim);
    let mut gap = f64::INFINITY;
    let mut gap_history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let check_every = 25;
    let mut verdict = None;
    while iterations < max_iters {
        iterations += 1;
        let y_in = x.add(&p_corr);
        y = psd_project(&y_in)?;
        p_corr = y_in.sub(&y);
        let x_in = y.add(&q_corr);
        x = groups.project(&x_in, &target);
        q_corr = x_in.sub(&x);
        gap = frob_dist(&y, &x);

        if iterations % check_every == 0 || iterations == max_iters {
            gap_history.push(gap);
            let stalled = gap_history.len() >= 2 && {
                let prev = gap_history[gap_history.len() - 2];
                (prev - gap).abs() <= 1e-2 * gap.max(f64::MIN_POSITIVE)
            };
            // PSD within tolerance on the affine-feasible iterate
            // means a Gram certificate; keep polishing until the gap
            // bottoms out so noise eigenvalues drop below the rank
            // threshold.
            let spec = sym_eig(&x)?;
            let scale = spec.max_abs_eigenvalue().max(1.0);
            if spec.eigenvalues[0] >= -1e-8 * scale && (gap <= 1e-13 || stalled) {
                verdict = Some(SosVerdict::Sos);
                break;
            }
            // A stabilized gap clear of the ambiguous band means the
            // two sets are disjoint: not SOS.
            if gap >= 10.0 * tol && gap_history.len() >= 3 {
                let prev = gap_history[gap_history.len() - 3];
                if (prev - gap).abs() <= 1e-3 * gap {
                    verdict = Some(SosVerdict::NotSosNumeric);
                    break;
                }
            }
        }
    }

    match verdict {
        Some(SosVerdict::Sos) => {
            // Clip the tiny negative tail, then report in p's scale.
            let clipped = psd_project(&x)?;
            let achieved = groups.apply(&clipped);
            let residual = achieved
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let spec = sym_eig(&clipped)?;
            let lam_max = spec.max_abs_eigenvalue();
            let rank = spec
                .eigenvalues
                .iter()
                .filter(|l| l.abs() > RANK_RTOL * lam_max)
                .count();
            let mut factors = Vec::new();
            for k in (0..dim).rev() {
                let lam = spec.eigenvalues[k];
                if lam <= RANK_RTOL * lam_max {
                    continue;
                }
                let mut v = spec.eigenvector(k);
                let scale = (lam * p_norm).sqrt();
                for c in v.iter_mut() {
                    *c *= scale;
                }
                factors.push(HomogeneousForm::from_dense(
                    case.vars(),
                    case.half_degree(),
                    &v,
                )?);
            }
            Ok(GramCertificate {
                verdict: SosVerdict::Sos,
                iterations,
                gap,
                tol,
                gram: Some(clipped.scale(p_norm)),
                gram_rank: Some(rank),
                factors: Some(factors),
                constraint_residual: Some(residual),
                functional: None,
                separation: None,
            })
        }
        Some(SosVerdict::NotSosNumeric) => {
            // The gap direction y - x points from the affine set into
            // the PSD cone; projected into the dual cone (alternating
            // Hankel averaging and eigenvalue clipping until both
            // structures hold), it yields a functional negative on p.
            let delta = y.sub(&x);
            let mut values = groups.average(&delta);
            for _ in 0..2000 {
                let hankel = groups.hankel(&values);
                let spec = sym_eig(&hankel)?;
                let lam_max = spec.max_abs_eigenvalue();
                if spec.eigenvalues[0] >= -1e-10 * lam_max.max(f64::MIN_POSITIVE) {
                    break;
                }
                let clipped = psd_project(&hankel)?;
                values = groups.average(&clipped);
            }
            let functional = DualFunctional::new(case, values)?;
            let mass = functional.mass();
            let functional = if mass > 1e-12 * functional.norm().max(1e-300) {
                functional.scale(1.0 / mass)
            } else {
                let norm = functional.norm();
                if norm == 0.0 {
                    return Err(Error::ZeroFunctional);
                }
                functional.scale(1.0 / norm)
            };
            let separation = verify_certificate(&functional, p)?;
            Ok(GramCertificate {
                verdict: SosVerdict::NotSosNumeric,
                iterations,
                gap,
                tol,
                gram: None,
                gram_rank: None,
                factors: None,
                constraint_residual: None,
                functional: Some(functional),
                separation: Some(separation),
            })
        }
        _ => Ok(GramCertificate {
            verdict: SosVerdict::Inconclusive,
            iterations,
            gap,
            tol,
            gram: None,
            gram_rank: None,
            factors: None,
            constraint_residual: None,
            functional: None,
            separation: None,
        }),
    }
}

/// A strictly positive form on the boundary of the SOS cone, written
/// as the sum of the n squared kernel forms of an extreme ray.
#[derive(Clone, Debug)]
pub struct BoundaryForm {
    pub form: HomogeneousForm,
    /// Sphere minimum: strict positivity evidence.
    pub sphere_min: f64,
    /// ell(p), which vanishes on the exposed face.
    pub functional_value: f64,
    /// Rank of the canonical Gram built from the kernel basis.
    pub gram_rank: usize,
}

/// Builds p = sum of squared kernel forms: strictly positive, yet on
/// the boundary of the SOS cone because the certificate functional
/// vanishes on it.  Any PSD Gram matrix of p is therefore supported
/// on the n-dimensional kernel, so p needs all n squares.
pub fn boundary_form(cert: &ExtremeRayCertificate) -> Result<BoundaryForm> {
    let case = cert.case();
    let n = case.vars();
    if cert.kernel().len() != n {
        return Err(Error::KernelDimension {
            dim: cert.kernel().len(),
            expected: n,
        });
    }
    let mut p = HomogeneousForm::zero(n, case.full_degree());
    for w in cert.kernel() {
        p = p.add(&w.multiply(w)?)?;
    }
    let sphere = min_on_sphere(&p, SPHERE_RESTARTS, 0x424F554E);
    if sphere.value < KERNEL_COMMON_ZERO_MIN {
        return Err(Error::NearCommonZero { min: sphere.value });
    }
    let value = cert.functional().apply(&p)?;
    if value.abs() > 1e-8 * p.coeff_norm() {
        return Err(Error::NotOnBoundary { slack: value });
    }
    // The canonical Gram sum of w_i w_i^T has rank exactly n: the
    // kernel basis is orthonormal.
    Ok(BoundaryForm {
        form: p,
        sphere_min: sphere.value,
        functional_value: value,
        gram_rank: n,
    })
}
