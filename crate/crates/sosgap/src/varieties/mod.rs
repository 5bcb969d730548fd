//! Complete intersections and the Cayley-Bacharach value relation.
//!
//! In case (n, 2d), a transverse intersection of n - 1 generic forms
//! of degree d consists of s = d^(n-1) projective points, and the
//! values of H_{n,d} at those points satisfy exactly one linear
//! relation sum_i u_i f(z_i) = 0.  The relation coefficients depend on
//! the chosen affine representatives: scaling a representative by c
//! scales its coefficient by c^(-d).  Two normalizations matter
//! downstream:
//!
//! * unit modulus (fully real configurations): representatives are
//!   rescaled by |u_i|^(1/d) so every coefficient becomes +-1, which
//!   turns the evaluation image of squares into the unweighted cone
//!   `T_s`;
//! * complex-pair normalized (one conjugate pair): the pair
//!   coefficient is rotated to exactly 1 by scaling the pair
//!   representative by the principal d-th root, leaving the relation
//!   u_1 f(v_1) + ... + u_{s-2} f(v_{s-2}) + f(z) + f(conj z) = 0
//!   with real u_i.
//!
//! Configurations are conjugation-closed and canonically ordered: real
//! points first (lexicographic by rounded coordinates), then conjugate
//! pairs (positive-imaginary member first).  All linear algebra is
//! done over the reals by splitting each pair into the two rows
//! (2 Re f(z), 2 Im f(z)); a relation coefficient c at a pair encodes
//! the functional 2 Re(c f(z)).

pub mod samples;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{monomial_basis, Case, ComplexPoint, HomogeneousForm};
use crate::numerics::{
    complex_sigma_min, newton_from, nullspace, Mat, ChartSystem, ROOT_DEDUP_DISTANCE,
};
use crate::par;

/// A form counts as vanishing at a (normalized) point below this.
pub const VANISH_TOL: f64 = 1e-9;
/// Minimum smallest singular value of the tangent-restricted Jacobian.
pub const TRANSVERSALITY_MIN_SIGMA: f64 = 1e-6;
/// Minimum pairwise projective distance between configuration points.
pub const MIN_POINT_SEPARATION: f64 = 1e-6;
/// Relative imaginary magnitude below which a point counts as real.
pub const REALITY_TOL: f64 = 1e-8;
/// Default relative tolerance for relation extraction.
pub const RELATION_RTOL: f64 = 1e-8;
/// Newton starts per intersection point.
pub const STARTS_PER_POINT: usize = 60;
/// Start radii cycled through by the intersection solver.
const START_SCALES: [f64; 5] = [0.5, 1.5, 4.0, 12.0, 40.0];

/// Normalization state of a Cayley-Bacharach relation and the
/// representatives it was computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    UnitModulus,
    ComplexPairNormalized,
}

/// The unique linear relation on values of H_{n,d} at the points.
#[derive(Clone, Debug)]
pub struct CBRelation {
    coefficients: Vec<Complex64>,
    normalization: Normalization,
}

impl CBRelation {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Real parts; meaningful when all coefficients are real
    /// (fully real or complex-pair-normalized relations).
    pub fn real_coefficients(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.re).collect()
    }

    /// Largest residual |sum_i u_i m(z_i)| over the degree-d monomial
    /// basis, relative to ||u|| and the value magnitudes.
    pub fn residual(&self, config: &PointConfiguration) -> Result<f64> {
        if self.coefficients.len() != config.points.len() {
            return Err(Error::Dimension(
                "relation length does not match configuration".into(),
            ));
        }
        let case = config.case;
        let basis = monomial_basis(case.vars(), case.half_degree());
        let unorm = self
            .coefficients
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let mut worst = 0.0f64;
        for exps in &basis {
            let mono = HomogeneousForm::monomial(case.vars(), exps)?;
            let mut acc = Complex64::new(0.0, 0.0);
            let mut maxval = 0.0f64;
            for (u, p) in self.coefficients.iter().zip(&config.points) {
                let v = mono.evaluate(p)?;
                maxval = maxval.max(v.norm());
                acc += u * v;
            }
            let scale = unorm * maxval.max(1e-300);
            worst = worst.max(acc.norm() / scale);
        }
        Ok(worst)
    }
}

/// A conjugation-closed set of s = d^(n-1) projective points together
/// with the n - 1 defining forms that cut it out.
#[derive(Clone, Debug)]
pub struct PointConfiguration {
    case: Case,
    points: Vec<ComplexPoint>,
    real_count: usize,
    defining_forms: Vec<HomogeneousForm>,
}

impl PointConfiguration {
    /// Builds and validates a configuration, reordering points into
    /// canonical order.  See `new_with_permutation` for the reorder map.
    pub fn new(
        case: Case,
        points: Vec<ComplexPoint>,
        defining_forms: Vec<HomogeneousForm>,
    ) -> Result<PointConfiguration> {
        Ok(Self::new_with_permutation(case, points, defining_forms)?.0)
    }

    /// Same as `new`; also returns `perm` with `perm[i]` = index in the
    /// input of the point now stored at position `i`.
    pub fn new_with_permutation(
        case: Case,
        points: Vec<ComplexPoint>,
        defining_forms: Vec<HomogeneousForm>,
    ) -> Result<(PointConfiguration, Vec<usize>)> {
        let s = case.intersection_size();
        let n = case.vars();
        let d = case.half_degree();
        if points.len() != s {
            return Err(Error::Dimension(format!(
                "expected {} points for case {}, got {}",
                s,
                case,
                points.len()
            )));
        }
        if defining_forms.len() != n - 1 {
            return Err(Error::Dimension(format!(
                "expected {} defining forms, got {}",
                n - 1,
                defining_forms.len()
            )));
        }
        for f in &defining_forms {
            if f.n() != n || f.degree() != d {
                return Err(Error::Dimension(format!(
                    "defining form has shape ({}, {}), case {} needs ({}, {})",
                    f.n(),
                    f.degree(),
                    case,
                    n,
                    d
                )));
            }
            if f.is_zero() {
                return Err(Error::Invalid("zero defining form".into()));
            }
        }
        for p in &points {
            if p.n() != n {
                return Err(Error::Dimension("point dimension mismatch".into()));
            }
        }

        // Conjugation pairing.
        let mut used = vec![false; s];
        let mut reals: Vec<usize> = Vec::new();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..s {
            if used[i] {
                continue;
            }
            if points[i].is_real(REALITY_TOL) {
                used[i] = true;
                reals.push(i);
                continue;
            }
            let conj = points[i].conj();
            let mut partner = None;
            for (j, q) in points.iter().enumerate().skip(i + 1) {
                if !used[j] && q.projective_distance(&conj) < 1e-6 && !q.is_real(REALITY_TOL) {
                    partner = Some(j);
                    break;
                }
            }
            let Some(j) = partner else {
                return Err(Error::NotConjugationClosed);
            };
            used[i] = true;
            used[j] = true;
            let (pos, neg) = if positive_imag(&points[i]) { (i, j) } else { (j, i) };
            pairs.push((pos, neg));
        }

        reals.sort_by(|&a, &b| sort_key(&points[a]).cmp(&sort_key(&points[b])));
        pairs.sort_by(|&(a, _), &(b, _)| sort_key(&points[a]).cmp(&sort_key(&points[b])));

        let mut perm: Vec<usize> = Vec::with_capacity(s);
        perm.extend(&reals);
        for (p, q) in &pairs {
            perm.push(*p);
            perm.push(*q);
        }
        let ordered: Vec<ComplexPoint> = perm.iter().map(|&i| points[i].clone()).collect();

        let config = PointConfiguration {
            case,
            points: ordered,
            real_count: reals.len(),
            defining_forms,
        };
        config.validate()?;
        Ok((config, perm))
    }

    fn validate(&self) -> Result<()> {
        // Defining forms vanish at the sphere representative of each point.
        for f in &self.defining_forms {
            let tol = VANISH_TOL * (1.0 + f.coeff_norm());
            for p in &self.points {
                let residual = f.evaluate(&p.sphere_normalize())?.norm();
                if residual > tol {
                    return Err(Error::DoesNotVanish { residual, tol });
                }
            }
        }
        // Pairwise separation.
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                let dist = self.points[i].projective_distance(&self.points[j]);
                if dist < MIN_POINT_SEPARATION {
                    return Err(Error::PointsTooClose {
                        dist,
                        min: MIN_POINT_SEPARATION,
                    });
                }
            }
        }
        // Transversality: the Jacobian of the normalized defining forms,
        // restricted to the tangent space of each point, keeps its
        // smallest singular value above the threshold.
        let normalized: Vec<HomogeneousForm> = self
            .defining_forms
            .iter()
            .map(|f| f.normalized())
            .collect::<Result<_>>()?;
        let grads: Vec<Vec<HomogeneousForm>> = normalized.iter().map(|f| f.gradient()).collect();
        for p in &self.points {
            let sigma = tangent_jacobian_sigma_min(&grads, &p.sphere_normalize())?;
            if sigma < TRANSVERSALITY_MIN_SIGMA {
                return Err(Error::NonTransverse {
                    sigma,
                    min: TRANSVERSALITY_MIN_SIGMA,
                });
            }
        }
        Ok(())
    }

    pub fn case(&self) -> Case {
        self.case
    }

    pub fn points(&self) -> &[ComplexPoint] {
        &self.points
    }

    pub fn defining_forms(&self) -> &[HomogeneousForm] {
        &self.defining_forms
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn real_count(&self) -> usize {
        self.real_count
    }

    pub fn pair_count(&self) -> usize {
        (self.points.len() - self.real_count) / 2
    }

    pub fn is_fully_real(&self) -> bool {
        self.real_count == self.points.len()
    }

    /// Replaces the representative of every point, keeping order; used
    /// by the rescaling operations.  The scale factors are indexed like
    /// the points.
    fn rescaled(&self, factors: &[Complex64]) -> Result<PointConfiguration> {
        let points: Vec<ComplexPoint> = self
            .points
            .iter()
            .zip(factors)
            .map(|(p, &c)| p.scale(c))
            .collect();
        // Rescaling by nonzero factors cannot break any invariant
        // (same projective points), but re-validate to keep the
        // constructor the single source of truth.
        PointConfiguration::new(self.case, points, self.defining_forms.clone())
    }

    /// Real evaluation matrix of the degree-`degree` monomial basis at
    /// the stored representatives.  Real point -> one row of values;
    /// conjugate pair -> the two rows 2 Re f(z) and 2 Im f(z), indexed
    /// against the positive-imaginary member z.
    pub fn evaluation_matrix(&self, degree: usize) -> Mat {
        let basis = monomial_basis(self.case.vars(), degree);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(self.points.len());
        let mut i = 0usize;
        while i < self.points.len() {
            if i < self.real_count {
                let row: Vec<f64> = basis
                    .iter()
                    .map(|e| {
                        let m = HomogeneousForm::monomial(self.case.vars(), e).expect("basis exps");
                        m.evaluate(&self.points[i]).expect("dims").re
                    })
                    .collect();
                rows.push(row);
                i += 1;
            } else {
                let values: Vec<Complex64> = basis
                    .iter()
                    .map(|e| {
                        let m = HomogeneousForm::monomial(self.case.vars(), e).expect("basis exps");
                        m.evaluate(&self.points[i]).expect("dims")
                    })
                    .collect();
                rows.push(values.iter().map(|v| 2.0 * v.re).collect());
                rows.push(values.iter().map(|v| 2.0 * v.im).collect());
                i += 2;
            }
        }
        Mat::from_rows(&rows)
    }

    /// Evaluation coordinates of a form: (f(v_i) for real points,
    /// then 2 Re f(z), 2 Im f(z) per pair).
    pub fn evaluate_coords(&self, f: &HomogeneousForm) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut i = 0usize;
        while i < self.points.len() {
            let v = f.evaluate(&self.points[i])?;
            if i < self.real_count {
                out.push(v.re);
                i += 1;
            } else {
                out.push(2.0 * v.re);
                out.push(2.0 * v.im);
                i += 2;
            }
        }
        Ok(out)
    }
}

fn positive_imag(p: &ComplexPoint) -> bool {
    let norm = p.norm();
    for c in p.coords() {
        if c.im.abs() > REALITY_TOL * norm {
            return c.im > 0.0;
        }
    }
    false
}

fn sort_key(p: &ComplexPoint) -> Vec<(i64, i64)> {
    p.coords()
        .iter()
        .map(|c| (round9(c.re), round9(c.im)))
        .collect()
}

fn round9(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

fn tangent_jacobian_sigma_min(
    grads: &[Vec<HomogeneousForm>],
    p: &ComplexPoint,
) -> Result<f64> {
    let n = p.n();
    // Orthonormal basis of the Hermitian complement of p.
    let pc: Vec<Complex64> = p.coords().to_vec();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[i] = Complex64::new(1.0, 0.0);
        let proj: Complex64 = v.iter().zip(&pc).map(|(a, b)| a * b.conj()).sum();
        for (vl, pl) in v.iter_mut().zip(&pc) {
            *vl -= proj * pl;
        }
        for b in &basis {
            let proj: Complex64 = v.iter().zip(b).map(|(a, c)| a * c.conj()).sum();
            for (vl, bl) in v.iter_mut().zip(b) {
                *vl -= proj * bl;
            }
        }
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for vl in v.iter_mut() {
                *vl /= norm;
            }
            basis.push(v);
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    if basis.len() != n - 1 {
        return Err(Error::Invalid("could not build tangent basis".into()));
    }
    let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(grads.len());
    for grad in grads {
        let partials: Vec<Complex64> = grad
            .iter()
            .map(|g| g.evaluate(p))
            .collect::<Result<_>>()?;
        let row: Vec<Complex64> = basis
            .iter()
            .map(|t| partials.iter().zip(t).map(|(g, tl)| g * tl).sum())
            .collect();
        rows.push(row);
    }
    Ok(complex_sigma_min(&rows))
}

/// Degree-d forms vanishing at all given real points: an orthonormal
/// basis (coefficient inner product) of the nullspace of the
/// evaluation matrix.  Errors if the dimension is not
/// dim H_{n,d} - #points (points in special position).
pub fn pencil_through_points(case: Case, pts: &[ComplexPoint]) -> Result<Vec<HomogeneousForm>> {
    let n = case.vars();
    let d = case.half_degree();
    let basis = monomial_basis(n, d);
    for p in pts {
        if p.n() != n {
            return Err(Error::Dimension("point dimension mismatch".into()));
        }
        if !p.is_real(1e-9) {
            return Err(Error::Invalid("pencil_through_points expects real points".into()));
        }
    }
    let expected = basis.len().saturating_sub(pts.len());
    if pts.is_empty() {
        return (0..basis.len())
            .map(|i| {
                let mut dense = vec![0.0; basis.len()];
                dense[i] = 1.0;
                HomogeneousForm::from_dense(n, d, &dense)
            })
            .collect();
    }
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            basis
                .iter()
                .map(|e| {
                    let m = HomogeneousForm::monomial(n, e).expect("basis exps");
                    m.evaluate(p).expect("dims").re
                })
                .collect()
        })
        .collect();
    let eval = Mat::from_rows(&rows);
    let null = nullspace(&eval, RELATION_RTOL);
    if null.len() != expected {
        return Err(Error::PencilDimension {
            expected,
            observed: null.len(),
        });
    }
    null.into_iter()
        .map(|dense| HomogeneousForm::from_dense(n, d, &dense))
        .collect()
}

/// Computes the transverse complete intersection of n - 1 degree-d
/// forms as a canonical `PointConfiguration`.
///
/// Dehomogenizes on a seeded random rotation chart, runs damped Newton
/// from 60 s seeded starts (processed in fixed-order chunks so the
/// early exit at s distinct roots is deterministic), and retries with
/// a fresh chart when a root lands near the chart's hyperplane at
/// infinity.  Fewer than s distinct transverse roots after the full
/// budget is a degeneracy error, never a silent short count.
pub fn complete_intersection(
    case: Case,
    forms: &[HomogeneousForm],
    seed: u64,
) -> Result<PointConfiguration> {
    let n = case.vars();
    let d = case.half_degree();
    let s = case.intersection_size();
    if forms.len() != n - 1 {
        return Err(Error::Dimension(format!(
            "expected {} forms, got {}",
            n - 1,
            forms.len()
        )));
    }
    for f in forms {
        if f.n() != n || f.degree() != d {
            return Err(Error::Dimension(format!(
                "form shape ({}, {}) does not match case {}",
                f.n(),
                f.degree(),
                case
            )));
        }
    }
    let normalized: Vec<HomogeneousForm> =
        forms.iter().map(|f| f.normalized()).collect::<Result<_>>()?;

    const CHART_ATTEMPTS: usize = 4;
    let budget = STARTS_PER_POINT * s;
    let chunk_size = 64usize;
    let mut last_err = Error::NoTransverseRoots;

    'attempt: for attempt in 0..CHART_ATTEMPTS {
        let mut chart_rng = ChaCha8Rng::seed_from_u64(seed);
        chart_rng.set_stream(0x524F5441 + attempt as u64);
        let rotation = random_rotation(n, &mut chart_rng);
        let sys = ChartSystem::new(normalized.clone(), rotation)?;

        let mut roots: Vec<Vec<Complex64>> = Vec::new();
        let mut processed = 0usize;
        while processed < budget {
            let count = chunk_size.min(budget - processed);
            let base = processed;
            let found = par::map_indexed(count, |i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(0x5354 + (attempt as u64) * budget as u64 + (base + i) as u64);
                // Roots can sit at any radius in chart coordinates
                // (large radius = near the chart's hyperplane at
                // infinity), so starts cycle through scales instead of
                // clustering at one.
                let scale = START_SCALES[(base + i) % START_SCALES.len()];
                let start: Vec<Complex64> = (0..n - 1)
                    .map(|_| {
                        Complex64::new(gaussian(&mut rng) * scale, gaussian(&mut rng) * scale)
                    })
                    .collect();
                newton_from(&sys, start)
            });
            processed += count;
            for y in found.into_iter().flatten() {
                let p = sys.embed(&y).sphere_normalize();
                let dup = roots
                    .iter()
                    .any(|r| sys.embed(r).sphere_normalize().projective_distance(&p) < ROOT_DEDUP_DISTANCE);
                if !dup {
                    roots.push(y);
                }
            }
            if roots.len() > s {
                return Err(Error::DegenerateIntersection {
                    found: roots.len(),
                    expected: s,
                });
            }
            // Early exit only once the full set is present and a
            // minimum share of the budget has confirmed it.
            if roots.len() == s && processed >= budget / 5 {
                break;
            }
        }

        if roots.len() < s {
            last_err = Error::DegenerateIntersection {
                found: roots.len(),
                expected: s,
            };
            continue 'attempt;
        }

        // A root near the chart's hyperplane at infinity means the
        // chart was unlucky; its embedded last coordinate (against the
        // rotated frame) has modulus below 1e-4 after normalization.
        for y in &roots {
            let ynorm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let last_modulus = 1.0 / (1.0 + ynorm * ynorm).sqrt();
            if last_modulus < 1e-4 {
                last_err = Error::Invalid("root near the chart hyperplane at infinity".into());
                continue 'attempt;
            }
        }

        // Snap to exact conjugation closure before validation: real
        // roots lose their residual imaginary dust, complex roots are
        // paired with their exact conjugates.
        let embedded: Vec<ComplexPoint> = roots
            .iter()
            .map(|y| sys.embed(y).sphere_normalize())
            .collect();
        let mut points: Vec<ComplexPoint> = Vec::with_capacity(s);
        let mut consumed = vec![false; s];
        for i in 0..s {
            if consumed[i] {
                continue;
            }
            if embedded[i].is_real(REALITY_TOL) {
                consumed[i] = true;
                points.push(ComplexPoint::from_real(&embedded[i].real_coords())?.sphere_normalize());
                continue;
            }
            let conj = embedded[i].conj();
            let mut partner = None;
            for (j, q) in embedded.iter().enumerate().skip(i + 1) {
                if !consumed[j] && q.projective_distance(&conj) < 1e-6 {
                    partner = Some(j);
                    break;
                }
            }
            let Some(j) = partner else {
                last_err = Error::NotConjugationClosed;
                continue 'attempt;
            };
            consumed[i] = true;
            consumed[j] = true;
            points.push(embedded[i].clone());
            points.push(embedded[i].conj());
        }

        return PointConfiguration::new(case, points, forms.to_vec());
    }
    Err(last_err)
}

/// Extracts the Cayley-Bacharach relation on the configuration's
/// stored representatives.  The relation space must be exactly
/// one-dimensional; the result is scaled so the entry of largest
/// modulus is 1 (for a real entry) or has modulus 1 with a
/// deterministic sign convention (complex entries), and is tagged
/// `Raw`.
pub fn cb_relation(config: &PointConfiguration) -> Result<CBRelation> {
    cb_relation_with_rtol(config, RELATION_RTOL)
}

pub fn cb_relation_with_rtol(config: &PointConfiguration, rtol: f64) -> Result<CBRelation> {
    let eval = config.evaluation_matrix(config.case.half_degree());
    let null = nullspace(&eval.transpose(), rtol);
    if null.len() != 1 {
        return Err(Error::RelationNotUnique { dim: null.len() });
    }
    let t = &null[0];
    // Map row weights back to complex coefficients: with rows
    // (2 Re f(z), 2 Im f(z)) and functional 2 Re(c f(z)), the weights
    // (t1, t2) give c = t1 - i t2.
    let mut u: Vec<Complex64> = Vec::with_capacity(config.points.len());
    let mut row = 0usize;
    for i in 0..config.points.len() {
        if i < config.real_count {
            u.push(Complex64::new(t[row], 0.0));
            row += 1;
        } else if (i - config.real_count) % 2 == 0 {
            u.push(Complex64::new(t[row], -t[row + 1]));
        } else {
            u.push(Complex64::new(t[row], t[row + 1]));
            row += 2;
        }
    }

    // Scale so the largest-modulus entry is 1 when real; otherwise
    // divide by its modulus and pin the sign on the largest real entry.
    let mut k = 0usize;
    for i in 1..u.len() {
        if u[i].norm() > u[k].norm() * (1.0 + 1e-12) {
            k = i;
        }
    }
    if u[k].im.abs() <= 1e-9 * u[k].norm() {
        let factor = 1.0 / u[k].re;
        for c in u.iter_mut() {
            *c *= factor;
        }
    } else {
        let factor = 1.0 / u[k].norm();
        for c in u.iter_mut() {
            *c *= factor;
        }
        let real_pin = (0..config.real_count).max_by(|&a, &b| {
            u[a].re.abs().total_cmp(&u[b].re.abs())
        });
        let flip = match real_pin {
            Some(i) => u[i].re < 0.0,
            None => {
                if u[0].re != 0.0 {
                    u[0].re < 0.0
                } else {
                    u[0].im < 0.0
                }
            }
        };
        if flip {
            for c in u.iter_mut() {
                *c = -*c;
            }
        }
    }

    // Every coefficient must be properly nonzero; the largest is 1.
    for (i, c) in u.iter().enumerate() {
        if c.norm() < 1e-7 {
            return Err(Error::RelationZeroCoefficient {
                index: i,
                modulus: c.norm(),
            });
        }
    }

    let rel = CBRelation {
        coefficients: u,
        normalization: Normalization::Raw,
    };
    let res = rel.residual(config)?;
    if res > 1e-7 {
        return Err(Error::Invalid(format!(
            "extracted relation residual {res:.3e} too large"
        )));
    }
    Ok(rel)
}

/// Rescales the representatives of a fully real configuration by
/// |u_i|^(1/d), after which the relation coefficients are signs.  The
/// relation is re-extracted on the new representatives rather than
/// transformed, so the +-1 pattern is an independent check.
pub fn rescale_unit_modulus(
    config: &PointConfiguration,
    rel: &CBRelation,
) -> Result<(PointConfiguration, CBRelation)> {
    if !config.is_fully_real() {
        return Err(Error::NotFullyReal {
            pairs: config.pair_count(),
        });
    }
    if rel.len() != config.len() {
        return Err(Error::Dimension("relation length mismatch".into()));
    }
    let d = config.case.half_degree() as f64;
    let factors: Vec<Complex64> = rel
        .coefficients
        .iter()
        .map(|u| Complex64::new(u.norm().powf(1.0 / d), 0.0))
        .collect();
    let rescaled = config.rescaled(&factors)?;
    let new_rel = cb_relation(&rescaled)?;
    for c in new_rel.coefficients() {
        if (c.norm() - 1.0).abs() > 1e-9 || c.im.abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "unit-modulus rescaling left coefficient {c} off the sign lattice"
            )));
        }
    }
    let snapped: Vec<Complex64> = new_rel
        .coefficients
        .iter()
        .map(|c| Complex64::new(c.re.signum(), 0.0))
        .collect();
    Ok((
        rescaled,
        CBRelation {
            coefficients: snapped,
            normalization: Normalization::UnitModulus,
        },
    ))
}

/// Normalizes the single conjugate pair's coefficient to exactly 1 by
/// scaling the pair representative by the principal d-th root of the
/// coefficient.  The remaining real coefficients are re-extracted on
/// the new representatives.
pub fn normalize_complex_pair(
    config: &PointConfiguration,
    rel: &CBRelation,
) -> Result<(PointConfiguration, CBRelation)> {
    if config.pair_count() != 1 {
        return Err(Error::NotOnePair {
            pairs: config.pair_count(),
        });
    }
    if rel.len() != config.len() {
        return Err(Error::Dimension("relation length mismatch".into()));
    }
    let d = config.case.half_degree() as f64;
    let pair_idx = config.real_count;
    let c = rel.coefficients[pair_idx];
    if c.norm() < 1e-12 {
        return Err(Error::RelationZeroCoefficient {
            index: pair_idx,
            modulus: c.norm(),
        });
    }
    let root = c.powf(1.0 / d);
    let mut factors = vec![Complex64::new(1.0, 0.0); config.len()];
    factors[pair_idx] = root;
    factors[pair_idx + 1] = root.conj();
    let rescaled = config.rescaled(&factors)?;
    let extracted = cb_relation(&rescaled)?;
    // Rescale by the pair coefficient so the pair carries exactly 1.
    let new_pair_idx = rescaled.real_count;
    let pair_coeff = extracted.coefficients[new_pair_idx];
    if pair_coeff.im.abs() > 1e-8 * pair_coeff.norm().max(1e-12) || pair_coeff.re == 0.0 {
        return Err(Error::Invalid(format!(
            "pair coefficient {pair_coeff} did not normalize to a real value"
        )));
    }
    let factor = 1.0 / pair_coeff.re;
    let mut coeffs: Vec<Complex64> = extracted
        .coefficients
        .iter()
        .map(|v| v * factor)
        .collect();
    for (i, v) in coeffs.iter_mut().enumerate() {
        if i < rescaled.real_count {
            if v.im.abs() > 1e-9 * (1.0 + v.norm()) {
                return Err(Error::Invalid(
                    "real coefficient stayed complex after pair normalization".into(),
                ));
            }
            *v = Complex64::new(v.re, 0.0);
        }
    }
    // The pair entries become exactly 1.
    coeffs[new_pair_idx] = Complex64::new(1.0, 0.0);
    coeffs[new_pair_idx + 1] = Complex64::new(1.0, 0.0);
    let rel = CBRelation {
        coefficients: coeffs,
        normalization: Normalization::ComplexPairNormalized,
    };
    let res = rel.residual(&rescaled)?;
    if res > 1e-8 {
        return Err(Error::Invalid(format!(
            "pair-normalized relation residual {res:.3e} too large"
        )));
    }
    Ok((rescaled, rel))
}

/// Seeded Haar-ish random rotation from QR of a Gaussian matrix.
pub fn random_rotation(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    loop {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut ok = true;
        for _ in 0..n {
            let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
            for b in &cols {
                let proj: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                for (vl, bl) in v.iter_mut().zip(b) {
                    *vl -= proj * bl;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for vl in v.iter_mut() {
                *vl /= norm;
            }
            cols.push(v);
        }
        if ok {
            let mut m = Mat::zeros(n, n);
            for (j, col) in cols.iter().enumerate() {
                for i in 0..n {
                    m.set(i, j, col[i]);
                }
            }
            return m;
        }
    }
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Serializable complex scalar.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexScalar {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexScalar {
    fn from(c: Complex64) -> Self {
        ComplexScalar { re: c.re, im: c.im }
    }
}

impl From<ComplexScalar> for Complex64 {
    fn from(c: ComplexScalar) -> Self {
        Complex64::new(c.re, c.im)
    }
}

/// JSON record for a configuration, optionally bundling a relation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    pub case: Case,
    pub points: Vec<ComplexPoint>,
    pub defining_forms: Vec<HomogeneousForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<ComplexScalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl ConfigRecord {
    pub fn from_config(config: &PointConfiguration, rel: Option<&CBRelation>) -> ConfigRecord {
        ConfigRecord {
            case: config.case(),
            points: config.points().to_vec(),
            defining_forms: config.defining_forms().to_vec(),
            u: rel.map(|r| r.coefficients().iter().map(|&c| c.into()).collect()),
            normalization: rel.map(|r| r.normalization()),
        }
    }

    /// Validates and rebuilds the configuration; a bundled relation is
    /// permuted along with the points into canonical order.
    pub fn into_parts(self) -> Result<(PointConfiguration, Option<CBRelation>)> {
        let (config, perm) =
            PointConfiguration::new_with_permutation(self.case, self.points, self.defining_forms)?;
        let rel = match self.u {
            None => None,
            Some(u) => {
                if u.len() != config.len() {
                    return Err(Error::Dimension(
                        "relation length does not match point count".into(),
                    ));
                }
                let coefficients: Vec<Complex64> =
                    perm.iter().map(|&i| u[i].into()).collect();
                let rel = CBRelation {
                    coefficients,
                    normalization: self.normalization.unwrap_or(Normalization::Raw),
                };
                let res = rel.residual(&config)?;
                if res > 1e-6 {
                    return Err(Error::Invalid(format!(
                        "bundled relation residual {res:.3e} too large"
                    )));
                }
                Some(rel)
            }
        };
        Ok((config, rel))
    }
}

#[cfg(test)]
mod tests {
    use super::samples::{
        cube_config, grid_config, grid_forms, grid_points, one_pair_config,
    };
    use super::*;
    use crate::forms::Case;

    #[test]
    fn canonical_order_puts_reals_first_sorted() {
        let config = grid_config().unwrap();
        assert_eq!(config.real_count(), 9);
        let keys: Vec<Vec<(i64, i64)>> = config.points().iter().map(sort_key).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn pairs_are_adjacent_with_positive_member_first() {
        let config = one_pair_config(Case::TernarySextic, 0.5, 1).unwrap();
        assert_eq!(config.real_count(), 7);
        let z = &config.points()[7];
        let zbar = &config.points()[8];
        assert!(positive_imag(z));
        assert!(!positive_imag(zbar));
        assert!(z.conj().projective_distance(zbar) < 1e-12);
    }

    #[test]
    fn representatives_are_preserved_as_given() {
        let config = grid_config().unwrap();
        for p in config.points() {
            // Raw affine representatives (a, b, 1), not unit vectors.
            assert_eq!(p.coords()[2], num_complex::Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn intersection_recovers_the_grid_projectively() {
        let config =
            complete_intersection(Case::TernarySextic, &grid_forms(), 0).unwrap();
        assert_eq!(config.len(), 9);
        assert!(config.is_fully_real());
        for fixture in grid_points() {
            let hit = config
                .points()
                .iter()
                .any(|p| p.projective_distance(&fixture) < 1e-9);
            assert!(hit, "missing grid point");
        }
    }

    #[test]
    fn intersection_is_deterministic_per_seed() {
        let a = complete_intersection(Case::TernarySextic, &grid_forms(), 42).unwrap();
        let b = complete_intersection(Case::TernarySextic, &grid_forms(), 42).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert_eq!(p.coords(), q.coords());
        }
    }

    #[test]
    fn degenerate_system_is_rejected() {
        // (z - w)^2 gives four double points instead of eight simple ones.
        let mut forms = samples::cube_forms();
        forms[2] = HomogeneousForm::from_terms(
            4,
            2,
            &[(&[0, 0, 2, 0], 1.0), (&[0, 0, 1, 1], -2.0), (&[0, 0, 0, 2], 1.0)],
        )
        .unwrap();
        let err = complete_intersection(Case::QuaternaryQuartic, &forms, 0).unwrap_err();
        // Non-reduced roots either merge (fewer points) or scatter
        // into clusters of pseudo-roots (more points); both must fail.
        match err {
            Error::DegenerateIntersection { found, expected } => {
                assert_eq!(expected, 8);
                assert_ne!(found, 8);
            }
            Error::PointsTooClose { .. } | Error::NonTransverse { .. } => {}
            other => panic!("expected degeneracy error, got {other}"),
        }
    }

    #[test]
    fn non_vanishing_forms_are_rejected() {
        let mut forms = grid_forms();
        forms[1] = HomogeneousForm::from_terms(3, 3, &[(&[0, 3, 0], 1.0), (&[0, 1, 2], -0.9)])
            .unwrap();
        let err = PointConfiguration::new(Case::TernarySextic, grid_points(), forms).unwrap_err();
        assert!(matches!(err, Error::DoesNotVanish { .. }));
    }

    #[test]
    fn unpaired_complex_point_is_rejected() {
        let mut pts = grid_points();
        pts[0] = ComplexPoint::new(vec![
            num_complex::Complex64::new(0.0, 1.0),
            num_complex::Complex64::new(1.0, 0.0),
            num_complex::Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let err = PointConfiguration::new(Case::TernarySextic, pts, grid_forms()).unwrap_err();
        assert!(matches!(err, Error::NotConjugationClosed));
    }

    #[test]
    fn coincident_points_are_rejected() {
        let mut pts = grid_points();
        pts[0] = pts[1].clone();
        let err = PointConfiguration::new(Case::TernarySextic, pts, grid_forms()).unwrap_err();
        assert!(matches!(err, Error::PointsTooClose { .. }));
    }

    #[test]
    fn grid_pencil_is_special_but_subsets_are_not() {
        // All nine grid points impose only eight conditions on cubics,
        // so the pencil dimension check fires; any eight of them are
        // in general position.
        let err = pencil_through_points(Case::TernarySextic, &grid_points()).unwrap_err();
        assert!(matches!(err, Error::PencilDimension { expected: 1, observed: 2 }));

        let eight = &grid_points()[..8];
        let pencil = pencil_through_points(Case::TernarySextic, eight).unwrap();
        assert_eq!(pencil.len(), 2);
        for f in &pencil {
            for p in eight {
                assert!(f.evaluate(p).unwrap().norm() < 1e-9);
            }
        }
    }

    #[test]
    fn unit_modulus_rescaling_yields_sign_relation() {
        let config = grid_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let (rescaled, srel) = rescale_unit_modulus(&config, &rel).unwrap();
        assert_eq!(srel.normalization(), Normalization::UnitModulus);
        for c in srel.coefficients() {
            assert!(c.im == 0.0 && (c.re.abs() - 1.0).abs() < 1e-15);
        }
        assert!(srel.residual(&rescaled).unwrap() < 1e-9);
        // Grid weights have moduli (1/4, 1/2, 1), so the rescaled
        // representatives have last coordinate |u|^(1/3).
        let mut last: Vec<f64> = rescaled
            .points()
            .iter()
            .map(|p| p.coords()[2].re)
            .collect();
        last.sort_by(f64::total_cmp);
        let quarter = 0.25f64.powf(1.0 / 3.0);
        let half = 0.5f64.powf(1.0 / 3.0);
        for (got, want) in last.iter().zip(&[
            quarter, quarter, quarter, quarter, half, half, half, half, 1.0,
        ]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn unit_modulus_rescaling_is_idempotent() {
        let config = grid_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let (once, rel1) = rescale_unit_modulus(&config, &rel).unwrap();
        let (twice, rel2) = rescale_unit_modulus(&once, &rel1).unwrap();
        for (p, q) in once.points().iter().zip(twice.points()) {
            for (a, b) in p.coords().iter().zip(q.coords()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        for (a, b) in rel1.coefficients().iter().zip(rel2.coefficients()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn complex_pair_normalization_fixes_pair_coefficient() {
        for case in [Case::TernarySextic, Case::QuaternaryQuartic] {
            let tau = match case {
                Case::TernarySextic => 0.5,
                Case::QuaternaryQuartic => 1.5,
            };
            let config = one_pair_config(case, tau, 5).unwrap();
            let rel = cb_relation(&config).unwrap();
            let (normed, nrel) = normalize_complex_pair(&config, &rel).unwrap();
            assert_eq!(nrel.normalization(), Normalization::ComplexPairNormalized);
            let k = normed.real_count();
            assert_eq!(nrel.coefficients()[k], num_complex::Complex64::new(1.0, 0.0));
            assert_eq!(nrel.coefficients()[k + 1], num_complex::Complex64::new(1.0, 0.0));
            for c in &nrel.coefficients()[..k] {
                assert_eq!(c.im, 0.0);
                assert!(c.norm() > 1e-7);
            }
            assert!(nrel.residual(&normed).unwrap() < 1e-8);
        }
    }

    #[test]
    fn config_record_round_trips_with_relation() {
        let config = cube_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let record = ConfigRecord::from_config(&config, Some(&rel));
        let json = serde_json::to_string(&record).unwrap();
        let back: ConfigRecord = serde_json::from_str(&json).unwrap();
        let (config2, rel2) = back.into_parts().unwrap();
        let rel2 = rel2.expect("relation preserved");
        for (p, q) in config.points().iter().zip(config2.points()) {
            assert_eq!(p.coords(), q.coords());
        }
        for (a, b) in rel.coefficients().iter().zip(rel2.coefficients()) {
            assert_eq!(a, b);
        }
        assert_eq!(rel2.normalization(), Normalization::Raw);
    }

    #[test]
    fn config_record_permutes_bundled_relation_with_points() {
        let config = grid_config().unwrap();
        let rel = cb_relation(&config).unwrap();
        let mut record = ConfigRecord::from_config(&config, Some(&rel));
        // Shuffle the stored points; the bundled u must follow them
        // back into canonical order.
        record.points.reverse();
        record.u.as_mut().unwrap().reverse();
        let (config2, rel2) = record.into_parts().unwrap();
        let rel2 = rel2.unwrap();
        assert!(rel2.residual(&config2).unwrap() < 1e-9);
        for (p, q) in config.points().iter().zip(config2.points()) {
            assert_eq!(p.coords(), q.coords());
        }
    }

    #[test]
    fn evaluation_coords_match_matrix_rows() {
        let config = one_pair_config(Case::QuaternaryQuartic, 1.5, 2).unwrap();
        let m = config.evaluation_matrix(2);
        let basan = crate::forms::monomial_basis(4, 2);
        for (j, exps) in basan.iter().enumerate() {
            let mono = HomogeneousForm::monomial(4, exps).unwrap();
            let coords = config.evaluate_coords(&mono).unwrap();
            for (i, &c) in coords.iter().enumerate() {
                assert!((m.get(i, j) - c).abs() < 1e-14);
            }
        }
    }
}
