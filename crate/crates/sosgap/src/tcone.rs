//! The evaluation image of the squares at a fully real intersection.
//!
//! Fix a fully real configuration whose representatives have been
//! rescaled so the relation coefficients are signs a_i = +-1.  Sending
//! a half-degree form q to its squared values (q(w_1)^2, ..., q(w_s)^2)
//! maps the squares onto the cone
//!
//!   T = { x >= 0 : sum_i sqrt(x_i) >= 2 sqrt(x_k) for every k }.
//!
//! One direction is the relation itself: sum_i a_i q(w_i) = 0 forces
//! |q(w_k)| <= sum_{i != k} |q(w_i)|.  The other is constructive: a
//! boundary vector of T prescribes values y_i = a_i sqrt(x_i) with one
//! flipped sign, those values satisfy the relation, and the evaluation
//! map reaches them because its image is the full hyperplane a^z = 0.
//!
//! Nonnegative forms, by contrast, can take any strictly positive
//! values at the points.  [`positive_lift`] realizes a prescribed
//! positive value vector as a nonnegative form of the doubled degree,
//! so vectors outside T (the basis directions, say) witness the gap
//! between the two cones at the level of evaluations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::HomogeneousForm;
use crate::numerics::{lstsq_min_norm, min_on_sphere, min_on_sphere_penalized, sym_eig};
use crate::varieties::{CBRelation, Normalization, PointConfiguration};

/// Entries this far below zero are rounding noise and clip to zero.
const CLIP_TOL: f64 = 1e-12;
/// Slack floor for membership, scaled by max(1, total slack budget).
const SLACK_TOL: f64 = 1e-9;
/// |min slack| bound certifying a vector sits on a facet.
const BOUNDARY_TOL: f64 = 1e-8;
/// Residual bound for the facet least-squares solve and its check.
const REALIZE_TOL: f64 = 1e-7;
/// Strict positivity floor for liftable value vectors.
const LIFT_FLOOR: f64 = 1e-6;
/// Required sphere minimum of the lifted form.  Absolute: together
/// with the positivity floor it fixes an O(1) scale convention for
/// the target values.
const LIFT_SPHERE_TOL: f64 = 1e-7;
/// Chordal radius of the spherical caps excluded around the points.
const CAP_RADIUS: f64 = 0.05;
/// Additive margin on the barrier multiplier before verification.
const LIFT_MARGIN: f64 = 1e-3;
/// Doublings of the barrier multiplier before giving up.  The dip
/// near a point behaves like min s - O(1/lambda), so each doubling
/// halves the remaining deficit and a short budget is enough.
const LIFT_ATTEMPTS: usize = 12;
/// Restarts for every sphere minimization in this module.
const SPHERE_RESTARTS: usize = 8;
/// Relative eigenvalue cutoff when ranking the evaluation matrix.
const RANK_RTOL: f64 = 1e-10;

/// A vector of values at the intersection points (or any m >= 2 slots).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvalVector {
    values: Vec<f64>,
}

impl EvalVector {
    pub fn new(values: Vec<f64>) -> Result<EvalVector> {
        if values.len() < 2 {
            return Err(Error::Invalid(
                "an evaluation vector needs at least two entries".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("evaluation entry {i}")));
        }
        Ok(EvalVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Outcome of the T-cone membership test.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipReport {
    pub member: bool,
    /// Minimum over k of sum_i w_i sqrt(x_i) - 2 w_k sqrt(x_k).
    pub min_slack: f64,
    /// Index attaining the minimum (lowest on ties).
    pub argmin_k: usize,
}

/// Clip rounding-level negatives to zero; reject anything worse.
fn clipped_entries(x: &EvalVector) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len());
    for (i, &v) in x.values().iter().enumerate() {
        if v < -CLIP_TOL {
            return Err(Error::NegativeEntry { index: i, value: v });
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

/// Tests x against T: all entries nonnegative and, for every k,
/// sum_i w_i sqrt(x_i) >= 2 w_k sqrt(x_k).
///
/// Weights default to all ones (the unit-modulus picture); explicit
/// weights are taken by modulus and must be nonzero.  The slack floor
/// scales with the total sum because slacks are 1-homogeneous in
/// sqrt(x): scaling x by c^2 scales every slack by c, and a fixed
/// absolute floor would misclassify large vectors.
pub fn t_membership(x: &EvalVector, weights: Option<&[f64]>) -> Result<MembershipReport> {
    let m = x.len();
    let w: Vec<f64> = match weights {
        Some(ws) => {
            if ws.len() != m {
                return Err(Error::Dimension(format!(
                    "{} weights for {} entries",
                    ws.len(),
                    m
                )));
            }
            if let Some(i) = ws.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("weight {i}")));
            }
            if let Some(i) = ws.iter().position(|v| *v == 0.0) {
                return Err(Error::Invalid(format!("weight {i} is zero")));
            }
            ws.iter().map(|v| v.abs()).collect()
        }
        None => vec![1.0; m],
    };
    let entries = clipped_entries(x)?;
    let r: Vec<f64> = entries
        .iter()
        .zip(&w)
        .map(|(&v, &wi)| wi * v.sqrt())
        .collect();
    let total: f64 = r.iter().sum();
    let mut min_slack = f64::INFINITY;
    let mut argmin_k = 0usize;
    for (k, &rk) in r.iter().enumerate() {
        let slack = total - 2.0 * rk;
        if slack < min_slack {
            min_slack = slack;
            argmin_k = k;
        }
    }
    Ok(MembershipReport {
        member: min_slack >= -SLACK_TOL * total.max(1.0),
        min_slack,
        argmin_k,
    })
}

fn require_rescaled_real(config: &PointConfiguration, rel: &CBRelation) -> Result<()> {
    if rel.normalization() != Normalization::UnitModulus {
        return Err(Error::NotRescaled);
    }
    if !config.is_fully_real() {
        return Err(Error::NotFullyReal {
            pairs: config.pair_count(),
        });
    }
    if rel.len() != config.len() {
        return Err(Error::Dimension(format!(
            "relation length {} does not match {} points",
            rel.len(),
            config.len()
        )));
    }
    Ok(())
}

/// Sign vector of a unit-modulus relation.
fn relation_signs(rel: &CBRelation) -> Result<Vec<f64>> {
    let mut signs = Vec::with_capacity(rel.len());
    for (i, c) in rel.coefficients().iter().enumerate() {
        if (c.norm() - 1.0).abs() > 1e-9 || c.im.abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "relation coefficient {i} is not a sign: {c}"
            )));
        }
        signs.push(if c.re >= 0.0 { 1.0 } else { -1.0 });
    }
    Ok(signs)
}

/// Squared values of a half-degree form at the points of a rescaled
/// fully real configuration.  The result always lies in T; that is
/// re-checked here because it is the inclusion the module is built on.
pub fn sq_image(
    q: &HomogeneousForm,
    config: &PointConfiguration,
    rel: &CBRelation,
) -> Result<EvalVector> {
    require_rescaled_real(config, rel)?;
    let case = config.case();
    if q.n() != case.vars() || q.degree() != case.half_degree() {
        return Err(Error::Dimension(format!(
            "form of degree {} in {} variables; need degree {} in {}",
            q.degree(),
            q.n(),
            case.half_degree(),
            case.vars()
        )));
    }
    let vals = config.evaluate_coords(q)?;
    let x = EvalVector::new(vals.iter().map(|v| v * v).collect())?;
    let report = t_membership(&x, None)?;
    if !report.member {
        return Err(Error::Invalid(format!(
            "square values left the cone (slack {:.3e}); the relation and \
             configuration disagree",
            report.min_slack
        )));
    }
    Ok(x)
}

/// Realizes a boundary vector of T as the squared values of a single
/// half-degree form.
///
/// On the facet where the k-th slack vanishes, the prescription
/// y_i = a_i sqrt(x_i) for i != k and y_k = -a_k sqrt(x_k) satisfies
/// sum_i a_i y_i = slack_k = 0, so y is orthogonal to the relation and
/// the evaluation map reaches it.  The returned form q has
/// q(w_i)^2 = x_i within [`REALIZE_TOL`].
pub fn extreme_square(
    x: &EvalVector,
    config: &PointConfiguration,
    rel: &CBRelation,
) -> Result<HomogeneousForm> {
    require_rescaled_real(config, rel)?;
    if x.len() != config.len() {
        return Err(Error::Dimension(format!(
            "{} values for {} points",
            x.len(),
            config.len()
        )));
    }
    let entries = clipped_entries(x)?;
    let report = t_membership(x, None)?;
    let roots: Vec<f64> = entries.iter().map(|v| v.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    if report.min_slack.abs() > BOUNDARY_TOL * total.max(1.0) {
        return Err(Error::NotOnBoundary {
            slack: report.min_slack,
        });
    }
    let k = report.argmin_k;
    let signs = relation_signs(rel)?;
    let y: Vec<f64> = roots
        .iter()
        .zip(&signs)
        .enumerate()
        .map(|(i, (&r, &a))| if i == k { -a * r } else { a * r })
        .collect();
    let case = config.case();
    let eval = config.evaluation_matrix(case.half_degree());
    let q_dense = lstsq_min_norm(&eval, &y, 1e-10);
    let fitted = eval.matvec(&q_dense);
    let residual = fitted
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if residual > REALIZE_TOL * total.max(1.0) {
        return Err(Error::LeastSquares {
            residual,
            tol: REALIZE_TOL * total.max(1.0),
        });
    }
    let q = HomogeneousForm::from_dense(case.vars(), case.half_degree(), &q_dense)?;
    let vals = config.evaluate_coords(&q)?;
    let scale = entries.iter().fold(1.0f64, |acc, &v| acc.max(v));
    for (i, (&v, &xi)) in vals.iter().zip(&entries).enumerate() {
        if (v * v - xi).abs() > REALIZE_TOL * scale {
            return Err(Error::Invalid(format!(
                "realized square misses entry {i}: {:.6e} vs {:.6e}",
                v * v,
                xi
            )));
        }
    }
    Ok(q)
}

/// A nonnegative form of the doubled degree realizing prescribed
/// strictly positive values at the points.
#[derive(Clone, Debug)]
pub struct LiftResult {
    /// The lifted form p + lambda * g.
    pub form: HomogeneousForm,
    /// Barrier multiplier actually used.
    pub lambda: f64,
    /// Sphere minimum of the barrier away from the point caps.
    pub barrier_min: f64,
    /// Sphere minimum of the raw preimage away from the point caps.
    pub preimage_min: f64,
    /// Verified sphere minimum of the lifted form.
    pub sphere_min: f64,
}

/// Lifts a strictly positive value vector to a nonnegative form.
///
/// The minimum-norm preimage p of s under evaluation matches the
/// values but may dip negative between the points.  The barrier
/// g = sum of squared (normalized) defining forms vanishes exactly at
/// the points, so p + lambda g keeps the values for every lambda; a
/// multiplier estimated from constrained sphere minima away from small
/// caps around the points, with doubling retries, makes the sum
/// nonnegative on the whole sphere.
///
/// The verified floor is the absolute [`LIFT_SPHERE_TOL`]; the
/// estimate only sees dips outside the caps, and the retry loop
/// handles the region near the points, where the deficit shrinks like
/// 1/lambda toward the prescribed positive value.
pub fn positive_lift(s: &EvalVector, config: &PointConfiguration, seed: u64) -> Result<LiftResult> {
    if !config.is_fully_real() {
        return Err(Error::NotFullyReal {
            pairs: config.pair_count(),
        });
    }
    if s.len() != config.len() {
        return Err(Error::Dimension(format!(
            "{} values for {} points",
            s.len(),
            config.len()
        )));
    }
    if let Some((i, &v)) = s.values().iter().enumerate().find(|(_, v)| **v < LIFT_FLOOR) {
        return Err(Error::Invalid(format!(
            "entry {i} = {v:.3e} is below the strict positivity floor {LIFT_FLOOR:.0e}"
        )));
    }
    let case = config.case();
    let degree = case.full_degree();
    let eval = config.evaluation_matrix(degree);
    let gram_rows = eval.transpose().gram();
    let eig = sym_eig(&gram_rows)?;
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > RANK_RTOL * lambda_max)
        .count();
    if rank < config.len() {
        return Err(Error::EvaluationRankDeficient {
            rank,
            need: config.len(),
        });
    }

    let p_dense = lstsq_min_norm(&eval, s.values(), 1e-10);
    let fitted = eval.matvec(&p_dense);
    let s_scale = s
        .values()
        .iter()
        .fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let residual = fitted
        .iter()
        .zip(s.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if residual > 1e-9 * s_scale {
        return Err(Error::LeastSquares {
            residual,
            tol: 1e-9 * s_scale,
        });
    }
    let p = HomogeneousForm::from_dense(case.vars(), degree, &p_dense)?;

    // Normalizing each defining form keeps the barrier scale, and with
    // it the multiplier search, independent of how the configuration
    // was constructed.
    let mut g = HomogeneousForm::zero(case.vars(), degree);
    for f in config.defining_forms() {
        let unit = f.normalized()?;
        g = g.add(&unit.multiply(&unit)?)?;
    }
    let caps: Vec<Vec<f64>> = config.points().iter().map(|p| p.real_coords()).collect();

    let barrier = min_on_sphere_penalized(&g, &caps, CAP_RADIUS, SPHERE_RESTARTS, seed);
    let preimage = min_on_sphere_penalized(&p, &caps, CAP_RADIUS, SPHERE_RESTARTS, seed ^ 0x1);
    let barrier_min = barrier.value.max(f64::MIN_POSITIVE);
    let mut lambda = (-preimage.value / barrier_min).max(0.0) + LIFT_MARGIN;
    let mut last_min = f64::NEG_INFINITY;
    for attempt in 0..LIFT_ATTEMPTS {
        let candidate = p.add_scaled(&g, lambda)?;
        let check = min_on_sphere(
            &candidate,
            SPHERE_RESTARTS,
            seed ^ (0x100 + attempt as u64),
        );
        last_min = check.value;
        if check.value >= -LIFT_SPHERE_TOL {
            let vals = config.evaluate_coords(&candidate)?;
            for (i, (&v, &si)) in vals.iter().zip(s.values()).enumerate() {
                if (v - si).abs() > 1e-9 * s_scale {
                    return Err(Error::Invalid(format!(
                        "lift moved value {i}: {v:.6e} vs {si:.6e}"
                    )));
                }
            }
            return Ok(LiftResult {
                form: candidate,
                lambda,
                barrier_min: barrier.value,
                preimage_min: preimage.value,
                sphere_min: check.value,
            });
        }
        lambda *= 2.0;
    }
    Err(Error::LiftFailed { min: last_min })
}
