//! Global minimization of a form over the unit sphere.
//!
//! Projected gradient descent with backtracking line search, run from
//! seeded random restarts plus the best point of a fixed 10^4-point
//! low-discrepancy sphere sample (Halton sequence pushed through the
//! inverse normal CDF and normalized).  Descent is monotone, so the
//! reported value is never above the sample minimum.  The objective is
//! normalized to unit coefficient norm before descending and the value
//! rescaled afterwards, which makes the result exactly positively
//! homogeneous in the input form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::forms::HomogeneousForm;
use crate::par;

/// Minimum value and a minimizing unit vector.
#[derive(Clone, Debug)]
pub struct SphereMin {
    pub value: f64,
    pub point: Vec<f64>,
}

const SAMPLE_COUNT: usize = 10_000;
const DESCENT_ITERS: usize = 2_500;

/// Minimize `f` over the unit sphere.
///
/// `restarts` seeded descents are run in addition to one descent from
/// the best sample point; the canonical best (smallest value, then
/// lexicographically smallest point) is returned, so the result does
/// not depend on thread scheduling.
pub fn min_on_sphere(f: &HomogeneousForm, restarts: usize, seed: u64) -> SphereMin {
    let n = f.n();
    assert!(n >= 1);
    let norm = f.coeff_norm();
    if norm == 0.0 {
        let mut point = vec![0.0; n];
        point[0] = 1.0;
        return SphereMin { value: 0.0, point };
    }
    let unit = f.scale(1.0 / norm);
    let grads = unit.gradient();
    let eval = |x: &[f64]| unit.evaluate_real(x);
    let grad = |x: &[f64]| -> Vec<f64> { grads.iter().map(|g| g.evaluate_real(x)).collect() };
    let mut best = sphere_descent_driver(n, restarts, seed, &eval, &grad, |_x| true);
    if f.degree() % 2 == 0 {
        canonical_sign(&mut best.point);
    }
    best.value *= norm;
    best
}

/// Minimize `f` over the unit sphere while steering away from spherical
/// caps of chordal radius `cap_radius` around `caps` and their
/// antipodes.  The returned value is the raw value of `f` at the final
/// point; sample-floor points inside a cap are skipped.  This is the
/// heuristic used to estimate minima away from a finite point set.
pub fn min_on_sphere_penalized(
    f: &HomogeneousForm,
    caps: &[Vec<f64>],
    cap_radius: f64,
    restarts: usize,
    seed: u64,
) -> SphereMin {
    let n = f.n();
    let norm = f.coeff_norm().max(f64::MIN_POSITIVE);
    let unit = f.scale(1.0 / norm);
    let grads = unit.gradient();
    let caps: Vec<Vec<f64>> = caps
        .iter()
        .map(|c| {
            let nm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            c.iter().map(|v| v / nm).collect()
        })
        .collect();
    // Chordal radius r corresponds to |<x, w>| >= cos(theta) with
    // 2 sin(theta/2) = r; for small r, theta ~ r.
    let theta = 2.0 * (cap_radius / 2.0).asin();
    let t0 = theta.cos();
    let penalty = 1e4;
    let outside = |x: &[f64]| -> bool {
        caps.iter().all(|w| {
            let c: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            c.abs() < t0
        })
    };
    let eval = |x: &[f64]| -> f64 {
        let mut v = unit.evaluate_real(x);
        for w in &caps {
            let c: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            let excess = c.abs() - t0;
            if excess > 0.0 {
                v += penalty * excess * excess;
            }
        }
        v
    };
    let grad = |x: &[f64]| -> Vec<f64> {
        let mut g: Vec<f64> = grads.iter().map(|gf| gf.evaluate_real(x)).collect();
        for w in &caps {
            let c: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            let excess = c.abs() - t0;
            if excess > 0.0 {
                let factor = 2.0 * penalty * excess * c.signum();
                for (gi, wi) in g.iter_mut().zip(w) {
                    *gi += factor * wi;
                }
            }
        }
        g
    };
    let best = sphere_descent_driver(n, restarts, seed, &eval, &grad, outside);
    SphereMin {
        value: unit.evaluate_real(&best.point) * norm,
        point: best.point,
    }
}

fn sphere_descent_driver(
    n: usize,
    restarts: usize,
    seed: u64,
    eval: &(impl Fn(&[f64]) -> f64 + Sync),
    grad: &(impl Fn(&[f64]) -> Vec<f64> + Sync),
    sample_filter: impl Fn(&[f64]) -> bool + Sync,
) -> SphereMin {
    // Sample floor: best admissible point of the fixed quasi-random sample.
    let sample = sphere_sample(n);
    let chunk = 250usize;
    let chunks = sample.len().div_ceil(chunk);
    let chunk_best = par::map_indexed(chunks, |ci| {
        let lo = ci * chunk;
        let hi = (lo + chunk).min(sample.len());
        let mut best: Option<(f64, usize)> = None;
        for i in lo..hi {
            let x = &sample[i];
            if !sample_filter(x) {
                continue;
            }
            let v = eval(x);
            if best.map_or(true, |(bv, _)| v < bv) {
                best = Some((v, i));
            }
        }
        best
    });
    let sample_best = chunk_best
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // Candidate descents: seeded restarts plus the sample best.
    let total = restarts + 1;
    let candidates = par::map_indexed(total, |idx| {
        let x0 = if idx < restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 + 1);
            random_unit(n, &mut rng)
        } else {
            match &sample_best {
                Some((_, i)) => sample[*i].clone(),
                None => {
                    let mut e = vec![0.0; n];
                    e[0] = 1.0;
                    e
                }
            }
        };
        descend(eval, grad, x0)
    });

    let mut best = candidates[0].clone();
    for cand in candidates.into_iter().skip(1) {
        if cand.0.total_cmp(&best.0).then_with(|| lex_cmp(&cand.1, &best.1)) == std::cmp::Ordering::Less {
            best = cand;
        }
    }
    SphereMin {
        value: best.0,
        point: best.1,
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.total_cmp(y);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

fn descend(
    eval: &impl Fn(&[f64]) -> f64,
    grad: &impl Fn(&[f64]) -> Vec<f64>,
    x0: Vec<f64>,
) -> (f64, Vec<f64>) {
    let mut x = x0;
    normalize(&mut x);
    let mut val = eval(&x);
    let mut step = 1.0f64;
    for _ in 0..DESCENT_ITERS {
        let g = grad(&x);
        let radial: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        let gt: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| gi - radial * xi).collect();
        let gn = gt.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn <= 1e-14 * (1.0 + val.abs()) {
            break;
        }
        step = (step * 4.0).min(1e2);
        let mut improved = false;
        while step >= 1e-18 {
            let mut cand: Vec<f64> = x.iter().zip(&gt).map(|(xi, gi)| xi - step * gi).collect();
            normalize(&mut cand);
            let cv = eval(&cand);
            if cv <= val - 1e-4 * step * gn * gn {
                x = cand;
                val = cv;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (val, x)
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        x[0] = 1.0;
        return;
    }
    for v in x.iter_mut() {
        *v /= n;
    }
}

fn canonical_sign(x: &mut [f64]) {
    let mut dom = 0usize;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[dom].abs() + x[dom].abs() * 1e-15 {
            dom = i;
        }
    }
    if x[dom] < 0.0 {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Fixed low-discrepancy sphere sample: Halton points in the unit cube
/// mapped through the inverse normal CDF and normalized.
fn sphere_sample(n: usize) -> Vec<Vec<f64>> {
    const BASES: [u32; 6] = [2, 3, 5, 7, 11, 13];
    assert!(n <= BASES.len(), "sphere sample supports up to 6 dimensions");
    let mut out = Vec::with_capacity(SAMPLE_COUNT);
    let mut idx = 1u32;
    while out.len() < SAMPLE_COUNT {
        let mut v: Vec<f64> = (0..n)
            .map(|d| inverse_normal_cdf(radical_inverse(idx, BASES[d])))
            .collect();
        idx += 1;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        out.push(v);
    }
    out
}

fn radical_inverse(mut i: u32, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * inv;
        i /= base;
        inv /= b;
    }
    r
}

/// Acklam's rational approximation to the standard normal quantile
/// (relative error below 1.2e-9, ample for sampling).
fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
