//! Deterministic fixtures and seeded random configuration generators.
//!
//! The grid and cube fixtures are the two hand-checkable complete
//! intersections: the 3x3 affine grid {-1,0,1}^2 for case (3,6) and
//! the cube vertices {-1,1}^3 for case (4,4), both with raw affine
//! representatives (last coordinate 1).  The one-pair variants
//! perturb one defining form by a parameter tau large enough to push
//! a single root pair off the real locus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{complete_intersection, gaussian, random_rotation, PointConfiguration};
use crate::error::{Error, Result};
use crate::forms::{Case, ComplexPoint, HomogeneousForm};

/// Defining forms of the 3x3 grid: x^3 - x z^2 and y^3 - y z^2.
pub fn grid_forms() -> Vec<HomogeneousForm> {
    let f1 = HomogeneousForm::from_terms(3, 3, &[(&[3, 0, 0], 1.0), (&[1, 0, 2], -1.0)])
        .expect("grid form");
    let f2 = HomogeneousForm::from_terms(3, 3, &[(&[0, 3, 0], 1.0), (&[0, 1, 2], -1.0)])
        .expect("grid form");
    vec![f1, f2]
}

/// The nine grid points (a, b, 1), a, b in {-1, 0, 1}, raw representatives.
pub fn grid_points() -> Vec<ComplexPoint> {
    let mut pts = Vec::with_capacity(9);
    for a in [-1.0, 0.0, 1.0] {
        for b in [-1.0, 0.0, 1.0] {
            pts.push(ComplexPoint::from_real(&[a, b, 1.0]).expect("grid point"));
        }
    }
    pts
}

pub fn grid_config() -> Result<PointConfiguration> {
    PointConfiguration::new(Case::TernarySextic, grid_points(), grid_forms())
}

/// Defining forms of the cube: x_i^2 - w^2 for i = 1, 2, 3.
pub fn cube_forms() -> Vec<HomogeneousForm> {
    (0..3)
        .map(|i| {
            let mut exps = [0u32; 4];
            exps[i] = 2;
            HomogeneousForm::from_terms(4, 2, &[(&exps, 1.0), (&[0, 0, 0, 2], -1.0)])
                .expect("cube form")
        })
        .collect()
}

/// The eight cube vertices (+-1, +-1, +-1, 1), raw representatives.
pub fn cube_points() -> Vec<ComplexPoint> {
    let mut pts = Vec::with_capacity(8);
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            for c in [-1.0, 1.0] {
                pts.push(ComplexPoint::from_real(&[a, b, c, 1.0]).expect("cube point"));
            }
        }
    }
    pts
}

pub fn cube_config() -> Result<PointConfiguration> {
    PointConfiguration::new(Case::QuaternaryQuartic, cube_points(), cube_forms())
}

/// Grid system with the second form perturbed so the roots over x = 1
/// become one real point and one conjugate pair: y^3 - y z^2 +
/// (tau/2)(x^2 z + x z^2).  Requires tau > 2 / (3 sqrt 3).
pub fn one_pair_grid_forms(tau: f64) -> Vec<HomogeneousForm> {
    let f1 = HomogeneousForm::from_terms(3, 3, &[(&[3, 0, 0], 1.0), (&[1, 0, 2], -1.0)])
        .expect("grid form");
    let f2 = HomogeneousForm::from_terms(
        3,
        3,
        &[
            (&[0, 3, 0], 1.0),
            (&[0, 1, 2], -1.0),
            (&[2, 0, 1], tau / 2.0),
            (&[1, 0, 2], tau / 2.0),
        ],
    )
    .expect("perturbed grid form");
    vec![f1, f2]
}

/// Cube system with the third quadric tilted so the fiber over
/// x = y = 1 becomes a conjugate pair: z^2 - w^2 + (tau/4)(x+w)(y+w).
/// Requires tau > 1.
pub fn one_pair_cube_forms(tau: f64) -> Vec<HomogeneousForm> {
    let mut forms = cube_forms();
    let t = tau / 4.0;
    forms[2] = HomogeneousForm::from_terms(
        4,
        2,
        &[
            (&[0, 0, 2, 0], 1.0),
            (&[0, 0, 0, 2], t - 1.0),
            (&[1, 1, 0, 0], t),
            (&[1, 0, 0, 1], t),
            (&[0, 1, 0, 1], t),
        ],
    )
    .expect("tilted cube form");
    forms
}

/// Structured one-pair configuration on the fixture representatives
/// (no rotation); deterministic given tau.
pub fn one_pair_config(case: Case, tau: f64, seed: u64) -> Result<PointConfiguration> {
    let forms = match case {
        Case::TernarySextic => one_pair_grid_forms(tau),
        Case::QuaternaryQuartic => one_pair_cube_forms(tau),
    };
    let config = complete_intersection(case, &forms, seed)?;
    if config.pair_count() != 1 {
        return Err(Error::NotOnePair {
            pairs: config.pair_count(),
        });
    }
    Ok(config)
}

fn random_linear(n: usize, rng: &mut ChaCha8Rng) -> HomogeneousForm {
    loop {
        let coeffs: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        let mut f = HomogeneousForm::zero(n, 1);
        let mut exps = vec![0u32; n];
        for (k, &c) in coeffs.iter().enumerate() {
            exps[k] = 1;
            f.add_term(&exps, c / norm).expect("linear term");
            exps[k] = 0;
        }
        return f;
    }
}

/// A random form of the case's half degree with Gaussian coefficients,
/// coefficient norm 1.
pub fn random_half_form(case: Case, rng: &mut ChaCha8Rng) -> HomogeneousForm {
    let n = case.vars();
    let d = case.half_degree();
    loop {
        let dense: Vec<f64> = (0..crate::forms::monomial_count(n, d))
            .map(|_| gaussian(rng))
            .collect();
        let f = HomogeneousForm::from_dense(n, d, &dense).expect("dense shape");
        if let Ok(nf) = f.normalized() {
            return nf;
        }
    }
}

/// A random fully real configuration: each defining form is a product
/// of random linear forms, so every intersection point is real.
/// Retries with fresh draws until the intersection is transverse.
pub fn random_fully_real_config(case: Case, seed: u64) -> Result<PointConfiguration> {
    let n = case.vars();
    let d = case.half_degree();
    let mut last_err = Error::NoTransverseRoots;
    for attempt in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x4652 + attempt);
        let forms: Vec<HomogeneousForm> = (0..n - 1)
            .map(|_| {
                let mut f = random_linear(n, &mut rng);
                for _ in 1..d {
                    f = f.multiply(&random_linear(n, &mut rng)).expect("same vars");
                }
                f
            })
            .collect();
        match complete_intersection(case, &forms, seed.wrapping_add(attempt)) {
            Ok(config) => {
                if config.is_fully_real() {
                    return Ok(config);
                }
                last_err = Error::Invalid("product system produced complex roots".into());
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// A random configuration with exactly one conjugate pair: the fixture
/// one-pair system with a random tau, composed with a random rotation.
pub fn random_one_pair_config(case: Case, seed: u64) -> Result<PointConfiguration> {
    let n = case.vars();
    let mut last_err = Error::NoTransverseRoots;
    for attempt in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x4F50 + attempt);
        let tau = match case {
            Case::TernarySextic => 0.45 + 0.55 * rng.gen::<f64>(),
            Case::QuaternaryQuartic => 1.2 + 0.6 * rng.gen::<f64>(),
        };
        let rotation = random_rotation(n, &mut rng);
        let base = match case {
            Case::TernarySextic => one_pair_grid_forms(tau),
            Case::QuaternaryQuartic => one_pair_cube_forms(tau),
        };
        let forms: Vec<HomogeneousForm> = base
            .iter()
            .map(|f| f.compose_linear(&rotation))
            .collect::<Result<_>>()?;
        match complete_intersection(case, &forms, seed.wrapping_add(0x1000 + attempt)) {
            Ok(config) => {
                if config.pair_count() == 1 {
                    return Ok(config);
                }
                last_err = Error::NotOnePair {
                    pairs: config.pair_count(),
                };
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// A random real point on the unit sphere.
pub fn random_sphere_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}
