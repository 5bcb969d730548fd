//! Homogeneous forms, monomial bases, and projective points.
//!
//! Everything downstream works inside H_{n,d}, the space of real forms
//! of degree d in n variables, for the two minimal cases where
//! nonnegativity and sums of squares separate:
//!
//! * case (3,6): ternary sextics, squares of ternary cubics (d = 3,
//!   dim H_{3,3} = 10, dim H_{3,6} = 28);
//! * case (4,4): quaternary quartics, squares of quaternary quadratics
//!   (d = 2, dim H_{4,2} = 10, dim H_{4,4} = 35).
//!
//! Forms are sparse maps from exponent vectors to coefficients and are
//! densified against the graded-lexicographic monomial basis on demand.
//! Points live in complex projective space; a canonical affine
//! representative (largest-modulus coordinate real positive, modulus
//! vector of unit Euclidean norm) makes conjugation symmetry and
//! deduplication exact enough to test.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The two minimal cases where nonnegative forms strictly contain sums of squares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Case {
    /// (n, 2d) = (3, 6): ternary sextics.
    TernarySextic,
    /// (n, 2d) = (4, 4): quaternary quartics.
    QuaternaryQuartic,
}

impl Case {
    /// Number of variables n.
    pub fn vars(self) -> usize {
        match self {
            Case::TernarySextic => 3,
            Case::QuaternaryQuartic => 4,
        }
    }

    /// Half degree d: squares of H_{n,d} live in H_{n,2d}.
    pub fn half_degree(self) -> usize {
        match self {
            Case::TernarySextic => 3,
            Case::QuaternaryQuartic => 2,
        }
    }

    /// Full degree 2d of the square side.
    pub fn full_degree(self) -> usize {
        2 * self.half_degree()
    }

    /// Size s = d^(n-1) of a complete intersection of n-1 generic forms of degree d.
    pub fn intersection_size(self) -> usize {
        self.half_degree().pow(self.vars() as u32 - 1)
    }

    /// dim H_{n,d} (both cases: 10).
    pub fn dim_half(self) -> usize {
        monomial_count(self.vars(), self.half_degree())
    }

    /// dim H_{n,2d} (28 for ternary sextics, 35 for quaternary quartics).
    pub fn dim_full(self) -> usize {
        monomial_count(self.vars(), self.full_degree())
    }

    pub fn parse(s: &str) -> Result<Case> {
        match s.trim() {
            "3,6" => Ok(Case::TernarySextic),
            "4,4" => Ok(Case::QuaternaryQuartic),
            other => Err(Error::Invalid(format!(
                "unknown case {other:?}, expected \"3,6\" or \"4,4\""
            ))),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Case::TernarySextic => write!(f, "3,6"),
            Case::QuaternaryQuartic => write!(f, "4,4"),
        }
    }
}

impl Serialize for Case {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Case {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Case, D::Error> {
        let s = String::deserialize(d)?;
        Case::parse(&s).map_err(D::Error::custom)
    }
}

/// C(n + degree - 1, degree), the number of degree-`degree` monomials in n variables.
pub fn monomial_count(n: usize, degree: usize) -> usize {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..degree {
        num *= (n + i) as u128;
        den *= (i + 1) as u128;
    }
    (num / den) as usize
}

/// Exponent vectors of all degree-`degree` monomials in `n` variables,
/// in graded-lexicographic order with x1 > x2 > ... > xn (within one
/// degree this is descending lexicographic order on exponent vectors).
pub fn monomial_basis(n: usize, degree: usize) -> Vec<Vec<u32>> {
    assert!(n >= 1, "need at least one variable");
    let mut out = Vec::with_capacity(monomial_count(n, degree));
    let mut current = vec![0u32; n];
    fill_basis(n, degree as u32, 0, &mut current, &mut out);
    out
}

fn fill_basis(n: usize, remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        fill_basis(n, remaining - e, pos + 1, current, out);
    }
}

/// A point of complex projective space, stored through an affine representative.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPoint {
    coords: Vec<Complex64>,
}

impl ComplexPoint {
    pub fn new(coords: Vec<Complex64>) -> Result<ComplexPoint> {
        if coords.is_empty() {
            return Err(Error::Invalid("point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
        let p = ComplexPoint { coords };
        if p.norm() == 0.0 {
            return Err(Error::Invalid("zero vector does not represent a projective point".into()));
        }
        Ok(p)
    }

    pub fn from_real(coords: &[f64]) -> Result<ComplexPoint> {
        ComplexPoint::new(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    /// Euclidean norm of the modulus vector.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn conj(&self) -> ComplexPoint {
        ComplexPoint {
            coords: self.coords.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> ComplexPoint {
        ComplexPoint {
            coords: self.coords.iter().map(|c| c * factor).collect(),
        }
    }

    /// Largest imaginary-part modulus relative to the point norm.
    pub fn imag_magnitude(&self) -> f64 {
        let norm = self.norm();
        self.coords.iter().map(|c| c.im.abs()).fold(0.0, f64::max) / norm
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.imag_magnitude() <= tol
    }

    /// Real parts only; meaningful for points that pass `is_real`.
    pub fn real_coords(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.re).collect()
    }

    /// Index of the largest-modulus coordinate, lowest index on ties.
    pub fn dominant_index(&self) -> usize {
        let mut best = 0usize;
        let mut best_norm = self.coords[0].norm_sqr();
        for (i, c) in self.coords.iter().enumerate().skip(1) {
            let n = c.norm_sqr();
            if n > best_norm + best_norm * 1e-15 {
                best = i;
                best_norm = n;
            }
        }
        best
    }

    /// Canonical representative: the largest-modulus coordinate is made
    /// real positive (lowest index breaks ties) and the modulus vector
    /// is scaled to unit Euclidean norm.
    pub fn sphere_normalize(&self) -> ComplexPoint {
        let k = self.dominant_index();
        let phase = self.coords[k] / self.coords[k].norm();
        let scale = 1.0 / self.norm();
        ComplexPoint {
            coords: self.coords.iter().map(|c| c * phase.conj() * scale).collect(),
        }
    }

    /// Hermitian inner product <self, other>.
    pub fn inner(&self, other: &ComplexPoint) -> Complex64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    /// Projective (chordal, scale- and phase-invariant) distance:
    /// the sine of the angle between the two complex lines, computed
    /// as the orthogonal rejection so that distances far below
    /// sqrt(eps) are still resolved.
    pub fn projective_distance(&self, other: &ComplexPoint) -> f64 {
        let sn = self.norm();
        let on = other.norm();
        let proj = self.inner(other) / (sn * on * on);
        let mut rej = 0.0;
        for (a, b) in self.coords.iter().zip(&other.coords) {
            rej += (a / sn - proj * b).norm_sqr();
        }
        rej.sqrt().min(1.0)
    }
}

impl Serialize for ComplexPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = ComplexPointRepr {
            re: self.coords.iter().map(|c| c.re).collect(),
            im: self.coords.iter().map(|c| c.im).collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<ComplexPoint, D::Error> {
        let repr = ComplexPointRepr::deserialize(d)?;
        if repr.re.len() != repr.im.len() {
            return Err(D::Error::custom("re and im arrays differ in length"));
        }
        let coords = repr
            .re
            .iter()
            .zip(&repr.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        ComplexPoint::new(coords).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexPointRepr {
    re: Vec<f64>,
    im: Vec<f64>,
}

/// A real homogeneous form stored as a sparse exponent-vector map.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousForm {
    n: usize,
    degree: usize,
    coeffs: BTreeMap<Vec<u32>, f64>,
}

impl HomogeneousForm {
    /// The zero form of the given shape.
    pub fn zero(n: usize, degree: usize) -> HomogeneousForm {
        HomogeneousForm {
            n,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_terms(n: usize, degree: usize, terms: &[(&[u32], f64)]) -> Result<HomogeneousForm> {
        let mut f = HomogeneousForm::zero(n, degree);
        for (exps, c) in terms {
            f.add_term(exps, *c)?;
        }
        Ok(f)
    }

    /// The single monomial x^exps with coefficient 1.
    pub fn monomial(n: usize, exps: &[u32]) -> Result<HomogeneousForm> {
        let degree = exps.iter().sum::<u32>() as usize;
        let mut f = HomogeneousForm::zero(n, degree);
        f.add_term(exps, 1.0)?;
        Ok(f)
    }

    pub fn add_term(&mut self, exps: &[u32], coeff: f64) -> Result<()> {
        if exps.len() != self.n {
            return Err(Error::Dimension(format!(
                "exponent vector has {} entries, form has {} variables",
                exps.len(),
                self.n
            )));
        }
        if exps.iter().sum::<u32>() as usize != self.degree {
            return Err(Error::Invalid(format!(
                "monomial degree {} does not match form degree {}",
                exps.iter().sum::<u32>(),
                self.degree
            )));
        }
        if !coeff.is_finite() {
            return Err(Error::NonFinite("form coefficient".into()));
        }
        let entry = self.coeffs.entry(exps.to_vec()).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.coeffs.remove(exps);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.coeffs.get(exps).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.coeffs.iter().map(|(e, &c)| (e, c))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scale(&self, factor: f64) -> HomogeneousForm {
        if factor == 0.0 {
            return HomogeneousForm::zero(self.n, self.degree);
        }
        HomogeneousForm {
            n: self.n,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|(e, c)| (e.clone(), c * factor)).collect(),
        }
    }

    /// Scaled to unit coefficient norm; errors on the zero form.
    pub fn normalized(&self) -> Result<HomogeneousForm> {
        let norm = self.coeff_norm();
        if norm == 0.0 {
            return Err(Error::Invalid("cannot normalize the zero form".into()));
        }
        Ok(self.scale(1.0 / norm))
    }

    pub fn add(&self, other: &HomogeneousForm) -> Result<HomogeneousForm> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e, c)?;
        }
        Ok(out)
    }

    /// self + factor * other.
    pub fn add_scaled(&self, other: &HomogeneousForm, factor: f64) -> Result<HomogeneousForm> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e, c * factor)?;
        }
        Ok(out)
    }

    fn check_shape(&self, other: &HomogeneousForm) -> Result<()> {
        if self.n != other.n || self.degree != other.degree {
            return Err(Error::Dimension(format!(
                "form shapes differ: ({}, {}) vs ({}, {})",
                self.n, self.degree, other.n, other.degree
            )));
        }
        Ok(())
    }

    pub fn multiply(&self, other: &HomogeneousForm) -> Result<HomogeneousForm> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "variable counts differ: {} vs {}",
                self.n, other.n
            )));
        }
        let mut out = HomogeneousForm::zero(self.n, self.degree + other.degree);
        let mut exps = vec![0u32; self.n];
        for (ea, ca) in self.terms() {
            for (eb, cb) in other.terms() {
                for i in 0..self.n {
                    exps[i] = ea[i] + eb[i];
                }
                out.add_term(&exps, ca * cb)?;
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, p: &ComplexPoint) -> Result<Complex64> {
        if p.n() != self.n {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, form has {} variables",
                p.n(),
                self.n
            )));
        }
        let coords = p.coords();
        let mut acc = Complex64::new(0.0, 0.0);
        for (exps, c) in self.terms() {
            let mut term = Complex64::new(c, 0.0);
            for (x, &e) in coords.iter().zip(exps.iter()) {
                term *= cpow(*x, e);
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Evaluation at a real point; panics are avoided by the same shape check.
    pub fn evaluate_real(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let mut acc = 0.0;
        for (exps, c) in self.terms() {
            let mut term = c;
            for (xi, &e) in x.iter().zip(exps.iter()) {
                term *= rpow(*xi, e);
            }
            acc += term;
        }
        acc
    }

    /// All n partial derivatives, each a form of degree - 1.
    pub fn gradient(&self) -> Vec<HomogeneousForm> {
        assert!(self.degree >= 1, "gradient of a constant form");
        let mut grads = vec![HomogeneousForm::zero(self.n, self.degree - 1); self.n];
        let mut exps = vec![0u32; self.n];
        for (e, c) in self.terms() {
            for i in 0..self.n {
                if e[i] == 0 {
                    continue;
                }
                exps.copy_from_slice(e);
                exps[i] -= 1;
                grads[i].add_term(&exps, c * e[i] as f64).expect("derivative term");
            }
        }
        grads
    }

    /// Dense coefficient vector against `monomial_basis(n, degree)`.
    pub fn to_dense(&self) -> Vec<f64> {
        let basis = monomial_basis(self.n, self.degree);
        let mut out = vec![0.0; basis.len()];
        for (i, exps) in basis.iter().enumerate() {
            out[i] = self.coeff(exps);
        }
        out
    }

    pub fn from_dense(n: usize, degree: usize, dense: &[f64]) -> Result<HomogeneousForm> {
        let basis = monomial_basis(n, degree);
        if dense.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "dense vector has {} entries, basis has {}",
                dense.len(),
                basis.len()
            )));
        }
        let mut f = HomogeneousForm::zero(n, degree);
        for (exps, &c) in basis.iter().zip(dense.iter()) {
            if c != 0.0 {
                f.add_term(exps, c)?;
            }
        }
        Ok(f)
    }

    /// Linear change of variables: returns g with g(x) = f(Mx), so a
    /// zero q of f corresponds to the zero M^{-1} q of g.
    pub fn compose_linear(&self, m: &crate::numerics::Mat) -> Result<HomogeneousForm> {
        if m.rows() != self.n || m.cols() != self.n {
            return Err(Error::Dimension(format!(
                "substitution matrix is {}x{}, form has {} variables",
                m.rows(),
                m.cols(),
                self.n
            )));
        }
        let replacements: Vec<HomogeneousForm> = (0..self.n)
            .map(|l| {
                let mut lin = HomogeneousForm::zero(self.n, 1);
                let mut exps = vec![0u32; self.n];
                for k in 0..self.n {
                    if m.get(l, k) != 0.0 {
                        exps[k] = 1;
                        lin.add_term(&exps, m.get(l, k))?;
                        exps[k] = 0;
                    }
                }
                Ok(lin)
            })
            .collect::<Result<_>>()?;
        let mut out = HomogeneousForm::zero(self.n, self.degree);
        for (exps, c) in self.terms() {
            let mut acc: Option<HomogeneousForm> = None;
            for (l, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    acc = Some(match acc {
                        None => replacements[l].clone(),
                        Some(a) => a.multiply(&replacements[l])?,
                    });
                }
            }
            let term = acc.expect("positive-degree monomial");
            out = out.add_scaled(&term, c)?;
        }
        Ok(out)
    }
}

/// (x1^2 + ... + xn^2)^d, the form whose sphere restriction is 1.
pub fn sum_of_squares_power(n: usize, d: usize) -> HomogeneousForm {
    let mut r2 = HomogeneousForm::zero(n, 2);
    let mut exps = vec![0u32; n];
    for i in 0..n {
        exps.fill(0);
        exps[i] = 2;
        r2.add_term(&exps, 1.0).expect("square term");
    }
    let mut acc = r2.clone();
    for _ in 1..d {
        acc = acc.multiply(&r2).expect("same variable count");
    }
    if d == 0 {
        return HomogeneousForm::from_terms(n, 0, &[(&vec![0u32; n], 1.0)]).expect("constant");
    }
    acc
}

fn cpow(base: Complex64, exp: u32) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

fn rpow(base: f64, exp: u32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

fn exps_to_key(exps: &[u32]) -> String {
    exps.iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn key_to_exps(key: &str) -> std::result::Result<Vec<u32>, String> {
    key.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|e| format!("bad exponent {part:?}: {e}"))
        })
        .collect()
}

impl Serialize for HomogeneousForm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = FormRepr {
            n: self.n,
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, &c)| (exps_to_key(e), c))
                .collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HomogeneousForm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<HomogeneousForm, D::Error> {
        let repr = FormRepr::deserialize(d)?;
        let mut f = HomogeneousForm::zero(repr.n, repr.degree);
        for (key, c) in &repr.coeffs {
            let exps = key_to_exps(key).map_err(D::Error::custom)?;
            f.add_term(&exps, *c).map_err(D::Error::custom)?;
        }
        Ok(f)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormRepr {
    n: usize,
    degree: usize,
    coeffs: BTreeMap<String, f64>,
}

/// The Motzkin form x^4 y^2 + x^2 y^4 - 3 x^2 y^2 z^2 + z^6, the
/// classical nonnegative ternary sextic that is not a sum of squares.
pub fn motzkin() -> HomogeneousForm {
    HomogeneousForm::from_terms(
        3,
        6,
        &[
            (&[4, 2, 0], 1.0),
            (&[2, 4, 0], 1.0),
            (&[2, 2, 2], -3.0),
            (&[0, 0, 6], 1.0),
        ],
    )
    .expect("motzkin terms")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn monomial_counts_match_binomials() {
        assert_eq!(monomial_count(3, 3), 10);
        assert_eq!(monomial_count(3, 6), 28);
        assert_eq!(monomial_count(4, 2), 10);
        assert_eq!(monomial_count(4, 4), 35);
        assert_eq!(monomial_basis(3, 3).len(), 10);
        assert_eq!(monomial_basis(3, 6).len(), 28);
        assert_eq!(monomial_basis(4, 2).len(), 10);
        assert_eq!(monomial_basis(4, 4).len(), 35);
    }

    #[test]
    fn basis_order_is_frozen() {
        // Graded-lex with x > y > z, written down once by hand.
        let expected = [
            "3,0,0", "2,1,0", "2,0,1", "1,2,0", "1,1,1", "1,0,2", "0,3,0", "0,2,1", "0,1,2",
            "0,0,3",
        ];
        let got: Vec<String> = monomial_basis(3, 3).iter().map(|e| exps_to_key(e)).collect();
        assert_eq!(got, expected);
        for basis in [monomial_basis(3, 6), monomial_basis(4, 4)] {
            for pair in basis.windows(2) {
                assert!(pair[0] > pair[1], "descending lex violated: {:?}", pair);
            }
        }
    }

    #[test]
    fn case_dimensions() {
        assert_eq!(Case::TernarySextic.dim_half(), 10);
        assert_eq!(Case::TernarySextic.dim_full(), 28);
        assert_eq!(Case::TernarySextic.intersection_size(), 9);
        assert_eq!(Case::QuaternaryQuartic.dim_half(), 10);
        assert_eq!(Case::QuaternaryQuartic.dim_full(), 35);
        assert_eq!(Case::QuaternaryQuartic.intersection_size(), 8);
    }

    #[test]
    fn evaluation_fixtures() {
        let f = HomogeneousForm::from_terms(3, 3, &[(&[3, 0, 0], 1.0), (&[1, 0, 2], -1.0)]).unwrap();
        let p = ComplexPoint::from_real(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.evaluate(&p).unwrap(), c(0.0, 0.0));

        let m = motzkin();
        assert_eq!(m.evaluate_real(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(m.evaluate_real(&[1.0, -1.0, 1.0]), 0.0);
        assert!(m.evaluate_real(&[1.0, 1.0, 0.0]) > 0.0);

        let r4 = sum_of_squares_power(4, 2);
        assert_eq!(r4.evaluate_real(&[1.0, 1.0, 1.0, 1.0]), 16.0);
        assert_eq!(r4.degree(), 4);
        assert_eq!(r4.num_terms(), 10);
    }

    #[test]
    fn multiply_fixtures() {
        let x2mw2 =
            HomogeneousForm::from_terms(4, 2, &[(&[2, 0, 0, 0], 1.0), (&[0, 0, 0, 2], -1.0)]).unwrap();
        let sq = x2mw2.multiply(&x2mw2).unwrap();
        assert_eq!(sq.coeff(&[4, 0, 0, 0]), 1.0);
        assert_eq!(sq.coeff(&[2, 0, 0, 2]), -2.0);
        assert_eq!(sq.coeff(&[0, 0, 0, 4]), 1.0);
        assert_eq!(sq.num_terms(), 3);
    }

    #[test]
    fn multiply_is_pointwise_product_on_random_samples() {
        // Ring homomorphism: (f * g)(p) = f(p) g(p) at 100 seeded complex points.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let basis3 = monomial_basis(3, 3);
        for _ in 0..100 {
            let mut f = HomogeneousForm::zero(3, 3);
            let mut g = HomogeneousForm::zero(3, 3);
            for exps in &basis3 {
                f.add_term(exps, rng.gen_range(-2.0..2.0)).unwrap();
                g.add_term(exps, rng.gen_range(-2.0..2.0)).unwrap();
            }
            let p = ComplexPoint::new(
                (0..3)
                    .map(|_| c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
                    .collect(),
            )
            .unwrap();
            let lhs = f.multiply(&g).unwrap().evaluate(&p).unwrap();
            let rhs = f.evaluate(&p).unwrap() * g.evaluate(&p).unwrap();
            let scale = 1.0 + lhs.norm().max(rhs.norm());
            assert!(
                (lhs - rhs).norm() <= 1e-10 * scale,
                "lhs {lhs} rhs {rhs}"
            );
        }
    }

    #[test]
    fn sphere_normalize_fixtures() {
        let p = ComplexPoint::from_real(&[0.0, 0.0, 2.0]).unwrap().sphere_normalize();
        assert_eq!(p.real_coords(), vec![0.0, 0.0, 1.0]);

        let p = ComplexPoint::from_real(&[-1.0, 0.0, 0.0]).unwrap().sphere_normalize();
        assert_eq!(p.real_coords(), vec![1.0, 0.0, 0.0]);

        let p = ComplexPoint::from_real(&[1.0, 1.0, 1.0, 1.0]).unwrap().sphere_normalize();
        for x in p.real_coords() {
            assert!((x - 0.5).abs() < 1e-15);
        }

        // Tie-break on the lowest index: phase comes from coordinate 0.
        let p = ComplexPoint::new(vec![c(0.0, 1.0), c(1.0, 0.0)]).unwrap().sphere_normalize();
        assert!((p.coords()[0] - c(1.0 / 2.0f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((p.coords()[1] - c(0.0, -1.0 / 2.0f64.sqrt())).norm() < 1e-15);

        assert!(ComplexPoint::from_real(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn projective_distance_is_representative_invariant() {
        let p = ComplexPoint::new(vec![c(1.0, 0.2), c(0.0, 1.0), c(2.0, 0.0)]).unwrap();
        let q = p.scale(c(-0.3, 1.7));
        assert!(p.projective_distance(&q) < 1e-12);
        let r = ComplexPoint::from_real(&[1.0, 0.0, 0.0]).unwrap();
        let s = ComplexPoint::from_real(&[0.0, 1.0, 0.0]).unwrap();
        assert!((r.projective_distance(&s) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn form_json_round_trip_matches_fixture() {
        let m = motzkin();
        let json = serde_json::to_string(&m).unwrap();
        let back: HomogeneousForm = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);

        let fixture = r#"{"n":3,"degree":6,"coeffs":{"4,2,0":1.0,"2,4,0":1.0,"2,2,2":-3.0,"0,0,6":1.0}}"#;
        let parsed: HomogeneousForm = serde_json::from_str(fixture).unwrap();
        assert_eq!(parsed, m);

        let bad = r#"{"n":3,"degree":6,"coeffs":{"4,2,0":1.0},"extra":1}"#;
        assert!(serde_json::from_str::<HomogeneousForm>(bad).is_err());

        let wrong_degree = r#"{"n":3,"degree":6,"coeffs":{"1,1,1":1.0}}"#;
        assert!(serde_json::from_str::<HomogeneousForm>(wrong_degree).is_err());
    }

    proptest! {
        #[test]
        fn evaluation_commutes_with_conjugation(
            coords in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
            coeffs in prop::collection::vec(-2.0f64..2.0, 10),
        ) {
            let p = ComplexPoint::new(
                coords.iter().map(|&(re, im)| c(re, im)).collect(),
            );
            prop_assume!(p.is_ok());
            let p = p.unwrap();
            let basis = monomial_basis(3, 3);
            let f = HomogeneousForm::from_dense(3, 3, &coeffs).unwrap();
            let _ = basis;
            let at_conj = f.evaluate(&p.conj()).unwrap();
            let conj_at = f.evaluate(&p).unwrap().conj();
            let scale = 1.0 + at_conj.norm();
            prop_assert!((at_conj - conj_at).norm() <= 1e-12 * scale);
        }

        #[test]
        fn evaluation_is_homogeneous(
            coeffs in prop::collection::vec(-2.0f64..2.0, 10),
            x in prop::collection::vec(-2.0f64..2.0, 3),
            lambda in 0.1f64..3.0,
        ) {
            let f = HomogeneousForm::from_dense(3, 3, &coeffs).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let lhs = f.evaluate_real(&scaled);
            let rhs = lambda.powi(3) * f.evaluate_real(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
