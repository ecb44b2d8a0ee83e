//! Superpotentials and the closed-form function identities built from them.
//!
//! A [`Superpotential`] is either an exact real polynomial or a sampled table
//! whose first and second derivatives were produced analytically together
//! with the values. Nothing in this module differentiates samples
//! numerically, except the independent post-construction check in
//! [`build_diagonal_pair`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default guard on `|W₁ − W₂|` for the unequal-case formulas.
pub const DEFAULT_DELTA: f64 = 1e-8;
/// Largest trapezoid step used for the diagonal-pair quadrature.
pub const QUADRATURE_STEP: f64 = 2.5e-4;
/// Pointwise budget for the diagonal-pair differential equation.
pub const PAIR_TOLERANCE: f64 = 1e-6;
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuperpotentialError {
    #[error("W1 and W2 nearly coincide at x = {x} (|W1 - W2| = {gap:e} < {delta:e})")]
    Coincident { x: f64, gap: f64, delta: f64 },
    #[error("sampled superpotential has no sample at x = {0}")]
    NotSampledAt(f64),
    #[error("sample tables have inconsistent lengths")]
    RaggedSamples,
    #[error("H4 must be purely imaginary; its real part is {0}")]
    H4NotImaginary(String),
    #[error("non-finite value in {what} at x = {x}")]
    NonFinite { what: &'static str, x: f64 },
    #[error("diagonal pair violates its defining equation: residual {residual:e} at x = {x}")]
    PairCheckFailed { residual: f64, x: f64 },
    #[error("the unequal-case solution is not polynomial for these superpotentials")]
    NotPolynomial,
    #[error("no evaluation points given")]
    NoPoints,
}

/// Real polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The identity polynomial `x`.
    pub fn x() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative vanishing at `x0`.
    pub fn antiderivative(&self, x0: f64) -> Self {
        let mut coeffs = vec![0.0];
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k + 1) as f64),
        );
        let mut p = Self::new(coeffs);
        let shift = p.eval(x0);
        if shift != 0.0 {
            p = p.sub(&Self::constant(shift));
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(0.0)
                        + other.coeffs.get(k).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Polynomial long division, returning `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Self) -> Option<(Self, Self)> {
        if divisor.is_zero() {
            return None;
        }
        let mut rem = self.coeffs.clone();
        let dd = divisor.degree();
        let lead = *divisor.coeffs.last().unwrap();
        if rem.len() <= dd {
            return Some((Self::zero(), self.clone()));
        }
        let mut quot = vec![0.0; rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
        }
        rem.truncate(dd);
        Some((Self::new(quot), Self::new(rem)))
    }

    /// Quotient when `divisor` divides `self` up to relative rounding.
    pub fn div_exact(&self, divisor: &Self) -> Option<Self> {
        let (q, r) = self.div_rem(divisor)?;
        let scale = self
            .coeffs
            .iter()
            .chain(divisor.coeffs.iter())
            .fold(1.0_f64, |m, c| m.max(c.abs()));
        if r.coeffs.iter().all(|c| c.abs() <= 1e-12 * scale) {
            Some(q)
        } else {
            None
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Values and analytic derivatives of a superpotential at a list of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub points: Vec<f64>,
    pub w: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Superpotential {
    Polynomial(Polynomial),
    Sampled(Samples),
}

impl Superpotential {
    pub fn poly(coeffs: Vec<f64>) -> Self {
        Superpotential::Polynomial(Polynomial::new(coeffs))
    }

    pub fn sampled(
        points: Vec<f64>,
        w: Vec<f64>,
        d1: Vec<f64>,
        d2: Vec<f64>,
    ) -> Result<Self, SuperpotentialError> {
        let n = points.len();
        if w.len() != n || d1.len() != n || d2.len() != n {
            return Err(SuperpotentialError::RaggedSamples);
        }
        Ok(Superpotential::Sampled(Samples { points, w, d1, d2 }))
    }

    pub fn as_polynomial(&self) -> Option<&Polynomial> {
        match self {
            Superpotential::Polynomial(p) => Some(p),
            Superpotential::Sampled(_) => None,
        }
    }

    /// `W`, `W′`, `W″` at `points`. Sampled forms must contain every point.
    pub fn samples(&self, points: &[f64]) -> Result<Samples, SuperpotentialError> {
        match self {
            Superpotential::Polynomial(p) => {
                let d1 = p.derivative();
                let d2 = d1.derivative();
                Ok(Samples {
                    points: points.to_vec(),
                    w: points.iter().map(|&x| p.eval(x)).collect(),
                    d1: points.iter().map(|&x| d1.eval(x)).collect(),
                    d2: points.iter().map(|&x| d2.eval(x)).collect(),
                })
            }
            Superpotential::Sampled(s) => {
                if s.points.as_slice() == points {
                    return Ok(s.clone());
                }
                let mut out = Samples {
                    points: points.to_vec(),
                    w: Vec::with_capacity(points.len()),
                    d1: Vec::with_capacity(points.len()),
                    d2: Vec::with_capacity(points.len()),
                };
                for &x in points {
                    let i = s
                        .points
                        .iter()
                        .position(|&p| p == x)
                        .ok_or(SuperpotentialError::NotSampledAt(x))?;
                    out.w.push(s.w[i]);
                    out.d1.push(s.d1[i]);
                    out.d2.push(s.d2[i]);
                }
                Ok(out)
            }
        }
    }
}

/// Choice of the undetermined antihermitian block `H₄` in the equal case.
/// `H₄ = i·h(x)` with `h` real.
#[derive(Debug, Clone, PartialEq)]
pub enum H4Choice {
    Zero,
    /// `H₄ = i W′`.
    IWPrime,
    /// `H₄ = i·p(x)`.
    Imaginary(Polynomial),
    /// `H₄ = re(x) + i·im(x)`; accepted only when `re ≡ 0`.
    Complex {
        re: Polynomial,
        im: Polynomial,
    },
}

impl H4Choice {
    /// The real function `h` with `H₄ = i·h`, as samples.
    pub fn imaginary_part(&self, w: &Samples) -> Result<Vec<f64>, SuperpotentialError> {
        match self {
            H4Choice::Zero => Ok(vec![0.0; w.len()]),
            H4Choice::IWPrime => Ok(w.d1.clone()),
            H4Choice::Imaginary(p) => Ok(w.points.iter().map(|&x| p.eval(x)).collect()),
            H4Choice::Complex { re, im } => {
                if !re.is_zero() {
                    return Err(SuperpotentialError::H4NotImaginary(format!(
                        "{:?}",
                        re.coeffs()
                    )));
                }
                Ok(w.points.iter().map(|&x| im.eval(x)).collect())
            }
        }
    }

    /// Polynomial `h` when `W` is polynomial.
    pub fn imaginary_polynomial(&self, w: &Polynomial) -> Result<Polynomial, SuperpotentialError> {
        match self {
            H4Choice::Zero => Ok(Polynomial::zero()),
            H4Choice::IWPrime => Ok(w.derivative()),
            H4Choice::Imaginary(p) => Ok(p.clone()),
            H4Choice::Complex { re, im } => {
                if !re.is_zero() {
                    return Err(SuperpotentialError::H4NotImaginary(format!(
                        "{:?}",
                        re.coeffs()
                    )));
                }
                Ok(im.clone())
            }
        }
    }
}

/// Potentials of the equal-superpotential solution (the kinetic `½P²` is
/// implied in `H₁`, `H₂`, `H₃`). `H₄ = i·h4_imag`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualComponents {
    pub points: Vec<f64>,
    pub v12: Vec<f64>,
    pub v3: Vec<f64>,
    pub h4_imag: Vec<f64>,
}

pub fn equal_case_components(
    w: &Superpotential,
    h4: &H4Choice,
    points: &[f64],
) -> Result<EqualComponents, SuperpotentialError> {
    let s = w.samples(points)?;
    let h = h4.imaginary_part(&s)?;
    let v12 = (0..s.len())
        .map(|i| 0.5 * (s.w[i] * s.w[i] - s.d1[i]) + h[i])
        .collect();
    let v3 = (0..s.len())
        .map(|i| 0.5 * (s.w[i] * s.w[i] + s.d1[i]))
        .collect();
    Ok(EqualComponents {
        points: points.to_vec(),
        v12,
        v3,
        h4_imag: h,
    })
}

/// Pointwise unequal-case solution; `H₄ = i·h4_imag`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnequalSolution {
    pub points: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub h4_imag: Vec<f64>,
}

fn unequal_at(a: f64, a1: f64, a2: f64, b: f64, b1: f64, b2: f64) -> (f64, f64, f64) {
    let d = a - b;
    let sq = a * a + b * b;
    let v1 = 0.25 * (sq - (a - 3.0 * b) * (a1 - b1) / d + (a2 - b2) / d);
    let v2 = 0.25 * (sq + (3.0 * a - b) * (a1 - b1) / d + (a2 - b2) / d);
    let h = (2.0 * a * a1 - 2.0 * b * b1 + a2 - b2) / (4.0 * d);
    (v1, v2, h)
}

pub fn solve_unequal_case(
    w1: &Superpotential,
    w2: &Superpotential,
    points: &[f64],
    delta: f64,
) -> Result<UnequalSolution, SuperpotentialError> {
    let s1 = w1.samples(points)?;
    let s2 = w2.samples(points)?;
    let mut sol = UnequalSolution {
        points: points.to_vec(),
        v1: Vec::with_capacity(points.len()),
        v2: Vec::with_capacity(points.len()),
        h4_imag: Vec::with_capacity(points.len()),
    };
    for i in 0..points.len() {
        let gap = (s1.w[i] - s2.w[i]).abs();
        if !(gap >= delta) {
            return Err(SuperpotentialError::Coincident {
                x: points[i],
                gap,
                delta,
            });
        }
        let (v1, v2, h) = unequal_at(s1.w[i], s1.d1[i], s1.d2[i], s2.w[i], s2.d1[i], s2.d2[i]);
        sol.v1.push(v1);
        sol.v2.push(v2);
        sol.h4_imag.push(h);
    }
    Ok(sol)
}

/// Unequal-case solution as polynomials, available when `W₁ − W₂` divides
/// the three numerators exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialUnequalSolution {
    pub v1: Polynomial,
    pub v2: Polynomial,
    pub h4_imag: Polynomial,
}

pub fn solve_unequal_polynomial(
    w1: &Polynomial,
    w2: &Polynomial,
) -> Result<PolynomialUnequalSolution, SuperpotentialError> {
    let d = w1.sub(w2);
    if d.is_zero() {
        return Err(SuperpotentialError::Coincident {
            x: 0.0,
            gap: 0.0,
            delta: DEFAULT_DELTA,
        });
    }
    let (a1, b1) = (w1.derivative(), w2.derivative());
    let (a2, b2) = (a1.derivative(), b1.derivative());
    let dd1 = a1.sub(&b1);
    let dd2 = a2.sub(&b2);
    let sq = w1.mul(w1).add(&w2.mul(w2));
    let n1 = dd2.sub(&w1.sub(&w2.scale(3.0)).mul(&dd1));
    let n2 = dd2.add(&w1.scale(3.0).sub(w2).mul(&dd1));
    let nh = w1
        .mul(&a1)
        .scale(2.0)
        .sub(&w2.mul(&b1).scale(2.0))
        .add(&dd2);
    let q1 = n1.div_exact(&d).ok_or(SuperpotentialError::NotPolynomial)?;
    let q2 = n2.div_exact(&d).ok_or(SuperpotentialError::NotPolynomial)?;
    let qh = nh.div_exact(&d).ok_or(SuperpotentialError::NotPolynomial)?;
    Ok(PolynomialUnequalSolution {
        v1: sq.add(&q1).scale(0.25),
        v2: sq.add(&q2).scale(0.25),
        h4_imag: qh.scale(0.25),
    })
}

/// Maximum pointwise violation of each of the four consistency conditions.
pub fn consistency_residuals(
    w1: &Superpotential,
    w2: &Superpotential,
    sol: &UnequalSolution,
) -> Result<[f64; 4], SuperpotentialError> {
    let s1 = w1.samples(&sol.points)?;
    let s2 = w2.samples(&sol.points)?;
    let mut worst = [0.0_f64; 4];
    for i in 0..sol.points.len() {
        let (a, a1, a2) = (s1.w[i], s1.d1[i], s1.d2[i]);
        let (b, b1, b2) = (s2.w[i], s2.d1[i], s2.d2[i]);
        let (v1, v2, h) = (sol.v1[i], sol.v2[i], sol.h4_imag[i]);
        let r = [
            v1 - h - 0.25 * (a * a + b * b - 3.0 * a1 + b1),
            v1 * a
                - h * b
                - 0.25 * (a * a * a + a * b * b - a * a1 + a * b1 - 2.0 * b * b1 + a2 - b2),
            v2 - h - 0.25 * (a * a + b * b + a1 - 3.0 * b1),
            v2 * b
                - h * a
                - 0.25 * (a * a * b + b * b * b - 2.0 * a * a1 + b * a1 - b * b1 - a2 + b2),
        ];
        for k in 0..4 {
            worst[k] = worst[k].max(r[k].abs());
        }
    }
    Ok(worst)
}

/// Max pointwise `|(W₁² + W₁′) − (W₂² + W₂′)|`.
pub fn ossqm_constraint_residual(
    w1: &Superpotential,
    w2: &Superpotential,
    points: &[f64],
) -> Result<f64, SuperpotentialError> {
    let s1 = w1.samples(points)?;
    let s2 = w2.samples(points)?;
    Ok((0..points.len())
        .map(|i| ((s1.w[i] * s1.w[i] + s1.d1[i]) - (s2.w[i] * s2.w[i] + s2.d1[i])).abs())
        .fold(0.0, f64::max))
}

/// `W₊` with integration constants `C`, `D`; antiderivatives start at `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalPairSpec {
    pub w_plus: Polynomial,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(default)]
    pub base: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPair {
    pub w1: Superpotential,
    pub w2: Superpotential,
    /// Largest finite-difference violation of `W₁′ + W₁² = W₂′ + W₂² + C`.
    pub check_residual: f64,
}

struct PairEvaluator<'a> {
    spec: &'a DiagonalPairSpec,
    phi: Polynomial,
}

impl<'a> PairEvaluator<'a> {
    fn new(spec: &'a DiagonalPairSpec) -> Self {
        Self {
            phi: spec.w_plus.antiderivative(spec.base),
            spec,
        }
    }

    /// `∫_base^x e^{Φ}` by the composite trapezoid rule.
    fn integral(&self, x: f64) -> f64 {
        let x0 = self.spec.base;
        if x == x0 {
            return 0.0;
        }
        let steps = ((x - x0).abs() / QUADRATURE_STEP).ceil().max(1.0) as usize;
        let h = (x - x0) / steps as f64;
        let f = |t: f64| self.phi.eval(t).exp();
        let mut acc = 0.5 * (f(x0) + f(x));
        for k in 1..steps {
            acc += f(x0 + k as f64 * h);
        }
        acc * h
    }

    fn w_minus(&self, x: f64) -> f64 {
        let i = if self.spec.c == 0.0 {
            0.0
        } else {
            self.integral(x)
        };
        (self.spec.c * i + self.spec.d) * (-self.phi.eval(x)).exp()
    }
}

pub fn build_diagonal_pair(
    spec: &DiagonalPairSpec,
    points: &[f64],
) -> Result<DiagonalPair, SuperpotentialError> {
    if points.is_empty() {
        return Err(SuperpotentialError::NoPoints);
    }
    let ev = PairEvaluator::new(spec);
    let wp = &spec.w_plus;
    let wp1 = wp.derivative();
    let wp2 = wp1.derivative();
    let n = points.len();
    let (mut w1, mut w2) = (Samples::empty(n), Samples::empty(n));
    let mut check_residual: f64 = 0.0;
    let mut worst_x = points[0];
    for &x in points {
        let m = ev.w_minus(x);
        if !m.is_finite() {
            return Err(SuperpotentialError::NonFinite { what: "W-", x });
        }
        let (p, p1, p2) = (wp.eval(x), wp1.eval(x), wp2.eval(x));
        let m1 = spec.c - p * m;
        let m2 = -p1 * m - p * m1;
        w1.push(x, 0.5 * (p + m), 0.5 * (p1 + m1), 0.5 * (p2 + m2));
        w2.push(x, 0.5 * (p - m), 0.5 * (p1 - m1), 0.5 * (p2 - m2));

        // Independent check: the ODE W₋′ + W₊W₋ = C with W₋′ differenced
        // from two fresh quadratures.
        let fd = (ev.w_minus(x + FD_STEP) - ev.w_minus(x - FD_STEP)) / (2.0 * FD_STEP);
        let r = (fd + p * m - spec.c).abs();
        if r > check_residual {
            check_residual = r;
            worst_x = x;
        }
    }
    if !(check_residual <= PAIR_TOLERANCE) {
        return Err(SuperpotentialError::PairCheckFailed {
            residual: check_residual,
            x: worst_x,
        });
    }
    Ok(DiagonalPair {
        w1: Superpotential::Sampled(w1),
        w2: Superpotential::Sampled(w2),
        check_residual,
    })
}

impl Samples {
    fn empty(n: usize) -> Self {
        Self {
            points: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            d1: Vec::with_capacity(n),
            d2: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, x: f64, w: f64, d1: f64, d2: f64) {
        self.points.push(x);
        self.w.push(w);
        self.d1.push(d1);
        self.d2.push(d2);
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}
