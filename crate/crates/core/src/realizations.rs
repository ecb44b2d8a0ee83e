//! Assembly of `(Q, Q†, ℋ)` triples as block operators, together with the
//! fixed 3×3 matrices (pseudofermions, orthofermions, the odd matrices
//! `𝒜`, `ℬ`, and the unitaries `U₁ … U₄`).

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockAlgebra, FockError, StructureFunction, TrustedWindow, DEFAULT_MARGIN};
use crate::grid::{self, Grid, GridError, GridOperatorSet};
use crate::linalg::{lift_scalar, BlockOperator, LinalgError, OperatorMatrix, C64, I, ONE, ZERO};
use crate::superpotential::{
    self, equal_case_components, solve_unequal_case, solve_unequal_polynomial, H4Choice,
    Polynomial, Superpotential, SuperpotentialError, DEFAULT_DELTA,
};

#[derive(Debug, Error)]
pub enum RealizationError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Superpotential(#[from] SuperpotentialError),
    #[error("omega must be positive, got {0}")]
    NonPositiveOmega(f64),
    #[error("coupling constant c must be positive, got {0}")]
    NonPositiveCoupling(f64),
    #[error("this construction needs the standard structure function F(n) = n")]
    NeedsStandard,
    #[error("{0} must be a polynomial in the Fock representation")]
    NeedsPolynomial(&'static str),
    #[error("modulation table has no entry for n = {0}")]
    ModulationRange(i64),
    #[error("normalization violated: sum of |coefficient|^2 = {got}, expected {expected}")]
    Normalization { got: f64, expected: f64 },
    #[error("order must be at least 2, got {0}")]
    OrderTooSmall(usize),
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("operation needs a Fock-space bundle")]
    NotFock,
    #[error("superpotential constraint (W1^2 + W1') = (W2^2 + W2') violated: residual {0:e}")]
    ConstraintViolated(f64),
    #[error("component index mu must be 0, 1 or 2, got {0}")]
    BadComponent(usize),
}

// ---------------------------------------------------------------------------
// Fixed matrices
// ---------------------------------------------------------------------------

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pseudofermion annihilation matrix `b`.
pub fn pseudofermion_b() -> OperatorMatrix {
    OperatorMatrix::from_rows(&[
        vec![ZERO, ZERO, c(0.5, 0.5)],
        vec![ZERO, ZERO, c(-0.5, 0.5)],
        vec![ZERO, ZERO, ZERO],
    ])
}

/// The odd matrix `𝒜`.
pub fn a_cal() -> OperatorMatrix {
    let s = 0.5 * FRAC_1_SQRT_2;
    OperatorMatrix::from_rows(&[
        vec![ZERO, ZERO, c(s, s)],
        vec![ZERO, ZERO, c(-s, s)],
        vec![c(s, -s), c(-s, -s), ZERO],
    ])
}

/// The odd matrix `ℬ`.
pub fn b_cal() -> OperatorMatrix {
    let s = 0.5 * FRAC_1_SQRT_2;
    OperatorMatrix::from_rows(&[
        vec![ZERO, ZERO, c(s, -s)],
        vec![ZERO, ZERO, c(s, s)],
        vec![c(s, s), c(s, -s), ZERO],
    ])
}

/// Unitary diagonalizing the equal-superpotential Hamiltonian with `H₄ = iW′`.
pub fn u1() -> OperatorMatrix {
    OperatorMatrix::from_rows(&[
        vec![c(0.5, -0.5), c(-0.5, -0.5), ZERO],
        vec![ZERO, ZERO, ONE],
        vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2), ZERO],
    ])
}

/// Permutation exchanging the last two components.
pub fn u2() -> OperatorMatrix {
    OperatorMatrix::from_real_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![0.0, 1.0, 0.0],
    ])
}

/// Cyclic permutation relating orthofermion and pseudofermion layouts.
pub fn u3() -> OperatorMatrix {
    OperatorMatrix::from_real_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
    ])
}

pub fn s3() -> OperatorMatrix {
    OperatorMatrix::from_real_diagonal(&[1.0, 0.0, -1.0])
}

/// `Σ₃ = S₃ ⊕ S₃`.
pub fn sigma3() -> OperatorMatrix {
    OperatorMatrix::from_real_diagonal(&[1.0, 0.0, -1.0, 1.0, 0.0, -1.0])
}

/// Order-`p` orthofermion annihilators `c_α = |0⟩⟨α|`, `α = 1 … p`, on
/// `p + 1` states.
pub fn orthofermions(p: usize) -> Vec<OperatorMatrix> {
    (1..=p)
        .map(|alpha| OperatorMatrix::unit(p + 1, 0, alpha))
        .collect()
}

/// `b̃ = Σ ξ_α c_α†` and its adjoint.
pub fn build_order_p_combination(
    p: usize,
    xi: &[C64],
) -> Result<(OperatorMatrix, OperatorMatrix), RealizationError> {
    if p < 2 {
        return Err(RealizationError::OrderTooSmall(p));
    }
    if xi.len() != p {
        return Err(RealizationError::CoefficientCount {
            expected: p,
            got: xi.len(),
        });
    }
    check_normalization(xi, 1.0)?;
    let mut b = OperatorMatrix::zeros(p + 1);
    for (k, ci) in orthofermions(p).iter().enumerate() {
        b = &b + &ci.adjoint().scale(xi[k]);
    }
    let b_dag = b.adjoint();
    Ok((b, b_dag))
}

fn check_normalization(coeffs: &[C64], expected: f64) -> Result<(), RealizationError> {
    let got: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    if (got - expected).abs() > 1e-12 * expected.max(1.0) {
        return Err(RealizationError::Normalization { got, expected });
    }
    Ok(())
}

/// `Σ ζ_α Q_α†` with `Σ|ζ_α|² = 2c²`.
pub fn combine_charges(
    charges: &[BlockOperator],
    zeta: &[C64],
    c: f64,
) -> Result<BlockOperator, RealizationError> {
    if charges.len() != zeta.len() {
        return Err(RealizationError::CoefficientCount {
            expected: charges.len(),
            got: zeta.len(),
        });
    }
    check_normalization(zeta, 2.0 * c * c)?;
    let first = charges.first().ok_or(RealizationError::CoefficientCount {
        expected: 1,
        got: 0,
    })?;
    let mut out = BlockOperator::zeros(first.blocks(), first.inner_dim());
    for (q, z) in charges.iter().zip(zeta) {
        out = out.try_add(&q.adjoint().scale(*z))?;
    }
    Ok(out)
}

/// Block unitary built from the residue-class projectors:
/// block `(μ, ν)` is `P_{μ−ν}`.
pub fn u4(alg: &FockAlgebra) -> BlockOperator {
    let g = alg.grading();
    let mut u = BlockOperator::zeros(3, alg.dim());
    for mu in 0..3 {
        for nu in 0..3 {
            u.set(mu, nu, g.p(mu + 3 - nu).clone());
        }
    }
    u
}

// ---------------------------------------------------------------------------
// Bundles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum Space {
    Fock { window: TrustedWindow },
    Grid { grid: Grid },
}

#[derive(Debug, Clone)]
pub struct RealizationBundle {
    pub name: String,
    pub q: BlockOperator,
    pub q_dag: BlockOperator,
    pub h: BlockOperator,
    pub c: f64,
    pub space: Space,
}

impl RealizationBundle {
    /// Assembles a bundle with `Q† = adjoint(Q)`.
    pub fn new(
        name: impl Into<String>,
        q: BlockOperator,
        h: BlockOperator,
        c: f64,
        space: Space,
    ) -> Result<Self, RealizationError> {
        if !(c > 0.0) {
            return Err(RealizationError::NonPositiveCoupling(c));
        }
        if q.blocks() != h.blocks() || q.inner_dim() != h.inner_dim() {
            return Err(LinalgError::BlockLayout(format!(
                "charge has {}x{} blocks of dim {}, Hamiltonian {}x{} of dim {}",
                q.blocks(),
                q.blocks(),
                q.inner_dim(),
                h.blocks(),
                h.blocks(),
                h.inner_dim()
            ))
            .into());
        }
        let q_dag = q.adjoint();
        Ok(Self {
            name: name.into(),
            q,
            q_dag,
            h,
            c,
            space,
        })
    }

    pub fn window(&self) -> Option<&TrustedWindow> {
        match &self.space {
            Space::Fock { window } => Some(window),
            Space::Grid { .. } => None,
        }
    }

    pub fn grid(&self) -> Option<&Grid> {
        match &self.space {
            Space::Grid { grid } => Some(grid),
            Space::Fock { .. } => None,
        }
    }

    /// Same bundle with every operator conjugated by the 3×3 unitary `u ⊗ I`.
    pub fn conjugated(&self, u: &OperatorMatrix, name: &str) -> Result<Self, RealizationError> {
        let big = lift_scalar(u, self.q.inner_dim());
        self.conjugated_by_blocks(&big, name)
    }

    fn conjugated_by_blocks(
        &self,
        u: &BlockOperator,
        name: &str,
    ) -> Result<Self, RealizationError> {
        let u_dag = u.adjoint();
        let conj = |m: &BlockOperator| -> Result<BlockOperator, LinalgError> {
            u.try_matmul(m)?.try_matmul(&u_dag)
        };
        Ok(Self {
            name: name.to_string(),
            q: conj(&self.q)?,
            q_dag: conj(&self.q_dag)?,
            h: conj(&self.h)?,
            c: self.c,
            space: self.space.clone(),
        })
    }
}

/// Modulating function of `N` for the deformed-oscillator realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulationFunction {
    Poly { coeffs: Vec<f64> },
    Table { values: Vec<f64> },
}

impl ModulationFunction {
    pub fn constant(v: f64) -> Self {
        ModulationFunction::Poly { coeffs: vec![v] }
    }

    pub fn eval(&self, n: i64) -> Result<f64, RealizationError> {
        match self {
            ModulationFunction::Poly { coeffs } => {
                Ok(coeffs.iter().rev().fold(0.0, |acc, &c| acc * n as f64 + c))
            }
            ModulationFunction::Table { values } => usize::try_from(n)
                .ok()
                .and_then(|i| values.get(i).copied())
                .ok_or(RealizationError::ModulationRange(n)),
        }
    }

    /// `diag(g(0 + shift), …, g(dim − 1 + shift))`.
    pub fn diagonal(&self, dim: usize, shift: i64) -> Result<OperatorMatrix, RealizationError> {
        let vals = (0..dim as i64)
            .map(|n| self.eval(n + shift))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OperatorMatrix::from_real_diagonal(&vals))
    }
}

// ---------------------------------------------------------------------------
// Boson charge algebra
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Sec2Charges {
    pub q1: BlockOperator,
    pub q2: BlockOperator,
    pub h: BlockOperator,
    pub omega: f64,
    pub window: TrustedWindow,
}

impl Sec2Charges {
    /// `c(Q₁ − iQ₂)`.
    pub fn pseudosupercharge(&self, c: f64) -> Result<BlockOperator, LinalgError> {
        Ok(self.q1.try_sub(&self.q2.scale(I))?.scale_real(c))
    }

    /// `ω[½{a, a†} + ½ diag(−1, −1, 1)]`, the Hamiltonian for which the
    /// charge relations hold with the given `𝒜`, `ℬ`. It differs from `h` by
    /// `ω diag(0, 1, 1)`.
    pub fn consistent_hamiltonian(&self) -> Result<BlockOperator, LinalgError> {
        let d = self.h.inner_dim();
        let shift = BlockOperator::diagonal(
            [0.0, 1.0, 1.0]
                .iter()
                .map(|&s| OperatorMatrix::identity(d).scale_real(s * self.omega))
                .collect(),
        )?;
        self.h.try_sub(&shift)
    }
}

pub fn build_sec2_charges(
    alg: &FockAlgebra,
    omega: f64,
    margin: usize,
) -> Result<Sec2Charges, RealizationError> {
    if !(omega > 0.0) {
        return Err(RealizationError::NonPositiveOmega(omega));
    }
    if alg.structure() != &StructureFunction::Standard {
        return Err(RealizationError::NeedsStandard);
    }
    let d = alg.dim();
    let window = TrustedWindow::new(d, margin)?;
    let s = (omega / 2.0).sqrt();
    let pi1 = (&alg.a + &alg.a_dag).scale_real(s);
    let pi2 = (&alg.a - &alg.a_dag).scale(C64::new(0.0, -s));
    let (ac, bc) = (a_cal(), b_cal());
    let q1 = BlockOperator::kron(&ac, &pi1).try_add(&BlockOperator::kron(&bc, &pi2))?;
    let q2 = BlockOperator::kron(&bc, &pi1)
        .scale_real(-1.0)
        .try_add(&BlockOperator::kron(&ac, &pi2))?;
    // ½{a, a†} = ½(F(N) + F(N+1)), built exactly without the truncation corner.
    let anti = (&alg.f_of_n(0)? + &alg.f_of_n(1)?).scale_real(0.5);
    let shifts = [-0.5, 0.5, 1.5];
    let h = BlockOperator::diagonal(
        shifts
            .iter()
            .map(|&s| (&anti + &OperatorMatrix::identity(d).scale_real(s)).scale_real(omega))
            .collect(),
    )?;
    Ok(Sec2Charges {
        q1,
        q2,
        h,
        omega,
        window,
    })
}

// ---------------------------------------------------------------------------
// Position-space operator sources
// ---------------------------------------------------------------------------

/// `x`, `P`, `P²` on a truncated oscillator basis. Polynomials in `x` are
/// evaluated on a padded basis and then truncated, so every returned matrix
/// is the exact truncation of the corresponding infinite matrix.
#[derive(Debug, Clone)]
pub struct FockPosition {
    dim: usize,
    padded: usize,
    x: OperatorMatrix,
    p: OperatorMatrix,
}

impl FockPosition {
    pub fn new(dim: usize, max_degree: usize) -> Result<Self, RealizationError> {
        let padded = dim + 2 * max_degree.max(1) + 4;
        let alg = FockAlgebra::standard(padded)?;
        let x = (&alg.a + &alg.a_dag).scale_real(FRAC_1_SQRT_2);
        let p = (&alg.a_dag - &alg.a).scale(C64::new(0.0, FRAC_1_SQRT_2));
        Ok(Self { dim, padded, x, p })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self) -> OperatorMatrix {
        self.x.leading(self.dim)
    }

    pub fn p(&self) -> OperatorMatrix {
        self.p.leading(self.dim)
    }

    pub fn kinetic(&self) -> OperatorMatrix {
        (&self.p * &self.p).leading(self.dim)
    }

    pub fn poly(&self, p: &Polynomial) -> OperatorMatrix {
        let mut acc = OperatorMatrix::zeros(self.padded);
        for &coef in p.coeffs().iter().rev() {
            acc = &(&acc * &self.x) + &OperatorMatrix::identity(self.padded).scale_real(coef);
        }
        acc.leading(self.dim)
    }
}

/// Basis in which a superpotential realization is assembled.
#[derive(Debug, Clone)]
pub enum Representation {
    Fock { dim: usize, margin: Option<usize> },
    Grid(Grid),
}

enum Source {
    Fock(FockPosition),
    Grid(GridOperatorSet),
}

/// A real function of `x`, polynomial or sampled on the grid nodes.
enum ScalarFn {
    Poly(Polynomial),
    Values(Vec<f64>),
}

impl Source {
    fn p(&self) -> OperatorMatrix {
        match self {
            Source::Fock(f) => f.p(),
            Source::Grid(g) => g.p.clone(),
        }
    }

    fn kinetic(&self) -> OperatorMatrix {
        match self {
            Source::Fock(f) => f.kinetic(),
            Source::Grid(g) => g.kinetic.clone(),
        }
    }

    fn op(&self, f: &ScalarFn) -> Result<OperatorMatrix, RealizationError> {
        match (self, f) {
            (Source::Fock(fp), ScalarFn::Poly(p)) => Ok(fp.poly(p)),
            (Source::Fock(_), ScalarFn::Values(_)) => {
                Err(RealizationError::NeedsPolynomial("superpotential"))
            }
            (Source::Grid(g), ScalarFn::Poly(p)) => {
                Ok(grid::multiplication_operator(&g.grid, |x| p.eval(x))?)
            }
            (Source::Grid(g), ScalarFn::Values(v)) => Ok(grid::diagonal_from_samples(&g.grid, v)?),
        }
    }
}

/// `½P² + V` for the kinetic operator of `source`.
fn schrodinger(src: &Source, v: &ScalarFn) -> Result<OperatorMatrix, RealizationError> {
    Ok(&src.kinetic().scale_real(0.5) + &src.op(v)?)
}

struct Potentials {
    v1: ScalarFn,
    v2: ScalarFn,
    v3: ScalarFn,
    h4: ScalarFn,
}

fn poly_of<'a>(
    w: &'a Superpotential,
    what: &'static str,
) -> Result<&'a Polynomial, RealizationError> {
    w.as_polynomial()
        .ok_or(RealizationError::NeedsPolynomial(what))
}

fn fock_potentials(
    w1: &Superpotential,
    w2: &Superpotential,
    h4: &H4Choice,
) -> Result<(Potentials, usize), RealizationError> {
    let p1 = poly_of(w1, "W1")?;
    let p2 = poly_of(w2, "W2")?;
    let (d1, d2) = (p1.derivative(), p2.derivative());
    let v3 = p1.mul(p1).add(&p2.mul(p2)).add(&d1).add(&d2).scale(0.25);
    let pots = if p1 == p2 {
        let h = h4.imaginary_polynomial(p1)?;
        let v12 = p1.mul(p1).sub(&d1).scale(0.5).add(&h);
        Potentials {
            v1: ScalarFn::Poly(v12.clone()),
            v2: ScalarFn::Poly(v12),
            v3: ScalarFn::Poly(v3),
            h4: ScalarFn::Poly(h),
        }
    } else {
        let s = solve_unequal_polynomial(p1, p2)?;
        Potentials {
            v1: ScalarFn::Poly(s.v1),
            v2: ScalarFn::Poly(s.v2),
            v3: ScalarFn::Poly(v3),
            h4: ScalarFn::Poly(s.h4_imag),
        }
    };
    let deg = [&pots.v1, &pots.v2, &pots.v3, &pots.h4]
        .iter()
        .map(|f| match f {
            ScalarFn::Poly(p) => p.degree(),
            ScalarFn::Values(_) => 0,
        })
        .max()
        .unwrap_or(0);
    Ok((pots, deg))
}

fn grid_potentials(
    w1: &Superpotential,
    w2: &Superpotential,
    h4: &H4Choice,
    g: &Grid,
) -> Result<Potentials, RealizationError> {
    let pts = g.points();
    let s1 = w1.samples(&pts)?;
    let s2 = w2.samples(&pts)?;
    let v3 = (0..pts.len())
        .map(|i| 0.25 * (s1.w[i].powi(2) + s2.w[i].powi(2) + s1.d1[i] + s2.d1[i]))
        .collect();
    if w1 == w2 {
        let e = equal_case_components(w1, h4, &pts)?;
        Ok(Potentials {
            v1: ScalarFn::Values(e.v12.clone()),
            v2: ScalarFn::Values(e.v12),
            v3: ScalarFn::Values(v3),
            h4: ScalarFn::Values(e.h4_imag),
        })
    } else {
        let s = solve_unequal_case(w1, w2, &pts, DEFAULT_DELTA)?;
        Ok(Potentials {
            v1: ScalarFn::Values(s.v1),
            v2: ScalarFn::Values(s.v2),
            v3: ScalarFn::Values(v3),
            h4: ScalarFn::Values(s.h4_imag),
        })
    }
}

fn w_op(
    src: &Source,
    w: &Superpotential,
    g: Option<&Grid>,
) -> Result<OperatorMatrix, RealizationError> {
    match g {
        None => src.op(&ScalarFn::Poly(poly_of(w, "superpotential")?.clone())),
        Some(g) => src.op(&ScalarFn::Values(w.samples(&g.points())?.w)),
    }
}

/// Trusted-window margin for a Fock-space superpotential realization with
/// charge ladder reach `rq` and Hamiltonian reach `rh`.
pub fn superpotential_margin(rq: usize, rh: usize) -> usize {
    (3 * rq).max(rq + rh) + 1
}

/// Two-superpotential realization. With `W₁ = W₂` the Hamiltonian uses
/// `h4`; otherwise the closed-form unequal solution fixes `H₁`, `H₂`, `H₄`.
pub fn build_superpotential_realization(
    w1: &Superpotential,
    w2: &Superpotential,
    h4: &H4Choice,
    rep: &Representation,
    c: f64,
) -> Result<RealizationBundle, RealizationError> {
    let (src, pots, space, grid) = match rep {
        Representation::Fock { dim, margin } => {
            let (pots, deg_h) = fock_potentials(w1, w2, h4)?;
            let deg_w = poly_of(w1, "W1")?.degree().max(poly_of(w2, "W2")?.degree());
            let rq = deg_w.max(1);
            let m = margin.unwrap_or_else(|| superpotential_margin(rq, deg_h.max(2)));
            let window = TrustedWindow::new(*dim, m)?;
            let src = Source::Fock(FockPosition::new(*dim, deg_h.max(deg_w))?);
            (src, pots, Space::Fock { window }, None)
        }
        Representation::Grid(g) => {
            let pots = grid_potentials(w1, w2, h4, g)?;
            let src = Source::Grid(grid::build_grid_operators(g)?);
            (src, pots, Space::Grid { grid: *g }, Some(g))
        }
    };
    let p = src.p();
    let iw1 = w_op(&src, w1, grid)?.scale(I);
    let iw2 = w_op(&src, w2, grid)?.scale(I);
    let inner = p.dim();
    let k = c * FRAC_1_SQRT_2;
    let mut q = BlockOperator::zeros(3, inner);
    q.set(0, 2, (&p + &iw1).scale(C64::new(k, -k)));
    q.set(1, 2, (&p + &iw2).scale(C64::new(k, k)));

    let mut h = BlockOperator::zeros(3, inner);
    h.set(0, 0, schrodinger(&src, &pots.v1)?);
    h.set(1, 1, schrodinger(&src, &pots.v2)?);
    h.set(2, 2, schrodinger(&src, &pots.v3)?);
    let h4_op = src.op(&pots.h4)?;
    if !h4_op.is_zero() {
        h.set(0, 1, h4_op.scale(I));
        h.set(1, 0, h4_op.scale(-I));
    }
    RealizationBundle::new("superpotential", q, h, c, space)
}

// ---------------------------------------------------------------------------
// Deformed-oscillator realizations
// ---------------------------------------------------------------------------

/// How realization B fills the `n = 0` entry of `H̄₁`, which involves
/// `f₂²(−1)F(−1)` and is not fixed by the algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConvention {
    /// The below-vacuum term is dropped.
    #[default]
    ZeroBelowVacuum,
    /// `F(−1)` from the closed form of the structure function and `f₂(−1)`
    /// from the modulation polynomial.
    Extended,
}

fn check_coupling(c: f64) -> Result<(), RealizationError> {
    if !(c > 0.0) {
        return Err(RealizationError::NonPositiveCoupling(c));
    }
    Ok(())
}

/// `f²(n)F(n)` as a list over `n = shift … dim−1+shift`.
fn weighted_values(
    alg: &FockAlgebra,
    f: &ModulationFunction,
    shift: i64,
    conv: BoundaryConvention,
) -> Result<Vec<f64>, RealizationError> {
    (0..alg.dim() as i64)
        .map(|n| weighted(alg, f, n + shift, conv))
        .collect()
}

fn weighted(
    alg: &FockAlgebra,
    f: &ModulationFunction,
    n: i64,
    conv: BoundaryConvention,
) -> Result<f64, RealizationError> {
    if n < 0 {
        return match conv {
            BoundaryConvention::ZeroBelowVacuum => Ok(0.0),
            BoundaryConvention::Extended => {
                Ok(f.eval(n)?.powi(2) * alg.structure().value_extended(n)?)
            }
        };
    }
    Ok(f.eval(n)?.powi(2) * alg.structure().value(n as usize)?)
}

/// Diagonal entries of the realization-A Hamiltonian blocks.
pub fn gdoa_a_levels(
    alg: &FockAlgebra,
    f: &ModulationFunction,
    h3bar: &ModulationFunction,
) -> Result<[Vec<f64>; 3], RealizationError> {
    let conv = BoundaryConvention::ZeroBelowVacuum;
    Ok([
        weighted_values(alg, f, 0, conv)?,
        weighted_values(alg, f, 1, conv)?,
        (0..alg.dim() as i64)
            .map(|n| h3bar.eval(n))
            .collect::<Result<_, _>>()?,
    ])
}

/// Diagonal entries of the realization-B Hamiltonian blocks.
pub fn gdoa_b_levels(
    alg: &FockAlgebra,
    f1: &ModulationFunction,
    f2: &ModulationFunction,
    conv: BoundaryConvention,
) -> Result<[Vec<f64>; 3], RealizationError> {
    let mut out: [Vec<f64>; 3] = Default::default();
    for (k, slot) in out.iter_mut().enumerate() {
        let a = weighted_values(alg, f1, k as i64, conv)?;
        let b = weighted_values(alg, f2, k as i64 - 1, conv)?;
        *slot = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
    }
    Ok(out)
}

fn fock_window(alg: &FockAlgebra, margin: usize) -> Result<Space, RealizationError> {
    Ok(Space::Fock {
        window: TrustedWindow::new(alg.dim(), margin)?,
    })
}

pub fn build_gdoa_realization_a(
    alg: &FockAlgebra,
    f: &ModulationFunction,
    h3bar: &ModulationFunction,
    c: f64,
    margin: usize,
) -> Result<RealizationBundle, RealizationError> {
    check_coupling(c)?;
    let d = alg.dim();
    let mut q = BlockOperator::zeros(3, d);
    q.set(0, 1, (&f.diagonal(d, 0)? * &alg.a_dag).scale_real(2.0 * c));
    let levels = gdoa_a_levels(alg, f, h3bar)?;
    let h = BlockOperator::diagonal(
        levels
            .iter()
            .map(|v| OperatorMatrix::from_real_diagonal(v))
            .collect(),
    )?;
    RealizationBundle::new("gdoa_a", q, h, c, fock_window(alg, margin)?)
}

pub fn build_gdoa_realization_b(
    alg: &FockAlgebra,
    f1: &ModulationFunction,
    f2: &ModulationFunction,
    c: f64,
    conv: BoundaryConvention,
    margin: usize,
) -> Result<RealizationBundle, RealizationError> {
    check_coupling(c)?;
    let d = alg.dim();
    let k = c * std::f64::consts::SQRT_2;
    let mut q = BlockOperator::zeros(3, d);
    q.set(0, 1, (&f1.diagonal(d, 0)? * &alg.a_dag).scale_real(k));
    q.set(2, 1, (&f2.diagonal(d, 1)? * &alg.a).scale(C64::new(0.0, k)));
    let levels = gdoa_b_levels(alg, f1, f2, conv)?;
    let h = BlockOperator::diagonal(
        levels
            .iter()
            .map(|v| OperatorMatrix::from_real_diagonal(v))
            .collect(),
    )?;
    RealizationBundle::new("gdoa_b", q, h, c, fock_window(alg, margin)?)
}

/// Result of block-diagonalizing a Fock-space bundle with `U₄`.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub conjugated: RealizationBundle,
    pub components: Vec<RealizationBundle>,
    /// Windowed Frobenius norm of all off-diagonal blocks of the conjugated
    /// `Q`, `Q†` and `ℋ`.
    pub offdiag_norm: f64,
    pub unitarity_defect: f64,
}

pub fn reduce_via_u4(
    bundle: &RealizationBundle,
    alg: &FockAlgebra,
) -> Result<Reduction, RealizationError> {
    let window = *bundle.window().ok_or(RealizationError::NotFock)?;
    if bundle.q.blocks() != 3 || bundle.q.inner_dim() != alg.dim() {
        return Err(LinalgError::BlockLayout(
            "U4 reduction needs 3 blocks matching the algebra".into(),
        )
        .into());
    }
    let u = u4(alg);
    let unitarity_defect = u.flatten().unitarity_defect();
    let conjugated = bundle.conjugated_by_blocks(&u, &format!("{}_u4", bundle.name))?;
    let offdiag_norm = [&conjugated.q, &conjugated.q_dag, &conjugated.h]
        .iter()
        .map(|b| window.compress_blocks(b).offdiag_norm().powi(2))
        .sum::<f64>()
        .sqrt();
    let components = (0..3)
        .map(|mu| {
            let pick = |b: &BlockOperator| {
                let mut s = BlockOperator::zeros(1, b.inner_dim());
                s.set(0, 0, b.block_or_zero(mu, mu));
                s
            };
            RealizationBundle {
                name: format!("{}_component_{mu}", bundle.name),
                q: pick(&conjugated.q),
                q_dag: pick(&conjugated.q_dag),
                h: pick(&conjugated.h),
                c: bundle.c,
                space: bundle.space.clone(),
            }
        })
        .collect();
    Ok(Reduction {
        conjugated,
        components,
        offdiag_norm,
        unitarity_defect,
    })
}

fn check_mu(mu: usize) -> Result<(), RealizationError> {
    if mu > 2 {
        return Err(RealizationError::BadComponent(mu));
    }
    Ok(())
}

/// `Σ_ν g_ν(N) P_{μ−ν}` for the three block spectra `g`.
fn graded_hamiltonian(alg: &FockAlgebra, levels: &[Vec<f64>; 3], mu: usize) -> OperatorMatrix {
    let grading = alg.grading();
    let mut h = OperatorMatrix::zeros(alg.dim());
    for (nu, g) in levels.iter().enumerate() {
        let term = &OperatorMatrix::from_real_diagonal(g) * grading.p(mu + 3 - nu);
        h = &h + &term;
    }
    h
}

fn scalar_bundle(
    name: String,
    q: OperatorMatrix,
    h: OperatorMatrix,
    c: f64,
    space: Space,
) -> Result<RealizationBundle, RealizationError> {
    let mut qb = BlockOperator::zeros(1, q.dim());
    qb.set(0, 0, q);
    let mut hb = BlockOperator::zeros(1, h.dim());
    hb.set(0, 0, h);
    RealizationBundle::new(name, qb, hb, c, space)
}

/// Bosonized family A: `Q̄_μ = 2c f(N) a† P_{μ+2}`.
pub fn build_bosonized_a(
    alg: &FockAlgebra,
    f: &ModulationFunction,
    h3bar: &ModulationFunction,
    c: f64,
    mu: usize,
    margin: usize,
) -> Result<RealizationBundle, RealizationError> {
    check_mu(mu)?;
    check_coupling(c)?;
    let d = alg.dim();
    let q = (&(&f.diagonal(d, 0)? * &alg.a_dag) * alg.grading().p(mu + 2)).scale_real(2.0 * c);
    let h = graded_hamiltonian(alg, &gdoa_a_levels(alg, f, h3bar)?, mu);
    scalar_bundle(
        format!("bosonized_a:{mu}"),
        q,
        h,
        c,
        fock_window(alg, margin)?,
    )
}

/// Bosonized family B: `Q̄_μ = c√2 [f₁(N) a† + i f₂(N+1) a] P_{μ+2}`.
pub fn build_bosonized_b(
    alg: &FockAlgebra,
    f1: &ModulationFunction,
    f2: &ModulationFunction,
    c: f64,
    mu: usize,
    conv: BoundaryConvention,
    margin: usize,
) -> Result<RealizationBundle, RealizationError> {
    check_mu(mu)?;
    check_coupling(c)?;
    let d = alg.dim();
    let raise = &f1.diagonal(d, 0)? * &alg.a_dag;
    let lower = (&f2.diagonal(d, 1)? * &alg.a).scale(I);
    let q = (&(&raise + &lower) * alg.grading().p(mu + 2)).scale_real(c * std::f64::consts::SQRT_2);
    let h = graded_hamiltonian(alg, &gdoa_b_levels(alg, f1, f2, conv)?, mu);
    scalar_bundle(
        format!("bosonized_b:{mu}"),
        q,
        h,
        c,
        fock_window(alg, margin)?,
    )
}

// ---------------------------------------------------------------------------
// Orthosupersymmetric realization
// ---------------------------------------------------------------------------

/// Tolerance on the superpotential constraint of the orthosupersymmetric
/// realization.
pub const KHARE_CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KhareRealization {
    /// Orthosupercharges `Q₁ᴷ`, `Q₂ᴷ`.
    pub charges: Vec<BlockOperator>,
    /// `diag(h₁, h₂, h₃)`.
    pub h: BlockOperator,
    pub grid: Grid,
    pub constraint_residual: f64,
    /// `Q̃ = ζQ₁ᴷ† + ρQ₂ᴷ†` and `ℋᴷ` after conjugation by `U₃`.
    pub mapped: RealizationBundle,
}

pub fn build_ossqm_khare(
    w1: &Superpotential,
    w2: &Superpotential,
    g: &Grid,
    zeta: C64,
    rho: C64,
    c: f64,
) -> Result<KhareRealization, RealizationError> {
    check_coupling(c)?;
    let pts = g.points();
    let constraint_residual = superpotential::ossqm_constraint_residual(w1, w2, &pts)?;
    if !(constraint_residual <= KHARE_CONSTRAINT_TOL) {
        return Err(RealizationError::ConstraintViolated(constraint_residual));
    }
    let ops = grid::build_grid_operators(g)?;
    let s1 = w1.samples(&pts)?;
    let s2 = w2.samples(&pts)?;
    let wop = |v: &[f64]| grid::diagonal_from_samples(g, v);
    let mut q1 = BlockOperator::zeros(3, g.n_points);
    q1.set(0, 1, &ops.p - &wop(&s1.w)?.scale(I));
    let mut q2 = BlockOperator::zeros(3, g.n_points);
    q2.set(0, 2, &ops.p - &wop(&s2.w)?.scale(I));
    let half_k = ops.kinetic.scale_real(0.5);
    let pot = |w: &[f64], d: &[f64], sign: f64| -> Vec<f64> {
        w.iter()
            .zip(d)
            .map(|(w, d)| 0.5 * (w * w + sign * d))
            .collect()
    };
    let h = BlockOperator::diagonal(vec![
        &half_k + &wop(&pot(&s1.w, &s1.d1, 1.0))?,
        &half_k + &wop(&pot(&s1.w, &s1.d1, -1.0))?,
        &half_k + &wop(&pot(&s2.w, &s2.d1, -1.0))?,
    ])?;
    let charges = vec![q1, q2];
    let q_tilde = combine_charges(&charges, &[zeta, rho], c)?;
    let unmapped = RealizationBundle::new(
        "ossqm_khare",
        q_tilde,
        h.clone(),
        c,
        Space::Grid { grid: *g },
    )?;
    let mapped = unmapped.conjugated(&u3(), "ossqm_khare_u3")?;
    Ok(KhareRealization {
        charges,
        h,
        grid: *g,
        constraint_residual,
        mapped,
    })
}

/// `(ζ, ρ) = c(1 ∓ i)/√2`.
pub fn khare_identification(c: f64) -> (C64, C64) {
    let k = c * FRAC_1_SQRT_2;
    (C64::new(k, -k), C64::new(k, k))
}

/// Whether a pseudosupersymmetric pair `(W₁, W₂)` carries an order-two
/// orthosupersymmetric structure. Points where `W₁ = W₂` are skipped when
/// measuring `H₄`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingAnalysis {
    pub embeddable: bool,
    pub reason: Option<String>,
    /// Max `|H₄|` of the pseudosupersymmetric Hamiltonian.
    pub h4_max: f64,
    /// Max `|(W₁² + W₁′) − (W₂² + W₂′)|`, the integration constant `|C|`
    /// for a diagonalizing pair.
    pub c_offset: f64,
}

pub fn embedding_analysis(
    w1: &Superpotential,
    w2: &Superpotential,
    points: &[f64],
    tol: f64,
) -> Result<EmbeddingAnalysis, RealizationError> {
    let c_offset = superpotential::ossqm_constraint_residual(w1, w2, points)?;
    let h4_max = if w1 == w2 {
        0.0
    } else {
        let s1 = w1.samples(points)?;
        let s2 = w2.samples(points)?;
        let regular: Vec<f64> = (0..points.len())
            .filter(|&i| (s1.w[i] - s2.w[i]).abs() >= DEFAULT_DELTA)
            .map(|i| points[i])
            .collect();
        solve_unequal_case(w1, w2, &regular, DEFAULT_DELTA)?
            .h4_imag
            .iter()
            .fold(0.0_f64, |m, h| m.max(h.abs()))
    };
    let reason = if c_offset > tol {
        Some("C ≠ 0".to_string())
    } else if h4_max > tol {
        Some("H4 ≠ 0".to_string())
    } else {
        None
    };
    Ok(EmbeddingAnalysis {
        embeddable: reason.is_none(),
        reason,
        h4_max,
        c_offset,
    })
}

/// Margin suited to the deformed-oscillator realizations.
pub const GDOA_MARGIN: usize = DEFAULT_MARGIN;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;

    fn close(a: &OperatorMatrix, b: &OperatorMatrix, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn pseudofermion_relations_exact() {
        let b = pseudofermion_b();
        let bd = b.adjoint();
        assert!((&b * &b).is_zero());
        assert!(close(&(&(&b * &bd) * &b), &b, 1e-15));
        assert!(close(&(&(&bd * &b) * &bd), &bd, 1e-15));
        let anti = &(&b * &bd) + &(&bd * &b);
        assert!(!close(&anti, &OperatorMatrix::identity(3), 0.1));
    }

    #[test]
    fn fixed_unitaries() {
        for u in [u1(), u2(), u3()] {
            assert!(u.unitarity_defect() < 1e-15);
        }
    }

    #[test]
    fn order_two_combination_matches_pseudofermion() {
        let xi = [C64::new(0.5, 0.5), C64::new(-0.5, 0.5)];
        let (bt, _) = build_order_p_combination(2, &xi).unwrap();
        let u = u3();
        let conj = &(&u * &bt) * &u.adjoint();
        assert!(close(&conj, &pseudofermion_b(), 1e-15));
    }

    #[test]
    fn order_p_rejects_bad_input() {
        assert!(matches!(
            build_order_p_combination(2, &[ONE, ONE]),
            Err(RealizationError::Normalization { .. })
        ));
        assert!(matches!(
            build_order_p_combination(1, &[ONE]),
            Err(RealizationError::OrderTooSmall(1))
        ));
        assert!(matches!(
            build_order_p_combination(3, &[ONE]),
            Err(RealizationError::CoefficientCount { .. })
        ));
    }

    #[test]
    fn sec2_pseudosupercharge_is_b_adag() {
        let alg = FockAlgebra::standard(10).unwrap();
        for omega in [0.5, 2.0] {
            let s = build_sec2_charges(&alg, omega, DEFAULT_MARGIN).unwrap();
            let q = s.pseudosupercharge(0.5).unwrap();
            let expected =
                BlockOperator::kron(&pseudofermion_b(), &alg.a_dag.scale_real(omega.sqrt()));
            assert!(q.try_sub(&expected).unwrap().max_abs() < 1e-14);
        }
        assert!(matches!(
            build_sec2_charges(&alg, 0.0, 4),
            Err(RealizationError::NonPositiveOmega(_))
        ));
    }

    #[test]
    fn fock_position_oscillator_exact() {
        let fp = FockPosition::new(12, 2).unwrap();
        let h = (&fp.kinetic() + &fp.poly(&Polynomial::new(vec![0.0, 0.0, 1.0]))).scale_real(0.5);
        let expect = OperatorMatrix::from_real_diagonal(
            &(0..12).map(|n| n as f64 + 0.5).collect::<Vec<_>>(),
        );
        assert!(close(&h, &expect, 1e-12));
    }

    #[test]
    fn rsk_oscillator_is_diagonal() {
        let b = build_superpotential_realization(
            &Superpotential::poly(vec![0.0, 1.0]),
            &Superpotential::poly(vec![0.0, -1.0]),
            &H4Choice::Zero,
            &Representation::Fock {
                dim: 20,
                margin: None,
            },
            0.5,
        )
        .unwrap();
        assert!(b.h.block(0, 1).is_none());
        assert!(b.q.try_matmul(&b.q).unwrap().is_structurally_zero());
        let w = b.window().unwrap();
        let h1 = w.compress(b.h.block(0, 0).unwrap());
        let e = hermitian_eigenvalues(&h1, 1e-12).unwrap();
        assert!((e[0] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn u1_diagonalizes_equal_case() {
        let b = build_superpotential_realization(
            &Superpotential::poly(vec![0.0, 1.0]),
            &Superpotential::poly(vec![0.0, 1.0]),
            &H4Choice::IWPrime,
            &Representation::Fock {
                dim: 16,
                margin: None,
            },
            0.5,
        )
        .unwrap();
        let c = b.conjugated(&u1(), "h1").unwrap();
        let w = c.window().unwrap();
        assert!(w.compress_blocks(&c.h).offdiag_norm() < 1e-12);
        let diag0 = w.compress(&c.h.block_or_zero(0, 0)).diagonal();
        let diag2 = w.compress(&c.h.block_or_zero(2, 2)).diagonal();
        assert!((diag0[0].re - 0.0).abs() < 1e-12);
        assert!((diag2[0].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gdoa_a_shifted_levels() {
        let alg = FockAlgebra::standard(10).unwrap();
        let f = ModulationFunction::Poly {
            coeffs: vec![1.0, 1.0],
        };
        let b =
            build_gdoa_realization_a(&alg, &f, &ModulationFunction::constant(0.0), 0.5, 4).unwrap();
        let h1 = b.h.block(0, 0).unwrap().diagonal();
        let h2 = b.h.block(1, 1).unwrap().diagonal();
        for n in 0..9 {
            let nf = n as f64;
            assert!((h1[n].re - nf * (1.0 + nf).powi(2)).abs() < 1e-12);
            assert!((h2[n].re - h1[n + 1].re).abs() < 1e-12);
        }
    }

    #[test]
    fn gdoa_b_boundary_conventions() {
        let alg = FockAlgebra::standard(10).unwrap();
        let one = ModulationFunction::constant(1.0);
        let zero = gdoa_b_levels(&alg, &one, &one, BoundaryConvention::ZeroBelowVacuum).unwrap();
        assert_eq!(zero[0][0], 0.0);
        let ext = gdoa_b_levels(&alg, &one, &one, BoundaryConvention::Extended).unwrap();
        for n in 0..8 {
            let nf = n as f64;
            assert!((ext[0][n] - (nf - 0.5)).abs() < 1e-14);
            assert!((ext[1][n] - (nf + 0.5)).abs() < 1e-14);
            assert!((ext[2][n] - (nf + 1.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn modulation_table_range() {
        let t = ModulationFunction::Table {
            values: vec![1.0, 2.0],
        };
        assert_eq!(t.eval(1).unwrap(), 2.0);
        assert!(matches!(
            t.eval(2),
            Err(RealizationError::ModulationRange(2))
        ));
        assert!(matches!(
            t.eval(-1),
            Err(RealizationError::ModulationRange(-1))
        ));
    }

    #[test]
    fn u4_is_unitary_and_reduces_a() {
        let alg = FockAlgebra::new(StructureFunction::c3(0.5, -0.3).unwrap(), 18).unwrap();
        let f = ModulationFunction::Poly {
            coeffs: vec![1.0, 0.1],
        };
        let b =
            build_gdoa_realization_a(&alg, &f, &ModulationFunction::constant(2.0), 0.7, 4).unwrap();
        let r = reduce_via_u4(&b, &alg).unwrap();
        assert!(r.unitarity_defect < 1e-12);
        assert!(r.offdiag_norm < 1e-12);
        for mu in 0..3 {
            let direct =
                build_bosonized_a(&alg, &f, &ModulationFunction::constant(2.0), 0.7, mu, 4)
                    .unwrap();
            assert!(close(
                r.components[mu].q.block(0, 0).unwrap(),
                direct.q.block(0, 0).unwrap(),
                1e-12
            ));
            assert!(close(
                r.components[mu].h.block(0, 0).unwrap(),
                direct.h.block(0, 0).unwrap(),
                1e-12
            ));
        }
    }

    #[test]
    fn embedding_reasons() {
        let pts: Vec<f64> = (-10..=10).map(|k| k as f64 * 0.3).collect();
        let x = Superpotential::poly(vec![0.0, 1.0]);
        let mx = Superpotential::poly(vec![0.0, -1.0]);
        let e = embedding_analysis(&x, &mx, &pts, 1e-6).unwrap();
        assert!(!e.embeddable);
        assert_eq!(e.reason.as_deref(), Some("C ≠ 0"));
        let e = embedding_analysis(&x, &x, &pts, 1e-6).unwrap();
        assert!(e.embeddable);
    }
}
