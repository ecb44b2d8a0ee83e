//! Truncated bosonic Fock representations of generalized deformed oscillator
//! algebras.
//!
//! A structure function `F` fixes the representation: `a†|n⟩ = √F(n+1)|n+1⟩`,
//! `a|n⟩ = √F(n)|n−1⟩`, `a†a = F(N)`, and `[a, a†] = G(N) = F(N+1) − F(N)`.
//! Truncating to `D` states corrupts products near the top of the ladder, so
//! identities are only asserted on a [`TrustedWindow`] of low-lying states.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{BlockOperator, OperatorMatrix, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("structure function must satisfy F(0) = 0, got F(0) = {0}")]
    NonzeroVacuum(f64),
    #[error("structure function not positive at n = {n}: F(n) = {value}")]
    NonPositive { n: usize, value: f64 },
    #[error("C3 parameters violate the positivity constraints alpha0 > -1 and alpha0 + alpha1 > -2 (alpha0 = {alpha0}, alpha1 = {alpha1})")]
    C3Constraint { alpha0: f64, alpha1: f64 },
    #[error("structure-function table too short: need {needed} values, have {have}")]
    TableTooShort { needed: usize, have: usize },
    #[error("index n = {n} outside 0..{dim}")]
    OutOfRange { n: usize, dim: usize },
    #[error("window margin {margin} must be smaller than dimension {dim}")]
    WindowTooLarge { margin: usize, dim: usize },
    #[error("F(-1) is undefined for a tabulated structure function")]
    NoExtension,
    #[error("dimension must be positive")]
    EmptyDimension,
}

/// `n ↦ F(n)` defining a GDOA Fock representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureFunction {
    /// `F(n) = n`.
    Standard,
    /// C₃-extended oscillator: `F(n) = n + β_{n mod 3}` with `β₀ = 0`,
    /// `β₁ = α₀`, `β₂ = α₀ + α₁`.
    #[serde(rename = "c3")]
    C3Extended { alpha0: f64, alpha1: f64 },
    #[serde(rename = "table")]
    Table { values: Vec<f64> },
}

impl StructureFunction {
    /// C₃ structure function, rejecting parameters without a Fock representation.
    pub fn c3(alpha0: f64, alpha1: f64) -> Result<Self, FockError> {
        let sf = Self::C3Extended { alpha0, alpha1 };
        sf.check_parameters()?;
        Ok(sf)
    }

    pub fn table(values: Vec<f64>) -> Self {
        Self::Table { values }
    }

    pub fn check_parameters(&self) -> Result<(), FockError> {
        if let Self::C3Extended { alpha0, alpha1 } = *self {
            if !(alpha0 > -1.0 && alpha0 + alpha1 > -2.0) {
                return Err(FockError::C3Constraint { alpha0, alpha1 });
            }
        }
        Ok(())
    }

    pub fn value(&self, n: usize) -> Result<f64, FockError> {
        match self {
            Self::Standard => Ok(n as f64),
            Self::C3Extended { .. } => Ok(n as f64 + self.betas()[n % 3]),
            Self::Table { values } => values.get(n).copied().ok_or(FockError::TableTooShort {
                needed: n + 1,
                have: values.len(),
            }),
        }
    }

    /// `F(n)` continued to `n = −1` by the closed formula (`−1` for the
    /// standard oscillator, `−1 + β₂` for C₃). Tables have no continuation.
    pub fn value_extended(&self, n: i64) -> Result<f64, FockError> {
        if n >= 0 {
            return self.value(n as usize);
        }
        match self {
            Self::Standard => Ok(n as f64),
            Self::C3Extended { .. } => Ok(n as f64 + self.betas()[n.rem_euclid(3) as usize]),
            Self::Table { .. } => Err(FockError::NoExtension),
        }
    }

    /// `G(n) = F(n+1) − F(n)`.
    pub fn g(&self, n: usize) -> Result<f64, FockError> {
        Ok(self.value(n + 1)? - self.value(n)?)
    }

    /// `(α₀, α₁, α₂)` with `α₂ = −α₀ − α₁`; zero for non-C₃ kinds.
    pub fn alphas(&self) -> [f64; 3] {
        match *self {
            Self::C3Extended { alpha0, alpha1 } => [alpha0, alpha1, -alpha0 - alpha1],
            _ => [0.0; 3],
        }
    }

    /// `(β₀, β₁, β₂)`.
    pub fn betas(&self) -> [f64; 3] {
        let a = self.alphas();
        [0.0, a[0], a[0] + a[1]]
    }

    /// `γ_μ = ½(β_μ + β_{μ+1})` (indices mod 3), i.e.
    /// `(α₀/2, α₀ + α₁/2, (α₀ + α₁)/2)`.
    pub fn gammas(&self) -> [f64; 3] {
        let [a0, a1, _] = self.alphas();
        [a0 / 2.0, a0 + a1 / 2.0, (a0 + a1) / 2.0]
    }

    /// `κ₁` of `G(N) = I + κ₁T + κ₂T²` (`κ₂ = κ₁*`).
    pub fn kappa1(&self) -> C64 {
        let a = self.alphas();
        alphas_to_kappa(&a)
    }

    /// Checks `F(0) = 0` and `F(n) > 0` for `1 ≤ n ≤ upto`.
    pub fn validate(&self, upto: usize) -> Result<(), FockError> {
        self.check_parameters()?;
        let f0 = self.value(0)?;
        if f0 != 0.0 {
            return Err(FockError::NonzeroVacuum(f0));
        }
        for n in 1..=upto {
            let v = self.value(n)?;
            if !(v > 0.0) {
                return Err(FockError::NonPositive { n, value: v });
            }
        }
        Ok(())
    }
}

/// `κ₁ = ⅓ Σ_μ e^{−2πiμ/3} α_μ`.
pub fn alphas_to_kappa(alphas: &[f64; 3]) -> C64 {
    alphas
        .iter()
        .enumerate()
        .map(|(mu, &a)| Complex64::from_polar(1.0, -2.0 * PI * mu as f64 / 3.0) * a)
        .sum::<C64>()
        / 3.0
}

/// `α_μ = Σ_{ν=1,2} e^{2πiμν/3} κ_ν` with `κ₂ = κ₁*`; returns `(α₀, α₁)`.
pub fn kappa_to_alphas(kappa1: C64) -> (f64, f64) {
    let alpha = |mu: f64| {
        (Complex64::from_polar(1.0, 2.0 * PI * mu / 3.0) * kappa1
            + Complex64::from_polar(1.0, 4.0 * PI * mu / 3.0) * kappa1.conj())
        .re
    };
    (alpha(0.0), alpha(1.0))
}

/// Truncated Fock representation: `N`, `a`, `a†` on `dim` states.
#[derive(Debug, Clone)]
pub struct FockAlgebra {
    dim: usize,
    structure: StructureFunction,
    pub number: OperatorMatrix,
    pub a: OperatorMatrix,
    pub a_dag: OperatorMatrix,
}

/// Extra table entries beyond `dim` required of tabulated structure
/// functions (realization B reads `F(N+2)`).
pub const TABLE_LADDER_EXCESS: usize = 3;

impl FockAlgebra {
    pub fn new(structure: StructureFunction, dim: usize) -> Result<Self, FockError> {
        if dim == 0 {
            return Err(FockError::EmptyDimension);
        }
        if let StructureFunction::Table { values } = &structure {
            if values.len() < dim + TABLE_LADDER_EXCESS {
                return Err(FockError::TableTooShort {
                    needed: dim + TABLE_LADDER_EXCESS,
                    have: values.len(),
                });
            }
        }
        structure.validate(dim)?;
        let number =
            OperatorMatrix::from_real_diagonal(&(0..dim).map(|n| n as f64).collect::<Vec<_>>());
        let mut a_dag = OperatorMatrix::zeros(dim);
        for n in 0..dim - 1 {
            a_dag[(n + 1, n)] = C64::new(structure.value(n + 1)?.sqrt(), 0.0);
        }
        let a = a_dag.adjoint();
        Ok(Self {
            dim,
            structure,
            number,
            a,
            a_dag,
        })
    }

    pub fn standard(dim: usize) -> Result<Self, FockError> {
        Self::new(StructureFunction::Standard, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> &StructureFunction {
        &self.structure
    }

    /// Diagonal operator `diag(g(0), …, g(D−1))`.
    pub fn diag_fn(&self, g: impl Fn(usize) -> f64) -> OperatorMatrix {
        OperatorMatrix::from_real_diagonal(&(0..self.dim).map(g).collect::<Vec<_>>())
    }

    /// `F(N + shift)` as a diagonal operator.
    pub fn f_of_n(&self, shift: usize) -> Result<OperatorMatrix, FockError> {
        let vals = (0..self.dim)
            .map(|n| self.structure.value(n + shift))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OperatorMatrix::from_real_diagonal(&vals))
    }

    /// `G(N)` as a diagonal operator.
    pub fn g_of_n(&self) -> Result<OperatorMatrix, FockError> {
        let vals = (0..self.dim)
            .map(|n| self.structure.g(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OperatorMatrix::from_real_diagonal(&vals))
    }

    pub fn grading(&self) -> Grading {
        build_t_and_projectors(self)
    }
}

/// `G(n)` for `0 ≤ n < dim`.
pub fn structure_g(f: &StructureFunction, n: usize, dim: usize) -> Result<f64, FockError> {
    if n >= dim {
        return Err(FockError::OutOfRange { n, dim });
    }
    f.g(n)
}

/// `T = e^{2πiN/3}` and the residue-class projectors `P₀, P₁, P₂`.
#[derive(Debug, Clone)]
pub struct Grading {
    pub t: OperatorMatrix,
    pub projectors: [OperatorMatrix; 3],
}

impl Grading {
    /// `P_μ` with the index taken mod 3.
    pub fn p(&self, mu: usize) -> &OperatorMatrix {
        &self.projectors[mu % 3]
    }
}

pub fn build_t_and_projectors(alg: &FockAlgebra) -> Grading {
    let d = alg.dim();
    let t = OperatorMatrix::from_diagonal(
        &(0..d)
            .map(|n| Complex64::from_polar(1.0, 2.0 * PI * (n % 3) as f64 / 3.0))
            .collect::<Vec<_>>(),
    );
    let projectors = [0usize, 1, 2].map(|mu| {
        OperatorMatrix::from_diagonal(
            &(0..d)
                .map(|n| if n % 3 == mu { ONE } else { ZERO })
                .collect::<Vec<_>>(),
        )
    });
    Grading { t, projectors }
}

/// Projector `P_μ = ⅓ Σ_ν e^{−2πiμν/3} T^ν` evaluated from `T` directly.
pub fn projector_from_t(t: &OperatorMatrix, mu: usize) -> OperatorMatrix {
    let d = t.dim();
    let mut acc = OperatorMatrix::zeros(d);
    let mut t_pow = OperatorMatrix::identity(d);
    for nu in 0..3 {
        let phase = Complex64::from_polar(1.0 / 3.0, -2.0 * PI * (mu * nu) as f64 / 3.0);
        acc = &acc + &t_pow.scale(phase);
        t_pow = &t_pow * t;
    }
    acc
}

/// Low-lying subspace `|0⟩ … |D−1−m⟩` on which truncated identities are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustedWindow {
    margin: usize,
    dim: usize,
}

pub const DEFAULT_MARGIN: usize = 4;

impl TrustedWindow {
    pub fn new(dim: usize, margin: usize) -> Result<Self, FockError> {
        if margin >= dim {
            return Err(FockError::WindowTooLarge { margin, dim });
        }
        Ok(Self { margin, dim })
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of retained basis states.
    pub fn keep(&self) -> usize {
        self.dim - self.margin
    }

    pub fn projector(&self) -> OperatorMatrix {
        OperatorMatrix::from_real_diagonal(
            &(0..self.dim)
                .map(|n| if n < self.keep() { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        )
    }

    /// Window-compressed copy of `m` (leading `keep × keep` block).
    pub fn compress(&self, m: &OperatorMatrix) -> OperatorMatrix {
        m.leading(self.keep())
    }

    /// Window-compressed copy of every inner block of `b`.
    pub fn compress_blocks(&self, b: &BlockOperator) -> BlockOperator {
        let keep = self.keep();
        let mut out = BlockOperator::zeros(b.blocks(), keep);
        for i in 0..b.blocks() {
            for j in 0..b.blocks() {
                if let Some(m) = b.block(i, j) {
                    out.set(i, j, m.leading(keep));
                }
            }
        }
        out
    }
}

/// `‖Π(L − R)Π‖_F` for the window projector `Π`.
pub fn windowed_residual(
    lhs: &OperatorMatrix,
    rhs: &OperatorMatrix,
    w: &TrustedWindow,
) -> Result<f64, FockError> {
    if lhs.dim() != w.dim() || rhs.dim() != w.dim() {
        return Err(FockError::OutOfRange {
            n: lhs.dim().max(rhs.dim()),
            dim: w.dim(),
        });
    }
    Ok(w.compress(&(lhs - rhs)).frobenius_norm())
}

/// Windowed Frobenius norm of a block operator (window applied to every block).
pub fn windowed_block_norm(b: &BlockOperator, w: &TrustedWindow) -> f64 {
    w.compress_blocks(b).frobenius_norm()
}
