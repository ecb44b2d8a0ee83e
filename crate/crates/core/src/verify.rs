//! Residual suites for the defining relations of every algebra in the crate.
//!
//! A relation is a linear combination of operator products that should
//! vanish. How it is measured depends on the representation ([`Metric`]):
//! Frobenius norm on the trusted Fock window, interior action on smooth probe
//! vectors on a grid, or the plain Frobenius norm for fixed matrices.

use serde::{Deserialize, Serialize};

use crate::fock::TrustedWindow;
use crate::grid::{ProbeSet, BOUNDARY_LAYERS};
use crate::linalg::{BlockOperator, OperatorMatrix, C64, ZERO};
use crate::realizations::{RealizationBundle, Space};

/// Default relative budget on the Fock window.
pub const FOCK_BUDGET: f64 = 1e-10;
/// Coefficient of `h²` in the default grid budget.
pub const GRID_BUDGET_COEFF: f64 = 50.0;
/// Budget for the exact fixed-matrix algebras.
pub const EXACT_BUDGET: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub relation: String,
    pub residual: f64,
    pub budget: f64,
    pub pass: bool,
    pub window_margin: usize,
    /// Set for Hermitian-conjugate partners whose residual is taken from the
    /// primal relation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_from: Option<String>,
}

impl ResidualReport {
    fn new(relation: impl Into<String>, residual: f64, budget: f64, window_margin: usize) -> Self {
        Self {
            relation: relation.into(),
            residual: residual.abs(),
            budget,
            pass: residual.abs() <= budget,
            window_margin,
            derived_from: None,
        }
    }

    fn derived(&self, relation: &str) -> Self {
        Self {
            relation: relation.to_string(),
            derived_from: Some(self.relation.clone()),
            ..self.clone()
        }
    }
}

pub fn all_pass(reports: &[ResidualReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

/// One product `coef · A₁ A₂ … A_k` in a relation.
pub struct Term<'a> {
    pub coef: C64,
    pub factors: Vec<&'a BlockOperator>,
}

impl<'a> Term<'a> {
    pub fn new(coef: f64, factors: Vec<&'a BlockOperator>) -> Self {
        Self {
            coef: C64::new(coef, 0.0),
            factors,
        }
    }

    pub fn complex(coef: C64, factors: Vec<&'a BlockOperator>) -> Self {
        Self { coef, factors }
    }
}

/// How relation residuals are measured.
#[derive(Debug, Clone)]
pub enum Metric {
    /// Frobenius norm of the window-compressed blocks.
    Window(TrustedWindow),
    /// Largest interior norm of the residual applied to a probe vector.
    Probes(ProbeSet),
    /// Frobenius norm of the full matrix.
    Full,
}

impl Metric {
    pub fn for_bundle(b: &RealizationBundle) -> Self {
        match &b.space {
            Space::Fock { window } => Metric::Window(*window),
            Space::Grid { grid } => Metric::Probes(ProbeSet::hermite(grid)),
        }
    }

    pub fn margin(&self) -> usize {
        match self {
            Metric::Window(w) => w.margin(),
            Metric::Probes(_) => BOUNDARY_LAYERS,
            Metric::Full => 0,
        }
    }

    /// Residual of `Σ terms`.
    pub fn residual(&self, terms: &[Term<'_>]) -> f64 {
        match self {
            Metric::Window(w) => w.compress_blocks(&sum_products(terms)).frobenius_norm(),
            Metric::Full => sum_products(terms).frobenius_norm(),
            Metric::Probes(p) => {
                let blocks = terms[0].factors[0].blocks();
                p.block_vectors(blocks)
                    .iter()
                    .map(|psi| p.interior_norm(&apply_terms(terms, psi)))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Size of an operator in the units of this metric: max entry on the
    /// window (or whole matrix), largest probe action on a grid.
    pub fn size(&self, b: &BlockOperator) -> f64 {
        match self {
            Metric::Window(w) => w.compress_blocks(b).max_abs(),
            Metric::Full => b.max_abs(),
            Metric::Probes(p) => p
                .block_vectors(b.blocks())
                .iter()
                .map(|psi| p.interior_norm(&b.apply(psi)))
                .fold(0.0, f64::max),
        }
    }
}

fn sum_products(terms: &[Term<'_>]) -> BlockOperator {
    let first = terms[0].factors[0];
    let mut acc = BlockOperator::zeros(first.blocks(), first.inner_dim());
    for t in terms {
        let mut prod = t.factors[0].clone();
        for f in &t.factors[1..] {
            prod = &prod * *f;
        }
        acc = &acc + &prod.scale(t.coef);
    }
    acc
}

fn apply_terms(terms: &[Term<'_>], psi: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut acc: Vec<Vec<C64>> = psi.iter().map(|c| vec![ZERO; c.len()]).collect();
    for t in terms {
        let mut v = psi.to_vec();
        for f in t.factors.iter().rev() {
            v = f.apply(&v);
        }
        for (a, b) in acc.iter_mut().zip(&v) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += t.coef * y;
            }
        }
    }
    acc
}

/// How a budget grows with the size of the operators under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRule {
    /// `base · scale^degree` with `scale = max(1, ‖Q‖, ‖ℋ‖^{1/2})`, so that
    /// relations of different degree in `Q` are comparable.
    Graded,
    /// `base · scale` with `scale = max(1, ‖Q‖, ‖ℋ‖)`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub base: f64,
    pub scale: f64,
    pub rule: BudgetRule,
}

impl Budget {
    /// Budget for the metric's default rule: graded on matrices, linear on
    /// grid probes.
    pub fn new(metric: &Metric, q: &BlockOperator, h: &BlockOperator, base: f64) -> Self {
        let (sq, sh) = (metric.size(q), metric.size(h));
        match metric {
            Metric::Probes(_) => Self {
                base,
                scale: 1.0_f64.max(sq).max(sh),
                rule: BudgetRule::Linear,
            },
            _ => Self {
                base,
                scale: 1.0_f64.max(sq).max(sh.sqrt()),
                rule: BudgetRule::Graded,
            },
        }
    }

    pub fn for_degree(&self, degree: i32) -> f64 {
        match self.rule {
            BudgetRule::Graded => self.base * self.scale.powi(degree),
            BudgetRule::Linear => self.base * self.scale,
        }
    }

    fn widen(self, other: Self) -> Self {
        Self {
            scale: self.scale.max(other.scale),
            ..self
        }
    }
}

/// Default budget base for a bundle: `1e−10` on Fock space, `50 h²` on a grid.
pub fn default_base(b: &RealizationBundle) -> f64 {
    match &b.space {
        Space::Fock { .. } => FOCK_BUDGET,
        Space::Grid { grid } => GRID_BUDGET_COEFF * grid.h() * grid.h(),
    }
}

/// `Q² = 0`, `[ℋ, Q] = 0`, `QQ†Q = 4c²Qℋ`, each with its Hermitian-conjugate
/// partner reported as derived.
pub fn check_psssqm(bundle: &RealizationBundle, base: Option<f64>) -> Vec<ResidualReport> {
    let metric = Metric::for_bundle(bundle);
    let budget = Budget::new(
        &metric,
        &bundle.q,
        &bundle.h,
        base.unwrap_or_else(|| default_base(bundle)),
    );
    check_psssqm_with(bundle, &metric, budget)
}

pub fn check_psssqm_with(
    bundle: &RealizationBundle,
    metric: &Metric,
    budget: Budget,
) -> Vec<ResidualReport> {
    let (q, qd, h) = (&bundle.q, &bundle.q_dag, &bundle.h);
    let c2 = 4.0 * bundle.c * bundle.c;
    let m = metric.margin();
    let nil = ResidualReport::new(
        "Q^2 = 0",
        metric.residual(&[Term::new(1.0, vec![q, q])]),
        budget.for_degree(2),
        m,
    );
    let comm = ResidualReport::new(
        "[H, Q] = 0",
        metric.residual(&[Term::new(1.0, vec![h, q]), Term::new(-1.0, vec![q, h])]),
        budget.for_degree(3),
        m,
    );
    let tri = ResidualReport::new(
        "Q Q^dag Q = 4c^2 Q H",
        metric.residual(&[Term::new(1.0, vec![q, qd, q]), Term::new(-c2, vec![q, h])]),
        budget.for_degree(3),
        m,
    );
    let nil_dag = nil.derived("(Q^dag)^2 = 0");
    let comm_dag = comm.derived("[H, Q^dag] = 0");
    let tri_dag = tri.derived("Q^dag Q Q^dag = 4c^2 H Q^dag");
    vec![nil, nil_dag, comm, comm_dag, tri, tri_dag]
}

fn single(m: &OperatorMatrix) -> BlockOperator {
    let mut b = BlockOperator::zeros(1, m.dim());
    b.set(0, 0, m.clone());
    b
}

/// `b² = 0`, `(b†)² = 0`, `bb†b = b`, `b†bb† = b†`.
pub fn check_pseudofermion(
    b: &OperatorMatrix,
    b_dag: &OperatorMatrix,
    budget: f64,
) -> Vec<ResidualReport> {
    let (b, bd) = (single(b), single(b_dag));
    let m = Metric::Full;
    vec![
        ResidualReport::new(
            "b^2 = 0",
            m.residual(&[Term::new(1.0, vec![&b, &b])]),
            budget,
            0,
        ),
        ResidualReport::new(
            "(b^dag)^2 = 0",
            m.residual(&[Term::new(1.0, vec![&bd, &bd])]),
            budget,
            0,
        ),
        ResidualReport::new(
            "b b^dag b = b",
            m.residual(&[Term::new(1.0, vec![&b, &bd, &b]), Term::new(-1.0, vec![&b])]),
            budget,
            0,
        ),
        ResidualReport::new(
            "b^dag b b^dag = b^dag",
            m.residual(&[
                Term::new(1.0, vec![&bd, &b, &bd]),
                Term::new(-1.0, vec![&bd]),
            ]),
            budget,
            0,
        ),
    ]
}

/// `c_α c_β = 0` and `c_α c_β† + δ_{αβ} Σ_γ c_γ† c_γ = δ_{αβ}` for all pairs.
pub fn check_orthofermion(cs: &[OperatorMatrix], budget: f64) -> Vec<ResidualReport> {
    let blocks: Vec<BlockOperator> = cs.iter().map(single).collect();
    let daggers: Vec<BlockOperator> = blocks.iter().map(|b| b.adjoint()).collect();
    let id = single(&OperatorMatrix::identity(cs.first().map_or(1, |c| c.dim())));
    let metric = Metric::Full;
    let mut out = Vec::new();
    for a in 0..cs.len() {
        for b in 0..cs.len() {
            out.push(ResidualReport::new(
                format!("c{} c{} = 0", a + 1, b + 1),
                metric.residual(&[Term::new(1.0, vec![&blocks[a], &blocks[b]])]),
                budget,
                0,
            ));
        }
    }
    for a in 0..cs.len() {
        for b in 0..cs.len() {
            let mut terms = vec![Term::new(1.0, vec![&blocks[a], &daggers[b]])];
            if a == b {
                for g in 0..cs.len() {
                    terms.push(Term::new(1.0, vec![&daggers[g], &blocks[g]]));
                }
                terms.push(Term::new(-1.0, vec![&id]));
            }
            out.push(ResidualReport::new(
                format!("c{} c{}^dag + delta sum c^dag c = delta", a + 1, b + 1),
                metric.residual(&terms),
                budget,
                0,
            ));
        }
    }
    out
}

/// Orthosupersymmetric relations `Q_α Q_β = 0`, `[ℋ, Q_α] = 0`,
/// `Q_α Q_β† + δ_{αβ} Σ_γ Q_γ† Q_γ = 2δ_{αβ} ℋ`.
pub fn check_ossqm(
    charges: &[BlockOperator],
    h: &BlockOperator,
    metric: &Metric,
    base: f64,
) -> Vec<ResidualReport> {
    let daggers: Vec<BlockOperator> = charges.iter().map(|q| q.adjoint()).collect();
    let budget = charges
        .iter()
        .map(|q| Budget::new(metric, q, h, base))
        .reduce(Budget::widen)
        .unwrap_or(Budget::new(metric, h, h, base));
    let m = metric.margin();
    let n = charges.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            out.push(ResidualReport::new(
                format!("QK{} QK{} = 0", a + 1, b + 1),
                metric.residual(&[Term::new(1.0, vec![&charges[a], &charges[b]])]),
                budget.for_degree(2),
                m,
            ));
        }
    }
    for a in 0..n {
        out.push(ResidualReport::new(
            format!("[HK, QK{}] = 0", a + 1),
            metric.residual(&[
                Term::new(1.0, vec![h, &charges[a]]),
                Term::new(-1.0, vec![&charges[a], h]),
            ]),
            budget.for_degree(3),
            m,
        ));
    }
    for a in 0..n {
        for b in 0..n {
            let mut terms = vec![Term::new(1.0, vec![&charges[a], &daggers[b]])];
            if a == b {
                for g in 0..n {
                    terms.push(Term::new(1.0, vec![&daggers[g], &charges[g]]));
                }
                terms.push(Term::new(-2.0, vec![h]));
            }
            out.push(ResidualReport::new(
                format!(
                    "QK{} QK{}^dag + delta sum QK^dag QK = 2 delta HK",
                    a + 1,
                    b + 1
                ),
                metric.residual(&terms),
                budget.for_degree(2),
                m,
            ));
        }
    }
    out
}

/// The multilinear boson-charge algebra: `Q_i³ = Q_i H`, `[H, Q_i] = 0`,
/// `Q_i² Q_j = Q_j Q_i² = −Q_i Q_j Q_i = Q_j H` for `i ≠ j`.
pub fn check_sec2(
    q1: &BlockOperator,
    q2: &BlockOperator,
    h: &BlockOperator,
    window: &TrustedWindow,
    base: f64,
) -> Vec<ResidualReport> {
    let metric = Metric::Window(*window);
    let budget = Budget::new(&metric, q1, h, base)
        .widen(Budget::new(&metric, q2, h, base))
        .for_degree(3);
    let m = window.margin();
    let qs = [q1, q2];
    let mut out = Vec::new();
    for i in 0..2 {
        let qi = qs[i];
        out.push(ResidualReport::new(
            format!("Q{}^3 = Q{} H", i + 1, i + 1),
            metric.residual(&[
                Term::new(1.0, vec![qi, qi, qi]),
                Term::new(-1.0, vec![qi, h]),
            ]),
            budget,
            m,
        ));
        out.push(ResidualReport::new(
            format!("[H, Q{}] = 0", i + 1),
            metric.residual(&[Term::new(1.0, vec![h, qi]), Term::new(-1.0, vec![qi, h])]),
            budget,
            m,
        ));
    }
    for (i, j) in [(0usize, 1usize), (1, 0)] {
        let (qi, qj) = (qs[i], qs[j]);
        let (a, b) = (i + 1, j + 1);
        out.push(ResidualReport::new(
            format!("Q{a}^2 Q{b} = Q{b} Q{a}^2"),
            metric.residual(&[
                Term::new(1.0, vec![qi, qi, qj]),
                Term::new(-1.0, vec![qj, qi, qi]),
            ]),
            budget,
            m,
        ));
        out.push(ResidualReport::new(
            format!("Q{a}^2 Q{b} = -Q{a} Q{b} Q{a}"),
            metric.residual(&[
                Term::new(1.0, vec![qi, qi, qj]),
                Term::new(1.0, vec![qi, qj, qi]),
            ]),
            budget,
            m,
        ));
        out.push(ResidualReport::new(
            format!("Q{a}^2 Q{b} = Q{b} H"),
            metric.residual(&[
                Term::new(1.0, vec![qi, qi, qj]),
                Term::new(-1.0, vec![qj, h]),
            ]),
            budget,
            m,
        ));
    }
    out
}

/// Copy of `bundle` with `eps` added to diagonal entry `index` of block
/// `(block, block)` of `ℋ`.
pub fn corrupt_hamiltonian(
    bundle: &RealizationBundle,
    block: usize,
    index: usize,
    eps: f64,
) -> RealizationBundle {
    let mut out = bundle.clone();
    let mut m = out.h.block_or_zero(block, block);
    m[(index, index)] += C64::new(eps, 0.0);
    out.h.set(block, block, m);
    out
}
