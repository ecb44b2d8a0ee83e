//! Position-grid discretization with Dirichlet closure.
//!
//! `P = −i d/dx` uses the 3-point central stencil and the kinetic operator
//! `P²` the 3-point Laplacian. Both are second order on smooth data, so
//! operator identities derived from `[P, f] = −i f′` hold to `O(h²)` when
//! applied to smooth, boundary-decayed test vectors ([`ProbeSet`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{BlockOperator, OperatorMatrix, C64, ZERO};

pub const MIN_POINTS: usize = 8;
/// Residual below which a convergence measurement has nothing to fit.
pub const SATURATION_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least {MIN_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("grid interval must satisfy x_min < x_max (got {x_min}, {x_max})")]
    EmptyInterval { x_min: f64, x_max: f64 },
    #[error("non-finite sample {value} at node {index} (x = {x})")]
    NonFinite { index: usize, x: f64, value: f64 },
    #[error("residual {0:e} at the coarsest grid is saturated; no order to measure")]
    Saturated(f64),
    #[error("convergence measurement needs at least 2 refinements, got {0}")]
    TooFewRefinements(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self, GridError> {
        let g = Self {
            x_min,
            x_max,
            n_points,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.n_points < MIN_POINTS {
            return Err(GridError::TooFewPoints(self.n_points));
        }
        if !(self.x_min < self.x_max) {
            return Err(GridError::EmptyInterval {
                x_min: self.x_min,
                x_max: self.x_max,
            });
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_points)
            .map(|i| self.x_min + i as f64 * h)
            .collect()
    }

    /// Same interval with twice as many points.
    pub fn refined(&self) -> Self {
        Self {
            n_points: 2 * self.n_points,
            ..*self
        }
    }
}

/// Discretized `P`, `P²` and `X` on a grid.
#[derive(Debug, Clone)]
pub struct GridOperatorSet {
    pub grid: Grid,
    pub p: OperatorMatrix,
    /// `−d²/dx²` by the 3-point Laplacian.
    pub kinetic: OperatorMatrix,
    pub x: OperatorMatrix,
}

pub fn build_grid_operators(g: &Grid) -> Result<GridOperatorSet, GridError> {
    g.validate()?;
    let n = g.n_points;
    let h = g.h();
    let mut p = OperatorMatrix::zeros(n);
    let mut kinetic = OperatorMatrix::zeros(n);
    let hop = C64::new(0.0, -1.0 / (2.0 * h));
    for i in 0..n {
        kinetic[(i, i)] = C64::new(2.0 / (h * h), 0.0);
        if i + 1 < n {
            p[(i, i + 1)] = hop;
            p[(i + 1, i)] = -hop;
            kinetic[(i, i + 1)] = C64::new(-1.0 / (h * h), 0.0);
            kinetic[(i + 1, i)] = C64::new(-1.0 / (h * h), 0.0);
        }
    }
    let x = OperatorMatrix::from_real_diagonal(&g.points());
    Ok(GridOperatorSet {
        grid: *g,
        p,
        kinetic,
        x,
    })
}

/// `diag(f(x_i))`, rejecting non-finite samples.
pub fn multiplication_operator(
    g: &Grid,
    f: impl Fn(f64) -> f64,
) -> Result<OperatorMatrix, GridError> {
    let samples = g.points().into_iter().map(f).collect::<Vec<_>>();
    diagonal_from_samples(g, &samples)
}

pub fn diagonal_from_samples(g: &Grid, samples: &[f64]) -> Result<OperatorMatrix, GridError> {
    for (index, (&value, x)) in samples.iter().zip(g.points()).enumerate() {
        if !value.is_finite() {
            return Err(GridError::NonFinite { index, x, value });
        }
    }
    Ok(OperatorMatrix::from_real_diagonal(samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceEstimate {
    pub order: f64,
    pub spacings: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Least-squares slope of `log r` against `log h` over `refinements`
/// successive doublings of the point count starting at `g0`.
pub fn convergence_order(
    mut residual_fn: impl FnMut(&Grid) -> f64,
    g0: &Grid,
    refinements: usize,
) -> Result<ConvergenceEstimate, GridError> {
    if refinements < 2 {
        return Err(GridError::TooFewRefinements(refinements));
    }
    g0.validate()?;
    let mut grid = *g0;
    let mut spacings = Vec::with_capacity(refinements + 1);
    let mut residuals = Vec::with_capacity(refinements + 1);
    for step in 0..=refinements {
        let r = residual_fn(&grid);
        if step == 0 && !(r >= SATURATION_FLOOR) {
            return Err(GridError::Saturated(r));
        }
        spacings.push(grid.h());
        residuals.push(r);
        grid = grid.refined();
    }
    let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    Ok(ConvergenceEstimate {
        order: least_squares_slope(&xs, &ys),
        spacings,
        residuals,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Boundary layers excluded from every probe residual.
pub const BOUNDARY_LAYERS: usize = 3;
/// Hermite functions `φ₀ … φ₃` used as probes.
pub const PROBE_COUNT: usize = 4;

/// Smooth, boundary-decayed test vectors for measuring grid operator
/// residuals: normalized Hermite functions placed in one block component at
/// a time. Norms use the discrete `L²` weight `h`.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    grid: Grid,
    functions: Vec<Vec<f64>>,
    boundary_layers: usize,
}

impl ProbeSet {
    pub fn hermite(grid: &Grid) -> Self {
        let h = grid.h();
        let functions = (0..PROBE_COUNT)
            .map(|k| {
                let raw: Vec<f64> = grid
                    .points()
                    .iter()
                    .map(|&x| hermite_function(k, x))
                    .collect();
                let norm = (h * raw.iter().map(|v| v * v).sum::<f64>()).sqrt();
                raw.into_iter().map(|v| v / norm).collect()
            })
            .collect();
        Self {
            grid: *grid,
            functions,
            boundary_layers: BOUNDARY_LAYERS,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary_layers(&self) -> usize {
        self.boundary_layers
    }

    /// Probe vectors as block vectors: each Hermite function placed in one
    /// block component of a `blocks`-component space.
    pub fn block_vectors(&self, blocks: usize) -> Vec<Vec<Vec<C64>>> {
        let n = self.grid.n_points;
        let mut out = Vec::with_capacity(blocks * self.functions.len());
        for b in 0..blocks {
            for f in &self.functions {
                let mut v = vec![vec![ZERO; n]; blocks];
                v[b] = real_vector(f);
                out.push(v);
            }
        }
        out
    }

    /// Discrete `L²` norm of a block vector over interior nodes.
    pub fn interior_norm(&self, v: &[Vec<C64>]) -> f64 {
        let lo = self.boundary_layers;
        let h = self.grid.h();
        let acc: f64 = v
            .iter()
            .map(|comp| {
                comp[lo..comp.len() - lo]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        (h * acc).sqrt()
    }

    /// Largest interior `‖B ψ‖` over probes `ψ` (every block component).
    pub fn max_action_norm(&self, b: &BlockOperator) -> f64 {
        let n = self.grid.n_points;
        assert_eq!(b.inner_dim(), n, "probe grid does not match operator");
        let h = self.grid.h();
        let lo = self.boundary_layers;
        let hi = n - self.boundary_layers;
        let mut worst: f64 = 0.0;
        for col in 0..b.blocks() {
            for f in &self.functions {
                let v: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
                let mut acc = 0.0;
                for row in 0..b.blocks() {
                    if let Some(m) = b.block(row, col) {
                        let out = m.apply(&v);
                        acc += out[lo..hi].iter().map(|z| z.norm_sqr()).sum::<f64>();
                    }
                }
                worst = worst.max((h * acc).sqrt());
            }
        }
        worst
    }

    /// Same as [`Self::max_action_norm`] for a scalar (unblocked) operator.
    pub fn max_action_norm_scalar(&self, m: &OperatorMatrix) -> f64 {
        let mut b = BlockOperator::zeros(1, m.dim());
        b.set(0, 0, m.clone());
        self.max_action_norm(&b)
    }
}

/// Normalized Hermite function `φ_k(x) = (2^k k! √π)^{−½} H_k(x) e^{−x²/2}`.
pub fn hermite_function(k: usize, x: f64) -> f64 {
    let mut h_prev = 0.0;
    let mut h = 1.0;
    for j in 0..k {
        let next = 2.0 * x * h - 2.0 * j as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    let mut norm = std::f64::consts::PI.sqrt();
    for j in 1..=k {
        norm *= 2.0 * j as f64;
    }
    h * (-0.5 * x * x).exp() / norm.sqrt()
}

/// Interior max-norm of `v`, skipping `layers` nodes at each end.
pub fn interior_max(v: &[C64], layers: usize) -> f64 {
    v[layers..v.len() - layers]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn real_vector(samples: &[f64]) -> Vec<C64> {
    samples.iter().map(|&x| C64::new(x, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutator;

    #[test]
    fn too_few_points_rejected() {
        assert!(matches!(
            Grid::new(0.0, 1.0, 7),
            Err(GridError::TooFewPoints(7))
        ));
        assert!(Grid::new(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn positions_and_multiplication() {
        let g = Grid::new(-1.0, 1.0, 9).unwrap();
        let ops = build_grid_operators(&g).unwrap();
        let d = ops.x.diagonal();
        assert_eq!(d[0].re, -1.0);
        assert_eq!(d[4].re, 0.0);
        assert_eq!(d[8].re, 1.0);
        assert!(d.windows(2).all(|w| w[1].re > w[0].re));
        assert_eq!(
            multiplication_operator(&g, |_| 1.0).unwrap(),
            OperatorMatrix::identity(9)
        );
        let sq = multiplication_operator(&g, |x| x * x).unwrap();
        assert_eq!(sq[(0, 0)].re, 1.0);
        assert_eq!(sq[(4, 4)].re, 0.0);
        assert_eq!(sq[(8, 8)].re, 1.0);
    }

    #[test]
    fn singular_sample_named() {
        let g = Grid::new(-1.0, 1.0, 9).unwrap();
        match multiplication_operator(&g, |x| 1.0 / x) {
            Err(GridError::NonFinite { index, x, .. }) => {
                assert_eq!(index, 4);
                assert_eq!(x, 0.0);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn operators_are_hermitian() {
        let g = Grid::new(-3.0, 2.0, 40).unwrap();
        let ops = build_grid_operators(&g).unwrap();
        assert_eq!(ops.p.hermiticity_defect(), 0.0);
        assert_eq!(ops.kinetic.hermiticity_defect(), 0.0);
        assert_eq!(ops.x.hermiticity_defect(), 0.0);
    }

    #[test]
    fn momentum_on_sine_within_taylor_bound() {
        let g = Grid::new(0.0, 6.0, 300).unwrap();
        let ops = build_grid_operators(&g).unwrap();
        let h = g.h();
        let v: Vec<C64> = g.points().iter().map(|&x| C64::new(x.sin(), 0.0)).collect();
        let pv = ops.p.apply(&v);
        // P = −i d/dx, so i·P sin = cos.
        let err = (1..g.n_points - 1)
            .map(|i| ((pv[i] * C64::new(0.0, 1.0)).re - g.points()[i].cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= h * h / 6.0 * (1.0 + 1e-6), "err {err}");
    }

    #[test]
    fn momentum_exact_on_quadratics() {
        let g = Grid::new(-2.0, 2.0, 17).unwrap();
        let ops = build_grid_operators(&g).unwrap();
        let xs = g.points();
        let v: Vec<C64> = xs
            .iter()
            .map(|&x| C64::new(3.0 * x * x - x + 2.0, 0.0))
            .collect();
        let pv = ops.p.apply(&v);
        let kv = ops.kinetic.apply(&v);
        for i in 1..g.n_points - 1 {
            let d1 = 6.0 * xs[i] - 1.0;
            assert!((pv[i] - C64::new(0.0, -d1)).norm() < 1e-12);
            assert!((kv[i].re + 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn position_momentum_commutator_converges_on_smooth_vectors() {
        // [X, P] = i·(tridiagonal average); equals i only in the limit.
        let mut errs = Vec::new();
        for n in [100, 200, 400] {
            let g = Grid::new(-8.0, 8.0, n).unwrap();
            let ops = build_grid_operators(&g).unwrap();
            let k = commutator(&ops.x, &ops.p).unwrap();
            let v = real_vector(
                &g.points()
                    .iter()
                    .map(|&x| (-x * x / 2.0).exp())
                    .collect::<Vec<_>>(),
            );
            let kv = k.apply(&v);
            let r: Vec<C64> = kv
                .iter()
                .zip(&v)
                .map(|(a, b)| a - b * C64::new(0.0, 1.0))
                .collect();
            errs.push((g.h(), interior_max(&r, 2)));
        }
        let est = convergence_order(
            {
                let mut it = errs.clone().into_iter();
                move |_| it.next().unwrap().1
            },
            &Grid::new(-8.0, 8.0, 100).unwrap(),
            2,
        )
        .unwrap();
        assert!((est.order - 2.0).abs() < 0.1, "order {}", est.order);
    }

    #[test]
    fn synthetic_orders() {
        let g0 = Grid::new(0.0, 1.0, 20).unwrap();
        let quad = convergence_order(|g| 3.0 * g.h().powi(2), &g0, 3).unwrap();
        assert!((quad.order - 2.0).abs() < 0.05);
        let lin = convergence_order(|g| g.h(), &g0, 3).unwrap();
        assert!((lin.order - 1.0).abs() < 0.05);
        let scaled = convergence_order(|g| 1e4 * g.h().powi(2), &g0, 3).unwrap();
        assert!((scaled.order - quad.order).abs() < 1e-12);
    }

    #[test]
    fn saturated_and_too_few_refinements() {
        let g0 = Grid::new(0.0, 1.0, 20).unwrap();
        assert!(matches!(
            convergence_order(|_| 1e-15, &g0, 2),
            Err(GridError::Saturated(_))
        ));
        assert!(matches!(
            convergence_order(|g| g.h(), &g0, 1),
            Err(GridError::TooFewRefinements(1))
        ));
    }

    #[test]
    fn hermite_probes_are_normalized() {
        let g = Grid::new(-8.0, 8.0, 400).unwrap();
        let probes = ProbeSet::hermite(&g);
        let id = OperatorMatrix::identity(400);
        let n = probes.max_action_norm_scalar(&id);
        assert!((n - 1.0).abs() < 1e-12);
        // φ₀ and φ₁ are orthogonal on a symmetric grid
        let xs = g.points();
        let dot: f64 = xs
            .iter()
            .map(|&x| hermite_function(0, x) * hermite_function(1, x))
            .sum();
        assert!(dot.abs() < 1e-12);
    }
}
