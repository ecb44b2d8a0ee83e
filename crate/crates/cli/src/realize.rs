//! Turning a validated [`JobConfig`] into operator bundles.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use psslab::fock::{FockAlgebra, TrustedWindow};
use psslab::grid::Grid;
use psslab::realizations::{
    build_bosonized_a, build_bosonized_b, build_gdoa_realization_a, build_gdoa_realization_b,
    build_ossqm_khare, build_sec2_charges, build_superpotential_realization, khare_identification,
    BoundaryConvention, KhareRealization, ModulationFunction, RealizationBundle, Representation,
    Space, GDOA_MARGIN,
};
use psslab::superpotential::{build_diagonal_pair, H4Choice, Superpotential};
use psslab::verify::corrupt_hamiltonian;

use crate::config::{JobConfig, Sec2Hamiltonian, Selector, SuperpotentialConfig};

pub const DEFAULT_DIM: usize = 48;
const SEC2_MARGIN: usize = 4;

/// Job parameters after command-line overrides.
pub struct Job {
    pub cfg: JobConfig,
    pub dim: usize,
    pub budget: Option<f64>,
}

impl Job {
    pub fn new(cfg: JobConfig, dim: Option<usize>, budget: Option<f64>) -> Result<Self> {
        if let Some(b) = budget {
            if !(b > 0.0) {
                bail!("budget must be positive, got {b}");
            }
        }
        let dim = dim.or(cfg.dim).unwrap_or(DEFAULT_DIM);
        let budget = budget.or(cfg.budget);
        Ok(Self { cfg, dim, budget })
    }

    pub fn algebra(&self) -> Result<FockAlgebra> {
        Ok(FockAlgebra::new(
            self.cfg.structure_or_standard(),
            self.dim,
        )?)
    }

    fn f(&self) -> ModulationFunction {
        self.cfg
            .f
            .clone()
            .unwrap_or(ModulationFunction::constant(1.0))
    }

    fn h3bar(&self) -> ModulationFunction {
        self.cfg
            .h3bar
            .clone()
            .unwrap_or(ModulationFunction::constant(0.0))
    }

    fn f1(&self) -> ModulationFunction {
        self.cfg
            .f1
            .clone()
            .unwrap_or(ModulationFunction::constant(1.0))
    }

    fn f2(&self) -> ModulationFunction {
        self.cfg
            .f2
            .clone()
            .unwrap_or(ModulationFunction::constant(1.0))
    }

    pub fn boundary(&self) -> BoundaryConvention {
        self.cfg.boundary.unwrap_or_default()
    }

    fn gdoa_margin(&self) -> usize {
        self.cfg.margin.unwrap_or(GDOA_MARGIN)
    }

    pub fn grid(&self) -> Result<Option<Grid>> {
        self.cfg.grid.map(|g| g.grid()).transpose()
    }

    /// `(W₁, W₂)`, sampled on `points` when a diagonalizing pair is requested.
    pub fn superpotentials(
        &self,
        points: Option<&[f64]>,
    ) -> Result<(Superpotential, Superpotential)> {
        let w1_cfg = self.cfg.w1.as_ref().context("w1 is required")?;
        let pair =
            |cfg: &SuperpotentialConfig| -> Result<Option<(Superpotential, Superpotential)>> {
                let Some(spec) = cfg.pair_spec() else {
                    return Ok(None);
                };
                let pts = points.context("a diag_pair superpotential needs a grid")?;
                let p = build_diagonal_pair(&spec, pts)?;
                Ok(Some((p.w1, p.w2)))
            };
        let w1 = match pair(w1_cfg)? {
            Some((w1, w2)) if self.cfg.w2.is_none() => return Ok((w1, w2)),
            Some((w1, _)) => w1,
            None => poly_superpotential(w1_cfg),
        };
        let w2 = match &self.cfg.w2 {
            None => w1.clone(),
            Some(cfg) => match pair(cfg)? {
                Some((_, w2)) => w2,
                None => poly_superpotential(cfg),
            },
        };
        Ok((w1, w2))
    }

    fn h4(&self) -> H4Choice {
        self.cfg
            .h4
            .as_ref()
            .map(|h| h.choice())
            .unwrap_or(H4Choice::Zero)
    }

    /// The bundle a verify or spectrum job runs on, with any configured
    /// corruption applied.
    pub fn bundle(&self) -> Result<RealizationBundle> {
        let c = self.cfg.coupling();
        let b = match self.cfg.realization {
            Selector::Sec2Charges => {
                let s = self.sec2()?;
                let h = match self.cfg.hamiltonian.unwrap_or_default() {
                    Sec2Hamiltonian::Stated => s.h.clone(),
                    Sec2Hamiltonian::Consistent => s.consistent_hamiltonian()?,
                };
                RealizationBundle::new(
                    "sec2_charges",
                    s.pseudosupercharge(c)?,
                    h,
                    c,
                    Space::Fock { window: s.window },
                )?
            }
            Selector::Superpotential => {
                let grid = self.grid()?;
                let points = grid.map(|g| g.points());
                let (w1, w2) = self.superpotentials(points.as_deref())?;
                let rep = match grid {
                    Some(g) => Representation::Grid(g),
                    None => Representation::Fock {
                        dim: self.dim,
                        margin: self.cfg.margin,
                    },
                };
                build_superpotential_realization(&w1, &w2, &self.h4(), &rep, c)?
            }
            Selector::GdoaA => build_gdoa_realization_a(
                &self.algebra()?,
                &self.f(),
                &self.h3bar(),
                c,
                self.gdoa_margin(),
            )?,
            Selector::GdoaB => build_gdoa_realization_b(
                &self.algebra()?,
                &self.f1(),
                &self.f2(),
                c,
                self.boundary(),
                self.gdoa_margin(),
            )?,
            Selector::BosonizedA(mu) => build_bosonized_a(
                &self.algebra()?,
                &self.f(),
                &self.h3bar(),
                c,
                mu,
                self.gdoa_margin(),
            )?,
            Selector::BosonizedB(mu) => build_bosonized_b(
                &self.algebra()?,
                &self.f1(),
                &self.f2(),
                c,
                mu,
                self.boundary(),
                self.gdoa_margin(),
            )?,
            Selector::OssqmKhare => self.khare()?.mapped,
            Selector::FixedMatrices | Selector::Relativistic => {
                bail!(
                    "realization {} has no operator bundle",
                    self.cfg.realization
                )
            }
        };
        match self.cfg.corrupt {
            Some(k) => {
                if k.block >= b.h.blocks() || k.index >= b.h.inner_dim() {
                    bail!(
                        "corrupt entry ({}, {}) outside {} blocks of dim {}",
                        k.block,
                        k.index,
                        b.h.blocks(),
                        b.h.inner_dim()
                    );
                }
                Ok(corrupt_hamiltonian(&b, k.block, k.index, k.eps))
            }
            None => Ok(b),
        }
    }

    pub fn sec2(&self) -> Result<psslab::realizations::Sec2Charges> {
        let omega = self.cfg.omega.unwrap_or(1.0);
        let margin = self.cfg.margin.unwrap_or(SEC2_MARGIN);
        TrustedWindow::new(self.dim, margin)?;
        Ok(build_sec2_charges(&self.algebra()?, omega, margin)?)
    }

    pub fn mixing(&self) -> (Complex64, Complex64) {
        match (self.cfg.zeta, self.cfg.rho) {
            (Some(z), Some(r)) => (Complex64::new(z[0], z[1]), Complex64::new(r[0], r[1])),
            _ => khare_identification(self.cfg.coupling()),
        }
    }

    pub fn khare(&self) -> Result<KhareRealization> {
        let grid = self.grid()?.context("ossqm_khare needs a grid")?;
        let points = grid.points();
        let (w1, w2) = self.superpotentials(Some(&points))?;
        let (zeta, rho) = self.mixing();
        Ok(build_ossqm_khare(
            &w1,
            &w2,
            &grid,
            zeta,
            rho,
            self.cfg.coupling(),
        )?)
    }
}

fn poly_superpotential(cfg: &SuperpotentialConfig) -> Superpotential {
    match cfg {
        SuperpotentialConfig::Poly { coeffs } => Superpotential::poly(coeffs.clone()),
        SuperpotentialConfig::DiagPair { .. } => unreachable!("pairs are resolved by the caller"),
    }
}
