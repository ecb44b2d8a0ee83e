//! The four jobs and their JSON reports.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use psslab::fock::StructureFunction;
use psslab::grid::{convergence_order, ProbeSet, SATURATION_FLOOR};
use psslab::realizations::{
    build_order_p_combination, build_superpotential_realization, embedding_analysis, orthofermions,
    pseudofermion_b, reduce_via_u4, u3, EmbeddingAnalysis, Representation, KHARE_CONSTRAINT_TOL,
};
use psslab::spectra::{
    closed_form_spectrum_a, closed_form_spectrum_b, relativistic_energies, spectrum_of,
    spectrum_with_comparison, C3SpectrumParams, RelativisticLevel, RelativisticParams,
    SpectrumOptions, SpectrumReport, CLOSED_FORM_TOL,
};
use psslab::superpotential::{
    consistency_residuals, ossqm_constraint_residual, solve_unequal_case, H4Choice, Superpotential,
    DEFAULT_DELTA,
};
use psslab::verify::{
    all_pass, check_orthofermion, check_ossqm, check_pseudofermion, check_psssqm, check_sec2,
    ResidualReport, EXACT_BUDGET, FOCK_BUDGET, GRID_BUDGET_COEFF,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Sec2Hamiltonian, Selector};
use crate::realize::Job;

pub const SCHEMA: &str = "psslab/1";
const DEFAULT_EMBEDDING_TOL: f64 = 1e-6;
const DEFAULT_REDUCE_TOL: f64 = 1e-11;
const UNEQUAL_CONSISTENCY_TOL: f64 = 1e-10;

/// Serialized report plus the pass flag that decides the exit code.
pub struct Outcome {
    pub pass: bool,
    /// Pretty-printed report in field declaration order.
    pub text: String,
    pub json: serde_json::Value,
    pub spectrum: Option<SpectrumReport>,
}

impl Outcome {
    fn new<T: Serialize>(pass: bool, report: &T) -> Result<Self> {
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        Ok(Self {
            pass,
            text,
            json: serde_json::to_value(report)?,
            spectrum: None,
        })
    }
}

#[derive(Serialize)]
struct Header {
    schema: &'static str,
    command: &'static str,
    realization: String,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget_base: Option<f64>,
}

fn header(job: &Job, command: &'static str, pass: bool, fock: bool) -> Header {
    Header {
        schema: SCHEMA,
        command,
        realization: job.cfg.realization.to_string(),
        pass,
        dim: fock.then_some(job.dim),
        budget_base: job.budget,
    }
}

fn uses_fock(job: &Job) -> bool {
    match job.cfg.realization {
        Selector::FixedMatrices | Selector::Relativistic | Selector::OssqmKhare => false,
        Selector::Superpotential => job.cfg.grid.is_none(),
        _ => true,
    }
}

fn report(relation: &str, residual: f64, budget: f64, window_margin: usize) -> ResidualReport {
    ResidualReport {
        relation: relation.to_string(),
        residual,
        budget,
        pass: residual <= budget,
        window_margin,
        derived_from: None,
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ConvergenceRow {
    relation: String,
    spacings: Vec<f64>,
    residuals: Vec<f64>,
    order: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    #[serde(flatten)]
    header: Header,
    relations: Vec<ResidualReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: Option<ConvergenceSummary>,
}

#[derive(Serialize)]
struct ConvergenceSummary {
    min_order: f64,
    max_order: f64,
    rows: Vec<ConvergenceRow>,
}

pub fn verify(job: &Job) -> Result<Outcome> {
    let relations = match job.cfg.realization {
        Selector::FixedMatrices => fixed_matrix_reports(job)?,
        Selector::Relativistic => {
            bail!("realization relativistic supports only the spectrum command")
        }
        Selector::Sec2Charges => {
            let s = job.sec2()?;
            let h = match job.cfg.hamiltonian.unwrap_or_default() {
                Sec2Hamiltonian::Stated => s.h.clone(),
                Sec2Hamiltonian::Consistent => s.consistent_hamiltonian()?,
            };
            check_sec2(
                &s.q1,
                &s.q2,
                &h,
                &s.window,
                job.budget.unwrap_or(FOCK_BUDGET),
            )
        }
        _ => {
            let bundle = job.bundle()?;
            let mut out = check_psssqm(&bundle, job.budget);
            if job.cfg.realization == Selector::Superpotential {
                out.extend(unequal_consistency(job)?);
            }
            out
        }
    };
    let convergence = match job.cfg.convergence {
        Some(conv) => Some(convergence(
            job,
            conv.min_order,
            conv.max_order,
            conv.refinements,
        )?),
        None => None,
    };
    let pass = all_pass(&relations)
        && convergence
            .as_ref()
            .is_none_or(|c| c.rows.iter().all(|r| r.pass));
    let rep = VerifyReport {
        header: header(job, "verify", pass, uses_fock(job)),
        relations,
        convergence,
    };
    Outcome::new(pass, &rep)
}

fn fixed_matrix_reports(job: &Job) -> Result<Vec<ResidualReport>> {
    let budget = job.budget.unwrap_or(EXACT_BUDGET);
    let b = pseudofermion_b();
    let mut out = check_pseudofermion(&b, &b.adjoint(), budget);
    out.extend(check_orthofermion(&orthofermions(2), budget));
    let xi = [Complex64::new(0.5, 0.5), Complex64::new(-0.5, 0.5)];
    let (bt, _) = build_order_p_combination(2, &xi)?;
    let u = u3();
    let conj = &(&u * &bt) * &u.adjoint();
    out.push(report(
        "U3 b_xi U3^dag = b",
        conj.max_abs_diff(&b),
        budget,
        0,
    ));
    Ok(out)
}

/// Self-consistency of the closed-form unequal solution on the grid nodes,
/// for distinct polynomial superpotentials.
fn unequal_consistency(job: &Job) -> Result<Vec<ResidualReport>> {
    let Some(grid) = job.grid()? else {
        return Ok(Vec::new());
    };
    let (w1, w2) = job.superpotentials(Some(&grid.points()))?;
    let (Superpotential::Polynomial(p1), Superpotential::Polynomial(p2)) = (&w1, &w2) else {
        return Ok(Vec::new());
    };
    if p1 == p2 {
        return Ok(Vec::new());
    }
    let gap = p1.sub(p2);
    let points: Vec<f64> = grid
        .points()
        .into_iter()
        .filter(|&x| gap.eval(x).abs() >= DEFAULT_DELTA)
        .collect();
    let sol = solve_unequal_case(&w1, &w2, &points, DEFAULT_DELTA)?;
    let res = consistency_residuals(&w1, &w2, &sol)?;
    let worst = res.iter().cloned().fold(0.0, f64::max);
    Ok(vec![report(
        "unequal-case consistency",
        worst,
        UNEQUAL_CONSISTENCY_TOL,
        0,
    )])
}

fn convergence(
    job: &Job,
    min_order: f64,
    max_order: f64,
    refinements: usize,
) -> Result<ConvergenceSummary> {
    let g0 = job.grid()?.context("convergence needs a grid")?;
    let mut grids = vec![g0];
    for _ in 0..refinements {
        grids.push(grids.last().unwrap().refined());
    }
    let (w1, w2) = job.superpotentials(Some(&g0.points()))?;
    let pair_cfg = job.cfg.w1.as_ref().and_then(|w| w.pair_spec()).is_some()
        || job.cfg.w2.as_ref().and_then(|w| w.pair_spec()).is_some();
    let h4 = job
        .cfg
        .h4
        .as_ref()
        .map(|h| h.choice())
        .unwrap_or(H4Choice::Zero);
    let c = job.cfg.coupling();
    let runs: Vec<Vec<ResidualReport>> = grids
        .par_iter()
        .map(|g| -> Result<Vec<ResidualReport>> {
            let (a, b) = if pair_cfg {
                job.superpotentials(Some(&g.points()))?
            } else {
                (w1.clone(), w2.clone())
            };
            let bundle =
                build_superpotential_realization(&a, &b, &h4, &Representation::Grid(*g), c)?;
            Ok(check_psssqm(&bundle, job.budget))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rel) in runs[0].iter().enumerate() {
        if rel.derived_from.is_some() || rel.residual < SATURATION_FLOOR {
            continue;
        }
        let lookup = |g: &psslab::grid::Grid| {
            let k = grids.iter().position(|x| x == g).unwrap();
            runs[k][i].residual
        };
        let est = convergence_order(lookup, &g0, refinements)?;
        rows.push(ConvergenceRow {
            relation: rel.relation.clone(),
            pass: (min_order..=max_order).contains(&est.order),
            order: Some(est.order),
            spacings: est.spacings,
            residuals: est.residuals,
        });
    }
    Ok(ConvergenceSummary {
        min_order,
        max_order,
        rows,
    })
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SpectrumJob {
    #[serde(flatten)]
    header: Header,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrum: Option<SpectrumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relativistic: Option<Vec<RelativisticLevel>>,
}

pub fn spectrum(job: &Job, closed_form: bool) -> Result<Outcome> {
    if job.cfg.realization == Selector::Relativistic {
        if closed_form {
            bail!("--closed-form applies only to bosonized realizations");
        }
        let levels = relativistic_energies(&RelativisticParams {
            omega: job.cfg.omega.unwrap_or(1.0),
            lambda: job.cfg.lambda.unwrap_or(0.0),
            n_max: job.cfg.n_max.unwrap_or(50),
        })?;
        let rep = SpectrumJob {
            header: header(job, "spectrum", true, false),
            spectrum: None,
            relativistic: Some(levels),
        };
        return Outcome::new(true, &rep);
    }
    let sc = job.cfg.spectrum.unwrap_or_default();
    let opts = SpectrumOptions {
        cutoff: sc.cutoff,
        cluster_tol: sc.cluster_tol,
    };
    let bundle = job.bundle()?;
    let report = if closed_form {
        let (alpha0, alpha1) = match job.cfg.structure_or_standard() {
            StructureFunction::Standard => (0.0, 0.0),
            StructureFunction::C3Extended { alpha0, alpha1 } => (alpha0, alpha1),
            StructureFunction::Table { .. } => {
                bail!("--closed-form needs a standard or c3 structure function")
            }
        };
        let k_max = sc.k_max.unwrap_or(job.dim / 3);
        let f = |m: &Option<psslab::realizations::ModulationFunction>, v: f64| {
            m.clone()
                .unwrap_or(psslab::realizations::ModulationFunction::constant(v))
        };
        let expected = match job.cfg.realization {
            Selector::BosonizedA(mu) => closed_form_spectrum_a(
                &C3SpectrumParams {
                    alpha0,
                    alpha1,
                    mu,
                    k_max,
                },
                &f(&job.cfg.f, 1.0),
                &f(&job.cfg.h3bar, 0.0),
            )?,
            Selector::BosonizedB(mu) => closed_form_spectrum_b(
                &C3SpectrumParams {
                    alpha0,
                    alpha1,
                    mu,
                    k_max,
                },
                &f(&job.cfg.f1, 1.0),
                &f(&job.cfg.f2, 1.0),
                job.boundary(),
            )?,
            _ => bail!("--closed-form applies only to bosonized realizations"),
        };
        spectrum_with_comparison(
            &bundle,
            &expected,
            &opts,
            sc.tolerance.unwrap_or(CLOSED_FORM_TOL),
        )?
    } else {
        spectrum_of(&bundle, &opts)?
    };
    let pass = report.comparison.as_ref().is_none_or(|c| c.pass);
    let rep = SpectrumJob {
        header: header(job, "spectrum", pass, uses_fock(job)),
        spectrum: Some(report.clone()),
        relativistic: None,
    };
    let mut out = Outcome::new(pass, &rep)?;
    out.spectrum = Some(report);
    Ok(out)
}

// ---------------------------------------------------------------------------
// reduce
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ComponentReport {
    mu: usize,
    name: String,
    pass: bool,
    relations: Vec<ResidualReport>,
}

#[derive(Serialize)]
struct ReduceReport {
    #[serde(flatten)]
    header: Header,
    tolerance: f64,
    offdiag_norm: f64,
    unitarity_defect: f64,
    components: Vec<ComponentReport>,
}

pub fn reduce(job: &Job) -> Result<Outcome> {
    if !matches!(job.cfg.realization, Selector::GdoaA | Selector::GdoaB) {
        bail!(
            "reduce applies to gdoa_a and gdoa_b, not {}",
            job.cfg.realization
        );
    }
    let alg = job.algebra()?;
    let red = reduce_via_u4(&job.bundle()?, &alg)?;
    let components: Vec<ComponentReport> = red
        .components
        .par_iter()
        .enumerate()
        .map(|(mu, comp)| {
            let relations = check_psssqm(comp, job.budget);
            ComponentReport {
                mu,
                name: comp.name.clone(),
                pass: all_pass(&relations),
                relations,
            }
        })
        .collect();
    let tol = job.cfg.reduce_tol.unwrap_or(DEFAULT_REDUCE_TOL);
    let pass =
        red.offdiag_norm <= tol && red.unitarity_defect <= tol && components.iter().all(|c| c.pass);
    let rep = ReduceReport {
        header: header(job, "reduce", pass, true),
        tolerance: tol,
        offdiag_norm: red.offdiag_norm,
        unitarity_defect: red.unitarity_defect,
        components,
    };
    Outcome::new(pass, &rep)
}

// ---------------------------------------------------------------------------
// ossqm
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Check {
    value: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn new(value: f64, tolerance: f64) -> Self {
        Self {
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Serialize)]
struct Mapping {
    zeta: [f64; 2],
    rho: [f64; 2],
    charge: Check,
    hamiltonian: Check,
}

#[derive(Serialize)]
struct OssqmReport {
    #[serde(flatten)]
    header: Header,
    constraint: Check,
    #[serde(skip_serializing_if = "Option::is_none")]
    ossqm_relations: Option<Vec<ResidualReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mapping: Option<Mapping>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mapped_psssqm: Option<Vec<ResidualReport>>,
    embedding: EmbeddingAnalysis,
}

pub fn ossqm(job: &Job) -> Result<Outcome> {
    if job.cfg.realization != Selector::OssqmKhare {
        bail!("ossqm applies to ossqm_khare, not {}", job.cfg.realization);
    }
    let grid = job.grid()?.context("ossqm_khare needs a grid")?;
    let points = grid.points();
    let (w1, w2) = job.superpotentials(Some(&points))?;
    let constraint = Check::new(
        ossqm_constraint_residual(&w1, &w2, &points)?,
        KHARE_CONSTRAINT_TOL,
    );
    let embedding = embedding_analysis(
        &w1,
        &w2,
        &points,
        job.cfg.embedding_tol.unwrap_or(DEFAULT_EMBEDDING_TOL),
    )?;
    let (mut relations, mut mapping, mut mapped_psssqm) = (None, None, None);
    if constraint.pass {
        let k = job.khare()?;
        let base = job
            .budget
            .unwrap_or(GRID_BUDGET_COEFF * grid.h() * grid.h());
        let probes = ProbeSet::hermite(&grid);
        let metric = psslab::verify::Metric::Probes(probes.clone());
        let ((rel, mapped), map) = rayon::join(
            || {
                rayon::join(
                    || check_ossqm(&k.charges, &k.h, &metric, base),
                    || check_psssqm(&k.mapped, job.budget),
                )
            },
            || -> Result<Mapping> {
                let ps = build_superpotential_realization(
                    &w1,
                    &w2,
                    &H4Choice::Zero,
                    &Representation::Grid(grid),
                    job.cfg.coupling(),
                )?;
                let budget = base
                    * probes
                        .max_action_norm(&ps.q)
                        .max(probes.max_action_norm(&ps.h))
                        .max(1.0);
                let dq = probes.max_action_norm(&k.mapped.q.try_sub(&ps.q)?);
                let dh = probes.max_action_norm(&k.mapped.h.try_sub(&ps.h)?);
                let (zeta, rho) = job.mixing();
                Ok(Mapping {
                    zeta: [zeta.re, zeta.im],
                    rho: [rho.re, rho.im],
                    charge: Check::new(dq, budget),
                    hamiltonian: Check::new(dh, budget),
                })
            },
        );
        relations = Some(rel);
        mapped_psssqm = Some(mapped);
        mapping = Some(map?);
    }
    let pass = constraint.pass
        && relations.as_deref().is_some_and(all_pass)
        && mapped_psssqm.as_deref().is_some_and(all_pass)
        && mapping
            .as_ref()
            .is_some_and(|m| m.charge.pass && m.hamiltonian.pass)
        && embedding.embeddable;
    let rep = OssqmReport {
        header: header(job, "ossqm", pass, false),
        constraint,
        ossqm_relations: relations,
        mapping,
        mapped_psssqm,
        embedding,
    };
    Outcome::new(pass, &rep)
}

/// One-line human summary: primal relation counts, or level counts for
/// spectrum jobs.
pub fn summary(json: &serde_json::Value) -> String {
    let mut counts: BTreeMap<bool, usize> = BTreeMap::new();
    let mut count = |arr: Option<&Vec<serde_json::Value>>| {
        for r in arr.into_iter().flatten() {
            if r.get("derived_from").is_none() {
                *counts.entry(r["pass"].as_bool() == Some(true)).or_insert(0) += 1;
            }
        }
    };
    count(json["relations"].as_array());
    count(json["ossqm_relations"].as_array());
    count(json["mapped_psssqm"].as_array());
    if let Some(comps) = json["components"].as_array() {
        for c in comps {
            count(c["relations"].as_array());
        }
    }
    if let Some(levels) = json["spectrum"]["levels"].as_array() {
        return format!("{} levels", levels.len());
    }
    if let Some(levels) = json["relativistic"].as_array() {
        return format!("{} relativistic levels", levels.len());
    }
    format!(
        "{} relations pass, {} fail",
        counts.get(&true).copied().unwrap_or(0),
        counts.get(&false).copied().unwrap_or(0)
    )
}
