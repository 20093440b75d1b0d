//! The ε-sweep multiplicity experiment: seeds, descents, clustering,
//! concentration analysis and the roundtrip check, assembled per ε.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::concentration::{
    concentration_map, photograph, roundtrip_entry, summarize_roundtrip, ConcentrationReport,
    RoundtripReport,
};
use crate::error::{Error, Result};
use crate::field::{FunctionSpace, OrbifoldFunction};
use crate::geometry::{OrbifoldConfig, OrbifoldPoint};
use crate::ground_state::{solve_ground_state, GroundStateProfile, DEFAULT_R_MAX, DEFAULT_TOL};
use crate::par;
use crate::variational::{
    make_seeds, BumpConfig, Cluster, NehariSolution, Problem, ProblemConfig, SeedKind,
};

/// Seed generation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    /// Samples taken from each positive-dimensional component of `Z`.
    pub z_samples: usize,
    pub max_pairs: usize,
    pub random: usize,
    pub rng_seed: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            z_samples: 4,
            max_pairs: 6,
            random: 3,
            rng_seed: 0,
        }
    }
}

/// Everything a run depends on. Mirrors the command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Preset name or path to an orbifold JSON file.
    pub preset: String,
    pub grid: Option<usize>,
    pub rho_scale: Option<f64>,
    pub p: f64,
    /// Empty means the default sweep for the dimension.
    pub eps: Vec<f64>,
    pub eta: f64,
    pub seeds: SeedConfig,
    pub plateau_ratio: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub cluster_tol: f64,
    /// `δ` as a fraction of `m(E)/ζ`.
    pub delta_fraction: f64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let base = ProblemConfig::new(0.1, 4.0);
        ExperimentConfig {
            preset: "pillowcase2d".into(),
            grid: None,
            rho_scale: None,
            p: 4.0,
            eps: Vec::new(),
            eta: 0.6,
            seeds: SeedConfig::default(),
            plateau_ratio: 0.5,
            max_iters: base.max_iters,
            residual_tol: base.residual_tol,
            cluster_tol: base.cluster_tol,
            delta_fraction: 0.1,
            cache_dir: None,
        }
    }
}

pub fn default_eps(dim: usize) -> Vec<f64> {
    if dim == 2 {
        vec![0.2, 0.1, 0.05]
    } else {
        vec![0.15, 0.1]
    }
}

impl ExperimentConfig {
    pub fn orbifold_config(&self) -> Result<OrbifoldConfig> {
        let mut cfg = OrbifoldConfig::resolve(&self.preset)?;
        if let Some(g) = self.grid {
            cfg.grid_resolution = g;
        }
        if let Some(r) = self.rho_scale {
            cfg.rho_scale = r;
        }
        Ok(cfg)
    }

    fn problem_config(&self, eps: f64) -> ProblemConfig {
        ProblemConfig {
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            cluster_tol: self.cluster_tol,
            ..ProblemConfig::new(eps, self.p)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.5 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta = {} must lie in (1/2, 1)",
                self.eta
            )));
        }
        if !(self.plateau_ratio > 0.0 && self.plateau_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "plateau_ratio = {} must lie in (0, 1]",
                self.plateau_ratio
            )));
        }
        if !(self.delta_fraction > 0.0) {
            return Err(Error::InvalidConfig(
                "delta_fraction must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One component of `Z` as listed in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZComponent {
    pub index: usize,
    pub points: usize,
    pub representative: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub index: usize,
    pub seed: String,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cluster: Option<usize>,
    pub concentration: Option<ConcentrationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concentration_error: Option<String>,
    /// Membership in `Λ_{ε, m(E)/ζ + δ}`.
    pub in_lambda_limit: bool,
    /// Membership in `Λ_{ε, m(J_ε) + δ}`.
    pub in_lambda_min: bool,
}

/// The roundtrip result, or the reason it could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripOutcome {
    pub passed: bool,
    pub report: Option<RoundtripReport>,
    pub failure: Option<String>,
    /// True when the failure is a violated invariant rather than a lack of
    /// concentration.
    pub escaped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    pub count: usize,
    pub required: usize,
    pub clusters: Vec<usize>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsReport {
    pub eps: f64,
    pub bump_radius: f64,
    /// Lowest converged energy, the estimate of `m(J_ε)`.
    pub m_j: Option<f64>,
    pub lambda_limit: f64,
    pub lambda_min: Option<f64>,
    pub solutions: Vec<SolutionRecord>,
    pub clusters: Vec<Cluster>,
    pub roundtrip: RoundtripOutcome,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub preset: String,
    pub n: usize,
    pub p: f64,
    pub grid: usize,
    pub rho: f64,
    pub eta: f64,
    pub zeta: usize,
    pub z_components: Vec<ZComponent>,
    pub cat_z: usize,
    pub m_e: f64,
    /// `m(E)/ζ`.
    pub cone_level: f64,
    pub delta: f64,
    pub sweep: Vec<EpsReport>,
    /// Smallest swept ε whose roundtrip passed.
    pub smallest_passing_eps: Option<f64>,
    /// Violated invariants; nonempty means the run falsified a claim.
    pub falsified: Vec<String>,
}

/// Fields kept for rendering, outside the manifest.
#[derive(Debug, Clone)]
pub struct EpsFields {
    pub eps: f64,
    /// Cluster id and representative field.
    pub representatives: Vec<(usize, OrbifoldFunction)>,
    /// `CF` of `(u⁺)^p` for the lowest non-constant representative.
    pub cf: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub space: Arc<FunctionSpace>,
    pub fields: Vec<EpsFields>,
    /// Wall-clock seconds per stage, for the sidecar log only.
    pub timings: Vec<(String, f64)>,
}

/// Samples of `Z`: every point of a discrete component, farthest-point
/// samples of the others.
pub fn z_points(space: &FunctionSpace, per_component: usize) -> Vec<OrbifoldPoint> {
    let orb = space.orbifold();
    let mut out = Vec::new();
    for (c, comp) in orb.max_stratum().components.iter().enumerate() {
        if comp.len() == 1 {
            out.push(orb.node_as_point(comp[0]));
        } else {
            out.extend(orb.z_samples(c, per_component));
        }
    }
    out
}

pub fn load_profile(cfg: &ExperimentConfig, n: usize) -> Result<GroundStateProfile> {
    match &cfg.cache_dir {
        Some(dir) => GroundStateProfile::cached(dir, n, cfg.p, DEFAULT_R_MAX, DEFAULT_TOL),
        None => solve_ground_state(n, cfg.p, DEFAULT_R_MAX, DEFAULT_TOL),
    }
}

/// Runs the full pipeline for every ε of the sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let clock = Instant::now();
    let orb_cfg = cfg.orbifold_config().map_err(|e| e.at("orbifold"))?;
    let orb = Arc::new(orb_cfg.build().map_err(|e| e.at("orbifold"))?);
    let space = Arc::new(FunctionSpace::new(orb.clone()));
    let n = orb.dim();
    timings.push(("orbifold".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let profile = load_profile(cfg, n).map_err(|e| e.at("ground state"))?;
    timings.push(("ground state".to_string(), clock.elapsed().as_secs_f64()));

    let zeta = orb.max_stratum().zeta;
    let cone_level = profile.m_e / zeta as f64;
    let delta = cfg.delta_fraction * cone_level;
    let eps_list = if cfg.eps.is_empty() {
        default_eps(n)
    } else {
        cfg.eps.clone()
    };
    let samples = z_points(&space, cfg.seeds.z_samples);
    let bump_radius = samples
        .iter()
        .map(|x| orb.injectivity_bound(x))
        .fold(f64::INFINITY, f64::min);
    let bump = BumpConfig {
        radius: bump_radius,
        plateau_ratio: cfg.plateau_ratio,
    };

    let mut sweep = Vec::new();
    let mut fields = Vec::new();
    for &eps in &eps_list {
        let clock = Instant::now();
        let (eps_report, eps_fields) = run_eps(
            cfg, &space, &profile, &samples, &bump, eps, cone_level, delta,
        )?;
        timings.push((format!("eps {eps}"), clock.elapsed().as_secs_f64()));
        sweep.push(eps_report);
        fields.push(eps_fields);
    }

    let smallest_passing_eps = sweep
        .iter()
        .filter(|r| r.roundtrip.passed)
        .map(|r| r.eps)
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.min(e)))
        });
    let mut falsified = Vec::new();
    for r in &sweep {
        if r.roundtrip.escaped {
            falsified.push(format!(
                "eps {}: {}",
                r.eps,
                r.roundtrip
                    .failure
                    .as_deref()
                    .unwrap_or("roundtrip escaped the tube")
            ));
        }
    }
    if let Some(smallest) = sweep.iter().min_by(|a, b| a.eps.total_cmp(&b.eps)) {
        if !smallest.roundtrip.passed && !smallest.roundtrip.escaped {
            let why = smallest
                .roundtrip
                .failure
                .clone()
                .unwrap_or_else(|| "roundtrip endpoint missed its starting point".to_string());
            falsified.push(format!("smallest eps {}: {why}", smallest.eps));
        }
    }

    let z_components = orb
        .max_stratum()
        .components
        .iter()
        .enumerate()
        .map(|(index, comp)| ZComponent {
            index,
            points: comp.len(),
            representative: orb.node_as_point(comp[0]).representative,
        })
        .collect();
    let report = ExperimentReport {
        preset: orb.name().to_string(),
        n,
        p: cfg.p,
        grid: orb.covering().resolution(),
        rho: orb.rho(),
        eta: cfg.eta,
        zeta,
        z_components,
        cat_z: orb.cat_z(),
        m_e: profile.m_e,
        cone_level,
        delta,
        sweep,
        smallest_passing_eps,
        falsified,
    };
    Ok(ExperimentRun {
        report,
        space,
        fields,
        timings,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_eps(
    cfg: &ExperimentConfig,
    space: &FunctionSpace,
    profile: &GroundStateProfile,
    samples: &[OrbifoldPoint],
    bump: &BumpConfig,
    eps: f64,
    cone_level: f64,
    delta: f64,
) -> Result<(EpsReport, EpsFields)> {
    let pcfg = cfg.problem_config(eps);
    let problem = Problem::new(space, &pcfg).map_err(|e| e.at("problem"))?;
    let seeds = make_seeds(
        &problem,
        profile,
        bump,
        samples,
        cfg.seeds.max_pairs,
        cfg.seeds.random,
        cfg.seeds.rng_seed,
    )
    .map_err(|e| e.at("seeds"))?;

    let solutions: Vec<NehariSolution> = par::map_slice(&seeds, |s| problem.descend(s))
        .into_iter()
        .collect::<Result<_>>()
        .map_err(|e| e.at("descent"))?;

    let converged: Vec<usize> = (0..solutions.len())
        .filter(|&i| solutions[i].converged)
        .collect();
    let kept: Vec<NehariSolution> = converged.iter().map(|&i| solutions[i].clone()).collect();
    let clusters = problem.cluster(&kept);
    let mut cluster_of = vec![None; solutions.len()];
    for c in &clusters {
        for &m in &c.members {
            cluster_of[converged[m]] = Some(c.id);
        }
    }

    let m_j = kept
        .iter()
        .map(|s| s.energy)
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.min(e)))
        });
    let lambda_limit = cone_level + delta;
    let lambda_min = m_j.map(|m| m + delta);

    let constant_clusters: Vec<usize> = clusters
        .iter()
        .filter(|c| c.is_constant)
        .map(|c| c.id)
        .collect();
    let concentration = par::map_slice(&solutions, |s| photograph(space, &s.u, pcfg.p, cfg.eta));
    let records: Vec<SolutionRecord> = solutions
        .iter()
        .zip(seeds.iter())
        .zip(concentration)
        .enumerate()
        .map(|(index, ((sol, seed), conc))| {
            let constant = cluster_of[index].is_some_and(|c| constant_clusters.contains(&c));
            let (concentration, concentration_error) = if constant {
                (None, None)
            } else {
                match conc {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            SolutionRecord {
                index,
                seed: seed.kind.label(),
                energy: sol.energy,
                residual: sol.residual,
                iterations: sol.iterations,
                converged: sol.converged,
                cluster: cluster_of[index],
                concentration,
                concentration_error,
                in_lambda_limit: sol.energy <= lambda_limit,
                in_lambda_min: lambda_min.is_some_and(|l| sol.energy <= l),
            }
        })
        .collect();

    let roundtrip = {
        let entries: Result<Vec<_>> = seeds
            .iter()
            .zip(&solutions)
            .filter_map(|(seed, sol)| match &seed.kind {
                SeedKind::Inject { point } => Some((point, sol)),
                _ => None,
            })
            .map(|(x, sol)| {
                roundtrip_entry(space, pcfg.p, cfg.eta, x, &sol.u, sol.energy, sol.converged)
            })
            .collect();
        match entries {
            Ok(entries) => {
                let report = summarize_roundtrip(space, entries);
                let all_converged = report.entries.iter().all(|e| e.converged);
                RoundtripOutcome {
                    passed: report.passed && all_converged,
                    failure: (!all_converged)
                        .then(|| "an injected seed did not converge".to_string()),
                    report: Some(report),
                    escaped: false,
                }
            }
            Err(e) => RoundtripOutcome {
                passed: false,
                report: None,
                escaped: matches!(
                    e.root(),
                    Error::RoundtripEscapedTube { .. } | Error::SupportTooWide { .. }
                ),
                failure: Some(e.to_string()),
            },
        }
    };

    let counted: Vec<usize> = clusters
        .iter()
        .filter(|c| !c.is_constant)
        .map(|c| c.id)
        .collect();
    let required = space.orbifold().cat_z() + 1;
    let holds = counted.len() >= required;
    let ids = counted
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let mut text = format!(
        "eps {eps}: {} distinct non-constant solutions (clusters [{ids}]) {} cat(Z)+1 = {required}",
        counted.len(),
        if holds { ">=" } else { "<" },
    );
    if !roundtrip.passed {
        text.push_str("; roundtrip did not pass, so eps is not yet small enough and the bound is not expected");
    }
    let verdict = Verdict {
        holds,
        count: counted.len(),
        required,
        clusters: counted,
        text,
    };

    let representatives: Vec<(usize, OrbifoldFunction)> = clusters
        .iter()
        .map(|c| (c.id, kept[c.representative].u.clone()))
        .collect();
    let cf = clusters
        .iter()
        .find(|c| !c.is_constant)
        .map(|c| {
            let u = &kept[c.representative].u;
            concentration_map(
                space,
                &u.map(|v| if v > 0.0 { v.powf(pcfg.p) } else { 0.0 }),
            )
        })
        .transpose()?;

    Ok((
        EpsReport {
            eps,
            bump_radius: bump.radius,
            m_j,
            lambda_limit,
            lambda_min,
            solutions: records,
            clusters,
            roundtrip,
            verdict,
        },
        EpsFields {
            eps,
            representatives,
            cf,
        },
    ))
}
