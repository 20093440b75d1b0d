//! The functional `J_ε`, its Nehari manifold, bump injection, descent to
//! critical points and clustering of the results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concentration::cutoff;
use crate::error::{Error, Result};
use crate::field::{FunctionSpace, OrbifoldFunction};
use crate::geometry::{OrbifoldPoint, Point};
use crate::ground_state::GroundStateProfile;
use crate::par;

/// Parameters of one problem instance `(P_ε)` and of its solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub eps: f64,
    pub p: f64,
    pub max_iters: usize,
    /// Stop once the `ε^{-n}`-normalized `H¹_ε` dual norm of `dJ_ε` drops below this.
    pub residual_tol: f64,
    /// Relative `L²` distance under which two solutions are the same.
    pub cluster_tol: f64,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    /// Keep the energy of every accepted iterate.
    #[serde(default)]
    pub record_history: bool,
}

impl ProblemConfig {
    pub fn new(eps: f64, p: f64) -> Self {
        ProblemConfig {
            eps,
            p,
            max_iters: 50_000,
            residual_tol: 1e-8,
            cluster_tol: 0.1,
            armijo: 1e-4,
            record_history: false,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eps = {} not in (0, 1)",
                self.eps
            )));
        }
        if !(self.p > 2.0) {
            return Err(Error::InvalidConfig(format!(
                "p = {} must exceed 2",
                self.p
            )));
        }
        if dim >= 3 && self.p >= 2.0 * dim as f64 / (dim as f64 - 2.0) {
            return Err(Error::InvalidConfig(format!(
                "p = {} is not subcritical in dimension {dim}",
                self.p
            )));
        }
        if !(self.residual_tol > 0.0) || !(self.cluster_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Origin of a descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedKind {
    /// Injected bump at a point of `Z`.
    Inject {
        point: OrbifoldPoint,
    },
    /// Sum of bumps at two points of `Z`.
    Pair {
        points: [OrbifoldPoint; 2],
    },
    Constant,
    Random {
        index: usize,
    },
    Custom,
}

impl SeedKind {
    pub fn label(&self) -> String {
        match self {
            SeedKind::Inject { point } => format!("inject{:?}", trimmed(point)),
            SeedKind::Pair { points } => {
                format!("pair{:?}{:?}", trimmed(&points[0]), trimmed(&points[1]))
            }
            SeedKind::Constant => "constant".into(),
            SeedKind::Random { index } => format!("random{index}"),
            SeedKind::Custom => "custom".into(),
        }
    }
}

fn trimmed(p: &OrbifoldPoint) -> Vec<f64> {
    p.representative
        .iter()
        .map(|v| (v * 1e6).round() / 1e6)
        .collect()
}

/// A seed function with its provenance.
#[derive(Debug, Clone)]
pub struct Seed {
    pub kind: SeedKind,
    pub u: OrbifoldFunction,
}

/// Result of [`Problem::descend`].
#[derive(Debug, Clone)]
pub struct NehariSolution {
    pub u: OrbifoldFunction,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: SeedKind,
    /// Energies of accepted iterates, when requested.
    pub history: Vec<f64>,
}

/// Equivalence class of solutions under relative `L²` distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    /// Indices into the clustered list, ascending.
    pub members: Vec<usize>,
    /// Member with the lowest energy.
    pub representative: usize,
    pub energy: f64,
    pub is_constant: bool,
}

/// `J_ε` and friends on a fixed function space.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub space: &'a FunctionSpace,
    pub cfg: &'a ProblemConfig,
}

impl<'a> Problem<'a> {
    pub fn new(space: &'a FunctionSpace, cfg: &'a ProblemConfig) -> Result<Self> {
        cfg.validate(space.orbifold().dim())?;
        Ok(Problem { space, cfg })
    }

    fn eps_n(&self) -> f64 {
        self.cfg.eps.powi(self.space.orbifold().dim() as i32)
    }

    /// `J_ε(u) = ε^{-n} ∫ ε²|∇u|²/2 + u²/2 - (u⁺)^p/p`.
    pub fn energy(&self, u: &OrbifoldFunction) -> f64 {
        let s = self.space;
        let (eps, p) = (self.cfg.eps, self.cfg.p);
        (0.5 * eps * eps * s.grad_sq(u) + 0.5 * s.l2_sq(u) - s.positive_lp_p(u, p) / p)
            / self.eps_n()
    }

    /// `L²(μ)` representative of `dJ_ε(u)` up to the factor `ε^{-n}`:
    /// `-ε²Δu + u - (u⁺)^{p-1}`.
    pub fn gradient(&self, u: &OrbifoldFunction) -> OrbifoldFunction {
        let (eps, p) = (self.cfg.eps, self.cfg.p);
        let lap = self.space.laplacian_raw(u);
        let vals = u.values();
        let g = par::map_indices(vals.len(), |i| {
            let v = vals[i];
            let pos = if v > 0.0 { v.powf(p - 1.0) } else { 0.0 };
            -eps * eps * lap[i] + v - pos
        });
        self.space.symmetrize(g).expect("length matches")
    }

    /// `ε^{-n/2} ⟨A⁻¹g, g⟩^{1/2}` with `A = 1 - ε²Δ`: the norm of `dJ_ε(u)`
    /// dual to `‖v‖² = ε^{-n}(ε²‖∇v‖² + ‖v‖²)`.
    pub fn residual(&self, u: &OrbifoldFunction) -> f64 {
        self.residual_of_gradient(&self.gradient(u))
    }

    fn residual_of_gradient(&self, g: &OrbifoldFunction) -> f64 {
        (self.space.helmholtz_dual_sq(g, self.cfg.eps) / self.eps_n()).sqrt()
    }

    /// The scale `s > 0` with `s·u ∈ N_ε`.
    pub fn nehari_scale(&self, u: &OrbifoldFunction) -> Result<f64> {
        let s = self.space;
        let (eps, p) = (self.cfg.eps, self.cfg.p);
        let pos = s.positive_lp_p(u, p);
        if !(pos > 0.0) {
            return Err(Error::NoPositivePart);
        }
        let quad = eps * eps * s.grad_sq(u) + s.l2_sq(u);
        Ok((quad / pos).powf(1.0 / (p - 2.0)))
    }

    /// `n_ε(u)·u`.
    pub fn project(&self, u: &OrbifoldFunction) -> Result<OrbifoldFunction> {
        Ok(u.scaled(self.nehari_scale(u)?))
    }

    /// Relative Nehari defect `|ε²‖∇u‖² + ‖u‖² - ‖u⁺‖_p^p| / ‖u⁺‖_p^p`.
    pub fn nehari_defect(&self, u: &OrbifoldFunction) -> f64 {
        let s = self.space;
        let (eps, p) = (self.cfg.eps, self.cfg.p);
        let pos = s.positive_lp_p(u, p);
        (eps * eps * s.grad_sq(u) + s.l2_sq(u) - pos).abs() / pos
    }

    /// `ε^{-n}(p-2)/(2p)·‖u⁺‖_p^p`, the value of `J_ε` on `N_ε`.
    pub fn nehari_energy(&self, u: &OrbifoldFunction) -> f64 {
        let p = self.cfg.p;
        (p - 2.0) / (2.0 * p) * self.space.positive_lp_p(u, p) / self.eps_n()
    }

    /// Cutoff bump `Ṽ_ε(d(x,·))·χ_R(d(x,·))`.
    pub fn make_bump(
        &self,
        x: &OrbifoldPoint,
        profile: &GroundStateProfile,
        bump: &BumpConfig,
    ) -> Result<OrbifoldFunction> {
        let radius = bump.radius;
        let v = profile.rescale(self.cfg.eps);
        let plateau = v.eval(radius / 2.0);
        let limit = bump.plateau_ratio * profile.peak();
        if plateau > limit {
            return Err(Error::BumpTooWide {
                value: plateau,
                limit,
            });
        }
        let d = self.space.orbifold().distances_to_nodes(x);
        let raw = par::map_indices(d.len(), |i| v.eval(d[i]) * cutoff(radius, d[i]));
        self.space.symmetrize(raw)
    }

    /// `i_ε(x) = n_ε(V_{ε,x})·V_{ε,x}`.
    pub fn inject(
        &self,
        x: &OrbifoldPoint,
        profile: &GroundStateProfile,
        bump: &BumpConfig,
    ) -> Result<OrbifoldFunction> {
        self.project(&self.make_bump(x, profile, bump)?)
    }

    /// Projected gradient descent on `N_ε` with Barzilai–Borwein steps and
    /// Armijo backtracking on `J_ε`.
    pub fn descend(&self, seed: &Seed) -> Result<NehariSolution> {
        let cfg = self.cfg;
        let space = self.space;
        let eps_n = self.eps_n();
        let mut u = self.project(&seed.u)?;
        let mut energy = self.energy(&u);
        if !energy.is_finite() {
            return Err(Error::Diverged { iteration: 0 });
        }
        let mut g = self.gradient(&u);
        let mut history = Vec::new();
        if cfg.record_history {
            history.push(energy);
        }

        let lambda_max = {
            let n = space.orbifold().covering().resolution() as i64;
            space.symbol([n / 2, n / 2, n / 2])
        };
        let mut alpha = 1.0 / (1.0 + cfg.eps * cfg.eps * lambda_max);
        let mut residual = self.residual_of_gradient(&g);
        let mut iterations = 0;
        let mut converged = residual < cfg.residual_tol;

        while !converged && iterations < cfg.max_iters {
            iterations += 1;
            let g_sq = space.l2_sq(&g);
            let mut step = alpha;
            let mut accepted = None;
            for _ in 0..60 {
                let trial = u.axpy(-step, &g);
                if let Ok(projected) = self.project(&trial) {
                    let e = self.energy(&projected);
                    if !e.is_finite() {
                        return Err(Error::Diverged {
                            iteration: iterations,
                        });
                    }
                    // rounding slack: near convergence the decrease is below machine precision
                    let slack = 8.0 * f64::EPSILON * energy.abs();
                    if e <= energy - cfg.armijo * step * g_sq / eps_n + slack {
                        accepted = Some((projected, e));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((next, e)) = accepted else {
                // no decrease is representable any more
                break;
            };
            let g_next = self.gradient(&next);
            let s = next.axpy(-1.0, &u);
            let y = g_next.axpy(-1.0, &g);
            let sy = space.inner(&s, &y);
            let ss = space.l2_sq(&s);
            alpha = if sy > 0.0 {
                (ss / sy).clamp(1e-12, 1e6)
            } else {
                step * 2.0
            };
            u = next;
            g = g_next;
            energy = e;
            if cfg.record_history {
                history.push(energy);
            }
            // ⟨A⁻¹g,g⟩ ≤ ‖g‖², so a small L² gradient certifies convergence cheaply
            let l2 = (space.l2_sq(&g) / eps_n).sqrt();
            if l2 < cfg.residual_tol || iterations % 10 == 0 {
                residual = self.residual_of_gradient(&g);
                converged = residual < cfg.residual_tol;
            }
        }
        residual = self.residual_of_gradient(&g);
        converged = converged || residual < cfg.residual_tol;
        Ok(NehariSolution {
            u,
            energy,
            residual,
            iterations,
            converged,
            seed: seed.kind.clone(),
            history,
        })
    }

    /// Relative `L²(μ)` distance `‖u - v‖ / max(‖u‖, ‖v‖)`.
    pub fn relative_distance(&self, u: &OrbifoldFunction, v: &OrbifoldFunction) -> f64 {
        let s = self.space;
        let scale = s.l2_sq(u).max(s.l2_sq(v)).sqrt();
        if scale == 0.0 {
            return 0.0;
        }
        s.l2_sq(&u.axpy(-1.0, v)).sqrt() / scale
    }

    /// True when `u` is within `cluster_tol` of its mean.
    pub fn is_constant(&self, u: &OrbifoldFunction) -> bool {
        let s = self.space;
        let mean = s.integrate(u) / s.orbifold().volume();
        self.relative_distance(u, &s.constant(mean)) < self.cfg.cluster_tol
    }

    /// Single-linkage clustering; clusters are ordered by energy, then by
    /// first member.
    pub fn cluster(&self, solutions: &[NehariSolution]) -> Vec<Cluster> {
        let n = solutions.len();
        let mut label: Vec<usize> = (0..n).collect();
        fn find(label: &mut [usize], mut i: usize) -> usize {
            while label[i] != i {
                label[i] = label[label[i]];
                i = label[i];
            }
            i
        }
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..i).map(move |j| (j, i))).collect();
        let close = par::map_slice(&pairs, |&(i, j)| {
            self.relative_distance(&solutions[i].u, &solutions[j].u) < self.cfg.cluster_tol
        });
        for (&(i, j), &c) in pairs.iter().zip(&close) {
            if c {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_group = std::collections::BTreeMap::new();
        for i in 0..n {
            let r = find(&mut label, i);
            let gi = *root_group.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[gi].push(i);
        }
        let mut clusters: Vec<Cluster> = groups
            .into_iter()
            .map(|members| {
                let representative = *members
                    .iter()
                    .min_by(|&&a, &&b| solutions[a].energy.total_cmp(&solutions[b].energy))
                    .expect("nonempty");
                Cluster {
                    id: 0,
                    is_constant: self.is_constant(&solutions[representative].u),
                    energy: solutions[representative].energy,
                    representative,
                    members,
                }
            })
            .collect();
        clusters.sort_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then(a.members[0].cmp(&b.members[0]))
        });
        for (id, c) in clusters.iter_mut().enumerate() {
            c.id = id;
        }
        clusters
    }
}

/// Cutoff radius of the injected bumps and the admissible plateau value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpConfig {
    pub radius: f64,
    /// Reject bumps whose profile on the cutoff plateau edge exceeds this
    /// fraction of the peak.
    pub plateau_ratio: f64,
}

/// Seeds for one experiment: an injection per sample of `Z`, pair sums,
/// the constant and smooth random fields.
pub fn make_seeds(
    problem: &Problem<'_>,
    profile: &GroundStateProfile,
    bump: &BumpConfig,
    z_points: &[OrbifoldPoint],
    max_pairs: usize,
    random: usize,
    rng_seed: u64,
) -> Result<Vec<Seed>> {
    let space = problem.space;
    let mut seeds = Vec::new();
    let mut bumps = Vec::new();
    for x in z_points {
        let b = problem.make_bump(x, profile, bump)?;
        seeds.push(Seed {
            kind: SeedKind::Inject { point: x.clone() },
            u: problem.project(&b)?,
        });
        bumps.push(b);
    }
    let mut pairs = 0;
    'outer: for i in 0..z_points.len() {
        for j in i + 1..z_points.len() {
            if pairs >= max_pairs {
                break 'outer;
            }
            let sum = bumps[i].axpy(1.0, &bumps[j]);
            seeds.push(Seed {
                kind: SeedKind::Pair {
                    points: [z_points[i].clone(), z_points[j].clone()],
                },
                u: problem.project(&sum)?,
            });
            pairs += 1;
        }
    }
    seeds.push(Seed {
        kind: SeedKind::Constant,
        u: problem.project(&space.constant(1.0))?,
    });
    for index in 0..random {
        let u = random_field(problem, index, rng_seed)?;
        seeds.push(Seed {
            kind: SeedKind::Random { index },
            u,
        });
    }
    Ok(seeds)
}

/// A few Gaussian bumps of random height at random centers, symmetrized and
/// projected onto `N_ε`.
pub fn random_field(
    problem: &Problem<'_>,
    index: usize,
    rng_seed: u64,
) -> Result<OrbifoldFunction> {
    let space = problem.space;
    let orb = space.orbifold();
    let t = orb.covering();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_add(index as u64));
    let width = 2.0 * problem.cfg.eps;
    let centers: Vec<(Point, f64)> = (0..4)
        .map(|_| {
            let mut s = nalgebra::Vector3::zeros();
            for a in 0..t.dim() {
                s[a] = rng.gen::<f64>();
            }
            (t.to_cartesian(&s), rng.gen_range(0.5..1.5))
        })
        .collect();
    let raw = par::map_indices(space.len(), |i| {
        let x = t.node_point(i);
        centers
            .iter()
            .map(|(c, w)| w * (-t.distance(&x, c).powi(2) / (2.0 * width * width)).exp())
            .sum()
    });
    problem.project(&space.symmetrize(raw)?)
}
