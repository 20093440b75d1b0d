//! Cutoffs, center of mass, concentration function and the roundtrip
//! `Z → N_ε → O` that returns each point of `Z` to itself.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, FunctionSpace, OrbifoldFunction};
use crate::geometry::{FlatTorus, OrbifoldPoint, Point};
use crate::ground_state::GroundStateProfile;
use crate::par;
use crate::variational::{BumpConfig, Problem, Seed, SeedKind};

/// Cubic smoothstep cutoff: 1 on `[0, r/2]`, 0 on `[r, ∞)`.
pub fn cutoff(r: f64, t: f64) -> f64 {
    if t <= r / 2.0 {
        1.0
    } else if t >= r {
        0.0
    } else {
        let tau = (t - r / 2.0) / (r / 2.0);
        1.0 - 3.0 * tau * tau + 2.0 * tau * tau * tau
    }
}

/// Derivative of [`cutoff`] in `t`.
pub fn cutoff_slope(r: f64, t: f64) -> f64 {
    if t <= r / 2.0 || t >= r {
        0.0
    } else {
        let tau = (t - r / 2.0) / (r / 2.0);
        (-6.0 * tau + 6.0 * tau * tau) * 2.0 / r
    }
}

/// Support threshold for scans of `|u|`.
const SUPPORT_EPS: f64 = 1e-14;
const GOLDEN: f64 = 0.618_033_988_749_894_8;
const MAX_REFINE_CYCLES: usize = 200;

/// Concentration data of a function at threshold `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub cc: f64,
    pub argmax: OrbifoldPoint,
    pub center: OrbifoldPoint,
    pub eta: f64,
}

/// `|u|`-mass of the support grouped by orbit: each entry carries the
/// covering positions of one orbit and its normalized weight.
struct MassCloud {
    lifts: Vec<Vec<Point>>,
    weights: Vec<f64>,
    anchor: usize,
}

impl MassCloud {
    fn new(space: &FunctionSpace, u: &OrbifoldFunction) -> Result<Self> {
        check_len(space, u)?;
        let t = space.orbifold().covering();
        let vals = u.values();
        let mut lifts = Vec::new();
        let mut raw = Vec::new();
        let mut anchor = None;
        let mut best = 0.0;
        for orbit in space.orbits() {
            let a = vals[orbit[0] as usize].abs();
            if a <= SUPPORT_EPS {
                continue;
            }
            if a > best {
                best = a;
                anchor = Some(orbit[0] as usize);
            }
            lifts.push(orbit.iter().map(|&i| t.node_point(i as usize)).collect());
            raw.push(a * orbit.len() as f64);
        }
        let anchor = anchor.ok_or(Error::ZeroFunction)?;
        let total = pairwise_sum(&raw);
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(MassCloud {
            lifts,
            weights,
            anchor,
        })
    }

    fn dist(t: &FlatTorus, q: &Point, orbit: &[Point]) -> f64 {
        orbit
            .iter()
            .map(|p| t.distance(q, p))
            .fold(f64::INFINITY, f64::min)
    }

    fn p_value(&self, t: &FlatTorus, q: &Point) -> f64 {
        let terms: Vec<f64> = self
            .lifts
            .iter()
            .zip(&self.weights)
            .map(|(orbit, w)| w * Self::dist(t, q, orbit).powi(2))
            .collect();
        pairwise_sum(&terms)
    }

    /// Largest distance from `q` to the support, stopping once it reaches `cap`.
    fn reach(&self, t: &FlatTorus, q: &Point, cap: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for orbit in &self.lifts {
            worst = worst.max(Self::dist(t, q, orbit));
            if worst >= cap {
                break;
            }
        }
        worst
    }
}

fn check_len(space: &FunctionSpace, u: &OrbifoldFunction) -> Result<()> {
    if u.len() != space.len() {
        return Err(Error::ShapeMismatch {
            expected: space.len(),
            got: u.len(),
        });
    }
    Ok(())
}

/// `P_u(x) = ‖u‖₁⁻¹ ∫ d(x,y)² |u(y)| dμ(y)`.
pub fn p_functional(space: &FunctionSpace, u: &OrbifoldFunction, x: &OrbifoldPoint) -> Result<f64> {
    let cloud = MassCloud::new(space, u)?;
    Ok(cloud.p_value(space.orbifold().covering(), &x.lift()))
}

/// Riemannian center of mass of `|u| dμ`, for `u` supported in a ball of
/// radius `ρ`.
pub fn center_of_mass(space: &FunctionSpace, u: &OrbifoldFunction) -> Result<OrbifoldPoint> {
    center_of_mass_within(space, u, space.orbifold().rho())
}

/// Center of mass for `u` supported in some ball of the given radius: a node
/// search over that ball followed by golden-section sweeps along each axis.
pub fn center_of_mass_within(
    space: &FunctionSpace,
    u: &OrbifoldFunction,
    radius: f64,
) -> Result<OrbifoldPoint> {
    let orb = space.orbifold();
    let t = orb.covering();
    let cloud = MassCloud::new(space, u)?;
    let offsets = t.offsets_within(radius);

    let mut ball = None;
    let mut ball_reach = radius;
    for o in &offsets {
        let node = t.node_offset(cloud.anchor, *o);
        let r = cloud.reach(t, &t.node_point(node), ball_reach);
        if r < ball_reach {
            ball_reach = r;
            ball = Some(node);
        }
    }
    let y = ball.ok_or(Error::SupportTooWide { radius })?;

    let mut q = t.node_point(y);
    let mut best = cloud.p_value(t, &q);
    for o in &offsets {
        let c = t.node_point(t.node_offset(y, *o));
        let v = cloud.p_value(t, &c);
        if v < best {
            best = v;
            q = c;
        }
    }

    let h = t.grid_spacing();
    let tol = 1e-6 * orb.rho();
    for _ in 0..MAX_REFINE_CYCLES {
        let mut moved: f64 = 0.0;
        for a in 0..t.dim() {
            let mut e = Vector3::zeros();
            e[a] = 1.0;
            let s = golden_section(|s| cloud.p_value(t, &(q + e * s)), -h, h, tol / 4.0);
            let v = cloud.p_value(t, &(q + e * s));
            if v < best {
                best = v;
                q += e * s;
                moved = moved.max(s.abs());
            }
        }
        if moved < tol {
            break;
        }
    }
    Ok(orb.canonicalize(&q))
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// `CF_u(x) = ‖u‖₁⁻¹ ∫_{B(x,ρ)} |u| dμ`.
pub fn concentration_function(
    space: &FunctionSpace,
    u: &OrbifoldFunction,
    x: &OrbifoldPoint,
) -> Result<f64> {
    check_len(space, u)?;
    let l1 = space.l1(u);
    if l1 <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    let rho = space.orbifold().rho();
    let d = space.orbifold().distances_to_nodes(x);
    let inside: Vec<f64> = u
        .values()
        .iter()
        .zip(&d)
        .map(|(v, &di)| if di < rho { v.abs() } else { 0.0 })
        .collect();
    Ok(pairwise_sum(&inside) * space.node_weight() / l1)
}

/// `CF_u` at every covering node.
pub fn concentration_map(space: &FunctionSpace, u: &OrbifoldFunction) -> Result<Vec<f64>> {
    check_len(space, u)?;
    let l1 = space.l1(u);
    if l1 <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    let orb = space.orbifold();
    let t = orb.covering();
    let maps = orb.action().node_maps();
    let offsets = t.offsets_within(orb.rho());
    let vals = u.values();
    let w = space.node_weight();
    let per_orbit = par::map_slice(space.orbits(), |orbit| {
        let rep = orbit[0] as usize;
        let mut nodes: Vec<usize> = Vec::with_capacity(offsets.len() * maps.len());
        for o in &offsets {
            let n = t.node_offset(rep, *o);
            nodes.extend(maps.iter().map(|m| m[n] as usize));
        }
        nodes.sort_unstable();
        nodes.dedup();
        let inside: Vec<f64> = nodes.iter().map(|&i| vals[i].abs()).collect();
        pairwise_sum(&inside) * w / l1
    });
    Ok((0..space.len())
        .map(|i| per_orbit[space.orbit_index(i)])
        .collect())
}

/// `CC(u) = max CF_u` and the lowest node attaining it.
pub fn concentration_coefficient(
    space: &FunctionSpace,
    u: &OrbifoldFunction,
) -> Result<(f64, usize)> {
    let cf = concentration_map(space, u)?;
    Ok(max_node(&cf))
}

fn max_node(cf: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &c) in cf.iter().enumerate() {
        if c > best.0 {
            best = (c, i);
        }
    }
    best
}

/// `Ψ_{η,u} = [1 - χ_η(CF_u)]·u`, with the support checked against
/// `B(argmax, 2ρ)`.
pub fn truncate(space: &FunctionSpace, u: &OrbifoldFunction, eta: f64) -> Result<OrbifoldFunction> {
    truncate_with(space, u, eta).map(|(psi, _, _)| psi)
}

fn truncate_with(
    space: &FunctionSpace,
    u: &OrbifoldFunction,
    eta: f64,
) -> Result<(OrbifoldFunction, f64, usize)> {
    if !(eta > 0.5 && eta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "eta = {eta} must lie in (1/2, 1)"
        )));
    }
    let cf = concentration_map(space, u)?;
    let (cc, argmax) = max_node(&cf);
    if cc <= eta {
        return Err(Error::NotConcentrated { cc, eta });
    }
    let psi: Vec<f64> = u
        .values()
        .iter()
        .zip(&cf)
        .map(|(v, &c)| (1.0 - cutoff(eta, c)) * v)
        .collect();
    let orb = space.orbifold();
    let x = orb.node_as_point(argmax);
    let radius = 2.0 * orb.rho();
    for (i, v) in psi.iter().enumerate() {
        if v.abs() > SUPPORT_EPS && orb.distance_to_node(&x, i) >= radius {
            return Err(Error::SupportTooWide { radius });
        }
    }
    Ok((space.wrap(psi), cc, argmax))
}

/// `Cm_η(u) = cm(Ψ_{η,u})`.
pub fn concentration_center(
    space: &FunctionSpace,
    u: &OrbifoldFunction,
    eta: f64,
) -> Result<ConcentrationReport> {
    let (psi, cc, argmax) = truncate_with(space, u, eta)?;
    let orb = space.orbifold();
    let center = center_of_mass_within(space, &psi, 2.0 * orb.rho())?;
    Ok(ConcentrationReport {
        cc,
        argmax: orb.node_as_point(argmax),
        center,
        eta,
    })
}

/// `c_ε(u) = Cm_η((u⁺)^p)`.
pub fn photograph(
    space: &FunctionSpace,
    u: &OrbifoldFunction,
    p: f64,
    eta: f64,
) -> Result<ConcentrationReport> {
    let mass = u.map(|v| if v > 0.0 { v.powf(p) } else { 0.0 });
    concentration_center(space, &mass, eta)
}

/// One sample of the roundtrip `x ↦ c_ε(u_x) ↦ H(x, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripEntry {
    pub start: OrbifoldPoint,
    pub report: ConcentrationReport,
    /// Distance from the photographed center to `Z`.
    pub tube_distance: f64,
    pub endpoint: OrbifoldPoint,
    pub same_component: bool,
    pub error: f64,
    pub energy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub entries: Vec<RoundtripEntry>,
    pub max_error: f64,
    /// Two grid cells.
    pub tolerance: f64,
    pub passed: bool,
}

/// Where the roundtrip sources its functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundtripSource {
    Inject,
    Solution,
}

/// Maps each sample `x ∈ Z` to `i_ε(x)` (optionally descended to a critical
/// point), photographs it and contracts the normal segment back onto `Z`.
/// On a manifold `Z = O` and the contraction is trivial.
pub fn photography_roundtrip(
    problem: &Problem<'_>,
    profile: &GroundStateProfile,
    bump: &BumpConfig,
    samples: &[OrbifoldPoint],
    eta: f64,
    source: RoundtripSource,
) -> Result<RoundtripReport> {
    let entries = par::map_slice(samples, |x| -> Result<RoundtripEntry> {
        let u = problem.inject(x, profile, bump)?;
        match source {
            RoundtripSource::Inject => {
                let energy = problem.energy(&u);
                roundtrip_entry(problem.space, problem.cfg.p, eta, x, &u, energy, true)
            }
            RoundtripSource::Solution => {
                let sol = problem.descend(&Seed {
                    kind: SeedKind::Inject { point: x.clone() },
                    u,
                })?;
                roundtrip_entry(
                    problem.space,
                    problem.cfg.p,
                    eta,
                    x,
                    &sol.u,
                    sol.energy,
                    sol.converged,
                )
            }
        }
    });
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(summarize_roundtrip(problem.space, entries))
}

/// Roundtrip of one sample `x` whose function `u` is already known.
pub fn roundtrip_entry(
    space: &FunctionSpace,
    p: f64,
    eta: f64,
    x: &OrbifoldPoint,
    u: &OrbifoldFunction,
    energy: f64,
    converged: bool,
) -> Result<RoundtripEntry> {
    let orb = space.orbifold();
    let tube = 3.0 * orb.rho();
    let report = photograph(space, u, p, eta)?;
    let y = &report.center;
    let (endpoint, tube_distance, same_component) = if orb.is_manifold() {
        (y.clone(), 0.0, true)
    } else {
        let (comp, node, d) = orb.nearest_z(y);
        if d >= tube {
            return Err(Error::RoundtripEscapedTube { distance: d, tube });
        }
        let (start_comp, _, _) = orb.nearest_z(x);
        (orb.node_as_point(node), d, comp == start_comp)
    };
    let error = orb.distance(x, &endpoint);
    Ok(RoundtripEntry {
        start: x.clone(),
        report,
        tube_distance,
        endpoint,
        same_component,
        error,
        energy,
        converged,
    })
}

/// Collects entries and applies the two-cell tolerance.
pub fn summarize_roundtrip(space: &FunctionSpace, entries: Vec<RoundtripEntry>) -> RoundtripReport {
    let tolerance = 2.0 * space.orbifold().covering().grid_spacing();
    let max_error = entries.iter().map(|e| e.error).fold(0.0, f64::max);
    let passed = max_error < tolerance && entries.iter().all(|e| e.same_component);
    RoundtripReport {
        entries,
        max_error,
        tolerance,
        passed,
    }
}

#[cfg(test)]
mod cutoff_tests {
    use super::*;

    #[test]
    fn cutoff_endpoints_and_midpoint() {
        let r = 0.4;
        assert_eq!(cutoff(r, 0.0), 1.0);
        assert_eq!(cutoff(r, r / 2.0), 1.0);
        assert_eq!(cutoff(r, r), 0.0);
        assert_eq!(cutoff(r, 5.0), 0.0);
        assert!((cutoff(r, 0.75 * r) - 0.5).abs() < 1e-15);
        assert!((cutoff_slope(r, 0.75 * r) + 3.0 / r).abs() < 1e-12);
    }

    #[test]
    fn cutoff_is_monotone_with_bounded_slope() {
        let r = 1.3;
        let mut prev = 1.0;
        for k in 0..=2000 {
            let t = k as f64 * 1e-3;
            let v = cutoff(r, t);
            assert!(v <= prev);
            assert!(cutoff_slope(r, t).abs() <= 3.0 / r + 1e-12);
            prev = v;
        }
        // slope matches finite differences, so the cutoff is C¹
        for k in 1..100 {
            let t = 0.65 + k as f64 * 0.0065;
            let h = 1e-6;
            let fd = (cutoff(r, t + h) - cutoff(r, t - h)) / (2.0 * h);
            assert!((fd - cutoff_slope(r, t)).abs() < 1e-6);
        }
    }
}
