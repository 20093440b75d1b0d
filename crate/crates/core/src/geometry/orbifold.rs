use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::action::IsometryAction;
use super::torus::{for_each_shift, FlatTorus, Point};
use crate::error::{Error, Result};

/// Two lifts closer than this are the same point.
const SAME_POINT: f64 = 1e-9;

/// A point of `O = M/G`: the representative lift in the fundamental cell plus
/// every distinct image of it under `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbifoldPoint {
    pub representative: [f64; 3],
    pub orbit: Vec<[f64; 3]>,
}

impl OrbifoldPoint {
    pub fn lift(&self) -> Point {
        Point::from(self.representative)
    }

    pub fn orbit_lifts(&self) -> impl Iterator<Item = Point> + '_ {
        self.orbit.iter().map(|p| Point::from(*p))
    }
}

/// Local group data at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalGroupInfo {
    pub order: usize,
    pub stratum_id: usize,
    pub is_singular: bool,
}

/// The stratum of points with the largest local group, split into connected
/// components. Each component lists one covering node per orbifold point.
#[derive(Debug, Clone)]
pub struct MaxStratum {
    pub zeta: usize,
    pub components: Vec<Vec<usize>>,
}

impl MaxStratum {
    pub fn point_count(&self) -> usize {
        self.components.iter().map(Vec::len).sum()
    }

    /// True when every component is a single point.
    pub fn is_discrete(&self) -> bool {
        self.components.iter().all(|c| c.len() == 1)
    }
}

/// Compact flat good orbifold `T^n / G`.
#[derive(Debug, Clone)]
pub struct GoodOrbifold {
    name: String,
    covering: FlatTorus,
    action: IsometryAction,
    rho: f64,
    rho_scale: f64,
    cat_z: usize,
    node_stabilizer: Vec<u64>,
    node_stratum: Vec<usize>,
    /// Smallest node index in each node's orbit.
    node_canonical: Vec<u32>,
    max_stratum: MaxStratum,
    /// Some non-identity element fixes a point.
    has_fixed_points: bool,
}

impl GoodOrbifold {
    /// Assembles the orbifold, derives strata and `Z`, and fixes the convenient
    /// radius `ρ = rho_scale · min(systole, d_min) / 8`.
    ///
    /// `cat_z = None` is accepted only when `Z` is a finite point set, whose
    /// category is its cardinality.
    pub fn new(
        name: impl Into<String>,
        covering: FlatTorus,
        action: IsometryAction,
        cat_z: Option<usize>,
        rho_scale: f64,
    ) -> Result<Self> {
        if !(rho_scale > 0.0 && rho_scale <= 1.0) {
            return Err(Error::InvalidOrbifold(format!(
                "rho scale must lie in (0, 1], got {rho_scale}"
            )));
        }
        let nodes = covering.node_count();
        let maps = action.node_maps();

        let node_stabilizer: Vec<u64> = (0..nodes)
            .map(|i| {
                maps.iter()
                    .enumerate()
                    .filter(|(_, m)| m[i] as usize == i)
                    .fold(0u64, |acc, (g, _)| acc | (1 << g))
            })
            .collect();
        let node_canonical: Vec<u32> = (0..nodes)
            .map(|i| maps.iter().map(|m| m[i]).min().expect("group is nonempty"))
            .collect();

        // strata: identical stabilizers, joined across grid edges and orbits
        let mut strata = UnionFind::new(nodes);
        for i in 0..nodes {
            for m in maps {
                strata.union(i, m[i] as usize);
            }
            for a in 0..covering.dim() {
                let mut delta = [0i64; 3];
                delta[a] = 1;
                let j = covering.node_offset(i, delta);
                if node_stabilizer[i] == node_stabilizer[j] {
                    strata.union(i, j);
                }
            }
        }
        let node_stratum = strata.labels();

        let orders: Vec<usize> = node_stabilizer
            .iter()
            .map(|m| m.count_ones() as usize)
            .collect();
        let zeta = orders.iter().copied().max().unwrap_or(1);
        let mut zsets = UnionFind::new(nodes);
        for i in 0..nodes {
            if orders[i] != zeta {
                continue;
            }
            for m in maps {
                zsets.union(i, m[i] as usize);
            }
            for a in 0..covering.dim() {
                let mut delta = [0i64; 3];
                delta[a] = 1;
                let j = covering.node_offset(i, delta);
                if orders[j] == zeta {
                    zsets.union(i, j);
                }
            }
        }
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..nodes {
            if orders[i] == zeta && node_canonical[i] as usize == i {
                by_root.entry(zsets.find(i)).or_default().push(i);
            }
        }
        let mut components: Vec<Vec<usize>> = by_root.into_values().collect();
        components.sort_by_key(|c| c[0]);
        let max_stratum = MaxStratum { zeta, components };

        let has_fixed_points = orders.iter().any(|&o| o > 1)
            || (0..action.order())
                .filter(|&g| g != action.identity_index())
                .any(|g| {
                    let e = &action.elements()[g];
                    fixed_set(&covering, e.linear(), e.translation())
                        .next()
                        .is_some()
                });

        let cat_z = match cat_z {
            Some(c) => {
                if c == 0 {
                    return Err(Error::InvalidOrbifold("cat(Z) must be at least 1".into()));
                }
                c
            }
            None if max_stratum.is_discrete() => max_stratum.components.len(),
            None => {
                return Err(Error::InvalidOrbifold(
                    "Z has positive-dimensional components; supply cat_z".into(),
                ))
            }
        };

        let mut orb = GoodOrbifold {
            name: name.into(),
            covering,
            action,
            rho: 0.0,
            rho_scale,
            cat_z,
            node_stabilizer,
            node_stratum,
            node_canonical,
            max_stratum,
            has_fixed_points,
        };
        orb.rho = rho_scale * orb.compute_convenient_radius();
        Ok(orb)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn covering(&self) -> &FlatTorus {
        &self.covering
    }

    pub fn action(&self) -> &IsometryAction {
        &self.action
    }

    pub fn dim(&self) -> usize {
        self.covering.dim()
    }

    pub fn group_order(&self) -> usize {
        self.action.order()
    }

    /// Convenient radius ρ.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rho_scale(&self) -> f64 {
        self.rho_scale
    }

    /// Sectional curvature bound of the covering metric; flat, so always zero.
    pub fn kappa(&self) -> f64 {
        0.0
    }

    pub fn cat_z(&self) -> usize {
        self.cat_z
    }

    /// Riemannian volume `vol(M) / |G|`.
    pub fn volume(&self) -> f64 {
        self.covering.volume() / self.group_order() as f64
    }

    pub fn is_manifold(&self) -> bool {
        self.max_stratum.zeta == 1
    }

    pub fn max_stratum(&self) -> &MaxStratum {
        &self.max_stratum
    }

    /// Local group order at a grid node.
    pub fn node_local_order(&self, idx: usize) -> usize {
        self.node_stabilizer[idx].count_ones() as usize
    }

    pub fn node_stratum(&self, idx: usize) -> usize {
        self.node_stratum[idx]
    }

    /// Smallest node index in the orbit of `idx`.
    pub fn node_canonical(&self, idx: usize) -> usize {
        self.node_canonical[idx] as usize
    }

    pub fn node_orbit(&self, idx: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .action
            .node_maps()
            .iter()
            .map(|m| m[idx] as usize)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn node_as_point(&self, idx: usize) -> OrbifoldPoint {
        self.canonicalize(&self.covering.node_point(idx))
    }

    /// Canonical form of the orbifold point through `p`: the orbit is listed
    /// in lexicographic order of lattice coordinates and the representative
    /// is its first entry.
    pub fn canonicalize(&self, p: &Point) -> OrbifoldPoint {
        let t = &self.covering;
        let s = t.wrap_lattice(&t.to_lattice(p));
        let base = t.to_cartesian(&s);
        let mut images: Vec<Vector3<f64>> = Vec::with_capacity(self.group_order());
        for g in self.action.elements() {
            let img = t.wrap_lattice(&t.to_lattice(&g.apply(&base)));
            let dup = images
                .iter()
                .any(|q| t.distance(&t.to_cartesian(q), &t.to_cartesian(&img)) < SAME_POINT);
            if !dup {
                images.push(img);
            }
        }
        images.sort_by(|a, b| {
            (0..3)
                .map(|k| a[k].total_cmp(&b[k]))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let orbit: Vec<[f64; 3]> = images.iter().map(|s| t.to_cartesian(s).into()).collect();
        OrbifoldPoint {
            representative: orbit[0],
            orbit,
        }
    }

    /// Stabilizer of a lift, as a bit mask over group elements.
    fn stabilizer_mask(&self, x: &Point) -> u64 {
        self.action
            .elements()
            .iter()
            .enumerate()
            .filter(|(_, g)| self.covering.distance(&g.apply(x), x) < SAME_POINT)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    /// Local group of `x`: the stabilizer of a lift.
    pub fn local_group(&self, x: &OrbifoldPoint) -> LocalGroupInfo {
        let lift = x.lift();
        let mask = self.stabilizer_mask(&lift);
        let order = mask.count_ones() as usize;
        let node = self.covering.nearest_node(&lift);
        let stratum_id = if self.node_stabilizer[node] == mask {
            self.node_stratum[node]
        } else {
            // off-grid point: nearest node carrying the same stabilizer
            (0..self.covering.node_count())
                .filter(|&i| self.node_stabilizer[i] == mask)
                .min_by(|&i, &j| {
                    let di = self.distance_to_node(x, i);
                    let dj = self.distance_to_node(x, j);
                    di.total_cmp(&dj)
                })
                .map(|i| self.node_stratum[i])
                .unwrap_or(usize::MAX)
        };
        LocalGroupInfo {
            order,
            stratum_id,
            is_singular: order > 1,
        }
    }

    /// Orbifold distance: the minimum over deck transformations of the flat distance.
    /// Evaluated from both ends so that symmetry holds exactly in floating point.
    pub fn distance(&self, x: &OrbifoldPoint, y: &OrbifoldPoint) -> f64 {
        let one_way = |x: &OrbifoldPoint, y: &OrbifoldPoint| {
            let a = x.lift();
            y.orbit_lifts()
                .map(|b| self.covering.distance(&a, &b))
                .fold(f64::INFINITY, f64::min)
        };
        one_way(x, y).min(one_way(y, x))
    }

    /// Distance from `x` to a covering grid node.
    pub fn distance_to_node(&self, x: &OrbifoldPoint, idx: usize) -> f64 {
        let node = self.covering.node_point(idx);
        x.orbit_lifts()
            .map(|a| self.covering.distance(&a, &node))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `x` to every covering node.
    pub fn distances_to_nodes(&self, x: &OrbifoldPoint) -> Vec<f64> {
        let lifts: Vec<Point> = x.orbit_lifts().collect();
        (0..self.covering.node_count())
            .map(|i| {
                let node = self.covering.node_point(i);
                lifts
                    .iter()
                    .map(|a| self.covering.distance(a, &node))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Half the length of the shortest geodesic loop at `x` produced by the
    /// deck group; for regular points additionally bounded by the distance to
    /// the singular locus.
    pub fn injectivity_bound(&self, x: &OrbifoldPoint) -> f64 {
        let a = x.lift();
        let mut bound = self.covering.systole() / 2.0;
        for g in self.action.elements() {
            let d = self.covering.distance(&g.apply(&a), &a);
            if d > SAME_POINT {
                bound = bound.min(d / 2.0);
            }
        }
        if self.local_group(x).order == 1 {
            if let Ok(d) = self.distance_to_singular(x) {
                bound = bound.min(d);
            }
        }
        bound
    }

    /// Exponential map; flat lifts make it a translation of the representative.
    pub fn exp_map(&self, x: &OrbifoldPoint, v: &Vector3<f64>) -> Result<OrbifoldPoint> {
        let length = v.norm();
        if length > 0.0 {
            let bound = self.injectivity_bound(x);
            if length >= bound {
                return Err(Error::RadiusExceeded { length, bound });
            }
        }
        Ok(self.canonicalize(&(x.lift() + v)))
    }

    /// Nearest singular point to `x` together with its distance.
    fn nearest_singular(&self, x: &OrbifoldPoint) -> Result<(Point, f64)> {
        if !self.has_fixed_points {
            return Err(Error::EmptySingularLocus);
        }
        let a = x.lift();
        let mut best: Option<(Point, f64)> = None;
        for (gi, g) in self.action.elements().iter().enumerate() {
            if gi == self.action.identity_index() {
                continue;
            }
            for (k, c) in fixed_set(&self.covering, g.linear(), g.translation()) {
                let pinv = k
                    .pseudo_inverse(1e-12)
                    .expect("pseudo-inverse of a 3x3 matrix exists");
                let z = a + pinv * (c - k * a);
                let d = self.covering.distance(&a, &z);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((z, d));
                }
            }
        }
        best.ok_or(Error::EmptySingularLocus)
    }

    pub fn distance_to_singular(&self, x: &OrbifoldPoint) -> Result<f64> {
        self.nearest_singular(x).map(|(_, d)| d)
    }

    /// Closest-point projection onto the singular locus, defined inside the
    /// tube of radius `3ρ`.
    pub fn singular_projection(&self, x: &OrbifoldPoint) -> Result<OrbifoldPoint> {
        let (z, d) = self.nearest_singular(x)?;
        let tube = 3.0 * self.rho;
        if d >= tube {
            return Err(Error::TooFarFromSingularLocus { distance: d, tube });
        }
        Ok(self.canonicalize(&z))
    }

    /// `min(systole, d_min) / 8`, where `d_min` is the smallest distance
    /// between distinct components of `Z` (infinite with fewer than two).
    pub fn compute_convenient_radius(&self) -> f64 {
        self.covering.systole().min(self.z_component_separation()) / 8.0
    }

    /// Smallest distance between points of distinct components of `Z`.
    pub fn z_component_separation(&self) -> f64 {
        let comps = &self.max_stratum.components;
        if comps.len() < 2 {
            return f64::INFINITY;
        }
        let points: Vec<Vec<OrbifoldPoint>> = comps
            .iter()
            .map(|c| c.iter().map(|&i| self.node_as_point(i)).collect())
            .collect();
        let mut best = f64::INFINITY;
        for i in 0..points.len() {
            for j in 0..i {
                for x in &points[i] {
                    for y in &points[j] {
                        best = best.min(self.distance(x, y));
                    }
                }
            }
        }
        best
    }

    /// Distance from `x` to the nearest point of `Z` (grid-resolved for
    /// positive-dimensional components) and the index of that component.
    pub fn nearest_z(&self, x: &OrbifoldPoint) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for (ci, comp) in self.max_stratum.components.iter().enumerate() {
            for &node in comp {
                let d = self.distance_to_node(x, node);
                if d < best.2 {
                    best = (ci, node, d);
                }
            }
        }
        best
    }

    /// Well-spread sample points of a component of `Z`: farthest-point
    /// sampling over the component nodes lying on the quarter-period sublattice.
    pub fn z_samples(&self, component: usize, count: usize) -> Vec<OrbifoldPoint> {
        let comp = &self.max_stratum.components[component];
        if comp.len() <= count {
            return comp.iter().map(|&i| self.node_as_point(i)).collect();
        }
        let n = self.covering.resolution();
        let step = (n / 4).max(1);
        let mut candidates: Vec<usize> = comp
            .iter()
            .copied()
            .filter(|&i| {
                self.covering
                    .node_multi_index(i)
                    .iter()
                    .take(self.dim())
                    .all(|m| m % step == 0)
            })
            .collect();
        if candidates.len() < count {
            candidates = comp.clone();
        }
        let pts: Vec<OrbifoldPoint> = candidates.iter().map(|&i| self.node_as_point(i)).collect();
        let mut chosen = vec![0usize];
        let mut nearest: Vec<f64> = pts.iter().map(|p| self.distance(p, &pts[0])).collect();
        while chosen.len() < count {
            let (next, _) = nearest
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .expect("candidates are nonempty");
            chosen.push(next);
            for (k, p) in pts.iter().enumerate() {
                nearest[k] = nearest[k].min(self.distance(p, &pts[next]));
            }
        }
        chosen.into_iter().map(|k| pts[k].clone()).collect()
    }
}

/// Affine pieces `(A - I) z = Bℓ - t` of the fixed-point set of `x ↦ Ax + t`,
/// for lattice shifts near the fundamental cell. Inconsistent systems are skipped.
fn fixed_set<'a>(
    torus: &'a FlatTorus,
    linear: &'a Matrix3<f64>,
    translation: &'a Vector3<f64>,
) -> impl Iterator<Item = (Matrix3<f64>, Vector3<f64>)> + 'a {
    let k = linear - Matrix3::identity();
    let pinv = k.pseudo_inverse(1e-12).expect("3x3 pseudo-inverse");
    let mut rhs = Vec::new();
    for_each_shift(torus.dim(), 2, |shift| {
        let c = torus.to_cartesian(&shift) - translation;
        let z = pinv * c;
        if (k * z - c).norm() < 1e-9 {
            rhs.push(c);
        }
    });
    rhs.into_iter().map(move |c| (k, c))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so labels are deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Dense labels `0..k`, ordered by smallest member.
    fn labels(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut out = vec![0; n];
        for i in 0..n {
            let r = self.find(i);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            out[i] = label[r];
        }
        out
    }
}
