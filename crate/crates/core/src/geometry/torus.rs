use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Cartesian point in the covering space. Two-dimensional tori use the first
/// two components; the third stays zero.
pub type Point = Vector3<f64>;

const MAX_DIM: usize = 3;

/// Flat torus `R^n / Λ` together with the uniform sampling grid used by every
/// discrete operator.
///
/// The grid has `resolution` nodes per lattice direction; node `i` sits at
/// lattice coordinates `i / resolution`. Unused axes (when `n = 2`) have
/// extent one.
#[derive(Debug, Clone)]
pub struct FlatTorus {
    dim: usize,
    basis: Matrix3<f64>,
    inv_basis: Matrix3<f64>,
    gram_inv: Matrix3<f64>,
    orthogonal: bool,
    resolution: usize,
    systole: f64,
}

impl FlatTorus {
    /// Builds the torus from an `n x n` basis whose columns generate the lattice.
    pub fn new(dim: usize, columns: &[[f64; 3]], resolution: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidOrbifold(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if columns.len() != dim {
            return Err(Error::InvalidOrbifold(format!(
                "expected {dim} lattice generators, got {}",
                columns.len()
            )));
        }
        if resolution < 8 || resolution % 2 != 0 {
            return Err(Error::InvalidOrbifold(format!(
                "grid resolution must be even and at least 8, got {resolution}"
            )));
        }
        let mut basis = Matrix3::identity();
        for (j, col) in columns.iter().enumerate() {
            for i in 0..MAX_DIM {
                let v = col[i];
                if i >= dim && v != 0.0 {
                    return Err(Error::InvalidOrbifold(
                        "lattice generator has components beyond the torus dimension".into(),
                    ));
                }
                if i < dim {
                    basis[(i, j)] = v;
                }
            }
        }
        let inv_basis = basis
            .try_inverse()
            .filter(|_| basis.determinant().abs() > 1e-12)
            .ok_or_else(|| Error::InvalidOrbifold("lattice basis is singular".into()))?;
        let gram = basis.transpose() * basis;
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::InvalidOrbifold("lattice basis is singular".into()))?;
        let orthogonal = (0..dim)
            .flat_map(|a| (0..dim).map(move |b| (a, b)))
            .all(|(a, b)| a == b || gram[(a, b)].abs() < 1e-14 * gram[(a, a)]);

        let mut torus = FlatTorus {
            dim,
            basis,
            inv_basis,
            gram_inv,
            orthogonal,
            resolution,
            systole: 0.0,
        };
        torus.systole = torus.shortest_lattice_vector();
        Ok(torus)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &Matrix3<f64> {
        &self.basis
    }

    /// Inverse Gram matrix `(BᵀB)⁻¹`; converts lattice-coordinate derivatives
    /// into the Euclidean metric.
    pub fn gram_inverse(&self) -> &Matrix3<f64> {
        &self.gram_inv
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of grid nodes per axis; inactive axes have extent 1.
    pub fn shape(&self) -> [usize; 3] {
        let mut s = [1; 3];
        s[..self.dim].fill(self.resolution);
        s
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    /// Volume of the fundamental cell, `|det B|`.
    pub fn volume(&self) -> f64 {
        self.basis.determinant().abs()
    }

    /// Length of the shortest nonzero lattice vector.
    pub fn systole(&self) -> f64 {
        self.systole
    }

    /// Largest distance between neighbouring nodes along a lattice axis.
    pub fn grid_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.basis.column(a).norm())
            .fold(0.0, f64::max)
            / self.resolution as f64
    }

    pub fn to_lattice(&self, x: &Point) -> Vector3<f64> {
        self.inv_basis * x
    }

    pub fn to_cartesian(&self, s: &Vector3<f64>) -> Point {
        self.basis * s
    }

    /// Reduces lattice coordinates into `[0, 1)` on each active axis.
    pub fn wrap_lattice(&self, s: &Vector3<f64>) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        for a in 0..self.dim {
            let mut v = s[a] - s[a].floor();
            // values a hair below 1 are the same point as 0
            if v > 1.0 - 1e-12 {
                v = 0.0;
            }
            out[a] = v;
        }
        out
    }

    /// Representative of `x` in the fundamental cell `B·[0,1)^n`.
    pub fn reduce(&self, x: &Point) -> Point {
        self.to_cartesian(&self.wrap_lattice(&self.to_lattice(x)))
    }

    /// Shortest vector `a - b - ℓ` over lattice translates `ℓ`.
    pub fn displacement(&self, a: &Point, b: &Point) -> Point {
        let mut d = self.inv_basis * (a - b);
        for k in 0..self.dim {
            d[k] -= d[k].round();
        }
        if self.orthogonal {
            return self.basis * d;
        }
        let mut best = self.basis * d;
        let mut best_norm = best.norm_squared();
        for_each_shift(self.dim, 1, |shift| {
            let cand = self.basis * (d + shift);
            let n = cand.norm_squared();
            if n < best_norm {
                best_norm = n;
                best = cand;
            }
        });
        best
    }

    /// Flat distance on the torus.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.displacement(a, b).norm()
    }

    pub fn node_multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.resolution;
        let mut out = [0; 3];
        let mut rem = idx;
        for slot in out.iter_mut().take(self.dim) {
            *slot = rem % n;
            rem /= n;
        }
        out
    }

    pub fn node_index(&self, multi: [usize; 3]) -> usize {
        let n = self.resolution;
        (0..self.dim).rev().fold(0, |acc, a| acc * n + multi[a])
    }

    /// Index of the node displaced by `delta` along each axis, with periodic wrap.
    pub fn node_offset(&self, idx: usize, delta: [i64; 3]) -> usize {
        let n = self.resolution as i64;
        let mut m = self.node_multi_index(idx);
        for a in 0..self.dim {
            m[a] = (m[a] as i64 + delta[a]).rem_euclid(n) as usize;
        }
        self.node_index(m)
    }

    pub fn node_lattice(&self, idx: usize) -> Vector3<f64> {
        let m = self.node_multi_index(idx);
        let n = self.resolution as f64;
        let mut s = Vector3::zeros();
        for a in 0..self.dim {
            s[a] = m[a] as f64 / n;
        }
        s
    }

    pub fn node_point(&self, idx: usize) -> Point {
        self.to_cartesian(&self.node_lattice(idx))
    }

    /// Nearest grid node to a point.
    pub fn nearest_node(&self, x: &Point) -> usize {
        let s = self.wrap_lattice(&self.to_lattice(x));
        let n = self.resolution as f64;
        let mut m = [0usize; 3];
        for a in 0..self.dim {
            m[a] = ((s[a] * n).round() as usize) % self.resolution;
        }
        self.node_index(m)
    }

    /// Integer node offsets whose Cartesian length is below `radius`.
    pub fn offsets_within(&self, radius: f64) -> Vec<[i64; 3]> {
        let n = self.resolution as f64;
        let reach: Vec<i64> = (0..MAX_DIM)
            .map(|a| {
                if a < self.dim {
                    // |B e_a| lower-bounds nothing for skew bases; use the dual row norm.
                    (radius * n * self.inv_basis.row(a).norm()).ceil() as i64 + 1
                } else {
                    0
                }
            })
            .collect();
        let mut out = Vec::new();
        for i in -reach[0]..=reach[0] {
            for j in -reach[1]..=reach[1] {
                for k in -reach[2]..=reach[2] {
                    let s = Vector3::new(i as f64 / n, j as f64 / n, k as f64 / n);
                    if (self.basis * s).norm() < radius {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    fn shortest_lattice_vector(&self) -> f64 {
        let mut best = f64::INFINITY;
        for_each_shift(self.dim, 3, |shift| {
            let len = (self.basis * shift).norm();
            if len > 0.0 && len < best {
                best = len;
            }
        });
        best
    }
}

/// Calls `f` with every integer vector in `{-reach..=reach}^dim`, padded with zeros.
pub(crate) fn for_each_shift(dim: usize, reach: i64, mut f: impl FnMut(Vector3<f64>)) {
    let r = |a: usize| if a < dim { reach } else { 0 };
    for i in -r(0)..=r(0) {
        for j in -r(1)..=r(1) {
            for k in -r(2)..=r(2) {
                f(Vector3::new(i as f64, j as f64, k as f64));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, n: usize) -> FlatTorus {
        let cols = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        FlatTorus::new(dim, &cols[..dim], n).unwrap()
    }

    #[test]
    fn rejects_odd_or_small_grids() {
        let cols = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(FlatTorus::new(2, &cols, 7).is_err());
        assert!(FlatTorus::new(2, &cols, 6).is_err());
        assert!(FlatTorus::new(2, &cols, 8).is_ok());
    }

    #[test]
    fn rejects_singular_basis() {
        let cols = [[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]];
        assert!(FlatTorus::new(2, &cols, 8).is_err());
    }

    #[test]
    fn wrap_and_distance() {
        let t = unit(2, 16);
        let a = Point::new(0.1, 0.0, 0.0);
        let b = Point::new(0.9, 0.0, 0.0);
        assert!((t.distance(&a, &b) - 0.2).abs() < 1e-15);
        let r = t.reduce(&Point::new(-0.25, 1.5, 0.0));
        assert!((r - Point::new(0.75, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn node_indexing_round_trips() {
        let t = unit(3, 8);
        for idx in [0, 1, 7, 8, 63, 64, 511] {
            assert_eq!(t.node_index(t.node_multi_index(idx)), idx);
        }
        let i = t.node_index([7, 0, 3]);
        assert_eq!(t.node_multi_index(t.node_offset(i, [1, -1, 0])), [0, 7, 3]);
    }

    #[test]
    fn systole_of_rectangular_and_skew_lattices() {
        let rect = FlatTorus::new(2, &[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]], 8).unwrap();
        assert!((rect.systole() - 1.0).abs() < 1e-15);
        // same lattice as Z^2, written in a skew basis
        let skew = FlatTorus::new(2, &[[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]], 8).unwrap();
        assert!(!skew.is_orthogonal());
        assert!((skew.systole() - 1.0).abs() < 1e-15);
        let a = Point::new(0.05, 0.0, 0.0);
        let b = Point::new(0.95, 0.1, 0.0);
        let expected = (0.1f64 * 0.1 + 0.1 * 0.1).sqrt();
        assert!((skew.distance(&a, &b) - expected).abs() < 1e-14);
    }

    #[test]
    fn offsets_within_radius_are_symmetric() {
        let t = unit(2, 32);
        let offs = t.offsets_within(0.1);
        assert!(offs.contains(&[0, 0, 0]));
        for o in &offs {
            assert!(offs.contains(&[-o[0], -o[1], -o[2]]));
        }
        // 0.1 * 32 = 3.2 nodes: all offsets with i^2 + j^2 < 10.24
        let count = (-4i64..=4)
            .flat_map(|i| (-4i64..=4).map(move |j| (i, j)))
            .filter(|(i, j)| ((i * i + j * j) as f64) < 10.24)
            .count();
        assert_eq!(offs.len(), count);
    }
}
