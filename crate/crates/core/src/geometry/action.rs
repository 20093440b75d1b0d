use nalgebra::{Matrix3, Vector3};

use super::torus::{FlatTorus, Point};
use crate::error::{Error, Result};

const TOL: f64 = 1e-9;

/// Affine isometry `x ↦ A x + t` of the covering space that descends to the torus.
#[derive(Debug, Clone)]
pub struct Isometry {
    linear: Matrix3<f64>,
    translation: Vector3<f64>,
    /// `B⁻¹ A B`, an integer matrix for lattice-compatible `A`.
    lattice_linear: [[i64; 3]; 3],
    /// `B⁻¹ t` reduced to `[0, 1)`.
    lattice_shift: Vector3<f64>,
    /// `lattice_shift · resolution`, integral when the element maps nodes to nodes.
    node_shift: [i64; 3],
}

impl Isometry {
    fn new(torus: &FlatTorus, linear: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let dim = torus.dim();
        let orth = linear.transpose() * linear;
        if (orth - Matrix3::identity()).abs().max() > TOL {
            return Err(Error::InvalidOrbifold(
                "group element has a non-orthogonal linear part".into(),
            ));
        }
        let b = torus.basis();
        let m = torus
            .basis()
            .try_inverse()
            .expect("torus basis is invertible")
            * linear
            * b;
        let mut lattice_linear = [[0i64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let r = m[(i, j)].round();
                if (m[(i, j)] - r).abs() > TOL {
                    return Err(Error::InvalidOrbifold(
                        "group element does not preserve the lattice".into(),
                    ));
                }
                lattice_linear[i][j] = r as i64;
            }
        }
        let lattice_shift = torus.wrap_lattice(&torus.to_lattice(&translation));
        let n = torus.resolution() as f64;
        let mut node_shift = [0i64; 3];
        for a in 0..dim {
            let v = lattice_shift[a] * n;
            if (v - v.round()).abs() > TOL {
                return Err(Error::InvalidOrbifold(format!(
                    "translation is not a multiple of the grid spacing at resolution {}",
                    torus.resolution()
                )));
            }
            node_shift[a] = v.round() as i64;
        }
        Ok(Isometry {
            linear,
            translation,
            lattice_linear,
            lattice_shift,
            node_shift,
        })
    }

    pub fn linear(&self) -> &Matrix3<f64> {
        &self.linear
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, x: &Point) -> Point {
        self.linear * x + self.translation
    }

    fn same_as(&self, other: &Isometry, torus: &FlatTorus) -> bool {
        if self.lattice_linear != other.lattice_linear {
            return false;
        }
        (0..torus.dim()).all(|a| {
            let d = self.lattice_shift[a] - other.lattice_shift[a];
            (d - d.round()).abs() < TOL
        })
    }

    fn is_identity(&self, torus: &FlatTorus) -> bool {
        let id = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        self.lattice_linear == id
            && (0..torus.dim()).all(|a| {
                let d = self.lattice_shift[a];
                (d - d.round()).abs() < TOL
            })
    }

    /// Image of grid node `idx`.
    fn map_node(&self, torus: &FlatTorus, idx: usize) -> usize {
        let n = torus.resolution() as i64;
        let m = torus.node_multi_index(idx);
        let mut out = [0usize; 3];
        for (a, slot) in out.iter_mut().enumerate().take(torus.dim()) {
            let mut v = self.node_shift[a];
            for (b, &mb) in m.iter().enumerate().take(torus.dim()) {
                v += self.lattice_linear[a][b] * mb as i64;
            }
            *slot = v.rem_euclid(n) as usize;
        }
        torus.node_index(out)
    }
}

/// Finite group of lattice-compatible isometries acting on the covering torus.
#[derive(Debug, Clone)]
pub struct IsometryAction {
    elements: Vec<Isometry>,
    /// `table[i][j]` is the index of `elements[i] ∘ elements[j]`.
    table: Vec<Vec<usize>>,
    identity: usize,
    /// Node permutation induced by each element.
    node_maps: Vec<Vec<u32>>,
}

impl IsometryAction {
    /// Validates the group axioms and builds the composition table.
    pub fn new(torus: &FlatTorus, pairs: &[(Matrix3<f64>, Vector3<f64>)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidOrbifold("group has no elements".into()));
        }
        if pairs.len() > 64 {
            return Err(Error::InvalidOrbifold(
                "groups of order above 64 are not supported".into(),
            ));
        }
        let elements = pairs
            .iter()
            .map(|(a, t)| Isometry::new(torus, *a, *t))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..elements.len() {
            for j in 0..i {
                if elements[i].same_as(&elements[j], torus) {
                    return Err(Error::InvalidOrbifold(format!(
                        "elements {j} and {i} act identically"
                    )));
                }
            }
        }
        let identity = elements
            .iter()
            .position(|g| g.is_identity(torus))
            .ok_or_else(|| Error::InvalidOrbifold("group lacks the identity".into()))?;

        let find = |g: &Isometry| elements.iter().position(|h| h.same_as(g, torus));
        let mut table = vec![vec![0; elements.len()]; elements.len()];
        for (i, gi) in elements.iter().enumerate() {
            for (j, gj) in elements.iter().enumerate() {
                let composed = Isometry::new(
                    torus,
                    gi.linear * gj.linear,
                    gi.linear * gj.translation + gi.translation,
                )?;
                table[i][j] = find(&composed).ok_or_else(|| {
                    Error::InvalidOrbifold(format!("group not closed: element {i} ∘ {j}"))
                })?;
            }
        }
        for (i, row) in table.iter().enumerate() {
            if !row.contains(&identity) {
                return Err(Error::InvalidOrbifold(format!(
                    "element {i} has no inverse"
                )));
            }
        }

        let node_maps = elements
            .iter()
            .map(|g| {
                (0..torus.node_count())
                    .map(|idx| g.map_node(torus, idx) as u32)
                    .collect()
            })
            .collect();

        Ok(IsometryAction {
            elements,
            table,
            identity,
            node_maps,
        })
    }

    /// The trivial group.
    pub fn trivial(torus: &FlatTorus) -> Result<Self> {
        Self::new(torus, &[(Matrix3::identity(), Vector3::zeros())])
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Isometry] {
        &self.elements
    }

    pub fn identity_index(&self) -> usize {
        self.identity
    }

    pub fn composition_table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn inverse_of(&self, i: usize) -> usize {
        self.table[i]
            .iter()
            .position(|&k| k == self.identity)
            .expect("validated at construction")
    }

    /// Permutation of grid nodes induced by element `g`.
    pub fn node_map(&self, g: usize) -> &[u32] {
        &self.node_maps[g]
    }

    pub fn node_maps(&self) -> &[Vec<u32>] {
        &self.node_maps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus2(n: usize) -> FlatTorus {
        FlatTorus::new(2, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], n).unwrap()
    }

    fn minus_id2() -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0))
    }

    #[test]
    fn pillowcase_group_table() {
        let t = torus2(8);
        let g = IsometryAction::new(
            &t,
            &[
                (Matrix3::identity(), Vector3::zeros()),
                (minus_id2(), Vector3::zeros()),
            ],
        )
        .unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(g.composition_table(), &[vec![0, 1], vec![1, 0]]);
        assert_eq!(g.inverse_of(1), 1);
        // node (1, 2) ↦ (7, 6)
        let idx = t.node_index([1, 2, 0]);
        assert_eq!(g.node_map(1)[idx] as usize, t.node_index([7, 6, 0]));
    }

    #[test]
    fn rejects_missing_closure_and_identity() {
        let t = torus2(8);
        let rot90 = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let err = IsometryAction::new(
            &t,
            &[
                (Matrix3::identity(), Vector3::zeros()),
                (rot90, Vector3::zeros()),
            ],
        );
        assert!(err.is_err());
        let err = IsometryAction::new(&t, &[(minus_id2(), Vector3::zeros())]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_lattice_incompatible_rotation() {
        let t = FlatTorus::new(2, &[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]], 8).unwrap();
        let rot90 = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Isometry::new(&t, rot90, Vector3::zeros()).is_err());
    }

    #[test]
    fn rejects_off_grid_translation() {
        let t = torus2(8);
        assert!(Isometry::new(&t, Matrix3::identity(), Vector3::new(0.1, 0.0, 0.0)).is_err());
        assert!(Isometry::new(&t, Matrix3::identity(), Vector3::new(0.5, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn cyclic_rotation_group_closes() {
        let t = torus2(8);
        let r = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let g = IsometryAction::new(
            &t,
            &[
                (Matrix3::identity(), Vector3::zeros()),
                (r, Vector3::zeros()),
                (r * r, Vector3::zeros()),
                (r * r * r, Vector3::zeros()),
            ],
        )
        .unwrap();
        assert_eq!(g.table[1][1], 2);
        assert_eq!(g.inverse_of(1), 3);
    }
}
