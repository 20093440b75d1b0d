use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::action::IsometryAction;
use super::orbifold::GoodOrbifold;
use super::torus::FlatTorus;
use crate::error::{Error, Result};

/// Names accepted by [`OrbifoldConfig::preset`].
pub const PRESET_NAMES: [&str; 4] = ["pillowcase2d", "mirrortorus3d", "torus2d", "torus3d"];

/// One group element `x ↦ A x + t`, with `A` given row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElementConfig {
    pub matrix: Vec<f64>,
    pub translation: Vec<f64>,
}

/// Declarative description of a flat good orbifold, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbifoldConfig {
    pub name: String,
    pub dimension: usize,
    /// Row-major `n x n` matrix whose columns generate the lattice.
    pub lattice_basis: Vec<f64>,
    pub group: Vec<GroupElementConfig>,
    pub grid_resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cat_z: Option<usize>,
    #[serde(default = "default_rho_scale")]
    pub rho_scale: f64,
}

fn default_rho_scale() -> f64 {
    1.0
}

impl OrbifoldConfig {
    /// Built-in presets. `pillowcase2d` and `mirrortorus3d` are the unit
    /// torus modulo `±id`; the `torus*` presets are the manifold controls.
    pub fn preset(name: &str) -> Result<Self> {
        let (dim, minus_id, cat_z) = match name {
            "pillowcase2d" => (2, true, 4),
            "mirrortorus3d" => (3, true, 8),
            // cat(T^n) = n + 1
            "torus2d" => (2, false, 3),
            "torus3d" => (3, false, 4),
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        let identity = |scale: f64| -> Vec<f64> {
            (0..dim * dim)
                .map(|k| if k / dim == k % dim { scale } else { 0.0 })
                .collect()
        };
        let mut group = vec![GroupElementConfig {
            matrix: identity(1.0),
            translation: vec![0.0; dim],
        }];
        if minus_id {
            group.push(GroupElementConfig {
                matrix: identity(-1.0),
                translation: vec![0.0; dim],
            });
        }
        Ok(OrbifoldConfig {
            name: name.to_string(),
            dimension: dim,
            lattice_basis: identity(1.0),
            group,
            grid_resolution: if dim == 2 { 64 } else { 48 },
            cat_z: Some(cat_z),
            rho_scale: 1.0,
        })
    }

    /// Reads a JSON config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// A preset name or a path to a JSON file.
    pub fn resolve(spec: &str) -> Result<Self> {
        if PRESET_NAMES.contains(&spec) {
            Self::preset(spec)
        } else if Path::new(spec).exists() {
            Self::from_file(Path::new(spec))
        } else {
            Err(Error::UnknownPreset(spec.to_string()))
        }
    }

    pub fn build(&self) -> Result<GoodOrbifold> {
        let n = self.dimension;
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidOrbifold(format!(
                "dimension {n} not in {{2, 3}}"
            )));
        }
        if self.lattice_basis.len() != n * n {
            return Err(Error::InvalidOrbifold(format!(
                "lattice basis needs {} entries, got {}",
                n * n,
                self.lattice_basis.len()
            )));
        }
        let columns: Vec<[f64; 3]> = (0..n)
            .map(|j| {
                let mut c = [0.0; 3];
                for (i, slot) in c.iter_mut().enumerate().take(n) {
                    *slot = self.lattice_basis[i * n + j];
                }
                c
            })
            .collect();
        let torus = FlatTorus::new(n, &columns, self.grid_resolution)?;
        let pairs = self
            .group
            .iter()
            .map(|g| {
                if g.matrix.len() != n * n || g.translation.len() != n {
                    return Err(Error::InvalidOrbifold(
                        "group element has the wrong shape".into(),
                    ));
                }
                let mut a = Matrix3::identity();
                let mut t = Vector3::zeros();
                for i in 0..n {
                    for j in 0..n {
                        a[(i, j)] = g.matrix[i * n + j];
                    }
                    t[i] = g.translation[i];
                }
                Ok((a, t))
            })
            .collect::<Result<Vec<_>>>()?;
        let action = IsometryAction::new(&torus, &pairs)?;
        GoodOrbifold::new(&self.name, torus, action, self.cat_z, self.rho_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        for name in PRESET_NAMES {
            let mut cfg = OrbifoldConfig::preset(name).unwrap();
            cfg.grid_resolution = 16;
            let orb = cfg.build().unwrap();
            assert_eq!(orb.name(), name);
        }
        assert!(OrbifoldConfig::preset("teardrop").is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = OrbifoldConfig::preset("pillowcase2d").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: OrbifoldConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rho_scale_defaults_to_one() {
        let text = r#"{"name":"p","dimension":2,"lattice_basis":[1,0,0,1],
            "group":[{"matrix":[1,0,0,1],"translation":[0,0]},
                     {"matrix":[-1,0,0,-1],"translation":[0,0]}],
            "grid_resolution":16}"#;
        let cfg: OrbifoldConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.rho_scale, 1.0);
        // four isolated cone points, so cat(Z) defaults to 4
        assert_eq!(cfg.build().unwrap().cat_z(), 4);
    }
}
