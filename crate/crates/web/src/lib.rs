//! Browser bindings: ground-state profiles, Nehari descent on the
//! pillowcase and concentration heatmaps.

use std::sync::Arc;

use nalgebra::Vector3;
use orbilab::concentration::{concentration_map, photograph};
use orbilab::field::{FunctionSpace, OrbifoldFunction};
use orbilab::geometry::OrbifoldConfig;
use orbilab::ground_state::{solve_ground_state, GroundStateProfile, DEFAULT_R_MAX, DEFAULT_TOL};
use orbilab::variational::{BumpConfig, Problem, ProblemConfig, Seed, SeedKind};
use wasm_bindgen::prelude::*;

fn js(e: orbilab::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Radial ground state sampled on `[0, r_max]`.
#[wasm_bindgen]
pub struct Profile {
    radii: Vec<f64>,
    values: Vec<f64>,
    m_e: f64,
}

#[wasm_bindgen]
impl Profile {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, p: f64, samples: usize, r_max: f64) -> Result<Profile, JsError> {
        let g = solve_ground_state(n, p, DEFAULT_R_MAX, DEFAULT_TOL).map_err(js)?;
        let samples = samples.max(2);
        let radii: Vec<f64> = (0..samples)
            .map(|k| r_max * k as f64 / (samples - 1) as f64)
            .collect();
        let values = radii.iter().map(|&r| g.value(r)).collect();
        Ok(Profile {
            radii,
            values,
            m_e: g.m_e,
        })
    }

    pub fn radii(&self) -> Vec<f64> {
        self.radii.clone()
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn m_e(&self) -> f64 {
        self.m_e
    }
}

/// A field on a 2D preset together with its problem parameters.
#[wasm_bindgen]
pub struct Lab {
    space: FunctionSpace,
    cfg: ProblemConfig,
    profile: GroundStateProfile,
    u: OrbifoldFunction,
    energy: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str, grid: usize, eps: f64, p: f64) -> Result<Lab, JsError> {
        let mut oc = OrbifoldConfig::preset(preset).map_err(js)?;
        if oc.dimension != 2 {
            return Err(JsError::new("the demo draws 2D presets only"));
        }
        oc.grid_resolution = grid;
        let space = FunctionSpace::new(Arc::new(oc.build().map_err(js)?));
        let mut cfg = ProblemConfig::new(eps, p);
        cfg.max_iters = 5_000;
        Problem::new(&space, &cfg).map_err(js)?;
        let profile = solve_ground_state(2, p, DEFAULT_R_MAX, DEFAULT_TOL).map_err(js)?;
        let u = space.constant(1.0);
        let mut lab = Lab {
            space,
            cfg,
            profile,
            u,
            energy: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: false,
        };
        lab.refresh();
        Ok(lab)
    }

    fn refresh(&mut self) {
        let pr = Problem::new(&self.space, &self.cfg).expect("validated");
        self.energy = pr.energy(&self.u);
        self.residual = pr.residual(&self.u);
    }

    #[wasm_bindgen(getter)]
    pub fn resolution(&self) -> usize {
        self.space.orbifold().covering().resolution()
    }

    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        self.energy
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// `m(E)/ζ`, the limit of the least energy level.
    #[wasm_bindgen(getter)]
    pub fn cone_level(&self) -> f64 {
        self.profile.m_e / self.space.orbifold().max_stratum().zeta as f64
    }

    /// Replaces the field by the projected bump centered at `(x, y)`.
    pub fn inject(&mut self, x: f64, y: f64) -> Result<(), JsError> {
        let orb = self.space.orbifold();
        let at = orb.canonicalize(&Vector3::new(x, y, 0.0));
        let bump = BumpConfig {
            radius: orb.injectivity_bound(&at).min(0.25),
            plateau_ratio: 0.5,
        };
        let pr = Problem::new(&self.space, &self.cfg).map_err(js)?;
        self.u = pr.inject(&at, &self.profile, &bump).map_err(js)?;
        self.iterations = 0;
        self.converged = false;
        self.refresh();
        Ok(())
    }

    /// Runs the Nehari descent from the current field.
    pub fn descend(&mut self) -> Result<(), JsError> {
        let pr = Problem::new(&self.space, &self.cfg).map_err(js)?;
        let sol = pr
            .descend(&Seed {
                kind: SeedKind::Custom,
                u: self.u.clone(),
            })
            .map_err(js)?;
        self.u = sol.u;
        self.energy = sol.energy;
        self.residual = sol.residual;
        self.iterations = sol.iterations;
        self.converged = sol.converged;
        Ok(())
    }

    /// Field values on the covering grid, row `j` then column `i`.
    pub fn field(&self) -> Vec<f64> {
        self.on_grid(self.u.values())
    }

    /// Concentration function of `(u⁺)^p` on the covering grid.
    pub fn concentration(&self) -> Result<Vec<f64>, JsError> {
        let w = self.u.map(|v| v.max(0.0).powf(self.cfg.p));
        Ok(self.on_grid(&concentration_map(&self.space, &w).map_err(js)?))
    }

    /// Photograph of the field: `[cc, x, y]`.
    pub fn photograph(&self, eta: f64) -> Result<Vec<f64>, JsError> {
        let r = photograph(&self.space, &self.u, self.cfg.p, eta).map_err(js)?;
        let c = r.center.representative;
        Ok(vec![r.cc, c[0], c[1]])
    }

    fn on_grid(&self, values: &[f64]) -> Vec<f64> {
        let torus = self.space.orbifold().covering();
        let n = torus.resolution();
        (0..n * n)
            .map(|k| values[torus.node_index([k % n, k / n, 0])])
            .collect()
    }
}
