//! G-invariant grid functions on the covering torus: quadrature, norms and
//! the discrete Laplacian.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{GoodOrbifold, Point};
use crate::par;

/// Values of a G-invariant function at every node of the covering grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbifoldFunction {
    values: Vec<f64>,
}

impl OrbifoldFunction {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self * s`; scaling preserves invariance exactly.
    pub fn scaled(&self, s: f64) -> OrbifoldFunction {
        OrbifoldFunction {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`; nodewise, so invariance is preserved exactly.
    pub fn axpy(&self, s: f64, other: &OrbifoldFunction) -> OrbifoldFunction {
        OrbifoldFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    /// Applies `f` nodewise; the result stays invariant.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> OrbifoldFunction {
        OrbifoldFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn positive_part(&self) -> OrbifoldFunction {
        self.map(|v| v.max(0.0))
    }

    pub fn abs(&self) -> OrbifoldFunction {
        self.map(f64::abs)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Norms reported by [`FunctionSpace::norms`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2_sq: f64,
    /// `∫|u|^p`.
    pub lp_p: f64,
    /// `∫(u⁺)^p`.
    pub positive_lp_p: f64,
    pub grad_sq: f64,
    /// `ε²·grad² + L2²`.
    pub h1_eps_sq: f64,
}

/// Sum with pairwise reduction; fixed order, so results are reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 128;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// The discrete function space of an orbifold: orbit tables, neighbour tables,
/// stencil weights and the measure weight per node.
pub struct FunctionSpace {
    orb: Arc<GoodOrbifold>,
    /// Orbits in increasing node order.
    orbits: Vec<Vec<u32>>,
    orbit_of: Vec<u32>,
    /// `plus[a][i]`, `minus[a][i]`: neighbours of node `i` along axis `a`.
    plus: Vec<Vec<u32>>,
    minus: Vec<Vec<u32>>,
    /// `g^{aa} N²`.
    diag: Vec<f64>,
    /// `(a, b, g^{ab} N² / 4)` for `a < b` with nonzero coupling.
    mixed: Vec<(usize, usize, f64)>,
    node_weight: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FunctionSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionSpace")
            .field("orbifold", &self.orb.name())
            .field("nodes", &self.len())
            .field("orbits", &self.orbits.len())
            .finish()
    }
}

impl FunctionSpace {
    pub fn new(orb: Arc<GoodOrbifold>) -> Self {
        let t = orb.covering();
        let count = t.node_count();
        let dim = t.dim();
        let n = t.resolution();

        let mut orbit_of = vec![u32::MAX; count];
        let mut orbits = Vec::new();
        for i in 0..count {
            if orbit_of[i] != u32::MAX {
                continue;
            }
            let mut members: Vec<u32> = orb.node_orbit(i).into_iter().map(|j| j as u32).collect();
            members.sort_unstable();
            for &j in &members {
                orbit_of[j as usize] = orbits.len() as u32;
            }
            orbits.push(members);
        }

        let mut plus = Vec::with_capacity(dim);
        let mut minus = Vec::with_capacity(dim);
        for a in 0..dim {
            let mut e = [0i64; 3];
            e[a] = 1;
            plus.push((0..count).map(|i| t.node_offset(i, e) as u32).collect());
            e[a] = -1;
            minus.push((0..count).map(|i| t.node_offset(i, e) as u32).collect());
        }

        let g = t.gram_inverse();
        let n2 = (n * n) as f64;
        let diag = (0..dim).map(|a| g[(a, a)] * n2).collect();
        let mut mixed = Vec::new();
        for a in 0..dim {
            for b in a + 1..dim {
                if g[(a, b)].abs() > 1e-14 {
                    mixed.push((a, b, g[(a, b)] * n2 / 4.0));
                }
            }
        }

        let node_weight = t.volume() / count as f64 / orb.group_order() as f64;
        let fft = FftPlanner::new().plan_fft_forward(n);
        FunctionSpace {
            orb,
            orbits,
            orbit_of,
            plus,
            minus,
            diag,
            mixed,
            node_weight,
            fft,
        }
    }

    pub fn orbifold(&self) -> &GoodOrbifold {
        &self.orb
    }

    pub fn orbifold_arc(&self) -> &Arc<GoodOrbifold> {
        &self.orb
    }

    pub fn len(&self) -> usize {
        self.orbit_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbit_of.is_empty()
    }

    /// Measure carried by one node: cell volume over `|G|`.
    pub fn node_weight(&self) -> f64 {
        self.node_weight
    }

    pub fn orbit_count(&self) -> usize {
        self.orbits.len()
    }

    /// Replaces each orbit's values by their mean.
    pub fn symmetrize(&self, raw: Vec<f64>) -> Result<OrbifoldFunction> {
        if raw.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: raw.len(),
            });
        }
        let mut values = raw;
        for orbit in &self.orbits {
            if orbit.len() == 1 {
                continue;
            }
            let mean = orbit.iter().map(|&j| values[j as usize]).sum::<f64>() / orbit.len() as f64;
            for &j in orbit {
                values[j as usize] = mean;
            }
        }
        Ok(OrbifoldFunction { values })
    }

    /// True when `values` is constant on every orbit.
    pub fn is_invariant(&self, values: &[f64]) -> bool {
        self.orbits.iter().all(|orbit| {
            let first = values[orbit[0] as usize];
            orbit.iter().all(|&j| values[j as usize] == first)
        })
    }

    pub fn constant(&self, c: f64) -> OrbifoldFunction {
        OrbifoldFunction {
            values: vec![c; self.len()],
        }
    }

    pub fn zeros(&self) -> OrbifoldFunction {
        self.constant(0.0)
    }

    /// Samples `f` at the nodes and symmetrizes.
    pub fn sample(&self, f: impl Fn(&Point) -> f64 + Sync) -> OrbifoldFunction {
        let t = self.orb.covering();
        let raw = par::map_indices(self.len(), |i| f(&t.node_point(i)));
        self.symmetrize(raw)
            .expect("length matches by construction")
    }

    /// Wraps values already known to be invariant, such as nodewise images of
    /// invariant functions.
    pub(crate) fn wrap(&self, values: Vec<f64>) -> OrbifoldFunction {
        debug_assert_eq!(values.len(), self.len());
        OrbifoldFunction { values }
    }

    /// `∫_O u dμ`.
    pub fn integrate(&self, u: &OrbifoldFunction) -> f64 {
        pairwise_sum(&u.values) * self.node_weight
    }

    fn integrate_with(&self, u: &OrbifoldFunction, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        let vals = par::map_indices(self.len(), |i| f(u.values[i]));
        pairwise_sum(&vals) * self.node_weight
    }

    /// `⟨u, v⟩_{L²(μ)}`.
    pub fn inner(&self, u: &OrbifoldFunction, v: &OrbifoldFunction) -> f64 {
        let vals = par::map_indices(self.len(), |i| u.values[i] * v.values[i]);
        pairwise_sum(&vals) * self.node_weight
    }

    pub fn l2_sq(&self, u: &OrbifoldFunction) -> f64 {
        self.integrate_with(u, |x| x * x)
    }

    pub fn l1(&self, u: &OrbifoldFunction) -> f64 {
        self.integrate_with(u, f64::abs)
    }

    pub fn lp_p(&self, u: &OrbifoldFunction, p: f64) -> f64 {
        self.integrate_with(u, |x| x.abs().powf(p))
    }

    /// `∫(u⁺)^p`.
    pub fn positive_lp_p(&self, u: &OrbifoldFunction, p: f64) -> f64 {
        self.integrate_with(u, |x| if x > 0.0 { x.powf(p) } else { 0.0 })
    }

    /// Discrete Dirichlet form `∫ g(∇u, ∇v) dμ`: forward differences on the
    /// diagonal of the metric, centered differences on mixed terms. It is
    /// exactly the form of [`Self::laplacian`].
    pub fn dirichlet(&self, u: &OrbifoldFunction, v: &OrbifoldFunction) -> f64 {
        let (u, v) = (&u.values, &v.values);
        let vals = par::map_indices(self.len(), |i| {
            let mut acc = 0.0;
            for (a, &w) in self.diag.iter().enumerate() {
                let j = self.plus[a][i] as usize;
                acc += w * (u[j] - u[i]) * (v[j] - v[i]);
            }
            for &(a, b, w) in &self.mixed {
                let du_a = u[self.plus[a][i] as usize] - u[self.minus[a][i] as usize];
                let du_b = u[self.plus[b][i] as usize] - u[self.minus[b][i] as usize];
                let dv_a = v[self.plus[a][i] as usize] - v[self.minus[a][i] as usize];
                let dv_b = v[self.plus[b][i] as usize] - v[self.minus[b][i] as usize];
                acc += w * (du_a * dv_b + du_b * dv_a);
            }
            acc
        });
        pairwise_sum(&vals) * self.node_weight
    }

    /// `∫|∇u|² dμ`.
    pub fn grad_sq(&self, u: &OrbifoldFunction) -> f64 {
        self.dirichlet(u, u)
    }

    pub fn norms(&self, u: &OrbifoldFunction, eps: f64, p: f64) -> Norms {
        let l2_sq = self.l2_sq(u);
        let grad_sq = self.grad_sq(u);
        Norms {
            l2_sq,
            lp_p: self.lp_p(u, p),
            positive_lp_p: self.positive_lp_p(u, p),
            grad_sq,
            h1_eps_sq: eps * eps * grad_sq + l2_sq,
        }
    }

    /// Laplacian without the final symmetrization.
    pub(crate) fn laplacian_raw(&self, u: &OrbifoldFunction) -> Vec<f64> {
        let u = &u.values;
        par::map_indices(self.len(), |i| {
            let c = u[i];
            let mut acc = 0.0;
            for (a, &w) in self.diag.iter().enumerate() {
                let s = u[self.plus[a][i] as usize] + u[self.minus[a][i] as usize];
                acc += w * (s - 2.0 * c);
            }
            for &(a, b, w) in &self.mixed {
                let pa = self.plus[a][i] as usize;
                let ma = self.minus[a][i] as usize;
                let pp = self.plus[b][pa] as usize;
                let pm = self.minus[b][pa] as usize;
                let mp = self.plus[b][ma] as usize;
                let mm = self.minus[b][ma] as usize;
                // a ≠ b appears twice in Σ_{ab} g^{ab} ∂_a ∂_b
                acc += 2.0 * w * ((u[pp] + u[mm]) - (u[pm] + u[mp]));
            }
            acc
        })
    }

    /// Periodic second-order Laplacian in lattice coordinates, contracted with
    /// the inverse Gram matrix.
    pub fn laplacian(&self, u: &OrbifoldFunction) -> OrbifoldFunction {
        self.symmetrize(self.laplacian_raw(u))
            .expect("length matches")
    }

    /// Eigenvalue of `-Δ` on the plane wave with integer frequency `k`.
    pub fn symbol(&self, k: [i64; 3]) -> f64 {
        let n = self.orb.covering().resolution() as f64;
        let theta = |a: usize| 2.0 * std::f64::consts::PI * k[a] as f64 / n;
        let mut s = 0.0;
        for (a, &w) in self.diag.iter().enumerate() {
            s += w * 4.0 * (theta(a) / 2.0).sin().powi(2);
        }
        for &(a, b, w) in &self.mixed {
            // w = g^{ab} N²/4, counted for (a,b) and (b,a)
            s += 2.0 * 4.0 * w * theta(a).sin() * theta(b).sin();
        }
        s
    }

    /// `⟨A⁻¹ g, g⟩_μ` with `A = -ε²Δ + 1`, diagonalized by the FFT of the covering grid.
    pub fn helmholtz_dual_sq(&self, g: &OrbifoldFunction, eps: f64) -> f64 {
        let t = self.orb.covering();
        let dim = t.dim();
        let n = t.resolution();
        let mut buf: Vec<Complex<f64>> = g.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut line = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        // node index = m0 + n m1 + n² m2
        for a in 0..dim {
            let stride = n.pow(a as u32);
            let count = buf.len() / n;
            for c in 0..count {
                let low = c % stride;
                let high = c / stride;
                let base = low + high * stride * n;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + j * stride];
                }
                self.fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    buf[base + j * stride] = *v;
                }
            }
        }
        let half = n as i64 / 2;
        let signed = |m: usize| {
            let m = m as i64;
            if m > half {
                m - n as i64
            } else {
                m
            }
        };
        let terms: Vec<f64> = buf
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let m = t.node_multi_index(idx);
                let k = [signed(m[0]), signed(m[1]), signed(m[2])];
                c.norm_sqr() / (1.0 + eps * eps * self.symbol(k))
            })
            .collect();
        pairwise_sum(&terms) / self.len() as f64 * self.node_weight
    }

    /// Node where `u` attains its maximum; ties go to the lowest index.
    pub fn argmax(&self, u: &OrbifoldFunction) -> usize {
        let mut best = 0;
        for (i, &v) in u.values.iter().enumerate() {
            if v > u.values[best] {
                best = i;
            }
        }
        best
    }

    /// Orbit label of node `i`.
    pub fn orbit_index(&self, i: usize) -> usize {
        self.orbit_of[i] as usize
    }

    pub fn orbits(&self) -> &[Vec<u32>] {
        &self.orbits
    }
}
