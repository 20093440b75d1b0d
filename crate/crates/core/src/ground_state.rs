//! Radial ground state of `-Δu + u = u^{p-1}` on `R^n` by shooting.

use std::io::Write;
use std::path::{Path, PathBuf};

use ode_solvers::continuous_output_model::ContinuousOutputModel;
use ode_solvers::{Dopri5, OutputType, System, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_R_MAX: f64 = 25.0;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Spacing of the stored radial samples.
pub const RADIAL_STEP: f64 = 1e-3;

const TAYLOR_RADIUS: f64 = 1e-4;
const BRACKET: (f64, f64) = (1.0, 10.0);
const MAX_BISECTIONS: usize = 200;
const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-16;
/// Relative gap between the two bracketing trajectories beyond which they are
/// replaced by the exponential tail.
const SPLIT_GAP: f64 = 1e-3;

type State = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// `V` turned upward while still positive: initial height too small.
    Under,
    /// `V` crossed zero: initial height too large.
    Over,
    /// Reached `r_max` without deciding.
    Undecided,
}

struct Radial {
    bend: f64,
    p: f64,
    outcome: Shot,
}

impl System<f64, State> for Radial {
    fn system(&self, r: f64, y: &State, dy: &mut State) {
        let v = y[0];
        dy[0] = y[1];
        dy[1] = -self.bend / r * y[1] + v - v.abs().powf(self.p - 2.0) * v;
    }

    fn solout(&mut self, _r: f64, y: &State, _dy: &State) -> bool {
        if y[0] < 0.0 {
            self.outcome = Shot::Over;
        } else if y[1] >= 0.0 {
            self.outcome = Shot::Under;
        }
        self.outcome != Shot::Undecided
    }
}

/// Norms of the profile over `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileNorms {
    pub l2_sq: f64,
    pub lp_p: f64,
    pub grad_sq: f64,
}

/// The positive radial solution `Ṽ` sampled on `[0, r_max]` together with its
/// energy `m(E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateProfile {
    pub n: usize,
    pub p: f64,
    pub r_max: f64,
    pub tol: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub m_e: f64,
    pub norms: ProfileNorms,
    /// Radius beyond which the samples come from the asymptotic tail.
    pub tail_start: f64,
    /// Final shooting bracket on `Ṽ(0)`.
    pub bracket: (f64, f64),
}

fn check_exponent(n: usize, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    if !(p > 2.0) {
        return Err(Error::InvalidConfig(format!(
            "exponent p = {p} must exceed 2"
        )));
    }
    if n >= 3 {
        let crit = 2.0 * n as f64 / (n as f64 - 2.0);
        if p >= crit {
            return Err(Error::InvalidConfig(format!(
                "exponent p = {p} is not subcritical in dimension {n} (need p < {crit})"
            )));
        }
    }
    Ok(())
}

fn shoot(
    n: usize,
    p: f64,
    v0: f64,
    r_max: f64,
) -> Result<(Shot, Option<ContinuousOutputModel<f64, State>>)> {
    let curvature = (v0 - v0.powf(p - 1.0)) / n as f64;
    let r0 = TAYLOR_RADIUS;
    let y0 = State::new(v0 + 0.5 * curvature * r0 * r0, curvature * r0);
    let system = Radial {
        bend: n as f64 - 1.0,
        p,
        outcome: Shot::Undecided,
    };
    // A flat start decides immediately.
    if y0[1] >= 0.0 {
        return Ok((Shot::Under, None));
    }
    let mut stepper = Dopri5::new(system, r0, r_max, RADIAL_STEP, y0, RTOL, ATOL);
    stepper.set_output(OutputType::Continuous);
    let mut model = ContinuousOutputModel::default();
    stepper
        .integrate_with_continuous_output_model(&mut model)
        .map_err(|e| Error::Integration(format!("{e:?}")))?;
    let outcome = stepper_outcome(&stepper);
    Ok((outcome, Some(model)))
}

fn stepper_outcome<F: System<f64, State>>(stepper: &Dopri5<f64, State, F>) -> Shot {
    let last = stepper.y_out().last().expect("at least one step");
    if last[0] < 0.0 {
        Shot::Over
    } else if last[1] >= 0.0 {
        Shot::Under
    } else {
        Shot::Undecided
    }
}

/// Coefficients of the large-argument expansion of `K_ν`.
fn bessel_k_series(nu: f64) -> Vec<f64> {
    let mut a = vec![1.0];
    for k in 1..30 {
        let m = 2.0 * k as f64 - 1.0;
        let next = a[k - 1] * (4.0 * nu * nu - m * m) / (8.0 * k as f64);
        if next == 0.0 {
            break;
        }
        a.push(next);
    }
    a
}

/// `S(r) = Σ a_k r^{-k}` truncated at its smallest term, and `S'(r)`.
fn tail_series(a: &[f64], r: f64) -> (f64, f64) {
    let mut s = 0.0;
    let mut ds = 0.0;
    let mut prev = f64::INFINITY;
    for (k, &ak) in a.iter().enumerate() {
        let term = ak / r.powi(k as i32);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        s += term;
        ds -= k as f64 * term / r;
    }
    (s, ds)
}

/// Composite Simpson rule on a uniform grid with an even number of intervals.
fn simpson(h: f64, f: impl Fn(usize) -> f64, intervals: usize) -> f64 {
    debug_assert!(intervals % 2 == 0);
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..intervals {
        if k % 2 == 1 {
            odd += f(k);
        } else {
            even += f(k);
        }
    }
    h / 3.0 * (f(0) + f(intervals) + 4.0 * odd + 2.0 * even)
}

/// Surface area of the unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // |S^{n-1}| = 2π/(n-2) |S^{n-3}|
            2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2)
        }
    }
}

/// Shoots on `Ṽ(0)` until the bracket collapses and assembles the profile.
pub fn solve_ground_state(n: usize, p: f64, r_max: f64, tol: f64) -> Result<GroundStateProfile> {
    check_exponent(n, p)?;
    if !(r_max >= 20.0) {
        return Err(Error::InvalidConfig(format!(
            "r_max = {r_max} must be at least 20"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }

    let (mut lo, mut hi) = BRACKET;
    if shoot(n, p, lo, r_max)?.0 != Shot::Under || shoot(n, p, hi, r_max)?.0 != Shot::Over {
        return Err(Error::NoSignChange { lo, hi });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(n, p, mid, r_max)?.0 {
            Shot::Under => lo = mid,
            Shot::Over => hi = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
                break;
            }
        }
    }
    if hi - lo > tol {
        return Err(Error::ToleranceNotReached {
            width: hi - lo,
            tol,
        });
    }

    let lo_model = shoot(n, p, lo, r_max)?.1;
    let hi_model = shoot(n, p, hi, r_max)?.1;
    let (Some(lo_model), Some(hi_model)) = (lo_model, hi_model) else {
        return Err(Error::NoSignChange { lo, hi });
    };
    let v0 = 0.5 * (lo + hi);
    let curvature = (v0 - v0.powf(p - 1.0)) / n as f64;

    let mut intervals = (r_max / RADIAL_STEP).round() as usize;
    intervals += intervals % 2;
    let radii: Vec<f64> = (0..=intervals).map(|k| k as f64 * RADIAL_STEP).collect();
    let mut values = vec![0.0; radii.len()];
    let mut derivatives = vec![0.0; radii.len()];

    // Trajectory part.
    let mut last = 0;
    for (k, &r) in radii.iter().enumerate() {
        if r < TAYLOR_RADIUS {
            values[k] = v0 + 0.5 * curvature * r * r;
            derivatives[k] = curvature * r;
            last = k;
            continue;
        }
        let (Some(a), Some(b)) = (lo_model.evaluate(r), hi_model.evaluate(r)) else {
            break;
        };
        let v = 0.5 * (a[0] + b[0]);
        if v <= 0.0 || (a[0] - b[0]).abs() > SPLIT_GAP * v {
            break;
        }
        values[k] = v;
        derivatives[k] = 0.5 * (a[1] + b[1]);
        last = k;
    }

    // Exponential tail r^{-(n-1)/2} e^{-r} S(r), matched in value at the split.
    let tail_start = radii[last];
    let alpha = (n as f64 - 1.0) / 2.0;
    let series = bessel_k_series((n as f64 - 2.0) / 2.0);
    let (s_star, _) = tail_series(&series, tail_start);
    let v_star = values[last];
    for k in last + 1..radii.len() {
        let r = radii[k];
        let (s, ds) = tail_series(&series, r);
        let v = v_star * (-alpha * (r / tail_start).ln() - (r - tail_start)).exp() * s / s_star;
        values[k] = v;
        derivatives[k] = v * (-alpha / r - 1.0 + ds / s);
    }

    let weight = |k: usize| sphere_area(n) * radii[k].powi(n as i32 - 1);
    let h = RADIAL_STEP;
    let l2_sq = simpson(h, |k| weight(k) * values[k] * values[k], intervals);
    let grad_sq = simpson(
        h,
        |k| weight(k) * derivatives[k] * derivatives[k],
        intervals,
    );
    let lp_p = simpson(h, |k| weight(k) * values[k].powf(p), intervals);
    let m_e = 0.5 * grad_sq + 0.5 * l2_sq - lp_p / p;

    Ok(GroundStateProfile {
        n,
        p,
        r_max,
        tol,
        radii,
        values,
        derivatives,
        m_e,
        norms: ProfileNorms {
            l2_sq,
            lp_p,
            grad_sq,
        },
        tail_start,
        bracket: (lo, hi),
    })
}

impl GroundStateProfile {
    pub fn peak(&self) -> f64 {
        self.values[0]
    }

    /// `Ṽ(r)` by linear interpolation; zero beyond `r_max`.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        let h = self.radii[1] - self.radii[0];
        let last = self.radii.len() - 1;
        let x = r / h;
        let k = x.floor() as usize;
        if k >= last {
            return if r <= self.radii[last] {
                self.values[last]
            } else {
                0.0
            };
        }
        let t = x - k as f64;
        (1.0 - t) * self.values[k] + t * self.values[k + 1]
    }

    /// The evaluator `r ↦ Ṽ(r/ε)`.
    pub fn rescale(&self, eps: f64) -> Rescaled<'_> {
        Rescaled { profile: self, eps }
    }

    /// Residual of the radial ODE at sample `k`, using fourth-order centered
    /// differences of the stored values.
    pub fn ode_residual(&self, k: usize) -> f64 {
        let h = self.radii[1] - self.radii[0];
        let v = |j: usize| self.values[j];
        let r = self.radii[k];
        let d2 = (-v(k + 2) + 16.0 * v(k + 1) - 30.0 * v(k) + 16.0 * v(k - 1) - v(k - 2))
            / (12.0 * h * h);
        let d1 = (-v(k + 2) + 8.0 * v(k + 1) - 8.0 * v(k - 1) + v(k - 2)) / (12.0 * h);
        d2 + (self.n as f64 - 1.0) / r * d1 - v(k) + v(k).powf(self.p - 1.0)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "r,value")?;
        for (r, v) in self.radii.iter().zip(&self.values) {
            writeln!(w, "{r},{v:e}")?;
        }
        Ok(())
    }

    /// File name used by the on-disk cache.
    pub fn cache_file_name(n: usize, p: f64, r_max: f64, tol: f64) -> String {
        format!("ground_state_n{n}_p{p}_r{r_max}_tol{tol:e}.json")
    }

    /// Loads the profile from `dir` if present, otherwise solves and stores it.
    pub fn cached(dir: &Path, n: usize, p: f64, r_max: f64, tol: f64) -> Result<Self> {
        let path: PathBuf = dir.join(Self::cache_file_name(n, p, r_max, tol));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(profile) = serde_json::from_str::<GroundStateProfile>(&text) {
                if profile.n == n && profile.p == p && profile.r_max == r_max && profile.tol == tol
                {
                    return Ok(profile);
                }
            }
        }
        let profile = solve_ground_state(n, p, r_max, tol)?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let text = serde_json::to_string(&profile)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(profile)
    }
}

/// `Ṽ_ε(r) = Ṽ(r/ε)`.
#[derive(Debug, Clone, Copy)]
pub struct Rescaled<'a> {
    profile: &'a GroundStateProfile,
    eps: f64,
}

impl Rescaled<'_> {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.profile.value(r / self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sech2_oracle(r: f64) -> f64 {
        1.5 / (r / 2.0).cosh().powi(2)
    }

    fn one_dim() -> GroundStateProfile {
        solve_ground_state(1, 3.0, DEFAULT_R_MAX, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn one_dimensional_profile_matches_sech_squared() {
        let g = one_dim();
        assert!((g.peak() - 1.5).abs() < 1e-9);
        let err = g
            .radii
            .iter()
            .zip(&g.values)
            .filter(|(r, _)| **r <= 20.0)
            .map(|(&r, &v)| (v - sech2_oracle(r)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn one_dimensional_energy_matches_closed_form_quadrature() {
        let g = one_dim();
        // ∫_R (3/2 sech²(r/2))³ dr by fine trapezoid on the closed form
        let h = 1e-4;
        let lp: f64 = (0..=400_000)
            .map(|k| {
                let r = k as f64 * h;
                let w = if k == 0 || k == 400_000 { 0.5 } else { 1.0 };
                2.0 * w * sech2_oracle(r).powi(3)
            })
            .sum::<f64>()
            * h;
        // the closed form integrates to 27/8 · 2 · 16/15 = 36/5
        assert!((lp - 7.2).abs() < 1e-8);
        assert!((g.norms.lp_p - lp).abs() / lp < 1e-6);
        assert!((g.m_e - lp / 6.0).abs() / g.m_e < 1e-6);
    }

    #[test]
    fn nehari_and_energy_identities() {
        for (n, p) in [(1, 3.0), (2, 4.0), (3, 4.0), (2, 3.0)] {
            let g = solve_ground_state(n, p, DEFAULT_R_MAX, DEFAULT_TOL).unwrap();
            let ProfileNorms {
                l2_sq,
                lp_p,
                grad_sq,
            } = g.norms;
            assert!((grad_sq + l2_sq - lp_p).abs() / lp_p < 1e-6, "n={n} p={p}");
            let m = (p - 2.0) / (2.0 * p) * lp_p;
            assert!((g.m_e - m).abs() / m < 1e-6, "n={n} p={p}");
            assert!(g.values.last().unwrap().abs() < 1e-10);
            assert!(g.values.windows(2).all(|w| w[1] < w[0]));
            assert!(g.values.iter().all(|&v| v > 0.0));
            assert!(g.derivatives[0] == 0.0);
        }
    }

    #[test]
    fn two_dimensional_cubic_peak() {
        // the Townes profile has Ṽ(0) ≈ 2.2062
        let g = solve_ground_state(2, 4.0, DEFAULT_R_MAX, DEFAULT_TOL).unwrap();
        assert!((g.peak() - 2.2062).abs() < 1e-3, "{}", g.peak());
    }

    #[test]
    fn three_dimensional_tail_decays_like_yukawa() {
        let g = solve_ground_state(3, 4.0, DEFAULT_R_MAX, DEFAULT_TOL).unwrap();
        let c: Vec<f64> = [10.0, 12.5, 15.0]
            .iter()
            .map(|&r| g.value(r).ln() + r + r.ln())
            .collect();
        assert!((c[0] - c[2]).abs() < 1e-3, "{c:?}");
        assert!((c[1] - c[2]).abs() < 1e-3, "{c:?}");
    }

    #[test]
    fn ode_residual_is_small() {
        for (n, p) in [(1, 3.0), (2, 4.0), (3, 4.0)] {
            let g = solve_ground_state(n, p, DEFAULT_R_MAX, DEFAULT_TOL).unwrap();
            let worst = (100..=12_500)
                .map(|k| g.ode_residual(k).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-5, "n={n} p={p}: {worst}");
        }
    }

    #[test]
    fn rescaling() {
        let g = one_dim();
        let id = g.rescale(1.0);
        let half = g.rescale(0.5);
        for k in (0..g.radii.len()).step_by(97) {
            let r = g.radii[k];
            assert!((id.eval(r) - g.values[k]).abs() < 1e-14);
            assert!((half.eval(0.5 * r) - g.values[k]).abs() < 1e-15);
        }
        assert_eq!(g.rescale(0.2).eval(0.2 * 25.5), 0.0);
        // ‖Ṽ_ε‖² = ε^n ‖Ṽ‖² by quadrature of the rescaled evaluator
        let g2 = solve_ground_state(2, 4.0, DEFAULT_R_MAX, DEFAULT_TOL).unwrap();
        let eps = 0.3;
        let ev = g2.rescale(eps);
        let h = eps * RADIAL_STEP / 2.0;
        let m = (eps * DEFAULT_R_MAX / h).round() as usize;
        let m = m + m % 2;
        let l2 = simpson(
            h,
            |k| {
                let r = k as f64 * h;
                sphere_area(2) * r * ev.eval(r).powi(2)
            },
            m,
        );
        assert!((l2 - eps * eps * g2.norms.l2_sq).abs() / l2 < 1e-4);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(solve_ground_state(3, 6.0, 25.0, 1e-10).is_err());
        assert!(solve_ground_state(2, 2.0, 25.0, 1e-10).is_err());
        assert!(solve_ground_state(2, 4.0, 10.0, 1e-10).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = GroundStateProfile::cached(dir.path(), 1, 3.0, 25.0, 1e-10).unwrap();
        let b = GroundStateProfile::cached(dir.path(), 1, 3.0, 25.0, 1e-10).unwrap();
        assert_eq!(a, b);
        let name = GroundStateProfile::cache_file_name(1, 3.0, 25.0, 1e-10);
        assert!(dir.path().join(name).exists());
    }
}
