//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use orbilab::concentration::{center_of_mass, p_functional};
use orbilab::experiment::ExperimentReport;
use orbilab::field::{FunctionSpace, OrbifoldFunction};
use orbilab::geometry::{GoodOrbifold, OrbifoldConfig, OrbifoldPoint, PRESET_NAMES};
use orbilab::ground_state::solve_ground_state;
use orbilab::report::read_manifest;
use orbilab::variational::{random_field, BumpConfig, Problem, ProblemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, budget: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < budget, format!("{s:.2} s (budget {budget} s)"))
}

fn orbifold(name: &str, grid: Option<usize>) -> GoodOrbifold {
    let mut cfg = OrbifoldConfig::preset(name).unwrap();
    if let Some(g) = grid {
        cfg.grid_resolution = g;
    }
    cfg.build().unwrap()
}

fn space(name: &str, grid: Option<usize>) -> FunctionSpace {
    FunctionSpace::new(Arc::new(orbifold(name, grid)))
}

fn ground_state_oracle() -> Outcome {
    let t0 = Instant::now();
    let g = solve_ground_state(1, 3.0, 25.0, 1e-10).unwrap();
    let elapsed = t0.elapsed();
    let mut err: f64 = 0.0;
    for k in 0..=20_000 {
        let r = k as f64 * 1e-3;
        let exact = 1.5 / (r / 2.0).cosh().powi(2);
        err = err.max((g.value(r) - exact).abs());
    }
    let (fast, time) = within(elapsed, 1.0);
    outcome(
        err < 1e-6 && fast,
        format!("n=1, p=3 max |V - (3/2)sech²(r/2)| = {err:.2e} (< 1e-6); {time}"),
    )
}

fn nehari_identities() -> Outcome {
    let t0 = Instant::now();
    let fs = space("pillowcase2d", None);
    let cfg = ProblemConfig::new(0.1, 4.0);
    let pr = Problem::new(&fs, &cfg).unwrap();
    let (mut defect, mut energy_gap): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let u = random_field(&pr, k, 2024).unwrap();
        defect = defect.max(pr.nehari_defect(&u));
        let e = pr.energy(&u);
        energy_gap = energy_gap.max((e - pr.nehari_energy(&u)).abs() / e.abs());
    }
    let (fast, time) = within(t0.elapsed(), 10.0);
    outcome(
        defect < 1e-10 && energy_gap < 1e-8 && fast,
        format!("100 seeds: max Nehari defect {defect:.2e} (< 1e-10), max energy identity gap {energy_gap:.2e} (< 1e-8); {time}"),
    )
}

fn gradient_order() -> Outcome {
    let t0 = Instant::now();
    let fs = space("pillowcase2d", Some(32));
    let cfg = ProblemConfig::new(0.2, 4.0);
    let pr = Problem::new(&fs, &cfg).unwrap();
    let en = cfg.eps.powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let smooth = |rng: &mut ChaCha8Rng| {
        let modes: Vec<[f64; 4]> = (0..6)
            .map(|_| {
                [
                    rng.gen_range(-3..=3) as f64,
                    rng.gen_range(-3..=3) as f64,
                    rng.gen_range(0.0..2.0 * PI),
                    rng.gen_range(0.2..1.0),
                ]
            })
            .collect();
        fs.sample(|x| {
            0.8 + modes
                .iter()
                .map(|m| m[3] * (2.0 * PI * (m[0] * x[0] + m[1] * x[1]) + m[2]).cos())
                .sum::<f64>()
        })
    };
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let u = smooth(&mut rng);
        let v = smooth(&mut rng);
        let exact = fs.inner(&pr.gradient(&u), &v) / en;
        let err = |h: f64| {
            let fd = (pr.energy(&u.axpy(h, &v)) - pr.energy(&u.axpy(-h, &v))) / (2.0 * h);
            (fd - exact).abs()
        };
        worst = worst.min((err(1e-3) / err(1e-4)).log10());
    }
    let (fast, time) = within(t0.elapsed(), 30.0);
    outcome(
        worst >= 1.9 && fast,
        format!("20 directions: minimum observed order {worst:.3} (>= 1.9); {time}"),
    )
}

fn constant_solution() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in PRESET_NAMES {
        let fs = space(name, None);
        let cfg = ProblemConfig::new(0.1, 4.0);
        let pr = Problem::new(&fs, &cfg).unwrap();
        let one = fs.constant(1.0);
        let res = pr.residual(&one);
        let vol = fs.orbifold().volume();
        let exact = (0.5 - 1.0 / cfg.p) * vol / cfg.eps.powi(fs.orbifold().dim() as i32);
        let rel = (pr.energy(&one) - exact).abs() / exact;
        ok &= res < 1e-10 && rel < 1e-12;
        parts.push(format!(
            "{name}: residual {res:.1e}, energy error {rel:.1e}"
        ));
    }
    outcome(ok, format!("u ≡ 1 ({})", parts.join("; ")))
}

fn energy_limit() -> Outcome {
    let t0 = Instant::now();
    let fs = space("pillowcase2d", Some(64));
    let orb = fs.orbifold();
    let g = solve_ground_state(2, 4.0, 25.0, 1e-10).unwrap();
    let zeta = orb.max_stratum().zeta;
    let target = g.m_e / zeta as f64;
    let cone = orb.node_as_point(orb.max_stratum().components[0][0]);
    let bump = BumpConfig {
        radius: orb.injectivity_bound(&cone),
        plateau_ratio: 0.5,
    };
    let mut energies = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let cfg = ProblemConfig::new(eps, 4.0);
        let pr = Problem::new(&fs, &cfg).unwrap();
        energies.push(pr.energy(&pr.inject(&cone, &g, &bump).unwrap()));
    }
    let decreasing = energies.windows(2).all(|w| w[1] < w[0]);
    let rel = (energies[2] - target).abs() / target;
    let (fast, time) = within(t0.elapsed(), 120.0);
    outcome(
        decreasing && rel < 0.1 && zeta == 2 && fast,
        format!(
            "J(i_eps(cone)) = {:.5}, {:.5}, {:.5} at eps = 0.2, 0.1, 0.05; m(E)/zeta = {target:.5} (zeta = {zeta}); gap {:.2}% (< 10%); {time}",
            energies[0],
            energies[1],
            energies[2],
            100.0 * rel
        ),
    )
}

/// Radial bump `(1 - (d/w)²)²` of compact support.
fn bump(fs: &FunctionSpace, x: &OrbifoldPoint, w: f64) -> OrbifoldFunction {
    let d = fs.orbifold().distances_to_nodes(x);
    fs.symmetrize(
        d.iter()
            .map(|&r| {
                if r < w {
                    (1.0 - (r / w).powi(2)).powi(2)
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .unwrap()
}

fn center_of_mass_oracle() -> Outcome {
    let t0 = Instant::now();
    let fs = space("pillowcase2d", None);
    let orb = fs.orbifold();
    let rho = orb.rho();
    let h = orb.covering().grid_spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut worst, mut in_ball) = (0.0f64, true);
    for _ in 0..50 {
        let y = Vector3::new(rng.gen(), rng.gen(), 0.0);
        let mut u = fs.zeros();
        for _ in 0..3 {
            let r = rng.gen_range(0.0..rho / 4.0);
            let a = rng.gen_range(0.0..2.0 * PI);
            let c = orb.canonicalize(&(y + Vector3::new(a.cos(), a.sin(), 0.0) * r));
            u = u.axpy(
                rng.gen_range(0.5..2.0),
                &bump(&fs, &c, rng.gen_range(rho / 8.0..rho / 2.0)),
            );
        }
        let refined = center_of_mass(&fs, &u).unwrap();
        // exhaustive search over every node
        let support: Vec<(usize, f64)> = u
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 1e-14)
            .map(|(i, v)| (i, v.abs()))
            .collect();
        let mut best = (f64::INFINITY, 0);
        for c in 0..fs.len() {
            let x = orb.node_as_point(c);
            let p: f64 = support
                .iter()
                .map(|&(i, a)| a * orb.distance_to_node(&x, i).powi(2))
                .sum();
            if p < best.0 {
                best = (p, c);
            }
        }
        let oracle = orb.node_as_point(best.1);
        worst = worst.max(orb.distance(&refined, &oracle));
        let y = orb.canonicalize(&y);
        in_ball &= orb.distance(&refined, &y) < rho + rho / 4.0;
        in_ball &= p_functional(&fs, &u, &refined).unwrap()
            <= p_functional(&fs, &u, &oracle).unwrap() + 1e-15;
    }
    let (fast, time) = within(t0.elapsed(), 60.0);
    outcome(
        worst < 2.0 * h && in_ball && fast,
        format!(
            "50 fields: max |refined - grid search| = {:.3} cells (< 2), minimizers inside the support ball: {in_ball}; {time}",
            worst / h
        ),
    )
}

fn run_cli(args: &[&str], out: &Path) -> (i32, Option<ExperimentReport>) {
    let status = Command::new(env!("CARGO_BIN_EXE_orbilab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("orbilab binary runs");
    let code = status.status.code().unwrap_or(-1);
    (code, read_manifest(&out.join("manifest.json")).ok())
}

fn roundtrip(code: i32, report: &Option<ExperimentReport>) -> Outcome {
    let Some(report) = report else {
        return outcome(false, format!("no manifest written (exit code {code})"));
    };
    let e = report
        .sweep
        .iter()
        .min_by(|a, b| a.eps.total_cmp(&b.eps))
        .expect("one eps");
    let grid = 1.0 / report.grid as f64;
    let Some(rt) = &e.roundtrip.report else {
        return outcome(
            false,
            format!("roundtrip not completed: {:?}", e.roundtrip.failure),
        );
    };
    let converged = rt.entries.iter().all(|x| x.converged);
    let in_tube = rt
        .entries
        .iter()
        .map(|x| x.tube_distance)
        .fold(0.0, f64::max);
    let back = rt
        .entries
        .iter()
        .all(|x| x.same_component && x.error < 2.0 * grid);
    outcome(
        code == 0 && converged && in_tube < 3.0 * report.rho && back && rt.entries.len() == 4,
        format!(
            "pillowcase eps = {}: {} cone seeds converged: {converged}; max dist(Cm, Z) = {:.4} (< 3 rho = {:.4}); max roundtrip error {:.2e} (< 2 cells); exit code {code}",
            e.eps,
            rt.entries.len(),
            in_tube,
            3.0 * report.rho,
            rt.max_error
        ),
    )
}

fn multiplicity(
    pillow: &Option<ExperimentReport>,
    torus: &Option<ExperimentReport>,
    elapsed: Duration,
) -> Outcome {
    let count = |r: &Option<ExperimentReport>| {
        r.as_ref()
            .and_then(|r| {
                r.sweep
                    .first()
                    .map(|e| (e.verdict.count, e.verdict.required))
            })
            .unwrap_or((0, usize::MAX))
    };
    let (pc, preq) = count(pillow);
    let (tc, treq) = count(torus);
    let (fast, time) = within(elapsed, 1200.0);
    outcome(
        pc >= preq && preq == 5 && tc >= treq && treq == 4 && fast,
        format!("eps = 0.05: pillowcase {pc} clusters (>= {preq}); torus2d {tc} clusters (>= {treq}); {time}"),
    )
}

fn geometry_suite() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pillow = orbifold("pillowcase2d", None);
    let mirror = orbifold("mirrortorus3d", Some(8));

    let mut metric = true;
    for k in 0..1000 {
        let o = if k % 2 == 0 { &pillow } else { &mirror };
        let n = o.dim();
        let mut p = || {
            let mut v = Vector3::zeros();
            for a in 0..n {
                v[a] = rng.gen::<f64>();
            }
            o.canonicalize(&v)
        };
        let (x, y, z) = (p(), p(), p());
        let dxy = o.distance(&x, &y);
        metric &= o.distance(&x, &x) == 0.0;
        metric &= dxy == o.distance(&y, &x);
        metric &= dxy <= o.distance(&x, &z) + o.distance(&z, &y) + 1e-12;
        metric &= dxy >= 0.0;
    }

    let mut orbit_stabilizer = true;
    let mut measure = true;
    for name in PRESET_NAMES {
        let o = orbifold(name, Some(12));
        for i in 0..o.covering().node_count() {
            orbit_stabilizer &= o.node_orbit(i).len() * o.node_local_order(i) == o.group_order();
        }
        measure &= o.volume() == o.covering().volume() / o.group_order() as f64;
    }

    let t = pillow.covering();
    let r = pillow.rho() / 3.0;
    let mut convex = true;
    for _ in 0..200 {
        let c = pillow.canonicalize(&Vector3::new(rng.gen(), rng.gen(), 0.0));
        let mut sample = || loop {
            let v = Vector3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), 0.0);
            let q = pillow.canonicalize(&(c.lift() + v));
            if pillow.distance(&q, &c) < r {
                return q;
            }
        };
        let (p, q) = (sample(), sample());
        let a = p.lift();
        let d = q
            .orbit_lifts()
            .map(|b| t.displacement(&b, &a))
            .min_by(|u, v| u.norm().total_cmp(&v.norm()))
            .unwrap();
        for k in 0..=32 {
            let on = pillow.canonicalize(&(a + d * (k as f64 / 32.0)));
            convex &= pillow.distance(&on, &c) < r + 1e-12;
        }
    }

    let mut radial: f64 = 0.0;
    for _ in 0..500 {
        let x = pillow.canonicalize(&Vector3::new(rng.gen(), rng.gen(), 0.0));
        let bound = pillow.injectivity_bound(&x).min(pillow.rho());
        let angle = rng.gen_range(0.0..2.0 * PI);
        let len = rng.gen::<f64>() * bound * 0.999;
        let v = Vector3::new(angle.cos(), angle.sin(), 0.0) * len;
        let y = pillow.exp_map(&x, &v).unwrap();
        radial = radial.max((pillow.distance(&x, &y) - len).abs());
    }
    let (fast, time) = within(t0.elapsed(), 60.0);
    outcome(
        metric && orbit_stabilizer && measure && convex && radial < 1e-12 && fast,
        format!(
            "metric axioms on 1000 triples: {metric}; orbit-stabilizer: {orbit_stabilizer}; mu(O) = vol/|G|: {measure}; weak convexity on 200 pairs: {convex}; radial minimality error {radial:.1e}; {time}"
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |k: u32, name: &'static str, o: Outcome| {
        println!(
            "{} criterion {k} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((k, name, o));
    };

    report(1, "ground-state oracle", ground_state_oracle());
    report(2, "Nehari and energy identities", nehari_identities());
    report(3, "gradient vs finite differences", gradient_order());
    report(4, "constant solution", constant_solution());
    report(5, "energy limit", energy_limit());
    report(6, "center-of-mass oracle", center_of_mass_oracle());

    let t0 = Instant::now();
    let cache = dir.path().join("cache");
    let cache = cache.to_str().unwrap();
    let pillow_out = dir.path().join("pillowcase");
    let (code, pillow) = run_cli(
        &[
            "solve",
            "--preset",
            "pillowcase2d",
            "--eps",
            "0.05",
            "--cache-dir",
            cache,
        ],
        &pillow_out,
    );
    report(7, "concentration and roundtrip", roundtrip(code, &pillow));
    let torus_out = dir.path().join("torus");
    let (_, torus) = run_cli(
        &[
            "solve",
            "--preset",
            "torus2d",
            "--eps",
            "0.05",
            "--cache-dir",
            cache,
        ],
        &torus_out,
    );
    report(
        8,
        "multiplicity verdict",
        multiplicity(&pillow, &torus, t0.elapsed()),
    );
    report(9, "geometry properties", geometry_suite());

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
