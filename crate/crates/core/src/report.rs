//! Manifest, CSV tables and SVG plots of an experiment. Output bytes depend
//! only on the report; wall-clock data goes to a separate log.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentReport, ExperimentRun};
use crate::field::{FunctionSpace, OrbifoldFunction};

pub const MANIFEST: &str = "manifest.json";

fn write(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn manifest_json(report: &ExperimentReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn read_manifest(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

pub fn sweep_csv(report: &ExperimentReport) -> String {
    let mut s = String::from(
        "eps,m_j,cone_level,lambda_limit,lambda_min,count,required,holds,roundtrip_passed,clusters\n",
    );
    for e in &report.sweep {
        let ids: Vec<String> = e.verdict.clusters.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            e.eps,
            opt(e.m_j),
            report.cone_level,
            e.lambda_limit,
            opt(e.lambda_min),
            e.verdict.count,
            e.verdict.required,
            e.verdict.holds,
            e.roundtrip.passed,
            ids.join(" ")
        );
    }
    s
}

pub fn solutions_csv(report: &ExperimentReport) -> String {
    let mut s = String::from(
        "eps,index,seed,energy,residual,iterations,converged,cluster,cc,center_x,center_y,center_z,in_lambda_limit,in_lambda_min\n",
    );
    for e in &report.sweep {
        for r in &e.solutions {
            let (cc, c) = match &r.concentration {
                Some(c) => (
                    format!("{}", c.cc),
                    c.center.representative.map(|v| format!("{v}")),
                ),
                None => (String::new(), [String::new(), String::new(), String::new()]),
            };
            let _ = writeln!(
                s,
                "{},{},\"{}\",{},{},{},{},{},{},{},{},{},{},{}",
                e.eps,
                r.index,
                r.seed,
                r.energy,
                r.residual,
                r.iterations,
                r.converged,
                r.cluster.map_or(String::new(), |c| c.to_string()),
                cc,
                c[0],
                c[1],
                c[2],
                r.in_lambda_limit,
                r.in_lambda_min
            );
        }
    }
    s
}

/// Node coordinates and values of a field.
pub fn field_csv(space: &FunctionSpace, u: &OrbifoldFunction) -> String {
    let t = space.orbifold().covering();
    let mut s = String::from("x,y,z,u\n");
    for (i, v) in u.values().iter().enumerate() {
        let p = t.node_point(i);
        let _ = writeln!(s, "{},{},{},{v:e}", p[0], p[1], p[2]);
    }
    s
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

/// Energies of all converged solutions against ε, with `m(J_ε)` joined and
/// the level `m(E)/ζ` as a reference line.
pub fn energy_sweep_svg(report: &ExperimentReport) -> String {
    let mut pts: Vec<(f64, f64, bool)> = Vec::new();
    for e in &report.sweep {
        for r in e.solutions.iter().filter(|r| r.converged) {
            pts.push((
                e.eps,
                r.energy,
                r.cluster.is_some_and(|c| e.verdict.clusters.contains(&c)),
            ));
        }
    }
    let eps: Vec<f64> = report.sweep.iter().map(|e| e.eps).collect();
    let (x0, x1) = bounds(eps.iter().copied());
    let (mut y0, mut y1) = bounds(pts.iter().map(|p| p.1).chain([report.cone_level, 0.0]));
    // keep the interesting range readable when the constant sits far above
    let cap = 3.0 * report.cone_level * report.zeta as f64;
    y1 = y1.min(cap.max(report.cone_level * 1.5));
    y0 = y0.min(0.0);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0).max(1e-12) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| {
        HEIGHT - MARGIN - (y.min(y1) - y0) / (y1 - y0).max(1e-12) * (HEIGHT - 2.0 * MARGIN)
    };

    let mut s = svg_open(WIDTH, HEIGHT);
    axes(&mut s, "eps", "energy", (x0, x1), (y0, y1), &sx, &sy);
    let yl = sy(report.cone_level);
    let _ = writeln!(
        s,
        "<line x1=\"{MARGIN}\" y1=\"{yl:.2}\" x2=\"{:.2}\" y2=\"{yl:.2}\" stroke=\"#c0392b\" stroke-dasharray=\"6 4\"/>",
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#c0392b\" text-anchor=\"end\">m(E)/zeta = {:.4}</text>",
        WIDTH - MARGIN,
        yl - 4.0,
        report.cone_level
    );
    let mj: Vec<String> = report
        .sweep
        .iter()
        .filter_map(|e| e.m_j.map(|m| format!("{:.2},{:.2}", sx(e.eps), sy(m))))
        .collect();
    if mj.len() > 1 {
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"2\"/>",
            mj.join(" ")
        );
    }
    for (x, y, counted) in pts {
        let fill = if counted { "#1f4e79" } else { "#999999" };
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{fill}\" fill-opacity=\"0.7\"/>",
            sx(x),
            sy(y)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}: energies of converged solutions</text>",
        WIDTH / 2.0,
        report.preset
    );
    s.push_str("</svg>\n");
    s
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in it {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn axes(
    s: &mut String,
    xlabel: &str,
    ylabel: &str,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    sx: &dyn Fn(f64) -> f64,
    sy: &dyn Fn(f64) -> f64,
) {
    let (l, r, b, t) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        "<polyline points=\"{l},{t} {l},{b} {r},{b}\" fill=\"none\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{x:.3}</text>",
            sx(x),
            b + 18.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{y:.2}</text>",
            l - 6.0,
            sy(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{xlabel}</text>",
        (l + r) / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{ylabel}</text>",
        (t + b) / 2.0,
        (t + b) / 2.0
    );
}

/// Piecewise-linear map onto a dark-blue to yellow ramp.
pub fn color(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let x = t * 4.0;
    let k = (x.floor() as usize).min(3);
    let f = x - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Heatmap of nodal values on the first two lattice directions; in 3D the
/// slice through the origin.
pub fn heatmap_svg(space: &FunctionSpace, values: &[f64], title: &str) -> String {
    let t = space.orbifold().covering();
    let n = t.resolution();
    let cell = (480.0 / n as f64).max(1.0);
    let side = cell * n as f64;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let w = side + 2.0 * 40.0;
    let h = side + 80.0;
    let mut s = svg_open(w, h);
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        w / 2.0
    );
    let _ = writeln!(
        s,
        "<g transform=\"translate(40 40)\" shape-rendering=\"crispEdges\">"
    );
    for j in 0..n {
        for i in 0..n {
            let v = values[t.node_index([i, j, 0])];
            let (r, g, b) = color((v - lo) / span);
            let _ = writeln!(
                s,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>",
                i as f64 * cell,
                (n - 1 - j) as f64 * cell,
                cell,
                cell
            );
        }
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        "<text x=\"40\" y=\"{:.2}\">min {lo:.4e}</text><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">max {hi:.4e}</text>",
        side + 62.0,
        40.0 + side,
        side + 62.0
    );
    s.push_str("</svg>\n");
    s
}

fn eps_tag(eps: f64) -> String {
    format!("{eps}").replace('.', "p")
}

/// Manifest and tables derived from the report alone.
pub fn render_report(report: &ExperimentReport, out: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    Ok(vec![
        write(&out.join(MANIFEST), &manifest_json(report)?)?,
        write(&out.join("sweep.csv"), &sweep_csv(report))?,
        write(&out.join("solutions.csv"), &solutions_csv(report))?,
        write(&out.join("energy_sweep.svg"), &energy_sweep_svg(report))?,
    ])
}

/// Everything [`render_report`] writes plus field dumps, field slices and
/// concentration heatmaps.
pub fn render_run(run: &ExperimentRun, out: &Path) -> Result<Vec<PathBuf>> {
    let mut files = render_report(&run.report, out)?;
    let space = &run.space;
    let fields_dir = out.join("fields");
    create_dir(&fields_dir)?;
    for (f, e) in run.fields.iter().zip(&run.report.sweep) {
        let tag = eps_tag(f.eps);
        for (id, u) in &f.representatives {
            files.push(write(
                &fields_dir.join(format!("eps{tag}_cluster{id}.csv")),
                &field_csv(space, u),
            )?);
        }
        let lowest = e
            .clusters
            .iter()
            .find(|c| !c.is_constant)
            .and_then(|c| f.representatives.iter().find(|(id, _)| *id == c.id));
        if let Some((id, u)) = lowest {
            let title = format!("{} eps = {}: cluster {id}", run.report.preset, f.eps);
            files.push(write(
                &out.join(format!("field_eps{tag}.svg")),
                &heatmap_svg(space, u.values(), &title),
            )?);
        }
        if let Some(cf) = &f.cf {
            let title = format!(
                "{} eps = {}: concentration function",
                run.report.preset, f.eps
            );
            files.push(write(
                &out.join(format!("cf_eps{tag}.svg")),
                &heatmap_svg(space, cf, &title),
            )?);
        }
    }
    Ok(files)
}

/// Appends stage timings to the sidecar log, the only file carrying
/// wall-clock data.
pub fn append_log(out: &Path, lines: &[String]) -> Result<()> {
    use std::io::Write;
    create_dir(out)?;
    let path = out.join("run.log");
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    for line in lines {
        writeln!(f, "[{stamp}] {line}").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
