//! Output directory layout: CSV diagnostics and snapshots, JSON summaries,
//! and small SVG plots.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::driver::TimeSeries;
use crate::error::{Error, Result};
use crate::grid::{CellField, Grid};

pub const DIAGNOSTICS_HEADER: &str = "t,mass,min_u,max_u,E_dirichlet,E_potential,E_total,\
diss_flux,diss_strong,ede_slack,el_residual,newton_iters";

const LOCK_NAME: &str = ".tfilm.lock";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is in use (remove {} if no run is active)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn e16(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn diagnostics_csv(series: &TimeSeries) -> String {
    let mut s = String::with_capacity(256 * series.diagnostics.len());
    s.push_str(DIAGNOSTICS_HEADER);
    s.push('\n');
    for d in &series.diagnostics {
        let cols = [
            d.t,
            d.mass,
            d.min_u,
            d.max_u,
            d.e_dirichlet,
            d.e_potential,
            d.e_total,
            d.diss_flux,
            d.diss_strong,
            d.ede_slack,
            d.el_residual,
        ];
        for c in cols {
            s.push_str(&e16(c));
            s.push(',');
        }
        let _ = writeln!(s, "{}", d.newton_iters);
    }
    s
}

pub fn profile_csv(g: &Grid, u: &CellField) -> String {
    let mut s = String::from("x,u\n");
    for (i, v) in u.iter().enumerate() {
        let _ = writeln!(s, "{},{}", e16(g.cell_center(i)), e16(*v));
    }
    s
}

pub fn snapshot_name(t: f64) -> String {
    format!("u_t{t:.9e}.csv")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, value).map_err(|e| Error::Io(e.into()))
}

/// Polyline plot of one or more series sharing an x axis.
pub fn svg_plot(title: &str, x: &[f64], series: &[(&str, &[f64])], log_y: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];
    let tr = |v: f64| if log_y { v.max(1e-300).log10() } else { v };
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in x.iter().filter(|v| v.is_finite()) {
        x0 = x0.min(v);
        x1 = x1.max(v);
    }
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, ys) in series {
        for &v in ys.iter().map(|&v| tr(v)).collect::<Vec<_>>().iter() {
            if v.is_finite() {
                y0 = y0.min(v);
                y1 = y1.max(v);
            }
        }
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 = y0 + 1.0;
    }
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (tr(v) - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        W / 2.0
    );
    let ylab = |v: f64| {
        if log_y {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3e}")
        }
    };
    let _ = writeln!(
        s,
        r#"<text x="5" y="{}" font-family="sans-serif" font-size="10">{}</text>"#,
        PAD + 4.0,
        ylab(y1)
    );
    let _ = writeln!(
        s,
        r#"<text x="5" y="{}" font-family="sans-serif" font-size="10">{}</text>"#,
        H - PAD,
        ylab(y0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="10">{x0:.3e}</text>"#,
        H - PAD + 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{x1:.3e}</text>"#,
        W - PAD,
        H - PAD + 15.0
    );
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(ys.iter())
            .filter(|(a, b)| a.is_finite() && tr(**b).is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{name}</text>"#,
            W - PAD - 120.0,
            PAD + 15.0 * (k as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a crate::driver::RunConfig,
    steps: usize,
    tol_audit: f64,
    mass_drift: f64,
    edi_violations: Vec<usize>,
    final_time: f64,
    final_energy: f64,
    final_min_u: f64,
    max_el_residual: f64,
    total_newton_iters: usize,
    snapshots: Vec<String>,
}

/// Writes `diagnostics.csv`, one CSV per snapshot, `summary.json` and the
/// energy and minimum plots into `dir`.
pub fn write_timeseries(dir: &Path, series: &TimeSeries) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("diagnostics.csv"), diagnostics_csv(series))?;
    let g = &series.config.grid;
    let mut names = Vec::with_capacity(series.snapshots.len());
    for snap in &series.snapshots {
        let name = snapshot_name(snap.t);
        fs::write(dir.join(&name), profile_csv(g, &snap.u))?;
        names.push(name);
    }
    let d = &series.diagnostics;
    let last = d.last().expect("a run has at least its initial row");
    let summary = Summary {
        config: &series.config,
        steps: d.len() - 1,
        tol_audit: series.tol_audit,
        mass_drift: series.mass_drift(),
        edi_violations: series.edi_violations(),
        final_time: last.t,
        final_energy: last.e_total,
        final_min_u: last.min_u,
        max_el_residual: d.iter().map(|r| r.el_residual).fold(0.0, f64::max),
        total_newton_iters: d.iter().map(|r| r.newton_iters).sum(),
        snapshots: names,
    };
    write_json(&dir.join("summary.json"), &summary)?;

    let t: Vec<f64> = d.iter().map(|r| r.t).collect();
    let e: Vec<f64> = d.iter().map(|r| r.e_total).collect();
    let positive = e.iter().all(|&v| v > 0.0);
    fs::write(
        dir.join("energy.svg"),
        svg_plot("energy", &t, &[("E_total", &e)], positive),
    )?;
    let m: Vec<f64> = d.iter().map(|r| r.min_u).collect();
    fs::write(
        dir.join("minu.svg"),
        svg_plot("min u", &t, &[("min_u", &m)], false),
    )?;
    Ok(())
}
