//! Plot emission: two-column (or wider) whitespace-separated `.dat`
//! sidecars, which are the canonical artifact, plus small hand-written SVG
//! renderings of them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::report::{ExperimentReport, Payload};

#[derive(Debug, Clone, Default)]
pub struct PlotOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Markers,
    Line,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub xlog: bool,
    pub ylog: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: [f64; 4] = [70.0, 20.0, 40.0, 55.0]; // left, right, top, bottom
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        format!("{}", (v * 1e4).round() / 1e4)
    } else {
        format!("{v:.0e}")
    }
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let t: Vec<f64> = values.map(|v| if log { v.log10() } else { v }).collect();
        let mut lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis { log, lo: lo - pad, hi: hi + pad }
    }

    fn frac(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        (t - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let step = ((b - a) / 6).max(1);
            (a..=b).step_by(step as usize).map(|e| 10f64.powi(e)).collect()
        } else {
            (0..=5).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 5.0).collect()
        }
    }
}

impl Plot {
    fn usable(&self, p: (f64, f64)) -> bool {
        p.0.is_finite() && p.1.is_finite() && (!self.xlog || p.0 > 0.0) && (!self.ylog || p.1 > 0.0)
    }

    /// SVG text, or `None` when no series has a plottable point.
    pub fn to_svg(&self) -> Option<String> {
        let pts: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).filter(|p| self.usable(*p)).collect();
        if pts.is_empty() {
            return None;
        }
        let xa = Axis::new(pts.iter().map(|p| p.0), self.xlog);
        let ya = Axis::new(pts.iter().map(|p| p.1), self.ylog);
        let (l, r, t, b) = (MARGIN[0], MARGIN[1], MARGIN[2], MARGIN[3]);
        let pw = WIDTH - l - r;
        let ph = HEIGHT - t - b;
        let px = |v: f64| l + pw * xa.frac(v);
        let py = |v: f64| t + ph * (1.0 - ya.frac(v));

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for v in xa.ticks() {
            let x = px(v);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, t + ph, t + ph + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, t + ph + 18.0, tick_label(v));
        }
        for v in ya.ticks() {
            let y = py(v);
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/>"#, l - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, l - 8.0, y + 4.0, tick_label(v));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, l + pw / 2.0, HEIGHT - 12.0, escape(&self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            t + ph / 2.0,
            escape(&self.ylabel)
        );
        for (k, series) in self.series.iter().enumerate() {
            let colour = COLOURS[k % COLOURS.len()];
            let p: Vec<(f64, f64)> = series.points.iter().copied().filter(|p| self.usable(*p)).collect();
            match series.style {
                Style::Markers => {
                    for (x, y) in &p {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{colour}"/>"#, px(*x), py(*y));
                    }
                }
                Style::Line => {
                    let path: Vec<String> = p.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
                    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, path.join(" "));
                }
            }
            let ly = t + 14.0 + 14.0 * k as f64;
            let _ = writeln!(s, r#"<text x="{}" y="{ly}" text-anchor="end" fill="{colour}">{}</text>"#, l + pw - 8.0, escape(&series.name));
        }
        s.push_str("</svg>\n");
        Some(s)
    }
}

/// Whitespace-separated table with a `#` header line.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = format!("# {}\n", header.join(" "));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Reads a table written by [`write_table`].
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|c| c.parse::<f64>().map_err(|_| Error::Input(format!("bad number '{c}' in {}", path.display()))))
                .collect()
        })
        .collect()
}

struct Emitter<'a> {
    out: &'a Path,
    result: PlotOutput,
}

impl Emitter<'_> {
    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let path = self.out.join(name);
        write_table(&path, header, rows)?;
        if rows.is_empty() {
            self.result.warnings.push(format!("{name}: no data rows"));
        }
        self.result.files.push(path);
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: &Plot) -> Result<()> {
        match plot.to_svg() {
            Some(svg) => {
                let path = self.out.join(name);
                std::fs::write(&path, svg)?;
                self.result.files.push(path);
            }
            None => self.result.warnings.push(format!("{name}: nothing to draw, image skipped")),
        }
        Ok(())
    }
}

/// Writes the sidecars and images of a report into `out`.
pub fn emit_plots(report: &ExperimentReport, out: &Path) -> Result<PlotOutput> {
    std::fs::create_dir_all(out)?;
    let mut e = Emitter { out, result: PlotOutput::default() };
    match &report.payload {
        Payload::Logmodulus(p) => {
            let fit = &p.fit;
            let kept: Vec<Vec<f64>> = fit.data_points.iter().filter(|d| d.retained).map(|d| vec![d.x, d.y]).collect();
            e.table("modulus_scatter.dat", &["x", "y"], &kept)?;
            let all: Vec<Vec<f64>> = fit
                .data_points
                .iter()
                .map(|d| vec![d.label, d.x, d.y, d.gate_ok as u8 as f64, d.above_floor as u8 as f64, d.retained as u8 as f64])
                .collect();
            e.table("modulus_points.dat", &["label", "x", "y", "gate_ok", "above_floor", "retained"], &all)?;
            let xs: Vec<f64> = kept.iter().map(|r| r[0]).collect();
            let curve: Vec<Vec<f64>> = if xs.is_empty() {
                Vec::new()
            } else {
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min).ln();
                let hi = xs.iter().copied().fold(0.0, f64::max).ln();
                (0..=48)
                    .map(|k| {
                        let x = (lo + (hi - lo) * k as f64 / 48.0).exp();
                        vec![x, fit.amplitude * x.ln().abs().powf(-fit.sigma)]
                    })
                    .collect()
            };
            e.table("modulus_fit.dat", &["x", "fitted_y"], &curve)?;
            let excluded: Vec<(f64, f64)> = fit.data_points.iter().filter(|d| !d.retained).map(|d| (d.x, d.y)).collect();
            let plot = Plot {
                title: format!("log-modulus fit: sigma = {:.3}, r2 = {:.3}", fit.sigma, fit.r_squared),
                xlabel: "x = ||dLambda||_*".into(),
                ylabel: format!("y = ||g1 - g2||_L{}", fit.q_norm_index),
                xlog: true,
                ylog: true,
                series: vec![
                    Series { name: "retained".into(), points: kept.iter().map(|r| (r[0], r[1])).collect(), style: Style::Markers },
                    Series { name: "excluded".into(), points: excluded, style: Style::Markers },
                    Series { name: "C |log x|^-sigma".into(), points: curve.iter().map(|r| (r[0], r[1])).collect(), style: Style::Line },
                ],
            };
            if kept.is_empty() {
                e.result.warnings.push("modulus.svg: no retained points, image skipped".into());
            } else {
                e.svg("modulus.svg", &plot)?;
            }
        }
        Payload::Instability(p) => {
            let f = &p.record.decay_fit;
            let env: Vec<Vec<f64>> = f.envelope.iter().map(|(o, v)| vec![*o as f64, *v]).collect();
            e.table("decay.dat", &["order", "max_abs_coefficient"], &env)?;
            let line: Vec<Vec<f64>> =
                f.envelope.iter().map(|(o, _)| vec![*o as f64, f.amplitude.ln() - f.rate * *o as f64]).collect();
            e.table("decay_fit.dat", &["order", "log_fitted_bound"], &line)?;
            let ml: Vec<Vec<f64>> = f.mean_log.iter().map(|(o, v)| vec![*o as f64, *v]).collect();
            e.table("decay_mean_log.dat", &["order", "mean_log_abs_coefficient"], &ml)?;
            let plot = Plot {
                title: format!("coefficient decay: c = {:.3}, r2 = {:.3}", f.rate, f.r_squared),
                xlabel: "max harmonic order".into(),
                ylabel: "max |a_ij|".into(),
                xlog: false,
                ylog: true,
                series: vec![
                    Series { name: "envelope".into(), points: env.iter().map(|r| (r[0], r[1])).collect(), style: Style::Markers },
                    Series { name: "A exp(-c order)".into(), points: line.iter().map(|r| (r[0], r[1].exp())).collect(), style: Style::Line },
                ],
            };
            e.svg("decay.svg", &plot)?;
        }
        Payload::Exterior(p) => {
            let prof: Vec<Vec<f64>> = p.profile.iter().map(|r| vec![r.point[0], r.estimate, r.finest, r.sampled]).collect();
            e.table("recovery_profile.dat", &["x", "estimate", "finest_ratio", "true_gamma"], &prof)?;
            let scan: Vec<Vec<f64>> = p.scan.points.iter().map(|s| vec![s.label, s.gamma_gap, s.dn_gap]).collect();
            e.table("exterior_scan.dat", &["amplitude", "gamma_gap", "dn_gap"], &scan)?;
            let plot = Plot {
                title: format!("exterior recovery (centre error {:.2}%)", 100.0 * p.recovery_error),
                xlabel: "x".into(),
                ylabel: "gamma".into(),
                xlog: false,
                ylog: false,
                series: vec![
                    Series { name: "true gamma".into(), points: prof.iter().map(|r| (r[0], r[3])).collect(), style: Style::Line },
                    Series { name: "recovered".into(), points: prof.iter().map(|r| (r[0], r[1])).collect(), style: Style::Markers },
                ],
            };
            e.svg("recovery.svg", &plot)?;
        }
        Payload::Reduction(p) => {
            let rows: Vec<Vec<f64>> =
                p.scan.checks.iter().map(|c| vec![c.x, c.lhs, c.rhs_shape, c.fitted_constant]).collect();
            e.table("reduction.dat", &["x", "lhs", "rhs_shape", "fitted_constant"], &rows)?;
            let plot = Plot {
                title: format!("reduction check, theta0 = {}", p.theta0),
                xlabel: "x = ||dLambda_gamma||_*".into(),
                ylabel: "value".into(),
                xlog: true,
                ylog: true,
                series: vec![
                    Series { name: "lhs".into(), points: rows.iter().map(|r| (r[0], r[1])).collect(), style: Style::Markers },
                    Series { name: "rhs shape".into(), points: rows.iter().map(|r| (r[0], r[2])).collect(), style: Style::Line },
                    Series { name: "fitted constant".into(), points: rows.iter().map(|r| (r[0], r[3])).collect(), style: Style::Markers },
                ],
            };
            e.svg("reduction.svg", &plot)?;
        }
        Payload::Residuals(p) => {
            let rows: Vec<Vec<f64>> =
                p.members.iter().map(|r| vec![r.member as f64, r.liouville, r.mtilde, r.dn_equivalence]).collect();
            e.table("residuals.dat", &["member", "liouville", "mtilde", "dn_equivalence"], &rows)?;
            let col = |k: usize| rows.iter().map(|r| (r[0], r[k])).collect::<Vec<_>>();
            let plot = Plot {
                title: "identity residuals".into(),
                xlabel: "member".into(),
                ylabel: "relative residual".into(),
                xlog: false,
                ylog: true,
                series: vec![
                    Series { name: "liouville".into(), points: col(1), style: Style::Markers },
                    Series { name: "mtilde".into(), points: col(2), style: Style::Markers },
                    Series { name: "dn equivalence".into(), points: col(3), style: Style::Markers },
                ],
            };
            e.svg("residuals.svg", &plot)?;
        }
    }
    Ok(e.result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.dat");
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-300, f64::MAX]];
        write_table(&p, &["a", "b"], &rows).unwrap();
        assert_eq!(read_table(&p).unwrap(), rows);
    }

    #[test]
    fn svg_skips_unplottable_points() {
        let plot = Plot {
            title: "t <1>".into(),
            xlabel: "x".into(),
            ylabel: "y".into(),
            xlog: true,
            ylog: false,
            series: vec![Series { name: "s".into(), points: vec![(-1.0, 2.0), (0.0, 1.0)], style: Style::Markers }],
        };
        assert!(plot.to_svg().is_none());
        let mut ok = plot.clone();
        ok.series[0].points.push((10.0, 3.0));
        let svg = ok.to_svg().unwrap();
        assert!(svg.contains("t &lt;1&gt;") && svg.matches("<circle").count() == 1);
    }
}
