//! Minimal self-contained SVG charts. Every chart carries its data as CSV
//! inside an XML comment so a figure can be audited without rerunning.

use std::fmt::Write;

use crate::experiments::SummaryRow;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 55.0); // left, right, top, bottom
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(x, y, y_low, y_high)`; the error bar is skipped when low == high.
    pub points: Vec<(f64, f64, f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Lines,
    Bars,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub style: Style,
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
    scale: Scale,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, scale: Scale) -> Self {
        let vals: Vec<f64> = values
            .filter(|v| v.is_finite() && (scale == Scale::Linear || *v > 0.0))
            .map(|v| if scale == Scale::Log { v.log10() } else { v })
            .collect();
        let mut lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            scale,
        }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let t = match self.scale {
            Scale::Log if v > 0.0 => v.log10(),
            Scale::Log => return None,
            Scale::Linear => v,
        };
        t.is_finite().then(|| (t - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match self.scale {
            Scale::Log => {
                let mut out = Vec::new();
                let mut e = self.lo.floor() as i32;
                while (e as f64) <= self.hi {
                    for m in [1.0, 2.0, 5.0] {
                        let v = m * 10f64.powi(e);
                        if v.log10() >= self.lo && v.log10() <= self.hi {
                            out.push((v, format!("{v:.0e}")));
                        }
                    }
                    e += 1;
                }
                out
            }
            Scale::Linear => (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect(),
        }
    }
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let (ml, mr, mt, mb) = MARGIN;
        let pw = W - ml - mr;
        let ph = H - mt - mb;
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        let xa = Axis::new(pts().map(|p| p.0), self.x_scale);
        let ya = Axis::new(
            pts().flat_map(|p| [p.1, p.2, p.3]).chain(
                (self.style == Style::Bars && self.y_scale == Scale::Linear).then_some(0.0),
            ),
            self.y_scale,
        );
        let px = |v: f64| xa.frac(v).map(|f| ml + f * pw);
        let py = |v: f64| ya.frac(v).map(|f| mt + (1.0 - f) * ph);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        s.push_str("<!-- data\nseries,x,y,y_low,y_high\n");
        for se in &self.series {
            for p in &se.points {
                let _ = writeln!(s, "{},{},{},{},{}", se.label.replace("--", "- -"), p.0, p.1, p.2, p.3);
            }
        }
        s.push_str("-->\n");
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for (v, label) in xa.ticks() {
            if let Some(x) = px(v) {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
                    mt + ph,
                    mt + ph + 5.0,
                    mt + ph + 18.0
                );
            }
        }
        for (v, label) in ya.ticks() {
            if let Some(y) = py(v) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
                    ml,
                    ml + pw,
                    ml - 6.0,
                    y + 4.0
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            ml + pw / 2.0,
            H - 12.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            mt + ph / 2.0,
            mt + ph / 2.0,
            esc(&self.y_label)
        );

        let nseries = self.series.len().max(1) as f64;
        for (k, se) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            match self.style {
                Style::Lines => {
                    let path: Vec<String> = se
                        .points
                        .iter()
                        .filter_map(|p| Some(format!("{:.1},{:.1}", px(p.0)?, py(p.1)?)))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                        path.join(" ")
                    );
                    for p in &se.points {
                        let (Some(x), Some(y)) = (px(p.0), py(p.1)) else { continue };
                        let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
                        if p.2 != p.3 {
                            if let (Some(a), Some(b)) = (py(p.2), py(p.3)) {
                                let _ = writeln!(
                                    s,
                                    r#"<line x1="{x:.1}" y1="{a:.1}" x2="{x:.1}" y2="{b:.1}" stroke="{color}"/>"#
                                );
                            }
                        }
                    }
                }
                Style::Bars => {
                    let n = se.points.len().max(1) as f64;
                    let slot = pw / n;
                    let bw = slot * 0.8 / nseries;
                    for p in &se.points {
                        let (Some(x), Some(y)) = (px(p.0), py(p.1)) else { continue };
                        let base = py(0.0).unwrap_or(mt + ph).min(mt + ph);
                        let left = x - slot * 0.4 + k as f64 * bw;
                        let _ = writeln!(
                            s,
                            r#"<rect x="{left:.1}" y="{:.1}" width="{bw:.1}" height="{:.1}" fill="{color}"/>"#,
                            y.min(base),
                            (base - y).abs()
                        );
                    }
                }
            }
            if self.series.len() > 1 {
                let ly = mt + 14.0 + 16.0 * k as f64;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                    ml + pw - 110.0,
                    ly - 9.0,
                    ml + pw - 95.0,
                    ly,
                    esc(&se.label)
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Log-log chart of mean `d_inf` against `n`, one series per dimension.
pub fn summary_chart(rows: &[SummaryRow], title: &str) -> Chart {
    let mut dims: Vec<usize> = rows.iter().map(|r| r.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    let series = dims
        .into_iter()
        .map(|d| Series {
            label: format!("d={d}"),
            points: rows
                .iter()
                .filter(|r| r.dim == d)
                .map(|r| (r.n as f64, r.mean_d_inf, r.ci_lo, r.ci_hi))
                .collect(),
        })
        .collect();
    Chart {
        title: title.into(),
        x_label: "n".into(),
        y_label: "mean max displacement".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Log,
        style: Style::Lines,
        series,
    }
}
