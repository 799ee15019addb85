//! Self-contained SVG line plots.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: String,
    pub t0: f64,
    pub dt: f64,
    pub samples: &'a [f64],
}

pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub max_points: usize,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "time (s)".into(),
            y_label: String::new(),
            max_points: 20_000,
        }
    }
}

const W: f64 = 960.0;
const H: f64 = 540.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Min/max envelope decimation.
///
/// Splits the samples into buckets and keeps each bucket's minimum and
/// maximum in time order, so peaks survive. Returns (index, value) pairs;
/// at most `max_points` of them.
pub fn decimate(samples: &[f64], max_points: usize) -> Vec<(usize, f64)> {
    if samples.len() <= max_points || max_points < 2 {
        return samples.iter().copied().enumerate().collect();
    }
    let buckets = max_points / 2;
    let mut out = Vec::with_capacity(buckets * 2);
    for b in 0..buckets {
        let lo = b * samples.len() / buckets;
        let hi = ((b + 1) * samples.len() / buckets).max(lo + 1);
        let (mut imin, mut imax) = (lo, lo);
        for i in lo..hi {
            if samples[i] < samples[imin] {
                imin = i;
            }
            if samples[i] > samples[imax] {
                imax = i;
            }
        }
        if imin == imax {
            out.push((imin, samples[imin]));
        } else {
            let (a, b) = if imin < imax { (imin, imax) } else { (imax, imin) };
            out.push((a, samples[a]));
            out.push((b, samples[b]));
        }
    }
    out
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + step * 1e-9 {
        out.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
        v += step;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render `series` as an overlay plot. An empty list gives empty axes.
pub fn emit_plot(series: &[Series], spec: &PlotSpec) -> String {
    let decimated: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            decimate(s.samples, spec.max_points)
                .into_iter()
                .map(|(i, v)| (s.t0 + i as f64 * s.dt, v))
                .filter(|(_, v)| v.is_finite())
                .collect()
        })
        .collect();

    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for pts in &decimated {
        for &(t, v) in pts {
            x = (x.0.min(t), x.1.max(t));
            y = (y.0.min(v), y.1.max(v));
        }
    }
    if !x.0.is_finite() {
        x = (0.0, 1.0);
        y = (0.0, 1.0);
    }
    if x.1 - x.0 <= 0.0 {
        x.1 = x.0 + 1.0;
    }
    if y.1 - y.0 <= 0.0 {
        let pad = if y.0 == 0.0 { 1.0 } else { y.0.abs() * 0.05 };
        y = (y.0 - pad, y.1 + pad);
    } else {
        let pad = (y.1 - y.0) * 0.05;
        y = (y.0 - pad, y.1 + pad);
    }

    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - x.0) / (x.1 - x.0) * pw;
    let sy = |v: f64| TOP + (y.1 - v) / (y.1 - y.0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    for t in ticks(x.0, x.1) {
        let px = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{}" stroke="#ddd"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            fmt_tick(t)
        );
    }
    for v in ticks(y.0, y.1) {
        let py = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 18.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&spec.y_label)
    );

    for (k, (s, pts)) in series.iter().zip(&decimated).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::with_capacity(pts.len() * 16);
        for (i, &(t, v)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, sx(t), sy(v));
        }
        let _ = writeln!(
            svg,
            r#"<path class="series" d="{d}" fill="none" stroke="{color}" stroke-width="1"/>"#
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}
