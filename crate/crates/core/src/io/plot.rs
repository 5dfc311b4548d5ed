//! Static SVG rendering of an inferred intensity: 95% band, posterior median,
//! optional truth, and an inset histogram of the gamma shape `a` with a grey
//! marker at `a = 1` (the Poisson case) and, when known, a red marker at the true `a`.

use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct PlotData {
    pub title: String,
    pub time: Vec<f64>,
    pub median: Vec<f64>,
    pub q025: Vec<f64>,
    pub q975: Vec<f64>,
    /// `(time, value)` of the true normalized intensity, on its own mesh.
    pub truth: Option<(Vec<f64>, Vec<f64>)>,
    pub a_draws: Vec<f64>,
    pub true_a: Option<f64>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const INSET: (f64, f64) = (190.0, 110.0);
const BINS: usize = 30;

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in points {
        let _ = write!(s, "{x:.2},{y:.2} ");
    }
    s.trim_end().to_string()
}

pub fn render_svg(data: &PlotData) -> Result<String> {
    let n = data.time.len();
    if n < 2 || [data.median.len(), data.q025.len(), data.q975.len()].iter().any(|&m| m != n) {
        return Err(Error::invalid("plot needs at least two nodes with matching band columns"));
    }
    let (x0, x1) = (data.time[0], data.time[n - 1]);
    let mut ymax = data.q975.iter().chain(&data.median).copied().fold(0.0, f64::max);
    if let Some((_, v)) = &data.truth {
        ymax = v.iter().copied().fold(ymax, f64::max);
    }
    let ymax = if ymax > 0.0 && ymax.is_finite() { ymax * 1.05 } else { 1.0 };
    let (ml, mr, mt, mb) = MARGIN;
    let pw = WIDTH - ml - mr;
    let ph = HEIGHT - mt - mb;
    let sx = |t: f64| ml + (t - x0) / (x1 - x0) * pw;
    let sy = |v: f64| mt + ph - (v.clamp(0.0, ymax) / ymax) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" font-size="14">{}</text>"#, ml, escape(&data.title));

    // Axes and ticks.
    let _ = writeln!(
        svg,
        r#"<path d="M{ml},{mt} V{} H{}" fill="none" stroke="black"/>"#,
        mt + ph,
        ml + pw
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{0}" x2="{x:.2}" y2="{1}" stroke="black"/><text x="{x:.2}" y="{2}" text-anchor="middle">{3}</text>"#,
            mt + ph,
            mt + ph + 5.0,
            mt + ph + 18.0,
            fmt_tick(t)
        );
    }
    for v in ticks(0.0, ymax) {
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="black"/><text x="{1}" y="{2:.2}" text-anchor="end">{3}</text>"#,
            ml - 5.0,
            ml - 8.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">time</text>"#,
        ml + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(14,{}) rotate(-90)" text-anchor="middle">normalized intensity</text>"#,
        mt + ph / 2.0
    );

    // Band, median, truth.
    let upper = data.time.iter().zip(&data.q975).map(|(&t, &v)| (sx(t), sy(v)));
    let lower = data.time.iter().zip(&data.q025).rev().map(|(&t, &v)| (sx(t), sy(v)));
    let _ = writeln!(
        svg,
        r##"<polygon class="band" points="{}" fill="#9ecae1" fill-opacity="0.6" stroke="none"/>"##,
        polyline(upper.chain(lower))
    );
    if let Some((tt, tv)) = &data.truth {
        let pts = tt
            .iter()
            .zip(tv)
            .filter(|(&t, _)| t >= x0 && t <= x1)
            .map(|(&t, &v)| (sx(t), sy(v)));
        let _ = writeln!(
            svg,
            r#"<polyline class="truth" points="{}" fill="none" stroke="black" stroke-dasharray="6,3" stroke-width="1.5"/>"#,
            polyline(pts)
        );
    }
    let med = data.time.iter().zip(&data.median).map(|(&t, &v)| (sx(t), sy(v)));
    let _ = writeln!(
        svg,
        r##"<polyline class="median" points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##,
        polyline(med)
    );

    if !data.a_draws.is_empty() {
        inset(&mut svg, data, ml + pw - INSET.0 - 10.0, mt + 10.0);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn inset(svg: &mut String, data: &PlotData, ox: f64, oy: f64) {
    let (w, h) = INSET;
    let (ax0, ax1) = (0.0, {
        let hi = data.a_draws.iter().copied().fold(1.0, f64::max).max(data.true_a.unwrap_or(0.0));
        hi * 1.1
    });
    let mut counts = [0usize; BINS];
    for &a in &data.a_draws {
        let b = (((a - ax0) / (ax1 - ax0)) * BINS as f64).floor() as isize;
        counts[b.clamp(0, BINS as isize - 1) as usize] += 1;
    }
    let cmax = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let ph = h - 22.0;
    let sx = |a: f64| ox + (a - ax0) / (ax1 - ax0) * w;
    let _ = writeln!(
        svg,
        r##"<g class="a-inset"><rect x="{ox}" y="{oy}" width="{w}" height="{h}" fill="white" stroke="#888"/>"##
    );
    let bw = w / BINS as f64;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let bh = c as f64 / cmax * (ph - 6.0);
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#6baed6"/>"##,
            ox + i as f64 * bw,
            oy + ph - bh,
            bw,
            bh
        );
    }
    let marker = |svg: &mut String, a: f64, class: &str, colour: &str, width: f64| {
        let x = sx(a);
        let _ = writeln!(
            svg,
            r#"<line class="{class}" x1="{x:.2}" y1="{oy}" x2="{x:.2}" y2="{:.2}" stroke="{colour}" stroke-width="{width}"/>"#,
            oy + ph
        );
    };
    marker(svg, 1.0, "a-one", "grey", 3.0);
    if let Some(a) = data.true_a {
        marker(svg, a, "a-true", "red", 1.5);
    }
    for t in ticks(ax0, ax1) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="9">{}</text>"#,
            sx(t),
            oy + ph + 10.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="9">shape a</text></g>"#,
        ox + w / 2.0,
        oy + h - 2.0
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> PlotData {
        PlotData {
            title: "A & B".into(),
            time: vec![0.0, 1.0, 2.0],
            median: vec![1.0, 2.0, 1.5],
            q025: vec![0.5, 1.0, 1.0],
            q975: vec![2.0, 3.0, 2.0],
            truth: None,
            a_draws: vec![2.5, 3.0, 3.2, 2.9],
            true_a: Some(3.0),
        }
    }

    #[test]
    fn layers_present() {
        let mut d = data();
        let plain = render_svg(&d).unwrap();
        assert!(plain.starts_with("<svg") && plain.trim_end().ends_with("</svg>"));
        assert!(plain.contains("class=\"band\"") && plain.contains("class=\"median\""));
        assert!(!plain.contains("class=\"truth\""));
        assert!(plain.contains("class=\"a-one\"") && plain.contains("class=\"a-true\""));
        assert!(plain.contains("A &amp; B"));
        d.truth = Some((vec![0.0, 2.0], vec![1.0, 1.0]));
        assert!(render_svg(&d).unwrap().contains("class=\"truth\""));
    }

    #[test]
    fn mismatched_columns_rejected() {
        let mut d = data();
        d.q975.pop();
        assert!(render_svg(&d).is_err());
    }

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(ticks(0.0, 50.0), vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0]);
        assert_eq!(ticks(0.0, 1.0).len(), 6);
        assert_eq!(fmt_tick(0.30000000000000004), "0.3");
    }
}
