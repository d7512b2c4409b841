use std::fmt::Write;

use super::CurvePoint;
use crate::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    dash: bool,
    values: Vec<(f64, f64)>,
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Line chart of train and test loss (and the z-norm deviation when
/// present) against width on a log2 axis, with an optional threshold marker.
pub fn render_curves(points: &[CurvePoint], threshold: Option<usize>, title: &str) -> Result<String> {
    let live: Vec<&CurvePoint> = points.iter().filter(|p| !p.gap).collect();
    if live.len() < 2 {
        return Err(Error::EmptyChart(format!("need at least 2 points, got {}", live.len())));
    }
    let xs: Vec<f64> = live.iter().map(|p| (p.width as f64).log2()).collect();
    let (x0, x1) = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    if !(x1 > x0) {
        return Err(Error::EmptyChart("all points share one width".into()));
    }
    let pick = |f: fn(&CurvePoint) -> f64| -> Vec<(f64, f64)> {
        live.iter()
            .zip(&xs)
            .filter(|(p, _)| f(p).is_finite())
            .map(|(p, &x)| (x, f(p)))
            .collect()
    };
    let mut series = vec![
        Series {
            name: "train",
            color: "#1f77b4",
            dash: false,
            values: pick(|p| p.train_loss),
        },
        Series {
            name: "test",
            color: "#d62728",
            dash: false,
            values: pick(|p| p.test_loss),
        },
    ];
    let dev = pick(|p| p.z_norm_deviation);
    if !dev.is_empty() {
        series.push(Series {
            name: "z-norm deviation",
            color: "#2ca02c",
            dash: true,
            values: dev,
        });
    }
    let ys = series.iter().flat_map(|s| s.values.iter().map(|v| v.1));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    if !y0.is_finite() {
        return Err(Error::EmptyChart("no finite values".into()));
    }
    if y1 - y0 < 1e-12 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (bx, by) = (LEFT, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{bx:.1},{TOP:.1} V{by:.1} H{:.1}" fill="none" stroke="black"/>"#,
        W - RIGHT
    );
    for (p, &x) in live.iter().zip(&xs) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(x),
            by + 16.0,
            p.width
        );
    }
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            bx - 6.0,
            py(y) + 4.0,
            fmt_tick(y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">neurons per layer</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    if let Some(t) = threshold {
        let x = px((t as f64).log2());
        let _ = writeln!(
            s,
            r#"<line class="threshold" x1="{x:.1}" y1="{TOP:.1}" x2="{x:.1}" y2="{by:.1}" stroke="gray" stroke-dasharray="4 3"/>"#
        );
    }
    for (k, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .values
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let dash = if ser.dash { r#" stroke-dasharray="6 3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            pts.join(" "),
            ser.color
        );
        let ly = TOP + 6.0 + 14.0 * k as f64;
        let lx = W - RIGHT - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}"{dash}/>"#,
            lx + 18.0,
            ser.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            ser.name
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
