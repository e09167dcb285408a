//! Minimal SVG scatter plot with an optional model curve.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 50.0;

pub fn plot(title: &str, x: &[f64], y: &[f64], curve: Option<&[(f64, f64)]>) -> String {
    let extent = |v: &mut dyn Iterator<Item = f64>| {
        v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(a), hi.max(a)))
    };
    let (x0, x1) = extent(&mut x.iter().copied());
    let (mut y0, mut y1) = extent(&mut y.iter().copied().chain(curve.unwrap_or(&[]).iter().map(|p| p.1)));
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let span_x = if x1 > x0 { x1 - x0 } else { 1.0 };
    let sx = |v: f64| M + (v - x0) / span_x * (W - 2.0 * M);
    let sy = |v: f64| H - M - (v - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">t (µs): {x0:.4} – {x1:.4}</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(s, r#"<text x="10" y="{}" font-size="12">{y1:.4}</text>"#, M - 5.0);
    let _ = writeln!(s, r#"<text x="10" y="{}" font-size="12">{y0:.4}</text>"#, H - M + 15.0);
    for (&a, &b) in x.iter().zip(y) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="none" stroke="steelblue"/>"#, sx(a), sy(b));
    }
    if let Some(c) = curve {
        let pts: Vec<String> = c.iter().map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="crimson"/>"#, pts.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
