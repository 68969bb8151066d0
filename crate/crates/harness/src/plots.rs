//! Static SVG line charts of d-bar against word length.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hitnet_core::decoders::{DecoderKind, TypeTag};

use crate::experiment::{EvalReport, ScalingRow};

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// `rising`, `falling`, `flat` (all steps zero) or `mixed`.
pub fn trend(values: &[f64]) -> &'static str {
    let steps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if steps.iter().all(|&d| d == 0.0) {
        "flat"
    } else if steps.iter().all(|&d| d >= 0.0) {
        "rising"
    } else if steps.iter().all(|&d| d <= 0.0) {
        "falling"
    } else {
        "mixed"
    }
}

pub fn series(rows: &[ScalingRow], arch: DecoderKind) -> Vec<(usize, f64)> {
    rows.iter().filter(|r| r.arch == arch).map(|r| (r.len, r.mean)).collect()
}

pub fn scaling_svg(title: &str, rows: &[ScalingRow], archs: &[DecoderKind]) -> String {
    let xs: Vec<f64> = rows.iter().map(|r| r.len as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean).filter(|v| v.is_finite()).collect();
    let (x0, x1) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let y1 = ys.iter().cloned().fold(0.0, f64::max);
    let (x0, x1) = if x0.is_finite() { if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x0 + 1.0) } } else { (0.0, 1.0) };
    let y1 = if y1 > 0.0 { y1 * 1.1 } else { 1.0 };
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - y / y1 * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - PAD, W - PAD, H - PAD);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
    let mut ticks: Vec<usize> = rows.iter().map(|r| r.len).collect();
    ticks.sort_unstable();
    ticks.dedup();
    for t in &ticks {
        let x = px(*t as f64);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"#, H - PAD + 18.0);
    }
    for k in 0..=4 {
        let v = y1 * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, PAD - 6.0, py(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">word length L</text>"#, W / 2.0, H - 14.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">mean per-segment chamfer</text>"#, H / 2.0, H / 2.0);

    for (i, &arch) in archs.iter().enumerate() {
        let pts = series(rows, arch);
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let dash = if arch.type_tag() == TypeTag::A { r#" stroke-dasharray="6,4""# } else { "" };
        let path: Vec<String> = pts.iter().map(|&(l, v)| format!("{:.2},{:.2}", px(l as f64), py(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-arch="{}" fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
            arch.name(),
            path.join(" ")
        );
        for &(l, v) in &pts {
            let _ = writeln!(
                s,
                r#"<circle data-arch="{}" data-len="{l}" data-value="{v}" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                arch.name(),
                px(l as f64),
                py(v)
            );
        }
        let vals: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, W - PAD - 170.0, W - PAD - 150.0);
        let _ = writeln!(
            s,
            r#"<text class="legend" data-arch="{}" data-trend="{t}" x="{}" y="{}">{} ({}, {t})</text>"#,
            arch.name(),
            W - PAD - 145.0,
            ly + 4.0,
            arch.name(),
            arch.type_tag(),
            t = trend(&vals)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plots(r: &EvalReport, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let p = dir.join(format!("{}_scaling.svg", r.space));
    fs::write(&p, scaling_svg(&format!("{}: per-segment chamfer vs length", r.space), &r.scaling, &r.archs))?;
    Ok(vec![p])
}
