//! Reward-curve plotting straight to SVG text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use semnav::a3c::{EpisodeRecord, REWARD_LOG_HEADER};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    /// (frames, moving-average return)
    pub points: Vec<(f64, f64)>,
}

pub fn parse_log(text: &str) -> Result<Vec<EpisodeRecord>, CliError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == REWARD_LOG_HEADER => {}
        Some((_, h)) => return Err(CliError::config(format!("unexpected log header {:?}", h.trim()))),
        None => return Err(CliError::config("reward log is empty")),
    }
    let records = lines
        .map(|(n, l)| {
            EpisodeRecord::parse_csv_line(l)
                .ok_or_else(|| CliError::config(format!("line {}: malformed record {:?}", n + 1, l.trim())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(CliError::config("reward log has no episodes"));
    }
    Ok(records)
}

/// Moving average of episode return over `window` episodes, one series per
/// (scene, target). A series shorter than the window collapses to one
/// point: its overall mean at its last frame count.
pub fn moving_average(records: &[EpisodeRecord], window: usize) -> Vec<Series> {
    let window = window.max(1);
    let mut groups: BTreeMap<(String, usize), Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.scene_id.clone(), r.target_idx)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scene, target), mut rs)| {
            rs.sort_by_key(|r| r.frames);
            let returns: Vec<f64> = rs.iter().map(|r| r.episode_return).collect();
            let points = if returns.len() <= window {
                let mean = returns.iter().sum::<f64>() / returns.len() as f64;
                vec![(rs[rs.len() - 1].frames as f64, mean)]
            } else {
                let mut sum: f64 = returns[..window].iter().sum();
                let mut pts = vec![(rs[window - 1].frames as f64, sum / window as f64)];
                for i in window..returns.len() {
                    sum += returns[i] - returns[i - window];
                    pts.push((rs[i].frames as f64, sum / window as f64));
                }
                pts
            };
            Series { label: format!("{scene} #{target}"), points }
        })
        .collect()
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(series: &[Series], title: &str) -> String {
    let (w, h) = (960.0, 540.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
        x0 -= 1.0;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#,
            sx(xv),
            h - bottom + 18.0,
            xv
        );
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.2}</text>"#, left - 6.0, sy(yv) + 4.0, yv);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">frames</text>"#, (left + w - right) / 2.0, h - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">mean episode return</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, "<g><title>{}</title>", escape(&s.label));
        if s.points.len() == 1 {
            let (x, y) = s.points[0];
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        } else {
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
                pts.join(" ")
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
