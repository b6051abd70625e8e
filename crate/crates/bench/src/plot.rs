//! PNG figures: reward against episode, and converged EE against a swept
//! parameter. One series per scheme, labelled with the scheme names.

use plotters::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use crate::config::Scheme;
use crate::records::{median, summarize, ResultRecord};
use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Mean reward per episode, averaged over seeds.
    Reward,
    /// Converged EE per swept value, median over seeds.
    Sweep,
}

/// A labelled polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn label_of(id: &str) -> String {
    id.parse::<Scheme>().map(|s| s.label().to_string()).unwrap_or_else(|_| id.to_string())
}

fn scheme_order(id: &str) -> usize {
    id.parse::<Scheme>().map(|s| s as usize).unwrap_or(usize::MAX)
}

/// Per scheme: seed-averaged reward, smoothed over `window` episodes.
pub fn reward_series(records: &[ResultRecord], window: usize) -> Vec<Series> {
    let mut by: BTreeMap<(usize, String), BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in records {
        let e = by.entry((scheme_order(&r.scheme), r.scheme.clone())).or_default().entry(r.episode).or_insert((0.0, 0));
        e.0 += r.mean_reward;
        e.1 += 1;
    }
    by.into_iter()
        .map(|((_, id), eps)| {
            let avg: Vec<(f64, f64)> = eps.into_iter().map(|(e, (s, n))| (e as f64, s / n as f64)).collect();
            let w = window.max(1);
            let points = (0..avg.len())
                .map(|i| {
                    let lo = (i + 1).saturating_sub(w);
                    let m = avg[lo..=i].iter().map(|p| p.1).sum::<f64>() / (i + 1 - lo) as f64;
                    (avg[i].0, m)
                })
                .collect();
            Series { label: label_of(&id), points }
        })
        .collect()
}

/// Per scheme: median over seeds of the converged EE at each swept value.
pub fn sweep_series(records: &[ResultRecord]) -> Vec<Series> {
    let mut by: BTreeMap<(usize, String), BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
    for s in summarize(records) {
        let Some(v) = s.sweep_value else { continue };
        by.entry((scheme_order(&s.scheme), s.scheme.clone()))
            .or_default()
            .entry(v.to_bits())
            .or_insert((v, Vec::new()))
            .1
            .push(s.final_ee);
    }
    by.into_iter()
        .map(|((_, id), vals)| {
            let mut points: Vec<(f64, f64)> = vals.into_values().map(|(v, ees)| (v, median(&ees))).collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label: label_of(&id), points }
        })
        .collect()
}

const FONT_CANDIDATES: [&str; 4] = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
    "/usr/share/fonts/dejavu/DejaVuSans.ttf",
    "/Library/Fonts/Arial Unicode.ttf",
];

/// Registers a TrueType font for labels, once per process. `STARRIS_FONT`
/// overrides the search list.
fn ensure_font() -> Result<(), BenchError> {
    static FONT: OnceLock<Result<(), String>> = OnceLock::new();
    FONT.get_or_init(|| {
        let mut paths: Vec<PathBuf> = std::env::var_os("STARRIS_FONT").map(PathBuf::from).into_iter().collect();
        paths.extend(FONT_CANDIDATES.iter().map(PathBuf::from));
        let bytes = paths
            .iter()
            .find_map(|p| std::fs::read(p).ok())
            .ok_or_else(|| "no TrueType font found; set STARRIS_FONT to a .ttf file".to_string())?;
        let bytes: &'static [u8] = Box::leak(bytes.into_boxed_slice());
        plotters::style::register_font("sans-serif", FontStyle::Normal, bytes)
            .map_err(|_| "could not load the font".to_string())
    })
    .clone()
    .map_err(BenchError::Io)
}

const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn draw(path: &Path, series: &[Series], caption: &str, x_label: &str, y_label: &str) -> Result<(), BenchError> {
    let pts = || series.iter().flat_map(|s| s.points.iter());
    if pts().next().is_none() {
        return Err(BenchError::Input("nothing to plot".into()));
    }
    ensure_font()?;
    let io = |e: &dyn std::fmt::Display| BenchError::Io(format!("{}: {e}", path.display()));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |a: f64, b: f64| if b > a { 0.05 * (b - a) } else { a.abs().max(1.0) * 0.05 };
    let (px, py) = (pad(x0, x1), pad(y0, y1));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io(&e))?;
    }
    let root = BitMapBackend::new(path, (960, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| io(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 24))
        .margin(16)
        .x_label_area_size(48)
        .y_label_area_size(72)
        .build_cartesian_2d((x0 - px)..(x1 + px), (y0 - py)..(y1 + py))
        .map_err(|e| io(&e))?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(|e| io(&e))?;
    for (i, s) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), c.stroke_width(2)))
            .map_err(|e| io(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c.stroke_width(2)));
        if s.points.len() <= 20 {
            chart.draw_series(s.points.iter().map(|&p| Circle::new(p, 4, c.filled()))).map_err(|e| io(&e))?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| io(&e))?;
    root.present().map_err(|e| io(&e))?;
    Ok(())
}

/// Renders `figure` from `records` into `path`; returns the plotted series.
pub fn plot(records: &[ResultRecord], figure: Figure, path: &Path) -> Result<Vec<Series>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Input("no records to plot".into()));
    }
    let series = match figure {
        Figure::Reward => reward_series(records, 10),
        Figure::Sweep => sweep_series(records),
    };
    match figure {
        Figure::Reward => draw(path, &series, "Average reward vs. episode", "episode", "average reward")?,
        Figure::Sweep => {
            let param = records.iter().map(|r| r.sweep_param.as_str()).find(|p| !p.is_empty()).unwrap_or("swept value");
            draw(path, &series, &format!("Average EE vs. {param}"), param, "EE (bits/s/Hz/W)")?
        }
    }
    Ok(series)
}
