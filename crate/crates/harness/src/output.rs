//! CSV files and SVG plots for experiment results.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use plotters::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::experiment::{ExperimentId, PricingRow, ResultTable, TrialRow};
use crate::stats::{PricingSummaryRow, SummaryRow};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRow>> {
    read_csv(path)
}

pub fn read_pricing(path: &Path) -> Result<Vec<PricingRow>> {
    read_csv(path)
}

/// Writes `<id>_trials.csv`, `<id>_summary.csv`, the pricing files for pricing sweeps
/// and `<id>.svg` into `dir`. Returns the paths written.
pub fn write_results(dir: &Path, id: ExperimentId, table: &ResultTable) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let path = |suffix: &str| dir.join(format!("{}{suffix}", id.name()));
    write_csv(&path("_trials.csv"), &table.trials)?;
    written.push(path("_trials.csv"));
    write_csv(&path("_summary.csv"), &table.summary)?;
    written.push(path("_summary.csv"));
    if id.is_pricing() {
        write_csv(&path("_pricing.csv"), &table.pricing)?;
        written.push(path("_pricing.csv"));
        write_csv(&path("_pricing_summary.csv"), &table.pricing_summary)?;
        written.push(path("_pricing_summary.csv"));
        plot_pricing(&path(".svg"), id, &table.pricing_summary)?;
    } else {
        plot_summary(&path(".svg"), id, &table.summary)?;
    }
    written.push(path(".svg"));
    Ok(written)
}

type Series = (String, Vec<(f64, f64)>);

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.1 };
    (lo - pad, hi + pad)
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    (padded(x0, x1), padded(y0, y1))
}

fn draw_panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    caption: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()>
where
    DB::ErrorType: 'static,
{
    let ((x0, x1), (y0, y1)) = bounds(series);
    let mut chart = ChartBuilder::on(area)
        .caption(caption, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw()?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))?;
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    Ok(())
}

/// Mean operator power (or wall time for the runtime sweep) against the swept value,
/// one line per scenario, solver and rate threshold.
pub fn plot_summary(path: &Path, id: ExperimentId, summary: &[SummaryRow]) -> Result<()> {
    let timing = id == ExperimentId::RuntimeCompare;
    let multi_rate = summary.iter().any(|r| r.rate_threshold_bps != summary[0].rate_threshold_bps);
    let mut series: Vec<Series> = Vec::new();
    for row in summary {
        let mut name = format!("{} / {}", row.scenario, row.solver);
        if multi_rate {
            name += &format!(" / {} Mbps", row.rate_threshold_bps / 1e6);
        }
        let y = if timing { Some(row.mean_wall_time_s) } else { row.mean_power_w };
        let Some(y) = y else { continue };
        match series.iter_mut().find(|s| s.0 == name) {
            Some(s) => s.1.push((row.sweep_value, y)),
            None => series.push((name, vec![(row.sweep_value, y)])),
        }
    }
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let y_label = if timing { "mean wall time [s]" } else { "mean power without macro constant [W]" };
    draw_panel(&root, id.name(), id.sweep_param(), y_label, &series)?;
    root.present()?;
    Ok(())
}

/// Offloading and renewable prices per small cell against the swept value.
pub fn plot_pricing(path: &Path, id: ExperimentId, summary: &[PricingSummaryRow]) -> Result<()> {
    let collect = |f: fn(&PricingSummaryRow) -> Option<f64>| {
        let mut series: Vec<Series> = Vec::new();
        for row in summary {
            let Some(y) = f(row) else { continue };
            let name = format!("cell {}", row.cell + 1);
            match series.iter_mut().find(|s| s.0 == name) {
                Some(s) => s.1.push((row.sweep_value, y)),
                None => series.push((name, vec![(row.sweep_value, y)])),
            }
        }
        series
    };
    let root = SVGBackend::new(path, (1200, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let panels = root.split_evenly((1, 2));
    draw_panel(&panels[0], "offloading price", id.sweep_param(), "money units per carrier", &collect(|r| r.mean_offloading_price))?;
    draw_panel(&panels[1], "renewable price", id.sweep_param(), "money units per joule", &collect(|r| r.mean_renewable_price))?;
    root.present()?;
    Ok(())
}
