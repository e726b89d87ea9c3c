//! Self-contained SVG charts drawn from the sweep CSVs.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::params::Scenario;
use crate::sweep::{FundamentalRow, SeriesRow, TrainRow};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    Flow,
    Speed,
}

/// Rounds a raw tick step to 1, 2 or 5 times a power of ten.
fn nice_step(span: f64, ticks: f64) -> f64 {
    let raw = (span / ticks).max(f64::MIN_POSITIVE);
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A rectangular plotting area with linear axes.
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(x0: f64, y0: f64, w: f64, h: f64, (xmin, xmax): (f64, f64), (ymin, ymax): (f64, f64)) -> Self {
        let xmax = if xmax > xmin { xmax } else { xmin + 1.0 };
        let ymax = if ymax > ymin { ymax } else { ymin + 1.0 };
        Frame {
            x0,
            y0,
            w,
            h,
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, y0, w, h) = (self.x0, self.y0, self.w, self.h);
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#333"/>"##
        );
        let step = nice_step(self.xmax - self.xmin, 6.0);
        let mut t = (self.xmin / step).ceil() * step;
        while t <= self.xmax + step * 1e-9 {
            let x = self.px(t);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
                y0 + h,
                y0 + h + 5.0,
                y0 + h + 18.0,
                fmt_tick(t, step)
            );
            t += step;
        }
        let step = nice_step(self.ymax - self.ymin, 5.0);
        let mut t = (self.ymin / step).ceil() * step;
        while t <= self.ymax + step * 1e-9 {
            let y = self.py(t);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0}" y2="{y:.1}" stroke="#333"/><line x1="{x0}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#eee"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
                x0 - 5.0,
                x0 + w,
                x0 - 8.0,
                y + 4.0,
                fmt_tick(t, step)
            );
            t += step;
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            x0 + w / 2.0,
            y0 + h + 36.0,
            esc(xlabel)
        );
        let (lx, ly) = (x0 - 48.0, y0 + h / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{lx:.1}" y="{ly:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
            esc(ylabel)
        );
    }

    fn no_data(&self, out: &mut String) {
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="16" fill="#888" text-anchor="middle">no data</text>"##,
            self.x0 + self.w / 2.0,
            self.y0 + self.h / 2.0
        );
    }
}

fn fmt_tick(v: f64, step: f64) -> String {
    if step >= 1.0 {
        format!("{}", v.round())
    } else {
        let digits = (-step.log10().floor()) as usize;
        format!("{v:.digits$}")
    }
}

fn document(width: f64, height: f64, title: &str, body: &str) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="22" font-size="15" text-anchor="middle">{}</text>
{body}</svg>
"#,
        width / 2.0,
        esc(title)
    )
}

fn dash(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::Collective => "",
        Scenario::IndependentOnly => r#" stroke-dasharray="6 4""#,
        Scenario::Base => r#" stroke-dasharray="2 3""#,
    }
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str, dash: &str) {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
        pts.join(" ")
    );
}

/// Flow-density or speed-density diagram: seed means per density, one line
/// per (scenario, p_mav), colored by p_mav, dashed for independent-only.
pub fn fundamental_chart(rows: &[FundamentalRow], measure: Measure) -> String {
    let (title, ylabel) = match measure {
        Measure::Flow => ("Flow vs density", "flow (veh/h/lane)"),
        Measure::Speed => ("Speed vs density", "mean speed (m/s)"),
    };
    let value = |r: &FundamentalRow| match measure {
        Measure::Flow => r.mean_flow_veh_per_h_per_lane,
        Measure::Speed => r.mean_speed_m_per_s,
    };
    type Key = (Scenario, u64);
    let mut groups: BTreeMap<Key, BTreeMap<u64, (f64, f64, u32)>> = BTreeMap::new();
    for r in rows {
        let e = groups
            .entry((r.scenario, r.p_mav.to_bits()))
            .or_default()
            .entry(r.density_veh_per_km_per_lane.to_bits())
            .or_insert((r.density_veh_per_km_per_lane, 0.0, 0));
        e.1 += value(r);
        e.2 += 1;
    }
    let xmax = rows.iter().map(|r| r.density_veh_per_km_per_lane).fold(0.0, f64::max);
    let ymax = rows.iter().map(value).fold(0.0, f64::max) * 1.05;
    let frame = Frame::new(80.0, 40.0, 500.0, 380.0, (0.0, xmax), (0.0, ymax));
    let mut body = String::new();
    frame.axes(&mut body, "density (veh/km/lane)", ylabel);
    if rows.is_empty() {
        frame.no_data(&mut body);
        return document(WIDTH, HEIGHT, title, &body);
    }
    let mut p_values: Vec<u64> = groups.keys().map(|k| k.1).collect();
    p_values.sort_by(|a, b| f64::from_bits(*a).total_cmp(&f64::from_bits(*b)));
    p_values.dedup();
    let color_of = |p: u64| PALETTE[p_values.iter().position(|&q| q == p).unwrap_or(0) % PALETTE.len()];
    for (i, ((scenario, p), points)) in groups.iter().enumerate() {
        let color = color_of(*p);
        let mut pts: Vec<(f64, f64)> = points
            .values()
            .map(|(d, sum, n)| (frame.px(*d), frame.py(sum / f64::from(*n))))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        polyline(&mut body, &pts, color, dash(*scenario));
        for (x, y) in &pts {
            let _ = writeln!(body, r#"<circle cx="{x:.1}" cy="{y:.1}" r="2.2" fill="{color}"/>"#);
        }
        let ly = 50.0 + 18.0 * i as f64;
        let _ = writeln!(
            body,
            r#"<line x1="596" y1="{ly:.1}" x2="622" y2="{ly:.1}" stroke="{color}" stroke-width="2"{}/><text x="628" y="{:.1}" font-size="11">{} p={}</text>"#,
            dash(*scenario),
            ly + 4.0,
            scenario,
            f64::from_bits(*p)
        );
    }
    document(WIDTH, HEIGHT, title, &body)
}

/// Grouped bars of the train-size distribution (sizes 2 and up as a share
/// of all trains), one panel per (p_mav, density), collective scenario.
/// Prefers densities 30, 60 and 90 when they were simulated.
pub fn train_histograms(rows: &[TrainRow]) -> String {
    let mut counts: BTreeMap<(u64, u64), BTreeMap<usize, u64>> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| r.scenario == Scenario::Collective && r.p_mav > 0.0)
    {
        *counts
            .entry((r.p_mav.to_bits(), r.density.to_bits()))
            .or_default()
            .entry(r.size)
            .or_default() += r.count;
    }
    let mut p_values: Vec<f64> = counts.keys().map(|k| f64::from_bits(k.0)).collect();
    p_values.sort_by(f64::total_cmp);
    p_values.dedup();
    let mut densities: Vec<f64> = counts.keys().map(|k| f64::from_bits(k.1)).collect();
    densities.sort_by(f64::total_cmp);
    densities.dedup();
    let preferred: Vec<f64> = densities
        .iter()
        .copied()
        .filter(|d| [30.0, 60.0, 90.0].contains(d))
        .collect();
    let cols = if preferred.is_empty() {
        densities.iter().copied().take(3).collect()
    } else {
        preferred
    };

    let (pw, ph) = (220.0, 150.0);
    let width = (80.0 + (pw + 40.0) * cols.len().max(1) as f64).max(400.0);
    let height = 60.0 + (ph + 70.0) * p_values.len().max(1) as f64;
    let mut body = String::new();
    if counts.is_empty() {
        let frame = Frame::new(80.0, 40.0, width - 120.0, height - 100.0, (0.0, 1.0), (0.0, 1.0));
        frame.axes(&mut body, "train size (modules)", "share of trains");
        frame.no_data(&mut body);
        return document(width, height, "Train-size distribution", &body);
    }
    let max_size = counts
        .values()
        .flat_map(|m| m.keys().copied())
        .max()
        .unwrap_or(2)
        .max(2);
    for (ri, p) in p_values.iter().enumerate() {
        for (ci, d) in cols.iter().enumerate() {
            let x0 = 70.0 + ci as f64 * (pw + 40.0);
            let y0 = 50.0 + ri as f64 * (ph + 70.0);
            let frame = Frame::new(x0, y0, pw, ph, (1.5, max_size as f64 + 0.5), (0.0, 1.0));
            frame.axes(&mut body, "train size", "share");
            let _ = writeln!(
                body,
                r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">p_mav={p}, {d} veh/km/lane</text>"#,
                x0 + pw / 2.0,
                y0 - 6.0
            );
            let Some(bins) = counts.get(&(p.to_bits(), d.to_bits())) else {
                frame.no_data(&mut body);
                continue;
            };
            let trains: u64 = bins.iter().filter(|(&s, _)| s >= 2).map(|(_, &c)| c).sum();
            if trains == 0 {
                frame.no_data(&mut body);
                continue;
            }
            let bar = pw / (max_size as f64 - 1.0) * 0.7;
            for size in 2..=max_size {
                let share = bins.get(&size).copied().unwrap_or(0) as f64 / trains as f64;
                let (x, y) = (frame.px(size as f64) - bar / 2.0, frame.py(share));
                let _ = writeln!(
                    body,
                    r#"<rect x="{x:.1}" y="{y:.1}" width="{bar:.1}" height="{:.1}" fill="{}"/>"#,
                    frame.py(0.0) - y,
                    PALETTE[ri % PALETTE.len()]
                );
            }
        }
    }
    document(width, height, "Train-size distribution (collective)", &body)
}

/// Flow time series of one run with a vertical marker at `t_dock_start`.
pub fn flow_series(series: Option<(&str, &[SeriesRow])>, t_dock_start: u32) -> String {
    let rows = series.map_or(&[][..], |(_, s)| s);
    let title = match series {
        Some((name, _)) => format!("Flow time series: {name}"),
        None => "Flow time series".to_string(),
    };
    let tmax = rows.last().map_or(f64::from(t_dock_start) * 2.0, |r| f64::from(r.t));
    let ymax = rows.iter().map(|r| r.flow_veh_per_h_per_lane).fold(0.0, f64::max) * 1.05;
    let frame = Frame::new(80.0, 40.0, 640.0, 380.0, (0.0, tmax), (0.0, ymax));
    let mut body = String::new();
    frame.axes(&mut body, "time step", "flow (veh/h/lane)");
    if rows.is_empty() {
        frame.no_data(&mut body);
    } else {
        // One point per 10 steps keeps the file small.
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .step_by(10)
            .map(|r| (frame.px(f64::from(r.t)), frame.py(r.flow_veh_per_h_per_lane)))
            .collect();
        polyline(&mut body, &pts, PALETTE[0], "");
    }
    let x = frame.px(f64::from(t_dock_start));
    let _ = writeln!(
        body,
        r##"<line x1="{x:.1}" y1="40" x2="{x:.1}" y2="420" stroke="#d62728" stroke-dasharray="5 4"/><text x="{:.1}" y="54" font-size="11" fill="#d62728">docking starts (t={t_dock_start})</text>"##,
        x + 4.0
    );
    document(WIDTH, HEIGHT, &title, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frow(scenario: Scenario, p: f64, d: f64, q: f64) -> FundamentalRow {
        FundamentalRow {
            scenario,
            p_mav: p,
            density_veh_per_km_per_lane: d,
            seed: 1,
            mean_flow_veh_per_h_per_lane: q,
            mean_speed_m_per_s: q / d / 3.6,
        }
    }

    #[test]
    fn one_series_per_penetration_rate() {
        let rows: Vec<_> = [0.0, 0.25, 0.5, 0.75]
            .iter()
            .flat_map(|&p| [10.0, 20.0].map(|d| frow(Scenario::Collective, p, d, 1000.0 * d / 10.0)))
            .collect();
        let svg = fundamental_chart(&rows, Measure::Flow);
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("no data"));
    }

    #[test]
    fn empty_input_draws_axes_and_note() {
        for svg in [
            fundamental_chart(&[], Measure::Speed),
            train_histograms(&[]),
            flow_series(None, 5000),
        ] {
            assert!(svg.contains("no data"));
            assert!(svg.contains("<rect"));
        }
    }

    #[test]
    fn series_marks_docking_onset() {
        let rows: Vec<SeriesRow> = (0..12_000)
            .map(|t| SeriesRow {
                t,
                flow_veh_per_h_per_lane: if t < 5000 { 1700.0 } else { 2000.0 },
                mean_speed_m_per_s: 8.0,
                frac_independent_or_docking: 1.0,
                frac_collective: 0.0,
            })
            .collect();
        let svg = flow_series(Some(("collective_p0.5_d60_r0", &rows)), 5000);
        // x = 80 + 5000/11999 * 640
        assert!(svg.contains(r#"x1="346.7""#), "{}", &svg[..400]);
        assert!(svg.contains("t=5000"));
    }

    #[test]
    fn histogram_panels() {
        let rows: Vec<TrainRow> = [0.25, 0.75]
            .iter()
            .flat_map(|&p| {
                [30.0, 60.0, 90.0].into_iter().flat_map(move |d| {
                    (1..=5).map(move |size| TrainRow {
                        scenario: Scenario::Collective,
                        p_mav: p,
                        density: d,
                        seed: 1,
                        size,
                        count: 10 * size as u64,
                    })
                })
            })
            .collect();
        let svg = train_histograms(&rows);
        assert_eq!(svg.matches("veh/km/lane</text>").count(), 6);
        assert!(!svg.contains("no data"));
    }
}
