use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;

use super::svg::{escape, nice_max, Frame, Svg, PALETTE};
use super::{Artifact, Condition};
use crate::analysis::{ConditionRegression, ConditionSpec};
use crate::metrics::{ClosedStationReport, MaapeSeries};
use crate::runner::{ForecastLog, TimingReport};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const Z95: f64 = 1.959_963_984_540_054;

fn csv_line(fields: &[String]) -> String {
    let mut s = fields
        .iter()
        .map(|f| if f.contains([',', '"', '\n']) { format!("\"{}\"", f.replace('"', "\"\"")) } else { f.clone() })
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    s
}

struct DateAxis {
    first: NaiveDate,
    days: f64,
}

impl DateAxis {
    fn new(dates: impl Iterator<Item = NaiveDate>) -> Option<Self> {
        let (mut lo, mut hi) = (None::<NaiveDate>, None::<NaiveDate>);
        for d in dates {
            lo = Some(lo.map_or(d, |l| l.min(d)));
            hi = Some(hi.map_or(d, |h| h.max(d)));
        }
        let (lo, hi) = (lo?, hi?);
        Some(Self {
            first: lo,
            days: ((hi - lo).num_days() as f64).max(1.0),
        })
    }

    fn x(&self, f: &Frame, d: NaiveDate) -> f64 {
        f.left + f.width * ((d - self.first).num_days() as f64 / self.days).clamp(0.0, 1.0)
    }

    fn ticks(&self, svg: &mut Svg, f: &Frame, n: usize) {
        for i in 0..=n {
            let d = self.first + chrono::Days::new((self.days * i as f64 / n as f64).round() as u64);
            let x = self.x(f, d);
            svg.line(x, f.top + f.height, x, f.top + f.height + 4.0, "#333", "xtick");
            svg.text(x, f.top + f.height + 18.0, "middle", 11, "tick", &d.format("%Y-%m-%d").to_string());
        }
    }
}

/// Trailing 7-day MAAPE, one line per experiment, condition ranges shaded.
pub fn render_evolution(series: &[MaapeSeries], conditions: &ConditionSpec, title: &str) -> Artifact {
    let mut csv = String::from("experiment,date,rolling7\n");
    for s in series {
        for (d, r) in s.dates.iter().zip(&s.rolling7) {
            if let Some(v) = r {
                csv.push_str(&csv_line(&[s.experiment.clone(), d.to_string(), v.to_string()]));
            }
        }
    }
    let mut svg = Svg::new(WIDTH, HEIGHT);
    svg.text(WIDTH / 2.0, 24.0, "middle", 15, "title", title);
    let max = series.iter().flat_map(|s| s.rolling7.iter().flatten()).fold(0.0f64, |a, &b| a.max(b));
    let frame = Frame {
        left: 70.0,
        top: 40.0,
        width: WIDTH - 300.0,
        height: HEIGHT - 100.0,
        y_min: 0.0,
        y_max: nice_max(max, 0.1),
    };
    let axis = DateAxis::new(series.iter().flat_map(|s| s.dates.iter().copied()));
    if let Some(axis) = &axis {
        for (name, ranges, fill) in [("covid", &conditions.covid, "#fbe3d6"), ("protest", &conditions.protest, "#dbe8f6")] {
            for r in ranges {
                let (a, b) = (axis.x(&frame, r.start), axis.x(&frame, r.end));
                if b > a {
                    svg.raw(&format!(
                        r#"<rect class="condition" data-condition="{name}" x="{a:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                        frame.top,
                        b - a,
                        frame.height
                    ));
                }
            }
        }
    }
    svg.axes(&frame, 5, "rolling 7-day MAAPE");
    let mut legend = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        legend.push((s.experiment.clone(), color));
        let Some(axis) = &axis else { continue };
        let mut pts = String::new();
        for (d, r) in s.dates.iter().zip(&s.rolling7) {
            if let Some(v) = r {
                let _ = write!(pts, "{:.3},{:.3} ", axis.x(&frame, *d), frame.y(*v));
            }
        }
        svg.raw(&format!(
            r#"<polyline class="series" data-experiment="{}" data-y-min="{}" data-y-max="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&s.experiment),
            frame.y_min,
            frame.y_max,
            pts.trim_end()
        ));
    }
    if let Some(axis) = &axis {
        axis.ticks(&mut svg, &frame, 5);
    }
    svg.legend(frame.left + frame.width + 20.0, frame.top + 10.0, &legend);
    Artifact {
        stem: "evolution".into(),
        svg: svg.finish(),
        csv,
    }
}

struct Bar {
    experiment: String,
    group: String,
    value: f64,
    whisker: Option<(f64, f64)>,
}

fn bar_panel(svg: &mut Svg, frame: Frame, bars: &[Bar], experiments: &[String], y_label: &str) {
    svg.axes(&frame, 5, y_label);
    if frame.y_min < 0.0 {
        let y0 = frame.y(0.0);
        svg.line(frame.left, y0, frame.left + frame.width, y0, "#333", "zero");
    }
    let mut groups: Vec<&str> = Vec::new();
    for b in bars {
        if !groups.contains(&b.group.as_str()) {
            groups.push(&b.group);
        }
    }
    let slot = frame.width / groups.len().max(1) as f64;
    let bar_w = (slot * 0.8 / experiments.len().max(1) as f64).min(40.0);
    for (g, group) in groups.iter().enumerate() {
        let cx = frame.left + slot * (g as f64 + 0.5);
        svg.text(cx, frame.top + frame.height + 18.0, "middle", 11, "group", group);
        let start = cx - bar_w * experiments.len() as f64 / 2.0;
        for b in bars.iter().filter(|b| b.group == *group) {
            let k = experiments.iter().position(|e| *e == b.experiment).unwrap_or(0);
            let x = start + bar_w * k as f64;
            let (y0, y1) = (frame.y(0.0), frame.y(b.value));
            svg.raw(&format!(
                r#"<rect class="bar" data-experiment="{}" data-group="{}" data-value="{}" x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                escape(&b.experiment),
                escape(&b.group),
                b.value,
                y0.min(y1),
                bar_w * 0.9,
                (y1 - y0).abs(),
                PALETTE[k % PALETTE.len()]
            ));
            if let Some((lo, hi)) = b.whisker {
                let wx = x + bar_w * 0.45;
                svg.raw(&format!(
                    r##"<line class="whisker" data-experiment="{}" data-group="{}" data-lower="{lo}" data-upper="{hi}" x1="{wx:.2}" y1="{:.2}" x2="{wx:.2}" y2="{:.2}" stroke="#000"/>"##,
                    escape(&b.experiment),
                    escape(&b.group),
                    frame.y(lo),
                    frame.y(hi)
                ));
            }
        }
    }
}

fn bar_range(bars: &[Bar]) -> (f64, f64) {
    let lo = bars.iter().map(|b| b.whisker.map_or(b.value, |w| w.0).min(b.value)).fold(0.0f64, f64::min);
    let hi = bars.iter().map(|b| b.whisker.map_or(b.value, |w| w.1).max(b.value)).fold(0.0f64, f64::max);
    let y_max = nice_max(hi, 0.01);
    let y_min = if lo < 0.0 { -nice_max(-lo, 0.01) } else { 0.0 };
    (y_min, y_max)
}

/// Condition effects with 95% intervals, grouped by condition.
pub fn render_condition_bars(fits: &[ConditionRegression], conditions: &[Condition], title: &str) -> Artifact {
    let mut csv = String::from("experiment,condition,term,estimate,std_error,half_width,lower,upper\n");
    let mut bars = Vec::new();
    for c in conditions {
        for f in fits {
            let Some(coef) = f.coefficient(c.term()) else { continue };
            let half = Z95 * coef.std_error;
            let (lo, hi) = (coef.estimate - half, coef.estimate + half);
            csv.push_str(&csv_line(&[
                f.experiment.clone(),
                c.as_str().into(),
                c.term().into(),
                coef.estimate.to_string(),
                coef.std_error.to_string(),
                half.to_string(),
                lo.to_string(),
                hi.to_string(),
            ]));
            bars.push(Bar {
                experiment: f.experiment.clone(),
                group: c.as_str().into(),
                value: coef.estimate,
                whisker: Some((lo, hi)),
            });
        }
    }
    let experiments: Vec<String> = fits.iter().map(|f| f.experiment.clone()).collect();
    let (y_min, y_max) = bar_range(&bars);
    let mut svg = Svg::new(WIDTH, HEIGHT);
    svg.text(WIDTH / 2.0, 24.0, "middle", 15, "title", title);
    let frame = Frame {
        left: 70.0,
        top: 40.0,
        width: WIDTH - 300.0,
        height: HEIGHT - 100.0,
        y_min,
        y_max,
    };
    bar_panel(&mut svg, frame, &bars, &experiments, "MAAPE (95% CI)");
    let legend: Vec<(String, &str)> =
        experiments.iter().enumerate().map(|(i, e)| (e.clone(), PALETTE[i % PALETTE.len()])).collect();
    svg.legend(frame.left + frame.width + 20.0, frame.top + 10.0, &legend);
    Artifact {
        stem: "conditions".into(),
        svg: svg.finish(),
        csv,
    }
}

/// Baseline training time and mean per-origin simulation time per experiment.
pub fn render_timing(timings: &[TimingReport]) -> Artifact {
    let mut csv = String::from(
        "experiment,models,baseline_seconds,baseline_seconds_per_model,update_seconds_mean,update_samples,simulate_seconds_mean,simulate_samples\n",
    );
    for t in timings {
        csv.push_str(&csv_line(&[
            t.experiment.clone(),
            t.models.to_string(),
            t.baseline_seconds.to_string(),
            t.baseline_seconds_per_model.to_string(),
            t.update_seconds_mean.to_string(),
            t.update_samples.to_string(),
            t.simulate_seconds_mean.to_string(),
            t.simulate_samples.to_string(),
        ]));
    }
    let experiments: Vec<String> = timings.iter().map(|t| t.experiment.clone()).collect();
    let mut svg = Svg::new(WIDTH, HEIGHT);
    svg.text(WIDTH / 2.0, 24.0, "middle", 15, "title", "Training and simulation running times");
    let panel_w = (WIDTH - 330.0) / 2.0;
    for (p, (label, pick)) in [
        ("training", (|t: &TimingReport| t.baseline_seconds) as fn(&TimingReport) -> f64),
        ("simulation", |t: &TimingReport| t.simulate_seconds_mean),
    ]
    .into_iter()
    .enumerate()
    {
        let bars: Vec<Bar> = timings
            .iter()
            .map(|t| Bar {
                experiment: t.experiment.clone(),
                group: label.into(),
                value: pick(t),
                whisker: None,
            })
            .collect();
        let (_, y_max) = bar_range(&bars);
        let frame = Frame {
            left: 70.0 + p as f64 * (panel_w + 50.0),
            top: 40.0,
            width: panel_w,
            height: HEIGHT - 100.0,
            y_min: 0.0,
            y_max: y_max.max(1e-3),
        };
        bar_panel(&mut svg, frame, &bars, &experiments, "seconds");
    }
    let legend: Vec<(String, &str)> =
        experiments.iter().enumerate().map(|(i, e)| (e.clone(), PALETTE[i % PALETTE.len()])).collect();
    svg.legend(WIDTH - 220.0, 50.0, &legend);
    Artifact {
        stem: "timing".into(),
        svg: svg.finish(),
        csv,
    }
}

/// Next-day forecasts against truth for every station with closed days,
/// one small panel per station; closed days are marked.
pub fn render_closed_stations(log: &ForecastLog, closed: &ClosedStationReport) -> Artifact {
    let mut closed_days: BTreeMap<&str, Vec<NaiveDate>> = BTreeMap::new();
    for c in &closed.cells {
        closed_days.entry(c.station.as_str()).or_default().push(c.date);
    }
    let mut csv = String::from("station,date,truth,pred,closed\n");
    let mut panels: Vec<(&str, Vec<(NaiveDate, f64, f64, bool)>)> = Vec::new();
    for (station, days) in &closed_days {
        let Some(s) = log.stations.iter().position(|n| n == station) else { continue };
        let mut rows: Vec<(NaiveDate, f64, f64, bool)> = log
            .records
            .iter()
            .filter(|r| r.station == s && r.horizon == 1)
            .map(|r| (r.origin, r.truth, r.pred, days.contains(&r.origin)))
            .collect();
        rows.sort_by_key(|r| r.0);
        for r in &rows {
            csv.push_str(&csv_line(&[station.to_string(), r.0.to_string(), r.1.to_string(), r.2.to_string(), r.3.to_string()]));
        }
        panels.push((station, rows));
    }
    let cols = 3usize;
    let rows_n = panels.len().div_ceil(cols).max(1);
    let (pw, ph) = (300.0, 180.0);
    let mut svg = Svg::new(cols as f64 * pw + 40.0, rows_n as f64 * ph + 60.0);
    svg.text((cols as f64 * pw + 40.0) / 2.0, 24.0, "middle", 15, "title", &format!("{}: closed-station forecasts", log.experiment));
    if panels.is_empty() {
        svg.text(40.0, 70.0, "start", 12, "note", "no station recorded a zero-transaction day");
    }
    for (i, (station, rows)) in panels.iter().enumerate() {
        let (gx, gy) = ((i % cols) as f64 * pw + 40.0, (i / cols) as f64 * ph + 50.0);
        let max = rows.iter().map(|r| r.1.max(r.2)).fold(0.0f64, f64::max);
        let frame = Frame {
            left: gx + 20.0,
            top: gy + 20.0,
            width: pw - 50.0,
            height: ph - 60.0,
            y_min: 0.0,
            y_max: nice_max(max, 1.0),
        };
        svg.text(frame.left, gy + 12.0, "start", 12, "panel-title", station);
        svg.axes(&frame, 2, "");
        let n = rows.len();
        for (label, color, pick) in [
            ("truth", "#7f7f7f", (|r: &(NaiveDate, f64, f64, bool)| r.1) as fn(&(NaiveDate, f64, f64, bool)) -> f64),
            ("pred", "#d62728", |r| r.2),
        ] {
            let pts: Vec<String> =
                rows.iter().enumerate().map(|(k, r)| format!("{:.3},{:.3}", frame.x(k, n), frame.y(pick(r)))).collect();
            svg.raw(&format!(
                r#"<polyline class="{label}" data-station="{}" fill="none" stroke="{color}" points="{}"/>"#,
                escape(station),
                pts.join(" ")
            ));
        }
        for (k, r) in rows.iter().enumerate().filter(|(_, r)| r.3) {
            svg.raw(&format!(
                r##"<circle class="closed" data-station="{}" data-date="{}" data-pred="{}" cx="{:.3}" cy="{:.3}" r="2.5" fill="#000"/>"##,
                escape(station),
                r.0,
                r.2,
                frame.x(k, n),
                frame.y(r.2)
            ));
        }
    }
    Artifact {
        stem: "closed_stations".into(),
        svg: svg.finish(),
        csv,
    }
}
