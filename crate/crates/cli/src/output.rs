//! Aggregated summaries and their CSV, JSON and SVG renderings.

use std::fmt::Write as _;

use serde_json::{json, Value};
use tb_core::harness::{summarize, AggregateRow, Band, Trace};

use crate::error::{CliError, CliResult};

pub const SUMMARY_HEADER: &str = "t,curve,mean,min,max";

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub t: usize,
    pub curve: String,
    pub band: Band,
}

pub fn curve_points(rows: &[AggregateRow]) -> Vec<CurvePoint> {
    let mut out = Vec::with_capacity(rows.len() * 2);
    for curve in ["regret", "movement"] {
        for r in rows {
            let band = if curve == "regret" {
                r.regret
            } else {
                r.movement
            };
            out.push(CurvePoint {
                t: r.t,
                curve: curve.to_string(),
                band,
            });
        }
    }
    out
}

pub fn summary_csv(points: &[CurvePoint]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for p in points {
        writeln!(
            s,
            "{},{},{:?},{:?},{:?}",
            p.t, p.curve, p.band.mean, p.band.min, p.band.max
        )
        .unwrap();
    }
    s
}

pub fn parse_summary_csv(text: &str) -> CliResult<Vec<CurvePoint>> {
    let bad = |line: usize, msg: &str| CliError::Runtime(format!("summary.csv line {line}: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad(i + 2, "expected 5 columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 2, "bad number"));
            Ok(CurvePoint {
                t: cols[0].parse().map_err(|_| bad(i + 2, "bad step"))?,
                curve: cols[1].to_string(),
                band: Band {
                    mean: num(cols[2])?,
                    min: num(cols[3])?,
                    max: num(cols[4])?,
                },
            })
        })
        .collect()
}

/// Per-seed totals plus the final band of each curve.
pub fn summary_json(label: &str, traces: &[Trace], rows: &[AggregateRow]) -> CliResult<Value> {
    let mut per_seed = Vec::with_capacity(traces.len());
    for tr in traces {
        let s = summarize(tr, tr.horizon())?;
        per_seed.push(json!({
            "seed": tr.seed,
            "fingerprint": tr.fingerprint,
            "horizon": tr.horizon(),
            "batches": tr.batches.len(),
            "cumulative_regret": s.cumulative_regret,
            "cumulative_move": s.cumulative_move,
            "cumulative_loss": s.cumulative_loss,
            "avg_regret_last_half": s.avg_regret_last_half,
            "avg_move_last_half": s.avg_move_last_half,
        }));
    }
    let band = |b: Band| json!({ "mean": b.mean, "min": b.min, "max": b.max });
    let last = rows.last();
    Ok(json!({
        "label": label,
        "replications": traces.len(),
        "final_regret_last_half": last.map(|r| band(r.regret)),
        "final_move_last_half": last.map(|r| band(r.movement)),
        "seeds": per_seed,
    }))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

/// Mean line over a shaded min/max band, one curve per plot.
pub fn curve_svg(title: &str, points: &[CurvePoint]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(s, "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>", WIDTH / 2.0, escape(title)).unwrap();
    if points.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let t_max = points.iter().map(|p| p.t).max().unwrap_or(1).max(2) as f64;
    let t_min = points.iter().map(|p| p.t).min().unwrap_or(1) as f64;
    let y_lo = points
        .iter()
        .map(|p| p.band.min)
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let mut y_hi = points
        .iter()
        .map(|p| p.band.max)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(y_hi > y_lo) {
        y_hi = y_lo + 1.0;
    }
    let px =
        |t: usize| MARGIN + (t as f64 - t_min) / (t_max - t_min).max(1.0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut band = String::new();
    for p in points {
        write!(band, "{:.2},{:.2} ", px(p.t), py(p.band.max)).unwrap();
    }
    for p in points.iter().rev() {
        write!(band, "{:.2},{:.2} ", px(p.t), py(p.band.min)).unwrap();
    }
    writeln!(
        s,
        "<polygon points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>",
        band.trim_end()
    )
    .unwrap();
    let line: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", px(p.t), py(p.band.mean)))
        .collect();
    writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\"/>",
        line.join(" ")
    )
    .unwrap();

    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>"
    )
    .unwrap();
    writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    )
    .unwrap();
    let label = "font-family=\"sans-serif\" font-size=\"11\"";
    writeln!(
        s,
        "<text x=\"{x0}\" y=\"{}\" {label}>{}</text>",
        y0 + 16.0,
        t_min
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{x1}\" y=\"{}\" {label} text-anchor=\"end\">{}</text>",
        y0 + 16.0,
        t_max
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"{y0}\" {label} text-anchor=\"end\">{:.3}</text>",
        x0 - 4.0,
        y_lo
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {label} text-anchor=\"end\">{:.3}</text>",
        x0 - 4.0,
        y1 + 4.0,
        y_hi
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {label} text-anchor=\"middle\">t</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Plot of one named curve taken from `summary.csv` rows.
pub fn svg_for_curve(curve: &str, points: &[CurvePoint]) -> String {
    let selected: Vec<CurvePoint> = points
        .iter()
        .filter(|p| p.curve == curve)
        .cloned()
        .collect();
    let title = match curve {
        "regret" => "average regret over the last half",
        "movement" => "average movement cost over the last half",
        other => other,
    };
    curve_svg(title, &selected)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<CurvePoint> {
        (1..=4)
            .flat_map(|t| {
                let v = 1.0 / t as f64;
                [
                    CurvePoint {
                        t,
                        curve: "regret".into(),
                        band: Band {
                            mean: v,
                            min: v / 2.0,
                            max: v * 2.0,
                        },
                    },
                    CurvePoint {
                        t,
                        curve: "movement".into(),
                        band: Band {
                            mean: 0.1,
                            min: 0.0,
                            max: 0.3,
                        },
                    },
                ]
            })
            .collect()
    }

    #[test]
    fn csv_round_trips_exactly() {
        let pts = sample();
        assert_eq!(parse_summary_csv(&summary_csv(&pts)).unwrap(), pts);
    }

    #[test]
    fn svg_is_regenerable_from_csv() {
        let pts = sample();
        let again = parse_summary_csv(&summary_csv(&pts)).unwrap();
        assert_eq!(
            svg_for_curve("regret", &pts),
            svg_for_curve("regret", &again)
        );
        assert!(svg_for_curve("movement", &pts).contains("<polyline"));
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(parse_summary_csv("t,curve\n").is_err());
        assert!(parse_summary_csv(&format!("{SUMMARY_HEADER}\n1,regret,x,0,0\n")).is_err());
    }
}
