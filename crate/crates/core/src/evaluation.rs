//! Per-example scoring, ROC sweeps and report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{KwsError, Result};
use crate::features::FeatureExtractor;
use crate::models::{baseline_score, Model, ModelKind, CONFIDENCE_WINDOW, SMOOTH_WINDOW};
use crate::streaming::DecoderState;
use crate::training::{Dataset, Example, Label, Manifest};

#[derive(Clone, Debug, PartialEq)]
pub struct ExampleScore {
    pub id: String,
    pub label: Label,
    pub score: f64,
    pub duration_s: f64,
    /// Too short for a full window; scored 0.
    pub short: bool,
}

/// Max detection score of one example. Attention models stream it through
/// a fresh decoder; the baseline uses smoothed-posterior confidence.
pub fn score_example(model: &Model<f32>, ex: &Example, window: usize) -> Result<ExampleScore> {
    let x = ex.features.tensor();
    let (score, short) = match model.config().kind {
        ModelKind::AttentionE2e => {
            let mut dec = DecoderState::new(model, window)?;
            let mut best: Option<f64> = None;
            for t in 0..x.rows() {
                if let Some(p) = dec.push_frame(model, x.row(t))? {
                    best = Some(best.map_or(p as f64, |b| b.max(p as f64)));
                }
            }
            (best.unwrap_or(0.0), best.is_none())
        }
        ModelKind::DeepKws => (
            baseline_score(&model.frame_posteriors(x)?, SMOOTH_WINDOW, CONFIDENCE_WINDOW)?,
            false,
        ),
    };
    Ok(ExampleScore {
        id: ex.id.clone(),
        label: ex.label,
        score: score.clamp(0.0, 1.0),
        duration_s: ex.duration_s,
        short,
    })
}

#[derive(Clone, Debug, Default)]
pub struct ScoredSet {
    pub scores: Vec<ExampleScore>,
    /// Entries that could not be read, with the reason.
    pub excluded: Vec<(PathBuf, String)>,
}

impl ScoredSet {
    pub fn negative_hours(&self) -> f64 {
        negative_hours(&self.scores)
    }
}

pub fn negative_hours(scores: &[ExampleScore]) -> f64 {
    scores
        .iter()
        .filter(|s| s.label == Label::Negative)
        .map(|s| s.duration_s)
        .sum::<f64>()
        / 3600.0
}

pub fn score_dataset(model: &Model<f32>, ds: &Dataset, window: usize) -> Result<Vec<ExampleScore>> {
    if ds.is_empty() {
        return Err(KwsError::Data("nothing to score: empty dataset".into()));
    }
    let scores = ds
        .examples
        .par_iter()
        .map(|ex| score_example(model, ex, window))
        .collect::<Result<Vec<_>>>()?;
    let short = scores.iter().filter(|s| s.short).count();
    if short > 0 {
        log::warn!("{short} examples are shorter than the {window}-frame window and score 0");
    }
    Ok(scores)
}

/// Featurizes and scores every manifest entry; unreadable audio is
/// excluded with a warning.
pub fn score_manifest(model: &Model<f32>, m: &Manifest, fx: &FeatureExtractor, window: usize) -> Result<ScoredSet> {
    if m.is_empty() {
        return Err(KwsError::Data("nothing to score: empty manifest".into()));
    }
    let per: Vec<std::result::Result<Example, (PathBuf, String)>> = m
        .entries
        .par_iter()
        .map(|e| Example::from_entry(e, fx).map_err(|err| (e.path.clone(), err.to_string())))
        .collect();
    let mut examples = Vec::new();
    let mut excluded = Vec::new();
    for r in per {
        match r {
            Ok(ex) => examples.push(ex),
            Err((p, why)) => {
                log::warn!("excluding {}: {why}", p.display());
                excluded.push((p, why));
            }
        }
    }
    let scores = score_dataset(model, &Dataset::new(examples), window)?;
    Ok(ScoredSet { scores, excluded })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Share of positives scoring below the threshold.
    pub frr: f64,
    /// Negatives scoring at or above the threshold per hour of negative audio.
    pub fa_per_hour: f64,
}

/// Step-function ROC over the distinct scores plus thresholds 0 and 1,
/// in increasing threshold order.
pub fn roc(scores: &[ExampleScore], neg_hours: f64) -> Result<Vec<RocPoint>> {
    if !(neg_hours > 0.0 && neg_hours.is_finite()) {
        return Err(KwsError::Data(format!(
            "negative audio duration must be positive, got {neg_hours} h"
        )));
    }
    let mut pos: Vec<f64> = scores
        .iter()
        .filter(|s| s.label == Label::Positive)
        .map(|s| s.score)
        .collect();
    let mut neg: Vec<f64> = scores
        .iter()
        .filter(|s| s.label == Label::Negative)
        .map(|s| s.score)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(KwsError::Data(format!(
            "ROC needs both classes, got {} positives and {} negatives",
            pos.len(),
            neg.len()
        )));
    }
    if scores.iter().any(|s| !s.score.is_finite()) {
        return Err(KwsError::NonFinite("example scores".into()));
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().chain([0.0, 1.0]).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    Ok(thresholds
        .into_iter()
        .map(|t| RocPoint {
            threshold: t,
            frr: pos.partition_point(|&s| s < t) as f64 / pos.len() as f64,
            fa_per_hour: (neg.len() - neg.partition_point(|&s| s < t)) as f64 / neg_hours,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub point: RocPoint,
    /// No point met the FA target; this is the largest threshold instead.
    pub fallback: bool,
}

impl OperatingPoint {
    pub fn frr(&self) -> f64 {
        self.point.frr
    }
}

/// Lowest FRR among points with FA/hour at most `target_fa`.
pub fn frr_at_fa(curve: &[RocPoint], target_fa: f64) -> Result<OperatingPoint> {
    let best = curve
        .iter()
        .filter(|p| p.fa_per_hour <= target_fa)
        .min_by(|a, b| a.frr.total_cmp(&b.frr).then(a.threshold.total_cmp(&b.threshold)));
    if let Some(p) = best {
        return Ok(OperatingPoint {
            point: *p,
            fallback: false,
        });
    }
    let last = curve
        .iter()
        .max_by(|a, b| a.threshold.total_cmp(&b.threshold))
        .ok_or_else(|| KwsError::Data("empty ROC curve".into()))?;
    log::warn!(
        "no operating point reaches {target_fa} FA/hour; using the largest threshold {} ({} FA/hour)",
        last.threshold,
        last.fa_per_hour
    );
    Ok(OperatingPoint {
        point: *last,
        fallback: true,
    })
}

/// A named curve in a report.
#[derive(Clone, Debug, PartialEq)]
pub struct RocSeries {
    pub name: String,
    pub points: Vec<RocPoint>,
}

pub const ROC_HEADER: &str = "threshold,frr,fa_per_hour";
pub const ROC_SERIES_HEADER: &str = "series,threshold,frr,fa_per_hour";

/// CSV text. A single series uses the three-column layout; several series
/// get a leading `series` column.
pub fn roc_csv(series: &[RocSeries]) -> String {
    let multi = series.len() > 1;
    let mut s = String::from(if multi { ROC_SERIES_HEADER } else { ROC_HEADER });
    s.push('\n');
    for ser in series {
        for p in &ser.points {
            if multi {
                let _ = write!(s, "{},", ser.name.replace([',', '\n'], "_"));
            }
            let _ = writeln!(s, "{},{},{}", p.threshold, p.frr, p.fa_per_hour);
        }
    }
    s
}

/// Parses either CSV layout written by [`roc_csv`]. A three-column file
/// yields one series named `default_name`.
pub fn parse_roc_csv(text: &str, default_name: &str) -> Result<Vec<RocSeries>> {
    let bad = |line: usize, m: String| KwsError::format("ROC CSV", format!("line {line}: {m}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let multi = match header.trim() {
        ROC_HEADER => false,
        ROC_SERIES_HEADER => true,
        h => return Err(bad(1, format!("unexpected header {h:?}"))),
    };
    let mut out: Vec<RocSeries> = Vec::new();
    for (i, line) in lines {
        let cols: Vec<&str> = line.trim().split(',').collect();
        let want = if multi { 4 } else { 3 };
        if cols.len() != want {
            return Err(bad(i + 1, format!("expected {want} columns, found {}", cols.len())));
        }
        let (name, nums) = if multi {
            (cols[0], &cols[1..])
        } else {
            (default_name, &cols[..])
        };
        if name.is_empty() {
            return Err(bad(i + 1, "empty series name".into()));
        }
        let v = nums
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| bad(i + 1, format!("not a number: {c:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if v.iter().any(|x| !x.is_finite()) || !(0.0..=1.0).contains(&v[1]) || v[2] < 0.0 {
            return Err(bad(i + 1, format!("value out of range: {line:?}")));
        }
        let p = RocPoint {
            threshold: v[0],
            frr: v[1],
            fa_per_hour: v[2],
        };
        match out.last_mut() {
            Some(s) if s.name == name => s.points.push(p),
            _ => {
                if out.iter().any(|s| s.name == name) {
                    return Err(bad(i + 1, format!("series {name:?} is not contiguous")));
                }
                out.push(RocSeries {
                    name: name.to_string(),
                    points: vec![p],
                });
            }
        }
    }
    if out.is_empty() {
        return Err(bad(1, "no data rows".into()));
    }
    Ok(out)
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN: f64 = 60.0;
/// FA/hour range of the plot.
pub const PLOT_MAX_FA: f64 = 2.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line plot with FA/hour on x (0 to 2) and FRR in percent on y, one
/// polyline per series.
pub fn roc_svg(series: &[RocSeries]) -> String {
    let visible = |p: &&RocPoint| p.fa_per_hour <= PLOT_MAX_FA;
    let peak = series
        .iter()
        .flat_map(|s| s.points.iter().filter(visible))
        .map(|p| p.frr * 100.0)
        .fold(0.0, f64::max);
    let y_max = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
        .into_iter()
        .find(|&m| peak <= m)
        .unwrap_or(100.0);
    let (pw, ph) = (SVG_W - 2.0 * MARGIN, SVG_H - 2.0 * MARGIN);
    let x = |fa: f64| MARGIN + fa / PLOT_MAX_FA * pw;
    let y = |frr: f64| MARGIN + ph - (frr * 100.0 / y_max) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for k in 0..=4 {
        let fa = PLOT_MAX_FA * k as f64 / 4.0;
        let frr = y_max / 100.0 * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#ddd"/><text x="{0:.1}" y="{3:.1}" font-size="12" text-anchor="middle">{fa}</text>"##,
            x(fa),
            MARGIN,
            MARGIN + ph,
            MARGIN + ph + 18.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{1:.1}" y1="{0:.1}" x2="{2:.1}" y2="{0:.1}" stroke="#ddd"/><text x="{3:.1}" y="{4:.1}" font-size="12" text-anchor="end">{5}</text>"##,
            y(frr),
            MARGIN,
            MARGIN + pw,
            MARGIN - 6.0,
            y(frr) + 4.0,
            frr * 100.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">False alarms per hour</text>"#,
        MARGIN + pw / 2.0,
        SVG_H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0:.1}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {0:.1})">False rejection rate (%)</text>"#,
        MARGIN + ph / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<&RocPoint> = ser.points.iter().filter(visible).collect();
        pts.sort_by(|a, b| a.fa_per_hour.total_cmp(&b.fa_per_hour).then(b.frr.total_cmp(&a.frr)));
        let coords: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.fa_per_hour), y(p.frr.min(y_max / 100.0))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-series="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            xml_escape(&ser.name),
            coords.join(" ")
        );
        let ly = MARGIN + 18.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" font-size="12" fill="{color}" text-anchor="end">{}</text>"#,
            MARGIN + pw - 8.0,
            xml_escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<prefix>.csv` and `<prefix>.svg`; returns both paths.
pub fn emit_report(series: &[RocSeries], prefix: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(KwsError::Data("report needs at least one non-empty curve".into()));
    }
    let prefix = prefix.as_ref();
    let with_ext = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    let (csv, svg) = (with_ext(".csv"), with_ext(".svg"));
    std::fs::write(&csv, roc_csv(series)).map_err(|e| KwsError::io(&csv, e))?;
    std::fs::write(&svg, roc_svg(series)).map_err(|e| KwsError::io(&svg, e))?;
    Ok((csv, svg))
}

pub const SCORES_HEADER: &str = "id,label,score,duration_s,short";

/// Per-example scores as CSV, so curves can be rebuilt without rescoring.
pub fn scores_csv(scores: &[ExampleScore]) -> String {
    let mut s = String::from(SCORES_HEADER);
    s.push('\n');
    for e in scores {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            e.id.replace([',', '\n'], "_"),
            e.label,
            e.score,
            e.duration_s,
            e.short as u8
        );
    }
    s
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<ExampleScore>> {
    let bad = |line: usize, m: String| KwsError::format("scores CSV", format!("line {line}: {m}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == SCORES_HEADER => {}
        _ => return Err(bad(1, format!("expected header {SCORES_HEADER:?}"))),
    }
    lines
        .map(|(i, line)| {
            let c: Vec<&str> = line.trim().split(',').collect();
            if c.len() != 5 {
                return Err(bad(i + 1, format!("expected 5 columns, found {}", c.len())));
            }
            let label = match c[1] {
                "positive" => Label::Positive,
                "negative" => Label::Negative,
                l => return Err(bad(i + 1, format!("unknown label {l:?}"))),
            };
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, format!("not a number: {s:?}")));
            let (score, duration_s) = (num(c[2])?, num(c[3])?);
            if !(0.0..=1.0).contains(&score) || !(duration_s >= 0.0 && duration_s.is_finite()) {
                return Err(bad(i + 1, "score or duration out of range".into()));
            }
            Ok(ExampleScore {
                id: c[0].to_string(),
                label,
                score,
                duration_s,
                short: c[4] == "1",
            })
        })
        .collect()
}
