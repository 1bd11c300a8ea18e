//! Aggregate tables and efficiency figures from the results CSV.
//!
//! All arithmetic is exact over rationals; rounding happens only when
//! rendering, half-up: percentages to one decimal, tokens to integers,
//! efficiency to three decimals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use thiserror::Error;
use toonbench_core::cases::CASE_NAMES;
use toonbench_core::Track;

use crate::harness::{compute_run_metrics, read_rows_from, CaseRow, MetricsError};

pub type Q = Ratio<u128>;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed results CSV {}: {message}", path.display())]
    Schema { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model `{model}` run {run_index}: {source}")]
    Run {
        model: String,
        run_index: u32,
        #[source]
        source: MetricsError,
    },
    #[error("no results for case `{case}` in group `{group}`")]
    EmptyGroup { group: String, case: String },
    #[error("results CSV has no rows")]
    Empty,
}

pub fn read_results(path: &Path) -> Result<Vec<CaseRow>, ReportError> {
    let file = fs::File::open(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_rows_from(file).map_err(|e| ReportError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// A named subset of cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub name: String,
    pub label: String,
    pub cases: Vec<String>,
}

impl Group {
    pub fn new(name: &str, label: &str, cases: &[&str]) -> Group {
        Group {
            name: name.into(),
            label: label.into(),
            cases: cases.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportOptions {
    /// Rows of the scenario-group accuracy table.
    pub scenario_groups: Vec<Group>,
    /// One efficiency figure per group.
    pub efficiency_groups: Vec<Group>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            scenario_groups: vec![
                Group::new("aligned", "TOON-aligned", &["users", "order", "invoice"]),
                Group::new("non_aligned", "Non-aligned", &["company"]),
            ],
            efficiency_groups: vec![
                Group::new("aligned", "aligned cases", &["users", "order"]),
                Group::new("non_aligned", "non-aligned cases", &["invoice", "company"]),
            ],
        }
    }
}

/// Accuracies as fractions, tokens as a mean count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub one_shot: Q,
    pub final_: Q,
    pub tokens: Q,
}

pub type TrackCells = BTreeMap<Track, Cell>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EfficiencyPoint {
    pub model: String,
    pub group: String,
    pub track: Track,
    pub accuracy: Q,
    pub tokens: Q,
    pub efficiency: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub tracks: Vec<Track>,
    pub by_model: Vec<(String, TrackCells)>,
    pub by_case: Vec<(String, TrackCells)>,
    pub groups: Vec<(Group, TrackCells)>,
    pub efficiency_groups: Vec<Group>,
    pub efficiency: Vec<EfficiencyPoint>,
}

fn q(n: u64) -> Q {
    Q::from_integer(n.into())
}

fn mean(values: impl IntoIterator<Item = Q>) -> Q {
    let (sum, n) = values.into_iter().fold((q(0), 0u64), |(s, n), v| (s + v, n + 1));
    assert!(n > 0, "mean of nothing");
    sum / q(n)
}

/// Cases in the built-in order, then any others by name.
fn case_order(rows: &[CaseRow]) -> Vec<String> {
    let present: BTreeSet<&str> = rows.iter().map(|r| r.case.as_str()).collect();
    let mut out: Vec<String> = CASE_NAMES.iter().filter(|c| present.contains(*c)).map(|c| c.to_string()).collect();
    out.extend(present.iter().filter(|c| !CASE_NAMES.contains(c)).map(|c| c.to_string()));
    out
}

fn tracks_of(rows: &[CaseRow]) -> Vec<Track> {
    rows.iter().map(|r| r.track).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Per model: run metrics averaged over the model's runs. Models sorted by
/// name.
pub fn aggregate_by_model(rows: &[CaseRow]) -> Result<Vec<(String, TrackCells)>, ReportError> {
    let cases = case_order(rows);
    let mut runs: BTreeMap<&str, BTreeMap<u32, Vec<CaseRow>>> = BTreeMap::new();
    for r in rows {
        runs.entry(&r.model).or_default().entry(r.run_index).or_default().push(r.clone());
    }
    let mut out = Vec::new();
    for (model, runs) in runs {
        let mut per_track: BTreeMap<Track, Vec<Cell>> = BTreeMap::new();
        for (run_index, run_rows) in runs {
            let metrics = compute_run_metrics(&run_rows, &cases).map_err(|source| ReportError::Run {
                model: model.to_string(),
                run_index,
                source,
            })?;
            for (track, m) in metrics {
                per_track.entry(track).or_default().push(Cell {
                    one_shot: Q::new(m.one_shot.into(), m.cases.into()),
                    final_: Q::new(m.final_.into(), m.cases.into()),
                    tokens: q(m.tokens),
                });
            }
        }
        let cells = per_track.into_iter().map(|(t, cells)| (t, mean_cell(&cells))).collect();
        out.push((model.to_string(), cells));
    }
    Ok(out)
}

fn mean_cell(cells: &[Cell]) -> Cell {
    Cell {
        one_shot: mean(cells.iter().map(|c| c.one_shot)),
        final_: mean(cells.iter().map(|c| c.final_)),
        tokens: mean(cells.iter().map(|c| c.tokens)),
    }
}

fn row_cell(r: &CaseRow) -> Cell {
    Cell {
        one_shot: q(r.one_shot_success.into()),
        final_: q(r.final_success.into()),
        tokens: q(r.tokens()),
    }
}

/// Per case: means over every row of that case, across models and runs.
pub fn aggregate_by_case(rows: &[CaseRow]) -> Vec<(String, TrackCells)> {
    case_order(rows)
        .into_iter()
        .map(|case| {
            let cells = tracks_of(rows)
                .into_iter()
                .filter_map(|t| {
                    let cells: Vec<Cell> = rows.iter().filter(|r| r.case == case && r.track == t).map(row_cell).collect();
                    (!cells.is_empty()).then(|| (t, mean_cell(&cells)))
                })
                .collect();
            (case, cells)
        })
        .collect()
}

/// Mean of the per-case cells over each group's cases.
pub fn aggregate_groups(by_case: &[(String, TrackCells)], groups: &[Group]) -> Result<Vec<(Group, TrackCells)>, ReportError> {
    let lookup: BTreeMap<&str, &TrackCells> = by_case.iter().map(|(c, t)| (c.as_str(), t)).collect();
    groups
        .iter()
        .map(|g| {
            let members = g
                .cases
                .iter()
                .map(|c| {
                    lookup.get(c.as_str()).copied().ok_or_else(|| ReportError::EmptyGroup {
                        group: g.name.clone(),
                        case: c.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let tracks: BTreeSet<Track> = members.iter().flat_map(|m| m.keys().copied()).collect();
            let cells = tracks
                .into_iter()
                .filter(|t| members.iter().all(|m| m.contains_key(t)))
                .map(|t| (t, mean_cell(&members.iter().map(|m| m[&t]).collect::<Vec<_>>())))
                .collect();
            Ok((g.clone(), cells))
        })
        .collect()
}

/// Final accuracy (a fraction) per 1000 tokens.
pub fn efficiency_of(accuracy: Q, tokens: Q) -> Q {
    assert!(tokens > q(0), "every attempt costs prompt tokens");
    accuracy * q(1000) / tokens
}

/// Efficiency of `rows` over one group and track: each case's mean final
/// accuracy and mean token cost, averaged with equal case weights.
pub fn group_efficiency(rows: &[CaseRow], group: &Group, track: Track) -> Result<EfficiencyPoint, ReportError> {
    let mut per_case = Vec::new();
    for case in &group.cases {
        let cells: Vec<Cell> = rows.iter().filter(|r| &r.case == case && r.track == track).map(row_cell).collect();
        if cells.is_empty() {
            return Err(ReportError::EmptyGroup {
                group: group.name.clone(),
                case: case.clone(),
            });
        }
        per_case.push(mean_cell(&cells));
    }
    let accuracy = mean(per_case.iter().map(|c| c.final_));
    let tokens = mean(per_case.iter().map(|c| c.tokens));
    Ok(EfficiencyPoint {
        model: rows.first().map(|r| r.model.clone()).unwrap_or_default(),
        group: group.name.clone(),
        track,
        accuracy,
        tokens,
        efficiency: efficiency_of(accuracy, tokens),
    })
}

/// Per model, group and track.
pub fn efficiency(rows: &[CaseRow], groups: &[Group]) -> Result<Vec<EfficiencyPoint>, ReportError> {
    let mut by_model: BTreeMap<&str, Vec<CaseRow>> = BTreeMap::new();
    for r in rows {
        by_model.entry(&r.model).or_default().push(r.clone());
    }
    let tracks = tracks_of(rows);
    let mut out = Vec::new();
    for g in groups {
        for model_rows in by_model.values() {
            for &t in &tracks {
                out.push(group_efficiency(model_rows, g, t)?);
            }
        }
    }
    Ok(out)
}

pub fn build_report(rows: &[CaseRow], opts: &ReportOptions) -> Result<Report, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let by_case = aggregate_by_case(rows);
    Ok(Report {
        tracks: tracks_of(rows),
        by_model: aggregate_by_model(rows)?,
        groups: aggregate_groups(&by_case, &opts.scenario_groups)?,
        by_case,
        efficiency_groups: opts.efficiency_groups.clone(),
        efficiency: efficiency(rows, &opts.efficiency_groups)?,
    })
}

/// `x` rounded half-up to `places` decimals, as a string.
pub fn round_half_up(x: Q, places: u32) -> String {
    let scale = 10u128.pow(places);
    let scaled = (x * Q::from_integer(scale) + Q::new(1, 2)).floor().to_integer();
    if places == 0 {
        return scaled.to_string();
    }
    let (whole, frac) = (scaled / scale, scaled % scale);
    format!("{whole}.{frac:0width$}", width = places as usize)
}

/// A fraction as a percentage with one decimal; a full score prints as
/// `100%`.
pub fn format_percent(x: Q) -> String {
    let s = round_half_up(x * q(100), 1);
    if s == "100.0" {
        "100%".into()
    } else {
        format!("{s}%")
    }
}

pub fn format_tokens(x: Q) -> String {
    round_half_up(x, 0)
}

pub fn format_efficiency(x: Q) -> String {
    round_half_up(x, 3)
}

/// Left-aligned first column, right-aligned others.
fn text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

fn track_header(first: &str, tracks: &[Track]) -> Vec<String> {
    let mut h = vec![first.to_string()];
    for t in tracks {
        h.extend([format!("{t} 1-S"), format!("{t} Fin"), format!("{t} Tok")]);
    }
    h
}

fn track_row(label: &str, cells: &TrackCells, tracks: &[Track]) -> Vec<String> {
    let mut r = vec![label.to_string()];
    for t in tracks {
        match cells.get(t) {
            Some(c) => r.extend([format_percent(c.one_shot), format_percent(c.final_), format_tokens(c.tokens)]),
            None => r.extend(["-".into(), "-".into(), "-".into()]),
        }
    }
    r
}

pub fn render_text(report: &Report) -> String {
    let tracks = &report.tracks;
    let mut out = String::from(
        "TOON / JSON generation benchmark report\n\n\
         1-S: share of cases solved on the first attempt. Fin: share solved within the repair budget.\n\
         Tok: mean prompt + completion tokens (per run summed over cases in the model table, per case in the case table).\n\
         Efficiency: final accuracy as a fraction (1.0 = every case solved) per 1000 tokens.\n\
         Percentages are rounded half-up to one decimal, tokens to the nearest integer.\n\n",
    );
    out.push_str("Results by model (mean over runs)\n\n");
    let rows: Vec<_> = report.by_model.iter().map(|(m, c)| track_row(m, c, tracks)).collect();
    out.push_str(&text_table(&track_header("Model", tracks), &rows));
    out.push_str("\nAverage results by case (all models and runs)\n\n");
    let rows: Vec<_> = report.by_case.iter().map(|(m, c)| track_row(m, c, tracks)).collect();
    out.push_str(&text_table(&track_header("Case", tracks), &rows));
    out.push_str("\nScenario groups\n\n");
    let mut header = vec!["Group".to_string(), "Metric".to_string()];
    header.extend(tracks.iter().map(Track::to_string));
    let mut rows = Vec::new();
    for (g, cells) in &report.groups {
        let label = format!("{} ({})", g.label, g.cases.join("/"));
        for (metric, pick) in [("1-Shot Acc", true), ("Final Acc", false)] {
            let mut r = vec![label.clone(), metric.to_string()];
            r.extend(tracks.iter().map(|t| {
                cells.get(t).map_or("-".into(), |c| format_percent(if pick { c.one_shot } else { c.final_ }))
            }));
            rows.push(r);
        }
    }
    out.push_str(&text_table(&header, &rows));
    for g in &report.efficiency_groups {
        let _ = write!(out, "\nEfficiency by model, {} ({})\n\n", g.label, g.cases.join(" + "));
        let mut header = vec!["Model".to_string()];
        header.extend(tracks.iter().map(Track::to_string));
        let mut rows: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for p in report.efficiency.iter().filter(|p| p.group == g.name) {
            rows.entry(&p.model)
                .or_insert_with(|| vec![p.model.clone()])
                .push(format_efficiency(p.efficiency));
        }
        out.push_str(&text_table(&header, &rows.into_values().collect::<Vec<_>>()));
    }
    out
}

/// Tab-separated `model, track, group, efficiency` for one group.
pub fn figure_data(report: &Report, group: &str) -> String {
    let mut out = String::from("model\ttrack\tgroup\tefficiency\n");
    for p in report.efficiency.iter().filter(|p| p.group == group) {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", p.model, p.track, p.group, format_efficiency(p.efficiency));
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bar chart: one cluster per model, one bar per track.
pub fn figure_svg(report: &Report, group: &Group) -> String {
    const COLORS: [&str; 3] = ["#4c72b0", "#dd8452", "#55a868"];
    let points: Vec<&EfficiencyPoint> = report.efficiency.iter().filter(|p| p.group == group.name).collect();
    let models: Vec<&str> = points.iter().map(|p| p.model.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    let tracks = &report.tracks;
    let (bar, gap, left, top, plot_h, bottom) = (14.0, 16.0, 60.0, 40.0, 300.0, 200.0);
    let cluster = bar * tracks.len() as f64 + gap;
    let width = left + cluster * models.len() as f64 + 20.0;
    let height = top + plot_h + bottom;
    let max = points
        .iter()
        .map(|p| ratio_f64(p.efficiency))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="13">Efficiency by model for {} ({})</text>"#,
        xml_escape(&group.label),
        xml_escape(&group.cases.join(" + "))
    );
    let base = top + plot_h;
    let _ = writeln!(s, r#"<line x1="{left}" y1="{base}" x2="{:.1}" y2="{base}" stroke="black"/>"#, width - 20.0);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = max * f64::from(i) / 4.0;
        let y = base - plot_h * f64::from(i) / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, left - 4.0, y + 3.0);
    }
    for (mi, model) in models.iter().enumerate() {
        let x0 = left + gap / 2.0 + cluster * mi as f64;
        for (ti, t) in tracks.iter().enumerate() {
            let Some(p) = points.iter().find(|p| p.model == *model && p.track == *t) else { continue };
            let h = plot_h * ratio_f64(p.efficiency) / max;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar}" height="{h:.1}" fill="{}"><title>{} {t}: {}</title></rect>"#,
                x0 + bar * ti as f64,
                base - h,
                COLORS[ti % COLORS.len()],
                xml_escape(model),
                format_efficiency(p.efficiency)
            );
        }
        let lx = x0 + bar * tracks.len() as f64 / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-60 {lx:.1} {:.1})">{}</text>"#,
            base + 12.0,
            base + 12.0,
            xml_escape(model)
        );
    }
    for (ti, t) in tracks.iter().enumerate() {
        let x = width - 80.0;
        let y = top + 14.0 * ti as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{t}</text>"#,
            y - 9.0,
            COLORS[ti % COLORS.len()],
            x + 14.0,
            y
        );
    }
    s.push_str("</svg>\n");
    s
}

fn ratio_f64(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Writes `report.txt`, and `efficiency_<group>.tsv` and `.svg` per figure.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let write = |name: String, content: String| {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        Ok::<_, ReportError>(path)
    };
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = vec![write("report.txt".into(), render_text(report))?];
    for g in &report.efficiency_groups {
        out.push(write(format!("efficiency_{}.tsv", g.name), figure_data(report, &g.name))?);
        out.push(write(format!("efficiency_{}.svg", g.name), figure_svg(report, g))?);
    }
    Ok(out)
}
