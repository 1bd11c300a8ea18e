//! Per-case attempt loop with repairs, run metrics, and the benchmark runner.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toonbench_core::schema::coerce;
use toonbench_core::{
    canonicalize, case_by_name, deep_equal, extract_toon_block, parse_json, toon_to_json, validate, CaseSpec,
    Prompts, Track,
};

use crate::llm::{ChatModel, ChatRequest, ResponseFormat};

/// Repairs after the first attempt.
pub const DEFAULT_MAX_REPAIRS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    DecodeError,
    ValidationError,
    Mismatch,
    TransportError,
}

/// Case-level annotations carried in the results CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    /// Some attempt's usage was estimated because the provider sent none.
    EstimatedUsage,
    /// Every attempt failed in transport.
    Invalid,
    /// Some TOON answer came without a ```toon fence.
    NoFence,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::EstimatedUsage => "estimated-usage",
            Flag::Invalid => "invalid",
            Flag::NoFence => "no-fence",
        })
    }
}

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "estimated-usage" => Ok(Flag::EstimatedUsage),
            "invalid" => Ok(Flag::Invalid),
            "no-fence" => Ok(Flag::NoFence),
            _ => Err(format!("unknown flag `{s}`")),
        }
    }
}

/// One benchmark cell: a model answering one case on one track in one run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub model: String,
    pub run_index: u32,
    pub case: String,
    #[serde(with = "track_text")]
    pub track: Track,
}

mod track_text {
    use serde::{Deserialize, Deserializer, Serializer};
    use toonbench_core::Track;

    pub fn serialize<S: Serializer>(t: &Track, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(t)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Track, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    #[serde(flatten)]
    pub cell: CellId,
    /// 1-based.
    pub attempt_index: u32,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub usage_estimated: bool,
    pub no_fence: bool,
    pub outcome: Outcome,
    /// The text fed into the next repair prompt; absent on success.
    pub error: Option<String>,
    pub raw_output: String,
    /// The request body as sent.
    pub request: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub cell: CellId,
    pub attempts: Vec<AttemptRecord>,
    pub one_shot_success: bool,
    pub final_success: bool,
    pub total_prompt_tokens: u64,
    pub total_completion_tokens: u64,
    pub flags: BTreeSet<Flag>,
}

impl CaseResult {
    /// Derives every summary field from the attempts.
    pub fn from_attempts(cell: CellId, attempts: Vec<AttemptRecord>) -> CaseResult {
        let mut flags = BTreeSet::new();
        if attempts.iter().any(|a| a.usage_estimated) {
            flags.insert(Flag::EstimatedUsage);
        }
        if attempts.iter().any(|a| a.no_fence) {
            flags.insert(Flag::NoFence);
        }
        if !attempts.is_empty() && attempts.iter().all(|a| a.outcome == Outcome::TransportError) {
            flags.insert(Flag::Invalid);
        }
        CaseResult {
            one_shot_success: attempts.first().is_some_and(|a| a.outcome == Outcome::Success),
            final_success: attempts.iter().any(|a| a.outcome == Outcome::Success),
            total_prompt_tokens: attempts.iter().map(|a| a.prompt_tokens).sum(),
            total_completion_tokens: attempts.iter().map(|a| a.completion_tokens).sum(),
            cell,
            attempts,
            flags,
        }
    }

    pub fn row(&self) -> CaseRow {
        CaseRow {
            model: self.cell.model.clone(),
            run_index: self.cell.run_index,
            case: self.cell.case.clone(),
            track: self.cell.track,
            one_shot_success: self.one_shot_success,
            final_success: self.final_success,
            attempts: self.attempts.len() as u32,
            prompt_tokens: self.total_prompt_tokens,
            completion_tokens: self.total_completion_tokens,
            flags: self.flags.iter().map(Flag::to_string).collect::<Vec<_>>().join(";"),
        }
    }
}

/// One line of the results CSV. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRow {
    pub model: String,
    pub run_index: u32,
    pub case: String,
    #[serde(with = "track_text")]
    pub track: Track,
    pub one_shot_success: bool,
    pub final_success: bool,
    pub attempts: u32,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// `;`-separated flag names.
    pub flags: String,
}

impl CaseRow {
    pub fn cell(&self) -> CellId {
        CellId {
            model: self.model.clone(),
            run_index: self.run_index,
            case: self.case.clone(),
            track: self.track,
        }
    }

    pub fn tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "model",
    "run_index",
    "case",
    "track",
    "one_shot_success",
    "final_success",
    "attempts",
    "prompt_tokens",
    "completion_tokens",
    "flags",
];

/// Result of checking one model answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub outcome: Outcome,
    pub error: Option<String>,
    pub no_fence: bool,
}

impl Evaluation {
    fn fail(outcome: Outcome, error: String, no_fence: bool) -> Evaluation {
        Evaluation {
            outcome,
            error: Some(error),
            no_fence,
        }
    }
}

/// The body of the first fenced block if there is one, else the trimmed
/// output. Plain-JSON answers often arrive fenced.
pub fn strip_code_fence(output: &str) -> &str {
    let Some(open) = output.find("```") else {
        return output.trim();
    };
    let after = &output[open + 3..];
    let body = after.find('\n').map_or("", |nl| &after[nl + 1..]);
    let end = body.find("```").unwrap_or(body.len());
    body[..end].trim()
}

/// Decode, validate, canonicalize and compare one answer against the gold.
pub fn evaluate(case: &CaseSpec, track: Track, output: &str) -> Evaluation {
    let no_fence = track == Track::T && !output.contains("```toon");
    let value = if track.is_json() {
        match parse_json(strip_code_fence(output)) {
            Ok(v) => v,
            Err(e) => return Evaluation::fail(Outcome::DecodeError, format!("invalid JSON: {e}"), false),
        }
    } else {
        // Unfenced output is parsed whole so the repair prompt names the
        // actual syntax error.
        let decoded = if no_fence {
            toon_to_json(output).map_err(|e| format!("no ```toon code block, and the whole output is not valid TOON: {e}"))
        } else {
            extract_toon_block(output).and_then(toon_to_json).map_err(|e| e.to_string())
        };
        match decoded {
            Ok(json) => parse_json(&json).expect("canonical JSON re-parses"),
            Err(e) => return Evaluation::fail(Outcome::DecodeError, format!("TOON decode error: {e}"), no_fence),
        }
    };
    let errors = validate(&value, &case.schema);
    if !errors.is_empty() {
        let text = errors
            .iter()
            .map(|e| format!("- {e}"))
            .collect::<Vec<_>>()
            .join("\n");
        return Evaluation::fail(Outcome::ValidationError, format!("schema validation failed:\n{text}"), no_fence);
    }
    let actual = canonicalize(&coerce(&value, &case.schema));
    let gold = canonicalize(&case.gold);
    match deep_equal(&actual, &gold) {
        (true, _) => Evaluation {
            outcome: Outcome::Success,
            error: None,
            no_fence,
        },
        (false, diff) => {
            let diff = diff.expect("unequal values have a diff");
            Evaluation::fail(
                Outcome::Mismatch,
                format!("data does not match the expected record: {} ({diff})", diff.describe(&actual, &gold)),
                no_fence,
            )
        }
    }
}

/// Settings shared by every cell of a benchmark.
#[derive(Debug, Clone)]
pub struct CaseOptions {
    pub prompts: Prompts,
    pub max_repairs: u32,
    pub max_tokens: Option<u32>,
}

impl Default for CaseOptions {
    fn default() -> Self {
        CaseOptions {
            prompts: Prompts::default(),
            max_repairs: DEFAULT_MAX_REPAIRS,
            max_tokens: None,
        }
    }
}

/// Runs one cell: a first attempt, then repairs fed with the previous output
/// and its error text, until success or `1 + max_repairs` attempts. A
/// transport failure uses up an attempt and the next attempt resends the
/// same prompt.
pub fn run_case(model: &dyn ChatModel, cell: &CellId, case: &CaseSpec, opts: &CaseOptions) -> CaseResult {
    let mut attempts = Vec::new();
    let mut last_failure: Option<(String, String)> = None;
    for attempt_index in 1..=1 + opts.max_repairs {
        let prompt = match &last_failure {
            None => opts.prompts.render(case, cell.track),
            Some((output, error)) => opts
                .prompts
                .render_repair(case, cell.track, output, error)
                .expect("failure texts are never empty"),
        };
        let mut req = ChatRequest::new(&cell.model, prompt);
        if cell.track == Track::Jso {
            req.response_format = Some(ResponseFormat::JsonObject);
        }
        req.max_tokens = opts.max_tokens;
        let request = req.body();
        let record = match model.complete(&req) {
            Ok(resp) => {
                let eval = evaluate(case, cell.track, &resp.content);
                if let Some(error) = &eval.error {
                    last_failure = Some((resp.content.clone(), error.clone()));
                }
                AttemptRecord {
                    cell: cell.clone(),
                    attempt_index,
                    prompt_tokens: resp.usage.prompt_tokens,
                    completion_tokens: resp.usage.completion_tokens,
                    usage_estimated: resp.usage_estimated,
                    no_fence: eval.no_fence,
                    outcome: eval.outcome,
                    error: eval.error,
                    raw_output: resp.content,
                    request,
                }
            }
            Err(e) => {
                log::warn!("{} run {} {} {}: {e}", cell.model, cell.run_index, cell.case, cell.track);
                AttemptRecord {
                    cell: cell.clone(),
                    attempt_index,
                    prompt_tokens: 0,
                    completion_tokens: 0,
                    usage_estimated: false,
                    no_fence: false,
                    outcome: Outcome::TransportError,
                    error: Some(e.to_string()),
                    raw_output: String::new(),
                    request,
                }
            }
        };
        let done = record.outcome == Outcome::Success;
        attempts.push(record);
        if done {
            break;
        }
    }
    CaseResult::from_attempts(cell.clone(), attempts)
}

/// Per-track aggregates of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrackMetrics {
    pub cases: u64,
    pub one_shot: u64,
    pub final_: u64,
    pub tokens: u64,
}

impl TrackMetrics {
    pub fn one_shot_accuracy(&self) -> Ratio<u64> {
        Ratio::new(self.one_shot, self.cases)
    }

    pub fn final_accuracy(&self) -> Ratio<u64> {
        Ratio::new(self.final_, self.cases)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("run has no `{case}` result for track {track}")]
    MissingCase { case: String, track: Track },
    #[error("run has more than one `{case}` result for track {track}")]
    DuplicateCase { case: String, track: Track },
    #[error("run has a result for `{case}`, which is not one of the expected cases")]
    UnexpectedCase { case: String },
}

/// One-shot and final accuracy over `cases`, and the summed prompt plus
/// completion tokens, for every track present in `rows` (one run's rows).
pub fn compute_run_metrics(rows: &[CaseRow], cases: &[String]) -> Result<BTreeMap<Track, TrackMetrics>, MetricsError> {
    let mut seen: HashMap<(Track, &str), &CaseRow> = HashMap::new();
    for r in rows {
        if !cases.contains(&r.case) {
            return Err(MetricsError::UnexpectedCase { case: r.case.clone() });
        }
        if seen.insert((r.track, &r.case), r).is_some() {
            return Err(MetricsError::DuplicateCase {
                case: r.case.clone(),
                track: r.track,
            });
        }
    }
    let tracks: BTreeSet<Track> = rows.iter().map(|r| r.track).collect();
    let mut out = BTreeMap::new();
    for track in tracks {
        let mut m = TrackMetrics::default();
        for case in cases {
            let r = seen.get(&(track, case.as_str())).ok_or_else(|| MetricsError::MissingCase {
                case: case.clone(),
                track,
            })?;
            m.cases += 1;
            m.one_shot += u64::from(r.one_shot_success);
            m.final_ += u64::from(r.final_success);
            m.tokens += r.tokens();
        }
        out.insert(track, m);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub model: String,
    pub run_index: u32,
    pub rows: Vec<CaseRow>,
    pub metrics: BTreeMap<Track, TrackMetrics>,
}

/// Supplies the model that answers a given cell.
pub trait Provider: Sync {
    fn model(&self, cell: &CellId) -> Arc<dyn ChatModel>;
}

impl<F: Fn(&CellId) -> Arc<dyn ChatModel> + Sync> Provider for F {
    fn model(&self, cell: &CellId) -> Arc<dyn ChatModel> {
        self(cell)
    }
}

/// Every cell answered by one shared model.
pub struct SharedModel(pub Arc<dyn ChatModel>);

impl Provider for SharedModel {
    fn model(&self, _cell: &CellId) -> Arc<dyn ChatModel> {
        self.0.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub models: Vec<String>,
    pub runs: u32,
    pub tracks: Vec<Track>,
    pub cases: Vec<String>,
    pub max_repairs: u32,
    pub parallelism: usize,
    pub max_tokens: Option<u32>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            models: Vec::new(),
            runs: 10,
            tracks: Track::ALL.to_vec(),
            cases: toonbench_core::cases::CASE_NAMES.iter().map(|s| s.to_string()).collect(),
            max_repairs: DEFAULT_MAX_REPAIRS,
            parallelism: 1,
            max_tokens: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let err = |m: String| Err(BenchError::Config(m));
        if self.models.is_empty() {
            return err("at least one model is required".into());
        }
        if self.runs == 0 {
            return err("runs must be at least 1".into());
        }
        if self.tracks.is_empty() || self.cases.is_empty() {
            return err("tracks and cases must not be empty".into());
        }
        if self.parallelism == 0 {
            return err("parallelism must be at least 1".into());
        }
        for case in &self.cases {
            if case_by_name(case).is_none() {
                return err(format!("unknown case `{case}`"));
            }
        }
        let dup = |v: Vec<String>| {
            let mut seen = HashSet::new();
            v.into_iter().find(|x| !seen.insert(x.clone()))
        };
        if let Some(d) = dup(self.models.clone())
            .or_else(|| dup(self.cases.clone()))
            .or_else(|| dup(self.tracks.iter().map(Track::to_string).collect()))
        {
            return err(format!("`{d}` is listed twice"));
        }
        Ok(())
    }

    /// All cells in canonical order: model, run, case, track.
    pub fn cells(&self) -> Vec<CellId> {
        let mut out = Vec::new();
        for model in &self.models {
            for run_index in 1..=self.runs {
                for case in &self.cases {
                    for &track in &self.tracks {
                        out.push(CellId {
                            model: model.clone(),
                            run_index,
                            case: case.clone(),
                            track,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: line {line}: {source}", path.display())]
    Log {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> BenchError + '_ {
    move |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a results CSV, checking the header.
pub fn read_rows(path: &Path) -> Result<Vec<CaseRow>, BenchError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_rows_from(file).map_err(csv_err(path))
}

pub fn read_rows_from(reader: impl std::io::Read) -> Result<Vec<CaseRow>, csv::Error> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("expected columns {}, found {}", CSV_COLUMNS.join(","), header.join(",")),
        )));
    }
    rdr.deserialize().collect()
}

pub fn write_rows(path: &Path, rows: &[CaseRow]) -> Result<(), BenchError> {
    let tmp = path.with_extension("csv.tmp");
    let mut w = csv::Writer::from_path(&tmp).map_err(csv_err(&tmp))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(&tmp))?;
    }
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_attempts(path: &Path) -> Result<Vec<AttemptRecord>, BenchError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| BenchError::Log {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

fn write_attempts(path: &Path, records: &[AttemptRecord]) -> Result<(), BenchError> {
    let tmp = path.with_extension("jsonl.tmp");
    let mut w = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("records serialize");
        w.write_all(b"\n").map_err(io_err(&tmp))?;
    }
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Rebuilds case rows from an attempt log, for cross-checking the CSV.
pub fn rows_from_attempts(records: &[AttemptRecord]) -> Vec<CaseRow> {
    let mut by_cell: BTreeMap<CellId, Vec<AttemptRecord>> = BTreeMap::new();
    for r in records {
        by_cell.entry(r.cell.clone()).or_default().push(r.clone());
    }
    by_cell
        .into_iter()
        .map(|(cell, mut attempts)| {
            attempts.sort_by_key(|a| a.attempt_index);
            CaseResult::from_attempts(cell, attempts).row()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub attempts: PathBuf,
}

impl OutputPaths {
    /// `results.csv` and `attempts.jsonl` inside `dir`.
    pub fn in_dir(dir: &Path) -> OutputPaths {
        OutputPaths {
            csv: dir.join("results.csv"),
            attempts: dir.join("attempts.jsonl"),
        }
    }
}

/// Runs every cell not already in the results CSV, appending each finished
/// cell as it completes, then rewrites both outputs in canonical cell order
/// so their content does not depend on scheduling. Returns the run results
/// for all configured cells, including resumed ones.
pub fn run_benchmark(
    config: &BenchConfig,
    provider: &dyn Provider,
    opts: &CaseOptions,
    out: &OutputPaths,
) -> Result<Vec<RunResult>, BenchError> {
    config.validate()?;
    let cases: HashMap<String, CaseSpec> = config
        .cases
        .iter()
        .map(|c| (c.clone(), case_by_name(c).expect("validated")))
        .collect();
    let order: HashMap<CellId, usize> = config.cells().into_iter().enumerate().map(|(i, c)| (c, i)).collect();

    let mut rows = if out.csv.exists() { read_rows(&out.csv)? } else { Vec::new() };
    let mut seen = HashSet::new();
    rows.retain(|r| seen.insert(r.cell()));
    let done: HashSet<CellId> = rows.iter().map(CaseRow::cell).collect();
    let mut attempts = if out.attempts.exists() { read_attempts(&out.attempts)? } else { Vec::new() };
    // Attempts of cells that never reached the CSV are redone.
    attempts.retain(|a| done.contains(&a.cell));
    let todo: Vec<CellId> = config.cells().into_iter().filter(|c| !done.contains(c)).collect();
    if !done.is_empty() {
        log::info!("resuming: {} cells done, {} to go", done.len(), todo.len());
    }

    // Start from a consistent pair of files, then append.
    sort_outputs(&mut rows, &mut attempts, &order);
    write_rows(&out.csv, &rows)?;
    write_attempts(&out.attempts, &attempts)?;
    let mut csv_out = csv::WriterBuilder::new()
        .has_headers(rows.is_empty())
        .from_writer(OpenOptions::new().append(true).open(&out.csv).map_err(io_err(&out.csv))?);
    let mut log_out = OpenOptions::new()
        .append(true)
        .open(&out.attempts)
        .map_err(io_err(&out.attempts))?;
    if rows.is_empty() {
        csv_out.write_record(CSV_COLUMNS).map_err(csv_err(&out.csv))?;
        csv_out.flush().map_err(io_err(&out.csv))?;
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<CaseResult>();
    let written: Result<(), BenchError> = thread::scope(|s| {
        for _ in 0..config.parallelism.min(todo.len().max(1)) {
            let tx = tx.clone();
            let (next, todo, cases) = (&next, &todo, &cases);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = todo.get(i) else { break };
                let model = provider.model(cell);
                let result = run_case(model.as_ref(), cell, &cases[&cell.case], opts);
                if tx.send(result).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Single writer: attempts first, so a CSV row always has its log.
        for result in rx {
            for a in &result.attempts {
                let line = serde_json::to_string(a).expect("records serialize");
                writeln!(log_out, "{line}").map_err(io_err(&out.attempts))?;
            }
            log_out.flush().map_err(io_err(&out.attempts))?;
            let row = result.row();
            csv_out.serialize(&row).map_err(csv_err(&out.csv))?;
            csv_out.flush().map_err(io_err(&out.csv))?;
            rows.push(row);
            attempts.extend(result.attempts);
        }
        Ok(())
    });
    written?;
    drop(csv_out);
    drop(log_out);

    sort_outputs(&mut rows, &mut attempts, &order);
    write_rows(&out.csv, &rows)?;
    write_attempts(&out.attempts, &attempts)?;

    let mut runs: BTreeMap<(usize, u32), Vec<CaseRow>> = BTreeMap::new();
    let model_pos: HashMap<&str, usize> = config.models.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    for r in rows.iter().filter(|r| order.contains_key(&r.cell())) {
        runs.entry((model_pos[r.model.as_str()], r.run_index)).or_default().push(r.clone());
    }
    runs.into_iter()
        .map(|((m, run_index), rows)| {
            let metrics = compute_run_metrics(&rows, &config.cases)?;
            Ok(RunResult {
                model: config.models[m].clone(),
                run_index,
                rows,
                metrics,
            })
        })
        .collect()
}

/// Configured cells in canonical order, then any others sorted by key.
fn sort_outputs(rows: &mut [CaseRow], attempts: &mut [AttemptRecord], order: &HashMap<CellId, usize>) {
    let key = |c: CellId| (order.get(&c).copied().unwrap_or(usize::MAX), c);
    rows.sort_by_cached_key(|r| key(r.cell()));
    attempts.sort_by_cached_key(|a| (key(a.cell.clone()), a.attempt_index));
}
