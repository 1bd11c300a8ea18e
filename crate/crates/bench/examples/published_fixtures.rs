//! Writes the two published-results fixtures under `fixtures/`:
//!
//! * `published_by_model.csv`: 21 models x 10 runs x 4 cases x 3 tracks whose
//!   per-model means render to the published model table.
//! * `published_by_case.csv`: 210 rows per case and track whose per-case
//!   means render to the published case table.
//!
//! Run with `cargo run -p toonbench-harness --example published_fixtures`.

use std::path::Path;

use toonbench_core::cases::CASE_NAMES;
use toonbench_core::Track;
use toonbench_harness::harness::{write_rows, CaseRow};
use toonbench_harness::report::{format_percent, Q};

/// Model, then (1-S, Fin, Tok) for J, JSO and T.
type Published = (&'static str, [(&'static str, &'static str, u64); 3]);

const BY_MODEL: [Published; 21] = [
    ("NousResearch/Hermes-4-405B", [("92.5", "92.5", 3252), ("35.0", "100", 4759), ("50.0", "60.0", 4671)]),
    ("NousResearch/Hermes-4-70B", [("75.0", "75.0", 4414), ("37.5", "75.0", 5594), ("50.0", "50.0", 4738)]),
    ("PrimeIntellect/INTELLECT-3", [("72.5", "75.0", 10682), ("72.5", "77.5", 10103), ("40.0", "65.0", 13315)]),
    ("Qwen/Qwen2.5-Coder-7B-fast", [("0.0", "0.0", 37705), ("75.0", "75.0", 4440), ("27.5", "27.5", 32715)]),
    ("Qwen/Qwen3-235B-A22B-Inst", [("100", "100", 2772), ("100", "100", 2772), ("50.0", "100", 4715)]),
    ("Qwen/Qwen3-235B-A22B-Thk", [("82.5", "82.5", 11425), ("87.5", "97.5", 7899), ("50.0", "97.5", 17457)]),
    ("Qwen/Qwen3-30B-A3B-Inst", [("75.0", "75.0", 4436), ("75.0", "75.0", 4436), ("50.0", "70.0", 5505)]),
    ("Qwen/Qwen3-32B", [("75.0", "77.5", 10196), ("75.0", "75.0", 4120), ("47.5", "80.0", 9101)]),
    ("Qwen/Qwen3-Coder-30B-A3B", [("75.0", "75.0", 4206), ("75.0", "75.0", 4206), ("50.0", "100", 4719)]),
    ("Qwen/Qwen3-Coder-480B", [("75.0", "75.0", 4462), ("75.0", "75.0", 4447), ("50.0", "75.0", 4515)]),
    ("deepseek-ai/DeepSeek-R1", [("55.0", "70.0", 13811), ("65.0", "80.0", 4149), ("25.0", "50.0", 19047)]),
    ("deepseek-ai/DeepSeek-V3-fast", [("75.0", "100", 3600), ("75.0", "100", 3584), ("25.0", "80.0", 4734)]),
    ("google/gemma-2-2b-it", [("75.0", "100", 4721), ("77.5", "100", 4566), ("0.0", "0.0", 5955)]),
    ("google/gemma-2-9b-it-fast", [("75.0", "75.0", 6086), ("75.0", "75.0", 6056), ("50.0", "75.0", 5419)]),
    ("meta-llama/Llama-3.3-70B", [("75.0", "75.0", 4551), ("75.0", "75.0", 4447), ("50.0", "50.0", 5148)]),
    ("meta-llama/Llama-3.1-8B", [("72.5", "72.5", 7235), ("75.0", "75.0", 6941), ("22.5", "25.0", 4915)]),
    ("moonshotai/Kimi-K2-Instruct", [("50.0", "75.0", 4284), ("50.0", "75.0", 4283), ("50.0", "100", 3937)]),
    ("nvidia/Llama-3_1-Nemotron", [("75.0", "75.0", 4426), ("50.0", "50.0", 5714), ("50.0", "82.5", 4368)]),
    ("openai/gpt-oss-120b", [("97.5", "100", 3685), ("100", "100", 3545), ("50.0", "87.5", 8223)]),
    ("openai/gpt-oss-20b", [("50.0", "72.5", 14943), ("50.0", "67.5", 15601), ("50.0", "90.0", 9678)]),
    ("zai-org/GLM-4.5", [("75.0", "87.5", 9677), ("75.0", "92.5", 9135), ("27.5", "52.5", 8110)]),
];

const BY_CASE: [Published; 4] = [
    ("users", [("94.8", "94.8", 1078), ("92.9", "100", 556), ("90.5", "90.5", 840)]),
    ("order", [("81.9", "81.9", 1746), ("78.6", "83.3", 1255), ("74.3", "78.6", 1585)]),
    ("company", [("18.6", "43.8", 3575), ("21.9", "48.1", 2592), ("0.0", "48.6", 2567)]),
    ("invoice", [("90.0", "90.0", 1723), ("87.6", "95.2", 1349), ("0.0", "52.4", 3626)]),
];

const RUNS: u32 = 10;

/// Smallest success count out of `n` that renders as `printed`.
fn count_for(printed: &str, n: u64) -> u64 {
    let want = if printed == "100" { "100%".to_string() } else { format!("{printed}%") };
    (0..=n)
        .find(|&k| format_percent(Q::new(k.into(), n.into())) == want)
        .unwrap_or_else(|| panic!("no k/{n} renders as {want}"))
}

fn row(model: &str, run_index: u32, case: &str, track: Track, one: bool, fin: bool, tokens: u64) -> CaseRow {
    let prompt = tokens * 4 / 5;
    CaseRow {
        model: model.into(),
        run_index,
        case: case.into(),
        track,
        one_shot_success: one,
        final_success: fin,
        attempts: if one { 1 } else { 4 },
        prompt_tokens: prompt,
        completion_tokens: tokens - prompt,
        flags: String::new(),
    }
}

fn by_model() -> Vec<CaseRow> {
    let cells = RUNS as u64 * CASE_NAMES.len() as u64;
    let mut rows = Vec::new();
    for (model, tracks) in BY_MODEL {
        for (track, (one, fin, tok)) in Track::ALL.into_iter().zip(tracks) {
            let (a, b) = (count_for(one, cells), count_for(fin, cells));
            // Spread the run total tok * RUNS evenly over the cells.
            let total = tok * u64::from(RUNS);
            for i in 0..cells {
                let (run, case) = (i / 4, CASE_NAMES[(i % 4) as usize]);
                let tokens = total / cells + u64::from(i < total % cells);
                rows.push(row(model, run as u32 + 1, case, track, i < a, i < b, tokens));
            }
        }
    }
    rows
}

fn by_case() -> Vec<CaseRow> {
    let n = BY_MODEL.len() as u64 * u64::from(RUNS);
    let mut rows = Vec::new();
    for (case, tracks) in BY_CASE {
        for (track, (one, fin, tok)) in Track::ALL.into_iter().zip(tracks) {
            let (a, b) = (count_for(one, n), count_for(fin, n));
            for i in 0..n {
                let model = format!("model-{:02}", i / u64::from(RUNS) + 1);
                rows.push(row(&model, (i % u64::from(RUNS)) as u32 + 1, case, track, i < a, i < b, tok));
            }
        }
    }
    rows
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).expect("create fixtures dir");
    for (name, mut rows) in [("published_by_model.csv", by_model()), ("published_by_case.csv", by_case())] {
        rows.sort_by(|a, b| (&a.model, a.run_index, &a.case, a.track).cmp(&(&b.model, b.run_index, &b.case, b.track)));
        write_rows(&dir.join(name), &rows).expect("write fixture");
        println!("{name}: {} rows", rows.len());
    }
}
