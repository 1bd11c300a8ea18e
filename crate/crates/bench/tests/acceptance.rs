//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::checks;
use proptest::test_runner::{Config as ProptestConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toonbench_core::toon::ToonErrorKind;
use toonbench_core::value::Segment;
use toonbench_core::{
    builtin_cases, case_by_name, deep_equal, emit_canonical_json, encode_toon, parse_json, parse_toon, CaseSpec,
    Track, Value,
};
use toonbench_harness::harness::read_rows;
use toonbench_harness::report::{
    aggregate_by_case, build_report, emit_report, format_efficiency, format_percent, format_tokens,
    group_efficiency, read_results, Group, ReportOptions,
};
use toonbench_harness::{
    compute_run_metrics, run_benchmark, run_case, CaseOptions, CaseRow, CellId, Config, OutputPaths, Scripted,
    ScriptedModel,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn codec_round_trip() -> Outcome {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 10_000,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let start = Instant::now();
    runner
        .run(&common::document(5), |v| {
            let text = encode_toon(&v).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let back = parse_toon(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            let (eq, diff) = deep_equal(&back.root, &v);
            if eq {
                Ok(())
            } else {
                Err(TestCaseError::fail(format!("{diff:?}\n{text}")))
            }
        })
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!("10000 documents, 0 failures, {:.1} s", elapsed.as_secs_f64()))
}

fn reference_listing() -> Outcome {
    let doc = parse_toon(common::REFERENCE).map_err(|e| e.to_string())?;
    let again = encode_toon(&doc.root).map_err(|e| e.to_string())?;
    let trim = |s: &str| s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n").trim_end().to_string();
    ensure(trim(&again) == trim(common::REFERENCE), || format!("re-encoded as\n{again}"))?;
    let sections = doc.root.get("sections").and_then(Value::as_array).map_or(0, <[Value]>::len);
    ensure(sections == 2, || format!("{sections} sections"))?;
    let total = doc.root.pointer(&[Segment::Key("summary".into()), Segment::Key("total".into())]);
    ensure(total == Some(&Value::int(3)), || format!("summary.total = {total:?}"))?;
    Ok("re-encodes identically, 2 sections, summary.total = 3".into())
}

/// Byte ranges of the count inside every `[N]` header outside quoted text.
fn header_counts(text: &str) -> Vec<(usize, usize)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut quoted = false;
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'\\' if quoted => i += 1,
            b'"' => quoted = !quoted,
            b'\n' => quoted = false,
            b'[' if !quoted => {
                let end = b[i + 1..].iter().position(|c| !c.is_ascii_digit()).map(|p| i + 1 + p);
                if let Some(end) = end.filter(|&e| e > i + 1 && b[e] == b']') {
                    out.push((i + 1, end));
                }
            }
            _ => {}
        }
        i += 1;
    }
    out
}

fn count_enforcement() -> Outcome {
    let mut mutations = 0;
    let mut headers = 0;
    for case in builtin_cases() {
        let toon = encode_toon(&case.gold).map_err(|e| e.to_string())?;
        let found = header_counts(&toon);
        ensure(!found.is_empty(), || format!("{}: no array headers", case.name))?;
        headers += found.len();
        for (start, end) in found {
            let n: u64 = toon[start..end].parse().unwrap();
            for m in [n.checked_sub(1), Some(n + 1)].into_iter().flatten() {
                let mutated = format!("{}{m}{}", &toon[..start], &toon[end..]);
                match parse_toon(&mutated) {
                    Err(e) if e.kind == ToonErrorKind::CountMismatch => mutations += 1,
                    other => {
                        return Err(format!("{}: [{n}] -> [{m}] gave {:?}", case.name, other.map(|d| d.root)));
                    }
                }
            }
        }
    }
    Ok(format!("{mutations} mutations over {headers} headers, all count-mismatch"))
}

fn order_gold() -> Outcome {
    let order = case_by_name("order").unwrap();
    let toon = encode_toon(&order.gold).map_err(|e| e.to_string())?;
    let decoded = parse_toon(&toon).map_err(|e| e.to_string())?.root;
    let from_json = parse_json(&emit_canonical_json(&order.gold)).map_err(|e| e.to_string())?;
    let item = |sku: &str, qty: i64, price: f64| {
        Value::object([
            ("sku", Value::str(sku)),
            ("qty", Value::int(qty)),
            ("price", Value::float(price).unwrap()),
        ])
    };
    let literal = Value::object([
        ("id", Value::int(101)),
        ("customer", Value::object([("id", Value::int(9)), ("name", Value::str("Ada"))])),
        ("items", Value::Array(vec![item("A1", 2, 9.99), item("B2", 1, 14.50)])),
    ]);
    for (name, v) in [("decoded TOON", &decoded), ("gold JSON", &from_json)] {
        let (eq, diff) = deep_equal(v, &literal);
        ensure(eq, || format!("{name} differs from the literal order: {diff:?}"))?;
    }
    Ok("decoded TOON = gold JSON = literal values".into())
}

fn mask_exactness() -> Outcome {
    let stats = checks::mask_soundness(1000, 7)?;
    ensure(stats.states_checked >= 1000, || format!("only {} states sampled", stats.states_checked))?;
    let runs = checks::adversarial_runs(1000)?;
    Ok(format!(
        "{} states match brute force, {} random walks ({} finished) and {runs} adversarial generations valid, no dead ends",
        stats.states_checked, stats.walks, stats.finished
    ))
}

fn mask_completeness() -> Outcome {
    let counts = checks::gold_tokenizations()?;
    let toon: f64 = counts.iter().filter(|(n, _)| n.ends_with(".toon")).map(|(_, c)| c).sum();
    Ok(format!("{} documents, {toon:.3e} TOON tokenizations accepted", counts.len()))
}

fn cell(case: &str, track: Track, run_index: u32) -> CellId {
    CellId {
        model: "scripted".into(),
        run_index,
        case: case.into(),
        track,
    }
}

fn good_answer(case: &CaseSpec, track: Track) -> String {
    match track {
        Track::T => format!("```toon\n{}\n```", encode_toon(&case.gold).unwrap()),
        Track::J | Track::Jso => emit_canonical_json(&case.gold),
    }
}

fn harness_metrics() -> Outcome {
    let cases = builtin_cases();
    let names: Vec<String> = cases.iter().map(|c| c.name.to_string()).collect();
    let opts = CaseOptions::default();
    let mut rows = Vec::new();
    let mut declared = 0;
    for (i, case) in cases.iter().enumerate() {
        let mut script = Vec::new();
        if i == 3 {
            script.push(Scripted::new("Sorry, I cannot help with that.", 700 + i as u64, 11));
        }
        script.push(Scripted::new(good_answer(case, Track::J), 500 + i as u64, 40 + i as u64));
        declared += script.iter().map(|s| s.usage.prompt_tokens + s.usage.completion_tokens).sum::<u64>();
        let model = ScriptedModel::new(script);
        rows.push(run_case(&model, &cell(case.name, Track::J, 1), case, &opts).row());
        ensure(model.remaining() == 0, || format!("{}: script not consumed", case.name))?;
    }
    let m = compute_run_metrics(&rows, &names).map_err(|e| e.to_string())?[&Track::J];
    let (one, fin) = (format_percent(to_q(m.one_shot_accuracy())), format_percent(to_q(m.final_accuracy())));
    ensure(one == "75.0%" && fin == "100%", || format!("one-shot {one}, final {fin}"))?;
    ensure(m.tokens == declared, || format!("tokens {} != declared {declared}", m.tokens))?;
    Ok(format!("one-shot {one}, final {fin}, tokens {} = declared", m.tokens))
}

fn to_q(r: num_rational::Ratio<u64>) -> toonbench_harness::report::Q {
    toonbench_harness::report::Q::new(u128::from(*r.numer()), u128::from(*r.denom()))
}

fn repair_bound() -> Outcome {
    let cases = builtin_cases();
    let names: Vec<String> = cases.iter().map(|c| c.name.to_string()).collect();
    let opts = CaseOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut repaired = 0;
    for scenario in 0..100u32 {
        let mut rows: Vec<CaseRow> = Vec::new();
        for case in &cases {
            for track in Track::ALL {
                let len = rng.random_range(1..=8);
                let script: Vec<Scripted> = (0..len)
                    .map(|_| {
                        let content = match rng.random_range(0..4) {
                            0 => good_answer(case, track),
                            1 => "no structured data here".to_string(),
                            2 => "{\"id\": ".to_string(),
                            _ => "```toon\nitems[2]{a}:\n  1\n```".to_string(),
                        };
                        Scripted::new(content, rng.random_range(0..2000), rng.random_range(0..500))
                    })
                    .collect();
                let good = good_answer(case, track);
                let first_good = script.iter().position(|s| s.content == good);
                let result = run_case(&ScriptedModel::new(script.clone()), &cell(case.name, track, scenario), case, &opts);
                let n = result.attempts.len();
                ensure(n <= 4, || format!("scenario {scenario}: {n} attempts"))?;
                // Stops at the first success; an exhausted script counts as a
                // transport failure and still uses up the budget.
                let expect_final = first_good.is_some_and(|p| p < 4);
                let expect_n = if expect_final { first_good.unwrap() + 1 } else { 4 };
                ensure(n == expect_n, || format!("scenario {scenario}: {n} attempts, expected {expect_n}"))?;
                ensure(result.final_success == expect_final, || format!("scenario {scenario}: final success wrong"))?;
                ensure(result.one_shot_success == (first_good == Some(0)), || format!("scenario {scenario}: one-shot wrong"))?;
                let used: u64 = script[..n.min(script.len())].iter().map(|s| s.usage.prompt_tokens + s.usage.completion_tokens).sum();
                ensure(result.total_prompt_tokens + result.total_completion_tokens == used, || {
                    format!("scenario {scenario}: token totals")
                })?;
                repaired += usize::from(result.final_success && !result.one_shot_success);
                rows.push(result.row());
            }
        }
        for (track, m) in compute_run_metrics(&rows, &names).map_err(|e| e.to_string())? {
            ensure(m.final_ >= m.one_shot, || format!("scenario {scenario} {track:?}: final below one-shot"))?;
        }
    }
    Ok(format!("1200 cases across 100 scenarios, max 4 attempts, final >= one-shot, {repaired} repaired"))
}

fn report_fixtures() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/published_by_case.csv");
    let rows = read_results(&path).map_err(|e| e.to_string())?;
    let by_case = aggregate_by_case(&rows);
    let render = |case: &str, track: Track| {
        let c = by_case.iter().find(|(n, _)| n == case).map(|(_, cells)| cells[&track]).unwrap();
        format!("{} / {} / {}", format_percent(c.one_shot), format_percent(c.final_), format_tokens(c.tokens))
    };
    let users = render("users", Track::Jso);
    let invoice = render("invoice", Track::T);
    ensure(users == "92.9% / 100% / 556", || format!("users/JSO {users}"))?;
    ensure(invoice == "0.0% / 52.4% / 3626", || format!("invoice/T {invoice}"))?;
    let p = group_efficiency(&rows, &Group::new("users", "users", &["users"]), Track::Jso).map_err(|e| e.to_string())?;
    let e = *p.efficiency.numer() as f64 / *p.efficiency.denom() as f64;
    ensure((e - 1.798).abs() <= 0.001, || format!("efficiency {e}"))?;
    Ok(format!("users/JSO {users}, invoice/T {invoice}, efficiency {} ({e:.4})", format_efficiency(p.efficiency)))
}

const SIMULATED: &str = r#"
models = ["sim-a", "sim-b"]
runs = 10
parallelism = 4

[provider]
kind = "simulated"
seed = 3
"#;

fn determinism() -> Outcome {
    let cfg = Config::parse(SIMULATED).map_err(|e| e.to_string())?;
    let mut artifacts = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let paths = OutputPaths::in_dir(dir.path());
        let provider = cfg.provider().map_err(|e| e.to_string())?;
        run_benchmark(&cfg.bench, provider.as_ref(), &CaseOptions::default(), &paths).map_err(|e| e.to_string())?;
        let rows = read_rows(&paths.csv).map_err(|e| e.to_string())?;
        let report = build_report(&rows, &ReportOptions::default()).map_err(|e| e.to_string())?;
        let mut files = vec![paths.csv.clone(), paths.attempts.clone()];
        files.extend(emit_report(&report, &dir.path().join("report")).map_err(|e| e.to_string())?);
        let bytes: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(f).unwrap()))
            .collect();
        artifacts.push(bytes);
    }
    ensure(artifacts[0] == artifacts[1], || "artifacts differ between runs".into())?;
    let rows = String::from_utf8_lossy(&artifacts[0][0].1).lines().count() - 1;
    Ok(format!("{} files byte-identical, {rows} result rows", artifacts[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("codec round trip", codec_round_trip),
        ("reference listing fidelity", reference_listing),
        ("count enforcement", count_enforcement),
        ("order gold", order_gold),
        ("mask exactness and soundness", mask_exactness),
        ("mask completeness", mask_completeness),
        ("harness metrics", harness_metrics),
        ("repair bound and monotonicity", repair_bound),
        ("report fixtures", report_fixtures),
        ("end-to-end determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {}", i + 1, why.lines().next().unwrap_or(""));
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
