//! `toonbench`: encode, decode and validate TOON, write gold files, run the
//! benchmark, build reports, and simulate constrained decoding.
//!
//! Exit status: 0 on success, 1 when the input is rejected or a run fails,
//! 2 for usage and configuration errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toonbench_core::grammar::{constrained_generate_cached, MaskCache, Scores};
use toonbench_core::{
    builtin_cases, case_by_name, encode_toon, extract_toon_block, init_state, parse_json,
    toon_to_json, write_gold, Mode, Prompts, Track, Vocabulary,
};
use toonbench_harness::report::{build_report, emit_report, read_results, Group, ReportOptions};
use toonbench_harness::{evaluate, run_benchmark, BenchError, CaseOptions, Config, Outcome, OutputPaths};

#[derive(Parser)]
#[command(name = "toonbench", version, about = "TOON vs JSON structured-generation benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a JSON document to TOON.
    Encode {
        input: PathBuf,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Convert a TOON document (optionally inside a ```toon fence) to canonical JSON.
    Decode {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a JSON or TOON answer against a case's schema and gold data.
    Validate {
        input: PathBuf,
        /// Case name: users, order, company or invoice.
        #[arg(long)]
        case: String,
        /// Input format; guessed from the file extension if omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Write `<case>.gold.json` and `<case>.gold.toon` for every case.
    Gold {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the benchmark described by a TOML config.
    ///
    /// API keys are read from the environment variable named by the
    /// config's `provider.api_key_env`.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Directory for results.csv and attempts.jsonl. Existing results are resumed.
        #[arg(long)]
        out: PathBuf,
        /// Directory with json.txt, toon.txt or repair.txt overriding the built-in prompts.
        #[arg(long)]
        prompts: Option<PathBuf>,
    },
    /// Build tables and efficiency figures from a results CSV.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario-group table row, as `name=case,case`. Repeatable; replaces the defaults.
        #[arg(long = "scenario-group", value_parser = parse_group)]
        scenario_groups: Vec<Group>,
        /// Efficiency figure group, as `name=case,case`. Repeatable; replaces the defaults.
        #[arg(long = "figure-group", value_parser = parse_group)]
        figure_groups: Vec<Group>,
    },
    /// Generate a document under the grammar mask with a seeded random policy.
    MaskSim {
        #[arg(long, value_enum)]
        mode: SimMode,
        /// Constrain TOON output to this case's schema.
        #[arg(long)]
        case: Option<String>,
        /// Vocabulary fixture (`id<TAB>hex` lines); the bundled toy vocabulary if omitted.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        max_tokens: usize,
        /// Write the per-step log here instead of stderr.
        #[arg(long)]
        steps: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Toon,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimMode {
    Toon,
    Json,
}

fn parse_group(s: &str) -> Result<Group, String> {
    let (name, cases) = s.split_once('=').ok_or("expected name=case,case")?;
    let cases: Vec<&str> = cases.split(',').map(str::trim).filter(|c| !c.is_empty()).collect();
    if name.is_empty() || cases.is_empty() {
        return Err("expected name=case,case".into());
    }
    Ok(Group::new(name, name, &cases))
}

/// An error plus the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 1, error: e.into() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("cannot write {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn case(name: &str) -> Result<toonbench_core::CaseSpec, Failure> {
    case_by_name(name).ok_or_else(|| usage(anyhow!("unknown case `{name}` (expected users, order, company or invoice)")))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Encode { input, output } => {
            let value = parse_json(&read(&input)?).with_context(|| format!("{}: invalid JSON", input.display()))?;
            emit(output.as_deref(), &encode_toon(&value)?)
        }
        Command::Decode { input, output } => {
            let text = read(&input)?;
            let body = if text.contains("```toon") { extract_toon_block(&text)? } else { text.as_str() };
            let json = toon_to_json(body)
                .with_context(|| format!("{}: invalid TOON", input.display()))?;
            emit(output.as_deref(), &json)
        }
        Command::Validate { input, case: name, format } => {
            let case = case(&name)?;
            let format = match format {
                Some(f) => f,
                None => match input.extension().and_then(|e| e.to_str()) {
                    Some("json") => Format::Json,
                    Some("toon") => Format::Toon,
                    _ => return Err(usage(anyhow!("cannot tell the format of {}; pass --format", input.display()))),
                },
            };
            let track = match format {
                Format::Json => Track::J,
                Format::Toon => Track::T,
            };
            let eval = evaluate(&case, track, &read(&input)?);
            if eval.outcome == Outcome::Success {
                println!("{}: valid, matches the {} gold data", input.display(), case.name);
                Ok(())
            } else {
                Err(anyhow!("{}", eval.error.unwrap_or_default())
                    .context(format!("{} does not satisfy case {}", input.display(), case.name))
                    .into())
            }
        }
        Command::Gold { out } => {
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            for case in builtin_cases() {
                for path in write_gold(&case, &out)? {
                    println!("{}", path.display());
                }
            }
            Ok(())
        }
        Command::Bench { config, out, prompts } => {
            let cfg = Config::load(&config).map_err(|e| usage(e.into()))?;
            let provider = cfg.provider().map_err(|e| usage(e.into()))?;
            let prompts = match prompts {
                Some(dir) => Prompts::from_dir(&dir).map_err(|e| usage(e.into()))?,
                None => Prompts::default(),
            };
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            let opts = CaseOptions {
                prompts,
                max_repairs: cfg.bench.max_repairs,
                max_tokens: cfg.bench.max_tokens,
            };
            let paths = OutputPaths::in_dir(&out);
            let runs = run_benchmark(&cfg.bench, provider.as_ref(), &opts, &paths).map_err(|e| match e {
                BenchError::Config(_) => usage(e.into()),
                e => e.into(),
            })?;
            let rows: usize = runs.iter().map(|r| r.rows.len()).sum();
            println!("{rows} case results in {}", paths.csv.display());
            println!("attempt log in {}", paths.attempts.display());
            Ok(())
        }
        Command::Report {
            results,
            out,
            scenario_groups,
            figure_groups,
        } => {
            let mut opts = ReportOptions::default();
            if !scenario_groups.is_empty() {
                opts.scenario_groups = scenario_groups;
            }
            if !figure_groups.is_empty() {
                opts.efficiency_groups = figure_groups;
            }
            let rows = read_results(&results)?;
            let report = build_report(&rows, &opts)?;
            for path in emit_report(&report, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::MaskSim {
            mode,
            case: name,
            vocab,
            seed,
            max_tokens,
            steps,
        } => {
            let vocab = match vocab {
                Some(p) => Vocabulary::load(&p).map_err(|e| usage(e.into()))?,
                None => Vocabulary::toy(),
            };
            let mode = match mode {
                SimMode::Toon => Mode::Toon,
                SimMode::Json => Mode::Json,
            };
            let schema = name.as_deref().map(case).transpose()?.map(|c| c.schema);
            let state = init_state(mode, schema.as_ref()).map_err(|e| usage(e.into()))?;
            let mut policy = random_policy(&vocab, mode, seed);
            let mut cache = MaskCache::default();
            let g = constrained_generate_cached(&mut policy, &vocab, &state, max_tokens, &mut cache)?;
            let mut log = String::from("step\ttoken\tallowed\taccepting\tbytes\n");
            for (i, s) in g.steps.iter().enumerate() {
                let (id, bytes) = match s.token {
                    Some(id) => (id.to_string(), format!("{:?}", String::from_utf8_lossy(vocab.token(id)))),
                    None => ("eos".into(), String::new()),
                };
                let _ = writeln!(log, "{i}\t{id}\t{}\t{}\t{bytes}", s.allowed, s.accepting);
            }
            match steps {
                Some(p) => fs::write(&p, log).with_context(|| format!("cannot write {}", p.display()))?,
                None => eprint!("{log}"),
            }
            if mode == Mode::Json && parse_json(&g.text).is_err() {
                return Err(anyhow!("generated JSON does not parse").into());
            }
            print!("{}", g.text);
            if !g.text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

/// Random scores favouring structural tokens and avoiding digits, with a
/// growing pull towards closing bytes so documents finish. End-of-sequence
/// wins as soon as the document is complete. JSON whitespace is avoided since
/// it is never required.
fn random_policy(vocab: &Vocabulary, mode: Mode, seed: u64) -> impl FnMut(&[u8]) -> Scores + '_ {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move |done: &[u8]| {
        let pressure = (done.len() as f64 / 100.0).min(3.0);
        Scores {
            tokens: (0..vocab.len() as u32)
                .map(|id| {
                    let t = vocab.token(id);
                    let mut s: f64 = rng.random();
                    if t.first().is_some_and(|b| b"\n :,[]{}-\"".contains(b)) {
                        s += 0.5;
                    }
                    if t.first().is_some_and(|b| b"}]\"\n".contains(b)) {
                        s += pressure;
                    }
                    if t.iter().any(u8::is_ascii_digit) {
                        s -= 0.5;
                    }
                    if mode == Mode::Json && t.first().is_some_and(u8::is_ascii_whitespace) {
                        s -= 2.0 + pressure;
                    }
                    s
                })
                .collect(),
            eos: 10.0,
        }
    }
}
