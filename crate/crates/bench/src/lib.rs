//! Benchmark harness for structured generation in TOON and JSON: an
//! OpenAI-compatible client, the attempt-and-repair loop, a resumable
//! parallel runner, and the report tables and figures.

pub mod config;
pub mod harness;
pub mod llm;
pub mod report;
pub mod sim;

pub use config::{Config, ProviderConfig};
pub use harness::{
    compute_run_metrics, evaluate, run_benchmark, run_case, BenchConfig, BenchError, CaseOptions, CaseResult,
    CaseRow, CellId, Outcome, OutputPaths, Provider, RunResult,
};
pub use llm::{ChatModel, ChatRequest, ChatResponse, LlmError, OpenAiClient, Scripted, ScriptedModel};
pub use report::{build_report, emit_report, Report, ReportOptions};
pub use sim::{SimProfile, SimulatedProvider};
