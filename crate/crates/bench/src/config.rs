//! TOML benchmark configuration.
//!
//! ```toml
//! models = ["model-a", "model-b"]
//! runs = 10
//! tracks = ["J", "JSO", "T"]
//! cases = ["users", "order", "company", "invoice"]
//! max_repairs = 3
//! parallelism = 4
//!
//! [provider]
//! kind = "openai"
//! endpoint = "https://api.example.com/v1"
//! api_key_env = "OPENAI_API_KEY"
//! ```
//!
//! or, offline, `kind = "simulated"` with `seed`, `one_shot_rate` and
//! `repair_rate`.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use crate::harness::{BenchConfig, BenchError, SharedModel, Provider, DEFAULT_MAX_REPAIRS};
use crate::llm::{ClientOptions, OpenAiClient};
use crate::sim::{SimProfile, SimulatedProvider};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    models: Vec<String>,
    #[serde(default = "default_runs")]
    runs: u32,
    #[serde(default)]
    tracks: Option<Vec<String>>,
    #[serde(default)]
    cases: Option<Vec<String>>,
    #[serde(default = "default_repairs")]
    max_repairs: u32,
    #[serde(default = "default_parallelism")]
    parallelism: usize,
    #[serde(default)]
    max_tokens: Option<u32>,
    provider: ProviderConfig,
}

fn default_runs() -> u32 {
    10
}

fn default_repairs() -> u32 {
    DEFAULT_MAX_REPAIRS
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    Openai {
        endpoint: String,
        /// Environment variable holding the API key; unset means no key.
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        retries: u32,
    },
    Simulated {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_one_shot")]
        one_shot_rate: f64,
        #[serde(default = "default_repair")]
        repair_rate: f64,
    },
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    3
}

fn default_one_shot() -> f64 {
    SimProfile::default().one_shot_rate
}

fn default_repair() -> f64 {
    SimProfile::default().repair_rate
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub bench: BenchConfig,
    pub provider: ProviderConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, BenchError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        let mut bench = BenchConfig {
            models: raw.models,
            runs: raw.runs,
            max_repairs: raw.max_repairs,
            parallelism: raw.parallelism,
            max_tokens: raw.max_tokens,
            ..BenchConfig::default()
        };
        if let Some(tracks) = raw.tracks {
            bench.tracks = tracks
                .iter()
                .map(|t| t.parse().map_err(|e: toonbench_core::prompts::UnknownTrack| BenchError::Config(e.to_string())))
                .collect::<Result<_, _>>()?;
        }
        if let Some(cases) = raw.cases {
            bench.cases = cases;
        }
        bench.validate()?;
        if let ProviderConfig::Simulated {
            one_shot_rate,
            repair_rate,
            ..
        } = raw.provider
        {
            if !(0.0..=1.0).contains(&one_shot_rate) || !(0.0..=1.0).contains(&repair_rate) {
                return Err(BenchError::Config("simulated rates must lie in [0, 1]".into()));
            }
        }
        Ok(Config {
            bench,
            provider: raw.provider,
        })
    }

    pub fn load(path: &Path) -> Result<Config, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text)
    }

    /// Builds the provider. Fails if a named API key variable is unset.
    pub fn provider(&self) -> Result<Box<dyn Provider>, BenchError> {
        match &self.provider {
            ProviderConfig::Openai {
                endpoint,
                api_key_env,
                timeout_secs,
                retries,
            } => {
                let api_key = match api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        BenchError::Config(format!("environment variable `{var}` is not set"))
                    })?),
                    None => None,
                };
                let options = ClientOptions {
                    api_key,
                    timeout: Duration::from_secs(*timeout_secs),
                    retries: *retries,
                    ..ClientOptions::new(endpoint.clone())
                };
                let client = OpenAiClient::new(options).map_err(|e| BenchError::Config(e.to_string()))?;
                Ok(Box::new(SharedModel(Arc::new(client))))
            }
            ProviderConfig::Simulated {
                seed,
                one_shot_rate,
                repair_rate,
            } => Ok(Box::new(SimulatedProvider::new(
                *seed,
                SimProfile {
                    one_shot_rate: *one_shot_rate,
                    repair_rate: *repair_rate,
                },
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use toonbench_core::Track;

    #[test]
    fn defaults_fill_in() {
        let c = Config::parse("models = [\"a\"]\n[provider]\nkind = \"simulated\"\n").unwrap();
        assert_eq!(c.bench.runs, 10);
        assert_eq!(c.bench.tracks, Track::ALL);
        assert_eq!(c.bench.cases.len(), 4);
        assert_eq!(c.bench.max_repairs, 3);
        assert!(c.provider().is_ok());
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            "models = []\n[provider]\nkind = \"simulated\"\n",
            "models = [\"a\"]\ncases = [\"nope\"]\n[provider]\nkind = \"simulated\"\n",
            "models = [\"a\"]\ntracks = [\"X\"]\n[provider]\nkind = \"simulated\"\n",
            "models = [\"a\"]\nrunz = 3\n[provider]\nkind = \"simulated\"\n",
            "models = [\"a\"]\n[provider]\nkind = \"simulated\"\none_shot_rate = 2.0\n",
            "models = [\"a\"]\n[provider]\nkind = \"carrier-pigeon\"\n",
            "models = [\"a\"]\nparallelism = 0\n[provider]\nkind = \"simulated\"\n",
        ] {
            assert!(matches!(Config::parse(text), Err(BenchError::Config(_))), "{text}");
        }
    }

    #[test]
    fn missing_api_key_variable_is_a_config_error() {
        let c = Config::parse(
            "models = [\"a\"]\n[provider]\nkind = \"openai\"\nendpoint = \"http://127.0.0.1:9\"\napi_key_env = \"TOONBENCH_SURELY_UNSET_VAR\"\n",
        )
        .unwrap();
        assert!(matches!(c.provider(), Err(BenchError::Config(_))));
    }
}
