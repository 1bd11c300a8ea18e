//! Prompt rendering for the three tracks and for repair attempts.
//!
//! Templates are plain text with `{name}` placeholders. The built-in set is
//! embedded; [`Prompts::from_dir`] replaces any of `json.txt`, `toon.txt` and
//! `repair.txt` found in a directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::cases::CaseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Track {
    /// Plain JSON.
    J,
    /// JSON with a `json_object` response format.
    Jso,
    /// TOON with the universal in-context example.
    T,
}

impl Track {
    pub const ALL: [Track; 3] = [Track::J, Track::Jso, Track::T];

    pub fn is_json(self) -> bool {
        matches!(self, Track::J | Track::Jso)
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Track::J => "J",
            Track::Jso => "JSO",
            Track::T => "T",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown track `{0}` (expected J, JSO or T)")]
pub struct UnknownTrack(pub String);

impl FromStr for Track {
    type Err = UnknownTrack;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "J" => Ok(Track::J),
            "JSO" => Ok(Track::Jso),
            "T" => Ok(Track::T),
            _ => Err(UnknownTrack(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("a repair prompt needs a non-empty error text")]
    EmptyErrorText,
    #[error("cannot read template {}: {source}", path.display())]
    Template {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Indentation of the task lines under `TASK:` in the TOON prompt.
const TOON_TASK_INDENT: &str = "        ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompts {
    json: String,
    toon: String,
    repair: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Prompts {
            json: include_str!("../templates/json.txt").to_string(),
            toon: include_str!("../templates/toon.txt").to_string(),
            repair: include_str!("../templates/repair.txt").to_string(),
        }
    }
}

impl Prompts {
    /// Built-in templates, overridden by whichever template files exist in
    /// `dir`.
    pub fn from_dir(dir: &Path) -> Result<Prompts, PromptError> {
        let mut prompts = Prompts::default();
        for (name, slot) in [
            ("json.txt", &mut prompts.json),
            ("toon.txt", &mut prompts.toon),
            ("repair.txt", &mut prompts.repair),
        ] {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(text) => *slot = text,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(source) => return Err(PromptError::Template { path, source }),
            }
        }
        Ok(prompts)
    }

    /// The first-attempt prompt. J and JSO share one text.
    pub fn render(&self, case: &CaseSpec, track: Track) -> String {
        match track {
            Track::J | Track::Jso => fill(
                &self.json,
                &[
                    ("lead", case.lead),
                    ("details", case.details),
                    ("fields", case.fields),
                ],
            ),
            Track::T => {
                let task = format!("{} with fields: {}.\n{}", case.lead, case.fields, case.details);
                let indented: Vec<String> = task
                    .lines()
                    .map(|l| format!("{TOON_TASK_INDENT}{l}"))
                    .collect();
                fill(&self.toon, &[("task", &indented.join("\n"))])
            }
        }
    }

    /// The original prompt followed by the latest failed output and its
    /// errors. Earlier attempts are not carried forward.
    pub fn render_repair(
        &self,
        case: &CaseSpec,
        track: Track,
        previous_output: &str,
        error_text: &str,
    ) -> Result<String, PromptError> {
        if error_text.trim().is_empty() {
            return Err(PromptError::EmptyErrorText);
        }
        let instruction = if track.is_json() {
            "Fix the errors listed above and return the corrected full document as JSON."
        } else {
            "Fix the errors listed above and return the corrected full document as a single ```toon code block, following the TOON RULES."
        };
        Ok(fill(
            &self.repair,
            &[
                ("prompt", &self.render(case, track)),
                ("previous_output", previous_output),
                ("errors", error_text),
                ("instruction", instruction),
            ],
        ))
    }
}

pub fn render_prompt(case: &CaseSpec, track: Track) -> String {
    Prompts::default().render(case, track)
}

pub fn render_repair_prompt(
    case: &CaseSpec,
    track: Track,
    previous_output: &str,
    error_text: &str,
) -> Result<String, PromptError> {
    Prompts::default().render_repair(case, track, previous_output, error_text)
}

/// Single-pass substitution: inserted text is never rescanned, and braces
/// that do not name a variable are kept literally.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (*v, close))
        });
        match hit {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{builtin_cases, case_by_name};

    #[test]
    fn json_prompt_is_the_task_body() {
        for case in builtin_cases() {
            assert_eq!(render_prompt(&case, Track::J), case.task_body());
            assert_eq!(render_prompt(&case, Track::J), render_prompt(&case, Track::Jso));
        }
    }

    #[test]
    fn order_json_prompt_text() {
        let order = case_by_name("order").unwrap();
        assert_eq!(
            render_prompt(&order, Track::J),
            "Create an order record:\n\
             - Order ID: 101\n\
             - Customer: Ada (ID: 9)\n\
             - Items:\n  \
             * Product A1: quantity 2, price $9.99 each\n  \
             * Product B2: quantity 1, price $14.50 each\n\
             \n\
             Return as JSON with fields for id, customer (with id and name), \n\
             and items array (with sku, qty, price)."
        );
    }

    #[test]
    fn toon_prompt_tail() {
        let order = case_by_name("order").unwrap();
        let p = render_prompt(&order, Track::T);
        assert!(p.starts_with("You are to produce output STRICTLY in TOON format.\n        TOON RULES:\n"));
        assert!(p.contains("        - [N] MUST equal actual row/item count\n"));
        assert!(p.ends_with(
            "        TASK:\n\
             \x20       Create an order record with fields: id, customer (with id and name), \n\
             \x20       and items array (with sku, qty, price).\n\
             \x20       - Order ID: 101\n\
             \x20       - Customer: Ada (ID: 9)\n\
             \x20       - Items:\n\
             \x20         * Product A1: quantity 2, price $9.99 each\n\
             \x20         * Product B2: quantity 1, price $14.50 each\n"
        ));
    }

    #[test]
    fn toon_prompts_share_everything_before_the_task() {
        let prompts: Vec<String> = builtin_cases()
            .iter()
            .map(|c| render_prompt(c, Track::T))
            .collect();
        let prefix = |p: &str| p[..p.find("TASK:\n").unwrap()].to_string();
        assert!(prompts.iter().all(|p| prefix(p) == prefix(&prompts[0])));
    }

    #[test]
    fn repair_prompt_sections() {
        let order = case_by_name("order").unwrap();
        let bad = "```toon\nitems[3]{sku,qty,price}:\n```";
        let p = render_repair_prompt(&order, Track::T, bad, "line 1, column 7: count-mismatch").unwrap();
        assert!(p.starts_with(&render_prompt(&order, Track::T)));
        assert!(p.contains(&format!("PREVIOUS OUTPUT:\n{bad}\n\nERRORS:\nline 1, column 7: count-mismatch\n")));
        assert!(p.contains("TOON RULES"));
        let j = render_repair_prompt(&order, Track::J, "{}", "missing field `id`").unwrap();
        assert!(j.ends_with("as JSON."));
    }

    #[test]
    fn repair_prompt_requires_errors() {
        let order = case_by_name("order").unwrap();
        assert!(matches!(
            render_repair_prompt(&order, Track::J, "{}", " "),
            Err(PromptError::EmptyErrorText)
        ));
    }

    #[test]
    fn placeholders_inside_values_are_not_expanded() {
        assert_eq!(
            fill("{a}-{b}-{c}-{}", &[("a", "{b}"), ("b", "x")]),
            "{b}-x-{c}-{}"
        );
    }

    #[test]
    fn templates_can_be_overridden() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("json.txt"), "{lead} / {fields}").unwrap();
        let prompts = Prompts::from_dir(dir.path()).unwrap();
        let order = case_by_name("order").unwrap();
        assert!(prompts.render(&order, Track::J).starts_with("Create an order record / id,"));
        assert_eq!(prompts.render(&order, Track::T), render_prompt(&order, Track::T));
    }

    #[test]
    fn track_names() {
        for t in Track::ALL {
            assert_eq!(t.to_string().parse::<Track>().unwrap(), t);
        }
        assert!("x".parse::<Track>().is_err());
    }
}
