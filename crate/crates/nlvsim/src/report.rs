//! Run reports in two renderings: a human table and a line-oriented
//! machine-readable key-value document.
//!
//! The machine format is versioned and diff-friendly:
//!
//! ```text
//! schema nlvsim-report/1
//! generator nlvsim 0.1.0
//! command signaling-demo
//! seed 7
//! ...
//! ```
//!
//! One `key value` pair per line; keys are kebab-case without spaces,
//! values use Rust's shortest-roundtrip float formatting. For a fixed run
//! spec (command, flags, seed) the rendering is byte-identical across
//! runs.

use std::fmt::Display;
use std::fmt::Write as _;

/// Machine-format schema identifier.
pub const SCHEMA: &str = "nlvsim-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Machine,
}

/// Ordered key-value report for one run.
#[derive(Debug, Clone)]
pub struct Report {
    command: String,
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        debug_assert!(
            !key.contains(char::is_whitespace),
            "report keys must not contain whitespace: {key}"
        );
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Machine => self.render_machine(),
            OutputFormat::Table => self.render_table(),
        }
    }

    fn render_machine(&self) -> String {
        let mut out = String::new();
        writeln!(out, "schema {SCHEMA}").unwrap();
        writeln!(out, "generator nlvsim {}", crate::VERSION).unwrap();
        writeln!(out, "command {}", self.command).unwrap();
        for (k, v) in &self.entries {
            writeln!(out, "{k} {v}").unwrap();
        }
        out
    }

    fn render_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "nlvsim {} — {}", crate::VERSION, self.command).unwrap();
        let width = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.entries {
            writeln!(out, "  {k:width$}  {v}").unwrap();
        }
        out
    }
}
