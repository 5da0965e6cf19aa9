//! Report assembly and rendering.
//!
//! Result tables are fully deterministic for identical (scenario, flags,
//! seeds); wall-clock timings are carried alongside but excluded from the
//! deterministic section.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            title: title.into(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let row: Vec<String> = cells.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// RFC-4180 rendering of header plus rows.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        writer.write_record(&self.columns).expect("csv header");
        for row in &self.rows {
            writer.write_record(row).expect("csv row");
        }
        String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv utf8")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    /// Echo of the invoked command and its flags.
    pub command: String,
    pub scenario: Option<String>,
    /// Canonical hash of the scenario this report was computed from.
    pub config_hash: Option<String>,
    pub tables: Vec<Table>,
    pub checks: Vec<CheckLine>,
    /// Structured payloads (e.g. full shill reports) for JSON consumers.
    #[serde(skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub artifacts: std::collections::BTreeMap<String, serde_json::Value>,
    /// Wall-clock timings; informational only, never part of the
    /// deterministic section.
    pub timings_ms: Vec<(String, u128)>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            scenario: None,
            config_hash: None,
            tables: Vec::new(),
            checks: Vec::new(),
            artifacts: std::collections::BTreeMap::new(),
            timings_ms: Vec::new(),
        }
    }

    pub fn artifact(&mut self, name: impl Into<String>, value: serde_json::Value) {
        self.artifacts.insert(name.into(), value);
    }

    pub fn for_scenario(
        command: impl Into<String>,
        name: impl Into<String>,
        hash: impl Into<String>,
    ) -> Self {
        let mut r = Report::new(command);
        r.scenario = Some(name.into());
        r.config_hash = Some(hash.into());
        r
    }

    pub fn push_table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckLine {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn timing(&mut self, name: impl Into<String>, ms: u128) {
        self.timings_ms.push((name.into(), ms));
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The deterministic result-table section: identical inputs yield
    /// byte-identical output.
    pub fn tables_text(&self) -> String {
        let mut out = String::new();
        for table in &self.tables {
            out.push_str(&format!("## {}\n", table.title));
            out.push_str(&table.to_csv());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// First table as bare CSV (the per-command primary contract).
    pub fn primary_csv(&self) -> String {
        self.tables
            .first()
            .map(Table::to_csv)
            .unwrap_or_default()
    }

    pub fn render_human(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command));
        if let Some(name) = &self.scenario {
            out.push_str(&format!("scenario: {name}\n"));
        }
        if let Some(hash) = &self.config_hash {
            out.push_str(&format!("config_hash: {hash}\n"));
        }
        for table in &self.tables {
            out.push('\n');
            out.push_str(&format!("{}\n", table.title));
            let widths: Vec<usize> = table
                .columns
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    table
                        .rows
                        .iter()
                        .map(|r| r[i].len())
                        .chain(std::iter::once(c.len()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let fmt_row = |cells: &[String]| -> String {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_owned()
            };
            out.push_str(&format!("{}\n", fmt_row(&table.columns)));
            for row in &table.rows {
                out.push_str(&format!("{}\n", fmt_row(row)));
            }
        }
        if !self.checks.is_empty() {
            out.push('\n');
            for check in &self.checks {
                let status = if check.pass { "PASS" } else { "FAIL" };
                if check.detail.is_empty() {
                    out.push_str(&format!("[{status}] {}\n", check.name));
                } else {
                    out.push_str(&format!("[{status}] {}: {}\n", check.name, check.detail));
                }
            }
        }
        if !self.timings_ms.is_empty() {
            out.push('\n');
            for (name, ms) in &self.timings_ms {
                out.push_str(&format!("timing {name}: {ms} ms\n"));
            }
        }
        out
    }
}
