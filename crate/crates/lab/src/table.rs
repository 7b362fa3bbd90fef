// Copyright 2026 The zo-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Append-only result tables with one schema shared by every subcommand:
//! `(point, metric, step, value, std_error)` rows, serialized as RFC-4180
//! CSV or JSON.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::LabError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Configuration point the row belongs to (e.g. `eta=0.5` or `mu=1e-3`).
    pub point: String,
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

impl Row {
    pub fn new(point: impl Into<String>, metric: impl Into<String>, value: f64) -> Self {
        Self { point: point.into(), metric: metric.into(), step: None, value, std_error: None }
    }

    pub fn at_step(mut self, step: u64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.std_error = Some(se);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub format_version: u32,
    pub rows: Vec<Row>,
}

impl Default for ResultTable {
    fn default() -> Self {
        Self::new()
    }
}

impl ResultTable {
    pub fn new() -> Self {
        Self { format_version: FORMAT_VERSION, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = Row>) {
        self.rows.extend(rows);
    }

    /// Rows for one metric, in insertion order.
    pub fn metric<'a>(&'a self, point: &'a str, metric: &'a str) -> impl Iterator<Item = &'a Row> {
        self.rows.iter().filter(move |r| r.point == point && r.metric == metric)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LabError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["point", "metric", "step", "value", "std_error"])?;
        for r in &self.rows {
            wtr.write_record([
                r.point.as_str(),
                r.metric.as_str(),
                &r.step.map(|s| s.to_string()).unwrap_or_default(),
                &format_f64(r.value),
                &r.std_error.map(format_f64).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, LabError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let get = |i: usize| record.get(i).unwrap_or("");
            let step = match get(2) {
                "" => None,
                s => Some(s.parse::<u64>().map_err(|e| LabError::Parse(format!("step: {e}")))?),
            };
            let value = parse_f64(get(3))?;
            let std_error = match get(4) {
                "" => None,
                s => Some(parse_f64(s)?),
            };
            rows.push(Row {
                point: get(0).to_string(),
                metric: get(1).to_string(),
                step,
                value,
                std_error,
            });
        }
        Ok(Self { format_version: FORMAT_VERSION, rows })
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), LabError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self, LabError> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn write_to_path(&self, path: &Path, format: OutputFormat) -> Result<(), LabError> {
        let file = std::fs::File::create(path)?;
        match format {
            OutputFormat::Csv => self.write_csv(file),
            OutputFormat::Json => self.write_json(file),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Shortest representation that parses back to the same bits.
fn format_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(s: &str) -> Result<f64, LabError> {
    s.parse::<f64>().map_err(|e| LabError::Parse(format!("value {s:?}: {e}")))
}
