//! Deterministic report structure. Top-level JSON keys are fixed and
//! serialized in alphabetical order; nested maps are BTreeMaps so identical
//! inputs give byte-identical output.

use std::collections::BTreeMap;

use serde::Serialize;

use pfaffian_core::Point;

#[derive(Debug, Serialize)]
pub struct Report {
    pub characters: BTreeMap<String, Vec<usize>>,
    pub command: String,
    pub dimensions: BTreeMap<String, i64>,
    pub errors: Vec<String>,
    pub points: Vec<ReportPoint>,
    pub seed: u64,
    pub verdicts: BTreeMap<String, bool>,
    pub witnesses: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ReportPoint {
    pub chart: String,
    pub label: String,
    pub values: BTreeMap<String, String>,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Report {
            characters: BTreeMap::new(),
            command: command.to_string(),
            dimensions: BTreeMap::new(),
            errors: Vec::new(),
            points: Vec::new(),
            seed,
            verdicts: BTreeMap::new(),
            witnesses: Vec::new(),
        }
    }

    pub fn push_point(&mut self, label: impl Into<String>, p: &Point) {
        let values = p
            .chart()
            .coords()
            .iter()
            .zip(p.values())
            .map(|(c, v)| (c.name().to_string(), v.to_string()))
            .collect();
        self.points.push(ReportPoint {
            chart: p.chart().name().to_string(),
            label: label.into(),
            values,
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// Human-readable rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command: {} (seed {})\n", self.command, self.seed));
        for (k, v) in &self.verdicts {
            out.push_str(&format!("  {k}: {v}\n"));
        }
        for (k, v) in &self.dimensions {
            out.push_str(&format!("  {k} = {v}\n"));
        }
        for (k, v) in &self.characters {
            let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("  {k} = ({})\n", s.join(", ")));
        }
        for w in &self.witnesses {
            out.push_str(&format!("  note: {w}\n"));
        }
        for e in &self.errors {
            out.push_str(&format!("  error: {e}\n"));
        }
        out
    }
}
