use std::collections::BTreeMap;
use std::fmt::Write;

use cmr_core::bounds::Rational;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Bandwidth {
    pub downloaded: u64,
    pub bound_numerator: i64,
    pub bound_denominator: i64,
    /// `downloaded / bound` as `num/den`.
    pub ratio: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub per_helper: BTreeMap<usize, u64>,
}

impl Bandwidth {
    pub fn new(downloaded: u64, bound: Rational, per_helper: BTreeMap<usize, u64>) -> Self {
        let ratio = if *bound.numer() == 0 {
            "undefined".to_string()
        } else {
            let r = Rational::from_integer(downloaded as i64) / bound;
            format!("{}/{}", r.numer(), r.denom())
        };
        Self {
            downloaded,
            bound_numerator: *bound.numer(),
            bound_denominator: *bound.denom(),
            ratio,
            per_helper,
        }
    }

    pub fn exact(&self) -> bool {
        self.ratio == "1/1"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub bandwidth: Option<Bandwidth>,
    pub checks: Vec<Check>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            params: BTreeMap::new(),
            bandwidth: None,
            checks: Vec::new(),
            seed,
            files: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.params.insert(key.to_string(), v.into());
        self
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn detail(&mut self, key: &str, v: impl Serialize) {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(v).expect("serializable detail"),
        );
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable report");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={}", scalar(v)))
            .collect();
        let _ = writeln!(out, "params: {}", params.join(" "));
        let _ = writeln!(out, "seed: {}", self.seed);
        if let Some(b) = &self.bandwidth {
            let bound = if b.bound_denominator == 1 {
                b.bound_numerator.to_string()
            } else {
                format!("{}/{}", b.bound_numerator, b.bound_denominator)
            };
            let _ = writeln!(
                out,
                "downloaded: {}, bound: {bound}, ratio: {}",
                b.downloaded, b.ratio
            );
            if !b.per_helper.is_empty() {
                let per: Vec<String> = b
                    .per_helper
                    .iter()
                    .map(|(h, c)| format!("{h}:{c}"))
                    .collect();
                let _ = writeln!(out, "per helper: {}", per.join(" "));
            }
        }
        if !self.files.is_empty() {
            let _ = writeln!(out, "files: {}", self.files.join(" "));
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {} {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        for (name, v) in &self.details {
            let _ = writeln!(out, "[{name}]");
            render(&mut out, v);
        }
        out
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn render(out: &mut String, v: &Value) {
    match v {
        Value::Array(rows) if rows.iter().all(Value::is_object) && !rows.is_empty() => {
            let cols: Vec<&String> = rows[0].as_object().unwrap().keys().collect();
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    cols.iter()
                        .map(|c| r.get(c.as_str()).map(scalar).unwrap_or_default())
                        .collect()
                })
                .collect();
            let widths: Vec<usize> = cols
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    cells
                        .iter()
                        .map(|r| r[i].len())
                        .chain([c.len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |vals: Vec<&str>| {
                vals.iter()
                    .zip(&widths)
                    .map(|(v, w)| format!("{v:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let _ = writeln!(
                out,
                "  {}",
                line(cols.iter().map(|c| c.as_str()).collect()).trim_end()
            );
            for r in &cells {
                let _ = writeln!(
                    out,
                    "  {}",
                    line(r.iter().map(String::as_str).collect()).trim_end()
                );
            }
        }
        Value::Object(map) => {
            for (k, v) in map {
                let _ = writeln!(out, "  {k}: {}", scalar(v));
            }
        }
        other => {
            let _ = writeln!(out, "  {}", scalar(other));
        }
    }
}
