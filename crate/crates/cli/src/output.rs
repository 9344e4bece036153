use std::fs;
use std::io::Write;
use std::path::Path;

use morpi::eval::{ResultTable, Summary};
use morpi::Error;
use serde::Serialize;

#[derive(Serialize)]
struct Row<'a> {
    label: &'a str,
    method: Option<String>,
    error_m: Option<f64>,
    error_pct: Option<f64>,
    endpoint_x: Option<f64>,
    endpoint_y: Option<f64>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
pub struct TableReport<'a> {
    pub title: String,
    rows: Vec<Row<'a>>,
    pub summary: Option<Summary>,
}

impl<'a> TableReport<'a> {
    pub fn new(title: impl Into<String>, table: &'a ResultTable) -> Self {
        let rows = table
            .rows
            .iter()
            .map(|(label, r)| match r {
                Ok(r) => Row {
                    label,
                    method: Some(r.method.to_string()),
                    error_m: Some(r.error_m),
                    error_pct: Some(r.error_pct),
                    endpoint_x: Some(r.endpoint[0]),
                    endpoint_y: Some(r.endpoint[1]),
                    error: None,
                },
                Err(e) => Row { label, method: None, error_m: None, error_pct: None, endpoint_x: None, endpoint_y: None, error: Some(e) },
            })
            .collect();
        Self { title: title.into(), rows, summary: table.summary() }
    }

    pub fn print(&self) {
        println!("{}", self.title);
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        println!("  {:<width$}  {:>10}  {:>9}", "run", "error [m]", "error [%]");
        for r in &self.rows {
            match (r.error_m, r.error_pct, r.error) {
                (Some(m), Some(p), _) => println!("  {:<width$}  {m:>10.3}  {p:>9.2}", r.label),
                (_, _, e) => println!("  {:<width$}  failed: {}", r.label, e.unwrap_or("unknown")),
            }
        }
        match &self.summary {
            Some(s) => println!(
                "  {:<width$}  {:>10.3}  {:>9.2}   (n = {}, var |e| = {:.4} m^2, var endpoint = {:.4} m^2)",
                "mean", s.mean_error_m, s.mean_error_pct, s.runs, s.error_variance_m2, s.endpoint_variance_m2
            ),
            None => println!("  no successful runs"),
        }
    }

    fn write_csv<W: Write>(&self, mut out: W) -> Result<(), Error> {
        writeln!(out, "label,method,error_m,error_pct,endpoint_x,endpoint_y,error")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            let err = r.error.map_or(String::new(), |e| format!("\"{}\"", e.replace('"', "'")));
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.label,
                r.method.as_deref().unwrap_or(""),
                opt(r.error_m),
                opt(r.error_pct),
                opt(r.endpoint_x),
                opt(r.endpoint_y),
                err
            )?;
        }
        Ok(())
    }

    /// JSON when `path` ends in `.json`, CSV otherwise.
    pub fn save(&self, path: &Path) -> Result<(), Error> {
        if is_json(path) {
            write_json(path, self)
        } else {
            self.write_csv(fs::File::create(path)?)
        }
    }
}

pub fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Structure(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// File-name-safe version of a run label.
pub fn stem(label: &str) -> String {
    let base = label.rsplit_once('.').map_or(label, |(s, _)| s);
    base.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
