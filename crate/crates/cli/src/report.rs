//! Report rendering: the fixed CSV schema and the run identifier.
//!
//! Every CSV report starts with a `# config: {...}` comment embedding the
//! full resolved configuration, followed by the fixed header
//! `run_id,mode,function_id,value,ci_halfwidth,n,seed,residuals`. Identical
//! resolved configurations produce byte-identical files.

use std::fmt::Write as _;

pub const CSV_HEADER: &str = "run_id,mode,function_id,value,ci_halfwidth,n,seed,residuals";

/// One row of the fixed schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub run_id: String,
    pub mode: String,
    pub function_id: String,
    pub value: f64,
    pub ci_halfwidth: f64,
    pub n: u64,
    pub seed: u64,
    pub residuals: f64,
}

impl Row {
    fn render(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:e}",
            self.run_id,
            self.mode,
            self.function_id,
            self.value,
            self.ci_halfwidth,
            self.n,
            self.seed,
            self.residuals
        )
    }
}

/// Render a full report: config comment, header, rows.
pub fn render_csv(config_json: &str, rows: &[Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config: {config_json}");
    let _ = writeln!(out, "{CSV_HEADER}");
    for row in rows {
        let _ = writeln!(out, "{}", row.render());
    }
    out
}

/// Parse a report produced by [`render_csv`]; comment lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<Row>, String> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(format!("line {}: unexpected header {line:?}", lineno + 1));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(format!(
                "line {}: expected 8 fields, got {}",
                lineno + 1,
                fields.len()
            ));
        }
        let num = |k: usize| -> Result<f64, String> {
            fields[k]
                .parse()
                .map_err(|e| format!("line {}: bad number {:?}: {e}", lineno + 1, fields[k]))
        };
        let int = |k: usize| -> Result<u64, String> {
            fields[k]
                .parse()
                .map_err(|e| format!("line {}: bad count {:?}: {e}", lineno + 1, fields[k]))
        };
        rows.push(Row {
            run_id: fields[0].to_string(),
            mode: fields[1].to_string(),
            function_id: fields[2].to_string(),
            value: num(3)?,
            ci_halfwidth: num(4)?,
            n: int(5)?,
            seed: int(6)?,
            residuals: num(7)?,
        });
    }
    if !saw_header {
        return Err("no CSV header found".into());
    }
    Ok(rows)
}

/// Deterministic run identifier: FNV-1a over the mode and the canonical
/// resolved config.
pub fn run_id(mode: &str, config_json: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in mode.bytes().chain(*b"\n").chain(config_json.bytes()) {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}
