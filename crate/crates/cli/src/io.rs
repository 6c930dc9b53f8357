//! File formats: grid CSV, key = value reports and plot-ready tables.
//!
//! Every file starts with `#` comment lines recording the config hash and the
//! crate versions that produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use scalcurv::grid::{GridFunction, GridSpec};
use scalcurv::{Error, Result};

pub const CLI_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The provenance lines shared by every output file.
pub fn provenance(config_hash: &str) -> String {
    format!(
        "# scalcurv-cli {CLI_VERSION}\n# scalcurv {}\n# config_sha256 = {config_hash}\n",
        scalcurv::VERSION
    )
}

fn fmt_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Grid CSV: provenance, then `# dim`, `# spacing`, `# origin`, `# extent`,
/// `# shape`, then the values row-major, one row (last axis) per line, with
/// 17 significant digits.
pub fn grid_to_csv(g: &GridFunction, config_hash: &str) -> String {
    let spec = g.spec();
    let mut s = provenance(config_hash);
    let _ = writeln!(s, "# dim = {}", spec.dim());
    let _ = writeln!(s, "# spacing = {:.16e}", spec.spacing());
    let _ = writeln!(
        s,
        "# origin = {}",
        spec.origin().iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        s,
        "# extent = {}",
        spec.upper().iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(s, "# shape = {}", fmt_list(spec.shape()));
    let row = *spec.shape().last().expect("grids have dim >= 2");
    for chunk in g.values().chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn grid_from_csv(text: &str) -> Result<GridFunction> {
    let mut dim = None;
    let mut spacing = None;
    let mut origin = None;
    let mut shape: Option<Vec<usize>> = None;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let Some((k, v)) = rest.split_once('=') else { continue };
            let (k, v) = (k.trim(), v.trim());
            let floats = |field: &str| -> Result<Vec<f64>> {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| Error::parse(field, e.to_string())))
                    .collect()
            };
            match k {
                "dim" => dim = Some(v.parse::<usize>().map_err(|e| Error::parse("dim", e.to_string()))?),
                "spacing" => spacing = Some(v.parse::<f64>().map_err(|e| Error::parse("spacing", e.to_string()))?),
                "origin" => origin = Some(floats("origin")?),
                "shape" => {
                    shape = Some(
                        v.split(',')
                            .map(|t| t.trim().parse::<usize>().map_err(|e| Error::parse("shape", e.to_string())))
                            .collect::<Result<_>>()?,
                    )
                }
                _ => {}
            }
            continue;
        }
        for t in line.split(',') {
            values.push(
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(format!("grid line {}", lineno + 1), e.to_string()))?,
            );
        }
    }
    let missing = |f: &str| Error::parse(f, "missing from grid header");
    let shape = shape.ok_or_else(|| missing("shape"))?;
    let dim = dim.ok_or_else(|| missing("dim"))?;
    if shape.len() != dim {
        return Err(Error::parse("shape", format!("expected {dim} entries")));
    }
    let spec = GridSpec::new(
        spacing.ok_or_else(|| missing("spacing"))?,
        origin.ok_or_else(|| missing("origin"))?,
        shape,
    )?;
    GridFunction::new(spec, values)
}

pub fn write_grid(path: &Path, g: &GridFunction, config_hash: &str) -> Result<()> {
    fs::write(path, grid_to_csv(g, config_hash))?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<GridFunction> {
    grid_from_csv(&fs::read_to_string(path)?)
}

/// A plot-ready table with a header row.
pub fn table_to_csv(config_hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = provenance(config_hash);
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn write_table(path: &Path, config_hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    fs::write(path, table_to_csv(config_hash, columns, rows))?;
    Ok(())
}

/// `key = value` report lines, in the given order.
#[derive(Debug, Default, Clone)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl std::fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self, config_hash: &str) -> String {
        let mut s = provenance(config_hash);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn write(&self, path: &Path, config_hash: &str) -> Result<()> {
        fs::write(path, self.to_text(config_hash))?;
        Ok(())
    }
}

/// Parses `key = value` lines, skipping comments.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Reads asymptotic data rows `y₁..yₙ, f, g₁..gₙ` (comma separated, `#` comments).
pub fn read_sphere_rows(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(format!("barrier.f.file line {}", lineno + 1), e.to_string()))?;
        if row.len() != 2 * dim + 1 {
            return Err(Error::parse(
                format!("barrier.f.file line {}", lineno + 1),
                format!("expected {} numbers", 2 * dim + 1),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip_is_lossless() {
        let spec = GridSpec::new(0.1, vec![-0.3, 1.0 / 3.0], vec![4, 5]).unwrap();
        let g = GridFunction::from_fn(spec, |x| (x[0] * 7.1).sin() + x[1].exp() / 3.0);
        let back = grid_from_csv(&grid_to_csv(&g, "abc")).unwrap();
        assert_eq!(back.spec(), g.spec());
        assert_eq!(back.values(), g.values());
    }

    #[test]
    fn malformed_grid_names_field() {
        let err = grid_from_csv("# dim = 2\n1,2\n").unwrap_err();
        assert!(err.to_string().contains("shape"));
    }

    #[test]
    fn report_lines() {
        let mut r = Report::default();
        r.push("a", 1.5);
        r.push("b", "x");
        let text = r.to_text("h");
        assert!(text.starts_with("# scalcurv-cli"));
        assert_eq!(parse_report(&text), vec![("a".into(), "1.5".into()), ("b".into(), "x".into())]);
    }
}
