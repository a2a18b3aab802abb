use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Fixed 17-significant-digit rendering used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    // adding zero turns -0 into +0
    format!("{:.16e}", x + 0.0)
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

/// In-memory CSV, written in one go so that output is serialized.
#[derive(Debug)]
pub struct Table {
    columns: usize,
    body: String,
}

pub enum Cell<'a> {
    F(f64),
    U(u64),
    S(&'a str),
    B(bool),
}

impl From<f64> for Cell<'_> {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<u64> for Cell<'_> {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}

impl From<usize> for Cell<'_> {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}

impl From<bool> for Cell<'_> {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl<'a> From<&'a str> for Cell<'a> {
    fn from(x: &'a str) -> Self {
        Cell::S(x)
    }
}

impl<'a> From<&'a String> for Cell<'a> {
    fn from(x: &'a String) -> Self {
        Cell::S(x)
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            columns: header.len(),
            body: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: Vec<Cell<'_>>) {
        assert_eq!(cells.len(), self.columns, "row width does not match header");
        for (k, c) in cells.into_iter().enumerate() {
            if k > 0 {
                self.body.push(',');
            }
            match c {
                Cell::F(x) => self.body.push_str(&fmt_f64(x)),
                Cell::U(x) => {
                    let _ = write!(self.body, "{x}");
                }
                Cell::S(s) => self.body.push_str(&quote(s)),
                Cell::B(b) => self.body.push_str(if b { "true" } else { "false" }),
            }
        }
        self.body.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.body
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, &self.body)?;
        Ok(path)
    }
}

/// Header shared by every per-replica field output.
pub const FIELD_HEADER: [&str; 9] = ["replica", "time", "species", "test_function", "term", "value", "n", "f_n", "seed"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(-0.5), "-5.0000000000000000e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn text_with_commas_is_quoted() {
        let mut t = Table::new(&["a", "b"]);
        t.row(vec!["x, y".into(), 3u64.into()]);
        assert_eq!(t.as_str(), "a,b\n\"x, y\",3\n");
    }
}
