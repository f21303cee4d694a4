//! CSV emission: `#` metadata lines, one header line, comma-separated rows.

use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// Comment lines, written without the leading `# `.
    pub meta: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// `precision` significant digits in scientific notation; 17 round-trips
/// every `f64`.
pub fn format_float(x: f64, precision: usize) -> String {
    if x.is_finite() {
        format!("{:.*e}", precision.saturating_sub(1), x)
    } else {
        format!("{x}")
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Adds each line of `text` as a metadata line.
    pub fn push_meta_block(&mut self, text: &str) {
        self.meta.extend(text.lines().map(str::to_string));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W, precision: usize) -> io::Result<()> {
        for m in &self.meta {
            if m.is_empty() {
                writeln!(w, "#")?;
            } else {
                writeln!(w, "# {m}")?;
            }
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|&x| format_float(x, precision)))?;
        }
        out.flush()
    }

    pub fn to_csv(&self, precision: usize) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, precision)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

/// Reads back a table written by [`Table::write_csv`].
pub fn parse_csv(text: &str) -> Option<Table> {
    let meta = text
        .lines()
        .map_while(|line| line.strip_prefix('#'))
        .map(|m| m.strip_prefix(' ').unwrap_or(m).to_string())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns = reader.headers().ok()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.ok()?;
        rows.push(
            record
                .iter()
                .map(|c| c.parse().ok())
                .collect::<Option<Vec<f64>>>()?,
        );
    }
    Some(Table {
        meta,
        columns,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_precision() {
        let xs = [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            f64::MAX,
            0.0,
            std::f64::consts::PI,
        ];
        for x in xs {
            assert_eq!(
                format_float(x, 17).parse::<f64>().unwrap().to_bits(),
                x.to_bits()
            );
        }
        assert_eq!(format_float(1.0, 3), "1.00e0");
        assert_eq!(format_float(f64::NAN, 17), "NaN");
    }

    #[test]
    fn layout() {
        let mut t = Table::new(&["t", "c"]);
        t.meta.push("kubo exact".into());
        t.push_row(vec![0.0, 1.0]);
        t.push_row(vec![0.5, -0.25]);
        let text = t.to_csv(17);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# kubo exact");
        assert_eq!(lines[1], "t,c");
        assert_eq!(lines.len(), 4);
        assert_eq!(parse_csv(&text).unwrap(), t);
        assert_eq!(t.column("c").unwrap(), vec![1.0, -0.25]);
    }
}
