//! Deterministic text output: 15-significant-digit numbers, LF endings.

/// Formats with the given number of significant digits, positional where
/// reasonable and scientific otherwise. Identical inputs always produce
/// identical bytes.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if exp >= -4 && exp < sig as i32 {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.*e}", sig - 1, x)
    }
}

/// Default 15-significant-digit rendering for CSV cells.
pub fn csv_number(x: f64) -> String {
    format_sig(x, 15)
}

/// A small CSV document with `#`-prefixed header comments.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_is_stable() {
        assert_eq!(format_sig(0.0, 15), "0");
        assert_eq!(format_sig(1.0, 15), "1.00000000000000");
        assert_eq!(format_sig(-0.25, 15), "-0.250000000000000");
        assert_eq!(format_sig(1e-7, 15), "1.00000000000000e-7");
        let a = format_sig(0.975017927033842, 15);
        let b = format_sig(0.975017927033842, 15);
        assert_eq!(a, b);
        assert_eq!(a, "0.975017927033842");
    }

    #[test]
    fn csv_rendering() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.comment("seed=1");
        t.row(vec!["1".into(), "2".into()]);
        assert_eq!(t.render(), "# seed=1\na,b\n1,2\n");
    }
}
