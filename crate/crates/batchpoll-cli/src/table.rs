use std::io::Write;

use batchpoll::PollingError;

/// Formats with 12 significant digits, switching to exponent notation for very
/// large or very small magnitudes.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        return format!("{}e{}", trim(mantissa), exp);
    }
    let decimals = (11 - exp).max(0) as usize;
    trim(&format!("{:.*}", decimals, x)).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Writes the table as CSV. A closed pipe on the reading side is not an error.
    pub fn write(&self, mut out: impl Write) -> Result<(), PollingError> {
        let mut go = || -> std::io::Result<()> {
            writeln!(out, "{}", self.header.join(","))?;
            for r in &self.rows {
                writeln!(out, "{}", r.join(","))?;
            }
            out.flush()
        };
        match go() {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(PollingError::Io(e.to_string())),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(6.0), "6");
        assert_eq!(fmt_num(19.0 / 3.0), "6.33333333333");
        assert_eq!(fmt_num(7.380952380952381), "7.38095238095");
        assert_eq!(fmt_num(0.25), "0.25");
        assert_eq!(fmt_num(1.5e-7), "1.5e-7");
        assert_eq!(fmt_num(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e14");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.row(vec!["1".into(), "2".into()]);
        let mut out = Vec::new();
        t.write(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n1,2\n");
    }
}
