//! CSV report tables and number formatting.

use std::io::Write;

use crate::error::Result;

/// 17 significant digits with trailing zeros removed; `inf`, `-inf`, `nan`
/// for the special values.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let body = if (-6..21).contains(&exp) {
        if exp < 0 {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        } else {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                format!("{}{}", digits, "0".repeat(int_len - digits.len()))
            } else {
                format!("{}.{}", &digits[..int_len], &digits[int_len..])
            }
        }
    } else if digits.len() == 1 {
        format!("{digits}e{exp}")
    } else {
        format!("{}.{}e{exp}", &digits[..1], &digits[1..])
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

pub fn fmt_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| fmt_float(*x))
        .collect::<Vec<_>>()
        .join(";")
}

/// A CSV table with a header row.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_path(&self, path: &std::path::Path) -> Result<()> {
        self.write(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_float(1.0 / 2f64.sqrt()), "0.70710678118654746");
        assert_eq!(
            fmt_float(std::f64::consts::FRAC_1_SQRT_2),
            "0.70710678118654757"
        );
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(0.5), "0.5");
        assert_eq!(fmt_float(-2.0), "-2");
        assert_eq!(fmt_float(100.0), "100");
        assert_eq!(fmt_float(0.1), "0.10000000000000001");
        assert_eq!(fmt_float(1e-7), "9.9999999999999995e-8");
        assert_eq!(fmt_float(2f64.powi(-30)), "9.3132257461547852e-10");
        assert_eq!(fmt_float(1.5e300), "1.5000000000000001e300");
        assert_eq!(fmt_float(2f64.powi(80)), "1.2089258196146292e24");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(0.001), "0.001");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [
            std::f64::consts::PI,
            1.0 / 3.0,
            -2.5e-9,
            123456.789,
            6.02e23,
        ] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_quotes_labels() {
        let mut t = Table::new(&["label", "value"]);
        t.push(vec!["(j=f, sample 1)".into(), fmt_float(2.0)]);
        assert_eq!(t.to_csv().unwrap(), "label,value\n\"(j=f, sample 1)\",2\n");
    }
}
