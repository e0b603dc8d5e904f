//! Number formatting and CSV rendering for the command line.

use std::fmt::Write;

/// `x` with 12 significant digits, in the style of `%.12g`; non-finite values
/// render as the empty string.
pub fn sig(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(sig).unwrap_or_default()
}

/// A CSV document built row by row. Fields never contain separators.
pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut out = String::new();
        let _ = writeln!(out, "{}", header.join(","));
        Csv { out }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.out, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig(std::f64::consts::LN_2), "0.69314718056");
        assert_eq!(sig(0.5), "0.5");
        assert_eq!(sig(-2.0), "-2");
        assert_eq!(sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(sig(1.5e-7), "1.5e-7");
        assert_eq!(sig(0.00012345), "0.00012345");
        assert_eq!(sig(f64::INFINITY), "");
        assert_eq!(sig(0.0), "0");
    }
}
