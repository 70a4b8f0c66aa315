//! JSON text with every float written to 17 significant digits, which is
//! enough to round-trip any `f64` exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Error, Result};

/// `{:.16e}` rendering of a finite float, e.g. `6.9314718055994529e-1`.
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

struct SeventeenDigits<F>(F);

impl<F: Formatter> Formatter for SeventeenDigits<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        writer.write_all(format_f64(value as f64).as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn end_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_key(writer)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

fn render<T: Serialize + ?Sized, F: Formatter>(value: &T, formatter: F) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits(formatter));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Schema(format!("cannot serialize: {e}")))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Single-line JSON.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    render(value, CompactFormatter)
}

/// Indented JSON.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    render(value, PrettyFormatter::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let text = to_json(&[std::f64::consts::LN_2, 0.1, 1.0]).unwrap();
        assert_eq!(text, "[6.9314718055994529e-1,1.0000000000000001e-1,1.0000000000000000e0]");
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![std::f64::consts::LN_2, 0.1, 1.0]);
    }

    #[test]
    fn integers_and_null_untouched() {
        #[derive(Serialize)]
        struct R {
            n: u32,
            x: Option<f64>,
            bad: f64,
        }
        let text = to_json(&R { n: 7, x: None, bad: f64::NAN }).unwrap();
        assert_eq!(text, r#"{"n":7,"x":null,"bad":null}"#);
    }
}
