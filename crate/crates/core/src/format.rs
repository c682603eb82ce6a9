//! Float formatting shared by every CSV and JSON writer: 17 significant
//! digits, so printed values round-trip exactly.

use std::io;

/// `%.17g`-style rendering without trailing-zero stripping.
/// Non-finite values print as `inf`, `-inf`, `nan`.
pub fn sig17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0000000000000000".into() } else { "0.0000000000000000".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{mantissa}e{exp}")
    }
}

/// JSON formatter that writes finite floats with [`sig17`]. Non-finite floats
/// never reach it (serde_json emits `null` for them).
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        writer.write_all(sig17(value as f64).as_bytes())
    }
}

/// Serializes `value` as compact JSON with 17-digit floats.
pub fn to_json_string<T: serde::Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}
