//! Canonical single-line JSON rendering used for every payload.
//!
//! Separators are `": "` and `", "`, key order is insertion order and
//! non-ASCII text is written as-is.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

#[derive(Debug, Default)]
struct SpacedFormatter;

impl Formatter for SpacedFormatter {
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }
}

/// Render a value in canonical form.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::with_capacity(128);
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SpacedFormatter);
    // serde_json values and our plain structs cannot fail to serialize
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
