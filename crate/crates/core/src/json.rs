//! Byte-stable JSON output: sorted keys, floats with six decimals, LF line endings.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::{Error, Result};

/// Run identity embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

struct FixedFloat<'a> {
    pretty: Option<PrettyFormatter<'a>>,
}

fn write_fixed<W: ?Sized + Write>(w: &mut W, v: f64) -> io::Result<()> {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        w.write_all(b"0.000000")
    } else {
        w.write_all(s.as_bytes())
    }
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                match &mut self.pretty {
                    Some(p) => p.$name(w $(, $arg)*),
                    None => serde_json::ser::CompactFormatter.$name(w $(, $arg)*),
                }
            }
        )*
    };
}

impl Formatter for FixedFloat<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_fixed(w, v)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_fixed(w, v as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

fn render(value: &Value, pretty: bool) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = FixedFloat { pretty: pretty.then(|| PrettyFormatter::with_indent(b"  ")) };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser).map_err(|e| Error::json("serialize", e))?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

/// Canonical text of a value. Keys come out sorted because values pass through `serde_json::Value`.
pub fn to_canonical_string<T: Serialize + ?Sized>(v: &T, pretty: bool) -> Result<String> {
    let value = serde_json::to_value(v).map_err(|e| Error::json("serialize", e))?;
    render(&value, pretty)
}

/// Writes a pretty, canonical JSON document followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<()> {
    let mut text = to_canonical_string(v, true)?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes one compact canonical JSON value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&to_canonical_string(&item, false)?);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e)))
        .collect()
}

/// Rounds to six decimals so values survive a write/parse cycle unchanged.
pub fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}
