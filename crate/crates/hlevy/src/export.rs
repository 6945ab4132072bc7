//! File formats: CSV layouts, the binary matrix dump, and a JSON writer
//! that prints every float with 17 significant digits.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde_json::Value;

use crate::ensemble::{EventKind, HermitianMatrix, PathSample};
use crate::error::{Error, Result};
use crate::spectral::SpectralProcess;

/// Magic bytes of the binary matrix dump.
pub const DUMP_MAGIC: &[u8; 4] = b"HLEV";
/// Current dump format version.
pub const DUMP_VERSION: u32 = 1;

/// 17 significant digits: enough to reproduce any f64 bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // CSV/JSON-safe spellings for the rare non-finite diagnostics.
        format!("{x}")
    }
}

/// Serialize a JSON value with all floats at 17 significant digits and a
/// stable key order (maps are emitted in insertion order; use structs or
/// `serde_json::Map` built deterministically).
pub fn to_json_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    out.push_str(&fmt_f64(f));
                } else {
                    out.push_str(&n.to_string());
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string encoding"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            push_indent(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(k).expect("key encoding"));
                out.push_str(": ");
                write_value(v, indent + 1, out);
            }
            out.push('\n');
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(n: usize, out: &mut String) {
    for _ in 0..n {
        out.push_str("  ");
    }
}

/// Serialize any `Serialize` through the 17-digit JSON writer.
pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(to_json_string(&serde_json::to_value(value)?))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// ESD export: long-format CSV with columns (time, index, eigenvalue);
/// index 1..n walks the descending eigenvalue list.
pub fn esd_csv(process: &SpectralProcess) -> String {
    let mut out = String::from("time,index,eigenvalue\n");
    for (t, m) in process.times.iter().zip(&process.measures) {
        for (i, lam) in m.eigenvalues().iter().enumerate() {
            out.push_str(&fmt_f64(*t));
            out.push(',');
            out.push_str(&(i + 1).to_string());
            out.push(',');
            out.push_str(&fmt_f64(*lam));
            out.push('\n');
        }
    }
    out
}

/// Density/CDF table export: columns (t, x, density, cdf).
pub fn limit_table_csv(rows: &[(f64, f64, f64, f64)]) -> String {
    let mut out = String::from("t,x,density,cdf\n");
    for &(t, x, d, c) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(t),
            fmt_f64(x),
            fmt_f64(d),
            fmt_f64(c)
        ));
    }
    out
}

/// Path export: per-skeleton-point CSV referencing matrices in a sibling
/// binary dump by index.
pub fn path_csv(path: &PathSample, dump_name: &str) -> String {
    let mut out = String::from("time,event_type,matrix_index,matrix_dump\n");
    for (i, pt) in path.skeleton.iter().enumerate() {
        let kind = match pt.kind {
            EventKind::Grid => "grid",
            EventKind::Jump => "jump",
        };
        out.push_str(&format!("{},{kind},{i},{dump_name}\n", fmt_f64(pt.time)));
    }
    out
}

/// Binary dump of Hermitian matrices: 16-byte header (magic "HLEV",
/// version u32, n u32, count u32, all little-endian), then for each matrix
/// the upper triangle row-major as (re, im) little-endian f64 pairs.
pub fn write_matrix_dump<'a, W: Write>(
    mut w: W,
    n: usize,
    matrices: impl ExactSizeIterator<Item = &'a HermitianMatrix>,
) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(matrices.len() as u32).to_le_bytes())?;
    for m in matrices {
        if m.dim() != n {
            return Err(Error::Domain("dump matrices must share one dimension".into()));
        }
        for z in m.packed() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read back a binary matrix dump.
pub fn read_matrix_dump(bytes: &[u8]) -> Result<Vec<HermitianMatrix>> {
    let bad = |m: &str| Error::Domain(format!("matrix dump: {m}"));
    if bytes.len() < 16 || &bytes[0..4] != DUMP_MAGIC {
        return Err(bad("missing HLEV header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != DUMP_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u32_at(8) as usize;
    let count = u32_at(12) as usize;
    let per = n * (n + 1) / 2;
    let expected = 16 + count * per * 16;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "length {} does not match header (expected {expected})",
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut off = 16;
    for _ in 0..count {
        let mut packed = Vec::with_capacity(per);
        for _ in 0..per {
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            packed.push(Complex64::new(re, im));
            off += 16;
        }
        out.push(HermitianMatrix::from_packed(n, packed)?);
    }
    Ok(out)
}
