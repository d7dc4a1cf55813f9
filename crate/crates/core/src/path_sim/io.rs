//! Record streams.
//!
//! CSV: header row, then one record per row in field order. Floats are written
//! in shortest round-trip form, so decimal files re-parse bit-exactly.
//!
//! Binary batch (`.rlab`), all little-endian:
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 4    | magic `RLAB`                              |
//! | 4      | 2    | version (u16) = 1                         |
//! | 6      | 8    | record count (u64)                        |
//! | 14     | 65·n | rows: `ruined` u8, then 8 × f64 in field order |

use std::io::{Read, Write};

use super::FirstPassageRecord;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"RLAB";
pub const BINARY_VERSION: u16 = 1;
const ROW_BYTES: usize = 1 + 8 * 8;

pub fn write_csv<W: Write>(out: W, records: &[FirstPassageRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<FirstPassageRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

fn fields(r: &FirstPassageRecord) -> [f64; 8] {
    [r.tau, r.last_max_time, r.passage_delay, r.undershoot_max, r.undershoot_path, r.overshoot, r.weight, r.last_claim]
}

pub fn write_binary<W: Write>(mut out: W, records: &[FirstPassageRecord]) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&(records.len() as u64).to_le_bytes())?;
    let mut row = [0u8; ROW_BYTES];
    for r in records {
        row[0] = r.ruined as u8;
        for (i, v) in fields(r).iter().enumerate() {
            row[1 + 8 * i..9 + 8 * i].copy_from_slice(&v.to_le_bytes());
        }
        out.write_all(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Vec<FirstPassageRecord>> {
    let mut header = [0u8; 14];
    input.read_exact(&mut header).map_err(|_| Error::Format("truncated header".into()))?;
    if &header[..4] != BINARY_MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(header[6..14].try_into().unwrap());
    let mut records = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut row = [0u8; ROW_BYTES];
    for i in 0..count {
        input
            .read_exact(&mut row)
            .map_err(|_| Error::Format(format!("truncated at record {i} of {count}")))?;
        let ruined = match row[0] {
            0 => false,
            1 => true,
            b => return Err(Error::Format(format!("bad ruined flag {b} at record {i}"))),
        };
        let f = |k: usize| f64::from_le_bytes(row[1 + 8 * k..9 + 8 * k].try_into().unwrap());
        records.push(FirstPassageRecord {
            ruined,
            tau: f(0),
            last_max_time: f(1),
            passage_delay: f(2),
            undershoot_max: f(3),
            undershoot_path: f(4),
            overshoot: f(5),
            weight: f(6),
            last_claim: f(7),
        });
    }
    Ok(records)
}
