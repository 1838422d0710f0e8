use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use lbla_core::lbla::KernelKind;
use lbla_core::AttnKind;

use crate::bench::BenchRecord;
use crate::error::{BenchError, Result};

pub const CSV_HEADER: [&str; 9] = [
    "attn_kind", "kernel", "T", "d", "h", "median_ns", "p10_ns", "p90_ns", "checksum",
];

fn kind_columns(kind: AttnKind) -> (&'static str, &'static str) {
    match kind {
        AttnKind::Softmax => ("softmax", "none"),
        AttnKind::Lbla {
            kernel,
            use_reweight: true,
        } => ("lbla", kernel.name()),
        AttnKind::Lbla {
            kernel,
            use_reweight: false,
        } => ("lbla-noreweight", kernel.name()),
    }
}

fn parse_kind(attn: &str, kernel: &str) -> Option<AttnKind> {
    let kernel = || kernel.parse::<KernelKind>().ok();
    match attn {
        "softmax" => Some(AttnKind::Softmax),
        "lbla" => Some(AttnKind::Lbla {
            kernel: kernel()?,
            use_reweight: true,
        }),
        "lbla-noreweight" => Some(AttnKind::Lbla {
            kernel: kernel()?,
            use_reweight: false,
        }),
        _ => None,
    }
}

pub fn write_records<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let (attn, kernel) = kind_columns(r.attn_kind);
        w.write_record([
            attn.to_string(),
            kernel.to_string(),
            r.t.to_string(),
            r.d.to_string(),
            r.h.to_string(),
            r.median_ns.to_string(),
            r.p10_ns.to_string(),
            r.p90_ns.to_string(),
            r.checksum.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records` to `path` as CSV with a header row.
pub fn emit_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    write_records(records, File::create(path)?)
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    if reader.headers()?.iter().ne(CSV_HEADER) {
        return Err(BenchError::Parse {
            row: 0,
            reason: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |reason: &str| BenchError::Parse {
            row: i + 1,
            reason: reason.to_string(),
        };
        let int = |idx: usize| -> Result<u64> {
            row[idx].parse().map_err(|_| bad(CSV_HEADER[idx]))
        };
        out.push(BenchRecord {
            attn_kind: parse_kind(&row[0], &row[1]).ok_or_else(|| bad("attn_kind/kernel"))?,
            t: int(2)? as usize,
            d: int(3)? as usize,
            h: int(4)? as usize,
            median_ns: int(5)?,
            p10_ns: int(6)?,
            p90_ns: int(7)?,
            checksum: row[8].parse().map_err(|_| bad("checksum"))?,
        });
    }
    Ok(out)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    read_records(File::open(path)?)
}
