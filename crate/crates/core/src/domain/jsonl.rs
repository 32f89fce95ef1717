//! Line-delimited JSON files: a header line `{"format": .., "version": ..}`
//! followed by one record per line.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

pub fn write<T: Serialize>(path: &Path, format: &str, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_to(&mut out, format, records)?;
    out.flush()?;
    Ok(())
}

pub fn write_to<T: Serialize, W: Write>(out: &mut W, format: &str, records: &[T]) -> Result<()> {
    let header = Header {
        format: format.to_string(),
        version: VERSION,
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read<T: DeserializeOwned>(path: &Path, format: &str) -> Result<Vec<T>> {
    read_from(BufReader::new(File::open(path)?), format)
}

pub fn read_from<T: DeserializeOwned, R: BufRead>(input: R, format: &str) -> Result<Vec<T>> {
    let mut lines = input.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(Error::Format(format!("empty file, expected {format} header"))),
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            }
        }
    };
    if header.format != format {
        return Err(Error::Format(format!(
            "expected format {format:?}, found {:?}",
            header.format
        )));
    }
    if header.version > VERSION {
        return Err(Error::Format(format!(
            "{format} version {} is newer than supported {VERSION}",
            header.version
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(records)
}
