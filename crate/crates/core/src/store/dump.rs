//! Append-only JSONL dump files: one message object per line, plus
//! `{"flush": ["SOURCE:id", ...]}` tombstones so a restart replay converges
//! on the live state. Files are named `dump_<startdate>_<seq>.jsonl` and
//! rotate once they pass the size threshold; `seq` is globally monotonic and
//! defines replay order.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde_json::Value;

use crate::model::{json_to_message, DedupKey, Message};

pub const DEFAULT_ROTATE_BYTES: u64 = 50 * 1024 * 1024;

/// One replayable dump record.
pub enum ReplayOp {
    Insert(Message),
    Flush(Vec<DedupKey>),
}

/// Parse a dump line. `Ok(None)` means the line is blank.
pub fn parse_line(line: &str) -> Result<Option<ReplayOp>, ()> {
    let line = line.trim();
    if line.is_empty() {
        return Ok(None);
    }
    let value: Value = serde_json::from_str(line).map_err(|_| ())?;
    if let Some(flushed) = value.get("flush") {
        let items = flushed.as_array().ok_or(())?;
        let mut keys = Vec::with_capacity(items.len());
        for item in items {
            let encoded = item.as_str().ok_or(())?;
            keys.push(DedupKey::decode(encoded).ok_or(())?);
        }
        return Ok(Some(ReplayOp::Flush(keys)));
    }
    let message = json_to_message(&value).map_err(|_| ())?;
    Ok(Some(ReplayOp::Insert(message)))
}

pub fn tombstone_line(keys: &[DedupKey]) -> String {
    let ids: Vec<String> = keys.iter().map(DedupKey::encode).collect();
    serde_json::json!({ "flush": ids }).to_string()
}

fn parse_seq(path: &Path) -> Option<u64> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_prefix("dump_")?.strip_suffix(".jsonl")?;
    stem.rsplit('_').next()?.parse().ok()
}

/// Dump files in `dir`, ordered by sequence number.
pub fn dump_files(dir: &Path) -> std::io::Result<Vec<(u64, PathBuf)>> {
    let mut files = Vec::new();
    if !dir.exists() {
        return Ok(files);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if let Some(seq) = parse_seq(&path) {
            files.push((seq, path));
        }
    }
    files.sort_by_key(|(seq, _)| *seq);
    Ok(files)
}

/// Replay every dump file in order, feeding each record to `apply`.
/// Returns the number of malformed lines skipped.
pub fn replay(dir: &Path, mut apply: impl FnMut(ReplayOp)) -> std::io::Result<usize> {
    let mut malformed = 0;
    for (_, path) in dump_files(dir)? {
        let reader = BufReader::new(File::open(&path)?);
        for line in reader.lines() {
            match parse_line(&line?) {
                Ok(Some(op)) => apply(op),
                Ok(None) => {}
                Err(()) => malformed += 1,
            }
        }
    }
    Ok(malformed)
}

/// Appender over the active dump file.
pub struct DumpLog {
    dir: PathBuf,
    writer: Option<BufWriter<File>>,
    seq: u64,
    bytes: u64,
    rotate_bytes: u64,
}

impl DumpLog {
    /// Open `dir` for appending, continuing the highest-sequence file when it
    /// is still under the rotation threshold.
    pub fn open(dir: &Path, rotate_bytes: u64) -> std::io::Result<DumpLog> {
        fs::create_dir_all(dir)?;
        let files = dump_files(dir)?;
        let mut log = DumpLog {
            dir: dir.to_path_buf(),
            writer: None,
            seq: files.last().map(|(seq, _)| *seq).unwrap_or(0),
            bytes: 0,
            rotate_bytes,
        };
        if let Some((_, path)) = files.last() {
            let len = fs::metadata(path)?.len();
            if len < rotate_bytes {
                let file = OpenOptions::new().append(true).open(path)?;
                log.writer = Some(BufWriter::new(file));
                log.bytes = len;
            }
        }
        Ok(log)
    }

    fn next_file(&mut self) -> std::io::Result<()> {
        self.seq += 1;
        let name = format!("dump_{}_{:06}.jsonl", Utc::now().format("%Y%m%d"), self.seq);
        let file = OpenOptions::new().create(true).append(true).open(self.dir.join(name))?;
        self.writer = Some(BufWriter::new(file));
        self.bytes = 0;
        Ok(())
    }

    /// Append lines and flush them to the OS. Rotation happens at batch
    /// boundaries, so a single batch always lands in one file.
    pub fn append_lines(&mut self, lines: &[String]) -> std::io::Result<()> {
        if lines.is_empty() {
            return Ok(());
        }
        if self.writer.is_none() || self.bytes >= self.rotate_bytes {
            self.next_file()?;
        }
        let writer = self.writer.as_mut().expect("writer just ensured");
        for line in lines {
            writer.write_all(line.as_bytes())?;
            writer.write_all(b"\n")?;
            self.bytes += line.len() as u64 + 1;
        }
        writer.flush()
    }
}
