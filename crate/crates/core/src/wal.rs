//! Write-ahead log.
//!
//! A file starts with the 8-byte magic `STEPLSM1` and is followed by
//! records framed as `[u32 crc32(payload)][u32 payload length][payload]`,
//! where the payload is an encoded [`EntryRecord`]. Replay stops at the
//! first frame that is truncated or fails its checksum; everything before
//! it is the durable prefix.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::WalSync;
use crate::error::{Error, Result};
use crate::record::EntryRecord;

pub const WAL_MAGIC: &[u8; 8] = b"STEPLSM1";
const FRAME_HEADER: usize = 8;

pub fn wal_file_name(generation: u64) -> String {
    format!("wal-{generation:08}.log")
}

/// Parses the generation out of a WAL file name.
pub fn parse_wal_file_name(name: &str) -> Option<u64> {
    name.strip_prefix("wal-")?.strip_suffix(".log")?.parse().ok()
}

pub fn frame(rec: &EntryRecord) -> Vec<u8> {
    let payload = rec.encode();
    let mut out = Vec::with_capacity(FRAME_HEADER + payload.len());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub(crate) fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

#[derive(Debug)]
pub struct WalWriter {
    path: PathBuf,
    file: BufWriter<File>,
    sync: WalSync,
    last_sync: Instant,
    bytes_written: u64,
    max_seqno: Option<u64>,
}

impl WalWriter {
    /// Creates a new log with its header. The header is written to a
    /// temporary name and renamed into place, so a log file either has a
    /// complete header or does not exist.
    pub fn create(path: &Path, sync: WalSync) -> io::Result<Self> {
        let tmp = path.with_extension("log.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(WAL_MAGIC)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        if let Some(dir) = path.parent() {
            sync_dir(dir)?;
        }
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(WalWriter {
            path: path.to_path_buf(),
            file: BufWriter::new(file),
            sync,
            last_sync: Instant::now(),
            bytes_written: WAL_MAGIC.len() as u64,
            max_seqno: None,
        })
    }

    /// Appends one record and makes it durable per the sync level. Returns
    /// the number of bytes written.
    pub fn append(&mut self, rec: &EntryRecord) -> io::Result<u64> {
        let framed = frame(rec);
        self.file.write_all(&framed)?;
        self.file.flush()?;
        match self.sync {
            WalSync::EveryWrite => self.file.get_ref().sync_data()?,
            WalSync::IntervalMs(ms) => {
                if self.last_sync.elapsed() >= Duration::from_millis(ms) {
                    self.file.get_ref().sync_data()?;
                    self.last_sync = Instant::now();
                }
            }
        }
        self.bytes_written += framed.len() as u64;
        self.max_seqno = Some(rec.seqno);
        Ok(framed.len() as u64)
    }

    pub fn sync(&mut self) -> io::Result<()> {
        self.file.flush()?;
        self.file.get_ref().sync_data()?;
        self.last_sync = Instant::now();
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes_written
    }

    pub fn max_seqno(&self) -> Option<u64> {
        self.max_seqno
    }
}

#[derive(Debug, Default)]
pub struct WalReplay {
    /// Valid records in log order.
    pub records: Vec<EntryRecord>,
    /// Byte length of the valid prefix (header included).
    pub valid_len: u64,
    /// True when the whole file was valid.
    pub clean: bool,
}

/// Reads the durable prefix of a log file.
pub fn replay(path: &Path) -> Result<WalReplay> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(Error::WalMissing(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    if bytes.len() < WAL_MAGIC.len() || &bytes[..WAL_MAGIC.len()] != WAL_MAGIC {
        return Err(Error::WalHeaderCorrupt(path.to_path_buf()));
    }
    let mut pos = WAL_MAGIC.len();
    let mut out = WalReplay::default();
    let mut last_seqno: Option<u64> = None;
    loop {
        if pos == bytes.len() {
            out.clean = true;
            break;
        }
        let Some(header) = bytes.get(pos..pos + FRAME_HEADER) else {
            break;
        };
        let crc = u32::from_le_bytes(header[..4].try_into().expect("4 bytes"));
        let len = u32::from_le_bytes(header[4..].try_into().expect("4 bytes")) as usize;
        let Some(payload) = bytes.get(pos + FRAME_HEADER..pos + FRAME_HEADER + len) else {
            break;
        };
        if crc32fast::hash(payload) != crc {
            break;
        }
        let mut slice = payload;
        let Ok(rec) = EntryRecord::decode(&mut slice) else {
            break;
        };
        if !slice.is_empty() || last_seqno.is_some_and(|s| s >= rec.seqno) {
            break;
        }
        last_seqno = Some(rec.seqno);
        out.records.push(rec);
        pos += FRAME_HEADER + len;
    }
    out.valid_len = pos as u64;
    Ok(out)
}
