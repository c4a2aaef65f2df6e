//! `SNTT` timetag files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `b"SNTT"`            |
//! | 4      | 2    | version (u16, currently 1) |
//! | 6      | 2    | channel_count (u16)        |
//! | 8      | 10·n | records: channel (u16), time_ps (u64) |
//!
//! Records are sorted by timestamp; the record count is implied by the file
//! length.

use std::io::{self, Read, Write};

use crate::model::TimeTag;

pub const MAGIC: [u8; 4] = *b"SNTT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 8;
pub const RECORD_LEN: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"SNTT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported timetag format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("truncated record {index}: {bytes} of {RECORD_LEN} bytes")]
    TruncatedRecord { index: u64, bytes: usize },
    #[error("record {index}: timestamp {time_ps} ps precedes {previous_ps} ps")]
    NonMonotone { index: u64, time_ps: u64, previous_ps: u64 },
    #[error("record {index}: channel {channel} >= channel_count {channel_count}")]
    ChannelOutOfRange { index: u64, channel: u16, channel_count: u16 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    /// Rejects out-of-order timestamps.
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimetagFile {
    pub version: u16,
    pub channel_count: u16,
    pub tags: Vec<TimeTag>,
}

pub fn write_timetags<W: Write>(mut w: W, channel_count: u16, tags: &[TimeTag]) -> Result<(), FormatError> {
    let mut previous = 0u64;
    for (index, tag) in tags.iter().enumerate() {
        let index = index as u64;
        if tag.channel >= channel_count {
            return Err(FormatError::ChannelOutOfRange {
                index,
                channel: tag.channel,
                channel_count,
            });
        }
        if tag.time_ps < previous {
            return Err(FormatError::NonMonotone {
                index,
                time_ps: tag.time_ps,
                previous_ps: previous,
            });
        }
        previous = tag.time_ps;
    }
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(&MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    header[6..8].copy_from_slice(&channel_count.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(RECORD_LEN * 4096);
    for chunk in tags.chunks(4096) {
        buf.clear();
        for tag in chunk {
            buf.extend_from_slice(&tag.channel.to_le_bytes());
            buf.extend_from_slice(&tag.time_ps.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn encode_timetags(channel_count: u16, tags: &[TimeTag]) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * tags.len());
    write_timetags(&mut out, channel_count, tags)?;
    Ok(out)
}

/// Single-pass streaming reader; yields records after validating the header.
pub struct TimetagReader<R: Read> {
    inner: R,
    mode: ReadMode,
    version: u16,
    channel_count: u16,
    index: u64,
    previous: u64,
    done: bool,
}

impl<R: Read> TimetagReader<R> {
    pub fn new(mut inner: R, mode: ReadMode) -> Result<Self, FormatError> {
        let mut header = [0u8; HEADER_LEN];
        let got = read_full(&mut inner, &mut header)?;
        if got < 4 || header[..4] != MAGIC {
            let mut magic = [0u8; 4];
            magic[..got.min(4)].copy_from_slice(&header[..got.min(4)]);
            if got >= 4 {
                return Err(FormatError::BadMagic(magic));
            }
            return Err(FormatError::TruncatedHeader(got));
        }
        if got < HEADER_LEN {
            return Err(FormatError::TruncatedHeader(got));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let channel_count = u16::from_le_bytes([header[6], header[7]]);
        Ok(TimetagReader {
            inner,
            mode,
            version,
            channel_count,
            index: 0,
            previous: 0,
            done: false,
        })
    }

    pub fn channel_count(&self) -> u16 {
        self.channel_count
    }

    pub fn version(&self) -> u16 {
        self.version
    }

    fn next_record(&mut self) -> Result<Option<TimeTag>, FormatError> {
        let mut rec = [0u8; RECORD_LEN];
        let got = read_full(&mut self.inner, &mut rec)?;
        if got == 0 {
            return Ok(None);
        }
        let index = self.index;
        if got < RECORD_LEN {
            return Err(FormatError::TruncatedRecord { index, bytes: got });
        }
        let channel = u16::from_le_bytes([rec[0], rec[1]]);
        let time_ps = u64::from_le_bytes(rec[2..10].try_into().expect("8 bytes"));
        if channel >= self.channel_count {
            return Err(FormatError::ChannelOutOfRange {
                index,
                channel,
                channel_count: self.channel_count,
            });
        }
        if self.mode == ReadMode::Strict && time_ps < self.previous {
            return Err(FormatError::NonMonotone {
                index,
                time_ps,
                previous_ps: self.previous,
            });
        }
        self.previous = time_ps;
        self.index += 1;
        Ok(Some(TimeTag { channel, time_ps }))
    }
}

impl<R: Read> Iterator for TimetagReader<R> {
    type Item = Result<TimeTag, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(t)) => Some(Ok(t)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

pub fn read_timetags<R: Read>(r: R, mode: ReadMode) -> Result<TimetagFile, FormatError> {
    let reader = TimetagReader::new(r, mode)?;
    let version = reader.version();
    let channel_count = reader.channel_count();
    let tags = reader.collect::<Result<Vec<_>, _>>()?;
    Ok(TimetagFile {
        version,
        channel_count,
        tags,
    })
}

pub fn decode_timetags(bytes: &[u8], mode: ReadMode) -> Result<TimetagFile, FormatError> {
    read_timetags(bytes, mode)
}
