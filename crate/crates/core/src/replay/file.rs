//! `DMRB` buffer files.
//!
//! Layout (little-endian): magic `DMRB`, u32 version, u32 state_dim,
//! u32 action_dim, u64 count, then per record 22×f64 obs, 5×f64 action,
//! f64 reward, 22×f64 next_obs, u8 terminal, u8 source.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{Experience, ReplayBuffer, Source, DEFAULT_CAPACITY};
use crate::codec::{write_atomic, ByteReader, ByteWriter};
use crate::env2d::{Action, Observation, ACTION_DIM, OBS_DIM};
use crate::scalar::Scalar;

pub const BUFFER_MAGIC: &[u8; 4] = b"DMRB";
pub const BUFFER_VERSION: u32 = 1;

const HEADER_BYTES: usize = 4 + 4 + 4 + 4 + 8;
const RECORD_BYTES: usize = 8 * (2 * OBS_DIM + ACTION_DIM + 1) + 2;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("header field `{field}` mismatch: expected {expected}, found {found}")]
    Mismatch { field: &'static str, expected: u64, found: u64 },
    #[error("truncated file: {field} needs {needed} more bytes, {available} available")]
    Truncated { field: &'static str, needed: usize, available: usize },
    #[error("record {record}: invalid `{field}` value {value}")]
    InvalidField { record: usize, field: &'static str, value: String },
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        FormatError::Io { path: path.display().to_string(), source }
    }
}

pub(crate) fn check_magic(found: &[u8], expected: &[u8; 4]) -> Result<(), FormatError> {
    if found != expected {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(expected).into_owned(),
            found: String::from_utf8_lossy(found).into_owned(),
        });
    }
    Ok(())
}

pub(crate) fn check_field(field: &'static str, expected: u64, found: u64) -> Result<(), FormatError> {
    if expected != found {
        return Err(FormatError::Mismatch { field, expected, found });
    }
    Ok(())
}

pub(crate) fn need<'a, T>(r: &mut ByteReader<'a>, field: &'static str, bytes: usize, read: impl FnOnce(&mut ByteReader<'a>) -> Option<T>) -> Result<T, FormatError> {
    let available = r.remaining();
    read(r).ok_or(FormatError::Truncated { field, needed: bytes, available })
}

pub fn encode_buffer<S: Scalar>(buf: &ReplayBuffer<S>) -> Vec<u8> {
    let mut w = ByteWriter::with_capacity(HEADER_BYTES + buf.len() * RECORD_BYTES);
    w.bytes(BUFFER_MAGIC);
    w.u32(BUFFER_VERSION);
    w.u32(OBS_DIM as u32);
    w.u32(ACTION_DIM as u32);
    w.u64(buf.len() as u64);
    for e in buf.iter() {
        e.obs.0.iter().for_each(|v| w.f64(v.to_f64_lossy()));
        e.action.values().iter().for_each(|v| w.f64(v.to_f64_lossy()));
        w.f64(e.reward.to_f64_lossy());
        e.next_obs.0.iter().for_each(|v| w.f64(v.to_f64_lossy()));
        w.u8(e.terminal as u8);
        w.u8(e.source as u8);
    }
    w.buf
}

/// Parses a whole file image; nothing is returned unless every record is valid.
pub fn decode_buffer<S: Scalar>(data: &[u8]) -> Result<ReplayBuffer<S>, FormatError> {
    let mut r = ByteReader::new(data);
    let magic = need(&mut r, "magic", 4, |r| r.take(4))?;
    check_magic(magic, BUFFER_MAGIC)?;
    check_field("version", BUFFER_VERSION as u64, need(&mut r, "version", 4, |r| r.u32())? as u64)?;
    check_field("state_dim", OBS_DIM as u64, need(&mut r, "state_dim", 4, |r| r.u32())? as u64)?;
    check_field("action_dim", ACTION_DIM as u64, need(&mut r, "action_dim", 4, |r| r.u32())? as u64)?;
    let count = need(&mut r, "count", 8, |r| r.u64())? as usize;

    let body = count.saturating_mul(RECORD_BYTES);
    if r.remaining() < body {
        return Err(FormatError::Truncated { field: "records", needed: body, available: r.remaining() });
    }
    if r.remaining() > body {
        return Err(FormatError::TrailingBytes(r.remaining() - body));
    }

    let mut out = ReplayBuffer::new(count.max(DEFAULT_CAPACITY));
    let lift = |v: f64| S::from_f64(v).unwrap_or_else(S::nan);
    for record in 0..count {
        let mut obs = [S::zero(); OBS_DIM];
        obs.iter_mut().for_each(|v| *v = lift(r.f64().unwrap()));
        let mut action = [S::zero(); ACTION_DIM];
        action.iter_mut().for_each(|v| *v = lift(r.f64().unwrap()));
        let reward = lift(r.f64().unwrap());
        let mut next_obs = [S::zero(); OBS_DIM];
        next_obs.iter_mut().for_each(|v| *v = lift(r.f64().unwrap()));
        let terminal = match r.u8().unwrap() {
            0 => false,
            1 => true,
            v => return Err(FormatError::InvalidField { record, field: "terminal", value: v.to_string() }),
        };
        let source = match r.u8().unwrap() {
            0 => Source::Exploration,
            1 => Source::Demonstration,
            v => return Err(FormatError::InvalidField { record, field: "source", value: v.to_string() }),
        };
        let action = Action::new(action)
            .map_err(|e| FormatError::InvalidField { record, field: "action", value: e.to_string() })?;
        if !reward.is_finite() {
            return Err(FormatError::InvalidField { record, field: "reward", value: reward.to_string() });
        }
        out.push(Experience { obs: Observation(obs), action, reward, next_obs: Observation(next_obs), terminal, source });
    }
    Ok(out)
}

/// Writes atomically: a crash mid-write leaves any previous file intact.
pub fn save_buffer<S: Scalar>(buf: &ReplayBuffer<S>, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    write_atomic(path, &encode_buffer(buf)).map_err(|e| FormatError::io(path, e))
}

pub fn load_buffer<S: Scalar>(path: impl AsRef<Path>) -> Result<ReplayBuffer<S>, FormatError> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_buffer(&data)
}
