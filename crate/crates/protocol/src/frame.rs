//! Stream framing: `len: u32 LE | kind: u8 | payload[len]`.
//!
//! `len` counts payload bytes only. The payload is a complete HEVF container
//! whose own kind byte must agree with the frame's.

use std::io::{self, Read, Write};

use crate::error::{ProtocolError, Result};

pub const FRAME_HEADER_LEN: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: u8,
    pub payload: Vec<u8>,
}

pub fn encode_frame(kind: u8, payload: &[u8]) -> Result<Vec<u8>> {
    let len = u32::try_from(payload.len())
        .map_err(|_| ProtocolError::Malformed(format!("payload of {} bytes does not fit a frame", payload.len())))?;
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn write_frame(w: &mut impl Write, kind: u8, payload: &[u8]) -> Result<()> {
    let len = u32::try_from(payload.len())
        .map_err(|_| ProtocolError::Malformed(format!("payload of {} bytes does not fit a frame", payload.len())))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Parses one frame from the front of `bytes`, returning it and the number
/// of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, usize)> {
    if bytes.len() < FRAME_HEADER_LEN {
        return Err(ProtocolError::Malformed("truncated frame header".into()));
    }
    let len = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let end = FRAME_HEADER_LEN
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| ProtocolError::Malformed(format!("frame declares {len} payload bytes, {} available", bytes.len() - FRAME_HEADER_LEN)))?;
    Ok((Frame { kind: bytes[4], payload: bytes[FRAME_HEADER_LEN..end].to_vec() }, end))
}

/// Reads one frame; `Ok(None)` on a clean end of stream before any header
/// byte. Frames larger than `max_len` are rejected before reading the payload.
pub fn read_frame(r: &mut impl Read, max_len: usize) -> Result<Option<Frame>> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    let mut got = 0;
    while got < FRAME_HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_le_bytes(header[..4].try_into().expect("4 bytes")) as usize;
    if len > max_len {
        return Err(ProtocolError::Malformed(format!("frame of {len} bytes exceeds the {max_len}-byte limit")));
    }
    // grow as data arrives instead of trusting the declared length up front
    let mut payload = Vec::new();
    r.take(len as u64).read_to_end(&mut payload)?;
    if payload.len() != len {
        return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into());
    }
    Ok(Some(Frame { kind: header[4], payload }))
}
