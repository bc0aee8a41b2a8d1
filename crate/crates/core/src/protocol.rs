//! Binary wire format shared by every transport.
//!
//! A frame is a tag byte, a little-endian `u32` payload length and the
//! payload. All floating point data travels as little-endian binary64, so a
//! value decodes to the exact bit pattern it was encoded from.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

pub const MAGIC: &[u8; 6] = b"WFCPL1";
pub const VERSION: u16 = 1;
/// Tag byte plus length field.
pub const HEADER_LEN: usize = 5;
/// Upper bound on accepted payloads, so a corrupt length cannot trigger a
/// huge allocation.
pub const MAX_PAYLOAD: u32 = 1 << 28;
/// Window, iteration, row and column counts in front of the values.
pub const WINDOW_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Tag {
    Hello = 0x01,
    Config = 0x02,
    WindowData = 0x03,
    Control = 0x04,
    Bye = 0x05,
}

impl TryFrom<u8> for Tag {
    type Error = Error;

    fn try_from(b: u8) -> Result<Self> {
        Ok(match b {
            0x01 => Tag::Hello,
            0x02 => Tag::Config,
            0x03 => Tag::WindowData,
            0x04 => Tag::Control,
            0x05 => Tag::Bye,
            other => return Err(malformed(format!("unknown tag 0x{other:02x}"))),
        })
    }
}

fn malformed(msg: String) -> Error {
    Error::MalformedFrame(msg)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub tag: Tag,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: Tag, payload: Vec<u8>) -> Self {
        Self { tag, payload }
    }

    pub fn bye() -> Self {
        Self::new(Tag::Bye, Vec::new())
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.reserve(self.encoded_len());
        out.push(self.tag as u8);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    /// Validate a frame header and return the tag and payload length.
    pub fn parse_header(header: &[u8; HEADER_LEN]) -> Result<(Tag, usize)> {
        let tag = Tag::try_from(header[0])?;
        let len = u32::from_le_bytes([header[1], header[2], header[3], header[4]]);
        if len > MAX_PAYLOAD {
            return Err(malformed(format!("payload length {len} exceeds {MAX_PAYLOAD}")));
        }
        Ok((tag, len as usize))
    }

    /// Decode one frame from the front of `buf`. Returns `None` if `buf`
    /// holds only a prefix of a valid frame, otherwise the frame and the
    /// number of bytes it occupied.
    pub fn decode(buf: &[u8]) -> Result<Option<(Frame, usize)>> {
        if buf.is_empty() {
            return Ok(None);
        }
        Tag::try_from(buf[0])?;
        let Some(header) = buf.get(..HEADER_LEN) else { return Ok(None) };
        let (tag, len) = Self::parse_header(header.try_into().expect("5-byte slice"))?;
        let Some(payload) = buf.get(HEADER_LEN..HEADER_LEN + len) else { return Ok(None) };
        Ok(Some((Frame::new(tag, payload.to_vec()), HEADER_LEN + len)))
    }

    /// Decode a complete byte stream. Trailing bytes that do not form a
    /// whole frame are an error.
    pub fn decode_all(mut buf: &[u8]) -> Result<Vec<Frame>> {
        let mut frames = Vec::new();
        while !buf.is_empty() {
            match Self::decode(buf)? {
                Some((frame, used)) => {
                    frames.push(frame);
                    buf = &buf[used..];
                }
                None => return Err(malformed(format!("{} trailing bytes", buf.len()))),
            }
        }
        Ok(frames)
    }

    pub fn expect(self, tag: Tag) -> Result<Frame> {
        if self.tag != tag {
            return Err(malformed(format!("expected {tag:?} frame, got {:?}", self.tag)));
        }
        Ok(self)
    }
}

/// Who is speaking on a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Orchestrator = 0,
    Dirichlet = 1,
    Neumann = 2,
}

impl TryFrom<u8> for Role {
    type Error = Error;

    fn try_from(b: u8) -> Result<Self> {
        Ok(match b {
            0 => Role::Orchestrator,
            1 => Role::Dirichlet,
            2 => Role::Neumann,
            other => return Err(malformed(format!("unknown role {other}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hello {
    pub version: u16,
    pub role: Role,
}

impl Hello {
    pub fn new(role: Role) -> Self {
        Self { version: VERSION, role }
    }

    pub fn to_frame(&self) -> Frame {
        let mut p = Vec::with_capacity(MAGIC.len() + 3);
        p.extend_from_slice(MAGIC);
        p.extend_from_slice(&self.version.to_le_bytes());
        p.push(self.role as u8);
        Frame::new(Tag::Hello, p)
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        if frame.tag != Tag::Hello {
            return Err(malformed(format!("expected Hello frame, got {:?}", frame.tag)));
        }
        let p = &frame.payload;
        if p.len() != MAGIC.len() + 3 || &p[..MAGIC.len()] != MAGIC {
            return Err(malformed("bad hello payload".into()));
        }
        let version = u16::from_le_bytes([p[6], p[7]]);
        Ok(Self { version, role: Role::try_from(p[8])? })
    }

    /// Accept a peer's greeting only for the same protocol version.
    pub fn check(&self, remote: &Hello) -> Result<()> {
        if self.version != remote.version {
            return Err(Error::VersionMismatch { local: self.version, remote: remote.version });
        }
        Ok(())
    }
}

/// Canonical key-sorted `key=value` lines describing a run. Both ends of a
/// session must agree on every entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigDigest {
    entries: BTreeMap<String, String>,
}

impl ConfigDigest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keys and values may not contain `=` (keys) or newlines.
    pub fn insert(&mut self, key: &str, value: impl ToString) -> Result<()> {
        let value = value.to_string();
        if key.is_empty() || key.contains(['=', '\n']) || value.contains('\n') {
            return Err(Error::InvalidConfig(format!("unencodable digest entry `{key}`")));
        }
        self.entries.insert(key.into(), value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut d = Self::new();
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| malformed(format!("config line without '=': {line:?}")))?;
            if d.entries.insert(k.into(), v.into()).is_some() {
                return Err(malformed(format!("duplicate config key `{k}`")));
            }
        }
        Ok(d)
    }

    pub fn to_frame(&self) -> Frame {
        Frame::new(Tag::Config, self.to_text().into_bytes())
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        if frame.tag != Tag::Config {
            return Err(malformed(format!("expected Config frame, got {:?}", frame.tag)));
        }
        let text = core::str::from_utf8(&frame.payload)
            .map_err(|_| malformed("config payload is not UTF-8".into()))?;
        Self::parse(text)
    }

    /// First key (in sorted order) whose value differs or that only one
    /// side has.
    pub fn compare(&self, other: &ConfigDigest) -> Result<()> {
        let mut keys: Vec<&String> = self.entries.keys().chain(other.entries.keys()).collect();
        keys.sort();
        for key in keys {
            if self.entries.get(key) != other.entries.get(key) {
                return Err(Error::ConfigMismatch { key: key.clone() });
            }
        }
        Ok(())
    }
}

/// Interface samples for one iteration of one window, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowData {
    pub window: u32,
    pub iteration: u32,
    pub rows: Vec<Vec<f64>>,
}

impl WindowData {
    pub fn to_frame(&self) -> Result<Frame> {
        let n = self.rows.len();
        let m = self.rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(malformed("window data without values".into()));
        }
        if self.rows.iter().any(|r| r.len() != m) {
            return Err(malformed("ragged window data rows".into()));
        }
        let mut p = Vec::with_capacity(WINDOW_HEADER_LEN + 8 * n * m);
        for field in [self.window, self.iteration, n as u32, m as u32] {
            p.extend_from_slice(&field.to_le_bytes());
        }
        for row in &self.rows {
            for v in row {
                p.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(Frame::new(Tag::WindowData, p))
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        if frame.tag != Tag::WindowData {
            return Err(malformed(format!("expected WindowData frame, got {:?}", frame.tag)));
        }
        let p = &frame.payload;
        if p.len() < WINDOW_HEADER_LEN {
            return Err(malformed(format!("window data payload of {} bytes", p.len())));
        }
        let word = |k: usize| u32::from_le_bytes(p[4 * k..4 * k + 4].try_into().expect("4 bytes"));
        let (window, iteration) = (word(0), word(1));
        let (n, m) = (word(2) as usize, word(3) as usize);
        if n == 0 || m == 0 {
            return Err(malformed(format!("window data with n = {n}, m = {m}")));
        }
        let expected = n
            .checked_mul(m)
            .and_then(|c| c.checked_mul(8))
            .and_then(|b| b.checked_add(WINDOW_HEADER_LEN));
        if expected != Some(p.len()) {
            return Err(malformed(format!(
                "window data payload of {} bytes does not hold {n} x {m} values",
                p.len()
            )));
        }
        let mut values = p[WINDOW_HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let rows = (0..n).map(|_| values.by_ref().take(m).collect()).collect();
        Ok(Self { window, iteration, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Control {
    /// Roll back to the window-start checkpoint.
    Iterate = 0x00,
    /// Accept the window and advance.
    WindowConverged = 0x01,
    Terminate = 0x02,
}

impl Control {
    pub fn to_frame(self) -> Frame {
        Frame::new(Tag::Control, alloc::vec![self as u8])
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        if frame.tag != Tag::Control {
            return Err(malformed(format!("expected Control frame, got {:?}", frame.tag)));
        }
        match frame.payload.as_slice() {
            [0x00] => Ok(Control::Iterate),
            [0x01] => Ok(Control::WindowConverged),
            [0x02] => Ok(Control::Terminate),
            other => Err(malformed(format!("bad control payload {other:?}"))),
        }
    }
}
