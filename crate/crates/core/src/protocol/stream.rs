//! Sensor-frame stream: a 25-byte little-endian header followed by the raw
//! payload, frames back to back.
//!
//! ```text
//! 0..4   "OVGF"
//! 4..8   frame_id      u32
//! 8..16  timestamp_us  u64
//! 16..18 width         u16
//! 18..20 height        u16
//! 20     kind          u8   0 = depth16, 1 = rgb8
//! 21..25 payload_len   u32  = width * height * bytes_per_sample(kind)
//! ```
//! Depth16 payload samples are little-endian.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::geometry::DepthFrame;

pub const FRAME_MAGIC: &[u8; 4] = b"OVGF";
pub const HEADER_LEN: usize = 25;
/// Sensor frame period at 10 fps.
pub const FRAME_PERIOD: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Depth16 = 0,
    Rgb8 = 1,
}

impl FrameKind {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(FrameKind::Depth16),
            1 => Some(FrameKind::Rgb8),
            _ => None,
        }
    }

    pub fn bytes_per_sample(self) -> usize {
        match self {
            FrameKind::Depth16 => 2,
            FrameKind::Rgb8 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorFrameHeader {
    pub frame_id: u32,
    pub timestamp_us: u64,
    pub width: u16,
    pub height: u16,
    pub kind: FrameKind,
    pub payload_len: u32,
}

impl SensorFrameHeader {
    pub fn expected_payload_len(width: u16, height: u16, kind: FrameKind) -> u64 {
        width as u64 * height as u64 * kind.bytes_per_sample() as u64
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(FRAME_MAGIC);
        out[4..8].copy_from_slice(&self.frame_id.to_le_bytes());
        out[8..16].copy_from_slice(&self.timestamp_us.to_le_bytes());
        out[16..18].copy_from_slice(&self.width.to_le_bytes());
        out[18..20].copy_from_slice(&self.height.to_le_bytes());
        out[20] = self.kind as u8;
        out[21..25].copy_from_slice(&self.payload_len.to_le_bytes());
        out
    }

    /// Parses and validates a header; `None` if the bytes cannot be one.
    pub fn parse(b: &[u8]) -> Option<Self> {
        if b.len() < HEADER_LEN || &b[0..4] != FRAME_MAGIC {
            return None;
        }
        let kind = FrameKind::from_u8(b[20])?;
        let h = Self {
            frame_id: u32::from_le_bytes(b[4..8].try_into().ok()?),
            timestamp_us: u64::from_le_bytes(b[8..16].try_into().ok()?),
            width: u16::from_le_bytes(b[16..18].try_into().ok()?),
            height: u16::from_le_bytes(b[18..20].try_into().ok()?),
            kind,
            payload_len: u32::from_le_bytes(b[21..25].try_into().ok()?),
        };
        (h.payload_len as u64 == Self::expected_payload_len(h.width, h.height, h.kind)).then_some(h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorFrame {
    pub header: SensorFrameHeader,
    pub payload: Vec<u8>,
}

impl SensorFrame {
    pub fn from_depth(frame_id: u32, depth: &DepthFrame) -> Self {
        let mut payload = Vec::with_capacity(depth.data.len() * 2);
        for d in &depth.data {
            payload.extend_from_slice(&d.to_le_bytes());
        }
        Self {
            header: SensorFrameHeader {
                frame_id,
                timestamp_us: depth.timestamp,
                width: depth.width as u16,
                height: depth.height as u16,
                kind: FrameKind::Depth16,
                payload_len: payload.len() as u32,
            },
            payload,
        }
    }

    pub fn to_depth(&self) -> Option<DepthFrame> {
        if self.header.kind != FrameKind::Depth16 {
            return None;
        }
        let data = self
            .payload
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        DepthFrame::new(
            self.header.width as u32,
            self.header.height as u32,
            data,
            self.header.timestamp_us,
        )
        .ok()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

/// Incremental decoder. Bytes that do not start a valid header are skipped
/// until the next `"OVGF"`.
#[derive(Debug, Clone, Default)]
pub struct FrameStreamDecoder {
    buf: Vec<u8>,
    skipped: u64,
}

impl FrameStreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<SensorFrame> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut pos = 0;
        loop {
            let Some(offset) = find_magic(&self.buf[pos..]) else {
                // keep a possible partial magic at the tail
                let keep = self.buf.len().saturating_sub(pos).min(FRAME_MAGIC.len() - 1);
                let drop_to = self.buf.len() - keep;
                self.skipped += (drop_to - pos) as u64;
                pos = drop_to;
                break;
            };
            self.skipped += offset as u64;
            pos += offset;
            let rest = &self.buf[pos..];
            if rest.len() < HEADER_LEN {
                break;
            }
            let Some(header) = SensorFrameHeader::parse(rest) else {
                pos += 1;
                self.skipped += 1;
                continue;
            };
            let total = HEADER_LEN + header.payload_len as usize;
            if rest.len() < total {
                break;
            }
            out.push(SensorFrame {
                header,
                payload: rest[HEADER_LEN..total].to_vec(),
            });
            pos += total;
        }
        self.buf.drain(..pos);
        out
    }

    /// Bytes discarded while hunting for a frame boundary.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }
}

fn find_magic(hay: &[u8]) -> Option<usize> {
    hay.windows(FRAME_MAGIC.len()).position(|w| w == FRAME_MAGIC)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// One frame per period, scheduled from the stream start.
    RealTime(Duration),
    /// As fast as the sink accepts.
    Replay,
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("sink closed after {frames_sent} frames")]
    SinkClosed { frames_sent: usize },
    #[error("i/o error after {frames_sent} frames: {source}")]
    Io {
        frames_sent: usize,
        #[source]
        source: io::Error,
    },
}

impl StreamError {
    pub fn frames_sent(&self) -> usize {
        match self {
            StreamError::SinkClosed { frames_sent } | StreamError::Io { frames_sent, .. } => *frames_sent,
        }
    }
}

/// Writes every frame from `source` to `sink`. Blocking writes provide the
/// backpressure. Returns the number of frames sent.
pub fn stream_frames<I, W>(source: I, sink: &mut W, pacing: Pacing) -> Result<usize, StreamError>
where
    I: IntoIterator<Item = SensorFrame>,
    W: Write,
{
    let start = Instant::now();
    let mut sent = 0usize;
    for frame in source {
        if let Pacing::RealTime(period) = pacing {
            let due = start + period * sent as u32;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let bytes = frame.to_bytes();
        if let Err(e) = sink.write_all(&bytes).and_then(|_| sink.flush()) {
            return Err(classify(e, sent));
        }
        sent += 1;
    }
    Ok(sent)
}

fn classify(e: io::Error, frames_sent: usize) -> StreamError {
    match e.kind() {
        io::ErrorKind::BrokenPipe
        | io::ErrorKind::ConnectionReset
        | io::ErrorKind::ConnectionAborted
        | io::ErrorKind::NotConnected
        | io::ErrorKind::WriteZero
        | io::ErrorKind::UnexpectedEof => StreamError::SinkClosed { frames_sent },
        _ => StreamError::Io { frames_sent, source: e },
    }
}
