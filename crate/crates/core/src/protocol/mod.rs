//! Wire formats between the layers.
//!
//! - [`command`]: 4-byte framed G/R/S commands with CRC-8.
//! - [`stream`]: sensor-frame stream with a resynchronizing decoder.
//! - [`ui`]: newline-delimited JSON messages for the steering UI.

pub mod command;
pub mod stream;
pub mod ui;

pub use command::{crc8, decode_command, encode_command, CommandDecodeError, CommandDecoder, CommandEncoder};
pub use stream::{
    stream_frames, FrameKind, FrameStreamDecoder, Pacing, SensorFrame, SensorFrameHeader, StreamError,
    HEADER_LEN,
};
pub use ui::{ClientMessage, ServerMessage, SnapshotMessage};
