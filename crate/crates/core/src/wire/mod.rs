//! Sensor frame codec and sample ingestion (binary frame files, datagrams, CSV).

mod csv;
mod packet;
mod stream;
mod udp;

pub use self::csv::{read_csv, read_csv_from, write_csv, CsvMode, CsvRead, RowError};
pub use packet::{
    crc16_ccitt_false, decode_packet, encode_packet, SensorPacket, ADC_MAX_MV, FRAME_LEN, MAGIC,
};
pub use stream::{FrameReader, Reorderer, ReorderStats, REORDER_DEPTH};
pub use udp::DatagramListener;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("BadMagic: expected 0xA5, found {0:#04x}")]
    BadMagic(u8),
    #[error("BadLength: expected {expected} bytes, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("BadCrc: computed {expected:#06x}, frame carries {found:#06x}")]
    BadCrc { expected: u16, found: u16 },
    #[error("MissingColumn: {0}")]
    MissingColumn(String),
    #[error("UnparsableRow at line {line}: {message}")]
    UnparsableRow { line: u64, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Unit of the three axis values carried by a [`RawSample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Mv,
    G,
}

impl std::str::FromStr for Units {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mv" => Ok(Units::Mv),
            "g" => Ok(Units::G),
            other => Err(format!("unknown units '{other}' (expected mv or g)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    File,
    Datagram,
    Csv,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub node_id: u16,
    pub timestamp_ms: u32,
    pub axes: [f64; 3],
}

impl From<&SensorPacket> for RawSample {
    fn from(p: &SensorPacket) -> Self {
        RawSample {
            node_id: p.node_id,
            timestamp_ms: p.timestamp_ms,
            axes: p.axes_mv().map(f64::from),
        }
    }
}

/// Ordered samples from one source, all in `units`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSampleStream {
    pub source: Source,
    pub units: Units,
    pub samples: Vec<RawSample>,
}

impl RawSampleStream {
    pub fn new(source: Source, units: Units) -> Self {
        RawSampleStream {
            source,
            units,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Column `axis` (0 = x, 1 = y, 2 = z).
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.axes[axis]).collect()
    }

    /// Decodes a concatenation of frames, resynchronising on corrupt bytes,
    /// then passes the packets through a per-node [`Reorderer`].
    pub fn from_frames(bytes: &[u8]) -> (Self, ReorderStats) {
        let mut reader = FrameReader::new(bytes);
        let mut reorder = Reorderer::new();
        let mut stream = RawSampleStream::new(Source::File, Units::Mv);
        for packet in reader.by_ref() {
            stream.samples.extend(reorder.push(packet).iter().map(RawSample::from));
        }
        stream
            .samples
            .extend(reorder.flush().iter().map(RawSample::from));
        let mut stats = reorder.stats();
        stats.corrupt_frames = reader.errors();
        (stream, stats)
    }
}
