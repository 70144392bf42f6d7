//! Fixed-size sensor frame, one sample per frame.
//!
//! ```text
//! offset  size  field
//!      0     1  magic (0xA5)
//!      1     2  node_id        LE
//!      3     2  seq            LE, wraps
//!      5     4  timestamp_ms   LE, since node boot
//!      9     2  ax_mv          LE
//!     11     2  ay_mv          LE
//!     13     2  az_mv          LE
//!     15     2  crc            LE, CRC-16/CCITT-FALSE over bytes 0..15
//! ```

use super::WireError;

pub const MAGIC: u8 = 0xA5;
pub const FRAME_LEN: usize = 17;
const CRC_OFFSET: usize = FRAME_LEN - 2;
/// Upper end of the plausible ADC range in millivolts.
pub const ADC_MAX_MV: u16 = 3300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorPacket {
    pub node_id: u16,
    pub seq: u16,
    pub timestamp_ms: u32,
    pub ax_mv: u16,
    pub ay_mv: u16,
    pub az_mv: u16,
}

impl SensorPacket {
    pub fn axes_mv(&self) -> [u16; 3] {
        [self.ax_mv, self.ay_mv, self.az_mv]
    }

    /// True when any axis reads above the ADC range. Such frames still decode.
    pub fn out_of_range(&self) -> bool {
        self.axes_mv().iter().any(|&v| v > ADC_MAX_MV)
    }
}

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, unreflected, no final xor).
pub fn crc16_ccitt_false(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc ^= (b as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

pub fn encode_packet(p: &SensorPacket) -> [u8; FRAME_LEN] {
    let mut out = [0u8; FRAME_LEN];
    out[0] = MAGIC;
    out[1..3].copy_from_slice(&p.node_id.to_le_bytes());
    out[3..5].copy_from_slice(&p.seq.to_le_bytes());
    out[5..9].copy_from_slice(&p.timestamp_ms.to_le_bytes());
    out[9..11].copy_from_slice(&p.ax_mv.to_le_bytes());
    out[11..13].copy_from_slice(&p.ay_mv.to_le_bytes());
    out[13..15].copy_from_slice(&p.az_mv.to_le_bytes());
    let crc = crc16_ccitt_false(&out[..CRC_OFFSET]);
    out[CRC_OFFSET..].copy_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_packet(bytes: &[u8]) -> Result<SensorPacket, WireError> {
    if bytes.len() != FRAME_LEN {
        return Err(WireError::BadLength {
            expected: FRAME_LEN,
            actual: bytes.len(),
        });
    }
    if bytes[0] != MAGIC {
        return Err(WireError::BadMagic(bytes[0]));
    }
    let le16 = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let expected = crc16_ccitt_false(&bytes[..CRC_OFFSET]);
    let found = le16(CRC_OFFSET);
    if expected != found {
        return Err(WireError::BadCrc { expected, found });
    }
    Ok(SensorPacket {
        node_id: le16(1),
        seq: le16(3),
        timestamp_ms: u32::from_le_bytes([bytes[5], bytes[6], bytes[7], bytes[8]]),
        ax_mv: le16(9),
        ay_mv: le16(11),
        az_mv: le16(13),
    })
}
