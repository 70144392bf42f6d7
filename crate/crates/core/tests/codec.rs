use actipipe::wire::{
    crc16_ccitt_false, decode_packet, encode_packet, Reorderer, SensorPacket, WireError, FRAME_LEN,
    REORDER_DEPTH,
};
use crc::{Crc, CRC_16_IBM_3740};
use proptest::prelude::*;

// CRC-16/IBM-3740 is the catalogue name of CCITT-FALSE.
const ORACLE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

fn packet() -> impl Strategy<Value = SensorPacket> {
    (any::<u16>(), any::<u16>(), any::<u32>(), any::<u16>(), any::<u16>(), any::<u16>()).prop_map(
        |(node_id, seq, timestamp_ms, ax_mv, ay_mv, az_mv)| SensorPacket {
            node_id,
            seq,
            timestamp_ms,
            ax_mv,
            ay_mv,
            az_mv,
        },
    )
}

#[test]
fn crc_check_value() {
    assert_eq!(crc16_ccitt_false(b"123456789"), 0x29B1);
    assert_eq!(ORACLE.checksum(b"123456789"), 0x29B1);
}

#[test]
fn every_single_bit_flip_is_caught() {
    let p = SensorPacket {
        node_id: 0x0102,
        seq: 0x0304,
        timestamp_ms: 0x0506_0708,
        ax_mv: 1650,
        ay_mv: 1650,
        az_mv: 1850,
    };
    let frame = encode_packet(&p);
    for byte in 0..FRAME_LEN {
        for bit in 0..8 {
            let mut bad = frame;
            bad[byte] ^= 1 << bit;
            assert!(decode_packet(&bad).is_err(), "flip byte {byte} bit {bit}");
        }
    }
}

#[test]
fn every_single_byte_substitution_is_caught() {
    let frame = encode_packet(&SensorPacket {
        node_id: 7,
        seq: 99,
        timestamp_ms: 123_456,
        ax_mv: 1,
        ay_mv: 3300,
        az_mv: 0,
    });
    for byte in 0..FRAME_LEN {
        for delta in 1..=255u8 {
            let mut bad = frame;
            bad[byte] ^= delta;
            assert!(decode_packet(&bad).is_err(), "byte {byte} xor {delta:#04x}");
        }
    }
}

#[test]
fn magic_is_checked_before_crc() {
    let mut frame = encode_packet(&SensorPacket {
        node_id: 1,
        seq: 1,
        timestamp_ms: 1,
        ax_mv: 1,
        ay_mv: 1,
        az_mv: 1,
    });
    frame[0] = 0x5A;
    assert!(matches!(decode_packet(&frame), Err(WireError::BadMagic(0x5A))));
    assert!(matches!(
        decode_packet(&frame[..FRAME_LEN - 1]),
        Err(WireError::BadLength { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn round_trip(p in packet()) {
        prop_assert_eq!(decode_packet(&encode_packet(&p)).unwrap(), p);
    }
}

proptest! {
    #[test]
    fn crc_matches_oracle(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        prop_assert_eq!(crc16_ccitt_false(&bytes), ORACLE.checksum(&bytes));
    }

    #[test]
    fn trailer_is_oracle_crc_of_body(p in packet()) {
        let frame = encode_packet(&p);
        let trailer = u16::from_le_bytes([frame[FRAME_LEN - 2], frame[FRAME_LEN - 1]]);
        prop_assert_eq!(trailer, ORACLE.checksum(&frame[..FRAME_LEN - 2]));
    }

    #[test]
    fn random_bit_flip_caught(p in packet(), bit in 0..FRAME_LEN * 8) {
        let mut frame = encode_packet(&p);
        frame[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(decode_packet(&frame).is_err());
    }

    /// Shuffling packets inside blocks of half the buffer depth is fully undone.
    #[test]
    fn local_shuffle_is_restored(blocks in proptest::collection::vec(
        Just((0..REORDER_DEPTH / 2).collect::<Vec<usize>>()).prop_shuffle(),
        1..50,
    )) {
        let order: Vec<usize> = blocks
            .iter()
            .enumerate()
            .flat_map(|(b, perm)| perm.iter().map(move |&k| b * REORDER_DEPTH / 2 + k))
            .collect();
        let n = order.len();
        let mut r = Reorderer::new();
        let mut out = Vec::new();
        for &k in &order {
            out.extend(r.push(SensorPacket {
                node_id: 1,
                seq: k as u16,
                timestamp_ms: k as u32 * 20,
                ax_mv: 0,
                ay_mv: 0,
                az_mv: 0,
            }));
        }
        out.extend(r.flush());
        let ts: Vec<u32> = out.iter().map(|p| p.timestamp_ms).collect();
        prop_assert_eq!(ts, (0..n as u32).map(|k| k * 20).collect::<Vec<_>>());
        prop_assert_eq!(r.stats().delivered, n as u64);
    }

    #[test]
    fn duplicates_never_delivered_twice(seqs in proptest::collection::vec(0u16..40, 1..200)) {
        let mut r = Reorderer::new();
        let mut out = Vec::new();
        for &s in &seqs {
            out.extend(r.push(SensorPacket {
                node_id: 3,
                seq: s,
                timestamp_ms: u32::from(s) * 20,
                ax_mv: 0,
                ay_mv: 0,
                az_mv: 0,
            }));
        }
        out.extend(r.flush());
        let mut seen: Vec<u16> = out.iter().map(|p| p.seq).collect();
        let delivered = seen.len();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), delivered);
        let stats = r.stats();
        prop_assert_eq!(stats.delivered + stats.duplicates + stats.late, seqs.len() as u64);
    }
}
