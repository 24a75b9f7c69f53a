//! FVB labeled-feature file.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FVB1"
//! 4       4     version (u32 LE) = 1
//! 8       4     dim (u32 LE)
//! 12      4     record count (u32 LE)
//! 16      4     distinct label count, 0 if unknown (u32 LE)
//! 20      ...   records: label (u32 LE), then dim x f32 LE
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureSet, Record};
use crate::error::{Error, FormatKind, Result};

pub const FVB_MAGIC: [u8; 4] = *b"FVB1";
pub const FVB_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn write_features<W: Write>(set: &FeatureSet, mut out: W) -> Result<()> {
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&FVB_MAGIC);
    header.extend_from_slice(&FVB_VERSION.to_le_bytes());
    header.extend_from_slice(&u32_field(set.dim())?.to_le_bytes());
    header.extend_from_slice(&u32_field(set.len())?.to_le_bytes());
    header.extend_from_slice(&u32_field(set.labels().len())?.to_le_bytes());
    out.write_all(&header)?;
    let mut buf = Vec::with_capacity(4 + 4 * set.dim());
    for r in set.records() {
        buf.clear();
        buf.extend_from_slice(&r.label.to_le_bytes());
        for v in &r.vector {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

fn u32_field(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Contract(format!("{v} does not fit a u32 header field")))
}

pub fn read_features<R: Read>(mut source: R) -> Result<FeatureSet> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    parse(&bytes)
}

pub fn write_features_file(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    write_features(set, BufWriter::new(File::create(path)?))
}

pub fn read_features_file(path: impl AsRef<Path>) -> Result<FeatureSet> {
    read_features(File::open(path)?)
}

fn word(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn parse(bytes: &[u8]) -> Result<FeatureSet> {
    if bytes.len() < 4 || bytes[..4] != FVB_MAGIC {
        return Err(Error::format(FormatKind::BadMagic, 0));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(FormatKind::Truncated, bytes.len() as u64));
    }
    let version = word(bytes, 4);
    if version != FVB_VERSION {
        return Err(Error::format(FormatKind::BadVersion(version), 4));
    }
    let dim = word(bytes, 8) as usize;
    if dim == 0 {
        return Err(Error::format(FormatKind::Invalid, 8));
    }
    let count = word(bytes, 12) as usize;
    let declared_labels = word(bytes, 16) as usize;
    let record_len = 4 + 4 * dim;

    let mut records = Vec::with_capacity(count.min(bytes.len() / record_len));
    for index in 0..count {
        let start = HEADER_LEN + index * record_len;
        if bytes.len() < start + record_len {
            return Err(Error::Format {
                kind: FormatKind::Truncated,
                offset: bytes.len() as u64,
                record: Some(index),
            });
        }
        let label = word(bytes, start);
        let mut vector = Vec::with_capacity(dim);
        for c in 0..dim {
            let at = start + 4 + 4 * c;
            let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Format {
                    kind: FormatKind::NonFinite,
                    offset: at as u64,
                    record: Some(index),
                });
            }
            vector.push(v);
        }
        records.push(Record { label, vector });
    }
    let end = HEADER_LEN + count * record_len;
    if bytes.len() != end {
        return Err(Error::format(FormatKind::Invalid, end as u64));
    }
    let set = FeatureSet::new(dim, records)?;
    if declared_labels != 0 && declared_labels != set.labels().len() {
        return Err(Error::format(FormatKind::Invalid, 16));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(set: &FeatureSet) -> Vec<u8> {
        let mut out = Vec::new();
        write_features(set, &mut out).unwrap();
        out
    }

    fn sample() -> FeatureSet {
        FeatureSet::new(
            2,
            vec![
                Record {
                    label: 7,
                    vector: vec![1.5, -0.0],
                },
                Record {
                    label: 2,
                    vector: vec![f32::MIN_POSITIVE, 3.0],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_set_is_a_bare_header() {
        let bytes = encode(&FeatureSet::new(3, vec![]).unwrap());
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[..4], b"FVB1");
        assert_eq!(bytes[4..].iter().map(|&b| b as u32).sum::<u32>(), 1 + 3);
        assert_eq!(read_features(&bytes[..]).unwrap().len(), 0);
    }

    #[test]
    fn exact_layout() {
        let set = FeatureSet::new(
            2,
            vec![Record {
                label: 1,
                vector: vec![1.0, -2.0],
            }],
        )
        .unwrap();
        let bytes = encode(&set);
        assert_eq!(bytes.len(), 20 + 4 + 8);
        let expected: Vec<u8> = [
            &b"FVB1"[..],
            &1u32.to_le_bytes(),
            &2u32.to_le_bytes(),
            &1u32.to_le_bytes(),
            &1u32.to_le_bytes(),
            &1u32.to_le_bytes(),
            &1.0f32.to_le_bytes(),
            &(-2.0f32).to_le_bytes(),
        ]
        .concat();
        assert_eq!(bytes, expected);
    }

    #[test]
    fn roundtrip_keeps_bits() {
        let set = sample();
        let back = read_features(&encode(&set)[..]).unwrap();
        assert_eq!(back.records()[0].vector[1].to_bits(), (-0.0f32).to_bits());
        assert_eq!(back, set);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&sample());
        bytes[0] = b'X';
        match read_features(&bytes[..]) {
            Err(Error::Format {
                kind: FormatKind::BadMagic,
                offset: 0,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_features(&b"FV"[..]),
            Err(Error::Format {
                kind: FormatKind::BadMagic,
                ..
            })
        ));
    }

    #[test]
    fn bad_version() {
        let mut bytes = encode(&sample());
        bytes[4] = 2;
        assert!(matches!(
            read_features(&bytes[..]),
            Err(Error::Format {
                kind: FormatKind::BadVersion(2),
                offset: 4,
                ..
            })
        ));
    }

    #[test]
    fn truncated_records() {
        let bytes = encode(&sample());
        match read_features(&bytes[..bytes.len() - 3]) {
            Err(Error::Format {
                kind: FormatKind::Truncated,
                record: Some(1),
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_features(&bytes[..10]),
            Err(Error::Format {
                kind: FormatKind::Truncated,
                ..
            })
        ));
    }

    #[test]
    fn non_finite_component() {
        let mut bytes = encode(&sample());
        bytes[20 + 4 + 4 * 2 + 4..20 + 4 + 4 * 2 + 8].copy_from_slice(&f32::NAN.to_le_bytes());
        match read_features(&bytes[..]) {
            Err(Error::Format {
                kind: FormatKind::NonFinite,
                offset,
                record: Some(1),
            }) => {
                assert_eq!(offset, 20 + 12 + 4)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_and_label_count() {
        let mut bytes = encode(&sample());
        bytes.push(0);
        assert!(matches!(
            read_features(&bytes[..]),
            Err(Error::Format {
                kind: FormatKind::Invalid,
                ..
            })
        ));
        let mut bytes = encode(&sample());
        bytes[16] = 5;
        assert!(matches!(
            read_features(&bytes[..]),
            Err(Error::Format {
                kind: FormatKind::Invalid,
                offset: 16,
                ..
            })
        ));
        // 0 means unknown
        bytes[16] = 0;
        assert_eq!(read_features(&bytes[..]).unwrap(), sample());
    }

    proptest! {
        #[test]
        fn write_read_write_is_stable(
            dim in 1usize..6,
            rows in proptest::collection::vec((0u32..10, proptest::collection::vec(-1e6f32..1e6, 6)), 0..30),
        ) {
            let records = rows.into_iter().map(|(label, v)| Record { label, vector: v[..dim].to_vec() }).collect();
            let set = FeatureSet::new(dim, records).unwrap();
            let bytes = encode(&set);
            let back = read_features(&bytes[..]).unwrap();
            prop_assert_eq!(&back, &set);
            prop_assert_eq!(encode(&back), bytes);
        }
    }
}
