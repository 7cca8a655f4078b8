//! MSTF files built byte by byte, independent of the encoder, plus a corpus
//! of damaged files that must all be rejected without panicking.

use unipool::data::{decode_tensor_file, encode_tensor_file, read_tensor_file, write_tensor_file, DataError, Dataset};
use unipool::nn::Tensor4;

/// Reference encoder written straight from the layout description.
fn reference_bytes(shape: [u32; 4], values: &[f32], labels: &[u16], meta: &str) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(b"MSTF");
    b.extend_from_slice(&1u32.to_le_bytes());
    for d in shape {
        b.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for l in labels {
        b.extend_from_slice(&l.to_le_bytes());
    }
    b.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    b.extend_from_slice(meta.as_bytes());
    b
}

fn sample() -> (Dataset, Vec<u8>) {
    let shape = [3usize, 2, 2, 3];
    let values: Vec<f32> = (0..36).map(|i| (i as f32 - 17.5) * 0.37).collect();
    let labels = [2u16, 0, 1];
    let names = ["forest", "river", "sea lake"];
    let ds = Dataset::new(
        Tensor4::from_vec(shape, values.clone()).unwrap(),
        labels.iter().map(|&l| l as usize).collect(),
        3,
        names.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap();
    let bytes = reference_bytes([3, 2, 2, 3], &values, &labels, &names.join("\n"));
    (ds, bytes)
}

#[test]
fn encoder_matches_reference_layout() {
    let (ds, expected) = sample();
    assert_eq!(encode_tensor_file(&ds).unwrap(), expected);
}

#[test]
fn decoder_reads_reference_layout() {
    let (ds, bytes) = sample();
    let back = decode_tensor_file(&bytes).unwrap();
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.class_names(), ds.class_names());
    assert_eq!(back.sample_shape(), [2, 2, 3]);
    assert_eq!(back.images().data(), ds.images().data());
}

#[test]
fn special_floats_survive_bit_for_bit() {
    let values = [f32::NAN, -0.0, f32::INFINITY, f32::MIN_POSITIVE / 2.0];
    let ds = Dataset::new(Tensor4::from_vec([1, 4, 1, 1], values.to_vec()).unwrap(), vec![0], 1, vec![]).unwrap();
    let back = decode_tensor_file(&encode_tensor_file(&ds).unwrap()).unwrap();
    let bits: Vec<u32> = back.images().data().iter().map(|v| v.to_bits()).collect();
    assert_eq!(bits, values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn desk_scale_file_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.mstf");
    let values: Vec<f32> = (0..2 * 13 * 16 * 16).map(|i| (i as f32).sin()).collect();
    let ds = Dataset::new(Tensor4::from_vec([2, 13, 16, 16], values).unwrap(), vec![0, 1], 2, vec![]).unwrap();
    write_tensor_file(&path, &ds).unwrap();
    let first = std::fs::read(&path).unwrap();
    let back = read_tensor_file(&path).unwrap();
    write_tensor_file(&path, &back).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    // 4 + 4 + 16 header, floats, u16 labels, u32 metadata length.
    assert_eq!(first.len(), 24 + 4 * 2 * 13 * 16 * 16 + 2 * 2 + 4);
}

#[test]
fn corrupted_corpus_is_rejected() {
    let (_, good) = sample();
    let mut corpus: Vec<(&str, Vec<u8>)> = Vec::new();

    let mut bad_magic = good.clone();
    bad_magic[..4].copy_from_slice(b"XXXX");
    corpus.push(("bad magic", bad_magic));

    let mut bad_version = good.clone();
    bad_version[4..8].copy_from_slice(&7u32.to_le_bytes());
    corpus.push(("bad version", bad_version));

    let mut big_n = good.clone();
    big_n[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
    corpus.push(("n overflows the file", big_n));

    let mut big_all = good.clone();
    for k in 0..4 {
        big_all[8 + 4 * k..12 + 4 * k].copy_from_slice(&u32::MAX.to_le_bytes());
    }
    corpus.push(("all dims at u32::MAX", big_all));

    let mut long_meta = good.clone();
    let meta_at = good.len() - "forest\nriver\nsea lake".len() - 4;
    long_meta[meta_at..meta_at + 4].copy_from_slice(&1000u32.to_le_bytes());
    corpus.push(("metadata length past end", long_meta));

    let mut bad_utf8 = good.clone();
    let last = bad_utf8.len() - 1;
    bad_utf8[last] = 0xff;
    corpus.push(("metadata not utf-8", bad_utf8));

    let mut trailing = good.clone();
    trailing.push(0);
    corpus.push(("trailing byte", trailing));

    corpus.push(("empty", Vec::new()));
    corpus.push(("header only", good[..24].to_vec()));
    corpus.push(("missing metadata length", good[..good.len() - 25].to_vec()));

    for (what, bytes) in &corpus {
        assert!(decode_tensor_file(bytes).is_err(), "{what} accepted");
    }
    assert!(matches!(decode_tensor_file(&corpus[0].1), Err(DataError::BadMagic(_))));
    assert!(matches!(decode_tensor_file(&corpus[1].1), Err(DataError::UnsupportedVersion(7))));
}

#[test]
fn label_beyond_u16_cannot_be_written() {
    let ds = Dataset::new(Tensor4::from_vec([1, 1, 1, 1], vec![0.0]).unwrap(), vec![65_536], 65_537, vec![]).unwrap();
    assert!(matches!(encode_tensor_file(&ds), Err(DataError::LabelTooLarge { .. })));
}
