use std::fs;

use affect_core::ingest::{
    assemble_situation, list_indexed_files, load_accel_csv, load_eeg_csv, load_frames, read_pgm,
    write_accel_csv, write_eeg_csv, write_pgm, AccelSeries, EegRecording, GrayImage,
    TIMESTAMP_SIDECAR,
};
use affect_core::Error;

fn frame(w: usize, h: usize, k: u8) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| (x as u8).wrapping_mul(3) ^ (y as u8) ^ k)
}

#[test]
fn frames_load_in_numeric_order() {
    let dir = tempfile::tempdir().unwrap();
    for k in [10u8, 2, 1, 9] {
        write_pgm(&dir.path().join(format!("frame_{k}.pgm")), &frame(12, 8, k)).unwrap();
    }
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let idx: Vec<u64> = list_indexed_files(dir.path(), "frame_*.pgm")
        .unwrap()
        .into_iter()
        .map(|(i, _)| i)
        .collect();
    assert_eq!(idx, [1, 2, 9, 10]);

    let seq = load_frames(dir.path(), "frame_*.pgm", 25.0).unwrap();
    assert_eq!(seq.len(), 4);
    assert_eq!(seq.dims(), (12, 8));
    assert_eq!(seq.frames[3], frame(12, 8, 10));
    assert_eq!(seq.timestamps, [0.0, 0.04, 0.08, 0.12]);
}

#[test]
fn sidecar_timestamps_override_nominal_rate() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..3u8 {
        write_pgm(
            &dir.path().join(format!("frame_{k:04}.pgm")),
            &frame(8, 8, k),
        )
        .unwrap();
    }
    fs::write(dir.path().join(TIMESTAMP_SIDECAR), "0.5\n0.6\n0.75\n").unwrap();
    let seq = load_frames(dir.path(), "frame_*.pgm", 30.0).unwrap();
    assert_eq!(seq.timestamps, [0.5, 0.6, 0.75]);

    fs::write(dir.path().join(TIMESTAMP_SIDECAR), "0.5\n0.6\n").unwrap();
    assert!(matches!(
        load_frames(dir.path(), "frame_*.pgm", 30.0),
        Err(Error::Csv { .. })
    ));
}

#[test]
fn mixed_frame_sizes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_pgm(&dir.path().join("frame_0.pgm"), &frame(8, 8, 0)).unwrap();
    write_pgm(&dir.path().join("frame_1.pgm"), &frame(9, 8, 0)).unwrap();
    assert!(matches!(
        load_frames(dir.path(), "frame_*.pgm", 30.0),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn empty_and_missing_directories() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_frames(dir.path(), "frame_*.pgm", 30.0),
        Err(Error::EmptyDirectory { .. })
    ));
    assert!(matches!(
        load_frames(&dir.path().join("absent"), "frame_*.pgm", 30.0),
        Err(Error::Io { .. })
    ));
}

#[test]
fn truncated_pgm_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.pgm");
    fs::write(&p, b"P5\n4 4\n255\n\x01\x02").unwrap();
    let err = read_pgm(&p).unwrap_err();
    assert!(err.to_string().contains("bad.pgm"), "{err}");
}

#[test]
fn sensor_csvs_roundtrip_and_align() {
    let dir = tempfile::tempdir().unwrap();
    let fps = 10.0;
    for k in 0..30u8 {
        write_pgm(&dir.path().join(format!("frame_{k}.pgm")), &frame(8, 8, k)).unwrap();
    }
    let frames = load_frames(dir.path(), "frame_*.pgm", fps).unwrap();

    let at: Vec<f64> = (0..=150).map(|i| i as f64 * 0.02).collect();
    let samples = at.iter().map(|t| [t * 2.0, 0.0, 9.81]).collect();
    let accel = AccelSeries::new(at, samples).unwrap();
    let accel_path = dir.path().join("accel.csv");
    write_accel_csv(&accel_path, &accel).unwrap();
    let accel = load_accel_csv(&accel_path).unwrap();

    let fs_eeg = 100.0;
    let et: Vec<f64> = (0..=300).map(|i| i as f64 / fs_eeg).collect();
    let ch = et.iter().map(|t| (t * 40.0).sin()).collect::<Vec<_>>();
    let eeg = EegRecording::new(et.clone(), [ch.clone(), ch], fs_eeg).unwrap();
    let eeg_path = dir.path().join("eeg.csv");
    write_eeg_csv(&eeg_path, &eeg).unwrap();
    let eeg = load_eeg_csv(&eeg_path).unwrap();
    assert_eq!(eeg.sample_rate, fs_eeg);

    let s = assemble_situation("s01", frames, &accel, &eeg).unwrap();
    assert_eq!(s.accel_at_frames.len(), 30);
    for (t, a) in s
        .accel_at_frames
        .timestamps
        .iter()
        .zip(&s.accel_at_frames.samples)
    {
        assert!((a[0] - 2.0 * t).abs() < 1e-9);
    }
    assert!((s.duration_s - 2.9).abs() < 1e-9);
    assert_eq!(s.eeg.filled_count(), 0);
    assert!(s.eeg.timestamps.first().unwrap() >= &0.0);
    assert!(*s.eeg.timestamps.last().unwrap() <= 2.9 + 1e-9);
}

#[test]
fn csv_missing_column_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("accel.csv");
    fs::write(&p, "t,ax,ay\n0,1,2\n").unwrap();
    let err = load_accel_csv(&p).unwrap_err();
    assert!(matches!(err, Error::Csv { .. }), "{err}");
    assert!(err.to_string().contains("az"), "{err}");
}
