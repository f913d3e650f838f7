use std::fs;

use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stokes_homog::io::{dump_field, format_config, load_field, parse_config, DumpError, FieldDump, FieldKind};

fn preset_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        (0.1f64..10.0).prop_map(|c| format!("preset = constant\nc = {c}\n")),
        (1.5f64..8.0).prop_map(|k| format!("preset = layered\nkappa = {k}\n")),
        (0.1f64..0.9).prop_map(|b| format!("preset = trig\nbeta = {b}\n")),
        ((1.5f64..8.0), (0.01f64..0.1)).prop_map(|(k, s)| format!("preset = checkerboard_smooth\nkappa = {k}\ns = {s}\n")),
    ]
}

fn config_strategy() -> impl Strategy<Value = String> {
    (
        preset_strategy(),
        2u32..8,
        1e-12f64..1e-6,
        1usize..5,
        0.1f64..4.0,
        8usize..200,
        1usize..4,
        prop::bool::ANY,
        0usize..10,
        prop::bool::ANY,
    )
        .prop_map(|(preset, log_cell, cell_tol, mult, t, m, count, zero, stride, uzawa)| {
            let n = 128 * mult;
            // eps = 1/2, 1/4, ... keeps eps n a multiple of 16
            let eps: Vec<String> = (1..=count).map(|k| format!("1/{}", 1 << k)).collect();
            format!(
                "{preset}n_cell = {}\ncell_tol = {cell_tol}\nn = {n}\nT = {t}\nM = {m}\neps = {}\nforcing = {}\nout = runs/a b\nstride = {stride}\nsolver = {}\n",
                1usize << log_cell,
                eps.join(", "),
                if zero { "zero" } else { "standard" },
                if uzawa { "uzawa" } else { "minres" },
            )
        })
}

proptest! {
    #[test]
    fn config_round_trip(text in config_strategy()) {
        let cfg = parse_config(&text).unwrap();
        let rendered = format_config(&cfg);
        let again = parse_config(&rendered).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(format_config(&again), rendered);
        for (a, b) in cfg.params.iter().chain(&[cfg.cell_tol, cfg.t_final]).zip(again.params.iter().chain(&[again.cell_tol, again.t_final])) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn field_round_trip(dims in prop::collection::vec(1usize..9, 1..4), seed in any::<u64>()) {
        let len = dims.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..len).map(|_| f64::from_bits(rng.random::<u64>() & !(0x7ff << 52) | (0x3ff << 52))).collect();
        let dump = FieldDump::new(FieldKind::MacP, dims, data).unwrap().with_meta("note", "x y");
        let back = FieldDump::decode(&dump.encode().unwrap()).unwrap();
        prop_assert_eq!(back, dump);
    }
}

#[test]
fn random_field_survives_disk_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.field");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut data: Vec<f64> = (0..64 * 64).map(|_| rng.random_range(-1e3..1e3)).collect();
    data[0] = -0.0;
    data[1] = f64::MIN_POSITIVE / 4.0;
    data[2] = f64::NAN;
    let dump = FieldDump::new(FieldKind::Cell, vec![64, 64], data.clone()).unwrap().with_meta("t", 0.5);
    dump_field(&path, &dump).unwrap();
    let back = load_field(&path).unwrap();
    assert_eq!(back.kind, FieldKind::Cell);
    assert_eq!(back.dims, vec![64, 64]);
    assert_eq!(back.meta("t").unwrap(), "0.5");
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.data), bits(&data));
    assert_eq!(fs::read(&path).unwrap(), dump.encode().unwrap());
}

#[test]
fn damaged_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.field");
    let dump = FieldDump::new(FieldKind::MacU, vec![3, 4], (0..12).map(f64::from).collect()).unwrap();
    let bytes = dump.encode().unwrap();

    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(load_field(&path), Err(DumpError::Truncated { expected: 96, found: 93 })));

    let mut long = bytes.clone();
    long.extend_from_slice(&[0; 8]);
    fs::write(&path, &long).unwrap();
    assert!(matches!(load_field(&path), Err(DumpError::TrailingBytes { extra: 8 })));

    let mut bad = bytes.clone();
    bad[0] = b'X';
    fs::write(&path, &bad).unwrap();
    assert!(matches!(load_field(&path), Err(DumpError::BadMagic { .. })));

    assert!(matches!(load_field(&dir.path().join("missing")), Err(DumpError::Io(_))));
    assert!(FieldDump::new(FieldKind::MacU, vec![3, 4], vec![0.0; 11]).is_err());
}

#[test]
fn config_errors_are_collected() {
    let err = parse_config("preset = trig\nbeta = 0.5\nn = 60\nM = 4\neps = 1/4, 1/2\nwhat = 1\n").unwrap_err();
    for needle in ["n = 60", "M", "decrease", "what"] {
        assert!(err.mentions(needle), "{needle} missing from {err}");
    }
    assert!(err.issues.len() >= 4);
    assert!(parse_config("").unwrap_err().mentions("preset"));
}
