use std::fs;
use std::path::Path;

use sem_core::market::parse_market_spec;
use sem_core::mechanism::Mechanism;
use sem_experiments::report::{emit_table1, write_table1};
use sem_experiments::table1::{table1, Table1Config, FOSTER};

fn small() -> Table1Config {
    Table1Config {
        market: parse_market_spec(FOSTER).unwrap(),
        replicas: vec![1, 5],
        seeds: vec![11, 12, 13, 14, 15],
        mechanisms: vec![Mechanism::Sem, Mechanism::SdRtb],
        keep_traces: true,
        ..Table1Config::standard().unwrap()
    }
}

#[test]
fn table1_csv_matches_golden() {
    let t = table1(&small()).unwrap();
    let mut buf = Vec::new();
    write_table1(&t.cells, &mut buf).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/table1_small.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &buf).unwrap();
    }
    assert_eq!(String::from_utf8(buf).unwrap(), fs::read_to_string(golden).unwrap());
}

#[test]
fn emitted_files_are_reproducible() {
    let cfg = small();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_table1(a.path(), &table1(&cfg).unwrap()).unwrap();
    emit_table1(b.path(), &table1(&Table1Config { workers: 3, ..cfg }).unwrap()).unwrap();
    for name in ["table1.csv", "runs.csv", "density_n1.svg", "density_n5.svg", "traces/sem-n5-seed13.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert!(!x.is_empty(), "{name}");
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert_eq!(fs::read_dir(a.path().join("traces")).unwrap().count(), 20);
}
