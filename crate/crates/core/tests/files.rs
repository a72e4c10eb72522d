use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use tempfile::TempDir;

use vrpl_core::ingest::{read_libsvm, read_returns_csv, write_libsvm, write_returns_csv, IngestError, LabelFilter};
use vrpl_core::metrics::{emit_trace, read_trace};
use vrpl_core::problems::synthetic::quadratic_rows;
use vrpl_core::{run_svr_pl, BatchSpec, Matrix, MetricsObserver, Schedule, Scheme};

#[test]
fn trace_survives_a_file() {
    let bp = quadratic_rows(40, 4, 3, 5);
    let sched = Schedule::uniform(3, 4, BatchSpec::full(40), BatchSpec::new(6, 3, true).unwrap(), 10.0);
    let mut obs = MetricsObserver::new(&bp.problem, 10.0, 2);
    let r = run_svr_pl(&bp.problem, Scheme::SvrgCorrected, &sched, &bp.x0, 8, &mut obs).unwrap();
    assert_eq!(r.trace.len(), 12 / 2 + 1);

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("trace.csv");
    emit_trace(&r.trace, BufWriter::new(File::create(&path).unwrap())).unwrap();
    let back = read_trace(BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(back, r.trace);
}

#[test]
fn libsvm_file_round_trip_with_filter() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("digits.libsvm");
    std::fs::write(&path, "3 1:0.5 4:1\n\n8 2:0.25\n7 3:2\n3 2:1e-3 5:-1\n").unwrap();
    let data = read_libsvm(&path, Some(LabelFilter { positive: 3.0, negative: 8.0 })).unwrap();
    assert_eq!(data.len(), 3);
    assert_eq!(data.dim, 5);
    assert_eq!(data.rows.iter().map(|r| r.label).collect::<Vec<_>>(), vec![1.0, -1.0, 1.0]);

    let copy = dir.path().join("copy.libsvm");
    let mut w = BufWriter::new(File::create(&copy).unwrap());
    write_libsvm(&data, &mut w).unwrap();
    w.flush().unwrap();
    drop(w);
    assert_eq!(read_libsvm(&copy, None).unwrap(), data);
}

#[test]
fn libsvm_errors() {
    let dir = TempDir::new().unwrap();
    assert!(matches!(read_libsvm(&dir.path().join("missing"), None), Err(IngestError::Io(_))));
    let bad = dir.path().join("bad.libsvm");
    std::fs::write(&bad, "1 1:0.5\n1 3:1 2:1\n").unwrap();
    assert!(matches!(read_libsvm(&bad, None), Err(IngestError::Parse { line: 2, .. })));
}

#[test]
fn returns_file_round_trip() {
    let table = Matrix::from_rows(&[vec![0.01, -0.02, 0.5], vec![1e-9, 0.0, -3.25]]).unwrap();
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("r.csv");
    let mut w = BufWriter::new(File::create(&path).unwrap());
    write_returns_csv(&table, &mut w).unwrap();
    w.flush().unwrap();
    drop(w);
    assert_eq!(read_returns_csv(&path, false).unwrap(), table);

    let with_header = dir.path().join("h.csv");
    std::fs::write(&with_header, format!("a,b,c\n{}", std::fs::read_to_string(&path).unwrap())).unwrap();
    assert_eq!(read_returns_csv(&with_header, true).unwrap(), table);
    assert!(read_returns_csv(&with_header, false).is_err());
}
