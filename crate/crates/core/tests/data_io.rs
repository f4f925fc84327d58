use std::fs;
use std::path::Path;

use hwgcn::data::{
    dump_bundle, dump_split, fixed_split, load_bundle, load_bundle_with_report, random_split,
    random_split_with_sizes, sbm, GraphBundle, SbmConfig, SplitKind,
};
use hwgcn::Error;

fn cora_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cora")
}

fn toy() -> GraphBundle {
    let mut b = sbm(&SbmConfig {
        class_sizes: vec![30, 25, 35],
        ..SbmConfig::default()
    })
    .unwrap();
    b.name = "toy".into();
    b
}

fn write_bundle(dir: &Path, manifest: &str, graph: &str, features: &str, labels: &str) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("manifest.tsv"), manifest).unwrap();
    fs::write(dir.join("graph.tsv"), graph).unwrap();
    fs::write(dir.join("features.tsv"), features).unwrap();
    fs::write(dir.join("labels.tsv"), labels).unwrap();
}

fn parse_line(e: Error) -> (String, usize) {
    match e {
        Error::Parse { path, line, .. } => (path.file_name().unwrap().to_string_lossy().into_owned(), line),
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn bundles_round_trip_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let b = toy();
    let dir = tmp.path().join("toy");
    dump_bundle(&b, &dir).unwrap();
    let back = load_bundle(&dir).unwrap();
    assert_eq!(back, b);
    let again = tmp.path().join("again").join("toy");
    dump_bundle(&back, &again).unwrap();
    for f in ["manifest.tsv", "graph.tsv", "features.tsv", "labels.tsv"] {
        assert_eq!(fs::read(dir.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn cora_bundle_has_the_benchmark_shape() {
    let (b, report) = load_bundle_with_report(&cora_dir()).unwrap();
    let s = b.stats();
    assert_eq!((s.nodes, s.features, s.classes), (2708, 1433, 7));
    assert_eq!(s.edges, 5278);
    assert_eq!(report.edge_lines, 5429);
    assert_eq!(s.class_sizes.iter().sum::<usize>(), 2708);
}

#[test]
fn malformed_lines_report_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let m = "n\t3\nfeatures\t2\nclasses\t2\n";
    let good_f = "0\t0\t1.0\n1\t1\t1.0\n";
    let good_l = "0\t0\n1\t1\n2\t0\n";
    let cases: [(&str, &str, &str, &str, &str, usize); 7] = [
        (m, "0\t1\n\n1\tx\n", good_f, good_l, "graph.tsv", 3),
        (m, "0\t1\n1\t7\n", good_f, good_l, "graph.tsv", 2),
        (m, "0\t1\t2\n", good_f, good_l, "graph.tsv", 1),
        (m, "0\t1\n", "0\t0\t1.0\n0\t0\t2.0\n", good_l, "features.tsv", 2),
        (m, "0\t1\n", "0\t5\t1.0\n", good_l, "features.tsv", 1),
        (m, "0\t1\n", good_f, "0\t0\n1\t1\n2\t2\n", "labels.tsv", 3),
        ("n\t3\nsize\t4\n", "", "", "", "manifest.tsv", 2),
    ];
    for (idx, (m, g, f, l, file, line)) in cases.into_iter().enumerate() {
        let dir = tmp.path().join(format!("case{idx}"));
        write_bundle(&dir, m, g, f, l);
        assert_eq!(parse_line(load_bundle(&dir).unwrap_err()), (file.to_string(), line), "case {idx}");
    }
}

#[test]
fn missing_pieces_are_bundle_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("nolabel");
    write_bundle(&dir, "n\t2\nfeatures\t1\nclasses\t1\n", "", "", "0\t0\n");
    assert!(matches!(load_bundle(&dir), Err(Error::Bundle { .. })));
    fs::remove_file(dir.join("graph.tsv")).unwrap();
    match load_bundle(&dir) {
        Err(Error::Bundle { path, message }) => {
            assert!(path.ends_with("graph.tsv"));
            assert_eq!(message, "missing file");
        }
        other => panic!("{other:?}"),
    }
    let empty = tmp.path().join("empty");
    write_bundle(&empty, "n\t0\nfeatures\t1\nclasses\t1\n", "", "", "");
    assert!(matches!(load_bundle(&empty), Err(Error::EmptyGraph)));
}

#[test]
fn single_node_without_edges_loads() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("one");
    write_bundle(&dir, "n\t1\nfeatures\t1\nclasses\t1\n", "", "", "0\t0\n");
    let b = load_bundle(&dir).unwrap();
    let s = b.stats();
    assert_eq!((s.nodes, s.edges, s.isolated_nodes, s.feature_nnz), (1, 0, 1, 0));
}

#[test]
fn duplicate_and_self_loop_edges_are_dropped_and_counted() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("dups");
    write_bundle(&dir, "n\t3\nfeatures\t1\nclasses\t1\n", "0\t1\n1\t0\n2\t2\n1\t2\n", "", "0\t0\n1\t0\n2\t0\n");
    let (b, r) = load_bundle_with_report(&dir).unwrap();
    assert_eq!((r.edge_lines, r.duplicate_edges, r.self_loops), (4, 1, 1));
    assert_eq!(b.stats().edges, 2);
}

#[test]
fn splits_round_trip_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let b = load_bundle(&cora_dir()).unwrap();
    let split = random_split(&b, 20, 7).unwrap();
    let dir = tmp.path().join("split");
    dump_split(&split, &dir).unwrap();
    let read = fixed_split(&b, &dir).unwrap();
    assert_eq!((&read.train, &read.val, &read.test), (&split.train, &split.val, &split.test));
    assert_eq!(read.kind, SplitKind::Fixed);
    let again = tmp.path().join("again");
    dump_split(&read, &again).unwrap();
    for f in ["train.txt", "val.txt", "test.txt"] {
        assert_eq!(fs::read(dir.join(f)).unwrap(), fs::read(again.join(f)).unwrap());
    }
    // the shipped Cora split reads back unchanged too
    let shipped = fixed_split(&b, &cora_dir().join("split")).unwrap();
    assert_eq!((shipped.train.len(), shipped.val.len(), shipped.test.len()), (140, 500, 1000));
}

#[test]
fn overlapping_split_files_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let b = toy();
    let dir = tmp.path().join("bad");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("train.txt"), "0\n1\n").unwrap();
    fs::write(dir.join("val.txt"), "2\n").unwrap();
    fs::write(dir.join("test.txt"), "3\n1\n").unwrap();
    assert!(matches!(fixed_split(&b, &dir), Err(Error::Split(_))));
    fs::write(dir.join("test.txt"), "3\n3\n").unwrap();
    assert!(matches!(fixed_split(&b, &dir), Err(Error::Split(_))));
    fs::write(dir.join("test.txt"), "3\n900\n").unwrap();
    assert!(matches!(fixed_split(&b, &dir), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn random_splits_are_balanced_and_seeded() {
    let b = load_bundle(&cora_dir()).unwrap();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); b.classes];
    for (i, &c) in b.labels.iter().enumerate() {
        members[c].push(i);
    }
    let mut low_half = 0usize;
    let mut picks = 0usize;
    let mut heldout = vec![0usize; b.n()];
    for seed in 0..50 {
        let s = random_split(&b, 20, seed).unwrap();
        s.validate(b.n()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (140, 500, 1000));
        let mut per = vec![0; b.classes];
        for &i in &s.train {
            per[b.labels[i]] += 1;
            let m = &members[b.labels[i]];
            if m.iter().position(|&j| j == i).unwrap() < m.len() / 2 {
                low_half += 1;
            }
            picks += 1;
        }
        assert!(per.iter().all(|&p| p == 20), "seed {seed}: {per:?}");
        for &i in s.val.iter().chain(&s.test) {
            heldout[i] += 1;
        }
        assert!(s.train.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(random_split(&b, 20, seed).unwrap(), s);
    }
    let frac = low_half as f64 / picks as f64;
    assert!((frac - 0.5).abs() < 0.05, "lower-half fraction {frac}");
    // about 1500 of the remaining 2568 nodes are held out per draw
    let mean = heldout.iter().sum::<usize>() as f64 / b.n() as f64;
    assert!((mean - 50.0 * 1500.0 / 2708.0).abs() < 1e-9);
    let max = *heldout.iter().max().unwrap();
    assert!(max <= 50 && max >= 40);
    assert_ne!(random_split(&b, 20, 0).unwrap(), random_split(&b, 20, 1).unwrap());
}

#[test]
fn impossible_random_splits_are_errors() {
    let labels = vec![0, 0, 1, 1, 1];
    assert!(matches!(random_split_with_sizes(&labels, 2, 3, 0, 0, 0), Err(Error::Split(_))));
    assert!(matches!(random_split_with_sizes(&labels, 2, 2, 1, 1, 0), Err(Error::Split(_))));
    assert!(matches!(random_split_with_sizes(&labels, 2, 0, 1, 1, 0), Err(Error::Split(_))));
    let ok = random_split_with_sizes(&labels, 2, 1, 2, 1, 0).unwrap();
    assert_eq!(ok.train.len() + ok.val.len() + ok.test.len(), 5);
}
