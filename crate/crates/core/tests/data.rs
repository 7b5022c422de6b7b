use fairge::data::{masked_count, read_mask_file, write_attributes, write_mask_file};
use fairge::{apply_missing_mask, load_attributes, load_edge_list, make_split, Dataset, FairgeError, SensitiveColumn};
use proptest::prelude::*;

const ATTRS: &str = "id,age,sensitive,income,label\n0,30,1,2.5,1\n1,41,0,1.0,0\n2,25,1,3.5,1\n";

#[test]
fn attribute_csv_keeps_sensitive_column_in_place() {
    let (attrs, s, y) = load_attributes(ATTRS).unwrap();
    assert_eq!((attrs.n(), attrs.d()), (3, 3));
    assert_eq!(attrs.sensitive_index(), 1);
    assert_eq!(attrs.row(2), &[25.0, 1.0, 3.5]);
    assert_eq!(s.values(), &[1, 0, 1]);
    assert_eq!(s.missing_count(), 0);
    assert_eq!(y.as_slice(), &[1, 0, 1]);
}

#[test]
fn attribute_csv_round_trips() {
    let (attrs, s, y) = load_attributes(ATTRS).unwrap();
    let text = write_attributes(&attrs, &s, &y).unwrap();
    let (a2, s2, y2) = load_attributes(&text).unwrap();
    assert_eq!((a2, s2, y2), (attrs, s, y));
}

#[test]
fn rows_may_arrive_out_of_order() {
    let shuffled = "id,f,sensitive,label\n2,0.5,1,0\n0,1.5,0,1\n1,2.5,1,1\n";
    let (attrs, s, _) = load_attributes(shuffled).unwrap();
    assert_eq!(attrs.get(0, 0), 1.5);
    assert_eq!(s.values(), &[0, 1, 1]);
}

#[test]
fn malformed_attribute_files() {
    assert!(matches!(
        load_attributes("id,f,label\n0,1,0\n"),
        Err(FairgeError::MissingColumn(c)) if c == "sensitive"
    ));
    assert!(matches!(
        load_attributes("id,f,sensitive,label\n0,1,0,0\n2,1,0,0\n"),
        Err(FairgeError::NonContiguousIds(_))
    ));
    assert!(load_attributes("id,f,sensitive,label\n0,abc,0,0\n").is_err());
    assert!(load_attributes("id,f,sensitive,label\n0,1,0.5,0\n").is_err());
}

#[test]
fn dataset_rejects_size_mismatch() {
    let r = Dataset::from_text("0 1\n1 2\n2 3\n", ATTRS);
    assert!(matches!(r, Err(FairgeError::DimensionMismatch(_))));
    let ok = Dataset::from_text("# n=3\n0 1\n", ATTRS).unwrap();
    assert_eq!(ok.graph.n(), 3);
}

#[test]
fn mask_file_round_trip_and_range_check() {
    let s = SensitiveColumn::complete(vec![0, 1, 0, 1, 1]);
    let masked = apply_missing_mask(&s, 0.4, 7).unwrap();
    let text = write_mask_file(&masked);
    let ids = read_mask_file(&text, 5).unwrap();
    assert_eq!(ids, masked.missing_ids());
    assert!(read_mask_file("9\n", 5).is_err());
    assert!(read_mask_file("x\n", 5).is_err());
}

#[test]
fn masking_rejects_bad_rates_and_double_masking() {
    let s = SensitiveColumn::complete(vec![0, 1, 0, 1]);
    assert!(apply_missing_mask(&s, 1.0, 0).is_err());
    assert!(apply_missing_mask(&s, -0.1, 0).is_err());
    let once = apply_missing_mask(&s, 0.5, 0).unwrap();
    assert!(apply_missing_mask(&once, 0.5, 0).is_err());
}

#[test]
fn edge_list_parser_cases() {
    assert!(matches!(load_edge_list(""), Err(FairgeError::EmptyInput)));
    assert!(load_edge_list("# n=2\n0 5\n").is_err());
    let g = load_edge_list("0 1\n\n  1 2  \n").unwrap();
    assert_eq!(g.edge_count(), 2);
    assert_eq!(load_edge_list(&g.to_edge_list()).unwrap(), g);
}

proptest! {
    #[test]
    fn mask_hides_exactly_floor_rate_n(n in 1usize..300, rate in 0.0f64..0.99, seed in any::<u64>()) {
        let values: Vec<u32> = (0..n as u32).map(|i| i % 2).collect();
        let s = SensitiveColumn::complete(values.clone());
        let m = apply_missing_mask(&s, rate, seed).unwrap();
        prop_assert_eq!(m.missing_count(), masked_count(rate, n));
        prop_assert_eq!(m.missing_count(), (rate * n as f64 + 1e-9).floor() as usize);
        prop_assert_eq!(m.values(), &values[..]);
        prop_assert_eq!(apply_missing_mask(&s, rate, seed).unwrap(), m);
    }

    #[test]
    fn split_partitions_nodes(n in 4usize..400, seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let available = n - 2 * (n / 4);
        let train_size = (frac * available as f64) as usize;
        let sp = make_split(n, train_size, seed).unwrap();
        prop_assert_eq!(sp.val.len(), n / 4);
        prop_assert_eq!(sp.test.len(), n / 4);
        prop_assert_eq!(sp.train.len(), train_size);
        let mut all: Vec<usize> = sp.train.iter().chain(&sp.val).chain(&sp.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), train_size + 2 * (n / 4));
        prop_assert!(all.iter().all(|&i| i < n));
        prop_assert_eq!(make_split(n, train_size, seed).unwrap(), sp);
    }

    #[test]
    fn edge_list_round_trip(n in 1usize..40, pairs in proptest::collection::vec((0usize..40, 0usize..40), 0..120)) {
        let edges: Vec<(usize, usize)> = pairs.into_iter().map(|(a, b)| (a % n, b % n)).collect();
        let g = fairge::Graph::from_edges(n, &edges).unwrap();
        prop_assert!(g.is_symmetric());
        prop_assert_eq!(load_edge_list(&g.to_edge_list()).unwrap(), g);
    }
}
