use std::collections::HashSet;

use kpzlat::seed;
use kpzlat::seed::{seed_stream, Label};

#[test]
fn golden_vector() {
    let text = include_str!("golden/seed_stream.txt");
    let mut checked = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let root: u64 = f[0].parse().unwrap();
        let idx: u64 = f[2].parse().unwrap();
        let want: u64 = f[3].parse().unwrap();
        assert_eq!(seed_stream(root, &[Label::from(f[1]), Label::Index(idx)]), want);
        checked += 1;
    }
    assert_eq!(checked, 1);
}

#[test]
fn a_million_replica_labels_do_not_collide() {
    let mut seen = HashSet::with_capacity(1 << 21);
    for i in 0..1_000_000u64 {
        assert!(seen.insert(seed!(0, "replica", i)), "collision at replica {i}");
    }
}

#[test]
fn changing_one_label_changes_the_seed() {
    // pairs that differ in exactly one component: the text label, the index, or the root
    let mut collisions = 0;
    for i in 0..1_000_000u64 {
        let base = seed!(i, "replica", i);
        if base == seed!(i, "replicb", i) || base == seed!(i, "replica", i ^ 1) || base == seed!(i ^ 1, "replica", i) {
            collisions += 1;
        }
    }
    assert_eq!(collisions, 0);
}
