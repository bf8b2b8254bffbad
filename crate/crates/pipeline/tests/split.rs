use std::collections::BTreeSet;

use proptest::prelude::*;
use reportsmith_pipeline::{split_dataset, SplitRatios};

/// Independent restatement of the rounding rule for 80/10/10.
fn oracle_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 8 / 10;
    let rest = n - train;
    let test = rest.div_ceil(2);
    (train, test, rest - test)
}

#[test]
fn published_split_sizes() {
    let ids: Vec<u32> = (0..3903).collect();
    let s = split_dataset(&ids, &SplitRatios::default());
    assert_eq!(s.sizes(), (3122, 391, 390));
}

#[test]
fn sizes_follow_rule_for_every_n_up_to_10000() {
    let r = SplitRatios::default();
    for n in 3..=10_000 {
        assert_eq!(r.sizes(n), oracle_sizes(n), "n = {n}");
    }
}

proptest! {
    #[test]
    fn split_partitions_input(n in 3usize..=10_000, seed in any::<u64>()) {
        let ids: Vec<usize> = (0..n).collect();
        let ratios = SplitRatios { seed, ..SplitRatios::default() };
        let s = split_dataset(&ids, &ratios);
        prop_assert_eq!(s.sizes(), oracle_sizes(n));
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).chain(&s.validation).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, ids);
        let train: BTreeSet<_> = s.train.iter().collect();
        prop_assert!(s.test.iter().chain(&s.validation).all(|x| !train.contains(x)));
    }

    #[test]
    fn seed_fixes_membership_not_sizes(n in 3usize..2_000, a in any::<u64>(), b in any::<u64>()) {
        let ids: Vec<usize> = (0..n).collect();
        let ra = SplitRatios { seed: a, ..SplitRatios::default() };
        let rb = SplitRatios { seed: b, ..SplitRatios::default() };
        prop_assert_eq!(split_dataset(&ids, &ra), split_dataset(&ids, &ra));
        prop_assert_eq!(split_dataset(&ids, &ra).sizes(), split_dataset(&ids, &rb).sizes());
    }
}
