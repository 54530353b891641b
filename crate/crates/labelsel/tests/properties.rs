//! Cross-module property tests: format round-trips, geometric invariance of
//! clustering and selection, sampling uniformity, and schedule laws.

use proptest::prelude::*;

use labelsel::cluster::{self, ClusterParams, InitMethod};
use labelsel::curriculum;
use labelsel::ingest::{self, EmbeddingMatrix};
use labelsel::policy::{self, PolicyKind, PolicySpec};
use labelsel::select::{self, ClustererKind};

fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(rows, cols)| {
        proptest::collection::vec(-1.0e6f32..1.0e6f32, rows * cols).prop_map(move |data| {
            EmbeddingMatrix::new((0..rows as u64).collect(), data, cols).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emb1_round_trip_is_bit_exact(m in matrix_strategy(12, 6)) {
        let bytes = ingest::embeddings_to_bin(&m).unwrap();
        let back = ingest::embeddings_from_bin(&bytes).unwrap();
        prop_assert_eq!(back.ids(), m.ids());
        for (a, b) in back.data().iter().zip(m.data().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_and_binary_parse_to_equal_matrices(m in matrix_strategy(10, 4)) {
        let via_csv = ingest::parse_embeddings_csv(&ingest::embeddings_to_csv(&m)).unwrap();
        let via_bin = ingest::embeddings_from_bin(&ingest::embeddings_to_bin(&m).unwrap()).unwrap();
        prop_assert_eq!(&via_csv, &via_bin);
        prop_assert_eq!(&via_csv, &m);
    }

    #[test]
    fn selection_size_and_distinctness(
        m in matrix_strategy(20, 3),
        n_frac in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let n = 1 + ((m.n_samples() - 1) as f64 * n_frac) as usize;
        let sel = select::select_by_clustering(
            &m, n, ClustererKind::KMeans, &ClusterParams { restarts: 2, ..ClusterParams::default() }, seed,
        ).unwrap();
        prop_assert_eq!(sel.indices.len(), n);
        let mut sorted = sel.indices.clone();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), n, "indices must be distinct");
        prop_assert!(sel.indices.iter().all(|&i| i < m.n_samples()));
    }

    #[test]
    fn schedule_laws_hold(
        kind_pick in 0usize..5,
        n in 0usize..400,
        n0_frac in 0.0f64..1.0,
        e in 1usize..120,
        window in (0.0f64..1.0, 0.0f64..1.0),
        m_chunk in 1usize..16,
    ) {
        let kinds = [PolicyKind::Naive, PolicyKind::Linear, PolicyKind::Step,
                     PolicyKind::LateJump, PolicyKind::LateLinear];
        let kind = kinds[kind_pick];
        let mut n0 = (n as f64 * n0_frac) as usize;
        let mut e0 = (e as f64 * window.0) as usize;
        let mut ef = e0 + ((e - e0) as f64 * window.1) as usize;
        if kind == PolicyKind::Naive { n0 = n; }
        if kind == PolicyKind::LateJump { ef = e0; }
        e0 = e0.min(e);
        ef = ef.clamp(e0, e);
        let spec = PolicySpec { kind, n, n0, e, e0, ef, m: m_chunk };
        let s = policy::build_schedule(&spec).unwrap();
        prop_assert_eq!(s.counts.len(), e);
        for w in s.counts.windows(2) {
            prop_assert!(w[0] <= w[1], "schedule must be monotone");
        }
        for (epoch, &c) in s.counts.iter().enumerate() {
            prop_assert!((n0..=n).contains(&c));
            if epoch < e0 { prop_assert_eq!(c, n0); }
            if epoch >= ef { prop_assert_eq!(c, n); }
            if kind == PolicyKind::Step && c != n {
                prop_assert_eq!((c - n0) % m_chunk, 0, "step values are n0 mod m before the clamp");
            }
        }
    }

    #[test]
    fn entropy_is_maximized_by_uniform(probs in proptest::collection::vec(0.01f64..1.0, 2..10)) {
        let sum: f64 = probs.iter().sum();
        let normalized: Vec<f64> = probs.iter().map(|p| p / sum).collect();
        let h = curriculum::entropy(&normalized).unwrap();
        let c = normalized.len();
        let uniform = vec![1.0 / c as f64; c];
        let h_max = curriculum::entropy(&uniform).unwrap();
        prop_assert!(h <= h_max + 1e-12);
        prop_assert!((h_max - (c as f64).ln()).abs() < 1e-12);
    }
}

fn translate_rotate_scale(m: &EmbeddingMatrix, dx: f64, dy: f64, theta: f64, scale: f64) -> EmbeddingMatrix {
    assert_eq!(m.dim(), 2);
    let (sin, cos) = theta.sin_cos();
    let mut data = Vec::with_capacity(m.data().len());
    for i in 0..m.n_samples() {
        let x = f64::from(m.get(i, 0));
        let y = f64::from(m.get(i, 1));
        let rx = cos * x - sin * y;
        let ry = sin * x + cos * y;
        data.push((scale * rx + dx) as f32);
        data.push((scale * ry + dy) as f32);
    }
    EmbeddingMatrix::new(m.ids().to_vec(), data, 2).unwrap()
}

fn generic_points(seed: u64, n: usize) -> EmbeddingMatrix {
    // Quasi-random 2-D points in generic position (no distance ties).
    let mut data = Vec::with_capacity(n * 2);
    let mut state = seed;
    for _ in 0..n * 2 {
        state = labelsel::seeding::mix(state, 0x1234_5678);
        data.push(((state >> 11) as f64 / (1u64 << 53) as f64 * 10.0 - 5.0) as f32);
    }
    EmbeddingMatrix::new((0..n as u64).collect(), data, 2).unwrap()
}

#[test]
fn kmeans_partition_is_isometry_equivariant() {
    let m = generic_points(3, 40);
    let t = translate_rotate_scale(&m, 13.5, -2.25, 0.7, 2.375);
    let params = ClusterParams::default();
    for seed in [1u64, 5, 9] {
        let a = cluster::kmeans(&m, 4, InitMethod::Random, &params, seed).unwrap();
        let b = cluster::kmeans(&t, 4, InitMethod::Random, &params, seed).unwrap();
        assert_eq!(a.assignment, b.assignment, "same partition and creation order, seed {seed}");
        let c = cluster::kmeans(&m, 4, InitMethod::PlusPlus, &params, seed).unwrap();
        let d = cluster::kmeans(&t, 4, InitMethod::PlusPlus, &params, seed).unwrap();
        assert_eq!(c.assignment, d.assignment);
    }
}

#[test]
fn bisecting_partition_is_isometry_equivariant() {
    let m = generic_points(11, 36);
    let t = translate_rotate_scale(&m, -4.0, 8.0, 1.2, 0.75);
    let params = ClusterParams::default();
    for seed in [2u64, 7] {
        let a = cluster::bisecting_kmeans(&m, 5, InitMethod::PlusPlus, &params, seed).unwrap();
        let b = cluster::bisecting_kmeans(&t, 5, InitMethod::PlusPlus, &params, seed).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }
}

#[test]
fn selection_is_isometry_invariant() {
    let m = generic_points(21, 30);
    let t = translate_rotate_scale(&m, 3.0, 3.0, 0.35, 1.5);
    let params = ClusterParams::default();
    for clusterer in [
        ClustererKind::KMeans,
        ClustererKind::KMeansPlusPlus,
        ClustererKind::Bisecting,
        ClustererKind::BisectingPlusPlus,
    ] {
        let a = select::select_by_clustering(&m, 6, clusterer, &params, 17).unwrap();
        let b = select::select_by_clustering(&t, 6, clusterer, &params, 17).unwrap();
        assert_eq!(a.indices, b.indices, "selection changed under isometry for {clusterer:?}");
    }
}

// Over 10,000 seeds, drawing 1 of 10 elements: every index should land
// within 5% of the expected 1,000 draws. The seeds go through `derive` the
// way every caller in this crate derives them.
#[test]
fn random_selection_is_uniform() {
    let mut counts = [0usize; 10];
    for i in 0..10_000u64 {
        let seed = labelsel::seeding::derive(i, "uniformity", 0);
        let sel = select::select_random(10, 1, seed).unwrap();
        counts[sel.indices[0]] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        assert!(
            (950..=1050).contains(&c),
            "index {i} drawn {c} times, outside 1000 ± 5%"
        );
    }
}

#[test]
fn balanced_random_selection_is_uniform_within_class() {
    use std::collections::BTreeMap;
    let labels = {
        let pairs: BTreeMap<u64, usize> = (0..10u64).map(|id| (id, (id % 2) as usize)).collect();
        ingest::LabelAssignment::new(pairs, 2).unwrap()
    };
    let mut counts = [0usize; 10];
    for seed in 0..10_000u64 {
        let sel = select::select_random_balanced(&labels, 2, seed).unwrap();
        for &i in &sel.indices {
            counts[i] += 1;
        }
    }
    // Each class contributes one draw from its 5 members: expect 2000 each.
    for (i, &c) in counts.iter().enumerate() {
        assert!((1900..=2100).contains(&c), "index {i} drawn {c} times, outside 2000 ± 5%");
    }
}
