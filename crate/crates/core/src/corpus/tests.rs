use super::*;
use crate::objective::RowLabel;

fn small_naturals() -> ImageCorpus {
    generate_naturals(12, 3, 16, 16, 3, 7).unwrap()
}

#[test]
fn naturals_are_deterministic_bitwise() {
    let a = generate_naturals(4, 2, 16, 16, 3, 9).unwrap();
    let b = generate_naturals(4, 2, 16, 16, 3, 9).unwrap();
    assert_eq!(a, b);
    let c = generate_naturals(4, 2, 16, 16, 3, 10).unwrap();
    assert_ne!(a.pixels, c.pixels);
}

#[test]
fn naturals_stay_in_unit_range() {
    let corpus = small_naturals();
    assert!(corpus.pixels.iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn adjacent_classes_separate_in_mean_color() {
    let corpus = generate_naturals(24, 6, 32, 32, 3, 3).unwrap();
    let per = corpus.pixels_per_image();
    let plane = corpus.height * corpus.width;
    let mut means = vec![[0.0f64; 3]; 6];
    let mut counts = vec![0usize; 6];
    for idx in 0..corpus.count() {
        let class = corpus.class_labels[idx] as usize;
        let img = &corpus.pixels[idx * per..(idx + 1) * per];
        for c in 0..3 {
            let sum: f64 = img[c * plane..(c + 1) * plane].iter().map(|&v| v as f64).sum();
            means[class][c] += sum / plane as f64;
        }
        counts[class] += 1;
    }
    for (m, n) in means.iter_mut().zip(&counts) {
        for c in m.iter_mut() {
            *c /= *n as f64;
        }
    }
    for k in 0..5 {
        let d: f64 = (0..3)
            .map(|c| (means[k][c] - means[k + 1][c]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(d >= 0.1, "classes {k} and {} too close: {d}", k + 1);
    }
}

#[test]
fn rejects_tiny_images_and_bad_channels() {
    assert!(generate_naturals(1, 1, 4, 16, 3, 0).is_err());
    assert!(generate_naturals(1, 1, 16, 16, 2, 0).is_err());
    assert!(generate_naturals(0, 1, 16, 16, 3, 0).is_err());
}

mod block_perm {
    use super::*;

    #[test]
    fn preserves_pixel_multiset() {
        let corpus = small_naturals();
        let img = corpus.image(0);
        let mut rng = stream_rng(1, 0);
        let out = block_permute(img, 3, 16, 16, 4, &mut rng).unwrap();
        let mut before: Vec<f32> = img.to_vec();
        let mut after = out.clone();
        before.sort_by(f32::total_cmp);
        after.sort_by(f32::total_cmp);
        assert_eq!(before, after);
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = vec![0.25f32; 3 * 16 * 16];
        let mut rng = stream_rng(2, 0);
        let out = block_permute(&img, 3, 16, 16, 2, &mut rng).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn known_permutation_matches_index_remapping_oracle() {
        // 4x4 single channel, distinct values, N=2; permutation swaps
        // top-left <-> top-right and bottom-left <-> bottom-right
        let img: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let perm = [1usize, 0, 3, 2];
        let got = apply_block_permutation(&img, 1, 4, 4, 2, &perm);

        // independent pixel-wise oracle
        let mut expect = vec![0.0f32; 16];
        let (n, bh, bw) = (2usize, 2usize, 2usize);
        for y in 0..4 {
            for x in 0..4 {
                let (bi, bj) = (y / bh, x / bw);
                let src = perm[bi * n + bj];
                let (sbi, sbj) = (src / n, src % n);
                let (sy, sx) = (sbi * bh + y % bh, sbj * bw + x % bw);
                expect[y * 4 + x] = img[sy * 4 + sx];
            }
        }
        assert_eq!(got, expect);
        // hand spot-check: row 0 starts with the old top-right block
        assert_eq!(&got[0..2], &[2.0, 3.0]);
    }

    #[test]
    fn drawn_permutation_is_never_identity() {
        let img: Vec<f32> = (0..16 * 16).map(|v| v as f32).collect();
        for seed in 0..100 {
            let mut rng = stream_rng(seed, 0);
            let out = block_permute(&img, 1, 16, 16, 2, &mut rng).unwrap();
            assert_ne!(out, img, "seed {seed} produced the identity");
        }
    }

    #[test]
    fn double_permutation_still_preserves_multiset() {
        let corpus = small_naturals();
        let img = corpus.image(3);
        let mut rng = stream_rng(5, 0);
        let once = block_permute(img, 3, 16, 16, 2, &mut rng).unwrap();
        let twice = block_permute(&once, 3, 16, 16, 2, &mut rng).unwrap();
        let mut a: Vec<f32> = img.to_vec();
        let mut b = twice;
        a.sort_by(f32::total_cmp);
        b.sort_by(f32::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_grids() {
        let img = vec![0.0f32; 3 * 16 * 16];
        let mut rng = stream_rng(0, 0);
        assert!(matches!(
            block_permute(&img, 3, 16, 16, 1, &mut rng),
            Err(CorpusError::BadBlockGrid { .. })
        ));
        assert!(matches!(
            block_permute(&img, 3, 16, 16, 5, &mut rng),
            Err(CorpusError::BadBlockGrid { .. })
        ));
    }
}

mod strokes {
    use super::*;

    fn spec(m: usize) -> CorruptionSpec {
        CorruptionSpec::strokes(m, (1, 3), (0.2, 0.5))
    }

    #[test]
    fn changed_pixels_all_take_the_stroke_color() {
        let corpus = small_naturals();
        for seed in 0..50u64 {
            let img = corpus.image((seed % 12) as usize);
            let mut rng = stream_rng(seed, 0);
            let out = draw_strokes(img, 3, 16, 16, &spec(3), &mut rng).unwrap();
            let plane = 16 * 16;
            let mut changed = Vec::new();
            for p in 0..plane {
                if (0..3).any(|c| out[c * plane + p] != img[c * plane + p]) {
                    changed.push(p);
                }
            }
            assert!(!changed.is_empty(), "seed {seed}: no pixel changed");
            let first = changed[0];
            let color: Vec<f32> = (0..3).map(|c| out[c * plane + first]).collect();
            for &p in &changed {
                for c in 0..3 {
                    assert_eq!(out[c * plane + p], color[c], "seed {seed} pixel {p}");
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let corpus = small_naturals();
        let img = corpus.image(1);
        let a = draw_strokes(img, 3, 16, 16, &spec(1), &mut stream_rng(4, 2)).unwrap();
        let b = draw_strokes(img, 3, 16, 16, &spec(1), &mut stream_rng(4, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn changed_fraction_respects_area_bound() {
        // bound from the spec parameters: count_hi * (diag*len_hi*M + M^2) / (H*W)
        let corpus = generate_naturals(8, 2, 32, 32, 3, 21).unwrap();
        for (m, seeds) in [(1usize, 0..100u64), (3usize, 0..100u64)] {
            let sp = spec(m);
            let diag = (2.0f64 * 32.0 * 32.0).sqrt();
            let bound = sp.stroke_count.1 as f64 * (diag * sp.stroke_len.1 * m as f64 + (m * m) as f64)
                / (32.0 * 32.0);
            for seed in seeds {
                let img = corpus.image((seed % 16) as usize);
                let mut rng = stream_rng(seed, 9);
                let out = draw_strokes(img, 3, 32, 32, &sp, &mut rng).unwrap();
                let plane = 32 * 32;
                let changed = (0..plane)
                    .filter(|&p| (0..3).any(|c| out[c * plane + p] != img[c * plane + p]))
                    .count();
                let fraction = changed as f64 / plane as f64;
                assert!(
                    fraction <= bound,
                    "M={m} seed {seed}: fraction {fraction} exceeds bound {bound}"
                );
            }
        }
    }

    #[test]
    fn output_stays_in_unit_range_and_size() {
        let corpus = small_naturals();
        let img = corpus.image(2);
        let out = draw_strokes(img, 3, 16, 16, &spec(5), &mut stream_rng(11, 0)).unwrap();
        assert_eq!(out.len(), img.len());
        assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn rejects_empty_ranges() {
        let mut sp = spec(1);
        sp.stroke_count = (3, 1);
        let img = vec![0.0f32; 3 * 16 * 16];
        assert!(matches!(
            draw_strokes(&img, 3, 16, 16, &sp, &mut stream_rng(0, 0)),
            Err(CorpusError::EmptyRange(_))
        ));
    }
}

mod split_building {
    use super::*;

    fn alteration_corpus() -> ImageCorpus {
        let naturals = generate_naturals(40, 3, 16, 16, 3, 13).unwrap();
        with_alteration_counterparts(naturals, &CorruptionSpec::block_perm(2), 13).unwrap()
    }

    fn alteration_spec(semi: bool) -> SplitSpec {
        SplitSpec {
            setup: SetupKind::Alteration,
            normal_class: 0,
            train_fraction: 0.8,
            val_fraction: 0.1,
            semi_supervised: semi,
            labeled_anomaly_fraction: 0.1,
        }
    }

    #[test]
    fn index_sets_are_disjoint() {
        let corpus = alteration_corpus();
        for semi in [false, true] {
            let s = build_splits(&corpus, &alteration_spec(semi), 5).unwrap();
            let mut seen = std::collections::HashSet::new();
            for idx in s.train.iter().chain(&s.val).chain(&s.test) {
                assert!(seen.insert(*idx), "index {idx} appears twice");
            }
        }
    }

    #[test]
    fn alteration_val_and_test_are_balanced() {
        let corpus = alteration_corpus();
        let s = build_splits(&corpus, &alteration_spec(false), 5).unwrap();
        for (truth, name) in [(&s.val_truth, "val"), (&s.test_truth, "test")] {
            let anomalous = truth.iter().filter(|t| **t).count();
            assert_eq!(anomalous * 2, truth.len(), "{name} not balanced");
        }
    }

    #[test]
    fn unsupervised_train_contains_zero_anomalies() {
        let corpus = alteration_corpus();
        let s = build_splits(&corpus, &alteration_spec(false), 5).unwrap();
        assert_eq!(s.train_anomaly_count(), 0);
        for &idx in &s.train {
            assert!(!corpus.anomaly_flags[idx]);
        }
    }

    #[test]
    fn semi_supervised_label_ratio_within_one_sample_of_target() {
        let corpus = alteration_corpus();
        let s = build_splits(&corpus, &alteration_spec(true), 5).unwrap();
        let m = s.train_anomaly_count() as f64;
        let total = s.train.len() as f64;
        assert!(m >= 1.0);
        assert!(
            (m - 0.1 * total).abs() <= 1.0,
            "{m} labeled of {total} is not 10% within one sample"
        );
        // labeled rows really are anomalous counterparts
        for (idx, label) in s.train.iter().zip(&s.train_labels) {
            if *label == RowLabel::Anomaly {
                assert!(corpus.anomaly_flags[*idx]);
            }
        }
    }

    #[test]
    fn splits_are_pure_functions_of_inputs() {
        let corpus = alteration_corpus();
        let a = build_splits(&corpus, &alteration_spec(true), 5).unwrap();
        let b = build_splits(&corpus, &alteration_spec(true), 5).unwrap();
        assert_eq!(a, b);
        let c = build_splits(&corpus, &alteration_spec(true), 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn one_vs_all_truth_follows_class_membership() {
        let corpus = generate_naturals(30, 4, 16, 16, 3, 8).unwrap();
        let spec = SplitSpec {
            setup: SetupKind::OneVsAll,
            normal_class: 2,
            train_fraction: 0.6,
            val_fraction: 0.2,
            semi_supervised: false,
            labeled_anomaly_fraction: 0.1,
        };
        let s = build_splits(&corpus, &spec, 3).unwrap();
        for (idx, truth) in s.val.iter().zip(&s.val_truth) {
            assert_eq!(*truth, corpus.class_labels[*idx] != 2);
        }
        for &idx in &s.train {
            assert_eq!(corpus.class_labels[idx], 2);
        }
        let val_anom = s.val_truth.iter().filter(|t| **t).count();
        assert_eq!(val_anom * 2, s.val_truth.len());
    }

    #[test]
    fn one_vs_all_semi_draws_from_the_designated_class() {
        let corpus = generate_naturals(30, 4, 16, 16, 3, 8).unwrap();
        let spec = SplitSpec {
            setup: SetupKind::OneVsAll,
            normal_class: 1,
            train_fraction: 0.6,
            val_fraction: 0.2,
            semi_supervised: true,
            labeled_anomaly_fraction: 0.1,
        };
        let s = build_splits(&corpus, &spec, 3).unwrap();
        let mut labeled = 0;
        for (idx, label) in s.train.iter().zip(&s.train_labels) {
            match label {
                RowLabel::Anomaly => {
                    labeled += 1;
                    assert_eq!(corpus.class_labels[*idx], 2); // (1 + 1) % 4
                }
                RowLabel::Unlabeled => assert_eq!(corpus.class_labels[*idx], 1),
                RowLabel::Normal => panic!("no labeled normals expected"),
            }
        }
        assert!(labeled >= 1);
    }

    #[test]
    fn infeasible_fractions_are_rejected() {
        let corpus = generate_naturals(3, 2, 16, 16, 3, 8).unwrap();
        let spec = SplitSpec {
            setup: SetupKind::OneVsAll,
            normal_class: 0,
            train_fraction: 0.9,
            val_fraction: 0.05,
            semi_supervised: false,
            labeled_anomaly_fraction: 0.1,
        };
        assert!(matches!(
            build_splits(&corpus, &spec, 0),
            Err(CorpusError::Infeasible(_))
        ));
    }
}

mod file_io {
    use super::*;

    #[test]
    fn tds1_round_trips_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.tds1");
        let naturals = generate_naturals(6, 2, 16, 16, 3, 77).unwrap();
        let corpus =
            with_alteration_counterparts(naturals, &CorruptionSpec::preset("st_small").unwrap(), 77)
                .unwrap();
        io::write_corpus(&corpus, &path).unwrap();
        let loaded = io::read_corpus(&path).unwrap();
        assert_eq!(corpus, loaded);
        // byte-for-byte stable on rewrite
        let path2 = dir.path().join("corpus2.tds1");
        io::write_corpus(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn tds1_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.tds1");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(
            io::read_corpus(&path),
            Err(CorpusError::Format { .. })
        ));
    }

    #[test]
    fn splits_round_trip() {
        let corpus = {
            let naturals = generate_naturals(20, 2, 16, 16, 3, 5).unwrap();
            with_alteration_counterparts(naturals, &CorruptionSpec::block_perm(2), 5).unwrap()
        };
        let spec = SplitSpec {
            setup: SetupKind::Alteration,
            normal_class: 0,
            train_fraction: 0.7,
            val_fraction: 0.15,
            semi_supervised: true,
            labeled_anomaly_fraction: 0.1,
        };
        let splits = build_splits(&corpus, &spec, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("splits.csv");
        io::write_splits(&splits, &path).unwrap();
        let loaded = io::read_splits(&path).unwrap();
        assert_eq!(splits, loaded);
    }

    #[test]
    fn ppm_export_has_p6_header_and_size() {
        let corpus = small_naturals();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        io::write_ppm(&corpus, 0, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P6\n16 16\n255\n";
        assert!(bytes.starts_with(header));
        assert_eq!(bytes.len(), header.len() + 16 * 16 * 3);
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn block_permute_multiset_invariant(seed in 0u64..1000, n in prop::sample::select(vec![2usize, 4, 8])) {
            let img: Vec<f32> = (0..3 * 16 * 16).map(|v| (v as f32).sin()).collect();
            let mut rng = stream_rng(seed, 3);
            let out = block_permute(&img, 3, 16, 16, n, &mut rng).unwrap();
            let mut a = img.clone();
            let mut b = out;
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
#[ignore = "margin scan, run manually"]
fn scan_area_bound_margin() {
    let corpus = generate_naturals(8, 2, 32, 32, 3, 21).unwrap();
    for m in [1usize, 3] {
        let sp = CorruptionSpec::strokes(m, (1, 3), (0.2, 0.5));
        let diag = (2.0f64 * 32.0 * 32.0).sqrt();
        let bound = sp.stroke_count.1 as f64 * (diag * sp.stroke_len.1 * m as f64 + (m * m) as f64) / 1024.0;
        let mut worst = 0.0f64;
        let mut fails = 0;
        for seed in 0..5000u64 {
            let img = corpus.image((seed % 16) as usize);
            let mut rng = stream_rng(seed, 9);
            let out = draw_strokes(img, 3, 32, 32, &sp, &mut rng).unwrap();
            let plane = 1024;
            let changed = (0..plane)
                .filter(|&p| (0..3).any(|c| out[c * plane + p] != img[c * plane + p]))
                .count();
            let f = changed as f64 / plane as f64;
            worst = worst.max(f);
            if f > bound {
                fails += 1;
            }
        }
        println!("M={m}: bound {bound:.4} worst {worst:.4} fails {fails}/5000");
    }
}
