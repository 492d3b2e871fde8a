use std::collections::HashSet;

use hep2_core::data::{augment_x8, mirror, rotate, CellRecord, GrayImage, Provenance};
use hep2_core::eval::{mca, plan_kfold, plan_loso, render_confusion, ConfusionMatrix};
use hep2_core::synth::{generate, SynthSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square_cell(side: usize, values: &[f32]) -> CellRecord {
    let img = GrayImage::from_fn(side, side, |r, c| values[(r * side + c) % values.len()]);
    CellRecord::new(img, 2, "p").unwrap()
}

/// Apply a word of generators: `true` = quarter turn, `false` = mirror.
fn apply(cell: &CellRecord, word: &[bool]) -> CellRecord {
    word.iter().fold(cell.clone(), |c, &g| if g { rotate(&c, 1) } else { mirror(&c) })
}

proptest! {
    #[test]
    fn dihedral_words_track_provenance(side in 1usize..7, values in prop::collection::vec(0.0f32..1.0, 1..50), word in prop::collection::vec(any::<bool>(), 0..12)) {
        let cell = square_cell(side, &values);
        let out = apply(&cell, &word);
        // the record's provenance names the net group element; undoing it restores the original
        let p = out.provenance;
        let mut undo = out.clone();
        if p.is_mirrored() {
            undo = mirror(&undo);
        }
        undo = rotate(&undo, (4 - p.quarter_turns()) % 4);
        prop_assert_eq!(&undo.pixels, &cell.pixels);
        prop_assert_eq!(undo.provenance, Provenance::ORIGINAL);
        prop_assert_eq!((out.label, &out.specimen_id), (cell.label, &cell.specimen_id));
    }

    #[test]
    fn augment_x8_count_identity(labels in prop::collection::vec(0usize..6, 0..40)) {
        let records: Vec<CellRecord> = labels.iter().map(|&l| CellRecord::new(GrayImage::filled(2, 2, 0.0), l, "s").unwrap()).collect();
        let out = augment_x8(&records);
        prop_assert_eq!(out.len(), 8 * records.len());
        for k in 0..6 {
            prop_assert_eq!(out.iter().filter(|r| r.label == k).count(), 8 * labels.iter().filter(|&&l| l == k).count());
        }
        for chunk in out.chunks(8) {
            let tags: HashSet<Provenance> = chunk.iter().map(|r| r.provenance).collect();
            prop_assert_eq!(tags.len(), 8);
        }
    }

    #[test]
    fn loso_partitions_without_specimen_overlap(sizes in prop::collection::vec(1usize..6, 1..10), order_seed in any::<u64>()) {
        let mut records = Vec::new();
        for (s, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                records.push(CellRecord::new(GrayImage::filled(1, 1, 0.0), 0, format!("s{s}")).unwrap());
            }
        }
        // interleave specimens so folds cannot rely on contiguity
        let len = records.len();
        records.rotate_left((order_seed as usize) % len);
        let plan = plan_loso(&records).unwrap();
        prop_assert_eq!(plan.folds.len(), sizes.len());
        plan.check_partition(records.len()).unwrap();
        for f in &plan.folds {
            let test: HashSet<&str> = f.test.iter().map(|&i| records[i].specimen_id.as_str()).collect();
            prop_assert_eq!(test.len(), 1);
            prop_assert!(f.train.iter().all(|&i| !test.contains(records[i].specimen_id.as_str())));
        }
    }

    #[test]
    fn kfold_is_balanced_partition(n in 2usize..60, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let k = 2 + ((n - 2) as f64 * k_frac) as usize;
        let records: Vec<CellRecord> = (0..n).map(|i| CellRecord::new(GrayImage::filled(1, 1, 0.0), 0, format!("s{}", i % 3)).unwrap()).collect();
        let plan = plan_kfold(&records, k, seed).unwrap();
        plan.check_partition(n).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn mca_ignores_class_sizes(counts in prop::collection::vec(prop::collection::vec(0u64..20, 3), 3), dup in 0usize..3, factor in 2u64..5) {
        let mut counts = counts;
        for (i, row) in counts.iter_mut().enumerate() {
            row[i] += 1;
        }
        let base = ConfusionMatrix::from_counts(counts.clone()).unwrap();
        let mut scaled = counts;
        for v in &mut scaled[dup] {
            *v *= factor;
        }
        let scaled = ConfusionMatrix::from_counts(scaled).unwrap();
        prop_assert!((base.mca().unwrap() - scaled.mca().unwrap()).abs() < 1e-9);
        let m = base.mca().unwrap();
        prop_assert!((0.0..=100.0).contains(&m));
        prop_assert!((m - mca(&base.ccr().unwrap())).abs() < 1e-9);
    }

    #[test]
    fn accumulation_is_order_independent(pairs in prop::collection::vec((0usize..4, 0usize..4), 0..80), seed in any::<u64>()) {
        let mut a = ConfusionMatrix::new(4);
        for &(t, p) in &pairs {
            a.accumulate(t, p).unwrap();
        }
        let mut shuffled = pairs.clone();
        let len = shuffled.len().max(1);
        shuffled.rotate_left(seed as usize % len);
        shuffled.reverse();
        let mut b = ConfusionMatrix::new(4);
        for &(t, p) in &shuffled {
            b.accumulate(t, p).unwrap();
        }
        prop_assert_eq!(a.total(), pairs.len() as u64);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rendered_rows_sum_to_hundred(counts in prop::collection::vec(prop::collection::vec(0u64..1000, 5), 5)) {
        let cm = ConfusionMatrix::from_counts(counts).unwrap();
        for row in render_confusion(&cm).display_rows().into_iter().flatten() {
            prop_assert!((row.iter().sum::<f64>() - 100.0).abs() <= 0.02);
        }
    }
}

#[test]
fn uncorrelated_specimens_look_like_any_other() {
    // Same-specimen and cross-specimen same-class pairs should be equally far apart.
    let spec = SynthSpec { intra_specimen_correlation: 0.0, seed: 17, ..SynthSpec::default() };
    let cells = generate(&spec).unwrap();
    let dist = |a: &CellRecord, b: &CellRecord| -> f64 {
        a.pixels.pixels().iter().zip(b.pixels.pixels()).map(|(x, y)| f64::from(x - y).powi(2)).sum::<f64>().sqrt()
    };
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let (per, n) = (spec.cells_per_specimen, spec.num_specimens_per_class);
    let (mut same, mut cross) = (0.0, 0.0);
    for _ in 0..1000 {
        let class = r.random_range(0..spec.classes);
        let s1 = r.random_range(0..n);
        let mut s2 = r.random_range(0..n - 1);
        if s2 >= s1 {
            s2 += 1;
        }
        let base = |s: usize| (class * n + s) * per;
        let i = r.random_range(0..per);
        let mut j = r.random_range(0..per - 1);
        if j >= i {
            j += 1;
        }
        same += dist(&cells[base(s1) + i], &cells[base(s1) + j]);
        cross += dist(&cells[base(s1) + i], &cells[base(s2) + r.random_range(0..per)]);
    }
    let ratio = same / cross;
    assert!((ratio - 1.0).abs() <= 0.05, "ratio {ratio}");
}

#[test]
fn fully_correlated_noiseless_cells_share_one_image() {
    // Up to placement every cell of a specimen is the same picture, so its
    // intensity histogram is nearly constant across the specimen.
    let spec = SynthSpec { intra_specimen_correlation: 1.0, noise_std: 0.0, cells_per_specimen: 6, num_specimens_per_class: 2, ..SynthSpec::default() };
    let cells = generate(&spec).unwrap();
    let mass = |c: &CellRecord| c.pixels.pixels().iter().map(|&v| f64::from(v)).sum::<f64>();
    for specimen in cells.chunks(6) {
        let m0 = mass(&specimen[0]);
        for c in specimen {
            assert!((mass(c) - m0).abs() / m0 < 0.03, "{} vs {m0}", mass(c));
        }
    }
    assert_eq!(generate(&spec).unwrap(), cells);
}
