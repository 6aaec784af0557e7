mod common;

use common::{prior_counts, random_candidates};
use proptest::prelude::*;
use sppll::data_io::{class_prior_counts, corrupt_labels, format_plc, gaussian_blobs, parse_plc};
use sppll::rng::SeededRng;
use sppll::types::validate;
use sppll::{LinearModel, Matrix, PartialLabelDataset};

fn random_dataset(seed: u64, n: usize, q: usize) -> PartialLabelDataset {
    let mut rng = SeededRng::new(seed);
    let cands: Vec<Vec<usize>> = (0..n).map(|_| random_candidates(&mut rng, q)).collect();
    let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
    PartialLabelDataset::new(x, cands, None, q).unwrap()
}

proptest! {
    #[test]
    fn corruption_is_valid_keeps_truth_and_is_reproducible(
        seed in any::<u64>(), n in 1usize..60, q in 2usize..6, p in 0.0f64..=1.0, r_frac in 0.0f64..1.0,
    ) {
        let r = (r_frac * q as f64) as usize % q;
        let clean = gaussian_blobs(n, 2, q, 1.0, seed).unwrap();
        let noisy = corrupt_labels(&clean, p, r, seed).unwrap();
        prop_assert!(validate(&noisy).is_ok());
        let truth = noisy.truth().unwrap();
        let mut corrupted = 0;
        for (set, t) in noisy.candidates().iter().zip(truth) {
            prop_assert!(set.contains(t));
            prop_assert!(set.len() == 1 || set.len() == r + 1);
            corrupted += usize::from(set.len() > 1);
        }
        if r > 0 {
            prop_assert_eq!(corrupted, (p * n as f64 + 0.5).floor() as usize);
        }
        prop_assert_eq!(corrupt_labels(&clean, p, r, seed).unwrap(), noisy);
    }

    #[test]
    fn counts_match_definition_and_sum_to_n(seed in any::<u64>(), n in 1usize..80, q in 1usize..7) {
        let data = random_dataset(seed, n, q);
        let got = class_prior_counts(&data).counts;
        prop_assert_eq!(got.iter().sum::<usize>(), n);
        prop_assert_eq!(got, prior_counts(data.candidates(), q));
    }

    #[test]
    fn counts_ignore_instance_order(seed in any::<u64>(), n in 1usize..50, q in 2usize..6) {
        let data = random_dataset(seed, n, q);
        let mut order: Vec<usize> = (0..n).collect();
        SeededRng::new(seed ^ 0x5a5a).shuffle(&mut order);
        let shuffled = data.subset(&order).unwrap();
        prop_assert_eq!(class_prior_counts(&shuffled), class_prior_counts(&data));
    }

    #[test]
    fn plc_text_round_trip(seed in any::<u64>(), n in 1usize..20, d in 1usize..4, q in 2usize..5, with_truth in any::<bool>()) {
        let base = corrupt_labels(&gaussian_blobs(n, d, q, 3.0, seed).unwrap(), 0.5, 1, seed).unwrap();
        let data = if with_truth {
            base
        } else {
            PartialLabelDataset::new(base.features().clone(), base.candidates().to_vec(), None, q).unwrap()
        };
        let back = parse_plc(&format_plc(&data)).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn model_json_round_trip(q in 1usize..4, d in 0usize..4, vals in prop::collection::vec(-1e6f64..1e6, 20)) {
        let mut model = LinearModel::new(q, d, vals[..q * d].to_vec(), vals[12..12 + q].to_vec()).unwrap();
        model.meta.c = vals[19].abs();
        model.meta.seed = q as u64;
        let text = serde_json::to_string(&model).unwrap();
        prop_assert_eq!(serde_json::from_str::<LinearModel>(&text).unwrap(), model);
    }
}

#[test]
fn different_seeds_corrupt_different_instances() {
    let clean = gaussian_blobs(40, 2, 3, 1.0, 0).unwrap();
    let pick = |seed| {
        let noisy = corrupt_labels(&clean, 0.5, 1, seed).unwrap();
        (0..40).filter(|&i| noisy.candidates()[i].len() > 1).collect::<Vec<_>>()
    };
    let base = pick(1);
    assert!((2..12).filter(|&s| pick(s) != base).count() >= 9);
}
