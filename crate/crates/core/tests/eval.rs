mod common;

use ndarray::Array2;
use prefcomp::eval::{
    mean_metric_over_users, ndcg_at_k, ndcg_per_user, pairwise_accuracy,
    pairwise_accuracy_per_user, precision_at_k, precision_per_user, RankedList,
};
use prefcomp::ingest::{binarize, ratings_to_comparisons, Rating, RatingsTable};
use prefcomp::{Error, FactorPair};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Scores given directly: U holds the score rows and V is the identity.
fn factors_from_scores(scores: &Array2<f64>) -> FactorPair {
    let d2 = scores.ncols();
    FactorPair::new(scores.clone(), Array2::eye(d2)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ndcg_matches_best_permutation_search(
        ratings in prop::collection::vec(0u32..=5, 1..=8),
        scores_seed in any::<u64>(),
        k in 1usize..10,
    ) {
        let n = ratings.len();
        let mut rng = ChaCha8Rng::seed_from_u64(scores_seed);
        // coarse scores so ties show up
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
        let entries = (0..n as u32).map(|item| Rating { user: 0, item, rating: ratings[item as usize] as f64, timestamp: None }).collect();
        let table = RatingsTable::new(1, n, entries).unwrap();
        let items: Vec<u32> = (0..n as u32).collect();
        let list = RankedList::from_scores(0, &items, |j| scores[j as usize]);
        let ranked: Vec<f64> = common::argsort_desc(&scores).into_iter().map(|j| ratings[j] as f64).collect();
        match (ndcg_at_k(&list, &table, k), common::ndcg_brute_force(&ranked, k)) {
            (Ok(got), Some(want)) => {
                prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
                prop_assert!((0.0..=1.0 + 1e-12).contains(&got));
                let mut ideal = ranked.clone();
                ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let gain_sorted = ranked.iter().take(k).eq(ideal.iter().take(k));
                prop_assert_eq!(gain_sorted, (got - 1.0).abs() < 1e-12);
            }
            (Err(Error::UndefinedMetric(_)), None) => {}
            (got, want) => prop_assert!(false, "{got:?} vs {want:?}"),
        }
    }

    #[test]
    fn accuracy_matches_indicator_count_and_ignores_monotone_maps(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = common::random_table(&mut rng, 5, 7, 0.8, 5);
        let test = ratings_to_comparisons(&table);
        prop_assume!(!test.is_empty());
        let scores = Array2::from_shape_fn((5, 7), |_| rng.random_range(-2.0..2.0f64));
        let f = factors_from_scores(&scores);
        let hits = test.triples().iter().filter(|t| scores[[t.user as usize, t.preferred as usize]] > scores[[t.user as usize, t.other as usize]]).count();
        let acc = pairwise_accuracy(&f, &test, 0.0).unwrap();
        prop_assert!((acc - hits as f64 / test.len() as f64).abs() < 1e-15);

        let mut mapped = scores.clone();
        for (i, mut row) in mapped.rows_mut().into_iter().enumerate() {
            let shift = i as f64;
            row.mapv_inplace(|s| (1.5 * s).exp() * (i + 1) as f64 + shift);
        }
        prop_assert_eq!(pairwise_accuracy(&factors_from_scores(&mapped), &test, 0.0).unwrap(), acc);
        prop_assert_eq!(
            pairwise_accuracy_per_user(&factors_from_scores(&mapped), &test, 2.0).unwrap(),
            pairwise_accuracy_per_user(&f, &test, 2.0).unwrap()
        );
    }

    #[test]
    fn precision_counts_relevant_items(seed in any::<u64>(), k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = binarize(&common::random_table(&mut rng, 4, 10, 0.3, 5));
        let test_entries: Vec<Rating> = (0..4u32)
            .flat_map(|user| (0..10u32).map(move |item| (user, item)))
            .filter(|&(u, j)| train.rating(u as usize, j).is_none())
            .filter(|_| rng.random::<f64>() < 0.4)
            .map(|(user, item)| Rating { user, item, rating: 1.0, timestamp: None })
            .collect();
        let test = train.with_entries(test_entries).unwrap();
        let scores = Array2::from_shape_fn((4, 10), |_| rng.random_range(-1.0..1.0f64));
        let per_user = precision_per_user(&factors_from_scores(&scores), &train, &test, &[k]).unwrap();
        for user in 0..4 {
            let Some(values) = &per_user[user] else {
                prop_assert!(test.user_entries(user).is_empty());
                continue;
            };
            let candidates: Vec<usize> = (0..10).filter(|&j| train.rating(user, j as u32).is_none()).collect();
            let cand_scores: Vec<f64> = candidates.iter().map(|&j| scores[[user, j]]).collect();
            let top: Vec<usize> = common::argsort_desc(&cand_scores).into_iter().take(k).map(|p| candidates[p]).collect();
            let hits = top.iter().filter(|&&j| test.rating(user, j as u32).is_some()).count();
            prop_assert!((values[0] - hits as f64 / k as f64).abs() < 1e-15);
            let scaled = values[0] * k as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }
}

#[test]
fn hand_computed_ndcg() {
    // A:5, B:3, C:1 ranked (B, A, C)
    let entries = vec![
        Rating {
            user: 0,
            item: 0,
            rating: 5.0,
            timestamp: None,
        },
        Rating {
            user: 0,
            item: 1,
            rating: 3.0,
            timestamp: None,
        },
        Rating {
            user: 0,
            item: 2,
            rating: 1.0,
            timestamp: None,
        },
    ];
    let table = RatingsTable::new(1, 3, entries).unwrap();
    let list = RankedList {
        user: 0,
        items: vec![1, 0, 2],
    };
    let got = ndcg_at_k(&list, &table, 2).unwrap();
    assert!((got - 0.74989).abs() < 1e-4, "{got}");
    let ideal = RankedList {
        user: 0,
        items: vec![0, 1, 2],
    };
    assert_eq!(ndcg_at_k(&ideal, &table, 2).unwrap(), 1.0);
    assert_eq!(
        ndcg_at_k(&list, &table, 10).unwrap(),
        ndcg_at_k(&list, &table, 3).unwrap()
    );
}

#[test]
fn ties_and_zero_factors() {
    let entries = vec![
        Rating {
            user: 0,
            item: 0,
            rating: 4.0,
            timestamp: None,
        },
        Rating {
            user: 0,
            item: 1,
            rating: 2.0,
            timestamp: None,
        },
        Rating {
            user: 1,
            item: 1,
            rating: 5.0,
            timestamp: None,
        },
        Rating {
            user: 1,
            item: 2,
            rating: 1.0,
            timestamp: None,
        },
    ];
    let table = RatingsTable::new(2, 3, entries).unwrap();
    let test = ratings_to_comparisons(&table);
    assert_eq!(
        pairwise_accuracy(&FactorPair::zeros(2, 3, 2), &test, 0.0).unwrap(),
        0.0
    );
    let truth = Array2::from_shape_vec((2, 3), vec![4.0, 2.0, 0.0, 0.0, 5.0, 1.0]).unwrap();
    assert_eq!(
        pairwise_accuracy(&factors_from_scores(&truth), &test, 0.0).unwrap(),
        1.0
    );
    assert!(matches!(
        pairwise_accuracy(&factors_from_scores(&truth), &test, 10.0),
        Err(Error::UndefinedMetric(_))
    ));
}

#[test]
fn precision_edge_cases() {
    let entries = vec![
        Rating {
            user: 0,
            item: 0,
            rating: 1.0,
            timestamp: None,
        },
        Rating {
            user: 0,
            item: 1,
            rating: 1.0,
            timestamp: None,
        },
        Rating {
            user: 0,
            item: 2,
            rating: 1.0,
            timestamp: None,
        },
    ];
    let table = RatingsTable::new(1, 12, entries).unwrap();
    let all_relevant = RankedList {
        user: 0,
        items: vec![2, 0, 1],
    };
    assert_eq!(precision_at_k(&all_relevant, &table, 3).unwrap(), 1.0);
    let three_in_ten = RankedList {
        user: 0,
        items: (0..12).rev().collect(),
    };
    assert!((precision_at_k(&three_in_ten, &table, 12).unwrap() - 0.25).abs() < 1e-15);
    let list: Vec<u32> = vec![0, 3, 4, 1, 5, 6, 2, 7, 8, 9];
    assert!(
        (precision_at_k(
            &RankedList {
                user: 0,
                items: list
            },
            &table,
            10
        )
        .unwrap()
            - 0.3)
            .abs()
            < 1e-15
    );
    let empty = RatingsTable::new(1, 12, vec![]).unwrap();
    assert_eq!(precision_at_k(&all_relevant, &empty, 3).unwrap(), 0.0);
    assert!(precision_at_k(&all_relevant, &table, 0).is_err());
}

#[test]
fn averaging_skips_undefined_users() {
    let s = mean_metric_over_users(&[Some(0.2), None, Some(0.4)]).unwrap();
    assert!((s.mean - 0.3).abs() < 1e-15);
    assert_eq!((s.users, s.skipped), (2, 1));
    assert_eq!(mean_metric_over_users(&[Some(0.7)]).unwrap().mean, 0.7);
    assert!(mean_metric_over_users(&[None, None]).is_err());
}

#[test]
fn ndcg_per_user_skips_zero_gain_users() {
    let entries = vec![
        Rating {
            user: 0,
            item: 0,
            rating: 0.0,
            timestamp: None,
        },
        Rating {
            user: 1,
            item: 0,
            rating: 3.0,
            timestamp: None,
        },
        Rating {
            user: 1,
            item: 1,
            rating: 1.0,
            timestamp: None,
        },
    ];
    let table = RatingsTable::new(3, 2, entries).unwrap();
    let f = factors_from_scores(
        &Array2::from_shape_vec((3, 2), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap(),
    );
    let values = ndcg_per_user(&f, &table, 10).unwrap();
    assert_eq!(values, vec![None, Some(1.0), None]);
}
