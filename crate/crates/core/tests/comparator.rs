use dopd::metrics::{prune_rows, solve_lp, ComparatorLp, Row};
use dopd::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_rows(rng: &mut ChaCha8Rng, m: usize, lo: f64) -> Vec<Row> {
    (0..m)
        .map(|_| {
            let a = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            Row::new(a, rng.random_range(lo..4.0))
        })
        .collect()
}

fn feasible(rows: &[Row], x: &[f64]) -> bool {
    rows.iter().all(|r| r.a[0] * x[0] + r.a[1] * x[1] <= r.beta)
}

#[test]
fn optimum_is_below_every_sampled_feasible_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 5.0;
    for _ in 0..50 {
        let rows = random_rows(&mut rng, 20, 0.0);
        let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let sol = solve_lp(&c, h, &rows).unwrap();
        assert!(sol.x.iter().all(|v| v.abs() <= h));
        assert!(rows.iter().all(|r| r.a[0] * sol.x[0] + r.a[1] * sol.x[1] <= r.beta + 1e-9));
        let mut seen = 0;
        while seen < 1000 {
            let x = [rng.random_range(-h..=h), rng.random_range(-h..=h)];
            if feasible(&rows, &x) {
                seen += 1;
                assert!(sol.value <= c[0] * x[0] + c[1] * x[1] + 1e-9);
            }
        }
    }
}

#[test]
fn incremental_comparator_matches_full_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let h = 5.0;
    for _ in 0..20 {
        let rows = random_rows(&mut rng, 300, 0.5);
        let mut lp = ComparatorLp::new(2, h).unwrap();
        for r in &rows {
            lp.add(r.clone()).unwrap();
        }
        assert_eq!(lp.seen(), rows.len());
        assert!(lp.rows().len() <= rows.len());
        for _ in 0..10 {
            let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let full = solve_lp(&c, h, &rows).unwrap().value;
            let kept = lp.minimize(&c).unwrap().value;
            assert!((full - kept).abs() <= 1e-9, "{full} vs {kept}");
        }
    }
}

#[test]
fn empty_region_is_reported() {
    let rows = vec![Row::new(vec![1.0, 0.0], -1.0), Row::new(vec![-1.0, 0.0], -1.0)];
    assert!(matches!(solve_lp(&[0.0, 1.0], 5.0, &rows), Err(Error::Infeasible)));
}

proptest! {
    #[test]
    fn pruning_keeps_the_optimum(seed in any::<u64>(), m in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = random_rows(&mut rng, m, 0.0);
        rows.extend(rows.clone());
        let pruned = prune_rows(5.0, &rows).unwrap();
        prop_assert!(pruned.len() <= m);
        let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let a = solve_lp(&c, 5.0, &rows).unwrap().value;
        let b = solve_lp(&c, 5.0, &pruned).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9);
    }
}
