use gpbo::qmc::{SobolEngine, MAX_DIMENSION};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> Vec<Vec<f64>> {
    include_str!("fixtures/sobol_d21_first128.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect()
}

#[test]
fn matches_reference_points_in_every_dimension() {
    let want = reference();
    assert_eq!(want.len(), 128);
    for d in 1..=MAX_DIMENSION {
        let got: Vec<Vec<f64>> = SobolEngine::new(d).unwrap().draw(128).unwrap();
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            assert_eq!(g[..], w[..d], "d = {d}, point {i}");
        }
    }
}

#[test]
fn first_eight_points_in_low_dimensions() {
    let want = reference();
    for d in 1..=6 {
        let got: Vec<Vec<f64>> = SobolEngine::new(d).unwrap().draw(8).unwrap();
        for i in 0..8 {
            assert_eq!(got[i][..], want[i][..d]);
        }
    }
}

/// The skipped origin plus the first `2^k − 1` draws fill every dyadic
/// interval of width `2^−k` exactly once.
#[test]
fn one_dimensional_dyadic_equidistribution() {
    for k in 0..=10u32 {
        let n = 1usize << k;
        let mut pts: Vec<Vec<f64>> = SobolEngine::new(1).unwrap().draw(n - 1).unwrap();
        pts.push(vec![0.0]);
        let mut counts = vec![0usize; n];
        for p in &pts {
            counts[(p[0] * n as f64) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c == 1), "k = {k}: {counts:?}");
    }
}

#[test]
fn every_draw_is_in_the_half_open_cube() {
    let pts: Vec<Vec<f64>> = SobolEngine::new(21).unwrap().draw(10_000).unwrap();
    assert!(pts.iter().flatten().all(|&u| (0.0..1.0).contains(&u)));
}

#[test]
fn skip_and_fast_forward_agree_with_stepping() {
    let all: Vec<Vec<f64>> = SobolEngine::new(7).unwrap().draw(300).unwrap();
    let mut e = SobolEngine::with_skip(7, 123).unwrap();
    assert_eq!(e.next_point::<f64>().unwrap(), all[123]);
    e.fast_forward(100).unwrap();
    assert_eq!(e.next_point::<f64>().unwrap(), all[224]);
}

/// Largest gap between the share of points inside `[0, a)` and its volume,
/// over the given anchored boxes.
fn box_deviation(pts: &[Vec<f64>], anchors: &[Vec<f64>]) -> f64 {
    anchors
        .iter()
        .map(|a| {
            let inside = pts
                .iter()
                .filter(|p| p.iter().zip(a).all(|(x, b)| x < b))
                .count();
            let vol: f64 = a.iter().product();
            (inside as f64 / pts.len() as f64 - vol).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn lower_discrepancy_than_random_points() {
    let (d, n) = (2, 256);
    let sobol: Vec<Vec<f64>> = SobolEngine::new(d).unwrap().draw(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut cloud = |m: usize| -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect()
    };
    let trials = 100;
    let mut wins = 0;
    for _ in 0..trials {
        let anchors = cloud(1000);
        let random = cloud(n);
        if box_deviation(&sobol, &anchors) < box_deviation(&random, &anchors) {
            wins += 1;
        }
    }
    assert!(wins * 100 >= 95 * trials, "{wins}/{trials}");
}
