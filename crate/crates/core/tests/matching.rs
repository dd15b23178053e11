mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stereopipe::sgm::aggregate_paths;
use stereopipe::*;

fn image(w: usize, h: usize, seed: u64) -> GrayImage {
    random_image(&mut ChaCha8Rng::seed_from_u64(seed), w, h)
}

proptest! {
    #[test]
    fn census_matches_brute_force(w in 5usize..24, h in 5usize..16, seed: u64) {
        let img = image(w, h, seed);
        prop_assert_eq!(census_transform(&img).unwrap().data().to_vec(), census_ref(&img));
    }

    #[test]
    fn hamming_costs_match_popcount_loop(w in 5usize..24, h in 5usize..10, od in 0u32..6, seed: u64) {
        let (l, r) = (image(w, h, seed), image(w, h, seed ^ 1));
        let cfg = MatchConfig { disparity_offset: od, iterations: 1, parallelism: 16, ..MatchConfig::default() };
        let vol = matching_cost(&census_transform(&l).unwrap(), &census_transform(&r).unwrap(), &cfg).unwrap();
        let want = cost_ref(&census_ref(&l), &census_ref(&r), w, h, od as usize, 16);
        prop_assert_eq!(vol.costs(), want.as_slice());
    }

    /// With a single horizontal path the recursion is the classic scanline
    /// dynamic programme; subtracting the previous minimum only shifts each
    /// pixel's costs, so L(x, d) = U(x, d) − min_k U(x−1, k) for the
    /// unnormalised programme U.
    #[test]
    fn single_path_is_shifted_scanline_dp(w in 5usize..40, p1 in 1u16..30, seed: u64) {
        let (l, r) = (image(w, 5, seed), image(w, 5, seed ^ 7));
        let cfg = MatchConfig { penalty_small: p1, penalty_large: 60_000, iterations: 1, parallelism: 16, disparity_offset: 0 };
        let raw = matching_cost(&census_transform(&l).unwrap(), &census_transform(&r).unwrap(), &cfg).unwrap();
        let got = aggregate_paths(&raw, &cfg, &[AggregationPath::LeftToRight]).unwrap();
        let nd = 16;
        for y in 0..5 {
            let mut u: Vec<Vec<u64>> = Vec::new();
            for x in 0..w {
                let c: Vec<u64> = raw.column(x, y).iter().map(|&v| u64::from(v)).collect();
                let row = match u.last() {
                    None => c,
                    Some(prev) => (0..nd).map(|d| {
                        let mut best = prev[d];
                        best = best.min(prev.iter().min().unwrap() + 60_000);
                        if d > 0 { best = best.min(prev[d - 1] + u64::from(p1)); }
                        if d + 1 < nd { best = best.min(prev[d + 1] + u64::from(p1)); }
                        c[d] + best
                    }).collect(),
                };
                u.push(row);
            }
            for x in 0..w {
                let shift = if x == 0 { 0 } else { *u[x - 1].iter().min().unwrap() };
                let want: Vec<u16> = u[x].iter().map(|&v| (v - shift).min(65535) as u16).collect();
                prop_assert_eq!(got.column(x, y), want.as_slice(), "x={} y={}", x, y);
            }
        }
    }

    #[test]
    fn aggregation_matches_reference(w in 5usize..14, h in 5usize..10, p1 in 1u16..20, extra in 1u16..300, seed: u64) {
        let (l, r) = (image(w, h, seed), image(w, h, seed ^ 3));
        let cfg = MatchConfig { penalty_small: p1, penalty_large: p1 + extra, iterations: 1, parallelism: 16, disparity_offset: 1 };
        let raw = matching_cost(&census_transform(&l).unwrap(), &census_transform(&r).unwrap(), &cfg).unwrap();
        let want = aggregate_ref(raw.costs(), w, h, 16, cfg.penalty_small, cfg.penalty_large);
        prop_assert_eq!(aggregate(&raw, &cfg).unwrap().costs().to_vec(), want);
    }

    #[test]
    fn each_path_matches_its_reference(w in 5usize..14, h in 5usize..10, seed: u64) {
        let (l, r) = (image(w, h, seed), image(w, h, seed ^ 5));
        let cfg = MatchConfig { iterations: 1, parallelism: 16, ..MatchConfig::default() };
        let raw = matching_cost(&census_transform(&l).unwrap(), &census_transform(&r).unwrap(), &cfg).unwrap();
        for (path, dir) in AggregationPath::ALL.into_iter().zip(PATHS) {
            prop_assert_eq!(path.predecessor(), (dir.0 as isize, dir.1 as isize));
            let want: Vec<u16> = path_ref(raw.costs(), w, h, 16, 10, 120, dir).into_iter().map(|v| v as u16).collect();
            prop_assert_eq!(aggregate_paths(&raw, &cfg, &[path]).unwrap().costs().to_vec(), want);
        }
    }
}

#[test]
fn extraction_matches_argmin_reference() {
    let (l, r) = (image(30, 12, 4), image(30, 12, 5));
    let cfg = MatchConfig { iterations: 1, parallelism: 16, disparity_offset: 2, ..MatchConfig::default() };
    let raw = matching_cost(&census_transform(&l).unwrap(), &census_transform(&r).unwrap(), &cfg).unwrap();
    let vol = aggregate(&raw, &cfg).unwrap();
    let disp = extract_disparity(&vol).unwrap();
    for y in 0..12 {
        for x in 2..30 {
            // subpixel refinement moves at most half a pixel off the argmin
            let j = argmin_ref(vol.column(x, y)).expect("every column has a valid cost at o_d = 2 for x >= 2") as f64;
            let d = disp.get(x, y).value().unwrap();
            assert!((d - (j + 2.0)).abs() <= 0.5, "({x}, {y}): {d} vs {}", j + 2.0);
        }
    }
}
