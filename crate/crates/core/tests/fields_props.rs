use marketareas_core::fields::fast_march;
use marketareas_core::{eikonal_fields, euclidean_fields, speed_from_elevation, City, CitySet, Grid, Layout};
use proptest::prelude::*;

fn speeds(rows: usize, cols: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..2.0, rows * cols)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slowing_cells_never_shortens_travel(
        s in speeds(12, 14),
        factors in prop::collection::vec(0.1f64..=1.0, 12 * 14),
        source in 0usize..(12 * 14),
    ) {
        let layout = Layout::full(12, 14, 0.5);
        let slower: Vec<f64> = s.iter().zip(&factors).map(|(a, f)| a * f).collect();
        let fast = fast_march(&layout, &s, source, 0).unwrap();
        let slow = fast_march(&layout, &slower, source, 0).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!(*b >= *a * (1.0 - 1e-12), "{b} < {a}");
        }
    }

    #[test]
    fn neighbouring_times_differ_by_at_most_one_crossing(s in speeds(10, 10), source in 0usize..100) {
        let layout = Layout::full(10, 10, 2.0);
        let t = fast_march(&layout, &s, source, 0).unwrap();
        prop_assert_eq!(t[source], 0.0);
        for x in 0..100 {
            for y in layout.neighbors4(x) {
                let bound = layout.cell_size / s[x].min(s[y]);
                prop_assert!((t[x] - t[y]).abs() <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn sublevel_counts_of_field_differences_are_monotone(
        s in speeds(15, 15),
        (a, b) in (0usize..225, 0usize..225).prop_filter("distinct", |(a, b)| a != b),
    ) {
        let layout = Layout::full(15, 15, 1.0);
        let ds = fast_march(&layout, &s, a, 0).unwrap();
        let dt = fast_march(&layout, &s, b, 1).unwrap();
        let diff: Vec<f64> = ds.iter().zip(&dt).map(|(x, y)| x - y).collect();
        let lo = diff.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let count = |g: f64| diff.iter().filter(|d| **d < g).count();
        prop_assert_eq!(count(lo - 1e-9), 0);
        prop_assert_eq!(count(lo), 0);
        prop_assert_eq!(count(hi + 1e-9), 225);
        let mut prev = 0;
        for k in 0..200 {
            let g = lo - 1.0 + (hi - lo + 2.0) * k as f64 / 199.0;
            let c = count(g);
            prop_assert!(c >= prev);
            prev = c;
        }
    }
}

#[test]
fn unit_speed_march_stays_within_nine_percent_of_euclidean() {
    let g = Grid::uniform(50, 50, 1.0);
    let cities = CitySet::new(vec![City::new("a", 12, 17, 1.0, 1.0), City::new("b", 40, 41, 1.0, 1.0)], &g.layout).unwrap();
    let eik = eikonal_fields(&g, &cities).unwrap();
    let euc = euclidean_fields(&g, &cities).unwrap();
    let mut worst: f64 = 0.0;
    for (fe, fu) in eik.fields.iter().zip(&euc.fields) {
        for (t, d) in fe.iter().zip(fu) {
            if *d > 0.0 {
                worst = worst.max((t - d).abs() / d);
            }
            // first-order upwinding overestimates off-axis distances, never underestimates
            assert!(*t >= d * (1.0 - 1e-12));
        }
    }
    // observed maximum on this grid: 0.0811
    assert!(worst <= 0.09, "max relative error {worst}");
    assert!(worst > 0.01);
}

#[test]
fn uniform_speed_rescales_the_field() {
    let layout = Layout::full(17, 23, 0.25);
    let ones = fast_march(&layout, &vec![1.0; layout.len()], 100, 0).unwrap();
    let fours = fast_march(&layout, &vec![4.0; layout.len()], 100, 0).unwrap();
    for (a, b) in ones.iter().zip(&fours) {
        assert!((a / 4.0 - b).abs() <= 1e-15 * a.max(1.0));
    }
}

#[test]
fn speed_ignores_the_elevation_scale() {
    let elev: Vec<f64> = (0..30).map(|i| 100.0 + 13.0 * i as f64).collect();
    let doubled: Vec<f64> = elev.iter().map(|e| 2.0 * e).collect();
    let (water, active) = (vec![false; 30], vec![true; 30]);
    let a = speed_from_elevation(&elev, &water, &active, 1.5, 1.0).unwrap();
    let b = speed_from_elevation(&doubled, &water, &active, 1.5, 1.0).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-15);
    }
    assert_eq!(a[0], 1.5);
    assert!(speed_from_elevation(&elev, &water, &active, 0.0, 1.0).is_err());
}
