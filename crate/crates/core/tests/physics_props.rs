use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};
use windcast_core::physics::{
    extrapolate_speed, profile_ratio, Band, PhysicsError, Turbine, TurbineSpec, BETZ_LIMIT,
};

fn turbine() -> Turbine {
    Turbine::new(TurbineSpec::default()).unwrap()
}

// written out from the constants rather than through Turbine
fn brute_power(v: f64) -> f64 {
    let area = std::f64::consts::PI * 75.0 * 75.0;
    let cp = 8e6 / (0.5 * 1.2 * area * 12.4f64.powi(3));
    if !(3.0..25.0).contains(&v) {
        0.0
    } else if v >= 12.4 {
        8e6
    } else {
        0.5 * 1.2 * area * v * v * v * cp
    }
}

#[test]
fn hub_ratio_value() {
    let r = profile_ratio(3.8, 100.0, 0.0002).unwrap();
    assert!((r - 500_000f64.ln() / 19_000f64.ln()).abs() < 1e-12);
    assert!((r - 1.33193).abs() < 1e-5);
    assert_eq!(turbine().hub_ratio(), r);
}

#[test]
fn anemometer_bands_values() {
    let b = turbine().anemometer_bands();
    assert!((b.cut_in - 2.3).abs() < 0.05, "{}", b.cut_in);
    assert!((b.rated - 9.3).abs() < 0.05, "{}", b.rated);
    assert!((b.cut_out - 18.8).abs() < 0.05, "{}", b.cut_out);
}

#[test]
fn cp_is_derived_and_below_betz() {
    let t = turbine();
    assert!((t.cp() - 0.3957).abs() < 5e-5, "{}", t.cp());
    assert!(t.cp() < BETZ_LIMIT);
    assert!((t.unclipped_power(12.4) - 8e6).abs() < 1e-6);
}

#[test]
fn curve_is_continuous_at_rated() {
    let t = turbine();
    let below = t.power(12.4 - 1e-9);
    assert!((below - 8e6).abs() < 1.0, "{below}");
    assert_eq!(t.power(12.4), 8e6);
    assert_eq!(t.band(12.4), Band::Rated);
    assert_eq!(t.band(25.0), Band::CutOut);
    assert_eq!(t.power(25.0), 0.0);
}

#[test]
fn monotone_on_operating_range_grid() {
    let t = turbine();
    let mut prev = 0.0;
    let mut v = 0.0;
    while v < 25.0 {
        let p = t.power(v);
        assert!(p >= prev, "power fell at {v}");
        prev = p;
        v += 0.01;
    }
}

#[test]
fn bad_physics_inputs() {
    assert!(matches!(profile_ratio(3.8, 100.0, 0.0), Err(PhysicsError::NonPositiveRoughness(_))));
    assert!(matches!(
        profile_ratio(0.0001, 100.0, 0.0002),
        Err(PhysicsError::HeightBelowRoughness { .. })
    ));
    assert!(matches!(extrapolate_speed(-1.0, 3.8, 100.0, 0.0002), Err(PhysicsError::NegativeSpeed(_))));
    let big = TurbineSpec {
        rated_power: 16e6,
        ..TurbineSpec::default()
    };
    assert!(matches!(Turbine::new(big), Err(PhysicsError::BetzViolation { .. })));
    assert!(turbine().conversion_fraction(&[1.0, -0.5]).is_err());
}

#[test]
fn weibull_conversion_matches_brute_force() {
    let t = turbine();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dist = Weibull::new(9.0, 2.0).unwrap();
    let hub: Vec<f64> = (0..50_000).map(|_| dist.sample(&mut rng)).collect();
    let stats = t.conversion_fraction_hub(&hub).unwrap();
    let produced: f64 = hub.iter().map(|&v| brute_power(v)).sum();
    let area = std::f64::consts::PI * 75.0 * 75.0;
    let cp = 8e6 / (0.5 * 1.2 * area * 12.4f64.powi(3));
    let available: f64 = hub.iter().map(|&v| 0.5 * 1.2 * area * v.powi(3) * cp).sum();
    assert!((stats.fraction - produced / available).abs() < 1e-12);
    let total = stats.below_cut_in + stats.partial_load + stats.rated_load + stats.cut_out;
    assert!((total - 1.0).abs() < 1e-12);
    let rated = hub.iter().filter(|v| (12.4..25.0).contains(*v)).count() as f64 / hub.len() as f64;
    assert_eq!(stats.rated_load, rated);
}

#[test]
fn calm_series_has_zero_fraction() {
    let s = turbine().conversion_fraction(&[0.0, 0.0]).unwrap();
    assert!(s.no_wind);
    assert_eq!(s.fraction, 0.0);
}

proptest! {
    #[test]
    fn extrapolation_is_linear(v in 0.0f64..40.0, k in 0.0f64..10.0) {
        let a = extrapolate_speed(v, 3.8, 100.0, 0.0002).unwrap();
        let b = extrapolate_speed(k * v, 3.8, 100.0, 0.0002).unwrap();
        prop_assert!((b - k * a).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn extrapolation_grows_with_height(v in 0.1f64..40.0, h1 in 1.0f64..50.0, dh in 0.1f64..150.0) {
        let up = extrapolate_speed(v, h1, h1 + dh, 0.0002).unwrap();
        prop_assert!(up > v);
        let back = extrapolate_speed(up, h1 + dh, h1, 0.0002).unwrap();
        prop_assert!((back - v).abs() <= 1e-12 * v.max(1.0));
    }

    #[test]
    fn power_matches_brute_force(v in -5.0f64..40.0) {
        let p = turbine().power(v);
        let b = brute_power(v);
        prop_assert!((p - b).abs() <= 1e-6, "{} vs {}", p, b);
        prop_assert!((0.0..=8e6).contains(&p));
    }

    #[test]
    fn power_is_monotone_below_cut_out(a in 0.0f64..24.99, b in 0.0f64..24.99) {
        let t = turbine();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(t.power(lo) <= t.power(hi));
    }

    #[test]
    fn conversion_fraction_in_unit_interval(speeds in prop::collection::vec(0.0f64..30.0, 1..100)) {
        let s = turbine().conversion_fraction(&speeds).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&s.fraction));
        let total = s.below_cut_in + s.partial_load + s.rated_load + s.cut_out;
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
