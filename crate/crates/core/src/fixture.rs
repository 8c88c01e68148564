//! Seeded synthetic buoy series for tests and demos.
//!
//! Wind speed at the anemometer is `λ·sqrt((X² + Y²)/2)` where `X`, `Y` are
//! independent unit-variance AR(1) processes, so the marginal is
//! Weibull(k = 2, λ) while consecutive readings stay strongly correlated.
//! A little white measurement noise is added on top.

use chrono::{NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{repair, ten_minutes, MetRecord, SeriesDataset};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    /// Weibull scale of the anemometer-height speed, m/s.
    pub weibull_scale: f64,
    /// Lag-one autocorrelation of the latent wind components.
    pub phi: f64,
    /// Standard deviation of the measurement noise on WSPD, m/s.
    pub speed_noise: f64,
    pub start: NaiveDateTime,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            weibull_scale: 6.8,
            phi: 0.995,
            speed_noise: 0.4,
            start: NaiveDate::from_ymd_opt(2021, 1, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
        }
    }
}

/// Unit-variance AR(1) step.
struct Ar1 {
    phi: f64,
    innov: f64,
    state: f64,
}

impl Ar1 {
    fn new<R: Rng>(phi: f64, rng: &mut R, std: &Normal<f64>) -> Self {
        Ar1 {
            phi,
            innov: (1.0 - phi * phi).sqrt(),
            state: std.sample(rng),
        }
    }

    fn next<R: Rng>(&mut self, rng: &mut R, std: &Normal<f64>) -> f64 {
        let v = self.state;
        self.state = self.phi * self.state + self.innov * std.sample(rng);
        v
    }
}

/// `n` complete 10-minute records with default settings.
pub fn synthetic_series(n: usize, seed: u64) -> SeriesDataset {
    synthetic_series_with(n, seed, &FixtureConfig::default())
}

pub fn synthetic_series_with(n: usize, seed: u64, cfg: &FixtureConfig) -> SeriesDataset {
    let mut rng = seeded(seed);
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut wx = Ar1::new(cfg.phi, &mut rng, &std);
    let mut wy = Ar1::new(cfg.phi, &mut rng, &std);
    let mut synoptic = Ar1::new(0.999, &mut rng, &std);
    let mut air = Ar1::new(0.998, &mut rng, &std);
    let mut sea = Ar1::new(0.9995, &mut rng, &std);
    let mut dir = rng.random_range(0.0..360.0);
    // mean of Weibull(2, λ) is λ·√π/2
    let mean_speed = cfg.weibull_scale * std::f64::consts::PI.sqrt() / 2.0;

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let ts = cfg.start + ten_minutes() * i as i32;
        let (x, y) = (wx.next(&mut rng, &std), wy.next(&mut rng, &std));
        let true_speed = cfg.weibull_scale * ((x * x + y * y) / 2.0).sqrt();
        let wspd = (true_speed + cfg.speed_noise * std.sample(&mut rng)).max(0.0);
        let gst = (1.25 * true_speed + 0.3 * std.sample(&mut rng)).max(0.0);
        let anomaly = true_speed - mean_speed;
        let pres = 1013.0 + 6.0 * synoptic.next(&mut rng, &std) - 0.4 * anomaly + 0.2 * std.sample(&mut rng);
        let day = (i % 144) as f64 / 144.0 * std::f64::consts::TAU;
        let atmp = 18.0 + 2.5 * air.next(&mut rng, &std) + 1.2 * day.sin() - 0.3 * anomaly + 0.2 * std.sample(&mut rng);
        let wtmp = 20.0 + 1.5 * sea.next(&mut rng, &std) + 0.1 * atmp - 0.1 * anomaly + 0.05 * std.sample(&mut rng);
        let dewp = atmp - 3.0 + 0.6 * std.sample(&mut rng);
        dir = (dir + 8.0 * std.sample(&mut rng)).rem_euclid(360.0);
        records.push(MetRecord::observed(
            ts,
            [dir, wspd, gst, pres, atmp, wtmp, dewp],
        ));
    }
    repair(records, ten_minutes())
        .expect("synthetic series is complete")
        .with_station_id("SYNTH")
}
