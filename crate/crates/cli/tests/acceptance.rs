//! Acceptance checks. Run with `cargo test --test acceptance`; prints one
//! `[PASS]`/`[FAIL]` line per criterion and exits non-zero on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};
use windcast_core::experiments::{case_by_id, case_table, cell_seed, run_case, ExperimentConfig, WSPD_LOW};
use windcast_core::features::{fit_forest, importance, ForestConfig, MaxFeatures, SPLIT_TIE_TOLERANCE};
use windcast_core::fixture::synthetic_series;
use windcast_core::metrics::evaluate;
use windcast_core::models::{grad_check, fit, Activation, GradArch, ModelKind};
use windcast_core::physics::{profile_ratio, Turbine, TurbineSpec, BETZ_LIMIT};
use windcast_core::report::power_report_mw;
use windcast_core::windowing::{make_windows, split_rows, window_count, SplitRatios, WindowSpec, WindowedSet};
use windcast_core::FeatureTable;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn turbine() -> Turbine {
    Turbine::new(TurbineSpec::default()).unwrap()
}

fn fixture_table() -> FeatureTable {
    case_table(&synthetic_series(20_000, 42), &turbine()).unwrap()
}

fn criterion_1() -> Check {
    let r = profile_ratio(3.8, 100.0, 0.0002).map_err(|e| e.to_string())?;
    let expect = 500_000f64.ln() / 19_000f64.ln();
    ensure((r - expect).abs() < 1e-5 && (r - 1.33193).abs() < 1e-5, || format!("ratio {r}"))?;
    let b = turbine().anemometer_bands();
    for (got, want) in [(b.cut_in, 2.3), (b.rated, 9.3), (b.cut_out, 18.8)] {
        ensure((got - want).abs() <= 0.05, || format!("band {got} vs {want}"))?;
    }
    Ok(format!(
        "ratio {r:.6}; anemometer bands {:.3} / {:.3} / {:.3} m/s",
        b.cut_in, b.rated, b.cut_out
    ))
}

fn criterion_2() -> Check {
    let t = turbine();
    let grid = |lo: f64, hi: f64| {
        let n = ((hi - lo) / 0.01).round() as usize;
        (0..=n).map(move |i| lo + i as f64 * 0.01)
    };
    for v in grid(0.0, 2.99) {
        ensure(t.power(v) == 0.0, || format!("nonzero below cut-in at {v}"))?;
    }
    for v in grid(25.0, 40.0) {
        ensure(t.power(v) == 0.0, || format!("nonzero at/above cut-out at {v}"))?;
    }
    for v in grid(12.4, 24.99) {
        ensure(t.power(v) == 8e6, || format!("not rated at {v}: {}", t.power(v)))?;
    }
    let gap = (t.power(12.4) - t.unclipped_power(12.4)).abs();
    let left = (8e6 - t.power(12.4 - 1e-9)).abs();
    ensure(gap <= 1.0 && left <= 1.0, || format!("discontinuity {gap} / {left} W"))?;
    let cp = t.cp();
    ensure((cp - 0.3957).abs() < 1e-4 && cp < BETZ_LIMIT, || format!("cp {cp}"))?;
    let mut prev = 0.0;
    for v in grid(0.0, 24.99) {
        let p = t.power(v);
        ensure(p >= prev, || format!("not monotone at {v}"))?;
        prev = p;
    }
    Ok(format!("cp {cp:.6}, rated jump {gap:.2e} W"))
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let n = rng.random_range(1..300);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..30.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| v + rng.random_range(-4.0..4.0)).collect();
        let r = evaluate(&y, &p).map_err(|e| e.to_string())?;
        let nf = n as f64;
        let mean = y.iter().sum::<f64>() / nf;
        let (mut mae, mut mse, mut sm, mut ssr, mut sst) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut ape = Vec::new();
        for i in 0..n {
            let e = y[i] - p[i];
            mae += e.abs() / nf;
            mse += e * e / nf;
            if y[i].abs() + p[i].abs() > 0.0 {
                sm += 2.0 * e.abs() / (y[i].abs() + p[i].abs()) * 100.0 / nf;
            }
            if y[i].abs() > 1e-9 {
                ape.push((e / y[i]).abs() * 100.0);
            }
            ssr += e * e;
            sst += (y[i] - mean) * (y[i] - mean);
        }
        let mape = (!ape.is_empty()).then(|| ape.iter().sum::<f64>() / ape.len() as f64);
        let r2 = (sst > 0.0).then(|| 1.0 - ssr / sst);
        ensure(r.mape.is_some() == mape.is_some() && r.r2.is_some() == r2.is_some(), || {
            format!("trial {trial}: definedness differs")
        })?;
        let pairs = [
            (Some(r.mae), Some(mae)),
            (Some(r.rmse), Some(mse.sqrt())),
            (Some(r.smape), Some(sm)),
            (r.mape, mape),
            (r.r2, r2),
        ];
        for (a, b) in pairs.into_iter().filter_map(|(a, b)| a.zip(b)) {
            ensure(close(a, b), || format!("trial {trial}: {a} vs {b}"))?;
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let s1 = evaluate(&[3.0], &[1.0]).unwrap().smape;
    let s2 = evaluate(&[2.0], &[0.0]).unwrap().smape;
    ensure(s1 == 100.0 && s2 == 200.0, || format!("smape hand values {s1} {s2}"))?;
    Ok(format!("1000 pairs, worst scaled diff {worst:.1e}; SMAPE 100 / 200"))
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let fx: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fcnn = GradArch::Fcnn {
        layer_sizes: vec![8, 16, 8, 1],
        activation: Activation::Tanh,
    };
    let e_f = grad_check(&fcnn, &fx, 0.3, 1e-6, 11).map_err(|e| e.to_string())?;
    let gx: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gru = GradArch::Gru {
        input_size: 3,
        hidden_size: 8,
        seq_len: 6,
    };
    let e_g = grad_check(&gru, &gx, -0.2, 1e-6, 12).map_err(|e| e.to_string())?;
    ensure(e_f < 1e-4 && e_g < 1e-4, || format!("fcnn {e_f:.2e}, gru {e_g:.2e}"))?;
    Ok(format!("max relative error fcnn {e_f:.2e}, gru {e_g:.2e}"))
}

fn criterion_5() -> Check {
    let table = fixture_table();
    let mut worst: f64 = 0.0;
    for kind in [ModelKind::ridge(), ModelKind::fcnn()] {
        let mut cfg = ExperimentConfig::new(turbine());
        cfg.train.seed = cell_seed(42, &kind);
        for (a, b) in [(1, 2), (4, 5), (7, 8)] {
            let ra = run_case(&table, &case_by_id(a).unwrap(), &kind, &cfg).map_err(|e| e.to_string())?;
            let rb = run_case(&table, &case_by_id(b).unwrap(), &kind, &cfg).map_err(|e| e.to_string())?;
            let (pa, pb) = (power_report_mw(&ra), power_report_mw(&rb));
            for (x, y) in pa.values().into_iter().zip(pb.values()) {
                match (x, y) {
                    (Some(x), Some(y)) => {
                        worst = worst.max((x - y).abs());
                        ensure((x - y).abs() <= 1e-9, || format!("{kind} C{a}/C{b}: {x} vs {y}"))?;
                    }
                    (None, None) => {}
                    _ => return Err(format!("{kind} C{a}/C{b}: metric defined on one side only")),
                }
            }
        }
    }
    Ok(format!("ridge and fcnn, C1/C2 C4/C5 C7/C8, worst diff {worst:.1e}"))
}

/// Exhaustive CART used as the single-tree oracle.
fn oracle_tree(x: &[Vec<f64>], y: &[f64], rows: &[usize], row: &[f64]) -> f64 {
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    if rows.len() < 2 || ys.iter().all(|v| *v == ys[0]) {
        return mean;
    }
    let sse = |idx: &[usize]| {
        let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>()
    };
    let parent = sse(rows);
    let tol = SPLIT_TIE_TOLERANCE * parent;
    let mut per_feature = Vec::new();
    for j in 0..x[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| x[i][j]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let mut best: Option<(usize, f64, f64)> = None;
        for w in vals.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][j] <= thr);
            let gain = parent - sse(&l) - sse(&r);
            if gain > best.map_or(0.0, |b| b.2) + tol {
                best = Some((j, thr, gain));
            }
        }
        per_feature.extend(best);
    }
    let top = per_feature.iter().map(|b| b.2).fold(f64::NEG_INFINITY, f64::max);
    let Some(&(j, thr, _)) = per_feature.iter().find(|b| b.2 >= top - tol) else {
        return mean;
    };
    let side: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&i| (x[i][j] <= thr) == (row[j] <= thr))
        .collect();
    oracle_tree(x, y, &side, row)
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<Vec<f64>> = (0..3000)
        .map(|_| (0..5).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = x.iter().map(|r| 5.0 * r[1] + 0.05 * rng.random_range(-1.0..1.0)).collect();
    let forest = fit_forest(&x, &y, &ForestConfig::default(), 42).map_err(|e| e.to_string())?;
    let w = importance(&forest).weights;
    let sum: f64 = w.iter().sum();
    ensure((sum - 1.0).abs() < 1e-12, || format!("weights sum {sum}"))?;
    ensure(w[1] > 0.9, || format!("x1 importance {}", w[1]))?;

    let single = ForestConfig {
        n_trees: 1,
        max_depth: usize::MAX,
        min_samples_split: 2,
        max_features: MaxFeatures::All,
        bootstrap: false,
    };
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let n = rng.random_range(5..=50);
        let f = rng.random_range(1..5);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| (rng.random_range(-5.0f64..5.0) * 4.0).round() / 4.0).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let tree = fit_forest(&xs, &ys, &single, trial).map_err(|e| e.to_string())?;
        let all: Vec<usize> = (0..n).collect();
        for _ in 0..20 {
            let probe: Vec<f64> = (0..f).map(|_| rng.random_range(-6.0..6.0)).collect();
            for row in xs.iter().chain(std::iter::once(&probe)) {
                let d = (tree.predict(row) - oracle_tree(&xs, &ys, &all, row)).abs();
                worst = worst.max(d);
                ensure(d <= 1e-9, || format!("trial {trial}: oracle differs by {d}"))?;
            }
        }
    }
    Ok(format!("sum {sum:.12}, x1 {:.4}, 50 oracle trees worst diff {worst:.1e}", w[1]))
}

fn criterion_7() -> Check {
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    let mut col = FeatureTable::new();
    col.push("row", (0..2000).map(|i| i as f64).collect()).unwrap();
    runner
        .run(&(0usize..2000, 1usize..40, 0usize..40), |(len, h, extra)| {
            let p = h + extra;
            let spec = WindowSpec::new(p, h, vec!["row".into()], "row").unwrap();
            let want = if len >= p + h { len - p - h + 1 } else { 0 };
            prop_assert_eq!(window_count(len, &spec), want);
            prop_assert_eq!(make_windows(&col, 0..len, &spec).unwrap().len(), want);
            Ok(())
        })
        .map_err(|e| format!("window count: {e}"))?;

    let spec = WindowSpec::new(18, 6, vec!["row".into()], "row").unwrap();
    let set = WindowedSet::build(&col, &spec, SplitRatios::default()).map_err(|e| e.to_string())?;
    for (samples, range) in [
        (&set.train, &set.bounds.train),
        (&set.val, &set.bounds.val),
        (&set.test, &set.bounds.test),
    ] {
        for s in samples {
            let first = s.input[0] as usize;
            ensure(range.contains(&first) && range.contains(&s.t_index), || {
                format!("window {first}..{} leaves {range:?}", s.t_index)
            })?;
            ensure(s.input.iter().all(|&r| (r as usize) < s.t_index), || "input after target".into())?;
        }
    }
    let b = split_rows(116_254, SplitRatios::default());
    let sizes = (b.train.len(), b.val.len(), b.test.len());
    ensure(sizes == (93_003, 11_625, 11_626), || format!("split sizes {sizes:?}"))?;
    Ok(format!("256 count cases, leakage audit clean, splits {sizes:?}"))
}

fn run_cli(args: &[&str]) -> Result<(String, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_windcast"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "windcast {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok((String::from_utf8_lossy(&out.stdout).into_owned(), start.elapsed()))
}

fn criterion_8() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let data = dir.join("fixture.csv");
    run_cli(&["--seed", "42", "fixture", "--rows", "20000", "--out", &s(&data)])?;
    let mut times = Vec::new();
    let mut stdouts = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let (stdout, took) = run_cli(&["--seed", "42", "--out-dir", &s(&out), "cases", &s(&data)])?;
        ensure(took < Duration::from_secs(900), || format!("run {run} took {took:?}"))?;
        times.push(took);
        stdouts.push(stdout);
    }
    let files = ["cases.csv", "cases.json", "radar_ridge.svg", "radar_fcnn.svg", "radar_gru.svg"];
    for f in files {
        let a = std::fs::read(dir.join("a").join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(dir.join("b").join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(a == b, || format!("{f} differs between runs"))?;
    }
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("a/cases.json")).unwrap()).map_err(|e| e.to_string())?;
    let pooled = doc["improvement"]["pooled"]["percent"].as_f64();
    ensure(pooled.is_some(), || "no improvement statistic in cases.json".into())?;
    ensure(stdouts[0].contains("improvement"), || "no improvement statistic on stdout".into())?;
    let cells = doc["cases"].as_array().map_or(0, Vec::len);
    ensure(cells == 27, || format!("{cells} of 27 cells succeeded"))?;
    Ok(format!(
        "byte-identical outputs, runs {:.0}s / {:.0}s, pooled improvement {:.2}%",
        times[0].as_secs_f64(),
        times[1].as_secs_f64(),
        pooled.unwrap()
    ))
}

fn criterion_9() -> Check {
    let t = turbine();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dist = Weibull::new(9.0, 2.0).map_err(|e| e.to_string())?;
    let hub: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
    let stats = t.conversion_fraction_hub(&hub).map_err(|e| e.to_string())?;
    let area = std::f64::consts::PI * 75.0 * 75.0;
    let cp = 8e6 / (0.5 * 1.2 * area * 12.4f64.powi(3));
    let (mut produced, mut available) = (0.0, 0.0);
    for &v in &hub {
        let raw = 0.5 * 1.2 * area * v * v * v * cp;
        available += raw;
        produced += if v < 3.0 || v >= 25.0 {
            0.0
        } else if v >= 12.4 {
            8e6
        } else {
            raw
        };
    }
    let brute = produced / available;
    ensure((stats.fraction - brute).abs() <= 1e-12, || format!("{} vs {brute}", stats.fraction))?;
    let bands = stats.below_cut_in + stats.partial_load + stats.rated_load + stats.cut_out;
    ensure((bands - 1.0).abs() <= 1e-12, || format!("band fractions sum {bands}"))?;
    Ok(format!("fraction {:.6} (brute force {brute:.6})", stats.fraction))
}

fn criterion_10() -> Check {
    let table = fixture_table();
    let spec = WindowSpec::new(18, 1, vec![WSPD_LOW.into()], WSPD_LOW).map_err(|e| e.to_string())?;
    let set = WindowedSet::build(&table, &spec, SplitRatios::default()).map_err(|e| e.to_string())?;
    let kind = ModelKind::fcnn();
    let mut cfg = ExperimentConfig::new(turbine()).train;
    cfg.seed = cell_seed(42, &kind);
    let model = fit(&set, &kind, &cfg).map_err(|e| e.to_string())?;
    let pred = model.predict_samples(&set.test).map_err(|e| e.to_string())?;
    let truth: Vec<f64> = set.test.iter().map(|s| s.target).collect();
    let r = evaluate(&truth, &pred).map_err(|e| e.to_string())?;
    let col = table.column(WSPD_LOW).unwrap();
    let persistence_mae =
        set.test.iter().map(|s| (s.target - col[s.t_index - 1]).abs()).sum::<f64>() / set.test.len() as f64;
    let r2 = r.r2.unwrap_or(f64::NAN);
    ensure(r2 > 0.9, || format!("test R2 {r2:.4}"))?;
    ensure(r.mae < persistence_mae, || format!("MAE {:.4} vs persistence {persistence_mae:.4}", r.mae))?;
    Ok(format!("R2 {r2:.4}, MAE {:.4} < persistence {persistence_mae:.4} m/s", r.mae))
}

fn main() {
    let criteria: [(u8, &str, fn() -> Check); 10] = [
        (1, "height ratio and anemometer bands", criterion_1),
        (2, "banded power curve", criterion_2),
        (3, "metrics against naive loops", criterion_3),
        (4, "gradient checks", criterion_4),
        (5, "case-pair equivalence", criterion_5),
        (6, "forest importance and oracle tree", criterion_6),
        (7, "window counts, leakage and splits", criterion_7),
        (8, "deterministic CLI experiment matrix", criterion_8),
        (9, "conversion fraction", criterion_9),
        (10, "FCNN beats persistence on C1", criterion_10),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {n}: {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {n}: {name}: {why} ({secs:.1}s)");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
