//! One check per acceptance criterion, each printing a single PASS/FAIL
//! line. Runs without the libtest harness so the lines are always shown:
//! `cargo test -p qunet-core --test acceptance`. Exits non-zero if any
//! criterion fails.

mod common;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use common::{dense_expectations, quantile_oracle};
use qunet::data::{make_partitions, synth_dataset};
use qunet::harness::gradcheck::{layer_suite, model_suite, qsim_suite, qufex_suite};
use qunet::harness::{aggregate_stats, run_protocol, train, ProtocolConfig, TrainConfig, RUNS_FILE, SUMMARY_FILE};
use qunet::models::{build_model, reconcile, table_targets, ModelConfig, Scale, Variant};
use qunet::nn::{glorot_uniform, Tensor};
use qunet::qsim::{run_circuit, Gate};
use qunet::qufex::{build_template, build_template_with, EncodingBasis, QuFeXLayer, QuFeXSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: &str, ok: bool, detail: String) -> bool {
    println!("{} {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn simulator_oracle_suite() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let templates = [
        build_template(4, 1).unwrap(),
        build_template(4, 2).unwrap(),
        build_template_with(4, 2, EncodingBasis::X { closing_h: true }).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for t in &templates {
        for _ in 0..100 {
            let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
            let enc: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
            let got = run_circuit(t, &theta, &enc).unwrap();
            for (a, b) in got.iter().zip(dense_expectations(t, &theta, &enc)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        "simulator oracle suite",
        worst <= 1e-10 && elapsed < Duration::from_secs(10),
        format!(
            "{} templates x 100 draws, max |diff| {worst:.2e} (tol 1e-10), {elapsed:.2?} (< 10 s)",
            templates.len()
        ),
    )
}

fn gradient_suite() -> bool {
    let start = Instant::now();
    let mut reports = qsim_suite(10, 7).unwrap();
    reports.extend(layer_suite(7).unwrap());
    reports.extend(qufex_suite(7).unwrap());
    let models = model_suite(64, 7).unwrap();
    let elapsed = start.elapsed();
    for r in reports.iter().chain(&models) {
        println!("    {}", r.line());
    }
    let ok = reports.iter().chain(&models).all(|r| r.passed())
        && models.iter().all(|r| r.checked >= 50)
        && elapsed < Duration::from_secs(300);
    report(
        "gradient suite",
        ok,
        format!(
            "{} op checks (tol 1e-5), {} whole-model checks (>= 50 coords, tol 1e-4 rel), {elapsed:.2?} (< 5 min)",
            reports.len(),
            models.len()
        ),
    )
}

fn parameter_accounting() -> bool {
    let mut ok = true;
    let mut lines = Vec::new();
    for t in table_targets() {
        let q = build_model(&ModelConfig::new(t.variant, t.scale), 0).unwrap().count_params().quantum;
        let want = match t.variant {
            Variant::Unet => 0,
            Variant::Qunet8x1 => 4,
            Variant::Qunet4x2 => 8,
        };
        ok &= q == want && q == t.quantum;
        let r = reconcile(&t).unwrap();
        // A non-zero residual must come with a per-layer itemization.
        ok &= r.default.residual == 0 || !r.deltas.is_empty();
        ok &= r.render().contains(&t.classical.to_string());
        lines.push(format!("{}-{} q={q} residual {:+}", t.variant, t.scale, r.default.residual));
    }
    for t in table_targets() {
        print!("{}", reconcile(&t).unwrap().render());
    }
    report("parameter accounting", ok, lines.join("; "))
}

fn structural_invariants() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checks = Vec::new();

    let four = QuFeXSet::new(
        vec![
            QuFeXLayer::new(4, 1, 8).unwrap().randomize(&mut rng),
            QuFeXLayer::new(4, 2, 8).unwrap().randomize(&mut rng),
        ],
        Some(glorot_uniform(&[8, 8, 3, 3], 72, 72, &mut rng)),
    )
    .unwrap();
    let eight = QuFeXSet::new(vec![QuFeXLayer::new(8, 1, 2).unwrap().randomize(&mut rng)], None).unwrap();
    let mut shapes_ok = true;
    let mut residual_ok = true;
    for (set, shape) in [(&four, [2, 8, 1, 1]), (&four, [1, 8, 2, 2]), (&eight, [2, 8, 2, 2])] {
        let n: usize = shape.iter().product();
        let x = Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
        let (y, cache) = set.forward(&x).unwrap();
        shapes_ok &= y.shape() == x.shape();
        let q = cache.quantum_output();
        residual_ok &= y.data().iter().zip(q.data()).zip(x.data()).all(|((y, q), x)| y.to_bits() == (q + x).to_bits());
    }
    checks.push(("output shape == input shape", shapes_ok));
    checks.push(("y == Q(x) + x bitwise", residual_ok));

    // Two feature groups with identical contents: streams 0 and 1 of a
    // [1, 4, 2, 2] input under the 8-qubit pairwise grouping.
    let half: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
    let x = Tensor::new(vec![1, 4, 2, 2], [half.clone(), half].concat()).unwrap();
    let q = eight.forward(&x).unwrap().1.quantum_output().clone();
    checks.push(("identical groups -> identical outputs", q.data()[..8] == q.data()[8..]));

    let m = build_model(&ModelConfig::new(Variant::Qunet8x1, Scale::Tiny), 0).unwrap();
    checks.push(("qunet-8-1 tiny: 4 circuit applications", m.circuit_applications_per_sample() == 4));

    let detail: Vec<String> = checks.iter().map(|(n, ok)| format!("{n} [{}]", if *ok { "ok" } else { "x" })).collect();
    report("structural invariants", checks.iter().all(|c| c.1), detail.join("; "))
}

fn desk_scale_training() -> bool {
    let start = Instant::now();
    let data = synth_dataset(200, 32, 0).unwrap();
    let ids: Vec<String> = data.iter().map(|s| s.id.clone()).collect();
    let partition = &make_partitions(&ids, 1, 0.8, 0).unwrap()[0];
    let mut ok = true;
    let mut detail = Vec::new();
    for variant in [Variant::Unet, Variant::Qunet4x2] {
        let cfg = ModelConfig::new(variant, Scale::Tiny).with_input_size(32);
        let mut model = build_model(&cfg, partition.seed).unwrap();
        let run = train(&mut model, partition, &data, &TrainConfig::default()).unwrap();
        let (first, last) = (run.epoch_losses[0], run.epoch_losses[9]);
        ok &= run.test_iou > 0.7 && last < first;
        detail.push(format!("{} IoU {:.3} (> 0.7), loss {first:.4} -> {last:.4}", cfg.tag(), run.test_iou));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1800);
    report("desk-scale training", ok, format!("{}; {elapsed:.2?} (< 30 min)", detail.join("; ")))
}

fn protocol_reproducibility() -> bool {
    let data = synth_dataset(24, 32, 9).unwrap();
    let mut cfg = ProtocolConfig::new(ModelConfig::new(Variant::Qunet4x2, Scale::Tiny).with_input_size(32));
    cfg.train = TrainConfig { epochs: 2, batch_size: 8, lr: 1e-3 };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_protocol(&cfg, &data, Some(d.path())).unwrap();
    }
    let same =
        |f: &str| std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap();
    let files_ok = same(RUNS_FILE) && same(SUMMARY_FILE);

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut stats_ok = true;
    for _ in 0..2000 {
        let n = rng.gen_range(1..30);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        if rng.gen_bool(0.3) {
            v.push(rng.gen_range(-5.0..5.0));
        }
        let s = aggregate_stats(&v).unwrap();
        let (q3, q2, q1) = (s.lower_quartile, s.median, s.upper_quartile);
        stats_ok &= q3 <= q2 && q2 <= q1;
        stats_ok &= (q1 - quantile_oracle(&v, 0.75)).abs() < 1e-12 && (q3 - quantile_oracle(&v, 0.25)).abs() < 1e-12;
        let (lo, hi) = (q3 - 1.5 * s.iqr, q1 + 1.5 * s.iqr);
        let inliers: Vec<f64> = v.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
        stats_ok &= s.upper_whisker == inliers.iter().copied().fold(f64::MIN, f64::max);
        stats_ok &= s.lower_whisker == inliers.iter().copied().fold(f64::MAX, f64::min);
        stats_ok &= s.outliers.iter().all(|x| *x < lo || *x > hi) && s.outliers.len() + inliers.len() == v.len();
    }
    report(
        "protocol reproducibility",
        files_ok && stats_ok,
        format!(
            "10-partition run twice: files identical [{}]; 2000 random lists: Q3 <= Q2 <= Q1 and 1.5 IQR whiskers [{}]",
            if files_ok { "ok" } else { "x" },
            if stats_ok { "ok" } else { "x" }
        ),
    )
}

fn qcnn_difference() -> bool {
    let mut ok = true;
    let mut detail = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [4, 8] {
        for layer in [1, 2] {
            let t = build_template(n, layer).unwrap();
            let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
            let enc: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
            let out = run_circuit(&t, &theta, &enc).unwrap();
            let controls: Vec<usize> = t
                .gates()
                .iter()
                .filter_map(|g| if let Gate::Cz { control, .. } = g { Some(*control) } else { None })
                .collect();
            // Every pooling control is still read out.
            ok &= out.len() == n && !controls.is_empty() && controls.iter().all(|&c| c < out.len());
            detail.push(format!("qufex-{n}-{layer}: {} outputs, {} pooling controls kept", out.len(), controls.len()));
        }
    }
    report("QCNN difference", ok, detail.join("; "))
}

type Criterion = (&'static str, fn() -> bool);

fn main() {
    let checks: [Criterion; 7] = [
        ("simulator oracle suite", simulator_oracle_suite),
        ("gradient suite", gradient_suite),
        ("parameter accounting", parameter_accounting),
        ("structural invariants", structural_invariants),
        ("desk-scale training", desk_scale_training),
        ("protocol reproducibility", protocol_reproducibility),
        ("QCNN difference", qcnn_difference),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, check)| !check()).map(|(name, _)| *name).collect();
    println!("acceptance: {} of {} criteria passed", checks.len() - failed.len(), checks.len());
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
