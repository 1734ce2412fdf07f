//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use sigfcn_core::config::ModelConfig;
use sigfcn_core::data::{
    load_samples, synth_generate, DatasetCatalog, SampleKind, SignatureImage, SynthConfig, MANIFEST_NAME,
};
use sigfcn_core::eval::{accuracy, far, frr, ConfusionCounts, Decision, Evaluation};
use sigfcn_core::exec::Executor;
use sigfcn_core::layers::{global_avg_pool, Conv2D, PoolMode, PoolSpec};
use sigfcn_core::network::Network;
use sigfcn_core::train::{train, Example, SgdConfig};
use sigfcn_core::{Rng, Tensor};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, &'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sigfcn")
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("SIGFCN_OUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Result<String, String> {
    let out = run(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "`sigfcn {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn uniform(shape: &[usize], rng: &mut Rng) -> Tensor<f32> {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.uniform(-1.0, 1.0) as f32).collect()).unwrap()
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.1?}, limit {limit:?}"))?;
    Ok(took)
}

// 1
fn gradient_fidelity() -> Outcome {
    let started = Instant::now();
    let report = run_ok(&["gradcheck"])?;
    let took = within(Duration::from_secs(30), started)?;
    let names = [
        "conv",
        "max_pool",
        "avg_pool",
        "global_avg_pool",
        "relu",
        "sigmoid",
        "dense",
        "softmax_cross_entropy",
        "end_to_end",
    ];
    let mut worst: f64 = 0.0;
    for name in names {
        let line = report
            .lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .ok_or_else(|| format!("report lacks {name}"))?;
        let fields: Vec<_> = line.split_whitespace().collect();
        let err: f64 = fields[1].parse().map_err(|e| format!("{line}: {e}"))?;
        ensure(err < 1e-4 && fields[2] == "ok", || line.to_string())?;
        worst = worst.max(err);
    }
    let faulty = run(&["gradcheck", "--inject-fault", "conv"]);
    let stderr = String::from_utf8_lossy(&faulty.stderr);
    ensure(faulty.status.code() == Some(4) && stderr.contains("conv"), || {
        format!("injected conv fault: exit {:?}, stderr {stderr}", faulty.status.code())
    })?;
    Ok(format!("9 checks, max rel error {worst:.2e}, {took:.1?}; injected conv fault exits 4"))
}

// 2
fn conv_shape_law() -> Outcome {
    let started = Instant::now();
    let mut rng = Rng::new(2);
    let cases = 250;
    for _ in 0..cases {
        let (m, r) = (1 + rng.below(7), 1 + rng.below(7));
        let t = m + rng.below(33 - m);
        let f = r + rng.below(33 - r);
        let (c_in, n) = (1 + rng.below(3), 1 + rng.below(4));
        let conv = Conv2D::<f32>::init(n, c_in, m, r, &mut rng).map_err(|e| e.to_string())?;
        let (y, _) = conv.forward(&uniform(&[c_in, t, f], &mut rng)).map_err(|e| e.to_string())?;
        let want = [n, t - m + 1, f - r + 1];
        ensure(y.shape() == want, || format!("t={t} f={f} m={m} r={r}: {:?} != {want:?}", y.shape()))?;
        ensure(conv.output_shape(&[c_in, t, f]).map_err(|e| e.to_string())? == want, || "output_shape disagrees".into())?;
    }
    let took = within(Duration::from_secs(5), started)?;
    Ok(format!("{cases} random shapes, {took:.1?}"))
}

// 3
fn conv_oracle() -> Outcome {
    let mut rng = Rng::new(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (c, n) = (1 + rng.below(3), 1 + rng.below(4));
        let (m, r) = (1 + rng.below(5), 1 + rng.below(5));
        let (t, f) = (m + rng.below(10), r + rng.below(10));
        let k = uniform(&[n, c, m, r], &mut rng);
        let b = uniform(&[n], &mut rng);
        let x = uniform(&[c, t, f], &mut rng);
        let conv = Conv2D::new(k.clone(), b.clone()).map_err(|e| e.to_string())?;
        let (y, _) = conv.forward(&x).map_err(|e| e.to_string())?;
        let (oh, ow) = (t - m + 1, f - r + 1);
        for j in 0..n {
            for p in 0..oh {
                for q in 0..ow {
                    let mut acc = b.data()[j] as f64;
                    for ch in 0..c {
                        for u in 0..m {
                            for v in 0..r {
                                acc += k.data()[((j * c + ch) * m + u) * r + v] as f64
                                    * x.data()[(ch * t + p + u) * f + q + v] as f64;
                            }
                        }
                    }
                    worst = worst.max((acc - y.data()[(j * oh + p) * ow + q] as f64).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-5, || format!("max abs error {worst:.2e}"))?;
    Ok(format!("100 instances, max abs error {worst:.2e}"))
}

// 4
fn pooling_identities() -> Outcome {
    let mut rng = Rng::new(4);
    for _ in 0..100 {
        let (c, h, w) = (1 + rng.below(4), 1 + rng.below(12), 1 + rng.below(12));
        let x = uniform(&[c, h, w], &mut rng);
        let gap = global_avg_pool(&x).map_err(|e| e.to_string())?;
        let (full, _) = PoolSpec::new(h, w, PoolMode::Average).unwrap().forward(&x).map_err(|e| e.to_string())?;
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure(bits(&gap) == bits(&full), || format!("GAP != full-window average on {c}x{h}x{w}"))?;

        let (p, q) = (1 + rng.below(h), 1 + rng.below(w));
        let (mx, _) = PoolSpec::new(p, q, PoolMode::Max).unwrap().forward(&x).map_err(|e| e.to_string())?;
        let (av, _) = PoolSpec::new(p, q, PoolMode::Average).unwrap().forward(&x).map_err(|e| e.to_string())?;
        ensure(mx.data().iter().zip(av.data()).all(|(a, b)| a >= b), || format!("max < avg for {p}x{q} on {h}x{w}"))?;
    }
    let mut floors = 0;
    for (h, w, p, q) in [(7, 9, 2, 2), (5, 5, 2, 3), (11, 4, 3, 3), (270, 360, 7, 7)] {
        let x = uniform(&[2, h, w], &mut rng);
        let (y, _) = PoolSpec::new(p, q, PoolMode::Max).unwrap().forward(&x).map_err(|e| e.to_string())?;
        let (oh, ow) = (h / p, w / q);
        ensure(y.shape() == [2, oh, ow], || format!("{h}x{w} / {p}x{q} gave {:?}", y.shape()))?;
        for ch in 0..2 {
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = f32::NEG_INFINITY;
                    for u in i * p..(i + 1) * p {
                        for v in j * q..(j + 1) * q {
                            best = best.max(x.data()[(ch * h + u) * w + v]);
                        }
                    }
                    ensure(best == y.data()[(ch * oh + i) * ow + j], || "floor-drop oracle mismatch".into())?;
                }
            }
        }
        floors += 1;
    }
    Ok(format!("GAP exact and max >= avg on 100 tensors; floor rule on {floors} shapes"))
}

// 5
fn parameter_reduction() -> Outcome {
    let conv = |n: usize, c: usize, m: usize, r: usize| n * (c * m * r + 1);
    let dense = |i: usize, o: usize| i * o + o;
    // 270x360 -> 266x356 -> 133x178 -> 129x174 -> 64x87
    let trunk = conv(8, 1, 5, 5) + conv(16, 8, 5, 5);
    let cnn_formula = trunk + dense(16 * 64 * 87, 128) + dense(128, 2);
    let fcn_formula = trunk + dense(16, 2);

    let mut rng = Rng::new(5);
    let cnn_cfg = ModelConfig::default_cnn();
    let fcn_cfg = ModelConfig::default_fcn();
    let cnn = Network::<f32>::build(&cnn_cfg, &mut rng).map_err(|e| e.to_string())?;
    let fcn = Network::<f32>::build(&fcn_cfg, &mut rng).map_err(|e| e.to_string())?;
    let enumerate = |net: &Network<f32>| net.params().iter().map(|p| p.len()).sum::<usize>();
    let (cnn_n, fcn_n) = (enumerate(&cnn), enumerate(&fcn));
    ensure(cnn_n == cnn_formula && cnn_cfg.param_count().unwrap() == cnn_formula, || {
        format!("CNN enumeration {cnn_n}, formula {cnn_formula}")
    })?;
    ensure(fcn_n == fcn_formula && fcn_cfg.param_count().unwrap() == fcn_formula, || {
        format!("FCN enumeration {fcn_n}, formula {fcn_formula}")
    })?;
    let ratio = fcn_n as f64 / cnn_n as f64;
    ensure(ratio < 0.01, || format!("ratio {ratio}"))?;
    Ok(format!("CNN {cnn_n}, FCN {fcn_n}, ratio {:.4}%", 100.0 * ratio))
}

// 6
fn overfit_smoke(dir: &Path, losses: &RefCell<Vec<f64>>) -> Outcome {
    let mut synth = SynthConfig::new(4, 54, 72, 6);
    (synth.genuine, synth.simple, synth.skilled, synth.opposite) = (4, 2, 1, 1);
    let exec = Executor::sequential();
    let catalog = synth_generate(&synth, &dir.join("smoke"), &exec).map_err(|e| e.to_string())?;
    ensure(catalog.len() == 32, || format!("{} images", catalog.len()))?;
    let config = ModelConfig::load(&repo_root().join("configs/fcn-small.toml")).map_err(|e| e.to_string())?;
    let data: Vec<Example> = load_samples(catalog.entries(), config.input, &exec)
        .map_err(|e| e.to_string())?
        .iter()
        .map(SignatureImage::to_example)
        .collect();
    let mut net = Network::build(&config, &mut Rng::new(6)).map_err(|e| e.to_string())?;
    let sgd = SgdConfig {
        learning_rate: 0.02,
        batch_size: 8,
        epochs: 300,
        seed: 6,
    };
    let started = Instant::now();
    let report = train(&mut net, &data, &sgd, &exec).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(300), started)?;
    *losses.borrow_mut() = report.losses.clone();
    let Some(epoch) = report.accuracies.iter().position(|&a| a >= 95.0) else {
        return Err(format!("best train accuracy {:.1}%", report.accuracies.iter().cloned().fold(0.0, f64::max)));
    };
    Ok(format!(
        "95% reached at epoch {}, final {:.1}%, {} params, {took:.1?}",
        epoch + 1,
        report.accuracies.last().unwrap(),
        net.param_count()
    ))
}

// loss-trend invariant on the smoke run
fn loss_trend(losses: &RefCell<Vec<f64>>) -> Outcome {
    let l = losses.borrow();
    ensure(l.len() > 70, || "smoke run produced no loss history".into())?;
    // after epoch 50, the loss 20 epochs on is at most 5 % above where the window started
    let upticks: Vec<usize> = (50..l.len() - 20).filter(|&s| l[s + 20] > 1.05 * l[s]).collect();
    ensure(upticks.is_empty(), || format!("loss rises over windows starting at epochs {upticks:?}"))?;
    Ok(format!("{} windows after epoch 50 non-increasing within 5%; loss {:.4} -> {:.4}", l.len() - 70, l[50], l[l.len() - 1]))
}

fn manifest_counts(path: &Path) -> Result<Vec<(String, [usize; 4])>, String> {
    let catalog = DatasetCatalog::read(path).map_err(|e| e.to_string())?;
    Ok(catalog
        .by_person()
        .into_iter()
        .map(|(p, s)| (p, SampleKind::ALL.map(|k| s.of_kind(k).len())))
        .collect())
}

// 7
fn split_protocol(data: &Path, dir: &Path) -> Outcome {
    let manifest = data.join(MANIFEST_NAME);
    let m = manifest.to_str().unwrap();
    let (a, b, c) = (dir.join("split-a"), dir.join("split-b"), dir.join("split-c"));
    run_ok(&["split", "--manifest", m, "--seed", "3", "--out", a.to_str().unwrap()])?;
    run_ok(&["split", "--manifest", m, "--seed", "3", "--out", b.to_str().unwrap()])?;
    run_ok(&["split", "--manifest", m, "--seed", "4", "--out", c.to_str().unwrap()])?;

    let train = manifest_counts(&a.join("train.manifest"))?;
    let test = manifest_counts(&a.join("test.manifest"))?;
    ensure(train.len() == 4 && test.len() == 4, || "expected 4 persons".into())?;
    for ((p, tr), (_, te)) in train.iter().zip(&test) {
        ensure(*tr == [25, 25, 0, 0], || format!("{p} train {tr:?}"))?;
        ensure(*te == [2, 11, 6, 3], || format!("{p} test {te:?}"))?;
    }
    let train_set = DatasetCatalog::read(&a.join("train.manifest")).unwrap();
    let test_set = DatasetCatalog::read(&a.join("test.manifest")).unwrap();
    let train_paths: std::collections::HashSet<_> = train_set.entries().iter().map(|s| &s.path).collect();
    ensure(test_set.entries().iter().all(|s| !train_paths.contains(&s.path)), || "train and test overlap".into())?;
    for name in ["train.manifest", "test.manifest"] {
        ensure(read(&a.join(name)) == read(&b.join(name)), || format!("{name} differs across identical runs"))?;
    }
    ensure(read(&a.join("train.manifest")) != read(&c.join("train.manifest")), || "seed has no effect".into())?;
    Ok("per person train 25+25, test 2+11+6+3; disjoint; seed-deterministic".into())
}

// 8
fn metrics_oracle() -> Outcome {
    let mut rng = Rng::new(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = 1 + rng.below(400);
        let decisions: Vec<Decision> = (0..len)
            .map(|_| Decision {
                kind: SampleKind::ALL[rng.below(4)],
                accepted: rng.below(2) == 1,
            })
            .collect();
        let eval = Evaluation::from_decisions(decisions.clone());
        let tally = |genuine: bool, accepted: bool| {
            decisions
                .iter()
                .filter(|d| (d.kind == SampleKind::Genuine) == genuine && d.accepted == accepted)
                .count() as u64
        };
        let oracle = ConfusionCounts {
            genuine_accepted: tally(true, true),
            genuine_rejected: tally(true, false),
            forged_accepted: tally(false, true),
            forged_rejected: tally(false, false),
        };
        ensure(eval.counts == oracle, || format!("{:?} != {oracle:?}", eval.counts))?;
        let (g, f) = ((oracle.genuine_accepted + oracle.genuine_rejected) as f64, (oracle.forged_accepted + oracle.forged_rejected) as f64);
        let acc = accuracy(&eval.counts).unwrap();
        ensure(acc == 100.0 * (oracle.genuine_accepted + oracle.forged_rejected) as f64 / (g + f), || "accuracy".into())?;
        if g > 0.0 && f > 0.0 {
            let (fa, fr) = (far(&eval.counts).unwrap(), frr(&eval.counts).unwrap());
            ensure(fa == 100.0 * oracle.forged_accepted as f64 / f, || "FAR".into())?;
            ensure(fr == 100.0 * oracle.genuine_rejected as f64 / g, || "FRR".into())?;
            let correct = (oracle.genuine_accepted + oracle.forged_rejected) as f64;
            let identity = g * (1.0 - fr / 100.0) + f * (1.0 - fa / 100.0);
            worst = worst.max((correct - identity).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("identity residual {worst:e}"))?;
    Ok(format!("100 decision sets exact; identity residual {worst:.1e}"))
}

// 9
fn determinism(split: &Path, dir: &Path) -> Outcome {
    let model = repo_root().join("configs/fcn-small.toml");
    let data = split.join("train.manifest");
    let mut outs = Vec::new();
    for (name, threads) in [("run-a", "1"), ("run-b", "1"), ("run-c", "4")] {
        let out = dir.join(name);
        run_ok(&[
            "--threads",
            threads,
            "train",
            "--model",
            model.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--epochs",
            "3",
            "--lr",
            "0.05",
            "--batch-size",
            "16",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ])?;
        outs.push((read(&out.join("loss.csv")), read(&out.join("model.ckpt"))));
    }
    ensure(outs[0] == outs[1], || "two --threads 1 runs differ".into())?;
    let loss = String::from_utf8_lossy(&outs[0].0).into_owned();
    ensure(loss.lines().filter(|l| !l.starts_with('#')).count() == 4, || format!("loss.csv:\n{loss}"))?;
    let across = if outs[0] == outs[2] { "also identical with --threads 4" } else { "differs with --threads 4" };
    Ok(format!("loss.csv and model.ckpt bitwise identical; {across}"))
}

// 10
fn end_to_end(dir: &Path) -> Outcome {
    let data = dir.join("e2e-data");
    let split = dir.join("e2e-split");
    let out = dir.join("e2e-compare");
    run_ok(&["synth", "--persons", "4", "--seed", "10", "--out", data.to_str().unwrap()])?;
    let split_log = run_ok(&[
        "split",
        "--manifest",
        data.join(MANIFEST_NAME).to_str().unwrap(),
        "--seed",
        "10",
        "--out",
        split.to_str().unwrap(),
    ])?;
    let split_hash = split_log
        .lines()
        .find_map(|l| l.strip_prefix("split = "))
        .ok_or("split printed no hash")?
        .to_string();
    let report = run_ok(&[
        "compare",
        "--train",
        split.join("train.manifest").to_str().unwrap(),
        "--test",
        split.join("test.manifest").to_str().unwrap(),
        "--height",
        "54",
        "--width",
        "72",
        "--epochs",
        "15",
        "--lr",
        "0.05",
        "--batch-size",
        "8",
        "--seed",
        "10",
        "--with-paper-reference",
        "--out",
        out.to_str().unwrap(),
    ])?;
    ensure(report.contains(&format!("# split = {split_hash}")), || format!("split hash {split_hash} missing:\n{report}"))?;
    let param = |name: &str| -> Result<usize, String> {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("# {name} parameters = ")))
            .and_then(|v| v.parse().ok())
            .ok_or(format!("{name} parameter count missing"))
    };
    let (cnn, fcn) = (param("CNN")?, param("FCN")?);
    ensure(fcn < cnn, || format!("FCN {fcn} >= CNN {cnn}"))?;
    let rows: Vec<_> = sigfcn_core::eval::parse_csv(&String::from_utf8_lossy(&read(&out.join("compare.csv"))))
        .map_err(|e| e.to_string())?;
    ensure(rows.len() == 5 && rows[0].model == "CNN" && rows[1].model == "FCN", || format!("rows {rows:?}"))?;
    for r in &rows[..2] {
        for v in [r.accuracy, r.far, r.frr].into_iter().flatten() {
            ensure((0.0..=100.0).contains(&v), || format!("{} value {v}", r.model))?;
        }
    }
    let ordering = report
        .lines()
        .find_map(|l| l.strip_prefix("# ordering (informational) = "))
        .unwrap_or("not reported");
    let fmt = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.2}"));
    Ok(format!(
        "CNN acc {} / FCN acc {} ({ordering}, not gated); params CNN {cnn}, FCN {fcn}",
        fmt(rows[0].accuracy),
        fmt(rows[1].accuracy)
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let base = dir.path();
    let mut failed = false;

    // shared corpus for the split and determinism criteria
    let corpus = base.join("corpus");
    let split = base.join("split-a");
    let prepared = run_ok(&["synth", "--persons", "4", "--seed", "7", "--out", corpus.to_str().unwrap()]);
    if let Err(e) = &prepared {
        eprintln!("setup failed: {e}");
    }

    let losses = RefCell::new(Vec::new());
    let criteria: Vec<Criterion<'_>> = vec![
        ("1", "gradient fidelity", Box::new(gradient_fidelity)),
        ("2", "conv shape law", Box::new(conv_shape_law)),
        ("3", "conv oracle", Box::new(conv_oracle)),
        ("4", "pooling identities", Box::new(pooling_identities)),
        ("5", "parameter reduction", Box::new(parameter_reduction)),
        ("6", "overfit smoke", Box::new(|| overfit_smoke(base, &losses))),
        ("6+", "loss trend", Box::new(|| loss_trend(&losses))),
        ("7", "split protocol", Box::new(|| split_protocol(&corpus, base))),
        ("8", "metrics oracle", Box::new(metrics_oracle)),
        ("9", "determinism", Box::new(|| determinism(&split, base))),
        ("10", "end-to-end pipeline", Box::new(|| end_to_end(base))),
    ];
    for (id, name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>3} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed = true;
                println!("FAIL {id:>3} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed {
        std::process::exit(1);
    }
}
