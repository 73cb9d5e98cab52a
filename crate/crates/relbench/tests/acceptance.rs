//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! with a nonzero status if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use relbench::checkpoint::load_checkpoint;
use relbench::manifest::load_split;
use relbench::significance::{levene, mann_whitney_u, shapiro_wilk, t_test};
use relbench_core::attack::{pgd_attack, PgdParams};
use relbench_core::benchsize::{
    enumerate_sampled_outcomes, min_benchmark_size, success_probability, SearchMode, WinCounts,
};
use relbench_core::calib::{ada_ece, DEFAULT_BINS};
use relbench_core::loss::{cross_entropy, focal_loss, LossKind};
use relbench_core::nn::ToyNet;
use relbench_core::oracle::{GradientOracle, ScoringOracle};
use relbench_core::saliency::integrated_gradients_pixels;
use relbench_core::stats::{krippendorff_alpha_ordinal, RankMatrix};
use relbench_core::train::{
    interp_loss, train_step, train_step_interp, Sgd, TrainConfig, TrainingSetting,
};
use relbench_core::{Image, Rng};

mod alpha_fixtures {
    include!("../../core/tests/support/alpha_fixtures.rs");
}
mod gradcheck {
    use relbench_core::loss::LossKind;
    use relbench_core::nn::ToyNet;
    use relbench_core::{Image, Rng};
    include!("../../core/tests/support/gradcheck.rs");
}
mod metric_brute {
    use relbench_core::metrics::{all_metrics, DeletionOrder, MetricConfig, MetricKind};
    use relbench_core::oracle::{FnOracle, ScoringOracle};
    use relbench_core::perturb::{blur, BlurParams, PatchGrid, Upsample};
    use relbench_core::{Image, Rng, SaliencyMap};
    include!("../../core/tests/support/metric_brute.rs");
}
mod ece_fixture {
    include!("../../core/tests/support/adaece_fixture.rs");
}
mod stats_fixtures {
    include!("support/stats_fixtures.rs");
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// 1
fn outcome_enumeration() -> Outcome {
    let start = Instant::now();
    let got = enumerate_sampled_outcomes(3, 2, 1.0).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let mut got: Vec<Vec<usize>> = got;
    got.sort();
    let mut want = vec![
        vec![0, 0, 2],
        vec![0, 2, 0],
        vec![2, 0, 0],
        vec![0, 1, 1],
        vec![1, 1, 0],
        vec![1, 0, 1],
    ];
    want.sort();
    check(got == want, format!("outcomes {got:?}"))?;
    check(took < Duration::from_millis(1), format!("took {took:?}"))?;
    Ok(format!("6 outcomes in {took:?}"))
}

/// Fraction of `draws` random subsets of size `n_prime` on which `best`
/// wins strictly.
fn simulate(counts: &[usize], best: usize, n_prime: usize, draws: usize, rng: &mut Rng) -> f64 {
    let total: usize = counts.iter().sum();
    let mut wins = 0;
    let mut t = vec![0usize; counts.len()];
    for _ in 0..draws {
        t.iter_mut().for_each(|v| *v = 0);
        for _ in 0..n_prime {
            let mut u = rng.below_usize(total);
            let mut k = 0;
            while u >= counts[k] {
                u -= counts[k];
                k += 1;
            }
            t[k] += 1;
        }
        if t.iter().enumerate().all(|(i, &v)| i == best || v < t[best]) {
            wins += 1;
        }
    }
    wins as f64 / draws as f64
}

// 2
fn success_vs_monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(2);
    let mut worst: f64 = 0.0;
    let mut configs = 0;
    while configs < 25 {
        let m = 2 + rng.below_usize(3);
        let counts: Vec<usize> = (0..m).map(|_| rng.below_usize(12)).collect();
        let top = *counts.iter().max().unwrap();
        if top == 0 || counts.iter().filter(|&&c| c == top).count() > 1 {
            continue;
        }
        let best = counts.iter().position(|&c| c == top).unwrap();
        let n_prime = 1 + rng.below_usize(30);
        let exact = success_probability(&WinCounts::new(counts.clone()).unwrap(), n_prime, 1.0)
            .map_err(|e| e.to_string())?;
        let mc = simulate(&counts, best, n_prime, 100_000, &mut rng);
        worst = worst.max((exact - mc).abs());
        configs += 1;
    }
    let took = start.elapsed();
    check(worst <= 0.01, format!("largest |difference| {worst}"))?;
    check(took < Duration::from_secs(30), format!("took {took:?}"))?;
    Ok(format!("largest |difference| {worst:.4} in {took:.1?}"))
}

fn compositions(m: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == m - 1 {
        prefix.push(n);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for v in 0..=n {
        prefix.push(v);
        compositions(m, n - v, prefix, out);
        prefix.pop();
    }
}

// 3
fn binary_equals_scan() -> Outcome {
    let start = Instant::now();
    let mut fixtures = 0;
    for m in 2..=3 {
        for n in 1..=50 {
            let mut all = Vec::new();
            compositions(m, n, &mut Vec::new(), &mut all);
            for counts in all {
                let top = *counts.iter().max().unwrap();
                if counts.iter().filter(|&&c| c == top).count() > 1 {
                    continue;
                }
                let wc = WinCounts::new(counts.clone()).unwrap();
                let b = min_benchmark_size(&wc, 0.05, 1.0, SearchMode::Binary);
                let s = min_benchmark_size(&wc, 0.05, 1.0, SearchMode::Scan);
                let same = match (&b, &s) {
                    (Ok(x), Ok(y)) => x.n_star == y.n_star,
                    (Err(x), Err(y)) => x == y,
                    _ => false,
                };
                check(same, format!("{counts:?}: binary {b:?} vs scan {s:?}"))?;
                fixtures += 1;
            }
        }
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(60), format!("took {took:?}"))?;
    Ok(format!("{fixtures} fixtures agree in {took:.1?}"))
}

// 4
fn krippendorff_alpha() -> Outcome {
    let row = [2.0, 1.0, 4.0, 3.0, 5.0];
    let same = RankMatrix::new(30, 5, row.repeat(30)).unwrap();
    let a = krippendorff_alpha_ordinal(&same).map_err(|e| e.to_string())?;
    check((a - 1.0).abs() <= 1e-12, format!("identical rows give {a}"))?;

    let mut rng = Rng::new(4);
    let mut data = Vec::with_capacity(500 * 12);
    for _ in 0..500 {
        let mut r: Vec<f64> = (1..=12).map(f64::from).collect();
        rng.shuffle(&mut r);
        data.extend(r);
    }
    let random = krippendorff_alpha_ordinal(&RankMatrix::new(500, 12, data).unwrap())
        .map_err(|e| e.to_string())?;
    check(random.abs() <= 0.05, format!("random ranks give {random}"))?;

    for (k, &(rows, cols, ranks, want)) in alpha_fixtures::ALPHA_FIXTURES.iter().enumerate() {
        let got = krippendorff_alpha_ordinal(&RankMatrix::new(rows, cols, ranks.to_vec()).unwrap())
            .map_err(|e| e.to_string())?;
        check((got - want).abs() <= 1e-9, format!("fixture {k}: {got} vs {want}"))?;
    }
    Ok(format!("random alpha {random:.4}, 10 fixtures match"))
}

// 5
fn gradient_check() -> Outcome {
    let ce = gradcheck::max_param_error(LossKind::CrossEntropy, 200, 51);
    let fl = gradcheck::max_param_error(LossKind::FocalAdaptive, 200, 52);
    check(ce <= 1e-3 && fl <= 1e-3, format!("relative errors CE {ce:e}, focal {fl:e}"))?;
    Ok(format!("max relative error CE {ce:.1e}, focal {fl:.1e}"))
}

// 6
fn pgd_attack_lowers_confidence() -> Outcome {
    let run = first_run()?;
    let net = load_checkpoint(&run.out.join("baseline/model")).map_err(|e| e.to_string())?;
    let (_, test) = load_split(&run.data, "test").map_err(|e| e.to_string())?;
    let exact: ToyNet<f64> = net.cast();
    let params = PgdParams::default();
    let mut drops = 0;
    for (img, label) in test.iter().take(100) {
        let adv = pgd_attack(&net, img, *label, LossKind::CrossEntropy, params).map_err(|e| e.to_string())?;
        check(
            f64::from(adv.linf_distance(img)) <= params.eps + 1e-7,
            "attack left the eps-ball",
        )?;
        check(adv.data().iter().all(|v| (0.0..=1.0).contains(v)), "attack left [0, 1]")?;
        let before = exact.forward(img).unwrap().probs()[*label];
        let after = exact.forward(&adv).unwrap().probs()[*label];
        if after < before {
            drops += 1;
        }
    }
    check(drops >= 80, format!("confidence dropped on {drops} of 100 images"))?;
    Ok(format!("confidence dropped on {drops} of 100 images"))
}

fn small_batch(seed: u64) -> (Vec<Image>, Vec<usize>) {
    let mut rng = Rng::new(seed);
    let imgs = (0..6)
        .map(|_| Image::new(16, 16, 3, (0..768).map(|_| rng.next_f64() as f32).collect()).unwrap())
        .collect();
    (imgs, (0..6).map(|i| i % 3).collect())
}

// 7
fn loss_identities() -> Outcome {
    for k in 1..=99 {
        let p = f64::from(k) / 100.0;
        let (f, c) = (focal_loss(p, 0.0).unwrap(), cross_entropy(p).unwrap());
        check((f - c).abs() <= 1e-12, format!("p {p}: focal {f} vs CE {c}"))?;
    }
    let net: ToyNet = ToyNet::init(3, 3, &mut Rng::new(70));
    let (imgs, labels) = small_batch(71);
    let (fp, _) = small_batch(72);
    let mean_ce = |set: &[Image]| -> f64 {
        set.iter()
            .zip(&labels)
            .map(|(img, &y)| f64::from(net.loss(img, y, LossKind::CrossEntropy).unwrap()))
            .sum::<f64>()
            / set.len() as f64
    };
    let at0 = interp_loss(&net, &imgs, &fp, &labels, 0.0).unwrap();
    check(at0 == 2.0 * mean_ce(&imgs), format!("beta 0: {at0} vs {}", 2.0 * mean_ce(&imgs)))?;
    let at1 = interp_loss(&net, &imgs, &fp, &labels, 1.0).unwrap();
    check(at1 == mean_ce(&imgs) + mean_ce(&fp), "beta 1 loss differs from regular + FP")?;

    // one step at beta 1 is one step of the FP setting with CE
    let cfg = TrainConfig::default();
    let fp_setting = TrainingSetting {
        fp: true,
        ap: false,
        fl: false,
    };
    let (mut a, mut b) = (net.clone(), net.clone());
    let (mut oa, mut ob) = (Sgd::new(&a), Sgd::new(&b));
    let la = train_step_interp(&mut a, &mut oa, &cfg, &imgs, &labels, 1.0, &mut Rng::new(73)).unwrap();
    let lb = train_step(&mut b, &mut ob, &cfg, &imgs, &labels, fp_setting, &mut Rng::new(73))
        .unwrap()
        .total();
    check(la == lb, format!("beta 1 step loss {la} vs FP setting {lb}"))?;
    check(a == b, "beta 1 step and FP setting step give different weights")?;
    Ok("focal(gamma 0) = CE; both interpolation endpoints exact".into())
}

// 8
fn metric_oracle() -> Outcome {
    let d = metric_brute::max_metric_discrepancy();
    check(d <= 1e-9, format!("largest discrepancy {d:e}"))?;
    Ok(format!("largest discrepancy {d:.1e}"))
}

/// `w . x + b` for one class, so integrated gradients are exact.
struct LinearScore {
    w: Vec<f64>,
    b: f64,
}

impl LinearScore {
    fn value(&self, img: &Image) -> f64 {
        self.w.iter().zip(img.data()).fold(self.b, |s, (w, &x)| s + w * f64::from(x))
    }
}

impl ScoringOracle for LinearScore {
    fn num_classes(&self) -> usize {
        1
    }
    fn score_batch(&self, images: &[Image]) -> relbench_core::Result<Vec<Vec<f64>>> {
        Ok(images.iter().map(|i| vec![self.value(i)]).collect())
    }
    fn gradients(&self) -> Option<&dyn GradientOracle> {
        Some(self)
    }
}

impl GradientOracle for LinearScore {
    fn class_score_gradient(&self, img: &Image, _class: usize) -> relbench_core::Result<(f64, Vec<f64>)> {
        Ok((self.value(img), self.w.clone()))
    }
    fn loss_gradient(&self, _: &Image, _: usize, _: LossKind) -> relbench_core::Result<(f64, Vec<f64>)> {
        Err(relbench_core::Error::NoGradient)
    }
}

// 9
fn ig_completeness() -> Outcome {
    let run = first_run()?;
    let net = load_checkpoint(&run.out.join("baseline/model")).map_err(|e| e.to_string())?;
    let (_, test) = load_split(&run.data, "test").map_err(|e| e.to_string())?;
    let black = Image::filled(32, 32, 3, 0.0).unwrap();
    let mut worst: f64 = 0.0;
    for (img, label) in test.iter().take(20) {
        let attr = integrated_gradients_pixels(&net, img, &black, *label, 256).map_err(|e| e.to_string())?;
        let sum: f64 = attr.iter().sum();
        let diff = net.score(img).unwrap()[*label] - net.score(&black).unwrap()[*label];
        worst = worst.max((sum - diff).abs() / diff.abs());
    }
    check(worst <= 0.02, format!("toy net relative gap {worst}"))?;

    let mut rng = Rng::new(9);
    let lin = LinearScore {
        w: (0..768).map(|_| rng.next_f64() - 0.5).collect(),
        b: 0.3,
    };
    let (imgs, _) = small_batch(90);
    let base = Image::filled(16, 16, 3, 0.25).unwrap();
    for steps in [1, 2, 7, 64] {
        for img in &imgs {
            let sum: f64 = integrated_gradients_pixels(&lin, img, &base, 0, steps).unwrap().iter().sum();
            let diff = lin.value(img) - lin.value(&base);
            check((sum - diff).abs() <= 1e-6, format!("linear scorer, {steps} steps: {sum} vs {diff}"))?;
        }
    }
    Ok(format!("toy net worst relative gap {worst:.1e}; linear scorer exact"))
}

struct Run {
    data: PathBuf,
    out: PathBuf,
    elapsed: Duration,
}

const PIPELINE_LIMIT: Duration = Duration::from_secs(15 * 60);

fn scratch_root() -> &'static Path {
    static ROOT: OnceLock<tempfile::TempDir> = OnceLock::new();
    ROOT.get_or_init(|| tempfile::tempdir().expect("temp dir")).path()
}

fn relbench(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_relbench"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!("relbench {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

/// Synthetic data, both settings trained, explained, scored and compared.
fn full_pipeline(name: &str) -> Result<Run, String> {
    let root = scratch_root().join(name);
    let (data, out) = (root.join("data"), root.join("out"));
    let (d, o) = (data.to_str().unwrap(), out.to_str().unwrap());
    let start = Instant::now();
    relbench(&["gen-data", "--seed", "10", "--data", d, "--images", "2000", "--classes", "4", "--size", "32"])?;
    relbench(&[
        "report", "--seed", "10", "--data", d, "--out", o, "--set", "eval_images=64", "--set", "bootstrap=1000",
    ])?;
    Ok(Run {
        data,
        out,
        elapsed: start.elapsed(),
    })
}

fn first_run() -> Result<&'static Run, String> {
    static FIRST: OnceLock<Result<Run, String>> = OnceLock::new();
    FIRST.get_or_init(|| full_pipeline("first")).as_ref().map_err(Clone::clone)
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

// 10
fn end_to_end_determinism() -> Outcome {
    let a = first_run()?;
    let b = full_pipeline("second")?;
    for (x, y) in [(&a.data, &b.data), (&a.out, &b.out)] {
        let (fx, fy) = (files(x), files(y));
        check(fx.keys().eq(fy.keys()), "the two runs wrote different files")?;
        for (name, bytes) in &fx {
            check(&fy[name] == bytes, format!("{} differs between runs", name.display()))?;
        }
    }
    let worst = a.elapsed.max(b.elapsed);
    check(worst < PIPELINE_LIMIT, format!("pipeline took {worst:.0?}"))?;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(format!(
        "{} files identical; runs took {:.0?} and {:.0?} on {cores} core(s)",
        files(&a.out).len() + files(&a.data).len(),
        a.elapsed,
        b.elapsed
    ))
}

// 11
fn statistical_tests() -> Outcome {
    let mut rng = Rng::new(11);
    let mut splits = 0;
    for n in 2..=8 {
        for na in 1..n {
            for trial in 0..8 {
                let levels = if trial % 2 == 0 { 3 } else { 1000 };
                let x: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64).collect();
                let (a, b) = x.split_at(na);
                let (_, p) = mann_whitney_u(a, b).map_err(|e| e.to_string())?;
                let (_, want) = stats_fixtures::enumerate_u(a, b);
                check((p - want).abs() <= 1e-12, format!("{a:?} vs {b:?}: {p} vs {want}"))?;
                splits += 1;
            }
        }
    }
    let t_closed = (2.0 - 2.5) / (7.0f64 / 5.0 * (1.0 / 3.0 + 1.0 / 4.0)).sqrt();
    let (t, _) = t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0], true).map_err(|e| e.to_string())?;
    check((t - t_closed).abs() <= 1e-9, format!("t {t} vs {t_closed}"))?;
    let sw: [(&[f64], f64, f64); 3] = [
        (&stats_fixtures::SW10, 0.959688770985856, 0.7823176762099994),
        (&stats_fixtures::SW25, 0.969757579643862, 0.6389266127774125),
        (&stats_fixtures::SW60, 0.8762733677654403, 1.994641702284689e-05),
    ];
    for (x, w, p) in sw {
        let (gw, gp) = shapiro_wilk(x).map_err(|e| e.to_string())?;
        check((gw - w).abs() <= 1e-6 && (gp - p).abs() <= 1e-6, format!("Shapiro-Wilk {gw}, {gp} vs {w}, {p}"))?;
    }
    let (f, p) = levene(&stats_fixtures::LEV_A, &stats_fixtures::LEV_B).map_err(|e| e.to_string())?;
    check(
        (f - 1.3665965231329633).abs() <= 1e-6 && (p - 0.2534236874555475).abs() <= 1e-6,
        format!("Levene {f}, {p}"),
    )?;
    Ok(format!("{splits} exact Mann-Whitney splits, t, Shapiro-Wilk and Levene match"))
}

// 12
fn ada_ece_reference() -> Outcome {
    let zero = ada_ece(&[1.0; 30], &[true; 30], DEFAULT_BINS).map_err(|e| e.to_string())?;
    check(zero == 0.0, format!("confident correct input gives {zero}"))?;
    for (bins, want) in ece_fixture::ECE_EXPECTED {
        let got = ada_ece(&ece_fixture::ECE_CONF, &ece_fixture::ECE_CORRECT, bins).map_err(|e| e.to_string())?;
        check((got - want).abs() <= 1e-12, format!("{bins} bins: {got} vs {want}"))?;
    }
    Ok("30-sample fixture matches for 15, 4 and 7 bins".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("outcome enumeration", outcome_enumeration),
        ("success probability vs Monte Carlo", success_vs_monte_carlo),
        ("binary search equals scan", binary_equals_scan),
        ("Krippendorff alpha", krippendorff_alpha),
        ("gradient check", gradient_check),
        ("PGD attack", pgd_attack_lowers_confidence),
        ("focal and interpolated losses", loss_identities),
        ("metric oracle equivalence", metric_oracle),
        ("IG completeness", ig_completeness),
        ("end-to-end determinism", end_to_end_determinism),
        ("statistical tests", statistical_tests),
        ("AdaECE", ada_ece_reference),
    ];
    let previous = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took:.1?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{took:.1?}]", i + 1);
            }
        }
    }
    std::panic::set_hook(previous);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
