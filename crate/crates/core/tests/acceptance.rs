//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use idfd::bank::MemoryBank;
use idfd::config::RunConfig;
use idfd::encoder::{backward, encode, forward, EncoderParams};
use idfd::experiment::{run_experiment, RunReport};
use idfd::linalg::{l2_normalize_rows, Matrix};
use idfd::losses::{
    combined_loss, dlf_dz, dlf_dz_column, dlfo_dz, loss_fd, loss_fo, loss_id, FeatureLossConfig,
    InstanceLossConfig, LossMode, LossReport,
};
use idfd::metrics::{acc, ari, nmi, Partition};
use idfd::rng::{shuffled_indices, SeededRng};
use idfd::spectral::{build_graph, dlsp_dtheta, loss_sp, loss_sp_pairwise, spectral_cluster, spectral_cluster_graph, SimilarityGraph};
use idfd::temperature::tau_gap;

// Pinned tolerances.
const FD_EPS: f64 = 1e-5;
const FD_MAX_REL: f64 = 1e-4;
/// Denominator floor for relative error, so near-zero gradients are judged on
/// absolute error.
const FD_REL_FLOOR: f64 = 1e-3;
const FD_MIN_INSTANCES: usize = 20;
const FD_BUDGET: Duration = Duration::from_secs(30);
const GRID_POINTS: usize = 1001;
const THETA_POINTS: usize = 2001;
const SIGN_SLACK: f64 = 1e-12;
const TRACE_REL: f64 = 1e-8;
const TRACE_INSTANCES: usize = 50;
const GAP_N: usize = 3600;
const GAP_K: usize = 10;
const GAP_TAUS: [f64; 7] = [0.07, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];
const GAP_SMALL_AT_5: f64 = 0.05;
const GAP_LARGE_AT_007: f64 = 0.5;
const GAP_BUDGET: Duration = Duration::from_secs(10);
const METRIC_PAIRS: usize = 100;
const BENCH_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const BENCH_MIN_ACC: f64 = 0.90;
const BENCH_BUDGET_PER_SEED: Duration = Duration::from_secs(600);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_REL_FLOOR)
}

/// Worst relative error between `analytic` and central differences of `f`
/// over every entry of `x`.
fn fd_matrix(f: impl Fn(&Matrix) -> f64, x: &Matrix, analytic: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for idx in 0..x.as_slice().len() {
        let mut plus = x.clone();
        plus.as_mut_slice()[idx] += FD_EPS;
        let mut minus = x.clone();
        minus.as_mut_slice()[idx] -= FD_EPS;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * FD_EPS);
        worst = worst.max(rel_err(analytic.as_slice()[idx], numeric));
    }
    worst
}

fn random_unit(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    l2_normalize_rows(&Matrix::from_fn(rows, cols, |_, _| rng.normal())).unwrap()
}

fn random_bank(n: usize, d: usize, rng: &mut SeededRng) -> MemoryBank {
    MemoryBank::from_rows(random_unit(n, d, rng), 0.5).unwrap()
}

fn distinct_indices(b: usize, n: usize, rng: &mut SeededRng) -> Vec<usize> {
    shuffled_indices(n, rng).into_iter().take(b).collect()
}

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut record = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    let mut instances = 0;
    for seed in 0..24u64 {
        let mut rng = SeededRng::new(1000 + seed);
        let b = 2 + rng.below_inclusive(4);
        let d = 2 + rng.below_inclusive(4);
        let n = b + rng.below_inclusive(6);
        let tau = [0.1, 0.5, 1.0, 2.0][seed as usize % 4];
        let tau2 = [0.5, 1.0, 2.0, 5.0][(seed as usize / 4) % 4];
        let alpha = 0.5 + rng.uniform() * 2.0;
        let bank = random_bank(n, d, &mut rng);
        let idx = distinct_indices(b, n, &mut rng);
        // Unnormalized rows exercise the feature normalization as well.
        let x = Matrix::from_fn(b, d, |_, _| rng.normal());
        let ci = InstanceLossConfig::new(tau).unwrap();
        let cf = FeatureLossConfig::new(tau2, alpha).unwrap();

        let li = loss_id(&x, &bank, &idx, tau).unwrap();
        record("L_I", fd_matrix(|m| loss_id(m, &bank, &idx, tau).unwrap().value, &x, &li.grad));
        let lfo = loss_fo(&x).unwrap();
        record("L_FO", fd_matrix(|m| loss_fo(m).unwrap().value, &x, &lfo.grad));
        let lf = loss_fd(&x, tau2).unwrap();
        record("L_F", fd_matrix(|m| loss_fd(m, tau2).unwrap().value, &x, &lf.grad));
        for (name, mode) in [("L_IDFD", LossMode::Idfd), ("L_IDFO", LossMode::Idfo)] {
            let r = combined_loss(&x, &bank, &idx, &ci, &cf, mode).unwrap();
            record(name, fd_matrix(|m| combined_loss(m, &bank, &idx, &ci, &cf, mode).unwrap().value, &x, &r.grad));
        }
        record("encoder", encoder_pipeline_error(seed, &ci, &cf));
        instances += 1;
    }
    let elapsed = start.elapsed();
    let max = worst.values().copied().fold(0.0, f64::max);
    let parts: Vec<String> = worst.iter().map(|(k, v)| format!("{k}={v:.1e}")).collect();
    outcome(
        instances >= FD_MIN_INSTANCES && max <= FD_MAX_REL && elapsed < FD_BUDGET,
        format!(
            "{instances} instances, max rel err {max:.2e} <= {FD_MAX_REL:e} ({}), {:.1}s < {}s",
            parts.join(" "),
            elapsed.as_secs_f64(),
            FD_BUDGET.as_secs()
        ),
    )
}

/// Two-layer encoder, B=4, d=4, n=8: parameter gradients of `L_IDFD` or
/// `L_IDFO` against central differences.
fn encoder_pipeline_error(seed: u64, ci: &InstanceLossConfig, cf: &FeatureLossConfig) -> f64 {
    let (b, p, h, d, n) = (4, 5, 16, 4, 8);
    let mut rng = SeededRng::new(2000 + seed);
    let params = EncoderParams::init(&[p, h, d], &mut rng).unwrap();
    let x = Matrix::from_fn(b, p, |_, _| rng.normal());
    let bank = random_bank(n, d, &mut rng);
    let idx = distinct_indices(b, n, &mut rng);
    let mode = if seed.is_multiple_of(2) { LossMode::Idfd } else { LossMode::Idfo };
    let objective = |pr: &EncoderParams| -> f64 {
        let v = encode(pr, &x).unwrap();
        combined_loss(&v, &bank, &idx, ci, cf, mode).unwrap().value
    };
    let (v, cache) = forward(&params, &x).unwrap();
    let report: LossReport = combined_loss(&v, &bank, &idx, ci, cf, mode).unwrap();
    let grads = backward(&params, &cache, &report.grad).unwrap().flat();
    let mut worst = 0.0_f64;
    for (i, &g) in grads.iter().enumerate() {
        let mut plus = params.clone();
        *plus.param_mut(i) += FD_EPS;
        let mut minus = params.clone();
        *minus.param_mut(i) -= FD_EPS;
        let numeric = (objective(&plus) - objective(&minus)) / (2.0 * FD_EPS);
        worst = worst.max(rel_err(g, numeric));
    }
    worst
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 })
}

fn criterion_bounds() -> Outcome {
    let mut ok = true;
    let mut lf_min = f64::INFINITY;
    for tau2 in [0.1, 0.5, 1.0, 2.0, 5.0] {
        for z in grid(-1.0, 1.0, GRID_POINTS) {
            let g = dlf_dz(z, false, tau2).unwrap();
            ok &= (0.0..=1.0 / tau2).contains(&g);
            lf_min = lf_min.min(g);
        }
    }
    let mut fo_range = (f64::INFINITY, f64::NEG_INFINITY);
    for z in grid(-1.0, 1.0, GRID_POINTS) {
        let g = dlfo_dz(z, false).unwrap();
        ok &= (-2.0..=2.0).contains(&g);
        fo_range = (fo_range.0.min(g), fo_range.1.max(g));
    }
    // Full similarity columns: every off-diagonal entry.
    let mut rng = SeededRng::new(7);
    for _ in 0..200 {
        let d = 2 + rng.below_inclusive(6);
        let f = random_unit(d, 8, &mut rng);
        let l = rng.below_inclusive(d - 1);
        let column: Vec<f64> = (0..d).map(|j| idfd::linalg::dot(f.row(j), f.row(l))).collect();
        let tau2 = 0.1 + rng.uniform() * 5.0;
        for j in (0..d).filter(|&j| j != l) {
            let g = dlf_dz_column(&column, j, l, tau2).unwrap();
            ok &= (0.0..=1.0 / tau2).contains(&g);
            lf_min = lf_min.min(g);
        }
    }
    outcome(
        ok && lf_min >= 0.0,
        format!(
            "{GRID_POINTS}-point grid: dLF/dz in [0, 1/tau2] (min {lf_min:.3e}), dLFO/dz in [{:.3}, {:.3}]",
            fo_range.0, fo_range.1
        ),
    )
}

fn criterion_sign() -> Outcome {
    let mut ok = true;
    let mut mins = Vec::new();
    for tau in [2.0, 3.0, 5.0, 10.0] {
        let min = grid(0.0, std::f64::consts::PI, THETA_POINTS)
            .map(|t| dlsp_dtheta(t, tau).unwrap())
            .fold(f64::INFINITY, f64::min);
        ok &= min >= -SIGN_SLACK;
        mins.push(format!("tau={tau}: {min:.2e}"));
    }
    let low = grid(0.0, std::f64::consts::PI, THETA_POINTS)
        .map(|t| dlsp_dtheta(t, 0.07).unwrap())
        .fold(f64::INFINITY, f64::min);
    ok &= low < 0.0;
    outcome(ok, format!("min over theta {} ; tau=0.07 min {low:.2e} < 0", mins.join(", ")))
}

fn criterion_trace() -> Outcome {
    let mut rng = SeededRng::new(11);
    let mut worst = 0.0_f64;
    for case in 0..TRACE_INSTANCES {
        let n = 2 + rng.below_inclusive(28);
        let k = 1 + rng.below_inclusive(4);
        let graph = if case % 2 == 0 {
            let dim = 2 + rng.below_inclusive(6);
            build_graph(&random_unit(n, dim, &mut rng), 0.1 + rng.uniform() * 5.0).unwrap()
        } else {
            let mut w = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let x = rng.uniform() * 3.0;
                    w[(i, j)] = x;
                    w[(j, i)] = x;
                }
            }
            SimilarityGraph::from_weights(w).unwrap()
        };
        let f = Matrix::from_fn(n, k, |_, _| rng.normal());
        let a = loss_sp(&graph, &f).unwrap();
        let b = loss_sp_pairwise(&graph, &f).unwrap();
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
    }
    outcome(worst <= TRACE_REL, format!("{TRACE_INSTANCES} instances, n <= 30, max rel diff {worst:.2e} <= {TRACE_REL:e}"))
}

fn criterion_gap() -> Outcome {
    let start = Instant::now();
    let gaps: Vec<f64> = GAP_TAUS.iter().map(|&t| tau_gap(GAP_N, GAP_K, t).unwrap()).collect();
    let elapsed = start.elapsed();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let at = |tau: f64| gaps[GAP_TAUS.iter().position(|&t| t == tau).unwrap()];
    let (g5, g007) = (at(5.0), at(0.07));
    let listing: Vec<String> = GAP_TAUS.iter().zip(&gaps).map(|(t, g)| format!("{t}:{g:.3e}")).collect();
    outcome(
        monotone && g5 < GAP_SMALL_AT_5 && g007 > GAP_LARGE_AT_007 && elapsed < GAP_BUDGET,
        format!(
            "non-increasing={monotone}; gap(5)={g5:.3e} < {GAP_SMALL_AT_5}; gap(0.07)={g007:.6} > {GAP_LARGE_AT_007}; [{}]; {:.2}s",
            listing.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force_acc(y: &[usize], p: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|perm| y.iter().zip(p).filter(|(&a, &b)| perm[b] == a).count())
        .max()
        .unwrap() as f64
        / y.len() as f64
}

fn criterion_metrics() -> Outcome {
    let mut rng = SeededRng::new(13);
    let mut acc_ok = true;
    for _ in 0..METRIC_PAIRS {
        let k = 1 + rng.below_inclusive(5);
        let n = 1 + rng.below_inclusive(40);
        let y: Vec<usize> = (0..n).map(|_| rng.below_inclusive(k - 1)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.below_inclusive(k - 1)).collect();
        let fast = acc(&Partition::new(y.clone(), k).unwrap(), &Partition::new(p.clone(), k).unwrap()).unwrap();
        acc_ok &= (fast - brute_force_acc(&y, &p, k)).abs() < 1e-12;
    }

    let part = |v: &[usize]| Partition::from_labels(v).unwrap();
    let y = part(&[0, 0, 1, 1]);
    let flipped = ari(&y, &part(&[0, 1, 0, 1])).unwrap();
    // Contingency [[2,1,0],[0,1,2]]: index 2, row pairs 6, column pairs 3, 15 total.
    let y6 = part(&[0, 0, 0, 1, 1, 1]);
    let p6 = part(&[0, 0, 1, 1, 2, 2]);
    let fixtures = [
        ("ari flipped", flipped, -0.5),
        ("ari identical", ari(&y, &y).unwrap(), 1.0),
        ("ari split", ari(&y, &part(&[0, 0, 1, 2])).unwrap(), 4.0 / 7.0),
        ("ari 2x3", ari(&y6, &p6).unwrap(), 8.0 / 33.0),
        ("nmi 2x3", nmi(&y6, &p6).unwrap(), (4.0 / 3.0) * 2f64.ln() / 6f64.ln()),
        ("nmi flipped", nmi(&y, &part(&[0, 1, 0, 1])).unwrap(), 0.0),
        ("nmi relabelled", nmi(&y, &part(&[1, 1, 0, 0])).unwrap(), 1.0),
    ];
    let mut fixtures_ok = flipped == -0.5;
    let mut bad = Vec::new();
    for (name, got, want) in fixtures {
        if (got - want).abs() > 1e-12 {
            fixtures_ok = false;
            bad.push(format!("{name}: {got} != {want}"));
        }
    }
    outcome(
        acc_ok && fixtures_ok,
        format!(
            "ACC matches brute force on {METRIC_PAIRS} pairs: {acc_ok}; ARI([0,0,1,1],[0,1,0,1]) = {flipped}; fixtures {}",
            if bad.is_empty() { "ok".to_string() } else { bad.join("; ") }
        ),
    )
}

fn criterion_spectral() -> Outcome {
    let mut rng = SeededRng::new(17);
    let mut results = Vec::new();
    for k in [2, 3, 4] {
        // Unequal blocks, shuffled order, weak cross-block links.
        let sizes: Vec<usize> = (0..k).map(|c| 4 + 2 * c).collect();
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        let order = shuffled_indices(labels.len(), &mut rng);
        let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let n = labels.len();
        let w = Matrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 });
        let graph = SimilarityGraph::from_weights(w).unwrap();
        let truth = Partition::from_labels(&labels).unwrap();
        let pred = spectral_cluster_graph(&graph, k, &mut rng, 10).unwrap();
        let block_acc = acc(&truth, &pred).unwrap();

        // The same structure realized by unit representations.
        let dim = 8;
        let centers = random_unit(k, dim, &mut rng);
        let v = l2_normalize_rows(&Matrix::from_fn(n, dim, |i, c| 5.0 * centers[(labels[i], c)] + 0.1 * rng.normal())).unwrap();
        let pred = spectral_cluster(&v, 0.05, k, &mut rng, 10).unwrap();
        let point_acc = acc(&truth, &pred).unwrap();
        results.push((k, block_acc, point_acc));
    }
    let ok = results.iter().all(|&(_, a, b)| a == 1.0 && b == 1.0);
    let parts: Vec<String> = results.iter().map(|(k, a, b)| format!("k={k}: blocks {a}, points {b}")).collect();
    outcome(ok, format!("ACC {}", parts.join(", ")))
}

/// Benchmark runs shared by the end-to-end criteria, keyed by label and seed.
struct Bench {
    reports: BTreeMap<(String, u64), RunReport>,
    seconds: BTreeMap<(String, u64), f64>,
}

impl Bench {
    fn final_acc(&self, label: &str, seed: u64) -> f64 {
        self.reports[&(label.to_string(), seed)].final_scores.expect("labelled benchmark").acc
    }

    fn mean_acc(&self, label: &str) -> f64 {
        BENCH_SEEDS.iter().map(|&s| self.final_acc(label, s)).sum::<f64>() / BENCH_SEEDS.len() as f64
    }

    fn mean_corr(&self, label: &str) -> f64 {
        BENCH_SEEDS
            .iter()
            .map(|&s| self.reports[&(label.to_string(), s)].mean_abs_feature_correlation)
            .sum::<f64>()
            / BENCH_SEEDS.len() as f64
    }
}

fn bench_config(label: &str, seed: u64, root: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(seed);
    match label {
        "ID" => cfg.mode = LossMode::Id,
        "IDFD" => {}
        other => {
            let (key, value) = other.split_once('=').unwrap();
            cfg.set(key, value).unwrap();
        }
    }
    cfg.out_dir = root.join(format!("{label}-seed{seed}"));
    cfg
}

fn run_bench(root: &Path) -> Bench {
    let labels = ["ID", "IDFD", "tau=0.07", "tau=10", "tau2=0.5", "tau2=5"];
    let jobs: Vec<(String, u64)> = labels
        .iter()
        .flat_map(|l| BENCH_SEEDS.iter().map(move |&s| (l.to_string(), s)))
        .collect();
    let queue = Mutex::new(jobs.into_iter());
    let done = Mutex::new(Vec::new());
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some((label, seed)) = queue.lock().unwrap().next() else { break };
                let cfg = bench_config(&label, seed, root);
                let start = Instant::now();
                let report = run_experiment(&cfg).unwrap_or_else(|e| panic!("{label} seed {seed}: {e}"));
                done.lock().unwrap().push(((label, seed), report, start.elapsed().as_secs_f64()));
            });
        }
    });
    let mut bench = Bench {
        reports: BTreeMap::new(),
        seconds: BTreeMap::new(),
    };
    for (key, report, secs) in done.into_inner().unwrap() {
        bench.seconds.insert(key.clone(), secs);
        bench.reports.insert(key, report);
    }
    bench
}

fn criterion_end_to_end(bench: &Bench) -> Outcome {
    let (id, idfd) = (bench.mean_acc("ID"), bench.mean_acc("IDFD"));
    let worst_seed = BENCH_SEEDS
        .iter()
        .map(|&s| bench.seconds[&("ID".to_string(), s)] + bench.seconds[&("IDFD".to_string(), s)])
        .fold(0.0, f64::max);
    outcome(
        idfd >= id && idfd >= BENCH_MIN_ACC && worst_seed < BENCH_BUDGET_PER_SEED.as_secs_f64(),
        format!(
            "mean final ACC over {} seeds: IDFD {idfd:.4} >= ID {id:.4}, IDFD >= {BENCH_MIN_ACC}; slowest seed {worst_seed:.1}s",
            BENCH_SEEDS.len()
        ),
    )
}

fn criterion_temperature(bench: &Bench) -> Outcome {
    let tau = [("tau=0.07", bench.mean_acc("tau=0.07")), ("tau=1", bench.mean_acc("IDFD")), ("tau=10", bench.mean_acc("tau=10"))];
    let tau2 = [("tau2=0.5", bench.mean_acc("tau2=0.5")), ("tau2=2", bench.mean_acc("IDFD")), ("tau2=5", bench.mean_acc("tau2=5"))];
    let range = |xs: &[(&str, f64)]| {
        let v = xs.iter().map(|x| x.1);
        v.clone().fold(f64::NEG_INFINITY, f64::max) - v.fold(f64::INFINITY, f64::min)
    };
    let best = tau.iter().all(|&(_, a)| tau[1].1 >= a);
    let (r1, r2) = (range(&tau), range(&tau2));
    let show = |xs: &[(&str, f64)]| xs.iter().map(|(n, a)| format!("{n}:{a:.4}")).collect::<Vec<_>>().join(" ");
    outcome(
        best && r2 <= 0.5 * r1,
        format!("tau sweep [{}] best at tau=1: {best}; tau2 sweep [{}] range {r2:.4} <= half of {r1:.4}", show(&tau), show(&tau2)),
    )
}

fn criterion_correlation(bench: &Bench) -> Outcome {
    let (id, idfd) = (bench.mean_corr("ID"), bench.mean_corr("IDFD"));
    outcome(idfd < id, format!("mean |off-diagonal correlation| IDFD {idfd:.4} < ID {id:.4}"))
}

fn criterion_determinism(root: &Path) -> Outcome {
    let mut cfg = bench_config("IDFD", BENCH_SEEDS[0], root);
    let first = cfg.out_dir.clone();
    cfg.out_dir = root.join("rerun");
    run_experiment(&cfg).unwrap();
    let mut same = Vec::new();
    let mut ok = true;
    for file in ["history.csv", "correlation.csv", "embeddings.csv", "assignments.csv"] {
        let a = std::fs::read(first.join(file)).unwrap();
        let b = std::fs::read(cfg.out_dir.join(file)).unwrap();
        ok &= a == b;
        same.push(format!("{file}:{}", if a == b { "identical" } else { "DIFFERENT" }));
    }
    outcome(ok, format!("rerun of IDFD seed {}: {}", BENCH_SEEDS[0], same.join(" ")))
}

fn main() {
    let mut lines: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, o: Outcome| {
        println!("{} [{id:>2}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        lines.push((id, name, o));
    };
    report(1, "gradient suite", criterion_gradients());
    report(2, "similarity derivative bounds", criterion_bounds());
    report(3, "spectral derivative sign", criterion_sign());
    report(4, "trace equals pairwise form", criterion_trace());
    report(5, "temperature gap", criterion_gap());
    report(6, "metric oracles", criterion_metrics());
    report(7, "spectral block recovery", criterion_spectral());

    let root = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let bench = run_bench(root.path());
    println!("     benchmark: {} runs in {:.1}s", bench.reports.len(), start.elapsed().as_secs_f64());
    report(8, "ID vs IDFD end to end", criterion_end_to_end(&bench));
    report(9, "temperature sweeps", criterion_temperature(&bench));
    report(10, "feature correlation", criterion_correlation(&bench));
    report(11, "determinism", criterion_determinism(root.path()));

    let failed: Vec<String> = lines.iter().filter(|l| !l.2.pass).map(|l| format!("{} ({})", l.0, l.1)).collect();
    println!("acceptance: {} passed, {} failed", lines.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
