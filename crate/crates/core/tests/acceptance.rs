//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test --test acceptance`. The horizon-4 tiger runs take
//! minutes (tiger-b) to hours (tiger-a); they run only with
//! `--include-ignored` (or `--ignored`) after `--`, or with `MAASTAR_LONG=1`.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{all_vectors, completion_at, joint_histories, naive_value, random_models};
use maastar::cli::published;
use maastar::evaluation::{completion_value, evaluate, Completion};
use maastar::heuristics::{build_table, heuristic_h, mdp_values, recursive_values, HeuristicKind};
use maastar::model::{builtin, parse_model, serialize_model, DecPomdp, StateDistribution};
use maastar::policy::{ObservationHistory, PolicyVector};
use maastar::search::{anytime_run, brute_force, maa_star, Options, SearchResult};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tolerance against published two-decimal values.
const PUBLISHED_TOLERANCE: f64 = 0.01;
/// Tolerance for exact-value identities.
const EXACT_TOLERANCE: f64 = 1e-9;
const SHORT_RUN_LIMIT: Duration = Duration::from_secs(60);
const CHANNEL_T4_LIMIT: Duration = Duration::from_secs(15 * 60);
const ORACLE_LIMIT: Duration = Duration::from_secs(5 * 60);
const RANDOM_MODELS: usize = 50;
const RANDOM_SEED: u64 = 0x5eed_0001;
const FUZZ_CASES: usize = 1200;
const FUZZ_SEED: u64 = 0x5eed_0008;
/// First incumbent must appear within this fraction of all evaluations.
const FIRST_INCUMBENT_FRACTION: f64 = 0.05;
/// Largest mdp-heuristic count allowed on channel T=3, as a fraction of the
/// brute-force pair count.
const MDP_COUNT_FRACTION: f64 = 0.20;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solve(model: &DecPomdp, kind: HeuristicKind, horizon: usize, weight: f64) -> SearchResult {
    let table = build_table(model, kind, horizon).unwrap();
    maa_star(model, &Options::new(horizon).with_weight(weight), &table).unwrap()
}

const VALUE_CONFIGS: [(&str, usize, f64); 7] = [
    ("tiger-a", 2, -4.00),
    ("tiger-a", 3, 5.19),
    ("tiger-b", 2, 20.00),
    ("tiger-b", 3, 30.00),
    ("channel", 2, 2.00),
    ("channel", 3, 2.99),
    ("channel", 4, 3.89),
];

fn optimal_values(configs: &[(&str, usize, f64)], limit_for: impl Fn(usize) -> Duration) -> Outcome {
    let mut parts = Vec::new();
    for &(name, horizon, expected) in configs {
        let model = builtin(name).unwrap();
        for kind in [HeuristicKind::Mdp, HeuristicKind::Recursive] {
            let start = Instant::now();
            let r = solve(&model, kind, horizon, 1.0);
            let elapsed = start.elapsed();
            check(r.proven_optimal, || format!("{name} T={horizon} {kind}: not proven"))?;
            check((r.value - expected).abs() <= PUBLISHED_TOLERANCE, || {
                format!("{name} T={horizon} {kind}: value {:.4}, expected {expected:.2}", r.value)
            })?;
            check(elapsed <= limit_for(horizon), || format!("{name} T={horizon} {kind}: took {elapsed:?}"))?;
            parts.push(format!("{name}/{horizon}/{kind}={:.2} ({:.2}s)", r.value, elapsed.as_secs_f64()));
        }
    }
    Ok(parts.join(", "))
}

fn criterion_1() -> Outcome {
    optimal_values(&VALUE_CONFIGS, |h| if h == 4 { CHANNEL_T4_LIMIT } else { SHORT_RUN_LIMIT })
}

fn criterion_1_tiger_b() -> Outcome {
    optimal_values(&[("tiger-b", 4, 40.00)], |_| Duration::MAX)
}

/// About 3.8e10 evaluations per heuristic: 872 depth-3 vectors have a bound
/// above the optimum, and each has 3^16 children.
fn criterion_1_tiger_a() -> Outcome {
    optimal_values(&[("tiger-a", 4, 4.80)], |_| Duration::MAX)
}

fn criterion_2() -> Outcome {
    let m = builtin("channel").unwrap();
    let mdp = solve(&m, HeuristicKind::Mdp, 3, 1.0).stats.evaluated_count;
    let rec = solve(&m, HeuristicKind::Recursive, 3, 1.0).stats.evaluated_count;
    let pairs = brute_force(&m, 3).unwrap().enumerated_count;
    check(pairs == 16_384, || format!("brute force enumerated {pairs} pairs"))?;
    check(rec <= mdp, || format!("recursive {rec} > mdp {mdp}"))?;
    check((mdp as f64) < MDP_COUNT_FRACTION * pairs as f64, || format!("mdp {mdp} not below 20% of {pairs}"))?;
    let pub_mdp = published::lookup("channel", HeuristicKind::Mdp, 3).unwrap().evaluated;
    let pub_rec = published::lookup("channel", HeuristicKind::Recursive, 3).unwrap().evaluated;
    Ok(format!("channel T=3 evaluated: recursive {rec} <= mdp {mdp} < 20% of {pairs} (published {pub_rec} / {pub_mdp})"))
}

fn oracle_case(model: &DecPomdp, horizon: usize, label: &str) -> Result<usize, String> {
    let exact = brute_force(model, horizon).map_err(|e| e.to_string())?.value;
    let mut runs = 0;
    for kind in [HeuristicKind::Mdp, HeuristicKind::Recursive] {
        let table = build_table(model, kind, horizon).unwrap();
        for w in [0.5, 0.8, 1.0] {
            let r = maa_star(model, &Options::new(horizon).with_weight(w), &table).unwrap();
            check(r.proven_optimal && (r.value - exact).abs() <= EXACT_TOLERANCE, || {
                format!("{label} T={horizon} {kind} w={w}: {} vs brute force {exact}", r.value)
            })?;
            let v = r.vector.unwrap();
            check((evaluate(model, &v) - r.value).abs() <= EXACT_TOLERANCE, || {
                format!("{label} T={horizon} {kind} w={w}: returned vector does not evaluate to the value")
            })?;
            runs += 1;
        }
    }
    Ok(runs)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    for name in maastar::model::BUILTIN_NAMES {
        runs += oracle_case(&builtin(name).unwrap(), 2, name)?;
    }
    runs += oracle_case(&builtin("channel").unwrap(), 3, "channel")?;
    for (i, m) in random_models(RANDOM_SEED, RANDOM_MODELS).iter().enumerate() {
        for horizon in 1..=3 {
            runs += oracle_case(m, horizon, &format!("random #{i}"))?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed <= ORACLE_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{runs} searches agree with brute force within 1e-9 ({:.1}s)", elapsed.as_secs_f64()))
}

fn criterion_4() -> Outcome {
    let mut prefixes = 0;
    let mut rows = 0;
    for (i, m) in random_models(RANDOM_SEED, RANDOM_MODELS).iter().enumerate() {
        for horizon in 2..=3 {
            let tables = [mdp_values(m, horizon), recursive_values(m, horizon, None).unwrap()];
            let mut best: HashMap<PolicyVector, f64> = HashMap::new();
            for v in all_vectors(m, horizon) {
                let value = evaluate(m, &v);
                for t in 1..horizon {
                    let e = best.entry(v.prefix(t)).or_insert(f64::NEG_INFINITY);
                    *e = e.max(value);
                }
            }
            for (prefix, best_full) in &best {
                let best_completion = best_full - evaluate(m, prefix);
                for table in &tables {
                    let h = heuristic_h(m, prefix, table, horizon).unwrap();
                    check(h >= best_completion - EXACT_TOLERANCE, || {
                        format!("random #{i} T={horizon} {}: H={h} below completion {best_completion}", table.kind())
                    })?;
                }
                prefixes += 1;
            }
        }
        let mdp = mdp_values(m, 3);
        let rec = recursive_values(m, 4, None).unwrap();
        for k in 1..=3 {
            for s in 0..m.n_states() {
                let point = m.with_start(StateDistribution::point_mass(m.n_states(), s));
                let exact = brute_force(&point, k).unwrap().value;
                let (hm, hr) = (mdp.row(k).unwrap()[s], rec.row(k).unwrap()[s]);
                check(hm >= exact - EXACT_TOLERANCE, || format!("random #{i}: h_mdp^{k}({s}) = {hm} < {exact}"))?;
                check((hr - exact).abs() <= EXACT_TOLERANCE, || {
                    format!("random #{i}: recursive h^{k}({s}) = {hr} != {exact}")
                })?;
                rows += 1;
            }
        }
    }
    Ok(format!("{prefixes} prefixes bounded by both tables; {rows} table entries checked against point-mass optima"))
}

/// `V(full) = V(prefix) + sum over histories of P(θ) V_θ(completion at θ)`.
fn decomposition_holds(m: &DecPomdp, full: &PolicyVector, t: usize) -> Result<(), String> {
    let prefix = full.prefix(t);
    let mut rest = 0.0;
    for h in joint_histories(m, full, t) {
        let p = h.probability();
        if p > 0.0 {
            rest += p * naive_value(&m.with_start(h.belief()), &completion_at(m, full, &h.histories));
        }
    }
    let lhs = naive_value(m, full);
    let rhs = naive_value(m, &prefix) + rest;
    check((lhs - rhs).abs() <= EXACT_TOLERANCE, || format!("t={t}: {lhs} != {rhs}"))?;

    let trees = (0..m.n_agents())
        .map(|i| {
            let k = m.n_observations(i);
            ObservationHistory::all(i, k, t)
                .map(|h| {
                    let mut rank = h.rank(k).unwrap();
                    let mut seq = vec![0; t];
                    for slot in seq.iter_mut().rev() {
                        *slot = rank % k;
                        rank /= k;
                    }
                    common::subtree(m, full.tree(i), &seq)
                })
                .collect()
        })
        .collect();
    let completion = Completion::new(full.depth() - t, trees).unwrap();
    let lib = completion_value(m, &prefix, &completion).unwrap();
    check((lib - rest).abs() <= EXACT_TOLERANCE, || format!("t={t}: library completion value {lib} != {rest}"))
}

fn criterion_5() -> Outcome {
    let channel = builtin("channel").unwrap();
    let mut identities = 0;
    for v in all_vectors(&channel, 2) {
        for t in 0..=2 {
            decomposition_holds(&channel, &v, t)?;
            identities += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SEED ^ 5);
    let mut sampled = 0;
    for m in random_models(RANDOM_SEED, RANDOM_MODELS) {
        let vectors = all_vectors(&m, 3);
        for _ in 0..5 {
            let v = vectors.choose(&mut rng).unwrap();
            decomposition_holds(&m, v, rng.random_range(0..=3))?;
            sampled += 1;
        }
    }
    Ok(format!("{identities} exhaustive identities on channel T=2, {sampled} sampled on random models"))
}

fn criterion_6() -> Outcome {
    let m = builtin("channel").unwrap();
    let table = mdp_values(&m, 3);
    let exact = maa_star(&m, &Options::new(3), &table).unwrap().value;
    let mut parts = Vec::new();
    for w in [0.5, 0.8] {
        let mut streamed = Vec::new();
        let r = anytime_run(&m, &Options::new(3).with_weight(w), &table, |imp| streamed.push(imp.value)).unwrap();
        let trace = &r.stats.incumbent_trace;
        check(!trace.is_empty(), || format!("w={w}: empty trace"))?;
        check(trace.windows(2).all(|p| p[0].value < p[1].value), || format!("w={w}: trace not increasing"))?;
        check(streamed == trace.iter().map(|p| p.value).collect::<Vec<_>>(), || format!("w={w}: callback missed"))?;
        check(r.value == exact, || format!("w={w}: final {} != unweighted {exact}", r.value))?;
        let first = trace[0].evaluated;
        let total = r.stats.evaluated_count;
        check(first as f64 <= FIRST_INCUMBENT_FRACTION * total as f64, || {
            format!("w={w}: first incumbent at {first} of {total}")
        })?;
        parts.push(format!("w={w}: {} improvements, first at {first}/{total}", trace.len()));
    }
    Ok(parts.join("; "))
}

fn bench_csv(dir: &std::path::Path, run: usize) -> Vec<u8> {
    let path = dir.join(format!("run{run}.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_maastar"))
        .args(["bench", "--problem", "tiger-a,tiger-b", "--horizons", "2,3", "--heuristic", "mdp,recursive"])
        .args(["--compare-paper", "--no-timing", "--csv", path.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let mut bytes = std::fs::read(&path).unwrap();
    let path = dir.join(format!("run{run}-channel.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_maastar"))
        .args(["bench", "--problem", "channel", "--horizons", "2,3,4", "--heuristic", "mdp,recursive"])
        .args(["--compare-paper", "--no-timing", "--csv", path.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    bytes.extend(std::fs::read(&path).unwrap());
    bytes
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let a = bench_csv(dir.path(), 1);
    let b = bench_csv(dir.path(), 2);
    check(a == b, || "CSV reports differ between runs".into())?;
    let rows = a.iter().filter(|&&c| c == b'\n').count() - 2;
    Ok(format!("{rows} report rows byte-identical across two runs ({} bytes)", a.len()))
}

const FUZZ_ALPHABET: &[u8] = b":*0123456789.-+eE \t\n#abcdefgnorstuvwxyTORS";
const FUZZ_NUMBERS: &[&str] = &["-0.5", "1.5", "nan", "inf", "1e999", "0", "1", "0.25", "abc", "-", "."];

fn mutate(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut s = text.to_string();
    for _ in 0..rng.random_range(1..=3) {
        let mut lines: Vec<String> = s.lines().map(str::to_string).collect();
        if lines.is_empty() {
            lines.push(String::new());
        }
        let li = rng.random_range(0..lines.len());
        match rng.random_range(0..8) {
            0 if !s.is_empty() => {
                let mut idx = rng.random_range(0..s.len());
                while !s.is_char_boundary(idx) {
                    idx -= 1;
                }
                s.remove(idx);
                continue;
            }
            1 => {
                let mut idx = rng.random_range(0..=s.len());
                while !s.is_char_boundary(idx) {
                    idx -= 1;
                }
                s.insert(idx, *FUZZ_ALPHABET.choose(rng).unwrap() as char);
                continue;
            }
            2 => {
                lines.remove(li);
            }
            3 => {
                let dup = lines[li].clone();
                lines.insert(li, dup);
            }
            4 => {
                let lj = rng.random_range(0..lines.len());
                lines.swap(li, lj);
            }
            5 => {
                let words: Vec<&str> = lines[li].split(' ').collect();
                let wi = rng.random_range(0..words.len());
                let mut words: Vec<String> = words.iter().map(|w| w.to_string()).collect();
                words[wi] = FUZZ_NUMBERS.choose(rng).unwrap().to_string();
                lines[li] = words.join(" ");
            }
            6 => {
                lines[li] = lines[li].replacen(':', "", 1);
            }
            _ => {
                let cut = rng.random_range(0..=lines.len());
                lines.truncate(cut);
            }
        }
        s = lines.join("\n");
    }
    s
}

fn criterion_8() -> Outcome {
    let mut seeds: Vec<String> = maastar::model::BUILTIN_NAMES.iter().map(|n| serialize_model(&builtin(n).unwrap())).collect();
    seeds.push(include_str!("../models/tiger-a.model").to_string());
    seeds.extend(random_models(FUZZ_SEED, 4).iter().map(serialize_model));
    let mut rng = ChaCha8Rng::seed_from_u64(FUZZ_SEED);
    let (mut accepted, mut rejected) = (0, 0);
    for case in 0..FUZZ_CASES {
        let text = mutate(seeds.choose(&mut rng).unwrap(), &mut rng);
        let parsed = catch_unwind(AssertUnwindSafe(|| parse_model(&text)))
            .map_err(|_| format!("parser panicked on case {case}:\n{text}"))?;
        match parsed {
            Ok(model) => {
                check(model.validate().is_ok(), || format!("case {case} accepted but fails validation"))?;
                accepted += 1;
            }
            Err(e) => {
                let lines = text.lines().count().max(1);
                check(e.line >= 1 && e.line <= lines + 1 && e.column >= 1, || {
                    format!("case {case}: rejection without a usable location: {e}")
                })?;
                rejected += 1;
            }
        }
    }
    Ok(format!("{FUZZ_CASES} mutated files: {accepted} accepted and valid, {rejected} rejected with locations"))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let long = args.iter().any(|a| a == "--ignored" || a == "--include-ignored")
        || std::env::var("MAASTAR_LONG").is_ok_and(|v| v == "1");
    // `cargo test -- --list` and name filters come from the default harness;
    // this suite always runs as a whole.
    if args.iter().any(|a| a == "--list") {
        return;
    }

    let mut criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 optimal values", criterion_1),
        ("2 heuristic comparison", criterion_2),
        ("3 oracle equivalence", criterion_3),
        ("4 admissibility", criterion_4),
        ("5 decomposition", criterion_5),
        ("6 anytime behavior", criterion_6),
        ("7 determinism", criterion_7),
        ("8 format robustness", criterion_8),
    ];
    if long {
        criteria.push(("1 optimal values, tiger-b T=4", criterion_1_tiger_b));
        criteria.push(("1 optimal values, tiger-a T=4", criterion_1_tiger_a));
    }
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if !long {
        println!("SKIP criterion 1 optimal values, tiger T=4 (opt-in: MAASTAR_LONG=1 or -- --include-ignored; hours)");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
