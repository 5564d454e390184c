//! Acceptance suite: one test per shipping criterion, each printing a
//! single `[acceptance] criterion N <name>: PASS` line (run with
//! `--nocapture` to see them). Every numeric check is verified against
//! an oracle computed independently inside this file — sorted order
//! statistics, brute-force count tables, direct bigram counting — never
//! against the library's own intermediate results.

// `check!` negates its condition, so a NaN comparison (false either way)
// fails the criterion instead of slipping through a rewritten compare.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use kpilens::action::{ActionSpace, ActionSymbol, ActionValue};
use kpilens::bench::{run_bench, BenchConfig};
use kpilens::explain::mi::mutual_information;
use kpilens::explain::{influence_report, kl_divergence};
use kpilens::harness::{run_session, HarnessConfig, SyntheticEnvConfig};
use kpilens::kg::KpiKnowledgeGraph;
use kpilens::pipeline::Pipeline;
use kpilens::snapshot::{load_snapshot, save_snapshot};
use kpilens::symbolizer::linreg_slope;
use kpilens::trace::TraceRecord;
use kpilens::{KpiConfig, KpiSymbolizer, PipelineConfig, Predicate, QuantileSketch, SymbolicState};

fn pass(n: usize, name: &str) {
    println!("[acceptance] criterion {n} {name}: PASS");
}

/// Assert that prints the criterion's FAIL line before panicking, so a
/// red run still reports one line per criterion.
macro_rules! check {
    ($n:expr, $name:expr, $cond:expr, $($msg:tt)+) => {
        if !$cond {
            println!("[acceptance] criterion {} {}: FAIL — {}", $n, $name, format!($($msg)+));
            panic!("criterion {} {} failed: {}", $n, $name, format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------- 1 --

#[test]
fn criterion_1_golden_symbolization() {
    const N: usize = 1;
    const NAME: &str = "golden symbolization";
    let started = Instant::now();

    let config = KpiConfig::named("tput").with_forecast();
    let one_point = |h: f64, target: f64| {
        let mut s = QuantileSketch::new(target).unwrap();
        s.add(h);
        s
    };
    let value_sketches = [7.2, 10.5, 13.8, 18.2]
        .iter()
        .zip(&config.category_boundaries)
        .map(|(h, b)| one_point(*h, b / 100.0))
        .collect();
    let slope_sketches = [-0.85, 0.15]
        .iter()
        .zip(&config.trend_boundaries)
        .map(|(h, b)| one_point(*h, b / 100.0))
        .collect();
    let mut sym = KpiSymbolizer::from_parts(
        config.clone(),
        value_sketches,
        slope_sketches,
        Some(12.3),
        8,
    )
    .unwrap();

    let forecast = [14.9, 13.2, 11.8, 9.7];
    let state = sym.observe(15.7, Some(&forecast)).unwrap();

    check!(
        N,
        NAME,
        state.predicate == Predicate::Inc,
        "predicate {:?}, expected Inc",
        state.predicate
    );
    check!(
        N,
        NAME,
        state.category == 3,
        "category index {}, expected 3 (High)",
        state.category
    );
    check!(
        N,
        NAME,
        state.trend == Some(0),
        "trend index {:?}, expected Some(0) (Dropping)",
        state.trend
    );
    let rendered = state.render(&config);
    check!(
        N,
        NAME,
        rendered == "inc(tput, High, Dropping)",
        "rendered {rendered:?}"
    );
    let slope = linreg_slope(&forecast).unwrap();
    check!(
        N,
        NAME,
        (slope - (-1.70)).abs() <= 0.05,
        "slope {slope}, expected within ±0.05 of -1.70"
    );
    let elapsed = started.elapsed();
    check!(N, NAME, elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(N, NAME);
}

// ---------------------------------------------------------------- 2 --

#[test]
fn criterion_2_knowledge_graph_bound() {
    const N: usize = 2;
    const NAME: &str = "knowledge graph node bound";
    let started = Instant::now();

    let config = PipelineConfig::from_json_str(
        r#"{
            "kpis": [
                {"name": "a", "has_forecast": true},
                {"name": "b", "has_forecast": true},
                {"name": "c"}
            ],
            "forecast_horizon": 3,
            "action_space": {"kind": "ordered", "name": "act", "values": [100.0, 200.0, 300.0, 400.0]}
        }"#,
    )
    .unwrap();
    let mut pipeline = Pipeline::new(config).unwrap();
    let ladder = [100.0, 200.0, 300.0, 400.0];
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_816);
    let mut values = [50.0f64, 50.0, 50.0];

    for t in 0..10_000i64 {
        for v in values.iter_mut() {
            *v = (*v + rng.gen_range(-8.0..=8.0)).clamp(0.0, 100.0);
        }
        let forecast = |rng: &mut ChaCha8Rng, v: f64| {
            let mut f = Vec::with_capacity(3);
            let mut x = v;
            for _ in 0..3 {
                x = (x + rng.gen_range(-8.0..=8.0)).clamp(0.0, 100.0);
                f.push(x);
            }
            f
        };
        let fa = forecast(&mut rng, values[0]);
        let fb = forecast(&mut rng, values[1]);
        let record = TraceRecord {
            t,
            kpis: [
                ("a".to_string(), values[0]),
                ("b".to_string(), values[1]),
                ("c".to_string(), values[2]),
            ]
            .into(),
            forecasts: [("a".to_string(), fa), ("b".to_string(), fb)].into(),
            action: ActionValue::Number(ladder[rng.gen_range(0..ladder.len())]),
            reward: rng.gen_range(-1.0..=1.0),
        };
        pipeline.process(&record).unwrap();
    }

    for (kpi, graph) in pipeline.graphs() {
        check!(
            N,
            NAME,
            graph.node_count() <= 45,
            "KPI {kpi} graph has {} nodes, bound is 45",
            graph.node_count()
        );
    }
    // Without a forecast there is no trend component, so the vocabulary
    // is three predicates by five categories.
    assert!(pipeline.graphs()["c"].node_count() <= 15);
    let elapsed = started.elapsed();
    check!(N, NAME, elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(N, NAME);
}

// ---------------------------------------------------------------- 3 --

#[test]
fn criterion_3_quantile_accuracy() {
    const N: usize = 3;
    const NAME: &str = "streaming quantile accuracy";
    let n_samples = 10_000usize;
    let percentiles = [0.2, 0.4, 0.6, 0.8];

    type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> f64>;
    let generators: Vec<(&str, Sampler)> = vec![
        ("uniform", Box::new(|rng| rng.gen_range(0.0..40.0))),
        (
            "normal",
            Box::new(|rng| rng.sample(rand_distr::Normal::new(20.0, 5.0).unwrap())),
        ),
        (
            "lognormal",
            Box::new(|rng| rng.sample(rand_distr::LogNormal::new(0.0, 1.0).unwrap())),
        ),
    ];

    for (dist_name, gen) in &generators {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let samples: Vec<f64> = (0..n_samples).map(|_| gen(&mut rng)).collect();
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

        for &p in &percentiles {
            let mut sketch = QuantileSketch::new(p).unwrap();
            for &v in &samples {
                sketch.add(v);
            }
            let estimate = sketch.query().unwrap();
            // Where the estimate actually sits in the sample, as a
            // fraction — the distribution-free accuracy measure.
            let below = sorted.partition_point(|&x| x <= estimate);
            let actual = below as f64 / n_samples as f64;
            check!(
                N,
                NAME,
                (actual - p).abs() <= 0.02,
                "{dist_name} p{}: estimate {estimate} sits at percentile {:.2}, off by {:.2}pp",
                p * 100.0,
                actual * 100.0,
                (actual - p).abs() * 100.0
            );
        }
    }
    pass(N, NAME);
}

// ---------------------------------------------------------------- 4 --

fn category_action(space: &ActionSpace, label: &str) -> ActionSymbol {
    space
        .symbolize(None, &ActionValue::Label(label.into()))
        .unwrap()
}

fn state_with_category(category: u8) -> SymbolicState {
    SymbolicState {
        predicate: Predicate::Const,
        category,
        trend: None,
    }
}

#[test]
fn criterion_4_kl_and_mi_oracles() {
    const N: usize = 4;
    const NAME: &str = "KL and MI oracles";

    let space = ActionSpace::Categorical {
        name: "act".into(),
        labels: vec!["u".into(), "v".into(), "w".into(), "x".into()],
    };
    let u = category_action(&space, "u");
    let v = category_action(&space, "v");
    let w = category_action(&space, "w");
    let x = category_action(&space, "x");

    // KL({0.8, 0.2} || {0.5, 0.5}) = 0.8 ln 1.6 + 0.2 ln 0.4.
    let p: BTreeMap<ActionSymbol, f64> = [(u.clone(), 0.8), (v.clone(), 0.2)].into();
    let q: BTreeMap<ActionSymbol, f64> = [(u.clone(), 0.5), (v.clone(), 0.5)].into();
    let kl = kl_divergence(&p, &q);
    check!(
        N,
        NAME,
        (kl - 0.1927).abs() <= 1e-3,
        "KL got {kl}, expected 0.1927 ± 1e-3"
    );

    // A deterministic bijection between four uniform states and four
    // actions carries exactly ln 4 nats.
    let actions = [u.clone(), v.clone(), w, x];
    let mut pairs = Vec::new();
    for (i, a) in actions.iter().enumerate() {
        for _ in 0..25 {
            pairs.push((state_with_category(i as u8), a.clone()));
        }
    }
    let mi = mutual_information(&pairs);
    check!(
        N,
        NAME,
        (mi - 4.0f64.ln()).abs() <= 1e-3,
        "deterministic MI got {mi}, expected ln 4 = {}",
        4.0f64.ln()
    );

    // Independent streams carry (almost) nothing.
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let three = [u, v, actions[2].clone()];
    let pairs: Vec<(SymbolicState, ActionSymbol)> = (0..10_000)
        .map(|_| {
            (
                state_with_category(rng.gen_range(0..4)),
                three[rng.gen_range(0..3)].clone(),
            )
        })
        .collect();
    let mi = mutual_information(&pairs);
    check!(
        N,
        NAME,
        mi < 0.05,
        "independent-stream MI got {mi}, expected < 0.05"
    );
    pass(N, NAME);
}

// ---------------------------------------------------------------- 5 --

/// Direct formula on explicit count tables, written independently of the
/// library: normalize per-KPI counts, average the informative
/// conditionals into the baseline, smooth both sides over the union
/// support with epsilon = 1e-9, take sum p ln(p/q), and multiply by the
/// categorical indicator alignment.
fn brute_force_influence(
    counts: &BTreeMap<&str, BTreeMap<&str, u64>>,
    taken: &str,
) -> BTreeMap<String, f64> {
    let mut union: Vec<&str> = counts
        .values()
        .flat_map(|c| c.keys().copied())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    union.sort();

    let normalize = |c: &BTreeMap<&str, u64>| -> BTreeMap<String, f64> {
        let total: u64 = c.values().sum();
        c.iter()
            .map(|(a, n)| (a.to_string(), *n as f64 / total as f64))
            .collect()
    };
    let dists: BTreeMap<&str, BTreeMap<String, f64>> =
        counts.iter().map(|(k, c)| (*k, normalize(c))).collect();

    let mut baseline: BTreeMap<String, f64> = BTreeMap::new();
    for dist in dists.values() {
        for a in &union {
            *baseline.entry(a.to_string()).or_insert(0.0) += dist.get(*a).copied().unwrap_or(0.0);
        }
    }
    let total: f64 = baseline.values().sum();
    for p in baseline.values_mut() {
        *p /= total;
    }

    let eps = 1e-9;
    let smooth = |dist: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = union
            .iter()
            .map(|a| (a.to_string(), dist.get(*a).copied().unwrap_or(0.0) + eps))
            .collect();
        let z: f64 = out.values().sum();
        for p in out.values_mut() {
            *p /= z;
        }
        out
    };

    let mut scores = BTreeMap::new();
    for (kpi, dist) in &dists {
        let p = smooth(dist);
        let q = smooth(&baseline);
        let kl: f64 = union
            .iter()
            .map(|a| {
                let pa = p[*a];
                pa * (pa / q[*a]).ln()
            })
            .sum::<f64>()
            .max(0.0);
        let modal = dist
            .iter()
            .max_by(|(a1, p1), (a2, p2)| p1.partial_cmp(p2).unwrap().then(a2.cmp(a1)))
            .map(|(a, _)| a.clone())
            .unwrap();
        let delta = if modal == taken { 1.0 } else { 0.0 };
        scores.insert(kpi.to_string(), kl * delta);
    }
    scores
}

#[test]
fn criterion_5_influence_matches_brute_force() {
    const N: usize = 5;
    const NAME: &str = "influence score vs brute force";

    let space = ActionSpace::Categorical {
        name: "act".into(),
        labels: vec!["hold".into(), "drop".into(), "boost".into()],
    };
    let hold = category_action(&space, "hold");
    let drop = category_action(&space, "drop");

    let sx = state_with_category(1);
    let sy = state_with_category(3);
    let sink = state_with_category(2);

    // KPI x: 4 holds to 1 drop. KPI y: 1 hold to 3 drops — its modal
    // action disagrees with the taken action.
    let mut gx = KpiKnowledgeGraph::new("x");
    for _ in 0..4 {
        gx.update(sx, hold.clone(), sink, 0.5).unwrap();
    }
    gx.update(sx, drop.clone(), sink, 0.5).unwrap();
    let mut gy = KpiKnowledgeGraph::new("y");
    gy.update(sy, hold.clone(), sink, 0.5).unwrap();
    for _ in 0..3 {
        gy.update(sy, drop.clone(), sink, 0.5).unwrap();
    }

    let graphs: BTreeMap<String, KpiKnowledgeGraph> =
        [("x".to_string(), gx), ("y".to_string(), gy)].into();
    let joint: BTreeMap<String, SymbolicState> =
        [("x".to_string(), sx), ("y".to_string(), sy)].into();
    let report = influence_report(&graphs, &joint, &hold, &space).unwrap();

    let counts: BTreeMap<&str, BTreeMap<&str, u64>> = [
        ("x", [("hold", 4u64), ("drop", 1)].into()),
        ("y", [("hold", 1u64), ("drop", 3)].into()),
    ]
    .into();
    let expected = brute_force_influence(&counts, "hold");

    for kpi in ["x", "y"] {
        let got = report.per_kpi[kpi].influence;
        let want = expected[kpi];
        check!(
            N,
            NAME,
            (got - want).abs() <= 1e-9,
            "KPI {kpi}: influence {got} vs brute force {want}"
        );
    }
    check!(
        N,
        NAME,
        report.per_kpi["y"].influence == 0.0,
        "misaligned KPI y scored {} instead of exactly 0",
        report.per_kpi["y"].influence
    );
    check!(
        N,
        NAME,
        report.per_kpi["y"].alignment == 0.0 && report.per_kpi["x"].alignment == 1.0,
        "categorical alignment x={} y={}",
        report.per_kpi["x"].alignment,
        report.per_kpi["y"].alignment
    );
    assert!(expected["x"] > 0.0 && report.per_kpi["x"].influence > 0.0);
    pass(N, NAME);
}

// ---------------------------------------------------------------- 6 --

#[test]
fn criterion_6_refinement_improves_reward() {
    const N: usize = 6;
    const NAME: &str = "refinement reward gain";
    let started = Instant::now();

    let warmup = 20usize;
    let eval = 50usize;
    let harness = HarnessConfig {
        env: SyntheticEnvConfig::default(),
        episodes: warmup + eval,
        warmup_episodes: warmup,
        ..HarnessConfig::default()
    };
    let seed = 2024;

    // Same seed, same per-episode bandwidth traces, same exploration
    // draws — the arms differ only in whether advice is binding.
    let refined = run_session(&harness, seed, true, None).unwrap();
    let plain = run_session(&harness, seed, false, None).unwrap();

    let diffs: Vec<f64> = refined.episode_rewards[warmup..]
        .iter()
        .zip(&plain.episode_rewards[warmup..])
        .map(|(r, p)| r - p)
        .collect();
    assert_eq!(diffs.len(), eval);
    let mean = diffs.iter().sum::<f64>() / eval as f64;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (eval as f64 - 1.0)).sqrt();
    let t = mean / (sd / (eval as f64).sqrt());
    // One-sided 5% critical value for 49 degrees of freedom.
    let critical = 1.6766;
    check!(
        N,
        NAME,
        mean > 0.0 && t > critical,
        "mean gain {mean:.4} per episode, t = {t:.3} (needs > {critical}); \
         overrides applied: {}",
        refined.overrides_applied
    );

    // Infinite margin must be the identity: byte-for-byte the unrefined
    // session.
    let inert = run_session(&harness, seed, true, Some(f64::INFINITY)).unwrap();
    check!(
        N,
        NAME,
        inert.overrides_applied == 0 && inert.records == plain.records,
        "tau = +inf changed the played trace"
    );

    let elapsed = started.elapsed();
    check!(N, NAME, elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "[acceptance]   (criterion 6 detail: mean eval gain {mean:.4}, t = {t:.3}, \
         {} overrides, refined eval mean {:.4} vs unrefined {:.4})",
        refined.overrides_applied, refined.eval_mean_reward, plain.eval_mean_reward
    );
    pass(N, NAME);
}

// ---------------------------------------------------------------- 7 --

#[test]
fn criterion_7_latency_budget() {
    const N: usize = 7;
    const NAME: &str = "latency budget and linearity";

    let report = run_bench(&BenchConfig {
        kpi_count: 12,
        action_count: 6,
        steps: 800,
        seed: 11,
    })
    .unwrap();
    let total = report.per_decision_ms();
    check!(
        N,
        NAME,
        total <= 5.0,
        "per-decision latency {total:.4} ms at 12 KPIs / 6 actions, budget 5 ms"
    );
    for component in ["symbolizer", "kg_update", "influence", "refinement"] {
        let t = report.component(component).unwrap();
        check!(
            N,
            NAME,
            t.samples > 0 && t.mean_ms >= 0.0 && t.std_ms >= 0.0,
            "component {component} not measured"
        );
    }
    // The report renders as a per-component table: mean and spread.
    let text = report.to_text();
    assert!(text.contains("mean_ms") && text.contains("std_ms"));

    let small = run_bench(&BenchConfig {
        kpi_count: 10,
        action_count: 6,
        steps: 400,
        seed: 12,
    })
    .unwrap();
    let large = run_bench(&BenchConfig {
        kpi_count: 100,
        action_count: 6,
        steps: 400,
        seed: 12,
    })
    .unwrap();
    let ratio = large.per_decision_ms() / small.per_decision_ms();
    check!(
        N,
        NAME,
        ratio <= 15.0,
        "10 -> 100 KPIs scaled per-decision latency by {ratio:.2}x (budget 15x): \
         {:.4} ms -> {:.4} ms",
        small.per_decision_ms(),
        large.per_decision_ms()
    );
    println!(
        "[acceptance]   (criterion 7 detail: 12-KPI per-decision {total:.4} ms, \
         10->100 KPI scaling {ratio:.2}x)"
    );
    pass(N, NAME);
}

// ---------------------------------------------------------------- 8 --

#[test]
fn criterion_8_policy_graph_counting() {
    const N: usize = 8;
    const NAME: &str = "policy graph vs direct counting";

    let space = ActionSpace::Categorical {
        name: "act".into(),
        labels: vec!["a".into(), "b".into(), "c".into()],
    };
    let symbols: Vec<ActionSymbol> = ["a", "a", "b", "a", "c", "b", "a", "a"]
        .iter()
        .map(|l| category_action(&space, l))
        .collect();
    let rewards = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let history: Vec<(ActionSymbol, f64)> = symbols
        .iter()
        .cloned()
        .zip(rewards.iter().copied())
        .collect();

    let graph = kpilens::explain::policy::build_policy_graph(&history, &space);

    // Direct counting oracle over the same sequence.
    let total = history.len() as f64;
    let mut occupancy: BTreeMap<String, f64> = BTreeMap::new();
    for (a, _) in &history {
        *occupancy.entry(format!("{a:?}")).or_insert(0.0) += 1.0 / total;
    }
    let mut bigram: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    let mut out_totals: BTreeMap<String, f64> = BTreeMap::new();
    for pair in history.windows(2) {
        let from = format!("{:?}", pair[0].0);
        let to = format!("{:?}", pair[1].0);
        let e = bigram.entry((from.clone(), to)).or_insert((0.0, 0.0));
        e.0 += 1.0;
        e.1 += pair[1].1;
        *out_totals.entry(from).or_insert(0.0) += 1.0;
    }

    for node in &graph.nodes {
        let key = format!("{:?}", node.action);
        let want = occupancy[&key];
        check!(
            N,
            NAME,
            (node.occupancy - want).abs() <= 1e-9,
            "occupancy of {}: {} vs counted {want}",
            node.label,
            node.occupancy
        );
    }
    let mut seen_edges = 0;
    for edge in &graph.edges {
        let from = format!("{:?}", graph.nodes[edge.from].action);
        let to = format!("{:?}", graph.nodes[edge.to].action);
        let (count, reward_sum) = bigram[&(from.clone(), to.clone())];
        let want_p = count / out_totals[&from];
        let want_r = reward_sum / count;
        check!(
            N,
            NAME,
            (edge.probability - want_p).abs() <= 1e-9,
            "edge {from}->{to} probability {} vs counted {want_p}",
            edge.probability
        );
        check!(
            N,
            NAME,
            (edge.mean_reward - want_r).abs() <= 1e-9,
            "edge {from}->{to} mean reward {} vs counted {want_r}",
            edge.mean_reward
        );
        seen_edges += 1;
    }
    assert_eq!(seen_edges, bigram.len());

    let again = kpilens::explain::policy::build_policy_graph(&history, &space);
    check!(
        N,
        NAME,
        graph.to_dot() == again.to_dot(),
        "DOT output differs between two identical builds"
    );
    check!(
        N,
        NAME,
        graph.to_dot().starts_with("digraph policy {"),
        "DOT header missing"
    );
    pass(N, NAME);
}

// ---------------------------------------------------------------- 9 --

#[test]
fn criterion_9_determinism_and_persistence() {
    const N: usize = 9;
    const NAME: &str = "determinism and persistence";

    let harness = HarnessConfig {
        env: SyntheticEnvConfig {
            episode_chunks: 20,
            ..SyntheticEnvConfig::default()
        },
        episodes: 4,
        warmup_episodes: 2,
        ..HarnessConfig::default()
    };
    let session = run_session(&harness, 13, true, None).unwrap();
    let config = session.config.clone();

    let stream = |records: &[TraceRecord]| -> Vec<String> {
        let mut pipeline = Pipeline::new(config.clone()).unwrap();
        records
            .iter()
            .map(|r| pipeline.process(r).unwrap().to_json_line().unwrap())
            .collect()
    };
    let first = stream(&session.records);
    let second = stream(&session.records);
    check!(
        N,
        NAME,
        first == second,
        "two replays of the same fixture diverged"
    );
    let live: Vec<String> = session
        .explanations
        .iter()
        .map(|e| e.to_json_line().unwrap())
        .collect();
    check!(
        N,
        NAME,
        first == live,
        "replayed stream differs from the live session's"
    );

    // Snapshot-split at a third and at two thirds.
    for split in [session.records.len() / 3, session.records.len() * 2 / 3] {
        let dir = tempfile::tempdir().unwrap();
        let mut head = Pipeline::new(config.clone()).unwrap();
        let mut lines = Vec::new();
        for r in &session.records[..split] {
            lines.push(head.process(r).unwrap().to_json_line().unwrap());
        }
        save_snapshot(&head, dir.path()).unwrap();
        let mut tail = load_snapshot(config.clone(), dir.path()).unwrap();
        for r in &session.records[split..] {
            lines.push(tail.process(r).unwrap().to_json_line().unwrap());
        }
        check!(
            N,
            NAME,
            lines == first,
            "snapshot-split replay at record {split} diverged from the continuous replay"
        );
    }
    pass(N, NAME);
}
