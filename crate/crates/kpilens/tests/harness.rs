//! Trace-level properties of the synthetic harness: the reward identity
//! reconstructed from records alone, and the proactive-downshift
//! behavior of binding refinement around forecast bandwidth drops.

use kpilens::action::ActionValue;
use kpilens::harness::{run_session, HarnessConfig, SyntheticEnvConfig};
use kpilens::trace::TraceRecord;

fn bitrate(r: &TraceRecord) -> f64 {
    match r.action {
        ActionValue::Number(v) => v,
        _ => unreachable!("the harness always plays ladder bitrates"),
    }
}

/// The reward carried by each record must equal the per-chunk identity
/// recomputed from nothing but neighboring records: bitrate utility
/// minus the rebuffering penalty minus the quality-variation penalty.
#[test]
fn trace_rewards_decompose_into_utility_rebuffering_and_smoothness() {
    let harness = HarnessConfig {
        env: SyntheticEnvConfig {
            episode_chunks: 24,
            ..SyntheticEnvConfig::default()
        },
        episodes: 3,
        warmup_episodes: 1,
        ..HarnessConfig::default()
    };
    let session = run_session(&harness, 31, true, None).unwrap();
    let mu = harness.env.rebuffer_penalty;
    let per_episode = harness.env.episode_chunks + 1;

    let mut episode_sums = vec![0.0f64; harness.episodes];
    for (i, r) in session.records.iter().enumerate() {
        let within = i % per_episode;
        if within == 0 {
            // An episode's first record precedes any chunk: no reward.
            assert_eq!(r.reward, 0.0, "record {i}");
            continue;
        }
        let prev = &session.records[i - 1];
        let quality = bitrate(prev) / 1000.0;
        // The download that produced this observation started against
        // the previous record's buffer.
        let rebuffer = (r.kpis["delay"] - prev.kpis["buffer"]).max(0.0);
        let smoothness = if within == 1 {
            0.0
        } else {
            (quality - bitrate(&session.records[i - 2]) / 1000.0).abs()
        };
        let expected = quality - mu * rebuffer - smoothness;
        assert!(
            (r.reward - expected).abs() <= 1e-9,
            "record {i}: reward {} but the identity gives {expected}",
            r.reward
        );
        episode_sums[i / per_episode] += r.reward;
    }
    for (ep, (sum, reported)) in episode_sums
        .iter()
        .zip(&session.episode_rewards)
        .enumerate()
    {
        assert!(
            (sum - reported).abs() <= 1e-9,
            "episode {ep}: summed {sum}, reported {reported}"
        );
    }
}

/// With perfect forecasts, at steps where the bandwidth one chunk ahead
/// sits in the dropped band, the refined agent's bitrate stays at or
/// below the unrefined agent's essentially always — and at least as
/// often as the consult demonstrably found a profitable alternative
/// (the unrefined arm's advisory annotations, which consult the raw
/// agent action, expose those). Refinement acts proactively downward
/// into a forecast drop, never systematically upward.
#[test]
fn refinement_downshifts_ahead_of_forecast_drops() {
    let harness = HarnessConfig {
        episodes: 30,
        warmup_episodes: 10,
        ..HarnessConfig::default()
    };
    let seed = 77;
    let refined = run_session(&harness, seed, true, None).unwrap();
    let plain = run_session(&harness, seed, false, None).unwrap();
    assert!(refined.overrides_applied > 0, "refinement never fired");
    assert_eq!(plain.overrides_applied, 0);

    // Bandwidth is exogenous: both arms must have seen the same series.
    for (r, p) in refined.records.iter().zip(&plain.records) {
        assert_eq!(r.kpis["bwd"], p.kpis["bwd"]);
    }

    let per_episode = harness.env.episode_chunks + 1;
    let eval_start = harness.warmup_episodes * per_episode;
    let mut drop_ahead = 0u32;
    let mut held_or_lowered = 0u32;
    let mut would_override = 0u32;
    for t in eval_start..refined.records.len() - 1 {
        // Stay within one episode: the terminal record has no successor
        // chunk.
        if (t + 1) % per_episode == 0 {
            continue;
        }
        if refined.records[t + 1].kpis["bwd"] >= 350.0 {
            continue;
        }
        drop_ahead += 1;
        if bitrate(&refined.records[t]) <= bitrate(&plain.records[t]) {
            held_or_lowered += 1;
        }
        if plain.explanations[t]
            .refinement
            .as_ref()
            .is_some_and(|d| d.overridden)
        {
            would_override += 1;
        }
    }
    assert!(
        drop_ahead >= 50,
        "only {drop_ahead} drop-ahead steps; the fixture should produce more"
    );
    // The consult must actually find profitable downshifts here, so the
    // comparison below is not vacuous.
    assert!(
        would_override >= 1,
        "the consult never proposed an override at a drop-ahead step"
    );
    assert!(
        held_or_lowered >= would_override,
        "held/lowered at {held_or_lowered} of {drop_ahead} drop-ahead steps, \
         fewer than the {would_override} proposed overrides"
    );
    assert!(
        10 * held_or_lowered >= 9 * drop_ahead,
        "held/lowered at only {held_or_lowered} of {drop_ahead} drop-ahead steps"
    );
}
