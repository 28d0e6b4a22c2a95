use std::collections::HashMap;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::rng::stream;

fn open5(sticky_p: f64, noop_max: usize) -> EnvSpec {
    let mut text = EnvSpec::builtin("open5").unwrap().to_text();
    text = text.replace("sticky_p = 0\n", &format!("sticky_p = {sticky_p}\n"));
    text = text.replace("noop_max = 0\n", &format!("noop_max = {noop_max}\n"));
    EnvSpec::parse(&text).unwrap()
}

#[test]
fn builtins_parse_and_round_trip() {
    for name in EnvSpec::builtin_names() {
        let spec = EnvSpec::builtin(name).unwrap();
        assert_eq!(EnvSpec::parse(&spec.to_text()).unwrap(), spec);
        assert_eq!(spec.observation(spec.start_cell()).len(), spec.observation_len());
    }
    assert!(EnvSpec::builtin("nope").is_err());
}

#[test]
fn spec_errors_name_the_problem() {
    let err = EnvSpec::parse("gamme = 0.9\nrow = SG\n").unwrap_err();
    assert!(err.to_string().contains("gamme"));
    let err = EnvSpec::parse("row = S#G\n").unwrap_err();
    assert!(err.to_string().contains("no goal reachable"));
    let err = EnvSpec::parse("row = S.G\ngoal_reward = 5\n").unwrap_err();
    assert!(err.to_string().contains("goal_reward"));
    assert!(EnvSpec::parse("row = S.G\nsticky_p = 1.5\n").is_err());
}

#[test]
fn zero_noop_range_gives_a_fixed_start() {
    let spec = Arc::new(EnvSpec::builtin("open5").unwrap());
    let mut env = GridEnv::new(spec.clone());
    let mut rng = stream(1, "env");
    let first = env.reset(&mut rng);
    for _ in 0..20 {
        assert_eq!(env.reset(&mut rng), first);
    }
    assert_eq!(first, spec.observation(spec.start_cell()));
}

#[test]
fn resets_are_reproducible_per_seed() {
    let spec = Arc::new(open5(0.0, 30));
    let run = |seed| {
        let mut env = GridEnv::new(spec.clone());
        let mut rng = stream(seed, "env");
        (0..10).map(|_| env.reset(&mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(run(4), run(4));
}

/// Start-cell distribution by brute force over every drift sequence.
fn brute_force_starts(spec: &EnvSpec) -> HashMap<usize, f64> {
    let mut out = HashMap::new();
    let span = (spec.noop_max - spec.noop_min + 1) as f64;
    for k in spec.noop_min..=spec.noop_max {
        let count = 4usize.pow(k as u32);
        for code in 0..count {
            let mut pos = spec.start_cell();
            let mut c = code;
            for _ in 0..k {
                pos = spec.drift_target(pos, c % 4);
                c /= 4;
            }
            *out.entry(pos).or_insert(0.0) += 1.0 / (span * count as f64);
        }
    }
    out
}

#[test]
fn start_distribution_matches_drift_enumeration() {
    let spec = Arc::new(open5(0.0, 4));
    let exact = brute_force_starts(&spec);
    let mut env = GridEnv::new(spec.clone());
    let mut rng = stream(12, "env");
    let n = 10_000;
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for _ in 0..n {
        env.reset(&mut rng);
        *counts.entry(env.state().pos).or_default() += 1.0 / n as f64;
    }
    let tv: f64 = (0..spec.num_cells())
        .map(|p| {
            (exact.get(&p).copied().unwrap_or(0.0) - counts.get(&p).copied().unwrap_or(0.0)).abs()
        })
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.02, "total variation {tv}");

    // The library's chain propagation agrees with brute force exactly.
    let space = StateSpace::enumerate(&spec, 10_000).unwrap();
    for (id, p) in space.start_distribution(&spec) {
        let pos = space.state(id).pos;
        assert!((exact[&pos] - p).abs() < 1e-12);
    }
}

#[test]
fn zero_stickiness_executes_the_requested_action() {
    let spec = Arc::new(open5(0.0, 0));
    let mut env = GridEnv::new(spec);
    let mut rng = stream(3, "env");
    env.reset(&mut rng);
    for a in [1, 1, 2, 2, 1, 2, 3, 0] {
        let before = env.state().pos;
        env.step(a, &mut rng).unwrap();
        assert_eq!(env.state().prev_action, a);
        assert_ne!(env.state().pos, before);
    }
}

#[test]
fn walls_block_movement_but_charge_the_step_reward() {
    let spec = Arc::new(EnvSpec::builtin("corridor").unwrap());
    let mut env = GridEnv::new(spec.clone());
    let mut rng = stream(3, "env");
    env.reset(&mut rng);
    let start = env.state().pos;
    let r = env.step(0, &mut rng).unwrap();
    assert_eq!(env.state().pos, start);
    assert_eq!(r.reward, spec.step_reward);
    assert!(!r.terminal && !r.truncated);
}

#[test]
fn goal_terminates_and_finished_episode_refuses_steps() {
    let spec = Arc::new(EnvSpec::parse("row = S.G\nstep_reward = -0.1\n").unwrap());
    let mut env = GridEnv::new(spec);
    let mut rng = stream(3, "env");
    env.reset(&mut rng);
    assert_eq!(env.step(1, &mut rng).unwrap().reward, -0.1);
    let last = env.step(1, &mut rng).unwrap();
    assert!(last.terminal && !last.truncated);
    assert_eq!(last.reward, 1.0);
    assert!(matches!(env.step(1, &mut rng), Err(crate::Error::Contract(_))));
    assert!(matches!(GridEnv::new(env.spec().clone().into()).step(0, &mut rng), Err(_)));
}

/// Expected steps for "always right" to cover four columns, by iterating the
/// chain over (column, previous action is right).
fn always_right_expected_steps(sticky_p: f64) -> f64 {
    // e[c][r]: expected remaining steps at column c with prev-is-right flag r.
    let mut e = [[0.0f64; 2]; 5];
    for _ in 0..10_000 {
        let mut next = e;
        for c in 0..4 {
            // prev = right: always moves right.
            next[c][1] = 1.0 + e[c + 1][1];
            // prev != right: moves right w.p. 1 - p, otherwise the stale
            // vertical/left move leaves the column unchanged.
            next[c][0] = 1.0 + (1.0 - sticky_p) * e[c + 1][1] + sticky_p * e[c][0];
        }
        e = next;
    }
    // Uniform initial previous action.
    0.25 * e[0][1] + 0.75 * e[0][0]
}

#[test]
fn sticky_traversal_time_matches_chain_expectation() {
    let p = 0.25;
    let exact = always_right_expected_steps(p);
    assert!((exact - 4.25).abs() < 1e-12);
    let spec = Arc::new(open5(p, 0));
    let mut env = GridEnv::new(spec.clone());
    let mut rng = stream(99, "env");
    let episodes = 100_000;
    let mut total = 0usize;
    for _ in 0..episodes {
        env.reset(&mut rng);
        let mut steps = 0;
        while env.state().pos % spec.width < 4 {
            env.step(1, &mut rng).unwrap();
            steps += 1;
        }
        total += steps;
    }
    let mean = total as f64 / episodes as f64;
    assert!((mean - exact).abs() / exact < 0.01, "mean {mean} vs {exact}");
}

#[test]
fn state_counts_for_open_grid() {
    let plain = StateSpace::enumerate(&open5(0.0, 0), 1000).unwrap();
    assert_eq!(plain.len(), 25);
    assert!(!plain.is_augmented());
    let sticky = StateSpace::enumerate(&open5(0.25, 0), 1000).unwrap();
    assert_eq!(sticky.len(), 100);
    assert!(StateSpace::enumerate(&open5(0.25, 0), 50).is_err());
}

#[test]
fn enumerated_observations_are_reproduced_by_replay() {
    for name in EnvSpec::builtin_names() {
        let spec = EnvSpec::builtin(name).unwrap();
        let space = StateSpace::enumerate(&spec, 100_000).unwrap();
        // Replay in a deterministic copy: positions evolve identically.
        let mut det = spec.clone();
        det.sticky_p = 0.0;
        det.noop_max = 0;
        det.noop_min = 0;
        let det = Arc::new(det);
        for (id, obs) in space.observations(&spec) {
            let target = space.state(id).pos;
            let path = bfs_path(&det, target);
            let mut env = GridEnv::new(det.clone());
            let mut rng = stream(0, "replay");
            let mut last = env.reset(&mut rng);
            for a in path {
                last = env.step(a, &mut rng).unwrap().observation;
            }
            assert_eq!(last, obs, "{name} state {id}");
        }
    }
}

fn bfs_path(spec: &EnvSpec, target: usize) -> Vec<usize> {
    let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut queue = std::collections::VecDeque::from([spec.start_cell()]);
    let mut seen = vec![false; spec.num_cells()];
    seen[spec.start_cell()] = true;
    while let Some(p) = queue.pop_front() {
        if p == target {
            break;
        }
        if spec.cell(p).is_terminal() {
            continue;
        }
        for a in 0..NUM_ACTIONS {
            let t = spec.target(p, a);
            if !seen[t] {
                seen[t] = true;
                prev.insert(t, (p, a));
                queue.push_back(t);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = target;
    while cur != spec.start_cell() {
        let (p, a) = prev[&cur];
        path.push(a);
        cur = p;
    }
    path.reverse();
    path
}

#[test]
fn identify_inverts_observation() {
    let spec = EnvSpec::builtin("four-rooms").unwrap();
    for pos in 0..spec.num_cells() {
        let obs = spec.observation(pos);
        let expected = (spec.cell(pos) != Cell::Wall).then_some(pos);
        assert_eq!(spec.identify(&obs), expected);
    }
    let mut junk = spec.observation(spec.start_cell()).0;
    junk[spec.num_cells() + 3] = 0.5;
    assert_eq!(spec.identify(&junk), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectories_are_deterministic_and_bounded(
        seed in 0u64..10_000,
        actions in prop::collection::vec(0usize..4, 1..300),
        which in 0usize..4,
    ) {
        let name = EnvSpec::builtin_names().nth(which).unwrap();
        let spec = Arc::new(EnvSpec::builtin(name).unwrap());
        let run = || {
            let mut env = GridEnv::new(spec.clone());
            let mut rng = stream(seed, "env");
            let mut trace = vec![(env.reset(&mut rng), 0.0, false, false)];
            for &a in &actions {
                if !env.is_active() {
                    break;
                }
                let r = env.step(a, &mut rng).unwrap();
                trace.push((r.observation, r.reward, r.terminal, r.truncated));
            }
            (trace, env.steps())
        };
        let (a, steps) = run();
        let (b, _) = run();
        prop_assert_eq!(&a, &b);
        prop_assert!(steps <= spec.max_steps);
        for (i, (_, r, term, trunc)) in a.iter().enumerate().skip(1) {
            prop_assert!(*r >= spec.reward_min && *r <= spec.reward_max);
            prop_assert!(!(*term && *trunc));
            prop_assert_eq!(*trunc, !*term && i == spec.max_steps);
        }
    }
}
