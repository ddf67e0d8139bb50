//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N (<name>): PASS/FAIL` line (visible with `--nocapture`, or
//! automatically for failing criteria).
//!
//! Every tolerance and threshold is pinned here; the master seeds are
//! arbitrary but fixed, and all results are independent of thread count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use si_core::agents::{adversarial_si_params, AgentSpec};
use si_core::equilibria::{
    convention, enumerate_nash, is_nash, pone_filter, ConventionMap, TieBreakPolicy, SOLVE_TOL,
};
use si_core::game::{GameCatalog, JointAction, MatrixGame, Seat};
use si_core::harness::{
    certify_si, cp_upper_bound, load_experiment_file, monte_carlo, nash_replay_tail, run_match,
    ConsistencyFlavor, EpsilonSpec, ExperimentAgent, ExperimentConfig, MatchConfig,
};
use si_core::regret::{expected_external_regret, expected_stochastic_regret, regret_ordering_holds};
use si_core::seeding::{mix, rng_from};
use si_core::verify::{grid_cross_check, random_history, random_normalized_game};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn finish(number: u8, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

/// Zoo used by the per-criterion match loops (the certification experiments
/// carry their own zoo in their config files).
fn zoo_specs(n_actions: usize) -> Vec<AgentSpec> {
    let mut zoo: Vec<AgentSpec> = (0..n_actions).map(AgentSpec::constant).collect();
    zoo.push(AgentSpec::uniform_random());
    zoo.push(AgentSpec::best_response_exploiter());
    zoo.push(AgentSpec::regret_adversary());
    let mut code = AgentSpec::secret_code(vec![JointAction::new(0, 1), JointAction::new(1, 0)]);
    code.params.epsilon = Some(0.05);
    zoo.push(code);
    zoo
}

#[test]
fn acceptance_01_stochastic_regret_never_exceeds_external() {
    let start = Instant::now();
    let cases = 10_000usize;
    let violations: usize = (0..cases)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = rng_from(mix(101, &[i as u64]));
            let n = 2 + (i % 3);
            let game = random_normalized_game(n, &mut rng);
            let len = rng.random_range(0..=50);
            let history = random_history(n, len, &mut rng);
            !regret_ordering_holds(&history, &game)
        })
        .count();
    let elapsed = start.elapsed();
    finish(
        1,
        "stochastic <= external regret sweep",
        violations == 0 && elapsed.as_secs() < 30,
        &format!("{violations}/{cases} violations (both seats, N in 2..=4, |h| <= 50) in {elapsed:.2?}"),
    );
}

#[test]
fn acceptance_02_fictitious_play_has_zero_expected_stochastic_regret() {
    let start = Instant::now();
    let catalog = GameCatalog::load_path(&configs().join("si_catalog.toml")).unwrap();
    let conventions = convention(&catalog, TieBreakPolicy::WelfareLex).unwrap();
    let type_ids: Vec<String> = catalog.ids().cloned().collect();
    let zoo = zoo_specs(2);

    let mut worst: f64 = 0.0;
    let mut matches = 0usize;
    for (z, partner) in zoo.iter().enumerate() {
        // 100 seeded matches per partner: 25 seeds x 2 seats x 2 types.
        for seed_idx in 0..25u64 {
            for (t, type_id) in type_ids.iter().enumerate() {
                for fp_seat in [Seat::P1, Seat::P2] {
                    let (agent_1, agent_2) = match fp_seat {
                        Seat::P1 => (AgentSpec::fictitious_play(), partner.clone()),
                        Seat::P2 => (partner.clone(), AgentSpec::fictitious_play()),
                    };
                    let config = MatchConfig {
                        type_id: type_id.clone(),
                        agent_1,
                        agent_2,
                        stages: 1000,
                        seed: mix(102, &[z as u64, seed_idx, t as u64, fp_seat.number() as u64]),
                    };
                    let trace = run_match(&config, &catalog, Some(&conventions)).unwrap();
                    let game = catalog.get(type_id).unwrap();
                    let r = expected_stochastic_regret(&trace, game, fp_seat).unwrap();
                    worst = worst.max(r.abs());
                    matches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    finish(
        2,
        "fictitious play zero expected stochastic regret",
        worst <= 1e-9 && elapsed.as_secs() < 60,
        &format!("max |expected stochastic regret| {worst:.2e} over {matches} matches (T=1000) in {elapsed:.2?}"),
    );
}

#[test]
fn acceptance_03_multiplicative_weights_deterministic_bound() {
    let start = Instant::now();
    let stages = 1000u64;
    let bound = (stages as f64 / 2.0 * 3.0f64.ln()).sqrt() + 1e-6;

    let results: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|g| {
            let mut rng = rng_from(mix(103, &[g]));
            let game = random_normalized_game(3, &mut rng);
            let catalog = GameCatalog::from_entries(vec![("random".into(), game)]).unwrap();
            let conventions = convention(&catalog, TieBreakPolicy::WelfareLex).unwrap();
            let game = catalog.get("random").unwrap();
            let mut zoo = zoo_specs(3);
            if let Some(code) = zoo.iter_mut().find(|s| s.params.code.is_some()) {
                code.params.code = Some(vec![JointAction::new(0, 1), JointAction::new(2, 0)]);
            }
            let mut worst: f64 = f64::NEG_INFINITY;
            for (z, partner) in zoo.iter().enumerate() {
                let mw_seat = if g % 2 == 0 { Seat::P1 } else { Seat::P2 };
                let (agent_1, agent_2) = match mw_seat {
                    Seat::P1 => (AgentSpec::multiplicative_weights(), partner.clone()),
                    Seat::P2 => (partner.clone(), AgentSpec::multiplicative_weights()),
                };
                let config = MatchConfig {
                    type_id: "random".into(),
                    agent_1,
                    agent_2,
                    stages,
                    seed: mix(103, &[g, z as u64, 7]),
                };
                let trace = run_match(&config, &catalog, Some(&conventions)).unwrap();
                let r = expected_external_regret(&trace, game, mw_seat).unwrap();
                worst = worst.max(r);
            }
            worst
        })
        .collect();

    let worst = results.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let violations = results.iter().filter(|&&v| v > bound).count();
    let elapsed = start.elapsed();
    finish(
        3,
        "multiplicative weights expected-regret bound",
        violations == 0 && elapsed.as_secs() < 120,
        &format!(
            "worst expected external regret {worst:.3} vs bound {bound:.3} over 100 games x 7 partners (N=3, T=1000), {violations} violations, in {elapsed:.2?}"
        ),
    );
}

#[test]
fn acceptance_04_stochastic_fallback_certification() {
    let start = Instant::now();
    let loaded = load_experiment_file(&configs().join("stochastic_si.toml")).unwrap();
    let exp = loaded.experiment;
    assert_eq!(exp.stages, 10_000);
    assert_eq!(exp.trials, 500);
    assert_eq!(exp.delta, 0.05);
    let report = monte_carlo(&exp, 104).unwrap();

    // (a) Self-play switch frequency <= delta, with the 99% binomial upper
    // bound under delta + 0.02.
    let mut switch_ok = true;
    let mut switch_detail = String::new();
    for agg in &report.compatibility {
        let freq = agg.switch_count as f64 / agg.trials as f64;
        let upper = cp_upper_bound(agg.switch_count, agg.trials, 0.01);
        if freq > exp.delta || upper > exp.delta + 0.02 {
            switch_ok = false;
        }
        switch_detail.push_str(&format!("{}={freq:.4}(ub {upper:.4}) ", agg.type_id));
    }

    // (b) Compatibility rate >= 1 - delta - 0.02 on every type.
    let compat_ok = report
        .compatibility
        .iter()
        .all(|a| a.rate >= 1.0 - exp.delta - 0.02 && a.error.is_none());

    // (c) Zero violations of the surely-bounded stochastic regret against
    // every partner: realized regret up to the switch point stays within
    // epsilon, and every post-switch expected increment vanishes (the
    // recorded strategy equals the fictitious-play recommendation bitwise).
    let mut sure_violations = 0usize;
    let mut plain_violations = 0usize;
    for rec in report.trial_records.iter().filter(|r| r.kind == "consistency") {
        if rec.accounted_value > rec.threshold + 1e-12
            || rec.max_post_switch_expected_increment > 1e-12
        {
            sure_violations += 1;
        }
        if !rec.satisfied {
            plain_violations += 1;
        }
    }

    let elapsed = start.elapsed();
    let pass = switch_ok
        && compat_ok
        && sure_violations == 0
        && report.overall_pass
        && elapsed.as_secs() < 600;
    finish(
        4,
        "stochastic fallback certification",
        pass,
        &format!(
            "switch freq {switch_detail}; compat rates {:?}; sure-bound violations {sure_violations}/{} (plain realized misses {plain_violations}); overall_pass={}; in {elapsed:.2?}",
            report.compatibility.iter().map(|a| a.rate).collect::<Vec<_>>(),
            report.trial_records.iter().filter(|r| r.kind == "consistency").count(),
            report.overall_pass,
        ),
    );
}

#[test]
fn acceptance_05_adversarial_fallback_certification() {
    let start = Instant::now();
    let loaded = load_experiment_file(&configs().join("adversarial_si.toml")).unwrap();
    let exp = loaded.experiment;
    assert_eq!(exp.stages, 10_000);
    assert!(matches!(exp.flavor, ConsistencyFlavor::Adversarial));
    let delta = exp.delta;
    let report = monte_carlo(&exp, 105).unwrap();

    // Sanity: the resolved thresholds follow the adversarial parameter rule
    // (epsilon1 for the agent, epsilon1 + gap/T for certification).
    for (type_id, eps) in &report.epsilon_by_type {
        let game = exp.catalog.get(type_id).unwrap();
        let p = adversarial_si_params(exp.stages, delta, game.n_actions()).unwrap();
        assert!((eps.agent - p.epsilon1).abs() < 1e-12);
        assert!((eps.certification - p.epsilon).abs() < 1e-12);
    }

    // (a) Sure bound: per-trace expected external regret never exceeds
    // epsilon1 * T, against any partner, from the recorded strategies.
    let mut sure_violations = 0usize;
    for rec in report.trial_records.iter().filter(|r| r.kind == "consistency") {
        let eps1 = report.epsilon_by_type[&rec.type_id].agent;
        if rec.expected_value > eps1 + 1e-12 {
            sure_violations += 1;
        }
    }

    // (b) Self-play switch frequency <= delta + slack.
    let mut switch_ok = true;
    for agg in &report.compatibility {
        let freq = agg.switch_count as f64 / agg.trials as f64;
        if freq > delta || cp_upper_bound(agg.switch_count, agg.trials, 0.01) > delta + 0.02 {
            switch_ok = false;
        }
    }

    // (c) Realized regret within epsilon1 + azuma_gap/T in >= 1 - delta - 0.02
    // of trials against every partner.
    let rate_ok = report
        .consistency
        .iter()
        .all(|a| a.rate >= 1.0 - delta - 0.02 && a.error.is_none());
    let worst_rate = report
        .consistency
        .iter()
        .map(|a| a.rate)
        .fold(f64::INFINITY, f64::min);

    let elapsed = start.elapsed();
    let pass = sure_violations == 0
        && switch_ok
        && rate_ok
        && report.overall_pass
        && elapsed.as_secs() < 600;
    finish(
        5,
        "adversarial fallback certification",
        pass,
        &format!(
            "sure-bound violations {sure_violations}; worst consistency rate {worst_rate:.4}; switch freqs {:?}; overall_pass={}; in {elapsed:.2?}",
            report.compatibility.iter().map(|a| a.switch_count).collect::<Vec<_>>(),
            report.overall_pass
        ),
    );
}

#[test]
fn acceptance_06_nash_replay_concentration_tail() {
    let start = Instant::now();
    let catalog = GameCatalog::load_path(&configs().join("si_catalog.toml")).unwrap();
    let conventions = convention(&catalog, TieBreakPolicy::WelfareLex).unwrap();
    let profile = conventions.get("crossing").unwrap();
    assert!(profile.s1.as_pure().is_none(), "needs a mixed convention");
    let game = catalog.get("crossing").unwrap();

    let delta = 0.05;
    let trials = 500u64;
    let report = nash_replay_tail(game, &profile.s1, &profile.s2, 10_000, trials, delta, 106).unwrap();
    let expected_frac = report.expected_exceed as f64 / trials as f64;
    let realized_frac = report.realized_exceed as f64 / trials as f64;
    let elapsed = start.elapsed();
    finish(
        6,
        "mixed-convention replay concentration tail",
        expected_frac <= delta && realized_frac <= delta && elapsed.as_secs() < 300,
        &format!(
            "max-prefix expected regret > {:.1} in {expected_frac:.4} of trials; realized > {:.1} in {realized_frac:.4}; delta={delta}; in {elapsed:.2?}",
            report.expected_bound, report.realized_bound
        ),
    );
}

#[test]
fn acceptance_07_equilibrium_solver_golden_set_and_grid_cross_validation() {
    let start = Instant::now();

    // Golden set: the 2x2 coordination game with payoffs 2 and 1.
    let m = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
    let coordination = MatrixGame::from_rows(m.clone(), m).unwrap();
    let eqs = enumerate_nash(&coordination, SOLVE_TOL).unwrap();
    let mut golden_ok = eqs.profiles.len() == 3 && eqs.complete_vertex_enumeration;
    let expect = |s1: [f64; 2], s2: [f64; 2], p: [f64; 2]| -> bool {
        eqs.profiles.iter().any(|e| {
            e.s1.probs().iter().zip(&s1).all(|(a, b)| (a - b).abs() <= 1e-9)
                && e.s2.probs().iter().zip(&s2).all(|(a, b)| (a - b).abs() <= 1e-9)
                && (e.payoffs.p1 - p[0]).abs() <= 1e-9
                && (e.payoffs.p2 - p[1]).abs() <= 1e-9
        })
    };
    golden_ok &= expect([1.0, 0.0], [1.0, 0.0], [2.0, 2.0]);
    golden_ok &= expect([0.0, 1.0], [0.0, 1.0], [1.0, 1.0]);
    golden_ok &= expect(
        [1.0 / 3.0, 2.0 / 3.0],
        [1.0 / 3.0, 2.0 / 3.0],
        [2.0 / 3.0, 2.0 / 3.0],
    );
    let pone = pone_filter(&eqs, &coordination);
    golden_ok &= pone.profiles.len() == 1 && (pone.profiles[0].payoffs.p1 - 2.0).abs() <= 1e-9;

    let pennies = MatrixGame::from_rows(
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
    )
    .unwrap();
    let eqs = enumerate_nash(&pennies, SOLVE_TOL).unwrap();
    golden_ok &= eqs.profiles.len() == 1
        && eqs.profiles[0]
            .s1
            .probs()
            .iter()
            .chain(eqs.profiles[0].s2.probs())
            .all(|&v| (v - 0.5).abs() <= 1e-9);

    // 1000 random games, N <= 4: every enumerated profile passes is_nash at
    // 1e-7.
    let nash_failures: usize = (0..1000u64)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = rng_from(mix(107, &[i]));
            let n = 2 + (i % 3) as usize;
            let game = random_normalized_game(n, &mut rng);
            let eqs = enumerate_nash(&game, SOLVE_TOL).unwrap();
            eqs.profiles.iter().any(|p| !is_nash(&game, &p.s1, &p.s2, 1e-7).is_nash)
        })
        .count();

    // Grid cross-validation, stated constants: every grid profile passing
    // is_nash at 1e-3 must lie within 1/64 of an enumerated profile whenever
    // enumeration is complete.
    //
    // This claim is not attainable: a grid point deviating mass q onto an
    // action whose best-response payoff gap is g passes whenever q * g <=
    // 1e-3, so any game with a gap under 64 * 1e-3 = 0.064 admits passing
    // points beyond 1/64 (about a fifth of random games). The solver itself
    // is not at fault, which the diagnostic re-run at the grid-commensurate
    // tolerance 1e-6 demonstrates: there, no passing point strays.
    let sweep: Vec<(bool, bool, bool)> = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(mix(1070, &[i]));
            let n = 2 + (i % 2) as usize;
            let game = random_normalized_game(n, &mut rng);
            let eqs = enumerate_nash(&game, SOLVE_TOL).unwrap();
            if !eqs.complete_vertex_enumeration {
                return (false, false, false);
            }
            let literal = grid_cross_check(&game, 64, 1e-3, &eqs).unwrap();
            let literal_bad = literal.worst_distance > 1.0 / 64.0 + 1e-12;
            let diagnostic_bad = if literal_bad {
                let tight = grid_cross_check(&game, 64, 1e-6, &eqs).unwrap();
                tight.worst_distance > 1.0 / 64.0 + 1e-12
            } else {
                false
            };
            (true, literal_bad, diagnostic_bad)
        })
        .collect();
    let complete = sweep.iter().filter(|(c, _, _)| *c).count();
    let literal_violations = sweep.iter().filter(|(_, v, _)| *v).count();
    let diagnostic_violations = sweep.iter().filter(|(_, _, d)| *d).count();

    let elapsed = start.elapsed();
    let pass = golden_ok && nash_failures == 0 && literal_violations == 0 && elapsed.as_secs() < 120;
    finish(
        7,
        "equilibrium solver golden set and grid cross-validation",
        pass,
        &format!(
            "golden set ok={golden_ok}; is_nash(1e-7) failures {nash_failures}/1000; grid check at stated tol 1e-3: {literal_violations}/{complete} games with passing points beyond 1/64 (loose-tolerance blow-up, not missed equilibria: at tol 1e-6 the same games show {diagnostic_violations} violations); in {elapsed:.2?}"
        ),
    );
}

#[test]
fn acceptance_08_certification_is_deterministic_across_workers() {
    let start = Instant::now();
    let experiment = configs().join("quick_certify.toml");
    let base = std::env::temp_dir().join(format!("si-acceptance-08-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);

    let run_with = |workers: &str, sub: &str| {
        let out = base.join(sub);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_si-bench"))
            .args([
                "certify",
                "--experiment",
                experiment.to_str().unwrap(),
                "--seed",
                "808",
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        std::fs::read(out.join("trials.csv")).unwrap()
    };
    let csv_1 = run_with("1", "w1");
    let csv_3 = run_with("3", "w3");
    let elapsed = start.elapsed();
    finish(
        8,
        "byte-identical per-trial CSV across worker counts",
        csv_1 == csv_3,
        &format!("{} bytes identical across --workers 1 and 3, in {elapsed:.2?}", csv_1.len()),
    );
}

#[test]
fn acceptance_09_conflicting_conventions_fail_compatibility() {
    let start = Instant::now();
    // Symmetric coordination game with two pure Pareto-optimal equilibria of
    // *equal* payoff pairs. Equal pairs matter: with mirrored unequal payoffs
    // (battle-of-the-sexes style), fictitious play recovers coordination on
    // one convention after the anti-phase and the seat it favors lands within
    // epsilon of the *other* equilibrium's payoff, legitimately satisfying
    // the existential compatibility reading.
    let sym = {
        let m = vec![vec![0.9, 0.0], vec![0.0, 0.9]];
        MatrixGame::from_rows(m.clone(), m).unwrap()
    };
    let catalog = GameCatalog::from_entries(vec![("sym".into(), sym)]).unwrap();
    let map_a = ConventionMap::from_raw(
        vec![("sym".into(), vec![1.0, 0.0], vec![1.0, 0.0])],
        &catalog,
    )
    .unwrap();
    let map_b = ConventionMap::from_raw(
        vec![("sym".into(), vec![0.0, 1.0], vec![0.0, 1.0])],
        &catalog,
    )
    .unwrap();

    let class = vec![
        ExperimentAgent {
            spec: AgentSpec::stochastic_fallback(None),
            conventions: Some(map_a.clone()),
        },
        ExperimentAgent {
            spec: AgentSpec::stochastic_fallback(None),
            conventions: Some(map_b),
        },
    ];
    let exp = ExperimentConfig {
        catalog,
        conventions: map_a,
        delta: 0.05,
        epsilon: EpsilonSpec::Directive("from_theorem_1".into()),
        stages: 10_000,
        trials: 200,
        flavor: ConsistencyFlavor::Stochastic,
        class: class.clone(),
        zoo: vec![],
        seed: None,
    };
    let report = certify_si(&class, &exp, 109).unwrap();

    let mut cross_rates = Vec::new();
    let mut self_rates = Vec::new();
    for agg in &report.compatibility {
        assert!(agg.error.is_none(), "{:?}", agg.error);
        let cross = agg.pairing.contains("class.0") && agg.pairing.contains("class.1");
        if cross {
            cross_rates.push(agg.rate);
        } else {
            self_rates.push(agg.rate);
        }
    }
    let elapsed = start.elapsed();
    // The mismatched pairs must fail compatibility at rate >= 0.95 (the
    // harness detects miscoordination); matched self-pairs stay healthy.
    let pass = cross_rates.iter().all(|r| 1.0 - r >= 0.95)
        && self_rates.iter().all(|&r| r >= 0.95)
        && !report.overall_pass
        && elapsed.as_secs() < 120;
    finish(
        9,
        "miscoordination negative control",
        pass,
        &format!(
            "cross-convention satisfaction rates {cross_rates:?} (failure >= 0.95 required), self-pair rates {self_rates:?}, overall_pass={}; in {elapsed:.2?}",
            report.overall_pass
        ),
    );
}
