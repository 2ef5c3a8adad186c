//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its criterion.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use sil_core::config::RunConfig;
use sil_core::dil::{batch_loss, forward, gradients, train, DilPolicy, MlpParams, TrainConfig};
use sil_core::domain::{Direction, FeatureSpec};
use sil_core::experiment::{
    compare, evaluate, record_demonstrations, Directions, ExperimentConfig,
};
use sil_core::ilp::{induce, semantically_equivalent, Hypothesis, SearchConfig};
use sil_core::ingest::{extract_pairs, StateActionPair};
use sil_core::knowledge::{default_tasks, generate_examples, TaskDefinition};
use sil_core::logic::{eval_rule, parse_rule, FactSet, PredicateSymbol};
use sil_core::policy::{select_lane_action, AccelPhase, LaneAction, PolicyConfig};
use sil_core::sim::{
    run_episode, run_episode_observed, PlacedVehicle, Scenario, TrafficSource, EGO_ID,
};

fn report(id: u32, title: &str, outcome: Result<String, String>) {
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    // Written to the raw handle so the line shows without --nocapture.
    let _ = writeln!(
        std::io::stdout().lock(),
        "criterion {id} [{tag}] {title}: {detail}"
    );
    if let Err(d) = outcome {
        panic!("criterion {id} failed: {d}");
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn task(head: &str) -> TaskDefinition {
    default_tasks()
        .into_iter()
        .find(|t| t.head == head)
        .unwrap()
}

#[test]
fn criterion_1_example_counts() {
    let outcome = (|| {
        let mut parts = Vec::new();
        for (head, pos, neg) in [("rlc_isUnsafe", 768, 256), ("reachDesiredSpeed", 512, 512)] {
            let t = task(head);
            check(t.space.state_count() == 1024, || {
                format!("{head}: space has {} states", t.space.state_count())
            })?;
            let start = Instant::now();
            let ex = generate_examples(&t.space, &t.labeler().map_err(|e| e.to_string())?);
            let took = start.elapsed();
            let got = (ex.pos().len(), ex.neg().len());
            check(got == (pos, neg), || {
                format!("{head}: {got:?}, expected ({pos}, {neg})")
            })?;
            check(took < Duration::from_secs(1), || {
                format!("{head}: took {took:?}")
            })?;
            parts.push(format!(
                "{head} {}/{} in {:.1} ms",
                got.0,
                got.1,
                took.as_secs_f64() * 1e3
            ));
        }
        Ok(parts.join(", "))
    })();
    report(1, "example counts", outcome);
}

/// Rules as printed alongside the example counts they were learned from.
const PRINTED_RULES: [&str; 10] = [
    "rlc_isUnsafe:- right_isBusy; not(right_isValid).",
    "llc_isUnsafe:- left_isBusy; not(left_isValid).",
    "rlc_isDangerous:- backRight_isBusy, backRightVel_isBigger; frontRight_isBusy, frontRightVel_isLower.",
    "llc_isDangerous:- backLeft_isBusy, backLeftVel_isBigger; frontLeft_isBusy, frontLeftVel_isLower.",
    "lk_isDangerous:- back_isBusy, not(backDist_isSafe), backVel_isBigger.",
    "llc_isBetter:- front_isBusy, not(left_isBusy), not(frontLeft_isBusy).",
    "rlc_isBetter:- front_isBusy, left_isBusy, frontLeft_isBusy, not(right_isBusy), not(frontRight_isBusy).",
    "reachDesiredSpeed:- not(front_isBusy).",
    "reachFrontSpeed:- front_isBusy, frontDist_isSafe.",
    "brake:- front_isBusy, frontVel_isLower, not(frontDist_isSafe).",
];

#[test]
fn criterion_2_rule_recovery() {
    let outcome = (|| {
        let mut slowest = (String::new(), 0.0);
        for text in PRINTED_RULES {
            let printed = parse_rule(text).map_err(|e| format!("{text}: {e}"))?;
            let head = printed.head().as_str().to_owned();
            let t = task(&head);
            let ex = generate_examples(&t.space, &t.labeler().map_err(|e| e.to_string())?);
            let mut cfg =
                SearchConfig::new(t.max_literals, t.max_clauses).map_err(|e| e.to_string())?;
            cfg.allow_negation = t.allow_negation;
            let r = induce(&t.bias().map_err(|e| e.to_string())?, &ex, &cfg)
                .map_err(|e| format!("{head}: {e}"))?;
            let secs = r.elapsed.as_secs_f64();
            check(r.coverage.accuracy == 1.0, || {
                format!("{head}: accuracy {}", r.coverage.accuracy)
            })?;
            check(
                semantically_equivalent(&r.hypothesis, &Hypothesis::from(printed), &t.space),
                || {
                    format!(
                        "{head}: induced {} differs from {text}",
                        r.hypothesis.render()
                    )
                },
            )?;
            check(secs < 60.0, || format!("{head}: {secs:.1} s"))?;
            if secs > slowest.1 {
                slowest = (head, secs);
            }
        }
        Ok(format!(
            "10/10 equivalent, accuracy 1.00, slowest {} {:.3} s",
            slowest.0, slowest.1
        ))
    })();
    report(2, "rule recovery", outcome);
}

fn has(f: &FactSet, name: &str) -> bool {
    f.contains_name(name)
}

fn unsafe_action(f: &FactSet, a: LaneAction) -> bool {
    match a {
        LaneAction::LK => false,
        LaneAction::LLC => has(f, "left_isBusy") || !has(f, "left_isValid"),
        LaneAction::RLC => has(f, "right_isBusy") || !has(f, "right_isValid"),
    }
}

fn dangerous_action(f: &FactSet, a: LaneAction) -> bool {
    match a {
        LaneAction::LK => {
            has(f, "back_isBusy") && has(f, "backVel_isBigger") && !has(f, "backDist_isSafe")
        }
        LaneAction::LLC => {
            (has(f, "backLeft_isBusy") && has(f, "backLeftVel_isBigger"))
                || (has(f, "frontLeft_isBusy") && has(f, "frontLeftVel_isLower"))
        }
        LaneAction::RLC => {
            (has(f, "backRight_isBusy") && has(f, "backRightVel_isBigger"))
                || (has(f, "frontRight_isBusy") && has(f, "frontRightVel_isLower"))
        }
    }
}

#[test]
fn criterion_3_exhaustive_policy_safety() {
    let spec = FeatureSpec::full();
    let rules = PolicyConfig::default().rules;
    let n = spec.state_count();
    let outcome = (|| {
        check(n <= 1 << 20, || {
            format!("{n} states exceed the exhaustive bound")
        })?;
        let (unsafe_picks, needless_danger, dangerous_picks) = (0..n)
            .into_par_iter()
            .map(|id| {
                let facts = spec.state(id).to_facts();
                let a = select_lane_action(&facts, &rules).expect("reference rules are complete");
                let is_unsafe = unsafe_action(&facts, a);
                let is_dangerous = dangerous_action(&facts, a);
                let clean_exists = LaneAction::ALL
                    .iter()
                    .any(|&b| !unsafe_action(&facts, b) && !dangerous_action(&facts, b));
                (
                    u64::from(is_unsafe),
                    u64::from(is_dangerous && clean_exists),
                    u64::from(is_dangerous),
                )
            })
            .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        check(unsafe_picks == 0, || {
            format!("{unsafe_picks} unsafe selections")
        })?;
        check(needless_danger == 0, || {
            format!("{needless_danger} dangerous selections with a clean option")
        })?;
        Ok(format!(
            "{n} states, 0 unsafe, 0 avoidable dangerous ({dangerous_picks} forced dangerous)"
        ))
    })();
    report(3, "exhaustive policy safety", outcome);
}

#[test]
fn criterion_4_mutual_exclusivity() {
    let spec = FeatureSpec::full();
    let rules = PolicyConfig::default().rules;
    let llc = rules.get_by_name("llc_isBetter").unwrap().clone();
    let rlc = rules.get_by_name("rlc_isBetter").unwrap().clone();
    let outcome = (|| {
        let (witnesses, disagreements) = (0..spec.state_count())
            .into_par_iter()
            .map(|id| {
                let f = spec.state(id).to_facts();
                let l = eval_rule(&llc, &f);
                let r = eval_rule(&rlc, &f);
                let l_ref = has(&f, "front_isBusy")
                    && !has(&f, "left_isBusy")
                    && !has(&f, "frontLeft_isBusy");
                let r_ref = has(&f, "front_isBusy")
                    && has(&f, "left_isBusy")
                    && has(&f, "frontLeft_isBusy")
                    && !has(&f, "right_isBusy")
                    && !has(&f, "frontRight_isBusy");
                (u64::from(l && r), u64::from(l != l_ref || r != r_ref))
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        check(disagreements == 0, || {
            format!("{disagreements} states where the rules differ from their reading")
        })?;
        check(witnesses == 0, || {
            format!("{witnesses} states where both hold")
        })?;
        Ok(format!("0 witnesses over {} states", spec.state_count()))
    })();
    report(4, "mutual exclusivity", outcome);
}

#[test]
fn criterion_5_closed_loop_brake() {
    let outcome = (|| {
        let mut parts = Vec::new();
        for v0 in [10.0, 20.0, 30.0] {
            for gap in [20.0, 50.0] {
                let mut sc = Scenario::default();
                sc.episode.track.dt = 0.1;
                sc.episode.ego_speed = v0;
                sc.episode.lane_changes = false;
                sc.episode.max_time = 60.0;
                let ego_len = sc.episode.ego_length;
                let tv = PlacedVehicle::new(gap + (ego_len + 4.5) / 2.0, 2, 0.0);
                sc.traffic = TrafficSource::Fixed { vehicles: vec![tv] };
                sc.episode.ego_lane = Some(2);
                let mut final_gap = f64::NAN;
                let mut min_gap = f64::INFINITY;
                let r = run_episode_observed(&sc, &sc.control, 0, &mut |f| {
                    let ego = f.vehicles.iter().find(|v| v.id == EGO_ID).unwrap();
                    let wall = f.vehicles.iter().find(|v| v.id != EGO_ID).unwrap();
                    final_gap = (wall.x - ego.x).abs() - (wall.length + ego.length) / 2.0;
                    min_gap = min_gap.min(final_gap);
                })
                .map_err(|e| e.to_string())?;
                let v_end = r.trace.last().map_or(f64::NAN, |t| t.v);
                let braked = r.trace.iter().any(|t| t.phase == AccelPhase::Brake);
                check(r.hits == 0 && min_gap > 0.0, || {
                    format!("v0 {v0} gap {gap}: min gap {min_gap:.3}, hits {}", r.hits)
                })?;
                check(v_end == 0.0, || {
                    format!("v0 {v0} gap {gap}: still moving at {v_end}")
                })?;
                check(braked, || {
                    format!("v0 {v0} gap {gap}: never entered the brake phase")
                })?;
                parts.push(format!("{v0}/{gap}: {final_gap:.2} m"));
            }
        }
        Ok(format!(
            "stopped with positive gap in 6/6 ({})",
            parts.join(", ")
        ))
    })();
    report(5, "closed-loop brake", outcome);
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / ((a + b) / 2.0)
}

#[test]
fn criterion_6_end_to_end_simulation() {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let outcome = (|| {
        check(cfg.policy.desired_speed == 120.0 / 3.6, || {
            "desired speed is not 120 km/h".into()
        })?;
        let sc = cfg.scenario();
        let exp = ExperimentConfig {
            episodes: 50,
            directions: Directions::Both,
            ..cfg.experiment.clone()
        };
        let runs = evaluate(&sc, &sc.control, &exp).map_err(|e| e.to_string())?;
        let mut parts = Vec::new();
        for run in &runs {
            let s = run.summary;
            let lc_rate = s.n_lc as f64 / s.episodes as f64;
            let d = run.direction;
            check(s.episodes == 50, || format!("{d}: {} episodes", s.episodes))?;
            check(s.n_hits == 0, || format!("{d}: {} hits", s.n_hits))?;
            check((60.0..=70.0).contains(&s.t_avg), || {
                format!("{d}: T_avg {:.2} s", s.t_avg)
            })?;
            check((0.2..=2.0).contains(&lc_rate), || {
                format!("{d}: {lc_rate:.2} lane changes per episode")
            })?;
            check((s.d_avg - 2100.0).abs() < 1e-6, || {
                format!("{d}: D_avg {:.1}", s.d_avg)
            })?;
            parts.push(format!(
                "{d} T {:.2} s V {:.2} km/h N_LC {} hits {}",
                s.t_avg, s.v_avg, s.n_lc, s.n_hits
            ));
        }
        let (a, b) = (runs[0].summary, runs[1].summary);
        for (name, x, y) in [
            ("T_avg", a.t_avg, b.t_avg),
            ("D_avg", a.d_avg, b.d_avg),
            ("V_avg", a.v_avg, b.v_avg),
        ] {
            let r = rel_diff(x, y);
            check(r <= 0.02, || {
                format!("{name} differs by {:.2}% between directions", r * 100.0)
            })?;
        }
        parts.push(format!(
            "T/D/V within 2% (T {:.2}%, V {:.2}%), N_LC {} vs {}",
            rel_diff(a.t_avg, b.t_avg) * 100.0,
            rel_diff(a.v_avg, b.v_avg) * 100.0,
            a.n_lc,
            b.n_lc
        ));

        let len = sc.episode.track.length;
        let width = sc.episode.track.width();
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let l = run_episode(&sc.with_direction(Direction::L2R), &sc.control, seed)
                .map_err(|e| e.to_string())?;
            let r = run_episode(&sc.with_direction(Direction::R2L), &sc.control, seed)
                .map_err(|e| e.to_string())?;
            check(l.trace.len() == r.trace.len(), || {
                format!("seed {seed}: trace lengths differ")
            })?;
            for (p, q) in l.trace.iter().zip(&r.trace) {
                worst = worst
                    .max((p.x - (len - q.x)).abs())
                    .max((p.y - (width - q.y)).abs())
                    .max((p.v - q.v).abs());
            }
        }
        check(worst <= 1e-9, || format!("mirror deviation {worst:e}"))?;
        parts.push(format!("mirror max deviation {worst:e}"));
        let took = start.elapsed();
        check(took < Duration::from_secs(300), || format!("took {took:?}"))?;
        parts.push(format!("{:.1} s", took.as_secs_f64()));
        Ok(parts.join("; "))
    })();
    report(6, "end-to-end simulation", outcome);
}

#[test]
fn criterion_7_sil_versus_dil() {
    let cfg = RunConfig::default();
    let outcome = (|| {
        let sc = cfg.scenario();
        let rec =
            record_demonstrations(&sc, &sc.control, &cfg.experiment).map_err(|e| e.to_string())?;
        let pairs = extract_pairs(&rec, &cfg.extract());
        let (params, report) = train(&pairs, &cfg.train).map_err(|e| e.to_string())?;
        let mut dil = DilPolicy::new(params, cfg.policy());
        dil.v_max = cfg.extract.v_max;
        let rows = compare(&sc, &[("SIL", &sc.control), ("DIL", &dil)], &cfg.experiment)
            .map_err(|e| e.to_string())?;
        let mut parts = vec![format!(
            "{} pairs, {} epochs",
            pairs.len(),
            report.epoch_losses.len()
        )];
        for d in [Direction::L2R, Direction::R2L] {
            let get = |m: &str| {
                rows.iter()
                    .find(|r| r.method == m && r.direction == d)
                    .unwrap()
                    .summary
            };
            let (s, n) = (get("SIL"), get("DIL"));
            check(s.v_avg >= n.v_avg, || {
                format!("{d}: SIL {:.2} km/h < DIL {:.2} km/h", s.v_avg, n.v_avg)
            })?;
            check(s.n_hits <= n.n_hits, || {
                format!("{d}: SIL hits {} > DIL hits {}", s.n_hits, n.n_hits)
            })?;
            parts.push(format!(
                "{d} V {:.2} vs {:.2} km/h, hits {} vs {}",
                s.v_avg, n.v_avg, s.n_hits, n.n_hits
            ));
        }
        Ok(parts.join("; "))
    })();
    report(7, "SIL vs DIL ordering", outcome);
}

fn random_pairs(n: usize, rng: &mut ChaCha8Rng) -> Vec<StateActionPair> {
    (0..n)
        .map(|_| {
            let mut features = [0.0; 9];
            for f in &mut features {
                *f = rng.gen_range(0.0..=1.0);
            }
            StateActionPair {
                features,
                label: LaneAction::ALL[rng.gen_range(0..3)],
            }
        })
        .collect()
}

#[test]
fn criterion_8_dil_numerics() {
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = MlpParams::init(3);
        let batch = random_pairs(16, &mut rng);
        let (g, _) = gradients(&p, &batch);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let n = p.param_count();
        let probes: Vec<usize> = (0..60)
            .map(|_| rng.gen_range(0..n))
            .chain([0, n - 1, n - 3])
            .collect();
        for k in probes {
            let mut plus = p.clone();
            plus.set(k, p.get(k) + h);
            let mut minus = p.clone();
            minus.set(k, p.get(k) - h);
            let numeric = (batch_loss(&plus, &batch) - batch_loss(&minus, &batch)) / (2.0 * h);
            let analytic = g.get(k);
            worst =
                worst.max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7));
        }
        check(worst < 1e-4, || {
            format!("gradient relative error {worst:e}")
        })?;

        let mut softmax_err: f64 = 0.0;
        for s in random_pairs(1000, &mut rng) {
            let mut x = s.features;
            for v in &mut x {
                *v = (*v - 0.5) * 200.0;
            }
            let probs = forward(&p, &x).map_err(|e| e.to_string())?;
            softmax_err = softmax_err.max((probs.iter().sum::<f64>() - 1.0).abs());
        }
        check(softmax_err <= 1e-12, || {
            format!("softmax sum off by {softmax_err:e}")
        })?;

        let separable: Vec<StateActionPair> = random_pairs(1500, &mut rng)
            .into_iter()
            .map(|mut s| {
                let k = (0..3)
                    .min_by(|&a, &b| s.features[a].total_cmp(&s.features[b]))
                    .unwrap();
                s.label = LaneAction::ALL[k];
                s
            })
            .collect();
        let tc = TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            seed: 21,
            patience: 30,
            ..TrainConfig::default()
        };
        let (pa, ra) = train(&separable, &tc).map_err(|e| e.to_string())?;
        let (first, last) = (ra.epoch_losses[0], *ra.epoch_losses.last().unwrap());
        check(last < 0.5 * first, || {
            format!("loss {first:.4} -> {last:.4}")
        })?;
        let (pb, rb) = train(&separable, &tc).map_err(|e| e.to_string())?;
        let same = pa
            .flat()
            .iter()
            .zip(pb.flat())
            .all(|(a, b)| a.to_bits() == b.to_bits())
            && ra
                .epoch_losses
                .iter()
                .zip(&rb.epoch_losses)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        check(same, || {
            "retraining with the same seed changed the parameters".into()
        })?;
        Ok(format!(
            "grad rel err {worst:.1e}, softmax {softmax_err:.1e}, loss {first:.4} -> {last:.4}, bit-identical rerun"
        ))
    })();
    report(8, "DIL numerics", outcome);
}

/// A rule as clauses of (predicate index, positive) literals.
type RawRule = Vec<Vec<(usize, bool)>>;

fn random_rule(rng: &mut ChaCha8Rng, n: usize) -> RawRule {
    let clauses = rng.gen_range(1..=4);
    let mut rule: RawRule = Vec::new();
    for _ in 0..64 {
        if rule.len() == clauses {
            break;
        }
        let k = rng.gen_range(1..=n.min(5));
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        let mut clause: Vec<(usize, bool)> =
            idx[..k].iter().map(|&i| (i, rng.gen_bool(0.6))).collect();
        clause.sort();
        if !rule.contains(&clause) {
            rule.push(clause);
        }
    }
    rule
}

fn render_raw(rule: &RawRule) -> String {
    let body: Vec<String> = rule
        .iter()
        .map(|c| {
            c.iter()
                .map(|&(i, pos)| {
                    if pos {
                        format!("q{i}")
                    } else {
                        format!("not(q{i})")
                    }
                })
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect();
    format!("target:- {}.", body.join("; "))
}

fn truth_table(rule: &RawRule, mask: u32) -> bool {
    rule.iter()
        .any(|c| c.iter().all(|&(i, pos)| (mask >> i & 1 == 1) == pos))
}

#[test]
fn criterion_9_logic_oracle() {
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0u64;
        for case in 0..1000 {
            let n = rng.gen_range(1..=12);
            let raw = random_rule(&mut rng, n);
            let text = render_raw(&raw);
            let rule = parse_rule(&text).map_err(|e| format!("case {case}: {text}: {e}"))?;
            let rendered = rule.render();
            let again =
                parse_rule(&rendered).map_err(|e| format!("case {case}: {rendered}: {e}"))?;
            check(again == rule && again.render() == rendered, || {
                format!("case {case}: round trip of {text} gave {rendered}")
            })?;
            let preds: Vec<PredicateSymbol> = (0..n)
                .map(|i| PredicateSymbol::new(format!("q{i}")).unwrap())
                .collect();
            for mask in 0..1u32 << n {
                let facts: FactSet = (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| preds[i].clone())
                    .collect();
                let want = truth_table(&raw, mask);
                check(eval_rule(&rule, &facts) == want, || {
                    format!("case {case}: {text} on mask {mask:#b}")
                })?;
                check(eval_rule(&again, &facts) == want, || {
                    format!("case {case}: reparsed {rendered} on mask {mask:#b}")
                })?;
                checked += 1;
            }
        }
        Ok(format!(
            "1000 rules, {checked} fact sets, 0 disagreements, round trip exact"
        ))
    })();
    report(9, "logic oracle equivalence", outcome);
}
