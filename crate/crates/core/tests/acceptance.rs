//! Acceptance suite: criteria 1-10, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is always printed.
//! Exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use huegrip_core::cvforce::{
    estimate, extract_contours, filter_and_measure, otsu_threshold, BinaryMask, DecodeInterval,
    ForceEstimate, GrayImage, MIN_CONTOUR_AREA,
};
use huegrip_core::framegen::{byte_hue_to_rgb, render, CameraImage, SceneSpec};
use huegrip_core::gesturenet::{
    generate_synthetic, split_by_user, train, GestureLabel, MlpModel, SyntheticSpec, TrainConfig,
};
use huegrip_core::gripsim::{run_grasp_episode, SensorFrame, SimConfig, TargetKind};
use huegrip_core::huecode::{encode, map_register_to_hue};
use huegrip_core::session::SessionLog;
use huegrip_core::teleop::{
    run_catch_scenario, Actuation, Command, OperatorInput, Phase, ScenarioConfig, ScenarioScript,
    ScriptEvent, SharedClassifier, TeleopConfig,
};
use huegrip_core::FORCE_FULL_SCALE;

const C1_BUDGET: Duration = Duration::from_secs(1);
const C2_BUDGET: Duration = Duration::from_secs(10);
const C4_BUDGET: Duration = Duration::from_secs(30);
const C6_BUDGET: Duration = Duration::from_secs(5);
const C7_BUDGET: Duration = Duration::from_secs(300);
const C8_BUDGET: Duration = Duration::from_secs(10);

/// Fractions of full scale.
const C4_MEAN_TOL: f64 = 0.047;
const C4_FRAME_TOL: f64 = 0.05;
const C6_REL_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
const C6_ABS_FLOOR: f64 = 1e-8;
const C7_MIN_ACCURACY: f64 = 0.98;
const C8_RATIO: f64 = 0.46;
const C8_TOL: f64 = 0.05;

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

fn within(t0: Instant, budget: Duration) -> (bool, String) {
    let e = t0.elapsed();
    (e < budget, format!("{:.2}s/{:.0}s", e.as_secs_f64(), budget.as_secs_f64()))
}

fn frame(fsr: [u16; 3], fsl: [u16; 3]) -> SensorFrame {
    SensorFrame::from_registers(fsr, fsl)
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// LED byte from exact rational arithmetic: the average of the max-FSR hue
/// and the mean-FSL hue, rounded half up.
fn oracle_hue(fsr: [u16; 3], fsl: [u16; 3]) -> u8 {
    let max = i64::from(*fsr.iter().max().unwrap());
    let sum: i64 = fsl.iter().map(|&r| i64::from(r)).sum();
    let x = Ratio::from_integer(45) + Ratio::new(165 * (3 * max + sum), 6 * 4096);
    (x + Ratio::new(1, 2)).floor().to_integer() as u8
}

fn c1_encode() -> Outcome {
    let t0 = Instant::now();
    let mut problems = Vec::new();
    for (r, want) in [(0u16, 45.0), (4096, 210.0), (2048, 127.5)] {
        let got = map_register_to_hue(r).unwrap();
        if (got - want).abs() > f64::EPSILON * want {
            problems.push(format!("map({r})={got}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut oracle_miss, mut mono, mut perm) = (0, 0, 0);
    for _ in 0..10_000 {
        let fsr: [u16; 3] = std::array::from_fn(|_| rng.random_range(0..=4096));
        let fsl: [u16; 3] = std::array::from_fn(|_| rng.random_range(0..=4096));
        let base = encode(&frame(fsr, fsl)).unwrap();
        if base.hue != oracle_hue(fsr, fsl) {
            oracle_miss += 1;
        }

        let (mut fsr2, mut fsl2) = (fsr, fsl);
        let finger = rng.random_range(0..3);
        let bump = rng.random_range(0..=4096u16);
        let reg = if rng.random_bool(0.5) { &mut fsr2 } else { &mut fsl2 };
        reg[finger] = reg[finger].saturating_add(bump).min(4096);
        let up = encode(&frame(fsr2, fsl2)).unwrap();
        if up.hue < base.hue || up.exact_hue() < base.exact_hue() {
            mono += 1;
        }

        for p in PERMS {
            for q in PERMS {
                let c = encode(&frame(p.map(|i| fsr[i]), q.map(|i| fsl[i]))).unwrap();
                if c != base {
                    perm += 1;
                }
            }
        }
    }
    let (fast, time) = within(t0, C1_BUDGET);
    let pass = problems.is_empty() && oracle_miss == 0 && mono == 0 && perm == 0 && fast;
    outcome(
        pass,
        format!(
            "anchors {} | 10000 frames: oracle mismatches {oracle_miss}, monotonicity {mono}, permutation {perm} | {time}",
            if problems.is_empty() { "exact".into() } else { problems.join(", ") }
        ),
    )
}

/// Brute-force argmin of within-class variance, lowest threshold on ties.
/// Returns `None` for single-level images.
fn oracle_otsu(data: &[u8]) -> Option<u8> {
    let total = data.len() as i128;
    let q: i128 = data.iter().map(|&v| i128::from(v) * i128::from(v)).sum();
    let mut best: Option<(Ratio<i128>, u8)> = None;
    for t in 0..=255u8 {
        let (mut n0, mut s0, mut s1) = (0i128, 0i128, 0i128);
        for &v in data {
            if v <= t {
                n0 += 1;
                s0 += i128::from(v);
            } else {
                s1 += i128::from(v);
            }
        }
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let within = Ratio::from_integer(q) - Ratio::new(s0 * s0, n0) - Ratio::new(s1 * s1, n1);
        if best.as_ref().is_none_or(|(b, _)| within < *b) {
            best = Some((within, t));
        }
    }
    best.map(|(_, t)| t)
}

fn random_gray(rng: &mut ChaCha8Rng, i: usize) -> Vec<u8> {
    let n = 32 * 32;
    match i % 4 {
        0 => {
            let k = rng.random_range(1..=4);
            let levels: Vec<u8> = (0..k).map(|_| rng.random()).collect();
            (0..n).map(|_| levels[rng.random_range(0..k)]).collect()
        }
        1 => {
            let (a, b): (u8, u8) = (rng.random_range(0..128), rng.random_range(128..=255));
            (0..n)
                .map(|_| {
                    let c = if rng.random_bool(0.5) { a } else { b };
                    c.saturating_add(rng.random_range(0..16))
                })
                .collect()
        }
        _ => (0..n).map(|_| rng.random()).collect(),
    }
}

fn c2_otsu() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut mismatches = 0;
    let mut degenerate = 0;
    for i in 0..1000 {
        let data = random_gray(&mut rng, i);
        let fast = otsu_threshold(&GrayImage {
            width: 32,
            height: 32,
            data: data.clone(),
        })
        .unwrap();
        let ok = match oracle_otsu(&data) {
            Some(t) => {
                !fast.degenerate
                    && fast.threshold == t
                    && fast.mask.bits.iter().zip(&data).all(|(&m, &v)| m == (v > t))
            }
            None => {
                degenerate += 1;
                fast.degenerate && fast.threshold == data[0] && fast.mask.foreground_count() == 0
            }
        };
        if !ok {
            mismatches += 1;
        }
    }
    let (fast, time) = within(t0, C2_BUDGET);
    outcome(
        mismatches == 0 && fast,
        format!("1000 images ({degenerate} single-level): {mismatches} mismatches | {time}"),
    )
}

/// A mask holding one connected block of exactly `n` pixels, 100 per row.
fn block_mask(n: usize) -> BinaryMask {
    let mut m = BinaryMask::empty(200, 120);
    for k in 0..n {
        let (x, y) = (k % 100, k / 100);
        m.bits[y * 200 + x] = true;
    }
    m
}

/// Component count by union-find over 8-neighbourhoods.
fn oracle_components(m: &BinaryMask) -> usize {
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let (w, h) = (m.width as usize, m.height as usize);
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h {
        for x in 0..w {
            if !m.bits[y * w + x] {
                continue;
            }
            for (dx, dy) in [(1i64, 0i64), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if m.bits[j] {
                    let (a, b) = (find(&mut parent, y * w + x), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
    }
    (0..w * h)
        .filter(|&i| m.bits[i] && find(&mut parent, i) == i)
        .count()
}

fn c3_contours() -> Outcome {
    let image = CameraImage::filled(200, 120, byte_hue_to_rgb(128, 255, 255));
    let survives = |n: usize| filter_and_measure(&extract_contours(&block_mask(n)), &image).map(|c| c.area);
    let boundary = [
        (MIN_CONTOUR_AREA - 1, survives(MIN_CONTOUR_AREA - 1)),
        (MIN_CONTOUR_AREA, survives(MIN_CONTOUR_AREA)),
        (MIN_CONTOUR_AREA + 1, survives(MIN_CONTOUR_AREA + 1)),
    ];
    let boundary_ok = boundary[0].1.is_none()
        && boundary[1].1.is_none()
        && boundary[2].1 == Some(MIN_CONTOUR_AREA + 1);

    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut bad = 0;
    for _ in 0..1000 {
        let (w, h) = (rng.random_range(1..=64u32), rng.random_range(1..=64u32));
        let p: f64 = rng.random_range(0.05..0.95);
        let mut m = BinaryMask::empty(w, h);
        m.bits.iter_mut().for_each(|b| *b = rng.random_bool(p));
        let contours = extract_contours(&m);
        let area_sum: usize = contours.iter().map(|c| c.area).sum();
        let mut seen = HashSet::new();
        let members_ok = contours.iter().all(|c| {
            c.area == c.pixels.len()
                && c.pixels.iter().all(|&i| m.bits[i as usize] && seen.insert(i))
        });
        if area_sum != m.foreground_count() || !members_ok || contours.len() != oracle_components(&m) {
            bad += 1;
        }
    }
    let fmt = |(n, s): (usize, Option<usize>)| format!("{n}:{}", if s.is_some() { "kept" } else { "rejected" });
    outcome(
        boundary_ok && bad == 0,
        format!(
            "{} | 1000 fuzzed masks: {bad} with area/partition/component mismatch",
            boundary.map(fmt).join(" ")
        ),
    )
}

fn c4_round_trip() -> Outcome {
    let t0 = Instant::now();
    let interval = DecodeInterval::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut errors = Vec::with_capacity(200);
    let mut invalid = 0;
    for i in 0..200u32 {
        let r = (4096 * i / 199) as u16;
        let jitter = |rng: &mut ChaCha8Rng| r.saturating_sub(rng.random_range(0..=r.min(64)));
        let fsr = [r, jitter(&mut rng), jitter(&mut rng)];
        let fsl = [r; 3];
        let cmd = encode(&frame(fsr, fsl)).unwrap();
        let spec = SceneSpec {
            led_hue: cmd.hue,
            ..SceneSpec::default()
        };
        let est = estimate(&render(&spec, u64::from(i)).unwrap(), &interval).unwrap();
        if !est.valid {
            invalid += 1;
            errors.push(1.0);
            continue;
        }
        errors.push((est.force - cmd.scale_force()).abs() / FORCE_FULL_SCALE);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let max = errors.iter().cloned().fold(0.0, f64::max);
    let (fast, time) = within(t0, C4_BUDGET);
    outcome(
        invalid == 0 && mean <= C4_MEAN_TOL && max <= C4_FRAME_TOL && fast,
        format!(
            "200 frames: mean error {:.2}% (<= {:.1}%), max {:.2}% (<= {:.0}%), invalid {invalid} | {time}",
            100.0 * mean,
            100.0 * C4_MEAN_TOL,
            100.0 * max,
            100.0 * C4_FRAME_TOL
        ),
    )
}

/// Mean absolute force error at one occlusion level. A frame with no
/// surviving blob counts as a full-scale error.
fn occlusion_error(occlusion: f64, frames: usize) -> (f64, usize) {
    let interval = DecodeInterval::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut total = 0.0;
    let mut invalid = 0;
    for i in 0..frames {
        let r: u16 = rng.random_range(0..=4096);
        let radius: f64 = rng.random_range(45.0..70.0);
        let cmd = encode(&frame([r; 3], [r; 3])).unwrap();
        let spec = SceneSpec {
            led_hue: cmd.hue,
            blob_radius: radius,
            noise_amplitude: 8,
            occlusion_factor: occlusion,
            ..SceneSpec::default()
        };
        let est = estimate(&render(&spec, i as u64).unwrap(), &interval).unwrap();
        total += if est.is_usable() {
            (est.force - cmd.scale_force()).abs()
        } else {
            invalid += 1;
            FORCE_FULL_SCALE
        };
    }
    (total / frames as f64, invalid)
}

fn c5_occlusion() -> Outcome {
    let grid = [0.0, 0.25, 0.5];
    let results: Vec<(f64, usize)> = grid.iter().map(|&o| occlusion_error(o, 100)).collect();
    let errs: Vec<f64> = results.iter().map(|r| r.0).collect();
    let finite = errs.iter().all(|e| e.is_finite());
    let monotone = errs.windows(2).all(|w| w[1] >= w[0]);
    let degrades = errs[2] > errs[0];
    let detail = grid
        .iter()
        .zip(&results)
        .map(|(o, (e, n))| format!("occ {o}: {:.2}% ({n} invalid)", 100.0 * e / FORCE_FULL_SCALE))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(finite && monotone && degrades, format!("noise 8, 100 frames each: {detail}"))
}

fn c6_gradients() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for pair in 0..50u64 {
        let model = MlpModel::random(1000 + pair);
        let angles: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..=180.0));
        let label = GestureLabel::ALL[rng.random_range(0..8)];
        let analytic = model.gradients(&angles, label).flat();
        for (k, &a) in analytic.iter().enumerate() {
            let loss_at = |offset: f64| {
                let mut m = model.clone();
                *m.params_mut().nth(k).unwrap() += offset;
                m.loss(&angles, label)
            };
            // Fourth-order central difference.
            let numeric = (loss_at(-2.0 * h) - 8.0 * loss_at(-h) + 8.0 * loss_at(h) - loss_at(2.0 * h)) / (12.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(C6_ABS_FLOOR);
            worst = worst.max(rel);
            if rel > C6_REL_TOL {
                failures += 1;
            }
        }
    }
    let (fast, time) = within(t0, C6_BUDGET);
    outcome(
        failures == 0 && fast,
        format!("50 pairs: worst relative error {worst:.2e} (<= {C6_REL_TOL:e}), {failures} over | {time}"),
    )
}

fn c7_training() -> Outcome {
    let t0 = Instant::now();
    let spec = SyntheticSpec::default();
    let data = generate_synthetic(&spec, 7).unwrap();
    let (train_set, heldout) = split_by_user(&data, &spec, 4);
    let out = train(&train_set, &heldout, &TrainConfig::default()).unwrap();
    let first = out.curve.first().map_or(0.0, |c| c.accuracy);
    let last = out.curve.last().map_or(0.0, |c| c.accuracy);
    let (fast, time) = within(t0, C7_BUDGET);
    outcome(
        out.curve.len() == 10 && last >= C7_MIN_ACCURACY && last >= first && fast,
        format!(
            "{} train / {} held-out samples, {} checkpoints: {:.2}% -> {:.2}% | {time}",
            train_set.len(),
            heldout.len(),
            out.curve.len(),
            100.0 * first,
            100.0 * last
        ),
    )
}

/// Steady-state grip force of a fully inflated finger against a target,
/// treating finger and target as springs in series.
fn steady_state_force(cfg: &SimConfig, k_target: f64) -> f64 {
    let gap = cfg.open_radius_m - cfg.target_radius_m;
    let overlap = cfg.finger_travel_m * cfg.supply_pressure_kpa / cfg.full_curl_pressure_kpa - gap;
    let kf = cfg.finger_stiffness_n_per_m;
    k_target * kf / (k_target + kf) * overlap
}

fn c8_ratio() -> Outcome {
    let t0 = Instant::now();
    let cfg = SimConfig::default();
    let soft = run_grasp_episode(&cfg.target(TargetKind::Soft), 5.0, &cfg, 0).unwrap();
    let rigid = run_grasp_episode(&cfg.target(TargetKind::Rigid), 5.0, &cfg, 0).unwrap();
    let ratio = soft.mean_hold_force / rigid.mean_hold_force;
    let oracle = steady_state_force(&cfg, cfg.soft_stiffness_n_per_m)
        / steady_state_force(&cfg, cfg.rigid_stiffness_n_per_m);
    let (fast, time) = within(t0, C8_BUDGET);
    let agrees = (ratio - oracle).abs() < 0.01;
    outcome(
        (ratio - C8_RATIO).abs() <= C8_TOL && agrees && fast,
        format!(
            "soft {:.3} N / rigid {:.3} N = {ratio:.3} ({:.1}% lower; closed form {oracle:.3}) | {time}",
            soft.mean_hold_force,
            rigid.mean_hold_force,
            100.0 * (1.0 - ratio)
        ),
    )
}

fn random_command(rng: &mut ChaCha8Rng) -> Command {
    match rng.random_range(0..8) {
        0 => Command::ArmMove {
            direction: std::array::from_fn(|_| rng.random_range(-1.0..=1.0)),
        },
        1 => Command::GraspStart,
        2 => Command::GraspHold,
        3 => Command::Release,
        4 => Command::EmergencyVent,
        5 => Command::Confirm,
        6 => Command::ToggleVerbosity,
        _ => Command::NoOp,
    }
}

fn random_estimate(rng: &mut ChaCha8Rng) -> ForceEstimate {
    match rng.random_range(0..10) {
        0..=3 => ForceEstimate::invalid(),
        4 => ForceEstimate {
            force: [f64::NAN, f64::INFINITY, -1.0, 7.5][rng.random_range(0..4)],
            camera_hue: Some(0.0),
            contour_area: 6000,
            valid: true,
        },
        _ => ForceEstimate {
            force: rng.random_range(0.0..=FORCE_FULL_SCALE),
            camera_hue: Some(90.0),
            contour_area: 6000,
            valid: true,
        },
    }
}

fn c9_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    let mut violations = 0;
    let mut checked = 0u64;
    let mut over_ticks = 0u64;
    for _ in 0..10_000 {
        let cfg = TeleopConfig {
            safety_limit: rng.random_range(0.05..=FORCE_FULL_SCALE),
            grasp_settle_ticks: rng.random_range(1..50),
            release_ticks: rng.random_range(1..50),
            ..TeleopConfig::default()
        };
        let mut state = cfg.initial_state();
        state.phase = Phase::ALL[rng.random_range(0..Phase::ALL.len())];
        let mut latched: Option<f64> = None;
        for _ in 0..rng.random_range(1..=60) {
            let est = random_estimate(&mut rng);
            if est.valid && est.force.is_finite() && (0.0..=FORCE_FULL_SCALE).contains(&est.force) {
                latched = Some(est.force);
            }
            let (next, act) = cfg.tick(&state, random_command(&mut rng), &est);
            checked += 1;
            if latched.is_some_and(|f| f > cfg.safety_limit) {
                over_ticks += 1;
                if act != Actuation::EmergencyVent || next.phase != Phase::Fault {
                    violations += 1;
                }
            }
            state = next;
        }
    }
    outcome(
        violations == 0 && over_ticks > 0,
        format!("10000 streams, {checked} ticks, {over_ticks} over limit: {violations} violations"),
    )
}

fn glove_script() -> ScenarioScript {
    let glove = |tick, label: GestureLabel| ScriptEvent {
        tick,
        input: OperatorInput::GloveSample {
            angles: label.prototype(),
        },
    };
    ScenarioScript {
        duration_ticks: 600,
        events: vec![
            glove(3, GestureLabel::Gun),
            glove(10, GestureLabel::Ok),
            glove(30, GestureLabel::Fist),
            glove(400, GestureLabel::Palm),
        ],
    }
}

fn c10_determinism() -> Outcome {
    let classifier: SharedClassifier = std::sync::Arc::new(huegrip_core::gesturenet::PrototypeClassifier);
    let noisy = ScenarioConfig {
        target: TargetKind::Rigid,
        scene: SceneSpec {
            noise_amplitude: 8,
            ..SceneSpec::default()
        },
        seed: 99,
        ..ScenarioConfig::default()
    };
    let tight = ScenarioConfig {
        teleop: TeleopConfig {
            safety_limit: 0.5,
            ..TeleopConfig::default()
        },
        seed: 3,
        ..ScenarioConfig::default()
    };
    let cases: Vec<(&str, ScenarioScript, ScenarioConfig, Option<SharedClassifier>)> = vec![
        ("default", ScenarioScript::default_catch(), ScenarioConfig::default(), None),
        ("rigid+noise", ScenarioScript::default_catch(), noisy, None),
        ("fault", ScenarioScript::default_catch(), tight, None),
        ("glove", glove_script(), ScenarioConfig::default(), Some(classifier)),
    ];
    let mut differing = Vec::new();
    let mut total_bytes = 0;
    for (name, script, cfg, cls) in cases {
        let run = || -> Vec<u8> {
            run_catch_scenario(&script, &cfg, cls.clone())
                .and_then(|log: SessionLog| log.to_jsonl())
                .unwrap()
        };
        let (a, b) = (run(), run());
        total_bytes += a.len();
        if a != b || a.is_empty() {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "4 scenarios run twice ({total_bytes} log bytes each pass): {}",
            if differing.is_empty() { "byte-identical".to_string() } else { format!("differ: {differing:?}") }
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("encode exactness", c1_encode),
        ("otsu oracle equivalence", c2_otsu),
        ("contour filter boundary", c3_contours),
        ("round-trip force precision", c4_round_trip),
        ("occlusion degradation", c5_occlusion),
        ("gradient check", c6_gradients),
        ("training reproduction", c7_training),
        ("soft/rigid force ratio", c8_ratio),
        ("safety interlock", c9_safety),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
