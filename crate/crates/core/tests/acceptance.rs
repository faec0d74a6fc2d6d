//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test --test acceptance`.

use std::collections::{BTreeMap, VecDeque};
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smartlid::controller::{parse_log, slice_log, AerationPhase, CsvLogger, DailyTime, MemorySink, Mode, Schedule};
use smartlid::kinematics::{belts_to_cartesian, cartesian_to_belts, BeltDelta, CartesianDelta};
use smartlid::model::{utc_from_secs, Config, SensorFrame};
use smartlid::planner::{min_speed, path_length, plan_raster, stokes_drag};
use smartlid::runtime::BenchRig;
use smartlid::sim::Scenario;
use smartlid::trace::phase_sequence;
use smartlid::vision::{connected_components, mix_report, otsu_threshold, Histogram256, Mask};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    check(took < limit, format!("took {took:?}, limit {limit:?}"))
}

fn corexy_round_trip() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let c = CartesianDelta::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        let back = belts_to_cartesian(cartesian_to_belts(c));
        worst = worst.max((back.delta_x - c.delta_x).abs()).max((back.delta_y - c.delta_y).abs());
    }
    check(worst < 1e-12, format!("max error {worst:e}"))?;
    let b = cartesian_to_belts(CartesianDelta::new(1.0, 1.0));
    check(b == BeltDelta { delta_a: 2.0, delta_b: 0.0 }, format!("(1,1) -> {b:?}"))?;
    let c = belts_to_cartesian(BeltDelta { delta_a: 2.0, delta_b: 0.0 });
    check(c == CartesianDelta::new(1.0, 1.0), format!("belts (2,0) -> {c:?}"))?;
    let c = belts_to_cartesian(BeltDelta { delta_a: 1.0, delta_b: 1.0 });
    check(c == CartesianDelta::new(1.0, 0.0), format!("belts (1,1) -> {c:?}"))?;
    within(t0, Duration::from_secs(1))?;
    Ok(format!("10000 deltas, max error {worst:e}"))
}

/// Exhaustive ω₀ω₁(μ₀−μ₁)² over every split, in exact rationals.
fn otsu_oracle(counts: &[u64; 256]) -> Option<u8> {
    let total: u64 = counts.iter().sum();
    let n = BigRational::from_integer(BigInt::from(total));
    let mut best: Option<(u8, BigRational)> = None;
    for t in 0..255usize {
        let n0: u64 = counts[..=t].iter().sum();
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s0: u64 = counts[..=t].iter().enumerate().map(|(i, &c)| i as u64 * c).sum();
        let s1: u64 = counts[t + 1..].iter().enumerate().map(|(i, &c)| (i + t + 1) as u64 * c).sum();
        let r = |v: u64| BigRational::from_integer(BigInt::from(v));
        let w0 = r(n0) / &n;
        let w1 = r(n1) / &n;
        let mu = r(s0) / r(n0) - r(s1) / r(n1);
        let var = w0 * w1 * &mu * &mu;
        if best.as_ref().map_or(true, |(_, b)| var > *b) {
            best = Some((t as u8, var));
        }
    }
    best.map(|(t, _)| t)
}

fn otsu_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..1000 {
        let mut counts = [0u64; 256];
        match i % 4 {
            // dense noise
            0 => counts.iter_mut().for_each(|c| *c = rng.gen_range(0..1000)),
            // a few spikes, where ties are likely
            1 => (0..rng.gen_range(1..6)).for_each(|_| counts[rng.gen_range(0..256)] += rng.gen_range(1..4)),
            // sparse
            2 => counts.iter_mut().for_each(|c| *c = if rng.gen_bool(0.1) { rng.gen_range(0..50) } else { 0 }),
            // bimodal
            _ => {
                let (a, b) = (rng.gen_range(0..128), rng.gen_range(128..256));
                for _ in 0..2000 {
                    let m: i32 = if rng.gen_bool(0.5) { a } else { b };
                    counts[(m + rng.gen_range(-20..=20)).clamp(0, 255) as usize] += 1;
                }
            }
        }
        let got = otsu_threshold(&Histogram256::from_counts(counts)).ok();
        let want = otsu_oracle(&counts);
        check(got == want, format!("histogram {i}: got {got:?}, oracle {want:?}"))?;
    }
    within(t0, Duration::from_secs(5))?;
    Ok("1000/1000 histograms agree".into())
}

/// 8-connected BFS flood fill; components numbered in row-major first-seen
/// order, centroid as (row, col).
fn flood_fill_oracle(m: &Mask) -> Vec<(u64, (f64, f64))> {
    let (w, h) = (m.width, m.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for y0 in 0..h {
        for x0 in 0..w {
            if !m.get(x0, y0) || seen[y0 * w + x0] {
                continue;
            }
            let (mut area, mut sr, mut sc) = (0u64, 0u64, 0u64);
            let mut q = VecDeque::from([(x0, y0)]);
            seen[y0 * w + x0] = true;
            while let Some((x, y)) = q.pop_front() {
                area += 1;
                sr += y as u64;
                sc += x as u64;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if m.get(nx, ny) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            q.push_back((nx, ny));
                        }
                    }
                }
            }
            out.push((area, (sr as f64 / area as f64, sc as f64 / area as f64)));
        }
    }
    out
}

fn components_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..200 {
        let fill = 0.05 + 0.55 * (i as f64 / 199.0);
        let bits: Vec<bool> = (0..64 * 64).map(|_| rng.gen_bool(fill)).collect();
        let m = Mask { width: 64, height: 64, data: bits };
        let (_, cs) = connected_components(&m);
        let got: Vec<(u64, (f64, f64))> = cs.components.iter().map(|c| (c.area, c.centroid)).collect();
        let want = flood_fill_oracle(&m);
        check(got == want, format!("mask {i} (fill {fill:.2}): {} vs {} components", got.len(), want.len()))?;
    }
    within(t0, Duration::from_secs(10))?;
    Ok("200/200 masks agree".into())
}

fn efficacy_metric() -> Outcome {
    let r = mix_report(101_363, 0, Some(149_295)).map_err(|e| e.to_string())?;
    let e = r.efficacy_ratio.ok_or("no efficacy")?;
    check((e - 0.679).abs() <= 0.001, format!("efficacy {e}"))?;
    Ok(format!("efficacy {e:.4}"))
}

fn planner_numbers() -> Outcome {
    let cfg = Config::shipped();
    let len = path_length(&plan_raster(&cfg.bin, cfg.planner.raster_pitch).map_err(|e| e.to_string())?);
    check((len - 1.92).abs() <= 1e-6, format!("raster length {len}"))?;
    let v60 = min_speed(1.92, 60.0).map_err(|e| e.to_string())?;
    check(v60 == 0.032, format!("min_speed(1.92, 60) = {v60}"))?;
    // 0.0032 m/s is a factor of ten slower; it is what a 600 s budget gives.
    check(v60 != 0.0032, "0.032 and 0.0032 should differ")?;
    let v600 = min_speed(1.92, 600.0).map_err(|e| e.to_string())?;
    check((v600 - 0.0032).abs() < 1e-15, format!("min_speed(1.92, 600) = {v600}"))?;
    let exact = BigRational::new(192.into(), 100.into()) / BigRational::from_integer(600.into());
    check(exact == BigRational::new(32.into(), 10_000.into()), "1.92/600 is not exactly 0.0032")?;
    Ok(format!("length {len:.6} m, {v60} m/s @60 s, {v600:.4} m/s @600 s"))
}

fn stokes_sizing() -> Outcome {
    let cfg = Config::shipped();
    check(cfg.rheology.dynamic_viscosity == 250.0 && cfg.spindle.finger_radius == 0.0075, "unexpected shipped rheology")?;
    let d = stokes_drag(&cfg.rheology, &cfg.spindle, 0.032).map_err(|e| e.to_string())?;
    check((d.per_finger_force - 1.131).abs() <= 0.001, format!("per finger {}", d.per_finger_force))?;
    check((d.total_force - 9.048).abs() <= 0.01, format!("total {}", d.total_force))?;
    Ok(format!("per-finger {:.4} N, total {:.4} N", d.per_finger_force, d.total_force))
}

fn closed_loop() -> Outcome {
    let t0 = Instant::now();
    let mut rig = BenchRig::new(Scenario::reference(10, 10));
    rig.run_days(10).map_err(|e| e.to_string())?;
    let starts = rig.trace().iter().filter(|e| e.event.name() == "START_AERATION").count();
    check(starts == 10, format!("{starts} START_AERATION events"))?;
    let a = rig.aerations();
    check(a.len() == 10, format!("{} aerations recorded", a.len()))?;
    for (i, r) in a.iter().enumerate() {
        check(r.outcome == Mode::Idle, format!("aeration {i} ended in {}", r.outcome))?;
        check(
            r.dispersal_after < r.dispersal_before,
            format!("aeration {i}: dispersal {} -> {}", r.dispersal_before, r.dispersal_after),
        )?;
        check(r.swept_fraction >= 0.84, format!("aeration {i}: swept {}", r.swept_fraction))?;
    }
    within(t0, Duration::from_secs(60))?;
    let worst = a.iter().map(|r| r.swept_fraction).fold(1.0, f64::min);
    Ok(format!("10 starts, dispersal down every time, min swept {worst:.3}, {:.1?}", t0.elapsed()))
}

fn scheduler_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fired_days = 0usize;
    for seq in 0..10_000 {
        let sched = Schedule::new(DailyTime::new(11, 0).unwrap(), rng.gen_range(-720..=840));
        let mut t: DateTime<Utc> = Utc.with_ymd_and_hms(2024, 5, 1, 0, 0, 0).unwrap() + chrono::Duration::seconds(rng.gen_range(0..86_400));
        let mut last = None;
        // per local day: (starts, day contains a tick at or after its trigger)
        let mut days: BTreeMap<chrono::NaiveDate, (u32, bool)> = BTreeMap::new();
        for _ in 0..rng.gen_range(1..200) {
            let step = match rng.gen_range(0..3) {
                0 => rng.gen_range(1..120),
                1 => rng.gen_range(60..4 * 3600),
                _ => rng.gen_range(3600..40 * 3600),
            };
            t += chrono::Duration::seconds(step);
            let day = days.entry(sched.local_day(t)).or_default();
            day.1 |= t >= sched.trigger_on_day_of(t);
            if smartlid::controller::schedule_due(&sched, last, t) {
                day.0 += 1;
                last = Some(t);
            }
        }
        for (d, (n, reached)) in days {
            check(n <= 1, format!("sequence {seq}: {n} starts on {d}"))?;
            check(n == reached as u32, format!("sequence {seq}: {d} reached trigger={reached} but {n} starts"))?;
            fired_days += n as usize;
        }
    }
    Ok(format!("10000 sequences, {fired_days} day-starts, never twice"))
}

fn log_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut log = CsvLogger::new(MemorySink::default()).map_err(|e| e.to_string())?;
    let mut t = 1_714_521_600i64;
    let mut frames = Vec::new();
    for _ in 0..1000 {
        t += rng.gen_range(0..900);
        let f = smartlid::controller::log::quantize(&SensorFrame {
            timestamp: t,
            temperature: rng.gen_range(10.0..50.0),
            humidity: rng.gen_range(0.0..100.0),
            moisture: rng.gen_range(0.0..1.0),
            ph: rng.gen_range(4.0..10.0),
            co2: rng.gen_range(300.0..8000.0),
            no2: rng.gen_range(0.0..2.0),
        });
        log.log_frame(&f, Mode::Idle).map_err(|e| e.to_string())?;
        frames.push(f);
    }
    let text = log.sink().text.clone();
    let back: Vec<SensorFrame> = parse_log(&text).map_err(|e| e.to_string())?.into_iter().map(|(f, _)| f).collect();
    check(back == frames, "parsed frames differ from logged frames")?;
    for trial in 0..50 {
        let mut cuts: Vec<i64> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(frames[0].timestamp..=t + 1)).collect();
        cuts.sort();
        let bounds: Vec<Option<DateTime<Utc>>> = std::iter::once(None)
            .chain(cuts.into_iter().map(|c| Some(utc_from_secs(c))))
            .chain(std::iter::once(None))
            .collect();
        let joined: String = bounds.windows(2).map(|w| slice_log(&text, w[0], w[1])).collect();
        check(joined == text, format!("window trial {trial} is not byte-exact"))?;
    }
    Ok("1000 frames round-trip, 50 window splits byte-exact".into())
}

fn aeration_sequence() -> Outcome {
    use AerationPhase::*;
    let mut rig = BenchRig::new(Scenario::reference(4, 2));
    rig.run_days(2).map_err(|e| e.to_string())?;
    let phases = phase_sequence(rig.trace());
    let cycle = [Homing, Plunging, Mixing, Retracting, Returning];
    check(phases.len() == 10 && phases.chunks(5).all(|c| c == cycle), format!("phases {phases:?}"))?;
    let names: Vec<&str> = rig.trace().iter().map(|e| e.event.name()).collect();
    for w in names.windows(2).filter(|w| w[1] == "HOME") {
        check(w[0] == "END_STOP", "HOME without a preceding END_STOP")?;
    }

    let text = "seed = 2\ndays = 1\n[fault]\nend_stop_fail_at = \"2024-05-01T11:00:20Z\"\n";
    let sc = Scenario::parse(text, std::path::Path::new(".")).map_err(|e| e.to_string())?;
    let timeout = sc.config.schedule.end_stop_timeout_s;
    let mut rig = BenchRig::new(sc);
    rig.run_days(1).map_err(|e| e.to_string())?;
    check(rig.controller.mode() == Mode::Fault, format!("mode {} after injected failure", rig.controller.mode()))?;
    let entered = rig
        .trace()
        .iter()
        .filter(|e| matches!(e.event, smartlid::trace::Event::Phase(Returning)))
        .map(|e| e.t)
        .last()
        .ok_or("never reached RETURNING")?;
    let fault = rig.trace().iter().find(|e| e.event.name() == "FAULT").map(|e| e.t).ok_or("no FAULT event")?;
    check(fault - entered <= timeout + 1.0, format!("FAULT {:.1} s after RETURNING, timeout {timeout} s", fault - entered))?;
    Ok(format!("2 nominal cycles in order, FAULT {:.0} s into RETURNING (timeout {timeout} s)", fault - entered))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("corexy round trip", corexy_round_trip),
        ("otsu oracle equivalence", otsu_equivalence),
        ("connected components oracle equivalence", components_equivalence),
        ("mixing efficacy metric", efficacy_metric),
        ("planner length and minimum speed", planner_numbers),
        ("stokes drag sizing", stokes_sizing),
        ("ten-day closed loop", closed_loop),
        ("scheduler once per day", scheduler_fuzz),
        ("sensor log round trip and windows", log_round_trip),
        ("aeration phase order and end-stop fault", aeration_sequence),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
