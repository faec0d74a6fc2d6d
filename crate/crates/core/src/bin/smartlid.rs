use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use smartlid::model::{load_config, read_image, Config, GrayImage, Image, PathMode};
use smartlid::planner::{min_speed, motor_feasibility, path_length, plan_for_config, stokes_drag};
use smartlid::runtime::BenchRig;
use smartlid::sim::Scenario;
use smartlid::vision::{analyze_mixing, to_luma};

#[derive(Parser)]
#[command(name = "smartlid", version, about = "Bench tools for the larvae-bin smart lid")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the closed-loop simulator and write log.csv, trace.txt, summary.json and frames/.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's day count.
        #[arg(long)]
        days: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare before/after frames (P5 or P6) and print the mixing report.
    Analyze {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        /// Frame taken after a manual mix from the same starting state.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Plan one aeration pass, print its length and minimum speed, and write the waypoints.
    Plan {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "raster")]
        mode: PathMode,
        /// Waypoint file, one "x y" pair in meters per line.
        #[arg(long, default_value = "waypoints.txt")]
        out: PathBuf,
    },
    /// Print the Stokes drag estimate and the motor feasibility check.
    Size {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Travel speed, m/s.
        #[arg(long, allow_negative_numbers = true)]
        speed: f64,
    },
    /// Run the controller on a simulated bin in real time and serve the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Config::shipped()),
    }
}

fn gray(path: &Path) -> Result<GrayImage> {
    let img = read_image(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(match img {
        Image::Gray(g) => g,
        Image::Color(c) => to_luma(&c)?,
    })
}

fn simulate(scenario: &Path, days: Option<u32>, out: &Path) -> Result<()> {
    let scenario = Scenario::load(scenario)?;
    let days = days.unwrap_or(scenario.days);
    if days == 0 {
        bail!("--days must be at least 1");
    }
    let mut rig = BenchRig::new(scenario);
    rig.run_days(days)?;
    rig.write_outputs(out).with_context(|| format!("writing {}", out.display()))?;
    let s = rig.summary();
    println!("days: {days}");
    println!("aerations started: {}", s.start_aerations);
    println!("faults: {}", s.faults);
    println!("log rows: {}", s.log_rows);
    println!("mass: {:.1} -> {:.1}", s.initial_mass, s.final_mass);
    for (i, a) in s.aerations.iter().enumerate() {
        println!(
            "aeration {i}: {} {} dispersal {:.4} -> {:.4}, swept {:.3}",
            a.start, a.outcome, a.dispersal_before, a.dispersal_after, a.swept_fraction
        );
    }
    println!("outputs: {}", out.display());
    Ok(())
}

fn analyze(before: &Path, after: &Path, baseline: Option<&Path>, cfg: &Config) -> Result<()> {
    let b = gray(before)?;
    let a = gray(after)?;
    let base = baseline.map(gray).transpose()?;
    let r = analyze_mixing(&b, &a, base.as_ref(), cfg.vision.mix_delta, None)?;
    println!("mixed pixels: {}", r.mixed_pixels);
    println!("unmixed pixels: {}", r.unmixed_pixels);
    println!("coverage: {:.3}", r.coverage_fraction);
    if let Some(e) = r.efficacy_ratio {
        println!("efficacy: {e:.3}");
    }
    Ok(())
}

/// Six decimals with trailing zeros dropped, so 0.032 prints as "0.032".
fn trimmed(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn plan(cfg: &Config, mode: PathMode, out: &Path) -> Result<()> {
    if mode == PathMode::Targeted {
        eprintln!("note: no thermal frame given, targeted mode falls back to raster");
    }
    let path = plan_for_config(cfg, mode, None)?;
    std::fs::write(out, path.to_waypoint_text()).with_context(|| format!("writing {}", out.display()))?;
    let len = path_length(&path);
    let budget = cfg.schedule.time_budget_s;
    println!("mode: {mode}");
    println!("waypoints: {}", path.waypoints.len());
    println!("length: {len:.3} m");
    println!("min speed @{budget}s: {} m/s", trimmed(min_speed(len, budget)?));
    println!("waypoint file: {}", out.display());
    Ok(())
}

fn size(cfg: &Config, speed: f64) -> Result<()> {
    let d = stokes_drag(&cfg.rheology, &cfg.spindle, speed)?;
    let f = motor_feasibility(&d, cfg.holding_torque, cfg.planner.safety_factor);
    println!("per-finger {:.3} N, total {:.3} N", d.per_finger_force, d.total_force);
    println!("required torque {:.4} N·m", d.required_torque);
    println!(
        "usable torque {:.4} N·m ({} × {:.4} N·m holding): {}",
        f.usable_torque,
        f.safety_factor,
        f.holding_torque,
        if f.pass { "PASS" } else { "FAIL" }
    );
    Ok(())
}

fn serve(cfg: Config, bind: &str, port: u16, seed: u64) -> Result<()> {
    let addr: SocketAddr = format!("{bind}:{port}").parse().with_context(|| format!("bad bind address {bind:?}"))?;
    let mut scenario = Scenario::reference(seed, 1);
    scenario.config = cfg;
    scenario.start = chrono::Utc::now();
    let rig = BenchRig::new(scenario);
    tokio::runtime::Runtime::new()?.block_on(smartlid::telemetry::serve(rig, addr))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Simulate { scenario, days, out } => simulate(&scenario, days, &out),
        Cmd::Analyze { before, after, baseline, config: c } => {
            analyze(&before, &after, baseline.as_deref(), &config(c.as_deref())?)
        }
        Cmd::Plan { config: c, mode, out } => plan(&config(c.as_deref())?, mode, &out),
        Cmd::Size { config: c, speed } => size(&config(c.as_deref())?, speed),
        Cmd::Serve { config: c, port, bind, seed } => serve(config(c.as_deref())?, &bind, port, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
