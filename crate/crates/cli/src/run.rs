use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracing::info;

use safer_core::SaferConfig;
use safer_dist::{run_worker, serve_trainer, ServerConfig, WorkerConfig};
use safer_harness::bench::{bench_search, standard_fixtures};
use safer_harness::scenario::builtin;
use safer_harness::training::{continue_training, train_offline, TrainingLog};
use safer_harness::trials::{run_trials, write_csv};
use safer_harness::validate::{measure_candidate_cost, validate_config, Severity, TimingEstimate};
use safer_harness::{LoadedScenario, SimOptions};
use safer_rl::{policy_forward, Checkpoint, Observation, PolicyMode, PolicySnapshot, PolicyStore, Trainer, OBS_DIM};
use safer_teleop::{replay, serve_teleop, Bridge, BridgeOptions, Tape, TeleopConfig};

use crate::cli::{
    BenchArgs, Cli, Command, EvalArgs, ReplayArgs, ServerArgs, TeleopArgs, TrainArgs, ValidateArgs, WorkerArgs,
};
use crate::config;

/// A scenario file path, or the name of a bundled scenario.
pub fn resolve_scenario(arg: &str) -> Result<LoadedScenario> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(LoadedScenario::load(path)?);
    }
    builtin(arg).with_context(|| format!("{arg:?} is neither a scenario file nor a bundled scenario"))
}

pub fn load_policy(path: &Path) -> Result<PolicyStore> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok(PolicyStore::new(PolicySnapshot {
        version: ck.actor_version,
        actor: ck.actor()?,
    }))
}

fn optional_policy(path: Option<&Path>) -> Result<Option<PolicyStore>> {
    path.map(load_policy).transpose()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg_path = cli.config.config.as_deref();
    let overrides = &cli.config.overrides;
    if let Command::ValidateConfig(args) = &cli.command {
        return validate(config::load_unchecked(cfg_path, overrides)?, args);
    }
    let cfg = config::load(cfg_path, overrides)?;
    match cli.command {
        Command::Eval(a) => eval(&cfg, a),
        Command::Train(a) => train(&cfg, a),
        Command::TrainServer(a) => runtime()?.block_on(train_server(cfg, a)),
        Command::Worker(a) => worker(cfg, a),
        Command::Bench(a) => bench(&cfg, a),
        Command::Teleop(a) => runtime()?.block_on(teleop(cfg, a)),
        Command::Replay(a) => replay_tape(cfg, a),
        Command::ValidateConfig(_) => unreachable!("handled above"),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn eval(cfg: &SaferConfig, a: EvalArgs) -> Result<()> {
    let scenario = resolve_scenario(&a.scenario)?;
    let policy = optional_policy(a.checkpoint.as_deref())?;
    let trials = a.trials.unwrap_or(scenario.scenario.trials);
    let options = if a.no_timing { SimOptions::untimed() } else { SimOptions::default() };
    let mut rows = Vec::new();
    for method in a.method {
        let report = run_trials(method, &scenario, cfg, trials, a.seed, policy.as_ref(), options)?;
        info!(
            %method,
            successes = report.row.successes,
            collisions = report.row.collisions,
            braking_rate = report.extras.braking_rate(report.row.max_braking),
            "trials done"
        );
        rows.push(report.row);
    }
    write_csv(output(a.out.as_deref())?, &rows)?;
    Ok(())
}

fn log_progress(log: &TrainingLog) {
    if log.episodes % 25 == 0 {
        info!(
            episodes = log.episodes,
            env_steps = log.env_steps,
            experiences = log.experiences,
            updates = log.updates,
            "training"
        );
    }
}

fn train(cfg: &SaferConfig, a: TrainArgs) -> Result<()> {
    let scenarios = a.scenario.iter().map(|s| resolve_scenario(s)).collect::<Result<Vec<_>>>()?;
    let started = Instant::now();
    let (trainer, _, log) = match &a.resume {
        Some(p) => {
            let trainer = Trainer::from_checkpoint(&Checkpoint::load(p)?, cfg.schedule)?;
            continue_training(trainer, cfg, &scenarios, a.steps, a.seed, log_progress)?
        }
        None => train_offline(cfg, &scenarios, a.steps, a.seed, log_progress)?,
    };
    trainer.checkpoint().save(&a.out)?;
    eprintln!(
        "trained {} env steps over {} episodes ({} experiences, {} updates) in {:.0} s -> {}",
        log.env_steps,
        log.episodes,
        log.experiences,
        log.updates,
        started.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}

async fn train_server(mut cfg: SaferConfig, a: ServerArgs) -> Result<()> {
    if let Some(n) = a.publish_every {
        cfg.schedule.publish_every = n;
    }
    if let Some(n) = a.warmup {
        cfg.schedule.warmup = n;
    }
    if let Some(x) = a.updates_per_experience {
        cfg.schedule.updates_per_experience = x;
    }
    cfg.validate()?;
    let trainer = match &a.resume {
        Some(p) => Trainer::from_checkpoint(&Checkpoint::load(p)?, cfg.schedule)?,
        None => Trainer::new(OBS_DIM, cfg.sac.clone(), cfg.schedule)?,
    };
    let server = ServerConfig {
        lockstep_workers: a.lockstep,
        checkpoint_dir: a.checkpoint_dir.clone(),
        checkpoint_every: a.checkpoint_every,
        ..ServerConfig::default()
    };
    let summary = serve_trainer(&a.bind, trainer, server, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    let s = summary.stats;
    eprintln!(
        "server stopped at step {} version {} after {} batches ({} experiences)",
        s.step, s.version, s.batches, s.experiences
    );
    Ok(())
}

fn worker(cfg: SaferConfig, a: WorkerArgs) -> Result<()> {
    let scenario = resolve_scenario(&a.scenario)?;
    if a.offline {
        let Some(out) = &a.out else {
            bail!("--offline needs --out for the trained checkpoint");
        };
        let steps = a.max_steps.unwrap_or(a.episodes * cfg.schedule.max_steps);
        let scenarios = [scenario];
        let (trainer, _, log) = match &a.policy {
            Some(p) => {
                let trainer = Trainer::from_checkpoint(&Checkpoint::load(p)?, cfg.schedule)?;
                continue_training(trainer, &cfg, &scenarios, steps, a.seed, log_progress)?
            }
            None => train_offline(&cfg, &scenarios, steps, a.seed, log_progress)?,
        };
        trainer.checkpoint().save(out)?;
        eprintln!("offline worker: {} episodes, {} env steps -> {}", log.episodes, log.env_steps, out.display());
        return Ok(());
    }
    if a.policy.is_some() {
        bail!("--policy only applies with --offline; online workers take the server's actor");
    }
    let mut wc = WorkerConfig::new(a.server, a.id, scenario, cfg);
    wc.seed = a.seed;
    wc.episodes = a.episodes;
    wc.max_env_steps = a.max_steps;
    wc.batch_cycles = a.batch_cycles;
    wc.lockstep = a.lockstep;
    let summary = runtime()?.block_on(run_worker(wc))?;
    eprintln!(
        "worker {}: {} episodes, {} env steps, {} batches ({} acknowledged), final actor version {}",
        summary.worker_id,
        summary.episodes,
        summary.env_steps,
        summary.batches,
        summary.batches_acked,
        summary.final_version
    );
    Ok(())
}

fn bench(cfg: &SaferConfig, a: BenchArgs) -> Result<()> {
    let report = bench_search(&standard_fixtures(cfg), cfg, a.reps)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    println!("fixture  standard(n)  focused(n)  standard(ms)  focused(ms)");
    for (i, f) in report.fixtures.iter().enumerate() {
        println!(
            "{i:>7}  {:>11}  {:>10}  {:>12.4}  {:>11.4}",
            f.standard_candidates,
            f.focused_candidates,
            f.standard_seconds * 1e3,
            f.focused_seconds * 1e3
        );
    }
    println!("candidates ratio   {:.4}", report.candidates_ratio);
    println!("wall-clock ratio   {:.4}", report.time_ratio);
    println!("search size ratio  {:.4}", report.search_size_ratio);
    println!("window ratio       {:.1}", report.window_ratio);
    println!("gamma/delta        {:.2}", report.granularity_ratio);
    Ok(())
}

async fn teleop(cfg: SaferConfig, a: TeleopArgs) -> Result<()> {
    let scenario = resolve_scenario(&a.scenario)?;
    let policy = optional_policy(a.checkpoint.as_deref())?;
    let options = BridgeOptions {
        timing: false,
        accel_limited_base: !a.instant_base,
    };
    let bridge = Bridge::new(scenario, cfg, a.method, policy, a.seed, options)?;
    let config = TeleopConfig {
        rate_hz: a.rate,
        ..TeleopConfig::default()
    };
    eprintln!("teleop bridge on ws://{}/ws (world at http://{}/world)", a.bind, a.bind);
    let (result, tape) = serve_teleop(a.bind, bridge, config, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    if let Some(p) = &a.record {
        tape.save(p)?;
        eprintln!("recorded {} ticks to {}", tape.ticks, p.display());
    }
    let m = result.metrics;
    eprintln!(
        "session: {} cycles, {} collisions, {} braking activations, {:.3} m/s mean speed",
        m.cycles, m.collisions, m.max_braking_count, m.average_speed
    );
    Ok(())
}

fn replay_tape(cfg: SaferConfig, a: ReplayArgs) -> Result<()> {
    let tape = Tape::load(&a.tape)?;
    let scenario = resolve_scenario(&a.scenario)?;
    let name = scenario.scenario.name.clone();
    let policy = optional_policy(a.checkpoint.as_deref())?;
    let (frames, result) = replay(&tape, scenario, cfg, policy)?;
    if let Some(p) = &a.frames {
        let mut w = output(Some(p))?;
        for f in &frames {
            serde_json::to_writer(&mut w, f)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    let (row, _) = safer_harness::trials::aggregate(tape.method, &name, tape.seed, &[result]);
    write_csv(output(a.out.as_deref())?, &[row])?;
    Ok(())
}

fn validate(cfg: SaferConfig, a: &ValidateArgs) -> Result<()> {
    let timing = if a.measure {
        let actor = match &a.checkpoint {
            Some(p) => Checkpoint::load(p)?.actor()?,
            None => Trainer::new(OBS_DIM, cfg.sac.clone(), cfg.schedule)?.snapshot().actor,
        };
        let obs = Observation(vec![1.0; actor.input_dim()]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let reps = 50;
        let t = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(policy_forward(&actor, &obs, PolicyMode::Deterministic, &mut rng)?);
        }
        Some(TimingEstimate {
            per_candidate_seconds: measure_candidate_cost(&cfg, 2000),
            policy_seconds: t.elapsed().as_secs_f64() / reps as f64,
        })
    } else {
        None
    };
    let report = validate_config(&cfg, timing);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("gamma/delta = {}", report.granularity_ratio);
        if let (Some(est), Some(budget)) = (report.estimated_search_seconds, report.search_budget_seconds) {
            println!("estimated focused search {est:.6} s, budget {budget:.6} s");
        }
        for i in &report.issues {
            let tag = match i.severity {
                Severity::Warning => "warning",
                Severity::Error => "error",
            };
            println!("{tag}: {}: {}", i.key, i.message);
        }
        if report.issues.is_empty() {
            println!("ok");
        }
    }
    if !report.is_ok() {
        bail!("config has errors");
    }
    Ok(())
}
