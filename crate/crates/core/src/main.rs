use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hrcn::allocator::{baseline_uniform, AllocationProblem, Layout, Slot};
use hrcn::harness::{
    compare_allocations, planning_pass, sweep, sweep_csv, write_outputs, ExperimentConfig, ExperimentResult, Policy,
    SweepParam,
};
use hrcn::scenario::{build_schedule, load_scenario, Scenario};
use hrcn::{Error, Result};

#[derive(Parser)]
#[command(name = "hrcn", version, about = "Radar resource allocation and tracking experiments")]
struct Cli {
    /// Scenario TOML file; the built-in default scenario when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Master seed for truth, measurement noise and random allocations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Monte Carlo trials.
    #[arg(long, default_value_t = 100)]
    trials: usize,

    /// Output directory.
    #[arg(long, env = "HRCN_OUT_DIR", default_value = "hrcn-out")]
    out: PathBuf,

    /// Plan allocations on the noise-free information chain instead of the
    /// filter's own predictions.
    #[arg(long)]
    open_loop: bool,

    /// Keep random allocations as drawn, even when they break a constraint.
    #[arg(long)]
    unprojected_random: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one interval and print the allocation and metric.
    Solve {
        /// Fusion interval, 1-based.
        #[arg(long, default_value_t = 1)]
        interval: usize,
    },
    /// Run the full tracking experiment under one policy.
    Simulate {
        #[arg(long, value_enum, default_value_t = Policy::Optimized)]
        policy: Policy,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every policy on common random numbers and tabulate.
    Compare {
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = Policy::ALL.to_vec())]
        policies: Vec<Policy>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Optimized metric over a range of throughput floors or budget scales.
    Sweep {
        #[arg(long, value_enum, default_value_t = SweepParam::Epsilon)]
        param: SweepParam,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 8.0)]
        to: f64,
        #[arg(long, default_value_t = 9)]
        steps: usize,
        #[arg(long, env = "HRCN_OUT_DIR", default_value = "hrcn-out")]
        out: PathBuf,
    },
}

fn load(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => load_scenario(p),
        None => Ok(Scenario::default_scenario()),
    }
}

fn experiment_config(seed: u64, run: &RunArgs, policies: Vec<Policy>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        trials: run.trials,
        master_seed: seed,
        policies,
        project_random: !run.unprojected_random,
        ..ExperimentConfig::default()
    };
    cfg.tracker.closed_loop = !run.open_loop;
    cfg
}

fn print_table(result: &ExperimentResult) {
    println!("run {}  scenario {}", result.run_id, &result.scenario_hash[..16]);
    println!("{:<10} {:>14} {:>14}", "policy", "avg rmse (m)", "mean g");
    for p in &result.policies {
        let mean_g = p.g_values.iter().sum::<f64>() / p.g_values.len() as f64;
        println!("{:<10} {:>14.4} {:>14.6e}", p.policy.name(), p.average_rmse, mean_g);
    }
}

fn solve(scenario: &Scenario, seed: u64, interval: usize) -> Result<()> {
    if interval == 0 || interval > scenario.grid.intervals {
        return Err(Error::Validation(format!(
            "interval must be in 1..={}, got {interval}",
            scenario.grid.intervals
        )));
    }
    let k = interval - 1;
    let schedule = build_schedule(scenario);
    hrcn::allocator::assemble_constraints(scenario, &schedule, k)?;
    let mut cfg = ExperimentConfig { master_seed: seed, ..ExperimentConfig::default() };
    cfg.trials = 1;
    let mut short = scenario.clone();
    short.grid.intervals = interval;
    let plan = planning_pass(&short, &schedule, Policy::Optimized, &cfg)?;
    let priors = &plan.priors[k];
    let z = &plan.allocations[k];
    let problem = AllocationProblem::new(scenario, &schedule, k, priors, cfg.allocator.jitter)?;
    let layout = Layout::new(scenario);
    println!("interval {interval}");
    for idx in 0..layout.dim() {
        let label = match layout.slot(idx) {
            Slot::MmrPower { radar, target } => format!("P[radar {}, target {}] (W)", radar + 1, target + 1),
            Slot::ParDwell { radar, target } => format!("T[radar {}, target {}] (s)", radar + 1, target + 1),
            Slot::CommPower { link } => format!("Pc[link {}] (W)", link + 1),
        };
        println!("  {label:<28} {:.6e}", z[idx]);
    }
    for (j, r) in problem.throughputs(z).iter().enumerate() {
        println!("  throughput[link {}] {r:.6} nats (floor {})", j + 1, scenario.comm.floor(k, j));
    }
    let uniform = problem.objective_g(&baseline_uniform(scenario, &schedule, k)?.0)?;
    println!("g(optimized) {:.9e}", plan.g_values[k]);
    println!("g(uniform)   {uniform:.9e}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let scenario = load(cli.scenario.as_deref())?;
    scenario.validate()?;
    match cli.command {
        Command::Solve { interval } => solve(&scenario, cli.seed, interval),
        Command::Simulate { policy, run } => {
            let cfg = experiment_config(cli.seed, &run, vec![policy]);
            let (result, tracks) = compare_allocations(&scenario, &cfg)?;
            write_outputs(&run.out, &result, &tracks)?;
            print_table(&result);
            Ok(())
        }
        Command::Compare { mut policies, run } => {
            policies.sort();
            policies.dedup();
            let cfg = experiment_config(cli.seed, &run, policies);
            let (result, tracks) = compare_allocations(&scenario, &cfg)?;
            write_outputs(&run.out, &result, &tracks)?;
            print_table(&result);
            Ok(())
        }
        Command::Sweep { param, from, to, steps, out } => {
            if steps == 0 {
                return Err(Error::Validation("sweep needs at least one step".into()));
            }
            let values: Vec<f64> = (0..steps)
                .map(|s| if steps == 1 { from } else { from + (to - from) * s as f64 / (steps - 1) as f64 })
                .collect();
            let cfg = ExperimentConfig { master_seed: cli.seed, ..ExperimentConfig::default() };
            let points = sweep(&scenario, &cfg, param, &values)?;
            std::fs::create_dir_all(&out).map_err(|source| Error::Io { path: out.display().to_string(), source })?;
            let path = out.join("sweep.csv");
            std::fs::write(&path, sweep_csv(param, &points))
                .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            for v in &values {
                let gs: Vec<String> = points
                    .iter()
                    .filter(|p| p.value == *v)
                    .map(|p| p.g_value.map_or("infeasible".into(), |g| format!("{g:.4e}")))
                    .collect();
                println!("{} = {v}: {}", param.name(), gs.join(" "));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
