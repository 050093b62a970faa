use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use fefet_sim::checkpoint::{load_checkpoint, save_checkpoint};
use fefet_sim::config::{parse_csv_list, RunConfig};
use fefet_sim::data::{load_mnist_dir, Dataset};
use fefet_sim::device::{
    id_vg_curve, channel_conductance, DeviceInstance, GateStackId, MemoryState, OperatingPoint,
};
use fefet_sim::experiments::{
    optimize_read_bias, temperature_sweep, training_fraction_set, BiasMode,
};
use fefet_sim::network::{train, MLPModel};
use fefet_sim::report::{load_report_json, save_report};

/// Fe-FinFET crossbar inference simulator.
#[derive(Parser)]
#[command(name = "fefet-sim", version, about, max_term_width = 100)]
struct Cli {
    /// Run configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for checkpoints, reports and curve data.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override both the training seed and the sweep master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Gate stack preset (GS-I or GS-II).
    #[arg(long, global = true)]
    stack: Option<GateStackId>,

    /// Weight levels per synapse (2 = binary, 4 = multi-level).
    #[arg(long, global = true)]
    levels: Option<u8>,

    /// Comma-separated gate read biases, V (e.g. "0.3,0.5,0.7").
    #[arg(long, global = true)]
    vg: Option<String>,

    /// Comma-separated junction temperatures, K.
    #[arg(long, global = true)]
    temps: Option<String>,

    /// Monte Carlo trials per sweep cell.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Verbose progress output.
    #[arg(short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the software network and write a checkpoint.
    Train,
    /// Dump Id-Vg and G(T) curve data for the programmed states as CSV.
    Characterize,
    /// Map trained weights to hardware and sweep temperature/bias/trials.
    Sweep,
    /// Grid-search the read bias (fixed or per-temperature).
    Optimize {
        /// Selection strategy.
        #[arg(long, default_value = "fixed")]
        mode: String,
    },
    /// Pretty-print the summaries of a saved report.
    Report {
        /// report JSON produced by `sweep` or `optimize`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::parse(path).context("loading config")?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
        cfg.sweep.master_seed = seed;
    }
    if let Some(stack) = cli.stack {
        cfg.sweep.gate_stack = stack;
    }
    if let Some(levels) = cli.levels {
        cfg.train.levels = levels;
    }
    if let Some(vg) = &cli.vg {
        cfg.sweep.vg_read_values =
            parse_csv_list(vg).map_err(|e| anyhow::anyhow!("--vg: {e}"))?;
    }
    if let Some(temps) = &cli.temps {
        cfg.sweep.temperatures =
            parse_csv_list(temps).map_err(|e| anyhow::anyhow!("--temps: {e}"))?;
    }
    if let Some(trials) = cli.trials {
        cfg.sweep.trials = trials;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out_dir = Some(out.clone());
    }
    cfg.validate().context("validating config")?;
    Ok(cfg)
}

fn prepare_out_dir(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output dir {}", out.display()))?;
    std::fs::write(out.join("config_resolved.toml"), cfg.resolved_toml())
        .context("writing resolved config")?;
    Ok(out)
}

fn load_data(cfg: &RunConfig) -> anyhow::Result<(Dataset, Dataset)> {
    let dir = cfg.mnist_dir();
    load_mnist_dir(&dir).with_context(|| {
        format!(
            "loading MNIST from {} (see README for how to obtain the IDX files)",
            dir.display()
        )
    })
}

fn checkpoint_path(out: &std::path::Path, cfg: &RunConfig) -> PathBuf {
    out.join(format!("model_L{}.fxckpt", cfg.train.levels))
}

fn train_model(cfg: &RunConfig, out: &std::path::Path, verbose: u8) -> anyhow::Result<MLPModel> {
    let params = cfg.gate_stack_params(cfg.sweep.gate_stack);
    let fractions = training_fraction_set(&params, cfg.train.levels)?;
    let train_cfg = cfg.train_config(fractions);
    let (train_set, test_set) = load_data(cfg)?;
    let mut model = MLPModel::new(&cfg.train.dims, &train_cfg);
    let started = std::time::Instant::now();
    let history = train(&mut model, &train_set, &test_set, &train_cfg)?;
    if verbose > 0 {
        for (epoch, (loss, acc)) in history
            .train_loss
            .iter()
            .zip(history.test_accuracy.iter())
            .enumerate()
        {
            eprintln!("epoch {:>2}: loss {loss:.5}  test accuracy {acc:.4}", epoch + 1);
        }
    }
    let final_acc = history.test_accuracy.last().copied().unwrap_or(0.0);
    println!(
        "trained L={} in {:.1} s: test accuracy {:.4}",
        cfg.train.levels,
        started.elapsed().as_secs_f64(),
        final_acc
    );
    let path = checkpoint_path(out, cfg);
    save_checkpoint(&model, cfg.train.epochs, &path)?;
    std::fs::write(
        out.join(format!("train_history_L{}.json", cfg.train.levels)),
        serde_json::to_string_pretty(&history)?,
    )?;
    println!("checkpoint written to {}", path.display());
    Ok(model)
}

/// Load the checkpoint for the configured level count, training first if
/// it does not exist yet.
fn load_or_train(cfg: &RunConfig, out: &std::path::Path, verbose: u8) -> anyhow::Result<MLPModel> {
    let path = checkpoint_path(out, cfg);
    if path.exists() {
        let (model, _) = load_checkpoint(&path)?;
        anyhow::ensure!(
            model.levels == cfg.train.levels,
            "checkpoint {} holds an L={} model",
            path.display(),
            model.levels
        );
        Ok(model)
    } else {
        train_model(cfg, out, verbose)
    }
}

fn characterize(cfg: &RunConfig, out: &std::path::Path) -> anyhow::Result<()> {
    let params = cfg.gate_stack_params(cfg.sweep.gate_stack);
    let levels = cfg.train.levels;
    let stack = params.id.to_string().replace('-', "");
    let vg_grid: Vec<f64> = (0..=120).map(|i| i as f64 * 0.01).collect();

    for level in 0..levels {
        let state = MemoryState::new(level, levels)?;
        for &temp in &cfg.sweep.temperatures {
            let curve = id_vg_curve(&params, state, temp, &vg_grid)?;
            let mut csv = String::from("vg_volts,id_amps\n");
            for (vg, id) in curve {
                csv.push_str(&format!("{vg},{id:e}\n"));
            }
            let name = format!("idvg_{stack}_L{levels}_lvl{level}_{temp}K.csv");
            std::fs::write(out.join(name), csv)?;
        }

        // conductance vs temperature at each configured read bias
        let mut csv = String::from("temp_kelvin,vg_volts,g_siemens\n");
        let mut temp = 233.0;
        while temp <= 398.0 + 1e-9 {
            for &vg in &cfg.sweep.vg_read_values {
                let op = OperatingPoint::new(vg, cfg.sweep.vd_read, temp)?;
                let g = channel_conductance(&params, &DeviceInstance::ideal(state), &op)?;
                csv.push_str(&format!("{temp},{vg},{g:e}\n"));
            }
            temp += 5.0;
        }
        std::fs::write(out.join(format!("gch_vs_temp_{stack}_L{levels}_lvl{level}.csv")), csv)?;
    }
    println!("characterization CSVs written to {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    let out = prepare_out_dir(&cfg)?;

    match &cli.command {
        Command::Train => {
            train_model(&cfg, &out, cli.verbose)?;
        }
        Command::Characterize => {
            characterize(&cfg, &out)?;
        }
        Command::Sweep => {
            let model = load_or_train(&cfg, &out, cli.verbose)?;
            let (_, test_set) = load_data(&cfg)?;
            let sweep_cfg = cfg.sweep_config();
            let report = temperature_sweep(&sweep_cfg, &model, &test_set)?;
            save_report(&report, &out, "sweep_report")?;
            print_summaries(&report);
            println!("report written to {}/sweep_report.{{csv,json}}", out.display());
        }
        Command::Optimize { mode } => {
            let mode = match mode.as_str() {
                "fixed" => BiasMode::Fixed,
                "per-temperature" => BiasMode::PerTemperature,
                other => anyhow::bail!("unknown mode '{other}' (fixed | per-temperature)"),
            };
            let model = load_or_train(&cfg, &out, cli.verbose)?;
            let (_, test_set) = load_data(&cfg)?;
            let sweep_cfg = cfg.sweep_config();
            let result = optimize_read_bias(&sweep_cfg, &model, &test_set, mode)?;
            save_report(&result.report, &out, "optimize_report")?;
            std::fs::write(
                out.join("optimize_choice.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "mode": match mode { BiasMode::Fixed => "fixed", BiasMode::PerTemperature => "per-temperature" },
                    "fixed_choice": result.fixed_choice,
                    "fixed_objective": result.fixed_objective,
                    "per_temperature": result.per_temperature,
                }))?,
            )?;
            match mode {
                BiasMode::Fixed => println!(
                    "fixed read bias optimum: {:.2} V (worst-case mean accuracy {:.4})",
                    result.fixed_choice.unwrap(),
                    result.fixed_objective.unwrap()
                ),
                BiasMode::PerTemperature => {
                    for (t, vg, acc) in result.per_temperature.unwrap() {
                        println!("{t} K: best bias {vg:.2} V (mean accuracy {acc:.4})");
                    }
                }
            }
        }
        Command::Report { input } => {
            let path = input
                .clone()
                .unwrap_or_else(|| out.join("sweep_report.json"));
            let report = load_report_json(&path)?;
            print_summaries(&report);
        }
    }
    Ok(())
}

fn print_summaries(report: &fefet_sim::AccuracyReport) {
    println!(
        "{:<6} {:>7} {:>6} {:>3} {:>6} {:>7} {:>9} {:>9} {:>9} {:>9}",
        "stack", "T(K)", "vg(V)", "L", "sigma", "trials", "mean", "std", "min", "max"
    );
    for s in &report.summaries {
        println!(
            "{:<6} {:>7} {:>6} {:>3} {:>6} {:>7} {:>9.4} {:>9} {:>9.4} {:>9.4}",
            s.stack,
            s.temp,
            s.vg_read,
            s.levels,
            s.sigma,
            s.trials,
            s.mean,
            s.std.map_or("-".to_string(), |v| format!("{v:.4}")),
            s.min,
            s.max
        );
    }
}
