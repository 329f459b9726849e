use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hcut_cli::{parse_param, run, CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "hcut", version, about = "Cut-metric and BV experiments on the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Command parameter, `KEY=VALUE` with a JSON or bare string value.
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Named input file, `NAME=PATH`.
    #[arg(short = 'i', long = "input", value_name = "NAME=PATH")]
    inputs: Vec<String>,
    /// Write the resolved config here instead of running it.
    #[arg(long, value_name = "PATH")]
    emit_config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the config JSON schema.
    Schema,
    /// Word-metric ball W_k of the integer Heisenberg group.
    CayleyBall {
        #[arg(long)]
        k: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Minimum L1 distortion of a finite metric space.
    Distortion {
        #[arg(long, conflicts_with = "colgen")]
        exact: bool,
        #[arg(long)]
        colgen: bool,
        #[arg(long)]
        budget: Option<usize>,
        /// Named graph: pathN, cycleN, starN, k23.
        #[arg(long)]
        graph: Option<String>,
        /// Metric space JSON, e.g. a cayley-ball output.
        #[arg(long)]
        space: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Cut measure of an L1 map.
    Slice(Common),
    /// Discrete coarea formula on random grid functions.
    Coarea(Common),
    /// Total perimeter against total variation on random grid maps.
    TvIdentity(Common),
    /// Grid perimeter of a set, in total and in balls.
    Perimeter(Common),
    /// Half-space flatness of a set at a point.
    Alpha(Common),
    /// Bad-set perimeter mass of a sliced function.
    BadMass(Common),
    /// Good/bad split and straightening of a cut measure.
    Straighten(Common),
    /// Center collapse ratios with the horizontal control.
    Collapse(Common),
    /// Blow-up comparison with the straightened half-space measure.
    ScaleCompare(Common),
    /// Moving characteristic function isometry check.
    MovingChar {
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn config_from(
    command: &str,
    common: Common,
    extra: Vec<(&str, Value)>,
) -> CliResult<(ExperimentConfig, Option<PathBuf>)> {
    let mut cfg = ExperimentConfig::new(command, common.out);
    cfg.seed = common.seed;
    for p in &common.params {
        let (k, v) = parse_param(p)?;
        cfg.params.insert(k, v);
    }
    for (k, v) in extra {
        cfg.params.insert(k.to_string(), v);
    }
    for i in &common.inputs {
        let (k, v) = i.split_once('=').ok_or_else(|| CliError::Schema(format!("expected NAME=PATH, got {i:?}")))?;
        cfg.inputs.insert(k.to_string(), PathBuf::from(v));
    }
    Ok((cfg, common.emit_config))
}

fn resolve(command: Command) -> CliResult<Option<(ExperimentConfig, Option<PathBuf>)>> {
    let (name, common, extra): (&str, Common, Vec<(&str, Option<Value>)>) = match command {
        Command::Run { config } => return Ok(Some((ExperimentConfig::load(&config)?, None))),
        Command::Schema => {
            print!("{}", hcut_cli::CONFIG_SCHEMA);
            return Ok(None);
        }
        Command::CayleyBall { k, common } => ("cayley-ball", common, vec![("k", k.map(|k| json!(k)))]),
        Command::Distortion { exact, colgen, budget, graph, space, mut common } => {
            if let Some(p) = space {
                common.inputs.push(format!("space={}", p.display()));
            }
            let method = match (exact, colgen) {
                (_, true) => Some(json!("colgen")),
                (true, _) => Some(json!("exact")),
                _ => None,
            };
            let extra =
                vec![("method", method), ("budget", budget.map(|b| json!(b))), ("graph", graph.map(|g| json!(g)))];
            ("distortion", common, extra)
        }
        Command::Slice(c) => ("slice", c, vec![]),
        Command::Coarea(c) => ("coarea", c, vec![]),
        Command::TvIdentity(c) => ("tv-identity", c, vec![]),
        Command::Perimeter(c) => ("perimeter", c, vec![]),
        Command::Alpha(c) => ("alpha", c, vec![]),
        Command::BadMass(c) => ("bad-mass", c, vec![]),
        Command::Straighten(c) => ("straighten", c, vec![]),
        Command::Collapse(c) => ("collapse", c, vec![]),
        Command::ScaleCompare(c) => ("scale-compare", c, vec![]),
        Command::MovingChar { n, common } => ("moving-char", common, vec![("n", n.map(|n| json!(n)))]),
    };
    let extra = extra.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect();
    config_from(name, common, extra).map(Some)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = resolve(cli.command).and_then(|resolved| {
        let Some((cfg, emit)) = resolved else { return Ok(()) };
        if let Some(path) = emit {
            let mut text = serde_json::to_string_pretty(&cfg)?;
            text.push('\n');
            std::fs::write(path, text)?;
            return Ok(());
        }
        let summary = run(&cfg)?;
        println!("{}", summary.result_json.display());
        Ok(())
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
