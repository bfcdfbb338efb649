//! Command-line front end.
//!
//! Subcommands: `encode`, `transmit`, `decode`, `simulate`, `bench`,
//! `plan`, `oracle-check`.  Configuration comes from a `key = value` file
//! (`--config`), with `--seed`, `--format`, `--engine` and `--mode`
//! overriding individual keys.  Exit codes: 0 success, 2 configuration
//! error, 3 decode error.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::bits;
use crate::channel::{frame_rng, transmit};
use crate::codebook::Message;
use crate::decoder::decode;
use crate::sim::{
    bench, oracle_check, plan_report, run_frames, run_sweep, sweep_csv, trials_csv, EngineChoice, ModeChoice,
    OutputFormat, RunConfig, SimContext,
};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "driftdec", about = "MAP decoder for insertion/deletion/substitution channels", version)]
pub struct Cli {
    /// Configuration file (`key = value` lines, `#` comments).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format override: csv or json.
    #[arg(long, global = true)]
    pub format: Option<OutputFormat>,
    /// Engine override: serial or parallel.
    #[arg(long, global = true)]
    pub engine: Option<EngineChoice>,
    /// Storage mode override: auto, global or local.
    #[arg(long, global = true)]
    pub mode: Option<ModeChoice>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a message (random when omitted) into a channel frame.
    Encode {
        /// Comma-separated symbols, e.g. `3,0,17`.
        #[arg(long)]
        message: Option<String>,
    },
    /// Pass a frame through the channel.
    Transmit {
        /// Input bit string; a random encoded frame when omitted.
        #[arg(long)]
        input: Option<String>,
    },
    /// Decode a received bit string (a fresh channel realization when
    /// omitted).
    Decode {
        /// Received bit string.
        #[arg(long)]
        received: Option<String>,
    },
    /// Monte Carlo simulation; emits per-frame CSV or a sweep table.
    Simulate,
    /// Per-phase timing, normalized efficiency and speedup report.
    Bench,
    /// Execution-plan report for the configured device model.
    Plan,
    /// Cross-check lattice and decoder against brute-force oracles.
    OracleCheck,
}

/// Map an error to the documented exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DecoderUnderflow(_) | Error::DriftOutOfRange { .. } | Error::DimensionMismatch(_) => 3,
        _ => 2,
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    if let Some(engine) = cli.engine {
        cfg.engine = engine;
    }
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_message(s: &str, alphabet: usize) -> Result<Message> {
    let symbols: Vec<usize> = s
        .split(',')
        .map(|v| v.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad message {s:?} (expected comma-separated symbols)")))?;
    if let Some(&d) = symbols.iter().find(|&&d| d >= alphabet) {
        return Err(Error::Config(format!("message symbol {d} exceeds q = {alphabet}")));
    }
    Ok(Message::new(symbols))
}

fn parse_bits(s: &str, what: &str) -> Result<Vec<u8>> {
    bits::from_str(s.trim()).map_err(|_| Error::Config(format!("bad {what}: expected a 0/1 string")))
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Encode { message } => {
            let ctx = SimContext::prepare(cfg)?;
            let msg = match message {
                Some(s) => parse_message(&s, ctx.cb.alphabet())?,
                None => Message::random(ctx.cb.msg_len(), ctx.cb.alphabet(), &mut frame_rng(ctx.cfg.seed, 0)),
            };
            let frame = ctx.cb.encode(&msg)?;
            let text = match ctx.cfg.format {
                OutputFormat::Json => format!(
                    "{}\n",
                    serde_json::json!({ "message": msg.symbols, "frame": bits::to_string(&frame) })
                ),
                OutputFormat::Csv => format!(
                    "message,frame\n\"{}\",{}\n",
                    msg.symbols.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" "),
                    bits::to_string(&frame)
                ),
            };
            emit(&cli.out, &text)
        }
        Command::Transmit { input } => {
            let ctx = SimContext::prepare(cfg)?;
            let mut rng = frame_rng(ctx.cfg.seed, 0);
            let frame = match input {
                Some(s) => parse_bits(&s, "input")?,
                None => ctx.cb.encode(&Message::random(ctx.cb.msg_len(), ctx.cb.alphabet(), &mut rng))?,
            };
            let received = transmit(&frame, &ctx.params, &mut rng);
            let drift = received.len() as i64 - frame.len() as i64;
            let text = match ctx.cfg.format {
                OutputFormat::Json => format!(
                    "{}\n",
                    serde_json::json!({
                        "input": bits::to_string(&frame),
                        "received": bits::to_string(&received),
                        "end_drift": drift,
                    })
                ),
                OutputFormat::Csv => {
                    format!("input,received,end_drift\n{},{},{}\n", bits::to_string(&frame), bits::to_string(&received), drift)
                }
            };
            emit(&cli.out, &text)
        }
        Command::Decode { received } => {
            let ctx = SimContext::prepare(cfg)?;
            let received = match received {
                Some(s) => parse_bits(&s, "received")?,
                None => {
                    let mut rng = frame_rng(ctx.cfg.seed, 0);
                    let msg = Message::random(ctx.cb.msg_len(), ctx.cb.alphabet(), &mut rng);
                    let frame = ctx.cb.encode(&msg)?;
                    transmit(&frame, &ctx.params, &mut rng)
                }
            };
            let out = decode(&received, &ctx.cb, &ctx.priors, &ctx.space, &ctx.params, ctx.opts)?;
            let decided = out.posteriors.decide();
            let text = match ctx.cfg.format {
                OutputFormat::Json => format!(
                    "{}\n",
                    serde_json::json!({ "decoded": decided, "posteriors": out.posteriors })
                ),
                OutputFormat::Csv => {
                    let mut t = String::from("position,symbol,posterior\n");
                    for (i, &d) in decided.iter().enumerate() {
                        t.push_str(&format!("{i},{d},{:.9}\n", out.posteriors.row(i)[d]));
                    }
                    t
                }
            };
            emit(&cli.out, &text)
        }
        Command::Simulate => {
            let ctx = SimContext::prepare(cfg)?;
            let text = if ctx.cfg.sweep.is_empty() {
                let trials = run_frames(&ctx, ctx.cfg.frames)?;
                match ctx.cfg.format {
                    OutputFormat::Csv => trials_csv(&trials),
                    OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&trials).expect("serializable")),
                }
            } else {
                let sweep = ctx.cfg.sweep.clone();
                let table = run_sweep(&ctx, &sweep)?;
                match ctx.cfg.format {
                    OutputFormat::Csv => sweep_csv(&table),
                    OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&table).expect("serializable")),
                }
            };
            emit(&cli.out, &text)
        }
        Command::Bench => {
            let ctx = SimContext::prepare(cfg)?;
            let report = bench(&ctx)?;
            emit(&cli.out, &format!("{}\n", serde_json::to_string_pretty(&report).expect("serializable")))
        }
        Command::Plan => {
            let ctx = SimContext::prepare(cfg)?;
            let report = plan_report(&ctx)?;
            emit(&cli.out, &format!("{}\n", serde_json::to_string_pretty(&report).expect("serializable")))
        }
        Command::OracleCheck => {
            let report = oracle_check(cfg.seed)?;
            emit(&cli.out, &format!("{}\n", serde_json::to_string_pretty(&report).expect("serializable")))?;
            if !report.pass {
                return Err(Error::DimensionMismatch("oracle cross-check failed".into()));
            }
            Ok(())
        }
    }
}
