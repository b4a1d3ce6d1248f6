//! `emcoord`: PKG lifecycle, event ledger, local chat demo, chain
//! inspection, contact simulation and the HTTP gateway.

mod chat;
mod event;
mod exit;
mod pkg;
mod sim;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use emcoord_core::bilinear::{EngineSpec, FromSpec, ToyEngine, TypeAEngine};
use emcoord_core::ledger::{validate_jsonl, AccessPolicy, EventKind, EventState, Validity};

use exit::{CliError, CliResult, Exit};
use store::Store;

#[derive(Parser)]
#[command(name = "emcoord", version, about = "Emergency coordination: PKG, event ledger, D2D chat and contact simulation")]
struct Cli {
    /// Deployment directory.
    #[arg(long, global = true, env = "EMCOORD_DATA", default_value = "emcoord-data")]
    data_dir: PathBuf,
    /// Pairing engine. Fixed at `pkg init`; later commands only check it.
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineChoice>,
    /// Deterministic randomness and timestamps. Demos and tests only.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Declare that the deployment protects real data. Refused with the toy
    /// engine or a fixed seed.
    #[arg(long, global = true)]
    production_data: bool,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineChoice {
    /// INSECURE 61-bit toy group, for demos and tests.
    Toy,
    /// Type-A supersingular curve pairing.
    Production,
}

impl EngineChoice {
    fn of(spec: &EngineSpec) -> Self {
        match spec {
            EngineSpec::Toy { .. } => EngineChoice::Toy,
            EngineSpec::TypeA => EngineChoice::Production,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Private key generator.
    #[command(subcommand)]
    Pkg(PkgCmd),
    /// Event contracts on the ledger.
    #[command(subcommand)]
    Event(EventCmd),
    /// Local multi-device chat over simulated radios.
    #[command(subcommand)]
    Chat(ChatCmd),
    /// Inspect the chain file.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Contact simulation.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Serve the HTTP API over this deployment.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = emcoord_gateway::DEFAULT_PORT)]
        port: u16,
    },
}

#[derive(Subcommand)]
pub enum PkgCmd {
    /// Create PKG keys, the validator set and the genesis block.
    Init {
        /// Replace an existing deployment.
        #[arg(long)]
        force: bool,
        /// Staff registry: JSON object of id -> {"entity", "identity"}.
        /// Defaults to a small demo roster.
        #[arg(long)]
        staff: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        validators: usize,
        #[arg(long, default_value_t = 5000)]
        dedup_radius_m: u32,
        #[arg(long, default_value_t = 2000)]
        ratification_radius_m: u32,
    },
    /// Extract a long-term key for an identity and check it.
    Extract { id: String },
    /// Issue event keys to a participant over a key-agreement session.
    Issue {
        /// Staff id.
        actor: String,
        #[arg(long)]
        event: String,
    },
}

#[derive(Args)]
pub struct Actor {
    /// Staff id performing the operation.
    #[arg(long = "as", value_name = "STAFF_ID")]
    pub actor: String,
}

#[derive(Subcommand)]
pub enum EventCmd {
    Create {
        #[command(flatten)]
        who: Actor,
        #[arg(long, allow_negative_numbers = true)]
        lat: f64,
        #[arg(long, allow_negative_numbers = true)]
        lon: f64,
        #[arg(long)]
        kind: EventKind,
        #[arg(long)]
        risk: u8,
        /// Defaults to the actor's entity.
        #[arg(long)]
        entity: Option<String>,
        #[arg(long, default_value = "participants-and-entities")]
        policy: AccessPolicy,
    },
    /// Confirm an event from the ratifier's position.
    Ratify {
        event: String,
        #[command(flatten)]
        who: Actor,
        #[arg(long, allow_negative_numbers = true)]
        lat: f64,
        #[arg(long, allow_negative_numbers = true)]
        lon: f64,
    },
    Abort {
        event: String,
        #[command(flatten)]
        who: Actor,
    },
    /// Add staff to the participant list.
    Assign {
        event: String,
        #[command(flatten)]
        who: Actor,
        #[arg(required = true)]
        users: Vec<String>,
    },
    State {
        event: String,
        #[command(flatten)]
        who: Actor,
        #[arg(long)]
        risk: u8,
        #[arg(long, value_parser = parse_state)]
        state: EventState,
    },
    Access {
        event: String,
        #[command(flatten)]
        who: Actor,
        #[arg(long)]
        policy: AccessPolicy,
    },
    Kill {
        event: String,
        #[command(flatten)]
        who: Actor,
    },
    /// Contract and the blocks that touched it.
    Show {
        event: String,
        /// Show participants only if this staff id may read them.
        #[arg(long = "as", value_name = "STAFF_ID")]
        actor: Option<String>,
    },
    List {
        #[arg(long, value_parser = parse_state)]
        state: Option<EventState>,
        #[arg(long)]
        kind: Option<EventKind>,
    },
}

fn parse_state(s: &str) -> Result<EventState, String> {
    match s.to_ascii_lowercase().as_str() {
        "created" => Ok(EventState::Created),
        "verified" => Ok(EventState::Verified),
        "inactive" => Ok(EventState::Inactive),
        _ => Err(format!("unknown state {s:?}")),
    }
}

#[derive(Args)]
pub struct ChatOpts {
    #[arg(long)]
    pub event: String,
    /// Sending staff id.
    #[arg(long)]
    pub from: String,
    /// UTF-8 text body.
    #[arg(long)]
    pub text: String,
    /// Distance between neighbouring devices on the demo line.
    #[arg(long, default_value_t = 25.0)]
    pub spacing_m: f64,
}

#[derive(Subcommand)]
pub enum ChatCmd {
    P2p {
        #[command(flatten)]
        opts: ChatOpts,
        /// Receiving staff id.
        #[arg(long)]
        to: String,
    },
    Broadcast {
        #[command(flatten)]
        opts: ChatOpts,
    },
    /// Open every frame delivered to a device.
    Inbox {
        #[arg(long)]
        event: String,
        #[command(flatten)]
        who: Actor,
    },
}

#[derive(Subcommand)]
pub enum ChainCmd {
    Show {
        /// First block index to print.
        #[arg(long, default_value_t = 0)]
        from: u64,
    },
    /// Check hashes, links and votes.
    Validate,
}

#[derive(Subcommand)]
pub enum SimCmd {
    Run(sim::RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

/// Output sink honouring `--json`.
pub struct Out {
    pub json: bool,
}

impl Out {
    pub fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string(value).expect("serializable output"));
        } else {
            println!("{}", text());
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let out = Out { json: cli.json };
    let store = Store {
        dir: cli.data_dir.clone(),
        seed: cli.seed,
    };
    if cli.production_data && cli.seed.is_some() {
        return Err(CliError::usage("--seed makes all randomness predictable; refused with --production-data"));
    }
    match cli.command {
        Command::Sim(SimCmd::Run(args)) => return sim::run(&args, cli.seed, &out),
        Command::Chain(ChainCmd::Validate) => return validate_chain(&store, &out),
        Command::Pkg(PkgCmd::Init {
            force,
            staff,
            validators,
            dedup_radius_m,
            ratification_radius_m,
        }) => {
            let choice = cli.engine.unwrap_or(EngineChoice::Production);
            guard(choice, cli.production_data)?;
            let opts = pkg::InitOpts {
                force,
                staff,
                validators,
                dedup_radius_m,
                ratification_radius_m,
            };
            return match choice {
                EngineChoice::Toy => pkg::init(&store, ToyEngine::demo(), opts, &out),
                EngineChoice::Production => pkg::init(&store, TypeAEngine::new(), opts, &out),
            };
        }
        _ => {}
    }

    let deployment = store.deployment()?;
    let recorded = EngineChoice::of(&deployment.engine);
    if let Some(asked) = cli.engine {
        if asked != recorded {
            return Err(CliError::usage(format!(
                "deployment uses the {recorded:?} engine, not {asked:?}"
            )));
        }
    }
    guard(recorded, cli.production_data)?;
    match &deployment.engine {
        EngineSpec::TypeA => dispatch(TypeAEngine::new(), cli.command, &store, &out),
        spec => {
            let engine = ToyEngine::from_spec(spec)
                .ok_or_else(|| CliError::failure("deployment.json: invalid toy engine parameters"))?;
            dispatch(engine, cli.command, &store, &out)
        }
    }
}

fn guard(choice: EngineChoice, production_data: bool) -> CliResult {
    if production_data && choice == EngineChoice::Toy {
        return Err(CliError::usage(
            "the toy engine is insecure and refuses to run with --production-data",
        ));
    }
    Ok(())
}

fn dispatch<E: FromSpec>(engine: E, command: Command, store: &Store, out: &Out) -> CliResult {
    match command {
        Command::Pkg(cmd) => pkg::run(store, engine, cmd, out),
        Command::Event(cmd) => event::run(store, cmd, out),
        Command::Chat(cmd) => chat::run(store, engine, cmd, out),
        Command::Chain(ChainCmd::Show { from }) => show_chain(store, from, out),
        Command::Serve { bind, port } => serve(store, engine, &bind, port),
        Command::Sim(_) | Command::Chain(ChainCmd::Validate) => unreachable!("handled before dispatch"),
    }
}

fn validate_chain(store: &Store, out: &Out) -> CliResult {
    let deployment = store.deployment()?;
    let text = std::fs::read_to_string(store.chain_path())?;
    let verdict = validate_jsonl(&text, &deployment.validator_set()?);
    let blocks = text.lines().count();
    match verdict {
        Validity::Valid => {
            out.emit(&serde_json::json!({"valid": true, "blocks": blocks}), || {
                format!("Valid ({blocks} blocks)")
            });
            Ok(())
        }
        Validity::Invalid(i) => {
            out.emit(&serde_json::json!({"valid": false, "invalid_index": i}), || {
                format!("Invalid({i})")
            });
            Err(CliError::new(Exit::Reject, format!("chain is invalid from block {i}")))
        }
    }
}

fn show_chain(store: &Store, from: u64, out: &Out) -> CliResult {
    let deployment = store.deployment()?;
    let ledger = store.ledger(&deployment, "chain-show")?;
    let blocks: Vec<_> = ledger
        .chain()
        .blocks()
        .iter()
        .filter(|b| b.index >= from)
        .collect();
    if out.json {
        println!("{}", serde_json::to_string(&blocks).expect("blocks serialize"));
        return Ok(());
    }
    for b in blocks {
        let what = match &b.payload {
            emcoord_core::ledger::BlockPayload::Genesis(_) => "genesis".to_string(),
            emcoord_core::ledger::BlockPayload::Transaction(tx) => format!(
                "{:?} {} by {}",
                tx.op(),
                tx.event_id(),
                tx.actor
            ),
        };
        println!(
            "#{:<4} {} prev {} t={} votes={} {}",
            b.index,
            b.hash_hex(),
            &hex::encode(b.prev_hash)[..16],
            b.timestamp,
            b.votes.len(),
            what
        );
    }
    Ok(())
}

fn serve<E: FromSpec>(store: &Store, engine: E, bind: &str, port: u16) -> CliResult {
    let deployment = store.deployment()?;
    let ledger = store.ledger(&deployment, "serve")?;
    let (params, msk) = store.pkg(engine)?;
    let addr: std::net::SocketAddr = format!("{bind}:{port}")
        .parse()
        .map_err(|e| CliError::usage(format!("bad listen address: {e}")))?;
    let app = emcoord_gateway::Gateway::new(ledger, params, msk, store.seed);
    app.persist_chain_to(store.chain_path());
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    rt.block_on(emcoord_gateway::serve(app, addr))?;
    Ok(())
}
