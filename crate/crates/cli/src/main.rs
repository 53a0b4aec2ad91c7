use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfm_core::api::{render, ApiError, Engine, ErrorKind, ModelSummary};
use pfm_core::chronicle::{export_jsonl, import_jsonl};
use pfm_core::config::Config;
use pfm_core::mining::VerifiedRule;
use pfm_core::store::AppendOutcome;
use pfm_core::synth::{generate, SynthSpec};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "pfm", version, about = "Personal food model engine")]
struct Cli {
    /// Store root.
    #[arg(long, global = true, default_value = "data")]
    data_dir: PathBuf,
    /// Engine config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed and PFM_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// User id; may be omitted when the store holds exactly one user.
    #[arg(long, global = true)]
    user: Option<String>,
    /// Machine-readable canonical JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Append a JSONL chronicle to the store.
    Import {
        file: PathBuf,
        /// Resolve nutrition for food events that lack it.
        #[arg(long)]
        enrich: bool,
    },
    /// Write the stored chronicle as JSONL (or, with --json, as the JSON
    /// array the chronicle endpoint returns).
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Co-occurrence matrix between two event categories.
    Heatmap {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        window: String,
        #[arg(long, conflicts_with = "json")]
        csv: bool,
    },
    /// Verify a hypothesis against the chronicle.
    Verify {
        #[arg(long)]
        hypothesis: PathBuf,
    },
    /// Build or show the personal food model.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Rank candidate dishes.
    Recommend {
        #[arg(long)]
        request: PathBuf,
    },
    /// Generate a synthetic chronicle with planted effects.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Static web UI assets served under /ui.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ModelAction {
    Build,
    Show,
}

enum Failure {
    Usage(String),
    Domain(ApiError),
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure::Domain(e)
    }
}

fn domain(code: &str, message: impl Into<String>) -> Failure {
    Failure::Domain(ApiError::new(ErrorKind::Unprocessable, code, message))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| domain("io_error", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| domain("invalid_json", format!("{}: {e}", path.display())))
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| domain("config_error", e.to_string()))?,
        None => Config::default(),
    };
    let mut cfg = cfg.with_env_seed(|k| std::env::var(k).ok());
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn pick_user(cli: &Cli, engine: &Engine) -> Result<String, Failure> {
    if let Some(u) = &cli.user {
        return Ok(u.clone());
    }
    let users = engine.store.users().map_err(ApiError::from)?;
    match users.as_slice() {
        [only] => Ok(only.clone()),
        [] => Err(Failure::Usage("the store has no users; import a chronicle first".into())),
        _ => Err(Failure::Usage(format!("--user is required (store has: {})", users.join(", ")))),
    }
}

fn out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes());
}

fn verify_table(rule: &VerifiedRule) -> String {
    let mut s = format!(
        "{:<32} {:>9} {:>8} {:>8} {:>4} {:>4} {:>8}\n",
        "context", "effect", "p", "adj_p", "nT", "nC", "validity"
    );
    for c in &rule.contexts {
        let flag = if c.low_power { " low-power" } else if c.degenerate { " degenerate" } else { "" };
        s.push_str(&format!(
            "{:<32} {:>9.3} {:>8.4} {:>8.4} {:>4} {:>4} {:>8.3}{flag}\n",
            c.signature.join(","),
            c.effect,
            c.p_value,
            c.adjusted_p,
            c.n_treated,
            c.n_control,
            c.validity
        ));
    }
    let effect = rule.overall_effect.map_or("n/a".to_string(), |e| format!("{e:.3}"));
    s.push_str(&format!(
        "overall: effect {effect}, p {:.4}, direction {:?}, excluded {}\n",
        rule.overall_p, rule.overall_direction, rule.n_excluded
    ));
    s
}

fn summary_text(s: &ModelSummary) -> String {
    let mut t = format!("model for {} ({} events over {} days)\n", s.user_id, s.n_events, s.span_days);
    for r in &s.verified {
        let effect = r.overall_effect.map_or("n/a".to_string(), |e| format!("{e:.2}"));
        t.push_str(&format!(
            "  verified   {:<24} {:<14} effect {effect:>7} p {:.3} {:?}\n",
            r.rule_id, r.metric, r.overall_p, r.direction
        ));
    }
    for p in &s.prior_only {
        t.push_str(&format!("  prior-only {:<24} ({})\n", p.rule_id, p.reason));
    }
    t.push_str(&format!(
        "  preference profile: {}; constraints: {}\n",
        if s.has_preference_profile { "yes" } else { "no" },
        s.n_constraints
    ));
    t
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    if let Command::Synth { spec, out: out_path, truth } = &cli.command {
        let spec: SynthSpec = serde_json::from_value(read_json(spec)?)
            .map_err(|e| Failure::Domain(ApiError::bad_request("invalid_spec", e.to_string())))?;
        let (chronicle, manifest) = generate(&spec).map_err(|e| domain("invalid_spec", e.to_string()))?;
        let mut buf = Vec::new();
        export_jsonl(&chronicle, &mut buf).map_err(ApiError::from)?;
        fs::write(out_path, buf).map_err(|e| domain("io_error", e.to_string()))?;
        fs::write(truth, render(&manifest)).map_err(|e| domain("io_error", e.to_string()))?;
        let report = serde_json::json!({"user_id": chronicle.user_id(), "events": chronicle.len(), "days": spec.days});
        if cli.json {
            out(&render(&report));
        } else {
            out(&format!("wrote {} events over {} days to {}\n", chronicle.len(), spec.days, out_path.display()));
        }
        return Ok(());
    }

    let engine = Engine::open(&cli.data_dir, cfg)?;
    match &cli.command {
        Command::Synth { .. } => unreachable!("handled above"),
        Command::Import { file, enrich } => {
            let f = fs::File::open(file).map_err(|e| domain("io_error", format!("{}: {e}", file.display())))?;
            let chronicle = import_jsonl(BufReader::new(f)).map_err(ApiError::from)?;
            let user = match &cli.user {
                Some(u) => u.clone(),
                None => chronicle.user_id().to_string(),
            };
            let (mut created, mut existing) = (0, 0);
            for e in chronicle.events() {
                match engine.store.append_event(&user, e).map_err(ApiError::from)? {
                    AppendOutcome::Created => created += 1,
                    AppendOutcome::Existing => existing += 1,
                }
            }
            let (enriched, failed) = if *enrich { engine.enrich_pending(&user)? } else { (Vec::new(), Vec::new()) };
            let failed: Vec<Value> = failed.iter().map(|(id, code)| serde_json::json!({"event_id": id, "code": code})).collect();
            let report = serde_json::json!({
                "user_id": user, "created": created, "existing": existing,
                "enriched": enriched.len(), "enrichment_failed": failed,
            });
            if cli.json {
                out(&render(&report));
            } else {
                out(&format!(
                    "{user}: {created} new, {existing} already stored, {} enriched, {} unresolved\n",
                    enriched.len(),
                    failed.len()
                ));
            }
        }
        Command::Export { out: path } => {
            let user = pick_user(cli, &engine)?;
            if cli.json && path.is_none() {
                out(&render(&engine.query(&user, None, None, None)?));
                return Ok(());
            }
            let chronicle = engine.chronicle(&user)?;
            let mut buf = Vec::new();
            export_jsonl(&chronicle, &mut buf).map_err(ApiError::from)?;
            match path {
                Some(p) => fs::write(p, buf).map_err(|e| domain("io_error", e.to_string()))?,
                None => out(&String::from_utf8_lossy(&buf)),
            }
        }
        Command::Heatmap { a, b, window, csv } => {
            let user = pick_user(cli, &engine)?;
            let heatmap = engine.heatmap(&user, a, b, window)?;
            if cli.json && !csv {
                out(&render(&heatmap));
            } else {
                out(&heatmap.to_csv());
            }
        }
        Command::Verify { hypothesis } => {
            let user = pick_user(cli, &engine)?;
            let rule = engine.verify(&user, read_json(hypothesis)?)?;
            if cli.json {
                out(&render(&rule));
            } else {
                out(&verify_table(&rule));
            }
        }
        Command::Model { action } => {
            let user = pick_user(cli, &engine)?;
            match action {
                ModelAction::Build => {
                    let summary = engine.build_model(&user)?;
                    if cli.json {
                        out(&render(&summary));
                    } else {
                        out(&summary_text(&summary));
                    }
                }
                ModelAction::Show => {
                    let model = engine.model(&user)?;
                    if cli.json {
                        out(&render(&model));
                    } else {
                        out(&summary_text(&ModelSummary::of(&model)));
                    }
                }
            }
        }
        Command::Recommend { request } => {
            let user = pick_user(cli, &engine)?;
            let rec = engine.recommend(&user, read_json(request)?)?;
            if cli.json {
                out(&render(&rec));
            } else {
                for (i, item) in rec.ranked.iter().enumerate() {
                    out(&format!(
                        "{:>2}. {:<24} total {:.3}  preference {:.3}  health {:.3}\n",
                        i + 1,
                        item.dish_id,
                        item.total,
                        item.preference,
                        item.health_utility
                    ));
                }
                for b in &rec.blocked {
                    out(&format!("    blocked {:<16} {}\n", b.dish_id, b.reasons.join("; ")));
                }
            }
        }
        Command::Serve { port, host, ui_dir } => {
            let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
            let addr: std::net::SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Failure::Usage(format!("bad address: {e}")))?;
            let mut state = pfm_service::AppState::new(engine);
            if let Some(dir) = ui_dir {
                state = state.with_ui_dir(dir.clone());
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| domain("runtime", e.to_string()))?;
            rt.block_on(pfm_service::serve(state, addr)).map_err(|e| domain("io_error", e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {}: {}", e.code, e.message);
            ExitCode::from(1)
        }
    }
}
