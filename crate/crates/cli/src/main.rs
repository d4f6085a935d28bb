mod render;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use matterprov::canonical::{self, Document};
use matterprov::dsl;
use matterprov::{Kb, KbError, Mode, Rule, TimePoint};

#[derive(Parser)]
#[command(
    name = "matterprov",
    version,
    about = "Portions of matter: validation and provenance queries"
)]
struct Cli {
    /// Output format for results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Time point for world-level commands, written `tN`.
    #[arg(long, global = true, value_name = "tN")]
    at: Option<TimePoint>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Canonical,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario or `.mpkb` document against every rule.
    Validate {
        file: PathBuf,
        /// Only report violations of this rule.
        #[arg(long, value_name = "RULE")]
        rule: Option<String>,
    },
    /// Ask a provenance or world question.
    Query {
        file: PathBuf,
        #[command(subcommand)]
        query: Query,
    },
    /// Write the canonical `.mpkb` form.
    Export {
        file: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rebuild the KB from its event log and compare exports byte for byte.
    ReplayCheck { file: PathBuf },
}

#[derive(Subcommand)]
enum Query {
    /// Quantities QUANTITY inherited granules from.
    Provenance {
        quantity: String,
        #[arg(long)]
        transitive: bool,
    },
    /// Quantities QUANTITY donated granules to.
    Donated {
        quantity: String,
        #[arg(long)]
        transitive: bool,
    },
    /// Every quantity OBJECT has been a granule of.
    History { object: String },
    /// The world at a time point.
    World { time: Option<TimePoint> },
    /// Granules sharing a host quantity with OBJECT.
    Cohort { object: String },
    /// Common ancestors of two quantities, each counting as its own.
    Ancestors { first: String, second: String },
    /// Original portion or sub-portion, for one quantity or all.
    Classify { quantity: Option<String> },
    /// Sub-portions of QUANTITY.
    Subportions {
        quantity: String,
        #[arg(long)]
        transitive: bool,
    },
    /// The granule collection constituting QUANTITY.
    Constitution { quantity: String },
    /// Every derived inheritance edge.
    Edges,
}

/// A failure reported with exit code 2. `Diagnostics` is already formatted
/// for stderr; `Message` gets an `error:` prefix.
enum Fatal {
    Message(String),
    Diagnostics(String),
}

fn fatal(msg: impl Into<String>) -> Fatal {
    Fatal::Message(msg.into())
}

impl From<KbError> for Fatal {
    fn from(e: KbError) -> Self {
        Fatal::Message(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Fatal> {
    std::fs::read(path).map_err(|e| fatal(format!("{}: {e}", path.display())))
}

fn is_canonical(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "mpkb")
}

/// Loads a `.mpkb` document or a scenario file.
fn load(path: &Path, mode: Mode) -> Result<Kb, Fatal> {
    let bytes = read(path)?;
    let shown = path.display();
    if is_canonical(path) {
        let text = String::from_utf8(bytes).map_err(|e| {
            fatal(format!(
                "{shown}: invalid UTF-8 at byte offset {}",
                e.utf8_error().valid_up_to()
            ))
        })?;
        let mut kb = canonical::import(&text).map_err(|e| fatal(format!("{shown}: {e}")))?;
        kb.set_mode(mode);
        return Ok(kb);
    }
    let scenario = dsl::parse_bytes(&bytes).map_err(|diags| {
        let mut msg = String::new();
        for d in &diags {
            let _ = writeln!(msg, "{shown}:{d}");
        }
        let _ = write!(msg, "{} error(s) in {shown}", diags.len());
        Fatal::Diagnostics(msg)
    })?;
    dsl::load(&scenario, mode)
        .map_err(|e| Fatal::Diagnostics(format!("{shown}:{}: error: {}", e.pos, e.source)))
}

fn latest(kb: &Kb) -> TimePoint {
    kb.change_points()
        .last()
        .copied()
        .unwrap_or(TimePoint::ZERO)
}

fn emit<T: serde::Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) -> String {
    match format {
        Format::Text => text(),
        Format::Canonical => {
            let mut s = serde_json::to_string_pretty(value).expect("serializable");
            s.push('\n');
            s
        }
    }
}

fn run(cli: Cli) -> Result<(String, ExitCode), Fatal> {
    let format = cli.format;
    match cli.command {
        Command::Validate { file, rule } => {
            let rule = rule
                .map(|r| Rule::parse(&r).ok_or_else(|| fatal(format!("unknown rule `{r}`"))))
                .transpose()?;
            let kb = load(&file, Mode::Permissive)?;
            let validator = kb.validator();
            let mut report = match cli.at {
                Some(t) => validator.validate_world(t),
                None => validator.validate_all(),
            };
            if let Some(rule) = rule {
                report.violations.retain(|v| v.rule == rule);
            }
            let code = if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
            Ok((emit(format, &report, || render::report(&report)), code))
        }
        Command::Query { file, query } => {
            let kb = load(&file, Mode::Strict)?;
            Ok((answer(&kb, query, cli.at, format)?, ExitCode::SUCCESS))
        }
        Command::Export { file, output } => {
            let kb = load(&file, Mode::Strict)?;
            let text = canonical::export(&kb);
            match output {
                Some(out) => {
                    std::fs::write(&out, text)
                        .map_err(|e| fatal(format!("{}: {e}", out.display())))?;
                    Ok((String::new(), ExitCode::SUCCESS))
                }
                None => Ok((text, ExitCode::SUCCESS)),
            }
        }
        Command::ReplayCheck { file } => {
            let kb = load(&file, Mode::Strict)?;
            let doc = Document::from_kb(&kb);
            let original = doc.to_canonical_string();
            let (ok, detail) = match canonical::replay(&doc, Mode::Strict) {
                Ok(rebuilt) => {
                    let replayed = canonical::export(&rebuilt);
                    match render::first_difference(&original, &replayed) {
                        None => (true, None),
                        Some(line) => (false, Some(format!("exports differ from line {line}"))),
                    }
                }
                Err(e) => (false, Some(format!("replay rejected the log: {e}"))),
            };
            let counts = canonical::section_counts(&doc);
            let value = serde_json::json!({ "identical": ok, "detail": detail, "counts": counts });
            let out = emit(format, &value, || {
                render::replay_check(ok, detail.as_deref(), &counts)
            });
            Ok((
                out,
                if ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                },
            ))
        }
    }
}

fn answer(kb: &Kb, query: Query, at: Option<TimePoint>, format: Format) -> Result<String, Fatal> {
    let prov = kb.provenance();
    let out = match query {
        Query::Provenance {
            quantity,
            transitive,
        } => {
            let set = prov.inherited_from(&quantity, transitive)?;
            emit(format, &set, || render::ids(&set))
        }
        Query::Donated {
            quantity,
            transitive,
        } => {
            let set = prov.donated_to(&quantity, transitive)?;
            emit(format, &set, || render::ids(&set))
        }
        Query::Subportions {
            quantity,
            transitive,
        } => {
            let set = prov.sub_portions_of(&quantity, transitive)?;
            emit(format, &set, || render::ids(&set))
        }
        Query::Ancestors { first, second } => {
            let set = prov.common_ancestors(&first, &second)?;
            emit(format, &set, || render::ids(&set))
        }
        Query::History { object } => {
            let history = prov.granule_history(&object)?;
            emit(format, &history, || render::history(&history))
        }
        Query::World { time } => {
            let t = time
                .or(at)
                .ok_or_else(|| fatal("world needs a time point: `world tN` or `--at tN`"))?;
            let world = kb.world_at(t);
            emit(format, &world, || render::world(&world))
        }
        Query::Cohort { object } => {
            let set = prov.cohort_at(&object, at.unwrap_or_else(|| latest(kb)))?;
            emit(format, &set, || render::ids(&set))
        }
        Query::Classify { quantity: Some(q) } => {
            let origin = prov.classify_origin(&q)?;
            let map = std::collections::BTreeMap::from([(q, origin)]);
            emit(format, &map, || render::classification(&map))
        }
        Query::Classify { quantity: None } => {
            let map = prov.classify_all();
            emit(format, &map, || render::classification(&map))
        }
        Query::Constitution { quantity } => {
            let view = prov.constitution_view(&quantity, at.unwrap_or_else(|| latest(kb)))?;
            emit(format, &view, || render::constitution(&view))
        }
        Query::Edges => emit(format, &prov.edges(), || render::edges(prov.edges())),
    };
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((out, code)) => {
            print!("{out}");
            code
        }
        Err(Fatal::Message(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Fatal::Diagnostics(text)) => {
            eprintln!("{text}");
            ExitCode::from(2)
        }
    }
}
