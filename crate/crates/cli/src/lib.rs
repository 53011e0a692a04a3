//! Command-line front end for `scentag`.
//!
//! [`run`] takes the argument list and stdin and returns the exit code and
//! both output streams, so the whole surface is testable in-process.
//!
//! Exit codes: 0 success or positive answer, 1 negative answer (no match,
//! inclusion not shown, empty query result), 2 usage or validation error,
//! 3 I/O error.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use scentag::algebra::{includes_semantic, includes_syntactic, render_verdict, InclusionStatus, UniverseBounds};
use scentag::category::serialize_library;
use scentag::matcher::render_witness;
use scentag::store::{parse_query, select_test_cases, OddSpec, Store, StoreError};
use scentag::{comprises, lint_category, parse_scenario, Library, Registry, ScenarioCategory, TagPath};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "scentag",
    version,
    about = "Tag-based scenario categories for automated vehicle assessment"
)]
struct Cli {
    /// Tag registry document to use instead of the built-in trees.
    #[arg(long, global = true, value_name = "FILE")]
    registry: Option<PathBuf>,
    /// Category library used by `testcases select`.
    #[arg(long, global = true, value_name = "FILE")]
    library: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect the tag registry.
    #[command(subcommand)]
    Trees(TreesCmd),
    /// Work with category documents.
    #[command(subcommand)]
    Category(CategoryCmd),
    /// Work with scenario documents.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Check whether a category comprises a scenario.
    Match {
        category_file: PathBuf,
        category_name: String,
        scenario_file: PathBuf,
    },
    /// Check whether one category includes another.
    Includes(IncludesArgs),
    /// Manage a scenario store.
    Store {
        /// Store file.
        #[arg(long, value_name = "PATH")]
        store: PathBuf,
        #[command(subcommand)]
        command: StoreCmd,
    },
    /// Select test cases from a store.
    #[command(subcommand)]
    Testcases(TestcasesCmd),
}

#[derive(Debug, Subcommand)]
enum TreesCmd {
    /// One line per tree: id, scope, node count.
    List,
    /// Print one tree in registry document form.
    Show { id: String },
    /// Print one tree as a Graphviz digraph.
    ExportDot { id: String },
    /// Print the whole registry.
    Export {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Dot,
}

#[derive(Debug, Subcommand)]
enum CategoryCmd {
    /// Report redundant requirements, unconstrained groups and repeated steps.
    Lint { file: PathBuf },
    /// Print the canonical form of every category in a file.
    Fmt { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum ScenarioCmd {
    /// Parse and validate a scenario document.
    Validate { file: PathBuf },
}

#[derive(Debug, Args)]
struct IncludesArgs {
    /// Category library.
    file: PathBuf,
    larger: String,
    smaller: String,
    /// Fall back to bounded enumeration when the syntactic check is inconclusive.
    #[arg(long)]
    semantic: bool,
    #[arg(long, default_value_t = 2)]
    max_actors: usize,
    #[arg(long, default_value_t = 2)]
    max_phases: usize,
    /// File of tag paths to enumerate with (default: tags of both categories).
    #[arg(long, value_name = "FILE")]
    tag_pool: Option<PathBuf>,
    /// Trees of which a phase carries at most one tag.
    #[arg(long, value_delimiter = ',', value_name = "TREE,...")]
    exclusive: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum StoreCmd {
    /// Create an empty store.
    Init,
    /// Append the scenario in a document.
    Add { file: PathBuf },
    /// Print ids of scenarios matching a tag query.
    Query { expr: String },
}

#[derive(Debug, Subcommand)]
enum TestcasesCmd {
    /// Scenarios comprised by at least one ODD category.
    Select {
        /// Comma-separated ODD category names.
        #[arg(long, value_delimiter = ',', required = true)]
        odd: Vec<String>,
        #[arg(long, value_name = "PATH")]
        store: PathBuf,
    },
}

/// A failed invocation: exit code and message for stderr.
struct Failure(i32, String);

impl Failure {
    fn invalid(msg: impl Into<String>) -> Failure {
        Failure(EXIT_INVALID, msg.into())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Failure {
        let code = match e {
            StoreError::Io(_) => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Failure(code, e.to_string())
    }
}

struct Ctx<'a> {
    stdin: &'a mut dyn Read,
    out: String,
}

impl Ctx<'_> {
    /// Reads a file, or stdin for `-`.
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let mut text = String::new();
        let result = if path == Path::new("-") {
            self.stdin.read_to_string(&mut text).map(|_| text)
        } else {
            std::fs::read_to_string(path)
        };
        result.map_err(|e| Failure(EXIT_IO, format!("{}: {e}", path.display())))
    }
}

/// Runs one invocation. `args[0]` is the program name.
pub fn run<S: AsRef<str>>(args: &[S], stdin: &mut dyn Read) -> (i32, String, String) {
    let cli = match Cli::try_parse_from(args.iter().map(AsRef::as_ref)) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    (EXIT_OK, text, String::new())
                }
                _ => (EXIT_INVALID, String::new(), text),
            };
        }
    };
    let mut ctx = Ctx {
        stdin,
        out: String::new(),
    };
    match dispatch(&cli, &mut ctx) {
        Ok(code) => (code, ctx.out, String::new()),
        Err(Failure(code, msg)) => (code, ctx.out, format!("error: {msg}\n")),
    }
}

fn registry(cli: &Cli, ctx: &mut Ctx) -> Result<Registry, Failure> {
    match &cli.registry {
        None => Ok(Registry::builtin()),
        Some(path) => {
            let text = ctx.read(path)?;
            Registry::parse(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
        }
    }
}

fn library(registry: &Registry, ctx: &mut Ctx, path: &Path) -> Result<Library, Failure> {
    let text = ctx.read(path)?;
    Library::parse(registry, &text).map_err(|e| Failure::invalid(format!("{}:{e}", path.display())))
}

fn category<'l>(lib: &'l Library, name: &str, path: &Path) -> Result<&'l ScenarioCategory, Failure> {
    lib.get(name)
        .ok_or_else(|| Failure::invalid(format!("{}: no category named {name:?}", path.display())))
}

fn scenario(registry: &Registry, ctx: &mut Ctx, path: &Path) -> Result<scentag::ScenarioRecord, Failure> {
    let text = ctx.read(path)?;
    parse_scenario(registry, &text).map_err(|e| Failure::invalid(format!("{}:{e}", path.display())))
}

fn dispatch(cli: &Cli, ctx: &mut Ctx) -> Result<i32, Failure> {
    let reg = registry(cli, ctx)?;
    match &cli.command {
        Command::Trees(cmd) => trees(&reg, cmd, ctx),
        Command::Category(CategoryCmd::Lint { file }) => {
            let lib = library(&reg, ctx, file)?;
            let mut count = 0;
            for (c, spans) in lib.categories.iter().zip(&lib.spans) {
                for d in lint_category(&reg, c, spans) {
                    count += 1;
                    let _ = writeln!(ctx.out, "{}:{d}", file.display());
                }
            }
            let _ = writeln!(ctx.out, "{} categories, {count} warnings", lib.categories.len());
            Ok(EXIT_OK)
        }
        Command::Category(CategoryCmd::Fmt { file }) => {
            let lib = library(&reg, ctx, file)?;
            ctx.out.push_str(&serialize_library(&reg, &lib.categories));
            Ok(EXIT_OK)
        }
        Command::Scenario(ScenarioCmd::Validate { file }) => {
            let s = scenario(&reg, ctx, file)?;
            let phases: usize = s.actors.iter().map(|a| a.phases.len()).sum();
            let _ = writeln!(
                ctx.out,
                "valid {:?}: {} actors, {phases} phases, {} static, {} condition tags",
                s.id,
                s.actors.len(),
                s.static_tags.len(),
                s.condition_tags.len()
            );
            Ok(EXIT_OK)
        }
        Command::Match {
            category_file,
            category_name,
            scenario_file,
        } => {
            let lib = library(&reg, ctx, category_file)?;
            let c = category(&lib, category_name, category_file)?;
            let s = scenario(&reg, ctx, scenario_file)?;
            match comprises(&reg, c, &s) {
                Some(w) => {
                    ctx.out.push_str(&render_witness(c, &s, &w));
                    Ok(EXIT_OK)
                }
                None => {
                    ctx.out.push_str("NO MATCH\n");
                    Ok(EXIT_NEGATIVE)
                }
            }
        }
        Command::Includes(args) => includes(&reg, args, ctx),
        Command::Store { store, command } => store_cmd(&reg, store, command, ctx),
        Command::Testcases(TestcasesCmd::Select { odd, store }) => {
            let path = cli
                .library
                .as_ref()
                .ok_or_else(|| Failure::invalid("testcases select needs --library <file>"))?;
            let lib = library(&reg, ctx, path)?;
            let odd = OddSpec::new(odd.clone())?;
            let store = Store::open(store, &reg)?;
            let selected = select_test_cases(&reg, store.catalog(), &lib.categories, &odd)?;
            for (id, names) in &selected {
                let names: Vec<String> = names.iter().map(|n| format!("{n:?}")).collect();
                let _ = writeln!(ctx.out, "{id}\t{}", names.join(" "));
            }
            Ok(if selected.is_empty() { EXIT_NEGATIVE } else { EXIT_OK })
        }
    }
}

fn trees(reg: &Registry, cmd: &TreesCmd, ctx: &mut Ctx) -> Result<i32, Failure> {
    let unknown = |id: &str| Failure::invalid(format!("unknown tag tree `{id}`"));
    match cmd {
        TreesCmd::List => {
            for t in reg.trees() {
                let _ = writeln!(ctx.out, "{}\t{}\t{}", t.id, t.scope, t.node_count());
            }
        }
        TreesCmd::Show { id } => {
            let t = reg.tree(id).ok_or_else(|| unknown(id))?;
            ctx.out.push_str(&scentag::taxonomy::tree_document(t));
        }
        TreesCmd::ExportDot { id } => {
            ctx.out.push_str(&reg.export_dot(id).map_err(|_| unknown(id))?);
        }
        TreesCmd::Export { format: Format::Text } => ctx.out.push_str(&reg.to_document()),
        TreesCmd::Export { format: Format::Dot } => {
            for t in reg.trees() {
                ctx.out.push_str(&reg.export_dot(&t.id).expect("listed tree"));
            }
        }
    }
    Ok(EXIT_OK)
}

fn tag_pool(reg: &Registry, ctx: &mut Ctx, path: &Path) -> Result<BTreeSet<TagPath>, Failure> {
    let text = ctx.read(path)?;
    let mut pool = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for word in line.split_whitespace() {
            let t = reg
                .resolve(word)
                .map_err(|e| Failure::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            pool.insert(t);
        }
    }
    Ok(pool)
}

fn includes(reg: &Registry, args: &IncludesArgs, ctx: &mut Ctx) -> Result<i32, Failure> {
    let lib = library(reg, ctx, &args.file)?;
    let larger = category(&lib, &args.larger, &args.file)?;
    let smaller = category(&lib, &args.smaller, &args.file)?;
    let mut verdict = includes_syntactic(reg, larger, smaller);
    if args.semantic && verdict.status != InclusionStatus::Includes {
        let mut bounds = match &args.tag_pool {
            Some(path) => UniverseBounds::new(args.max_actors, args.max_phases, tag_pool(reg, ctx, path)?),
            None => UniverseBounds::for_categories(reg, &[larger, smaller], args.max_actors, args.max_phases),
        };
        bounds.exclusive = args.exclusive.iter().cloned().collect();
        verdict = includes_semantic(reg, larger, smaller, &bounds).map_err(|e| Failure::invalid(e.to_string()))?;
    }
    ctx.out.push_str(&render_verdict(&verdict, &larger.name, &smaller.name));
    Ok(match verdict.status {
        InclusionStatus::Includes => EXIT_OK,
        InclusionStatus::NotIncludes | InclusionStatus::Unknown => EXIT_NEGATIVE,
    })
}

fn store_cmd(reg: &Registry, path: &Path, cmd: &StoreCmd, ctx: &mut Ctx) -> Result<i32, Failure> {
    match cmd {
        StoreCmd::Init => {
            Store::init(path)?;
            let _ = writeln!(ctx.out, "initialized {}", path.display());
        }
        StoreCmd::Add { file } => {
            let s = scenario(reg, ctx, file)?;
            let id = s.id.clone();
            Store::open(path, reg)?.add(reg, s)?;
            let _ = writeln!(ctx.out, "added {id}");
        }
        StoreCmd::Query { expr } => {
            let q = parse_query(reg, expr).map_err(|e| Failure::invalid(format!("query:{e}")))?;
            let ids = Store::open(path, reg)?.query(&q);
            for id in &ids {
                let _ = writeln!(ctx.out, "{id}");
            }
            if ids.is_empty() {
                return Ok(EXIT_NEGATIVE);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Entry point for the binary: runs against the process arguments and stdin
/// and returns the exit code after writing both streams.
pub fn main_with_io() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    let (code, out, err) = run(&args, &mut io::stdin());
    print!("{out}");
    eprint!("{err}");
    code
}
