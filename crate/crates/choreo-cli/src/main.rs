//! `choreo` — command-line front end for the adaptation pipeline.
//!
//! The pipeline runs in stages over a project file (`project.json` by
//! default) that names the choreography, the services bound to its roles,
//! and optionally a hints file and a scenario script:
//!
//! 1. `infer` analyzes every service attachment and writes
//!    `out/mapping_report.json` — the only intermediate later stages read
//!    back from disk.
//! 2. `confirm` walks any unresolved mapping ambiguities interactively
//!    and appends `confirm` hints to the project's hints file; re-running
//!    `infer` then folds them in. Batch pipelines never need it.
//! 3. `synthesize` turns the report into coordination delegates
//!    (`out/cds/`) and adapter chains (`out/adapters/`), plus a
//!    plain-text audit report.
//! 4. `enact` runs the project's scenario in the deterministic harness
//!    and records `out/trace.jsonl`.
//! 5. `verify` enacts and then checks the trace against the
//!    choreography, writing `out/conformance.json` and `.txt`.
//!
//! Every artifact is rendered canonically (sorted keys, stable order), so
//! identical inputs produce byte-identical outputs.
//!
//! Exit codes: 0 success (or conformant trace); 1 unreadable or invalid
//! inputs, wiring failures, missing mapping report; 2 unsatisfiable,
//! conflicting, or unsupported adaptation; 3 unresolved mapping
//! ambiguities; 4 conformance violations.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use choreo_core::canon;
use choreo_core::enactment::{check_conformance, TraceKind, Verdict};
use choreo_core::mapping::{AmbiguousMapping, Hint, HintSet, QualifiedLeaf, Verdict as HintVerdict};
use choreo_core::project::{MappingBundle, Project, ProjectError};
use choreo_core::synthesis::{emit_adapter, emit_cd, SynthesisError};

#[derive(Parser)]
#[command(
    name = "choreo",
    version,
    about = "Synthesize and enact protocol adapters for choreographed services",
    max_term_width = 80
)]
struct Cli {
    /// Project file.
    #[arg(long, global = true, default_value = "project.json")]
    config: PathBuf,

    /// Override the project's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the project's output directory (resolved against the
    /// current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run delegates in observe-only mode: out-of-order interactions pass
    /// through and surface as conformance violations instead of blocks.
    #[arg(long, global = true)]
    bypass_enforcement: bool,

    /// Tick budget for enactment; runs that exhaust it are recorded as
    /// incomplete.
    #[arg(long, global = true, default_value_t = 10_000)]
    max_ticks: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer data mappings for every service attachment.
    Infer,
    /// Resolve mapping ambiguities interactively by appending hints.
    Confirm,
    /// Synthesize coordination delegates and adapter chains.
    Synthesize,
    /// Run the project's scenario and record a trace.
    Enact,
    /// Run the scenario and check the trace against the choreography.
    Verify,
}

/// CLI-level failures; everything else arrives as a [`ProjectError`].
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Project(#[from] ProjectError),

    #[error("cannot write `{path}`: {detail}")]
    Write { path: PathBuf, detail: String },

    #[error("{0}")]
    Confirm(String),
}

/// Maps a failure to the documented exit code: adaptation impossibilities
/// exit 2, unresolved ambiguities exit 3, everything else (unreadable or
/// invalid inputs, wiring failures) exits 1.
fn exit_code_for(err: &CliError) -> u8 {
    match err {
        CliError::Project(ProjectError::Synthesis(e)) => match e {
            SynthesisError::Ambiguous { .. } => 3,
            SynthesisError::Unsatisfiable { .. }
            | SynthesisError::Conflict { .. }
            | SynthesisError::Unsupported { .. } => 2,
            _ => 1,
        },
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    let mut project = Project::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        project.seed = seed;
    }
    if let Some(out) = &cli.out {
        project.out_dir = out.clone();
    }
    match cli.command {
        Command::Infer => cmd_infer(&project),
        Command::Confirm => cmd_confirm(&project),
        Command::Synthesize => cmd_synthesize(&project),
        Command::Enact => cmd_enact(&project, cli),
        Command::Verify => cmd_verify(&project, cli),
    }
}

/// Where `infer` leaves the mapping bundle for the later stages.
fn bundle_path(project: &Project) -> PathBuf {
    project.out_dir.join("mapping_report.json")
}

/// Writes one artifact, creating parent directories, and announces it.
fn write_artifact(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Write {
            path: parent.to_path_buf(),
            detail: e.to_string(),
        })?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Write {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_infer(project: &Project) -> Result<ExitCode, CliError> {
    let bundle = project.infer()?;
    write_artifact(&bundle_path(project), &bundle.to_canonical())?;
    for att in &bundle.attachments {
        println!(
            "attachment {} -> {}: {} mapping(s), {} unmapped, {} ambiguity(ies)",
            att.service,
            att.cd,
            att.report.mappings.len(),
            att.report.unmapped.len(),
            att.report.ambiguities.len(),
        );
        for amb in &att.report.ambiguities {
            print!("{}", render_ambiguity(amb));
        }
    }
    let ambiguities = bundle.ambiguity_count();
    if ambiguities > 0 {
        eprintln!(
            "{ambiguities} unresolved ambiguity(ies): run `choreo confirm` or add hints, \
             then re-run `choreo infer`"
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

/// One ambiguity with its tied candidate assignments, numbered for the
/// `confirm` prompt.
fn render_ambiguity(amb: &AmbiguousMapping) -> String {
    let mut out = format!(
        "ambiguous: {} -> {} has {} tied candidate assignment(s)\n",
        amb.mapping.sub,
        amb.mapping.sup,
        amb.candidates.len(),
    );
    for (i, candidate) in amb.candidates.iter().enumerate() {
        let pairs: Vec<String> = candidate
            .pairs()
            .iter()
            .map(|c| format!("{} -> {} ({:.1})", c.source, c.target, c.score.as_f64()))
            .collect();
        out.push_str(&format!("  candidate {}: {}\n", i + 1, pairs.join(", ")));
    }
    out
}

/// Interactive ambiguity resolution. Each choice turns one candidate's
/// correspondences into `confirm` hints; the accepted hints are appended
/// to the project's hints file so the next `infer` resolves the tie.
/// Reads stdin line by line, so it also works piped.
fn cmd_confirm(project: &Project) -> Result<ExitCode, CliError> {
    let hints_path = project.hints_path.clone().ok_or_else(|| {
        CliError::Confirm(
            "the project names no hints file; add a `hints` entry to the project file first"
                .to_string(),
        )
    })?;
    let bundle = project.infer()?;
    if bundle.ambiguity_count() == 0 {
        println!("no ambiguities to resolve");
        return Ok(ExitCode::SUCCESS);
    }

    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut chosen: Vec<Hint> = Vec::new();
    'all: for att in &bundle.attachments {
        for amb in &att.report.ambiguities {
            println!("service {} toward {}:", att.service, att.cd);
            print!("{}", render_ambiguity(amb));
            loop {
                print!("choose 1-{}, skip, or quit> ", amb.candidates.len());
                std::io::stdout().flush().ok();
                // EOF ends the session like `quit`.
                let line = match lines.next() {
                    Some(Ok(line)) => line,
                    _ => break 'all,
                };
                let answer = line.trim();
                match answer {
                    "skip" => break,
                    "quit" => break 'all,
                    _ => match answer.parse::<usize>() {
                        Ok(i) if (1..=amb.candidates.len()).contains(&i) => {
                            for corr in amb.candidates[i - 1].pairs() {
                                println!("confirmed: {} -> {}", corr.source, corr.target);
                                chosen.push(Hint {
                                    verdict: HintVerdict::Confirm,
                                    source: QualifiedLeaf {
                                        qname: amb.mapping.sub.clone(),
                                        path: corr.source.clone(),
                                    },
                                    target: QualifiedLeaf {
                                        qname: amb.mapping.sup.clone(),
                                        path: corr.target.clone(),
                                    },
                                });
                            }
                            break;
                        }
                        _ => println!("unrecognized choice `{answer}`"),
                    },
                }
            }
        }
    }

    if chosen.is_empty() {
        println!("nothing confirmed");
        return Ok(ExitCode::SUCCESS);
    }
    let new_hints = HintSet::new(chosen);
    // Guard against contradictions and dangling leaves before touching
    // the file; candidate-derived hints should always pass.
    let merged = project
        .hints
        .merged(&new_hints)
        .map_err(ProjectError::Mapping)?;
    merged
        .validate(&project.registry)
        .map_err(ProjectError::Mapping)?;

    let mut text = std::fs::read_to_string(&hints_path).unwrap_or_default();
    if !text.is_empty() && !text.ends_with('\n') {
        text.push('\n');
    }
    text.push_str("# confirmed interactively\n");
    for hint in new_hints.hints() {
        text.push_str(&hint.to_string());
        text.push('\n');
    }
    std::fs::write(&hints_path, text).map_err(|e| CliError::Write {
        path: hints_path.clone(),
        detail: e.to_string(),
    })?;
    println!(
        "appended {} hint(s) to {}; re-run `choreo infer` to fold them in",
        new_hints.hints().len(),
        hints_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_synthesize(project: &Project) -> Result<ExitCode, CliError> {
    let bundle = MappingBundle::load(&bundle_path(project))?;
    let output = project.synthesize(&bundle)?;
    for cd in &output.cds {
        let path = project.out_dir.join("cds").join(format!("{}.json", cd.id));
        write_artifact(&path, &emit_cd(cd))?;
    }
    for adapter in &output.adapters {
        let path = project
            .out_dir
            .join("adapters")
            .join(format!("{}.json", adapter.id));
        write_artifact(&path, &emit_adapter(adapter))?;
    }
    write_artifact(
        &project.out_dir.join("synthesis_report.txt"),
        &output.report_text,
    )?;
    println!(
        "{} delegate(s), {} adapter(s)",
        output.cds.len(),
        output.adapters.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_enact(project: &Project, cli: &Cli) -> Result<ExitCode, CliError> {
    let bundle = MappingBundle::load(&bundle_path(project))?;
    let trace = project.enact(&bundle, cli.bypass_enforcement, cli.max_ticks)?;
    write_artifact(&project.out_dir.join("trace.jsonl"), &trace.to_jsonl())?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for kind in [
        TraceKind::Sent,
        TraceKind::Forwarded,
        TraceKind::Delivered,
        TraceKind::Dropped,
        TraceKind::Blocked,
        TraceKind::DeadLetter,
    ] {
        counts.insert(kind_label(kind), trace.events_of(kind).count());
    }
    let summary: Vec<String> = [
        "sent",
        "forwarded",
        "delivered",
        "dropped",
        "blocked",
        "dead-letter",
    ]
    .iter()
    .map(|label| format!("{label} {}", counts[label]))
    .collect();
    println!("{}", summary.join(", "));
    if trace.meta.incomplete {
        eprintln!(
            "warning: tick budget ({}) exhausted with work still queued; \
             the trace is a prefix of the full run",
            cli.max_ticks
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn kind_label(kind: TraceKind) -> &'static str {
    match kind {
        TraceKind::Sent => "sent",
        TraceKind::Forwarded => "forwarded",
        TraceKind::Delivered => "delivered",
        TraceKind::Dropped => "dropped",
        TraceKind::Blocked => "blocked",
        TraceKind::DeadLetter => "dead-letter",
    }
}

fn cmd_verify(project: &Project, cli: &Cli) -> Result<ExitCode, CliError> {
    let bundle = MappingBundle::load(&bundle_path(project))?;
    let trace = project.enact(&bundle, cli.bypass_enforcement, cli.max_ticks)?;
    write_artifact(&project.out_dir.join("trace.jsonl"), &trace.to_jsonl())?;
    let report =
        check_conformance(&trace, &project.choreography).map_err(ProjectError::Enactment)?;
    let value = serde_json::to_value(&report).expect("conformance reports serialize");
    write_artifact(
        &project.out_dir.join("conformance.json"),
        &canon::to_canonical_string(&value),
    )?;
    write_artifact(&project.out_dir.join("conformance.txt"), &report.render_text())?;
    print!("{}", report.render_text());
    match report.verdict {
        Verdict::Conformant => Ok(ExitCode::SUCCESS),
        Verdict::Violations => Ok(ExitCode::from(4)),
    }
}
