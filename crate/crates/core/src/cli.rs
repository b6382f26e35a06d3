//! Command-line front end. Exit status: 0 every evaluated composite held,
//! 1 some composite was FALSE, 2 configuration or usage error, 3 derivation
//! produced no candidate.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::algebra::RelationExpr;
use crate::builtins::registry;
use crate::derive::{derive, BranchMode, Derivation};
use crate::detector::{FOUR_COMPONENT_SPEC, STARRED_SPEC, THREE_COMPONENT_SPEC};
use crate::error::{Error, Result};
use crate::genomics::{full_composite, FaultKind, GenomicsDemo, MutationKind};
use crate::harness::{reevaluate, run_composite, CompositeRun, Report};
use crate::relation::Catalog;
use crate::spec_file::LoadedSpec;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE_FOUND: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;

/// Environment variable naming the default workdir root.
pub const WORKDIR_ENV: &str = "COMPMR_WORKDIR";

#[derive(Parser, Debug)]
#[command(name = "compmr", version, about = "Derive and run composite metamorphic relations over component pipelines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derive composite relations from a spec file.
    Derive {
        /// System declaration (TOML).
        #[arg(long)]
        spec: PathBuf,
        /// Where to write the candidate list (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the spec's branch handling.
        #[arg(long)]
        mode: Option<BranchMode>,
    },
    /// Execute the spec's test groups and evaluate one composite.
    Run {
        /// System declaration (TOML).
        #[arg(long)]
        spec: PathBuf,
        /// A composite expression, or the index of a derived candidate.
        #[arg(long, default_value = "0")]
        composite: String,
        /// Where series are run and reports written (else $COMPMR_WORKDIR, else ./compmr-work).
        #[arg(long)]
        workdir: Option<PathBuf>,
        /// Groups run at once.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Reseed generated groups: the i-th generated group gets seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the spec's branch handling.
        #[arg(long)]
        mode: Option<BranchMode>,
        /// Reuse outputs whose inputs are unchanged since the last run.
        #[arg(long)]
        resume: bool,
        /// Re-evaluate persisted traces without executing anything.
        #[arg(long, conflicts_with = "resume")]
        offline: bool,
    },
    /// Run a built-in demo end to end.
    #[command(subcommand)]
    Demo(Demo),
}

#[derive(Subcommand, Debug)]
pub enum Demo {
    /// Image pipeline with cat and dog detectors.
    Detector {
        /// Add the park/street pre-detector and its two branches.
        #[arg(long)]
        four_component: bool,
        /// Use detector relations defined on both classes.
        #[arg(long, conflicts_with = "four_component")]
        starred: bool,
        /// Branch handling for the four-component pipeline.
        #[arg(long)]
        mode: Option<BranchMode>,
        #[command(flatten)]
        common: DemoCommon,
    },
    /// Synthetic tumor/normal indel-calling pipeline.
    Genomics {
        /// insertions or deletions.
        #[arg(long, default_value = "insertions")]
        kind: MutationKind,
        /// drop-edge, offset or swallow.
        #[arg(long)]
        fault: Option<FaultKind>,
        /// Vertex the fault is injected into.
        #[arg(long, default_value = "strelka2-germline-tumor")]
        fault_vertex: String,
        /// Per-base substitution rate in simulated reads.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Mean read depth.
        #[arg(long, default_value_t = 30.0)]
        coverage: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of series; series g uses seed + g.
        #[arg(long, default_value_t = 1)]
        groups: usize,
        /// Tests per series.
        #[arg(long, default_value_t = 9)]
        series_length: usize,
        #[command(flatten)]
        common: DemoCommon,
    },
}

#[derive(Args, Debug)]
pub struct DemoCommon {
    /// Root under which the demo directory is created.
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Groups run at once.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

fn workdir_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(WORKDIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("compmr-work"))
}

/// Parse arguments from the process and run; returns the exit status.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

pub fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Derive { spec, out, mode } => {
            let loaded = LoadedSpec::from_file(&spec, &registry())?;
            let d = derive_loaded(&loaded, mode)?;
            print_derivation(&d);
            if let Some(out) = out {
                write_derivation(&d, &out)?;
            }
            Ok(if d.candidates.is_empty() { EXIT_EXHAUSTED } else { EXIT_PASS })
        }
        Command::Run {
            spec,
            composite,
            workdir,
            parallel,
            seed,
            mode,
            resume,
            offline,
        } => {
            let mut loaded = LoadedSpec::from_file(&spec, &registry())?;
            if let Some(s) = seed {
                reseed(&mut loaded, s);
            }
            let workdir = workdir_root(workdir);
            let (expr, catalog) = resolve_composite(&loaded, &composite, mode)?;
            loaded.materialize_groups(&workdir)?;
            let run = if offline {
                let verdicts = reevaluate(&loaded.system, &catalog, &expr, &workdir)?;
                CompositeRun {
                    domain: expr.domain_of(catalog.universe(), &|id| catalog.domain(id))?,
                    expr,
                    verdicts,
                    inapplicable: Vec::new(),
                }
            } else {
                run_composite(&loaded.system, &catalog, &expr, &workdir, parallel, resume)?
            };
            report(&[run], &catalog, &workdir)
        }
        Command::Demo(demo) => run_demo(demo),
    }
}

fn derive_loaded(loaded: &LoadedSpec, mode: Option<BranchMode>) -> Result<Derivation> {
    let sys = &loaded.system;
    let mut policy = sys.policy.clone();
    if let Some(m) = mode {
        policy.branch_mode = m;
    }
    derive(&sys.graph, &sys.catalog, &policy)
}

fn reseed(loaded: &mut LoadedSpec, seed: u64) {
    for (i, g) in loaded.groups.iter_mut().filter(|g| g.generator.is_some()).enumerate() {
        g.params.insert("seed".into(), (seed + i as u64).to_string());
    }
}

/// An index picks a derived candidate; anything else is parsed as an
/// expression over the spec's relations.
fn resolve_composite(
    loaded: &LoadedSpec,
    text: &str,
    mode: Option<BranchMode>,
) -> Result<(RelationExpr, Catalog)> {
    if let Ok(i) = text.trim().parse::<usize>() {
        let d = derive_loaded(loaded, mode)?;
        let c = d.candidates.get(i).ok_or_else(|| {
            Error::usage(format!("no candidate {i}: derivation produced {}", d.candidates.len()))
        })?;
        return Ok((c.expr.clone(), d.catalog.clone()));
    }
    let expr: RelationExpr = text.parse()?;
    let catalog = &loaded.system.catalog;
    if expr.atoms().iter().all(|a| catalog.get(a).is_some()) {
        return Ok((expr, catalog.clone()));
    }
    // restricted relations only exist in the derived catalog
    let d = derive_loaded(loaded, mode)?;
    for a in expr.atoms() {
        d.catalog.require(a)?;
    }
    Ok((expr, d.catalog))
}

fn print_derivation(d: &Derivation) {
    println!(
        "{} candidate(s) from {} of {} selection(s){}",
        d.candidates.len(),
        d.selections_examined,
        d.total_selections,
        if d.truncated { " (truncated by policy caps)" } else { "" }
    );
    for (i, c) in d.candidates.iter().enumerate() {
        println!("[{i}] {}", c.expr);
        println!("    {}  domain {}", c.expr.pretty(), c.domain);
    }
    for x in &d.exhausted {
        let chosen: Vec<String> = x.chosen.iter().map(|(v, r)| format!("{v}: {r}")).collect();
        println!(
            "exhausted selection ({} composite(s) tried, all with empty domain): {}",
            x.candidates_tried,
            chosen.join(", ")
        );
    }
}

pub fn derivation_json(d: &Derivation) -> serde_json::Value {
    json!({
        "total_selections": d.total_selections.to_string(),
        "selections_examined": d.selections_examined,
        "truncated": d.truncated,
        "candidates": d.candidates.iter().enumerate().map(|(i, c)| json!({
            "index": i,
            "expr": c.expr.to_string(),
            "pretty": c.expr.pretty(),
            "domain": c.domain.tags(),
            "provenance": c.provenance,
        })).collect::<Vec<_>>(),
        "exhausted": d.exhausted.iter().map(|x| json!({
            "chosen": x.chosen.iter().map(|(v, r)| (v.clone(), json!(r.to_string()))).collect::<serde_json::Map<_, _>>(),
            "candidates_tried": x.candidates_tried,
        })).collect::<Vec<_>>(),
    })
}

fn write_derivation(d: &Derivation, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(&derivation_json(d)).expect("json") + "\n";
    fs::write(out, text).map_err(|e| Error::io(out, e))
}

fn report(runs: &[CompositeRun], catalog: &Catalog, workdir: &Path) -> Result<i32> {
    let rep = Report::new(runs, catalog);
    let dir = workdir.join("report");
    rep.write(&dir)?;
    print!("{}", rep.render_text());
    for r in runs {
        if !r.inapplicable.is_empty() {
            println!("{}: skipped groups outside the domain: {}", r.expr, r.inapplicable.join(", "));
        }
    }
    println!("reports written to {}", dir.display());
    Ok(if runs.iter().any(CompositeRun::any_false) {
        EXIT_FAILURE_FOUND
    } else {
        EXIT_PASS
    })
}

/// Write the spec text into `dir`, load it, derive, and run every composite
/// in `wanted` that the derivation produced (or the first candidate when
/// none of them is).
fn run_spec_text(
    text: &str,
    dir: &Path,
    mode: Option<BranchMode>,
    wanted: &[RelationExpr],
    parallel: usize,
) -> Result<i32> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let spec_path = dir.join("spec.toml");
    fs::write(&spec_path, text).map_err(|e| Error::io(&spec_path, e))?;
    let mut loaded = LoadedSpec::from_file(&spec_path, &registry())?;
    let d = derive_loaded(&loaded, mode)?;
    print_derivation(&d);
    write_derivation(&d, &dir.join("derivation.json"))?;
    if d.candidates.is_empty() {
        return Ok(EXIT_EXHAUSTED);
    }
    let mut chosen: Vec<RelationExpr> = wanted
        .iter()
        .filter_map(|w| d.position_of(w).map(|i| d.candidates[i].expr.clone()))
        .collect();
    if chosen.is_empty() {
        chosen.push(d.candidates[0].expr.clone());
    }
    loaded.materialize_groups(dir)?;
    let mut runs = Vec::new();
    for expr in &chosen {
        println!("running {expr}");
        runs.push(run_composite(&loaded.system, &d.catalog, expr, dir, parallel, false)?);
    }
    report(&runs, &d.catalog, dir)
}

fn parse_all(texts: &[&str]) -> Vec<RelationExpr> {
    texts.iter().map(|t| t.parse().expect("built-in expression")).collect()
}

fn run_demo(demo: Demo) -> Result<i32> {
    match demo {
        Demo::Detector {
            four_component,
            starred,
            mode,
            common,
        } => {
            let (name, text, wanted) = if four_component {
                let per_branch = mode.unwrap_or(BranchMode::PerBranch) == BranchMode::PerBranch;
                let wanted: Vec<String> = if per_branch {
                    [("or", "hat_or"), ("or", "hat_and"), ("xor", "hat_or"), ("xor", "hat_and")]
                        .iter()
                        .map(|(b, k)| {
                            format!(
                                "and(atom(N), {b}(and(atom(P), {k}(atom(K), atom(D))), and(atom(Q), {k}(atom(K), indef(atom(D))))))"
                            )
                        })
                        .collect()
                } else {
                    vec!["and(and(atom(N), or(atom(P), atom(Q))), hat_or(atom(K), atom(D)))".into()]
                };
                ("detector-four", FOUR_COMPONENT_SPEC, wanted)
            } else if starred {
                (
                    "detector-starred",
                    STARRED_SPEC,
                    vec![
                        "and(atom(N), or(atom(K*), atom(D*)))".into(),
                        "and(atom(N), and(atom(K*), atom(D*)))".into(),
                    ],
                )
            } else {
                (
                    "detector",
                    THREE_COMPONENT_SPEC,
                    vec!["and(atom(N), hat_or(atom(K), atom(D)))".into()],
                )
            };
            let wanted: Vec<&str> = wanted.iter().map(String::as_str).collect();
            let dir = workdir_root(common.workdir).join(name);
            run_spec_text(text, &dir, mode, &parse_all(&wanted), common.parallel)
        }
        Demo::Genomics {
            kind,
            fault,
            fault_vertex,
            noise,
            coverage,
            seed,
            groups,
            series_length,
            common,
        } => {
            let demo = GenomicsDemo {
                kinds: vec![kind],
                groups,
                seed,
                noise_rate: noise,
                coverage,
                series_length,
                fault: fault.map(|f| (f, fault_vertex)),
                intersections_only: true,
            };
            let text = demo.spec_text()?;
            let dir = workdir_root(common.workdir).join(format!("genomics-{kind}"));
            run_spec_text(&text, &dir, None, &[full_composite(kind)], common.parallel)
        }
    }
}
