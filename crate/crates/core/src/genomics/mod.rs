//! Synthetic tumor/normal variant-calling pipeline: a mutation-plan
//! generator, a toy sequencer, aligner, indel callers and depth statistics,
//! the relations over their outputs, and switchable faults.
//!
//! Vertices: `bwa` aligns both samples; `strelka2-germline-normal` and
//! `strelka2-germline-tumor` call indels on one sample each;
//! `strelka2-somatic` calls tumor-only indels; `sequenza-utils` reports
//! depth ratios.

pub mod align;
pub mod call;
mod components;
pub mod config;
pub mod faults;
pub mod pileup;
pub mod plan;
pub mod reads;
pub mod relations;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use crate::algebra::RelationExpr;
use crate::error::{Error, Result};
use crate::graph::PortRef;
use crate::harness::{Generator, GeneratorRequest, Registry, TestGroup};

pub use config::{GeneratorConfig, MutationKind};
pub use faults::FaultKind;
pub use plan::{generate_plan, Lineage, Mutation, MutationPlan, MutationType, Sample};

pub const BWA: &str = "bwa";
pub const GERMLINE_NORMAL: &str = "strelka2-germline-normal";
pub const GERMLINE_TUMOR: &str = "strelka2-germline-tumor";
pub const SOMATIC: &str = "strelka2-somatic";
pub const SEQUENZA: &str = "sequenza-utils";
pub const VERTICES: [&str; 5] = [BWA, GERMLINE_NORMAL, GERMLINE_TUMOR, SOMATIC, SEQUENZA];

pub const PLAN_FILE: &str = "plan.json";
pub const REFERENCE_FILE: &str = "reference.fa";

/// Writes a mutation plan, the reference and one normal and one tumor read
/// file per test. Parameters mirror [`GeneratorConfig`] (`seed`, `kind`,
/// `series_length`, `noise`, `coverage`, `read_length`, `reference_length`,
/// `segment_length`, `indel_probability`, `copynumber_probability`,
/// `min_indel_size`, `max_indel_size`, `min_dup_size`, `max_dup_size`,
/// `require_all_kinds`), plus `reference` (a nucleotide file to use instead
/// of a random reference). `kind` defaults to the one named by the class.
pub struct SeriesGenerator;

impl SeriesGenerator {
    pub fn config(req: &GeneratorRequest<'_>) -> Result<GeneratorConfig> {
        let d = GeneratorConfig::default();
        let kind = match req.params.get("kind") {
            Some(k) => k.parse()?,
            None => MutationKind::from_class(req.class).ok_or_else(|| {
                Error::config(format!(
                    "group `{}`: class `{}` names no mutation kind; set `kind`",
                    req.group_id, req.class
                ))
            })?,
        };
        Ok(GeneratorConfig {
            seed: req.param("seed", d.seed)?,
            indel_probability: req.param("indel_probability", d.indel_probability)?,
            copynumber_probability: req.param("copynumber_probability", d.copynumber_probability)?,
            min_indel_size: req.param("min_indel_size", d.min_indel_size)?,
            max_indel_size: req.param("max_indel_size", d.max_indel_size)?,
            min_dup_size: req.param("min_dup_size", d.min_dup_size)?,
            max_dup_size: req.param("max_dup_size", d.max_dup_size)?,
            series_length: req.param("series_length", d.series_length)?,
            mutation_kind: kind,
            reference_length: req.param("reference_length", d.reference_length)?,
            segment_length: req.param("segment_length", d.segment_length)?,
            read_length: req.param("read_length", d.read_length)?,
            coverage_depth: req.param("coverage", d.coverage_depth)?,
            noise_rate: req.param("noise", d.noise_rate)?,
            require_all_kinds: req.param("require_all_kinds", d.require_all_kinds)?,
        })
    }
}

impl Generator for SeriesGenerator {
    fn generate(&self, req: &GeneratorRequest<'_>) -> Result<TestGroup> {
        let config = Self::config(req)?;
        let reference = match req.params.get("reference") {
            Some(p) => Some(plan::read_reference(std::path::Path::new(p))?),
            None => None,
        };
        let plan = generate_plan(&config, reference.as_deref())?;
        fs::create_dir_all(req.dir).map_err(|e| Error::io(req.dir, e))?;
        let plan_path = req.dir.join(PLAN_FILE);
        plan.save(&plan_path)?;
        let ref_path = req.dir.join(REFERENCE_FILE);
        fs::write(&ref_path, format!(">reference\n{}\n", plan.reference)).map_err(|e| Error::io(&ref_path, e))?;

        let normal_port: PortRef = req.param("normal_port", format!("{BWA}.normal_reads"))?.parse()?;
        let tumor_port: PortRef = req.param("tumor_port", format!("{BWA}.tumor_reads"))?.parse()?;
        let default_refs = VERTICES.map(|v| format!("{v}.reference")).join(",");
        let ref_ports: Vec<PortRef> = req
            .param("reference_ports", default_refs)?
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<_>>()?;

        let mut tests = Vec::new();
        for k in 1..=config.series_length {
            let mut test = BTreeMap::new();
            for (sample, port, name) in [
                (Sample::Normal, &normal_port, "normal"),
                (Sample::Tumor, &tumor_port, "tumor"),
            ] {
                let path = req.dir.join(format!("test-{k:02}-{name}.fa"));
                reads::write_reads(&path, &reads::sequence_sample(&plan, k, sample))?;
                test.insert(port.clone(), path);
            }
            for p in &ref_ports {
                test.insert(p.clone(), ref_path.clone());
            }
            tests.push(test);
        }
        Ok(TestGroup {
            id: req.group_id.to_string(),
            class: req.class.to_string(),
            tests,
            metadata: BTreeMap::from([
                ("plan".to_string(), plan_path.display().to_string()),
                ("seed_used".to_string(), plan.seed_used.to_string()),
                ("kind".to_string(), config.mutation_kind.to_string()),
            ]),
        })
    }
}

pub fn register(reg: &mut Registry) {
    reg.add_executor("toy-align", components::toy_align);
    reg.add_executor("call-germline", components::call_germline);
    reg.add_executor("call-somatic", components::call_somatic_exec);
    reg.add_executor("depth-stat", components::depth_stat);
    reg.add_verdict("call-subset", relations::call_subset);
    reg.add_verdict("depth-persistence", relations::depth_persistence);
    reg.add_verdict("germline-split", relations::germline_split);
    reg.add_generator("genomics-series", SeriesGenerator);
}

/// Atom id of a per-kind relation, e.g. `GT_i`.
pub fn atom_id(prefix: &str, kind: MutationKind) -> String {
    format!("{prefix}_{}", kind.suffix())
}

/// The all-intersection composite over the whole pipeline for one kind:
/// `(BWA ∩ S ∩ (GT ∩ GN) ∩ SU) ∩ Add`.
pub fn full_composite(kind: MutationKind) -> RelationExpr {
    let a = |p: &str| RelationExpr::atom(atom_id(p, kind));
    let core = RelationExpr::and(
        RelationExpr::and(RelationExpr::atom("BWA"), a("S")),
        RelationExpr::and(a("GT"), a("GN")),
    );
    RelationExpr::and(
        RelationExpr::and(core, RelationExpr::atom("SU")),
        RelationExpr::atom("Add"),
    )
}

/// Settings for a generated demo spec.
#[derive(Debug, Clone)]
pub struct GenomicsDemo {
    /// Relations are declared for these kinds, and test groups generated.
    pub kinds: Vec<MutationKind>,
    /// Groups per kind; group `g` uses seed `seed + g`.
    pub groups: usize,
    pub seed: u64,
    pub noise_rate: f64,
    pub coverage: f64,
    pub series_length: usize,
    pub fault: Option<(FaultKind, String)>,
    /// Restrict composition to intersections.
    pub intersections_only: bool,
}

impl Default for GenomicsDemo {
    fn default() -> Self {
        let c = GeneratorConfig::default();
        GenomicsDemo {
            kinds: vec![MutationKind::Insertions],
            groups: 1,
            seed: 0,
            noise_rate: c.noise_rate,
            coverage: c.coverage_depth,
            series_length: c.series_length,
            fault: None,
            intersections_only: true,
        }
    }
}

impl GenomicsDemo {
    /// The spec file text.
    pub fn spec_text(&self) -> Result<String> {
        if let Some((_, v)) = &self.fault {
            if !VERTICES.contains(&v.as_str()) {
                return Err(Error::usage(format!(
                    "no demo vertex `{v}` (expected one of {})",
                    VERTICES.join(", ")
                )));
            }
        }
        let mut s = String::new();
        s.push_str("classes = [\"add-insertions\", \"add-deletions\"]\n");
        let inputs: Vec<String> = [format!("{BWA}.normal_reads"), format!("{BWA}.tumor_reads")]
            .into_iter()
            .chain(VERTICES.iter().map(|v| format!("{v}.reference")))
            .collect();
        let _ = writeln!(s, "system_inputs = {}", toml_list(&inputs));
        let outputs = [
            format!("{GERMLINE_NORMAL}.calls"),
            format!("{GERMLINE_TUMOR}.calls"),
            format!("{SOMATIC}.calls"),
            format!("{SEQUENZA}.depth"),
        ];
        let _ = writeln!(s, "system_outputs = {}", toml_list(&outputs));
        let edges = [
            format!("{BWA}.normal -> {GERMLINE_NORMAL}.alignments"),
            format!("{BWA}.tumor -> {GERMLINE_TUMOR}.alignments"),
            format!("{BWA}.normal -> {SOMATIC}.normal"),
            format!("{BWA}.tumor -> {SOMATIC}.tumor"),
            format!("{BWA}.normal -> {SEQUENZA}.normal"),
            format!("{BWA}.tumor -> {SEQUENZA}.tumor"),
        ];
        let _ = writeln!(s, "edges = {}\n", toml_list(&edges));

        let vertex = |s: &mut String, id: &str, exec: &str, ins: &[&str], outs: &[&str], extra: &[(&str, &str)]| {
            let mut params: Vec<(String, String)> = extra.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            if let Some((f, v)) = &self.fault {
                if v == id {
                    params.push(("fault".into(), f.name().into()));
                }
            }
            let _ = writeln!(s, "[[vertex]]\nid = \"{id}\"\nbuiltin = \"{exec}\"");
            let _ = writeln!(s, "inputs = {}", toml_list(ins));
            let _ = writeln!(s, "outputs = {}", toml_list(outs));
            if !params.is_empty() {
                let body: Vec<String> = params.iter().map(|(k, v)| format!("{k} = \"{v}\"")).collect();
                let _ = writeln!(s, "params = {{ {} }}", body.join(", "));
            }
            s.push('\n');
        };
        vertex(&mut s, BWA, "toy-align", &["normal_reads", "tumor_reads", "reference"], &["normal", "tumor"], &[]);
        vertex(&mut s, GERMLINE_NORMAL, "call-germline", &["alignments", "reference"], &["calls"], &[("sample", "normal")]);
        vertex(&mut s, GERMLINE_TUMOR, "call-germline", &["alignments", "reference"], &["calls"], &[("sample", "tumor")]);
        vertex(&mut s, SOMATIC, "call-somatic", &["normal", "tumor", "reference"], &["calls"], &[]);
        vertex(&mut s, SEQUENZA, "depth-stat", &["normal", "tumor", "reference"], &["depth"], &[]);

        let _ = writeln!(s, "[[atom]]\nid = \"BWA\"\nvertex = \"{BWA}\"\nverdict = \"non-empty\"\n");
        let _ = writeln!(
            s,
            "[[atom]]\nid = \"SU\"\nvertex = \"{SEQUENZA}\"\nverdict = \"depth-persistence\"\nparams = {{ port = \"{SEQUENZA}.depth\" }}\n"
        );
        for (prefix, v) in [("S", SOMATIC), ("GT", GERMLINE_TUMOR), ("GN", GERMLINE_NORMAL)] {
            for &kind in &self.kinds {
                let _ = writeln!(
                    s,
                    "[[atom]]\nid = \"{}\"\nvertex = \"{v}\"\ndomain = [\"{}\"]\nverdict = \"call-subset\"\nparams = {{ port = \"{v}.calls\" }}\n",
                    atom_id(prefix, kind),
                    kind.class()
                );
            }
        }
        let _ = writeln!(
            s,
            "[[atom]]\nid = \"Add\"\ncross = [\"{GERMLINE_TUMOR}\", \"{GERMLINE_NORMAL}\", \"{SOMATIC}\"]\nverdict = \"germline-split\"\n\
             params = {{ tumor = \"{GERMLINE_TUMOR}.calls\", normal = \"{GERMLINE_NORMAL}.calls\", somatic = \"{SOMATIC}.calls\" }}\n"
        );
        if self.intersections_only {
            s.push_str("[policy]\nextend_ops = [\"and\"]\nfanout_ops = [\"and\"]\n\n");
        }
        for &kind in &self.kinds {
            for g in 0..self.groups {
                let seed = self.seed + g as u64;
                let _ = writeln!(
                    s,
                    "[[group]]\nid = \"{kind}-{seed}\"\nclass = \"{}\"\ngenerator = \"genomics-series\"\n\
                     params = {{ seed = \"{seed}\", noise = \"{}\", coverage = \"{}\", series_length = \"{}\" }}\n",
                    kind.class(),
                    self.noise_rate,
                    self.coverage,
                    self.series_length
                );
            }
        }
        Ok(s)
    }
}

fn toml_list<S: AsRef<str>>(items: &[S]) -> String {
    let quoted: Vec<String> = items.iter().map(|i| format!("\"{}\"", i.as_ref())).collect();
    format!("[{}]", quoted.join(", "))
}
