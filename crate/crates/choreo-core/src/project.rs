//! Project files: the on-disk layout that feeds the pipeline, and the
//! pipeline itself — inference, synthesis, and enactment driven from one
//! configuration file.
//!
//! A project is a JSON file:
//!
//! ```json
//! {
//!   "choreography": "choreography.json",
//!   "services": [
//!     {
//!       "role": "Client",
//!       "interface": "client.interface.json",
//!       "protocol": "client.protocol.json"
//!     }
//!   ],
//!   "hints": "hints.txt",
//!   "scenario": "scenarios/golden.json",
//!   "seed": 42,
//!   "out": "out"
//! }
//! ```
//!
//! Every path is relative to the file that states it: project entries to
//! the project file, schema references to the interface or choreography
//! file naming them. Interface and choreography documents carry a
//! `schemas` member mapping message names to schema files — `.xsd` for
//! the XML subset, `.json` for the compact JSON form — so every message
//! a project mentions is registered before any pipeline step runs.
//!
//! The pipeline itself is three calls on a loaded [`Project`]:
//! [`Project::infer`] produces one [`MappingReport`] per attachment (a
//! bound service facing one delegate), [`Project::synthesize`] turns a
//! saved [`MappingBundle`] into delegates and adapters, and
//! [`Project::enact`] wires everything into a harness and runs the
//! configured scenario. Synthesis and enactment both re-derive delegates
//! from the choreography rather than re-reading emitted files, so the
//! mapping bundle is the only intermediate artifact that feeds back in.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enactment::{
    build_harness, enact as run_harness, EnactmentError, Reaction, ScriptStep, ServiceStub, Trace,
};
use crate::mapping::{
    infer_mappings, Direction, HintSet, InterfaceSpec, MappingError, MappingReport, Mep,
    OperationSpec,
};
use crate::patterns::PatternInstance;
use crate::schema::{
    parse_schema_json, parse_xsd_subset, QName, SchemaError, SchemaRegistry,
};
use crate::synthesis::{
    adapter_report, cd_interface_toward, cd_protocol_toward, interacting_pairs, select_patterns,
    synthesize_cd, AdapterSpec, AttachmentSide, CdSpec, ChoreoNode, ChoreographySpec, Edge,
    ProtocolSpec, SynthesisError,
};

/// Failures while loading a project or running a pipeline step over it.
#[derive(Debug, Error)]
pub enum ProjectError {
    /// A referenced file cannot be read.
    #[error("cannot read `{path}`: {detail}")]
    Io { path: PathBuf, detail: String },

    /// A file exists but does not parse as what the project says it is.
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    /// The configuration is structurally unusable (bindings, roles,
    /// cross-references between documents).
    #[error("invalid project: {0}")]
    Config(String),

    /// A pipeline step needs the mapping bundle and none has been written.
    #[error("mapping report `{path}` not found: run `infer` first")]
    MissingReport { path: PathBuf },

    /// The saved mapping bundle no longer matches the project's
    /// attachments, so synthesis would pair reports with the wrong sides.
    #[error("stale mapping report: {0}; re-run `infer`")]
    Stale(String),

    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Enactment(#[from] EnactmentError),
}

/// The project file as written.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawProject {
    choreography: String,
    services: Vec<RawService>,
    #[serde(default)]
    hints: Option<String>,
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_out")]
    out: String,
    #[serde(default)]
    verbose: bool,
}

fn default_out() -> String {
    "out".to_string()
}

/// One service binding: the choreography role it plays and the files
/// describing it.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawService {
    role: String,
    interface: String,
    protocol: String,
}

/// An interface document: the interface plus the schemas of the messages
/// it names.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct InterfaceDoc {
    service: String,
    operations: Vec<OperationSpec>,
    #[serde(default)]
    schemas: BTreeMap<String, String>,
}

/// A choreography document: the flow graph plus the schemas of the task
/// messages (which are named from the coordinating delegate's
/// perspective, `CD_A_B.operation.message`).
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ChoreographyDoc {
    name: String,
    roles: Vec<String>,
    nodes: Vec<ChoreoNode>,
    edges: Vec<Edge>,
    #[serde(default)]
    schemas: BTreeMap<String, String>,
}

/// An enactment scenario: scripted sends and reactive rules per role.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub scripts: BTreeMap<String, Vec<ScriptStep>>,
    #[serde(default)]
    pub reactions: BTreeMap<String, Vec<Reaction>>,
}

/// A service bound to a choreography role.
#[derive(Debug, Clone)]
pub struct BoundService {
    pub role: String,
    pub interface: InterfaceSpec,
    pub protocol: ProtocolSpec,
}

/// A loaded, cross-validated project: every referenced file parsed, every
/// message schema registered, every role bound.
#[derive(Debug, Clone)]
pub struct Project {
    pub choreography: ChoreographySpec,
    /// Declaration order of the project file; doubles as stub order.
    pub services: Vec<BoundService>,
    pub hints: HintSet,
    /// Where the hints came from, when the project names a hints file —
    /// interactive confirmation appends to it.
    pub hints_path: Option<PathBuf>,
    pub scenario: Option<Scenario>,
    pub registry: SchemaRegistry,
    pub seed: u64,
    /// Output directory, resolved against the project file's directory.
    pub out_dir: PathBuf,
    pub verbose: bool,
}

/// One side of one delegate: the indices tie a [`Project`] service to a
/// delegate of [`Attachments`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttachmentPlan {
    pub cd_index: usize,
    pub role: String,
    pub service_index: usize,
}

/// The delegates of a project and every service attachment to them, in
/// canonical order: interacting pairs as first encountered in the
/// choreography, initiator side first within each pair.
#[derive(Debug, Clone)]
pub struct Attachments {
    pub cds: Vec<CdSpec>,
    pub plans: Vec<AttachmentPlan>,
}

/// One attachment's mapping analysis, tagged with what it analyzed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttachmentReport {
    pub cd: String,
    pub role: String,
    pub service: String,
    pub report: MappingReport,
}

/// The full output of `infer`: one report per attachment, in attachment
/// order. This is the only artifact later steps read back from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MappingBundle {
    pub attachments: Vec<AttachmentReport>,
}

impl MappingBundle {
    /// Unresolved ambiguities across all attachments.
    pub fn ambiguity_count(&self) -> usize {
        self.attachments
            .iter()
            .map(|a| a.report.ambiguities.len())
            .sum()
    }

    /// Canonical rendering (sorted keys, stable across runs).
    pub fn to_canonical(&self) -> String {
        let value = serde_json::to_value(self).expect("mapping bundles serialize");
        crate::canon::to_canonical_string(&value)
    }

    /// Reads a bundle back from the file `infer` wrote.
    pub fn load(path: &Path) -> Result<MappingBundle, ProjectError> {
        if !path.exists() {
            return Err(ProjectError::MissingReport {
                path: path.to_path_buf(),
            });
        }
        let text = read_file(path)?;
        serde_json::from_str(&text).map_err(|e| ProjectError::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

/// Everything `synthesize` produces: the delegates, the adapters (one per
/// attachment whose service does not already speak the delegate's
/// language), and the plain-text audit report.
#[derive(Debug, Clone)]
pub struct SynthesisOutput {
    pub cds: Vec<CdSpec>,
    pub adapters: Vec<AdapterSpec>,
    pub report_text: String,
}

impl Project {
    /// Loads and cross-validates a project file.
    pub fn load(path: &Path) -> Result<Project, ProjectError> {
        let text = read_file(path)?;
        let raw: RawProject = serde_json::from_str(&text).map_err(|e| ProjectError::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        let root = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();

        let mut registry = SchemaRegistry::new();
        let choreo_path = root.join(&raw.choreography);
        let choreography = load_choreography(&choreo_path, &mut registry)?;
        choreography
            .validate()
            .map_err(|e| parse_error(&choreo_path, &e))?;

        let mut services = Vec::new();
        for entry in &raw.services {
            let interface_path = root.join(&entry.interface);
            let interface = load_interface(&interface_path, &mut registry)?;
            interface
                .validate_schemas(&registry)
                .map_err(|e| parse_error(&interface_path, &e))?;
            let protocol_path = root.join(&entry.protocol);
            let protocol = load_protocol(&protocol_path)?;
            check_protocol_speaks_interface(&protocol, &interface)
                .map_err(|detail| parse_error(&protocol_path, &detail))?;
            services.push(BoundService {
                role: entry.role.clone(),
                interface,
                protocol,
            });
        }
        check_bindings(&choreography, &services)?;

        for (id, task) in choreography.tasks() {
            if registry.get(&task.message).is_none() {
                return Err(ProjectError::Config(format!(
                    "task `{id}` carries `{}`, which no schema entry defines",
                    task.message
                )));
            }
        }

        let (hints, hints_path) = match &raw.hints {
            Some(rel) => {
                let path = root.join(rel);
                let text = read_file(&path)?;
                let set = HintSet::parse(&text).map_err(|e| parse_error(&path, &e))?;
                (set, Some(path))
            }
            None => (HintSet::empty(), None),
        };
        hints
            .validate(&registry)
            .map_err(ProjectError::Mapping)?;

        let scenario = match &raw.scenario {
            Some(rel) => {
                let scenario_path = root.join(rel);
                let text = read_file(&scenario_path)?;
                let scenario: Scenario =
                    serde_json::from_str(&text).map_err(|e| parse_error(&scenario_path, &e))?;
                check_scenario_roles(&scenario, &services)?;
                Some(scenario)
            }
            None => None,
        };

        Ok(Project {
            choreography,
            services,
            hints,
            hints_path,
            scenario,
            registry,
            seed: raw.seed,
            out_dir: root.join(&raw.out),
            verbose: raw.verbose,
        })
    }

    /// The service playing a role, by index into [`Project::services`].
    pub fn service_index(&self, role: &str) -> Option<usize> {
        self.services.iter().position(|s| s.role == role)
    }

    /// Synthesizes the delegates and enumerates every attachment in
    /// canonical order.
    pub fn attachments(&self) -> Result<Attachments, ProjectError> {
        let mut cds = Vec::new();
        let mut plans = Vec::new();
        for (a, b) in interacting_pairs(&self.choreography) {
            let cd = synthesize_cd(&self.choreography, &a, &b)?;
            let cd_index = cds.len();
            cds.push(cd);
            for role in [a, b] {
                let service_index = self
                    .service_index(&role)
                    .expect("bindings checked at load time");
                plans.push(AttachmentPlan {
                    cd_index,
                    role,
                    service_index,
                });
            }
        }
        Ok(Attachments { cds, plans })
    }

    /// Runs mapping inference for every attachment under the project's
    /// hints.
    pub fn infer(&self) -> Result<MappingBundle, ProjectError> {
        let attachments = self.attachments()?;
        let mut out = Vec::new();
        for plan in &attachments.plans {
            let cd = &attachments.cds[plan.cd_index];
            let service = &self.services[plan.service_index];
            let face = cd_interface_toward(cd, &plan.role)?;
            let report = infer_mappings(&service.interface, &face, &self.hints, &self.registry)?;
            out.push(AttachmentReport {
                cd: cd.id.clone(),
                role: plan.role.clone(),
                service: service.interface.service.clone(),
                report,
            });
        }
        Ok(MappingBundle { attachments: out })
    }

    /// Selects a pattern chain for every attachment of the bundle,
    /// skipping services that already mirror their delegate's face.
    /// Adapters are numbered `Adapter1`, `Adapter2`, … in attachment
    /// order, counting only the ones actually emitted.
    pub fn synthesize(&self, bundle: &MappingBundle) -> Result<SynthesisOutput, ProjectError> {
        let attachments = self.attachments()?;
        check_bundle_matches(self, &attachments, bundle)?;

        let mut report_text = String::new();
        for cd in &attachments.cds {
            report_text.push_str(&format!(
                "cd {}: roles {} + {}, {} states, {} transitions\n",
                cd.id,
                cd.roles.0,
                cd.roles.1,
                cd.states.len(),
                cd.transitions.len()
            ));
        }

        // First pass: one chain per attachment (None where the service
        // already speaks the delegate's language).
        let mut specs: Vec<Option<AdapterSpec>> = Vec::new();
        for (plan, tagged) in attachments.plans.iter().zip(&bundle.attachments) {
            let cd = &attachments.cds[plan.cd_index];
            let service = &self.services[plan.service_index];
            if crate::enactment::mirrors_face(&service.interface, cd, &plan.role) {
                specs.push(None);
                continue;
            }
            let id = format!("Adapter{}", specs.iter().flatten().count() + 1);
            let face_interface = cd_interface_toward(cd, &plan.role)?;
            let face_protocol = cd_protocol_toward(cd, &plan.role);
            let spec = select_patterns(
                &id,
                &tagged.report,
                AttachmentSide {
                    interface: &service.interface,
                    protocol: &service.protocol,
                },
                AttachmentSide {
                    interface: &face_interface,
                    protocol: &face_protocol,
                },
                &self.registry,
            )?;
            specs.push(Some(spec));
        }

        // Second pass: each chain was selected against one delegate in
        // isolation, so a message another attachment of the same service
        // consumes still shows up here as droppable traffic. Settle the
        // routing across attachments before wiring sees it.
        refine_routing(&attachments, &mut specs);

        for ((plan, tagged), spec) in attachments.plans.iter().zip(&bundle.attachments).zip(&specs)
        {
            match spec {
                None => {
                    let cd = &attachments.cds[plan.cd_index];
                    report_text.push_str(&format!(
                        "direct: `{}` already speaks `{}` toward {}\n",
                        tagged.service, cd.id, plan.role
                    ));
                }
                Some(spec) => {
                    spec.validate(&self.registry)
                        .map_err(ProjectError::Synthesis)?;
                    report_text.push('\n');
                    report_text.push_str(&adapter_report(spec, &tagged.report));
                }
            }
        }

        Ok(SynthesisOutput {
            cds: attachments.cds,
            adapters: specs.into_iter().flatten().collect(),
            report_text,
        })
    }

    /// The service stubs in declaration order, with the scenario's
    /// scripts and reactions applied to their roles.
    pub fn stubs(&self) -> Vec<ServiceStub> {
        self.services
            .iter()
            .map(|service| {
                let mut stub = ServiceStub::new(
                    &service.role,
                    service.interface.clone(),
                    service.protocol.clone(),
                );
                if let Some(scenario) = &self.scenario {
                    if let Some(script) = scenario.scripts.get(&service.role) {
                        stub.script = script.clone();
                    }
                    if let Some(reactions) = scenario.reactions.get(&service.role) {
                        stub.reactions = reactions.clone();
                    }
                }
                stub
            })
            .collect()
    }

    /// Synthesizes in memory, wires the harness, and runs the scenario.
    pub fn enact(
        &self,
        bundle: &MappingBundle,
        bypass_enforcement: bool,
        max_ticks: u64,
    ) -> Result<Trace, ProjectError> {
        let synthesis = self.synthesize(bundle)?;
        let mut harness = build_harness(
            &self.choreography,
            self.stubs(),
            synthesis.cds,
            synthesis.adapters,
            &self.registry,
            self.seed,
        )?;
        if let Some(scenario) = &self.scenario {
            harness.set_scenario(&scenario.name);
        }
        harness.set_bypass(bypass_enforcement);
        Ok(run_harness(&harness, max_ticks)?)
    }
}

fn read_file(path: &Path) -> Result<String, ProjectError> {
    std::fs::read_to_string(path).map_err(|e| ProjectError::Io {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

fn parse_error(path: &Path, detail: &impl std::fmt::Display) -> ProjectError {
    ProjectError::Parse {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}

/// Parses one schema file — `.xsd` or `.json` by extension — and
/// registers it under the given message name.
fn load_schema_refs(
    doc_path: &Path,
    refs: &BTreeMap<String, String>,
    registry: &mut SchemaRegistry,
) -> Result<(), ProjectError> {
    let base = doc_path.parent().unwrap_or_else(|| Path::new("."));
    for (qname_text, rel) in refs {
        let qname = QName::parse(qname_text).map_err(|e| {
            parse_error(doc_path, &format!("schema entry `{qname_text}`: {e}"))
        })?;
        let schema_path = base.join(rel);
        let text = read_file(&schema_path)?;
        let extension = schema_path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("");
        let schema = match extension {
            "xsd" => parse_xsd_subset(&text, qname).map_err(|e| parse_error(&schema_path, &e))?,
            "json" => {
                let schema =
                    parse_schema_json(&text).map_err(|e| parse_error(&schema_path, &e))?;
                if schema.qname() != &qname {
                    return Err(parse_error(
                        &schema_path,
                        &format!(
                            "declares `{}` but is registered as `{qname}`",
                            schema.qname()
                        ),
                    ));
                }
                schema
            }
            other => {
                return Err(parse_error(
                    &schema_path,
                    &format!("unsupported schema extension `{other}` (expected xsd or json)"),
                ))
            }
        };
        registry
            .insert(schema)
            .map_err(|e| parse_error(doc_path, &e))?;
    }
    Ok(())
}

fn load_choreography(
    path: &Path,
    registry: &mut SchemaRegistry,
) -> Result<ChoreographySpec, ProjectError> {
    let text = read_file(path)?;
    let doc: ChoreographyDoc =
        serde_json::from_str(&text).map_err(|e| parse_error(path, &e))?;
    load_schema_refs(path, &doc.schemas, registry)?;
    Ok(ChoreographySpec {
        name: doc.name,
        roles: doc.roles,
        nodes: doc.nodes,
        edges: doc.edges,
    })
}

fn load_interface(
    path: &Path,
    registry: &mut SchemaRegistry,
) -> Result<InterfaceSpec, ProjectError> {
    let text = read_file(path)?;
    let doc: InterfaceDoc = serde_json::from_str(&text).map_err(|e| parse_error(path, &e))?;
    load_schema_refs(path, &doc.schemas, registry)?;
    InterfaceSpec::new(&doc.service, doc.operations).map_err(|e| parse_error(path, &e))
}

fn load_protocol(path: &Path) -> Result<ProtocolSpec, ProjectError> {
    let text = read_file(path)?;
    let protocol: ProtocolSpec =
        serde_json::from_str(&text).map_err(|e| parse_error(path, &e))?;
    protocol.validate().map_err(|e| parse_error(path, &e))?;
    Ok(protocol)
}

/// A protocol must describe its interface: same name, and every
/// transition performs a declared operation on one of its messages with
/// the polarity the operation's direction dictates (required requests and
/// provided responses are sent; provided requests and required responses
/// are received).
fn check_protocol_speaks_interface(
    protocol: &ProtocolSpec,
    interface: &InterfaceSpec,
) -> Result<(), String> {
    if protocol.name != interface.service {
        return Err(format!(
            "protocol `{}` describes a different service than interface `{}`",
            protocol.name, interface.service
        ));
    }
    for transition in &protocol.transitions {
        let op = interface.operation(&transition.operation).ok_or_else(|| {
            format!(
                "transition in `{}` performs `{}`, which the interface does not declare",
                transition.from, transition.operation
            )
        })?;
        let expected = if transition.message == op.input {
            match op.direction {
                Direction::Required => crate::synthesis::Polarity::Send,
                Direction::Provided => crate::synthesis::Polarity::Receive,
            }
        } else if op.output.as_ref() == Some(&transition.message) {
            match op.direction {
                Direction::Required => crate::synthesis::Polarity::Receive,
                Direction::Provided => crate::synthesis::Polarity::Send,
            }
        } else {
            return Err(format!(
                "transition in `{}` carries `{}`, which `{}` does not exchange",
                transition.from, transition.message, transition.operation
            ));
        };
        if transition.polarity != expected {
            return Err(format!(
                "transition in `{}` gives `{}` the wrong polarity for a {} operation",
                transition.from,
                transition.operation,
                match op.direction {
                    Direction::Required => "required",
                    Direction::Provided => "provided",
                }
            ));
        }
    }
    let _ = Mep::OneWay; // interface MEP constraints are enforced in synthesis
    Ok(())
}

fn check_bindings(
    choreography: &ChoreographySpec,
    services: &[BoundService],
) -> Result<(), ProjectError> {
    let mut seen = BTreeMap::new();
    for (idx, service) in services.iter().enumerate() {
        if !choreography.roles.iter().any(|r| r == &service.role) {
            return Err(ProjectError::Config(format!(
                "service `{}` is bound to `{}`, which is not a choreography role",
                service.interface.service, service.role
            )));
        }
        if let Some(prev) = seen.insert(service.role.clone(), idx) {
            return Err(ProjectError::Config(format!(
                "role `{}` is bound twice (entries {} and {})",
                service.role,
                prev + 1,
                idx + 1
            )));
        }
    }
    for role in &choreography.roles {
        if !seen.contains_key(role) {
            return Err(ProjectError::Config(format!(
                "choreography role `{role}` is bound to no service"
            )));
        }
    }
    Ok(())
}

fn check_scenario_roles(
    scenario: &Scenario,
    services: &[BoundService],
) -> Result<(), ProjectError> {
    for role in scenario.scripts.keys().chain(scenario.reactions.keys()) {
        if !services.iter().any(|s| &s.role == role) {
            return Err(ProjectError::Config(format!(
                "scenario `{}` scripts role `{role}`, which is bound to no service",
                scenario.name
            )));
        }
    }
    Ok(())
}

/// Settles send routing across the attachments of each service.
///
/// Chains are selected one attachment at a time, so a service facing two
/// delegates gets each outgoing message classified twice: the attachment
/// whose delegate speaks it consumes it, and the other sees unclaimed
/// traffic and schedules a filter drop. Only one component may accept a
/// message from a service, so this pass removes a drop entry (and its
/// inbound rule) wherever a sibling attachment consumes the message, and
/// keeps a message every sibling would drop on just the first attachment
/// that saw it. Chains whose filter empties out lose the filter.
fn refine_routing(attachments: &Attachments, specs: &mut [Option<AdapterSpec>]) {
    // What some attachment of each service actually consumes: inbound
    // traffic that is not filtered away, or — on direct wires — the
    // forwards the delegate expects the role to initiate.
    let mut consumed: BTreeMap<usize, BTreeSet<QName>> = BTreeMap::new();
    for (plan, spec) in attachments.plans.iter().zip(specs.iter()) {
        let entry = consumed.entry(plan.service_index).or_default();
        match spec {
            Some(spec) => {
                let drops = filter_drops(spec);
                for rule in &spec.inbound {
                    if !drops.contains(&rule.message) {
                        entry.insert(rule.message.clone());
                    }
                }
            }
            None => {
                for forward in &attachments.cds[plan.cd_index].forwards {
                    if forward.from_role == plan.role {
                        entry.insert(forward.message.clone());
                    }
                }
            }
        }
    }

    let mut drop_owner: BTreeSet<(usize, QName)> = BTreeSet::new();
    for (plan, spec) in attachments.plans.iter().zip(specs.iter_mut()) {
        let Some(spec) = spec else { continue };
        let claimed_elsewhere: BTreeSet<QName> = filter_drops(spec)
            .into_iter()
            .filter(|message| {
                consumed[&plan.service_index].contains(message)
                    || !drop_owner.insert((plan.service_index, message.clone()))
            })
            .collect();
        if claimed_elsewhere.is_empty() {
            continue;
        }
        spec.inbound
            .retain(|rule| !claimed_elsewhere.contains(&rule.message));
        for instance in &mut spec.chain {
            if let PatternInstance::MessageFilter(cfg) = instance {
                cfg.drop.retain(|message| !claimed_elsewhere.contains(message));
            }
        }
        spec.chain.retain(|instance| {
            !matches!(instance, PatternInstance::MessageFilter(cfg) if cfg.drop.is_empty())
        });
    }
}

/// The messages an adapter's leading filter discards.
fn filter_drops(spec: &AdapterSpec) -> Vec<QName> {
    spec.chain
        .iter()
        .find_map(|instance| match instance {
            PatternInstance::MessageFilter(cfg) => Some(cfg.drop.clone()),
            _ => None,
        })
        .unwrap_or_default()
}

/// The saved bundle must cover exactly today's attachments, in order.
fn check_bundle_matches(
    project: &Project,
    attachments: &Attachments,
    bundle: &MappingBundle,
) -> Result<(), ProjectError> {
    if bundle.attachments.len() != attachments.plans.len() {
        return Err(ProjectError::Stale(format!(
            "bundle has {} attachment(s), project has {}",
            bundle.attachments.len(),
            attachments.plans.len()
        )));
    }
    for (plan, tagged) in attachments.plans.iter().zip(&bundle.attachments) {
        let cd = &attachments.cds[plan.cd_index];
        let service = &project.services[plan.service_index].interface.service;
        if tagged.cd != cd.id || tagged.role != plan.role || &tagged.service != service {
            return Err(ProjectError::Stale(format!(
                "bundle entry ({}, {}, {}) does not match attachment ({}, {}, {service})",
                tagged.cd, tagged.role, tagged.service, cd.id, plan.role
            )));
        }
    }
    Ok(())
}
