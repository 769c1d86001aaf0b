//! Command-line driver.
//!
//! Exit codes: 0 success or feasible design, 1 infeasible bounds, 2 usage or
//! input error. Data goes to the output stream (or `--out`), diagnostics to
//! the error stream.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binder::{Binding, Instance};
use crate::charlib::{calibrate_qs, characterize, parse_qcrit, CharModel, CharRecord};
use crate::error::{Error, Result};
use crate::model::{parse_dfg, parse_library, Assignment, Dfg, ResourceLibrary};
use crate::oracle::{oracle_best, OracleLimit};
use crate::redundancy::{baseline_nmr_synth, combined_synth, evaluate_reliability};
use crate::synthesizer::{find_design, Bounds, Design, Infeasible, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "relsynth", version, about = "Reliability-aware high-level synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize one design under latency and area bounds.
    Synth(SynthArgs),
    /// Synthesize over a grid of bounds and write a CSV table.
    Sweep(SweepArgs),
    /// Derive component reliabilities from critical charges.
    Characterize(CharArgs),
    /// Evaluate the reliability of an explicit assignment or design.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ours,
    Nmr,
    Combined,
    Oracle,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Nmr => "nmr",
            Method::Combined => "combined",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Args)]
struct Inputs {
    #[arg(long)]
    dfg: PathBuf,
    #[arg(long)]
    lib: PathBuf,
}

impl Inputs {
    fn load(&self) -> Result<(Dfg, ResourceLibrary)> {
        let dfg = parse_dfg(&read(&self.dfg)?)?;
        let lib = parse_library(&read(&self.lib)?)?;
        Ok((dfg, lib))
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    latency: u32,
    #[arg(long)]
    area: f64,
    #[arg(long, value_enum, default_value = "ours")]
    method: Method,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Latency bound range `a:b`, inclusive.
    #[arg(long)]
    latency: String,
    /// Area bound range `c:d`, inclusive.
    #[arg(long)]
    area: String,
    #[arg(long, default_value_t = 1)]
    step_l: u32,
    #[arg(long, default_value_t = 1.0)]
    step_a: f64,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    methods: Vec<Method>,
    /// CSV destination; the output stream when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("qs_source").required(true).args(["qs", "calibrate"])))]
struct CharArgs {
    #[arg(long)]
    qcrit: PathBuf,
    /// Reference component and its reliability, `name=reliability`.
    #[arg(long = "ref")]
    reference: String,
    /// Charge-collection efficiency in coulombs.
    #[arg(long)]
    qs: Option<f64>,
    /// Second anchor used to fit the charge-collection efficiency.
    #[arg(long)]
    calibrate: Option<String>,
    /// Mission time.
    #[arg(long, default_value_t = 1.0)]
    time: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["assign", "design"])))]
struct EvalArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Lines of `assign <node> <version> [nmr <odd>]`.
    #[arg(long)]
    assign: Option<PathBuf>,
    /// A design previously written by `synth --format json`.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = std::result::Result<i32, Failure>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_USAGE
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Characterize(a) => characterize_cmd(a, out),
        Command::Eval(a) => eval(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn synthesize(
    method: Method,
    dfg: &Dfg,
    library: &ResourceLibrary,
    bounds: Bounds,
) -> Result<Outcome> {
    match method {
        Method::Ours => find_design(dfg, library, bounds),
        Method::Nmr => baseline_nmr_synth(dfg, library, bounds),
        Method::Combined => combined_synth(dfg, library, bounds),
        Method::Oracle => oracle_best(dfg, library, bounds, OracleLimit::default()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub id: usize,
    pub version: String,
    pub nmr: u32,
}

/// Serialized form of a [`Design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignJson {
    pub assignment: IndexMap<String, String>,
    #[serde(default)]
    pub schedule: IndexMap<String, u32>,
    pub binding: IndexMap<String, usize>,
    pub instances: Vec<InstanceJson>,
    #[serde(default)]
    pub latency: u32,
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub reliability: f64,
}

impl DesignJson {
    pub fn new(dfg: &Dfg, library: &ResourceLibrary, design: &Design) -> Self {
        let ids = || dfg.nodes().iter().map(|n| n.id.clone());
        Self {
            assignment: design.assignment.named(dfg, library),
            schedule: ids().zip(design.schedule.starts().iter().copied()).collect(),
            binding: ids().zip(design.binding.node_instances().iter().copied()).collect(),
            instances: design
                .binding
                .instances()
                .iter()
                .map(|i| InstanceJson {
                    id: i.id,
                    version: library.get(i.version).name.clone(),
                    nmr: i.nmr,
                })
                .collect(),
            latency: design.latency,
            area: design.area,
            reliability: design.reliability,
        }
    }

    /// Rebuilds the assignment and binding against `dfg` and `library`.
    pub fn resolve(&self, dfg: &Dfg, library: &ResourceLibrary) -> Result<(Assignment, Binding)> {
        let pairs: Vec<(&String, &String)> = self.assignment.iter().collect();
        let assignment = Assignment::from_names(dfg, library, &pairs)?;
        let mut instances = Vec::with_capacity(self.instances.len());
        for inst in &self.instances {
            let version = library
                .index_of(&inst.version)
                .ok_or_else(|| Error::UnknownVersion(inst.version.clone()))?;
            instances.push(Instance {
                id: inst.id,
                version,
                nmr: inst.nmr,
            });
        }
        let mut node_instance = vec![None; dfg.len()];
        for (id, &inst) in &self.binding {
            let n = dfg.index_of(id).ok_or_else(|| Error::UnknownNode(id.clone()))?;
            node_instance[n] = Some(inst);
        }
        let node_instance = node_instance
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                x.ok_or_else(|| Error::InconsistentDesign(format!("node `{}` is unbound", dfg.node(i).id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let binding = Binding::from_parts(node_instance, instances)?;
        Ok((assignment, binding))
    }
}

#[derive(Serialize)]
struct SynthJson<'a> {
    method: &'a str,
    status: &'a str,
    #[serde(flatten)]
    design: DesignJson,
}

#[derive(Serialize)]
struct InfeasibleJson<'a> {
    method: &'a str,
    status: &'a str,
    reason: String,
    latency: u32,
    area: Option<f64>,
}

fn infeasible_line(inf: &Infeasible) -> String {
    let mut line = format!("infeasible: {} (latency {}", inf.reason, inf.latency);
    if let Some(area) = inf.area {
        line.push_str(&format!(", area {area}"));
    }
    line.push(')');
    line
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> CmdResult {
    let (dfg, lib) = a.inputs.load()?;
    let bounds = Bounds::new(a.latency, a.area)?;
    let outcome = synthesize(a.method, &dfg, &lib, bounds)?;
    let method = a.method.name();
    match (&outcome, a.format) {
        (Outcome::Feasible(d), Format::Json) => {
            let doc = SynthJson {
                method,
                status: "feasible",
                design: DesignJson::new(&dfg, &lib, d),
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"))?;
        }
        (Outcome::Feasible(d), Format::Text) => write_design_text(out, method, &dfg, &lib, d)?,
        (Outcome::Infeasible(inf), Format::Json) => {
            let doc = InfeasibleJson {
                method,
                status: "infeasible",
                reason: inf.reason.to_string(),
                latency: inf.latency,
                area: inf.area,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"))?;
        }
        (Outcome::Infeasible(inf), Format::Text) => writeln!(out, "{}", infeasible_line(inf))?,
    }
    Ok(if outcome.is_feasible() { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn write_design_text(
    out: &mut dyn Write,
    method: &str,
    dfg: &Dfg,
    lib: &ResourceLibrary,
    d: &Design,
) -> std::io::Result<()> {
    writeln!(out, "method: {method}")?;
    writeln!(out, "latency: {}", d.latency)?;
    writeln!(out, "area: {}", d.area)?;
    writeln!(out, "reliability: {:.5}", d.reliability)?;
    writeln!(out, "instances:")?;
    for inst in d.binding.instances() {
        writeln!(out, "  {:>3}  {:<10} nmr {}", inst.id, lib.get(inst.version).name, inst.nmr)?;
    }
    writeln!(out, "nodes:")?;
    let width = dfg.nodes().iter().map(|n| n.id.len()).max().unwrap_or(0);
    for (i, node) in dfg.nodes().iter().enumerate() {
        writeln!(
            out,
            "  {:<width$}  {:<10} start {:>3}  instance {}",
            node.id,
            lib.get(d.assignment.version(i)).name,
            d.schedule.start(i),
            d.binding.instance_of(i),
        )?;
    }
    Ok(())
}

fn parse_range<T: std::str::FromStr>(text: &str, what: &str) -> std::result::Result<(T, T), Failure> {
    let bad = || Failure::Usage(format!("bad {what} range `{text}` (expected `low:high`)"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "L_d")]
    pub latency_bound: u32,
    #[serde(rename = "A_d")]
    pub area_bound: f64,
    pub method: &'static str,
    pub status: String,
    pub latency: Option<u32>,
    pub area: Option<f64>,
    pub reliability: Option<f64>,
}

fn sweep_row(dfg: &Dfg, lib: &ResourceLibrary, method: Method, l: u32, a: f64) -> SweepRow {
    let mut row = SweepRow {
        latency_bound: l,
        area_bound: a,
        method: method.name(),
        status: String::new(),
        latency: None,
        area: None,
        reliability: None,
    };
    match Bounds::new(l, a).and_then(|b| synthesize(method, dfg, lib, b)) {
        Ok(Outcome::Feasible(d)) => {
            row.status = "feasible".into();
            row.latency = Some(d.latency);
            row.area = Some(d.area);
            row.reliability = Some(d.reliability);
        }
        Ok(Outcome::Infeasible(inf)) => row.status = format!("infeasible:{}", inf.reason),
        Err(Error::OracleLimit(_)) => row.status = "out-of-limits".into(),
        Err(e) => row.status = format!("error:{e}"),
    }
    row
}

/// Runs every method over the grid; rows ordered by latency bound, area
/// bound, then method order.
pub fn sweep_table(
    dfg: &Dfg,
    library: &ResourceLibrary,
    latencies: &[u32],
    areas: &[f64],
    methods: &[Method],
) -> Vec<SweepRow> {
    let points: Vec<(u32, f64, Method)> = latencies
        .iter()
        .flat_map(|&l| areas.iter().flat_map(move |&a| methods.iter().map(move |&m| (l, a, m))))
        .collect();
    points
        .into_par_iter()
        .map(|(l, a, m)| sweep_row(dfg, library, m, l, a))
        .collect()
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> CmdResult {
    let (dfg, lib) = a.inputs.load()?;
    let (l_lo, l_hi): (u32, u32) = parse_range(&a.latency, "latency")?;
    let (a_lo, a_hi): (f64, f64) = parse_range(&a.area, "area")?;
    if l_lo > l_hi || a_lo > a_hi || a.step_l == 0 || a.step_a.is_nan() || a.step_a <= 0.0 {
        return Err(Failure::Usage("empty sweep range".into()));
    }
    let latencies: Vec<u32> = (l_lo..=l_hi).step_by(a.step_l as usize).collect();
    let areas: Vec<f64> = (0..)
        .map(|i| a_lo + f64::from(i) * a.step_a)
        .take_while(|&x| x <= a_hi + 1e-9)
        .collect();
    let rows = sweep_table(&dfg, &lib, &latencies, &areas, &a.methods);

    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer
            .serialize(row)
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;
    match &a.out {
        Some(path) => fs::write(path, &bytes)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => out.write_all(&bytes)?,
    }
    Ok(EXIT_OK)
}

fn parse_anchor(text: &str) -> std::result::Result<(String, f64), Failure> {
    let bad = || Failure::Usage(format!("bad anchor `{text}` (expected `name=reliability`)"));
    let (name, rel) = text.split_once('=').ok_or_else(bad)?;
    Ok((name.to_string(), rel.parse().map_err(|_| bad())?))
}

#[derive(Serialize)]
struct CharJson {
    q_s: f64,
    fitted: bool,
    components: Vec<CharRecordJson>,
}

#[derive(Serialize)]
struct CharRecordJson {
    name: String,
    q_critical: f64,
    ser_ratio: f64,
    failure_rate: f64,
    reliability: f64,
}

impl From<CharRecord> for CharRecordJson {
    fn from(r: CharRecord) -> Self {
        Self {
            name: r.name,
            q_critical: r.q_critical,
            ser_ratio: r.ser_ratio,
            failure_rate: r.failure_rate,
            reliability: r.reliability,
        }
    }
}

fn characterize_cmd(a: CharArgs, out: &mut dyn Write) -> CmdResult {
    let inputs = parse_qcrit(&read(&a.qcrit)?)?;
    let (ref_name, ref_rel) = parse_anchor(&a.reference)?;
    let q_crit_of = |name: &str| {
        inputs
            .iter()
            .find(|i| i.name == name)
            .map(|i| i.q_critical)
            .ok_or_else(|| Error::MissingReference(name.to_string()))
    };
    let q_ref = q_crit_of(&ref_name)?;
    let (q_s, fitted) = match (&a.qs, &a.calibrate) {
        (Some(q_s), _) => (*q_s, false),
        (None, Some(anchor)) => {
            let (name, rel) = parse_anchor(anchor)?;
            (calibrate_qs((q_ref, ref_rel), (q_crit_of(&name)?, rel), a.time)?, true)
        }
        (None, None) => unreachable!("clap enforces one source"),
    };
    let model = CharModel::new(q_s, ref_name, ref_rel, a.time)?;
    let records = characterize(&inputs, &model)?;
    match a.format {
        Format::Json => {
            let doc = CharJson {
                q_s,
                fitted,
                components: records.into_iter().map(Into::into).collect(),
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"))?;
        }
        Format::Text => {
            writeln!(out, "q_s: {q_s:.4e} C{}", if fitted { " (fitted)" } else { "" })?;
            writeln!(
                out,
                "{:<14} {:>12} {:>10} {:>13} {:>11}",
                "component", "q_critical", "ser_ratio", "failure_rate", "reliability"
            )?;
            for r in records {
                writeln!(
                    out,
                    "{:<14} {:>12.4e} {:>10.4} {:>13.6e} {:>11.5}",
                    r.name, r.q_critical, r.ser_ratio, r.failure_rate, r.reliability
                )?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn parse_assign_file(text: &str, dfg: &Dfg, lib: &ResourceLibrary) -> Result<(Assignment, Vec<u32>)> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut nmr_by_node: IndexMap<String, u32> = IndexMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        let syntax = |message: &str| Error::Syntax {
            line: i + 1,
            message: message.to_string(),
        };
        let (node, version, nmr) = match fields.as_slice() {
            [] => continue,
            ["assign", node, version] => (*node, *version, 1),
            ["assign", node, version, "nmr", n] => {
                (*node, *version, n.parse().map_err(|_| syntax("bad nmr factor"))?)
            }
            _ => return Err(syntax("expected `assign <node> <version> [nmr <odd>]`")),
        };
        pairs.push((node.to_string(), version.to_string()));
        nmr_by_node.insert(node.to_string(), nmr);
    }
    let assignment = Assignment::from_names(dfg, lib, &pairs)?;
    let nmr = dfg.nodes().iter().map(|n| nmr_by_node[&n.id]).collect();
    Ok((assignment, nmr))
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> CmdResult {
    let (dfg, lib) = a.inputs.load()?;
    let (assignment, binding) = match (&a.assign, &a.design) {
        (Some(path), _) => {
            let (assignment, nmr) = parse_assign_file(&read(path)?, &dfg, &lib)?;
            let binding = Binding::dedicated(&assignment, &nmr)?;
            (assignment, binding)
        }
        (None, Some(path)) => {
            let doc: DesignJson = serde_json::from_str(&read(path)?)
                .map_err(|e| Failure::Usage(format!("bad design file: {e}")))?;
            doc.resolve(&dfg, &lib)?
        }
        (None, None) => unreachable!("clap enforces one source"),
    };
    let reliability = evaluate_reliability(&dfg, &lib, &assignment, &binding)?;
    let area = crate::binder::total_area(&binding, &lib);
    match a.format {
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::json!({ "reliability": reliability, "area": area })
        )?,
        Format::Text => {
            writeln!(out, "reliability: {reliability:.5}")?;
            writeln!(out, "area: {area}")?;
        }
    }
    Ok(EXIT_OK)
}
