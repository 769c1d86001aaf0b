//! Domain types shared by every synthesis stage: operation classes, the
//! data-flow graph, the component library and per-node version assignments.
//!
//! Both text formats are line oriented. `#` starts a comment and blank lines
//! are ignored.
//!
//! ```text
//! node <id> <add|mul|sub|cmp>
//! edge <src-id> <dst-id>
//!
//! resource <name> <add|mul|sub|cmp> <area> <delay> <reliability>
//! ```

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Functional class of an operation. Subtractions and comparisons run on
/// adders, so they fold into [`OpClass::Add`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpClass {
    Add,
    Mul,
}

impl OpClass {
    pub const ALL: [OpClass; 2] = [OpClass::Add, OpClass::Mul];

    /// Parses an operation token as it appears in DFG and library files.
    pub fn from_token(token: &str) -> Option<OpClass> {
        match token {
            "add" | "sub" | "cmp" => Some(OpClass::Add),
            "mul" => Some(OpClass::Mul),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            OpClass::Add => "add",
            OpClass::Mul => "mul",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OpClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpClass::Add => "ADD",
            OpClass::Mul => "MUL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfgNode {
    pub id: String,
    pub op_class: OpClass,
}

impl DfgNode {
    pub fn new(id: impl Into<String>, op_class: OpClass) -> Self {
        Self {
            id: id.into(),
            op_class,
        }
    }
}

/// A validated, acyclic data-flow graph.
///
/// Nodes are addressed by their declaration index everywhere downstream;
/// declaration order is the tie-break order for every deterministic choice.
#[derive(Debug, Clone, PartialEq)]
pub struct Dfg {
    nodes: Vec<DfgNode>,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
}

impl Dfg {
    pub fn new<S: AsRef<str>>(nodes: Vec<DfgNode>, edges: &[(S, S)]) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(node.id.clone()));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::DanglingEdge(id.to_string()))
        };
        let mut resolved = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for (src, dst) in edges {
            let (src, dst) = (src.as_ref(), dst.as_ref());
            let edge = (lookup(src)?, lookup(dst)?);
            if !seen.insert(edge) {
                return Err(Error::DuplicateEdge(src.to_string(), dst.to_string()));
            }
            resolved.push(edge);
        }
        Self::from_indexed(nodes, resolved, index)
    }

    fn from_indexed(
        nodes: Vec<DfgNode>,
        edges: Vec<(usize, usize)>,
        index: HashMap<String, usize>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(u, v) in &edges {
            if u == v {
                return Err(Error::Cycle(nodes[u].id.clone()));
            }
            succs[u].push(v);
            preds[v].push(u);
        }
        for list in preds.iter_mut().chain(succs.iter_mut()) {
            list.sort_unstable();
        }

        // Kahn's algorithm, lowest declaration index first.
        let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n)
            .filter(|&i| indegree[i] == 0)
            .map(Reverse)
            .collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(Reverse(u)) = ready.pop() {
            topo.push(u);
            for &v in &succs[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    ready.push(Reverse(v));
                }
            }
        }
        if topo.len() != n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
            return Err(Error::Cycle(nodes[stuck].id.clone()));
        }

        Ok(Self {
            nodes,
            edges,
            preds,
            succs,
            index,
            topo,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[DfgNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &DfgNode {
        &self.nodes[idx]
    }

    /// Edges as `(src, dst)` node indices, in declaration order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn preds(&self, idx: usize) -> &[usize] {
        &self.preds[idx]
    }

    pub fn succs(&self, idx: usize) -> &[usize] {
        &self.succs[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Topological order that always emits the lowest ready index first.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn classes(&self) -> Vec<OpClass> {
        OpClass::ALL
            .into_iter()
            .filter(|c| self.nodes.iter().any(|n| n.op_class == *c))
            .collect()
    }

    pub fn count(&self, class: OpClass) -> usize {
        self.nodes.iter().filter(|n| n.op_class == class).count()
    }

    /// Serializes back to the DFG text format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            out.push_str(&format!("node {} {}\n", node.id, node.op_class.token()));
        }
        for &(u, v) in &self.edges {
            out.push_str(&format!("edge {} {}\n", self.nodes[u].id, self.nodes[v].id));
        }
        out
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        message: message.into(),
    }
}

pub fn parse_dfg(text: &str) -> Result<Dfg> {
    let mut nodes = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    for (line, fields) in content_lines(text) {
        match fields.as_slice() {
            ["node", id, op] => {
                let class = OpClass::from_token(op)
                    .ok_or_else(|| syntax(line, format!("unknown operation `{op}`")))?;
                nodes.push(DfgNode::new(*id, class));
            }
            ["edge", src, dst] => edges.push((src.to_string(), dst.to_string())),
            [kw, ..] if *kw == "node" || *kw == "edge" => {
                return Err(syntax(line, format!("`{kw}` takes exactly two arguments")))
            }
            [kw, ..] => return Err(syntax(line, format!("unknown directive `{kw}`"))),
            [] => unreachable!(),
        }
    }
    Dfg::new(nodes, &edges)
}

/// One implementation of an operation class.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceVersion {
    pub name: String,
    pub op_class: OpClass,
    pub area: f64,
    /// Clock cycles; the unit is busy for its whole delay.
    pub delay: u32,
    pub reliability: f64,
}

impl ResourceVersion {
    pub fn new(
        name: impl Into<String>,
        op_class: OpClass,
        area: f64,
        delay: u32,
        reliability: f64,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |message: &str| Error::InvalidVersion {
            name: name.clone(),
            message: message.to_string(),
        };
        if !(area.is_finite() && area > 0.0) {
            return Err(invalid("area must be positive"));
        }
        if delay < 1 {
            return Err(invalid("delay must be at least one cycle"));
        }
        if !(reliability > 0.0 && reliability <= 1.0) {
            return Err(invalid("reliability must lie in (0, 1]"));
        }
        Ok(Self {
            name,
            op_class,
            area,
            delay,
            reliability,
        })
    }

    /// Global version preference: reliability descending, then area, delay
    /// and name ascending. `Less` means `self` is preferred.
    pub fn preference(&self, other: &Self) -> Ordering {
        other
            .reliability
            .total_cmp(&self.reliability)
            .then(self.area.total_cmp(&other.area))
            .then(self.delay.cmp(&other.delay))
            .then_with(|| self.name.cmp(&other.name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceLibrary {
    versions: Vec<ResourceVersion>,
    by_name: HashMap<String, usize>,
}

impl ResourceLibrary {
    pub fn new(versions: Vec<ResourceVersion>) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(versions.len());
        for (i, v) in versions.iter().enumerate() {
            if by_name.insert(v.name.clone(), i).is_some() {
                return Err(Error::DuplicateVersion(v.name.clone()));
            }
        }
        Ok(Self { versions, by_name })
    }

    pub fn versions(&self) -> &[ResourceVersion] {
        &self.versions
    }

    pub fn len(&self) -> usize {
        self.versions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }

    pub fn get(&self, idx: usize) -> &ResourceVersion {
        &self.versions[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    /// Indices of the versions implementing `class`, in library order.
    pub fn versions_of(&self, class: OpClass) -> Vec<usize> {
        (0..self.versions.len())
            .filter(|&i| self.versions[i].op_class == class)
            .collect()
    }

    /// Fails when some operation class used by `dfg` has no version.
    pub fn check_covers(&self, dfg: &Dfg) -> Result<()> {
        for class in dfg.classes() {
            if self.versions_of(class).is_empty() {
                return Err(Error::UncoveredClass(class));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        self.versions
            .iter()
            .map(|v| {
                format!(
                    "resource {} {} {} {} {}\n",
                    v.name,
                    v.op_class.token(),
                    v.area,
                    v.delay,
                    v.reliability
                )
            })
            .collect()
    }
}

pub fn parse_library(text: &str) -> Result<ResourceLibrary> {
    let mut versions = Vec::new();
    for (line, fields) in content_lines(text) {
        let ["resource", name, op, area, delay, rel] = fields.as_slice() else {
            return Err(syntax(
                line,
                "expected `resource <name> <op> <area> <delay> <reliability>`",
            ));
        };
        let class =
            OpClass::from_token(op).ok_or_else(|| syntax(line, format!("unknown operation `{op}`")))?;
        let area: f64 = area
            .parse()
            .map_err(|_| syntax(line, format!("bad area `{area}`")))?;
        let delay: u32 = delay
            .parse()
            .map_err(|_| syntax(line, format!("bad delay `{delay}`")))?;
        let reliability: f64 = rel
            .parse()
            .map_err(|_| syntax(line, format!("bad reliability `{rel}`")))?;
        versions.push(ResourceVersion::new(*name, class, area, delay, reliability)?);
    }
    ResourceLibrary::new(versions)
}

/// Node → version mapping, total over a DFG and class-consistent.
/// Versions are stored as library indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    versions: Vec<usize>,
}

impl Assignment {
    pub fn new(dfg: &Dfg, library: &ResourceLibrary, versions: Vec<usize>) -> Result<Self> {
        if versions.len() != dfg.len() {
            let missing = dfg
                .nodes()
                .get(versions.len())
                .map(|n| n.id.clone())
                .unwrap_or_default();
            return Err(Error::PartialAssignment(missing));
        }
        for (node, &v) in dfg.nodes().iter().zip(&versions) {
            let version = library
                .versions()
                .get(v)
                .ok_or_else(|| Error::UnknownVersion(format!("#{v}")))?;
            if version.op_class != node.op_class {
                return Err(Error::ClassMismatch {
                    node: node.id.clone(),
                    class: node.op_class,
                    version: version.name.clone(),
                    version_class: version.op_class,
                });
            }
        }
        Ok(Self { versions })
    }

    /// Builds an assignment from `(node id, version name)` pairs.
    pub fn from_names<A: AsRef<str>, B: AsRef<str>>(
        dfg: &Dfg,
        library: &ResourceLibrary,
        pairs: &[(A, B)],
    ) -> Result<Self> {
        let mut versions = vec![None; dfg.len()];
        for (node, version) in pairs {
            let n = dfg
                .index_of(node.as_ref())
                .ok_or_else(|| Error::UnknownNode(node.as_ref().to_string()))?;
            let v = library
                .index_of(version.as_ref())
                .ok_or_else(|| Error::UnknownVersion(version.as_ref().to_string()))?;
            versions[n] = Some(v);
        }
        let versions = versions
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::PartialAssignment(dfg.node(i).id.clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dfg, library, versions)
    }

    /// Same version for every node of a class.
    pub fn per_class(
        dfg: &Dfg,
        library: &ResourceLibrary,
        choose: impl Fn(OpClass) -> usize,
    ) -> Result<Self> {
        let versions = dfg.nodes().iter().map(|n| choose(n.op_class)).collect();
        Self::new(dfg, library, versions)
    }

    pub fn version(&self, node: usize) -> usize {
        self.versions[node]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.versions
    }

    pub(crate) fn set(&mut self, node: usize, version: usize) {
        self.versions[node] = version;
    }

    pub fn delays(&self, library: &ResourceLibrary) -> Vec<u32> {
        self.versions.iter().map(|&v| library.get(v).delay).collect()
    }

    pub fn named(&self, dfg: &Dfg, library: &ResourceLibrary) -> IndexMap<String, String> {
        self.versions
            .iter()
            .enumerate()
            .map(|(i, &v)| (dfg.node(i).id.clone(), library.get(v).name.clone()))
            .collect()
    }
}

pub const TABLE1_LIB: &str = include_str!("../data/table1.lib");
pub const FIR16_DFG: &str = include_str!("../data/fir16.dfg");
pub const EW_DFG: &str = include_str!("../data/ew.dfg");
pub const DIFFEQ_DFG: &str = include_str!("../data/diffeq.dfg");

pub fn builtin_benchmark(name: &str) -> Result<Dfg> {
    let text = match name {
        "fir16" => FIR16_DFG,
        "ew" => EW_DFG,
        "diffeq" => DIFFEQ_DFG,
        other => return Err(Error::UnknownBenchmark(other.to_string())),
    };
    parse_dfg(text)
}

/// The characterized adder/multiplier library.
pub fn table1_library() -> ResourceLibrary {
    parse_library(TABLE1_LIB).expect("bundled library is valid")
}
