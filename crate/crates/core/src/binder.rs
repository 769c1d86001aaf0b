//! Left-edge binding of scheduled operations onto functional-unit instances.

use crate::error::{Error, Result};
use crate::model::{Assignment, Dfg, ResourceLibrary};
use crate::scheduler::Schedule;

/// A functional unit. `nmr` copies vote on every result; 1 means no
/// redundancy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: usize,
    /// Library index of the version this unit implements.
    pub version: usize,
    pub nmr: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    node_instance: Vec<usize>,
    instances: Vec<Instance>,
}

impl Binding {
    /// Assembles a binding from explicit parts; instance ids must equal their
    /// position and every nmr factor must be odd.
    pub fn from_parts(node_instance: Vec<usize>, instances: Vec<Instance>) -> Result<Self> {
        for (i, inst) in instances.iter().enumerate() {
            if inst.id != i {
                return Err(Error::InconsistentDesign(format!(
                    "instance at position {i} has id {}",
                    inst.id
                )));
            }
            check_nmr(inst.nmr)?;
        }
        if let Some(&bad) = node_instance.iter().find(|&&i| i >= instances.len()) {
            return Err(Error::InconsistentDesign(format!("unknown instance {bad}")));
        }
        Ok(Self {
            node_instance,
            instances,
        })
    }

    /// One dedicated instance per node, with the given redundancy factors.
    pub fn dedicated(assignment: &Assignment, nmr: &[u32]) -> Result<Self> {
        let instances = assignment
            .as_slice()
            .iter()
            .zip(nmr)
            .enumerate()
            .map(|(id, (&version, &nmr))| Instance { id, version, nmr })
            .collect();
        Self::from_parts((0..assignment.as_slice().len()).collect(), instances)
    }

    pub fn instance_of(&self, node: usize) -> usize {
        self.node_instance[node]
    }

    pub fn node_instances(&self) -> &[usize] {
        &self.node_instance
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    /// Nodes executing on `instance`, in declaration order.
    pub fn nodes_on(&self, instance: usize) -> impl Iterator<Item = usize> + '_ {
        self.node_instance
            .iter()
            .enumerate()
            .filter(move |(_, &i)| i == instance)
            .map(|(n, _)| n)
    }

    pub fn nmr_of(&self, node: usize) -> u32 {
        self.instances[self.node_instance[node]].nmr
    }

    pub(crate) fn set_nmr(&mut self, instance: usize, nmr: u32) -> Result<()> {
        check_nmr(nmr)?;
        self.instances[instance].nmr = nmr;
        Ok(())
    }

    /// Checks that node versions match their instances and that no instance
    /// runs two operations in overlapping cycles.
    pub fn validate(&self, assignment: &Assignment, schedule: &Schedule, delays: &[u32]) -> Result<()> {
        for (node, &inst) in self.node_instance.iter().enumerate() {
            if self.instances[inst].version != assignment.version(node) {
                return Err(Error::InconsistentDesign(format!(
                    "node #{node} runs on instance {inst} of a different version"
                )));
            }
        }
        for inst in &self.instances {
            let mut busy: Vec<(u32, u32)> = self
                .nodes_on(inst.id)
                .map(|n| (schedule.start(n), schedule.start(n) + delays[n] - 1))
                .collect();
            busy.sort_unstable();
            if busy.windows(2).any(|w| w[1].0 <= w[0].1) {
                return Err(Error::InconsistentDesign(format!(
                    "instance {} executes overlapping operations",
                    inst.id
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_nmr(nmr: u32) -> Result<()> {
    if nmr == 0 || nmr.is_multiple_of(2) {
        return Err(Error::InvalidNmr(nmr));
    }
    Ok(())
}

/// Left-edge packing: nodes in order of start cycle (declaration order on
/// ties) go to the lowest-id idle instance of their version, or open a new
/// one.
pub fn bind(
    dfg: &Dfg,
    library: &ResourceLibrary,
    schedule: &Schedule,
    assignment: &Assignment,
) -> Binding {
    bind_with_delays(dfg, schedule, assignment, &assignment.delays(library))
}

pub(crate) fn bind_with_delays(
    dfg: &Dfg,
    schedule: &Schedule,
    assignment: &Assignment,
    delays: &[u32],
) -> Binding {
    let mut order: Vec<usize> = (0..dfg.len()).collect();
    order.sort_by_key(|&n| (schedule.start(n), n));

    let mut instances: Vec<Instance> = Vec::new();
    let mut last_busy: Vec<u32> = Vec::new();
    let mut node_instance = vec![0; dfg.len()];
    for n in order {
        let version = assignment.version(n);
        let start = schedule.start(n);
        let slot = instances
            .iter()
            .position(|inst| inst.version == version && last_busy[inst.id] < start);
        let id = slot.unwrap_or_else(|| {
            instances.push(Instance {
                id: instances.len(),
                version,
                nmr: 1,
            });
            last_busy.push(0);
            instances.len() - 1
        });
        last_busy[id] = start + delays[n] - 1;
        node_instance[n] = id;
    }
    Binding {
        node_instance,
        instances,
    }
}

/// Functional-unit area: each instance's version area times its nmr factor.
/// Voter circuitry is not counted.
pub fn total_area(binding: &Binding, library: &ResourceLibrary) -> f64 {
    binding
        .instances
        .iter()
        .map(|inst| library.get(inst.version).area * f64::from(inst.nmr))
        .sum()
}

/// Like [`total_area`] but resolving versions by name, for bindings that come
/// from outside the library they were built against.
pub fn total_area_named(instances: &[(String, u32)], library: &ResourceLibrary) -> Result<f64> {
    instances
        .iter()
        .map(|(name, nmr)| {
            let v = library
                .index_of(name)
                .ok_or_else(|| Error::UnknownVersion(name.clone()))?;
            Ok(library.get(v).area * f64::from(*nmr))
        })
        .sum()
}
