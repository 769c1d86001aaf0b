//! Reliability-maximizing synthesis under latency and area bounds.
//!
//! Starting from the most reliable version for every node, the flow trades
//! reliability away only where a bound forces it:
//!
//! 1. allocate, schedule against the ASAP latency, bind, measure area;
//! 2. while the latency bound is missed, move the slowest critical-path node
//!    to a strictly faster version;
//! 3. rebind;
//! 4. while area is over budget and there is latency slack, relax the
//!    scheduling bound one cycle at a time;
//! 5. while area is still over budget, move the largest-area node, and every
//!    node sharing its unit, to a smaller version that is no slower; when no
//!    such version exists, a slower one is accepted if the latency bound can
//!    still be met, and step 4 is repeated after every move; once no such
//!    move exists, a descent over moves of one node, or of all nodes of one
//!    version, to any other version, taking the largest area reduction;
//! 6. check both bounds;
//! 7. while some move of one node, or of all nodes of one version, to a more
//!    reliable version keeps both bounds, take the one with the largest gain.
//!
//! Each scheduling step runs the density scheduler and, as a second
//! opinion, a list scheduler over the cheapest unit allocations.

use std::collections::HashSet;
use std::fmt;

use crate::binder::{bind_with_delays, total_area, Binding};
use crate::error::{Error, Result};
use crate::model::{Assignment, Dfg, ResourceLibrary};
use crate::redundancy::evaluate_reliability;
use crate::scheduler::{
    asap_with_delays, critical_path_with_delays, density_schedule_with_delays, list_schedule_with_delays,
    Schedule,
};

/// Allocations visited by the list-scheduling fallback per call.
const LIST_ALLOCATION_TRIES: usize = 256;

pub(crate) const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub latency: u32,
    pub area: f64,
}

impl Bounds {
    pub fn new(latency: u32, area: f64) -> Result<Self> {
        if latency < 1 {
            return Err(Error::InvalidArgument("latency bound must be at least 1".into()));
        }
        if !(area.is_finite() && area > 0.0) {
            return Err(Error::InvalidArgument("area bound must be positive".into()));
        }
        Ok(Self { latency, area })
    }

    pub fn admits(&self, latency: u32, area: f64) -> bool {
        latency <= self.latency && area <= self.area + AREA_EPS
    }
}

/// A complete synthesis result.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub assignment: Assignment,
    pub schedule: Schedule,
    pub binding: Binding,
    pub latency: u32,
    pub area: f64,
    pub reliability: f64,
}

impl Design {
    /// Derives latency, area and reliability from the parts.
    pub fn assemble(
        dfg: &Dfg,
        library: &ResourceLibrary,
        assignment: Assignment,
        schedule: Schedule,
        binding: Binding,
    ) -> Result<Self> {
        let area = total_area(&binding, library);
        let reliability = evaluate_reliability(dfg, library, &assignment, &binding)?;
        Ok(Self {
            latency: schedule.latency(),
            assignment,
            schedule,
            binding,
            area,
            reliability,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    Latency,
    Area,
}

impl fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfeasibleReason::Latency => "latency",
            InfeasibleReason::Area => "area",
        })
    }
}

/// Why no design was returned, with the best latency and area reached
/// before giving up.
#[derive(Debug, Clone, PartialEq)]
pub struct Infeasible {
    pub reason: InfeasibleReason,
    pub latency: u32,
    pub area: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Feasible(Design),
    Infeasible(Infeasible),
}

impl Outcome {
    pub fn design(&self) -> Option<&Design> {
        match self {
            Outcome::Feasible(d) => Some(d),
            Outcome::Infeasible(_) => None,
        }
    }

    pub fn into_design(self) -> Option<Design> {
        match self {
            Outcome::Feasible(d) => Some(d),
            Outcome::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Outcome::Feasible(_))
    }
}

/// Most reliable version per node (ties: smaller area, delay, then name).
pub fn initial_allocation(dfg: &Dfg, library: &ResourceLibrary) -> Result<Assignment> {
    library.check_covers(dfg)?;
    Assignment::per_class(dfg, library, |class| {
        library
            .versions_of(class)
            .into_iter()
            .min_by(|&a, &b| library.get(a).preference(library.get(b)))
            .expect("class is covered")
    })
}

fn preferred<'a>(library: &ResourceLibrary, candidates: impl Iterator<Item = &'a usize>) -> Option<usize> {
    candidates
        .copied()
        .min_by(|&a, &b| library.get(a).preference(library.get(b)))
}

/// A version change together with the design it leads to.
struct Candidate {
    nodes: Vec<usize>,
    version: usize,
    log_reliability: f64,
    fitted: (Schedule, Binding, f64),
}

impl Candidate {
    fn area(&self) -> f64 {
        self.fitted.2
    }
}

struct State<'a> {
    dfg: &'a Dfg,
    library: &'a ResourceLibrary,
    assignment: Assignment,
    delays: Vec<u32>,
}

impl State<'_> {
    fn set(&mut self, node: usize, version: usize) {
        self.assignment.set(node, version);
        self.delays[node] = self.library.get(version).delay;
    }

    fn asap_latency(&self) -> u32 {
        asap_with_delays(self.dfg, &self.delays).latency()
    }

    /// Density schedule and left-edge binding at `bound`. A list schedule
    /// over the cheapest unit allocations is also tried, and replaces the
    /// density result when it binds to strictly less area.
    fn schedule_and_bind(&self, bound: u32) -> Result<(Schedule, Binding, f64)> {
        let schedule = density_schedule_with_delays(self.dfg, &self.delays, bound)?;
        let binding = bind_with_delays(self.dfg, &schedule, &self.assignment, &self.delays);
        let area = total_area(&binding, self.library);
        if let Some(schedule) = self.cheapest_list_schedule(bound, area) {
            let list_binding = bind_with_delays(self.dfg, &schedule, &self.assignment, &self.delays);
            let list_area = total_area(&list_binding, self.library);
            if list_area < area - AREA_EPS {
                return Ok((schedule, list_binding, list_area));
            }
        }
        Ok((schedule, binding, area))
    }

    /// Visits unit allocations (counts per used version) in order of
    /// increasing area, below `ceiling`, and returns the first list schedule
    /// that meets `bound`.
    fn cheapest_list_schedule(&self, bound: u32, ceiling: f64) -> Option<Schedule> {
        let mut used: Vec<usize> = self.assignment.as_slice().to_vec();
        used.sort_unstable();
        used.dedup();
        let kind: Vec<usize> = self
            .assignment
            .as_slice()
            .iter()
            .map(|v| used.binary_search(v).expect("used version"))
            .collect();
        let cap: Vec<u32> = (0..used.len())
            .map(|k| kind.iter().filter(|&&x| x == k).count() as u32)
            .collect();
        let cost = |units: &[u32]| -> f64 {
            units
                .iter()
                .zip(&used)
                .map(|(&c, &v)| f64::from(c) * self.library.get(v).area)
                .sum()
        };

        let mut frontier = vec![vec![1u32; used.len()]];
        let mut seen: HashSet<Vec<u32>> = frontier.iter().cloned().collect();
        for _ in 0..LIST_ALLOCATION_TRIES {
            let (idx, _) = frontier
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| cost(a).total_cmp(&cost(b)).then_with(|| a.cmp(b)))?;
            let units = frontier.swap_remove(idx);
            if cost(&units) >= ceiling - AREA_EPS {
                return None;
            }
            if let Some(s) = list_schedule_with_delays(self.dfg, &self.delays, &kind, &units, bound) {
                return Some(s);
            }
            for k in 0..units.len() {
                if units[k] < cap[k] {
                    let mut next = units.clone();
                    next[k] += 1;
                    if seen.insert(next.clone()) {
                        frontier.push(next);
                    }
                }
            }
        }
        None
    }

    /// Strictly faster alternatives for a node, as library indices.
    fn faster(&self, node: usize) -> Vec<usize> {
        let class = self.dfg.node(node).op_class;
        self.library
            .versions_of(class)
            .into_iter()
            .filter(|&v| self.library.get(v).delay < self.delays[node])
            .collect()
    }

    /// Smaller alternatives, optionally allowing a longer delay.
    fn smaller(&self, node: usize, allow_slower: bool) -> Vec<usize> {
        let current = self.library.get(self.assignment.version(node));
        self.library
            .versions_of(current.op_class)
            .into_iter()
            .filter(|&v| {
                let cand = self.library.get(v);
                cand.area < current.area && (allow_slower || cand.delay <= current.delay)
            })
            .collect()
    }

    /// Schedules from `bound` upward, stopping at the first latency whose
    /// binding fits the area bound; otherwise keeps the smallest area seen.
    fn fit(&self, bound: u32, bounds: Bounds) -> Result<(Schedule, Binding, f64)> {
        let mut best = self.schedule_and_bind(bound)?;
        let mut b = bound;
        while best.2 > bounds.area + AREA_EPS && b < bounds.latency {
            b += 1;
            let next = self.schedule_and_bind(b)?;
            if next.2 < best.2 - AREA_EPS {
                best = next;
            }
        }
        Ok(best)
    }

    /// Candidate version changes: each node to each other version of its
    /// class, then every node of one used version to each other version.
    fn moves(&self) -> Vec<(Vec<usize>, usize)> {
        let mut moves: Vec<(Vec<usize>, usize)> = Vec::new();
        for node in 0..self.dfg.len() {
            let current = self.assignment.version(node);
            for v in self.library.versions_of(self.dfg.node(node).op_class) {
                if v != current {
                    moves.push((vec![node], v));
                }
            }
        }
        let mut used: Vec<usize> = self.assignment.as_slice().to_vec();
        used.sort_unstable();
        used.dedup();
        for &u in &used {
            let group: Vec<usize> = (0..self.dfg.len()).filter(|&n| self.assignment.version(n) == u).collect();
            if group.len() > 1 {
                for v in self.library.versions_of(self.library.get(u).op_class) {
                    if v != u {
                        moves.push((group.clone(), v));
                    }
                }
            }
        }
        moves
    }

    fn log_reliability(&self) -> f64 {
        self.assignment
            .as_slice()
            .iter()
            .map(|&v| self.library.get(v).reliability.ln())
            .sum()
    }

    /// Applies `nodes -> version`, runs `probe`, and restores the old versions.
    fn trial<T>(&mut self, nodes: &[usize], version: usize, probe: impl FnOnce(&Self) -> T) -> T {
        let before: Vec<usize> = nodes.iter().map(|&n| self.assignment.version(n)).collect();
        for &n in nodes {
            self.set(n, version);
        }
        let out = probe(self);
        for (&n, &old) in nodes.iter().zip(&before) {
            self.set(n, old);
        }
        out
    }

    /// Evaluates a move: the design it leads to, if the latency bound holds.
    fn evaluate(&mut self, nodes: &[usize], version: usize, bounds: Bounds) -> Result<Option<Candidate>> {
        self.trial(nodes, version, |st| {
            let latency = st.asap_latency();
            if latency > bounds.latency {
                return Ok(None);
            }
            Ok(Some(Candidate {
                nodes: nodes.to_vec(),
                version,
                log_reliability: st.log_reliability(),
                fitted: st.fit(latency, bounds)?,
            }))
        })
    }

    /// The move that raises reliability the most while both bounds still
    /// hold. Ties: smaller area, then candidate order.
    fn recovery_move(&mut self, bounds: Bounds) -> Result<Option<Candidate>> {
        let base = self.log_reliability();
        let mut best: Option<Candidate> = None;
        for (nodes, v) in self.moves() {
            let gain = self.trial(&nodes, v, |st| st.log_reliability()) - base;
            let floor = best.as_ref().map_or(1e-12, |b| b.log_reliability - base - 1e-12);
            if gain <= floor {
                continue;
            }
            let Some(c) = self.evaluate(&nodes, v, bounds)? else {
                continue;
            };
            if c.area() > bounds.area + AREA_EPS {
                continue;
            }
            let better = best.as_ref().is_none_or(|b| {
                c.log_reliability > b.log_reliability + 1e-12 || c.area() < b.area() - AREA_EPS
            });
            if better {
                best = Some(c);
            }
        }
        Ok(best)
    }

    /// Last-resort area move, used once no direct downsizing exists: the
    /// change that most reduces the bound area among moving one node, or
    /// every node of one version, to another version (e.g. a faster version
    /// lets operations share one unit). Ties: more reliable design, then
    /// candidate order. Only strict improvements are returned.
    fn descent_move(&mut self, area: f64, bounds: Bounds) -> Result<Option<Candidate>> {
        let mut best: Option<Candidate> = None;
        for (nodes, v) in self.moves() {
            let Some(c) = self.evaluate(&nodes, v, bounds)? else {
                continue;
            };
            let improves = match &best {
                None => c.area() < area - AREA_EPS,
                Some(b) => {
                    c.area() < b.area() - AREA_EPS
                        || (c.area() <= b.area() + AREA_EPS && c.log_reliability > b.log_reliability + 1e-12)
                }
            };
            if improves {
                best = Some(c);
            }
        }
        Ok(best)
    }

    /// Next area-repair step: the largest-area node with a smaller version,
    /// and that version. Versions no slower than the current one come first;
    /// slower ones are tried only when none exist and the instance still
    /// meets the latency bound after the change.
    fn area_move(&self, binding: &Binding, bounds: Bounds) -> Option<(usize, usize)> {
        let area_of = |n: usize| self.library.get(self.assignment.version(n)).area;
        let largest = |pick: &dyn Fn(usize) -> Vec<usize>| {
            (0..self.dfg.len())
                .filter_map(|n| preferred(self.library, pick(n).iter()).map(|v| (n, v)))
                .max_by(|&(a, _), &(b, _)| area_of(a).total_cmp(&area_of(b)).then(b.cmp(&a)))
        };
        largest(&|n| self.smaller(n, false)).or_else(|| {
            largest(&|n| {
                let mates: Vec<usize> = binding.nodes_on(binding.instance_of(n)).collect();
                self.smaller(n, true)
                    .into_iter()
                    .filter(|&v| {
                        let mut delays = self.delays.clone();
                        for &m in &mates {
                            delays[m] = self.library.get(v).delay;
                        }
                        asap_with_delays(self.dfg, &delays).latency() <= bounds.latency
                    })
                    .collect()
            })
        })
    }
}

pub fn find_design(dfg: &Dfg, library: &ResourceLibrary, bounds: Bounds) -> Result<Outcome> {
    let assignment = initial_allocation(dfg, library)?;
    let mut st = State {
        dfg,
        library,
        delays: assignment.delays(library),
        assignment,
    };

    // Latency repair.
    let mut latency = st.asap_latency();
    while latency > bounds.latency {
        let path = critical_path_with_delays(dfg, &st.delays);
        let victim = path
            .iter()
            .copied()
            .filter(|&n| !st.faster(n).is_empty())
            .max_by_key(|&n| (st.delays[n], std::cmp::Reverse(n)));
        let Some(victim) = victim else {
            let (_, _, area) = st.schedule_and_bind(latency)?;
            return Ok(Outcome::Infeasible(Infeasible {
                reason: InfeasibleReason::Latency,
                latency,
                area: Some(area),
            }));
        };
        let version = preferred(library, st.faster(victim).iter()).expect("non-empty");
        st.set(victim, version);
        latency = st.asap_latency();
    }

    let (mut schedule, mut binding, mut area) = st.fit(latency, bounds)?;

    // Area repair.
    while area > bounds.area + AREA_EPS {
        let Some((victim, version)) = st.area_move(&binding, bounds) else {
            break;
        };
        let mates: Vec<usize> = binding.nodes_on(binding.instance_of(victim)).collect();
        for n in mates {
            st.set(n, version);
        }
        (schedule, binding, area) = st.fit(st.asap_latency(), bounds)?;
    }
    // Descent; the area strictly falls at every step.
    while area > bounds.area + AREA_EPS {
        let Some(c) = st.descent_move(area, bounds)? else {
            return Ok(Outcome::Infeasible(Infeasible {
                reason: InfeasibleReason::Area,
                latency: schedule.latency(),
                area: Some(area),
            }));
        };
        for &n in &c.nodes {
            st.set(n, c.version);
        }
        (schedule, binding, area) = c.fitted;
    }

    // Reliability recovery; reliability strictly rises at every step.
    if schedule.latency() <= bounds.latency {
        while let Some(c) = st.recovery_move(bounds)? {
            for &n in &c.nodes {
                st.set(n, c.version);
            }
            (schedule, binding, area) = c.fitted;
        }
    }

    if schedule.latency() > bounds.latency {
        return Ok(Outcome::Infeasible(Infeasible {
            reason: InfeasibleReason::Latency,
            latency: schedule.latency(),
            area: Some(area),
        }));
    }
    let design = Design::assemble(dfg, library, st.assignment, schedule, binding)?;
    Ok(Outcome::Feasible(design))
}
