//! ASAP/ALAP scheduling, mobility windows, the partition-density scheduler
//! and critical-path extraction.
//!
//! Cycles are 1-based. A node started at `s` with delay `d` occupies cycles
//! `s..=s+d-1`; a successor may start at `s+d` at the earliest (no chaining).

use crate::error::{Error, Result};
use crate::model::{Assignment, Dfg, OpClass, ResourceLibrary};

/// Start cycle per node plus the resulting latency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    starts: Vec<u32>,
    latency: u32,
}

impl Schedule {
    /// Builds a schedule from start cycles, computing its latency.
    pub fn from_starts(starts: Vec<u32>, delays: &[u32]) -> Self {
        let latency = starts
            .iter()
            .zip(delays)
            .map(|(&s, &d)| s + d - 1)
            .max()
            .unwrap_or(0);
        Self { starts, latency }
    }

    pub fn start(&self, node: usize) -> u32 {
        self.starts[node]
    }

    pub fn starts(&self) -> &[u32] {
        &self.starts
    }

    pub fn latency(&self) -> u32 {
        self.latency
    }

    /// True when every edge respects `start(v) >= start(u) + delay(u)` and
    /// every start is at least 1.
    pub fn is_precedence_feasible(&self, dfg: &Dfg, delays: &[u32]) -> bool {
        self.starts.iter().all(|&s| s >= 1)
            && dfg
                .edges()
                .iter()
                .all(|&(u, v)| self.starts[v] >= self.starts[u] + delays[u])
    }
}

/// Per-node `[asap, alap]` start windows under a latency bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilityWindow {
    pub asap: Vec<u32>,
    pub alap: Vec<u32>,
}

impl MobilityWindow {
    pub fn mobility(&self, node: usize) -> u32 {
        self.alap[node] - self.asap[node]
    }
}

fn asap_starts(dfg: &Dfg, delays: &[u32]) -> Vec<u32> {
    let mut start = vec![1u32; dfg.len()];
    for &v in dfg.topo_order() {
        start[v] = dfg
            .preds(v)
            .iter()
            .map(|&p| start[p] + delays[p])
            .max()
            .unwrap_or(1);
    }
    start
}

fn alap_starts(dfg: &Dfg, delays: &[u32], bound: u32) -> Vec<u32> {
    let mut start = vec![0u32; dfg.len()];
    for &v in dfg.topo_order().iter().rev() {
        let finish = dfg
            .succs(v)
            .iter()
            .map(|&s| start[s] - 1)
            .min()
            .unwrap_or(bound);
        start[v] = finish + 1 - delays[v];
    }
    start
}

pub fn asap(dfg: &Dfg, library: &ResourceLibrary, assignment: &Assignment) -> Schedule {
    asap_with_delays(dfg, &assignment.delays(library))
}

pub(crate) fn asap_with_delays(dfg: &Dfg, delays: &[u32]) -> Schedule {
    Schedule::from_starts(asap_starts(dfg, delays), delays)
}

pub fn alap(
    dfg: &Dfg,
    library: &ResourceLibrary,
    assignment: &Assignment,
    latency_bound: u32,
) -> Result<Schedule> {
    let delays = assignment.delays(library);
    check_bound(dfg, &delays, latency_bound)?;
    Ok(Schedule::from_starts(
        alap_starts(dfg, &delays, latency_bound),
        &delays,
    ))
}

fn check_bound(dfg: &Dfg, delays: &[u32], bound: u32) -> Result<u32> {
    let minimum = asap_with_delays(dfg, delays).latency();
    if bound < minimum {
        return Err(Error::InfeasibleBound { bound, minimum });
    }
    Ok(minimum)
}

pub fn mobility(
    dfg: &Dfg,
    library: &ResourceLibrary,
    assignment: &Assignment,
    latency_bound: u32,
) -> Result<MobilityWindow> {
    let delays = assignment.delays(library);
    check_bound(dfg, &delays, latency_bound)?;
    Ok(MobilityWindow {
        asap: asap_starts(dfg, &delays),
        alap: alap_starts(dfg, &delays, latency_bound),
    })
}

/// Start windows with some nodes pinned. Earliest starts only depend on
/// predecessors and latest starts only on successors, so one forward and one
/// backward pass give exact bounds for every free node.
fn pinned_windows(
    dfg: &Dfg,
    delays: &[u32],
    bound: u32,
    pinned: &[Option<u32>],
) -> (Vec<u32>, Vec<u32>) {
    let n = dfg.len();
    let mut lo = vec![1u32; n];
    for &v in dfg.topo_order() {
        lo[v] = match pinned[v] {
            Some(s) => s,
            None => dfg
                .preds(v)
                .iter()
                .map(|&p| lo[p] + delays[p])
                .max()
                .unwrap_or(1),
        };
    }
    let mut hi = vec![0u32; n];
    for &v in dfg.topo_order().iter().rev() {
        hi[v] = match pinned[v] {
            Some(s) => s,
            None => {
                let finish = dfg
                    .succs(v)
                    .iter()
                    .map(|&s| hi[s] - 1)
                    .min()
                    .unwrap_or(bound);
                finish + 1 - delays[v]
            }
        };
    }
    (lo, hi)
}

/// Occupancy probability per operation class and cycle.
///
/// A free node with window `[lo, hi]` (width `w`) contributes `1/w` to every
/// cycle of each of its `w` candidate execution intervals; a pinned node
/// contributes 1 to each cycle it occupies. Index 0 is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionGraph {
    density: [Vec<f64>; 2],
}

impl DistributionGraph {
    fn build(
        dfg: &Dfg,
        delays: &[u32],
        bound: u32,
        windows: (&[u32], &[u32]),
        skip: Option<usize>,
    ) -> Self {
        let mut density = [vec![0.0; bound as usize + 2], vec![0.0; bound as usize + 2]];
        let (lo, hi) = windows;
        for v in 0..dfg.len() {
            if Some(v) == skip {
                continue;
            }
            let row = &mut density[dfg.node(v).op_class.index()];
            let width = hi[v] - lo[v] + 1;
            let p = 1.0 / f64::from(width);
            for s in lo[v]..=hi[v] {
                for c in s..s + delays[v] {
                    row[c as usize] += p;
                }
            }
        }
        Self { density }
    }

    pub fn density(&self, cycle: u32, class: OpClass) -> f64 {
        self.density[class.index()]
            .get(cycle as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Total occupancy mass of a class across all cycles.
    pub fn total(&self, class: OpClass) -> f64 {
        self.density[class.index()].iter().sum()
    }

    fn interval_cost(&self, class: OpClass, start: u32, delay: u32) -> f64 {
        (start..start + delay).map(|c| self.density(c, class)).sum()
    }
}

/// Distribution graph before any placement.
pub fn distribution(
    dfg: &Dfg,
    library: &ResourceLibrary,
    assignment: &Assignment,
    latency_bound: u32,
) -> Result<DistributionGraph> {
    let window = mobility(dfg, library, assignment, latency_bound)?;
    let delays = assignment.delays(library);
    Ok(DistributionGraph::build(
        dfg,
        &delays,
        latency_bound,
        (&window.asap, &window.alap),
        None,
    ))
}

const COST_EPS: f64 = 1e-9;

/// Partition-density scheduling.
///
/// Repeatedly takes the free node with the narrowest window (declaration
/// order on ties) and pins it at the start whose execution interval sees the
/// least density from the other nodes of its class (earliest on ties).
/// Windows of the remaining nodes are then recomputed around the pins.
pub fn density_schedule(
    dfg: &Dfg,
    library: &ResourceLibrary,
    assignment: &Assignment,
    latency_bound: u32,
) -> Result<Schedule> {
    density_schedule_with_delays(dfg, &assignment.delays(library), latency_bound)
}

pub(crate) fn density_schedule_with_delays(
    dfg: &Dfg,
    delays: &[u32],
    bound: u32,
) -> Result<Schedule> {
    check_bound(dfg, delays, bound)?;
    let n = dfg.len();
    let mut pinned: Vec<Option<u32>> = vec![None; n];
    for _ in 0..n {
        let (lo, hi) = pinned_windows(dfg, delays, bound, &pinned);
        let Some(node) = (0..n)
            .filter(|&v| pinned[v].is_none())
            .min_by_key(|&v| (hi[v] - lo[v], v))
        else {
            break;
        };
        let graph = DistributionGraph::build(dfg, delays, bound, (&lo, &hi), Some(node));
        let class = dfg.node(node).op_class;
        let mut best = lo[node];
        let mut best_cost = graph.interval_cost(class, best, delays[node]);
        for s in lo[node] + 1..=hi[node] {
            let cost = graph.interval_cost(class, s, delays[node]);
            if cost < best_cost - COST_EPS {
                best = s;
                best_cost = cost;
            }
        }
        pinned[node] = Some(best);
    }
    let starts = pinned
        .into_iter()
        .map(|s| s.expect("every node pinned"))
        .collect();
    Ok(Schedule::from_starts(starts, delays))
}

/// Resource-constrained list scheduling. `kind[v]` names the unit type of
/// node `v` and `units[k]` how many non-pipelined units of type `k` exist.
/// Ready nodes are started in order of ALAP start under `bound` (then more
/// successors first, then declaration order); `None` when some node would miss its ALAP start.
pub(crate) fn list_schedule_with_delays(
    dfg: &Dfg,
    delays: &[u32],
    kind: &[usize],
    units: &[u32],
    bound: u32,
) -> Option<Schedule> {
    if asap_with_delays(dfg, delays).latency() > bound {
        return None;
    }
    let n = dfg.len();
    let alap = alap_starts(dfg, delays, bound);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (alap[v], std::cmp::Reverse(dfg.succs(v).len()), v));

    let mut start: Vec<Option<u32>> = vec![None; n];
    // Cycle after which each unit is free again, per type.
    let mut free_after: Vec<Vec<u32>> = units.iter().map(|&k| vec![0; k as usize]).collect();
    let mut placed = 0;
    let mut cycle = 1;
    while placed < n {
        for &v in &order {
            if start[v].is_some() {
                continue;
            }
            if alap[v] < cycle {
                return None;
            }
            let ready = dfg
                .preds(v)
                .iter()
                .all(|&p| start[p].is_some_and(|s| s + delays[p] <= cycle));
            if !ready {
                continue;
            }
            if let Some(unit) = free_after[kind[v]].iter_mut().find(|f| **f < cycle) {
                *unit = cycle + delays[v] - 1;
                start[v] = Some(cycle);
                placed += 1;
            }
        }
        cycle += 1;
    }
    let starts = start.into_iter().map(|s| s.expect("all placed")).collect();
    Some(Schedule::from_starts(starts, delays))
}

/// One maximum-delay source-to-sink path; among equal-weight paths the
/// lexicographically smallest by declaration index.
pub fn critical_path(dfg: &Dfg, library: &ResourceLibrary, assignment: &Assignment) -> Vec<usize> {
    critical_path_with_delays(dfg, &assignment.delays(library))
}

pub(crate) fn critical_path_with_delays(dfg: &Dfg, delays: &[u32]) -> Vec<usize> {
    // tail[v]: heaviest path weight starting at v, v included.
    let mut tail = vec![0u32; dfg.len()];
    for &v in dfg.topo_order().iter().rev() {
        tail[v] = delays[v] + dfg.succs(v).iter().map(|&s| tail[s]).max().unwrap_or(0);
    }
    let Some(mut cur) = (0..dfg.len()).max_by_key(|&v| (tail[v], std::cmp::Reverse(v))) else {
        return Vec::new();
    };
    let mut path = vec![cur];
    loop {
        let rest = tail[cur] - delays[cur];
        match dfg.succs(cur).iter().copied().find(|&s| tail[s] == rest) {
            Some(next) if rest > 0 => {
                path.push(next);
                cur = next;
            }
            _ => break,
        }
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_dfg, parse_library, table1_library};

    fn uniform(text: &str, delay: u32) -> (Dfg, ResourceLibrary, Assignment) {
        let dfg = parse_dfg(text).unwrap();
        let lib = parse_library(&format!(
            "resource A add 1 {delay} 0.9\nresource M mul 1 {delay} 0.9"
        ))
        .unwrap();
        let asg = Assignment::per_class(&dfg, &lib, |c| match c {
            OpClass::Add => 0,
            OpClass::Mul => 1,
        })
        .unwrap();
        (dfg, lib, asg)
    }

    const CHAIN: &str = "node a add\nnode b add\nnode c add\nedge a b\nedge b c\n";

    #[test]
    fn asap_chain() {
        let (dfg, lib, asg) = uniform(CHAIN, 1);
        let s = asap(&dfg, &lib, &asg);
        assert_eq!(s.starts(), &[1, 2, 3]);
        assert_eq!(s.latency(), 3);

        let (dfg, lib, asg) = uniform(CHAIN, 2);
        let s = asap(&dfg, &lib, &asg);
        assert_eq!(s.starts(), &[1, 3, 5]);
        assert_eq!(s.latency(), 6);
    }

    #[test]
    fn alap_chain() {
        let (dfg, lib, asg) = uniform(CHAIN, 1);
        assert_eq!(alap(&dfg, &lib, &asg, 5).unwrap().starts(), &[3, 4, 5]);
        assert_eq!(
            alap(&dfg, &lib, &asg, 2),
            Err(Error::InfeasibleBound {
                bound: 2,
                minimum: 3
            })
        );
    }

    #[test]
    fn zero_mobility_on_critical_path() {
        let dfg = crate::model::builtin_benchmark("ew").unwrap();
        let lib = table1_library();
        let asg = Assignment::per_class(&dfg, &lib, |c| match c {
            OpClass::Add => 1,
            OpClass::Mul => 3,
        })
        .unwrap();
        let lat = asap(&dfg, &lib, &asg).latency();
        let window = mobility(&dfg, &lib, &asg, lat).unwrap();
        for v in critical_path(&dfg, &lib, &asg) {
            assert_eq!(window.mobility(v), 0, "{}", dfg.node(v).id);
        }
    }

    #[test]
    fn independent_nodes_spread_out() {
        let (dfg, lib, asg) = uniform("node x add\nnode y add\nnode z add\n", 1);
        let s = density_schedule(&dfg, &lib, &asg, 3).unwrap();
        let mut starts = s.starts().to_vec();
        starts.sort_unstable();
        assert_eq!(starts, vec![1, 2, 3]);
    }

    #[test]
    fn density_mass_is_conserved() {
        let dfg = crate::model::builtin_benchmark("fir16").unwrap();
        let lib = table1_library();
        let asg = Assignment::per_class(&dfg, &lib, |c| match c {
            OpClass::Add => 0,
            OpClass::Mul => 3,
        })
        .unwrap();
        let graph = distribution(&dfg, &lib, &asg, 22).unwrap();
        assert!((graph.total(OpClass::Add) - 30.0).abs() < 1e-9);
        assert!((graph.total(OpClass::Mul) - 16.0).abs() < 1e-9);
    }

    #[test]
    fn critical_path_cases() {
        let (dfg, lib, asg) = uniform(CHAIN, 1);
        assert_eq!(critical_path(&dfg, &lib, &asg), vec![0, 1, 2]);

        let diamond = "node a add\nnode b add\nnode c add\nnode d add\n\
                       edge a b\nedge a c\nedge b d\nedge c d\n";
        let dfg = parse_dfg(diamond).unwrap();
        let lib = parse_library("resource one add 1 1 0.9\nresource two add 1 2 0.9").unwrap();
        let heavy_c = Assignment::new(&dfg, &lib, vec![0, 0, 1, 0]).unwrap();
        assert_eq!(critical_path(&dfg, &lib, &heavy_c), vec![0, 2, 3]);
        let heavy_b = Assignment::new(&dfg, &lib, vec![0, 1, 0, 0]).unwrap();
        assert_eq!(critical_path(&dfg, &lib, &heavy_b), vec![0, 1, 3]);
        let equal = Assignment::new(&dfg, &lib, vec![0, 0, 0, 0]).unwrap();
        assert_eq!(critical_path(&dfg, &lib, &equal), vec![0, 1, 3]);
    }

    #[test]
    fn fir16_minimum_latency_with_slow_units() {
        let dfg = crate::model::builtin_benchmark("fir16").unwrap();
        let lib = table1_library();
        let asg = Assignment::per_class(&dfg, &lib, |c| match c {
            OpClass::Add => 0,
            OpClass::Mul => 3,
        })
        .unwrap();
        assert_eq!(asap(&dfg, &lib, &asg).latency(), 18);
    }

    #[test]
    fn list_schedule_respects_unit_counts() {
        let (dfg, _, _) = uniform("node a add\nnode b add\nnode c add\nnode d add\nedge a d\n", 1);
        let delays = [1, 1, 1, 1];
        let kind = [0, 0, 0, 0];
        let s = list_schedule_with_delays(&dfg, &delays, &kind, &[1], 4).unwrap();
        assert_eq!(s.starts(), &[1, 2, 3, 4]);
        assert_eq!(list_schedule_with_delays(&dfg, &delays, &kind, &[1], 3), None);
        let s = list_schedule_with_delays(&dfg, &delays, &kind, &[2], 2).unwrap();
        assert_eq!(s.starts(), &[1, 1, 2, 2]);
        assert!(s.is_precedence_feasible(&dfg, &delays));
    }

    #[test]
    fn list_schedule_blocks_multicycle_units() {
        let (dfg, _, _) = uniform("node a mul\nnode b mul\n", 3);
        let s = list_schedule_with_delays(&dfg, &[3, 3], &[0, 0], &[1], 6).unwrap();
        assert_eq!(s.starts(), &[1, 4]);
        assert_eq!(list_schedule_with_delays(&dfg, &[3, 3], &[0, 0], &[1], 5), None);
    }
}
