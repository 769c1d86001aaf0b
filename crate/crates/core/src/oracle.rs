//! Exhaustive reference synthesis for desk-sized instances.
//!
//! Enumerates every per-node version assignment and, for each, searches all
//! start-time vectors for the one with the least functional-unit area. Only
//! the model types are shared with the heuristic flow; longest paths, start
//! windows, interval packing and the reliability product are recomputed
//! here so that the two paths can cross-check each other.

use crate::binder::{Binding, Instance};
use crate::error::{Error, Result};
use crate::model::{Assignment, Dfg, ResourceLibrary};
use crate::scheduler::Schedule;
use crate::synthesizer::{Bounds, Design, Infeasible, InfeasibleReason, Outcome};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimit {
    pub max_nodes: usize,
    pub max_versions_per_class: usize,
    pub max_latency_bound: u32,
}

impl Default for OracleLimit {
    fn default() -> Self {
        Self {
            max_nodes: 8,
            max_versions_per_class: 3,
            max_latency_bound: 12,
        }
    }
}

impl OracleLimit {
    fn check_nodes(&self, dfg: &Dfg) -> Result<()> {
        if dfg.len() > self.max_nodes {
            return Err(Error::OracleLimit(format!(
                "{} nodes (limit {})",
                dfg.len(),
                self.max_nodes
            )));
        }
        Ok(())
    }

    fn check(&self, dfg: &Dfg, library: &ResourceLibrary, bounds: Bounds) -> Result<()> {
        self.check_nodes(dfg)?;
        for class in dfg.classes() {
            let n = library.versions_of(class).len();
            if n > self.max_versions_per_class {
                return Err(Error::OracleLimit(format!(
                    "{n} {class} versions (limit {})",
                    self.max_versions_per_class
                )));
            }
        }
        if bounds.latency > self.max_latency_bound {
            return Err(Error::OracleLimit(format!(
                "latency bound {} (limit {})",
                bounds.latency, self.max_latency_bound
            )));
        }
        Ok(())
    }
}

/// Heaviest source-to-sink path, found by walking every path explicitly.
pub fn oracle_min_latency(
    dfg: &Dfg,
    library: &ResourceLibrary,
    assignment: &Assignment,
    limit: OracleLimit,
) -> Result<u32> {
    limit.check_nodes(dfg)?;
    let delay = |n: usize| library.get(assignment.version(n)).delay;

    fn walk(dfg: &Dfg, node: usize, acc: u32, delay: &dyn Fn(usize) -> u32, best: &mut u32) {
        let acc = acc + delay(node);
        if dfg.succs(node).is_empty() {
            *best = (*best).max(acc);
        }
        for &s in dfg.succs(node) {
            walk(dfg, s, acc, delay, best);
        }
    }

    let mut best = 0;
    for source in (0..dfg.len()).filter(|&n| dfg.preds(n).is_empty()) {
        walk(dfg, source, 0, &delay, &mut best);
    }
    Ok(best)
}

/// Cycles from a node's start to the end of the longest chain through it.
fn tails(dfg: &Dfg, delays: &[u32]) -> Vec<u32> {
    fn tail(dfg: &Dfg, n: usize, delays: &[u32], memo: &mut [Option<u32>]) -> u32 {
        if let Some(t) = memo[n] {
            return t;
        }
        let rest = dfg
            .succs(n)
            .iter()
            .map(|&s| tail(dfg, s, delays, memo))
            .max()
            .unwrap_or(0);
        let t = delays[n] + rest;
        memo[n] = Some(t);
        t
    }
    let mut memo = vec![None; dfg.len()];
    (0..dfg.len()).map(|n| tail(dfg, n, delays, &mut memo)).collect()
}

/// Branch-and-bound search for the least-area schedule of one assignment.
struct ScheduleSearch<'a> {
    dfg: &'a Dfg,
    delays: Vec<u32>,
    versions: Vec<usize>,
    unit_area: Vec<f64>,
    tails: Vec<u32>,
    order: Vec<usize>,
    latency_bound: u32,
    /// usage[version][cycle]
    usage: Vec<Vec<u32>>,
    peak: Vec<u32>,
    starts: Vec<u32>,
    best_area: f64,
    best: Option<Vec<u32>>,
}

impl ScheduleSearch<'_> {
    fn area(&self) -> f64 {
        self.peak
            .iter()
            .zip(&self.unit_area)
            .map(|(&p, &a)| f64::from(p) * a)
            .sum()
    }

    fn place(&mut self, depth: usize) {
        if self.area() > self.best_area + EPS {
            return;
        }
        if depth == self.order.len() {
            let area = self.area();
            if self.best.is_none() || area < self.best_area - EPS {
                self.best_area = area;
                self.best = Some(self.starts.clone());
            }
            return;
        }
        let n = self.order[depth];
        let earliest = self
            .dfg
            .preds(n)
            .iter()
            .map(|&p| self.starts[p] + self.delays[p])
            .max()
            .unwrap_or(1);
        let Some(latest) = (self.latency_bound + 1).checked_sub(self.tails[n]) else {
            return;
        };
        let v = self.versions[n];
        for s in earliest..=latest {
            let saved_peak = self.peak[v];
            for c in s..s + self.delays[n] {
                let u = &mut self.usage[v][c as usize];
                *u += 1;
                self.peak[v] = self.peak[v].max(*u);
            }
            self.starts[n] = s;
            self.place(depth + 1);
            for c in s..s + self.delays[n] {
                self.usage[v][c as usize] -= 1;
            }
            self.peak[v] = saved_peak;
        }
    }
}

fn min_area_schedule(
    dfg: &Dfg,
    library: &ResourceLibrary,
    versions: &[usize],
    bounds: Bounds,
) -> Option<(Vec<u32>, f64)> {
    let delays: Vec<u32> = versions.iter().map(|&v| library.get(v).delay).collect();
    let tails = tails(dfg, &delays);
    if tails.iter().any(|&t| t > bounds.latency) {
        return None;
    }
    let mut search = ScheduleSearch {
        dfg,
        tails,
        order: dfg.topo_order().to_vec(),
        latency_bound: bounds.latency,
        usage: vec![vec![0; bounds.latency as usize + 2]; library.len()],
        peak: vec![0; library.len()],
        unit_area: library.versions().iter().map(|v| v.area).collect(),
        starts: vec![0; dfg.len()],
        best_area: bounds.area,
        best: None,
        versions: versions.to_vec(),
        delays,
    };
    search.place(0);
    let area = search.best_area;
    search.best.map(|starts| (starts, area))
}

/// First-fit interval packing per version, in start order.
fn pack(dfg: &Dfg, library: &ResourceLibrary, versions: &[usize], starts: &[u32]) -> Result<Binding> {
    let mut order: Vec<usize> = (0..dfg.len()).collect();
    order.sort_by_key(|&n| (starts[n], n));
    let mut instances: Vec<Instance> = Vec::new();
    let mut free_at: Vec<u32> = Vec::new();
    let mut node_instance = vec![0; dfg.len()];
    for n in order {
        let v = versions[n];
        let id = match (0..instances.len()).find(|&i| instances[i].version == v && free_at[i] <= starts[n]) {
            Some(i) => i,
            None => {
                instances.push(Instance {
                    id: instances.len(),
                    version: v,
                    nmr: 1,
                });
                free_at.push(0);
                instances.len() - 1
            }
        };
        free_at[id] = starts[n] + library.get(v).delay;
        node_instance[n] = id;
    }
    Binding::from_parts(node_instance, instances)
}

/// Highest-reliability design meeting both bounds, found exhaustively.
/// Ties go to smaller area, then smaller latency, then enumeration order.
pub fn oracle_best(
    dfg: &Dfg,
    library: &ResourceLibrary,
    bounds: Bounds,
    limit: OracleLimit,
) -> Result<Outcome> {
    limit.check(dfg, library, bounds)?;
    library.check_covers(dfg)?;

    let options: Vec<Vec<usize>> = dfg
        .nodes()
        .iter()
        .map(|n| library.versions_of(n.op_class))
        .collect();

    // Odometer over per-node choices, last node fastest.
    let mut candidates: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut digits = vec![0usize; dfg.len()];
    loop {
        let versions: Vec<usize> = digits.iter().zip(&options).map(|(&d, o)| o[d]).collect();
        let reliability = versions
            .iter()
            .map(|&v| library.get(v).reliability)
            .product::<f64>();
        candidates.push((reliability, versions));
        let mut pos = dfg.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < options[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
        if digits.iter().all(|&d| d == 0) {
            break;
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));

    // (reliability, area, latency, versions, starts)
    type Best = (f64, f64, u32, Vec<usize>, Vec<u32>);
    let mut best: Option<Best> = None;
    let mut fastest = u32::MAX;
    for (reliability, versions) in candidates {
        if let Some((best_rel, ..)) = &best {
            if reliability < best_rel * (1.0 - 1e-12) {
                break;
            }
        }
        let delays: Vec<u32> = versions.iter().map(|&v| library.get(v).delay).collect();
        let min_latency = tails(dfg, &delays).into_iter().max().unwrap_or(0);
        fastest = fastest.min(min_latency);
        if min_latency > bounds.latency {
            continue;
        }
        let mut used = versions.clone();
        used.sort_unstable();
        used.dedup();
        let floor: f64 = used.iter().map(|&v| library.get(v).area).sum();
        if floor > bounds.area + EPS {
            continue;
        }
        let Some((starts, area)) = min_area_schedule(dfg, library, &versions, bounds) else {
            continue;
        };
        let latency = starts
            .iter()
            .zip(&delays)
            .map(|(&s, &d)| s + d - 1)
            .max()
            .unwrap_or(0);
        let better = match &best {
            None => true,
            Some((_, best_area, best_latency, ..)) => {
                area < best_area - EPS || ((area - best_area).abs() <= EPS && latency < *best_latency)
            }
        };
        if better {
            best = Some((reliability, area, latency, versions, starts));
        }
    }

    let Some((reliability, area, latency, versions, starts)) = best else {
        let reason = if fastest <= bounds.latency {
            InfeasibleReason::Area
        } else {
            InfeasibleReason::Latency
        };
        return Ok(Outcome::Infeasible(Infeasible {
            reason,
            latency: fastest,
            area: None,
        }));
    };
    let binding = pack(dfg, library, &versions, &starts)?;
    let delays: Vec<u32> = versions.iter().map(|&v| library.get(v).delay).collect();
    Ok(Outcome::Feasible(Design {
        assignment: Assignment::new(dfg, library, versions)?,
        schedule: Schedule::from_starts(starts, &delays),
        binding,
        latency,
        area,
        reliability,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_benchmark, parse_dfg, parse_library, table1_library};

    #[test]
    fn min_latency_examples() {
        let lib = table1_library();
        let chain = parse_dfg("node a add\nnode b add\nnode c add\nedge a b\nedge b c\n").unwrap();
        let slow = Assignment::new(&chain, &lib, vec![0; 3]).unwrap();
        assert_eq!(oracle_min_latency(&chain, &lib, &slow, OracleLimit::default()).unwrap(), 6);

        let one = parse_dfg("node m mul\n").unwrap();
        let asg = Assignment::new(&one, &lib, vec![3]).unwrap();
        assert_eq!(oracle_min_latency(&one, &lib, &asg, OracleLimit::default()).unwrap(), 2);

        let fir = builtin_benchmark("fir16").unwrap();
        let asg = Assignment::per_class(&fir, &lib, |c| match c {
            crate::model::OpClass::Add => 0,
            crate::model::OpClass::Mul => 3,
        })
        .unwrap();
        assert!(matches!(
            oracle_min_latency(&fir, &lib, &asg, OracleLimit::default()),
            Err(Error::OracleLimit(_))
        ));
        let wide = OracleLimit {
            max_nodes: 32,
            ..OracleLimit::default()
        };
        assert_eq!(oracle_min_latency(&fir, &lib, &asg, wide).unwrap(), 18);
    }

    #[test]
    fn single_node_takes_best_fitting_version() {
        let lib = table1_library();
        let dfg = parse_dfg("node a add\n").unwrap();
        let d = oracle_best(&dfg, &lib, Bounds::new(5, 10.0).unwrap(), OracleLimit::default())
            .unwrap()
            .into_design()
            .unwrap();
        assert_eq!(lib.get(d.assignment.version(0)).name, "Adder1");

        // One cycle rules out the two-cycle ripple adder.
        let d = oracle_best(&dfg, &lib, Bounds::new(1, 10.0).unwrap(), OracleLimit::default())
            .unwrap()
            .into_design()
            .unwrap();
        assert_eq!(lib.get(d.assignment.version(0)).name, "Adder3");
    }

    #[test]
    fn slow_versions_cannot_meet_one_cycle() {
        let lib = parse_library("resource a add 1 2 0.99").unwrap();
        let dfg = parse_dfg("node x add\n").unwrap();
        let out = oracle_best(&dfg, &lib, Bounds::new(1, 1e6).unwrap(), OracleLimit::default()).unwrap();
        assert!(matches!(
            out,
            Outcome::Infeasible(Infeasible { reason: InfeasibleReason::Latency, .. })
        ));
    }

    #[test]
    fn refuses_large_instances() {
        let lib = table1_library();
        let dfg = builtin_benchmark("fir16").unwrap();
        assert!(matches!(
            oracle_best(&dfg, &lib, Bounds::new(11, 12.0).unwrap(), OracleLimit::default()),
            Err(Error::OracleLimit(_))
        ));
        let small = parse_dfg("node a add\n").unwrap();
        assert!(matches!(
            oracle_best(&small, &lib, Bounds::new(13, 12.0).unwrap(), OracleLimit::default()),
            Err(Error::OracleLimit(_))
        ));
    }
}
