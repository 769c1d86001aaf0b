//! Design reliability, N-modular redundancy, the redundancy-only baseline
//! and the combined versions-plus-redundancy flow.
//!
//! Every node must succeed for the design to succeed, so design reliability
//! is the product of per-node reliabilities. A node on an instance with
//! factor `N > 1` gets the majority-vote reliability of `N` copies of its
//! version.

use crate::binder::{bind_with_delays, check_nmr, total_area, Binding};
use crate::error::{Error, Result};
use crate::model::{Assignment, Dfg, ResourceLibrary};
use crate::scheduler::{asap_with_delays, density_schedule_with_delays};
use crate::synthesizer::{find_design, Bounds, Design, Infeasible, InfeasibleReason, Outcome, AREA_EPS};

/// Reliability of `n` replicas under majority voting: the probability that
/// at least `(n+1)/2` of them succeed.
pub fn nmr_reliability(r: f64, n: u32) -> Result<f64> {
    check_nmr(n)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidArgument(format!("reliability {r} outside [0, 1]")));
    }
    if n == 1 {
        return Ok(r);
    }
    let k = n.div_ceil(2);
    let q = 1.0 - r;
    let mut binom = 1.0f64; // C(n, i), built up from i = n downwards
    let mut sum = 0.0;
    for i in (k..=n).rev() {
        sum += binom * r.powi(i as i32) * q.powi((n - i) as i32);
        binom = binom * f64::from(i) / f64::from(n - i + 1);
    }
    Ok(sum)
}

fn node_reliability(library: &ResourceLibrary, version: usize, nmr: u32) -> Result<f64> {
    nmr_reliability(library.get(version).reliability, nmr)
}

/// Product of per-node reliabilities, accumulated in log space.
pub fn evaluate_reliability(
    dfg: &Dfg,
    library: &ResourceLibrary,
    assignment: &Assignment,
    binding: &Binding,
) -> Result<f64> {
    if binding.node_instances().len() != dfg.len() {
        return Err(Error::InconsistentDesign(format!(
            "binding covers {} of {} nodes",
            binding.node_instances().len(),
            dfg.len()
        )));
    }
    let mut log_sum = 0.0;
    for node in 0..dfg.len() {
        let inst = &binding.instances()[binding.instance_of(node)];
        if inst.version != assignment.version(node) {
            return Err(Error::InconsistentDesign(format!(
                "node `{}` assigned {} but bound to a {} instance",
                dfg.node(node).id,
                library.get(assignment.version(node)).name,
                library.get(inst.version).name
            )));
        }
        log_sum += node_reliability(library, inst.version, inst.nmr)?.ln();
    }
    Ok(log_sum.exp())
}

/// Greedily raises instance redundancy (`N -> N+2`) while area allows,
/// always taking the upgrade with the best log-reliability gain per unit of
/// added area (lowest instance id on ties). Upgrades that would not raise
/// reliability are never taken.
pub fn greedy_nmr_upgrade(
    dfg: &Dfg,
    library: &ResourceLibrary,
    design: &Design,
    area_bound: f64,
) -> Result<Design> {
    let mut binding = design.binding.clone();
    let mut area = total_area(&binding, library);
    loop {
        let mut best: Option<(usize, f64)> = None;
        for inst in binding.instances() {
            let unit_area = library.get(inst.version).area;
            let cost = 2.0 * unit_area;
            if area + cost > area_bound + AREA_EPS {
                continue;
            }
            let before = node_reliability(library, inst.version, inst.nmr)?.ln();
            let after = node_reliability(library, inst.version, inst.nmr + 2)?.ln();
            let users = binding.nodes_on(inst.id).count() as f64;
            let gain = users * (after - before);
            if gain <= 0.0 {
                continue;
            }
            let score = gain / cost;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((inst.id, score));
            }
        }
        let Some((id, _)) = best else { break };
        let nmr = binding.instances()[id].nmr + 2;
        binding.set_nmr(id, nmr)?;
        area = total_area(&binding, library);
    }
    Design::assemble(
        dfg,
        library,
        design.assignment.clone(),
        design.schedule.clone(),
        binding,
    )
}

/// All single-version-per-class assignments, in library order with the
/// first used class varying slowest.
fn single_version_assignments(dfg: &Dfg, library: &ResourceLibrary) -> Result<Vec<Assignment>> {
    library.check_covers(dfg)?;
    let classes = dfg.classes();
    let options: Vec<Vec<usize>> = classes.iter().map(|&c| library.versions_of(c)).collect();
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for opts in &options {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|choice| {
            Assignment::per_class(dfg, library, |class| {
                let pos = classes.iter().position(|&c| c == class).expect("used class");
                choice[pos]
            })
        })
        .collect()
}

/// Redundancy-only baseline: one version per operation class, reliability
/// raised purely through NMR within the leftover area.
pub fn baseline_nmr_synth(dfg: &Dfg, library: &ResourceLibrary, bounds: Bounds) -> Result<Outcome> {
    let mut best: Option<Design> = None;
    let mut fastest = u32::MAX;
    for assignment in single_version_assignments(dfg, library)? {
        let delays = assignment.delays(library);
        let minimum = asap_with_delays(dfg, &delays).latency();
        fastest = fastest.min(minimum);
        if minimum > bounds.latency {
            continue;
        }
        let schedule = density_schedule_with_delays(dfg, &delays, bounds.latency)?;
        let binding = bind_with_delays(dfg, &schedule, &assignment, &delays);
        let area = total_area(&binding, library);
        if area > bounds.area + AREA_EPS {
            continue;
        }
        let plain = Design::assemble(dfg, library, assignment, schedule, binding)?;
        let upgraded = greedy_nmr_upgrade(dfg, library, &plain, bounds.area)?;
        let better = match &best {
            None => true,
            Some(b) => upgraded
                .reliability
                .total_cmp(&b.reliability)
                .then(b.area.total_cmp(&upgraded.area))
                .then(b.latency.cmp(&upgraded.latency))
                .is_gt(),
        };
        if better {
            best = Some(upgraded);
        }
    }
    Ok(match best {
        Some(d) => Outcome::Feasible(d),
        None if fastest <= bounds.latency => Outcome::Infeasible(Infeasible {
            reason: InfeasibleReason::Area,
            latency: bounds.latency,
            area: None,
        }),
        None => Outcome::Infeasible(Infeasible {
            reason: InfeasibleReason::Latency,
            latency: fastest,
            area: None,
        }),
    })
}

/// Reliability-driven version selection followed by NMR upgrades in the
/// remaining area. Redundant copies use the version already chosen.
pub fn combined_synth(dfg: &Dfg, library: &ResourceLibrary, bounds: Bounds) -> Result<Outcome> {
    Ok(match find_design(dfg, library, bounds)? {
        Outcome::Feasible(d) => Outcome::Feasible(greedy_nmr_upgrade(dfg, library, &d, bounds.area)?),
        infeasible => infeasible,
    })
}
