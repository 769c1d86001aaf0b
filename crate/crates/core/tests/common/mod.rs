#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relsynth::model::{Dfg, DfgNode, OpClass, ResourceLibrary, ResourceVersion};
use relsynth::synthesizer::{Bounds, Design};

pub struct Instance {
    pub dfg: Dfg,
    pub library: ResourceLibrary,
    pub bounds: Bounds,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// DAG with `n` nodes; edges only run from lower to higher index.
pub fn random_dfg(rng: &mut impl Rng, n: usize, edge_prob: f64) -> Dfg {
    let nodes: Vec<DfgNode> = (0..n)
        .map(|i| {
            let class = if rng.gen_bool(0.6) { OpClass::Add } else { OpClass::Mul };
            DfgNode::new(format!("n{i}"), class)
        })
        .collect();
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..j {
            if rng.gen_bool(edge_prob) {
                edges.push((format!("n{i}"), format!("n{j}")));
            }
        }
    }
    Dfg::new(nodes, &edges).expect("forward edges form a DAG")
}

/// One to three versions per class with distinct names and mixed trade-offs.
pub fn random_library(rng: &mut impl Rng) -> ResourceLibrary {
    let mut versions = Vec::new();
    for (class, stem) in [(OpClass::Add, "A"), (OpClass::Mul, "M")] {
        let k = rng.gen_range(1..=3);
        for v in 0..k {
            let area = f64::from(rng.gen_range(1..=4u32));
            let delay = rng.gen_range(1..=3);
            let reliability = [0.999, 0.995, 0.987, 0.98, 0.969, 0.95].choose(rng).copied().unwrap();
            versions.push(
                ResourceVersion::new(format!("{stem}{v}"), class, area, delay, reliability).unwrap(),
            );
        }
    }
    ResourceLibrary::new(versions).unwrap()
}

/// Small instance with bounds drawn around the fastest and slowest ASAP latency.
pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let n = rng.gen_range(2..=8);
    let dfg = random_dfg(rng, n, 0.3);
    let library = random_library(rng);
    let fastest = longest_path(&dfg, &per_node(&dfg, &library, |vs| vs.iter().map(|v| v.delay).min().unwrap()));
    let slowest = longest_path(&dfg, &per_node(&dfg, &library, |vs| vs.iter().map(|v| v.delay).max().unwrap()));
    let lo = fastest.saturating_sub(1).clamp(1, 12);
    let hi = (slowest + 2).clamp(lo, 12);
    let latency = rng.gen_range(lo..=hi);
    let max_area: f64 = library.versions().iter().map(|v| v.area).fold(0.0, f64::max);
    let area = f64::from(rng.gen_range(1..=(max_area as u32 * 3)));
    Instance {
        dfg,
        library,
        bounds: Bounds::new(latency, area).unwrap(),
    }
}

fn per_node(dfg: &Dfg, lib: &ResourceLibrary, pick: impl Fn(&[&ResourceVersion]) -> u32) -> Vec<u32> {
    dfg.nodes()
        .iter()
        .map(|n| {
            let vs: Vec<&ResourceVersion> = lib.versions().iter().filter(|v| v.op_class == n.op_class).collect();
            pick(&vs)
        })
        .collect()
}

/// Longest path by delay over index order (nodes are topologically indexed).
pub fn longest_path(dfg: &Dfg, delays: &[u32]) -> u32 {
    let mut finish = vec![0u32; dfg.len()];
    for j in 0..dfg.len() {
        let ready = dfg.preds(j).iter().map(|&p| finish[p]).max().unwrap_or(0);
        finish[j] = ready + delays[j];
    }
    finish.into_iter().max().unwrap_or(0)
}

/// Independent re-validation of a design: precedence, bounds, overlap, area.
pub fn revalidate(dfg: &Dfg, lib: &ResourceLibrary, bounds: Bounds, d: &Design) -> Result<(), String> {
    let delay = |n: usize| lib.get(d.assignment.version(n)).delay;
    let start = |n: usize| d.schedule.start(n);
    for &(a, b) in dfg.edges() {
        if start(a) + delay(a) > start(b) {
            return Err(format!("edge {a}->{b} violated"));
        }
    }
    let latency = (0..dfg.len()).map(|n| start(n) + delay(n) - 1).max().unwrap_or(0);
    if latency != d.latency || latency > bounds.latency {
        return Err(format!("latency {latency} vs reported {} bound {}", d.latency, bounds.latency));
    }
    if (0..dfg.len()).any(|n| start(n) < 1) {
        return Err("start before cycle 1".into());
    }
    for a in 0..dfg.len() {
        let ia = d.binding.instance_of(a);
        if lib.get(d.binding.instances()[ia].version).name != lib.get(d.assignment.version(a)).name {
            return Err(format!("node {a} bound to a unit of another version"));
        }
        for b in a + 1..dfg.len() {
            if ia == d.binding.instance_of(b) {
                let disjoint = start(a) + delay(a) <= start(b) || start(b) + delay(b) <= start(a);
                if !disjoint {
                    return Err(format!("nodes {a} and {b} overlap on instance {ia}"));
                }
            }
        }
    }
    let area: f64 = d
        .binding
        .instances()
        .iter()
        .map(|i| lib.get(i.version).area * f64::from(i.nmr))
        .sum();
    if (area - d.area).abs() > 1e-9 || area > bounds.area + 1e-9 {
        return Err(format!("area {area} vs reported {} bound {}", d.area, bounds.area));
    }
    Ok(())
}
