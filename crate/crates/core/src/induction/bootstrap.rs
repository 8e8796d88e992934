use std::collections::{BTreeSet, HashMap};

use super::rds::{RdsGraph, BEGIN, END};
use super::AdiosParams;

/// Interchangeable units found in a shared context.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceClass {
    /// Member units, ascending.
    pub members: Vec<usize>,
    /// The window that anchored the class, `None` at the variable slot.
    pub context: Vec<Option<usize>>,
    /// Smallest pairwise overlap ratio among the members.
    pub overlap: f64,
}

type Context = Vec<Option<usize>>;

/// `|A ∩ B| / |A ∪ B|`.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Variable slot positions inside a window: the interior slots, or both
/// slots of a two-slot window.
fn slots(window: usize) -> Vec<usize> {
    if window <= 2 {
        (0..window).collect()
    } else {
        (1..window - 1).collect()
    }
}

/// Slides a `context_window`-slot window along every path and records, for
/// each context (the window with one variable slot), the units filling the
/// slot. Within each context with two or more fillers, fillers are grouped
/// greedily in id order: a unit joins the first group where its overlap ratio
/// with every member is at least `bootstrap_threshold`. The overlap ratio of
/// two units is the Jaccard index of the sets of contexts they fill. Groups
/// of two or more units are returned in order of the first appearance of
/// their context.
pub fn bootstrap_generalize(graph: &RdsGraph, params: &AdiosParams) -> Vec<EquivalenceClass> {
    let window = params.context_window;
    let mut order: Vec<Context> = Vec::new();
    let mut fillers: HashMap<Context, BTreeSet<usize>> = HashMap::new();
    let mut contexts: HashMap<usize, BTreeSet<Context>> = HashMap::new();
    for path in graph.paths() {
        if path.len() < window {
            continue;
        }
        for start in 0..=path.len() - window {
            let w = &path[start..start + window];
            for slot in slots(window) {
                let unit = w[slot];
                if unit == BEGIN || unit == END {
                    continue;
                }
                let mut ctx: Context = w.iter().copied().map(Some).collect();
                ctx[slot] = None;
                let set = fillers.entry(ctx.clone()).or_insert_with(|| {
                    order.push(ctx.clone());
                    BTreeSet::new()
                });
                set.insert(unit);
                contexts.entry(unit).or_default().insert(ctx);
            }
        }
    }

    let mut out = Vec::new();
    for ctx in order {
        let units = &fillers[&ctx];
        if units.len() < 2 {
            continue;
        }
        let mut groups: Vec<(Vec<usize>, f64)> = Vec::new();
        for &u in units {
            let joined = groups.iter_mut().find_map(|(members, overlap)| {
                let ratios: Vec<f64> = members
                    .iter()
                    .map(|m| jaccard(&contexts[&u], &contexts[m]))
                    .collect();
                let low = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                (low >= params.bootstrap_threshold).then(|| {
                    members.push(u);
                    *overlap = overlap.min(low);
                })
            });
            if joined.is_none() {
                groups.push((vec![u], f64::INFINITY));
            }
        }
        for (members, overlap) in groups {
            if members.len() >= 2 {
                out.push(EquivalenceClass {
                    members,
                    context: ctx.clone(),
                    overlap,
                });
            }
        }
    }
    out
}
