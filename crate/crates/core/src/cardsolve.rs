//! Cardinality reachability: breadth-first search over label multisets of
//! the network size fixed by the constraint.
//!
//! The constraint total K pins the node count of every configuration in a
//! run, so the search space is the finite set of K-element multisets over
//! the control states. An explicit visited set replaces nondeterministic
//! polynomial-space guessing; desk-scale instances favor time-bounded
//! completeness over space optimality. A DFS variant would recover the
//! polynomial-space bound but is intentionally not provided.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::ids::StateId;
use crate::model::{
    compositions, eval_card, multiset_successor_steps, CardinalityConstraint, LabelMultiset,
    MultisetStep, Process,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CardError {
    #[error("memory cap of {cap} bytes exceeded after {visited} multisets")]
    MemoryCapExceeded { cap: usize, visited: usize },
}

/// Search limits for [`decide_crp`]. `max_bytes` caps the approximate
/// size of the visited store; `None` means unbounded.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrpLimits {
    pub max_bytes: Option<usize>,
}

/// A shortest run from an initial multiset to a satisfying one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrpTrace {
    pub initial: LabelMultiset,
    pub steps: Vec<MultisetStep>,
}

#[derive(Debug, Clone)]
pub struct CrpResult {
    pub answer: bool,
    pub trace: Option<CrpTrace>,
    /// Distinct multisets stored during the search.
    pub explored: usize,
}

/// All multisets of total `k` supported on the initial states, in
/// lexicographic order of the interned count vectors.
pub fn initial_multisets(p: &Process, k: u32) -> Vec<LabelMultiset> {
    assert!(k >= 1, "network size must be at least one");
    let q0: Vec<StateId> = p.initial().iter().collect();
    let mut out = Vec::new();
    for split in compositions(k, q0.len()) {
        let mut m = LabelMultiset::zero(p.state_count());
        for (q, c) in q0.iter().zip(split) {
            m.set_count(*q, c);
        }
        out.push(m);
    }
    out.sort();
    out
}

/// Decides cardinality reachability by BFS from every initial multiset of
/// total K, following the counting semantics of broadcasts. Returns a
/// shortest witness trace for YES.
pub fn decide_crp(
    p: &Process,
    card: &CardinalityConstraint,
    limits: &CrpLimits,
) -> Result<CrpResult, CardError> {
    let k = card.total();
    let bytes_per_entry = 2 * (p.state_count() * 4 + 48);

    let mut visited: HashMap<LabelMultiset, Option<(LabelMultiset, MultisetStep)>> = HashMap::new();
    let mut queue: VecDeque<LabelMultiset> = VecDeque::new();
    for m in initial_multisets(p, k) {
        if visited.insert(m.clone(), None).is_none() {
            queue.push_back(m);
        }
    }

    let bound = multiset_count_bound(k, p.state_count());
    while let Some(m) = queue.pop_front() {
        debug_assert_eq!(m.total(), k, "node count is conserved");
        if eval_card(card, &m) {
            let trace = reconstruct(&visited, &m);
            let explored = visited.len();
            assert!(explored as u128 <= bound);
            return Ok(CrpResult {
                answer: true,
                trace: Some(trace),
                explored,
            });
        }
        for step in multiset_successor_steps(p, &m) {
            if visited.contains_key(&step.result) {
                continue;
            }
            if let Some(cap) = limits.max_bytes {
                if (visited.len() + 1) * bytes_per_entry > cap {
                    return Err(CardError::MemoryCapExceeded {
                        cap,
                        visited: visited.len(),
                    });
                }
            }
            let succ = step.result.clone();
            visited.insert(succ.clone(), Some((m.clone(), step)));
            queue.push_back(succ);
        }
    }
    let explored = visited.len();
    assert!(explored as u128 <= bound);
    Ok(CrpResult {
        answer: false,
        trace: None,
        explored,
    })
}

/// Number of multisets of total `k` over `n` states, saturating.
fn multiset_count_bound(k: u32, n: usize) -> u128 {
    // C(k + n - 1, n - 1)
    let mut acc: u128 = 1;
    for i in 0..(n.saturating_sub(1)) {
        acc = acc.saturating_mul(k as u128 + i as u128 + 1);
        acc /= i as u128 + 1;
        if acc > u128::MAX / 2 {
            return u128::MAX;
        }
    }
    acc
}

fn reconstruct(
    visited: &HashMap<LabelMultiset, Option<(LabelMultiset, MultisetStep)>>,
    target: &LabelMultiset,
) -> CrpTrace {
    let mut steps = Vec::new();
    let mut cur = target.clone();
    loop {
        match visited.get(&cur).expect("visited entry") {
            None => break,
            Some((parent, step)) => {
                steps.push(step.clone());
                cur = parent.clone();
            }
        }
    }
    steps.reverse();
    CrpTrace {
        initial: cur,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{multiset, p1};
    use crate::model::{multiset_successors, normalize, ProcessDecl};

    #[test]
    fn initial_multisets_of_singleton_init() {
        let p = p1();
        assert_eq!(initial_multisets(&p, 2), vec![multiset(&p, &[("q0", 2)])]);
    }

    #[test]
    fn initial_multisets_enumerate_compositions() {
        let p = normalize(&ProcessDecl {
            name: "two".into(),
            states: vec!["x".into(), "y".into()],
            init: vec!["x".into(), "y".into()],
            alphabet: vec![],
            rules: vec![],
        })
        .unwrap();
        let ms = initial_multisets(&p, 2);
        assert_eq!(
            ms,
            vec![
                multiset(&p, &[("y", 2)]),
                multiset(&p, &[("x", 1), ("y", 1)]),
                multiset(&p, &[("x", 2)]),
            ]
        );
    }

    #[test]
    #[should_panic(expected = "at least one")]
    fn zero_network_size_is_rejected() {
        initial_multisets(&p1(), 0);
    }

    #[test]
    fn p1_reaches_the_split_pair() {
        let p = p1();
        let card =
            CardinalityConstraint::new(multiset(&p, &[("q1", 1), ("q2", 1)]).counts().to_vec())
                .unwrap();
        let r = decide_crp(&p, &card, &CrpLimits::default()).unwrap();
        assert!(r.answer);
        let trace = r.trace.unwrap();
        assert_eq!(trace.initial, multiset(&p, &[("q0", 2)]));
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].result, multiset(&p, &[("q1", 1), ("q2", 1)]));
        // the step is a real successor of the initial multiset
        assert!(multiset_successors(&p, &trace.initial).contains(&trace.steps[0].result));
    }

    #[test]
    fn lone_node_cannot_become_a_receiver() {
        let p = p1();
        let card = CardinalityConstraint::new(multiset(&p, &[("q2", 1)]).counts().to_vec()).unwrap();
        let r = decide_crp(&p, &card, &CrpLimits::default()).unwrap();
        assert!(!r.answer);
        assert!(r.trace.is_none());
    }

    #[test]
    fn initial_match_needs_no_steps() {
        let p = p1();
        let card = CardinalityConstraint::new(multiset(&p, &[("q0", 2)]).counts().to_vec()).unwrap();
        let r = decide_crp(&p, &card, &CrpLimits::default()).unwrap();
        assert!(r.answer);
        let trace = r.trace.unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(trace.initial, multiset(&p, &[("q0", 2)]));
    }

    #[test]
    fn memory_cap_aborts_with_diagnostic() {
        let p = p1();
        let card =
            CardinalityConstraint::new(multiset(&p, &[("q2", 4)]).counts().to_vec()).unwrap();
        let err = decide_crp(&p, &card, &CrpLimits { max_bytes: Some(64) }).unwrap_err();
        assert!(matches!(err, CardError::MemoryCapExceeded { .. }));
    }
}
