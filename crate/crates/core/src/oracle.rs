//! Brute-force enumerative semantics, used as ground truth for the
//! solvers on small instances.
//!
//! The graph level explores explicit configurations (label vector plus
//! edge set) exactly as the transition system defines them, with every
//! movement and every broadcast enumerated. The population level explores
//! canonical labelings (= label multisets) of a fixed node count; it
//! agrees with the graph level because movement makes the topology
//! unconstrained, which the equivalence tests check exhaustively on small
//! instances. The population level is what makes large `n_max` sweeps in
//! [`oracle_prp`] affordable.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::hash::{BuildHasherDefault, Hasher};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ids::{StateId, StateSet};
use crate::model::{
    broadcast_step, compositions, eval_constraint, labeling_successors, movement_step,
    Configuration, Constraint, LabelMultiset, Process,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle cap exceeded: {0}")]
    CapExceeded(String),
}

/// Exploration caps. `max_nodes` bounds the graph-level node count
/// (raise it explicitly to go past the default, at exponential cost);
/// `max_multisets` budgets the population-level sweep in [`oracle_prp`].
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub max_nodes: usize,
    pub max_multisets: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_nodes: 4,
            max_multisets: 2_000_000,
        }
    }
}

/// Everything the graph-level exploration found for one node count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub n: usize,
    /// Reachable labelings, canonicalized by sorting (node identity is
    /// irrelevant up to permutation).
    pub reachable_labelings: BTreeSet<Vec<StateId>>,
    /// Union of all states occurring in any reachable configuration.
    pub state_coverage: StateSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVerdict {
    /// Least node count whose exploration satisfied the constraint.
    Yes { n: usize },
    /// No satisfying configuration with up to `n_max` nodes; parameterized
    /// NO is not certified.
    NoUpTo { n_max: usize },
}

/// Exhaustive graph-level reachability for exactly `n` nodes: breadth
/// first over (labels, edges) pairs, expanding every movement (each edge
/// subset) and every broadcast (each sender, rule, and receiver choice).
///
/// Deliberately naive; no symmetry reduction is applied during the
/// search, only in the report.
pub fn oracle_graph_reach(
    p: &Process,
    n: usize,
    limits: &OracleLimits,
) -> Result<OracleReport, OracleError> {
    if n < 1 || n > limits.max_nodes {
        return Err(OracleError::CapExceeded(format!(
            "node count {n} outside 1..={}",
            limits.max_nodes
        )));
    }
    let bits_q = usize::BITS as usize - (p.state_count() - 1).max(1).leading_zeros() as usize;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .collect();
    let npairs = pairs.len();
    let total_bits = n * bits_q + npairs;
    if total_bits > 63 {
        return Err(OracleError::CapExceeded(format!(
            "state space needs {total_bits} bits to encode; reduce n or the state count"
        )));
    }
    let label_mask = (1u64 << bits_q) - 1;
    let edge_shift = n * bits_q;

    let decode = |code: u64, labels: &mut Vec<StateId>| {
        labels.clear();
        for i in 0..n {
            labels.push(StateId::new(((code >> (i * bits_q)) & label_mask) as usize));
        }
    };

    let mut visited = Visited::new(total_bits);
    let mut queue: VecDeque<u64> = VecDeque::new();
    let mut seed_labels = vec![0u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(seed_labels.len() * p.initial().len());
        for base in &seed_labels {
            for q in p.initial().iter() {
                next.push((base << bits_q) | q.index() as u64);
            }
        }
        seed_labels = next;
    }
    for labels in seed_labels {
        for mask in 0..(1u64 << npairs) {
            let code = labels | (mask << edge_shift);
            if visited.insert(code) {
                queue.push_back(code);
            }
        }
    }

    let mut labels = Vec::with_capacity(n);
    while let Some(code) = queue.pop_front() {
        decode(code, &mut labels);
        let label_bits = code & ((1u64 << edge_shift) - 1);
        let edge_mask = code >> edge_shift;

        // movement: any replacement edge set
        for mask in 0..(1u64 << npairs) {
            let succ = label_bits | (mask << edge_shift);
            if visited.insert(succ) {
                queue.push_back(succ);
            }
        }

        // broadcast: every sender, enabled rule, and receiver choice
        for sender in 0..n {
            for (_, rule) in p.broadcast_rules() {
                if rule.source != labels[sender] {
                    continue;
                }
                let msg = rule.action.message();
                let mut neighbors = Vec::new();
                for (pi, &(u, v)) in pairs.iter().enumerate() {
                    if edge_mask & (1 << pi) != 0 {
                        if u == sender {
                            neighbors.push(v);
                        } else if v == sender {
                            neighbors.push(u);
                        }
                    }
                }
                let base = (label_bits & !(label_mask << (sender * bits_q)))
                    | ((rule.target.index() as u64) << (sender * bits_q));
                let mut stack = vec![(0usize, base)];
                while let Some((ni, acc)) = stack.pop() {
                    if ni == neighbors.len() {
                        let succ = acc | (edge_mask << edge_shift);
                        if visited.insert(succ) {
                            queue.push_back(succ);
                        }
                        continue;
                    }
                    let u = neighbors[ni];
                    for &t in p.receivers(labels[u], msg) {
                        let next = (acc & !(label_mask << (u * bits_q)))
                            | ((t.index() as u64) << (u * bits_q));
                        stack.push((ni + 1, next));
                    }
                }
            }
        }
    }

    let mut reachable_labelings = BTreeSet::new();
    let mut state_coverage = p.empty_set();
    visited.for_each(|code| {
        let mut l: Vec<StateId> = (0..n)
            .map(|i| StateId::new(((code >> (i * bits_q)) & label_mask) as usize))
            .collect();
        l.sort();
        for &q in &l {
            state_coverage.insert(q);
        }
        reachable_labelings.insert(l);
    });

    Ok(OracleReport {
        n,
        reachable_labelings,
        state_coverage,
    })
}

/// Multiply-and-shift hasher for already-packed `u64` codes; the visited
/// sets here see hundreds of millions of lookups.
#[derive(Default)]
struct CodeHasher(u64);

impl Hasher for CodeHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
        }
    }

    fn write_u64(&mut self, i: u64) {
        let mut h = i.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        h ^= h >> 29;
        self.0 = h;
    }
}

type CodeSet = HashSet<u64, BuildHasherDefault<CodeHasher>>;

enum Visited {
    Dense(Vec<u64>),
    Sparse(CodeSet),
}

impl Visited {
    fn new(total_bits: usize) -> Self {
        if total_bits <= 24 {
            Visited::Dense(vec![0u64; (1usize << total_bits).div_ceil(64)])
        } else {
            Visited::Sparse(CodeSet::default())
        }
    }

    fn insert(&mut self, code: u64) -> bool {
        match self {
            Visited::Dense(bits) => {
                let (b, o) = ((code / 64) as usize, code % 64);
                let fresh = bits[b] & (1 << o) == 0;
                bits[b] |= 1 << o;
                fresh
            }
            Visited::Sparse(set) => set.insert(code),
        }
    }

    fn for_each(&self, mut f: impl FnMut(u64)) {
        match self {
            Visited::Dense(bits) => {
                for (b, &block) in bits.iter().enumerate() {
                    let mut rest = block;
                    while rest != 0 {
                        let tz = rest.trailing_zeros() as u64;
                        rest &= rest - 1;
                        f(b as u64 * 64 + tz);
                    }
                }
            }
            Visited::Sparse(set) => {
                for &code in set {
                    f(code);
                }
            }
        }
    }
}

/// Closure of the initial labelings of `n` nodes under the one-round
/// labeling semantics, canonicalized by sorting. Used by the equivalence
/// tests against the graph level.
pub fn labeling_closure(p: &Process, n: usize) -> BTreeSet<Vec<StateId>> {
    assert!(n >= 1);
    let mut seeds: Vec<Vec<StateId>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for base in &seeds {
            for q in p.initial().iter() {
                let mut l = base.clone();
                l.push(q);
                next.push(l);
            }
        }
        seeds = next;
    }
    let mut visited: BTreeSet<Vec<StateId>> = BTreeSet::new();
    let mut queue: VecDeque<Vec<StateId>> = VecDeque::new();
    for mut l in seeds {
        l.sort();
        if visited.insert(l.clone()) {
            queue.push_back(l);
        }
    }
    while let Some(l) = queue.pop_front() {
        for mut succ in labeling_successors(p, &l) {
            succ.sort();
            if visited.insert(succ.clone()) {
                queue.push_back(succ);
            }
        }
    }
    visited
}

/// Semi-decision of parameterized reachability by exhaustive population
/// sweeps: explore node counts 1..=n_max in order and answer at the first
/// satisfying configuration. The sweep runs on canonical labelings, whose
/// agreement with the graph semantics is validated separately.
pub fn oracle_prp(
    p: &Process,
    phi: &Constraint,
    n_max: usize,
    limits: &OracleLimits,
) -> Result<OracleVerdict, OracleError> {
    assert!(n_max >= 1);
    let mut budget = limits.max_multisets;
    for n in 1..=n_max {
        if population_satisfies(p, phi, n as u32, &mut budget)? {
            return Ok(OracleVerdict::Yes { n });
        }
    }
    Ok(OracleVerdict::NoUpTo { n_max })
}

/// BFS over multisets of total `n`, packed into machine words when the
/// state count allows it.
fn population_satisfies(
    p: &Process,
    phi: &Constraint,
    n: u32,
    budget: &mut usize,
) -> Result<bool, OracleError> {
    let nq = p.state_count();
    let bits_c = 32 - n.leading_zeros() as usize;
    if nq * bits_c <= 63 {
        packed_population_satisfies(p, phi, n, bits_c, budget)
    } else {
        generic_population_satisfies(p, phi, n, budget)
    }
}

fn charge(budget: &mut usize) -> Result<(), OracleError> {
    if *budget == 0 {
        return Err(OracleError::CapExceeded(
            "population sweep exhausted its multiset budget".into(),
        ));
    }
    *budget -= 1;
    Ok(())
}

fn packed_population_satisfies(
    p: &Process,
    phi: &Constraint,
    n: u32,
    bits_c: usize,
    budget: &mut usize,
) -> Result<bool, OracleError> {
    let nq = p.state_count();
    let field = (1u64 << bits_c) - 1;
    let count = |code: u64, q: usize| ((code >> (q * bits_c)) & field) as u32;

    // proper receive targets per (message, state)
    let na = p.alphabet().len();
    let mut targets: Vec<Vec<usize>> = vec![Vec::new(); na * nq];
    for q in 0..nq {
        for a in 0..na {
            targets[a * nq + q] = p
                .receivers(StateId::new(q), crate::ids::MsgId::new(a))
                .iter()
                .filter(|t| t.index() != q)
                .map(|t| t.index())
                .collect();
        }
    }

    let mut visited = CodeSet::default();
    let mut queue: VecDeque<u64> = VecDeque::new();
    let q0: Vec<usize> = p.initial().iter().map(|q| q.index()).collect();
    for split in compositions(n, q0.len()) {
        let mut code = 0u64;
        for (q, c) in q0.iter().zip(split) {
            code |= (c as u64) << (q * bits_c);
        }
        if visited.insert(code) {
            charge(budget)?;
            queue.push_back(code);
        }
    }

    let mut scratch = Vec::new();
    while let Some(code) = queue.pop_front() {
        let mut present = p.empty_set();
        for q in 0..nq {
            if count(code, q) > 0 {
                present.insert(StateId::new(q));
            }
        }
        if eval_constraint(phi, &present) {
            return Ok(true);
        }

        for (_, rule) in p.broadcast_rules() {
            let src = rule.source.index();
            if count(code, src) == 0 {
                continue;
            }
            let msg = rule.action.message().index();
            let base = code - (1u64 << (src * bits_c));
            // states that still have occupants and somewhere to move them
            scratch.clear();
            for q in 0..nq {
                if count(base, q) > 0 && !targets[msg * nq + q].is_empty() {
                    scratch.push(q);
                }
            }
            let sender_add = 1u64 << (rule.target.index() * bits_c);
            distribute_packed(
                &scratch,
                &targets[msg * nq..(msg + 1) * nq],
                0,
                base,
                bits_c,
                field,
                sender_add,
                &mut |succ| {
                    if visited.insert(succ) {
                        charge(budget)?;
                        queue.push_back(succ);
                    }
                    Ok(())
                },
            )?;
        }
    }
    Ok(false)
}

#[allow(clippy::too_many_arguments)]
fn distribute_packed(
    movable: &[usize],
    targets: &[Vec<usize>],
    idx: usize,
    code: u64,
    bits_c: usize,
    field: u64,
    sender_add: u64,
    emit: &mut impl FnMut(u64) -> Result<(), OracleError>,
) -> Result<(), OracleError> {
    if idx == movable.len() {
        return emit(code + sender_add);
    }
    let q = movable[idx];
    let avail = ((code >> (q * bits_c)) & field) as u32;
    let tg = &targets[q];
    // split `avail` into keep + one share per target
    fn splits(
        q: usize,
        tg: &[usize],
        ti: usize,
        left: u32,
        code: u64,
        bits_c: usize,
        field: u64,
        movable: &[usize],
        targets: &[Vec<usize>],
        idx: usize,
        sender_add: u64,
        emit: &mut impl FnMut(u64) -> Result<(), OracleError>,
    ) -> Result<(), OracleError> {
        if ti == tg.len() {
            return distribute_packed(
                movable, targets, idx + 1, code, bits_c, field, sender_add, emit,
            );
        }
        for k in 0..=left {
            let moved = code - ((k as u64) << (q * bits_c)) + ((k as u64) << (tg[ti] * bits_c));
            splits(
                q, tg, ti + 1, left - k, moved, bits_c, field, movable, targets, idx, sender_add,
                emit,
            )?;
        }
        Ok(())
    }
    splits(
        q, tg, 0, avail, code, bits_c, field, movable, targets, idx, sender_add, emit,
    )
}

fn generic_population_satisfies(
    p: &Process,
    phi: &Constraint,
    n: u32,
    budget: &mut usize,
) -> Result<bool, OracleError> {
    let mut visited: HashSet<LabelMultiset> = HashSet::new();
    let mut queue: VecDeque<LabelMultiset> = VecDeque::new();
    for m in crate::cardsolve::initial_multisets(p, n) {
        if visited.insert(m.clone()) {
            charge(budget)?;
            queue.push_back(m);
        }
    }
    while let Some(m) = queue.pop_front() {
        if eval_constraint(phi, &m.support()) {
            return Ok(true);
        }
        for succ in crate::model::multiset_successors(p, &m) {
            if !visited.contains(&succ) {
                charge(budget)?;
                visited.insert(succ.clone());
                queue.push_back(succ);
            }
        }
    }
    Ok(false)
}

/// One emitted step of a random execution.
#[derive(Debug, Clone)]
pub enum WalkEvent {
    Initial(Configuration),
    Movement(Configuration),
    Broadcast {
        sender: usize,
        rule: usize,
        config: Configuration,
    },
}

impl WalkEvent {
    pub fn config(&self) -> &Configuration {
        match self {
            WalkEvent::Initial(c) | WalkEvent::Movement(c) => c,
            WalkEvent::Broadcast { config, .. } => config,
        }
    }
}

/// Random execution of `steps` rounds, each a random movement followed by
/// a random enabled broadcast (if any). Deterministic for a given seed.
pub fn random_walk(p: &Process, n: usize, steps: usize, seed: u64) -> Vec<WalkEvent> {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial: Vec<StateId> = p.initial().iter().collect();
    let labels: Vec<StateId> = (0..n)
        .map(|_| initial[rng.random_range(0..initial.len())])
        .collect();
    let edges = random_edges(&mut rng, n);
    let mut config = Configuration::new(labels, edges).expect("valid seed configuration");
    let mut trace = vec![WalkEvent::Initial(config.clone())];

    for _ in 0..steps {
        config = movement_step(&config, &random_edges(&mut rng, n)).expect("valid movement");
        trace.push(WalkEvent::Movement(config.clone()));

        let mut enabled: Vec<(usize, usize)> = Vec::new();
        for v in 0..n {
            for (ri, rule) in p.broadcast_rules() {
                if rule.source == config.labels()[v] {
                    enabled.push((v, ri));
                }
            }
        }
        if enabled.is_empty() {
            continue;
        }
        let (sender, rule) = enabled[rng.random_range(0..enabled.len())];
        let msg = p.rules()[rule].action.message();
        let choice: BTreeMap<usize, StateId> = config
            .neighbors(sender)
            .into_iter()
            .map(|u| {
                let opts = p.receivers(config.labels()[u], msg);
                (u, opts[rng.random_range(0..opts.len())])
            })
            .collect();
        config = broadcast_step(p, &config, sender, rule, &choice).expect("enabled broadcast");
        trace.push(WalkEvent::Broadcast {
            sender,
            rule,
            config: config.clone(),
        });
    }
    trace
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(0.5) {
                edges.push((u, v));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{ids, p1};
    use crate::model::{normalize, ProcessDecl};

    #[test]
    fn single_node_p1_reaches_two_labelings() {
        let p = p1();
        let report = oracle_graph_reach(&p, 1, &OracleLimits::default()).unwrap();
        let expect: BTreeSet<Vec<StateId>> = [
            vec![p.state_id("q0").unwrap()],
            vec![p.state_id("q1").unwrap()],
        ]
        .into_iter()
        .collect();
        assert_eq!(report.reachable_labelings, expect);
        assert_eq!(report.state_coverage, ids(&p, &["q0", "q1"]));
    }

    #[test]
    fn no_rules_stays_initial() {
        let p = normalize(&ProcessDecl {
            name: "idle".into(),
            states: vec!["a".into(), "b".into()],
            init: vec!["a".into(), "b".into()],
            alphabet: vec![],
            rules: vec![],
        })
        .unwrap();
        let report = oracle_graph_reach(&p, 2, &OracleLimits::default()).unwrap();
        assert_eq!(report.reachable_labelings.len(), 3); // aa, ab, bb
        assert_eq!(report.state_coverage, ids(&p, &["a", "b"]));
    }

    #[test]
    fn cap_is_enforced() {
        let p = p1();
        assert!(matches!(
            oracle_graph_reach(&p, 5, &OracleLimits::default()),
            Err(OracleError::CapExceeded(_))
        ));
        assert!(oracle_graph_reach(&p, 5, &OracleLimits { max_nodes: 5, ..Default::default() })
            .is_ok());
    }

    #[test]
    fn prp_examples_on_p1() {
        let p = p1();
        let lim = OracleLimits::default();
        let q2 = Constraint::AtLeastOne(p.state_id("q2").unwrap());
        assert_eq!(oracle_prp(&p, &q2, 4, &lim).unwrap(), OracleVerdict::Yes { n: 2 });
        let q0 = Constraint::AtLeastOne(p.state_id("q0").unwrap());
        assert_eq!(oracle_prp(&p, &q0, 4, &lim).unwrap(), OracleVerdict::Yes { n: 1 });
    }

    #[test]
    fn prp_no_for_isolated_state() {
        let p = normalize(&ProcessDecl {
            name: "iso".into(),
            states: vec!["q0".into(), "q1".into(), "q3".into()],
            init: vec!["q0".into()],
            alphabet: vec!["a".into()],
            rules: vec![crate::model::RuleDecl {
                source: "q0".into(),
                action: crate::model::ActionDecl::Broadcast("a".into()),
                target: "q1".into(),
            }],
        })
        .unwrap();
        let phi = Constraint::AtLeastOne(p.state_id("q3").unwrap());
        assert_eq!(
            oracle_prp(&p, &phi, 4, &OracleLimits::default()).unwrap(),
            OracleVerdict::NoUpTo { n_max: 4 }
        );
    }

    #[test]
    fn packed_population_matches_generic() {
        let p = p1();
        let phi = Constraint::And(
            Box::new(Constraint::Absent(p.state_id("q0").unwrap())),
            Box::new(Constraint::AtLeastOne(p.state_id("q2").unwrap())),
        );
        for n in 1..=4u32 {
            let mut b1 = usize::MAX;
            let mut b2 = usize::MAX;
            let packed = packed_population_satisfies(&p, &phi, n, 6, &mut b1).unwrap();
            let generic = generic_population_satisfies(&p, &phi, n, &mut b2).unwrap();
            assert_eq!(packed, generic, "n={n}");
            assert_eq!(b1, b2, "same number of multisets charged at n={n}");
        }
    }

    #[test]
    fn walk_is_deterministic_per_seed() {
        let p = p1();
        let t1 = random_walk(&p, 3, 5, 42);
        let t2 = random_walk(&p, 3, 5, 42);
        assert_eq!(t1.len(), t2.len());
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a.config(), b.config());
        }
        assert_eq!(random_walk(&p, 3, 0, 7).len(), 1);
    }

    #[test]
    fn walk_without_broadcasts_is_movement_only() {
        let p = normalize(&ProcessDecl {
            name: "idle".into(),
            states: vec!["a".into()],
            init: vec!["a".into()],
            alphabet: vec![],
            rules: vec![],
        })
        .unwrap();
        let trace = random_walk(&p, 2, 4, 1);
        assert_eq!(trace.len(), 5);
        assert!(trace[1..]
            .iter()
            .all(|e| matches!(e, WalkEvent::Movement(_))));
    }
}
