//! Domain types, process normalization, and the operational semantics at
//! three abstraction levels: explicit graphs, label vectors, and label
//! multisets.
//!
//! A process is a finite automaton whose rules either broadcast a message
//! or react to one. Configurations are labeled undirected graphs; a
//! broadcast relabels the sender and all of its current neighbors, and a
//! movement step replaces the edge set arbitrarily. The two quotients
//! ([`Labeling`] and [`LabelMultiset`]) drop the topology, which is sound
//! because movement can rebuild any edge set between broadcasts.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::ids::{MsgId, StateId, StateSet};

/// Reserved message backing `tau` rules. Receiving it never changes state.
pub const TAU_MESSAGE: &str = "m_tau";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("initial state set is empty")]
    EmptyInitialSet,
    #[error("`{0}` is reserved; tau rules provide it implicitly")]
    ReservedIdentifier(String),
    #[error("duplicate identifier `{0}`")]
    DuplicateIdentifier(String),
    #[error("configurations must have at least one node")]
    EmptyConfiguration,
    #[error("node {sender} cannot fire rule {rule}: not an enabled broadcast")]
    NotASender { sender: usize, rule: usize },
    #[error("invalid receiver choice for node {node}")]
    InvalidReceiverChoice { node: usize },
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("cardinality constraint sums to zero")]
    ZeroTotalCardinality,
}

/// Raw, name-based process description prior to interning.
///
/// Produced by the DSL parser and by the reduction generators; turned into
/// a [`Process`] by [`normalize`].
#[derive(Debug, Clone, Default)]
pub struct ProcessDecl {
    pub name: String,
    pub states: Vec<String>,
    pub init: Vec<String>,
    pub alphabet: Vec<String>,
    pub rules: Vec<RuleDecl>,
}

#[derive(Debug, Clone)]
pub struct RuleDecl {
    pub source: String,
    pub action: ActionDecl,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionDecl {
    Broadcast(String),
    Receive(String),
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Broadcast(MsgId),
    Receive(MsgId),
}

impl Action {
    pub fn message(self) -> MsgId {
        match self {
            Action::Broadcast(a) | Action::Receive(a) => a,
        }
    }

    pub fn is_broadcast(self) -> bool {
        matches!(self, Action::Broadcast(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rule {
    pub source: StateId,
    pub action: Action,
    pub target: StateId,
}

/// A normalized process: interned identifiers, desugared tau rules, and a
/// total receiver table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    name: String,
    states: Vec<String>,
    alphabet: Vec<String>,
    tau_msg: Option<MsgId>,
    rules: Vec<Rule>,
    initial: StateSet,
    // (q * |alphabet| + a) -> sorted receive targets, never empty
    receivers: Vec<Vec<StateId>>,
}

/// Interns identifiers, desugars `tau` into broadcasts of [`TAU_MESSAGE`],
/// and materializes the implicit receive self-loops in the receiver table.
///
/// Implicit self-loops are not added to the rule set itself, so a printed
/// process round-trips through the DSL unchanged.
pub fn normalize(decl: &ProcessDecl) -> Result<Process, ModelError> {
    let mut state_ids: HashMap<&str, StateId> = HashMap::new();
    for (i, s) in decl.states.iter().enumerate() {
        if state_ids.insert(s, StateId::new(i)).is_some() {
            return Err(ModelError::DuplicateIdentifier(s.clone()));
        }
    }
    let mut msg_ids: HashMap<&str, MsgId> = HashMap::new();
    for (i, a) in decl.alphabet.iter().enumerate() {
        if a == TAU_MESSAGE {
            return Err(ModelError::ReservedIdentifier(a.clone()));
        }
        if msg_ids.insert(a, MsgId::new(i)).is_some() {
            return Err(ModelError::DuplicateIdentifier(a.clone()));
        }
    }

    let lookup_state = |name: &str| -> Result<StateId, ModelError> {
        state_ids
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownIdentifier(name.to_string()))
    };

    let mut alphabet = decl.alphabet.clone();
    let has_tau = decl.rules.iter().any(|r| r.action == ActionDecl::Tau);
    let tau_msg = if has_tau {
        let id = MsgId::new(alphabet.len());
        alphabet.push(TAU_MESSAGE.to_string());
        Some(id)
    } else {
        None
    };

    let mut rules: Vec<Rule> = Vec::with_capacity(decl.rules.len());
    for r in &decl.rules {
        let source = lookup_state(&r.source)?;
        let target = lookup_state(&r.target)?;
        let action = match &r.action {
            ActionDecl::Tau => Action::Broadcast(tau_msg.expect("tau message interned")),
            ActionDecl::Broadcast(m) | ActionDecl::Receive(m) => {
                if m == TAU_MESSAGE {
                    return Err(ModelError::ReservedIdentifier(m.clone()));
                }
                let id = msg_ids
                    .get(m.as_str())
                    .copied()
                    .ok_or_else(|| ModelError::UnknownIdentifier(m.clone()))?;
                match r.action {
                    ActionDecl::Broadcast(_) => Action::Broadcast(id),
                    _ => Action::Receive(id),
                }
            }
        };
        let rule = Rule { source, action, target };
        if !rules.contains(&rule) {
            rules.push(rule);
        }
    }

    let mut initial = StateSet::empty(decl.states.len());
    for s in &decl.init {
        initial.insert(lookup_state(s)?);
    }
    if initial.is_empty() {
        return Err(ModelError::EmptyInitialSet);
    }

    // Receiver table: explicit targets where declared, self-loop otherwise.
    let nq = decl.states.len();
    let na = alphabet.len();
    let mut receivers: Vec<Vec<StateId>> = vec![Vec::new(); nq * na];
    for rule in &rules {
        if let Action::Receive(a) = rule.action {
            let slot = &mut receivers[rule.source.index() * na + a.index()];
            if !slot.contains(&rule.target) {
                slot.push(rule.target);
            }
        }
    }
    for q in 0..nq {
        for a in 0..na {
            let slot = &mut receivers[q * na + a];
            if slot.is_empty() {
                slot.push(StateId::new(q));
            } else {
                slot.sort();
            }
        }
    }

    Ok(Process {
        name: decl.name.clone(),
        states: decl.states.clone(),
        alphabet,
        tau_msg,
        rules,
        initial,
        receivers,
    })
}

impl Process {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q.index()]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states
            .iter()
            .position(|s| s == name)
            .map(StateId::new)
    }

    /// Full alphabet, including the reserved tau message when present.
    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    /// Messages declared by the user, i.e. without the tau message.
    pub fn user_alphabet(&self) -> &[String] {
        match self.tau_msg {
            Some(id) => &self.alphabet[..id.index()],
            None => &self.alphabet,
        }
    }

    pub fn msg_name(&self, a: MsgId) -> &str {
        &self.alphabet[a.index()]
    }

    pub fn msg_id(&self, name: &str) -> Option<MsgId> {
        self.alphabet
            .iter()
            .position(|m| m == name)
            .map(MsgId::new)
    }

    pub fn tau_msg(&self) -> Option<MsgId> {
        self.tau_msg
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn initial(&self) -> &StateSet {
        &self.initial
    }

    pub fn broadcast_rules(&self) -> impl Iterator<Item = (usize, &Rule)> {
        self.rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.action.is_broadcast())
    }

    pub fn receive_rules(&self) -> impl Iterator<Item = (usize, &Rule)> {
        self.rules
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.action.is_broadcast())
    }

    /// States reachable from `q` when receiving `a`. Non-empty by
    /// construction: without explicit receive rules this is `{q}`.
    pub fn receivers(&self, q: StateId, a: MsgId) -> &[StateId] {
        &self.receivers[q.index() * self.alphabet.len() + a.index()]
    }

    /// Rule rendered in DSL syntax, e.g. `q0 --!!a--> q1`.
    pub fn rule_display(&self, rule_index: usize) -> String {
        let r = &self.rules[rule_index];
        let action = match r.action {
            Action::Broadcast(a) if Some(a) == self.tau_msg => "tau".to_string(),
            Action::Broadcast(a) => format!("!!{}", self.msg_name(a)),
            Action::Receive(a) => format!("??{}", self.msg_name(a)),
        };
        format!(
            "{} --{}--> {}",
            self.state_name(r.source),
            action,
            self.state_name(r.target)
        )
    }

    pub fn empty_set(&self) -> StateSet {
        StateSet::empty(self.state_count())
    }
}

/// A network configuration: a labeled undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    labels: Vec<StateId>,
    edges: BTreeSet<(usize, usize)>,
}

fn canonical_edge(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Configuration {
    pub fn new(
        labels: Vec<StateId>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ModelError> {
        if labels.is_empty() {
            return Err(ModelError::EmptyConfiguration);
        }
        let n = labels.len();
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v || u >= n || v >= n {
                return Err(ModelError::InvalidEdge(u, v));
            }
            set.insert(canonical_edge(u, v));
        }
        Ok(Configuration { labels, edges: set })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[StateId] {
        &self.labels
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn present_states(&self, p: &Process) -> StateSet {
        StateSet::from_iter(p.state_count(), self.labels.iter().copied())
    }
}

/// One broadcast transition: the sender fires `rule` and every current
/// neighbor simultaneously takes one of its receive targets, fixed by
/// `choice`. Edges are unchanged; the node count never changes.
pub fn broadcast_step(
    p: &Process,
    c: &Configuration,
    sender: usize,
    rule_index: usize,
    choice: &BTreeMap<usize, StateId>,
) -> Result<Configuration, ModelError> {
    let rule = &p.rules()[rule_index];
    let msg = match rule.action {
        Action::Broadcast(a) => a,
        Action::Receive(_) => {
            return Err(ModelError::NotASender { sender, rule: rule_index });
        }
    };
    if sender >= c.node_count() || c.labels[sender] != rule.source {
        return Err(ModelError::NotASender { sender, rule: rule_index });
    }

    let neighbors = c.neighbors(sender);
    if choice.len() != neighbors.len() {
        // either a neighbor is missing or a non-adjacent node is named
        let node = choice
            .keys()
            .find(|u| !neighbors.contains(u))
            .copied()
            .or_else(|| neighbors.iter().find(|u| !choice.contains_key(u)).copied())
            .unwrap_or(sender);
        return Err(ModelError::InvalidReceiverChoice { node });
    }

    let mut labels = c.labels.clone();
    labels[sender] = rule.target;
    for (&u, &q) in choice {
        if !neighbors.contains(&u) {
            return Err(ModelError::InvalidReceiverChoice { node: u });
        }
        if !p.receivers(c.labels[u], msg).contains(&q) {
            return Err(ModelError::InvalidReceiverChoice { node: u });
        }
        labels[u] = q;
    }

    Ok(Configuration {
        labels,
        edges: c.edges.clone(),
    })
}

/// One movement transition: labels stay, the edge set is replaced.
pub fn movement_step(
    c: &Configuration,
    new_edges: &[(usize, usize)],
) -> Result<Configuration, ModelError> {
    let n = c.node_count();
    let mut set = BTreeSet::new();
    for &(u, v) in new_edges {
        if u == v || u >= n || v >= n {
            return Err(ModelError::InvalidEdge(u, v));
        }
        set.insert(canonical_edge(u, v));
    }
    Ok(Configuration {
        labels: c.labels.clone(),
        edges: set,
    })
}

/// A configuration with the edge set abstracted away.
pub type Labeling = Vec<StateId>;

/// All labelings reachable by one movement-then-broadcast round: pick a
/// sender with a broadcast rule, pick any subset of the other nodes as its
/// neighbors, and let each picked node take any receive target.
///
/// Equivalently, each non-sender node independently keeps its label or
/// moves to a receive target, since movement chooses the neighbor set.
pub fn labeling_successors(p: &Process, l: &Labeling) -> BTreeSet<Labeling> {
    assert!(!l.is_empty(), "labelings are non-empty");
    let mut out = BTreeSet::new();
    for sender in 0..l.len() {
        for (_, rule) in p.broadcast_rules() {
            if rule.source != l[sender] {
                continue;
            }
            let msg = rule.action.message();
            let options: Vec<Vec<StateId>> = l
                .iter()
                .enumerate()
                .map(|(u, &q)| {
                    if u == sender {
                        vec![rule.target]
                    } else {
                        let mut opts = vec![q];
                        for &t in p.receivers(q, msg) {
                            if !opts.contains(&t) {
                                opts.push(t);
                            }
                        }
                        opts.sort();
                        opts
                    }
                })
                .collect();
            let mut current = vec![StateId::new(0); l.len()];
            product_labelings(&options, 0, &mut current, &mut out);
        }
    }
    out
}

fn product_labelings(
    options: &[Vec<StateId>],
    idx: usize,
    current: &mut Vec<StateId>,
    out: &mut BTreeSet<Labeling>,
) {
    if idx == options.len() {
        out.insert(current.clone());
        return;
    }
    for &q in &options[idx] {
        current[idx] = q;
        product_labelings(options, idx + 1, current, out);
    }
}

/// Occurrence counts of control states; the counting quotient of a
/// configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelMultiset {
    counts: Vec<u32>,
}

impl LabelMultiset {
    pub fn zero(universe: usize) -> Self {
        LabelMultiset {
            counts: vec![0; universe],
        }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        LabelMultiset { counts }
    }

    pub fn from_labeling(universe: usize, l: &[StateId]) -> Self {
        let mut m = Self::zero(universe);
        for &q in l {
            m.counts[q.index()] += 1;
        }
        m
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, q: StateId) -> u32 {
        self.counts[q.index()]
    }

    pub fn set_count(&mut self, q: StateId, c: u32) {
        self.counts[q.index()] = c;
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn support(&self) -> StateSet {
        StateSet::from_iter(
            self.counts.len(),
            self.counts.iter().enumerate().filter_map(|(i, &c)| {
                if c > 0 {
                    Some(StateId::new(i))
                } else {
                    None
                }
            }),
        )
    }

    pub fn iter_nonzero(&self) -> impl Iterator<Item = (StateId, u32)> + '_ {
        self.counts.iter().enumerate().filter_map(|(i, &c)| {
            if c > 0 {
                Some((StateId::new(i), c))
            } else {
                None
            }
        })
    }
}

/// One resolved broadcast at the multiset level: the applied rule and the
/// receiver redistribution (only actual label changes are listed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultisetStep {
    pub rule: usize,
    pub moves: Vec<ReceiverMove>,
    pub result: LabelMultiset,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceiverMove {
    pub from: StateId,
    pub to: StateId,
    pub count: u32,
}

/// All one-step successors of `m`, computed directly on counts: pick an
/// enabled broadcast rule, move the sender, then redistribute any
/// sub-count of each remaining state over its receive targets.
pub fn multiset_successors(p: &Process, m: &LabelMultiset) -> BTreeSet<LabelMultiset> {
    multiset_successor_steps(p, m)
        .into_iter()
        .map(|s| s.result)
        .collect()
}

/// Like [`multiset_successors`], but keeps the applied rule and receiver
/// distribution per successor. Distinct distributions may repeat a result.
pub fn multiset_successor_steps(p: &Process, m: &LabelMultiset) -> Vec<MultisetStep> {
    assert!(m.total() >= 1, "multisets are non-empty");
    let mut out = Vec::new();
    for (ri, rule) in p.broadcast_rules() {
        if m.count(rule.source) == 0 {
            continue;
        }
        let msg = rule.action.message();
        let mut base = m.clone();
        base.set_count(rule.source, base.count(rule.source) - 1);

        // Per state: how many nodes leave for each proper receive target.
        let sources: Vec<(StateId, u32, Vec<StateId>)> = base
            .iter_nonzero()
            .map(|(q, c)| {
                let targets: Vec<StateId> = p
                    .receivers(q, msg)
                    .iter()
                    .copied()
                    .filter(|&t| t != q)
                    .collect();
                (q, c, targets)
            })
            .collect();

        let mut moves: Vec<ReceiverMove> = Vec::new();
        distribute(p, &base, &sources, 0, &mut moves, rule.target, ri, &mut out);
    }
    out
}

fn distribute(
    p: &Process,
    base: &LabelMultiset,
    sources: &[(StateId, u32, Vec<StateId>)],
    idx: usize,
    moves: &mut Vec<ReceiverMove>,
    sender_target: StateId,
    rule_index: usize,
    out: &mut Vec<MultisetStep>,
) {
    if idx == sources.len() {
        let mut result = base.clone();
        for mv in moves.iter() {
            result.set_count(mv.from, result.count(mv.from) - mv.count);
            result.set_count(mv.to, result.count(mv.to) + mv.count);
        }
        result.set_count(sender_target, result.count(sender_target) + 1);
        out.push(MultisetStep {
            rule: rule_index,
            moves: moves.clone(),
            result,
        });
        return;
    }
    let (q, c, ref targets) = sources[idx];
    if targets.is_empty() {
        distribute(p, base, sources, idx + 1, moves, sender_target, rule_index, out);
        return;
    }
    let mut split = vec![0u32; targets.len()];
    distribute_state(
        p, base, sources, idx, q, targets, c, 0, &mut split, moves, sender_target, rule_index, out,
    );
}

#[allow(clippy::too_many_arguments)]
fn distribute_state(
    p: &Process,
    base: &LabelMultiset,
    sources: &[(StateId, u32, Vec<StateId>)],
    idx: usize,
    q: StateId,
    targets: &[StateId],
    remaining: u32,
    ti: usize,
    split: &mut Vec<u32>,
    moves: &mut Vec<ReceiverMove>,
    sender_target: StateId,
    rule_index: usize,
    out: &mut Vec<MultisetStep>,
) {
    if ti == targets.len() {
        let pushed = split.iter().filter(|&&k| k > 0).count();
        for (t, &k) in targets.iter().zip(split.iter()) {
            if k > 0 {
                moves.push(ReceiverMove { from: q, to: *t, count: k });
            }
        }
        distribute(p, base, sources, idx + 1, moves, sender_target, rule_index, out);
        moves.truncate(moves.len() - pushed);
        return;
    }
    for k in 0..=remaining {
        split[ti] = k;
        distribute_state(
            p,
            base,
            sources,
            idx,
            q,
            targets,
            remaining - k,
            ti + 1,
            split,
            moves,
            sender_target,
            rule_index,
            out,
        );
    }
    split[ti] = 0;
}

/// Presence constraints: boolean combinations of `#q >= 1` and `#q = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    AtLeastOne(StateId),
    Absent(StateId),
    And(Box<Constraint>, Box<Constraint>),
    Or(Box<Constraint>, Box<Constraint>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintClass {
    /// Only `#q >= 1` atoms occur.
    RqGeq1,
    /// At least one `#q = 0` atom occurs.
    Cc,
}

pub fn eval_constraint(phi: &Constraint, present: &StateSet) -> bool {
    match phi {
        Constraint::AtLeastOne(q) => present.contains(*q),
        Constraint::Absent(q) => !present.contains(*q),
        Constraint::And(a, b) => eval_constraint(a, present) && eval_constraint(b, present),
        Constraint::Or(a, b) => eval_constraint(a, present) || eval_constraint(b, present),
    }
}

pub fn classify_constraint(phi: &Constraint) -> ConstraintClass {
    fn has_absent(phi: &Constraint) -> bool {
        match phi {
            Constraint::AtLeastOne(_) => false,
            Constraint::Absent(_) => true,
            Constraint::And(a, b) | Constraint::Or(a, b) => has_absent(a) || has_absent(b),
        }
    }
    if has_absent(phi) {
        ConstraintClass::Cc
    } else {
        ConstraintClass::RqGeq1
    }
}

/// Exact occurrence counts for every control state; the query of the
/// cardinality reachability problem. The total fixes the network size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardinalityConstraint {
    counts: Vec<u32>,
}

impl CardinalityConstraint {
    pub fn new(counts: Vec<u32>) -> Result<Self, ModelError> {
        if counts.iter().all(|&c| c == 0) {
            return Err(ModelError::ZeroTotalCardinality);
        }
        Ok(CardinalityConstraint { counts })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, q: StateId) -> u32 {
        self.counts[q.index()]
    }

    /// Sum of all counts; the implied network size K.
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

pub fn eval_card(card: &CardinalityConstraint, m: &LabelMultiset) -> bool {
    card.counts() == m.counts()
}

/// All ways to split `total` into `parts` ordered non-negative summands.
pub(crate) fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(total: u32, parts: usize, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            acc.push(total);
            out.push(acc.clone());
            acc.pop();
            return;
        }
        for k in 0..=total {
            acc.push(k);
            rec(total - k, parts - 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        return out;
    }
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}


#[cfg(test)]
mod tests {
    use super::fixtures::{ids, multiset, p1};
    use super::*;

    fn decl(states: &[&str], init: &[&str], alphabet: &[&str]) -> ProcessDecl {
        ProcessDecl {
            name: "t".into(),
            states: states.iter().map(|s| s.to_string()).collect(),
            init: init.iter().map(|s| s.to_string()).collect(),
            alphabet: alphabet.iter().map(|s| s.to_string()).collect(),
            rules: vec![],
        }
    }

    #[test]
    fn normalize_gives_selfloop_receivers_without_rules() {
        let mut d = decl(&["q0"], &["q0"], &["a", "b"]);
        d.rules = vec![];
        let p = normalize(&d).unwrap();
        let q0 = p.state_id("q0").unwrap();
        for a in 0..p.alphabet().len() {
            assert_eq!(p.receivers(q0, MsgId::new(a)), &[q0]);
        }
    }

    #[test]
    fn normalize_desugars_tau_to_reserved_broadcast() {
        let mut d = decl(&["q0", "q1"], &["q0"], &[]);
        d.rules = vec![RuleDecl {
            source: "q0".into(),
            action: ActionDecl::Tau,
            target: "q1".into(),
        }];
        let p = normalize(&d).unwrap();
        let tau = p.tau_msg().unwrap();
        assert_eq!(p.msg_name(tau), TAU_MESSAGE);
        assert_eq!(p.rules().len(), 1);
        assert_eq!(p.rules()[0].action, Action::Broadcast(tau));
        // receptions of the tau message never change state
        for q in 0..p.state_count() {
            assert_eq!(p.receivers(StateId::new(q), tau), &[StateId::new(q)]);
        }
    }

    #[test]
    fn explicit_receive_rules_suppress_the_implicit_selfloop() {
        let mut d = decl(&["q0", "q1", "q2"], &["q0"], &["a"]);
        d.rules = vec![
            RuleDecl {
                source: "q0".into(),
                action: ActionDecl::Receive("a".into()),
                target: "q1".into(),
            },
            RuleDecl {
                source: "q0".into(),
                action: ActionDecl::Receive("a".into()),
                target: "q2".into(),
            },
        ];
        let p = normalize(&d).unwrap();
        let q0 = p.state_id("q0").unwrap();
        let a = p.msg_id("a").unwrap();
        assert_eq!(
            p.receivers(q0, a),
            &[p.state_id("q1").unwrap(), p.state_id("q2").unwrap()]
        );
    }

    #[test]
    fn normalize_rejects_bad_declarations() {
        let mut d = decl(&["q0"], &["q0"], &["a"]);
        d.rules = vec![RuleDecl {
            source: "q0".into(),
            action: ActionDecl::Broadcast("b".into()),
            target: "q0".into(),
        }];
        assert!(matches!(
            normalize(&d),
            Err(ModelError::UnknownIdentifier(m)) if m == "b"
        ));

        let d = decl(&["q0"], &[], &[]);
        assert_eq!(normalize(&d), Err(ModelError::EmptyInitialSet));

        let d = decl(&["q0"], &["q0"], &["m_tau"]);
        assert!(matches!(normalize(&d), Err(ModelError::ReservedIdentifier(_))));

        let d = decl(&["q0", "q0"], &["q0"], &[]);
        assert!(matches!(normalize(&d), Err(ModelError::DuplicateIdentifier(_))));
    }

    #[test]
    fn receivers_on_p1() {
        let p = p1();
        let a = p.msg_id("a").unwrap();
        assert_eq!(p.receivers(p.state_id("q0").unwrap(), a), &[p.state_id("q2").unwrap()]);
        assert_eq!(p.receivers(p.state_id("q1").unwrap(), a), &[p.state_id("q1").unwrap()]);
    }

    #[test]
    fn broadcast_step_relabels_sender_and_neighbors() {
        let p = p1();
        let q0 = p.state_id("q0").unwrap();
        let q1 = p.state_id("q1").unwrap();
        let q2 = p.state_id("q2").unwrap();
        let c = Configuration::new(vec![q0, q0], [(0, 1)]).unwrap();
        let choice = BTreeMap::from([(1usize, q2)]);
        let c2 = broadcast_step(&p, &c, 0, 0, &choice).unwrap();
        assert_eq!(c2.labels(), &[q1, q2]);
        assert_eq!(c2.edges(), c.edges());
        assert_eq!(c2.node_count(), c.node_count());
    }

    #[test]
    fn broadcast_step_without_neighbors_only_moves_the_sender() {
        let p = p1();
        let q0 = p.state_id("q0").unwrap();
        let q1 = p.state_id("q1").unwrap();
        let c = Configuration::new(vec![q0, q0], []).unwrap();
        let c2 = broadcast_step(&p, &c, 0, 0, &BTreeMap::new()).unwrap();
        assert_eq!(c2.labels(), &[q1, q0]);
    }

    #[test]
    fn broadcast_step_rejects_bad_choices() {
        let p = p1();
        let q0 = p.state_id("q0").unwrap();
        let q2 = p.state_id("q2").unwrap();
        let c = Configuration::new(vec![q0, q0, q0], [(0, 1)]).unwrap();
        // node 2 is not adjacent to the sender
        let choice = BTreeMap::from([(1usize, q2), (2usize, q2)]);
        assert!(matches!(
            broadcast_step(&p, &c, 0, 0, &choice),
            Err(ModelError::InvalidReceiverChoice { node: 2 })
        ));
        // node 1 cannot move to q1 on reception
        let q1 = p.state_id("q1").unwrap();
        let choice = BTreeMap::from([(1usize, q1)]);
        assert!(matches!(
            broadcast_step(&p, &c, 0, 0, &choice),
            Err(ModelError::InvalidReceiverChoice { node: 1 })
        ));
        // wrong source state
        let c = Configuration::new(vec![q2, q0], []).unwrap();
        assert!(matches!(
            broadcast_step(&p, &c, 0, 0, &BTreeMap::new()),
            Err(ModelError::NotASender { sender: 0, .. })
        ));
    }

    #[test]
    fn movement_step_replaces_edges_and_keeps_labels() {
        let p = p1();
        let q0 = p.state_id("q0").unwrap();
        let c = Configuration::new(vec![q0, q0, q0], [(0, 1)]).unwrap();

        let moved = movement_step(&c, &[]).unwrap();
        assert!(moved.edges().is_empty());
        assert_eq!(moved.labels(), c.labels());

        let all = movement_step(&c, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        assert_eq!(all.edges().len(), 3);

        let single = movement_step(&c, &[(2, 0)]).unwrap();
        assert_eq!(single.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 2)]);

        assert!(matches!(
            movement_step(&c, &[(0, 3)]),
            Err(ModelError::InvalidEdge(0, 3))
        ));
        assert!(matches!(
            movement_step(&c, &[(1, 1)]),
            Err(ModelError::InvalidEdge(1, 1))
        ));
    }

    #[test]
    fn labeling_successors_on_p1_pair() {
        let p = p1();
        let q0 = p.state_id("q0").unwrap();
        let q1 = p.state_id("q1").unwrap();
        let q2 = p.state_id("q2").unwrap();
        let succs = labeling_successors(&p, &vec![q0, q0]);
        let expect: BTreeSet<Labeling> = [
            vec![q1, q0],
            vec![q0, q1],
            vec![q1, q2],
            vec![q2, q1],
        ]
        .into_iter()
        .collect();
        assert_eq!(succs, expect);
    }

    #[test]
    fn labeling_successors_empty_without_enabled_broadcast() {
        let p = p1();
        let q1 = p.state_id("q1").unwrap();
        let q2 = p.state_id("q2").unwrap();
        assert!(labeling_successors(&p, &vec![q1, q2]).is_empty());

        let no_rules = normalize(&ProcessDecl {
            name: "n".into(),
            states: vec!["s".into()],
            init: vec!["s".into()],
            alphabet: vec![],
            rules: vec![],
        })
        .unwrap();
        let s = no_rules.state_id("s").unwrap();
        assert!(labeling_successors(&no_rules, &vec![s, s]).is_empty());
    }

    #[test]
    fn multiset_successors_on_p1() {
        let p = p1();
        let succs = multiset_successors(&p, &multiset(&p, &[("q0", 2)]));
        let expect: BTreeSet<LabelMultiset> = [
            multiset(&p, &[("q0", 1), ("q1", 1)]),
            multiset(&p, &[("q1", 1), ("q2", 1)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(succs, expect);

        assert!(multiset_successors(&p, &multiset(&p, &[("q1", 1), ("q2", 1)])).is_empty());
    }

    #[test]
    fn eval_constraint_examples() {
        let p = p1();
        let q0 = p.state_id("q0").unwrap();
        let q2 = p.state_id("q2").unwrap();
        let phi = Constraint::AtLeastOne(q0);
        assert!(eval_constraint(&phi, &ids(&p, &["q0", "q1"])));

        let phi = Constraint::And(
            Box::new(Constraint::Absent(q0)),
            Box::new(Constraint::AtLeastOne(q2)),
        );
        assert!(eval_constraint(&phi, &ids(&p, &["q1", "q2"])));
        assert!(!eval_constraint(&phi, &ids(&p, &["q0", "q2"])));
    }

    #[test]
    fn eval_card_examples() {
        let p = p1();
        let card = CardinalityConstraint::new(
            multiset(&p, &[("q1", 1), ("q2", 1)]).counts().to_vec(),
        )
        .unwrap();
        assert!(eval_card(&card, &multiset(&p, &[("q1", 1), ("q2", 1)])));
        assert!(!eval_card(&card, &multiset(&p, &[("q0", 2)])));

        let card = CardinalityConstraint::new(multiset(&p, &[("q0", 2)]).counts().to_vec()).unwrap();
        assert!(eval_card(&card, &multiset(&p, &[("q0", 2)])));

        assert_eq!(
            CardinalityConstraint::new(vec![0, 0, 0]),
            Err(ModelError::ZeroTotalCardinality)
        );
    }

    #[test]
    fn classify_examples() {
        let p = p1();
        let q0 = p.state_id("q0").unwrap();
        let q1 = p.state_id("q1").unwrap();
        let q2 = p.state_id("q2").unwrap();
        assert_eq!(
            classify_constraint(&Constraint::AtLeastOne(q0)),
            ConstraintClass::RqGeq1
        );
        assert_eq!(
            classify_constraint(&Constraint::And(
                Box::new(Constraint::Absent(q0)),
                Box::new(Constraint::AtLeastOne(q2)),
            )),
            ConstraintClass::Cc
        );
        assert_eq!(
            classify_constraint(&Constraint::And(
                Box::new(Constraint::Or(
                    Box::new(Constraint::AtLeastOne(q0)),
                    Box::new(Constraint::AtLeastOne(q1)),
                )),
                Box::new(Constraint::AtLeastOne(q2)),
            )),
            ConstraintClass::RqGeq1
        );
    }

    #[test]
    fn quotient_of_labeling_successors_matches_multiset_successors() {
        let p = p1();
        let q0 = p.state_id("q0").unwrap();
        let q1 = p.state_id("q1").unwrap();
        for l in [vec![q0, q0], vec![q0, q1], vec![q0, q0, q1]] {
            let via_labelings: BTreeSet<LabelMultiset> = labeling_successors(&p, &l)
                .iter()
                .map(|s| LabelMultiset::from_labeling(p.state_count(), s))
                .collect();
            let m = LabelMultiset::from_labeling(p.state_count(), &l);
            assert_eq!(via_labelings, multiset_successors(&p, &m));
        }
    }
}
