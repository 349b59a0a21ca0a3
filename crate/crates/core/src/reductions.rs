//! Constructive encodings of SAT, circuit evaluation, and 1-safe Petri
//! net reachability into the reachability problems, plus the explicit
//! Petri net reachability checker used as their independent oracle.
//!
//! The generators double as instance factories for the CLI and as
//! end-to-end correctness tests: each encoding's answer must match a
//! direct decision procedure on the source object (truth table, circuit
//! evaluation, marking exploration).

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::lang::{Circuit, CnfFormula, GateOp, PetriNet};
use crate::model::{
    normalize, ActionDecl, CardinalityConstraint, Constraint, Process, ProcessDecl, RuleDecl,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("net is not 1-safe: firing `{transition}` would put a second token in `{place}`")]
    NotOneSafe { transition: String, place: String },
}

/// The query generated alongside an encoded process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Constraint(Constraint),
    Card(CardinalityConstraint),
}

/// A generated process, its query, and the mapping from source objects to
/// the generated state names.
#[derive(Debug, Clone)]
pub struct ReductionOutput {
    pub process: Process,
    pub query: Query,
    pub name_map: BTreeMap<String, String>,
}

/// Encodes CNF satisfiability: one node guesses a valuation per variable
/// by silently moving to a literal state; the constraint checks the
/// clauses and forbids contradictory literals.
pub fn sat_to_prp(f: &CnfFormula) -> ReductionOutput {
    let k = f.variable_count;
    let mut decl = ProcessDecl {
        name: "sat".into(),
        states: vec!["q0".into()],
        init: vec!["q0".into()],
        alphabet: vec![],
        rules: vec![],
    };
    let mut name_map = BTreeMap::new();
    let pos = |i: usize| format!("v__{i}");
    let neg = |i: usize| format!("nv__{i}");
    for i in 1..=k {
        decl.states.push(pos(i));
        decl.states.push(neg(i));
        name_map.insert(format!("{i}"), pos(i));
        name_map.insert(format!("-{i}"), neg(i));
        for target in [pos(i), neg(i)] {
            decl.rules.push(RuleDecl {
                source: "q0".into(),
                action: ActionDecl::Tau,
                target,
            });
        }
    }
    let process = normalize(&decl).expect("generated SAT process is well-formed");

    let lit_state = |lit: i32| {
        let name = if lit > 0 { pos(lit as usize) } else { neg(-lit as usize) };
        process.state_id(&name).expect("literal state interned")
    };
    let clause_constraints: Vec<Constraint> = f
        .clauses
        .iter()
        .map(|clause| {
            or_all(
                clause
                    .iter()
                    .map(|&lit| Constraint::AtLeastOne(lit_state(lit)))
                    .collect(),
            )
        })
        .collect();
    let phi = and_all(clause_constraints);
    let psi = and_all(
        (1..=k)
            .map(|i| {
                let v = lit_state(i as i32);
                let nv = lit_state(-(i as i32));
                Constraint::Or(
                    Box::new(Constraint::And(
                        Box::new(Constraint::AtLeastOne(v)),
                        Box::new(Constraint::Absent(nv)),
                    )),
                    Box::new(Constraint::And(
                        Box::new(Constraint::Absent(v)),
                        Box::new(Constraint::AtLeastOne(nv)),
                    )),
                )
            })
            .collect(),
    );
    let query = Constraint::And(Box::new(phi), Box::new(psi));

    ReductionOutput {
        process,
        query: Query::Constraint(query),
        name_map,
    }
}

fn and_all(mut parts: Vec<Constraint>) -> Constraint {
    let first = parts.remove(0);
    parts
        .into_iter()
        .fold(first, |acc, c| Constraint::And(Box::new(acc), Box::new(c)))
}

fn or_all(mut parts: Vec<Constraint>) -> Constraint {
    let first = parts.remove(0);
    parts
        .into_iter()
        .fold(first, |acc, c| Constraint::Or(Box::new(acc), Box::new(c)))
}

/// Evaluates the circuit under its fixed input assignment.
pub fn eval_circuit(c: &Circuit) -> bool {
    let mut values: HashMap<&str, bool> = c
        .inputs
        .iter()
        .map(|(name, b)| (name.as_str(), *b))
        .collect();
    for gate in &c.gates {
        let v = match gate.op {
            GateOp::Not => !values[c_input(gate, 0)],
            GateOp::And => values[c_input(gate, 0)] && values[c_input(gate, 1)],
            GateOp::Or => values[c_input(gate, 0)] || values[c_input(gate, 1)],
        };
        values.insert(gate.output.as_str(), v);
    }
    values[c.output.as_str()]
}

fn c_input(gate: &crate::lang::Gate, i: usize) -> &str {
    gate.inputs[i].as_str()
}

fn wire_msg(wire: &str, value: bool) -> String {
    format!("{wire}__{}", if value { "t" } else { "f" })
}

/// Encodes circuit evaluation as presence reachability of an accepting
/// state. Init nodes broadcast the fixed input values; each gate node
/// waits for its two input values in either order (one diamond per value
/// pair), then repeatedly broadcasts the resulting output value; hearing
/// the expected output value sends an init node to `ok`.
pub fn cvp_to_prp(c: &Circuit) -> ReductionOutput {
    let mut decl = ProcessDecl {
        name: "cvp".into(),
        states: vec!["q0".into(), "ok".into()],
        init: vec!["q0".into()],
        alphabet: vec![],
        rules: vec![],
    };
    let mut name_map = BTreeMap::new();
    name_map.insert("init".into(), "q0".into());
    name_map.insert("accept".into(), "ok".into());

    let mut alphabet: Vec<String> = Vec::new();
    let mut declare_msg = |alphabet: &mut Vec<String>, m: String| -> String {
        if !alphabet.contains(&m) {
            alphabet.push(m.clone());
        }
        m
    };

    for (input, value) in &c.inputs {
        let m = declare_msg(&mut alphabet, wire_msg(input, *value));
        decl.rules.push(RuleDecl {
            source: "q0".into(),
            action: ActionDecl::Broadcast(m),
            target: "q0".into(),
        });
    }
    let expect_msg = declare_msg(&mut alphabet, wire_msg(&c.output, c.expected));
    decl.rules.push(RuleDecl {
        source: "q0".into(),
        action: ActionDecl::Receive(expect_msg),
        target: "ok".into(),
    });

    for gate in &c.gates {
        let g = format!("g__{}", gate.output);
        decl.states.push(g.clone());
        decl.init.push(g.clone());
        name_map.insert(format!("gate {}", gate.output), g.clone());
        match gate.op {
            GateOp::Not => {
                for assignment in [false, true] {
                    let tag = if assignment { "t" } else { "f" };
                    let done = format!("g__{}__{tag}__f", gate.output);
                    decl.states.push(done.clone());
                    let m_in = declare_msg(&mut alphabet, wire_msg(&gate.inputs[0], assignment));
                    let m_out = declare_msg(&mut alphabet, wire_msg(&gate.output, !assignment));
                    decl.rules.push(RuleDecl {
                        source: g.clone(),
                        action: ActionDecl::Receive(m_in),
                        target: done.clone(),
                    });
                    decl.rules.push(RuleDecl {
                        source: done.clone(),
                        action: ActionDecl::Broadcast(m_out),
                        target: done,
                    });
                }
            }
            GateOp::And | GateOp::Or => {
                for (b1, b2) in [(false, false), (false, true), (true, false), (true, true)] {
                    let tag = format!(
                        "{}{}",
                        if b1 { "t" } else { "f" },
                        if b2 { "t" } else { "f" }
                    );
                    let got_second = format!("g__{}__{tag}__1", gate.output);
                    let got_first = format!("g__{}__{tag}__2", gate.output);
                    let done = format!("g__{}__{tag}__f", gate.output);
                    decl.states.push(got_second.clone());
                    decl.states.push(got_first.clone());
                    decl.states.push(done.clone());
                    let m1 = declare_msg(&mut alphabet, wire_msg(&gate.inputs[0], b1));
                    let m2 = declare_msg(&mut alphabet, wire_msg(&gate.inputs[1], b2));
                    let value = match gate.op {
                        GateOp::And => b1 && b2,
                        _ => b1 || b2,
                    };
                    let m_out = declare_msg(&mut alphabet, wire_msg(&gate.output, value));
                    decl.rules.push(RuleDecl {
                        source: g.clone(),
                        action: ActionDecl::Receive(m1.clone()),
                        target: got_first.clone(),
                    });
                    decl.rules.push(RuleDecl {
                        source: got_first.clone(),
                        action: ActionDecl::Receive(m2.clone()),
                        target: done.clone(),
                    });
                    decl.rules.push(RuleDecl {
                        source: g.clone(),
                        action: ActionDecl::Receive(m2),
                        target: got_second.clone(),
                    });
                    decl.rules.push(RuleDecl {
                        source: got_second.clone(),
                        action: ActionDecl::Receive(m1),
                        target: done.clone(),
                    });
                    decl.rules.push(RuleDecl {
                        source: done.clone(),
                        action: ActionDecl::Broadcast(m_out),
                        target: done,
                    });
                }
            }
        }
    }
    decl.alphabet = alphabet;
    let process = normalize(&decl).expect("generated circuit process is well-formed");
    let ok = process.state_id("ok").expect("accept state interned");

    ReductionOutput {
        process,
        query: Query::Constraint(Constraint::AtLeastOne(ok)),
        name_map,
    }
}

/// Explicit reachable markings of a Petri net, failing if any firing
/// would put a second token in a place. Markings are place-index sets
/// packed into a word.
pub fn petri_reachable_markings(net: &PetriNet) -> Result<Vec<u64>, ReductionError> {
    assert!(net.places.len() <= 63, "marking words hold at most 63 places");
    let trans: Vec<(usize, u64, u64)> = net
        .transitions
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let pre = t.pre.iter().fold(0u64, |m, &p| m | (1 << p));
            let post = t.post.iter().fold(0u64, |m, &p| m | (1 << p));
            (ti, pre, post)
        })
        .collect();
    let m0 = net.m0.iter().fold(0u64, |m, &p| m | (1 << p));

    let mut seen: HashSet<u64> = HashSet::from([m0]);
    let mut order: Vec<u64> = vec![m0];
    let mut queue: VecDeque<u64> = VecDeque::from([m0]);
    while let Some(m) = queue.pop_front() {
        for &(ti, pre, post) in &trans {
            if m & pre != pre {
                continue;
            }
            let removed = m & !pre;
            if removed & post != 0 {
                let place = (removed & post).trailing_zeros() as usize;
                return Err(ReductionError::NotOneSafe {
                    transition: net.transitions[ti].name.clone(),
                    place: net.places[place].clone(),
                });
            }
            let succ = removed | post;
            if seen.insert(succ) {
                order.push(succ);
                queue.push_back(succ);
            }
        }
    }
    Ok(order)
}

/// Marking reachability by explicit exploration; the independent oracle
/// for the Petri net encoding.
pub fn petri_reach(net: &PetriNet, target: &[usize]) -> Result<bool, ReductionError> {
    let goal = target.iter().fold(0u64, |m, &p| m | (1 << p));
    Ok(petri_reachable_markings(net)?.contains(&goal))
}

/// Encodes 1-safe Petri net reachability as cardinality reachability.
///
/// One controller node walks through a handshake per simulated firing:
/// it announces the removal of each pre-place token and the placement of
/// each post-place token, waiting for an acknowledgment after every
/// message. One node per place tracks its token. The cardinality
/// constraint pins the final marking and rules out every run in which
/// duplicated controllers or place nodes interfered.
pub fn petri_to_crp(net: &PetriNet) -> Result<ReductionOutput, ReductionError> {
    // 1-safety is a dynamic property; check it on the source net first.
    petri_reachable_markings(net)?;

    // The simulation wants a single initial token. Nets with zero initial
    // tokens need no help; anything else gets a fresh generator place.
    let mut sim = net.clone();
    let mut name_map = BTreeMap::new();
    let init_place: Option<usize> = match sim.m0.len() {
        0 => None,
        1 => Some(sim.m0[0]),
        _ => {
            let mut name = "geninit".to_string();
            let mut k = 0usize;
            while sim.places.contains(&name) {
                name = format!("geninit{k}");
                k += 1;
            }
            let idx = sim.places.len();
            sim.places.push(name.clone());
            sim.transitions.push(crate::lang::Transition {
                name: format!("{name}__gen"),
                pre: vec![idx],
                post: sim.m0.clone(),
            });
            sim.m0 = vec![idx];
            Some(idx)
        }
    };

    let mut decl = ProcessDecl {
        name: "petri".into(),
        states: vec!["ok".into()],
        init: vec!["ok".into()],
        alphabet: vec![],
        rules: vec![],
    };
    name_map.insert("controller".into(), "ok".into());

    let p1 = |p: usize| format!("{}__1", sim.places[p]);
    let p0 = |p: usize| format!("{}__0", sim.places[p]);
    for (pi, place) in sim.places.iter().enumerate() {
        decl.states.push(p1(pi));
        decl.states.push(p0(pi));
        name_map.insert(format!("place {place}"), p1(pi));
    }
    decl.init.push(match init_place {
        Some(p) => p1(p),
        None => p0(0),
    });
    for pi in 0..sim.places.len() {
        if init_place != Some(pi) {
            decl.init.push(p0(pi));
        }
    }
    // dedupe for the |m0|=0 case where p0(0) was pushed already
    decl.init.dedup();

    for (ti, t) in sim.transitions.iter().enumerate() {
        let mut pre = t.pre.clone();
        pre.sort();
        let mut post = t.post.clone();
        post.sort();
        if pre.is_empty() && post.is_empty() {
            continue; // firing would not change the marking
        }
        let entry = format!("ok__t{ti}");
        decl.states.push(entry.clone());
        name_map.insert(format!("trans {}", t.name), entry.clone());
        decl.rules.push(RuleDecl {
            source: "ok".into(),
            action: ActionDecl::Tau,
            target: entry.clone(),
        });

        // (phase, place): "a" removes pre tokens, "b" places post tokens
        let seq: Vec<(char, usize)> = pre
            .iter()
            .map(|&p| ('a', p))
            .chain(post.iter().map(|&p| ('b', p)))
            .collect();
        let mut prev = entry;
        for (si, &(phase, pi)) in seq.iter().enumerate() {
            let announce = format!("m{phase}__t{ti}__p{pi}");
            let ack = format!("m{phase}ack__t{ti}__p{pi}");
            let wait = format!("c{phase}__t{ti}__p{pi}");
            decl.states.push(wait.clone());
            decl.alphabet.push(announce.clone());
            decl.alphabet.push(ack.clone());
            decl.rules.push(RuleDecl {
                source: prev,
                action: ActionDecl::Broadcast(announce.clone()),
                target: wait.clone(),
            });
            let next = if si + 1 == seq.len() {
                "ok".to_string()
            } else {
                let got = format!("k{phase}__t{ti}__p{pi}");
                decl.states.push(got.clone());
                got
            };
            decl.rules.push(RuleDecl {
                source: wait,
                action: ActionDecl::Receive(ack.clone()),
                target: next.clone(),
            });
            prev = next;

            // the place-side handshake
            let aux = format!("x{phase}__t{ti}__p{pi}");
            decl.states.push(aux.clone());
            let (from, to) = if phase == 'a' {
                (p1(pi), p0(pi))
            } else {
                (p0(pi), p1(pi))
            };
            decl.rules.push(RuleDecl {
                source: from,
                action: ActionDecl::Receive(announce),
                target: aux.clone(),
            });
            decl.rules.push(RuleDecl {
                source: aux,
                action: ActionDecl::Broadcast(ack),
                target: to,
            });
        }
    }

    let process = normalize(&decl).expect("generated net process is well-formed");

    let mut counts = vec![0u32; process.state_count()];
    counts[process.state_id("ok").unwrap().index()] = 1;
    for pi in 0..sim.places.len() {
        let marked = net.m1.contains(&pi) && pi < net.places.len();
        let state = if marked { p1(pi) } else { p0(pi) };
        counts[process.state_id(&state).unwrap().index()] = 1;
    }
    let card = CardinalityConstraint::new(counts).expect("controller count is positive");

    Ok(ReductionOutput {
        process,
        query: Query::Card(card),
        name_map,
    })
}
