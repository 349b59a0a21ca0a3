//! Saturation of reachable control states and the polynomial decision
//! procedure for presence-only constraints.
//!
//! The computation works on sets of control states alone: movement makes
//! any topology reachable, and a state reached once can be replicated by
//! enlarging the initial configuration, so occurrence counts are
//! irrelevant for presence queries.

use thiserror::Error;

use crate::ids::{StateId, StateSet};
use crate::model::{classify_constraint, eval_constraint, Constraint, ConstraintClass, Process};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReachError {
    #[error("constraint contains absence atoms; use the full-constraint solver")]
    WrongConstraintClass,
}

/// Why a state entered the reachable set. Rules are indices into the
/// process rule table; justification sources are discovered earlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Justification {
    Initial,
    ByBroadcast { rule: usize },
    ByReception { broadcast: usize, receive: usize },
}

/// Result of the saturation: the reachable set, the number of outer
/// passes, and one justification per reachable state.
#[derive(Debug, Clone)]
pub struct ReachResult {
    pub reachable: StateSet,
    pub iterations: usize,
    provenance: Vec<Option<Justification>>,
    order: Vec<StateId>,
}

impl ReachResult {
    pub fn justification(&self, q: StateId) -> Option<Justification> {
        self.provenance[q.index()]
    }

    /// States in the order they were first discovered, initial states
    /// first. Replaying the justifications in this order regenerates the
    /// reachable set.
    pub fn discovery_order(&self) -> &[StateId] {
        &self.order
    }
}

/// Least fixpoint of the one-pass saturation: starting from the initial
/// states, every pass applies all broadcast rules enabled in the previous
/// snapshot and collects their targets together with the targets of
/// matching receive rules. Additions made during a pass only enable
/// further rules in the next pass.
pub fn reachable_states(p: &Process) -> ReachResult {
    let nq = p.state_count();
    let mut reached = p.initial().clone();
    let mut provenance: Vec<Option<Justification>> = vec![None; nq];
    let mut order: Vec<StateId> = Vec::new();
    for q in reached.iter() {
        provenance[q.index()] = Some(Justification::Initial);
        order.push(q);
    }

    // receive rules grouped by message for one scan per active message
    let mut recv_by_msg: Vec<Vec<usize>> = vec![Vec::new(); p.alphabet().len()];
    for (ri, rule) in p.receive_rules() {
        recv_by_msg[rule.action.message().index()].push(ri);
    }

    let mut old = StateSet::empty(nq);
    let mut iterations = 0usize;
    while reached != old {
        old = reached.clone();
        iterations += 1;
        let mut msg_handled = vec![false; p.alphabet().len()];
        for (bi, rule) in p.broadcast_rules() {
            if !old.contains(rule.source) {
                continue;
            }
            if !reached.contains(rule.target) {
                reached.insert(rule.target);
                provenance[rule.target.index()] = Some(Justification::ByBroadcast { rule: bi });
                order.push(rule.target);
            }
            let msg = rule.action.message();
            if msg_handled[msg.index()] {
                continue;
            }
            msg_handled[msg.index()] = true;
            for &ri in &recv_by_msg[msg.index()] {
                let recv = &p.rules()[ri];
                if old.contains(recv.source) && !reached.contains(recv.target) {
                    reached.insert(recv.target);
                    provenance[recv.target.index()] =
                        Some(Justification::ByReception { broadcast: bi, receive: ri });
                    order.push(recv.target);
                }
            }
        }
        assert!(iterations <= nq, "saturation exceeded the state count");
    }

    ReachResult {
        reachable: reached,
        iterations,
        provenance,
        order,
    }
}

/// Decides parameterized reachability for presence-only constraints:
/// evaluate the constraint over the saturated reachable set.
pub fn decide_prp_geq1(p: &Process, phi: &Constraint) -> Result<(bool, ReachResult), ReachError> {
    if classify_constraint(phi) != ConstraintClass::RqGeq1 {
        return Err(ReachError::WrongConstraintClass);
    }
    let result = reachable_states(p);
    let answer = eval_constraint(phi, &result.reachable);
    Ok((answer, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{ids, p1};
    use crate::model::{normalize, ActionDecl, ProcessDecl, RuleDecl};

    #[test]
    fn p1_saturates_in_two_passes() {
        let p = p1();
        let r = reachable_states(&p);
        assert_eq!(r.reachable, ids(&p, &["q0", "q1", "q2"]));
        assert_eq!(r.iterations, 2);
        assert!(r.iterations <= p.state_count());
    }

    #[test]
    fn no_rules_yields_initial_states_only() {
        let p = normalize(&ProcessDecl {
            name: "idle".into(),
            states: vec!["q0".into(), "q1".into()],
            init: vec!["q0".into()],
            alphabet: vec![],
            rules: vec![],
        })
        .unwrap();
        let r = reachable_states(&p);
        assert_eq!(r.reachable, *p.initial());
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn provenance_covers_exactly_the_reachable_set() {
        let p = p1();
        let r = reachable_states(&p);
        for q in 0..p.state_count() {
            let q = StateId::new(q);
            assert_eq!(r.justification(q).is_some(), r.reachable.contains(q));
        }
        assert_eq!(
            r.justification(p.state_id("q0").unwrap()),
            Some(Justification::Initial)
        );
        assert!(matches!(
            r.justification(p.state_id("q1").unwrap()),
            Some(Justification::ByBroadcast { .. })
        ));
        assert!(matches!(
            r.justification(p.state_id("q2").unwrap()),
            Some(Justification::ByReception { .. })
        ));
    }

    #[test]
    fn replaying_justifications_regenerates_the_set() {
        let p = p1();
        let r = reachable_states(&p);
        let mut seen = p.empty_set();
        for &q in r.discovery_order() {
            match r.justification(q).unwrap() {
                Justification::Initial => assert!(p.initial().contains(q)),
                Justification::ByBroadcast { rule } => {
                    let rule = &p.rules()[rule];
                    assert!(rule.action.is_broadcast());
                    assert!(seen.contains(rule.source));
                    assert_eq!(rule.target, q);
                }
                Justification::ByReception { broadcast, receive } => {
                    let b = &p.rules()[broadcast];
                    let rv = &p.rules()[receive];
                    assert!(b.action.is_broadcast());
                    assert!(!rv.action.is_broadcast());
                    assert_eq!(b.action.message(), rv.action.message());
                    assert!(seen.contains(b.source));
                    assert!(seen.contains(rv.source));
                    assert_eq!(rv.target, q);
                }
            }
            seen.insert(q);
        }
        assert_eq!(seen, r.reachable);
    }

    #[test]
    fn decide_examples_on_p1() {
        let p = p1();
        let q2 = Constraint::AtLeastOne(p.state_id("q2").unwrap());
        assert!(decide_prp_geq1(&p, &q2).unwrap().0);
        let q0 = Constraint::AtLeastOne(p.state_id("q0").unwrap());
        assert!(decide_prp_geq1(&p, &q0).unwrap().0);
    }

    #[test]
    fn unreachable_state_answers_no() {
        // q3 exists but nothing targets it
        let p = normalize(&ProcessDecl {
            name: "p".into(),
            states: vec!["q0".into(), "q1".into(), "q2".into(), "q3".into()],
            init: vec!["q0".into()],
            alphabet: vec!["a".into(), "b".into()],
            rules: vec![
                RuleDecl {
                    source: "q0".into(),
                    action: ActionDecl::Broadcast("a".into()),
                    target: "q1".into(),
                },
                RuleDecl {
                    source: "q0".into(),
                    action: ActionDecl::Receive("a".into()),
                    target: "q2".into(),
                },
            ],
        })
        .unwrap();
        let phi = Constraint::AtLeastOne(p.state_id("q3").unwrap());
        let (ans, r) = decide_prp_geq1(&p, &phi).unwrap();
        assert!(!ans);
        assert!(!r.reachable.contains(p.state_id("q3").unwrap()));
    }

    #[test]
    fn cc_constraint_is_rejected() {
        let p = p1();
        let phi = Constraint::Absent(p.state_id("q0").unwrap());
        assert!(matches!(
            decide_prp_geq1(&p, &phi),
            Err(ReachError::WrongConstraintClass)
        ));
    }

    #[test]
    fn adding_rules_never_shrinks_reach() {
        let base = ProcessDecl {
            name: "m".into(),
            states: vec!["q0".into(), "q1".into(), "q2".into()],
            init: vec!["q0".into()],
            alphabet: vec!["a".into(), "b".into()],
            rules: vec![RuleDecl {
                source: "q0".into(),
                action: ActionDecl::Broadcast("a".into()),
                target: "q1".into(),
            }],
        };
        let before = reachable_states(&normalize(&base).unwrap());
        let mut extended = base.clone();
        extended.rules.push(RuleDecl {
            source: "q1".into(),
            action: ActionDecl::Broadcast("b".into()),
            target: "q2".into(),
        });
        let after = reachable_states(&normalize(&extended).unwrap());
        assert!(before.reachable.is_subset(&after.reachable));
    }
}
