//! Time-indexed multi-agent Kripke models and epistemic-temporal model
//! checking.

pub mod mamab;

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Worlds `0..worlds`, per-time per-agent accessibility, and a valuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KripkeModel {
    worlds: usize,
    agents: usize,
    /// `access[t][agent][w]` holds the sorted successors of `w`.
    access: Vec<Vec<Vec<Vec<usize>>>>,
    valuation: Vec<BTreeSet<String>>,
}

impl KripkeModel {
    /// Empty relations at every time step; `valuation[w]` lists atoms true at `w`.
    pub fn new<S: AsRef<str>>(agents: usize, steps: usize, valuation: &[Vec<S>]) -> Result<Self> {
        if valuation.is_empty() {
            return Err(invalid("a Kripke model needs at least one world"));
        }
        if steps == 0 {
            return Err(invalid("a Kripke model needs at least one time step"));
        }
        let worlds = valuation.len();
        Ok(KripkeModel {
            worlds,
            agents,
            access: vec![vec![vec![Vec::new(); worlds]; agents]; steps],
            valuation: valuation.iter().map(|v| v.iter().map(|s| s.as_ref().to_string()).collect()).collect(),
        })
    }

    pub fn world_count(&self) -> usize {
        self.worlds
    }

    pub fn agent_count(&self) -> usize {
        self.agents
    }

    /// Number of time indices; `t` ranges over `0..steps()`.
    pub fn steps(&self) -> usize {
        self.access.len()
    }

    pub fn atoms(&self) -> BTreeSet<&str> {
        self.valuation.iter().flatten().map(String::as_str).collect()
    }

    pub fn holds_atom(&self, world: usize, atom: &str) -> bool {
        self.valuation[world].contains(atom)
    }

    fn check(&self, agent: usize, t: usize, w: usize) -> Result<()> {
        if agent >= self.agents {
            return Err(Error::UnknownAgent(agent));
        }
        if t >= self.steps() {
            return Err(invalid(format!("time {t} beyond horizon {}", self.steps())));
        }
        if w >= self.worlds {
            return Err(invalid(format!("world {w} not in model")));
        }
        Ok(())
    }

    pub fn add_access(&mut self, agent: usize, t: usize, from: usize, to: usize) -> Result<()> {
        self.check(agent, t, from)?;
        self.check(agent, t, to)?;
        let succ = &mut self.access[t][agent][from];
        if let Err(pos) = succ.binary_search(&to) {
            succ.insert(pos, to);
        }
        Ok(())
    }

    pub fn remove_access(&mut self, agent: usize, t: usize, from: usize, to: usize) -> Result<()> {
        self.check(agent, t, from)?;
        self.check(agent, t, to)?;
        self.access[t][agent][from].retain(|&x| x != to);
        Ok(())
    }

    /// Makes `R_{agent,t}` the equivalence relation with the given classes;
    /// worlds not mentioned become singletons.
    pub fn set_partition(&mut self, agent: usize, t: usize, classes: &[Vec<usize>]) -> Result<()> {
        self.check(agent, t, 0)?;
        let rel = &mut self.access[t][agent];
        rel.iter_mut().enumerate().for_each(|(w, s)| *s = vec![w]);
        for class in classes {
            let mut members = class.clone();
            members.sort_unstable();
            members.dedup();
            for &w in &members {
                if w >= self.worlds {
                    return Err(invalid(format!("world {w} not in model")));
                }
            }
            for &w in &members {
                rel[w] = members.clone();
            }
        }
        Ok(())
    }

    pub fn accessible(&self, agent: usize, t: usize, w: usize) -> &[usize] {
        &self.access[t][agent][w]
    }

    pub fn pairs(&self, agent: usize, t: usize) -> Vec<(usize, usize)> {
        self.access[t][agent].iter().enumerate().flat_map(|(w, s)| s.iter().map(move |&v| (w, v))).collect()
    }

    pub fn is_equivalence(&self, agent: usize, t: usize) -> bool {
        let rel = &self.access[t][agent];
        let has = |a: usize, b: usize| rel[a].binary_search(&b).is_ok();
        (0..self.worlds).all(|w| has(w, w))
            && self.pairs(agent, t).iter().all(|&(a, b)| has(b, a) && rel[b].iter().all(|&c| has(a, c)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EpistemicFormula {
    Top,
    Atom(String),
    Not(Box<EpistemicFormula>),
    Or(Box<EpistemicFormula>, Box<EpistemicFormula>),
    /// `K_n φ`.
    Know(usize, Box<EpistemicFormula>),
    /// `□φ` along the given agent's accessibility at every later time.
    Always(usize, Box<EpistemicFormula>),
    /// `φ U ψ` along the given agent's accessibility.
    Until(usize, Box<EpistemicFormula>, Box<EpistemicFormula>),
    /// `E_{N'} φ` for a non-empty agent subset.
    MutualKnow(Vec<usize>, Box<EpistemicFormula>),
}

pub fn atom(p: &str) -> EpistemicFormula {
    EpistemicFormula::Atom(p.to_string())
}

pub fn not(f: EpistemicFormula) -> EpistemicFormula {
    EpistemicFormula::Not(Box::new(f))
}

pub fn or(a: EpistemicFormula, b: EpistemicFormula) -> EpistemicFormula {
    EpistemicFormula::Or(Box::new(a), Box::new(b))
}

pub fn and(a: EpistemicFormula, b: EpistemicFormula) -> EpistemicFormula {
    not(or(not(a), not(b)))
}

pub fn implies(a: EpistemicFormula, b: EpistemicFormula) -> EpistemicFormula {
    or(not(a), b)
}

pub fn know(agent: usize, f: EpistemicFormula) -> EpistemicFormula {
    EpistemicFormula::Know(agent, Box::new(f))
}

pub fn always(agent: usize, f: EpistemicFormula) -> EpistemicFormula {
    EpistemicFormula::Always(agent, Box::new(f))
}

pub fn until(agent: usize, lhs: EpistemicFormula, rhs: EpistemicFormula) -> EpistemicFormula {
    EpistemicFormula::Until(agent, Box::new(lhs), Box::new(rhs))
}

pub fn mutual(agents: &[usize], f: EpistemicFormula) -> EpistemicFormula {
    EpistemicFormula::MutualKnow(agents.to_vec(), Box::new(f))
}

fn validate(model: &KripkeModel, f: &EpistemicFormula) -> Result<()> {
    use EpistemicFormula::*;
    let agent_ok = |n: usize| if n < model.agents { Ok(()) } else { Err(Error::UnknownAgent(n)) };
    match f {
        Top => Ok(()),
        Atom(p) => {
            if model.valuation.iter().any(|v| v.contains(p)) {
                Ok(())
            } else {
                Err(Error::UnknownAtom(p.clone()))
            }
        }
        Not(g) => validate(model, g),
        Or(a, b) => validate(model, a).and(validate(model, b)),
        Know(n, g) | Always(n, g) => agent_ok(*n).and(validate(model, g)),
        Until(n, a, b) => agent_ok(*n).and(validate(model, a)).and(validate(model, b)),
        MutualKnow(ns, g) => {
            if ns.is_empty() {
                return Err(Error::EmptySubset);
            }
            ns.iter().try_for_each(|&n| agent_ok(n))?;
            validate(model, g)
        }
    }
}

fn eval(model: &KripkeModel, w: usize, t: usize, f: &EpistemicFormula) -> bool {
    use EpistemicFormula::*;
    let all_succ = |n: usize, s: usize, g: &EpistemicFormula| model.accessible(n, s, w).iter().all(|&v| eval(model, v, s, g));
    match f {
        Top => true,
        Atom(p) => model.holds_atom(w, p),
        Not(g) => !eval(model, w, t, g),
        Or(a, b) => eval(model, w, t, a) || eval(model, w, t, b),
        Know(n, g) => all_succ(*n, t, g),
        Always(n, g) => (t..model.steps()).all(|s| all_succ(*n, s, g)),
        Until(n, a, b) => {
            for s in t..model.steps() {
                if all_succ(*n, s, b) {
                    return true;
                }
                if !all_succ(*n, s, a) {
                    return false;
                }
            }
            false
        }
        MutualKnow(ns, g) => ns.iter().all(|&n| all_succ(n, t, g)),
    }
}

/// `(M_t, world) ⊨ formula`.
pub fn satisfies(model: &KripkeModel, world: usize, t: usize, formula: &EpistemicFormula) -> Result<bool> {
    if world >= model.worlds {
        return Err(invalid(format!("world {world} not in model")));
    }
    if t >= model.steps() {
        return Err(invalid(format!("time {t} beyond horizon {}", model.steps())));
    }
    validate(model, formula)?;
    Ok(eval(model, world, t, formula))
}

/// `E_{agents} formula` at `(world, t)`.
pub fn mutual_knowledge(
    model: &KripkeModel,
    world: usize,
    t: usize,
    agents: &[usize],
    formula: &EpistemicFormula,
) -> Result<bool> {
    satisfies(model, world, t, &mutual(agents, formula.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_worlds() -> KripkeModel {
        let mut m = KripkeModel::new(2, 1, &[vec!["p"], vec![]]).unwrap();
        m.add_access(0, 0, 0, 0).unwrap();
        m.add_access(0, 0, 0, 1).unwrap();
        m
    }

    #[test]
    fn atoms_and_connectives() {
        let m = two_worlds();
        assert!(satisfies(&m, 0, 0, &atom("p")).unwrap());
        assert!(!satisfies(&m, 1, 0, &atom("p")).unwrap());
        assert!(satisfies(&m, 1, 0, &not(atom("p"))).unwrap());
        assert!(satisfies(&m, 1, 0, &or(atom("p"), EpistemicFormula::Top)).unwrap());
    }

    #[test]
    fn knowledge_enumerates_accessible_worlds() {
        let m = two_worlds();
        assert!(!satisfies(&m, 0, 0, &know(0, atom("p"))).unwrap());
        // No successors: vacuous truth.
        assert!(satisfies(&m, 0, 0, &know(1, atom("p"))).unwrap());
        assert!(satisfies(&m, 1, 0, &know(0, not(EpistemicFormula::Top))).unwrap());
    }

    #[test]
    fn errors() {
        let m = two_worlds();
        assert!(matches!(satisfies(&m, 0, 0, &atom("q")), Err(Error::UnknownAtom(_))));
        assert!(matches!(satisfies(&m, 0, 0, &know(5, atom("p"))), Err(Error::UnknownAgent(5))));
        assert!(matches!(mutual_knowledge(&m, 0, 0, &[], &atom("p")), Err(Error::EmptySubset)));
        assert!(satisfies(&m, 3, 0, &atom("p")).is_err());
        assert!(satisfies(&m, 0, 4, &atom("p")).is_err());
    }

    #[test]
    fn mutual_knowledge_examples() {
        let mut m = KripkeModel::new(3, 1, &[vec!["p"], vec!["p"], vec![]]).unwrap();
        for n in 0..3 {
            m.set_partition(n, 0, &[]).unwrap();
        }
        let all = [0, 1, 2];
        assert!(mutual_knowledge(&m, 0, 0, &all, &atom("p")).unwrap());
        m.set_partition(1, 0, &[vec![0, 1]]).unwrap();
        assert!(mutual_knowledge(&m, 0, 0, &all, &atom("p")).unwrap());
        m.set_partition(2, 0, &[vec![0, 2]]).unwrap();
        assert!(!mutual_knowledge(&m, 0, 0, &all, &atom("p")).unwrap());
        assert!(mutual_knowledge(&m, 0, 0, &[0, 1], &atom("p")).unwrap());
        for n in 0..3 {
            assert_eq!(
                mutual_knowledge(&m, 0, 0, &[n], &atom("p")).unwrap(),
                satisfies(&m, 0, 0, &know(n, atom("p"))).unwrap()
            );
        }
    }

    #[test]
    fn temporal_operators_follow_the_agent() {
        // Agent 0 sees world 1 at t=0 and world 0 afterwards.
        let mut m = KripkeModel::new(1, 3, &[vec!["p"], vec!["q"]]).unwrap();
        m.add_access(0, 0, 0, 1).unwrap();
        m.add_access(0, 1, 0, 0).unwrap();
        m.add_access(0, 2, 0, 0).unwrap();
        assert!(satisfies(&m, 0, 1, &always(0, atom("p"))).unwrap());
        assert!(!satisfies(&m, 0, 0, &always(0, atom("p"))).unwrap());
        assert!(satisfies(&m, 0, 0, &until(0, atom("q"), atom("p"))).unwrap());
        assert!(satisfies(&m, 0, 0, &until(0, atom("p"), atom("q"))).unwrap());
    }

    #[test]
    fn partitions_are_equivalences() {
        let mut m = KripkeModel::new(2, 1, &[vec!["a"], vec![], vec![], vec!["a"]]).unwrap();
        m.set_partition(0, 0, &[vec![0, 2], vec![1, 3]]).unwrap();
        assert!(m.is_equivalence(0, 0));
        m.remove_access(0, 0, 2, 0).unwrap();
        assert!(!m.is_equivalence(0, 0));
        assert!(!m.is_equivalence(1, 0));
    }
}
