//! Epistemic model checking against a bottom-up truth-table evaluator.

use proptest::prelude::*;
use resilib_core::kripke::{self, EpistemicFormula as F, KripkeModel};

const ATOMS: [&str; 2] = ["p", "q"];

/// `table[t][w]` for every subformula, computed bottom-up.
fn table(m: &KripkeModel, f: &F) -> Vec<Vec<bool>> {
    let (steps, worlds) = (m.steps(), m.world_count());
    let knows = |n: usize, sub: &Vec<Vec<bool>>, t: usize, w: usize| m.accessible(n, t, w).iter().all(|&v| sub[t][v]);
    let mut out = vec![vec![false; worlds]; steps];
    match f {
        F::Top => out.iter_mut().for_each(|r| r.fill(true)),
        F::Atom(p) => {
            for t in 0..steps {
                for w in 0..worlds {
                    out[t][w] = m.holds_atom(w, p);
                }
            }
        }
        F::Not(g) => {
            let s = table(m, g);
            for t in 0..steps {
                for w in 0..worlds {
                    out[t][w] = !s[t][w];
                }
            }
        }
        F::Or(a, b) => {
            let (sa, sb) = (table(m, a), table(m, b));
            for t in 0..steps {
                for w in 0..worlds {
                    out[t][w] = sa[t][w] || sb[t][w];
                }
            }
        }
        F::Know(n, g) => {
            let s = table(m, g);
            for t in 0..steps {
                for w in 0..worlds {
                    out[t][w] = knows(*n, &s, t, w);
                }
            }
        }
        F::MutualKnow(ns, g) => {
            let s = table(m, g);
            for t in 0..steps {
                for w in 0..worlds {
                    out[t][w] = ns.iter().all(|&n| knows(n, &s, t, w));
                }
            }
        }
        F::Always(n, g) => {
            let s = table(m, g);
            for w in 0..worlds {
                let mut acc = true;
                for t in (0..steps).rev() {
                    acc &= knows(*n, &s, t, w);
                    out[t][w] = acc;
                }
            }
        }
        F::Until(n, a, b) => {
            let (sa, sb) = (table(m, a), table(m, b));
            for w in 0..worlds {
                let mut next = false;
                for t in (0..steps).rev() {
                    next = knows(*n, &sb, t, w) || (knows(*n, &sa, t, w) && next);
                    out[t][w] = next;
                }
            }
        }
    }
    out
}

fn arb_model() -> impl Strategy<Value = KripkeModel> {
    (1usize..=4, 1usize..=3, 1usize..=2).prop_flat_map(|(worlds, steps, agents)| {
        (
            prop::collection::vec(prop::collection::vec(any::<bool>(), ATOMS.len()), worlds),
            prop::collection::vec(any::<bool>(), worlds * worlds * steps * agents),
        )
            .prop_map(move |(vals, bits)| {
                let valuation: Vec<Vec<&str>> =
                    vals.iter().map(|v| ATOMS.iter().zip(v).filter(|(_, &on)| on).map(|(a, _)| *a).collect()).collect();
                let mut m = KripkeModel::new(agents, steps, &valuation).unwrap();
                let mut i = 0;
                for t in 0..steps {
                    for n in 0..agents {
                        for u in 0..worlds {
                            for v in 0..worlds {
                                if bits[i] {
                                    m.add_access(n, t, u, v).unwrap();
                                }
                                i += 1;
                            }
                        }
                    }
                }
                m
            })
    })
    .prop_filter("every atom occurs somewhere", |m| m.atoms().len() == ATOMS.len())
}

fn arb_formula(agents: usize) -> impl Strategy<Value = F> {
    let leaf = prop_oneof![Just(F::Top), Just(kripke::atom("p")), Just(kripke::atom("q"))];
    leaf.prop_recursive(4, 24, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(kripke::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| kripke::or(a, b)),
            (0..agents, inner.clone()).prop_map(|(n, g)| kripke::know(n, g)),
            (0..agents, inner.clone()).prop_map(|(n, g)| kripke::always(n, g)),
            (0..agents, inner.clone(), inner.clone()).prop_map(|(n, a, b)| kripke::until(n, a, b)),
            (prop::sample::subsequence((0..agents).collect::<Vec<_>>(), 1..=agents), inner)
                .prop_map(|(ns, g)| kripke::mutual(&ns, g)),
        ]
    })
}

fn model_and_formula() -> impl Strategy<Value = (KripkeModel, F)> {
    arb_model().prop_flat_map(|m| {
        let n = m.agent_count();
        (Just(m), arb_formula(n))
    })
}

fn propositional() -> impl Strategy<Value = F> {
    let leaf = prop_oneof![Just(F::Top), Just(kripke::atom("p")), Just(kripke::atom("q"))];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![inner.clone().prop_map(kripke::not), (inner.clone(), inner).prop_map(|(a, b)| kripke::or(a, b))]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn recursive_checker_matches_truth_table((m, f) in model_and_formula()) {
        let tab = table(&m, &f);
        for t in 0..m.steps() {
            for w in 0..m.world_count() {
                prop_assert_eq!(kripke::satisfies(&m, w, t, &f).unwrap(), tab[t][w]);
            }
        }
    }

    #[test]
    fn refinement_preserves_knowledge(m in arb_model(), f in propositional(), drop in any::<prop::sample::Index>()) {
        let before: Vec<bool> = (0..m.world_count()).map(|w| kripke::satisfies(&m, w, 0, &kripke::know(0, f.clone())).unwrap()).collect();
        let pairs = m.pairs(0, 0);
        prop_assume!(!pairs.is_empty());
        let (u, v) = pairs[drop.index(pairs.len())];
        let mut refined = m.clone();
        refined.remove_access(0, 0, u, v).unwrap();
        for (w, &was) in before.iter().enumerate() {
            if was {
                prop_assert!(kripke::satisfies(&refined, w, 0, &kripke::know(0, f.clone())).unwrap());
            }
        }
    }

    #[test]
    fn mutual_knowledge_implies_each_member_knows((m, f) in model_and_formula()) {
        let all: Vec<usize> = (0..m.agent_count()).collect();
        for w in 0..m.world_count() {
            if kripke::mutual_knowledge(&m, w, 0, &all, &f).unwrap() {
                for &n in &all {
                    prop_assert!(kripke::satisfies(&m, w, 0, &kripke::know(n, f.clone())).unwrap());
                }
            }
        }
    }
}
