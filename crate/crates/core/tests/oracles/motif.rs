//! Brute-force motif census via isomorphism against named representatives,
//! plus exhaustive enumeration of unlabeled graphs on few nodes.

use resilib_core::Graph;
use std::collections::BTreeSet;

/// Pair order used for 4-node codes.
const PAIRS4: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn code4(has: impl Fn(usize, usize) -> bool) -> u8 {
    PAIRS4.iter().enumerate().fold(0, |acc, (i, &(a, b))| acc | ((has(a, b) as u8) << i))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn canonical4(code: u8) -> u8 {
    let has = |a: usize, b: usize| {
        let (a, b) = (a.min(b), a.max(b));
        let i = PAIRS4.iter().position(|&p| p == (a, b)).unwrap();
        code >> i & 1 == 1
    };
    permutations(4).iter().map(|p| code4(|a, b| has(p[a], p[b]))).min().unwrap()
}

/// Canonical codes of path, star, cycle, tadpole, diamond and K4.
fn representatives() -> [u8; 6] {
    let reps: [&[(usize, usize)]; 6] = [
        &[(0, 1), (1, 2), (2, 3)],
        &[(0, 1), (0, 2), (0, 3)],
        &[(0, 1), (1, 2), (2, 3), (0, 3)],
        &[(0, 1), (1, 2), (0, 2), (2, 3)],
        &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)],
        &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
    ];
    reps.map(|edges| canonical4(code4(|a, b| edges.contains(&(a, b)) || edges.contains(&(b, a)))))
}

/// Lookup from 6-bit induced code to class index (or none).
pub struct MotifOracle {
    table: [Option<usize>; 64],
}

impl MotifOracle {
    pub fn new() -> Self {
        let reps = representatives();
        let mut table = [None; 64];
        for (code, slot) in table.iter_mut().enumerate() {
            let c = canonical4(code as u8);
            *slot = reps.iter().position(|&r| r == c);
        }
        MotifOracle { table }
    }

    pub fn census4(&self, g: &Graph) -> [u64; 6] {
        let n = g.node_count();
        let mut counts = [0u64; 6];
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for d in c + 1..n {
                        let s = [a, b, c, d];
                        if let Some(i) = self.table[code4(|x, y| g.has_edge(s[x], s[y])) as usize] {
                            counts[i] += 1;
                        }
                    }
                }
            }
        }
        counts
    }

    pub fn census3(&self, g: &Graph) -> [u64; 2] {
        let n = g.node_count();
        let mut counts = [0u64; 2];
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let e = g.has_edge(a, b) as u8 + g.has_edge(a, c) as u8 + g.has_edge(b, c) as u8;
                    match e {
                        2 => counts[0] += 1,
                        3 => counts[1] += 1,
                        _ => {}
                    }
                }
            }
        }
        counts
    }
}

/// Small dense graph for enumeration.
#[derive(Clone)]
struct Dense {
    n: usize,
    adj: Vec<u16>,
}

impl Dense {
    fn has(&self, a: usize, b: usize) -> bool {
        self.adj[a] >> b & 1 == 1
    }

    /// Stable colour refinement starting from degrees.
    fn colours(&self) -> Vec<usize> {
        let mut col: Vec<usize> = (0..self.n).map(|u| self.adj[u].count_ones() as usize).collect();
        loop {
            let sig: Vec<(usize, Vec<usize>)> = (0..self.n)
                .map(|u| {
                    let mut nb: Vec<usize> = (0..self.n).filter(|&v| self.has(u, v)).map(|v| col[v]).collect();
                    nb.sort_unstable();
                    (col[u], nb)
                })
                .collect();
            let distinct: BTreeSet<&(usize, Vec<usize>)> = sig.iter().collect();
            let rank: Vec<&(usize, Vec<usize>)> = distinct.into_iter().collect();
            let next: Vec<usize> = sig.iter().map(|s| rank.iter().position(|r| *r == s).unwrap()).collect();
            let classes = |c: &[usize]| c.iter().collect::<BTreeSet<_>>().len();
            if classes(&next) == classes(&col) {
                return next;
            }
            col = next;
        }
    }

    /// Minimum adjacency code over orderings that respect refined colours.
    fn certificate(&self) -> (Vec<usize>, u64) {
        let col = self.colours();
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for u in 0..self.n {
            match groups.iter_mut().find(|(c, _)| *c == col[u]) {
                Some((_, g)) => g.push(u),
                None => groups.push((col[u], vec![u])),
            }
        }
        groups.sort();
        let sizes: Vec<usize> = groups.iter().map(|(_, g)| g.len()).collect();
        let mut best = u64::MAX;
        let mut order = Vec::with_capacity(self.n);
        self.search(&groups, 0, &mut vec![false; self.n], &mut order, &mut best);
        (sizes, best)
    }

    fn search(&self, groups: &[(usize, Vec<usize>)], gi: usize, used: &mut Vec<bool>, order: &mut Vec<usize>, best: &mut u64) {
        if order.len() == self.n {
            let mut code = 0u64;
            let mut bit = 0;
            for i in 0..self.n {
                for j in i + 1..self.n {
                    code |= (self.has(order[i], order[j]) as u64) << bit;
                    bit += 1;
                }
            }
            *best = (*best).min(code);
            return;
        }
        let group = &groups[gi].1;
        let placed = group.iter().filter(|&&u| used[u]).count();
        let next_gi = if placed + 1 == group.len() { gi + 1 } else { gi };
        for &u in group {
            if !used[u] {
                used[u] = true;
                order.push(u);
                self.search(groups, next_gi, used, order, best);
                order.pop();
                used[u] = false;
            }
        }
    }

    fn to_graph(&self) -> Graph {
        let mut edges = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.has(a, b) {
                    edges.push((a, b));
                }
            }
        }
        Graph::from_edges(self.n, &edges).unwrap()
    }
}

/// One representative of every isomorphism class of graphs on `n` nodes
/// for each `n` in `1..=max_n`, built by adding a vertex with every
/// possible neighbourhood to each class on one fewer node.
pub fn all_unlabeled_graphs(max_n: usize) -> Vec<Vec<Graph>> {
    assert!(max_n <= 10);
    let mut levels: Vec<Vec<Dense>> = vec![vec![Dense { n: 1, adj: vec![0] }]];
    while levels.len() < max_n {
        let prev = levels.last().unwrap();
        let n = prev[0].n + 1;
        let mut seen = BTreeSet::new();
        let mut next = Vec::new();
        for g in prev {
            for mask in 0u16..(1 << (n - 1)) {
                let mut adj = g.adj.clone();
                adj.push(mask);
                for (v, row) in adj.iter_mut().enumerate().take(n - 1) {
                    if mask >> v & 1 == 1 {
                        *row |= 1 << (n - 1);
                    }
                }
                let h = Dense { n, adj };
                if seen.insert(h.certificate()) {
                    next.push(h);
                }
            }
        }
        levels.push(next);
    }
    levels.into_iter().map(|l| l.iter().map(Dense::to_graph).collect()).collect()
}
