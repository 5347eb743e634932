//! Brute-force reference computations that only look at raw face lists.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Undirected vertex adjacency and, for every directed edge, the two
/// corners adjacent to it across its incident faces.
pub struct FaceWalker {
    adjacency: Vec<BTreeSet<u32>>,
    flanks: HashMap<(u32, u32), Vec<u32>>,
}

impl FaceWalker {
    pub fn new(vertex_count: usize, faces: &[[u32; 4]]) -> Self {
        let mut adjacency = vec![BTreeSet::new(); vertex_count];
        let mut flanks: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for f in faces {
            for i in 0..4 {
                let (a, b) = (f[i], f[(i + 1) % 4]);
                adjacency[a as usize].insert(b);
                adjacency[b as usize].insert(a);
                // corner of this face next to b (other than a) and next to a (other than b)
                flanks.entry((a, b)).or_default().push(f[(i + 2) % 4]);
                flanks.entry((b, a)).or_default().push(f[(i + 3) % 4]);
            }
        }
        FaceWalker { adjacency, flanks }
    }

    pub fn valence(&self, v: u32) -> usize {
        self.adjacency[v as usize].len()
    }

    /// Neighbour of `w` opposite to `u`: the one sharing no face with the
    /// edge `u -> w`.
    pub fn straight(&self, u: u32, w: u32) -> u32 {
        let side = &self.flanks[&(u, w)];
        let rest: Vec<u32> =
            self.adjacency[w as usize].iter().copied().filter(|&n| n != u && !side.contains(&n)).collect();
        assert_eq!(rest.len(), 1, "vertex {w} is not a regular grid vertex");
        rest[0]
    }

    /// Every separatrix as a vertex sequence, one entry per traversal
    /// direction collapsed onto its lexicographically smaller form.
    pub fn separatrices(&self) -> Vec<Vec<u32>> {
        let mut found = BTreeSet::new();
        for v in 0..self.adjacency.len() as u32 {
            if self.valence(v) == 4 {
                continue;
            }
            for &n in &self.adjacency[v as usize] {
                let mut path = vec![v, n];
                while self.valence(*path.last().unwrap()) == 4 {
                    let k = path.len();
                    path.push(self.straight(path[k - 2], path[k - 1]));
                    assert!(path.len() <= 4 * self.adjacency.len(), "closed streamline");
                }
                let mut rev = path.clone();
                rev.reverse();
                found.insert(path.min(rev));
            }
        }
        found.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSummary {
    pub singular: usize,
    pub separatrices: usize,
    /// Separatrix lengths in mesh edges, sorted.
    pub lengths: Vec<usize>,
    /// Mesh vertices passed at least twice by separatrix interiors.
    pub regular: usize,
}

pub fn summarize(vertex_count: usize, faces: &[[u32; 4]]) -> TraceSummary {
    let walker = FaceWalker::new(vertex_count, faces);
    let seps = walker.separatrices();
    let mut visits: BTreeMap<u32, usize> = BTreeMap::new();
    for s in &seps {
        for &v in &s[1..s.len() - 1] {
            *visits.entry(v).or_default() += 1;
        }
    }
    let mut lengths: Vec<usize> = seps.iter().map(|s| s.len() - 1).collect();
    lengths.sort_unstable();
    TraceSummary {
        singular: (0..vertex_count as u32).filter(|&v| walker.valence(v) != 4).count(),
        separatrices: seps.len(),
        lengths,
        regular: visits.values().filter(|&&c| c >= 2).count(),
    }
}

/// Digital segment from (0, 0) to (a, b) by direct enumeration: lattice
/// points inside the half-open band around the real line, ordered by
/// Manhattan distance.
pub fn digital_line(a: usize, b: usize) -> Vec<(usize, usize)> {
    let (ai, bi) = (a as i64, b as i64);
    let mut pts: Vec<(usize, usize)> = (0..=a)
        .flat_map(|x| (0..=b).map(move |y| (x, y)))
        .filter(|&(x, y)| {
            let t = 2 * (bi * x as i64 - ai * y as i64);
            -(ai + bi) < t && t <= ai + bi
        })
        .collect();
    pts.sort_by_key(|&(x, y)| x + y);
    pts
}
