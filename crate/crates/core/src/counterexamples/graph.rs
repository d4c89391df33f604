use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SpcaError};
use crate::linalg::{symmetric_eigenvalues, SymMatrix};

/// Attempts (pairing plus repair, then spectral check) before giving up.
pub const GRAPH_RESTART_CAP: usize = 1000;

/// A simple `r_deg`-regular graph on `u` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularGraph {
    pub u: usize,
    pub r_deg: usize,
    /// Sorted neighbour lists.
    neighbours: Vec<Vec<usize>>,
}

impl RegularGraph {
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbours[a].binary_search(&b).is_ok()
    }

    pub fn neighbours(&self, a: usize) -> &[usize] {
        &self.neighbours[a]
    }

    pub fn adjacency(&self) -> SymMatrix {
        SymMatrix::from_fn(self.u, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
            .expect("graph has at least one vertex")
    }

    /// Degree, symmetry and simplicity.
    pub fn is_valid(&self) -> bool {
        self.neighbours.iter().enumerate().all(|(a, nb)| {
            nb.len() == self.r_deg
                && nb.windows(2).all(|w| w[0] < w[1])
                && nb.iter().all(|&b| b != a && b < self.u && self.neighbours[b].binary_search(&a).is_ok())
        })
    }
}

/// Random `r_deg`-regular graph whose nontrivial eigenvalues satisfy
/// `max_{i >= 2} |λ_i(A)| <= spectral_factor * sqrt(r_deg)`.
///
/// Each attempt draws a configuration-model pairing and removes loops and
/// repeated edges by random double-edge switches; attempts that cannot be
/// repaired, or that miss the spectral bound, are redrawn.
pub fn random_regular_graph_with(
    u: usize,
    r_deg: usize,
    seed: u64,
    spectral_factor: Option<f64>,
) -> Result<RegularGraph> {
    if r_deg >= u {
        return Err(SpcaError::param(format!("degree {r_deg} must be below vertex count {u}")));
    }
    if (u * r_deg) % 2 == 1 {
        return Err(SpcaError::param(format!("u * r_deg = {} must be even", u * r_deg)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GRAPH_RESTART_CAP {
        let Some(g) = pairing_with_repair(u, r_deg, &mut rng) else {
            continue;
        };
        match spectral_factor {
            None => return Ok(g),
            Some(f) => {
                if second_eigenvalue_bound(&g) <= f * (r_deg as f64).sqrt() {
                    return Ok(g);
                }
            }
        }
    }
    Err(SpcaError::Construction(format!(
        "no {r_deg}-regular graph on {u} vertices after {GRAPH_RESTART_CAP} restarts"
    )))
}

/// Random regular graph with the `3 sqrt(r)` spectral bound enforced.
pub fn random_regular_graph(u: usize, r_deg: usize, seed: u64) -> Result<RegularGraph> {
    random_regular_graph_with(u, r_deg, seed, Some(3.0))
}

/// `max_{i >= 2} |λ_i(A)|` from the full spectrum.
pub fn second_eigenvalue_bound(g: &RegularGraph) -> f64 {
    let eigs = symmetric_eigenvalues(&g.adjacency());
    // λ_1 = r_deg for a regular graph; every other eigenvalue counts
    eigs[1..].iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn pairing_with_repair(u: usize, r_deg: usize, rng: &mut ChaCha8Rng) -> Option<RegularGraph> {
    let mut points: Vec<usize> = (0..u).flat_map(|v| std::iter::repeat(v).take(r_deg)).collect();
    points.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = points.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    if edges.is_empty() {
        return Some(RegularGraph {
            u,
            r_deg,
            neighbours: vec![Vec::new(); u],
        });
    }
    let mut count: HashMap<(usize, usize), u16> = HashMap::with_capacity(edges.len());
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    for &(a, b) in &edges {
        *count.entry(key(a, b)).or_insert(0) += 1;
    }
    let is_bad = |count: &HashMap<(usize, usize), u16>, (a, b): (usize, usize)| {
        a == b || count.get(&key(a, b)).copied().unwrap_or(0) > 1
    };

    let m = edges.len();
    let budget = 200 * m + 10_000;
    let mut steps = 0;
    loop {
        let bad: Vec<usize> = (0..m).filter(|&i| is_bad(&count, edges[i])).collect();
        if bad.is_empty() {
            break;
        }
        for i in bad {
            let mut fixed = !is_bad(&count, edges[i]);
            while !fixed {
                if steps >= budget {
                    return None;
                }
                steps += 1;
                let j = rng.random_range(0..m);
                if j == i {
                    continue;
                }
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                let (n1, n2) = if rng.random::<bool>() { ((a, c), (b, d)) } else { ((a, d), (b, c)) };
                if n1.0 == n1.1 || n2.0 == n2.1 || key(n1.0, n1.1) == key(n2.0, n2.1) {
                    continue;
                }
                if count.contains_key(&key(n1.0, n1.1)) || count.contains_key(&key(n2.0, n2.1)) {
                    continue;
                }
                for old in [key(a, b), key(c, d)] {
                    let e = count.get_mut(&old).expect("edge is counted");
                    *e -= 1;
                    if *e == 0 {
                        count.remove(&old);
                    }
                }
                count.insert(key(n1.0, n1.1), 1);
                count.insert(key(n2.0, n2.1), 1);
                edges[i] = n1;
                edges[j] = n2;
                fixed = true;
            }
        }
    }
    let mut neighbours = vec![Vec::with_capacity(r_deg); u];
    for &(a, b) in &edges {
        neighbours[a].push(b);
        neighbours[b].push(a);
    }
    neighbours.iter_mut().for_each(|nb| nb.sort_unstable());
    let g = RegularGraph { u, r_deg, neighbours };
    g.is_valid().then_some(g)
}
