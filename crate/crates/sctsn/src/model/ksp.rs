//! Candidate-path enumeration.
//!
//! Best-first search over partial simple paths. Paths pop in
//! `(cost, lexicographic node-name sequence)` order, so the result is
//! deterministic for a fixed topology and the k-path list is prefix-stable
//! as `k` grows. Costs must be strictly positive, which makes the tie-break
//! argument sound: every prefix of a path is strictly cheaper than the path
//! itself.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{LinkId, ModelError, Path, SwitchId, Topology};

/// Safety valve for pathological graphs; desk-scale topologies stay far
/// below this.
const MAX_EXPANSIONS: usize = 2_000_000;

struct Partial {
    cost: f64,
    /// Name ranks of the node sequence, for lexicographic ordering.
    ranks: Vec<u32>,
    links: Vec<LinkId>,
    at: SwitchId,
}

impl PartialEq for Partial {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.ranks == other.ranks
    }
}
impl Eq for Partial {}

impl Ord for Partial {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest first.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap()
            .then_with(|| other.ranks.cmp(&self.ranks))
    }
}
impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn name_ranks(topo: &Topology) -> Vec<u32> {
    let mut order: Vec<SwitchId> = topo.switches().collect();
    order.sort_by(|&a, &b| topo.switch_name(a).cmp(topo.switch_name(b)));
    let mut rank = vec![0u32; topo.num_switches()];
    for (r, s) in order.iter().enumerate() {
        rank[s.index()] = r as u32;
    }
    rank
}

fn enumerate<F>(topo: &Topology, src: SwitchId, dst: SwitchId, k: usize, cost: F) -> Vec<Path>
where
    F: Fn(LinkId) -> f64,
{
    let rank = name_ranks(topo);
    let mut heap = BinaryHeap::new();
    heap.push(Partial {
        cost: 0.0,
        ranks: vec![rank[src.index()]],
        links: Vec::new(),
        at: src,
    });
    let mut found = Vec::new();
    let mut expansions = 0usize;
    while let Some(p) = heap.pop() {
        if p.at == dst {
            found.push(Path::new(topo, p.links).expect("search yields valid simple paths"));
            if found.len() == k {
                break;
            }
            continue;
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            break;
        }
        for &l in topo.out_links(p.at) {
            let next = topo.link(l).dst;
            let next_rank = rank[next.index()];
            if p.ranks.contains(&next_rank) {
                continue; // keep the path simple
            }
            let w = cost(l);
            debug_assert!(w > 0.0, "path costs must be strictly positive");
            let mut ranks = p.ranks.clone();
            ranks.push(next_rank);
            let mut links = p.links.clone();
            links.push(l);
            heap.push(Partial {
                cost: p.cost + w,
                ranks,
                links,
                at: next,
            });
        }
    }
    found
}

/// Up to `k` loop-free paths from `src` to `dst`, ordered by hop count and
/// then by the lexicographic node-name sequence. Returns an empty list if
/// the pair is disconnected.
pub fn k_shortest_paths(
    topo: &Topology,
    src: SwitchId,
    dst: SwitchId,
    k: usize,
) -> Result<Vec<Path>, ModelError> {
    if src == dst {
        return Err(ModelError::Invalid("path endpoints must differ".into()));
    }
    if k == 0 {
        return Err(ModelError::Invalid("k must be at least 1".into()));
    }
    Ok(enumerate(topo, src, dst, k, |_| 1.0))
}

/// Minimum-total-weight simple path under per-link weights, with the same
/// lexicographic tie-break. `None` if disconnected.
pub fn min_weight_path(
    topo: &Topology,
    src: SwitchId,
    dst: SwitchId,
    weights: &[f64],
) -> Option<Path> {
    enumerate(topo, src, dst, 1, |l| weights[l.index()])
        .into_iter()
        .next()
}

/// Exhaustive enumeration of every simple path, sorted by
/// (hops, lexicographic node sequence). Test oracle for small graphs.
pub fn all_simple_paths(topo: &Topology, src: SwitchId, dst: SwitchId) -> Vec<Path> {
    let rank = name_ranks(topo);
    let mut out: Vec<(usize, Vec<u32>, Vec<LinkId>)> = Vec::new();
    let mut visited = vec![false; topo.num_switches()];
    let mut links = Vec::new();
    let mut ranks = vec![rank[src.index()]];
    visited[src.index()] = true;
    #[allow(clippy::too_many_arguments)] // recursion carries its whole context
    fn dfs(
        topo: &Topology,
        rank: &[u32],
        at: SwitchId,
        dst: SwitchId,
        visited: &mut [bool],
        links: &mut Vec<LinkId>,
        ranks: &mut Vec<u32>,
        out: &mut Vec<(usize, Vec<u32>, Vec<LinkId>)>,
    ) {
        if at == dst {
            out.push((links.len(), ranks.clone(), links.clone()));
            return;
        }
        for &l in topo.out_links(at) {
            let next = topo.link(l).dst;
            if visited[next.index()] {
                continue;
            }
            visited[next.index()] = true;
            links.push(l);
            ranks.push(rank[next.index()]);
            dfs(topo, rank, next, dst, visited, links, ranks, out);
            ranks.pop();
            links.pop();
            visited[next.index()] = false;
        }
    }
    dfs(
        topo,
        &rank,
        src,
        dst,
        &mut visited,
        &mut links,
        &mut ranks,
        &mut out,
    );
    out.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    out.into_iter()
        .map(|(_, _, links)| Path::new(topo, links).unwrap())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Topology;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Topology {
        let mut t = Topology::new();
        let a = t.add_switch("a").unwrap();
        let b = t.add_switch("b").unwrap();
        let c = t.add_switch("c").unwrap();
        t.add_edge(a, b, 100e6, 1.0, 0.5).unwrap();
        t.add_edge(b, c, 100e6, 1.0, 0.5).unwrap();
        t.add_edge(a, c, 100e6, 1.0, 0.5).unwrap();
        t.finish();
        t
    }

    #[test]
    fn triangle_two_paths() {
        let t = triangle();
        let paths = k_shortest_paths(&t, SwitchId(0), SwitchId(1), 2).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].display(&t), "a->b");
        assert_eq!(paths[1].display(&t), "a->c->b");
    }

    #[test]
    fn disconnected_pair_yields_empty() {
        let mut t = Topology::new();
        let a = t.add_switch("a").unwrap();
        let b = t.add_switch("b").unwrap();
        let c = t.add_switch("c").unwrap();
        let d = t.add_switch("d").unwrap();
        t.add_edge(a, b, 100e6, 1.0, 0.5).unwrap();
        t.add_edge(c, d, 100e6, 1.0, 0.5).unwrap();
        t.finish();
        assert!(k_shortest_paths(&t, a, c, 4).unwrap().is_empty());
    }

    #[test]
    fn diamond_has_exactly_two_paths() {
        // a-b, a-c, b-d, c-d; only two simple paths a->d even with k=3.
        let mut t = Topology::new();
        let a = t.add_switch("a").unwrap();
        let b = t.add_switch("b").unwrap();
        let c = t.add_switch("c").unwrap();
        let d = t.add_switch("d").unwrap();
        t.add_edge(a, b, 100e6, 1.0, 0.5).unwrap();
        t.add_edge(a, c, 100e6, 1.0, 0.5).unwrap();
        t.add_edge(b, d, 100e6, 1.0, 0.5).unwrap();
        t.add_edge(c, d, 100e6, 1.0, 0.5).unwrap();
        t.finish();
        let exhaustive = all_simple_paths(&t, a, d);
        assert_eq!(exhaustive.len(), 2);
        let paths = k_shortest_paths(&t, a, d, 3).unwrap();
        assert_eq!(paths, exhaustive);
    }

    fn random_topology(seed: u64, n: usize, extra_edges: usize) -> Topology {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Topology::new();
        let ids: Vec<_> = (0..n)
            .map(|i| t.add_switch(&format!("n{i:02}")).unwrap())
            .collect();
        // random spanning tree first, then extra edges
        for i in 1..n {
            let j = rng.gen_range(0..i);
            t.add_edge(ids[i], ids[j], 100e6, 1.0, 0.5).unwrap();
        }
        let mut added = 0;
        while added < extra_edges {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i == j || t.link_between(ids[i], ids[j]).is_some() {
                continue;
            }
            t.add_edge(ids[i], ids[j], 100e6, 1.0, 0.5).unwrap();
            added += 1;
        }
        t.finish();
        t
    }

    #[test]
    fn matches_exhaustive_enumeration_on_small_graphs() {
        for seed in 0..20 {
            let t = random_topology(seed, 7, 4);
            let src = SwitchId(0);
            let dst = SwitchId(6);
            let exhaustive = all_simple_paths(&t, src, dst);
            let got = k_shortest_paths(&t, src, dst, exhaustive.len().max(1)).unwrap();
            assert_eq!(got, exhaustive, "seed {seed}");
        }
    }

    #[test]
    fn prefix_stable_in_k() {
        for seed in 0..10 {
            let t = random_topology(seed + 100, 8, 5);
            let src = SwitchId(0);
            let dst = SwitchId(7);
            let full = k_shortest_paths(&t, src, dst, 8).unwrap();
            for k in 1..=8 {
                let partial = k_shortest_paths(&t, src, dst, k).unwrap();
                assert_eq!(partial.len(), full.len().min(k));
                assert_eq!(&full[..partial.len()], &partial[..]);
            }
        }
    }

    #[test]
    fn min_weight_path_prefers_cheap_detour() {
        let t = triangle();
        let mut weights = vec![1.0; t.links().len()];
        let ab = t.link_between(SwitchId(0), SwitchId(1)).unwrap();
        weights[ab.index()] = 10.0;
        weights[ab.reverse().index()] = 10.0;
        let p = min_weight_path(&t, SwitchId(0), SwitchId(1), &weights).unwrap();
        assert_eq!(p.display(&t), "a->c->b");
    }
}
