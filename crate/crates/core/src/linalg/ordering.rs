//! Fill-reducing ordering: approximate minimum degree on the quotient graph.
//!
//! Eliminated pivots become *elements* whose variable lists stand in for the
//! cliques they would create. Degrees are the usual upper bound
//! `|A_i| + |L_p \ i| + sum_e |L_e \ L_p|`, with indistinguishable variables
//! merged into supervariables after each pivot. The result is deterministic:
//! ties are broken by the smallest variable index.

use std::collections::{BTreeSet, HashMap};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Variable,
    Element,
    Absorbed,
    Merged,
}

/// Returns a permutation `perm` such that `perm[k]` is the original index
/// eliminated at step `k`. `adj` must be symmetric and free of self loops.
pub fn minimum_degree(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let mut status = vec![Status::Variable; n];
    let mut nv = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut avars: Vec<Vec<usize>> = adj.to_vec();
    let mut aelems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut evars: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut eweight = vec![0usize; n];

    // Initial supervariables: identical closed neighbourhoods.
    {
        let mut buckets: HashMap<Vec<usize>, usize> = HashMap::new();
        for i in 0..n {
            let mut key = avars[i].clone();
            key.push(i);
            key.sort_unstable();
            key.dedup();
            match buckets.get(&key) {
                Some(&root) => {
                    status[i] = Status::Merged;
                    nv[root] += 1;
                    let m = std::mem::take(&mut members[i]);
                    members[root].extend(m);
                }
                None => {
                    buckets.insert(key, i);
                }
            }
        }
        for i in 0..n {
            if status[i] == Status::Variable {
                avars[i].retain(|&j| status[j] == Status::Variable);
            } else {
                avars[i].clear();
            }
        }
    }

    let mut degree = vec![0usize; n];
    let mut queue: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        if status[i] == Status::Variable {
            degree[i] = avars[i].iter().map(|&j| nv[j]).sum();
            queue.insert((degree[i], i));
        }
    }

    let mut mark = vec![usize::MAX; n];
    let mut wstamp = vec![usize::MAX; n];
    let mut wval = vec![0isize; n];
    let mut remaining: usize = n;
    let mut perm = Vec::with_capacity(n);
    let mut step = 0usize;

    while let Some((_, p)) = queue.pop_first() {
        step += 1;
        let p_weight = nv[p];
        // Build L_p.
        let mut lp: Vec<usize> = Vec::new();
        mark[p] = step;
        for &j in &avars[p] {
            if status[j] == Status::Variable && mark[j] != step {
                mark[j] = step;
                lp.push(j);
            }
        }
        let old_elems = std::mem::take(&mut aelems[p]);
        for &e in &old_elems {
            if status[e] != Status::Element {
                continue;
            }
            for &j in &evars[e] {
                if status[j] == Status::Variable && mark[j] != step {
                    mark[j] = step;
                    lp.push(j);
                }
            }
            status[e] = Status::Absorbed;
            evars[e] = Vec::new();
        }
        avars[p] = Vec::new();
        status[p] = Status::Element;
        perm.extend(members[p].iter().copied());
        remaining -= p_weight;
        lp.sort_unstable();
        let lp_weight: usize = lp.iter().map(|&j| nv[j]).sum();

        // Update adjacency of the variables in L_p.
        for &i in &lp {
            aelems[i].retain(|&e| status[e] == Status::Element);
            aelems[i].push(p);
            avars[i].retain(|&j| status[j] == Status::Variable && mark[j] != step);
        }

        // |L_e \ L_p| for elements adjacent to L_p.
        for &i in &lp {
            for &e in &aelems[i] {
                if e == p {
                    continue;
                }
                if wstamp[e] != step {
                    wstamp[e] = step;
                    wval[e] = eweight[e] as isize;
                }
                wval[e] -= nv[i] as isize;
            }
        }

        for &i in &lp {
            let mut d = avars[i].iter().map(|&j| nv[j]).sum::<usize>() + (lp_weight - nv[i]);
            for &e in &aelems[i] {
                if e != p {
                    d += wval[e].max(0) as usize;
                }
            }
            let bound = remaining - nv[i];
            let d = d.min(bound).min(degree[i] + lp_weight - nv[i]);
            queue.remove(&(degree[i], i));
            degree[i] = d;
        }

        // Supervariable detection among L_p.
        let mut groups: HashMap<u64, Vec<usize>> = HashMap::new();
        for &i in &lp {
            aelems[i].sort_unstable();
            avars[i].sort_unstable();
            let h = aelems[i].iter().chain(avars[i].iter()).fold(
                (aelems[i].len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                |acc, &x| acc.rotate_left(7) ^ (x as u64).wrapping_mul(0xff51_afd7_ed55_8ccd),
            );
            groups.entry(h).or_default().push(i);
        }
        let mut keys: Vec<u64> = groups.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let list = &groups[&key];
            for a in 0..list.len() {
                let i = list[a];
                if status[i] != Status::Variable {
                    continue;
                }
                for &j in &list[a + 1..] {
                    if status[j] != Status::Variable {
                        continue;
                    }
                    if aelems[i] == aelems[j] && avars[i] == avars[j] {
                        status[j] = Status::Merged;
                        nv[i] += nv[j];
                        let m = std::mem::take(&mut members[j]);
                        members[i].extend(m);
                        degree[i] = degree[i].saturating_sub(nv[j]);
                        nv[j] = 0;
                        aelems[j] = Vec::new();
                        avars[j] = Vec::new();
                    }
                }
            }
        }
        let mut live = Vec::with_capacity(lp.len());
        for &i in &lp {
            if status[i] == Status::Variable {
                live.push(i);
            }
        }
        for &i in &live {
            avars[i].retain(|&j| status[j] == Status::Variable);
            queue.insert((degree[i], i));
        }
        eweight[p] = live.iter().map(|&j| nv[j]).sum();
        evars[p] = live;
    }
    debug_assert_eq!(perm.len(), n);
    perm
}

/// Inverse of a permutation.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_adjacency(nx: usize, ny: usize) -> Vec<Vec<usize>> {
        let idx = |i: usize, j: usize| i + nx * j;
        let mut adj = vec![Vec::new(); nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx {
                    adj[idx(i, j)].push(idx(i + 1, j));
                    adj[idx(i + 1, j)].push(idx(i, j));
                }
                if j + 1 < ny {
                    adj[idx(i, j)].push(idx(i, j + 1));
                    adj[idx(i, j + 1)].push(idx(i, j));
                }
            }
        }
        adj
    }

    #[test]
    fn is_permutation() {
        let adj = grid_adjacency(9, 7);
        let p = minimum_degree(&adj);
        let mut s = p.clone();
        s.sort_unstable();
        assert_eq!(s, (0..63).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic() {
        let adj = grid_adjacency(12, 12);
        assert_eq!(minimum_degree(&adj), minimum_degree(&adj));
    }

    #[test]
    fn star_center_last() {
        // Eliminating the hub first would create a clique.
        let mut adj = vec![Vec::new(); 6];
        for leaf in 1..6 {
            adj[0].push(leaf);
            adj[leaf].push(0);
        }
        let p = minimum_degree(&adj);
        assert!(p[..4].iter().all(|&v| v != 0));
    }

    #[test]
    fn empty_and_isolated() {
        assert!(minimum_degree(&[]).is_empty());
        assert_eq!(minimum_degree(&[vec![], vec![]]).len(), 2);
    }
}
