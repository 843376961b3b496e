//! Maximum-cardinality bipartite matching by augmenting paths (Kuhn).

/// `adj[l]` lists the right vertices adjacent to left vertex `l`.
/// Returns, for each left vertex, its matched right vertex.
pub fn max_bipartite_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    let mut match_right: Vec<Option<usize>> = vec![None; n_right];
    let mut seen = vec![0usize; n_right];
    for l in 0..adj.len() {
        // `seen` is stamped with l + 1 so it never needs clearing.
        augment(l, l + 1, adj, &mut match_right, &mut seen);
    }
    let mut match_left = vec![None; adj.len()];
    for (r, m) in match_right.iter().enumerate() {
        if let Some(l) = *m {
            match_left[l] = Some(r);
        }
    }
    match_left
}

fn augment(
    l: usize,
    stamp: usize,
    adj: &[Vec<usize>],
    match_right: &mut [Option<usize>],
    seen: &mut [usize],
) -> bool {
    for &r in &adj[l] {
        if seen[r] == stamp {
            continue;
        }
        seen[r] = stamp;
        let free = match match_right[r] {
            None => true,
            Some(other) => augment(other, stamp, adj, match_right, seen),
        };
        if free {
            match_right[r] = Some(l);
            return true;
        }
    }
    false
}

pub fn matching_size(adj: &[Vec<usize>], n_right: usize) -> usize {
    max_bipartite_matching(adj, n_right)
        .iter()
        .filter(|m| m.is_some())
        .count()
}
