//! Exhaustive minimum-cost partial matching.

/// Every partial injection of rows into columns, scored as the sum of the
/// matched costs plus `unmatched` per row or column left over. Returns the
/// cheapest, as sorted `(row, col)` pairs.
pub fn brute_force_matching(cost: &[Vec<f64>], unmatched: f64) -> Vec<(usize, usize)> {
    let cols = cost.first().map_or(0, Vec::len);
    let mut best = (f64::INFINITY, Vec::new());
    let mut used = vec![false; cols];
    let mut cur = Vec::new();
    recurse(cost, unmatched, 0, &mut used, &mut cur, 0.0, &mut best);
    best.1
}

fn recurse(
    cost: &[Vec<f64>],
    unmatched: f64,
    row: usize,
    used: &mut Vec<bool>,
    cur: &mut Vec<(usize, usize)>,
    acc: f64,
    best: &mut (f64, Vec<(usize, usize)>),
) {
    if row == cost.len() {
        let total = acc + unmatched * used.iter().filter(|u| !**u).count() as f64;
        if total < best.0 {
            *best = (total, cur.clone());
        }
        return;
    }
    recurse(cost, unmatched, row + 1, used, cur, acc + unmatched, best);
    for c in 0..used.len() {
        if !used[c] {
            used[c] = true;
            cur.push((row, c));
            recurse(cost, unmatched, row + 1, used, cur, acc + cost[row][c], best);
            cur.pop();
            used[c] = false;
        }
    }
}
