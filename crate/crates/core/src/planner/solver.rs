use std::sync::OnceLock;

use itertools::Itertools;

use crate::registry::{Named, Registry};

/// Choose exactly `k` rows and `k` distinct columns and pair them so that the
/// summed utility is maximal. `None` marks a forbidden pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub utility: Vec<Vec<Option<f64>>>,
    pub columns: usize,
    pub k: usize,
}

impl AssignmentProblem {
    pub fn new(utility: Vec<Vec<Option<f64>>>, columns: usize, k: usize) -> Self {
        debug_assert!(utility.iter().all(|r| r.len() == columns));
        AssignmentProblem { utility, columns, k }
    }

    pub fn rows(&self) -> usize {
        self.utility.len()
    }

    /// Total utility of a set of (row, column) pairs; `None` if any is forbidden.
    pub fn objective(&self, pairs: &[(usize, usize)]) -> Option<f64> {
        pairs.iter().map(|&(r, c)| self.utility[r][c]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("cannot place {k} items: only {rows} candidates and {columns} ports")]
    TooSmall { k: usize, rows: usize, columns: usize },
    #[error("no feasible assignment of {k} items under the exclusion constraints")]
    Infeasible { k: usize },
    #[error("instance too large for exhaustive search")]
    TooLarge,
}

pub trait AssignmentSolver: Named + Send + Sync {
    /// Returns (row, column) pairs sorted by row.
    fn solve(&self, problem: &AssignmentProblem) -> Result<Vec<(usize, usize)>, SolveError>;
}

fn check_size(p: &AssignmentProblem) -> Result<(), SolveError> {
    if p.k > p.rows() || p.k > p.columns {
        return Err(SolveError::TooSmall {
            k: p.k,
            rows: p.rows(),
            columns: p.columns,
        });
    }
    Ok(())
}

/// Exact solver: the k-cardinality problem becomes a square minimum-cost
/// assignment by padding with `columns − k` dummy rows (unused ports) and
/// `rows − k` dummy columns (unselected candidates); dummy-dummy pairs are
/// forbidden, which forces exactly k real pairs.
pub struct Hungarian;

impl Named for Hungarian {
    fn name(&self) -> &'static str {
        "hungarian"
    }
}

impl AssignmentSolver for Hungarian {
    fn solve(&self, p: &AssignmentProblem) -> Result<Vec<(usize, usize)>, SolveError> {
        check_size(p)?;
        let (n, m, k) = (p.rows(), p.columns, p.k);
        if k == 0 {
            return Ok(Vec::new());
        }
        let size = n + m - k;
        // large enough that any solution avoiding forbidden pairs is cheaper
        let max_abs = p.utility.iter().flatten().flatten().fold(0.0f64, |a, u| a.max(u.abs()));
        let forbidden = 4.0 * (max_abs + 1.0) * size as f64;
        let mut cost = vec![vec![0.0; size]; size];
        for (i, row) in cost.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c = match (i < n, j < m) {
                    (true, true) => p.utility[i][j].map_or(forbidden, |u| -u),
                    (false, false) => forbidden,
                    _ => 0.0,
                };
            }
        }
        let col_of_row = min_cost_assignment(&cost);
        let mut pairs = Vec::with_capacity(k);
        for (i, &j) in col_of_row.iter().enumerate().take(n) {
            if j < m {
                if p.utility[i][j].is_none() {
                    return Err(SolveError::Infeasible { k });
                }
                pairs.push((i, j));
            }
        }
        if pairs.len() != k {
            return Err(SolveError::Infeasible { k });
        }
        Ok(pairs)
    }
}

/// Square minimum-cost assignment with row/column potentials (shortest
/// augmenting paths), O(n³). Returns the column of every row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays, index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            col_of[row_of[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Repeatedly takes the best remaining (row, column) pair; ties go to the
/// lower row, then the lower column.
pub struct Greedy;

impl Named for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }
}

impl AssignmentSolver for Greedy {
    fn solve(&self, p: &AssignmentProblem) -> Result<Vec<(usize, usize)>, SolveError> {
        check_size(p)?;
        let mut cand: Vec<(f64, usize, usize)> = p
            .utility
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().filter_map(move |(j, u)| u.map(|u| (u, i, j))))
            .collect();
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut row_used = vec![false; p.rows()];
        let mut col_used = vec![false; p.columns];
        let mut pairs = Vec::with_capacity(p.k);
        for (_, i, j) in cand {
            if pairs.len() == p.k {
                break;
            }
            if !row_used[i] && !col_used[j] {
                row_used[i] = true;
                col_used[j] = true;
                pairs.push((i, j));
            }
        }
        if pairs.len() < p.k {
            return Err(SolveError::Infeasible { k: p.k });
        }
        pairs.sort_unstable();
        Ok(pairs)
    }
}

/// Exhaustive search over row subsets and ordered column choices.
pub struct BruteForce;

impl Named for BruteForce {
    fn name(&self) -> &'static str {
        "brute-force"
    }
}

impl AssignmentSolver for BruteForce {
    fn solve(&self, p: &AssignmentProblem) -> Result<Vec<(usize, usize)>, SolveError> {
        check_size(p)?;
        if p.rows() > 10 || p.columns > 10 {
            return Err(SolveError::TooLarge);
        }
        let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
        for rows in (0..p.rows()).combinations(p.k) {
            for cols in (0..p.columns).permutations(p.k) {
                let pairs: Vec<(usize, usize)> = rows.iter().copied().zip(cols).collect();
                if let Some(v) = p.objective(&pairs) {
                    if best.as_ref().is_none_or(|(b, _)| v > *b) {
                        best = Some((v, pairs));
                    }
                }
            }
        }
        best.map(|(_, pairs)| pairs).ok_or(SolveError::Infeasible { k: p.k })
    }
}

pub fn solver_registry() -> &'static Registry<dyn AssignmentSolver> {
    static REGISTRY: OnceLock<Registry<dyn AssignmentSolver>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        Registry::<dyn AssignmentSolver>::new("assignment solver")
            .with(Box::new(Hungarian))
            .with(Box::new(Greedy))
            .with(Box::new(BruteForce))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize, forbid: f64) -> AssignmentProblem {
        let utility = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| (rng.random::<f64>() >= forbid).then(|| rng.random::<f64>() * 2.0 - 0.5))
                    .collect()
            })
            .collect();
        AssignmentProblem::new(utility, m, k)
    }

    #[test]
    fn square_assignment_known_optimum() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let col = min_cost_assignment(&cost);
        let total: f64 = col.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(1..=7);
            let m = rng.random_range(1..=7);
            let k = rng.random_range(0..=n.min(m).min(4));
            let p = random_problem(&mut rng, n, m, k, 0.15);
            let exact = Hungarian.solve(&p);
            let brute = BruteForce.solve(&p);
            match (exact, brute) {
                (Ok(a), Ok(b)) => {
                    let (va, vb) = (p.objective(&a).unwrap(), p.objective(&b).unwrap());
                    assert!((va - vb).abs() < 1e-9, "{va} vs {vb}");
                }
                (Err(SolveError::Infeasible { .. }), Err(SolveError::Infeasible { .. })) => {}
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn too_small_rejected() {
        let p = AssignmentProblem::new(vec![vec![Some(1.0)]], 1, 2);
        assert!(matches!(Hungarian.solve(&p), Err(SolveError::TooSmall { .. })));
    }

    #[test]
    fn registry_has_three() {
        assert_eq!(solver_registry().names(), vec!["brute-force", "greedy", "hungarian"]);
    }

    proptest! {
        #[test]
        fn exact_never_below_greedy(seed in any::<u64>(), n in 1usize..20, m in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.random_range(0..=n.min(m));
            let p = random_problem(&mut rng, n, m, k, 0.0);
            let exact = Hungarian.solve(&p).unwrap();
            let greedy = Greedy.solve(&p).unwrap();
            prop_assert_eq!(exact.len(), k);
            let cols: std::collections::HashSet<_> = exact.iter().map(|x| x.1).collect();
            prop_assert_eq!(cols.len(), k);
            prop_assert!(p.objective(&exact).unwrap() >= p.objective(&greedy).unwrap() - 1e-9);
        }
    }
}
