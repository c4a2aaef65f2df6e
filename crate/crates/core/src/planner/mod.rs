//! Nanowire selection and fiber-port assignment for the chip layout.

mod solver;
mod survey;

pub use solver::{
    min_cost_assignment, solver_registry, AssignmentProblem, AssignmentSolver, BruteForce, Greedy, Hungarian,
    SolveError,
};
pub use survey::{
    load_survey, survey_to_csv, synthetic_survey, NanowireRecord, SurveyError, SurveyModel, SURVEY_HEADER,
};

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::registry::UnknownStrategy;

/// Fiber-port grid centered on the chip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortGrid {
    pub rows: usize,
    pub cols: usize,
    /// Port pitch in x and y, meters.
    pub pitch: f64,
}

impl Default for PortGrid {
    fn default() -> Self {
        PortGrid {
            rows: 8,
            cols: 8,
            pitch: 350e-6,
        }
    }
}

impl PortGrid {
    pub fn ports(&self) -> usize {
        self.rows * self.cols
    }

    pub fn row_col(&self, port: usize) -> (usize, usize) {
        (port / self.cols, port % self.cols)
    }

    /// Port center relative to the chip center, meters.
    pub fn position(&self, port: usize) -> (f64, f64) {
        let (r, c) = self.row_col(port);
        (
            (c as f64 - (self.cols as f64 - 1.0) / 2.0) * self.pitch,
            (r as f64 - (self.rows as f64 - 1.0) / 2.0) * self.pitch,
        )
    }
}

/// Nanowires sit along the four edges of a square around the port grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipLayout {
    pub slots_per_edge: u32,
    /// Nanowire spacing along an edge, meters.
    pub spacing: f64,
}

impl Default for ChipLayout {
    fn default() -> Self {
        ChipLayout {
            slots_per_edge: 44,
            spacing: 65e-6,
        }
    }
}

impl ChipLayout {
    pub fn side(&self) -> f64 {
        self.slots_per_edge as f64 * self.spacing
    }

    /// Nanowire position relative to the chip center; edges run
    /// counter-clockwise starting at the bottom.
    pub fn position(&self, edge: u8, slot: u32) -> (f64, f64) {
        let h = self.side() / 2.0;
        let s = -h + (slot as f64 + 0.5) * self.spacing;
        match edge {
            0 => (s, -h),
            1 => (h, s),
            2 => (-s, h),
            _ => (-h, -s),
        }
    }
}

/// Manhattan distance from a nanowire to a port, divided by the Manhattan
/// diameter of the square enclosing both chip edges and port grid.
pub fn routing_cost(layout: &ChipLayout, grid: &PortGrid, record: &NanowireRecord, port: usize) -> f64 {
    let (x0, y0) = layout.position(record.edge, record.slot);
    let (x1, y1) = grid.position(port);
    let extent = layout
        .side()
        .max((grid.cols.max(grid.rows) as f64 - 1.0) * grid.pitch);
    ((x0 - x1).abs() + (y0 - y1).abs()) / (2.0 * extent)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    pub w_ic: f64,
    pub w_r: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { w_ic: 0.5, w_r: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("no eligible nanowires (every record lacks resistance or critical current)")]
    NoEligible,
    #[error("only {eligible} eligible nanowires for k = {k}")]
    NotEnoughEligible { eligible: usize, k: usize },
    #[error("grid has {ports} ports, fewer than k = {k}")]
    GridTooSmall { ports: usize, k: usize },
    #[error(transparent)]
    UnknownSolver(#[from] UnknownStrategy),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Quality score per record (`None` for ineligible ones).
///
/// score = w_ic·g(I_c) + w_r·(1 − |R − mean_R| / (2·std_R)), with g = 1 at or
/// above the mean critical current, falling linearly to 0 at mean − 2·std.
/// Both terms are clamped to [0, 1]; statistics use eligible records only
/// (population standard deviation).
pub fn score_nanowires(records: &[NanowireRecord], weights: &ScoreWeights) -> Result<Vec<Option<f64>>, PlanError> {
    let mut eligible: Vec<&NanowireRecord> = records.iter().filter(|r| r.is_eligible()).collect();
    // fixed summation order keeps scores bit-identical under input permutation
    eligible.sort_by_key(|r| r.id);
    if eligible.is_empty() {
        return Err(PlanError::NoEligible);
    }
    let ics: Vec<f64> = eligible.iter().map(|r| r.i_c.unwrap()).collect();
    let rs: Vec<f64> = eligible.iter().map(|r| r.r_room.unwrap()).collect();
    let (mean_ic, std_ic) = mean_std(&ics);
    let (mean_r, std_r) = mean_std(&rs);
    Ok(records
        .iter()
        .map(|rec| {
            let (r, ic) = (rec.r_room?, rec.i_c?);
            let g = if ic >= mean_ic || std_ic == 0.0 {
                1.0
            } else {
                (1.0 - (mean_ic - ic) / (2.0 * std_ic)).clamp(0.0, 1.0)
            };
            let closeness = if std_r == 0.0 {
                1.0
            } else {
                (1.0 - (r - mean_r).abs() / (2.0 * std_r)).clamp(0.0, 1.0)
            };
            Some((weights.w_ic * g + weights.w_r * closeness).clamp(0.0, 1.0))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    pub weights: ScoreWeights,
    pub layout: ChipLayout,
    pub solver: String,
    /// Forbidden (nanowire id, port index) pairs.
    pub exclusions: HashSet<(u32, usize)>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            weights: ScoreWeights::default(),
            layout: ChipLayout::default(),
            solver: "hungarian".into(),
            exclusions: HashSet::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentEntry {
    pub id: u32,
    pub edge: u8,
    pub slot: u32,
    pub port_row: usize,
    pub port_col: usize,
    pub score: f64,
    pub routing_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortAssignment {
    /// Sorted by port index.
    pub entries: Vec<AssignmentEntry>,
    pub lambda: f64,
    pub eligible: usize,
    pub candidates: usize,
    pub solver: String,
}

impl PortAssignment {
    pub fn total_score(&self) -> f64 {
        self.entries.iter().map(|e| e.score).sum()
    }

    pub fn total_routing_cost(&self) -> f64 {
        self.entries.iter().map(|e| e.routing_cost).sum()
    }

    pub fn objective(&self) -> f64 {
        self.total_score() - self.lambda * self.total_routing_cost()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,edge,slot,port_row,port_col,score,routing_cost\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6},{:.6}",
                e.id, e.edge, e.slot, e.port_row, e.port_col, e.score, e.routing_cost
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let k = self.entries.len().max(1) as f64;
        format!(
            "solver: {}\ncandidates: {}\neligible: {}\nselected: {}\nlambda: {}\ntotal_score: {:.6}\nmean_score: {:.6}\ntotal_routing_cost: {:.6}\nobjective: {:.6}\n",
            self.solver,
            self.candidates,
            self.eligible,
            self.entries.len(),
            self.lambda,
            self.total_score(),
            self.total_score() / k,
            self.total_routing_cost(),
            self.objective()
        )
    }
}

/// Selects `k` eligible nanowires and assigns each to a distinct port,
/// maximizing Σ score − λ·Σ routing cost.
///
/// Records are put in id order before solving, so the result does not depend
/// on input order.
pub fn select_and_assign(
    records: &[NanowireRecord],
    grid: &PortGrid,
    k: usize,
    lambda: f64,
    options: &PlanOptions,
) -> Result<PortAssignment, PlanError> {
    let solver = solver_registry().get(&options.solver)?;
    let scores = score_nanowires(records, &options.weights)?;
    let mut eligible: Vec<(NanowireRecord, f64)> = records
        .iter()
        .zip(&scores)
        .filter_map(|(r, s)| s.map(|s| (*r, s)))
        .collect();
    if eligible.len() < k {
        return Err(PlanError::NotEnoughEligible {
            eligible: eligible.len(),
            k,
        });
    }
    if grid.ports() < k {
        return Err(PlanError::GridTooSmall { ports: grid.ports(), k });
    }
    eligible.sort_by_key(|(r, _)| r.id);

    let costs: Vec<Vec<f64>> = eligible
        .iter()
        .map(|(r, _)| (0..grid.ports()).map(|p| routing_cost(&options.layout, grid, r, p)).collect())
        .collect();
    let utility = eligible
        .iter()
        .zip(&costs)
        .map(|((r, s), row)| {
            row.iter()
                .enumerate()
                .map(|(p, c)| (!options.exclusions.contains(&(r.id, p))).then(|| s - lambda * c))
                .collect()
        })
        .collect();
    let problem = AssignmentProblem::new(utility, grid.ports(), k);
    let pairs = solver.solve(&problem)?;

    let mut entries: Vec<(usize, AssignmentEntry)> = pairs
        .into_iter()
        .map(|(i, p)| {
            let (rec, score) = eligible[i];
            let (port_row, port_col) = grid.row_col(p);
            (
                p,
                AssignmentEntry {
                    id: rec.id,
                    edge: rec.edge,
                    slot: rec.slot,
                    port_row,
                    port_col,
                    score,
                    routing_cost: costs[i][p],
                },
            )
        })
        .collect();
    entries.sort_by_key(|(p, _)| *p);
    Ok(PortAssignment {
        entries: entries.into_iter().map(|(_, e)| e).collect(),
        lambda,
        eligible: eligible.len(),
        candidates: records.len(),
        solver: options.solver.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(id: u32, edge: u8, slot: u32, r: f64, ic_ua: f64) -> NanowireRecord {
        NanowireRecord {
            id,
            edge,
            slot,
            r_room: Some(r),
            i_c: Some(ic_ua * 1e-6),
        }
    }

    #[test]
    fn mean_record_scores_maximal() {
        let recs = [rec(0, 0, 0, 1.0, 10.0), rec(1, 0, 1, 2.0, 12.0), rec(2, 0, 2, 3.0, 14.0)];
        let s = score_nanowires(&recs, &ScoreWeights::default()).unwrap();
        // record 1 is exactly at both means
        assert!((s[1].unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn low_ic_decays_to_zero() {
        let mut recs: Vec<_> = (0..20).map(|i| rec(i, 0, i, 100.0, 12.0)).collect();
        recs.push(rec(20, 0, 20, 100.0, 1.0));
        let s = score_nanowires(&recs, &ScoreWeights { w_ic: 1.0, w_r: 0.0 }).unwrap();
        assert_eq!(s[20], Some(0.0));
        assert_eq!(s[0], Some(1.0));
    }

    #[test]
    fn ranking_matches_hand_computation() {
        let data = [
            (3.50, 12.0),
            (3.60, 13.0),
            (3.40, 11.0),
            (3.70, 12.5),
            (3.55, 14.0),
            (3.30, 10.0),
            (3.65, 12.8),
            (3.45, 13.5),
            (3.90, 12.2),
            (3.52, 11.8),
        ];
        let recs: Vec<_> = data
            .iter()
            .enumerate()
            .map(|(i, &(r, ic))| rec(i as u32, 0, i as u32, r * 1e6, ic))
            .collect();
        let got = score_nanowires(&recs, &ScoreWeights::default()).unwrap();
        // oracle: spreadsheet-style evaluation in plain f64 arithmetic
        let n = data.len() as f64;
        let mr = data.iter().map(|d| d.0).sum::<f64>() / n;
        let mi = data.iter().map(|d| d.1).sum::<f64>() / n;
        let sr = (data.iter().map(|d| (d.0 - mr) * (d.0 - mr)).sum::<f64>() / n).sqrt();
        let si = (data.iter().map(|d| (d.1 - mi) * (d.1 - mi)).sum::<f64>() / n).sqrt();
        let want: Vec<f64> = data
            .iter()
            .map(|&(r, ic)| {
                let g = if ic >= mi { 1.0 } else { (1.0 - (mi - ic) / (2.0 * si)).max(0.0) };
                let c = (1.0 - (r - mr).abs() / (2.0 * sr)).max(0.0);
                0.5 * g + 0.5 * c
            })
            .collect();
        for (g, w) in got.iter().zip(&want) {
            assert!((g.unwrap() - w).abs() < 1e-9);
        }
        let order = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
            idx
        };
        let got_v: Vec<f64> = got.iter().map(|s| s.unwrap()).collect();
        assert_eq!(order(&got_v), order(&want));
    }

    #[test]
    fn no_eligible_is_an_error() {
        let r = NanowireRecord { id: 0, edge: 0, slot: 0, r_room: None, i_c: Some(1e-5) };
        assert_eq!(score_nanowires(&[r], &ScoreWeights::default()), Err(PlanError::NoEligible));
    }

    #[test]
    fn routing_blind_picks_top_scores() {
        let recs = synthetic_survey(&SurveyModel::default(), 3);
        let plan = select_and_assign(&recs, &PortGrid::default(), 64, 0.0, &PlanOptions::default()).unwrap();
        let scores = score_nanowires(&recs, &ScoreWeights::default()).unwrap();
        let mut all: Vec<f64> = scores.iter().flatten().copied().collect();
        all.sort_by(|a, b| b.total_cmp(a));
        let mut chosen: Vec<f64> = plan.entries.iter().map(|e| e.score).collect();
        chosen.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in chosen.iter().zip(&all[..64]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn six_records_four_ports_brute_force() {
        let recs = vec![
            rec(0, 0, 3, 3.5e6, 12.0),
            rec(1, 1, 10, 3.6e6, 13.0),
            rec(2, 2, 20, 3.3e6, 11.0),
            rec(3, 3, 30, 3.7e6, 12.5),
            rec(4, 0, 40, 3.55e6, 14.0),
            rec(5, 2, 5, 3.45e6, 12.1),
        ];
        let grid = PortGrid { rows: 2, cols: 2, pitch: 350e-6 };
        for lambda in [0.0, 0.2, 1.0, 5.0] {
            let exact = select_and_assign(&recs, &grid, 4, lambda, &PlanOptions::default()).unwrap();
            let brute_opts = PlanOptions {
                solver: "brute-force".into(),
                ..PlanOptions::default()
            };
            let brute = select_and_assign(&recs, &grid, 4, lambda, &brute_opts).unwrap();
            assert!((exact.objective() - brute.objective()).abs() < 1e-9);
        }
    }

    #[test]
    fn full_chip_plan() {
        let recs = synthetic_survey(&SurveyModel::default(), 11);
        let t = std::time::Instant::now();
        let plan = select_and_assign(&recs, &PortGrid::default(), 64, 0.2, &PlanOptions::default()).unwrap();
        assert!(t.elapsed().as_secs_f64() < 1.0);
        assert_eq!(plan.entries.len(), 64);
        let ports: HashSet<_> = plan.entries.iter().map(|e| (e.port_row, e.port_col)).collect();
        assert_eq!(ports.len(), 64);
        let greedy = select_and_assign(
            &recs,
            &PortGrid::default(),
            64,
            0.2,
            &PlanOptions {
                solver: "greedy".into(),
                ..PlanOptions::default()
            },
        )
        .unwrap();
        assert!(plan.objective() >= greedy.objective() - 1e-9);
    }

    #[test]
    fn infeasible_k() {
        let recs = synthetic_survey(&SurveyModel::default(), 11);
        let e = select_and_assign(&recs, &PortGrid { rows: 15, cols: 15, pitch: 350e-6 }, 200, 0.2, &PlanOptions::default());
        assert!(matches!(e, Err(PlanError::NotEnoughEligible { k: 200, .. })));
    }

    #[test]
    fn exclusions_respected() {
        let recs = synthetic_survey(&SurveyModel::default(), 2);
        let base = select_and_assign(&recs, &PortGrid::default(), 64, 0.2, &PlanOptions::default()).unwrap();
        let first = base.entries[0];
        let mut opts = PlanOptions::default();
        opts.exclusions.insert((first.id, first.port_row * 8 + first.port_col));
        let plan = select_and_assign(&recs, &PortGrid::default(), 64, 0.2, &opts).unwrap();
        assert!(plan.entries.iter().all(|e| !(e.id == first.id && e.port_row == first.port_row && e.port_col == first.port_col)));
        assert!(plan.objective() <= base.objective() + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn input_order_irrelevant(seed in any::<u64>()) {
            let recs = synthetic_survey(&SurveyModel { per_edge: 6, ..SurveyModel::default() }, seed);
            let grid = PortGrid { rows: 3, cols: 3, pitch: 350e-6 };
            let k = recs.iter().filter(|r| r.is_eligible()).count().min(6);
            let a = select_and_assign(&recs, &grid, k, 0.3, &PlanOptions::default()).unwrap();
            let mut shuffled = recs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
            let b = select_and_assign(&shuffled, &grid, k, 0.3, &PlanOptions::default()).unwrap();
            prop_assert_eq!(a.entries, b.entries);
        }

        #[test]
        fn routing_cost_non_increasing_in_lambda(seed in any::<u64>(), l1 in 0.0f64..2.0, dl in 0.0f64..2.0) {
            let recs = synthetic_survey(&SurveyModel { per_edge: 8, ..SurveyModel::default() }, seed);
            let grid = PortGrid { rows: 4, cols: 4, pitch: 350e-6 };
            let k = recs.iter().filter(|r| r.is_eligible()).count().min(10);
            let a = select_and_assign(&recs, &grid, k, l1, &PlanOptions::default()).unwrap();
            let b = select_and_assign(&recs, &grid, k, l1 + dl, &PlanOptions::default()).unwrap();
            prop_assert!(b.total_routing_cost() <= a.total_routing_cost() + 1e-9);
        }
    }
}
