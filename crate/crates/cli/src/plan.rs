use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use snspd_core::planner::{
    load_survey, select_and_assign, survey_to_csv, synthetic_survey, PlanError, PlanOptions, PortGrid, SurveyModel,
};

use crate::args::{PlanArgs, SurveyArgs};
use crate::{emit, stdout, usage, write_file, Context, RunManifest};

pub const SUMMARY_HEADER: &str = "lambda,solver,k,eligible,candidates,total_score,total_routing_cost,objective";

pub fn run(a: &PlanArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&a.survey).with_context(|| format!("reading {}", a.survey.display()))?;
    let records = load_survey(&text).with_context(|| format!("survey {}", a.survey.display()))?;
    let grid = PortGrid {
        rows: a.grid.0,
        cols: a.grid.1,
        ..PortGrid::default()
    };
    if let Some(&(id, port)) = a.exclude.iter().find(|e| e.1 >= grid.ports()) {
        return Err(usage(format!("exclusion {id}:{port}: grid has {} ports", grid.ports())));
    }
    let options = PlanOptions {
        solver: a.solver.clone(),
        exclusions: a.exclude.iter().copied().collect(),
        ..PlanOptions::default()
    };
    let sweep = !a.lambda_sweep.is_empty();
    let lambdas = if sweep { a.lambda_sweep.clone() } else { vec![a.lambda] };

    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut costs = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let plan = select_and_assign(&records, &grid, a.k, lambda, &options).map_err(|e| match e {
            PlanError::UnknownSolver(_) | PlanError::GridTooSmall { .. } => usage(e.to_string()),
            other => anyhow::Error::new(other),
        })?;
        let file = if sweep { format!("assignment_lambda_{lambda}.csv") } else { "assignment.csv".to_string() };
        write_file(&a.out.join(file), plan.to_csv())?;
        summary.push_str(&format!(
            "{lambda},{},{},{},{},{:.6},{:.6},{:.6}\n",
            plan.solver,
            plan.entries.len(),
            plan.eligible,
            plan.candidates,
            plan.total_score(),
            plan.total_routing_cost(),
            plan.objective()
        ));
        eprint!("{}", plan.summary());
        costs.push((lambda, plan.total_routing_cost()));
    }
    write_file(&a.out.join("summary.csv"), &summary)?;
    stdout(&summary)?;
    RunManifest::new("plan", ctx, None, None, &a.out, started).write(true)?;

    if sweep {
        let mut sorted = costs.clone();
        sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
        match sorted.windows(2).find(|w| w[1].1 > w[0].1 + 1e-9) {
            None => eprintln!("routing cost non-increasing over λ: ok"),
            // a heuristic need not be monotone in λ
            Some(w) if a.solver == "greedy" => eprintln!(
                "warning: routing cost rose from {:.6} at λ={} to {:.6} at λ={}",
                w[0].1, w[0].0, w[1].1, w[1].0
            ),
            Some(w) => bail!(
                "routing cost rose from {:.6} at λ={} to {:.6} at λ={}",
                w[0].1,
                w[0].0,
                w[1].1,
                w[1].0
            ),
        }
    }
    Ok(())
}

pub fn run_survey(a: &SurveyArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    if a.per_edge == 0 {
        return Err(usage("--per-edge must be positive"));
    }
    let model = SurveyModel {
        per_edge: a.per_edge,
        ..SurveyModel::default()
    };
    let csv = survey_to_csv(&synthetic_survey(&model, a.seed));
    emit(a.out.as_deref(), &csv)?;
    if let Some(p) = &a.out {
        RunManifest::new("survey", ctx, None, Some(a.seed), p, started).write(false)?;
    }
    Ok(())
}
