use highs::{HighsModelStatus, RowProblem, Sense};

use super::{MilpBackend, MilpProblem, MilpSolution, SolveError, SolveOptions, VarKind};

#[derive(Debug, Clone, Default)]
pub struct HighsBackend;

impl MilpBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve(&self, problem: &MilpProblem, options: &SolveOptions) -> Result<MilpSolution, SolveError> {
        let mut pb = RowProblem::default();
        let cols: Vec<_> = problem
            .vars
            .iter()
            .zip(&problem.objective)
            .map(|(v, &c)| match v.kind {
                VarKind::Binary => pb.add_integer_column(c, v.lower..=v.upper),
                VarKind::Continuous => pb.add_column(c, v.lower..=v.upper),
            })
            .collect();
        for row in &problem.rows {
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.terms.len());
            for &(v, a) in &row.terms {
                match merged.iter_mut().find(|(m, _)| *m == v.0) {
                    Some(e) => e.1 += a,
                    None => merged.push((v.0, a)),
                }
            }
            pb.add_row(row.lower..=row.upper, merged.into_iter().map(|(v, a)| (cols[v], a)));
        }
        let has_integers = problem.vars.iter().any(|v| v.kind == VarKind::Binary);

        let mut model = pb.optimise(Sense::Minimise);
        if !options.verbose {
            model.make_quiet();
        }
        model.set_option("threads", 1);
        model.set_option("mip_rel_gap", options.relative_gap);
        if let Some(t) = options.time_limit {
            model.set_option("time_limit", t);
        }
        let solved = model
            .try_solve()
            .map_err(|s| SolveError::Backend(format!("{s:?}")))?;

        let extract = || {
            let values = solved.get_solution().columns().to_vec();
            let objective = problem.objective_value(&values);
            let (gap, dual_bound) = if has_integers {
                let dual = solved
                    .double_info_value(c"mip_dual_bound")
                    .unwrap_or(f64::NEG_INFINITY);
                (solved.mip_gap(), dual)
            } else {
                (0.0, objective)
            };
            MilpSolution {
                values,
                objective,
                dual_bound,
                gap,
            }
        };
        match solved.status() {
            HighsModelStatus::Optimal => Ok(extract()),
            HighsModelStatus::Infeasible => Err(SolveError::Infeasible),
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                Err(SolveError::Unbounded)
            }
            HighsModelStatus::ReachedTimeLimit => {
                let has_incumbent = solved
                    .int_info_value(c"primal_solution_status")
                    .is_ok_and(|s| s == 2);
                Err(SolveError::TimeLimit {
                    incumbent: has_incumbent.then(|| Box::new(extract())),
                })
            }
            other => Err(SolveError::Backend(format!("unexpected status {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_milp() {
        // min -x - y, x + 2y <= 3.5, x binary, 0 <= y <= 10
        let mut pb = MilpProblem::new();
        let x = pb.add_binary();
        let y = pb.add_var(0.0, 10.0);
        pb.add_le(vec![(x, 1.0), (y, 2.0)], 3.5);
        pb.set_objective(&[(x, -1.0), (y, -1.0)]);
        let sol = HighsBackend.solve(&pb, &SolveOptions::default()).unwrap();
        assert!((sol.value(x) - 1.0).abs() < 1e-9);
        assert!((sol.value(y) - 1.25).abs() < 1e-9);
        assert!((sol.objective + 2.25).abs() < 1e-9);
    }

    #[test]
    fn infeasible_reported() {
        let mut pb = MilpProblem::new();
        let x = pb.add_var(0.0, 1.0);
        pb.add_ge(vec![(x, 1.0)], 2.0);
        assert_eq!(
            HighsBackend.solve(&pb, &SolveOptions::default()),
            Err(SolveError::Infeasible)
        );
    }
}
