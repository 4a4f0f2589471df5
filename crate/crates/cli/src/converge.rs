//! Refinement driver: reruns a grid-based scenario with the spacing halved
//! at each level and tabulates the observed order.

use crate::report::{num, Check, TaskOutput};
use crate::scenario::{Scenario, Task};
use crate::tasks::{
    flow_config, geon_flux_mass, observed_orders, order_cell, refined_points, residual_at,
    run_flow,
};
use crate::CliError;

pub fn converge(s: &Scenario, levels: usize) -> Result<TaskOutput, CliError> {
    if !(2..=6).contains(&levels) {
        return Err(CliError::Schema(format!("levels = {levels} outside 2..=6")));
    }
    if !s.task.grid_based() {
        return Err(CliError::Schema(format!(
            "task {} has no grid to refine",
            s.task.name()
        )));
    }
    let (base, quantity) = match s.task {
        Task::GeonMass => (250, "flux mass relative error"),
        Task::FlowPde => (101, "log-mass slope error"),
        _ => (101, "scalar law residual"),
    };
    let base = s.parameters.grid.map_or(base, |g| g.points);
    let points: Vec<usize> = (0..levels).map(|l| refined_points(base, l)).collect();
    let mut errors = Vec::with_capacity(levels);
    for &p in &points {
        let e = match s.task {
            Task::GeonMass => {
                let (exact, ch, _) = geon_flux_mass(s, p)?;
                ((ch - exact) / exact).abs()
            }
            Task::FlowPde => {
                let mut cfg = flow_config(s, p);
                cfg.points = p;
                let o = run_flow(s, cfg)?;
                match o.slope {
                    Some(slope) => (slope + (s.n() - 2) as f64).abs(),
                    None => o.max_abs_mass,
                }
            }
            _ => residual_at(s, p)?.0,
        };
        errors.push(e);
    }
    let orders = observed_orders(&errors, 1e-13);
    let mut out = TaskOutput::default();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0] || w[0].max(w[1]) <= 1e-13);
    out.checks.push(Check::new(
        format!("{quantity} decreases under refinement"),
        monotone,
        errors
            .iter()
            .map(|e| format!("{e:.3e}"))
            .collect::<Vec<_>>()
            .join(" > "),
    ));
    out.table(
        "orders",
        "level,points,error,observed_order",
        points.iter().enumerate().map(|(l, p)| {
            let o = if l == 0 { String::new() } else { order_cell(orders[l - 1]) };
            format!("{l},{p},{},{o}", num(errors[l]))
        }),
    );
    out.put("quantity", quantity);
    out.put("points", &points);
    out.put("errors", &errors);
    out.put(
        "observed_orders",
        orders.iter().map(|o| order_cell(*o)).collect::<Vec<_>>(),
    );
    Ok(out)
}
