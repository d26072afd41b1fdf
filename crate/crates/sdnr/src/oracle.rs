//! Independent ground-truth machinery: exhaustive evaluation of every radial
//! configuration under the exact evaluator, and a backward-forward-sweep
//! power flow used to cross-check the Newton-Raphson solver. Test and
//! acceptance support; not on the optimization hot path.

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{bfs_tree, is_radial, Network, SwitchStatus};
use crate::powerflow::{BranchFlow, PowerFlowSolution, SolverOptions};
use crate::reconfig::{evaluate_topology, ObjectiveWeights};
use crate::scenario::{net_injections, Sample, ScenarioSet};
use crate::stability::Evaluator;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRow {
    pub config: usize,
    pub open: Vec<usize>,
    pub c_l: f64,
    pub i_v: f64,
    pub score: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    /// Row index of the best feasible configuration.
    pub best: Option<usize>,
    pub infeasible_count: usize,
}

impl OracleReport {
    pub fn best_row(&self) -> Option<&OracleRow> {
        self.best.map(|i| &self.rows[i])
    }
}

/// Evaluate the weighted objective for every radial configuration with the
/// exact evaluator. Infeasible configurations are kept in the table but
/// excluded from the optimum.
pub fn brute_force_optimum(
    net: &Network,
    scen: &ScenarioSet,
    w: &ObjectiveWeights,
    ev: &Evaluator,
    opts: &SolverOptions,
    cap: Option<usize>,
) -> Result<OracleReport> {
    if !ev.is_exact() {
        return Err(Error::Argument(
            "the oracle evaluates with the exact index only".into(),
        ));
    }
    w.validate()?;
    let configs: Vec<SwitchStatus> =
        crate::network::enumerate_radial(net, cap).collect::<Result<_>>()?;
    let evals: Vec<Result<(f64, f64, f64, bool)>> = configs
        .par_iter()
        .map(|alpha| {
            let e = evaluate_topology(net, alpha, scen, w, ev, opts)?;
            Ok((e.c_l, e.i_v, e.score, e.feasible))
        })
        .collect();
    let mut rows: Vec<OracleRow> = Vec::with_capacity(configs.len());
    let mut best: Option<usize> = None;
    let mut infeasible = 0usize;
    for (cfg, (alpha, eval)) in configs.iter().zip(evals).enumerate() {
        let (c_l, i_v, score, feasible) = eval?;
        if feasible {
            let better = best.map_or(true, |b| score < rows[b].score);
            if better {
                best = Some(cfg);
            }
        } else {
            infeasible += 1;
        }
        rows.push(OracleRow {
            config: cfg,
            open: alpha.open_ids(),
            c_l,
            i_v,
            score,
            feasible,
        });
    }
    Ok(OracleReport {
        rows,
        best,
        infeasible_count: infeasible,
    })
}

/// Backward-forward sweep on a radial tree: accumulate branch currents from
/// the leaves, update voltages from the substation, repeat until the power
/// mismatch of the sweep's own flows meets the tolerance. Independent of the
/// Newton-Raphson path (complex current arithmetic throughout); its loss is
/// the r|I|^2 sum over closed branches.
pub fn bfs_sweep_pf(
    net: &Network,
    alpha: &SwitchStatus,
    sample: &Sample,
    opts: &SolverOptions,
) -> Result<PowerFlowSolution> {
    opts.validate()?;
    if !is_radial(net, alpha)? {
        return Err(Error::Topology(
            "backward-forward sweep requires a radial topology".into(),
        ));
    }
    let n = net.n_buses();
    let slack = net.substation();
    let (parent_edge, order, _) = bfs_tree(net, alpha)?;
    let inj = net_injections(sample, net)?;

    let z: Vec<Complex<f64>> = net
        .branches
        .iter()
        .map(|br| Complex::new(1.0, 0.0) / Complex::new(br.g, br.b))
        .collect();

    let mut v = vec![Complex::new(1.0, 0.0); n];
    let mut branch_current = vec![Complex::new(0.0, 0.0); net.n_branches()];
    let mut converged = false;
    let mut iterations = 0usize;
    let mut max_mismatch = f64::INFINITY;

    for _ in 0..opts.max_iterations {
        // backward: currents toward the root, leaves first
        let mut node_current = vec![Complex::new(0.0, 0.0); n];
        for &bus in order.iter().rev() {
            if bus == slack {
                continue;
            }
            let s = Complex::new(inj.p[bus], inj.q[bus]);
            // current absorbed at the bus (loads draw, renewables push back)
            let drawn = -(s / v[bus]).conj() + node_current[bus];
            let e = parent_edge[bus];
            branch_current[e] = drawn;
            let br = &net.branches[e];
            let parent = if br.from == bus { br.to } else { br.from };
            node_current[parent] += drawn;
        }
        // forward: voltage drops from the root
        for &bus in &order {
            if bus == slack {
                v[bus] = Complex::new(1.0, 0.0);
                continue;
            }
            let e = parent_edge[bus];
            let br = &net.branches[e];
            let parent = if br.from == bus { br.to } else { br.from };
            v[bus] = v[parent] - z[e] * branch_current[e];
        }
        iterations += 1;

        // convergence on the power mismatch of the sweep's own flows
        let flows = sweep_flows(net, alpha, &v, &branch_current, &parent_edge);
        let (p_calc, q_calc) = flow_sums(net, &flows);
        max_mismatch = 0.0;
        for bus in 0..n {
            if bus == slack {
                continue;
            }
            max_mismatch = max_mismatch
                .max((p_calc[bus] - inj.p[bus]).abs())
                .max((q_calc[bus] - inj.q[bus]).abs());
        }
        if !max_mismatch.is_finite() {
            break;
        }
        if max_mismatch <= opts.tolerance {
            converged = true;
            break;
        }
    }

    let flows = sweep_flows(net, alpha, &v, &branch_current, &parent_edge);
    let (p_calc, q_calc) = flow_sums(net, &flows);
    // independent loss route: ohmic dissipation of the branch currents
    let loss: f64 = net
        .branches
        .iter()
        .filter(|br| alpha.is_closed(br.id))
        .map(|br| {
            let y2 = br.g * br.g + br.b * br.b;
            let r = br.g / y2;
            r * branch_current[br.id].norm_sqr()
        })
        .sum();
    Ok(PowerFlowSolution {
        v: v.iter().map(|c| c.norm()).collect(),
        theta: v.iter().map(|c| c.arg()).collect(),
        sub_p: p_calc[slack],
        sub_q: q_calc[slack],
        flows,
        loss,
        converged,
        iterations,
        max_mismatch,
    })
}

/// Flows from the sweep's complex state: S = V * conj(I) at each end.
fn sweep_flows(
    net: &Network,
    alpha: &SwitchStatus,
    v: &[Complex<f64>],
    branch_current: &[Complex<f64>],
    parent_edge: &[usize],
) -> Vec<BranchFlow> {
    net.branches
        .iter()
        .map(|br| {
            if !alpha.is_closed(br.id) {
                return BranchFlow::default();
            }
            // branch_current flows from the parent toward the child
            let child = if parent_edge[br.from] == br.id {
                br.from
            } else {
                br.to
            };
            let i_pc = branch_current[br.id];
            let (i_from, i_to) = if child == br.to {
                (i_pc, -i_pc)
            } else {
                (-i_pc, i_pc)
            };
            let s_from = v[br.from] * i_from.conj();
            let s_to = v[br.to] * i_to.conj();
            BranchFlow {
                p_ij: s_from.re,
                q_ij: s_from.im,
                p_ji: s_to.re,
                q_ji: s_to.im,
            }
        })
        .collect()
}

fn flow_sums(net: &Network, flows: &[BranchFlow]) -> (Vec<f64>, Vec<f64>) {
    let n = net.n_buses();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for br in &net.branches {
        let f = &flows[br.id];
        p[br.from] += f.p_ij;
        q[br.from] += f.q_ij;
        p[br.to] += f.p_ji;
        q[br.to] += f.q_ji;
    }
    (p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, BusKind};
    use crate::powerflow::solve;
    use approx::assert_relative_eq;

    fn two_bus(g: f64, b: f64) -> Network {
        Network {
            base_mva: 10.0,
            buses: vec![
                Bus {
                    id: 0,
                    kind: BusKind::Substation,
                    v_min: 0.5,
                    v_max: 1.5,
                    p_min: Some(-10.0),
                    p_max: Some(10.0),
                    q_min: Some(-10.0),
                    q_max: Some(10.0),
                },
                Bus {
                    id: 1,
                    kind: BusKind::NonSubstation,
                    v_min: 0.5,
                    v_max: 1.5,
                    p_min: None,
                    p_max: None,
                    q_min: None,
                    q_max: None,
                },
            ],
            branches: vec![Branch {
                id: 0,
                from: 0,
                to: 1,
                g,
                b,
                s_max: 10.0,
                switchable: true,
            }],
        }
    }

    #[test]
    fn sweep_no_load_is_flat() {
        let net = two_bus(1.0, -10.0);
        let sol = bfs_sweep_pf(&net, &net.all_closed(), &Sample::zeros("t", 2), &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.v[1], 1.0);
        assert_relative_eq!(sol.loss, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sweep_matches_two_bus_closed_form() {
        let (g, b) = (1.0, -10.0);
        let net = two_bus(g, b);
        let mut sample = Sample::zeros("t", 2);
        sample.p_d[1] = 0.5;
        let opts = SolverOptions {
            tolerance: 1e-10,
            max_iterations: 200,
            flat_start: true,
        };
        let sol = bfs_sweep_pf(&net, &net.all_closed(), &sample, &opts).unwrap();
        assert!(sol.converged);
        // closed-form high-voltage root
        let d = g * g + b * b;
        let (r, x) = (g / d, -b / d);
        let beta = 2.0 * 0.5 * r - 1.0;
        let gamma = 0.25 * (r * r + x * x);
        let v_expect = ((-beta + (beta * beta - 4.0 * gamma).sqrt()) / 2.0).sqrt();
        assert_relative_eq!(sol.v[1], v_expect, epsilon = 1e-8);
        let loss_expect = 0.25 * r / (v_expect * v_expect);
        assert_relative_eq!(sol.loss, loss_expect, epsilon = 1e-8);
    }

    #[test]
    fn sweep_rejects_meshed_topology() {
        let mut net = two_bus(1.0, -10.0);
        net.buses.push(Bus {
            id: 2,
            kind: BusKind::NonSubstation,
            v_min: 0.5,
            v_max: 1.5,
            p_min: None,
            p_max: None,
            q_min: None,
            q_max: None,
        });
        net.branches.push(Branch {
            id: 1,
            from: 1,
            to: 2,
            g: 1.0,
            b: -5.0,
            s_max: 10.0,
            switchable: true,
        });
        net.branches.push(Branch {
            id: 2,
            from: 2,
            to: 0,
            g: 1.0,
            b: -5.0,
            s_max: 10.0,
            switchable: true,
        });
        assert!(matches!(
            bfs_sweep_pf(&net, &net.all_closed(), &Sample::zeros("t", 3), &SolverOptions::default()),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn sweep_agrees_with_newton_on_two_bus() {
        let net = two_bus(1.0, -10.0);
        let mut sample = Sample::zeros("t", 2);
        sample.p_d[1] = 0.4;
        sample.q_d[1] = 0.15;
        let nr = solve(&net, &net.all_closed(), &sample, &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            tolerance: 1e-10,
            max_iterations: 300,
            flat_start: true,
        };
        let sw = bfs_sweep_pf(&net, &net.all_closed(), &sample, &opts).unwrap();
        assert!(nr.converged && sw.converged);
        assert_relative_eq!(nr.v[1], sw.v[1], epsilon = 1e-6);
        assert_relative_eq!(nr.loss, sw.loss, epsilon = 1e-8);
    }

    #[test]
    fn oracle_on_tree_network_has_single_row() {
        let mut net = two_bus(1.0, -10.0);
        net.branches[0].s_max = 10.0;
        let mut sample = Sample::zeros("t", 2);
        sample.p_d[1] = 0.1;
        let scen = ScenarioSet::single(sample);
        let w = ObjectiveWeights {
            k_l: 0.5,
            k_v: -0.5,
            c_l_max: 1.0,
            i_v_max: 10.0,
        };
        let report = brute_force_optimum(
            &net,
            &scen,
            &w,
            &Evaluator::exact_sigma_min(),
            &SolverOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.best, Some(0));
        assert_eq!(report.infeasible_count, 0);
    }

    fn ring4() -> Network {
        let mk = |id, from, to| Branch {
            id,
            from,
            to,
            g: 2.0,
            b: -8.0,
            s_max: 10.0,
            switchable: true,
        };
        Network {
            base_mva: 10.0,
            buses: (0..4)
                .map(|id| Bus {
                    id,
                    kind: if id == 0 {
                        BusKind::Substation
                    } else {
                        BusKind::NonSubstation
                    },
                    v_min: 0.5,
                    v_max: 1.5,
                    p_min: None,
                    p_max: None,
                    q_min: None,
                    q_max: None,
                })
                .collect(),
            branches: vec![mk(0, 0, 1), mk(1, 1, 2), mk(2, 2, 3), mk(3, 3, 0)],
        }
    }

    #[test]
    fn oracle_cap_propagates_truncation() {
        // 4-bus ring has 4 configurations; cap of 2 must truncate
        let net = ring4();
        let scen = ScenarioSet::single(Sample::zeros("t", 4));
        let w = ObjectiveWeights {
            k_l: 1.0,
            k_v: 0.0,
            c_l_max: 1.0,
            i_v_max: 1.0,
        };
        let got = brute_force_optimum(
            &net,
            &scen,
            &w,
            &Evaluator::exact_sigma_min(),
            &SolverOptions::default(),
            Some(2),
        );
        assert!(matches!(got, Err(Error::EnumerationTruncated { yielded: 2 })));
    }
}
