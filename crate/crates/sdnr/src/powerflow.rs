//! Per-scenario AC power flow on a given topology: Newton-Raphson solve,
//! branch-flow and loss evaluation, limit checking, and the polar power-flow
//! Jacobian used by the steady-state stability index.
//!
//! The substation is the slack bus (V = 1.0 p.u., theta = 0); every other bus
//! is PQ with net injections taken from the scenario sample. Open branches
//! contribute nothing: their flows are identically zero and they are absent
//! from the admittance sums.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, SwitchStatus};
use crate::scenario::{net_injections, Sample, ScenarioSet};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold on the infinity norm of the power mismatch, p.u.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub flat_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
            flat_start: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Argument("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Directed flows on one branch in its reference direction: `p_ij` is sent
/// from the `from` end, `p_ji` from the `to` end. Both are positive into the
/// branch, so `p_ij + p_ji` is the branch's active loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchFlow {
    pub p_ij: f64,
    pub q_ij: f64,
    pub p_ji: f64,
    pub q_ji: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    /// Voltage magnitudes, per-unit, indexed by bus id.
    pub v: Vec<f64>,
    /// Voltage angles, radians.
    pub theta: Vec<f64>,
    pub sub_p: f64,
    pub sub_q: f64,
    /// Per-branch flows aligned with branch ids; open branches are all-zero.
    pub flows: Vec<BranchFlow>,
    /// Total active power loss, per-unit.
    pub loss: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
}

/// Exact branch-flow evaluation at a given voltage state. Open branches
/// yield all-zero flows.
pub fn branch_flows(
    net: &Network,
    alpha: &SwitchStatus,
    v: &[f64],
    theta: &[f64],
) -> Result<Vec<BranchFlow>> {
    if alpha.len() != net.n_branches() {
        return Err(Error::Dimension("switch vector length".into()));
    }
    if v.len() != net.n_buses() || theta.len() != net.n_buses() {
        return Err(Error::Dimension("state vector length".into()));
    }
    Ok(net
        .branches
        .iter()
        .map(|br| {
            if !alpha.is_closed(br.id) {
                return BranchFlow::default();
            }
            let (i, j) = (br.from, br.to);
            let (g, b) = (br.g, br.b);
            let tij = theta[i] - theta[j];
            let (sin_ij, cos_ij) = tij.sin_cos();
            BranchFlow {
                p_ij: v[i] * v[i] * g - v[i] * v[j] * (b * sin_ij + g * cos_ij),
                q_ij: -v[i] * v[i] * b - v[i] * v[j] * (g * sin_ij - b * cos_ij),
                p_ji: v[j] * v[j] * g - v[j] * v[i] * (-b * sin_ij + g * cos_ij),
                q_ji: -v[j] * v[j] * b - v[j] * v[i] * (-g * sin_ij - b * cos_ij),
            }
        })
        .collect())
}

/// Computed bus injections: the flow sums `p_i = sum_j p_ij`, `q_i = sum_j q_ij`.
pub(crate) fn bus_injections(net: &Network, flows: &[BranchFlow]) -> (Vec<f64>, Vec<f64>) {
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

fn check_connected(net: &Network, alpha: &SwitchStatus) -> Result<()> {
    crate::network::bfs_tree(net, alpha).map(|_| ())
}

/// Newton-Raphson power flow from a flat start. The closed graph may be
/// meshed (the all-closed probe solves of the reduction algorithms rely on
/// that); callers that require radiality must check [`crate::network::is_radial`]
/// themselves. A disconnected closed graph is a topology error;
/// non-convergence is reported in the returned solution, not as an error.
pub fn solve(
    net: &Network,
    alpha: &SwitchStatus,
    sample: &Sample,
    opts: &SolverOptions,
) -> Result<PowerFlowSolution> {
    let n = net.n_buses();
    let flat = (vec![1.0; n], vec![0.0; n]);
    if !opts.flat_start {
        return Err(Error::Argument(
            "solve() is flat-start only; use solve_with_start for a warm start".into(),
        ));
    }
    solve_with_start(net, alpha, sample, opts, &flat.0, &flat.1)
}

pub fn solve_with_start(
    net: &Network,
    alpha: &SwitchStatus,
    sample: &Sample,
    opts: &SolverOptions,
    v0: &[f64],
    theta0: &[f64],
) -> Result<PowerFlowSolution> {
    opts.validate()?;
    if alpha.len() != net.n_branches() {
        return Err(Error::Dimension("switch vector length".into()));
    }
    check_connected(net, alpha)?;
    let inj = net_injections(sample, net)?;
    let n = net.n_buses();
    let slack = net.substation();

    let mut v = v0.to_vec();
    let mut theta = theta0.to_vec();
    v[slack] = 1.0;
    theta[slack] = 0.0;

    // non-slack bus -> compact index
    let mut idx = vec![usize::MAX; n];
    let mut buses = Vec::with_capacity(n - 1);
    for i in 0..n {
        if i != slack {
            idx[i] = buses.len();
            buses.push(i);
        }
    }
    let m = buses.len();

    let mut iterations = 0usize;
    let mut converged = false;
    let mut max_mismatch = f64::INFINITY;
    let mut flows = branch_flows(net, alpha, &v, &theta)?;

    for _ in 0..=opts.max_iterations {
        let (p_calc, q_calc) = bus_injections(net, &flows);
        max_mismatch = 0.0;
        let mut rhs = DMatrix::zeros(2 * m, 1);
        for (k, &i) in buses.iter().enumerate() {
            let dp = inj.p[i] - p_calc[i];
            let dq = inj.q[i] - q_calc[i];
            rhs[(k, 0)] = dp;
            rhs[(m + k, 0)] = dq;
            max_mismatch = max_mismatch.max(dp.abs()).max(dq.abs());
        }
        if !max_mismatch.is_finite() {
            break;
        }
        if max_mismatch <= opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        let jac = assemble_jacobian(net, alpha, &v, &theta, &p_calc, &q_calc, &idx, m);
        let lu = jac.lu();
        let step = match lu.solve(&rhs) {
            Some(s) => s,
            None => break, // singular Jacobian: report non-convergence
        };
        for (k, &i) in buses.iter().enumerate() {
            theta[i] += step[(k, 0)];
            v[i] += step[(m + k, 0)];
        }
        iterations += 1;
        if v.iter().any(|&x| !x.is_finite() || x <= 1e-9)
            || theta.iter().any(|x| !x.is_finite())
        {
            break;
        }
        flows = branch_flows(net, alpha, &v, &theta)?;
    }

    flows = branch_flows(net, alpha, &v, &theta)?;
    let (p_calc, q_calc) = bus_injections(net, &flows);
    let sub_p = p_calc[slack];
    let sub_q = q_calc[slack];
    // total loss = sum of actual bus injections: computed slack injection
    // plus the specified injections at the PQ buses
    let loss = sub_p + (0..n).filter(|&i| i != slack).map(|i| inj.p[i]).sum::<f64>();
    Ok(PowerFlowSolution {
        v,
        theta,
        sub_p,
        sub_q,
        flows,
        loss,
        converged,
        iterations,
        max_mismatch,
    })
}

/// Probability-weighted expected loss over all scenarios. Any scenario whose
/// power flow fails to converge makes the topology infeasible.
pub fn expected_loss(
    net: &Network,
    alpha: &SwitchStatus,
    scen: &ScenarioSet,
    opts: &SolverOptions,
) -> Result<(f64, Vec<PowerFlowSolution>)> {
    scen.validate()?;
    let sols: Vec<Result<PowerFlowSolution>> = scen
        .scenarios
        .par_iter()
        .map(|sample| solve(net, alpha, sample, opts))
        .collect();
    let mut out = Vec::with_capacity(sols.len());
    for (w, sol) in sols.into_iter().enumerate() {
        let sol = sol?;
        if !sol.converged {
            return Err(Error::Infeasible { scenario: w });
        }
        out.push(sol);
    }
    let expected = scen
        .pi
        .iter()
        .zip(&out)
        .map(|(pi, sol)| pi * sol.loss)
        .sum();
    Ok((expected, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    VoltageLow,
    VoltageHigh,
    Flow,
    SubstationP,
    SubstationQ,
}

/// One limit violation; `magnitude` is the amount by which the limit is
/// exceeded, per-unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub element: usize,
    pub magnitude: f64,
}

/// Check voltage bounds, apparent-flow limits at both branch ends, and the
/// substation import box against a converged solution.
pub fn check_limits(sol: &PowerFlowSolution, net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    for bus in &net.buses {
        let v = sol.v[bus.id];
        if v < bus.v_min {
            out.push(Violation {
                kind: ViolationKind::VoltageLow,
                element: bus.id,
                magnitude: bus.v_min - v,
            });
        } else if v > bus.v_max {
            out.push(Violation {
                kind: ViolationKind::VoltageHigh,
                element: bus.id,
                magnitude: v - bus.v_max,
            });
        }
    }
    for br in &net.branches {
        let f = &sol.flows[br.id];
        let s = (f.p_ij.hypot(f.q_ij)).max(f.p_ji.hypot(f.q_ji));
        if s > br.s_max {
            out.push(Violation {
                kind: ViolationKind::Flow,
                element: br.id,
                magnitude: s - br.s_max,
            });
        }
    }
    let sub = &net.buses[net.substation()];
    if let (Some(p_min), Some(p_max)) = (sub.p_min, sub.p_max) {
        if sol.sub_p < p_min || sol.sub_p > p_max {
            out.push(Violation {
                kind: ViolationKind::SubstationP,
                element: sub.id,
                magnitude: (p_min - sol.sub_p).max(sol.sub_p - p_max),
            });
        }
    }
    if let (Some(q_min), Some(q_max)) = (sub.q_min, sub.q_max) {
        if sol.sub_q < q_min || sol.sub_q > q_max {
            out.push(Violation {
                kind: ViolationKind::SubstationQ,
                element: sub.id,
                magnitude: (q_min - sol.sub_q).max(sol.sub_q - q_max),
            });
        }
    }
    out
}

/// dP/dtheta, dP/dV, dQ/dtheta, dQ/dV blocks with the slack row and column
/// removed. Variable order: angles of all non-slack buses, then magnitudes.
#[allow(clippy::too_many_arguments)]
fn assemble_jacobian(
    net: &Network,
    alpha: &SwitchStatus,
    v: &[f64],
    theta: &[f64],
    p_calc: &[f64],
    q_calc: &[f64],
    idx: &[usize],
    m: usize,
) -> DMatrix<f64> {
    let n = net.n_buses();
    let mut g_diag = vec![0.0; n];
    let mut b_diag = vec![0.0; n];
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for br in &net.branches {
        if !alpha.is_closed(br.id) {
            continue;
        }
        let (i, j) = (br.from, br.to);
        g_diag[i] += br.g;
        g_diag[j] += br.g;
        b_diag[i] += br.b;
        b_diag[j] += br.b;
        // off-diagonal Y entries: G_ij = -g, B_ij = -b
        let (gij, bij) = (-br.g, -br.b);
        let mut fill = |a: usize, bb: usize| {
            if idx[a] == usize::MAX || idx[bb] == usize::MAX {
                return;
            }
            let (ka, kb) = (idx[a], idx[bb]);
            let tab = theta[a] - theta[bb];
            let (s, c) = tab.sin_cos();
            let h = v[a] * v[bb] * (gij * s - bij * c);
            let nn = v[a] * (gij * c + bij * s);
            let mm = -v[a] * v[bb] * (gij * c + bij * s);
            let ll = v[a] * (gij * s - bij * c);
            jac[(ka, kb)] = h;
            jac[(ka, m + kb)] = nn;
            jac[(m + ka, kb)] = mm;
            jac[(m + ka, m + kb)] = ll;
        };
        fill(i, j);
        fill(j, i);
    }
    for i in 0..n {
        let k = idx[i];
        if k == usize::MAX {
            continue;
        }
        jac[(k, k)] = -q_calc[i] - b_diag[i] * v[i] * v[i];
        jac[(k, m + k)] = p_calc[i] / v[i] + g_diag[i] * v[i];
        jac[(m + k, k)] = p_calc[i] - g_diag[i] * v[i] * v[i];
        jac[(m + k, m + k)] = q_calc[i] / v[i] - b_diag[i] * v[i];
    }
    jac
}

/// Power-flow Jacobian of the closed-branch network at a converged solution.
pub fn jacobian(net: &Network, alpha: &SwitchStatus, sol: &PowerFlowSolution) -> Result<DMatrix<f64>> {
    if !sol.converged {
        return Err(Error::Argument(
            "jacobian requires a converged solution".into(),
        ));
    }
    if alpha.len() != net.n_branches() {
        return Err(Error::Dimension("switch vector length".into()));
    }
    let n = net.n_buses();
    let slack = net.substation();
    let mut idx = vec![usize::MAX; n];
    let mut m = 0;
    for (i, slot) in idx.iter_mut().enumerate() {
        if i != slack {
            *slot = m;
            m += 1;
        }
    }
    let (p_calc, q_calc) = bus_injections(net, &sol.flows);
    Ok(assemble_jacobian(
        net, alpha, &sol.v, &sol.theta, &p_calc, &q_calc, &idx, m,
    ))
}

/// Smallest singular value of a dense matrix.
pub fn sigma_min(jac: &DMatrix<f64>) -> Result<f64> {
    if jac.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let svd = jac.clone().svd(false, false);
    svd.singular_values
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.min(s)))
        })
        .ok_or_else(|| Error::Numeric("empty matrix".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, BusKind};
    use approx::assert_relative_eq;

    pub(crate) fn two_bus(g: f64, b: f64) -> Network {
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

    /// Independent closed form for the 2-bus network: high-voltage root of
    /// v^4 + v^2 (2(p r + q x) - 1) + (p^2+q^2)(r^2+x^2) = 0 with z = 1/y.
    pub(crate) fn two_bus_closed_form(g: f64, b: f64, p_load: f64, q_load: f64) -> (f64, f64) {
        let d = g * g + b * b;
        let (r, x) = (g / d, -b / d);
        let beta = 2.0 * (p_load * r + q_load * x) - 1.0;
        let gamma = (p_load * p_load + q_load * q_load) * (r * r + x * x);
        let disc = beta * beta - 4.0 * gamma;
        assert!(disc >= 0.0, "load beyond loadability");
        let v2 = (-beta + disc.sqrt()) / 2.0;
        let v = v2.sqrt();
        let loss = (p_load * p_load + q_load * q_load) * r / v2;
        (v, loss)
    }

    #[test]
    fn open_branch_has_zero_flow() {
        let net = two_bus(1.0, -10.0);
        let alpha = SwitchStatus::with_open(1, &[0]);
        let flows = branch_flows(&net, &alpha, &[1.0, 0.97], &[0.0, -0.05]).unwrap();
        assert_eq!(flows[0], BranchFlow::default());
    }

    #[test]
    fn flat_state_has_zero_flow() {
        let net = two_bus(3.3, -7.7);
        let flows = branch_flows(&net, &net.all_closed(), &[1.0, 1.0], &[0.1, 0.1]).unwrap();
        assert_relative_eq!(flows[0].p_ij, 0.0, epsilon = 1e-14);
        assert_relative_eq!(flows[0].q_ij, 0.0, epsilon = 1e-14);
        assert_relative_eq!(flows[0].p_ji, 0.0, epsilon = 1e-14);
        assert_relative_eq!(flows[0].q_ji, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn flows_match_complex_admittance_formula() {
        // S_ij = V_i (V_i - V_j)^* y^*, evaluated independently
        let (g, b) = (1.0, -10.0);
        let net = two_bus(g, b);
        let (vi, vj, ti, tj) = (1.0, 0.98, 0.02, 0.0);
        let flows = branch_flows(&net, &net.all_closed(), &[vi, vj], &[ti, tj]).unwrap();
        let e_i = nalgebra::Complex::new(vi * ti.cos(), vi * ti.sin());
        let e_j = nalgebra::Complex::new(vj * tj.cos(), vj * tj.sin());
        let y = nalgebra::Complex::new(g, b);
        let s_ij = e_i * (e_i - e_j).conj() * y.conj();
        let s_ji = e_j * (e_j - e_i).conj() * y.conj();
        assert_relative_eq!(flows[0].p_ij, s_ij.re, epsilon = 1e-12);
        assert_relative_eq!(flows[0].q_ij, s_ij.im, epsilon = 1e-12);
        assert_relative_eq!(flows[0].p_ji, s_ji.re, epsilon = 1e-12);
        assert_relative_eq!(flows[0].q_ji, s_ji.im, epsilon = 1e-12);
        // and the spec's scalar expansion of the same quantity
        let expected = vi * vi * g - vi * vj * (b * (ti - tj).sin() + g * (ti - tj).cos());
        assert_relative_eq!(flows[0].p_ij, expected, epsilon = 1e-14);
    }

    #[test]
    fn no_load_solves_flat() {
        let net = two_bus(1.0, -10.0);
        let sample = Sample::zeros("t", 2);
        let sol = solve(&net, &net.all_closed(), &sample, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert_relative_eq!(sol.v[1], 1.0);
        assert_relative_eq!(sol.theta[1], 0.0);
        assert_relative_eq!(sol.loss, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn two_bus_matches_closed_form() {
        let (g, b) = (1.0, -10.0);
        let net = two_bus(g, b);
        let mut sample = Sample::zeros("t", 2);
        sample.p_d[1] = 0.5;
        let opts = SolverOptions {
            tolerance: 1e-12,
            ..SolverOptions::default()
        };
        let sol = solve(&net, &net.all_closed(), &sample, &opts).unwrap();
        assert!(sol.converged);
        let (v_expect, loss_expect) = two_bus_closed_form(g, b, 0.5, 0.0);
        assert_relative_eq!(sol.v[1], v_expect, epsilon = 1e-10);
        assert_relative_eq!(sol.loss, loss_expect, epsilon = 1e-10);
        // loss equals the Eq-(2) branch loss p_ij + p_ji
        let f = &sol.flows[0];
        assert_relative_eq!(sol.loss, f.p_ij + f.p_ji, epsilon = 1e-8);
        assert!(sol.loss >= 0.0);
    }

    #[test]
    fn disconnected_closed_graph_is_topology_error() {
        let net = two_bus(1.0, -10.0);
        let alpha = SwitchStatus::with_open(1, &[0]);
        let sample = Sample::zeros("t", 2);
        assert!(matches!(
            solve(&net, &alpha, &sample, &SolverOptions::default()),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn expected_loss_weights_scenarios() {
        let net = two_bus(1.0, -10.0);
        let mut s = Sample::zeros("t", 2);
        s.p_d[1] = 0.4;
        let single = ScenarioSet::single(s.clone());
        let (c1, sols1) = expected_loss(&net, &net.all_closed(), &single, &SolverOptions::default()).unwrap();
        assert_relative_eq!(c1, sols1[0].loss);
        // two identical scenarios: expectation of a constant
        let pair = ScenarioSet::new(vec![s.clone(), s], vec![0.5, 0.5]).unwrap();
        let (c2, _) = expected_loss(&net, &net.all_closed(), &pair, &SolverOptions::default()).unwrap();
        assert_relative_eq!(c2, c1, epsilon = 1e-14);
    }

    #[test]
    fn limit_checks_report_violations() {
        let net = two_bus(1.0, -10.0);
        let mut sol = PowerFlowSolution {
            v: vec![1.0, 1.0],
            theta: vec![0.0, 0.0],
            sub_p: 0.0,
            sub_q: 0.0,
            flows: vec![BranchFlow::default()],
            loss: 0.0,
            converged: true,
            iterations: 0,
            max_mismatch: 0.0,
        };
        assert!(check_limits(&sol, &net).is_empty());

        sol.v[1] = 0.45;
        let v = check_limits(&sol, &net);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0].kind, ViolationKind::VoltageLow));
        assert_relative_eq!(v[0].magnitude, 0.05, epsilon = 1e-12);

        sol.v[1] = 1.0;
        sol.flows[0] = BranchFlow {
            p_ij: 0.8,
            q_ij: 0.6,
            p_ji: -0.79,
            q_ji: -0.59,
        };
        let mut net2 = net.clone();
        net2.branches[0].s_max = 0.9;
        let v = check_limits(&sol, &net2);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0].kind, ViolationKind::Flow));
        // 0.8^2 + 0.6^2 = 1.0 > 0.81
        assert_relative_eq!(v[0].magnitude, 1.0 - 0.9, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_matches_flat_analytic_two_bus() {
        let (g, b) = (1.3, -7.0);
        let net = two_bus(g, b);
        let sample = Sample::zeros("t", 2);
        let sol = solve(&net, &net.all_closed(), &sample, &SolverOptions::default()).unwrap();
        let jac = jacobian(&net, &net.all_closed(), &sol).unwrap();
        // symbolic differentiation of the 2-bus injections at V=1, theta=0
        assert_relative_eq!(jac[(0, 0)], -b, epsilon = 1e-12);
        assert_relative_eq!(jac[(0, 1)], g, epsilon = 1e-12);
        assert_relative_eq!(jac[(1, 0)], -g, epsilon = 1e-12);
        assert_relative_eq!(jac[(1, 1)], -b, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_requires_convergence() {
        let net = two_bus(1.0, -10.0);
        let sample = Sample::zeros("t", 2);
        let mut sol = solve(&net, &net.all_closed(), &sample, &SolverOptions::default()).unwrap();
        sol.converged = false;
        assert!(jacobian(&net, &net.all_closed(), &sol).is_err());
    }

    #[test]
    fn sigma_min_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 2.0, 0.1]));
        assert_relative_eq!(sigma_min(&m).unwrap(), 0.1, epsilon = 1e-12);
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(sigma_min(&eye).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma_min_rejects_non_finite() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(sigma_min(&m), Err(Error::Numeric(_))));
    }

    #[test]
    fn solving_twice_is_bit_identical() {
        let net = two_bus(1.0, -10.0);
        let mut sample = Sample::zeros("t", 2);
        sample.p_d[1] = 0.3;
        sample.q_d[1] = 0.1;
        let a = solve(&net, &net.all_closed(), &sample, &SolverOptions::default()).unwrap();
        let b = solve(&net, &net.all_closed(), &sample, &SolverOptions::default()).unwrap();
        assert_eq!(a.v, b.v);
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
    }
}
