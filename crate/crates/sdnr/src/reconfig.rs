//! One-stage and two-stage successive branch reduction (SBR): open one
//! branch per loop near the expected minimum-flow point, then refine by
//! close-and-open iterations, scoring candidates with the weighted sum of
//! normalized expected loss and expected stability index.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{bfs_tree, fundamental_cycle, chordless_loops, is_radial, Loop, Network, SwitchStatus};
use crate::powerflow::{check_limits, expected_loss, PowerFlowSolution, SolverOptions};
use crate::scenario::ScenarioSet;
use crate::stability::{Evaluator, Orientation};

/// Weighting of the two objective terms; `c_l_max` and `i_v_max` normalize
/// loss and index to comparable scales.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub k_l: f64,
    /// Signed: negative when the index is higher-is-stable, positive when
    /// lower-is-stable.
    pub k_v: f64,
    pub c_l_max: f64,
    pub i_v_max: f64,
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_l > 0.0) {
            return Err(Error::Argument("k_l must be positive".into()));
        }
        if !(self.c_l_max > 0.0) || !(self.i_v_max > 0.0) {
            return Err(Error::Argument("normalizers must be positive".into()));
        }
        if !self.k_v.is_finite() {
            return Err(Error::Argument("k_v must be finite".into()));
        }
        Ok(())
    }

    /// The sign of `k_v` must reward the stable direction of the index.
    pub fn check_orientation(&self, ev: &Evaluator) -> Result<()> {
        let ok = match ev.kind.orientation {
            Orientation::HigherIsStable => self.k_v <= 0.0,
            Orientation::LowerIsStable => self.k_v >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "k_v = {} is inconsistent with a {:?} index",
                self.k_v, ev.kind.orientation
            )))
        }
    }
}

/// Weighted objective; non-finite inputs propagate as +inf (infeasible).
pub fn objective_score(c_l: f64, i_v: f64, w: &ObjectiveWeights) -> f64 {
    if !c_l.is_finite() || !i_v.is_finite() {
        return f64::INFINITY;
    }
    w.k_l * c_l / w.c_l_max + w.k_v * i_v / w.i_v_max
}

/// Fill in default normalizers where not provided: `c_l_max` is ten times
/// the all-closed expected loss and `i_v_max` the largest exact index over
/// the all-closed per-scenario solutions.
pub fn resolve_weights(
    net: &Network,
    scen: &ScenarioSet,
    k_l: f64,
    k_v: f64,
    c_l_max: Option<f64>,
    i_v_max: Option<f64>,
    opts: &SolverOptions,
) -> Result<ObjectiveWeights> {
    let (c_l_max, i_v_max) = match (c_l_max, i_v_max) {
        (Some(c), Some(i)) => (c, i),
        (c, i) => {
            let all = net.all_closed();
            let (loss0, sols) = expected_loss(net, &all, scen, opts)?;
            let c = c.unwrap_or_else(|| if loss0 > 0.0 { 10.0 * loss0 } else { 1.0 });
            let i = match i {
                Some(i) => i,
                None => {
                    let exact = Evaluator::exact_sigma_min();
                    let max = sols
                        .iter()
                        .map(|sol| exact.evaluate(net, &all, sol))
                        .collect::<Result<Vec<f64>>>()?
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max);
                    if max > 0.0 {
                        max
                    } else {
                        1.0
                    }
                }
            };
            (c, i)
        }
    };
    let w = ObjectiveWeights {
        k_l,
        k_v,
        c_l_max,
        i_v_max,
    };
    w.validate()?;
    Ok(w)
}

/// Expected active power injected from `bus` into the loop: the
/// probability-weighted sum of the flows it sends into its two loop-adjacent
/// branches, direction-corrected to leave the bus.
pub fn loop_injection(
    net: &Network,
    sols: &[PowerFlowSolution],
    pi: &[f64],
    lp: &Loop,
    bus: usize,
) -> Result<f64> {
    let m = lp.len();
    let pos = lp
        .buses
        .iter()
        .position(|&b| b == bus)
        .ok_or_else(|| Error::Argument(format!("bus {bus} is not on the loop")))?;
    if sols.len() != pi.len() {
        return Err(Error::Dimension("one solution per scenario required".into()));
    }
    let adj = [lp.branches[(pos + m - 1) % m], lp.branches[pos]];
    let mut total = 0.0;
    for (sol, &p_w) in sols.iter().zip(pi) {
        let mut sent = 0.0;
        for &e in &adj {
            let br = &net.branches[e];
            let f = &sol.flows[e];
            sent += if br.from == bus { f.p_ij } else { f.p_ji };
        }
        total += p_w * sent;
    }
    Ok(total)
}

/// Cut the cyclic bus sequence at every injecting bus (`injections[k]` aligns
/// with `lp.buses[k]`); each arc between consecutive injectors is one
/// sub-path of branch ids. A single injector yields the whole loop.
pub fn subpaths(lp: &Loop, injections: &[f64]) -> Result<Vec<Vec<usize>>> {
    let m = lp.len();
    if injections.len() != m {
        return Err(Error::Dimension("one injection per loop bus required".into()));
    }
    let injectors: Vec<usize> = (0..m).filter(|&k| injections[k] > 0.0).collect();
    if injectors.is_empty() {
        return Err(Error::Numeric(
            "no loop bus injects power; loop losses must be supplied from somewhere".into(),
        ));
    }
    let n_r = injectors.len();
    let mut paths = Vec::with_capacity(n_r);
    for t in 0..n_r {
        let start = injectors[t];
        let end = injectors[(t + 1) % n_r];
        let span = if n_r == 1 {
            m
        } else {
            (end + m - start) % m
        };
        let arc: Vec<usize> = (0..span).map(|s| lp.branches[(start + s) % m]).collect();
        paths.push(arc);
    }
    Ok(paths)
}

/// Branch of the sub-path carrying the minimum expected absolute active
/// flow; exact ties break toward the lowest branch id.
pub fn min_flow_branch(sub_path: &[usize], sols: &[PowerFlowSolution], pi: &[f64]) -> usize {
    let expected_abs = |e: usize| -> f64 {
        sols.iter()
            .zip(pi)
            .map(|(sol, &p_w)| p_w * sol.flows[e].p_ij.abs())
            .sum()
    };
    let mut best = (f64::INFINITY, usize::MAX);
    for &e in sub_path {
        let val = expected_abs(e);
        if val < best.0 || (val == best.0 && e < best.1) {
            best = (val, e);
        }
    }
    best.1
}

/// Candidate branches around `e`: itself plus its loop neighbor on the side
/// the expected flow leaves from, when that neighbor exists.
pub fn candidate_set(net: &Network, lp: &Loop, e: usize, expected_flow: f64) -> Vec<usize> {
    let br = &net.branches[e];
    let up = lp.neighbor_at(e, br.from);
    let down = lp.neighbor_at(e, br.to);
    let mut set = vec![e];
    if expected_flow > 0.0 {
        if let Some(d) = down {
            set.push(d);
        }
    } else if expected_flow < 0.0 {
        if let Some(u) = up {
            set.push(u);
        }
    }
    set.sort_unstable();
    set.dedup();
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    OneStage,
    StageOneOpening,
    StageTwoCandidate,
}

/// One evaluated candidate topology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateTrace {
    pub stage: Stage,
    /// Outer iteration (0 for stage one / standalone one-stage calls).
    pub outer: usize,
    /// Loop index within an outer iteration.
    pub inner: usize,
    /// The candidate branch opened on top of the base status; `None` for the
    /// aggregate stage-one topology row.
    pub branch: Option<usize>,
    /// Complete opened set of the evaluated topology.
    pub open_set: Vec<usize>,
    pub c_l: f64,
    pub i_v: f64,
    pub score: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbrResult {
    pub alpha_star: SwitchStatus,
    pub objective: f64,
    pub trace: Vec<CandidateTrace>,
    pub outer_iterations: usize,
    pub weights: ObjectiveWeights,
}

/// Feasibility-aware evaluation of one topology: expected loss, expected
/// index under the evaluator, and the weighted score. Non-convergence in any
/// scenario or any limit violation makes the topology infeasible (+inf).
#[derive(Debug, Clone)]
pub struct TopologyEval {
    pub feasible: bool,
    pub c_l: f64,
    pub i_v: f64,
    pub score: f64,
}

pub fn evaluate_topology(
    net: &Network,
    alpha: &SwitchStatus,
    scen: &ScenarioSet,
    w: &ObjectiveWeights,
    ev: &Evaluator,
    opts: &SolverOptions,
) -> Result<TopologyEval> {
    let infeasible = TopologyEval {
        feasible: false,
        c_l: f64::INFINITY,
        i_v: f64::INFINITY,
        score: f64::INFINITY,
    };
    let (c_l, sols) = match expected_loss(net, alpha, scen, opts) {
        Ok(ok) => ok,
        Err(Error::Infeasible { .. }) => return Ok(infeasible),
        Err(e) => return Err(e),
    };
    if sols.iter().any(|sol| !check_limits(sol, net).is_empty()) {
        return Ok(infeasible);
    }
    let i_v = ev.expected_index(net, alpha, scen, &sols)?;
    Ok(TopologyEval {
        feasible: true,
        c_l,
        i_v,
        score: objective_score(c_l, i_v, w),
    })
}

/// The single cycle of the closed subgraph under `base`.
fn single_loop(net: &Network, base: &SwitchStatus) -> Result<Loop> {
    let (parent_edge, _, chords) = bfs_tree(net, base)?;
    match chords.len() {
        1 => Ok(fundamental_cycle(net, &parent_edge, chords[0])),
        k => Err(Error::Argument(format!(
            "one-stage reduction requires exactly one loop, found {k}"
        ))),
    }
}

struct OneStageOutcome {
    /// Winning (branch, score); `None` when every candidate was infeasible.
    best: Option<(usize, f64)>,
    trace: Vec<CandidateTrace>,
}

fn one_stage_inner(
    net: &Network,
    base: &SwitchStatus,
    scen: &ScenarioSet,
    w: &ObjectiveWeights,
    ev: &Evaluator,
    opts: &SolverOptions,
    outer: usize,
    inner: usize,
) -> Result<OneStageOutcome> {
    let lp = single_loop(net, base)?;
    let (_, sols) = expected_loss(net, base, scen, opts)?;

    let injections: Vec<f64> = lp
        .buses
        .iter()
        .map(|&bus| loop_injection(net, &sols, &scen.pi, &lp, bus))
        .collect::<Result<_>>()?;
    let arcs = subpaths(&lp, &injections)?;

    let expected_flow = |e: usize| -> f64 {
        sols.iter()
            .zip(&scen.pi)
            .map(|(sol, &p_w)| p_w * sol.flows[e].p_ij)
            .sum()
    };
    let mut candidates = BTreeSet::new();
    for arc in &arcs {
        let e_hat = min_flow_branch(arc, &sols, &scen.pi);
        for e in candidate_set(net, &lp, e_hat, expected_flow(e_hat)) {
            candidates.insert(e);
        }
    }

    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for &e in &candidates {
        let alpha = base.opening(e);
        let eval = evaluate_topology(net, &alpha, scen, w, ev, opts)?;
        trace.push(CandidateTrace {
            stage: if outer == 0 {
                Stage::OneStage
            } else {
                Stage::StageTwoCandidate
            },
            outer,
            inner,
            branch: Some(e),
            open_set: alpha.open_ids(),
            c_l: eval.c_l,
            i_v: eval.i_v,
            score: eval.score,
            feasible: eval.feasible,
        });
        if eval.feasible {
            let better = match best {
                None => true,
                Some((be, bs)) => eval.score < bs || (eval.score == bs && e < be),
            };
            if better {
                best = Some((e, eval.score));
            }
        }
    }
    Ok(OneStageOutcome { best, trace })
}

/// One-stage SBR on a closed graph with exactly one loop (all branches of
/// `net` closed). Solves the meshed probe flow, splits the loop into
/// sub-paths at the injecting buses, and opens the best-scoring candidate
/// around each sub-path's minimum-flow branch.
pub fn one_stage_sbr(
    net: &Network,
    scen: &ScenarioSet,
    w: &ObjectiveWeights,
    ev: &Evaluator,
    opts: &SolverOptions,
) -> Result<SbrResult> {
    one_stage_sbr_from(net, &net.all_closed(), scen, w, ev, opts)
}

/// One-stage SBR from an initial switch status whose closed graph has
/// exactly one loop (the residual networks of the two-stage refinement).
pub fn one_stage_sbr_from(
    net: &Network,
    base: &SwitchStatus,
    scen: &ScenarioSet,
    w: &ObjectiveWeights,
    ev: &Evaluator,
    opts: &SolverOptions,
) -> Result<SbrResult> {
    w.validate()?;
    w.check_orientation(ev)?;
    let outcome = one_stage_inner(net, base, scen, w, ev, opts, 0, 0)?;
    let (e_star, objective) = outcome.best.ok_or(Error::NoFeasibleTopology)?;
    let alpha_star = base.opening(e_star);
    debug_assert!(is_radial(net, &alpha_star)?);
    Ok(SbrResult {
        alpha_star,
        objective,
        trace: outcome.trace,
        outer_iterations: 0,
        weights: *w,
    })
}

/// Stage one: open the expected-minimum-flow branch of each chordless loop
/// at the all-closed solution, updating any loop that shared the opened
/// branch (symmetric-difference cycle update). Stage two: repeatedly close
/// one opened branch at a time and re-open via the one-stage reduction,
/// until the per-loop objectives agree or `n_max` outer iterations run out.
/// Returns the best radial topology found anywhere along the way.
pub fn two_stage_sbr(
    net: &Network,
    scen: &ScenarioSet,
    w: &ObjectiveWeights,
    ev: &Evaluator,
    n_max: usize,
    opts: &SolverOptions,
) -> Result<SbrResult> {
    w.validate()?;
    w.check_orientation(ev)?;
    if n_max == 0 {
        return Err(Error::Argument("n_max must be >= 1".into()));
    }
    let all = net.all_closed();
    let (_, sols0) = expected_loss(net, &all, scen, opts)?;
    let loops = chordless_loops(net)?;
    let l_count = loops.len();

    let mut trace: Vec<CandidateTrace> = Vec::new();

    if l_count == 0 {
        // already a tree: the all-closed configuration is the only topology
        let eval = evaluate_topology(net, &all, scen, w, ev, opts)?;
        trace.push(CandidateTrace {
            stage: Stage::StageOneOpening,
            outer: 0,
            inner: 0,
            branch: None,
            open_set: vec![],
            c_l: eval.c_l,
            i_v: eval.i_v,
            score: eval.score,
            feasible: eval.feasible,
        });
        if !eval.feasible {
            return Err(Error::NoFeasibleTopology);
        }
        return Ok(SbrResult {
            alpha_star: all,
            objective: eval.score,
            trace,
            outer_iterations: 0,
            weights: *w,
        });
    }

    let expected_abs = |e: usize| -> f64 {
        sols0
            .iter()
            .zip(&scen.pi)
            .map(|(sol, &p_w)| p_w * sol.flows[e].p_ij.abs())
            .sum()
    };

    // stage one over loop branch sets
    let mut sets: Vec<BTreeSet<usize>> = loops
        .iter()
        .map(|lp| lp.branches.iter().copied().collect())
        .collect();
    let mut open_set: Vec<usize> = Vec::with_capacity(l_count);
    for l in 0..l_count {
        let mut best = (f64::INFINITY, usize::MAX);
        for &e in &sets[l] {
            let val = expected_abs(e);
            if val < best.0 || (val == best.0 && e < best.1) {
                best = (val, e);
            }
        }
        let e_open = best.1;
        open_set.push(e_open);
        let shared = sets[l].clone();
        for k in l + 1..l_count {
            if sets[k].contains(&e_open) {
                sets[k] = sets[k].symmetric_difference(&shared).copied().collect();
            }
        }
    }
    let alpha1 = SwitchStatus::with_open(net.n_branches(), &open_set);
    if !is_radial(net, &alpha1)? {
        return Err(Error::Topology(
            "stage-one openings did not produce a spanning tree".into(),
        ));
    }
    let stage1_eval = evaluate_topology(net, &alpha1, scen, w, ev, opts)?;
    trace.push(CandidateTrace {
        stage: Stage::StageOneOpening,
        outer: 0,
        inner: 0,
        branch: None,
        open_set: alpha1.open_ids(),
        c_l: stage1_eval.c_l,
        i_v: stage1_eval.i_v,
        score: stage1_eval.score,
        feasible: stage1_eval.feasible,
    });

    // iterate entries carry (score, open_set); selection prefers stage-two
    // results, then the stage-one topology, on exact ties
    let mut iterates: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut eo = open_set;
    let mut outer_done = 0;
    'outer: for n in 1..=n_max {
        let mut gammas = Vec::with_capacity(l_count);
        for l in 0..l_count {
            let others: Vec<usize> = eo
                .iter()
                .enumerate()
                .filter(|&(idx, _)| idx != l)
                .map(|(_, &e)| e)
                .collect();
            let base = SwitchStatus::with_open(net.n_branches(), &others);
            let outcome = one_stage_inner(net, &base, scen, w, ev, opts, n, l)?;
            trace.extend(outcome.trace);
            match outcome.best {
                Some((e_star, gamma)) => {
                    eo[l] = e_star;
                    let mut open = others;
                    open.push(e_star);
                    open.sort_unstable();
                    iterates.push((gamma, open));
                    gammas.push(gamma);
                }
                None => gammas.push(f64::INFINITY),
            }
        }
        outer_done = n;
        // stop when all per-loop objectives this round agree (relative 1e-9)
        let finite = gammas.iter().all(|g| g.is_finite());
        if finite {
            let max = gammas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = gammas.iter().cloned().fold(f64::INFINITY, f64::min);
            if (max - min).abs() <= 1e-9 * max.abs().max(1.0) {
                break 'outer;
            }
        }
    }

    let mut best: Option<(f64, &[usize])> = None;
    for (gamma, open) in &iterates {
        if best.map_or(true, |(b, _)| *gamma < b) {
            best = Some((*gamma, open));
        }
    }
    if stage1_eval.feasible {
        let better = best.map_or(true, |(b, _)| stage1_eval.score < b);
        if better {
            best = Some((stage1_eval.score, &trace[0].open_set));
        }
    }
    let (objective, open) = best.ok_or(Error::NoFeasibleTopology)?;
    let alpha_star = SwitchStatus::with_open(net.n_branches(), open);
    debug_assert!(is_radial(net, &alpha_star)?);
    Ok(SbrResult {
        alpha_star,
        objective,
        trace,
        outer_iterations: outer_done,
        weights: *w,
    })
}
