//! Uniform interface for voltage-stability index evaluation: exact smallest
//! singular value of the power-flow Jacobian, or a trained surrogate
//! predictor, plus expectation over scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, SwitchStatus};
use crate::powerflow::{jacobian, sigma_min, PowerFlowSolution};
use crate::scenario::ScenarioSet;
use crate::surrogate::{encode, predict, PredictorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexName {
    SigmaMin,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsStable,
    LowerIsStable,
}

/// Which stability index a value refers to and which direction is stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexKind {
    pub name: IndexName,
    pub orientation: Orientation,
}

impl IndexKind {
    /// Smallest singular value of the power-flow Jacobian; larger is farther
    /// from voltage collapse.
    pub fn sigma_min() -> Self {
        Self {
            name: IndexName::SigmaMin,
            orientation: Orientation::HigherIsStable,
        }
    }

    /// Externally labeled index (e.g. a severity measure from a time-domain
    /// simulator); smaller is more stable.
    pub fn external() -> Self {
        Self {
            name: IndexName::External,
            orientation: Orientation::LowerIsStable,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name == IndexName::SigmaMin && self.orientation != Orientation::HigherIsStable {
            return Err(Error::Argument(
                "sigma_min is a higher-is-stable index".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum EvaluatorMode {
    Exact,
    Surrogate(Box<PredictorModel>),
}

/// Stability-index evaluator used by the reconfiguration search.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub mode: EvaluatorMode,
    pub kind: IndexKind,
}

impl Evaluator {
    pub fn exact_sigma_min() -> Self {
        Self {
            mode: EvaluatorMode::Exact,
            kind: IndexKind::sigma_min(),
        }
    }

    /// Surrogate evaluation with a trained model; the index kind is the
    /// model's training target.
    pub fn surrogate(model: PredictorModel) -> Result<Self> {
        model.target_kind.validate()?;
        Ok(Self {
            kind: model.target_kind,
            mode: EvaluatorMode::Surrogate(Box::new(model)),
        })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.mode, EvaluatorMode::Exact)
    }

    /// Index value for one converged power-flow solution.
    pub fn evaluate(
        &self,
        net: &Network,
        alpha: &SwitchStatus,
        sol: &PowerFlowSolution,
    ) -> Result<f64> {
        if !sol.converged {
            return Err(Error::Argument(
                "stability evaluation requires a converged solution".into(),
            ));
        }
        match &self.mode {
            EvaluatorMode::Exact => {
                if self.kind.name != IndexName::SigmaMin {
                    return Err(Error::Argument(
                        "no exact evaluation route for an external index".into(),
                    ));
                }
                sigma_min(&jacobian(net, alpha, sol)?)
            }
            EvaluatorMode::Surrogate(model) => predict(model, &encode(net, alpha, sol)?),
        }
    }

    /// Probability-weighted expected index over one solution per scenario.
    pub fn expected_index(
        &self,
        net: &Network,
        alpha: &SwitchStatus,
        scen: &ScenarioSet,
        sols: &[PowerFlowSolution],
    ) -> Result<f64> {
        if sols.len() != scen.len() {
            return Err(Error::Argument(format!(
                "{} solutions for {} scenarios",
                sols.len(),
                scen.len()
            )));
        }
        let mut total = 0.0;
        for (pi, sol) in scen.pi.iter().zip(sols) {
            total += pi * self.evaluate(net, alpha, sol)?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, BusKind};
    use crate::powerflow::{solve, SolverOptions};
    use crate::scenario::Sample;
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
                    p_min: None,
                    p_max: None,
                    q_min: None,
                    q_max: None,
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
    fn sigma_min_kind_must_be_higher_is_stable() {
        let bad = IndexKind {
            name: IndexName::SigmaMin,
            orientation: Orientation::LowerIsStable,
        };
        assert!(bad.validate().is_err());
        assert!(IndexKind::sigma_min().validate().is_ok());
        assert!(IndexKind::external().validate().is_ok());
    }

    #[test]
    fn exact_evaluation_matches_analytic_two_bus() {
        let (g, b) = (1.0, -10.0);
        let net = two_bus(g, b);
        let sample = Sample::zeros("t", 2);
        let sol = solve(&net, &net.all_closed(), &sample, &SolverOptions::default()).unwrap();
        let ev = Evaluator::exact_sigma_min();
        let value = ev.evaluate(&net, &net.all_closed(), &sol).unwrap();
        // flat no-load Jacobian [[-b, g], [-g, -b]]: singular values are both
        // sqrt(g^2 + b^2) since J^T J = (g^2+b^2) I
        assert_relative_eq!(value, (g * g + b * b).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn unconverged_solution_is_rejected() {
        let net = two_bus(1.0, -10.0);
        let sample = Sample::zeros("t", 2);
        let mut sol = solve(&net, &net.all_closed(), &sample, &SolverOptions::default()).unwrap();
        sol.converged = false;
        let ev = Evaluator::exact_sigma_min();
        assert!(ev.evaluate(&net, &net.all_closed(), &sol).is_err());
    }

    #[test]
    fn expected_index_is_pi_weighted() {
        let net = two_bus(1.0, -10.0);
        let mut s1 = Sample::zeros("a", 2);
        s1.p_d[1] = 0.2;
        let mut s2 = Sample::zeros("b", 2);
        s2.p_d[1] = 0.6;
        let scen = ScenarioSet::new(vec![s1, s2], vec![0.3, 0.7]).unwrap();
        let opts = SolverOptions::default();
        let alpha = net.all_closed();
        let sols: Vec<_> = scen
            .scenarios
            .iter()
            .map(|s| solve(&net, &alpha, s, &opts).unwrap())
            .collect();
        let ev = Evaluator::exact_sigma_min();
        let expected = ev.expected_index(&net, &alpha, &scen, &sols).unwrap();
        let manual = 0.3 * ev.evaluate(&net, &alpha, &sols[0]).unwrap()
            + 0.7 * ev.evaluate(&net, &alpha, &sols[1]).unwrap();
        assert_relative_eq!(expected, manual, epsilon = 1e-14);
        // single scenario reduces to a single evaluation
        let one = ScenarioSet::single(scen.scenarios[0].clone());
        let got = ev
            .expected_index(&net, &alpha, &one, &sols[..1])
            .unwrap();
        assert_relative_eq!(got, ev.evaluate(&net, &alpha, &sols[0]).unwrap());
    }

    #[test]
    fn missing_solutions_are_an_argument_error() {
        let net = two_bus(1.0, -10.0);
        let scen = ScenarioSet::single(Sample::zeros("t", 2));
        let ev = Evaluator::exact_sigma_min();
        assert!(matches!(
            ev.expected_index(&net, &net.all_closed(), &scen, &[]),
            Err(Error::Argument(_))
        ));
    }
}
