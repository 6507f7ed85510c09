//! Finite DEC-POMDP instances.
//!
//! A [`DecPomdp`] holds dense tables indexed by state, joint action and joint
//! observation. Joint actions and joint observations are encoded as mixed-radix
//! integers with agent 0 as the most significant digit, so iterating
//! `0..n_joint_actions()` visits joint actions in lexicographic order.

mod builtin;
mod parse;
pub mod random;

use std::fmt;

use thiserror::Error;

pub use builtin::{builtin, BUILTIN_NAMES};
pub use parse::{parse_model, serialize_model, ParseError, ParseErrorKind};

/// Tolerance used for every row-sum check.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// A probability distribution over the states of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    weights: Vec<f64>,
}

impl StateDistribution {
    /// Builds a normalized distribution, rejecting negative or non-finite
    /// weights and sums further than [`PROBABILITY_TOLERANCE`] from one.
    pub fn new(weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::EmptySet("states"));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(ModelError::BadDistribution(format!("weight {bad} is not a probability")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(ModelError::BadDistribution(format!("weights sum to {sum}")));
        }
        Ok(StateDistribution { weights })
    }

    /// Unchecked construction; [`DecPomdp::validate`] reports any problem.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        StateDistribution { weights }
    }

    pub fn uniform(n_states: usize) -> Self {
        StateDistribution { weights: vec![1.0 / n_states as f64; n_states] }
    }

    pub fn point_mass(n_states: usize, state: usize) -> Self {
        let mut weights = vec![0.0; n_states];
        weights[state] = 1.0;
        StateDistribution { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Expectation of a per-state quantity.
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("the {0} set must not be empty")]
    EmptySet(&'static str),
    #[error("table shape mismatch: {0}")]
    Shape(String),
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("unknown built-in problem `{0}` (expected one of tiger-a, tiger-b, channel)")]
    UnknownBuiltin(String),
    #[error("model failed validation:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n")
}

/// One broken invariant, with the offending entry spelled out by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TransitionRowSum { state: String, joint_action: String, sum: f64 },
    ObservationRowSum { next_state: String, joint_action: String, sum: f64 },
    ProbabilityOutOfRange { table: &'static str, entry: String, value: f64 },
    NonFiniteReward { state: String, joint_action: String, value: f64 },
    StartSum { sum: f64 },
    StartOutOfRange { state: String, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TransitionRowSum { state, joint_action, sum } => {
                write!(f, "transition row T: {state} : {joint_action} sums to {sum}")
            }
            Violation::ObservationRowSum { next_state, joint_action, sum } => {
                write!(f, "observation row O: {next_state} : {joint_action} sums to {sum}")
            }
            Violation::ProbabilityOutOfRange { table, entry, value } => {
                write!(f, "{table} entry {entry} = {value} is outside [0, 1]")
            }
            Violation::NonFiniteReward { state, joint_action, value } => {
                write!(f, "reward R: {state} : {joint_action} = {value} is not finite")
            }
            Violation::StartSum { sum } => write!(f, "start distribution sums to {sum}"),
            Violation::StartOutOfRange { state, value } => {
                write!(f, "start probability of {state} = {value} is outside [0, 1]")
            }
        }
    }
}

/// A finite-horizon decentralized POMDP without the horizon, which is a
/// solve-time parameter.
///
/// Tables:
/// - `transition[(s * JA + ja) * S + s']` = P(s' | s, ja)
/// - `observation[(s' * JA + ja) * JO + jo]` = O(jo | s', ja)
/// - `reward[s * JA + ja]` = R(s, ja)
#[derive(Debug, Clone, PartialEq)]
pub struct DecPomdp {
    states: Vec<String>,
    actions: Vec<Vec<String>>,
    observations: Vec<Vec<String>>,
    transition: Vec<f64>,
    observation: Vec<f64>,
    reward: Vec<f64>,
    start: StateDistribution,
    n_joint_actions: usize,
    n_joint_observations: usize,
}

/// Raw tables handed to [`DecPomdp::new`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub states: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub observations: Vec<Vec<String>>,
    pub transition: Vec<f64>,
    pub observation: Vec<f64>,
    pub reward: Vec<f64>,
    pub start: Vec<f64>,
}

impl DecPomdp {
    /// Builds and validates a model.
    pub fn new(parts: ModelParts) -> Result<Self, ModelError> {
        let model = Self::new_unvalidated(parts)?;
        model.validate().map_err(ModelError::Invalid)?;
        Ok(model)
    }

    /// Builds a model checking only table shapes. Call [`validate`](Self::validate)
    /// before solving it.
    pub fn new_unvalidated(parts: ModelParts) -> Result<Self, ModelError> {
        let ModelParts { states, actions, observations, transition, observation, reward, start } =
            parts;
        if states.is_empty() {
            return Err(ModelError::EmptySet("states"));
        }
        if actions.is_empty() {
            return Err(ModelError::EmptySet("agents"));
        }
        if actions.len() != observations.len() {
            return Err(ModelError::Shape(format!(
                "{} action sets but {} observation sets",
                actions.len(),
                observations.len()
            )));
        }
        if actions.iter().any(Vec::is_empty) {
            return Err(ModelError::EmptySet("actions"));
        }
        if observations.iter().any(Vec::is_empty) {
            return Err(ModelError::EmptySet("observations"));
        }
        let n_joint_actions = checked_product(actions.iter().map(Vec::len))?;
        let n_joint_observations = checked_product(observations.iter().map(Vec::len))?;
        let s = states.len();
        let expect = |name: &str, got: usize, want: Option<usize>| match want {
            Some(w) if w == got => Ok(()),
            _ => Err(ModelError::Shape(format!("{name} table has {got} entries, expected {want:?}"))),
        };
        expect("transition", transition.len(), s.checked_mul(n_joint_actions).and_then(|x| x.checked_mul(s)))?;
        expect(
            "observation",
            observation.len(),
            s.checked_mul(n_joint_actions).and_then(|x| x.checked_mul(n_joint_observations)),
        )?;
        expect("reward", reward.len(), s.checked_mul(n_joint_actions))?;
        expect("start", start.len(), Some(s))?;
        Ok(DecPomdp {
            states,
            actions,
            observations,
            transition,
            observation,
            reward,
            start: StateDistribution::from_raw(start),
            n_joint_actions,
            n_joint_observations,
        })
    }

    /// Checks every table invariant and returns all violations found.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let s_count = self.n_states();
        for s in 0..s_count {
            for ja in 0..self.n_joint_actions {
                let row = self.transition_row(s, ja);
                for (s2, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        out.push(Violation::ProbabilityOutOfRange {
                            table: "transition",
                            entry: format!(
                                "T: {} : {} : {}",
                                self.states[s],
                                self.joint_action_label(ja),
                                self.states[s2]
                            ),
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if !((sum - 1.0).abs() <= PROBABILITY_TOLERANCE) {
                    out.push(Violation::TransitionRowSum {
                        state: self.states[s].clone(),
                        joint_action: self.joint_action_label(ja),
                        sum,
                    });
                }
                let r = self.reward(s, ja);
                if !r.is_finite() {
                    out.push(Violation::NonFiniteReward {
                        state: self.states[s].clone(),
                        joint_action: self.joint_action_label(ja),
                        value: r,
                    });
                }
            }
        }
        for s2 in 0..s_count {
            for ja in 0..self.n_joint_actions {
                let row = self.observation_row(s2, ja);
                for (jo, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        out.push(Violation::ProbabilityOutOfRange {
                            table: "observation",
                            entry: format!(
                                "O: {} : {} : {}",
                                self.states[s2],
                                self.joint_action_label(ja),
                                self.joint_observation_label(jo)
                            ),
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if !((sum - 1.0).abs() <= PROBABILITY_TOLERANCE) {
                    out.push(Violation::ObservationRowSum {
                        next_state: self.states[s2].clone(),
                        joint_action: self.joint_action_label(ja),
                        sum,
                    });
                }
            }
        }
        for (s, &p) in self.start.weights().iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                out.push(Violation::StartOutOfRange { state: self.states[s].clone(), value: p });
            }
        }
        let sum = self.start.sum();
        if !((sum - 1.0).abs() <= PROBABILITY_TOLERANCE) {
            out.push(Violation::StartSum { sum });
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// The same model started from a different state distribution.
    pub fn with_start(&self, start: StateDistribution) -> Self {
        assert_eq!(start.len(), self.n_states(), "start distribution has the wrong length");
        DecPomdp { start, ..self.clone() }
    }

    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self, agent: usize) -> usize {
        self.actions[agent].len()
    }

    pub fn n_observations(&self, agent: usize) -> usize {
        self.observations[agent].len()
    }

    pub fn n_joint_actions(&self) -> usize {
        self.n_joint_actions
    }

    pub fn n_joint_observations(&self) -> usize {
        self.n_joint_observations
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self, agent: usize) -> &[String] {
        &self.actions[agent]
    }

    pub fn observations(&self, agent: usize) -> &[String] {
        &self.observations[agent]
    }

    pub fn start(&self) -> &StateDistribution {
        &self.start
    }

    #[inline]
    pub fn transition(&self, s: usize, ja: usize, next: usize) -> f64 {
        self.transition[(s * self.n_joint_actions + ja) * self.n_states() + next]
    }

    #[inline]
    pub fn transition_row(&self, s: usize, ja: usize) -> &[f64] {
        let n = self.n_states();
        let base = (s * self.n_joint_actions + ja) * n;
        &self.transition[base..base + n]
    }

    #[inline]
    pub fn observation(&self, next: usize, ja: usize, jo: usize) -> f64 {
        self.observation[(next * self.n_joint_actions + ja) * self.n_joint_observations + jo]
    }

    #[inline]
    pub fn observation_row(&self, next: usize, ja: usize) -> &[f64] {
        let n = self.n_joint_observations;
        let base = (next * self.n_joint_actions + ja) * n;
        &self.observation[base..base + n]
    }

    #[inline]
    pub fn reward(&self, s: usize, ja: usize) -> f64 {
        self.reward[s * self.n_joint_actions + ja]
    }

    /// Encodes per-agent actions as a joint-action index.
    pub fn joint_action(&self, actions: &[usize]) -> usize {
        encode_mixed(actions, self.actions.iter().map(Vec::len))
    }

    pub fn split_joint_action(&self, ja: usize) -> Vec<usize> {
        decode_mixed(ja, self.actions.iter().map(Vec::len).collect::<Vec<_>>().as_slice())
    }

    pub fn joint_observation(&self, observations: &[usize]) -> usize {
        encode_mixed(observations, self.observations.iter().map(Vec::len))
    }

    pub fn split_joint_observation(&self, jo: usize) -> Vec<usize> {
        decode_mixed(jo, self.observations.iter().map(Vec::len).collect::<Vec<_>>().as_slice())
    }

    pub fn joint_action_label(&self, ja: usize) -> String {
        self.split_joint_action(ja)
            .iter()
            .enumerate()
            .map(|(i, &a)| self.actions[i][a].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn joint_observation_label(&self, jo: usize) -> String {
        self.split_joint_observation(jo)
            .iter()
            .enumerate()
            .map(|(i, &o)| self.observations[i][o].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Consumes the model, returning its raw tables.
    pub fn into_parts(self) -> ModelParts {
        ModelParts {
            states: self.states,
            actions: self.actions,
            observations: self.observations,
            transition: self.transition,
            observation: self.observation,
            reward: self.reward,
            start: self.start.weights,
        }
    }
}

fn checked_product(mut sizes: impl Iterator<Item = usize>) -> Result<usize, ModelError> {
    sizes.try_fold(1usize, |acc, n| acc.checked_mul(n)).ok_or_else(|| ModelError::Shape("joint set size overflows".into()))
}

fn encode_mixed(digits: &[usize], radix: impl Iterator<Item = usize>) -> usize {
    digits.iter().zip(radix).fold(0, |acc, (&d, r)| {
        debug_assert!(d < r);
        acc * r + d
    })
}

fn decode_mixed(mut value: usize, radix: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for (slot, &r) in out.iter_mut().zip(radix).rev() {
        *slot = value % r;
        value /= r;
    }
    out
}
