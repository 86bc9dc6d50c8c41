//! Recommendation policies.
//!
//! Every policy fills a slate of `N` documents one slot at a time. For each
//! slot a uniform draw `q` decides between the best-scoring remaining
//! document (`q > epsilon`) and a uniformly random remaining one. Policies
//! differ in how they score documents (mean reward, or mean reward plus the
//! UCB confidence radius) and in where `epsilon` comes from.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::risk::{RiskAssessment, RiskModel};
use crate::situations::{CaseBase, DocumentId, Retrieval, Situation, UserPreferences};

pub const DEFAULT_SLATE_SIZE: usize = 10;
pub const DEFAULT_EPS_MIN: f64 = 0.1;
pub const DEFAULT_EPS_MAX: f64 = 0.5;
pub const DEFAULT_EG_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_VDBE_TEMPERATURE: f64 = 0.33;

/// UCB index `r + sqrt(2 ln t / v)`; untried documents score `+inf`.
pub fn ucb_index(reward: f64, trial: u64, recoms: u64) -> f64 {
    if recoms == 0 {
        return f64::INFINITY;
    }
    let t = trial.max(1) as f64;
    reward + (2.0 * t.ln() / recoms as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub doc: DocumentId,
    pub score: f64,
}

/// Documents recommended in one trial, with which slots were random picks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slate {
    pub docs: Vec<DocumentId>,
    pub explored: Vec<bool>,
}

impl Slate {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn explored_slots(&self) -> usize {
        self.explored.iter().filter(|&&e| e).count()
    }
}

/// Fills `n` slots from `candidates`: per slot, `q > epsilon` takes the
/// highest score left (ties to the lowest document id), otherwise a
/// uniformly random remaining document.
pub fn select_slate<R: Rng + ?Sized>(candidates: &[Candidate], epsilon: f64, n: usize, rng: &mut R) -> Result<Slate> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::OutOfRange {
            what: "epsilon",
            value: epsilon,
        });
    }
    if candidates.len() < n {
        return Err(Error::InsufficientCandidates {
            pool: candidates.len(),
            needed: n,
        });
    }
    let mut by_doc: Vec<usize> = (0..candidates.len()).collect();
    by_doc.sort_by_key(|&i| candidates[i].doc);
    let mut ranked = by_doc.clone();
    ranked.sort_by(|&a, &b| {
        candidates[b]
            .score
            .total_cmp(&candidates[a].score)
            .then(candidates[a].doc.cmp(&candidates[b].doc))
    });

    let mut taken = vec![false; candidates.len()];
    let mut slate = Slate {
        docs: Vec::with_capacity(n),
        explored: Vec::with_capacity(n),
    };
    for slot in 0..n {
        let q: f64 = rng.gen();
        let pick = if q > epsilon {
            *ranked.iter().find(|&&i| !taken[i]).expect("pool larger than slate")
        } else {
            let k = rng.gen_range(0..candidates.len() - slot);
            *by_doc
                .iter()
                .filter(|&&i| !taken[i])
                .nth(k)
                .expect("k below remaining count")
        };
        taken[pick] = true;
        slate.docs.push(candidates[pick].doc);
        slate.explored.push(q <= epsilon);
    }
    Ok(slate)
}

/// How documents are scored for the exploitation branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scorer {
    /// Mean reward only.
    Greedy,
    /// Mean reward plus confidence radius.
    Ucb,
}

impl Scorer {
    pub fn candidates(self, prefs: &UserPreferences, trial: u64) -> Vec<Candidate> {
        prefs
            .iter()
            .map(|(doc, e)| Candidate {
                doc,
                score: match self {
                    Scorer::Greedy => e.reward(),
                    Scorer::Ucb => ucb_index(e.reward(), trial, e.recoms),
                },
            })
            .collect()
    }
}

/// epsilon-UCB over the documents of `prefs`.
pub fn select_slate_eps_ucb<R: Rng + ?Sized>(
    prefs: &UserPreferences,
    trial: u64,
    epsilon: f64,
    n: usize,
    rng: &mut R,
) -> Result<Slate> {
    select_slate(&Scorer::Ucb.candidates(prefs, trial), epsilon, n, rng)
}

/// Exploration rate from risk: `eps_max - risk * (eps_max - eps_min)`.
pub fn r_ucb_epsilon(risk: f64, eps_min: f64, eps_max: f64) -> Result<f64> {
    check_bounds(eps_min, eps_max)?;
    if !(0.0..=1.0).contains(&risk) {
        return Err(Error::OutOfRange {
            what: "risk",
            value: risk,
        });
    }
    // Convex form so both endpoints are reproduced exactly.
    Ok(((1.0 - risk) * eps_max + risk * eps_min).clamp(eps_min, eps_max))
}

fn check_bounds(eps_min: f64, eps_max: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps_min) || !(0.0..=1.0).contains(&eps_max) {
        return Err(Error::config("eps_min/eps_max", "must lie in [0, 1]"));
    }
    if eps_min > eps_max {
        return Err(Error::config("eps_min", "exceeds eps_max"));
    }
    Ok(())
}

/// `eps0 / i` for trial `i >= 1`.
pub fn eps_decreasing(eps0: f64, trial: u64) -> f64 {
    eps0 / trial.max(1) as f64
}

/// Full exploration for the first `epsilon * horizon` trials, none after.
pub fn eps_beginning(epsilon: f64, horizon: u64, trial: u64) -> f64 {
    if trial as f64 <= epsilon * horizon as f64 {
        1.0
    } else {
        0.0
    }
}

/// Starts at 1 and drops by 0.01 every 100 trials, never below 0.01.
pub fn eps_stepwise(trial: u64) -> f64 {
    (1.0 - 0.01 * (trial / 100) as f64).max(0.01)
}

/// The candidate exploration rates `1 - 0.01 * i` for `i = 1..=100`.
pub fn eg_candidates() -> Vec<f64> {
    (1..=100).map(|i| 1.0 - 0.01 * i as f64).collect()
}

/// One exponentiated-gradient step on normalised `weights`: the chosen
/// candidate's weight is multiplied by `exp(eta * reward / p_chosen)`,
/// then all weights are renormalised.
pub fn eg_update(weights: &[f64], chosen: usize, reward: f64, eta: f64) -> Vec<f64> {
    let estimate = reward / weights[chosen];
    let mut logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    logs[chosen] += eta * estimate;
    normalize_logs(&mut logs);
    logs.iter().map(|l| l.exp()).collect()
}

/// Keeps log-weights within this many nats of the largest so every weight
/// stays representable as a positive `f64`.
const EG_LOG_SPAN: f64 = 600.0;

fn normalize_logs(logs: &mut [f64]) {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for l in logs.iter_mut() {
        *l = l.max(max - EG_LOG_SPAN);
    }
    let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    for l in logs.iter_mut() {
        *l -= lse;
    }
}

/// Exponentiated-gradient choice among candidate exploration rates.
#[derive(Clone, Debug)]
pub struct EgState {
    candidates: Vec<f64>,
    log_weights: Vec<f64>,
    learning_rate: f64,
}

impl EgState {
    pub fn new(candidates: Vec<f64>, learning_rate: f64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::config("candidates", "must not be empty"));
        }
        if let Some(&c) = candidates.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::OutOfRange {
                what: "epsilon candidate",
                value: c,
            });
        }
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        let k = candidates.len() as f64;
        let log_weights = vec![-k.ln(); candidates.len()];
        Ok(EgState {
            candidates,
            log_weights,
            learning_rate,
        })
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, l) in self.log_weights.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return i;
            }
        }
        self.log_weights.len() - 1
    }

    pub fn update(&mut self, chosen: usize, reward: f64) {
        let p = self.log_weights[chosen].exp();
        self.log_weights[chosen] += self.learning_rate * reward / p;
        normalize_logs(&mut self.log_weights);
    }
}

/// `(1 - e^(-x/tau)) / (1 + e^(-x/tau))`.
pub fn vdbe_activation(value_delta: f64, temperature: f64) -> f64 {
    let e = (-value_delta.abs() / temperature).exp();
    (1.0 - e) / (1.0 + e)
}

/// `eps <- step * f(|delta|) + (1 - step) * eps`.
pub fn vdbe_update(epsilon: f64, value_delta: f64, step: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::config("temperature", "must be positive"));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::config("step", "must lie in (0, 1]"));
    }
    Ok(step * vdbe_activation(value_delta, temperature) + (1.0 - step) * epsilon)
}

/// Per-situation exploration rates driven by value differences.
#[derive(Clone, Debug)]
pub struct VdbeState {
    rates: HashMap<Situation, f64>,
    initial: f64,
    step: Option<f64>,
    temperature: f64,
}

impl VdbeState {
    pub fn new(initial: f64, step: Option<f64>, temperature: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&initial) {
            return Err(Error::config("initial_epsilon", "must lie in [0, 1]"));
        }
        if !(temperature > 0.0) {
            return Err(Error::config("temperature", "must be positive"));
        }
        if let Some(s) = step {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::config("step", "must lie in (0, 1]"));
            }
        }
        Ok(VdbeState {
            rates: HashMap::new(),
            initial,
            step,
            temperature,
        })
    }

    pub fn epsilon(&self, s: &Situation) -> f64 {
        self.rates.get(s).copied().unwrap_or(self.initial)
    }

    /// Applies one update per value change; the default step is
    /// `1 / pool_size`.
    pub fn observe(&mut self, s: Situation, value_changes: &[f64], pool_size: usize) -> Result<()> {
        let step = self.step.unwrap_or(1.0 / pool_size.max(1) as f64);
        let mut eps = self.epsilon(&s);
        for &delta in value_changes {
            eps = vdbe_update(eps, delta, step, self.temperature)?;
        }
        self.rates.insert(s, eps);
        Ok(())
    }
}

fn default_eg_rate() -> f64 {
    DEFAULT_EG_LEARNING_RATE
}

fn default_vdbe_temperature() -> f64 {
    DEFAULT_VDBE_TEMPERATURE
}

fn default_vdbe_initial() -> f64 {
    1.0
}

fn default_eps_min() -> f64 {
    DEFAULT_EPS_MIN
}

fn default_eps_max() -> f64 {
    DEFAULT_EPS_MAX
}

/// Serializable policy selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// Always the highest mean reward.
    PureExploitation,
    EpsGreedy {
        epsilon: f64,
    },
    /// Random for the first `epsilon * horizon` trials; `horizon` defaults
    /// to the run length.
    EpsBeginning {
        epsilon: f64,
        #[serde(default)]
        horizon: Option<u64>,
    },
    EpsDecreasing {
        epsilon0: f64,
    },
    EpsUcb {
        epsilon: f64,
    },
    BeginningUcb {
        epsilon: f64,
        #[serde(default)]
        horizon: Option<u64>,
    },
    /// UCB with the stepwise schedule.
    DecreasingUcb,
    EgUcb {
        #[serde(default = "default_eg_rate")]
        learning_rate: f64,
    },
    VdbeUcb {
        #[serde(default = "default_vdbe_temperature")]
        temperature: f64,
        #[serde(default)]
        step: Option<f64>,
        #[serde(default = "default_vdbe_initial")]
        initial_epsilon: f64,
    },
    RUcb {
        #[serde(default = "default_eps_min")]
        eps_min: f64,
        #[serde(default = "default_eps_max")]
        eps_max: f64,
    },
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::PureExploitation => "exploitation".into(),
            PolicySpec::EpsGreedy { epsilon } => format!("{epsilon}-greedy"),
            PolicySpec::EpsBeginning { .. } => "eps-beginning".into(),
            PolicySpec::EpsDecreasing { .. } => "eps-decreasing".into(),
            PolicySpec::EpsUcb { epsilon } => format!("{epsilon}-UCB"),
            PolicySpec::BeginningUcb { .. } => "beginning-UCB".into(),
            PolicySpec::DecreasingUcb => "decreasing-UCB".into(),
            PolicySpec::EgUcb { .. } => "EG-UCB".into(),
            PolicySpec::VdbeUcb { .. } => "VDBE-UCB".into(),
            PolicySpec::RUcb { .. } => "R-UCB".into(),
        }
    }

    pub fn needs_risk_model(&self) -> bool {
        matches!(self, PolicySpec::RUcb { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |field: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(field, "must lie in [0, 1]"))
            }
        };
        match *self {
            PolicySpec::PureExploitation | PolicySpec::DecreasingUcb => Ok(()),
            PolicySpec::EpsGreedy { epsilon }
            | PolicySpec::EpsUcb { epsilon }
            | PolicySpec::EpsBeginning { epsilon, .. }
            | PolicySpec::BeginningUcb { epsilon, .. } => unit("epsilon", epsilon),
            PolicySpec::EpsDecreasing { epsilon0 } => {
                if epsilon0 > 0.0 && epsilon0 <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::config("epsilon0", "must lie in (0, 1]"))
                }
            }
            PolicySpec::EgUcb { learning_rate } => EgState::new(eg_candidates(), learning_rate).map(drop),
            PolicySpec::VdbeUcb {
                temperature,
                step,
                initial_epsilon,
            } => VdbeState::new(initial_epsilon, step, temperature).map(drop),
            PolicySpec::RUcb { eps_min, eps_max } => check_bounds(eps_min, eps_max),
        }
    }
}

#[derive(Clone, Debug)]
enum Exploration {
    Fixed(f64),
    Beginning { epsilon: f64, horizon: u64 },
    Decreasing { epsilon0: f64 },
    Stepwise,
    Eg(EgState),
    Vdbe(VdbeState),
    Risk(Box<RiskState>),
}

#[derive(Clone, Debug)]
struct RiskState {
    model: RiskModel,
    eps_min: f64,
    eps_max: f64,
}

/// What a policy sees when asked for a slate.
#[derive(Clone, Copy, Debug)]
pub struct TrialContext<'a> {
    pub ontology: &'a Ontology,
    pub case_base: &'a CaseBase,
    /// The user's current situation.
    pub situation: Situation,
    /// The case whose preferences supply the candidate documents.
    pub retrieved: Retrieval,
    /// Global trial counter, starting at 1.
    pub trial: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub slate: Slate,
    pub epsilon: f64,
    pub risk: Option<RiskAssessment>,
    /// Index of the sampled candidate rate, for EG policies.
    pub eg_choice: Option<usize>,
}

/// Outcome of one trial, handed back to the policy.
#[derive(Clone, Copy, Debug)]
pub struct Feedback<'a> {
    pub situation: Situation,
    pub recommendation: &'a Recommendation,
    pub clicks: &'a [bool],
    /// `|r_after - r_before|` for each slate document, measured on the
    /// retrieved case's statistics.
    pub value_changes: &'a [f64],
    /// Size of the candidate pool the slate was drawn from.
    pub pool_size: usize,
    /// Case of the current situation after the case-base update.
    pub case_index: usize,
}

/// A configured policy with its adaptive state.
#[derive(Clone, Debug)]
pub struct Policy {
    label: String,
    scorer: Scorer,
    exploration: Exploration,
    slate_size: usize,
}

impl Policy {
    /// Builds a policy. `horizon` fills in unset beginning horizons; R-UCB
    /// requires a risk model.
    pub fn from_spec(spec: &PolicySpec, slate_size: usize, horizon: u64, risk: Option<RiskModel>) -> Result<Self> {
        spec.validate()?;
        if slate_size == 0 {
            return Err(Error::config("slate_size", "must be at least 1"));
        }
        let (scorer, exploration) = match *spec {
            PolicySpec::PureExploitation => (Scorer::Greedy, Exploration::Fixed(0.0)),
            PolicySpec::EpsGreedy { epsilon } => (Scorer::Greedy, Exploration::Fixed(epsilon)),
            PolicySpec::EpsBeginning { epsilon, horizon: h } => (
                Scorer::Greedy,
                Exploration::Beginning {
                    epsilon,
                    horizon: h.unwrap_or(horizon),
                },
            ),
            PolicySpec::EpsDecreasing { epsilon0 } => (Scorer::Greedy, Exploration::Decreasing { epsilon0 }),
            PolicySpec::EpsUcb { epsilon } => (Scorer::Ucb, Exploration::Fixed(epsilon)),
            PolicySpec::BeginningUcb { epsilon, horizon: h } => (
                Scorer::Ucb,
                Exploration::Beginning {
                    epsilon,
                    horizon: h.unwrap_or(horizon),
                },
            ),
            PolicySpec::DecreasingUcb => (Scorer::Ucb, Exploration::Stepwise),
            PolicySpec::EgUcb { learning_rate } => (
                Scorer::Ucb,
                Exploration::Eg(EgState::new(eg_candidates(), learning_rate)?),
            ),
            PolicySpec::VdbeUcb {
                temperature,
                step,
                initial_epsilon,
            } => (
                Scorer::Ucb,
                Exploration::Vdbe(VdbeState::new(initial_epsilon, step, temperature)?),
            ),
            PolicySpec::RUcb { eps_min, eps_max } => {
                let model = risk.ok_or_else(|| Error::config("risk", "R-UCB needs a risk model"))?;
                (
                    Scorer::Ucb,
                    Exploration::Risk(Box::new(RiskState {
                        model,
                        eps_min,
                        eps_max,
                    })),
                )
            }
        };
        Ok(Policy {
            label: spec.label(),
            scorer,
            exploration,
            slate_size,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn slate_size(&self) -> usize {
        self.slate_size
    }

    pub fn scorer(&self) -> Scorer {
        self.scorer
    }

    pub fn risk_model(&self) -> Option<&RiskModel> {
        match &self.exploration {
            Exploration::Risk(state) => Some(&state.model),
            _ => None,
        }
    }

    pub fn eg_state(&self) -> Option<&EgState> {
        match &self.exploration {
            Exploration::Eg(state) => Some(state),
            _ => None,
        }
    }

    pub fn recommend<R: Rng + ?Sized>(&mut self, ctx: &TrialContext<'_>, rng: &mut R) -> Result<Recommendation> {
        let mut risk = None;
        let mut eg_choice = None;
        let epsilon = match &self.exploration {
            Exploration::Fixed(e) => *e,
            Exploration::Beginning { epsilon, horizon } => eps_beginning(*epsilon, *horizon, ctx.trial),
            Exploration::Decreasing { epsilon0 } => eps_decreasing(*epsilon0, ctx.trial),
            Exploration::Stepwise => eps_stepwise(ctx.trial),
            Exploration::Eg(state) => {
                let i = state.sample(rng);
                eg_choice = Some(i);
                state.candidates()[i]
            }
            Exploration::Vdbe(state) => state.epsilon(&ctx.situation),
            Exploration::Risk(state) => {
                let assessment =
                    state
                        .model
                        .assess(ctx.ontology, ctx.case_base, &ctx.situation, ctx.retrieved.index)?;
                risk = Some(assessment);
                r_ucb_epsilon(assessment.total, state.eps_min, state.eps_max)?
            }
        };
        let prefs = &ctx.case_base.case(ctx.retrieved.index).preferences;
        let candidates = self.scorer.candidates(prefs, ctx.trial);
        let slate = select_slate(&candidates, epsilon, self.slate_size, rng)?;
        Ok(Recommendation {
            slate,
            epsilon,
            risk,
            eg_choice,
        })
    }

    /// Updates adaptive state after feedback. For R-UCB this also records
    /// the situation's clicks and propagates the trial's risk.
    pub fn observe(&mut self, case_base: &mut CaseBase, fb: &Feedback<'_>) -> Result<()> {
        match &mut self.exploration {
            Exploration::Eg(state) => {
                if let Some(i) = fb.recommendation.eg_choice {
                    let reward = if fb.clicks.iter().any(|&c| c) { 1.0 } else { 0.0 };
                    state.update(i, reward);
                }
            }
            Exploration::Vdbe(state) => {
                state.observe(fb.situation, fb.value_changes, fb.pool_size)?;
            }
            Exploration::Risk(state) => {
                let clicks = fb.clicks.iter().filter(|&&c| c).count() as u64;
                state
                    .model
                    .record_feedback(fb.situation, clicks, fb.clicks.len() as u64);
                if let Some(a) = fb.recommendation.risk {
                    state.model.propagate(case_base, fb.case_index, a.total)?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}
