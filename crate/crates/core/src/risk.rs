//! Situation risk.
//!
//! Three estimators feed one weighted score in `[0, 1]`:
//!
//! * `R_v` compares the situation's click-through rate with a threshold
//!   `E[CTR] - alpha * sd[CTR]` over all tracked situations;
//! * `R_c` is a weighted mean of per-concept risk values, the weights being
//!   the mean concept risk of each dimension over the critical situations;
//! * `R_m` grows with similarity to the critical-situation centroid.
//!
//! After feedback the aggregate is appended to the case's risk history and
//! pushed down to the situation's concepts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{ConceptId, Dimension, Ontology};
use crate::situations::{sim_unchecked, CaseBase, Situation, SituationRecord};

/// Upper clamp for the variance threshold; `R_v` divides by `1 - var`.
pub const MAX_VAR_THRESHOLD: f64 = 1.0 - 1e-9;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Aggregation weights for the similarity, concept and variance risks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskWeights {
    pub m: f64,
    pub c: f64,
    pub v: f64,
}

impl Default for RiskWeights {
    fn default() -> Self {
        RiskWeights {
            m: 1.0 / 3.0,
            c: 1.0 / 3.0,
            v: 1.0 / 3.0,
        }
    }
}

impl RiskWeights {
    pub fn from_array([m, c, v]: [f64; 3]) -> Self {
        RiskWeights { m, c, v }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.m, self.c, self.v]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.to_array();
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::config("lambda", "weights must be finite and non-negative"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::config("lambda", format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskConfig {
    /// Number of standard deviations below the mean CTR for the threshold.
    pub alpha: f64,
    pub lambda: RiskWeights,
    /// Similarity threshold `B` for the centroid risk.
    #[serde(rename = "B")]
    pub threshold: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            alpha: 2.0,
            lambda: RiskWeights::default(),
            threshold: 0.7,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config("alpha", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::config("B", "must lie in [0, 1]"));
        }
        self.lambda.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CtrCounter {
    pub clicks: u64,
    pub recs: u64,
}

impl CtrCounter {
    pub fn ctr(&self) -> f64 {
        if self.recs == 0 {
            0.0
        } else {
            self.clicks as f64 / self.recs as f64
        }
    }
}

/// Per-situation click and recommendation totals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SituationStats {
    counters: BTreeMap<Situation, CtrCounter>,
}

impl SituationStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seeds every situation with the totals of its stored preferences.
    pub fn from_case_base(cb: &CaseBase) -> Self {
        let counters = cb
            .cases()
            .iter()
            .map(|c| {
                let (clicks, recs) = c.preferences.totals();
                (c.situation, CtrCounter { clicks, recs })
            })
            .collect();
        SituationStats { counters }
    }

    pub fn record(&mut self, s: Situation, clicks: u64, recs: u64) {
        assert!(clicks <= recs, "clicks cannot exceed recommendations");
        let c = self.counters.entry(s).or_default();
        c.clicks += clicks;
        c.recs += recs;
    }

    pub fn get(&self, s: &Situation) -> CtrCounter {
        self.counters.get(s).copied().unwrap_or_default()
    }

    /// CTR of every situation with at least one recommendation.
    pub fn tracked_ctrs(&self) -> impl Iterator<Item = f64> + '_ {
        self.counters.values().filter(|c| c.recs > 0).map(CtrCounter::ctr)
    }
}

/// `click(S) / rec(S)`, 0 when nothing was recommended in `s`.
pub fn situation_ctr(stats: &SituationStats, s: &Situation) -> f64 {
    stats.get(s).ctr()
}

/// Mean CTR minus `alpha` standard deviations, clamped to `[0, 1)`.
pub fn var_threshold(stats: &SituationStats, alpha: f64) -> Result<f64> {
    let ctrs: Vec<f64> = stats.tracked_ctrs().collect();
    var_threshold_of(&ctrs, alpha)
}

/// [`var_threshold`] over an explicit list of CTRs (population deviation).
pub fn var_threshold_of(ctrs: &[f64], alpha: f64) -> Result<f64> {
    if ctrs.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: ctrs.len(),
        });
    }
    let n = ctrs.len() as f64;
    let mean = ctrs.iter().sum::<f64>() / n;
    let var = ctrs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let threshold = mean - alpha * var.sqrt();
    Ok(threshold.clamp(0.0, MAX_VAR_THRESHOLD))
}

/// Variance-based risk: 1 at or below the threshold, falling linearly to 0
/// at CTR 1.
pub fn risk_variance(ctr: f64, var: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&var) {
        return Err(Error::config("var", format!("threshold {var} outside [0, 1)")));
    }
    if ctr > var {
        Ok((1.0 - (ctr - var) / (1.0 - var)).clamp(0.0, 1.0))
    } else {
        Ok(1.0)
    }
}

/// Similarity-based risk: `1 - B + sim` below the threshold, 1 above.
pub fn risk_similarity(sim: f64, threshold: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::config("B", "must lie in [0, 1]"));
    }
    if sim < threshold {
        Ok(1.0 - threshold + sim)
    } else {
        Ok(1.0)
    }
}

/// `lambda_m * R_m + lambda_c * R_c + lambda_v * R_v`.
pub fn aggregate_risk(rm: f64, rc: f64, rv: f64, lambda: RiskWeights) -> Result<f64> {
    lambda.validate()?;
    for (what, value) in [("R_m", rm), ("R_c", rc), ("R_v", rv)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { what, value });
        }
    }
    Ok(lambda.m * rm + lambda.c * rc + lambda.v * rv)
}

/// Risk value of one concept: the mean over the situations it was observed
/// in, plus an optional annotated seed counted as one more observation.
#[derive(Clone, Debug, Default, PartialEq)]
struct ConceptEntry {
    seed: Option<f64>,
    by_situation: BTreeMap<Situation, f64>,
    value: f64,
}

impl ConceptEntry {
    fn refresh(&mut self) {
        let n = self.by_situation.len() + usize::from(self.seed.is_some());
        let sum = self.seed.unwrap_or(0.0) + self.by_situation.values().sum::<f64>();
        self.value = if n == 0 { 0.0 } else { sum / n as f64 };
    }
}

/// Learned risk values of taxonomy concepts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConceptRisk {
    entries: BTreeMap<ConceptId, ConceptEntry>,
}

impl ConceptRisk {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets an annotated starting value for `concept`.
    pub fn seed(&mut self, concept: ConceptId, cv: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&cv) {
            return Err(Error::OutOfRange {
                what: "concept risk",
                value: cv,
            });
        }
        let e = self.entries.entry(concept).or_default();
        e.seed = Some(cv);
        e.refresh();
        Ok(())
    }

    /// Records (or replaces) the risk of situation `s` for `concept`.
    pub fn record(&mut self, concept: ConceptId, s: Situation, risk: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&risk) {
            return Err(Error::OutOfRange {
                what: "concept risk",
                value: risk,
            });
        }
        let e = self.entries.entry(concept).or_default();
        e.by_situation.insert(s, risk);
        e.refresh();
        Ok(())
    }

    /// Value stored for exactly this concept, if any.
    pub fn own_value(&self, concept: ConceptId) -> Option<f64> {
        self.entries.get(&concept).map(|e| e.value)
    }

    /// Situations whose risk contributed to `concept`.
    pub fn provenance(&self, concept: ConceptId) -> impl Iterator<Item = &Situation> {
        self.entries
            .get(&concept)
            .into_iter()
            .flat_map(|e| e.by_situation.keys())
    }

    /// Risk of `concept`, inherited from the nearest valued ancestor when the
    /// concept has none of its own, and 0 when no ancestor has one either.
    pub fn cv(&self, ontology: &Ontology, concept: ConceptId) -> f64 {
        let tax = ontology.taxonomy(concept.dimension);
        match tax.ancestors(concept) {
            Ok(mut chain) => chain.find_map(|c| self.own_value(c)).unwrap_or(0.0),
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConceptId, f64)> + '_ {
        self.entries.iter().map(|(c, e)| (*c, e.value))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mean concept risk of each dimension over the critical situations.
pub fn raw_dimension_weights(cr: &ConceptRisk, ontology: &Ontology, cb: &CaseBase) -> Result<[f64; 3]> {
    let mut sums = [0.0; 3];
    let mut n = 0usize;
    for (_, case) in cb.critical() {
        n += 1;
        for d in Dimension::ALL {
            sums[d.index()] += cr.cv(ontology, case.situation.concept(d));
        }
    }
    if n == 0 {
        return Err(Error::EmptyCriticalSet);
    }
    Ok(sums.map(|s| s / n as f64))
}

/// [`raw_dimension_weights`] normalised to sum to 1; equal weights when
/// every raw weight is 0.
pub fn dimension_weights(cr: &ConceptRisk, ontology: &Ontology, cb: &CaseBase) -> Result<[f64; 3]> {
    Ok(normalize_weights(raw_dimension_weights(cr, ontology, cb)?))
}

pub fn normalize_weights(raw: [f64; 3]) -> [f64; 3] {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.map(|w| w / total)
    } else {
        [1.0 / 3.0; 3]
    }
}

/// Concept-based risk: `sum_d mu_d * cv_d` over the situation's concepts.
pub fn risk_concepts(cr: &ConceptRisk, ontology: &Ontology, s: &Situation, mu: [f64; 3]) -> f64 {
    let r: f64 = Dimension::ALL
        .iter()
        .map(|&d| mu[d.index()] * cr.cv(ontology, s.concept(d)))
        .sum();
    r.clamp(0.0, 1.0)
}

/// Index of the critical case with the highest mean similarity to all
/// critical cases; ties go to the earliest.
pub fn critical_centroid(ontology: &Ontology, cb: &CaseBase) -> Result<usize> {
    let critical: Vec<(usize, &Situation)> = cb.critical().map(|(i, c)| (i, &c.situation)).collect();
    if critical.is_empty() {
        return Err(Error::EmptyCriticalSet);
    }
    let n = critical.len() as f64;
    let mut best = (critical[0].0, f64::NEG_INFINITY);
    for &(i, sf) in &critical {
        let score = critical
            .iter()
            .map(|(_, se)| sim_unchecked(ontology, sf, se))
            .sum::<f64>()
            / n;
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}

/// Appends `risk` to the case's history, then records the case's mean risk
/// for each of its concepts. Returns the new mean.
pub fn propagate_risk(cr: &mut ConceptRisk, cb: &mut CaseBase, case_index: usize, risk: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&risk) {
        return Err(Error::OutOfRange {
            what: "risk",
            value: risk,
        });
    }
    let case = cb.case_mut(case_index);
    case.risk_history.push(risk);
    let mean = case.stored_risk().expect("history is non-empty").clamp(0.0, 1.0);
    let s = case.situation;
    for concept in s.concepts() {
        cr.record(concept, s, mean)?;
    }
    Ok(mean)
}

/// The individual estimates and their aggregate for one trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskAssessment {
    pub variance: f64,
    /// `None` when there are no critical situations.
    pub concepts: Option<f64>,
    /// `None` when there are no critical situations.
    pub similarity: Option<f64>,
    pub var_threshold: f64,
    pub total: f64,
}

/// Risk state for one run: configuration, concept risks, per-situation
/// CTR counters and the cached critical centroid.
#[derive(Clone, Debug)]
pub struct RiskModel {
    config: RiskConfig,
    concepts: ConceptRisk,
    stats: SituationStats,
    centroid: Option<Situation>,
}

impl RiskModel {
    pub fn new(config: RiskConfig, ontology: &Ontology, cb: &CaseBase, concepts: ConceptRisk) -> Result<Self> {
        config.validate()?;
        let centroid = match critical_centroid(ontology, cb) {
            Ok(i) => Some(cb.case(i).situation),
            Err(Error::EmptyCriticalSet) => None,
            Err(e) => return Err(e),
        };
        Ok(RiskModel {
            config,
            concepts,
            stats: SituationStats::from_case_base(cb),
            centroid,
        })
    }

    pub fn config(&self) -> &RiskConfig {
        &self.config
    }

    pub fn concepts(&self) -> &ConceptRisk {
        &self.concepts
    }

    pub fn stats(&self) -> &SituationStats {
        &self.stats
    }

    pub fn centroid(&self) -> Option<Situation> {
        self.centroid
    }

    /// Risk of the current situation `current`, with `retrieved` the case
    /// whose statistics drive the recommendation.
    pub fn assess(
        &self,
        ontology: &Ontology,
        cb: &CaseBase,
        current: &Situation,
        retrieved: usize,
    ) -> Result<RiskAssessment> {
        let var = match var_threshold(&self.stats, self.config.alpha) {
            Ok(v) => v,
            Err(Error::InsufficientData { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        let ctr = situation_ctr(&self.stats, &cb.case(retrieved).situation);
        let variance = risk_variance(ctr, var)?;

        let concepts = match dimension_weights(&self.concepts, ontology, cb) {
            Ok(mu) => Some(risk_concepts(&self.concepts, ontology, current, mu)),
            Err(Error::EmptyCriticalSet) => None,
            Err(e) => return Err(e),
        };
        let similarity = match self.centroid {
            Some(sm) => Some(risk_similarity(
                sim_unchecked(ontology, current, &sm),
                self.config.threshold,
            )?),
            None => None,
        };

        let total = aggregate_available(similarity, concepts, variance, self.config.lambda);
        Ok(RiskAssessment {
            variance,
            concepts,
            similarity,
            var_threshold: var,
            total,
        })
    }

    pub fn record_feedback(&mut self, s: Situation, clicks: u64, recs: u64) {
        self.stats.record(s, clicks, recs);
    }

    pub fn propagate(&mut self, cb: &mut CaseBase, case_index: usize, risk: f64) -> Result<f64> {
        propagate_risk(&mut self.concepts, cb, case_index, risk)
    }
}

/// Aggregates the defined components, spreading the weight of undefined
/// ones proportionally over the rest.
fn aggregate_available(rm: Option<f64>, rc: Option<f64>, rv: f64, lambda: RiskWeights) -> f64 {
    let parts = [(rm, lambda.m), (rc, lambda.c), (Some(rv), lambda.v)];
    let weight: f64 = parts.iter().filter(|(r, _)| r.is_some()).map(|(_, w)| w).sum();
    if weight <= 0.0 {
        let defined: Vec<f64> = parts.iter().filter_map(|(r, _)| *r).collect();
        return defined.iter().sum::<f64>() / defined.len() as f64;
    }
    let total: f64 = parts.iter().filter_map(|(r, w)| r.map(|r| r * w)).sum::<f64>() / weight;
    total.clamp(0.0, 1.0)
}

/// On-disk risk annotations: critical situations, concept seeds and the
/// risk parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSeedFile {
    pub critical_situations: Vec<SituationRecord>,
    pub concept_risks: Vec<ConceptSeed>,
    pub lambda: [f64; 3],
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptSeed {
    pub dimension: Dimension,
    pub concept: String,
    pub cv: f64,
}

impl RiskSeedFile {
    pub fn config(&self) -> RiskConfig {
        RiskConfig {
            alpha: self.alpha,
            lambda: RiskWeights::from_array(self.lambda),
            threshold: self.b,
        }
    }

    /// Marks the listed situations critical (they must be stored cases) and
    /// returns the seeded concept risks.
    pub fn apply(&self, ontology: &Ontology, cb: &mut CaseBase) -> Result<ConceptRisk> {
        self.config().validate()?;
        for rec in &self.critical_situations {
            let s = rec.resolve(ontology)?;
            let i = cb.find(&s).ok_or_else(|| {
                Error::config(
                    "critical_situations",
                    format!(
                        "({}, {}, {}) is not in the case base",
                        rec.location, rec.time, rec.social
                    ),
                )
            })?;
            cb.set_critical(i, true);
        }
        self.concept_risk(ontology)
    }

    /// The seeded concept risks alone.
    pub fn concept_risk(&self, ontology: &Ontology) -> Result<ConceptRisk> {
        let mut cr = ConceptRisk::new();
        for seed in &self.concept_risks {
            cr.seed(ontology.concept(seed.dimension, &seed.concept)?, seed.cv)?;
        }
        Ok(cr)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("seed file serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Taxonomy;
    use crate::situations::{Case, UserPreferences};

    fn ontology() -> Ontology {
        let edges = [
            ("A", Some("root")),
            ("B", Some("root")),
            ("A1", Some("A")),
            ("A2", Some("A")),
            ("B1", Some("B")),
        ];
        let [l, t, s] = Dimension::ALL.map(|d| Taxonomy::from_edges(d, "root", &edges).unwrap());
        Ontology::new(l, t, s).unwrap()
    }

    fn sit(o: &Ontology, l: &str, t: &str, s: &str) -> Situation {
        Situation::from_names(o, l, t, s).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn ctr_values() {
        let o = ontology();
        let s = sit(&o, "A", "A", "A");
        let mut stats = SituationStats::new();
        assert_eq!(situation_ctr(&stats, &s), 0.0);
        stats.record(s, 3, 6);
        assert_eq!(situation_ctr(&stats, &s), 0.5);
        let t = sit(&o, "B", "B", "B");
        stats.record(t, 0, 10);
        assert_eq!(situation_ctr(&stats, &t), 0.0);
    }

    #[test]
    fn threshold_values() {
        assert!(close(var_threshold_of(&[0.4, 0.4, 0.4], 2.0).unwrap(), 0.4));
        // mean 0.5, population sd 0.1
        assert!(close(var_threshold_of(&[0.4, 0.6], 2.0).unwrap(), 0.3));
        // mean 0.1, sd 0.2 -> negative, clamped
        assert_eq!(var_threshold_of(&[-0.1, 0.3], 2.0).unwrap(), 0.0);
        assert!(var_threshold_of(&[1.0, 1.0], 2.0).unwrap() < 1.0);
        assert!(matches!(
            var_threshold_of(&[0.5], 2.0),
            Err(Error::InsufficientData { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn variance_risk_values() {
        assert_eq!(risk_variance(1.0, 0.2).unwrap(), 0.0);
        assert!(close(risk_variance(0.6, 0.2).unwrap(), 0.5));
        assert_eq!(risk_variance(0.2, 0.2).unwrap(), 1.0);
        assert_eq!(risk_variance(0.1, 0.2).unwrap(), 1.0);
        assert!(risk_variance(0.5, 1.0).is_err());
    }

    #[test]
    fn similarity_risk_values() {
        assert_eq!(risk_similarity(0.9, 0.7).unwrap(), 1.0);
        assert_eq!(risk_similarity(0.7, 0.7).unwrap(), 1.0);
        assert!(close(risk_similarity(0.5, 0.7).unwrap(), 0.8));
        assert!(close(risk_similarity(0.0, 0.7).unwrap(), 0.3));
        assert!(risk_similarity(0.5, 1.5).is_err());
    }

    #[test]
    fn aggregate_values() {
        let third = RiskWeights::default();
        assert!(close(aggregate_risk(0.3, 0.6, 0.9, third).unwrap(), 0.6));
        assert!(close(aggregate_risk(1.0, 1.0, 1.0, third).unwrap(), 1.0));
        let only_m = RiskWeights { m: 1.0, c: 0.0, v: 0.0 };
        assert_eq!(aggregate_risk(0.42, 0.9, 0.1, only_m).unwrap(), 0.42);
        let bad = RiskWeights { m: 0.5, c: 0.5, v: 0.5 };
        assert!(aggregate_risk(0.1, 0.1, 0.1, bad).is_err());
    }

    #[test]
    fn undefined_components_redistribute() {
        let w = RiskWeights { m: 0.2, c: 0.3, v: 0.5 };
        assert!(close(aggregate_available(None, None, 0.4, w), 0.4));
        assert!(close(aggregate_available(Some(1.0), None, 0.0, w), 0.2 / 0.7));
    }

    #[test]
    fn concept_risk_inherits_from_ancestor() {
        let o = ontology();
        let mut cr = ConceptRisk::new();
        let a = o.concept(Dimension::Time, "A").unwrap();
        let a1 = o.concept(Dimension::Time, "A1").unwrap();
        let b1 = o.concept(Dimension::Time, "B1").unwrap();
        cr.seed(a, 0.6).unwrap();
        assert_eq!(cr.cv(&o, a1), 0.6);
        assert_eq!(cr.cv(&o, b1), 0.0);
        cr.seed(a1, 0.1).unwrap();
        assert_eq!(cr.cv(&o, a1), 0.1);
    }

    #[test]
    fn concept_weights_and_risk() {
        let o = ontology();
        let mut cb = CaseBase::new();
        for (l, crit) in [("A1", true), ("A2", true), ("B1", false)] {
            let mut c = Case::new(sit(&o, l, "A", "B"), UserPreferences::new());
            c.is_critical = crit;
            cb.push(&o, c).unwrap();
        }
        let mut cr = ConceptRisk::new();
        cr.seed(o.concept(Dimension::Location, "A1").unwrap(), 1.0).unwrap();
        cr.seed(o.concept(Dimension::Location, "A2").unwrap(), 0.5).unwrap();
        let raw = raw_dimension_weights(&cr, &o, &cb).unwrap();
        assert_eq!(raw, [0.75, 0.0, 0.0]);
        assert_eq!(dimension_weights(&cr, &o, &cb).unwrap(), [1.0, 0.0, 0.0]);

        let s = sit(&o, "A1", "A", "B");
        assert_eq!(risk_concepts(&cr, &o, &s, [1.0, 0.0, 0.0]), 1.0);
        let none = ConceptRisk::new();
        assert_eq!(raw_dimension_weights(&none, &o, &cb).unwrap(), [0.0; 3]);
        assert_eq!(risk_concepts(&none, &o, &s, [1.0 / 3.0; 3]), 0.0);
    }

    #[test]
    fn weighted_concept_risk_value() {
        let o = ontology();
        let mut cr = ConceptRisk::new();
        let s = sit(&o, "A1", "B1", "A2");
        cr.seed(s.location(), 1.0).unwrap();
        cr.seed(s.time(), 0.0).unwrap();
        cr.seed(s.social(), 0.5).unwrap();
        assert!(close(risk_concepts(&cr, &o, &s, [0.5, 0.3, 0.2]), 0.6));
    }

    #[test]
    fn normalized_weights_keep_proportions() {
        let w = normalize_weights([0.6, 0.3, 0.1]);
        assert!(close(w[0], 0.6) && close(w[1], 0.3) && close(w[2], 0.1));
        assert_eq!(normalize_weights([0.0; 3]), [1.0 / 3.0; 3]);
    }

    #[test]
    fn empty_critical_set_errors() {
        let o = ontology();
        let mut cb = CaseBase::new();
        cb.push(&o, Case::new(sit(&o, "A", "A", "A"), UserPreferences::new()))
            .unwrap();
        assert!(matches!(critical_centroid(&o, &cb), Err(Error::EmptyCriticalSet)));
        assert!(matches!(
            raw_dimension_weights(&ConceptRisk::new(), &o, &cb),
            Err(Error::EmptyCriticalSet)
        ));
    }

    #[test]
    fn centroid_picks_most_central() {
        let o = ontology();
        let mut cb = CaseBase::new();
        // A2 is the middle ground between A1 and A.
        for l in ["A1", "A", "B1"] {
            let mut c = Case::new(sit(&o, l, "root", "root"), UserPreferences::new());
            c.is_critical = true;
            cb.push(&o, c).unwrap();
        }
        assert_eq!(critical_centroid(&o, &cb).unwrap(), 1);
    }

    #[test]
    fn centroid_ties_go_to_first() {
        let o = ontology();
        let mut cb = CaseBase::new();
        for l in ["A1", "A2"] {
            let mut c = Case::new(sit(&o, l, "root", "root"), UserPreferences::new());
            c.is_critical = true;
            cb.push(&o, c).unwrap();
        }
        assert_eq!(critical_centroid(&o, &cb).unwrap(), 0);
    }

    #[test]
    fn propagation_keeps_running_means() {
        let o = ontology();
        let mut cb = CaseBase::new();
        let s1 = sit(&o, "A1", "A", "A");
        let s2 = sit(&o, "A1", "B", "B");
        let s3 = sit(&o, "A1", "B1", "B1");
        for s in [s1, s2, s3] {
            cb.push(&o, Case::new(s, UserPreferences::new())).unwrap();
        }
        let mut cr = ConceptRisk::new();
        assert!(close(propagate_risk(&mut cr, &mut cb, 0, 0.4).unwrap(), 0.4));
        assert!(close(propagate_risk(&mut cr, &mut cb, 0, 0.8).unwrap(), 0.6));
        assert!(close(cr.cv(&o, s1.location()), 0.6));

        let mut cr = ConceptRisk::new();
        for (i, r) in [0.9, 0.9, 0.3].into_iter().enumerate() {
            cb.case_mut(i).risk_history.clear();
            propagate_risk(&mut cr, &mut cb, i, r).unwrap();
        }
        assert!(close(cr.cv(&o, s1.location()), 0.7));
        assert_eq!(cr.provenance(s1.location()).count(), 3);
        assert!(propagate_risk(&mut cr, &mut cb, 0, 1.5).is_err());
    }

    #[test]
    fn seed_file_round_trip() {
        let file = RiskSeedFile {
            critical_situations: vec![SituationRecord {
                location: "A1".into(),
                time: "A".into(),
                social: "B".into(),
            }],
            concept_risks: vec![ConceptSeed {
                dimension: Dimension::Location,
                concept: "A1".into(),
                cv: 0.9,
            }],
            lambda: [0.2, 0.3, 0.5],
            b: 0.7,
            alpha: 2.0,
        };
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"B\":0.7"));
        let back: RiskSeedFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);

        let o = ontology();
        let mut cb = CaseBase::new();
        cb.push(&o, Case::new(sit(&o, "A1", "A", "B"), UserPreferences::new()))
            .unwrap();
        let cr = file.apply(&o, &mut cb).unwrap();
        assert!(cb.case(0).is_critical);
        assert_eq!(cr.cv(&o, o.concept(Dimension::Location, "A1").unwrap()), 0.9);
    }
}
