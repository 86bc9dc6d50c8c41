//! Situations, user preferences and the case base.
//!
//! A situation is one concept per context dimension. The case base maps
//! each known situation to the preferences observed in it; retrieval is a
//! linear argmax over situation similarity with ties going to the earliest
//! inserted case.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{ConceptId, Dimension, NodeId, Ontology};

/// Document identifier. Lower ids win argmax ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocumentId(pub u32);

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Situation {
    nodes: [NodeId; 3],
}

impl Situation {
    pub fn new(location: ConceptId, time: ConceptId, social: ConceptId) -> Result<Self> {
        let concepts = [location, time, social];
        for (c, expected) in concepts.iter().zip(Dimension::ALL) {
            if c.dimension != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: c.dimension,
                });
            }
        }
        Ok(Situation {
            nodes: concepts.map(|c| c.node),
        })
    }

    /// Resolves concept names against the ontology.
    pub fn from_names(ontology: &Ontology, location: &str, time: &str, social: &str) -> Result<Self> {
        Situation::new(
            ontology.concept(Dimension::Location, location)?,
            ontology.concept(Dimension::Time, time)?,
            ontology.concept(Dimension::Social, social)?,
        )
    }

    pub fn concept(&self, dimension: Dimension) -> ConceptId {
        ConceptId {
            dimension,
            node: self.nodes[dimension.index()],
        }
    }

    pub fn concepts(&self) -> [ConceptId; 3] {
        Dimension::ALL.map(|d| self.concept(d))
    }

    pub fn location(&self) -> ConceptId {
        self.concept(Dimension::Location)
    }

    pub fn time(&self) -> ConceptId {
        self.concept(Dimension::Time)
    }

    pub fn social(&self) -> ConceptId {
        self.concept(Dimension::Social)
    }

    pub(crate) fn node(&self, dimension: Dimension) -> NodeId {
        self.nodes[dimension.index()]
    }
}

/// Checks that every concept of `s` exists in its taxonomy.
pub fn validate_situation(ontology: &Ontology, s: &Situation) -> Result<()> {
    for d in Dimension::ALL {
        let tax = ontology.taxonomy(d);
        if !tax.contains(s.node(d)) {
            return Err(Error::UnknownConcept {
                dimension: d,
                concept: format!("#{}", s.node(d).0),
            });
        }
    }
    Ok(())
}

/// Mean of the per-dimension concept similarities.
pub fn situation_sim(ontology: &Ontology, a: &Situation, b: &Situation) -> Result<f64> {
    validate_situation(ontology, a)?;
    validate_situation(ontology, b)?;
    Ok(sim_unchecked(ontology, a, b))
}

pub(crate) fn sim_unchecked(ontology: &Ontology, a: &Situation, b: &Situation) -> f64 {
    let total: f64 = Dimension::ALL
        .iter()
        .map(|&d| ontology.taxonomy(d).node_similarity(a.node(d), b.node(d)))
        .sum();
    total / 3.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrefEntry {
    pub clicks: u64,
    pub recoms: u64,
    /// Seconds spent reading. Reported, never part of the reward.
    pub read_time: f64,
}

impl PrefEntry {
    /// Click-through ratio, 0 for a never-recommended document.
    pub fn reward(&self) -> f64 {
        if self.recoms == 0 {
            0.0
        } else {
            self.clicks as f64 / self.recoms as f64
        }
    }

    fn validate(&self, doc: DocumentId) -> Result<()> {
        let reason = if self.clicks > self.recoms {
            "clicks exceed recommendations"
        } else if !(self.read_time >= 0.0 && self.read_time.is_finite()) {
            "read time must be a finite non-negative number"
        } else {
            return Ok(());
        };
        Err(Error::InvalidPreferences {
            doc,
            reason: reason.to_string(),
        })
    }
}

/// Per-document click, recommendation and reading-time counters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UserPreferences {
    entries: BTreeMap<DocumentId, PrefEntry>,
}

impl UserPreferences {
    pub fn new() -> Self {
        Self::default()
    }

    /// Zeroed entries for every listed document.
    pub fn with_documents(docs: impl IntoIterator<Item = DocumentId>) -> Self {
        UserPreferences {
            entries: docs.into_iter().map(|d| (d, PrefEntry::default())).collect(),
        }
    }

    pub fn insert(&mut self, doc: DocumentId, entry: PrefEntry) -> Result<()> {
        entry.validate(doc)?;
        self.entries.insert(doc, entry);
        Ok(())
    }

    /// Counts one recommendation of `doc`, plus a click when `clicked`.
    pub fn record(&mut self, doc: DocumentId, clicked: bool, read_time: f64) {
        let e = self.entries.entry(doc).or_default();
        e.recoms += 1;
        if clicked {
            e.clicks += 1;
            e.read_time += read_time;
        }
    }

    /// Adds every counter of `other` into `self`.
    pub fn merge(&mut self, other: &UserPreferences) {
        for (doc, e) in &other.entries {
            let mine = self.entries.entry(*doc).or_default();
            mine.clicks += e.clicks;
            mine.recoms += e.recoms;
            mine.read_time += e.read_time;
        }
    }

    pub fn get(&self, doc: DocumentId) -> Option<&PrefEntry> {
        self.entries.get(&doc)
    }

    pub fn iter(&self) -> impl Iterator<Item = (DocumentId, &PrefEntry)> {
        self.entries.iter().map(|(d, e)| (*d, e))
    }

    pub fn documents(&self) -> impl Iterator<Item = DocumentId> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(clicks, recommendations)` summed over documents.
    pub fn totals(&self) -> (u64, u64) {
        self.entries
            .values()
            .fold((0, 0), |(c, r), e| (c + e.clicks, r + e.recoms))
    }

    pub fn validate(&self) -> Result<()> {
        self.entries.iter().try_for_each(|(d, e)| e.validate(*d))
    }
}

/// Click-through reward of one document: clicks over recommendations.
pub fn doc_reward(prefs: &UserPreferences, doc: DocumentId) -> Result<f64> {
    prefs.get(doc).map(PrefEntry::reward).ok_or(Error::UnknownDocument(doc))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub situation: Situation,
    pub preferences: UserPreferences,
    pub risk_history: Vec<f64>,
    pub is_critical: bool,
}

impl Case {
    pub fn new(situation: Situation, preferences: UserPreferences) -> Self {
        Case {
            situation,
            preferences,
            risk_history: Vec::new(),
            is_critical: false,
        }
    }

    /// Mean of all recorded risk values, if any were recorded.
    pub fn stored_risk(&self) -> Option<f64> {
        if self.risk_history.is_empty() {
            None
        } else {
            Some(self.risk_history.iter().sum::<f64>() / self.risk_history.len() as f64)
        }
    }

    fn validate(&self, ontology: &Ontology) -> Result<()> {
        validate_situation(ontology, &self.situation)?;
        self.preferences.validate()?;
        if let Some(&r) = self.risk_history.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::OutOfRange {
                what: "risk history value",
                value: r,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Retrieval {
    pub index: usize,
    pub similarity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseUpdate {
    Merged(usize),
    Inserted(usize),
}

impl CaseUpdate {
    pub fn index(self) -> usize {
        match self {
            CaseUpdate::Merged(i) | CaseUpdate::Inserted(i) => i,
        }
    }
}

/// The stored cases, in insertion order, with unique situations.
#[derive(Clone, Debug, Default)]
pub struct CaseBase {
    cases: Vec<Case>,
    index: HashMap<Situation, usize>,
}

impl PartialEq for CaseBase {
    fn eq(&self, other: &Self) -> bool {
        self.cases == other.cases
    }
}

impl CaseBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cases(ontology: &Ontology, cases: Vec<Case>) -> Result<Self> {
        let mut cb = CaseBase::new();
        for case in cases {
            cb.push(ontology, case)?;
        }
        Ok(cb)
    }

    /// Appends a case; its situation must not already be stored.
    pub fn push(&mut self, ontology: &Ontology, case: Case) -> Result<usize> {
        case.validate(ontology)?;
        if self.index.contains_key(&case.situation) {
            return Err(Error::config(
                "cases",
                format!("duplicate situation {}", describe(ontology, &case.situation)),
            ));
        }
        let i = self.cases.len();
        self.index.insert(case.situation, i);
        self.cases.push(case);
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn case(&self, index: usize) -> &Case {
        &self.cases[index]
    }

    pub(crate) fn case_mut(&mut self, index: usize) -> &mut Case {
        &mut self.cases[index]
    }

    pub fn find(&self, s: &Situation) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Critical cases with their indices, in insertion order.
    pub fn critical(&self) -> impl Iterator<Item = (usize, &Case)> {
        self.cases.iter().enumerate().filter(|(_, c)| c.is_critical)
    }

    pub fn set_critical(&mut self, index: usize, critical: bool) {
        self.cases[index].is_critical = critical;
    }

    /// Most similar stored case. Ties go to the earliest case.
    pub fn retrieve(&self, ontology: &Ontology, s: &Situation) -> Result<Retrieval> {
        validate_situation(ontology, s)?;
        if self.cases.is_empty() {
            return Err(Error::EmptyCaseBase);
        }
        // An exact match scores 1, the maximum, and situations are unique.
        if let Some(index) = self.find(s) {
            return Ok(Retrieval { index, similarity: 1.0 });
        }
        let mut best = Retrieval {
            index: 0,
            similarity: f64::NEG_INFINITY,
        };
        for (index, case) in self.cases.iter().enumerate() {
            let similarity = sim_unchecked(ontology, s, &case.situation);
            if similarity > best.similarity {
                best = Retrieval { index, similarity };
            }
        }
        Ok(best)
    }

    /// Merges `prefs` into the case for `s` if it exists, otherwise inserts
    /// a new non-critical case.
    pub fn update(&mut self, ontology: &Ontology, s: Situation, prefs: &UserPreferences) -> Result<CaseUpdate> {
        validate_situation(ontology, &s)?;
        prefs.validate()?;
        match self.find(&s) {
            Some(i) => {
                self.cases[i].preferences.merge(prefs);
                Ok(CaseUpdate::Merged(i))
            }
            None => {
                let i = self.push(ontology, Case::new(s, prefs.clone()))?;
                Ok(CaseUpdate::Inserted(i))
            }
        }
    }

    pub fn to_records(&self, ontology: &Ontology) -> Vec<CaseRecord> {
        self.cases
            .iter()
            .map(|c| CaseRecord {
                situation: SituationRecord::from_situation(ontology, &c.situation),
                prefs: c
                    .preferences
                    .iter()
                    .map(|(doc, e)| PrefRecord {
                        doc,
                        clicks: e.clicks,
                        recoms: e.recoms,
                        read_time: e.read_time,
                    })
                    .collect(),
                is_critical: c.is_critical,
                risk_history: c.risk_history.clone(),
            })
            .collect()
    }

    pub fn from_records(ontology: &Ontology, records: &[CaseRecord]) -> Result<Self> {
        let mut cb = CaseBase::new();
        for r in records {
            let situation = r.situation.resolve(ontology)?;
            let mut prefs = UserPreferences::new();
            for p in &r.prefs {
                prefs.insert(
                    p.doc,
                    PrefEntry {
                        clicks: p.clicks,
                        recoms: p.recoms,
                        read_time: p.read_time,
                    },
                )?;
            }
            cb.push(
                ontology,
                Case {
                    situation,
                    preferences: prefs,
                    risk_history: r.risk_history.clone(),
                    is_critical: r.is_critical,
                },
            )?;
        }
        Ok(cb)
    }

    pub fn to_json(&self, ontology: &Ontology) -> String {
        serde_json::to_string_pretty(&self.to_records(ontology)).expect("case base serializes")
    }

    pub fn from_json(ontology: &Ontology, text: &str) -> Result<Self> {
        let records: Vec<CaseRecord> = serde_json::from_str(text).map_err(|e| Error::json("case base", e))?;
        Self::from_records(ontology, &records)
    }

    pub fn save(&self, ontology: &Ontology, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json(ontology)).map_err(|e| Error::io(path, e))
    }

    pub fn load(ontology: &Ontology, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records: Vec<CaseRecord> =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_records(ontology, &records)
    }
}

fn describe(ontology: &Ontology, s: &Situation) -> String {
    let r = SituationRecord::from_situation(ontology, s);
    format!("({}, {}, {})", r.location, r.time, r.social)
}

/// Situation by concept names, as stored in snapshot and seed files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SituationRecord {
    pub location: String,
    pub time: String,
    pub social: String,
}

impl SituationRecord {
    pub fn from_situation(ontology: &Ontology, s: &Situation) -> Self {
        let name = |d: Dimension| ontology.taxonomy(d).node_name(s.node(d)).to_string();
        SituationRecord {
            location: name(Dimension::Location),
            time: name(Dimension::Time),
            social: name(Dimension::Social),
        }
    }

    pub fn resolve(&self, ontology: &Ontology) -> Result<Situation> {
        Situation::from_names(ontology, &self.location, &self.time, &self.social)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefRecord {
    pub doc: DocumentId,
    pub clicks: u64,
    pub recoms: u64,
    pub read_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub situation: SituationRecord,
    pub prefs: Vec<PrefRecord>,
    pub is_critical: bool,
    pub risk_history: Vec<f64>,
}
