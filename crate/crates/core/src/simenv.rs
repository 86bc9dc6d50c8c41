//! Synthetic corpus generator and click model.
//!
//! A corpus is three random taxonomies, a case base of distinct situations
//! with click history over a shared document catalogue, per-situation
//! click probabilities, and a five-level risk stratum for every situation.
//! Situations in the top stratum are flagged critical.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{ConceptId, Dimension, Ontology, Taxonomy};
use crate::policies::Slate;
use crate::risk::{ConceptSeed, RiskConfig, RiskSeedFile};
use crate::situations::{Case, CaseBase, DocumentId, PrefEntry, Situation, SituationRecord, UserPreferences};

pub const STRATA: usize = 5;
/// Fraction of situations per stratum, lowest risk first.
pub const DEFAULT_STRATUM_PROPORTIONS: [f64; STRATA] = [0.20, 0.17, 0.20, 0.25, 0.18];
/// Mean click probability per stratum, lowest risk first.
pub const DEFAULT_STRATUM_CTR: [f64; STRATA] = [0.30, 0.22, 0.15, 0.08, 0.03];

pub const CASE_BASE_FILE: &str = "case_base.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const RISK_SEEDS_FILE: &str = "risk_seeds.json";
pub const CORPUS_SPEC_FILE: &str = "corpus_spec.json";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeShape {
    pub min_branching: usize,
    pub max_branching: usize,
    pub min_depth: u32,
    pub max_depth: u32,
    /// Growth stops once the tree has this many nodes.
    pub max_nodes: usize,
}

impl Default for TreeShape {
    fn default() -> Self {
        TreeShape {
            min_branching: 2,
            max_branching: 5,
            min_depth: 3,
            max_depth: 6,
            max_nodes: 150,
        }
    }
}

impl TreeShape {
    fn validate(&self) -> Result<()> {
        if self.min_branching < 1 || self.min_branching > self.max_branching {
            return Err(Error::config("taxonomy.branching", "need 1 <= min <= max"));
        }
        if self.min_depth < 2 || self.min_depth > self.max_depth {
            return Err(Error::config("taxonomy.depth", "need 2 <= min <= max"));
        }
        if self.max_nodes < 1 + self.max_branching {
            return Err(Error::config("taxonomy.max_nodes", "too small for one level"));
        }
        Ok(())
    }
}

/// Corpus generation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub situations: usize,
    pub docs_per_case: usize,
    /// Mean number of documents with recorded history per situation.
    pub entries_per_situation: f64,
    /// Mean number of past recommendations per history entry.
    pub recoms_per_entry: f64,
    pub stratum_proportions: [f64; STRATA],
    pub stratum_ctr: [f64; STRATA],
    /// Per-document multiplicative jitter half-width.
    pub jitter: f64,
    pub taxonomy: TreeShape,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            situations: 1000,
            docs_per_case: 25,
            entries_per_situation: 15.47,
            recoms_per_entry: 5.0,
            stratum_proportions: DEFAULT_STRATUM_PROPORTIONS,
            stratum_ctr: DEFAULT_STRATUM_CTR,
            jitter: 0.5,
            taxonomy: TreeShape::default(),
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.situations == 0 {
            return Err(Error::config("situations", "must be positive"));
        }
        if self.docs_per_case <= 20 {
            return Err(Error::config("docs_per_case", "must exceed 20"));
        }
        if !(self.entries_per_situation >= 0.0 && self.entries_per_situation <= self.docs_per_case as f64) {
            return Err(Error::config("entries_per_situation", "must lie in [0, docs_per_case]"));
        }
        if !(self.recoms_per_entry >= 1.0 && self.recoms_per_entry.is_finite()) {
            return Err(Error::config("recoms_per_entry", "must be at least 1"));
        }
        if self.stratum_proportions.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::config("stratum_proportions", "must be non-negative"));
        }
        if (self.stratum_proportions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("stratum_proportions", "must sum to 1"));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::config("jitter", "must lie in [0, 1)"));
        }
        for (i, m) in self.stratum_ctr.iter().enumerate() {
            if !(*m > 0.0 && m * (1.0 + self.jitter) <= 1.0) {
                return Err(Error::config(
                    "stratum_ctr",
                    format!("stratum {} mean must be positive and stay <= 1 after jitter", i + 1),
                ));
            }
        }
        if self.stratum_ctr.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("stratum_ctr", "must strictly decrease with risk"));
        }
        self.taxonomy.validate()
    }
}

/// Exact partition of `n` items by `proportions`, largest remainders first
/// (earlier strata win remainder ties).
pub fn stratum_sizes(n: usize, proportions: &[f64; STRATA]) -> [usize; STRATA] {
    let raw = proportions.map(|p| p * n as f64);
    let mut sizes = raw.map(|r| r.floor() as usize);
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..STRATA).collect();
    order.sort_by(|&a, &b| {
        (raw[b] - raw[b].floor())
            .total_cmp(&(raw[a] - raw[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

#[derive(Clone, Debug, PartialEq)]
pub struct SituationTruth {
    /// 0 is the lowest risk interval, 4 the highest.
    pub stratum: usize,
    /// Click probability per document id.
    pub probs: Vec<f64>,
}

/// Hidden click model of a corpus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    entries: BTreeMap<Situation, SituationTruth>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, s: Situation, truth: SituationTruth) -> Result<()> {
        if truth.stratum >= STRATA {
            return Err(Error::Generation(format!("stratum {} out of range", truth.stratum)));
        }
        if let Some(&p) = truth.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::OutOfRange {
                what: "click probability",
                value: p,
            });
        }
        self.entries.insert(s, truth);
        Ok(())
    }

    pub fn get(&self, s: &Situation) -> Option<&SituationTruth> {
        self.entries.get(s)
    }

    pub fn stratum(&self, s: &Situation) -> Option<usize> {
        self.entries.get(s).map(|t| t.stratum)
    }

    pub fn probability(&self, s: &Situation, doc: DocumentId) -> Result<f64> {
        self.entries
            .get(s)
            .and_then(|t| t.probs.get(doc.0 as usize))
            .copied()
            .ok_or(Error::UnknownDocument(doc))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Situation, &SituationTruth)> {
        self.entries.iter()
    }

    /// Mean click probability per stratum; `None` for empty strata.
    pub fn stratum_means(&self) -> [Option<f64>; STRATA] {
        let mut sum = [0.0; STRATA];
        let mut count = [0usize; STRATA];
        for t in self.entries.values() {
            sum[t.stratum] += t.probs.iter().sum::<f64>();
            count[t.stratum] += t.probs.len();
        }
        std::array::from_fn(|i| (count[i] > 0).then(|| sum[i] / count[i] as f64))
    }

    /// Errors unless mean click probability strictly decreases over the
    /// non-empty strata.
    pub fn check_monotone(&self) -> Result<()> {
        let means: Vec<f64> = self.stratum_means().into_iter().flatten().collect();
        if means.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Generation(format!(
                "stratum click means {means:?} are not strictly decreasing"
            )));
        }
        Ok(())
    }

    pub fn to_file(&self, ontology: &Ontology) -> GroundTruthFile {
        GroundTruthFile {
            situations: self
                .entries
                .iter()
                .map(|(s, t)| TruthRecord {
                    situation: SituationRecord::from_situation(ontology, s),
                    stratum: t.stratum,
                    probs: t.probs.clone(),
                })
                .collect(),
        }
    }

    pub fn from_file(ontology: &Ontology, file: &GroundTruthFile) -> Result<Self> {
        let mut gt = GroundTruth::new();
        for rec in &file.situations {
            gt.insert(
                rec.situation.resolve(ontology)?,
                SituationTruth {
                    stratum: rec.stratum,
                    probs: rec.probs.clone(),
                },
            )?;
        }
        Ok(gt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub situations: Vec<TruthRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub situation: SituationRecord,
    pub stratum: usize,
    pub probs: Vec<f64>,
}

/// Everything an experiment needs.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub ontology: Ontology,
    pub case_base: CaseBase,
    pub ground_truth: GroundTruth,
    pub risk_seeds: RiskSeedFile,
}

impl Corpus {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.ontology.save_dir(dir)?;
        self.case_base.save(&self.ontology, dir.join(CASE_BASE_FILE))?;
        write_json(dir.join(GROUND_TRUTH_FILE), &self.ground_truth.to_file(&self.ontology))?;
        self.risk_seeds.save(dir.join(RISK_SEEDS_FILE))?;
        write_json(dir.join(CORPUS_SPEC_FILE), &self.spec)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
            ));
        }
        let ontology = Ontology::load_dir(dir)?;
        let case_base = CaseBase::load(&ontology, dir.join(CASE_BASE_FILE))?;
        let gt_file: GroundTruthFile = read_json(dir.join(GROUND_TRUTH_FILE))?;
        let ground_truth = GroundTruth::from_file(&ontology, &gt_file)?;
        let risk_seeds = RiskSeedFile::load(dir.join(RISK_SEEDS_FILE))?;
        let spec = read_json(dir.join(CORPUS_SPEC_FILE))?;
        Ok(Corpus {
            spec,
            ontology,
            case_base,
            ground_truth,
            risk_seeds,
        })
    }
}

pub(crate) fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// Grows a random tree: nodes are expanded in random order until the
/// node budget is spent or every frontier node sits at the target depth.
pub fn random_taxonomy<R: Rng + ?Sized>(dimension: Dimension, shape: &TreeShape, rng: &mut R) -> Result<Taxonomy> {
    shape.validate()?;
    let target = rng.gen_range(shape.min_depth..=shape.max_depth);
    let root = dimension.as_str().to_string();
    let mut names = vec![root.clone()];
    let mut depth = vec![1u32];
    let mut edges: Vec<(String, Option<String>)> = Vec::new();
    let mut frontier = vec![0usize];
    while !frontier.is_empty() && names.len() < shape.max_nodes {
        let k = rng.gen_range(0..frontier.len());
        let node = frontier.swap_remove(k);
        let children = rng.gen_range(shape.min_branching..=shape.max_branching);
        for _ in 0..children {
            let id = names.len();
            let name = format!("{}_{}", dimension.as_str(), id);
            edges.push((name.clone(), Some(names[node].clone())));
            names.push(name);
            depth.push(depth[node] + 1);
            if depth[id] < target {
                frontier.push(id);
            }
        }
    }
    Taxonomy::from_edges(dimension, &root, &edges)
}

/// Builds a corpus from `spec`; a pure function of the spec and its seed.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [l, t, s] =
        [Dimension::Location, Dimension::Time, Dimension::Social].map(|d| random_taxonomy(d, &spec.taxonomy, &mut rng));
    let ontology = Ontology::new(l?, t?, s?)?;

    let latent = latent_concept_risk(&ontology, &mut rng);
    let leaves = Dimension::ALL.map(|d| ontology.taxonomy(d).leaves());
    let capacity: f64 = leaves.iter().map(|l| l.len() as f64).product();
    if spec.situations as f64 > capacity {
        return Err(Error::Generation(format!(
            "{} situations requested but only {} distinct leaf triples exist",
            spec.situations, capacity
        )));
    }
    let mut situations = BTreeSet::new();
    let mut order = Vec::with_capacity(spec.situations);
    while order.len() < spec.situations {
        let pick = leaves
            .each_ref()
            .map(|l| *l.choose(&mut rng).expect("taxonomy has leaves"));
        let s = Situation::new(pick[0], pick[1], pick[2])?;
        if situations.insert(s) {
            order.push(s);
        }
    }

    // Rank by latent risk (lowest first) and cut into strata.
    let mut scored: Vec<(f64, usize)> = order
        .iter()
        .enumerate()
        .map(|(i, s)| (s.concepts().iter().map(|c| latent[c]).sum::<f64>() / 3.0, i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let sizes = stratum_sizes(spec.situations, &spec.stratum_proportions);
    let mut stratum_of = vec![0usize; spec.situations];
    let mut at = 0;
    for (k, &n) in sizes.iter().enumerate() {
        for &(_, i) in &scored[at..at + n] {
            stratum_of[i] = k;
        }
        at += n;
    }

    let docs = spec.docs_per_case;
    let mut ground_truth = GroundTruth::new();
    let mut cases = Vec::with_capacity(spec.situations);
    for (i, &s) in order.iter().enumerate() {
        let stratum = stratum_of[i];
        let mean = spec.stratum_ctr[stratum];
        let probs: Vec<f64> = (0..docs)
            .map(|_| (mean * (1.0 + spec.jitter * rng.gen_range(-1.0..=1.0))).clamp(0.0, 1.0))
            .collect();
        let prefs = history(spec, &probs, &mut rng);
        let mut case = Case::new(s, prefs);
        case.is_critical = stratum == STRATA - 1;
        cases.push(case);
        ground_truth.insert(s, SituationTruth { stratum, probs })?;
    }
    ground_truth.check_monotone()?;
    let case_base = CaseBase::from_cases(&ontology, cases)?;
    let risk_seeds = risk_annotations(&ontology, &case_base);
    Ok(Corpus {
        spec: spec.clone(),
        ontology,
        case_base,
        ground_truth,
        risk_seeds,
    })
}

/// Random walk down each tree: a child's latent risk is its parent's plus
/// a uniform step that shrinks with depth.
fn latent_concept_risk<R: Rng + ?Sized>(ontology: &Ontology, rng: &mut R) -> BTreeMap<ConceptId, f64> {
    let mut out = BTreeMap::new();
    for tax in ontology.taxonomies() {
        for c in tax.concepts() {
            let value = match tax.parent(c).expect("concept from this taxonomy") {
                None => 0.0,
                Some(p) => {
                    let d = tax.depth(c).expect("concept from this taxonomy") as f64;
                    out[&p] + rng.gen_range(-1.0..=1.0) / (d - 1.0)
                }
            };
            out.insert(c, value);
        }
    }
    out
}

/// Past recommendations for one situation: every catalogue document is
/// listed, about `entries_per_situation` of them with non-zero counts.
fn history<R: Rng + ?Sized>(spec: &CorpusSpec, probs: &[f64], rng: &mut R) -> UserPreferences {
    let whole = spec.entries_per_situation.floor();
    let entries = whole as usize + usize::from(rng.gen_bool(spec.entries_per_situation - whole));
    let mut ids: Vec<usize> = (0..probs.len()).collect();
    ids.shuffle(rng);
    let mut prefs = UserPreferences::with_documents((0..probs.len() as u32).map(DocumentId));
    let max_recoms = (2.0 * spec.recoms_per_entry - 1.0).round().max(1.0) as u64;
    for &d in &ids[..entries.min(probs.len())] {
        let recoms = rng.gen_range(1..=max_recoms);
        let clicks = (0..recoms).filter(|_| rng.gen_bool(probs[d])).count() as u64;
        let read_time = (0..clicks).map(|_| rng.gen_range(10.0..300.0)).sum();
        prefs
            .insert(
                DocumentId(d as u32),
                PrefEntry {
                    clicks,
                    recoms,
                    read_time,
                },
            )
            .expect("clicks never exceed recoms");
    }
    prefs
}

/// Critical situations plus concept seeds: every concept used by a
/// critical situation gets the share of its situations that are critical.
pub fn risk_annotations(ontology: &Ontology, cb: &CaseBase) -> RiskSeedFile {
    let mut usage: BTreeMap<ConceptId, (usize, usize)> = BTreeMap::new();
    for case in cb.cases() {
        for c in case.situation.concepts() {
            let e = usage.entry(c).or_default();
            e.0 += usize::from(case.is_critical);
            e.1 += 1;
        }
    }
    let config = RiskConfig::default();
    RiskSeedFile {
        critical_situations: cb
            .critical()
            .map(|(_, c)| SituationRecord::from_situation(ontology, &c.situation))
            .collect(),
        concept_risks: usage
            .into_iter()
            .filter(|(_, (crit, _))| *crit > 0)
            .map(|(c, (crit, all))| ConceptSeed {
                dimension: c.dimension,
                concept: ontology
                    .taxonomy(c.dimension)
                    .name(c)
                    .expect("known concept")
                    .to_string(),
                cv: crit as f64 / all as f64,
            })
            .collect(),
        lambda: config.lambda.to_array(),
        b: config.threshold,
        alpha: config.alpha,
    }
}

/// One independent Bernoulli draw per slate document.
pub fn simulate_feedback<R: Rng + ?Sized>(
    gt: &GroundTruth,
    s: &Situation,
    slate: &Slate,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let truth = gt
        .get(s)
        .ok_or_else(|| Error::UnusableCorpus("situation has no ground truth".into()))?;
    slate
        .docs
        .iter()
        .map(|&d| {
            let p = *truth.probs.get(d.0 as usize).ok_or(Error::UnknownDocument(d))?;
            Ok(rng.gen::<f64>() < p)
        })
        .collect()
}

/// Keeps `round_half_up(fraction * n)` cases chosen uniformly, in their
/// original order, with criticality flags intact.
pub fn sparsify<R: Rng + ?Sized>(ontology: &Ontology, cb: &CaseBase, fraction: f64, rng: &mut R) -> Result<CaseBase> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("fraction", "must lie in (0, 1]"));
    }
    let keep = (fraction * cb.len() as f64 + 0.5).floor() as usize;
    if keep == 0 {
        return Err(Error::Generation("sparsified case base would be empty".into()));
    }
    let mut picked = rand::seq::index::sample(rng, cb.len(), keep).into_vec();
    picked.sort_unstable();
    CaseBase::from_cases(ontology, picked.into_iter().map(|i| cb.case(i).clone()).collect())
}

/// Parameters of the labelled clustering used to calibrate the
/// similarity threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSpec {
    pub clusters: usize,
    pub per_cluster: usize,
    /// Lowest similarity between two situations of one cluster.
    pub intra_min: f64,
    /// Highest similarity between situations of different clusters.
    pub inter_max: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            clusters: 6,
            per_cluster: 15,
            intra_min: 0.8,
            inter_max: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LabeledSample {
    pub ontology: Ontology,
    pub situations: Vec<Situation>,
    pub labels: Vec<usize>,
    /// Midpoint of the gap between inter- and intra-cluster similarity.
    pub threshold: f64,
}

/// Depth of the leaves in the clustering taxonomies.
const CLUSTER_DEPTH: u32 = 10;

/// Each taxonomy is `CLUSTER_DEPTH` levels deep. A cluster owns a chain
/// whose tip fans out into leaves, so two members of one cluster share an
/// ancestor at depth `intra_depth`; clusters branch off at depth
/// `inter_depth`, which bounds cross-cluster similarity.
pub fn labeled_clusters(spec: &ClusterSpec) -> Result<LabeledSample> {
    if spec.clusters < 2 {
        return Err(Error::config("clusters", "need at least 2 labelled clusters"));
    }
    if spec.per_cluster < 1 {
        return Err(Error::config("per_cluster", "must be positive"));
    }
    if !(0.0 < spec.inter_max && spec.inter_max < spec.intra_min && spec.intra_min < 1.0) {
        return Err(Error::config(
            "intra_min/inter_max",
            "need 0 < inter_max < intra_min < 1",
        ));
    }
    let d = CLUSTER_DEPTH as f64;
    let intra_depth = (spec.intra_min * d).ceil() as u32;
    let inter_depth = (spec.inter_max * d).floor() as u32;
    if inter_depth < 1 || intra_depth >= CLUSTER_DEPTH || inter_depth >= intra_depth {
        return Err(Error::config(
            "intra_min/inter_max",
            "gap too narrow for the taxonomy depth",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let leaves_per_cluster = spec.per_cluster.max(2);

    let mut taxonomies = Vec::with_capacity(3);
    for dim in Dimension::ALL {
        let root = dim.as_str().to_string();
        let mut edges: Vec<(String, Option<String>)> = Vec::new();
        // Shared trunk from the root down to the branching depth.
        let mut trunk = root.clone();
        for level in 2..=inter_depth {
            let name = format!("{}_t{}", dim.as_str(), level);
            edges.push((name.clone(), Some(trunk)));
            trunk = name;
        }
        for c in 0..spec.clusters {
            let mut tip = trunk.clone();
            for level in inter_depth + 1..=intra_depth {
                let name = format!("{}_c{}_{}", dim.as_str(), c, level);
                edges.push((name.clone(), Some(tip)));
                tip = name;
            }
            for leaf in 0..leaves_per_cluster {
                let mut parent = tip.clone();
                for level in intra_depth + 1..=CLUSTER_DEPTH {
                    let name = format!("{}_c{}_l{}_{}", dim.as_str(), c, leaf, level);
                    edges.push((name.clone(), Some(parent)));
                    parent = name;
                }
            }
        }
        taxonomies.push(Taxonomy::from_edges(dim, &root, &edges)?);
    }
    let social = taxonomies.pop().expect("three taxonomies");
    let time = taxonomies.pop().expect("three taxonomies");
    let location = taxonomies.pop().expect("three taxonomies");
    let ontology = Ontology::new(location, time, social)?;

    let leaf = |dim: Dimension, c: usize, l: usize| -> Result<ConceptId> {
        ontology.concept(dim, &format!("{}_c{}_l{}_{}", dim.as_str(), c, l, CLUSTER_DEPTH))
    };
    let mut situations = Vec::new();
    let mut labels = Vec::new();
    let mut seen = BTreeSet::new();
    for c in 0..spec.clusters {
        let mut made = 0;
        let mut attempts = 0;
        while made < spec.per_cluster {
            attempts += 1;
            if attempts > 1000 * spec.per_cluster {
                return Err(Error::Generation("could not draw distinct cluster members".into()));
            }
            let pick: Vec<usize> = (0..3).map(|_| rng.gen_range(0..leaves_per_cluster)).collect();
            let s = Situation::new(
                leaf(Dimension::Location, c, pick[0])?,
                leaf(Dimension::Time, c, pick[1])?,
                leaf(Dimension::Social, c, pick[2])?,
            )?;
            if seen.insert(s) {
                situations.push(s);
                labels.push(c);
                made += 1;
            }
        }
    }
    Ok(LabeledSample {
        ontology,
        situations,
        labels,
        threshold: (intra_depth as f64 / d + inter_depth as f64 / d) / 2.0,
    })
}
