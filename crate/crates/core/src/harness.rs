//! Experiment loop and analyses.
//!
//! A run repeatedly draws a test situation uniformly with replacement,
//! retrieves the closest stored case, asks the policy for a slate, draws
//! clicks from the ground truth and feeds them back into the case base and
//! the policy. Average CTR (total clicks over total displayed slots) is
//! sampled every `sample_every` trials.
//!
//! Each run owns three random streams derived from its seed: one for the
//! situation sequence, one for click draws and one for the policy. The
//! first two consume a fixed number of values per trial, so runs of
//! different policies with the same seed see the same situations and the
//! same uniform draws behind each slot's click.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{ConceptId, Ontology};
use crate::policies::{Feedback, Policy, PolicySpec, TrialContext, DEFAULT_SLATE_SIZE};
use crate::risk::{CtrCounter, RiskAssessment, RiskConfig, RiskModel, RiskSeedFile};
use crate::simenv::{simulate_feedback, Corpus, GroundTruth, LabeledSample, STRATA};
use crate::situations::{sim_unchecked, CaseBase, CaseUpdate, PrefEntry, Situation, UserPreferences};

/// Risk intervals reported per stratum, in percent.
pub const BUCKET_LABELS: [&str; STRATA] = ["[1,20]", "(20,40]", "(40,60]", "(60,80]", "(80,100]"];

/// Candidate pools must be strictly larger than this.
pub const MIN_POOL: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub iterations: u64,
    pub slate_size: usize,
    pub sample_every: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            iterations: 10_000,
            slate_size: DEFAULT_SLATE_SIZE,
            sample_every: 1000,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be positive"));
        }
        if self.slate_size == 0 || self.slate_size > MIN_POOL {
            return Err(Error::config("slate_size", format!("must lie in [1, {MIN_POOL}]")));
        }
        if self.sample_every == 0 || !self.iterations.is_multiple_of(self.sample_every) {
            return Err(Error::config("sample_every", "must divide iterations"));
        }
        Ok(())
    }

    pub fn points(&self) -> usize {
        (self.iterations / self.sample_every) as usize
    }
}

/// The fixed inputs of a run.
#[derive(Clone, Copy, Debug)]
pub struct Environment<'a> {
    pub ontology: &'a Ontology,
    /// Initial case base; every run works on its own copy.
    pub case_base: &'a CaseBase,
    /// Situations the runs are confronted with.
    pub test_situations: &'a [Situation],
    pub ground_truth: &'a GroundTruth,
    pub risk_seeds: &'a RiskSeedFile,
}

impl<'a> Environment<'a> {
    pub fn from_corpus(corpus: &'a Corpus, test_situations: &'a [Situation]) -> Self {
        Environment {
            ontology: &corpus.ontology,
            case_base: &corpus.case_base,
            test_situations,
            ground_truth: &corpus.ground_truth,
            risk_seeds: &corpus.risk_seeds,
        }
    }

    /// Test situations whose stored case has a pool larger than
    /// [`MIN_POOL`].
    pub fn eligible(&self) -> Vec<Situation> {
        self.test_situations
            .iter()
            .copied()
            .filter(|s| {
                self.ground_truth.get(s).is_some()
                    && match self.case_base.find(s) {
                        Some(i) => self.case_base.case(i).preferences.len() > MIN_POOL,
                        None => true,
                    }
            })
            .collect()
    }
}

/// Situations of every stored case, in case order.
pub fn all_situations(cb: &CaseBase) -> Vec<Situation> {
    cb.cases().iter().map(|c| c.situation).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub policy: PolicySpec,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    /// Replaces the risk parameters stored with the corpus.
    #[serde(default)]
    pub risk: Option<RiskConfig>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Record every risk assessment and propagation.
    pub trace_risk: bool,
    /// Keep the final case base in the result.
    pub keep_case_base: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub iteration: u64,
    pub avg_ctr: f64,
}

/// One R-UCB trial's risk computations.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskEvent {
    pub trial: u64,
    pub case_index: usize,
    pub assessment: RiskAssessment,
    /// Mean stored for the case after propagation.
    pub stored_mean: f64,
    /// Concepts of the situation with their value after propagation.
    pub concept_values: [(ConceptId, f64); 3],
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub label: String,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub clicks: u64,
    pub displays: u64,
    /// Counters by the ground-truth stratum of the test situation.
    pub by_stratum: [CtrCounter; STRATA],
    pub epsilon_sum: f64,
    pub explored_slots: u64,
    /// Pool size of every retrieved case, in trial order.
    pub pool_sizes: Vec<usize>,
    pub risk_trace: Vec<RiskEvent>,
    pub case_base: Option<CaseBase>,
}

impl RunResult {
    pub fn final_ctr(&self) -> f64 {
        self.curve.last().map_or(0.0, |p| p.avg_ctr)
    }

    /// Mean of the last `k` sampling points.
    pub fn converged_ctr(&self, k: usize) -> f64 {
        let tail = &self.curve[self.curve.len().saturating_sub(k)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|p| p.avg_ctr).sum::<f64>() / tail.len() as f64
    }

    pub fn mean_epsilon(&self, trials: u64) -> f64 {
        self.epsilon_sum / trials.max(1) as f64
    }

    pub fn stratum_ctr(&self, stratum: usize) -> Option<f64> {
        let c = self.by_stratum[stratum];
        (c.recs > 0).then(|| c.ctr())
    }
}

/// Independent stream `k` of a run seed.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 finaliser over a per-stream offset.
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn build_policy(env: &Environment<'_>, cfg: &RunConfig, cb: &CaseBase) -> Result<Policy> {
    let risk = if cfg.policy.needs_risk_model() {
        let config = cfg.risk.unwrap_or_else(|| env.risk_seeds.config());
        let concepts = env.risk_seeds.concept_risk(env.ontology)?;
        Some(RiskModel::new(config, env.ontology, cb, concepts)?)
    } else {
        None
    };
    Policy::from_spec(&cfg.policy, cfg.protocol.slate_size, cfg.protocol.iterations, risk)
}

/// Runs one policy through the protocol.
pub fn run_experiment(env: &Environment<'_>, cfg: &RunConfig, opts: RunOptions) -> Result<RunResult> {
    cfg.protocol.validate()?;
    let eligible = env.eligible();
    if eligible.is_empty() {
        return Err(Error::UnusableCorpus(format!(
            "no test situation has a candidate pool larger than {MIN_POOL}"
        )));
    }
    if env.case_base.is_empty() {
        return Err(Error::EmptyCaseBase);
    }
    let mut cb = env.case_base.clone();
    let mut policy = build_policy(env, cfg, &cb)?;
    let n = cfg.protocol.slate_size;
    let mut situation_rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, 0));
    let mut click_rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, 1));
    let mut policy_rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, 2));

    let mut result = RunResult {
        label: policy.label().to_string(),
        seed: cfg.seed,
        curve: Vec::with_capacity(cfg.protocol.points()),
        clicks: 0,
        displays: 0,
        by_stratum: [CtrCounter::default(); STRATA],
        epsilon_sum: 0.0,
        explored_slots: 0,
        pool_sizes: Vec::with_capacity(cfg.protocol.iterations as usize),
        risk_trace: Vec::new(),
        case_base: None,
    };

    for trial in 1..=cfg.protocol.iterations {
        let s = eligible[situation_rng.gen_range(0..eligible.len())];
        let retrieved = cb.retrieve(env.ontology, &s)?;
        let pool = cb.case(retrieved.index).preferences.len();
        if pool <= MIN_POOL {
            return Err(Error::UnusableCorpus(format!(
                "retrieved case {} has only {pool} documents",
                retrieved.index
            )));
        }
        result.pool_sizes.push(pool);
        let ctx = TrialContext {
            ontology: env.ontology,
            case_base: &cb,
            situation: s,
            retrieved,
            // Counts every slot issued so far, this trial included.
            trial: trial * n as u64,
        };
        let rec = policy.recommend(&ctx, &mut policy_rng)?;
        let clicks = simulate_feedback(env.ground_truth, &s, &rec.slate, &mut click_rng)?;

        let before = &cb.case(retrieved.index).preferences;
        let value_changes: Vec<f64> = rec
            .slate
            .docs
            .iter()
            .zip(&clicks)
            .map(|(&d, &c)| {
                let e = before.get(d).copied().unwrap_or_default();
                let after = PrefEntry {
                    clicks: e.clicks + u64::from(c),
                    recoms: e.recoms + 1,
                    read_time: e.read_time,
                };
                (after.reward() - e.reward()).abs()
            })
            .collect();

        // A new situation inherits the retrieved pool with empty counts.
        let mut observed = if cb.find(&s).is_some() {
            UserPreferences::new()
        } else {
            UserPreferences::with_documents(before.documents())
        };
        for (&d, &c) in rec.slate.docs.iter().zip(&clicks) {
            observed.record(d, c, 0.0);
        }
        let update = cb.update(env.ontology, s, &observed)?;
        if let CaseUpdate::Inserted(_) = update {
            log::debug!("trial {trial}: inserted a case for a new situation");
        }
        let case_index = update.index();

        let fb = Feedback {
            situation: s,
            recommendation: &rec,
            clicks: &clicks,
            value_changes: &value_changes,
            pool_size: pool,
            case_index,
        };
        policy.observe(&mut cb, &fb)?;

        if opts.trace_risk {
            if let (Some(a), Some(model)) = (rec.risk, policy.risk_model()) {
                let case = cb.case(case_index);
                let concept_values = case
                    .situation
                    .concepts()
                    .map(|c| (c, model.concepts().cv(env.ontology, c)));
                result.risk_trace.push(RiskEvent {
                    trial,
                    case_index,
                    assessment: a,
                    stored_mean: case.stored_risk().unwrap_or(f64::NAN),
                    concept_values,
                });
            }
        }

        let hits = clicks.iter().filter(|&&c| c).count() as u64;
        result.clicks += hits;
        result.displays += n as u64;
        result.epsilon_sum += rec.epsilon;
        result.explored_slots += rec.slate.explored_slots() as u64;
        if let Some(st) = env.ground_truth.stratum(&s) {
            result.by_stratum[st].clicks += hits;
            result.by_stratum[st].recs += n as u64;
        }
        if trial % cfg.protocol.sample_every == 0 {
            result.curve.push(CurvePoint {
                iteration: trial,
                avg_ctr: result.clicks as f64 / result.displays as f64,
            });
        }
    }
    if opts.keep_case_base {
        result.case_base = Some(cb);
    }
    Ok(result)
}

/// Runs `f` on a pool capped at `jobs` threads; `None` uses rayon's
/// default.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::config("jobs", "must be at least 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))
            .map(|pool| pool.install(f)),
    }
}

/// Seed of replication `r` under a base seed.
pub fn replication_seed(base: u64, r: usize) -> u64 {
    sub_seed(base, 1000 + r as u64)
}

#[derive(Clone, Debug)]
pub struct PolicyRow {
    pub label: String,
    pub runs: Vec<RunResult>,
}

impl PolicyRow {
    pub fn finals(&self) -> Vec<f64> {
        self.runs.iter().map(RunResult::final_ctr).collect()
    }

    pub fn mean_final(&self) -> f64 {
        mean(&self.finals())
    }

    pub fn std_final(&self) -> f64 {
        std_dev(&self.finals())
    }

    /// Mean over replications of the CTR at each sampling point.
    pub fn mean_curve(&self) -> Vec<CurvePoint> {
        let points = self.runs.first().map_or(0, |r| r.curve.len());
        (0..points)
            .map(|k| CurvePoint {
                iteration: self.runs[0].curve[k].iteration,
                avg_ctr: mean(&self.runs.iter().map(|r| r.curve[k].avg_ctr).collect::<Vec<_>>()),
            })
            .collect()
    }

    pub fn std_curve(&self) -> Vec<f64> {
        let points = self.runs.first().map_or(0, |r| r.curve.len());
        (0..points)
            .map(|k| std_dev(&self.runs.iter().map(|r| r.curve[k].avg_ctr).collect::<Vec<_>>()))
            .collect()
    }

    /// Mean over replications of each stratum's CTR; `None` when no
    /// replication visited the stratum.
    pub fn stratum_means(&self) -> [Option<f64>; STRATA] {
        std::array::from_fn(|st| {
            let v: Vec<f64> = self.runs.iter().filter_map(|r| r.stratum_ctr(st)).collect();
            (!v.is_empty()).then(|| mean(&v))
        })
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub rows: Vec<PolicyRow>,
}

impl Comparison {
    pub fn row(&self, label: &str) -> Option<&PolicyRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Runs every policy for `replications` seeds; replication `r` uses the
/// same seed for every policy.
pub fn compare_policies(
    env: &Environment<'_>,
    policies: &[PolicySpec],
    protocol: ProtocolConfig,
    risk: Option<RiskConfig>,
    replications: usize,
    seed: u64,
    jobs: Option<usize>,
) -> Result<Comparison> {
    if replications == 0 {
        return Err(Error::config("replications", "must be positive"));
    }
    if policies.is_empty() {
        return Err(Error::config("policies", "must not be empty"));
    }
    let tasks: Vec<(usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..replications).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<RunResult>> = with_jobs(jobs, || {
        tasks
            .par_iter()
            .map(|&(p, r)| {
                let cfg = RunConfig {
                    policy: policies[p].clone(),
                    protocol,
                    risk,
                    seed: replication_seed(seed, r),
                };
                run_experiment(env, &cfg, RunOptions::default())
            })
            .collect()
    })?;
    let mut results = results.into_iter();
    let mut rows = Vec::with_capacity(policies.len());
    for spec in policies {
        let runs = results.by_ref().take(replications).collect::<Result<Vec<_>>>()?;
        rows.push(PolicyRow {
            label: spec.label(),
            runs,
        });
    }
    Ok(Comparison { rows })
}

/// The default line-up: pure exploitation, the static and scheduled
/// UCB variants, the adaptive ones and R-UCB.
pub fn default_lineup() -> Vec<PolicySpec> {
    vec![
        PolicySpec::PureExploitation,
        PolicySpec::EpsUcb { epsilon: 0.1 },
        PolicySpec::EpsUcb { epsilon: 0.5 },
        PolicySpec::BeginningUcb {
            epsilon: 0.1,
            horizon: None,
        },
        PolicySpec::DecreasingUcb,
        PolicySpec::EgUcb {
            learning_rate: crate::policies::DEFAULT_EG_LEARNING_RATE,
        },
        PolicySpec::VdbeUcb {
            temperature: crate::policies::DEFAULT_VDBE_TEMPERATURE,
            step: None,
            initial_epsilon: 1.0,
        },
        PolicySpec::RUcb {
            eps_min: crate::policies::DEFAULT_EPS_MIN,
            eps_max: crate::policies::DEFAULT_EPS_MAX,
        },
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketRow {
    pub label: String,
    pub bucket: usize,
    /// `None` when no replication visited the bucket.
    pub ctr: Option<f64>,
}

/// Average CTR per policy and risk interval.
pub fn risk_bucket_report(cmp: &Comparison) -> Vec<BucketRow> {
    cmp.rows
        .iter()
        .flat_map(|row| {
            row.stratum_means()
                .into_iter()
                .enumerate()
                .map(|(bucket, ctr)| BucketRow {
                    label: row.label.clone(),
                    bucket,
                    ctr,
                })
        })
        .collect()
}

/// Per bucket, `label`'s CTR minus the best other policy's.
pub fn bucket_gaps(cmp: &Comparison, label: &str) -> [Option<f64>; STRATA] {
    let Some(target) = cmp.row(label) else {
        return [None; STRATA];
    };
    let own = target.stratum_means();
    std::array::from_fn(|st| {
        let best_other = cmp
            .rows
            .iter()
            .filter(|r| r.label != label)
            .filter_map(|r| r.stratum_means()[st])
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        Some(own[st]? - best_other?)
    })
}

/// Pairwise accuracy of grouping `situations` into connected components
/// of the graph `sim >= b`, against `labels`.
pub fn clustering_accuracy(ontology: &Ontology, situations: &[Situation], labels: &[usize], b: f64) -> f64 {
    let n = situations.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if sim_unchecked(ontology, &situations[i], &situations[j]) >= b {
                let (a, c) = (find(&mut parent, i), find(&mut parent, j));
                if a != c {
                    parent[a.max(c)] = a.min(c);
                }
            }
        }
    }
    let group: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut agree = 0u64;
    let mut pairs = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            agree += u64::from((group[i] == group[j]) == (labels[i] == labels[j]));
        }
    }
    if pairs == 0 {
        1.0
    } else {
        agree as f64 / pairs as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepB {
    pub points: Vec<(f64, f64)>,
    /// Midpoint of the first run of grid points reaching the maximum.
    pub best: f64,
    pub best_accuracy: f64,
}

/// The grid `0, 0.05, ..., 1`.
pub fn default_b_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

pub fn sweep_b(sample: &LabeledSample, grid: &[f64]) -> Result<SweepB> {
    let distinct: std::collections::BTreeSet<usize> = sample.labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::config("labels", "need at least 2 labelled clusters"));
    }
    if grid.is_empty() {
        return Err(Error::config("grid", "must not be empty"));
    }
    if sample.labels.len() != sample.situations.len() {
        return Err(Error::config("labels", "one label per situation"));
    }
    let points: Vec<(f64, f64)> = grid
        .iter()
        .map(|&b| {
            (
                b,
                clustering_accuracy(&sample.ontology, &sample.situations, &sample.labels, b),
            )
        })
        .collect();
    let best_accuracy = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let first = points
        .iter()
        .position(|p| p.1 == best_accuracy)
        .expect("grid not empty");
    let last = first + points[first..].iter().take_while(|p| p.1 == best_accuracy).count() - 1;
    Ok(SweepB {
        best: (points[first].0 + points[last].0) / 2.0,
        best_accuracy,
        points,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEps {
    /// `(epsilon, converged CTR)` per grid point.
    pub points: Vec<(f64, f64)>,
    pub eps_min: f64,
    pub eps_max: f64,
}

/// Number of final sampling points averaged into a converged CTR.
pub const CONVERGED_POINTS: usize = 3;

/// Runs epsilon-UCB at each grid value on half the critical situations
/// (drawn with `seed`). Grid points within `tolerance` of the best
/// converged CTR form the plateau whose extremes are recommended.
pub fn sweep_epsilon(
    env: &Environment<'_>,
    grid: &[f64],
    protocol: ProtocolConfig,
    replications: usize,
    tolerance: f64,
    seed: u64,
    jobs: Option<usize>,
) -> Result<SweepEps> {
    if grid.is_empty() {
        return Err(Error::config("grid", "must not be empty"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::config("tolerance", "must be non-negative"));
    }
    let critical: Vec<Situation> = env
        .test_situations
        .iter()
        .copied()
        .filter(|s| env.case_base.find(s).is_some_and(|i| env.case_base.case(i).is_critical))
        .collect();
    if critical.is_empty() {
        return Err(Error::EmptyCriticalSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 7));
    let keep = ((critical.len() as f64) * 0.5).round().max(1.0) as usize;
    let mut picked = rand::seq::index::sample(&mut rng, critical.len(), keep).into_vec();
    picked.sort_unstable();
    let subsample: Vec<Situation> = picked.into_iter().map(|i| critical[i]).collect();
    let sub_env = Environment {
        test_situations: &subsample,
        ..*env
    };
    let specs: Vec<PolicySpec> = grid.iter().map(|&epsilon| PolicySpec::EpsUcb { epsilon }).collect();
    let cmp = compare_policies(&sub_env, &specs, protocol, None, replications, seed, jobs)?;
    let points: Vec<(f64, f64)> = grid
        .iter()
        .zip(&cmp.rows)
        .map(|(&e, row)| {
            (
                e,
                mean(
                    &row.runs
                        .iter()
                        .map(|r| r.converged_ctr(CONVERGED_POINTS))
                        .collect::<Vec<_>>(),
                ),
            )
        })
        .collect();
    let best = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let plateau: Vec<f64> = points.iter().filter(|p| p.1 >= best - tolerance).map(|p| p.0).collect();
    Ok(SweepEps {
        eps_min: plateau.iter().copied().fold(f64::INFINITY, f64::min),
        eps_max: plateau.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        points,
    })
}

/// Case-base fractions of the sparsity analysis.
pub const DEFAULT_FRACTIONS: [f64; 7] = [1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.01];

#[derive(Clone, Debug)]
pub struct SparsityRow {
    pub fraction: f64,
    pub comparison: Comparison,
}

/// Compares the policies on sparsified copies of the case base while the
/// test situations stay the full set.
#[allow(clippy::too_many_arguments)]
pub fn sparsity_sweep(
    env: &Environment<'_>,
    policies: &[PolicySpec],
    fractions: &[f64],
    protocol: ProtocolConfig,
    replications: usize,
    seed: u64,
    jobs: Option<usize>,
) -> Result<Vec<SparsityRow>> {
    let mut rows = Vec::with_capacity(fractions.len());
    for (k, &fraction) in fractions.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 100 + k as u64));
        let cb = crate::simenv::sparsify(env.ontology, env.case_base, fraction, &mut rng)?;
        let sparse = Environment { case_base: &cb, ..*env };
        let comparison = compare_policies(&sparse, policies, protocol, None, replications, seed, jobs)?;
        rows.push(SparsityRow { fraction, comparison });
    }
    Ok(rows)
}

/// Long-format CSV writers. Each returns the column header line followed
/// by the data rows.
pub mod csv {
    use super::*;

    pub fn curve(result: &RunResult) -> String {
        let mut out = String::from("iteration,policy,avg_ctr\n");
        for p in &result.curve {
            let _ = writeln!(out, "{},{},{}", p.iteration, result.label, p.avg_ctr);
        }
        out
    }

    pub fn comparison(cmp: &Comparison) -> String {
        let mut out = String::from("iteration,policy,avg_ctr,stddev\n");
        for row in &cmp.rows {
            for (p, sd) in row.mean_curve().iter().zip(row.std_curve()) {
                let _ = writeln!(out, "{},{},{},{}", p.iteration, row.label, p.avg_ctr, sd);
            }
        }
        out
    }

    pub fn comparison_summary(cmp: &Comparison) -> String {
        let mut out = String::from("policy,replications,final_ctr_mean,final_ctr_stddev\n");
        for row in &cmp.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.label,
                row.runs.len(),
                row.mean_final(),
                row.std_final()
            );
        }
        out
    }

    /// Empty buckets are omitted.
    pub fn buckets(rows: &[BucketRow]) -> String {
        let mut out = String::from("policy,risk_bucket,avg_ctr\n");
        for r in rows {
            if let Some(ctr) = r.ctr {
                let _ = writeln!(out, "{},{},{}", r.label, BUCKET_LABELS[r.bucket], ctr);
            }
        }
        out
    }

    pub fn sweep_b(sweep: &SweepB) -> String {
        let mut out = String::from("b,pairwise_accuracy\n");
        for (b, acc) in &sweep.points {
            let _ = writeln!(out, "{b},{acc}");
        }
        out
    }

    pub fn sweep_eps(sweep: &SweepEps) -> String {
        let mut out = String::from("epsilon,converged_ctr\n");
        for (e, ctr) in &sweep.points {
            let _ = writeln!(out, "{e},{ctr}");
        }
        out
    }

    pub fn sparsity(rows: &[SparsityRow]) -> String {
        let mut out = String::from("fraction,policy,final_ctr_mean,final_ctr_stddev\n");
        for r in rows {
            for row in &r.comparison.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.fraction,
                    row.label,
                    row.mean_final(),
                    row.std_final()
                );
            }
        }
        out
    }
}
