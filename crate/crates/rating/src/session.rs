use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use dsa_territory::report::{resolve, CohortManifest};
use dsa_territory::stats::{mcnemar, TestResult};
use dsa_territory::{Method, Occlusion, Stage, View};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ServiceError;
use crate::model::{ConsensusRecord, Event, LikertRating, RatingItem, Resolution, SCHEMA_VERSION, SUCCESS_SCORE};

/// Builds the creation event: one item per acquisition and method.
pub fn plan_session(
    session_id: &str,
    manifest: &CohortManifest,
    base: &Path,
    methods: &[Method],
    raters: Vec<String>,
    adjudicator: String,
    seed: u64,
    blinded: bool,
) -> Result<Event, ServiceError> {
    if methods.is_empty() {
        return Err(ServiceError::BadRequest("no methods given".into()));
    }
    if raters.len() != 2 {
        return Err(ServiceError::BadRequest("a session needs exactly two raters".into()));
    }
    if raters[0] == raters[1] || raters.contains(&adjudicator) {
        return Err(ServiceError::BadRequest("raters and adjudicator must be distinct".into()));
    }
    let mut cases: Vec<_> = manifest.cases.iter().collect();
    cases.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    for case in cases {
        for acq in &case.acquisitions {
            for &method in methods {
                let overlay = acq.predictions.get(&method).ok_or_else(|| {
                    ServiceError::MissingMask(format!("{} has no {method} mask", acq.key(&case.patient_id)))
                })?;
                items.push(RatingItem {
                    item_id: format!("{session_id}-{:012x}", rng.random::<u64>() >> 16),
                    patient_id: case.patient_id.clone(),
                    view: acq.view,
                    stage: acq.stage,
                    occlusion: case.occlusion,
                    method,
                    minip: resolve(base, &acq.minip),
                    overlay: resolve(base, overlay),
                });
            }
        }
    }
    if items.is_empty() {
        return Err(ServiceError::BadRequest("manifest lists no acquisitions".into()));
    }
    Ok(Event::SessionCreated {
        session_id: session_id.to_string(),
        seed,
        raters,
        adjudicator,
        blinded,
        items,
    })
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub seed: u64,
    pub raters: Vec<String>,
    pub adjudicator: String,
    pub blinded: bool,
    pub items: Vec<RatingItem>,
    index: HashMap<String, usize>,
    /// All submissions per (item, rater), oldest first.
    ratings: BTreeMap<(String, String), Vec<LikertRating>>,
    adjudicated: BTreeMap<String, u8>,
    pub log: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingItem {
    pub item_id: String,
    pub scores: BTreeMap<String, u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: usize,
    pub total: usize,
    pub rate: f64,
}

impl Rate {
    fn new(successes: usize, total: usize) -> Self {
        let rate = if total == 0 { 0.0 } else { successes as f64 / total as f64 };
        Self { successes, total, rate }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumRate {
    pub stage: Stage,
    pub view: View,
    pub occlusion: Occlusion,
    #[serde(flatten)]
    pub rate: Rate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResults {
    pub method: Method,
    pub acquisitions: Rate,
    pub strata: Vec<StratumRate>,
    pub per_patient: Rate,
    /// Count of final scores 0..=3.
    pub score_distribution: [usize; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: Method,
    pub b: Method,
    pub patients: usize,
    /// Patients where `a` succeeded and `b` failed.
    pub a_only: u64,
    /// Patients where `b` succeeded and `a` failed.
    pub b_only: u64,
    pub mcnemar: Option<TestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub schema_version: u32,
    pub session_id: String,
    pub methods: Vec<MethodResults>,
    pub comparison: Option<PairedComparison>,
}

fn rater_seed(seed: u64, rater: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(rater.as_bytes());
    h.finalize().into()
}

impl Session {
    pub fn from_event(event: Event) -> Result<Self, ServiceError> {
        let Event::SessionCreated {
            session_id,
            seed,
            raters,
            adjudicator,
            blinded,
            items,
        } = &event
        else {
            return Err(ServiceError::Corrupt("log does not start with session creation".into()));
        };
        let index = items.iter().enumerate().map(|(i, it)| (it.item_id.clone(), i)).collect();
        Ok(Self {
            id: session_id.clone(),
            seed: *seed,
            raters: raters.clone(),
            adjudicator: adjudicator.clone(),
            blinded: *blinded,
            items: items.clone(),
            index,
            ratings: BTreeMap::new(),
            adjudicated: BTreeMap::new(),
            log: vec![event],
        })
    }

    pub fn item(&self, item_id: &str) -> Result<&RatingItem, ServiceError> {
        self.index
            .get(item_id)
            .map(|&i| &self.items[i])
            .ok_or_else(|| ServiceError::UnknownItem(item_id.to_string()))
    }

    pub fn check_rater(&self, rater: &str) -> Result<(), ServiceError> {
        if self.raters.iter().any(|r| r == rater) {
            Ok(())
        } else {
            Err(ServiceError::UnknownRater(rater.to_string()))
        }
    }

    /// Validates and applies an event. The session is unchanged on error.
    pub fn apply(&mut self, event: Event) -> Result<(), ServiceError> {
        match &event {
            Event::SessionCreated { .. } => {
                return Err(ServiceError::Corrupt("duplicate session creation".into()));
            }
            Event::Rating(r) => {
                self.item(&r.item_id)?;
                self.check_rater(&r.rater_id)?;
                if r.score > 3 {
                    return Err(ServiceError::ScoreOutOfRange(r.score));
                }
                self.ratings
                    .entry((r.item_id.clone(), r.rater_id.clone()))
                    .or_default()
                    .push(r.clone());
            }
            Event::Consensus {
                item_id,
                adjudicator,
                score,
                ..
            } => {
                self.item(item_id)?;
                if *adjudicator != self.adjudicator {
                    return Err(ServiceError::NotAdjudicator(adjudicator.clone()));
                }
                if *score > 3 {
                    return Err(ServiceError::ScoreOutOfRange(*score));
                }
                match self.scores(item_id) {
                    Some((a, b)) if a != b => {}
                    Some(_) => return Err(ServiceError::NotDisputed(format!("{item_id}: raters agree"))),
                    None => return Err(ServiceError::NotDisputed(format!("{item_id}: not rated by both raters"))),
                }
                self.adjudicated.insert(item_id.clone(), *score);
            }
        }
        self.log.push(event);
        Ok(())
    }

    /// Items in the presentation order of `rater`.
    pub fn order_for(&self, rater: &str) -> Result<Vec<&RatingItem>, ServiceError> {
        self.check_rater(rater)?;
        let mut idx: Vec<usize> = (0..self.items.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::from_seed(rater_seed(self.seed, rater)));
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }

    pub fn latest(&self, item_id: &str, rater: &str) -> Option<u8> {
        self.ratings
            .get(&(item_id.to_string(), rater.to_string()))
            .and_then(|v| v.last())
            .map(|r| r.score)
    }

    /// Every submission for an item, in log order.
    pub fn audit(&self, item_id: &str) -> Vec<&LikertRating> {
        let mut out: Vec<_> = self
            .log
            .iter()
            .filter_map(|e| match e {
                Event::Rating(r) if r.item_id == item_id => Some(r),
                _ => None,
            })
            .collect();
        out.sort_by_key(|r| r.timestamp);
        out
    }

    fn scores(&self, item_id: &str) -> Option<(u8, u8)> {
        Some((self.latest(item_id, &self.raters[0])?, self.latest(item_id, &self.raters[1])?))
    }

    pub fn consensus(&self, item_id: &str) -> Option<ConsensusRecord> {
        let (a, b) = self.scores(item_id)?;
        let (final_score, resolved_by) = if a == b {
            (a, Resolution::Agreement)
        } else {
            (*self.adjudicated.get(item_id)?, Resolution::Consensus)
        };
        Some(ConsensusRecord {
            item_id: item_id.to_string(),
            final_score,
            resolved_by,
        })
    }

    /// Rated by both raters with different scores and not yet adjudicated.
    pub fn pending(&self) -> Vec<PendingItem> {
        self.items
            .iter()
            .filter_map(|it| {
                let (a, b) = self.scores(&it.item_id)?;
                (a != b && !self.adjudicated.contains_key(&it.item_id)).then(|| PendingItem {
                    item_id: it.item_id.clone(),
                    scores: [(self.raters[0].clone(), a), (self.raters[1].clone(), b)].into(),
                })
            })
            .collect()
    }

    pub fn finalized(&self) -> Vec<ConsensusRecord> {
        self.items.iter().filter_map(|it| self.consensus(&it.item_id)).collect()
    }

    pub fn unfinalized(&self) -> Vec<String> {
        self.items
            .iter()
            .filter(|it| self.consensus(&it.item_id).is_none())
            .map(|it| it.item_id.clone())
            .collect()
    }

    /// Success rates per method. Every item must be finalized.
    pub fn results(&self) -> Result<Results, ServiceError> {
        let open = self.unfinalized();
        if !open.is_empty() {
            return Err(ServiceError::Unfinalized(open));
        }
        let mut methods: Vec<Method> = Vec::new();
        for it in &self.items {
            if !methods.contains(&it.method) {
                methods.push(it.method);
            }
        }
        let success = |it: &RatingItem| self.consensus(&it.item_id).unwrap().final_score >= SUCCESS_SCORE;
        let per_patient = |m: Method| -> BTreeMap<&str, bool> {
            let mut out: BTreeMap<&str, bool> = BTreeMap::new();
            for it in self.items.iter().filter(|it| it.method == m) {
                let ok = success(it);
                out.entry(&it.patient_id).and_modify(|v| *v &= ok).or_insert(ok);
            }
            out
        };
        let mut results = Vec::new();
        for &m in &methods {
            let items: Vec<&RatingItem> = self.items.iter().filter(|it| it.method == m).collect();
            let mut strata: BTreeMap<(Stage, View, Occlusion), (usize, usize)> = BTreeMap::new();
            let mut dist = [0usize; 4];
            for it in &items {
                let s = strata.entry((it.stage, it.view, it.occlusion)).or_default();
                s.1 += 1;
                if success(it) {
                    s.0 += 1;
                }
                dist[self.consensus(&it.item_id).unwrap().final_score as usize] += 1;
            }
            let patients = per_patient(m);
            results.push(MethodResults {
                method: m,
                acquisitions: Rate::new(items.iter().filter(|it| success(it)).count(), items.len()),
                strata: strata
                    .into_iter()
                    .map(|((stage, view, occlusion), (s, n))| StratumRate {
                        stage,
                        view,
                        occlusion,
                        rate: Rate::new(s, n),
                    })
                    .collect(),
                per_patient: Rate::new(patients.values().filter(|&&v| v).count(), patients.len()),
                score_distribution: dist,
            });
        }
        let comparison = (methods.len() == 2).then(|| {
            let (pa, pb) = (per_patient(methods[0]), per_patient(methods[1]));
            let paired: Vec<(bool, bool)> = pa.iter().filter_map(|(k, a)| pb.get(k).map(|b| (*a, *b))).collect();
            let a_only = paired.iter().filter(|(a, b)| *a && !*b).count() as u64;
            let b_only = paired.iter().filter(|(a, b)| !*a && *b).count() as u64;
            let (mcnemar, error) = match mcnemar(a_only, b_only) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            PairedComparison {
                a: methods[0],
                b: methods[1],
                patients: paired.len(),
                a_only,
                b_only,
                mcnemar,
                error,
            }
        });
        Ok(Results {
            schema_version: SCHEMA_VERSION,
            session_id: self.id.clone(),
            methods: results,
            comparison,
        })
    }
}
