//! Operational-state reachability verification.
//!
//! For a candidate `(entity, src, snk, prior)` this stage projects the
//! graph-level source-to-sink path onto executable block paths, scores each
//! path by semantic alignment with the graph path's label sequence, splits
//! the strict solver budget across the beam by softmax over mapped scores,
//! and runs the strict pass per path. If no path is satisfiable, one
//! controlled relaxation pass drops the weakest-evidence constraint family
//! and solves the disjunction of the explored path conditions under the
//! relaxed budget.
//!
//! Labels: first strict satisfiable path yields `SatStrict` with a witness;
//! a relaxed-only satisfiable result yields `SatRelaxed` naming the relaxed
//! dimension; `Unsat` requires every explored path individually refuted and
//! the relaxed pass refuted too; anything else is `Unknown` — an
//! inconclusive path is never converted into a refutation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::artifact::{BlockId, ToyArtifact, Value, VarName};
use crate::caca::Candidate;
use crate::config::Config;
use crate::constraint::{
    attribute_refuting_families, solve_encoding, Family, SolveStatus,
};
use crate::encode::{encode, is_fsm_state_var, PathEncoding};
use crate::ssckg::{EntityId, Ssckg};

/// Four-class reachability label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    SatStrict,
    SatRelaxed,
    Unsat,
    Unknown,
}

/// Refutation, relaxation, or inconclusiveness detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Reason {
    /// Families whose removal flips the refuted candidate satisfiable;
    /// `path` alone means the path conditions themselves are contradictory
    /// (or no executable path exists).
    RefutingFamilies { families: Vec<Family> },
    RelaxedDimension { family: Family },
    TimeoutOrModelGap { detail: String },
}

/// Concrete reachability witness: input vector, operational state, the
/// satisfied path, and the entities it crosses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub path: Vec<BlockId>,
    /// Channel-input variable assignment (I*).
    pub inputs: BTreeMap<VarName, Value>,
    /// Operational-state variable assignment (S*).
    pub state: BTreeMap<VarName, Value>,
    /// Entities owning blocks on the witness path.
    pub vuln_entities: BTreeSet<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityResult {
    pub label: Label,
    pub witness: Option<Witness>,
    pub reason: Option<Reason>,
}

/// One scored executable path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPath {
    pub blocks: Vec<BlockId>,
    pub raw_score: f64,
    pub mapped_score: f64,
    pub budget_units: u64,
}

/// Per-path strict-pass verdict, for the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    Sat,
    Unsat,
    Unknown,
    /// The path steps through a construct the atom language cannot encode
    /// exactly; treated as inconclusive.
    ModelGap,
    EncodeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathVerdict {
    pub blocks: Vec<BlockId>,
    pub status: PathStatus,
    pub units_spent: u64,
}

/// Everything the verification pass observed; serialized into run reports.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationTrace {
    /// Full enumeration in rank order (before beam truncation).
    pub ranked_paths: Vec<ScoredPath>,
    pub beam_width: usize,
    pub truncated: bool,
    pub path_verdicts: Vec<PathVerdict>,
    pub relaxed_family: Option<Family>,
    pub relaxed_units: u64,
    pub solver_queries: u64,
    /// Cumulative strict-pass units up to and including the first Sat.
    pub units_to_first_sat: Option<u64>,
    /// Explored paths other than the witness path, for displacement checks.
    pub neighbor_paths: Vec<Vec<BlockId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRun {
    pub result: ReachabilityResult,
    pub trace: VerificationTrace,
}

/// Enumeration ceiling for path projection; hitting it marks the
/// projection truncated and the verdict can no longer be `Unsat`.
const MAX_ENUMERATED_WALKS: usize = 512;

/// Pluggable label-sequence embedder. The deterministic default embeds both
/// sequences of a pair into a shared term space; a neural encoder can be
/// swapped in behind the same interface.
pub trait LabelEmbedder {
    fn embed_pair(&self, a: &[String], b: &[String]) -> (Vec<f64>, Vec<f64>);
}

/// Term-frequency embedding over the bundled action-label vocabulary,
/// extended on the fly with any out-of-vocabulary tokens in the pair.
#[derive(Debug, Default, Clone)]
pub struct TermFrequencyEmbedder;

impl LabelEmbedder for TermFrequencyEmbedder {
    fn embed_pair(&self, a: &[String], b: &[String]) -> (Vec<f64>, Vec<f64>) {
        let mut terms: Vec<String> =
            crate::vocab::action_labels().iter().map(|s| s.to_string()).collect();
        let mut extra: BTreeSet<&String> = BTreeSet::new();
        for l in a.iter().chain(b.iter()) {
            if !terms.iter().any(|t| t == l) {
                extra.insert(l);
            }
        }
        terms.extend(extra.into_iter().cloned());
        let embed = |labels: &[String]| -> Vec<f64> {
            terms
                .iter()
                .map(|t| labels.iter().filter(|l| *l == t).count() as f64)
                .collect()
        };
        (embed(a), embed(b))
    }
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot / (nu * nv)
}

/// Cosine similarity between the embeddings of a path's label sequence and
/// the graph path's label sequence. An empty sequence scores 0 (neutral).
pub fn score_path(
    path_labels: &[String],
    ssckg_labels: &[String],
    embedder: &dyn LabelEmbedder,
) -> f64 {
    if path_labels.is_empty() || ssckg_labels.is_empty() {
        return 0.0;
    }
    let (u, v) = embedder.embed_pair(path_labels, ssckg_labels);
    cosine(&u, &v)
}

/// Affine map from cosine range [-1, 1] into [0, 1]. Deliberately not
/// min-max normalization over the candidate set.
pub fn map_score(raw: f64) -> f64 {
    (raw + 1.0) / 2.0
}

/// Softmax budget split over mapped scores: floor division with every
/// remainder unit assigned to the highest-scored path. The total always
/// equals `t_total` exactly.
pub fn allocate_budget(mapped_scores: &[f64], t_total: u64, tau_p: f64) -> Vec<u64> {
    if mapped_scores.is_empty() {
        return Vec::new();
    }
    let max = mapped_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = mapped_scores.iter().map(|s| ((s - max) / tau_p).exp()).collect();
    let denom: f64 = exps.iter().sum();
    let mut budgets: Vec<u64> = exps
        .iter()
        .map(|e| ((t_total as f64) * e / denom).floor() as u64)
        .collect();
    let assigned: u64 = budgets.iter().sum();
    let top = mapped_scores
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.partial_cmp(b)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ib.cmp(ia)) // first index wins ties
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    budgets[top] += t_total - assigned;
    budgets
}

/// Label sequence of the graph-level source-to-sink path (BFS shortest path
/// over risk-relevant relations); falls back to the two endpoint labels
/// when no path exists.
pub fn ssckg_path_labels(g: &Ssckg, src: &str, snk: &str) -> Vec<String> {
    let adj = g.risk_adjacency();
    let mut prev: BTreeMap<String, String> = BTreeMap::new();
    let mut seen = BTreeSet::from([src.to_string()]);
    let mut queue = std::collections::VecDeque::from([src.to_string()]);
    let mut found = src == snk;
    while let Some(v) = queue.pop_front() {
        if v == snk {
            found = true;
            break;
        }
        if let Some(succ) = adj.get(&v) {
            for w in succ {
                if seen.insert(w.clone()) {
                    prev.insert(w.clone(), v.clone());
                    queue.push_back(w.clone());
                }
            }
        }
    }
    let ids: Vec<String> = if found {
        let mut rev = vec![snk.to_string()];
        let mut cur = snk.to_string();
        while cur != src {
            match prev.get(&cur) {
                Some(p) => {
                    rev.push(p.clone());
                    cur = p.clone();
                }
                None => break,
            }
        }
        rev.reverse();
        rev
    } else {
        vec![src.to_string(), snk.to_string()]
    };
    ids.iter()
        .filter_map(|id| g.entity(id).map(|e| e.label.clone()))
        .collect()
}

#[derive(Debug, PartialEq, Eq)]
pub enum ProjectError {
    NoSrcPreimage,
    NoSnkPreimage,
    NoSinkInstruction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathProjection {
    /// All enumerated walks, scored, in descending rank order.
    pub ranked: Vec<ScoredPath>,
    pub truncated: bool,
}

/// Enumerate acyclic block walks from any source-member block to any
/// sink-member block holding a sink instruction, score them against the
/// graph path labels, and rank descending.
pub fn project_paths(
    g: &Ssckg,
    b: &ToyArtifact,
    c: &Candidate,
    embedder: &dyn LabelEmbedder,
) -> Result<PathProjection, ProjectError> {
    let src_blocks: Vec<BlockId> = g
        .preimage(&c.src)
        .into_iter()
        .filter(|blk| b.has_block(blk))
        .collect();
    if src_blocks.is_empty() {
        return Err(ProjectError::NoSrcPreimage);
    }
    let snk_members: BTreeSet<BlockId> = g
        .preimage(&c.snk)
        .into_iter()
        .filter(|blk| b.has_block(blk))
        .collect();
    if snk_members.is_empty() {
        return Err(ProjectError::NoSnkPreimage);
    }
    let targets: BTreeSet<BlockId> = snk_members
        .into_iter()
        .filter(|blk| b.block(blk).map(|x| x.first_sink().is_some()).unwrap_or(false))
        .collect();
    if targets.is_empty() {
        return Err(ProjectError::NoSinkInstruction);
    }

    let length_cap = 2 * b.blocks.len();
    let mut walks: Vec<Vec<BlockId>> = Vec::new();
    let mut truncated = false;

    // Successors in edge-declaration order, plus guard-instruction jumps.
    let successors = |blk: &str| -> Vec<BlockId> {
        let mut out: Vec<BlockId> = b.out_edges(blk).iter().map(|e| e.to.clone()).collect();
        if let Some(block) = b.block(blk) {
            for instr in &block.instrs {
                if let crate::artifact::Instr::Guard { safe_target, .. } = instr {
                    if !out.contains(safe_target) {
                        out.push(safe_target.clone());
                    }
                }
            }
        }
        out
    };

    for start in &src_blocks {
        let mut stack: Vec<Vec<BlockId>> = vec![vec![start.clone()]];
        while let Some(walk) = stack.pop() {
            if walks.len() >= MAX_ENUMERATED_WALKS {
                truncated = true;
                break;
            }
            let last = walk.last().unwrap().clone();
            if targets.contains(&last) {
                walks.push(walk);
                continue;
            }
            if walk.len() >= length_cap {
                continue;
            }
            // Reverse push keeps declaration-order exploration.
            for next in successors(&last).into_iter().rev() {
                if !walk.contains(&next) {
                    let mut extended = walk.clone();
                    extended.push(next);
                    stack.push(extended);
                }
            }
        }
        if truncated {
            break;
        }
    }

    let ssckg_labels = ssckg_path_labels(g, &c.src, &c.snk);
    let mut ranked: Vec<ScoredPath> = walks
        .into_iter()
        .map(|blocks| {
            let labels: Vec<String> = blocks
                .iter()
                .filter_map(|id| b.block(id))
                .flat_map(|blk| blk.labels.iter().cloned())
                .collect();
            let raw = score_path(&labels, &ssckg_labels, embedder);
            ScoredPath { blocks, raw_score: raw, mapped_score: map_score(raw), budget_units: 0 }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.mapped_score
            .partial_cmp(&a.mapped_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.blocks.cmp(&b.blocks))
    });
    Ok(PathProjection { ranked, truncated })
}

fn build_witness(
    b: &ToyArtifact,
    g: &Ssckg,
    path: &[BlockId],
    model: &BTreeMap<VarName, Value>,
) -> Witness {
    let input_vars = b.input_vars();
    let mut inputs = BTreeMap::new();
    let mut state = BTreeMap::new();
    for (var, value) in model {
        if is_fsm_state_var(var) {
            continue;
        }
        if input_vars.contains(var) {
            inputs.insert(var.clone(), value.clone());
        } else {
            state.insert(var.clone(), value.clone());
        }
    }
    let vuln_entities = path
        .iter()
        .flat_map(|blk| g.entities_of_block(blk))
        .collect();
    Witness { path: path.to_vec(), inputs, state, vuln_entities }
}

fn unknown(detail: impl Into<String>, trace: VerificationTrace) -> VerifyRun {
    VerifyRun {
        result: ReachabilityResult {
            label: Label::Unknown,
            witness: None,
            reason: Some(Reason::TimeoutOrModelGap { detail: detail.into() }),
        },
        trace,
    }
}

/// Verify operational reachability of one candidate.
pub fn verify(b: &ToyArtifact, g: &Ssckg, c: &Candidate, cfg: &Config) -> VerifyRun {
    let embedder = TermFrequencyEmbedder;
    let mut trace = VerificationTrace { beam_width: cfg.beam_b, ..VerificationTrace::default() };

    let projection = match project_paths(g, b, c, &embedder) {
        Ok(p) => p,
        Err(e) => {
            return unknown(format!("model gap: {e:?}"), trace);
        }
    };
    trace.truncated = projection.truncated;

    if projection.ranked.is_empty() {
        if projection.truncated {
            return unknown("path enumeration truncated before any sink walk", trace);
        }
        // Complete enumeration found no executable walk: structural refutation.
        trace.ranked_paths = Vec::new();
        return VerifyRun {
            result: ReachabilityResult {
                label: Label::Unsat,
                witness: None,
                reason: Some(Reason::RefutingFamilies { families: vec![Family::Path] }),
            },
            trace,
        };
    }

    let beam: Vec<ScoredPath> =
        projection.ranked.iter().take(cfg.beam_b).cloned().collect();
    let budgets = allocate_budget(
        &beam.iter().map(|p| p.mapped_score).collect::<Vec<_>>(),
        cfg.t_total,
        cfg.tau_p,
    );
    trace.ranked_paths = projection.ranked.clone();
    for (i, p) in trace.ranked_paths.iter_mut().enumerate() {
        if i < budgets.len() {
            p.budget_units = budgets[i];
        }
    }

    // Strict pass: per-path solve, first Sat wins.
    let mut encodings: Vec<Option<PathEncoding>> = Vec::new();
    let mut refuting: Vec<Family> = Vec::new();
    let mut refuted = 0usize;
    let mut inconclusive = 0usize;
    let mut strict_units: u64 = 0;

    for (i, path) in beam.iter().enumerate() {
        let pe = match encode(&c.s_prior, b, &path.blocks) {
            Ok(pe) => pe,
            Err(_) => {
                trace.path_verdicts.push(PathVerdict {
                    blocks: path.blocks.clone(),
                    status: PathStatus::EncodeError,
                    units_spent: 0,
                });
                inconclusive += 1;
                encodings.push(None);
                continue;
            }
        };
        if pe.gap {
            trace.path_verdicts.push(PathVerdict {
                blocks: path.blocks.clone(),
                status: PathStatus::ModelGap,
                units_spent: 0,
            });
            inconclusive += 1;
            encodings.push(None);
            continue;
        }
        trace.solver_queries += 1;
        let verdict = match solve_encoding(&pe.encoding, budgets[i], cfg.seed) {
            Ok(v) => v,
            Err(_) => {
                trace.path_verdicts.push(PathVerdict {
                    blocks: path.blocks.clone(),
                    status: PathStatus::EncodeError,
                    units_spent: 0,
                });
                inconclusive += 1;
                encodings.push(None);
                continue;
            }
        };
        strict_units += verdict.units_spent;
        match verdict.status {
            SolveStatus::Sat(model) => {
                trace.path_verdicts.push(PathVerdict {
                    blocks: path.blocks.clone(),
                    status: PathStatus::Sat,
                    units_spent: verdict.units_spent,
                });
                trace.units_to_first_sat = Some(strict_units);
                trace.neighbor_paths = beam
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, p)| p.blocks.clone())
                    .collect();
                let witness = build_witness(b, g, &path.blocks, &model);
                return VerifyRun {
                    result: ReachabilityResult {
                        label: Label::SatStrict,
                        witness: Some(witness),
                        reason: None,
                    },
                    trace,
                };
            }
            SolveStatus::Unsat => {
                trace.path_verdicts.push(PathVerdict {
                    blocks: path.blocks.clone(),
                    status: PathStatus::Unsat,
                    units_spent: verdict.units_spent,
                });
                refuted += 1;
                if let Ok(fams) =
                    attribute_refuting_families(&pe.encoding, budgets[i].max(1), cfg.seed)
                {
                    trace.solver_queries += fams.len() as u64;
                    for f in fams {
                        if !refuting.contains(&f) {
                            refuting.push(f);
                        }
                    }
                }
                encodings.push(Some(pe));
            }
            SolveStatus::Unknown => {
                trace.path_verdicts.push(PathVerdict {
                    blocks: path.blocks.clone(),
                    status: PathStatus::Unknown,
                    units_spent: verdict.units_spent,
                });
                inconclusive += 1;
                encodings.push(Some(pe));
            }
        }
    }

    // Relaxed pass: one family dropped, disjunction of explored path
    // conditions solved by case split under the shared relaxed budget.
    let evidence = c.s_prior.evidence_map();
    let present: Vec<Family> = Family::OPERATIONAL
        .iter()
        .copied()
        .filter(|f| {
            encodings
                .iter()
                .flatten()
                .any(|pe| pe.encoding.atoms.iter().any(|a| a.family == *f))
        })
        .collect();
    let relaxed_family = present.iter().copied().min_by(|a, b| {
        let ea = evidence.get(a).copied().unwrap_or(0.0);
        let eb = evidence.get(b).copied().unwrap_or(0.0);
        ea.partial_cmp(&eb).unwrap_or(std::cmp::Ordering::Equal)
    });
    trace.relaxed_family = relaxed_family;

    let mut relaxed_all_unsat = true;
    if let Some(family) = relaxed_family {
        let mut budget_left = cfg.t_relaxed;
        for (i, slot) in encodings.iter().enumerate() {
            let pe = match slot {
                Some(pe) => pe,
                None => {
                    relaxed_all_unsat = false;
                    continue;
                }
            };
            if budget_left == 0 {
                relaxed_all_unsat = false;
                break;
            }
            let relaxed_enc = pe.encoding.without_family(family);
            trace.solver_queries += 1;
            let verdict = match solve_encoding(&relaxed_enc, budget_left, cfg.seed) {
                Ok(v) => v,
                Err(_) => {
                    relaxed_all_unsat = false;
                    continue;
                }
            };
            budget_left = budget_left.saturating_sub(verdict.units_spent);
            trace.relaxed_units += verdict.units_spent;
            match verdict.status {
                SolveStatus::Sat(model) => {
                    let path = &beam[i].blocks;
                    trace.neighbor_paths = beam
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, p)| p.blocks.clone())
                        .collect();
                    let witness = build_witness(b, g, path, &model);
                    return VerifyRun {
                        result: ReachabilityResult {
                            label: Label::SatRelaxed,
                            witness: Some(witness),
                            reason: Some(Reason::RelaxedDimension { family }),
                        },
                        trace,
                    };
                }
                SolveStatus::Unsat => {}
                SolveStatus::Unknown => relaxed_all_unsat = false,
            }
        }
    } else if encodings.iter().any(|e| e.is_none()) {
        relaxed_all_unsat = false;
    }
    // With nothing to relax, the relaxed pass is vacuously refuted.

    let all_refuted = refuted == beam.len() && inconclusive == 0;
    if all_refuted && relaxed_all_unsat && !projection.truncated {
        if refuting.is_empty() {
            refuting.push(Family::Path);
        }
        refuting.sort();
        return VerifyRun {
            result: ReachabilityResult {
                label: Label::Unsat,
                witness: None,
                reason: Some(Reason::RefutingFamilies { families: refuting }),
            },
            trace,
        };
    }

    let detail = format!(
        "inconclusive: {inconclusive} of {} paths undecided, refuted {refuted}, truncated {}",
        beam.len(),
        projection.truncated
    );
    unknown(detail, trace)
}
