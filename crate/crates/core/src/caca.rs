//! Candidate acquisition and context: normalizes heterogeneous alert inputs
//! into ranked verification tasks with a prior operational state, and derives
//! the feasible remediation tier set from artifact availability.
//!
//! Alert routing is a fixed table from the alert's relation type to the
//! operational-state families that the relation evidences:
//!
//! | relation type           | families          |
//! |-------------------------|-------------------|
//! | protocol-interaction    | proto             |
//! | mmio, io                | io, runtime       |
//! | data-flow               | io                |
//! | control-dep             | runtime           |
//! | shared-mem, ipc         | component         |
//! | cross-component-call    | component         |
//! | anything else           | (context only)    |
//!
//! Routed families receive an evidence floor of 0.5 on top of whatever the
//! context hints supply; unrouted families carry context evidence alone.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::artifact::{AvailabilityClass, ToyArtifact};
use crate::config::Config;
use crate::constraint::{ConstraintAtom, Family};
use crate::ssckg::{EntityId, Ssckg};

/// Evidence floor granted to families selected by the alert's relation type.
const ROUTED_EVIDENCE_FLOOR: f64 = 0.5;

/// One per-dimension context hint: constraint fragments plus an evidence
/// score in [0, 1].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hint {
    #[serde(default)]
    pub atoms: Vec<ConstraintAtom>,
    #[serde(default)]
    pub evidence: f64,
}

/// Replay-dimension hint: enforcement-point and harness availability.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReplayHint {
    #[serde(default)]
    pub enforcement: bool,
    #[serde(default)]
    pub harness: bool,
}

/// The operational context tuple: optional per-dimension hints.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContextHints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub art: Option<Hint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<Hint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub io: Option<Hint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proto: Option<Hint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime: Option<Hint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<Hint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<Hint>,
    #[serde(default)]
    pub replay: ReplayHint,
    /// Per-case domain invariants, evaluated on benign-trace final states.
    #[serde(default)]
    pub domain_invariants: Vec<ConstraintAtom>,
}

impl ContextHints {
    pub fn family_hint(&self, family: Family) -> Option<&Hint> {
        match family {
            Family::Env => self.env.as_ref(),
            Family::Io => self.io.as_ref(),
            Family::Proto => self.proto.as_ref(),
            Family::Runtime => self.runtime.as_ref(),
            Family::Component => self.component.as_ref(),
            Family::Time => self.time.as_ref(),
            Family::Path => None,
        }
    }
}

/// One operational-state family of a prior: atoms plus evidence in [0, 1].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FamilyPrior {
    #[serde(default)]
    pub atoms: Vec<ConstraintAtom>,
    #[serde(default)]
    pub evidence: f64,
}

/// Prior estimate of the operational state: the six constraint families.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OperationalStatePrior {
    pub env: FamilyPrior,
    pub io: FamilyPrior,
    pub proto: FamilyPrior,
    pub runtime: FamilyPrior,
    pub component: FamilyPrior,
    pub time: FamilyPrior,
}

impl OperationalStatePrior {
    pub fn family(&self, f: Family) -> Option<&FamilyPrior> {
        match f {
            Family::Env => Some(&self.env),
            Family::Io => Some(&self.io),
            Family::Proto => Some(&self.proto),
            Family::Runtime => Some(&self.runtime),
            Family::Component => Some(&self.component),
            Family::Time => Some(&self.time),
            Family::Path => None,
        }
    }

    pub fn family_mut(&mut self, f: Family) -> Option<&mut FamilyPrior> {
        match f {
            Family::Env => Some(&mut self.env),
            Family::Io => Some(&mut self.io),
            Family::Proto => Some(&mut self.proto),
            Family::Runtime => Some(&mut self.runtime),
            Family::Component => Some(&mut self.component),
            Family::Time => Some(&mut self.time),
            Family::Path => None,
        }
    }

    /// All prior atoms, retagged with their owning family.
    pub fn atoms(&self) -> Vec<ConstraintAtom> {
        let mut out = Vec::new();
        for f in Family::OPERATIONAL {
            if let Some(fp) = self.family(f) {
                for a in &fp.atoms {
                    let mut a = a.clone();
                    a.family = f;
                    out.push(a);
                }
            }
        }
        out
    }

    pub fn evidence_map(&self) -> BTreeMap<Family, f64> {
        Family::OPERATIONAL
            .iter()
            .map(|f| (*f, self.family(*f).map(|fp| fp.evidence).unwrap_or(0.0)))
            .collect()
    }
}

/// A raw alert record from an upstream generator (generic adapter schema).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAlert {
    pub source_tool: String,
    pub entity_or_block: String,
    pub relation_type: String,
    pub src: String,
    pub snk: String,
    pub rho: f64,
}

/// A normalized verification task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Stable identifier `entity|src|snk`, used for deterministic ordering.
    pub id: String,
    pub entity: EntityId,
    pub src: EntityId,
    pub snk: EntityId,
    pub rho: f64,
    pub relation: String,
    pub s_prior: OperationalStatePrior,
}

/// Explicit not-applicable record for an alert that could not be mapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotApplicableRow {
    pub source_tool: String,
    pub reference: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizeOutput {
    pub candidates: Vec<Candidate>,
    pub not_applicable: Vec<NotApplicableRow>,
}

/// Families evidenced by an alert relation type.
pub fn route_relation(relation_type: &str) -> Vec<Family> {
    match relation_type {
        "protocol-interaction" => vec![Family::Proto],
        "mmio" | "io" => vec![Family::Io, Family::Runtime],
        "data-flow" => vec![Family::Io],
        "control-dep" => vec![Family::Runtime],
        "shared-mem" | "ipc" | "cross-component-call" => vec![Family::Component],
        _ => Vec::new(),
    }
}

fn build_prior(omega: &ContextHints, relation_type: &str) -> OperationalStatePrior {
    let routed = route_relation(relation_type);
    let mut prior = OperationalStatePrior::default();
    for f in Family::OPERATIONAL {
        let fp = prior.family_mut(f).unwrap();
        if let Some(hint) = omega.family_hint(f) {
            fp.atoms = hint
                .atoms
                .iter()
                .map(|a| {
                    let mut a = a.clone();
                    a.family = f;
                    a
                })
                .collect();
            fp.evidence = hint.evidence.clamp(0.0, 1.0);
        }
        if routed.contains(&f) {
            fp.evidence = fp.evidence.max(ROUTED_EVIDENCE_FLOOR);
        }
    }
    prior
}

fn resolve_entity(g: &Ssckg, reference: &str) -> Option<EntityId> {
    if g.has_entity(reference) {
        return Some(reference.to_string());
    }
    // Block reference: map through phi; smallest owning entity id wins.
    g.entities_of_block(reference).into_iter().next()
}

/// Normalize raw alerts into deduplicated candidates with priors.
///
/// Unmappable alerts become explicit not-applicable rows, never silent
/// drops. Duplicate `(entity, src, snk)` keys merge: highest risk wins,
/// prior atoms union per family, evidence takes the maximum.
pub fn normalize(
    alerts: &[RawAlert],
    g: &Ssckg,
    _b: &ToyArtifact,
    omega: &ContextHints,
) -> NormalizeOutput {
    let mut by_key: BTreeMap<(EntityId, EntityId, EntityId), Candidate> = BTreeMap::new();
    let mut not_applicable = Vec::new();

    for alert in alerts {
        let entity = match resolve_entity(g, &alert.entity_or_block) {
            Some(e) => e,
            None => {
                not_applicable.push(NotApplicableRow {
                    source_tool: alert.source_tool.clone(),
                    reference: alert.entity_or_block.clone(),
                    reason: "no entity or phi preimage matches the reference".into(),
                });
                continue;
            }
        };
        let (src, snk) = match (resolve_entity(g, &alert.src), resolve_entity(g, &alert.snk)) {
            (Some(s), Some(k)) => (s, k),
            _ => {
                not_applicable.push(NotApplicableRow {
                    source_tool: alert.source_tool.clone(),
                    reference: format!("{} -> {}", alert.src, alert.snk),
                    reason: "source or sink does not resolve to a graph entity".into(),
                });
                continue;
            }
        };

        let key = (entity.clone(), src.clone(), snk.clone());
        let prior = build_prior(omega, &alert.relation_type);
        match by_key.get_mut(&key) {
            None => {
                by_key.insert(
                    key,
                    Candidate {
                        id: format!("{entity}|{src}|{snk}"),
                        entity,
                        src,
                        snk,
                        rho: alert.rho.clamp(0.0, 1.0),
                        relation: alert.relation_type.clone(),
                        s_prior: prior,
                    },
                );
            }
            Some(existing) => {
                existing.rho = existing.rho.max(alert.rho.clamp(0.0, 1.0));
                for f in Family::OPERATIONAL {
                    let merged = existing.s_prior.family_mut(f).unwrap();
                    let incoming = prior.family(f).unwrap();
                    for a in &incoming.atoms {
                        if !merged.atoms.contains(a) {
                            merged.atoms.push(a.clone());
                        }
                    }
                    merged.evidence = merged.evidence.max(incoming.evidence);
                }
            }
        }
    }

    NormalizeOutput { candidates: by_key.into_values().collect(), not_applicable }
}

/// Normalized betweenness centrality over risk-relevant relations for every
/// entity at once (Brandes accumulation); pairs with no connecting path
/// contribute zero, and a graph with at most one entity has centrality zero
/// everywhere (the normalizer is degenerate).
pub fn sem_centrality_all(g: &Ssckg) -> BTreeMap<EntityId, f64> {
    let n = g.entities.len();
    let mut centrality: BTreeMap<EntityId, f64> =
        g.entities.iter().map(|e| (e.id.clone(), 0.0)).collect();
    if n <= 1 {
        return centrality;
    }
    let adj = g.risk_adjacency();
    let ids: Vec<EntityId> = g.entities.iter().map(|e| e.id.clone()).collect();

    for s in &ids {
        // Brandes: BFS with shortest-path counting, then dependency pass.
        let mut sigma: BTreeMap<&str, f64> = BTreeMap::new();
        let mut dist: BTreeMap<&str, i64> = BTreeMap::new();
        let mut preds: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        sigma.insert(s, 1.0);
        dist.insert(s, 0);
        let mut queue: VecDeque<&str> = VecDeque::from([s.as_str()]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            if let Some(succ) = adj.get(v) {
                for w in succ {
                    let dv = dist[v];
                    match dist.get(w.as_str()) {
                        None => {
                            dist.insert(w, dv + 1);
                            sigma.insert(w, sigma[v]);
                            preds.entry(w).or_default().push(v);
                            queue.push_back(w);
                        }
                        Some(&dw) if dw == dv + 1 => {
                            *sigma.get_mut(w.as_str()).unwrap() += sigma[v];
                            preds.entry(w).or_default().push(v);
                        }
                        _ => {}
                    }
                }
            }
        }
        let mut delta: BTreeMap<&str, f64> = BTreeMap::new();
        for &w in order.iter().rev() {
            let coeff = (1.0 + delta.get(w).copied().unwrap_or(0.0)) / sigma[w];
            if let Some(ps) = preds.get(w) {
                for &v in ps {
                    *delta.entry(v).or_insert(0.0) += sigma[v] * coeff;
                }
            }
            if w != s.as_str() {
                *centrality.get_mut(w).unwrap() += delta.get(w).copied().unwrap_or(0.0);
            }
        }
    }

    let norm = (n * (n - 1)) as f64;
    for v in centrality.values_mut() {
        *v /= norm;
    }
    centrality
}

/// Normalized betweenness centrality of a single entity.
pub fn sem_centrality(g: &Ssckg, v: &str) -> f64 {
    sem_centrality_all(g).get(v).copied().unwrap_or(0.0)
}

/// Rank candidates by `alpha * rho + (1 - alpha) * sem_centrality`,
/// descending; ties break by lexicographic candidate id.
pub fn rank(cands: &[Candidate], g: &Ssckg, cfg: &Config) -> Vec<Candidate> {
    let centrality = sem_centrality_all(g);
    let mut scored: Vec<(f64, Candidate)> = cands
        .iter()
        .map(|c| {
            let sc = centrality.get(&c.entity).copied().unwrap_or(0.0);
            (cfg.alpha * c.rho + (1.0 - cfg.alpha) * sc, c.clone())
        })
        .collect();
    scored.sort_by(|(sa, ca), (sb, cb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ca.id.cmp(&cb.id))
    });
    scored.into_iter().map(|(_, c)| c).collect()
}

/// Feasible remediation tiers by availability class.
pub fn tier_set(a: AvailabilityClass) -> BTreeSet<u8> {
    match a {
        AvailabilityClass::PolicyOnly => BTreeSet::from([1]),
        AvailabilityClass::BinaryRewritable => BTreeSet::from([1, 2]),
        AvailabilityClass::SourceAvailable => BTreeSet::from([1, 2, 3]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{Block, Domain, EntryTag};
    use crate::ssckg::{Entity, Relation, RelationType};
    use proptest::prelude::*;

    fn artifact() -> ToyArtifact {
        let mut b0 = Block::new("b0");
        b0.tags.insert(EntryTag::Exported);
        ToyArtifact {
            blocks: vec![b0, Block::new("b1"), Block::new("b2")],
            edges: vec![],
            availability: AvailabilityClass::SourceAvailable,
            channels: vec![],
            observables: BTreeSet::new(),
            domains: BTreeMap::from([("x".to_string(), Domain::Bool)]),
            scan_slack: 16,
        }
    }

    fn path_graph(ids: &[&str]) -> Ssckg {
        let entities = ids
            .iter()
            .map(|id| Entity { id: id.to_string(), label: "copy-buffer".into(), rho: 0.5 })
            .collect();
        let relations = ids
            .windows(2)
            .map(|w| Relation {
                src: w[0].to_string(),
                dst: w[1].to_string(),
                relation: RelationType::DataFlow,
                risk_relevant: true,
            })
            .collect();
        let phi = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), BTreeSet::from([format!("b{i}")])))
            .collect();
        Ssckg { entities, relations, phi }
    }

    #[test]
    fn directed_path_center_is_one_sixth() {
        let g = path_graph(&["a", "b", "c"]);
        let c = sem_centrality(&g, "b");
        assert!((c - 1.0 / 6.0).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn isolated_entity_has_zero_centrality() {
        let mut g = path_graph(&["a", "b", "c"]);
        g.entities.push(Entity { id: "lone".into(), label: "log-event".into(), rho: 0.1 });
        g.phi.insert("lone".into(), BTreeSet::new());
        assert_eq!(sem_centrality(&g, "lone"), 0.0);
    }

    #[test]
    fn degenerate_graph_is_zero() {
        let g = path_graph(&["only"]);
        assert_eq!(sem_centrality(&g, "only"), 0.0);
    }

    /// Brute-force oracle: enumerate all simple paths per ordered pair and
    /// count shortest ones through v.
    pub(crate) fn centrality_oracle(g: &Ssckg, v: &str) -> f64 {
        let n = g.entities.len();
        if n <= 1 {
            return 0.0;
        }
        let adj = g.risk_adjacency();
        let ids: Vec<String> = g.entities.iter().map(|e| e.id.clone()).collect();

        fn all_paths(
            adj: &BTreeMap<String, Vec<String>>,
            cur: &str,
            dst: &str,
            seen: &mut Vec<String>,
            out: &mut Vec<Vec<String>>,
        ) {
            if cur == dst {
                out.push(seen.clone());
                return;
            }
            if let Some(succ) = adj.get(cur) {
                for w in succ {
                    if !seen.contains(w) {
                        seen.push(w.clone());
                        all_paths(adj, w, dst, seen, out);
                        seen.pop();
                    }
                }
            }
        }

        let mut total = 0.0;
        for s in &ids {
            for t in &ids {
                if s == t || s == v || t == v {
                    continue;
                }
                let mut paths = Vec::new();
                let mut seen = vec![s.clone()];
                all_paths(&adj, s, t, &mut seen, &mut paths);
                if paths.is_empty() {
                    continue;
                }
                let shortest = paths.iter().map(|p| p.len()).min().unwrap();
                let short: Vec<_> = paths.iter().filter(|p| p.len() == shortest).collect();
                let through = short.iter().filter(|p| p.iter().any(|x| x == v)).count();
                total += through as f64 / short.len() as f64;
            }
        }
        total / ((n * (n - 1)) as f64)
    }

    #[test]
    fn star_center_matches_oracle() {
        // Directed star: spokes -> hub -> spokes (5 entities).
        let entities: Vec<Entity> = ["hub", "s1", "s2", "s3", "s4"]
            .iter()
            .map(|id| Entity { id: id.to_string(), label: "dispatch-function".into(), rho: 0.3 })
            .collect();
        let mut relations = Vec::new();
        for s in ["s1", "s2"] {
            relations.push(Relation {
                src: s.into(),
                dst: "hub".into(),
                relation: RelationType::ControlDep,
                risk_relevant: true,
            });
        }
        for s in ["s3", "s4"] {
            relations.push(Relation {
                src: "hub".into(),
                dst: s.into(),
                relation: RelationType::ControlDep,
                risk_relevant: true,
            });
        }
        let g = Ssckg {
            entities,
            relations,
            phi: BTreeMap::new(),
        };
        for v in ["hub", "s1", "s2", "s3", "s4"] {
            let got = sem_centrality(&g, v);
            let want = centrality_oracle(&g, v);
            assert!((got - want).abs() < 1e-12, "{v}: {got} vs {want}");
        }
    }

    fn alert(entity: &str, src: &str, snk: &str, relation: &str, rho: f64) -> RawAlert {
        RawAlert {
            source_tool: "toolA".into(),
            entity_or_block: entity.into(),
            relation_type: relation.into(),
            src: src.into(),
            snk: snk.into(),
            rho,
        }
    }

    #[test]
    fn duplicate_alerts_dedup_to_one_candidate() {
        let g = path_graph(&["a", "b", "c"]);
        let out = normalize(
            &[
                alert("b", "a", "c", "data-flow", 0.4),
                alert("b", "a", "c", "data-flow", 0.7),
            ],
            &g,
            &artifact(),
            &ContextHints::default(),
        );
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.candidates[0].rho, 0.7);
        assert!(out.not_applicable.is_empty());
    }

    #[test]
    fn protocol_alert_routes_proto_family() {
        let g = path_graph(&["a", "b", "c"]);
        let omega = ContextHints {
            proto: Some(Hint {
                atoms: vec![ConstraintAtom::cmp(
                    "q",
                    crate::artifact::CmpOp::Eq,
                    crate::artifact::Value::Int(1),
                    Family::Proto,
                )],
                evidence: 0.3,
            }),
            env: Some(Hint { atoms: vec![], evidence: 0.9 }),
            ..ContextHints::default()
        };
        let out = normalize(
            &[alert("b", "a", "c", "protocol-interaction", 0.5)],
            &g,
            &artifact(),
            &omega,
        );
        let prior = &out.candidates[0].s_prior;
        assert!(!prior.proto.atoms.is_empty());
        // Routed family lifted to the evidence floor; unrouted keeps omega's.
        assert!(prior.proto.evidence >= 0.5);
        assert_eq!(prior.env.evidence, 0.9);
        assert!(prior.io.atoms.is_empty());
    }

    #[test]
    fn unmappable_alert_becomes_na_row() {
        let g = path_graph(&["a", "b", "c"]);
        let out = normalize(
            &[alert("zz", "a", "c", "data-flow", 0.4)],
            &g,
            &artifact(),
            &ContextHints::default(),
        );
        assert!(out.candidates.is_empty());
        assert_eq!(out.not_applicable.len(), 1);
    }

    #[test]
    fn block_reference_maps_through_phi() {
        let g = path_graph(&["a", "b", "c"]);
        // b1 is phi(b)'s member block.
        let out = normalize(
            &[alert("b1", "a", "c", "io", 0.4)],
            &g,
            &artifact(),
            &ContextHints::default(),
        );
        assert_eq!(out.candidates[0].entity, "b");
        let prior = &out.candidates[0].s_prior;
        assert!(prior.io.evidence >= 0.5 && prior.runtime.evidence >= 0.5);
    }

    #[test]
    fn normalize_is_idempotent() {
        let g = path_graph(&["a", "b", "c"]);
        let omega = ContextHints::default();
        let b = artifact();
        let first = normalize(
            &[
                alert("b", "a", "c", "protocol-interaction", 0.4),
                alert("c", "a", "c", "data-flow", 0.6),
            ],
            &g,
            &b,
            &omega,
        );
        let reencoded: Vec<RawAlert> = first
            .candidates
            .iter()
            .map(|c| RawAlert {
                source_tool: "reencoded".into(),
                entity_or_block: c.entity.clone(),
                relation_type: c.relation.clone(),
                src: c.src.clone(),
                snk: c.snk.clone(),
                rho: c.rho,
            })
            .collect();
        let second = normalize(&reencoded, &g, &b, &omega);
        assert_eq!(first.candidates, second.candidates);
    }

    #[test]
    fn alpha_boundaries_give_pure_orderings() {
        let g = path_graph(&["a", "b", "c"]);
        let mk = |entity: &str, rho: f64| Candidate {
            id: format!("{entity}|a|c"),
            entity: entity.into(),
            src: "a".into(),
            snk: "c".into(),
            rho,
            relation: "data-flow".into(),
            s_prior: OperationalStatePrior::default(),
        };
        // b is the path center (positive centrality), a has none.
        let cands = vec![mk("a", 0.9), mk("b", 0.5)];

        let pure_rho = rank(&cands, &g, &Config { alpha: 1.0, ..Config::default() });
        assert_eq!(pure_rho[0].entity, "a");

        let pure_centrality = rank(&cands, &g, &Config { alpha: 0.0, ..Config::default() });
        assert_eq!(pure_centrality[0].entity, "b");
    }

    #[test]
    fn weighted_rank_hand_case() {
        // alpha=0.6, rho=(0.9,0.5), centrality=(0.1,0.9): scores (0.58, 0.66).
        let mk = |id: &str, rho: f64| Candidate {
            id: id.into(),
            entity: id.into(),
            src: "s".into(),
            snk: "k".into(),
            rho,
            relation: "data-flow".into(),
            s_prior: OperationalStatePrior::default(),
        };
        let cfg = Config::default();
        let score = |rho: f64, c: f64| cfg.alpha * rho + (1.0 - cfg.alpha) * c;
        assert!((score(0.9, 0.1) - 0.58).abs() < 1e-12);
        assert!((score(0.5, 0.9) - 0.66).abs() < 1e-12);
        // Equivalent ranking exercised through a graph where the second
        // candidate's entity is the unique path center.
        let g = path_graph(&["a", "b", "c"]);
        let ranked = rank(&[mk("a", 0.9), mk("b", 0.5)], &g, &cfg);
        let cb = sem_centrality(&g, "b");
        let expected_first = if score(0.5, cb) > score(0.9, 0.0) { "b" } else { "a" };
        assert_eq!(ranked[0].entity, expected_first);
    }

    #[test]
    fn tier_sets_by_availability() {
        assert_eq!(tier_set(AvailabilityClass::PolicyOnly), BTreeSet::from([1]));
        assert_eq!(tier_set(AvailabilityClass::BinaryRewritable), BTreeSet::from([1, 2]));
        assert_eq!(tier_set(AvailabilityClass::SourceAvailable), BTreeSet::from([1, 2, 3]));
    }

    proptest! {
        /// rank is a permutation of its input.
        #[test]
        fn rank_is_permutation(rhos in proptest::collection::vec(0.0f64..=1.0, 1..8)) {
            let g = path_graph(&["a", "b", "c"]);
            let cands: Vec<Candidate> = rhos
                .iter()
                .enumerate()
                .map(|(i, r)| Candidate {
                    id: format!("c{i}"),
                    entity: "b".into(),
                    src: "a".into(),
                    snk: "c".into(),
                    rho: *r,
                    relation: "data-flow".into(),
                    s_prior: OperationalStatePrior::default(),
                })
                .collect();
            let ranked = rank(&cands, &g, &Config::default());
            let mut in_ids: Vec<_> = cands.iter().map(|c| c.id.clone()).collect();
            let mut out_ids: Vec<_> = ranked.iter().map(|c| c.id.clone()).collect();
            in_ids.sort();
            out_ids.sort();
            prop_assert_eq!(in_ids, out_ids);
        }

        /// Scaling all rho by a constant in (0,1] never reorders candidates
        /// with equal centrality.
        #[test]
        fn rank_scale_consistent(
            rhos in proptest::collection::vec(0.0f64..=1.0, 2..6),
            scale in 0.05f64..=1.0,
        ) {
            let g = path_graph(&["a", "b", "c"]);
            let mk = |rhos: &[f64]| -> Vec<Candidate> {
                rhos.iter()
                    .enumerate()
                    .map(|(i, r)| Candidate {
                        id: format!("c{i}"),
                        entity: "a".into(), // all share one entity: equal centrality
                        src: "a".into(),
                        snk: "c".into(),
                        rho: *r,
                        relation: "data-flow".into(),
                        s_prior: OperationalStatePrior::default(),
                    })
                    .collect()
            };
            let base = rank(&mk(&rhos), &g, &Config::default());
            let scaled_rhos: Vec<f64> = rhos.iter().map(|r| r * scale).collect();
            let scaled = rank(&mk(&scaled_rhos), &g, &Config::default());
            let base_ids: Vec<_> = base.iter().map(|c| c.id.clone()).collect();
            let scaled_ids: Vec<_> = scaled.iter().map(|c| c.id.clone()).collect();
            prop_assert_eq!(base_ids, scaled_ids);
        }

        /// Centrality equals the brute-force oracle on small random DAG-ish graphs.
        #[test]
        fn centrality_matches_oracle_small(
            edges in proptest::collection::vec((0usize..6, 0usize..6), 0..12),
            n in 2usize..=6,
        ) {
            let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
            let entities: Vec<Entity> = ids
                .iter()
                .map(|id| Entity { id: id.clone(), label: "parse-header".into(), rho: 0.5 })
                .collect();
            let relations: Vec<Relation> = edges
                .iter()
                .filter(|(a, b)| a % n != b % n && *a < n && *b < n)
                .map(|(a, b)| Relation {
                    src: ids[*a].clone(),
                    dst: ids[*b].clone(),
                    relation: RelationType::DataFlow,
                    risk_relevant: true,
                })
                .collect();
            let g = Ssckg { entities, relations, phi: BTreeMap::new() };
            for v in &ids {
                let got = sem_centrality(&g, v);
                let want = centrality_oracle(&g, v);
                prop_assert!((got - want).abs() < 1e-9, "{}: {} vs {}", v, got, want);
            }
        }
    }
}
