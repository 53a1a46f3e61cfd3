//! Behavioral entity/relation graph paired with an artifact.
//!
//! Entities are behavioral clusters of artifact blocks (via the `phi`
//! block-membership map) carrying an abstract-domain label and a composite
//! risk score. Relations are directed and typed; reachability and centrality
//! follow only the six risk-relevant relation types.
//!
//! Blocks belonging to no entity are legal and simply unmapped; the map is
//! required to be total over entities, not over blocks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::artifact::{BlockId, ModelError, ToyArtifact, Violation};

pub type EntityId = String;

/// The six-member risk-relevant relation alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationType {
    DataFlow,
    ControlDep,
    SharedMem,
    Ipc,
    ProtocolInteraction,
    CrossComponentCall,
}

impl RelationType {
    pub const ALL: [RelationType; 6] = [
        RelationType::DataFlow,
        RelationType::ControlDep,
        RelationType::SharedMem,
        RelationType::Ipc,
        RelationType::ProtocolInteraction,
        RelationType::CrossComponentCall,
    ];

    pub fn parse(s: &str) -> Option<RelationType> {
        match s {
            "data-flow" => Some(RelationType::DataFlow),
            "control-dep" => Some(RelationType::ControlDep),
            "shared-mem" => Some(RelationType::SharedMem),
            "ipc" => Some(RelationType::Ipc),
            "protocol-interaction" => Some(RelationType::ProtocolInteraction),
            "cross-component-call" => Some(RelationType::CrossComponentCall),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub label: String,
    /// Composite risk score in [0, 1].
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub src: EntityId,
    pub dst: EntityId,
    pub relation: RelationType,
    pub risk_relevant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ssckg {
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    /// Block membership: entity id -> member block ids. Total over entities.
    pub phi: BTreeMap<EntityId, BTreeSet<BlockId>>,
}

impl Ssckg {
    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn has_entity(&self, id: &str) -> bool {
        self.entities.iter().any(|e| e.id == id)
    }

    pub fn preimage(&self, id: &str) -> BTreeSet<BlockId> {
        self.phi.get(id).cloned().unwrap_or_default()
    }

    /// Entities whose phi preimage contains the given block.
    pub fn entities_of_block(&self, block: &str) -> BTreeSet<EntityId> {
        self.phi
            .iter()
            .filter(|(_, blocks)| blocks.contains(block))
            .map(|(e, _)| e.clone())
            .collect()
    }

    /// Risk-relevant successor adjacency.
    pub fn risk_adjacency(&self) -> BTreeMap<EntityId, Vec<EntityId>> {
        let mut adj: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();
        for e in &self.entities {
            adj.entry(e.id.clone()).or_default();
        }
        for r in &self.relations {
            if r.risk_relevant {
                adj.entry(r.src.clone()).or_default().push(r.dst.clone());
            }
        }
        for succ in adj.values_mut() {
            succ.sort();
            succ.dedup();
        }
        adj
    }
}

/// Entities with at least one member block carrying an entry tag.
///
/// Errors on a dangling phi reference rather than guessing.
pub fn entry_entities(g: &Ssckg, b: &ToyArtifact) -> Result<BTreeSet<EntityId>, ModelError> {
    let mut out = BTreeSet::new();
    for e in &g.entities {
        for blk_id in g.preimage(&e.id) {
            let blk = b.block(&blk_id).ok_or_else(|| ModelError::DanglingPhi {
                entity: e.id.clone(),
                block: blk_id.clone(),
            })?;
            if blk.is_entry() {
                out.insert(e.id.clone());
                break;
            }
        }
    }
    Ok(out)
}

/// Closure from the entry entities over risk-relevant relations only.
/// Entry entities are themselves reachable.
pub fn reachable_entities(g: &Ssckg, b: &ToyArtifact) -> Result<BTreeSet<EntityId>, ModelError> {
    let entries = entry_entities(g, b)?;
    Ok(reachable_from(g, &entries))
}

/// Closure from an explicit entry set; used when the artifact is gone but
/// the entry set is known (coverage comparisons on rebuilt graphs).
pub fn reachable_from(g: &Ssckg, entries: &BTreeSet<EntityId>) -> BTreeSet<EntityId> {
    let adj = g.risk_adjacency();
    let mut seen: BTreeSet<EntityId> = entries
        .iter()
        .filter(|e| g.has_entity(e))
        .cloned()
        .collect();
    let mut queue: VecDeque<EntityId> = seen.iter().cloned().collect();
    while let Some(e) = queue.pop_front() {
        if let Some(succ) = adj.get(&e) {
            for s in succ {
                if seen.insert(s.clone()) {
                    queue.push_back(s.clone());
                }
            }
        }
    }
    seen
}

/// Validate a bundled (artifact, graph) case. Returns all violations found;
/// an empty list means every type invariant holds.
pub fn validate_case(b: &ToyArtifact, g: &Ssckg) -> Vec<Violation> {
    let mut out = crate::artifact::validate_artifact(b);

    for e in &g.entities {
        if !(0.0..=1.0).contains(&e.rho) {
            out.push(Violation::RiskOutOfRange { entity: e.id.clone(), rho: e.rho });
        }
        if !g.phi.contains_key(&e.id) {
            out.push(Violation::PhiMissingEntity { entity: e.id.clone() });
        }
    }

    for (entity, blocks) in &g.phi {
        for blk in blocks {
            if !b.has_block(blk) {
                out.push(Violation::DanglingPhi { entity: entity.clone(), block: blk.clone() });
            }
        }
    }

    out
}
