//! Toy block-graph artifact model.
//!
//! A [`ToyArtifact`] stands in for a stripped industrial binary: a directed
//! graph of basic blocks over a five-form instruction set, with variables
//! ranging over bounded integer, boolean, or enumerated-FSM-state domains
//! declared per artifact. Bounded domains guarantee that a brute-force
//! oracle exists for every solver call downstream.
//!
//! Control flow lives on edges. An edge may carry a guard condition; at the
//! end of a block the interpreter takes the first out-edge (in declared
//! order) whose guard holds. `Branch` instructions are in-block gates:
//! execution continues past one only while its condition holds, so every
//! `Branch` condition on a path is a necessary path constraint.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type BlockId = String;
pub type VarName = String;

/// Artifact availability class, determining the feasible remediation tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AvailabilityClass {
    PolicyOnly,
    BinaryRewritable,
    SourceAvailable,
}

/// Sink classification used to key the remediation template library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinkKind {
    OutOfBoundsWrite,
    OutOfBoundsRead,
    NullDeref,
    UnsafeStateWrite,
    CommandExec,
}

/// Entry-role tags marking externally invocable boundaries or execution roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryTag {
    Exported,
    NetworkHandler,
    ProtocolHandler,
    FirmwareServiceEntry,
    TaskRoot,
    StartupRoutine,
    ScanRoot,
}

/// Declared domain of a variable. All domains are finite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Int { min: i64, max: i64 },
    Bool,
    /// Enumerated FSM-state domain; the first state is the initial value.
    Fsm { states: Vec<String> },
}

impl Domain {
    pub fn size(&self) -> u64 {
        match self {
            Domain::Int { min, max } => {
                if max < min {
                    0
                } else {
                    (max - min) as u64 + 1
                }
            }
            Domain::Bool => 2,
            Domain::Fsm { states } => states.len() as u64,
        }
    }

    /// Default initial value: domain minimum / false / first declared state.
    pub fn default_value(&self) -> Value {
        match self {
            Domain::Int { min, .. } => Value::Int(*min),
            Domain::Bool => Value::Bool(false),
            Domain::Fsm { states } => Value::State(states.first().cloned().unwrap_or_default()),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Domain::Int { min, max }, Value::Int(i)) => i >= min && i <= max,
            (Domain::Bool, Value::Bool(_)) => true,
            (Domain::Fsm { states }, Value::State(s)) => states.iter().any(|x| x == s),
            _ => false,
        }
    }

    /// All values in declared enumeration order.
    pub fn values(&self) -> Vec<Value> {
        match self {
            Domain::Int { min, max } => (*min..=*max).map(Value::Int).collect(),
            Domain::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Domain::Fsm { states } => states.iter().cloned().map(Value::State).collect(),
        }
    }
}

/// Concrete value of a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    Bool(bool),
    State(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::State(s) => write!(f, "{s}"),
        }
    }
}

/// Comparison operator of a [`Cond`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Neq,
    Le,
    Ge,
    Lt,
    Gt,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Neq,
            CmpOp::Neq => CmpOp::Eq,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    pub fn eval(self, lhs: &Value, rhs: &Value) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Neq => lhs != rhs,
            // Ordered comparisons are meaningful for ints only; other value
            // kinds compare equal/unequal and order as false.
            CmpOp::Le | CmpOp::Ge | CmpOp::Lt | CmpOp::Gt => match (lhs.as_int(), rhs.as_int()) {
                (Some(a), Some(b)) => match self {
                    CmpOp::Le => a <= b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Lt => a < b,
                    CmpOp::Gt => a > b,
                    _ => unreachable!(),
                },
                _ => false,
            },
        }
    }
}

/// A single-variable boolean test used on edges, branches, and gates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cond {
    pub var: VarName,
    pub op: CmpOp,
    pub value: Value,
}

impl Cond {
    pub fn new(var: impl Into<String>, op: CmpOp, value: Value) -> Self {
        Cond { var: var.into(), op, value }
    }

    pub fn eval(&self, vars: &BTreeMap<VarName, Value>) -> bool {
        match vars.get(&self.var) {
            Some(v) => self.op.eval(v, &self.value),
            None => false,
        }
    }
}

impl std::fmt::Display for Cond {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.op {
            CmpOp::Eq => "==",
            CmpOp::Neq => "!=",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        };
        write!(f, "{} {} {}", self.var, op, self.value)
    }
}

/// Right-hand side of an `Assign`. Arithmetic stays within var-plus-constant
/// form so path encoding can normalize every substituted condition back into
/// the atom language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(Value),
    Var(VarName),
    Add(VarName, i64),
    Sub(VarName, i64),
}

/// Guard predicate: disjunction of conjunctive cubes over observable vars.
/// An empty cube list never fires.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GuardPredicate {
    pub cubes: Vec<Vec<Cond>>,
}

impl GuardPredicate {
    pub fn never() -> Self {
        GuardPredicate { cubes: Vec::new() }
    }

    pub fn eval(&self, vars: &BTreeMap<VarName, Value>) -> bool {
        self.cubes.iter().any(|cube| cube.iter().all(|c| c.eval(vars)))
    }

    pub fn vars(&self) -> BTreeSet<VarName> {
        self.cubes
            .iter()
            .flat_map(|cube| cube.iter().map(|c| c.var.clone()))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }
}

impl std::fmt::Display for GuardPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.cubes.is_empty() {
            return write!(f, "false");
        }
        let cubes: Vec<String> = self
            .cubes
            .iter()
            .map(|cube| {
                let cs: Vec<String> = cube.iter().map(|c| c.to_string()).collect();
                format!("({})", cs.join(" and "))
            })
            .collect();
        write!(f, "{}", cubes.join(" or "))
    }
}

/// The five-form toy instruction set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instr {
    Assign {
        var: VarName,
        expr: Expr,
    },
    /// In-block gate: execution of this block continues only while the
    /// condition holds; otherwise the run halts benignly.
    Branch {
        cond: Cond,
    },
    /// Consume the next message of the accepted kind from a channel, binding
    /// message fields to variables.
    ReadChannel {
        channel: String,
        accept: String,
        into: BTreeMap<String, VarName>,
    },
    /// Vulnerability-relevant operation; reaching one is what verification
    /// and replay observe.
    Sink {
        kind: SinkKind,
    },
    /// Runtime guard inserted by binary hardening: when the predicate fires,
    /// control transfers to the safe handler block.
    Guard {
        pred: GuardPredicate,
        safe_target: BlockId,
    },
}

/// A basic block.
///
/// `inherit` records the host block for blocks synthesized by remediation
/// (guards and safe handlers); graph rebuilding maps such blocks into the
/// entities of their host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    #[serde(default)]
    pub instrs: Vec<Instr>,
    #[serde(default)]
    pub tags: BTreeSet<EntryTag>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inherit: Option<BlockId>,
}

impl Block {
    pub fn new(id: impl Into<String>) -> Self {
        Block {
            id: id.into(),
            instrs: Vec::new(),
            tags: BTreeSet::new(),
            labels: Vec::new(),
            inherit: None,
        }
    }

    pub fn is_entry(&self) -> bool {
        !self.tags.is_empty()
    }

    pub fn first_sink(&self) -> Option<(usize, SinkKind)> {
        self.instrs.iter().enumerate().find_map(|(i, ins)| match ins {
            Instr::Sink { kind } => Some((i, *kind)),
            _ => None,
        })
    }
}

/// Directed control-flow edge with an optional guard condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: BlockId,
    pub to: BlockId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Cond>,
}

/// Protocol FSM of a channel: transitions on message kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fsm {
    pub states: Vec<String>,
    pub initial: String,
    /// (state, message kind, next state)
    pub transitions: Vec<(String, String, String)>,
}

impl Fsm {
    /// States reachable from the initial state over any message sequence.
    pub fn reachable_states(&self) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut work = vec![self.initial.clone()];
        while let Some(s) = work.pop() {
            if !seen.insert(s.clone()) {
                continue;
            }
            for (from, _, to) in &self.transitions {
                if *from == s && !seen.contains(to) {
                    work.push(to.clone());
                }
            }
        }
        seen
    }

    pub fn step(&self, state: &str, msg_kind: &str) -> Option<&str> {
        self.transitions
            .iter()
            .find(|(from, kind, _)| from == state && kind == msg_kind)
            .map(|(_, _, to)| to.as_str())
    }
}

/// One field condition of a policy gate rule, over channel-message fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldCond {
    pub field: String,
    pub op: CmpOp,
    pub value: Value,
}

impl std::fmt::Display for FieldCond {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.op {
            CmpOp::Eq => "==",
            CmpOp::Neq => "!=",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        };
        write!(f, "{} {} {}", self.field, op, self.value)
    }
}

/// A single drop rule of a Tier-1 policy: a message is dropped when it
/// matches the kind (if set) and satisfies every field condition. A
/// condition on a field absent from the message does not match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg_kind: Option<String>,
    pub conds: Vec<FieldCond>,
}

impl GateRule {
    pub fn matches(&self, msg: &ChannelMessage) -> bool {
        if let Some(kind) = &self.msg_kind {
            if *kind != msg.kind {
                return false;
            }
        }
        self.conds.iter().all(|c| match msg.fields.get(&c.field) {
            Some(v) => c.op.eval(v, &c.value),
            None => false,
        })
    }
}

/// A channel: protocol FSM plus any attached Tier-1 policy rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub fsm: Fsm,
    /// Tier-1 gate rules; a message matching any rule is dropped at read.
    #[serde(default)]
    pub policy: Vec<GateRule>,
}

/// One concrete channel message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMessage {
    pub kind: String,
    #[serde(default)]
    pub fields: BTreeMap<String, Value>,
}

/// The toy artifact: block graph, channels, variable domains, observables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyArtifact {
    pub blocks: Vec<Block>,
    pub edges: Vec<Edge>,
    pub availability: AvailabilityClass,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    /// Variables visible at any guard insertion point.
    #[serde(default)]
    pub observables: BTreeSet<VarName>,
    /// Declared finite domains of every variable in the artifact.
    pub domains: BTreeMap<VarName, Domain>,
    /// Instruction-step slack available for inserted guards per scan cycle.
    #[serde(default = "default_scan_slack")]
    pub scan_slack: u64,
}

fn default_scan_slack() -> u64 {
    16
}

impl ToyArtifact {
    pub fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn has_block(&self, id: &str) -> bool {
        self.blocks.iter().any(|b| b.id == id)
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelSpec> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn entry_blocks(&self) -> Vec<&Block> {
        self.blocks.iter().filter(|b| b.is_entry()).collect()
    }

    pub fn out_edges(&self, from: &str) -> Vec<&Edge> {
        self.edges.iter().filter(|e| e.from == from).collect()
    }

    /// Variables bound by any `ReadChannel` instruction. These form the
    /// input half of a witness; everything else is operational state.
    pub fn input_vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        for b in &self.blocks {
            for ins in &b.instrs {
                if let Instr::ReadChannel { into, .. } = ins {
                    out.extend(into.values().cloned());
                }
            }
        }
        out
    }
}

/// Structured validation violations. Validation reports, never aborts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Violation {
    DuplicateBlockId { id: BlockId },
    DanglingEdge { from: BlockId, to: BlockId },
    NoEntryBlock,
    UndeclaredVariable { var: VarName, site: String },
    GuardVarNotObservable { block: BlockId, var: VarName },
    UnknownChannel { block: BlockId, channel: String },
    DanglingPhi { entity: String, block: BlockId },
    RiskOutOfRange { entity: String, rho: f64 },
    NonRiskAlphabetRelation { src: String, dst: String, relation: String },
    PhiMissingEntity { entity: String },
    BadFsm { channel: String, detail: String },
    BadDomain { var: VarName, detail: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DuplicateBlockId { id } => write!(f, "duplicate block id {id}"),
            Violation::DanglingEdge { from, to } => write!(f, "edge {from}->{to} names a missing block"),
            Violation::NoEntryBlock => write!(f, "no block carries an entry tag"),
            Violation::UndeclaredVariable { var, site } => {
                write!(f, "variable {var} at {site} is not in the domain table")
            }
            Violation::GuardVarNotObservable { block, var } => {
                write!(f, "guard in {block} references non-observable {var}")
            }
            Violation::UnknownChannel { block, channel } => {
                write!(f, "block {block} reads unknown channel {channel}")
            }
            Violation::DanglingPhi { entity, block } => {
                write!(f, "phi({entity}) references missing block {block}")
            }
            Violation::RiskOutOfRange { entity, rho } => {
                write!(f, "entity {entity} has risk {rho} outside [0,1]")
            }
            Violation::NonRiskAlphabetRelation { src, dst, relation } => {
                write!(f, "risk-relevant relation {src}->{dst} has type {relation} outside the risk alphabet")
            }
            Violation::PhiMissingEntity { entity } => {
                write!(f, "entity {entity} has no phi mapping")
            }
            Violation::BadFsm { channel, detail } => write!(f, "channel {channel}: {detail}"),
            Violation::BadDomain { var, detail } => write!(f, "domain of {var}: {detail}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("phi references missing block {block} (entity {entity})")]
    DanglingPhi { entity: String, block: BlockId },
}

fn check_cond_vars(
    cond: &Cond,
    site: &str,
    domains: &BTreeMap<VarName, Domain>,
    out: &mut Vec<Violation>,
) {
    if !domains.contains_key(&cond.var) {
        out.push(Violation::UndeclaredVariable { var: cond.var.clone(), site: site.to_string() });
    }
}

/// Validate artifact-side invariants: unique block ids, edge endpoints,
/// at least one entry root, declared variables, observable guard vars,
/// well-formed channels and domains.
pub fn validate_artifact(b: &ToyArtifact) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for blk in &b.blocks {
        if !seen.insert(blk.id.clone()) {
            out.push(Violation::DuplicateBlockId { id: blk.id.clone() });
        }
    }

    for e in &b.edges {
        if !b.has_block(&e.from) || !b.has_block(&e.to) {
            out.push(Violation::DanglingEdge { from: e.from.clone(), to: e.to.clone() });
        }
        if let Some(c) = &e.guard {
            check_cond_vars(c, &format!("edge {}->{}", e.from, e.to), &b.domains, &mut out);
        }
    }

    if !b.blocks.iter().any(|blk| blk.is_entry()) {
        out.push(Violation::NoEntryBlock);
    }

    for (var, dom) in &b.domains {
        match dom {
            Domain::Int { min, max } if max < min => {
                out.push(Violation::BadDomain { var: var.clone(), detail: "empty range".into() });
            }
            Domain::Fsm { states } if states.is_empty() => {
                out.push(Violation::BadDomain { var: var.clone(), detail: "no states".into() });
            }
            _ => {}
        }
    }

    for blk in &b.blocks {
        for (i, ins) in blk.instrs.iter().enumerate() {
            let site = format!("{}#{}", blk.id, i);
            match ins {
                Instr::Assign { var, expr } => {
                    if !b.domains.contains_key(var) {
                        out.push(Violation::UndeclaredVariable { var: var.clone(), site: site.clone() });
                    }
                    match expr {
                        Expr::Var(v) | Expr::Add(v, _) | Expr::Sub(v, _) => {
                            if !b.domains.contains_key(v) {
                                out.push(Violation::UndeclaredVariable { var: v.clone(), site });
                            }
                        }
                        Expr::Const(_) => {}
                    }
                }
                Instr::Branch { cond } => check_cond_vars(cond, &site, &b.domains, &mut out),
                Instr::ReadChannel { channel, into, .. } => {
                    if b.channel(channel).is_none() {
                        out.push(Violation::UnknownChannel { block: blk.id.clone(), channel: channel.clone() });
                    }
                    for var in into.values() {
                        if !b.domains.contains_key(var) {
                            out.push(Violation::UndeclaredVariable { var: var.clone(), site: site.clone() });
                        }
                    }
                }
                Instr::Sink { .. } => {}
                Instr::Guard { pred, safe_target } => {
                    for var in pred.vars() {
                        if !b.observables.contains(&var) {
                            out.push(Violation::GuardVarNotObservable { block: blk.id.clone(), var: var.clone() });
                        }
                        if !b.domains.contains_key(&var) {
                            out.push(Violation::UndeclaredVariable { var, site: site.clone() });
                        }
                    }
                    if !b.has_block(safe_target) {
                        out.push(Violation::DanglingEdge { from: blk.id.clone(), to: safe_target.clone() });
                    }
                }
            }
        }
    }

    for ch in &b.channels {
        if !ch.fsm.states.iter().any(|s| *s == ch.fsm.initial) {
            out.push(Violation::BadFsm {
                channel: ch.name.clone(),
                detail: format!("initial state {} not declared", ch.fsm.initial),
            });
        }
        for (from, _, to) in &ch.fsm.transitions {
            if !ch.fsm.states.contains(from) || !ch.fsm.states.contains(to) {
                out.push(Violation::BadFsm {
                    channel: ch.name.clone(),
                    detail: format!("transition {from}->{to} names undeclared state"),
                });
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_artifact() -> ToyArtifact {
        let mut entry = Block::new("b0");
        entry.tags.insert(EntryTag::NetworkHandler);
        ToyArtifact {
            blocks: vec![entry, Block::new("b1")],
            edges: vec![Edge { from: "b0".into(), to: "b1".into(), guard: None }],
            availability: AvailabilityClass::BinaryRewritable,
            channels: vec![],
            observables: BTreeSet::new(),
            domains: BTreeMap::from([("x".to_string(), Domain::Int { min: 0, max: 5 })]),
            scan_slack: 16,
        }
    }

    #[test]
    fn well_formed_artifact_validates_clean() {
        assert!(validate_artifact(&tiny_artifact()).is_empty());
    }

    #[test]
    fn dangling_edge_reported() {
        let mut b = tiny_artifact();
        b.edges.push(Edge { from: "b1".into(), to: "zz".into(), guard: None });
        let v = validate_artifact(&b);
        assert!(v.iter().any(|x| matches!(x, Violation::DanglingEdge { .. })));
    }

    #[test]
    fn missing_entry_reported() {
        let mut b = tiny_artifact();
        b.blocks[0].tags.clear();
        let v = validate_artifact(&b);
        assert!(v.iter().any(|x| matches!(x, Violation::NoEntryBlock)));
    }

    #[test]
    fn guard_on_non_observable_var_reported() {
        let mut b = tiny_artifact();
        b.blocks[1].instrs.push(Instr::Guard {
            pred: GuardPredicate { cubes: vec![vec![Cond::new("x", CmpOp::Gt, Value::Int(3))]] },
            safe_target: "b0".into(),
        });
        let v = validate_artifact(&b);
        assert!(v.iter().any(|x| matches!(x, Violation::GuardVarNotObservable { .. })));
    }

    #[test]
    fn fsm_reachability_closure() {
        let fsm = Fsm {
            states: vec!["idle".into(), "established".into(), "armed".into()],
            initial: "idle".into(),
            transitions: vec![("idle".into(), "hello".into(), "established".into())],
        };
        let r = fsm.reachable_states();
        assert!(r.contains("idle") && r.contains("established"));
        assert!(!r.contains("armed"));
    }

    #[test]
    fn branch_negation_roundtrip() {
        for op in [CmpOp::Eq, CmpOp::Neq, CmpOp::Le, CmpOp::Ge, CmpOp::Lt, CmpOp::Gt] {
            assert_eq!(op.negate().negate(), op);
        }
    }
}
