//! Path-to-constraint encoding.
//!
//! Walks a block path forward with a substitution environment mapping each
//! variable to `symbol + offset` or a constant, and emits:
//!
//! - (a) branch conditions and edge guards along the path as path-family
//!   atoms,
//! - (b) the prior's operational-family atoms (with `fsm-precedes` lowered
//!   into FSM-reachability `in-set` checks against the paired channel spec),
//! - (c) declared domain bounds for every referenced variable.
//!
//! Two extra constraint sources keep the encoding faithful to the concrete
//! interpreter:
//!
//! - earlier-declared sibling edge guards must be false for a later edge to
//!   be taken (the interpreter picks the first matching edge), emitted as
//!   blocked cubes;
//! - an in-path `Guard` instruction must not fire for execution to continue
//!   past it, so each of its cubes is emitted as a blocked cube; stepping
//!   *into* a guard's safe handler requires the predicate to hold, which is
//!   exact for single-cube predicates and recorded as a model gap otherwise.
//!
//! Tier-1 policy gates on a channel become blocked cubes over the variables
//! bound at the matching read.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::artifact::{
    BlockId, ChannelMessage, CmpOp, Cond, Domain, Expr, Instr, ToyArtifact, Value, VarName,
};
use crate::caca::OperationalStatePrior;
use crate::constraint::{AtomOp, BlockedCube, ConstraintAtom, Encoding, Family, Operand};

/// Suffix of synthesized per-channel FSM-state variables. These exist only
/// inside encodings and are stripped from witnesses.
pub const FSM_STATE_VAR_SUFFIX: &str = "::fsm";

pub fn fsm_state_var(channel: &str) -> String {
    format!("{channel}{FSM_STATE_VAR_SUFFIX}")
}

pub fn is_fsm_state_var(var: &str) -> bool {
    var.ends_with(FSM_STATE_VAR_SUFFIX)
}

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("variable {var} at {site} is not declared in the artifact domain table")]
    UndeclaredVariable { var: VarName, site: String },
    #[error("path step {from} -> {to} has no edge or guard jump")]
    InvalidStep { from: BlockId, to: BlockId },
    #[error("path names missing block {0}")]
    MissingBlock(BlockId),
    #[error("fsm-precedes atom names unknown channel {0}")]
    UnknownChannel(String),
    #[error("empty path")]
    EmptyPath,
}

/// Symbolic value: a named symbol plus integer offset, or a constant.
#[derive(Debug, Clone, PartialEq)]
enum SymVal {
    Sym { var: VarName, offset: i64 },
    Const(Value),
}

#[derive(Debug, Clone, Default)]
struct SymEnv {
    map: BTreeMap<VarName, SymVal>,
}

impl SymEnv {
    fn get(&self, var: &str) -> SymVal {
        self.map
            .get(var)
            .cloned()
            .unwrap_or_else(|| SymVal::Sym { var: var.to_string(), offset: 0 })
    }

    fn set(&mut self, var: &str, v: SymVal) {
        self.map.insert(var.to_string(), v);
    }

    fn eval_expr(&self, expr: &Expr) -> SymVal {
        match expr {
            Expr::Const(v) => SymVal::Const(v.clone()),
            Expr::Var(u) => self.get(u),
            Expr::Add(u, k) => self.offset(u, *k),
            Expr::Sub(u, k) => self.offset(u, -*k),
        }
    }

    fn offset(&self, var: &str, k: i64) -> SymVal {
        match self.get(var) {
            SymVal::Sym { var, offset } => SymVal::Sym { var, offset: offset + k },
            SymVal::Const(Value::Int(i)) => SymVal::Const(Value::Int(i + k)),
            // Offsetting a non-integer is an authoring error; propagate the
            // constant so the condition evaluates (to false) rather than
            // inventing a value.
            other => other,
        }
    }
}

/// Result of normalizing a condition under the substitution environment.
enum NormCond {
    Atom(VarName, CmpOp, Value),
    True,
    False,
}

fn normalize_cond(cond: &Cond, env: &SymEnv) -> NormCond {
    match env.get(&cond.var) {
        SymVal::Const(v) => {
            if cond.op.eval(&v, &cond.value) {
                NormCond::True
            } else {
                NormCond::False
            }
        }
        SymVal::Sym { var, offset } => {
            if offset == 0 {
                NormCond::Atom(var, cond.op, cond.value.clone())
            } else {
                match cond.value.as_int() {
                    // (sym + k) op c  <=>  sym op (c - k)
                    Some(c) => NormCond::Atom(var, cond.op, Value::Int(c - offset)),
                    None => NormCond::False,
                }
            }
        }
    }
}

/// Record of one channel read along a path, after variable binding.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRead {
    pub block: BlockId,
    pub channel: String,
    pub accept: String,
    /// field -> variable bindings.
    pub into: BTreeMap<String, VarName>,
}

/// Encoding of a path plus metadata needed by witnesses and synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEncoding {
    pub encoding: Encoding,
    /// Channel reads in path order; drives witness message construction.
    pub reads: Vec<ChannelRead>,
    /// True when the path steps into a multi-cube guard handler, which this
    /// atom language cannot encode exactly; such paths are inconclusive.
    pub gap: bool,
}

fn add_atom(
    enc: &mut Encoding,
    referenced: &mut BTreeSet<VarName>,
    var: VarName,
    op: CmpOp,
    value: Value,
    family: Family,
) {
    referenced.insert(var.clone());
    enc.atoms.push(ConstraintAtom::cmp(var, op, value, family));
}

fn push_cube(
    enc: &mut Encoding,
    referenced: &mut BTreeSet<VarName>,
    conds: &[Cond],
    env: &SymEnv,
) {
    let mut cube: BlockedCube = Vec::new();
    for cond in conds {
        match normalize_cond(cond, env) {
            NormCond::Atom(var, op, value) => {
                referenced.insert(var.clone());
                cube.push((var, op, value));
            }
            NormCond::True => {}
            // A constant-false condition makes the whole cube unmatched.
            NormCond::False => return,
        }
    }
    // An empty cube after simplification excludes everything.
    enc.blocked.push(cube);
}

/// Encode the operational prior plus the conditions of a block path.
pub fn encode(
    prior: &OperationalStatePrior,
    b: &ToyArtifact,
    path: &[BlockId],
) -> Result<PathEncoding, EncodeError> {
    if path.is_empty() {
        return Err(EncodeError::EmptyPath);
    }
    let mut enc = Encoding::default();
    let mut referenced: BTreeSet<VarName> = BTreeSet::new();
    let mut reads = Vec::new();
    let mut env = SymEnv::default();
    let mut gap = false;

    for (pos, block_id) in path.iter().enumerate() {
        let block = b
            .block(block_id)
            .ok_or_else(|| EncodeError::MissingBlock(block_id.clone()))?;
        let is_final = pos + 1 == path.len();
        let next = path.get(pos + 1);
        let sink_cutoff = if is_final {
            block.first_sink().map(|(i, _)| i).unwrap_or(block.instrs.len())
        } else {
            block.instrs.len()
        };

        // True when control leaves this block through a guard's safe-handler
        // jump rather than through edge selection.
        let mut guard_jump = false;

        for (i, instr) in block.instrs.iter().enumerate() {
            if is_final && i >= sink_cutoff {
                break;
            }
            match instr {
                Instr::Assign { var, expr } => {
                    let v = env.eval_expr(expr);
                    env.set(var, v);
                }
                Instr::Branch { cond } => match normalize_cond(cond, &env) {
                    NormCond::Atom(var, op, value) => {
                        add_atom(&mut enc, &mut referenced, var, op, value, Family::Path)
                    }
                    NormCond::True => {}
                    NormCond::False => enc.infeasible = true,
                },
                Instr::ReadChannel { channel, accept, into } => {
                    // A fresh read resets each bound variable to its own symbol.
                    for var in into.values() {
                        env.set(var, SymVal::Sym { var: var.clone(), offset: 0 });
                        referenced.insert(var.clone());
                    }
                    if let Some(spec) = b.channel(channel) {
                        for rule in &spec.policy {
                            if let Some(kind) = &rule.msg_kind {
                                if kind != accept {
                                    continue;
                                }
                            }
                            // The read message must not match the gate. Gate
                            // conditions on unbound fields cannot match.
                            let mapped: Option<Vec<Cond>> = rule
                                .conds
                                .iter()
                                .map(|fc| {
                                    into.get(&fc.field).map(|var| Cond {
                                        var: var.clone(),
                                        op: fc.op,
                                        value: fc.value.clone(),
                                    })
                                })
                                .collect();
                            match mapped {
                                Some(conds) => push_cube(&mut enc, &mut referenced, &conds, &env),
                                None => {}
                            }
                        }
                    }
                    reads.push(ChannelRead {
                        block: block_id.clone(),
                        channel: channel.clone(),
                        accept: accept.clone(),
                        into: into.clone(),
                    });
                }
                Instr::Sink { .. } => {}
                Instr::Guard { pred, safe_target } => {
                    if next.map(|n| n == safe_target).unwrap_or(false) {
                        // Stepping into the handler requires the predicate.
                        if pred.cubes.len() == 1 {
                            for cond in &pred.cubes[0] {
                                match normalize_cond(cond, &env) {
                                    NormCond::Atom(var, op, value) => add_atom(
                                        &mut enc,
                                        &mut referenced,
                                        var,
                                        op,
                                        value,
                                        Family::Path,
                                    ),
                                    NormCond::True => {}
                                    NormCond::False => enc.infeasible = true,
                                }
                            }
                        } else if pred.cubes.is_empty() {
                            enc.infeasible = true;
                        } else {
                            gap = true;
                        }
                        guard_jump = true;
                        break;
                    }
                    // Continuing past the guard requires every cube false.
                    for cube in &pred.cubes {
                        push_cube(&mut enc, &mut referenced, cube, &env);
                    }
                }
            }
        }

        if let Some(next_id) = next {
            if guard_jump {
                continue;
            }
            let out = b.out_edges(block_id);
            let chosen = out.iter().position(|e| e.to == *next_id);
            let chosen = match chosen {
                Some(i) => i,
                None => {
                    return Err(EncodeError::InvalidStep {
                        from: block_id.clone(),
                        to: next_id.clone(),
                    })
                }
            };
            // Earlier-declared siblings must not match, or the interpreter
            // would take them first.
            for earlier in &out[..chosen] {
                match &earlier.guard {
                    None => enc.infeasible = true,
                    Some(g) => push_cube(&mut enc, &mut referenced, std::slice::from_ref(g), &env),
                }
            }
            if let Some(g) = &out[chosen].guard {
                match normalize_cond(g, &env) {
                    NormCond::Atom(var, op, value) => {
                        add_atom(&mut enc, &mut referenced, var, op, value, Family::Path)
                    }
                    NormCond::True => {}
                    NormCond::False => enc.infeasible = true,
                }
            }
        }
    }

    // Prior atoms, with fsm-precedes lowered against the channel specs.
    for atom in prior.atoms() {
        if atom.op == AtomOp::FsmPrecedes {
            let channel = &atom.var;
            let spec = b
                .channel(channel)
                .ok_or_else(|| EncodeError::UnknownChannel(channel.clone()))?;
            let required = match &atom.operand {
                Operand::State(s) => s.clone(),
                other => format!("{other:?}"),
            };
            let state_var = fsm_state_var(channel);
            let reachable = spec.fsm.reachable_states();
            let values: Vec<Value> = if reachable.contains(&required) {
                reachable.into_iter().map(Value::State).collect()
            } else {
                // Required state unreachable: empty set refutes the family.
                Vec::new()
            };
            referenced.insert(state_var.clone());
            enc.atoms.push(ConstraintAtom::in_set(state_var, values, atom.family));
        } else {
            for v in atom.vars() {
                referenced.insert(v.clone());
            }
            enc.atoms.push(atom);
        }
    }

    // Declared domain bounds for every referenced variable; path family so
    // relaxation can never drop an enumeration bound.
    for var in &referenced {
        if is_fsm_state_var(var) {
            continue; // bounded by the lowered in-set atom itself
        }
        let dom = b.domains.get(var).ok_or_else(|| EncodeError::UndeclaredVariable {
            var: var.clone(),
            site: "path encoding".into(),
        })?;
        let bound = match dom {
            Domain::Int { min, max } => ConstraintAtom::in_range(var.clone(), *min, *max, Family::Path),
            Domain::Bool => ConstraintAtom::in_set(
                var.clone(),
                vec![Value::Bool(false), Value::Bool(true)],
                Family::Path,
            ),
            Domain::Fsm { states } => ConstraintAtom::in_set(
                var.clone(),
                states.iter().cloned().map(Value::State).collect(),
                Family::Path,
            ),
        };
        enc.bounds.push(bound);
    }

    Ok(PathEncoding { encoding: enc, reads, gap })
}

/// Construct the witness channel-message queues for a path: one message per
/// read, of the accepted kind, with fields drawn from the model.
pub fn witness_messages(
    reads: &[ChannelRead],
    model: &BTreeMap<VarName, Value>,
    b: &ToyArtifact,
) -> BTreeMap<String, Vec<ChannelMessage>> {
    let mut queues: BTreeMap<String, Vec<ChannelMessage>> = BTreeMap::new();
    for read in reads {
        let mut fields = BTreeMap::new();
        for (field, var) in &read.into {
            let value = model
                .get(var)
                .cloned()
                .or_else(|| b.domains.get(var).map(|d| d.default_value()));
            if let Some(v) = value {
                fields.insert(field.clone(), v);
            }
        }
        queues
            .entry(read.channel.clone())
            .or_default()
            .push(ChannelMessage { kind: read.accept.clone(), fields });
    }
    queues
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{
        AvailabilityClass, Block, ChannelSpec, Edge, EntryTag, FieldCond, Fsm, GateRule,
        GuardPredicate,
    };
    use crate::constraint::{solve_encoding, SolveStatus};

    fn base_artifact() -> ToyArtifact {
        let mut entry = Block::new("b0");
        entry.tags.insert(EntryTag::ProtocolHandler);
        entry.instrs.push(Instr::ReadChannel {
            channel: "ch".into(),
            accept: "req".into(),
            into: BTreeMap::from([
                ("fc".to_string(), "fc".to_string()),
                ("addr".to_string(), "addr".to_string()),
            ]),
        });
        let mut mid = Block::new("b1");
        mid.instrs.push(Instr::Branch {
            cond: Cond::new("fc", CmpOp::Eq, Value::Int(16)),
        });
        let mut sink = Block::new("b2");
        sink.instrs.push(Instr::Sink { kind: crate::artifact::SinkKind::OutOfBoundsWrite });
        ToyArtifact {
            blocks: vec![entry, mid, sink],
            edges: vec![
                Edge { from: "b0".into(), to: "b1".into(), guard: None },
                Edge {
                    from: "b1".into(),
                    to: "b2".into(),
                    guard: Some(Cond::new("addr", CmpOp::Gt, Value::Int(1000))),
                },
            ],
            availability: AvailabilityClass::PolicyOnly,
            channels: vec![ChannelSpec {
                name: "ch".into(),
                fsm: Fsm {
                    states: vec!["idle".into(), "busy".into()],
                    initial: "idle".into(),
                    transitions: vec![("idle".into(), "req".into(), "busy".into())],
                },
                policy: vec![],
            }],
            observables: BTreeSet::from(["fc".to_string(), "addr".to_string()]),
            domains: BTreeMap::from([
                ("fc".to_string(), Domain::Int { min: 0, max: 255 }),
                ("addr".to_string(), Domain::Int { min: 0, max: 65535 }),
            ]),
            scan_slack: 16,
        }
    }

    fn path() -> Vec<BlockId> {
        vec!["b0".into(), "b1".into(), "b2".into()]
    }

    #[test]
    fn straight_line_empty_prior_yields_only_domain_bounds_plus_conds() {
        let b = base_artifact();
        let pe = encode(&OperationalStatePrior::default(), &b, &path()).unwrap();
        // Branch fc==16 and edge guard addr>1000 as path atoms.
        assert_eq!(pe.encoding.atoms.len(), 2);
        assert!(pe.encoding.atoms.iter().all(|a| a.family == Family::Path));
        // Domain bounds for fc and addr, including the register range.
        assert!(pe.encoding.bounds.iter().any(|a| {
            a.var == "addr" && matches!(a.operand, Operand::Range { lo: 0, hi: 65535 })
        }));
        assert!(!pe.gap);
        assert_eq!(pe.reads.len(), 1);
    }

    #[test]
    fn encoding_is_satisfiable_and_model_meets_conditions() {
        let b = base_artifact();
        let pe = encode(&OperationalStatePrior::default(), &b, &path()).unwrap();
        let v = solve_encoding(&pe.encoding, 1_000_000, 42).unwrap();
        match v.status {
            SolveStatus::Sat(m) => {
                assert_eq!(m["fc"], Value::Int(16));
                assert!(m["addr"].as_int().unwrap() > 1000);
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn assignment_substitution_folds_to_constant() {
        let mut b = base_artifact();
        // Clamp addr before the guard: the path becomes infeasible.
        b.blocks[1].instrs.insert(0, Instr::Assign {
            var: "addr".into(),
            expr: Expr::Const(Value::Int(0)),
        });
        let pe = encode(&OperationalStatePrior::default(), &b, &path()).unwrap();
        assert!(pe.encoding.infeasible);
    }

    #[test]
    fn add_offset_normalizes_into_atom() {
        let mut b = base_artifact();
        b.domains.insert("len".to_string(), Domain::Int { min: 0, max: 100 });
        b.blocks[1].instrs.insert(0, Instr::Assign {
            var: "addr".into(),
            expr: Expr::Add("len".into(), 10),
        });
        let pe = encode(&OperationalStatePrior::default(), &b, &path()).unwrap();
        // addr > 1000 with addr = len + 10 becomes len > 990, unsatisfiable
        // under len in [0,100].
        let v = solve_encoding(&pe.encoding, 1_000_000, 42).unwrap();
        assert_eq!(v.status, SolveStatus::Unsat);
    }

    #[test]
    fn policy_gate_becomes_blocked_cube() {
        let mut b = base_artifact();
        b.channels[0].policy.push(GateRule {
            msg_kind: Some("req".into()),
            conds: vec![
                FieldCond { field: "fc".into(), op: CmpOp::Eq, value: Value::Int(16) },
                FieldCond { field: "addr".into(), op: CmpOp::Gt, value: Value::Int(1000) },
            ],
        });
        let pe = encode(&OperationalStatePrior::default(), &b, &path()).unwrap();
        assert_eq!(pe.encoding.blocked.len(), 1);
        // The gate blocks exactly the dangerous class; the path needs it.
        let v = solve_encoding(&pe.encoding, 1_000_000, 42).unwrap();
        assert_eq!(v.status, SolveStatus::Unsat);
    }

    #[test]
    fn fsm_precedes_reachable_state_lowers_to_inset() {
        let b = base_artifact();
        let mut prior = OperationalStatePrior::default();
        prior.proto.atoms.push(ConstraintAtom::new(
            "ch",
            AtomOp::FsmPrecedes,
            Operand::State("busy".into()),
            Family::Proto,
        ));
        let pe = encode(&prior, &b, &path()).unwrap();
        let v = solve_encoding(&pe.encoding, 1_000_000, 42).unwrap();
        assert!(v.is_sat());
    }

    #[test]
    fn fsm_precedes_unreachable_state_refutes_family() {
        let mut b = base_artifact();
        b.channels[0].fsm.states.push("armed".into());
        let mut prior = OperationalStatePrior::default();
        prior.proto.atoms.push(ConstraintAtom::new(
            "ch",
            AtomOp::FsmPrecedes,
            Operand::State("armed".into()),
            Family::Proto,
        ));
        let pe = encode(&prior, &b, &path()).unwrap();
        let v = solve_encoding(&pe.encoding, 1_000_000, 42).unwrap();
        assert_eq!(v.status, SolveStatus::Unsat);
        let fams =
            crate::constraint::attribute_refuting_families(&pe.encoding, 1_000_000, 42).unwrap();
        assert_eq!(fams, vec![Family::Proto]);
    }

    #[test]
    fn guard_on_path_blocks_continuation() {
        let mut b = base_artifact();
        b.blocks.push(Block::new("h"));
        b.blocks[1].instrs.insert(0, Instr::Guard {
            pred: GuardPredicate {
                cubes: vec![vec![
                    Cond::new("fc", CmpOp::Eq, Value::Int(16)),
                    Cond::new("addr", CmpOp::Gt, Value::Int(1000)),
                ]],
            },
            safe_target: "h".into(),
        });
        let pe = encode(&OperationalStatePrior::default(), &b, &path()).unwrap();
        // Continuing past the guard excludes exactly the dangerous cube, and
        // the path itself requires it: unsatisfiable.
        let v = solve_encoding(&pe.encoding, 1_000_000, 42).unwrap();
        assert_eq!(v.status, SolveStatus::Unsat);
    }

    #[test]
    fn step_into_multi_cube_handler_is_a_gap() {
        let mut b = base_artifact();
        b.blocks.push(Block::new("h"));
        b.edges.push(Edge { from: "b1".into(), to: "h".into(), guard: None });
        b.blocks[1].instrs.insert(0, Instr::Guard {
            pred: GuardPredicate {
                cubes: vec![
                    vec![Cond::new("fc", CmpOp::Eq, Value::Int(16))],
                    vec![Cond::new("fc", CmpOp::Eq, Value::Int(6))],
                ],
            },
            safe_target: "h".into(),
        });
        let pe = encode(
            &OperationalStatePrior::default(),
            &b,
            &vec!["b0".to_string(), "b1".to_string(), "h".to_string()],
        )
        .unwrap();
        assert!(pe.gap);
    }

    #[test]
    fn undeclared_variable_is_an_error() {
        let mut b = base_artifact();
        b.blocks[1].instrs.push(Instr::Branch {
            cond: Cond::new("ghost", CmpOp::Eq, Value::Int(1)),
        });
        let err = encode(&OperationalStatePrior::default(), &b, &path()).unwrap_err();
        assert!(matches!(err, EncodeError::UndeclaredVariable { ref var, .. } if var == "ghost"));
    }

    #[test]
    fn sibling_edge_guards_are_excluded() {
        let mut b = base_artifact();
        // b1 gets an earlier-declared edge to a benign block guarded by
        // addr <= 1000; taking b1 -> b2 must exclude it (redundantly here,
        // since the b2 guard already implies it, but the cube must exist).
        b.blocks.push(Block::new("benign"));
        b.edges.insert(1, Edge {
            from: "b1".into(),
            to: "benign".into(),
            guard: Some(Cond::new("addr", CmpOp::Le, Value::Int(1000))),
        });
        let pe = encode(&OperationalStatePrior::default(), &b, &path()).unwrap();
        assert!(!pe.encoding.blocked.is_empty());
        let v = solve_encoding(&pe.encoding, 1_000_000, 42).unwrap();
        assert!(v.is_sat());
    }

    #[test]
    fn witness_messages_follow_reads() {
        let b = base_artifact();
        let pe = encode(&OperationalStatePrior::default(), &b, &path()).unwrap();
        let model = BTreeMap::from([
            ("fc".to_string(), Value::Int(16)),
            ("addr".to_string(), Value::Int(1001)),
        ]);
        let queues = witness_messages(&pe.reads, &model, &b);
        assert_eq!(queues["ch"].len(), 1);
        assert_eq!(queues["ch"][0].kind, "req");
        assert_eq!(queues["ch"][0].fields["addr"], Value::Int(1001));
    }
}
