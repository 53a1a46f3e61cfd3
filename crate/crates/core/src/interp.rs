//! Concrete interpreter for the toy IR.
//!
//! Drives witness replay, benign-trace execution, and side-effect
//! measurement. Execution is deterministic: instructions run in order,
//! successor blocks are chosen as the first out-edge (in declared order)
//! whose guard holds, and channel reads consume queued messages front to
//! back, dropping any that match an attached policy gate.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::artifact::{BlockId, ChannelMessage, Instr, SinkKind, ToyArtifact, Value, VarName};

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Halt {
    /// No out-edge matched; normal end of control flow.
    Completed,
    /// An in-block branch gate failed.
    BranchGate { block: BlockId },
    /// A channel read found no further acceptable message.
    ChannelEmpty { channel: String },
    /// The next message had an unexpected kind.
    MessageKindMismatch { channel: String, expected: String, got: String },
    /// The channel FSM had no transition for a consumed message.
    FsmViolation { channel: String, state: String, kind: String },
    /// The step bound was exceeded; the run is inconclusive.
    StepLimit,
}

/// Interpreter execution state: current block, value trail, and the path
/// conditions observed while running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub pc: BlockId,
    pub trail: BTreeMap<VarName, Value>,
    pub phi_path: Vec<String>,
}

/// Everything observed during one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub blocks: Vec<BlockId>,
    pub sink_hits: Vec<(BlockId, SinkKind)>,
    /// Observable-variable snapshots at each guard firing.
    pub guard_fires: Vec<(BlockId, BTreeMap<VarName, Value>)>,
    pub dropped_messages: u64,
    pub fsm_violation: bool,
    pub halt: Halt,
    /// Final execution state: program counter, value trail, accumulated
    /// path conditions.
    pub state: PathState,
    pub steps: u64,
}

impl ExecOutcome {
    pub fn reached_sink_block(&self, block: &str) -> bool {
        self.sink_hits.iter().any(|(b, _)| b == block)
    }
}

/// Inputs for one run: initial variable overrides plus per-channel queues.
#[derive(Debug, Clone, Default)]
pub struct RunInput {
    pub overrides: BTreeMap<VarName, Value>,
    pub queues: BTreeMap<String, VecDeque<ChannelMessage>>,
}

pub const DEFAULT_STEP_LIMIT: u64 = 10_000;

/// Execute from `start` until halt. Never fails: undeclared-variable reads
/// evaluate to nothing and conditions over them are false, mirroring the
/// solver's closed-world view.
pub fn run(b: &ToyArtifact, start: &str, input: &RunInput, step_limit: u64) -> ExecOutcome {
    let mut vars: BTreeMap<VarName, Value> =
        b.domains.iter().map(|(k, d)| (k.clone(), d.default_value())).collect();
    for (k, v) in &input.overrides {
        vars.insert(k.clone(), v.clone());
    }
    let mut queues = input.queues.clone();
    let mut fsm_states: BTreeMap<String, String> =
        b.channels.iter().map(|c| (c.name.clone(), c.fsm.initial.clone())).collect();

    let mut out = ExecOutcome {
        blocks: Vec::new(),
        sink_hits: Vec::new(),
        guard_fires: Vec::new(),
        dropped_messages: 0,
        fsm_violation: false,
        halt: Halt::Completed,
        state: PathState { pc: start.to_string(), trail: BTreeMap::new(), phi_path: Vec::new() },
        steps: 0,
    };

    let mut current: Option<BlockId> = Some(start.to_string());

    'blocks: while let Some(block_id) = current.take() {
        let block = match b.block(&block_id) {
            Some(blk) => blk,
            None => break,
        };
        out.blocks.push(block_id.clone());
        out.state.pc = block_id.clone();

        for instr in &block.instrs {
            out.steps += 1;
            if out.steps > step_limit {
                out.halt = Halt::StepLimit;
                out.state.trail = vars;
                return out;
            }
            match instr {
                Instr::Assign { var, expr } => {
                    let v = match expr {
                        crate::artifact::Expr::Const(v) => Some(v.clone()),
                        crate::artifact::Expr::Var(u) => vars.get(u).cloned(),
                        crate::artifact::Expr::Add(u, k) => {
                            vars.get(u).and_then(Value::as_int).map(|i| Value::Int(i + k))
                        }
                        crate::artifact::Expr::Sub(u, k) => {
                            vars.get(u).and_then(Value::as_int).map(|i| Value::Int(i - k))
                        }
                    };
                    if let Some(v) = v {
                        vars.insert(var.clone(), v);
                    }
                }
                Instr::Branch { cond } => {
                    if !cond.eval(&vars) {
                        out.halt = Halt::BranchGate { block: block_id.clone() };
                        out.state.trail = vars;
                        return out;
                    }
                    out.state.phi_path.push(cond.to_string());
                }
                Instr::ReadChannel { channel, accept, into } => {
                    let spec = b.channel(channel);
                    let queue = queues.entry(channel.clone()).or_default();
                    let msg = loop {
                        match queue.pop_front() {
                            None => {
                                out.halt = Halt::ChannelEmpty { channel: channel.clone() };
                                out.state.trail = vars;
                                return out;
                            }
                            Some(msg) => {
                                let gated = spec
                                    .map(|s| s.policy.iter().any(|r| r.matches(&msg)))
                                    .unwrap_or(false);
                                if gated {
                                    out.dropped_messages += 1;
                                    continue;
                                }
                                break msg;
                            }
                        }
                    };
                    if msg.kind != *accept {
                        out.halt = Halt::MessageKindMismatch {
                            channel: channel.clone(),
                            expected: accept.clone(),
                            got: msg.kind.clone(),
                        };
                        out.state.trail = vars;
                        return out;
                    }
                    if let Some(spec) = spec {
                        let state = fsm_states.get_mut(channel).unwrap();
                        match spec.fsm.step(state, &msg.kind) {
                            Some(next) => *state = next.to_string(),
                            None => {
                                out.fsm_violation = true;
                                out.halt = Halt::FsmViolation {
                                    channel: channel.clone(),
                                    state: state.clone(),
                                    kind: msg.kind.clone(),
                                };
                                out.state.trail = vars;
                                return out;
                            }
                        }
                    }
                    for (field, var) in into {
                        if let Some(v) = msg.fields.get(field) {
                            vars.insert(var.clone(), v.clone());
                        }
                    }
                }
                Instr::Sink { kind } => {
                    out.sink_hits.push((block_id.clone(), *kind));
                }
                Instr::Guard { pred, safe_target } => {
                    if pred.eval(&vars) {
                        let snapshot = b
                            .observables
                            .iter()
                            .filter_map(|v| vars.get(v).map(|val| (v.clone(), val.clone())))
                            .collect();
                        out.guard_fires.push((block_id.clone(), snapshot));
                        current = Some(safe_target.clone());
                        continue 'blocks;
                    }
                }
            }
        }

        // Edge selection: first declared out-edge whose guard holds.
        out.steps += 1;
        if out.steps > step_limit {
            out.halt = Halt::StepLimit;
            out.state.trail = vars;
            return out;
        }
        let chosen = b
            .out_edges(&block_id)
            .into_iter()
            .find(|e| e.guard.as_ref().map(|g| g.eval(&vars)).unwrap_or(true));
        match chosen {
            Some(e) => {
                if let Some(g) = &e.guard {
                    out.state.phi_path.push(g.to_string());
                }
                current = Some(e.to.clone());
            }
            None => break,
        }
    }

    out.state.trail = vars;
    out
}

/// Run from every entry block in id order under independent copies of the
/// same input; used when "reaches the sink" must consider all roots.
pub fn run_from_entries(b: &ToyArtifact, input: &RunInput, step_limit: u64) -> Vec<ExecOutcome> {
    let mut entries: Vec<&str> = b.entry_blocks().iter().map(|blk| blk.id.as_str()).collect();
    entries.sort();
    entries.iter().map(|start| run(b, start, input, step_limit)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{
        AvailabilityClass, Block, ChannelSpec, CmpOp, Cond, Domain, Edge, EntryTag, Expr,
        FieldCond, Fsm, GateRule, GuardPredicate,
    };
    use std::collections::BTreeSet;

    fn handler_artifact() -> ToyArtifact {
        let mut entry = Block::new("b0");
        entry.tags.insert(EntryTag::ProtocolHandler);
        entry.instrs.push(Instr::ReadChannel {
            channel: "ch".into(),
            accept: "req".into(),
            into: BTreeMap::from([("n".to_string(), "n".to_string())]),
        });
        let mut work = Block::new("b1");
        work.instrs.push(Instr::Branch { cond: Cond::new("n", CmpOp::Gt, Value::Int(4)) });
        work.instrs.push(Instr::Sink { kind: SinkKind::OutOfBoundsWrite });
        ToyArtifact {
            blocks: vec![entry, work],
            edges: vec![Edge { from: "b0".into(), to: "b1".into(), guard: None }],
            availability: AvailabilityClass::BinaryRewritable,
            channels: vec![ChannelSpec {
                name: "ch".into(),
                fsm: Fsm {
                    states: vec!["idle".into(), "busy".into()],
                    initial: "idle".into(),
                    transitions: vec![("idle".into(), "req".into(), "busy".into())],
                },
                policy: vec![],
            }],
            observables: BTreeSet::from(["n".to_string()]),
            domains: BTreeMap::from([("n".to_string(), Domain::Int { min: 0, max: 10 })]),
            scan_slack: 16,
        }
    }

    fn req(n: i64) -> ChannelMessage {
        ChannelMessage {
            kind: "req".into(),
            fields: BTreeMap::from([("n".to_string(), Value::Int(n))]),
        }
    }

    #[test]
    fn dangerous_message_reaches_sink() {
        let b = handler_artifact();
        let input = RunInput {
            overrides: BTreeMap::new(),
            queues: BTreeMap::from([("ch".to_string(), VecDeque::from([req(9)]))]),
        };
        let out = run(&b, "b0", &input, DEFAULT_STEP_LIMIT);
        assert!(out.reached_sink_block("b1"));
        assert_eq!(out.halt, Halt::Completed);
    }

    #[test]
    fn benign_message_stops_at_branch_gate() {
        let b = handler_artifact();
        let input = RunInput {
            overrides: BTreeMap::new(),
            queues: BTreeMap::from([("ch".to_string(), VecDeque::from([req(2)]))]),
        };
        let out = run(&b, "b0", &input, DEFAULT_STEP_LIMIT);
        assert!(out.sink_hits.is_empty());
        assert_eq!(out.halt, Halt::BranchGate { block: "b1".into() });
    }

    #[test]
    fn policy_gate_drops_matching_message() {
        let mut b = handler_artifact();
        b.channels[0].policy.push(GateRule {
            msg_kind: Some("req".into()),
            conds: vec![FieldCond { field: "n".into(), op: CmpOp::Gt, value: Value::Int(4) }],
        });
        let input = RunInput {
            overrides: BTreeMap::new(),
            queues: BTreeMap::from([("ch".to_string(), VecDeque::from([req(9)]))]),
        };
        let out = run(&b, "b0", &input, DEFAULT_STEP_LIMIT);
        assert_eq!(out.dropped_messages, 1);
        assert!(out.sink_hits.is_empty());
        assert_eq!(out.halt, Halt::ChannelEmpty { channel: "ch".into() });
    }

    #[test]
    fn guard_redirects_to_safe_handler() {
        let mut b = handler_artifact();
        b.blocks.push(Block::new("safe"));
        b.blocks[1].instrs.insert(0, Instr::Guard {
            pred: GuardPredicate { cubes: vec![vec![Cond::new("n", CmpOp::Gt, Value::Int(4))]] },
            safe_target: "safe".into(),
        });
        let input = RunInput {
            overrides: BTreeMap::new(),
            queues: BTreeMap::from([("ch".to_string(), VecDeque::from([req(9)]))]),
        };
        let out = run(&b, "b0", &input, DEFAULT_STEP_LIMIT);
        assert!(out.sink_hits.is_empty());
        assert_eq!(out.guard_fires.len(), 1);
        assert_eq!(out.blocks.last().unwrap(), "safe");
    }

    #[test]
    fn fsm_violation_halts() {
        let mut b = handler_artifact();
        // Second read of the same kind has no transition from `busy`.
        b.blocks[1].instrs.insert(0, Instr::ReadChannel {
            channel: "ch".into(),
            accept: "req".into(),
            into: BTreeMap::new(),
        });
        let input = RunInput {
            overrides: BTreeMap::new(),
            queues: BTreeMap::from([("ch".to_string(), VecDeque::from([req(9), req(9)]))]),
        };
        let out = run(&b, "b0", &input, DEFAULT_STEP_LIMIT);
        assert!(out.fsm_violation);
    }

    #[test]
    fn step_limit_is_inconclusive() {
        let mut b = handler_artifact();
        // Tight loop between two empty blocks.
        b.blocks.push(Block::new("l1"));
        b.blocks.push(Block::new("l2"));
        b.edges.push(Edge { from: "l1".into(), to: "l2".into(), guard: None });
        b.edges.push(Edge { from: "l2".into(), to: "l1".into(), guard: None });
        let out = run(&b, "l1", &RunInput::default(), 64);
        assert_eq!(out.halt, Halt::StepLimit);
    }

    #[test]
    fn assignment_arithmetic_updates_trail() {
        let mut b = handler_artifact();
        b.blocks[1].instrs.insert(0, Instr::Assign {
            var: "n".into(),
            expr: Expr::Add("n".into(), 3),
        });
        let input = RunInput {
            overrides: BTreeMap::new(),
            queues: BTreeMap::from([("ch".to_string(), VecDeque::from([req(2)]))]),
        };
        let out = run(&b, "b0", &input, DEFAULT_STEP_LIMIT);
        // 2 + 3 = 5 > 4 passes the gate and reaches the sink.
        assert!(out.reached_sink_block("b1"));
        assert_eq!(out.state.trail["n"], Value::Int(5));
    }
}
