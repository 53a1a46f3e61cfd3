//! Deterministic budgeted constraint solving over finite declared domains.
//!
//! The solver is an ordered backtracking enumerator with forward range
//! pruning. Every variable must carry at least one set-defining atom
//! (`in-range`, `in-set`, or an equality against a literal); the enumeration
//! space of an encoding is the per-variable intersection of its set-defining
//! atoms. Anything without such an atom is an undeclared (potentially
//! infinite) domain and is an error, never a silent truncation.
//!
//! Budget accounting: one unit is charged per candidate value tested for a
//! variable during search. Exhausting the budget yields `Unknown`;
//! `Unsat` is returned only after an exhaustive refutation completed within
//! budget, and every `Sat` model is re-evaluated against all atoms before it
//! is returned.
//!
//! Verdicts and models are a pure function of `(encoding, budget, seed)`:
//! the seed permutes variable ordering, values always enumerate ascending.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{CmpOp, Value, VarName};

/// Constraint family of an atom: the path family plus the six
/// operational-state families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Path,
    Env,
    Io,
    Proto,
    Runtime,
    Component,
    Time,
}

impl Family {
    /// The six operational families in the fixed tie-break order.
    pub const OPERATIONAL: [Family; 6] = [
        Family::Env,
        Family::Io,
        Family::Proto,
        Family::Runtime,
        Family::Component,
        Family::Time,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Path => "path",
            Family::Env => "env",
            Family::Io => "io",
            Family::Proto => "proto",
            Family::Runtime => "runtime",
            Family::Component => "component",
            Family::Time => "time",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Relation of a constraint atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomOp {
    Eq,
    Neq,
    Le,
    Ge,
    Lt,
    Gt,
    InRange,
    InSet,
    /// Protocol-FSM precedence; lowered by path encoding into an `in-set`
    /// reachability check before solving.
    FsmPrecedes,
}

impl AtomOp {
    pub fn from_cmp(op: CmpOp) -> AtomOp {
        match op {
            CmpOp::Eq => AtomOp::Eq,
            CmpOp::Neq => AtomOp::Neq,
            CmpOp::Le => AtomOp::Le,
            CmpOp::Ge => AtomOp::Ge,
            CmpOp::Lt => AtomOp::Lt,
            CmpOp::Gt => AtomOp::Gt,
        }
    }

    pub fn as_cmp(&self) -> Option<CmpOp> {
        match self {
            AtomOp::Eq => Some(CmpOp::Eq),
            AtomOp::Neq => Some(CmpOp::Neq),
            AtomOp::Le => Some(CmpOp::Le),
            AtomOp::Ge => Some(CmpOp::Ge),
            AtomOp::Lt => Some(CmpOp::Lt),
            AtomOp::Gt => Some(CmpOp::Gt),
            _ => None,
        }
    }
}

/// Atom operand: a literal, a range, a value set, another variable, or a
/// required FSM state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Value(Value),
    Range { lo: i64, hi: i64 },
    Set(Vec<Value>),
    Var(VarName),
    State(String),
}

/// One conjunct of a constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAtom {
    pub var: VarName,
    pub op: AtomOp,
    pub operand: Operand,
    pub family: Family,
}

impl ConstraintAtom {
    pub fn new(var: impl Into<String>, op: AtomOp, operand: Operand, family: Family) -> Self {
        ConstraintAtom { var: var.into(), op, operand, family }
    }

    pub fn in_range(var: impl Into<String>, lo: i64, hi: i64, family: Family) -> Self {
        ConstraintAtom::new(var, AtomOp::InRange, Operand::Range { lo, hi }, family)
    }

    pub fn in_set(var: impl Into<String>, values: Vec<Value>, family: Family) -> Self {
        ConstraintAtom::new(var, AtomOp::InSet, Operand::Set(values), family)
    }

    pub fn cmp(var: impl Into<String>, op: CmpOp, value: Value, family: Family) -> Self {
        ConstraintAtom::new(var, AtomOp::from_cmp(op), Operand::Value(value), family)
    }

    /// Variables referenced by this atom (its own plus any var operand).
    pub fn vars(&self) -> Vec<&VarName> {
        match &self.operand {
            Operand::Var(v) => vec![&self.var, v],
            _ => vec![&self.var],
        }
    }

    /// Evaluate under a (partial) assignment. `None` if some referenced
    /// variable is unassigned or the atom is not ground-evaluable.
    pub fn eval(&self, assignment: &BTreeMap<VarName, Value>) -> Option<bool> {
        let lhs = assignment.get(&self.var)?;
        match (&self.op, &self.operand) {
            (AtomOp::InRange, Operand::Range { lo, hi }) => {
                Some(lhs.as_int().map(|v| v >= *lo && v <= *hi).unwrap_or(false))
            }
            (AtomOp::InSet, Operand::Set(set)) => Some(set.contains(lhs)),
            (op, Operand::Value(v)) => op.as_cmp().map(|c| c.eval(lhs, v)),
            (op, Operand::Var(other)) => {
                let rhs = assignment.get(other)?;
                op.as_cmp().map(|c| c.eval(lhs, rhs))
            }
            (AtomOp::FsmPrecedes, _) => None,
            _ => Some(false),
        }
    }
}

impl std::fmt::Display for ConstraintAtom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.op {
            AtomOp::Eq => "eq",
            AtomOp::Neq => "neq",
            AtomOp::Le => "le",
            AtomOp::Ge => "ge",
            AtomOp::Lt => "lt",
            AtomOp::Gt => "gt",
            AtomOp::InRange => "in-range",
            AtomOp::InSet => "in-set",
            AtomOp::FsmPrecedes => "fsm-precedes",
        };
        let operand = match &self.operand {
            Operand::Value(v) => v.to_string(),
            Operand::Range { lo, hi } => format!("{lo} {hi}"),
            Operand::Set(vs) => {
                let items: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                format!("{{{}}}", items.join(" "))
            }
            Operand::Var(v) => v.clone(),
            Operand::State(s) => s.clone(),
        };
        write!(f, "({op}:{} {} {operand})", self.family, self.var)
    }
}

/// One excluded conjunction: an assignment matching every condition of a
/// cube is not a model. Cubes arise from guard instructions, policy gates,
/// and deterministic-successor exclusion during path encoding.
pub type BlockedCube = Vec<(VarName, CmpOp, Value)>;

/// A solvable constraint set: conjunction of atoms and domain bounds, minus
/// blocked cubes. Bounds are kept apart from atoms so downstream consumers
/// can tell declared-domain structure from genuine constraints; the solver
/// treats both identically, and relaxation never touches bounds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Encoding {
    pub atoms: Vec<ConstraintAtom>,
    #[serde(default)]
    pub bounds: Vec<ConstraintAtom>,
    #[serde(default)]
    pub blocked: Vec<BlockedCube>,
    /// Set when encoding discovered a constant-false condition; the set is
    /// unsatisfiable regardless of assignments.
    #[serde(default)]
    pub infeasible: bool,
}

impl Encoding {
    pub fn from_atoms(atoms: Vec<ConstraintAtom>) -> Self {
        Encoding { atoms, bounds: Vec::new(), blocked: Vec::new(), infeasible: false }
    }

    /// Atoms plus domain bounds, in that order.
    pub fn all_atoms(&self) -> impl Iterator<Item = &ConstraintAtom> {
        self.atoms.iter().chain(self.bounds.iter())
    }

    pub fn families_present(&self) -> BTreeSet<Family> {
        self.atoms.iter().map(|a| a.family).collect()
    }

    pub fn without_family(&self, family: Family) -> Encoding {
        Encoding {
            atoms: self.atoms.iter().filter(|a| a.family != family).cloned().collect(),
            bounds: self.bounds.clone(),
            blocked: self.blocked.clone(),
            infeasible: self.infeasible,
        }
    }

    /// Debug dump in an s-expression-like text form.
    pub fn dump(&self) -> String {
        let mut parts: Vec<String> = self.all_atoms().map(|a| a.to_string()).collect();
        for cube in &self.blocked {
            let conds: Vec<String> = cube
                .iter()
                .map(|(v, op, val)| format!("({} {} {})", format!("{op:?}").to_lowercase(), v, val))
                .collect();
            parts.push(format!("(not (and {}))", conds.join(" ")));
        }
        if self.infeasible {
            parts.push("(const false)".to_string());
        }
        format!("(and {})", parts.join(" "))
    }
}

/// Solver outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Sat(BTreeMap<VarName, Value>),
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveVerdict {
    pub status: SolveStatus,
    pub units_spent: u64,
}

impl SolveVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self.status, SolveStatus::Sat(_))
    }

    pub fn model(&self) -> Option<&BTreeMap<VarName, Value>> {
        match &self.status {
            SolveStatus::Sat(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("variable {0} has no set-defining atom; domain undeclared or infinite")]
    UndeclaredDomain(VarName),
    #[error("fsm-precedes atom on {0} must be lowered before solving")]
    UnloweredFsmAtom(VarName),
    #[error("sat model failed self-evaluation on atom {0}")]
    WitnessSelfCheck(String),
    #[error("projection requires at least one observable variable")]
    DegenerateProjection,
    #[error("projection inconclusive: extension solve exhausted internal budget")]
    ProjectionInconclusive,
    #[error("nothing to relax: only path-family atoms present")]
    NothingToRelax,
}

/// Per-variable enumeration list derivation: intersection of set-defining
/// atoms, pre-filtered by the remaining unary literal atoms.
fn candidate_values(var: &VarName, enc: &Encoding) -> Result<Vec<Value>, SolveError> {
    let mut base: Option<Vec<Value>> = None;

    let mut intersect = |values: Vec<Value>, base: &mut Option<Vec<Value>>| {
        *base = Some(match base.take() {
            None => values,
            Some(prev) => prev.into_iter().filter(|v| values.contains(v)).collect(),
        });
    };

    for atom in enc.all_atoms().filter(|a| a.var == *var) {
        match (&atom.op, &atom.operand) {
            (AtomOp::FsmPrecedes, _) => return Err(SolveError::UnloweredFsmAtom(var.clone())),
            (AtomOp::InRange, Operand::Range { lo, hi }) => {
                intersect((*lo..=*hi).map(Value::Int).collect(), &mut base)
            }
            (AtomOp::InSet, Operand::Set(set)) => {
                let mut s = set.clone();
                s.sort();
                s.dedup();
                intersect(s, &mut base)
            }
            (AtomOp::Eq, Operand::Value(v)) => intersect(vec![v.clone()], &mut base),
            _ => {}
        }
    }

    let mut values = base.ok_or_else(|| SolveError::UndeclaredDomain(var.clone()))?;

    // Forward pruning by the remaining unary literal atoms.
    for atom in enc.all_atoms().filter(|a| a.var == *var) {
        if let (Some(cmp), Operand::Value(rhs)) = (atom.op.as_cmp(), &atom.operand) {
            values.retain(|v| cmp.eval(v, rhs));
        }
    }
    values.sort();
    Ok(values)
}

fn cube_matches(cube: &BlockedCube, assignment: &BTreeMap<VarName, Value>) -> Option<bool> {
    let mut all = true;
    for (var, op, val) in cube {
        match assignment.get(var) {
            None => return None,
            Some(v) => {
                if !op.eval(v, val) {
                    all = false;
                }
            }
        }
    }
    Some(all)
}

/// All variables referenced anywhere in the encoding, sorted.
fn encoding_vars(enc: &Encoding) -> Vec<VarName> {
    let mut vars: BTreeSet<VarName> = BTreeSet::new();
    for a in enc.all_atoms() {
        for v in a.vars() {
            vars.insert(v.clone());
        }
    }
    for cube in &enc.blocked {
        for (v, _, _) in cube {
            vars.insert(v.clone());
        }
    }
    vars.into_iter().collect()
}

/// Decide satisfiability of a plain atom conjunction.
pub fn solve(
    atoms: &[ConstraintAtom],
    budget_units: u64,
    seed: u64,
) -> Result<SolveVerdict, SolveError> {
    solve_encoding(&Encoding::from_atoms(atoms.to_vec()), budget_units, seed)
}

/// Decide satisfiability of a full encoding (atoms minus blocked cubes).
pub fn solve_encoding(
    enc: &Encoding,
    budget_units: u64,
    seed: u64,
) -> Result<SolveVerdict, SolveError> {
    if enc.infeasible {
        return Ok(SolveVerdict { status: SolveStatus::Unsat, units_spent: 0 });
    }

    let mut vars = encoding_vars(enc);
    // Empty constraint set over no variables is vacuously satisfiable.
    if vars.is_empty() {
        return Ok(SolveVerdict { status: SolveStatus::Sat(BTreeMap::new()), units_spent: 0 });
    }

    let mut domains: BTreeMap<VarName, Vec<Value>> = BTreeMap::new();
    for v in &vars {
        let values = candidate_values(v, enc)?;
        if values.is_empty() {
            return Ok(SolveVerdict { status: SolveStatus::Unsat, units_spent: 0 });
        }
        domains.insert(v.clone(), values);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vars.shuffle(&mut rng);

    // Index: variable -> atoms/cubes becoming fully assigned at its depth.
    let depth_of: BTreeMap<&VarName, usize> =
        vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let atom_depth = |a: &ConstraintAtom| -> usize {
        a.vars().iter().map(|v| depth_of[v]).max().unwrap()
    };
    let mut atoms_at: Vec<Vec<&ConstraintAtom>> = vec![Vec::new(); vars.len()];
    for a in enc.all_atoms() {
        atoms_at[atom_depth(a)].push(a);
    }
    let mut cubes_at: Vec<Vec<&BlockedCube>> = vec![Vec::new(); vars.len()];
    for cube in &enc.blocked {
        if cube.is_empty() {
            // An empty cube excludes everything.
            return Ok(SolveVerdict { status: SolveStatus::Unsat, units_spent: 0 });
        }
        let d = cube.iter().map(|(v, _, _)| depth_of[v]).max().unwrap();
        cubes_at[d].push(cube);
    }

    let mut assignment: BTreeMap<VarName, Value> = BTreeMap::new();
    let mut units: u64 = 0;
    // Iterative DFS: indices[i] is the next value index to try at depth i.
    let mut indices: Vec<usize> = vec![0; vars.len()];
    let mut depth = 0usize;

    loop {
        let var = &vars[depth];
        let values = &domains[var];
        let idx = indices[depth];
        if idx >= values.len() {
            // Exhausted this depth; backtrack.
            assignment.remove(var);
            if depth == 0 {
                return Ok(SolveVerdict { status: SolveStatus::Unsat, units_spent: units });
            }
            indices[depth] = 0;
            depth -= 1;
            indices[depth] += 1;
            let prev = &vars[depth];
            assignment.remove(prev);
            continue;
        }

        if units >= budget_units {
            return Ok(SolveVerdict { status: SolveStatus::Unknown, units_spent: units });
        }
        units += 1;

        assignment.insert(var.clone(), values[idx].clone());

        let consistent = atoms_at[depth].iter().all(|a| a.eval(&assignment) == Some(true))
            && cubes_at[depth].iter().all(|c| cube_matches(c, &assignment) != Some(true));

        if !consistent {
            indices[depth] += 1;
            assignment.remove(var);
            continue;
        }

        if depth + 1 == vars.len() {
            // Witness validity: re-evaluate the complete model.
            for a in enc.all_atoms() {
                if a.eval(&assignment) != Some(true) {
                    return Err(SolveError::WitnessSelfCheck(a.to_string()));
                }
            }
            return Ok(SolveVerdict { status: SolveStatus::Sat(assignment), units_spent: units });
        }
        depth += 1;
    }
}

/// Existential projection of a constraint set onto observable variables.
///
/// Enumerates observable assignments over the given domain table
/// (intersected with any set-defining atoms) and keeps exactly those that
/// extend to a full model. The result is a DNF with one equality cube per
/// satisfying observable assignment.
pub fn project_observables(
    enc: &Encoding,
    obs: &BTreeSet<VarName>,
    domains: &BTreeMap<VarName, crate::artifact::Domain>,
    seed: u64,
) -> Result<crate::artifact::GuardPredicate, SolveError> {
    const EXTENSION_BUDGET: u64 = 200_000;

    if obs.is_empty() {
        return Err(SolveError::DegenerateProjection);
    }

    let mut obs_values: Vec<(VarName, Vec<Value>)> = Vec::new();
    for var in obs {
        let declared = domains
            .get(var)
            .map(|d| d.values())
            .ok_or_else(|| SolveError::UndeclaredDomain(var.clone()))?;
        // Tighten by the encoding's own unary view of the variable if present.
        let narrowed = match candidate_values(var, enc) {
            Ok(vals) => declared.into_iter().filter(|v| vals.contains(v)).collect(),
            Err(SolveError::UndeclaredDomain(_)) => declared,
            Err(e) => return Err(e),
        };
        obs_values.push((var.clone(), narrowed));
    }

    let mut cubes: Vec<Vec<crate::artifact::Cond>> = Vec::new();
    let mut stack: Vec<(usize, Vec<(VarName, Value)>)> = vec![(0, Vec::new())];
    while let Some((i, partial)) = stack.pop() {
        if i == obs_values.len() {
            let mut pinned = enc.clone();
            for (var, val) in &partial {
                pinned.atoms.push(ConstraintAtom::cmp(
                    var.clone(),
                    CmpOp::Eq,
                    val.clone(),
                    Family::Path,
                ));
            }
            let verdict = solve_encoding(&pinned, EXTENSION_BUDGET, seed)?;
            match verdict.status {
                SolveStatus::Sat(_) => {
                    let cube = partial
                        .iter()
                        .map(|(var, val)| crate::artifact::Cond::new(var.clone(), CmpOp::Eq, val.clone()))
                        .collect();
                    cubes.push(cube);
                }
                SolveStatus::Unsat => {}
                SolveStatus::Unknown => return Err(SolveError::ProjectionInconclusive),
            }
            continue;
        }
        let (var, values) = &obs_values[i];
        // Reverse push keeps ascending exploration order.
        for val in values.iter().rev() {
            let mut next = partial.clone();
            next.push((var.clone(), val.clone()));
            stack.push((i + 1, next));
        }
    }

    Ok(crate::artifact::GuardPredicate { cubes })
}

/// Remove all atoms of the weakest-evidence operational family.
///
/// The family is chosen as the minimal evidence score among non-path
/// families present in the encoding; ties break in the fixed order
/// env < io < proto < runtime < component < time.
pub fn relax(
    enc: &Encoding,
    evidence: &BTreeMap<Family, f64>,
) -> Result<(Encoding, Family), SolveError> {
    let present: Vec<Family> = Family::OPERATIONAL
        .iter()
        .copied()
        .filter(|f| enc.atoms.iter().any(|a| a.family == *f))
        .collect();
    if present.is_empty() {
        return Err(SolveError::NothingToRelax);
    }
    let chosen = present
        .iter()
        .copied()
        .min_by(|a, b| {
            let ea = evidence.get(a).copied().unwrap_or(0.0);
            let eb = evidence.get(b).copied().unwrap_or(0.0);
            ea.partial_cmp(&eb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    Ok((enc.without_family(chosen), chosen))
}

/// Families whose removal flips an unsatisfiable encoding to satisfiable.
/// Used to name the refuting families of an `Unsat` verdict; probes that
/// come back `Unknown` are not attributed.
pub fn attribute_refuting_families(
    enc: &Encoding,
    budget_units: u64,
    seed: u64,
) -> Result<Vec<Family>, SolveError> {
    let mut out = Vec::new();
    for family in Family::OPERATIONAL {
        if !enc.atoms.iter().any(|a| a.family == family) {
            continue;
        }
        let probe = enc.without_family(family);
        if solve_encoding(&probe, budget_units, seed)?.is_sat() {
            out.push(family);
        }
    }
    Ok(out)
}
