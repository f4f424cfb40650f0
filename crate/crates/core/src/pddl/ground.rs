use std::fmt;

use smallvec::SmallVec;

use super::domain::{AssignOp, Condition, Effect, NumExpr, ObjectId, Term};
use super::error::PddlError;
use super::problem::{condition_is_static, GoalSpec, ProblemDef};
use super::state::{AtomId, State};

pub type Args = SmallVec<[ObjectId; 4]>;

const NOOP: u32 = u32::MAX;

/// An operator instantiated with concrete objects, or the no-op.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAction {
    schema: u32,
    args: Args,
}

impl GroundAction {
    pub fn new(schema: usize, args: impl IntoIterator<Item = ObjectId>) -> Self {
        GroundAction { schema: schema as u32, args: args.into_iter().collect() }
    }

    pub fn noop() -> Self {
        GroundAction { schema: NOOP, args: Args::new() }
    }

    pub fn is_noop(&self) -> bool {
        self.schema == NOOP
    }

    /// Operator index, `None` for the no-op.
    pub fn schema(&self) -> Option<usize> {
        (!self.is_noop()).then_some(self.schema as usize)
    }

    pub fn args(&self) -> &[ObjectId] {
        &self.args
    }

    /// Printable form bound to a problem, e.g. `(stack a b)`.
    pub fn display<'a>(&'a self, problem: &'a ProblemDef) -> ActionDisplay<'a> {
        ActionDisplay { action: self, problem }
    }
}

pub struct ActionDisplay<'a> {
    action: &'a GroundAction,
    problem: &'a ProblemDef,
}

impl fmt::Display for ActionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.action.schema() {
            None => write!(f, "(noop)"),
            Some(op) => {
                write!(f, "({}", self.problem.domain.operators[op].name)?;
                for &a in self.action.args() {
                    write!(f, " {}", self.problem.object_name(a))?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Ground atoms and fluent updates of an action, for inspection.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundEffects {
    pub add: Vec<AtomId>,
    pub delete: Vec<AtomId>,
    pub updates: Vec<(usize, AssignOp, i64)>,
}

/// Positive-precondition / add-list pairs used by the delete relaxation.
#[derive(Debug, Default)]
pub struct RelaxedTable {
    pub actions: Vec<RelaxedAction>,
}

#[derive(Debug, Clone)]
pub struct RelaxedAction {
    pub pre: Vec<AtomId>,
    pub add: Vec<AtomId>,
}

#[inline]
fn resolve(t: &Term, binding: &[ObjectId]) -> ObjectId {
    match *t {
        Term::Var(i) => binding[i],
        Term::Obj(o) => o,
    }
}

impl ProblemDef {
    fn ground_atom(&self, pred: usize, args: &[Term], binding: &[ObjectId]) -> Option<AtomId> {
        self.atom_id(pred, args.iter().map(|t| resolve(t, binding)))
    }

    pub(crate) fn eval(&self, e: &NumExpr, s: &State, binding: &[ObjectId]) -> Option<i64> {
        Some(match e {
            NumExpr::Const(c) => *c,
            NumExpr::Fluent { func, args } => {
                s.fluent(self.fluent_id(*func, args.iter().map(|t| resolve(t, binding)))?)
            }
            NumExpr::Add(a, b) => self.eval(a, s, binding)?.checked_add(self.eval(b, s, binding)?)?,
            NumExpr::Sub(a, b) => self.eval(a, s, binding)?.checked_sub(self.eval(b, s, binding)?)?,
            NumExpr::Mul(a, b) => self.eval(a, s, binding)?.checked_mul(self.eval(b, s, binding)?)?,
            NumExpr::Neg(a) => self.eval(a, s, binding)?.checked_neg()?,
        })
    }

    pub(crate) fn holds(&self, c: &Condition, s: &State, binding: &[ObjectId]) -> bool {
        match c {
            Condition::Atom { pred, args, positive } => {
                let truth = self.ground_atom(*pred, args, binding).is_some_and(|a| s.holds(a));
                truth == *positive
            }
            Condition::Equal { lhs, rhs, positive } => (resolve(lhs, binding) == resolve(rhs, binding)) == *positive,
            Condition::Compare { op, lhs, rhs } => match (self.eval(lhs, s, binding), self.eval(rhs, s, binding)) {
                (Some(a), Some(b)) => op.holds(a, b),
                _ => false,
            },
        }
    }

    /// Render a (possibly lifted) condition under a binding.
    pub(crate) fn condition_text(&self, c: &Condition, binding: &[ObjectId]) -> String {
        let term = |t: &Term| self.object_name(resolve(t, binding)).to_string();
        fn expr(p: &ProblemDef, e: &NumExpr, b: &[ObjectId]) -> String {
            match e {
                NumExpr::Const(c) => c.to_string(),
                NumExpr::Fluent { func, args } => {
                    let mut s = format!("({}", p.domain.functions[*func].name);
                    for a in args {
                        s.push(' ');
                        s.push_str(p.object_name(resolve(a, b)));
                    }
                    s + ")"
                }
                NumExpr::Add(x, y) => format!("(+ {} {})", expr(p, x, b), expr(p, y, b)),
                NumExpr::Sub(x, y) => format!("(- {} {})", expr(p, x, b), expr(p, y, b)),
                NumExpr::Mul(x, y) => format!("(* {} {})", expr(p, x, b), expr(p, y, b)),
                NumExpr::Neg(x) => format!("(- {})", expr(p, x, b)),
            }
        }
        let (body, positive) = match c {
            Condition::Atom { pred, args, positive } => {
                let mut s = format!("({}", self.domain.predicates[*pred].name);
                for a in args {
                    s.push(' ');
                    s.push_str(&term(a));
                }
                (s + ")", *positive)
            }
            Condition::Equal { lhs, rhs, positive } => (format!("(= {} {})", term(lhs), term(rhs)), *positive),
            Condition::Compare { op, lhs, rhs } => {
                let body = format!("({} {} {})", op.symbol(), expr(self, lhs, binding), expr(self, rhs, binding));
                (body, *op != super::domain::CmpOp::Ne)
            }
        };
        if positive {
            body
        } else {
            format!("(not {body})")
        }
    }

    fn ground_rec(
        &self,
        op: usize,
        plan: &[Vec<usize>],
        state: &State,
        binding: &mut Args,
        out: &mut dyn FnMut(&[ObjectId]),
    ) {
        let schema = &self.domain.operators[op];
        let depth = binding.len();
        if depth == schema.params.len() {
            out(binding);
            return;
        }
        for &obj in &self.typed_objects[schema.params[depth].ty] {
            binding.push(obj);
            if plan[depth + 1].iter().all(|&c| self.holds(&schema.precondition[c], state, binding)) {
                self.ground_rec(op, plan, state, binding, out);
            }
            binding.pop();
        }
    }

    fn for_each_grounding(&self, op: usize, plan: &[Vec<usize>], state: &State, out: &mut dyn FnMut(&[ObjectId])) {
        let schema = &self.domain.operators[op];
        if plan[0].iter().all(|&c| self.holds(&schema.precondition[c], state, &[])) {
            self.ground_rec(op, plan, state, &mut Args::new(), out);
        }
    }

    /// Ground actions applicable in `s`, ordered by operator name then
    /// argument names.
    pub fn available_actions(&self, s: &State) -> Vec<GroundAction> {
        let mut out = Vec::new();
        for &op in &self.operator_order {
            self.for_each_grounding(op, &self.check_plan[op], s, &mut |args| {
                out.push(GroundAction::new(op, args.iter().copied()))
            });
        }
        out
    }

    /// First precondition of `a` that fails in `s`, rendered.
    pub fn failing_precondition(&self, s: &State, a: &GroundAction) -> Option<String> {
        let op = a.schema()?;
        let schema = &self.domain.operators[op];
        if a.args().len() != schema.params.len() {
            return Some(format!("arity of {}", schema.name));
        }
        for (i, p) in schema.params.iter().enumerate() {
            if !self.domain.is_subtype(self.objects[a.args()[i] as usize].1, p.ty) {
                return Some(format!("type of {} in {}", p.name, schema.name));
            }
        }
        schema.precondition.iter().find(|c| !self.holds(c, s, a.args())).map(|c| self.condition_text(c, a.args()))
    }

    pub fn is_applicable(&self, s: &State, a: &GroundAction) -> bool {
        self.failing_precondition(s, a).is_none()
    }

    /// Successor of `s` under `a`; `s` is not modified.
    pub fn apply(&self, s: &State, a: &GroundAction) -> Result<State, PddlError> {
        if let Some(literal) = self.failing_precondition(s, a) {
            return Err(PddlError::PreconditionViolated { literal });
        }
        Ok(self.apply_unchecked(s, a))
    }

    /// Successor without re-checking preconditions; used on actions produced
    /// by [`available_actions`](Self::available_actions).
    pub fn apply_unchecked(&self, s: &State, a: &GroundAction) -> State {
        let Some(op) = a.schema() else {
            return s.clone();
        };
        let eff = self.ground_effects_in(s, op, a.args());
        let mut next = s.clone();
        for (f, _, v) in &eff.updates {
            next.set_fluent(*f, *v);
        }
        for &d in &eff.delete {
            next.set_atom(d, false);
        }
        for &ad in &eff.add {
            next.set_atom(ad, true);
        }
        next
    }

    /// Ground effects of `a` evaluated in `s`; fluent updates carry the
    /// resulting value.
    pub fn ground_effects(&self, s: &State, a: &GroundAction) -> GroundEffects {
        match a.schema() {
            None => GroundEffects::default(),
            Some(op) => self.ground_effects_in(s, op, a.args()),
        }
    }

    fn ground_effects_in(&self, s: &State, op: usize, binding: &[ObjectId]) -> GroundEffects {
        let mut out = GroundEffects::default();
        for e in &self.domain.operators[op].effects {
            match e {
                Effect::Add { pred, args } => {
                    out.add.extend(self.ground_atom(*pred, args, binding));
                }
                Effect::Delete { pred, args } => {
                    out.delete.extend(self.ground_atom(*pred, args, binding));
                }
                Effect::Update { func, args, op, value } => {
                    let Some(fid) = self.fluent_id(*func, args.iter().map(|t| resolve(t, binding))) else {
                        continue;
                    };
                    let Some(v) = self.eval(value, s, binding) else { continue };
                    let cur = s.fluent(fid);
                    let new = match op {
                        AssignOp::Assign => v,
                        AssignOp::Increase => cur.saturating_add(v),
                        AssignOp::Decrease => cur.saturating_sub(v),
                    };
                    out.updates.push((fid, *op, new));
                }
            }
        }
        out
    }

    /// True iff every conjunct of `g` holds in `s`.
    pub fn satisfies(&self, s: &State, g: &GoalSpec) -> bool {
        g.conditions.iter().all(|c| self.holds(c, s, &[]))
    }

    /// Number of conjuncts of `g` that do not hold in `s`.
    pub fn unsatisfied_count(&self, s: &State, g: &GoalSpec) -> usize {
        g.conditions.iter().filter(|c| !self.holds(c, s, &[])).count()
    }

    /// Ground positive atoms of a goal, static ones included.
    pub fn goal_atoms(&self, g: &GoalSpec) -> Vec<AtomId> {
        g.conditions
            .iter()
            .filter_map(|c| match c {
                Condition::Atom { pred, args, positive: true } => self.ground_atom(*pred, args, &[]),
                _ => None,
            })
            .collect()
    }

    /// Groundings whose static preconditions hold initially, reduced to
    /// their dynamic positive preconditions and add effects.
    pub fn relaxed_table(&self) -> &RelaxedTable {
        self.relaxed.get_or_init(|| {
            let mut actions = Vec::new();
            for &op in &self.operator_order {
                let schema = &self.domain.operators[op];
                self.for_each_grounding(op, &self.static_check_plan[op], &self.init, &mut |args| {
                    let pre = schema
                        .precondition
                        .iter()
                        .filter(|c| !condition_is_static(c, &self.static_preds, &self.static_funcs))
                        .filter_map(|c| match c {
                            Condition::Atom { pred, args: t, positive: true } => self.ground_atom(*pred, t, args),
                            _ => None,
                        })
                        .collect();
                    let add = schema
                        .effects
                        .iter()
                        .filter_map(|e| match e {
                            Effect::Add { pred, args: t } => self.ground_atom(*pred, t, args),
                            _ => None,
                        })
                        .collect();
                    actions.push(RelaxedAction { pre, add });
                });
            }
            RelaxedTable { actions }
        })
    }

    /// Parse a printed action such as `(stack a b)` or `(noop)`.
    pub fn parse_action(&self, text: &str) -> Option<GroundAction> {
        let (head, args) = self.parse_ground_ref(text)?;
        if head == "noop" && args.is_empty() {
            return Some(GroundAction::noop());
        }
        let op = self.domain.operator_id(&head)?;
        (args.len() == self.domain.operators[op].params.len()).then(|| GroundAction::new(op, args))
    }
}
