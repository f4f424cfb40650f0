use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use super::domain::{parse_conjunction, parse_typed_list, Condition, DomainDef, ObjectId, Scope, Term, TypeId};
use super::error::PddlError;
use super::ground::RelaxedTable;
use super::sexpr::{self, SExpr};
use super::state::{AtomId, FluentId, State};

/// A conjunctive goal over ground literals and integer comparisons.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoalSpec {
    pub label: String,
    pub conditions: Vec<Condition>,
}

/// Mixed-radix layout of one predicate's (or fluent's) groundings inside the
/// flat vocabulary.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub offset: usize,
    pub param_types: Vec<TypeId>,
    /// Stride of each argument position.
    pub strides: Vec<usize>,
    pub count: usize,
}

/// A parsed problem bound to its domain, with the ground vocabulary laid out.
///
/// Immutable after construction; the relaxed action table used by `h_add` is
/// computed on first use.
#[derive(Debug)]
pub struct ProblemDef {
    pub name: String,
    pub domain: Arc<DomainDef>,
    /// Domain constants first, then declared objects.
    pub objects: Vec<(String, TypeId)>,
    pub init: State,
    pub goals: Vec<GoalSpec>,

    pub(crate) object_index: HashMap<String, ObjectId>,
    /// Objects of each type (including subtypes), sorted by name.
    pub(crate) typed_objects: Vec<Vec<ObjectId>>,
    /// `object_rank[ty][obj]` is the position of `obj` in `typed_objects[ty]`.
    pub(crate) object_rank: Vec<Vec<u32>>,
    pub(crate) atom_layout: Vec<Layout>,
    pub(crate) fluent_layout: Vec<Layout>,
    pub(crate) num_atoms: usize,
    pub(crate) num_fluents: usize,
    pub(crate) static_preds: Vec<bool>,
    pub(crate) static_funcs: Vec<bool>,
    /// Operator ids in lexicographic name order.
    pub(crate) operator_order: Vec<usize>,
    /// `check_plan[op][d]`: precondition indices decidable once `d` params are bound.
    pub(crate) check_plan: Vec<Vec<Vec<usize>>>,
    /// Same, restricted to preconditions over static vocabulary.
    pub(crate) static_check_plan: Vec<Vec<Vec<usize>>>,
    pub(crate) relaxed: OnceLock<RelaxedTable>,
}

const NOT_OF_TYPE: u32 = u32::MAX;

impl PartialEq for ProblemDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.domain.name == other.domain.name
            && self.objects == other.objects
            && self.init == other.init
            && self.goals == other.goals
    }
}

impl ProblemDef {
    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn num_fluents(&self) -> usize {
        self.num_fluents
    }

    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.object_index.get(name).copied()
    }

    pub fn object_name(&self, id: ObjectId) -> &str {
        &self.objects[id as usize].0
    }

    /// All objects of `ty` (subtypes included), sorted by name.
    pub fn objects_of_type(&self, ty: TypeId) -> &[ObjectId] {
        &self.typed_objects[ty]
    }

    pub fn goal_index(&self, label: &str) -> Option<usize> {
        self.goals.iter().position(|g| g.label == label)
    }

    pub fn goal_labels(&self) -> Vec<String> {
        self.goals.iter().map(|g| g.label.clone()).collect()
    }

    pub fn is_static_atom(&self, atom: AtomId) -> bool {
        self.static_preds[self.atom_predicate(atom)]
    }

    pub fn is_static_fluent(&self, fluent: FluentId) -> bool {
        self.static_funcs[self.fluent_function(fluent)]
    }

    fn layout_id(&self, layout: &Layout, args: impl IntoIterator<Item = ObjectId>) -> Option<usize> {
        let mut id = layout.offset;
        let mut n = 0;
        for (i, obj) in args.into_iter().enumerate() {
            let rank = *self.object_rank[*layout.param_types.get(i)?].get(obj as usize)?;
            if rank == NOT_OF_TYPE {
                return None;
            }
            id += rank as usize * layout.strides[i];
            n += 1;
        }
        (n == layout.param_types.len()).then_some(id)
    }

    pub fn atom_id(&self, pred: usize, args: impl IntoIterator<Item = ObjectId>) -> Option<AtomId> {
        self.layout_id(&self.atom_layout[pred], args)
    }

    pub fn fluent_id(&self, func: usize, args: impl IntoIterator<Item = ObjectId>) -> Option<FluentId> {
        self.layout_id(&self.fluent_layout[func], args)
    }

    fn decode(&self, layouts: &[Layout], id: usize) -> (usize, Vec<ObjectId>) {
        let idx = layouts.partition_point(|l| l.offset + l.count <= id);
        let layout = &layouts[idx];
        let mut rem = id - layout.offset;
        let args = layout
            .param_types
            .iter()
            .zip(&layout.strides)
            .map(|(&ty, &stride)| {
                let r = rem / stride;
                rem %= stride;
                self.typed_objects[ty][r]
            })
            .collect();
        (idx, args)
    }

    pub fn atom_predicate(&self, atom: AtomId) -> usize {
        self.atom_layout.partition_point(|l| l.offset + l.count <= atom)
    }

    pub fn fluent_function(&self, fluent: FluentId) -> usize {
        self.fluent_layout.partition_point(|l| l.offset + l.count <= fluent)
    }

    /// Predicate and arguments of a ground atom.
    pub fn decode_atom(&self, atom: AtomId) -> (usize, Vec<ObjectId>) {
        self.decode(&self.atom_layout, atom)
    }

    pub fn decode_fluent(&self, fluent: FluentId) -> (usize, Vec<ObjectId>) {
        self.decode(&self.fluent_layout, fluent)
    }

    fn render(&self, name: &str, args: &[ObjectId]) -> String {
        let mut s = format!("({name}");
        for &a in args {
            s.push(' ');
            s.push_str(self.object_name(a));
        }
        s.push(')');
        s
    }

    pub fn atom_name(&self, atom: AtomId) -> String {
        let (pred, args) = self.decode_atom(atom);
        self.render(&self.domain.predicates[pred].name, &args)
    }

    pub fn fluent_name(&self, fluent: FluentId) -> String {
        let (func, args) = self.decode_fluent(fluent);
        self.render(&self.domain.functions[func].name, &args)
    }

    /// Look up an atom by its printed form, e.g. `(on a b)`.
    pub fn atom_by_name(&self, text: &str) -> Option<AtomId> {
        let (head, args) = self.parse_ground_ref(text)?;
        self.atom_id(self.domain.predicate_id(&head)?, args)
    }

    pub fn fluent_by_name(&self, text: &str) -> Option<FluentId> {
        let (head, args) = self.parse_ground_ref(text)?;
        self.fluent_id(self.domain.function_id(&head)?, args)
    }

    pub(crate) fn parse_ground_ref(&self, text: &str) -> Option<(String, Vec<ObjectId>)> {
        let e = sexpr::parse_one(text).ok()?;
        let list = e.as_list()?;
        let head = list.first()?.as_symbol()?.to_string();
        let args = list[1..].iter().map(|a| self.object_id(a.as_symbol()?)).collect::<Option<Vec<_>>>()?;
        Some((head, args))
    }

    /// A blank state over this problem's vocabulary.
    pub fn empty_state(&self) -> State {
        State::new(self.num_atoms, self.num_fluents)
    }

    /// Sorted printed facts and named fluent values of a state.
    pub fn describe_state(&self, s: &State) -> (Vec<String>, Vec<(String, i64)>) {
        let mut facts: Vec<String> = s.true_atoms().map(|a| self.atom_name(a)).collect();
        facts.sort();
        let mut fluents: Vec<(String, i64)> =
            (0..self.num_fluents).map(|f| (self.fluent_name(f), s.fluent(f))).collect();
        fluents.sort();
        (facts, fluents)
    }

    /// Rebuild a state from printed facts and fluent values.
    pub fn state_from_description<'a>(
        &self,
        facts: impl IntoIterator<Item = &'a str>,
        fluents: impl IntoIterator<Item = (&'a str, i64)>,
    ) -> Result<State, String> {
        let mut s = self.empty_state();
        for f in facts {
            let id = self.atom_by_name(f).ok_or_else(|| format!("unknown atom {f}"))?;
            s.set_atom(id, true);
        }
        for (name, v) in fluents {
            let id = self.fluent_by_name(name).ok_or_else(|| format!("unknown fluent {name}"))?;
            s.set_fluent(id, v);
        }
        Ok(s)
    }
}

/// Parse a problem description against `dom`.
///
/// Besides the standard `(:goal F)`, a candidate goal set may be given as
/// `(:goals (label F) ...)`.
pub fn parse_problem(text: &str, dom: Arc<DomainDef>) -> Result<ProblemDef, PddlError> {
    let top = sexpr::parse_one(text)?;
    let items = top.expect_list("(define ...)")?;
    if items.first().and_then(SExpr::as_symbol) != Some("define") {
        return Err(PddlError::syntax(top.pos(), "expected `(define (problem <name>) ...)`"));
    }
    let header = items.get(1).ok_or_else(|| PddlError::syntax(top.pos(), "missing problem header"))?;
    let name = match header.as_list() {
        Some([kw, name]) if kw.as_symbol() == Some("problem") => name.expect_symbol("problem name")?.to_string(),
        _ => return Err(PddlError::syntax(header.pos(), "expected `(problem <name>)`")),
    };

    let mut objects: Vec<(String, TypeId)> = dom.constants.clone();
    let mut object_index: HashMap<String, ObjectId> =
        objects.iter().enumerate().map(|(i, (n, _))| (n.clone(), i as ObjectId)).collect();
    let mut init_expr = None;
    let mut goal_exprs: Vec<(String, &SExpr)> = Vec::new();

    for sec in &items[2..] {
        let list = sec.expect_list("problem section")?;
        let head = sec.head().ok_or_else(|| PddlError::syntax(sec.pos(), "expected section keyword"))?;
        match head {
            ":domain" => {
                let d = list
                    .get(1)
                    .ok_or_else(|| PddlError::syntax(sec.pos(), "missing domain name"))?
                    .expect_symbol("domain name")?;
                if d != dom.name {
                    return Err(PddlError::semantic(list[1].pos(), "problem is for a different domain", d));
                }
            }
            ":requirements" => {}
            ":objects" => {
                for (oname, ty, pos) in parse_typed_list(&list[1..])? {
                    let ty_name = ty.as_deref().unwrap_or("object");
                    let ty =
                        dom.type_id(ty_name).ok_or_else(|| PddlError::semantic(pos, "undeclared type", ty_name))?;
                    if object_index.contains_key(&oname) {
                        return Err(PddlError::semantic(pos, "duplicate object", oname));
                    }
                    object_index.insert(oname.clone(), objects.len() as ObjectId);
                    objects.push((oname, ty));
                }
            }
            ":init" => init_expr = Some(&list[1..]),
            ":goal" => {
                let f = list.get(1).ok_or_else(|| PddlError::syntax(sec.pos(), "missing goal formula"))?;
                goal_exprs.push(("goal".to_string(), f));
            }
            ":goals" => {
                for g in &list[1..] {
                    match g.as_list() {
                        Some([label, f]) => goal_exprs.push((label.expect_symbol("goal label")?.to_string(), f)),
                        _ => return Err(PddlError::syntax(g.pos(), "expected `(<label> <formula>)`")),
                    }
                }
            }
            other => return Err(PddlError::semantic(sec.pos(), "unknown problem section", other)),
        }
    }

    let mut p = build_tables(name, dom, objects, object_index);

    let objs_with_types: HashMap<String, (ObjectId, TypeId)> =
        p.object_index.iter().map(|(n, &id)| (n.clone(), (id, p.objects[id as usize].1))).collect();
    let scope = Scope { dom: &p.domain, params: &[], objects: Some(&objs_with_types) };

    let mut init = p.empty_state();
    for fact in init_expr.unwrap_or(&[]) {
        let list = fact.expect_list("initial fact")?;
        match fact.head() {
            Some("=") if list.len() == 3 => {
                let conds = parse_conjunction(&scope, fact)?;
                let value = list[2]
                    .as_symbol()
                    .and_then(|s| s.parse::<i64>().ok())
                    .ok_or_else(|| PddlError::syntax(list[2].pos(), "expected integer value"))?;
                let fid = match conds.as_slice() {
                    [Condition::Compare { lhs: super::domain::NumExpr::Fluent { func, args }, .. }] => {
                        p.fluent_id(*func, args.iter().map(ground_term))
                    }
                    _ => None,
                }
                .ok_or_else(|| PddlError::syntax(fact.pos(), "expected `(= (<fluent> ...) <int>)`"))?;
                init.set_fluent(fid, value);
            }
            Some("not") => return Err(PddlError::semantic(fact.pos(), "negative literal in initial state", "not")),
            _ => {
                let conds = parse_conjunction(&scope, fact)?;
                match conds.as_slice() {
                    [Condition::Atom { pred, args, positive: true }] => {
                        let id = p
                            .atom_id(*pred, args.iter().map(ground_term))
                            .ok_or_else(|| PddlError::semantic(fact.pos(), "ill-typed initial fact", ""))?;
                        init.set_atom(id, true);
                    }
                    _ => return Err(PddlError::syntax(fact.pos(), "expected a ground atom")),
                }
            }
        }
    }
    p.init = init;

    if goal_exprs.is_empty() {
        return Err(PddlError::syntax(top.pos(), "problem declares no goals"));
    }
    for (label, f) in goal_exprs {
        if p.goals.iter().any(|g| g.label == label) {
            return Err(PddlError::semantic(f.pos(), "duplicate goal label", label));
        }
        let conditions = parse_conjunction(&scope, f)?;
        check_goal_consistent(&conditions).map_err(|msg| PddlError::semantic(f.pos(), msg, &label))?;
        p.goals.push(GoalSpec { label, conditions });
    }
    Ok(p)
}

fn ground_term(t: &Term) -> ObjectId {
    match *t {
        Term::Obj(o) => o,
        Term::Var(_) => unreachable!("problem-level terms are ground"),
    }
}

fn check_goal_consistent(conds: &[Condition]) -> Result<(), &'static str> {
    for (i, a) in conds.iter().enumerate() {
        for b in &conds[i + 1..] {
            if let (
                Condition::Atom { pred: p1, args: a1, positive: s1 },
                Condition::Atom { pred: p2, args: a2, positive: s2 },
            ) = (a, b)
            {
                if p1 == p2 && a1 == a2 && s1 != s2 {
                    return Err("goal contains a literal and its negation");
                }
            }
        }
    }
    Ok(())
}

fn layouts<'a>(
    sigs: impl Iterator<Item = &'a super::domain::Signature>,
    typed_objects: &[Vec<ObjectId>],
) -> (Vec<Layout>, usize) {
    let mut offset = 0;
    let mut out = Vec::new();
    for sig in sigs {
        let param_types: Vec<TypeId> = sig.params.iter().map(|p| p.ty).collect();
        let mut strides = vec![0; param_types.len()];
        let mut count = 1;
        for i in (0..param_types.len()).rev() {
            strides[i] = count;
            count *= typed_objects[param_types[i]].len();
        }
        out.push(Layout { offset, param_types, strides, count });
        offset += count;
    }
    (out, offset)
}

/// Variable depth of a condition: number of leading params that must be bound.
fn condition_depth(c: &Condition) -> usize {
    fn term_depth(t: &Term) -> usize {
        match t {
            Term::Var(i) => i + 1,
            Term::Obj(_) => 0,
        }
    }
    fn expr_depth(e: &super::domain::NumExpr) -> usize {
        use super::domain::NumExpr::*;
        match e {
            Const(_) => 0,
            Fluent { args, .. } => args.iter().map(term_depth).max().unwrap_or(0),
            Add(a, b) | Sub(a, b) | Mul(a, b) => expr_depth(a).max(expr_depth(b)),
            Neg(a) => expr_depth(a),
        }
    }
    match c {
        Condition::Atom { args, .. } => args.iter().map(term_depth).max().unwrap_or(0),
        Condition::Equal { lhs, rhs, .. } => term_depth(lhs).max(term_depth(rhs)),
        Condition::Compare { lhs, rhs, .. } => expr_depth(lhs).max(expr_depth(rhs)),
    }
}

pub(crate) fn condition_is_static(c: &Condition, static_preds: &[bool], static_funcs: &[bool]) -> bool {
    fn expr_static(e: &super::domain::NumExpr, sf: &[bool]) -> bool {
        use super::domain::NumExpr::*;
        match e {
            Const(_) => true,
            Fluent { func, .. } => sf[*func],
            Add(a, b) | Sub(a, b) | Mul(a, b) => expr_static(a, sf) && expr_static(b, sf),
            Neg(a) => expr_static(a, sf),
        }
    }
    match c {
        Condition::Atom { pred, .. } => static_preds[*pred],
        Condition::Equal { .. } => true,
        Condition::Compare { lhs, rhs, .. } => expr_static(lhs, static_funcs) && expr_static(rhs, static_funcs),
    }
}

fn build_tables(
    name: String,
    domain: Arc<DomainDef>,
    objects: Vec<(String, TypeId)>,
    object_index: HashMap<String, ObjectId>,
) -> ProblemDef {
    let ntypes = domain.types.len();
    let mut typed_objects: Vec<Vec<ObjectId>> = vec![Vec::new(); ntypes];
    for (id, (_, ty)) in objects.iter().enumerate() {
        for (t, list) in typed_objects.iter_mut().enumerate() {
            if domain.is_subtype(*ty, t) {
                list.push(id as ObjectId);
            }
        }
    }
    for list in &mut typed_objects {
        list.sort_by(|a, b| objects[*a as usize].0.cmp(&objects[*b as usize].0));
    }
    let mut object_rank = vec![vec![NOT_OF_TYPE; objects.len()]; ntypes];
    for (t, list) in typed_objects.iter().enumerate() {
        for (r, &o) in list.iter().enumerate() {
            object_rank[t][o as usize] = r as u32;
        }
    }
    let (atom_layout, num_atoms) = layouts(domain.predicates.iter(), &typed_objects);
    let (fluent_layout, num_fluents) = layouts(domain.functions.iter(), &typed_objects);
    let static_preds = domain.static_predicates();
    let static_funcs = domain.static_functions();

    let mut operator_order: Vec<usize> = (0..domain.operators.len()).collect();
    operator_order.sort_by(|a, b| domain.operators[*a].name.cmp(&domain.operators[*b].name));

    let plan = |only_static: bool| -> Vec<Vec<Vec<usize>>> {
        domain
            .operators
            .iter()
            .map(|op| {
                let mut by_depth = vec![Vec::new(); op.params.len() + 1];
                for (i, c) in op.precondition.iter().enumerate() {
                    if only_static && !condition_is_static(c, &static_preds, &static_funcs) {
                        continue;
                    }
                    by_depth[condition_depth(c)].push(i);
                }
                by_depth
            })
            .collect()
    };
    let check_plan = plan(false);
    let static_check_plan = plan(true);

    ProblemDef {
        name,
        init: State::new(num_atoms, num_fluents),
        goals: Vec::new(),
        objects,
        object_index,
        typed_objects,
        object_rank,
        atom_layout,
        fluent_layout,
        num_atoms,
        num_fluents,
        static_preds,
        static_funcs,
        operator_order,
        check_plan,
        static_check_plan,
        relaxed: OnceLock::new(),
        domain,
    }
}
