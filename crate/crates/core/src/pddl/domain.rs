use std::collections::HashMap;

use super::error::PddlError;
use super::sexpr::{self, Pos, SExpr};

pub type TypeId = usize;
pub type ObjectId = u32;

/// The implicit root type every other type descends from.
pub const OBJECT_TYPE: TypeId = 0;

const SUPPORTED_REQUIREMENTS: &[&str] =
    &[":strips", ":typing", ":equality", ":negative-preconditions", ":numeric-fluents", ":fluents"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDef {
    pub name: String,
    pub parent: Option<TypeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedParam {
    pub name: String,
    pub ty: TypeId,
}

/// Name and typed parameter list of a predicate or integer fluent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub params: Vec<TypedParam>,
}

impl Signature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// An argument position: either an operator parameter or a concrete object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(usize),
    Obj(ObjectId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NumExpr {
    Const(i64),
    Fluent { func: usize, args: Vec<Term> },
    Add(Box<NumExpr>, Box<NumExpr>),
    Sub(Box<NumExpr>, Box<NumExpr>),
    Mul(Box<NumExpr>, Box<NumExpr>),
    Neg(Box<NumExpr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq | CmpOp::Ne => "=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// One conjunct of a precondition or goal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    Atom { pred: usize, args: Vec<Term>, positive: bool },
    Equal { lhs: Term, rhs: Term, positive: bool },
    Compare { op: CmpOp, lhs: NumExpr, rhs: NumExpr },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignOp {
    Assign,
    Increase,
    Decrease,
}

impl AssignOp {
    pub fn keyword(self) -> &'static str {
        match self {
            AssignOp::Assign => "assign",
            AssignOp::Increase => "increase",
            AssignOp::Decrease => "decrease",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    Add { pred: usize, args: Vec<Term> },
    Delete { pred: usize, args: Vec<Term> },
    Update { func: usize, args: Vec<Term>, op: AssignOp, value: NumExpr },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
    pub precondition: Vec<Condition>,
    pub effects: Vec<Effect>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    /// Index 0 is always `object`.
    pub types: Vec<TypeDef>,
    /// Domain constants; they occupy the first object ids of every problem.
    pub constants: Vec<(String, TypeId)>,
    pub predicates: Vec<Signature>,
    pub functions: Vec<Signature>,
    pub operators: Vec<OperatorSchema>,
}

impl DomainDef {
    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn predicate_id(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn function_id(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn operator_id(&self, name: &str) -> Option<usize> {
        self.operators.iter().position(|o| o.name == name)
    }

    /// True if `ty` equals `ancestor` or descends from it.
    pub fn is_subtype(&self, mut ty: TypeId, ancestor: TypeId) -> bool {
        loop {
            if ty == ancestor {
                return true;
            }
            match self.types[ty].parent {
                Some(p) => ty = p,
                None => return false,
            }
        }
    }

    /// Predicates that no operator adds or deletes.
    pub fn static_predicates(&self) -> Vec<bool> {
        let mut is_static = vec![true; self.predicates.len()];
        for op in &self.operators {
            for eff in &op.effects {
                match eff {
                    Effect::Add { pred, .. } | Effect::Delete { pred, .. } => is_static[*pred] = false,
                    Effect::Update { .. } => {}
                }
            }
        }
        is_static
    }

    /// Fluents that no operator updates.
    pub fn static_functions(&self) -> Vec<bool> {
        let mut is_static = vec![true; self.functions.len()];
        for op in &self.operators {
            for eff in &op.effects {
                if let Effect::Update { func, .. } = eff {
                    is_static[*func] = false;
                }
            }
        }
        is_static
    }
}

/// Parse a domain description.
pub fn parse_domain(text: &str) -> Result<DomainDef, PddlError> {
    let top = sexpr::parse_one(text)?;
    let items = top.expect_list("(define ...)")?;
    if items.first().and_then(SExpr::as_symbol) != Some("define") {
        return Err(PddlError::syntax(top.pos(), "expected `(define (domain <name>) ...)`"));
    }
    let header = items.get(1).ok_or_else(|| PddlError::syntax(top.pos(), "missing domain header"))?;
    let name = match header.as_list() {
        Some([kw, name]) if kw.as_symbol() == Some("domain") => name.expect_symbol("domain name")?.to_string(),
        _ => return Err(PddlError::syntax(header.pos(), "expected `(domain <name>)`")),
    };

    let mut dom = DomainDef {
        name,
        requirements: Vec::new(),
        types: vec![TypeDef { name: "object".into(), parent: None }],
        constants: Vec::new(),
        predicates: Vec::new(),
        functions: Vec::new(),
        operators: Vec::new(),
    };

    let sections = &items[2..];
    // Types must be known before anything else refers to them.
    for sec in sections {
        if sec.head() == Some(":types") {
            parse_types(&mut dom, &sec.as_list().unwrap()[1..])?;
        }
    }
    for sec in sections {
        let list = sec.expect_list("domain section")?;
        let head = sec.head().ok_or_else(|| PddlError::syntax(sec.pos(), "expected section keyword"))?;
        match head {
            ":requirements" => {
                for r in &list[1..] {
                    let r = r.expect_symbol("requirement")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(PddlError::semantic(list[0].pos(), "unsupported requirement", r));
                    }
                    dom.requirements.push(r.to_string());
                }
            }
            ":types" => {}
            ":constants" => {
                for (cname, ty, pos) in parse_typed_list(&list[1..])? {
                    let ty = resolve_type(&dom, ty.as_deref(), pos)?;
                    if dom.constants.iter().any(|(n, _)| *n == cname) {
                        return Err(PddlError::semantic(pos, "duplicate constant", cname));
                    }
                    dom.constants.push((cname, ty));
                }
            }
            ":predicates" => {
                for p in &list[1..] {
                    let sig = parse_signature(&dom, p)?;
                    if dom.predicate_id(&sig.name).is_some() {
                        return Err(PddlError::semantic(p.pos(), "duplicate predicate", sig.name));
                    }
                    dom.predicates.push(sig);
                }
            }
            ":functions" => {
                let mut rest = &list[1..];
                while let Some((first, tail)) = rest.split_first() {
                    if first.as_symbol() == Some("-") {
                        // Result type annotation: only integers are supported.
                        let ty = tail.first().ok_or_else(|| PddlError::syntax(first.pos(), "missing function type"))?;
                        let ty_name = ty.expect_symbol("function type")?;
                        if !matches!(ty_name, "number" | "integer" | "int") {
                            return Err(PddlError::semantic(ty.pos(), "unsupported function type", ty_name));
                        }
                        rest = &tail[1..];
                        continue;
                    }
                    let sig = parse_signature(&dom, first)?;
                    if dom.function_id(&sig.name).is_some() {
                        return Err(PddlError::semantic(first.pos(), "duplicate function", sig.name));
                    }
                    dom.functions.push(sig);
                    rest = tail;
                }
            }
            ":action" => {
                let op = parse_operator(&dom, list, sec.pos())?;
                if dom.operator_id(&op.name).is_some() {
                    return Err(PddlError::semantic(sec.pos(), "duplicate action", op.name));
                }
                dom.operators.push(op);
            }
            other => return Err(PddlError::semantic(sec.pos(), "unknown domain section", other)),
        }
    }
    Ok(dom)
}

fn parse_types(dom: &mut DomainDef, items: &[SExpr]) -> Result<(), PddlError> {
    let entries = parse_typed_list(items)?;
    let ensure = |dom: &mut DomainDef, name: &str| -> TypeId {
        match dom.type_id(name) {
            Some(id) => id,
            None => {
                dom.types.push(TypeDef { name: name.to_string(), parent: Some(OBJECT_TYPE) });
                dom.types.len() - 1
            }
        }
    };
    for (name, parent, pos) in entries {
        if name == "object" {
            return Err(PddlError::semantic(pos, "cannot redeclare type", name));
        }
        let id = ensure(dom, &name);
        let parent_id = ensure(dom, parent.as_deref().unwrap_or("object"));
        if parent_id == id || dom.is_subtype(parent_id, id) {
            return Err(PddlError::semantic(pos, "cyclic type hierarchy", name));
        }
        dom.types[id].parent = Some(parent_id);
    }
    Ok(())
}

/// `a b - t c` into `[(a, Some t), (b, Some t), (c, None)]`.
pub(crate) fn parse_typed_list(items: &[SExpr]) -> Result<Vec<(String, Option<String>, Pos)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let sym = items[i].expect_symbol("name")?;
        if sym == "-" {
            let ty = items
                .get(i + 1)
                .ok_or_else(|| PddlError::syntax(items[i].pos(), "missing type after `-`"))?
                .expect_symbol("type name")?;
            if pending.is_empty() {
                return Err(PddlError::syntax(items[i].pos(), "type annotation without names"));
            }
            out.extend(pending.drain(..).map(|(n, p)| (n, Some(ty.to_string()), p)));
            i += 2;
        } else {
            pending.push((sym.to_string(), items[i].pos()));
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|(n, p)| (n, None, p)));
    Ok(out)
}

fn resolve_type(dom: &DomainDef, name: Option<&str>, pos: Pos) -> Result<TypeId, PddlError> {
    let name = name.unwrap_or("object");
    dom.type_id(name).ok_or_else(|| PddlError::semantic(pos, "undeclared type", name))
}

fn parse_params(dom: &DomainDef, items: &[SExpr]) -> Result<Vec<TypedParam>, PddlError> {
    let mut params: Vec<TypedParam> = Vec::new();
    for (name, ty, pos) in parse_typed_list(items)? {
        if !name.starts_with('?') {
            return Err(PddlError::syntax(pos, format!("parameter `{name}` must start with `?`")));
        }
        if params.iter().any(|p| p.name == name) {
            return Err(PddlError::semantic(pos, "duplicate parameter", name));
        }
        params.push(TypedParam { name, ty: resolve_type(dom, ty.as_deref(), pos)? });
    }
    Ok(params)
}

fn parse_signature(dom: &DomainDef, e: &SExpr) -> Result<Signature, PddlError> {
    let list = e.expect_list("signature")?;
    let (name, rest) = list.split_first().ok_or_else(|| PddlError::syntax(e.pos(), "empty signature"))?;
    Ok(Signature { name: name.expect_symbol("name")?.to_string(), params: parse_params(dom, rest)? })
}

fn parse_operator(dom: &DomainDef, list: &[SExpr], pos: Pos) -> Result<OperatorSchema, PddlError> {
    let name = list
        .get(1)
        .ok_or_else(|| PddlError::syntax(pos, "missing action name"))?
        .expect_symbol("action name")?
        .to_string();
    let mut params = Vec::new();
    let mut pre_expr = None;
    let mut eff_expr = None;
    let mut i = 2;
    while i < list.len() {
        let key = list[i].expect_symbol("action keyword")?;
        let val =
            list.get(i + 1).ok_or_else(|| PddlError::syntax(list[i].pos(), format!("missing value for {key}")))?;
        match key {
            ":parameters" => params = parse_params(dom, val.expect_list("parameter list")?)?,
            ":precondition" => pre_expr = Some(val),
            ":effect" => eff_expr = Some(val),
            other => return Err(PddlError::semantic(list[i].pos(), "unknown action keyword", other)),
        }
        i += 2;
    }
    let scope = Scope { dom, params: &params, objects: None };
    let precondition = match pre_expr {
        Some(e) => parse_conjunction(&scope, e)?,
        None => Vec::new(),
    };
    let effects = match eff_expr {
        Some(e) => parse_effects(&scope, e)?,
        None => Vec::new(),
    };
    Ok(OperatorSchema { name, params, precondition, effects })
}

/// Name resolution context for formulas: operator parameters, then domain
/// constants, then (for problems) problem objects.
pub(crate) struct Scope<'a> {
    pub dom: &'a DomainDef,
    pub params: &'a [TypedParam],
    /// Problem object table: name -> (id, type). `None` inside a domain.
    pub objects: Option<&'a HashMap<String, (ObjectId, TypeId)>>,
}

impl Scope<'_> {
    fn term(&self, e: &SExpr) -> Result<(Term, TypeId), PddlError> {
        let s = e.expect_symbol("term")?;
        if s.starts_with('?') {
            return self
                .params
                .iter()
                .position(|p| p.name == s)
                .map(|i| (Term::Var(i), self.params[i].ty))
                .ok_or_else(|| PddlError::semantic(e.pos(), "unbound variable", s));
        }
        if let Some(objs) = self.objects {
            if let Some(&(id, ty)) = objs.get(s) {
                return Ok((Term::Obj(id), ty));
            }
        } else if let Some(i) = self.dom.constants.iter().position(|(n, _)| n == s) {
            return Ok((Term::Obj(i as ObjectId), self.dom.constants[i].1));
        }
        Err(PddlError::semantic(e.pos(), "unknown object", s))
    }

    fn args(&self, sig: &Signature, items: &[SExpr], pos: Pos) -> Result<Vec<Term>, PddlError> {
        if items.len() != sig.arity() {
            return Err(PddlError::semantic(pos, format!("expected {} argument(s)", sig.arity()), &sig.name));
        }
        items
            .iter()
            .zip(&sig.params)
            .map(|(e, p)| {
                let (t, ty) = self.term(e)?;
                if !self.dom.is_subtype(ty, p.ty) {
                    return Err(PddlError::semantic(
                        e.pos(),
                        format!("type mismatch, expected {}", self.dom.types[p.ty].name),
                        e.as_symbol().unwrap_or(""),
                    ));
                }
                Ok(t)
            })
            .collect()
    }

    fn atom(&self, e: &SExpr) -> Result<(usize, Vec<Term>), PddlError> {
        let list = e.expect_list("atom")?;
        let name = list.first().ok_or_else(|| PddlError::syntax(e.pos(), "empty atom"))?.expect_symbol("predicate")?;
        let pred =
            self.dom.predicate_id(name).ok_or_else(|| PddlError::semantic(e.pos(), "undeclared predicate", name))?;
        Ok((pred, self.args(&self.dom.predicates[pred], &list[1..], e.pos())?))
    }

    fn fluent(&self, e: &SExpr) -> Result<(usize, Vec<Term>), PddlError> {
        let list = e.expect_list("fluent")?;
        let name = list.first().ok_or_else(|| PddlError::syntax(e.pos(), "empty fluent"))?.expect_symbol("function")?;
        let func =
            self.dom.function_id(name).ok_or_else(|| PddlError::semantic(e.pos(), "undeclared function", name))?;
        Ok((func, self.args(&self.dom.functions[func], &list[1..], e.pos())?))
    }

    fn num_expr(&self, e: &SExpr) -> Result<NumExpr, PddlError> {
        match e {
            SExpr::Symbol(s, pos) => s
                .parse::<i64>()
                .map(NumExpr::Const)
                .map_err(|_| PddlError::semantic(*pos, "expected integer or fluent", s.clone())),
            SExpr::List(items, pos) => {
                let head = e.head().ok_or_else(|| PddlError::syntax(*pos, "empty expression"))?;
                let bin = |mk: fn(Box<NumExpr>, Box<NumExpr>) -> NumExpr| -> Result<NumExpr, PddlError> {
                    if items.len() != 3 {
                        return Err(PddlError::syntax(*pos, format!("`{head}` takes two operands")));
                    }
                    Ok(mk(Box::new(self.num_expr(&items[1])?), Box::new(self.num_expr(&items[2])?)))
                };
                match head {
                    "+" => bin(NumExpr::Add),
                    "*" => bin(NumExpr::Mul),
                    "-" if items.len() == 2 => Ok(NumExpr::Neg(Box::new(self.num_expr(&items[1])?))),
                    "-" => bin(NumExpr::Sub),
                    _ => {
                        let (func, args) = self.fluent(e)?;
                        Ok(NumExpr::Fluent { func, args })
                    }
                }
            }
        }
    }

    fn is_numeric(&self, e: &SExpr) -> bool {
        match e {
            SExpr::Symbol(s, _) => s.parse::<i64>().is_ok(),
            SExpr::List(..) => true,
        }
    }
}

fn cmp_op(sym: &str) -> Option<CmpOp> {
    Some(match sym {
        "=" => CmpOp::Eq,
        "<" => CmpOp::Lt,
        "<=" => CmpOp::Le,
        ">" => CmpOp::Gt,
        ">=" => CmpOp::Ge,
        _ => return None,
    })
}

/// Flatten a formula into a list of literals. Only conjunctions of
/// (possibly negated) atoms, equalities and comparisons are accepted.
pub(crate) fn parse_conjunction(scope: &Scope<'_>, e: &SExpr) -> Result<Vec<Condition>, PddlError> {
    let mut out = Vec::new();
    collect_conditions(scope, e, true, &mut out)?;
    Ok(out)
}

fn collect_conditions(scope: &Scope<'_>, e: &SExpr, positive: bool, out: &mut Vec<Condition>) -> Result<(), PddlError> {
    let list = e.expect_list("condition")?;
    let head = match list.first() {
        None => return Ok(()), // `()` is the empty conjunction
        Some(h) => h.expect_symbol("condition head")?,
    };
    match head {
        "and" => {
            if !positive {
                return Err(PddlError::semantic(e.pos(), "negated conjunction not supported", "and"));
            }
            for c in &list[1..] {
                collect_conditions(scope, c, true, out)?;
            }
        }
        "not" => {
            if list.len() != 2 {
                return Err(PddlError::syntax(e.pos(), "`not` takes one operand"));
            }
            if !positive {
                return Err(PddlError::semantic(e.pos(), "double negation not supported", "not"));
            }
            collect_conditions(scope, &list[1], false, out)?;
        }
        "or" | "imply" | "exists" | "forall" | "when" => {
            return Err(PddlError::semantic(e.pos(), "unsupported formula construct", head));
        }
        _ => {
            if let Some(op) = cmp_op(head) {
                if list.len() != 3 {
                    return Err(PddlError::syntax(e.pos(), format!("`{head}` takes two operands")));
                }
                if op == CmpOp::Eq && !scope.is_numeric(&list[1]) && !scope.is_numeric(&list[2]) {
                    let (lhs, _) = scope.term(&list[1])?;
                    let (rhs, _) = scope.term(&list[2])?;
                    out.push(Condition::Equal { lhs, rhs, positive });
                } else {
                    let op = if positive { op } else { op.negate() };
                    out.push(Condition::Compare { op, lhs: scope.num_expr(&list[1])?, rhs: scope.num_expr(&list[2])? });
                }
            } else {
                let (pred, args) = scope.atom(e)?;
                out.push(Condition::Atom { pred, args, positive });
            }
        }
    }
    Ok(())
}

fn parse_effects(scope: &Scope<'_>, e: &SExpr) -> Result<Vec<Effect>, PddlError> {
    let mut out = Vec::new();
    collect_effects(scope, e, &mut out)?;
    Ok(out)
}

fn collect_effects(scope: &Scope<'_>, e: &SExpr, out: &mut Vec<Effect>) -> Result<(), PddlError> {
    let list = e.expect_list("effect")?;
    let head = match list.first() {
        None => return Ok(()),
        Some(h) => h.expect_symbol("effect head")?,
    };
    match head {
        "and" => {
            for c in &list[1..] {
                collect_effects(scope, c, out)?;
            }
        }
        "not" => {
            if list.len() != 2 {
                return Err(PddlError::syntax(e.pos(), "`not` takes one operand"));
            }
            let (pred, args) = scope.atom(&list[1])?;
            out.push(Effect::Delete { pred, args });
        }
        "assign" | "increase" | "decrease" => {
            if list.len() != 3 {
                return Err(PddlError::syntax(e.pos(), format!("`{head}` takes two operands")));
            }
            let op = match head {
                "assign" => AssignOp::Assign,
                "increase" => AssignOp::Increase,
                _ => AssignOp::Decrease,
            };
            let (func, args) = scope.fluent(&list[1])?;
            out.push(Effect::Update { func, args, op, value: scope.num_expr(&list[2])? });
        }
        "when" | "forall" | "scale-up" | "scale-down" => {
            return Err(PddlError::semantic(e.pos(), "unsupported effect construct", head));
        }
        _ => {
            let (pred, args) = scope.atom(e)?;
            out.push(Effect::Add { pred, args });
        }
    }
    Ok(())
}
