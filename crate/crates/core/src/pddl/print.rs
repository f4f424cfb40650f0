//! Pretty-printing back to the s-expression surface syntax.

use std::fmt::{self, Write};

use super::domain::{CmpOp, Condition, DomainDef, Effect, NumExpr, Term, TypedParam};
use super::problem::ProblemDef;

struct Names<'a> {
    params: &'a [TypedParam],
    object: &'a dyn Fn(u32) -> String,
}

impl Names<'_> {
    fn term(&self, t: &Term) -> String {
        match *t {
            Term::Var(i) => self.params[i].name.clone(),
            Term::Obj(o) => (self.object)(o),
        }
    }

    fn call(&self, name: &str, args: &[Term]) -> String {
        let mut s = format!("({name}");
        for a in args {
            s.push(' ');
            s.push_str(&self.term(a));
        }
        s + ")"
    }

    fn expr(&self, dom: &DomainDef, e: &NumExpr) -> String {
        match e {
            NumExpr::Const(c) => c.to_string(),
            NumExpr::Fluent { func, args } => self.call(&dom.functions[*func].name, args),
            NumExpr::Add(a, b) => format!("(+ {} {})", self.expr(dom, a), self.expr(dom, b)),
            NumExpr::Sub(a, b) => format!("(- {} {})", self.expr(dom, a), self.expr(dom, b)),
            NumExpr::Mul(a, b) => format!("(* {} {})", self.expr(dom, a), self.expr(dom, b)),
            NumExpr::Neg(a) => format!("(- {})", self.expr(dom, a)),
        }
    }

    fn condition(&self, dom: &DomainDef, c: &Condition) -> String {
        let neg = |s: String, positive: bool| if positive { s } else { format!("(not {s})") };
        match c {
            Condition::Atom { pred, args, positive } => neg(self.call(&dom.predicates[*pred].name, args), *positive),
            Condition::Equal { lhs, rhs, positive } => {
                neg(format!("(= {} {})", self.term(lhs), self.term(rhs)), *positive)
            }
            Condition::Compare { op, lhs, rhs } => {
                neg(format!("({} {} {})", op.symbol(), self.expr(dom, lhs), self.expr(dom, rhs)), *op != CmpOp::Ne)
            }
        }
    }

    fn conjunction(&self, dom: &DomainDef, conds: &[Condition]) -> String {
        match conds {
            [] => "()".into(),
            [c] => self.condition(dom, c),
            _ => {
                let parts: Vec<String> = conds.iter().map(|c| self.condition(dom, c)).collect();
                format!("(and {})", parts.join(" "))
            }
        }
    }
}

fn typed_list(dom: &DomainDef, items: impl IntoIterator<Item = (String, usize)>) -> String {
    items.into_iter().map(|(n, ty)| format!("{n} - {}", dom.types[ty].name)).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for DomainDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            writeln!(f, "  (:requirements {})", self.requirements.join(" "))?;
        }
        if self.types.len() > 1 {
            let types = typed_list(self, self.types[1..].iter().map(|t| (t.name.clone(), t.parent.unwrap_or(0))));
            writeln!(f, "  (:types {types})")?;
        }
        if !self.constants.is_empty() {
            writeln!(f, "  (:constants {})", typed_list(self, self.constants.iter().cloned()))?;
        }
        let sig = |name: &str, params: &[TypedParam]| {
            let ps = typed_list(self, params.iter().map(|p| (p.name.clone(), p.ty)));
            if ps.is_empty() {
                format!("({name})")
            } else {
                format!("({name} {ps})")
            }
        };
        if !self.predicates.is_empty() {
            let ps: Vec<String> = self.predicates.iter().map(|p| sig(&p.name, &p.params)).collect();
            writeln!(f, "  (:predicates {})", ps.join(" "))?;
        }
        if !self.functions.is_empty() {
            let fs: Vec<String> = self.functions.iter().map(|p| sig(&p.name, &p.params)).collect();
            writeln!(f, "  (:functions {})", fs.join(" "))?;
        }
        let constant = |o: u32| self.constants[o as usize].0.clone();
        for op in &self.operators {
            let names = Names { params: &op.params, object: &constant };
            let params = typed_list(self, op.params.iter().map(|p| (p.name.clone(), p.ty)));
            let effects: Vec<String> = op
                .effects
                .iter()
                .map(|e| match e {
                    Effect::Add { pred, args } => names.call(&self.predicates[*pred].name, args),
                    Effect::Delete { pred, args } => {
                        format!("(not {})", names.call(&self.predicates[*pred].name, args))
                    }
                    Effect::Update { func, args, op, value } => format!(
                        "({} {} {})",
                        op.keyword(),
                        names.call(&self.functions[*func].name, args),
                        names.expr(self, value)
                    ),
                })
                .collect();
            writeln!(f, "  (:action {}", op.name)?;
            writeln!(f, "    :parameters ({params})")?;
            writeln!(f, "    :precondition {}", names.conjunction(self, &op.precondition))?;
            writeln!(f, "    :effect (and {}))", effects.join(" "))?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dom = &self.domain;
        writeln!(f, "(define (problem {}) (:domain {})", self.name, dom.name)?;
        let own = self.objects[dom.constants.len()..].iter().cloned();
        writeln!(f, "  (:objects {})", typed_list(dom, own))?;
        let mut init = String::new();
        let (facts, fluents) = self.describe_state(&self.init);
        for fact in facts {
            write!(init, " {fact}")?;
        }
        for (name, v) in fluents {
            write!(init, " (= {name} {v})")?;
        }
        writeln!(f, "  (:init{init})")?;
        let object = |o: u32| self.object_name(o).to_string();
        let names = Names { params: &[], object: &object };
        writeln!(f, "  (:goals")?;
        for g in &self.goals {
            writeln!(f, "    ({} {})", g.label, names.conjunction(dom, &g.conditions))?;
        }
        write!(f, "  ))")
    }
}
