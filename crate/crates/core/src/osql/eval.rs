//! Expression, select and `Set` evaluation against a database.

use std::sync::Arc;

use super::ast::{BinOp, CompareOp, Condition, DslFunction, Expr, Literal, SelectExpr, SetStmt, Source};
use crate::database::Database;
use crate::envops::StreamRole;
use crate::error::{Error, Result};
use crate::netcore::{self, natives};
use crate::object_store::{FunctionKind, FunctionSig, ObjectId};
use crate::value::{Value, ValueType};

/// Local variables in scope, innermost last, plus the implicit row of a
/// `select ... from T`.
#[derive(Debug, Clone, Default)]
pub struct Env {
    vars: Vec<(String, Value)>,
    row: Option<ObjectId>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(name: &str, value: Value) -> Self {
        let mut env = Self::new();
        env.bind(name, value);
        env
    }

    pub fn bind(&mut self, name: &str, value: Value) {
        self.vars.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn mark(&self) -> usize {
        self.vars.len()
    }

    fn reset(&mut self, mark: usize) {
        self.vars.truncate(mark);
    }
}

type Visit<'a> = dyn FnMut(&mut Database, &mut Env) -> Result<()> + 'a;

/// Whether `var` occurs anywhere inside `expr`.
fn mentions(expr: &Expr, var: &str) -> bool {
    let cond = |c: &Condition| match c {
        Condition::Compare { lhs, rhs, .. } => mentions(lhs, var) || mentions(rhs, var),
        Condition::In { item, set } => mentions(item, var) || mentions(set, var),
    };
    match expr {
        Expr::Literal(_) => false,
        Expr::Ident(n) => n == var,
        Expr::Apply { args, .. } | Expr::Tuple(args) => args.iter().any(|a| mentions(a, var)),
        Expr::Hull { arg, .. } | Expr::Neg(arg) => mentions(arg, var),
        Expr::Binary { lhs, rhs, .. } => mentions(lhs, var) || mentions(rhs, var),
        Expr::Select(sel) => sel.projection.iter().any(|p| mentions(p, var)) || sel.filter.iter().any(cond),
    }
}

/// Strips single-element bag and tuple wrappers.
fn unwrap_single(v: Value) -> Value {
    match v {
        Value::Bag(mut items) | Value::Tuple(mut items) if items.len() == 1 => {
            unwrap_single(items.pop().expect("len 1"))
        }
        other => other,
    }
}

fn values_equal(a: &Value, b: &Value) -> bool {
    let (a, b) = (unwrap_single(a.clone()), unwrap_single(b.clone()));
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

fn arith(op: BinOp, a: Value, b: Value) -> Result<Value> {
    let (a, b) = (unwrap_single(a), unwrap_single(b));
    if let (Value::Integer(x), Value::Integer(y)) = (&a, &b) {
        let exact = match op {
            BinOp::Add => x.checked_add(*y),
            BinOp::Sub => x.checked_sub(*y),
            BinOp::Mul => x.checked_mul(*y),
            BinOp::Div => None,
        };
        if let Some(v) = exact {
            return Ok(Value::Integer(v));
        }
    }
    let num = |v: &Value| v.as_f64().ok_or_else(|| Error::mismatch(format!("arithmetic on {}", v.type_label())));
    let (x, y) = (num(&a)?, num(&b)?);
    Ok(Value::Real(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => x / y,
    }))
}

fn push_flat(out: &mut Vec<Value>, v: Value) {
    match v {
        Value::Bag(items) => out.extend(items),
        Value::Stream(_) => out.extend(v.elements()),
        Value::Null => {}
        other => out.push(other),
    }
}

impl Database {
    pub fn eval_expr(&mut self, expr: &Expr, env: &mut Env) -> Result<Value> {
        match expr {
            Expr::Literal(l) => Ok(match l {
                Literal::Real(x) => Value::Real(*x),
                Literal::Integer(i) => Value::Integer(*i),
                Literal::Text(s) => Value::Text(s.clone()),
                Literal::Null => Value::Null,
            }),
            Expr::Ident(name) => self.eval_ident(name, env),
            Expr::Apply { function, args } => self.eval_apply(function, args, env),
            Expr::Hull { function, arg } => {
                let unit = self.eval_object(arg, env)?;
                netcore::hull_resolve(self, function, unit)
            }
            Expr::Select(sel) => self.eval_select(sel, env),
            Expr::Binary { op, lhs, rhs } => {
                let a = self.eval_expr(lhs, env)?;
                let b = self.eval_expr(rhs, env)?;
                arith(*op, a, b)
            }
            Expr::Neg(inner) => match unwrap_single(self.eval_expr(inner, env)?) {
                Value::Integer(i) => Ok(Value::Integer(-i)),
                v => Ok(Value::Real(
                    -v.as_f64().ok_or_else(|| Error::mismatch(format!("cannot negate {}", v.type_label())))?,
                )),
            },
            Expr::Tuple(items) => {
                Ok(Value::Tuple(items.iter().map(|e| self.eval_expr(e, env)).collect::<Result<_>>()?))
            }
        }
    }

    /// Evaluates `expr` as the object it denotes.
    pub(crate) fn eval_object(&mut self, expr: &Expr, env: &mut Env) -> Result<ObjectId> {
        let v = self.eval_expr(expr, env)?;
        v.as_object().ok_or_else(|| Error::mismatch(format!("`{expr}` is {}, not an object", v.type_label())))
    }

    /// Evaluates `expr` as one object or a collection of objects.
    pub(crate) fn eval_objects(&mut self, expr: &Expr, env: &mut Env) -> Result<Vec<ObjectId>> {
        match self.eval_expr(expr, env)? {
            Value::Object(o) => Ok(vec![o]),
            v @ (Value::Bag(_) | Value::Tuple(_)) => v
                .elements()
                .iter()
                .map(|e| e.as_object().ok_or_else(|| Error::mismatch(format!("{} is not an object", e.type_label()))))
                .collect(),
            v => Err(Error::mismatch(format!("`{expr}` is {}, not an object", v.type_label()))),
        }
    }

    /// Evaluates a value destined for `sig`; a bare name stands for itself
    /// when the function holds function references.
    pub(crate) fn eval_for(&mut self, sig: &FunctionSig, expr: &Expr, env: &mut Env) -> Result<Value> {
        if sig.value_type == ValueType::FunctionRef {
            if let Expr::Ident(name) = expr {
                if env.get(name).is_none() {
                    return Ok(Value::Function(name.clone()));
                }
            }
        }
        self.eval_expr(expr, env)
    }

    fn is_callable(&self, name: &str) -> bool {
        self.catalog.functions.contains_key(name) || self.builtins.contains(name) || natives::lookup(name).is_some()
    }

    fn ident_bound(&self, name: &str, env: &Env) -> bool {
        env.get(name).is_some()
            || env.row.is_some_and(|r| self.store.declares(r, name))
            || self.catalog.names.contains_key(name)
            || self.is_callable(name)
            || (self.ctx.is_some() && StreamRole::from_function(name).is_some())
    }

    fn eval_ident(&mut self, name: &str, env: &mut Env) -> Result<Value> {
        if let Some(v) = env.get(name) {
            return Ok(v.clone());
        }
        if let Some(row) = env.row {
            if self.store.declares(row, name) {
                return self.read_function(name, row);
            }
        }
        if let Some(oid) = self.catalog.names.get(name) {
            return Ok(Value::Object(*oid));
        }
        if let Some(role) = StreamRole::from_function(name) {
            if let Some(ctx) = &self.ctx {
                return Ok(ctx
                    .row(role)
                    .map_or(Value::Null, |r| Value::Tuple(r.iter().map(|x| Value::Real(*x)).collect())));
            }
        }
        if self.is_callable(name) {
            return Ok(Value::Function(name.to_string()));
        }
        Err(Error::UnknownIdentifier(name.to_string()))
    }

    fn eval_apply(&mut self, function: &str, args: &[Expr], env: &mut Env) -> Result<Value> {
        let arity = |expected: usize| {
            if args.len() == expected {
                Ok(())
            } else {
                Err(Error::ArityMismatch(format!("`{function}` takes {expected} argument(s), got {}", args.len())))
            }
        };
        if self.catalog.functions.contains_key(function) || natives::lookup(function).is_some() {
            arity(1)?;
            let unit = self.eval_object(&args[0], env)?;
            self.call_procedure(function, unit)?;
            return Ok(Value::Null);
        }
        if let Some(b) = self.builtins.get(function).cloned() {
            arity(b.arity)?;
            let mut vals = Vec::with_capacity(args.len());
            for (i, a) in args.iter().enumerate() {
                vals.push(match a {
                    Expr::Ident(name) if b.quoted.contains(&i) && env.get(name).is_none() => Value::Text(name.clone()),
                    _ => self.eval_expr(a, env)?,
                });
            }
            return (b.func)(self, &vals);
        }
        if !self.store.is_declared_anywhere(function) {
            return Err(Error::UnknownFunction(function.to_string()));
        }
        arity(1)?;
        let v = self.eval_expr(&args[0], env)?;
        self.apply_function(function, v)
    }

    /// Applies a stored or computed function to an object or a collection of objects.
    pub(crate) fn apply_function(&mut self, function: &str, v: Value) -> Result<Value> {
        match v {
            Value::Null => Ok(Value::Null),
            Value::Object(oid) => self.read_on(function, oid),
            Value::Bag(items) => {
                if items.len() == 1 {
                    return self.apply_function(function, items.into_iter().next().expect("len 1"));
                }
                let mut out = Vec::new();
                for item in items {
                    let r = self.apply_function(function, item)?;
                    push_flat(&mut out, r);
                }
                Ok(Value::Bag(out))
            }
            other => Err(Error::mismatch(format!("cannot apply `{function}` to {}", other.type_label()))),
        }
    }

    /// Reads `function` on `oid`; a link without the function reads it from its owning unit.
    fn read_on(&mut self, function: &str, oid: ObjectId) -> Result<Value> {
        self.store.object(oid)?;
        if self.store.declares(oid, function) {
            return self.read_function(function, oid);
        }
        if self.store.is_instance_of(oid, "Link") {
            return match netcore::link_owner(self, oid) {
                Some(owner) => self.read_on(function, owner),
                None => Ok(Value::Null),
            };
        }
        Err(Error::UnknownFunction(function.to_string()))
    }

    /// Resolved value of a declared function, computing foreign functions and
    /// stream bindings. During training the net's data functions read the
    /// current pattern.
    pub(crate) fn read_function(&mut self, function: &str, oid: ObjectId) -> Result<Value> {
        let sig = self.store.resolve_sig(oid, function)?.ok_or_else(|| Error::UnknownFunction(function.to_string()))?;
        if let FunctionKind::Foreign(name) = &sig.kind {
            let name = name.clone();
            return netcore::foreign_get(self, &name, oid);
        }
        if let Some(role) = StreamRole::from_function(function) {
            if let Some(ctx) = &self.ctx {
                if ctx.net == oid {
                    return Ok(ctx
                        .row(role)
                        .map_or(Value::Null, |r| Value::Tuple(r.iter().map(|x| Value::Real(*x)).collect())));
                }
            }
            if self.catalog.streams.contains_key(&(oid, role)) {
                return Ok(Value::Stream(crate::envops::stream(self, oid, role)?));
            }
        }
        self.store.get_value(function, oid)
    }

    // ----- select -----

    pub fn eval_select(&mut self, sel: &SelectExpr, env: &mut Env) -> Result<Value> {
        let mut out = Vec::new();
        let mark = env.mark();
        let result = match &sel.source {
            Source::None => {
                if sel.projection.len() == 1 && sel.filter.is_empty() {
                    let v = self.eval_expr(&sel.projection[0], env)?;
                    if let Value::Stream(_) = v {
                        return Ok(v);
                    }
                    push_flat(&mut out, v);
                    Ok(())
                } else if self.conditions_hold(&sel.filter, env)? {
                    self.project(&sel.projection, env, &mut out)
                } else {
                    Ok(())
                }
            }
            Source::ForEach(bindings) => {
                let projection = &sel.projection;
                self.for_each_match(bindings, &sel.filter, env, &mut |db, env| db.project(projection, env, &mut out))
            }
            Source::From { type_name, alias } => {
                let saved = env.row;
                let mut run = || -> Result<()> {
                    for oid in self.store.instances_of(type_name)? {
                        let m = env.mark();
                        env.row = Some(oid);
                        if let Some(a) = alias {
                            env.bind(a, Value::Object(oid));
                        }
                        if self.conditions_hold(&sel.filter, env)? {
                            self.project(&sel.projection, env, &mut out)?;
                        }
                        env.reset(m);
                    }
                    Ok(())
                };
                let r = run();
                env.row = saved;
                r
            }
        };
        env.reset(mark);
        result?;
        Ok(Value::Bag(out))
    }

    fn project(&mut self, projection: &[Expr], env: &mut Env, out: &mut Vec<Value>) -> Result<()> {
        if projection.len() == 1 {
            let v = self.eval_expr(&projection[0], env)?;
            push_flat(out, v);
        } else {
            let row = projection.iter().map(|p| self.eval_expr(p, env)).collect::<Result<Vec<_>>>()?;
            out.push(Value::Tuple(row.into_iter().map(unwrap_single).collect()));
        }
        Ok(())
    }

    fn conditions_hold(&mut self, filter: &[Condition], env: &mut Env) -> Result<bool> {
        for c in filter {
            if !self.condition(c, env)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Calls `visit` once per combination of bindings satisfying `filter`.
    /// A leading `V in (S)` or `V = e` condition on a single binding iterates
    /// the elements of `S` (or `e`) in their order, keeping instances of the
    /// binding's type; otherwise all instances are enumerated in id order.
    pub(crate) fn for_each_match(
        &mut self,
        bindings: &[crate::osql::ast::Binding],
        filter: &[Condition],
        env: &mut Env,
        visit: &mut Visit<'_>,
    ) -> Result<()> {
        let Some((first, rest)) = bindings.split_first() else {
            let mark = env.mark();
            let hold = self.conditions_hold(filter, env);
            let r = match hold {
                Ok(true) => visit(self, env),
                Ok(false) => Ok(()),
                Err(e) => Err(e),
            };
            env.reset(mark);
            return r;
        };
        if self.store.type_def(&first.type_name).is_none() {
            return Err(Error::UnknownType(first.type_name.clone()));
        }
        let (candidates, filter) = match (rest.is_empty(), filter.split_first()) {
            (true, Some((Condition::In { item: Expr::Ident(v), set }, tail)))
                if *v == first.var && !mentions(set, v) =>
            {
                (self.eval_expr(set, env)?.elements(), tail)
            }
            (true, Some((Condition::Compare { op: CompareOp::Eq, lhs: Expr::Ident(v), rhs }, tail)))
                if *v == first.var && !mentions(rhs, v) =>
            {
                (self.eval_expr(rhs, env)?.elements(), tail)
            }
            _ => (self.store.instances_of(&first.type_name)?.into_iter().map(Value::Object).collect(), filter),
        };
        for c in candidates {
            let Some(oid) = c.as_object() else { continue };
            if !self.store.is_instance_of(oid, &first.type_name) {
                continue;
            }
            let mark = env.mark();
            env.bind(&first.var, Value::Object(oid));
            let r = self.for_each_match(rest, filter, env, visit);
            env.reset(mark);
            r?;
        }
        Ok(())
    }

    fn condition(&mut self, c: &Condition, env: &mut Env) -> Result<bool> {
        match c {
            Condition::Compare { op: CompareOp::Eq, lhs: Expr::Ident(name), rhs } if !self.ident_bound(name, env) => {
                // `y = expr` with `y` unbound introduces `y`.
                let v = self.eval_expr(rhs, env)?;
                env.bind(name, v);
                Ok(true)
            }
            Condition::Compare { op, lhs, rhs } => {
                let a = self.eval_expr(lhs, env)?;
                let b = self.eval_expr(rhs, env)?;
                if *op == CompareOp::Eq {
                    return Ok(values_equal(&a, &b));
                }
                if *op == CompareOp::Ne {
                    return Ok(!values_equal(&a, &b));
                }
                let (a, b) = (unwrap_single(a), unwrap_single(b));
                let ord = match (a.as_f64(), b.as_f64()) {
                    (Some(x), Some(y)) => x.partial_cmp(&y),
                    _ => match (&a, &b) {
                        (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
                        _ => None,
                    },
                };
                let ord = ord.ok_or_else(|| {
                    Error::mismatch(format!("cannot order {} and {}", a.type_label(), b.type_label()))
                })?;
                Ok(match op {
                    CompareOp::Lt => ord.is_lt(),
                    CompareOp::Le => ord.is_le(),
                    CompareOp::Gt => ord.is_gt(),
                    CompareOp::Ge => ord.is_ge(),
                    CompareOp::Eq | CompareOp::Ne => unreachable!(),
                })
            }
            Condition::In { item, set } => {
                let a = self.eval_expr(item, env)?;
                let s = self.eval_expr(set, env)?;
                Ok(s.elements().iter().any(|e| values_equal(&a, e)))
            }
        }
    }

    // ----- set -----

    pub(crate) fn exec_set(&mut self, s: &SetStmt, env: &mut Env) -> Result<()> {
        match &s.each {
            None => self.assign(s, env),
            Some(each) => self.for_each_match(&each.bindings, &each.filter, env, &mut |db, env| db.assign(s, env)),
        }
    }

    fn assign(&mut self, s: &SetStmt, env: &mut Env) -> Result<()> {
        for oid in self.eval_objects(&s.target, env)? {
            let sig = self
                .store
                .resolve_sig(oid, &s.function)?
                .cloned()
                .ok_or_else(|| Error::UnknownFunction(s.function.clone()))?;
            if let FunctionKind::Foreign(name) = &sig.kind {
                let v = self.eval_expr(&s.value, env)?;
                netcore::foreign_set(self, name, oid, v)?;
                continue;
            }
            if let Some(role) = StreamRole::from_function(&s.function) {
                if let Expr::Select(sel) = &s.value {
                    crate::envops::bind_stream(self, oid, role, (**sel).clone())?;
                    continue;
                }
                let v = self.eval_expr(&s.value, env)?;
                self.catalog.streams.remove(&(oid, role));
                let v = if v.is_null() { v } else { Value::Stream(v.to_stream()?) };
                self.set_value(&s.function, oid, v)?;
                continue;
            }
            let v = self.eval_for(&sig, &s.value, env)?;
            self.set_value(&s.function, oid, v)?;
        }
        Ok(())
    }

    // ----- procedures -----

    /// Runs a query-language function body against `arg`.
    pub fn call_dsl_function(&mut self, name: &str, arg: ObjectId) -> Result<()> {
        let func: Arc<DslFunction> =
            self.catalog.functions.get(name).cloned().ok_or_else(|| Error::UnknownFunction(name.to_string()))?;
        if self.call_stack.iter().any(|n| n == name) {
            return Err(Error::Recursion(name.to_string()));
        }
        self.store.object(arg)?;
        if !self.store.is_instance_of(arg, &func.param_type) {
            return Err(Error::mismatch(format!("`{name}` expects a {}, {arg} is not one", func.param_type)));
        }
        self.call_stack.push(name.to_string());
        let mut env = Env::with(&func.param, Value::Object(arg));
        let result = func.body.iter().try_for_each(|stmt| self.exec_set(stmt, &mut env));
        self.call_stack.pop();
        result
    }

    /// Runs the procedure `name` on `unit`: a query-language function if one
    /// is defined, else the native of that name.
    pub fn call_procedure(&mut self, name: &str, unit: ObjectId) -> Result<()> {
        if self.catalog.functions.contains_key(name) {
            return self.call_dsl_function(name, unit);
        }
        match natives::lookup(name) {
            Some(native) => native(self, unit),
            None => Err(Error::UnknownFunction(name.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(db: &mut Database, src: &str) -> Value {
        db.query(src).unwrap()
    }

    #[test]
    fn arithmetic_precedence_and_division() {
        let mut db = Database::new();
        assert_eq!(eval(&mut db, "1 + 2 * 3"), Value::Integer(7));
        assert_eq!(eval(&mut db, "7 / 2"), Value::Real(3.5));
        assert_eq!(eval(&mut db, "1 - 0.25"), Value::Real(0.75));
        assert_eq!(eval(&mut db, "-(2 - 5)"), Value::Integer(3));
        assert!(matches!(db.query("1 + null"), Err(Error::TypeMismatch(_))));
        assert!(matches!(db.query("nope"), Err(Error::UnknownIdentifier(_))));
    }

    #[test]
    fn select_order_over_ielements() {
        let mut db = Database::new();
        db.exec("Create IElement (Order) instance Input1(1), Input2(2);").unwrap();
        assert_eq!(
            eval(&mut db, "select Order(V) for each IElement V"),
            Value::Bag(vec![Value::Integer(1), Value::Integer(2)])
        );
        assert_eq!(
            eval(&mut db, "select Order(V) for each IElement V where Order(V) > 1"),
            Value::Bag(vec![Value::Integer(2)])
        );
    }

    #[test]
    fn in_condition_keeps_set_order_and_type_filter() {
        let mut db = Database::new();
        db.exec("Create IElement (Order) instance A(1), B(2); Create NUnit (Name) instance C(\"c\");").unwrap();
        assert_eq!(
            eval(&mut db, "select Order(V) for each IElement V where V in (B, C, A, B)"),
            Value::Bag(vec![Value::Integer(2), Value::Integer(1), Value::Integer(2)])
        );
    }

    #[test]
    fn where_equality_binds_fresh_names() {
        let mut db = Database::new();
        db.exec("Create IElement (Order) instance A(3);").unwrap();
        assert_eq!(
            eval(&mut db, "select y for each IElement V where V = A and y = Order(V) * 2"),
            Value::Bag(vec![Value::Integer(6)])
        );
    }

    #[test]
    fn select_from_projects_row_functions() {
        let mut db = Database::new();
        db.exec("Create type t (x Real, y Real); Create t (x, y) instance (0, 1), (1, 1);").unwrap();
        let v = eval(&mut db, "select x, y from t");
        assert_eq!(v.to_stream().unwrap().rows(), &[vec![0.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn recursion_is_rejected() {
        let mut db = Database::new();
        db.exec(
            "Create function Loop(U NUnit) as begin Set Name(U) = \"x\"; Set Name(V) = \"y\" for each NUnit V where V = U and z = Loop(V); end;",
        )
        .unwrap();
        db.exec("Create NUnit (Name) instance N(\"n\");").unwrap();
        assert!(matches!(db.exec("Loop(N);"), Err(Error::Recursion(_))));
    }

    #[test]
    fn dsl_argument_type_is_checked() {
        let mut db = Database::new();
        db.exec("Create function Ident(U PElement) as begin Set Activation(U) = Activation(U); end;").unwrap();
        db.exec("Create NEUNET (Name) instance N(\"n\");").unwrap();
        assert!(matches!(db.exec("Ident(N);"), Err(Error::TypeMismatch(_))));
    }

    #[test]
    fn mentions_walks_nested_selects() {
        let e = crate::osql::parse_expr(
            "(select LinkFrom(L) for each Link L where L in (select Predecessor(P) for each NUnit P where P = U))",
        )
        .unwrap();
        assert!(mentions(&e, "U"));
        assert!(!mentions(&e, "V"));
    }
}
