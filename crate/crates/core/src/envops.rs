//! External net operators: query-bound input streams, insert statements,
//! returned output streams and triggered evaluation on insert.

use serde::{Deserialize, Serialize};

use crate::database::Database;
use crate::error::{Error, Result};
use crate::netcore;
use crate::object_store::ObjectId;
use crate::osql::ast::{Expr, SelectExpr, Source};
use crate::osql::Env;
use crate::value::{Stream, Value, ValueType};

/// Nested trigger firings beyond this depth are rejected.
const MAX_TRIGGER_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StreamRole {
    Input,
    Check,
}

impl StreamRole {
    pub fn function(self) -> &'static str {
        match self {
            StreamRole::Input => "InputData",
            StreamRole::Check => "CheckData",
        }
    }

    pub fn from_function(name: &str) -> Option<StreamRole> {
        match name {
            "InputData" => Some(StreamRole::Input),
            "CheckData" => Some(StreamRole::Check),
            _ => None,
        }
    }
}

/// Evaluates `net` whenever an instance of `watched` is created and stores
/// the outputs as a new `target` instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationTrigger {
    pub watched: String,
    pub net: ObjectId,
    pub projection: Vec<String>,
    pub target: String,
    pub fields: Vec<String>,
    /// Target function receiving a reference to the triggering object.
    pub back_ref: Option<String>,
}

pub fn bind_input(db: &mut Database, net: ObjectId, query: SelectExpr) -> Result<()> {
    bind_stream(db, net, StreamRole::Input, query)
}

pub fn bind_check(db: &mut Database, net: ObjectId, query: SelectExpr) -> Result<()> {
    bind_stream(db, net, StreamRole::Check, query)
}

pub(crate) fn bind_stream(db: &mut Database, net: ObjectId, role: StreamRole, query: SelectExpr) -> Result<()> {
    db.store.object(net)?;
    if !db.store.declares(net, role.function()) {
        return Err(Error::UnknownFunction(role.function().to_string()));
    }
    if let Source::From { type_name, .. } = &query.source {
        for p in &query.projection {
            let Expr::Ident(name) = p else { continue };
            match db.store.type_function(type_name, name)? {
                Some(sig) if sig.multivalued || !matches!(sig.value_type, ValueType::Real | ValueType::Integer) => {
                    return Err(Error::NonNumericProjection(name.clone()))
                }
                _ => {}
            }
        }
    }
    db.store.set_value(role.function(), net, Value::Null)?;
    db.catalog.streams.insert((net, role), query);
    Ok(())
}

/// Current rows of a net's input or check data. Bound queries are
/// re-evaluated on every call.
pub fn stream(db: &mut Database, net: ObjectId, role: StreamRole) -> Result<Stream> {
    if let Some(query) = db.catalog.streams.get(&(net, role)).cloned() {
        let ctx = db.ctx.take();
        let v = db.eval_select(&query, &mut Env::new());
        db.ctx = ctx;
        return match v? {
            Value::Stream(s) => Ok(s),
            other => other.to_stream().map_err(|e| match e {
                Error::TypeMismatch(m) => Error::NonNumericProjection(m),
                e => e,
            }),
        };
    }
    match db.store.get_value(role.function(), net)? {
        Value::Null => Err(Error::UnboundData(format!("{} of {net}", role.function()))),
        v => v.to_stream(),
    }
}

pub fn register_trigger(db: &mut Database, mut t: EvaluationTrigger) -> Result<()> {
    for ty in [&t.watched, &t.target] {
        if db.store.type_def(ty).is_none() {
            return Err(Error::UnknownType(ty.clone()));
        }
    }
    db.store.object(t.net)?;
    if !db.store.is_instance_of(t.net, "NEUNET") {
        return Err(Error::mismatch(format!("{} is not a net", t.net)));
    }
    for f in &t.projection {
        if db.store.type_function(&t.watched, f)?.is_none() {
            return Err(Error::UnknownFunction(f.clone()));
        }
    }
    for f in &t.fields {
        let sig = db.store.type_function(&t.target, f)?.ok_or_else(|| Error::UnknownFunction(f.clone()))?;
        if sig.multivalued || sig.value_type != ValueType::Real {
            return Err(Error::mismatch(format!("trigger output `{f}` must be a single Real")));
        }
    }
    let refers_back = |vt: &ValueType| matches!(vt, ValueType::ObjectRef(r) if db.store.is_subtype(&t.watched, r));
    match &t.back_ref {
        Some(r) => {
            let sig = db.store.type_function(&t.target, r)?.ok_or_else(|| Error::UnknownFunction(r.clone()))?;
            if sig.multivalued || !refers_back(&sig.value_type) {
                return Err(Error::mismatch(format!("`{r}` cannot refer to a {}", t.watched)));
            }
        }
        None => {
            let def = db.store.type_def(&t.target).expect("checked");
            t.back_ref =
                def.functions.iter().find(|f| !f.multivalued && refers_back(&f.value_type)).map(|f| f.name.clone());
        }
    }
    if db.store.is_subtype(&t.target, &t.watched) {
        return Err(Error::Recursion(format!("trigger on {} inserts into itself", t.watched)));
    }
    db.catalog.triggers.push(t);
    Ok(())
}

/// Fires every trigger watching a type of `oid`, in registration order.
pub(crate) fn on_insert(db: &mut Database, oid: ObjectId) -> Result<()> {
    let matching: Vec<EvaluationTrigger> =
        db.catalog.triggers.iter().filter(|t| db.store.is_instance_of(oid, &t.watched)).cloned().collect();
    if matching.is_empty() {
        return Ok(());
    }
    if db.trigger_depth >= MAX_TRIGGER_DEPTH {
        return Err(Error::Recursion("trigger chain too deep".into()));
    }
    db.trigger_depth += 1;
    let result = matching.iter().try_for_each(|t| fire(db, t, oid));
    db.trigger_depth -= 1;
    result
}

fn fire(db: &mut Database, t: &EvaluationTrigger, oid: ObjectId) -> Result<()> {
    let mut row = Vec::with_capacity(t.projection.len());
    for f in &t.projection {
        let v = db.store.get_value(f, oid)?;
        row.push(v.as_f64().ok_or_else(|| Error::ArityMismatch(format!("projected field `{f}` of {oid} is unset")))?);
    }
    let outputs = netcore::evaluate(db, t.net, &row)?;
    if outputs.len() != t.fields.len() {
        return Err(Error::ArityMismatch(format!("{} outputs for {} fields", outputs.len(), t.fields.len())));
    }
    let mut inits: Vec<(String, Value)> = t.fields.iter().cloned().zip(outputs.into_iter().map(Value::Real)).collect();
    if let Some(r) = &t.back_ref {
        inits.push((r.clone(), Value::Object(oid)));
    }
    db.insert_object(&t.target, inits)?;
    Ok(())
}

/// Inserts one `target` instance per row; returns the row count.
pub fn insert_rows(db: &mut Database, target: &str, fields: &[String], rows: &[Vec<f64>]) -> Result<usize> {
    if db.store.type_def(target).is_none() {
        return Err(Error::UnknownType(target.to_string()));
    }
    for f in fields {
        match db.store.type_function(target, f)? {
            Some(sig) if !sig.multivalued && matches!(sig.value_type, ValueType::Real) => {}
            _ => return Err(Error::mismatch(format!("`{target}` has no Real function `{f}`"))),
        }
    }
    for row in rows {
        if row.len() != fields.len() {
            return Err(Error::ArityMismatch(format!("row of {} values for {} fields", row.len(), fields.len())));
        }
        let inits = fields.iter().cloned().zip(row.iter().map(|x| Value::Real(*x))).collect();
        db.insert_object(target, inits)?;
    }
    Ok(rows.len())
}

/// Evaluates the net over its input data and stores each output row as a
/// `target` instance.
pub fn output_insert(db: &mut Database, net: ObjectId, target: &str, fields: &[String]) -> Result<usize> {
    db.atomic(|db| {
        let out = netcore::output_data(db, net)?;
        insert_rows(db, target, fields, out.rows())
    })
}

/// Output rows of the net over its input data, evaluated one row per pull.
pub fn output_return(db: &mut Database, net: ObjectId) -> Result<OutputRows<'_>> {
    let inputs = stream(db, net, StreamRole::Input)?.into_rows().into_iter();
    Ok(OutputRows { db, net, inputs })
}

pub struct OutputRows<'a> {
    db: &'a mut Database,
    net: ObjectId,
    inputs: std::vec::IntoIter<Vec<f64>>,
}

impl OutputRows<'_> {
    pub fn into_stream(self) -> Result<Stream> {
        let rows = self.collect::<Result<Vec<_>>>()?;
        Stream::from_rows(rows)
    }
}

impl Iterator for OutputRows<'_> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = self.inputs.next()?;
        Some(netcore::evaluate(self.db, self.net, &row))
    }
}
