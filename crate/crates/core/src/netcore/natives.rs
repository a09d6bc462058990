//! Native unit procedures. Each mirrors the arithmetic of its
//! query-language counterpart operation for operation.

use super::topology::{hull_resolve, predecessors};
use crate::database::Database;
use crate::error::{Error, Result};
use crate::object_store::ObjectId;
use crate::value::Value;

pub type NativeProc = fn(&mut Database, ObjectId) -> Result<()>;

pub const NATIVE_NAMES: [&str; 6] = ["WeightSum", "WeightSumI", "Sigmoid", "Ident", "BackProp", "BackPropO"];

pub fn lookup(name: &str) -> Option<NativeProc> {
    Some(match name {
        "WeightSum" => weight_sum,
        "WeightSumI" => weight_sum_i,
        "Sigmoid" => sigmoid_proc,
        "Ident" => ident_proc,
        "BackProp" => back_prop,
        "BackPropO" => back_prop_o,
        _ => return None,
    })
}

/// `(1 + e^-x)^-1`; saturates to 0 or 1 for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn ident(x: f64) -> f64 {
    x
}

fn real(db: &Database, function: &str, oid: ObjectId) -> Result<Option<f64>> {
    Ok(db.store().get_value(function, oid)?.as_f64())
}

fn activation(db: &Database, unit: ObjectId) -> Result<f64> {
    real(db, "Activation", unit)?.ok_or(Error::UnsetActivation(unit))
}

fn link_from(db: &Database, link: ObjectId) -> Result<ObjectId> {
    db.store()
        .get_value("LinkFrom", link)?
        .as_object()
        .ok_or_else(|| Error::mismatch(format!("link {link} has no source")))
}

fn weight(db: &Database, link: ObjectId) -> Result<f64> {
    real(db, "LinkWeight", link)?.ok_or(Error::UnsetWeight(link))
}

fn order(db: &Database, unit: ObjectId) -> Result<i64> {
    db.store()
        .get_value("Order", unit)?
        .as_integer()
        .ok_or_else(|| Error::InvalidOrdering(format!("{unit} has no Order")))
}

/// Σ Activation(LinkFrom(L)) · LinkWeight(L) over incoming links, folded from 0.
fn weight_sum(db: &mut Database, unit: ObjectId) -> Result<()> {
    let mut s = 0.0;
    for l in predecessors(db, unit) {
        s += activation(db, link_from(db, l)?)? * weight(db, l)?;
    }
    db.set_value("Activation", unit, Value::Real(s))
}

/// Weighted sum of the current input row's components selected by the
/// sources' `Order`.
fn weight_sum_i(db: &mut Database, unit: ObjectId) -> Result<()> {
    let row = db
        .ctx
        .as_ref()
        .map(|c| c.input_row.clone())
        .ok_or_else(|| Error::UnboundData("InputData outside a pass".into()))?;
    let mut s = 0.0;
    for l in predecessors(db, unit) {
        let x = crate::osql::builtins::valpos(&row, order(db, link_from(db, l)?)?)?;
        s += x * weight(db, l)?;
    }
    db.set_value("Activation", unit, Value::Real(s))
}

fn sigmoid_proc(db: &mut Database, unit: ObjectId) -> Result<()> {
    let a = activation(db, unit)?;
    db.set_value("Activation", unit, Value::Real(sigmoid(a)))
}

fn ident_proc(db: &mut Database, unit: ObjectId) -> Result<()> {
    let a = activation(db, unit)?;
    db.set_value("Activation", unit, Value::Real(ident(a)))
}

/// Stores `delta` on every incoming link, then moves each weight by
/// `(LR · delta) · Activation(source)`.
fn apply_delta(db: &mut Database, unit: ObjectId, delta: f64) -> Result<()> {
    let links = predecessors(db, unit);
    for &l in &links {
        db.set_value("LinkDelta", l, Value::Real(delta))?;
    }
    let lr = hull_resolve(db, "LearnRate", unit)?.as_f64().ok_or(Error::MissingLearnRate(unit))?;
    for &l in &links {
        let a_from = activation(db, link_from(db, l)?)?;
        let w = weight(db, l)?;
        let d = real(db, "LinkDelta", l)?.unwrap_or(0.0);
        db.set_value("LinkWeight", l, Value::Real(w + lr * d * a_from))?;
    }
    Ok(())
}

/// Error term of an output element: `(t - a) · (a · (1 - a))`.
fn back_prop_o(db: &mut Database, unit: ObjectId) -> Result<()> {
    let a = activation(db, unit)?;
    let targets = db.ctx.as_ref().and_then(|c| c.check_row.clone()).ok_or(Error::MissingTargets(unit))?;
    let t = crate::osql::builtins::valpos(&targets, order(db, unit)?)?;
    apply_delta(db, unit, (t - a) * (a * (1.0 - a)))
}

/// Error term of a hidden element: `(Σ LinkDelta(M) · LinkWeight(M)) · (a · (1 - a))`
/// over links `M` leaving the unit, in id order. Output elements use
/// [`back_prop_o`].
fn back_prop(db: &mut Database, unit: ObjectId) -> Result<()> {
    if db.store().is_instance_of(unit, "OElement") {
        return back_prop_o(db, unit);
    }
    let a = activation(db, unit)?;
    let mut s = 0.0;
    for m in db.store().instances_of("Link")? {
        if db.store().get_value("LinkFrom", m)?.as_object() == Some(unit) {
            let d = real(db, "LinkDelta", m)?.unwrap_or(0.0);
            s += d * weight(db, m)?;
        }
    }
    apply_delta(db, unit, s * (a * (1.0 - a)))
}
