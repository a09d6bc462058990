//! Forward pass, two-pass backpropagation and the training loop.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::topology::{flatten, hull_resolve, learn_sequence, net_links, predecessors};
use crate::database::Database;
use crate::envops::{self, StreamRole};
use crate::error::{Error, Result};
use crate::object_store::ObjectId;
use crate::value::{fmt_real, Stream, Value};

/// Whether hidden deltas see downstream weights already updated for the
/// current pattern (`Paper`) or the weights the pattern started with (`Textbook`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LearnMode {
    #[default]
    Paper,
    Textbook,
}

impl FromStr for LearnMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(LearnMode::Paper),
            "textbook" => Ok(LearnMode::Textbook),
            other => Err(format!("unknown learn mode `{other}` (expected paper or textbook)")),
        }
    }
}

impl fmt::Display for LearnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnMode::Paper => "paper",
            LearnMode::Textbook => "textbook",
        })
    }
}

/// The pattern being processed by a pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub net: ObjectId,
    pub input_row: Vec<f64>,
    pub check_row: Option<Vec<f64>>,
    pub pattern: usize,
    pub epoch: u64,
    pub mode: LearnMode,
}

impl EvalContext {
    pub fn new(net: ObjectId, input_row: Vec<f64>, check_row: Option<Vec<f64>>, mode: LearnMode) -> Self {
        EvalContext { net, input_row, check_row, pattern: 0, epoch: 0, mode }
    }

    pub(crate) fn row(&self, role: StreamRole) -> Option<&[f64]> {
        match role {
            StreamRole::Input => Some(&self.input_row),
            StreamRole::Check => self.check_row.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub epochs: u64,
    pub patterns: usize,
    /// `(epoch, mse)` at every report interval and at the last epoch. The
    /// error of an epoch is measured on each pattern before its update.
    pub history: Vec<(u64, f64)>,
    /// Outputs per pattern after training.
    pub final_outputs: Vec<Vec<f64>>,
    /// Sum of squared output errors per pattern after training.
    pub final_errors: Vec<f64>,
    pub final_mse: f64,
}

impl fmt::Display for TrainingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (epoch, mse) in &self.history {
            writeln!(f, "epoch {epoch} mse {}", fmt_real(*mse))?;
        }
        for (i, e) in self.final_errors.iter().enumerate() {
            writeln!(f, "pattern {} error {}", i + 1, fmt_real(*e))?;
        }
        write!(f, "final mse {}", fmt_real(self.final_mse))
    }
}

pub(crate) fn with_context<T>(
    db: &mut Database,
    ctx: EvalContext,
    f: impl FnOnce(&mut Database) -> Result<T>,
) -> Result<T> {
    let prev = db.ctx.replace(ctx);
    let r = f(db);
    db.ctx = prev;
    r
}

/// Elements of `kind` among `terminals`, sorted by `Order`, which must run 1..k.
fn ordered_elements(db: &Database, terminals: &[ObjectId], kind: &str) -> Result<Vec<ObjectId>> {
    let mut keyed = Vec::new();
    for &t in terminals {
        if db.store().is_instance_of(t, kind) {
            let order = db
                .store()
                .get_value("Order", t)?
                .as_integer()
                .ok_or_else(|| Error::InvalidOrdering(format!("{kind} {t} has no Order")))?;
            keyed.push((order, t));
        }
    }
    keyed.sort();
    for (i, (order, t)) in keyed.iter().enumerate() {
        if *order != i as i64 + 1 {
            return Err(Error::InvalidOrdering(format!("{kind} orders must be 1..{}, {t} has {order}", keyed.len())));
        }
    }
    Ok(keyed.into_iter().map(|(_, t)| t).collect())
}

fn activation(db: &Database, unit: ObjectId) -> Result<f64> {
    db.store().get_value("Activation", unit)?.as_f64().ok_or(Error::UnsetActivation(unit))
}

/// Input elements take their activation from the row unless they carry their own `InputF`.
fn reads_row_directly(db: &Database, unit: ObjectId) -> bool {
    db.store().is_instance_of(unit, "IElement") && db.store().own_binding("InputF", unit).is_none()
}

/// Procedure bound to `role` for `unit` via Hull, or `default`.
fn resolve_procedure(db: &mut Database, role: &str, unit: ObjectId, default: &str) -> Result<String> {
    match hull_resolve(db, role, unit)? {
        Value::Null => Ok(default.to_string()),
        Value::Function(name) | Value::Text(name) => Ok(name),
        other => Err(Error::mismatch(format!("{role} of {unit} is {}, not a function", other.type_label()))),
    }
}

fn forward_in_ctx(db: &mut Database, net: ObjectId) -> Result<Vec<ObjectId>> {
    let terminals = flatten(db, net)?;
    let inputs = ordered_elements(db, &terminals, "IElement")?;
    let row = db.ctx.as_ref().expect("forward pass runs in a context").input_row.clone();
    if row.len() != inputs.len() {
        return Err(Error::ArityMismatch(format!(
            "input row of {} values for {} input elements",
            row.len(),
            inputs.len()
        )));
    }
    for &u in &terminals {
        if reads_row_directly(db, u) {
            continue;
        }
        for l in predecessors(db, u) {
            if db.store().get_value("LinkWeight", l)?.is_null() {
                return Err(Error::UnsetWeight(l));
            }
        }
    }
    for (i, &u) in inputs.iter().enumerate() {
        if reads_row_directly(db, u) {
            db.set_value("Activation", u, Value::Real(row[i]))?;
        }
    }
    for &u in &terminals {
        if let Some(t) = &mut db.trace {
            *t.unit_visits.entry(u).or_default() += 1;
        }
        if reads_row_directly(db, u) {
            continue;
        }
        for (role, default) in [("InputF", "WeightSum"), ("OutputF", "Ident"), ("ActivationF", "Sigmoid")] {
            let name = resolve_procedure(db, role, u, default)?;
            db.call_procedure(&name, u)?;
        }
    }
    Ok(terminals)
}

fn backward_in_ctx(db: &mut Database, net: ObjectId) -> Result<()> {
    let order = learn_sequence(db, net)?;
    let textbook = db.ctx.as_ref().is_some_and(|c| c.mode == LearnMode::Textbook);
    if textbook {
        db.deferred = Some(Default::default());
    }
    let run = |db: &mut Database| -> Result<()> {
        for u in order {
            if predecessors(db, u).is_empty() {
                continue;
            }
            let name = resolve_procedure(db, "LearnF", u, "BackProp")?;
            db.call_procedure(&name, u)?;
        }
        Ok(())
    };
    let result = run(db);
    let pending = db.deferred.take();
    result?;
    for (link, w) in pending.unwrap_or_default() {
        db.store.set_value("LinkWeight", link, Value::Real(w))?;
    }
    Ok(())
}

fn output_activations(db: &Database, terminals: &[ObjectId]) -> Result<Vec<f64>> {
    ordered_elements(db, terminals, "OElement")?.into_iter().map(|o| activation(db, o)).collect()
}

/// Propagates `row` through the net in update order.
pub fn forward_pass(db: &mut Database, net: ObjectId, row: &[f64]) -> Result<()> {
    let ctx = EvalContext::new(net, row.to_vec(), None, db.settings.mode);
    with_context(db, ctx, |db| forward_in_ctx(db, net).map(|_| ()))
}

/// Runs the forward pass and returns the output activations in `Order`.
pub fn evaluate(db: &mut Database, net: ObjectId, row: &[f64]) -> Result<Vec<f64>> {
    let ctx = EvalContext::new(net, row.to_vec(), None, db.settings.mode);
    with_context(db, ctx, |db| {
        let terminals = forward_in_ctx(db, net)?;
        output_activations(db, &terminals)
    })
}

/// Propagates errors for one pattern and updates weights. Expects the
/// forward pass for `row` to have run.
pub fn backward_pass(db: &mut Database, net: ObjectId, row: &[f64], targets: &[f64]) -> Result<()> {
    let ctx = EvalContext::new(net, row.to_vec(), Some(targets.to_vec()), db.settings.mode);
    with_context(db, ctx, |db| backward_in_ctx(db, net))
}

/// Outputs for every row of the net's input data.
pub fn output_data(db: &mut Database, net: ObjectId) -> Result<Stream> {
    envops::output_return(db, net)?.into_stream()
}

fn squared_errors(targets: &[f64], outputs: &[f64]) -> f64 {
    targets.iter().zip(outputs).fold(0.0, |acc, (t, a)| acc + (t - a) * (t - a))
}

/// Online training: every epoch runs each pattern forward then backward, in stream order.
pub fn learn(db: &mut Database, net: ObjectId, epochs: u64) -> Result<TrainingReport> {
    let inputs = envops::stream(db, net, StreamRole::Input)?;
    let checks = envops::stream(db, net, StreamRole::Check)?;
    if inputs.is_empty() {
        return Err(Error::UnboundData("no training patterns".into()));
    }
    if inputs.len() != checks.len() {
        return Err(Error::RowCountMismatch { inputs: inputs.len(), checks: checks.len() });
    }
    let terminals = flatten(db, net)?;
    let n_in = ordered_elements(db, &terminals, "IElement")?.len();
    let n_out = ordered_elements(db, &terminals, "OElement")?.len();
    if inputs.arity() != n_in {
        return Err(Error::ArityMismatch(format!("input data arity {} for {n_in} input elements", inputs.arity())));
    }
    if checks.arity() != n_out {
        return Err(Error::ArityMismatch(format!("check data arity {} for {n_out} output elements", checks.arity())));
    }
    let interval = db.settings.report_interval.max(1);
    let mode = db.settings.mode;
    let denom = (inputs.len() * n_out.max(1)) as f64;
    let mut history = Vec::new();
    for epoch in 1..=epochs {
        let mut se = 0.0;
        for (p, (x, t)) in inputs.rows().iter().zip(checks.rows()).enumerate() {
            let ctx = EvalContext { net, input_row: x.clone(), check_row: Some(t.clone()), pattern: p, epoch, mode };
            se += with_context(db, ctx, |db| {
                let terminals = forward_in_ctx(db, net)?;
                let e = squared_errors(t, &output_activations(db, &terminals)?);
                backward_in_ctx(db, net)?;
                Ok(e)
            })?;
        }
        if epoch % interval == 0 || epoch == epochs {
            history.push((epoch, se / denom));
        }
    }
    let mut final_outputs = Vec::with_capacity(inputs.len());
    let mut final_errors = Vec::with_capacity(inputs.len());
    for (x, t) in inputs.rows().iter().zip(checks.rows()) {
        let out = evaluate(db, net, x)?;
        final_errors.push(squared_errors(t, &out));
        final_outputs.push(out);
    }
    let final_mse = final_errors.iter().fold(0.0, |acc, e| acc + e) / denom;
    Ok(TrainingReport { epochs, patterns: inputs.len(), history, final_outputs, final_errors, final_mse })
}

/// Sets every link under `net` to weight `v` and clears its delta.
pub fn set_all_weights(db: &mut Database, net: ObjectId, v: f64) -> Result<()> {
    for l in net_links(db, net)? {
        db.set_value("LinkWeight", l, Value::Real(v))?;
        db.set_value("LinkDelta", l, Value::Real(0.0))?;
    }
    Ok(())
}

/// Draws each link weight uniformly from `[lo, hi)` in link order; clears deltas.
pub fn random_weights(db: &mut Database, net: ObjectId, lo: f64, hi: f64, seed: u64) -> Result<()> {
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::mismatch(format!("empty weight range [{lo}, {hi})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in net_links(db, net)? {
        db.set_value("LinkWeight", l, Value::Real(rng.gen_range(lo..hi)))?;
        db.set_value("LinkDelta", l, Value::Real(0.0))?;
    }
    Ok(())
}

pub(crate) fn foreign_get(db: &mut Database, name: &str, oid: ObjectId) -> Result<Value> {
    match name {
        "output_data" => Ok(Value::Stream(output_data(db, oid)?)),
        "weights" => {
            let mut out = Vec::new();
            for l in net_links(db, oid)? {
                out.push(db.store().get_value("LinkWeight", l)?);
            }
            Ok(Value::Bag(out))
        }
        other => Err(Error::UnknownFunction(other.to_string())),
    }
}

pub(crate) fn foreign_set(db: &mut Database, name: &str, oid: ObjectId, v: Value) -> Result<()> {
    match name {
        "weights" => {
            let w =
                v.as_f64().ok_or_else(|| Error::mismatch(format!("Weight expects Real, got {}", v.type_label())))?;
            set_all_weights(db, oid, w)
        }
        _ => Err(Error::ReadOnlyFunction(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learn_mode_parses() {
        assert_eq!("paper".parse::<LearnMode>().unwrap(), LearnMode::Paper);
        assert_eq!("Textbook".parse::<LearnMode>().unwrap(), LearnMode::Textbook);
        assert!("batch".parse::<LearnMode>().is_err());
    }

    #[test]
    fn single_unit_sigmoid_of_two() {
        let mut db = Database::new();
        let net = db.create_instance("NEUNET", vec![]).unwrap();
        let i = db.create_instance("IElement", vec![("Order".into(), Value::Integer(1))]).unwrap();
        let o = db.create_instance("OElement", vec![("Order".into(), Value::Integer(1))]).unwrap();
        db.set_value("NeuronalUnit", net, Value::Bag(vec![Value::Object(i), Value::Object(o)])).unwrap();
        super::super::connect(&mut db, i, o, Some(2.0)).unwrap();
        assert_eq!(evaluate(&mut db, net, &[1.0]).unwrap(), vec![0.8807970779778823]);
    }

    #[test]
    fn unset_weight_is_reported() {
        let mut db = Database::new();
        let net = db.create_instance("NEUNET", vec![]).unwrap();
        let i = db.create_instance("IElement", vec![("Order".into(), Value::Integer(1))]).unwrap();
        let o = db.create_instance("OElement", vec![("Order".into(), Value::Integer(1))]).unwrap();
        db.set_value("NeuronalUnit", net, Value::Bag(vec![Value::Object(i), Value::Object(o)])).unwrap();
        super::super::connect(&mut db, i, o, None).unwrap();
        assert!(matches!(evaluate(&mut db, net, &[1.0]), Err(Error::UnsetWeight(_))));
        assert!(matches!(evaluate(&mut db, net, &[1.0, 2.0]), Err(Error::ArityMismatch(_))));
    }

    #[test]
    fn weights_on_net_without_links() {
        let mut db = Database::new();
        let net = db.create_instance("NEUNET", vec![]).unwrap();
        set_all_weights(&mut db, net, 0.0).unwrap();
        random_weights(&mut db, net, -1.0, 1.0, 7).unwrap();
        assert!(random_weights(&mut db, net, 1.0, 1.0, 7).is_err());
    }
}
