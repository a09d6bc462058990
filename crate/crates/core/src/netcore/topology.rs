//! Containment, ordering, connection expansion and Hull resolution.

use crate::database::Database;
use crate::error::{Error, Result};
use crate::object_store::ObjectId;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pass {
    Update,
    Learn,
}

fn objects_of(v: &Value) -> Vec<ObjectId> {
    v.elements().iter().filter_map(Value::as_object).collect()
}

/// Direct members of a composite unit in bag order; empty for terminals.
pub fn members(db: &Database, unit: ObjectId) -> Vec<ObjectId> {
    if !db.store().is_instance_of(unit, "NEUNET") {
        return Vec::new();
    }
    db.store().get_value("NeuronalUnit", unit).map(|v| objects_of(&v)).unwrap_or_default()
}

/// The composite unit whose `NeuronalUnit` contains `unit`.
pub fn parent(db: &Database, unit: ObjectId) -> Option<ObjectId> {
    db.store()
        .instances_of("NEUNET")
        .ok()?
        .into_iter()
        .find(|n| matches!(db.store().own_binding("NeuronalUnit", *n), Some(v) if v.elements().contains(&Value::Object(unit))))
}

/// Topmost containing unit, or `unit` itself when uncontained.
pub fn root(db: &Database, unit: ObjectId) -> ObjectId {
    let mut cur = unit;
    while let Some(p) = parent(db, cur) {
        cur = p;
    }
    cur
}

/// Links into `unit`, in bag order.
pub fn predecessors(db: &Database, unit: ObjectId) -> Vec<ObjectId> {
    if !db.store().declares(unit, "Predecessor") {
        return Vec::new();
    }
    db.store().get_value("Predecessor", unit).map(|v| objects_of(&v)).unwrap_or_default()
}

/// The unit whose `Predecessor` holds `link`.
pub fn link_owner(db: &Database, link: ObjectId) -> Option<ObjectId> {
    let target = Value::Object(link);
    db.store()
        .instances_of("PElement")
        .ok()?
        .into_iter()
        .find(|u| matches!(db.store().own_binding("Predecessor", *u), Some(v) if v.elements().contains(&target)))
}

/// Validates a new `NeuronalUnit` value for `net`: members have no other
/// parent, appear once, and do not contain `net`.
pub(crate) fn check_containment(db: &Database, net: ObjectId, value: &Value) -> Result<()> {
    let new_members = objects_of(value);
    let mut ancestors = vec![net];
    let mut cur = net;
    while let Some(p) = parent(db, cur) {
        if ancestors.contains(&p) {
            return Err(Error::CyclicContainment(p));
        }
        ancestors.push(p);
        cur = p;
    }
    for (i, m) in new_members.iter().enumerate() {
        if ancestors.contains(m) {
            return Err(Error::CyclicContainment(*m));
        }
        if new_members[..i].contains(m) {
            return Err(Error::MultipleParents { unit: *m, parent: net });
        }
        if let Some(p) = parent(db, *m) {
            if p != net {
                return Err(Error::MultipleParents { unit: *m, parent: p });
            }
        }
    }
    Ok(())
}

fn order_entries(db: &Database, unit: ObjectId, function: &str) -> Result<Vec<(ObjectId, i64)>> {
    let v = db.store().get_value(function, unit)?;
    v.elements()
        .iter()
        .map(|e| match e {
            Value::Tuple(pair) if pair.len() == 2 => match (pair[0].as_object(), pair[1].as_integer()) {
                (Some(u), Some(k)) => Ok((u, k)),
                _ => Err(Error::InvalidOrdering(format!("malformed {function} entry of {unit}"))),
            },
            _ => Err(Error::InvalidOrdering(format!("malformed {function} entry of {unit}"))),
        })
        .collect()
}

/// Members sorted by the pass's ordering keys (ties keep bag order); unkeyed
/// members follow in bag order. Without learn keys, the learn pass runs the
/// update order backwards.
fn ordered_members(db: &Database, unit: ObjectId, pass: Pass) -> Result<Vec<ObjectId>> {
    let members = members(db, unit);
    let function = match pass {
        Pass::Update => "UpdateOrder",
        Pass::Learn => "LearnOrder",
    };
    let entries = order_entries(db, unit, function)?;
    if entries.is_empty() {
        return Ok(match pass {
            Pass::Update => members,
            Pass::Learn => {
                let mut fwd = ordered_members(db, unit, Pass::Update)?;
                fwd.reverse();
                fwd
            }
        });
    }
    let mut keyed: Vec<(i64, usize, ObjectId)> = Vec::new();
    for (u, k) in &entries {
        let Some(idx) = members.iter().position(|m| m == u) else {
            return Err(Error::InvalidOrdering(format!("{function} of {unit} names non-member {u}")));
        };
        if keyed.iter().any(|(_, _, seen)| seen == u) {
            return Err(Error::InvalidOrdering(format!("{function} of {unit} lists {u} twice")));
        }
        keyed.push((*k, idx, *u));
    }
    keyed.sort();
    let mut out: Vec<ObjectId> = keyed.iter().map(|(_, _, u)| *u).collect();
    out.extend(members.iter().filter(|m| !out.contains(m)).copied().collect::<Vec<_>>());
    Ok(out)
}

fn flatten_pass(db: &Database, unit: ObjectId, pass: Pass, stack: &mut Vec<ObjectId>) -> Result<Vec<ObjectId>> {
    db.store().object(unit)?;
    if stack.contains(&unit) {
        return Err(Error::CyclicContainment(unit));
    }
    if db.store().is_instance_of(unit, "PElement") {
        return Ok(vec![unit]);
    }
    if !db.store().is_instance_of(unit, "NUnit") {
        return Err(Error::mismatch(format!("{unit} is not a neural unit")));
    }
    stack.push(unit);
    let mut out = Vec::new();
    for m in ordered_members(db, unit, pass)? {
        out.extend(flatten_pass(db, m, pass, stack)?);
    }
    stack.pop();
    Ok(out)
}

/// Terminal elements under `unit` in update order.
pub fn flatten(db: &Database, unit: ObjectId) -> Result<Vec<ObjectId>> {
    flatten_pass(db, unit, Pass::Update, &mut Vec::new())
}

/// Terminal elements under `unit` in learn order.
pub fn learn_sequence(db: &Database, unit: ObjectId) -> Result<Vec<ObjectId>> {
    flatten_pass(db, unit, Pass::Learn, &mut Vec::new())
}

/// Every link into a terminal under `net`, in update order.
pub fn net_links(db: &Database, net: ObjectId) -> Result<Vec<ObjectId>> {
    Ok(flatten(db, net)?.into_iter().flat_map(|t| predecessors(db, t)).collect())
}

/// Links every terminal of `from` into every terminal of `to`; returns the
/// new links target-major.
pub fn connect(db: &mut Database, from: ObjectId, to: ObjectId, weight: Option<f64>) -> Result<Vec<ObjectId>> {
    for u in [from, to] {
        db.store().object(u)?;
        if !db.store().is_instance_of(u, "NUnit") {
            return Err(Error::mismatch(format!("{u} is not a neural unit")));
        }
    }
    let contained = parent(db, from).is_some() || parent(db, to).is_some();
    if contained && root(db, from) != root(db, to) {
        return Err(Error::CrossNetConnection { from, to });
    }
    let sources = flatten(db, from)?;
    let targets = flatten(db, to)?;
    let mut created = Vec::new();
    for t in targets {
        let mut preds = db.store().get_value("Predecessor", t)?.elements();
        for &f in &sources {
            let mut inits =
                vec![("LinkFrom".to_string(), Value::Object(f)), ("LinkDelta".to_string(), Value::Real(0.0))];
            if let Some(w) = weight {
                inits.push(("LinkWeight".to_string(), Value::Real(w)));
            }
            let link = db.insert_object("Link", inits)?;
            preds.push(Value::Object(link));
            created.push(link);
        }
        db.set_value("Predecessor", t, Value::Bag(preds))?;
    }
    Ok(created)
}

/// [`connect`] applied to each target in turn.
pub fn connect_all(db: &mut Database, from: ObjectId, to: &[ObjectId], weight: Option<f64>) -> Result<Vec<ObjectId>> {
    let mut out = Vec::new();
    for t in to {
        out.extend(connect(db, from, *t, weight)?);
    }
    Ok(out)
}

/// Nearest non-null value of `function` at `unit` or above it in the
/// containment hierarchy. A link starts at its owning unit.
pub fn hull_resolve(db: &mut Database, function: &str, unit: ObjectId) -> Result<Value> {
    if !db.store().is_declared_anywhere(function) {
        return Err(Error::UnknownFunction(function.to_string()));
    }
    db.store().object(unit)?;
    let mut cur = if db.store().is_instance_of(unit, "Link") {
        match link_owner(db, unit) {
            Some(owner) => owner,
            None => return Ok(Value::Null),
        }
    } else {
        unit
    };
    loop {
        if db.store().declares(cur, function) {
            let v = db.read_function(function, cur)?;
            if !v.is_null() {
                return Ok(v);
            }
        }
        match parent(db, cur) {
            Some(p) => cur = p,
            None => return Ok(Value::Null),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The manual XOR topology without dynamics.
    fn xor_topology() -> Database {
        let mut db = Database::new();
        db.exec(
            "Create NEUNET (Name) instance XOR-Net(\"XOR-example\");
             Create IElement (Order) instance Input1(1), Input2(2);
             Create PElement () instance Hidden;
             Create OElement (Order) instance Output(1);
             Create NEUNET (Name) instance Input(\"Input-Layer\");
             Set NeuronalUnit(XOR-Net) = (Input, Hidden, Output);
             Set NeuronalUnit(Input) = (Input1, Input2);
             Set Predecessor(Input) = (Hidden, Output);
             Set Predecessor(Hidden) = Output;
             Set UpdateOrder(XOR-Net) -> ((Input, 1), (Hidden, 2), (Output, 3));
             Set UpdateOrder(Input) -> ((Input1, 1), (Input2, 2));",
        )
        .unwrap();
        db
    }

    fn ids(db: &Database, names: &[&str]) -> Vec<ObjectId> {
        names.iter().map(|n| db.object_named(n).unwrap()).collect()
    }

    #[test]
    fn flatten_follows_update_order() {
        let db = xor_topology();
        let net = db.object_named("XOR-Net").unwrap();
        assert_eq!(flatten(&db, net).unwrap(), ids(&db, &["Input1", "Input2", "Hidden", "Output"]));
        let hidden = db.object_named("Hidden").unwrap();
        assert_eq!(flatten(&db, hidden).unwrap(), vec![hidden]);
    }

    #[test]
    fn connect_expands_composites() {
        let db = xor_topology();
        let from = |db: &Database, unit: &str| -> Vec<ObjectId> {
            predecessors(db, db.object_named(unit).unwrap())
                .into_iter()
                .map(|l| db.store().get_value("LinkFrom", l).unwrap().as_object().unwrap())
                .collect()
        };
        assert_eq!(from(&db, "Hidden"), ids(&db, &["Input1", "Input2"]));
        assert_eq!(from(&db, "Output"), ids(&db, &["Input1", "Input2", "Hidden"]));
        assert_eq!(net_links(&db, db.object_named("XOR-Net").unwrap()).unwrap().len(), 5);
    }

    #[test]
    fn self_link_is_allowed() {
        let mut db = Database::new();
        let u = db.create_instance("PElement", vec![]).unwrap();
        let links = connect(&mut db, u, u, Some(1.0)).unwrap();
        assert_eq!(links.len(), 1);
        assert_eq!(predecessors(&db, u), links);
    }

    #[test]
    fn containment_has_one_parent_and_no_cycles() {
        let mut db = xor_topology();
        let err =
            db.exec("Create NEUNET (Name) instance Other(\"o\"); Set NeuronalUnit(Other) = (Hidden,);").unwrap_err();
        assert!(matches!(err, Error::MultipleParents { .. }), "{err:?}");
        let err = db.exec("Set NeuronalUnit(Input) = (Input1, XOR-Net);").unwrap_err();
        assert!(matches!(err, Error::CyclicContainment(_)), "{err:?}");
    }

    #[test]
    fn cross_net_connection_is_rejected() {
        let mut db = xor_topology();
        db.exec("Create NEUNET (Name) instance Other(\"o\"); Create PElement () instance Lone; Set NeuronalUnit(Other) = (Lone,);")
            .unwrap();
        let (a, b) = (db.object_named("Hidden").unwrap(), db.object_named("Lone").unwrap());
        assert!(matches!(connect(&mut db, a, b, None), Err(Error::CrossNetConnection { .. })));
    }

    #[test]
    fn hull_finds_nearest_binding() {
        let mut db = xor_topology();
        db.exec("Set LearnRate(XOR-Net) = 4.00; Set InputF(XOR-Net) = WeightSum; Set InputF(Input) = WeightSumI;")
            .unwrap();
        let input1 = db.object_named("Input1").unwrap();
        let hidden = db.object_named("Hidden").unwrap();
        assert_eq!(hull_resolve(&mut db, "LearnRate", input1).unwrap(), Value::Real(4.0));
        assert_eq!(hull_resolve(&mut db, "InputF", input1).unwrap(), Value::Function("WeightSumI".into()));
        assert_eq!(hull_resolve(&mut db, "InputF", hidden).unwrap(), Value::Function("WeightSum".into()));
        let net = db.object_named("XOR-Net").unwrap();
        assert_eq!(hull_resolve(&mut db, "OutputF", net).unwrap(), Value::Null);
        assert!(matches!(hull_resolve(&mut db, "Bogus", net), Err(Error::UnknownFunction(_))));
        let link = predecessors(&db, hidden)[0];
        assert_eq!(hull_resolve(&mut db, "LearnRate", link).unwrap(), Value::Real(4.0));
    }

    #[test]
    fn learn_order_defaults_to_reversed_update_order() {
        let db = xor_topology();
        let net = db.object_named("XOR-Net").unwrap();
        assert_eq!(learn_sequence(&db, net).unwrap(), ids(&db, &["Output", "Hidden", "Input2", "Input1"]));
    }

    #[test]
    fn delete_removes_links_from_predecessor_bags() {
        let mut db = xor_topology();
        let input1 = db.object_named("Input1").unwrap();
        db.delete_instance(input1).unwrap();
        let hidden = db.object_named("Hidden").unwrap();
        assert_eq!(predecessors(&db, hidden).len(), 1);
        assert_eq!(db.instances_of("Link").unwrap().len(), 3);
    }
}
