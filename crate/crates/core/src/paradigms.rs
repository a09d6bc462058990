//! The predefined backpropagation paradigm and its construction macros.

use crate::database::Database;
use crate::error::{Error, Result};
use crate::netcore::{connect_all, members};
use crate::object_store::ObjectId;
use crate::value::Value;

pub const LAYERS: [&str; 3] = ["Input", "Hidden", "Output"];

/// Registers type `BPN` (a NEUNET whose dynamics default to weighted sum,
/// identity output, sigmoid activation and backpropagation).
pub fn install(db: &mut Database) -> Result<()> {
    if db.store.type_def("BPN").is_none() {
        db.store.create_type("BPN", &["NEUNET"], vec![])?;
    } else if db.store.type_def("BPN").is_some_and(|t| t.supertypes != ["NEUNET"]) {
        return Err(Error::NameCollision("BPN".into()));
    }
    for (f, proc_name) in
        [("InputF", "WeightSum"), ("OutputF", "Ident"), ("ActivationF", "Sigmoid"), ("LearnF", "BackProp")]
    {
        db.store.set_type_default("BPN", f, Value::Function(proc_name.into()))?;
    }
    db.mark_system_type("BPN");
    Ok(())
}

/// Creates the empty `Input`, `Hidden` and `Output` layers of a BPN net.
pub fn initialize_neural_net(db: &mut Database, net: ObjectId) -> Result<()> {
    db.store.object(net)?;
    if !db.store.is_instance_of(net, "BPN") {
        return Err(Error::mismatch(format!("{net} is not a BPN")));
    }
    if !members(db, net).is_empty() {
        return Err(Error::AlreadyInitialized(net));
    }
    let mut layers = Vec::new();
    for name in LAYERS {
        layers.push(db.insert_object("NEUNET", vec![("Name".into(), Value::Text(name.into()))])?);
    }
    let keyed = |keys: [i64; 3]| {
        Value::Bag(
            layers.iter().zip(keys).map(|(l, k)| Value::Tuple(vec![Value::Object(*l), Value::Integer(k)])).collect(),
        )
    };
    let (update, learn) = (keyed([1, 2, 3]), keyed([3, 2, 1]));
    db.set_value("NeuronalUnit", net, Value::Bag(layers.iter().map(|l| Value::Object(*l)).collect()))?;
    db.set_value("UpdateOrder", net, update)?;
    db.set_value("LearnOrder", net, learn)?;
    Ok(())
}

fn layer_named(db: &Database, net: ObjectId, name: &str) -> Option<ObjectId> {
    members(db, net).into_iter().find(|m| matches!(db.store.get_value("Name", *m), Ok(Value::Text(n)) if n == name))
}

/// Fills a layer with `n` elements. Once all three layers hold elements,
/// every layer is connected to every later layer with weight 0.0.
pub fn layer_size(db: &mut Database, net: ObjectId, layer: &str, n: i64) -> Result<()> {
    db.store.object(net)?;
    if !LAYERS.contains(&layer) {
        return Err(Error::UnknownLayer(layer.to_string()));
    }
    let lid = layer_named(db, net, layer).ok_or_else(|| Error::UnknownLayer(layer.to_string()))?;
    if n < 1 {
        return Err(Error::InvalidLayerSize(n));
    }
    if !members(db, lid).is_empty() {
        return Err(Error::LayerNotEmpty(layer.to_string()));
    }
    let mut units = Vec::new();
    for i in 1..=n {
        let name = Value::Text(format!("{layer}{i}"));
        let unit = match layer {
            "Input" => {
                db.insert_object("IElement", vec![("Name".into(), name), ("Order".into(), Value::Integer(i))])?
            }
            "Output" => db.insert_object(
                "OElement",
                vec![
                    ("Name".into(), name),
                    ("Order".into(), Value::Integer(i)),
                    ("LearnF".into(), Value::Function("BackPropO".into())),
                ],
            )?,
            _ => db.insert_object("PElement", vec![("Name".into(), name)])?,
        };
        units.push(Value::Object(unit));
    }
    db.set_value("NeuronalUnit", lid, Value::Bag(units))?;
    let ids: Vec<ObjectId> = LAYERS.iter().filter_map(|l| layer_named(db, net, l)).collect();
    if ids.len() == LAYERS.len() && ids.iter().all(|l| !members(db, *l).is_empty()) {
        connect_all(db, ids[0], &ids[1..], Some(0.0))?;
        connect_all(db, ids[1], &ids[2..], Some(0.0))?;
    }
    Ok(())
}
