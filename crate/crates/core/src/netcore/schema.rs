use std::collections::BTreeMap;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::object_store::{FunctionSig, TypeDef};
use crate::value::ValueType;

fn def(name: &str, supertypes: &[&str], functions: Vec<FunctionSig>) -> TypeDef {
    TypeDef {
        name: name.to_string(),
        supertypes: supertypes.iter().map(|s| s.to_string()).collect(),
        functions,
        type_defaults: BTreeMap::new(),
    }
}

/// The predefined types, each after the types it references.
pub fn schema_types() -> Vec<TypeDef> {
    use FunctionSig as F;
    use ValueType::*;
    let unit = || ObjectRef("NUnit".into());
    let ordering = || Tuple(vec![unit(), Integer]);
    vec![
        def("NUnit", &[], vec![F::stored("Name", CharacterString)]),
        def(
            "NEUNET",
            &["NUnit"],
            vec![
                F::many("InputData", Real),
                F::many("CheckData", Real),
                F::stored("InputF", FunctionRef),
                F::stored("OutputF", FunctionRef),
                F::stored("ActivationF", FunctionRef),
                F::stored("LearnF", FunctionRef),
                F::stored("LearnRate", Real),
                F::many("NeuronalUnit", unit()),
                F::many("UpdateOrder", ordering()),
                F::many("LearnOrder", ordering()),
                F::foreign("OutputData", "output_data", Real, true),
                F::foreign("Weight", "weights", Real, true),
            ],
        ),
        def(
            "Link",
            &[],
            vec![F::stored("LinkFrom", unit()), F::stored("LinkWeight", Real), F::stored("LinkDelta", Real)],
        ),
        def(
            "PElement",
            &["NUnit"],
            vec![
                F::stored("Activation", Real),
                F::stored("InputF", FunctionRef),
                F::stored("OutputF", FunctionRef),
                F::stored("ActivationF", FunctionRef),
                F::stored("LearnF", FunctionRef),
                F::many("Predecessor", ObjectRef("Link".into())),
            ],
        ),
        def("IElement", &["PElement"], vec![F::stored("Order", Integer)]),
        def("OElement", &["PElement"], vec![F::stored("Order", Integer)]),
    ]
}

/// Registers the neural schema. Installing into a database that already
/// holds identical definitions changes nothing.
pub fn install_schema(db: &mut Database) -> Result<()> {
    let types = schema_types();
    for t in &types {
        if let Some(existing) = db.store.type_def(&t.name) {
            if existing.supertypes != t.supertypes || existing.functions != t.functions {
                return Err(Error::NameCollision(t.name.clone()));
            }
        }
    }
    for t in types {
        let name = t.name.clone();
        if db.store.type_def(&name).is_none() {
            db.store.define_type(t)?;
        }
        db.mark_system_type(&name);
    }
    db.store.register_cascade("Link", "LinkFrom");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn install_is_idempotent_and_empty() {
        let mut db = Database::empty();
        install_schema(&mut db).unwrap();
        let before = db.snapshot_bytes();
        install_schema(&mut db).unwrap();
        assert_eq!(db.snapshot_bytes(), before);
        assert!(db.instances_of("NUnit").unwrap().is_empty());
        db.create_type("BPN2", &["NEUNET"], vec![]).unwrap();
    }

    #[test]
    fn conflicting_user_type_collides() {
        let mut db = Database::empty();
        db.create_type("Link", &[], vec![]).unwrap();
        assert!(matches!(install_schema(&mut db), Err(Error::NameCollision(n)) if n == "Link"));
    }
}
