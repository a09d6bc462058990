//! Typed object graph: types with inheritance, object identifiers, and
//! function-value storage.
//!
//! Function values resolve in a fixed order: the object's own binding, then
//! the default of the most-derived type that declares one (types are searched
//! newest-acquired first, each followed by its supertypes depth-first), then
//! `Null`.

mod snapshot;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::{Value, ValueType};

pub use snapshot::{Snapshot, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionKind {
    Stored,
    /// Computed by a query-language function body of the given name.
    Derived(String),
    /// Computed natively by the engine.
    Foreign(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSig {
    pub name: String,
    pub kind: FunctionKind,
    pub value_type: ValueType,
    pub multivalued: bool,
}

impl FunctionSig {
    pub fn stored(name: impl Into<String>, value_type: ValueType) -> Self {
        FunctionSig { name: name.into(), kind: FunctionKind::Stored, value_type, multivalued: false }
    }

    pub fn many(name: impl Into<String>, value_type: ValueType) -> Self {
        FunctionSig { multivalued: true, ..FunctionSig::stored(name, value_type) }
    }

    pub fn foreign(name: impl Into<String>, builtin: &str, value_type: ValueType, multivalued: bool) -> Self {
        FunctionSig { name: name.into(), kind: FunctionKind::Foreign(builtin.to_string()), value_type, multivalued }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDef {
    pub name: String,
    pub supertypes: Vec<String>,
    pub functions: Vec<FunctionSig>,
    #[serde(default)]
    pub type_defaults: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub oid: ObjectId,
    /// Types in acquisition order.
    pub types: Vec<String>,
    pub bindings: BTreeMap<String, Value>,
}

/// Deleting an object also deletes every instance of `type_name` whose
/// `function` refers to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cascade {
    pub type_name: String,
    pub function: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectStore {
    types: BTreeMap<String, TypeDef>,
    objects: BTreeMap<ObjectId, ObjectInstance>,
    next_oid: u64,
    cascades: Vec<Cascade>,
}

impl ObjectStore {
    pub fn new() -> Self {
        ObjectStore { next_oid: 1, ..Default::default() }
    }

    pub fn create_type(&mut self, name: &str, supertypes: &[&str], functions: Vec<FunctionSig>) -> Result<&TypeDef> {
        self.define_type(TypeDef {
            name: name.to_string(),
            supertypes: supertypes.iter().map(|s| s.to_string()).collect(),
            functions,
            type_defaults: BTreeMap::new(),
        })
    }

    pub fn define_type(&mut self, def: TypeDef) -> Result<&TypeDef> {
        if self.types.contains_key(&def.name) {
            return Err(Error::DuplicateType(def.name));
        }
        // A new type can only close a cycle through itself.
        if def.supertypes.iter().any(|s| s == &def.name) {
            return Err(Error::CyclicHierarchy(def.name));
        }
        if let Some(missing) = def.supertypes.iter().find(|s| !self.types.contains_key(*s)) {
            return Err(Error::UnknownSupertype(missing.clone()));
        }
        let mut seen = BTreeSet::new();
        for f in &def.functions {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::NameCollision(f.name.clone()));
            }
            if let ValueType::ObjectRef(t) = &f.value_type {
                if t != &def.name && !self.types.contains_key(t) {
                    return Err(Error::UnknownType(t.clone()));
                }
            }
        }
        let name = def.name.clone();
        self.types.insert(name.clone(), def);
        Ok(&self.types[&name])
    }

    pub fn type_def(&self, name: &str) -> Option<&TypeDef> {
        self.types.get(name)
    }

    pub fn types(&self) -> impl Iterator<Item = &TypeDef> {
        self.types.values()
    }

    pub fn set_type_default(&mut self, type_name: &str, function: &str, value: Value) -> Result<()> {
        let sig = self
            .lineage(type_name)?
            .iter()
            .find_map(|t| self.types[t].functions.iter().find(|f| f.name == function))
            .cloned()
            .ok_or_else(|| Error::UnknownFunction(function.to_string()))?;
        let value = self.check_value(&sig, value)?;
        self.types.get_mut(type_name).expect("checked").type_defaults.insert(function.to_string(), value);
        Ok(())
    }

    /// The type followed by all its supertypes, depth-first, without repeats.
    pub fn lineage(&self, type_name: &str) -> Result<Vec<String>> {
        if !self.types.contains_key(type_name) {
            return Err(Error::UnknownType(type_name.to_string()));
        }
        let mut out = Vec::new();
        self.collect_lineage(type_name, &mut out);
        Ok(out)
    }

    fn collect_lineage(&self, type_name: &str, out: &mut Vec<String>) {
        if out.iter().any(|t| t == type_name) {
            return;
        }
        out.push(type_name.to_string());
        if let Some(def) = self.types.get(type_name) {
            for s in &def.supertypes {
                self.collect_lineage(s, out);
            }
        }
    }

    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.types.get(sub).is_some_and(|d| d.supertypes.iter().any(|s| self.is_subtype(s, sup)))
    }

    /// Visits the object's types in resolution order and returns the first hit.
    /// Shared supertypes may be visited twice, which cannot change a first hit.
    fn find_in_types<'a, T>(&'a self, obj: &ObjectInstance, f: &mut impl FnMut(&'a TypeDef) -> Option<T>) -> Option<T> {
        obj.types.iter().rev().find_map(|t| self.find_in_lineage(t, f))
    }

    fn find_in_lineage<'a, T>(&'a self, type_name: &str, f: &mut impl FnMut(&'a TypeDef) -> Option<T>) -> Option<T> {
        let def = self.types.get(type_name)?;
        if let Some(hit) = f(def) {
            return Some(hit);
        }
        def.supertypes.iter().find_map(|s| self.find_in_lineage(s, f))
    }

    /// Most-derived declaration of `function` visible on `oid`.
    pub fn resolve_sig(&self, oid: ObjectId, function: &str) -> Result<Option<&FunctionSig>> {
        let obj = self.object(oid)?;
        Ok(self.find_in_types(obj, &mut |d| d.functions.iter().find(|f| f.name == function)))
    }

    /// Declaration of `function` on a type or its supertypes.
    pub fn type_function(&self, type_name: &str, function: &str) -> Result<Option<&FunctionSig>> {
        Ok(self.lineage(type_name)?.iter().find_map(|t| self.types[t].functions.iter().find(|f| f.name == function)))
    }

    pub fn declares(&self, oid: ObjectId, function: &str) -> bool {
        matches!(self.resolve_sig(oid, function), Ok(Some(_)))
    }

    /// Whether any type in the store declares `function`.
    pub fn is_declared_anywhere(&self, function: &str) -> bool {
        self.types.values().any(|t| t.functions.iter().any(|f| f.name == function))
    }

    pub fn object(&self, oid: ObjectId) -> Result<&ObjectInstance> {
        self.objects.get(&oid).ok_or(Error::UnknownObject(oid))
    }

    pub fn contains(&self, oid: ObjectId) -> bool {
        self.objects.contains_key(&oid)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.values()
    }

    pub fn next_oid(&self) -> ObjectId {
        ObjectId(self.next_oid)
    }

    pub fn is_instance_of(&self, oid: ObjectId, type_name: &str) -> bool {
        self.objects.get(&oid).is_some_and(|o| o.types.iter().any(|t| self.is_subtype(t, type_name)))
    }

    pub fn create_instance(&mut self, type_name: &str, initializers: Vec<(String, Value)>) -> Result<ObjectId> {
        if !self.types.contains_key(type_name) {
            return Err(Error::UnknownType(type_name.to_string()));
        }
        let mut bindings = BTreeMap::new();
        for (function, value) in initializers {
            let sig = self
                .type_function(type_name, &function)?
                .ok_or_else(|| Error::UnknownFunction(function.clone()))?
                .clone();
            if !matches!(sig.kind, FunctionKind::Stored) {
                return Err(Error::ReadOnlyFunction(function));
            }
            let value = self.check_value(&sig, value)?;
            if !value.is_null() {
                bindings.insert(function, value);
            }
        }
        let oid = ObjectId(self.next_oid);
        self.next_oid += 1;
        self.objects.insert(oid, ObjectInstance { oid, types: vec![type_name.to_string()], bindings });
        Ok(oid)
    }

    pub fn add_type(&mut self, oid: ObjectId, type_name: &str) -> Result<()> {
        if !self.types.contains_key(type_name) {
            return Err(Error::UnknownType(type_name.to_string()));
        }
        let obj = self.objects.get_mut(&oid).ok_or(Error::UnknownObject(oid))?;
        if !obj.types.iter().any(|t| t == type_name) {
            obj.types.push(type_name.to_string());
        }
        Ok(())
    }

    pub fn set_value(&mut self, function: &str, oid: ObjectId, value: Value) -> Result<()> {
        let sig = self.resolve_sig(oid, function)?.ok_or_else(|| Error::UnknownFunction(function.to_string()))?.clone();
        if !matches!(sig.kind, FunctionKind::Stored) {
            return Err(Error::ReadOnlyFunction(function.to_string()));
        }
        let value = self.check_value(&sig, value)?;
        let obj = self.objects.get_mut(&oid).expect("resolved above");
        if value.is_null() {
            obj.bindings.remove(function);
        } else {
            obj.bindings.insert(function.to_string(), value);
        }
        Ok(())
    }

    /// Resolved value of `function` on `oid`; references to deleted objects
    /// read as `Null`.
    pub fn get_value(&self, function: &str, oid: ObjectId) -> Result<Value> {
        let obj = self.object(oid)?;
        if let Some(v) = obj.bindings.get(function) {
            return Ok(self.scrub(v));
        }
        if let Some(v) = self.find_in_types(obj, &mut |d| d.type_defaults.get(function)) {
            return Ok(self.scrub(v));
        }
        if self.find_in_types(obj, &mut |d| d.functions.iter().find(|f| f.name == function)).is_some() {
            Ok(Value::Null)
        } else {
            Err(Error::UnknownFunction(function.to_string()))
        }
    }

    /// The object's own binding, ignoring type defaults.
    pub fn own_binding(&self, function: &str, oid: ObjectId) -> Option<&Value> {
        self.objects.get(&oid).and_then(|o| o.bindings.get(function))
    }

    fn scrub(&self, v: &Value) -> Value {
        match v {
            Value::Object(oid) if !self.objects.contains_key(oid) => Value::Null,
            Value::Bag(items) => Value::Bag(items.iter().map(|i| self.scrub(i)).collect()),
            Value::Tuple(items) => Value::Tuple(items.iter().map(|i| self.scrub(i)).collect()),
            other => other.clone(),
        }
    }

    /// All objects of `type_name` or any subtype, in identifier order.
    pub fn instances_of(&self, type_name: &str) -> Result<Vec<ObjectId>> {
        if !self.types.contains_key(type_name) {
            return Err(Error::UnknownType(type_name.to_string()));
        }
        let subtypes: Vec<&str> =
            self.types.keys().map(String::as_str).filter(|t| self.is_subtype(t, type_name)).collect();
        Ok(self
            .objects
            .values()
            .filter(|o| o.types.iter().any(|t| subtypes.contains(&t.as_str())))
            .map(|o| o.oid)
            .collect())
    }

    pub fn register_cascade(&mut self, type_name: &str, function: &str) {
        let c = Cascade { type_name: type_name.to_string(), function: function.to_string() };
        if !self.cascades.contains(&c) {
            self.cascades.push(c);
        }
    }

    /// Removes the object and its cascade dependents; returns every removed id.
    pub fn delete_instance(&mut self, oid: ObjectId) -> Result<Vec<ObjectId>> {
        self.object(oid)?;
        let mut doomed = BTreeSet::from([oid]);
        loop {
            let before = doomed.len();
            for c in &self.cascades {
                for obj in self.objects.values() {
                    if doomed.contains(&obj.oid) || !obj.types.iter().any(|t| self.is_subtype(t, &c.type_name)) {
                        continue;
                    }
                    if let Some(Value::Object(target)) = obj.bindings.get(&c.function) {
                        if doomed.contains(target) {
                            doomed.insert(obj.oid);
                        }
                    }
                }
            }
            if doomed.len() == before {
                break;
            }
        }
        for d in &doomed {
            self.objects.remove(d);
        }
        // Dependents disappear from bags outright rather than reading as Null.
        let dependents: BTreeSet<ObjectId> = doomed.iter().copied().filter(|d| *d != oid).collect();
        if !dependents.is_empty() {
            for obj in self.objects.values_mut() {
                for v in obj.bindings.values_mut() {
                    if let Value::Bag(items) = v {
                        items.retain(|i| !matches!(i, Value::Object(o) if dependents.contains(o)));
                    }
                }
            }
        }
        Ok(doomed.into_iter().collect())
    }

    /// Checks `value` against a declaration and normalizes it (integers widen
    /// to reals, lists become bags for multivalued functions).
    pub fn check_value(&self, sig: &FunctionSig, value: Value) -> Result<Value> {
        if value.is_null() {
            return Ok(Value::Null);
        }
        if !sig.multivalued {
            return self.check_scalar(&sig.name, &sig.value_type, value);
        }
        if let Value::Stream(_) = &value {
            return if sig.value_type == ValueType::Real {
                Ok(value)
            } else {
                Err(Error::mismatch(format!("`{}` cannot hold a stream", sig.name)))
            };
        }
        match value {
            Value::Bag(items) => Ok(Value::Bag(
                items.into_iter().map(|v| self.check_scalar(&sig.name, &sig.value_type, v)).collect::<Result<_>>()?,
            )),
            Value::Tuple(items) => {
                let elementwise: Result<Vec<Value>> =
                    items.iter().cloned().map(|v| self.check_scalar(&sig.name, &sig.value_type, v)).collect();
                match elementwise {
                    Ok(bag) => Ok(Value::Bag(bag)),
                    Err(e) => match self.check_scalar(&sig.name, &sig.value_type, Value::Tuple(items)) {
                        Ok(single) => Ok(Value::Bag(vec![single])),
                        Err(_) => Err(e),
                    },
                }
            }
            scalar => Ok(Value::Bag(vec![self.check_scalar(&sig.name, &sig.value_type, scalar)?])),
        }
    }

    fn check_scalar(&self, function: &str, ty: &ValueType, value: Value) -> Result<Value> {
        let fail = |v: &Value| Error::mismatch(format!("`{function}` expects {ty}, got {}", v.type_label()));
        Ok(match (ty, value) {
            (_, Value::Null) => Value::Null,
            (_, Value::Bag(mut items)) if items.len() == 1 && !matches!(ty, ValueType::Tuple(_)) => {
                return self.check_scalar(function, ty, items.pop().expect("len 1"))
            }
            (ValueType::Real, Value::Real(x)) => Value::Real(x),
            (ValueType::Real, Value::Integer(i)) => Value::Real(i as f64),
            (ValueType::Integer, Value::Integer(i)) => Value::Integer(i),
            (ValueType::CharacterString, Value::Text(s)) => Value::Text(s),
            (ValueType::FunctionRef, Value::Function(f)) | (ValueType::FunctionRef, Value::Text(f)) => {
                Value::Function(f)
            }
            (ValueType::ObjectRef(t), Value::Object(oid)) => {
                if !self.is_instance_of(oid, t) {
                    return Err(Error::mismatch(format!("`{function}` expects a {t}, {oid} is not one")));
                }
                Value::Object(oid)
            }
            (ValueType::Tuple(types), Value::Tuple(items) | Value::Bag(items)) => {
                if types.len() != items.len() {
                    return Err(Error::mismatch(format!(
                        "`{function}` expects a {}-tuple, got {} values",
                        types.len(),
                        items.len()
                    )));
                }
                Value::Tuple(
                    types.iter().zip(items).map(|(t, v)| self.check_scalar(function, t, v)).collect::<Result<_>>()?,
                )
            }
            (_, other) => return Err(fail(&other)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nunit_store() -> ObjectStore {
        let mut s = ObjectStore::new();
        s.create_type("NUnit", &[], vec![FunctionSig::stored("Name", ValueType::CharacterString)]).unwrap();
        s.create_type(
            "NEUNET",
            &["NUnit"],
            vec![
                FunctionSig::stored("LearnRate", ValueType::Real),
                FunctionSig::many("NeuronalUnit", ValueType::ObjectRef("NUnit".into())),
                FunctionSig::stored("ActivationF", ValueType::FunctionRef),
            ],
        )
        .unwrap();
        s
    }

    #[test]
    fn create_type_errors() {
        let mut s = nunit_store();
        assert!(s.instances_of("NUnit").unwrap().is_empty());
        assert!(matches!(s.create_type("T", &["T"], vec![]), Err(Error::CyclicHierarchy(_))));
        assert!(matches!(s.create_type("NUnit", &[], vec![]), Err(Error::DuplicateType(_))));
        assert!(matches!(s.create_type("U", &["Nope"], vec![]), Err(Error::UnknownSupertype(_))));
    }

    #[test]
    fn inherited_functions_resolve() {
        let mut s = nunit_store();
        let net = s.create_instance("NEUNET", vec![("Name".into(), Value::Text("XOR-example".into()))]).unwrap();
        assert_eq!(s.get_value("Name", net).unwrap(), Value::Text("XOR-example".into()));
        assert_eq!(s.get_value("LearnRate", net).unwrap(), Value::Null);
        assert_eq!(s.instances_of("NUnit").unwrap(), vec![net]);
    }

    #[test]
    fn set_value_type_checks() {
        let mut s = nunit_store();
        let u = s.create_instance("NUnit", vec![]).unwrap();
        assert!(matches!(s.set_value("Name", u, Value::Integer(7)), Err(Error::TypeMismatch(_))));
        assert!(matches!(s.set_value("LearnRate", u, Value::Real(1.0)), Err(Error::UnknownFunction(_))));
        let net = s.create_instance("NEUNET", vec![]).unwrap();
        s.set_value("LearnRate", net, Value::Integer(4)).unwrap();
        assert_eq!(s.get_value("LearnRate", net).unwrap(), Value::Real(4.0));
        let a = s.create_instance("NUnit", vec![]).unwrap();
        let b = s.create_instance("NUnit", vec![]).unwrap();
        s.set_value("NeuronalUnit", net, Value::Tuple(vec![Value::Object(b), Value::Object(a)])).unwrap();
        assert_eq!(s.get_value("NeuronalUnit", net).unwrap(), Value::Bag(vec![Value::Object(b), Value::Object(a)]));
    }

    #[test]
    fn instance_binding_shadows_type_default() {
        let mut s = nunit_store();
        s.create_type("BPN", &["NEUNET"], vec![]).unwrap();
        s.set_type_default("BPN", "ActivationF", Value::Function("Sigmoid".into())).unwrap();
        let net = s.create_instance("NEUNET", vec![]).unwrap();
        assert_eq!(s.get_value("ActivationF", net).unwrap(), Value::Null);
        s.add_type(net, "BPN").unwrap();
        s.add_type(net, "BPN").unwrap();
        assert_eq!(s.object(net).unwrap().types.len(), 2);
        assert_eq!(s.get_value("ActivationF", net).unwrap(), Value::Function("Sigmoid".into()));
        s.set_value("ActivationF", net, Value::Function("Ident".into())).unwrap();
        assert_eq!(s.get_value("ActivationF", net).unwrap(), Value::Function("Ident".into()));
        assert!(matches!(s.add_type(net, "Nope"), Err(Error::UnknownType(_))));
    }

    #[test]
    fn unknown_initializer_rejected_without_allocating() {
        let mut s = nunit_store();
        let next = s.next_oid();
        assert!(matches!(
            s.create_instance("NUnit", vec![("Bogus".into(), Value::Null)]),
            Err(Error::UnknownFunction(_))
        ));
        assert!(matches!(s.create_instance("Nope", vec![]), Err(Error::UnknownType(_))));
        assert_eq!(s.next_oid(), next);
    }

    #[test]
    fn delete_cascades_and_ids_are_not_reused() {
        let mut s = nunit_store();
        s.create_type("Link", &[], vec![FunctionSig::stored("LinkFrom", ValueType::ObjectRef("NUnit".into()))])
            .unwrap();
        s.register_cascade("Link", "LinkFrom");
        let net = s.create_instance("NEUNET", vec![]).unwrap();
        let u = s.create_instance("NUnit", vec![]).unwrap();
        let link = s.create_instance("Link", vec![("LinkFrom".into(), Value::Object(u))]).unwrap();
        s.set_value("NeuronalUnit", net, Value::Bag(vec![Value::Object(u), Value::Object(link)])).ok();
        s.set_value("NeuronalUnit", net, Value::Bag(vec![Value::Object(u)])).unwrap();
        let removed = s.delete_instance(u).unwrap();
        assert_eq!(removed, vec![u, link]);
        assert!(matches!(s.get_value("Name", u), Err(Error::UnknownObject(_))));
        assert!(matches!(s.delete_instance(u), Err(Error::UnknownObject(_))));
        assert_eq!(s.get_value("NeuronalUnit", net).unwrap(), Value::Bag(vec![Value::Null]));
        let fresh = s.create_instance("NUnit", vec![]).unwrap();
        assert!(fresh > link);
    }
}
