//! A database session: the object store plus the query-language catalog
//! (session names, functions, stream bindings, triggers).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envops::{self, EvaluationTrigger, StreamRole};
use crate::error::{Error, Result};
use crate::netcore::{self, EvalContext, LearnMode, TrainingReport};
use crate::object_store::{FunctionSig, ObjectId, ObjectStore, Snapshot, TypeDef};
use crate::osql::ast::{DslFunction, Expr, SelectExpr, Statement};
use crate::osql::{parse_script, parse_statement, BuiltinRegistry, Env};
use crate::paradigms;
use crate::value::Value;

const CATALOG_KEY: &str = "catalog";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Settings {
    pub mode: LearnMode,
    /// Epochs between `epoch <n> mse <value>` report lines.
    pub report_interval: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { mode: LearnMode::Paper, report_interval: 100 }
    }
}

/// Per-pattern execution counters, collected while tracing is enabled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub unit_visits: BTreeMap<ObjectId, usize>,
    pub weight_writes: BTreeMap<ObjectId, usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Catalog {
    pub names: BTreeMap<String, ObjectId>,
    pub functions: BTreeMap<String, Arc<DslFunction>>,
    pub streams: BTreeMap<(ObjectId, StreamRole), SelectExpr>,
    pub triggers: Vec<EvaluationTrigger>,
    /// Predefined types; re-declaring one with a compatible body is a no-op.
    pub system_types: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done,
    Value(Value),
    Created(Vec<ObjectId>),
    Count(usize),
    Trained(TrainingReport),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Done | Outcome::Created(_) => Ok(()),
            Outcome::Value(v) => write!(f, "{v}"),
            Outcome::Count(n) => write!(f, "{n} rows"),
            Outcome::Trained(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Database {
    pub(crate) store: ObjectStore,
    pub(crate) catalog: Catalog,
    pub(crate) builtins: BuiltinRegistry,
    pub settings: Settings,
    pub(crate) ctx: Option<EvalContext>,
    /// Textbook mode: weight writes held until the pattern's backward pass ends.
    pub(crate) deferred: Option<BTreeMap<ObjectId, f64>>,
    pub(crate) call_stack: Vec<String>,
    pub(crate) trace: Option<Trace>,
    pub(crate) trigger_depth: usize,
    base_dir: Option<PathBuf>,
}

impl Default for Database {
    fn default() -> Self {
        Self::new()
    }
}

impl Database {
    /// A database with the neural schema and the BPN paradigm installed.
    pub fn new() -> Self {
        let mut db = Self::empty();
        netcore::install_schema(&mut db).expect("schema installs into an empty store");
        paradigms::install(&mut db).expect("paradigms install into a fresh schema");
        db
    }

    /// A database with no predefined types.
    pub fn empty() -> Self {
        Database {
            store: ObjectStore::new(),
            catalog: Catalog::default(),
            builtins: BuiltinRegistry::standard(),
            settings: Settings::default(),
            ctx: None,
            deferred: None,
            call_stack: Vec::new(),
            trace: None,
            trigger_depth: 0,
            base_dir: None,
        }
    }

    pub fn with_settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    pub fn store(&self) -> &ObjectStore {
        &self.store
    }

    pub fn builtins(&self) -> &BuiltinRegistry {
        &self.builtins
    }

    /// Directory against which relative `Import` paths resolve.
    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = Some(dir.into());
    }

    pub(crate) fn resolve_path(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub(crate) fn mark_system_type(&mut self, name: &str) {
        self.catalog.system_types.insert(name.to_string());
    }

    // ----- tracing -----

    pub fn enable_trace(&mut self) {
        self.trace = Some(Trace::default());
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.take()
    }

    // ----- atomicity -----

    /// Runs `f`; on error the store and catalog revert to their prior state.
    pub fn atomic<T>(&mut self, f: impl FnOnce(&mut Database) -> Result<T>) -> Result<T> {
        let store = self.store.clone();
        let catalog = self.catalog.clone();
        let result = f(self);
        if result.is_err() {
            self.store = store;
            self.catalog = catalog;
            self.ctx = None;
            self.deferred = None;
            self.call_stack.clear();
            self.trigger_depth = 0;
        }
        result
    }

    // ----- store operations -----

    pub fn create_type(&mut self, name: &str, supertypes: &[&str], functions: Vec<FunctionSig>) -> Result<TypeDef> {
        self.store.create_type(name, supertypes, functions).cloned()
    }

    /// Creates an object and fires insert triggers; a failing trigger undoes the insert.
    pub fn create_instance(&mut self, type_name: &str, initializers: Vec<(String, Value)>) -> Result<ObjectId> {
        self.atomic(|db| db.insert_object(type_name, initializers))
    }

    pub(crate) fn insert_object(&mut self, type_name: &str, initializers: Vec<(String, Value)>) -> Result<ObjectId> {
        let oid = self.store.create_instance(type_name, initializers)?;
        envops::on_insert(self, oid)?;
        Ok(oid)
    }

    pub fn add_type(&mut self, oid: ObjectId, type_name: &str) -> Result<()> {
        self.store.add_type(oid, type_name)
    }

    pub fn set_value(&mut self, function: &str, oid: ObjectId, value: Value) -> Result<()> {
        match function {
            "NeuronalUnit" => netcore::check_containment(self, oid, &value)?,
            "LinkWeight" => {
                if let Some(t) = &mut self.trace {
                    *t.weight_writes.entry(oid).or_default() += 1;
                }
                if let Some(pending) = &mut self.deferred {
                    if !self.store.declares(oid, function) {
                        return Err(Error::UnknownFunction(function.to_string()));
                    }
                    let w = value.as_f64().ok_or_else(|| {
                        Error::mismatch(format!("LinkWeight expects Real, got {}", value.type_label()))
                    })?;
                    pending.insert(oid, w);
                    return Ok(());
                }
            }
            _ => {}
        }
        self.store.set_value(function, oid, value)
    }

    /// Resolved value of `function` on `oid`, including computed functions.
    pub fn get_value(&mut self, function: &str, oid: ObjectId) -> Result<Value> {
        self.read_function(function, oid)
    }

    pub fn instances_of(&self, type_name: &str) -> Result<Vec<ObjectId>> {
        self.store.instances_of(type_name)
    }

    /// Deletes an object and its dependent links; returns every removed id.
    pub fn delete_instance(&mut self, oid: ObjectId) -> Result<Vec<ObjectId>> {
        let removed = self.store.delete_instance(oid)?;
        let gone: BTreeSet<ObjectId> = removed.iter().copied().collect();
        self.catalog.streams.retain(|(net, _), _| !gone.contains(net));
        self.catalog.triggers.retain(|t| !gone.contains(&t.net));
        Ok(removed)
    }

    // ----- session names -----

    pub fn bind_name(&mut self, name: &str, oid: ObjectId) -> Result<()> {
        if self.catalog.names.contains_key(name) {
            return Err(Error::NameInUse(name.to_string()));
        }
        self.store.object(oid)?;
        self.catalog.names.insert(name.to_string(), oid);
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<ObjectId> {
        self.catalog.names.get(name).copied()
    }

    /// The object bound to `name`.
    pub fn object_named(&self, name: &str) -> Result<ObjectId> {
        self.lookup(name).ok_or_else(|| Error::UnknownIdentifier(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, ObjectId)> {
        self.catalog.names.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn dsl_function(&self, name: &str) -> Option<&DslFunction> {
        self.catalog.functions.get(name).map(|f| f.as_ref())
    }

    /// Stores a query-language function. Names of foreign functions and of
    /// declared stored functions are reserved; native procedures may be overridden.
    pub fn define_function(&mut self, func: DslFunction) -> Result<()> {
        if self.builtins.contains(&func.name) || self.store.is_declared_anywhere(&func.name) {
            return Err(Error::NameCollision(func.name));
        }
        if self.catalog.functions.contains_key(&func.name) {
            return Err(Error::DuplicateFunction(func.name));
        }
        if self.store.type_def(&func.param_type).is_none() {
            return Err(Error::UnknownType(func.param_type));
        }
        self.catalog.functions.insert(func.name.clone(), Arc::new(func));
        Ok(())
    }

    pub fn stream_binding(&self, net: ObjectId, role: StreamRole) -> Option<&SelectExpr> {
        self.catalog.streams.get(&(net, role))
    }

    pub fn triggers(&self) -> &[EvaluationTrigger] {
        &self.catalog.triggers
    }

    // ----- statements -----

    /// Parses and executes a script; stops at the first failing statement,
    /// whose effects are undone.
    pub fn exec(&mut self, src: &str) -> Result<Vec<Outcome>> {
        parse_script(src)?.iter().map(|s| self.exec_statement(s)).collect()
    }

    /// Executes one statement atomically.
    pub fn exec_statement(&mut self, stmt: &Statement) -> Result<Outcome> {
        self.atomic(|db| db.run_statement(stmt))
    }

    /// Evaluates a standalone expression.
    pub fn query(&mut self, src: &str) -> Result<Value> {
        let expr = crate::osql::parse_expr(src)?;
        self.eval_expr(&expr, &mut Env::new())
    }

    fn run_statement(&mut self, stmt: &Statement) -> Result<Outcome> {
        let mut env = Env::new();
        match stmt {
            Statement::CreateType { name, supertypes, functions } => {
                let sigs: Vec<FunctionSig> = functions
                    .iter()
                    .map(|d| FunctionSig {
                        multivalued: d.multivalued,
                        ..FunctionSig::stored(d.name.clone(), d.value_type.clone())
                    })
                    .collect();
                if self.catalog.system_types.contains(name) && self.redeclares_system_type(name, supertypes, &sigs) {
                    return Ok(Outcome::Done);
                }
                let supers: Vec<&str> = supertypes.iter().map(String::as_str).collect();
                self.store.create_type(name, &supers, sigs)?;
                Ok(Outcome::Done)
            }
            Statement::CreateInstance { type_name, functions, instances } => {
                if self.store.type_def(type_name).is_none() {
                    return Err(Error::UnknownType(type_name.clone()));
                }
                let mut created = Vec::new();
                for spec in instances {
                    if !spec.args.is_empty() && spec.args.len() != functions.len() {
                        return Err(Error::ArityMismatch(format!(
                            "{} values for {} functions",
                            spec.args.len(),
                            functions.len()
                        )));
                    }
                    let mut inits = Vec::new();
                    for (f, arg) in functions.iter().zip(&spec.args) {
                        let sig = self
                            .store
                            .type_function(type_name, f)?
                            .cloned()
                            .ok_or_else(|| Error::UnknownFunction(f.clone()))?;
                        inits.push((f.clone(), self.eval_for(&sig, arg, &mut env)?));
                    }
                    if let Some(name) = &spec.name {
                        if self.catalog.names.contains_key(name) {
                            return Err(Error::NameInUse(name.clone()));
                        }
                    }
                    let oid = self.insert_object(type_name, inits)?;
                    if let Some(name) = &spec.name {
                        self.catalog.names.insert(name.clone(), oid);
                    }
                    created.push(oid);
                }
                Ok(Outcome::Created(created))
            }
            Statement::CreateFunction(func) => {
                self.define_function(func.clone())?;
                Ok(Outcome::Done)
            }
            Statement::CreateTrigger(spec) => {
                let net = self.eval_object(&spec.net, &mut env)?;
                envops::register_trigger(
                    self,
                    EvaluationTrigger {
                        watched: spec.watched.clone(),
                        net,
                        projection: spec.projection.clone(),
                        target: spec.target.clone(),
                        fields: spec.fields.clone(),
                        back_ref: spec.back_ref.clone(),
                    },
                )?;
                Ok(Outcome::Done)
            }
            Statement::Set(s) => {
                self.exec_set(s, &mut env)?;
                Ok(Outcome::Done)
            }
            Statement::Select(sel) => Ok(Outcome::Value(self.eval_select(sel, &mut env)?)),
            Statement::AddType { type_name, target } => {
                let oid = self.eval_object(target, &mut env)?;
                self.store.add_type(oid, type_name)?;
                Ok(Outcome::Done)
            }
            Statement::Learn { net, repeat } => {
                let net = self.eval_object(net, &mut env)?;
                Ok(Outcome::Trained(netcore::learn(self, net, *repeat)?))
            }
            Statement::Connect { from, to, weight } => {
                let from = self.eval_object(from, &mut env)?;
                let mut targets = Vec::new();
                for t in to {
                    targets.extend(self.eval_objects(t, &mut env)?);
                }
                let weight = match weight {
                    Some(w) => Some(
                        self.eval_expr(w, &mut env)?
                            .as_f64()
                            .ok_or_else(|| Error::mismatch("connection weight must be a number"))?,
                    ),
                    None => None,
                };
                Ok(Outcome::Created(netcore::connect_all(self, from, &targets, weight)?))
            }
            Statement::Import { path, type_name } => {
                let path = self.resolve_path(path);
                Ok(Outcome::Count(crate::import::import_csv(self, &path, type_name)?))
            }
            Statement::Insert { source, target, fields } => {
                let rows = self.eval_expr(source, &mut env)?.to_stream()?;
                Ok(Outcome::Count(envops::insert_rows(self, target, fields, rows.rows())?))
            }
            Statement::Delete(e) => {
                for oid in self.eval_objects(e, &mut env)? {
                    self.delete_instance(oid)?;
                }
                Ok(Outcome::Done)
            }
            Statement::Call { function, args } => {
                let v = self.eval_expr(&Expr::Apply { function: function.clone(), args: args.clone() }, &mut env)?;
                Ok(if v.is_null() { Outcome::Done } else { Outcome::Value(v) })
            }
        }
    }

    /// True when the statement's declarations are already part of the predefined type.
    fn redeclares_system_type(&self, name: &str, supertypes: &[String], sigs: &[FunctionSig]) -> bool {
        let Some(existing) = self.store.type_def(name) else { return false };
        existing.supertypes == supertypes
            && sigs.iter().all(|s| {
                matches!(self.store.type_function(name, &s.name), Ok(Some(e))
                    if e.value_type == s.value_type && e.multivalued == s.multivalued)
            })
    }

    // ----- persistence -----

    pub fn to_snapshot(&self) -> Snapshot {
        let mut snap = self.store.to_snapshot();
        let catalog = CatalogRecord::from_catalog(&self.catalog);
        snap.extensions
            .insert(CATALOG_KEY.to_string(), serde_json::to_value(catalog).expect("catalog is serializable"));
        snap
    }

    pub fn from_snapshot(snapshot: &Snapshot) -> Result<Self> {
        let mut db = Self::empty();
        db.store = ObjectStore::from_snapshot(snapshot)?;
        if let Some(tree) = snapshot.extensions.get(CATALOG_KEY) {
            let record: CatalogRecord =
                serde_json::from_value(tree.clone()).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
            db.catalog = record.into_catalog(&db.store)?;
        }
        Ok(db)
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        self.to_snapshot().to_bytes()
    }

    pub fn from_snapshot_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_snapshot(&Snapshot::from_bytes(bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.snapshot_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_snapshot_bytes(&std::fs::read(path)?)
    }
}

/// Serialized catalog; functions and queries are kept as source text.
#[derive(Debug, Serialize, Deserialize)]
struct CatalogRecord {
    names: BTreeMap<String, ObjectId>,
    functions: Vec<String>,
    streams: Vec<StreamRecord>,
    triggers: Vec<EvaluationTrigger>,
    system_types: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StreamRecord {
    net: ObjectId,
    role: StreamRole,
    query: String,
}

impl CatalogRecord {
    fn from_catalog(c: &Catalog) -> Self {
        CatalogRecord {
            names: c.names.clone(),
            functions: c.functions.values().map(|f| format!("{f};")).collect(),
            streams: c
                .streams
                .iter()
                .map(|((net, role), q)| StreamRecord { net: *net, role: *role, query: q.to_string() })
                .collect(),
            triggers: c.triggers.clone(),
            system_types: c.system_types.iter().cloned().collect(),
        }
    }

    fn into_catalog(self, store: &ObjectStore) -> Result<Catalog> {
        let corrupt = |what: String| Error::CorruptSnapshot(what);
        let mut c = Catalog { names: self.names, ..Catalog::default() };
        for src in &self.functions {
            match parse_statement(src) {
                Ok(Statement::CreateFunction(f)) => {
                    c.functions.insert(f.name.clone(), Arc::new(f));
                }
                _ => return Err(corrupt(format!("bad stored function `{src}`"))),
            }
        }
        for s in self.streams {
            let query = match crate::osql::parse_expr(&format!("({})", s.query)) {
                Ok(Expr::Select(sel)) => *sel,
                _ => return Err(corrupt(format!("bad stream query `{}`", s.query))),
            };
            if !store.contains(s.net) {
                return Err(corrupt(format!("stream bound to missing object {}", s.net)));
            }
            c.streams.insert((s.net, s.role), query);
        }
        c.triggers = self.triggers;
        c.system_types = self.system_types.into_iter().collect();
        Ok(c)
    }
}
