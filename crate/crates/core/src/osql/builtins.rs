//! Foreign functions callable from the query language.

use std::collections::BTreeMap;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::netcore;
use crate::paradigms;
use crate::value::Value;

pub type BuiltinFn = fn(&mut Database, &[Value]) -> Result<Value>;

#[derive(Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub arity: usize,
    /// Argument positions where a bare identifier is taken as its own name.
    pub quoted: &'static [usize],
    pub func: BuiltinFn,
}

impl std::fmt::Debug for Builtin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Builtin({}/{})", self.name, self.arity)
    }
}

/// Name to implementation. User functions may not reuse these names.
#[derive(Debug, Clone)]
pub struct BuiltinRegistry {
    map: BTreeMap<&'static str, Builtin>,
}

impl Default for BuiltinRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl BuiltinRegistry {
    pub fn empty() -> Self {
        BuiltinRegistry { map: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Builtin { name: "sum", arity: 1, quoted: &[], func: b_sum });
        r.register(Builtin { name: "listprod", arity: 2, quoted: &[], func: b_listprod });
        r.register(Builtin { name: "valpos", arity: 2, quoted: &[], func: b_valpos });
        r.register(Builtin { name: "pow", arity: 2, quoted: &[], func: b_pow });
        r.register(Builtin { name: "exp", arity: 1, quoted: &[], func: b_exp });
        r.register(Builtin { name: "abs", arity: 1, quoted: &[], func: b_abs });
        r.register(Builtin { name: "random_weights", arity: 4, quoted: &[], func: b_random_weights });
        r.register(Builtin { name: "InitializeNeuralNet", arity: 1, quoted: &[], func: b_initialize });
        r.register(Builtin { name: "LayerSize", arity: 3, quoted: &[1], func: b_layer_size });
        r
    }

    pub fn register(&mut self, builtin: Builtin) {
        self.map.insert(builtin.name, builtin);
    }

    pub fn get(&self, name: &str) -> Option<&Builtin> {
        self.map.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.map.keys().copied()
    }
}

fn real(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::mismatch(format!("{what} expects a number, got {}", v.type_label())))
}

/// Left fold from `0.0` in list order.
pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |acc, x| acc + x)
}

pub fn listprod(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| x * y).collect())
}

/// 1-based element access.
pub fn valpos(xs: &[f64], i: i64) -> Result<f64> {
    if i < 1 || i as usize > xs.len() {
        return Err(Error::IndexOutOfRange { index: i, len: xs.len() });
    }
    Ok(xs[i as usize - 1])
}

fn b_sum(_: &mut Database, args: &[Value]) -> Result<Value> {
    Ok(Value::Real(sum(&args[0].to_reals()?)))
}

fn b_listprod(_: &mut Database, args: &[Value]) -> Result<Value> {
    let out = listprod(&args[0].to_reals()?, &args[1].to_reals()?)?;
    Ok(Value::Bag(out.into_iter().map(Value::Real).collect()))
}

fn b_valpos(_: &mut Database, args: &[Value]) -> Result<Value> {
    let i = args[1]
        .as_integer()
        .ok_or_else(|| Error::mismatch(format!("valpos index must be an integer, got {}", args[1].type_label())))?;
    if let Value::Stream(s) = &args[0] {
        if s.len() != 1 {
            // A multi-row stream indexes rows.
            let rows = s.rows();
            if i < 1 || i as usize > rows.len() {
                return Err(Error::IndexOutOfRange { index: i, len: rows.len() });
            }
            return Ok(Value::Tuple(rows[i as usize - 1].iter().map(|x| Value::Real(*x)).collect()));
        }
    }
    Ok(Value::Real(valpos(&args[0].to_reals()?, i)?))
}

fn b_pow(_: &mut Database, args: &[Value]) -> Result<Value> {
    let (x, y) = (real(&args[0], "pow")?, real(&args[1], "pow")?);
    // A correctly rounded pow(x, -1) is exactly the IEEE quotient 1 / x.
    Ok(Value::Real(if y == -1.0 { 1.0 / x } else { x.powf(y) }))
}

fn b_exp(_: &mut Database, args: &[Value]) -> Result<Value> {
    Ok(Value::Real(real(&args[0], "exp")?.exp()))
}

fn b_abs(_: &mut Database, args: &[Value]) -> Result<Value> {
    Ok(match &args[0] {
        Value::Integer(i) => Value::Integer(i.abs()),
        v => Value::Real(real(v, "abs")?.abs()),
    })
}

fn object_arg(v: &Value, what: &str) -> Result<crate::ObjectId> {
    v.as_object().ok_or_else(|| Error::mismatch(format!("{what} expects an object, got {}", v.type_label())))
}

fn b_random_weights(db: &mut Database, args: &[Value]) -> Result<Value> {
    let net = object_arg(&args[0], "random_weights")?;
    let seed = args[3]
        .as_integer()
        .filter(|s| *s >= 0)
        .ok_or_else(|| Error::mismatch("random_weights seed must be a non-negative integer"))?;
    netcore::random_weights(
        db,
        net,
        real(&args[1], "random_weights")?,
        real(&args[2], "random_weights")?,
        seed as u64,
    )?;
    Ok(Value::Null)
}

fn b_initialize(db: &mut Database, args: &[Value]) -> Result<Value> {
    paradigms::initialize_neural_net(db, object_arg(&args[0], "InitializeNeuralNet")?)?;
    Ok(Value::Null)
}

fn b_layer_size(db: &mut Database, args: &[Value]) -> Result<Value> {
    let net = object_arg(&args[0], "LayerSize")?;
    let layer = match &args[1] {
        Value::Text(s) => s.clone(),
        other => return Err(Error::mismatch(format!("LayerSize expects a layer name, got {}", other.type_label()))),
    };
    let n = args[2].as_integer().ok_or_else(|| Error::mismatch("LayerSize expects an integer size"))?;
    paradigms::layer_size(db, net, &layer, n)?;
    Ok(Value::Null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_listprod_valpos() {
        let p = listprod(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(p, vec![3.0, 8.0]);
        assert_eq!(sum(&p), 11.0);
        assert_eq!(valpos(&[0.0, 1.0], 2).unwrap(), 1.0);
        assert!(matches!(listprod(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { left: 1, right: 2 })));
        assert!(matches!(valpos(&[0.0, 1.0], 0), Err(Error::IndexOutOfRange { index: 0, len: 2 })));
        assert!(matches!(valpos(&[0.0, 1.0], 3), Err(Error::IndexOutOfRange { .. })));
        assert_eq!(sum(&[]), 0.0);
        assert!(sum(&[]).is_sign_positive());
    }

    #[test]
    fn registry_lists_foreign_functions() {
        let r = BuiltinRegistry::standard();
        for name in ["sum", "listprod", "valpos", "pow", "exp", "abs", "random_weights"] {
            assert!(r.contains(name), "{name}");
        }
        assert!(!r.contains("WeightSum"));
    }
}
