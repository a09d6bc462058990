//! Runtime values and declared value types.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::object_store::ObjectId;

/// The universal runtime value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum Value {
    #[default]
    Null,
    Real(#[serde(with = "real_repr")] f64),
    Integer(i64),
    Text(String),
    Object(ObjectId),
    Tuple(Vec<Value>),
    /// Multivalued result; keeps insertion order.
    Bag(Vec<Value>),
    Function(String),
    Stream(Stream),
}

/// A materialized sequence of numeric rows sharing one arity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Stream {
    arity: usize,
    #[serde(with = "rows_repr")]
    rows: Vec<Vec<f64>>,
}

impl Stream {
    pub fn new(arity: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != arity) {
            return Err(Error::ArityMismatch(format!(
                "stream row of arity {} in a stream of arity {arity}",
                bad.len()
            )));
        }
        Ok(Stream { arity, rows })
    }

    /// Builds a stream from rows, taking the arity from the first row.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let arity = rows.first().map_or(0, Vec::len);
        Stream::new(arity, rows)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn type_label(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Real(_) => "Real",
            Value::Integer(_) => "Integer",
            Value::Text(_) => "CharacterString",
            Value::Object(_) => "object",
            Value::Tuple(_) => "tuple",
            Value::Bag(_) => "bag",
            Value::Function(_) => "function",
            Value::Stream(_) => "stream",
        }
    }

    /// Numeric view; integers widen to reals. Single-element bags unwrap.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            Value::Bag(items) | Value::Tuple(items) if items.len() == 1 => items[0].as_f64(),
            _ => None,
        }
    }

    pub fn as_object(&self) -> Option<ObjectId> {
        match self {
            Value::Object(oid) => Some(*oid),
            Value::Bag(items) if items.len() == 1 => items[0].as_object(),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            Value::Integer(i) => Some(*i),
            Value::Real(x) if x.fract() == 0.0 && x.is_finite() => Some(*x as i64),
            Value::Bag(items) if items.len() == 1 => items[0].as_integer(),
            _ => None,
        }
    }

    /// Elements of a collection value; a scalar is its own single element
    /// and Null is empty.
    pub fn elements(&self) -> Vec<Value> {
        match self {
            Value::Null => Vec::new(),
            Value::Bag(items) | Value::Tuple(items) => items.clone(),
            Value::Stream(s) => {
                s.rows().iter().map(|r| Value::Tuple(r.iter().map(|x| Value::Real(*x)).collect())).collect()
            }
            other => vec![other.clone()],
        }
    }

    /// Reads a list of reals out of a bag, tuple, single-row stream or scalar.
    pub fn to_reals(&self) -> Result<Vec<f64>> {
        if let Value::Stream(s) = self {
            if s.len() == 1 {
                return Ok(s.rows()[0].clone());
            }
        }
        self.elements()
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| Error::mismatch(format!("expected a number, got {}", v.type_label()))))
            .collect()
    }

    /// Interprets the value as a stream of numeric rows.
    pub fn to_stream(&self) -> Result<Stream> {
        match self {
            Value::Stream(s) => Ok(s.clone()),
            Value::Null => Ok(Stream::default()),
            other => {
                let rows = other
                    .elements()
                    .iter()
                    .map(|row| match row {
                        Value::Tuple(_) | Value::Bag(_) => row.to_reals(),
                        scalar => scalar
                            .as_f64()
                            .map(|x| vec![x])
                            .ok_or_else(|| Error::NonNumericProjection(scalar.type_label().to_string())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Stream::from_rows(rows)
            }
        }
    }
}

/// The declared type of a function's values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueType {
    CharacterString,
    Real,
    Integer,
    ObjectRef(String),
    Tuple(Vec<ValueType>),
    FunctionRef,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::CharacterString => f.write_str("CharacterString"),
            ValueType::Real => f.write_str("Real"),
            ValueType::Integer => f.write_str("Integer"),
            ValueType::ObjectRef(t) => f.write_str(t),
            ValueType::FunctionRef => f.write_str("function"),
            ValueType::Tuple(items) => {
                f.write_str("<")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(">")
            }
        }
    }
}

/// Shortest round-trip rendering of a real.
pub fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Real(x) => f.write_str(&fmt_real(*x)),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Text(s) => write!(f, "\"{s}\""),
            Value::Object(oid) => write!(f, "{oid}"),
            Value::Function(name) => f.write_str(name),
            Value::Tuple(items) | Value::Bag(items) => {
                let (open, close) = if matches!(self, Value::Tuple(_)) { ("<", ">") } else { ("(", ")") };
                f.write_str(open)?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(close)
            }
            Value::Stream(s) => {
                let rows: Vec<Vec<String>> =
                    s.rows().iter().map(|r| r.iter().map(|x| fmt_real(*x)).collect()).collect();
                let mut widths = vec![0usize; s.arity()];
                for row in &rows {
                    for (w, cell) in widths.iter_mut().zip(row) {
                        *w = (*w).max(cell.len());
                    }
                }
                for (i, row) in rows.iter().enumerate() {
                    if i > 0 {
                        f.write_str("\n")?;
                    }
                    let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
                    f.write_str(&cells.join("  "))?;
                }
                Ok(())
            }
        }
    }
}

mod real_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::fmt_real(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

mod rows_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|x| super::fmt_real(*x)).collect()).collect();
        text.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let text: Vec<Vec<String>> = Vec::deserialize(d)?;
        text.iter().map(|r| r.iter().map(|x| x.parse().map_err(serde::de::Error::custom)).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_rejects_ragged_rows() {
        assert!(Stream::new(2, vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert_eq!(Stream::from_rows(vec![]).unwrap().arity(), 0);
    }

    #[test]
    fn reals_survive_json_bit_exact() {
        for x in [0.1, -0.0, 1e-300, f64::MAX, 0.8807970779778823, 1.0 / 3.0] {
            let json = serde_json::to_string(&Value::Real(x)).unwrap();
            let back: Value = serde_json::from_str(&json).unwrap();
            match back {
                Value::Real(y) => assert_eq!(x.to_bits(), y.to_bits()),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn numeric_views() {
        assert_eq!(Value::Integer(3).as_f64(), Some(3.0));
        assert_eq!(Value::Bag(vec![Value::Real(0.5)]).as_f64(), Some(0.5));
        assert_eq!(Value::Text("x".into()).as_f64(), None);
        let s = Value::Bag(vec![
            Value::Tuple(vec![Value::Integer(0), Value::Real(1.0)]),
            Value::Tuple(vec![Value::Integer(1), Value::Real(0.0)]),
        ])
        .to_stream()
        .unwrap();
        assert_eq!(s.rows(), &[vec![0.0, 1.0], vec![1.0, 0.0]]);
    }
}
