//! CSV loading into a type, one instance per data row.

use std::path::Path;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::value::{Value, ValueType};

/// Loads `path` into instances of `type_name`; the header names the target
/// functions. Empty cells leave the function unset. Returns the row count.
pub fn import_csv(db: &mut Database, path: &Path, type_name: &str) -> Result<usize> {
    let file = std::fs::File::open(path)?;
    db.atomic(|db| import_reader(db, file, type_name))
}

/// [`import_csv`] over any reader.
pub fn import_reader(db: &mut Database, reader: impl std::io::Read, type_name: &str) -> Result<usize> {
    if db.store().type_def(type_name).is_none() {
        return Err(Error::UnknownType(type_name.to_string()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::HeaderMismatch(e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::HeaderMismatch("missing header row".into()));
    }
    let mut columns = Vec::new();
    for h in headers.iter() {
        let sig = db
            .store()
            .type_function(type_name, h)?
            .filter(|s| {
                !s.multivalued
                    && matches!(s.value_type, ValueType::Real | ValueType::Integer | ValueType::CharacterString)
            })
            .ok_or_else(|| Error::HeaderMismatch(format!("`{h}` is not a scalar function of {type_name}")))?;
        columns.push((h.to_string(), sig.value_type.clone()));
    }
    let mut count = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::CsvParse { row, message: e.to_string() })?;
        let mut inits = Vec::with_capacity(columns.len());
        for ((name, ty), cell) in columns.iter().zip(record.iter()) {
            if cell.is_empty() {
                continue;
            }
            let bad =
                |what: &str| Error::CsvParse { row, message: format!("`{cell}` is not {what} (column `{name}`)") };
            let v = match ty {
                ValueType::Real => Value::Real(cell.parse().map_err(|_| bad("a number"))?),
                ValueType::Integer => Value::Integer(cell.parse().map_err(|_| bad("an integer"))?),
                _ => Value::Text(cell.to_string()),
            };
            inits.push((name.clone(), v));
        }
        db.insert_object(type_name, inits)?;
        count += 1;
    }
    Ok(count)
}
