use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{CorpusError, Order};

pub const ORDER_CSV_HEADER: [&str; 4] = ["id", "indication", "diagnosis", "protocol"];

/// Load orders from a CSV file with header `id,indication,diagnosis,protocol`.
pub fn load_orders(path: impl AsRef<Path>) -> Result<Vec<Order>, CorpusError> {
    read_orders(File::open(path)?)
}

pub fn read_orders<R: Read>(reader: R) -> Result<Vec<Order>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(ORDER_CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))?;
    }

    let mut orders = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(i + 2, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(CorpusError::MalformedRow {
                row,
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let [id, indication, diagnosis, protocol] = columns.map(|c| record[c].to_string());
        if protocol.is_empty() {
            return Err(CorpusError::MalformedRow {
                row,
                reason: "column `protocol` is empty".to_string(),
            });
        }
        orders.push(Order {
            id,
            indication,
            diagnosis,
            protocol,
        });
    }
    Ok(orders)
}

pub fn write_orders<W: Write>(writer: W, orders: &[Order]) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(ORDER_CSV_HEADER)?;
    for o in orders {
        wtr.write_record([&o.id, &o.indication, &o.diagnosis, &o.protocol])?;
    }
    wtr.flush()?;
    Ok(())
}
