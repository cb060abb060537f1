use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassId, Rat};
use crate::simulator::PacketArrival;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    class: ClassId,
    arrival_time: Rat,
    length: Rat,
    #[serde(default)]
    tiebreak_seq: u32,
}

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("scenario CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Writes arrivals as `class,arrival_time,length,tiebreak_seq` with exact
/// rational values.
pub fn write_scenario_csv<W: Write>(arrivals: &[PacketArrival], out: W) -> Result<(), ScenarioFileError> {
    let mut w = csv::Writer::from_writer(out);
    for a in arrivals {
        w.serialize(Row {
            class: a.class,
            arrival_time: a.time.clone(),
            length: a.length.clone(),
            tiebreak_seq: a.seq,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads the format of [`write_scenario_csv`]. Times and lengths may be
/// integers, ratios (`1/3`) or decimals; `tiebreak_seq` may be omitted.
pub fn read_scenario_csv<R: Read>(input: R) -> Result<Vec<PacketArrival>, ScenarioFileError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: Row = row?;
        out.push(PacketArrival::new(row.class, row.arrival_time, row.length).with_seq(row.tiebreak_seq));
    }
    Ok(out)
}
