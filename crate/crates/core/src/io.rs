//! File formats: games and behaviors as JSON, trial records as CSV.
//!
//! Trial CSV files have the header `index,tag,x0,..,x{k-1},a0,..,a{k-1}`
//! with one row per attempt. Rows with tag 0 may leave the output columns
//! empty.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{validate_game, Behavior, Dims, ExperimentData, GameSpec, RawGame, TrialRecord};

pub fn parse_game(text: &str) -> Result<GameSpec> {
    let raw: RawGame = serde_json::from_str(text)?;
    validate_game(&raw)
}

pub fn read_game(path: impl AsRef<Path>) -> Result<GameSpec> {
    parse_game(&fs::read_to_string(path)?)
}

pub fn game_to_json(spec: &GameSpec) -> Result<String> {
    Ok(serde_json::to_string_pretty(&spec.to_raw())?)
}

pub fn parse_trials(reader: impl Read) -> Result<ExperimentData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 4 || names.len() % 2 != 0 || names[0] != "index" || names[1] != "tag" {
        return Err(invalid("trial header must be index,tag,x0,..,a0,.."));
    }
    let sites = (names.len() - 2) / 2;
    for site in 0..sites {
        if names[2 + site] != format!("x{site}") || names[2 + sites + site] != format!("a{site}") {
            return Err(invalid(format!("unexpected trial header {:?}", names.join(","))));
        }
    }
    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let at = |msg: String| invalid(format!("trial row {}: {msg}", line + 1));
        let num = |i: usize| -> Result<u64> {
            row[i].parse::<u64>().map_err(|_| at(format!("column {} is not a count: {:?}", names[i], &row[i])))
        };
        let inputs = (0..sites).map(|s| num(2 + s).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let empty = (0..sites).filter(|&s| row[2 + sites + s].is_empty()).count();
        let outputs = match empty {
            0 => Some((0..sites).map(|s| num(2 + sites + s).map(|v| v as usize)).collect::<Result<Vec<_>>>()?),
            e if e == sites => None,
            _ => return Err(at("outputs are partially empty".into())),
        };
        let tag = u32::try_from(num(1)?).map_err(|_| at("tag out of range".into()))?;
        records.push(TrialRecord { index: num(0)?, tag, inputs, outputs });
    }
    ExperimentData::new(records)
}

pub fn read_trials(path: impl AsRef<Path>) -> Result<ExperimentData> {
    parse_trials(fs::File::open(path)?)
}

/// Reads trials and checks them against `spec`. An empty file means no
/// trials.
pub fn read_trials_for(path: impl AsRef<Path>, spec: &GameSpec) -> Result<ExperimentData> {
    let text = fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Ok(ExperimentData::default());
    }
    let data = parse_trials(text.as_bytes())?;
    data.check_against(spec)?;
    Ok(data)
}

pub fn write_trials(data: &ExperimentData, sites: usize, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index".to_string(), "tag".to_string()];
    header.extend((0..sites).map(|s| format!("x{s}")));
    header.extend((0..sites).map(|s| format!("a{s}")));
    w.write_record(&header)?;
    for r in data.records() {
        if r.inputs.len() != sites || r.outputs.as_ref().is_some_and(|a| a.len() != sites) {
            return Err(invalid(format!("record {} does not have {sites} sites", r.index)));
        }
        let mut row = vec![r.index.to_string(), r.tag.to_string()];
        row.extend(r.inputs.iter().map(usize::to_string));
        match &r.outputs {
            Some(a) => row.extend(a.iter().map(usize::to_string)),
            None => row.extend(std::iter::repeat(String::new()).take(sites)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// On-disk behavior: `table["x0,x1"]` lists `p(a|x)` over output tuples in
/// canonical order (first site most significant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorFile {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub table: BTreeMap<String, Vec<f64>>,
}

pub fn parse_behavior(text: &str) -> Result<Behavior> {
    let file: BehaviorFile = serde_json::from_str(text)?;
    let dims = Dims::new(file.inputs, file.outputs)?;
    let n_out = dims.num_output_tuples();
    let mut table = vec![f64::NAN; dims.num_cells()];
    for (key, row) in &file.table {
        let x = key
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| invalid(format!("bad input key {key:?}")))?;
        let xi = dims.input_index(&x)?;
        if row.len() != n_out {
            return Err(invalid(format!("row {key:?} needs {n_out} entries")));
        }
        if !table[xi * n_out].is_nan() {
            return Err(invalid(format!("duplicate row for input {key:?}")));
        }
        table[xi * n_out..(xi + 1) * n_out].copy_from_slice(row);
    }
    if table.iter().any(|v| v.is_nan()) {
        return Err(invalid("behavior must list every input tuple"));
    }
    Behavior::new(dims, table)
}

pub fn read_behavior(path: impl AsRef<Path>) -> Result<Behavior> {
    parse_behavior(&fs::read_to_string(path)?)
}

pub fn behavior_to_json(behavior: &Behavior) -> Result<String> {
    let dims = behavior.dims();
    let n_out = dims.num_output_tuples();
    let table = (0..dims.num_input_tuples())
        .map(|x| {
            let key = dims.input_tuple(x).iter().map(usize::to_string).collect::<Vec<_>>().join(",");
            (key, behavior.table()[x * n_out..(x + 1) * n_out].to_vec())
        })
        .collect();
    let file = BehaviorFile { inputs: dims.inputs().to_vec(), outputs: dims.outputs().to_vec(), table };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// P-values separated by commas, whitespace or newlines.
pub fn parse_pvalues(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| invalid(format!("not a number: {t:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::NULL_TAG;
    use crate::games;

    #[test]
    fn game_round_trip() {
        for spec in [games::chsh(), games::mermin(), games::cglmp(3).unwrap(), games::chsh_two_states()] {
            let text = game_to_json(&spec).unwrap();
            assert_eq!(parse_game(&text).unwrap(), spec);
        }
        assert!(parse_game("{\"sites\": 2}").is_err());
    }

    #[test]
    fn trials_round_trip() {
        let data = ExperimentData::new(vec![
            TrialRecord { index: 0, tag: 1, inputs: vec![0, 1], outputs: Some(vec![1, 1]) },
            TrialRecord { index: 3, tag: NULL_TAG, inputs: vec![1, 1], outputs: None },
            TrialRecord { index: 4, tag: 1, inputs: vec![1, 0], outputs: Some(vec![0, 1]) },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_trials(&data, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "index,tag,x0,x1,a0,a1");
        assert_eq!(text.lines().nth(2).unwrap(), "3,0,1,1,,");
        assert_eq!(parse_trials(text.as_bytes()).unwrap(), data);
    }

    #[test]
    fn bad_trials_rejected() {
        for text in [
            "index,tag,x0,a0\n0,1,0\n",
            "index,tag,x0,x1,a0,a1\n0,1,0,0,1,\n",
            "index,tag,x0,x1,a0,a1\n0,1,0,-1,1,1\n",
            "index,tag,y0,x1,a0,a1\n",
            "index,tag,x0,x1,a0,a1\n1,1,0,0,1,1\n0,1,0,0,1,1\n",
            "index,tag,x0,x1,a0,a1\n0,1,0,0,,\n",
        ] {
            assert!(parse_trials(text.as_bytes()).is_err(), "{text}");
        }
    }

    #[test]
    fn behavior_round_trip() {
        let dims = Dims::uniform(2, 2, 2).unwrap();
        let pr = Behavior::from_fn(dims, |x, a| if (a[0] ^ a[1]) == (x[0] & x[1]) { 0.5 } else { 0.0 }).unwrap();
        let text = behavior_to_json(&pr).unwrap();
        assert!(text.contains("\"1,1\""));
        assert_eq!(parse_behavior(&text).unwrap(), pr);
        assert!(parse_behavior(r#"{"inputs":[2],"outputs":[2],"table":{"0":[1,0]}}"#).is_err());
        assert!(parse_behavior(r#"{"inputs":[1],"outputs":[2],"table":{"0":[0.5,0.6]}}"#).is_err());
    }

    #[test]
    fn pvalue_lists() {
        assert_eq!(parse_pvalues("0.1, 0.2\n0.3 ").unwrap(), vec![0.1, 0.2, 0.3]);
        assert!(parse_pvalues("0.1,x").is_err());
        assert!(parse_pvalues("").unwrap().is_empty());
    }
}
