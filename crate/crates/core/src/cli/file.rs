//! JSON interchange format for channels and states.
//!
//! Complex entries are `[re, im]` pairs. Kraus data is `data[alpha][row][col]`.
//! Choi data is `data[row][col]` over the A-major index `i * d + p`.
//! Stinespring data is `data[row][col]` of the isometry with rows
//! `p * env_dim + alpha`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::channels::{ChoiMatrix, DensityMatrix, KrausSet, StinespringIsometry};
use crate::numerics::{c, ComplexMatrix};

pub const CHANNEL_FORMAT: &str = "kpeb-channel/1";
pub const STATE_FORMAT: &str = "kpeb-state/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Kraus,
    Choi,
    Stinespring,
}

impl Representation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Kraus => "kraus",
            Self::Choi => "choi",
            Self::Stinespring => "stinespring",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub format_version: String,
    pub d: usize,
    pub representation: Representation,
    pub data: Value,
    #[serde(default)]
    pub metadata: Map<String, Value>,
}

/// A channel as read from disk, before any CPTP validation.
#[derive(Debug, Clone)]
pub enum Channel {
    Kraus(KrausSet),
    Choi(ChoiMatrix),
    Stinespring(StinespringIsometry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub format_version: String,
    pub d: usize,
    pub data: Value,
}

fn encode_matrix(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| {
                Value::Array(
                    (0..m.ncols())
                        .map(|col| {
                            let z = m[(r, col)];
                            Value::Array(vec![Value::from(z.re), Value::from(z.im)])
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, String> {
    v.as_array().ok_or_else(|| format!("{path}: expected an array"))
}

fn decode_matrix(v: &Value, rows: Option<usize>, cols: usize, path: &str) -> Result<ComplexMatrix, String> {
    let row_values = as_array(v, path)?;
    if let Some(r) = rows {
        if row_values.len() != r {
            return Err(format!("{path}: expected {r} rows, found {}", row_values.len()));
        }
    }
    let mut m = ComplexMatrix::zeros(row_values.len(), cols);
    for (r, row) in row_values.iter().enumerate() {
        let rp = format!("{path}[{r}]");
        let entries = as_array(row, &rp)?;
        if entries.len() != cols {
            return Err(format!("{rp}: expected {cols} columns, found {}", entries.len()));
        }
        for (col, entry) in entries.iter().enumerate() {
            let ep = format!("{rp}[{col}]");
            let pair = as_array(entry, &ep)?;
            let parts: Option<Vec<f64>> = pair.iter().map(Value::as_f64).collect();
            match parts.as_deref() {
                Some([re, im]) => m[(r, col)] = c(*re, *im),
                _ => return Err(format!("{ep}: expected a [re, im] pair of numbers")),
            }
        }
    }
    Ok(m)
}

impl ChannelFile {
    fn with(d: usize, representation: Representation, data: Value, metadata: Map<String, Value>) -> Self {
        Self {
            format_version: CHANNEL_FORMAT.into(),
            d,
            representation,
            data,
            metadata,
        }
    }

    pub fn from_kraus(k: &KrausSet, metadata: Map<String, Value>) -> Self {
        let data = Value::Array(k.operators().iter().map(encode_matrix).collect());
        Self::with(k.d_in(), Representation::Kraus, data, metadata)
    }

    pub fn from_choi(j: &ChoiMatrix, metadata: Map<String, Value>) -> Self {
        Self::with(j.d(), Representation::Choi, encode_matrix(j.matrix()), metadata)
    }

    pub fn from_stinespring(s: &StinespringIsometry, metadata: Map<String, Value>) -> Self {
        Self::with(s.d_in, Representation::Stinespring, encode_matrix(&s.v), metadata)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let file: Self = serde_json::from_str(text).map_err(|e| format!("malformed channel file: {e}"))?;
        if file.format_version != CHANNEL_FORMAT {
            return Err(format!(
                "format_version: expected \"{CHANNEL_FORMAT}\", found \"{}\"",
                file.format_version
            ));
        }
        if file.d == 0 {
            return Err("d: must be >= 1".into());
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel file serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), String> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Shape and finiteness checks only.
    pub fn decode(&self) -> Result<Channel, String> {
        let d = self.d;
        match self.representation {
            Representation::Kraus => {
                let ops = as_array(&self.data, "data")?
                    .iter()
                    .enumerate()
                    .map(|(a, v)| decode_matrix(v, Some(d), d, &format!("data[{a}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                if ops.is_empty() {
                    return Err("data: expected at least one Kraus operator".into());
                }
                KrausSet::new_unchecked(ops).map(Channel::Kraus).map_err(|e| format!("data: {e}"))
            }
            Representation::Choi => {
                let m = decode_matrix(&self.data, Some(d * d), d * d, "data")?;
                ChoiMatrix::new_unchecked(m).map(Channel::Choi).map_err(|e| format!("data: {e}"))
            }
            Representation::Stinespring => {
                let v = decode_matrix(&self.data, None, d, "data")?;
                if v.nrows() == 0 || v.nrows() % d != 0 {
                    return Err(format!("data: row count {} is not a positive multiple of d = {d}", v.nrows()));
                }
                crate::numerics::check_finite(&v).map_err(|e| format!("data: {e}"))?;
                Ok(Channel::Stinespring(StinespringIsometry {
                    d_in: d,
                    d_out: d,
                    env_dim: v.nrows() / d,
                    v,
                }))
            }
        }
    }
}

impl StateFile {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        Self {
            format_version: STATE_FORMAT.into(),
            d: rho.dim(),
            data: encode_matrix(rho.matrix()),
        }
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| format!("{}: malformed state file: {e}", path.display()))?;
        if file.format_version != STATE_FORMAT {
            return Err(format!(
                "{}: format_version: expected \"{STATE_FORMAT}\", found \"{}\"",
                path.display(),
                file.format_version
            ));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state file serializes")
    }

    pub fn decode(&self) -> Result<DensityMatrix, String> {
        let m = decode_matrix(&self.data, Some(self.d), self.d, "data")?;
        DensityMatrix::new(m).map_err(|e| format!("data: {e}"))
    }
}

pub fn matrix_json(m: &ComplexMatrix) -> Value {
    encode_matrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{kraus_to_choi, kraus_to_stinespring};
    use crate::zoo;

    #[test]
    fn kraus_round_trip_is_bit_exact() {
        let k = zoo::random_rank_k_channel(3, 2, 3, 5, true).unwrap().kraus;
        let text = ChannelFile::from_kraus(&k, Map::new()).to_json();
        let back = ChannelFile::parse(&text).unwrap().decode().unwrap();
        let Channel::Kraus(back) = back else { panic!("wrong representation") };
        for (a, b) in k.operators().iter().zip(back.operators()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn choi_and_stinespring_decode() {
        let k = zoo::amplitude_damping_qubit(0.3).unwrap().kraus;
        let j = kraus_to_choi(&k).unwrap();
        let text = ChannelFile::from_choi(&j, Map::new()).to_json();
        let Channel::Choi(back) = ChannelFile::parse(&text).unwrap().decode().unwrap() else { panic!() };
        assert_eq!(back, j);

        let s = kraus_to_stinespring(&k);
        let text = ChannelFile::from_stinespring(&s, Map::new()).to_json();
        let Channel::Stinespring(back) = ChannelFile::parse(&text).unwrap().decode().unwrap() else { panic!() };
        assert_eq!(back, s);
    }

    #[test]
    fn errors_name_the_field() {
        let k = zoo::identity(2).unwrap().kraus;
        let mut file = ChannelFile::from_kraus(&k, Map::new());
        file.data[0][1][0] = serde_json::json!([1.0]);
        assert!(file.decode().unwrap_err().starts_with("data[0][1][0]"));

        let mut file = ChannelFile::from_kraus(&k, Map::new());
        file.d = 3;
        assert!(file.decode().unwrap_err().starts_with("data[0]"));

        let text = ChannelFile::from_kraus(&k, Map::new()).to_json();
        assert!(ChannelFile::parse(&text[..text.len() / 2]).is_err());
        let wrong = text.replace(CHANNEL_FORMAT, "other/9");
        assert!(ChannelFile::parse(&wrong).unwrap_err().starts_with("format_version"));
        let no_d = text.replace("\"d\"", "\"dim\"");
        assert!(ChannelFile::parse(&no_d).unwrap_err().contains("dim"));
    }

    #[test]
    fn state_file_round_trip() {
        let rho = DensityMatrix::random(3, 4);
        let text = StateFile::from_state(&rho).to_json();
        let back: StateFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.decode().unwrap(), rho);
    }
}
