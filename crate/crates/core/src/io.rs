//! File formats.
//!
//! Sequence CSV: header `user,index,re,im`, one chip per row, both indices
//! 0-based. Model JSON:
//!
//! ```json
//! {"n_chips": 8, "n_users": 2, "power": 1.0, "symbol_duration": 1.0,
//!  "noise_density": 0.1,
//!  "users": [{"gamma": 0.5, "c": 1.0, "m": 1},
//!            {"gamma": 0.5, "c": 1.0, "m": 1,
//!             "profile": {"shape": "truncated_exponential", "rate": 2.0}}]}
//! ```
//!
//! The chip duration is always derived from `symbol_duration / n_chips`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProfileShape, SpreadingSequence, SystemModel, UserChannel};

/// 17 significant digits, enough for a lossless `f64` round trip.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEntry {
    pub gamma: f64,
    pub c: f64,
    pub m: u32,
    #[serde(default, skip_serializing_if = "is_rectangular")]
    pub profile: ProfileShape,
}

fn is_rectangular(p: &ProfileShape) -> bool {
    matches!(p, ProfileShape::Rectangular)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_chips: usize,
    pub n_users: usize,
    pub power: f64,
    pub symbol_duration: f64,
    pub noise_density: f64,
    pub users: Vec<UserEntry>,
}

impl ModelFile {
    pub fn system_model(&self) -> Result<SystemModel> {
        SystemModel::new(
            self.n_chips,
            self.n_users,
            self.power,
            self.symbol_duration,
            self.noise_density,
        )
    }

    pub fn channels(&self) -> Result<Vec<UserChannel>> {
        let model = self.system_model()?;
        if self.users.len() != self.n_users {
            return Err(Error::DimensionMismatch {
                what: "users",
                expected: self.n_users,
                found: self.users.len(),
            });
        }
        self.users
            .iter()
            .map(|u| UserChannel::new(u.gamma, u.c, u.m, u.profile, &model))
            .collect()
    }

    pub fn from_parts(model: &SystemModel, channels: &[UserChannel]) -> Self {
        Self {
            n_chips: model.n_chips,
            n_users: model.n_users,
            power: model.power,
            symbol_duration: model.symbol_duration,
            noise_density: model.noise_density,
            users: channels
                .iter()
                .map(|c| UserEntry {
                    gamma: c.rician_gain,
                    c: c.profile_height,
                    m: c.delay_span,
                    profile: c.shape,
                })
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Chips grouped by user, in user order, without the power check.
pub type RawSequences = Vec<(usize, Vec<Complex64>)>;

pub fn read_sequences_raw<R: Read>(reader: R) -> Result<RawSequences> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header_ok = rdr
        .headers()
        .map(|h| h.iter().map(str::trim).eq(["user", "index", "re", "im"]))
        .unwrap_or(false);
    if !header_ok {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `user,index,re,im`".into(),
        });
    }
    let mut users: BTreeMap<usize, BTreeMap<usize, Complex64>> = BTreeMap::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let field = |idx: usize| record.get(idx).unwrap_or("").trim();
        let int = |idx: usize, name: &str| {
            field(idx).parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("{name}: {e}"),
            })
        };
        let real = |idx: usize, name: &str| {
            field(idx).parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("{name}: {e}"),
            })
        };
        let (user, index) = (int(0, "user")?, int(1, "index")?);
        let chip = Complex64::new(real(2, "re")?, real(3, "im")?);
        if users.entry(user).or_default().insert(index, chip).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate chip ({user}, {index})"),
            });
        }
    }
    users
        .into_iter()
        .map(|(user, chips)| {
            let len = chips.len();
            if chips.keys().copied().ne(0..len) {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("user {user}: chip indices are not 0..{len}"),
                });
            }
            Ok((user, chips.into_values().collect()))
        })
        .collect()
}

pub fn sequences_from_raw(raw: RawSequences) -> Result<Vec<SpreadingSequence>> {
    raw.into_iter()
        .map(|(user, chips)| SpreadingSequence::new(user, chips))
        .collect()
}

pub fn read_sequences<R: Read>(reader: R) -> Result<Vec<SpreadingSequence>> {
    sequences_from_raw(read_sequences_raw(reader)?)
}

pub fn load_sequences(path: impl AsRef<Path>) -> Result<Vec<SpreadingSequence>> {
    read_sequences(std::fs::File::open(path)?)
}

pub fn write_sequences<W: Write>(mut w: W, sequences: &[SpreadingSequence]) -> Result<()> {
    writeln!(w, "user,index,re,im")?;
    for seq in sequences {
        for (idx, chip) in seq.chips().iter().enumerate() {
            writeln!(w, "{},{},{},{}", seq.user_id, idx, fmt_f64(chip.re), fmt_f64(chip.im))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let chips = vec![
            Complex64::new(0.1, -0.7),
            Complex64::new(1.0 / 3.0, 0.2),
            Complex64::new(-0.9, 0.4),
        ];
        let s = SpreadingSequence::normalized(3, chips).unwrap();
        let mut buf = Vec::new();
        write_sequences(&mut buf, std::slice::from_ref(&s)).unwrap();
        let back = read_sequences(buf.as_slice()).unwrap();
        assert_eq!(back, vec![s]);
    }

    #[test]
    fn malformed_row_names_its_line() {
        let text = "user,index,re,im\n0,0,1,0\n0,1,abc,0\n";
        match read_sequences_raw(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(matches!(
            read_sequences_raw("a,b,c,d\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn off_sphere_rows_fail_validation() {
        let text = "user,index,re,im\n0,0,1,0\n0,1,1,0\n0,2,1,0\n0,3,0,0\n";
        assert!(matches!(
            read_sequences(text.as_bytes()),
            Err(Error::NormViolation { .. })
        ));
    }

    #[test]
    fn model_file_parses() {
        let text = r#"{"n_chips":8,"n_users":2,"power":1.0,"symbol_duration":1.0,
            "noise_density":0.1,"users":[{"gamma":0.5,"c":1.0,"m":1},
            {"gamma":0.5,"c":1.0,"m":2,"profile":{"shape":"truncated_exponential","rate":2.0}}]}"#;
        let f: ModelFile = serde_json::from_str(text).unwrap();
        let ch = f.channels().unwrap();
        assert_eq!(ch[0].profile_mass, 1.0);
        assert!(ch[1].profile_mass < 2.0);
        assert!(matches!(ch[1].shape, ProfileShape::TruncatedExponential { rate } if rate == 2.0));
    }
}
