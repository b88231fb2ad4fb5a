//! Puzzle files: JSON with base64 byte fields. A single-item puzzle uses
//! `t` and `b`; a time-line puzzle uses `t_vec` and `b_vec`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use datashare_core::timed::{Scheme, TimeLinePuzzle};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PuzzleFile {
    pub scheme: String,
    pub kappa: u32,
    pub x: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_vec: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_vec: Option<Vec<String>>,
    pub a: String,
}

fn b64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

fn unb64(field: &str, s: &str) -> Result<Vec<u8>, CliError> {
    STANDARD
        .decode(s)
        .map_err(|e| CliError::Usage(format!("puzzle field {field}: {e}")))
}

impl PuzzleFile {
    pub fn from_puzzle(p: &TimeLinePuzzle) -> Self {
        let single = p.t.len() == 1;
        PuzzleFile {
            scheme: p.scheme.name().to_string(),
            kappa: p.kappa,
            x: b64(&p.x),
            t: single.then(|| p.t[0]),
            t_vec: (!single).then(|| p.t.clone()),
            b: single.then(|| b64(&p.b[0])),
            b_vec: (!single).then(|| p.b.iter().map(|b| b64(b)).collect()),
            a: b64(&p.a),
        }
    }

    pub fn to_puzzle(&self) -> Result<TimeLinePuzzle, CliError> {
        let scheme = Scheme::parse(&self.scheme)
            .ok_or_else(|| CliError::Usage(format!("unknown scheme {:?}", self.scheme)))?;
        let (t, b) = match (&self.t, &self.b, &self.t_vec, &self.b_vec) {
            (Some(t), Some(b), None, None) => (vec![*t], vec![unb64("b", b)?]),
            (None, None, Some(t), Some(b)) => (
                t.clone(),
                b.iter().map(|s| unb64("b_vec", s)).collect::<Result<_, _>>()?,
            ),
            _ => {
                return Err(CliError::Usage(
                    "puzzle needs either t and b, or t_vec and b_vec".into(),
                ))
            }
        };
        let p = TimeLinePuzzle {
            scheme,
            kappa: self.kappa,
            x: unb64("x", &self.x)?,
            t,
            b,
            a: unb64("a", &self.a)?,
        };
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use datashare_core::rng;
    use datashare_core::timed::{lock, lock_line};

    #[test]
    fn roundtrip_single_and_line() {
        let mut r = rng::stream(1, "test");
        let p = lock(Scheme::Hash, 256, b"hi", 5, &mut r).unwrap();
        let f = PuzzleFile::from_puzzle(&p);
        assert!(f.t_vec.is_none() && f.t == Some(5));
        assert_eq!(f.to_puzzle().unwrap(), p);

        let items = vec![b"a".to_vec(), b"bc".to_vec()];
        let p = lock_line(Scheme::Square, 16, &items, &[2, 9], &mut r).unwrap();
        let f = PuzzleFile::from_puzzle(&p);
        let json = serde_json::to_string(&f).unwrap();
        let back: PuzzleFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_puzzle().unwrap(), p);
    }

    #[test]
    fn rejects_mixed_fields() {
        let mut r = rng::stream(2, "test");
        let p = lock(Scheme::Hash, 256, b"x", 1, &mut r).unwrap();
        let mut f = PuzzleFile::from_puzzle(&p);
        f.t_vec = Some(vec![1]);
        assert!(f.to_puzzle().is_err());
    }
}
