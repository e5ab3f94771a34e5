//! JSON input formats.
//!
//! * space: `{"atoms": [...], "masses": [...]}`
//! * POVM: `{"space": <space>, "dim": d, "effects": [...] | {atom: matrix}}`
//! * QRV: `{"dim": d, "values": [...] | {atom: matrix}}`, optionally with `"space"`
//! * state: a matrix, or `{"rho": matrix}`
//! * scalar function: `{"values": [...] | {atom: value}}`
//!
//! Matrices are row-major nested arrays whose entries are numbers or
//! `[re, im]` pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexOperator, HermitianOperator, State};
use crate::measure::{ClassicalFunction, FiniteMeasureSpace};
use crate::povm::{Povm, QuantumRandomVariable};

#[derive(Deserialize)]
#[serde(untagged)]
enum AtomIndexed<T> {
    List(Vec<T>),
    Map(BTreeMap<String, T>),
}

impl<T> AtomIndexed<T> {
    fn resolve(self, space: Option<&FiniteMeasureSpace>, what: &str) -> Result<Vec<T>> {
        match self {
            AtomIndexed::List(v) => {
                if let Some(s) = space {
                    if s.len() != v.len() {
                        return Err(Error::InvalidInput(format!(
                            "{what}: {} entries for a space with {} atoms",
                            v.len(),
                            s.len()
                        )));
                    }
                }
                Ok(v)
            }
            AtomIndexed::Map(mut map) => {
                let space = space.ok_or_else(|| {
                    Error::InvalidInput(format!("{what}: atom-keyed entries need a space"))
                })?;
                let mut out = Vec::with_capacity(space.len());
                for atom in space.atoms() {
                    let v = map.remove(&atom.0).ok_or_else(|| {
                        Error::InvalidInput(format!("{what}: no entry for atom {:?}", atom.0))
                    })?;
                    out.push(v);
                }
                if let Some(extra) = map.keys().next() {
                    return Err(Error::InvalidInput(format!("{what}: unknown atom {extra:?}")));
                }
                Ok(out)
            }
        }
    }
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("{what}: {e}")))
}

fn check_declared_dim(declared: Option<usize>, found: usize, what: &str) -> Result<()> {
    match declared {
        Some(d) if d != found => Err(Error::InvalidInput(format!(
            "{what}: declared dim {d} but matrices are {found}x{found}"
        ))),
        _ => Ok(()),
    }
}

pub fn parse_space(text: &str) -> Result<FiniteMeasureSpace> {
    parse_json(text, "space")
}

/// Parses a POVM; `space` is used when the file carries none.
pub fn parse_povm(text: &str, space: Option<&FiniteMeasureSpace>) -> Result<Povm> {
    #[derive(Deserialize)]
    struct Repr {
        space: Option<FiniteMeasureSpace>,
        dim: Option<usize>,
        effects: AtomIndexed<ComplexOperator>,
    }
    let r: Repr = parse_json(text, "povm")?;
    let space = match (r.space, space) {
        (Some(s), _) => s,
        (None, Some(s)) => s.clone(),
        (None, None) => return Err(Error::InvalidInput("povm: no space given".into())),
    };
    let raw = r.effects.resolve(Some(&space), "povm effects")?;
    let effects = raw
        .into_iter()
        .map(HermitianOperator::new)
        .collect::<Result<Vec<_>>>()?;
    if let Some(e) = effects.first() {
        check_declared_dim(r.dim, e.dim(), "povm")?;
    }
    Povm::new(space, effects)
}

/// Parses a QRV; atom-keyed values need a space from the file or `space`.
pub fn parse_qrv(text: &str, space: Option<&FiniteMeasureSpace>) -> Result<QuantumRandomVariable> {
    #[derive(Deserialize)]
    struct Repr {
        space: Option<FiniteMeasureSpace>,
        dim: Option<usize>,
        values: AtomIndexed<ComplexOperator>,
    }
    let r: Repr = parse_json(text, "qrv")?;
    let space = r.space.as_ref().or(space);
    let f = QuantumRandomVariable::new(r.values.resolve(space, "qrv values")?)?;
    check_declared_dim(r.dim, f.dim(), "qrv")?;
    Ok(f)
}

pub fn parse_state(text: &str) -> Result<State> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Wrapped { rho: HermitianOperator },
        Bare(HermitianOperator),
    }
    let h = match parse_json::<Repr>(text, "state")? {
        Repr::Wrapped { rho } | Repr::Bare(rho) => rho,
    };
    State::new(h)
}

pub fn parse_function(text: &str, space: Option<&FiniteMeasureSpace>) -> Result<ClassicalFunction> {
    #[derive(Deserialize)]
    struct Repr {
        values: AtomIndexed<serde_json::Value>,
    }
    let r: Repr = parse_json(text, "function")?;
    let values = r.values.resolve(space, "function values")?;
    parse_json(
        &serde_json::json!({ "values": values }).to_string(),
        "function",
    )
}

#[derive(Serialize)]
pub struct PovmJson<'a> {
    pub space: &'a FiniteMeasureSpace,
    pub dim: usize,
    pub effects: &'a [HermitianOperator],
}

pub fn povm_json(nu: &Povm) -> serde_json::Value {
    serde_json::to_value(PovmJson {
        space: nu.space(),
        dim: nu.dim(),
        effects: nu.effects(),
    })
    .expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn povm_with_keyed_effects() {
        let text = r#"{"space": {"atoms": ["a", "b"], "masses": [1, 1]}, "dim": 2,
            "effects": {"b": [[0.5, 0], [0, 0.5]], "a": [[0.5, 0], [0, 0.5]]}}"#;
        let nu = parse_povm(text, None).unwrap();
        assert!(nu.is_quantum_probability());
        let back = parse_povm(&povm_json(&nu).to_string(), None).unwrap();
        assert_eq!(back.effects(), nu.effects());
    }

    #[test]
    fn qrv_formats() {
        let space = parse_space(r#"{"atoms": [0, 1], "masses": [1, 1]}"#).unwrap();
        let a = parse_qrv(r#"{"values": {"1": [[1]], "0": [[[2, 1]]]}}"#, Some(&space)).unwrap();
        assert_eq!(a.value(0)[(0, 0)].im, 1.0);
        assert_eq!(a.value(1)[(0, 0)].re, 1.0);
        let b = parse_qrv(r#"{"dim": 1, "values": [[[2]], [[1]]]}"#, None).unwrap();
        assert_eq!(b.len(), 2);
        assert!(parse_qrv(r#"{"dim": 2, "values": [[[2]]]}"#, None).is_err());
        assert!(parse_qrv(r#"{"values": {"0": [[1]]}}"#, None).is_err());
    }

    #[test]
    fn invalid_inputs_carry_location() {
        let err = parse_povm("{\"space\": {\"atoms\": [0], \"masses\": [1]},\n \"effects\": [[[1, 0], [0, -1]]]}", None)
            .unwrap_err();
        assert!(matches!(err, Error::MatrixNotPsd { .. }));
        let err = parse_space("{\"atoms\": [0],\n \"masses\": [1,]}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn state_forms() {
        assert!(parse_state("[[0.5, 0], [0, 0.5]]").is_ok());
        assert!(parse_state(r#"{"rho": [[1, 0], [0, 0]]}"#).is_ok());
        assert!(parse_state("[[2, 0], [0, 0]]").is_err());
    }
}
