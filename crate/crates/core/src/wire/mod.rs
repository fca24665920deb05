//! Versioned JSON documents for every entity in the ask/tell loop.
//!
//! A document is an envelope
//! `{"spec_version":"1","kind":<kind>,"payload":<entity>}`. Schemas are
//! closed (unknown fields are rejected), unions carry a `"type"`
//! discriminator, object keys follow declaration order, reals use the
//! shortest round-trip decimal form and absent optionals are omitted.
//! Errors are reported with JSON-pointer locations.

pub mod schema;

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::domain::{Domain, ExperimentTable, ProposalTable, ValidationError};

pub use schema::{all_discriminators, schema, schema_for};

pub const SPEC_VERSION: &str = "1";

/// Entity kind carried in an envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Domain,
    Strategy,
    Surrogate,
    Experiments,
    Proposals,
    Campaign,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::Domain,
        Kind::Strategy,
        Kind::Surrogate,
        Kind::Experiments,
        Kind::Proposals,
        Kind::Campaign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Domain => "domain",
            Kind::Strategy => "strategy",
            Kind::Surrogate => "surrogate",
            Kind::Experiments => "experiments",
            Kind::Proposals => "proposals",
            Kind::Campaign => "campaign",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A serializable entity with a document kind and self-contained validation.
pub trait Entity: Serialize + DeserializeOwned + schemars::JsonSchema {
    const KIND: Kind;

    /// Invariants checkable without outside context. Paths are dotted
    /// (`constraints[2].features[0]`), relative to the payload.
    fn validate_entity(&self) -> Result<(), Vec<ValidationError>>;
}

impl Entity for Domain {
    const KIND: Kind = Kind::Domain;

    fn validate_entity(&self) -> Result<(), Vec<ValidationError>> {
        self.validate()
    }
}

impl Entity for ExperimentTable {
    const KIND: Kind = Kind::Experiments;

    fn validate_entity(&self) -> Result<(), Vec<ValidationError>> {
        let errors: Vec<_> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                let inputs = r.inputs.iter().filter_map(move |(k, v)| match v {
                    crate::domain::Value::Real(x) if !x.is_finite() => Some(ValidationError::new(
                        format!("rows[{i}].inputs.{k}"),
                        "value must be finite",
                    )),
                    _ => None,
                });
                let outputs =
                    r.outputs
                        .iter()
                        .filter(|(_, y)| !y.is_finite())
                        .map(move |(k, _)| {
                            ValidationError::new(
                                format!("rows[{i}].outputs.{k}"),
                                "output values must be finite",
                            )
                        });
                inputs.chain(outputs).collect::<Vec<_>>()
            })
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

impl Entity for ProposalTable {
    const KIND: Kind = Kind::Proposals;

    fn validate_entity(&self) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();
        for (i, p) in self.rows.iter().enumerate() {
            for (k, pred) in &p.predictions {
                if !(pred.mean.is_finite() && pred.std.is_finite() && pred.desirability.is_finite())
                    || pred.std < 0.0
                {
                    errors.push(ValidationError::new(
                        format!("rows[{i}].predictions.{k}"),
                        "prediction must be finite with std >= 0",
                    ));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// One located deserialization failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeserializationError {
    /// JSON pointer into the input document (`""` is the root).
    pub path: String,
    pub message: String,
    /// Excerpt of the offending fragment, when it exists in the input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub got: Option<String>,
}

impl fmt::Display for DeserializationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() {
            "/"
        } else {
            &self.path
        };
        write!(f, "{path}: {}", self.message)?;
        if let Some(got) = &self.got {
            write!(f, " (got {got})")?;
        }
        Ok(())
    }
}

/// Why a document was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    /// Not JSON at all, or the JSON does not have the expected shape.
    #[error("malformed document: {}", display_list(.0))]
    Malformed(Vec<DeserializationError>),
    /// Well-formed, but an entity invariant does not hold.
    #[error("invalid document: {}", display_list(.0))]
    Invalid(Vec<DeserializationError>),
}

impl WireError {
    pub fn errors(&self) -> &[DeserializationError] {
        match self {
            WireError::Malformed(e) | WireError::Invalid(e) => e,
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, WireError::Invalid(_))
    }
}

fn display_list(errors: &[DeserializationError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error("non-finite real at {0}")]
    NonFinite(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    spec_version: &'static str,
    kind: &'static str,
    payload: &'a T,
}

/// Serializes an entity into its enveloped document.
pub fn serialize<T: Entity>(entity: &T) -> Result<String, SerializeError> {
    let doc = serde_json::to_value(EnvelopeRef {
        spec_version: SPEC_VERSION,
        kind: T::KIND.as_str(),
        payload: entity,
    })?;
    to_canonical_string(&doc)
}

/// Serializes a bare document (no envelope), e.g. an HTTP request body.
pub fn serialize_document<T: Serialize>(value: &T) -> Result<String, SerializeError> {
    to_canonical_string(&serde_json::to_value(value)?)
}

fn to_canonical_string(doc: &Json) -> Result<String, SerializeError> {
    // Absent optionals are omitted, so the only source of `null` is a
    // non-finite real that serde_json rendered as null.
    if let Some(path) = find_null(doc, String::new()) {
        return Err(SerializeError::NonFinite(path));
    }
    Ok(serde_json::to_string(doc)?)
}

fn find_null(v: &Json, path: String) -> Option<String> {
    match v {
        Json::Null => Some(if path.is_empty() { "/".into() } else { path }),
        Json::Array(items) => items
            .iter()
            .enumerate()
            .find_map(|(i, item)| find_null(item, format!("{path}/{i}"))),
        Json::Object(map) => map
            .iter()
            .find_map(|(k, item)| find_null(item, format!("{path}/{}", escape_pointer(k)))),
        _ => None,
    }
}

/// Parses an enveloped document of kind `T::KIND` and validates it.
pub fn deserialize<T: Entity>(text: &str) -> Result<T, WireError> {
    deserialize_bytes(text.as_bytes())
}

pub fn deserialize_bytes<T: Entity>(bytes: &[u8]) -> Result<T, WireError> {
    let doc = parse_json(bytes)?;
    let payload = open_envelope(&doc, Some(T::KIND))?.1;
    decode_payload::<T>(&doc, payload, "/payload")
}

/// Parses a bare document (no envelope) into `T` and validates it.
pub fn from_document<T: Entity>(text: &str) -> Result<T, WireError> {
    let doc = parse_json(text.as_bytes())?;
    decode_payload::<T>(&doc, &doc, "")
}

/// Parses a bare JSON value with located errors but no entity validation.
pub fn from_json<T: DeserializeOwned>(
    root: &Json,
    value: &Json,
    prefix: &str,
) -> Result<T, WireError> {
    from_value_located::<T>(value.clone()).map_err(|msg| {
        let (inner, message) = split_located(&msg);
        WireError::Malformed(vec![error_at(root, format!("{prefix}{inner}"), message)])
    })
}

/// Locates dotted validation paths under the pointer `prefix` of `root`.
pub fn invalid(root: &Json, prefix: &str, errors: Vec<ValidationError>) -> WireError {
    WireError::Invalid(
        errors
            .into_iter()
            .map(|e| {
                error_at(
                    root,
                    format!("{prefix}{}", dotted_to_pointer(&e.path)),
                    e.message,
                )
            })
            .collect(),
    )
}

fn decode_payload<T: Entity>(root: &Json, payload: &Json, prefix: &str) -> Result<T, WireError> {
    let entity: T = from_json(root, payload, prefix)?;
    entity
        .validate_entity()
        .map_err(|errs| invalid(root, prefix, errs))?;
    Ok(entity)
}

/// Parses JSON text, reporting malformed input with its byte offset.
pub fn parse_json(bytes: &[u8]) -> Result<Json, WireError> {
    serde_json::from_slice(bytes).map_err(|e| {
        let offset = byte_offset(bytes, e.line(), e.column());
        WireError::Malformed(vec![DeserializationError {
            path: String::new(),
            message: format!("malformed JSON at byte {offset}: {e}"),
            got: None,
        }])
    })
}

/// Validates the envelope and returns its kind and payload.
pub fn open_envelope(doc: &Json, expected: Option<Kind>) -> Result<(Kind, &Json), WireError> {
    let malformed = |path: &str, message: String| {
        WireError::Malformed(vec![error_at(doc, path.into(), message)])
    };
    let Some(obj) = doc.as_object() else {
        return Err(malformed("", "document must be an object".into()));
    };
    if let Some(extra) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "spec_version" | "kind" | "payload"))
    {
        return Err(malformed(
            &format!("/{}", escape_pointer(extra)),
            format!("unknown field `{extra}`"),
        ));
    }
    match obj.get("spec_version") {
        Some(Json::String(v)) if v == SPEC_VERSION => {}
        Some(_) => {
            return Err(malformed(
                "/spec_version",
                format!("unsupported spec_version; this build reads \"{SPEC_VERSION}\""),
            ))
        }
        None => {
            return Err(malformed(
                "/spec_version",
                "missing field `spec_version`".into(),
            ))
        }
    }
    let kind = match obj.get("kind") {
        Some(Json::String(k)) => Kind::parse(k).ok_or_else(|| {
            let known: Vec<_> = Kind::ALL.iter().map(|k| k.as_str()).collect();
            malformed(
                "/kind",
                format!("unknown kind `{k}`; expected one of {known:?}"),
            )
        })?,
        Some(_) => return Err(malformed("/kind", "kind must be a string".into())),
        None => return Err(malformed("/kind", "missing field `kind`".into())),
    };
    if let Some(expected) = expected {
        if kind != expected {
            return Err(malformed(
                "/kind",
                format!("expected kind `{expected}`, got `{kind}`"),
            ));
        }
    }
    let payload = obj
        .get("payload")
        .ok_or_else(|| malformed("/payload", "missing field `payload`".into()))?;
    Ok((kind, payload))
}

fn error_at(root: &Json, path: String, message: String) -> DeserializationError {
    let got = root.pointer(&path).map(excerpt);
    DeserializationError { path, message, got }
}

fn excerpt(v: &Json) -> String {
    let text = v.to_string();
    if text.chars().count() > 80 {
        let cut: String = text.chars().take(77).collect();
        format!("{cut}...")
    } else {
        text
    }
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

pub(crate) fn escape_pointer(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

/// `constraints[2].features[0]` → `/constraints/2/features/0`.
pub fn dotted_to_pointer(path: &str) -> String {
    let mut out = String::new();
    for part in path.split('.').filter(|p| !p.is_empty()) {
        let mut rest = part;
        if let Some(b) = rest.find('[') {
            out.push('/');
            out.push_str(&escape_pointer(&rest[..b]));
            rest = &rest[b..];
            while let Some(stripped) = rest.strip_prefix('[') {
                let end = stripped.find(']').unwrap_or(stripped.len());
                out.push('/');
                out.push_str(&stripped[..end]);
                rest = stripped.get(end + 1..).unwrap_or("");
            }
        } else {
            out.push('/');
            out.push_str(&escape_pointer(rest));
        }
    }
    out
}

const MARK: char = '\u{1}';

/// Encodes a JSON-pointer location into a serde error message so that it
/// survives a trip through `serde::de::Error::custom`.
pub(crate) fn located(pointer: &str, message: &str) -> String {
    format!("{MARK}{pointer}{MARK}{message}")
}

fn split_located(msg: &str) -> (String, String) {
    if let Some(rest) = msg.strip_prefix(MARK) {
        if let Some(end) = rest.find(MARK) {
            return (rest[..end].to_owned(), rest[end + 1..].to_owned());
        }
    }
    (String::new(), msg.to_owned())
}

/// Deserializes a value, encoding the failure location into the message.
pub(crate) fn from_value_located<T: DeserializeOwned>(value: Json) -> Result<T, String> {
    serde_path_to_error::deserialize::<_, T>(value).map_err(|e| {
        let mut pointer = String::new();
        for seg in e.path().iter() {
            match seg {
                serde_path_to_error::Segment::Seq { index } => {
                    pointer.push_str(&format!("/{index}"))
                }
                serde_path_to_error::Segment::Map { key } => {
                    pointer.push('/');
                    pointer.push_str(&escape_pointer(key));
                }
                _ => {}
            }
        }
        let (inner, message) = split_located(&e.inner().to_string());
        located(&format!("{pointer}{inner}"), &message)
    })
}
