use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use super::{Entity, Kind, SPEC_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown kind `{0}`")]
pub struct UnknownKind(pub String);

/// JSON Schema (draft 2020-12) for the enveloped document of `T`.
pub fn schema_for<T: Entity>() -> Json {
    let generator = schemars::generate::SchemaSettings::draft2020_12().into_generator();
    let mut payload = generator.into_root_schema_for::<T>().to_value();
    let obj = payload.as_object_mut().expect("object schema");
    let defs = obj.remove("$defs");
    obj.remove("$schema");
    let mut doc = Map::new();
    doc.insert(
        "$schema".into(),
        json!("https://json-schema.org/draft/2020-12/schema"),
    );
    doc.insert("title".into(), json!(T::KIND.as_str()));
    doc.insert("type".into(), json!("object"));
    doc.insert(
        "properties".into(),
        json!({
            "spec_version": {"const": SPEC_VERSION},
            "kind": {"const": T::KIND.as_str()},
            "payload": payload,
        }),
    );
    doc.insert(
        "required".into(),
        json!(["spec_version", "kind", "payload"]),
    );
    doc.insert("additionalProperties".into(), json!(false));
    if let Some(defs) = defs {
        doc.insert("$defs".into(), defs);
    }
    Json::Object(doc)
}

/// Schema for a kind given by name.
pub fn schema(kind: &str) -> Result<Json, UnknownKind> {
    let kind = Kind::parse(kind).ok_or_else(|| UnknownKind(kind.to_owned()))?;
    Ok(match kind {
        Kind::Domain => schema_for::<crate::domain::Domain>(),
        Kind::Experiments => schema_for::<crate::domain::ExperimentTable>(),
        Kind::Proposals => schema_for::<crate::domain::ProposalTable>(),
        Kind::Strategy => schema_for::<crate::strategy::StrategyState>(),
        Kind::Surrogate => schema_for::<crate::gp::TrainedGp>(),
        Kind::Campaign => schema_for::<crate::campaign::Campaign>(),
    })
}

/// Every union with its discriminator strings.
pub fn all_discriminators() -> Vec<(&'static str, &'static [&'static str])> {
    use crate::domain::{Constraint, Input, Objective};
    vec![
        ("Input", Input::TAGS),
        ("Objective", Objective::TAGS),
        ("Constraint", Constraint::TAGS),
        ("SamplerConfig", crate::sampling::SamplerConfig::TAGS),
        ("DesignConfig", crate::doe::DesignConfig::TAGS),
        ("Kernel", crate::gp::Kernel::TAGS),
        ("StrategyConfig", crate::strategy::StrategyConfig::TAGS),
        ("StepCondition", crate::strategy::StepCondition::TAGS),
        (
            "AcquisitionConfig",
            crate::strategy::AcquisitionConfig::TAGS,
        ),
        ("FeatureEncoding", crate::gp::FeatureEncoding::TAGS),
    ]
}
