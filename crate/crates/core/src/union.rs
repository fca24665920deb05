//! Closed, internally tagged unions.
//!
//! Every union in the wire format is an enum of newtype variants wrapping a
//! struct, encoded as the struct's fields plus a `"type"` discriminator.
//! Serialization goes through serde's derive; deserialization is hand-rolled
//! so that errors inside a variant keep their JSON-pointer location (serde's
//! own internally tagged path buffers the content and loses it).

macro_rules! tagged_union {
    (
        $(#[$meta:meta])*
        $vis:vis enum $name:ident {
            $( $(#[$vmeta:meta])* $variant:ident($inner:ty) => $tag:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, serde::Serialize)]
        #[serde(tag = "type")]
        $vis enum $name {
            $( $(#[$vmeta])* #[serde(rename = $tag)] $variant($inner), )+
        }

        impl $name {
            /// Discriminator strings, in declaration order.
            pub const TAGS: &'static [&'static str] = &[$($tag),+];

            pub fn tag(&self) -> &'static str {
                match self {
                    $( Self::$variant(_) => $tag, )+
                }
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                use serde::de::Error as _;
                let mut map =
                    <serde_json::Map<String, serde_json::Value> as serde::Deserialize>::deserialize(deserializer)?;
                let tag = match map.remove("type") {
                    Some(serde_json::Value::String(tag)) => tag,
                    Some(_) => {
                        return Err(D::Error::custom($crate::wire::located(
                            "/type",
                            "discriminator `type` must be a string",
                        )))
                    }
                    None => {
                        return Err(D::Error::custom($crate::wire::located(
                            "/type",
                            concat!("missing discriminator `type` for ", stringify!($name)),
                        )))
                    }
                };
                let rest = serde_json::Value::Object(map);
                match tag.as_str() {
                    $( $tag => $crate::wire::from_value_located::<$inner>(rest)
                        .map(Self::$variant)
                        .map_err(D::Error::custom), )+
                    other => Err(D::Error::custom($crate::wire::located(
                        "/type",
                        &format!(
                            "unknown discriminator `{}` for {}; expected one of {:?}",
                            other,
                            stringify!($name),
                            Self::TAGS
                        ),
                    ))),
                }
            }
        }

        impl schemars::JsonSchema for $name {
            fn schema_name() -> std::borrow::Cow<'static, str> {
                stringify!($name).into()
            }

            fn json_schema(generator: &mut schemars::SchemaGenerator) -> schemars::Schema {
                let variants: Vec<serde_json::Value> = vec![
                    $( $crate::union::tag_variant_schema(
                        <$inner as schemars::JsonSchema>::json_schema(generator),
                        $tag,
                    ), )+
                ];
                schemars::json_schema!({ "oneOf": variants })
            }
        }
    };
}

pub(crate) use tagged_union;

/// Adds the `"type": const` property to an inlined variant struct schema.
pub(crate) fn tag_variant_schema(schema: schemars::Schema, tag: &str) -> serde_json::Value {
    let mut value = schema.to_value();
    if let Some(obj) = value.as_object_mut() {
        let props = obj
            .entry("properties")
            .or_insert_with(|| serde_json::json!({}));
        if let Some(props) = props.as_object_mut() {
            props.insert("type".into(), serde_json::json!({ "const": tag }));
        }
        let required = obj
            .entry("required")
            .or_insert_with(|| serde_json::json!([]));
        if let Some(required) = required.as_array_mut() {
            required.insert(0, serde_json::json!("type"));
        }
    }
    value
}
