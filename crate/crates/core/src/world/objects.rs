use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::world::WorldError;

/// Declarative relations of an object. Each entry names another object id
/// or a zone label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carried_by: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocking: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adjacent_to: Vec<String>,
}

impl Relations {
    pub fn references(&self) -> impl Iterator<Item = &str> {
        self.carried_by
            .iter()
            .chain(self.blocking.iter())
            .chain(self.adjacent_to.iter())
            .map(String::as_str)
    }
}

/// A physical object in the world: task targets, distractors, doors, cargo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: String,
    pub class: String,
    pub attributes: BTreeSet<String>,
    pub relations: Relations,
    pub pose: Point2,
    pub footprint_radius: f64,
    pub solid: bool,
}

impl WorldObject {
    pub fn has_attribute(&self, tag: &str) -> bool {
        self.attributes.contains(tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Required,
    Forbidden,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeLiteral {
    pub tag: String,
    pub polarity: Polarity,
}

/// What a relation literal points at.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Referent {
    /// An object id or a zone label name.
    Named(String),
    /// Any object of `class` carrying all `attributes`.
    Kind {
        class: String,
        #[serde(default)]
        attributes: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationLiteral {
    /// One of `blocking`, `carrying`, `carried_by`, `next_to`.
    pub kind: String,
    pub referent: Referent,
}

/// Compiled target description: a class plus attribute and relation literals,
/// all of which must hold.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetPredicate {
    pub class: String,
    #[serde(default)]
    pub attributes: Vec<AttributeLiteral>,
    #[serde(default)]
    pub relations: Vec<RelationLiteral>,
}

pub const RELATION_KINDS: [&str; 4] = ["blocking", "carrying", "carried_by", "next_to"];

impl TargetPredicate {
    pub fn class_only(class: impl Into<String>) -> Self {
        Self { class: class.into(), attributes: Vec::new(), relations: Vec::new() }
    }

    pub fn require(mut self, tag: impl Into<String>) -> Self {
        self.attributes.push(AttributeLiteral { tag: tag.into(), polarity: Polarity::Required });
        self
    }

    pub fn forbid(mut self, tag: impl Into<String>) -> Self {
        self.attributes.push(AttributeLiteral { tag: tag.into(), polarity: Polarity::Forbidden });
        self
    }

    pub fn related(mut self, kind: impl Into<String>, referent: Referent) -> Self {
        self.relations.push(RelationLiteral { kind: kind.into(), referent });
        self
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.class.trim().is_empty() {
            return Err(WorldError::Predicate("predicate has no class".into()));
        }
        for lit in &self.attributes {
            let clash = self
                .attributes
                .iter()
                .any(|o| o.tag == lit.tag && o.polarity != lit.polarity);
            if clash {
                return Err(WorldError::Predicate(format!(
                    "attribute {:?} is both required and forbidden",
                    lit.tag
                )));
            }
        }
        for rel in &self.relations {
            if !RELATION_KINDS.contains(&rel.kind.as_str()) {
                return Err(WorldError::Predicate(format!("unknown relation kind {:?}", rel.kind)));
            }
        }
        Ok(())
    }

    /// Short human-readable rendering, e.g. `fire_extinguisher[-yellow_tag]`.
    pub fn summary(&self) -> String {
        let mut parts: Vec<String> = self
            .attributes
            .iter()
            .map(|a| match a.polarity {
                Polarity::Required => format!("+{}", a.tag),
                Polarity::Forbidden => format!("-{}", a.tag),
            })
            .collect();
        parts.extend(self.relations.iter().map(|r| match &r.referent {
            Referent::Named(n) => format!("{}:{}", r.kind, n),
            Referent::Kind { class, attributes } if attributes.is_empty() => format!("{}:{}", r.kind, class),
            Referent::Kind { class, attributes } => format!("{}:{}({})", r.kind, class, attributes.join(",")),
        }));
        if parts.is_empty() {
            self.class.clone()
        } else {
            format!("{}[{}]", self.class, parts.join(" "))
        }
    }
}

/// Read-only view of everything a relation literal can refer to.
pub trait RelationGraph {
    fn object(&self, id: &str) -> Option<&WorldObject>;
    fn objects(&self) -> &[WorldObject];
    fn has_zone(&self, name: &str) -> bool;
}

fn referent_matches(graph: &dyn RelationGraph, reference: &str, referent: &Referent) -> bool {
    match referent {
        Referent::Named(name) => reference == name,
        Referent::Kind { class, attributes } => graph
            .object(reference)
            .is_some_and(|o| &o.class == class && attributes.iter().all(|a| o.has_attribute(a))),
    }
}

/// True iff `obj` has the predicate's class and every literal holds.
pub fn object_matches(
    obj: &WorldObject,
    pred: &TargetPredicate,
    graph: &dyn RelationGraph,
) -> Result<bool, WorldError> {
    if obj.class != pred.class {
        return Ok(false);
    }
    let attrs_ok = pred.attributes.iter().all(|lit| match lit.polarity {
        Polarity::Required => obj.has_attribute(&lit.tag),
        Polarity::Forbidden => !obj.has_attribute(&lit.tag),
    });
    if !attrs_ok {
        return Ok(false);
    }
    for lit in &pred.relations {
        let holds = match lit.kind.as_str() {
            "blocking" => obj.relations.blocking.iter().any(|r| referent_matches(graph, r, &lit.referent)),
            "carried_by" => obj
                .relations
                .carried_by
                .as_deref()
                .is_some_and(|r| referent_matches(graph, r, &lit.referent)),
            "carrying" => graph.objects().iter().any(|cargo| {
                cargo.relations.carried_by.as_deref() == Some(obj.id.as_str())
                    && referent_matches(graph, &cargo.id, &lit.referent)
            }),
            "next_to" => {
                obj.relations.adjacent_to.iter().any(|r| referent_matches(graph, r, &lit.referent))
                    || graph.objects().iter().any(|other| {
                        other.relations.adjacent_to.iter().any(|r| r == &obj.id)
                            && referent_matches(graph, &other.id, &lit.referent)
                    })
            }
            other => {
                return Err(WorldError::Predicate(format!("unknown relation kind {other:?}")));
            }
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Objs(Vec<WorldObject>);

    impl RelationGraph for Objs {
        fn object(&self, id: &str) -> Option<&WorldObject> {
            self.0.iter().find(|o| o.id == id)
        }
        fn objects(&self) -> &[WorldObject] {
            &self.0
        }
        fn has_zone(&self, _: &str) -> bool {
            false
        }
    }

    fn obj(id: &str, class: &str, attrs: &[&str]) -> WorldObject {
        WorldObject {
            id: id.into(),
            class: class.into(),
            attributes: attrs.iter().map(|s| s.to_string()).collect(),
            relations: Relations::default(),
            pose: Point2::default(),
            footprint_radius: 0.2,
            solid: false,
        }
    }

    #[test]
    fn forbidden_tag_excludes_tagged_extinguisher() {
        let g = Objs(vec![obj("fe1", "fire_extinguisher", &["yellow_tag"])]);
        let pred = TargetPredicate::class_only("fire_extinguisher").forbid("yellow_tag");
        assert!(!object_matches(&g.0[0], &pred, &g).unwrap());
    }

    #[test]
    fn blocking_relation_by_name() {
        let mut b = obj("box1", "box", &[]);
        b.relations.blocking = vec!["door_1".into()];
        let g = Objs(vec![b, obj("door_1", "door", &[])]);
        let pred = TargetPredicate::class_only("box").related("blocking", Referent::Named("door_1".into()));
        assert!(object_matches(&g.0[0], &pred, &g).unwrap());
        let by_kind = TargetPredicate::class_only("box")
            .related("blocking", Referent::Kind { class: "door".into(), attributes: vec![] });
        assert!(object_matches(&g.0[0], &by_kind, &g).unwrap());
    }

    #[test]
    fn carrying_is_inverse_of_carried_by() {
        let cart = obj("cart1", "hand_pulled_cart", &[]);
        let mut fe = obj("fe9", "fire_extinguisher", &[]);
        fe.relations.carried_by = Some("cart1".into());
        let g = Objs(vec![cart, fe]);
        let carrying_fe = TargetPredicate::class_only("hand_pulled_cart")
            .related("carrying", Referent::Kind { class: "fire_extinguisher".into(), attributes: vec![] });
        let carrying_box = TargetPredicate::class_only("hand_pulled_cart")
            .related("carrying", Referent::Kind { class: "box".into(), attributes: vec![] });
        assert!(object_matches(&g.0[0], &carrying_fe, &g).unwrap());
        assert!(!object_matches(&g.0[0], &carrying_box, &g).unwrap());
    }

    #[test]
    fn class_only_matches_every_member() {
        let g = Objs(vec![obj("a", "toolbox", &["open"]), obj("b", "toolbox", &[]), obj("c", "tripod", &[])]);
        let pred = TargetPredicate::class_only("toolbox");
        let hits: Vec<bool> = g.0.iter().map(|o| object_matches(o, &pred, &g).unwrap()).collect();
        assert_eq!(hits, vec![true, true, false]);
    }

    #[test]
    fn unknown_relation_kind_errors() {
        let g = Objs(vec![obj("a", "toolbox", &[])]);
        let pred = TargetPredicate::class_only("toolbox").related("hovering_over", Referent::Named("x".into()));
        assert!(object_matches(&g.0[0], &pred, &g).is_err());
        assert!(pred.validate().is_err());
    }

    #[test]
    fn contradictory_literals_rejected() {
        let pred = TargetPredicate::class_only("toolbox").require("open").forbid("open");
        assert!(pred.validate().is_err());
        assert!(TargetPredicate::class_only(" ").validate().is_err());
    }

    #[test]
    fn summary_renders_literals() {
        let pred = TargetPredicate::class_only("fire_extinguisher").forbid("yellow_tag");
        assert_eq!(pred.summary(), "fire_extinguisher[-yellow_tag]");
    }
}
