//! Scene description: face-part cropping, attribute and hair classification,
//! carried items, threat rating and sentence synthesis.

mod attributes;
mod compose;
mod hair;
mod items;
mod landmarks;
mod parts;
mod threat;

pub use attributes::{
    attribute_crop, classify_attribute, load_attribute_corpus, train_attribute_model,
    train_attribute_models, AttributeConfig, AttributeLabel, AttributeModel, AttributeModels,
    AttributeSample, FaceAttributes, FaceDescriber,
};
pub use compose::{compose_description, compose_scene};
pub use hair::{hair_color, HairThresholds};
pub use items::{AnnotatedItems, ItemDetection, ItemDetector, NoItems};
pub use landmarks::{Landmarks68, LandmarkProvider, TemplateLandmarker, LANDMARK_COUNT, TEMPLATE_68};
pub use parts::{crop_face_parts, part_regions, FacePart, FaceParts, PartRegions, MIN_PART_SIDE};
pub use threat::assess_threat;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DescriptionError {
    #[error("malformed landmarks: {0}")]
    MalformedLandmarks(String),
    #[error("empty region")]
    EmptyRegion,
    #[error("attribute model for {0} is not trained")]
    Untrained(Attribute),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("attribute corpus: {0}")]
    Corpus(String),
    #[error("item detector: {0}")]
    Items(String),
    #[error(transparent)]
    Recognition(#[from] crate::recognition::RecognitionError),
    #[error(transparent)]
    Vision(#[from] crate::vision::VisionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Friend,
    Family,
    Caregiver,
    Unknown,
}

impl Group {
    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Friend => "friend",
            Group::Family => "family",
            Group::Caregiver => "caregiver",
            Group::Unknown => "unknown",
        }
    }
}

impl std::str::FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "friend" => Ok(Group::Friend),
            "family" => Ok(Group::Family),
            "caregiver" => Ok(Group::Caregiver),
            "unknown" => Ok(Group::Unknown),
            other => Err(format!("unknown group {other:?}")),
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    Yes,
    No,
    #[default]
    Unknown,
}

impl Tri {
    pub fn is_yes(&self) -> bool {
        *self == Tri::Yes
    }
}

impl From<bool> for Tri {
    fn from(b: bool) -> Self {
        if b {
            Tri::Yes
        } else {
            Tri::No
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HairColor {
    Black,
    Brown,
    White,
    #[default]
    Unknown,
}

impl HairColor {
    pub fn as_str(&self) -> &'static str {
        match self {
            HairColor::Black => "black",
            HairColor::Brown => "brown",
            HairColor::White => "white",
            HairColor::Unknown => "unknown",
        }
    }
}

/// Face attributes with a trained classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Beard,
    Mustache,
    Eyeglasses,
    Mask,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::Beard,
        Attribute::Mustache,
        Attribute::Eyeglasses,
        Attribute::Mask,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Attribute::Beard => "beard",
            Attribute::Mustache => "mustache",
            Attribute::Eyeglasses => "eyeglasses",
            Attribute::Mask => "mask",
        }
    }
}

impl std::fmt::Display for Attribute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Carried or worn objects reported by an item detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Item {
    #[serde(rename = "gun")]
    Gun,
    #[serde(rename = "knife")]
    Knife,
    #[serde(rename = "scissors")]
    Scissors,
    #[serde(rename = "baseball bat")]
    BaseballBat,
    #[serde(rename = "iron bar")]
    IronBar,
    #[serde(rename = "eyeglass")]
    Eyeglass,
    #[serde(rename = "mask")]
    Mask,
    #[serde(rename = "cellphone")]
    Cellphone,
}

impl Item {
    pub const ALL: [Item; 8] = [
        Item::Gun,
        Item::Knife,
        Item::Scissors,
        Item::BaseballBat,
        Item::IronBar,
        Item::Eyeglass,
        Item::Mask,
        Item::Cellphone,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Item::Gun => "gun",
            Item::Knife => "knife",
            Item::Scissors => "scissors",
            Item::BaseballBat => "baseball bat",
            Item::IronBar => "iron bar",
            Item::Eyeglass => "eyeglass",
            Item::Mask => "mask",
            Item::Cellphone => "cellphone",
        }
    }

    pub fn is_weapon(&self) -> bool {
        matches!(
            self,
            Item::Gun | Item::Knife | Item::Scissors | Item::BaseballBat | Item::IronBar
        )
    }
}

impl std::str::FromStr for Item {
    type Err = DescriptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Item::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| DescriptionError::UnknownItem(s.to_string()))
    }
}

impl std::fmt::Display for Item {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreatLevel {
    #[default]
    None,
    Medium,
    High,
}

impl ThreatLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThreatLevel::None => "none",
            ThreatLevel::Medium => "medium",
            ThreatLevel::High => "high",
        }
    }
}

impl std::str::FromStr for ThreatLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ThreatLevel::None),
            "medium" => Ok(ThreatLevel::Medium),
            "high" => Ok(ThreatLevel::High),
            other => Err(format!("unknown threat level {other:?}")),
        }
    }
}

impl std::fmt::Display for ThreatLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a sentence is built from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionFacts {
    /// Display name; `None` for an unrecognized person.
    pub identity: Option<String>,
    pub group: Group,
    pub hair_color: HairColor,
    pub has_beard: Tri,
    pub has_mustache: Tri,
    pub has_eyeglasses: Tri,
    pub has_mask: Tri,
    pub items: BTreeSet<Item>,
    /// Phrase such as "at the back door".
    pub location: String,
}

impl DescriptionFacts {
    /// An unrecognized person with nothing else known.
    pub fn unknown(location: impl Into<String>) -> Self {
        DescriptionFacts {
            identity: None,
            group: Group::Unknown,
            hair_color: HairColor::Unknown,
            has_beard: Tri::Unknown,
            has_mustache: Tri::Unknown,
            has_eyeglasses: Tri::Unknown,
            has_mask: Tri::Unknown,
            items: BTreeSet::new(),
            location: location.into(),
        }
    }

    pub fn known(name: impl Into<String>, group: Group, location: impl Into<String>) -> Self {
        DescriptionFacts {
            identity: Some(name.into()),
            group,
            ..Self::unknown(location)
        }
    }

    pub fn is_unknown(&self) -> bool {
        self.identity.is_none() || self.group == Group::Unknown
    }

    pub fn wears_mask(&self) -> bool {
        self.has_mask.is_yes() || self.items.contains(&Item::Mask)
    }

    pub fn wears_eyeglasses(&self) -> bool {
        self.has_eyeglasses.is_yes() || self.items.contains(&Item::Eyeglass)
    }
}
