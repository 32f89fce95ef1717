//! Movie-ticket booking ontology: intents, slots, dialogue acts, the discrete
//! action sets used by the networks, the knowledge base and user goals.

mod actions;
mod goal;
mod kb;
pub(crate) mod jsonl;

pub use actions::{ActionSet, ActionTemplate};
pub use goal::{
    build_goal_database, load_goal_database, sample_user_goal, save_goal_database, GoalConfig,
    UserGoal, OPTIONAL_SLOTS, REQUIRED_SLOTS,
};
pub use kb::{KbConfig, KbRow, KnowledgeBase, KB_SLOTS};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Dialogue-act intents of the annotation schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Request,
    Inform,
    Deny,
    ConfirmQuestion,
    ConfirmAnswer,
    Greeting,
    Closing,
    NotSure,
    MultipleChoice,
    Thanks,
    Welcome,
}

impl Intent {
    pub const ALL: [Intent; 11] = [
        Intent::Request,
        Intent::Inform,
        Intent::Deny,
        Intent::ConfirmQuestion,
        Intent::ConfirmAnswer,
        Intent::Greeting,
        Intent::Closing,
        Intent::NotSure,
        Intent::MultipleChoice,
        Intent::Thanks,
        Intent::Welcome,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Intent::Request => "request",
            Intent::Inform => "inform",
            Intent::Deny => "deny",
            Intent::ConfirmQuestion => "confirm_question",
            Intent::ConfirmAnswer => "confirm_answer",
            Intent::Greeting => "greeting",
            Intent::Closing => "closing",
            Intent::NotSure => "not_sure",
            Intent::MultipleChoice => "multiple_choice",
            Intent::Thanks => "thanks",
            Intent::Welcome => "welcome",
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Slots of the annotation schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    City,
    Closing,
    Date,
    #[serde(rename = "distanceconstraints")]
    DistanceConstraints,
    Greeting,
    #[serde(rename = "moviename")]
    MovieName,
    #[serde(rename = "numberofpeople")]
    NumberOfPeople,
    Price,
    #[serde(rename = "starttime")]
    StartTime,
    State,
    #[serde(rename = "taskcomplete")]
    TaskComplete,
    Theater,
    TheaterChain,
    Ticket,
    VideoFormat,
    Zip,
}

impl Slot {
    pub const ALL: [Slot; 16] = [
        Slot::City,
        Slot::Closing,
        Slot::Date,
        Slot::DistanceConstraints,
        Slot::Greeting,
        Slot::MovieName,
        Slot::NumberOfPeople,
        Slot::Price,
        Slot::StartTime,
        Slot::State,
        Slot::TaskComplete,
        Slot::Theater,
        Slot::TheaterChain,
        Slot::Ticket,
        Slot::VideoFormat,
        Slot::Zip,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Slot::City => "city",
            Slot::Closing => "closing",
            Slot::Date => "date",
            Slot::DistanceConstraints => "distanceconstraints",
            Slot::Greeting => "greeting",
            Slot::MovieName => "moviename",
            Slot::NumberOfPeople => "numberofpeople",
            Slot::Price => "price",
            Slot::StartTime => "starttime",
            Slot::State => "state",
            Slot::TaskComplete => "taskcomplete",
            Slot::Theater => "theater",
            Slot::TheaterChain => "theater_chain",
            Slot::Ticket => "ticket",
            Slot::VideoFormat => "video_format",
            Slot::Zip => "zip",
        }
    }

    pub fn from_name(name: &str) -> Option<Slot> {
        Slot::ALL.iter().copied().find(|s| s.name() == name)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inform-slot value used by the agent when the knowledge base has no row
/// compatible with what it knows.
pub const NO_MATCH: &str = "no match available";

/// One dialogue act: an intent plus slot-value pairs and requested slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueAct {
    pub intent: Intent,
    #[serde(default)]
    pub inform_slots: BTreeMap<Slot, String>,
    #[serde(default)]
    pub request_slots: BTreeSet<Slot>,
}

/// Reasons a [`DialogueAct`] is rejected by [`DialogueAct::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActError {
    RequestWithoutSlot,
    InformWithoutSlot,
    InformWithRequest,
}

impl fmt::Display for ActError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActError::RequestWithoutSlot => f.write_str("request act needs at least one request slot"),
            ActError::InformWithoutSlot => f.write_str("inform act needs at least one inform slot"),
            ActError::InformWithRequest => f.write_str("inform act cannot carry request slots"),
        }
    }
}

impl std::error::Error for ActError {}

impl DialogueAct {
    pub fn new(intent: Intent) -> Self {
        DialogueAct {
            intent,
            inform_slots: BTreeMap::new(),
            request_slots: BTreeSet::new(),
        }
    }

    pub fn request(slot: Slot) -> Self {
        let mut act = DialogueAct::new(Intent::Request);
        act.request_slots.insert(slot);
        act
    }

    pub fn inform(slot: Slot, value: impl Into<String>) -> Self {
        DialogueAct::new(Intent::Inform).with_inform(slot, value)
    }

    pub fn with_inform(mut self, slot: Slot, value: impl Into<String>) -> Self {
        self.inform_slots.insert(slot, value.into());
        self
    }

    pub fn with_request(mut self, slot: Slot) -> Self {
        self.request_slots.insert(slot);
        self
    }

    pub fn validate(&self) -> Result<(), ActError> {
        match self.intent {
            Intent::Request if self.request_slots.is_empty() => Err(ActError::RequestWithoutSlot),
            Intent::Inform if self.inform_slots.is_empty() => Err(ActError::InformWithoutSlot),
            Intent::Inform if !self.request_slots.is_empty() => Err(ActError::InformWithRequest),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.intent)?;
        let mut first = true;
        for slot in &self.request_slots {
            if !first {
                f.write_str("; ")?;
            }
            write!(f, "{slot}")?;
            first = false;
        }
        for (slot, value) in &self.inform_slots {
            if !first {
                f.write_str("; ")?;
            }
            write!(f, "{slot}={value}")?;
            first = false;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_sizes() {
        assert_eq!(Intent::ALL.len(), 11);
        assert_eq!(Slot::ALL.len(), 16);
        for (i, s) in Slot::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
        }
        for (i, it) in Intent::ALL.iter().enumerate() {
            assert_eq!(it.index(), i);
        }
    }

    #[test]
    fn slot_names_roundtrip_through_serde() {
        for slot in Slot::ALL {
            let json = serde_json::to_string(&slot).unwrap();
            assert_eq!(json, format!("\"{}\"", slot.name()));
            assert_eq!(Slot::from_name(slot.name()), Some(slot));
        }
    }

    #[test]
    fn act_invariants() {
        assert_eq!(
            DialogueAct::new(Intent::Request).validate(),
            Err(ActError::RequestWithoutSlot)
        );
        assert_eq!(
            DialogueAct::new(Intent::Inform).validate(),
            Err(ActError::InformWithoutSlot)
        );
        let bad = DialogueAct::inform(Slot::City, "seattle").with_request(Slot::Theater);
        assert_eq!(bad.validate(), Err(ActError::InformWithRequest));
        let ok = DialogueAct::request(Slot::Theater).with_inform(Slot::MovieName, "batman");
        assert!(ok.validate().is_ok());
        assert_eq!(ok.to_string(), "request(theater; moviename=batman)");
        assert!(DialogueAct::new(Intent::Thanks).validate().is_ok());
    }
}
