use serde::{Deserialize, Serialize};

use super::{DialogueAct, Intent, Slot};

/// A discrete action: an intent plus at most one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionTemplate {
    pub id: usize,
    pub intent: Intent,
    pub slot: Option<Slot>,
}

/// Ordered, dense enumeration of action templates (ids `0..len`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    templates: Vec<ActionTemplate>,
}

const AGENT_SLOTS: [Slot; 6] = [
    Slot::MovieName,
    Slot::Theater,
    Slot::StartTime,
    Slot::Date,
    Slot::NumberOfPeople,
    Slot::City,
];

const AGENT_INTENT_ONLY: [Intent; 6] = [
    Intent::Deny,
    Intent::ConfirmQuestion,
    Intent::ConfirmAnswer,
    Intent::Greeting,
    Intent::Closing,
    Intent::Thanks,
];

const USER_INFORM_SLOTS: [Slot; 12] = [
    Slot::MovieName,
    Slot::Theater,
    Slot::StartTime,
    Slot::Date,
    Slot::NumberOfPeople,
    Slot::City,
    Slot::State,
    Slot::Zip,
    Slot::TheaterChain,
    Slot::VideoFormat,
    Slot::Price,
    Slot::DistanceConstraints,
];

const USER_INTENT_ONLY: [Intent; 4] = [Intent::Thanks, Intent::Closing, Intent::Deny, Intent::NotSure];

impl ActionSet {
    /// Builds a set from request slots, inform slots and intent-only acts,
    /// in that order.
    pub fn from_parts(request: &[Slot], inform: &[Slot], intent_only: &[Intent]) -> Self {
        let mut templates = Vec::with_capacity(request.len() + inform.len() + intent_only.len());
        let parts = request
            .iter()
            .map(|&s| (Intent::Request, Some(s)))
            .chain(inform.iter().map(|&s| (Intent::Inform, Some(s))))
            .chain(intent_only.iter().map(|&i| (i, None)));
        for (intent, slot) in parts {
            templates.push(ActionTemplate {
                id: templates.len(),
                intent,
                slot,
            });
        }
        ActionSet { templates }
    }

    /// The 19 default agent actions.
    pub fn agent() -> Self {
        let mut inform = AGENT_SLOTS.to_vec();
        inform.push(Slot::TaskComplete);
        Self::from_parts(&AGENT_SLOTS, &inform, &AGENT_INTENT_ONLY)
    }

    /// The 23 default user actions.
    pub fn user() -> Self {
        let mut request = AGENT_SLOTS.to_vec();
        request.push(Slot::Ticket);
        Self::from_parts(&request, &USER_INFORM_SLOTS, &USER_INTENT_ONLY)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&ActionTemplate> {
        self.templates.get(id)
    }

    pub fn templates(&self) -> &[ActionTemplate] {
        &self.templates
    }

    pub fn find(&self, intent: Intent, slot: Option<Slot>) -> Option<usize> {
        self.templates
            .iter()
            .position(|t| t.intent == intent && t.slot == slot)
    }

    /// Maps a concrete act onto its template. Multi-slot acts map by their
    /// first slot in schema order, except that `taskcomplete` wins for informs.
    pub fn template_of(&self, act: &DialogueAct) -> Option<usize> {
        let slot = match act.intent {
            Intent::Request => act.request_slots.iter().next().copied(),
            Intent::Inform => {
                if act.inform_slots.contains_key(&Slot::TaskComplete) {
                    Some(Slot::TaskComplete)
                } else {
                    act.inform_slots.keys().next().copied()
                }
            }
            _ => None,
        };
        self.find(act.intent, slot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_set_size_matches_schema_count() {
        let set = ActionSet::agent();
        // 6 requestable + 6 informable + taskcomplete + 6 intent-only
        assert_eq!(set.len(), 6 + 6 + 1 + 6);
        assert_eq!(set.len(), 19);
        let theater_requests = set
            .templates()
            .iter()
            .filter(|t| t.intent == Intent::Request && t.slot == Some(Slot::Theater))
            .count();
        assert_eq!(theater_requests, 1);
    }

    #[test]
    fn ids_are_dense_and_stable() {
        let a = ActionSet::agent();
        let b = ActionSet::agent();
        assert_eq!(a, b);
        assert_eq!(
            a.find(Intent::Greeting, None),
            b.find(Intent::Greeting, None)
        );
        for (i, t) in a.templates().iter().enumerate() {
            assert_eq!(t.id, i);
        }
        assert_eq!(ActionSet::user().len(), 23);
    }

    #[test]
    fn template_of_round_trips_single_slot_acts() {
        let set = ActionSet::agent();
        for t in set.templates() {
            let act = match (t.intent, t.slot) {
                (Intent::Request, Some(s)) => DialogueAct::request(s),
                (Intent::Inform, Some(s)) => DialogueAct::inform(s, "x"),
                (i, _) => DialogueAct::new(i),
            };
            assert_eq!(set.template_of(&act), Some(t.id));
        }
        let booking = DialogueAct::inform(Slot::TaskComplete, "3").with_inform(Slot::NumberOfPeople, "2");
        assert_eq!(set.template_of(&booking), set.find(Intent::Inform, Some(Slot::TaskComplete)));
    }

    #[test]
    fn serialization_preserves_enumeration() {
        let set = ActionSet::user();
        let json = serde_json::to_string(&set).unwrap();
        let back: ActionSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
    }
}
