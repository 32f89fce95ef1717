//! Cosmetic text for dialogue acts shown to human users.

use ddq::domain::{DialogueAct, Intent, KnowledgeBase, Slot, NO_MATCH};

pub fn agent_text(act: &DialogueAct, kb: &KnowledgeBase) -> String {
    if let Some(value) = act.inform_slots.get(&Slot::TaskComplete) {
        return match value.parse::<usize>().ok().and_then(|i| kb.row(i)) {
            Some(row) => {
                let details: Vec<String> = row.0.iter().map(|(s, v)| format!("{s}: {v}")).collect();
                format!("Your tickets are booked ({}).", details.join(", "))
            }
            None => "Sorry, I could not find tickets matching your request.".to_string(),
        };
    }
    match act.intent {
        Intent::Request => {
            let slots: Vec<String> = act.request_slots.iter().map(|s| s.to_string()).collect();
            format!("Which {} would you like?", slots.join(" and "))
        }
        Intent::Inform => {
            let parts: Vec<String> = act
                .inform_slots
                .iter()
                .map(|(s, v)| {
                    if v == NO_MATCH {
                        format!("no {s} is available")
                    } else {
                        format!("the {s} is {v}")
                    }
                })
                .collect();
            let mut text = parts.join(", ");
            if let Some(first) = text.get(..1) {
                text = first.to_uppercase() + &text[1..];
            }
            text + "."
        }
        Intent::Deny => "That is not right.".to_string(),
        Intent::ConfirmQuestion => "Could you confirm that?".to_string(),
        Intent::ConfirmAnswer => "Yes, that is correct.".to_string(),
        Intent::Greeting => "Hello!".to_string(),
        Intent::Closing => "Goodbye.".to_string(),
        Intent::NotSure => "I am not sure.".to_string(),
        Intent::MultipleChoice => "Please pick one of the options.".to_string(),
        Intent::Thanks => "Thank you.".to_string(),
        Intent::Welcome => "You are welcome.".to_string(),
    }
}

pub const OPENING_PROMPT: &str = "Hello, I can book movie tickets for you. What would you like?";
