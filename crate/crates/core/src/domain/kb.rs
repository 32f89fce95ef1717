use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::{jsonl, Slot};
use crate::error::{Error, Result};

/// Slots every knowledge-base row carries a value for.
pub const KB_SLOTS: [Slot; 11] = [
    Slot::MovieName,
    Slot::Theater,
    Slot::StartTime,
    Slot::Date,
    Slot::City,
    Slot::State,
    Slot::Zip,
    Slot::TheaterChain,
    Slot::VideoFormat,
    Slot::Price,
    Slot::DistanceConstraints,
];

const FORMAT: &str = "ddq-kb";

const MOVIES: [&str; 15] = [
    "batman",
    "deadpool",
    "zootopia",
    "moana",
    "the jungle book",
    "star trek beyond",
    "finding dory",
    "suicide squad",
    "arrival",
    "doctor strange",
    "rogue one",
    "la la land",
    "hidden figures",
    "logan",
    "get out",
];

const START_TIMES: [&str; 12] = [
    "10:00am", "11:30am", "1:00pm", "2:30pm", "4:00pm", "5:30pm", "7:00pm", "7:30pm", "8:00pm",
    "9:00pm", "9:30pm", "10:30pm",
];

const DATES: [&str; 10] = [
    "today",
    "tomorrow",
    "friday",
    "saturday",
    "sunday",
    "monday",
    "march 10th",
    "march 11th",
    "next week",
    "this weekend",
];

const VIDEO_FORMATS: [&str; 10] = [
    "2d",
    "3d",
    "imax",
    "imax 3d",
    "dolby cinema",
    "4dx",
    "screenx",
    "standard",
    "digital",
    "35mm",
];

const PRICES: [&str; 10] = [
    "$8", "$9.50", "$10", "$11", "$12", "$12.50", "$13", "$14", "$15", "$18",
];

// (theater, city, state, zip, chain, distance)
const VENUES: [(&str, &str, &str, &str, &str, &str); 12] = [
    ("amc pacific place 11", "seattle", "wa", "98101", "amc", "downtown"),
    ("regal meridian 16", "seattle", "wa", "98104", "regal", "near me"),
    ("lincoln square cinemas", "bellevue", "wa", "98004", "cinemark", "within 5 miles"),
    ("century 16", "portland", "or", "97205", "century", "within 10 miles"),
    ("amc van ness 14", "san francisco", "ca", "94109", "amc", "north side"),
    ("regal la live", "los angeles", "ca", "90015", "regal", "south side"),
    ("landmark century centre", "chicago", "il", "60614", "landmark", "east side"),
    ("harkins northfield", "denver", "co", "80238", "harkins", "west side"),
    ("alamo drafthouse mueller", "houston", "tx", "77002", "alamo drafthouse", "walking distance"),
    ("marcus wayzata", "miami", "fl", "33131", "marcus", "close to the mall"),
    ("showcase cinema de lux", "boston", "ma", "02116", "showcase", "downtown"),
    ("studio movie grill", "chicago", "il", "60605", "studio movie grill", "near me"),
];

/// One bookable showing: a value for every slot in [`KB_SLOTS`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KbRow(pub BTreeMap<Slot, String>);

impl KbRow {
    pub fn get(&self, slot: Slot) -> Option<&str> {
        self.0.get(&slot).map(String::as_str)
    }

    /// True when every constraint on a knowledge-base slot equals this row's value.
    /// Constraints on slots outside [`KB_SLOTS`] are ignored.
    pub fn matches(&self, constraints: &BTreeMap<Slot, String>) -> bool {
        constraints
            .iter()
            .filter(|(slot, _)| KB_SLOTS.contains(slot))
            .all(|(slot, value)| self.get(*slot) == Some(value.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KbConfig {
    pub rows: usize,
}

impl Default for KbConfig {
    fn default() -> Self {
        KbConfig { rows: 100 }
    }
}

/// Synthetic movie-showing database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    rows: Vec<KbRow>,
}

impl KnowledgeBase {
    pub fn from_rows(rows: Vec<KbRow>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if let Some(slot) = KB_SLOTS.iter().find(|s| row.get(**s).is_none()) {
                return Err(Error::Format(format!("kb row {i} has no value for {slot}")));
            }
        }
        Ok(KnowledgeBase { rows })
    }

    pub fn generate<R: Rng + ?Sized>(config: &KbConfig, rng: &mut R) -> Self {
        let rows = (0..config.rows)
            .map(|_| {
                let venue = VENUES.choose(rng).expect("venues non-empty");
                let mut values = BTreeMap::new();
                values.insert(Slot::MovieName, MOVIES.choose(rng).unwrap().to_string());
                values.insert(Slot::StartTime, START_TIMES.choose(rng).unwrap().to_string());
                values.insert(Slot::Date, DATES.choose(rng).unwrap().to_string());
                values.insert(Slot::VideoFormat, VIDEO_FORMATS.choose(rng).unwrap().to_string());
                values.insert(Slot::Price, PRICES.choose(rng).unwrap().to_string());
                values.insert(Slot::Theater, venue.0.to_string());
                values.insert(Slot::City, venue.1.to_string());
                values.insert(Slot::State, venue.2.to_string());
                values.insert(Slot::Zip, venue.3.to_string());
                values.insert(Slot::TheaterChain, venue.4.to_string());
                values.insert(Slot::DistanceConstraints, venue.5.to_string());
                KbRow(values)
            })
            .collect();
        KnowledgeBase { rows }
    }

    pub fn rows(&self) -> &[KbRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, index: usize) -> Option<&KbRow> {
        self.rows.get(index)
    }

    /// Indices of rows matching every constraint; an empty map matches all rows.
    pub fn lookup(&self, constraints: &BTreeMap<Slot, String>) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, row)| row.matches(constraints))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, constraints: &BTreeMap<Slot, String>) -> usize {
        self.rows.iter().filter(|row| row.matches(constraints)).count()
    }

    pub fn first_match(&self, constraints: &BTreeMap<Slot, String>) -> Option<usize> {
        self.rows.iter().position(|row| row.matches(constraints))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write(path, FORMAT, &self.rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_rows(jsonl::read(path, FORMAT)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::generate(&KbConfig::default(), &mut ChaCha8Rng::seed_from_u64(3))
    }

    #[test]
    fn vocabularies_are_ten_to_twenty_strings() {
        for n in [MOVIES.len(), START_TIMES.len(), DATES.len(), VIDEO_FORMATS.len(), PRICES.len(), VENUES.len()] {
            assert!((10..=20).contains(&n));
        }
    }

    #[test]
    fn every_row_is_complete() {
        let kb = kb();
        assert_eq!(kb.len(), 100);
        for row in kb.rows() {
            for slot in KB_SLOTS {
                assert!(row.get(slot).is_some());
            }
        }
    }

    #[test]
    fn empty_lookup_returns_all_rows() {
        let kb = kb();
        assert_eq!(kb.lookup(&BTreeMap::new()).len(), kb.len());
    }

    #[test]
    fn lookup_matches_brute_force_filter() {
        let kb = kb();
        let mut constraints = BTreeMap::new();
        constraints.insert(Slot::MovieName, "deadpool".to_string());
        constraints.insert(Slot::City, "seattle".to_string());
        let expected: Vec<usize> = (0..kb.len())
            .filter(|&i| {
                let row = &kb.rows()[i].0;
                row[&Slot::MovieName] == "deadpool" && row[&Slot::City] == "seattle"
            })
            .collect();
        assert_eq!(kb.lookup(&constraints), expected);
    }

    #[test]
    fn absent_value_matches_nothing() {
        let kb = kb();
        let mut constraints = BTreeMap::new();
        constraints.insert(Slot::MovieName, "<absent>".to_string());
        assert!(kb.lookup(&constraints).is_empty());
    }

    #[test]
    fn non_kb_slots_are_ignored() {
        let kb = kb();
        let mut constraints = BTreeMap::new();
        constraints.insert(Slot::NumberOfPeople, "2".to_string());
        assert_eq!(kb.count(&constraints), kb.len());
    }

    #[test]
    fn file_round_trip() {
        let kb = kb();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        kb.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), kb.len() + 1);
        assert_eq!(KnowledgeBase::load(&path).unwrap(), kb);
    }

    #[test]
    fn load_rejects_incomplete_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        std::fs::write(&path, "{\"format\":\"ddq-kb\",\"version\":1}\n{\"moviename\":\"batman\"}\n").unwrap();
        assert!(matches!(KnowledgeBase::load(&path), Err(Error::Format(_))));
    }
}
