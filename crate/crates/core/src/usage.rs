//! Usage aggregates over the event log: paper opens, card opens and saves,
//! broken down by the augmentation class the user saw.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityEvent, EventBody};
use crate::augment::UsageCategory;
use crate::corpus::PaperId;

/// Breakdown rows for saves. Saves made without a card are `SearchExternal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaveOrigin {
    Familiar,
    Reencountered,
    NoAugmentation,
    SearchExternal,
}

impl From<UsageCategory> for SaveOrigin {
    fn from(c: UsageCategory) -> Self {
        match c {
            UsageCategory::Familiar => SaveOrigin::Familiar,
            UsageCategory::Reencountered => SaveOrigin::Reencountered,
            UsageCategory::NoAugmentation => SaveOrigin::NoAugmentation,
        }
    }
}

/// `count` out of `total`, kept as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub count: u64,
    pub total: u64,
    /// Percentage in tenths of a percent, rounded half to even.
    pub percent_tenths: u64,
}

impl Share {
    pub fn new(count: u64, total: u64) -> Self {
        Self { count, total, percent_tenths: round_half_even_tenths(count, total) }
    }

    pub fn percent(&self) -> f64 {
        self.percent_tenths as f64 / 10.0
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}%", self.percent_tenths / 10, self.percent_tenths % 10)
    }
}

/// round_half_even(1000 * count / total); 0 when total is 0.
pub fn round_half_even_tenths(count: u64, total: u64) -> u64 {
    if total == 0 {
        return 0;
    }
    let n = u128::from(count) * 1000;
    let d = u128::from(total);
    let (q, r) = (n / d, n % d);
    let q = match (2 * r).cmp(&d) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal if q % 2 == 1 => q + 1,
        _ => q,
    };
    q as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakdown<K: Ord> {
    pub total: u64,
    pub rows: BTreeMap<K, Share>,
}

impl<K: Ord + Copy> Breakdown<K> {
    fn from_counts(keys: &[K], counts: &BTreeMap<K, u64>) -> Self {
        let total = counts.values().sum();
        let rows = keys.iter().map(|k| (*k, Share::new(counts.get(k).copied().unwrap_or(0), total))).collect();
        Self { total, rows }
    }

    pub fn count(&self, key: K) -> u64 {
        self.rows.get(&key).map_or(0, |s| s.count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageStats {
    pub paper_opens: u64,
    pub card_opens: Breakdown<UsageCategory>,
    pub paper_saves: Breakdown<SaveOrigin>,
}

const CARD_ROWS: [UsageCategory; 3] =
    [UsageCategory::Familiar, UsageCategory::Reencountered, UsageCategory::NoAugmentation];
const SAVE_ROWS: [SaveOrigin; 4] =
    [SaveOrigin::Familiar, SaveOrigin::Reencountered, SaveOrigin::NoAugmentation, SaveOrigin::SearchExternal];

/// A save carrying provenance is attributed to the class recorded by the
/// latest card open of the same paper; one with no prior card open counts as
/// `NoAugmentation`. Saves of an already-saved paper are not counted.
pub fn usage_stats<'a>(events: impl IntoIterator<Item = &'a ActivityEvent>) -> UsageStats {
    let mut paper_opens = 0;
    let mut cards: BTreeMap<UsageCategory, u64> = BTreeMap::new();
    let mut saves: BTreeMap<SaveOrigin, u64> = BTreeMap::new();
    let mut last_card: BTreeMap<&PaperId, UsageCategory> = BTreeMap::new();
    let mut saved: BTreeMap<&PaperId, bool> = BTreeMap::new();
    for e in events {
        match &e.body {
            EventBody::Open => paper_opens += 1,
            EventBody::CardOpen { class, .. } => {
                let c = class.category();
                *cards.entry(c).or_default() += 1;
                last_card.insert(&e.paper_id, c);
            }
            EventBody::Save { provenance } => {
                if saved.insert(&e.paper_id, true) == Some(true) {
                    continue;
                }
                let origin = match provenance {
                    None => SaveOrigin::SearchExternal,
                    Some(_) => last_card.get(&e.paper_id).copied().map_or(SaveOrigin::NoAugmentation, SaveOrigin::from),
                };
                *saves.entry(origin).or_default() += 1;
            }
            EventBody::Unsave => {
                saved.insert(&e.paper_id, false);
            }
            _ => {}
        }
    }
    UsageStats {
        paper_opens,
        card_opens: Breakdown::from_counts(&CARD_ROWS, &cards),
        paper_saves: Breakdown::from_counts(&SAVE_ROWS, &saves),
    }
}

impl UsageStats {
    /// Table rows as (label, count, share).
    pub fn table(&self) -> Vec<(String, u64, Option<Share>)> {
        let mut out = vec![("Paper Opens".to_owned(), self.paper_opens, None)];
        out.push(("Card Opens".to_owned(), self.card_opens.total, None));
        for (k, s) in &self.card_opens.rows {
            out.push((format!("- {}", card_label(*k)), s.count, Some(*s)));
        }
        out.push(("Paper Saves".to_owned(), self.paper_saves.total, None));
        for (k, s) in &self.paper_saves.rows {
            out.push((format!("- {}", save_label(*k)), s.count, Some(*s)));
        }
        out
    }
}

fn card_label(c: UsageCategory) -> &'static str {
    match c {
        UsageCategory::Familiar => "Familiar",
        UsageCategory::Reencountered => "Reencountered",
        UsageCategory::NoAugmentation => "No Augmentation",
    }
}

fn save_label(o: SaveOrigin) -> &'static str {
    match o {
        SaveOrigin::SearchExternal => "Search/External",
        other => card_label(match other {
            SaveOrigin::Familiar => UsageCategory::Familiar,
            SaveOrigin::Reencountered => UsageCategory::Reencountered,
            _ => UsageCategory::NoAugmentation,
        }),
    }
}

impl fmt::Display for UsageStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, count, share) in self.table() {
            match share {
                Some(s) => writeln!(f, "{label:<20} {count:>6}  {s:>6}")?,
                None => writeln!(f, "{label:<20} {count:>6}")?,
            }
        }
        Ok(())
    }
}
