use serde::{Deserialize, Serialize};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Payin,
    Payout,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Payin => "payin",
            Direction::Payout => "payout",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "payin" => Some(Direction::Payin),
            "payout" => Some(Direction::Payout),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransactionEvent {
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub amount: f64,
    pub direction: Direction,
    pub payment_type: String,
    pub country: String,
    pub keyword_flags: Vec<bool>,
}

/// Day-of-week label, Monday first.
pub fn weekday(timestamp: i64) -> &'static str {
    const NAMES: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
    // 1970-01-01 was a Thursday
    NAMES[(timestamp.div_euclid(SECONDS_PER_DAY) + 3).rem_euclid(7) as usize]
}

/// One account's full history in a split, with its descriptors and label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub account_id: String,
    pub legal_form: String,
    pub industry: String,
    pub label: u8,
    pub events: Vec<TransactionEvent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Accounts with unencoded events, as read from disk or generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    pub split: Split,
    pub keyword_names: Vec<String>,
    pub accounts: Vec<Account>,
}
