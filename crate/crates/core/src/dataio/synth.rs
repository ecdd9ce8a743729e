//! Synthetic labeled transaction histories.
//!
//! Non-fraud accounts follow an industry-dependent baseline: Poisson event
//! counts, uniform arrival times, log-normal amounts and categorical mixes.
//! Fraud accounts cycle through three planted regimes, each layered on a
//! thinner baseline:
//!
//! * structuring: a short burst of cash payins just under a reporting
//!   threshold, followed within two days by a few large payouts;
//! * dormancy then burst: nothing until the last weeks of the period, then
//!   dense transfers mostly routed through offshore countries;
//! * pass-through: payin/payout pairs of near-equal amounts a few hours apart.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use super::event::{Account, Direction, RawDataset, Split, TransactionEvent, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub train_accounts: usize,
    pub test_accounts: usize,
    pub train_fraud: f64,
    pub test_fraud: f64,
    pub period_days: u32,
    /// Start of the test period relative to the train start.
    pub test_offset_days: u32,
    pub start_timestamp: i64,
    pub mean_events: f64,
    pub structuring_threshold: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            train_accounts: 1000,
            test_accounts: 2000,
            train_fraud: 0.2676,
            test_fraud: 0.0503,
            period_days: 90,
            test_offset_days: 180,
            // 2024-01-01T00:00:00Z
            start_timestamp: 1_704_067_200,
            mean_events: 24.0,
            structuring_threshold: 1000.0,
        }
    }
}

pub const KEYWORDS: [&str; 3] = ["cash", "crypto", "gift"];
const LEGAL_FORMS: [&str; 3] = ["corp", "llc", "sole"];
const PAYMENT_TYPES: [&str; 5] = ["card", "cash", "check", "direct_debit", "transfer"];
const HOME: &str = "FR";
const NEIGHBOURS: [&str; 5] = ["BE", "DE", "ES", "GB", "IT"];
const OFFSHORE: [&str; 4] = ["AE", "CY", "MT", "PA"];

struct Industry {
    name: &'static str,
    log_amount: f64,
    payin_share: f64,
    /// Weights over [`PAYMENT_TYPES`].
    payment_mix: [f64; 5],
}

const INDUSTRIES: [Industry; 5] = [
    Industry {
        name: "food",
        log_amount: 5.2,
        payin_share: 0.6,
        payment_mix: [0.45, 0.2, 0.05, 0.1, 0.2],
    },
    Industry {
        name: "manufacturing",
        log_amount: 6.6,
        payin_share: 0.45,
        payment_mix: [0.1, 0.02, 0.13, 0.25, 0.5],
    },
    Industry {
        name: "retail",
        log_amount: 5.6,
        payin_share: 0.55,
        payment_mix: [0.5, 0.15, 0.05, 0.1, 0.2],
    },
    Industry {
        name: "services",
        log_amount: 6.0,
        payin_share: 0.5,
        payment_mix: [0.25, 0.05, 0.1, 0.2, 0.4],
    },
    Industry {
        name: "tech",
        log_amount: 6.3,
        payin_share: 0.5,
        payment_mix: [0.3, 0.01, 0.04, 0.3, 0.35],
    },
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Baseline,
    Structuring,
    DormancyBurst,
    PassThrough,
}

fn pick<'a>(rng: &mut ChaCha8Rng, weights: &[f64], items: &[&'a str]) -> &'a str {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (w, it) in weights.iter().zip(items) {
        if u < *w {
            return it;
        }
        u -= w;
    }
    items[items.len() - 1]
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    Poisson::new(lambda.max(1e-3)).expect("positive rate").sample(rng) as usize
}

struct Profile<'a> {
    industry: &'a Industry,
    log_amount: f64,
    rate: f64,
}

struct Ctx<'a> {
    start: i64,
    period: i64,
    profile: Profile<'a>,
}

impl Ctx<'_> {
    fn baseline_event(&self, rng: &mut ChaCha8Rng, timestamp: i64) -> TransactionEvent {
        let ind = self.profile.industry;
        let direction = if rng.random::<f64>() < ind.payin_share {
            Direction::Payin
        } else {
            Direction::Payout
        };
        let amount = LogNormal::new(self.profile.log_amount, 0.9).expect("valid").sample(rng);
        let u = rng.random::<f64>();
        let country = if u < 0.92 {
            HOME
        } else if u < 0.995 {
            NEIGHBOURS[rng.random_range(0..NEIGHBOURS.len())]
        } else {
            OFFSHORE[rng.random_range(0..OFFSHORE.len())]
        };
        TransactionEvent {
            timestamp,
            amount: round_cents(amount),
            direction,
            payment_type: pick(rng, &ind.payment_mix, &PAYMENT_TYPES).to_string(),
            country: country.to_string(),
            keyword_flags: KEYWORDS.iter().map(|_| rng.random::<f64>() < 0.03).collect(),
        }
    }

    fn baseline(&self, rng: &mut ChaCha8Rng, scale: f64, from: i64, to: i64) -> Vec<TransactionEvent> {
        let n = poisson(rng, self.profile.rate * scale);
        (0..n)
            .map(|_| {
                let t = rng.random_range(from..to);
                self.baseline_event(rng, t)
            })
            .collect()
    }
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn structuring(ctx: &Ctx, rng: &mut ChaCha8Rng, threshold: f64) -> Vec<TransactionEvent> {
    let mut ev = ctx.baseline(rng, 0.6, ctx.start, ctx.start + ctx.period);
    let burst_start = ctx.start + rng.random_range(0..ctx.period - 5 * SECONDS_PER_DAY);
    let n_burst = rng.random_range(8..=14);
    let mut total = 0.0;
    let mut t = burst_start;
    let mut burst = Vec::with_capacity(n_burst);
    for _ in 0..n_burst {
        t += rng.random_range(600..4 * 3600);
        let amount = round_cents(threshold * rng.random_range(0.85..0.99));
        total += amount;
        burst.push(TransactionEvent {
            timestamp: t,
            amount,
            direction: Direction::Payin,
            payment_type: "cash".into(),
            country: HOME.into(),
            keyword_flags: KEYWORDS
                .iter()
                .enumerate()
                .map(|(k, _)| k == 0 && rng.random::<f64>() < 0.3)
                .collect(),
        });
    }
    let n_out = rng.random_range(1..=3);
    let mut planted = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        t += rng.random_range(3600..SECONDS_PER_DAY);
        let foreign = rng.random::<f64>() < 0.5;
        planted.push(TransactionEvent {
            timestamp: t,
            amount: round_cents(total / n_out as f64 * rng.random_range(0.95..1.0)),
            direction: Direction::Payout,
            payment_type: "transfer".into(),
            country: if foreign {
                NEIGHBOURS[rng.random_range(0..NEIGHBOURS.len())]
            } else {
                HOME
            }
            .into(),
            keyword_flags: vec![false; KEYWORDS.len()],
        });
    }
    // the burst span holds only planted events
    ev.retain(|e| e.timestamp < burst_start || e.timestamp > t);
    ev.extend(burst);
    ev.extend(planted);
    ev
}

fn dormancy_burst(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<TransactionEvent> {
    let quiet = ctx.period - rng.random_range(10..20) * SECONDS_PER_DAY;
    let from = ctx.start + quiet;
    let to = ctx.start + ctx.period;
    let n = poisson(rng, ctx.profile.rate).max(12);
    (0..n)
        .map(|_| {
            let t = rng.random_range(from..to);
            let mut e = ctx.baseline_event(rng, t);
            if rng.random::<f64>() < 0.7 {
                e.country = OFFSHORE[rng.random_range(0..OFFSHORE.len())].into();
                e.payment_type = "transfer".into();
            }
            e
        })
        .collect()
}

fn pass_through(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<TransactionEvent> {
    let mut ev = ctx.baseline(rng, 0.5, ctx.start, ctx.start + ctx.period);
    let pairs = rng.random_range(6..=12);
    let amounts = LogNormal::new(ctx.profile.log_amount + 0.3, 0.6).expect("valid");
    for _ in 0..pairs {
        let t = ctx.start + rng.random_range(0..ctx.period - SECONDS_PER_DAY);
        let a = round_cents(amounts.sample(rng));
        let lag = rng.random_range(1800..6 * 3600);
        let country = if rng.random::<f64>() < 0.3 {
            NEIGHBOURS[rng.random_range(0..NEIGHBOURS.len())]
        } else {
            HOME
        };
        ev.push(TransactionEvent {
            timestamp: t,
            amount: a,
            direction: Direction::Payin,
            payment_type: "transfer".into(),
            country: HOME.into(),
            keyword_flags: vec![false; KEYWORDS.len()],
        });
        ev.push(TransactionEvent {
            timestamp: t + lag,
            amount: round_cents(a * (1.0 - rng.random_range(0.0..0.02))),
            direction: Direction::Payout,
            payment_type: "transfer".into(),
            country: country.into(),
            keyword_flags: vec![false; KEYWORDS.len()],
        });
    }
    ev
}

/// Number of fraud accounts for `n` accounts at proportion `p`.
pub fn fraud_count(n: usize, p: f64) -> usize {
    (n as f64 * p).round() as usize
}

fn generate_split(cfg: &SynthConfig, seed: u64, split: Split) -> Result<RawDataset> {
    let (n, p, offset, prefix, tag) = match split {
        Split::Train => (cfg.train_accounts, cfg.train_fraud, 0, "tr", 0u64),
        Split::Test => (cfg.test_accounts, cfg.test_fraud, cfg.test_offset_days, "te", 1u64),
    };
    if n == 0 {
        return Err(Error::invalid(format!("{} split has zero accounts", split.as_str())));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("fraud proportion {p} outside (0, 1)")));
    }
    let regime = regimes(cfg, seed, split);

    let start = cfg.start_timestamp + offset as i64 * SECONDS_PER_DAY;
    let period = cfg.period_days as i64 * SECONDS_PER_DAY;
    let mut accounts = Vec::with_capacity(n);
    for (i, &reg) in regime.iter().enumerate() {
        let mut rng = stream(seed, Stream::Synth, &[tag, i as u64]);
        let industry = &INDUSTRIES[rng.random_range(0..INDUSTRIES.len())];
        let legal_form = LEGAL_FORMS[rng.random_range(0..LEGAL_FORMS.len())];
        let activity = LogNormal::new(0.0, 0.35).expect("valid").sample(&mut rng);
        let ctx = Ctx {
            start,
            period,
            profile: Profile {
                industry,
                log_amount: industry.log_amount + rng.random_range(-0.4..0.4),
                rate: cfg.mean_events * activity,
            },
        };
        let mut events = match reg {
            Regime::Baseline => ctx.baseline(&mut rng, 1.0, start, start + period),
            Regime::Structuring => structuring(&ctx, &mut rng, cfg.structuring_threshold),
            Regime::DormancyBurst => dormancy_burst(&ctx, &mut rng),
            Regime::PassThrough => pass_through(&ctx, &mut rng),
        };
        if events.is_empty() {
            let t = start + rng.random_range(0..period);
            events.push(ctx.baseline_event(&mut rng, t));
        }
        events.sort_by_key(|e| e.timestamp);
        accounts.push(Account {
            account_id: format!("{prefix}{i:06}"),
            legal_form: legal_form.to_string(),
            industry: industry.name.to_string(),
            label: u8::from(reg != Regime::Baseline),
            events,
        });
    }
    Ok(RawDataset {
        split,
        keyword_names: KEYWORDS.iter().map(|k| k.to_string()).collect(),
        accounts,
    })
}

/// Train and test splits over disjoint time periods; deterministic per seed.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<(RawDataset, RawDataset)> {
    Ok((
        generate_split(cfg, seed, Split::Train)?,
        generate_split(cfg, seed, Split::Test)?,
    ))
}

/// Regime of each account, recomputed from the generator's assignment.
pub fn regimes(cfg: &SynthConfig, seed: u64, split: Split) -> Vec<Regime> {
    let (n, p, tag) = match split {
        Split::Train => (cfg.train_accounts, cfg.train_fraud, 0u64),
        Split::Test => (cfg.test_accounts, cfg.test_fraud, 1u64),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Synth, &[tag, u64::MAX]));
    let mut regime = vec![Regime::Baseline; n];
    for (k, &i) in order[..fraud_count(n, p)].iter().enumerate() {
        regime[i] = [Regime::Structuring, Regime::DormancyBurst, Regime::PassThrough][k % 3];
    }
    regime
}
