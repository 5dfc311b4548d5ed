//! Grouping of labelled events into streams, either by numeric code ranges
//! (ICD-9-style divisions) or one stream per label, with deterministic spreading of
//! tied timestamps.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::events::RawEvent;
use crate::error::{Error, Result};
use crate::renewal::EventStream;

/// Which labels a rule accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CodeMatch {
    /// Numeric codes in the closed range `[code_lo, code_hi]`.
    Range { code_lo: f64, code_hi: f64 },
    /// Exactly this label; the only way to match non-numeric codes.
    Label { label: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingRule {
    pub division: String,
    #[serde(flatten)]
    pub matcher: CodeMatch,
}

impl GroupingRule {
    pub fn range(division: impl Into<String>, code_lo: f64, code_hi: f64) -> Result<Self> {
        let rule = Self {
            division: division.into(),
            matcher: CodeMatch::Range { code_lo, code_hi },
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn label(division: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            division: division.into(),
            matcher: CodeMatch::Label { label: label.into() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.division.trim().is_empty() {
            return Err(Error::invalid("grouping rule needs a division name"));
        }
        if let CodeMatch::Range { code_lo, code_hi } = self.matcher {
            if !(code_lo.is_finite() && code_hi.is_finite() && code_lo <= code_hi) {
                return Err(Error::invalid(format!(
                    "division {}: code range [{code_lo}, {code_hi}] is not ordered",
                    self.division
                )));
            }
        }
        Ok(())
    }

    pub fn matches(&self, label: &str) -> bool {
        match &self.matcher {
            CodeMatch::Label { label: l } => l == label,
            CodeMatch::Range { code_lo, code_hi } => label
                .trim()
                .parse::<f64>()
                .is_ok_and(|c| c >= *code_lo && c <= *code_hi),
        }
    }
}

#[derive(Deserialize)]
struct RuleFile {
    #[serde(default)]
    rule: Vec<GroupingRule>,
}

/// Parses `[[rule]]` tables: `division` plus either `code_lo`/`code_hi` or `label`.
pub fn parse_rules_toml(text: &str) -> Result<Vec<GroupingRule>> {
    let file: RuleFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for r in &file.rule {
        r.validate()?;
    }
    Ok(file.rule)
}

/// Top-level ICD-9-CM chapters. The circulatory range is `[390, 459.81]`; the
/// rest are the standard chapter bounds.
pub fn default_icd9_rules() -> Vec<GroupingRule> {
    [
        ("Infectious", 1.0, 139.99),
        ("Neoplasms", 140.0, 239.99),
        ("Endocrine", 240.0, 279.99),
        ("Blood", 280.0, 289.99),
        ("Mental", 290.0, 319.99),
        ("Nervous", 320.0, 389.99),
        ("Cardiovascular", 390.0, 459.81),
        ("Respiratory", 460.0, 519.99),
        ("Digestive", 520.0, 579.99),
        ("Genitourinary", 580.0, 629.99),
        ("Pregnancy", 630.0, 679.99),
        ("Skin", 680.0, 709.99),
        ("Musculoskeletal", 710.0, 739.99),
        ("Congenital", 740.0, 759.99),
        ("Perinatal", 760.0, 779.99),
        ("Symptoms", 780.0, 799.99),
        ("Injury", 800.0, 999.99),
    ]
    .into_iter()
    .map(|(name, lo, hi)| GroupingRule {
        division: name.to_string(),
        matcher: CodeMatch::Range { code_lo: lo, code_hi: hi },
    })
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingOptions {
    /// Shared observation window; by default each stream gets
    /// `[first − resolution, last + resolution]`.
    pub window: Option<(f64, f64)>,
    /// Timestamp resolution; tied events are spread within one unit.
    pub resolution: f64,
}

impl Default for GroupingOptions {
    fn default() -> Self {
        Self {
            window: None,
            resolution: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Grouped {
    pub streams: Vec<EventStream>,
    /// Events no rule matched.
    pub ungrouped: Vec<RawEvent>,
    /// Divisions that received no events (no stream is emitted for them).
    pub empty_divisions: Vec<String>,
    /// Events dropped for lying on or outside a configured window.
    pub outside_window: usize,
}

/// One stream per division; events matching several divisions go to each of them.
pub fn group_by_ranges(events: &[RawEvent], rules: &[GroupingRule], opts: &GroupingOptions) -> Result<Grouped> {
    for r in rules {
        r.validate()?;
    }
    let mut order: Vec<&str> = Vec::new();
    for r in rules {
        if !order.contains(&r.division.as_str()) {
            order.push(&r.division);
        }
    }
    let mut members: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut out = Grouped::default();
    for e in events {
        // Several rules of one division may match the same event; count it once.
        let mut hit: Vec<&str> = Vec::new();
        for r in rules.iter().filter(|r| r.matches(&e.label)) {
            if !hit.contains(&r.division.as_str()) {
                hit.push(&r.division);
            }
        }
        if hit.is_empty() {
            out.ungrouped.push(e.clone());
        }
        for d in hit {
            members.entry(d).or_default().push(e.time);
        }
    }
    for d in order {
        match members.remove(d) {
            Some(times) => push_stream(&mut out, d, times, opts)?,
            None => out.empty_divisions.push(d.to_string()),
        }
    }
    Ok(out)
}

/// One stream per distinct label, in label order.
pub fn group_by_label(events: &[RawEvent], opts: &GroupingOptions) -> Result<Grouped> {
    let mut members: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for e in events {
        members.entry(&e.label).or_default().push(e.time);
    }
    let mut out = Grouped::default();
    for (label, times) in members {
        push_stream(&mut out, label, times, opts)?;
    }
    Ok(out)
}

fn push_stream(out: &mut Grouped, label: &str, mut times: Vec<f64>, opts: &GroupingOptions) -> Result<()> {
    let res = opts.resolution;
    if !(res > 0.0 && res.is_finite()) {
        return Err(Error::invalid(format!("timestamp resolution {res} must be positive")));
    }
    times.sort_by(f64::total_cmp);
    let (lo, hi) = match opts.window {
        Some((lo, hi)) => {
            if !(lo < hi) {
                return Err(Error::invalid(format!("window [{lo}, {hi}] is empty")));
            }
            let before = times.len();
            times.retain(|&t| t > lo && t < hi);
            out.outside_window += before - times.len();
            (lo, hi)
        }
        None => match (times.first(), times.last()) {
            (Some(&first), Some(&last)) => (first - res, last + res),
            _ => return Ok(()),
        },
    };
    spread_ties(&mut times, label, res, hi);
    out.streams.push(EventStream::new(label, lo, hi, times)?);
    Ok(())
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike the std hasher.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Spreads each run of `m` equal times `t` over `[t, t + room)`, with
/// `room = min(resolution, next distinct time − t, upper − t)`: the `j`-th copy
/// lands at `t + room·(j + u_j/2)/m` with `u_j` uniform, seeded by `label`.
/// `times` must be sorted; the result is strictly increasing.
pub fn spread_ties(times: &mut [f64], label: &str, resolution: f64, upper: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(label));
    let mut i = 0;
    while i < times.len() {
        let t = times[i];
        let mut j = i + 1;
        while j < times.len() && times[j] == t {
            j += 1;
        }
        let m = j - i;
        if m > 1 {
            let next = times.get(j).copied().unwrap_or(upper).min(upper);
            let room = resolution.min(next - t);
            for (slot, x) in times[i..j].iter_mut().enumerate() {
                let u: f64 = rng.random();
                *x = t + room * (slot as f64 + 0.5 * u) / m as f64;
            }
        }
        i = j;
    }
}
