//! Clinical date handling: parse heterogeneous surface forms, keep the
//! surface format, shift by a per-patient number of days and render back in
//! the original format.
//!
//! Dates without a day ("April 2020") are anchored on the 1st for arithmetic.
//! The anchor day is kept internally after a shift so that shifting back by
//! the same amount restores the original date exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use chrono::{Datelike, NaiveDate, TimeDelta};
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::rng_for;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DateError {
    #[error("`{0}` is not a recognizable date")]
    NotADate(String),
    #[error("line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("invalid day-shift range {lo}..={hi}")]
    BadRange { lo: i64, hi: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldOrder {
    Mdy,
    Dmy,
    Ymd,
}

impl FieldOrder {
    fn parse(s: &str) -> Option<FieldOrder> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MDY" => Some(FieldOrder::Mdy),
            "DMY" => Some(FieldOrder::Dmy),
            "YMD" => Some(FieldOrder::Ymd),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NameStyle {
    Full,
    Abbrev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NameCase {
    Title,
    Upper,
    Lower,
}

impl NameCase {
    fn detect(s: &str) -> NameCase {
        if s.chars().all(|c| !c.is_lowercase()) {
            NameCase::Upper
        } else if s.chars().all(|c| !c.is_uppercase()) {
            NameCase::Lower
        } else {
            NameCase::Title
        }
    }

    fn apply(self, name: &str) -> String {
        match self {
            NameCase::Upper => name.to_uppercase(),
            NameCase::Lower => name.to_lowercase(),
            NameCase::Title => {
                let mut chars = name.chars();
                match chars.next() {
                    Some(f) => f.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                    None => String::new(),
                }
            }
        }
    }
}

/// Surface pattern of a date. Together with the locale it is enough to
/// reproduce the original string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DateFormat {
    /// `04/12/2022`, `4/12/22`, `12.04.2022`, `2022-04-12`.
    Numeric {
        order: FieldOrder,
        sep: char,
        pad_day: bool,
        pad_month: bool,
        short_year: bool,
    },
    /// `04/2020`.
    MonthYearNumeric { sep: char, pad_month: bool },
    /// `12Apr2022`.
    DayMonYearCompact {
        pad_day: bool,
        style: NameStyle,
        case: NameCase,
    },
    /// `April 2020`.
    MonthNameYear { style: NameStyle, case: NameCase },
    /// `April 12, 2022` / `Apr 12 2022`.
    MonthNameDayYear {
        style: NameStyle,
        case: NameCase,
        pad_day: bool,
        comma: bool,
    },
    /// `12 April 2022`.
    DayMonthNameYear {
        style: NameStyle,
        case: NameCase,
        pad_day: bool,
    },
}

impl DateFormat {
    pub fn requires_day(&self) -> bool {
        !matches!(
            self,
            DateFormat::MonthYearNumeric { .. } | DateFormat::MonthNameYear { .. }
        )
    }

    /// Short identifier of the surface pattern, e.g. `MM/DD/YYYY`,
    /// `DDMonYYYY`, `MONTHNAME-YYYY`.
    pub fn descriptor(&self) -> String {
        let day = |pad: bool| if pad { "DD" } else { "D" };
        let month_name = |style: NameStyle| match style {
            NameStyle::Full => "MONTHNAME",
            NameStyle::Abbrev => "Mon",
        };
        match *self {
            DateFormat::Numeric {
                order,
                sep,
                pad_day,
                pad_month,
                short_year,
            } => {
                let d = day(pad_day);
                let m = if pad_month { "MM" } else { "M" };
                let y = if short_year { "YY" } else { "YYYY" };
                match order {
                    FieldOrder::Mdy => format!("{m}{sep}{d}{sep}{y}"),
                    FieldOrder::Dmy => format!("{d}{sep}{m}{sep}{y}"),
                    FieldOrder::Ymd => format!("{y}{sep}{m}{sep}{d}"),
                }
            }
            DateFormat::MonthYearNumeric { sep, pad_month } => {
                format!("{}{sep}YYYY", if pad_month { "MM" } else { "M" })
            }
            DateFormat::DayMonYearCompact { pad_day, style, .. } => {
                format!("{}{}YYYY", day(pad_day), month_name(style))
            }
            DateFormat::MonthNameYear { style, .. } => format!("{}-YYYY", month_name(style)),
            DateFormat::MonthNameDayYear {
                style, pad_day, comma, ..
            } => {
                format!(
                    "{} {}{} YYYY",
                    month_name(style),
                    day(pad_day),
                    if comma { "," } else { "" }
                )
            }
            DateFormat::DayMonthNameYear { style, pad_day, .. } => {
                format!("{} {} YYYY", day(pad_day), month_name(style))
            }
        }
    }

    /// The canonical numeric format for a field order.
    pub fn canonical(order: FieldOrder) -> DateFormat {
        let sep = if order == FieldOrder::Ymd { '-' } else { '/' };
        DateFormat::Numeric {
            order,
            sep,
            pad_day: true,
            pad_month: true,
            short_year: false,
        }
    }
}

impl fmt::Display for DateFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Month names and numeric conventions of one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateLocale {
    pub code: String,
    /// Full name, rendering abbreviation, then extra accepted abbreviations.
    pub months: Vec<Vec<String>>,
    /// How ambiguous numeric dates are read.
    pub numeric_order: FieldOrder,
    /// Order of the canonical normalized form.
    pub canonical_order: FieldOrder,
    /// Two-digit years up to and including the pivot are 20xx, above are 19xx.
    pub pivot: u32,
}

const EN_MONTHS: [(&str, &str); 12] = [
    ("January", "Jan"),
    ("February", "Feb"),
    ("March", "Mar"),
    ("April", "Apr"),
    ("May", "May"),
    ("June", "Jun"),
    ("July", "Jul"),
    ("August", "Aug"),
    ("September", "Sep"),
    ("October", "Oct"),
    ("November", "Nov"),
    ("December", "Dec"),
];

impl DateLocale {
    pub fn english() -> DateLocale {
        DateLocale {
            code: "en".into(),
            months: EN_MONTHS
                .iter()
                .map(|(f, a)| vec![f.to_string(), a.to_string()])
                .collect(),
            numeric_order: FieldOrder::Mdy,
            canonical_order: FieldOrder::Mdy,
            pivot: 50,
        }
    }

    /// Parse a date table:
    ///
    /// ```text
    /// order = DMY
    /// canonical = DMY
    /// pivot = 50
    /// month.1 = enero, ene
    /// ```
    pub fn parse(code: &str, source: &str) -> Result<DateLocale, DateError> {
        let mut locale = DateLocale {
            code: code.to_string(),
            ..DateLocale::english()
        };
        let mut months: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        let mut canonical = None;
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let err = |message: String| DateError::Table { line, message };
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got `{text}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "order" => {
                    locale.numeric_order =
                        FieldOrder::parse(value).ok_or_else(|| err(format!("bad order `{value}`")))?
                }
                "canonical" => {
                    canonical = Some(FieldOrder::parse(value).ok_or_else(|| err(format!("bad order `{value}`")))?)
                }
                "pivot" => {
                    locale.pivot = value.parse().map_err(|_| err(format!("bad pivot `{value}`")))?;
                    if locale.pivot > 99 {
                        return Err(err("pivot must be 0..=99".into()));
                    }
                }
                k if k.starts_with("month.") => {
                    let n: usize = k[6..]
                        .parse()
                        .ok()
                        .filter(|n| (1..=12).contains(n))
                        .ok_or_else(|| err(format!("bad month key `{k}`")))?;
                    let names: Vec<String> = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    if names.len() < 2 {
                        return Err(err(format!("month {n} needs a full name and an abbreviation")));
                    }
                    months.insert(n, names);
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        if !months.is_empty() {
            if months.len() != 12 {
                return Err(DateError::Table {
                    line: 0,
                    message: format!("expected 12 month entries, found {}", months.len()),
                });
            }
            locale.months = months.into_values().collect();
        }
        locale.canonical_order = canonical.unwrap_or(locale.numeric_order);
        Ok(locale)
    }

    /// Month number and style of a name. A name that is both a full name
    /// and an abbreviation ("May") takes the style `ambiguous`.
    fn month_by_name(&self, name: &str, ambiguous: NameStyle) -> Option<(u32, NameStyle)> {
        let folded = name.to_lowercase();
        for (i, names) in self.months.iter().enumerate() {
            if names[0].to_lowercase() == folded {
                let also_short = names[1..].iter().any(|a| a.to_lowercase() == folded);
                return Some((i as u32 + 1, if also_short { ambiguous } else { NameStyle::Full }));
            }
        }
        for (i, names) in self.months.iter().enumerate() {
            if names[1..].iter().any(|a| a.to_lowercase() == folded) {
                return Some((i as u32 + 1, NameStyle::Abbrev));
            }
        }
        None
    }

    pub fn month_name(&self, month: u32, style: NameStyle) -> &str {
        let names = &self.months[(month - 1) as usize];
        match style {
            NameStyle::Full => &names[0],
            NameStyle::Abbrev => &names[1],
        }
    }

    fn expand_year(&self, yy: u32) -> i32 {
        if yy <= self.pivot {
            2000 + yy as i32
        } else {
            1900 + yy as i32
        }
    }
}

impl Default for DateLocale {
    fn default() -> Self {
        DateLocale::english()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParsedDate {
    pub year: i32,
    pub month: u32,
    /// Calendar day; for day-absent dates this is the internal anchor.
    day: u32,
    pub day_present: bool,
    pub format: DateFormat,
    pub locale: String,
}

impl ParsedDate {
    pub fn new(
        year: i32,
        month: u32,
        day: Option<u32>,
        format: DateFormat,
        locale: impl Into<String>,
    ) -> Option<ParsedDate> {
        let d = day.unwrap_or(1);
        NaiveDate::from_ymd_opt(year, month, d)?;
        Some(ParsedDate {
            year,
            month,
            day: d,
            day_present: day.is_some(),
            format,
            locale: locale.into(),
        })
    }

    pub fn day(&self) -> Option<u32> {
        self.day_present.then_some(self.day)
    }

    /// Day used for arithmetic (the anchor when no day was written).
    pub fn calendar_day(&self) -> u32 {
        self.day
    }

    pub fn to_naive(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, self.day).expect("ParsedDate is always valid")
    }

    pub fn descriptor(&self) -> String {
        self.format.descriptor()
    }

    /// Render in the date's own surface format.
    pub fn render(&self, locale: &DateLocale) -> String {
        render_date(self, &self.format, locale)
    }
}

static ISO_LIKE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{4})([-/.])(\d{1,2})([-/.])(\d{1,2})$").unwrap());
static NUMERIC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,2})([-/.])(\d{1,2})([-/.])(\d{4}|\d{2})$").unwrap());
static MONTH_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{1,2})([-/.])(\d{4})$").unwrap());
static COMPACT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{1,2})(\p{L}+)(\d{4})$").unwrap());
static NAME_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\p{L}+) (\d{4})$").unwrap());
static NAME_DAY_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\p{L}+) (\d{1,2})(,?) (\d{4})$").unwrap());
static DAY_NAME_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{1,2}) (\p{L}+) (\d{4})$").unwrap());

/// Explicit zero padding, e.g. `04`.
fn padded(s: &str) -> bool {
    s.len() == 2 && s.starts_with('0')
}

/// Padding of one field of a numeric date: two digits with a leading zero,
/// or two digits next to another two-digit field (`04/12`, `11/12`).
fn padded_pair(field: &str, other: &str) -> bool {
    field.len() == 2 && (field.starts_with('0') || other.len() == 2)
}

fn num(s: &str) -> u32 {
    s.parse().expect("regex guarantees digits")
}

/// Parse a date expression.
pub fn parse_date(text: &str, locale: &DateLocale) -> Result<ParsedDate, DateError> {
    let t = text.trim();
    let not_a_date = || DateError::NotADate(text.to_string());
    let make = |y: i32, m: u32, d: Option<u32>, f: DateFormat| {
        ParsedDate::new(y, m, d, f, locale.code.clone()).ok_or_else(not_a_date)
    };

    if let Some(c) = ISO_LIKE.captures(t) {
        if c[2] != c[4] {
            return Err(not_a_date());
        }
        let sep = c[2].chars().next().unwrap();
        let f = DateFormat::Numeric {
            order: FieldOrder::Ymd,
            sep,
            pad_day: padded_pair(&c[5], &c[3]),
            pad_month: padded_pair(&c[3], &c[5]),
            short_year: false,
        };
        return make(num(&c[1]) as i32, num(&c[3]), Some(num(&c[5])), f);
    }
    if let Some(c) = NUMERIC.captures(t) {
        if c[2] != c[4] {
            return Err(not_a_date());
        }
        let sep = c[2].chars().next().unwrap();
        let short_year = c[5].len() == 2;
        let year = if short_year {
            locale.expand_year(num(&c[5]))
        } else {
            num(&c[5]) as i32
        };
        let (a, b) = (&c[1], &c[3]);
        let primary = match locale.numeric_order {
            FieldOrder::Dmy => FieldOrder::Dmy,
            _ => FieldOrder::Mdy,
        };
        let fallback = if primary == FieldOrder::Mdy {
            FieldOrder::Dmy
        } else {
            FieldOrder::Mdy
        };
        for order in [primary, fallback] {
            let (m, d) = if order == FieldOrder::Mdy { (a, b) } else { (b, a) };
            let f = DateFormat::Numeric {
                order,
                sep,
                pad_day: padded_pair(d, m),
                pad_month: padded_pair(m, d),
                short_year,
            };
            if let Ok(p) = make(year, num(m), Some(num(d)), f) {
                return Ok(p);
            }
        }
        return Err(not_a_date());
    }
    if let Some(c) = MONTH_YEAR.captures(t) {
        let f = DateFormat::MonthYearNumeric {
            sep: c[2].chars().next().unwrap(),
            pad_month: padded(&c[1]),
        };
        return make(num(&c[3]) as i32, num(&c[1]), None, f);
    }
    if let Some(c) = COMPACT.captures(t) {
        let (month, style) = locale.month_by_name(&c[2], NameStyle::Abbrev).ok_or_else(not_a_date)?;
        let f = DateFormat::DayMonYearCompact {
            pad_day: c[1].len() == 2,
            style,
            case: NameCase::detect(&c[2]),
        };
        return make(num(&c[3]) as i32, month, Some(num(&c[1])), f);
    }
    if let Some(c) = NAME_YEAR.captures(t) {
        let (month, style) = locale.month_by_name(&c[1], NameStyle::Full).ok_or_else(not_a_date)?;
        let f = DateFormat::MonthNameYear {
            style,
            case: NameCase::detect(&c[1]),
        };
        return make(num(&c[2]) as i32, month, None, f);
    }
    if let Some(c) = NAME_DAY_YEAR.captures(t) {
        let (month, style) = locale.month_by_name(&c[1], NameStyle::Full).ok_or_else(not_a_date)?;
        let f = DateFormat::MonthNameDayYear {
            style,
            case: NameCase::detect(&c[1]),
            pad_day: padded(&c[2]),
            comma: !c[3].is_empty(),
        };
        return make(num(&c[4]) as i32, month, Some(num(&c[2])), f);
    }
    if let Some(c) = DAY_NAME_YEAR.captures(t) {
        let (month, style) = locale.month_by_name(&c[2], NameStyle::Full).ok_or_else(not_a_date)?;
        let f = DateFormat::DayMonthNameYear {
            style,
            case: NameCase::detect(&c[2]),
            pad_day: padded(&c[1]),
        };
        return make(num(&c[3]) as i32, month, Some(num(&c[1])), f);
    }
    Err(not_a_date())
}

/// Canonical numeric rendering in the locale's canonical order. A missing
/// day is written unpadded (`04/1/2020`) to show it was not in the source.
pub fn canonical(d: &ParsedDate, locale: &DateLocale) -> String {
    let day = if d.day_present {
        format!("{:02}", d.day)
    } else {
        d.day.to_string()
    };
    let (m, y) = (format!("{:02}", d.month), format!("{:04}", d.year));
    match locale.canonical_order {
        FieldOrder::Mdy => format!("{m}/{day}/{y}"),
        FieldOrder::Dmy => format!("{day}/{m}/{y}"),
        FieldOrder::Ymd => format!("{y}-{m}-{day}"),
    }
}

/// Parse and render canonically.
pub fn normalize_date(text: &str, locale: &DateLocale) -> Result<String, DateError> {
    parse_date(text, locale).map(|d| canonical(&d, locale))
}

fn pad(n: u32, yes: bool) -> String {
    if yes {
        format!("{n:02}")
    } else {
        n.to_string()
    }
}

/// Render a date in `format`. Formats that need a day fall back to the
/// canonical form when the date has none.
pub fn render_date(d: &ParsedDate, format: &DateFormat, locale: &DateLocale) -> String {
    if format.requires_day() && !d.day_present {
        return canonical(d, locale);
    }
    let year = format!("{:04}", d.year);
    match *format {
        DateFormat::Numeric {
            order,
            sep,
            pad_day,
            pad_month,
            short_year,
        } => {
            let y = if short_year {
                format!("{:02}", d.year.rem_euclid(100))
            } else {
                year
            };
            let (m, dd) = (pad(d.month, pad_month), pad(d.day, pad_day));
            match order {
                FieldOrder::Mdy => format!("{m}{sep}{dd}{sep}{y}"),
                FieldOrder::Dmy => format!("{dd}{sep}{m}{sep}{y}"),
                FieldOrder::Ymd => format!("{y}{sep}{m}{sep}{dd}"),
            }
        }
        DateFormat::MonthYearNumeric { sep, pad_month } => format!("{}{sep}{year}", pad(d.month, pad_month)),
        DateFormat::DayMonYearCompact { pad_day, style, case } => {
            format!(
                "{}{}{year}",
                pad(d.day, pad_day),
                case.apply(locale.month_name(d.month, style))
            )
        }
        DateFormat::MonthNameYear { style, case } => {
            format!("{} {year}", case.apply(locale.month_name(d.month, style)))
        }
        DateFormat::MonthNameDayYear {
            style,
            case,
            pad_day,
            comma,
        } => format!(
            "{} {}{} {year}",
            case.apply(locale.month_name(d.month, style)),
            pad(d.day, pad_day),
            if comma { "," } else { "" }
        ),
        DateFormat::DayMonthNameYear { style, case, pad_day } => {
            format!(
                "{} {} {year}",
                pad(d.day, pad_day),
                case.apply(locale.month_name(d.month, style))
            )
        }
    }
}

/// Calendar-correct shift. The surface format and day presence carry over.
/// Results beyond the representable calendar saturate at its ends.
pub fn shift_date(d: &ParsedDate, days: i64) -> ParsedDate {
    let base = d.to_naive();
    let shifted = TimeDelta::try_days(days)
        .and_then(|delta| base.checked_add_signed(delta))
        .unwrap_or(if days < 0 { NaiveDate::MIN } else { NaiveDate::MAX });
    ParsedDate {
        year: shifted.year(),
        month: shifted.month(),
        day: shifted.day(),
        day_present: d.day_present,
        format: d.format,
        locale: d.locale.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftMode {
    FixedPerPatient,
    RandomInRange,
}

/// How many days each patient's dates move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayShiftPolicy {
    pub mode: ShiftMode,
    pub per_patient: BTreeMap<String, i64>,
    /// Inclusive range for derived shifts.
    pub range: (i64, i64),
    pub seed: u64,
}

impl DayShiftPolicy {
    pub fn fixed(per_patient: BTreeMap<String, i64>, fallback_range: (i64, i64), seed: u64) -> Result<Self, DateError> {
        Self::validated(DayShiftPolicy {
            mode: ShiftMode::FixedPerPatient,
            per_patient,
            range: fallback_range,
            seed,
        })
    }

    pub fn range(lo: i64, hi: i64, seed: u64) -> Result<Self, DateError> {
        Self::validated(DayShiftPolicy {
            mode: ShiftMode::RandomInRange,
            per_patient: BTreeMap::new(),
            range: (lo, hi),
            seed,
        })
    }

    fn validated(p: DayShiftPolicy) -> Result<Self, DateError> {
        let (lo, hi) = p.range;
        if lo > hi {
            return Err(DateError::BadRange { lo, hi });
        }
        Ok(p)
    }

    /// Parse a fixed shift table: `<patient id> <signed days>` per line.
    pub fn parse_fixed_table(source: &str) -> Result<BTreeMap<String, i64>, DateError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in source.lines().enumerate() {
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let err = || DateError::Table {
                line: idx + 1,
                message: format!("expected `<patient> <days>`, got `{text}`"),
            };
            let (id, days) = text.rsplit_once(char::is_whitespace).ok_or_else(err)?;
            let days: i64 = days.trim_start_matches('+').parse().map_err(|_| err())?;
            map.insert(id.trim().to_string(), days);
        }
        Ok(map)
    }
}

impl Default for DayShiftPolicy {
    fn default() -> Self {
        DayShiftPolicy {
            mode: ShiftMode::RandomInRange,
            per_patient: BTreeMap::new(),
            range: (-30, 30),
            seed: 0,
        }
    }
}

/// Day shift for a patient: the table entry in fixed mode, otherwise a
/// pseudo-random value in range keyed by (seed, patient id).
pub fn shift_for_patient(patient_id: &str, policy: &DayShiftPolicy) -> i64 {
    if policy.mode == ShiftMode::FixedPerPatient {
        if let Some(&days) = policy.per_patient.get(patient_id) {
            return days;
        }
    }
    let (lo, hi) = policy.range;
    rng_for(policy.seed, "day-shift", patient_id).gen_range(lo..=hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en() -> DateLocale {
        DateLocale::english()
    }

    fn parse(s: &str) -> ParsedDate {
        parse_date(s, &en()).unwrap_or_else(|e| panic!("{e}"))
    }

    #[test]
    fn month_name_year() {
        let d = parse("April 2020");
        assert_eq!((d.year, d.month, d.day()), (2020, 4, None));
        assert_eq!(d.descriptor(), "MONTHNAME-YYYY");
        assert_eq!(canonical(&d, &en()), "04/1/2020");
        assert_eq!(d.render(&en()), "April 2020");
    }

    #[test]
    fn compact_day_month_year() {
        let d = parse("12Apr2022");
        assert_eq!((d.year, d.month, d.day()), (2022, 4, Some(12)));
        assert_eq!(d.descriptor(), "DDMonYYYY");
        assert_eq!(d.render(&en()), "12Apr2022");
        assert_eq!(canonical(&d, &en()), "04/12/2022");
    }

    #[test]
    fn leap_day_parses() {
        let d = parse("2020-02-29");
        assert_eq!((d.year, d.month, d.day()), (2020, 2, Some(29)));
        assert!(parse_date("2021-02-29", &en()).is_err());
    }

    #[test]
    fn shift_keeps_month_format() {
        let d = shift_date(&parse("April 2020"), -14);
        assert_eq!(d.render(&en()), "March 2020");
        assert_ne!(d.render(&en()), "3/3/2020");
        assert_eq!(shift_date(&d, 14), parse("April 2020"));
    }

    #[test]
    fn shift_zero_is_identity() {
        for s in ["April 2020", "12Apr2022", "04/12/2022", "2020-02-29"] {
            assert_eq!(shift_date(&parse(s), 0), parse(s));
        }
    }

    #[test]
    fn shift_over_month_end() {
        assert_eq!(shift_date(&parse("2020-02-28"), 1).render(&en()), "2020-02-29");
        assert_eq!(shift_date(&parse("2021-02-28"), 1).render(&en()), "2021-03-01");
    }

    #[test]
    fn render_examples() {
        let march = ParsedDate::new(
            2020,
            3,
            None,
            DateFormat::MonthNameYear {
                style: NameStyle::Full,
                case: NameCase::Title,
            },
            "en",
        )
        .unwrap();
        assert_eq!(render_date(&march, &march.format, &en()), "March 2020");
        let apr12 = parse("12Apr2022");
        assert_eq!(render_date(&apr12, &apr12.format, &en()), "12Apr2022");
        let apr1 = ParsedDate::new(2020, 4, Some(1), DateFormat::canonical(FieldOrder::Mdy), "en").unwrap();
        assert_eq!(
            render_date(&apr1, &DateFormat::canonical(FieldOrder::Mdy), &en()),
            "04/01/2020"
        );
        // day-requiring format on a day-absent date falls back to canonical
        assert_eq!(
            render_date(&march, &DateFormat::canonical(FieldOrder::Mdy), &en()),
            "03/1/2020"
        );
    }

    #[test]
    fn numeric_order_follows_locale() {
        let d = parse("04/12/2022");
        assert_eq!((d.month, d.day()), (4, Some(12)));
        let d = parse("13/04/2022");
        assert_eq!((d.month, d.day()), (4, Some(13)));
        assert_eq!(d.descriptor(), "DD/MM/YYYY");
        let mut de = en();
        de.numeric_order = FieldOrder::Dmy;
        let d = parse_date("04.12.2022", &de).unwrap();
        assert_eq!((d.month, d.day()), (12, Some(4)));
        assert_eq!(d.descriptor(), "DD.MM.YYYY");
    }

    #[test]
    fn two_digit_year_pivot() {
        assert_eq!(parse("1/2/50").year, 2050);
        assert_eq!(parse("1/2/51").year, 1951);
        assert_eq!(parse("1/2/07").render(&en()), "1/2/07");
    }

    #[test]
    fn rejects_non_dates() {
        for s in ["", "yesterday", "13/13/2020", "Smarch 2020", "2020-1/3", "12Foo2020"] {
            assert!(matches!(parse_date(s, &en()), Err(DateError::NotADate(_))), "{s}");
        }
    }

    #[test]
    fn fixed_shift_and_range() {
        let map = DayShiftPolicy::parse_fixed_table("patient-1 +2\npatient-2 -5\n").unwrap();
        let p = DayShiftPolicy::fixed(map, (-30, 30), 1).unwrap();
        assert_eq!(shift_for_patient("patient-1", &p), 2);
        assert_eq!(shift_for_patient("patient-2", &p), -5);
        let zero = DayShiftPolicy::range(0, 0, 9).unwrap();
        assert!(["a", "b", "c"].iter().all(|id| shift_for_patient(id, &zero) == 0));
        let r = DayShiftPolicy::range(-30, 30, 7).unwrap();
        assert_eq!(shift_for_patient("p1", &r), shift_for_patient("p1", &r));
        for id in ["p1", "p2"] {
            assert!((-30..=30).contains(&shift_for_patient(id, &r)));
        }
        assert_eq!(
            DayShiftPolicy::range(3, 2, 0),
            Err(DateError::BadRange { lo: 3, hi: 2 })
        );
        assert!(DayShiftPolicy::parse_fixed_table("only-id\n").is_err());
    }

    #[test]
    fn spanish_table() {
        let src = "order = DMY\npivot = 30\nmonth.1 = enero, ene\nmonth.2 = febrero, feb\nmonth.3 = marzo, mar\nmonth.4 = abril, abr\nmonth.5 = mayo, may\nmonth.6 = junio, jun\nmonth.7 = julio, jul\nmonth.8 = agosto, ago\nmonth.9 = septiembre, sep, sept\nmonth.10 = octubre, oct\nmonth.11 = noviembre, nov\nmonth.12 = diciembre, dic\n";
        let es = DateLocale::parse("es", src).unwrap();
        assert_eq!(es.canonical_order, FieldOrder::Dmy);
        let d = parse_date("12 abril 2022", &es).unwrap();
        assert_eq!((d.year, d.month, d.day()), (2022, 4, Some(12)));
        assert_eq!(shift_date(&d, 30).render(&es), "12 mayo 2022");
        assert_eq!(parse_date("3 sept 2021", &es).unwrap().render(&es), "3 sep 2021");
        assert!(DateLocale::parse("x", "month.1 = enero, ene\n").is_err());
        assert!(DateLocale::parse("x", "order = QQQ\n").is_err());
    }
}
