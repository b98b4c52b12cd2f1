//! Synthetic clinical notes with planted PHI and exact gold spans, for
//! round-trip, determinism, evaluation and throughput checks.
//!
//! Surface values come from the language pack's surrogate vocabularies when
//! present, otherwise from small built-in lists. Output is a pure function
//! of the configuration and seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::Annotation;
use crate::faker::{Faker, Gender};
use crate::model::{Document, EntityLabel, Span};
use crate::seeding::rng_for;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("the language pack has no name vocabulary")]
    NoNames,
    #[error("need at least one document and one patient")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub docs: usize,
    pub patients: usize,
    pub seed: u64,
    /// Notes grow sentence by sentence until they reach this many characters.
    pub target_chars: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs: 200,
            patients: 50,
            seed: 1,
            target_chars: 1200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub docs: Vec<Document>,
    pub gold: Vec<Annotation>,
}

const HOSPITALS: &[&str] = &[
    "Mercy Hospital",
    "Riverside Medical Center",
    "Lakeview Clinic",
    "Sunrise Hospital",
];
const ORGS: &[&str] = &["Acme Corp", "Globex", "Initech", "Red Cross"];
const COUNTRIES: &[&str] = &["Canada", "Mexico", "Ireland", "Poland", "India", "Brazil"];
const CITIES: &[&str] = &["Memphis", "Fresno", "Boston", "Denver", "Tulsa"];
const PROFESSIONS: &[&str] = &["nurse", "teacher", "lawyer", "plumber", "engineer"];
const STREET_NAMES: &[&str] = &["Oak", "Maple", "Cedar", "Lake", "Hill", "Park", "River", "Mill"];
const STREET_TYPES: &[&str] = &["Street", "Avenue", "Road", "Lane", "Drive"];
const STATES: &[&str] = &["CA", "TN", "TX", "NY", "OH", "WA", "CO", "FL"];
const MONTHS: &[&str] = &[
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];
// Names outside the shipped vocabularies, so recall is not trivially perfect.
const OOV_FIRST_F: &[&str] = &["Xiomara", "Oluwaseun", "Saoirse", "Anneliese"];
const OOV_FIRST_M: &[&str] = &["Thaddeus", "Bartholomew", "Ignatius", "Kwabena"];
const OOV_LAST: &[&str] = &["Okonkwo", "Vanderbilt", "Przybylski", "Nakashima"];
/// Share of patients whose name is out of vocabulary.
const OOV_RATE: f64 = 0.1;

const DISEASES: &[&str] = &[
    "Parkinson's disease",
    "type 2 diabetes",
    "hypertension",
    "asthma",
    "Crohn's disease",
    "atrial fibrillation",
];
const MEDICATIONS: &[&str] = &["metformin", "lisinopril", "carbidopa-levodopa", "albuterol", "warfarin"];

const FILLER: &[&str] = &[
    "Vital signs were stable throughout the stay.",
    "No acute distress was noted on examination.",
    "Lungs clear to auscultation bilaterally.",
    "Heart rate regular, no murmurs appreciated.",
    "Abdomen soft, non-tender, non-distended.",
    "Labs were within normal limits except for a mildly elevated glucose.",
    "The plan was discussed and all questions were answered.",
    "Continue current medications and monitor blood pressure at home.",
    "Return precautions were reviewed in detail.",
    "Diet as tolerated; encourage fluids and daily walks.",
    "Imaging showed no acute abnormality.",
    "Pain is well controlled on the current regimen.",
];

const SECTIONS: &[&str] = &["HISTORY", "EXAM", "ASSESSMENT", "PLAN"];

// `{slot}` markers; `Dr. {doctor}` keeps the title outside the gold span.
const TEMPLATES: &[&str] = &[
    "{patient_full} is a {age_compound} {profession} from {city}.",
    "{pronoun} was admitted to {hospital} on {date}.",
    "Seen by Dr. {doctor} in clinic on {date}.",
    "History of {disease}, currently taking {medication}.",
    "{patient_first} reports improved sleep since the last visit.",
    "Contact number: {phone}.",
    "MRN: {mrn}",
    "Address: {street}, {city}, {state} {zip}.",
    "Emergency contact can be reached at {phone}.",
    "{patient_first} works for {org} as a {profession}.",
    "Born in {country} and moved to {city} in {month_year}.",
    "Follow-up with Dr. {doctor} on {date_long}.",
    "SSN {ssn} verified at registration.",
    "Patient is {age} years old.",
    "{age} y.o. {sex} with {disease}.",
    "Last colonoscopy on {date_iso} was unremarkable.",
];

struct Patient {
    first: String,
    last: String,
    gender: Gender,
    age: u32,
    city: String,
    profession: String,
    mrn: String,
    street: String,
    state: &'static str,
    zip: String,
    phone: String,
    doctor: String,
}

struct Note {
    text: String,
    chars: usize,
    gold: Vec<(Span, EntityLabel)>,
}

impl Note {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn plant(&mut self, s: &str, label: EntityLabel) {
        let start = self.chars;
        self.push(s);
        self.gold.push((Span::new(start, self.chars), label));
    }
}

struct Pools {
    first_f: Vec<String>,
    first_m: Vec<String>,
    last: Vec<String>,
    by_label: BTreeMap<EntityLabel, Vec<String>>,
}

impl Pools {
    fn new(faker: &Faker) -> Result<Pools, SynthError> {
        let names = faker.names.as_ref().ok_or(SynthError::NoNames)?;
        let firsts = |g: Gender| -> Vec<String> {
            names
                .first
                .entries()
                .iter()
                .filter(|e| e.gender == g)
                .map(|e| e.text.clone())
                .collect()
        };
        let mut by_label = BTreeMap::new();
        for (label, fallback) in [
            (EntityLabel::City, CITIES),
            (EntityLabel::Profession, PROFESSIONS),
            (EntityLabel::Hospital, HOSPITALS),
            (EntityLabel::Organization, ORGS),
            (EntityLabel::Country, COUNTRIES),
        ] {
            let from_pack: Vec<String> = faker
                .vocabularies
                .get(&label)
                .map(|v| v.entries().iter().map(|e| e.text.clone()).collect())
                .unwrap_or_default();
            let list = if from_pack.is_empty() {
                fallback.iter().map(|s| s.to_string()).collect()
            } else {
                from_pack
            };
            by_label.insert(label, list);
        }
        Ok(Pools {
            first_f: firsts(Gender::Feminine),
            first_m: firsts(Gender::Masculine),
            last: names.last.entries().iter().map(|e| e.text.clone()).collect(),
            by_label,
        })
    }

    fn pick(&self, label: EntityLabel, rng: &mut ChaCha8Rng) -> String {
        self.by_label[&label].choose(rng).expect("pools are non-empty").clone()
    }
}

fn digits(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|i| char::from(b'0' + rng.gen_range(if i == 0 { 1 } else { 0 }..10u8)))
        .collect()
}

fn make_patient(pools: &Pools, rng: &mut ChaCha8Rng) -> Patient {
    let gender = if rng.gen_bool(0.5) {
        Gender::Feminine
    } else {
        Gender::Masculine
    };
    let firsts = if gender == Gender::Feminine {
        &pools.first_f
    } else {
        &pools.first_m
    };
    let doctor_first = if rng.gen_bool(0.5) {
        &pools.first_f
    } else {
        &pools.first_m
    };
    let (first, last) = if rng.gen_bool(OOV_RATE) {
        let oov = if gender == Gender::Feminine {
            OOV_FIRST_F
        } else {
            OOV_FIRST_M
        };
        (
            oov.choose(rng).unwrap().to_string(),
            OOV_LAST.choose(rng).unwrap().to_string(),
        )
    } else {
        (
            firsts.choose(rng).cloned().unwrap_or_else(|| "Alex".into()),
            pools.last.choose(rng).cloned().unwrap_or_else(|| "Doe".into()),
        )
    };
    Patient {
        first,
        last,
        gender,
        age: rng.gen_range(18..=95),
        city: pools.pick(EntityLabel::City, rng),
        profession: pools.pick(EntityLabel::Profession, rng),
        mrn: digits(rng, 8),
        street: format!(
            "{} {} {}",
            rng.gen_range(10..9999),
            STREET_NAMES.choose(rng).unwrap(),
            STREET_TYPES.choose(rng).unwrap()
        ),
        state: STATES.choose(rng).unwrap(),
        zip: digits(rng, 5),
        phone: format!("{}-{}-{}", digits(rng, 3), digits(rng, 3), digits(rng, 4)),
        doctor: format!(
            "{} {}",
            doctor_first.choose(rng).cloned().unwrap_or_else(|| "Sam".into()),
            pools.last.choose(rng).cloned().unwrap_or_else(|| "Roe".into())
        ),
    }
}

fn random_date(rng: &mut ChaCha8Rng, style: u8) -> String {
    let year = rng.gen_range(2005..=2023);
    let month = rng.gen_range(1..=12usize);
    let day = rng.gen_range(1..=28);
    match style {
        0 => format!("{month:02}/{day:02}/{year}"),
        1 => format!("{month}/{day}/{year}"),
        2 => format!("{} {day}, {year}", MONTHS[month - 1]),
        3 => format!("{year}-{month:02}-{day:02}"),
        4 => format!("{} {year}", MONTHS[month - 1]),
        _ => format!("{day}{}{year}", &MONTHS[month - 1][..3]),
    }
}

fn render_template(template: &str, p: &Patient, pools: &Pools, rng: &mut ChaCha8Rng, note: &mut Note) {
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        note.push(&rest[..open]);
        let close = open + rest[open..].find('}').expect("templates are well formed");
        let slot = &rest[open + 1..close];
        rest = &rest[close + 1..];
        use EntityLabel as L;
        match slot {
            "patient_full" => note.plant(&format!("{} {}", p.first, p.last), L::Patient),
            "patient_first" => note.plant(&p.first, L::Patient),
            "pronoun" => note.push(if p.gender == Gender::Feminine { "She" } else { "He" }),
            "sex" => note.push(if p.gender == Gender::Feminine { "female" } else { "male" }),
            "age_compound" => note.plant(&format!("{}-year-old", p.age), L::Age),
            "age" => note.plant(&p.age.to_string(), L::Age),
            "profession" => note.plant(&p.profession, L::Profession),
            "city" => note.plant(&p.city, L::City),
            "hospital" => note.plant(&pools.pick(L::Hospital, rng), L::Hospital),
            "org" => note.plant(&pools.pick(L::Organization, rng), L::Organization),
            "country" => note.plant(&pools.pick(L::Country, rng), L::Country),
            "doctor" => note.plant(&p.doctor, L::Doctor),
            "date" => {
                let style = rng.gen_range(0..2);
                note.plant(&random_date(rng, style), L::Date)
            }
            "date_long" => {
                let style = if rng.gen_bool(0.5) { 2 } else { 5 };
                note.plant(&random_date(rng, style), L::Date)
            }
            "date_iso" => note.plant(&random_date(rng, 3), L::Date),
            "month_year" => note.plant(&random_date(rng, 4), L::Date),
            "phone" => note.plant(&p.phone, L::Phone),
            "mrn" => note.plant(&p.mrn, L::Id),
            "ssn" => note.plant(
                &format!("{}-{}-{}", digits(rng, 3), digits(rng, 2), digits(rng, 4)),
                L::Id,
            ),
            "street" => note.plant(&p.street, L::Street),
            "state" => note.push(p.state),
            "zip" => note.plant(&p.zip, L::Zip),
            "disease" => note.push(DISEASES.choose(rng).unwrap()),
            "medication" => note.push(MEDICATIONS.choose(rng).unwrap()),
            other => unreachable!("unknown template slot {other}"),
        }
    }
    note.push(rest);
}

pub fn generate(config: &SynthConfig, faker: &Faker) -> Result<SynthCorpus, SynthError> {
    if config.docs == 0 || config.patients == 0 {
        return Err(SynthError::Empty);
    }
    let pools = Pools::new(faker)?;
    let patients: Vec<Patient> = (0..config.patients)
        .map(|i| make_patient(&pools, &mut rng_for(config.seed, "synth:patient", &i.to_string())))
        .collect();
    let width = config.docs.to_string().len().max(4);
    let mut docs = Vec::with_capacity(config.docs);
    let mut gold = Vec::new();
    for i in 0..config.docs {
        let mut rng = rng_for(config.seed, "synth:doc", &i.to_string());
        let pi = i % config.patients;
        let p = &patients[pi];
        let mut note = Note {
            text: String::new(),
            chars: 0,
            gold: Vec::new(),
        };
        note.push("CLINICAL NOTE\n");
        let mut section = 0;
        // always open with the identifying sentence
        render_template(TEMPLATES[0], p, &pools, &mut rng, &mut note);
        while note.chars < config.target_chars {
            if rng.gen_bool(0.2) && section < SECTIONS.len() {
                note.push(&format!("\n\n{}\n", SECTIONS[section]));
                section += 1;
            } else {
                note.push(" ");
            }
            if rng.gen_bool(0.45) {
                note.push(FILLER.choose(&mut rng).unwrap());
            } else {
                render_template(TEMPLATES.choose(&mut rng).unwrap(), p, &pools, &mut rng, &mut note);
            }
        }
        note.push("\n");
        let doc_id = format!("note_{i:0width$}.txt");
        let patient_id = format!("P{pi:0width$}");
        gold.extend(note.gold.iter().map(|(s, l)| Annotation {
            doc_id: doc_id.clone(),
            span: *s,
            label: *l,
        }));
        docs.push(Document::new(doc_id, Some(patient_id), note.text, "en").expect("generated ids are non-empty"));
    }
    Ok(SynthCorpus { docs, gold })
}
