//! Semantic field categories and deterministic synthetic value generation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::doc_model::canonical_number;
use crate::schema::LeafType;

use super::seed::contains_placeholder;
use super::GenError;

/// Attempts made to draw a value that fits before truncating.
pub const MAX_REGENERATIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticCategory {
    Name,
    Address,
    City,
    State,
    Zip,
    Phone,
    Email,
    Date,
    Monetary,
    Other,
}

impl SemanticCategory {
    pub const ALL: [SemanticCategory; 10] = [
        SemanticCategory::Name,
        SemanticCategory::Address,
        SemanticCategory::City,
        SemanticCategory::State,
        SemanticCategory::Zip,
        SemanticCategory::Phone,
        SemanticCategory::Email,
        SemanticCategory::Date,
        SemanticCategory::Monetary,
        SemanticCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SemanticCategory::Name => "name",
            SemanticCategory::Address => "address",
            SemanticCategory::City => "city",
            SemanticCategory::State => "state",
            SemanticCategory::Zip => "zip",
            SemanticCategory::Phone => "phone",
            SemanticCategory::Email => "email",
            SemanticCategory::Date => "date",
            SemanticCategory::Monetary => "monetary",
            SemanticCategory::Other => "other",
        }
    }
}

/// Keyword table in priority order. A `$` anywhere in a token counts as
/// a monetary match.
const KEYWORDS: [(SemanticCategory, &[&str]); 9] = [
    (SemanticCategory::Email, &["email"]),
    (SemanticCategory::Phone, &["phone", "telephone", "tel", "fax", "mobile", "cell"]),
    (SemanticCategory::Zip, &["zip", "zipcode", "postal", "postcode"]),
    (SemanticCategory::State, &["state"]),
    (SemanticCategory::City, &["city", "town"]),
    (SemanticCategory::Monetary, &["amount", "fee", "salary", "price", "total"]),
    (SemanticCategory::Date, &["date", "dob"]),
    (SemanticCategory::Address, &["address", "street", "addr"]),
    (SemanticCategory::Name, &["name"]),
];

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| c == '_' || c == '-' || c == '/' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn infer_semantic_category(field_name: &str) -> SemanticCategory {
    let toks = tokens(field_name);
    for (cat, words) in KEYWORDS {
        let hit = toks.iter().any(|t| {
            words.contains(&t.as_str()) || (cat == SemanticCategory::Monetary && t.contains('$'))
        });
        if hit {
            return cat;
        }
    }
    SemanticCategory::Other
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locale {
    EnUs,
    EsUs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocaleWeight {
    pub locale: Locale,
    pub weight: f64,
}

/// Mixture of persona pools used for names, streets and cities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaConfig {
    pub locales: Vec<LocaleWeight>,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        Self {
            locales: vec![
                LocaleWeight { locale: Locale::EnUs, weight: 0.75 },
                LocaleWeight { locale: Locale::EsUs, weight: 0.25 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub max_visual_chars: u32,
    pub choices: Option<Vec<String>>,
    pub schema_type: LeafType,
    /// Field path or name, passed to the free-text generator as context.
    pub field_hint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedValue {
    /// Ground-truth value: a string, or a number for numeric fields.
    pub value: Value,
    /// Text written into the widget.
    pub text: String,
}

/// Source of free text for fields without a recognised category.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, field_hint: &str, max_chars: usize, rng: &mut dyn RngCore) -> String;
}

/// Independent random stream for one widget of one document.
pub fn rng_stream(seed: u64, doc_id: &str, widget_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(doc_id.as_bytes());
    h.update([0u8]);
    h.update(widget_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

pub struct ValueGenerator<'a> {
    pub persona: &'a PersonaConfig,
    pub text: &'a dyn TextGenerator,
}

impl ValueGenerator<'_> {
    pub fn generate_value(
        &self,
        category: SemanticCategory,
        constraints: &Constraints,
        rng: &mut dyn RngCore,
    ) -> Result<GeneratedValue, GenError> {
        if let Some(c) = &constraints.choices {
            if c.is_empty() {
                return Err(GenError::EmptyChoices(constraints.field_hint.clone()));
            }
        }
        let max = constraints.max_visual_chars.max(1) as usize;
        let mut last = None;
        for _ in 0..MAX_REGENERATIONS {
            let candidate = self.candidate(category, constraints, max, rng)?;
            let fits = candidate.text.chars().count() <= max && !contains_placeholder(&candidate.text);
            if fits && !candidate.text.is_empty() {
                return Ok(candidate);
            }
            last = Some(candidate);
        }
        let last = last.expect("at least one attempt");
        Ok(truncate_value(&last, max, constraints.schema_type))
    }

    fn candidate(
        &self,
        category: SemanticCategory,
        c: &Constraints,
        max: usize,
        rng: &mut dyn RngCore,
    ) -> Result<GeneratedValue, GenError> {
        if let Some(choices) = &c.choices {
            let pick = &choices[rng.random_range(0..choices.len())];
            let value = match (c.schema_type, pick.trim().parse::<f64>()) {
                (LeafType::Number, Ok(n)) => Value::Number(canonical_number(n)),
                _ => Value::String(pick.clone()),
            };
            return Ok(GeneratedValue { value, text: pick.clone() });
        }
        if c.schema_type == LeafType::Number {
            let n = self.number(category, max, rng);
            let num = canonical_number(n);
            return Ok(GeneratedValue { text: num.to_string(), value: Value::Number(num) });
        }
        let locale = self.pick_locale(rng);
        let text = match category {
            SemanticCategory::Name => name(locale, &c.field_hint, rng),
            SemanticCategory::Address => street_address(locale, rng),
            SemanticCategory::City => pick(cities(locale), rng).to_string(),
            SemanticCategory::State => pick(STATES, rng).to_string(),
            SemanticCategory::Zip => zip(rng),
            SemanticCategory::Phone => phone(rng),
            SemanticCategory::Email => email(locale, rng),
            SemanticCategory::Date => date(rng),
            SemanticCategory::Monetary => money(max, rng),
            SemanticCategory::Other => self.text.generate(&c.field_hint, max, rng),
        };
        Ok(GeneratedValue { value: Value::String(text.clone()), text })
    }

    fn pick_locale(&self, rng: &mut dyn RngCore) -> Locale {
        let weights: Vec<f64> = self.persona.locales.iter().map(|l| l.weight.max(0.0)).collect();
        match WeightedIndex::new(&weights) {
            Ok(dist) => self.persona.locales[dist.sample(rng)].locale,
            Err(_) => Locale::EnUs,
        }
    }

    fn number(&self, category: SemanticCategory, max: usize, rng: &mut dyn RngCore) -> f64 {
        match category {
            SemanticCategory::Zip if max >= 5 => rng.random_range(10_000..100_000) as f64,
            SemanticCategory::Monetary => {
                let digits = rng.random_range(1..=max.saturating_sub(3).clamp(1, 5)) as u32;
                let whole = rng.random_range(10u64.pow(digits - 1)..10u64.pow(digits)) as f64;
                if rng.random_bool(0.5) {
                    whole + rng.random_range(1..100) as f64 / 100.0
                } else {
                    whole
                }
            }
            _ => {
                let digits = rng.random_range(1..=max.clamp(1, 4)) as u32;
                let lo = if digits == 1 { 0 } else { 10u64.pow(digits - 1) };
                rng.random_range(lo..10u64.pow(digits)) as f64
            }
        }
    }
}

/// Keep the visible prefix of a value that does not fit.
fn truncate_value(v: &GeneratedValue, max: usize, schema_type: LeafType) -> GeneratedValue {
    let text: String = v.text.chars().take(max).collect::<String>().trim_end().to_string();
    if schema_type == LeafType::Number && v.value.is_number() {
        let digits = text.trim_end_matches('.');
        if let Ok(n) = digits.parse::<f64>() {
            let num = canonical_number(n);
            return GeneratedValue { text: num.to_string(), value: Value::Number(num) };
        }
    }
    GeneratedValue { value: Value::String(text.clone()), text }
}

fn pick<'a>(pool: &'a [&'a str], rng: &mut dyn RngCore) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

const ORG_HINTS: [&str; 14] = [
    "company", "provider", "employer", "agency", "organization", "business", "firm", "facility",
    "landlord", "insurer", "school", "hospital", "bank", "contractor",
];

fn name(locale: Locale, hint: &str, rng: &mut dyn RngCore) -> String {
    let org = tokens(hint).iter().any(|t| ORG_HINTS.contains(&t.as_str()));
    let last = pick(last_names(locale), rng);
    if org {
        let form = rng.random_range(0..3);
        let suffix = pick(ORG_SUFFIXES, rng);
        match form {
            0 => format!("{last} {suffix}"),
            1 => format!("{last} and {} {suffix}", pick(last_names(locale), rng)),
            _ => format!("{} {suffix}", pick(ORG_WORDS, rng)),
        }
    } else {
        format!("{} {last}", pick(first_names(locale), rng))
    }
}

fn street_address(locale: Locale, rng: &mut dyn RngCore) -> String {
    let number = rng.random_range(1..10_000);
    let street = pick(streets(locale), rng);
    let suffix = pick(STREET_SUFFIXES, rng);
    if rng.random_bool(0.2) {
        format!("{number} {street} {suffix} Apt {}", rng.random_range(1..400))
    } else {
        format!("{number} {street} {suffix}")
    }
}

fn zip(rng: &mut dyn RngCore) -> String {
    let base = rng.random_range(10_000..100_000);
    if rng.random_bool(0.2) {
        format!("{base}-{:04}", rng.random_range(0..10_000))
    } else {
        base.to_string()
    }
}

fn phone(rng: &mut dyn RngCore) -> String {
    let a = rng.random_range(201..990);
    let b = rng.random_range(200..1000);
    let c = rng.random_range(0..10_000);
    match rng.random_range(0..3) {
        0 => format!("({a}) {b}-{c:04}"),
        1 => format!("{a}-{b}-{c:04}"),
        _ => format!("{a}.{b}.{c:04}"),
    }
}

fn email(locale: Locale, rng: &mut dyn RngCore) -> String {
    let first = pick(first_names(locale), rng).to_lowercase();
    let last = pick(last_names(locale), rng).to_lowercase();
    let domain = pick(EMAIL_DOMAINS, rng);
    match rng.random_range(0..3) {
        0 => format!("{first}.{last}@{domain}"),
        1 => format!("{}{last}@{domain}", &first[..1]),
        _ => format!("{first}{}@{domain}", rng.random_range(1..100)),
    }
}

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
    "November", "December",
];

fn date(rng: &mut dyn RngCore) -> String {
    let y = rng.random_range(1950..2031);
    let m = rng.random_range(1..13u32);
    let d = rng.random_range(1..29u32);
    match rng.random_range(0..10) {
        0..=5 => format!("{m:02}/{d:02}/{y}"),
        6 | 7 => format!("{y}-{m:02}-{d:02}"),
        _ => format!("{} {d}, {y}", MONTHS[(m - 1) as usize]),
    }
}

fn group_thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn money(max: usize, rng: &mut dyn RngCore) -> String {
    let digits = max.saturating_sub(4).clamp(1, 6) as u32;
    let whole = rng.random_range(1..10u64.pow(digits));
    let cents = rng.random_range(0..100);
    match rng.random_range(0..3) {
        0 => format!("${}.{cents:02}", group_thousands(whole)),
        1 => format!("{}.{cents:02}", group_thousands(whole)),
        _ => format!("${}", group_thousands(whole)),
    }
}

/// Built-in free-text source: identifiers, short phrases or single words,
/// chosen from the field hint.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinTextGenerator;

const ID_HINTS: [&str; 16] = [
    "number", "no", "num", "id", "code", "license", "permit", "account", "case", "policy", "registration",
    "reference", "ref", "docket", "file", "serial",
];
const PHRASE_HINTS: [&str; 14] = [
    "description", "reason", "comments", "comment", "remarks", "conditions", "narrative", "details",
    "purpose", "notes", "explanation", "circumstances", "occupancy", "use",
];
const ROLE_HINTS: [&str; 6] = ["title", "position", "occupation", "job", "role", "capacity"];

impl TextGenerator for BuiltinTextGenerator {
    fn generate(&self, field_hint: &str, max_chars: usize, rng: &mut dyn RngCore) -> String {
        let toks = tokens(field_hint);
        let has = |pool: &[&str]| toks.iter().any(|t| pool.contains(&t.as_str()));
        if has(&PHRASE_HINTS) {
            let fitting: Vec<&str> = PHRASES.iter().copied().filter(|p| p.chars().count() <= max_chars).collect();
            if fitting.is_empty() {
                return pick(PHRASES, rng).to_string();
            }
            return pick(&fitting, rng).to_string();
        }
        if has(&ROLE_HINTS) {
            return pick(JOB_TITLES, rng).to_string();
        }
        if has(&ID_HINTS) {
            let letters: String = (0..rng.random_range(2..4)).map(|_| rng.random_range(b'A'..=b'Z') as char).collect();
            let width = rng.random_range(4..8usize);
            let n = rng.random_range(0..10u64.pow(width as u32));
            return match rng.random_range(0..3) {
                0 => format!("{letters}-{n:0width$}"),
                1 => format!("{letters}{n:0width$}"),
                _ => format!("{letters}-{}-{:04}", rng.random_range(1990..2031), n % 10_000),
            };
        }
        pick(WORDS, rng).to_string()
    }
}

fn first_names(l: Locale) -> &'static [&'static str] {
    match l {
        Locale::EnUs => FIRST_EN,
        Locale::EsUs => FIRST_ES,
    }
}

fn last_names(l: Locale) -> &'static [&'static str] {
    match l {
        Locale::EnUs => LAST_EN,
        Locale::EsUs => LAST_ES,
    }
}

fn streets(l: Locale) -> &'static [&'static str] {
    match l {
        Locale::EnUs => STREETS_EN,
        Locale::EsUs => STREETS_ES,
    }
}

fn cities(l: Locale) -> &'static [&'static str] {
    match l {
        Locale::EnUs => CITIES_EN,
        Locale::EsUs => CITIES_ES,
    }
}

const FIRST_EN: &[&str] = &[
    "James", "Mary", "Robert", "Patricia", "John", "Jennifer", "Michael", "Linda", "David", "Elizabeth",
    "William", "Barbara", "Richard", "Susan", "Joseph", "Jessica", "Thomas", "Sarah", "Charles", "Karen",
    "Daniel", "Nancy", "Matthew", "Lisa", "Anthony", "Betty", "Mark", "Sandra", "Steven", "Ashley",
    "Paul", "Kimberly", "Andrew", "Donna", "Joshua", "Emily", "Kevin", "Carol", "Brian", "Michelle",
];
const FIRST_ES: &[&str] = &[
    "Jose", "Maria", "Luis", "Carmen", "Carlos", "Ana", "Juan", "Rosa", "Miguel", "Isabel", "Jorge",
    "Lucia", "Pedro", "Elena", "Alejandro", "Sofia", "Diego", "Gabriela", "Fernando", "Valeria",
    "Ricardo", "Adriana", "Javier", "Patricia", "Manuel", "Daniela",
];
const LAST_EN: &[&str] = &[
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Miller", "Davis", "Wilson", "Anderson", "Taylor",
    "Thomas", "Moore", "Jackson", "Martin", "Lee", "Thompson", "White", "Harris", "Clark", "Lewis",
    "Robinson", "Walker", "Young", "Allen", "King", "Wright", "Scott", "Green", "Baker", "Adams",
    "Nelson", "Hill", "Campbell", "Mitchell", "Roberts", "Carter", "Phillips", "Evans", "Turner", "Knox",
];
const LAST_ES: &[&str] = &[
    "Garcia", "Rodriguez", "Martinez", "Hernandez", "Lopez", "Gonzalez", "Perez", "Sanchez", "Ramirez",
    "Torres", "Flores", "Rivera", "Gomez", "Diaz", "Cruz", "Morales", "Reyes", "Gutierrez", "Ortiz",
    "Ramos", "Castillo", "Vargas", "Mendoza", "Ruiz",
];
const STREETS_EN: &[&str] = &[
    "Maple", "Oak", "Cedar", "Pine", "Elm", "Washington", "Lake", "Hill", "Park", "Main", "Church",
    "Highland", "Sunset", "Ridge", "Meadow", "Forest", "River", "Spring", "Lincoln", "Jefferson",
];
const STREETS_ES: &[&str] = &[
    "Alameda", "Las Palmas", "Del Sol", "Vista", "Mesa", "Camino Real", "Loma", "Sierra", "Rio Grande",
    "Buena Vista", "El Paseo", "Arroyo",
];
const STREET_SUFFIXES: &[&str] = &["St", "Ave", "Rd", "Blvd", "Dr", "Ln", "Ct", "Way", "Pl"];
const CITIES_EN: &[&str] = &[
    "Springfield", "Franklin", "Greenville", "Bristol", "Clinton", "Fairview", "Salem", "Madison",
    "Georgetown", "Arlington", "Ashland", "Dover", "Oxford", "Jackson", "Burlington", "Manchester",
    "Milton", "Newport", "Auburn", "Dayton", "Lexington", "Jasmineberg", "Riverside", "Kingston",
];
const CITIES_ES: &[&str] = &[
    "San Antonio", "El Paso", "Laredo", "Santa Fe", "Las Cruces", "San Jose", "Fresno", "Pueblo",
    "Yuma", "Salinas", "Brownsville", "Mesa",
];
const STATES: &[&str] = &[
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "ID", "IL", "IN", "IA", "KS", "KY",
    "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM", "NY", "NC", "ND",
    "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY",
];
const ORG_SUFFIXES: &[&str] = &["Inc", "LLC", "Co", "Corp", "Group", "Partners", "Services", "Holdings"];
const ORG_WORDS: &[&str] = &[
    "Summit", "Pioneer", "Heritage", "Keystone", "Evergreen", "Liberty", "Horizon", "Cornerstone",
    "Atlas", "Northwind", "Bluewater", "Redwood",
];
const EMAIL_DOMAINS: &[&str] = &["example.com", "mail.example.org", "example.net", "inbox.example.com"];
const JOB_TITLES: &[&str] = &[
    "Manager", "Clerk", "Accountant", "Engineer", "Nurse", "Teacher", "Supervisor", "Technician",
    "Analyst", "Director", "Inspector", "Administrator", "Consultant", "Driver", "Electrician",
];
const PHRASES: &[&str] = &[
    "Single family residence",
    "Retail storage only",
    "No changes since last review",
    "Annual renewal",
    "Office use, first floor",
    "Pending inspection",
    "Requested by applicant",
    "See attached statement",
    "Relocation for employment",
    "Vehicle damaged in parking lot",
    "Routine maintenance",
    "Incomplete records on file",
    "Occupancy limited to 40 persons",
    "Approved with conditions",
    "Water damage to kitchen",
    "Transfer of ownership",
    "Temporary event permit",
    "Medical leave",
    "Change of address",
    "Damaged in transit",
];
const WORDS: &[&str] = &[
    "Administrative", "Residential", "Commercial", "Standard", "Pending", "Approved", "Temporary",
    "Permanent", "Primary", "Secondary", "Full time", "Part time", "Seasonal", "Active", "Inactive",
    "Regional", "Municipal", "Private", "Public", "Federal", "General", "Special", "Annual", "Quarterly",
];
