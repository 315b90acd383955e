//! The string transformation language.
//!
//! A [`Transformation`] is a list of [`UnitChain`]s. Every chain reads the
//! original input, pipes it through up to three [`Unit`]s, and the chain
//! outputs are concatenated. All operations are total: selections that fall
//! outside the input produce the empty string.
//!
//! Text form (used in corpus files, manifests and for tie-breaking):
//!
//! ```text
//! transformation := chain (" + " chain)*
//! chain          := unit ("|" unit)*
//! unit           := "substr(" INT "," (INT | "END") ")"
//!                 | "split(" CHAR "," INT ")"
//!                 | "lower" | "upper"
//!                 | "literal(" STRING ")"
//! CHAR           := "'" one escaped character "'"
//! STRING         := '"' escaped characters '"'
//! ```
//!
//! Escapes inside quotes are `\\`, `\'`, `\"` and `\u{HEX}`; control
//! characters are always written as `\u{HEX}`. Whitespace between tokens is
//! ignored when parsing; [`fmt::Display`] emits the canonical spacing above.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::CellValue;
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const MAX_STACK: usize = 3;
pub const MAX_CHAINS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Unit {
    /// Characters `[start, end)`; `end: None` means the end of the input.
    Substr {
        start: usize,
        #[serde(with = "end_index")]
        end: Option<usize>,
    },
    /// Part `part` of the input split on every `delimiter`.
    Split { delimiter: char, part: usize },
    Lower,
    Upper,
    /// Constant text; ignores its input.
    Literal { text: CellValue },
}

mod end_index {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        At(usize),
        End(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(i) => Repr::At(*i).serialize(s),
            None => "END".serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::At(i) => Ok(Some(i)),
            Repr::End(e) if e == "END" => Ok(None),
            Repr::End(e) => Err(de::Error::custom(format!("expected index or \"END\", got {e:?}"))),
        }
    }
}

impl Unit {
    pub fn substr(start: usize, end: usize) -> Unit {
        Unit::Substr { start, end: Some(end) }
    }

    pub fn substr_to_end(start: usize) -> Unit {
        Unit::Substr { start, end: None }
    }

    pub fn split(delimiter: char, part: usize) -> Unit {
        Unit::Split { delimiter, part }
    }

    pub fn literal(text: impl Into<CellValue>) -> Unit {
        Unit::Literal { text: text.into() }
    }

    fn check(&self) -> Result<()> {
        match self {
            Unit::Substr { start, end: Some(end) } if start > end => Err(Error::Grammar(format!(
                "substr start {start} is after end {end}"
            ))),
            Unit::Literal { text } if text.is_empty() => {
                Err(Error::Grammar("literal text must be non-empty".into()))
            }
            Unit::Literal { text } => text.validate(),
            _ => Ok(()),
        }
    }
}

pub fn lower_char(c: char) -> char {
    let mut it = c.to_lowercase();
    match (it.next(), it.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub fn upper_char(c: char) -> char {
    let mut it = c.to_uppercase();
    match (it.next(), it.next()) {
        (Some(u), None) => u,
        _ => c,
    }
}

/// Character-wise case mapping. Characters whose full mapping would expand
/// to several characters are left as they are, so lengths never change.
pub fn to_lower(s: &str) -> String {
    if s.is_ascii() {
        return s.to_ascii_lowercase();
    }
    s.chars().map(lower_char).collect()
}

pub fn to_upper(s: &str) -> String {
    if s.is_ascii() {
        return s.to_ascii_uppercase();
    }
    s.chars().map(upper_char).collect()
}

fn substr(input: &str, start: usize, end: Option<usize>) -> String {
    if input.is_ascii() {
        let len = input.len();
        let end = end.map_or(len, |e| e.min(len));
        return if start >= end { String::new() } else { input[start..end].to_owned() };
    }
    let len = input.chars().count();
    let end = end.map_or(len, |e| e.min(len));
    if start >= end {
        return String::new();
    }
    input.chars().skip(start).take(end - start).collect()
}

pub fn apply_unit(unit: &Unit, input: &str) -> String {
    match unit {
        Unit::Substr { start, end } => substr(input, *start, *end),
        Unit::Split { delimiter, part } => input.split(*delimiter).nth(*part).unwrap_or("").to_owned(),
        Unit::Lower => to_lower(input),
        Unit::Upper => to_upper(input),
        Unit::Literal { text } => text.as_str().to_owned(),
    }
}

/// One to three stacked units; the output of each feeds the next.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Unit>", into = "Vec<Unit>")]
pub struct UnitChain {
    units: Vec<Unit>,
}

impl UnitChain {
    pub fn new(units: Vec<Unit>) -> Result<Self> {
        if units.is_empty() || units.len() > MAX_STACK {
            return Err(Error::Grammar(format!(
                "a chain stacks 1 to {MAX_STACK} units, got {}",
                units.len()
            )));
        }
        for (i, u) in units.iter().enumerate() {
            u.check()?;
            if i > 0 && matches!(u, Unit::Literal { .. }) {
                return Err(Error::Grammar("literal may only start a chain".into()));
            }
        }
        Ok(UnitChain { units })
    }

    /// Builds a chain the caller knows to be valid.
    pub(crate) fn from_units_unchecked(units: Vec<Unit>) -> Self {
        debug_assert!(UnitChain::new(units.clone()).is_ok(), "{units:?}");
        UnitChain { units }
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<Unit>> for UnitChain {
    type Error = Error;
    fn try_from(units: Vec<Unit>) -> Result<Self> {
        UnitChain::new(units)
    }
}

impl From<UnitChain> for Vec<Unit> {
    fn from(c: UnitChain) -> Self {
        c.units
    }
}

pub fn apply_chain(chain: &UnitChain, input: &str) -> String {
    let mut units = chain.units.iter();
    let first = units.next().expect("chains are non-empty");
    units.fold(apply_unit(first, input), |acc, u| apply_unit(u, &acc))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TransformationRepr", into = "TransformationRepr")]
pub struct Transformation {
    chains: Vec<UnitChain>,
}

#[derive(Serialize, Deserialize)]
struct TransformationRepr {
    chains: Vec<UnitChain>,
}

impl TryFrom<TransformationRepr> for Transformation {
    type Error = Error;
    fn try_from(r: TransformationRepr) -> Result<Self> {
        Transformation::new(r.chains)
    }
}

impl From<Transformation> for TransformationRepr {
    fn from(t: Transformation) -> Self {
        TransformationRepr { chains: t.chains }
    }
}

impl Transformation {
    pub fn new(chains: Vec<UnitChain>) -> Result<Self> {
        if chains.is_empty() || chains.len() > MAX_CHAINS {
            return Err(Error::Grammar(format!(
                "a transformation has 1 to {MAX_CHAINS} chains, got {}",
                chains.len()
            )));
        }
        Ok(Transformation { chains })
    }

    pub fn chains(&self) -> &[UnitChain] {
        &self.chains
    }

    /// Total number of stacked units over all chains.
    pub fn unit_count(&self) -> usize {
        self.chains.iter().map(UnitChain::len).sum()
    }

    pub fn apply(&self, input: &str) -> String {
        apply_transformation(self, input)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transformations always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse { offset: e.column(), message: e.to_string() })
    }
}

pub fn apply_transformation(t: &Transformation, input: &str) -> String {
    let mut out = String::new();
    for c in &t.chains {
        out.push_str(&apply_chain(c, input));
    }
    out
}

/// Default character set for random source text.
pub const DEFAULT_ALPHABET: &str =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 -_./,:;@#()";

/// Default split delimiters for random programs.
pub const DEFAULT_DELIMITERS: &str = " -_./,:;@#()";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarConfig {
    pub max_chains: usize,
    pub max_stack: usize,
    pub literal_alphabet: Vec<char>,
    /// Longest literal drawn by the random generator.
    pub literal_max_len: usize,
    /// Delimiters the random generator picks for split units.
    pub delimiters: Vec<char>,
    /// Exclusive bound on substring indices.
    pub param_bound: usize,
    /// Exclusive bound on split part indices.
    pub part_bound: usize,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        GrammarConfig {
            max_chains: MAX_CHAINS,
            max_stack: MAX_STACK,
            literal_alphabet: DEFAULT_ALPHABET.chars().collect(),
            literal_max_len: 3,
            delimiters: DEFAULT_DELIMITERS.chars().collect(),
            param_bound: 40,
            part_bound: 3,
        }
    }
}

impl GrammarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_stack == 0 || self.max_stack > MAX_STACK {
            return Err(Error::config(format!("max_stack must be in 1..={MAX_STACK}")));
        }
        if self.max_chains == 0 || self.max_chains > MAX_CHAINS {
            return Err(Error::config(format!("max_chains must be in 1..={MAX_CHAINS}")));
        }
        if self.param_bound == 0 || self.part_bound == 0 {
            return Err(Error::config("parameter bounds must be positive"));
        }
        if self.literal_alphabet.is_empty() || self.delimiters.is_empty() || self.literal_max_len == 0 {
            return Err(Error::config("literal alphabet and delimiters must be non-empty"));
        }
        Ok(())
    }
}

fn random_unit(rng: &mut Rng, cfg: &GrammarConfig, head: bool) -> Unit {
    let kinds = if head { 5 } else { 4 };
    match rng::index(rng, kinds) {
        0 => {
            let start = rng::index(rng, cfg.param_bound);
            // `param_bound` stands for END
            let end = rng::uniform(rng, start, cfg.param_bound);
            Unit::Substr { start, end: (end < cfg.param_bound).then_some(end) }
        }
        1 => Unit::Split {
            delimiter: cfg.delimiters[rng::index(rng, cfg.delimiters.len())],
            part: rng::index(rng, cfg.part_bound),
        },
        2 => Unit::Lower,
        3 => Unit::Upper,
        _ => {
            let len = rng::uniform(rng, 1, cfg.literal_max_len);
            let text: String = (0..len)
                .map(|_| cfg.literal_alphabet[rng::index(rng, cfg.literal_alphabet.len())])
                .collect();
            Unit::literal(text)
        }
    }
}

pub fn random_chain(rng: &mut Rng, cfg: &GrammarConfig) -> UnitChain {
    let depth = rng::uniform(rng, 1, cfg.max_stack);
    let units = (0..depth).map(|i| random_unit(rng, cfg, i == 0)).collect();
    UnitChain::from_units_unchecked(units)
}

/// A random program with a chain count drawn uniformly from `chains`.
pub fn random_transformation(
    rng: &mut Rng,
    cfg: &GrammarConfig,
    chains: RangeInclusive<usize>,
) -> Transformation {
    let lo = (*chains.start()).max(1);
    let hi = (*chains.end()).min(cfg.max_chains).max(lo);
    let n = rng::uniform(rng, lo, hi);
    Transformation { chains: (0..n).map(|_| random_chain(rng, cfg)).collect() }
}

/// Random text with a uniform length in `len` and i.i.d. uniform characters.
pub fn random_source(rng: &mut Rng, len: RangeInclusive<usize>, alphabet: &[char]) -> CellValue {
    let n = rng::uniform(rng, *len.start(), *len.end());
    let text: String = (0..n).map(|_| alphabet[rng::index(rng, alphabet.len())]).collect();
    CellValue::from(text)
}

// ---- text form ----

fn write_quoted(f: &mut fmt::Formatter<'_>, quote: char, text: &str) -> fmt::Result {
    use fmt::Write;
    f.write_char(quote)?;
    for c in text.chars() {
        if c == '\\' || c == quote {
            f.write_char('\\')?;
            f.write_char(c)?;
        } else if c.is_control() {
            write!(f, "\\u{{{:x}}}", c as u32)?;
        } else {
            f.write_char(c)?;
        }
    }
    f.write_char(quote)
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::Substr { start, end: Some(end) } => write!(f, "substr({start},{end})"),
            Unit::Substr { start, end: None } => write!(f, "substr({start},END)"),
            Unit::Split { delimiter, part } => {
                f.write_str("split(")?;
                write_quoted(f, '\'', delimiter.encode_utf8(&mut [0; 4]))?;
                write!(f, ",{part})")
            }
            Unit::Lower => f.write_str("lower"),
            Unit::Upper => f.write_str("upper"),
            Unit::Literal { text } => {
                f.write_str("literal(")?;
                write_quoted(f, '"', text.as_str())?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for UnitChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, u) in self.units.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{u}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.chains.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { chars: src.char_indices().collect(), pos: 0, src }
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.src.len(), |&(o, _)| o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.offset(), message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn word(&mut self) -> String {
        self.skip_ws();
        let mut w = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_alphanumeric) {
            w.push(c);
            self.pos += 1;
        }
        w
    }

    fn number(&mut self) -> Result<usize> {
        let w = self.word();
        w.parse().or_else(|_| self.err(format!("expected a number, got {w:?}")))
    }

    fn quoted(&mut self, quote: char) -> Result<String> {
        self.expect(quote)?;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return self.err("unterminated quote");
            };
            self.pos += 1;
            match c {
                c if c == quote => return Ok(out),
                '\\' => {
                    let Some(e) = self.peek() else {
                        return self.err("dangling escape");
                    };
                    self.pos += 1;
                    match e {
                        'u' => {
                            self.expect('{')?;
                            let mut hex = String::new();
                            while let Some(h) = self.peek().filter(char::is_ascii_hexdigit) {
                                hex.push(h);
                                self.pos += 1;
                            }
                            if self.peek() != Some('}') {
                                return self.err("expected '}'");
                            }
                            self.pos += 1;
                            let ch = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32);
                            match ch {
                                Some(ch) => out.push(ch),
                                None => return self.err(format!("bad escape \\u{{{hex}}}")),
                            }
                        }
                        other => out.push(other),
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn unit(&mut self) -> Result<Unit> {
        let name = self.word();
        let unit = match name.as_str() {
            "lower" => Unit::Lower,
            "upper" => Unit::Upper,
            "substr" => {
                self.expect('(')?;
                let start = self.number()?;
                self.expect(',')?;
                let end_word = self.word();
                let end = if end_word == "END" {
                    None
                } else {
                    Some(end_word.parse().or_else(|_| self.err("expected a number or END"))?)
                };
                self.expect(')')?;
                Unit::Substr { start, end }
            }
            "split" => {
                self.expect('(')?;
                self.skip_ws();
                let d = self.quoted('\'')?;
                let mut it = d.chars();
                let (Some(delimiter), None) = (it.next(), it.next()) else {
                    return self.err("split delimiter must be one character");
                };
                self.expect(',')?;
                let part = self.number()?;
                self.expect(')')?;
                Unit::Split { delimiter, part }
            }
            "literal" => {
                self.expect('(')?;
                self.skip_ws();
                let text = self.quoted('"')?;
                self.expect(')')?;
                Unit::literal(text)
            }
            "" => return self.err("expected a unit"),
            other => return self.err(format!("unknown unit {other:?}")),
        };
        Ok(unit)
    }

    fn chain(&mut self) -> Result<UnitChain> {
        let mut units = vec![self.unit()?];
        while self.eat('|') {
            units.push(self.unit()?);
        }
        UnitChain::new(units)
    }

    fn transformation(&mut self) -> Result<Transformation> {
        let mut chains = vec![self.chain()?];
        while self.eat('+') {
            chains.push(self.chain()?);
        }
        self.skip_ws();
        if self.peek().is_some() {
            return self.err("trailing input");
        }
        Transformation::new(chains)
    }
}

impl FromStr for Transformation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Parser::new(s).transformation()
    }
}

impl FromStr for UnitChain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser::new(s);
        let c = p.chain()?;
        p.skip_ws();
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        Ok(c)
    }
}
