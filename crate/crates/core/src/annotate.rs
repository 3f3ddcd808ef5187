//! Linguistic annotation behind a swappable backend contract.
//!
//! [`Annotator`] turns a sentence into an [`Annotation`] carrying POS tags,
//! lemmas, entity spans and the clause's main verb group. The shipped
//! backend, [`LexiconAnnotator`], is a deterministic dictionary tagger: a
//! built-in English lexicon of function words, auxiliaries, common verb
//! inflections and a small gazetteer, optionally overlaid with a JSON
//! dictionary of `token -> {pos, lemma, entity}` entries.

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{fold, is_blank, is_punctuation, normalize, tokenize};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotateError {
    #[error("cannot annotate an empty sentence")]
    EmptyInput,
    #[error("annotation unavailable: {0}")]
    Unavailable(String),
}

/// Penn-style part-of-speech tags.
#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pos {
    DT,
    NN,
    NNS,
    NNP,
    NNPS,
    PRP,
    #[serde(rename = "PRP$")]
    PRPS,
    JJ,
    RB,
    IN,
    TO,
    CC,
    CD,
    MD,
    VB,
    VBD,
    VBG,
    VBN,
    VBP,
    VBZ,
    WDT,
    WP,
    WRB,
    EX,
    PUNCT,
    X,
}

impl Pos {
    pub fn is_verb(self) -> bool {
        matches!(self, Pos::VB | Pos::VBD | Pos::VBG | Pos::VBN | Pos::VBP | Pos::VBZ)
    }

    /// Verbs and modals.
    pub fn is_verbal(self) -> bool {
        self.is_verb() || self == Pos::MD
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Pos::VBD | Pos::VBP | Pos::VBZ | Pos::MD)
    }

    pub fn is_noun(self) -> bool {
        matches!(self, Pos::NN | Pos::NNS | Pos::NNP | Pos::NNPS)
    }

    pub fn is_proper(self) -> bool {
        matches!(self, Pos::NNP | Pos::NNPS)
    }

    fn licenses_noun(self) -> bool {
        matches!(self, Pos::DT | Pos::CD | Pos::JJ | Pos::PRPS | Pos::IN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    Person,
    Location,
    DateTime,
    Quantity,
    Organization,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub entity: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub tokens: Vec<String>,
    pub pos_tags: Vec<Pos>,
    pub entity_spans: Vec<EntitySpan>,
    pub lemmas: Vec<String>,
    pub main_verb_index: Option<usize>,
    pub auxiliary_indices: Vec<usize>,
}

const AUX_LEMMAS: &[&str] = &["be", "have", "do"];

impl Annotation {
    /// Builds an annotation from per-token tags and locates the main verb
    /// group.
    pub fn new(
        tokens: Vec<String>,
        pos_tags: Vec<Pos>,
        lemmas: Vec<String>,
        entity_spans: Vec<EntitySpan>,
    ) -> Self {
        let mut a = Self {
            tokens,
            pos_tags,
            entity_spans,
            lemmas,
            main_verb_index: None,
            auxiliary_indices: Vec::new(),
        };
        a.locate_verbs();
        a
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.tokens.len();
        if self.pos_tags.len() != n || self.lemmas.len() != n {
            return Err("tag and lemma vectors must match the token count".into());
        }
        let mut spans = self.entity_spans.clone();
        spans.sort_by_key(|s| s.start);
        for s in &spans {
            if s.start >= s.end || s.end > n {
                return Err(format!("entity span {}..{} out of bounds", s.start, s.end));
            }
        }
        if spans.windows(2).any(|w| w[0].end > w[1].start) {
            return Err("entity spans overlap".into());
        }
        Ok(())
    }

    pub fn entity_at(&self, index: usize) -> Option<EntityType> {
        self.entity_spans
            .iter()
            .find(|s| s.start <= index && index < s.end)
            .map(|s| s.entity)
    }

    /// Restriction to `range`, with spans clipped and the verb group
    /// re-located inside the slice.
    pub fn slice(&self, range: Range<usize>) -> Annotation {
        let spans = self
            .entity_spans
            .iter()
            .filter_map(|s| {
                let start = s.start.max(range.start);
                let end = s.end.min(range.end);
                (start < end).then(|| EntitySpan {
                    start: start - range.start,
                    end: end - range.start,
                    entity: s.entity,
                })
            })
            .collect();
        Annotation::new(
            self.tokens[range.clone()].to_vec(),
            self.pos_tags[range.clone()].to_vec(),
            self.lemmas[range].to_vec(),
            spans,
        )
    }

    fn is_aux_lemma(&self, i: usize) -> bool {
        self.pos_tags[i] == Pos::MD || AUX_LEMMAS.contains(&self.lemmas[i].as_str())
    }

    /// Verb groups: an optional chain of auxiliaries followed by one verb,
    /// with adverbs allowed in between.
    fn verb_groups(&self) -> Vec<Vec<usize>> {
        let n = self.tokens.len();
        let mut groups = Vec::new();
        let mut i = 0;
        while i < n {
            if !self.pos_tags[i].is_verbal() {
                i += 1;
                continue;
            }
            let mut group = vec![i];
            let mut j = i + 1;
            while j < n {
                let chains = self.is_aux_lemma(group[group.len() - 1]);
                if self.pos_tags[j].is_verbal() && chains {
                    group.push(j);
                    j += 1;
                } else if self.pos_tags[j] == Pos::RB && chains {
                    let next = (j..n).find(|&k| self.pos_tags[k] != Pos::RB);
                    match next {
                        Some(k) if self.pos_tags[k].is_verbal() => j = k,
                        _ => break,
                    }
                } else {
                    break;
                }
            }
            groups.push(group);
            i = j;
        }
        groups
    }

    /// Picks the main clause's verb group: the first group headed by a
    /// finite verb that is not inside a relative clause, not an infinitive,
    /// and not a reduced relative (a lone past form followed by a
    /// preposition while a later finite group exists).
    fn locate_verbs(&mut self) {
        self.main_verb_index = None;
        self.auxiliary_indices.clear();
        let groups = self.verb_groups();
        let eligible: Vec<bool> = groups
            .iter()
            .map(|g| {
                let head = g[0];
                self.pos_tags[head].is_finite() && (head == 0 || self.pos_tags[head - 1] != Pos::TO)
            })
            .collect();
        let mut in_relative = false;
        let mut cursor = 0;
        let mut chosen = None;
        for (gi, group) in groups.iter().enumerate() {
            let head = group[0];
            if (cursor..head)
                .any(|k| k > 0 && matches!(self.pos_tags[k], Pos::WDT | Pos::WP))
            {
                in_relative = true;
            }
            cursor = group[group.len() - 1] + 1;
            if !eligible[gi] {
                continue;
            }
            if in_relative {
                in_relative = false;
                continue;
            }
            let lone_past = group.len() == 1
                && matches!(self.pos_tags[head], Pos::VBD | Pos::VBN)
                && !self.is_aux_lemma(head)
                && self.pos_tags.get(head + 1).is_some_and(|p| matches!(p, Pos::IN | Pos::TO));
            if lone_past && eligible[gi + 1..].iter().any(|&e| e) {
                continue;
            }
            chosen = Some(group.clone());
            break;
        }
        let Some(group) = chosen else { return };
        let last = group[group.len() - 1];
        self.main_verb_index = Some(last);
        if group.len() == 1 {
            if self.lemmas[last] == "be" || self.pos_tags[last] == Pos::MD {
                self.auxiliary_indices.push(last);
            }
        } else {
            self.auxiliary_indices = group[..group.len() - 1]
                .iter()
                .copied()
                .filter(|&i| self.is_aux_lemma(i))
                .collect();
        }
    }
}

/// Backend contract: annotate one sentence. Implementations must be callable
/// from several threads at once.
pub trait Annotator: Send + Sync {
    fn annotate(&self, sentence: &str) -> Result<Annotation, AnnotateError>;
}

/// One dictionary entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexEntry {
    pub pos: Pos,
    pub lemma: String,
    #[serde(default)]
    pub entity: Option<EntityType>,
}

impl LexEntry {
    fn new(pos: Pos, lemma: &str) -> Self {
        Self {
            pos,
            lemma: lemma.to_string(),
            entity: None,
        }
    }

    fn entity(lemma: &str, entity: EntityType) -> Self {
        Self {
            pos: Pos::NNP,
            lemma: lemma.to_string(),
            entity: Some(entity),
        }
    }
}

/// Dictionary-driven tagger. Unknown words fall back to shape rules:
/// numbers become quantities (four-digit years become dates), words with
/// adjective suffixes become JJ, `-ly` words RB, capitalized words inside a
/// sentence NNP, and everything else a noun.
#[derive(Debug, Clone, Default)]
pub struct LexiconAnnotator {
    entries: HashMap<String, LexEntry>,
}

impl LexiconAnnotator {
    /// Empty dictionary; every word goes through the fallback rules.
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-in English lexicon.
    pub fn english() -> Self {
        let mut lex = Self::default();
        lex.load_builtin();
        lex
    }

    pub fn insert(&mut self, token: &str, entry: LexEntry) {
        self.entries.insert(fold(token), entry);
    }

    /// Adds entries without replacing existing ones.
    fn add(&mut self, token: &str, entry: LexEntry) {
        self.entries.entry(fold(token)).or_insert(entry);
    }

    pub fn lookup(&self, token: &str) -> Option<&LexEntry> {
        self.entries.get(&fold(token))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Overlays entries from a JSON object of `token -> {pos, lemma, entity}`;
    /// overlay entries replace built-in ones.
    pub fn extend_from_json(&mut self, json: &str) -> Result<(), serde_json::Error> {
        let map: HashMap<String, LexEntry> = serde_json::from_str(json)?;
        for (token, entry) in map {
            self.insert(&token, entry);
        }
        Ok(())
    }

    pub fn extend_from_file(&mut self, path: &Path) -> Result<(), AnnotateError> {
        let json = fs::read_to_string(path)
            .map_err(|e| AnnotateError::Unavailable(format!("{}: {e}", path.display())))?;
        self.extend_from_json(&json)
            .map_err(|e| AnnotateError::Unavailable(format!("{}: {e}", path.display())))
    }

    fn fallback(&self, token: &str, index: usize) -> LexEntry {
        let folded = fold(token);
        let digits = token.chars().filter(char::is_ascii_digit).count();
        if digits > 0 && token.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.') {
            let entity = match token.parse::<u32>() {
                Ok(year) if token.len() == 4 && (1000..=2100).contains(&year) => EntityType::DateTime,
                _ => EntityType::Quantity,
            };
            return LexEntry {
                pos: Pos::CD,
                lemma: folded,
                entity: Some(entity),
            };
        }
        if is_punctuation(token) || is_blank(token) {
            return LexEntry::new(Pos::PUNCT, token);
        }
        const ADJ_SUFFIXES: &[&str] = &[
            "ous", "ful", "ive", "able", "ible", "al", "ic", "less", "-like", "ish",
        ];
        if folded.len() > 4 && folded.ends_with("ly") {
            return LexEntry::new(Pos::RB, &folded);
        }
        if ADJ_SUFFIXES.iter().any(|s| folded.len() > s.len() + 2 && folded.ends_with(s)) {
            return LexEntry::new(Pos::JJ, &folded);
        }
        if index > 0 && token.chars().next().is_some_and(char::is_uppercase) {
            return LexEntry::new(Pos::NNP, token);
        }
        let plural = folded.len() > 3
            && folded.ends_with('s')
            && !["ss", "us", "is"].iter().any(|s| folded.ends_with(s));
        if plural {
            LexEntry::new(Pos::NNS, &folded)
        } else {
            LexEntry::new(Pos::NN, &folded)
        }
    }

    fn load_builtin(&mut self) {
        for (forms, pos) in CLOSED_CLASS {
            for w in forms.split_whitespace() {
                self.add(w, LexEntry::new(*pos, w));
            }
        }
        for n in NUMBER_WORDS.split_whitespace() {
            self.add(
                n,
                LexEntry {
                    pos: Pos::CD,
                    lemma: n.to_string(),
                    entity: Some(EntityType::Quantity),
                },
            );
        }
        for (form, pos) in BE_FORMS {
            self.add(form, LexEntry::new(*pos, "be"));
        }
        for line in IRREGULAR_VERBS {
            let f: Vec<&str> = line.split_whitespace().collect();
            self.add_verb(f[0], f[1], f[2], f[3], f[4]);
        }
        self.add("born", LexEntry::new(Pos::VBN, "bear"));
        for line in REGULAR_VERBS.split_whitespace() {
            let (lemma, stem) = match line.split_once(':') {
                Some((l, s)) => (l, s),
                None => (line, line),
            };
            let third = third_person(lemma);
            let past = past_form(lemma, stem);
            let ing = ing_form(lemma, stem);
            self.add_verb(lemma, &third, &past, &past, &ing);
        }
        for (names, entity) in GAZETTEER {
            for name in names.split_whitespace() {
                self.add(name, LexEntry::entity(name, *entity));
            }
        }
        for month in MONTHS.split_whitespace() {
            self.add(month, LexEntry::entity(month, EntityType::DateTime));
        }
    }

    fn add_verb(&mut self, lemma: &str, third: &str, past: &str, participle: &str, ing: &str) {
        self.add(lemma, LexEntry::new(Pos::VBP, lemma));
        self.add(third, LexEntry::new(Pos::VBZ, lemma));
        self.add(past, LexEntry::new(Pos::VBD, lemma));
        self.add(participle, LexEntry::new(Pos::VBN, lemma));
        self.add(ing, LexEntry::new(Pos::VBG, lemma));
    }

    fn tag(&self, tokens: &[String]) -> Vec<LexEntry> {
        let mut entries: Vec<LexEntry> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| self.lookup(t).cloned().unwrap_or_else(|| self.fallback(t, i)))
            .collect();
        // A non-auxiliary verb form right after a determiner, numeral,
        // adjective, possessive or preposition is a noun ("the two forms",
        // "by plants").
        for i in 1..entries.len() {
            let e = &entries[i];
            if e.pos.is_verb()
                && !matches!(e.pos, Pos::VBN | Pos::VBG)
                && !AUX_LEMMAS.contains(&e.lemma.as_str())
                && entries[i - 1].pos.licenses_noun()
            {
                let folded = fold(&tokens[i]);
                let pos = if e.pos == Pos::VBZ { Pos::NNS } else { Pos::NN };
                entries[i] = LexEntry::new(pos, &folded);
            }
        }
        // Past forms after be/have are participles ("was invented").
        for i in 1..entries.len() {
            if entries[i].pos != Pos::VBD {
                continue;
            }
            let prev = (0..i).rev().find(|&k| entries[k].pos != Pos::RB);
            if prev.is_some_and(|k| {
                entries[k].pos.is_verb() && matches!(entries[k].lemma.as_str(), "be" | "have")
            }) {
                entries[i].pos = Pos::VBN;
            }
        }
        entries
    }
}

impl Annotator for LexiconAnnotator {
    fn annotate(&self, sentence: &str) -> Result<Annotation, AnnotateError> {
        let tokens = tokenize(&normalize(sentence));
        if tokens.is_empty() {
            return Err(AnnotateError::EmptyInput);
        }
        let entries = self.tag(&tokens);
        let mut spans: Vec<EntitySpan> = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            let Some(entity) = e.entity else { continue };
            match spans.last_mut() {
                Some(last) if last.end == i && last.entity == entity => last.end = i + 1,
                _ => spans.push(EntitySpan {
                    start: i,
                    end: i + 1,
                    entity,
                }),
            }
        }
        let (pos_tags, lemmas) = entries.into_iter().map(|e| (e.pos, e.lemma)).unzip();
        Ok(Annotation::new(tokens, pos_tags, lemmas, spans))
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn ends_consonant_y(w: &str) -> bool {
    let mut rev = w.chars().rev();
    rev.next() == Some('y') && rev.next().is_some_and(|c| !is_vowel(c))
}

fn third_person(lemma: &str) -> String {
    if ends_consonant_y(lemma) {
        format!("{}ies", &lemma[..lemma.len() - 1])
    } else if ["s", "sh", "ch", "x", "z", "o"].iter().any(|s| lemma.ends_with(s)) {
        format!("{lemma}es")
    } else {
        format!("{lemma}s")
    }
}

/// `stem` differs from the lemma only for verbs that double their final
/// consonant (`stop:stopp`).
fn past_form(lemma: &str, stem: &str) -> String {
    if ends_consonant_y(lemma) {
        format!("{}ied", &lemma[..lemma.len() - 1])
    } else if lemma.ends_with('e') {
        format!("{lemma}d")
    } else {
        format!("{stem}ed")
    }
}

fn ing_form(lemma: &str, stem: &str) -> String {
    if let Some(base) = lemma.strip_suffix("ie") {
        format!("{base}ying")
    } else if lemma.ends_with('e') && !lemma.ends_with("ee") {
        format!("{}ing", &lemma[..lemma.len() - 1])
    } else {
        format!("{stem}ing")
    }
}

const CLOSED_CLASS: &[(&str, Pos)] = &[
    ("the a an this these those every each some any no another both either neither all", Pos::DT),
    ("my your his her its our their", Pos::PRPS),
    ("i you he she it we they me him us them", Pos::PRP),
    ("of in on at by for with from into onto about over under between through during \
      against among across along around before after above below near without within \
      than because since like per via upon towards toward behind beside inside outside",
      Pos::IN),
    ("to", Pos::TO),
    ("and or but nor", Pos::CC),
    ("can could will would shall should may might must", Pos::MD),
    ("not also always often usually generally mainly mostly very too only just never \
      sometimes quickly slowly rapidly easily commonly naturally",
      Pos::RB),
    ("that which", Pos::WDT),
    ("who whom", Pos::WP),
    ("what", Pos::WP),
    ("where when why how", Pos::WRB),
    ("there", Pos::EX),
    ("many much more most few several other same different important main major \
      large small big high low long short new old green red blue white black hot cold \
      warm simple complex common natural human solid liquid",
      Pos::JJ),
];

const BE_FORMS: &[(&str, Pos)] = &[
    ("be", Pos::VB),
    ("am", Pos::VBP),
    ("is", Pos::VBZ),
    ("are", Pos::VBP),
    ("was", Pos::VBD),
    ("were", Pos::VBD),
    ("been", Pos::VBN),
    ("being", Pos::VBG),
];

/// lemma, third person, past, participle, gerund
const IRREGULAR_VERBS: &[&str] = &[
    "have has had had having",
    "do does did done doing",
    "give gives gave given giving",
    "take takes took taken taking",
    "make makes made made making",
    "find finds found found finding",
    "write writes wrote written writing",
    "grow grows grew grown growing",
    "know knows knew known knowing",
    "eat eats ate eaten eating",
    "feed feeds fed fed feeding",
    "become becomes became become becoming",
    "break breaks broke broken breaking",
    "freeze freezes froze frozen freezing",
    "get gets got got getting",
    "lose loses lost lost losing",
    "build builds built built building",
    "lead leads led led leading",
    "keep keeps kept kept keeping",
    "hold holds held held holding",
    "begin begins began begun beginning",
    "bring brings brought brought bringing",
    "think thinks thought thought thinking",
    "teach teaches taught taught teaching",
    "see sees saw seen seeing",
    "go goes went gone going",
    "come comes came come coming",
    "run runs ran run running",
    "fly flies flew flown flying",
    "draw draws drew drawn drawing",
    "choose chooses chose chosen choosing",
    "speak speaks spoke spoken speaking",
    "rise rises rose risen rising",
    "fall falls fell fallen falling",
    "sink sinks sank sunk sinking",
    "say says said said saying",
    "tell tells told told telling",
    "sell sells sold sold selling",
    "send sends sent sent sending",
    "spend spends spent spent spending",
    "stand stands stood stood standing",
    "understand understands understood understood understanding",
    "mean means meant meant meaning",
    "bear bears bore borne bearing",
    "wear wears wore worn wearing",
    "throw throws threw thrown throwing",
    "blow blows blew blown blowing",
    "drink drinks drank drunk drinking",
    "swim swims swam swum swimming",
    "sing sings sang sung singing",
    "shake shakes shook shaken shaking",
    "bite bites bit bitten biting",
    "hide hides hid hidden hiding",
    "win wins won won winning",
    "dig digs dug dug digging",
    "strike strikes struck struck striking",
    "pay pays paid paid paying",
    "seek seeks sought sought seeking",
    "catch catches caught caught catching",
    "fight fights fought fought fighting",
    "feel feels felt felt feeling",
    "sleep sleeps slept slept sleeping",
    "split splits split split splitting",
    "spread spreads spread spread spreading",
    "put puts put put putting",
    "cut cuts cut cut cutting",
    "set sets set set setting",
    "shine shines shone shone shining",
    "lay lays laid laid laying",
];

/// Regular verbs; `lemma:stem` marks final-consonant doubling.
const REGULAR_VERBS: &str = "
    produce cause call form contain include use absorb release convert transport
    carry help reduce increase decrease prevent protect discover invent compose
    paint name measure store digest choke live breathe change move show cover
    consist depend require need obtain melt boil evaporate condense dissolve
    conduct reflect refract travel rotate revolve orbit emit attract repel support
    regulate secrete pump filter excrete flow separate mix heat cool burn
    react combine divide multiply add subtract represent describe explain define
    study observe learn provide allow create destroy kill infect
    invade enter exit pass join connect surround protect develop appear look seem
    remain turn return receive collect gather supply deliver lift push pull press
    suggest propose state predict prove test classify identify determine cure treat
    affect damage pollute clean purify fertilize pollinate germinate photosynthesize
    respire transpire circulate transmit detect sense hear smell taste touch
    generate power drive shape fill empty open close
    harvest irrigate cultivate migrate hibernate adapt survive die exist
    happen work act play start end finish complete rule govern establish
    explore settle unite elect vote stop:stopp plan:plann drop:dropp
    occur:occurr refer:referr permit:permitt admit:admitt control:controll
";

const GAZETTEER: &[(&str, EntityType)] = &[
    (
        "newton einstein curie marie darwin mendel dalton proust gandhi nehru galileo \
         faraday edison bohr rutherford mendeleev lavoisier pasteur fleming jenner hooke \
         kepler copernicus tagore shakespeare archimedes pythagoras aristotle raman \
         aryabhata ambedkar ashoka akbar babur \
         thomson chadwick boyle charles avogadro dmitri isaac albert alexander graham bell",
        EntityType::Person,
    ),
    (
        "india delhi paris france africa asia europe america china japan egypt nile \
         ganga ganges himalayas sahara mumbai london rajasthan kerala kolkata chennai \
         england germany russia australia canada brazil antarctica arctic pacific \
         atlantic everest amazon bengal gujarat punjab bihar assam",
        EntityType::Location,
    ),
    ("isro nasa unesco unicef drdo", EntityType::Organization),
];

const NUMBER_WORDS: &str = "one two three four five six seven eight nine ten eleven twelve \
                            twenty hundred thousand million";

const MONTHS: &str = "january february march april may june july august september \
                      october november december monday tuesday wednesday thursday friday \
                      saturday sunday";
