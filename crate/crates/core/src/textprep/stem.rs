//! Snowball English ("Porter2") stemmer.
//!
//! Follows the current Snowball `english.sbl` rules, including the
//! `past`/`univers`-style R1 prefixes and the step 1b special stems
//! (`proceed`, `inning`, `dying`, ...). Input is expected to be lowercase.

const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u', 'y'];

fn is_vowel(c: char) -> bool {
    VOWELS.contains(&c)
}

/// Vowels plus `w`, `x` and the marked consonant `Y`.
fn is_vowel_wxy(c: char) -> bool {
    is_vowel(c) || matches!(c, 'w' | 'x' | 'Y')
}

fn is_valid_li(c: char) -> bool {
    matches!(c, 'c' | 'd' | 'e' | 'g' | 'h' | 'k' | 'm' | 'n' | 'r' | 't')
}

const R1_PREFIXES: &[&str] = &[
    "arsen", "commun", "emerg", "gener", "inter", "later", "organ", "past", "univers",
];

fn exception(word: &str) -> Option<&'static str> {
    Some(match word {
        "skis" => "ski",
        "skies" => "sky",
        "idly" => "idl",
        "gently" => "gentl",
        "ugly" => "ugli",
        "early" => "earli",
        "only" => "onli",
        "singly" => "singl",
        "andes" => "andes",
        "atlas" => "atlas",
        "bias" => "bias",
        "cosmos" => "cosmos",
        "howe" => "howe",
        "news" => "news",
        "sky" => "sky",
        _ => return None,
    })
}

enum Step2 {
    To(&'static str),
    OgAfterL,
    DeleteLi,
}

const STEP2: &[(&str, Step2)] = &[
    ("ization", Step2::To("ize")),
    ("ational", Step2::To("ate")),
    ("fulness", Step2::To("ful")),
    ("ousness", Step2::To("ous")),
    ("iveness", Step2::To("ive")),
    ("tional", Step2::To("tion")),
    ("biliti", Step2::To("ble")),
    ("lessli", Step2::To("less")),
    ("entli", Step2::To("ent")),
    ("ation", Step2::To("ate")),
    ("alism", Step2::To("al")),
    ("aliti", Step2::To("al")),
    ("ousli", Step2::To("ous")),
    ("iviti", Step2::To("ive")),
    ("fulli", Step2::To("ful")),
    ("ogist", Step2::To("og")),
    ("enci", Step2::To("ence")),
    ("anci", Step2::To("ance")),
    ("abli", Step2::To("able")),
    ("izer", Step2::To("ize")),
    ("ator", Step2::To("ate")),
    ("alli", Step2::To("al")),
    ("bli", Step2::To("ble")),
    ("ogi", Step2::OgAfterL),
    ("li", Step2::DeleteLi),
];

enum Step3 {
    To(&'static str),
    Delete,
    DeleteInR2,
}

const STEP3: &[(&str, Step3)] = &[
    ("ational", Step3::To("ate")),
    ("tional", Step3::To("tion")),
    ("alize", Step3::To("al")),
    ("icate", Step3::To("ic")),
    ("iciti", Step3::To("ic")),
    ("ative", Step3::DeleteInR2),
    ("ical", Step3::To("ic")),
    ("ness", Step3::Delete),
    ("ful", Step3::Delete),
];

// Longest first; `ion` additionally needs a preceding `s` or `t`.
const STEP4: &[&str] = &[
    "ement", "ance", "ence", "able", "ible", "ment", "ant", "ate", "ism", "ion", "iti", "ive",
    "ize", "ous", "ent", "al", "er", "ic",
];

struct Word {
    chars: Vec<char>,
    p1: usize,
    p2: usize,
}

impl Word {
    fn len(&self) -> usize {
        self.chars.len()
    }

    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        n <= self.len() && self.chars[self.len() - n..].iter().copied().eq(suffix.chars())
    }

    /// Longest entry of `table` that is a suffix of the word.
    fn longest_suffix<'t, T>(&self, table: &'t [(&'static str, T)]) -> Option<(usize, &'t T)> {
        table
            .iter()
            .filter(|(s, _)| self.ends_with(s))
            .max_by_key(|(s, _)| s.len())
            .map(|(s, action)| (self.len() - s.chars().count(), action))
    }

    fn replace_from(&mut self, start: usize, with: &str) {
        self.chars.truncate(start);
        self.chars.extend(with.chars());
    }

    fn has_vowel_before(&self, end: usize) -> bool {
        self.chars[..end].iter().any(|&c| is_vowel(c))
    }

    /// Whether the word up to `end` ends in a short syllable.
    fn short_syllable_at(&self, end: usize) -> bool {
        let c = &self.chars;
        if end >= 3 && !is_vowel_wxy(c[end - 1]) && is_vowel(c[end - 2]) && !is_vowel(c[end - 3])
        {
            return true;
        }
        if end == 2 && !is_vowel(c[1]) && is_vowel(c[0]) {
            return true;
        }
        end >= 4 && c[end - 4..end].iter().copied().eq("past".chars())
    }
}

fn gopast_vowel(chars: &[char], from: usize) -> Option<usize> {
    (from..chars.len()).find(|&i| is_vowel(chars[i])).map(|i| i + 1)
}

fn gopast_consonant(chars: &[char], from: usize) -> Option<usize> {
    (from..chars.len()).find(|&i| !is_vowel(chars[i])).map(|i| i + 1)
}

/// Stems one lowercase word.
pub fn stem(word: &str) -> String {
    if let Some(fixed) = exception(word) {
        return fixed.to_string();
    }
    let mut chars: Vec<char> = word.chars().collect();
    if chars.len() < 3 {
        return word.to_string();
    }

    let y_found = prelude(&mut chars);
    let (p1, p2) = mark_regions(&chars);
    let mut w = Word { chars, p1, p2 };

    step_1a(&mut w);
    step_1b(&mut w);
    step_1c(&mut w);
    step_2(&mut w);
    step_3(&mut w);
    step_4(&mut w);
    step_5(&mut w);

    if y_found {
        for c in w.chars.iter_mut() {
            if *c == 'Y' {
                *c = 'y';
            }
        }
    }
    w.chars.into_iter().collect()
}

fn prelude(chars: &mut Vec<char>) -> bool {
    if chars.first() == Some(&'\'') {
        chars.remove(0);
    }
    let mut found = false;
    if chars.first() == Some(&'y') {
        chars[0] = 'Y';
        found = true;
    }
    for i in 0..chars.len().saturating_sub(1) {
        if is_vowel(chars[i]) && chars[i + 1] == 'y' {
            chars[i + 1] = 'Y';
            found = true;
        }
    }
    found
}

fn mark_regions(chars: &[char]) -> (usize, usize) {
    let len = chars.len();
    let prefix = R1_PREFIXES
        .iter()
        .filter(|p| p.len() <= len && chars[..p.len()].iter().copied().eq(p.chars()))
        .map(|p| p.len())
        .max();
    let p1 = match prefix {
        Some(n) => n,
        None => match gopast_vowel(chars, 0).and_then(|i| gopast_consonant(chars, i)) {
            Some(i) => i,
            None => return (len, len),
        },
    };
    let p2 = gopast_vowel(chars, p1)
        .and_then(|i| gopast_consonant(chars, i))
        .unwrap_or(len);
    (p1, p2)
}

fn step_1a(w: &mut Word) {
    for suffix in ["'s'", "'s", "'"] {
        if w.ends_with(suffix) {
            let n = w.len() - suffix.len();
            w.chars.truncate(n);
            break;
        }
    }

    let len = w.len();
    if w.ends_with("sses") {
        w.replace_from(len - 2, "");
    } else if w.ends_with("ied") || w.ends_with("ies") {
        let replacement = if len > 4 { "i" } else { "ie" };
        w.replace_from(len - 3, replacement);
    } else if w.ends_with("ss") || w.ends_with("us") {
    } else if w.ends_with("s") {
        // A vowel must occur before the letter immediately preceding the `s`.
        if len >= 3 && w.has_vowel_before(len - 2) {
            w.chars.pop();
        }
    }
}

fn step_1b(w: &mut Word) {
    enum Kind {
        Eed,
        Ed,
        Ing,
    }
    const SUFFIXES: &[(&str, Kind)] = &[
        ("eedly", Kind::Eed),
        ("ingly", Kind::Ed),
        ("edly", Kind::Ed),
        ("eed", Kind::Eed),
        ("ing", Kind::Ing),
        ("ed", Kind::Ed),
    ];
    let Some((start, kind)) = w.longest_suffix(SUFFIXES) else {
        return;
    };

    match kind {
        Kind::Eed => {
            if start >= w.p1 {
                let stem: String = w.chars[..start].iter().collect();
                if !matches!(stem.as_str(), "proc" | "exc" | "succ") {
                    w.replace_from(start, "ee");
                }
            }
            return;
        }
        Kind::Ing => {
            let stem = &w.chars[..start];
            let special = ["even", "cann", "earr", "herr", "inn", "out"]
                .into_iter()
                .find(|s| stem.ends_with(&s.chars().collect::<Vec<_>>()));
            if let Some(s) = special {
                if s.len() == start {
                    return;
                }
            } else if stem.last() == Some(&'y') && start == 2 && !is_vowel(stem[0]) {
                // dying -> die, lying -> lie
                w.replace_from(start - 1, "ie");
                return;
            }
        }
        Kind::Ed => {}
    }

    if !w.has_vowel_before(start) {
        return;
    }
    w.chars.truncate(start);

    const DOUBLES: &[&str] = &["bb", "dd", "ff", "gg", "mm", "nn", "pp", "rr", "tt"];
    if w.ends_with("at") || w.ends_with("bl") || w.ends_with("iz") {
        w.chars.push('e');
    } else if DOUBLES.iter().any(|d| w.ends_with(d)) {
        if !(w.len() == 3 && matches!(w.chars[0], 'a' | 'e' | 'o')) {
            w.chars.pop();
        }
    } else if w.len() == w.p1 && w.short_syllable_at(w.len()) {
        w.chars.push('e');
    }
}

fn step_1c(w: &mut Word) {
    let len = w.len();
    if len >= 3 && matches!(w.chars[len - 1], 'y' | 'Y') && !is_vowel(w.chars[len - 2]) {
        w.chars[len - 1] = 'i';
    }
}

fn step_2(w: &mut Word) {
    let Some((start, action)) = w.longest_suffix(STEP2) else {
        return;
    };
    if start < w.p1 {
        return;
    }
    match action {
        Step2::To(s) => w.replace_from(start, s),
        Step2::OgAfterL => {
            if start >= 1 && w.chars[start - 1] == 'l' {
                w.replace_from(start, "og");
            }
        }
        Step2::DeleteLi => {
            if start >= 1 && is_valid_li(w.chars[start - 1]) {
                w.chars.truncate(start);
            }
        }
    }
}

fn step_3(w: &mut Word) {
    let Some((start, action)) = w.longest_suffix(STEP3) else {
        return;
    };
    if start < w.p1 {
        return;
    }
    match action {
        Step3::To(s) => w.replace_from(start, s),
        Step3::Delete => w.chars.truncate(start),
        Step3::DeleteInR2 => {
            if start >= w.p2 {
                w.chars.truncate(start);
            }
        }
    }
}

fn step_4(w: &mut Word) {
    let Some(suffix) = STEP4.iter().find(|s| w.ends_with(s)) else {
        return;
    };
    let start = w.len() - suffix.len();
    if start < w.p2 {
        return;
    }
    if *suffix == "ion" && !(start >= 1 && matches!(w.chars[start - 1], 's' | 't')) {
        return;
    }
    w.chars.truncate(start);
}

fn step_5(w: &mut Word) {
    let len = w.len();
    if w.ends_with("e") {
        let start = len - 1;
        if start >= w.p2 || (start >= w.p1 && !w.short_syllable_at(start)) {
            w.chars.truncate(start);
        }
    } else if w.ends_with("l") {
        let start = len - 1;
        if start >= w.p2 && start >= 1 && w.chars[start - 1] == 'l' {
            w.chars.truncate(start);
        }
    }
}
