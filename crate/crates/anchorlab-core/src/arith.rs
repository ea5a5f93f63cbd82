//! Exact multi-base addition benchmarks.
//!
//! Answers come from schoolbook digit arithmetic in the task base — never
//! from converting through machine integers — so tests can check the digit
//! algorithm against an independent decimal round-trip oracle. Bundles are
//! synthesized deterministically from `(base, seed)` with fixed split sizes,
//! and [`grade`] scores free-text responses by their final numeral.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::util::mix_seed;

/// Smallest base with digit arithmetic support.
pub const MIN_BASE: u32 = 2;
/// Largest base; digits run `0-9` then `a-z`.
pub const MAX_BASE: u32 = 36;
/// Smallest base with enough two-digit pairs for disjoint bundle splits.
pub const MIN_BUNDLE_BASE: u32 = 7;

/// Fixed split sizes of every synthesized bundle.
pub const TRAIN_2D_SIZE: usize = 1000;
/// Held-out two-digit item count.
pub const ID_2D_SIZE: usize = 250;
/// Scope-OOD item count per digit length (three- and four-digit).
pub const OOD_PER_LENGTH: usize = 250;

/// Errors from numeral handling and bundle synthesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArithError {
    /// Base outside the supported range for the requested operation.
    UnsupportedBase {
        /// The offending base.
        base: u32,
        /// Smallest base the operation accepts.
        min: u32,
    },
    /// A numeral string failed to parse in the given base.
    InvalidNumeral {
        /// The offending text.
        text: String,
        /// The base it was parsed under.
        base: u32,
    },
    /// The parsed value exceeds the supported integer range.
    Overflow,
}

impl core::fmt::Display for ArithError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ArithError::UnsupportedBase { base, min } => {
                write!(f, "base {base} unsupported (need {min}..={MAX_BASE})")
            }
            ArithError::InvalidNumeral { text, base } => {
                write!(f, "{text:?} is not a base-{base} numeral")
            }
            ArithError::Overflow => write!(f, "numeral exceeds the 64-bit value range"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ArithError {}

fn check_base(base: u32, min: u32) -> Result<(), ArithError> {
    if base < min || base > MAX_BASE {
        return Err(ArithError::UnsupportedBase { base, min });
    }
    Ok(())
}

fn digit_value(c: char, base: u32) -> Option<u32> {
    let v = match c {
        '0'..='9' => c as u32 - '0' as u32,
        'a'..='z' => c as u32 - 'a' as u32 + 10,
        'A'..='Z' => c as u32 - 'A' as u32 + 10,
        _ => return None,
    };
    (v < base).then_some(v)
}

fn digit_char(v: u32) -> char {
    debug_assert!(v < 36);
    if v < 10 {
        (b'0' + v as u8) as char
    } else {
        (b'a' + (v - 10) as u8) as char
    }
}

/// Parses an unsigned numeral in `base`; rejects empty strings and bad digits.
pub fn parse_numeral(text: &str, base: u32) -> Result<u64, ArithError> {
    check_base(base, MIN_BASE)?;
    if text.is_empty() {
        return Err(ArithError::InvalidNumeral {
            text: String::new(),
            base,
        });
    }
    let mut value: u64 = 0;
    for c in text.chars() {
        let d = digit_value(c, base).ok_or_else(|| ArithError::InvalidNumeral {
            text: String::from(text),
            base,
        })?;
        value = value
            .checked_mul(base as u64)
            .and_then(|v| v.checked_add(d as u64))
            .ok_or(ArithError::Overflow)?;
    }
    Ok(value)
}

/// Renders `value` as a canonical (lowercase, no leading zeros) numeral.
pub fn render_numeral(mut value: u64, base: u32) -> Result<String, ArithError> {
    check_base(base, MIN_BASE)?;
    if value == 0 {
        return Ok(String::from("0"));
    }
    let mut digits = Vec::new();
    while value > 0 {
        digits.push(digit_char((value % base as u64) as u32));
        value /= base as u64;
    }
    Ok(digits.into_iter().rev().collect())
}

/// Adds two base-`base` numerals with schoolbook digit arithmetic.
///
/// Works right to left with an explicit carry over digit vectors, so inputs
/// of any length are exact; the result is canonical.
pub fn base_add(base: u32, lhs: &str, rhs: &str) -> Result<String, ArithError> {
    check_base(base, MIN_BASE)?;
    let to_digits = |text: &str| -> Result<Vec<u32>, ArithError> {
        if text.is_empty() {
            return Err(ArithError::InvalidNumeral {
                text: String::new(),
                base,
            });
        }
        // Least significant digit first.
        text.chars()
            .rev()
            .map(|c| {
                digit_value(c, base).ok_or_else(|| ArithError::InvalidNumeral {
                    text: String::from(text),
                    base,
                })
            })
            .collect()
    };
    let a = to_digits(lhs)?;
    let b = to_digits(rhs)?;
    let mut out = Vec::with_capacity(a.len().max(b.len()) + 1);
    let mut carry = 0u32;
    for i in 0..a.len().max(b.len()) {
        let s = a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0) + carry;
        out.push(s % base);
        carry = s / base;
    }
    if carry > 0 {
        out.push(carry);
    }
    // Canonicalize: drop leading zeros (all-zero sums keep one digit).
    while out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    Ok(out.into_iter().rev().map(digit_char).collect())
}

/// One addition item; `answer` is the canonical base-`base` sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseProblem {
    /// Numeral base of all three fields.
    pub base: u32,
    /// Left operand numeral.
    pub lhs: String,
    /// Right operand numeral.
    pub rhs: String,
    /// Canonical sum numeral.
    pub answer: String,
}

/// Renders the prompt form `[base=B] L_B + R_B = ?`.
pub fn render_problem(p: &BaseProblem) -> String {
    format!(
        "[base={b}] {l}_{b} + {r}_{b} = ?",
        b = p.base,
        l = p.lhs,
        r = p.rhs
    )
}

/// Renders the completed exemplar form `[base=B] L_B + R_B = A_B`.
pub fn render_exemplar(p: &BaseProblem) -> String {
    format!(
        "[base={b}] {l}_{b} + {r}_{b} = {a}_{b}",
        b = p.base,
        l = p.lhs,
        r = p.rhs,
        a = p.answer
    )
}

/// Fixed-size benchmark splits for one base.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    /// Numeral base shared by every item.
    pub base: u32,
    /// Seed the bundle was synthesized from.
    pub seed: u64,
    /// 1000 two-digit training items (sampled with replacement).
    pub train_2d: Vec<BaseProblem>,
    /// 250 distinct two-digit items, pair-disjoint from `train_2d`.
    pub id_2d: Vec<BaseProblem>,
    /// 500 scope-OOD items: 250 three-digit, then 250 four-digit.
    pub scope_ood: Vec<BaseProblem>,
}

impl DatasetBundle {
    /// The three-digit half of `scope_ood`.
    pub fn ood_3d(&self) -> &[BaseProblem] {
        &self.scope_ood[..OOD_PER_LENGTH]
    }

    /// The four-digit half of `scope_ood`.
    pub fn ood_4d(&self) -> &[BaseProblem] {
        &self.scope_ood[OOD_PER_LENGTH..]
    }
}

fn problem_from_values(base: u32, lhs: u64, rhs: u64) -> Result<BaseProblem, ArithError> {
    let lhs = render_numeral(lhs, base)?;
    let rhs = render_numeral(rhs, base)?;
    let answer = base_add(base, &lhs, &rhs)?;
    Ok(BaseProblem {
        base,
        lhs,
        rhs,
        answer,
    })
}

/// Synthesizes the per-base benchmark bundle for `(base, seed)`.
///
/// Operand ranges by digit length d are `[base^(d-1), base^d - 1]`. The
/// held-out split is disjoint from training as ordered operand pairs; bases
/// below 7 lack enough two-digit pairs for that and are rejected.
pub fn synthesize_bundle(base: u32, seed: u64) -> Result<DatasetBundle, ArithError> {
    check_base(base, MIN_BUNDLE_BASE)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, base as u64]));
    let b = base as u64;
    let two = (b, b * b - 1);
    let three = (b * b, b * b * b - 1);
    let four = (b * b * b, b * b * b * b - 1);

    let mut train_2d = Vec::with_capacity(TRAIN_2D_SIZE);
    let mut train_pairs = BTreeSet::new();
    for _ in 0..TRAIN_2D_SIZE {
        let lhs = rng.gen_range(two.0..=two.1);
        let rhs = rng.gen_range(two.0..=two.1);
        train_pairs.insert((lhs, rhs));
        train_2d.push(problem_from_values(base, lhs, rhs)?);
    }

    let mut id_2d = Vec::with_capacity(ID_2D_SIZE);
    let mut held_pairs = BTreeSet::new();
    while id_2d.len() < ID_2D_SIZE {
        let lhs = rng.gen_range(two.0..=two.1);
        let rhs = rng.gen_range(two.0..=two.1);
        let pair = (lhs, rhs);
        if train_pairs.contains(&pair) || !held_pairs.insert(pair) {
            continue;
        }
        id_2d.push(problem_from_values(base, lhs, rhs)?);
    }

    let mut scope_ood = Vec::with_capacity(2 * OOD_PER_LENGTH);
    for range in [three, four] {
        for _ in 0..OOD_PER_LENGTH {
            let lhs = rng.gen_range(range.0..=range.1);
            let rhs = rng.gen_range(range.0..=range.1);
            scope_ood.push(problem_from_values(base, lhs, rhs)?);
        }
    }

    Ok(DatasetBundle {
        base,
        seed,
        train_2d,
        id_2d,
        scope_ood,
    })
}

const SUBSCRIPT_DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];

fn is_token_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || SUBSCRIPT_DIGITS.contains(&c)
}

/// Strips a base-marker suffix (`_8`, `₈`, `_10`, `₁₀`, ...) when it names `base`.
fn strip_base_marker(token: &str, base: u32) -> Option<&str> {
    // Trailing subscript digits: collect them, compare against the base.
    let subscript_start = token
        .char_indices()
        .rev()
        .take_while(|(_, c)| SUBSCRIPT_DIGITS.contains(c))
        .last()
        .map(|(i, _)| i);
    if let Some(start) = subscript_start {
        let marker: String = token[start..]
            .chars()
            .map(|c| {
                let idx = SUBSCRIPT_DIGITS.iter().position(|&s| s == c).unwrap();
                (b'0' + idx as u8) as char
            })
            .collect();
        if marker.parse::<u32>() == Ok(base) {
            return Some(&token[..start]);
        }
        return None;
    }
    if let Some(pos) = token.rfind('_') {
        if token[pos + 1..].parse::<u32>() == Ok(base) {
            return Some(&token[..pos]);
        }
        return None;
    }
    Some(token)
}

/// Scores a free-text response: its last valid base-`base` numeral must equal
/// `expected` in value.
///
/// Tokens are maximal alphanumeric/underscore/subscript runs, scanned from
/// the end; a `_B` or subscript base marker is stripped before digit
/// validation, and leading zeros are normalized away by comparing values.
/// Responses without any valid numeral score false — including decimal leaks
/// whose digits fall outside the base.
pub fn grade(response: &str, expected: &str, base: u32) -> bool {
    let Ok(expected_value) = parse_numeral(expected, base) else {
        return false;
    };
    let mut token_end = None;
    let mut chars: Vec<(usize, char)> = response.char_indices().collect();
    chars.push((response.len(), ' '));
    // Walk backwards emitting token spans.
    let mut i = chars.len();
    while i > 0 {
        i -= 1;
        let (idx, c) = chars[i];
        if is_token_char(c) {
            if token_end.is_none() {
                token_end = Some(idx + c.len_utf8());
            }
            if i > 0 {
                continue;
            }
        }
        if let Some(end) = token_end.take() {
            let start = if is_token_char(c) { idx } else { idx + c.len_utf8() };
            let token = &response[start..end];
            if let Some(numeral) = strip_base_marker(token, base) {
                if let Ok(value) = parse_numeral(numeral, base) {
                    return value == expected_value;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn base_add_matches_worked_examples() {
        assert_eq!(base_add(8, "54", "13").unwrap(), "67");
        assert_eq!(base_add(10, "99", "1").unwrap(), "100");
        assert_eq!(base_add(9, "44", "44").unwrap(), "88");
        assert_eq!(base_add(2, "1", "1").unwrap(), "10");
        assert_eq!(base_add(36, "zz", "1").unwrap(), "100");
    }

    #[test]
    fn base_add_agrees_with_decimal_oracle_for_octal() {
        // Exhaustive over all ordered 2-digit octal pairs.
        for l in 8u64..64 {
            for r in 8u64..64 {
                let lhs = render_numeral(l, 8).unwrap();
                let rhs = render_numeral(r, 8).unwrap();
                let got = base_add(8, &lhs, &rhs).unwrap();
                let expected = render_numeral(l + r, 8).unwrap();
                assert_eq!(got, expected, "{lhs} + {rhs} (base 8)");
            }
        }
    }

    #[test]
    fn base_add_handles_long_carries_and_leading_zeros() {
        assert_eq!(base_add(10, "999999", "1").unwrap(), "1000000");
        assert_eq!(base_add(10, "007", "003").unwrap(), "10");
        assert_eq!(base_add(16, "0", "0").unwrap(), "0");
        // Longer than u64 could hold in base 10: digit algorithm is unfazed.
        let big = "9".repeat(40);
        let mut expected = String::from("1");
        expected.push_str(&"0".repeat(40));
        assert_eq!(base_add(10, &big, "1").unwrap(), expected);
    }

    #[test]
    fn base_add_rejects_bad_digits_and_bases() {
        assert!(matches!(
            base_add(8, "58", "1"),
            Err(ArithError::InvalidNumeral { .. })
        ));
        assert!(matches!(
            base_add(1, "0", "0"),
            Err(ArithError::UnsupportedBase { .. })
        ));
        assert!(matches!(
            base_add(37, "z", "z"),
            Err(ArithError::UnsupportedBase { .. })
        ));
        assert!(matches!(
            base_add(8, "", "1"),
            Err(ArithError::InvalidNumeral { .. })
        ));
    }

    #[test]
    fn parse_render_round_trip_holds_across_bases() {
        for base in [2u32, 7, 8, 9, 10, 16, 36] {
            for value in (0u64..2000).chain([u64::MAX / 2, u64::MAX]) {
                let text = render_numeral(value, base).unwrap();
                assert_eq!(parse_numeral(&text, base).unwrap(), value);
            }
        }
    }

    #[test]
    fn parse_accepts_uppercase_and_rejects_junk() {
        assert_eq!(parse_numeral("FF", 16).unwrap(), 255);
        assert_eq!(parse_numeral("ff", 16).unwrap(), 255);
        assert!(parse_numeral("1 2", 10).is_err());
        assert!(parse_numeral("-4", 10).is_err());
        assert!(parse_numeral("", 10).is_err());
        assert_eq!(
            parse_numeral(&"z".repeat(20), 36),
            Err(ArithError::Overflow)
        );
    }

    #[test]
    fn prompt_and_exemplar_render_exactly() {
        let p = BaseProblem {
            base: 8,
            lhs: "54".to_string(),
            rhs: "13".to_string(),
            answer: "67".to_string(),
        };
        assert_eq!(render_problem(&p), "[base=8] 54_8 + 13_8 = ?");
        assert_eq!(render_exemplar(&p), "[base=8] 54_8 + 13_8 = 67_8");
    }

    #[test]
    fn bundles_have_exact_sizes_and_ranges() {
        let bundle = synthesize_bundle(8, 7).unwrap();
        assert_eq!(bundle.train_2d.len(), TRAIN_2D_SIZE);
        assert_eq!(bundle.id_2d.len(), ID_2D_SIZE);
        assert_eq!(bundle.scope_ood.len(), 2 * OOD_PER_LENGTH);
        for p in &bundle.train_2d {
            assert_eq!(p.lhs.len(), 2);
            assert_eq!(p.rhs.len(), 2);
        }
        for p in bundle.ood_3d() {
            assert_eq!(p.lhs.len(), 3, "{p:?}");
            assert_eq!(p.rhs.len(), 3, "{p:?}");
        }
        for p in bundle.ood_4d() {
            assert_eq!(p.lhs.len(), 4, "{p:?}");
            assert_eq!(p.rhs.len(), 4, "{p:?}");
        }
    }

    #[test]
    fn bundle_answers_survive_the_decimal_oracle() {
        for base in [7u32, 9, 10] {
            let bundle = synthesize_bundle(base, 3).unwrap();
            for p in bundle
                .train_2d
                .iter()
                .chain(&bundle.id_2d)
                .chain(&bundle.scope_ood)
            {
                let l = parse_numeral(&p.lhs, base).unwrap();
                let r = parse_numeral(&p.rhs, base).unwrap();
                assert_eq!(p.answer, render_numeral(l + r, base).unwrap());
            }
        }
    }

    #[test]
    fn bundle_splits_are_pair_disjoint_and_distinct() {
        let bundle = synthesize_bundle(9, 11).unwrap();
        let train: BTreeSet<(u64, u64)> = bundle
            .train_2d
            .iter()
            .map(|p| {
                (
                    parse_numeral(&p.lhs, 9).unwrap(),
                    parse_numeral(&p.rhs, 9).unwrap(),
                )
            })
            .collect();
        let mut held = BTreeSet::new();
        for p in &bundle.id_2d {
            let pair = (
                parse_numeral(&p.lhs, 9).unwrap(),
                parse_numeral(&p.rhs, 9).unwrap(),
            );
            assert!(!train.contains(&pair), "held-out pair leaked: {pair:?}");
            assert!(held.insert(pair), "duplicate held-out pair: {pair:?}");
        }
    }

    #[test]
    fn bundle_synthesis_is_deterministic_across_seeds() {
        for seed in 0..20u64 {
            let a = synthesize_bundle(10, seed).unwrap();
            let b = synthesize_bundle(10, seed).unwrap();
            assert_eq!(a.train_2d, b.train_2d);
            assert_eq!(a.id_2d, b.id_2d);
            assert_eq!(a.scope_ood, b.scope_ood);
        }
        let a = synthesize_bundle(10, 0).unwrap();
        let b = synthesize_bundle(10, 1).unwrap();
        assert_ne!(a.train_2d, b.train_2d, "seed must matter");
        let c = synthesize_bundle(8, 0).unwrap();
        let pairs = |bundle: &DatasetBundle| -> Vec<(String, String)> {
            bundle
                .train_2d
                .iter()
                .take(8)
                .map(|p| (p.lhs.clone(), p.rhs.clone()))
                .collect()
        };
        assert_ne!(
            pairs(&a),
            pairs(&c),
            "bases must decorrelate even at equal seeds"
        );
    }

    #[test]
    fn bundle_rejects_small_bases() {
        assert!(matches!(
            synthesize_bundle(6, 0),
            Err(ArithError::UnsupportedBase { base: 6, min: 7 })
        ));
        assert!(synthesize_bundle(7, 0).is_ok());
    }

    #[test]
    fn grade_accepts_suffixed_subscripted_and_padded_forms() {
        assert!(grade("The sum is 67_8.", "67", 8));
        assert!(grade("67₈", "67", 8));
        assert!(grade("answer: 0067", "67", 8));
        assert!(grade("= 67", "67", 8));
        assert!(grade("42_10", "42", 10));
        assert!(grade("42₁₀", "42", 10));
        assert!(grade("It's ff_16", "FF", 16));
    }

    #[test]
    fn grade_takes_the_last_valid_numeral() {
        assert!(grade("54_8 + 13_8 = 67_8", "67", 8));
        assert!(!grade("67 then I changed my mind: 70", "67", 8));
        // Tokens that are not valid octal numerals are skipped entirely.
        assert!(grade("67 (decimal would be 89)", "67", 8));
    }

    #[test]
    fn grade_rejects_decimal_leaks_and_empty_responses() {
        // 54_8 + 13_8 = 67_8; a decimal-sum leak answers 55.
        assert!(!grade("55", "67", 8));
        assert!(!grade("", "67", 8));
        assert!(!grade("no digits here", "67", 8));
        // Wrong-base marker is not a valid numeral for this base.
        assert!(!grade("67_9", "67", 8));
    }

    #[test]
    fn grade_accepts_every_exemplar_it_generates() {
        let bundle = synthesize_bundle(8, 21).unwrap();
        for p in bundle.train_2d.iter().take(50) {
            assert!(grade(&render_exemplar(p), &p.answer, 8), "{p:?}");
        }
    }

    #[test]
    fn grade_normalizes_case_and_value() {
        assert!(grade("2A_16", "2a", 16));
        assert!(!grade("2A_16", "2b", 16));
        let problems = vec![("110", "110", 2, true), ("110", "11", 2, false)];
        for (resp, exp, base, verdict) in problems {
            assert_eq!(grade(resp, exp, base), verdict);
        }
    }
}
