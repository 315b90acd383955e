mod support;

use proptest::prelude::*;
use support::oracle;
use tabxform::grammar::{
    apply_chain, random_source, random_transformation, GrammarConfig, Transformation, Unit, UnitChain,
    DEFAULT_ALPHABET,
};
use tabxform::rng::Seed;

#[test]
fn agrees_with_reference_interpreter() {
    let cfg = GrammarConfig::default();
    let mut alphabet: Vec<char> = DEFAULT_ALPHABET.chars().collect();
    alphabet.extend(['É', 'ß', 'ǅ', 'İ', 'é']);
    let mut rng = Seed(2024).rng();
    for _ in 0..10_000 {
        let t = random_transformation(&mut rng, &cfg, 1..=6);
        let s = random_source(&mut rng, 0..=45, &alphabet);
        assert_eq!(t.apply(s.as_str()), oracle::run(&t, s.as_str()), "{t} on {s:?}");
    }
}

#[test]
fn running_example_programs() {
    let t: Transformation = "substr(0,1)|lower + split(' ',1)|lower".parse().unwrap();
    assert_eq!(t.apply("Justin Trudeau"), "jtrudeau");
    assert_eq!(t.apply("Jean Chretien"), "jchretien");
    assert_eq!(oracle::run(&t, "Jean Chretien"), "jchretien");

    let split = Transformation::new(vec![UnitChain::new(vec![Unit::split('/', 1)]).unwrap()]).unwrap();
    assert_eq!(oracle::run(&split, "2023/01/05"), "01");
    assert_eq!(split.apply("2023/01/05"), "01");
}

#[test]
fn literal_chain_ignores_input() {
    let c = UnitChain::new(vec![Unit::literal("x"), Unit::Upper]).unwrap();
    for s in ["", "abc", "ZZZ"] {
        assert_eq!(apply_chain(&c, s), "X");
    }
}

/// Positions some substring or split of `t` could read, given input `s`.
fn untouched_positions(t: &Transformation, s: &str) -> Vec<usize> {
    // Only chains made purely of substr units with fixed bounds have a
    // statically known footprint; anything else reads everything.
    let n = s.chars().count();
    let mut read = vec![false; n];
    for c in t.chains() {
        let mut lo = 0usize;
        let mut hi = n;
        for u in c.units() {
            match u {
                Unit::Substr { start, end } => {
                    let len = hi - lo;
                    let e = end.map_or(len, |e| e.min(len));
                    let s0 = (*start).min(e);
                    hi = lo + e;
                    lo += s0;
                }
                Unit::Lower | Unit::Upper => {}
                Unit::Literal { .. } => {
                    lo = 0;
                    hi = 0;
                }
                Unit::Split { .. } => {
                    lo = 0;
                    hi = n;
                    read.iter_mut().for_each(|r| *r = true);
                }
            }
        }
        read[lo..hi].iter_mut().for_each(|r| *r = true);
    }
    (0..n).filter(|&i| !read[i]).collect()
}

#[test]
fn unread_positions_do_not_matter() {
    let cfg = GrammarConfig { param_bound: 12, ..GrammarConfig::default() };
    let alphabet: Vec<char> = DEFAULT_ALPHABET.chars().collect();
    let mut rng = Seed(77).rng();
    let mut checked = 0;
    for _ in 0..3_000 {
        let t = random_transformation(&mut rng, &cfg, 1..=3);
        let s = random_source(&mut rng, 1..=20, &alphabet);
        let free = untouched_positions(&t, s.as_str());
        if free.is_empty() {
            continue;
        }
        let mut chars: Vec<char> = s.as_str().chars().collect();
        for &i in &free {
            chars[i] = if chars[i] == 'q' { 'Q' } else { 'q' };
        }
        let mutated: String = chars.into_iter().collect();
        assert_eq!(t.apply(s.as_str()), t.apply(&mutated), "{t} on {s:?}");
        checked += 1;
    }
    assert!(checked > 100);
}

proptest! {
    #[test]
    fn lower_is_idempotent(s in "\\PC{0,20}") {
        let once = UnitChain::new(vec![Unit::Lower]).unwrap();
        let twice = UnitChain::new(vec![Unit::Lower, Unit::Lower]).unwrap();
        prop_assert_eq!(apply_chain(&once, &s), apply_chain(&twice, &s));
    }

    #[test]
    fn text_form_round_trips(seed in any::<u64>()) {
        let t = random_transformation(&mut Seed(seed).rng(), &GrammarConfig::default(), 1..=6);
        let back: Transformation = t.to_string().parse().unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(Transformation::from_json(&t.to_json()).unwrap(), t);
    }
}
