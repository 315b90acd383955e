//! Reference implementations written without looking at the optimized
//! code paths: a character-vector interpreter for programs and a full-table
//! Levenshtein distance.

#![allow(dead_code)]

use tabxform::grammar::{Transformation, Unit, UnitChain};

fn lower(c: char) -> char {
    let m: Vec<char> = c.to_lowercase().collect();
    if m.len() == 1 {
        m[0]
    } else {
        c
    }
}

fn upper(c: char) -> char {
    let m: Vec<char> = c.to_uppercase().collect();
    if m.len() == 1 {
        m[0]
    } else {
        c
    }
}

pub fn unit(u: &Unit, input: &[char]) -> Vec<char> {
    match u {
        Unit::Substr { start, end } => {
            let end = match end {
                Some(e) if *e < input.len() => *e,
                _ => input.len(),
            };
            let mut out = Vec::new();
            let mut i = *start;
            while i < end {
                out.push(input[i]);
                i += 1;
            }
            out
        }
        Unit::Split { delimiter, part } => {
            let mut parts: Vec<Vec<char>> = vec![Vec::new()];
            for &c in input {
                if c == *delimiter {
                    parts.push(Vec::new());
                } else {
                    parts.last_mut().unwrap().push(c);
                }
            }
            parts.get(*part).cloned().unwrap_or_default()
        }
        Unit::Lower => input.iter().map(|&c| lower(c)).collect(),
        Unit::Upper => input.iter().map(|&c| upper(c)).collect(),
        Unit::Literal { text } => text.as_str().chars().collect(),
    }
}

pub fn chain(c: &UnitChain, input: &[char]) -> Vec<char> {
    let mut cur = input.to_vec();
    for u in c.units() {
        cur = unit(u, &cur);
    }
    cur
}

pub fn run(t: &Transformation, input: &str) -> String {
    let chars: Vec<char> = input.chars().collect();
    let mut out = Vec::new();
    for c in t.chains() {
        out.extend(chain(c, &chars));
    }
    out.into_iter().collect()
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..=a.len() {
        d[i][0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}
