//! Example-driven search for a transformation consistent with a context.
//!
//! Candidate chains are proposed from evidence: every segment of a target
//! that also occurs in the corresponding source (up to case) yields the
//! extraction programs able to cut that occurrence out (substring, split
//! part, split part then substring, split part then split part, substring
//! window then split part), optionally followed by a case unit. A candidate survives only if its output on every
//! example is a substring of that example's target. Literals are offered
//! wherever all targets continue with the same text.
//!
//! Surviving candidates label the edges of a DAG over position vectors (one
//! cursor per example target). The cheapest path from all-zero cursors to
//! all-end cursors, ordered by (chain count, unit count, canonical text), is
//! the returned program. The ordering is additive over chains apart from the
//! text, and text comparison of `head + rest` is monotone in `rest` for a
//! fixed head, so memoizing the best suffix per state is exact.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::grammar::{apply_chain, apply_unit, lower_char, upper_char, GrammarConfig, Transformation, Unit, UnitChain};
use crate::model::{CellValue, Context};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub grammar: GrammarConfig,
    /// Upper bound on distinct candidate chains evaluated per context.
    pub max_candidates: usize,
    /// Wall-clock budget per context, in milliseconds.
    pub time_budget_ms: u64,
    /// Propose only chains whose output matches a target segment. Turning
    /// this off proposes every extraction of every source substring; the
    /// result is the same, only slower.
    pub evidence_pruning: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            // table cells can be far longer than generated text
            grammar: GrammarConfig { param_bound: 1024, ..GrammarConfig::default() },
            max_candidates: 200_000,
            time_budget_ms: 2_000,
            evidence_pruning: true,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> crate::Result<()> {
        self.grammar.validate()?;
        if self.max_candidates == 0 || self.time_budget_ms == 0 {
            return Err(crate::Error::config("synthesis budgets must be positive"));
        }
        Ok(())
    }
}

struct Example {
    source: String,
    src: Vec<char>,
    src_folded: Vec<char>,
    tgt: Vec<char>,
    tgt_folded: Vec<char>,
}

impl Example {
    fn new(source: &str, target: &str) -> Self {
        let src: Vec<char> = source.chars().collect();
        let tgt: Vec<char> = target.chars().collect();
        Example {
            source: source.to_owned(),
            src_folded: src.iter().map(|&c| lower_char(c)).collect(),
            tgt_folded: tgt.iter().map(|&c| lower_char(c)).collect(),
            src,
            tgt,
        }
    }
}

/// A chain that fits every example, with where it fits.
struct Candidate {
    chain: UnitChain,
    text: String,
    units: usize,
    /// Output length per example.
    lens: Vec<usize>,
    /// Start positions in each target where the output occurs; `None` when
    /// the output is empty there (fits anywhere).
    fits: Vec<Option<Vec<usize>>>,
}

#[derive(Clone)]
struct Best {
    chains: usize,
    units: usize,
    text: String,
    step: Option<Step>,
}

#[derive(Clone)]
enum Step {
    Chain(usize),
    Literal(String),
}

/// Text of a program made of chain `head` followed by `rest`.
fn joined<'a>(head: &'a str, rest: &'a Best) -> impl Iterator<Item = char> + 'a {
    let sep = if rest.chains == 0 { "" } else { " + " };
    head.chars().chain(sep.chars()).chain(rest.text.chars())
}

struct Budget {
    max_candidates: usize,
    deadline: Instant,
    exhausted: bool,
}

impl Budget {
    fn check_time(&mut self) -> bool {
        if Instant::now() > self.deadline {
            self.exhausted = true;
        }
        !self.exhausted
    }
}

struct Search<'a> {
    cfg: &'a SynthesisConfig,
    examples: Vec<Example>,
    delimiters: Vec<char>,
    seen: HashSet<UnitChain>,
    candidates: Vec<Candidate>,
    budget: Budget,
}

/// Finds the smallest program that maps every context source to its target,
/// or `None` if there is none within the grammar limits and budgets.
pub fn synthesize_transformation(context: &Context, cfg: &SynthesisConfig) -> Option<Transformation> {
    let examples = context.examples();
    let sources: HashSet<&str> = examples.iter().map(|e| e.source.as_str()).collect();
    if sources.len() != examples.len() {
        return None;
    }
    if examples.iter().all(|e| e.target.is_empty()) {
        let chain = UnitChain::from_units_unchecked(vec![Unit::substr(0, 0)]);
        return Transformation::new(vec![chain]).ok();
    }

    let mut search = Search::new(context, cfg);
    search.propose();
    if search.budget.exhausted {
        log::debug!("synthesis budget exhausted after {} candidates", search.seen.len());
        return None;
    }
    let program = search.solve()?;
    let sound = examples.iter().all(|e| program.apply(e.source.as_str()) == e.target.as_str());
    debug_assert!(sound, "unsound program {program}");
    sound.then_some(program)
}

impl<'a> Search<'a> {
    fn new(context: &Context, cfg: &'a SynthesisConfig) -> Self {
        let examples: Vec<Example> = context
            .examples()
            .iter()
            .map(|e| Example::new(e.source.as_str(), e.target.as_str()))
            .collect();
        let delimiters: BTreeSet<char> = examples
            .iter()
            .flat_map(|e| e.src.iter().copied())
            .filter(|c| !c.is_alphanumeric())
            .collect();
        Search {
            cfg,
            examples,
            delimiters: delimiters.into_iter().collect(),
            seen: HashSet::new(),
            candidates: Vec::new(),
            budget: Budget {
                max_candidates: cfg.max_candidates,
                deadline: Instant::now() + Duration::from_millis(cfg.time_budget_ms),
                exhausted: false,
            },
        }
    }

    fn propose(&mut self) {
        for i in 0..self.examples.len() {
            let spans = self.source_spans(i);
            for (x, y) in spans {
                if !self.budget.check_time() {
                    return;
                }
                for units in self.extractions(i, x, y) {
                    self.offer_with_case(i, x, y, units);
                    if self.budget.exhausted {
                        return;
                    }
                }
            }
        }
    }

    /// Source spans `[x, y)` of example `i` worth extracting.
    fn source_spans(&self, i: usize) -> Vec<(usize, usize)> {
        let ex = &self.examples[i];
        let (n, m) = (ex.src.len(), ex.tgt.len());
        let mut spans = BTreeSet::new();
        if !self.cfg.evidence_pruning {
            for x in 0..n {
                for y in x + 1..=n {
                    spans.insert((x, y));
                }
            }
            return spans.into_iter().collect();
        }
        // run[p][x]: length of the longest case-insensitive common run of
        // tgt[p..] and src[x..]
        let mut run = vec![vec![0usize; n + 1]; m + 1];
        for p in (0..m).rev() {
            for x in (0..n).rev() {
                if ex.tgt_folded[p] == ex.src_folded[x] {
                    run[p][x] = run[p + 1][x + 1] + 1;
                }
            }
        }
        for row in run.iter().take(m) {
            for (x, &r) in row.iter().enumerate().take(n) {
                for len in 1..=r {
                    spans.insert((x, x + len));
                }
            }
        }
        spans.into_iter().collect()
    }

    /// Unit sequences (without case units) that turn source `i` into
    /// exactly `src[x..y]`.
    fn extractions(&self, i: usize, x: usize, y: usize) -> Vec<Vec<Unit>> {
        let src = &self.examples[i].src;
        let n = src.len();
        let bound = self.cfg.grammar.param_bound;
        let max_stack = self.cfg.grammar.max_stack;
        let mut out = Vec::new();
        if x == 0 && y == n {
            out.push(Vec::new());
            out.push(vec![Unit::substr_to_end(0)]);
        }
        if x < bound && y < bound {
            out.push(vec![Unit::substr(x, y)]);
        }
        if y == n && x < bound {
            out.push(vec![Unit::substr_to_end(x)]);
        }
        let seg = &src[x..y];
        for &d in &self.delimiters {
            if seg.contains(&d) {
                continue;
            }
            // the part of src split on d that contains [x, y)
            let part = src[..x].iter().filter(|&&c| c == d).count();
            if part >= bound {
                continue;
            }
            let ps = src[..x].iter().rposition(|&c| c == d).map_or(0, |p| p + 1);
            let pe = src[y..].iter().position(|&c| c == d).map_or(n, |p| y + p);
            let split = Unit::split(d, part);
            if ps == x && pe == y {
                out.push(vec![split]);
                continue;
            }
            if max_stack < 2 {
                continue;
            }
            let (rx, ry) = (x - ps, y - ps);
            if rx < bound && ry < bound {
                out.push(vec![split.clone(), Unit::substr(rx, ry)]);
            }
            if y == pe && rx < bound {
                out.push(vec![split.clone(), Unit::substr_to_end(rx)]);
            }
            // a second split inside the part, on a delimiter bordering the span
            let left = (x > ps).then(|| src[x - 1]);
            let right = (y < pe).then(|| src[y]);
            for d2 in [left, right].into_iter().flatten() {
                if d2 == d || d2.is_alphanumeric() || seg.contains(&d2) {
                    continue;
                }
                let left_ok = x == ps || src[x - 1] == d2;
                let right_ok = y == pe || src[y] == d2;
                if !(left_ok && right_ok) {
                    continue;
                }
                let part2 = src[ps..x].iter().filter(|&&c| c == d2).count();
                if part2 < bound {
                    let u = vec![split.clone(), Unit::split(d2, part2)];
                    if !out.contains(&u) {
                        out.push(u);
                    }
                }
            }
        }
        if max_stack >= 2 {
            self.window_splits(src, x, y, &mut out);
        }
        out
    }

    /// `substr(a, b)|split(d, p)` forms: a window around `[x, y)` in which
    /// the span is a whole part. Only spans bordered by `d` need them; the
    /// rest are plain substrings.
    fn window_splits(&self, src: &[char], x: usize, y: usize, out: &mut Vec<Vec<Unit>>) {
        let n = src.len();
        let bound = self.cfg.grammar.param_bound;
        let seg = &src[x..y];
        for &d in &self.delimiters {
            let left = x > 0 && src[x - 1] == d;
            let right = y < n && src[y] == d;
            if !(left || right) || seg.contains(&d) {
                continue;
            }
            let starts = if left { 0..x + 1 } else { x..x + 1 };
            let mut ends: Vec<Option<usize>> = vec![if y == n { None } else { Some(y) }];
            if right {
                ends.extend((y + 1..=n).map(Some));
                ends.push(None);
            }
            for a in starts.filter(|&a| a < bound) {
                let part = src[a..x].iter().filter(|&&c| c == d).count();
                if part >= bound {
                    continue;
                }
                for &b in &ends {
                    if b.is_some_and(|b| b >= bound) {
                        continue;
                    }
                    // the window is the span itself: a plain substring
                    let plain = a == x && b.map_or(y == n, |b| b == y);
                    if plain {
                        continue;
                    }
                    let window = match b {
                        Some(b) => Unit::substr(a, b),
                        None => Unit::substr_to_end(a),
                    };
                    out.push(vec![window, Unit::split(d, part)]);
                }
            }
        }
    }

    /// Offers `units`, and `units` followed by a case unit, for every form
    /// whose output on example `i` is consistent with its evidence.
    fn offer_with_case(&mut self, i: usize, x: usize, y: usize, units: Vec<Unit>) {
        let ex = &self.examples[i];
        let raw = &ex.src[x..y];
        let max_stack = self.cfg.grammar.max_stack;
        let mut forms: Vec<Vec<Unit>> = Vec::with_capacity(3);
        // bare form needs at least one unit
        if !units.is_empty() {
            forms.push(units.clone());
        }
        if units.len() < max_stack {
            let has_lower = raw.iter().any(|&c| lower_char(c) != c);
            let has_upper = raw.iter().any(|&c| upper_char(c) != c);
            if has_lower || !self.cfg.evidence_pruning || units.is_empty() {
                let mut u = units.clone();
                u.push(Unit::Lower);
                forms.push(u);
            }
            if has_upper || !self.cfg.evidence_pruning || units.is_empty() {
                let mut u = units;
                u.push(Unit::Upper);
                forms.push(u);
            }
        }
        for f in forms {
            self.offer(UnitChain::from_units_unchecked(f));
            if self.budget.exhausted {
                return;
            }
        }
    }

    fn offer(&mut self, chain: UnitChain) {
        if self.seen.contains(&chain) {
            return;
        }
        if self.seen.len() >= self.budget.max_candidates {
            self.budget.exhausted = true;
            return;
        }
        self.seen.insert(chain.clone());
        if self.redundant_case(&chain) {
            return;
        }
        let mut lens = Vec::with_capacity(self.examples.len());
        let mut fits = Vec::with_capacity(self.examples.len());
        let mut any_output = false;
        for ex in &self.examples {
            let out: Vec<char> = apply_chain(&chain, &ex.source).chars().collect();
            if out.is_empty() {
                lens.push(0);
                fits.push(None);
                continue;
            }
            let positions = occurrences(&ex.tgt, &out);
            if positions.is_empty() {
                return;
            }
            any_output = true;
            lens.push(out.len());
            fits.push(Some(positions));
        }
        if any_output {
            let units = chain.len();
            self.candidates.push(Candidate { text: order_text(&chain.to_string()), chain, units, lens, fits });
        }
    }

    /// A trailing case unit that changes nothing on any example would only
    /// win ties by its name, so such chains are dropped.
    fn redundant_case(&self, chain: &UnitChain) -> bool {
        let units = chain.units();
        let Some(last) = units.last() else { return false };
        if !matches!(last, Unit::Lower | Unit::Upper) {
            return false;
        }
        let head = &units[..units.len() - 1];
        self.examples.iter().all(|ex| {
            let before = head.iter().fold(ex.source.clone(), |acc, u| apply_unit(u, &acc));
            apply_unit(last, &before) == before
        })
    }

    /// Keeps one candidate per transition signature (output lengths and fit
    /// positions), the cheapest by (units, text). Chain texts with equal
    /// unit counts are prefix-free, so a cheaper head never loses after
    /// concatenation and the optimum is unchanged.
    fn dedupe(&mut self) {
        let mut best: HashMap<(&[usize], &[Option<Vec<usize>>]), usize> = HashMap::new();
        for (i, c) in self.candidates.iter().enumerate() {
            best.entry((&c.lens, &c.fits))
                .and_modify(|j| {
                    let o = &self.candidates[*j];
                    if (c.units, &c.text) < (o.units, &o.text) {
                        *j = i;
                    }
                })
                .or_insert(i);
        }
        let mut keep: Vec<usize> = best.into_values().collect();
        keep.sort_unstable();
        let mut taken: Vec<Option<Candidate>> = std::mem::take(&mut self.candidates).into_iter().map(Some).collect();
        self.candidates = keep.into_iter().map(|i| taken[i].take().expect("kept once")).collect();
    }

    fn solve(&mut self) -> Option<Transformation> {
        self.dedupe();
        // candidates indexed by their fit position in the first example
        let first_len = self.examples[0].tgt.len();
        let mut by_first: Vec<Vec<usize>> = vec![Vec::new(); first_len + 1];
        let mut anywhere: Vec<usize> = Vec::new();
        for (ci, c) in self.candidates.iter().enumerate() {
            match &c.fits[0] {
                None => anywhere.push(ci),
                Some(ps) => ps.iter().for_each(|&p| by_first[p].push(ci)),
            }
        }
        let goal: Vec<usize> = self.examples.iter().map(|e| e.tgt.len()).collect();
        let start = vec![0; goal.len()];
        let mut memo: HashMap<Vec<usize>, Option<Best>> = HashMap::new();
        let best = self.best_from(&start, &goal, &by_first, &anywhere, &mut memo)?;
        if best.chains > self.cfg.grammar.max_chains || self.budget.exhausted {
            return None;
        }

        let mut chains = Vec::with_capacity(best.chains);
        let mut state = start;
        while state != goal {
            let b = memo.get(&state)?.as_ref()?;
            match b.step.as_ref()? {
                Step::Chain(ci) => {
                    let c = &self.candidates[*ci];
                    chains.push(c.chain.clone());
                    for (s, l) in state.iter_mut().zip(&c.lens) {
                        *s += l;
                    }
                }
                Step::Literal(text) => {
                    chains.push(UnitChain::from_units_unchecked(vec![Unit::literal(text.as_str())]));
                    let l = text.chars().count();
                    state.iter_mut().for_each(|s| *s += l);
                }
            }
        }
        Transformation::new(chains).ok()
    }

    fn best_from(
        &mut self,
        state: &[usize],
        goal: &[usize],
        by_first: &[Vec<usize>],
        anywhere: &[usize],
        memo: &mut HashMap<Vec<usize>, Option<Best>>,
    ) -> Option<Best> {
        if state == goal {
            return Some(Best { chains: 0, units: 0, text: String::new(), step: None });
        }
        if let Some(b) = memo.get(state) {
            return b.clone();
        }
        if !self.budget.check_time() {
            return None;
        }
        let mut best: Option<Best> = None;
        let consider = |best: &mut Option<Best>, units: usize, text: &str, rest: Best, step: Step| {
            let key = (rest.chains + 1, units + rest.units);
            let better = match best.as_ref() {
                None => true,
                Some(b) => match key.cmp(&(b.chains, b.units)) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => joined(text, &rest).lt(b.text.chars()),
                },
            };
            if better {
                let text = joined(text, &rest).collect();
                *best = Some(Best { chains: key.0, units: key.1, text, step: Some(step) });
            }
        };

        let fitting: Vec<usize> = by_first[state[0]]
            .iter()
            .chain(anywhere)
            .copied()
            .filter(|&ci| self.fits_at(ci, state))
            .collect();
        for ci in fitting {
            let next: Vec<usize> = state.iter().zip(&self.candidates[ci].lens).map(|(s, l)| s + l).collect();
            if let Some(rest) = self.best_from(&next, goal, by_first, anywhere, memo) {
                let c = &self.candidates[ci];
                let (units, text) = (c.units, c.text.clone());
                consider(&mut best, units, &text, rest, Step::Chain(ci));
            }
        }

        // literals: text every remaining target continues with
        if state.iter().zip(goal).all(|(s, g)| s < g) {
            let common = self.common_prefix_len(state);
            for len in 1..=common {
                let lit: String = self.examples[0].tgt[state[0]..state[0] + len].iter().collect();
                if CellValue::from(lit.as_str()).validate().is_err() {
                    continue;
                }
                let next: Vec<usize> = state.iter().map(|s| s + len).collect();
                if let Some(rest) = self.best_from(&next, goal, by_first, anywhere, memo) {
                    let text = order_text(&Unit::literal(lit.as_str()).to_string());
                    consider(&mut best, 1, &text, rest, Step::Literal(lit));
                }
            }
        }
        memo.insert(state.to_vec(), best.clone());
        best
    }

    fn fits_at(&self, ci: usize, state: &[usize]) -> bool {
        let c = &self.candidates[ci];
        c.fits.iter().zip(state).enumerate().all(|(i, (fit, &p))| match fit {
            None => true,
            Some(ps) => i == 0 || ps.binary_search(&p).is_ok(),
        })
    }

    fn common_prefix_len(&self, state: &[usize]) -> usize {
        let first = &self.examples[0].tgt[state[0]..];
        let mut len = first.len();
        for (ex, &p) in self.examples.iter().zip(state).skip(1) {
            let other = &ex.tgt[p..];
            len = len.min(first.iter().zip(other).take_while(|(a, b)| a == b).count());
        }
        len
    }
}

/// Tie-break key for the canonical text: `END` sorts before any number, so
/// an open-ended substring wins over a fixed end that happens to fit.
/// Control characters are escaped in the text form, so this stays injective.
fn order_text(text: &str) -> String {
    text.replace("END", "\u{1}")
}

fn occurrences(hay: &[char], needle: &[char]) -> Vec<usize> {
    if needle.len() > hay.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len()).filter(|&p| &hay[p..p + needle.len()] == needle).collect()
}
