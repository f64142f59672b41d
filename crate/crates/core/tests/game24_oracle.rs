//! The 24-game verifier checked against a brute-force solver and a fuzzed
//! corpus of invalid expressions.

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reasonconf_core::tasks::{verify_game24, Game24Verdict};

#[derive(Clone, Debug)]
enum Tree {
    Leaf(i64),
    Node(char, Box<Tree>, Box<Tree>),
}

impl Tree {
    fn value(&self) -> Option<Rational64> {
        match self {
            Tree::Leaf(v) => Some(Rational64::from_integer(*v)),
            Tree::Node(op, l, r) => {
                let (a, b) = (l.value()?, r.value()?);
                match op {
                    '+' => Some(a + b),
                    '-' => Some(a - b),
                    '*' => Some(a * b),
                    '/' if b == Rational64::from_integer(0) => None,
                    '/' => Some(a / b),
                    _ => unreachable!(),
                }
            }
        }
    }

    fn render(&self) -> String {
        match self {
            Tree::Leaf(v) => v.to_string(),
            Tree::Node(op, l, r) => format!("({} {op} {})", l.render(), r.render()),
        }
    }

    fn leaves_mut(&mut self) -> Vec<&mut i64> {
        match self {
            Tree::Leaf(v) => vec![v],
            Tree::Node(_, l, r) => {
                let mut out = l.leaves_mut();
                out.extend(r.leaves_mut());
                out
            }
        }
    }
}

const OPS: [char; 4] = ['+', '-', '*', '/'];

/// Every fully parenthesised expression over `items` that evaluates to 24.
fn solve(items: Vec<(Tree, Option<Rational64>)>, found: &mut Vec<Tree>, cap: usize) {
    if found.len() >= cap {
        return;
    }
    if items.len() == 1 {
        if items[0].1 == Some(Rational64::from_integer(24)) {
            found.push(items[0].0.clone());
        }
        return;
    }
    for i in 0..items.len() {
        for j in 0..items.len() {
            if i == j {
                continue;
            }
            for op in OPS {
                let node = Tree::Node(op, Box::new(items[i].0.clone()), Box::new(items[j].0.clone()));
                let value = node.value();
                if value.is_none() {
                    continue;
                }
                let mut rest: Vec<_> = items
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .map(|(_, x)| x.clone())
                    .collect();
                rest.push((node, value));
                solve(rest, found, cap);
            }
        }
    }
}

fn solutions(numbers: &[i64], cap: usize) -> Vec<Tree> {
    let items = numbers
        .iter()
        .map(|&v| (Tree::Leaf(v), Some(Rational64::from_integer(v))))
        .collect();
    let mut found = Vec::new();
    solve(items, &mut found, cap);
    found
}

fn random_tree(numbers: &[i64], rng: &mut ChaCha8Rng) -> Tree {
    let mut items: Vec<Tree> = numbers.iter().map(|&v| Tree::Leaf(v)).collect();
    items.shuffle(rng);
    while items.len() > 1 {
        let i = rng.random_range(0..items.len());
        let a = items.swap_remove(i);
        let j = rng.random_range(0..items.len());
        let b = items.swap_remove(j);
        let op = OPS[rng.random_range(0..4)];
        items.push(Tree::Node(op, Box::new(a), Box::new(b)));
    }
    items.pop().unwrap()
}

fn random_numbers(rng: &mut ChaCha8Rng) -> Vec<i64> {
    (0..4).map(|_| rng.random_range(1..=13)).collect()
}

fn code(verdict: &Game24Verdict) -> &'static str {
    match verdict {
        Game24Verdict::Valid => "valid",
        Game24Verdict::Invalid(r) => r.code(),
    }
}

#[test]
fn worked_example_verifies() {
    assert!(verify_game24("(4 + 8) * (6 - 4) = 24", &[4, 4, 6, 8]).is_valid());
    assert!(verify_game24("(4 + 8) * (6 - 4)", &[8, 6, 4, 4]).is_valid());
}

#[test]
fn every_brute_force_solution_is_accepted() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut solvable = 0;
    for _ in 0..200 {
        let numbers = random_numbers(&mut rng);
        let found = solutions(&numbers, 40);
        if !found.is_empty() {
            solvable += 1;
        }
        for tree in found {
            let text = tree.render();
            let verdict = verify_game24(&text, &numbers);
            assert!(verdict.is_valid(), "{text} over {numbers:?}: {verdict:?}");
            let with_rhs = format!("{text} = 24");
            assert!(verify_game24(&with_rhs, &numbers).is_valid(), "{with_rhs}");
        }
    }
    assert!(solvable > 50, "only {solvable} solvable multisets");
}

#[test]
fn known_unsolvable_multisets_have_no_solution() {
    for numbers in [[1, 1, 1, 1], [1, 1, 1, 2], [13, 13, 13, 13]] {
        assert!(solutions(&numbers, 1).is_empty(), "{numbers:?}");
    }
    assert!(!solutions(&[3, 3, 8, 8], 1).is_empty());
}

#[test]
fn fuzzed_invalid_expressions_are_rejected_with_the_right_code() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = std::collections::BTreeMap::new();
    let mut cases = 0;
    while cases < 1000 {
        let numbers = random_numbers(&mut rng);
        let (text, expected) = match cases % 5 {
            0 => {
                // One leaf replaced by a value outside the multiset.
                let mut tree = random_tree(&numbers, &mut rng);
                let mut leaves = tree.leaves_mut();
                let k = rng.random_range(0..leaves.len());
                *leaves[k] = 14 + rng.random_range(0..10);
                (tree.render(), "numbers")
            }
            1 => {
                let tree = random_tree(&numbers, &mut rng);
                match tree.value() {
                    Some(v) if v == Rational64::from_integer(24) => continue,
                    Some(_) => (tree.render(), "value"),
                    None => (tree.render(), "divzero"),
                }
            }
            2 => {
                let text = random_tree(&numbers, &mut rng).render();
                let cuttable: Vec<usize> = text
                    .char_indices()
                    .filter(|(_, c)| "()+-*/".contains(*c))
                    .map(|(i, _)| i)
                    .collect();
                let cut = cuttable[rng.random_range(0..cuttable.len())];
                let mut broken = text.clone();
                broken.remove(cut);
                (broken, "parse")
            }
            3 => {
                let x = rng.random_range(1..=13);
                let (y, z) = (rng.random_range(1..=13), rng.random_range(1..=13));
                let op = OPS[rng.random_range(0..4)];
                let text = format!("({y} {op} {z}) / ({x} - {x})");
                let mut nums = vec![x, x, y, z];
                nums.shuffle(&mut rng);
                let verdict = verify_game24(&text, &nums);
                assert_eq!(code(&verdict), "divzero", "{text} over {nums:?}");
                *counts.entry("divzero").or_insert(0) += 1;
                cases += 1;
                continue;
            }
            _ => {
                let Some(tree) = solutions(&numbers, 1).pop() else {
                    continue;
                };
                let rhs = rng.random_range(25..100);
                (format!("{} = {rhs}", tree.render()), "rhs")
            }
        };
        let verdict = verify_game24(&text, &numbers);
        assert_eq!(code(&verdict), expected, "{text} over {numbers:?}: {verdict:?}");
        *counts.entry(expected).or_insert(0) += 1;
        cases += 1;
    }
    for c in ["numbers", "value", "parse", "divzero", "rhs"] {
        assert!(counts.get(c).copied().unwrap_or(0) > 50, "{counts:?}");
    }
}
